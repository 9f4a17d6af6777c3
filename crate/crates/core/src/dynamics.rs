//! Time evolution `i psi_t = S psi + V(psi) psi` by Strang splitting, charge and
//! energy monitoring, the H1 distance to a ground-state orbit, and the
//! perturbation experiment used to probe orbital stability.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{invalid, Result};
use crate::spectral::{par_sum, ComplexField, GridSpec, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between trajectory records.
    pub record_stride: usize,
    /// Abort once the relative charge drift exceeds `1e-10`.
    pub strict_conservation: bool,
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(invalid("dt", format!("{} must be finite and nonzero", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt.abs()) {
            return Err(invalid("t_end", format!("{} must be at least |dt|", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt.abs()).round() as usize
    }
}

pub const STRICT_CHARGE_DRIFT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    /// `1/2 ||psi||_2^2`.
    pub charge: f64,
    pub energy: f64,
    /// H1 distance to the reference orbit, when one is given.
    pub orbit_distance: Option<f64>,
    /// Center of mass, as a circular mean on each periodic axis.
    pub com: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AbortReason {
    ChargeDrift { t: f64, drift: f64 },
    NonFinite { t: f64 },
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub records: Vec<TrajectoryRecord>,
    /// Final state, or the last finite state when aborted.
    pub psi: ComplexField,
    pub abort: Option<AbortReason>,
}

impl Evolution {
    /// CSV with header `t,charge,energy,orbit_distance`; the distance column is
    /// empty without a reference.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,charge,energy,orbit_distance\n");
        for r in &self.records {
            let d = r.orbit_distance.map(|d| format!("{d:.17e}")).unwrap_or_default();
            s.push_str(&format!("{:.17e},{:.17e},{:.17e},{d}\n", r.t, r.charge, r.energy));
        }
        s
    }

    pub fn max_charge_drift(&self) -> f64 {
        drift(&self.records, |r| r.charge)
    }

    pub fn max_energy_drift(&self) -> f64 {
        drift(&self.records, |r| r.energy)
    }

    pub fn max_orbit_distance(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.orbit_distance)
            .collect::<Option<Vec<f64>>>()
            .map(|d| d.into_iter().fold(0.0, f64::max))
    }
}

fn drift(records: &[TrajectoryRecord], f: impl Fn(&TrajectoryRecord) -> f64) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let base = f(first);
    let scale = if base == 0.0 { 1.0 } else { base.abs() };
    records.iter().map(|r| (f(r) - base).abs() / scale).fold(0.0, f64::max)
}

/// `e^{i theta}` with the cosine nudged by one ulp when that brings
/// `|z|^2` closer to 1, so repeated multiplication does not bias the norm.
fn unit_phase(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    let defect = |c: f64| c.mul_add(c, s.mul_add(s, -1.0)).abs();
    let mut best = c;
    for cand in [c.next_up(), c.next_down()] {
        if defect(cand) < defect(best) {
            best = cand;
        }
    }
    Complex64::new(best, s)
}

/// Split-step propagator with precomputed kinetic phases.
pub struct Propagator<'a, M: ?Sized> {
    model: &'a M,
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl<'a, M: EnergyModel + ?Sized> Propagator<'a, M> {
    pub fn new(model: &'a M, dt: f64) -> Self {
        let phase = |tau: f64| -> Vec<Complex64> {
            model
                .stiff_symbol()
                .values()
                .par_iter()
                .map(|s| unit_phase(-s * tau))
                .collect()
        };
        Self {
            model,
            dt,
            half: phase(0.5 * dt),
            full: phase(dt),
        }
    }

    fn kinetic(&self, psi: &mut ComplexField, phases: &[Complex64]) {
        let sp = self.model.spectral();
        sp.forward_in_place(psi.values_mut());
        psi.values_mut()
            .par_iter_mut()
            .zip(phases.par_iter())
            .for_each(|(z, e)| *z *= e);
        sp.inverse_in_place(psi.values_mut());
    }

    /// `psi <- exp(-i dt V(|psi|)) psi`, exact because `|psi|` is invariant.
    fn potential(&self, psi: &mut ComplexField) {
        let (_, _, v) = self.model.nonlinear_terms(psi);
        let dt = self.dt;
        psi.values_mut()
            .par_iter_mut()
            .zip(v.par_iter())
            .for_each(|(z, vi)| *z *= unit_phase(-dt * vi));
    }

    /// One Strang step: half kinetic, full potential, half kinetic.
    pub fn step(&self, psi: &mut ComplexField) {
        self.kinetic(psi, &self.half);
        self.potential(psi);
        self.kinetic(psi, &self.half);
    }

    /// `steps` Strang steps with adjacent kinetic halves merged.
    pub fn steps(&self, psi: &mut ComplexField, steps: usize) {
        if steps == 0 {
            return;
        }
        self.kinetic(psi, &self.half);
        for i in 0..steps {
            self.potential(psi);
            let phases = if i + 1 == steps { &self.half } else { &self.full };
            self.kinetic(psi, phases);
        }
    }
}

/// One Strang step of size `dt`.
pub fn strang_step<M: EnergyModel + ?Sized>(model: &M, psi: &ComplexField, dt: f64) -> ComplexField {
    let mut out = psi.clone();
    Propagator::new(model, dt).step(&mut out);
    out
}

fn center_of_mass(psi: &ComplexField) -> [f64; 3] {
    let spec = *psi.spec();
    let n = spec.n_axis();
    let density = psi.density();
    let mut com = [0.0; 3];
    for (a, slot) in com.iter_mut().enumerate().take(spec.dim()) {
        let stride = n.pow((spec.dim() - 1 - a) as u32);
        let (mut c, mut s) = (0.0, 0.0);
        for (idx, d) in density.iter().enumerate() {
            let i = (idx / stride) % n;
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            c += d * angle.cos();
            s += d * angle.sin();
        }
        if c == 0.0 && s == 0.0 {
            continue;
        }
        let mean = s.atan2(c).rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * n as f64;
        *slot = (mean - (n / 2) as f64) * spec.spacing();
    }
    com
}

fn record<M: EnergyModel + ?Sized>(
    model: &M,
    psi: &ComplexField,
    t: f64,
    reference: Option<&ComplexField>,
) -> Result<TrajectoryRecord> {
    let orbit_distance = match reference {
        Some(u) => Some(orbit_distance(model.spectral(), psi, u)?.distance),
        None => None,
    };
    Ok(TrajectoryRecord {
        t,
        charge: 0.5 * psi.mass(),
        energy: model.breakdown(psi).total,
        orbit_distance,
        com: center_of_mass(psi),
    })
}

/// Evolves `psi0` to `t_end`, recording every `record_stride` steps and at the
/// end. A negative `dt` runs backward in time.
pub fn evolve<M: EnergyModel + ?Sized>(
    model: &M,
    psi0: &ComplexField,
    config: &PropagatorConfig,
    reference: Option<&ComplexField>,
) -> Result<Evolution> {
    config.validate()?;
    psi0.spec().check_same(model.spec())?;
    if let Some(u) = reference {
        u.spec().check_same(model.spec())?;
    }
    if !psi0.is_finite() {
        return Err(crate::Error::NonFinite("initial state".into()));
    }
    let prop = Propagator::new(model, config.dt);
    let total = config.steps();
    let mut psi = psi0.clone();
    let mut records = vec![record(model, &psi, 0.0, reference)?];
    let charge0 = records[0].charge;
    let mut done = 0;
    while done < total {
        let block = config.record_stride.min(total - done);
        let mut next = psi.clone();
        prop.steps(&mut next, block);
        done += block;
        let t = done as f64 * config.dt;
        if !next.is_finite() {
            log::error!("non-finite state at t = {t}");
            return Ok(Evolution {
                records,
                psi,
                abort: Some(AbortReason::NonFinite { t }),
            });
        }
        psi = next;
        let rec = record(model, &psi, t, reference)?;
        let drift = if charge0 > 0.0 { (rec.charge - charge0).abs() / charge0 } else { rec.charge };
        records.push(rec);
        if config.strict_conservation && drift > STRICT_CHARGE_DRIFT {
            log::error!("charge drift {drift:.2e} at t = {t}");
            return Ok(Evolution {
                records,
                psi,
                abort: Some(AbortReason::ChargeDrift { t, drift }),
            });
        }
    }
    Ok(Evolution { records, psi, abort: None })
}

/// Best orbit element `exp(i phase) u(. - shift h)` for a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitFit {
    pub distance: f64,
    pub shift: [i64; 3],
    pub phase: f64,
}

/// `min over grid shifts a and phases theta of ||psi - exp(i theta) u(. - a)||_H1`.
/// The shift maximizes the H1 cross-correlation, the phase is its argument, and
/// the distance is then evaluated directly.
pub fn orbit_distance(sp: &Spectral, psi: &ComplexField, u: &ComplexField) -> Result<OrbitFit> {
    let spec = *sp.spec();
    psi.spec().check_same(&spec)?;
    u.spec().check_same(&spec)?;
    let weight = h1_weight(&spec);
    let ph = sp.forward(psi).into_values();
    let uh = sp.forward(u).into_values();
    let mut corr: Vec<Complex64> = (0..spec.len())
        .into_par_iter()
        .map(|i| uh[i].conj() * ph[i] * weight[i])
        .collect();
    sp.inverse_in_place(&mut corr);
    // Ties resolve to the lowest index so the result is deterministic.
    let (best, _) = corr
        .iter()
        .enumerate()
        .fold((0usize, -1.0f64), |(bi, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bi, bv) });
    let ix = spec.unflatten(best);
    let n = spec.n_axis() as i64;
    let mut shift = [0i64; 3];
    for a in 0..spec.dim() {
        let s = ix[a] as i64;
        shift[a] = if s >= n / 2 { s - n } else { s };
    }
    let phase = corr[best].arg();
    let candidate = u.shifted(shift).scaled(Complex64::from_polar(1.0, phase));
    let diff = psi.axpy(Complex64::new(-1.0, 0.0), &candidate)?;
    let dh = sp.forward(&diff).into_values();
    let w = spec.cell_volume() / spec.len() as f64;
    let distance = (par_sum(dh.len(), |i| weight[i] * dh[i].norm_sqr()) * w).sqrt();
    Ok(OrbitFit { distance, shift, phase })
}

fn h1_weight(spec: &GridSpec) -> Vec<f64> {
    (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let k = spec.wavevector(i);
            1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
        })
        .collect()
}

/// `h ||grad u||_2`, the resolution limit of restricting translations to the grid.
pub fn grid_floor(sp: &Spectral, u: &ComplexField) -> Result<f64> {
    Ok(sp.spec().spacing() * sp.h1_seminorm(u)?)
}

/// Seeded complex noise, low-pass filtered to correlation length `smoothing`
/// grid cells, windowed by `|u| / max |u|` and scaled to unit H1 norm.
pub fn localized_perturbation(sp: &Spectral, u: &ComplexField, smoothing: f64, seed: u64) -> Result<ComplexField> {
    let spec = *sp.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Complex64> = (0..spec.len())
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let mut field = ComplexField::from_values(spec, noise)?;
    let ell = smoothing * spec.spacing();
    sp.forward_in_place(field.values_mut());
    field.values_mut().par_iter_mut().enumerate().for_each(|(i, z)| {
        let k = spec.wavevector(i);
        *z *= (-0.5 * ell * ell * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])).exp();
    });
    sp.inverse_in_place(field.values_mut());
    let peak = u.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(crate::Error::ZeroCharge);
    }
    field
        .values_mut()
        .par_iter_mut()
        .zip(u.values().par_iter())
        .for_each(|(z, w)| *z *= w.norm() / peak);
    let norm = sp.h1_norm(&field)?;
    field.scale(1.0 / norm);
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub propagator: PropagatorConfig,
    pub seed: u64,
    /// Correlation length of the perturbation in grid cells.
    pub smoothing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub delta: f64,
    /// Initial H1 distance after restoring the charge.
    pub initial_distance: f64,
    pub max_distance: f64,
    pub final_distance: f64,
    pub charge_drift: f64,
    pub energy_drift: f64,
    pub rescaled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Run with the largest `delta` and no charge restoration.
    pub control: Option<StabilityRow>,
    /// Least-squares log-log slope of `max_distance` against `delta` (positive `delta` only).
    pub slope: Option<f64>,
    pub grid_floor: f64,
}

/// Perturbs `u` by `delta` times a fixed localized H1-unit field, restores the
/// charge, evolves, and tracks the distance to the orbit of `u`.
pub fn stability_experiment<M: EnergyModel + ?Sized>(
    model: &M,
    u: &ComplexField,
    deltas: &[f64],
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    if deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(invalid("deltas", "must be finite and nonnegative"));
    }
    let sp = model.spectral();
    let v = localized_perturbation(sp, u, config.smoothing, config.seed)?;
    let rho = u.l2_norm();
    let run = |delta: f64, rescale: bool| -> Result<StabilityRow> {
        let mut psi0 = u.axpy(Complex64::new(delta, 0.0), &v)?;
        if rescale {
            let norm = psi0.l2_norm();
            psi0.scale(rho / norm);
        }
        let evo = evolve(model, &psi0, &config.propagator, Some(u))?;
        let dist: Vec<f64> = evo.records.iter().filter_map(|r| r.orbit_distance).collect();
        Ok(StabilityRow {
            delta,
            initial_distance: dist[0],
            max_distance: dist.iter().copied().fold(0.0, f64::max),
            final_distance: *dist.last().expect("at least one record"),
            charge_drift: evo.max_charge_drift(),
            energy_drift: evo.max_energy_drift(),
            rescaled: rescale,
        })
    };
    let rows = deltas.iter().map(|&d| run(d, true)).collect::<Result<Vec<_>>>()?;
    let control = match deltas.iter().copied().fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d)))) {
        Some(d) if d > 0.0 => Some(run(d, false)?),
        _ => None,
    };
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.delta > 0.0 && r.max_distance > 0.0)
        .map(|r| (r.delta.ln(), r.max_distance.ln()))
        .collect();
    Ok(StabilityReport {
        rows,
        control,
        slope: loglog_slope(&pts),
        grid_floor: grid_floor(sp, u)?,
    })
}

/// Least-squares slope through `(x, y)` pairs.
pub fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{ModelParams, SchrodingerPoisson};
    use crate::groundstate::{minimize, SolverConfig};
    use crate::profile::RadialProfile;
    use crate::spectral::SymbolField;
    use approx::assert_relative_eq;

    /// Linear model `i psi_t = -Laplacian psi`.
    struct Free {
        sp: Spectral,
        k2: SymbolField,
    }

    impl EnergyModel for Free {
        fn spectral(&self) -> &Spectral {
            &self.sp
        }
        fn stiff_symbol(&self) -> &SymbolField {
            &self.k2
        }
        fn nonlinear_terms(&self, u: &ComplexField) -> (f64, f64, Vec<f64>) {
            (0.0, 0.0, vec![0.0; u.spec().len()])
        }
        fn exponent(&self) -> f64 {
            2.0
        }
    }

    fn free(spec: GridSpec) -> Free {
        Free {
            sp: Spectral::new(spec),
            k2: SymbolField::neg_laplacian(spec),
        }
    }

    fn sp_model(n: usize, l: f64) -> SchrodingerPoisson {
        SchrodingerPoisson::new(GridSpec::new(3, n, l).unwrap(), ModelParams::schrodinger_poisson(3.2).unwrap()).unwrap()
    }

    fn bumpy(spec: GridSpec) -> ComplexField {
        ComplexField::from_fn(spec, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            Complex64::from_polar((-r2 / 2.0).exp(), 0.7 * x[0] - 0.2 * x[1])
        })
    }

    #[test]
    fn free_plane_wave_has_exact_dispersion() {
        let spec = GridSpec::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let m = free(spec);
        let psi = ComplexField::from_fn(spec, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        let cfg = PropagatorConfig { dt: 0.01, t_end: 0.5, record_stride: 7, strict_conservation: true };
        let evo = evolve(&m, &psi, &cfg, None).unwrap();
        let expect = psi.scaled(Complex64::from_polar(1.0, -9.0 * 0.5));
        for (a, b) in evo.psi.values().iter().zip(expect.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(evo.records.last().unwrap().t, 0.5);
    }

    #[test]
    fn zero_state_is_trivial() {
        let m = sp_model(16, 8.0);
        let psi = ComplexField::zeros(*m.spec());
        let cfg = PropagatorConfig { dt: 0.01, t_end: 0.05, record_stride: 1, strict_conservation: true };
        let evo = evolve(&m, &psi, &cfg, None).unwrap();
        assert!(evo.abort.is_none());
        assert!(evo.psi.values().iter().all(|z| z.norm() == 0.0));
        assert_eq!(evo.records.len(), 6);
    }

    #[test]
    fn merged_steps_match_single_steps() {
        let m = sp_model(16, 8.0);
        let psi = bumpy(*m.spec());
        let prop = Propagator::new(&m, 0.01);
        let mut a = psi.clone();
        prop.steps(&mut a, 5);
        let mut b = psi.clone();
        for _ in 0..5 {
            prop.step(&mut b);
        }
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn charge_is_conserved_and_reversal_recovers_start() {
        let m = sp_model(16, 8.0);
        let psi = bumpy(*m.spec());
        let fwd = PropagatorConfig { dt: 0.01, t_end: 0.2, record_stride: 5, strict_conservation: true };
        let evo = evolve(&m, &psi, &fwd, None).unwrap();
        assert!(evo.abort.is_none());
        assert!(evo.max_charge_drift() < 1e-13);
        let back = PropagatorConfig { dt: -0.01, ..fwd };
        let ret = evolve(&m, &evo.psi, &back, None).unwrap();
        let err = ret.psi.axpy(Complex64::new(-1.0, 0.0), &psi).unwrap().l2_norm();
        assert!(err < 1e-8 * psi.l2_norm(), "{err}");
    }

    #[test]
    fn gauge_covariance() {
        let m = sp_model(16, 8.0);
        let psi = bumpy(*m.spec());
        let g = Complex64::from_polar(1.0, 0.9);
        let a = strang_step(&m, &psi.scaled(g), 0.02);
        let b = strang_step(&m, &psi, 0.02).scaled(g);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn orbit_distance_vanishes_on_the_orbit() {
        let spec = GridSpec::new(3, 16, 8.0).unwrap();
        let sp = Spectral::new(spec);
        let u = bumpy(spec);
        let psi = u.shifted([2, -3, 5]).scaled(Complex64::from_polar(1.0, 1.3));
        let fit = orbit_distance(&sp, &psi, &u).unwrap();
        assert!(fit.distance < 1e-10, "{}", fit.distance);
        assert_eq!(fit.shift, [2, -3, 5]);
        assert_relative_eq!(fit.phase, 1.3, epsilon = 1e-12);
    }

    #[test]
    fn orbit_distance_is_bounded_by_the_perturbation() {
        let spec = GridSpec::new(3, 16, 8.0).unwrap();
        let sp = Spectral::new(spec);
        let u = RadialProfile::gaussian(1.0, 1.0).sample(spec, [0.0; 3]);
        let v = localized_perturbation(&sp, &u, 1.5, 7).unwrap();
        assert_relative_eq!(sp.h1_norm(&v).unwrap(), 1.0, max_relative = 1e-12);
        let delta = 0.05;
        let psi = u.axpy(Complex64::new(delta, 0.0), &v).unwrap();
        let d = orbit_distance(&sp, &psi, &u).unwrap().distance;
        assert!(d <= delta * (1.0 + 1e-12));
        assert!(d > 0.0);
    }

    #[test]
    fn standing_wave_stays_on_its_orbit() {
        let m = sp_model(32, 12.0);
        let cfg = SolverConfig {
            dt: 0.5,
            tol: 1e-8,
            max_iters: 5000,
            rho: 3.0,
            seed: RadialProfile::gaussian(1.0, 1.5),
            restore_after: 10,
        };
        let gs = minimize(&m, &cfg).unwrap();
        assert!(gs.converged);
        let prop = PropagatorConfig { dt: 1e-3, t_end: 0.1, record_stride: 10, strict_conservation: true };
        let evo = evolve(&m, &gs.u, &prop, Some(&gs.u)).unwrap();
        let tol = 1e-8 * sp_norm(&m, &gs.u);
        assert!(evo.max_orbit_distance().unwrap() <= 10.0 * tol.max(1e-6), "{:?}", evo.max_orbit_distance());
        // The phase rotates at the multiplier.
        let fit = orbit_distance(m.spectral(), &evo.psi, &gs.u).unwrap();
        let expected = (-gs.omega * 0.1).rem_euclid(2.0 * std::f64::consts::PI);
        let got = fit.phase.rem_euclid(2.0 * std::f64::consts::PI);
        assert!((expected - got).abs() < 1e-5, "{expected} {got}");
    }

    fn sp_norm(m: &SchrodingerPoisson, u: &ComplexField) -> f64 {
        m.spectral().h1_norm(u).unwrap()
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [1e-3f64, 1e-2, 1e-1].iter().map(|d| (d.ln(), (3.0 * d).ln())).collect();
        assert_relative_eq!(loglog_slope(&pts).unwrap(), 1.0, epsilon = 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn center_of_mass_tracks_shifts() {
        let spec = GridSpec::new(3, 16, 8.0).unwrap();
        let u = RadialProfile::gaussian(1.0, 0.8).sample(spec, [0.0; 3]);
        let c = center_of_mass(&u.shifted([2, 0, -1]));
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(c[1], 0.0, epsilon = 1e-9);
        assert_relative_eq!(c[2], -0.5, epsilon = 1e-9);
    }
}
