//! Normalized ground states by semi-implicit gradient flow on the mass sphere,
//! charge scans with threshold detection, and the subadditivity and splitting
//! checks built on top of them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, EnergyModel};
use crate::error::{invalid, Error, Result};
use crate::hartree::{Hartree, BOUNDARY_MASS_THRESHOLD};
use crate::profile::RadialProfile;
use crate::spectral::{par_sum, ComplexField, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Imaginary-time step.
    pub dt: f64,
    /// Target relative L2 residual of the Euler-Lagrange equation.
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    /// Initial guess, sampled about the box center.
    pub seed: RadialProfile,
    /// Consecutive accepted steps after which a halved `dt` is restored.
    pub restore_after: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            tol: 1e-6,
            max_iters: 20_000,
            rho: 1.0,
            seed: RadialProfile::gaussian(1.0, 2.0),
            restore_after: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol", format!("{} must be positive", self.tol)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("{} must be positive", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    NotConverged,
    /// Converged, but the state reaches the box boundary: the box, not the
    /// energy, is holding it together.
    NonBinding,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverStatus::Converged => "converged",
            SolverStatus::NotConverged => "not-converged",
            SolverStatus::NonBinding => "non-binding",
        })
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub u: ComplexField,
    pub rho: f64,
    pub omega: f64,
    pub breakdown: EnergyBreakdown,
    /// Relative L2 residual of the Euler-Lagrange equation.
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    pub status: SolverStatus,
    pub boundary_mass: f64,
    pub dt_final: f64,
    /// Energy after every accepted step, starting with the seed.
    pub energies: Vec<f64>,
}

/// Scalar part of a [`GroundStateResult`], for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub rho: f64,
    pub omega: f64,
    pub breakdown: EnergyBreakdown,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    pub status: SolverStatus,
    pub boundary_mass: f64,
    pub dt_final: f64,
    pub min_energy_seen: f64,
}

impl GroundStateResult {
    pub fn energy(&self) -> f64 {
        self.breakdown.total
    }

    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            rho: self.rho,
            omega: self.omega,
            breakdown: self.breakdown,
            residual: self.residual,
            iters: self.iters,
            converged: self.converged,
            status: self.status,
            boundary_mass: self.boundary_mass,
            dt_final: self.dt_final,
            min_energy_seen: self.energies.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Multiplier and relative residual at `u`, given `FFT(u)` and `FFT(V u)`.
struct Stationarity {
    /// `<u, E'(u)> / ||u||^2`.
    lambda: f64,
    omega: f64,
    residual: f64,
}

fn stationarity<M: EnergyModel + ?Sized>(
    model: &M,
    uh: &[Complex64],
    vuh: &[Complex64],
    mass: f64,
) -> Stationarity {
    let spec = model.spec();
    let w = spec.cell_volume() / spec.len() as f64;
    let s = model.stiff_symbol().values();
    let pairing = par_sum(uh.len(), |i| (uh[i].conj() * (s[i] * uh[i] + vuh[i])).re) * w;
    let lambda = pairing / mass;
    let r2 = par_sum(uh.len(), |i| (s[i] * uh[i] + vuh[i] - lambda * uh[i]).norm_sqr()) * w;
    let su = (par_sum(uh.len(), |i| (s[i] * uh[i]).norm_sqr()) * w).sqrt();
    let vu = (par_sum(uh.len(), |i| vuh[i].norm_sqr()) * w).sqrt();
    let scale = su + vu + lambda.abs() * mass.sqrt();
    Stationarity {
        lambda,
        omega: model.multiplier_sign() * lambda,
        residual: if scale > 0.0 { r2.sqrt() / scale } else { 0.0 },
    }
}

/// Minimizes the model energy on the sphere `||u||_2 = rho`, starting from the
/// configured seed profile centered in the box.
pub fn minimize<M: EnergyModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<GroundStateResult> {
    config.validate()?;
    let u0 = config.seed.sample(*model.spec(), [0.0; 3]);
    minimize_from(model, &u0, config)
}

/// Minimizes starting from an explicit field; `config.seed` is ignored.
pub fn minimize_from<M: EnergyModel + ?Sized>(
    model: &M,
    u0: &ComplexField,
    config: &SolverConfig,
) -> Result<GroundStateResult> {
    config.validate()?;
    u0.spec().check_same(model.spec())?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial field".into()));
    }
    let norm0 = u0.l2_norm();
    if norm0 == 0.0 {
        return Err(Error::ZeroCharge);
    }
    let rho = config.rho;
    let mass = rho * rho;
    let sp = model.spectral();
    let symbol = model.stiff_symbol().values();

    let mut u = u0.clone();
    u.scale(rho / norm0);
    let mut uh = sp.forward(&u).into_values();
    let mut eval = model.evaluate_with(&u, Some(&uh));
    let mut energies = vec![eval.breakdown.total];
    let mut dt = config.dt;
    let mut streak = 0usize;
    let mut converged = false;
    let mut iters = 0usize;
    let mut stat;

    loop {
        let mut vuh: Vec<Complex64> = u
            .values()
            .par_iter()
            .zip(eval.potential.par_iter())
            .map(|(z, v)| z * v)
            .collect();
        sp.forward_in_place(&mut vuh);
        stat = stationarity(model, &uh, &vuh, mass);
        if stat.residual <= config.tol {
            converged = true;
            break;
        }
        if iters >= config.max_iters {
            break;
        }
        iters += 1;

        let current = eval.breakdown.total;
        let slack = 1e-13 * (eval.breakdown.kinetic.abs() + eval.breakdown.hartree.abs() + eval.breakdown.power.abs());
        let mut accepted = false;
        let lambda = stat.lambda;
        while dt >= config.dt * 1e-12 {
            // The multiplier shift makes fixed points of the step exact
            // solutions of the Euler-Lagrange equation.
            let mut trial_h: Vec<Complex64> = uh
                .par_iter()
                .zip(vuh.par_iter())
                .zip(symbol.par_iter())
                .map(|((a, b), s)| (a * (1.0 + dt * lambda) - dt * b) / (1.0 + dt * s))
                .collect();
            let mut values = trial_h.clone();
            sp.inverse_in_place(&mut values);
            let mut trial = ComplexField::from_values(*model.spec(), values)?;
            let norm = trial.l2_norm();
            if !(norm > 0.0 && norm.is_finite()) {
                dt *= 0.5;
                streak = 0;
                continue;
            }
            let c = rho / norm;
            trial.scale(c);
            trial_h.par_iter_mut().for_each(|z| *z *= c);
            let trial_eval = model.evaluate_with(&trial, Some(&trial_h));
            if trial_eval.breakdown.total <= current + slack {
                u = trial;
                uh = trial_h;
                eval = trial_eval;
                energies.push(eval.breakdown.total);
                streak += 1;
                if streak >= config.restore_after && dt < config.dt {
                    dt = config.dt;
                    streak = 0;
                }
                accepted = true;
                break;
            }
            dt *= 0.5;
            streak = 0;
        }
        if !accepted {
            log::warn!("step size collapsed below {:.1e} at iteration {iters}", config.dt * 1e-12);
            break;
        }
    }

    let boundary_mass = model.boundary_mass(&u);
    let status = if !converged {
        SolverStatus::NotConverged
    } else if boundary_mass > BOUNDARY_MASS_THRESHOLD {
        SolverStatus::NonBinding
    } else {
        SolverStatus::Converged
    };
    if !converged {
        log::warn!(
            "rho = {rho}: residual {:.3e} above tol {:.1e} after {iters} iterations",
            stat.residual,
            config.tol
        );
    }
    Ok(GroundStateResult {
        u,
        rho,
        omega: stat.omega,
        breakdown: eval.breakdown,
        residual: stat.residual,
        iters,
        converged,
        status,
        boundary_mass,
        dt_final: dt,
        energies,
    })
}

/// How the grid changes with the charge along a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanGeometry {
    /// One grid for every charge.
    Fixed { spec: GridSpec },
    /// Box edge `L_ref (rho / rho_ref)^beta`, following the dilation
    /// `u_theta = theta^(1 - 3 beta/2) u(x / theta^beta)` so that warm starts
    /// map grid points onto grid points. Cold-start seeds are dilated with
    /// the box and the step size with its square.
    Dilated { spec: GridSpec, rho_ref: f64, beta: f64 },
}

impl ScanGeometry {
    pub fn spec_for(&self, rho: f64) -> Result<GridSpec> {
        match *self {
            ScanGeometry::Fixed { spec } => Ok(spec),
            ScanGeometry::Dilated { spec, rho_ref, beta } => {
                if !(rho_ref > 0.0) {
                    return Err(invalid("rho_ref", "must be positive"));
                }
                GridSpec::new(spec.dim(), spec.n_axis(), spec.length() * (rho / rho_ref).powf(beta))
            }
        }
    }

    /// Carries a state of charge `from` to a warm start for charge `to`.
    pub fn transport(&self, u: &ComplexField, from: f64, to: f64) -> Result<ComplexField> {
        let theta = to / from;
        match *self {
            ScanGeometry::Fixed { .. } => Ok(u.scaled(Complex64::new(theta, 0.0))),
            ScanGeometry::Dilated { beta, .. } => {
                let spec = self.spec_for(to)?;
                let amp = theta.powf(1.0 - 0.5 * spec.dim() as f64 * beta);
                ComplexField::from_values(spec, u.values().iter().map(|z| z * amp).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub rho: f64,
    #[serde(rename = "I")]
    pub energy: f64,
    pub omega: f64,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    pub status: SolverStatus,
    pub boundary_mass: f64,
    pub box_length: f64,
}

impl ScanPoint {
    fn from_result(r: &GroundStateResult) -> Self {
        Self {
            rho: r.rho,
            energy: r.energy(),
            omega: r.omega,
            residual: r.residual,
            iters: r.iters,
            converged: r.converged,
            status: r.status,
            boundary_mass: r.boundary_mass,
            box_length: r.u.spec().length(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<ScanPoint>,
}

impl Curve {
    /// CSV with header `rho,I,omega,converged`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,I,omega,converged\n");
        for p in &self.points {
            s.push_str(&format!("{:.17e},{:.17e},{:.17e},{}\n", p.rho, p.energy, p.omega, p.converged));
        }
        s
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

/// Runs a charge scan; returns the curve and the final states in scan order.
pub struct Scan<'a, M> {
    pub geometry: ScanGeometry,
    pub make_model: &'a (dyn Fn(GridSpec) -> Result<M> + Sync),
    pub config: SolverConfig,
    pub warm_start: bool,
}

impl<M: EnergyModel> Scan<'_, M> {
    fn solve(&self, rho: f64, start: Option<(&ComplexField, f64)>) -> Result<GroundStateResult> {
        let spec = self.geometry.spec_for(rho)?;
        let model = (self.make_model)(spec)?;
        let mut config = SolverConfig { rho, ..self.config.clone() };
        if let ScanGeometry::Dilated { spec: base, .. } = self.geometry {
            let ratio = spec.length() / base.length();
            config.seed = config.seed.scaled(1.0, ratio);
            config.dt *= ratio * ratio;
        }
        match start {
            Some((u, from)) => minimize_from(&model, &self.geometry.transport(u, from, rho)?, &config),
            None => minimize(&model, &config),
        }
    }

    pub fn run(&self, rhos: &[f64]) -> Result<(Curve, Vec<GroundStateResult>)> {
        if rhos.is_empty() {
            return Err(invalid("rho_list", "must not be empty"));
        }
        if rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("rho_list", "entries must be positive"));
        }
        if rhos.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("rho_list", "must be strictly increasing"));
        }
        let results = if self.warm_start {
            let mut out: Vec<GroundStateResult> = Vec::with_capacity(rhos.len());
            for &rho in rhos {
                let start = out.last().map(|r| (&r.u, r.rho));
                let r = self.solve(rho, start)?;
                log::info!("rho = {rho}: I = {:.6e}, status {}", r.energy(), r.status);
                out.push(r);
            }
            out
        } else {
            rhos.par_iter().map(|&rho| self.solve(rho, None)).collect::<Result<Vec<_>>>()?
        };
        let curve = Curve {
            points: results.iter().map(ScanPoint::from_result).collect(),
        };
        Ok((curve, results))
    }

    /// Locates the first sign change of `I` along the scan and narrows it by
    /// bisection in `rho`, warm-starting each probe from the bracket end on the
    /// same side as the first scan point.
    pub fn threshold(
        &self,
        curve: &Curve,
        states: &[GroundStateResult],
        bisections: usize,
    ) -> Result<Option<Threshold>> {
        let Some(k) = first_sign_change(curve) else {
            return Ok(None);
        };
        let lead_negative = curve.points[0].energy < 0.0;
        let (mut lo, mut hi) = (curve.points[k].rho, curve.points[k + 1].rho);
        let mut anchor = states[k].u.clone();
        let mut anchor_rho = lo;
        for _ in 0..bisections {
            let mid = 0.5 * (lo + hi);
            let r = self.solve(mid, Some((&anchor, anchor_rho)))?;
            if (r.energy() < 0.0) == lead_negative {
                lo = mid;
                anchor = r.u;
                anchor_rho = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(Threshold {
            lower: lo,
            upper: hi,
            negative_below: lead_negative,
        }))
    }
}

/// Bracket around a detected sign change of the energy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub lower: f64,
    pub upper: f64,
    /// True when the energy is negative on the low-charge side.
    pub negative_below: bool,
}

impl Threshold {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Index `k` with `I_k` and `I_{k+1}` on different sides of zero.
pub fn first_sign_change(curve: &Curve) -> Option<usize> {
    curve
        .points
        .windows(2)
        .position(|w| (w[0].energy < 0.0) != (w[1].energy < 0.0))
}

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(invalid("pchip", "need at least two matching nodes"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("pchip", "nodes must be strictly increasing"));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value at `t`, clamped to the node range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Infimum curve `rho -> min(I_rho, 0)` interpolated monotonically in
/// `rho^2`, anchored at `I_0 = 0`.
pub fn infimum_interpolant(curve: &Curve) -> Result<Pchip> {
    let mut x = vec![0.0];
    let mut y = vec![0.0];
    for p in &curve.points {
        x.push(p.rho * p.rho);
        y.push(p.energy.min(0.0));
    }
    Pchip::new(x, y)
}

/// `n` evenly spaced charges spanning the scanned points with `I < 0`.
pub fn negative_rho_grid(curve: &Curve, n: usize) -> Vec<f64> {
    let neg: Vec<f64> = curve.points.iter().filter(|p| p.energy < 0.0).map(|p| p.rho).collect();
    let (Some(lo), Some(hi)) = (
        neg.iter().copied().reduce(f64::min),
        neg.iter().copied().reduce(f64::max),
    ) else {
        return Vec::new();
    };
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityRow {
    pub rho: f64,
    pub mu: f64,
    pub i_rho: f64,
    /// `I_mu + I_sqrt(rho^2 - mu^2) - I_rho`; nonnegative when subadditive.
    pub margin: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub rows: Vec<SubadditivityRow>,
    pub violations: usize,
    pub min_relative_margin: f64,
    pub tol_rel: f64,
}

/// Checks `I_rho <= I_mu + I_sqrt(rho^2 - mu^2) + tol_rel |I_rho|` for every
/// `rho` in `rhos` with `I_rho < 0` and `n_mu` values `mu = j rho / (n_mu + 1)`.
pub fn subadditivity_check(curve: &Curve, rhos: &[f64], n_mu: usize, tol_rel: f64) -> Result<SubadditivityReport> {
    let f = infimum_interpolant(curve)?;
    let top = f.domain().1;
    let mut rows = Vec::new();
    for &rho in rhos {
        if rho * rho > top * (1.0 + 1e-12) {
            return Err(invalid("rho", format!("{rho} beyond the scanned range")));
        }
        let i_rho = f.eval(rho * rho);
        if i_rho >= 0.0 {
            continue;
        }
        for j in 1..=n_mu {
            let mu = rho * j as f64 / (n_mu + 1) as f64;
            let rest = rho * rho - mu * mu;
            let margin = f.eval(mu * mu) + f.eval(rest) - i_rho;
            rows.push(SubadditivityRow {
                rho,
                mu,
                i_rho,
                margin,
                violation: margin < -tol_rel * i_rho.abs(),
            });
        }
    }
    let violations = rows.iter().filter(|r| r.violation).count();
    let min_relative_margin = rows
        .iter()
        .map(|r| r.margin / r.i_rho.abs())
        .fold(f64::INFINITY, f64::min);
    Ok(SubadditivityReport {
        rows,
        violations,
        min_relative_margin,
        tol_rel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingRow {
    pub separation: f64,
    pub delta_n: f64,
    pub delta_m: f64,
    pub s_delta_n: f64,
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub rows: Vec<SplittingRow>,
    /// Log-log slope of `delta_n` between the two largest separations.
    pub n_decay_exponent: Option<f64>,
    /// Relative change of `s * delta_n` between the two largest separations.
    pub n_product_drift: Option<f64>,
    /// `mass(v) mass(w) / 2`, the far-field limit of `s * delta_n`.
    pub n_product_limit: f64,
}

/// Places `v` at `-s/2` and `w` at `+s/2` on the first axis and measures how
/// far the Hartree and power terms are from additive.
pub fn splitting_test(
    spec: GridSpec,
    v: &RadialProfile,
    w: &RadialProfile,
    separations: &[f64],
    p: f64,
) -> Result<SplittingReport> {
    let hartree = Hartree::new(spec)?;
    let max_sep = hartree.kernel().radius() / 2.0;
    let reach = v.support_radius().max(w.support_radius());
    let lp = |u: &ComplexField| u.lp_integral(p) / p;
    let n_term = |u: &ComplexField| -> f64 {
        let d = u.density();
        let phi = hartree.potential_of_density(&d);
        crate::hartree::hartree_energy_from(&d, &phi, spec.cell_volume())
    };
    let mut rows = Vec::with_capacity(separations.len());
    for &s in separations {
        if !(s >= 0.0) || s / 2.0 + reach > max_sep {
            return Err(invalid(
                "separation",
                format!("{s}: pair must fit inside radius {max_sep} about the center"),
            ));
        }
        let a = [-0.5 * s, 0.0, 0.0];
        let b = [0.5 * s, 0.0, 0.0];
        let fv = v.sample(spec, a);
        let fw = w.sample(spec, b);
        let sum = fv.axpy(Complex64::new(1.0, 0.0), &fw)?;
        let overlap = s < v.support_radius() + w.support_radius();
        if overlap {
            log::warn!("supports overlap at separation {s}");
        }
        let delta_n = n_term(&sum) - n_term(&fv) - n_term(&fw);
        let delta_m = -(lp(&sum) - lp(&fv) - lp(&fw));
        rows.push(SplittingRow {
            separation: s,
            delta_n,
            delta_m,
            s_delta_n: s * delta_n,
            overlap,
        });
    }
    let mut sorted: Vec<&SplittingRow> = rows.iter().collect();
    sorted.sort_by(|x, y| x.separation.total_cmp(&y.separation));
    let (n_decay_exponent, n_product_drift) = match sorted.as_slice() {
        [.., r1, r2] if r1.separation > 0.0 && r1.delta_n > 0.0 && r2.delta_n > 0.0 => (
            Some((r2.delta_n / r1.delta_n).ln() / (r2.separation / r1.separation).ln()),
            Some((r2.s_delta_n - r1.s_delta_n).abs() / r2.s_delta_n.abs()),
        ),
        _ => (None, None),
    };
    let mass = |prof: &RadialProfile| prof.sample(spec, [0.0; 3]).mass();
    Ok(SplittingReport {
        rows,
        n_decay_exponent,
        n_product_drift,
        n_product_limit: 0.5 * mass(v) * mass(w),
    })
}
