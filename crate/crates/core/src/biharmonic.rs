//! The fourth-order energy `J(u) = 1/2 int |Laplacian u|^2 + int F(u)` with
//! power-sum nonlinearities: hypothesis checks, radial energies of plateau test
//! profiles in any dimension, and a grid model for `d <= 3`.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{invalid, Error, Result};
use crate::profile::{dilate_biharmonic, RadialProfile};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::radial::sphere_area;
use crate::spectral::{par_sum, ComplexField, GridSpec, Spectral, SymbolField};

/// `F(s) = sum_j c_j |s|^sigma_j` with every `sigma_j >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSumNonlinearity {
    /// `(c_j, sigma_j)` pairs.
    pub terms: Vec<(f64, f64)>,
}

impl PowerSumNonlinearity {
    pub fn new(terms: Vec<(f64, f64)>) -> Result<Self> {
        for &(c, sigma) in &terms {
            if !c.is_finite() || !sigma.is_finite() {
                return Err(invalid("F", "coefficients and exponents must be finite"));
            }
            if sigma < 2.0 {
                return Err(invalid("F", format!("exponent {sigma} below 2")));
            }
        }
        Ok(Self { terms })
    }

    pub fn value(&self, s: f64) -> f64 {
        let a = s.abs();
        self.terms.iter().map(|&(c, sigma)| c * a.powf(sigma)).sum()
    }

    /// `F'(s)` for `s >= 0`.
    pub fn derivative(&self, s: f64) -> f64 {
        let a = s.abs();
        self.terms.iter().map(|&(c, sigma)| c * sigma * a.powf(sigma - 1.0)).sum()
    }

    /// `F'(s) / s`, continued to `s = 0` by its limit.
    pub fn ratio(&self, s: f64) -> f64 {
        let a = s.abs();
        self.terms.iter().map(|&(c, sigma)| c * sigma * a.powf(sigma - 2.0)).sum()
    }

    pub fn max_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(2.0, f64::max)
    }
}

impl FromStr for PowerSumNonlinearity {
    type Err = Error;

    /// Parses sums like `-1*|s|^3 + 0.5*|s|^2.5`; a bare `|s|^q` has coefficient 1.
    fn from_str(text: &str) -> Result<Self> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(invalid("F", "empty expression"));
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        for (i, ch) in compact.char_indices() {
            let after_exp = i > 0 && matches!(compact.as_bytes()[i - 1], b'e' | b'E' | b'^' | b'*' | b'+' | b'-');
            if (ch == '+' || ch == '-') && i > start && !after_exp {
                pieces.push(&compact[start..i]);
                start = i;
            }
        }
        pieces.push(&compact[start..]);
        let mut terms = Vec::new();
        for piece in pieces {
            let bad = || invalid("F", format!("cannot parse term '{piece}'"));
            let at = piece.find("|s|^").ok_or_else(bad)?;
            let coef = piece[..at].trim_end_matches('*');
            let coef = coef.strip_prefix('+').unwrap_or(coef);
            let c = match coef {
                "" => 1.0,
                "-" => -1.0,
                other => other.parse::<f64>().map_err(|_| bad())?,
            };
            let sigma = piece[at + 4..].parse::<f64>().map_err(|_| bad())?;
            terms.push((c, sigma));
        }
        Self::new(terms)
    }
}

impl std::fmt::Display for PowerSumNonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(c, s)| format!("{c}*|s|^{s}")).collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Fit {
    pub c1: f64,
    pub c2: f64,
    /// The sampled `c1` or `c2` is still growing at the end of the sample
    /// range, so no finite constant works.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub n_dim: usize,
    /// Sampled `s0` nearest to 1 (logarithmically) with `F(s0) < 0`.
    pub f1_witness: Option<f64>,
    pub f1_value: Option<f64>,
    pub f0: F0Fit,
    pub fp_note: String,
    pub vanishing_q_range: Option<(f64, f64)>,
}

/// Samples on `s = 10^(j/250)`, `j = -1000..=1000`.
fn log_samples() -> Vec<f64> {
    (-1000..=1000).map(|j| 10f64.powf(j as f64 / 250.0)).collect()
}

/// `(2, 2N/(N-4))` for `N > 4`, the exponents where vanishing is controlled.
pub fn vanishing_q_range(n_dim: usize) -> Option<(f64, f64)> {
    (n_dim > 4).then(|| (2.0, 2.0 * n_dim as f64 / (n_dim as f64 - 4.0)))
}

pub fn check_hypotheses(f: &PowerSumNonlinearity, n_dim: usize) -> Result<HypothesisReport> {
    if n_dim == 0 {
        return Err(invalid("n_dim", "must be at least 1"));
    }
    let s = log_samples();
    let f1_witness = s
        .iter()
        .copied()
        .filter(|&x| f.value(x) < 0.0)
        .min_by(|a, b| a.ln().abs().total_cmp(&b.ln().abs()));
    let upper = 2.0 + 4.0 / n_dim as f64;
    let neg = |x: f64| (-f.value(x)).max(0.0);
    let small: Vec<f64> = s.iter().filter(|&&x| x <= 1.0).map(|&x| neg(x) / (x * x)).collect();
    let large: Vec<f64> = s.iter().filter(|&&x| x >= 1.0).map(|&x| neg(x) / x.powf(upper)).collect();
    let c1 = small.iter().copied().fold(0.0, f64::max);
    let c2 = large.iter().copied().fold(0.0, f64::max);
    let growing = |edge: f64, next: f64| edge > 0.0 && edge > next * (1.0 + 1e-9);
    let violated = growing(small[0], small[1]) || growing(large[large.len() - 1], large[large.len() - 2]);
    Ok(HypothesisReport {
        n_dim,
        f1_witness,
        f1_value: f1_witness.map(|x| f.value(x)),
        f0: F0Fit { c1, c2, violated },
        fp_note: format!(
            "growth bound |F'(s)| <= c1 |s|^q + c2 |s|^p not enforced; exponents present: {:?}",
            f.terms.iter().map(|t| t.1 - 1.0).collect::<Vec<_>>()
        ),
        vanishing_q_range: vanishing_q_range(n_dim),
    })
}

/// `s0` on `r < Rn`, `s0 cos^2(pi/2 (r - Rn))` on `[Rn, Rn + 1]`, zero beyond.
pub fn plateau_profile(s0: f64, rn: f64) -> Result<RadialProfile> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(invalid("s0", format!("{s0} must be positive")));
    }
    if !(rn > 0.0 && rn.is_finite()) {
        return Err(invalid("Rn", format!("{rn} must be positive")));
    }
    Ok(RadialProfile::Plateau { s0, inner: rn })
}

/// Pieces per smooth interval, so a unit ring gets over a thousand nodes.
const PIECES: usize = 70;

const OPTS: QuadratureOptions = QuadratureOptions {
    rel_tol: 1e-13,
    abs_tol: 1e-300,
    max_intervals: 100_000,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiharmonicEnergy {
    /// `1/2 int |Laplacian u|^2`.
    pub d2_part: f64,
    /// `int F(u)`.
    pub t_part: f64,
    pub total: f64,
}

/// Radial Laplacian `u'' + (N - 1) u' / r`.
pub fn radial_laplacian(profile: &RadialProfile, r: f64, n_dim: usize) -> f64 {
    if r == 0.0 {
        return n_dim as f64 * profile.d2(0.0);
    }
    profile.d2(r) + (n_dim as f64 - 1.0) * profile.d1(r) / r
}

fn nodes(profile: &RadialProfile) -> (f64, Vec<f64>) {
    let rmax = profile.support_radius();
    let mut edges = vec![0.0];
    edges.extend(profile.breakpoints().into_iter().filter(|&b| b > 0.0 && b < rmax));
    edges.push(rmax);
    let mut cuts = Vec::new();
    for w in edges.windows(2) {
        for j in 0..PIECES {
            cuts.push(w[0] + (w[1] - w[0]) * j as f64 / PIECES as f64);
        }
    }
    (rmax, cuts)
}

/// `J` of a radial profile in `R^N` by adaptive quadrature split at the
/// profile's smoothness breakpoints.
pub fn radial_biharmonic_energy(
    profile: &RadialProfile,
    f: &PowerSumNonlinearity,
    n_dim: usize,
) -> Result<BiharmonicEnergy> {
    if n_dim < 2 {
        return Err(invalid("n_dim", "radial energy needs N >= 2"));
    }
    let area = sphere_area(n_dim);
    let (rmax, cuts) = nodes(profile);
    let w = |r: f64| r.powi(n_dim as i32 - 1);
    let d2 = integrate(|r| 0.5 * radial_laplacian(profile, r, n_dim).powi(2) * w(r), 0.0, rmax, &cuts, OPTS)?;
    let t = integrate(|r| f.value(profile.value(r)) * w(r), 0.0, rmax, &cuts, OPTS)?;
    let d2_part = area * d2.value;
    let t_part = area * t.value;
    Ok(BiharmonicEnergy {
        d2_part,
        t_part,
        total: d2_part + t_part,
    })
}

/// `omega_(N-1) F(s0) Rn^N / N`, the exact contribution of the flat interior.
pub fn plateau_interior_term(s0: f64, rn: f64, f: &PowerSumNonlinearity, n_dim: usize) -> f64 {
    sphere_area(n_dim) * f.value(s0) * rn.powi(n_dim as i32) / n_dim as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegScanRow {
    #[serde(rename = "Rn")]
    pub rn: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub d2_part: f64,
    pub t_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegScan {
    pub rows: Vec<NegScanRow>,
    /// Smallest scanned `Rn` from which `J` stays negative to the end of the scan.
    pub negative_from: Option<f64>,
    /// Log-log slope of `-J` between the two largest `Rn` with `J < 0`.
    pub growth_exponent: Option<f64>,
    pub vanishing_q_range: Option<(f64, f64)>,
}

impl NegScan {
    /// CSV with header `Rn,J`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("Rn,J\n");
        for r in &self.rows {
            s.push_str(&format!("{:.17e},{:.17e}\n", r.rn, r.j));
        }
        s
    }
}

pub fn negativity_scan(s0: f64, rns: &[f64], f: &PowerSumNonlinearity, n_dim: usize) -> Result<NegScan> {
    if rns.is_empty() {
        return Err(invalid("Rn", "empty list"));
    }
    if rns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("Rn", "must be strictly increasing"));
    }
    let rows = rns
        .par_iter()
        .map(|&rn| {
            let e = radial_biharmonic_energy(&plateau_profile(s0, rn)?, f, n_dim)?;
            Ok(NegScanRow {
                rn,
                j: e.total,
                d2_part: e.d2_part,
                t_part: e.t_part,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail = rows.iter().rev().take_while(|r| r.j < 0.0).count();
    let negative_from = (tail > 0).then(|| rows[rows.len() - tail].rn);
    let growth_exponent = if tail >= 2 {
        let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
        Some((b.j / a.j).ln() / (b.rn / a.rn).ln())
    } else {
        None
    };
    Ok(NegScan {
        rows,
        negative_from,
        growth_exponent,
        vanishing_q_range: vanishing_q_range(n_dim),
    })
}

/// Comparison of `J(u_lambda)` with `lambda^(2 - 8/N) D(u) + lambda^2 T(u)`,
/// where `D` and `T` are the two parts of `J(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub lambda: f64,
    pub d2_ratio: f64,
    pub d2_expected: f64,
    pub t_ratio: f64,
    pub t_expected: f64,
    pub mass_ratio: f64,
    /// Largest relative deviation among the three ratios.
    pub max_rel_error: f64,
}

pub fn scaling_check(
    profile: &RadialProfile,
    lambda: f64,
    f: &PowerSumNonlinearity,
    n_dim: usize,
) -> Result<ScalingCheck> {
    let base = radial_biharmonic_energy(profile, f, n_dim)?;
    let scaled_profile = dilate_biharmonic(profile, lambda, n_dim)?;
    let scaled = radial_biharmonic_energy(&scaled_profile, f, n_dim)?;
    let mass = |p: &RadialProfile| -> Result<f64> {
        let (rmax, cuts) = nodes(p);
        Ok(integrate(|r| p.value(r).powi(2) * r.powi(n_dim as i32 - 1), 0.0, rmax, &cuts, OPTS)?.value)
    };
    let mass_ratio = (mass(&scaled_profile)? / mass(profile)?).sqrt();
    let d2_expected = lambda.powf(2.0 - 8.0 / n_dim as f64);
    let t_expected = lambda * lambda;
    let d2_ratio = scaled.d2_part / base.d2_part;
    let t_ratio = scaled.t_part / base.t_part;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    Ok(ScalingCheck {
        lambda,
        d2_ratio,
        d2_expected,
        t_ratio,
        t_expected,
        mass_ratio,
        max_rel_error: rel(d2_ratio, d2_expected)
            .max(rel(t_ratio, t_expected))
            .max(rel(mass_ratio, lambda)),
    })
}

/// `1/2 <u, Bilaplacian u> + int F(|u|)` on a periodic grid of dimension `d <= 3`.
#[derive(Debug, Clone)]
pub struct BiharmonicModel {
    spectral: Spectral,
    symbol: SymbolField,
    f: PowerSumNonlinearity,
}

impl BiharmonicModel {
    pub fn new(spec: GridSpec, f: PowerSumNonlinearity) -> Self {
        Self {
            spectral: Spectral::new(spec),
            symbol: SymbolField::bilaplacian(spec),
            f,
        }
    }

    pub fn nonlinearity(&self) -> &PowerSumNonlinearity {
        &self.f
    }
}

impl EnergyModel for BiharmonicModel {
    fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    fn stiff_symbol(&self) -> &SymbolField {
        &self.symbol
    }

    fn nonlinear_terms(&self, u: &ComplexField) -> (f64, f64, Vec<f64>) {
        let modulus: Vec<f64> = u.values().par_iter().map(|z| z.norm()).collect();
        let t = par_sum(modulus.len(), |i| self.f.value(modulus[i])) * u.spec().cell_volume();
        let v = modulus.par_iter().map(|&s| self.f.ratio(s)).collect();
        (0.0, t, v)
    }

    fn exponent(&self) -> f64 {
        self.f.max_exponent()
    }

    /// The multiplier enters as `Bilaplacian u + F'(u) = -omega u`.
    fn multiplier_sign(&self) -> f64 {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, orbit_distance, PropagatorConfig};
    use crate::groundstate::{minimize, SolverConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use num_complex::Complex64;

    fn cubic() -> PowerSumNonlinearity {
        "-1*|s|^3".parse().unwrap()
    }

    #[test]
    fn parses_power_sums() {
        let f: PowerSumNonlinearity = "-1*|s|^3 + 0.5*|s|^2.5 - |s|^4".parse().unwrap();
        assert_eq!(f.terms, vec![(-1.0, 3.0), (0.5, 2.5), (-1.0, 4.0)]);
        let g: PowerSumNonlinearity = "2e-1*|s|^2".parse().unwrap();
        assert_eq!(g.terms, vec![(0.2, 2.0)]);
        assert!("|s|^1.5".parse::<PowerSumNonlinearity>().is_err());
        assert!("s^3".parse::<PowerSumNonlinearity>().is_err());
        assert!("".parse::<PowerSumNonlinearity>().is_err());
        let h: PowerSumNonlinearity = f.to_string().parse().unwrap();
        assert_eq!(h, f);
    }

    #[test]
    fn derivative_and_ratio() {
        let f: PowerSumNonlinearity = "-1*|s|^3 + 2*|s|^2".parse().unwrap();
        for s in [0.3, 1.0, 2.5] {
            let h = 1e-6;
            let fd = (f.value(s + h) - f.value(s - h)) / (2.0 * h);
            assert_relative_eq!(f.derivative(s), fd, max_relative = 1e-8);
            assert_relative_eq!(f.ratio(s) * s, f.derivative(s), max_relative = 1e-14);
        }
        assert_eq!(f.ratio(0.0), 4.0);
        assert_eq!(cubic().ratio(0.0), 0.0);
    }

    #[test]
    fn hypotheses() {
        let rep = check_hypotheses(&cubic(), 5).unwrap();
        assert_eq!(rep.f1_witness, Some(1.0));
        assert_eq!(rep.f1_value, Some(-1.0));
        assert!(rep.f0.violated);
        assert_eq!(rep.vanishing_q_range, Some((2.0, 10.0)));
        let pos: PowerSumNonlinearity = "1*|s|^2".parse().unwrap();
        let rep = check_hypotheses(&pos, 5).unwrap();
        assert_eq!(rep.f1_witness, None);
        assert!(!rep.f0.violated);
        // Subcritical growth at both ends: finite constants.
        let ok: PowerSumNonlinearity = "-1*|s|^2.5".parse().unwrap();
        let rep = check_hypotheses(&ok, 5).unwrap();
        assert!(!rep.f0.violated);
        assert_relative_eq!(rep.f0.c1, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rep.f0.c2, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn plateau_rejects_bad_parameters() {
        assert!(plateau_profile(0.0, 1.0).is_err());
        assert!(plateau_profile(1.0, -1.0).is_err());
    }

    #[test]
    fn zero_profile_has_zero_energy() {
        let p = RadialProfile::gaussian(0.0, 1.0);
        let e = radial_biharmonic_energy(&p, &cubic(), 5).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn interior_term_is_exact() {
        let (s0, rn) = (1.0, 5.0);
        let f = cubic();
        let area = sphere_area(5);
        let inside = integrate(|r| f.value(s0) * r.powi(4), 0.0, rn, &[], OPTS).unwrap().value * area;
        assert_relative_eq!(inside, plateau_interior_term(s0, rn, &f, 5), max_relative = 1e-14);
        assert_relative_eq!(
            plateau_interior_term(s0, rn, &f, 5),
            -8.0 * PI * PI / 3.0 * 625.0,
            max_relative = 1e-14
        );
    }

    /// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|i| {
                let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    fn oracle_j(s0: f64, rn: f64, n_dim: usize) -> f64 {
        let gl = gauss_legendre(40);
        let u = |r: f64| if r < rn { s0 } else { s0 * (0.5 * PI * (r - rn)).cos().powi(2) };
        let up = |r: f64| if r < rn { 0.0 } else { -PI * s0 * (0.5 * PI * (r - rn)).cos() * (0.5 * PI * (r - rn)).sin() };
        let upp = |r: f64| {
            if r < rn {
                0.0
            } else {
                let a = 0.5 * PI * (r - rn);
                0.5 * PI * PI * s0 * (a.sin().powi(2) - a.cos().powi(2))
            }
        };
        let integrand = |r: f64| {
            let lap = upp(r) + (n_dim as f64 - 1.0) * up(r) / r;
            (0.5 * lap * lap - u(r).powi(3)) * r.powi(n_dim as i32 - 1)
        };
        let composite = |a: f64, b: f64, m: usize| -> f64 {
            let h = (b - a) / m as f64;
            (0..m)
                .map(|j| {
                    let (lo, hi) = (a + j as f64 * h, a + (j + 1) as f64 * h);
                    gl.iter()
                        .map(|(x, w)| w * integrand(0.5 * (lo + hi) + 0.5 * (hi - lo) * x))
                        .sum::<f64>()
                        * 0.5
                        * (hi - lo)
                })
                .sum()
        };
        sphere_area(n_dim) * (composite(0.0, rn, 8) + composite(rn, rn + 1.0, 200))
    }

    #[test]
    fn matches_gauss_legendre_oracle() {
        let e = radial_biharmonic_energy(&plateau_profile(1.0, 5.0).unwrap(), &cubic(), 5).unwrap();
        assert_relative_eq!(e.total, oracle_j(1.0, 5.0, 5), max_relative = 1e-8);
        let e = radial_biharmonic_energy(&plateau_profile(0.7, 40.0).unwrap(), &cubic(), 5).unwrap();
        assert_relative_eq!(e.total, oracle_j(0.7, 40.0, 5), max_relative = 1e-8);
    }

    #[test]
    fn nonnegative_f_gives_positive_j() {
        let f: PowerSumNonlinearity = "1*|s|^3".parse().unwrap();
        let scan = negativity_scan(1.0, &[1.0, 5.0, 20.0], &f, 5).unwrap();
        assert!(scan.rows.iter().all(|r| r.j > 0.0));
        assert_eq!(scan.negative_from, None);
        assert!(scan.to_csv().starts_with("Rn,J\n"));
    }

    #[test]
    fn scaling_identity_for_gaussians_and_plateaus() {
        let f = cubic();
        for profile in [RadialProfile::gaussian(1.0, 1.3), plateau_profile(1.0, 3.0).unwrap()] {
            for lambda in [0.5, 1.0, 2.0] {
                let c = scaling_check(&profile, lambda, &f, 5).unwrap();
                assert!(c.max_rel_error < 1e-8, "{c:?}");
            }
        }
    }

    #[test]
    fn free_flow_keeps_lowest_mode() {
        let spec = GridSpec::new(1, 32, 2.0 * PI).unwrap();
        let zero = PowerSumNonlinearity::new(vec![]).unwrap();
        let m = BiharmonicModel::new(spec, zero);
        let u0 = ComplexField::from_real_fn(spec, |x| 1.0 + 0.3 * x[0].cos() + 0.1 * (3.0 * x[0]).sin());
        let cfg = SolverConfig {
            dt: 1.0,
            tol: 1e-10,
            max_iters: 2000,
            rho: 1.0,
            seed: RadialProfile::gaussian(1.0, 1.0),
            restore_after: 10,
        };
        let r = crate::groundstate::minimize_from(&m, &u0, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.energy().abs() < 1e-18);
        let mean = r.u.values()[0];
        assert!(r.u.values().iter().all(|z| (z - mean).norm() < 1e-9));
    }

    #[test]
    fn one_dimensional_ground_state_and_standing_wave() {
        let spec = GridSpec::new(1, 128, 40.0).unwrap();
        let f: PowerSumNonlinearity = "-0.25*|s|^4".parse().unwrap();
        let m = BiharmonicModel::new(spec, f);
        let cfg = SolverConfig {
            dt: 0.5,
            tol: 1e-9,
            max_iters: 20000,
            rho: 3.0,
            seed: RadialProfile::gaussian(1.0, 2.0),
            restore_after: 10,
        };
        let r = minimize(&m, &cfg).unwrap();
        assert!(r.converged, "{}", r.residual);
        assert_eq!(r.status, crate::groundstate::SolverStatus::Converged);
        assert!(r.energy() < 0.0);
        assert_relative_eq!(r.u.l2_norm(), 3.0, max_relative = 1e-12);
        // Residual with the biharmonic sign convention.
        let res = m.residual(&r.u, r.omega);
        assert!(res.l2_norm() < 1e-6 * m.gradient(&r.u).l2_norm());
        // The orbit defect is pure splitting error: second order in dt.
        let defect = |dt: f64| {
            let prop = PropagatorConfig { dt, t_end: 0.1, record_stride: 10, strict_conservation: true };
            let evo = evolve(&m, &r.u, &prop, Some(&r.u)).unwrap();
            (evo.max_orbit_distance().unwrap(), evo.psi)
        };
        let (d1, _) = defect(1e-3);
        let (d2, psi) = defect(5e-4);
        assert!(d1 < 1e-4, "{d1}");
        assert!((3.5..4.5).contains(&(d1 / d2)), "{d1} {d2}");
        // psi(t) = exp(i omega t) u.
        let fit = orbit_distance(m.spectral(), &psi, &r.u).unwrap();
        let expect = Complex64::from_polar(1.0, r.omega * 0.1);
        assert!((Complex64::from_polar(1.0, fit.phase) - expect).norm() < 1e-5);
    }

    #[test]
    fn biharmonic_charge_is_conserved() {
        let spec = GridSpec::new(1, 64, 20.0).unwrap();
        let m = BiharmonicModel::new(spec, cubic());
        let psi = ComplexField::from_fn(spec, |x| Complex64::from_polar((-x[0] * x[0] / 4.0).exp(), 0.3 * x[0]));
        let prop = PropagatorConfig { dt: 1e-3, t_end: 10.0, record_stride: 1000, strict_conservation: true };
        let evo = evolve(&m, &psi, &prop, None).unwrap();
        assert!(evo.abort.is_none());
        assert!(evo.max_charge_drift() < 1e-12, "{}", evo.max_charge_drift());
    }
}
