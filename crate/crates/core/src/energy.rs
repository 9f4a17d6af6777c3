//! The Schrodinger-Poisson energy
//! `I(u) = 1/2 int |grad u|^2 + 1/4 int phi_u |u|^2 - 1/p int |u|^p`,
//! its Euler-Lagrange residual, the Lagrange multiplier, and the dilation
//! bookkeeping `I(u_theta) = theta^2 (I(u) + f(theta, u))`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hartree::{hartree_energy_from, Hartree};
use crate::spectral::{par_sum, spectral_quadratic_form, ComplexField, GridSpec, Spectral, SymbolField};

/// Slack for comparing `p` against the rational regime boundaries.
const P_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SchrodingerPoisson,
    Biharmonic,
}

/// Which compactness regime a Schrodinger-Poisson exponent falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `p = 8/3`: ground states for small charge.
    SmallMass,
    /// `3 < p < 10/3`: ground states for large charge.
    LargeMass,
    /// `2 < p < 10/3` but outside both classified regimes.
    Unclassified,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::SmallMass => "small-mass",
            Regime::LargeMass => "large-mass",
            Regime::Unclassified => "unclassified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub kind: ModelKind,
}

impl ModelParams {
    /// Schrodinger-Poisson parameters; `p` must lie in `(2, 10/3)`, where the
    /// energy is bounded below and coercive on every sphere.
    pub fn schrodinger_poisson(p: f64) -> Result<Self> {
        let params = Self {
            p,
            kind: ModelKind::SchrodingerPoisson,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p.is_finite() {
            return Err(invalid("p", "must be finite"));
        }
        if self.kind == ModelKind::SchrodingerPoisson && !(self.p > 2.0 && self.p < 10.0 / 3.0) {
            return Err(invalid(
                "p",
                format!("{} outside (2, 10/3); the energy is not coercive on B_rho", self.p),
            ));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if (self.p - 8.0 / 3.0).abs() < P_EPS {
            Regime::SmallMass
        } else if self.p > 3.0 && self.p < 10.0 / 3.0 {
            Regime::LargeMass
        } else {
            Regime::Unclassified
        }
    }
}

/// Kinetic, Hartree and power contributions to the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "A")]
    pub kinetic: f64,
    #[serde(rename = "N")]
    pub hartree: f64,
    #[serde(rename = "M")]
    pub power: f64,
    #[serde(rename = "I")]
    pub total: f64,
    /// `||u||_2`.
    pub charge: f64,
    pub p: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, hartree: f64, power: f64, charge: f64, p: f64) -> Self {
        Self {
            kinetic,
            hartree,
            power,
            total: kinetic + hartree + power,
            charge,
            p,
        }
    }

    /// `||u||_p^p`, recovered from `M = -1/p ||u||_p^p`.
    pub fn lp_integral(&self) -> f64 {
        -self.p * self.power
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("breakdown serializes")
    }
}

/// Energy values plus the real potential `V` whose product `V u` is the
/// non-quadratic part of the energy gradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: EnergyBreakdown,
    pub potential: Vec<f64>,
}

/// A mass-constrained energy `1/2 <u, S u> + T(u)` on a periodic grid, where `S`
/// is a Fourier multiplier and `T` has gradient `V(u) u` with real `V`.
pub trait EnergyModel: Send + Sync {
    fn spectral(&self) -> &Spectral;

    /// Symbol of `S`: `|k|^2` for `-Laplacian`, `|k|^4` for the bilaplacian.
    fn stiff_symbol(&self) -> &SymbolField;

    /// `(N, M, V)`: the two non-quadratic energy terms and the potential.
    fn nonlinear_terms(&self, u: &ComplexField) -> (f64, f64, Vec<f64>);

    /// Exponent recorded in breakdowns.
    fn exponent(&self) -> f64;

    /// Sign relating the reported multiplier to `<u, E'(u)> / ||u||^2`.
    fn multiplier_sign(&self) -> f64 {
        1.0
    }

    /// Fraction of the mass where the discretization is no longer faithful.
    fn boundary_mass(&self, u: &ComplexField) -> f64 {
        u.boundary_mass_fraction()
    }

    fn spec(&self) -> &GridSpec {
        self.spectral().spec()
    }

    /// Energy and potential; `spectrum` may carry an existing `FFT(u)`.
    fn evaluate_with(&self, u: &ComplexField, spectrum: Option<&[Complex64]>) -> Evaluation {
        let owned;
        let spectrum = match spectrum {
            Some(s) => s,
            None => {
                owned = self.spectral().forward(u);
                owned.values()
            }
        };
        let kinetic = 0.5 * spectral_quadratic_form(self.spec(), spectrum, self.stiff_symbol());
        let (hartree, power, potential) = self.nonlinear_terms(u);
        Evaluation {
            breakdown: EnergyBreakdown::new(kinetic, hartree, power, u.l2_norm(), self.exponent()),
            potential,
        }
    }

    fn evaluate(&self, u: &ComplexField) -> Evaluation {
        self.evaluate_with(u, None)
    }

    fn breakdown(&self, u: &ComplexField) -> EnergyBreakdown {
        self.evaluate(u).breakdown
    }

    /// `E'(u) = S u + V u`.
    fn gradient(&self, u: &ComplexField) -> ComplexField {
        let mut su = self
            .spectral()
            .apply_symbol(u, self.stiff_symbol())
            .expect("field lives on the model grid");
        let (_, _, v) = self.nonlinear_terms(u);
        su.values_mut()
            .par_iter_mut()
            .zip(u.values().par_iter().zip(v.par_iter()))
            .for_each(|(g, (z, vi))| *g += z * vi);
        su
    }

    /// `<u, E'(u)> / ||u||^2` times [`EnergyModel::multiplier_sign`].
    fn multiplier(&self, u: &ComplexField) -> Result<f64> {
        let mass = u.mass();
        if mass == 0.0 {
            return Err(Error::ZeroCharge);
        }
        let g = self.gradient(u);
        Ok(self.multiplier_sign() * u.inner(&g)?.re / mass)
    }

    /// Euler-Lagrange residual `E'(u) - sign * omega * u`.
    fn residual(&self, u: &ComplexField, omega: f64) -> ComplexField {
        let lambda = self.multiplier_sign() * omega;
        let g = self.gradient(u);
        g.axpy(Complex64::new(-lambda, 0.0), u).expect("same grid")
    }
}

/// The Schrodinger-Poisson model on a three-dimensional grid.
#[derive(Debug, Clone)]
pub struct SchrodingerPoisson {
    hartree: Hartree,
    neg_laplacian: SymbolField,
    params: ModelParams,
}

impl SchrodingerPoisson {
    pub fn new(spec: GridSpec, params: ModelParams) -> Result<Self> {
        if params.kind != ModelKind::SchrodingerPoisson {
            return Err(invalid("kind", "expected schrodinger_poisson"));
        }
        params.validate()?;
        Ok(Self {
            hartree: Hartree::new(spec)?,
            neg_laplacian: SymbolField::neg_laplacian(spec),
            params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn hartree(&self) -> &Hartree {
        &self.hartree
    }

    /// `A`, `N`, `M`, `I` and the charge of `u`.
    pub fn energy_breakdown(&self, u: &ComplexField) -> Result<EnergyBreakdown> {
        u.spec().check_same(self.spec())?;
        if !u.is_finite() {
            return Err(Error::NonFinite("field".into()));
        }
        Ok(self.breakdown(u))
    }

    /// `-Laplacian u + phi_u u - |u|^(p-2) u - omega u`.
    pub fn el_residual(&self, u: &ComplexField, omega: f64) -> Result<ComplexField> {
        u.spec().check_same(self.spec())?;
        Ok(self.residual(u, omega))
    }

    /// `omega = (2A + 4N + pM) / ||u||^2`, from pairing the Euler-Lagrange
    /// equation with `u`.
    pub fn multiplier_estimate(&self, u: &ComplexField) -> Result<f64> {
        let b = self.energy_breakdown(u)?;
        multiplier_from_breakdown(&b)
    }
}

/// `(2A + 4N + pM) / charge^2`.
pub fn multiplier_from_breakdown(b: &EnergyBreakdown) -> Result<f64> {
    if b.charge == 0.0 {
        return Err(Error::ZeroCharge);
    }
    Ok((2.0 * b.kinetic + 4.0 * b.hartree + b.p * b.power) / (b.charge * b.charge))
}

impl EnergyModel for SchrodingerPoisson {
    fn spectral(&self) -> &Spectral {
        self.hartree.spectral()
    }

    fn stiff_symbol(&self) -> &SymbolField {
        &self.neg_laplacian
    }

    fn nonlinear_terms(&self, u: &ComplexField) -> (f64, f64, Vec<f64>) {
        let p = self.params.p;
        let density = u.density();
        let phi = self.hartree.potential_of_density(&density);
        let dv = u.spec().cell_volume();
        let n = hartree_energy_from(&density, &phi, dv);
        let lp = par_sum(density.len(), |i| density[i].powf(0.5 * p)) * dv;
        let potential = phi
            .into_par_iter()
            .zip(density.par_iter())
            .map(|(ph, r)| ph - r.powf(0.5 * (p - 2.0)))
            .collect();
        (n, -lp / p, potential)
    }

    fn exponent(&self) -> f64 {
        self.params.p
    }

    fn boundary_mass(&self, u: &ComplexField) -> f64 {
        u.mass_outside_radius(self.hartree.kernel().radius() / 2.0)
    }
}

/// Exponents `(a, n, m)` with `A(u_theta) = theta^a A(u)` and so on, for the
/// dilation `u_theta = theta^(1 - 3 beta/2) u(x / theta^beta)` in three dimensions.
pub fn scaling_exponents(beta: f64, p: f64) -> (f64, f64, f64) {
    (2.0 - 2.0 * beta, 4.0 - beta, (1.0 - 1.5 * beta) * p + 3.0 * beta)
}

/// `f(theta, u) = (theta^(-2 beta) - 1) A + (theta^(2 - beta) - 1) N
/// + (theta^((1 - 3 beta/2) p + 3 beta - 2) - 1) M`, so that
/// `I(u_theta) = theta^2 (I(u) + f(theta, u))`.
pub fn f_theta(theta: f64, b: &EnergyBreakdown, beta: f64, p: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(invalid("theta", format!("{theta} must be positive")));
    }
    let (ea, en, em) = scaling_exponents(beta, p);
    Ok((theta.powf(ea - 2.0) - 1.0) * b.kinetic
        + (theta.powf(en - 2.0) - 1.0) * b.hartree
        + (theta.powf(em - 2.0) - 1.0) * b.power)
}

/// First and second `theta`-derivatives of [`f_theta`].
pub fn f_theta_derivatives(theta: f64, b: &EnergyBreakdown, beta: f64, p: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0) {
        return Err(invalid("theta", format!("{theta} must be positive")));
    }
    let (ea, en, em) = scaling_exponents(beta, p);
    let terms = [(ea - 2.0, b.kinetic), (en - 2.0, b.hartree), (em - 2.0, b.power)];
    let d1 = terms.iter().map(|(e, c)| e * theta.powf(e - 1.0) * c).sum();
    let d2 = terms
        .iter()
        .map(|(e, c)| e * (e - 1.0) * theta.powf(e - 2.0) * c)
        .sum();
    Ok((d1, d2))
}

/// `2N + (2 - p) ||u||_p^p`; for `p = 8/3` this is the small-charge sign
/// condition `2N - (2/3) ||u||_{8/3}^{8/3}`.
pub fn sign_condition_coo(b: &EnergyBreakdown) -> f64 {
    2.0 * b.hartree + (2.0 - b.p) * b.lp_integral()
}

/// `4(A + N) + (4p - 8) M`: `d/dtheta f` at `theta = 1` for `beta = -2`.
pub fn derivative_condition(b: &EnergyBreakdown) -> f64 {
    4.0 * (b.kinetic + b.hartree) + (4.0 * b.p - 8.0) * b.power
}

/// `12 theta^2 (A + N) + (4p - 8)(4p - 9) theta^(4p - 10) M`: `d^2/dtheta^2 f`
/// for `beta = -2`.
pub fn second_derivative_condition(theta: f64, b: &EnergyBreakdown) -> f64 {
    let p = b.p;
    12.0 * theta * theta * (b.kinetic + b.hartree)
        + (4.0 * p - 8.0) * (4.0 * p - 9.0) * theta.powf(4.0 * p - 10.0) * b.power
}
