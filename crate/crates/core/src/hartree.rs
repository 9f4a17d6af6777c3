//! Free-space Coulomb potential `phi_u = |x|^-1 * |u|^2` on the periodic grid.
//!
//! The kernel is cut off at `R = L/2` in real space, which gives the Fourier
//! transform `4 pi (1 - cos(|k| R)) / |k|^2` with the finite value `2 pi R^2`
//! at `k = 0`. For densities supported in the ball of radius `R/2` about the
//! box center, the periodic convolution with this kernel equals the
//! free-space one, so no image charges leak in.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{par_sum, ComplexField, GridSpec, Spectral, SymbolField};

/// Fraction of mass allowed outside the exact-convolution ball.
pub const BOUNDARY_MASS_THRESHOLD: f64 = 1e-8;

/// Tolerance on the imaginary residue of the inverse transform.
const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Fourier transform of the radially truncated Coulomb kernel at `|k|`.
pub fn truncated_kernel_hat(k: f64, radius: f64) -> f64 {
    let x = k * radius;
    if x < 1e-4 {
        // 4 pi (1 - cos x) / k^2 = 2 pi R^2 (1 - x^2/12 + x^4/360 - ...)
        2.0 * std::f64::consts::PI * radius * radius * (1.0 - x * x / 12.0 + x.powi(4) / 360.0)
    } else {
        4.0 * std::f64::consts::PI * (1.0 - x.cos()) / (k * k)
    }
}

#[derive(Debug, Clone)]
pub struct CoulombKernel {
    ghat: SymbolField,
    radius: f64,
}

impl CoulombKernel {
    pub fn new(spec: GridSpec) -> Result<Self> {
        if spec.dim() != 3 {
            return Err(Error::InvalidGrid(format!(
                "Coulomb kernel needs d = 3, got d = {}",
                spec.dim()
            )));
        }
        let radius = spec.length() / 2.0;
        let ghat = SymbolField::from_fn(spec, |k| {
            truncated_kernel_hat((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt(), radius)
        });
        Ok(Self { ghat, radius })
    }

    pub fn ghat(&self) -> &SymbolField {
        &self.ghat
    }

    /// Truncation radius `R = L/2`.
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Diagnostics from a checked potential evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialDiagnostics {
    /// Fraction of `|u|^2` outside the ball of radius `R/2`.
    pub boundary_mass: f64,
    /// Largest `|Im phi|` relative to `max |phi|`.
    pub imaginary_residue: f64,
}

/// Hartree term on one grid: FFT plans plus the truncated kernel.
#[derive(Debug, Clone)]
pub struct Hartree {
    spectral: Spectral,
    kernel: CoulombKernel,
}

impl Hartree {
    pub fn new(spec: GridSpec) -> Result<Self> {
        Ok(Self {
            kernel: CoulombKernel::new(spec)?,
            spectral: Spectral::new(spec),
        })
    }

    pub fn with_spectral(spectral: Spectral) -> Result<Self> {
        Ok(Self {
            kernel: CoulombKernel::new(*spectral.spec())?,
            spectral,
        })
    }

    pub fn kernel(&self) -> &CoulombKernel {
        &self.kernel
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// `phi` for a real density sampled on the grid. Unchecked hot path.
    pub fn potential_of_density(&self, density: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = density.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.spectral.forward_in_place(&mut buf);
        buf.par_iter_mut()
            .zip(self.kernel.ghat.values().par_iter())
            .for_each(|(z, g)| *z *= *g);
        self.spectral.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `phi_u` without diagnostics.
    pub fn potential_values(&self, u: &ComplexField) -> Vec<f64> {
        self.potential_of_density(&u.density())
    }

    /// `phi_u` as a real-valued field, with the truncation and imaginary
    /// residue checks. In strict mode a boundary-mass violation is an error;
    /// otherwise it is logged and reported in the diagnostics.
    pub fn potential(&self, u: &ComplexField, strict: bool) -> Result<(ComplexField, PotentialDiagnostics)> {
        u.spec().check_same(self.spectral.spec())?;
        let boundary_mass = u.mass_outside_radius(self.kernel.radius / 2.0);
        if boundary_mass > BOUNDARY_MASS_THRESHOLD {
            if strict {
                return Err(Error::BoundaryMass {
                    fraction: boundary_mass,
                    threshold: BOUNDARY_MASS_THRESHOLD,
                });
            }
            log::warn!(
                "boundary mass {boundary_mass:.3e} above {BOUNDARY_MASS_THRESHOLD:.0e}; \
                 periodic images contaminate phi"
            );
        }
        let mut buf: Vec<Complex64> = u.density().into_iter().map(|r| Complex64::new(r, 0.0)).collect();
        self.spectral.forward_in_place(&mut buf);
        buf.iter_mut()
            .zip(self.kernel.ghat.values())
            .for_each(|(z, g)| *z *= *g);
        self.spectral.inverse_in_place(&mut buf);
        let field = ComplexField::from_values(*u.spec(), buf)?;
        let imaginary_residue = field.relative_imaginary();
        if imaginary_residue > IMAGINARY_TOLERANCE {
            return Err(Error::NonFinite(format!(
                "Hartree potential has imaginary residue {imaginary_residue:.2e}"
            )));
        }
        let real = field.values().iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        Ok((
            ComplexField::from_values(*u.spec(), real)?,
            PotentialDiagnostics {
                boundary_mass,
                imaginary_residue,
            },
        ))
    }

    /// `N(u) = 1/4 int phi_u |u|^2`.
    pub fn energy(&self, u: &ComplexField) -> Result<f64> {
        u.spec().check_same(self.spectral.spec())?;
        let density = u.density();
        let phi = self.potential_of_density(&density);
        Ok(hartree_energy_from(&density, &phi, u.spec().cell_volume()))
    }
}

pub(crate) fn hartree_energy_from(density: &[f64], phi: &[f64], cell_volume: f64) -> f64 {
    0.25 * par_sum(density.len(), |i| density[i] * phi[i]) * cell_volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn gaussian(spec: GridSpec, width: f64, center: [f64; 3]) -> ComplexField {
        ComplexField::from_real_fn(spec, |x| {
            let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
            (-r2 / (2.0 * width * width)).exp()
        })
    }

    #[test]
    fn kernel_values() {
        let r = 3.0;
        assert_relative_eq!(truncated_kernel_hat(0.0, r), 2.0 * PI * r * r);
        let k = PI / r;
        assert_relative_eq!(truncated_kernel_hat(k, r), 8.0 * PI / (k * k), max_relative = 1e-14);
        // Series branch agrees with the closed form near the switch.
        let k = 1.0001e-4 / r;
        let closed = 4.0 * PI * (1.0 - (k * r).cos()) / (k * k);
        assert_relative_eq!(truncated_kernel_hat(k, r), closed, max_relative = 1e-6);
    }

    #[test]
    fn kernel_oscillates_about_coulomb() {
        // Averaging over one period of cos(|k| R) recovers 4 pi / |k|^2.
        let r = 5.0;
        let k0 = 40.0;
        let m = 2000;
        let mean: f64 = (0..m)
            .map(|j| {
                let k = k0 + (j as f64 + 0.5) / m as f64 * 2.0 * PI / r;
                truncated_kernel_hat(k, r) * k * k
            })
            .sum::<f64>()
            / m as f64;
        assert_relative_eq!(mean, 4.0 * PI, max_relative = 1e-6);
    }

    #[test]
    fn kernel_nonnegative_and_rejects_2d() {
        let g = GridSpec::new(3, 16, 8.0).unwrap();
        let k = CoulombKernel::new(g).unwrap();
        assert!(k.ghat().values().iter().all(|&v| v >= 0.0 && v.is_finite()));
        assert_eq!(k.ghat().values()[0], 2.0 * PI * 16.0);
        assert!(CoulombKernel::new(GridSpec::new(2, 16, 8.0).unwrap()).is_err());
    }

    #[test]
    fn zero_field() {
        let g = GridSpec::new(3, 16, 8.0).unwrap();
        let h = Hartree::new(g).unwrap();
        let u = ComplexField::zeros(g);
        let (phi, _) = h.potential(&u, true).unwrap();
        assert!(phi.values().iter().all(|z| z.norm() == 0.0));
        assert_eq!(h.energy(&u).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_hartree_energy() {
        let g = GridSpec::new(3, 64, 16.0).unwrap();
        let h = Hartree::new(g).unwrap();
        let u = gaussian(g, 1.0, [0.0; 3]);
        let n = h.energy(&u).unwrap();
        assert_relative_eq!(n, 2f64.sqrt() / 4.0 * PI.powf(2.5), max_relative = 1e-6);
    }

    #[test]
    fn point_charge_far_field() {
        let g = GridSpec::new(3, 128, 32.0).unwrap();
        let h = Hartree::new(g).unwrap();
        let w = 0.6;
        let u = gaussian(g, w, [0.0; 3]);
        let charge = u.mass();
        let (phi, diag) = h.potential(&u, true).unwrap();
        assert!(diag.boundary_mass < BOUNDARY_MASS_THRESHOLD);
        // Outside a few widths a Gaussian charge is indistinguishable from a point.
        let spacing = g.spacing();
        for idx in 0..g.len() {
            let x = g.point(idx);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if (2.0 * spacing..=h.kernel().radius() / 4.0).contains(&r) && r > 6.0 * w {
                let got = phi.values()[idx].re;
                assert_relative_eq!(got, charge / r, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn strict_mode_flags_spread_density() {
        let g = GridSpec::new(3, 16, 8.0).unwrap();
        let h = Hartree::new(g).unwrap();
        let u = ComplexField::from_real_fn(g, |_| 1.0);
        assert!(matches!(h.potential(&u, true), Err(Error::BoundaryMass { .. })));
        let (_, diag) = h.potential(&u, false).unwrap();
        assert!(diag.boundary_mass > 0.9);
    }

    #[test]
    fn invariances() {
        let g = GridSpec::new(3, 32, 16.0).unwrap();
        let h = Hartree::new(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bumps: Vec<([f64; 3], f64)> = (0..3)
            .map(|_| {
                let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                (c, rng.gen_range(0.5..1.5))
            })
            .collect();
        let u = ComplexField::from_fn(g, |x| {
            bumps
                .iter()
                .map(|(c, a)| {
                    let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
                    Complex64::new(*a, 0.3 * a) * (-r2).exp()
                })
                .sum()
        });
        let n0 = h.energy(&u).unwrap();
        let shifted = h.energy(&u.shifted([2, -1, 3])).unwrap();
        assert_relative_eq!(n0, shifted, max_relative = 1e-12);
        let rotated = h.energy(&u.scaled(Complex64::from_polar(1.0, 0.77))).unwrap();
        assert_relative_eq!(n0, rotated, max_relative = 1e-14);
        assert!(n0 > 0.0);
    }
}
