//! Closed-form radial profiles with exact first and second derivatives.
//!
//! Dilations act on the closed form (`amplitude * u(r / scale)`) rather than on
//! grid samples, so scaling laws can be checked without interpolation error.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spectral::{ComplexField, GridSpec};

/// Relative amplitude below which a Gaussian tail is treated as zero.
const GAUSSIAN_TAIL: f64 = 1e-40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `amplitude * exp(-r^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `s0` for `r < inner`, `s0 cos^2(pi/2 (r - inner))` on `[inner, inner + 1]`, 0 beyond.
    Plateau { s0: f64, inner: f64 },
    /// `amplitude * inner(r / scale)`.
    Scaled {
        inner: Box<RadialProfile>,
        amplitude: f64,
        scale: f64,
    },
}

impl RadialProfile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::Gaussian { amplitude, width }
    }

    /// Smooth compact bump `amplitude * cos^2(pi r / (2 radius))` on `r < radius`.
    pub fn bump(amplitude: f64, radius: f64) -> Self {
        Self::Plateau { s0: 1.0, inner: 0.0 }.scaled(amplitude, radius)
    }

    pub fn scaled(self, amplitude: f64, scale: f64) -> Self {
        Self::Scaled {
            inner: Box::new(self),
            amplitude,
            scale,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian { amplitude, width } => amplitude * (-r * r / (2.0 * width * width)).exp(),
            Self::Plateau { s0, inner } => {
                if r < *inner {
                    *s0
                } else if r <= inner + 1.0 {
                    s0 * (0.5 * PI * (r - inner)).cos().powi(2)
                } else {
                    0.0
                }
            }
            Self::Scaled { inner, amplitude, scale } => amplitude * inner.value(r / scale),
        }
    }

    /// `du/dr`.
    pub fn d1(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian { amplitude, width } => {
                let w2 = width * width;
                -amplitude * r / w2 * (-r * r / (2.0 * w2)).exp()
            }
            Self::Plateau { s0, inner } => {
                if r < *inner || r > inner + 1.0 {
                    0.0
                } else {
                    let a = 0.5 * PI * (r - inner);
                    -PI * s0 * a.cos() * a.sin()
                }
            }
            Self::Scaled { inner, amplitude, scale } => amplitude / scale * inner.d1(r / scale),
        }
    }

    /// `d^2u/dr^2`; one-sided (ring side) at the plateau seams.
    pub fn d2(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian { amplitude, width } => {
                let w2 = width * width;
                amplitude * (r * r / w2 - 1.0) / w2 * (-r * r / (2.0 * w2)).exp()
            }
            Self::Plateau { s0, inner } => {
                if r < *inner || r > inner + 1.0 {
                    0.0
                } else {
                    let a = 0.5 * PI * (r - inner);
                    0.5 * PI * PI * s0 * (a.sin().powi(2) - a.cos().powi(2))
                }
            }
            Self::Scaled { inner, amplitude, scale } => amplitude / (scale * scale) * inner.d2(r / scale),
        }
    }

    /// Radii where a derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { .. } => vec![],
            Self::Plateau { inner, .. } => {
                if *inner > 0.0 {
                    vec![*inner, inner + 1.0]
                } else {
                    vec![inner + 1.0]
                }
            }
            Self::Scaled { inner, scale, .. } => inner.breakpoints().into_iter().map(|r| r * scale).collect(),
        }
    }

    /// Radius beyond which the profile is zero (or below `1e-40` of its peak).
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Gaussian { width, .. } => width * (2.0 * (1.0 / GAUSSIAN_TAIL).ln()).sqrt(),
            Self::Plateau { inner, .. } => inner + 1.0,
            Self::Scaled { inner, scale, .. } => inner.support_radius() * scale,
        }
    }

    /// Samples `u(|x - center|)` on a grid.
    pub fn sample(&self, spec: GridSpec, center: [f64; 3]) -> ComplexField {
        let d = spec.dim();
        ComplexField::from_fn(spec, |x| {
            let r2: f64 = (0..d).map(|a| (x[a] - center[a]).powi(2)).sum();
            Complex64::new(self.value(r2.sqrt()), 0.0)
        })
    }
}

/// `u_theta(x) = theta^(1 - 3 beta / 2) u(x / theta^beta)`, the mass-scaling
/// family in three dimensions; `||u_theta||_2 = theta ||u||_2`.
pub fn dilate_profile(profile: &RadialProfile, theta: f64, beta: f64) -> Result<RadialProfile> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", format!("{theta} must be positive")));
    }
    Ok(profile
        .clone()
        .scaled(theta.powf(1.0 - 1.5 * beta), theta.powf(beta)))
}

/// `u_lambda(x) = u(x / lambda^(2/N))`, which multiplies the `L^2` norm by
/// `lambda` in dimension `N`.
pub fn dilate_biharmonic(profile: &RadialProfile, lambda: f64, n_dim: usize) -> Result<RadialProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("{lambda} must be positive")));
    }
    if n_dim == 0 {
        return Err(invalid("n_dim", "dimension must be positive"));
    }
    Ok(profile.clone().scaled(1.0, lambda.powf(2.0 / n_dim as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_check(p: &RadialProfile, r: f64) {
        let h = 1e-5 * r.max(1.0);
        let d1 = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
        let d2 = (p.d1(r + h) - p.d1(r - h)) / (2.0 * h);
        let scale = p.value(0.0).abs().max(1e-300);
        assert!((d1 - p.d1(r)).abs() <= 1e-6 * scale.max(p.d1(r).abs()), "d1 at {r}");
        assert!((d2 - p.d2(r)).abs() <= 1e-6 * scale.max(p.d2(r).abs()), "d2 at {r}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = RadialProfile::gaussian(1.3, 0.7);
        for r in [0.1, 0.5, 1.0, 2.0] {
            fd_check(&g, r);
        }
        let p = RadialProfile::Plateau { s0: 2.0, inner: 3.0 };
        for r in [3.1, 3.5, 3.9] {
            fd_check(&p, r);
        }
        let s = p.clone().scaled(0.5, 1.7);
        for r in [5.2, 6.0, 6.6] {
            fd_check(&s, r);
        }
    }

    #[test]
    fn plateau_endpoint_and_midpoint_values() {
        let s0 = 1.5;
        let rn = 4.0;
        let p = RadialProfile::Plateau { s0, inner: rn };
        assert_eq!(p.value(rn), s0);
        assert!(p.value(rn + 1.0).abs() < 1e-30);
        assert_relative_eq!(p.d1(rn + 0.5), -PI * s0 / 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.d2(rn), -PI * PI * s0 / 2.0, max_relative = 1e-15);
        assert_eq!(p.value(rn + 1.2), 0.0);
        assert_eq!(p.breakpoints(), vec![rn, rn + 1.0]);
    }

    #[test]
    fn plateau_seams_are_c1() {
        let p = RadialProfile::Plateau { s0: 1.0, inner: 5.0 };
        for seam in [5.0f64, 6.0] {
            let below = seam - 1e-13;
            let above = seam + 1e-13;
            assert!((p.value(below) - p.value(above)).abs() < 1e-12);
            assert!((p.d1(below) - p.d1(above)).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_identity_and_amplitude() {
        let g = RadialProfile::gaussian(1.0, 1.0);
        let same = dilate_profile(&g, 1.0, -2.0).unwrap();
        for r in [0.0, 0.3, 2.0] {
            assert_eq!(same.value(r), g.value(r));
        }
        let amp = dilate_profile(&g, 1.7, 0.0).unwrap();
        assert_relative_eq!(amp.value(0.4), 1.7 * g.value(0.4), max_relative = 1e-15);
        assert!(dilate_profile(&g, 0.0, 1.0).is_err());
        assert!(dilate_biharmonic(&g, -1.0, 5).is_err());
    }

    #[test]
    fn support_and_breakpoints_scale() {
        let b = RadialProfile::bump(2.0, 0.5);
        assert_relative_eq!(b.support_radius(), 0.5);
        assert_eq!(b.value(0.6), 0.0);
        assert_relative_eq!(b.value(0.0), 2.0);
        assert_eq!(b.breakpoints(), vec![0.5]);
    }
}
