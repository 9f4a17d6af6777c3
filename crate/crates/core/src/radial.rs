//! Energies of radial profiles by one-dimensional quadrature.
//!
//! In three dimensions a radial density `rho = u^2` has the Newton potential
//! `phi(r) = 4 pi (Q(r)/r + int_r^inf rho(s) s ds)` with
//! `Q(r) = int_0^r rho(s) s^2 ds`, which collapses the Hartree energy to
//! `N = 8 pi^2 int_0^inf r rho(r) Q(r) dr`.

use std::f64::consts::PI;

use crate::energy::EnergyBreakdown;
use crate::error::Result;
use crate::profile::RadialProfile;
use crate::quadrature::{integrate, QuadratureOptions};

const OPTS: QuadratureOptions = QuadratureOptions {
    rel_tol: 1e-13,
    abs_tol: 1e-300,
    max_intervals: 4000,
};

/// Surface area of the unit sphere in `R^n`, `2 pi^(n/2) / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    // Gamma at half-integers by recursion from Gamma(1/2) and Gamma(1).
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

fn cuts(profile: &RadialProfile) -> (f64, Vec<f64>) {
    (profile.support_radius(), profile.breakpoints())
}

/// `int_{R^3} |u|^2`.
pub fn mass(profile: &RadialProfile) -> Result<f64> {
    let (rmax, bp) = cuts(profile);
    let v = integrate(|r| profile.value(r).powi(2) * r * r, 0.0, rmax, &bp, OPTS)?;
    Ok(4.0 * PI * v.value)
}

/// `A = 1/2 int |grad u|^2`.
pub fn kinetic(profile: &RadialProfile) -> Result<f64> {
    let (rmax, bp) = cuts(profile);
    let v = integrate(|r| profile.d1(r).powi(2) * r * r, 0.0, rmax, &bp, OPTS)?;
    Ok(0.5 * 4.0 * PI * v.value)
}

/// `int |u|^p`.
pub fn lp_integral(profile: &RadialProfile, p: f64) -> Result<f64> {
    let (rmax, bp) = cuts(profile);
    let v = integrate(|r| profile.value(r).abs().powf(p) * r * r, 0.0, rmax, &bp, OPTS)?;
    Ok(4.0 * PI * v.value)
}

/// `N = 1/4 int phi_u |u|^2`.
pub fn hartree(profile: &RadialProfile) -> Result<f64> {
    let (rmax, bp) = cuts(profile);
    let rho = |r: f64| profile.value(r).powi(2);
    let enclosed = |r: f64| -> f64 {
        integrate(|s| rho(s) * s * s, 0.0, r, &bp, OPTS)
            .map(|e| e.value)
            .unwrap_or(f64::NAN)
    };
    let v = integrate(|r| r * rho(r) * enclosed(r), 0.0, rmax, &bp, OPTS)?;
    Ok(8.0 * PI * PI * v.value)
}

/// Kinetic, Hartree and power terms of the Schrodinger-Poisson energy.
pub fn energy_breakdown(profile: &RadialProfile, p: f64) -> Result<EnergyBreakdown> {
    let a = kinetic(profile)?;
    let n = hartree(profile)?;
    let m = -lp_integral(profile, p)? / p;
    Ok(EnergyBreakdown::new(a, n, m, mass(profile)?.sqrt(), p))
}
