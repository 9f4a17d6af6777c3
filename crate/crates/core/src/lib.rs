//! Normalized ground states of the Schrodinger-Poisson-Slater energy and of a
//! biharmonic NLS energy on periodic grids, with tools for probing their
//! variational structure and the orbital stability of the standing waves.

pub mod biharmonic;
pub mod dynamics;
pub mod energy;
pub mod groundstate;
pub mod error;
pub mod hartree;
pub mod profile;
pub mod quadrature;
pub mod radial;
pub mod spectral;

pub use energy::{EnergyBreakdown, EnergyModel, ModelKind, ModelParams, Regime, SchrodingerPoisson};
pub use error::{Error, Result};
pub use profile::RadialProfile;
pub use num_complex::Complex64;
pub use spectral::{ComplexField, GridSpec, Spectral, SymbolField};
