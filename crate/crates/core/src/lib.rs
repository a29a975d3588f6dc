//! Laser-cooled ion Coulomb crystals in a linear rf trap overlaid with an
//! optical standing wave.
//!
//! * [`specfun`]: complete elliptic integrals and adaptive quadrature.
//! * [`pendulum`]: adiabatic pinning of a single ion and its photon
//!   scattering probability during a lattice ramp.
//! * [`crystal`]: equilibrium structures, normal modes, γ parameters and
//!   continuation of the mode spectrum with lattice depth.
//! * [`thermometry`]: temperature from fluorescence spot widths.
//! * [`ensemble`]: multi-ion scattering statistics.
//! * [`micromotion`]: excess micromotion estimates.

pub mod constants;
pub mod crystal;
pub mod ensemble;
pub mod format;
pub mod micromotion;
pub mod params;
pub mod pendulum;
pub mod specfun;
pub mod thermometry;

pub use params::{IonSpecies, LatticeConfig, ParamError, RampProfile, RampShape, TrapConfig};

/// Library version, embedded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
