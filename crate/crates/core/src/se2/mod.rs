//! The SE(2) reference system: a planar rigid body whose heading jumps by a
//! fixed right translation whenever it reaches a critical angle.
//!
//! * [`plant`]: controlled dynamics, guard and reset on the group.
//! * [`reduced`]: restricted Hamiltonian, optimal controls, reduced momentum
//!   dynamics on se(2)* × S¹ and the two-branch co-state jump.
//! * [`casimir`]: the Casimir chart `(C, α)`, the planar `(θ, μθ)` system and
//!   the reconstructed plant driven by it.
//! * [`pmp`]: the unreduced Hamiltonian system on T*SE(2), kept as an oracle.
//! * [`terminal`]: terminal costs and their momenta at the final time.

pub mod casimir;
pub mod plant;
pub mod pmp;
pub mod reduced;
pub mod terminal;

use thiserror::Error;

pub use casimir::{CasimirState, ReconstructedSystem};
pub use plant::{Actuation, PlantParams, PlantSystem};
pub use reduced::{CoupledSystem, ReducedState, ReducedSystem};
pub use terminal::{ConstantCost, PoseTarget, TerminalCost};

/// Tolerance for "on the guard" checks after event localization.
pub const GUARD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Se2Error {
    #[error("the Casimir angle is undefined at zero translational momentum")]
    OriginMomentum,
    #[error("energy matching has no real root (radicand {radicand})")]
    NoRealRoot { radicand: f64 },
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
}

/// Square root of a radicand that should be non-negative, tolerating
/// round-off below zero.
pub(crate) fn energy_root(radicand: f64, scale: f64) -> Result<f64, Se2Error> {
    if radicand >= 0.0 {
        Ok(radicand.sqrt())
    } else if radicand > -1e-12 * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Se2Error::NoRealRoot { radicand })
    }
}

/// `+1` for non-negative values (including `+0`), `-1` otherwise.
pub(crate) fn sign_of(v: f64) -> f64 {
    if v.is_sign_negative() && v != 0.0 {
        -1.0
    } else {
        1.0
    }
}
