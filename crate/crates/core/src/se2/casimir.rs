//! Casimir-level reduction of the reference system.
//!
//! The radius `C = √(μx² + μy²)` is a Casimir of the Lie–Poisson bracket. The
//! chart angle is measured clockwise, `μx = C cos α`, `μy = −C sin α`, matching
//! the rotation block of the group matrix; with it `D = α + θ` is constant
//! along flows and, modulo 2π, across resets. What remains is a planar impact
//! Hamiltonian system in `(θ, μθ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::reduced::running_cost_rate;
use super::Se2Error;
use crate::group::{signed_gap, wrap_angle, AlgebraVector, Momentum};
use crate::hybrid::{angular_crossing, Branch, ExecError, HybridSystem, State};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CasimirState {
    pub c: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta: f64,
    pub mu_theta: f64,
}

/// Casimir radius `√(μx² + μy²)`.
pub fn casimir(mu: &Momentum) -> f64 {
    mu.mu_x.hypot(mu.mu_y)
}

pub fn casimir_chart(mu: &Momentum, theta: f64) -> Result<CasimirState, Se2Error> {
    if mu.mu_x == 0.0 && mu.mu_y == 0.0 {
        return Err(Se2Error::OriginMomentum);
    }
    let alpha = wrap_angle((-mu.mu_y).atan2(mu.mu_x));
    Ok(CasimirState {
        c: casimir(mu),
        alpha,
        d: wrap_angle(alpha + theta),
        theta: wrap_angle(theta),
        mu_theta: mu.mu_theta,
    })
}

pub fn momentum_from_chart(cs: &CasimirState) -> Momentum {
    let (s, c) = cs.alpha.sin_cos();
    Momentum::new(cs.c * c, -cs.c * s, cs.mu_theta)
}

/// `(α̇, μ̇θ, θ̇) = (μθ, C² sin α cos α, −μθ)`.
pub fn casimir_reduced_field(cs: &CasimirState) -> [f64; 3] {
    let (s, c) = cs.alpha.sin_cos();
    [cs.mu_theta, cs.c * cs.c * s * c, -cs.mu_theta]
}

/// `α ↦ α + π`, `θ ↦ θ + π`, `μθ ↦ ±μθ`; `C` and `D` (mod 2π) unchanged.
pub fn casimir_reduced_reset(cs: &CasimirState, branch: Branch) -> CasimirState {
    CasimirState {
        c: cs.c,
        alpha: wrap_angle(cs.alpha + PI),
        d: cs.d,
        theta: wrap_angle(cs.theta + PI),
        mu_theta: branch.sign() * cs.mu_theta,
    }
}

/// `H(θ, μθ) = −½μθ² − (C²/4) cos(2D − 2θ)`, which equals `h(μ) + C²/4`.
pub fn planar_hamiltonian(theta: f64, mu_theta: f64, c: f64, d: f64) -> f64 {
    -0.5 * mu_theta * mu_theta - 0.25 * c * c * (2.0 * d - 2.0 * theta).cos()
}

/// Plant driven by the optimal controls with α eliminated through `D`.
/// Returns `(ẋ, ẏ, θ̇, μ̇θ)`.
pub fn reconstructed_field(_x: f64, _y: f64, theta: f64, mu_theta: f64, c: f64, d: f64) -> [f64; 4] {
    let (sd, cd) = (d - theta).sin_cos();
    let (st, ct) = theta.sin_cos();
    [-c * cd * ct, c * cd * st, -mu_theta, c * c * sd * cd]
}

/// Optimal controls `(u, v, ω) = (−C cos(D − θ), 0, −μθ)`.
pub fn reconstructed_controls(theta: f64, mu_theta: f64, c: f64, d: f64) -> AlgebraVector {
    AlgebraVector::new(-c * (d - theta).cos(), 0.0, -mu_theta)
}

/// `(x, y, θ, μθ) ↦ (x, y − 1, θ + π, ±μθ)`.
pub fn reconstructed_reset(x: f64, y: f64, theta: f64, mu_theta: f64, branch: Branch) -> [f64; 4] {
    [x, y - 1.0, wrap_angle(theta + PI), branch.sign() * mu_theta]
}

/// The reconstructed hybrid system with guard θ = π/2.
/// State `[x, y, θ, μθ, cost]`, where `cost` accumulates ½(u² + ω²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedSystem {
    pub c: f64,
    pub d: f64,
}

impl ReconstructedSystem {
    pub fn new(c: f64, d: f64) -> Self {
        Self { c, d }
    }

    pub fn initial_state(x: f64, y: f64, theta: f64, mu_theta: f64) -> State {
        vec![x, y, theta, mu_theta, 0.0]
    }

    /// Full momentum at a state: `μx = C cos(D − θ)`, `μy = −C sin(D − θ)`.
    pub fn momentum(&self, x: &[f64]) -> Momentum {
        let alpha = self.d - x[2];
        Momentum::new(self.c * alpha.cos(), -self.c * alpha.sin(), x[3])
    }
}

impl HybridSystem for ReconstructedSystem {
    fn dimension(&self) -> usize {
        5
    }

    fn field(&self, _t: f64, x: &[f64], _segment: usize, dx: &mut [f64]) {
        let f = reconstructed_field(x[0], x[1], x[2], x[3], self.c, self.d);
        dx[..4].copy_from_slice(&f);
        dx[4] = running_cost_rate(&reconstructed_controls(x[2], x[3], self.c, self.d));
    }

    fn guard(&self, x: &[f64]) -> f64 {
        signed_gap(x[2], FRAC_PI_2)
    }

    fn is_crossing(&self, g_lo: f64, g_hi: f64) -> bool {
        angular_crossing(g_lo, g_hi)
    }

    fn reset(&self, x: &[f64], branch: Branch) -> Result<State, ExecError> {
        let r = reconstructed_reset(x[0], x[1], x[2], x[3], branch);
        Ok(vec![r[0], r[1], r[2], r[3], x[4]])
    }

    fn branches(&self, x_pre: &[f64]) -> Vec<Branch> {
        if x_pre[3] == 0.0 {
            vec![Branch::Plus]
        } else {
            vec![Branch::Plus, Branch::Minus]
        }
    }

    fn backward_guard(&self, x: &[f64]) -> Option<f64> {
        Some(signed_gap(x[2], 3.0 * FRAC_PI_2))
    }

    fn inverse_reset(&self, x: &[f64], branch: Branch) -> Result<State, ExecError> {
        Ok(vec![
            x[0],
            x[1] + 1.0,
            wrap_angle(x[2] - PI),
            branch.sign() * x[3],
            x[4],
        ])
    }
}
