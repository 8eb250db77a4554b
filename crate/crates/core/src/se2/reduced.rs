//! Reduced optimality system on se(2)* × K\G for the running cost
//! ½(u² + ω²) with the under-actuated plant.

use serde::{Deserialize, Serialize};

use super::plant::{plant_field, plant_reset, PlantParams};
use super::{energy_root, sign_of, Se2Error};
use crate::group::{coadjoint, signed_gap, wrap_angle, AlgebraVector, CosetPoint, GroupElement, Momentum};
use crate::hybrid::{angular_crossing, Branch, ExecError, HybridSystem, State};

/// `h(μ) = min_{u,ω} [μx u + μθ ω + ½(u² + ω²)] = −½(μx² + μθ²)`.
pub fn restricted_hamiltonian(mu: &Momentum) -> f64 {
    -0.5 * (mu.mu_x * mu.mu_x + mu.mu_theta * mu.mu_theta)
}

/// Minimizing controls `u = −μx`, `ω = −μθ` (v is not actuated).
pub fn optimal_controls(mu: &Momentum) -> AlgebraVector {
    AlgebraVector::new(-mu.mu_x, 0.0, -mu.mu_theta)
}

/// Running cost rate ½(u² + ω²).
pub fn running_cost_rate(controls: &AlgebraVector) -> f64 {
    0.5 * (controls.u * controls.u + controls.omega * controls.omega)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub mu: Momentum,
    pub q: CosetPoint,
}

impl ReducedState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.mu.mu_x, self.mu.mu_y, self.mu.mu_theta, self.q.angle()]
    }
}

/// Lie–Poisson flow `μ̇ = ad*_{dh} μ` together with the coset dynamics
/// `q̇ = −μθ`. Returns `(μ̇x, μ̇y, μ̇θ, q̇)`.
pub fn reduced_field(s: &ReducedState) -> [f64; 4] {
    let m = &s.mu;
    [
        m.mu_y * m.mu_theta,
        -m.mu_x * m.mu_theta,
        -m.mu_x * m.mu_y,
        -m.mu_theta,
    ]
}

fn momentum_field(m: &[f64], out: &mut [f64]) {
    out[0] = m[1] * m[2];
    out[1] = -m[0] * m[2];
    out[2] = -m[0] * m[1];
}

/// Energy-preserving co-state jump for the reference reset
/// h₀ = (1, 0, π): `(μx, μy, μθ) ↦ (−μx, −μy, ±μθ)`.
pub fn costate_jump(mu: &Momentum, branch: Branch) -> Momentum {
    Momentum::new(-mu.mu_x, -mu.mu_y, branch.sign() * mu.mu_theta)
}

/// Inverse of [`costate_jump`] for the same branch (the map is an involution).
pub fn costate_jump_inverse(mu_plus: &Momentum, branch: Branch) -> Momentum {
    Momentum::new(-mu_plus.mu_x, -mu_plus.mu_y, branch.sign() * mu_plus.mu_theta)
}

/// Co-state jump for an arbitrary reset `h₀`: `μ⁺ = Ad*_{h₀} μ + ε e_θ`,
/// with ε chosen so that `h(μ⁺) = h(μ)`. `Plus` keeps the sign of μθ,
/// `Minus` flips it.
pub fn costate_jump_through(h0: &GroupElement, mu: &Momentum, branch: Branch) -> Result<Momentum, Se2Error> {
    let moved = coadjoint(h0, mu);
    let radicand = mu.mu_x * mu.mu_x + mu.mu_theta * mu.mu_theta - moved.mu_x * moved.mu_x;
    let r = energy_root(radicand, mu.mu_x * mu.mu_x + mu.mu_theta * mu.mu_theta)?;
    Ok(Momentum::new(
        moved.mu_x,
        moved.mu_y,
        branch.sign() * sign_of(mu.mu_theta) * r,
    ))
}

pub fn costate_jump_inverse_through(
    h0: &GroupElement,
    mu_plus: &Momentum,
    branch: Branch,
) -> Result<Momentum, Se2Error> {
    let moved = coadjoint(&h0.inv(), mu_plus);
    let radicand =
        mu_plus.mu_x * mu_plus.mu_x + mu_plus.mu_theta * mu_plus.mu_theta - moved.mu_x * moved.mu_x;
    let r = energy_root(radicand, mu_plus.mu_x * mu_plus.mu_x + mu_plus.mu_theta * mu_plus.mu_theta)?;
    Ok(Momentum::new(
        moved.mu_x,
        moved.mu_y,
        branch.sign() * sign_of(mu_plus.mu_theta) * r,
    ))
}

fn jump_branches(h0: &GroupElement, mu: &Momentum) -> Vec<Branch> {
    match costate_jump_through(h0, mu, Branch::Plus) {
        Ok(m) if m.mu_theta == 0.0 => vec![Branch::Plus],
        _ => vec![Branch::Plus, Branch::Minus],
    }
}

fn reset_failed(e: Se2Error) -> ExecError {
    ExecError::ResetFailed(e.to_string())
}

/// The (n+1)-dimensional reduced hybrid system. State `[μx, μy, μθ, q]`.
#[derive(Clone, Copy, Debug)]
pub struct ReducedSystem {
    pub params: PlantParams,
}

impl ReducedSystem {
    pub fn new(params: PlantParams) -> Self {
        Self { params }
    }
}

impl HybridSystem for ReducedSystem {
    fn dimension(&self) -> usize {
        4
    }

    fn field(&self, _t: f64, x: &[f64], _segment: usize, dx: &mut [f64]) {
        momentum_field(x, dx);
        dx[3] = -x[2];
    }

    fn guard(&self, x: &[f64]) -> f64 {
        signed_gap(x[3], self.params.theta_star)
    }

    fn is_crossing(&self, g_lo: f64, g_hi: f64) -> bool {
        angular_crossing(g_lo, g_hi)
    }

    fn reset(&self, x: &[f64], branch: Branch) -> Result<State, ExecError> {
        let mu = costate_jump_through(&self.params.jump, &Momentum::from_slice(x), branch)
            .map_err(reset_failed)?;
        Ok(vec![
            mu.mu_x,
            mu.mu_y,
            mu.mu_theta,
            wrap_angle(x[3] + self.params.jump.theta),
        ])
    }

    fn branches(&self, x_pre: &[f64]) -> Vec<Branch> {
        jump_branches(&self.params.jump, &Momentum::from_slice(x_pre))
    }

    fn backward_guard(&self, x: &[f64]) -> Option<f64> {
        Some(signed_gap(x[3], self.params.landing_angle()))
    }

    fn inverse_reset(&self, x: &[f64], branch: Branch) -> Result<State, ExecError> {
        let mu = costate_jump_inverse_through(&self.params.jump, &Momentum::from_slice(x), branch)
            .map_err(reset_failed)?;
        Ok(vec![
            mu.mu_x,
            mu.mu_y,
            mu.mu_theta,
            wrap_angle(x[3] - self.params.jump.theta),
        ])
    }
}

/// Plant and momentum integrated together under the optimal feedback, with
/// the accumulated running cost. State `[x, y, θ, μx, μy, μθ, cost]`.
///
/// This is the forward description of a candidate optimal trajectory; it is
/// used to manufacture reference solutions.
#[derive(Clone, Copy, Debug)]
pub struct CoupledSystem {
    pub params: PlantParams,
}

impl CoupledSystem {
    pub fn new(params: PlantParams) -> Self {
        Self { params }
    }

    pub fn initial_state(g: &GroupElement, mu: &Momentum) -> State {
        vec![g.x, g.y, g.theta, mu.mu_x, mu.mu_y, mu.mu_theta, 0.0]
    }
}

impl HybridSystem for CoupledSystem {
    fn dimension(&self) -> usize {
        7
    }

    fn field(&self, _t: f64, x: &[f64], _segment: usize, dx: &mut [f64]) {
        let g = GroupElement {
            x: x[0],
            y: x[1],
            theta: x[2],
        };
        let mu = Momentum::from_slice(&x[3..6]);
        let controls = optimal_controls(&mu);
        dx[..3].copy_from_slice(&plant_field(&g, &controls, &self.params));
        momentum_field(&x[3..6], &mut dx[3..6]);
        dx[6] = running_cost_rate(&controls);
    }

    fn guard(&self, x: &[f64]) -> f64 {
        signed_gap(x[2], self.params.theta_star)
    }

    fn is_crossing(&self, g_lo: f64, g_hi: f64) -> bool {
        angular_crossing(g_lo, g_hi)
    }

    fn reset(&self, x: &[f64], branch: Branch) -> Result<State, ExecError> {
        let g = plant_reset(&GroupElement::from_slice(x), &self.params);
        let mu = costate_jump_through(&self.params.jump, &Momentum::from_slice(&x[3..6]), branch)
            .map_err(reset_failed)?;
        Ok(vec![g.x, g.y, g.theta, mu.mu_x, mu.mu_y, mu.mu_theta, x[6]])
    }

    fn branches(&self, x_pre: &[f64]) -> Vec<Branch> {
        jump_branches(&self.params.jump, &Momentum::from_slice(&x_pre[3..6]))
    }
}
