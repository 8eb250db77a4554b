use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{Se2Error, GUARD_TOL};
use crate::group::{signed_gap, AlgebraVector, GroupElement};
use crate::hybrid::{angular_crossing, Branch, ExecError, HybridSystem, State};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actuation {
    Full,
    #[default]
    Under,
}

/// Guard angle θ*, reset offset h₀ = (x̃, ỹ, θ̃) applied by right translation,
/// and actuation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub theta_star: f64,
    pub jump: GroupElement,
    #[serde(default)]
    pub actuation: Actuation,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl PlantParams {
    pub fn new(theta_star: f64, jump: GroupElement, actuation: Actuation) -> Result<Self, Se2Error> {
        let p = Self {
            theta_star,
            jump,
            actuation,
        };
        p.validate()?;
        Ok(p)
    }

    /// θ* = π/2, h₀ = (1, 0, π), under-actuated.
    pub fn reference() -> Self {
        Self {
            theta_star: FRAC_PI_2,
            jump: GroupElement::new(1.0, 0.0, PI),
            actuation: Actuation::Under,
        }
    }

    /// The reset must leave the guard coset: h₀ ∉ K, i.e. θ̃ ≢ 0 (mod 2π).
    pub fn validate(&self) -> Result<(), Se2Error> {
        let values = [self.theta_star, self.jump.x, self.jump.y, self.jump.theta];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Se2Error::InvalidParams("non-finite parameter".into()));
        }
        if signed_gap(self.jump.theta, 0.0).abs() < 1e-12 {
            return Err(Se2Error::InvalidParams(
                "reset rotation must be nonzero modulo 2π".into(),
            ));
        }
        Ok(())
    }

    /// Angle of the coset the reset lands on.
    pub fn landing_angle(&self) -> f64 {
        self.theta_star + self.jump.theta
    }
}

/// Chart velocity `(ẋ, ẏ, θ̇)` of `ġ = g·f(u)`.
pub fn plant_field(g: &GroupElement, controls: &AlgebraVector, params: &PlantParams) -> [f64; 3] {
    let (s, c) = g.theta.sin_cos();
    let u = controls.u;
    let v = match params.actuation {
        Actuation::Full => controls.v,
        Actuation::Under => 0.0,
    };
    [u * c + v * s, v * c - u * s, controls.omega]
}

/// `g ↦ g·h₀`.
pub fn plant_reset(g: &GroupElement, params: &PlantParams) -> GroupElement {
    g.mul(&params.jump)
}

pub fn on_guard(g: &GroupElement, params: &PlantParams) -> bool {
    signed_gap(g.theta, params.theta_star).abs() <= GUARD_TOL
}

/// The plant under a control law `(t, g, segment) ↦ f(u)`. State `[x, y, θ]`.
pub struct PlantSystem<L> {
    pub params: PlantParams,
    pub law: L,
}

impl<L> PlantSystem<L>
where
    L: Fn(f64, &GroupElement, usize) -> AlgebraVector,
{
    pub fn new(params: PlantParams, law: L) -> Self {
        Self { params, law }
    }
}

/// Group element from a chart state without wrapping the angle.
fn raw_element(x: &[f64]) -> GroupElement {
    GroupElement {
        x: x[0],
        y: x[1],
        theta: x[2],
    }
}

impl<L> HybridSystem for PlantSystem<L>
where
    L: Fn(f64, &GroupElement, usize) -> AlgebraVector,
{
    fn dimension(&self) -> usize {
        3
    }

    fn field(&self, t: f64, x: &[f64], segment: usize, dx: &mut [f64]) {
        let g = raw_element(x);
        let controls = (self.law)(t, &g, segment);
        dx.copy_from_slice(&plant_field(&g, &controls, &self.params));
    }

    fn guard(&self, x: &[f64]) -> f64 {
        signed_gap(x[2], self.params.theta_star)
    }

    fn is_crossing(&self, g_lo: f64, g_hi: f64) -> bool {
        angular_crossing(g_lo, g_hi)
    }

    fn reset(&self, x: &[f64], _branch: Branch) -> Result<State, ExecError> {
        Ok(plant_reset(&raw_element(x), &self.params).to_array().to_vec())
    }

    fn branches(&self, _x_pre: &[f64]) -> Vec<Branch> {
        vec![Branch::Plus]
    }

    fn backward_guard(&self, x: &[f64]) -> Option<f64> {
        Some(signed_gap(x[2], self.params.landing_angle()))
    }

    fn inverse_reset(&self, x: &[f64], _branch: Branch) -> Result<State, ExecError> {
        Ok(raw_element(x).mul(&self.params.jump.inv()).to_array().to_vec())
    }
}
