//! Terminal costs φ on SE(2) and the terminal momentum `(ℓ_{g_T})* dφ`.

use serde::{Deserialize, Serialize};

use crate::group::{left_trivialize, signed_gap, AlgebraVector, GroupElement, Momentum};

/// Central-difference step for [`terminal_momentum`].
pub const FD_STEP: f64 = 1e-6;

pub trait TerminalCost {
    fn value(&self, g: &GroupElement) -> f64;

    /// Chart gradient `(∂φ/∂x, ∂φ/∂y, ∂φ/∂θ)` when known in closed form.
    fn chart_gradient(&self, _g: &GroupElement) -> Option<[f64; 3]> {
        None
    }
}

/// φ ≡ value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantCost {
    pub value: f64,
}

impl TerminalCost for ConstantCost {
    fn value(&self, _g: &GroupElement) -> f64 {
        self.value
    }

    fn chart_gradient(&self, _g: &GroupElement) -> Option<[f64; 3]> {
        Some([0.0; 3])
    }
}

/// `φ(g) = ½[(x − x*)² + (y − y*)²] + κ(1 − cos(θ − θ*))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseTarget {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub kappa: f64,
}

impl PoseTarget {
    /// The pose target whose terminal momentum at `g_t` is `mu`, if one
    /// exists for this κ (it does iff `|μθ| ≤ κ`). Of the two heading
    /// solutions the one within π/2 of `g_t` is returned.
    pub fn matching(g_t: &GroupElement, mu: &Momentum, kappa: f64) -> Option<Self> {
        if kappa <= 0.0 || mu.mu_theta.abs() > kappa {
            return None;
        }
        let (s, c) = g_t.theta.sin_cos();
        let px = mu.mu_x * c + mu.mu_y * s;
        let py = -mu.mu_x * s + mu.mu_y * c;
        Some(Self {
            x: g_t.x - px,
            y: g_t.y - py,
            theta: crate::group::wrap_angle(g_t.theta - (mu.mu_theta / kappa).asin()),
            kappa,
        })
    }
}

impl TerminalCost for PoseTarget {
    fn value(&self, g: &GroupElement) -> f64 {
        let dx = g.x - self.x;
        let dy = g.y - self.y;
        0.5 * (dx * dx + dy * dy) + self.kappa * (1.0 - signed_gap(g.theta, self.theta).cos())
    }

    fn chart_gradient(&self, g: &GroupElement) -> Option<[f64; 3]> {
        Some([
            g.x - self.x,
            g.y - self.y,
            self.kappa * signed_gap(g.theta, self.theta).sin(),
        ])
    }
}

/// Wraps a closure as a terminal cost without a closed-form gradient.
pub struct FnCost<F>(pub F);

impl<F: Fn(&GroupElement) -> f64> TerminalCost for FnCost<F> {
    fn value(&self, g: &GroupElement) -> f64 {
        (self.0)(g)
    }
}

/// `μ_i = d/ds φ(g·exp(s eᵢ))` at `s = 0`, by central differences.
pub fn terminal_momentum<T: TerminalCost + ?Sized>(g_t: &GroupElement, phi: &T) -> Momentum {
    let mut mu = [0.0; 3];
    for (i, e) in AlgebraVector::BASIS.iter().enumerate() {
        let fwd = phi.value(&g_t.mul(&GroupElement::exp(e, FD_STEP)));
        let bwd = phi.value(&g_t.mul(&GroupElement::exp(e, -FD_STEP)));
        mu[i] = (fwd - bwd) / (2.0 * FD_STEP);
    }
    Momentum::from_slice(&mu)
}

/// Terminal momentum from the chart gradient when available, otherwise by
/// finite differences.
pub fn terminal_momentum_analytic<T: TerminalCost + ?Sized>(g_t: &GroupElement, phi: &T) -> Momentum {
    match phi.chart_gradient(g_t) {
        Some(p) => left_trivialize(g_t, p),
        None => terminal_momentum(g_t, phi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn constant_cost_has_zero_momentum() {
        let g = GroupElement::new(1.0, -2.0, 0.4);
        assert_eq!(terminal_momentum(&g, &ConstantCost { value: 3.0 }), Momentum::zero());
    }

    #[test]
    fn coordinate_function() {
        let phi = FnCost(|g: &GroupElement| g.x);
        let mu = terminal_momentum(&GroupElement::identity(), &phi);
        assert!(mu.max_abs_diff(&Momentum::new(1.0, 0.0, 0.0)) < 1e-9);
        let g = GroupElement::new(0.0, 0.0, FRAC_PI_2);
        let mu = terminal_momentum(&g, &phi);
        assert!(mu.max_abs_diff(&Momentum::new(0.0, 1.0, 0.0)) < 1e-9);
        assert!(mu.max_abs_diff(&left_trivialize(&g, [1.0, 0.0, 0.0])) < 1e-9);
    }

    #[test]
    fn pose_target_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..100 {
            let phi = PoseTarget {
                x: rng.gen_range(-2.0..2.0),
                y: rng.gen_range(-2.0..2.0),
                theta: rng.gen_range(0.0..6.0),
                kappa: rng.gen_range(0.1..3.0),
            };
            let g = GroupElement::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.0..6.0));
            let fd = terminal_momentum(&g, &phi);
            let an = terminal_momentum_analytic(&g, &phi);
            assert!(fd.max_abs_diff(&an) < 1e-8, "{fd:?} vs {an:?}");
        }
    }

    #[test]
    fn matching_target_reproduces_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for _ in 0..100 {
            let g = GroupElement::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.0..6.0));
            let mu = Momentum::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-0.9..0.9));
            let phi = PoseTarget::matching(&g, &mu, 1.0).unwrap();
            assert!(terminal_momentum(&g, &phi).max_abs_diff(&mu) < 1e-8);
        }
        assert!(PoseTarget::matching(&GroupElement::identity(), &Momentum::new(0.0, 0.0, 2.0), 1.0).is_none());
    }
}
