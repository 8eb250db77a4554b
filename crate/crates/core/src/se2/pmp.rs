//! Unreduced Pontryagin system on T*SE(2) in chart coordinates
//! `(x, y, θ, px, py, pθ)`. Used as an oracle for the reduced equations.

use super::plant::{plant_reset, PlantParams};
use super::{energy_root, sign_of, Se2Error};
use crate::group::{left_trivialize, GroupElement, Momentum};
use crate::hybrid::Branch;

pub type CotangentPoint = [f64; 6];

/// Body-frame forward momentum `px cos θ − py sin θ`.
fn body_forward(s: &CotangentPoint) -> f64 {
    let (sn, cs) = s[2].sin_cos();
    s[3] * cs - s[4] * sn
}

/// `H(g, p) = −½[(px cos θ − py sin θ)² + pθ²]`.
pub fn chart_hamiltonian(s: &CotangentPoint) -> f64 {
    let m = body_forward(s);
    -0.5 * (m * m + s[5] * s[5])
}

/// Hamilton's equations `(∂H/∂p, −∂H/∂g)`.
pub fn full_pmp_field(s: &CotangentPoint) -> CotangentPoint {
    let (sn, cs) = s[2].sin_cos();
    let m = s[3] * cs - s[4] * sn;
    [
        -m * cs,
        m * sn,
        -s[5],
        0.0,
        0.0,
        -m * (s[3] * sn + s[4] * cs),
    ]
}

pub fn group_part(s: &CotangentPoint) -> GroupElement {
    GroupElement::new(s[0], s[1], s[2])
}

/// `μ = (ℓ_g)* p`.
pub fn trivialized(s: &CotangentPoint) -> Momentum {
    left_trivialize(&group_part(s), [s[3], s[4], s[5]])
}

/// Hamiltonian jump condition at a guard state.
///
/// The reset is a pure translation in `(x, y)` with a θ-dependent offset, so
/// annihilating the guard's tangent space fixes `px, py`. The remaining
/// component `pθ` is the root of `H⁺ = H⁻` selected by `branch` (`Plus` keeps
/// the sign of `pθ`).
pub fn full_pmp_jump(s: &CotangentPoint, branch: Branch, params: &PlantParams) -> Result<CotangentPoint, Se2Error> {
    let g = plant_reset(&group_part(s), params);
    let m = body_forward(s);
    let post = [g.x, g.y, g.theta, s[3], s[4], 0.0];
    let m_post = body_forward(&post);
    let scale = m * m + s[5] * s[5];
    let r = energy_root(scale - m_post * m_post, scale)?;
    Ok([g.x, g.y, g.theta, s[3], s[4], branch.sign() * sign_of(s[5]) * r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::CosetPoint;
    use crate::hybrid::{integrate_arc, ExecConfig};
    use crate::se2::plant::plant_field;
    use crate::se2::reduced::{costate_jump, costate_jump_through, optimal_controls, reduced_field, ReducedState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_point(rng: &mut impl Rng, theta: f64) -> CotangentPoint {
        [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            theta,
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ]
    }

    #[test]
    fn zero_costate_is_rest() {
        assert_eq!(full_pmp_field(&[1.0, 2.0, 0.3, 0.0, 0.0, 0.0]), [0.0; 6]);
    }

    #[test]
    fn field_is_hamiltonian_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let h = 1e-6;
        for _ in 0..50 {
            let th = rng.gen_range(0.0..6.0);
            let s = random_point(&mut rng, th);
            let f = full_pmp_field(&s);
            let grad = |i: usize| {
                let mut a = s;
                let mut b = s;
                a[i] += h;
                b[i] -= h;
                (chart_hamiltonian(&a) - chart_hamiltonian(&b)) / (2.0 * h)
            };
            for i in 0..3 {
                assert!((f[i] - grad(i + 3)).abs() < 1e-7);
                assert!((f[i + 3] + grad(i)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn state_equations_match_plant_under_optimal_controls() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = PlantParams::reference();
        for _ in 0..50 {
            let th = rng.gen_range(0.0..6.0);
            let s = random_point(&mut rng, th);
            let plant = plant_field(&group_part(&s), &optimal_controls(&trivialized(&s)), &params);
            let f = full_pmp_field(&s);
            for i in 0..3 {
                assert!((plant[i] - f[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduction_equivalence_along_arcs() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let cfg = ExecConfig { step: 1e-3, ..ExecConfig::default() };
        for _ in 0..10 {
            let th = rng.gen_range(0.0..6.0);
            let s0 = random_point(&mut rng, th);
            let full = integrate_arc(
                |_t, x, dx| dx.copy_from_slice(&full_pmp_field(&<[f64; 6]>::try_from(x).unwrap())),
                &s0,
                0.0,
                1.0,
                &cfg,
            )
            .unwrap();
            let mu0 = trivialized(&s0);
            let red = integrate_arc(
                |_t, x, dx| {
                    let st = ReducedState { mu: Momentum::from_slice(x), q: CosetPoint(x[3]) };
                    dx.copy_from_slice(&reduced_field(&st));
                },
                &[mu0.mu_x, mu0.mu_y, mu0.mu_theta, s0[2]],
                0.0,
                1.0,
                &cfg,
            )
            .unwrap();
            for (a, b) in full.states.iter().zip(&red.states) {
                let mu = trivialized(&<[f64; 6]>::try_from(a.as_slice()).unwrap());
                assert!(mu.max_abs_diff(&Momentum::from_slice(b)) < 1e-9);
                assert!((a[2] - b[3]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jump_commutes_with_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let params = PlantParams::reference();
        for _ in 0..50 {
            let s = random_point(&mut rng, FRAC_PI_2);
            for b in [Branch::Plus, Branch::Minus] {
                let post = full_pmp_jump(&s, b, &params).unwrap();
                let lhs = trivialized(&post);
                let rhs = costate_jump(&trivialized(&s), b);
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
                assert!((chart_hamiltonian(&post) - chart_hamiltonian(&s)).abs() < 1e-12);
                assert!((post[0] - s[0]).abs() < 1e-15);
                assert!((post[1] - (s[1] - 1.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jump_commutes_with_reduction_for_general_resets() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let mut checked = 0;
        for _ in 0..100 {
            let params = PlantParams::new(
                rng.gen_range(0.0..6.0),
                GroupElement::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.3..6.0)),
                Default::default(),
            )
            .unwrap();
            let s = random_point(&mut rng, params.theta_star);
            let b = if rng.gen_bool(0.5) { Branch::Plus } else { Branch::Minus };
            match (full_pmp_jump(&s, b, &params), costate_jump_through(&params.jump, &trivialized(&s), b)) {
                (Ok(post), Ok(mu)) => {
                    assert!(trivialized(&post).max_abs_diff(&mu) < 1e-12);
                    checked += 1;
                }
                (Err(_), Err(_)) => {}
                (a, b) => panic!("disagreement: {a:?} vs {b:?}"),
            }
        }
        assert!(checked > 20);
    }
}
