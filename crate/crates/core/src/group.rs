//! SE(2) arithmetic: group elements, the Lie algebra se(2), its dual, and
//! the coset space of the translation subgroup.
//!
//! A group element is stored in chart coordinates `(x, y, θ)` and maps to the
//! homogeneous matrix
//!
//! ```text
//! [  cos θ   sin θ   x ]
//! [ -sin θ   cos θ   y ]
//! [    0       0     1 ]
//! ```
//!
//! An algebra vector `(u, v, ω)` maps to `[[0, ω, u], [-ω, 0, v], [0, 0, 0]]`
//! and a momentum `(μx, μy, μθ)` pairs with it as `μx·u + μy·v + μθ·ω`.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

/// Below this angular rate the exponential uses its Taylor expansion.
const EXP_TAYLOR_THRESHOLD: f64 = 1e-10;

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Minimal signed angular difference `a - b`, in `(-π, π]`.
///
/// Exactly opposite angles map to `+π`.
pub fn signed_gap(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// A point of SE(2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    /// Always in `[0, 2π)`.
    pub theta: f64,
}

impl Default for GroupElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl GroupElement {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// A pure translation, i.e. an element of the normal subgroup K.
    pub fn translation(x: f64, y: f64) -> Self {
        Self { x, y, theta: 0.0 }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, s, self.x, -s, c, self.y, 0.0, 0.0, 1.0)
    }

    /// Reads the chart back from a homogeneous matrix. The matrix is assumed
    /// to be a valid SE(2) element; only the first two rows are used.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self::new(m[(0, 2)], m[(1, 2)], m[(0, 1)].atan2(m[(0, 0)]))
    }

    /// Group product `self · other`.
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        let (s, c) = self.theta.sin_cos();
        GroupElement::new(
            self.x + c * other.x + s * other.y,
            self.y - s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inv(&self) -> GroupElement {
        let (s, c) = self.theta.sin_cos();
        GroupElement::new(
            -(c * self.x - s * self.y),
            -(s * self.x + c * self.y),
            -self.theta,
        )
    }

    /// `exp(t·ξ)` in closed form.
    pub fn exp(xi: &AlgebraVector, t: f64) -> GroupElement {
        let phi = xi.omega * t;
        // a = ∫ cos(ωτ) dτ, b = ∫ sin(ωτ) dτ over [0, t]
        let (a, b) = if xi.omega.abs() < EXP_TAYLOR_THRESHOLD {
            (t * (1.0 - phi * phi / 6.0), t * phi / 2.0)
        } else {
            (phi.sin() / xi.omega, (1.0 - phi.cos()) / xi.omega)
        };
        GroupElement::new(a * xi.u + b * xi.v, -b * xi.u + a * xi.v, phi)
    }

    /// Chart array `[x, y, θ]`.
    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }
}

/// An element of se(2).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlgebraVector {
    /// Body-frame x velocity.
    pub u: f64,
    /// Body-frame y velocity.
    pub v: f64,
    /// Angular rate.
    pub omega: f64,
}

impl AlgebraVector {
    pub const fn new(u: f64, v: f64, omega: f64) -> Self {
        Self { u, v, omega }
    }

    /// The three coordinate directions `e_u`, `e_v`, `e_ω`.
    pub const BASIS: [AlgebraVector; 3] = [
        AlgebraVector::new(1.0, 0.0, 0.0),
        AlgebraVector::new(0.0, 1.0, 0.0),
        AlgebraVector::new(0.0, 0.0, 1.0),
    ];

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0, self.omega, self.u, -self.omega, 0.0, self.v, 0.0, 0.0, 0.0,
        )
    }

    /// Reads coordinates off an se(2) matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self::new(m[(0, 2)], m[(1, 2)], m[(0, 1)])
    }
}

/// An element of se(2)*.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_theta: f64,
}

impl Momentum {
    pub const fn new(mu_x: f64, mu_y: f64, mu_theta: f64) -> Self {
        Self {
            mu_x,
            mu_y,
            mu_theta,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.mu_x, self.mu_y, self.mu_theta]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &Momentum) -> f64 {
        (self.mu_x - other.mu_x)
            .abs()
            .max((self.mu_y - other.mu_y).abs())
            .max((self.mu_theta - other.mu_theta).abs())
    }
}

/// The dual pairing `⟨μ, ξ⟩`.
pub fn pair(mu: &Momentum, xi: &AlgebraVector) -> f64 {
    mu.mu_x * xi.u + mu.mu_y * xi.v + mu.mu_theta * xi.omega
}

/// Pulls a chart covector `p = (px, py, pθ)` at `g` back to the identity:
/// `⟨μ, ξ⟩ = ⟨p, d/dt|₀ g·exp(tξ)⟩`.
pub fn left_trivialize(g: &GroupElement, p: [f64; 3]) -> Momentum {
    let (s, c) = g.theta.sin_cos();
    Momentum::new(p[0] * c - p[1] * s, p[0] * s + p[1] * c, p[2])
}

/// Coadjoint action `Ad*_h μ`, defined by `⟨Ad*_h μ, ξ⟩ = ⟨μ, h ξ h⁻¹⟩`.
///
/// This is a right action: `Ad*_{h1} Ad*_{h2} μ = Ad*_{h2·h1} μ`.
pub fn coadjoint(h: &GroupElement, mu: &Momentum) -> Momentum {
    let (s, c) = h.theta.sin_cos();
    Momentum::new(
        mu.mu_x * c - mu.mu_y * s,
        mu.mu_x * s + mu.mu_y * c,
        mu.mu_theta - mu.mu_x * h.y + mu.mu_y * h.x,
    )
}

/// A class in K\G, K the translation subgroup. Identified with the rotation
/// angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosetPoint(pub f64);

impl CosetPoint {
    pub fn new(q: f64) -> Self {
        CosetPoint(wrap_angle(q))
    }

    pub fn angle(&self) -> f64 {
        self.0
    }
}

pub fn coset_project(g: &GroupElement) -> CosetPoint {
    CosetPoint::new(g.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_element(rng: &mut impl Rng) -> GroupElement {
        GroupElement::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(0.0..TAU),
        )
    }

    fn chart_close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
        (a.x - b.x).abs() < tol
            && (a.y - b.y).abs() < tol
            && signed_gap(a.theta, b.theta).abs() < tol
    }

    fn paper_h0() -> GroupElement {
        GroupElement::from_matrix(&Matrix3::new(-1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0))
    }

    /// Scaling-and-squaring Taylor series for the matrix exponential.
    fn expm_series(m: &Matrix3<f64>) -> Matrix3<f64> {
        let squarings = 10;
        let scaled = m / f64::from(1 << squarings);
        let mut term = Matrix3::identity();
        let mut sum = Matrix3::identity();
        for k in 1..30 {
            term = term * scaled / k as f64;
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn wrap_and_gap_conventions() {
        assert_eq!(wrap_angle(TAU), 0.0);
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert_eq!(signed_gap(PI / 2.0, PI / 2.0), 0.0);
        assert_eq!(signed_gap(3.0 * PI / 2.0, PI / 2.0), PI);
        assert!((signed_gap(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identity_and_inverse() {
        let g = GroupElement::new(0.3, -1.2, 2.0);
        let e = GroupElement::identity();
        assert!(chart_close(&e.mul(&g), &g, 1e-15));
        assert!(chart_close(&g.mul(&g.inv()), &e, 1e-12));
        assert_eq!(e.inv(), e);
    }

    #[test]
    fn reference_reset_matrix() {
        let h0 = paper_h0();
        let r = GroupElement::identity().mul(&h0);
        assert!(chart_close(&r, &GroupElement::new(1.0, 0.0, PI), 1e-15));
        // h0 is an involution
        let m = h0.matrix() * h0.matrix();
        assert!((m - Matrix3::identity()).abs().max() < 1e-15);
        assert!(chart_close(&h0.inv(), &h0, 1e-12));
    }

    #[test]
    fn product_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = random_element(&mut rng);
            let b = random_element(&mut rng);
            let m = a.matrix() * b.matrix();
            assert!((a.mul(&b).matrix() - m).abs().max() < 1e-12);
        }
    }

    #[test]
    fn inverse_matches_matrix_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let g = random_element(&mut rng);
            let m_inv = g.matrix().try_inverse().unwrap();
            let oracle = GroupElement::from_matrix(&m_inv);
            assert!(chart_close(&g.inv(), &oracle, 1e-12));
        }
    }

    #[test]
    fn exp_special_cases() {
        let g = GroupElement::exp(&AlgebraVector::new(1.0, 0.0, 0.0), 2.5);
        assert!(chart_close(&g, &GroupElement::new(2.5, 0.0, 0.0), 1e-15));
        let r = GroupElement::exp(&AlgebraVector::new(0.0, 0.0, 1.0), PI);
        assert!(chart_close(&r, &GroupElement::new(0.0, 0.0, PI), 1e-15));
    }

    #[test]
    fn exp_matches_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..100 {
            let omega = if i % 10 == 0 {
                rng.gen_range(-1e-11..1e-11)
            } else {
                rng.gen_range(-3.0..3.0)
            };
            let xi = AlgebraVector::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), omega);
            let oracle = expm_series(&xi.matrix());
            let got = GroupElement::exp(&xi, 1.0).matrix();
            assert!((got - oracle).abs().max() < 1e-10, "xi = {xi:?}");
        }
    }

    #[test]
    fn pairing_formula() {
        assert_eq!(pair(&Momentum::new(1.0, 2.0, 3.0), &AlgebraVector::new(1.0, 1.0, 1.0)), 6.0);
        assert_eq!(pair(&Momentum::zero(), &AlgebraVector::new(4.0, -1.0, 2.0)), 0.0);
        let mu = Momentum::new(-0.7, 2.0, 9.0);
        assert_eq!(pair(&mu, &AlgebraVector::BASIS[0]), -0.7);
    }

    /// `⟨p, d/ds|₀ chart(g·exp(sξ))⟩` by central differences.
    fn directional_oracle(g: &GroupElement, p: [f64; 3], xi: &AlgebraVector) -> f64 {
        let h = 1e-6;
        let plus = g.mul(&GroupElement::exp(xi, h));
        let minus = g.mul(&GroupElement::exp(xi, -h));
        let d = [
            (plus.x - minus.x) / (2.0 * h),
            (plus.y - minus.y) / (2.0 * h),
            signed_gap(plus.theta, minus.theta) / (2.0 * h),
        ];
        p[0] * d[0] + p[1] * d[1] + p[2] * d[2]
    }

    #[test]
    fn left_trivialize_cases() {
        let p = [0.4, -2.0, 1.5];
        let mu = left_trivialize(&GroupElement::identity(), p);
        assert_eq!(mu.to_array(), p);

        let g = GroupElement::new(0.0, 0.0, PI / 2.0);
        let oracle: Vec<f64> = AlgebraVector::BASIS
            .iter()
            .map(|xi| directional_oracle(&g, [1.0, 0.0, 0.0], xi))
            .collect();
        assert!((oracle[0]).abs() < 1e-9 && (oracle[1] - 1.0).abs() < 1e-9 && oracle[2].abs() < 1e-9);
        let mu = left_trivialize(&g, [1.0, 0.0, 0.0]);
        assert!(mu.max_abs_diff(&Momentum::new(0.0, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn left_trivialize_matches_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let g = random_element(&mut rng);
            let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let xi = AlgebraVector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mu = left_trivialize(&g, p);
            assert!((pair(&mu, &xi) - directional_oracle(&g, p, &xi)).abs() < 1e-8);
        }
    }

    /// `⟨μ, h E_i h⁻¹⟩` on the basis, computed entirely with matrices.
    fn coadjoint_oracle(h: &GroupElement, mu: &Momentum) -> Momentum {
        let hm = h.matrix();
        let hinv = hm.try_inverse().unwrap();
        let c: Vec<f64> = AlgebraVector::BASIS
            .iter()
            .map(|e| pair(mu, &AlgebraVector::from_matrix(&(hm * e.matrix() * hinv))))
            .collect();
        Momentum::new(c[0], c[1], c[2])
    }

    #[test]
    fn coadjoint_matches_conjugation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let h = random_element(&mut rng);
            let mu = Momentum::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            assert!(coadjoint(&h, &mu).max_abs_diff(&coadjoint_oracle(&h, &mu)) < 1e-10);
        }
        let mu = Momentum::new(0.3, 1.1, -0.4);
        assert_eq!(coadjoint(&GroupElement::identity(), &mu), mu);
    }

    #[test]
    fn coadjoint_of_reference_reset() {
        let mu = Momentum::new(1.0, 2.0, 3.0);
        let got = coadjoint(&paper_h0(), &mu);
        let oracle = coadjoint_oracle(&paper_h0(), &mu);
        assert!(got.max_abs_diff(&oracle) < 1e-12);
        assert!(got.max_abs_diff(&Momentum::new(-1.0, -2.0, 5.0)) < 1e-12);
    }

    #[test]
    fn coadjoint_is_a_right_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let h1 = random_element(&mut rng);
            let h2 = random_element(&mut rng);
            let mu = Momentum::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let lhs = coadjoint(&h1, &coadjoint(&h2, &mu));
            assert!(lhs.max_abs_diff(&coadjoint(&h2.mul(&h1), &mu)) < 1e-10);
        }
    }

    #[test]
    fn coset_projection() {
        assert_eq!(coset_project(&GroupElement::identity()).angle(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g = random_element(&mut rng);
            let k = GroupElement::translation(rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0));
            assert_eq!(coset_project(&k.mul(&g)), coset_project(&g));
            let q = coset_project(&g.mul(&paper_h0())).angle();
            assert!(signed_gap(q, g.theta + PI).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn associativity(
            a in (-5.0..5.0f64, -5.0..5.0f64, 0.0..TAU),
            b in (-5.0..5.0f64, -5.0..5.0f64, 0.0..TAU),
            c in (-5.0..5.0f64, -5.0..5.0f64, 0.0..TAU),
        ) {
            let (a, b, c) = (
                GroupElement::new(a.0, a.1, a.2),
                GroupElement::new(b.0, b.1, b.2),
                GroupElement::new(c.0, c.1, c.2),
            );
            prop_assert!(chart_close(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c)), 1e-12));
        }

        #[test]
        fn chart_matrix_round_trip(x in -50.0..50.0f64, y in -50.0..50.0f64, th in -20.0..20.0f64) {
            let g = GroupElement::new(x, y, th);
            prop_assert!((0.0..TAU).contains(&g.theta));
            prop_assert!(chart_close(&GroupElement::from_matrix(&g.matrix()), &g, 1e-12));
        }

        #[test]
        fn wrap_is_periodic(a in -100.0..100.0f64, k in -20i32..20) {
            let shifted = wrap_angle(a + TAU * f64::from(k));
            prop_assert!(signed_gap(shifted, wrap_angle(a)).abs() < 1e-11);
        }

        #[test]
        fn trivialization_is_linear(
            th in 0.0..TAU,
            p in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
            q in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
            s in -4.0..4.0f64,
        ) {
            let g = GroupElement::new(0.2, 0.1, th);
            let sum = [p.0 + s * q.0, p.1 + s * q.1, p.2 + s * q.2];
            let a = left_trivialize(&g, [p.0, p.1, p.2]);
            let b = left_trivialize(&g, [q.0, q.1, q.2]);
            let lin = Momentum::new(a.mu_x + s * b.mu_x, a.mu_y + s * b.mu_y, a.mu_theta + s * b.mu_theta);
            prop_assert!(left_trivialize(&g, sum).max_abs_diff(&lin) < 1e-12);
        }
    }
}
