//! Poincare action on resonance states with complex invariant mass.
//!
//! The carrier data is a label `[j, s_r]` plus a real 4-velocity and a spin
//! projection. Boosts and rotations act through the Wigner rotation
//! `W = L^{-1}(Lambda p) Lambda L(p)` built from standard boosts, spins
//! through the `(2j+1)`-dimensional D matrix, and space-time translations
//! only through the forward light cone: outside of it the action is simply
//! not defined, which is what makes the whole thing a semigroup rather
//! than a group.
//!
//! Conventions fixed here: metric `(+,-,-,-)` with `c = 1`; Euler angles
//! z-y-z with Condon-Shortley phases; `sqrt(s_r)` on the decaying branch
//! `Im <= 0`. Euler angles are canonicalized so that `|alpha + gamma| <= pi`,
//! which selects the rotation-angle-below-pi lift of SO(3) into SU(2); with
//! that choice `D(R1 R2) = D(R1) D(R2)` holds exactly whenever the two
//! rotation angles sum below pi, and up to the unavoidable overall sign
//! otherwise.

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

/// Validation slack for unit-interval and metric checks: loose enough to
/// absorb roundoff from composing a handful of transforms at moderate
/// gamma, tight enough to reject anything structurally wrong.
const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RelativisticError {
    #[error("matrix distorts the metric by {deviation:.2e}")]
    MetricViolation { deviation: f64 },
    #[error("determinant {det} is not +1; reflections are excluded")]
    NotProper { det: f64 },
    #[error("time-time entry {time_time} < 1; transform reverses time")]
    NotOrthochronous { time_time: f64 },
    #[error("four-velocity must be unit timelike and future-directed, got interval {interval}")]
    NotTimelike { interval: f64 },
    #[error("boost velocity {speed} is not below 1")]
    SuperluminalVelocity { speed: f64 },
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("transform moves the time axis by {deviation:.2e}; not a spatial rotation")]
    NotARotation { deviation: f64 },
    #[error("spin must be a non-negative half-integer, got {0} halves", twice_j)]
    InvalidSpin { twice_j: i32 },
    #[error("projection {j3} is not in the ladder of spin {j}")]
    ProjectionOutOfRange { j: HalfInt, j3: HalfInt },
    #[error("sqrt of {s_r} does not land on the decaying branch (Re > 0, Im <= 0)")]
    InvalidPoleMass { s_r: Complex64 },
}

/// Half-integer stored as twice its value, so spin arithmetic stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };

    pub fn from_twice(twice: i32) -> Self {
        Self { twice }
    }

    pub fn from_int(n: i32) -> Self {
        Self { twice: 2 * n }
    }

    pub fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Space-time point or translation, metric `(+,-,-,-)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector {
    pub t: f64,
    pub x: [f64; 3],
}

impl FourVector {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }

    pub fn interval(&self) -> f64 {
        self.t * self.t - self.x.iter().map(|c| c * c).sum::<f64>()
    }

    pub fn minkowski_dot(&self, other: FourVector) -> f64 {
        self.t * other.t - (0..3).map(|k| self.x[k] * other.x[k]).sum::<f64>()
    }

    fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.t, self.x[0], self.x[1], self.x[2])
    }

    fn from_vector4(v: Vector4<f64>) -> Self {
        Self {
            t: v[0],
            x: [v[1], v[2], v[3]],
        }
    }
}

impl std::ops::Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector {
            t: self.t + rhs.t,
            x: [
                self.x[0] + rhs.x[0],
                self.x[1] + rhs.x[1],
                self.x[2] + rhs.x[2],
            ],
        }
    }
}

impl fmt::Display for FourVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(t={}, x=[{}, {}, {}])",
            self.t, self.x[0], self.x[1], self.x[2]
        )
    }
}

/// `t >= 0` and `t^2 >= |x|^2`: the closed forward light cone, where the
/// translation semigroup lives.
pub fn in_forward_cone(v: FourVector) -> bool {
    v.t >= 0.0 && v.interval() >= 0.0
}

fn metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, -1.0))
}

/// Proper orthochronous Lorentz transform, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzTransform {
    m: Matrix4<f64>,
}

impl LorentzTransform {
    pub fn identity() -> Self {
        Self {
            m: Matrix4::identity(),
        }
    }

    /// Validate and wrap: metric preservation, unit determinant, forward
    /// time direction. The metric check scales with the squared entry size
    /// so large boosts are not punished for honest roundoff.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self, RelativisticError> {
        let eta = metric();
        let scale = m.amax().max(1.0);
        let deviation = (m.transpose() * eta * m - eta).amax();
        if deviation > GEOMETRY_TOL * scale * scale {
            return Err(RelativisticError::MetricViolation { deviation });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > GEOMETRY_TOL * scale * scale * scale * scale {
            return Err(RelativisticError::NotProper { det });
        }
        let time_time = m[(0, 0)];
        if time_time < 1.0 - GEOMETRY_TOL {
            return Err(RelativisticError::NotOrthochronous { time_time });
        }
        Ok(Self { m })
    }

    /// Pure boost with the given 3-velocity (`|v| < 1`).
    pub fn boost(v: [f64; 3]) -> Result<Self, RelativisticError> {
        let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(speed < 1.0) {
            return Err(RelativisticError::SuperluminalVelocity { speed });
        }
        let gamma = 1.0 / (1.0 - speed * speed).sqrt();
        standard_boost(FourVector::new(
            gamma,
            [gamma * v[0], gamma * v[1], gamma * v[2]],
        ))
    }

    /// Spatial rotation by `angle` about `axis` (Rodrigues form).
    pub fn rotation(axis: [f64; 3], angle: f64) -> Result<Self, RelativisticError> {
        let n = Vector3::new(axis[0], axis[1], axis[2]);
        let len = n.norm();
        if len == 0.0 {
            return Err(RelativisticError::ZeroAxis);
        }
        let n = n / len;
        let k = Matrix3::new(0.0, -n[2], n[1], n[2], 0.0, -n[0], -n[1], n[0], 0.0);
        let r3 = Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * (k * k);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(&r3);
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    /// `eta Lambda^T eta`: exact inverse of a metric-preserving matrix,
    /// no linear solve involved.
    pub fn inverse(&self) -> Self {
        let eta = metric();
        Self {
            m: eta * self.m.transpose() * eta,
        }
    }

    /// `self` after `other`: the matrix product `self * other`. Closure of
    /// the group keeps the result valid without revalidation.
    pub fn compose(&self, other: &Self) -> Self {
        Self { m: self.m * other.m }
    }

    pub fn apply(&self, v: FourVector) -> FourVector {
        FourVector::from_vector4(self.m * v.as_vector4())
    }

    /// Largest movement of the time axis, zero for spatial rotations.
    fn time_axis_deviation(&self) -> f64 {
        let e0 = self.m.column(0);
        (e0[0] - 1.0)
            .abs()
            .max(e0[1].abs())
            .max(e0[2].abs())
            .max(e0[3].abs())
    }
}

fn check_four_velocity(p_hat: FourVector) -> Result<(), RelativisticError> {
    let interval = p_hat.interval();
    if (interval - 1.0).abs() > GEOMETRY_TOL * p_hat.t.max(1.0).powi(2) || p_hat.t <= 0.0 {
        return Err(RelativisticError::NotTimelike { interval });
    }
    Ok(())
}

/// Rotation-free boost `L(p)` carrying the rest vector `(1,0,0,0)` to the
/// 4-velocity `p_hat`.
pub fn standard_boost(p_hat: FourVector) -> Result<LorentzTransform, RelativisticError> {
    check_four_velocity(p_hat)?;
    let gamma = p_hat.t;
    let q = Vector3::new(p_hat.x[0], p_hat.x[1], p_hat.x[2]);
    let qn = q.norm();
    let mut m = Matrix4::identity();
    m[(0, 0)] = gamma;
    if qn > 0.0 {
        let n = q / qn;
        for i in 0..3 {
            m[(0, i + 1)] = q[i];
            m[(i + 1, 0)] = q[i];
            for j in 0..3 {
                m[(i + 1, j + 1)] = f64::from(u8::from(i == j)) + (gamma - 1.0) * n[i] * n[j];
            }
        }
    }
    LorentzTransform::from_matrix(m)
}

/// `W = L^{-1}(Lambda p_hat) Lambda L(p_hat)`: the spatial rotation felt by
/// the spin indices when `Lambda` acts on a state moving with `p_hat`.
pub fn wigner_rotation(
    lambda: &LorentzTransform,
    p_hat: FourVector,
) -> Result<LorentzTransform, RelativisticError> {
    let moved = lambda.apply(p_hat);
    let w = standard_boost(moved)?
        .inverse()
        .compose(lambda)
        .compose(&standard_boost(p_hat)?);
    let deviation = w.time_axis_deviation();
    if deviation > GEOMETRY_TOL {
        return Err(RelativisticError::NotARotation { deviation });
    }
    Ok(w)
}

/// z-y-z Euler angles of the spatial block, `beta` in `[0, pi]`, and
/// `alpha` wrapped so `|alpha + gamma| <= pi`. The wrap selects the SU(2)
/// lift with rotation angle at most pi, keeping half-integer D matrices
/// multiplicative for products that stay below a pi total angle.
fn euler_zyz(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let s = r[(0, 2)].hypot(r[(1, 2)]);
    let (mut alpha, beta, gamma);
    if s > 1e-12 {
        beta = s.atan2(r[(2, 2)]);
        alpha = r[(1, 2)].atan2(r[(0, 2)]);
        gamma = r[(2, 1)].atan2(-r[(2, 0)]);
    } else if r[(2, 2)] > 0.0 {
        // beta = 0: only alpha + gamma matters, put it all in alpha
        beta = 0.0;
        alpha = r[(1, 0)].atan2(r[(0, 0)]);
        gamma = 0.0;
    } else {
        // beta = pi: only alpha - gamma matters
        beta = std::f64::consts::PI;
        alpha = (-r[(1, 0)]).atan2(r[(1, 1)]);
        gamma = 0.0;
    }
    let sum = alpha + gamma;
    if sum > std::f64::consts::PI {
        alpha -= 2.0 * std::f64::consts::PI;
    } else if sum <= -std::f64::consts::PI {
        alpha += 2.0 * std::f64::consts::PI;
    }
    (alpha, beta, gamma)
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Wigner's little-d by the factorial sum, Condon-Shortley phases. Indices
/// are twice the projections; `beta` in radians.
fn little_d(j2: i32, mp2: i32, m2: i32, beta: f64) -> f64 {
    let a = (j2 + m2) / 2; // j + m
    let b = (j2 - mp2) / 2; // j - m'
    let k = (mp2 - m2) / 2; // m' - m
    let pre = (factorial((j2 + mp2) / 2)
        * factorial(b)
        * factorial(a)
        * factorial((j2 - m2) / 2))
    .sqrt();
    let (ch, sh) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let mut sum = 0.0;
    for s in 0.max(-k)..=a.min(b) {
        let sign = if (k + s) % 2 == 0 { 1.0 } else { -1.0 };
        let denom =
            factorial(a - s) * factorial(s) * factorial(k + s) * factorial(b - s);
        sum += sign / denom * ch.powi(j2 - k - 2 * s) * sh.powi(k + 2 * s);
    }
    pre * sum
}

/// `(2j+1)`-dimensional representation of a spatial rotation,
/// `D^j_{m'm} = e^{-i m' alpha} d^j_{m'm}(beta) e^{-i m gamma}`, rows and
/// columns ordered from `+j` down to `-j`.
pub fn wigner_d(
    j: HalfInt,
    rotation: &LorentzTransform,
) -> Result<DMatrix<Complex64>, RelativisticError> {
    if j.twice() < 0 {
        return Err(RelativisticError::InvalidSpin { twice_j: j.twice() });
    }
    let deviation = rotation.time_axis_deviation();
    if deviation > GEOMETRY_TOL {
        return Err(RelativisticError::NotARotation { deviation });
    }
    let r3 = rotation.m.fixed_view::<3, 3>(1, 1).into_owned();
    let (alpha, beta, gamma) = euler_zyz(&r3);

    let j2 = j.twice();
    let n = (j2 + 1) as usize;
    let mut d = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (row, mp2) in (0..n).zip((-j2..=j2).rev().step_by(2)) {
        let left = Complex64::from_polar(1.0, -0.5 * mp2 as f64 * alpha);
        for (col, m2) in (0..n).zip((-j2..=j2).rev().step_by(2)) {
            let right = Complex64::from_polar(1.0, -0.5 * m2 as f64 * gamma);
            d[(row, col)] = left * little_d(j2, mp2, m2, beta) * right;
        }
    }
    Ok(d)
}

/// Resonance state label: spin, complex invariant mass squared, real
/// 4-velocity, spin projection.
#[derive(Debug, Clone, Copy)]
pub struct GamowLabel {
    j: HalfInt,
    s_r: Complex64,
    p_hat: FourVector,
    j3: HalfInt,
}

impl GamowLabel {
    pub fn new(
        j: HalfInt,
        s_r: Complex64,
        p_hat: FourVector,
        j3: HalfInt,
    ) -> Result<Self, RelativisticError> {
        if j.twice() < 0 {
            return Err(RelativisticError::InvalidSpin { twice_j: j.twice() });
        }
        if j3.twice().abs() > j.twice() || (j.twice() - j3.twice()) % 2 != 0 {
            return Err(RelativisticError::ProjectionOutOfRange { j, j3 });
        }
        check_four_velocity(p_hat)?;
        let w = s_r.sqrt();
        if !(w.re > 0.0 && w.im <= 0.0) {
            return Err(RelativisticError::InvalidPoleMass { s_r });
        }
        Ok(Self { j, s_r, p_hat, j3 })
    }

    /// Build from `sqrt(s_r) = mass - i width/2` and a 3-velocity.
    pub fn from_mass_width(
        j: HalfInt,
        mass: f64,
        width: f64,
        velocity: [f64; 3],
        j3: HalfInt,
    ) -> Result<Self, RelativisticError> {
        let speed_sq: f64 = velocity.iter().map(|c| c * c).sum();
        if !(speed_sq < 1.0) {
            return Err(RelativisticError::SuperluminalVelocity {
                speed: speed_sq.sqrt(),
            });
        }
        let gamma = 1.0 / (1.0 - speed_sq).sqrt();
        let p_hat = FourVector::new(
            gamma,
            [
                gamma * velocity[0],
                gamma * velocity[1],
                gamma * velocity[2],
            ],
        );
        let w = Complex64::new(mass, -0.5 * width);
        Self::new(j, w * w, p_hat, j3)
    }

    pub fn j(&self) -> HalfInt {
        self.j
    }

    pub fn j3(&self) -> HalfInt {
        self.j3
    }

    pub fn s_r(&self) -> Complex64 {
        self.s_r
    }

    pub fn p_hat(&self) -> FourVector {
        self.p_hat
    }

    /// Decaying branch of the complex mass: `Re > 0`, `Im <= 0`, guaranteed
    /// by construction.
    pub fn sqrt_s_r(&self) -> Complex64 {
        self.s_r.sqrt()
    }
}

/// Result of an accepted Poincare action on a label.
#[derive(Debug, Clone)]
pub struct TransformedState {
    /// `exp(-i sqrt(s_r) * (p_hat . x))`; modulus at most 1 inside the cone.
    pub phase: Complex64,
    /// Column `j3` of `D^j` of the Wigner rotation, length `2j+1`.
    pub components: Vec<Complex64>,
    /// Pulled-back 4-velocity, always real and unit timelike.
    pub new_p_hat: FourVector,
}

/// Typed refusal: translations outside the forward cone are not in the
/// semigroup's domain. This is expected behavior, not an error.
#[derive(Debug, Clone, Copy)]
pub struct CausalityRejection {
    pub x: FourVector,
}

impl fmt::Display for CausalityRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "translation {} lies outside the forward cone (interval {})",
            self.x,
            self.x.interval()
        )
    }
}

#[derive(Debug, Clone)]
pub enum PoincareOutcome {
    Transformed(TransformedState),
    Rejected(CausalityRejection),
}

/// Act with `(Lambda, x)` on a labeled state. The translation must sit in
/// the forward cone; the spin indices mix through `D^j(W(Lambda^{-1}, p))`
/// and the velocity label is pulled back to `Lambda^{-1} p_hat`.
pub fn transform_gamow(
    label: &GamowLabel,
    lambda: &LorentzTransform,
    x: FourVector,
) -> Result<PoincareOutcome, RelativisticError> {
    if !in_forward_cone(x) {
        return Ok(PoincareOutcome::Rejected(CausalityRejection { x }));
    }
    // p.x = gamma (t - x.v): the invariant retarded clock of the label
    let u = label.p_hat.minkowski_dot(x);
    let phase = (-Complex64::i() * label.sqrt_s_r() * u).exp();

    let lam_inv = lambda.inverse();
    let w = wigner_rotation(&lam_inv, label.p_hat)?;
    let d = wigner_d(label.j, &w)?;
    let col = ((label.j.twice() - label.j3.twice()) / 2) as usize;
    let components = (0..d.nrows()).map(|r| d[(r, col)]).collect();

    Ok(PoincareOutcome::Transformed(TransformedState {
        phase,
        components,
        new_p_hat: lam_inv.apply(label.p_hat),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_int_display_and_value() {
        assert_eq!(HalfInt::from_twice(3).to_string(), "3/2");
        assert_eq!(HalfInt::from_twice(-3).to_string(), "-3/2");
        assert_eq!(HalfInt::from_int(2).to_string(), "2");
        assert_eq!(HalfInt::from_twice(3).value(), 1.5);
        assert!(!HalfInt::from_twice(3).is_integer());
        assert!(HalfInt::ZERO.is_integer());
    }

    #[test]
    fn inverse_is_exact_for_boosts() {
        let b = LorentzTransform::boost([0.3, -0.5, 0.2]).unwrap();
        let prod = b.compose(&b.inverse());
        assert!((prod.matrix() - Matrix4::identity()).amax() < 1e-13);
    }

    #[test]
    fn euler_roundtrip_rebuilds_the_rotation() {
        let r = LorentzTransform::rotation([0.3, -1.0, 0.7], 1.9).unwrap();
        let r3 = r.matrix().fixed_view::<3, 3>(1, 1).into_owned();
        let (a, b, g) = euler_zyz(&r3);
        let rebuilt = LorentzTransform::rotation([0.0, 0.0, 1.0], a)
            .unwrap()
            .compose(&LorentzTransform::rotation([0.0, 1.0, 0.0], b).unwrap())
            .compose(&LorentzTransform::rotation([0.0, 0.0, 1.0], g).unwrap());
        assert!((rebuilt.matrix() - r.matrix()).amax() < 1e-13);
        assert!((0.0..=std::f64::consts::PI).contains(&b));
        assert!((a + g).abs() <= std::f64::consts::PI + 1e-12);
    }

    #[test]
    fn little_d_sums_to_legendre_on_the_diagonal() {
        // d^1_{00}(beta) = cos(beta) = P_1, d^2_{00} = P_2
        let beta = 1.1f64;
        assert!((little_d(2, 0, 0, beta) - beta.cos()).abs() < 1e-14);
        let p2 = 0.5 * (3.0 * beta.cos() * beta.cos() - 1.0);
        assert!((little_d(4, 0, 0, beta) - p2).abs() < 1e-14);
    }

    #[test]
    fn rejection_message_names_the_point() {
        let r = CausalityRejection {
            x: FourVector::new(-1.0, [0.0; 3]),
        };
        let msg = r.to_string();
        assert!(msg.contains("forward cone"));
        assert!(msg.contains("t=-1"));
    }
}
