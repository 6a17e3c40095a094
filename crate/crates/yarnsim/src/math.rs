//! Scalar and small-vector arithmetic shared by all force kernels.
//!
//! Every force kernel in this crate is written once, generic over [`Real`].
//! The forward pass instantiates the kernels with `f64`; the reverse-mode
//! sweep instantiates them with [`Dual`] to obtain exact directional
//! derivatives of the assembled system (forces *and* their Jacobian entries)
//! without a second set of hand-derived formulas.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Scalar abstraction over `f64` and forward-mode dual numbers.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn from_f64(v: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// Value part (primal), used for branching; branches must be decided on
    /// values so that f64 and dual evaluations take identical paths.
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn acos(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn scale(self, k: f64) -> Self;
    fn max0(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            Self::zero()
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn acos(self) -> Self {
        f64::acos(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Forward-mode dual number: value plus one directional derivative.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    #[inline]
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }
    #[inline]
    pub fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    #[inline]
    pub fn seeded(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}
impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}
impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}
impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        Dual::new(self.v * inv, (self.d - self.v * inv * o.d) * inv)
    }
}
impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}
impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        *self = *self + o;
    }
}
impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        *self = *self - o;
    }
}

impl Real for Dual {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual::new(s, self.d * 0.5 / s)
    }
    #[inline]
    fn sin(self) -> Self {
        Dual::new(self.v.sin(), self.d * self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Dual::new(self.v.cos(), -self.d * self.v.sin())
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        Dual::new(t, self.d * (1.0 - t * t))
    }
    #[inline]
    fn acos(self) -> Self {
        // Callers clamp arguments away from ±1; the guard here only absorbs
        // roundoff so the derivative stays finite.
        let x = self.v.clamp(-1.0 + 1e-14, 1.0 - 1e-14);
        Dual::new(self.v.clamp(-1.0, 1.0).acos(), -self.d / (1.0 - x * x).sqrt())
    }
    #[inline]
    fn abs(self) -> Self {
        if self.v >= 0.0 {
            self
        } else {
            -self
        }
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        Dual::new(self.v.powi(n), self.d * n as f64 * self.v.powi(n - 1))
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        Dual::new(self.v * k, self.d * k)
    }
}

/// 3-component vector over a generic scalar.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct V3<S>(pub [S; 3]);

pub type Vec3 = V3<f64>;

impl<S: Real> V3<S> {
    #[inline]
    pub fn zero() -> Self {
        V3([S::zero(); 3])
    }
    #[inline]
    pub fn from_f64(v: [f64; 3]) -> Self {
        V3([S::from_f64(v[0]), S::from_f64(v[1]), S::from_f64(v[2])])
    }
    #[inline]
    pub fn value(self) -> [f64; 3] {
        [self.0[0].value(), self.0[1].value(), self.0[2].value()]
    }
    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    #[inline]
    pub fn cross(self, o: Self) -> Self {
        V3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }
    #[inline]
    pub fn norm2(self) -> S {
        self.dot(self)
    }
    #[inline]
    pub fn norm(self) -> S {
        self.norm2().sqrt()
    }
    #[inline]
    pub fn scale(self, k: S) -> Self {
        V3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
    #[inline]
    pub fn scalef(self, k: f64) -> Self {
        V3([self.0[0].scale(k), self.0[1].scale(k), self.0[2].scale(k)])
    }
    /// Outer product, row-major 3x3.
    #[inline]
    pub fn outer(self, o: Self) -> [[S; 3]; 3] {
        let mut m = [[S::zero(); 3]; 3];
        for (i, mi) in m.iter_mut().enumerate() {
            for (j, mij) in mi.iter_mut().enumerate() {
                *mij = self.0[i] * o.0[j];
            }
        }
        m
    }
}

impl<S: Real> Add for V3<S> {
    type Output = V3<S>;
    #[inline]
    fn add(self, o: Self) -> Self {
        V3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}
impl<S: Real> Sub for V3<S> {
    type Output = V3<S>;
    #[inline]
    fn sub(self, o: Self) -> Self {
        V3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}
impl<S: Real> Neg for V3<S> {
    type Output = V3<S>;
    #[inline]
    fn neg(self) -> Self {
        V3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// 3x3 matrix-vector product for row-major `[[S;3];3]`.
#[inline]
pub fn mat3_mul<S: Real>(m: &[[S; 3]; 3], v: V3<S>) -> V3<S> {
    V3([
        m[0][0] * v.0[0] + m[0][1] * v.0[1] + m[0][2] * v.0[2],
        m[1][0] * v.0[0] + m[1][1] * v.0[1] + m[1][2] * v.0[2],
        m[2][0] * v.0[0] + m[2][1] * v.0[1] + m[2][2] * v.0[2],
    ])
}

/// θ/sinθ expressed as a smooth function of t = cosθ.
///
/// Near t = 1 the quotient acos(t)/sqrt(1-t²) is 0/0 but analytic; a short
/// series keeps both the value and the dual derivative finite. This is what
/// keeps the bend kernel regular on an exactly straight yarn.
#[inline]
pub fn acos_ratio<S: Real>(t: S) -> S {
    let e = S::one() - t;
    if e.value() < 1e-6 {
        // θ/sinθ = 1 + (1-t)/3 + 2(1-t)²/45·(... ), truncation error O(e³).
        S::one() + e.scale(1.0 / 3.0) + (e * e).scale(2.0 / 15.0)
    } else {
        let tc = clamp_unit(t);
        tc.acos() / (S::one() - tc * tc).sqrt()
    }
}

/// (1 − θ·cotθ)/sin²θ as a smooth function of t = cosθ (θ = acos t).
///
/// Appears in bend Jacobians as the coefficient of ∇θ∇θᵀ; tends to 1/3 as
/// the yarn straightens.
#[inline]
pub fn one_minus_theta_cot_over_sin2<S: Real>(t: S) -> S {
    let e = S::one() - t;
    if e.value() < 1e-6 {
        // 1/3 + 2θ²/15 with θ² ≈ 2e + e²/3... truncated: 1/3 + 4e/15.
        S::from_f64(1.0 / 3.0) + e.scale(4.0 / 15.0)
    } else {
        let tc = clamp_unit(t);
        let sin2 = S::one() - tc * tc;
        let theta = tc.acos();
        (S::one() - theta * tc / sin2.sqrt()) / sin2
    }
}

#[inline]
fn clamp_unit<S: Real>(t: S) -> S {
    if t.value() > 1.0 {
        S::one() + (t - t) // preserve dual part shape: constant 1
    } else if t.value() < -1.0 {
        -S::one()
    } else {
        t
    }
}

/// Relative error between an analytic value and a reference, guarding small
/// denominators with `scale`.
pub fn rel_err(analytic: f64, reference: f64, scale: f64) -> f64 {
    let denom = reference.abs().max(scale);
    (analytic - reference).abs() / denom
}
