//! Scalar abstraction and the small fixed-size linear algebra the solvers need.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Floating-point scalar the whole library is generic over.
///
/// Implemented for `f32` and `f64`. Algorithmic constants are written as
/// `f64` literals and converted through [`Real::of`], so a narrower scalar
/// loses precision but not behavior.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssignOps
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Sum
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal converts to scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A point or tangent in the 2D phase plane.
///
/// For the carbonate model `x` is the carbonate-ion concentration `c` and
/// `y` the total dissolved inorganic carbon `w` (both μmol·kg⁻¹).
#[derive(Clone, Copy, PartialEq, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 {
            x: T::zero(),
            y: T::zero(),
        }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// Elementwise product; applies a diagonal matrix stored as a vector.
    pub fn mul_elem(self, o: Self) -> Self {
        Vec2::new(self.x * o.x, self.y * o.y)
    }

    pub fn div_elem(self, o: Self) -> Self {
        Vec2::new(self.x / o.x, self.y / o.y)
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Sup-norm of the difference, the convergence metric of the relaxation loop.
    pub fn max_abs_diff(self, o: Self) -> T {
        (self.x - o.x).abs().max((self.y - o.y).abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scale(self, s: T) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Div<T> for Vec2<T> {
    type Output = Self;
    fn div(self, s: T) -> Self {
        Vec2::new(self.x / s, self.y / s)
    }
}

/// Row-major 2×2 matrix.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Mat2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

impl<T: Real> Mat2<T> {
    pub fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn diag(d1: T, d2: T) -> Self {
        Mat2::new(d1, T::zero(), T::zero(), d2)
    }

    pub fn identity() -> Self {
        Mat2::diag(T::one(), T::one())
    }

    pub fn mul_vec(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a21 * v.x + self.a22 * v.y)
    }

    /// Aᵀ·v without forming the transpose.
    pub fn t_mul_vec(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.a11 * v.x + self.a21 * v.y, self.a12 * v.x + self.a22 * v.y)
    }

    pub fn mul_mat(self, o: Self) -> Self {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    pub fn det(self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(self) -> T {
        self.a11 + self.a22
    }

    /// Largest real part among the two eigenvalues.
    pub fn max_eigen_real(self) -> T {
        let tr = self.trace();
        let half = T::of(0.5);
        let disc = tr * tr - T::of(4.0) * self.det();
        if disc >= T::zero() {
            (tr + disc.sqrt()) * half
        } else {
            tr * half
        }
    }
}

/// Thomas algorithm for a tridiagonal system.
///
/// `sub[0]` and `sup[n-1]` are ignored. `scratch` must have the system size;
/// returns `false` on a vanishing pivot (the relaxation matrix is strictly
/// diagonally dominant, so this only fires on corrupted input).
pub fn solve_tridiagonal<T: Real>(
    sub: &[T],
    diag: &[T],
    sup: &[T],
    rhs: &[T],
    scratch: &mut [T],
    out: &mut [T],
) -> bool {
    let n = rhs.len();
    debug_assert!(sub.len() == n && diag.len() == n && sup.len() == n);
    debug_assert!(scratch.len() >= n && out.len() >= n);
    if n == 0 {
        return true;
    }
    if diag[0] == T::zero() {
        return false;
    }
    scratch[0] = sup[0] / diag[0];
    out[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * scratch[i - 1];
        if m == T::zero() {
            return false;
        }
        scratch[i] = sup[i] / m;
        out[i] = (rhs[i] - sub[i] * out[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        out[i] = out[i] - scratch[i] * out[i + 1];
    }
    true
}
