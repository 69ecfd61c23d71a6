//! Reference systems with analytically known quasi-potentials.
//!
//! For a gradient system `dX = −a(X)∇U(X) dt + ε η(X) dB` with `a = η ηᵀ`,
//! the quasi-potential between a minimum of `U` and any point reached
//! monotonically uphill is `V = 2ΔU`, independent of the metric. These
//! systems pin the solver against that closed form.

use crate::num::{Mat2, Real, Vec2};
use crate::system::System;

/// Overdamped double well: `U = (x² − 1)² + y²`, identity noise.
///
/// Wells at (±1, 0), saddle at the origin; `V((−1,0) → (1,0)) = 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl<T: Real> System<T> for DoubleWell {
    fn drift(&self, x: Vec2<T>) -> Vec2<T> {
        let four = T::of(4.0);
        let two = T::of(2.0);
        Vec2::new(-(four * x.x * (x.x * x.x - T::one())), -(two * x.y))
    }

    fn jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        let z = T::zero();
        Mat2::new(
            T::of(4.0) - T::of(12.0) * x.x * x.x,
            z,
            z,
            T::of(-2.0),
        )
    }

    fn diffusion_diag(&self, _x: Vec2<T>) -> Vec2<T> {
        Vec2::new(T::one(), T::one())
    }
}

/// Symmetric linear sink `dX = −X dt + ε dB`; `V(0 → x) = ‖x‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearSink;

impl<T: Real> System<T> for LinearSink {
    fn drift(&self, x: Vec2<T>) -> Vec2<T> {
        -x
    }

    fn jacobian(&self, _x: Vec2<T>) -> Mat2<T> {
        Mat2::diag(-T::one(), -T::one())
    }

    fn diffusion_diag(&self, _x: Vec2<T>) -> Vec2<T> {
        Vec2::new(T::one(), T::one())
    }
}

/// Double well under a state-dependent diagonal metric shaped like the
/// carbonate one: `b = −(η ηᵀ)∇U` with `η = diag(μ f(c), μ)` and `f` a
/// saturating buffer. Exercises every metric-derivative term of the
/// relaxation update while keeping `V = 2ΔU` exact.
///
/// `U = ((c − 84)² − 16)²/256 + ((w − 2280)/50)²`: wells at (80, 2280) and
/// (88, 2280), saddle at (84, 2280), so `V(well → well) = 2`.
#[derive(Debug, Clone, Copy)]
pub struct MetricGradient {
    mu: f64,
    f0: f64,
    c_f: f64,
    beta: f64,
}

impl Default for MetricGradient {
    fn default() -> Self {
        MetricGradient {
            mu: 250.0,
            f0: 0.694,
            c_f: 43.9,
            beta: 1.7,
        }
    }
}

impl MetricGradient {
    pub const WELL_LEFT: (f64, f64) = (80.0, 2280.0);
    pub const WELL_RIGHT: (f64, f64) = (88.0, 2280.0);
    pub const SADDLE: (f64, f64) = (84.0, 2280.0);
    /// 2·[U(saddle) − U(well)] = 2·(16²/256) = 2.
    pub const BARRIER_ACTION: f64 = 2.0;

    fn buf<T: Real>(&self, c: T) -> (T, T) {
        let beta = T::of(self.beta);
        let cfb = T::of(self.c_f).powf(beta);
        let cb = c.powf(beta);
        let den = cb + cfb;
        let f = T::of(self.f0) * cb / den;
        let df = T::of(self.f0) * beta * (cb / c) * cfb / (den * den);
        (f, df)
    }

    /// ∇U and the diagonal of its Hessian.
    fn grad_u<T: Real>(x: Vec2<T>) -> (Vec2<T>, Vec2<T>) {
        let dc = x.x - T::of(84.0);
        let dw = x.y - T::of(2280.0);
        let q = dc * dc - T::of(16.0);
        let ux = dc * q / T::of(64.0);
        let uw = dw / T::of(1250.0);
        let uxx = (T::of(3.0) * dc * dc - T::of(16.0)) / T::of(64.0);
        let uww = T::of(1.0 / 1250.0);
        (Vec2::new(ux, uw), Vec2::new(uxx, uww))
    }
}

impl<T: Real> System<T> for MetricGradient {
    fn drift(&self, x: Vec2<T>) -> Vec2<T> {
        let (f, _) = self.buf(x.x);
        let mu = T::of(self.mu);
        let (gu, _) = Self::grad_u(x);
        let a1 = mu * f * (mu * f);
        let a2 = mu * mu;
        Vec2::new(-(a1 * gu.x), -(a2 * gu.y))
    }

    fn jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        let (f, df) = self.buf(x.x);
        let mu = T::of(self.mu);
        let (gu, hu) = Self::grad_u(x);
        let a1 = mu * f * (mu * f);
        let da1 = T::of(2.0) * mu * mu * f * df;
        Mat2::new(
            -(da1 * gu.x + a1 * hu.x),
            T::zero(),
            T::zero(),
            -(mu * mu * hu.y),
        )
    }

    fn diffusion_diag(&self, x: Vec2<T>) -> Vec2<T> {
        let (f, _) = self.buf(x.x);
        let mu = T::of(self.mu);
        Vec2::new(mu * f, mu)
    }

    fn inverse_metric_grad(&self, x: Vec2<T>) -> [Vec2<T>; 2] {
        let (f, df) = self.buf(x.x);
        let mu2 = T::of(self.mu * self.mu);
        let da11 = -(T::of(2.0) * df) / (mu2 * f * f * f);
        [Vec2::new(da11, T::zero()), Vec2::zero()]
    }

    fn admissible(&self, x: Vec2<T>) -> bool {
        x.is_finite() && x.x > T::of(1e-6)
    }
}
