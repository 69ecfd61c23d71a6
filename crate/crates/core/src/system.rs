//! The 2D stochastic system interface the solvers operate on.

use crate::num::{Mat2, Real, Vec2};

/// A planar SDE `dX = b(X) dt + ε η(X) dB` with diagonal noise matrix `η`.
///
/// The geometric action uses the inverse metric `A = (η ηᵀ)⁻¹`, which is
/// diagonal here; `inverse_metric_grad` supplies its spatial derivatives for
/// the relaxation step's metric terms. Implementations must be pure: the
/// relaxation and simulation loops call these from parallel workers.
pub trait System<T: Real>: Sync {
    fn drift(&self, x: Vec2<T>) -> Vec2<T>;

    /// Analytic Jacobian of the drift.
    fn jacobian(&self, x: Vec2<T>) -> Mat2<T>;

    /// Diagonal of the noise matrix η(x), without the ε prefactor.
    fn diffusion_diag(&self, x: Vec2<T>) -> Vec2<T>;

    /// Diagonal of A = (η ηᵀ)⁻¹.
    fn inverse_metric_diag(&self, x: Vec2<T>) -> Vec2<T> {
        let d = self.diffusion_diag(x);
        Vec2::new((d.x * d.x).recip(), (d.y * d.y).recip())
    }

    /// Row k = ∂A/∂x_k applied to the diagonal of A; zero for constant metrics.
    fn inverse_metric_grad(&self, x: Vec2<T>) -> [Vec2<T>; 2] {
        let _ = x;
        [Vec2::zero(), Vec2::zero()]
    }

    /// Whether a state lies in the admissible domain (finite, metric regular).
    fn admissible(&self, x: Vec2<T>) -> bool {
        x.is_finite()
    }

    /// Project a proposed state back into the domain; the flag reports whether
    /// clamping occurred (counted by the simulator).
    fn clamp(&self, x: Vec2<T>) -> (Vec2<T>, bool) {
        (x, false)
    }

    /// Central finite-difference Jacobian, the self-check oracle for
    /// `jacobian` implementations.
    fn jacobian_fd(&self, x: Vec2<T>, h: T) -> Mat2<T> {
        let two_h = h + h;
        let dx = self.drift(Vec2::new(x.x + h, x.y)) - self.drift(Vec2::new(x.x - h, x.y));
        let dy = self.drift(Vec2::new(x.x, x.y + h)) - self.drift(Vec2::new(x.x, x.y - h));
        Mat2::new(dx.x / two_h, dy.x / two_h, dx.y / two_h, dy.y / two_h)
    }
}
