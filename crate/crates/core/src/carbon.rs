//! The upper-ocean carbonate model: drift, diffusion and auxiliary functions.
//!
//! State is `(c, w)`: carbonate-ion concentration and total dissolved
//! inorganic carbon, both in μmol·kg⁻¹. Time is nondimensional. The model
//! constants are external configuration (see the shipped parameter file);
//! nothing in this module assumes particular values.

use crate::error::{Error, Result};
use crate::num::{Mat2, Real, Vec2};
use crate::system::System;
use serde::{Deserialize, Serialize};

/// Domain floor for `c`: the buffer function vanishes at `c = 0`, which makes
/// the path metric singular, so states below this are inadmissible.
pub const C_MIN: f64 = 1e-6;

/// All constants of the carbonate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>")
)]
pub struct ModelParams<T> {
    /// Characteristic concentration (μmol·kg⁻¹).
    pub mu: T,
    /// Maximum CaCO₃ burial rate (dimensionless).
    pub b: T,
    /// Maximum respiration feedback rate (dimensionless).
    pub theta: T,
    /// External CO₂ injection rate (dimensionless), the sweep variable.
    pub nu: T,
    /// Burial crossover concentration (μmol·kg⁻¹).
    pub c_p: T,
    /// Respiration crossover concentration (μmol·kg⁻¹).
    pub c_x: T,
    /// Buffering crossover concentration (μmol·kg⁻¹).
    pub c_f: T,
    /// Maximum buffer factor (dimensionless).
    pub f0: T,
    /// Reference dissolved inorganic carbon (μmol·kg⁻¹).
    pub w0: T,
    /// Sigmoid sharpness (dimensionless, > 0).
    pub gamma: T,
    /// Buffer sharpness (dimensionless, > 0).
    pub beta: T,
    /// Characteristic timescale in years; metadata only, never computed with.
    pub tau_w_years: T,
}

impl<T: Real> ModelParams<T> {
    /// Check the documented invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let entries: [(&str, T); 12] = [
            ("mu", self.mu),
            ("b", self.b),
            ("theta", self.theta),
            ("nu", self.nu),
            ("c_p", self.c_p),
            ("c_x", self.c_x),
            ("c_f", self.c_f),
            ("f0", self.f0),
            ("w0", self.w0),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("tau_w_years", self.tau_w_years),
        ];
        for (name, v) in entries {
            if !v.is_finite() {
                return Err(Error::Domain(format!("parameter `{name}` must be finite, got {v}")));
            }
        }
        for name in ["mu", "c_p", "c_x", "c_f", "f0", "gamma", "beta"] {
            let v = match name {
                "mu" => self.mu,
                "c_p" => self.c_p,
                "c_x" => self.c_x,
                "c_f" => self.c_f,
                "f0" => self.f0,
                "gamma" => self.gamma,
                _ => self.beta,
            };
            if v <= T::zero() {
                return Err(Error::Domain(format!("parameter `{name}` must be > 0, got {v}")));
            }
        }
        if self.nu < T::zero() {
            return Err(Error::Domain(format!("parameter `nu` must be >= 0, got {}", self.nu)));
        }
        Ok(())
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_c_x(mut self, c_x: T) -> Self {
        self.c_x = c_x;
        self
    }
}

/// s(c, c_half) = c^γ / (c^γ + c_half^γ).
pub fn sigmoid<T: Real>(c: T, c_half: T, gamma: T) -> Result<T> {
    if c < T::zero() {
        return Err(Error::Domain(format!("sigmoid: c must be >= 0, got {c}")));
    }
    if c_half <= T::zero() || gamma <= T::zero() {
        return Err(Error::Domain(
            "sigmoid: c_half and gamma must be > 0".to_string(),
        ));
    }
    Ok(sig_raw(c.powf(gamma), c_half.powf(gamma)))
}

/// f(c) = f0 · c^β / (c^β + c_f^β).
pub fn buffer<T: Real>(c: T, p: &ModelParams<T>) -> Result<T> {
    if c < T::zero() {
        return Err(Error::Domain(format!("buffer: c must be >= 0, got {c}")));
    }
    Ok(p.f0 * sig_raw(c.powf(p.beta), p.c_f.powf(p.beta)))
}

#[inline]
fn sig_raw<T: Real>(num_pow: T, half_pow: T) -> T {
    num_pow / (num_pow + half_pow)
}

/// Drift of Eqs. (1)–(2) at a state with `c > 0`.
pub fn drift<T: Real>(state: Vec2<T>, p: &ModelParams<T>) -> Result<Vec2<T>> {
    check_c_positive(state)?;
    Ok(CarbonSystem::new(*p)?.drift(state))
}

/// Noise matrix diag(−μ f(c), μ); the ε prefactor belongs to the simulator.
pub fn diffusion<T: Real>(state: Vec2<T>, p: &ModelParams<T>) -> Result<Mat2<T>> {
    check_c_positive(state)?;
    let sys = CarbonSystem::new(*p)?;
    let d = sys.diffusion_diag(state);
    Ok(Mat2::diag(d.x, d.y))
}

/// A = (η ηᵀ)⁻¹ = diag(1/(μ f(c))², 1/μ²), the metric of the geometric action.
pub fn inverse_metric<T: Real>(state: Vec2<T>, p: &ModelParams<T>) -> Result<Mat2<T>> {
    let sys = CarbonSystem::new(*p)?;
    if !state.is_finite() || state.x < sys.c_min() {
        return Err(Error::MetricSingular { c: state.x.as_f64() });
    }
    let a = sys.inverse_metric_diag(state);
    Ok(Mat2::diag(a.x, a.y))
}

/// Analytic Jacobian of the drift.
pub fn jacobian<T: Real>(state: Vec2<T>, p: &ModelParams<T>) -> Result<Mat2<T>> {
    check_c_positive(state)?;
    Ok(CarbonSystem::new(*p)?.jacobian(state))
}

fn check_c_positive<T: Real>(state: Vec2<T>) -> Result<()> {
    if state.x <= T::zero() || !state.is_finite() {
        return Err(Error::Domain(format!(
            "carbonate state requires c > 0, got c = {}",
            state.x
        )));
    }
    Ok(())
}

/// Analytic fixed-point location: adding the two balance equations gives
/// s(c*, c_p) = 1/b, hence c* = c_p/(b−1)^{1/γ}, and the w-equation then
/// yields w*. Used as the Newton initial guess and exact up to round-off.
pub fn fixed_point_guess<T: Real>(p: &ModelParams<T>) -> Vec2<T> {
    let one = T::one();
    let c_star = if p.b > one {
        p.c_p / (p.b - one).powf(one / p.gamma)
    } else {
        p.c_p
    };
    let s_x = sig_raw(c_star.powf(p.gamma), p.c_x.powf(p.gamma));
    let w_star = p.w0 + p.mu * (p.theta * (one - s_x) + p.nu);
    Vec2::new(c_star, w_star)
}

/// The carbonate system with crossover powers precomputed.
#[derive(Debug, Clone, Copy)]
pub struct CarbonSystem<T> {
    params: ModelParams<T>,
    cp_g: T,
    cx_g: T,
    cf_b: T,
    c_min: T,
}

impl<T: Real> CarbonSystem<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(CarbonSystem {
            params,
            cp_g: params.c_p.powf(params.gamma),
            cx_g: params.c_x.powf(params.gamma),
            cf_b: params.c_f.powf(params.beta),
            c_min: T::of(C_MIN),
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn c_min(&self) -> T {
        self.c_min
    }

    pub fn fixed_point_guess(&self) -> Vec2<T> {
        fixed_point_guess(&self.params)
    }

    #[inline]
    fn buf(&self, c: T) -> (T, T) {
        // returns (f, f') sharing the c^β evaluation
        let p = &self.params;
        let cb = c.powf(p.beta);
        let den = cb + self.cf_b;
        let f = p.f0 * cb / den;
        let df = p.f0 * p.beta * (cb / c) * self.cf_b / (den * den);
        (f, df)
    }

    /// Drift pieces shared by `drift` and `jacobian`:
    /// (s_p, s_x, f, g, G) with drift = (g·f, G).
    #[inline]
    fn parts(&self, c: T, w: T) -> (T, T, T, T, T) {
        let p = &self.params;
        let one = T::one();
        let cg = c.powf(p.gamma);
        let s_p = cg / (cg + self.cp_g);
        let s_x = cg / (cg + self.cx_g);
        let cb = c.powf(p.beta);
        let f = p.f0 * cb / (cb + self.cf_b);
        let g = p.mu * (one - p.b * s_p - p.theta * (one - s_x) - p.nu) + w - p.w0;
        let big_g = p.mu * (one - p.b * s_p + p.theta * (one - s_x) + p.nu) - w + p.w0;
        (s_p, s_x, f, g, big_g)
    }

    #[inline]
    fn dsig(&self, c: T, cg: T, half_pow: T) -> T {
        let den = cg + half_pow;
        self.params.gamma * (cg / c) * half_pow / (den * den)
    }
}

impl<T: Real> System<T> for CarbonSystem<T> {
    #[inline]
    fn drift(&self, x: Vec2<T>) -> Vec2<T> {
        let (_, _, f, g, big_g) = self.parts(x.x, x.y);
        Vec2::new(g * f, big_g)
    }

    fn jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        let p = &self.params;
        let (_, _, f, g, _) = self.parts(x.x, x.y);
        let cg = x.x.powf(p.gamma);
        let dsp = self.dsig(x.x, cg, self.cp_g);
        let dsx = self.dsig(x.x, cg, self.cx_g);
        let (_, df) = self.buf(x.x);
        let dg_dc = p.mu * (-(p.b * dsp) + p.theta * dsx);
        Mat2::new(
            dg_dc * f + g * df,
            f,
            p.mu * (-(p.b * dsp) - p.theta * dsx),
            -T::one(),
        )
    }

    #[inline]
    fn diffusion_diag(&self, x: Vec2<T>) -> Vec2<T> {
        let (f, _) = self.buf(x.x);
        Vec2::new(-(self.params.mu * f), self.params.mu)
    }

    #[inline]
    fn inverse_metric_diag(&self, x: Vec2<T>) -> Vec2<T> {
        let (f, _) = self.buf(x.x);
        let mu = self.params.mu;
        let mf = mu * f;
        Vec2::new((mf * mf).recip(), (mu * mu).recip())
    }

    #[inline]
    fn inverse_metric_grad(&self, x: Vec2<T>) -> [Vec2<T>; 2] {
        let (f, df) = self.buf(x.x);
        let mu2 = self.params.mu * self.params.mu;
        let two = T::of(2.0);
        // d/dc [1/(μf)²] = −2 f′ / (μ² f³); the w-row is zero.
        let da11 = -(two * df) / (mu2 * f * f * f);
        [Vec2::new(da11, T::zero()), Vec2::zero()]
    }

    #[inline]
    fn admissible(&self, x: Vec2<T>) -> bool {
        x.is_finite() && x.x >= self.c_min
    }

    #[inline]
    fn clamp(&self, x: Vec2<T>) -> (Vec2<T>, bool) {
        if x.x < self.c_min {
            (Vec2::new(self.c_min, x.y), true)
        } else {
            (x, false)
        }
    }
}
