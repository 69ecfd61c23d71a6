//! Deterministic phase-plane analysis: integration, fixed points, limit
//! cycles and the regime classification over the respiration crossover c_x.

use crate::carbon::{CarbonSystem, ModelParams};
use crate::error::{Error, Result};
use crate::num::{Real, Vec2};
use crate::path::resample_closed;
use crate::system::System;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// RK4 is the working integrator; the first-order scheme is kept for
/// comparison runs (cycle extraction must not carry O(dt) bias).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Rk4,
    Euler,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec2<T>>,
    pub dt: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

/// A closed orbit, stored with an exact duplicate of the first point at the
/// end, resampled equidistant in arc length.
#[derive(Debug, Clone)]
pub struct LimitCycle<T> {
    pub points: Vec<Vec2<T>>,
    pub period: T,
    pub stability: Stability,
}

impl<T: Real> LimitCycle<T> {
    pub fn arc_length(&self) -> T {
        crate::path::path_length(&self.points)
    }

    /// Point at arc position `s` ∈ [0, L] along the closed polyline.
    pub fn point_at_arc(&self, s: T) -> Vec2<T> {
        let mut acc = T::zero();
        for w in self.points.windows(2) {
            let seg = w[0].dist(w[1]);
            if acc + seg >= s && seg > T::zero() {
                let a = (s - acc) / seg;
                return w[0] + (w[1] - w[0]) * a;
            }
            acc += seg;
        }
        self.points[self.points.len() - 1]
    }

    pub fn bounding_box(&self) -> (Vec2<T>, Vec2<T>) {
        bounding_box(&self.points)
    }

    pub fn bbox_diagonal(&self) -> T {
        let (lo, hi) = self.bounding_box();
        lo.dist(hi)
    }

    pub fn contains(&self, pt: Vec2<T>) -> bool {
        point_in_polygon(pt, &self.points)
    }

    pub fn distance_to(&self, pt: Vec2<T>) -> T {
        distance_to_polyline(pt, &self.points)
    }
}

pub fn bounding_box<T: Real>(points: &[Vec2<T>]) -> (Vec2<T>, Vec2<T>) {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Ray-casting point-in-polygon; zero-length edges are skipped naturally.
pub fn point_in_polygon<T: Real>(pt: Vec2<T>, poly: &[Vec2<T>]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > pt.y) != (pj.y > pt.y) {
            let t = (pt.y - pi.y) / (pj.y - pi.y);
            let x_int = pi.x + t * (pj.x - pi.x);
            if pt.x < x_int {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Minimum Euclidean distance from a point to a polyline.
pub fn distance_to_polyline<T: Real>(pt: Vec2<T>, pts: &[Vec2<T>]) -> T {
    let mut best = T::infinity();
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        let dd = d.dot(d);
        let t = if dd > T::zero() {
            ((pt - w[0]).dot(d) / dd).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        best = best.min(pt.dist(w[0] + d * t));
    }
    best
}

/// One explicit Euler step; shared verbatim with the stochastic simulator so
/// the ε = 0 degeneration is bit-exact.
#[inline]
pub fn euler_step<T: Real, S: System<T> + ?Sized>(sys: &S, x: Vec2<T>, dt: T) -> Vec2<T> {
    let d = sys.drift(x);
    Vec2::new(x.x + d.x * dt, x.y + d.y * dt)
}

#[inline]
pub fn rk4_step<T: Real, S: System<T> + ?Sized>(sys: &S, x: Vec2<T>, dt: T, sign: T) -> Vec2<T> {
    let half = T::of(0.5);
    let k1 = sys.drift(x) * sign;
    let k2 = sys.drift(x + k1 * (half * dt)) * sign;
    let k3 = sys.drift(x + k2 * (half * dt)) * sign;
    let k4 = sys.drift(x + k3 * dt) * sign;
    let sixth = dt / T::of(6.0);
    x + (k1 + k2 * T::of(2.0) + k3 * T::of(2.0) + k4) * sixth
}

/// Fixed-step trajectory of the deterministic flow. `Backward` integrates the
/// sign-flipped drift (times still run 0 → t_end).
pub fn integrate<T: Real, S: System<T>>(
    sys: &S,
    start: Vec2<T>,
    t_end: T,
    dt: T,
    direction: Direction,
) -> Result<Trajectory<T>> {
    integrate_scheme(sys, start, t_end, dt, direction, Scheme::Rk4)
}

pub fn integrate_scheme<T: Real, S: System<T>>(
    sys: &S,
    start: Vec2<T>,
    t_end: T,
    dt: T,
    direction: Direction,
    scheme: Scheme,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) || !(t_end > T::zero()) {
        return Err(Error::Domain("integrate: dt and t_end must be > 0".into()));
    }
    if !sys.admissible(start) {
        return Err(Error::Domain(format!(
            "integrate: start ({}, {}) is not admissible",
            start.x, start.y
        )));
    }
    let sign = match direction {
        Direction::Forward => T::one(),
        Direction::Backward => -T::one(),
    };
    let n_steps = (t_end / dt).as_f64().round().max(1.0) as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut x = start;
    times.push(T::zero());
    states.push(x);
    for i in 0..n_steps {
        x = match scheme {
            Scheme::Rk4 => rk4_step(sys, x, dt, sign),
            Scheme::Euler => euler_step(sys, x, dt * sign),
        };
        let t = T::of((i + 1) as f64) * dt;
        if !sys.admissible(x) {
            return Err(Error::DomainExit { t: t.as_f64() });
        }
        times.push(t);
        states.push(x);
    }
    Ok(Trajectory { times, states, dt })
}

pub const DEFAULT_MAX_NEWTON_ITERS: usize = 100;
const NEWTON_RESIDUAL_TOL: f64 = 1e-10;

/// Newton iteration on drift = 0 with the analytic Jacobian; max-norm
/// residual below 1e-10 on success.
pub fn find_fixed_point<T: Real, S: System<T>>(sys: &S, guess: Vec2<T>) -> Result<Vec2<T>> {
    find_fixed_point_with(sys, guess, DEFAULT_MAX_NEWTON_ITERS)
}

pub fn find_fixed_point_with<T: Real, S: System<T>>(
    sys: &S,
    guess: Vec2<T>,
    max_iters: usize,
) -> Result<Vec2<T>> {
    let tol = T::of(NEWTON_RESIDUAL_TOL);
    let mut x = guess;
    let mut residual = T::infinity();
    for _ in 0..max_iters {
        let b = sys.drift(x);
        residual = b.x.abs().max(b.y.abs());
        if residual < tol {
            return Ok(x);
        }
        let j = sys.jacobian(x);
        let det = j.det();
        if det.abs() < T::of(1e-300) || !det.is_finite() {
            return Err(Error::SingularJacobian);
        }
        // solve J δ = −b
        let dx = (-(b.x) * j.a22 + j.a12 * b.y) / det;
        let dy = (-(j.a11) * b.y + j.a21 * b.x) / det;
        x = Vec2::new(x.x + dx, x.y + dy);
        if !x.is_finite() {
            return Err(Error::NewtonNoConvergence {
                iters: max_iters,
                residual: residual.as_f64(),
            });
        }
    }
    Err(Error::NewtonNoConvergence {
        iters: max_iters,
        residual: residual.as_f64(),
    })
}

/// Linear stability of a fixed point: all eigenvalue real parts negative.
pub fn is_stable_fixed_point<T: Real, S: System<T>>(sys: &S, x: Vec2<T>) -> bool {
    sys.jacobian(x).max_eigen_real() < T::zero()
}

#[derive(Debug, Clone, Copy)]
pub struct CycleOptions<T> {
    pub dt: T,
    /// Poincaré return-map convergence tolerance (state-space distance).
    pub cycle_tol: T,
    /// Maximum first-vs-last mismatch of the extracted orbit, relative to
    /// its bounding-box diagonal. Crossing interpolation wobbles by
    /// O(dt²·curvature) in absolute terms, so closure is a relative notion.
    pub closure_tol: T,
    /// Return-map values closer than this to w* are a spiral into the fixed
    /// point, not a cycle.
    pub collapse_tol: T,
    pub max_steps: usize,
    pub max_crossings: usize,
    /// Output resolution (points along the cycle, before the closing copy).
    pub n_points: usize,
}

impl<T: Real> Default for CycleOptions<T> {
    fn default() -> Self {
        CycleOptions {
            dt: T::of(1e-3),
            cycle_tol: T::of(1e-6),
            closure_tol: T::of(1e-5),
            collapse_tol: T::of(1.0),
            max_steps: 30_000_000,
            max_crossings: 3000,
            n_points: 1024,
        }
    }
}

/// Locate the requested limit cycle of the carbonate system.
///
/// Stable: forward integration from outside the orbit until the Poincaré
/// return map (section: vertical line through the fixed point, upper-half
/// crossings) settles. Unstable: identical under time reversal, which turns
/// the unstable orbit into an attractor — exact for planar flows.
pub fn find_limit_cycle<T: Real>(
    params: &ModelParams<T>,
    stability: Stability,
) -> Result<LimitCycle<T>> {
    find_limit_cycle_with(params, stability, &CycleOptions::default())
}

pub fn find_limit_cycle_with<T: Real>(
    params: &ModelParams<T>,
    stability: Stability,
    opts: &CycleOptions<T>,
) -> Result<LimitCycle<T>> {
    let sys = CarbonSystem::new(*params)?;
    let fp = find_fixed_point(&sys, sys.fixed_point_guess())?;
    let (start, sign) = match stability {
        // far outside any orbit this model family produces
        Stability::Stable => (Vec2::new(fp.x + T::of(2.0) * params.c_p, fp.y), T::one()),
        // strictly between the fixed point and the stable orbit
        Stability::Unstable => (Vec2::new(fp.x + T::of(0.5), fp.y), -T::one()),
    };
    let (loop_pts, period) = trace_cycle(&sys, start, fp, sign, opts)?;
    let mismatch = loop_pts[0].dist(loop_pts[loop_pts.len() - 1]);
    let (lo, hi) = bounding_box(&loop_pts);
    let scale = lo.dist(hi);
    if mismatch > opts.closure_tol * scale {
        return Err(Error::NoCycle(format!(
            "orbit failed to close: mismatch {mismatch:e} exceeds {:e} of the orbit extent",
            opts.closure_tol
        )));
    }
    let points = resample_closed(&loop_pts, opts.n_points)?;
    Ok(LimitCycle {
        points,
        period,
        stability,
    })
}

/// Drive the Poincaré return map (section: vertical line through the fixed
/// point, upper-half crossings) to convergence, then — continuing along the
/// same trajectory, so both interpolated section points share the same
/// discretization bias — collect one full turn, crossing to crossing.
fn trace_cycle<T: Real>(
    sys: &CarbonSystem<T>,
    start: Vec2<T>,
    fp: Vec2<T>,
    sign: T,
    opts: &CycleOptions<T>,
) -> Result<(Vec<Vec2<T>>, T)> {
    let (cs, ws) = (fp.x, fp.y);
    let half = T::of(0.5);
    let crossing = |a: Vec2<T>, b: Vec2<T>| {
        (a.x - cs) * (b.x - cs) < T::zero() && half * (a.y + b.y) > ws
    };
    let interp_w = |a: Vec2<T>, b: Vec2<T>| {
        let f = (cs - a.x) / (b.x - a.x);
        a.y + f * (b.y - a.y)
    };

    let mut prev = start;
    let mut t = T::zero();
    let mut last: Option<(T, T)> = None;
    let mut crossings = 0usize;
    for _ in 0..opts.max_steps {
        let x = rk4_step(sys, prev, opts.dt, sign);
        t += opts.dt;
        if !sys.admissible(x) {
            return Err(Error::NoCycle(
                "trajectory left the admissible domain during the cycle search".into(),
            ));
        }
        if crossing(prev, x) {
            let wc = interp_w(prev, x);
            let f = (cs - prev.x) / (x.x - prev.x);
            let tc = t - opts.dt + f * opts.dt;
            crossings += 1;
            if let Some((lw, lt)) = last {
                if (wc - lw).abs() < opts.cycle_tol {
                    if (wc - ws).abs() < opts.collapse_tol {
                        return Err(Error::NoCycle(
                            "return map converged to the fixed point".into(),
                        ));
                    }
                    let period = tc - lt;
                    // collection phase: keep integrating this trajectory
                    let mut pts = vec![Vec2::new(cs, wc), x];
                    let mut p = x;
                    for _ in 0..opts.max_steps {
                        let y = rk4_step(sys, p, opts.dt, sign);
                        if !sys.admissible(y) {
                            return Err(Error::NoCycle(
                                "trajectory left the admissible domain while tracing the orbit"
                                    .into(),
                            ));
                        }
                        if crossing(p, y) {
                            pts.push(Vec2::new(cs, interp_w(p, y)));
                            return Ok((pts, period));
                        }
                        pts.push(y);
                        p = y;
                    }
                    return Err(Error::NoCycle(
                        "orbit tracing exhausted the step budget".into(),
                    ));
                }
            }
            if crossings > opts.max_crossings {
                return Err(Error::NoCycle(format!(
                    "return map did not converge within {} crossings",
                    opts.max_crossings
                )));
            }
            last = Some((wc, tc));
        }
        prev = x;
    }
    Err(Error::NoCycle(
        "step budget exhausted before the return map converged".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SingleStablePoint,
    Bistable,
    CycleOnly,
    Undetermined,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SingleStablePoint => "single-stable-point",
            Regime::Bistable => "bistable",
            Regime::CycleOnly => "cycle-only",
            Regime::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegimeReport<T> {
    pub c_x: T,
    pub regime: Regime,
    pub fixed_point: Option<Vec2<T>>,
    pub fixed_point_stable: Option<bool>,
    /// Solver failures are recorded here instead of aborting the scan.
    pub error: Option<String>,
}

fn classify<T: Real>(params: &ModelParams<T>, c_x: T) -> RegimeReport<T> {
    let p = params.with_c_x(c_x);
    let report_err = |e: Error| RegimeReport {
        c_x,
        regime: Regime::Undetermined,
        fixed_point: None,
        fixed_point_stable: None,
        error: Some(e.to_string()),
    };
    let sys = match CarbonSystem::new(p) {
        Ok(s) => s,
        Err(e) => return report_err(e),
    };
    let fp = match find_fixed_point(&sys, sys.fixed_point_guess()) {
        Ok(fp) => fp,
        Err(e) => return report_err(e),
    };
    let stable = is_stable_fixed_point(&sys, fp);
    let (has_cycle, mut error) = match find_limit_cycle(&p, Stability::Stable) {
        Ok(_) => (true, None),
        Err(Error::NoCycle(_)) => (false, None),
        Err(e) => (false, Some(e.to_string())),
    };
    let regime = match (stable, has_cycle) {
        (true, true) => Regime::Bistable,
        (true, false) => Regime::SingleStablePoint,
        (false, true) => Regime::CycleOnly,
        (false, false) => {
            // a destabilized focus must shed a stable orbit; record the anomaly
            if error.is_none() {
                error = Some("unstable fixed point but no stable cycle found".into());
            }
            Regime::CycleOnly
        }
    };
    RegimeReport {
        c_x,
        regime,
        fixed_point: Some(fp),
        fixed_point_stable: Some(stable),
        error,
    }
}

/// One report per requested c_x, computed on parallel workers, ordered as
/// given. Deterministic: repeated runs produce identical reports.
pub fn scan_regimes<T: Real>(c_x_values: &[T], params: &ModelParams<T>) -> Vec<RegimeReport<T>> {
    c_x_values
        .par_iter()
        .map(|&cx| classify(params, cx))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds<T> {
    /// c_x at which the stable cycle is born (lower regime boundary).
    pub lower: Option<T>,
    /// c_x at which the fixed point destabilizes (upper regime boundary).
    pub upper: Option<T>,
}

pub const THRESHOLD_BISECTION_TOL: f64 = 0.01;

/// Estimate both regime boundaries inside `[lo, hi]` by bisection on the
/// regime change, to `THRESHOLD_BISECTION_TOL` in c_x.
pub fn find_thresholds<T: Real>(
    params: &ModelParams<T>,
    lo: T,
    hi: T,
    grid_step: T,
) -> Result<Thresholds<T>> {
    let tol = T::of(THRESHOLD_BISECTION_TOL);
    let has_cycle = |cx: T| -> Result<bool> {
        let p = params.with_c_x(cx);
        match find_limit_cycle(&p, Stability::Stable) {
            Ok(_) => Ok(true),
            Err(Error::NoCycle(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let fp_stable = |cx: T| -> Result<bool> {
        let p = params.with_c_x(cx);
        let sys = CarbonSystem::new(p)?;
        let fp = find_fixed_point(&sys, sys.fixed_point_guess())?;
        Ok(is_stable_fixed_point(&sys, fp))
    };

    // coarse grid, then bisect the first sign change of each indicator
    let mut grid = Vec::new();
    let mut cx = lo;
    while cx <= hi + grid_step * T::of(0.5) {
        grid.push(cx);
        cx += grid_step;
    }
    let flags: Vec<(bool, bool)> = grid
        .par_iter()
        .map(|&g| -> Result<(bool, bool)> { Ok((has_cycle(g)?, fp_stable(g)?)) })
        .collect::<Result<_>>()?;

    let bisect = |mut a: T, mut b: T, f: &dyn Fn(T) -> Result<bool>| -> Result<T> {
        let fa = f(a)?;
        while b - a > tol {
            let mid = (a + b) * T::of(0.5);
            if f(mid)? == fa {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((a + b) * T::of(0.5))
    };

    let mut lower = None;
    let mut upper = None;
    for i in 0..grid.len().saturating_sub(1) {
        if lower.is_none() && flags[i].0 != flags[i + 1].0 {
            lower = Some(bisect(grid[i], grid[i + 1], &has_cycle)?);
        }
        if upper.is_none() && flags[i].1 != flags[i + 1].1 {
            upper = Some(bisect(grid[i], grid[i + 1], &fp_stable)?);
        }
    }
    Ok(Thresholds { lower, upper })
}
