//! Geometric minimum action method on the path space between two states.
//!
//! The path functional is evaluated in the metric A = (ηηᵀ)⁻¹ of the noise,
//! discretized on N nodes equidistant in normalized arc length α ∈ [0, 1].
//! Descent is semi-implicit: the stiff second-derivative term λ²φ'' is
//! treated implicitly (tridiagonal solve per coordinate), everything else
//! explicitly. The pseudo-time step is adaptive, halve-only: a step is kept
//! only if the reparameterized candidate does not raise the action beyond a
//! discretization-level slack.

use crate::error::{Error, Result};
use crate::num::{solve_tridiagonal, Mat2, Real, Vec2};
use crate::path::{self, DiscretePath};
use crate::system::System;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Quadrature for the action integral. Midpoint is parameterization-free
/// (segment differences absorb the measure); trapezoid uses the nodal
/// finite-difference tangents and is kept as an independent cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Midpoint,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Real")
)]
pub struct GmamConfig<T> {
    /// Nodes along the discrete path (≥ 8).
    pub n_points: usize,
    pub max_outer_iters: usize,
    /// Initial pseudo-time step; adapted downward only.
    pub step_tau: T,
    /// Sup-norm displacement per iteration below which the path is declared
    /// converged.
    pub conv_tol: T,
    pub quadrature: Quadrature,
}

impl<T: Real> Default for GmamConfig<T> {
    fn default() -> Self {
        GmamConfig {
            n_points: 3000,
            max_outer_iters: 20_000,
            step_tau: T::of(1e-3),
            conv_tol: T::of(1e-8),
            quadrature: Quadrature::Midpoint,
        }
    }
}

impl<T: Real> GmamConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 8 {
            return Err(Error::Domain(format!(
                "gmam.n_points must be at least 8, got {}",
                self.n_points
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Domain("gmam.max_outer_iters must be positive".into()));
        }
        if !(self.step_tau > T::zero()) || !self.step_tau.is_finite() {
            return Err(Error::Domain(format!(
                "gmam.step_tau must be a positive finite number, got {}",
                self.step_tau
            )));
        }
        if !(self.conv_tol > T::zero()) || !self.conv_tol.is_finite() {
            return Err(Error::Domain(format!(
                "gmam.conv_tol must be a positive finite number, got {}",
                self.conv_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    /// An accepted step moved the path by less than `conv_tol`.
    Converged,
    /// No step was accepted, but the best rejected candidate differed from
    /// the current path by less than `conv_tol`: the path is a stationary
    /// point bouncing against quadrature noise.
    Stationary,
    /// Step floor reached with a materially different rejected candidate.
    Stalled,
    /// No admissible candidate at any step size (path collapsed or left the
    /// domain).
    Degenerate,
    MaxIters,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Stationary => "stationary",
            StopReason::Stalled => "stalled",
            StopReason::Degenerate => "degenerate",
            StopReason::MaxIters => "max-iters",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransitionResult<T> {
    pub path: DiscretePath<T>,
    pub action: T,
    /// Which cycle candidate endpoint produced this path (multi-endpoint
    /// searches only).
    pub endpoint_index: Option<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub reason: StopReason,
}

const ATTEMPTS_PER_ITER: usize = 60;
const TAU_FLOOR: f64 = 1e-8;
/// Reparameterization perturbs the action by O(h²·S); acceptance must allow
/// that much or descent ratchets. Floor covers the S ≈ 0 endgame.
const SLACK_ABS: f64 = 1e-12;
const SLACK_COEFF: f64 = 4.0;
/// Keeps λ = q/p finite on a stationary node.
const P_GUARD: f64 = 1e-300;
/// Keeps the 1/q terms of the functional gradient finite near equilibria.
const Q_GUARD: f64 = 1e-14;

/// Geometric action of a discrete path under the system's noise metric.
pub fn geometric_action<T: Real, S: System<T>>(
    sys: &S,
    points: &[Vec2<T>],
    quadrature: Quadrature,
) -> Result<T> {
    if points.len() < 2 {
        return Err(Error::DegeneratePath);
    }
    match quadrature {
        Quadrature::Midpoint => {
            let half = T::of(0.5);
            let mut s = T::zero();
            for w in points.windows(2) {
                let xm = (w[0] + w[1]) * half;
                if !sys.admissible(xm) {
                    return Err(Error::MetricSingular { c: xm.x.as_f64() });
                }
                let a = sys.inverse_metric_diag(xm);
                let b = sys.drift(xm);
                let d = w[1] - w[0];
                let dn = d.dot(a.mul_elem(d)).sqrt();
                let bn = b.dot(a.mul_elem(b)).sqrt();
                // Cauchy–Schwarz floor: the integrand is nonnegative in
                // exact arithmetic
                s += (dn * bn - d.dot(a.mul_elem(b))).max(T::zero());
            }
            Ok(s)
        }
        Quadrature::Trapezoid => {
            let n = points.len();
            let h = T::one() / T::of((n - 1) as f64);
            let mut s = T::zero();
            for i in 0..n {
                let x = points[i];
                if !sys.admissible(x) {
                    return Err(Error::MetricSingular { c: x.x.as_f64() });
                }
                let dp = nodal_tangent(points, i, h);
                let a = sys.inverse_metric_diag(x);
                let b = sys.drift(x);
                let pn = dp.dot(a.mul_elem(dp)).sqrt();
                let qn = b.dot(a.mul_elem(b)).sqrt();
                let term = (pn * qn - dp.dot(a.mul_elem(b))).max(T::zero());
                let w = if i == 0 || i == n - 1 {
                    T::of(0.5)
                } else {
                    T::one()
                };
                s += w * term * h;
            }
            Ok(s)
        }
    }
}

#[inline]
fn nodal_tangent<T: Real>(points: &[Vec2<T>], i: usize, h: T) -> Vec2<T> {
    let n = points.len();
    if i == 0 {
        (points[1] - points[0]) / h
    } else if i == n - 1 {
        (points[n - 1] - points[n - 2]) / h
    } else {
        (points[i + 1] - points[i - 1]) / (T::of(2.0) * h)
    }
}

/// Per-node quantities of the current path that do not depend on the step
/// size: λ and the explicit descent term E.
struct DescentTerms<T> {
    lam: Vec<T>,
    e: Vec<Vec2<T>>,
}

fn compute_descent_terms<T: Real, S: System<T>>(
    sys: &S,
    phi: &[Vec2<T>],
) -> Result<DescentTerms<T>> {
    let n = phi.len();
    let h = T::one() / T::of((n - 1) as f64);
    let p_guard = T::of(P_GUARD);
    let q_guard = T::of(Q_GUARD);
    let two = T::of(2.0);

    let mut phip = Vec::with_capacity(n);
    let mut bs = Vec::with_capacity(n);
    let mut amet = Vec::with_capacity(n);
    let mut dmet = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n);
    let mut pn = Vec::with_capacity(n);
    let mut qn = Vec::with_capacity(n);
    let mut qs = Vec::with_capacity(n);
    let mut lam = Vec::with_capacity(n);

    for i in 0..n {
        let x = phi[i];
        if !sys.admissible(x) {
            return Err(Error::MetricSingular { c: x.x.as_f64() });
        }
        let dp = nodal_tangent(phi, i, h);
        let b = sys.drift(x);
        let a = sys.inverse_metric_diag(x);
        let da = sys.inverse_metric_grad(x);
        let j = sys.jacobian(x);
        let p = dp.dot(a.mul_elem(dp)).sqrt() + p_guard;
        let q = b.dot(a.mul_elem(b)).sqrt();
        phip.push(dp);
        bs.push(b);
        amet.push(a);
        dmet.push(da);
        jac.push(j);
        pn.push(p);
        qn.push(q);
        qs.push(q.max(q_guard));
        lam.push(q / p);
    }

    let mut e = vec![Vec2::new(T::zero(), T::zero()); n];
    for i in 1..n - 1 {
        let lamp = (lam[i + 1] - lam[i - 1]) / (two * h);
        let dp = phip[i];
        let b = bs[i];
        let a = amet[i];
        let [da0, da1] = dmet[i];
        let j: Mat2<T> = jac[i];
        let (p, q, qsi, l) = (pn[i], qn[i], qs[i], lam[i]);

        // g(u, v)_k = uᵀ (∂_k A) v for the diagonal metric
        let uv = |u: Vec2<T>, v: Vec2<T>| -> Vec2<T> {
            let w = u.mul_elem(v);
            Vec2::new(da0.dot(w), da1.dot(w))
        };
        let g_pp = uv(dp, dp);
        let g_bb = uv(b, b);
        let g_pb = uv(dp, b);
        let jt_ab = j.t_mul_vec(a.mul_elem(b));
        let jt_ap = j.t_mul_vec(a.mul_elem(dp));

        // functional gradient ∂ℓ/∂φ
        let dl = g_pp * (q / (two * p)) + g_bb * (p / (two * qsi)) + jt_ab * (p / qsi)
            - g_pb
            - jt_ap;

        // A' along the path: (A')_j = Σ_k (∂_k A)_j φ'_k
        let aprime = Vec2::new(
            da0.x * dp.x + da1.x * dp.y,
            da0.y * dp.x + da1.y * dp.y,
        );

        let ll = l * l;
        // endpoints carry no explicit term (Dirichlet rows overwrite them)
        e[i] = dp * (l * lamp) + aprime.mul_elem(dp).div_elem(a) * ll
            - aprime.mul_elem(b).div_elem(a) * l
            - j.mul_vec(dp) * l
            - dl.div_elem(a) * l;
    }
    Ok(DescentTerms { lam, e })
}

/// Scratch buffers for the tridiagonal solves, reused across iterations.
struct TridiagWork<T> {
    sub: Vec<T>,
    diag: Vec<T>,
    sup: Vec<T>,
    rhs: Vec<T>,
    scratch: Vec<T>,
    out: Vec<T>,
}

impl<T: Real> TridiagWork<T> {
    fn new(n: usize) -> Self {
        TridiagWork {
            sub: vec![T::zero(); n],
            diag: vec![T::zero(); n],
            sup: vec![T::zero(); n],
            rhs: vec![T::zero(); n],
            scratch: vec![T::zero(); n],
            out: vec![T::zero(); n],
        }
    }
}

/// Semi-implicit update at pseudo-time step `tau`:
/// (1 + 2rᵢ)φᵢ − rᵢ(φᵢ₋₁ + φᵢ₊₁) = φ_old,ᵢ + τ·Eᵢ with rᵢ = τλᵢ²/h² and
/// Dirichlet endpoint rows. Returns None if the linear solve breaks down.
fn tridiag_step<T: Real>(
    phi: &[Vec2<T>],
    terms: &DescentTerms<T>,
    tau: T,
    work: &mut TridiagWork<T>,
) -> Option<Vec<Vec2<T>>> {
    let n = phi.len();
    let h = T::one() / T::of((n - 1) as f64);
    let hh = h * h;
    let mut proposal = vec![Vec2::new(T::zero(), T::zero()); n];

    for coord in 0..2 {
        let get = |v: Vec2<T>| if coord == 0 { v.x } else { v.y };
        work.diag[0] = T::one();
        work.sup[0] = T::zero();
        work.sub[0] = T::zero();
        work.rhs[0] = get(phi[0]);
        for i in 1..n - 1 {
            let r = tau * terms.lam[i] * terms.lam[i] / hh;
            work.sub[i] = -r;
            work.diag[i] = T::one() + T::of(2.0) * r;
            work.sup[i] = -r;
            work.rhs[i] = get(phi[i]) + tau * get(terms.e[i]);
        }
        work.sub[n - 1] = T::zero();
        work.sup[n - 1] = T::zero();
        work.diag[n - 1] = T::one();
        work.rhs[n - 1] = get(phi[n - 1]);
        if !solve_tridiagonal(
            &work.sub,
            &work.diag,
            &work.sup,
            &work.rhs,
            &mut work.scratch,
            &mut work.out,
        ) {
            return None;
        }
        for i in 0..n {
            if coord == 0 {
                proposal[i].x = work.out[i];
            } else {
                proposal[i].y = work.out[i];
            }
        }
    }
    Some(proposal)
}

fn sup_displacement<T: Real>(a: &[Vec2<T>], b: &[Vec2<T>]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(*y))
        .fold(T::zero(), T::max)
}

/// One descent step (tridiagonal update + reparameterization) at the
/// configured step size, without acceptance control. Used to probe
/// stationarity of a path.
pub fn relax_step<T: Real, S: System<T>>(
    sys: &S,
    points: &[Vec2<T>],
    config: &GmamConfig<T>,
) -> Result<Vec<Vec2<T>>> {
    let terms = compute_descent_terms(sys, points)?;
    let mut work = TridiagWork::new(points.len());
    let proposal = tridiag_step(points, &terms, config.step_tau, &mut work)
        .ok_or(Error::LinearSolve)?;
    if !proposal.iter().all(|x| sys.admissible(*x)) {
        return Err(Error::Domain(
            "relax step left the admissible domain".into(),
        ));
    }
    path::reparameterize(&proposal)
}

/// Minimize the geometric action between two states, starting from the
/// straight line.
pub fn solve<T: Real, S: System<T>>(
    sys: &S,
    from: Vec2<T>,
    to: Vec2<T>,
    config: &GmamConfig<T>,
) -> Result<TransitionResult<T>> {
    config.validate()?;
    let init = DiscretePath::straight_line(from, to, config.n_points);
    solve_with_init(sys, &init.points, config)
}

/// Minimize the geometric action starting from a given path. The initial
/// path is resampled to `n_points` equidistant nodes; its endpoints are
/// preserved exactly and held fixed throughout.
pub fn solve_with_init<T: Real, S: System<T>>(
    sys: &S,
    init: &[Vec2<T>],
    config: &GmamConfig<T>,
) -> Result<TransitionResult<T>> {
    config.validate()?;
    let n = config.n_points;
    let mut phi = path::reparameterize(&path::resample(init, n)?)?;
    let mut action = geometric_action(sys, &phi, config.quadrature)?;
    let tau_floor = T::of(TAU_FLOOR);
    let slack_abs = T::of(SLACK_ABS);
    let nn = T::of(((n - 1) * (n - 1)) as f64);
    let mut tau = config.step_tau;
    let mut work = TridiagWork::new(n);

    for iter in 0..config.max_outer_iters {
        let terms = compute_descent_terms(sys, &phi)?;
        let mut accepted = false;
        let mut last_cand: Option<(Vec<Vec2<T>>, T)> = None;

        for _ in 0..ATTEMPTS_PER_ITER {
            if let Some(proposal) = tridiag_step(&phi, &terms, tau, &mut work) {
                if proposal.iter().all(|x| sys.admissible(*x)) {
                    match path::reparameterize(&proposal) {
                        Ok(cand) => {
                            let s_new = geometric_action(sys, &cand, config.quadrature)?;
                            let slack = slack_abs.max(T::of(SLACK_COEFF) * action.abs() / nn);
                            let ok = s_new.is_finite() && s_new <= action + slack;
                            last_cand = Some((cand, s_new));
                            if ok {
                                accepted = true;
                                break;
                            }
                        }
                        Err(Error::DegeneratePath) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            if tau <= tau_floor {
                break;
            }
            tau = (tau * T::of(0.5)).max(tau_floor);
        }

        if accepted {
            let (cand, s_new) = last_cand.take().expect("accepted implies candidate");
            let disp = sup_displacement(&phi, &cand);
            phi = cand;
            action = s_new;
            if disp < config.conv_tol {
                return Ok(finish(phi, action, true, iter + 1, StopReason::Converged));
            }
        } else {
            return Ok(match last_cand {
                None => finish(phi, action, false, iter + 1, StopReason::Degenerate),
                Some((cand, _)) => {
                    let disp = sup_displacement(&phi, &cand);
                    if disp < config.conv_tol {
                        finish(phi, action, true, iter + 1, StopReason::Stationary)
                    } else {
                        finish(phi, action, false, iter + 1, StopReason::Stalled)
                    }
                }
            });
        }
    }
    Ok(finish(
        phi,
        action,
        false,
        config.max_outer_iters,
        StopReason::MaxIters,
    ))
}

fn finish<T: Real>(
    points: Vec<Vec2<T>>,
    action: T,
    converged: bool,
    iterations: usize,
    reason: StopReason,
) -> TransitionResult<T> {
    TransitionResult {
        path: DiscretePath {
            points,
            action: Some(action),
        },
        action,
        endpoint_index: None,
        converged,
        iterations,
        reason,
    }
}

pub const CYCLE_CANDIDATES: usize = 36;

/// Arc-length fraction of a candidate endpoint. Base candidates 0..36 sit at
/// i/36 around the cycle; the two refinement candidates 36 and 37 straddle
/// the best base candidate.
fn candidate_fraction<T: Real>(index: usize, best_base: usize) -> T {
    let m = CYCLE_CANDIDATES as f64;
    let f = match index {
        i if i < CYCLE_CANDIDATES => i as f64 / m,
        i if i == CYCLE_CANDIDATES => (best_base as f64 - 0.5) / m,
        _ => (best_base as f64 + 0.5) / m,
    };
    T::of(f.rem_euclid(1.0))
}

/// Quasi-potential from a fixed point to a limit cycle: the minimum of the
/// point-to-point action over endpoints on the cycle. 36 equidistant
/// candidates are relaxed in parallel, then the arc neighbourhood of the
/// winner is refined with two more. Deterministic: ties break on the lowest
/// candidate index.
pub fn quasipotential_to_cycle<T: Real, S: System<T>>(
    sys: &S,
    from: Vec2<T>,
    cycle: &crate::dynamics::LimitCycle<T>,
    config: &GmamConfig<T>,
) -> Result<TransitionResult<T>> {
    config.validate()?;
    let total = cycle.arc_length();
    let solve_at = |idx: usize, best: usize| -> (usize, Result<TransitionResult<T>>) {
        let frac: T = candidate_fraction(idx, best);
        let endpoint = cycle.point_at_arc(frac * total);
        (idx, solve(sys, from, endpoint, config))
    };

    let base: Vec<(usize, Result<TransitionResult<T>>)> = (0..CYCLE_CANDIDATES)
        .into_par_iter()
        .map(|i| solve_at(i, 0))
        .collect();
    let best_base = pick_best(&base);
    let (best_idx, _) = match best_base {
        Some(b) => b,
        None => {
            let msgs = base
                .into_iter()
                .map(|(i, r)| format!("endpoint {i}: {}", describe(&r)))
                .collect();
            return Err(Error::AllCandidatesFailed(msgs));
        }
    };

    let refined: Vec<(usize, Result<TransitionResult<T>>)> =
        [CYCLE_CANDIDATES, CYCLE_CANDIDATES + 1]
            .into_par_iter()
            .map(|i| solve_at(i, best_idx))
            .collect();

    let mut all = base;
    all.extend(refined);
    let (winner_idx, winner) = pick_best(&all).expect("base winner still present");
    let mut result = winner.clone();
    result.endpoint_index = Some(winner_idx);
    Ok(result)
}

/// Warm restart: reuse a previous transition path, re-pinned to the new
/// fixed point and to the nearest point of the new cycle. Keeps the previous
/// endpoint index for reporting.
pub fn quasipotential_to_cycle_warm<T: Real, S: System<T>>(
    sys: &S,
    from: Vec2<T>,
    cycle: &crate::dynamics::LimitCycle<T>,
    prev: &TransitionResult<T>,
    config: &GmamConfig<T>,
) -> Result<TransitionResult<T>> {
    config.validate()?;
    let mut init = prev.path.points.clone();
    if init.len() < 2 {
        return Err(Error::DegeneratePath);
    }
    let last = init[init.len() - 1];
    let n = init.len();
    init[0] = from;
    init[n - 1] = nearest_point_on_polyline(last, &cycle.points);
    let mut result = solve_with_init(sys, &init, config)?;
    result.endpoint_index = prev.endpoint_index;
    Ok(result)
}

/// Closest point of a polyline (orthogonal projection onto its segments).
pub fn nearest_point_on_polyline<T: Real>(pt: Vec2<T>, pts: &[Vec2<T>]) -> Vec2<T> {
    let mut best = pts[0];
    let mut best_d = T::infinity();
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        let dd = d.dot(d);
        let t = if dd > T::zero() {
            ((pt - w[0]).dot(d) / dd).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let cand = w[0] + d * t;
        let dist = pt.dist(cand);
        if dist < best_d {
            best_d = dist;
            best = cand;
        }
    }
    best
}

/// Lowest finite action wins; converged results outrank unconverged ones;
/// remaining ties break on candidate index.
fn pick_best<T: Real>(
    results: &[(usize, Result<TransitionResult<T>>)],
) -> Option<(usize, &TransitionResult<T>)> {
    let mut best: Option<(usize, &TransitionResult<T>)> = None;
    for (idx, r) in results {
        if let Ok(res) = r {
            if !res.action.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, b)) => {
                    (res.converged, b.converged) == (true, false)
                        || (res.converged == b.converged
                            && (res.action < b.action
                                || (res.action == b.action && *idx < bi)))
                }
            };
            if better {
                best = Some((*idx, res));
            }
        }
    }
    best
}

fn describe<T: Real>(r: &Result<TransitionResult<T>>) -> String {
    match r {
        Ok(res) => format!("finished without a usable action ({})", res.reason.as_str()),
        Err(e) => e.to_string(),
    }
}
