//! Euler–Maruyama simulation of the noisy system and extraction of
//! noise-induced transition statistics.
//!
//! Noise is generated counter-mode (Philox keyed by seed, counter =
//! (step, path)), so every (seed, path, step) triple maps to the same
//! Gaussian pair regardless of thread count or evaluation order.

use crate::dynamics::{distance_to_polyline, euler_step, LimitCycle};
use crate::error::{Error, Result};
use crate::num::{Real, Vec2};
use crate::rng::normal_pair;
use crate::system::System;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    default,
    bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Real")
)]
pub struct SimConfig<T> {
    /// Noise amplitude ε multiplying the diffusion matrix.
    pub epsilon: T,
    pub dt: T,
    pub t_max: T,
    pub seed: u64,
    pub n_paths: usize,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        SimConfig {
            epsilon: T::of(0.01),
            dt: T::of(1e-4),
            t_max: T::of(200.0),
            seed: 0,
            n_paths: 100,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::Domain(format!(
                "sim.epsilon must be a finite number ≥ 0, got {}",
                self.epsilon
            )));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::Domain(format!(
                "sim.dt must be a positive finite number, got {}",
                self.dt
            )));
        }
        if !(self.t_max > T::zero()) || !self.t_max.is_finite() {
            return Err(Error::Domain(format!(
                "sim.t_max must be a positive finite number, got {}",
                self.t_max
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Domain("sim.n_paths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec2<T>>,
    /// Steps on which the state had to be clamped back into the domain.
    pub clamped: usize,
    /// True if the integration blew up; the trajectory is truncated there.
    pub nonfinite: bool,
    pub stride: usize,
    pub dt: T,
}

impl<T: Real> SimTrajectory<T> {
    pub fn sample_dt(&self) -> T {
        self.dt * T::of(self.stride as f64)
    }
}

/// Simulate one path of dX = b dt + ε η dW, sampling every `stride` steps.
/// The drift half-step is the exact deterministic Euler update, so ε = 0
/// reproduces the Euler flow bit for bit. Diffusion is evaluated at the
/// pre-step state.
pub fn euler_maruyama<T: Real, S: System<T>>(
    sys: &S,
    start: Vec2<T>,
    cfg: &SimConfig<T>,
    path_id: u64,
    stride: usize,
) -> SimTrajectory<T> {
    let stride = stride.max(1);
    let n_steps = (cfg.t_max / cfg.dt).as_f64().round().max(1.0) as usize;
    let sqrt_dt = cfg.dt.sqrt();
    let noisy = cfg.epsilon > T::zero();
    let mut times = Vec::with_capacity(n_steps / stride + 2);
    let mut states = Vec::with_capacity(n_steps / stride + 2);
    let mut x = start;
    let mut clamped = 0usize;
    times.push(T::zero());
    states.push(x);
    for step in 0..n_steps {
        let eta = sys.diffusion_diag(x);
        let mut next = euler_step(sys, x, cfg.dt);
        if noisy {
            let (z1, z2) = normal_pair(cfg.seed, path_id, step as u64);
            next.x += cfg.epsilon * eta.x * sqrt_dt * T::of(z1);
            next.y += cfg.epsilon * eta.y * sqrt_dt * T::of(z2);
        }
        let (cl, was_clamped) = sys.clamp(next);
        if was_clamped {
            clamped += 1;
        }
        x = cl;
        if !x.is_finite() {
            return SimTrajectory {
                times,
                states,
                clamped,
                nonfinite: true,
                stride,
                dt: cfg.dt,
            };
        }
        if (step + 1) % stride == 0 {
            times.push(T::of((step + 1) as f64) * cfg.dt);
            states.push(x);
        }
    }
    SimTrajectory {
        times,
        states,
        clamped,
        nonfinite: false,
        stride,
        dt: cfg.dt,
    }
}

/// All paths of one ensemble, in path-id order (parallel inside).
pub fn run_paths<T: Real, S: System<T>>(
    sys: &S,
    start: Vec2<T>,
    cfg: &SimConfig<T>,
    stride: usize,
) -> Vec<SimTrajectory<T>> {
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|pid| euler_maruyama(sys, start, cfg, pid, stride))
        .collect()
}

/// Fraction of the stable cycle's bounding-box diagonal used as capture tube
/// width (and as the histogram support margin).
pub const TUBE_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    /// Last sample still inside the unstable cycle before capture.
    pub exit_index: usize,
    /// First sample of a full-period dwell inside the capture tube.
    pub arrival_index: usize,
}

/// Find the first escape fixed-point basin → stable cycle in a trajectory.
///
/// Arrival requires the path to stay within `tube_w` of the cycle for one
/// full period (a single grazing pass does not count); the segment starts at
/// the last sample still inside the unstable cycle, so it covers exactly the
/// crossing of the deterministic watershed.
pub fn detect_transition<T: Real>(
    traj: &SimTrajectory<T>,
    unstable: &LimitCycle<T>,
    stable: &LimitCycle<T>,
) -> Option<Transition> {
    let tube_w = T::of(TUBE_FRACTION) * stable.bbox_diagonal();
    let n = traj.states.len();
    if n < 2 {
        return None;
    }
    let dist: Vec<T> = traj
        .states
        .iter()
        .map(|&s| distance_to_polyline(s, &stable.points))
        .collect();

    let mut a = 0usize;
    let arrival = loop {
        if a >= n {
            return None;
        }
        if dist[a] < tube_w {
            // dwell: every sample within one period must stay in the tube
            let t_end = traj.times[a] + stable.period;
            if *traj.times.last().unwrap() < t_end {
                return None; // not enough data to certify capture
            }
            let mut failed_at = None;
            let mut j = a;
            while j < n && traj.times[j] <= t_end {
                if dist[j] >= tube_w {
                    failed_at = Some(j);
                    break;
                }
                j += 1;
            }
            match failed_at {
                None => break a,
                Some(j) => a = j + 1,
            }
        } else {
            a += 1;
        }
    };

    let exit = (0..arrival)
        .rev()
        .find(|&i| unstable.contains(traj.states[i]))?;
    Some(Transition {
        exit_index: exit,
        arrival_index: arrival,
    })
}

#[derive(Debug, Clone)]
pub struct BundleConfig<T> {
    pub base: SimConfig<T>,
    /// Multiplier of the ε ladder climbed when transitions are too rare.
    pub ladder_factor: T,
    pub max_rungs: usize,
    pub min_transitions: usize,
}

impl<T: Real> Default for BundleConfig<T> {
    fn default() -> Self {
        BundleConfig {
            base: SimConfig::default(),
            ladder_factor: T::of(1.5),
            max_rungs: 8,
            min_transitions: 20,
        }
    }
}

/// Per-path bookkeeping of the rung that was kept.
#[derive(Debug, Clone, Copy)]
pub struct PathOutcome {
    pub path_id: u64,
    pub clamped: usize,
    pub nonfinite: bool,
    pub transition: Option<Transition>,
}

#[derive(Debug, Clone)]
pub struct TransitionBundle<T> {
    pub epsilon_used: T,
    /// Sampled transition segments, exit → arrival, one per transitioning
    /// path, in path-id order.
    pub segments: Vec<Vec<Vec2<T>>>,
    /// One entry per ensemble member of the final rung, in path-id order.
    /// Sample times reconstruct as index · sample_dt.
    pub outcomes: Vec<PathOutcome>,
    pub sample_dt: T,
    /// (ε, transition count) for every ladder rung that was run.
    pub rungs: Vec<(T, usize)>,
    /// Set when even the top rung produced fewer than `min_transitions`.
    pub insufficient: bool,
}

/// Harvest transition segments, climbing the ε ladder (same seed and path
/// ids on every rung) until enough paths cross.
pub fn transition_bundle<T: Real, S: System<T>>(
    sys: &S,
    start: Vec2<T>,
    unstable: &LimitCycle<T>,
    stable: &LimitCycle<T>,
    cfg: &BundleConfig<T>,
    stride: usize,
) -> Result<TransitionBundle<T>> {
    cfg.base.validate()?;
    if !(cfg.ladder_factor > T::one()) {
        return Err(Error::Domain("bundle ladder factor must exceed 1".into()));
    }
    if cfg.max_rungs == 0 {
        return Err(Error::Domain("bundle needs at least one rung".into()));
    }
    let mut rungs = Vec::new();
    let mut last: Option<TransitionBundle<T>> = None;
    let mut eps = cfg.base.epsilon;
    for _ in 0..cfg.max_rungs {
        let mut rung_cfg = cfg.base;
        rung_cfg.epsilon = eps;
        let trajs = run_paths(sys, start, &rung_cfg, stride);
        let mut segments = Vec::new();
        let mut outcomes = Vec::with_capacity(trajs.len());
        for (pid, t) in trajs.iter().enumerate() {
            let transition = detect_transition(t, unstable, stable);
            if let Some(tr) = transition {
                segments.push(t.states[tr.exit_index..=tr.arrival_index].to_vec());
            }
            outcomes.push(PathOutcome {
                path_id: pid as u64,
                clamped: t.clamped,
                nonfinite: t.nonfinite,
                transition,
            });
        }
        let sample_dt = trajs.first().map_or(rung_cfg.dt, |t| t.sample_dt());
        rungs.push((eps, segments.len()));
        let enough = segments.len() >= cfg.min_transitions;
        last = Some(TransitionBundle {
            epsilon_used: eps,
            segments,
            outcomes,
            sample_dt,
            rungs: rungs.clone(),
            insufficient: !enough,
        });
        if enough {
            break;
        }
        eps *= cfg.ladder_factor;
    }
    Ok(last.expect("at least one rung runs"))
}

#[derive(Debug, Clone)]
pub struct Histogram<T> {
    pub nx: usize,
    pub ny: usize,
    pub lo: Vec2<T>,
    pub hi: Vec2<T>,
    /// Row-major (iy * nx + ix), normalized to total mass 1.
    pub mass: Vec<T>,
}

impl<T: Real> Histogram<T> {
    pub fn cell_of(&self, p: Vec2<T>) -> Option<usize> {
        let fx = (p.x - self.lo.x) / (self.hi.x - self.lo.x);
        let fy = (p.y - self.lo.y) / (self.hi.y - self.lo.y);
        if !(fx >= T::zero()) || fx > T::one() || !(fy >= T::zero()) || fy > T::one() {
            return None;
        }
        let ix = (fx.as_f64() * self.nx as f64) as usize;
        let iy = (fy.as_f64() * self.ny as f64) as usize;
        Some(iy.min(self.ny - 1) * self.nx + ix.min(self.nx - 1))
    }

    pub fn mass_at(&self, p: Vec2<T>) -> T {
        self.cell_of(p).map_or(T::zero(), |c| self.mass[c])
    }
}

/// Occupancy histogram of the sampled segments. The support is the joint
/// bounding box of the segments and `also_cover` (so a reference path can be
/// compared cell-by-cell), padded by a relative hair so boundary points bin.
pub fn occupancy_histogram<T: Real>(
    segments: &[Vec<Vec2<T>>],
    also_cover: &[Vec2<T>],
    nx: usize,
    ny: usize,
) -> Result<Histogram<T>> {
    let mut pts = segments.iter().flatten().copied();
    let first = pts
        .next()
        .ok_or_else(|| Error::Domain("occupancy histogram of an empty bundle".into()))?;
    let mut lo = first;
    let mut hi = first;
    for p in pts.chain(also_cover.iter().copied()) {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let pad_x = (hi.x - lo.x).max(T::of(1e-12)) * T::of(1e-9);
    let pad_y = (hi.y - lo.y).max(T::of(1e-12)) * T::of(1e-9);
    lo = Vec2::new(lo.x - pad_x, lo.y - pad_y);
    hi = Vec2::new(hi.x + pad_x, hi.y + pad_y);

    let mut hist = Histogram {
        nx,
        ny,
        lo,
        hi,
        mass: vec![T::zero(); nx * ny],
    };
    let mut total = 0usize;
    for seg in segments {
        for &p in seg {
            let cell = hist
                .cell_of(p)
                .expect("support covers all segment points");
            hist.mass[cell] += T::one();
            total += 1;
        }
    }
    let t = T::of(total as f64);
    for m in &mut hist.mass {
        *m /= t;
    }
    Ok(hist)
}

/// Median of a slice (average of the middle pair for even lengths).
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median over finite values"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::of(0.5)
    })
}

/// Fraction of path nodes lying in cells at least as occupied as the median
/// positive cell of the histogram.
pub fn concordance<T: Real>(hist: &Histogram<T>, path: &[Vec2<T>]) -> T {
    let positive: Vec<T> = hist
        .mass
        .iter()
        .copied()
        .filter(|&m| m > T::zero())
        .collect();
    let med = match median(&positive) {
        Some(m) => m,
        None => return T::zero(),
    };
    if path.is_empty() {
        return T::zero();
    }
    let hits = path.iter().filter(|&&p| hist.mass_at(p) >= med).count();
    T::of(hits as f64) / T::of(path.len() as f64)
}

/// Prefix of `path` up to (and including) its first node within `tube_w` of
/// the cycle; the whole path if it never gets that close. Transition
/// segments end at tube capture, so comparisons against them must drop the
/// on-cycle tail of a reference path.
pub fn truncate_at_tube<T: Real>(
    path: &[Vec2<T>],
    cycle: &LimitCycle<T>,
    tube_w: T,
) -> Vec<Vec2<T>> {
    for (i, &p) in path.iter().enumerate() {
        if distance_to_polyline(p, &cycle.points) < tube_w {
            return path[..=i].to_vec();
        }
    }
    path.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carbon::{CarbonSystem, ModelParams};
    use crate::dynamics::{integrate_scheme, Direction, Scheme};
    use crate::num::Mat2;

    fn synth() -> ModelParams<f64> {
        ModelParams {
            mu: 10.0,
            b: 3.0,
            theta: 2.0,
            nu: 0.1,
            c_p: 5.0,
            c_x: 4.0,
            c_f: 2.0,
            f0: 1.5,
            w0: 20.0,
            gamma: 3.0,
            beta: 1.3,
            tau_w_years: 1e5,
        }
    }

    #[test]
    fn zero_noise_reproduces_euler_bitwise() {
        let sys = CarbonSystem::new(synth()).unwrap();
        let start = Vec2::new(3.0, 22.0);
        let cfg = SimConfig {
            epsilon: 0.0,
            dt: 1e-3,
            t_max: 1.0,
            seed: 7,
            n_paths: 1,
        };
        let em = euler_maruyama(&sys, start, &cfg, 0, 10);
        let det = integrate_scheme(&sys, start, 1.0, 1e-3, Direction::Forward, Scheme::Euler)
            .unwrap();
        assert!(!em.nonfinite);
        assert_eq!(em.clamped, 0);
        for (k, s) in em.states.iter().enumerate() {
            let d = det.states[k * 10];
            assert_eq!(s.x.to_bits(), d.x.to_bits(), "sample {k}");
            assert_eq!(s.y.to_bits(), d.y.to_bits(), "sample {k}");
        }
    }

    #[test]
    fn same_seed_same_path_is_bitwise_reproducible() {
        let sys = CarbonSystem::new(synth()).unwrap();
        let cfg = SimConfig {
            epsilon: 0.05,
            dt: 1e-3,
            t_max: 0.5,
            seed: 42,
            n_paths: 1,
        };
        let a = euler_maruyama(&sys, Vec2::new(3.0, 22.0), &cfg, 3, 5);
        let b = euler_maruyama(&sys, Vec2::new(3.0, 22.0), &cfg, 3, 5);
        let c = euler_maruyama(&sys, Vec2::new(3.0, 22.0), &cfg, 4, 5);
        assert!(a
            .states
            .iter()
            .zip(&b.states)
            .all(|(x, y)| x.x.to_bits() == y.x.to_bits() && x.y.to_bits() == y.y.to_bits()));
        assert!(a
            .states
            .iter()
            .zip(&c.states)
            .any(|(x, y)| x.x.to_bits() != y.x.to_bits()));
    }

    #[test]
    fn clamping_is_counted() {
        struct Floored;
        impl System<f64> for Floored {
            fn drift(&self, _x: Vec2<f64>) -> Vec2<f64> {
                Vec2::new(-5.0, 0.0)
            }
            fn jacobian(&self, _x: Vec2<f64>) -> Mat2<f64> {
                Mat2::diag(0.0, 0.0)
            }
            fn diffusion_diag(&self, _x: Vec2<f64>) -> Vec2<f64> {
                Vec2::new(1.0, 1.0)
            }
            fn clamp(&self, mut x: Vec2<f64>) -> (Vec2<f64>, bool) {
                if x.x < 0.0 {
                    x.x = 0.0;
                    (x, true)
                } else {
                    (x, false)
                }
            }
        }
        let cfg = SimConfig {
            epsilon: 0.0,
            dt: 1e-2,
            t_max: 1.0,
            seed: 0,
            n_paths: 1,
        };
        let t = euler_maruyama(&Floored, Vec2::new(0.1, 0.0), &cfg, 0, 1);
        assert!(t.clamped > 50, "clamped {}", t.clamped);
        assert_eq!(t.states.last().unwrap().x, 0.0);
    }

    #[test]
    fn ou_time_average_variance_matches_theory() {
        // dx = −x dt + ε dW has stationary variance ε²/2 per coordinate
        use crate::oracles::LinearSink;
        let cfg = SimConfig {
            epsilon: 0.5,
            dt: 1e-3,
            t_max: 400.0,
            seed: 11,
            n_paths: 1,
        };
        let t = euler_maruyama(&LinearSink, Vec2::new(0.0, 0.0), &cfg, 0, 1);
        let skip = t.states.len() / 10; // discard the warm-up
        let m2: f64 = t.states[skip..]
            .iter()
            .map(|s| s.x * s.x)
            .sum::<f64>()
            / (t.states.len() - skip) as f64;
        let expect = 0.5 * 0.5 / 2.0;
        assert!(
            (m2 - expect).abs() < 0.3 * expect,
            "OU second moment {m2}, expected {expect}"
        );
    }

    #[test]
    fn histogram_mass_is_one_and_bins_cover_support() {
        let seg = vec![
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)],
            vec![Vec2::new(2.0, 0.0)],
        ];
        let h = occupancy_histogram(&seg, &[], 4, 4).unwrap();
        let total: f64 = h.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(h.mass_at(Vec2::new(0.0, 0.0)) > 0.0);
        assert!(h.mass_at(Vec2::new(2.0, 2.0)) > 0.0);
        assert_eq!(h.cell_of(Vec2::new(5.0, 5.0)), None);
    }

    #[test]
    fn median_handles_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median::<f64>(&[]), None);
    }

    #[test]
    fn concordance_limits() {
        // all mass in the upper-right cell of a 2×2 grid over [0,1]²
        let seg = vec![vec![Vec2::new(0.75, 0.75); 10]];
        let h = occupancy_histogram(&seg, &[Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)], 2, 2)
            .unwrap();
        let on = concordance(&h, &[Vec2::new(0.6, 0.6), Vec2::new(0.9, 0.75)]);
        assert_eq!(on, 1.0);
        let off = concordance(&h, &[Vec2::new(0.2, 0.2), Vec2::new(0.2, 0.8)]);
        assert_eq!(off, 0.0);
    }

    #[test]
    fn empty_bundle_is_an_error() {
        assert!(occupancy_histogram::<f64>(&[], &[], 4, 4).is_err());
    }
}
