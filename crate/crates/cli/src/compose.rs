//! Composed pre-transition / transition-path / post-transition time series.
//!
//! The geometric path carries no physical time (its minimizing duration is
//! unbounded), so the middle segment is drawn on a pseudo-time axis
//! proportional to arc length over a fixed display duration. The noisy
//! pre-segment is a fluctuation around the fixed point simulated forward
//! and displayed time-reversed, which makes its final displayed state the
//! fixed point itself — the three segments then join exactly.

use carbon_gmam::dynamics::LimitCycle;
use carbon_gmam::sde::euler_maruyama;
use carbon_gmam::{Carbonate, Sim, State, Vec2};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub struct ComposeOptions {
    /// Length of the quiescent segment before the transition (time units).
    pub pre_duration: f64,
    /// Pseudo-time the geometric path is stretched over.
    pub display_duration: f64,
    /// Length of the relaxation segment after arrival.
    pub post_duration: f64,
    /// How many noise streams to try for a pre-segment that stays inside
    /// the unstable cycle.
    pub max_pre_tries: u64,
    /// Sampling stride of the simulated segments, in Euler steps.
    pub stride: usize,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            pre_duration: 10.0,
            display_duration: 5.0,
            post_duration: 10.0,
            max_pre_tries: 32,
            stride: 100,
        }
    }
}

/// Noise stream for the post-arrival segment, far away from the pre-segment
/// stream ids so the two never share random numbers.
const POST_PATH_ID: u64 = 1 << 32;

/// The three labeled segments. Within each, times are strictly increasing;
/// the last state of each segment equals the first state of the next
/// exactly.
pub struct ComposedSeries {
    /// Fluctuation around the fixed point, times in [−pre_duration, 0].
    pub pre: Vec<(f64, State)>,
    /// The transition path on its pseudo-time axis [0, display_duration].
    pub path: Vec<(f64, State)>,
    /// Relaxation onto the cycle, [display_duration, display_duration + post_duration].
    pub post: Vec<(f64, State)>,
    /// Which noise stream produced the accepted pre-segment.
    pub pre_path_id: u64,
}

pub fn compose_transition_series(
    sys: &Carbonate,
    fixed_point: State,
    unstable: &LimitCycle<f64>,
    path_points: &[State],
    sim: &Sim,
    opts: &ComposeOptions,
) -> CliResult<ComposedSeries> {
    if path_points.len() < 2 {
        return Err(CliError::Solver("transition path has fewer than 2 points".into()));
    }
    if path_points[0] != fixed_point {
        return Err(CliError::Solver(
            "transition path does not start at the fixed point".into(),
        ));
    }

    // (i) metastable fluctuation: simulate forward from the fixed point,
    // display reversed so the segment ends exactly there. Retry streams
    // until one stays inside the unstable cycle for its whole duration.
    let pre_cfg = Sim {
        t_max: opts.pre_duration,
        ..*sim
    };
    let mut accepted = None;
    for pid in 0..opts.max_pre_tries {
        let traj = euler_maruyama(sys, fixed_point, &pre_cfg, pid, opts.stride);
        if traj.nonfinite {
            continue;
        }
        if traj.states.iter().all(|&s| unstable.contains(s)) {
            accepted = Some((pid, traj));
            break;
        }
    }
    let (pre_path_id, pre_traj) = accepted.ok_or_else(|| {
        CliError::Solver(format!(
            "no quiescent pre-transition segment within the unstable cycle in {} draws \
             (epsilon {} may be too large)",
            opts.max_pre_tries, sim.epsilon
        ))
    })?;
    let m = pre_traj.states.len();
    let sample_dt = pre_traj.sample_dt();
    let pre: Vec<(f64, State)> = (0..m)
        .map(|k| {
            let t = sample_dt * (k as i64 + 1 - m as i64) as f64;
            (t, pre_traj.states[m - 1 - k])
        })
        .collect();

    // (ii) the geometric path over pseudo-time proportional to arc length
    let mut cum = vec![0.0];
    for w in path_points.windows(2) {
        let d: f64 = w[0].dist(w[1]);
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(CliError::Solver("transition path has zero length".into()));
    }
    let path: Vec<(f64, State)> = path_points
        .iter()
        .zip(&cum)
        .map(|(&p, &l)| (opts.display_duration * (l / total), p))
        .collect();

    // (iii) relax onto the cycle from the arrival point
    let arrival: Vec2<f64> = *path_points.last().unwrap();
    let post_cfg = Sim {
        t_max: opts.post_duration,
        ..*sim
    };
    let post_traj = euler_maruyama(sys, arrival, &post_cfg, POST_PATH_ID, opts.stride);
    if post_traj.nonfinite {
        return Err(CliError::Solver("post-arrival segment blew up".into()));
    }
    let post: Vec<(f64, State)> = post_traj
        .times
        .iter()
        .zip(&post_traj.states)
        .map(|(&t, &s)| (opts.display_duration + t, s))
        .collect();

    Ok(ComposedSeries {
        pre,
        path,
        post,
        pre_path_id,
    })
}

impl ComposedSeries {
    /// All rows in display order with their segment label.
    pub fn rows(&self) -> impl Iterator<Item = (f64, State, &'static str)> + '_ {
        let tag = |seg: &'static str| move |&(t, s): &(f64, State)| (t, s, seg);
        self.pre
            .iter()
            .map(tag("green"))
            .chain(self.path.iter().map(tag("orange")))
            .chain(self.post.iter().map(tag("blue")))
    }
}
