//! Per-ν experiment setup and the ν sweep.

use carbon_gmam::carbon::CarbonSystem;
use carbon_gmam::dynamics::{find_fixed_point, find_limit_cycle, is_stable_fixed_point, Stability};
use carbon_gmam::gmam::{quasipotential_to_cycle, quasipotential_to_cycle_warm};
use carbon_gmam::path::path_length;
use carbon_gmam::{Carbonate, Cycle, Error, Params, State, Transition};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Everything a single-ν solve needs: the system, its fixed point, and the
/// stable cycle the transition lands on.
pub struct Setting {
    pub sys: Carbonate,
    pub fixed_point: State,
    pub stable: Cycle,
}

/// Why a ν point cannot be solved.
pub enum SettingError {
    /// The (c_x, ν) regime has no stable fixed point or no stable cycle —
    /// a sweep records this as skipped, single-shot commands fail.
    NotBistable(String),
    /// Genuine solver trouble (Newton divergence, domain exit, …).
    Solver(String),
}

impl SettingError {
    pub fn into_cli(self) -> CliError {
        match self {
            SettingError::NotBistable(m) => CliError::Solver(format!("regime is not bistable: {m}")),
            SettingError::Solver(m) => CliError::Solver(m),
        }
    }
}

/// Fixed point and stable cycle at (c_x, ν), or the reason there is none.
pub fn prepare(params: &Params, c_x: f64, nu: f64) -> Result<Setting, SettingError> {
    let p = params.with_c_x(c_x).with_nu(nu);
    let sys = CarbonSystem::new(p).map_err(|e| SettingError::Solver(e.to_string()))?;
    let fixed_point = find_fixed_point(&sys, sys.fixed_point_guess())
        .map_err(|e| SettingError::Solver(format!("fixed point at nu={nu}: {e}")))?;
    if !is_stable_fixed_point(&sys, fixed_point) {
        return Err(SettingError::NotBistable(format!(
            "fixed point is unstable at c_x={c_x}, nu={nu}"
        )));
    }
    let stable = match find_limit_cycle(&p, Stability::Stable) {
        Ok(c) => c,
        Err(Error::NoCycle(m)) => {
            return Err(SettingError::NotBistable(format!(
                "no stable cycle at c_x={c_x}, nu={nu}: {m}"
            )))
        }
        Err(e) => return Err(SettingError::Solver(format!("stable cycle at nu={nu}: {e}"))),
    };
    Ok(Setting { sys, fixed_point, stable })
}

/// The unstable cycle at (c_x, ν); needed by transition detection and the
/// composed series, not by the sweep itself.
pub fn unstable_cycle(params: &Params, c_x: f64, nu: f64) -> CliResult<Cycle> {
    let p = params.with_c_x(c_x).with_nu(nu);
    find_limit_cycle(&p, Stability::Unstable)
        .map_err(|e| CliError::Solver(format!("unstable cycle at c_x={c_x}, nu={nu}: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Converged,
    /// Solver ran but failed or did not converge; reason kept for logs.
    Failed(String),
    /// The regime at this ν is not bistable; recorded, not an error.
    Skipped(String),
}

impl SweepStatus {
    /// Value of the `converged` CSV column.
    pub fn as_csv(&self) -> &'static str {
        match self {
            SweepStatus::Converged => "true",
            SweepStatus::Failed(_) => "false",
            SweepStatus::Skipped(_) => "skipped",
        }
    }
}

/// One ν grid point of the sweep. Numeric fields are unset for skipped
/// points and for failures that produced no path at all.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub nu: f64,
    pub action: Option<f64>,
    pub path_length: Option<f64>,
    pub arrival_c: Option<f64>,
    pub endpoint_index: Option<usize>,
    pub status: SweepStatus,
}

pub struct SweepOutcome {
    pub record: SweepRecord,
    pub path: Option<carbon_gmam::Path>,
}

fn outcome_from_result(nu: f64, res: Transition) -> SweepOutcome {
    let status = if res.converged {
        SweepStatus::Converged
    } else {
        SweepStatus::Failed(format!("stopped without converging: {}", res.reason.as_str()))
    };
    let record = SweepRecord {
        nu,
        action: Some(res.action),
        path_length: Some(path_length(&res.path.points)),
        // exactly the c-coordinate of the path's final point
        arrival_c: Some(res.path.points.last().expect("nonempty path").x),
        endpoint_index: res.endpoint_index,
        status,
    };
    SweepOutcome { record, path: Some(res.path) }
}

fn empty_outcome(nu: f64, status: SweepStatus) -> SweepOutcome {
    SweepOutcome {
        record: SweepRecord {
            nu,
            action: None,
            path_length: None,
            arrival_c: None,
            endpoint_index: None,
            status,
        },
        path: None,
    }
}

fn solve_cold(params: &Params, cfg: &ExperimentConfig, nu: f64) -> SweepOutcome {
    match prepare(params, cfg.c_x, nu) {
        Err(SettingError::NotBistable(m)) => empty_outcome(nu, SweepStatus::Skipped(m)),
        Err(SettingError::Solver(m)) => empty_outcome(nu, SweepStatus::Failed(m)),
        Ok(setting) => {
            match quasipotential_to_cycle(&setting.sys, setting.fixed_point, &setting.stable, &cfg.gmam) {
                Ok(res) => outcome_from_result(nu, res),
                Err(e) => empty_outcome(nu, SweepStatus::Failed(e.to_string())),
            }
        }
    }
}

/// Run the full ν grid. Cold sweeps solve every point independently on
/// parallel workers; warm sweeps walk the grid in order, seeding each solve
/// with the previous converged path (and fall back to a cold solve whenever
/// the warm restart fails to converge).
pub fn run_sweep(params: &Params, cfg: &ExperimentConfig, warm_start: bool) -> Vec<SweepOutcome> {
    let grid = cfg.nu_grid();
    if !warm_start {
        return grid.par_iter().map(|&nu| solve_cold(params, cfg, nu)).collect();
    }

    let mut outcomes = Vec::with_capacity(grid.len());
    let mut prev: Option<Transition> = None;
    for &nu in &grid {
        let outcome = match prepare(params, cfg.c_x, nu) {
            Err(SettingError::NotBistable(m)) => empty_outcome(nu, SweepStatus::Skipped(m)),
            Err(SettingError::Solver(m)) => empty_outcome(nu, SweepStatus::Failed(m)),
            Ok(setting) => {
                let warm = prev.as_ref().and_then(|p| {
                    quasipotential_to_cycle_warm(
                        &setting.sys,
                        setting.fixed_point,
                        &setting.stable,
                        p,
                        &cfg.gmam,
                    )
                    .ok()
                    .filter(|r| r.converged)
                });
                let res = match warm {
                    Some(r) => Ok(r),
                    None => quasipotential_to_cycle(
                        &setting.sys,
                        setting.fixed_point,
                        &setting.stable,
                        &cfg.gmam,
                    ),
                };
                match res {
                    Ok(r) => {
                        if r.converged {
                            prev = Some(r.clone());
                        }
                        outcome_from_result(nu, r)
                    }
                    Err(e) => empty_outcome(nu, SweepStatus::Failed(e.to_string())),
                }
            }
        };
        outcomes.push(outcome);
    }
    outcomes
}

/// Exit code the sweep maps to: 3 if any record failed, else 0. Skipped
/// points are not failures.
pub fn sweep_exit_code(outcomes: &[SweepOutcome]) -> i32 {
    if outcomes.iter().any(|o| matches!(o.record.status, SweepStatus::Failed(_))) {
        3
    } else {
        0
    }
}
