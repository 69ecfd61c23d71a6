//! The five subcommands. Each returns the process exit code after writing
//! its outputs (non-convergence still writes everything, then exits 3).

use carbon_gmam::dynamics::{find_thresholds, scan_regimes, Thresholds};
use carbon_gmam::gmam::quasipotential_to_cycle;
use carbon_gmam::sde::{
    concordance, euler_maruyama, occupancy_histogram, transition_bundle, truncate_at_tube,
    BundleConfig, TUBE_FRACTION,
};
use carbon_gmam::{Params, Sim};

use crate::compose::{compose_transition_series, ComposeOptions};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{prepare, run_sweep, sweep_exit_code, unstable_cycle, SweepStatus};
use crate::output::{
    compose_csv, histogram_csv, nu_stem, polyline_csv, result_json, scan_csv, sweep_csv,
    trajectory_csv, transitions_csv, Emitter,
};

/// Euler steps between stored samples in all simulated outputs.
const SIM_STRIDE: usize = 100;
const HIST_BINS: usize = 50;
const MAX_SAMPLE_TRAJECTORIES: usize = 4;

pub fn cmd_scan(
    cfg: &ExperimentConfig,
    params: &Params,
    cx_min: f64,
    cx_max: f64,
    steps: usize,
) -> CliResult<i32> {
    if steps == 0 {
        return Err(CliError::Config("steps must be at least 1".into()));
    }
    if !(cx_min.is_finite() && cx_max.is_finite()) || cx_min > cx_max {
        return Err(CliError::Config(format!(
            "cx-min must be ≤ cx-max, got {cx_min} > {cx_max}"
        )));
    }
    if cx_min < 40.0 || cx_max > 80.0 {
        return Err(CliError::Config(format!(
            "scan window must lie within [40, 80] μmol·kg⁻¹, got [{cx_min}, {cx_max}]"
        )));
    }
    if steps == 1 && cx_min != cx_max {
        return Err(CliError::Config(
            "steps = 1 requires cx-min == cx-max".into(),
        ));
    }

    let grid: Vec<f64> = if steps == 1 {
        vec![cx_min]
    } else {
        let h = (cx_max - cx_min) / (steps - 1) as f64;
        (0..steps).map(|i| cx_min + i as f64 * h).collect()
    };
    let reports = scan_regimes(&grid, params);

    let (thresholds, threshold_error) = if cx_max > cx_min {
        let h = (cx_max - cx_min) / (steps - 1) as f64;
        match find_thresholds(params, cx_min, cx_max, h) {
            Ok(t) => (t, None),
            Err(e) => (Thresholds { lower: None, upper: None }, Some(e.to_string())),
        }
    } else {
        (Thresholds { lower: None, upper: None }, None)
    };
    let mut footer = serde_json::json!({
        "lower": thresholds.lower,
        "upper": thresholds.upper,
    });
    if let Some(e) = &threshold_error {
        footer["error"] = serde_json::json!(e);
    }

    let args = serde_json::json!({"cx_min": cx_min, "cx_max": cx_max, "steps": steps});
    let mut emitter = Emitter::new(&cfg.output_dir, "scan", args, cfg)?;
    emitter.write_file("scan.csv", &scan_csv(&reports, &footer))?;
    emitter.finish()?;

    let point_errors = reports.iter().filter(|r| r.error.is_some()).count();
    for r in reports.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: c_x = {}: {}",
            r.c_x,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(if point_errors > 0 || threshold_error.is_some() { 3 } else { 0 })
}

pub fn cmd_path(cfg: &ExperimentConfig, params: &Params, nu: f64) -> CliResult<i32> {
    let setting = prepare(params, cfg.c_x, nu).map_err(|e| e.into_cli())?;
    let res = quasipotential_to_cycle(&setting.sys, setting.fixed_point, &setting.stable, &cfg.gmam)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let args = serde_json::json!({"nu": nu});
    let mut emitter = Emitter::new(&cfg.output_dir, "path", args, cfg)?;
    emitter.write_file("path.csv", &polyline_csv(&res.path.points))?;
    emitter.write_file("result.json", &result_json(&res))?;
    emitter.write_file("cycle_stable.csv", &polyline_csv(&setting.stable.points))?;
    match unstable_cycle(params, cfg.c_x, nu) {
        Ok(cycle) => emitter.write_file("cycle_unstable.csv", &polyline_csv(&cycle.points))?,
        Err(e) => eprintln!("warning: {e}; cycle_unstable.csv omitted"),
    }
    emitter.finish()?;

    if !res.converged {
        eprintln!(
            "solver stopped without converging after {} iterations ({})",
            res.iterations,
            res.reason.as_str()
        );
        return Ok(3);
    }
    Ok(0)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, params: &Params, warm_start: bool) -> CliResult<i32> {
    let outcomes = run_sweep(params, cfg, warm_start);
    for o in &outcomes {
        match &o.record.status {
            SweepStatus::Converged => {}
            SweepStatus::Failed(m) => eprintln!("nu = {}: failed: {m}", o.record.nu),
            SweepStatus::Skipped(m) => eprintln!("nu = {}: skipped: {m}", o.record.nu),
        }
    }

    let args = serde_json::json!({"warm_start": warm_start});
    let mut emitter = Emitter::new(&cfg.output_dir, "sweep", args, cfg)?;
    let records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
    emitter.write_file("sweep.csv", &sweep_csv(&records))?;
    for o in &outcomes {
        if let Some(path) = &o.path {
            let name = format!("path_nu_{}.csv", nu_stem(o.record.nu));
            emitter.write_file(&name, &polyline_csv(&path.points))?;
        }
    }
    emitter.finish()?;
    Ok(sweep_exit_code(&outcomes))
}

pub fn cmd_simulate(cfg: &ExperimentConfig, params: &Params, nu: f64) -> CliResult<i32> {
    let setting = prepare(params, cfg.c_x, nu).map_err(|e| e.into_cli())?;
    let unstable = unstable_cycle(params, cfg.c_x, nu)?;
    let res = quasipotential_to_cycle(&setting.sys, setting.fixed_point, &setting.stable, &cfg.gmam)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    if !res.converged {
        eprintln!(
            "warning: transition path did not converge ({}); concordance is against the stopped path",
            res.reason.as_str()
        );
    }

    let bundle_cfg = BundleConfig {
        base: cfg.sim,
        ..BundleConfig::default()
    };
    let bundle = transition_bundle(
        &setting.sys,
        setting.fixed_point,
        &unstable,
        &setting.stable,
        &bundle_cfg,
        SIM_STRIDE,
    )
    .map_err(|e| CliError::Solver(e.to_string()))?;
    if bundle.insufficient {
        eprintln!(
            "warning: only {} transitions at the top ε rung (wanted ≥ {})",
            bundle.segments.len(),
            bundle_cfg.min_transitions
        );
    }

    let tube_w = TUBE_FRACTION * setting.stable.bbox_diagonal();
    let truncated = truncate_at_tube(&res.path.points, &setting.stable, tube_w);
    let (histogram, conc) = if bundle.segments.is_empty() {
        (None, None)
    } else {
        let hist = occupancy_histogram(&bundle.segments, &truncated, HIST_BINS, HIST_BINS)
            .map_err(|e| CliError::Solver(e.to_string()))?;
        let c = concordance(&hist, &truncated);
        (Some(hist), Some(c))
    };

    let args = serde_json::json!({"nu": nu});
    let mut emitter = Emitter::new(&cfg.output_dir, "simulate", args, cfg)?;
    emitter.write_file("path.csv", &polyline_csv(&res.path.points))?;
    emitter.write_file("result.json", &result_json(&res))?;
    emitter.write_file("cycle_stable.csv", &polyline_csv(&setting.stable.points))?;
    emitter.write_file("cycle_unstable.csv", &polyline_csv(&unstable.points))?;
    emitter.write_file("transitions.csv", &transitions_csv(&bundle.outcomes, bundle.sample_dt))?;

    let mut meta = serde_json::json!({
        "epsilon_used": bundle.epsilon_used,
        "rungs": bundle.rungs,
        "transitions": bundle.segments.len(),
        "insufficient": bundle.insufficient,
        "seed": cfg.sim.seed,
        "n_paths": cfg.sim.n_paths,
        "tube_w": tube_w,
        "concordance": conc,
        "gmam_nodes_compared": truncated.len(),
        "nx": HIST_BINS,
        "ny": HIST_BINS,
    });
    if let Some(h) = &histogram {
        emitter.write_file("histogram.csv", &histogram_csv(h))?;
        meta["c_min"] = serde_json::json!(h.lo.x);
        meta["c_max"] = serde_json::json!(h.hi.x);
        meta["w_min"] = serde_json::json!(h.lo.y);
        meta["w_max"] = serde_json::json!(h.hi.y);
        meta["bin_dc"] = serde_json::json!((h.hi.x - h.lo.x) / h.nx as f64);
        meta["bin_dw"] = serde_json::json!((h.hi.y - h.lo.y) / h.ny as f64);
    }
    emitter.write_file(
        "histogram_meta.json",
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("plain object")),
    )?;

    // re-simulate the first few transitioning paths in full for inspection
    // (bitwise identical to the bundle's own draws: same seed, id, ε)
    let mut rung_cfg = cfg.sim;
    rung_cfg.epsilon = bundle.epsilon_used;
    let sample_ids: Vec<u64> = bundle
        .outcomes
        .iter()
        .filter(|o| o.transition.is_some())
        .take(MAX_SAMPLE_TRAJECTORIES)
        .map(|o| o.path_id)
        .collect();
    for pid in sample_ids {
        let traj = euler_maruyama(&setting.sys, setting.fixed_point, &rung_cfg, pid, SIM_STRIDE);
        let name = format!("sample_{pid:04}.csv");
        emitter.write_file(&name, &trajectory_csv(&traj.times, &traj.states))?;
    }
    emitter.finish()?;

    Ok(if res.converged { 0 } else { 3 })
}

pub fn cmd_compose(cfg: &ExperimentConfig, params: &Params, nu: f64) -> CliResult<i32> {
    let setting = prepare(params, cfg.c_x, nu).map_err(|e| e.into_cli())?;
    let unstable = unstable_cycle(params, cfg.c_x, nu)?;
    let res = quasipotential_to_cycle(&setting.sys, setting.fixed_point, &setting.stable, &cfg.gmam)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let args = serde_json::json!({"nu": nu});
    let mut emitter = Emitter::new(&cfg.output_dir, "compose", args, cfg)?;
    emitter.write_file("path.csv", &polyline_csv(&res.path.points))?;
    emitter.write_file("result.json", &result_json(&res))?;
    emitter.write_file("cycle_stable.csv", &polyline_csv(&setting.stable.points))?;
    emitter.write_file("cycle_unstable.csv", &polyline_csv(&unstable.points))?;

    if !res.converged {
        emitter.finish()?;
        eprintln!(
            "transition path did not converge ({}); composed series needs a converged path",
            res.reason.as_str()
        );
        return Ok(3);
    }

    let opts = ComposeOptions::default();
    let series = compose_transition_series(
        &setting.sys,
        setting.fixed_point,
        &unstable,
        &res.path.points,
        &cfg.sim,
        &opts,
    )?;
    emitter.write_file("compose.csv", &compose_csv(&series))?;
    let meta = serde_json::json!({
        "pre_path_id": series.pre_path_id,
        "pre_duration": opts.pre_duration,
        "display_duration": opts.display_duration,
        "post_duration": opts.post_duration,
        "stride": opts.stride,
        "epsilon": cfg.sim.epsilon,
        "dt": cfg.sim.dt,
    });
    emitter.write_file(
        "compose_meta.json",
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("plain object")),
    )?;
    emitter.finish()?;
    Ok(0)
}

/// Simulation config with CLI-level overrides applied; kept here so main
/// and the tests share one definition of "effective config".
pub fn apply_overrides(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    output: Option<std::path::PathBuf>,
) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.sim = Sim { seed: s, ..cfg.sim };
    }
    if let Some(dir) = output {
        cfg.output_dir = dir;
    }
    cfg
}
