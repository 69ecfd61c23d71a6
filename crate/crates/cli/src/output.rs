//! File emission: CSV/JSON builders and the hashed output manifest.
//!
//! Everything is rendered in memory and written through [`Emitter`], which
//! records name, byte size, and sha256 of each file. The manifest is fully
//! deterministic (config echo, version, sorted file list); wall-clock goes
//! to a separate `timings.json` that the manifest does not list, so
//! re-running an identical config reproduces the manifest byte for byte.

use std::path::{Path, PathBuf};
use std::time::Instant;

use carbon_gmam::dynamics::RegimeReport;
use carbon_gmam::sde::{Histogram, PathOutcome};
use carbon_gmam::{State, Transition};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::compose::ComposedSeries;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::SweepRecord;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    args: &'a serde_json::Value,
    config: &'a ExperimentConfig,
    files: &'a [FileEntry],
    #[serde(skip_serializing_if = "Option::is_none")]
    aborted: Option<&'a str>,
}

pub struct Emitter {
    dir: PathBuf,
    command: String,
    args: serde_json::Value,
    config: ExperimentConfig,
    files: Vec<FileEntry>,
    started: Instant,
}

impl Emitter {
    pub fn new(
        dir: &Path,
        command: &str,
        args: serde_json::Value,
        config: &ExperimentConfig,
    ) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create output dir {}: {e}", dir.display())))?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            command: command.into(),
            args,
            config: config.clone(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write one output file and record it for the manifest. If the write
    /// fails, a manifest noting the abort is attempted before erroring out.
    pub fn write_file(&mut self, name: &str, content: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Err(e) = std::fs::write(&path, content) {
            let msg = format!("writing {}: {e}", path.display());
            let _ = self.write_manifest(Some(&msg));
            return Err(CliError::Io(msg));
        }
        let mut hasher = Sha256::new();
        hasher.update(content.as_bytes());
        self.files.push(FileEntry {
            name: name.into(),
            bytes: content.len() as u64,
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    fn write_manifest(&mut self, aborted: Option<&str>) -> CliResult<()> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest {
            version: VERSION,
            command: &self.command,
            args: &self.args,
            config: &self.config,
            files: &self.files,
            aborted,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)
            .map_err(|e| CliError::Io(format!("writing manifest.json: {e}")))
    }

    /// Write `manifest.json` and the unlisted `timings.json`, consuming the
    /// emitter.
    pub fn finish(mut self) -> CliResult<()> {
        self.write_manifest(None)?;
        let timings = serde_json::json!({
            "command": self.command,
            "wall_seconds": self.started.elapsed().as_secs_f64(),
        });
        std::fs::write(
            self.dir.join("timings.json"),
            format!("{}\n", serde_json::to_string_pretty(&timings).expect("plain object")),
        )
        .map_err(|e| CliError::Io(format!("writing timings.json: {e}")))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `index,alpha,c,w` rows of a discrete path or cycle; alpha is the node
/// fraction i/(N−1), which for equidistant paths is also normalized arc
/// length.
pub fn polyline_csv(points: &[State]) -> String {
    let denom = (points.len() - 1).max(1) as f64;
    let mut out = String::from("index,alpha,c,w\n");
    for (i, p) in points.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", num(i as f64 / denom), num(p.x), num(p.y)));
    }
    out
}

/// Result metadata for one transition solve.
pub fn result_json(res: &Transition) -> String {
    let value = serde_json::json!({
        "action": res.action,
        "iterations": res.iterations,
        "converged": res.converged,
        "endpoint_index": res.endpoint_index,
        "n_points": res.path.points.len(),
        "reason": res.reason.as_str(),
    });
    format!("{}\n", serde_json::to_string_pretty(&value).expect("plain object"))
}

/// `t,c,w` rows of a simulated trajectory.
pub fn trajectory_csv(times: &[f64], states: &[State]) -> String {
    let mut out = String::from("t,c,w\n");
    for (t, s) in times.iter().zip(states) {
        out.push_str(&format!("{},{},{}\n", num(*t), num(s.x), num(s.y)));
    }
    out
}

/// `t,c,w,segment` rows of a composed series, segments in display order.
pub fn compose_csv(series: &ComposedSeries) -> String {
    let mut out = String::from("t,c,w,segment\n");
    for (t, s, label) in series.rows() {
        out.push_str(&format!("{},{},{},{label}\n", num(t), num(s.x), num(s.y)));
    }
    out
}

/// One row per ν grid point, in grid order. Skipped points leave the
/// numeric fields empty and mark the `converged` column `skipped`.
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("nu,action,path_length,arrival_c,endpoint_index,converged\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(r.nu),
            opt(r.action),
            opt(r.path_length),
            opt(r.arrival_c),
            r.endpoint_index.map(|i| i.to_string()).unwrap_or_default(),
            r.status.as_csv(),
        ));
    }
    out
}

/// Regime table plus a `# thresholds {...}` JSON footer line.
pub fn scan_csv(reports: &[RegimeReport<f64>], thresholds: &serde_json::Value) -> String {
    let mut out = String::from("c_x,regime,c_star,w_star\n");
    for r in reports {
        let (c_star, w_star) = match r.fixed_point {
            Some(fp) => (num(fp.x), num(fp.y)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{c_star},{w_star}\n",
            num(r.c_x),
            r.regime.clone().as_str(),
        ));
    }
    out.push_str(&format!("# thresholds {thresholds}\n"));
    out
}

/// Occupancy grid, one CSV row per w-bin from low to high, nx c-bin columns
/// each. Bounds and bin sizes live in the metadata JSON.
pub fn histogram_csv(h: &Histogram<f64>) -> String {
    let mut out = String::new();
    for iy in 0..h.ny {
        let row: Vec<String> = (0..h.nx).map(|ix| num(h.mass[iy * h.nx + ix])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Per-path transition bookkeeping of the kept ε rung.
pub fn transitions_csv(outcomes: &[PathOutcome], sample_dt: f64) -> String {
    let mut out = String::from("path_id,transitioned,exit_t,arrival_t,clamped,nonfinite\n");
    for o in outcomes {
        let (exit_t, arrival_t) = match o.transition {
            Some(tr) => (
                num(tr.exit_index as f64 * sample_dt),
                num(tr.arrival_index as f64 * sample_dt),
            ),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{exit_t},{arrival_t},{},{}\n",
            o.path_id,
            o.transition.is_some(),
            o.clamped,
            o.nonfinite,
        ));
    }
    out
}

/// Deterministic per-ν file stem: `nu` printed with four decimals covers
/// grids down to step 1e−4 without float-noise in names.
pub fn nu_stem(nu: f64) -> String {
    format!("{nu:.4}")
}
