//! End-to-end behavior of the `carbon-gmam` binary: exit codes, config
//! handling, and the on-disk output contract. Everything here talks to the
//! real executable through its public interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carbon-gmam"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn shipped_params() -> PathBuf {
    repo_root().join("params/rothman-modern-ocean.json")
}

fn have_params() -> bool {
    shipped_params().is_file()
}

fn write(path: &Path, text: &str) -> PathBuf {
    fs::write(path, text).unwrap();
    path.to_path_buf()
}

/// Config with a solver small enough for one-per-test binary runs (~3 s).
fn fast_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "params_file": {:?},
  "gmam": {{ "n_points": 151, "step_tau": 0.01, "max_outer_iters": 6000 }}{}{}
}}"#,
        shipped_params(),
        if extra.is_empty() { "" } else { "," },
        extra
    );
    write(&dir.join("config.json"), &text)
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited with a code")
}

// ---- exit code 2: configuration errors --------------------------------

#[test]
fn unknown_config_key_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), r#"{ "nu_stepp": 0.1 }"#);
    let out = bin().args(["--config"]).arg(&cfg).args(["path", "--nu", "0"]).output().unwrap();
    assert_eq!(code(&out), 2, "stderr: {}", stderr_of(&out));
    let err = stderr_of(&out);
    assert!(err.contains("nu_stepp"), "error names the bad key: {err}");
}

#[test]
fn invalid_config_value_exits_two_and_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), r#"{ "nu_step": 0.0 }"#);
    let out = bin().args(["--config"]).arg(&cfg).arg("sweep").output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("nu_step"), "stderr: {}", stderr_of(&out));
}

#[test]
fn malformed_config_json_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), "{ this is not json");
    let out = bin().args(["--config"]).arg(&cfg).args(["path", "--nu", "0"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_params_content_exits_two() {
    let tmp = TempDir::new().unwrap();
    // well-formed JSON, physically meaningless value
    let params = write(
        &tmp.path().join("p.json"),
        r#"{ "mu": -250.0, "b": 4.0, "theta": 5.0, "c_p": 110.0, "c_x": 55.0,
             "c_f": 43.9, "f0": 0.694, "w0": 2000.0, "gamma": 4.0, "beta": 1.7,
             "tau_w_years": 1e5, "nu": 0.0 }"#,
    );
    let cfg = write(
        &tmp.path().join("c.json"),
        &format!(r#"{{ "params_file": {params:?} }}"#),
    );
    let out = bin().args(["--config"]).arg(&cfg).args(["path", "--nu", "0"]).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr_of(&out).contains("mu"), "stderr: {}", stderr_of(&out));
}

#[test]
fn scan_window_outside_supported_range_exits_two() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = fast_config(tmp.path(), "");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(tmp.path().join("out"))
        .args(["scan", "--cx-min", "30", "--cx-max", "64"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("[40, 80]"));
}

#[test]
fn usage_errors_exit_two() {
    let out = bin().arg("no-such-subcommand").output().unwrap();
    assert_eq!(code(&out), 2);
    // `path` without --nu
    let out = bin().arg("path").output().unwrap();
    assert_eq!(code(&out), 2);
}

// ---- exit code 4: I/O errors -------------------------------------------

#[test]
fn missing_config_file_exits_four() {
    let out = bin()
        .args(["--config", "/nonexistent/config.json", "path", "--nu", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", stderr_of(&out));
}

#[test]
fn missing_params_file_exits_four() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp.path().join("c.json"),
        r#"{ "params_file": "/nonexistent/params.json" }"#,
    );
    let out = bin().args(["--config"]).arg(&cfg).args(["path", "--nu", "0"]).output().unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", stderr_of(&out));
}

#[test]
fn unwritable_output_dir_exits_four() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let blocker = write(&tmp.path().join("file"), "not a directory\n");
    let cfg = fast_config(tmp.path(), "");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(blocker.join("out"))
        .args(["scan", "--cx-min", "60", "--cx-max", "60", "--steps", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", stderr_of(&out));
}

// ---- exit code 3: solver non-convergence --------------------------------

#[test]
fn solver_nonconvergence_exits_three_but_still_writes_outputs() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp.path().join("c.json"),
        &format!(
            r#"{{ "params_file": {:?},
                  "gmam": {{ "n_points": 151, "step_tau": 0.01, "max_outer_iters": 1 }} }}"#,
            shipped_params()
        ),
    );
    let outdir = tmp.path().join("out");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .args(["path", "--nu", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", stderr_of(&out));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["converged"], serde_json::json!(false));
    assert!(outdir.join("manifest.json").is_file(), "manifest written even on exit 3");
}

// ---- defaults and overrides ---------------------------------------------

#[test]
fn empty_config_file_means_defaults() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("empty.json"), "");
    let outdir = tmp.path().join("out");
    // default params_file is repo-relative, so run from the workspace root
    let out = bin()
        .current_dir(repo_root())
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .args(["scan", "--cx-min", "60", "--cx-max", "60", "--steps", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["c_x"], serde_json::json!(62.0));
    assert_eq!(manifest["config"]["gmam"]["n_points"], serde_json::json!(3000));
    let scan = fs::read_to_string(outdir.join("scan.csv")).unwrap();
    assert!(scan.contains("60,bistable,"), "scan.csv:\n{scan}");
}

#[test]
fn seed_override_lands_in_the_manifest() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = fast_config(tmp.path(), "");
    let outdir = tmp.path().join("out");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .args(["--seed", "7"])
        .args(["scan", "--cx-min", "60", "--cx-max", "60", "--steps", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["sim"]["seed"], serde_json::json!(7));
    assert_eq!(
        manifest["config"]["output_dir"],
        serde_json::json!(outdir.to_str().unwrap())
    );
}

// ---- output contract -----------------------------------------------------

#[test]
fn path_outputs_follow_the_contract() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = fast_config(tmp.path(), "");
    let outdir = tmp.path().join("out");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .args(["path", "--nu", "0.25"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));

    // path.csv: header + one row per node, alpha spanning [0, 1]
    let path_csv = fs::read_to_string(outdir.join("path.csv")).unwrap();
    let mut lines = path_csv.lines();
    assert_eq!(lines.next().unwrap(), "index,alpha,c,w");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 151);
    assert!(rows[0].starts_with("0,0,"));
    assert!(rows[150].starts_with("150,1,"));

    // result.json: exactly the documented keys
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("result.json")).unwrap()).unwrap();
    for key in ["action", "converged", "endpoint_index", "iterations", "n_points", "reason"] {
        assert!(result.get(key).is_some(), "result.json missing {key}");
    }
    assert_eq!(result["n_points"], serde_json::json!(151));
    assert_eq!(result["converged"], serde_json::json!(true));

    // manifest: files sorted, hashes and sizes accurate, timings unlisted
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], serde_json::json!("path"));
    assert_eq!(manifest["args"]["nu"], serde_json::json!(0.25));
    assert!(manifest["version"].as_str().unwrap().starts_with('v'));
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort_unstable();
    assert_eq!(names, sorted, "file entries sorted by name");
    assert!(names.contains(&"path.csv"));
    assert!(names.contains(&"cycle_stable.csv"));
    assert!(names.contains(&"cycle_unstable.csv"));
    assert!(!names.contains(&"timings.json"), "timings are not part of the manifest");
    assert!(!names.contains(&"manifest.json"));
    for f in files {
        let name = f["name"].as_str().unwrap();
        let bytes = fs::read(outdir.join(name)).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64, "{name} size");
        let digest = format!("{:x}", Sha256::digest(&bytes));
        assert_eq!(f["sha256"].as_str().unwrap(), digest, "{name} hash");
    }
    assert!(outdir.join("timings.json").is_file());
}

#[test]
fn sweep_marks_non_bistable_points_skipped() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    // c_x = 55 sits below the cycle-birth threshold: no stable orbit to hit
    let cfg = fast_config(
        tmp.path(),
        r#""c_x": 55.0, "nu_min": 0.0, "nu_max": 0.0, "nu_step": 0.1"#,
    );
    let outdir = tmp.path().join("out");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .arg("sweep")
        .output()
        .unwrap();
    // a documented non-bistable regime is a skip, not a solver failure
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let sweep = fs::read_to_string(outdir.join("sweep.csv")).unwrap();
    assert_eq!(
        sweep,
        "nu,action,path_length,arrival_c,endpoint_index,converged\n0,,,,,skipped\n"
    );
    assert!(stderr_of(&out).contains("skipped"));
}

#[test]
fn sweep_writes_per_nu_path_files() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = fast_config(
        tmp.path(),
        r#""nu_min": 0.0, "nu_max": 0.0, "nu_step": 0.1"#,
    );
    let outdir = tmp.path().join("out");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .arg("sweep")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(outdir.join("path_nu_0.0000.csv").is_file());
    let sweep = fs::read_to_string(outdir.join("sweep.csv")).unwrap();
    let row = sweep.lines().nth(1).unwrap();
    assert!(row.starts_with("0,"), "row: {row}");
    assert!(row.ends_with(",true"), "row: {row}");
}

#[test]
fn composed_series_is_continuous_across_segments() {
    if !have_params() {
        eprintln!("skipping: params file absent");
        return;
    }
    let tmp = TempDir::new().unwrap();
    let cfg = fast_config(tmp.path(), "");
    let outdir = tmp.path().join("out");
    let out = bin()
        .args(["--config"]).arg(&cfg)
        .args(["--output"]).arg(&outdir)
        .args(["compose", "--nu", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));

    let csv = fs::read_to_string(outdir.join("compose.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,c,w,segment");
    let mut segments: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for line in lines {
        let cells: Vec<String> = line.split(',').map(str::to_owned).collect();
        assert_eq!(cells.len(), 4, "row: {line}");
        match segments.last_mut() {
            Some((label, rows)) if *label == cells[3] => rows.push(cells),
            _ => segments.push((cells[3].clone(), vec![cells])),
        }
    }
    let labels: Vec<&str> = segments.iter().map(|(l, _)| l.as_str()).collect();
    assert_eq!(labels, ["green", "orange", "blue"], "segment order");

    // hand-off points agree to the printed digit
    for window in segments.windows(2) {
        let last = window[0].1.last().unwrap();
        let first = window[1].1.first().unwrap();
        assert_eq!(last[1], first[1], "c continuous at {} -> {}", window[0].0, window[1].0);
        assert_eq!(last[2], first[2], "w continuous at {} -> {}", window[0].0, window[1].0);
    }

    // time is nondecreasing over the whole series
    let mut prev = f64::NEG_INFINITY;
    for (_, rows) in &segments {
        for row in rows {
            let t: f64 = row[0].parse().unwrap();
            assert!(t >= prev, "time went backwards at t = {t}");
            prev = t;
        }
    }

    // the noisy pre-segment stays inside the unstable orbit by construction
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("compose_meta.json")).unwrap())
            .unwrap();
    assert!(meta["pre_path_id"].as_u64().is_some());
}
