use std::path::Path;
use std::process::{Command, Output};

use evtrap_cli::output::{OUTCOME_HEADER, TRAJECTORY_HEADER};
use tempfile::TempDir;

fn evtrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evtrap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &TempDir) -> String {
    dir.path().display().to_string()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn characterize_reports_paper_scales() {
    let dir = TempDir::new().unwrap();
    let out = evtrap(&["characterize", "--out", &out_arg(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ratio = doc["derived"]["u0_over_kappa"].as_f64().unwrap();
    assert!((ratio - 0.0125).abs() < 1e-4);
    let depth = doc["trap"]["depth"]["hbar_gamma"].as_f64().unwrap();
    assert!((depth / 8.9 - 1.0).abs() < 0.1);
    assert!(doc["trap"]["depth"]["joule"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["seed"], 1);
    let saved = std::fs::read(dir.path().join("characterize.json")).unwrap();
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&saved).unwrap(), doc);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir);
    let no_trap = evtrap(&["characterize", "--set", "eta_b=0", "--out", &out]);
    assert_eq!(no_trap.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&no_trap.stderr).contains("no interior minimum"));

    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "dt = 0.005\nwavelength = 780e-9\n").unwrap();
    let bad = evtrap(&["characterize", "--config", config.to_str().unwrap(), "--out", &out]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("wavelength"));

    let bad_value = evtrap(&["trajectory", "--dt=-1", "--out", &out]);
    assert_eq!(bad_value.status.code(), Some(2));

    let blocker = dir.path().join("not-a-dir");
    std::fs::write(&blocker, "").unwrap();
    let io = evtrap(&["potential", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&io.stderr).contains("not-a-dir"));
}

#[test]
fn potential_rerun_is_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = |d: &TempDir| {
        let out = out_arg(d);
        evtrap(&["potential", "--set", "grid_step=0.05", "--out", &out])
    };
    assert_eq!(args(&a).status.code(), Some(0));
    assert_eq!(args(&b).status.code(), Some(0));
    let fa = std::fs::read_to_string(a.path().join("potential.csv")).unwrap();
    let fb = std::fs::read_to_string(b.path().join("potential.csv")).unwrap();
    // Only the out_dir line of the provenance preamble may differ.
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# out_dir")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&fa), strip(&fb));
    let rows = data_lines(&a.path().join("potential.csv"));
    assert_eq!(rows[0], "x,U_total,U_vdw,n_red,n_blue");
    assert!(rows.len() > 50);
}

#[test]
fn one_point_grid() {
    let dir = TempDir::new().unwrap();
    let out = evtrap(&[
        "potential",
        "--set",
        "grid_start=1",
        "--set",
        "grid_end=1",
        "--out",
        &out_arg(&dir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_lines(&dir.path().join("potential.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1.000000,"));
}

#[test]
fn emitted_config_reproduces_output() {
    let first = TempDir::new().unwrap();
    let out = out_arg(&first);
    let run = evtrap(&["trajectory", "--horizon", "300", "--seed", "9", "--out", &out]);
    assert_eq!(run.status.code(), Some(0));
    let series = std::fs::read_to_string(first.path().join("trajectory.csv")).unwrap();
    let config: String = series
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    let conf_path = first.path().join("resolved.conf");
    std::fs::write(&conf_path, config).unwrap();
    let again = evtrap(&["trajectory", "--config", conf_path.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(again.stdout, run.stdout);
    assert_eq!(std::fs::read_to_string(first.path().join("trajectory.csv")).unwrap(), series);
}

#[test]
fn trajectory_series_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = evtrap(&["trajectory", "--no-noise", "--horizon", "400", "--out", &out_arg(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_lines(&dir.path().join("trajectory.csv"));
    assert_eq!(rows[0], TRAJECTORY_HEADER);
    // 80 000 steps at stride 200, plus the initial sample.
    assert_eq!(rows.len(), 1 + 401);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["outcome"]["status"], "trapped-at-horizon");
    assert!(doc["outcome"]["bounces"].as_u64().unwrap() >= 1);
    assert_eq!(doc["config"]["noiseless"], "true");
}

#[test]
fn stride_beyond_horizon_gives_summary_only() {
    let dir = TempDir::new().unwrap();
    let out = evtrap(&[
        "trajectory",
        "--horizon",
        "50",
        "--set",
        "stride=1000000",
        "--out",
        &out_arg(&dir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_lines(&dir.path().join("trajectory.csv"));
    assert_eq!(rows, vec![TRAJECTORY_HEADER.to_string()]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["series_rows"], 0);
}

#[test]
fn single_member_ensemble_matches_trajectory() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let common = ["--horizon", "1500", "--seed", "4242"];
    let traj = evtrap(&[&["trajectory", "--out", &out_arg(&a)][..], &common[..]].concat());
    let ens = evtrap(&[&["ensemble", "--n-traj", "1", "--out", &out_arg(&b)][..], &common[..]].concat());
    assert_eq!(traj.status.code(), Some(0));
    assert_eq!(ens.status.code(), Some(0));
    let ta = data_lines(&a.path().join("outcomes.csv"));
    let tb = data_lines(&b.path().join("outcomes.csv"));
    assert_eq!(ta[0], OUTCOME_HEADER);
    assert_eq!(ta, tb);

    let t: serde_json::Value = serde_json::from_slice(&traj.stdout).unwrap();
    let e: serde_json::Value = serde_json::from_slice(&ens.stdout).unwrap();
    let trapped = t["outcome"]["status"] == "trapped-at-horizon";
    assert_eq!(e["ensemble"]["plateau"].as_f64().unwrap(), if trapped { 1.0 } else { 0.0 });
    assert_eq!(e["ensemble"]["mean_bounces"].as_f64().unwrap(), t["outcome"]["bounces"].as_f64().unwrap());
}

#[test]
fn ensemble_tables_and_worker_independence() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let run = |d: &TempDir, workers: &str| {
        evtrap(&[
            "ensemble", "--n-traj", "6", "--horizon", "600", "--seed", "5", "--workers", workers, "--out",
            &out_arg(d),
        ])
    };
    assert_eq!(run(&a, "1").status.code(), Some(0));
    assert_eq!(run(&b, "3").status.code(), Some(0));
    for name in ["trapping.csv", "energy.csv", "outcomes.csv"] {
        assert_eq!(data_lines(&a.path().join(name)), data_lines(&b.path().join(name)), "{name}");
    }
    let trapping = data_lines(&a.path().join("trapping.csv"));
    assert_eq!(trapping[0], "t,p_trapped");
    assert_eq!(trapping.len(), 1 + 12);
    let p: Vec<f64> = trapping[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0]));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("ensemble_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert!(summary["ensemble"]["plateau_std_error"].is_number());
}
