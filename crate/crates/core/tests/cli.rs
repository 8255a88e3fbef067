use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otflow::construct::{analyze_matrix, lattice_chart};
use otflow::diagnostics::{parse_csv, CSV_HEADER};
use otflow::modelgeom::ModelParams;
use otflow::solver::{initial_potential, write_snapshot, InitMode, NormMode, PotentialState, Snapshot};

fn otflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otflow"))
        .args(args)
        .current_dir(dir)
        .env("OTFLOW_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn small_config(dir: &Path, extra: serde_json::Value) -> PathBuf {
    let mut cfg = serde_json::json!({
        "matrix": "0,1,0;0,0,1;1,1,0",
        "N_u": 4,
        "N_f": 4,
        "init": {"mode": "noise", "amplitude": "auto", "seed": 3},
        "t_end": 0.2,
        "dt_max": 0.01,
        "diag_dt": 0.05,
        "snapshot_dt": 0.1,
        "output": {"csv_path": "out.csv", "snapshot_dir": "snaps"}
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn construct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = otflow(dir.path(), &["construct", "0,1,0;0,0,1;1,1,0"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 1.324_717_957_2).abs() < 1e-9);
    assert!((v["lambda_abs_mu_sq"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = otflow(dir.path(), &["construct", "1,0,0;0,1,0;0,0,1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("real roots"));
    assert_eq!(code(&otflow(dir.path(), &["construct", "1,0;x"])), 1);
    assert_eq!(code(&otflow(dir.path(), &["construct", "2,0,0;0,1,0;0,0,1"])), 2);
}

#[test]
fn model_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = otflow(dir.path(), &["model", "--a", "2", "--b", "3", "--t", "0,1", "--imw", "1,2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 4);
    let p = &pts[1];
    assert_eq!(p["imw"], 2.0);
    assert_eq!(p["metric"]["gH"][0], 0.5);
    assert_eq!(p["metric"]["gC"][0], 6.0);
    assert_eq!(p["chern"]["ww_ww"][0], -2.0 / 32.0);
    assert_eq!(p["bismut_ricci"], -0.1875);
    assert_eq!(code(&otflow(dir.path(), &["model", "--a=-1"])), 1);
    assert_eq!(code(&otflow(dir.path(), &["model", "--imw", "0"])), 1);
}

#[test]
fn run_writes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), serde_json::json!({}));
    let o = otflow(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(dir.path().join("out.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = parse_csv(&first[..]).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.flow_residual.is_some() && r.r_weighted_min.is_none()));
    assert!(text.lines().skip(1).all(|l| l.ends_with(',')));
    let snaps: Vec<_> = std::fs::read_dir(dir.path().join("snaps")).unwrap().collect();
    assert_eq!(snaps.len(), 3);

    let o = otflow(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(dir.path().join("out.csv")).unwrap(), first);

    let o = otflow(dir.path(), &["diag", "snaps", "--csv", "re.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let re = parse_csv(&std::fs::read(dir.path().join("re.csv")).unwrap()[..]).unwrap();
    assert_eq!(re.len(), 3);
    assert_eq!(re[1].sup_tr_g_h, rows[2].sup_tr_g_h);
}

#[test]
fn run_rejects_invalid_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), serde_json::json!({"N_f": 3}));
    let o = otflow(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("N_f"));
    let cfg = small_config(dir.path(), serde_json::json!({"matrix": "1,0,0;0,1,0;0,0,1"}));
    assert_eq!(code(&otflow(dir.path(), &["run", cfg.to_str().unwrap()])), 1);
    assert_eq!(code(&otflow(dir.path(), &["run", "missing.json"])), 1);
    let cfg = small_config(dir.path(), serde_json::json!({"stretch_tier": true}));
    assert_eq!(code(&otflow(dir.path(), &["run", cfg.to_str().unwrap()])), 1);
}

fn plastic_chart(n_u: usize, n_f: usize) -> otflow::construct::GridChart {
    let s = analyze_matrix(&[[0, 1, 0], [0, 0, 1], [1, 1, 0]]).unwrap();
    lattice_chart(&s, 1.0, n_u, n_f).unwrap()
}

fn snapshot(chart: &otflow::construct::GridChart, t: f64, phi: Vec<f64>) -> Snapshot {
    let st = PotentialState::new(chart.clone(), t, phi, ModelParams::single(1.0, 1.0).unwrap(), NormMode::Improved, 1.0)
        .unwrap();
    Snapshot::from_state(&st)
}

#[test]
fn solver_failure_exits_3_with_time() {
    let dir = tempfile::tempdir().unwrap();
    let chart = plastic_chart(4, 4);
    let spike: Vec<f64> = (0..chart.len()).map(|k| if k == 20 { 50.0 } else { 0.0 }).collect();
    write_snapshot(&dir.path().join("spike.bin"), &snapshot(&chart, 0.0, spike)).unwrap();
    let cfg = small_config(
        dir.path(),
        serde_json::json!({"init": {"mode": "file", "path": dir.path().join("spike.bin")}}),
    );
    let o = otflow(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("t = 0"));
}

#[test]
fn envelope_violation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("snaps");
    std::fs::create_dir(&snaps).unwrap();
    let chart = plastic_chart(8, 4);
    let params = ModelParams::single(1.0, 1.0).unwrap();
    let rough = initial_potential(&chart, &InitMode::Noise { amplitude: None, seed: 42 }, &params).unwrap();
    write_snapshot(&snaps.join("a.bin"), &snapshot(&chart, 0.0, vec![0.0; chart.len()])).unwrap();
    write_snapshot(&snaps.join("b.bin"), &snapshot(&chart, 1.0, rough)).unwrap();
    let o = otflow(dir.path(), &["diag", "snaps"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trace_gH_hH"));
    std::fs::write(snaps.join("c.bin"), b"garbage").unwrap();
    assert_eq!(code(&otflow(dir.path(), &["diag", "snaps"])), 1);
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    let o = otflow(dir.path(), &["verify", "formulas"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS  gk_order"));
    assert_eq!(code(&otflow(dir.path(), &["verify", "nothing"])), 1);
}

#[test]
fn presets_run_clean() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["model.json", "noise.json"] {
        let o = otflow(dir.path(), &["run", preset(name).to_str().unwrap()]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(code(&o), 0, "{name}: {stdout}");
        assert!(!stdout.contains("FAIL"));
    }
    let noise = parse_csv(&std::fs::read(dir.path().join("noise.csv")).unwrap()[..]).unwrap();
    assert_eq!(noise.last().unwrap().t, 8.0);
    assert!(noise.iter().all(|r| r.sup_phi.is_finite() && r.sup_tr_g_h.is_finite()));
    let model = parse_csv(&std::fs::read(dir.path().join("model.csv")).unwrap()[..]).unwrap();
    let last = model.last().unwrap();
    assert_eq!(last.t, 5.0);
    // |φ(t)| ≤ (t/3) e^{−t} for the exact model path
    assert!(last.sup_abs_phi() <= 5.0 * (-5.0f64).exp() * 6.0 / 3.0 + 1e-8);
    assert!(model.iter().all(|r| r.r_weighted_min.is_some()));
}
