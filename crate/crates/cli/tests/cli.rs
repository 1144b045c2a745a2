use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rendezvous_cli::gains::GainsFile;
use rendezvous_cli::report::ReportDoc;
use rendezvous_cli::scenario::{ScenarioFile, BUNDLED};

fn rendezvous(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rendezvous")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut ScenarioFile)) -> PathBuf {
    let mut f = ScenarioFile::parse(BUNDLED).unwrap();
    edit(&mut f);
    let p = dir.join(name);
    std::fs::write(&p, f.to_toml().unwrap()).unwrap();
    p
}

fn write_gain(dir: &Path, k: [[f64; 6]; 3]) -> PathBuf {
    let mut g = GainsFile::default();
    g.set("k", &nalgebra::DMatrix::from_fn(3, 6, |i, j| k[i][j]));
    let p = dir.join("gain.toml");
    std::fs::write(&p, g.to_toml().unwrap()).unwrap();
    p
}

fn read_rows(p: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x,y,z,vx,vy,vz,fx,fy,fz,wq,Jp,Jq,Jtotal");
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

fn min_thrust(scenario: &Path) -> f64 {
    let o = rendezvous(&["min-thrust", "--scenario", path(scenario)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let v = s.split(':').nth(1).unwrap().split_whitespace().next().unwrap();
    v.parse().unwrap()
}

#[test]
fn exit_codes_for_usage() {
    assert_eq!(code(&rendezvous(&["--help"])), 0);
    assert_eq!(code(&rendezvous(&["--version"])), 0);
    assert_eq!(code(&rendezvous(&[])), 1);
    assert_eq!(code(&rendezvous(&["launch"])), 1);
    assert_eq!(code(&rendezvous(&["synth", "--which", "sideways"])), 1);
    assert_eq!(code(&rendezvous(&["synth", "--scenario", "/nonexistent/scenario.toml"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[orbit]\na_km = 7000.0\ne = 1.5\n").unwrap();
    assert_eq!(code(&rendezvous(&["synth", "--scenario", path(&bad)])), 1);
    let o = rendezvous(&["simulate", "--out", path(dir.path()), "--step", "-1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn out_of_plane_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = rendezvous(&["synth", "--which", "out-of-plane", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("report_out_of_plane.toml")).unwrap();
    let doc: ReportDoc = toml::from_str(&text).unwrap();
    assert_eq!(doc.bound_kind, "gamma");
    assert!((doc.bound - 1.000778383).abs() / 1.000778383 <= 1e-3, "gamma {}", doc.bound);
    assert!(doc.certificate_max_eigenvalue < 0.0);
    assert_eq!(doc.k.len(), 1);
    assert_eq!(doc.k[0].len(), 2);
    assert!(doc.verification.lmi_residuals.iter().all(|r| r.max_eigenvalue <= 1e-7));
}

#[test]
fn partially_independent_gain_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let o = rendezvous(&["synth", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0);
    let g = GainsFile::load(&dir.path().join("gains_partially_independent.toml")).unwrap();
    let k = g.select(rendezvous_cli::gains::GainChoice::K).unwrap();
    for (i, j) in [(0, 2), (0, 5), (1, 2), (1, 5), (2, 0), (2, 1), (2, 3), (2, 4)] {
        assert_eq!(k[(i, j)], 0.0, "entry ({i}, {j})");
    }
    assert_eq!(k, g.k_pic().unwrap());
    for name in ["report_in_plane.toml", "report_out_of_plane.toml"] {
        assert!(dir.path().join(name).exists());
    }
}

#[test]
fn low_thrust_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), "weak.toml", |f| {
        f.chaser.u_px_max_N = 1.0;
        f.chaser.u_py_max_N = 1.0;
    });
    let o = rendezvous(&["synth", "--which", "in-plane", "--scenario", path(&s), "--out", path(dir.path())]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("report_in_plane.toml").exists());
}

#[test]
fn zero_gain_from_rest_stays_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), "rest.toml", |f| {
        f.initial_state.position_m = [0.0; 3];
        f.initial_state.velocity_m_s = [0.0; 3];
        f.disturbance.clear();
    });
    let g = write_gain(dir.path(), [[0.0; 6]; 3]);
    let o = rendezvous(&[
        "simulate", "--scenario", path(&s), "--gains", path(&g), "--out", path(dir.path()), "--duration", "500",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows.len(), 501);
    for r in &rows {
        assert!(r[1..].iter().all(|v| v.abs() < 1e-6), "t = {}: {:?}", r[0], r);
    }
}

#[test]
fn printed_gains_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let pic = rendezvous(&["simulate", "--out", out, "--name", "pic.csv", "--gain", "pic"]);
    assert_eq!(code(&pic), 0);
    let cc = rendezvous(&["simulate", "--out", out, "--name", "cc.csv", "--gain", "cc"]);
    assert_eq!(code(&cc), 0);

    let pic = read_rows(&dir.path().join("pic.csv"));
    let cc = read_rows(&dir.path().join("cc.csv"));
    assert_eq!(pic.len(), 10001);
    assert_eq!(pic.last().unwrap()[0], 10000.0);
    let max_z = |rows: &[Vec<f64>]| rows.iter().map(|r| r[3].abs()).fold(0.0, f64::max);
    assert!(max_z(&cc) >= 10.0 * max_z(&pic));
    for r in &pic {
        assert!(r[7].abs() <= 15.0 && r[8].abs() <= 15.0 && r[9].abs() <= 5.0);
        assert!(r[13].is_finite());
    }
    assert!(pic.windows(2).all(|w| w[1][13] >= w[0][13]));

    let o = rendezvous(&[
        "compare",
        path(&dir.path().join("pic.csv")),
        path(&dir.path().join("cc.csv")),
        "--at",
        "5000",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("lower: a"));
    assert!(dir.path().join("comparison.csv").exists());
}

#[test]
fn compare_rejects_mismatched_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(code(&rendezvous(&["simulate", "--out", out, "--name", "a.csv", "--duration", "20"])), 0);
    assert_eq!(code(&rendezvous(&["simulate", "--out", out, "--name", "b.csv", "--duration", "30"])), 0);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(code(&rendezvous(&["compare", path(&a), path(&b)])), 1);
    let o = rendezvous(&["compare", path(&a), path(&a)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("lower: equal"));
}

#[test]
fn minimum_thrust_responds_to_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let base = write_scenario(dir.path(), "base.toml", |_| {});
    let heavy = write_scenario(dir.path(), "heavy.toml", |f| f.chaser.m_kg *= 2.0);
    let circular = write_scenario(dir.path(), "circular.toml", |f| f.orbit.e = 0.0);
    let u = min_thrust(&base);
    assert!((u - 6.8).abs() <= 0.2, "{u}");
    assert!(min_thrust(&heavy) > u);
    assert!(min_thrust(&circular) <= u);
}

#[test]
fn scenario_file_round_trip() {
    let f = ScenarioFile::parse(BUNDLED).unwrap();
    let back = ScenarioFile::parse(&f.to_toml().unwrap()).unwrap();
    assert_eq!(back, f);
}

#[test]
fn reproduction_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = rendezvous(&["reproduce-paper", "--out", path(d), "--duration", "300"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["pic.csv", "cc.csv", "ltv_cost.csv", "summary.txt", "report_in_plane.toml", "min_thrust.toml"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let summary = std::fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("criterion  2: PASS"));
    assert!(summary.contains("clamped"));
}

#[test]
fn divergence_writes_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), "strong.toml", |f| {
        f.chaser.u_px_max_N = 1e15;
        f.chaser.u_py_max_N = 1e15;
        f.chaser.u_q_max_N = 1e15;
        f.disturbance.clear();
    });
    let mut k = [[0.0; 6]; 3];
    k[0][0] = -1000.0;
    let g = write_gain(dir.path(), k);
    let o = rendezvous(&["simulate", "--scenario", path(&s), "--gains", path(&g), "--out", path(dir.path())]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("trajectory.csv"));
    assert!(!rows.is_empty());
    assert!(rows.last().unwrap()[0] < 10000.0);
}
