use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bspop"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bspop")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[idx].to_string()).collect()
}

#[test]
fn run_reports_spline_variable_count() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("unicycle_box.json");
    let out = run(&[
        "run",
        "--scenario",
        s(&sc),
        "--planner",
        "bspop",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = dir.path().join("metrics.csv");
    assert_eq!(rows(&metrics).len(), 1);
    assert_eq!(column(&metrics, "control_vars"), vec!["8"]);
    assert_eq!(column(&metrics, "total_vars"), vec!["41"]);
    let traj = column(&metrics, "trajectory");
    let text = std::fs::read_to_string(dir.path().join(&traj[0])).unwrap();
    assert!(text.starts_with("t,x0,x1,x2,u0,u1,cycle\n"));
    assert!(dir.path().join("run.svg").exists());
}

#[test]
fn run_baseline_at_twenty_hertz() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("unicycle_box.json");
    let out = run(&[
        "run",
        "--scenario",
        s(&sc),
        "--planner",
        "baseline",
        "--rate",
        "20",
        "--timeout",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = dir.path().join("metrics.csv");
    assert_eq!(column(&metrics, "control_vars"), vec!["40"]);
    assert_eq!(column(&metrics, "total_vars"), vec!["103"]);
    // a time-limited run still completes successfully
    assert_eq!(column(&metrics, "outcome"), vec!["timeout"]);
}

#[test]
fn run_sweep_writes_one_row_per_heading() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("unicycle_box.json");
    let out = bin()
        .args([
            "run",
            "--scenario",
            s(&sc),
            "--sweep=-0.5:0.5:0.5",
            "--timeout",
            "2",
            "--out",
            s(dir.path()),
        ])
        .env("BSPOP_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = dir.path().join("metrics.csv");
    assert_eq!(column(&metrics, "heading"), vec!["-0.5", "0.0", "0.5"]);
    assert_eq!(std::fs::read_dir(dir.path().join("trajectories")).unwrap().count(), 3);
}

#[test]
fn compare_identical_variants_match() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("unicycle_diamond.json");
    let out = run(&[
        "compare",
        "--scenario",
        s(&sc),
        "--variant",
        "bspop:10",
        "--variant",
        "bspop:10",
        "--timeout",
        "3",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("planner"));
    let summary = dir.path().join("compare.csv");
    let r = rows(&summary);
    assert_eq!(r.len(), 2);
    // everything except the timing columns
    for name in [
        "planner",
        "rate",
        "runs",
        "reached",
        "length_mean",
        "control_vars",
        "total_vars",
    ] {
        let c = column(&summary, name);
        assert_eq!(c[0], c[1], "{name}");
    }
    let svg = std::fs::read_to_string(dir.path().join("compare.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);

    // the written experiment config reproduces the comparison
    let again = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("experiment.json");
    let text = std::fs::read_to_string(&cfg).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["out"] = serde_json::Value::String(s(again.path()).to_string());
    std::fs::write(&cfg, serde_json::to_string(&json).unwrap()).unwrap();
    let out = run(&["compare", "--config", s(&cfg), "--timeout", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        column(&again.path().join("compare.csv"), "length_mean"),
        column(&summary, "length_mean")
    );
}

fn write_traj(path: &Path, pts: &[(f64, f64)]) {
    let mut text = String::from("t,x0,x1,x2,u0,u1,cycle\n");
    for (k, (x, y)) in pts.iter().enumerate() {
        text.push_str(&format!("{},{x},{y},0,0,0,0\n", k as f64 * 0.01));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn plot_is_deterministic_and_classed_by_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("unicycle_box.json");
    let ok = dir.path().join("ok.csv");
    let bad = dir.path().join("bad.csv");
    write_traj(&ok, &[(-4.0, 0.0), (-2.0, 1.0), (0.5, -0.5)]);
    write_traj(&bad, &[(-4.0, 0.0), (-3.0, 0.5)]);
    let svg_a = dir.path().join("a.svg");
    let svg_b = dir.path().join("b.svg");
    for svg in [&svg_a, &svg_b] {
        let out = run(&["plot", "--scenario", s(&sc), "--out", s(svg), s(&ok), s(&bad)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&svg_a).unwrap();
    assert_eq!(a, std::fs::read(&svg_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.matches("class=\"trajectory reached\"").count(), 1);
    assert_eq!(text.matches("class=\"trajectory failed\"").count(), 1);
    assert_eq!(text.matches("class=\"obstacle\"").count(), 2);
}

#[test]
fn empty_plot_shows_obstacles_only() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("empty.svg");
    let out = run(&[
        "plot",
        "--scenario",
        s(&scenario("ackermann_corridor.json")),
        "--out",
        s(&svg),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(!text.contains("<polyline"));
    assert_eq!(text.matches("class=\"obstacle\"").count(), 3);
    assert_eq!(text.matches("class=\"corridor\"").count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("unicycle_box.json");

    let missing = run(&["run", "--scenario", s(&dir.path().join("none.json"))]);
    assert_eq!(missing.status.code(), Some(3));

    let v2 = dir.path().join("v2.json");
    let text = std::fs::read_to_string(&sc)
        .unwrap()
        .replacen("\"schema\": 1", "\"schema\": 2", 1);
    std::fs::write(&v2, text).unwrap();
    assert_eq!(run(&["run", "--scenario", s(&v2)]).status.code(), Some(2));

    assert_eq!(
        run(&["run", "--scenario", s(&sc), "--rate", "5000"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["run", "--scenario", s(&sc), "--planner", "mpc"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["run"]).status.code(), Some(2));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let unwritable = blocker.join("out");
    let out = run(&["run", "--scenario", s(&sc), "--timeout", "0.5", "--out", s(&unwritable)]);
    assert_eq!(out.status.code(), Some(3));

    let malformed = dir.path().join("m.csv");
    std::fs::write(&malformed, "t,x0,x1\n0,1,oops\n").unwrap();
    let out = run(&[
        "plot",
        "--scenario",
        s(&sc),
        "--out",
        s(&dir.path().join("m.svg")),
        s(&malformed),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let threads = bin()
        .args([
            "sweep",
            "--scenario",
            s(&sc),
            "--min",
            "0",
            "--max",
            "0",
            "--out",
            s(dir.path()),
        ])
        .env("BSPOP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}
