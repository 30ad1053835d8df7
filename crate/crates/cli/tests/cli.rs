use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aimd-alloc"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

const SMALL: &str = r#"
name = "small"
n = 4
algorithm = "aimd"
horizon = 300
seed = 3
[utility]
family = "log"
eta = { uniform = [0.0, 1.0] }
chi = { uniform = [40.0, 60.0] }
"#;

#[test]
fn one_round_gives_one_row_per_agent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &SMALL.replace("horizon = 300", "horizon = 1"));
    let out = run(&["run"], &cfg, &dir.path().join("o"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    let lines: Vec<_> = trace.lines().collect();
    assert_eq!(lines[0], "t,agent,x,xbar,lambda,signal,sum_x");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1..].iter().all(|l| l.starts_with("1,")));
}

#[test]
fn out_of_range_beta_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SMALL}\n[aimd]\nbeta = 1.2\n"));
    let out = run(&["run"], &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`aimd.beta`"), "{err}");
    assert!(!dir.path().join("o/trace.csv").exists());
}

#[test]
fn parse_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SMALL}\nhorizon = \"long\"\n"));
    let out = run(&["run"], &cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run"], &dir.path().join("nope.toml"), &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    for o in ["a", "b"] {
        assert!(run(&["run"], &cfg, &dir.path().join(o)).status.success());
    }
    for f in ["trace.csv", "summary.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = bin()
        .args(["run", "--seed", "11", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary = fs::read_to_string(dir.path().join("o/summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 11"), "{summary}");
}

#[test]
fn single_value_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    assert!(run(&["run"], &cfg, &dir.path().join("r")).status.success());
    let out = run(&["sweep", "--axis", "L", "--values", "0"], &cfg, &dir.path().join("s"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = fs::read_to_string(dir.path().join("r/summary.json")).unwrap();
    let table = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let rows: Vec<_> = table.lines().collect();
    assert_eq!(rows.len(), 2);
    let header: Vec<_> = rows[0].split(',').collect();
    let cells: Vec<_> = rows[1].split(',').collect();
    for key in [
        "efficiency",
        "sum_xbar",
        "converged_round",
        "objective_optimal",
        "capacity",
    ] {
        let cell = cells[header.iter().position(|h| *h == key).unwrap()];
        let cell = if cell.is_empty() { "null" } else { cell };
        assert!(
            summary.contains(&format!("\"{key}\": {cell}")),
            "{key} = {cell} not in {summary}"
        );
    }
}

#[test]
fn sweep_rows_follow_value_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = run(
        &["sweep", "--axis", "n", "--values", "3,1,2"],
        &cfg,
        &dir.path().join("s"),
    );
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let firsts: Vec<_> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(firsts, ["3", "1", "2"]);
}

#[test]
fn unknown_axis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = run(
        &["sweep", "--axis", "beta", "--values", "0.5"],
        &cfg,
        &dir.path().join("s"),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn single_user_baseline_takes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "n = 1\n[capacity]\nabsolute = 12.5\n[utility]\nfamily = \"log\"\neta = 0.3\nchi = 40.0\n",
    );
    let out = run(&["baseline"], &cfg, &dir.path().join("b"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read_to_string(dir.path().join("b/baseline.json")).unwrap();
    assert!(json.contains("\"x_star\": [\n    12.5\n  ]"), "{json}");
}

#[test]
fn two_player_nash() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["nash"], &scenarios().join("poa-two-player.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read_to_string(dir.path().join("nash.json")).unwrap();
    assert!(json.contains("\"converged\": true"));
    assert!(json.contains("6.035148"), "{json}");
    assert!(json.contains("5.185010"), "{json}");
}

#[test]
fn nash_table_over_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["nash", "--axis", "n", "--values", "2,10,50"],
        &scenarios().join("poa-n-sweep.toml"),
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read_to_string(dir.path().join("nash.json")).unwrap();
    let poas: Vec<f64> = json
        .lines()
        .filter_map(|l| l.trim().strip_prefix("\"poa\": "))
        .map(|v| v.trim_end_matches(',').parse().unwrap())
        .collect();
    assert_eq!(poas.len(), 3);
    assert!(poas[0] > poas[1] && poas[1] > poas[2], "{poas:?}");
}

#[test]
fn nash_non_convergence_exits_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("poa-two-player.toml"))
        .unwrap()
        .replace("max_iters = 10000", "max_iters = 1");
    let cfg = write(dir.path(), "g.toml", &text);
    let out = run(&["nash"], &cfg, &dir.path().join("n"));
    assert_eq!(out.status.code(), Some(2));
    let json = fs::read_to_string(dir.path().join("n/nash.json")).unwrap();
    assert!(json.contains("\"converged\": false"));
}

#[test]
fn help_lists_defaults() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("beta = 0.85"));
    assert!(text.contains("horizon = 10000"));
}

#[test]
fn shipped_scenarios_parse() {
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        aimd_alloc_check(&text, &path);
    }
}

fn aimd_alloc_check(text: &str, path: &Path) {
    // The CLI crate only sees the library through the binary, so validate by
    // asking for a baseline, which parses and resolves the whole file.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &text.replace("baseline_bins = 2000", "baseline_bins = 200"),
    );
    let out = run(&["baseline"], &cfg, dir.path());
    assert!(
        out.status.success(),
        "{}: {}",
        path.display(),
        String::from_utf8_lossy(&out.stderr)
    );
}
