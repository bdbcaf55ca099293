use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use joss_cli::{RunFile, SweepRow};
use joss_core::models::ModelSet;

fn joss(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_joss")).args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let o = joss(args, dir);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn failing(args: &[&str], dir: &Path) -> String {
    let o = joss(args, dir);
    assert!(!o.status.success(), "{args:?} should fail");
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(!err.trim().is_empty());
    err
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn profile_fit_run_through_files() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    ok(&["platform", "--out", "tx2.toml"], dir);
    ok(&["profile", "--platform", "tx2.toml", "--out", "prof"], dir);
    assert_eq!(csv_rows(&dir.join("prof/profile.csv")).len(), 10250);
    let out = ok(
        &["fit", "--platform", "tx2.toml", "--profile", "prof/profile.csv", "--idle", "prof/idle.csv", "--out", "m"],
        dir,
    );
    assert!(out.contains("median"));

    let models: ModelSet = serde_json::from_str(&fs::read_to_string(dir.join("m/models.json")).unwrap()).unwrap();
    assert_eq!(models.options.len(), 5);
    let coef = csv_rows(&dir.join("m/coefficients.csv"));
    assert_eq!(coef.len(), 5 * (10 + 6 + 10));
    assert!(coef.iter().filter(|r| &r[2] == "time").count() == 50);

    ok(&["fit", "--platform", "tx2.toml", "--profile", "prof/profile.csv", "--idle", "prof/idle.csv", "--out", "m2"], dir);
    assert_eq!(fs::read(dir.join("m/models.json")).unwrap(), fs::read(dir.join("m2/models.json")).unwrap());

    ok(
        &[
            "run", "--platform", "tx2.toml", "--models", "m/models.json", "--workload", "stencil", "--scheduler", "joss",
            "--seed", "7", "--out", "r", "--trace",
        ],
        dir,
    );
    let run: RunFile = serde_json::from_str(&fs::read_to_string(dir.join("r/report.json")).unwrap()).unwrap();
    assert_eq!(run.report.scheduler, "joss");
    assert!(run.report.total_energy_j > 0.0);
    assert_eq!(csv_rows(&dir.join("r/summary.csv")).len(), 1);
    let trace = fs::read_to_string(dir.join("r/trace.txt")).unwrap();
    assert!(trace.lines().count() > run.report.tasks);
}

#[test]
fn compare_normalizes_to_grws() {
    let d = tempfile::tempdir().unwrap();
    ok(
        &["compare", "--workload", "memory-chain", "--schedulers", "grws,steer,joss", "--seed", "1", "--out", "c"],
        d.path(),
    );
    let rows = csv_rows(&d.path().join("c/compare.csv"));
    assert_eq!(rows.len(), 3);
    let grws = rows.iter().find(|r| &r[0] == "grws").unwrap();
    let hdr = csv::Reader::from_path(d.path().join("c/compare.csv")).unwrap().headers().unwrap().clone();
    let col = |name: &str| hdr.iter().position(|h| h == name).unwrap();
    assert_eq!(grws[col("normalized_energy")].parse::<f64>().unwrap(), 1.0);
    assert_eq!(grws[col("normalized_time")].parse::<f64>().unwrap(), 1.0);
    let joss = rows.iter().find(|r| &r[0] == "joss").unwrap();
    assert!(joss[col("normalized_energy")].parse::<f64>().unwrap() < 1.0);
}

#[test]
fn sweep_covers_the_grid() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(&["sweep", "--kernel", "stream", "--out", "s.csv"], d.path());
    assert!(out.starts_with("250 configurations"));
    let rows: Vec<SweepRow> =
        csv::Reader::from_path(d.path().join("s.csv")).unwrap().deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 250);
    let best = joss_cli::argmin_energy(&rows);
    assert!(rows.iter().all(|r| r.total_energy_j >= best.total_energy_j));
    assert!(out.contains(&format!("<{}, {}, ", best.cluster, best.n_cores)));
}

#[test]
fn speedup_goals_are_reported() {
    let d = tempfile::tempdir().unwrap();
    for (goal, dir) in [("speedup:1.5", "a"), ("max_perf", "b")] {
        ok(&["run", "--workload", "compute-chain", "--goal", goal, "--seed", "3", "--out", dir], d.path());
        let run: RunFile = serde_json::from_str(&fs::read_to_string(d.path().join(dir).join("report.json")).unwrap()).unwrap();
        assert!(run.reference_makespan_s.unwrap() > 0.0);
        assert!(run.achieved_speedup.unwrap() > 0.0);
        if goal == "max_perf" {
            assert!(run.target_speedup.is_none());
        } else {
            assert_eq!(run.target_speedup, Some(1.5));
        }
    }
}

#[test]
fn experiment_file_drives_a_run() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("exp.toml"),
        r#"
name = "tiny-chain"
scheduler = "aequitas"
goal = "min_energy"
seed = 5
out = "exp-out"

[workload]
kind = "chain"
n_tasks = 400
dop = 2

[workload.kernel]
name = "mid"
ops = 0.01
bytes = 0.005
kappa = 0.7
mu = 0.1
"#,
    )
    .unwrap();
    ok(&["run", "--config", "exp.toml", "--out", "exp-out"], d.path());
    let run: RunFile =
        serde_json::from_str(&fs::read_to_string(d.path().join("exp-out/report.json")).unwrap()).unwrap();
    assert_eq!(run.workload, "tiny-chain");
    assert_eq!(run.report.scheduler, "aequitas");
    assert_eq!(run.report.tasks, 400);
    assert_eq!(run.seed, 5);
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert!(failing(&["run", "--workload", "no-such-thing", "--seed", "1"], dir).contains("no-such-thing"));
    failing(&["run", "--workload", "stencil"], dir);
    failing(&["run", "--workload", "stencil", "--seed", "1", "--goal", "speedup:0.5"], dir);
    failing(&["run", "--workload", "stencil", "--seed", "1", "--models", "missing.json"], dir);
    failing(&["fit", "--profile", "missing.csv", "--idle", "missing.csv"], dir);
    fs::write(dir.join("bad.toml"), "this is = = not toml").unwrap();
    failing(&["run", "--config", "bad.toml"], dir);
    failing(&["sweep", "--kernel", "bad.toml"], dir);
    fs::write(dir.join("p.csv"), "kernel,cluster\nx,denver\n").unwrap();
    fs::write(dir.join("i.csv"), "domain,freq_ghz,watts\n").unwrap();
    failing(&["fit", "--profile", "p.csv", "--idle", "i.csv"], dir);
}
