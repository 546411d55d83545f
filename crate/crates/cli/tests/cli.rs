use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mvactive::report::{aggregate_csv, mean_and_variance, parse_report_csv};

fn mvactive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvactive")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small dataset and a campaign config next to it.
fn fixture(dir: &Path) -> std::path::PathBuf {
    fs::write(
        dir.join("spec.toml"),
        "train_frames = 60\nheldout_frames = 12\nkeypoints = 6\ncameras = 4\nclusters = 4\n",
    )
    .unwrap();
    let out = mvactive(&["generate", "--config", p(&dir.join("spec.toml")), "--out", p(&dir.join("data.json"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = dir.join("campaign.toml");
    fs::write(
        &config,
        "dataset = \"data.json\"\nstrategy = \"mvc\"\ninit_labeled = 6\nbatch_per_iter = 4\niterations = 3\nclusters = 4\nseeds = [0]\n[st]\nenabled = true\nfraction = 0.5\n",
    )
    .unwrap();
    config
}

#[test]
fn run_with_three_seeds_writes_reports_and_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let run = tmp.path().join("run");
    let out = mvactive(&["run", "--config", p(&config), "--seed", "0,1,2", "--out", p(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut per_seed = Vec::new();
    for seed in 0..3 {
        let text = fs::read_to_string(run.join(format!("report_seed{seed}.csv"))).unwrap();
        let rows = parse_report_csv(&text).unwrap();
        assert_eq!(rows.len(), 4);
        per_seed.push(rows);
    }
    // the aggregate is exactly what the per-seed files recompute to
    let slices: Vec<&[_]> = per_seed.iter().map(Vec::as_slice).collect();
    let aggregate = fs::read_to_string(run.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate, aggregate_csv(&slices));

    let last: Vec<f64> = per_seed.iter().map(|r| r[3].mkpe_mm).collect();
    let (mean, var) = mean_and_variance(&last);
    let line: Vec<&str> = aggregate.lines().nth(4).unwrap().split(',').collect();
    assert_eq!(line[6].parse::<f64>().unwrap(), mean.unwrap());
    assert_eq!(line[7].parse::<f64>().unwrap(), var.unwrap());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let first = tmp.path().join("first");
    assert!(mvactive(&["run", "--config", p(&config), "--out", p(&first), "--seed", "5"]).status.success());

    let resolved = fs::read_to_string(first.join("config.toml")).unwrap();
    assert!(resolved.contains("failure_penalty_px2"));
    assert!(resolved.contains("[noise]"));
    assert!(resolved.contains("seeds = [5]"));

    let second = tmp.path().join("second");
    let out = mvactive(&["run", "--config", p(&first.join("config.toml")), "--out", p(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["config.toml", "report_seed5.csv", "selections_seed5.csv", "diagnostics_seed5.csv", "aggregate.csv"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let one = tmp.path().join("one");
    let four = tmp.path().join("four");
    assert!(mvactive(&["run", "--config", p(&config), "--out", p(&one), "--threads", "1"]).status.success());
    assert!(mvactive(&["run", "--config", p(&config), "--out", p(&four), "--threads", "4"]).status.success());
    assert_eq!(fs::read(one.join("report_seed0.csv")).unwrap(), fs::read(four.join("report_seed0.csv")).unwrap());
}

#[test]
fn strategy_override_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let run = tmp.path().join("run");
    assert!(mvactive(&["run", "--config", p(&config), "--out", p(&run), "--strategy", "coreset"]).status.success());
    assert!(fs::read_to_string(run.join("config.toml")).unwrap().contains("strategy = \"coreset\""));
}

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mvactive(&["run", "--config", p(&tmp.path().join("nope.toml")), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path());
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "dataset = \"data.json\"\niterations = 1000\n").unwrap();
    let out = mvactive(&["run", "--config", p(&bad), "--out", p(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&bad, "dataset = \"data.json\"\nbogus = 1\n").unwrap();
    assert_eq!(mvactive(&["run", "--config", p(&bad), "--out", p(tmp.path())]).status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(mvactive(&["run", "--strategy", "nope"]).status.code(), Some(2));
    assert_eq!(mvactive(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = mvactive(&["run", "--config", p(&config), "--out", p(&blocker.join("run"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn analyze_summarizes_entropy_and_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture(tmp.path());
    let run = tmp.path().join("run");
    assert!(mvactive(&["run", "--config", p(&config), "--out", p(&run), "--seed", "0,1"]).status.success());
    let out = mvactive(&["analyze", "--out", p(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, fs::read_to_string(run.join("analysis.csv")).unwrap());
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("seed,iteration,batch_entropy"));
    assert_eq!(lines.len(), 1 + 2 * 4);
    for line in &lines[1..] {
        let entropy: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&entropy));
    }

    assert_eq!(mvactive(&["analyze", "--out", p(&tmp.path().join("missing"))]).status.code(), Some(2));
}

#[test]
fn report_prints_cost_table() {
    let out = mvactive(&["report"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("iteration,labeled_count,active_learning_hours,conventional_hours"));
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    let c = tmp.path().join("c.json");
    assert!(mvactive(&["generate", "--out", p(&a), "--seed", "3"]).status.success());
    assert!(mvactive(&["generate", "--out", p(&b), "--seed", "3"]).status.success());
    assert!(mvactive(&["generate", "--out", p(&c), "--seed", "4"]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    mvactive::dataset_io::load_dataset(&a).unwrap();
}
