use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use goalworld::agents::build_inverse_dataset;
use goalworld::eval::{EvalReport, EvalSpec};
use goalworld::task::{read_jsonl, EpisodeLog, GoalType};
use tempfile::TempDir;

const SMALL: &str = "\
seed = 5

[gen]
worlds = 4
unseen_worlds = 1
episodes_per_world = 30
valid_per_world = 2
test_per_world = 8

[encoder]
hash_dim = 4096
dim = 16

[env_agent]
speech_epochs = 1
actions_epochs = 2

[inverse]
epochs = 2

[topic]
epochs = 1

[a2c]
max_updates = 3
batch_episodes = 8

[eval]
episodes = 40
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_goalworld"));
    c.stdin(Stdio::null());
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let mut c = bin();
    c.arg(args[0]).arg("--config").arg(dir.join("small.conf")).arg("--out").arg(dir.join("data")).args(&args[1..]);
    c.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\n{}\n{}", o.status.code(), stdout(&o), stderr(&o));
    o
}

fn fresh() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    dir
}

/// A data root with a generated corpus and trained env agent and inverse
/// models, shared by every test in this binary.
fn prepared() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = fresh();
        ok(run(dir.path(), &["gen"]));
        ok(run(dir.path(), &["train-inverse"]));
        dir
    })
    .path()
}

fn error_line(o: &Output) -> String {
    let e = stderr(o);
    let lines: Vec<&str> = e.lines().collect();
    assert_eq!(lines.len(), 1, "expected one error line, got:\n{e}");
    lines[0].to_string()
}

#[test]
fn gen_writes_a_corpus_that_validates() {
    let dir = fresh();
    ok(run(dir.path(), &["gen"]));
    let corpus = dir.path().join("data/corpus");
    assert!(corpus.is_dir());
    assert!(fs::read_dir(&corpus).unwrap().count() > 0);
    ok(run(dir.path(), &["validate"]));
}

#[test]
fn topic_without_clusters_is_a_config_error() {
    let o = run(prepared(), &["train-rl", "--model", "topic"]);
    assert_eq!(o.status.code(), Some(3));
    let line = error_line(&o);
    assert!(line.starts_with("error kind=config code=3:"), "{line}");
    assert!(line.contains("model.clusters"), "{line}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = bin().args(["gen", "--no-such-flag"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["eval", "--model", "bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o).starts_with("error kind=usage code=2:"));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = fresh();
    let o = run(dir.path(), &["train-inverse"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(error_line(&o).starts_with("error kind=data code=4:"));
}

#[test]
fn missing_config_file_is_a_data_error() {
    let o = bin().args(["gen", "--config", "/nonexistent/run.conf"]).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bad_config_value_is_a_config_error() {
    let dir = fresh();
    fs::write(dir.path().join("small.conf"), "[a2c]\ngamma = lots\n").unwrap();
    let o = run(dir.path(), &["gen"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(error_line(&o).contains("gamma"));
}

#[test]
fn printed_config_parses_back_to_itself() {
    let dir = fresh();
    let first = stdout(&ok(run(dir.path(), &["gen", "--print-config"])));
    fs::write(dir.path().join("small.conf"), &first).unwrap();
    let second = stdout(&ok(run(dir.path(), &["gen", "--print-config"])));
    assert_eq!(first, second);
    assert!(first.contains("max_updates = 3"));
}

fn reports_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|d| d.map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn sweep_writes_one_report_per_cluster_count() {
    let dir = prepared();
    let reports_dir = dir.join("data/reports");
    let before = reports_in(&reports_dir);
    let o = ok(run(dir, &["sweep", "--model", "topic", "--clusters", "10,25,50"]));
    let new: Vec<PathBuf> = reports_in(&reports_dir).into_iter().filter(|p| !before.contains(p)).collect();
    let mut seen: Vec<String> = new
        .iter()
        .filter_map(|p| {
            let r = EvalReport::from_json(&fs::read_to_string(p).unwrap()).unwrap();
            (r.model.starts_with("topic")).then(|| r.config["clusters"].clone())
        })
        .collect();
    seen.sort();
    assert_eq!(seen, ["10", "25", "50"], "{}", stdout(&o));

    let out = stdout(&ok(bin().arg("report").args(&new).output().unwrap()));
    assert!(out.contains("Reward"));
}

#[test]
fn eval_baseline_writes_a_parseable_report() {
    let dir = prepared();
    let o = ok(run(dir, &["eval", "--model", "random"]));
    let path = stdout(&o).lines().find_map(|l| l.strip_prefix("report -> ").map(PathBuf::from)).expect("report path");
    let r = EvalReport::from_json(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(r.episodes, 40);
    assert!((0.0..=1.0).contains(&r.mean_reward));
}

#[test]
fn report_of_a_missing_file_is_a_data_error() {
    let o = bin().args(["report", "/nonexistent/report.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

fn logs(path: &Path) -> Vec<EpisodeLog> {
    read_jsonl(path).unwrap()
}

#[test]
fn scripted_player_session_gives_a_usable_log() {
    let dir = prepared();
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.txt");
    fs::write(&input, "hello there\nplease get the lantern\nthank you\n").unwrap();
    let log = tmp.path().join("play.jsonl");
    let o = ok(run(
        dir,
        &["play", "--horizon", "3", "--input", input.to_str().unwrap(), "--log", log.to_str().unwrap()],
    ));
    let text = stdout(&o);
    assert!(text.contains("goal:"));
    assert!(text.contains("hello there"));
    let logs = logs(&log);
    assert_eq!(logs.len(), 1);
    assert!(!logs[0].partial || logs[0].turns_used < 3);
    let spec = EvalSpec { model: "human".into(), split: "test_seen".into(), goal_type: GoalType::GameAct, horizon: 3, seed: 0 };
    EvalReport::from_logs(&spec, &logs).unwrap();
}

#[test]
fn env_side_session_feeds_the_inverse_dataset() {
    let dir = prepared();
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.txt");
    fs::write(&input, "i am busy\n0\nvery well\n1\nno\n0\n").unwrap();
    let log = tmp.path().join("play.jsonl");
    ok(run(
        dir,
        &["play", "--side", "env", "--horizon", "3", "--input", input.to_str().unwrap(), "--log", log.to_str().unwrap()],
    ));
    let logs = logs(&log);
    let refs: Vec<&EpisodeLog> = logs.iter().collect();
    let data = build_inverse_dataset(&refs).unwrap();
    assert_eq!(data.len(), logs[0].env_actions().count());
}

#[test]
fn truncated_input_saves_a_partial_log() {
    let dir = prepared();
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.txt");
    fs::write(&input, "").unwrap();
    let log = tmp.path().join("play.jsonl");
    let o = ok(run(dir, &["play", "--horizon", "3", "--input", input.to_str().unwrap(), "--log", log.to_str().unwrap()]));
    assert!(stdout(&o).contains("partial"));
    assert!(logs(&log)[0].partial);
}

#[test]
fn spectate_needs_no_input() {
    let dir = prepared();
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("play.jsonl");
    let o = ok(run(dir, &["play", "--side", "spectate", "--model", "inverse", "--log", log.to_str().unwrap()]));
    let text = stdout(&o);
    assert!(text.contains("goal achieved") || text.contains("goal not achieved"));
    assert!(!logs(&log)[0].partial);
}

#[test]
fn out_of_range_episode_is_a_usage_error() {
    let o = run(prepared(), &["play", "--side", "spectate", "--episode", "100000"]);
    assert_eq!(o.status.code(), Some(2));
}
