use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use solar_core::dataset::{read_dataset, EPISODES_FILE};

fn solar() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_solar"));
    c.env_remove("SOLAR_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    solar().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen(dir: &Path, task: &str, problems: &str, per: &str, gold: &str) -> Output {
    let d = dir.to_str().unwrap();
    run(&["generate", "--task", task, "--problems", problems, "--per-problem", per, "--gold", gold, "--seed", "5", "--out", d])
}

#[test]
fn generate_single_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gen(tmp.path(), "mirror", "1", "1", "1");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("episodes: 1\n"));
    assert!(!stdout(&out).contains("time:"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time: generate"));
    assert_eq!(read_dataset(tmp.path()).unwrap().episodes.len(), 1);
}

#[test]
fn seed_is_required_or_taken_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("a");
    let args = ["generate", "--task", "mirror", "--problems", "2", "--per-problem", "2", "--out", d.to_str().unwrap()];
    assert_eq!(code(&run(&args)), 2);
    let out = solar().args(args).env("SOLAR_SEED", "5").output().unwrap();
    assert_eq!(code(&out), 0);
    let b = tmp.path().join("b");
    assert_eq!(code(&gen(&b, "mirror", "2", "2", "1")), 0);
    assert_eq!(fs::read(d.join(EPISODES_FILE)).unwrap(), fs::read(b.join(EPISODES_FILE)).unwrap());
}

#[test]
fn jobs_do_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let base = ["generate", "--task", "diagonal", "--problems", "20", "--per-problem", "4", "--seed", "3", "--out"];
    assert_eq!(code(&solar().args(["--jobs", "1"]).args(base).arg(&a).output().unwrap()), 0);
    assert_eq!(code(&solar().args(["--jobs", "4"]).args(base).arg(&b).output().unwrap()), 0);
    for f in ["manifest.json", "episodes.jsonl", "segments.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_counts_and_unknown_task_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen(tmp.path(), "mirror", "2", "1", "3")), 2);
    assert_eq!(code(&gen(tmp.path(), "spiral", "2", "1", "1")), 2);
}

#[test]
fn validate_fresh_tampered_and_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert_eq!(code(&gen(&d, "diagonal", "5", "4", "1")), 0);
    let ds = d.to_str().unwrap();
    let ok = run(&["validate", "--data", ds, "--check-rule"]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).contains("violations: 0"));

    let path = d.join(EPISODES_FILE);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("\"reward\":0.0", "\"reward\":1.0", 1)).unwrap();
    let bad = run(&["validate", "--data", ds]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("digest mismatch"));

    let e = tmp.path().join("empty");
    assert_eq!(code(&gen(&e, "mirror", "0", "0", "0")), 0);
    let empty = run(&["validate", "--data", e.to_str().unwrap(), "--json"]);
    assert_eq!(code(&empty), 0);
    assert_eq!(stdout(&empty).trim(), r#"{"episodes_checked":0,"violations":[]}"#);

    assert_eq!(code(&run(&["validate", "--data", tmp.path().join("nope").to_str().unwrap()])), 3);
}

#[test]
fn segment_horizons() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    assert_eq!(code(&gen(&d, "mirror", "6", "1", "1")), 0);
    let ds = d.to_str().unwrap();
    let out = run(&["segment", "--data", ds, "--horizon", "5"]);
    assert!(stdout(&out).contains("segments: 6\n"));

    let one = tmp.path().join("h1");
    let out = run(&["segment", "--data", ds, "--horizon", "1", "--out", one.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let total: usize = read_dataset(&d).unwrap().episodes.iter().map(|e| e.steps.len()).sum();
    assert_eq!(read_dataset(&one).unwrap().segments.len(), total);
    assert_eq!(read_dataset(&one).unwrap().manifest.params.horizon, 1);

    assert_eq!(code(&run(&["segment", "--data", ds, "--horizon", "0"])), 2);
}

#[test]
fn inspect_renders_steps() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen(tmp.path(), "mirror", "1", "2", "1")), 0);
    let d = tmp.path().to_str().unwrap();
    let all = run(&["inspect", "--data", d, "--episode", "mirror_0_0_gold-standard"]);
    assert_eq!(code(&all), 0);
    let text = stdout(&all);
    assert!(text.contains("t=0 ResizeGrid") && text.contains("t=4 Submit"), "{text}");
    let one = run(&["inspect", "--data", d, "--episode", "mirror_0_0_gold-standard", "--step", "4"]);
    assert!(stdout(&one).starts_with("t=4 Submit"));
    assert_eq!(code(&run(&["inspect", "--data", d, "--episode", "nope"])), 2);
    assert_eq!(code(&run(&["inspect", "--data", d, "--episode", "mirror_0_0_gold-standard", "--step", "9"])), 2);
}

fn metrics_line(out: &Output) -> serde_json::Value {
    let line = stdout(out).lines().find(|l| l.starts_with('{')).unwrap().to_string();
    serde_json::from_str(&line).unwrap()
}

#[test]
fn eval_builtin_agents() {
    let oracle = run(&["eval", "--task", "diagonal", "--agent", "oracle", "--seed", "8", "--problems", "30"]);
    assert_eq!(code(&oracle), 0);
    let m = metrics_line(&oracle);
    assert_eq!(m["reach_rate"], 1.0);
    assert_eq!(m["submit_rate"], 1.0);
    assert_eq!(m["submit_ci96"], 0.0);

    let random = run(&["eval", "--task", "mirror", "--agent", "random", "--seed", "8", "--problems", "30"]);
    assert!(metrics_line(&random)["submit_rate"].as_f64().unwrap() <= 0.05);

    let single = run(&["eval", "--task", "mirror", "--agent", "random", "--seed", "8", "--problems", "5", "--repeats", "1"]);
    assert_eq!(metrics_line(&single)["submit_ci96"], 0.0);
}

#[test]
fn eval_seed_collision_and_missing_agent() {
    let collide = run(&["eval", "--task", "mirror", "--agent", "oracle", "--seed", "4", "--training-seed", "4"]);
    assert_eq!(code(&collide), 2);
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen(tmp.path(), "mirror", "1", "1", "1")), 0);
    let from_data = run(&[
        "eval", "--task", "mirror", "--agent", "oracle", "--seed", "5", "--training-data", tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&from_data), 2);

    let missing = run(&["eval", "--task", "mirror", "--agent", "/nonexistent/agent-bin", "--seed", "1", "--problems", "2"]);
    assert_eq!(code(&missing), 3);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("could not start agent"));
    assert_eq!(code(&run(&["eval", "--task", "mirror", "--seed", "1"])), 2);
}

#[test]
fn eval_subprocess_agent() {
    let cmd = format!("{} agent --kind oracle --task mirror", env!("CARGO_BIN_EXE_solar"));
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path().join("t.jsonl");
    let out = run(&[
        "eval", "--task", "mirror", "--agent", &cmd, "--seed", "2", "--problems", "4", "--repeats", "2",
        "--transcript", t.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(metrics_line(&out)["submit_rate"], 1.0);
    assert_eq!(fs::read_to_string(&t).unwrap().lines().count(), 8);

    // An agent that exits without replying is a protocol failure.
    let out = run(&["eval", "--task", "mirror", "--agent", "true", "--seed", "2", "--problems", "1", "--repeats", "1"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn eval_tcp_agent() {
    let mut server = solar()
        .args(["agent", "--kind", "oracle", "--task", "diagonal", "--listen", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
    let out = run(&["eval", "--task", "diagonal", "--agent-addr", &addr, "--seed", "6", "--problems", "10", "--repeats", "2"]);
    server.kill().unwrap();
    let _ = server.wait();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(metrics_line(&out)["submit_rate"], 1.0);
}

#[test]
fn agent_serves_stdio() {
    use std::io::Write;
    let mut child = solar()
        .args(["agent", "--kind", "oracle", "--task", "mirror"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    writeln!(stdin, r#"{{"type":"init","episode_id":"e","demonstrations":[],"test_input":[[1,2]],"max_steps":20}}"#).unwrap();
    writeln!(stdin, r#"{{"type":"state","t":0,"current":[[1,2]],"clipboard":null}}"#).unwrap();
    writeln!(stdin, r#"{{"type":"end"}}"#).unwrap();
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "{\"type\":\"action\",\"op\":33,\"sel\":[0,0,1,1]}\n");
}
