//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the process
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use solar_core::dataset::{self, Dataset, EPISODES_FILE, MANIFEST_FILE, SEGMENTS_FILE};
use solar_core::env::{self, EnvConfig};
use solar_core::generator::{generate, verify_dataset, Episode, StoredState, VerifyOptions};
use solar_core::grid::{copy_region, paste_region, transform_region, Color, Grid, Selection, Transform};
use solar_core::harness::agents::{BuiltinFactory, BuiltinKind};
use solar_core::harness::{evaluate, make_eval_set, replay_outcome, RunOptions};
use solar_core::maker::{Task, TaskParams};
use solar_core::ops::Operation;
use solar_core::segment::{reassemble, segment_dataset, Segment};

type Check = Result<String, String>;
type Criterion = (&'static str, fn(&Path) -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn solar() -> Command {
    Command::new(env!("CARGO_BIN_EXE_solar"))
}

fn run_ok(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| format!("spawn failed: {e}"))?;
    if !out.status.success() {
        return Err(format!("{:?} exited {:?}: {}", cmd, out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn generate_cli(out: &Path, task: &str, problems: usize, per: usize, seed: u64) -> Result<f64, String> {
    let start = Instant::now();
    run_ok(solar().args(["generate", "--task", task, "--gold", "1", "--out"]).arg(out).args([
        "--problems",
        &problems.to_string(),
        "--per-problem",
        &per.to_string(),
        "--seed",
        &seed.to_string(),
    ]))?;
    Ok(start.elapsed().as_secs_f64())
}

fn read(dir: &Path) -> Result<Dataset, String> {
    dataset::read_dataset(dir).map_err(|e| e.to_string())
}

fn composition(root: &Path) -> Check {
    let dir = root.join("mirror500");
    let secs = generate_cli(&dir, "mirror", 500, 10, 7)?;
    let ds = read(&dir)?;
    let gold = ds.episodes.iter().filter(|e| e.is_gold()).count();
    ensure!(ds.episodes.len() == 5000, "{} episodes", ds.episodes.len());
    ensure!(gold == 500, "{gold} gold episodes");
    ensure!(ds.quarantine.is_empty(), "{} quarantined", ds.quarantine.len());
    ensure!(secs <= 30.0, "took {secs:.2}s");
    Ok(format!("5000 episodes, 500 gold (10.0%), 0 quarantined, {secs:.2}s"))
}

fn replay_matches(ep: &Episode) -> Result<(), String> {
    let results = env::replay(&ep.test_input, &ep.test_output, &ep.actions(), EnvConfig::default())
        .map_err(|e| format!("{}: {e}", ep.trajectory_id))?;
    let mut state = env::reset(&ep.test_input, &ep.test_output, EnvConfig::default()).map_err(|e| e.to_string())?;
    ensure!(results.len() == ep.steps.len(), "{}: length differs", ep.trajectory_id);
    for (r, s) in results.iter().zip(&ep.steps) {
        ensure!(StoredState::from(&state) == s.state, "{} t={}: state differs", ep.trajectory_id, s.t);
        ensure!(r.reward.to_bits() == s.reward.to_bits(), "{} t={}: reward differs", ep.trajectory_id, s.t);
        ensure!(r.terminated == s.terminated, "{} t={}: terminated differs", ep.trajectory_id, s.t);
        state = r.next_state.clone();
    }
    Ok(())
}

fn mutate_all_bytes(dir: &Path, file: &str, stride: usize) -> Result<usize, String> {
    let path = dir.join(file);
    let original = fs::read(&path).map_err(|e| e.to_string())?;
    let mut tried = 0;
    for i in (0..original.len()).step_by(stride) {
        let mut bytes = original.clone();
        bytes[i] ^= 0x01;
        fs::write(&path, &bytes).map_err(|e| e.to_string())?;
        ensure!(dataset::read_dataset(dir).is_err(), "{file} byte {i} change went unnoticed");
        tried += 1;
    }
    fs::write(&path, &original).map_err(|e| e.to_string())?;
    Ok(tried)
}

fn replay_fidelity(root: &Path) -> Check {
    let ds = read(&root.join("mirror500"))?;
    for ep in &ds.episodes {
        replay_matches(ep)?;
    }
    let opts = VerifyOptions {
        config: ds.manifest.params.env_config(),
        expected_gold: Some(ds.manifest.params.expected_gold()),
        task: Some(Task::Mirror),
    };
    let report = verify_dataset(&ds.episodes, &opts);
    ensure!(report.is_clean(), "{} violations, first {:?}", report.violations.len(), report.violations.first());

    // Every byte of a small dataset, each flipped in turn.
    let small = root.join("small");
    generate_cli(&small, "diagonal", 1, 2, 3)?;
    let mut tried = 0;
    for file in [MANIFEST_FILE, EPISODES_FILE, SEGMENTS_FILE] {
        tried += mutate_all_bytes(&small, file, 1)?;
    }
    ensure!(read(&small).is_ok(), "restored dataset no longer reads");
    Ok(format!(
        "{} episodes replay bit-exactly, 0 violations, {tried}/{tried} single-byte changes detected",
        ds.episodes.len()
    ))
}

fn mirror_oracle(input: &Grid) -> Vec<Vec<u8>> {
    let rows = input.to_rows();
    rows.iter().rev().chain(rows.iter()).cloned().collect()
}

fn gold_correctness(_root: &Path) -> Check {
    let mut summary = Vec::new();
    for task in Task::ALL {
        let params = TaskParams { seed: 1234, ..TaskParams::default() };
        let g = generate(task, &params, 1000, 1, 1).map_err(|e| e.to_string())?;
        ensure!(g.quarantine.is_empty(), "{task}: {} quarantined", g.quarantine.len());
        ensure!(g.episodes.len() == 1000, "{task}: {} episodes", g.episodes.len());
        for ep in &g.episodes {
            ensure!(ep.is_gold(), "{} is not gold", ep.trajectory_id);
            let last = ep.steps.last().ok_or("empty episode")?;
            ensure!(last.action.op == Operation::Submit, "{} does not end with Submit", ep.trajectory_id);
            ensure!(last.reward == 1.0 && last.terminated, "{} final reward {}", ep.trajectory_id, last.reward);
            ensure!(last.state.current == ep.test_output, "{} final grid differs", ep.trajectory_id);
            if task == Task::Mirror {
                ensure!(ep.test_output.to_rows() == mirror_oracle(&ep.test_input), "{} wrong answer", ep.trajectory_id);
            }
            replay_matches(ep)?;
        }
        summary.push(format!("{task} 1000/1000"));
    }
    Ok(format!("{} gold episodes end at the answer with reward 1.0", summary.join(", ")))
}

fn patterned(rows: usize, cols: usize, k: usize) -> Grid {
    let cells = (0..rows * cols).map(|i| ((i * 7 + k * 3 + i / cols) % 10) as u8).collect();
    Grid::from_cells(rows, cols, cells).unwrap()
}

fn operation_semantics(_root: &Path) -> Check {
    let sel = Selection::new(3, 0, 2, 2);
    ensure!((sel.x, sel.y) == (3, 0) && sel.bottom_right() == (5, 2), "paste box {:?}", sel.bottom_right());
    let clip = Grid::from_rows(&[[1u8, 2, 3], [4, 5, 6], [7, 8, 9]]).unwrap();
    let base = Grid::filled(6, 3, Color::BLACK).unwrap();
    let pasted = paste_region(&base, &clip, sel).map_err(|e| e.to_string())?;
    ensure!(copy_region(&pasted, sel).unwrap() == clip, "paste landed elsewhere");
    ensure!(copy_region(&pasted, Selection::new(0, 0, 2, 2)).unwrap().is_uniform(Color::BLACK), "paste spilled");

    let mut cases = 0;
    for rows in 1..=6 {
        for cols in 1..=6 {
            for k in 0..3 {
                let g = patterned(rows, cols, k);
                for x in 0..rows {
                    for y in 0..cols {
                        for h in 0..rows - x {
                            for w in 0..cols - y {
                                let s = Selection::new(x, y, h, w);
                                for t in [Transform::FlipV, Transform::FlipH] {
                                    let once = transform_region(&g, s, t).unwrap();
                                    ensure!(once.dims() == g.dims(), "{t:?} changed dims");
                                    ensure!(transform_region(&once, s, t).unwrap() == g, "{t:?} not an involution at {s:?}");
                                }
                                let c = copy_region(&g, s).unwrap();
                                ensure!(paste_region(&g, &c, s).unwrap() == g, "copy/paste changed grid at {s:?}");
                                if h == w {
                                    let r90 = transform_region(&g, s, Transform::Rotate90).unwrap();
                                    ensure!(
                                        transform_region(&r90, s, Transform::Rotate270).unwrap() == g,
                                        "Rotate270 does not undo Rotate90 at {s:?}"
                                    );
                                    let mut four = g.clone();
                                    for _ in 0..4 {
                                        four = transform_region(&four, s, Transform::Rotate90).unwrap();
                                    }
                                    ensure!(four == g, "4 x Rotate90 is not identity at {s:?}");
                                }
                                cases += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("paste box (3,0)-(5,2) exact; {cases} exhaustive selection cases hold all identities"))
}

fn segmentation(root: &Path) -> Check {
    let ds = read(&root.join("mirror500"))?;
    let gold: Vec<Episode> = ds.episodes.iter().filter(|e| e.is_gold()).cloned().collect();
    ensure!(gold.iter().all(|e| e.steps.len() == 5), "gold episode not 5 steps");
    let segs = segment_dataset(&gold, 5, (10, 10)).map_err(|e| e.to_string())?;
    ensure!(segs.len() == gold.len(), "{} segments for {} gold episodes", segs.len(), gold.len());
    ensure!(segs.iter().all(|s| !s.is_padded()), "a gold segment is padded");

    let pad = Grid::filled(10, 10, Color::PAD).unwrap();
    let mut padded = 0;
    for s in &ds.segments {
        for i in s.real_len()..s.horizon() {
            ensure!(s.actions[i].op.code() == 35, "padding op {}", s.actions[i].op.code());
            ensure!(s.actions[i].sel == Selection::ZERO, "padding selection {:?}", s.actions[i].sel);
            ensure!(s.states[i].current == pad, "padding current grid is not all 10");
            ensure!(s.states[i].clipboard.as_ref() == Some(&pad), "padding clipboard is not all 10");
            ensure!(s.rewards[i] == 0.0 && s.terminateds[i], "padding reward/terminated");
            padded += 1;
        }
    }
    let mut by_id: BTreeMap<&str, Vec<Segment>> = BTreeMap::new();
    for s in &ds.segments {
        by_id.entry(&s.trajectory_id).or_default().push(s.clone());
    }
    ensure!(by_id.len() == ds.episodes.len(), "segments cover {} of {} episodes", by_id.len(), ds.episodes.len());
    for ep in &ds.episodes {
        let steps = reassemble(&by_id[ep.trajectory_id.as_str()]).map_err(|e| e.to_string())?;
        ensure!(steps == ep.steps, "{} does not reassemble", ep.trajectory_id);
    }
    Ok(format!(
        "{} gold episodes -> {} unpadded segments; {padded} padded entries well-formed; {} episodes reassemble exactly",
        gold.len(),
        segs.len(),
        ds.episodes.len()
    ))
}

fn harness_metrics(_root: &Path) -> Check {
    let mut parts = Vec::new();
    let mut worst_random: f64 = 0.0;
    for task in Task::ALL {
        let set = make_eval_set(task, 2024, 100, &TaskParams::default(), Some(7)).map_err(|e| e.to_string())?;
        let oracle = BuiltinFactory { kind: BuiltinKind::Oracle, task, seed: 0, config: EnvConfig::default() };
        let r = evaluate(&oracle, &set, 5, RunOptions::default()).map_err(|e| e.to_string())?;
        let m = &r.metrics;
        ensure!(m.reach_rate == 1.0 && m.submit_rate == 1.0, "{task} oracle {}/{}", m.reach_rate, m.submit_rate);
        ensure!(m.reach_ci96 == 0.0 && m.submit_ci96 == 0.0, "{task} oracle CI nonzero");

        let random = BuiltinFactory { kind: BuiltinKind::Random, task, seed: 77, config: EnvConfig::default() };
        let r = evaluate(&random, &set, 5, RunOptions::default()).map_err(|e| e.to_string())?;
        let m = &r.metrics;
        ensure!(m.submit_rate <= 0.05, "{task} random submit_rate {}", m.submit_rate);
        for (run, problems) in r.outcomes.iter().zip(std::iter::repeat(&set.problems)) {
            for (o, p) in run.iter().zip(problems) {
                ensure!(!o.submitted_correct || o.reached_answer, "submitted without reaching");
                ensure!(o.steps_taken <= 20, "step cap exceeded");
                let replayed = replay_outcome(p, o, EnvConfig::default());
                ensure!(replayed == (o.reached_answer, o.submitted_correct), "transcript replay disagrees");
            }
        }
        worst_random = worst_random.max(m.submit_rate);
        parts.push(format!("{task}: oracle 1.00/1.00 +/- 0, random submit {:.3} +/- {:.3}", m.submit_rate, m.submit_ci96));
    }
    Ok(format!("{}; measured random bound {worst_random:.3} <= 0.05", parts.join("; ")))
}

fn dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        out.push((e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).map_err(|e| e.to_string())?));
    }
    out.sort();
    Ok(out)
}

fn eval_transcript(root: &Path, name: &str, agent: &str, task: &str) -> Result<Vec<u8>, String> {
    let path = root.join(name);
    run_ok(
        solar()
            .args(["eval", "--task", task, "--agent", agent, "--seed", "31", "--problems", "50", "--repeats", "3"])
            .arg("--transcript")
            .arg(&path),
    )?;
    fs::read(&path).map_err(|e| e.to_string())
}

fn determinism(root: &Path) -> Check {
    let mut files = 0;
    for task in ["mirror", "diagonal"] {
        let a = root.join(format!("det_a_{task}"));
        let b = root.join(format!("det_b_{task}"));
        generate_cli(&a, task, 50, 10, 99)?;
        generate_cli(&b, task, 50, 10, 99)?;
        let (da, db) = (dir_bytes(&a)?, dir_bytes(&b)?);
        ensure!(da == db, "{task} datasets differ between runs");
        files += da.len();
    }
    let mut transcripts = 0;
    for (agent, task) in [("oracle", "mirror"), ("random", "mirror"), ("random", "diagonal")] {
        let one = eval_transcript(root, &format!("t1_{agent}_{task}.jsonl"), agent, task)?;
        let two = eval_transcript(root, &format!("t2_{agent}_{task}.jsonl"), agent, task)?;
        ensure!(!one.is_empty() && one == two, "{agent}/{task} transcripts differ");
        transcripts += 1;
    }
    Ok(format!("{files} dataset files and {transcripts} eval transcripts byte-identical across runs"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root: PathBuf = tmp.path().to_path_buf();
    let criteria: [Criterion; 7] = [
        ("dataset composition", composition),
        ("replay fidelity", replay_fidelity),
        ("gold correctness", gold_correctness),
        ("operation semantics", operation_semantics),
        ("segmentation", segmentation),
        ("harness metrics", harness_metrics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        match check(&root) {
            Ok(detail) => println!("PASS {name}: {detail} ({:.1}s)", start.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
