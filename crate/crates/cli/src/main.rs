//! `solar`: generate, check, segment, inspect and evaluate grid trajectory datasets.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O or protocol error.
//! Timing lines go to stderr prefixed with `time:` so stdout stays reproducible.

use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use solar_core::dataset::{self, DatasetError, ManifestParams};
use solar_core::generator::{generate, verify_dataset, VerifyOptions};
use solar_core::harness::agents::{BuiltinFactory, BuiltinKind, OracleAgent, RandomAgent};
use solar_core::harness::protocol::InitMsg;
use solar_core::harness::transport::{serve, serve_tcp, SubprocessFactory, TcpFactory};
use solar_core::harness::{self, Agent, AgentFactory, HarnessError, RunOptions};
use solar_core::maker::{Task, TaskParams};
use solar_core::render::{render_grid, side_by_side};
use solar_core::segment::{segment_dataset, DEFAULT_HORIZON};
use solar_core::{seed, EnvConfig};

#[derive(Parser)]
#[command(name = "solar", version, about = "Grid-puzzle trajectory synthesis and agent evaluation")]
struct Cli {
    /// Worker threads (default: available cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset directory.
    Generate(GenerateArgs),
    /// Replay every episode and check dataset invariants.
    Validate(ValidateArgs),
    /// Re-cut a dataset's episodes into fixed-horizon segments.
    Segment(SegmentArgs),
    /// Run an agent over an evaluation set and report success rates.
    Eval(EvalArgs),
    /// Print an episode as character grids.
    Inspect(InspectArgs),
    /// Serve a built-in agent over stdin/stdout or TCP.
    Agent(AgentArgs),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 10)]
    max_h: usize,
    #[arg(long, default_value_t = 10)]
    max_w: usize,
    /// Demonstration pairs per problem.
    #[arg(long, default_value_t = 3)]
    demos: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    task: Task,
    #[arg(long)]
    problems: usize,
    #[arg(long)]
    per_problem: usize,
    /// Gold-standard episodes per problem.
    #[arg(long, default_value_t = 1)]
    gold: usize,
    #[arg(long, env = "SOLAR_SEED")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    #[arg(long, default_value_t = 10)]
    nonoptimal_len: usize,
    #[arg(long, default_value_t = 2)]
    nonoptimal_jitter: usize,
    #[command(flatten)]
    grid: GridArgs,
    /// Exit 0 even if some planned episodes were quarantined.
    #[arg(long)]
    allow_quarantine: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Also check every pair against the task rule.
    #[arg(long)]
    check_rule: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Write the re-segmented dataset here instead of in place.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    task: Task,
    /// `oracle`, `random`, or a command line to spawn per episode.
    #[arg(long, conflicts_with = "agent_addr")]
    agent: Option<String>,
    /// Connect to an agent listening on host:port.
    #[arg(long)]
    agent_addr: Option<String>,
    #[arg(long, default_value_t = harness::DEFAULT_EVAL_PROBLEMS)]
    problems: usize,
    #[arg(long, default_value_t = harness::DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = harness::DEFAULT_MAX_STEPS)]
    max_steps: usize,
    #[arg(long, env = "SOLAR_SEED")]
    seed: u64,
    /// Seed the training set was generated with; must differ from --seed.
    #[arg(long)]
    training_seed: Option<u64>,
    /// Read the training seed from this dataset's manifest.
    #[arg(long, conflicts_with = "training_seed")]
    training_data: Option<PathBuf>,
    /// Seconds to wait for each agent reply.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    #[command(flatten)]
    grid: GridArgs,
    /// Write per-episode outcomes as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write the metrics report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    episode: String,
    /// Render only this step.
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args)]
struct AgentArgs {
    #[arg(long)]
    kind: BuiltinKind,
    #[arg(long)]
    task: Task,
    #[arg(long, env = "SOLAR_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_h: usize,
    #[arg(long, default_value_t = 10)]
    max_w: usize,
    /// Listen on host:port instead of serving stdin/stdout.
    #[arg(long)]
    listen: Option<String>,
}

enum Failure {
    Validation(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn dataset_failure(e: DatasetError) -> Failure {
    match e {
        DatasetError::Io { .. } | DatasetError::Serialization(_) => Failure::Io(e.to_string()),
        _ => Failure::Validation(e.to_string()),
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::Agent { .. } => Failure::Io(e.to_string()),
        HarnessError::Maker(_) | HarnessError::Env { .. } => Failure::Validation(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn timing(label: &str, start: Instant) {
    eprintln!("time: {label} {:.3}s", start.elapsed().as_secs_f64());
}

fn write_out(path: &Path, bytes: &[u8]) -> CmdResult {
    std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    if a.horizon == 0 {
        return Err(Failure::Usage("--horizon must be at least 1".into()));
    }
    let params = TaskParams {
        max_dims: (a.grid.max_h, a.grid.max_w),
        demos_per_problem: a.grid.demos,
        nonoptimal_len: a.nonoptimal_len,
        nonoptimal_jitter: a.nonoptimal_jitter,
        seed: a.seed,
    };
    let start = Instant::now();
    let g = generate(a.task, &params, a.problems, a.per_problem, a.gold).map_err(|e| Failure::Usage(e.to_string()))?;
    let segments =
        segment_dataset(&g.episodes, a.horizon, params.max_dims).map_err(|e| Failure::Usage(e.to_string()))?;
    let mp = ManifestParams::new(&params, a.problems, a.per_problem, a.gold, a.horizon);
    let manifest = dataset::write_dataset(&a.out, a.task, mp, &g.episodes, &segments, &g.quarantine)
        .map_err(dataset_failure)?;
    timing("generate", start);
    let gold = g.episodes.iter().filter(|e| e.is_gold()).count();
    println!("episodes: {}", manifest.counts.episodes);
    println!("gold: {gold}");
    println!("segments: {}", manifest.counts.segments);
    println!("quarantined: {}", manifest.counts.quarantined);
    println!("episodes sha256: {}", manifest.digests.episodes);
    println!("segments sha256: {}", manifest.digests.segments);
    println!("manifest sha256: {}", manifest.digests.manifest);
    if !g.quarantine.is_empty() && !a.allow_quarantine {
        return Err(Failure::Validation(format!(
            "{} episodes quarantined (see {}); pass --allow-quarantine to accept",
            g.quarantine.len(),
            dataset::QUARANTINE_FILE
        )));
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let start = Instant::now();
    let ds = dataset::read_dataset(&a.data).map_err(dataset_failure)?;
    let opts = VerifyOptions {
        config: ds.manifest.params.env_config(),
        expected_gold: Some(ds.manifest.params.expected_gold()),
        task: a.check_rule.then_some(ds.manifest.task),
    };
    let report = verify_dataset(&ds.episodes, &opts);
    timing("validate", start);
    if a.json {
        println!("{}", json!({ "episodes_checked": report.episodes_checked, "violations": report.violations }));
    } else {
        println!("episodes checked: {}", report.episodes_checked);
        println!("violations: {}", report.violations.len());
        for v in &report.violations {
            match v.step {
                Some(s) => println!("  {} step {s}: {}", v.trajectory_id, v.message),
                None => println!("  {}: {}", v.trajectory_id, v.message),
            }
        }
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} violations", report.violations.len())))
    }
}

fn cmd_segment(a: SegmentArgs) -> CmdResult {
    if a.horizon == 0 {
        return Err(Failure::Usage("--horizon must be at least 1".into()));
    }
    let start = Instant::now();
    let mut ds = dataset::read_dataset(&a.data).map_err(dataset_failure)?;
    let pad = (ds.manifest.params.max_h, ds.manifest.params.max_w);
    ds.segments = segment_dataset(&ds.episodes, a.horizon, pad).map_err(|e| Failure::Usage(e.to_string()))?;
    ds.manifest.params.horizon = a.horizon;
    let manifest = ds.write(a.out.as_deref().unwrap_or(&a.data)).map_err(dataset_failure)?;
    timing("segment", start);
    println!("episodes: {}", manifest.counts.episodes);
    println!("segments: {}", manifest.counts.segments);
    println!("horizon: {}", a.horizon);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let config = EnvConfig { max_dims: (a.grid.max_h, a.grid.max_w), ..EnvConfig::default() };
    let params = TaskParams { max_dims: config.max_dims, demos_per_problem: a.grid.demos, ..TaskParams::default() };
    let training_seed = match (&a.training_data, a.training_seed) {
        (Some(dir), _) => {
            let ds = dataset::read_dataset(dir).map_err(dataset_failure)?;
            Some(ds.manifest.params.seed)
        }
        (None, s) => s,
    };
    let timeout = Duration::from_secs(a.timeout);
    let factory: Box<dyn AgentFactory> = match (a.agent.as_deref(), a.agent_addr) {
        (Some("oracle"), _) | (Some("random"), _) => Box::new(BuiltinFactory {
            kind: a.agent.as_deref().unwrap().parse().map_err(Failure::Usage)?,
            task: a.task,
            seed: a.seed,
            config,
        }),
        (Some(cmd), _) => Box::new(SubprocessFactory::from_command_line(cmd, timeout).map_err(|e| Failure::Usage(e.to_string()))?),
        (None, Some(addr)) => Box::new(TcpFactory { addr, timeout }),
        (None, None) => return Err(Failure::Usage("one of --agent or --agent-addr is required".into())),
    };

    let start = Instant::now();
    let set = harness::make_eval_set(a.task, a.seed, a.problems, &params, training_seed).map_err(harness_failure)?;
    let opts = RunOptions { max_steps: a.max_steps, config };
    let report = harness::evaluate(factory.as_ref(), &set, a.repeats, opts).map_err(harness_failure)?;
    timing("eval", start);

    let m = &report.metrics;
    println!("task: {}", a.task);
    println!("problems: {}  repeats: {}  max_steps: {}", m.problems, m.repeats, a.max_steps);
    println!("reach rate:  {:.4} +/- {:.4}", m.reach_rate, m.reach_ci96);
    println!("submit rate: {:.4} +/- {:.4}", m.submit_rate, m.submit_ci96);
    println!("ci: {}", m.ci_method);
    println!("{}", serde_json::to_string(m).expect("metrics serialize"));
    if let Some(path) = &a.transcript {
        write_out(path, report.transcript_jsonl().as_bytes())?;
    }
    if let Some(path) = &a.report {
        let mut bytes = serde_json::to_vec_pretty(m).expect("metrics serialize");
        bytes.push(b'\n');
        write_out(path, &bytes)?;
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    let ds = dataset::read_dataset(&a.data).map_err(dataset_failure)?;
    let ep = ds
        .episodes
        .iter()
        .find(|e| e.trajectory_id == a.episode)
        .ok_or_else(|| Failure::Usage(format!("no episode {:?} in {}", a.episode, a.data.display())))?;
    let mut out = io::stdout().lock();
    let steps: Vec<_> = match a.step {
        Some(t) => {
            let s = ep.steps.get(t).ok_or_else(|| {
                Failure::Usage(format!("episode {} has {} steps; no step {t}", ep.trajectory_id, ep.steps.len()))
            })?;
            vec![s]
        }
        None => {
            let _ = writeln!(out, "episode {} ({} steps)", ep.trajectory_id, ep.steps.len());
            for (i, d) in ep.demonstrations.iter().enumerate() {
                let _ = writeln!(out, "demo {i}: input | output");
                let _ = write!(out, "{}", side_by_side(&[&d.input, &d.output], " | "));
            }
            let _ = writeln!(out, "test: input | output");
            let _ = write!(out, "{}", side_by_side(&[&ep.test_input, &ep.test_output], " | "));
            ep.steps.iter().collect()
        }
    };
    for s in steps {
        let sel = s.action.sel;
        let _ = writeln!(
            out,
            "t={} {} ({},{},{},{}) reward={} terminated={}",
            s.t,
            s.action.op.name(),
            sel.x,
            sel.y,
            sel.h,
            sel.w,
            s.reward,
            s.terminated
        );
        match &s.state.clipboard {
            Some(clip) => {
                let _ = writeln!(out, "current | clipboard");
                let _ = write!(out, "{}", side_by_side(&[&s.state.current, clip], " | "));
            }
            None => {
                let _ = writeln!(out, "current");
                let _ = write!(out, "{}", render_grid(&s.state.current));
            }
        }
    }
    Ok(())
}

fn session_seed(base: u64, episode_id: &str) -> u64 {
    let words: Vec<u64> = episode_id.bytes().map(u64::from).collect();
    seed::derive(seed::derive(base, &[seed::TAG_AGENT]), &words)
}

fn cmd_agent(a: AgentArgs) -> CmdResult {
    let (kind, task, base) = (a.kind, a.task, a.seed);
    let config = EnvConfig { max_dims: (a.max_h, a.max_w), ..EnvConfig::default() };
    let make = move |init: &InitMsg| -> Box<dyn Agent> {
        match kind {
            BuiltinKind::Oracle => Box::new(OracleAgent::new(task)),
            BuiltinKind::Random => Box::new(RandomAgent::new(session_seed(base, &init.episode_id), config)),
        }
    };
    match a.listen {
        Some(addr) => {
            let listener = TcpListener::bind(&addr).map_err(|e| Failure::Io(format!("{addr}: {e}")))?;
            let local = listener.local_addr().map_err(|e| Failure::Io(e.to_string()))?;
            eprintln!("listening on {local}");
            serve_tcp(listener, make).map_err(|e| Failure::Io(e.to_string()))
        }
        None => {
            let stdin = io::stdin();
            serve(make, BufReader::new(stdin.lock()), io::stdout().lock())
                .map(|_| ())
                .map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().expect("thread pool is set once");
    }
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Agent(a) => cmd_agent(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Validation(msg) | Failure::Usage(msg) | Failure::Io(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
