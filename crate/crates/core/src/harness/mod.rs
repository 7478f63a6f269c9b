//! Agent evaluation: drive an agent through evaluation problems one action per
//! exchange and score two rates, answer reached and answer submitted.

pub mod agents;
pub mod protocol;
pub mod transport;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvConfig, EnvError, SUCCESS_REWARD};
use crate::maker::{MakerError, ProblemInstance, Task, TaskParams};
use crate::seed;

use protocol::{ActionMsg, InitMsg, ResultMsg, StateMsg};

pub const DEFAULT_MAX_STEPS: usize = 20;
pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_EVAL_PROBLEMS: usize = 100;
/// Two-sided 96% standard normal quantile, `Phi^-1(0.98)`.
pub const Z_96: f64 = 2.053_748_910_631_823;
pub const CI_METHOD: &str =
    "normal approximation over per-repeat rates: z(0.98) * sample std / sqrt(repeats); 0 when repeats == 1";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent protocol error: {0}")]
    Protocol(String),
    #[error("agent did not answer within {0:?}")]
    Timeout(std::time::Duration),
    #[error("could not start agent: {0}")]
    Spawn(String),
    #[error("agent i/o failure: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("evaluation seed {0} equals the training seed")]
    SeedCollision(u64),
    #[error("eval set must hold at least one problem")]
    EmptyEvalSet,
    #[error(transparent)]
    Maker(#[from] MakerError),
    #[error("problem {problem_id}: {source}")]
    Env { problem_id: String, source: EnvError },
    #[error("repeat {repeat}, problem {problem_id}: {source}")]
    Agent { repeat: usize, problem_id: String, source: AgentError },
}

/// The environment's view of an agent session.
pub trait Agent {
    fn init(&mut self, msg: &InitMsg) -> Result<(), AgentError>;
    fn act(&mut self, msg: &StateMsg) -> Result<ActionMsg, AgentError>;
    fn result(&mut self, msg: &ResultMsg) -> Result<(), AgentError>;
    fn end(&mut self) -> Result<(), AgentError>;
}

/// Creates a fresh agent session per `(repeat, problem)`.
pub trait AgentFactory: Sync {
    fn create(&self, repeat: usize, problem_index: usize) -> Result<Box<dyn Agent>, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndReason {
    /// The environment terminated the episode (a `Submit`).
    Terminated,
    StepCap,
    InvalidAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t: usize,
    pub action: ActionMsg,
    pub reward: f64,
    pub terminated: bool,
    pub invalid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode_id: String,
    /// The current grid equalled the answer at some timestep.
    pub reached_answer: bool,
    /// `Submit` was executed while the current grid equalled the answer.
    pub submitted_correct: bool,
    pub steps_taken: usize,
    pub end_reason: EndReason,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_steps: usize,
    pub config: EnvConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_steps: DEFAULT_MAX_STEPS, config: EnvConfig::default() }
    }
}

/// Runs one episode. The test output is never sent to the agent.
pub fn run_episode(
    agent: &mut dyn Agent,
    problem: &ProblemInstance,
    episode_id: &str,
    opts: RunOptions,
) -> Result<EpisodeOutcome, HarnessError> {
    if opts.max_steps == 0 {
        return Err(HarnessError::ZeroMaxSteps);
    }
    let env_err = |source| HarnessError::Env { problem_id: problem.problem_id.clone(), source };
    let agent_err = |source| HarnessError::Agent { repeat: 0, problem_id: problem.problem_id.clone(), source };

    let mut env = Env::new(&problem.test_input, &problem.test_output, opts.config).map_err(env_err)?;
    let mut outcome = EpisodeOutcome {
        episode_id: episode_id.to_string(),
        reached_answer: env.at_answer(),
        submitted_correct: false,
        steps_taken: 0,
        end_reason: EndReason::StepCap,
        transcript: Vec::new(),
    };
    agent
        .init(&InitMsg {
            episode_id: episode_id.to_string(),
            demonstrations: problem.demonstrations.clone(),
            test_input: problem.test_input.clone(),
            max_steps: opts.max_steps,
        })
        .map_err(agent_err)?;

    for t in 0..opts.max_steps {
        let state = env.state();
        let reply = agent
            .act(&StateMsg { t, current: state.current.clone(), clipboard: state.clipboard.clone() })
            .map_err(agent_err)?;
        outcome.steps_taken += 1;
        let stepped = reply
            .to_action()
            .map_err(EnvError::from)
            .and_then(|a| env.step(&a));
        let result = match stepped {
            Ok((reward, terminated)) => {
                outcome.reached_answer |= env.at_answer();
                outcome.submitted_correct |= reward == SUCCESS_REWARD;
                ResultMsg { reward, terminated, invalid: None }
            }
            Err(e) => ResultMsg { reward: 0.0, terminated: true, invalid: Some(e.to_string()) },
        };
        outcome.transcript.push(TranscriptEntry {
            t,
            action: reply,
            reward: result.reward,
            terminated: result.terminated,
            invalid: result.invalid.clone(),
        });
        agent.result(&result).map_err(agent_err)?;
        if result.invalid.is_some() {
            outcome.end_reason = EndReason::InvalidAction;
            break;
        }
        if result.terminated {
            outcome.end_reason = EndReason::Terminated;
            break;
        }
    }
    agent.end().map_err(agent_err)?;
    Ok(outcome)
}

/// Replays a transcript through a fresh environment and recomputes the two
/// outcome flags.
pub fn replay_outcome(problem: &ProblemInstance, outcome: &EpisodeOutcome, config: EnvConfig) -> (bool, bool) {
    let Ok(mut env) = Env::new(&problem.test_input, &problem.test_output, config) else {
        return (false, false);
    };
    let (mut reached, mut submitted) = (env.at_answer(), false);
    for entry in &outcome.transcript {
        let Ok(action) = entry.action.to_action() else { break };
        match env.step(&action) {
            Ok((reward, terminated)) => {
                reached |= env.at_answer();
                submitted |= reward == SUCCESS_REWARD;
                if terminated {
                    break;
                }
            }
            Err(_) => break,
        }
    }
    (reached, submitted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    pub task: Task,
    pub seed: u64,
    pub problems: Vec<ProblemInstance>,
}

/// Builds `n` evaluation problems. The seed must differ from the training seed.
pub fn make_eval_set(
    task: Task,
    seed: u64,
    n: usize,
    params: &TaskParams,
    training_seed: Option<u64>,
) -> Result<EvalSet, HarnessError> {
    if n == 0 {
        return Err(HarnessError::EmptyEvalSet);
    }
    if training_seed == Some(seed) {
        return Err(HarnessError::SeedCollision(seed));
    }
    let params = TaskParams { seed, ..*params };
    let problems = (0..n)
        .into_par_iter()
        .map(|i| task.make_problem(seed::problem_seed(seed, i), &params, format!("eval_{}_{}", task.name(), i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalSet { task, seed, problems })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub repeats: usize,
    pub problems: usize,
    pub reach_rate: f64,
    pub submit_rate: f64,
    pub reach_ci96: f64,
    pub submit_ci96: f64,
    pub per_repeat_reach: Vec<f64>,
    pub per_repeat_submit: Vec<f64>,
    pub ci_method: String,
}

/// Mean and 96% normal-approximation half-width of per-repeat rates.
pub fn mean_ci96(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z_96 * var.sqrt() / (n as f64).sqrt())
}

impl Metrics {
    pub fn from_outcomes(outcomes: &[Vec<EpisodeOutcome>]) -> Metrics {
        let rate = |run: &[EpisodeOutcome], f: fn(&EpisodeOutcome) -> bool| {
            if run.is_empty() {
                0.0
            } else {
                run.iter().filter(|o| f(o)).count() as f64 / run.len() as f64
            }
        };
        let per_repeat_reach: Vec<f64> = outcomes.iter().map(|r| rate(r, |o| o.reached_answer)).collect();
        let per_repeat_submit: Vec<f64> = outcomes.iter().map(|r| rate(r, |o| o.submitted_correct)).collect();
        let (reach_rate, reach_ci96) = mean_ci96(&per_repeat_reach);
        let (submit_rate, submit_ci96) = mean_ci96(&per_repeat_submit);
        Metrics {
            repeats: outcomes.len(),
            problems: outcomes.first().map_or(0, Vec::len),
            reach_rate,
            submit_rate,
            reach_ci96,
            submit_ci96,
            per_repeat_reach,
            per_repeat_submit,
            ci_method: CI_METHOD.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Metrics,
    /// `outcomes[repeat][problem]`.
    pub outcomes: Vec<Vec<EpisodeOutcome>>,
}

impl EvalReport {
    /// Every outcome as one JSON line, ordered by repeat then problem.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for o in self.outcomes.iter().flatten() {
            out.push_str(&serde_json::to_string(o).expect("outcomes serialize"));
            out.push('\n');
        }
        out
    }
}

/// Runs every problem once per repeat, each with a fresh agent session.
/// Episodes within a repeat run concurrently; results keep problem order.
pub fn evaluate(
    factory: &dyn AgentFactory,
    eval_set: &EvalSet,
    repeats: usize,
    opts: RunOptions,
) -> Result<EvalReport, HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::ZeroRepeats);
    }
    let mut outcomes = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let run = eval_set
            .problems
            .par_iter()
            .enumerate()
            .map(|(i, problem)| {
                let with_repeat = |e: HarnessError| match e {
                    HarnessError::Agent { problem_id, source, .. } => {
                        HarnessError::Agent { repeat, problem_id, source }
                    }
                    other => other,
                };
                let mut agent = factory.create(repeat, i).map_err(|source| HarnessError::Agent {
                    repeat,
                    problem_id: problem.problem_id.clone(),
                    source,
                })?;
                let id = format!("{}_r{}", problem.problem_id, repeat);
                run_episode(agent.as_mut(), problem, &id, opts).map_err(with_repeat)
            })
            .collect::<Result<Vec<_>, _>>()?;
        outcomes.push(run);
    }
    Ok(EvalReport { metrics: Metrics::from_outcomes(&outcomes), outcomes })
}
