//! Turns planned action sequences into validated episodes.
//!
//! Every planned episode is replayed through the environment. Sequences that
//! hit an invalid action, never terminate, or (for gold-standard episodes) end
//! anywhere but the answer grid are quarantined with the failure reason and
//! kept out of the dataset.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, EnvConfig, EnvState};
use crate::grid::Grid;
use crate::maker::{self, Demonstration, EpisodeKind, MakerError, PlannedEpisode, Task, TaskParams};
use crate::ops::Action;
use crate::seed;

/// The part of the environment state kept in stored data. The input grid is
/// stored once per episode as `test_input`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredState {
    pub current: Grid,
    pub clipboard: Option<Grid>,
}

impl From<&EnvState> for StoredState {
    fn from(s: &EnvState) -> Self {
        StoredState { current: s.current.clone(), clipboard: s.clipboard.clone() }
    }
}

/// One transition: the state the action was taken in, the action, and what
/// the environment returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub state: StoredState,
    pub action: Action,
    pub reward: f64,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub trajectory_id: String,
    pub demonstrations: Vec<Demonstration>,
    pub test_input: Grid,
    pub test_output: Grid,
    pub steps: Vec<Step>,
}

impl Episode {
    pub fn is_gold(&self) -> bool {
        maker::is_gold_id(&self.trajectory_id)
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// A planned episode that failed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub trajectory_id: String,
    pub kind: EpisodeKind,
    pub problem: maker::ProblemInstance,
    pub actions: Vec<Action>,
    pub failed_step: Option<usize>,
    pub reason: String,
}

impl QuarantineRecord {
    fn new(planned: PlannedEpisode, failed_step: Option<usize>, reason: String) -> Self {
        QuarantineRecord {
            trajectory_id: planned.trajectory_id,
            kind: planned.kind,
            problem: planned.problem,
            actions: planned.actions,
            failed_step,
            reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("{gold} gold episodes requested but only {total} episodes per problem")]
    InvalidCounts { gold: usize, total: usize },
    #[error("problem {index}: {source}")]
    Problem { index: usize, source: MakerError },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub episodes: Vec<Episode>,
    pub quarantine: Vec<QuarantineRecord>,
}

/// Replays one planned episode and builds the stored episode, or explains why
/// it must be quarantined.
#[allow(clippy::result_large_err)]
pub fn validate_planned(planned: PlannedEpisode, config: EnvConfig) -> Result<Episode, QuarantineRecord> {
    let p = &planned.problem;
    let results = match env::replay(&p.test_input, &p.test_output, &planned.actions, config) {
        Ok(r) => r,
        Err(e) => {
            let reason = e.error.to_string();
            return Err(QuarantineRecord::new(planned, Some(e.index), reason));
        }
    };
    let Some(last) = results.last() else {
        return Err(QuarantineRecord::new(planned, None, "empty action sequence".into()));
    };
    if !last.terminated {
        return Err(QuarantineRecord::new(planned, None, "episode never terminates".into()));
    }
    if maker::is_gold_id(&planned.trajectory_id) && last.next_state.current != p.test_output {
        let n = results.len();
        return Err(QuarantineRecord::new(
            planned,
            Some(n - 1),
            "gold-standard trajectory does not end at the output grid".into(),
        ));
    }

    let initial = env::reset(&p.test_input, &p.test_output, config).expect("replay already reset");
    let mut steps = Vec::with_capacity(results.len());
    let mut before = StoredState::from(&initial);
    for (t, (res, action)) in results.iter().zip(&planned.actions).enumerate() {
        steps.push(Step {
            t,
            state: before,
            action: *action,
            reward: res.reward,
            terminated: res.terminated,
        });
        before = StoredState::from(&res.next_state);
    }
    let PlannedEpisode { trajectory_id, problem, .. } = planned;
    Ok(Episode {
        trajectory_id,
        demonstrations: problem.demonstrations,
        test_input: problem.test_input,
        test_output: problem.test_output,
        steps,
    })
}

/// Validates a batch of planned episodes, preserving order.
pub fn assemble(planned: Vec<PlannedEpisode>, config: EnvConfig) -> Generated {
    let mut out = Generated::default();
    for p in planned {
        match validate_planned(p, config) {
            Ok(e) => out.episodes.push(e),
            Err(q) => out.quarantine.push(q),
        }
    }
    out
}

/// Plans every episode of one problem. Planning failures of individual
/// non-optimal episodes are returned as quarantine records.
pub fn plan_problem(
    task: Task,
    params: &TaskParams,
    problem_index: usize,
    episodes_per_problem: usize,
    gold_per_problem: usize,
) -> Result<(Vec<PlannedEpisode>, Vec<QuarantineRecord>), GenerateError> {
    let problem_err = |source| GenerateError::Problem { index: problem_index, source };
    let problem_id = format!("{}_{}", task.name(), problem_index);
    let problem = task
        .make_problem(seed::problem_seed(params.seed, problem_index), params, problem_id)
        .map_err(problem_err)?;
    let mut planned = Vec::with_capacity(episodes_per_problem);
    let mut failed = Vec::new();
    for e in 0..episodes_per_problem {
        let kind = if e < gold_per_problem { EpisodeKind::GoldStandard } else { EpisodeKind::NonOptimal };
        let id = maker::trajectory_id(task, problem_index, e, kind);
        let result = match kind {
            EpisodeKind::GoldStandard => task.gold_trajectory(&problem, id.clone()),
            EpisodeKind::NonOptimal => task.nonoptimal_trajectory(
                &problem,
                seed::episode_seed(params.seed, problem_index, e),
                params,
                id.clone(),
            ),
        };
        match result {
            Ok(p) => planned.push(p),
            Err(err) => failed.push(QuarantineRecord {
                trajectory_id: id,
                kind,
                problem: problem.clone(),
                actions: Vec::new(),
                failed_step: None,
                reason: err.to_string(),
            }),
        }
    }
    Ok((planned, failed))
}

/// Generates `n_problems x episodes_per_problem` episodes, of which
/// `gold_per_problem` per problem are gold-standard. Output order is
/// `(problem_index, episode_index)` regardless of thread count.
pub fn generate(
    task: Task,
    params: &TaskParams,
    n_problems: usize,
    episodes_per_problem: usize,
    gold_per_problem: usize,
) -> Result<Generated, GenerateError> {
    if gold_per_problem > episodes_per_problem {
        return Err(GenerateError::InvalidCounts { gold: gold_per_problem, total: episodes_per_problem });
    }
    let config = params.env_config();
    let per_problem: Vec<Generated> = (0..n_problems)
        .into_par_iter()
        .map(|i| {
            let (planned, failed) = plan_problem(task, params, i, episodes_per_problem, gold_per_problem)?;
            let mut g = assemble(planned, config);
            g.quarantine.extend(failed);
            Ok(g)
        })
        .collect::<Result<_, GenerateError>>()?;
    let mut out = Generated::default();
    for g in per_problem {
        out.episodes.extend(g.episodes);
        out.quarantine.extend(g.quarantine);
    }
    Ok(out)
}

/// A single invariant violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending episode, or `"*"` for dataset-wide checks.
    pub trajectory_id: String,
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub episodes_checked: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub config: EnvConfig,
    /// Expected number of gold-standard episodes, when known.
    pub expected_gold: Option<usize>,
    /// When set, every demonstration and test pair must obey this task's rule.
    pub task: Option<Task>,
}

fn check_episode(ep: &Episode, opts: &VerifyOptions) -> Result<(), (Option<usize>, String)> {
    if ep.steps.is_empty() {
        return Err((None, "episode has no steps".into()));
    }
    if let Some(task) = opts.task {
        let problem = maker::ProblemInstance {
            problem_id: String::new(),
            demonstrations: ep.demonstrations.clone(),
            test_input: ep.test_input.clone(),
            test_output: ep.test_output.clone(),
        };
        if !task.conforms(&problem) {
            return Err((None, format!("pairs do not follow the {task} rule")));
        }
    }
    let mut state = env::reset(&ep.test_input, &ep.test_output, opts.config)
        .map_err(|e| (None, e.to_string()))?;
    for (i, s) in ep.steps.iter().enumerate() {
        if s.t != i {
            return Err((Some(i), format!("step index {} out of sequence", s.t)));
        }
        if s.state != StoredState::from(&state) {
            return Err((Some(i), "stored state differs from replay".into()));
        }
        let res = env::step(&state, &s.action, &ep.test_output).map_err(|e| (Some(i), e.to_string()))?;
        if res.reward != s.reward {
            return Err((Some(i), format!("stored reward {} but replay gives {}", s.reward, res.reward)));
        }
        if res.terminated != s.terminated {
            return Err((
                Some(i),
                format!("stored terminated={} but replay gives {}", s.terminated, res.terminated),
            ));
        }
        state = res.next_state;
    }
    let last = ep.steps.len() - 1;
    if !ep.steps[last].terminated {
        return Err((Some(last), "last step is not terminal".into()));
    }
    if ep.is_gold() {
        if state.current != ep.test_output {
            return Err((Some(last), "gold-standard episode does not end at the output grid".into()));
        }
        if ep.steps[last].reward != env::SUCCESS_REWARD {
            return Err((Some(last), "gold-standard episode ends without reward".into()));
        }
    }
    Ok(())
}

/// Re-replays every episode and re-checks the dataset invariants. Reports at
/// most one violation per episode (the first check that fails), plus
/// dataset-wide violations.
pub fn verify_dataset(episodes: &[Episode], opts: &VerifyOptions) -> VerifyReport {
    let mut violations: Vec<Violation> = episodes
        .par_iter()
        .filter_map(|ep| {
            check_episode(ep, opts).err().map(|(step, message)| Violation {
                trajectory_id: ep.trajectory_id.clone(),
                step,
                message,
            })
        })
        .collect();
    let mut seen = HashSet::new();
    for ep in episodes {
        if !seen.insert(ep.trajectory_id.as_str()) {
            violations.push(Violation {
                trajectory_id: ep.trajectory_id.clone(),
                step: None,
                message: "duplicate trajectory id".into(),
            });
        }
    }
    if let Some(expected) = opts.expected_gold {
        let gold = episodes.iter().filter(|e| e.is_gold()).count();
        if gold != expected {
            violations.push(Violation {
                trajectory_id: "*".into(),
                step: None,
                message: format!("{gold} gold-standard episodes, expected {expected}"),
            });
        }
    }
    VerifyReport { episodes_checked: episodes.len(), violations }
}
