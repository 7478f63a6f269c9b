//! Task-specific problem synthesis.
//!
//! A grid maker produces random demonstration/test pairs that obey a task
//! rule, a gold-standard action sequence solving the test input, and
//! non-optimal sequences that branch off the gold path at a random step.

pub mod diagonal;
pub mod mirror;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvConfig;
use crate::grid::Grid;
use crate::ops::Action;

pub const GOLD_TAG: &str = "gold-standard";
pub const NONOPTIMAL_TAG: &str = "non-optimal";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MakerError {
    #[error("grid limits {0}x{1} are too small for this task")]
    DimsTooSmall(usize, usize),
    #[error("could not place objects after {0} attempts")]
    PlacementFailure(usize),
    #[error("no valid random action available: {0}")]
    NoValidActionAvailable(String),
    #[error("unknown task {0:?}")]
    TaskUnknown(String),
    #[error("problem cannot be solved by this task's planner")]
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demonstration {
    pub input: Grid,
    pub output: Grid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub problem_id: String,
    pub demonstrations: Vec<Demonstration>,
    pub test_input: Grid,
    pub test_output: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeKind {
    GoldStandard,
    NonOptimal,
}

impl EpisodeKind {
    pub fn tag(self) -> &'static str {
        match self {
            EpisodeKind::GoldStandard => GOLD_TAG,
            EpisodeKind::NonOptimal => NONOPTIMAL_TAG,
        }
    }
}

/// Grid pairs plus the action sequence to be validated in the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedEpisode {
    pub trajectory_id: String,
    pub kind: EpisodeKind,
    pub problem: ProblemInstance,
    pub actions: Vec<Action>,
}

/// `{task}_{problem_index}_{episode_index}_{gold-standard|non-optimal}`
pub fn trajectory_id(task: Task, problem_index: usize, episode_index: usize, kind: EpisodeKind) -> String {
    format!("{}_{}_{}_{}", task.name(), problem_index, episode_index, kind.tag())
}

/// True when the id marks a gold-standard trajectory.
pub fn is_gold_id(trajectory_id: &str) -> bool {
    trajectory_id.contains(GOLD_TAG)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskParams {
    /// `(MaxH, MaxW)`.
    pub max_dims: (usize, usize),
    pub demos_per_problem: usize,
    /// Target length of non-optimal episodes, varied by `nonoptimal_jitter` either way.
    pub nonoptimal_len: usize,
    pub nonoptimal_jitter: usize,
    pub seed: u64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            max_dims: (10, 10),
            demos_per_problem: 3,
            nonoptimal_len: 10,
            nonoptimal_jitter: 2,
            seed: 0,
        }
    }
}

impl TaskParams {
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig { max_dims: self.max_dims, ..EnvConfig::default() }
    }
}

/// The built-in tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Double the grid vertically: flipped copy on top, original below.
    Mirror,
    /// Extend two colored squares with diagonal lines to the grid edge.
    Diagonal,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Mirror, Task::Diagonal];

    pub fn name(self) -> &'static str {
        match self {
            Task::Mirror => "mirror",
            Task::Diagonal => "diagonal",
        }
    }

    pub fn make_problem(
        self,
        seed: u64,
        params: &TaskParams,
        problem_id: String,
    ) -> Result<ProblemInstance, MakerError> {
        match self {
            Task::Mirror => mirror::make_problem(seed, params, problem_id),
            Task::Diagonal => diagonal::make_problem(seed, params, problem_id),
        }
    }

    pub fn gold_actions(self, problem: &ProblemInstance) -> Result<Vec<Action>, MakerError> {
        match self {
            Task::Mirror => Ok(mirror::gold_actions(&problem.test_input)),
            Task::Diagonal => diagonal::gold_actions(problem),
        }
    }

    pub fn nonoptimal_actions(
        self,
        problem: &ProblemInstance,
        seed: u64,
        params: &TaskParams,
    ) -> Result<Vec<Action>, MakerError> {
        match self {
            Task::Mirror => mirror::nonoptimal_actions(problem, seed, params),
            Task::Diagonal => diagonal::nonoptimal_actions(problem, seed, params),
        }
    }

    pub fn gold_trajectory(
        self,
        problem: &ProblemInstance,
        trajectory_id: String,
    ) -> Result<PlannedEpisode, MakerError> {
        Ok(PlannedEpisode {
            trajectory_id,
            kind: EpisodeKind::GoldStandard,
            actions: self.gold_actions(problem)?,
            problem: problem.clone(),
        })
    }

    pub fn nonoptimal_trajectory(
        self,
        problem: &ProblemInstance,
        seed: u64,
        params: &TaskParams,
        trajectory_id: String,
    ) -> Result<PlannedEpisode, MakerError> {
        Ok(PlannedEpisode {
            trajectory_id,
            kind: EpisodeKind::NonOptimal,
            actions: self.nonoptimal_actions(problem, seed, params)?,
            problem: problem.clone(),
        })
    }

    /// Plans a solution from what an agent can see: the demonstrations and
    /// the test input. Never looks at the test output.
    pub fn solve(self, demonstrations: &[Demonstration], test_input: &Grid) -> Option<Vec<Action>> {
        match self {
            Task::Mirror => Some(mirror::gold_actions(test_input)),
            Task::Diagonal => diagonal::solve(demonstrations, test_input),
        }
    }

    /// Whether every pair of the problem obeys the task rule.
    pub fn conforms(self, problem: &ProblemInstance) -> bool {
        match self {
            Task::Mirror => mirror::conforms(problem),
            Task::Diagonal => diagonal::conforms(problem),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = MakerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| MakerError::TaskUnknown(s.to_string()))
    }
}
