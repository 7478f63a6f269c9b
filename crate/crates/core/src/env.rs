//! Episodic grid environment: state, transitions, reward and termination.
//!
//! A state is `(input, current, clipboard)` plus bookkeeping. Only `Submit`
//! yields reward, and only when the current grid equals the answer.

use thiserror::Error;

use crate::grid::{self, Grid, GridError, Selection};
use crate::ops::{Action, Operation};

/// Reward paid for a correct submission.
pub const SUCCESS_REWARD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    /// Largest grid reachable through `ResizeGrid`, as `(rows, cols)`.
    pub max_dims: (usize, usize),
    /// Failed submissions allowed before the episode ends.
    pub max_submit_attempts: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { max_dims: (10, 10), max_submit_attempts: 1 }
    }
}

/// Why an action cannot be performed in a state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidAction {
    #[error("operation {0} is stored padding and cannot be executed")]
    NotExecutable(Operation),
    #[error("unknown operation code {0}")]
    UnknownCode(u8),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("episode already terminated")]
    EpisodeTerminated,
    #[error("invalid action: {0}")]
    InvalidAction(#[from] InvalidAction),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub input: Grid,
    pub current: Grid,
    pub clipboard: Option<Grid>,
    pub step_index: usize,
    pub terminated: bool,
    pub submit_count: u32,
    pub config: EnvConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub terminated: bool,
}

fn check_playable(grid: &Grid, what: &str, config: &EnvConfig) -> Result<(), EnvError> {
    if !grid.is_playable() {
        return Err(EnvError::InvalidGrid(format!("{what} contains a non-playable color")));
    }
    let (mr, mc) = config.max_dims;
    if grid.rows() > mr || grid.cols() > mc {
        return Err(EnvError::InvalidGrid(format!(
            "{what} is {}x{}, larger than {mr}x{mc}",
            grid.rows(),
            grid.cols()
        )));
    }
    Ok(())
}

/// Starts an episode on `input`.
pub fn reset(input: &Grid, answer: &Grid, config: EnvConfig) -> Result<EnvState, EnvError> {
    check_playable(input, "input", &config)?;
    check_playable(answer, "answer", &config)?;
    Ok(EnvState {
        input: input.clone(),
        current: input.clone(),
        clipboard: None,
        step_index: 0,
        terminated: false,
        submit_count: 0,
        config,
    })
}

/// Grid-level effect of an action, without reward logic.
fn apply(state: &EnvState, action: &Action) -> Result<(Grid, Option<Grid>), InvalidAction> {
    let sel = action.sel;
    let cur = &state.current;
    let keep_clip = || state.clipboard.clone();
    let out = match action.op {
        Operation::Color(c) => (grid::fill_region(cur, sel, c)?, keep_clip()),
        Operation::FloodFill(c) => (grid::flood_fill(cur, sel, c)?, keep_clip()),
        Operation::Move(d) => (grid::move_region(cur, sel, d)?, keep_clip()),
        Operation::Transform(t) => (grid::transform_region(cur, sel, t)?, keep_clip()),
        Operation::CopyI => (cur.clone(), Some(grid::copy_region(&state.input, sel)?)),
        Operation::CopyO => (cur.clone(), Some(grid::copy_region(cur, sel)?)),
        Operation::Paste => {
            let clip = state.clipboard.as_ref().ok_or(GridError::EmptyClipboard)?;
            (grid::paste_region(cur, clip, sel)?, keep_clip())
        }
        Operation::CropGrid => (grid::crop_grid(cur, sel)?, keep_clip()),
        Operation::ResetGrid => (state.input.clone(), keep_clip()),
        Operation::ResizeGrid => {
            (grid::resize_grid(cur, sel, state.config.max_dims)?, keep_clip())
        }
        Operation::Submit => (cur.clone(), keep_clip()),
        Operation::None => return Err(InvalidAction::NotExecutable(Operation::None)),
    };
    Ok(out)
}

/// Checks whether `action` can be performed in `state`.
pub fn validate_action(state: &EnvState, action: &Action) -> Result<(), InvalidAction> {
    apply(state, action).map(|_| ())
}

/// Performs one transition.
pub fn step(state: &EnvState, action: &Action, answer: &Grid) -> Result<StepResult, EnvError> {
    if state.terminated {
        return Err(EnvError::EpisodeTerminated);
    }
    let (current, clipboard) = apply(state, action)?;
    let mut next = EnvState {
        input: state.input.clone(),
        current,
        clipboard,
        step_index: state.step_index + 1,
        terminated: false,
        submit_count: state.submit_count,
        config: state.config,
    };
    let mut reward = 0.0;
    if action.op == Operation::Submit {
        next.submit_count += 1;
        if next.current == *answer {
            reward = SUCCESS_REWARD;
            next.terminated = true;
        } else if next.submit_count >= state.config.max_submit_attempts {
            next.terminated = true;
        }
    }
    let terminated = next.terminated;
    Ok(StepResult { next_state: next, reward, terminated })
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {index}: {error}")]
pub struct ReplayError {
    pub index: usize,
    pub error: EnvError,
    /// Results of the steps that succeeded before the failure.
    pub completed: Vec<StepResult>,
}

/// Folds [`step`] over `actions` from [`reset`]. Actions after a terminating
/// step are reported as [`EnvError::EpisodeTerminated`] at their index.
pub fn replay(
    input: &Grid,
    answer: &Grid,
    actions: &[Action],
    config: EnvConfig,
) -> Result<Vec<StepResult>, ReplayError> {
    let mut state = reset(input, answer, config).map_err(|error| ReplayError {
        index: 0,
        error,
        completed: Vec::new(),
    })?;
    let mut results: Vec<StepResult> = Vec::with_capacity(actions.len());
    for (index, action) in actions.iter().enumerate() {
        match step(&state, action, answer) {
            Ok(res) => {
                state = res.next_state.clone();
                results.push(res);
            }
            Err(error) => return Err(ReplayError { index, error, completed: results }),
        }
    }
    Ok(results)
}

/// A live episode: state plus the hidden answer.
#[derive(Debug, Clone)]
pub struct Env {
    state: EnvState,
    answer: Grid,
}

impl Env {
    pub fn new(input: &Grid, answer: &Grid, config: EnvConfig) -> Result<Self, EnvError> {
        Ok(Env { state: reset(input, answer, config)?, answer: answer.clone() })
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn at_answer(&self) -> bool {
        self.state.current == self.answer
    }

    pub fn validate(&self, action: &Action) -> Result<(), InvalidAction> {
        validate_action(&self.state, action)
    }

    pub fn step(&mut self, action: &Action) -> Result<(f64, bool), EnvError> {
        let res = step(&self.state, action, &self.answer)?;
        self.state = res.next_state;
        Ok((res.reward, res.terminated))
    }
}

/// Every executable action whose selection lies within the given bounds.
/// Useful for exhaustive checks on small grids.
pub fn enumerate_actions(rows: usize, cols: usize) -> Vec<Action> {
    let mut out = Vec::new();
    for code in 0..=crate::ops::MAX_EXECUTABLE_CODE {
        let op = Operation::from_code(code).expect("code in table");
        if op.ignores_selection() {
            out.push(Action::new(op, Selection::ZERO));
            continue;
        }
        for x in 0..rows {
            for y in 0..cols {
                for h in 0..rows - x {
                    for w in 0..cols - y {
                        out.push(Action::new(op, Selection::new(x, y, h, w)));
                    }
                }
            }
        }
    }
    out
}
