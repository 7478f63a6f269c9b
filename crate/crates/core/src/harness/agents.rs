//! Built-in agents: a rule-following oracle, a seeded random agent and a
//! scripted agent for tests.

use std::collections::VecDeque;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{self, EnvConfig, EnvState};
use crate::grid::{Grid, Selection};
use crate::maker::Task;
use crate::ops::{Action, Operation, MAX_EXECUTABLE_CODE};
use crate::seed;

use super::protocol::{ActionMsg, InitMsg, ResultMsg, StateMsg};
use super::{Agent, AgentError, AgentFactory};

/// Plans with the task rule from the demonstrations and test input, then
/// plays the plan. Falls back to `Submit` when the plan runs out.
pub struct OracleAgent {
    task: Task,
    plan: VecDeque<Action>,
}

impl OracleAgent {
    pub fn new(task: Task) -> Self {
        OracleAgent { task, plan: VecDeque::new() }
    }
}

impl Agent for OracleAgent {
    fn init(&mut self, msg: &InitMsg) -> Result<(), AgentError> {
        self.plan = self.task.solve(&msg.demonstrations, &msg.test_input).unwrap_or_default().into();
        Ok(())
    }

    fn act(&mut self, _msg: &StateMsg) -> Result<ActionMsg, AgentError> {
        Ok(self.plan.pop_front().unwrap_or_else(Action::submit).into())
    }

    fn result(&mut self, _msg: &ResultMsg) -> Result<(), AgentError> {
        Ok(())
    }

    fn end(&mut self) -> Result<(), AgentError> {
        Ok(())
    }
}

/// Draws uniformly among executable operation codes with a random selection
/// inside the current grid, redrawing until the action is valid.
pub struct RandomAgent {
    rng: ChaCha8Rng,
    config: EnvConfig,
    input: Option<Grid>,
}

/// Redraws per step before giving up and submitting.
const MAX_DRAWS: usize = 10_000;

impl RandomAgent {
    pub fn new(seed: u64, config: EnvConfig) -> Self {
        RandomAgent { rng: seed::rng(seed), config, input: None }
    }

    fn draw(&mut self, rows: usize, cols: usize) -> Action {
        let code = self.rng.random_range(0..=MAX_EXECUTABLE_CODE);
        let op = Operation::from_code(code).expect("codes up to 34 exist");
        let x = self.rng.random_range(0..rows);
        let y = self.rng.random_range(0..cols);
        let h = self.rng.random_range(0..rows - x);
        let w = self.rng.random_range(0..cols - y);
        Action::new(op, Selection::new(x, y, h, w))
    }
}

impl Agent for RandomAgent {
    fn init(&mut self, msg: &InitMsg) -> Result<(), AgentError> {
        self.input = Some(msg.test_input.clone());
        Ok(())
    }

    fn act(&mut self, msg: &StateMsg) -> Result<ActionMsg, AgentError> {
        let input = self.input.clone().ok_or_else(|| AgentError::Protocol("state before init".into()))?;
        let state = EnvState {
            input,
            current: msg.current.clone(),
            clipboard: msg.clipboard.clone(),
            step_index: msg.t,
            terminated: false,
            submit_count: 0,
            config: self.config,
        };
        for _ in 0..MAX_DRAWS {
            let a = self.draw(msg.current.rows(), msg.current.cols());
            if env::validate_action(&state, &a).is_ok() {
                return Ok(a.into());
            }
        }
        Ok(Action::submit().into())
    }

    fn result(&mut self, _msg: &ResultMsg) -> Result<(), AgentError> {
        Ok(())
    }

    fn end(&mut self) -> Result<(), AgentError> {
        Ok(())
    }
}

/// Sends a fixed list of actions, then `Submit`.
pub struct ScriptedAgent {
    script: VecDeque<ActionMsg>,
}

impl ScriptedAgent {
    pub fn new(script: impl IntoIterator<Item = ActionMsg>) -> Self {
        ScriptedAgent { script: script.into_iter().collect() }
    }
}

impl Agent for ScriptedAgent {
    fn init(&mut self, _msg: &InitMsg) -> Result<(), AgentError> {
        Ok(())
    }

    fn act(&mut self, _msg: &StateMsg) -> Result<ActionMsg, AgentError> {
        Ok(self.script.pop_front().unwrap_or_else(|| Action::submit().into()))
    }

    fn result(&mut self, _msg: &ResultMsg) -> Result<(), AgentError> {
        Ok(())
    }

    fn end(&mut self) -> Result<(), AgentError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    Oracle,
    Random,
}

impl FromStr for BuiltinKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(BuiltinKind::Oracle),
            "random" => Ok(BuiltinKind::Random),
            other => Err(format!("unknown builtin agent {other:?} (expected oracle or random)")),
        }
    }
}

/// Factory for in-process built-in agents. Random agents get a seed derived
/// from `(seed, repeat, problem)` so runs are reproducible in any order.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinFactory {
    pub kind: BuiltinKind,
    pub task: Task,
    pub seed: u64,
    pub config: EnvConfig,
}

impl BuiltinFactory {
    pub fn agent_seed(&self, repeat: usize, problem_index: usize) -> u64 {
        seed::derive(self.seed, &[seed::TAG_AGENT, repeat as u64, problem_index as u64])
    }

    pub fn build(&self, repeat: usize, problem_index: usize) -> Box<dyn Agent + Send> {
        match self.kind {
            BuiltinKind::Oracle => Box::new(OracleAgent::new(self.task)),
            BuiltinKind::Random => Box::new(RandomAgent::new(self.agent_seed(repeat, problem_index), self.config)),
        }
    }
}

impl AgentFactory for BuiltinFactory {
    fn create(&self, repeat: usize, problem_index: usize) -> Result<Box<dyn Agent>, AgentError> {
        Ok(self.build(repeat, problem_index))
    }
}
