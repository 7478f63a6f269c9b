//! Grid puzzle environment, trajectory synthesis, dataset storage and agent
//! evaluation for ARC-style tasks.

pub mod dataset;
pub mod env;
pub mod generator;
pub mod grid;
pub mod harness;
pub mod maker;
pub mod ops;
pub mod render;
pub mod seed;
pub mod segment;

pub use env::{Env, EnvConfig, EnvError, EnvState, InvalidAction, StepResult};
pub use generator::{generate, Episode, Generated, Step, StoredState};
pub use grid::{Color, Grid, GridError, Selection};
pub use maker::{Demonstration, ProblemInstance, Task, TaskParams};
pub use ops::{Action, Operation};
pub use segment::Segment;
