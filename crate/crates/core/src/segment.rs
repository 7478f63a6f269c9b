//! Fixed-horizon segmentation of episodes.
//!
//! Episodes are cut into non-overlapping chunks of `H` steps. The tail of the
//! last chunk is padded with `None` actions whose states are filled entirely
//! with the padding color, zero reward and `terminated = true`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{Episode, Step, StoredState};
use crate::grid::{Color, Grid};
use crate::ops::{Action, Operation};

pub const DEFAULT_HORIZON: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("segments of {0} are not contiguous")]
    Discontiguous(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub trajectory_id: String,
    pub start_t: usize,
    pub states: Vec<StoredState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub terminateds: Vec<bool>,
}

impl Segment {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    /// Number of entries that carry real steps.
    pub fn real_len(&self) -> usize {
        self.actions.iter().take_while(|a| a.op != Operation::None).count()
    }

    pub fn is_padded(&self) -> bool {
        self.real_len() < self.horizon()
    }
}

/// State stored for padding entries: current and clipboard both filled with
/// the padding color at `pad_dims`.
pub fn padding_state(pad_dims: (usize, usize)) -> StoredState {
    let pad = Grid::filled(pad_dims.0, pad_dims.1, Color::PAD).expect("pad dims are positive");
    StoredState { current: pad.clone(), clipboard: Some(pad) }
}

pub fn segment_episode(
    episode: &Episode,
    horizon: usize,
    pad_dims: (usize, usize),
) -> Result<Vec<Segment>, SegmentError> {
    if horizon == 0 {
        return Err(SegmentError::ZeroHorizon);
    }
    let pad = padding_state(pad_dims);
    Ok(episode
        .steps
        .chunks(horizon)
        .enumerate()
        .map(|(i, chunk)| {
            let mut seg = Segment {
                trajectory_id: episode.trajectory_id.clone(),
                start_t: i * horizon,
                states: Vec::with_capacity(horizon),
                actions: Vec::with_capacity(horizon),
                rewards: Vec::with_capacity(horizon),
                terminateds: Vec::with_capacity(horizon),
            };
            for s in chunk {
                seg.states.push(s.state.clone());
                seg.actions.push(s.action);
                seg.rewards.push(s.reward);
                seg.terminateds.push(s.terminated);
            }
            for _ in chunk.len()..horizon {
                seg.states.push(pad.clone());
                seg.actions.push(Action::none());
                seg.rewards.push(0.0);
                seg.terminateds.push(true);
            }
            seg
        })
        .collect())
}

/// Segments every episode, in order. Each episode yields `ceil(len / H)` segments.
pub fn segment_dataset(
    episodes: &[Episode],
    horizon: usize,
    pad_dims: (usize, usize),
) -> Result<Vec<Segment>, SegmentError> {
    let mut out = Vec::new();
    for ep in episodes {
        out.extend(segment_episode(ep, horizon, pad_dims)?);
    }
    Ok(out)
}

/// Concatenates one episode's segments and drops padding.
pub fn reassemble(segments: &[Segment]) -> Result<Vec<Step>, SegmentError> {
    let mut steps = Vec::new();
    for seg in segments {
        if seg.start_t != steps.len() {
            return Err(SegmentError::Discontiguous(seg.trajectory_id.clone()));
        }
        for i in 0..seg.real_len() {
            steps.push(Step {
                t: seg.start_t + i,
                state: seg.states[i].clone(),
                action: seg.actions[i],
                reward: seg.rewards[i],
                terminated: seg.terminateds[i],
            });
        }
    }
    Ok(steps)
}
