//! Line-delimited agent protocol.
//!
//! One JSON object per line, UTF-8. Per episode the environment sends `init`,
//! then repeats `state` → (agent) `action` → `result`, then sends `end`.
//!
//! ```text
//! {"type":"init","episode_id":str,"demonstrations":[{"input":grid,"output":grid}...],"test_input":grid,"max_steps":int}
//! {"type":"state","t":int,"current":grid,"clipboard":grid|null}
//! {"type":"action","op":int,"sel":[x,y,h,w]}
//! {"type":"result","reward":number,"terminated":bool,"invalid":str|null}
//! {"type":"end"}
//! ```

use serde::{Deserialize, Serialize};

use crate::env::InvalidAction;
use crate::grid::{Grid, Selection};
use crate::maker::Demonstration;
use crate::ops::{Action, Operation};

use super::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitMsg {
    pub episode_id: String,
    pub demonstrations: Vec<Demonstration>,
    pub test_input: Grid,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMsg {
    pub t: usize,
    pub current: Grid,
    pub clipboard: Option<Grid>,
}

/// An action as sent by an agent. Codes and coordinates are kept raw so that
/// an out-of-table code is an invalid action rather than a protocol error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMsg {
    pub op: u64,
    pub sel: [u64; 4],
}

impl ActionMsg {
    pub fn to_action(&self) -> Result<Action, InvalidAction> {
        let op = u8::try_from(self.op)
            .ok()
            .and_then(Operation::from_code)
            .ok_or(InvalidAction::UnknownCode(self.op.min(u8::MAX as u64) as u8))?;
        let s = self.sel.map(|v| usize::try_from(v).unwrap_or(usize::MAX));
        Ok(Action::new(op, Selection::from(s)))
    }
}

impl From<Action> for ActionMsg {
    fn from(a: Action) -> Self {
        ActionMsg { op: a.op.code() as u64, sel: a.sel.to_array().map(|v| v as u64) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMsg {
    pub reward: f64,
    pub terminated: bool,
    pub invalid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Init(InitMsg),
    State(StateMsg),
    Action(ActionMsg),
    Result(ResultMsg),
    End,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Init(_) => "init",
            Message::State(_) => "state",
            Message::Action(_) => "action",
            Message::Result(_) => "result",
            Message::End => "end",
        }
    }

    /// Encodes the message as one line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn from_line(line: &str) -> Result<Message, AgentError> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
            .map_err(|e| AgentError::Protocol(format!("malformed message {line:?}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let grid = Grid::from_rows(&[[1u8, 2]]).unwrap();
        let state = Message::State(StateMsg { t: 0, current: grid.clone(), clipboard: None });
        assert_eq!(state.to_line(), r#"{"type":"state","t":0,"current":[[1,2]],"clipboard":null}"#);
        let action = Message::Action(ActionMsg { op: 30, sel: [3, 0, 2, 2] });
        assert_eq!(action.to_line(), r#"{"type":"action","op":30,"sel":[3,0,2,2]}"#);
        let result = Message::Result(ResultMsg { reward: 1.0, terminated: true, invalid: None });
        assert_eq!(result.to_line(), r#"{"type":"result","reward":1.0,"terminated":true,"invalid":null}"#);
        assert_eq!(Message::End.to_line(), r#"{"type":"end"}"#);
        let init = Message::Init(InitMsg {
            episode_id: "e".into(),
            demonstrations: vec![Demonstration { input: grid.clone(), output: grid.clone() }],
            test_input: grid,
            max_steps: 20,
        });
        assert_eq!(
            init.to_line(),
            r#"{"type":"init","episode_id":"e","demonstrations":[{"input":[[1,2]],"output":[[1,2]]}],"test_input":[[1,2]],"max_steps":20}"#
        );
        for m in [state, action, result, Message::End, init] {
            assert_eq!(Message::from_line(&m.to_line()).unwrap(), m);
        }
    }

    #[test]
    fn malformed_lines_are_protocol_errors() {
        for bad in ["", "{", r#"{"type":"bogus"}"#, r#"{"type":"action","op":-1,"sel":[0,0,0,0]}"#] {
            assert!(matches!(Message::from_line(bad), Err(AgentError::Protocol(_))), "{bad}");
        }
    }

    #[test]
    fn out_of_table_code_is_invalid_action() {
        let msg = ActionMsg { op: 40, sel: [0, 0, 0, 0] };
        assert_eq!(msg.to_action(), Err(InvalidAction::UnknownCode(40)));
        let ok = ActionMsg { op: 34, sel: [0, 0, 0, 0] }.to_action().unwrap();
        assert_eq!(ok, Action::submit());
    }
}
