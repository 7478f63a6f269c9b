//! The fixed operation table (codes 0 to 35) and the action tuple.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::grid::{Color, Direction, Selection, Transform};

/// Highest code an agent may execute.
pub const MAX_EXECUTABLE_CODE: u8 = 34;
/// Number of codes in the table, including the padding-only `None`.
pub const NUM_OPERATIONS: usize = 36;

/// One entry of the operation table.
///
/// | code  | operation |
/// |-------|-----------|
/// | 0-9   | `Color(c)`: paint every selected cell |
/// | 10-19 | `FloodFill(c)`: seeded at the selection's top-left |
/// | 20-23 | `Move` up, down, left, right |
/// | 24    | `Rotate90` (counterclockwise) |
/// | 25    | `Rotate270` (clockwise) |
/// | 26    | `FlipH` |
/// | 27    | `FlipV` |
/// | 28    | `CopyI`: input grid to clipboard |
/// | 29    | `CopyO`: current grid to clipboard |
/// | 30    | `Paste` |
/// | 31    | `CropGrid` |
/// | 32    | `ResetGrid` |
/// | 33    | `ResizeGrid` |
/// | 34    | `Submit` |
/// | 35    | `None`: stored padding after termination |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Color(Color),
    FloodFill(Color),
    Move(Direction),
    Transform(Transform),
    CopyI,
    CopyO,
    Paste,
    CropGrid,
    ResetGrid,
    ResizeGrid,
    Submit,
    None,
}

impl Operation {
    pub const ROTATE90: Operation = Operation::Transform(Transform::Rotate90);
    pub const ROTATE270: Operation = Operation::Transform(Transform::Rotate270);
    pub const FLIP_H: Operation = Operation::Transform(Transform::FlipH);
    pub const FLIP_V: Operation = Operation::Transform(Transform::FlipV);

    pub fn from_code(code: u8) -> Option<Operation> {
        use Operation::*;
        Some(match code {
            0..=9 => Color(crate::grid::Color::playable(code).ok()?),
            10..=19 => FloodFill(crate::grid::Color::playable(code - 10).ok()?),
            20 => Move(Direction::Up),
            21 => Move(Direction::Down),
            22 => Move(Direction::Left),
            23 => Move(Direction::Right),
            24 => Operation::ROTATE90,
            25 => Operation::ROTATE270,
            26 => Operation::FLIP_H,
            27 => Operation::FLIP_V,
            28 => CopyI,
            29 => CopyO,
            30 => Paste,
            31 => CropGrid,
            32 => ResetGrid,
            33 => ResizeGrid,
            34 => Submit,
            35 => None,
            _ => return Option::None,
        })
    }

    pub fn code(self) -> u8 {
        use Operation::*;
        match self {
            Color(c) => c.value(),
            FloodFill(c) => 10 + c.value(),
            Move(Direction::Up) => 20,
            Move(Direction::Down) => 21,
            Move(Direction::Left) => 22,
            Move(Direction::Right) => 23,
            Transform(crate::grid::Transform::Rotate90) => 24,
            Transform(crate::grid::Transform::Rotate270) => 25,
            Transform(crate::grid::Transform::FlipH) => 26,
            Transform(crate::grid::Transform::FlipV) => 27,
            CopyI => 28,
            CopyO => 29,
            Paste => 30,
            CropGrid => 31,
            ResetGrid => 32,
            ResizeGrid => 33,
            Submit => 34,
            None => 35,
        }
    }

    /// Whether the selection is meaningless for this operation.
    pub fn ignores_selection(self) -> bool {
        matches!(self, Operation::Submit | Operation::None | Operation::ResetGrid)
    }

    pub fn name(self) -> String {
        use Operation::*;
        match self {
            Color(c) => format!("Color{}", c.value()),
            FloodFill(c) => format!("FloodFill{}", c.value()),
            Move(d) => format!("Move{d:?}"),
            Transform(t) => format!("{t:?}"),
            other => format!("{other:?}"),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.code())
    }
}

impl Serialize for Operation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for Operation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(d)?;
        Operation::from_code(code)
            .ok_or_else(|| D::Error::custom(format!("unknown operation code {code}")))
    }
}

/// An operation applied to a selection. Serialized as `{"op": code, "sel": [x, y, h, w]}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub op: Operation,
    pub sel: Selection,
}

impl Action {
    pub fn new(op: Operation, sel: Selection) -> Self {
        Action { op, sel }
    }

    pub fn submit() -> Self {
        Action { op: Operation::Submit, sel: Selection::ZERO }
    }

    /// The stored padding action used after termination.
    pub fn none() -> Self {
        Action { op: Operation::None, sel: Selection::ZERO }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, self.sel)
    }
}
