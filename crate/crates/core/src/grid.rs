//! Grid value types and the region transformations every operation is built from.
//!
//! Coordinates follow the row/column convention: a [`Selection`] `(x, y, h, w)`
//! has its top-left corner at row `x`, column `y` and its bottom-right corner at
//! `(x + h, y + w)`. All functions here are pure and return new grids.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest color code. `0..=9` are the playable ARC colors, `10` marks padded
/// terminal states in stored data.
pub const MAX_COLOR: u8 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("selection {sel} is outside the {rows}x{cols} grid")]
    SelectionOutOfBounds { sel: Selection, rows: usize, cols: usize },
    #[error("rotation needs a square selection, got {sel}")]
    NonSquareRotation { sel: Selection },
    #[error("resize to {rows}x{cols} exceeds the {max_rows}x{max_cols} limit")]
    ExceedsMaxDims { rows: usize, cols: usize, max_rows: usize, max_cols: usize },
    #[error("clipboard is {clip_rows}x{clip_cols} but selection {sel} is {sel_rows}x{sel_cols}")]
    ClipboardDimMismatch {
        sel: Selection,
        sel_rows: usize,
        sel_cols: usize,
        clip_rows: usize,
        clip_cols: usize,
    },
    #[error("clipboard is empty")]
    EmptyClipboard,
    #[error("invalid color {0}")]
    InvalidColor(u8),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// A color code in `0..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Color(u8);

impl Color {
    /// The terminal-padding color.
    pub const PAD: Color = Color(MAX_COLOR);
    pub const BLACK: Color = Color(0);

    pub fn new(value: u8) -> Result<Self, GridError> {
        if value > MAX_COLOR {
            return Err(GridError::InvalidColor(value));
        }
        Ok(Color(value))
    }

    /// A color an agent may paint with (`0..=9`).
    pub fn playable(value: u8) -> Result<Self, GridError> {
        if value >= MAX_COLOR {
            return Err(GridError::InvalidColor(value));
        }
        Ok(Color(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_playable(self) -> bool {
        self.0 < MAX_COLOR
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Color::new(v).map_err(D::Error::custom)
    }
}

/// Bounding box `(x, y, h, w)`: top-left `(x, y)`, bottom-right `(x + h, y + w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Selection {
    pub x: usize,
    pub y: usize,
    pub h: usize,
    pub w: usize,
}

impl Selection {
    pub const ZERO: Selection = Selection { x: 0, y: 0, h: 0, w: 0 };

    pub const fn new(x: usize, y: usize, h: usize, w: usize) -> Self {
        Selection { x, y, h, w }
    }

    /// Selection of a single cell.
    pub const fn cell(row: usize, col: usize) -> Self {
        Selection { x: row, y: col, h: 0, w: 0 }
    }

    /// Selection spanning a whole `rows x cols` grid.
    pub fn whole(rows: usize, cols: usize) -> Self {
        Selection { x: 0, y: 0, h: rows.saturating_sub(1), w: cols.saturating_sub(1) }
    }

    pub fn rows(&self) -> usize {
        self.h.saturating_add(1)
    }

    pub fn cols(&self) -> usize {
        self.w.saturating_add(1)
    }

    pub fn bottom_right(&self) -> (usize, usize) {
        (self.x.saturating_add(self.h), self.y.saturating_add(self.w))
    }

    pub fn is_square(&self) -> bool {
        self.h == self.w
    }

    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        let (br, bc) = self.bottom_right();
        br < rows && bc < cols
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (br, bc) = self.bottom_right();
        row >= self.x && row <= br && col >= self.y && col <= bc
    }

    pub fn to_array(self) -> [usize; 4] {
        [self.x, self.y, self.h, self.w]
    }
}

impl From<[usize; 4]> for Selection {
    fn from(a: [usize; 4]) -> Self {
        Selection::new(a[0], a[1], a[2], a[3])
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x, self.y, self.h, self.w)
    }
}

impl Serialize for Selection {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Selection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(<[usize; 4]>::deserialize(d)?.into())
    }
}

/// The four in-place geometric transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    FlipV,
    FlipH,
    /// 90 degrees counterclockwise.
    Rotate90,
    /// 90 degrees clockwise.
    Rotate270,
}

/// Direction for shifting a region by one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

/// Rectangular matrix of colors stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl Grid {
    pub fn filled(rows: usize, cols: usize, color: Color) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::InvalidGrid(format!("empty dimensions {rows}x{cols}")));
        }
        Ok(Grid { rows, cols, cells: vec![color.value(); rows * cols] })
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::InvalidGrid(format!("empty dimensions {rows}x{cols}")));
        }
        if cells.len() != rows * cols {
            return Err(GridError::InvalidGrid(format!(
                "{} cells for a {rows}x{cols} grid",
                cells.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&c| c > MAX_COLOR) {
            return Err(GridError::InvalidColor(bad));
        }
        Ok(Grid { rows, cols, cells })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, GridError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(GridError::InvalidGrid(format!(
                    "row {i} has {} cells, expected {n_cols}",
                    row.len()
                )));
            }
            cells.extend_from_slice(row);
        }
        Grid::from_cells(n_rows, n_cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize, value: u8) {
        self.cells[row * self.cols + col] = value;
    }

    /// Returns a copy with one cell changed.
    pub fn with_cell(&self, row: usize, col: usize, color: Color) -> Result<Grid, GridError> {
        let sel = Selection::cell(row, col);
        self.check(sel)?;
        let mut out = self.clone();
        out.set(row, col, color.value());
        Ok(out)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.cells.chunks(self.cols).map(<[u8]>::to_vec).collect()
    }

    /// True when every cell is a playable color.
    pub fn is_playable(&self) -> bool {
        self.cells.iter().all(|&c| c < MAX_COLOR)
    }

    pub fn is_uniform(&self, color: Color) -> bool {
        self.cells.iter().all(|&c| c == color.value())
    }

    fn check(&self, sel: Selection) -> Result<(), GridError> {
        if sel.fits(self.rows, self.cols) {
            Ok(())
        } else {
            Err(GridError::SelectionOutOfBounds { sel, rows: self.rows, cols: self.cols })
        }
    }

    /// Stacks `self` on top of `below`. Column counts must agree.
    pub fn vstack(&self, below: &Grid) -> Result<Grid, GridError> {
        if self.cols != below.cols {
            return Err(GridError::InvalidGrid(format!(
                "cannot stack {} columns on {}",
                self.cols, below.cols
            )));
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&below.cells);
        Ok(Grid { rows: self.rows + below.rows, cols: self.cols, cells })
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid{:?}", self.to_rows())
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for row in self.cells.chunks(self.cols) {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<u8>>::deserialize(d)?;
        Grid::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Flips or rotates the cells inside `sel`; everything outside is untouched.
pub fn transform_region(grid: &Grid, sel: Selection, kind: Transform) -> Result<Grid, GridError> {
    grid.check(sel)?;
    if matches!(kind, Transform::Rotate90 | Transform::Rotate270) && !sel.is_square() {
        return Err(GridError::NonSquareRotation { sel });
    }
    let mut out = grid.clone();
    let (h, w) = (sel.h, sel.w);
    for i in 0..sel.rows() {
        for j in 0..sel.cols() {
            let (si, sj) = match kind {
                Transform::FlipV => (h - i, j),
                Transform::FlipH => (i, w - j),
                Transform::Rotate90 => (j, w - i),
                Transform::Rotate270 => (h - j, i),
            };
            out.set(sel.x + i, sel.y + j, grid.get(sel.x + si, sel.y + sj));
        }
    }
    Ok(out)
}

/// Resizes to `(x + h + 1) x (y + w + 1)`, keeping content top-left aligned.
/// New cells are black; content beyond the new bounds is cropped.
pub fn resize_grid(
    grid: &Grid,
    sel: Selection,
    max_dims: (usize, usize),
) -> Result<Grid, GridError> {
    let (br, bc) = sel.bottom_right();
    let (rows, cols) = (br.saturating_add(1), bc.saturating_add(1));
    if rows > max_dims.0 || cols > max_dims.1 {
        return Err(GridError::ExceedsMaxDims {
            rows,
            cols,
            max_rows: max_dims.0,
            max_cols: max_dims.1,
        });
    }
    let mut out = Grid::filled(rows, cols, Color::BLACK)?;
    for i in 0..rows.min(grid.rows) {
        for j in 0..cols.min(grid.cols) {
            out.set(i, j, grid.get(i, j));
        }
    }
    Ok(out)
}

/// Extracts the sub-grid under `sel`.
pub fn copy_region(grid: &Grid, sel: Selection) -> Result<Grid, GridError> {
    grid.check(sel)?;
    let mut cells = Vec::with_capacity(sel.rows() * sel.cols());
    for i in sel.x..=sel.x + sel.h {
        let start = i * grid.cols + sel.y;
        cells.extend_from_slice(&grid.cells[start..start + sel.cols()]);
    }
    Ok(Grid { rows: sel.rows(), cols: sel.cols(), cells })
}

/// Overwrites the cells under `sel` with `clip`, whose dims must match the selection.
pub fn paste_region(grid: &Grid, clip: &Grid, sel: Selection) -> Result<Grid, GridError> {
    grid.check(sel)?;
    if clip.dims() != (sel.rows(), sel.cols()) {
        return Err(GridError::ClipboardDimMismatch {
            sel,
            sel_rows: sel.rows(),
            sel_cols: sel.cols(),
            clip_rows: clip.rows,
            clip_cols: clip.cols,
        });
    }
    let mut out = grid.clone();
    for i in 0..clip.rows {
        for j in 0..clip.cols {
            out.set(sel.x + i, sel.y + j, clip.get(i, j));
        }
    }
    Ok(out)
}

/// Paints every cell under `sel`.
pub fn fill_region(grid: &Grid, sel: Selection, color: Color) -> Result<Grid, GridError> {
    grid.check(sel)?;
    if !color.is_playable() {
        return Err(GridError::InvalidColor(color.value()));
    }
    let mut out = grid.clone();
    for i in sel.x..=sel.x + sel.h {
        for j in sel.y..=sel.y + sel.w {
            out.set(i, j, color.value());
        }
    }
    Ok(out)
}

/// Recolors the 4-connected same-color region that contains the selection's
/// top-left cell.
pub fn flood_fill(grid: &Grid, sel: Selection, color: Color) -> Result<Grid, GridError> {
    grid.check(sel)?;
    if !color.is_playable() {
        return Err(GridError::InvalidColor(color.value()));
    }
    let target = grid.get(sel.x, sel.y);
    let mut out = grid.clone();
    if target == color.value() {
        return Ok(out);
    }
    let mut stack = vec![(sel.x, sel.y)];
    out.set(sel.x, sel.y, color.value());
    while let Some((r, c)) = stack.pop() {
        let mut visit = |nr: usize, nc: usize, out: &mut Grid| {
            if out.get(nr, nc) == target {
                out.set(nr, nc, color.value());
                stack.push((nr, nc));
            }
        };
        if r > 0 {
            visit(r - 1, c, &mut out);
        }
        if r + 1 < grid.rows {
            visit(r + 1, c, &mut out);
        }
        if c > 0 {
            visit(r, c - 1, &mut out);
        }
        if c + 1 < grid.cols {
            visit(r, c + 1, &mut out);
        }
    }
    Ok(out)
}

/// Shifts the contents of `sel` by one cell. Cells pushed past the selection
/// edge are dropped and vacated cells become black.
pub fn move_region(grid: &Grid, sel: Selection, dir: Direction) -> Result<Grid, GridError> {
    grid.check(sel)?;
    let mut out = grid.clone();
    let (rows, cols) = (sel.rows() as isize, sel.cols() as isize);
    let (dr, dc): (isize, isize) = match dir {
        Direction::Up => (-1, 0),
        Direction::Down => (1, 0),
        Direction::Left => (0, -1),
        Direction::Right => (0, 1),
    };
    for i in 0..rows {
        for j in 0..cols {
            let (si, sj) = (i - dr, j - dc);
            let v = if (0..rows).contains(&si) && (0..cols).contains(&sj) {
                grid.get(sel.x + si as usize, sel.y + sj as usize)
            } else {
                0
            };
            out.set(sel.x + i as usize, sel.y + j as usize, v);
        }
    }
    Ok(out)
}

/// Shrinks the grid to the selection.
pub fn crop_grid(grid: &Grid, sel: Selection) -> Result<Grid, GridError> {
    copy_region(grid, sel)
}
