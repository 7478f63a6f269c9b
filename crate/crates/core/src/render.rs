//! Plain-text rendering of grids for terminal inspection.

use crate::grid::Grid;

/// One character per cell: digits for colors 0-9, `.` for padding.
pub fn render_grid(grid: &Grid) -> String {
    let mut out = String::with_capacity(grid.rows() * (grid.cols() + 1));
    for row in grid.to_rows() {
        for c in row {
            out.push(if c < 10 { char::from(b'0' + c) } else { '.' });
        }
        out.push('\n');
    }
    out
}

/// Renders grids next to each other, separated by `sep` and top-aligned.
pub fn side_by_side(grids: &[&Grid], sep: &str) -> String {
    let height = grids.iter().map(|g| g.rows()).max().unwrap_or(0);
    let mut out = String::new();
    for r in 0..height {
        let cells: Vec<String> = grids
            .iter()
            .map(|g| {
                if r < g.rows() {
                    render_grid(g).lines().nth(r).unwrap_or_default().to_string()
                } else {
                    " ".repeat(g.cols())
                }
            })
            .collect();
        out.push_str(cells.join(sep).trim_end());
        out.push('\n');
    }
    out
}
