//! Diagonal task: two filled squares of distinct colors. The first color's
//! square grows a diagonal from its top-left corner toward the top-left edge;
//! the second color's square grows one from its bottom-right corner toward
//! the bottom-right edge.
//!
//! Colors are drawn once per problem and shared by every pair; grid sizes,
//! square sizes and positions vary per pair.

use std::collections::HashSet;

use rand::Rng;

use super::{Demonstration, MakerError, ProblemInstance, TaskParams};
use crate::grid::{Color, Grid, Selection};
use crate::ops::{Action, Operation};
use crate::seed;

pub const MIN_SIDE: usize = 5;
pub const MAX_SQUARE: usize = 3;
const MAX_PLACEMENT_TRIES: usize = 200;

/// Color roles for one problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roles {
    /// Square whose top-left corner walks up-left.
    pub up_left: Color,
    /// Square whose bottom-right corner walks down-right.
    pub down_right: Color,
}

/// Cells strictly beyond `corner`, stepping by `(dr, dc)` until the edge.
pub fn diagonal_walk(rows: usize, cols: usize, corner: (usize, usize), dr: isize, dc: isize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut r, mut c) = (corner.0 as isize, corner.1 as isize);
    loop {
        r += dr;
        c += dc;
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            return out;
        }
        out.push((r as usize, c as usize));
    }
}

/// Filled axis-aligned square found in a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Square {
    color: u8,
    top: usize,
    left: usize,
    side: usize,
}

impl Square {
    fn bottom_right(&self) -> (usize, usize) {
        (self.top + self.side - 1, self.left + self.side - 1)
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.top..self.top + self.side)
            .flat_map(move |r| (self.left..self.left + self.side).map(move |c| (r, c)))
    }
}

/// Diagonal cells painted for the given squares, in painting order.
fn strokes(rows: usize, cols: usize, up_left: &Square, down_right: &Square) -> Vec<(usize, usize, u8)> {
    let a = diagonal_walk(rows, cols, (up_left.top, up_left.left), -1, -1)
        .into_iter()
        .map(|(r, c)| (r, c, up_left.color));
    let b = diagonal_walk(rows, cols, down_right.bottom_right(), 1, 1)
        .into_iter()
        .map(|(r, c)| (r, c, down_right.color));
    a.chain(b).collect()
}

fn paint(input: &Grid, strokes: &[(usize, usize, u8)]) -> Grid {
    let mut rows = input.to_rows();
    for &(r, c, color) in strokes {
        rows[r][c] = color;
    }
    Grid::from_rows(&rows).expect("same shape")
}

/// Finds one filled square per non-background color. `None` when the grid
/// holds anything other than exactly such squares.
fn find_squares(grid: &Grid) -> Option<Vec<Square>> {
    let mut colors: Vec<u8> = grid.cells().iter().copied().filter(|&c| c != 0).collect();
    colors.sort_unstable();
    colors.dedup();
    colors
        .into_iter()
        .map(|color| {
            let cells: Vec<(usize, usize)> = (0..grid.rows())
                .flat_map(|r| (0..grid.cols()).map(move |c| (r, c)))
                .filter(|&(r, c)| grid.get(r, c) == color)
                .collect();
            let top = cells.iter().map(|p| p.0).min()?;
            let bottom = cells.iter().map(|p| p.0).max()?;
            let left = cells.iter().map(|p| p.1).min()?;
            let right = cells.iter().map(|p| p.1).max()?;
            let side = bottom - top + 1;
            (side == right - left + 1 && cells.len() == side * side)
                .then_some(Square { color, top, left, side })
        })
        .collect()
}

/// Output of the rule for `input` under `roles`, or `None` if the input does
/// not contain exactly the two role-colored squares.
pub fn apply_rule(input: &Grid, roles: Roles) -> Option<Grid> {
    let squares = find_squares(input)?;
    if squares.len() != 2 {
        return None;
    }
    let get = |c: Color| squares.iter().find(|s| s.color == c.value()).copied();
    let (a, b) = (get(roles.up_left)?, get(roles.down_right)?);
    Some(paint(input, &strokes(input.rows(), input.cols(), &a, &b)))
}

fn random_pair<R: Rng>(rng: &mut R, params: &TaskParams, roles: Roles) -> Result<Demonstration, MakerError> {
    let (max_h, max_w) = params.max_dims;
    for _ in 0..MAX_PLACEMENT_TRIES {
        let rows = rng.random_range(MIN_SIDE..=max_h);
        let cols = rng.random_range(MIN_SIDE..=max_w);
        let mut place = |color: Color| {
            let side = rng.random_range(1..=MAX_SQUARE);
            Square {
                color: color.value(),
                top: rng.random_range(0..=rows - side),
                left: rng.random_range(0..=cols - side),
                side,
            }
        };
        let a = place(roles.up_left);
        let b = place(roles.down_right);
        let occupied: HashSet<(usize, usize)> = a.cells().chain(b.cells()).collect();
        if occupied.len() != a.side * a.side + b.side * b.side {
            continue;
        }
        let paint_cells = strokes(rows, cols, &a, &b);
        let painted: HashSet<(usize, usize)> = paint_cells.iter().map(|&(r, c, _)| (r, c)).collect();
        // Diagonals must run over background only and never cross each other.
        if painted.len() != paint_cells.len() || !painted.is_disjoint(&occupied) {
            continue;
        }
        let mut cells = vec![0u8; rows * cols];
        for s in [a, b] {
            for (r, c) in s.cells() {
                cells[r * cols + c] = s.color;
            }
        }
        let input = Grid::from_cells(rows, cols, cells).expect("valid colors");
        let output = paint(&input, &paint_cells);
        return Ok(Demonstration { input, output });
    }
    Err(MakerError::PlacementFailure(MAX_PLACEMENT_TRIES))
}

pub fn make_problem(
    seed: u64,
    params: &TaskParams,
    problem_id: String,
) -> Result<ProblemInstance, MakerError> {
    let (max_h, max_w) = params.max_dims;
    if max_h < MIN_SIDE || max_w < MIN_SIDE {
        return Err(MakerError::DimsTooSmall(max_h, max_w));
    }
    let mut rng = seed::rng(seed);
    let first = rng.random_range(1..=9u8);
    let mut second = rng.random_range(1..=8u8);
    if second >= first {
        second += 1;
    }
    let roles = Roles {
        up_left: Color::playable(first).expect("1..=9"),
        down_right: Color::playable(second).expect("1..=9"),
    };
    let swapped = Roles { up_left: roles.down_right, down_right: roles.up_left };
    let mut demonstrations = Vec::new();
    // Demonstrations must pin down which color plays which role.
    for _ in 0..MAX_PLACEMENT_TRIES {
        demonstrations = (0..params.demos_per_problem)
            .map(|_| random_pair(&mut rng, params, roles))
            .collect::<Result<Vec<_>, _>>()?;
        let ambiguous = demonstrations
            .iter()
            .all(|d| apply_rule(&d.input, swapped).as_ref() == Some(&d.output));
        if !ambiguous || params.demos_per_problem == 0 {
            break;
        }
    }
    let test = random_pair(&mut rng, params, roles)?;
    Ok(ProblemInstance {
        problem_id,
        demonstrations,
        test_input: test.input,
        test_output: test.output,
    })
}

/// Role assignment consistent with every given pair, trying the lower color
/// as the up-left role first.
fn infer_roles<'a>(pairs: impl Iterator<Item = (&'a Grid, &'a Grid)> + Clone, colors: (u8, u8)) -> Option<Roles> {
    let (lo, hi) = (colors.0.min(colors.1), colors.0.max(colors.1));
    let c = |v| Color::playable(v).ok();
    [(lo, hi), (hi, lo)].into_iter().find_map(|(ul, dr)| {
        let roles = Roles { up_left: c(ul)?, down_right: c(dr)? };
        pairs
            .clone()
            .all(|(i, o)| apply_rule(i, roles).as_ref() == Some(o))
            .then_some(roles)
    })
}

fn test_colors(grid: &Grid) -> Option<(u8, u8)> {
    match find_squares(grid)?.as_slice() {
        [a, b] => Some((a.color, b.color)),
        _ => None,
    }
}

fn actions_for(input: &Grid, roles: Roles) -> Option<Vec<Action>> {
    let squares = find_squares(input)?;
    let get = |c: Color| squares.iter().find(|s| s.color == c.value()).copied();
    let (a, b) = (get(roles.up_left)?, get(roles.down_right)?);
    let mut actions: Vec<Action> = strokes(input.rows(), input.cols(), &a, &b)
        .into_iter()
        .map(|(r, c, color)| {
            let color = Color::playable(color).expect("square colors are playable");
            Action::new(Operation::Color(color), Selection::cell(r, c))
        })
        .collect();
    actions.push(Action::submit());
    Some(actions)
}

/// One 1x1 `Color` action per diagonal cell, then `Submit`.
pub fn gold_actions(problem: &ProblemInstance) -> Result<Vec<Action>, MakerError> {
    let colors = test_colors(&problem.test_input).ok_or(MakerError::Unsolvable)?;
    let pairs = problem
        .demonstrations
        .iter()
        .map(|d| (&d.input, &d.output))
        .chain(std::iter::once((&problem.test_input, &problem.test_output)));
    let roles = infer_roles(pairs, colors).ok_or(MakerError::Unsolvable)?;
    actions_for(&problem.test_input, roles).ok_or(MakerError::Unsolvable)
}

/// Plans from the demonstrations and test input only.
pub fn solve(demonstrations: &[Demonstration], test_input: &Grid) -> Option<Vec<Action>> {
    let colors = test_colors(test_input)?;
    let roles = infer_roles(demonstrations.iter().map(|d| (&d.input, &d.output)), colors)?;
    actions_for(test_input, roles)
}

pub fn conforms(problem: &ProblemInstance) -> bool {
    gold_actions(problem).is_ok()
}

/// Gold prefix up to a random branch point, then single-cell paints of random
/// colors at random cells, then `Submit`.
pub fn nonoptimal_actions(
    problem: &ProblemInstance,
    seed: u64,
    params: &TaskParams,
) -> Result<Vec<Action>, MakerError> {
    let gold = gold_actions(problem)?;
    let mut rng = seed::rng(seed);
    let branch = rng.random_range(0..gold.len());
    let lo = params.nonoptimal_len.saturating_sub(params.nonoptimal_jitter);
    let target = rng.random_range(lo..=params.nonoptimal_len + params.nonoptimal_jitter);
    let random_steps = target.saturating_sub(branch + 1).max(1);
    let (rows, cols) = problem.test_input.dims();
    let mut actions = gold[..branch].to_vec();
    for _ in 0..random_steps {
        let color = Color::playable(rng.random_range(0..=9u8)).expect("0..=9");
        let cell = Selection::cell(rng.random_range(0..rows), rng.random_range(0..cols));
        actions.push(Action::new(Operation::Color(color), cell));
    }
    actions.push(Action::submit());
    Ok(actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{replay, EnvConfig};

    fn square_grid(rows: usize, cols: usize, squares: &[(u8, usize, usize, usize)]) -> Grid {
        let mut cells = vec![0u8; rows * cols];
        for &(color, top, left, side) in squares {
            for r in top..top + side {
                for c in left..left + side {
                    cells[r * cols + c] = color;
                }
            }
        }
        Grid::from_cells(rows, cols, cells).unwrap()
    }

    fn roles(a: u8, b: u8) -> Roles {
        Roles { up_left: Color::new(a).unwrap(), down_right: Color::new(b).unwrap() }
    }

    #[test]
    fn walk_from_center() {
        assert_eq!(diagonal_walk(5, 5, (2, 2), -1, -1), vec![(1, 1), (0, 0)]);
        assert!(diagonal_walk(5, 5, (0, 3), -1, -1).is_empty());
        assert!(diagonal_walk(5, 5, (4, 1), 1, 1).is_empty());
    }

    #[test]
    fn rule_paints_both_diagonals() {
        let input = square_grid(5, 5, &[(7, 2, 2, 1), (3, 3, 0, 1)]);
        let out = apply_rule(&input, roles(7, 3)).unwrap();
        assert_eq!(out.get(1, 1), 7);
        assert_eq!(out.get(0, 0), 7);
        assert_eq!(out.get(4, 1), 3);
        let changed = input.cells().iter().zip(out.cells()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 3);
    }

    #[test]
    fn gold_paints_each_diagonal_cell() {
        let input = square_grid(5, 5, &[(7, 2, 2, 1), (3, 0, 4, 1)]);
        let output = apply_rule(&input, roles(7, 3)).unwrap();
        let problem = ProblemInstance {
            problem_id: "d".into(),
            demonstrations: vec![],
            test_input: input.clone(),
            test_output: output.clone(),
        };
        let acts = gold_actions(&problem).unwrap();
        let paint7 = |r, c| Action::new(Operation::Color(Color::new(7).unwrap()), Selection::cell(r, c));
        // The second square sits in the top-right corner: its walk leaves the grid at once.
        assert_eq!(acts, vec![paint7(1, 1), paint7(0, 0), Action::submit()]);
        let res = replay(&input, &output, &acts, EnvConfig::default()).unwrap();
        assert_eq!(res.last().unwrap().reward, 1.0);
    }

    #[test]
    fn corners_at_edges_give_bare_submit() {
        let input = square_grid(6, 6, &[(2, 0, 0, 2), (5, 4, 4, 2)]);
        let problem = ProblemInstance {
            problem_id: "d".into(),
            demonstrations: vec![],
            test_input: input.clone(),
            test_output: input.clone(),
        };
        assert_eq!(gold_actions(&problem).unwrap(), vec![Action::submit()]);
    }

    #[test]
    fn generated_problems_replay_to_reward() {
        let params = TaskParams::default();
        for s in 0..300 {
            let p = make_problem(s, &params, "d".into()).unwrap();
            assert_eq!(p.demonstrations.len(), 3);
            assert!(conforms(&p));
            let acts = gold_actions(&p).unwrap();
            for a in &acts[..acts.len() - 1] {
                let Operation::Color(c) = a.op else { panic!("unexpected {a}") };
                assert_eq!(a.op.code(), c.value());
                assert_eq!((a.sel.h, a.sel.w), (0, 0));
            }
            let res = replay(&p.test_input, &p.test_output, &acts, params.env_config()).unwrap();
            assert_eq!(res.last().unwrap().reward, 1.0);
            let non = nonoptimal_actions(&p, s, &params).unwrap();
            replay(&p.test_input, &p.test_output, &non, params.env_config()).unwrap();
        }
    }

    #[test]
    fn solver_uses_demonstrations_only() {
        let params = TaskParams::default();
        for s in 0..100 {
            let p = make_problem(s, &params, "d".into()).unwrap();
            let plan = solve(&p.demonstrations, &p.test_input).unwrap();
            let res = replay(&p.test_input, &p.test_output, &plan, params.env_config()).unwrap();
            assert_eq!(res.last().unwrap().reward, 1.0, "seed {s}");
        }
    }

    #[test]
    fn seeds_give_varied_problems() {
        let params = TaskParams::default();
        let problems: Vec<ProblemInstance> =
            (0..100).map(|s| make_problem(s, &params, "d".into()).unwrap()).collect();
        let distinct: HashSet<(Grid, Grid)> = problems
            .iter()
            .map(|p| (p.test_input.clone(), p.test_output.clone()))
            .collect();
        assert!(distinct.len() >= 99);
        for w in problems.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        assert_eq!(problems[5], make_problem(5, &params, "d".into()).unwrap());
    }

    #[test]
    fn too_small_for_task() {
        let params = TaskParams { max_dims: (4, 10), ..TaskParams::default() };
        assert_eq!(make_problem(0, &params, "d".into()), Err(MakerError::DimsTooSmall(4, 10)));
    }
}
