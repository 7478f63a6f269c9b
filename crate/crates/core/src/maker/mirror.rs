//! Mirror task: the output stacks the vertically flipped input on top of the
//! input itself, doubling the height.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Demonstration, MakerError, ProblemInstance, TaskParams};
use crate::env::Env;
use crate::grid::{self, Grid, Selection, Transform};
use crate::ops::{Action, Operation};
use crate::seed;

const MAX_RESAMPLES: usize = 1000;

/// Flipped copy on top, original below.
pub fn expected_output(input: &Grid) -> Grid {
    let flipped = grid::transform_region(input, Selection::whole(input.rows(), input.cols()), Transform::FlipV)
        .expect("whole-grid selection is in bounds");
    flipped.vstack(input).expect("same column count")
}

fn random_input<R: Rng>(rng: &mut R, max_rows: usize, max_cols: usize) -> Grid {
    let rows = rng.random_range(1..=max_rows);
    let cols = rng.random_range(1..=max_cols);
    let cells = (0..rows * cols).map(|_| rng.random_range(0..=9u8)).collect();
    Grid::from_cells(rows, cols, cells).expect("dims and colors in range")
}

pub fn make_problem(
    seed: u64,
    params: &TaskParams,
    problem_id: String,
) -> Result<ProblemInstance, MakerError> {
    let (max_h, max_w) = params.max_dims;
    if max_h < 2 || max_w < 1 {
        return Err(MakerError::DimsTooSmall(max_h, max_w));
    }
    let max_rows = max_h / 2;
    let mut rng = seed::rng(seed);
    let mut pair = || {
        let input = random_input(&mut rng, max_rows, max_w);
        let output = expected_output(&input);
        Demonstration { input, output }
    };
    let demonstrations = (0..params.demos_per_problem).map(|_| pair()).collect();
    let test = pair();
    Ok(ProblemInstance {
        problem_id,
        demonstrations,
        test_input: test.input,
        test_output: test.output,
    })
}

/// Resize to double height, copy the upper half, paste it below, flip the
/// upper half, submit.
pub fn gold_actions(input: &Grid) -> Vec<Action> {
    let (r, c) = input.dims();
    let upper = Selection::new(0, 0, r - 1, c - 1);
    vec![
        Action::new(Operation::ResizeGrid, Selection::new(0, 0, 2 * r - 1, c - 1)),
        Action::new(Operation::CopyO, upper),
        Action::new(Operation::Paste, Selection::new(r, 0, r - 1, c - 1)),
        Action::new(Operation::FLIP_V, upper),
        Action::submit(),
    ]
}

/// Upper and lower halves of a `rows x cols` grid. For odd heights the middle
/// row belongs to neither half; a single row has no halves.
pub fn halves(rows: usize, cols: usize) -> Option<(Selection, Selection)> {
    let hh = rows / 2;
    if hh == 0 {
        return None;
    }
    Some((
        Selection::new(0, 0, hh - 1, cols - 1),
        Selection::new(rows - hh, 0, hh - 1, cols - 1),
    ))
}

/// Gold prefix up to a random branch point, then random flips, rotations and
/// copy/paste pairs on grid halves, then `Submit`.
pub fn nonoptimal_actions(
    problem: &ProblemInstance,
    seed: u64,
    params: &TaskParams,
) -> Result<Vec<Action>, MakerError> {
    let mut rng = seed::rng(seed);
    let gold = gold_actions(&problem.test_input);
    let branch = rng.random_range(0..gold.len());
    let lo = params.nonoptimal_len.saturating_sub(params.nonoptimal_jitter);
    let target = rng.random_range(lo..=params.nonoptimal_len + params.nonoptimal_jitter);
    let random_steps = target.saturating_sub(branch + 1).max(1);

    let mut env = Env::new(&problem.test_input, &problem.test_output, params.env_config())
        .map_err(|e| MakerError::NoValidActionAvailable(e.to_string()))?;
    let mut actions = Vec::with_capacity(target + 1);
    let push = |env: &mut Env, actions: &mut Vec<Action>, a: Action| {
        env.step(&a).map_err(|e| MakerError::NoValidActionAvailable(e.to_string()))?;
        actions.push(a);
        Ok::<_, MakerError>(())
    };
    for a in &gold[..branch] {
        push(&mut env, &mut actions, *a)?;
    }

    let ops = [
        Operation::FLIP_V,
        Operation::FLIP_H,
        Operation::ROTATE90,
        Operation::ROTATE270,
        Operation::CopyO,
    ];
    let mut taken = 0;
    while taken < random_steps {
        let remaining = random_steps - taken;
        let allowed: &[Operation] = if remaining >= 2 { &ops } else { &ops[..4] };
        let (rows, cols) = env.state().current.dims();
        let halves = halves(rows, cols);
        let whole = Selection::whole(rows, cols);

        let mut picked = None;
        for _ in 0..MAX_RESAMPLES {
            let op = *allowed.choose(&mut rng).expect("non-empty");
            let mut options: Vec<Selection> = halves.map(|(u, l)| vec![u, l]).unwrap_or_default();
            if matches!(op, Operation::Transform(Transform::FlipV | Transform::FlipH)) {
                options.push(whole);
            }
            let Some(&sel) = options.choose(&mut rng) else { continue };
            let action = Action::new(op, sel);
            if env.validate(&action).is_ok() {
                picked = Some(action);
                break;
            }
        }
        let action = picked.ok_or_else(|| {
            MakerError::NoValidActionAvailable(format!("{rows}x{cols} grid"))
        })?;
        push(&mut env, &mut actions, action)?;
        taken += 1;
        if action.op == Operation::CopyO {
            let (upper, lower) = halves.expect("CopyO only drawn with halves");
            let target = if action.sel == upper { lower } else { upper };
            push(&mut env, &mut actions, Action::new(Operation::Paste, target))?;
            taken += 1;
        }
    }
    actions.push(Action::submit());
    Ok(actions)
}

pub fn conforms(problem: &ProblemInstance) -> bool {
    problem
        .demonstrations
        .iter()
        .map(|d| (&d.input, &d.output))
        .chain(std::iter::once((&problem.test_input, &problem.test_output)))
        .all(|(i, o)| expected_output(i) == *o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{replay, EnvConfig};

    fn g(rows: &[&[u8]]) -> Grid {
        Grid::from_rows(rows).unwrap()
    }

    #[test]
    fn expected_output_examples() {
        assert_eq!(
            expected_output(&g(&[&[1, 2], &[3, 4]])),
            g(&[&[3, 4], &[1, 2], &[1, 2], &[3, 4]])
        );
        assert_eq!(expected_output(&g(&[&[5], &[5]])), g(&[&[5], &[5], &[5], &[5]]));
        assert_eq!(expected_output(&g(&[&[7]])), g(&[&[7], &[7]]));
    }

    #[test]
    fn gold_actions_2x2() {
        let acts = gold_actions(&g(&[&[1, 2], &[3, 4]]));
        let codes: Vec<u8> = acts.iter().map(|a| a.op.code()).collect();
        assert_eq!(codes, vec![33, 29, 30, 27, 34]);
        let sels: Vec<[usize; 4]> = acts.iter().map(|a| a.sel.to_array()).collect();
        assert_eq!(sels, vec![[0, 0, 3, 1], [0, 0, 1, 1], [2, 0, 1, 1], [0, 0, 1, 1], [0, 0, 0, 0]]);
    }

    #[test]
    fn gold_actions_1x1() {
        let input = g(&[&[7]]);
        let acts = gold_actions(&input);
        assert_eq!(acts[0].sel, Selection::new(0, 0, 1, 0));
        assert_eq!(acts[2].sel, Selection::new(1, 0, 0, 0));
        let res = replay(&input, &expected_output(&input), &acts, EnvConfig::default()).unwrap();
        assert_eq!(res.last().unwrap().reward, 1.0);
    }

    #[test]
    fn problems_are_seed_deterministic_and_conform() {
        let params = TaskParams::default();
        let a = make_problem(11, &params, "p".into()).unwrap();
        let b = make_problem(11, &params, "p".into()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.demonstrations.len(), 3);
        assert!(conforms(&a));
        assert!(a.test_input.rows() <= 5);
        assert_eq!(a.test_output.rows(), 2 * a.test_input.rows());
        let c = make_problem(12, &params, "p".into()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dims_too_small() {
        let params = TaskParams { max_dims: (1, 10), ..TaskParams::default() };
        assert_eq!(
            make_problem(0, &params, "p".into()),
            Err(MakerError::DimsTooSmall(1, 10))
        );
    }

    #[test]
    fn halves_of_grids() {
        assert_eq!(halves(1, 3), None);
        assert_eq!(
            halves(4, 2),
            Some((Selection::new(0, 0, 1, 1), Selection::new(2, 0, 1, 1)))
        );
        assert_eq!(
            halves(3, 2),
            Some((Selection::new(0, 0, 0, 1), Selection::new(2, 0, 0, 1)))
        );
    }

    #[test]
    fn copy_is_followed_by_paste_on_other_half() {
        let params = TaskParams::default();
        for s in 0..200 {
            let p = make_problem(s, &params, "p".into()).unwrap();
            let acts = nonoptimal_actions(&p, s ^ 0xabc, &params).unwrap();
            assert_eq!(acts.last().unwrap().op, Operation::Submit);
            assert!((8..=12).contains(&acts.len()), "len {}", acts.len());
            for (i, a) in acts.iter().enumerate() {
                if a.op == Operation::CopyO && i != 1 {
                    let next = acts[i + 1];
                    assert_eq!(next.op, Operation::Paste);
                    assert_ne!(next.sel, a.sel);
                    assert_eq!((next.sel.h, next.sel.w), (a.sel.h, a.sel.w));
                }
            }
            let res = replay(&p.test_input, &p.test_output, &acts, params.env_config()).unwrap();
            assert!(res.last().unwrap().terminated);
        }
    }

    #[test]
    fn branch_at_zero_keeps_original_size() {
        let params = TaskParams::default();
        let p = ProblemInstance {
            problem_id: "p".into(),
            demonstrations: vec![],
            test_input: g(&[&[1, 2], &[3, 4]]),
            test_output: g(&[&[3, 4], &[1, 2], &[1, 2], &[3, 4]]),
        };
        let mut seen_whole = false;
        for s in 0..300 {
            let acts = nonoptimal_actions(&p, s, &params).unwrap();
            if acts[0].op == Operation::ResizeGrid {
                continue;
            }
            let res = replay(&p.test_input, &p.test_output, &acts, params.env_config()).unwrap();
            assert!(res.iter().all(|r| r.next_state.current.dims() == (2, 2)));
            seen_whole |= acts.iter().any(|a| a.sel == Selection::new(0, 0, 1, 1));
        }
        assert!(seen_whole);
    }

    #[test]
    fn some_nonoptimal_episode_reaches_the_answer() {
        let params = TaskParams::default();
        let hit = (0..2000u64).find(|&s| {
            let p = make_problem(s, &params, "p".into()).unwrap();
            let acts = nonoptimal_actions(&p, s, &params).unwrap();
            let res = replay(&p.test_input, &p.test_output, &acts, params.env_config()).unwrap();
            res.last().unwrap().reward == 1.0
        });
        assert!(hit.is_some(), "no seed produced a successful non-optimal episode");
    }
}
