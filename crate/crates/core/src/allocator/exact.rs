//! Exact makespan minimization for small instances.
//!
//! The setup charge makes the objective discontinuous at zero, but once the
//! set of active (platform, task) pairs is fixed the problem is a linear
//! program in the fractions and the makespan. Enumerating every support with
//! at least one active pair per task and solving each LP gives the optimum.

use super::{simplex, AllocationMatrix, AllocationProblem, Matrix};

pub(super) fn solve(problem: &AllocationProblem) -> AllocationMatrix {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let cells = p * t;
    debug_assert!(cells <= 16);

    let mut masks: Vec<u32> = (1u32..1 << cells)
        .filter(|&mask| (0..t).all(|ti| (0..p).any(|pi| mask & bit(pi, ti, t) != 0)))
        .collect();
    // prefer sparser supports on ties
    masks.sort_by_key(|m| m.count_ones());

    let mut best: Option<(f64, AllocationMatrix)> = None;
    for mask in masks {
        let setup_floor = (0..p)
            .map(|pi| {
                (0..t)
                    .filter(|&ti| mask & bit(pi, ti, t) != 0)
                    .map(|ti| problem.setup.get(pi, ti))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        if let Some((f, _)) = &best {
            if setup_floor >= *f {
                continue;
            }
        }
        let Some(a) = solve_support(problem, mask) else {
            continue;
        };
        let f = super::objective(&a, problem);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, a));
        }
    }
    best.expect("the all-active support is always feasible").1
}

#[inline]
fn bit(p: usize, t: usize, tasks: usize) -> u32 {
    1 << (p * tasks + t)
}

fn solve_support(problem: &AllocationProblem, mask: u32) -> Option<AllocationMatrix> {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let active: Vec<(usize, usize)> = (0..p)
        .flat_map(|pi| (0..t).map(move |ti| (pi, ti)))
        .filter(|&(pi, ti)| mask & bit(pi, ti, t) != 0)
        .collect();
    let scale = active
        .iter()
        .map(|&(pi, ti)| problem.work.get(pi, ti).max(problem.setup.get(pi, ti)))
        .fold(f64::MIN_POSITIVE, f64::max);

    // variables: one fraction per active pair, then the makespan
    let n = active.len() + 1;
    let m_col = active.len();
    let mut cost = vec![0.0; n];
    cost[m_col] = 1.0;

    let mut eq_rows = Vec::with_capacity(t);
    for ti in 0..t {
        let mut row = vec![0.0; n];
        for (j, &(_, tj)) in active.iter().enumerate() {
            if tj == ti {
                row[j] = 1.0;
            }
        }
        eq_rows.push(row);
    }
    let eq_rhs = vec![1.0; t];

    let mut le_rows = Vec::new();
    let mut le_rhs = Vec::new();
    for pi in 0..p {
        if !active.iter().any(|&(pj, _)| pj == pi) {
            continue;
        }
        let mut row = vec![0.0; n];
        let mut setups = 0.0;
        for (j, &(pj, tj)) in active.iter().enumerate() {
            if pj == pi {
                row[j] = problem.work.get(pi, tj) / scale;
                setups += problem.setup.get(pi, tj);
            }
        }
        row[m_col] = -1.0;
        le_rows.push(row);
        le_rhs.push(-setups / scale);
    }

    let x = simplex::minimize(&cost, &eq_rows, &eq_rhs, &le_rows, &le_rhs)?;
    let mut fractions = Matrix::zeros(p, t);
    for (j, &(pi, ti)) in active.iter().enumerate() {
        fractions.set(pi, ti, x[j].clamp(0.0, 1.0));
    }
    Some(AllocationMatrix::from_raw(fractions))
}
