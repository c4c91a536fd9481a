//! Local search for instances too large to enumerate.
//!
//! Starts from the best of several seeds (rate-proportional, the full-support
//! LP, every single-platform allocation, each task on its cheapest platform),
//! then repeatedly moves work off the bottleneck platform: either an entire
//! task share or the amount that equalizes the two platforms' finish times.
//! A move is kept only if it lowers the makespan, or keeps it and lowers the
//! sum of squared loads. The search stops after `P * T * 100` consecutive
//! rejected proposals.

use super::{
    objective, proportional_allocation, simplex, AllocationMatrix, AllocationProblem, Matrix,
};

const MAX_ACCEPTED_MOVES: usize = 100_000;

pub(super) fn solve(problem: &AllocationProblem) -> AllocationMatrix {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let mut seeds = vec![proportional_allocation(problem)];
    seeds.extend((0..p).map(|pi| AllocationMatrix::all_on(pi, p, t)));
    seeds.push(cheapest_platform(problem));
    if let Some(lp) = full_support_lp(problem) {
        seeds.push(lp);
    }
    let baseline = seeds
        .iter()
        .min_by(|a, b| objective(a, problem).total_cmp(&objective(b, problem)))
        .cloned()
        .expect("at least one seed");

    let improved = local_search(problem, baseline.matrix().clone());
    if objective(&improved, problem) <= objective(&baseline, problem) {
        improved
    } else {
        baseline
    }
}

fn cheapest_platform(problem: &AllocationProblem) -> AllocationMatrix {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let mut m = Matrix::zeros(p, t);
    for ti in 0..t {
        let best = (0..p)
            .min_by(|&a, &b| {
                let ca = problem.setup.get(a, ti) + problem.work.get(a, ti);
                let cb = problem.setup.get(b, ti) + problem.work.get(b, ti);
                ca.total_cmp(&cb)
            })
            .expect("at least one platform");
        m.set(best, ti, 1.0);
    }
    AllocationMatrix::from_raw(m)
}

/// LP optimum when every pair is charged its setup; an upper bound that is
/// exact when setups vanish.
fn full_support_lp(problem: &AllocationProblem) -> Option<AllocationMatrix> {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let n = p * t + 1;
    let scale = (0..p)
        .flat_map(|pi| (0..t).map(move |ti| (pi, ti)))
        .map(|(pi, ti)| problem.work.get(pi, ti).max(problem.setup.get(pi, ti)))
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut cost = vec![0.0; n];
    cost[n - 1] = 1.0;
    let eq_rows: Vec<Vec<f64>> = (0..t)
        .map(|ti| {
            let mut row = vec![0.0; n];
            for pi in 0..p {
                row[pi * t + ti] = 1.0;
            }
            row
        })
        .collect();
    let mut le_rows = Vec::with_capacity(p);
    let mut le_rhs = Vec::with_capacity(p);
    for pi in 0..p {
        let mut row = vec![0.0; n];
        for ti in 0..t {
            row[pi * t + ti] = problem.work.get(pi, ti) / scale;
        }
        row[n - 1] = -1.0;
        le_rows.push(row);
        le_rhs.push(-problem.setup.row(pi).iter().sum::<f64>() / scale);
    }
    let x = simplex::minimize(&cost, &eq_rows, &vec![1.0; t], &le_rows, &le_rhs)?;
    Some(AllocationMatrix::from_raw(Matrix::from_fn(
        p,
        t,
        |pi, ti| x[pi * t + ti].clamp(0.0, 1.0),
    )))
}

fn score(loads: &[f64]) -> (f64, f64) {
    let max = loads.iter().copied().fold(0.0, f64::max);
    let sq = loads.iter().map(|l| l * l).sum();
    (max, sq)
}

fn improves(new: (f64, f64), old: (f64, f64)) -> bool {
    let tol = 1e-12 * old.0.max(f64::MIN_POSITIVE);
    new.0 < old.0 - tol || (new.0 <= old.0 && new.1 < old.1 * (1.0 - 1e-12))
}

fn local_search(problem: &AllocationProblem, mut a: Matrix) -> AllocationMatrix {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let patience = p * t * 100;
    let mut loads = problem.loads(&a);
    let mut current = score(&loads);
    let mut rejected = 0usize;

    'search: for _ in 0..MAX_ACCEPTED_MOVES {
        let bottleneck = (0..p)
            .max_by(|&x, &y| loads[x].total_cmp(&loads[y]))
            .expect("at least one platform");
        for ti in 0..t {
            let share = a.get(bottleneck, ti);
            if share <= 0.0 {
                continue;
            }
            for q in (0..p).filter(|&q| q != bottleneck) {
                let w_b = problem.work.get(bottleneck, ti);
                let w_q = problem.work.get(q, ti);
                let join = if a.get(q, ti) > 0.0 {
                    0.0
                } else {
                    problem.setup.get(q, ti)
                };
                let equalize =
                    ((loads[bottleneck] - loads[q] - join) / (w_b + w_q)).clamp(0.0, share);
                for delta in [share, equalize] {
                    if delta <= 0.0 {
                        continue;
                    }
                    let mut trial = loads.clone();
                    let emptied = delta >= share;
                    trial[bottleneck] -= delta * w_b;
                    if emptied {
                        trial[bottleneck] -= problem.setup.get(bottleneck, ti);
                    }
                    trial[q] += delta * w_q + join;
                    let s = score(&trial);
                    if improves(s, current) {
                        let moved = if emptied { share } else { delta };
                        a.set(bottleneck, ti, if emptied { 0.0 } else { share - delta });
                        a.set(q, ti, a.get(q, ti) + moved);
                        loads = problem.loads(&a);
                        current = score(&loads);
                        rejected = 0;
                        continue 'search;
                    }
                    rejected += 1;
                    if rejected >= patience {
                        break 'search;
                    }
                }
            }
        }
        // every move off the bottleneck was rejected
        break;
    }
    AllocationMatrix::from_raw(a)
}

#[cfg(test)]
mod tests {
    use super::super::tests::problem;
    use super::super::{objective, optimize};
    use super::*;

    #[test]
    fn large_zero_setup_instance_reaches_fluid_optimum() {
        // four identical platforms, three tasks: perfect balance is reachable
        let rates: Vec<[f64; 3]> = vec![[1e6; 3]; 4];
        let r: Vec<&[f64]> = rates.iter().map(|x| &x[..]).collect();
        let setups: Vec<[f64; 3]> = vec![[0.0; 3]; 4];
        let s: Vec<&[f64]> = setups.iter().map(|x| &x[..]).collect();
        let pr = problem(&r, &s, &[1_000_000, 2_000_000, 3_000_000]);
        let a = optimize(&pr);
        let f = objective(&a, &pr);
        assert!((f - 1.5).abs() < 1e-9, "{f}");
    }

    #[test]
    fn local_search_never_worsens_its_seed() {
        let rates: Vec<[f64; 4]> = vec![
            [2e6, 1e6, 5e5, 3e6],
            [1e6, 1e6, 1e6, 1e6],
            [4e5, 2e6, 1e6, 5e5],
        ];
        let r: Vec<&[f64]> = rates.iter().map(|x| &x[..]).collect();
        let setups: Vec<[f64; 4]> = vec![
            [0.1, 1.0, 0.0, 0.1],
            [0.0, 0.0, 1.0, 0.1],
            [1.0, 0.1, 0.1, 0.0],
        ];
        let s: Vec<&[f64]> = setups.iter().map(|x| &x[..]).collect();
        let pr = problem(&r, &s, &[3_000_000, 1_000_000, 2_000_000, 4_000_000]);
        let seed = proportional_allocation(&pr);
        let searched = local_search(&pr, seed.matrix().clone());
        assert!(objective(&searched, &pr) <= objective(&seed, &pr));
        assert!(objective(&solve(&pr), &pr) <= objective(&searched, &pr));
    }
}
