//! Exhaustive grid search over allocations: the reference the optimizer is
//! checked against.
//!
//! Every column is restricted to multiples of `grid_step`. Columns are
//! enumerated depth-first with branch-and-bound pruning; the last column is
//! minimized exactly per support subset by unit-by-unit greedy filling, which
//! is optimal for a min-max of increasing per-platform finish times.

use super::{AllocationMatrix, AllocationProblem, Matrix, EXACT_CELLS};
use crate::error::{Error, Result};

pub fn brute_force(problem: &AllocationProblem, grid_step: f64) -> Result<AllocationMatrix> {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    if p * t > EXACT_CELLS {
        return Err(Error::InstanceTooLarge {
            platforms: p,
            tasks: t,
        });
    }
    let units = (1.0 / grid_step).round();
    if !(grid_step > 0.0)
        || !(1.0..=1000.0).contains(&units)
        || (units * grid_step - 1.0).abs() > 1e-9
    {
        return Err(Error::Precondition(format!(
            "grid step {grid_step} must divide 1 into at most 1000 cells"
        )));
    }
    let search = Search::new(problem, units as usize);
    let units_matrix = search.run();
    let k = units;
    Ok(AllocationMatrix(Matrix::from_fn(p, t, |pi, ti| {
        f64::from(units_matrix[ti][pi]) / k
    })))
}

struct Search<'a> {
    problem: &'a AllocationProblem,
    units: usize,
    compositions: Vec<Vec<u16>>,
    /// `min_p work[p][t]` summed over columns `t..`.
    min_work_suffix: Vec<f64>,
    best: f64,
    best_units: Vec<Vec<u16>>,
}

impl<'a> Search<'a> {
    fn new(problem: &'a AllocationProblem, units: usize) -> Self {
        let (p, t) = (problem.n_platforms(), problem.n_tasks());
        let mut compositions = Vec::new();
        if t > 1 {
            compose(
                p,
                units as u16,
                &mut Vec::with_capacity(p),
                &mut compositions,
            );
        }
        let mut min_work_suffix = vec![0.0; t + 1];
        for ti in (0..t).rev() {
            let m = (0..p)
                .map(|pi| problem.work.get(pi, ti))
                .fold(f64::INFINITY, f64::min);
            min_work_suffix[ti] = min_work_suffix[ti + 1] + m;
        }
        Search {
            problem,
            units,
            compositions,
            min_work_suffix,
            best: f64::INFINITY,
            best_units: Vec::new(),
        }
    }

    fn run(mut self) -> Vec<Vec<u16>> {
        self.seed_with_whole_columns();
        let p = self.problem.n_platforms();
        let mut stack = Vec::with_capacity(self.problem.n_tasks());
        self.descend(0, &vec![0.0; p], &mut stack);
        self.best_units
    }

    /// Incumbent from the best allocation that puts every task wholly on one platform.
    fn seed_with_whole_columns(&mut self) {
        let (p, t) = (self.problem.n_platforms(), self.problem.n_tasks());
        let combos = p.pow(t as u32);
        for code in 0..combos {
            let mut loads = vec![0.0; p];
            let mut choice = Vec::with_capacity(t);
            let mut c = code;
            for ti in 0..t {
                let pi = c % p;
                c /= p;
                loads[pi] += self.problem.setup.get(pi, ti) + self.problem.work.get(pi, ti);
                let mut col = vec![0u16; p];
                col[pi] = self.units as u16;
                choice.push(col);
            }
            let f = loads.iter().copied().fold(0.0, f64::max);
            if f < self.best {
                self.best = f;
                self.best_units = choice;
            }
        }
    }

    fn descend(&mut self, col: usize, loads: &[f64], stack: &mut Vec<Vec<u16>>) {
        let t = self.problem.n_tasks();
        if col + 1 == t {
            let (value, last) = self.fill_last(loads, col);
            if value < self.best {
                self.best = value;
                self.best_units = stack.iter().cloned().chain(std::iter::once(last)).collect();
            }
            return;
        }
        let p = self.problem.n_platforms();
        let k = self.units as f64;
        let compositions = std::mem::take(&mut self.compositions);
        let mut next = vec![0.0; p];
        for comp in &compositions {
            let mut over = false;
            for pi in 0..p {
                let units = comp[pi];
                next[pi] = loads[pi];
                if units > 0 {
                    next[pi] += self.problem.setup.get(pi, col)
                        + f64::from(units) / k * self.problem.work.get(pi, col);
                }
                if next[pi] >= self.best {
                    over = true;
                    break;
                }
            }
            if over || self.lower_bound(&next, col + 1) >= self.best {
                continue;
            }
            stack.push(comp.clone());
            self.descend(col + 1, &next, stack);
            stack.pop();
        }
        self.compositions = compositions;
    }

    /// Valid lower bound on any completion of columns `from..`, setups ignored.
    fn lower_bound(&self, loads: &[f64], from: usize) -> f64 {
        let p = loads.len() as f64;
        let max = loads.iter().copied().fold(0.0, f64::max);
        let busy = (loads.iter().sum::<f64>() + self.min_work_suffix[from]) / p;
        let water = (from..self.problem.n_tasks())
            .map(|ti| water_level(loads, |pi| self.problem.work.get(pi, ti)))
            .fold(0.0, f64::max);
        max.max(busy).max(water)
    }

    /// Exact grid minimum of the final column given prior loads.
    fn fill_last(&self, loads: &[f64], col: usize) -> (f64, Vec<u16>) {
        let p = loads.len();
        let k = self.units as f64;
        let finish = |pi: usize, units: u16| {
            loads[pi]
                + self.problem.setup.get(pi, col)
                + f64::from(units) / k * self.problem.work.get(pi, col)
        };
        let mut best = (f64::INFINITY, Vec::new());
        for subset in 1u32..1 << p {
            let members: Vec<usize> = (0..p).filter(|&pi| subset & (1 << pi) != 0).collect();
            if members.len() > self.units {
                continue;
            }
            let idle = (0..p)
                .filter(|&pi| subset & (1 << pi) == 0)
                .map(|pi| loads[pi])
                .fold(0.0, f64::max);
            if idle >= best.0 {
                continue;
            }
            let mut alloc = vec![0u16; p];
            for &pi in &members {
                alloc[pi] = 1;
            }
            for _ in members.len()..self.units {
                let pick = *members
                    .iter()
                    .min_by(|&&a, &&b| finish(a, alloc[a] + 1).total_cmp(&finish(b, alloc[b] + 1)))
                    .expect("non-empty subset");
                alloc[pick] += 1;
            }
            let value = members
                .iter()
                .map(|&pi| finish(pi, alloc[pi]))
                .fold(idle, f64::max);
            if value < best.0 {
                best = (value, alloc);
            }
        }
        best
    }
}

/// Smallest `M` with `sum_p max(0, M - loads[p]) / work(p) >= 1`.
fn water_level(loads: &[f64], work: impl Fn(usize) -> f64) -> f64 {
    let mut order: Vec<usize> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| loads[a].total_cmp(&loads[b]));
    let (mut inv, mut weighted) = (0.0, 0.0);
    for (i, &pi) in order.iter().enumerate() {
        inv += 1.0 / work(pi);
        weighted += loads[pi] / work(pi);
        let level = (1.0 + weighted) / inv;
        if i + 1 == order.len() || level <= loads[order[i + 1]] {
            return level;
        }
    }
    unreachable!("loop returns on the last platform")
}

fn compose(parts: usize, total: u16, prefix: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compose(parts - 1, total - first, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::super::objective;
    use super::super::tests::problem;
    use super::*;

    #[test]
    fn one_platform_is_all_ones() {
        let pr = problem(&[&[1e6, 2e6]], &[&[0.1, 0.0]], &[1_000_000, 3_000_000]);
        let a = brute_force(&pr, 0.05).unwrap();
        assert_eq!(a, AllocationMatrix::all_on(0, 1, 2));
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let pr = problem(&[&[1e6], &[1e6]], &[&[0.0], &[0.0]], &[1_000_000]);
        let a = brute_force(&pr, 0.01).unwrap();
        assert!((a.get(0, 0) - 0.5).abs() < 1e-12 && (a.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_instances_and_bad_grids() {
        let rates: Vec<[f64; 2]> = vec![[1.0; 2]; 5];
        let r: Vec<&[f64]> = rates.iter().map(|x| &x[..]).collect();
        let pr = problem(
            &r,
            &r.iter().map(|_| &[0.0, 0.0][..]).collect::<Vec<_>>(),
            &[1, 1],
        );
        assert!(matches!(
            brute_force(&pr, 0.05),
            Err(Error::InstanceTooLarge { .. })
        ));
        let small = problem(&[&[1.0]], &[&[0.0]], &[1]);
        assert!(brute_force(&small, 0.3).is_err());
        assert!(brute_force(&small, 0.0).is_err());
    }

    #[test]
    fn matches_exhaustive_enumeration_on_a_coarse_grid() {
        let pr = problem(
            &[&[1e6, 3e6], &[2e6, 1e6], &[5e5, 2e6]],
            &[&[0.1, 0.0], &[0.0, 1.0], &[0.1, 0.1]],
            &[2_000_000, 3_000_000],
        );
        let step = 0.05;
        let a = brute_force(&pr, step).unwrap();
        let mut cols = Vec::new();
        compose(3, 20, &mut Vec::new(), &mut cols);
        let mut best = f64::INFINITY;
        for c0 in &cols {
            for c1 in &cols {
                let m = Matrix::from_fn(3, 2, |pi, ti| f64::from([c0, c1][ti][pi]) * step);
                best = best.min(pr.makespan(&m));
            }
        }
        assert!(
            (objective(&a, &pr) - best).abs() < 1e-12,
            "{} vs {best}",
            objective(&a, &pr)
        );
    }

    #[test]
    fn water_level_balances() {
        assert!((water_level(&[0.0, 0.0], |_| 2.0) - 1.0).abs() < 1e-12);
        // the idle platform absorbs everything before the busy one is used
        assert!((water_level(&[0.0, 5.0], |_| 1.0) - 1.0).abs() < 1e-12);
    }
}
