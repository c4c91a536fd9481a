//! Dense two-phase simplex for the tiny linear programs that arise once the
//! support of an allocation is fixed. Bland's rule keeps it cycle-free.

const EPS: f64 = 1e-11;

/// Minimizes `cost . x` subject to `eq_rows x = eq_rhs`, `le_rows x <= le_rhs`,
/// `x >= 0`. Returns `None` when infeasible or unbounded.
pub(crate) fn minimize(
    cost: &[f64],
    eq_rows: &[Vec<f64>],
    eq_rhs: &[f64],
    le_rows: &[Vec<f64>],
    le_rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = cost.len();
    let n_le = le_rows.len();
    let m = eq_rows.len() + n_le;
    let art0 = n + n_le;
    let width = art0 + m + 1;
    let rhs = width - 1;

    let mut tab = vec![vec![0.0; width]; m];
    for (i, (row, &b)) in eq_rows.iter().zip(eq_rhs).enumerate() {
        tab[i][..n].copy_from_slice(row);
        tab[i][rhs] = b;
    }
    for (k, (row, &b)) in le_rows.iter().zip(le_rhs).enumerate() {
        let i = eq_rows.len() + k;
        tab[i][..n].copy_from_slice(row);
        tab[i][n + k] = 1.0;
        tab[i][rhs] = b;
    }
    for (i, row) in tab.iter_mut().enumerate() {
        if row[rhs] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        row[art0 + i] = 1.0;
    }
    let mut basis: Vec<usize> = (art0..art0 + m).collect();

    // phase 1: drive the artificial variables to zero
    let mut phase1 = vec![0.0; width];
    for row in &tab {
        for (o, v) in phase1.iter_mut().zip(row) {
            *o -= v;
        }
    }
    phase1[art0..art0 + m].fill(0.0);
    if !run(&mut tab, &mut phase1, &mut basis, width - 1) {
        return None;
    }
    if -phase1[rhs] > 1e-9 * (1.0 + eq_rhs.iter().chain(le_rhs).map(|b| b.abs()).sum::<f64>()) {
        return None;
    }
    for i in 0..m {
        if basis[i] >= art0 {
            if let Some(j) = (0..art0).find(|&j| tab[i][j].abs() > EPS) {
                pivot(&mut tab, &mut phase1, &mut basis, i, j);
            }
        }
    }

    // phase 2 over the structural and slack columns only
    let mut objective = vec![0.0; width];
    objective[..n].copy_from_slice(cost);
    for (i, &b) in basis.iter().enumerate() {
        let cb = if b < n { cost[b] } else { 0.0 };
        if cb != 0.0 {
            for (o, v) in objective.iter_mut().zip(&tab[i]) {
                *o -= cb * v;
            }
        }
    }
    if !run(&mut tab, &mut objective, &mut basis, art0) {
        return None;
    }

    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[i][rhs].max(0.0);
        }
    }
    Some(x)
}

/// Pivots until no improving column below `limit` remains. False if unbounded.
fn run(tab: &mut [Vec<f64>], objective: &mut [f64], basis: &mut [usize], limit: usize) -> bool {
    let rhs = objective.len() - 1;
    for _ in 0..10_000 {
        let Some(enter) = (0..limit).find(|&j| objective[j] < -EPS) else {
            return true;
        };
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[enter] > EPS {
                let ratio = row[rhs] / row[enter];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return false;
        };
        pivot(tab, objective, basis, row, enter);
    }
    true
}

fn pivot(tab: &mut [Vec<f64>], objective: &mut [f64], basis: &mut [usize], row: usize, col: usize) {
    let p = tab[row][col];
    tab[row].iter_mut().for_each(|v| *v /= p);
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let f = objective[col];
    if f != 0.0 {
        for (v, pv) in objective.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
    basis[row] = col;
}
