//! Work partitioning across platforms.
//!
//! An allocation matrix `A` (platforms x tasks) gives the fraction of each
//! task's path demand run on each platform; every column sums to one. Tasks
//! assigned to one platform run back to back, and each active (platform, task)
//! pair pays that pair's setup latency once, so the objective is the makespan
//!
//! ```text
//! F(A) = max_p  sum_t ( [a_pt > 0] * setup_pt + a_pt * N_t / rate_pt )
//! ```
//!
//! Instances with at most nine cells are solved exactly by enumerating support
//! patterns; larger ones use a seeded local search that never does worse than
//! the single-platform and rate-proportional baselines.

mod brute;
mod exact;
mod heuristic;
mod simplex;

use serde::Serialize;

pub use brute::brute_force;

use crate::error::{Error, Result};
use crate::metrics::{required_paths, ConfidenceModel, LatencyModel};

/// Fractions below this are snapped to zero so setup charges are well defined.
pub const SNAP_FRACTION: f64 = 1e-6;

/// Largest instance (platforms x tasks) solved by exhaustive support search.
pub const EXACT_CELLS: usize = 9;

const COLUMN_TOLERANCE: f64 = 1e-9;

/// Dense row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, c))
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Per-task confidence-interval targets, in portfolio order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TargetVector(Vec<f64>);

impl TargetVector {
    pub fn new(targets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid(
                "ci_target",
                None,
                "at least one target is required",
            ));
        }
        if let Some(bad) = targets.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::invalid(
                "ci_target",
                None,
                format!("must be > 0, got {bad}"),
            ));
        }
        Ok(TargetVector(targets))
    }

    pub fn uniform(target: f64, tasks: usize) -> Result<Self> {
        Self::new(vec![target; tasks])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|t| t * factor).collect())
    }
}

/// Fitted metric models for every (platform, task) pair of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModels {
    pub platforms: Vec<String>,
    pub tasks: Vec<String>,
    /// Row-major `platforms x tasks`.
    latency: Vec<Option<LatencyModel>>,
    confidence: Vec<Option<ConfidenceModel>>,
}

impl MetricModels {
    pub fn new(platforms: Vec<String>, tasks: Vec<String>) -> Self {
        let cells = platforms.len() * tasks.len();
        let t = tasks.len();
        MetricModels {
            platforms,
            tasks,
            latency: vec![None; cells],
            confidence: vec![None; t],
        }
    }

    pub fn set_latency(&mut self, platform: usize, task: usize, model: LatencyModel) {
        let t = self.tasks.len();
        self.latency[platform * t + task] = Some(model);
    }

    pub fn set_confidence(&mut self, task: usize, model: ConfidenceModel) {
        self.confidence[task] = Some(model);
    }

    pub fn latency(&self, platform: usize, task: usize) -> Result<LatencyModel> {
        self.latency[platform * self.tasks.len() + task].ok_or_else(|| Error::MissingModel {
            platform: self.platforms[platform].clone(),
            task: self.tasks[task].clone(),
        })
    }

    pub fn confidence(&self, task: usize) -> Result<ConfidenceModel> {
        self.confidence[task].ok_or_else(|| Error::MissingModel {
            platform: "*".into(),
            task: self.tasks[task].clone(),
        })
    }
}

/// Path demands plus the setup and full-task work time of every pair: the
/// complete input of the makespan problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub platforms: Vec<String>,
    pub tasks: Vec<String>,
    pub demands: Vec<u64>,
    /// `setup_s` of each (platform, task) pair.
    pub setup: Matrix,
    /// Seconds for the platform to run the task's whole demand, setup excluded.
    pub work: Matrix,
}

impl AllocationProblem {
    pub fn new(models: &MetricModels, demands: &[u64]) -> Result<Self> {
        let (p, t) = (models.platforms.len(), models.tasks.len());
        if p == 0 || t == 0 {
            return Err(Error::Precondition(
                "need at least one platform and one task".into(),
            ));
        }
        if demands.len() != t {
            return Err(Error::Precondition(format!(
                "{} path demands for {t} tasks",
                demands.len()
            )));
        }
        let mut setup = Matrix::zeros(p, t);
        let mut work = Matrix::zeros(p, t);
        for pi in 0..p {
            for (ti, &demand) in demands.iter().enumerate() {
                let m = models.latency(pi, ti)?;
                setup.set(pi, ti, m.setup_s);
                work.set(pi, ti, demand as f64 / m.rate);
            }
        }
        Ok(AllocationProblem {
            platforms: models.platforms.clone(),
            tasks: models.tasks.clone(),
            demands: demands.to_vec(),
            setup,
            work,
        })
    }

    pub fn n_platforms(&self) -> usize {
        self.setup.rows()
    }

    pub fn n_tasks(&self) -> usize {
        self.setup.cols()
    }

    /// Each platform's completion time under `fractions`.
    pub fn loads(&self, fractions: &Matrix) -> Vec<f64> {
        (0..self.n_platforms())
            .map(|p| {
                (0..self.n_tasks())
                    .filter(|&t| fractions.get(p, t) > 0.0)
                    .map(|t| self.setup.get(p, t) + fractions.get(p, t) * self.work.get(p, t))
                    .sum()
            })
            .collect()
    }

    fn makespan(&self, fractions: &Matrix) -> f64 {
        self.loads(fractions).into_iter().fold(0.0, f64::max)
    }
}

/// Column-stochastic `platforms x tasks` matrix of work fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix(Matrix);

impl AllocationMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        for c in 0..m.cols() {
            if m.column(c).any(|v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(
                    "allocation",
                    None,
                    format!("column {c} has an entry outside [0, 1]"),
                ));
            }
            let total: f64 = m.column(c).sum();
            if (total - 1.0).abs() > COLUMN_TOLERANCE {
                return Err(Error::invalid(
                    "allocation",
                    None,
                    format!("column {c} sums to {total}"),
                ));
            }
        }
        Ok(AllocationMatrix(m))
    }

    /// Snaps tiny fractions to zero and renormalizes each column.
    pub(crate) fn from_raw(mut m: Matrix) -> Self {
        for c in 0..m.cols() {
            for r in 0..m.rows() {
                if m.get(r, c) < SNAP_FRACTION {
                    m.set(r, c, 0.0);
                }
            }
            let total: f64 = m.column(c).sum();
            debug_assert!(total > 0.0, "column {c} lost all mass");
            for r in 0..m.rows() {
                m.set(r, c, (m.get(r, c) / total).min(1.0));
            }
        }
        AllocationMatrix(m)
    }

    pub fn all_on(platform: usize, platforms: usize, tasks: usize) -> Self {
        AllocationMatrix(Matrix::from_fn(platforms, tasks, |p, _| {
            if p == platform {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, platform: usize, task: usize) -> f64 {
        self.0.get(platform, task)
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }
}

/// `C[p][t] = setup + N_t / rate`: latency for platform `p` to meet task `t`'s
/// target alone.
pub type CostMatrix = Matrix;

/// Path demand per task for the given targets, and the resulting cost matrix.
pub fn build_cost_matrix(
    models: &MetricModels,
    targets: &TargetVector,
) -> Result<(CostMatrix, Vec<u64>)> {
    let demands = path_demands(models, targets)?;
    let problem = AllocationProblem::new(models, &demands)?;
    let cost = Matrix::from_fn(problem.n_platforms(), problem.n_tasks(), |p, t| {
        problem.setup.get(p, t) + problem.work.get(p, t)
    });
    Ok((cost, demands))
}

pub fn path_demands(models: &MetricModels, targets: &TargetVector) -> Result<Vec<u64>> {
    if targets.len() != models.tasks.len() {
        return Err(Error::Precondition(format!(
            "{} ci targets for {} tasks",
            targets.len(),
            models.tasks.len()
        )));
    }
    targets
        .values()
        .iter()
        .enumerate()
        .map(|(t, &target)| required_paths(&models.confidence(t)?, target))
        .collect()
}

/// Makespan of `allocation`.
pub fn objective(allocation: &AllocationMatrix, problem: &AllocationProblem) -> f64 {
    problem.makespan(allocation.matrix())
}

/// Minimizes the makespan: exactly when the instance has at most
/// [`EXACT_CELLS`] cells, heuristically otherwise.
pub fn optimize(problem: &AllocationProblem) -> AllocationMatrix {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    if p == 1 {
        return AllocationMatrix::all_on(0, 1, t);
    }
    if p * t <= EXACT_CELLS {
        exact::solve(problem)
    } else {
        heuristic::solve(problem)
    }
}

/// Allocation proportional to each platform's rate on each task.
pub fn proportional_allocation(problem: &AllocationProblem) -> AllocationMatrix {
    let (p, t) = (problem.n_platforms(), problem.n_tasks());
    let mut m = Matrix::zeros(p, t);
    for ti in 0..t {
        let speed: Vec<f64> = (0..p).map(|pi| 1.0 / problem.work.get(pi, ti)).collect();
        let total: f64 = speed.iter().sum();
        for (pi, s) in speed.iter().enumerate() {
            m.set(pi, ti, s / total);
        }
    }
    AllocationMatrix::from_raw(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub targets: TargetVector,
    pub demands: Vec<u64>,
    pub makespan_s: f64,
    pub allocation: AllocationMatrix,
}

/// One optimized design point per target vector, tightest targets first.
pub fn frontier(models: &MetricModels, targets: &[TargetVector]) -> Result<Vec<FrontierPoint>> {
    if targets.is_empty() {
        return Err(Error::Precondition(
            "frontier needs at least one target vector".into(),
        ));
    }
    let mut points = targets
        .iter()
        .map(|tv| {
            let demands = path_demands(models, tv)?;
            let problem = AllocationProblem::new(models, &demands)?;
            let allocation = optimize(&problem);
            Ok(FrontierPoint {
                targets: tv.clone(),
                makespan_s: objective(&allocation, &problem),
                demands,
                allocation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        let ka: f64 = a.targets.values().iter().sum();
        let kb: f64 = b.targets.values().iter().sum();
        ka.total_cmp(&kb)
    });
    Ok(points)
}
