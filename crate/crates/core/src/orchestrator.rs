//! The end-to-end pipeline: benchmark and model every (platform, task) pair,
//! pick targets, partition work, run the shards concurrently, merge, report.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::allocator::{
    frontier, objective, optimize, path_demands, AllocationMatrix, AllocationProblem,
    FrontierPoint, MetricModels, TargetVector,
};
use crate::error::{Error, Result};
use crate::findomain::Portfolio;
use crate::mcengine::{estimate, PartialResult, DEFAULT_CHUNK_SIZE};
use crate::metrics::{
    benchmark, fit_confidence, fit_latency, predict_latency, BenchmarkObservation,
    DEFAULT_BENCHMARK_SIZES,
};
use crate::platforms::{execute, Clock, PlatformRegistry};

/// Number of `2^(-1/2)` target tightenings tried under a latency bound.
pub const LATENCY_BOUND_STEPS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub chunk_size: u64,
    pub benchmark_sizes: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chunk_size: DEFAULT_CHUNK_SIZE,
            benchmark_sizes: DEFAULT_BENCHMARK_SIZES.to_vec(),
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.chunk_size < 1 {
            return Err(Error::invalid("chunk_size", None, "must be >= 1"));
        }
        Ok(())
    }
}

/// Benchmarks of one (platform, task) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBenchmark {
    pub platform: String,
    pub task_id: String,
    pub observations: Vec<BenchmarkObservation>,
}

/// Benchmarks every pair and fits the models. The confidence model of each
/// task comes from the largest observation on the first platform.
pub fn model_portfolio(
    portfolio: &Portfolio,
    registry: &PlatformRegistry,
    config: &RunConfig,
) -> Result<(MetricModels, Vec<PairBenchmark>)> {
    config.validate()?;
    let mut models = MetricModels::new(
        registry
            .platforms()
            .iter()
            .map(|p| p.name.clone())
            .collect(),
        portfolio.tasks().iter().map(|t| t.id.clone()).collect(),
    );
    let mut benches = Vec::new();
    for (pi, platform) in registry.platforms().iter().enumerate() {
        for (ti, task) in portfolio.tasks().iter().enumerate() {
            let obs = benchmark(platform, task, &config.benchmark_sizes, config.chunk_size)?;
            models.set_latency(pi, ti, fit_latency(&obs)?);
            if pi == 0 {
                let largest = obs
                    .iter()
                    .max_by_key(|o| o.n)
                    .expect("benchmark returns observations");
                models.set_confidence(ti, fit_confidence(largest)?);
            }
            benches.push(PairBenchmark {
                platform: platform.name.clone(),
                task_id: task.id.clone(),
                observations: obs,
            });
        }
    }
    Ok((models, benches))
}

/// An optimized partition, before execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub targets: TargetVector,
    pub problem: AllocationProblem,
    pub allocation: AllocationMatrix,
    pub predicted_makespan_s: f64,
}

pub fn plan(models: &MetricModels, targets: &TargetVector) -> Result<Plan> {
    let demands = path_demands(models, targets)?;
    let problem = AllocationProblem::new(models, &demands)?;
    let allocation = optimize(&problem);
    Ok(Plan {
        targets: targets.clone(),
        predicted_makespan_s: objective(&allocation, &problem),
        problem,
        allocation,
    })
}

pub enum Pick {
    Index(usize),
    /// Tightest targets whose optimized makespan fits within this many seconds.
    MaxLatency(f64),
}

/// Chooses a point on a frontier sorted tightest first.
pub fn select_tradeoff(points: &[FrontierPoint], pick: Pick) -> Result<TargetVector> {
    if points.is_empty() {
        return Err(Error::Precondition("empty frontier".into()));
    }
    match pick {
        Pick::Index(i) => points.get(i).map(|p| p.targets.clone()).ok_or_else(|| {
            Error::Precondition(format!("frontier has {} points, index {i}", points.len()))
        }),
        Pick::MaxLatency(bound) => points
            .iter()
            .find(|p| p.makespan_s <= bound)
            .map(|p| p.targets.clone())
            .ok_or_else(|| {
                let best = points
                    .iter()
                    .map(|p| p.makespan_s)
                    .fold(f64::INFINITY, f64::min);
                Error::Infeasible(format!(
                    "no frontier point within {bound} s; the fastest needs {best} s"
                ))
            }),
    }
}

/// Candidate targets for a latency bound: the half-width each task reaches at
/// 2^16 paths, tightened by factors of `sqrt(2)`.
pub fn latency_bound_candidates(models: &MetricModels) -> Result<Vec<TargetVector>> {
    let base = (0..models.tasks.len())
        .map(|t| Ok(models.confidence(t)?.ci(1 << 16).max(1e-12)))
        .collect::<Result<Vec<_>>>()?;
    let base = TargetVector::new(base)?;
    (0..=LATENCY_BOUND_STEPS)
        .map(|j| base.scaled(2f64.powf(-f64::from(j) / 2.0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shard {
    pub platform: String,
    pub paths: u64,
    pub first_chunk: u64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task_id: String,
    pub price: f64,
    pub std_error: f64,
    pub ci_half_width: f64,
    pub target_ci: f64,
    pub demand_paths: u64,
    pub total_paths: u64,
    pub shards: Vec<Shard>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlatformReport {
    pub name: String,
    pub clock: Clock,
    pub latency_s: f64,
    pub predicted_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tasks: Vec<TaskReport>,
    pub platforms: Vec<PlatformReport>,
    /// Largest platform latency over both clock domains.
    pub makespan_s: f64,
    pub makespan_wall_s: Option<f64>,
    pub makespan_virtual_s: Option<f64>,
    pub mixed_domain: bool,
    pub predicted_makespan_s: f64,
    pub allocation: NamedAllocation,
    pub models: ModelDump,
}

/// Full pipeline at the given targets.
pub fn run(
    portfolio: &Portfolio,
    registry: &PlatformRegistry,
    targets: &TargetVector,
    config: &RunConfig,
) -> Result<RunReport> {
    let (models, _) = model_portfolio(portfolio, registry, config)?;
    let p = plan(&models, targets)?;
    execute_plan(portfolio, registry, &models, &p, config)
}

/// Full pipeline at the tightest candidate targets that fit the latency bound.
pub fn run_with_latency_bound(
    portfolio: &Portfolio,
    registry: &PlatformRegistry,
    max_latency_s: f64,
    config: &RunConfig,
) -> Result<RunReport> {
    if !(max_latency_s > 0.0) || !max_latency_s.is_finite() {
        return Err(Error::invalid(
            "max_latency",
            None,
            format!("must be > 0, got {max_latency_s}"),
        ));
    }
    let (models, _) = model_portfolio(portfolio, registry, config)?;
    let points = frontier(&models, &latency_bound_candidates(&models)?)?;
    let targets = select_tradeoff(&points, Pick::MaxLatency(max_latency_s))?;
    let p = plan(&models, &targets)?;
    execute_plan(portfolio, registry, &models, &p, config)
}

/// Per-platform path counts: `a * N` rounded up to whole chunks, with
/// contiguous chunk ranges from 0 in platform order.
pub fn shard_layout(plan: &Plan, chunk_size: u64) -> Result<Vec<Vec<(u64, u64)>>> {
    let (p, t) = (plan.problem.n_platforms(), plan.problem.n_tasks());
    let mut layout = vec![vec![(0, 0); t]; p];
    for ti in 0..t {
        let demand = plan.problem.demands[ti];
        let mut next_chunk = 0u64;
        for (pi, row) in layout.iter_mut().enumerate() {
            let a = plan.allocation.get(pi, ti);
            if a <= 0.0 {
                continue;
            }
            let chunks = (a * demand as f64 / chunk_size as f64).ceil().max(1.0) as u64;
            let paths = chunks.checked_mul(chunk_size).ok_or_else(|| {
                Error::Infeasible(format!("{chunks} chunks overflow the path count"))
            })?;
            row[ti] = (next_chunk, paths);
            next_chunk += chunks;
        }
    }
    Ok(layout)
}

/// Runs every shard (platforms concurrently, each platform's shards in task
/// order), merges per task and builds the report.
pub fn execute_plan(
    portfolio: &Portfolio,
    registry: &PlatformRegistry,
    models: &MetricModels,
    plan: &Plan,
    config: &RunConfig,
) -> Result<RunReport> {
    config.validate()?;
    let tasks = portfolio.tasks();
    let platforms = registry.platforms();
    if platforms.len() != plan.problem.n_platforms() || tasks.len() != plan.problem.n_tasks() {
        return Err(Error::Precondition(
            "plan shape does not match the inputs".into(),
        ));
    }
    let layout = shard_layout(plan, config.chunk_size)?;

    let results: Vec<Result<Vec<Option<PartialResult>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = platforms
            .iter()
            .zip(&layout)
            .map(|(platform, row)| {
                scope.spawn(move || {
                    tasks
                        .iter()
                        .zip(row)
                        .map(|(task, &(first, paths))| {
                            (paths > 0)
                                .then(|| execute(platform, task, paths, first, config.chunk_size))
                                .transpose()
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("platform thread panicked"))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut task_reports = Vec::with_capacity(tasks.len());
    for (ti, task) in tasks.iter().enumerate() {
        let mut merged = PartialResult::zero();
        let mut shards = Vec::new();
        for (pi, platform) in platforms.iter().enumerate() {
            if let Some(r) = &results[pi][ti] {
                merged = crate::mcengine::merge(&merged, r);
                shards.push(Shard {
                    platform: platform.name.clone(),
                    paths: layout[pi][ti].1,
                    first_chunk: layout[pi][ti].0,
                    latency_s: r.elapsed_s,
                });
            }
        }
        let e = estimate(&merged)?;
        task_reports.push(TaskReport {
            task_id: task.id.clone(),
            price: e.price,
            std_error: e.std_error,
            ci_half_width: e.ci_half_width,
            target_ci: plan.targets.values()[ti],
            demand_paths: plan.problem.demands[ti],
            total_paths: shards.iter().map(|s| s.paths).sum(),
            shards,
        });
    }

    let mut platform_reports = Vec::with_capacity(platforms.len());
    for (pi, platform) in platforms.iter().enumerate() {
        let mut predicted = 0.0;
        for (ti, &(_, paths)) in layout[pi].iter().enumerate() {
            if paths > 0 {
                predicted += predict_latency(&models.latency(pi, ti)?, paths);
            }
        }
        platform_reports.push(PlatformReport {
            name: platform.name.clone(),
            clock: platform.clock(),
            latency_s: results[pi].iter().flatten().map(|r| r.elapsed_s).sum(),
            predicted_latency_s: predicted,
        });
    }
    let domain_max = |clock| {
        platform_reports
            .iter()
            .filter(|p| p.clock == clock)
            .map(|p| p.latency_s)
            .reduce(f64::max)
    };
    let (wall, virt) = (domain_max(Clock::Wall), domain_max(Clock::Virtual));

    Ok(RunReport {
        tasks: task_reports,
        makespan_s: wall.unwrap_or(0.0).max(virt.unwrap_or(0.0)),
        makespan_wall_s: wall,
        makespan_virtual_s: virt,
        mixed_domain: wall.is_some() && virt.is_some(),
        platforms: platform_reports,
        predicted_makespan_s: plan.predicted_makespan_s,
        allocation: NamedAllocation::new(&plan.problem, &plan.allocation),
        models: ModelDump::new(models)?,
    })
}

/// Allocation keyed by platform, then task.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedAllocation {
    pub platforms: Vec<String>,
    pub tasks: Vec<String>,
    pub allocation: AllocationMatrix,
}

impl NamedAllocation {
    pub fn new(problem: &AllocationProblem, allocation: &AllocationMatrix) -> Self {
        NamedAllocation {
            platforms: problem.platforms.clone(),
            tasks: problem.tasks.clone(),
            allocation: allocation.clone(),
        }
    }
}

struct Row<'a>(&'a NamedAllocation, usize);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.tasks.len()))?;
        for (ti, task) in self.0.tasks.iter().enumerate() {
            map.serialize_entry(task, &self.0.allocation.get(self.1, ti))?;
        }
        map.end()
    }
}

impl Serialize for NamedAllocation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.platforms.len()))?;
        for (pi, platform) in self.platforms.iter().enumerate() {
            map.serialize_entry(platform, &Row(self, pi))?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlatformLatency {
    pub platform: String,
    pub setup_s: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskModels {
    pub task_id: String,
    pub confidence: crate::metrics::ConfidenceModel,
    pub latency: Vec<PlatformLatency>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelDump(pub Vec<TaskModels>);

impl ModelDump {
    pub fn new(models: &MetricModels) -> Result<Self> {
        (0..models.tasks.len())
            .map(|ti| {
                Ok(TaskModels {
                    task_id: models.tasks[ti].clone(),
                    confidence: models.confidence(ti)?,
                    latency: (0..models.platforms.len())
                        .map(|pi| {
                            let m = models.latency(pi, ti)?;
                            Ok(PlatformLatency {
                                platform: models.platforms[pi].clone(),
                                setup_s: m.setup_s,
                                rate: m.rate,
                            })
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()
            .map(ModelDump)
    }
}

/// Allocation dump for the `partition` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub targets: TargetVector,
    pub demands: Vec<u64>,
    pub predicted_makespan_s: f64,
    pub allocation: NamedAllocation,
}

impl PartitionReport {
    pub fn new(plan: &Plan) -> Self {
        PartitionReport {
            targets: plan.targets.clone(),
            demands: plan.problem.demands.clone(),
            predicted_makespan_s: plan.predicted_makespan_s,
            allocation: NamedAllocation::new(&plan.problem, &plan.allocation),
        }
    }
}
