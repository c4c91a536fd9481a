//! Online benchmarking and the two domain-metric models: latency
//! `L(n) = setup_s + n / rate` per (platform, task), and confidence-interval
//! half-width `ci(n) = k / sqrt(n)` per task.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::findomain::PricingTask;
use crate::mcengine::{estimate, Z_95};
use crate::platforms::{execute, PlatformKind, PlatformSpec};

/// Benchmark chunks live above this index so production ranges can start at 0.
pub const BENCHMARK_CHUNK_BASE: u64 = 1 << 63;

pub const DEFAULT_BENCHMARK_SIZES: [u64; 2] = [1 << 14, 1 << 16];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchmarkObservation {
    pub n: u64,
    pub elapsed_s: f64,
    pub sample_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyModel {
    pub setup_s: f64,
    pub rate: f64,
}

impl LatencyModel {
    pub fn new(setup_s: f64, rate: f64) -> Self {
        LatencyModel { setup_s, rate }
    }

    pub fn predict(&self, n: f64) -> f64 {
        self.setup_s + n / self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceModel {
    pub k: f64,
}

impl ConfidenceModel {
    pub fn ci(&self, n: u64) -> f64 {
        self.k / (n as f64).sqrt()
    }
}

/// First chunk index of the `i`-th benchmark observation.
pub fn benchmark_first_chunk(i: usize) -> u64 {
    BENCHMARK_CHUNK_BASE | ((i as u64) << 32)
}

/// Times `task` on `platform` at each size, on reserved benchmark chunks.
pub fn benchmark(
    platform: &PlatformSpec,
    task: &PricingTask,
    sizes: &[u64],
    chunk_size: u64,
) -> Result<Vec<BenchmarkObservation>> {
    let mut distinct = sizes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Precondition(
            "benchmark needs at least 2 distinct sizes".into(),
        ));
    }
    if distinct[0] < 2 {
        return Err(Error::Precondition("benchmark sizes must be >= 2".into()));
    }
    if matches!(platform.kind, PlatformKind::LocalCpu { .. }) {
        // warm caches and the worker pool so the first timing is not an outlier
        execute(
            platform,
            task,
            distinct[0],
            benchmark_first_chunk(0),
            chunk_size,
        )?;
    }
    sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let r = execute(platform, task, n, benchmark_first_chunk(i), chunk_size)?;
            let e = estimate(&r)?;
            Ok(BenchmarkObservation {
                n,
                elapsed_s: r.elapsed_s,
                sample_std: e.sample_std,
            })
        })
        .collect()
}

/// Least-squares fit of `elapsed = setup + n / rate`, with the intercept
/// clamped at zero (refitting the slope through the origin).
pub fn fit_latency(obs: &[BenchmarkObservation]) -> Result<LatencyModel> {
    let mut ns: Vec<u64> = obs.iter().map(|o| o.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::Precondition(
            "latency fit needs at least 2 distinct sizes".into(),
        ));
    }
    let m = obs.len() as f64;
    let mean_n = obs.iter().map(|o| o.n as f64).sum::<f64>() / m;
    let mean_t = obs.iter().map(|o| o.elapsed_s).sum::<f64>() / m;
    let (sxy, sxx) = obs.iter().fold((0.0, 0.0), |(sxy, sxx), o| {
        let dx = o.n as f64 - mean_n;
        (sxy + dx * (o.elapsed_s - mean_t), sxx + dx * dx)
    });
    let mut slope = sxy / sxx;
    let mut setup = mean_t - slope * mean_n;
    if setup < 0.0 {
        setup = 0.0;
        let (snt, snn) = obs.iter().fold((0.0, 0.0), |(snt, snn), o| {
            let n = o.n as f64;
            (snt + n * o.elapsed_s, snn + n * n)
        });
        slope = snt / snn;
    }
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::DegenerateFit(slope));
    }
    Ok(LatencyModel {
        setup_s: setup,
        rate: 1.0 / slope,
    })
}

pub fn fit_confidence(obs: &BenchmarkObservation) -> Result<ConfidenceModel> {
    if obs.n < 2 {
        return Err(Error::InsufficientPaths(obs.n));
    }
    Ok(ConfidenceModel {
        k: Z_95 * obs.sample_std,
    })
}

pub fn predict_latency(model: &LatencyModel, n: u64) -> f64 {
    model.predict(n as f64)
}

/// Smallest path count (at least 2) whose predicted half-width is within
/// `ci_target`.
pub fn required_paths(model: &ConfidenceModel, ci_target: f64) -> Result<u64> {
    if !(ci_target > 0.0) || !ci_target.is_finite() {
        return Err(Error::Precondition(format!(
            "ci target must be positive and finite, got {ci_target}"
        )));
    }
    if model.k == 0.0 {
        return Ok(2);
    }
    let exact = (model.k / ci_target).powi(2);
    if !exact.is_finite() || exact >= 2f64.powi(62) {
        return Err(Error::Infeasible(format!(
            "ci target {ci_target} needs about {exact:.3e} paths"
        )));
    }
    let mut n = (exact.ceil() as u64).max(2);
    while model.ci(n) > ci_target {
        n += 1;
    }
    Ok(n)
}
