//! Payoffs, chunked Monte Carlo pricing and mergeable moment sums.

mod exact;

use std::time::Instant;

use serde::Serialize;

pub use exact::ExactSum;

use crate::error::{Error, Result};
use crate::findomain::{BarrierDirection, DerivativeSpec, OptionKind, PricingTask};
use crate::stochastic::{fill_path, open_stream, StreamKey};

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959964;

pub const DEFAULT_CHUNK_SIZE: u64 = 65_536;

#[inline]
fn vanilla(kind: OptionKind, underlying: f64, strike: f64) -> f64 {
    match kind {
        OptionKind::Call => (underlying - strike).max(0.0),
        OptionKind::Put => (strike - underlying).max(0.0),
    }
}

#[inline]
fn breaches(direction: BarrierDirection, barrier: f64, spot: f64) -> bool {
    match direction {
        BarrierDirection::Up => spot >= barrier,
        BarrierDirection::Down => spot <= barrier,
    }
}

/// Undiscounted payoff of `derivative` along `spots` (`S(t_1)..S(t_steps)`).
///
/// A knock-out barrier already breached by `spot0` pays nothing.
pub fn payoff(derivative: &DerivativeSpec, spots: &[f64], spot0: f64) -> f64 {
    let terminal = *spots.last().expect("path has at least one grid point");
    match *derivative {
        DerivativeSpec::European { strike, kind, .. } => vanilla(kind, terminal, strike),
        DerivativeSpec::AsianArithmetic {
            strike,
            fixings,
            kind,
            ..
        } => {
            let stride = spots.len() / fixings as usize;
            let total: f64 = spots.iter().skip(stride - 1).step_by(stride).sum();
            vanilla(kind, total / f64::from(fixings), strike)
        }
        DerivativeSpec::BarrierKnockOut {
            strike,
            barrier,
            direction,
            kind,
            ..
        } => {
            if breaches(direction, barrier, spot0)
                || spots.iter().any(|&s| breaches(direction, barrier, s))
            {
                0.0
            } else {
                vanilla(kind, terminal, strike)
            }
        }
    }
}

/// Mergeable Monte Carlo moments of discounted payoffs.
///
/// Sums are exact, so `merge` is associative and commutative bit-for-bit and
/// any grouping of chunks reproduces the same totals. The payoff range is kept
/// alongside so a constant payoff stream reports exactly zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialResult {
    pub n: u64,
    sum: ExactSum,
    sum_sq: ExactSum,
    min: f64,
    max: f64,
    pub elapsed_s: f64,
}

impl Default for PartialResult {
    fn default() -> Self {
        Self::zero()
    }
}

impl PartialResult {
    pub fn zero() -> Self {
        PartialResult {
            n: 0,
            sum: ExactSum::ZERO,
            sum_sq: ExactSum::ZERO,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            elapsed_s: 0.0,
        }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let mut r = Self::zero();
        for &x in samples {
            r.push(x);
        }
        r
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add_f64(x);
        self.sum_sq.add_f64(x * x);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn sum(&self) -> f64 {
        self.sum.to_f64()
    }

    pub fn sum_sq(&self) -> f64 {
        self.sum_sq.to_f64()
    }

    pub fn with_elapsed(mut self, elapsed_s: f64) -> Self {
        self.elapsed_s = elapsed_s;
        self
    }

    /// True when the moment sums (ignoring latency) agree bit-for-bit.
    pub fn same_moments(&self, other: &PartialResult) -> bool {
        self.n == other.n && self.sum == other.sum && self.sum_sq == other.sum_sq
    }
}

/// Combines results of disjoint chunk sets. Latency composes in parallel.
pub fn merge(a: &PartialResult, b: &PartialResult) -> PartialResult {
    let mut sum = a.sum;
    sum.add(&b.sum);
    let mut sum_sq = a.sum_sq;
    sum_sq.add(&b.sum_sq);
    PartialResult {
        n: a.n + b.n,
        sum,
        sum_sq,
        min: a.min.min(b.min),
        max: a.max.max(b.max),
        elapsed_s: a.elapsed_s.max(b.elapsed_s),
    }
}

impl std::iter::Sum for PartialResult {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(PartialResult::zero(), |acc, r| merge(&acc, &r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub price: f64,
    pub std_error: f64,
    pub ci_half_width: f64,
    pub sample_std: f64,
    pub n: u64,
}

pub fn estimate(r: &PartialResult) -> Result<Estimate> {
    if r.n < 2 {
        return Err(Error::InsufficientPaths(r.n));
    }
    let n = r.n as f64;
    let sum = r.sum();
    let price = sum / n;
    let variance = if r.min == r.max {
        0.0
    } else {
        ((r.sum_sq() - sum * sum / n) / (n - 1.0)).max(0.0)
    };
    let std_error = (variance / n).sqrt();
    Ok(Estimate {
        price,
        std_error,
        ci_half_width: Z_95 * std_error,
        sample_std: variance.sqrt(),
        n: r.n,
    })
}

/// Simulates `n_paths` paths of `task` on the stream of `chunk_index` and
/// accumulates discounted payoffs. `elapsed_s` is measured wall time.
pub fn run_chunk(task: &PricingTask, n_paths: u64, chunk_index: u64) -> PartialResult {
    let started = Instant::now();
    let mut stream = open_stream(StreamKey::new(&task.id, task.base_seed, chunk_index));
    let discount = task.discount_factor();
    let maturity = task.derivative.maturity();
    let spot0 = task.underlying.spot();
    let mut path = Vec::with_capacity(task.steps as usize);
    let mut acc = PartialResult::zero();
    for _ in 0..n_paths {
        fill_path(
            &task.underlying,
            maturity,
            task.steps,
            &mut stream.spot,
            &mut stream.aux,
            &mut path,
        );
        acc.push(discount * payoff(&task.derivative, &path, spot0));
    }
    acc.elapsed_s = started.elapsed().as_secs_f64();
    acc
}

/// Splits `n_paths` into `(chunk_index, paths)` pieces of `chunk_size`
/// starting at `first_chunk`; only the last piece may be short.
pub fn chunk_layout(
    n_paths: u64,
    first_chunk: u64,
    chunk_size: u64,
) -> impl Iterator<Item = (u64, u64)> {
    assert!(chunk_size >= 1, "chunk size must be positive");
    let chunks = n_paths.div_ceil(chunk_size);
    (0..chunks).map(move |i| {
        let paths = if i + 1 == chunks {
            n_paths - i * chunk_size
        } else {
            chunk_size
        };
        (first_chunk + i, paths)
    })
}
