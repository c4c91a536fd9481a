//! Execution platforms: the local multicore CPU and simulated accelerators.
//!
//! Every platform runs the same numeric kernel, so moment sums depend only on
//! the task and the chunk indices. Simulated platforms differ only in the
//! latency they report, `setup_s + n / rate`, read off a virtual clock.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::findomain::PricingTask;
use crate::mcengine::{chunk_layout, run_chunk, PartialResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    Wall,
    Virtual,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlatformKind {
    LocalCpu {
        workers: usize,
    },
    Simulated {
        rate: f64,
        setup_s: f64,
        /// Rates keyed by task id or by underlying family (`heston`,
        /// `black_scholes`); task id wins.
        rate_overrides: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformSpec {
    pub name: String,
    pub kind: PlatformKind,
}

impl PlatformSpec {
    pub fn local_cpu(name: impl Into<String>, workers: usize) -> Self {
        PlatformSpec {
            name: name.into(),
            kind: PlatformKind::LocalCpu { workers },
        }
    }

    pub fn simulated(name: impl Into<String>, rate: f64, setup_s: f64) -> Self {
        PlatformSpec {
            name: name.into(),
            kind: PlatformKind::Simulated {
                rate,
                setup_s,
                rate_overrides: BTreeMap::new(),
            },
        }
    }

    pub fn with_override(mut self, key: impl Into<String>, rate: f64) -> Self {
        if let PlatformKind::Simulated { rate_overrides, .. } = &mut self.kind {
            rate_overrides.insert(key.into(), rate);
        }
        self
    }

    pub fn clock(&self) -> Clock {
        match self.kind {
            PlatformKind::LocalCpu { .. } => Clock::Wall,
            PlatformKind::Simulated { .. } => Clock::Virtual,
        }
    }

    /// Configured `(setup_s, rate)` for a simulated platform and task.
    pub fn simulated_profile(&self, task: &PricingTask) -> Option<(f64, f64)> {
        match &self.kind {
            PlatformKind::LocalCpu { .. } => None,
            PlatformKind::Simulated {
                rate,
                setup_s,
                rate_overrides,
            } => {
                let rate = rate_overrides
                    .get(&task.id)
                    .or_else(|| rate_overrides.get(task.underlying.family()))
                    .copied()
                    .unwrap_or(*rate);
                Some((*setup_s, rate))
            }
        }
    }

    /// Virtual latency of `n_paths` on a simulated platform.
    pub fn virtual_latency(&self, task: &PricingTask, n_paths: u64) -> Option<f64> {
        self.simulated_profile(task)
            .map(|(setup_s, rate)| setup_s + n_paths as f64 / rate)
    }

    fn validate(&self) -> Result<()> {
        let ctx = format!("platform `{}`", self.name);
        let ctx = Some(ctx.as_str());
        if self.name.is_empty() {
            return Err(Error::invalid("name", None, "must be non-empty"));
        }
        match &self.kind {
            PlatformKind::LocalCpu { workers } => {
                if *workers < 1 {
                    return Err(Error::invalid("workers", ctx, "must be >= 1"));
                }
            }
            PlatformKind::Simulated {
                rate,
                setup_s,
                rate_overrides,
            } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::invalid(
                        "rate",
                        ctx,
                        format!("must be > 0, got {rate}"),
                    ));
                }
                if !(setup_s.is_finite() && *setup_s >= 0.0) {
                    return Err(Error::invalid(
                        "setup_s",
                        ctx,
                        format!("must be >= 0, got {setup_s}"),
                    ));
                }
                for (key, r) in rate_overrides {
                    if !(r.is_finite() && *r > 0.0) {
                        return Err(Error::invalid(
                            format!("rate_overrides.{key}"),
                            ctx,
                            format!("must be > 0, got {r}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs `n_paths` of `task` on chunk indices `first_chunk..` and reports the
/// platform's latency: measured wall time for the local CPU, the virtual clock
/// for simulated platforms.
pub fn execute(
    platform: &PlatformSpec,
    task: &PricingTask,
    n_paths: u64,
    first_chunk: u64,
    chunk_size: u64,
) -> Result<PartialResult> {
    if n_paths < 1 {
        return Err(Error::Precondition(
            "execute needs at least one path".into(),
        ));
    }
    let run_all = || -> PartialResult {
        chunk_layout(n_paths, first_chunk, chunk_size)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(chunk, paths)| run_chunk(task, paths, chunk))
            .reduce(PartialResult::zero, |a, b| crate::mcengine::merge(&a, &b))
    };
    match &platform.kind {
        PlatformKind::LocalCpu { workers } => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(*workers)
                .build()
                .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
            let started = Instant::now();
            let result = pool.install(run_all);
            Ok(result.with_elapsed(started.elapsed().as_secs_f64()))
        }
        PlatformKind::Simulated { .. } => {
            let elapsed = platform
                .virtual_latency(task, n_paths)
                .expect("simulated platforms always have a profile");
            Ok(run_all().with_elapsed(elapsed))
        }
    }
}

/// Ordered, non-empty set of uniquely named platforms.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformRegistry {
    platforms: Vec<PlatformSpec>,
}

impl PlatformRegistry {
    pub fn new(platforms: Vec<PlatformSpec>) -> Result<Self> {
        if platforms.is_empty() {
            return Err(Error::invalid(
                "platforms",
                None,
                "registry must contain at least one platform",
            ));
        }
        let mut names = HashSet::new();
        for p in &platforms {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::invalid(
                    "name",
                    Some(&format!("platform `{}`", p.name)),
                    "duplicate name",
                ));
            }
        }
        Ok(PlatformRegistry { platforms })
    }

    pub fn platforms(&self) -> &[PlatformSpec] {
        &self.platforms
    }

    pub fn len(&self) -> usize {
        self.platforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.platforms.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&PlatformSpec> {
        self.platforms
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::UnknownPlatform(name.to_owned()))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformFile {
    platforms: Vec<RawPlatform>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlatform {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    workers: Option<usize>,
    rate: Option<f64>,
    setup_s: Option<f64>,
    rate_overrides: Option<BTreeMap<String, f64>>,
}

impl RawPlatform {
    fn into_spec(self) -> Result<PlatformSpec> {
        let ctx = format!("platform `{}`", self.name);
        let ctx = Some(ctx.as_str());
        let kind = match self.kind.as_str() {
            "local_cpu" => {
                for (field, present) in [
                    ("rate", self.rate.is_some()),
                    ("setup_s", self.setup_s.is_some()),
                    ("rate_overrides", self.rate_overrides.is_some()),
                ] {
                    if present {
                        return Err(Error::invalid(field, ctx, "not valid for local_cpu"));
                    }
                }
                let workers = self
                    .workers
                    .ok_or_else(|| Error::invalid("workers", ctx, "required for local_cpu"))?;
                PlatformKind::LocalCpu { workers }
            }
            "simulated" => {
                if self.workers.is_some() {
                    return Err(Error::invalid("workers", ctx, "not valid for simulated"));
                }
                let rate = self
                    .rate
                    .ok_or_else(|| Error::invalid("rate", ctx, "required for simulated"))?;
                PlatformKind::Simulated {
                    rate,
                    setup_s: self.setup_s.unwrap_or(0.0),
                    rate_overrides: self.rate_overrides.unwrap_or_default(),
                }
            }
            other => {
                return Err(Error::invalid(
                    "type",
                    ctx,
                    format!("expected `local_cpu` or `simulated`, got `{other}`"),
                ))
            }
        };
        Ok(PlatformSpec {
            name: self.name,
            kind,
        })
    }
}

pub fn load_registry(bytes: &[u8]) -> Result<PlatformRegistry> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Syntax(format!("invalid UTF-8: {e}")))?;
    let file: PlatformFile = serde_json::from_str(text)?;
    let specs = file
        .platforms
        .into_iter()
        .map(RawPlatform::into_spec)
        .collect::<Result<Vec<_>>>()?;
    PlatformRegistry::new(specs)
}

/// A one-platform registry holding the local CPU with every available core.
pub fn default_local_registry() -> PlatformRegistry {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    PlatformRegistry::new(vec![PlatformSpec::local_cpu("local", workers)])
        .expect("a single local platform is always valid")
}
