use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hetmc::allocator::{frontier, TargetVector};
use hetmc::mcengine::{estimate, DEFAULT_CHUNK_SIZE};
use hetmc::metrics::{benchmark, DEFAULT_BENCHMARK_SIZES};
use hetmc::orchestrator::{
    model_portfolio, plan, run, run_with_latency_bound, ModelDump, NamedAllocation, PairBenchmark,
    PartitionReport, RunConfig,
};
use hetmc::platforms::{default_local_registry, execute};
use hetmc::{load_registry, parse_task_file, Error, PlatformRegistry, Portfolio};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "hetmc",
    version,
    about = "Monte Carlo option pricing across heterogeneous platforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the base seed of every task.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = DEFAULT_CHUNK_SIZE)]
    chunk_size: u64,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Price every task directly on one platform.
    Price {
        task: PathBuf,
        #[arg(long)]
        platform: String,
        #[arg(long)]
        paths: u64,
        /// Platform file; the built-in `local` CPU platform when omitted.
        #[arg(long)]
        platforms: Option<PathBuf>,
    },
    /// Benchmark every (platform, task) pair.
    Bench {
        task: PathBuf,
        #[arg(long)]
        platforms: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BENCHMARK_SIZES)]
        sizes: Vec<u64>,
    },
    /// Fit and print the latency and confidence models.
    Model {
        task: PathBuf,
        #[arg(long)]
        platforms: PathBuf,
    },
    /// Optimized makespan for each confidence-target scale.
    Frontier {
        task: PathBuf,
        #[arg(long)]
        platforms: PathBuf,
        /// Multipliers applied to the base targets.
        #[arg(long, value_delimiter = ',', required = true)]
        ci_targets: Vec<f64>,
        /// Per-task base half-widths; 1 for every task when omitted.
        #[arg(long, value_delimiter = ',')]
        base_targets: Option<Vec<f64>>,
    },
    /// Optimized allocation and predicted makespan for the given targets.
    Partition {
        task: PathBuf,
        #[arg(long)]
        platforms: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        ci_target: Vec<f64>,
    },
    /// Model, partition, execute and report.
    Run {
        task: PathBuf,
        #[arg(long)]
        platforms: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            required_unless_present = "max_latency",
            conflicts_with = "max_latency"
        )]
        ci_target: Option<Vec<f64>>,
        /// Tightest targets whose predicted makespan fits this many seconds.
        #[arg(long)]
        max_latency: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasible() {
                3
            } else if e.is_validation() {
                2
            } else {
                1
            })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<String, Error> {
    let config = RunConfig {
        chunk_size: cli.chunk_size,
        ..RunConfig::default()
    };
    if cli.chunk_size < 1 {
        return Err(Error::Validation {
            field: "chunk_size".into(),
            context: None,
            reason: "must be >= 1".into(),
        });
    }
    let csv_ok = matches!(
        cli.command,
        Command::Price { .. } | Command::Bench { .. } | Command::Frontier { .. }
    );
    let default_format = if matches!(cli.command, Command::Frontier { .. }) {
        Format::Csv
    } else {
        Format::Json
    };
    let format = cli.format.unwrap_or(default_format);
    if format == Format::Csv && !csv_ok {
        return Err(Error::Validation {
            field: "format".into(),
            context: None,
            reason: "csv is only available for price, bench and frontier".into(),
        });
    }

    match &cli.command {
        Command::Price {
            task,
            platform,
            paths,
            platforms,
        } => {
            let portfolio = portfolio(task, cli.seed)?;
            let registry = match platforms {
                Some(p) => registry(p)?,
                None => default_local_registry(),
            };
            let spec = registry.get(platform)?;
            let mut rows = Vec::new();
            for t in portfolio.tasks() {
                let r = execute(spec, t, *paths, 0, cli.chunk_size)?;
                rows.push((t.id.clone(), estimate(&r)?, r.elapsed_s));
            }
            Ok(match format {
                Format::Json => to_json(
                    &rows
                        .iter()
                        .map(|(id, e, latency)| {
                            json!({
                                "task_id": id,
                                "platform": spec.name,
                                "clock": spec.clock(),
                                "price": e.price,
                                "std_error": e.std_error,
                                "ci_half_width": e.ci_half_width,
                                "sample_std": e.sample_std,
                                "n": e.n,
                                "latency_s": latency,
                            })
                        })
                        .collect::<Vec<_>>(),
                ),
                Format::Csv => {
                    let mut s = String::from(
                        "task_id,price,std_error,ci_half_width,sample_std,n,latency_s\n",
                    );
                    for (id, e, latency) in &rows {
                        let _ = writeln!(
                            s,
                            "{id},{},{},{},{},{},{latency}",
                            e.price, e.std_error, e.ci_half_width, e.sample_std, e.n
                        );
                    }
                    s
                }
            })
        }
        Command::Bench {
            task,
            platforms,
            sizes,
        } => {
            let portfolio = portfolio(task, cli.seed)?;
            let registry = registry(platforms)?;
            let mut benches = Vec::new();
            for p in registry.platforms() {
                for t in portfolio.tasks() {
                    benches.push(PairBenchmark {
                        platform: p.name.clone(),
                        task_id: t.id.clone(),
                        observations: benchmark(p, t, sizes, cli.chunk_size)?,
                    });
                }
            }
            Ok(match format {
                Format::Json => to_json(&benches),
                Format::Csv => {
                    let mut s = String::from("platform,task_id,n,elapsed_s,sample_std\n");
                    for b in &benches {
                        for o in &b.observations {
                            let _ = writeln!(
                                s,
                                "{},{},{},{},{}",
                                b.platform, b.task_id, o.n, o.elapsed_s, o.sample_std
                            );
                        }
                    }
                    s
                }
            })
        }
        Command::Model { task, platforms } => {
            let portfolio = portfolio(task, cli.seed)?;
            let (models, _) = model_portfolio(&portfolio, &registry(platforms)?, &config)?;
            Ok(to_json(&ModelDump::new(&models)?))
        }
        Command::Frontier {
            task,
            platforms,
            ci_targets,
            base_targets,
        } => {
            let portfolio = portfolio(task, cli.seed)?;
            let (models, _) = model_portfolio(&portfolio, &registry(platforms)?, &config)?;
            let base = match base_targets {
                Some(b) => TargetVector::new(b.clone())?,
                None => TargetVector::uniform(1.0, portfolio.len())?,
            };
            let mut scales = ci_targets.clone();
            scales.sort_by(f64::total_cmp);
            let vectors = scales
                .iter()
                .map(|&s| base.scaled(s))
                .collect::<Result<Vec<_>, _>>()?;
            let points = frontier(&models, &vectors)?;
            Ok(match format {
                Format::Json => to_json(
                    &scales
                        .iter()
                        .zip(&points)
                        .map(|(scale, p)| {
                            json!({
                                "ci_scale": scale,
                                "targets": p.targets,
                                "demands": p.demands,
                                "makespan_s": p.makespan_s,
                                "allocation": NamedAllocation {
                                    platforms: models.platforms.clone(),
                                    tasks: models.tasks.clone(),
                                    allocation: p.allocation.clone(),
                                },
                            })
                        })
                        .collect::<Vec<_>>(),
                ),
                Format::Csv => {
                    let mut s = String::from("ci_scale,makespan_s");
                    for p in &models.platforms {
                        for t in &models.tasks {
                            let _ = write!(s, ",alloc_{p}_{t}");
                        }
                    }
                    s.push('\n');
                    for (scale, point) in scales.iter().zip(&points) {
                        let _ = write!(s, "{scale},{}", point.makespan_s);
                        for pi in 0..models.platforms.len() {
                            for ti in 0..models.tasks.len() {
                                let _ = write!(s, ",{}", point.allocation.get(pi, ti));
                            }
                        }
                        s.push('\n');
                    }
                    s
                }
            })
        }
        Command::Partition {
            task,
            platforms,
            ci_target,
        } => {
            let portfolio = portfolio(task, cli.seed)?;
            let (models, _) = model_portfolio(&portfolio, &registry(platforms)?, &config)?;
            let targets = targets(ci_target, portfolio.len())?;
            Ok(to_json(&PartitionReport::new(&plan(&models, &targets)?)))
        }
        Command::Run {
            task,
            platforms,
            ci_target,
            max_latency,
        } => {
            let portfolio = portfolio(task, cli.seed)?;
            let registry = registry(platforms)?;
            let report = match (ci_target, max_latency) {
                (Some(t), _) => run(
                    &portfolio,
                    &registry,
                    &targets(t, portfolio.len())?,
                    &config,
                )?,
                (None, Some(bound)) => {
                    run_with_latency_bound(&portfolio, &registry, *bound, &config)?
                }
                (None, None) => unreachable!("clap requires one of the two"),
            };
            Ok(to_json(&report))
        }
    }
}

fn portfolio(path: &Path, seed: Option<u64>) -> Result<Portfolio, Error> {
    let p = parse_task_file(&std::fs::read(path)?)?;
    Ok(match seed {
        Some(s) => p.with_seed(s),
        None => p,
    })
}

fn registry(path: &Path) -> Result<PlatformRegistry, Error> {
    load_registry(&std::fs::read(path)?)
}

/// One target for every task, or one per task.
fn targets(values: &[f64], tasks: usize) -> Result<TargetVector, Error> {
    match values.len() {
        1 => TargetVector::uniform(values[0], tasks),
        n if n == tasks => TargetVector::new(values.to_vec()),
        n => Err(Error::Validation {
            field: "ci_target".into(),
            context: None,
            reason: format!("expected 1 or {tasks} values, got {n}"),
        }),
    }
}

fn to_json<T: serde::Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}
