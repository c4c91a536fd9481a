mod common;

use common::*;
use hetmc::allocator::{AllocationMatrix, Matrix, TargetVector};
use hetmc::mcengine::{estimate, merge, PartialResult};
use hetmc::orchestrator::{
    execute_plan, model_portfolio, plan, run, run_with_latency_bound, shard_layout, Plan, RunConfig,
};
use hetmc::platforms::{execute, PlatformSpec};
use hetmc::{PlatformRegistry, Portfolio};

fn quick() -> RunConfig {
    RunConfig {
        chunk_size: 8_192,
        benchmark_sizes: vec![4_096, 16_384],
    }
}

#[test]
fn local_run_hits_the_analytic_price() {
    let portfolio = Portfolio::new(vec![atm_call(2024)]).unwrap();
    let registry = PlatformRegistry::new(vec![PlatformSpec::local_cpu("local", 1)]).unwrap();
    // twice the half-width expected at 10^4 paths
    let target = 2.0 * 1.959964 * 14.7 / 100.0;
    let report = run(
        &portfolio,
        &registry,
        &TargetVector::uniform(target, 1).unwrap(),
        &quick(),
    )
    .unwrap();
    let t = &report.tasks[0];
    assert!(
        (t.price - BS_CALL_ATM).abs() <= 3.0 * t.ci_half_width,
        "{t:?}"
    );
    assert!(t.ci_half_width <= 1.2 * target);
    assert!(report.makespan_wall_s.is_some() && report.makespan_virtual_s.is_none());
    assert!(!report.mixed_domain);
}

#[test]
fn accelerator_latencies_close_the_model_loop() {
    let registry = load_platforms("platforms/accelerators.json");
    let portfolio = load_tasks("tasks/portfolio.json");
    let report = run(
        &portfolio,
        &registry,
        &TargetVector::new(vec![0.08, 0.05]).unwrap(),
        &quick(),
    )
    .unwrap();
    for p in &report.platforms {
        if p.predicted_latency_s > 0.0 {
            assert!(
                (p.latency_s - p.predicted_latency_s).abs() / p.predicted_latency_s < 1e-6,
                "{p:?}"
            );
        }
    }
    for t in &report.tasks {
        assert_eq!(t.total_paths, t.shards.iter().map(|s| s.paths).sum::<u64>());
        assert!(t.total_paths >= t.demand_paths);
        assert!(t.ci_half_width <= 1.2 * t.target_ci, "{t:?}");
    }
    let max = report
        .platforms
        .iter()
        .map(|p| p.latency_s)
        .fold(0.0, f64::max);
    assert_eq!(report.makespan_s, max);
    assert_eq!(report.makespan_virtual_s, Some(max));
}

#[test]
fn mixed_registries_are_flagged() {
    let registry = load_platforms("platforms/mixed.json");
    let portfolio = load_tasks("tasks/bs_european.json");
    let report = run(
        &portfolio,
        &registry,
        &TargetVector::uniform(0.05, 1).unwrap(),
        &quick(),
    )
    .unwrap();
    assert!(report.mixed_domain);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["mixed_domain"], true);
    assert!(json["allocation"]["local"]["bs_european"].is_number());
    assert_eq!(json["models"][0]["latency"][1]["platform"], "accelerator");
}

#[test]
fn repeated_simulated_runs_are_bit_identical() {
    let registry = load_platforms("platforms/accelerators.json");
    let portfolio = load_tasks("tasks/bs_asian.json").with_seed(9);
    let targets = TargetVector::uniform(0.05, 1).unwrap();
    let a =
        serde_json::to_string(&run(&portfolio, &registry, &targets, &quick()).unwrap()).unwrap();
    let b =
        serde_json::to_string(&run(&portfolio, &registry, &targets, &quick()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn any_split_equals_one_platform_over_the_same_chunks() {
    let registry = PlatformRegistry::new(vec![
        PlatformSpec::simulated("a", 1e6, 0.0),
        PlatformSpec::simulated("b", 3e6, 0.2),
        PlatformSpec::simulated("c", 2e6, 0.0),
    ])
    .unwrap();
    let portfolio = load_tasks("tasks/bs_asian.json");
    let config = quick();
    let (models, _) = model_portfolio(&portfolio, &registry, &config).unwrap();
    let mut p = plan(&models, &TargetVector::uniform(0.1, 1).unwrap()).unwrap();
    p.allocation =
        AllocationMatrix::new(Matrix::from_fn(3, 1, |r, _| [0.25, 0.15, 0.6][r])).unwrap();
    let report = execute_plan(&portfolio, &registry, &models, &p, &config).unwrap();
    let t = &report.tasks[0];
    let total = t.total_paths;
    let single = execute(
        &PlatformSpec::simulated("one", 1.0, 0.0),
        &portfolio.tasks()[0],
        total,
        0,
        config.chunk_size,
    )
    .unwrap();
    let e = estimate(&single).unwrap();
    assert_eq!(e.price.to_bits(), t.price.to_bits());
    assert_eq!(e.ci_half_width.to_bits(), t.ci_half_width.to_bits());
}

#[test]
fn shards_cover_contiguous_chunks_from_zero() {
    let registry = load_platforms("platforms/accelerators.json");
    let portfolio = load_tasks("tasks/portfolio.json");
    let (models, _) = model_portfolio(&portfolio, &registry, &quick()).unwrap();
    let p: Plan = plan(&models, &TargetVector::new(vec![0.02, 0.02]).unwrap()).unwrap();
    let layout = shard_layout(&p, 8_192).unwrap();
    for ti in 0..2 {
        let mut next = 0;
        for row in &layout {
            let (first, paths) = row[ti];
            if paths > 0 {
                assert_eq!(first, next);
                assert_eq!(paths % 8_192, 0);
                next += paths / 8_192;
            }
        }
        assert!(next * 8_192 >= p.problem.demands[ti]);
    }
}

#[test]
fn latency_bound_picks_the_tightest_feasible_targets() {
    let registry = load_platforms("platforms/accelerators.json");
    let portfolio = load_tasks("tasks/bs_european.json");
    let loose = run_with_latency_bound(&portfolio, &registry, 0.01, &quick()).unwrap();
    let tight = run_with_latency_bound(&portfolio, &registry, 0.1, &quick()).unwrap();
    assert!(loose.predicted_makespan_s <= 0.01 && tight.predicted_makespan_s <= 0.1);
    assert!(tight.tasks[0].target_ci < loose.tasks[0].target_ci);
    let err = run_with_latency_bound(&portfolio, &registry, 1e-9, &quick()).unwrap_err();
    assert!(err.is_infeasible(), "{err}");
}

#[test]
fn infeasible_targets_are_reported() {
    let registry = load_platforms("platforms/accelerators.json");
    let portfolio = load_tasks("tasks/bs_european.json");
    let err = run(
        &portfolio,
        &registry,
        &TargetVector::uniform(1e-12, 1).unwrap(),
        &quick(),
    )
    .unwrap_err();
    assert!(err.is_infeasible(), "{err}");
}

#[test]
fn merging_many_shards_is_order_free() {
    let t = atm_call(1);
    let parts: Vec<PartialResult> = (0..6)
        .map(|c| hetmc::mcengine::run_chunk(&t, 1_000, c))
        .collect();
    let forward = parts
        .iter()
        .fold(PartialResult::zero(), |a, b| merge(&a, b));
    let backward = parts
        .iter()
        .rev()
        .fold(PartialResult::zero(), |a, b| merge(&a, b));
    assert!(forward.same_moments(&backward));
}
