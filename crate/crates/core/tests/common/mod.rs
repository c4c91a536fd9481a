#![allow(dead_code)]

use std::path::PathBuf;

use hetmc::findomain::{DerivativeSpec, OptionKind, UnderlyingSpec};
use hetmc::{load_registry, parse_task_file, PlatformRegistry, Portfolio, PricingTask};
use statrs::distribution::{ContinuousCDF, Normal};

pub const BS_CALL_ATM: f64 = 10.450583572185565;

/// Closed-form Black-Scholes price of a European option.
pub fn black_scholes(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    maturity: f64,
    kind: OptionKind,
) -> f64 {
    let n = Normal::standard();
    let sd = vol * maturity.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * maturity) / sd;
    let d2 = d1 - sd;
    let df = (-rate * maturity).exp();
    match kind {
        OptionKind::Call => spot * n.cdf(d1) - strike * df * n.cdf(d2),
        OptionKind::Put => strike * df * n.cdf(-d2) - spot * n.cdf(-d1),
    }
}

pub fn bs_underlying(volatility: f64) -> UnderlyingSpec {
    UnderlyingSpec::BlackScholes {
        spot: 100.0,
        rate: 0.05,
        volatility,
    }
}

pub fn european_call(strike: f64) -> DerivativeSpec {
    DerivativeSpec::European {
        strike,
        maturity: 1.0,
        kind: OptionKind::Call,
    }
}

pub fn task(
    id: &str,
    underlying: UnderlyingSpec,
    derivative: DerivativeSpec,
    steps: u32,
    seed: u64,
) -> PricingTask {
    PricingTask {
        id: id.into(),
        underlying,
        derivative,
        steps,
        base_seed: seed,
    }
}

/// The at-the-money one-year call on S0 = 100, r = 5%, sigma = 20%.
pub fn atm_call(seed: u64) -> PricingTask {
    task(
        "atm_call",
        bs_underlying(0.2),
        european_call(100.0),
        1,
        seed,
    )
}

pub fn data_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

pub fn load_tasks(rel: &str) -> Portfolio {
    parse_task_file(&std::fs::read(data_file(rel)).unwrap()).unwrap()
}

pub fn load_platforms(rel: &str) -> PlatformRegistry {
    load_registry(&std::fs::read(data_file(rel)).unwrap()).unwrap()
}

/// Small deterministic generator for randomized instances.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + self.next_f64() * (hi.ln() - lo.ln())).exp()
    }
}
