//! Financial domain description: underlyings, derivative contracts and the
//! pricing tasks built from them.
//!
//! Monitoring and fixing dates always lie on the uniform simulation grid
//! `t_k = k * T / steps` for `k = 1..=steps`. Currency is unit-less and all
//! rates are continuously compounded.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnderlyingSpec {
    BlackScholes {
        spot: f64,
        rate: f64,
        volatility: f64,
    },
    Heston {
        spot: f64,
        rate: f64,
        v0: f64,
        kappa: f64,
        theta: f64,
        xi: f64,
        rho: f64,
    },
}

impl UnderlyingSpec {
    pub fn spot(&self) -> f64 {
        match *self {
            UnderlyingSpec::BlackScholes { spot, .. } | UnderlyingSpec::Heston { spot, .. } => spot,
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            UnderlyingSpec::BlackScholes { rate, .. } | UnderlyingSpec::Heston { rate, .. } => rate,
        }
    }

    /// Model family name, as used in task files and platform rate overrides.
    pub fn family(&self) -> &'static str {
        match self {
            UnderlyingSpec::BlackScholes { .. } => "black_scholes",
            UnderlyingSpec::Heston { .. } => "heston",
        }
    }

    fn validate(&self, ctx: &str) -> Result<()> {
        let ctx = Some(ctx);
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, ctx, format!("must be > 0, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, ctx, format!("must be >= 0, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    ctx,
                    format!("must be finite, got {v}"),
                ))
            }
        };
        match *self {
            UnderlyingSpec::BlackScholes {
                spot,
                rate,
                volatility,
            } => {
                positive("spot", spot)?;
                finite("rate", rate)?;
                non_negative("volatility", volatility)
            }
            UnderlyingSpec::Heston {
                spot,
                rate,
                v0,
                kappa,
                theta,
                xi,
                rho,
            } => {
                positive("spot", spot)?;
                finite("rate", rate)?;
                non_negative("v0", v0)?;
                non_negative("kappa", kappa)?;
                non_negative("theta", theta)?;
                non_negative("xi", xi)?;
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(Error::invalid(
                        "rho",
                        ctx,
                        format!("must lie in [-1, 1], got {rho}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivativeSpec {
    European {
        strike: f64,
        maturity: f64,
        kind: OptionKind,
    },
    AsianArithmetic {
        strike: f64,
        maturity: f64,
        fixings: u32,
        kind: OptionKind,
    },
    BarrierKnockOut {
        strike: f64,
        maturity: f64,
        barrier: f64,
        direction: BarrierDirection,
        kind: OptionKind,
    },
}

impl DerivativeSpec {
    pub fn strike(&self) -> f64 {
        match *self {
            DerivativeSpec::European { strike, .. }
            | DerivativeSpec::AsianArithmetic { strike, .. }
            | DerivativeSpec::BarrierKnockOut { strike, .. } => strike,
        }
    }

    pub fn maturity(&self) -> f64 {
        match *self {
            DerivativeSpec::European { maturity, .. }
            | DerivativeSpec::AsianArithmetic { maturity, .. }
            | DerivativeSpec::BarrierKnockOut { maturity, .. } => maturity,
        }
    }

    pub fn kind(&self) -> OptionKind {
        match *self {
            DerivativeSpec::European { kind, .. }
            | DerivativeSpec::AsianArithmetic { kind, .. }
            | DerivativeSpec::BarrierKnockOut { kind, .. } => kind,
        }
    }

    fn validate(&self, ctx: &str, steps: u32) -> Result<()> {
        let ctx_opt = Some(ctx);
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    ctx_opt,
                    format!("must be > 0, got {v}"),
                ))
            }
        };
        positive("strike", self.strike())?;
        positive("maturity", self.maturity())?;
        match *self {
            DerivativeSpec::European { .. } => Ok(()),
            DerivativeSpec::AsianArithmetic { fixings, .. } => {
                if fixings < 1 {
                    return Err(Error::invalid("fixings", ctx_opt, "must be >= 1"));
                }
                if steps < fixings || !steps.is_multiple_of(fixings) {
                    return Err(Error::invalid(
                        "fixings",
                        ctx_opt,
                        format!("steps ({steps}) must be a multiple of fixings ({fixings})"),
                    ));
                }
                Ok(())
            }
            DerivativeSpec::BarrierKnockOut { barrier, .. } => positive("barrier", barrier),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingTask {
    pub id: String,
    pub underlying: UnderlyingSpec,
    pub derivative: DerivativeSpec,
    pub steps: u32,
    pub base_seed: u64,
}

impl PricingTask {
    pub fn validate(&self) -> Result<()> {
        let ctx = format!("task `{}`", self.id);
        if self.id.is_empty() {
            return Err(Error::invalid("id", None, "must be non-empty"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("steps", Some(&ctx), "must be >= 1"));
        }
        self.underlying.validate(&ctx)?;
        self.derivative.validate(&ctx, self.steps)
    }

    /// Continuous discount factor `exp(-r T)` applied to every payoff.
    pub fn discount_factor(&self) -> f64 {
        (-self.underlying.rate() * self.derivative.maturity()).exp()
    }
}

/// A non-empty, id-unique, validated list of pricing tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    tasks: Vec<PricingTask>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    tasks: Vec<PricingTask>,
}

impl Portfolio {
    pub fn new(tasks: Vec<PricingTask>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::invalid(
                "tasks",
                None,
                "portfolio must contain at least one task",
            ));
        }
        let mut seen = HashSet::new();
        for task in &tasks {
            task.validate()?;
            if !seen.insert(task.id.as_str()) {
                return Err(Error::invalid(
                    "id",
                    Some(&format!("task `{}`", task.id)),
                    "duplicate id",
                ));
            }
        }
        Ok(Portfolio { tasks })
    }

    pub fn tasks(&self) -> &[PricingTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: &str) -> Option<&PricingTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Replaces every task's base seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for t in &mut self.tasks {
            t.base_seed = seed;
        }
        self
    }

    pub fn into_tasks(self) -> Vec<PricingTask> {
        self.tasks
    }
}

/// Parses and validates a JSON task file.
pub fn parse_task_file(bytes: &[u8]) -> Result<Portfolio> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Syntax(format!("invalid UTF-8: {e}")))?;
    let file: TaskFile = serde_json::from_str(text)?;
    Portfolio::new(file.tasks)
}

/// Serializes a portfolio to the JSON task format.
///
/// Refuses portfolios that would not parse back (empty, or holding tasks that
/// fail validation), so the output always round-trips.
pub fn serialize_portfolio(p: &Portfolio) -> Result<String> {
    let revalidated = Portfolio::new(p.tasks.clone())?;
    let file = TaskFile {
        tasks: revalidated.tasks,
    };
    Ok(serde_json::to_string_pretty(&file).expect("task file serialization is infallible"))
}
