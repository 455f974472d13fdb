//! Simulation parameters and their validation.
//!
//! `ModelParams` is the complete description of a single run: population size
//! and topology, the upper bounds of the uniformly drawn per-agent traits,
//! market depth, memory, and the run length. An all-defaults value reproduces
//! the standard baseline: 2500 agents on a periodic square lattice, unit trait
//! bounds, threshold bound 2, market depth 0.25, trade fraction 0.02 and
//! memory 0.95.

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

/// Price used to settle executed orders.
///
/// `PriceBeforeTrade` settles at the post-clearing price p(t) (orders move the
/// price first, then trade at it). `PriceAfterTrade` settles at the
/// pre-clearing price p(t-1), i.e. the market maker adjusts the quote only
/// after the exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingVariant {
    PriceBeforeTrade,
    PriceAfterTrade,
}

/// Social graph shape connecting the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Periodic square lattice, 4 neighbors per agent. Requires `n_agents`
    /// to be a perfect square with side >= 3.
    Lattice4,
    /// Symmetric random graph with mean degree 4, no self-loops.
    Random,
    /// Every pair connected. Capped at 1024 agents.
    Complete,
}

impl Topology {
    /// Checks that `n` agents can be arranged in this topology.
    pub fn check(&self, n: usize) -> Result<(), ConfigError> {
        match self {
            Topology::Lattice4 => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n || side < 3 {
                    return Err(ConfigError::invalid(
                        "n_agents",
                        format!("lattice4 needs a perfect square with side >= 3, got {n}"),
                    ));
                }
            }
            Topology::Random => {
                if n < 2 {
                    return Err(ConfigError::invalid(
                        "n_agents",
                        format!("random topology needs at least 2 agents, got {n}"),
                    ));
                }
            }
            Topology::Complete => {
                if n < 2 || n > 1024 {
                    return Err(ConfigError::invalid(
                        "n_agents",
                        format!("complete topology supports 2..=1024 agents, got {n}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Full parameter set for one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Number of agents.
    pub n_agents: usize,
    /// Upper bound of the per-agent imitation trait c1 ~ U[0, c1_max].
    pub c1_max: f64,
    /// Upper bound of the per-agent news trait c2 ~ U[0, c2_max].
    pub c2_max: f64,
    /// Upper bound of the per-agent private-noise trait c3 ~ U[0, c3_max].
    pub c3_max: f64,
    /// Upper bound of the per-agent conviction threshold ~ U[0, omega_max].
    pub omega_max: f64,
    /// Memory of all exponential moving averages, in [0, 1).
    pub alpha: f64,
    /// Market depth: relative price impact of net demand. Positive.
    pub lambda: f64,
    /// Fraction of cash (buy) or stock (sell) committed per trade, in (0, 1).
    pub g: f64,
    /// Cash endowment per agent.
    pub initial_cash: f64,
    /// Stock endowment per agent.
    pub initial_stocks: f64,
    /// Price at t = 0. Positive.
    pub initial_price: f64,
    /// Settlement price convention.
    pub clearing_variant: ClearingVariant,
    /// Social graph shape.
    pub topology: Topology,
    /// Root seed; every random sub-stream (traits, thresholds, news, private
    /// noise, visit permutations, topology) is derived from it.
    pub seed: u64,
    /// Number of steps to simulate.
    pub n_steps: usize,
    /// Lower bound for the volatility estimate used to normalize returns.
    pub sigma_floor: f64,
    /// Steps dropped before statistics are computed. Must be < n_steps.
    pub burn_in: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_agents: 2500,
            c1_max: 1.0,
            c2_max: 1.0,
            c3_max: 1.0,
            omega_max: 2.0,
            alpha: 0.95,
            lambda: 0.25,
            g: 0.02,
            initial_cash: 1.0,
            initial_stocks: 1.0,
            initial_price: 1.0,
            clearing_variant: ClearingVariant::PriceBeforeTrade,
            topology: Topology::Lattice4,
            seed: 42,
            n_steps: 10_000,
            sigma_floor: 1e-8,
            burn_in: 200,
        }
    }
}

impl ModelParams {
    /// Rejects non-finite, out-of-range, or mutually inconsistent values.
    /// The error names the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn finite(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be finite, got {v}")))
            }
        }
        for (field, v) in [
            ("c1_max", self.c1_max),
            ("c2_max", self.c2_max),
            ("c3_max", self.c3_max),
            ("omega_max", self.omega_max),
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("g", self.g),
            ("initial_cash", self.initial_cash),
            ("initial_stocks", self.initial_stocks),
            ("initial_price", self.initial_price),
            ("sigma_floor", self.sigma_floor),
        ] {
            finite(field, v)?;
        }
        if self.n_agents < 2 {
            return Err(ConfigError::invalid("n_agents", "need at least 2 agents"));
        }
        self.topology.check(self.n_agents)?;
        for (field, v) in [
            ("c1_max", self.c1_max),
            ("c2_max", self.c2_max),
            ("c3_max", self.c3_max),
            ("omega_max", self.omega_max),
        ] {
            if v < 0.0 {
                return Err(ConfigError::invalid(field, format!("must be >= 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ConfigError::invalid(
                "alpha",
                format!("must lie in [0, 1), got {}", self.alpha),
            ));
        }
        if self.lambda <= 0.0 {
            return Err(ConfigError::invalid(
                "lambda",
                format!("must be > 0, got {}", self.lambda),
            ));
        }
        if self.g <= 0.0 || self.g >= 1.0 {
            return Err(ConfigError::invalid("g", format!("must lie in (0, 1), got {}", self.g)));
        }
        if self.initial_cash < 0.0 {
            return Err(ConfigError::invalid(
                "initial_cash",
                format!("must be >= 0, got {}", self.initial_cash),
            ));
        }
        if self.initial_stocks < 0.0 {
            return Err(ConfigError::invalid(
                "initial_stocks",
                format!("must be >= 0, got {}", self.initial_stocks),
            ));
        }
        if self.initial_price <= 0.0 {
            return Err(ConfigError::invalid(
                "initial_price",
                format!("must be > 0, got {}", self.initial_price),
            ));
        }
        if self.sigma_floor <= 0.0 {
            return Err(ConfigError::invalid(
                "sigma_floor",
                format!("must be > 0, got {}", self.sigma_floor),
            ));
        }
        if self.n_steps == 0 {
            return Err(ConfigError::invalid("n_steps", "must be >= 1"));
        }
        if self.burn_in >= self.n_steps {
            return Err(ConfigError::invalid(
                "burn_in",
                format!("must be < n_steps ({} >= {})", self.burn_in, self.n_steps),
            ));
        }
        Ok(())
    }
}
