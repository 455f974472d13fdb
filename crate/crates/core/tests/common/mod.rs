//! Brute-force reference market for the oracle tests.
//!
//! Deliberately naive: adjacency lists of Vecs, fresh allocations every step,
//! every rule written out longhand. It shares no step code with the
//! optimized pipeline, so any shortcut the pipeline takes incorrectly shows
//! up as a divergence.

use marketsim::news::NewsSpec;
use marketsim::params::{ClearingVariant, ModelParams, Topology};
use marketsim::sim::{Simulation, StepRecord};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

pub struct RefMarket {
    alpha: f64,
    lambda: f64,
    g: f64,
    sigma_floor: f64,
    variant: ClearingVariant,
    neighbors: Vec<Vec<usize>>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    c3: Vec<f64>,
    threshold: Vec<f64>,
    pub cash: Vec<f64>,
    pub stocks: Vec<f64>,
    pub trust: Vec<Vec<f64>>,
    /// Neighbor actions polled during the previous step, per agent.
    polled: Vec<Vec<f64>>,
    pub decision: Vec<f64>,
    pub log_price: f64,
    news_prev: f64,
    pub u: f64,
    pub mean_r: f64,
    pub sigma_r: f64,
    last_return: f64,
    t: usize,
    pub caps: u64,
}

impl RefMarket {
    /// Copies the complete current state out of a simulation.
    pub fn from_simulation(sim: &Simulation) -> Self {
        let params = sim.params();
        let n = params.n_agents;
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| sim.network().neighbors(i).iter().map(|&j| j as usize).collect())
            .collect();
        let agents = sim.agents();
        let state = sim.state();
        RefMarket {
            alpha: params.alpha,
            lambda: params.lambda,
            g: params.g,
            sigma_floor: params.sigma_floor,
            variant: params.clearing_variant,
            neighbors,
            c1: agents.iter().map(|a| a.c1).collect(),
            c2: agents.iter().map(|a| a.c2).collect(),
            c3: agents.iter().map(|a| a.c3).collect(),
            threshold: agents.iter().map(|a| a.threshold).collect(),
            cash: agents.iter().map(|a| a.cash).collect(),
            stocks: agents.iter().map(|a| a.stocks).collect(),
            trust: agents.iter().map(|a| a.trust.clone()).collect(),
            polled: agents.iter().map(|a| a.perceived.clone()).collect(),
            decision: agents.iter().map(|a| a.last_decision).collect(),
            log_price: state.log_price,
            news_prev: state.news,
            u: state.u,
            mean_r: state.mean_r,
            sigma_r: state.sigma_r,
            last_return: state.last_return,
            t: state.t,
            caps: 0,
        }
    }

    /// One step with explicit news, noise, and visit order.
    pub fn step(&mut self, news_now: f64, eps: &[f64], order: &[usize]) -> StepRecord {
        let n = self.neighbors.len();
        let price_before = self.log_price.exp();
        let u_at_entry = self.u;

        // decisions, visiting agents in the given order; each agent sees the
        // decisions their neighbors hold at this moment (earlier visits show
        // this step, later ones the previous step)
        let mut polled_now: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut orders: Vec<(usize, f64, f64)> = Vec::new();
        for &i in order {
            let poll: Vec<f64> = self.neighbors[i].iter().map(|&j| self.decision[j]).collect();
            let mut social = 0.0;
            for (slot, s) in poll.iter().enumerate() {
                social += self.trust[i][slot] * s;
            }
            let opinion =
                self.c1[i] * social + self.c2[i] * u_at_entry * news_now + self.c3[i] * eps[i];
            let mut decided = 0.0;
            if opinion > self.threshold[i] {
                let volume = self.g * self.cash[i] / price_before;
                if volume > 0.0 {
                    orders.push((i, 1.0, volume));
                    decided = 1.0;
                }
            } else if opinion < -self.threshold[i] {
                let volume = self.g * self.stocks[i];
                if volume > 0.0 {
                    orders.push((i, -1.0, volume));
                    decided = -1.0;
                }
            }
            self.decision[i] = decided;
            polled_now[i] = poll;
        }

        // clearing: net signed volume moves the log price
        let mut net = 0.0;
        for &(_, direction, volume) in &orders {
            net += direction * volume;
        }
        let r = net / (self.lambda * n as f64);
        self.log_price += r;
        let price_after = self.log_price.exp();

        // settlement, capped so cash never goes negative
        let settle_price = match self.variant {
            ClearingVariant::PriceBeforeTrade => price_after,
            ClearingVariant::PriceAfterTrade => price_before,
        };
        for &(i, direction, volume) in &orders {
            if direction > 0.0 {
                let cost = volume * settle_price;
                if cost > self.cash[i] {
                    let executed = self.cash[i] / settle_price;
                    self.cash[i] = 0.0;
                    self.stocks[i] += executed;
                    self.caps += 1;
                } else {
                    self.cash[i] -= cost;
                    self.stocks[i] += volume;
                }
            } else {
                self.cash[i] += volume * settle_price;
                self.stocks[i] -= volume;
            }
        }

        // volatility EMA advances on the previous return, mean first
        self.mean_r = self.alpha * self.mean_r + (1.0 - self.alpha) * self.last_return;
        let dev = self.last_return - self.mean_r;
        let var = self.alpha * self.sigma_r * self.sigma_r + (1.0 - self.alpha) * dev * dev;
        self.sigma_r = var.sqrt().max(self.sigma_floor);

        // reinforcement: this step's realized return grades the predictions
        // made one step earlier
        self.u = self.alpha * u_at_entry + (1.0 - self.alpha) * self.news_prev * r / self.sigma_r;
        let mut trust_sum = 0.0;
        let mut slots = 0usize;
        for i in 0..n {
            for slot in 0..self.trust[i].len() {
                self.trust[i][slot] = self.alpha * self.trust[i][slot]
                    + (1.0 - self.alpha) * self.polled[i][slot] * (r / self.sigma_r);
                trust_sum += self.trust[i][slot];
                slots += 1;
            }
        }
        self.polled = polled_now;

        let record = StepRecord {
            t: self.t,
            price: price_after,
            log_price: self.log_price,
            ret: r,
            news: news_now,
            u: self.u,
            mean_k: if slots == 0 { 0.0 } else { trust_sum / slots as f64 },
            activity: orders.len() as f64 / n as f64,
            total_cash: self.cash.iter().sum(),
            total_stocks: self.stocks.iter().sum(),
        };
        self.news_prev = news_now;
        self.last_return = r;
        self.t += 1;
        record
    }
}

fn approx(a: f64, b: f64) -> bool {
    if a == b || (a.is_nan() && b.is_nan()) {
        return true; // covers identical infinities and saturated states
    }
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn compare_records(case: usize, step: usize, got: &StepRecord, want: &StepRecord) -> Result<(), String> {
    if got.t != want.t {
        return Err(format!("case {case} step {step}: t {} vs {}", got.t, want.t));
    }
    let fields = [
        ("price", got.price, want.price),
        ("log_price", got.log_price, want.log_price),
        ("return", got.ret, want.ret),
        ("news", got.news, want.news),
        ("u", got.u, want.u),
        ("mean_k", got.mean_k, want.mean_k),
        ("activity", got.activity, want.activity),
        ("total_cash", got.total_cash, want.total_cash),
        ("total_stocks", got.total_stocks, want.total_stocks),
    ];
    for (name, a, b) in fields {
        if !approx(a, b) {
            return Err(format!("case {case} step {step} {name}: {a} vs {b}"));
        }
    }
    Ok(())
}

fn compare_state(case: usize, sim: &Simulation, reference: &RefMarket) -> Result<(), String> {
    for (i, agent) in sim.agents().iter().enumerate() {
        if !approx(agent.cash, reference.cash[i]) {
            return Err(format!("case {case} agent {i} cash: {} vs {}", agent.cash, reference.cash[i]));
        }
        if !approx(agent.stocks, reference.stocks[i]) {
            return Err(format!(
                "case {case} agent {i} stocks: {} vs {}",
                agent.stocks, reference.stocks[i]
            ));
        }
        if agent.last_decision != reference.decision[i] {
            return Err(format!(
                "case {case} agent {i} decision: {} vs {}",
                agent.last_decision, reference.decision[i]
            ));
        }
        for (slot, &k) in agent.trust.iter().enumerate() {
            if !approx(k, reference.trust[i][slot]) {
                return Err(format!(
                    "case {case} agent {i} trust[{slot}]: {k} vs {}",
                    reference.trust[i][slot]
                ));
            }
        }
    }
    let state = sim.state();
    let fields = [
        ("log_price", state.log_price, reference.log_price),
        ("u", state.u, reference.u),
        ("mean_r", state.mean_r, reference.mean_r),
        ("sigma_r", state.sigma_r, reference.sigma_r),
    ];
    for (name, a, b) in fields {
        if !approx(a, b) {
            return Err(format!("case {case} state {name}: {a} vs {b}"));
        }
    }
    if sim.cap_events() != reference.caps {
        return Err(format!("case {case} caps: {} vs {}", sim.cap_events(), reference.caps));
    }
    Ok(())
}

/// Builds `n_cases` randomized small markets, steps each `n_steps` times with
/// shared random inputs, and compares the pipeline against the reference on
/// every record field and the full post-run state.
pub fn run_oracle(n_cases: usize, n_steps: usize, meta_seed: u64) -> Result<(), String> {
    let mut rng = ChaCha12Rng::seed_from_u64(meta_seed);
    for case in 0..n_cases {
        let topology = match case % 3 {
            0 => Topology::Lattice4,
            1 => Topology::Complete,
            _ => Topology::Random,
        };
        let params = ModelParams {
            n_agents: 16,
            c1_max: rng.gen::<f64>() * 5.0,
            c2_max: rng.gen::<f64>() * 2.0,
            c3_max: rng.gen::<f64>() * 3.0,
            omega_max: 0.05 + rng.gen::<f64>() * 2.0,
            alpha: rng.gen::<f64>() * 0.99,
            lambda: 0.2 + rng.gen::<f64>() * 0.8,
            g: 0.01 + rng.gen::<f64>() * 0.89,
            initial_cash: 0.5 + rng.gen::<f64>(),
            initial_stocks: 0.5 + rng.gen::<f64>(),
            initial_price: 0.25 + rng.gen::<f64>() * 3.75,
            clearing_variant: if case % 2 == 0 {
                ClearingVariant::PriceBeforeTrade
            } else {
                ClearingVariant::PriceAfterTrade
            },
            topology,
            seed: 1000 + case as u64,
            n_steps,
            sigma_floor: if case % 5 == 0 { 0.05 } else { 1e-8 },
            burn_in: 0,
        };
        let mut sim = Simulation::new(&params, &NewsSpec::Gaussian)
            .map_err(|e| format!("case {case}: {e}"))?;
        let mut reference = RefMarket::from_simulation(&sim);
        for step in 0..n_steps {
            // occasional exact +-1 news alongside gaussian draws
            let news = if rng.gen::<f64>() < 0.25 {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.sample(rand_distr::StandardNormal)
            };
            let eps: Vec<f64> =
                (0..16).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let mut order: Vec<usize> = (0..16).collect();
            order.shuffle(&mut rng);
            let got = sim.step_with_inputs(news, &eps, &order);
            let want = reference.step(news, &eps, &order);
            compare_records(case, step, &got, &want)?;
            if !got.price.is_finite() {
                // hot parameter corners can saturate the price; both sides
                // agreed up to and including the blow-up, and stepping a
                // saturated state further compares garbage with garbage
                break;
            }
        }
        compare_state(case, &sim, &reference)?;
    }
    Ok(())
}
