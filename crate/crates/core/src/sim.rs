//! The simulation loop.
//!
//! One step, in order:
//!
//! 1. Draw the step's news value and every agent's private noise.
//! 2. Visit all agents in a fresh random permutation. Each agent polls its
//!    neighbors' most recent decisions (agents visited earlier this step show
//!    this step's decision, the rest show last step's), forms an opinion with
//!    the news weight u left by the previous step, and possibly places an
//!    order. The polled actions are staged for the trust update of the next
//!    step.
//! 3. Clear all orders at once: the net signed volume moves the log price.
//! 4. Settle orders at the post-clearing price (or the pre-clearing price in
//!    the `PriceAfterTrade` variant), capping buys so cash never goes
//!    negative.
//! 5. Adapt: advance the return EMAs with the previous step's return, then
//!    update the news weight u and every trust weight with this step's
//!    return, normalized by the freshly updated volatility. Both updates
//!    reinforce predictions made one step earlier, so they consume the news
//!    and the staged neighbor actions of the previous step.
//! 6. Emit a `StepRecord`.
//!
//! All randomness comes from named sub-streams of the root seed (see
//! `streams`), making runs bit-reproducible.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::agent::{decide_trade, form_opinion, settle, update_trust, Agent, Order};
use crate::config::ConfigError;
use crate::market::{clear_price, update_news_weight, update_volatility, MarketState};
use crate::network::SocialNetwork;
use crate::news::{NewsSource, NewsSpec};
use crate::params::{ClearingVariant, ModelParams};
use crate::streams::{
    substream, STREAM_NEWS, STREAM_NOISE, STREAM_PERMUTATION, STREAM_THRESHOLDS, STREAM_TOPOLOGY,
    STREAM_TRAITS,
};

/// Observables of one completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub price: f64,
    pub log_price: f64,
    /// Log-price increment of this step.
    pub ret: f64,
    /// News value the agents saw this step.
    pub news: f64,
    /// News weight after this step's update.
    pub u: f64,
    /// Mean trust weight over all directed edges, after this step's update.
    pub mean_k: f64,
    /// Fraction of agents that placed an order.
    pub activity: f64,
    pub total_cash: f64,
    pub total_stocks: f64,
}

/// A full market: population, social graph, market state, and the random
/// streams that drive them.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    network: SocialNetwork,
    agents: Vec<Agent>,
    state: MarketState,
    news: NewsSource,
    noise_rng: ChaCha12Rng,
    perm_rng: ChaCha12Rng,
    perm: Vec<usize>,
    eps: Vec<f64>,
    /// Neighbor actions staged during the decision phase, CSR-aligned;
    /// becomes each agent's `perceived` after the trust update.
    staged: Vec<f64>,
    orders: Vec<Order>,
    cap_events: u64,
}

impl Simulation {
    /// Builds a fresh market: traits and thresholds drawn uniformly from
    /// their bounds, trust and news weight at zero, everyone passive, equal
    /// endowments.
    pub fn new(params: &ModelParams, news_spec: &NewsSpec) -> Result<Self, ConfigError> {
        params.validate()?;
        let n = params.n_agents;
        let mut topo_rng = substream(params.seed, STREAM_TOPOLOGY);
        let network = SocialNetwork::build(params.topology, n, &mut topo_rng)?;
        let mut trait_rng = substream(params.seed, STREAM_TRAITS);
        let mut threshold_rng = substream(params.seed, STREAM_THRESHOLDS);
        let agents = (0..n)
            .map(|i| {
                let c1 = trait_rng.gen::<f64>() * params.c1_max;
                let c2 = trait_rng.gen::<f64>() * params.c2_max;
                let c3 = trait_rng.gen::<f64>() * params.c3_max;
                let threshold = threshold_rng.gen::<f64>() * params.omega_max;
                let degree = network.degree(i);
                Agent {
                    c1,
                    c2,
                    c3,
                    threshold,
                    cash: params.initial_cash,
                    stocks: params.initial_stocks,
                    trust: vec![0.0; degree],
                    perceived: vec![0.0; degree],
                    last_decision: 0.0,
                }
            })
            .collect();
        let news = NewsSource::from_spec(news_spec, substream(params.seed, STREAM_NEWS))?;
        let state = MarketState::new(params.initial_price);
        Ok(Self::assemble(params.clone(), network, agents, state, news))
    }

    /// Assembles a simulation from explicit parts (warm restarts, reference
    /// tests). Agent vectors must be aligned with the network adjacency.
    pub fn from_parts(
        params: ModelParams,
        network: SocialNetwork,
        agents: Vec<Agent>,
        state: MarketState,
        news: NewsSource,
    ) -> Result<Self, ConfigError> {
        params.validate()?;
        if network.node_count() != params.n_agents || agents.len() != params.n_agents {
            return Err(ConfigError::invalid(
                "n_agents",
                format!(
                    "inconsistent sizes: params {}, network {}, agents {}",
                    params.n_agents,
                    network.node_count(),
                    agents.len()
                ),
            ));
        }
        for (i, a) in agents.iter().enumerate() {
            if a.trust.len() != network.degree(i) || a.perceived.len() != network.degree(i) {
                return Err(ConfigError::invalid(
                    "n_agents",
                    format!("agent {i} trust/perceived length does not match its degree"),
                ));
            }
        }
        Ok(Self::assemble(params, network, agents, state, news))
    }

    fn assemble(
        params: ModelParams,
        network: SocialNetwork,
        agents: Vec<Agent>,
        state: MarketState,
        news: NewsSource,
    ) -> Self {
        let n = params.n_agents;
        let noise_rng = substream(params.seed, STREAM_NOISE);
        let perm_rng = substream(params.seed, STREAM_PERMUTATION);
        let staged = vec![0.0; network.edge_slots()];
        Simulation {
            params,
            network,
            agents,
            state,
            news,
            noise_rng,
            perm_rng,
            perm: (0..n).collect(),
            eps: vec![0.0; n],
            staged,
            orders: Vec::with_capacity(n),
            cap_events: 0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn network(&self) -> &SocialNetwork {
        &self.network
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    /// Number of buys shrunk by the solvency cap so far.
    pub fn cap_events(&self) -> u64 {
        self.cap_events
    }

    /// Advances one step, drawing news, noise, and the visit permutation from
    /// their streams.
    pub fn step(&mut self) -> StepRecord {
        let news_now = self.news.next_news(self.state.t);
        for e in self.eps.iter_mut() {
            *e = self.noise_rng.sample(StandardNormal);
        }
        for (i, p) in self.perm.iter_mut().enumerate() {
            *p = i;
        }
        self.perm.shuffle(&mut self.perm_rng);
        self.advance(news_now)
    }

    /// Advances one step with externally supplied randomness: `order` must be
    /// a permutation of 0..n_agents and `eps` one draw per agent. The internal
    /// news/noise/permutation streams are not consumed. Intended for
    /// replaying scripted inputs and for reference tests.
    pub fn step_with_inputs(&mut self, news_now: f64, eps: &[f64], order: &[usize]) -> StepRecord {
        assert_eq!(eps.len(), self.params.n_agents, "one noise draw per agent");
        assert_eq!(order.len(), self.params.n_agents, "visit order must cover all agents");
        self.eps.copy_from_slice(eps);
        self.perm.copy_from_slice(order);
        self.advance(news_now)
    }

    /// Runs `n_steps` further steps and collects their records.
    pub fn run(&mut self) -> Vec<StepRecord> {
        let mut records = Vec::with_capacity(self.params.n_steps);
        for _ in 0..self.params.n_steps {
            records.push(self.step());
        }
        records
    }

    fn advance(&mut self, news_now: f64) -> StepRecord {
        let n = self.params.n_agents;
        let t = self.state.t;
        let prev_price = self.state.price;
        let u_prev = self.state.u;

        // Decision phase, in visit order.
        self.orders.clear();
        for idx in 0..n {
            let i = self.perm[idx];
            let off = self.network.offset(i);
            let degree = self.network.degree(i);
            for (slot, &j) in self.network.neighbors(i).iter().enumerate() {
                self.staged[off + slot] = self.agents[j as usize].last_decision;
            }
            let a = &self.agents[i];
            let omega =
                form_opinion(a, &self.staged[off..off + degree], u_prev, news_now, self.eps[i]);
            let decision = match decide_trade(a, omega, prev_price, self.params.g) {
                Some((direction, volume)) => {
                    self.orders.push(Order { agent: i as u32, direction, volume });
                    direction
                }
                None => 0.0,
            };
            self.agents[i].last_decision = decision;
        }

        // Clearing and settlement.
        let r = clear_price(&self.orders, self.params.lambda, n, &mut self.state);
        let settlement_price = match self.params.clearing_variant {
            ClearingVariant::PriceBeforeTrade => self.state.price,
            ClearingVariant::PriceAfterTrade => prev_price,
        };
        for o in &self.orders {
            let (_, capped) =
                settle(&mut self.agents[o.agent as usize], o.direction, o.volume, settlement_price);
            if capped {
                self.cap_events += 1;
            }
        }

        // Adaptation. The volatility EMA advances on the previous return
        // before this step's return is normalized by it.
        update_volatility(&mut self.state, self.params.alpha, self.params.sigma_floor);
        let r_over_sigma = r / self.state.sigma_r;
        self.state.u =
            update_news_weight(u_prev, self.params.alpha, self.state.news, r, self.state.sigma_r);
        let alpha = self.params.alpha;
        let mut trust_sum = 0.0;
        for i in 0..n {
            let off = self.network.offset(i);
            let a = &mut self.agents[i];
            for slot in 0..a.trust.len() {
                let k = update_trust(a.trust[slot], alpha, a.perceived[slot], r_over_sigma);
                a.trust[slot] = k;
                trust_sum += k;
            }
            let degree = a.perceived.len();
            a.perceived.copy_from_slice(&self.staged[off..off + degree]);
        }
        let edge_slots = self.network.edge_slots();
        let mean_k = if edge_slots == 0 { 0.0 } else { trust_sum / edge_slots as f64 };

        let mut total_cash = 0.0;
        let mut total_stocks = 0.0;
        for a in &self.agents {
            total_cash += a.cash;
            total_stocks += a.stocks;
        }

        self.state.prev_news = self.state.news;
        self.state.news = news_now;
        self.state.last_return = r;
        self.state.t = t + 1;

        StepRecord {
            t,
            price: self.state.price,
            log_price: self.state.log_price,
            ret: r,
            news: news_now,
            u: self.state.u,
            mean_k,
            activity: self.orders.len() as f64 / n as f64,
            total_cash,
            total_stocks,
        }
    }
}
