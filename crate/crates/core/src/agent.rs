//! Agents: traits, balances, opinion formation, trade decisions, settlement.
//!
//! Each step an agent aggregates three information channels into a scalar
//! opinion
//!
//!   omega_i = c1 * sum_j trust_ij * E_i[s_j]  +  c2 * u * news  +  c3 * eps_i
//!
//! and trades only when conviction exceeds its personal threshold: above
//! +threshold it commits the fraction g of its cash at the previous price,
//! below -threshold it offers the fraction g of its stock. Everything else is
//! passivity, which neighbors observe as 0.

/// One market participant.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    /// Imitation trait: weight on the trust-weighted neighbor poll.
    pub c1: f64,
    /// News trait: weight on (news weight u) x (news value).
    pub c2: f64,
    /// Private-information trait: weight on the agent's own gaussian draw.
    pub c3: f64,
    /// Conviction threshold; opinions inside [-threshold, +threshold] stay passive.
    pub threshold: f64,
    pub cash: f64,
    pub stocks: f64,
    /// Adaptive trust per neighbor, aligned with the network adjacency order.
    pub trust: Vec<f64>,
    /// Neighbor actions the agent perceived when it last formed an opinion;
    /// consumed by the trust update one step later.
    pub perceived: Vec<f64>,
    /// Most recent decision: -1 sold, 0 passive, +1 bought.
    pub last_decision: f64,
}

/// A cleared-market order: `direction` is +1 (buy) or -1 (sell), `volume` the
/// number of shares, always positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    pub agent: u32,
    pub direction: f64,
    pub volume: f64,
}

/// Scalar opinion from the three channels. `perceived` must be aligned with
/// `agent.trust`; `u_prev` is the news weight left by the previous step.
pub fn form_opinion(agent: &Agent, perceived: &[f64], u_prev: f64, news: f64, eps: f64) -> f64 {
    debug_assert_eq!(agent.trust.len(), perceived.len());
    let social: f64 = agent.trust.iter().zip(perceived).map(|(k, e)| k * e).sum();
    agent.c1 * social + agent.c2 * u_prev * news + agent.c3 * eps
}

/// Maps an opinion to a trade. Returns `(direction, volume)` or `None` for
/// passivity. Threshold comparisons are strict; a candidate with zero volume
/// (no cash to buy with, no stock to sell) is passivity, not an order.
pub fn decide_trade(agent: &Agent, omega: f64, prev_price: f64, g: f64) -> Option<(f64, f64)> {
    if omega > agent.threshold {
        let volume = g * agent.cash / prev_price;
        (volume > 0.0).then_some((1.0, volume))
    } else if omega < -agent.threshold {
        let volume = g * agent.stocks;
        (volume > 0.0).then_some((-1.0, volume))
    } else {
        None
    }
}

/// Settles one executed order at `price`, keeping the agent solvent.
///
/// A buy whose cost would exceed the remaining cash (possible when the price
/// jumped by more than 1/g during clearing) is scaled down so the cash lands
/// at exactly zero. Returns `(executed_volume, capped)`.
pub fn settle(agent: &mut Agent, direction: f64, volume: f64, price: f64) -> (f64, bool) {
    if direction > 0.0 {
        let cost = volume * price;
        if cost > agent.cash {
            let executed = agent.cash / price;
            agent.stocks += executed;
            agent.cash = 0.0;
            (executed, true)
        } else {
            agent.cash -= cost;
            agent.stocks += volume;
            (volume, false)
        }
    } else {
        agent.stocks -= volume;
        agent.cash += volume * price;
        (volume, false)
    }
}

/// One exponential-moving-average update of a trust weight from the
/// normalized return and the neighbor action perceived one step earlier.
pub fn update_trust(k: f64, alpha: f64, perceived: f64, r_over_sigma: f64) -> f64 {
    alpha * k + (1.0 - alpha) * perceived * r_over_sigma
}
