//! Market-wide state: price formation and the adaptive averages.
//!
//! The market maker applies linear impact in log-price: the step return is
//! the net signed order volume divided by lambda * N. Returns are tracked by
//! exponential moving averages of their mean and variance; the resulting
//! volatility estimate normalizes the reinforcement signal that drives both
//! the public news weight u and the per-edge trust weights.

use crate::agent::Order;

/// Initial volatility estimate before any return has been observed.
pub const SIGMA_R_INIT: f64 = 0.1;

/// Aggregate state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    /// Completed steps.
    pub t: usize,
    pub price: f64,
    pub log_price: f64,
    /// Return of the last completed step; feeds the volatility update of the
    /// next step.
    pub last_return: f64,
    /// News of the last completed step; read by the news-weight update of the
    /// next step.
    pub news: f64,
    /// News one step before that (kept for inspection).
    pub prev_news: f64,
    /// Collective news weight u.
    pub u: f64,
    /// EMA of past returns.
    pub mean_r: f64,
    /// EMA volatility estimate, floored at sigma_floor.
    pub sigma_r: f64,
}

impl MarketState {
    pub fn new(initial_price: f64) -> Self {
        MarketState {
            t: 0,
            price: initial_price,
            log_price: initial_price.ln(),
            last_return: 0.0,
            news: 0.0,
            prev_news: 0.0,
            u: 0.0,
            mean_r: 0.0,
            sigma_r: SIGMA_R_INIT,
        }
    }
}

/// Clears the submitted orders: returns r = net signed volume / (lambda * n)
/// and moves the log price by it. `price` is kept consistent with
/// `exp(log_price)`.
pub fn clear_price(orders: &[Order], lambda: f64, n_agents: usize, state: &mut MarketState) -> f64 {
    let net: f64 = orders.iter().map(|o| o.direction * o.volume).sum();
    let r = net / (lambda * n_agents as f64);
    state.log_price += r;
    state.price = state.log_price.exp();
    r
}

/// Advances the return EMAs by one step using the return of the previous
/// step, mean first, then variance against the updated mean. The volatility
/// estimate never drops below `sigma_floor`.
pub fn update_volatility(state: &mut MarketState, alpha: f64, sigma_floor: f64) {
    let r_prev = state.last_return;
    state.mean_r = alpha * state.mean_r + (1.0 - alpha) * r_prev;
    let dev = r_prev - state.mean_r;
    let var = alpha * state.sigma_r * state.sigma_r + (1.0 - alpha) * dev * dev;
    state.sigma_r = var.sqrt().max(sigma_floor);
}

/// One EMA update of the collective news weight from the news of the previous
/// step and the normalized return it preceded.
pub fn update_news_weight(u_prev: f64, alpha: f64, news_prev: f64, r: f64, sigma_r: f64) -> f64 {
    alpha * u_prev + (1.0 - alpha) * news_prev * r / sigma_r
}
