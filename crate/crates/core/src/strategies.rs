//! Client evaluation policies and the per-client statistics they learn from.
//!
//! All four policies plug into [`crate::scheduling::greedy_select`]:
//!
//! * naive FedCS scores `-T_inc` on the times each client last reported
//!   (zero before its first participation);
//! * extended FedCS does the same on a moving average of recent observations;
//! * the naive bandit scores `-mean(T_inc)/alpha` plus a UCB bonus;
//! * the element-wise bandit subtracts the bonus from the scaled mean update
//!   and upload times separately and scores `-T_inc` on those values.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduling::{t_inc, TimePair};
use crate::ClientId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    NaiveFedcs,
    ExtendedFedcs,
    NaiveMab,
    ElementwiseMab,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::NaiveFedcs,
        StrategyKind::ExtendedFedcs,
        StrategyKind::NaiveMab,
        StrategyKind::ElementwiseMab,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::NaiveFedcs => "naive_fedcs",
            StrategyKind::ExtendedFedcs => "extended_fedcs",
            StrategyKind::NaiveMab => "naive_mab",
            StrategyKind::ElementwiseMab => "elementwise_mab",
        }
    }

    pub fn is_bandit(&self) -> bool {
        matches!(self, StrategyKind::NaiveMab | StrategyKind::ElementwiseMab)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
                Error::Usage(format!(
                    "unknown strategy `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub alpha: f64,
    pub beta: f64,
    pub window: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::NaiveFedcs,
            alpha: 1000.0,
            beta: 50.0,
            window: 5,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config("beta", format!("must be positive, got {}", self.beta)));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be at least 1"));
        }
        Ok(())
    }
}

/// What the server knows about one client.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClientStats {
    pub n_selected: u64,
    sum_t_inc_s: f64,
    sum_update_s: f64,
    sum_upload_s: f64,
    /// Most recent observations, oldest first.
    pub window: VecDeque<TimePair>,
    /// Times of the latest participation; zero before the first one.
    pub reported: TimePair,
}

impl ClientStats {
    fn mean(&self, sum: f64) -> f64 {
        if self.n_selected == 0 {
            0.0
        } else {
            sum / self.n_selected as f64
        }
    }

    pub fn mean_t_inc_s(&self) -> f64 {
        self.mean(self.sum_t_inc_s)
    }

    pub fn mean_update_s(&self) -> f64 {
        self.mean(self.sum_update_s)
    }

    pub fn mean_upload_s(&self) -> f64 {
        self.mean(self.sum_upload_s)
    }

    /// Moving average over the window; zero when nothing was observed.
    pub fn window_mean(&self) -> TimePair {
        if self.window.is_empty() {
            return TimePair::ZERO;
        }
        let n = self.window.len() as f64;
        let (d, u) = self
            .window
            .iter()
            .fold((0.0, 0.0), |(d, u), p| (d + p.update_s, u + p.upload_s));
        TimePair::new(d / n, u / n)
    }
}

/// One selected client's outcome in a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub client_id: ClientId,
    pub times: TimePair,
    /// Realized increment of the round time at the client's position.
    pub t_inc_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyState {
    clients: Vec<ClientStats>,
    window: usize,
    total_selected: u64,
}

impl StrategyState {
    pub fn new(clients: usize, window: usize) -> Self {
        Self {
            clients: vec![ClientStats::default(); clients],
            window,
            total_selected: 0,
        }
    }

    pub fn client(&self, k: ClientId) -> &ClientStats {
        &self.clients[k]
    }

    pub fn clients(&self) -> &[ClientStats] {
        &self.clients
    }

    /// Sum of selection counts over all clients.
    pub fn total_selected(&self) -> u64 {
        self.total_selected
    }

    pub fn bonus(&self, k: ClientId) -> f64 {
        ucb_bonus(self.clients[k].n_selected, self.total_selected)
    }

    /// Records the outcome of a round for the clients that took part.
    pub fn update_stats(&mut self, observations: &[Observation]) -> Result<()> {
        let mut seen = HashSet::with_capacity(observations.len());
        for o in observations {
            if o.client_id >= self.clients.len() {
                return Err(Error::Internal(format!("unknown client {}", o.client_id)));
            }
            if !seen.insert(o.client_id) {
                return Err(Error::Internal(format!(
                    "client {} observed twice in one round",
                    o.client_id
                )));
            }
        }
        for o in observations {
            let c = &mut self.clients[o.client_id];
            c.n_selected += 1;
            c.sum_t_inc_s += o.t_inc_s;
            c.sum_update_s += o.times.update_s;
            c.sum_upload_s += o.times.upload_s;
            c.window.push_back(o.times);
            while c.window.len() > self.window {
                c.window.pop_front();
            }
            c.reported = o.times;
        }
        self.total_selected += observations.len() as u64;
        Ok(())
    }
}

/// UCB exploration bonus `sqrt(ln(n_total) / (2 n_k))`, infinite for an
/// arm that was never played.
pub fn ucb_bonus(n_k: u64, n_total: u64) -> f64 {
    if n_k == 0 {
        return f64::INFINITY;
    }
    ((n_total as f64).ln() / (2.0 * n_k as f64)).sqrt()
}

fn neg_t_inc_on(
    selected: &[ClientId],
    t: f64,
    k: ClientId,
    times: impl Fn(ClientId) -> TimePair,
) -> f64 {
    let sel: Vec<TimePair> = selected.iter().map(|&i| times(i)).collect();
    -t_inc(&sel, t, times(k))
}

pub fn score_naive_fedcs(state: &StrategyState, selected: &[ClientId], t: f64, k: ClientId) -> f64 {
    neg_t_inc_on(selected, t, k, |i| state.client(i).reported)
}

pub fn score_extended_fedcs(state: &StrategyState, selected: &[ClientId], t: f64, k: ClientId) -> f64 {
    neg_t_inc_on(selected, t, k, |i| state.client(i).window_mean())
}

pub fn score_naive_mab(state: &StrategyState, _selected: &[ClientId], _t: f64, k: ClientId, alpha: f64) -> f64 {
    let c = state.client(k);
    if c.n_selected == 0 {
        return f64::INFINITY;
    }
    -c.mean_t_inc_s() / alpha + state.bonus(k)
}

/// Scaled means minus the bonus.
///
/// A client that was never selected has no means; it contributes zero
/// times while it sits in the selection, and its own score is infinite.
pub fn elementwise_tau(state: &StrategyState, k: ClientId, beta: f64) -> TimePair {
    let c = state.client(k);
    if c.n_selected == 0 {
        return TimePair::ZERO;
    }
    let b = state.bonus(k);
    TimePair::new(c.mean_update_s() / beta - b, c.mean_upload_s() / beta - b)
}

pub fn score_elementwise_mab(
    state: &StrategyState,
    selected: &[ClientId],
    t: f64,
    k: ClientId,
    beta: f64,
) -> f64 {
    if state.client(k).n_selected == 0 {
        return f64::INFINITY;
    }
    neg_t_inc_on(selected, t, k, |i| elementwise_tau(state, i, beta))
}

impl StrategyConfig {
    /// Times the greedy loop accumulates into `t` for client `k`.
    pub fn estimate(&self, state: &StrategyState, k: ClientId) -> TimePair {
        match self.kind {
            StrategyKind::NaiveFedcs | StrategyKind::NaiveMab => state.client(k).reported,
            StrategyKind::ExtendedFedcs => state.client(k).window_mean(),
            StrategyKind::ElementwiseMab => elementwise_tau(state, k, self.beta),
        }
    }

    pub fn score(&self, state: &StrategyState, selected: &[ClientId], t: f64, k: ClientId) -> f64 {
        match self.kind {
            StrategyKind::NaiveFedcs => score_naive_fedcs(state, selected, t, k),
            StrategyKind::ExtendedFedcs => score_extended_fedcs(state, selected, t, k),
            StrategyKind::NaiveMab => score_naive_mab(state, selected, t, k, self.alpha),
            StrategyKind::ElementwiseMab => score_elementwise_mab(state, selected, t, k, self.beta),
        }
    }
}
