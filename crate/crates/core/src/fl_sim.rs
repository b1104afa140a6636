//! Round-by-round protocol driver.
//!
//! Each round: a random subset of clients answers the resource request with
//! the times they last reported, the strategy picks an ordered selection,
//! the environment realizes this round's resources, the round is replayed on
//! the realized times, and the selected clients' outcomes feed back into the
//! strategy state. Candidate sets and realizations depend only on the master
//! seed, the round and the client, so runs of different strategies on the
//! same seed face the same environment.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::env_model::{population_for_seed, realize_round_resources, ClientProfile, EnvConfig, ResourceRealization};
use crate::error::{Error, Result};
use crate::scheduling::{greedy_select, replay_round, TimePair};
use crate::stochastics::RngStream;
use crate::strategies::{Observation, StrategyConfig, StrategyState};
use crate::ClientId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub strategy: StrategyConfig,
    /// Fraction `C` of the population asked for resources each round.
    pub candidate_fraction: f64,
    pub s_round: usize,
    pub rounds: usize,
    pub master_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            strategy: StrategyConfig::default(),
            candidate_fraction: 0.1,
            s_round: 5,
            rounds: 500,
            master_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.strategy.validate()?;
        let c = self.candidate_fraction;
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::config("candidate_fraction", format!("must lie in (0, 1], got {c}")));
        }
        if self.s_round == 0 {
            return Err(Error::config("s_round", "must be at least 1"));
        }
        Ok(())
    }

    pub fn candidates_per_round(&self) -> usize {
        candidate_count(self.env.clients, self.candidate_fraction)
    }

    /// Non-fatal oddities worth telling the user about.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let m = self.candidates_per_round();
        if self.s_round > m {
            w.push(format!(
                "s_round = {} exceeds the {m} candidates per round; every candidate will be selected",
                self.s_round
            ));
        }
        w
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta::new(
            self.strategy.kind.name(),
            &self.env.fluctuation.label(),
            self.master_seed,
        )
    }
}

/// `ceil(K * C)`, tolerant of the rounding error in products like `0.7 * 10`.
pub fn candidate_count(clients: usize, fraction: f64) -> usize {
    let raw = (clients as f64 * fraction - 1e-9).ceil();
    (raw.max(1.0) as usize).min(clients)
}

/// Clients asked for resources in `round_index`, ascending.
pub fn sample_candidates(master_seed: u64, round_index: usize, clients: usize, fraction: f64) -> Vec<ClientId> {
    let m = candidate_count(clients, fraction);
    let mut rng = RngStream::new(master_seed, "candidates", &[round_index as u64]);
    let mut ids = index::sample(&mut rng, clients, m).into_vec();
    ids.sort_unstable();
    ids
}

/// Identifies a run in ledgers and output files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub strategy: String,
    pub eta: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn new(strategy: &str, eta: &str, seed: u64) -> Self {
        Self {
            run_id: format!("{strategy}_eta-{eta}_seed-{seed}"),
            strategy: strategy.to_owned(),
            eta: eta.to_owned(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub candidate_ids: Vec<ClientId>,
    pub ordered_selection: Vec<ClientId>,
    /// Round time predicted from the reported times for the chosen order.
    pub estimated_round_time_s: f64,
    pub actual_round_time_s: f64,
    pub cumulative_time_s: f64,
    pub observations: Vec<Observation>,
}

/// Score a candidate received at the first greedy iteration of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub round_index: usize,
    pub client_id: ClientId,
    pub score: f64,
    /// Selection count at the time of scoring.
    pub n_selected: u64,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub record: RoundRecord,
    pub scores: Vec<ScoreEntry>,
    pub realizations: Vec<ResourceRealization>,
}

/// A single run in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: RunConfig,
    profiles: Vec<ClientProfile>,
    state: StrategyState,
    cumulative_s: f64,
}

impl Simulation {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let profiles = population_for_seed(cfg.master_seed, &cfg.env)?;
        Ok(Self::with_population(cfg, profiles))
    }

    pub fn with_population(cfg: RunConfig, profiles: Vec<ClientProfile>) -> Self {
        let state = StrategyState::new(profiles.len(), cfg.strategy.window);
        Self {
            cfg,
            profiles,
            state,
            cumulative_s: 0.0,
        }
    }

    pub fn profiles(&self) -> &[ClientProfile] {
        &self.profiles
    }

    pub fn state(&self) -> &StrategyState {
        &self.state
    }

    pub fn run_round(&mut self, round_index: usize) -> Result<RoundOutcome> {
        let cfg = &self.cfg;
        let candidates = sample_candidates(
            cfg.master_seed,
            round_index,
            self.profiles.len(),
            cfg.candidate_fraction,
        );

        let state = &self.state;
        let strategy = &cfg.strategy;
        let selection = greedy_select(
            &candidates,
            cfg.s_round,
            |k| strategy.estimate(state, k),
            |s, t, k| strategy.score(state, s, t, k),
        );
        let scores = selection
            .evaluation_trace
            .first()
            .map(|it| {
                it.scores
                    .iter()
                    .map(|&(client_id, score)| ScoreEntry {
                        round_index,
                        client_id,
                        score,
                        n_selected: state.client(client_id).n_selected,
                    })
                    .collect()
            })
            .unwrap_or_default();

        let reported: Vec<TimePair> = selection
            .ordered_selection
            .iter()
            .map(|&k| state.client(k).reported)
            .collect();
        let estimated = replay_round(&reported).total_s;

        let realizations = realize_round_resources(&self.profiles, round_index, &cfg.env, cfg.master_seed)?;
        let actual: Vec<TimePair> = selection
            .ordered_selection
            .iter()
            .map(|&k| {
                let r = &realizations[k];
                TimePair::new(r.t_update_s, r.t_upload_s)
            })
            .collect();
        let replay = replay_round(&actual);

        let observations: Vec<Observation> = selection
            .ordered_selection
            .iter()
            .zip(actual.iter().zip(&replay.increments))
            .map(|(&client_id, (&times, &t_inc_s))| Observation {
                client_id,
                times,
                t_inc_s,
            })
            .collect();
        self.state.update_stats(&observations)?;
        self.cumulative_s += replay.total_s;

        Ok(RoundOutcome {
            record: RoundRecord {
                round_index,
                candidate_ids: candidates,
                ordered_selection: selection.ordered_selection,
                estimated_round_time_s: estimated,
                actual_round_time_s: replay.total_s,
                cumulative_time_s: self.cumulative_s,
                observations,
            },
            scores,
            realizations,
        })
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub meta: RunMeta,
    pub config: RunConfig,
    pub rounds: Vec<RoundRecord>,
    pub scores: Vec<ScoreEntry>,
    /// Resources of every client in every round, round-major.
    pub realizations: Vec<ResourceRealization>,
    pub final_state: StrategyState,
}

impl RunOutput {
    pub fn final_cumulative_s(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative_time_s)
    }
}

pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut scores = Vec::new();
    let mut realizations = Vec::with_capacity(cfg.rounds * cfg.env.clients);
    for r in 0..cfg.rounds {
        let out = sim.run_round(r)?;
        rounds.push(out.record);
        scores.extend(out.scores);
        realizations.extend(out.realizations);
    }
    Ok(RunOutput {
        meta: cfg.meta(),
        config: cfg.clone(),
        rounds,
        scores,
        realizations,
        final_state: sim.state,
    })
}
