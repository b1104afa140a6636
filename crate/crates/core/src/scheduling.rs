//! Round-time arithmetic and the greedy selection loop.
//!
//! A round distributes the model to every selected client (taking as long
//! as the slowest upload link), lets all clients update in parallel, then
//! collects uploads one client at a time in selection order. `t_inc` is the
//! amount one more client adds to that schedule; accumulating it over a
//! selection reproduces the makespan computed by [`event_oracle_makespan`].

use serde::{Deserialize, Serialize};

use crate::ClientId;

/// Model update and upload time of one client.
///
/// Scored variants used by the element-wise bandit may hold negative values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimePair {
    pub update_s: f64,
    pub upload_s: f64,
}

impl TimePair {
    pub const ZERO: TimePair = TimePair {
        update_s: 0.0,
        upload_s: 0.0,
    };

    pub fn new(update_s: f64, upload_s: f64) -> Self {
        Self { update_s, upload_s }
    }
}

/// Distribution time: the largest upload time in the selection, 0 if empty.
pub fn distribution_time(selected: &[TimePair]) -> f64 {
    selected
        .iter()
        .map(|p| p.upload_s)
        .reduce(f64::max)
        .unwrap_or(0.0)
}

/// Increase of the round time `t` when `candidate` joins `selected`.
pub fn t_inc(selected: &[TimePair], t: f64, candidate: TimePair) -> f64 {
    let td = selected.iter().map(|p| p.upload_s).reduce(f64::max);
    t_inc_from_max_upload(td, t, candidate)
}

/// [`t_inc`] given the largest upload time of the current selection
/// (`None` for an empty selection).
///
/// The empty selection has distribution time 0, yet the first client's own
/// upload time becomes the new maximum even when it is negative, which is
/// why the empty case is kept distinct from `Some(0.0)`.
pub fn t_inc_from_max_upload(max_upload: Option<f64>, t: f64, candidate: TimePair) -> f64 {
    let (td, td_next) = match max_upload {
        None => (0.0, candidate.upload_s),
        Some(td) => (td, td.max(candidate.upload_s)),
    };
    (td_next - td) + (candidate.update_s - (t - td)).max(0.0) + candidate.upload_s
}

/// Result of replaying a fixed selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReplay {
    /// Increment contributed by each client, in order.
    pub increments: Vec<f64>,
    pub total_s: f64,
}

/// Replays `t ← t + t_inc(prefix, x)` over a fixed order.
pub fn replay_round(ordered: &[TimePair]) -> RoundReplay {
    let mut t = 0.0;
    let mut max_upload: Option<f64> = None;
    let mut increments = Vec::with_capacity(ordered.len());
    for &pair in ordered {
        let inc = t_inc_from_max_upload(max_upload, t, pair);
        increments.push(inc);
        t += inc;
        max_upload = Some(max_upload.map_or(pair.upload_s, |m| m.max(pair.upload_s)));
    }
    RoundReplay {
        increments,
        total_s: t,
    }
}

/// Elapsed time of a round executed in the given order.
pub fn actual_round_time(ordered: &[TimePair]) -> f64 {
    replay_round(ordered).total_s
}

/// Makespan of the round by direct event simulation: distribution ends at
/// the slowest link, updates run in parallel, uploads are serialized in
/// selection order.
pub fn event_oracle_makespan(ordered: &[TimePair]) -> f64 {
    let distribution_end = ordered.iter().map(|p| p.upload_s).fold(0.0, f64::max);
    let mut channel_free_at = 0.0f64;
    for p in ordered {
        let update_done = distribution_end + p.update_s;
        let start = channel_free_at.max(update_done);
        channel_free_at = start + p.upload_s;
    }
    channel_free_at
}

/// Scores of every remaining candidate at one iteration of the greedy loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub chosen: ClientId,
    pub scores: Vec<(ClientId, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub ordered_selection: Vec<ClientId>,
    /// Final accumulated `t`, measured in the estimator's time basis.
    pub estimated_round_time_s: f64,
    pub evaluation_trace: Vec<IterationTrace>,
}

/// Greedy client selection.
///
/// Repeatedly takes the remaining candidate with the highest
/// `score(selected, t, k)` and, while fewer than `s_round` are selected,
/// appends it and advances `t` by `t_inc` evaluated on `estimate`.
/// Ties go to the lowest client id. The loop stops once `s_round` clients
/// are chosen, since later iterations can no longer change the selection.
pub fn greedy_select<E, S>(
    candidates: &[ClientId],
    s_round: usize,
    estimate: E,
    mut score: S,
) -> SelectionResult
where
    E: Fn(ClientId) -> TimePair,
    S: FnMut(&[ClientId], f64, ClientId) -> f64,
{
    let mut remaining: Vec<ClientId> = candidates.to_vec();
    remaining.sort_unstable();
    remaining.dedup();

    let mut selected: Vec<ClientId> = Vec::new();
    let mut selected_times: Vec<TimePair> = Vec::new();
    let mut trace = Vec::new();
    let mut t = 0.0;

    while !remaining.is_empty() && selected.len() < s_round {
        let scores: Vec<(ClientId, f64)> = remaining
            .iter()
            .map(|&k| (k, score(&selected, t, k)))
            .collect();
        let mut best = 0;
        for (i, &(_, s)) in scores.iter().enumerate().skip(1) {
            if s > scores[best].1 {
                best = i;
            }
        }
        let x = remaining.remove(best);
        let pair = estimate(x);
        t += t_inc(&selected_times, t, pair);
        selected.push(x);
        selected_times.push(pair);
        trace.push(IterationTrace { chosen: x, scores });
    }

    SelectionResult {
        ordered_selection: selected,
        estimated_round_time_s: t,
        evaluation_trace: trace,
    }
}
