//! Regret and communication accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-client regret against the best fixed expert:
///
/// `(1/m)·[Σ_i Σ_t incurred[i][t] − min_n Σ_i Σ_t table[i][t][n]]`.
///
/// `incurred` is `m × T`; `table` is `m × T × d` and holds the loss every fixed
/// expert would have suffered.
pub fn per_client_regret(incurred: &[Vec<f64>], table: &[Vec<Vec<f64>>]) -> Result<f64> {
    let m = incurred.len();
    if m == 0 {
        return Err(Error::shape("no clients"));
    }
    if table.len() != m {
        return Err(Error::shape(format!(
            "{} clients of incurred losses but {} in the loss table",
            m,
            table.len()
        )));
    }
    let rounds = incurred[0].len();
    let d = table
        .first()
        .and_then(|c| c.first())
        .map(Vec::len)
        .ok_or_else(|| Error::shape("empty loss table"))?;
    let mut totals = vec![0.0; d];
    let mut paid = 0.0;
    for (i, (row, client_table)) in incurred.iter().zip(table).enumerate() {
        if row.len() != rounds || client_table.len() != rounds {
            return Err(Error::shape(format!(
                "client {} covers {} / {} rounds, expected {}",
                i + 1,
                row.len(),
                client_table.len(),
                rounds
            )));
        }
        paid += row.iter().sum::<f64>();
        for (t, losses) in client_table.iter().enumerate() {
            if losses.len() != d {
                return Err(Error::shape(format!(
                    "client {} round {} has {} experts, expected {}",
                    i + 1,
                    t + 1,
                    losses.len(),
                    d
                )));
            }
            for (tot, l) in totals.iter_mut().zip(losses) {
                *tot += l;
            }
        }
    }
    let best = totals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((paid - best) / m as f64)
}

/// Incremental regret bookkeeping for one run.
///
/// `cumulative[t]` is the per-client regret after rounds `1..=t+1` against the
/// best fixed expert on that prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    clients: usize,
    /// `incurred[t][i]`: loss paid by client `i` in round `t + 1`.
    incurred: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
    paid_total: f64,
    expert_totals: Vec<f64>,
}

impl RegretLedger {
    pub fn new(clients: usize, experts: usize) -> Self {
        Self {
            clients,
            incurred: Vec::new(),
            cumulative: Vec::new(),
            paid_total: 0.0,
            expert_totals: vec![0.0; experts],
        }
    }

    /// Records one round: the loss each client paid and the loss of each
    /// expert summed over clients.
    pub fn record_round(&mut self, incurred: Vec<f64>, expert_losses: &[f64]) -> Result<()> {
        if incurred.len() != self.clients || expert_losses.len() != self.expert_totals.len() {
            return Err(Error::shape(format!(
                "round record with {} clients / {} experts, expected {} / {}",
                incurred.len(),
                expert_losses.len(),
                self.clients,
                self.expert_totals.len()
            )));
        }
        self.paid_total += incurred.iter().sum::<f64>();
        for (tot, l) in self.expert_totals.iter_mut().zip(expert_losses) {
            *tot += l;
        }
        let best = self
            .expert_totals
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        self.cumulative
            .push((self.paid_total - best) / self.clients as f64);
        self.incurred.push(incurred);
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.cumulative.len()
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn incurred(&self) -> &[Vec<f64>] {
        &self.incurred
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Cumulative loss of each expert over all clients and recorded rounds.
    pub fn expert_totals(&self) -> &[f64] {
        &self.expert_totals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEvent {
    pub round: usize,
    pub direction: Direction,
    pub scalars: u64,
}

/// Append-only log of scalars exchanged between server and clients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    total: u64,
    events: Vec<CommEvent>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Logs `scalars` exchanged in `direction`, attributed to `round`.
    pub fn record(&mut self, round: usize, direction: Direction, scalars: u64) {
        self.total += scalars;
        self.events.push(CommEvent {
            round,
            direction,
            scalars,
        });
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn events(&self) -> &[CommEvent] {
        &self.events
    }

    pub fn total_in(&self, direction: Direction) -> u64 {
        self.events
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.scalars)
            .sum()
    }

    /// Cumulative scalar count after each round `1..=rounds`.
    pub fn cumulative_series(&self, rounds: usize) -> Vec<u64> {
        let mut per_round = vec![0u64; rounds + 1];
        for e in &self.events {
            per_round[e.round.min(rounds)] += e.scalars;
        }
        let mut acc = 0;
        per_round
            .into_iter()
            .skip(1)
            .map(|s| {
                acc += s;
                acc
            })
            .collect()
    }
}
