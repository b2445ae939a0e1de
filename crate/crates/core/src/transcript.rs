//! Record of one run: what every client played, what it paid, what was sent.

use serde::{Deserialize, Serialize};

use crate::ledger::{CommLedger, RegretLedger};
use crate::simplex::SimplexPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    FedStoch,
    FedSvt,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::FedStoch => "fed-stoch",
            Algorithm::FedSvt => "fed-svt",
        }
    }
}

/// Iterates played by every client over a contiguous block of rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseActions {
    pub phase: usize,
    pub first_round: usize,
    pub last_round: usize,
    /// One point per client.
    pub iterates: Vec<SimplexPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actions {
    /// Simplex points, constant within each phase.
    Phases(Vec<PhaseActions>),
    /// `experts[t-1]`: the expert (1-indexed) every client played in round `t`.
    Experts(Vec<usize>),
}

/// An expert switch decided by the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switch {
    /// Round whose report triggered the switch.
    pub decided_at: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub algorithm: Algorithm,
    pub clients: usize,
    pub experts: usize,
    pub rounds: usize,
    pub actions: Actions,
    pub regret: RegretLedger,
    pub comm: CommLedger,
    pub switches: Vec<Switch>,
    pub warnings: Vec<String>,
}

impl Transcript {
    pub fn final_regret(&self) -> f64 {
        self.regret.final_regret()
    }

    /// Cumulative communicated scalars after each round.
    pub fn comm_series(&self) -> Vec<u64> {
        self.comm.cumulative_series(self.rounds)
    }

    /// Point played by `client` in `round` (1-based), as a simplex point.
    pub fn action(&self, client: usize, round: usize) -> Option<SimplexPoint> {
        match &self.actions {
            Actions::Phases(phases) => phases
                .iter()
                .find(|p| (p.first_round..=p.last_round).contains(&round))
                .and_then(|p| p.iterates.get(client).cloned()),
            Actions::Experts(experts) => {
                if client >= self.clients {
                    return None;
                }
                let n = *experts.get(round.checked_sub(1)?)?;
                SimplexPoint::vertex(n, self.experts).ok()
            }
        }
    }
}
