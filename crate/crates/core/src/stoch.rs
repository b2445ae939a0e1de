//! Federated private online prediction against stochastic adversaries.
//!
//! Rounds are grouped into doubling phases. During phase `p ≥ 2` each client
//! runs [`DpFw`] on the losses it saw in phase `p − 1`; at every leaf it sends
//! the `d` (noisy) scores `<e_n, v>` to the server, which returns the index of
//! the vertex with the lowest average score. The client steps toward that
//! vertex and, once all leaves are answered, plays its final iterate for the
//! whole phase. Phase 1 plays the uniform distribution.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::StochasticStream;
use crate::dp_fw::{plan_trees, BatchMode, DpFw, Leaf, TraversalPlan, TreeAddress, MAX_TREES};
use crate::error::{Error, Result};
use crate::ledger::{CommLedger, Direction, RegretLedger};
use crate::loss::LossRef;
use crate::mechanisms::{argmin, laplace_unchecked, noisy_avg_argmin, NoiseMode};
use crate::rng::{RandomSource, Rng, StreamTag};
use crate::simplex::SimplexPoint;
use crate::transcript::{Actions, Algorithm, PhaseActions, Transcript};

/// Privacy model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Local ε-DP: clients add Laplace noise before sending.
    #[default]
    Pure,
    /// Local (ε, δ)-DP.
    Approx,
    /// Clients send exact scores; the server adds the noise.
    Central,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Variant::Pure => "pure",
            Variant::Approx => "approx",
            Variant::Central => "central",
        })
    }
}

/// How batch size and tree count grow with the phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `b = 2^{p−1}`, one tree per phase.
    #[default]
    Simple,
    /// `b = ⌈2^{p−1}/(p−1)²⌉` and a tree count derived from ε, β, m, d.
    Tuned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochConfig {
    pub m: usize,
    pub d: usize,
    pub rounds: usize,
    pub variant: Variant,
    pub schedule: Schedule,
    pub epsilon: f64,
    pub delta: f64,
    /// ℓ1-Lipschitz constant of the losses.
    pub alpha: f64,
    /// ℓ1-smoothness constant of the losses.
    pub beta: f64,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub batch_mode: BatchMode,
}

impl StochConfig {
    /// Pure local DP with the simple schedule and the stream's own constants.
    pub fn for_stream(stream: &dyn StochasticStream, epsilon: f64) -> Self {
        Self {
            m: stream.clients(),
            d: stream.dim(),
            rounds: stream.rounds(),
            variant: Variant::Pure,
            schedule: Schedule::Simple,
            epsilon,
            delta: 0.0,
            alpha: stream.alpha(),
            beta: stream.beta(),
            noise: NoiseMode::Enabled,
            batch_mode: BatchMode::Sampled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("need at least one client"));
        }
        if self.d < 2 {
            return Err(Error::config(format!(
                "need at least 2 experts, got {}",
                self.d
            )));
        }
        if self.rounds == 0 {
            return Err(Error::config("horizon T must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite())
            || !(self.beta >= 0.0 && self.beta.is_finite())
        {
            return Err(Error::config(format!(
                "loss constants must be finite with alpha > 0, beta >= 0 (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        if self.variant == Variant::Approx {
            if self.delta.is_nan() || self.delta <= 0.0 {
                return Err(Error::config(format!(
                    "approx variant needs delta > 0, got {}",
                    self.delta
                )));
            }
            if self.delta > 1.0 / self.rounds as f64 {
                return Err(Error::config(format!(
                    "approx variant needs delta <= 1/T, got delta = {} > 1/{}",
                    self.delta, self.rounds
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub index: usize,
    pub first: usize,
    pub last: usize,
}

impl Phase {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rounds(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<Phase>,
}

impl PhasePlan {
    pub fn count(&self) -> usize {
        self.phases.len()
    }
}

/// Phase `p` covers rounds `2^{p−1} ..= min(2^p − 1, T)`.
pub fn phase_schedule(rounds: usize) -> Result<PhasePlan> {
    if rounds < 1 {
        return Err(Error::param("horizon T must be at least 1"));
    }
    let mut phases = Vec::new();
    let mut first = 1usize;
    let mut index = 1;
    while first <= rounds {
        let last = (2 * first - 1).min(rounds);
        phases.push(Phase { index, first, last });
        first *= 2;
        index += 1;
    }
    Ok(PhasePlan { phases })
}

/// Per-phase parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochParams {
    pub phase: usize,
    pub variant: Variant,
    /// Nominal root batch size.
    pub b: usize,
    /// Root batch size actually used, `min(b, dataset)`.
    pub b_eff: usize,
    /// Number of trees `T1`.
    pub trees: usize,
    /// Noise scale per tree (`λ_j` for local variants, `μ_j` for central).
    pub noise_scales: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub warnings: Vec<String>,
}

impl StochParams {
    pub fn noise_scale(&self, address: &TreeAddress) -> f64 {
        self.noise_scales[address.tree - 1]
    }

    /// Leaf events (= communication rounds) in this phase: `2^{T1+1} − 2`.
    pub fn leaf_count(&self) -> usize {
        (1usize << (self.trees + 1)) - 2
    }
}

fn pow2(e: usize) -> f64 {
    (e as f64).exp2()
}

/// `λ_j = 4α2^j/(bε)`.
pub fn local_pure_scale(alpha: f64, j: usize, b: usize, epsilon: f64) -> f64 {
    4.0 * alpha * pow2(j) / (b as f64 * epsilon)
}

/// `λ = α2^{T1/2}·ln(2^{p−1}/δ)/(bε)`.
pub fn local_approx_scale(
    alpha: f64,
    trees: usize,
    p: usize,
    delta: f64,
    b: usize,
    epsilon: f64,
) -> f64 {
    alpha * (trees as f64 / 2.0).exp2() * (pow2(p - 1) / delta).ln() / (b as f64 * epsilon)
}

/// `μ_j = 4α2^j/(bmε)`.
pub fn central_scale(alpha: f64, j: usize, b: usize, m: usize, epsilon: f64) -> f64 {
    4.0 * alpha * pow2(j) / (b as f64 * m as f64 * epsilon)
}

/// Tree count from a real-valued formula: rounded, then clamped to
/// `[1, max(1, ⌊log2 b⌋)]`.
fn clamp_trees(raw: f64, b: usize) -> usize {
    let upper = (usize::BITS - 1 - b.max(1).leading_zeros()).max(1) as usize;
    let upper = upper.min(MAX_TREES);
    if raw.is_nan() || raw < 1.0 {
        return 1;
    }
    let r = raw.round();
    if r >= upper as f64 {
        upper
    } else {
        r as usize
    }
}

/// Parameters for phase `p ≥ 2`, whose dataset is the `2^{p−2}` losses of the
/// previous phase.
pub fn derive_params(p: usize, cfg: &StochConfig) -> Result<StochParams> {
    if p < 2 {
        return Err(Error::config(format!(
            "phase {p} has no update; parameters start at phase 2"
        )));
    }
    if p > 60 {
        return Err(Error::config(format!(
            "phase {p} is beyond the supported horizon"
        )));
    }
    if cfg.epsilon.is_nan() || cfg.epsilon <= 0.0 {
        return Err(Error::config(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }
    let half = 1usize << (p - 1);
    let b = match cfg.schedule {
        Schedule::Simple => half,
        Schedule::Tuned => half.div_ceil((p - 1) * (p - 1)),
    };
    if b < 1 {
        return Err(Error::config(format!(
            "phase {p} yields batch size b = {b} < 1"
        )));
    }
    let dataset = 1usize << (p - 2);
    let b_eff = b.min(dataset);
    let bf = b_eff as f64;
    let (m, d) = (cfg.m as f64, cfg.d as f64);
    let (eps, alpha, beta) = (cfg.epsilon, cfg.alpha, cfg.beta);
    let ln_d = d.ln();
    let log_delta = (pow2(p - 1) / cfg.delta).ln();
    let raw_trees = match (cfg.schedule, cfg.variant) {
        (Schedule::Simple, _) => 1.0,
        (Schedule::Tuned, Variant::Pure) => {
            0.5 * (bf * eps * beta * m.sqrt() / (alpha * ln_d)).ln()
        }
        (Schedule::Tuned, Variant::Approx) => {
            (2.0 / 3.0) * (bf * eps * m.sqrt() * beta / (alpha * log_delta * ln_d)).ln()
        }
        (Schedule::Tuned, Variant::Central) => 0.5 * (bf * eps * beta * m / (alpha * ln_d)).ln(),
    };
    let trees = clamp_trees(raw_trees, b_eff);
    let mut warnings = Vec::new();
    let noise_scales: Vec<f64> = (1..=trees)
        .map(|j| match cfg.variant {
            Variant::Pure => local_pure_scale(alpha, j, b_eff, eps),
            Variant::Approx => local_approx_scale(alpha, trees, p, cfg.delta, b_eff, eps),
            Variant::Central => central_scale(alpha, j, b_eff, cfg.m, eps),
        })
        .collect();
    if cfg.variant == Variant::Approx {
        if cfg.delta.is_nan() || cfg.delta <= 0.0 {
            return Err(Error::config(format!(
                "approx variant needs delta > 0, got {}",
                cfg.delta
            )));
        }
        if cfg.delta > 1.0 / cfg.rounds as f64 {
            return Err(Error::config(format!(
                "approx variant needs delta <= 1/T, got delta = {} > 1/{}",
                cfg.delta, cfg.rounds
            )));
        }
        let bound = (alpha * log_delta * ln_d).powf(0.25) * ((p - 1) as f64).sqrt()
            / (beta * pow2(p - 1)).powf(0.25);
        if eps > bound {
            warnings.push(format!(
                "phase {p}: epsilon {eps} exceeds (alpha ln(2^(p-1)/delta) ln d)^(1/4) sqrt(p-1) / (beta 2^(p-1))^(1/4) = {bound:.6}"
            ));
        }
        let sqrt_bound = ((-(trees as f64)).exp2() * (1.0 / cfg.delta).ln()).sqrt();
        if eps > sqrt_bound {
            warnings.push(format!(
                "phase {p}: epsilon {eps} exceeds sqrt(2^(-T1) ln(1/delta)) = {sqrt_bound:.6}"
            ));
        }
    }
    Ok(StochParams {
        phase: p,
        variant: cfg.variant,
        b,
        b_eff,
        trees,
        noise_scales,
        epsilon: eps,
        delta: cfg.delta,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UplinkMessage {
    pub client: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownlinkMessage {
    /// 1-indexed vertex of the simplex.
    pub expert: usize,
}

/// Scores sent for a leaf: `v_n + Lap(λ)` under local DP, `v_n` under central DP.
pub fn uplink_scores(
    client: usize,
    leaf: &Leaf,
    params: &StochParams,
    noise: NoiseMode,
    rng: &mut Rng,
) -> UplinkMessage {
    let scale = match (params.variant, noise) {
        (Variant::Central, _) | (_, NoiseMode::Disabled) => 0.0,
        _ => params.noise_scale(&leaf.address),
    };
    UplinkMessage {
        client,
        scores: leaf
            .v
            .iter()
            .map(|v| v + laplace_unchecked(scale, rng))
            .collect(),
    }
}

/// Picks the vertex with the lowest (noisy) average score.
pub fn server_select(
    uplinks: &[UplinkMessage],
    m: usize,
    params: &StochParams,
    address: &TreeAddress,
    noise: NoiseMode,
    rng: &mut Rng,
) -> Result<DownlinkMessage> {
    if uplinks.len() != m {
        return Err(Error::protocol(format!(
            "leaf {address} got {} uplinks from {m} clients",
            uplinks.len()
        )));
    }
    let rows: Vec<Vec<f64>> = uplinks.iter().map(|u| u.scores.clone()).collect();
    let expert = match params.variant {
        Variant::Central => {
            let d = rows[0].len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::shape("uplinks of different lengths"));
            }
            let scale = if noise.is_enabled() {
                params.noise_scale(address)
            } else {
                0.0
            };
            let means: Vec<f64> = (0..d)
                .map(|n| {
                    rows.iter().map(|r| r[n]).sum::<f64>() / m as f64
                        + laplace_unchecked(scale, rng)
                })
                .collect();
            argmin(&means)
        }
        _ => noisy_avg_argmin(&rows, 0.0, rng)?,
    };
    Ok(DownlinkMessage { expert })
}

/// Total scalars a run exchanges: `m(d+1)·Σ_{p≥2} leaf_count(p)`.
pub fn expected_comm(cfg: &StochConfig) -> Result<u64> {
    let plan = phase_schedule(cfg.rounds)?;
    let mut leaves = 0u64;
    for phase in plan.phases.iter().filter(|p| p.index >= 2) {
        leaves += derive_params(phase.index, cfg)?.leaf_count() as u64;
    }
    Ok(cfg.m as u64 * (cfg.d as u64 + 1) * leaves)
}

/// Per-client random streams.
struct ClientRngs {
    noise: Rng,
    batch: Rng,
}

fn phase_dataset(
    stream: &dyn StochasticStream,
    client: usize,
    phase: &Phase,
) -> Result<Vec<LossRef>> {
    phase.rounds().map(|t| stream.loss(client, t)).collect()
}

/// Runs the protocol for `cfg.rounds` rounds against `stream`.
pub fn run_fed_stoch(
    cfg: &StochConfig,
    stream: &dyn StochasticStream,
    source: &RandomSource,
) -> Result<Transcript> {
    cfg.validate()?;
    if stream.clients() < cfg.m || stream.dim() != cfg.d {
        return Err(Error::Input(format!(
            "adversary provides {} clients × {} experts, run needs {} × {}",
            stream.clients(),
            stream.dim(),
            cfg.m,
            cfg.d
        )));
    }
    if stream.rounds() < cfg.rounds {
        return Err(Error::Input(format!(
            "adversary exhausted after {} of {} rounds",
            stream.rounds(),
            cfg.rounds
        )));
    }
    let (m, d) = (cfg.m, cfg.d);
    let plan = phase_schedule(cfg.rounds)?;
    let mut rngs: Vec<ClientRngs> = (0..m)
        .map(|i| ClientRngs {
            noise: source.client_stream(i, StreamTag::ClientNoise),
            batch: source.client_stream(i, StreamTag::ClientBatch),
        })
        .collect();
    let mut server_rng = source.stream(StreamTag::Server, &[]);

    let mut iterates = vec![SimplexPoint::uniform(d)?; m];
    let mut regret = RegretLedger::new(m, d);
    let mut comm = CommLedger::new();
    let mut segments = Vec::with_capacity(plan.count());
    let mut warnings = Vec::new();
    let mut warned_phases = Vec::new();
    let mut expected_leaves = 0u64;
    let mut previous: Option<Phase> = None;

    for phase in &plan.phases {
        if let Some(prev) = previous {
            let params = derive_params(phase.index, cfg)?;
            if !params.warnings.is_empty() {
                if warnings.is_empty() {
                    warnings.extend(params.warnings.iter().cloned());
                }
                warned_phases.push(phase.index);
            }
            let tree_plan: Arc<TraversalPlan> = Arc::new(plan_trees(params.trees)?);
            let mut clients = Vec::with_capacity(m);
            for (i, x) in iterates.iter().enumerate() {
                let dataset = phase_dataset(stream, i, &prev)?;
                clients.push(DpFw::new(
                    dataset,
                    tree_plan.clone(),
                    params.b_eff,
                    x.clone(),
                    cfg.batch_mode,
                )?);
            }
            let leaves = run_leaf_events(cfg, &params, &mut clients, &mut rngs, &mut server_rng)?;
            comm.record(phase.first, Direction::Uplink, (leaves * m * d) as u64);
            comm.record(phase.first, Direction::Downlink, (leaves * m) as u64);
            expected_leaves += params.leaf_count() as u64;
            for (x, fw) in iterates.iter_mut().zip(clients) {
                *x = fw.finish()?;
            }
        }
        for t in phase.rounds() {
            let mut paid = Vec::with_capacity(m);
            let mut expert_losses = vec![0.0; d];
            for (i, x) in iterates.iter().enumerate() {
                let loss = stream.loss(i, t)?;
                paid.push(loss.eval(x));
                for (acc, l) in expert_losses.iter_mut().zip(loss.eval_vertices()) {
                    *acc += l;
                }
            }
            regret.record_round(paid, &expert_losses)?;
        }
        segments.push(PhaseActions {
            phase: phase.index,
            first_round: phase.first,
            last_round: phase.last,
            iterates: iterates.clone(),
        });
        previous = Some(*phase);
    }

    let expected = m as u64 * (d as u64 + 1) * expected_leaves;
    if comm.total() != expected {
        return Err(Error::State(format!(
            "communicated {} scalars, closed form gives {expected}",
            comm.total()
        )));
    }
    if warned_phases.len() > 1 {
        warnings.push(format!(
            "epsilon preconditions fail in {} phases ({}..={})",
            warned_phases.len(),
            warned_phases[0],
            warned_phases[warned_phases.len() - 1]
        ));
    }
    Ok(Transcript {
        algorithm: Algorithm::FedStoch,
        clients: m,
        experts: d,
        rounds: cfg.rounds,
        actions: Actions::Phases(segments),
        regret,
        comm,
        switches: Vec::new(),
        warnings,
    })
}

/// Drives every client through the phase in lockstep, one leaf event at a
/// time. Returns the number of leaf events.
fn run_leaf_events(
    cfg: &StochConfig,
    params: &StochParams,
    clients: &mut [DpFw],
    rngs: &mut [ClientRngs],
    server_rng: &mut Rng,
) -> Result<usize> {
    let mut events = 0;
    loop {
        let mut uplinks = Vec::with_capacity(clients.len());
        let mut address = None;
        for (i, (fw, rng)) in clients.iter_mut().zip(rngs.iter_mut()).enumerate() {
            match fw.next_leaf(&mut rng.batch)? {
                Some(leaf) => {
                    if address.get_or_insert_with(|| leaf.address.clone()) != &leaf.address {
                        return Err(Error::protocol(format!(
                            "client {i} reached leaf {} out of step",
                            leaf.address
                        )));
                    }
                    uplinks.push(uplink_scores(i, &leaf, params, cfg.noise, &mut rng.noise));
                }
                None if address.is_none() => {}
                None => {
                    return Err(Error::protocol(format!(
                        "client {i} ran out of leaves early"
                    )))
                }
            }
        }
        let Some(address) = address else {
            return Ok(events);
        };
        if uplinks.len() != clients.len() {
            return Err(Error::protocol("some clients finished the phase early"));
        }
        let down = server_select(&uplinks, cfg.m, params, &address, cfg.noise, server_rng)?;
        for fw in clients.iter_mut() {
            fw.apply_downlink(down.expert)?;
        }
        events += 1;
    }
}
