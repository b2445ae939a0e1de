//! Loss-stream generators.
//!
//! Stochastic streams are generated lazily: the loss of client `i` at round `t`
//! is a pure function of the stream's seed and `(i, t)`, so repeated access
//! returns the same function and the stream never needs to be materialized.
//! Oblivious streams are fully materialized at construction.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::loss::{CrossEntropyLoss, ExpertLossVector, LinearLoss, LossRef};
use crate::rng::{RandomSource, StreamTag};
use crate::simplex::SimplexPoint;

/// Access to stochastic losses `l_{i,t}` (client `i` 0-based, round `t` 1-based).
pub trait StochasticStream: Send + Sync + fmt::Debug {
    fn clients(&self) -> usize;
    fn rounds(&self) -> usize;
    fn dim(&self) -> usize;
    /// Declared ℓ1-Lipschitz constant shared by every loss in the stream.
    fn alpha(&self) -> f64;
    /// Declared ℓ1-smoothness constant.
    fn beta(&self) -> f64;
    fn loss(&self, client: usize, round: usize) -> Result<LossRef>;
}

fn check_access(stream: &dyn StochasticStream, client: usize, round: usize) -> Result<()> {
    if client >= stream.clients() || round == 0 || round > stream.rounds() {
        return Err(Error::Input(format!(
            "adversary has no loss for client {client} at round {round} ({} clients × {} rounds)",
            stream.clients(),
            stream.rounds()
        )));
    }
    Ok(())
}

/// `l_{i,t}(x) = <c_{i,t}, x>` with `c_{i,t,n} = clamp(μ_n + spread·U[−1,1], 0, 1)`.
///
/// Means are drawn once from `U[spread, 1 − spread]`, so the clamp never binds
/// and `E[c_{i,t}] = μ` exactly. α = 1, β = 0.
#[derive(Debug, Clone)]
pub struct LinearStochastic {
    clients: usize,
    rounds: usize,
    means: Vec<f64>,
    spread: f64,
    source: RandomSource,
}

pub const DEFAULT_LINEAR_SPREAD: f64 = 0.3;

impl LinearStochastic {
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    /// Coefficient vector of `l_{client, round}`.
    pub fn coefficients(&self, client: usize, round: usize) -> Result<Vec<f64>> {
        check_access(self, client, round)?;
        let mut rng = self
            .source
            .stream(StreamTag::Adversary, &[1, client as u64, round as u64]);
        Ok(self
            .means
            .iter()
            .map(|mu| (mu + self.spread * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0))
            .collect())
    }
}

impl StochasticStream for LinearStochastic {
    fn clients(&self) -> usize {
        self.clients
    }
    fn rounds(&self) -> usize {
        self.rounds
    }
    fn dim(&self) -> usize {
        self.means.len()
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        0.0
    }
    fn loss(&self, client: usize, round: usize) -> Result<LossRef> {
        Ok(Arc::new(LinearLoss::new(self.coefficients(client, round)?)))
    }
}

pub fn gen_stochastic_linear(
    m: usize,
    rounds: usize,
    d: usize,
    source: RandomSource,
) -> Result<LinearStochastic> {
    gen_stochastic_linear_with_spread(m, rounds, d, DEFAULT_LINEAR_SPREAD, source)
}

pub fn gen_stochastic_linear_with_spread(
    m: usize,
    rounds: usize,
    d: usize,
    spread: f64,
    source: RandomSource,
) -> Result<LinearStochastic> {
    check_dims(m, rounds, d)?;
    if !(0.0..=0.5).contains(&spread) {
        return Err(Error::param(format!("spread {spread} outside [0, 0.5]")));
    }
    let mut rng = source.stream(StreamTag::Adversary, &[0]);
    let means = (0..d)
        .map(|_| {
            if spread == 0.5 {
                0.5
            } else {
                rng.random_range(spread..=1.0 - spread)
            }
        })
        .collect();
    Ok(LinearStochastic {
        clients: m,
        rounds,
        means,
        spread,
        source,
    })
}

fn check_dims(m: usize, rounds: usize, d: usize) -> Result<()> {
    if m == 0 || rounds == 0 {
        return Err(Error::param("need at least one client and one round"));
    }
    if d < 2 {
        return Err(Error::param(format!("need at least 2 experts, got {d}")));
    }
    Ok(())
}

/// Smoothed cross-entropy against random class distributions.
///
/// Each loss draws `z_n ~ N(mean_n, sd_n²)` and uses `p = softmax(z)` as the
/// target; the Gaussian parameters are fixed per stream with
/// `mean_n ~ U[0, 1]` and `sd_n ~ U[0.1, 1]`.
#[derive(Debug, Clone)]
pub struct CrossEntropyStochastic {
    clients: usize,
    rounds: usize,
    gamma: f64,
    gaussians: Vec<Normal<f64>>,
    source: RandomSource,
}

pub const DEFAULT_XENT_GAMMA: f64 = 1e-2;

impl CrossEntropyStochastic {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Target class distribution of `l_{client, round}`.
    pub fn target(&self, client: usize, round: usize) -> Result<SimplexPoint> {
        check_access(self, client, round)?;
        let mut rng = self
            .source
            .stream(StreamTag::Adversary, &[2, client as u64, round as u64]);
        let z: Vec<f64> = self.gaussians.iter().map(|g| g.sample(&mut rng)).collect();
        Ok(softmax(&z))
    }
}

/// Numerically stable softmax, renormalized onto the simplex.
pub fn softmax(z: &[f64]) -> SimplexPoint {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    SimplexPoint::new(e).expect("softmax output lies on the simplex")
}

impl StochasticStream for CrossEntropyStochastic {
    fn clients(&self) -> usize {
        self.clients
    }
    fn rounds(&self) -> usize {
        self.rounds
    }
    fn dim(&self) -> usize {
        self.gaussians.len()
    }
    fn alpha(&self) -> f64 {
        CrossEntropyLoss::lipschitz_bound(self.gamma, self.dim())
    }
    fn beta(&self) -> f64 {
        self.alpha().powi(2)
    }
    fn loss(&self, client: usize, round: usize) -> Result<LossRef> {
        Ok(Arc::new(CrossEntropyLoss::new(
            self.target(client, round)?,
            self.gamma,
        )?))
    }
}

pub fn gen_stochastic_crossentropy(
    m: usize,
    rounds: usize,
    d: usize,
    gamma: f64,
    source: RandomSource,
) -> Result<CrossEntropyStochastic> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param(format!(
            "smoothing gamma {gamma} outside (0, 1)"
        )));
    }
    check_dims(m, rounds, d)?;
    let mut rng = source.stream(StreamTag::Adversary, &[0]);
    let gaussians = (0..d)
        .map(|_| {
            let mean = rng.random_range(0.0..=1.0);
            let sd = rng.random_range(0.1..=1.0);
            Normal::new(mean, sd).expect("positive standard deviation")
        })
        .collect();
    Ok(CrossEntropyStochastic {
        clients: m,
        rounds,
        gamma,
        gaussians,
        source,
    })
}

/// Materialized per-expert losses `l_{i,t} ∈ [0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliviousStream {
    /// `losses[i][t-1]`.
    losses: Vec<Vec<ExpertLossVector>>,
    dim: usize,
    l_star: Option<f64>,
}

impl ObliviousStream {
    pub fn new(losses: Vec<Vec<ExpertLossVector>>, l_star: Option<f64>) -> Result<Self> {
        let rounds = losses.first().map(Vec::len).unwrap_or(0);
        let dim = losses
            .first()
            .and_then(|c| c.first())
            .map(ExpertLossVector::dim)
            .unwrap_or(0);
        if rounds == 0 || dim == 0 {
            return Err(Error::shape(
                "oblivious stream needs clients, rounds and experts",
            ));
        }
        for (i, client) in losses.iter().enumerate() {
            if client.len() != rounds {
                return Err(Error::shape(format!(
                    "client {i} has {} rounds, expected {rounds}",
                    client.len()
                )));
            }
            if let Some(t) = client.iter().position(|v| v.dim() != dim) {
                return Err(Error::shape(format!(
                    "client {i} round {} has {} experts, expected {dim}",
                    t + 1,
                    client[t].dim()
                )));
            }
        }
        Ok(Self {
            losses,
            dim,
            l_star,
        })
    }

    pub fn clients(&self) -> usize {
        self.losses.len()
    }

    pub fn rounds(&self) -> usize {
        self.losses[0].len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Known bound on the best expert's per-client loss, if any.
    pub fn l_star(&self) -> Option<f64> {
        self.l_star
    }

    /// `l_{client, round}`; `round` is 1-based.
    pub fn get(&self, client: usize, round: usize) -> &ExpertLossVector {
        &self.losses[client][round - 1]
    }

    pub fn client(&self, client: usize) -> &[ExpertLossVector] {
        &self.losses[client]
    }

    /// Per-expert totals over all clients and rounds.
    pub fn expert_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.dim];
        for v in self.losses.iter().flatten() {
            for (t, l) in totals.iter_mut().zip(v.as_slice()) {
                *t += l;
            }
        }
        totals
    }

    /// Experts whose loss is zero for every client and round.
    pub fn zero_loss_experts(&self) -> Vec<usize> {
        (1..=self.dim)
            .filter(|&n| self.losses.iter().flatten().all(|v| v.get(n) == 0.0))
            .collect()
    }
}

/// An oblivious stream seen as linear stochastic losses.
#[derive(Debug, Clone)]
pub struct ObliviousAsLinear(pub Arc<ObliviousStream>);

impl StochasticStream for ObliviousAsLinear {
    fn clients(&self) -> usize {
        self.0.clients()
    }
    fn rounds(&self) -> usize {
        self.0.rounds()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        0.0
    }
    fn loss(&self, client: usize, round: usize) -> Result<LossRef> {
        check_access(self, client, round)?;
        Ok(Arc::new(LinearLoss::from(self.0.get(client, round))))
    }
}

/// A stream of either kind.
#[derive(Debug, Clone)]
pub enum LossStream {
    Stochastic(Arc<dyn StochasticStream>),
    Oblivious(Arc<ObliviousStream>),
}

impl LossStream {
    pub fn clients(&self) -> usize {
        match self {
            LossStream::Stochastic(s) => s.clients(),
            LossStream::Oblivious(o) => o.clients(),
        }
    }

    pub fn rounds(&self) -> usize {
        match self {
            LossStream::Stochastic(s) => s.rounds(),
            LossStream::Oblivious(o) => o.rounds(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossStream::Stochastic(s) => s.dim(),
            LossStream::Oblivious(o) => o.dim(),
        }
    }

    /// Stochastic view; oblivious vectors become linear losses.
    pub fn as_stochastic(&self) -> Arc<dyn StochasticStream> {
        match self {
            LossStream::Stochastic(s) => s.clone(),
            LossStream::Oblivious(o) => Arc::new(ObliviousAsLinear(o.clone())),
        }
    }

    /// Oblivious view; only streams of per-expert vectors qualify.
    pub fn as_oblivious(&self) -> Result<Arc<ObliviousStream>> {
        match self {
            LossStream::Oblivious(o) => Ok(o.clone()),
            LossStream::Stochastic(_) => Err(Error::config(
                "this algorithm needs per-expert loss vectors (an oblivious adversary)",
            )),
        }
    }
}

/// Materializes a linear stochastic stream into per-expert vectors.
pub fn materialize_linear(stream: &LinearStochastic) -> Result<ObliviousStream> {
    let losses = (0..stream.clients())
        .map(|i| {
            (1..=stream.rounds())
                .map(|t| ExpertLossVector::new(stream.coefficients(i, t)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ObliviousStream::new(losses, None)
}

/// IID `U[0,1]` losses except one uniformly chosen expert with zero loss
/// everywhere (`L* = 0`). Returns the stream and that expert (1-indexed).
pub fn gen_oblivious_realizable(
    m: usize,
    rounds: usize,
    d: usize,
    source: RandomSource,
) -> Result<(ObliviousStream, usize)> {
    check_dims(m, rounds, d)?;
    let zero_expert = source
        .stream(StreamTag::Adversary, &[3])
        .random_range(1..=d);
    let losses = (0..m)
        .map(|i| {
            let mut rng = source.stream(StreamTag::Adversary, &[4, i as u64]);
            (0..rounds)
                .map(|_| {
                    let v = (1..=d)
                        .map(|n| {
                            let draw = rng.random::<f64>();
                            if n == zero_expert {
                                0.0
                            } else {
                                draw
                            }
                        })
                        .collect();
                    ExpertLossVector::new(v)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let stream = ObliviousStream::new(losses, Some(0.0))?;
    assert!(
        stream.zero_loss_experts().contains(&zero_expert),
        "realizable stream lost its zero-loss expert"
    );
    Ok((stream, zero_expert))
}

/// `k = max(1, ⌈ln d / (2mε)⌉)` given `ln d`.
pub fn lower_bound_tail_from_log(ln_d: f64, m: usize, epsilon: f64) -> usize {
    let k = (ln_d / (2.0 * m as f64 * epsilon)).ceil();
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

pub fn lower_bound_tail(d: usize, m: usize, epsilon: f64) -> usize {
    lower_bound_tail_from_log((d as f64).ln(), m, epsilon)
}

/// Lower-bound fixture: rounds `1..=T−k` carry the all-zero loss and the last
/// `k` rounds carry `l^j` (zero at expert `j`, one elsewhere), for every client.
pub fn gen_lowerbound_sequence(
    d: usize,
    m: usize,
    rounds: usize,
    epsilon: f64,
    j: usize,
) -> Result<ObliviousStream> {
    if j == 0 || j > d {
        return Err(Error::Index { index: j, len: d });
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::param(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    check_dims(m, rounds, d)?;
    let k = lower_bound_tail(d, m, epsilon);
    if k > rounds {
        return Err(Error::param(format!(
            "tail length k = {k} exceeds the horizon T = {rounds}"
        )));
    }
    let zero = ExpertLossVector::zeros(d);
    let spike = ExpertLossVector::new((1..=d).map(|n| if n == j { 0.0 } else { 1.0 }).collect())?;
    let sequence: Vec<ExpertLossVector> = (1..=rounds)
        .map(|t| {
            if t <= rounds - k {
                zero.clone()
            } else {
                spike.clone()
            }
        })
        .collect();
    gen_uniform_oblivious(sequence, m)
}

/// Every client receives the same sequence.
pub fn gen_uniform_oblivious(sequence: Vec<ExpertLossVector>, m: usize) -> Result<ObliviousStream> {
    if m == 0 {
        return Err(Error::param("need at least one client"));
    }
    ObliviousStream::new(vec![sequence; m], None)
}

/// Loss sequence derived from a users × experts ratings matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsLosses {
    pub experts: Vec<String>,
    /// 1-indexed column with the highest mean rating.
    pub best_column: usize,
    /// Losses `max(0, r_{u,g*} − r_{u,g})` before rescaling.
    pub raw: Vec<Vec<f64>>,
    /// Rescaled into `[0, 1]` by the global maximum.
    pub sequence: Vec<ExpertLossVector>,
}

impl RatingsLosses {
    /// The sequence replicated to `m` clients.
    pub fn into_stream(self, m: usize) -> Result<ObliviousStream> {
        gen_uniform_oblivious(self.sequence, m)
    }
}

/// Reads a ratings CSV (header row of expert names, then one numeric row per
/// user) and converts it into a loss sequence.
pub fn ingest_ratings_csv(path: impl AsRef<Path>) -> Result<RatingsLosses> {
    let path = path.as_ref();
    let fail = |row: usize, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        row,
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| fail(0, format!("cannot open: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let experts: Vec<String> = reader
        .headers()
        .map_err(|e| fail(1, format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if experts.is_empty() || experts.iter().all(String::is_empty) {
        return Err(fail(1, "missing header row".into()));
    }
    let d = experts.len();
    let mut ratings: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| fail(row, format!("malformed record: {e}")))?;
        if record.len() != d {
            return Err(fail(row, format!("{} fields, expected {d}", record.len())));
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        fail(row, format!("column {} is not a number: {field:?}", c + 1))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        ratings.push(values);
    }
    if ratings.is_empty() {
        return Err(fail(2, "no data rows".into()));
    }
    ratings_to_losses(experts, &ratings)
}

/// `g* = argmax_g mean_u r_{u,g}`; `loss[u][g] = max(0, r_{u,g*} − r_{u,g})`,
/// then divided by the global maximum loss.
pub fn ratings_to_losses(experts: Vec<String>, ratings: &[Vec<f64>]) -> Result<RatingsLosses> {
    let d = experts.len();
    if ratings.is_empty() || d == 0 {
        return Err(Error::shape("empty ratings matrix"));
    }
    if let Some(u) = ratings.iter().position(|r| r.len() != d) {
        return Err(Error::shape(format!(
            "user {} has {} ratings, expected {d}",
            u + 1,
            ratings[u].len()
        )));
    }
    let users = ratings.len() as f64;
    let means: Vec<f64> = (0..d)
        .map(|g| ratings.iter().map(|r| r[g]).sum::<f64>() / users)
        .collect();
    let mut best = 0;
    for g in 1..d {
        if means[g] > means[best] {
            best = g;
        }
    }
    let raw: Vec<Vec<f64>> = ratings
        .iter()
        .map(|r| r.iter().map(|v| (r[best] - v).max(0.0)).collect())
        .collect();
    let max = raw.iter().flatten().copied().fold(0.0, f64::max);
    let sequence = raw
        .iter()
        .map(|r| {
            let scaled = r
                .iter()
                .map(|v| if max > 0.0 { (v / max).min(1.0) } else { 0.0 })
                .collect();
            ExpertLossVector::new(scaled)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatingsLosses {
        experts,
        best_column: best + 1,
        raw,
        sequence,
    })
}
