//! Federated sparse-vector expert selection for oblivious losses with a
//! low-loss expert.
//!
//! All clients play a shared expert. Every `N` rounds each client reports its
//! per-expert loss sums for the phase. The server tracks how much loss the
//! played experts accumulated since the last switch and feeds that into
//! AboveThreshold; when the threshold is crossed it draws a new expert with
//! the exponential mechanism over cumulative losses. At most `κ` switches
//! are ever made.

use serde::{Deserialize, Serialize};

use crate::adversary::ObliviousStream;
use crate::error::{Error, Result};
use crate::ledger::{CommLedger, Direction, RegretLedger};
use crate::loss::ExpertLossVector;
use crate::mechanisms::{exponential_sample, AboveThreshold, NoiseMode, ThresholdAnswer};
use crate::rng::{RandomSource, Rng, StreamTag};
use crate::transcript::{Actions, Algorithm, Switch, Transcript};

pub const DEFAULT_RHO: f64 = 0.05;

/// Inputs of a run. Derived quantities live in [`SvtParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvtConfig {
    pub m: usize,
    pub d: usize,
    pub rounds: usize,
    /// Phase length `N`.
    pub phase_len: usize,
    pub epsilon: f64,
    /// `0` selects pure DP.
    pub delta: f64,
    pub rho: f64,
    /// Bound on the best expert's cumulative loss per client.
    pub l_star: f64,
    #[serde(default)]
    pub noise: NoiseMode,
}

/// Switching budget, sampling parameter and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvtParams {
    pub kappa: usize,
    pub eta: f64,
    pub threshold: f64,
}

/// `κ = 3⌈log2 d⌉ + ⌈24 ln(1/ρ)⌉`.
pub fn switch_budget(d: usize, rho: f64) -> usize {
    let s = (d.max(1) as f64).log2().ceil() as usize;
    3 * s + (24.0 * (1.0 / rho).ln()).ceil() as usize
}

/// Completes a configuration with `κ`, `η` and `L`:
/// `η = ε/(2κ)` (pure) or `ε/√(κ ln(1/δ))` (approximate),
/// `L = mL* + 8 ln(2T²/(N²ρ))/ε + 4/η`.
pub fn derive_svt_params(cfg: &SvtConfig) -> Result<SvtParams> {
    if !(cfg.rho > 0.0 && cfg.rho < 0.5) {
        return Err(Error::param(format!("rho = {} outside (0, 1/2)", cfg.rho)));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::param(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }
    if cfg.phase_len < 1 {
        return Err(Error::param("phase length N must be at least 1"));
    }
    if !(cfg.l_star >= 0.0 && cfg.l_star.is_finite()) {
        return Err(Error::param(format!(
            "L* must be nonnegative, got {}",
            cfg.l_star
        )));
    }
    if !(0.0..1.0).contains(&cfg.delta) {
        return Err(Error::param(format!(
            "delta = {} outside [0, 1)",
            cfg.delta
        )));
    }
    let kappa = switch_budget(cfg.d, cfg.rho);
    let eta = if cfg.delta == 0.0 {
        cfg.epsilon / (2.0 * kappa as f64)
    } else {
        cfg.epsilon / (kappa as f64 * (1.0 / cfg.delta).ln()).sqrt()
    };
    let (t, n) = (cfg.rounds as f64, cfg.phase_len as f64);
    let threshold = cfg.m as f64 * cfg.l_star
        + 8.0 * (2.0 * t * t / (n * n * cfg.rho)).ln() / cfg.epsilon
        + 4.0 / eta;
    Ok(SvtParams {
        kappa,
        eta,
        threshold,
    })
}

/// Phase `n` (1-based) covers rounds `(n−1)N+1 ..= min(nN, T)`.
pub fn svt_phases(rounds: usize, phase_len: usize) -> Vec<(usize, usize)> {
    (0..rounds.div_ceil(phase_len))
        .map(|n| (n * phase_len + 1, ((n + 1) * phase_len).min(rounds)))
        .collect()
}

/// Component-wise sum of one client's losses over a phase of `expected_len`
/// rounds.
pub fn client_phase_report(losses: &[ExpertLossVector], expected_len: usize) -> Result<Vec<f64>> {
    if losses.len() != expected_len || losses.is_empty() {
        return Err(Error::protocol(format!(
            "phase report over {} rounds, expected {expected_len}",
            losses.len()
        )));
    }
    let d = losses[0].dim();
    let mut sum = vec![0.0; d];
    for l in losses {
        if l.dim() != d {
            return Err(Error::shape(
                "loss vectors of different lengths in one phase",
            ));
        }
        for (acc, v) in sum.iter_mut().zip(l.as_slice()) {
            *acc += v;
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvtServerState {
    /// Currently played expert (1-indexed).
    pub expert: usize,
    /// Switches made so far.
    pub switches: usize,
    /// First round played by the current expert.
    pub tau: usize,
    /// Loss of the played experts summed over clients since `tau`.
    pub since_tau: f64,
    /// Cumulative loss of each expert over all clients.
    pub tallies: Vec<f64>,
    threshold: AboveThreshold,
    next_phase: usize,
}

impl SvtServerState {
    pub fn new(
        cfg: &SvtConfig,
        params: &SvtParams,
        initial_expert: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if initial_expert == 0 || initial_expert > cfg.d {
            return Err(Error::Index {
                index: initial_expert,
                len: cfg.d,
            });
        }
        Ok(Self {
            expert: initial_expert,
            switches: 0,
            tau: 1,
            since_tau: 0.0,
            tallies: vec![0.0; cfg.d],
            threshold: AboveThreshold::new(params.threshold, cfg.epsilon, cfg.noise, rng)?,
            next_phase: 1,
        })
    }

    pub fn threshold(&self) -> &AboveThreshold {
        &self.threshold
    }
}

/// Processes the reports of phase `phase` (1-based, covering rounds up to
/// `last_round`) and returns the expert for the next phase together with the
/// switch it caused, if any.
pub fn server_phase_step(
    state: &mut SvtServerState,
    phase: usize,
    last_round: usize,
    reports: &[Vec<f64>],
    cfg: &SvtConfig,
    params: &SvtParams,
    rng: &mut Rng,
) -> Result<(usize, Option<Switch>)> {
    if phase != state.next_phase {
        return Err(Error::protocol(format!(
            "report for phase {phase} while expecting phase {}",
            state.next_phase
        )));
    }
    if reports.len() != cfg.m {
        return Err(Error::protocol(format!(
            "phase {phase} got {} reports from {} clients",
            reports.len(),
            cfg.m
        )));
    }
    if let Some(r) = reports.iter().find(|r| r.len() != cfg.d) {
        return Err(Error::shape(format!(
            "report of length {}, expected {}",
            r.len(),
            cfg.d
        )));
    }
    state.next_phase += 1;
    for r in reports {
        for (tally, v) in state.tallies.iter_mut().zip(r) {
            *tally += v;
        }
        state.since_tau += r[state.expert - 1];
    }
    if state.switches >= params.kappa {
        return Ok((state.expert, None));
    }
    if state.threshold.query(state.since_tau, rng)? == ThresholdAnswer::Below {
        return Ok((state.expert, None));
    }
    let floor = cfg.m as f64 * cfg.l_star;
    let scores: Vec<f64> = state.tallies.iter().map(|s| s.max(floor)).collect();
    let next = exponential_sample(&scores, params.eta, rng)?;
    let switch = Switch {
        decided_at: last_round,
        from: state.expert,
        to: next,
    };
    state.expert = next;
    state.switches += 1;
    state.tau = last_round + 1;
    state.since_tau = 0.0;
    state.threshold.reset(rng);
    Ok((next, Some(switch)))
}

/// Runs the protocol over an oblivious loss tensor.
pub fn run_fed_svt(
    cfg: &SvtConfig,
    losses: &ObliviousStream,
    source: &RandomSource,
) -> Result<Transcript> {
    if cfg.m == 0 || cfg.rounds == 0 {
        return Err(Error::param("need at least one client and one round"));
    }
    if losses.clients() < cfg.m || losses.dim() != cfg.d || losses.rounds() < cfg.rounds {
        return Err(Error::Input(format!(
            "loss tensor is {} clients × {} rounds × {} experts, run needs {} × {} × {}",
            losses.clients(),
            losses.rounds(),
            losses.dim(),
            cfg.m,
            cfg.rounds,
            cfg.d
        )));
    }
    let params = derive_svt_params(cfg)?;
    let (m, d) = (cfg.m, cfg.d);
    let mut rng = source.stream(StreamTag::Server, &[]);
    let initial = rand::Rng::random_range(&mut rng, 1..=d);
    let mut state = SvtServerState::new(cfg, &params, initial, &mut rng)?;
    let mut regret = RegretLedger::new(m, d);
    let mut comm = CommLedger::new();
    let mut played = Vec::with_capacity(cfg.rounds);
    let mut switches = Vec::new();

    for (n, (first, last)) in svt_phases(cfg.rounds, cfg.phase_len)
        .into_iter()
        .enumerate()
    {
        let expert = state.expert;
        for t in first..=last {
            let mut expert_losses = vec![0.0; d];
            let paid: Vec<f64> = (0..m)
                .map(|i| {
                    let l = losses.get(i, t);
                    for (acc, v) in expert_losses.iter_mut().zip(l.as_slice()) {
                        *acc += v;
                    }
                    l.get(expert)
                })
                .collect();
            regret.record_round(paid, &expert_losses)?;
            played.push(expert);
        }
        let reports = (0..m)
            .map(|i| client_phase_report(&losses.client(i)[first - 1..last], last - first + 1))
            .collect::<Result<Vec<_>>>()?;
        comm.record(last, Direction::Uplink, (m * d) as u64);
        let (_, switch) =
            server_phase_step(&mut state, n + 1, last, &reports, cfg, &params, &mut rng)?;
        comm.record(last, Direction::Downlink, m as u64);
        switches.extend(switch);
        if state.switches > params.kappa {
            return Err(Error::State(format!(
                "{} switches exceed the budget {}",
                state.switches, params.kappa
            )));
        }
    }

    Ok(Transcript {
        algorithm: Algorithm::FedSvt,
        clients: m,
        experts: d,
        rounds: cfg.rounds,
        actions: Actions::Experts(played),
        regret,
        comm,
        switches,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{gen_oblivious_realizable, gen_uniform_oblivious};

    fn cfg(m: usize, d: usize, rounds: usize, phase_len: usize) -> SvtConfig {
        SvtConfig {
            m,
            d,
            rounds,
            phase_len,
            epsilon: 10.0,
            delta: 0.0,
            rho: DEFAULT_RHO,
            l_star: 0.0,
            noise: NoiseMode::Enabled,
        }
    }

    #[test]
    fn params_examples() {
        assert_eq!(switch_budget(100, 0.05), 93);
        let p = derive_svt_params(&cfg(10, 100, 512, 1)).unwrap();
        assert_eq!(p.kappa, 93);
        assert!((p.eta - 10.0 / 186.0).abs() < 1e-12);
        let expect = 8.0 * (2.0 * 512.0f64.powi(2) / 0.05).ln() / 10.0 + 4.0 * 186.0 / 10.0;
        assert!((p.threshold - expect).abs() < 1e-9);
        assert!((p.threshold - 87.3).abs() < 0.1);
    }

    #[test]
    fn params_reject_bad_rho() {
        for rho in [0.0, 0.5, 0.7, -0.1] {
            let mut c = cfg(1, 4, 10, 1);
            c.rho = rho;
            assert!(matches!(derive_svt_params(&c), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn approx_eta() {
        let mut c = cfg(1, 100, 512, 1);
        c.delta = 1e-5;
        let p = derive_svt_params(&c).unwrap();
        assert!((p.eta - 10.0 / (93.0 * (1e5f64).ln()).sqrt()).abs() < 1e-12);
    }

    fn v(x: &[f64]) -> ExpertLossVector {
        ExpertLossVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn report_examples() {
        let r = client_phase_report(&[v(&[0.1, 0.9]), v(&[0.2, 0.3])], 2).unwrap();
        assert!((r[0] - 0.3).abs() < 1e-12 && (r[1] - 1.2).abs() < 1e-12);
        assert_eq!(
            client_phase_report(&[v(&[0.0, 0.0])], 1).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            client_phase_report(&[v(&[0.4, 0.6])], 1).unwrap(),
            vec![0.4, 0.6]
        );
        assert!(matches!(
            client_phase_report(&[v(&[0.4, 0.6])], 2),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn phases_cover_horizon() {
        assert_eq!(svt_phases(7, 3), vec![(1, 3), (4, 6), (7, 7)]);
        assert_eq!(svt_phases(4, 1).len(), 4);
    }

    fn rng() -> Rng {
        RandomSource::new(5).stream(StreamTag::Custom(0), &[])
    }

    #[test]
    fn below_threshold_keeps_expert() {
        let mut c = cfg(1, 3, 10, 1);
        c.noise = NoiseMode::Disabled;
        let p = derive_svt_params(&c).unwrap();
        let mut r = rng();
        let mut s = SvtServerState::new(&c, &p, 2, &mut r).unwrap();
        let (e, sw) =
            server_phase_step(&mut s, 1, 1, &[vec![1.0, 1.0, 1.0]], &c, &p, &mut r).unwrap();
        assert_eq!((e, sw), (2, None));
        assert!(server_phase_step(&mut s, 3, 3, &[vec![0.0; 3]], &c, &p, &mut r).is_err());
    }

    #[test]
    fn exhausted_budget_freezes_expert() {
        let mut c = cfg(1, 3, 10, 1);
        c.noise = NoiseMode::Disabled;
        let mut p = derive_svt_params(&c).unwrap();
        p.threshold = 0.5;
        let mut r = rng();
        let mut s = SvtServerState::new(&c, &p, 1, &mut r).unwrap();
        s.switches = p.kappa;
        let (e, sw) =
            server_phase_step(&mut s, 1, 1, &[vec![1.0, 0.0, 0.0]], &c, &p, &mut r).unwrap();
        assert_eq!((e, sw), (1, None));
    }

    #[test]
    fn crossing_switches_and_resets_query() {
        let mut c = cfg(2, 2, 10, 1);
        c.noise = NoiseMode::Disabled;
        let mut p = derive_svt_params(&c).unwrap();
        p.threshold = 1.5;
        let mut r = rng();
        let mut s = SvtServerState::new(&c, &p, 1, &mut r).unwrap();
        let (_, sw) = server_phase_step(
            &mut s,
            1,
            1,
            &[vec![0.5, 0.0], vec![0.5, 0.0]],
            &c,
            &p,
            &mut r,
        )
        .unwrap();
        assert!(sw.is_none());
        assert_eq!(s.since_tau, 1.0);
        let (_, sw) = server_phase_step(
            &mut s,
            2,
            2,
            &[vec![0.5, 0.0], vec![0.5, 0.0]],
            &c,
            &p,
            &mut r,
        )
        .unwrap();
        let sw = sw.unwrap();
        assert_eq!((sw.from, sw.decided_at), (1, 2));
        assert_eq!(s.since_tau, 0.0);
        assert_eq!(s.tau, 3);
        assert_eq!(s.tallies, vec![2.0, 0.0]);
    }

    #[test]
    fn comm_is_closed_form() {
        let (l, _) = gen_oblivious_realizable(3, 20, 5, RandomSource::new(1)).unwrap();
        for n in [1, 3, 7, 20, 25] {
            let t = run_fed_svt(&cfg(3, 5, 20, n), &l, &RandomSource::new(2)).unwrap();
            let phases = 20usize.div_ceil(n) as u64;
            assert_eq!(t.comm.total_in(Direction::Uplink), 3 * 5 * phases);
            assert_eq!(t.comm.total_in(Direction::Downlink), 3 * phases);
        }
    }

    #[test]
    fn realizable_zero_noise_finds_optimum() {
        let (l, zero) = gen_oblivious_realizable(10, 512, 100, RandomSource::new(3)).unwrap();
        let mut c = cfg(10, 100, 512, 1);
        c.noise = NoiseMode::Disabled;
        let t = run_fed_svt(&c, &l, &RandomSource::new(4)).unwrap();
        let Actions::Experts(played) = &t.actions else {
            panic!()
        };
        let last = *played.last().unwrap();
        assert!(t.switches.len() <= derive_svt_params(&c).unwrap().kappa);
        if last == zero {
            let when = played.iter().rposition(|e| *e != zero).map_or(0, |r| r + 1);
            for round in &t.regret.incurred()[when..] {
                assert!(round.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn constant_losses_never_switch_with_huge_threshold() {
        let seq = vec![v(&[0.5, 0.5]); 30];
        let l = gen_uniform_oblivious(seq, 2).unwrap();
        let mut c = cfg(2, 2, 30, 5);
        c.l_star = 100.0;
        let t = run_fed_svt(&c, &l, &RandomSource::new(0)).unwrap();
        assert!(t.switches.is_empty());
    }
}
