//! Multi-trial experiments, CSV output and summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    gen_lowerbound_sequence, gen_oblivious_realizable, gen_stochastic_crossentropy,
    gen_stochastic_linear, ingest_ratings_csv, lower_bound_tail, materialize_linear, LossStream,
    RatingsLosses, DEFAULT_XENT_GAMMA,
};
use crate::dp_fw::BatchMode;
use crate::error::{Error, Result};
use crate::mechanisms::NoiseMode;
use crate::rng::{RandomSource, StreamTag};
use crate::stoch::{derive_params, phase_schedule, run_fed_stoch, Schedule, StochConfig, Variant};
use crate::svt::{derive_svt_params, run_fed_svt, SvtConfig, DEFAULT_RHO};
use crate::transcript::{Algorithm, Transcript};

pub const CSV_HEADER: &str = "algorithm,variant,m,d,T,seed,t,regret,comm_scalars";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryKind {
    Linear,
    Xent,
    Realizable,
    Lowerbound,
    Ratings,
}

/// Experiment settings as they appear in a JSON config file or on the
/// command line; every field is optional so the two can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigLayer {
    /// Number of clients.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of experts.
    #[arg(long)]
    pub d: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Failure probability for the switching budget (svt).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// Batch/tree schedule for the pure variant (stoch).
    #[arg(long, value_enum)]
    pub schedule: Option<Schedule>,
    /// Phase length (svt).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub phase_len: Option<usize>,
    /// Bound on the best expert's loss (svt).
    #[arg(long = "L-star")]
    #[serde(rename = "L-star")]
    pub l_star: Option<f64>,
    #[arg(long, value_enum)]
    pub adversary: Option<AdversaryKind>,
    #[arg(long)]
    pub ratings_path: Option<PathBuf>,
    /// Cross-entropy smoothing.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also run the single-client baseline and include it in the output.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub baseline: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary_json: Option<PathBuf>,
}

impl ConfigLayer {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigLayer) -> ConfigLayer {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigLayer { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            m,
            d,
            rounds,
            eps,
            delta,
            rho,
            variant,
            schedule,
            phase_len,
            l_star,
            adversary,
            ratings_path,
            gamma,
            trials,
            seed,
            baseline,
            out,
            summary_json
        )
    }
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub adversary: AdversaryKind,
    pub ratings_path: Option<PathBuf>,
    pub m: usize,
    pub d: usize,
    pub rounds: usize,
    pub phase_len: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    pub variant: Variant,
    pub schedule: Schedule,
    pub l_star: Option<f64>,
    pub gamma: f64,
    pub trials: usize,
    pub seed: u64,
    pub baseline: bool,
    pub out: Option<PathBuf>,
    pub summary_json: Option<PathBuf>,
    #[serde(skip)]
    pub noise: NoiseMode,
    #[serde(skip)]
    ratings: Option<Arc<RatingsLosses>>,
}

impl ExperimentConfig {
    /// Fills defaults (m = 10, d = 100, ε = 10) and validates everything that
    /// can be checked before running.
    pub fn resolve(algorithm: Algorithm, layer: ConfigLayer) -> Result<Self> {
        let adversary = layer.adversary.unwrap_or(match algorithm {
            Algorithm::FedStoch => AdversaryKind::Linear,
            Algorithm::FedSvt => AdversaryKind::Realizable,
        });
        let ratings = match adversary {
            AdversaryKind::Ratings => {
                let path = layer
                    .ratings_path
                    .as_ref()
                    .ok_or_else(|| Error::config("--adversary ratings needs --ratings-path"))?;
                Some(Arc::new(ingest_ratings_csv(path)?))
            }
            _ => None,
        };
        let (data_rounds, data_dim) = ratings.as_ref().map_or((None, None), |r| {
            (Some(r.sequence.len()), Some(r.experts.len()))
        });
        let d = match (layer.d, data_dim) {
            (Some(d), Some(k)) if d != k => {
                return Err(Error::config(format!(
                    "--d {d} but the ratings file has {k} experts"
                )))
            }
            (d, k) => d.or(k).unwrap_or(100),
        };
        let rounds = match (layer.rounds, data_rounds) {
            (Some(t), Some(k)) if t > k => {
                return Err(Error::config(format!(
                    "--T {t} but the ratings file has {k} rows"
                )))
            }
            (t, k) => t.or(k).unwrap_or(match algorithm {
                Algorithm::FedStoch => 1 << 14,
                Algorithm::FedSvt => 512,
            }),
        };
        let cfg = Self {
            algorithm,
            adversary,
            ratings_path: layer.ratings_path,
            m: layer.m.unwrap_or(10),
            d,
            rounds,
            phase_len: layer.phase_len.unwrap_or(1),
            epsilon: layer.eps.unwrap_or(10.0),
            delta: layer.delta.unwrap_or(0.0),
            rho: layer.rho.unwrap_or(DEFAULT_RHO),
            variant: layer.variant.unwrap_or_default(),
            schedule: layer.schedule.unwrap_or_default(),
            l_star: layer.l_star,
            gamma: layer.gamma.unwrap_or(DEFAULT_XENT_GAMMA),
            trials: layer.trials.unwrap_or(1),
            seed: layer.seed.unwrap_or(0),
            baseline: layer.baseline.unwrap_or(false),
            out: layer.out,
            summary_json: layer.summary_json,
            noise: NoiseMode::Enabled,
            ratings,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("--m must be at least 1"));
        }
        if self.d < 2 {
            return Err(Error::config(format!(
                "--d must be at least 2, got {}",
                self.d
            )));
        }
        if self.rounds == 0 {
            return Err(Error::config("--T must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("--trials must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!(
                "--eps must be positive, got {}",
                self.epsilon
            )));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::config(format!(
                "--delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!(
                "--gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.adversary == AdversaryKind::Lowerbound
            && lower_bound_tail(self.d, self.m, self.epsilon) > self.rounds
        {
            return Err(Error::config(format!(
                "lower-bound tail k = {} exceeds --T {}",
                lower_bound_tail(self.d, self.m, self.epsilon),
                self.rounds
            )));
        }
        match self.algorithm {
            Algorithm::FedStoch => {
                let stoch = self.stoch_config(self.m, 1.0, 0.0);
                stoch.validate()?;
                let plan = phase_schedule(self.rounds)?;
                for phase in plan.phases.iter().filter(|p| p.index >= 2) {
                    derive_params(phase.index, &stoch)?;
                }
            }
            Algorithm::FedSvt => {
                if self.variant == Variant::Central {
                    return Err(Error::config("fed-svt has no central variant"));
                }
                if self.variant == Variant::Approx && self.delta == 0.0 {
                    return Err(Error::config("--variant approx needs --delta > 0"));
                }
                if self.adversary == AdversaryKind::Xent {
                    return Err(Error::config(
                        "fed-svt needs per-expert loss vectors; the xent adversary is not supported",
                    ));
                }
                if self.phase_len == 0 {
                    return Err(Error::config("--N must be at least 1"));
                }
                let l_star = self.svt_l_star()?;
                derive_svt_params(&self.svt_config(self.m, self.phase_len, l_star))
                    .map_err(|e| Error::config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Overrides the mechanism noise (deterministic test runs).
    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn variant_label(&self) -> String {
        self.variant.to_string()
    }

    fn svt_l_star(&self) -> Result<f64> {
        match (self.l_star, self.adversary) {
            (Some(l), _) => Ok(l),
            (
                None,
                AdversaryKind::Realizable | AdversaryKind::Lowerbound | AdversaryKind::Ratings,
            ) => Ok(0.0),
            (None, _) => Err(Error::config(
                "this adversary has no known optimum; pass --L-star",
            )),
        }
    }

    fn stoch_config(&self, m: usize, alpha: f64, beta: f64) -> StochConfig {
        StochConfig {
            m,
            d: self.d,
            rounds: self.rounds,
            variant: self.variant,
            schedule: self.schedule,
            epsilon: self.epsilon,
            delta: self.delta,
            alpha,
            beta,
            noise: self.noise,
            batch_mode: BatchMode::Sampled,
        }
    }

    fn svt_config(&self, m: usize, phase_len: usize, l_star: f64) -> SvtConfig {
        SvtConfig {
            m,
            d: self.d,
            rounds: self.rounds,
            phase_len,
            epsilon: self.epsilon,
            delta: if self.variant == Variant::Approx {
                self.delta
            } else {
                0.0
            },
            rho: self.rho,
            l_star,
            noise: self.noise,
        }
    }

    /// The loss stream for one trial. Depends on the seed and on `m` only
    /// through the number of clients generated.
    pub fn build_stream(&self, m: usize, source: &RandomSource) -> Result<LossStream> {
        let (t, d) = (self.rounds, self.d);
        Ok(match self.adversary {
            AdversaryKind::Linear => {
                LossStream::Stochastic(Arc::new(gen_stochastic_linear(m, t, d, *source)?))
            }
            AdversaryKind::Xent => LossStream::Stochastic(Arc::new(gen_stochastic_crossentropy(
                m, t, d, self.gamma, *source,
            )?)),
            AdversaryKind::Realizable => {
                LossStream::Oblivious(Arc::new(gen_oblivious_realizable(m, t, d, *source)?.0))
            }
            AdversaryKind::Lowerbound => {
                let j = source
                    .stream(StreamTag::Adversary, &[5])
                    .random_range(1..=d);
                LossStream::Oblivious(Arc::new(gen_lowerbound_sequence(d, m, t, self.epsilon, j)?))
            }
            AdversaryKind::Ratings => {
                let data = self
                    .ratings
                    .as_ref()
                    .ok_or_else(|| Error::config("ratings data not loaded"))?;
                let mut sequence = data.sequence.clone();
                sequence.truncate(t);
                LossStream::Oblivious(Arc::new(crate::adversary::gen_uniform_oblivious(
                    sequence, m,
                )?))
            }
        })
    }

    /// One trial of the federated arm (`single = false`) or of the
    /// single-client baseline.
    pub fn run_trial(&self, trial: usize, single: bool) -> Result<Transcript> {
        let source = RandomSource::for_trial(self.seed, trial as u64);
        let m = if single { 1 } else { self.m };
        let stream = self.build_stream(m, &source)?;
        match self.algorithm {
            Algorithm::FedStoch => {
                let s = stream.as_stochastic();
                run_fed_stoch(
                    &self.stoch_config(m, s.alpha(), s.beta()),
                    s.as_ref(),
                    &source,
                )
            }
            Algorithm::FedSvt => {
                let losses = match (&stream, self.adversary) {
                    (LossStream::Stochastic(_), AdversaryKind::Linear) => {
                        let linear = gen_stochastic_linear(m, self.rounds, self.d, source)?;
                        Arc::new(materialize_linear(&linear)?)
                    }
                    _ => stream.as_oblivious()?,
                };
                let phase_len = if single { 1 } else { self.phase_len };
                let cfg = self.svt_config(m, phase_len, self.svt_l_star()?);
                run_fed_svt(&cfg, &losses, &source)
            }
        }
    }
}

/// Transcripts of one arm of an experiment, in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub label: String,
    pub m: usize,
    pub seeds: Vec<u64>,
    pub transcripts: Vec<Transcript>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_regret_mean: f64,
    pub final_regret_std: f64,
    pub total_comm_scalars: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switches: Option<Vec<usize>>,
}

impl ArmResult {
    pub fn final_regrets(&self) -> Vec<f64> {
        self.transcripts
            .iter()
            .map(Transcript::final_regret)
            .collect()
    }

    /// Mean and sample standard deviation of the final regret; communication
    /// summed over trials.
    pub fn summary(&self) -> Summary {
        let (mean, std) = mean_std(&self.final_regrets());
        let algorithm = self.transcripts.first().map(|t| t.algorithm);
        Summary {
            final_regret_mean: mean,
            final_regret_std: std,
            total_comm_scalars: self.transcripts.iter().map(|t| t.comm.total()).sum(),
            switches: (algorithm == Some(Algorithm::FedSvt))
                .then(|| self.transcripts.iter().map(|t| t.switches.len()).collect()),
        }
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub arms: Vec<ArmResult>,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn main_arm(&self) -> &ArmResult {
        &self.arms[0]
    }

    pub fn baseline_arm(&self) -> Option<&ArmResult> {
        self.arms.get(1)
    }
}

fn run_arm(cfg: &ExperimentConfig, single: bool) -> Result<ArmResult> {
    let results: Vec<Result<Transcript>> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| cfg.run_trial(k, single))
        .collect();
    let seeds: Vec<u64> = (0..cfg.trials as u64)
        .map(|k| cfg.seed.wrapping_add(k))
        .collect();
    let mut transcripts = Vec::with_capacity(cfg.trials);
    for (seed, r) in seeds.iter().zip(results) {
        transcripts.push(r.map_err(|e| Error::Trial {
            seed: *seed,
            source: Box::new(e),
        })?);
    }
    Ok(ArmResult {
        label: if single {
            "single".into()
        } else {
            cfg.variant_label()
        },
        m: if single { 1 } else { cfg.m },
        seeds,
        transcripts,
    })
}

/// Runs every trial (in parallel) and, if requested, the single-client baseline.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut arms = vec![run_arm(cfg, false)?];
    if cfg.baseline {
        arms.push(run_arm(cfg, true)?);
    }
    let mut warnings: Vec<String> = Vec::new();
    for t in arms.iter().flat_map(|a| &a.transcripts) {
        for w in &t.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        arms,
        warnings,
    })
}

/// Decimal rendering with `digits` significant digits, trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            "0".into()
        } else {
            x.to_string()
        };
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.truncate(s.trim_end_matches('0').trim_end_matches('.').len());
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Writes one row per (arm, trial, round).
pub fn write_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let cfg = &result.config;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))
        .map_err(|e| Error::Io(e.into()))?;
    for arm in &result.arms {
        for (seed, t) in arm.seeds.iter().zip(&arm.transcripts) {
            let comm = t.comm_series();
            for (i, regret) in t.regret.cumulative().iter().enumerate() {
                w.write_record([
                    cfg.algorithm.label().to_string(),
                    arm.label.clone(),
                    arm.m.to_string(),
                    cfg.d.to_string(),
                    t.rounds.to_string(),
                    seed.to_string(),
                    (i + 1).to_string(),
                    format_significant(*regret, 12),
                    comm[i].to_string(),
                ])
                .map_err(|e| Error::Io(e.into()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_csv(result, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    #[serde(flatten)]
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Summary>,
}

pub fn summary_report(result: &ExperimentResult) -> SummaryReport {
    SummaryReport {
        summary: result.main_arm().summary(),
        baseline: result.baseline_arm().map(ArmResult::summary),
    }
}

pub fn emit_summary_json(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &summary_report(result))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer() -> ConfigLayer {
        ConfigLayer {
            m: Some(2),
            d: Some(4),
            rounds: Some(20),
            trials: Some(2),
            ..Default::default()
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(-0.0, 12), "0");
        assert_eq!(format_significant(1.5, 12), "1.5");
        assert_eq!(format_significant(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_significant(123456.7890123456, 12), "123456.789012");
        assert_eq!(format_significant(-2.0, 12), "-2");
        assert_eq!(format_significant(1e-5 / 3.0, 12), "0.00000333333333333");
    }

    #[test]
    fn overlay_prefers_later_layer() {
        let file = ConfigLayer {
            m: Some(3),
            eps: Some(1.0),
            ..Default::default()
        };
        let cli = ConfigLayer {
            m: Some(5),
            ..Default::default()
        };
        let merged = file.overlay(cli);
        assert_eq!(merged.m, Some(5));
        assert_eq!(merged.eps, Some(1.0));
    }

    #[test]
    fn json_layer_uses_flag_names() {
        let l: ConfigLayer = serde_json::from_str(
            r#"{"T": 64, "N": 4, "L-star": 0.5, "summary-json": "s.json", "variant": "approx"}"#,
        )
        .unwrap();
        assert_eq!(l.rounds, Some(64));
        assert_eq!(l.phase_len, Some(4));
        assert_eq!(l.l_star, Some(0.5));
        assert_eq!(l.variant, Some(Variant::Approx));
        assert!(serde_json::from_str::<ConfigLayer>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn resolve_defaults_match_presets() {
        let c = ExperimentConfig::resolve(Algorithm::FedStoch, ConfigLayer::default()).unwrap();
        assert_eq!((c.m, c.d, c.rounds, c.epsilon), (10, 100, 1 << 14, 10.0));
        let s = ExperimentConfig::resolve(Algorithm::FedSvt, ConfigLayer::default()).unwrap();
        assert_eq!((s.rounds, s.adversary), (512, AdversaryKind::Realizable));
    }

    #[test]
    fn resolve_rejects_bad_configs() {
        let bad = [
            ConfigLayer {
                m: Some(0),
                ..layer()
            },
            ConfigLayer {
                eps: Some(0.0),
                ..layer()
            },
            ConfigLayer {
                trials: Some(0),
                ..layer()
            },
            ConfigLayer {
                rho: Some(0.6),
                ..layer()
            },
        ];
        for l in bad {
            let e = ExperimentConfig::resolve(Algorithm::FedSvt, l).unwrap_err();
            assert!(e.is_configuration(), "{e}");
        }
        let approx = ConfigLayer {
            variant: Some(Variant::Approx),
            delta: Some(0.5),
            ..layer()
        };
        assert!(ExperimentConfig::resolve(Algorithm::FedStoch, approx)
            .unwrap_err()
            .is_configuration());
        let xent_svt = ConfigLayer {
            adversary: Some(AdversaryKind::Xent),
            ..layer()
        };
        assert!(ExperimentConfig::resolve(Algorithm::FedSvt, xent_svt).is_err());
        let no_path = ConfigLayer {
            adversary: Some(AdversaryKind::Ratings),
            ..layer()
        };
        assert!(ExperimentConfig::resolve(Algorithm::FedStoch, no_path)
            .unwrap_err()
            .is_configuration());
    }

    #[test]
    fn single_trial_has_zero_std() {
        let c = ExperimentConfig::resolve(
            Algorithm::FedStoch,
            ConfigLayer {
                trials: Some(1),
                ..layer()
            },
        )
        .unwrap();
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.main_arm().summary().final_regret_std, 0.0);
    }

    #[test]
    fn csv_rows_and_determinism() {
        let c = ExperimentConfig::resolve(
            Algorithm::FedSvt,
            ConfigLayer {
                phase_len: Some(3),
                ..layer()
            },
        )
        .unwrap();
        let r1 = run_experiment(&c).unwrap();
        let r2 = run_experiment(&c).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&r1, &mut a).unwrap();
        write_csv(&r2, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 2 * 20);
        assert_eq!(r1.main_arm().summary(), r2.main_arm().summary());
    }

    #[test]
    fn baseline_arm_is_single_client() {
        let c = ExperimentConfig::resolve(
            Algorithm::FedStoch,
            ConfigLayer {
                baseline: Some(true),
                ..layer()
            },
        )
        .unwrap();
        let r = run_experiment(&c).unwrap();
        let b = r.baseline_arm().unwrap();
        assert_eq!((b.label.as_str(), b.m), ("single", 1));
        assert_eq!(b.transcripts[0].clients, 1);
    }
}
