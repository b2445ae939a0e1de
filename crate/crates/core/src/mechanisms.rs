//! Differential-privacy primitives: Laplace noise, report-noisy-min,
//! AboveThreshold (sparse vector) and exponential sampling.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Whether a mechanism draws its noise or runs as an exact comparator.
///
/// `Disabled` exists so algorithm logic can be tested deterministically;
/// production runs always use `Enabled`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Enabled,
    Disabled,
}

impl NoiseMode {
    pub fn is_enabled(self) -> bool {
        self == NoiseMode::Enabled
    }
}

/// One draw from `Lap(scale)` (density `e^{−|x|/scale} / (2·scale)`).
pub fn laplace_sample(scale: f64, rng: &mut Rng) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!(
            "Laplace scale must be positive and finite, got {scale}"
        )));
    }
    Ok(laplace_unchecked(scale, rng))
}

/// Laplace draw for an already-validated scale; a zero scale yields zero
/// without consuming randomness.
pub(crate) fn laplace_unchecked(scale: f64, rng: &mut Rng) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    // |X| ~ Exp(1/scale); 1 − U lies in (0, 1] so the log is finite.
    let magnitude = -(1.0 - rng.random::<f64>()).ln() * scale;
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

fn check_noise_scale(scale: f64) -> Result<()> {
    if scale >= 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "noise scale must be nonnegative and finite, got {scale}"
        )))
    }
}

/// 1-indexed argmin, lowest index on ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best + 1
}

/// Adds independent `Lap(per_row_noise_scale)` to each of the `m·d` entries,
/// averages the columns over rows and returns the (1-indexed) argmin column.
pub fn noisy_avg_argmin(
    score_rows: &[Vec<f64>],
    per_row_noise_scale: f64,
    rng: &mut Rng,
) -> Result<usize> {
    check_noise_scale(per_row_noise_scale)?;
    let d = score_rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::shape("no score rows"))?;
    if d == 0 {
        return Err(Error::shape("score rows are empty"));
    }
    let mut means = vec![0.0; d];
    for (i, row) in score_rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::shape(format!(
                "row {} has {} scores, expected {}",
                i + 1,
                row.len(),
                d
            )));
        }
        for (acc, s) in means.iter_mut().zip(row) {
            *acc += s + laplace_unchecked(per_row_noise_scale, rng);
        }
    }
    let m = score_rows.len() as f64;
    means.iter_mut().for_each(|v| *v /= m);
    Ok(argmin(&means))
}

/// Report-noisy-min: adds `Lap(scale)` to each score and returns the
/// 1-indexed argmin.
pub fn report_noisy_min(scores: &[f64], scale: f64, rng: &mut Rng) -> Result<usize> {
    check_noise_scale(scale)?;
    if scores.is_empty() {
        return Err(Error::param("no scores"));
    }
    let noisy: Vec<f64> = scores
        .iter()
        .map(|s| s + laplace_unchecked(scale, rng))
        .collect();
    Ok(argmin(&noisy))
}

/// Samples a 1-indexed expert with `P(n) ∝ exp(−eta·scores[n]/2)`.
///
/// Scores are shifted by their minimum before exponentiation; they grow with
/// cumulative loss and would otherwise underflow.
pub fn exponential_sample(scores: &[f64], eta: f64, rng: &mut Rng) -> Result<usize> {
    let weights = exponential_weights(scores, eta)?;
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return Ok(i + 1);
        }
        u -= w;
    }
    // u landed on the rounding slack above the last positive weight.
    Ok(weights.iter().rposition(|w| *w > 0.0).unwrap_or(0) + 1)
}

/// Unnormalized, min-shifted weights `exp(−eta·(s_n − min s)/2)`.
pub fn exponential_weights(scores: &[f64], eta: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::param("no scores to sample from"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param(format!(
            "sampling parameter eta must be positive, got {eta}"
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::param(format!("non-finite score {s}")));
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(scores
        .iter()
        .map(|s| (-eta * (s - min) / 2.0).exp())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdAnswer {
    Below,
    Above,
}

/// AboveThreshold over a stream of sensitivity-1 queries.
///
/// The noisy threshold is `L̂ = L + Lap(4/ε)`; each query draws
/// `γ = Lap(8/ε)` and answers `Below` iff `q + γ ≤ L̂`. The first `Above` halts
/// the state until [`AboveThreshold::reset`] redraws `L̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AboveThreshold {
    threshold: f64,
    epsilon: f64,
    noisy_threshold: f64,
    halted: bool,
    noise: NoiseMode,
}

impl AboveThreshold {
    pub fn new(threshold: f64, epsilon: f64, noise: NoiseMode, rng: &mut Rng) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !threshold.is_finite() {
            return Err(Error::param(format!("threshold {threshold} is not finite")));
        }
        let mut state = Self {
            threshold,
            epsilon,
            noisy_threshold: threshold,
            halted: false,
            noise,
        };
        state.reset(rng);
        Ok(state)
    }

    /// Redraws `L̂` and clears the halted flag.
    pub fn reset(&mut self, rng: &mut Rng) {
        self.noisy_threshold = self.threshold + self.draw(4.0 / self.epsilon, rng);
        self.halted = false;
    }

    pub fn query(&mut self, q: f64, rng: &mut Rng) -> Result<ThresholdAnswer> {
        if self.halted {
            return Err(Error::State(
                "AboveThreshold queried after halting; reset first".into(),
            ));
        }
        let gamma = self.draw(8.0 / self.epsilon, rng);
        if q + gamma <= self.noisy_threshold {
            Ok(ThresholdAnswer::Below)
        } else {
            self.halted = true;
            Ok(ThresholdAnswer::Above)
        }
    }

    fn draw(&self, scale: f64, rng: &mut Rng) -> f64 {
        if self.noise.is_enabled() {
            laplace_unchecked(scale, rng)
        } else {
            0.0
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn noisy_threshold(&self) -> f64 {
        self.noisy_threshold
    }
}

/// Accuracy band of AboveThreshold over `queries` queries at failure
/// probability `rho`: `8(ln T + ln(2/ρ))/ε`.
pub fn above_threshold_band(queries: usize, rho: f64, epsilon: f64) -> f64 {
    8.0 * ((queries as f64).ln() + (2.0 / rho).ln()) / epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomSource, Rng, StreamTag};
    use proptest::prelude::*;

    fn rng(seed: u64) -> Rng {
        RandomSource::new(seed).stream(StreamTag::Custom(1), &[])
    }

    #[test]
    fn laplace_rejects_degenerate_scale() {
        let mut r = rng(0);
        assert!(matches!(
            laplace_sample(0.0, &mut r),
            Err(Error::Parameter(_))
        ));
        assert!(laplace_sample(-1.0, &mut r).is_err());
        assert!(laplace_sample(f64::INFINITY, &mut r).is_err());
    }

    #[test]
    fn laplace_mean_near_zero() {
        let mut r = rng(1);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| laplace_sample(2.0, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        // Variance 2·scale² = 8.
        assert!(mean.abs() <= 3.0 * (8.0 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn laplace_median_of_magnitude() {
        // P(|X| > λ ln 2) = e^{−ln 2} = 1/2.
        let mut r = rng(2);
        let lambda = 1.7;
        let n = 100_000;
        let cut = lambda * std::f64::consts::LN_2;
        let frac = (0..n)
            .filter(|_| laplace_sample(lambda, &mut r).unwrap().abs() > cut)
            .count() as f64
            / n as f64;
        assert!((frac - 0.5).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn above_threshold_zero_noise() {
        let mut r = rng(3);
        let mut at = AboveThreshold::new(5.0, 1.0, NoiseMode::Disabled, &mut r).unwrap();
        assert_eq!(at.query(1.0, &mut r).unwrap(), ThresholdAnswer::Below);
        assert_eq!(at.query(2.0, &mut r).unwrap(), ThresholdAnswer::Below);
        assert_eq!(at.query(6.0, &mut r).unwrap(), ThresholdAnswer::Above);
        assert!(at.is_halted());
        assert!(matches!(at.query(0.0, &mut r), Err(Error::State(_))));
        at.reset(&mut r);
        assert!(!at.is_halted());
        assert_eq!(at.noisy_threshold(), 5.0);
    }

    #[test]
    fn above_threshold_tie_is_below() {
        let mut r = rng(4);
        let mut at = AboveThreshold::new(5.0, 1.0, NoiseMode::Disabled, &mut r).unwrap();
        assert_eq!(at.query(5.0, &mut r).unwrap(), ThresholdAnswer::Below);
    }

    #[test]
    fn exponential_single_outcome() {
        let mut r = rng(5);
        for _ in 0..100 {
            assert_eq!(exponential_sample(&[3.0], 1.0, &mut r).unwrap(), 1);
        }
        assert!(exponential_sample(&[], 1.0, &mut r).is_err());
        assert!(exponential_sample(&[1.0], 0.0, &mut r).is_err());
    }

    fn empirical(scores: &[f64], eta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        let mut counts = vec![0usize; scores.len()];
        for _ in 0..n {
            counts[exponential_sample(scores, eta, &mut r).unwrap() - 1] += 1;
        }
        counts.into_iter().map(|c| c as f64 / n as f64).collect()
    }

    fn total_variation(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    #[test]
    fn exponential_uniform_when_scores_equal() {
        let p = empirical(&[0.3; 5], 1.0, 100_000, 6);
        assert!(total_variation(&p, &[0.2; 5]) <= 0.02);
    }

    #[test]
    fn exponential_closed_form_two_outcomes() {
        // Weights e^0 = 1 and e^{−ln 4} = 1/4 -> (0.8, 0.2).
        let p = empirical(&[0.0, 4f64.ln()], 2.0, 100_000, 7);
        assert!(
            (p[0] - 0.8).abs() <= 0.01 && (p[1] - 0.2).abs() <= 0.01,
            "{p:?}"
        );
    }

    #[test]
    fn exponential_shift_invariance() {
        let s = [0.5, 1.5, 3.0, 0.0];
        let shifted: Vec<f64> = s.iter().map(|v| v + 1e4).collect();
        let a = empirical(&s, 1.3, 100_000, 8);
        let b = empirical(&shifted, 1.3, 100_000, 9);
        assert!(total_variation(&a, &b) <= 0.01);
    }

    #[test]
    fn exponential_survives_huge_scores() {
        let mut r = rng(10);
        let n = exponential_sample(&[1e6, 1e6 + 1e3, 1e6 + 2e3], 1.0, &mut r).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn noisy_avg_argmin_exact_cases() {
        let mut r = rng(11);
        let rows = vec![vec![1.0, 2.0], vec![3.0, 0.0]];
        assert_eq!(noisy_avg_argmin(&rows, 0.0, &mut r).unwrap(), 2);
        assert_eq!(noisy_avg_argmin(&[vec![1.0, 1.0]], 0.0, &mut r).unwrap(), 1);
        assert_eq!(
            noisy_avg_argmin(&[vec![5.0, 3.0, 4.0]], 0.0, &mut r).unwrap(),
            2
        );
    }

    #[test]
    fn noisy_avg_argmin_shape_errors() {
        let mut r = rng(12);
        let ragged = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            noisy_avg_argmin(&ragged, 0.0, &mut r),
            Err(Error::Shape(_))
        ));
        assert!(noisy_avg_argmin(&[], 0.0, &mut r).is_err());
        assert!(noisy_avg_argmin(&[vec![1.0]], -1.0, &mut r).is_err());
    }

    proptest! {
        #[test]
        fn noiseless_argmin_matches_column_means(
            rows in (1usize..6, 1usize..9).prop_flat_map(|(m, d)| {
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), m)
            })
        ) {
            let mut r = rng(13);
            let d = rows[0].len();
            let means: Vec<f64> = (0..d)
                .map(|n| rows.iter().map(|row| row[n]).sum::<f64>() / rows.len() as f64)
                .collect();
            let mut best = 0;
            for n in 1..d {
                if means[n] < means[best] {
                    best = n;
                }
            }
            prop_assert_eq!(noisy_avg_argmin(&rows, 0.0, &mut r).unwrap(), best + 1);
        }
    }
}
