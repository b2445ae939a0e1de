//! The privacy primitives on their own.

use fedope::mechanisms::{
    exponential_sample, exponential_weights, laplace_sample, noisy_avg_argmin, report_noisy_min,
    AboveThreshold, NoiseMode,
};
use fedope::{RandomSource, StreamTag};

fn main() -> fedope::Result<()> {
    let mut rng = RandomSource::new(7).stream(StreamTag::Custom(0), &[]);

    let draws: Vec<f64> = (0..5)
        .map(|_| laplace_sample(1.0, &mut rng))
        .collect::<Result<_, _>>()?;
    println!("Lap(1) draws: {draws:.3?}");

    let scores = [0.9, 0.2, 0.5, 0.4];
    println!(
        "report-noisy-min over {scores:?}: expert {}",
        report_noisy_min(&scores, 0.05, &mut rng)?
    );

    let rows = vec![vec![1.0, 2.0], vec![3.0, 0.0]];
    println!(
        "noisy average argmin of {rows:?}: expert {}",
        noisy_avg_argmin(&rows, 0.0, &mut rng)?
    );

    let eta = 0.5;
    let cumulative = [10.0, 2.0, 4.0, 12.0];
    let w = exponential_weights(&cumulative, eta)?;
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|v| v / total).collect();
    println!("exponential mechanism probabilities: {probs:.3?}");
    println!(
        "sampled: expert {}",
        exponential_sample(&cumulative, eta, &mut rng)?
    );

    let mut at = AboveThreshold::new(20.0, 1.0, NoiseMode::Enabled, &mut rng)?;
    for q in [2.0, 8.0, 15.0, 40.0] {
        println!(
            "AboveThreshold(L = 20) on q = {q}: {:?}",
            at.query(q, &mut rng)?
        );
        if at.is_halted() {
            break;
        }
    }
    Ok(())
}
