//! A seeded multi-trial experiment with a single-client baseline, written as CSV.

use fedope::harness::{
    emit_csv, run_experiment, summary_report, AdversaryKind, ConfigLayer, ExperimentConfig,
};
use fedope::Algorithm;

fn main() -> fedope::Result<()> {
    let layer = ConfigLayer {
        m: Some(10),
        d: Some(100),
        rounds: Some(4096),
        eps: Some(10.0),
        adversary: Some(AdversaryKind::Linear),
        trials: Some(4),
        seed: Some(42),
        baseline: Some(true),
        ..Default::default()
    };
    let cfg = ExperimentConfig::resolve(Algorithm::FedStoch, layer)?;
    let result = run_experiment(&cfg)?;
    let out = std::env::temp_dir().join("fedope-experiment.csv");
    emit_csv(&result, &out)?;
    println!("wrote {}", out.display());
    println!(
        "{}",
        serde_json::to_string_pretty(&summary_report(&result))?
    );
    Ok(())
}
