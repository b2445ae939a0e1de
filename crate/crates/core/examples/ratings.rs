//! Turning a users × genres ratings matrix into a loss sequence.
//!
//! Pass a CSV path, or run without arguments to use a small generated matrix.

use std::io::Write;

use fedope::adversary::ingest_ratings_csv;
use fedope::mechanisms::NoiseMode;
use fedope::svt::{run_fed_svt, SvtConfig};
use fedope::RandomSource;

fn main() -> fedope::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let path = std::env::temp_dir().join("fedope-ratings-example.csv");
            let mut f = std::fs::File::create(&path)?;
            writeln!(f, "action,comedy,drama,horror")?;
            for u in 0..200u32 {
                writeln!(
                    f,
                    "{},{},{},{}",
                    2 + u % 3,
                    3 + u % 2,
                    1 + u % 5,
                    1 + (u * 7) % 4
                )?;
            }
            path
        }
    };
    let ratings = ingest_ratings_csv(&path)?;
    println!(
        "{} users, best genre '{}' (column {})",
        ratings.sequence.len(),
        ratings.experts[ratings.best_column - 1],
        ratings.best_column
    );

    let m = 5;
    let rounds = ratings.sequence.len();
    let d = ratings.experts.len();
    let losses = ratings.into_stream(m)?;
    let cfg = SvtConfig {
        m,
        d,
        rounds,
        phase_len: 10,
        epsilon: 10.0,
        delta: 0.0,
        rho: 0.05,
        l_star: 0.0,
        noise: NoiseMode::Enabled,
    };
    let t = run_fed_svt(&cfg, &losses, &RandomSource::new(0))?;
    println!(
        "fed-svt regret {:.3} with {} switches",
        t.final_regret(),
        t.switches.len()
    );
    Ok(())
}
