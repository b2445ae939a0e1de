//! The lower-bound sequences: zero loss until the last k rounds, then every
//! expert but one pays 1.

use fedope::adversary::{gen_lowerbound_sequence, lower_bound_tail};
use fedope::mechanisms::NoiseMode;
use fedope::svt::{run_fed_svt, SvtConfig};
use fedope::RandomSource;

fn main() -> fedope::Result<()> {
    let (d, rounds, epsilon) = (64, 256, 0.05);
    for m in [1, 4, 16] {
        let k = lower_bound_tail(d, m, epsilon);
        let mut total = 0.0;
        for j in 1..=d {
            let losses = gen_lowerbound_sequence(d, m, rounds, epsilon, j)?;
            let cfg = SvtConfig {
                m,
                d,
                rounds,
                phase_len: 1,
                epsilon,
                delta: 0.0,
                rho: 0.05,
                l_star: 0.0,
                noise: NoiseMode::Enabled,
            };
            total += run_fed_svt(&cfg, &losses, &RandomSource::new(j as u64))?.final_regret();
        }
        println!(
            "m = {m:>2}: k = {k:>2}, regret averaged over the {d} sequences {:.2}",
            total / d as f64
        );
    }
    Ok(())
}
