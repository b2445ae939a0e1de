//! Local pure, local approximate and central DP on a cross-entropy adversary.

use fedope::adversary::gen_stochastic_crossentropy;
use fedope::stoch::{derive_params, run_fed_stoch, Schedule, StochConfig, Variant};
use fedope::RandomSource;

fn main() -> fedope::Result<()> {
    let (m, d, rounds) = (8, 10, 4096);
    let source = RandomSource::new(3);
    let stream = gen_stochastic_crossentropy(m, rounds, d, 0.2, source)?;
    for variant in [Variant::Pure, Variant::Approx, Variant::Central] {
        let cfg = StochConfig {
            variant,
            schedule: Schedule::Tuned,
            delta: 1.0 / (rounds as f64 * 10.0),
            ..StochConfig::for_stream(&stream, 5.0)
        };
        let last = derive_params(13, &cfg)?;
        let t = run_fed_stoch(&cfg, &stream, &source)?;
        let paid: f64 = t.regret.incurred().iter().flatten().sum();
        println!(
            "{variant:>7}: mean loss {:.4}, last phase b = {} T1 = {} noise {:.4?}",
            paid / (m * rounds) as f64,
            last.b_eff,
            last.trees,
            last.noise_scales
        );
        for w in &t.warnings {
            println!("         warning: {w}");
        }
    }
    Ok(())
}
