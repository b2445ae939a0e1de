//! Fed-SVT on a realizable adversary for several phase lengths.

use fedope::adversary::gen_oblivious_realizable;
use fedope::mechanisms::NoiseMode;
use fedope::svt::{derive_svt_params, run_fed_svt, SvtConfig};
use fedope::RandomSource;

fn main() -> fedope::Result<()> {
    let (m, d, rounds) = (10, 100, 512);
    let source = RandomSource::new(1);
    let (losses, zero) = gen_oblivious_realizable(m, rounds, d, source)?;
    println!("expert {zero} has zero loss");
    for (clients, n) in [(1, 1), (10, 1), (10, 30), (10, 50)] {
        let cfg = SvtConfig {
            m: clients,
            d,
            rounds,
            phase_len: n,
            epsilon: 10.0,
            delta: 0.0,
            rho: 0.05,
            l_star: 0.0,
            noise: NoiseMode::Enabled,
        };
        let p = derive_svt_params(&cfg)?;
        let t = run_fed_svt(&cfg, &losses, &source)?;
        let path: Vec<String> = t
            .switches
            .iter()
            .map(|s| format!("{}->{}@{}", s.from, s.to, s.decided_at))
            .collect();
        println!(
            "m = {clients:>2}, N = {n:>2}: regret {:>7.2}, {} scalars, L = {:.1}, switches [{}]",
            t.final_regret(),
            t.comm.total(),
            p.threshold,
            path.join(" ")
        );
    }
    Ok(())
}
