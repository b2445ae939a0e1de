//! Federated vs single-client Frank-Wolfe on a linear stochastic adversary.

use fedope::adversary::gen_stochastic_linear;
use fedope::ledger::Direction;
use fedope::stoch::{run_fed_stoch, StochConfig};
use fedope::RandomSource;

fn main() -> fedope::Result<()> {
    let (d, rounds, epsilon) = (100, 1 << 14, 10.0);
    for m in [1, 10] {
        let source = RandomSource::new(0);
        let stream = gen_stochastic_linear(m, rounds, d, source)?;
        let cfg = StochConfig::for_stream(&stream, epsilon);
        let t = run_fed_stoch(&cfg, &stream, &source)?;
        println!(
            "m = {m:>2}: per-client regret {:>7.3}, uplink {:>6} scalars, downlink {:>5}",
            t.final_regret(),
            t.comm.total_in(Direction::Uplink),
            t.comm.total_in(Direction::Downlink),
        );
    }
    Ok(())
}
