//! One client's tree traversal, printed vertex by vertex, with the server
//! replaced by an exact argmin of the leaf estimate.

use std::sync::Arc;

use fedope::adversary::{gen_stochastic_crossentropy, StochasticStream};
use fedope::dp_fw::{plan_trees, BatchMode, DpFw};
use fedope::{RandomSource, SimplexPoint, StreamTag};

fn main() -> fedope::Result<()> {
    let d = 3;
    let stream = gen_stochastic_crossentropy(1, 16, d, 0.1, RandomSource::new(1))?;
    let dataset = (1..=16)
        .map(|t| stream.loss(0, t))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = Arc::new(plan_trees(2)?);
    println!("{} trees, {} leaves", plan.trees(), plan.leaf_count());

    let fw = DpFw::new(
        dataset,
        plan,
        16,
        SimplexPoint::uniform(d)?,
        BatchMode::Sampled,
    )?
    .with_recording();
    let mut rng = RandomSource::new(1).stream(StreamTag::ClientBatch, &[]);
    let (x, visits) = fw.drive(&mut rng, |leaf| {
        let best = (0..d)
            .min_by(|&a, &b| leaf.v[a].total_cmp(&leaf.v[b]))
            .unwrap()
            + 1;
        println!("  leaf k={} at {} -> vertex {best}", leaf.k, leaf.address);
        Ok(best)
    })?;
    for v in &visits {
        println!(
            "{:>6} {:?} batch {:>2} v = {:.3?}",
            v.address.to_string(),
            v.kind,
            v.batch_len,
            v.v
        );
    }
    println!("final iterate {:.3?}", x.weights());
    Ok(())
}
