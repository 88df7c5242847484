//! Generates a corpus, splits it 3:1 per class and shows what normalisation
//! learned from the training side.
//!
//! cargo run --release --example build_dataset -- [total_samples] [seed]

use osaas_core::dataset::{PROBE_FEATURE_NAMES, PROBE_FEATURES};
use osaas_core::pipeline::{kind_counts, make_datasets, simulate};
use osaas_core::scenarios::{Composition, Label};
use osaas_core::topology::default_config;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let total: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2920);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let composition = if total == 2920 { Composition::default() } else { Composition::scaled(total) };
    let corpus = simulate(&default_config(), &composition, seed)?;
    for (kind, n) in kind_counts(&corpus) {
        println!("{kind:>10} scenarios: {n}");
    }
    for label in Label::ALL {
        println!("{:>14} labels: {}", label.to_string(), corpus.iter().filter(|s| s.label == label).count());
    }

    let (split, train, test) = make_datasets(&corpus, seed)?;
    println!("split {}: {} train / {} test", split.fingerprint(), train.samples.len(), test.samples.len());
    println!("probe 0 feature statistics (training side):");
    for (name, stats) in PROBE_FEATURE_NAMES.iter().zip(&train.norm_params.columns[..PROBE_FEATURES]) {
        println!("  {name:<15} mean {:10.4} std {:8.4}", stats.mean, stats.std);
    }
    let degenerate = train.norm_params.columns.iter().filter(|c| c.degenerate).count();
    println!("{degenerate} of {} columns are constant and map to 0", train.norm_params.columns.len());
    Ok(())
}
