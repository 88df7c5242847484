//! Trains the CNN and the MLP baseline on one split and prints the
//! precision/recall comparison.
//!
//! cargo run --release --example train_and_compare -- [epochs] [total_samples]

use std::time::Instant;

use osaas_core::pipeline::{evaluate, make_datasets, report, simulate, train_model, ModelKind, SeedSet};
use osaas_core::scenarios::Composition;
use osaas_core::topology::default_config;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let total: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2920);
    let seeds = SeedSet::from_master(0);

    let composition = if total == 2920 { Composition::default() } else { Composition::scaled(total) };
    let corpus = simulate(&default_config(), &composition, seeds.corpus)?;
    let (_, train, test) = make_datasets(&corpus, seeds.split)?;

    let mut reports = Vec::new();
    for kind in [ModelKind::Mlp, ModelKind::Cnn] {
        let started = Instant::now();
        let ckpt = train_model(kind, &train, epochs, seeds.master)?;
        let r = evaluate(&ckpt, &test)?;
        println!(
            "{} {epochs} epochs in {:.1?}: final loss {:.4}, test accuracy {:.4}",
            r.model,
            started.elapsed(),
            ckpt.loss_trace.last().copied().unwrap_or(f64::NAN),
            r.accuracy
        );
        reports.push(r);
    }
    print!("{}", reports[1].render_text());
    print!("{}", report(&reports[0], &reports[1])?.render_text());
    Ok(())
}
