//! The whole pipeline on the small profile, with artifacts and a hash
//! manifest written to the given directory.
//!
//! cargo run --release --example reproduce_smoke -- [out_dir] [seed]

use osaas_core::pipeline::{reproduce, Profile, ReproduceOptions};
use osaas_core::topology::default_config;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out_dir = args.next().unwrap_or_else(|| "osaas-smoke".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let outcome = reproduce(&ReproduceOptions {
        master_seed: seed,
        profile: Profile::Smoke,
        config: default_config(),
        config_path: None,
        composition: None,
        epochs: None,
        out_dir: out_dir.clone().into(),
    })?;
    print!("{}", outcome.table.render_text());
    for a in &outcome.manifest.artifacts {
        println!("{:<22} {} ({} bytes)", a.name, &a.sha256[..16], a.bytes);
    }
    for c in &outcome.manifest.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("written to {out_dir}");
    Ok(())
}
