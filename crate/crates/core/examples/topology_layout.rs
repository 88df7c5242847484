//! Prints the default line layout and writes it as an editable JSON config.
//!
//! cargo run --example topology_layout -- [out.json]

use osaas_core::topology::{default_config, validate};

fn main() -> anyhow::Result<()> {
    let config = default_config();
    println!(
        "{} slots of {} GHz from {} THz, {} km over {} spans",
        config.grid.slot_count,
        config.grid.slot_width_ghz,
        config.grid.start_freq_thz,
        config.total_length_km(),
        config.spans.len()
    );
    for p in &config.probes {
        println!(
            "  probe {} at slot {:2} ({:.3} THz), {} dBm",
            p.probe_id,
            p.slot,
            config.grid.slot_center_thz(p.slot),
            p.launch_power_dbm
        );
    }
    for w in &config.windows {
        println!(
            "  {} window slots {:?}, {} channels at {} dBm",
            w.user,
            w.slots(),
            w.active_channels.len(),
            w.per_channel_power_dbm
        );
    }
    for s in &config.spans {
        println!("  span {} {} km, {:.1} dB loss", s.span_id, s.length_km, s.loss_db());
    }
    let problems = validate(&config);
    println!("validation: {}", if problems.is_empty() { "ok".to_string() } else { problems.join("; ") });

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, config.to_json_string()?)?;
        println!("wrote {path}");
    }
    Ok(())
}
