//! One telemetry snapshot under nominal loading and under a 6 dB power ramp
//! by User-2, side by side.

use osaas_core::physics::{propagate, Q_THRESHOLD_DB};
use osaas_core::scenarios::{link_state, Impairment, ScenarioSpec};
use osaas_core::topology::{default_config, OsnrLevel, UserId};

fn main() -> anyhow::Result<()> {
    let config = default_config().with_osnr_level(OsnrLevel::Mid);
    let specs = [
        ("nominal", ScenarioSpec::baseline(OsnrLevel::Mid, 1)),
        (
            "User-2 +6 dB",
            ScenarioSpec {
                impairment: Impairment::PowerRamp {
                    user: UserId::User2,
                    offset_db: 6.0,
                },
                osnr_level: OsnrLevel::Mid,
                seed: 1,
            },
        ),
    ];
    for (name, spec) in specs {
        let out = propagate(&link_state(&config, &spec)?)?;
        println!("{name}:");
        for p in &out.probes {
            println!(
                "  probe {} rx {:6.2} dBm  OSNR {:5.2} dB  Q {:5.2} dB{}",
                p.probe_id,
                p.rx_power_dbm,
                p.osnr_db,
                p.q_factor_db,
                if p.q_factor_db < Q_THRESHOLD_DB { "  (impaired)" } else { "" }
            );
        }
        for o in &out.ocm {
            let probes: Vec<String> = o.per_probe_power_dbm.iter().map(|v| format!("{v:.2}")).collect();
            println!(
                "  node {} total {:6.2} dBm, probes [{}]",
                o.node_id,
                o.node_total_output_dbm,
                probes.join(", ")
            );
        }
    }
    Ok(())
}
