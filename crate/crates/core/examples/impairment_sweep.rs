//! For every user and OSNR level, the smallest power ramp and the smallest
//! number of dropped channels that push some probe below the Q threshold.

use osaas_core::scenarios::{add_drop_states, power_ramp_states, Impairment, Label};
use osaas_core::topology::{default_config, OsnrLevel, UserId};

fn main() -> anyhow::Result<()> {
    let config = default_config();
    println!("{:<8} {:<5} {:>14} {:>16}", "user", "OSNR", "ramp trips at", "add/drop trips at");
    for user in UserId::ALL {
        for level in OsnrLevel::ALL {
            let ramp = power_ramp_states(&config, user, level, 7)?;
            let first_ramp = ramp
                .iter()
                .filter(|s| s.label != Label::NoImpairment)
                .find_map(|s| match s.scenario.impairment {
                    Impairment::PowerRamp { offset_db, .. } => Some(format!("+{offset_db} dB")),
                    _ => None,
                })
                .unwrap_or_else(|| "never".into());
            let drops = add_drop_states(&config, user, level, 7)?;
            let first_drop = drops
                .iter()
                .position(|s| s.label != Label::NoImpairment)
                .map(|i| format!("{} dropped", i + 1))
                .unwrap_or_else(|| "never".into());
            println!("{:<8} {:<5} {first_ramp:>14} {first_drop:>16}", user.to_string(), format!("{level:?}"));
        }
    }
    Ok(())
}
