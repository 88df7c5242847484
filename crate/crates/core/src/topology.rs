//! Declarative model of the optical line system.
//!
//! The default layout interleaves the four operator probes with the three
//! user windows, lowest frequency first:
//!
//! ```text
//! slot  0      1..=8     9     10..=17    18     19..=26    27
//!       P1  [  User1  ]  P2  [  User2  ]  P3  [  User3  ]  P4
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Bandwidth leased to every user.
pub const WINDOW_BANDWIDTH_GHZ: f64 = 400.0;
pub const CHANNEL_WIDTH_GHZ: f64 = 50.0;
pub const SLOTS_PER_WINDOW: usize = 8;
pub const PROBE_COUNT: usize = 4;
pub const USER_COUNT: usize = 3;
pub const NODE_COUNT: usize = 6;
pub const SPAN_LENGTHS_KM: [f64; 5] = [25.0, 25.0, 25.0, 25.0, 50.0];
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;
pub const DEFAULT_LAUNCH_POWER_DBM: f64 = 4.0;
pub const AMPLIFIER_GAIN_DB: f64 = 15.0;
pub const ANCHOR_FREQUENCY_THZ: f64 = 193.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UserId {
    User1,
    User2,
    User3,
}

impl UserId {
    pub const ALL: [UserId; USER_COUNT] = [UserId::User1, UserId::User2, UserId::User3];

    /// Zero-based position of the user in spectral order.
    pub fn index(self) -> usize {
        match self {
            UserId::User1 => 0,
            UserId::User2 => 1,
            UserId::User3 => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<UserId> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "User-{}", self.index() + 1)
    }
}

/// Noise-loading level applied to the probes before they enter the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OsnrLevel {
    Low,
    Mid,
    High,
}

impl OsnrLevel {
    pub const ALL: [OsnrLevel; 3] = [OsnrLevel::Low, OsnrLevel::Mid, OsnrLevel::High];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    /// 300 Gbit/s dual-polarization 64-QAM.
    Qam64At300G,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub start_freq_thz: f64,
    pub slot_width_ghz: f64,
    pub slot_count: usize,
}

impl SpectralGrid {
    /// Center frequency of a slot in THz.
    pub fn slot_center_thz(&self, slot: usize) -> f64 {
        self.start_freq_thz + (slot as f64 + 0.5) * self.slot_width_ghz / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsaasWindow {
    pub user: UserId,
    pub first_slot: usize,
    pub width_slots: usize,
    /// Absolute slot indices carrying a user channel.
    pub active_channels: BTreeSet<usize>,
    pub per_channel_power_dbm: f64,
}

impl OsaasWindow {
    pub fn slots(&self) -> std::ops::Range<usize> {
        self.first_slot..self.first_slot + self.width_slots
    }

    pub fn center_slot(&self) -> f64 {
        self.first_slot as f64 + (self.width_slots as f64 - 1.0) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorProbe {
    pub probe_id: usize,
    pub slot: usize,
    pub launch_power_dbm: f64,
    pub modulation: Modulation,
    pub osnr_setting: OsnrLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadmNode {
    pub node_id: usize,
    pub booster_gain_db: f64,
    pub preamp_gain_db: f64,
    pub ocm_resolution_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpan {
    pub span_id: usize,
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
}

impl FiberSpan {
    pub fn loss_db(&self) -> f64 {
        self.length_km * self.attenuation_db_per_km
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub schema_version: u32,
    pub grid: SpectralGrid,
    pub nodes: Vec<RoadmNode>,
    pub spans: Vec<FiberSpan>,
    pub windows: Vec<OsaasWindow>,
    pub probes: Vec<OperatorProbe>,
}

/// The six-ROADM, 150 km line with three users and four interleaved probes.
pub fn default_config() -> NetworkConfig {
    let mut windows = Vec::with_capacity(USER_COUNT);
    let mut probes = Vec::with_capacity(PROBE_COUNT);
    let mut slot = 0;
    for probe_id in 0..PROBE_COUNT {
        probes.push(OperatorProbe {
            probe_id,
            slot,
            launch_power_dbm: DEFAULT_LAUNCH_POWER_DBM,
            modulation: Modulation::Qam64At300G,
            osnr_setting: OsnrLevel::Mid,
        });
        slot += 1;
        if let Some(user) = UserId::from_index(probe_id) {
            windows.push(OsaasWindow {
                user,
                first_slot: slot,
                width_slots: SLOTS_PER_WINDOW,
                active_channels: (slot..slot + SLOTS_PER_WINDOW).collect(),
                per_channel_power_dbm: DEFAULT_LAUNCH_POWER_DBM,
            });
            slot += SLOTS_PER_WINDOW;
        }
    }

    NetworkConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        grid: SpectralGrid {
            start_freq_thz: ANCHOR_FREQUENCY_THZ,
            slot_width_ghz: CHANNEL_WIDTH_GHZ,
            slot_count: slot,
        },
        nodes: (0..NODE_COUNT)
            .map(|node_id| RoadmNode {
                node_id,
                booster_gain_db: AMPLIFIER_GAIN_DB,
                preamp_gain_db: AMPLIFIER_GAIN_DB,
                ocm_resolution_ghz: 6.25,
            })
            .collect(),
        spans: SPAN_LENGTHS_KM
            .iter()
            .enumerate()
            .map(|(span_id, &length_km)| FiberSpan {
                span_id,
                length_km,
                attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            })
            .collect(),
        windows,
        probes,
    }
}

impl NetworkConfig {
    pub fn total_length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.length_km).sum()
    }

    pub fn window(&self, user: UserId) -> Option<&OsaasWindow> {
        self.windows.iter().find(|w| w.user == user)
    }

    /// Copy of this config with every probe loaded to `level`.
    pub fn with_osnr_level(&self, level: OsnrLevel) -> NetworkConfig {
        let mut config = self.clone();
        for probe in &mut config.probes {
            probe.osnr_setting = level;
        }
        config
    }

    pub fn from_json_str(text: &str) -> Result<NetworkConfig> {
        let config: NetworkConfig = serde_json::from_str(text)?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "network config",
                found: config.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<NetworkConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validates and returns the config, or the list of violations.
    pub fn checked(self) -> Result<NetworkConfig> {
        let violations = validate(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }
}

/// Lists every broken invariant; an empty list means the config is usable.
pub fn validate(config: &NetworkConfig) -> Vec<String> {
    let mut out = Vec::new();
    let grid = &config.grid;

    if !(grid.slot_width_ghz > 0.0) {
        out.push(format!("grid.slot_width_ghz must be > 0 (got {})", grid.slot_width_ghz));
    }
    if grid.slot_count == 0 {
        out.push("grid.slot_count must be > 0".to_string());
    }
    if !grid.start_freq_thz.is_finite() {
        out.push("grid.start_freq_thz must be finite".to_string());
    }

    if config.nodes.len() != config.spans.len() + 1 {
        out.push(format!(
            "node/span count mismatch: {} nodes for {} spans",
            config.nodes.len(),
            config.spans.len()
        ));
    }
    if config.nodes.len() != NODE_COUNT {
        out.push(format!("nodes: expected {NODE_COUNT}, got {}", config.nodes.len()));
    }
    for (i, node) in config.nodes.iter().enumerate() {
        if node.node_id != i {
            out.push(format!("nodes[{i}].node_id out of order ({})", node.node_id));
        }
        if !node.booster_gain_db.is_finite() || !node.preamp_gain_db.is_finite() {
            out.push(format!("nodes[{i}]: amplifier gains must be finite"));
        }
    }
    for (i, span) in config.spans.iter().enumerate() {
        if span.span_id != i {
            out.push(format!("spans[{i}].span_id out of order ({})", span.span_id));
        }
        if !(span.length_km > 0.0) {
            out.push(format!("spans[{i}].length_km must be > 0"));
        }
        if !(span.attenuation_db_per_km > 0.0) {
            out.push(format!("spans[{i}].attenuation_db_per_km must be > 0"));
        }
    }

    if config.windows.len() != USER_COUNT {
        out.push(format!("windows: expected {USER_COUNT}, got {}", config.windows.len()));
    }
    let users: BTreeSet<UserId> = config.windows.iter().map(|w| w.user).collect();
    if users.len() != config.windows.len() {
        out.push("windows: user ids must be unique".to_string());
    }
    for w in &config.windows {
        let bandwidth = w.width_slots as f64 * grid.slot_width_ghz;
        if (bandwidth - WINDOW_BANDWIDTH_GHZ).abs() > 1e-9 {
            out.push(format!(
                "window {}: width {} slots x {} GHz != {WINDOW_BANDWIDTH_GHZ} GHz",
                w.user, w.width_slots, grid.slot_width_ghz
            ));
        }
        if w.slots().end > grid.slot_count {
            out.push(format!("window {}: slot range exceeds grid", w.user));
        }
        if let Some(stray) = w.active_channels.iter().find(|s| !w.slots().contains(s)) {
            out.push(format!("window {}: active channel {stray} outside window", w.user));
        }
        if !w.per_channel_power_dbm.is_finite() {
            out.push(format!("window {}: per_channel_power_dbm must be finite", w.user));
        }
    }

    if config.probes.len() != PROBE_COUNT {
        out.push(format!("probes: expected {PROBE_COUNT}, got {}", config.probes.len()));
    }
    for (i, p) in config.probes.iter().enumerate() {
        if p.probe_id != i {
            out.push(format!("probes[{i}].probe_id out of order ({})", p.probe_id));
        }
        if p.slot >= grid.slot_count {
            out.push(format!("probe {}: slot {} outside grid", p.probe_id, p.slot));
        }
        if !p.launch_power_dbm.is_finite() {
            out.push(format!("probe {}: launch_power_dbm must be finite", p.probe_id));
        }
    }
    if config.probes.windows(2).any(|pair| pair[0].slot >= pair[1].slot) {
        out.push("probes must be ordered by ascending slot".to_string());
    }

    // Every slot may be claimed by one probe or one window at most.
    let mut owner: Vec<Option<String>> = vec![None; grid.slot_count];
    let claims = config
        .probes
        .iter()
        .map(|p| (format!("probe {}", p.probe_id), p.slot..p.slot + 1))
        .chain(config.windows.iter().map(|w| (format!("window {}", w.user), w.slots())));
    for (name, range) in claims {
        for slot in range {
            let Some(cell) = owner.get_mut(slot) else { continue };
            match cell {
                Some(prev) => out.push(format!("slot overlap: slot {slot} claimed by {prev} and {name}")),
                None => *cell = Some(name.clone()),
            }
        }
    }

    // Layout P U P U P U P: each window sits between consecutive probes.
    if config.probes.len() == PROBE_COUNT && config.windows.len() == USER_COUNT {
        for w in &config.windows {
            let i = w.user.index();
            let (below, above) = (&config.probes[i], &config.probes[i + 1]);
            if !(below.slot < w.first_slot && w.slots().end <= above.slot) {
                out.push(format!(
                    "window {} is not interleaved between probes {} and {}",
                    w.user, below.probe_id, above.probe_id
                ));
            }
        }
    }

    out
}
