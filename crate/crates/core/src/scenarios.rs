//! Labeled impairment experiments.
//!
//! Two user behaviours are modelled, each applied by one user at a time:
//!
//! * power ramp: every channel in the user's window is raised by the same
//!   offset, 0.5 dB to 6 dB in 0.5 dB steps;
//! * add/drop: `d` channels are removed and the remaining `8 - d` are raised
//!   by `10*log10(8 / (8 - d))` dB so the window total stays constant.
//!
//! An observation is impaired when any probe Q falls below
//! [`Q_THRESHOLD_DB`](crate::physics::Q_THRESHOLD_DB); only then is it
//! attributed to the perturbing user.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::TelemetrySnapshot;
use crate::error::{Error, Result};
use crate::physics::{is_impaired_q, propagate, LinkState};
use crate::seed::derive_seed;
use crate::topology::{NetworkConfig, OsnrLevel, UserId, SLOTS_PER_WINDOW};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;
pub const RAMP_STEP_DB: f64 = 0.5;
pub const RAMP_STEPS: usize = 12;
pub const MAX_CHANNELS_DROPPED: u32 = 7;

pub fn ramp_offsets_db() -> impl Iterator<Item = f64> {
    (1..=RAMP_STEPS).map(|k| k as f64 * RAMP_STEP_DB)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ImpairmentKind {
    None,
    PowerRamp,
    AddDrop,
}

impl fmt::Display for ImpairmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImpairmentKind::None => "none",
            ImpairmentKind::PowerRamp => "power-ramp",
            ImpairmentKind::AddDrop => "add-drop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Impairment {
    None,
    PowerRamp { user: UserId, offset_db: f64 },
    AddDrop { user: UserId, channels_dropped: u32 },
}

impl Impairment {
    pub fn kind(&self) -> ImpairmentKind {
        match self {
            Impairment::None => ImpairmentKind::None,
            Impairment::PowerRamp { .. } => ImpairmentKind::PowerRamp,
            Impairment::AddDrop { .. } => ImpairmentKind::AddDrop,
        }
    }

    pub fn user(&self) -> Option<UserId> {
        match *self {
            Impairment::None => None,
            Impairment::PowerRamp { user, .. } | Impairment::AddDrop { user, .. } => Some(user),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub impairment: Impairment,
    pub osnr_level: OsnrLevel,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn baseline(osnr_level: OsnrLevel, seed: u64) -> Self {
        ScenarioSpec {
            impairment: Impairment::None,
            osnr_level,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.impairment {
            Impairment::None => Ok(()),
            Impairment::PowerRamp { offset_db, .. } => {
                let steps = offset_db / RAMP_STEP_DB;
                if (steps - steps.round()).abs() < 1e-9 && (1.0..=RAMP_STEPS as f64).contains(&steps.round()) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("ramp offset {offset_db} dB not in 0.5..=6.0 step 0.5")))
                }
            }
            Impairment::AddDrop { channels_dropped, .. } => {
                if (1..=MAX_CHANNELS_DROPPED).contains(&channels_dropped) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("channels_dropped {channels_dropped} not in 1..=7")))
                }
            }
        }
    }
}

/// Four-way class of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    NoImpairment,
    User1,
    User2,
    User3,
}

impl Label {
    pub const COUNT: usize = 4;
    pub const ALL: [Label; 4] = [Label::NoImpairment, Label::User1, Label::User2, Label::User3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Self::ALL.get(index).copied()
    }

    pub fn from_user(user: UserId) -> Label {
        Self::ALL[user.index() + 1]
    }

    pub fn user(self) -> Option<UserId> {
        self.index().checked_sub(1).and_then(UserId::from_index)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.user() {
            Some(user) => write!(f, "{user}"),
            None => f.write_str("No Impairment"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSnapshot {
    pub schema_version: u32,
    pub features: TelemetrySnapshot,
    pub label: Label,
    pub scenario: ScenarioSpec,
}

impl LabeledSnapshot {
    pub fn impairment_kind(&self) -> ImpairmentKind {
        self.scenario.impairment.kind()
    }
}

/// Applies the Q rule. Returns `None` when probes are impaired but the
/// scenario has no user to blame, which only a mis-calibrated line produces.
pub fn derive_label(snapshot: &TelemetrySnapshot, impairment: &Impairment) -> Option<Label> {
    let tripped = snapshot.probe_readings.iter().any(|p| is_impaired_q(p.q_factor_db));
    match (tripped, impairment.user()) {
        (false, _) => Some(Label::NoImpairment),
        (true, Some(user)) => Some(Label::from_user(user)),
        (true, None) => None,
    }
}

/// Slots kept when `remaining` channels survive in a window, filled from
/// both edges inward.
fn kept_offsets(remaining: usize) -> Vec<usize> {
    let n = SLOTS_PER_WINDOW;
    let mut order: Vec<usize> = (0..n / 2).flat_map(|i| [i, n - 1 - i]).collect();
    order.truncate(remaining);
    order
}

/// Per-channel boost that keeps the window total constant after dropping channels.
pub fn add_drop_boost_db(channels_dropped: u32) -> f64 {
    let full = SLOTS_PER_WINDOW as f64;
    10.0 * (full / (full - channels_dropped as f64)).log10()
}

/// Builds the line loading for a scenario. `config` carries the probe OSNR level.
pub fn link_state<'a>(config: &'a NetworkConfig, spec: &ScenarioSpec) -> Result<LinkState<'a>> {
    spec.validate()?;
    let mut state = LinkState::nominal(config, spec.seed);
    let Some(user) = spec.impairment.user() else {
        return Ok(state);
    };
    let window = config
        .window(user)
        .ok_or_else(|| Error::Domain(format!("config has no window for {user}")))?;

    match spec.impairment {
        Impairment::PowerRamp { offset_db, .. } => {
            for s in window.slots() {
                if let Some(p) = state.per_slot_power_dbm[s].as_mut() {
                    *p += offset_db;
                }
            }
        }
        Impairment::AddDrop { channels_dropped, .. } => {
            if window.active_channels.len() != window.width_slots {
                return Err(Error::Domain(format!("add/drop needs a fully loaded window for {user}")));
            }
            let boost = add_drop_boost_db(channels_dropped);
            let kept = kept_offsets(window.width_slots - channels_dropped as usize);
            for (offset, s) in window.slots().enumerate() {
                state.per_slot_power_dbm[s] = if kept.contains(&offset) {
                    Some(window.per_channel_power_dbm + boost)
                } else {
                    None
                };
            }
        }
        Impairment::None => {}
    }
    Ok(state)
}

/// Propagates one scenario and labels it. `Ok(None)` means the Q rule fired
/// on a scenario without a user.
pub fn run_scenario(config: &NetworkConfig, spec: &ScenarioSpec, timestamp_index: u64) -> Result<Option<LabeledSnapshot>> {
    let config = config.with_osnr_level(spec.osnr_level);
    let state = link_state(&config, spec)?;
    let out = propagate(&state)?;
    let features = TelemetrySnapshot {
        probe_readings: out.probes,
        ocm_readings: out.ocm,
        timestamp_index,
    };
    Ok(derive_label(&features, &spec.impairment).map(|label| LabeledSnapshot {
        schema_version: CORPUS_SCHEMA_VERSION,
        features,
        label,
        scenario: *spec,
    }))
}

fn run_attributable(config: &NetworkConfig, spec: &ScenarioSpec) -> Result<LabeledSnapshot> {
    run_scenario(config, spec, 0)?.ok_or_else(|| Error::Domain("user scenario produced no label".into()))
}

/// The twelve ramp offsets for one user.
pub fn power_ramp_states(config: &NetworkConfig, user: UserId, osnr_level: OsnrLevel, seed: u64) -> Result<Vec<LabeledSnapshot>> {
    ramp_offsets_db()
        .enumerate()
        .map(|(k, offset_db)| {
            let spec = ScenarioSpec {
                impairment: Impairment::PowerRamp { user, offset_db },
                osnr_level,
                seed: derive_seed(seed, k as u64),
            };
            run_attributable(config, &spec)
        })
        .collect()
}

/// One state per number of dropped channels, 1 through 7.
pub fn add_drop_states(config: &NetworkConfig, user: UserId, osnr_level: OsnrLevel, seed: u64) -> Result<Vec<LabeledSnapshot>> {
    (1..=MAX_CHANNELS_DROPPED)
        .map(|channels_dropped| {
            let spec = ScenarioSpec {
                impairment: Impairment::AddDrop { user, channels_dropped },
                osnr_level,
                seed: derive_seed(seed, channels_dropped as u64),
            };
            run_attributable(config, &spec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairQuota {
    pub user: UserId,
    pub kind: ImpairmentKind,
    pub count: usize,
}

/// How many snapshots of each class a corpus holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub schema_version: u32,
    pub impaired: Vec<PairQuota>,
    pub clean: usize,
}

impl Default for Composition {
    /// 184 impaired snapshots per (user, kind) pair plus 1816 clean, 2920 in all.
    fn default() -> Self {
        Composition::uniform(184, 1816)
    }
}

impl Composition {
    pub fn uniform(per_pair: usize, clean: usize) -> Self {
        let impaired = UserId::ALL
            .iter()
            .flat_map(|&user| {
                [ImpairmentKind::PowerRamp, ImpairmentKind::AddDrop]
                    .map(|kind| PairQuota { user, kind, count: per_pair })
            })
            .collect();
        Composition {
            schema_version: CORPUS_SCHEMA_VERSION,
            impaired,
            clean,
        }
    }

    /// The default mix scaled to roughly `total` snapshots.
    pub fn scaled(total: usize) -> Self {
        let full = Composition::default();
        let per_pair = (184.0 * total as f64 / full.total() as f64).round() as usize;
        Composition::uniform(per_pair, total.saturating_sub(6 * per_pair))
    }

    pub fn total(&self) -> usize {
        self.clean + self.impaired.iter().map(|q| q.count).sum::<usize>()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let composition: Composition = serde_json::from_str(&text)?;
        if composition.schema_version != CORPUS_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "composition",
                found: composition.schema_version,
                expected: CORPUS_SCHEMA_VERSION,
            });
        }
        Ok(composition)
    }
}

fn cycled_impairment(user: UserId, kind: ImpairmentKind, draw: usize) -> Option<(Impairment, OsnrLevel)> {
    let levels = OsnrLevel::ALL.len();
    let level = OsnrLevel::ALL[draw % levels];
    let step = draw / levels;
    let impairment = match kind {
        ImpairmentKind::PowerRamp => Impairment::PowerRamp {
            user,
            offset_db: ((step % RAMP_STEPS) + 1) as f64 * RAMP_STEP_DB,
        },
        ImpairmentKind::AddDrop => Impairment::AddDrop {
            user,
            channels_dropped: (step % MAX_CHANNELS_DROPPED as usize) as u32 + 1,
        },
        ImpairmentKind::None => return None,
    };
    Some((impairment, level))
}

const BASELINE_STREAM: u64 = 0xba5e;
const PAIR_STREAM_BASE: u64 = 0x1000;

/// Generates a labeled corpus.
///
/// For each (user, kind) quota the magnitudes and OSNR levels are cycled
/// round-robin, each draw with its own sub-seed, until the quota of
/// attributable (Q-tripping) snapshots is met. Draws that stay above the Q
/// threshold are clean observations and fill the clean quota first, taken
/// round-robin across pairs; unperturbed baselines make up the rest.
pub fn build_corpus(config: &NetworkConfig, composition: &Composition, master_seed: u64) -> Result<Vec<LabeledSnapshot>> {
    if composition.total() == 0 {
        return Err(Error::Domain("composition asks for an empty corpus".into()));
    }
    let mut impaired = Vec::with_capacity(composition.total());
    let mut perturbed_clean: Vec<Vec<LabeledSnapshot>> = Vec::new();

    for (pair_index, quota) in composition.impaired.iter().enumerate() {
        if quota.kind == ImpairmentKind::None {
            return Err(Error::Domain("impaired quota with kind None".into()));
        }
        let pair_seed = derive_seed(master_seed, PAIR_STREAM_BASE + pair_index as u64);
        let cycle = OsnrLevel::ALL.len()
            * match quota.kind {
                ImpairmentKind::PowerRamp => RAMP_STEPS,
                _ => MAX_CHANNELS_DROPPED as usize,
            };
        let budget = 50 * quota.count.max(1) + 10 * cycle;
        let mut hits = 0;
        let mut clean = Vec::new();
        let mut draw = 0;
        while hits < quota.count {
            if draw >= budget {
                return Err(Error::Stalled(format!(
                    "{} {}: {hits} of {} impaired after {draw} draws",
                    quota.user, quota.kind, quota.count
                )));
            }
            let (impairment, osnr_level) =
                cycled_impairment(quota.user, quota.kind, draw).expect("kind checked above");
            let spec = ScenarioSpec {
                impairment,
                osnr_level,
                seed: derive_seed(pair_seed, draw as u64),
            };
            let snap = run_attributable(config, &spec)?;
            if snap.label == Label::NoImpairment {
                clean.push(snap);
            } else {
                hits += 1;
                impaired.push(snap);
            }
            draw += 1;
        }
        perturbed_clean.push(clean);
    }

    let mut clean = Vec::with_capacity(composition.clean);
    let longest = perturbed_clean.iter().map(Vec::len).max().unwrap_or(0);
    'fill: for i in 0..longest {
        for pool in &perturbed_clean {
            if clean.len() == composition.clean {
                break 'fill;
            }
            if let Some(snap) = pool.get(i) {
                clean.push(snap.clone());
            }
        }
    }

    let baseline_seed = derive_seed(master_seed, BASELINE_STREAM);
    let mut draw = 0u64;
    while clean.len() < composition.clean {
        if draw as usize > 50 * composition.clean + 100 {
            return Err(Error::Stalled("baseline draws keep tripping the Q threshold".into()));
        }
        let level = OsnrLevel::ALL[draw as usize % OsnrLevel::ALL.len()];
        let spec = ScenarioSpec::baseline(level, derive_seed(baseline_seed, draw));
        if let Some(snap) = run_scenario(config, &spec, 0)? {
            clean.push(snap);
        }
        draw += 1;
    }

    let mut corpus = impaired;
    corpus.extend(clean);
    for (i, snap) in corpus.iter_mut().enumerate() {
        snap.features.timestamp_index = i as u64;
    }
    Ok(corpus)
}

/// JSON Lines, one snapshot per line.
pub fn write_corpus(corpus: &[LabeledSnapshot], out: &mut impl std::io::Write) -> Result<()> {
    for snap in corpus {
        serde_json::to_writer(&mut *out, snap)?;
        out.write_all(b"\n").map_err(|e| Error::io("<corpus>", e))?;
    }
    Ok(())
}

pub fn read_corpus(text: &str) -> Result<Vec<LabeledSnapshot>> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| {
            let snap: LabeledSnapshot = serde_json::from_str(line)?;
            if snap.schema_version != CORPUS_SCHEMA_VERSION {
                return Err(Error::SchemaVersion {
                    what: "corpus line",
                    found: snap.schema_version,
                    expected: CORPUS_SCHEMA_VERSION,
                });
            }
            Ok(snap)
        })
        .collect()
}
