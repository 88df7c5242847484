//! Analytic channel model: maps a loading state of the line to what the
//! operator can observe, i.e. transceiver telemetry on the probes and OCM
//! power readings at each ROADM.
//!
//! The model is a calibrated stand-in for hardware. Two couplings carry the
//! user-induced impairments:
//!
//! * EDFA/AGC crosstalk: a change of total power in a user window shifts the
//!   gain seen by the probes, weighted by an exponential spectral tilt.
//! * Nonlinear interference: every user channel contributes `eta(d) * p^2`
//!   to the probe's NLI budget, with `eta(d) = ETA0 / d^2` for slot distance `d`.
//!
//! Both are measured against the nominal loading described by the
//! [`NetworkConfig`], so an unperturbed line has no coupling penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{validate, NetworkConfig, OsnrLevel, UserId};

/// AGC coupling, dB of probe power shift per dB of window power change per amplifier stage.
pub const AGC_COUPLING: f64 = 0.1;
/// Decay length of the spectral gain tilt, in slots.
pub const TILT_LENGTH_SLOTS: f64 = 8.0;
/// NLI kernel strength at unit slot distance, per mW^2.
pub const NLI_ETA0: f64 = 0.016;
/// Amplifier noise figure used for the in-line ASE stages.
pub const AMPLIFIER_NOISE_FIGURE_DB: f64 = 5.5;
/// 10*log10(h * nu * 12.5 GHz) in dBm, the usual 58 dB OSNR constant.
const ASE_REFERENCE_DBM: f64 = -58.0;
/// Symbol rate of the probe transceivers.
pub const PROBE_BAUD_GBD: f64 = 60.0;
/// Transceiver implementation ceiling on electrical SNR.
pub const TRANSCEIVER_SNR_CEILING_DB: f64 = 18.0;
/// Q (dB) sits this far below electrical SNR for the probe format.
pub const Q_OFFSET_DB: f64 = 2.0;
/// A probe is impaired when its Q drops strictly below this value.
pub const Q_THRESHOLD_DB: f64 = 7.3;
/// Loss between the last ROADM output and the receiver.
pub const DROP_PATH_LOSS_DB: f64 = 10.0;

pub const SIGMA_RX_POWER_DB: f64 = 0.1;
pub const SIGMA_OSNR_DB: f64 = 0.2;
pub const SIGMA_Q_DB: f64 = 0.15;
pub const SIGMA_CFO_MHZ: f64 = 30.0;
pub const SIGMA_CDC_PS_NM: f64 = 2.0;
pub const SIGMA_DGD_PS: f64 = 0.3;
pub const SIGMA_PDL_DB: f64 = 0.1;

const FIBER_DISPERSION_PS_NM_KM: f64 = 17.0;
const PMD_PS_PER_SQRT_KM: f64 = 0.1;
const NOMINAL_PDL_DB: f64 = 0.6;
/// Static laser offsets of the four probe transceivers.
const NOMINAL_CFO_MHZ: [f64; 4] = [-150.0, 90.0, 40.0, -75.0];

/// Stage OSNR of the noise-loading ASE added before the line.
pub fn loading_osnr_db(level: OsnrLevel) -> f64 {
    match level {
        OsnrLevel::Low => 18.0,
        OsnrLevel::Mid => 22.0,
        OsnrLevel::High => 26.0,
    }
}

pub fn is_impaired_q(q_factor_db: f64) -> bool {
    q_factor_db < Q_THRESHOLD_DB
}

pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

pub fn linear_to_db(ratio: f64) -> Result<f64> {
    if ratio > 0.0 && ratio.is_finite() {
        Ok(10.0 * ratio.log10())
    } else {
        Err(Error::Domain(format!("linear_to_db of non-positive ratio {ratio}")))
    }
}

/// Combines cascaded OSNR stages: inverse linear values add.
pub fn accumulate_osnr(per_stage_osnr_db: &[f64]) -> Result<f64> {
    if per_stage_osnr_db.is_empty() {
        return Err(Error::Domain("accumulate_osnr of an empty stage list".into()));
    }
    if let Some(bad) = per_stage_osnr_db.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite stage OSNR {bad}")));
    }
    let inverse: f64 = per_stage_osnr_db.iter().map(|&x| 1.0 / db_to_linear(x)).sum();
    linear_to_db(1.0 / inverse)
}

/// Gain-tilt weight between a probe slot and the center of a user window.
pub fn tilt(probe_slot: usize, window_center_slot: f64) -> f64 {
    (-(probe_slot as f64 - window_center_slot).abs() / TILT_LENGTH_SLOTS).exp()
}

/// Per-stage power penalty (dB, positive = loss) on a probe caused by window
/// power changes. `aggressor_delta_db` is indexed like `config.windows`.
pub fn edfa_agc_coupling(probe_slot: usize, aggressor_delta_db: &[f64], config: &NetworkConfig) -> f64 {
    config
        .windows
        .iter()
        .zip(aggressor_delta_db)
        .map(|(w, &delta)| AGC_COUPLING * delta * tilt(probe_slot, w.center_slot()))
        .sum()
}

/// NLI kernel for a slot distance of at least one.
pub fn nli_kernel(distance_slots: usize) -> f64 {
    let d = distance_slots.max(1) as f64;
    NLI_ETA0 / (d * d)
}

/// `10*log10(1 + sum eta(d_j) p_j^2)` over aggressor `(slot, power_mw)` pairs.
pub fn nli_penalty_for(probe_slot: usize, aggressors: impl IntoIterator<Item = (usize, f64)>) -> f64 {
    let budget: f64 = aggressors
        .into_iter()
        .map(|(slot, p_mw)| nli_kernel(slot.abs_diff(probe_slot)) * p_mw * p_mw)
        .sum();
    10.0 * (1.0 + budget).log10()
}

/// Power of every slot entering the line. Unoccupied slots are `None`.
#[derive(Debug, Clone)]
pub struct LinkState<'a> {
    pub config: &'a NetworkConfig,
    pub per_slot_power_dbm: Vec<Option<f64>>,
    pub rng_seed: u64,
}

impl<'a> LinkState<'a> {
    /// The loading described by the config itself: every active user channel
    /// at its window's nominal power, every probe at its launch power.
    pub fn nominal(config: &'a NetworkConfig, rng_seed: u64) -> Self {
        let mut per_slot_power_dbm = vec![None; config.grid.slot_count];
        for w in &config.windows {
            for &slot in &w.active_channels {
                if let Some(cell) = per_slot_power_dbm.get_mut(slot) {
                    *cell = Some(w.per_channel_power_dbm);
                }
            }
        }
        for p in &config.probes {
            if let Some(cell) = per_slot_power_dbm.get_mut(p.slot) {
                *cell = Some(p.launch_power_dbm);
            }
        }
        LinkState {
            config,
            per_slot_power_dbm,
            rng_seed,
        }
    }

    /// Linear sum of the powers in a user window at the line input, in dBm.
    /// `None` when the window carries no channel.
    pub fn window_total_dbm(&self, user: UserId) -> Option<f64> {
        let w = self.config.window(user)?;
        let total: f64 = w
            .slots()
            .filter_map(|s| self.per_slot_power_dbm.get(s).copied().flatten())
            .map(db_to_linear)
            .sum();
        linear_to_db(total).ok()
    }

    fn user_channels(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.config.windows.iter().flat_map(move |w| {
            w.slots().filter_map(move |s| {
                self.per_slot_power_dbm
                    .get(s)
                    .copied()
                    .flatten()
                    .map(|dbm| (s, db_to_linear(dbm)))
            })
        })
    }

    /// Change of each window's total power relative to nominal loading, in dB.
    pub fn window_deltas_db(&self) -> Vec<f64> {
        self.config
            .windows
            .iter()
            .map(|w| {
                let nominal = nominal_window_total_dbm(w.active_channels.len(), w.per_channel_power_dbm);
                match (self.window_total_dbm(w.user), nominal) {
                    (Some(now), Some(nominal)) => now - nominal,
                    _ => 0.0,
                }
            })
            .collect()
    }
}

fn nominal_window_total_dbm(channels: usize, per_channel_dbm: f64) -> Option<f64> {
    linear_to_db(channels as f64 * db_to_linear(per_channel_dbm)).ok()
}

/// NLI penalty on a probe from all user channels currently in the line.
pub fn nli_penalty(probe_slot: usize, link_state: &LinkState<'_>) -> f64 {
    nli_penalty_for(probe_slot, link_state.user_channels())
}

/// NLI penalty beyond what the nominal loading already produces.
pub fn nli_excess_penalty(probe_slot: usize, link_state: &LinkState<'_>) -> f64 {
    let nominal = LinkState::nominal(link_state.config, 0);
    nli_penalty(probe_slot, link_state) - nli_penalty(probe_slot, &nominal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReading {
    pub probe_id: usize,
    pub slot: usize,
    pub cfo_mhz: f64,
    pub cdc_ps_nm: f64,
    pub dgd_ps: f64,
    pub rx_power_dbm: f64,
    pub osnr_db: f64,
    pub q_factor_db: f64,
    pub pdl_db: f64,
    pub electrical_snr_db: f64,
}

impl ProbeReading {
    /// Monitoring features in the order used by the dataset tensors.
    pub fn features(&self) -> [f64; 8] {
        [
            self.cfo_mhz,
            self.cdc_ps_nm,
            self.dgd_ps,
            self.rx_power_dbm,
            self.osnr_db,
            self.q_factor_db,
            self.pdl_db,
            self.electrical_snr_db,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcmReading {
    pub node_id: usize,
    pub per_probe_power_dbm: Vec<f64>,
    /// Indexed like `config.windows` (spectral order).
    pub window_total_power_dbm: Vec<f64>,
    pub node_total_output_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub ocm: Vec<OcmReading>,
    pub probes: Vec<ProbeReading>,
}

/// Noiseless per-probe quality figures, before monitor jitter is added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBudget {
    pub osnr_db: f64,
    pub electrical_snr_db: f64,
    pub q_factor_db: f64,
    pub agc_penalty_db: f64,
    pub nli_excess_db: f64,
}

fn osnr_to_snr_db() -> f64 {
    10.0 * (PROBE_BAUD_GBD / 12.5).log10()
}

/// Electrical SNR from OSNR and the NLI penalty (dB).
pub fn electrical_snr_db(osnr_db: f64, nli_excess_db: f64) -> f64 {
    let ase = db_to_linear(osnr_db - osnr_to_snr_db());
    let ceiling = db_to_linear(TRANSCEIVER_SNR_CEILING_DB);
    10.0 * (1.0 / (1.0 / ase + 1.0 / ceiling)).log10() - nli_excess_db
}

fn stage_osnr_db(amp_input_dbm: f64) -> f64 {
    amp_input_dbm - AMPLIFIER_NOISE_FIGURE_DB - ASE_REFERENCE_DBM
}

/// Deterministic link budget of one probe.
pub fn probe_budget(probe_index: usize, link_state: &LinkState<'_>) -> Result<ProbeBudget> {
    let config = link_state.config;
    let probe = config
        .probes
        .get(probe_index)
        .ok_or_else(|| Error::Domain(format!("no probe {probe_index}")))?;
    let launch = link_state.per_slot_power_dbm[probe.slot]
        .ok_or_else(|| Error::Domain(format!("probe {} slot is dark", probe.probe_id)))?;
    let agc = edfa_agc_coupling(probe.slot, &link_state.window_deltas_db(), config);
    let nli = nli_excess_penalty(probe.slot, link_state);

    let mut stages = vec![loading_osnr_db(probe.osnr_setting)];
    for (k, span) in config.spans.iter().enumerate() {
        let node_out = launch - k as f64 * agc;
        // Booster of node k, then the preamp of node k + 1 after the span.
        stages.push(stage_osnr_db(node_out - config.nodes[k].booster_gain_db));
        stages.push(stage_osnr_db(node_out - span.loss_db()));
    }
    let osnr = accumulate_osnr(&stages)?;
    let snr = electrical_snr_db(osnr, nli);
    Ok(ProbeBudget {
        osnr_db: osnr,
        electrical_snr_db: snr,
        q_factor_db: snr - Q_OFFSET_DB,
        agc_penalty_db: agc,
        nli_excess_db: nli,
    })
}

/// Runs the loading state through the line and samples the telemetry.
///
/// Node `k` output carries every user channel at its input power (the WSS
/// re-equalizes them) while the probes accumulate `k` stages of AGC shift.
pub fn propagate(link_state: &LinkState<'_>) -> Result<Propagation> {
    let config = link_state.config;
    let violations = validate(config);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }
    if link_state.per_slot_power_dbm.len() != config.grid.slot_count {
        return Err(Error::Shape(format!(
            "link state has {} slots, grid has {}",
            link_state.per_slot_power_dbm.len(),
            config.grid.slot_count
        )));
    }
    if let Some((slot, p)) = link_state
        .per_slot_power_dbm
        .iter()
        .enumerate()
        .find_map(|(s, p)| p.filter(|v| !v.is_finite()).map(|v| (s, v)))
    {
        return Err(Error::Domain(format!("slot {slot} has non-finite power {p}")));
    }

    let deltas = link_state.window_deltas_db();
    let agc: Vec<f64> = config
        .probes
        .iter()
        .map(|p| edfa_agc_coupling(p.slot, &deltas, config))
        .collect();
    let probe_slots: Vec<usize> = config.probes.iter().map(|p| p.slot).collect();

    let window_totals: Vec<f64> = config
        .windows
        .iter()
        .map(|w| link_state.window_total_dbm(w.user).unwrap_or(f64::NEG_INFINITY))
        .collect();

    let mut ocm = Vec::with_capacity(config.nodes.len());
    for node in &config.nodes {
        let stages = node.node_id as f64;
        let mut total_mw = 0.0;
        let mut per_probe = Vec::with_capacity(probe_slots.len());
        for (slot, power) in link_state.per_slot_power_dbm.iter().enumerate() {
            let Some(dbm) = power else { continue };
            let dbm = match probe_slots.iter().position(|&s| s == slot) {
                Some(i) => {
                    let shifted = dbm - stages * agc[i];
                    per_probe.push(shifted);
                    shifted
                }
                None => *dbm,
            };
            total_mw += db_to_linear(dbm);
        }
        ocm.push(OcmReading {
            node_id: node.node_id,
            per_probe_power_dbm: per_probe,
            window_total_power_dbm: window_totals.clone(),
            node_total_output_dbm: linear_to_db(total_mw)?,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(link_state.rng_seed);
    let jitter = |sigma: f64| Normal::new(0.0, sigma).expect("positive sigma");
    let (n_cfo, n_cdc, n_dgd, n_rx, n_osnr, n_q, n_pdl) = (
        jitter(SIGMA_CFO_MHZ),
        jitter(SIGMA_CDC_PS_NM),
        jitter(SIGMA_DGD_PS),
        jitter(SIGMA_RX_POWER_DB),
        jitter(SIGMA_OSNR_DB),
        jitter(SIGMA_Q_DB),
        jitter(SIGMA_PDL_DB),
    );
    let length = config.total_length_km();
    let last_node = ocm.last().expect("validated config has nodes");

    let mut probes = Vec::with_capacity(config.probes.len());
    for (i, probe) in config.probes.iter().enumerate() {
        let budget = probe_budget(i, link_state)?;
        let q_noise = n_q.sample(&mut rng);
        let cfo = NOMINAL_CFO_MHZ[i % NOMINAL_CFO_MHZ.len()] + n_cfo.sample(&mut rng);
        let cdc = FIBER_DISPERSION_PS_NM_KM * length + n_cdc.sample(&mut rng);
        let dgd = (PMD_PS_PER_SQRT_KM * length.sqrt() + n_dgd.sample(&mut rng)).abs();
        let rx = last_node.per_probe_power_dbm[i] - DROP_PATH_LOSS_DB + n_rx.sample(&mut rng);
        let osnr = budget.osnr_db + n_osnr.sample(&mut rng);
        let pdl = (NOMINAL_PDL_DB + n_pdl.sample(&mut rng)).abs();
        probes.push(ProbeReading {
            probe_id: probe.probe_id,
            slot: probe.slot,
            cfo_mhz: cfo,
            cdc_ps_nm: cdc,
            dgd_ps: dgd,
            rx_power_dbm: rx,
            osnr_db: osnr,
            q_factor_db: budget.q_factor_db + q_noise,
            pdl_db: pdl,
            electrical_snr_db: budget.electrical_snr_db + q_noise,
        });
    }

    Ok(Propagation { ocm, probes })
}
