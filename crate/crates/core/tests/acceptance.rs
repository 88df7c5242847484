//! Acceptance criteria, one test each. Every test writes a single
//! `[PASS]`/`[FAIL]` line straight to stderr (visible without `--nocapture`)
//! and then asserts.
//!
//! The two full-size `reproduce` runs are the slow part (a few minutes in
//! the optimised test profile); they are shared between criteria and
//! serialised so the wall-clock measurement is not inflated by other tests.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use osaas_core::dataset::{FeatureTensor, TensorDataset};
use osaas_core::nn::{AdamState, Classifier, CnnArch, CnnModel, Conv1dLayer, MlpModel, Tensor2};
use osaas_core::physics::{
    accumulate_osnr, edfa_agc_coupling, nli_excess_penalty, nli_penalty, nli_penalty_for, propagate, LinkState,
};
use osaas_core::pipeline::{self, Profile, ReproduceOptions, ReproduceOutcome};
use osaas_core::scenarios::{
    link_state, Composition, Impairment, ImpairmentKind, Label, LabeledSnapshot, ScenarioSpec,
};
use osaas_core::topology::{default_config, OsnrLevel, UserId};
use osaas_core::train::{Checkpoint, TrainedModel};

const MASTER_SEED: u64 = 2024;

fn verdict(criterion: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {criterion}: {detail}");
    assert!(ok, "{criterion}: {detail}");
}

fn heavy() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

struct Run {
    dir: PathBuf,
    outcome: ReproduceOutcome,
    elapsed: Duration,
}

/// Artifacts land under cargo's per-target scratch directory so they can be
/// inspected after a run.
fn run_reproduce(profile: Profile, label: &str) -> Run {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(label);
    let _ = std::fs::remove_dir_all(&dir);
    let _guard = heavy();
    let started = Instant::now();
    let outcome = pipeline::reproduce(&ReproduceOptions {
        master_seed: MASTER_SEED,
        profile,
        config: default_config(),
        config_path: None,
        composition: None,
        epochs: None,
        out_dir: dir.clone(),
    })
    .unwrap();
    Run {
        dir,
        outcome,
        elapsed: started.elapsed(),
    }
}

fn default_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run_reproduce(Profile::Default, "default-a"))
}

fn path(run: &Run, name: &str) -> PathBuf {
    run.dir.join(name)
}

/// Central-difference gradient, perturbing one parameter at a time.
fn fd_worst<M: Classifier>(model: &mut M, inputs: &[&M::Input], labels: &[usize]) -> (f64, usize) {
    let h = 1e-5;
    let (_, analytic) = model.loss_and_gradients(inputs, labels).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (g, group) in analytic.iter().enumerate() {
        for (i, &a) in group.iter().enumerate() {
            let orig = model.params()[g][i];
            model.params_mut()[g][i] = orig + h;
            let plus = model.loss_and_gradients(inputs, labels).unwrap().0;
            model.params_mut()[g][i] = orig - h;
            let minus = model.loss_and_gradients(inputs, labels).unwrap().0;
            model.params_mut()[g][i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((a - fd).abs() / (fd.abs() + 1e-8));
            checked += 1;
        }
    }
    (worst, checked)
}

#[test]
fn c1_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    let arch = CnnArch {
        hidden: 8,
        ..CnnArch::default()
    };
    let mut cnn = CnnModel::new(arch, 7).unwrap();
    let mut rand_tensor = |rows: usize, cols: usize| {
        Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    };
    let xs: Vec<FeatureTensor> = (0..4)
        .map(|label| FeatureTensor {
            wavelength: rand_tensor(arch.wavelength_len, arch.wavelength_channels),
            component: rand_tensor(arch.component_len, arch.component_channels),
            label,
        })
        .collect();
    let refs: Vec<&FeatureTensor> = xs.iter().collect();
    let (cnn_err, cnn_n) = fd_worst(&mut cnn, &refs, &[0, 1, 2, 3]);

    let mut mlp = MlpModel::new(8, &[6, 6, 6, 6], 4, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&Vec<f64>> = xs.iter().collect();
    let (mlp_err, mlp_n) = fd_worst(&mut mlp, &refs, &[2, 0, 3, 1]);

    let elapsed = started.elapsed();
    verdict(
        "c1 finite-difference gradient check",
        cnn_err < 1e-4 && mlp_err < 1e-4 && elapsed < Duration::from_secs(60),
        &format!(
            "CNN worst {cnn_err:.2e} over {cnn_n} params, MLP worst {mlp_err:.2e} over {mlp_n} params, {elapsed:.1?}"
        ),
    );
}

#[test]
fn c2_kernels_match_reference_values() {
    // Convolution against a direct triple loop with explicit zero padding.
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut conv_worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.gen_range(1..12);
        let in_ch = rng.gen_range(1..6);
        let kernels = rng.gen_range(1..5);
        let size = [1, 3, 5, 7][rng.gen_range(0..4)];
        let mut layer = Conv1dLayer::zeros(in_ch, kernels, size).unwrap();
        layer.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        let x: Vec<Vec<f64>> = (0..len).map(|_| (0..in_ch).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let out = layer.forward(&Tensor2::from_rows(&x).unwrap()).unwrap();

        let half = size / 2;
        let mut padded = vec![vec![0.0; in_ch]; half];
        padded.extend(x.iter().cloned());
        padded.extend(vec![vec![0.0; in_ch]; half]);
        for t in 0..len {
            for k in 0..kernels {
                let mut expect = layer.bias[k];
                for c in 0..in_ch {
                    for j in 0..size {
                        expect += layer.weights[k * in_ch * size + c * size + j] * padded[t + j][c];
                    }
                }
                conv_worst = conv_worst.max((out.get(t, k) - expect).abs());
            }
        }
    }

    let mut theta = vec![0.0];
    let mut adam = AdamState::new(&[1], 0.001);
    adam.step(vec![&mut theta], &[vec![1.0]]).unwrap();
    let adam_err = (theta[0] - -0.000999999990).abs();

    let osnr = accumulate_osnr(&[20.0, 20.0]).unwrap();
    let osnr_err = (osnr - 16.9897).abs();

    verdict(
        "c2 numeric kernels",
        conv_worst < 1e-12 && adam_err < 1e-12 && osnr_err < 1e-3,
        &format!(
            "conv1d worst abs err {conv_worst:.1e} over 100 cases, adam step {:.12} (err {adam_err:.1e}), \
             accumulate_osnr(20,20) = {osnr:.4}",
            theta[0]
        ),
    );
}

#[test]
fn c3_physics_invariants() {
    let config = default_config();
    let nominal = LinkState::nominal(&config, 0);
    let nominal_ocm = propagate(&nominal).unwrap();

    // ADD/DROP keeps the window total at the first node.
    let mut conservation_worst: f64 = 0.0;
    for user in UserId::ALL {
        let w = config.window(user).unwrap();
        let expected = 10.0 * (w.active_channels.len() as f64 * 10f64.powf(w.per_channel_power_dbm / 10.0)).log10();
        for d in 1..=7 {
            let spec = ScenarioSpec {
                impairment: Impairment::AddDrop {
                    user,
                    channels_dropped: d,
                },
                osnr_level: OsnrLevel::Mid,
                seed: d as u64,
            };
            let state = link_state(&config, &spec).unwrap();
            let out = propagate(&state).unwrap();
            let total = out.ocm[0].window_total_power_dbm[user.index()];
            conservation_worst = conservation_worst.max((total - expected).abs());
        }
    }

    // NLI grows with aggressor power and falls with spectral distance.
    let mut monotone = true;
    let probe_slot = config.probes[1].slot;
    let mut last = 0.0;
    for step in 1..=40 {
        let p = nli_penalty_for(probe_slot, [(probe_slot + 1, step as f64 * 0.25)]);
        monotone &= p > last;
        last = p;
    }
    let mut last = f64::INFINITY;
    for distance in 1..=8 {
        let p = nli_penalty_for(probe_slot, [(probe_slot + distance, 2.0)]);
        monotone &= p < last;
        last = p;
    }
    let mut last = nli_penalty(probe_slot, &nominal);
    for k in 1..=12 {
        let spec = ScenarioSpec {
            impairment: Impairment::PowerRamp {
                user: UserId::User1,
                offset_db: 0.5 * k as f64,
            },
            osnr_level: OsnrLevel::Mid,
            seed: 0,
        };
        let p = nli_penalty(probe_slot, &link_state(&config, &spec).unwrap());
        monotone &= p > last;
        last = p;
    }

    // Nominal loading is a fixed point: no coupling, no excess NLI, probe
    // powers untouched along the line.
    let zero_deltas = vec![0.0; config.windows.len()];
    let mut fixed_worst: f64 = 0.0;
    for probe in &config.probes {
        fixed_worst = fixed_worst.max(edfa_agc_coupling(probe.slot, &zero_deltas, &config).abs());
        fixed_worst = fixed_worst.max(nli_excess_penalty(probe.slot, &nominal).abs());
    }
    for ocm in &nominal_ocm.ocm {
        for (i, p) in ocm.per_probe_power_dbm.iter().enumerate() {
            fixed_worst = fixed_worst.max((p - config.probes[i].launch_power_dbm).abs());
        }
    }

    verdict(
        "c3 physics invariants",
        conservation_worst < 1e-9 && monotone && fixed_worst == 0.0,
        &format!(
            "ADD/DROP first-node window total drift {conservation_worst:.1e} dB (d = 1..7), \
             NLI monotone: {monotone}, nominal coupling {fixed_worst} dB"
        ),
    );
}

/// Independent labelling rule: any probe with Q below 7.3 dB blames the
/// scenario's user.
fn oracle_label(s: &LabeledSnapshot) -> Label {
    let tripped = s.features.probe_readings.iter().any(|p| p.q_factor_db < 7.3);
    match (tripped, s.scenario.impairment.user()) {
        (true, Some(UserId::User1)) => Label::User1,
        (true, Some(UserId::User2)) => Label::User2,
        (true, Some(UserId::User3)) => Label::User3,
        _ => Label::NoImpairment,
    }
}

#[test]
fn c4_corpus_composition_split_and_labels() {
    let seeds = pipeline::SeedSet::from_master(MASTER_SEED);
    let composition = Composition::default();
    let corpus = pipeline::simulate(&default_config(), &composition, seeds.corpus).unwrap();
    let (split, _, _) = pipeline::make_datasets(&corpus, seeds.split).unwrap();

    let mut pairs_ok = true;
    let mut pair_counts = Vec::new();
    for user in UserId::ALL {
        for kind in [ImpairmentKind::PowerRamp, ImpairmentKind::AddDrop] {
            let n = corpus
                .iter()
                .filter(|s| s.label != Label::NoImpairment && s.scenario.impairment.user() == Some(user))
                .filter(|s| s.impairment_kind() == kind)
                .count();
            pairs_ok &= n == 184;
            pair_counts.push(n);
        }
    }

    let mut split_ok = split.train.len() + split.test.len() == corpus.len();
    let mut fractions = Vec::new();
    for label in Label::ALL {
        let n = corpus.iter().filter(|s| s.label == label).count();
        let t = split.test.iter().filter(|&&i| corpus[i].label == label).count();
        split_ok &= (t as f64 - 0.25 * n as f64).abs() <= 1.0;
        fractions.push(format!("{t}/{n}"));
    }

    let agree = corpus.iter().filter(|s| oracle_label(s) == s.label).count();

    verdict(
        "c4 corpus, split and labels",
        corpus.len() == 2920 && pairs_ok && split_ok && agree == corpus.len(),
        &format!(
            "{} snapshots, per-pair {pair_counts:?}, test per class {}, labels re-derived {agree}/{}",
            corpus.len(),
            fractions.join(" "),
            corpus.len()
        ),
    );
}

#[test]
fn c5_reproduce_accuracy_and_runtime() {
    let run = default_run();
    let cnn = run.outcome.cnn.accuracy;
    let base = run.outcome.base.accuracy;
    let default_ok = cnn >= 0.90 && cnn >= base && run.elapsed < Duration::from_secs(15 * 60);

    let smoke = run_reproduce(Profile::Smoke, "smoke");
    let smoke_acc = smoke.outcome.cnn.accuracy;
    let smoke_ok = smoke_acc >= 0.70 && smoke.elapsed < Duration::from_secs(60);

    verdict(
        "c5 reproduce accuracy and runtime",
        default_ok && smoke_ok,
        &format!(
            "default: CNN {cnn:.4} vs MLP {base:.4} in {:.1?}; smoke: CNN {smoke_acc:.4} in {:.1?}",
            run.elapsed, smoke.elapsed
        ),
    );
}

#[test]
fn c6_reproduce_is_deterministic() {
    let first = default_run();
    let second = run_reproduce(Profile::Default, "default-b");
    let a = &first.outcome.manifest;
    let b = &second.outcome.manifest;

    let mut identical = a == b;
    let mut differing = Vec::new();
    for art in &a.artifacts {
        let left = std::fs::read(path(first, &art.name)).unwrap();
        let right = std::fs::read(path(&second, &art.name)).unwrap();
        if left != right {
            identical = false;
            differing.push(art.name.clone());
        }
    }
    let manifests_equal = std::fs::read(path(first, pipeline::MANIFEST_FILE)).unwrap()
        == std::fs::read(path(&second, pipeline::MANIFEST_FILE)).unwrap();

    verdict(
        "c6 byte-identical reruns",
        identical && manifests_equal && a.artifacts.len() == 9,
        &format!(
            "{} artifacts compared, manifests equal: {manifests_equal}, differing: {differing:?}",
            a.artifacts.len()
        ),
    );
}

#[test]
fn c7_metrics_are_consistent_with_counts() {
    let run = default_run();
    let test = TensorDataset::from_json_str(&std::fs::read_to_string(path(run, pipeline::TEST_FILE)).unwrap()).unwrap();
    let mut problems = Vec::new();

    for (file, report) in [
        (pipeline::CNN_CHECKPOINT_FILE, &run.outcome.cnn),
        (pipeline::MLP_CHECKPOINT_FILE, &run.outcome.base),
    ] {
        let ckpt = Checkpoint::load(&path(run, file)).unwrap();
        let mut counts = [[0u64; 4]; 4];
        for s in &test.samples {
            let pred = match &ckpt.model {
                TrainedModel::Cnn(m) => m.predict(&s.tensor).unwrap(),
                TrainedModel::Mlp(m) => m.predict(&s.tensor.flat_features()).unwrap(),
            };
            counts[s.tensor.label][pred] += 1;
        }
        if counts != report.confusion.counts {
            problems.push(format!("{}: confusion differs from recount", report.model));
        }
        let total: u64 = counts.iter().flatten().sum();
        let trace: u64 = (0..4).map(|k| counts[k][k]).sum();
        if report.accuracy != trace as f64 / total as f64 {
            problems.push(format!("{}: accuracy != trace/total", report.model));
        }
        for (k, row) in report.confusion.row_normalized().into_iter().enumerate() {
            let support: u64 = counts[k].iter().sum();
            match row {
                Some(r) if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 => {
                    problems.push(format!("{}: row {k} sums to {}", report.model, r.iter().sum::<f64>()))
                }
                None if support > 0 => problems.push(format!("{}: row {k} missing", report.model)),
                _ => {}
            }
            let predicted: u64 = (0..4).map(|t| counts[t][k]).sum();
            let precision = (predicted > 0).then(|| counts[k][k] as f64 / predicted as f64);
            let recall = (support > 0).then(|| counts[k][k] as f64 / support as f64);
            let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
                (None, None) => true,
                _ => false,
            };
            if !close(report.classes[k].precision, precision) || !close(report.classes[k].recall, recall) {
                problems.push(format!("{}: class {k} precision/recall differ from counts", report.model));
            }
        }
    }

    let table = &run.outcome.table;
    let header = table.render_text();
    let ramp = table.rows.iter().filter(|r| r.scenario == ImpairmentKind::PowerRamp.to_string()).count();
    let add_drop = table.rows.iter().filter(|r| r.scenario == ImpairmentKind::AddDrop.to_string()).count();
    let layout_ok = table.rows.len() == 7
        && table.rows[0].class == Label::NoImpairment
        && ramp == 3
        && add_drop == 3
        && header.contains("Base P")
        && header.contains("CNN P")
        && header.contains("Base R")
        && header.contains("CNN R");
    if !layout_ok {
        problems.push("comparison table layout".into());
    }

    verdict(
        "c7 metric consistency",
        problems.is_empty(),
        &if problems.is_empty() {
            format!("{} test samples recounted for both models, table has 1 + 3 + 3 rows", test.samples.len())
        } else {
            problems.join("; ")
        },
    );
}
