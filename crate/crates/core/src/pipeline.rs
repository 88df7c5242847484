//! Stage functions behind the command line, plus the end-to-end `reproduce`
//! run that writes every artifact and a hash manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{build_datasets, stratified_split, SplitIndices, TensorDataset};
use crate::error::{Error, Result};
use crate::metrics::{compare, ComparisonTable, EvalReport};
use crate::nn::{AdamState, Classifier, CnnArch, CnnModel, MlpModel};
use crate::scenarios::{build_corpus, derive_label, write_corpus, Composition, ImpairmentKind, Label, LabeledSnapshot};
use crate::seed::{derive_seed, stream};
use crate::topology::NetworkConfig;
use crate::train::{train, Checkpoint, TrainConfig, TrainedModel, CHECKPOINT_SCHEMA_VERSION, DEFAULT_EPOCHS};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const SMOKE_SAMPLES: usize = 300;
pub const SMOKE_EPOCHS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Default,
    Smoke,
}

impl Profile {
    pub fn composition(self) -> Composition {
        match self {
            Profile::Default => Composition::default(),
            Profile::Smoke => Composition::scaled(SMOKE_SAMPLES),
        }
    }

    pub fn epochs(self) -> usize {
        match self {
            Profile::Default => DEFAULT_EPOCHS,
            Profile::Smoke => SMOKE_EPOCHS,
        }
    }

    /// Minimum CNN test accuracy the run must reach.
    pub fn accuracy_floor(self) -> f64 {
        match self {
            Profile::Default => 0.90,
            Profile::Smoke => 0.70,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Mlp,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(ModelKind::Cnn),
            "mlp" | "base" => Ok(ModelKind::Mlp),
            other => Err(Error::Domain(format!("unknown model '{other}' (expected cnn or mlp)"))),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes via a `.partial` sibling and renames, so readers never see a
/// truncated artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn simulate(config: &NetworkConfig, composition: &Composition, corpus_seed: u64) -> Result<Vec<LabeledSnapshot>> {
    build_corpus(config, composition, corpus_seed).map_err(|e| e.in_stage("simulate"))
}

pub fn corpus_bytes(corpus: &[LabeledSnapshot]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf)?;
    Ok(buf)
}

pub fn make_datasets(corpus: &[LabeledSnapshot], split_seed: u64) -> Result<(SplitIndices, TensorDataset, TensorDataset)> {
    let run = || {
        let labels: Vec<Label> = corpus.iter().map(|s| s.label).collect();
        let split = stratified_split(&labels, split_seed)?;
        let (train, test) = build_datasets(corpus, &split)?;
        Ok((split, train, test))
    };
    run().map_err(|e: Error| e.in_stage("dataset"))
}

/// Trains a fresh model of `kind` with init and shuffle seeds drawn from `seed`.
pub fn train_model(kind: ModelKind, data: &TensorDataset, epochs: usize, seed: u64) -> Result<Checkpoint> {
    let run = || {
        let labels = data.labels();
        let (model, adam, config, trace) = match kind {
            ModelKind::Cnn => {
                let mut model = CnnModel::new(CnnArch::default(), derive_seed(seed, stream::CNN_INIT))?;
                let config = TrainConfig::new(epochs, derive_seed(seed, stream::CNN_SHUFFLE));
                let mut adam = AdamState::for_params(&model.params(), config.learning_rate);
                let trace = train(&mut model, &mut adam, &data.tensors(), &labels, &config)?;
                (TrainedModel::Cnn(model), adam, config, trace)
            }
            ModelKind::Mlp => {
                let xs = data.flat_features();
                let refs: Vec<&Vec<f64>> = xs.iter().collect();
                let dim = xs.first().map_or(0, Vec::len);
                let mut model = MlpModel::baseline(dim, Label::COUNT, derive_seed(seed, stream::MLP_INIT));
                let config = TrainConfig::new(epochs, derive_seed(seed, stream::MLP_SHUFFLE));
                let mut adam = AdamState::for_params(&model.params(), config.learning_rate);
                let trace = train(&mut model, &mut adam, &refs, &labels, &config)?;
                (TrainedModel::Mlp(model), adam, config, trace)
            }
        };
        Ok(Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            model,
            adam,
            norm_params: data.norm_params.clone(),
            split_id: data.split_id.clone(),
            train_config: config,
            loss_trace: trace,
        })
    };
    run().map_err(|e: Error| e.in_stage("train"))
}

/// Scores a checkpoint on a test set built from the same split.
pub fn evaluate(checkpoint: &Checkpoint, test: &TensorDataset) -> Result<EvalReport> {
    let run = || {
        if checkpoint.split_id != test.split_id {
            return Err(Error::SplitMismatch {
                left: checkpoint.split_id.clone(),
                right: test.split_id.clone(),
            });
        }
        let predicted = match &checkpoint.model {
            TrainedModel::Cnn(m) => test.samples.iter().map(|s| m.predict(&s.tensor)).collect::<Result<Vec<_>>>()?,
            TrainedModel::Mlp(m) => test
                .samples
                .iter()
                .map(|s| m.predict(&s.tensor.flat_features()))
                .collect::<Result<Vec<_>>>()?,
        };
        EvalReport::from_predictions(checkpoint.model.name(), &test.split_id, &test.labels(), &predicted, &test.kinds())
    };
    run().map_err(|e: Error| e.in_stage("evaluate"))
}

pub fn report(base: &EvalReport, cnn: &EvalReport) -> Result<ComparisonTable> {
    compare(base, cnn).map_err(|e| e.in_stage("report"))
}

/// Comparison table followed by both confusion matrices.
pub fn render_comparison(base: &EvalReport, cnn: &EvalReport, table: &ComparisonTable) -> String {
    format!("{}\n{}\n{}", table.render_text(), base.render_text(), cnn.render_text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Integrity checks on a freshly generated corpus and its split.
pub fn corpus_checks(corpus: &[LabeledSnapshot], composition: &Composition, split: &SplitIndices) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    checks.push(CheckResult::new(
        "corpus size",
        corpus.len() == composition.total(),
        format!("{} snapshots, {} requested", corpus.len(), composition.total()),
    ));

    let mut pair_ok = true;
    let mut detail = Vec::new();
    for quota in &composition.impaired {
        let n = corpus
            .iter()
            .filter(|s| s.label == Label::from_user(quota.user) && s.impairment_kind() == quota.kind)
            .count();
        pair_ok &= n == quota.count;
        detail.push(format!("{}/{}={n}", quota.user, quota.kind));
    }
    let clean = corpus.iter().filter(|s| s.label == Label::NoImpairment).count();
    pair_ok &= clean == composition.clean;
    detail.push(format!("clean={clean}"));
    checks.push(CheckResult::new("per-pair composition", pair_ok, detail.join(" ")));

    let rederived = corpus
        .iter()
        .filter(|s| derive_label(&s.features, &s.scenario.impairment) == Some(s.label))
        .count();
    checks.push(CheckResult::new(
        "label re-derivation",
        rederived == corpus.len(),
        format!("{rederived}/{} labels reproduced from stored Q", corpus.len()),
    ));

    let mut split_ok = true;
    let mut detail = Vec::new();
    for label in Label::ALL {
        let n = corpus.iter().filter(|s| s.label == label).count();
        let in_test = split.test.iter().filter(|&&i| corpus[i].label == label).count();
        split_ok &= (in_test as f64 - n as f64 / 4.0).abs() <= 1.0;
        detail.push(format!("{label}: {in_test}/{n}"));
    }
    checks.push(CheckResult::new("stratified 3:1 split", split_ok, detail.join(", ")));
    checks
}

pub fn model_checks(profile: Profile, base: &EvalReport, cnn: &EvalReport) -> Vec<CheckResult> {
    let floor = profile.accuracy_floor();
    vec![
        CheckResult::new(
            "CNN accuracy floor",
            cnn.accuracy >= floor,
            format!("{:.4} (floor {floor})", cnn.accuracy),
        ),
        CheckResult::new(
            "CNN at least as accurate as baseline",
            cnn.accuracy >= base.accuracy,
            format!("CNN {:.4} vs MLP {:.4}", cnn.accuracy, base.accuracy),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub master: u64,
    pub corpus: u64,
    pub split: u64,
    pub cnn: u64,
    pub mlp: u64,
}

impl SeedSet {
    pub fn from_master(master: u64) -> Self {
        SeedSet {
            master,
            corpus: derive_seed(master, stream::CORPUS),
            split: derive_seed(master, stream::SPLIT),
            cnn: master,
            mlp: master,
        }
    }
}

/// Deterministic record of a run. Contains no timestamps or host details,
/// so two runs with the same inputs produce the same manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub profile: Profile,
    pub seeds: SeedSet,
    /// Config file the run was given, if any; the built-in layout otherwise.
    pub config_path: Option<String>,
    pub config_sha256: String,
    pub composition: Composition,
    pub epochs: usize,
    pub artifacts: Vec<ArtifactHash>,
    pub checks: Vec<CheckResult>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn artifact(&self, name: &str) -> Option<&ArtifactHash> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub master_seed: u64,
    pub profile: Profile,
    pub config: NetworkConfig,
    pub config_path: Option<PathBuf>,
    pub composition: Option<Composition>,
    pub epochs: Option<usize>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ReproduceOutcome {
    pub manifest: RunManifest,
    pub cnn: EvalReport,
    pub base: EvalReport,
    pub table: ComparisonTable,
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const TRAIN_FILE: &str = "train.json";
pub const TEST_FILE: &str = "test.json";
pub const CNN_CHECKPOINT_FILE: &str = "cnn.checkpoint.json";
pub const MLP_CHECKPOINT_FILE: &str = "mlp.checkpoint.json";
pub const CNN_REPORT_FILE: &str = "cnn.report.json";
pub const MLP_REPORT_FILE: &str = "mlp.report.json";
pub const TABLE_TEXT_FILE: &str = "comparison.txt";
pub const TABLE_CSV_FILE: &str = "comparison.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

struct ArtifactWriter<'a> {
    dir: &'a Path,
    hashes: Vec<ArtifactHash>,
    written: &'a mut Vec<String>,
}

impl ArtifactWriter<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        self.hashes.push(ArtifactHash {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

/// Corpus, split, both models, reports and comparison table from one master
/// seed, all written under `out_dir`. If a stage fails, artifacts already
/// written are renamed with a `.partial` suffix.
pub fn reproduce(opts: &ReproduceOptions) -> Result<ReproduceOutcome> {
    let mut written = Vec::new();
    let result = reproduce_inner(opts, &mut written);
    if result.is_err() {
        for name in &written {
            let path = opts.out_dir.join(name);
            let _ = fs::rename(&path, opts.out_dir.join(format!("{name}.partial")));
        }
    }
    result
}

fn reproduce_inner(opts: &ReproduceOptions, written: &mut Vec<String>) -> Result<ReproduceOutcome> {
    let config = opts.config.clone().checked().map_err(|e| e.in_stage("config"))?;
    let composition = opts.composition.clone().unwrap_or_else(|| opts.profile.composition());
    let epochs = opts.epochs.unwrap_or_else(|| opts.profile.epochs());
    let seeds = SeedSet::from_master(opts.master_seed);
    let mut out = ArtifactWriter {
        dir: &opts.out_dir,
        hashes: Vec::new(),
        written,
    };

    let corpus = simulate(&config, &composition, seeds.corpus)?;
    out.put(CORPUS_FILE, &corpus_bytes(&corpus)?)?;

    let (split, train_set, test_set) = make_datasets(&corpus, seeds.split)?;
    out.put(TRAIN_FILE, serde_json::to_string(&train_set)?.as_bytes())?;
    out.put(TEST_FILE, serde_json::to_string(&test_set)?.as_bytes())?;
    let mut checks = corpus_checks(&corpus, &composition, &split);

    let cnn_ckpt = train_model(ModelKind::Cnn, &train_set, epochs, seeds.cnn)?;
    out.put(CNN_CHECKPOINT_FILE, cnn_ckpt.to_json_string()?.as_bytes())?;
    let mlp_ckpt = train_model(ModelKind::Mlp, &train_set, epochs, seeds.mlp)?;
    out.put(MLP_CHECKPOINT_FILE, mlp_ckpt.to_json_string()?.as_bytes())?;

    let cnn = evaluate(&cnn_ckpt, &test_set)?;
    let base = evaluate(&mlp_ckpt, &test_set)?;
    out.put(CNN_REPORT_FILE, serde_json::to_string_pretty(&cnn)?.as_bytes())?;
    out.put(MLP_REPORT_FILE, serde_json::to_string_pretty(&base)?.as_bytes())?;
    let table = report(&base, &cnn)?;
    out.put(TABLE_TEXT_FILE, render_comparison(&base, &cnn, &table).as_bytes())?;
    out.put(TABLE_CSV_FILE, table.to_csv().as_bytes())?;
    checks.extend(model_checks(opts.profile, &base, &cnn));

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        profile: opts.profile,
        seeds,
        config_path: opts.config_path.as_ref().map(|p| p.display().to_string()),
        config_sha256: sha256_hex(config.to_json_string()?.as_bytes()),
        composition,
        epochs,
        artifacts: out.hashes,
        checks,
    };
    write_atomic(&opts.out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    written.push(MANIFEST_FILE.to_string());
    Ok(ReproduceOutcome {
        manifest,
        cnn,
        base,
        table,
    })
}

/// Impairment kind counts, for quick corpus summaries.
pub fn kind_counts(corpus: &[LabeledSnapshot]) -> [(ImpairmentKind, usize); 3] {
    [ImpairmentKind::None, ImpairmentKind::PowerRamp, ImpairmentKind::AddDrop]
        .map(|k| (k, corpus.iter().filter(|s| s.impairment_kind() == k).count()))
}
