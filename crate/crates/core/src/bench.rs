//! Experiment harness: data -> features -> model grid -> metrics.
//!
//! Protocol: binarize, stratified split, undersample the training part only,
//! fit the standardizer on the training part, evaluate on the untouched
//! (naturally imbalanced) test part. Every model gets its own seed derived
//! from the master seed and its tag, so results do not depend on grid order
//! or parallelism.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{balance, binarize, ingest_csv, split, synth_generate, BalanceStrategy, ColumnMap, Dataset, SynthConfig};
use crate::encode::EncoderConfig;
use crate::error::{Error, Result};
use crate::evalkit::{evaluate, Footprint, MetricsReport};
use crate::flowfeat::{extract, log_transform, FeatureConfig, FeatureVector, FlowClass, Standardizer, NUM_FEATURES};
use crate::kernelml::{default_gamma, rbf_cross, rbf_gram, ridge_fit, smo_fit, KernelDescriptor, KernelRidgeModel, SmoConfig, SvmModel};
use crate::qkernel::{cross_gram, gram, repair, KernelMode};
use crate::qtnn::{qt_train, QtArch, QtnnModel, WeightMap};
use crate::simcore::sim_counters;
use crate::util::{derive_seed_str, sha256_hex, write_atomic};
use crate::vqc::{predict, train, QnnModel, TrainConfig, TrainTrace};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KernelLearner {
    #[default]
    Svm,
    Ridge,
}

/// One entry of the model grid, written as a tag: `SVM`, `QKERNEL`,
/// `QKERNEL-RIDGE`, `QNN-6L`, `HYBRID-4L`, `QTNN-4-2` (hidden width, layers).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelDescriptor {
    Svm,
    QKernel(Option<KernelLearner>),
    Qnn(usize),
    Hybrid(usize),
    Qtnn { hidden: usize, layers: usize },
}

impl std::fmt::Display for ModelDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelDescriptor::Svm => write!(f, "SVM"),
            ModelDescriptor::QKernel(None) => write!(f, "QKERNEL"),
            ModelDescriptor::QKernel(Some(KernelLearner::Svm)) => write!(f, "QKERNEL-SVM"),
            ModelDescriptor::QKernel(Some(KernelLearner::Ridge)) => write!(f, "QKERNEL-RIDGE"),
            ModelDescriptor::Qnn(l) => write!(f, "QNN-{l}L"),
            ModelDescriptor::Hybrid(l) => write!(f, "HYBRID-{l}L"),
            ModelDescriptor::Qtnn { hidden, layers } => write!(f, "QTNN-{hidden}-{layers}"),
        }
    }
}

impl std::str::FromStr for ModelDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tag = s.trim().to_ascii_uppercase();
        let unknown = || Error::UnknownModel(s.to_string());
        let layers = |rest: &str| -> Result<usize> { rest.strip_suffix('L').unwrap_or(rest).parse::<usize>().ok().filter(|&l| l > 0).ok_or_else(unknown) };
        match tag.as_str() {
            "SVM" => return Ok(ModelDescriptor::Svm),
            "QKERNEL" => return Ok(ModelDescriptor::QKernel(None)),
            "QKERNEL-SVM" => return Ok(ModelDescriptor::QKernel(Some(KernelLearner::Svm))),
            "QKERNEL-RIDGE" => return Ok(ModelDescriptor::QKernel(Some(KernelLearner::Ridge))),
            _ => {}
        }
        if let Some(rest) = tag.strip_prefix("QNN-") {
            return Ok(ModelDescriptor::Qnn(layers(rest)?));
        }
        if let Some(rest) = tag.strip_prefix("HYBRID-") {
            return Ok(ModelDescriptor::Hybrid(layers(rest)?));
        }
        if let Some(rest) = tag.strip_prefix("QTNN-") {
            let (h, l) = rest.split_once('-').ok_or_else(unknown)?;
            let hidden = h.parse::<usize>().ok().filter(|&h| h > 0).ok_or_else(unknown)?;
            return Ok(ModelDescriptor::Qtnn { hidden, layers: layers(l)? });
        }
        Err(unknown())
    }
}

impl TryFrom<String> for ModelDescriptor {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelDescriptor> for String {
    fn from(d: ModelDescriptor) -> String {
        d.to_string()
    }
}

impl ModelDescriptor {
    /// The footprint a correctly built model must report; `None` for
    /// kernel models, whose support set is data-dependent.
    pub fn expected_footprint(&self, num_qubits: usize) -> Option<Footprint> {
        match *self {
            ModelDescriptor::Svm | ModelDescriptor::QKernel(_) => None,
            ModelDescriptor::Qnn(l) => Some(Footprint { qubits: num_qubits, layers: l, classical_params: 0, quantum_params: num_qubits * l }),
            ModelDescriptor::Hybrid(l) => {
                Some(Footprint { qubits: num_qubits, layers: l, classical_params: 2 * num_qubits + 2, quantum_params: num_qubits * l })
            }
            ModelDescriptor::Qtnn { hidden, layers } => Some(QtArch { input_dim: num_qubits, hidden, layers }.footprint()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synth(SynthConfig),
    Ingest {
        path: PathBuf,
        /// JSON column map; canonical headers when absent.
        #[serde(default)]
        column_map: Option<PathBuf>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratio: 0.7, seed: 11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    pub pmr_window: f64,
    pub dar_epsilon: f64,
    pub min_duration: f64,
    /// Angle scale of the encoding `RY(kappa x_j)`.
    pub kappa: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        let f = FeatureConfig::default();
        FeatureOptions { pmr_window: f.pmr_window, dar_epsilon: f.dar_epsilon, min_duration: f.min_duration, kappa: 1.0 }
    }
}

impl FeatureOptions {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig { pmr_window: self.pmr_window, dar_epsilon: self.dar_epsilon, min_duration: self.min_duration }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmOptions {
    pub c: f64,
    /// RBF width; `1 / (d var(X))` on the training features when absent.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        let s = SmoConfig::default();
        SvmOptions { c: s.c, gamma: None, tol: s.tol, max_passes: s.max_passes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QKernelOptions {
    pub learner: KernelLearner,
    pub mode: KernelMode,
    pub c: f64,
    pub lambda: f64,
}

impl Default for QKernelOptions {
    fn default() -> Self {
        QKernelOptions { learner: KernelLearner::Svm, mode: KernelMode::Exact, c: 1.0, lambda: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub data: DataSource,
    pub balance: BalanceStrategy,
    pub split: SplitConfig,
    pub features: FeatureOptions,
    pub models: Vec<ModelDescriptor>,
    pub train: TrainConfig,
    pub svm: SvmOptions,
    pub qkernel: QKernelOptions,
    pub qtnn_beta: f64,
    /// Global shot budget; overrides the kernel mode and `train.shots` when set.
    pub shots: Option<u64>,
    /// Run grid entries concurrently. Results are identical either way.
    pub parallel_models: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 7,
            data: DataSource::default(),
            balance: BalanceStrategy::Undersample,
            split: SplitConfig::default(),
            features: FeatureOptions::default(),
            models: default_grid(),
            train: TrainConfig::default(),
            svm: SvmOptions::default(),
            qkernel: QKernelOptions::default(),
            qtnn_beta: 1.0,
            shots: None,
            parallel_models: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// The full comparison grid: classical and quantum-kernel SVMs, pure and
/// hybrid QNNs at increasing depth, and five QT-NN shapes.
pub fn default_grid() -> Vec<ModelDescriptor> {
    use ModelDescriptor::*;
    let mut g = vec![Svm, QKernel(None), Qnn(6), Qnn(8), Qnn(10)];
    g.extend([2, 4, 6, 8, 10].map(Hybrid));
    g.extend([(4, 2), (8, 2), (4, 4), (8, 4), (16, 4)].map(|(hidden, layers)| Qtnn { hidden, layers }));
    g
}

/// Sets `path` (dot-separated) in a JSON document. The value is parsed as
/// JSON when possible and taken as a string otherwise; missing objects are
/// created along the way.
pub fn set_path(doc: &mut serde_json::Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path `{path}`")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| Error::Config(format!("`{path}`: `{key}` is not inside an object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| Error::Config(format!("`{path}` does not end in an object field")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses a config and applies `key.path=value` overrides.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: serde_json::Value = if text.trim().is_empty() { serde_json::json!({}) } else { serde_json::from_str(text)? };
        // fill defaults first so overrides can reach into nested sections
        let base = serde_json::to_value(serde_json::from_value::<ExperimentConfig>(doc.clone())?)?;
        doc = base;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            set_path(&mut doc, k.trim(), v.trim())?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::from_json_with_overrides(&std::fs::read_to_string(path)?, overrides)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.models.is_empty() {
            return Err(Error::Config("model grid is empty".into()));
        }
        if !(self.features.kappa.is_finite() && self.features.pmr_window > 0.0) {
            return Err(Error::Config("kappa must be finite and pmr_window > 0".into()));
        }
        self.effective_train().validate()
    }

    pub fn effective_train(&self) -> TrainConfig {
        TrainConfig { shots: self.shots.or(self.train.shots), ..self.train.clone() }
    }

    pub fn effective_kernel_mode(&self) -> KernelMode {
        match self.shots {
            Some(m) => KernelMode::Shots(m),
            None => self.qkernel.mode,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig { num_qubits: NUM_FEATURES, kappa: self.features.kappa, ..Default::default() }
    }

    pub fn model_seed(&self, d: &ModelDescriptor) -> u64 {
        derive_seed_str(self.seed, &d.to_string())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Synth(s) => synth_generate(s),
            DataSource::Ingest { path, column_map } => {
                let map = match column_map {
                    Some(p) => ColumnMap::from_json(&std::fs::read_to_string(p)?)?,
                    None => ColumnMap::default(),
                };
                Ok(ingest_csv(path, &map)?.0)
            }
        }
    }
}

/// Standardized train/test matrices and the bookkeeping behind them.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<i8>,
    pub train_classes: Vec<FlowClass>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<i8>,
    pub test_classes: Vec<FlowClass>,
    pub standardizer: Standardizer,
    pub train_features: Vec<FeatureVector>,
    pub test_features: Vec<FeatureVector>,
    pub summary: DataSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub records: usize,
    pub train_size: usize,
    pub train_positives: usize,
    pub test_size: usize,
    pub test_positives: usize,
    pub test_prevalence: f64,
    pub imputed_features: usize,
    /// Dataset positions of the test records, for leakage audits.
    pub test_indices: Vec<usize>,
    pub train_indices: Vec<usize>,
}

fn logged(ds: &Dataset, cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    ds.records().par_iter().map(|r| log_transform(&extract(r, cfg)?)).collect()
}

/// Splits, balances the training part and standardizes both parts with
/// statistics from the training part only.
pub fn prepare(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Prepared> {
    let ds = binarize(ds);
    let sp = split(&ds, cfg.split.ratio, cfg.split.seed)?;
    let (train_full, test) = sp.apply(&ds)?;
    let balance_seed = derive_seed_str(cfg.seed, "balance");
    let train = balance(&train_full, cfg.balance, balance_seed)?;

    // map balanced-train rows back to dataset positions
    let kept = balanced_positions(&train_full, &train);
    let train_indices: Vec<usize> = kept.iter().map(|&k| sp.train_indices()[k]).collect();

    let fc = cfg.features.feature_config();
    let train_logged = logged(&train, &fc)?;
    let test_logged = logged(&test, &fc)?;
    let standardizer = Standardizer::fit(&train_logged)?;
    let train_features: Vec<FeatureVector> = train_logged.iter().map(|f| standardizer.apply(f)).collect::<Result<_>>()?;
    let test_features: Vec<FeatureVector> = test_logged.iter().map(|f| standardizer.apply(f)).collect::<Result<_>>()?;
    let imputed = train_features.iter().chain(&test_features).filter(|f| f.imputed).count();
    let (train_pos, _) = train.binary_counts();
    let (test_pos, _) = test.binary_counts();
    Ok(Prepared {
        train_x: train_features.iter().map(|f| f.values.to_vec()).collect(),
        train_y: train.labels(),
        train_classes: train.records().iter().map(|r| r.label).collect(),
        test_x: test_features.iter().map(|f| f.values.to_vec()).collect(),
        test_y: test.labels(),
        test_classes: test.records().iter().map(|r| r.label).collect(),
        standardizer,
        train_features,
        test_features,
        summary: DataSummary {
            records: ds.len(),
            train_size: train.len(),
            train_positives: train_pos,
            test_size: test.len(),
            test_positives: test_pos,
            test_prevalence: test_pos as f64 / test.len().max(1) as f64,
            imputed_features: imputed,
            test_indices: sp.test_indices().to_vec(),
            train_indices,
        },
    })
}

/// Positions in `full` of the records kept in `sub`, which preserves order.
fn balanced_positions(full: &Dataset, sub: &Dataset) -> Vec<usize> {
    let mut out = Vec::with_capacity(sub.len());
    let mut j = 0;
    for (i, r) in full.records().iter().enumerate() {
        if j < sub.len() && sub.records()[j] == *r {
            out.push(i);
            j += 1;
        }
    }
    out
}

/// A fitted grid entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Svm { svm: SvmModel },
    KernelRidge { ridge: KernelRidgeModel },
    Qnn { qnn: QnnModel },
    Qtnn { qtnn: QtnnModel },
}

impl TrainedModel {
    pub fn footprint(&self) -> Footprint {
        match self {
            TrainedModel::Svm { svm } => kernel_footprint(&svm.kernel, svm.dual_coefs.len() + 1),
            TrainedModel::KernelRidge { ridge } => kernel_footprint(&ridge.kernel, ridge.alpha.len()),
            TrainedModel::Qnn { qnn } => qnn.footprint(),
            TrainedModel::Qtnn { qtnn } => qtnn.footprint(),
        }
    }

    /// `(score, label)` per sample.
    pub fn score(&self, xs: &[Vec<f64>], seed: u64) -> Result<Vec<(f64, i8)>> {
        match self {
            TrainedModel::Svm { svm } => kernel_rows(&svm.kernel, xs, &svm.support_refs, seed)?.iter().map(|r| svm.predict(r)).collect(),
            TrainedModel::KernelRidge { ridge } => kernel_rows(&ridge.kernel, xs, &ridge.train_refs, seed)?.iter().map(|r| ridge.predict(r)).collect(),
            TrainedModel::Qnn { qnn } => xs.par_iter().map(|x| predict(x, qnn)).collect(),
            TrainedModel::Qtnn { qtnn } => {
                let w = qtnn.weights()?;
                xs.iter().map(|x| qtnn.predict_with(x, &w)).collect()
            }
        }
    }
}

/// Kernel models: qubits of the feature map (0 for RBF), one encoding
/// layer, no trainable circuit angles; classical count is the dual
/// coefficients kept (plus bias for the SVM).
fn kernel_footprint(k: &KernelDescriptor, classical: usize) -> Footprint {
    let qubits = match k {
        KernelDescriptor::Quantum { encoder, .. } => encoder.num_qubits,
        _ => 0,
    };
    Footprint { qubits, layers: (qubits > 0) as usize, classical_params: classical, quantum_params: 0 }
}

fn kernel_rows(k: &KernelDescriptor, xs: &[Vec<f64>], refs: &[Vec<f64>], seed: u64) -> Result<Vec<Vec<f64>>> {
    match k {
        KernelDescriptor::Rbf { gamma } => rbf_cross(xs, refs, *gamma),
        KernelDescriptor::Quantum { encoder, mode } => cross_gram(xs, refs, *mode, encoder, seed),
        KernelDescriptor::Precomputed => Err(Error::Config("precomputed-kernel model cannot score raw features".into())),
    }
}

/// Fits one grid entry on the standardized training matrix.
pub fn fit_model(cfg: &ExperimentConfig, d: &ModelDescriptor, xs: &[Vec<f64>], ys: &[i8]) -> Result<(TrainedModel, Option<TrainTrace>)> {
    let seed = cfg.model_seed(d);
    let n_q = xs.first().map_or(NUM_FEATURES, Vec::len);
    let mut tc = cfg.effective_train();
    tc.seed = seed;
    let out = match *d {
        ModelDescriptor::Svm => {
            let gamma = cfg.svm.gamma.unwrap_or_else(|| default_gamma(xs));
            let k = rbf_gram(xs, gamma)?;
            let smo = SmoConfig { c: cfg.svm.c, tol: cfg.svm.tol, max_passes: cfg.svm.max_passes };
            let svm = smo_fit(&k, ys, &smo)?.with_refs(xs, KernelDescriptor::Rbf { gamma });
            (TrainedModel::Svm { svm }, None)
        }
        ModelDescriptor::QKernel(learner) => {
            let mode = cfg.effective_kernel_mode();
            let enc = EncoderConfig { num_qubits: n_q, ..cfg.encoder() };
            let mut k = gram(xs, mode, &enc, seed)?;
            let desc = KernelDescriptor::Quantum { encoder: enc, mode };
            match learner.unwrap_or(cfg.qkernel.learner) {
                KernelLearner::Svm => {
                    if matches!(mode, KernelMode::Shots(_)) {
                        k = repair(&k, -1.0);
                    }
                    let smo = SmoConfig { c: cfg.qkernel.c, tol: cfg.svm.tol, max_passes: cfg.svm.max_passes };
                    let svm = smo_fit(&k, ys, &smo)?.with_refs(xs, desc);
                    (TrainedModel::Svm { svm }, None)
                }
                KernelLearner::Ridge => {
                    let ridge = ridge_fit(&k, ys, cfg.qkernel.lambda)?.with_refs(xs.to_vec(), desc);
                    (TrainedModel::KernelRidge { ridge }, None)
                }
            }
        }
        ModelDescriptor::Qnn(l) | ModelDescriptor::Hybrid(l) => {
            let mut m = if matches!(d, ModelDescriptor::Qnn(_)) { QnnModel::pure(n_q, l, seed)? } else { QnnModel::hybrid(n_q, l, seed)? };
            m.encoder.kappa = cfg.features.kappa;
            let (m, trace) = train(xs, ys, &m, &tc)?;
            (TrainedModel::Qnn { qnn: m }, Some(trace))
        }
        ModelDescriptor::Qtnn { hidden, layers } => {
            let arch = QtArch { input_dim: n_q, hidden, layers };
            let m = QtnnModel::new(arch, WeightMap { beta: cfg.qtnn_beta }, seed)?;
            let (m, trace) = qt_train(xs, ys, &m, &tc)?;
            (TrainedModel::Qtnn { qtnn: m }, Some(trace))
        }
    };
    if let Some(expected) = d.expected_footprint(n_q) {
        let got = out.0.footprint();
        if got != expected {
            return Err(Error::Config(format!("{d}: footprint {got:?} does not match expected {expected:?}")));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub metrics: Option<MetricsReport>,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub data_seconds: f64,
    pub features_seconds: f64,
    pub models_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub circuits_run: u64,
    pub shots_drawn: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub split_seed: u64,
    pub data: DataSummary,
    pub rows: Vec<ModelRow>,
    pub timings: PhaseTimes,
    /// Simulator counters over the run (process-wide, so concurrent work
    /// elsewhere in the process is included).
    pub simulator: SimStats,
    pub config: ExperimentConfig,
}

pub const TABLE_COLUMNS: [&str; 16] = [
    "model",
    "qubits",
    "layers",
    "classical_params",
    "quantum_params",
    "accuracy",
    "f1",
    "specificity",
    "sensitivity",
    "mcc",
    "roc_auc",
    "macro_f1",
    "test_samples",
    "status",
    "seed",
    "config_hash",
];

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == "ok")
    }

    pub fn row(&self, tag: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.model == tag)
    }

    /// One line per model; metrics to 6 decimals, no timings, so identical
    /// runs give identical bytes.
    pub fn table_csv(&self) -> String {
        let mut out = TABLE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = match &r.metrics {
                Some(m) => {
                    let f = &m.footprint;
                    vec![
                        f.qubits.to_string(),
                        f.layers.to_string(),
                        f.classical_params.to_string(),
                        f.quantum_params.to_string(),
                        format!("{:.6}", m.accuracy),
                        format!("{:.6}", m.f1),
                        format!("{:.6}", m.specificity),
                        format!("{:.6}", m.sensitivity),
                        format!("{:.6}", m.mcc),
                        m.roc_auc.map(|a| format!("{a:.6}")).unwrap_or_default(),
                        format!("{:.6}", m.macro_f1),
                        m.samples.to_string(),
                    ]
                }
                None => vec![String::new(); 12],
            };
            out.push_str(&r.model);
            for c in cells {
                out.push(',');
                out.push_str(&c);
            }
            out.push_str(&format!(",{},{},{}\n", r.status, r.seed, self.config_hash));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `report.json` and `report.csv` atomically into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let json = dir.join("report.json");
        let csv = dir.join("report.csv");
        write_atomic(&json, self.to_json()?.as_bytes())?;
        write_atomic(&csv, self.table_csv().as_bytes())?;
        Ok((json, csv))
    }
}

fn run_one(cfg: &ExperimentConfig, d: &ModelDescriptor, p: &Prepared) -> ModelRow {
    let seed = cfg.model_seed(d);
    let t0 = Instant::now();
    let fitted = fit_model(cfg, d, &p.train_x, &p.train_y);
    let train_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let result = fitted.and_then(|(m, _)| {
        let scored = m.score(&p.test_x, seed)?;
        let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let preds: Vec<i8> = scored.iter().map(|s| s.1).collect();
        let mut report = evaluate(&preds, Some(&scores), &p.test_y)?;
        report.footprint = m.footprint();
        Ok(report)
    });
    let eval_seconds = t1.elapsed().as_secs_f64();
    match result {
        Ok(m) => ModelRow { model: d.to_string(), seed, status: "ok".into(), error: None, metrics: Some(m), train_seconds, eval_seconds },
        Err(e) => {
            ModelRow { model: d.to_string(), seed, status: "failed".into(), error: Some(format!("{d}: {e}")), metrics: None, train_seconds, eval_seconds }
        }
    }
}

/// Runs the whole grid. Model failures are recorded in their rows; only
/// data or feature errors abort the run.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (c0, s0) = sim_counters();
    let t0 = Instant::now();
    let ds = cfg.load_dataset()?;
    let data_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let prepared = prepare(cfg, &ds)?;
    let features_seconds = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let rows: Vec<ModelRow> = if cfg.parallel_models {
        cfg.models.par_iter().map(|d| run_one(cfg, d, &prepared)).collect()
    } else {
        cfg.models.iter().map(|d| run_one(cfg, d, &prepared)).collect()
    };
    let models_seconds = t2.elapsed().as_secs_f64();
    let (c1, s1) = sim_counters();
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        split_seed: cfg.split.seed,
        data: prepared.summary,
        rows,
        timings: PhaseTimes { data_seconds, features_seconds, models_seconds },
        simulator: SimStats { circuits_run: c1 - c0, shots_drawn: s1 - s0 },
        config: cfg.clone(),
    })
}
