//! Experiment pipelines: simulation, mechanism sweeps, attack audits and reports.
//!
//! A sweep runs every `(mechanism, n, d, ε, seed)` cell of an
//! [`ExperimentConfig`] and writes one JSON object per cell. Cells run on a
//! bounded worker pool; their seeds depend only on the configuration and the
//! cell index, so the output does not depend on the number of workers.
//!
//! Configuration files are TOML:
//!
//! ```toml
//! task = "logistic"            # logistic | regression | nn_classification | nn_regression
//! mechanisms = ["betad_ops", "minami_ops", "chaudhuri", "dpsgd", "non_private"]
//! n = [100, 1000]
//! d = [2]
//! epsilon = [1.0, 6.0]
//! delta = 1e-5
//! seeds = [1, 2, 3]
//! seed = 0                     # base seed for mechanism randomness
//! output = "results.jsonl"
//!
//! [hmc]                        # sampler overrides
//! warmup_iters = 1000
//! keep_iters = 100
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audit::{run_attack, AttackOutcome, AuditConfig, AuditMechanism};
use crate::data::{
    load_csv, minmax_scale, param_rmse, predictive_rmse, roc_auc, train_test_split, MetricReport,
};
use crate::error::{Error, Result};
use crate::hmc::{HmcConfig, MetricKind};
use crate::mechanisms::{
    betad_ops, chaudhuri_release, dpsgd_train, minami_ops, nonprivate_ops, Calibration,
    DpSgdConfig, ReleaseGate, ReleaseOptions, ReleaseReport,
};
use crate::model::{
    draw_theta, simulate_data, DataKind, Dataset, FeatureScaling, GeneratorSpec, ModelSpec, ParamVector, Prior,
};
use crate::privacy::PrivacyBudget;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Logistic,
    Regression,
    NnClassification,
    NnRegression,
}

impl Task {
    pub fn model(self, d: usize, hidden_width: usize, s2: f64) -> Result<ModelSpec> {
        match self {
            Task::Logistic => Ok(ModelSpec::logistic_linear(d)),
            Task::Regression => ModelSpec::gaussian_linear(d, s2),
            Task::NnClassification => Ok(ModelSpec::logistic_mlp(d, hidden_width)),
            Task::NnRegression => ModelSpec::gaussian_mlp(d, hidden_width, s2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismName {
    BetadOps,
    MinamiOps,
    Chaudhuri,
    Dpsgd,
    NonPrivate,
    /// Data-independent control; audits only.
    NoiseOnly,
}

impl MechanismName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BetadOps => "betad_ops",
            Self::MinamiOps => "minami_ops",
            Self::Chaudhuri => "chaudhuri",
            Self::Dpsgd => "dpsgd",
            Self::NonPrivate => "non_private",
            Self::NoiseOnly => "noise_only",
        }
    }
}

/// A CSV file used instead of simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub label_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpSgdOverrides {
    pub clip: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// `None` runs `15 + ⌊ε⌋` epochs.
    pub epochs: Option<usize>,
}

impl Default for DpSgdOverrides {
    fn default() -> Self {
        Self { clip: 1.0, learning_rate: 1e-2, batch_size: 100, epochs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSettings {
    pub rounds: u64,
    pub confidence: f64,
    /// Standard deviation of the noise-only control.
    pub noise_scale: f64,
    /// Regularization of the audited output perturbation; `None` uses `1/(9n)`.
    pub chaudhuri_lambda: Option<f64>,
    #[serde(deserialize_with = "attacker_hmc_fields")]
    pub attacker_hmc: HmcConfig,
}

impl Default for AttackSettings {
    fn default() -> Self {
        Self {
            rounds: 10_000,
            confidence: 0.95,
            noise_scale: 1.0,
            chaudhuri_lambda: None,
            attacker_hmc: HmcConfig::default(),
        }
    }
}

/// Single-chain release sampler with a dense metric, which copes with the
/// strongly correlated posteriors of unscaled-intercept logistic models.
pub fn release_hmc() -> HmcConfig {
    HmcConfig { metric: MetricKind::Dense, ..HmcConfig::release(0) }
}

/// Overlay the fields present in the input on `base`.
fn merge_hmc<'de, D: serde::Deserializer<'de>>(de: D, base: HmcConfig) -> std::result::Result<HmcConfig, D::Error> {
    use serde::de::Error as _;
    let given = serde_json::Value::deserialize(de)?;
    let mut merged = serde_json::to_value(base).map_err(D::Error::custom)?;
    match (given, &mut merged) {
        (serde_json::Value::Object(fields), serde_json::Value::Object(target)) => {
            for (k, v) in fields {
                if !target.contains_key(&k) {
                    return Err(D::Error::custom(format!("unknown hmc field `{k}`")));
                }
                target.insert(k, v);
            }
        }
        _ => return Err(D::Error::custom("hmc settings must be a table")),
    }
    serde_json::from_value(merged).map_err(D::Error::custom)
}

fn release_hmc_fields<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<HmcConfig, D::Error> {
    merge_hmc(de, release_hmc())
}

fn attacker_hmc_fields<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<HmcConfig, D::Error> {
    merge_hmc(de, HmcConfig::default())
}

/// Sweep and audit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub mechanisms: Vec<MechanismName>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub delta: f64,
    /// Replicate seeds; each selects a simulated dataset.
    pub seeds: Vec<u64>,
    /// Base seed of mechanism randomness.
    pub seed: u64,
    pub test_frac: f64,
    pub prior_sd: f64,
    pub hidden_width: usize,
    pub variance_floor_s2: f64,
    pub noise_variance: f64,
    /// `None` uses `1/(9n)`.
    pub chaudhuri_lambda: Option<f64>,
    /// Release sampler; fields left out keep [`release_hmc`] values.
    #[serde(deserialize_with = "release_hmc_fields")]
    pub hmc: HmcConfig,
    pub gate: ReleaseGate,
    pub force_release: bool,
    pub dpsgd: DpSgdOverrides,
    pub attack: AttackSettings,
    pub data: Option<DataSource>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Logistic,
            mechanisms: vec![MechanismName::BetadOps],
            n: vec![1000],
            d: vec![2],
            epsilon: vec![6.0],
            delta: 1e-5,
            seeds: vec![0],
            seed: 0,
            test_frac: 0.1,
            prior_sd: 3.0,
            hidden_width: 10,
            variance_floor_s2: 0.5,
            noise_variance: 1.0,
            chaudhuri_lambda: None,
            hmc: release_hmc(),
            gate: ReleaseGate::default(),
            force_release: false,
            dpsgd: DpSgdOverrides::default(),
            attack: AttackSettings::default(),
            data: None,
            output: None,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.mechanisms.is_empty() || self.n.is_empty() || self.d.is_empty() {
            return bad("mechanisms, n and d must be nonempty");
        }
        if self.epsilon.is_empty() || self.seeds.is_empty() {
            return bad("epsilon and seeds must be nonempty");
        }
        if self.epsilon.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("epsilon values must be positive");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.n.contains(&0) || self.d.contains(&0) {
            return bad("n and d values must be positive");
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad("delta must lie in [0, 1)");
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return bad("test_frac must lie in (0, 1)");
        }
        if !(self.prior_sd > 0.0) {
            return bad("prior_sd must be positive");
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        self.hmc.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded. Execution settings
    /// (`workers`, `output`) do not affect results and are excluded.
    pub fn hash(&self) -> String {
        let canonical = Self { workers: None, output: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn prior(&self) -> Result<Prior> {
        Prior::new(self.prior_sd)
    }
}

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub mechanism: MechanismName,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub seed: u64,
}

/// Cells in mechanism, n, d, ε, seed order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &mechanism in &cfg.mechanisms {
        for &n in &cfg.n {
            for &d in &cfg.d {
                for &epsilon in &cfg.epsilon {
                    for &seed in &cfg.seeds {
                        out.push(Cell { index: out.len(), mechanism, n, d, epsilon, seed });
                    }
                }
            }
        }
    }
    out
}

/// Seed of the dataset for a replicate; shared by all mechanisms and ε values.
pub fn data_seed(replicate: u64, n: usize, d: usize) -> u64 {
    derive_seed(replicate, &[n as u64, d as u64])
}

/// Seed of a replicate's ground-truth θ; shared across `n` so that a
/// replicate traces one truth as the sample grows.
pub fn theta_seed(replicate: u64, d: usize) -> u64 {
    derive_seed(replicate, &[d as u64])
}

fn simulate_replicate(cfg: &ExperimentConfig, n: usize, d: usize, replicate: u64) -> Result<(Dataset, ParamVector)> {
    let model = cfg.task.model(d, cfg.hidden_width, cfg.variance_floor_s2)?;
    let mut gen = GeneratorSpec::new(model, n, theta_seed(replicate, d));
    gen.feature_scaling = FeatureScaling::MinMax;
    gen.noise_variance = cfg.noise_variance;
    gen.theta = Some(draw_theta(&gen)?);
    gen.seed = data_seed(replicate, n, d);
    simulate_data(&gen)
}

/// Seed of a cell's mechanism randomness.
pub fn cell_seed(cfg: &ExperimentConfig, cell: &Cell) -> u64 {
    derive_seed(cfg.seed, &[cell.index as u64])
}

/// One line of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub record_type: String,
    pub config_hash: String,
    pub task: Task,
    pub cell: usize,
    pub mechanism: MechanismName,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub data_seed: u64,
    pub mechanism_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub budget: Option<PrivacyBudget>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub release: Option<ReleaseReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Simulated (or loaded and subsampled) dataset of a cell, scaled to `[0, 1]`.
/// Scaled data of one replicate: simulated, or a seeded subset of the configured CSV.
pub fn cell_data(cfg: &ExperimentConfig, n: usize, d: usize, replicate: u64) -> Result<(Dataset, Option<ParamVector>)> {
    let model = cfg.task.model(d, cfg.hidden_width, cfg.variance_floor_s2)?;
    let (data, theta) = match &cfg.data {
        Some(src) => {
            let full = load_csv(&src.path, &src.label_column, model.kind())?;
            if full.d() != d {
                return Err(Error::DimensionMismatch { expected: d, got: full.d() });
            }
            if n > full.len() {
                return Err(Error::InvalidArgument(format!(
                    "n = {n} exceeds the {} records in {}",
                    full.len(),
                    src.path.display()
                )));
            }
            let mut idx: Vec<usize> = (0..full.len()).collect();
            use rand::seq::SliceRandom;
            idx.shuffle(&mut crate::rng::rng_from_seed(data_seed(replicate, n, d)));
            idx.truncate(n);
            idx.sort_unstable();
            (full.subset(&idx), None)
        }
        None => {
            let (data, theta) = simulate_replicate(cfg, n, d, replicate)?;
            (data, Some(theta))
        }
    };
    Ok((minmax_scale(&data).0, theta))
}

fn release_options(cfg: &ExperimentConfig) -> ReleaseOptions {
    ReleaseOptions { force: cfg.force_release, gate: cfg.gate }
}

/// Release of one mechanism on training data.
pub fn run_mechanism(
    cfg: &ExperimentConfig,
    mechanism: MechanismName,
    train: &Dataset,
    epsilon: f64,
    seed: u64,
) -> Result<ReleaseReport> {
    let d = train.d();
    let model = cfg.task.model(d, cfg.hidden_width, cfg.variance_floor_s2)?;
    let prior = cfg.prior()?;
    let hmc = HmcConfig { seed, ..cfg.hmc.clone() };
    let linear_logistic = || {
        if cfg.task == Task::Logistic {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!(
                "{} supports logistic regression only",
                mechanism.as_str()
            )))
        }
    };
    match mechanism {
        MechanismName::BetadOps => betad_ops(
            train,
            &model,
            &prior,
            Calibration::Epsilon(epsilon),
            &hmc,
            &release_options(cfg),
        ),
        MechanismName::MinamiOps => {
            linear_logistic()?;
            let budget = PrivacyBudget::new(epsilon, cfg.delta)?;
            minami_ops(train, &prior, &budget, &hmc, &release_options(cfg))
        }
        MechanismName::Chaudhuri => {
            linear_logistic()?;
            let lambda = cfg.chaudhuri_lambda.unwrap_or(1.0 / (9.0 * train.len() as f64));
            chaudhuri_release(train, lambda, epsilon, seed)
        }
        MechanismName::Dpsgd => {
            let o = &cfg.dpsgd;
            let epochs = o.epochs.unwrap_or(15 + epsilon.floor() as usize);
            let steps = epochs * train.len().div_ceil(o.batch_size.max(1));
            let dp = DpSgdConfig {
                clip: o.clip,
                noise_multiplier: crate::mechanisms::calibrate_noise_multiplier(epsilon, steps, cfg.delta)?,
                learning_rate: o.learning_rate,
                batch_size: o.batch_size,
                epochs,
                delta: cfg.delta,
                target_epsilon: Some(epsilon),
            };
            dpsgd_train(train, &model, &dp, seed)
        }
        MechanismName::NonPrivate => nonprivate_ops(train, &model, &prior, &hmc, &release_options(cfg)),
        MechanismName::NoiseOnly => Err(Error::InvalidArgument(
            "noise_only is an audit control, not a release mechanism".into(),
        )),
    }
}

/// Parameter and predictive metrics of a release.
pub fn score_release(
    model: &ModelSpec,
    theta: &ParamVector,
    theta_true: Option<&ParamVector>,
    train_len: usize,
    test: &Dataset,
) -> Result<MetricReport> {
    let preds = model.predict_dataset(theta, test)?;
    let param = match theta_true {
        Some(t) if !model.family.is_mlp() => Some(param_rmse(
            &theta[..model.n_mean_params()],
            &t[..model.n_mean_params()],
        )?),
        _ => None,
    };
    let auc = if model.kind() == DataKind::Classification {
        roc_auc(&preds, test.labels()).ok()
    } else {
        None
    };
    Ok(MetricReport {
        param_rmse: param,
        predictive_rmse: Some(predictive_rmse(&preds, test.labels())?),
        roc_auc: auc,
        n_train: train_len,
        n_test: test.len(),
    })
}

fn run_cell(cfg: &ExperimentConfig, hash: &str, cell: &Cell) -> SweepRecord {
    let ds = data_seed(cell.seed, cell.n, cell.d);
    let ms = cell_seed(cfg, cell);
    let mut rec = SweepRecord {
        record_type: "sweep".into(),
        config_hash: hash.to_string(),
        task: cfg.task,
        cell: cell.index,
        mechanism: cell.mechanism,
        n: cell.n,
        d: cell.d,
        epsilon: cell.epsilon,
        seed: cell.seed,
        data_seed: ds,
        mechanism_seed: ms,
        budget: None,
        metrics: None,
        release: None,
        error: None,
    };
    let result = (|| {
        let (data, theta_true) = cell_data(cfg, cell.n, cell.d, cell.seed)?;
        let (train, test) = train_test_split(&data, cfg.test_frac, derive_seed(ds, &[1]))?;
        let release = run_mechanism(cfg, cell.mechanism, &train, cell.epsilon, ms)?;
        let model = cfg.task.model(cell.d, cfg.hidden_width, cfg.variance_floor_s2)?;
        let metrics = score_release(&model, &release.theta_tilde, theta_true.as_ref(), train.len(), &test)?;
        Ok::<_, Error>((release, metrics))
    })();
    match result {
        Ok((release, metrics)) => {
            rec.budget = release.budget;
            rec.metrics = Some(metrics);
            rec.release = Some(release);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

fn open_output(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Run every cell and write one JSON line per cell to `out`.
///
/// Cells run in batches on the worker pool and are appended in cell order as
/// each batch completes. A failing cell yields a record with an `error`
/// field; the sweep continues.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let hash = cfg.hash();
    let all = cells(cfg);
    let pool = pool(cfg.workers)?;
    let mut writer = open_output(out)?;
    let batch = pool.current_num_threads().max(1) * 2;
    let mut records = Vec::with_capacity(all.len());
    for chunk in all.chunks(batch) {
        let done: Vec<SweepRecord> =
            pool.install(|| chunk.par_iter().map(|c| run_cell(cfg, &hash, c)).collect());
        for rec in done {
            serde_json::to_writer(&mut writer, &rec)?;
            writer.write_all(b"\n")?;
            records.push(rec);
        }
        writer.flush()?;
    }
    Ok(records)
}

/// One line of audit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub record_type: String,
    pub config_hash: String,
    pub mechanism: MechanismName,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub budget: Option<PrivacyBudget>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outcome: Option<AttackOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

fn audit_mechanism(cfg: &ExperimentConfig, m: MechanismName, epsilon: f64) -> Result<AuditMechanism> {
    match m {
        MechanismName::Chaudhuri => {
            Ok(AuditMechanism::Chaudhuri { epsilon, lambda: cfg.attack.chaudhuri_lambda })
        }
        MechanismName::BetadOps => Ok(AuditMechanism::BetaDOps { epsilon }),
        MechanismName::MinamiOps => Ok(AuditMechanism::MinamiOps { epsilon, delta: cfg.delta }),
        MechanismName::NoiseOnly => Ok(AuditMechanism::NoiseOnly { scale: cfg.attack.noise_scale }),
        other => Err(Error::Config(format!("{} cannot be audited", other.as_str()))),
    }
}

/// Audit each `(mechanism, ε, seed)` on the worst-case pair.
///
/// Records are sorted by mechanism name, then ε, then seed.
pub fn cmd_attack(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<AttackRecord>> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut jobs = Vec::new();
    for &m in &cfg.mechanisms {
        for &eps in &cfg.epsilon {
            for &seed in &cfg.seeds {
                jobs.push((m, eps, seed));
            }
        }
    }
    jobs.sort_by(|a, b| {
        a.0.as_str().cmp(b.0.as_str()).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let audit_cfg = AuditConfig {
        prior: cfg.prior()?,
        release_hmc: cfg.hmc.clone(),
        attacker_hmc: cfg.attack.attacker_hmc.clone(),
        threshold: 0.5,
        confidence: cfg.attack.confidence,
    };
    let pool = pool(cfg.workers)?;
    let mut writer = open_output(out)?;
    let mut records = Vec::with_capacity(jobs.len());
    for (m, eps, seed) in jobs {
        let mut rec = AttackRecord {
            record_type: "attack".into(),
            config_hash: hash.clone(),
            mechanism: m,
            epsilon: eps,
            seed,
            budget: None,
            outcome: None,
            error: None,
        };
        let result = audit_mechanism(cfg, m, eps).and_then(|mech| {
            let budget = mech.budget()?;
            let run_seed = derive_seed(cfg.seed, &[seed, eps.to_bits()]);
            let outcome = pool.install(|| run_attack(&mech, cfg.attack.rounds, &audit_cfg, run_seed))?;
            Ok((budget, outcome))
        });
        match result {
            Ok((budget, outcome)) => {
                rec.budget = budget;
                rec.outcome = Some(outcome);
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        records.push(rec);
    }
    Ok(records)
}

/// Write a simulated dataset as CSV and its generating parameter as JSON
/// (`<out>.theta.json`).
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(Dataset, ParamVector)> {
    cfg.validate()?;
    let (n, d, seed) = (cfg.n[0], cfg.d[0], cfg.seeds[0]);
    let (data, theta) = simulate_replicate(cfg, n, d, seed)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    crate::data::write_csv(out, &data)?;
    let mut theta_path = out.as_os_str().to_owned();
    theta_path.push(".theta.json");
    std::fs::write(PathBuf::from(theta_path), serde_json::to_string(&theta)?)?;
    Ok((data, theta))
}

/// Median and interquartile range (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Summary {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Summary {
        count: v.len(),
        median: quantile(&v, 0.5),
        q25: quantile(&v, 0.25),
        q75: quantile(&v, 0.75),
    })
}

/// Grouping key of report rows; ε is kept as its text form.
type Key = (String, String, usize, usize, String);

fn fmt_eps(e: f64) -> String {
    format!("{e}")
}

/// Summaries per group and metric, plus the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// (task, mechanism, n, d, ε) → metric → summary; attack rows use n = d = 0.
    pub rows: BTreeMap<Key, BTreeMap<String, Summary>>,
    pub files: Vec<PathBuf>,
}

fn metric_values(v: &serde_json::Value) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut take = |obj: Option<&serde_json::Value>, names: &[&str]| {
        if let Some(obj) = obj {
            for &name in names {
                if let Some(x) = obj.get(name).and_then(|x| x.as_f64()) {
                    out.push((name.to_string(), x));
                }
            }
        }
    };
    take(v.get("metrics"), &["param_rmse", "predictive_rmse", "roc_auc"]);
    take(v.get("outcome"), &["accuracy", "eps_lower", "fpr", "fnr"]);
    out
}

/// Read JSON-lines results and write `summary.txt` plus one series file per
/// (group, axis, metric) into `out_dir`.
///
/// A series varies one of n, d or ε with the others fixed; its columns are
/// `x median q25 q75`. Records with an `error` field are counted but skipped.
pub fn cmd_report(results: &Path, out_dir: &Path) -> Result<Report> {
    let file = File::open(results).map_err(|e| Error::Io(format!("{}: {e}", results.display())))?;
    let mut values: BTreeMap<Key, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut errors = 0usize;
    let mut seen = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        seen += 1;
        if v.get("error").is_some_and(|e| !e.is_null()) {
            errors += 1;
            continue;
        }
        let s = |k: &str| v.get(k).and_then(|x| x.as_str()).unwrap_or("").to_string();
        let u = |k: &str| v.get(k).and_then(|x| x.as_u64()).unwrap_or(0) as usize;
        let eps = v.get("epsilon").and_then(|x| x.as_f64()).unwrap_or(f64::NAN);
        let key = (s("task"), s("mechanism"), u("n"), u("d"), fmt_eps(eps));
        let entry = values.entry(key).or_default();
        for (name, x) in metric_values(&v) {
            entry.entry(name).or_default().push(x);
        }
    }
    if seen == 0 {
        return Err(Error::Empty(format!("{} has no records", results.display())));
    }
    std::fs::create_dir_all(out_dir)?;
    let rows: BTreeMap<Key, BTreeMap<String, Summary>> = values
        .into_iter()
        .map(|(k, m)| {
            let s = m.into_iter().filter_map(|(name, v)| summarize(&v).map(|s| (name, s))).collect();
            (k, s)
        })
        .collect();

    let mut files = Vec::new();
    let summary_path = out_dir.join("summary.txt");
    let mut w = BufWriter::new(File::create(&summary_path)?);
    writeln!(w, "# {seen} records, {errors} with errors")?;
    writeln!(w, "task\tmechanism\tn\td\tepsilon\tmetric\tcount\tmedian\tq25\tq75\tiqr")?;
    for ((task, mech, n, d, eps), metrics) in &rows {
        for (name, s) in metrics {
            writeln!(
                w,
                "{task}\t{mech}\t{n}\t{d}\t{eps}\t{name}\t{}\t{}\t{}\t{}\t{}",
                s.count,
                s.median,
                s.q25,
                s.q75,
                s.iqr()
            )?;
        }
    }
    w.flush()?;
    files.push(summary_path);

    // series along each axis
    for axis in ["n", "d", "epsilon"] {
        let mut series: BTreeMap<(String, String, String), Vec<(f64, Summary)>> = BTreeMap::new();
        for ((task, mech, n, d, eps), metrics) in &rows {
            let (x, fixed) = match axis {
                "n" => (*n as f64, format!("d{d}_eps{eps}")),
                "d" => (*d as f64, format!("n{n}_eps{eps}")),
                _ => (eps.parse::<f64>().unwrap_or(f64::NAN), format!("n{n}_d{d}")),
            };
            for (name, s) in metrics {
                let group = format!("{}{}_{fixed}", if task.is_empty() { String::new() } else { format!("{task}_") }, mech);
                series.entry((group, name.clone(), axis.to_string())).or_default().push((x, *s));
            }
        }
        for ((group, metric, axis), mut pts) in series {
            if pts.len() < 2 {
                continue;
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path = out_dir.join(format!("series_{group}_{metric}_vs_{axis}.tsv"));
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "{axis}\tmedian\tq25\tq75")?;
            for (x, s) in pts {
                writeln!(w, "{x}\t{}\t{}\t{}", s.median, s.q25, s.q75)?;
            }
            w.flush()?;
            files.push(path);
        }
    }
    Ok(Report { rows, files })
}
