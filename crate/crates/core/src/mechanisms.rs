//! Differentially private release mechanisms.
//!
//! Every mechanism returns a [`ReleaseReport`]: the released parameter, the
//! privacy claim, the mechanism's calibration parameters and caveats.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::diagnostics::{diagnostics, ess, split_rhat, DiagnosticReport};
use crate::erm::erm_fit;
use crate::error::{Error, Result};
use crate::hmc::{hmc_run_chains, ops_release, Chain, HmcConfig};
use crate::model::{DataKind, Dataset, Family, ModelSpec, ParamVector, Prior};
use crate::posterior::PosteriorDensity;
use crate::privacy::{
    beta_of_epsilon, epsilon_of_beta, gibbs_weight_minami, lipschitz_logistic, record_loss,
    LossSpec, PrivacyBudget,
};
use crate::rng::{derive_seed, rng_from_seed, Rng};

pub const DEFAULT_DELTA: f64 = 1e-5;

pub const CONVERGENCE_CAVEAT: &str =
    "privacy guarantee assumes the sampler has converged to the target posterior";
pub const DPSGD_CAVEAT: &str =
    "DPSGD epsilon from Renyi composition without subsampling amplification (conservative)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    BetaDOps,
    MinamiOps,
    ChaudhuriOutput,
    DpSgd,
    NonPrivate,
}

/// A released parameter with its privacy claim and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseReport {
    pub mechanism: Mechanism,
    pub theta_tilde: ParamVector,
    /// `None` only for [`Mechanism::NonPrivate`].
    pub budget: Option<PrivacyBudget>,
    pub mech_params: BTreeMap<String, f64>,
    pub seed: u64,
    pub caveats: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostics: Option<DiagnosticReport>,
}

/// How to pick β for βD-Bayes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Epsilon(f64),
    Beta(f64),
}

/// Thresholds under which a sampled release is refused.
///
/// The defaults catch gross failures on short release chains; the stricter
/// flags of [`diagnostics`] are attached to the report as caveats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReleaseGate {
    pub max_rhat: f64,
    pub min_ess: f64,
    pub max_divergences: usize,
}

impl Default for ReleaseGate {
    fn default() -> Self {
        Self { max_rhat: 1.1, min_ess: 50.0, max_divergences: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReleaseOptions {
    /// Release even when the gate fires; recorded as a caveat.
    pub force: bool,
    pub gate: ReleaseGate,
}

/// Gate violations for the chains behind a release.
fn gate_violations(chains: &[Chain], gate: &ReleaseGate) -> Vec<String> {
    let mut out = Vec::new();
    let divergences: usize = chains.iter().map(|c| c.divergences).sum();
    if divergences > gate.max_divergences {
        out.push(format!("{divergences} divergent transitions"));
    }
    for k in 0..chains[0].dim() {
        let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(k)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let rhat = if chains.len() >= 2 {
            split_rhat(&refs)
        } else {
            Some(chains[0].split_rhat[k]).filter(|v| v.is_finite())
        };
        match rhat {
            Some(r) if r > gate.max_rhat => out.push(format!("split-Rhat {r:.3} for coordinate {k}")),
            None => {
                // a constant coordinate means the chain never moved
                out.push(format!("split-Rhat undefined for coordinate {k}"));
            }
            _ => {}
        }
        match ess(&refs) {
            Some(e) if e < gate.min_ess => out.push(format!("ESS {e:.1} for coordinate {k}")),
            None => out.push(format!("ESS undefined for coordinate {k}")),
            _ => {}
        }
    }
    out
}

/// Run the chains, check the gate and release one draw from the first chain.
fn sample_and_release(
    post: &PosteriorDensity,
    cfg: &HmcConfig,
    opts: &ReleaseOptions,
    caveats: &mut Vec<String>,
) -> Result<(ParamVector, DiagnosticReport)> {
    let chains = hmc_run_chains(post, cfg)?;
    let report = diagnostics(&chains)?;
    let violations = gate_violations(&chains, &opts.gate);
    if !violations.is_empty() {
        if !opts.force {
            return Err(Error::DiagnosticsFailed(violations.join("; ")));
        }
        caveats.push(format!("release forced despite: {}", violations.join("; ")));
    }
    caveats.extend(report.flags.iter().map(|f| format!("diagnostic: {f}")));
    let theta = ops_release(&chains[0], derive_seed(cfg.seed, &[u64::MAX]))?;
    Ok((theta, report))
}

/// βD-Bayes one-posterior sample.
///
/// With [`Calibration::Epsilon`] the reported budget is the requested ε and
/// β satisfies `epsilon_of_beta(M, β) ≤ ε`; with [`Calibration::Beta`] the
/// budget is `epsilon_of_beta(M, β)`.
pub fn betad_ops(
    data: &Dataset,
    model: &ModelSpec,
    prior: &Prior,
    calibration: Calibration,
    cfg: &HmcConfig,
    opts: &ReleaseOptions,
) -> Result<ReleaseReport> {
    let m = model.density_upper_bound();
    let (beta, epsilon) = match calibration {
        Calibration::Epsilon(eps) => (beta_of_epsilon(m, eps)?, eps),
        Calibration::Beta(beta) => (beta, epsilon_of_beta(m, beta)?),
    };
    let post = PosteriorDensity::new(*model, *prior, LossSpec::BetaDLoss { beta }, data.clone())?;
    let mut caveats = vec![CONVERGENCE_CAVEAT.to_string()];
    let (theta, report) = sample_and_release(&post, cfg, opts, &mut caveats)?;
    let mut mech_params = BTreeMap::new();
    mech_params.insert("beta".into(), beta);
    mech_params.insert("density_bound".into(), m);
    Ok(ReleaseReport {
        mechanism: Mechanism::BetaDOps,
        theta_tilde: theta,
        budget: Some(PrivacyBudget::pure(epsilon)?),
        mech_params,
        seed: cfg.seed,
        caveats,
        diagnostics: Some(report),
    })
}

/// Error unless every feature lies in `[0, 1]`.
pub fn check_unit_features(data: &Dataset) -> Result<()> {
    for i in 0..data.len() {
        for (k, &v) in data.features(i).iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::UnscaledFeatures { record: i, column: k, value: v });
            }
        }
    }
    Ok(())
}

/// Gibbs weight used by [`minami_ops`].
pub fn minami_weight(budget: &PrivacyBudget, d: usize, prior: &Prior) -> Result<f64> {
    gibbs_weight_minami(
        budget.epsilon,
        budget.delta,
        lipschitz_logistic(d),
        1.0 / (prior.sd * prior.sd),
    )
}

/// Gibbs-posterior one-posterior sample with the Minami weight (logistic regression).
pub fn minami_ops(
    data: &Dataset,
    prior: &Prior,
    budget: &PrivacyBudget,
    cfg: &HmcConfig,
    opts: &ReleaseOptions,
) -> Result<ReleaseReport> {
    check_unit_features(data)?;
    minami_ops_unchecked(data, prior, budget, cfg, opts)
}

pub(crate) fn minami_ops_unchecked(
    data: &Dataset,
    prior: &Prior,
    budget: &PrivacyBudget,
    cfg: &HmcConfig,
    opts: &ReleaseOptions,
) -> Result<ReleaseReport> {
    if data.kind() != DataKind::Classification {
        return Err(Error::KindMismatch("Minami OPS is defined for logistic regression".into()));
    }
    if budget.delta <= 0.0 {
        return Err(Error::InvalidArgument("Minami OPS needs delta > 0".into()));
    }
    let w = minami_weight(budget, data.d(), prior)?;
    let model = ModelSpec::logistic_linear(data.d());
    let post = PosteriorDensity::new(model, *prior, LossSpec::WeightedLogLoss { w }, data.clone())?;
    let mut caveats = vec![CONVERGENCE_CAVEAT.to_string()];
    let (theta, report) = sample_and_release(&post, cfg, opts, &mut caveats)?;
    let mut mech_params = BTreeMap::new();
    mech_params.insert("w".into(), w);
    mech_params.insert("lipschitz".into(), lipschitz_logistic(data.d()));
    Ok(ReleaseReport {
        mechanism: Mechanism::MinamiOps,
        theta_tilde: theta,
        budget: Some(*budget),
        mech_params,
        seed: cfg.seed,
        caveats,
        diagnostics: Some(report),
    })
}

/// Standard posterior (`w = 1`) one-posterior sample; no privacy claim.
pub fn nonprivate_ops(
    data: &Dataset,
    model: &ModelSpec,
    prior: &Prior,
    cfg: &HmcConfig,
    opts: &ReleaseOptions,
) -> Result<ReleaseReport> {
    let post =
        PosteriorDensity::new(*model, *prior, LossSpec::WeightedLogLoss { w: 1.0 }, data.clone())?;
    let mut caveats = Vec::new();
    let (theta, report) = sample_and_release(&post, cfg, opts, &mut caveats)?;
    Ok(ReleaseReport {
        mechanism: Mechanism::NonPrivate,
        theta_tilde: theta,
        budget: None,
        mech_params: BTreeMap::from([("w".to_string(), 1.0)]),
        seed: cfg.seed,
        caveats,
        diagnostics: Some(report),
    })
}

/// Laplace scale `2/(nλε)` of output perturbation.
pub fn chaudhuri_noise_scale(n: usize, lambda: f64, epsilon: f64) -> f64 {
    2.0 / (n as f64 * lambda * epsilon)
}

/// One `Laplace(0, scale)` draw, as a difference of two unit exponentials.
pub fn laplace_sample(scale: f64, rng: &mut Rng) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    scale * (a - b)
}

/// Output perturbation: regularized ERM plus Laplace noise of scale `2/(nλε)`.
pub fn chaudhuri_release(data: &Dataset, lambda: f64, epsilon: f64, seed: u64) -> Result<ReleaseReport> {
    check_unit_features(data)?;
    let theta_hat = erm_fit(data, lambda)?;
    chaudhuri_perturb(&theta_hat, data.len(), lambda, epsilon, seed)
}

/// Perturb a precomputed ERM solution.
pub(crate) fn chaudhuri_perturb(
    theta_hat: &ParamVector,
    n: usize,
    lambda: f64,
    epsilon: f64,
    seed: u64,
) -> Result<ReleaseReport> {
    let budget = PrivacyBudget::pure(epsilon)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let scale = chaudhuri_noise_scale(n, lambda, epsilon);
    let mut rng = rng_from_seed(seed);
    let theta = theta_hat.iter().map(|t| t + laplace_sample(scale, &mut rng)).collect::<Vec<_>>();
    let mut mech_params = BTreeMap::new();
    mech_params.insert("lambda".into(), lambda);
    mech_params.insert("noise_scale".into(), scale);
    Ok(ReleaseReport {
        mechanism: Mechanism::ChaudhuriOutput,
        theta_tilde: ParamVector(theta),
        budget: Some(budget),
        mech_params,
        seed,
        caveats: Vec::new(),
        diagnostics: None,
    })
}

/// Rényi orders searched by the DPSGD accountant: 1.5, 2, 2.5, …, 256.
pub fn rdp_orders() -> Vec<f64> {
    (3..=512).map(|k| k as f64 / 2.0).collect()
}

/// `(ε, δ)` of `steps` Gaussian mechanisms with noise multiplier σ, composed
/// in Rényi DP without subsampling amplification:
/// `min_α steps·α/(2σ²) + log(1/δ)/(α−1)`.
pub fn dpsgd_epsilon(noise_multiplier: f64, steps: usize, delta: f64) -> f64 {
    let t = steps as f64;
    let log_inv_delta = (1.0 / delta).ln();
    rdp_orders()
        .into_iter()
        .map(|a| t * a / (2.0 * noise_multiplier * noise_multiplier) + log_inv_delta / (a - 1.0))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest noise multiplier (to 1e-9 relative) whose accountant ε is at most `target`.
pub fn calibrate_noise_multiplier(target: f64, steps: usize, delta: f64) -> Result<f64> {
    let floor = (1.0 / delta).ln() / 255.0;
    if !(target > floor) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {target} is below the accountant's floor {floor:.4} at delta {delta}"
        )));
    }
    let (mut lo, mut hi) = (1e-3, 1.0);
    while dpsgd_epsilon(hi, steps, delta) > target {
        hi *= 2.0;
    }
    while hi / lo > 1.0 + 1e-9 {
        let mid = (lo * hi).sqrt();
        if dpsgd_epsilon(mid, steps, delta) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub clip: f64,
    pub noise_multiplier: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub delta: f64,
    /// When set, the noise multiplier was calibrated to this ε and it is the
    /// reported budget.
    pub target_epsilon: Option<f64>,
}

impl DpSgdConfig {
    /// Defaults for a target ε: clip 1, learning rate 1e-2, batch 100,
    /// `15 + ⌊ε⌋` epochs, noise calibrated by the accountant.
    pub fn for_epsilon(epsilon: f64, n: usize, delta: f64) -> Result<Self> {
        let batch_size = 100;
        let epochs = 15 + epsilon.floor() as usize;
        let steps = epochs * n.div_ceil(batch_size).max(1);
        Ok(Self {
            clip: 1.0,
            noise_multiplier: calibrate_noise_multiplier(epsilon, steps, delta)?,
            learning_rate: 1e-2,
            batch_size,
            epochs,
            delta,
            target_epsilon: Some(epsilon),
        })
    }

    pub fn steps(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size)
    }
}

/// Clip `g` to Euclidean norm at most `c`.
pub fn clip_gradient(g: &mut [f64], c: f64) {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > c {
        let s = c / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
}

/// Noisy clipped minibatch SGD on the negative log-likelihood.
pub fn dpsgd_train(
    data: &Dataset,
    model: &ModelSpec,
    cfg: &DpSgdConfig,
    seed: u64,
) -> Result<ReleaseReport> {
    model.check_dataset(data)?;
    if !(cfg.noise_multiplier > 0.0) {
        return Err(Error::InvalidArgument("noise multiplier must be positive".into()));
    }
    if data.is_empty() || cfg.batch_size == 0 {
        return Err(Error::Empty("DPSGD needs nonempty batches".into()));
    }
    if !(cfg.clip > 0.0 && cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidArgument("clip must be positive and delta in (0, 1)".into()));
    }
    let mut rng = rng_from_seed(seed);
    let p = model.n_params();
    let mut theta: Vec<f64> = (0..p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.1 * z
        })
        .collect();
    let loss = LossSpec::WeightedLogLoss { w: 1.0 };
    let mut hidden = model.scratch();
    let mut per_example = vec![0.0; p];
    let mut sum = vec![0.0; p];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let sigma = cfg.noise_multiplier * cfg.clip;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            sum.fill(0.0);
            for &i in batch {
                per_example.fill(0.0);
                record_loss(
                    model,
                    loss,
                    &theta,
                    data.features(i),
                    data.label(i),
                    &mut hidden,
                    Some((&mut per_example, 1.0)),
                );
                clip_gradient(&mut per_example, cfg.clip);
                sum.iter_mut().zip(&per_example).for_each(|(s, g)| *s += g);
            }
            let b = batch.len() as f64;
            for (t, s) in theta.iter_mut().zip(&sum) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *t -= cfg.learning_rate * (s + sigma * z) / b;
            }
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("DPSGD parameters diverged".into()));
    }
    let steps = cfg.steps(data.len());
    let accountant = dpsgd_epsilon(cfg.noise_multiplier, steps, cfg.delta);
    let epsilon = cfg.target_epsilon.map_or(accountant, |t| t.max(accountant));
    let mut mech_params = BTreeMap::new();
    mech_params.insert("clip".into(), cfg.clip);
    mech_params.insert("noise_multiplier".into(), cfg.noise_multiplier);
    mech_params.insert("steps".into(), steps as f64);
    mech_params.insert("learning_rate".into(), cfg.learning_rate);
    mech_params.insert("batch_size".into(), cfg.batch_size as f64);
    mech_params.insert("accountant_epsilon".into(), accountant);
    Ok(ReleaseReport {
        mechanism: Mechanism::DpSgd,
        theta_tilde: ParamVector(theta),
        budget: Some(PrivacyBudget::new(epsilon, cfg.delta)?),
        mech_params,
        seed,
        caveats: vec![DPSGD_CAVEAT.to_string()],
        diagnostics: None,
    })
}

/// Model family served by a mechanism, if it is restricted.
pub fn required_family(mechanism: Mechanism) -> Option<Family> {
    match mechanism {
        Mechanism::MinamiOps | Mechanism::ChaudhuriOutput => Some(Family::LogisticLinear),
        _ => None,
    }
}
