//! Membership-inference audits on a worst-case pair of neighbouring datasets.
//!
//! Each round flips a fair coin `m`, releases from the mechanism run on `D′`
//! (`m = 1`) or `D` (`m = 0`), and lets the Bayes-optimal attacker guess `m`.
//! The confusion counts give Clopper–Pearson bounds on the attacker's error
//! rates and from them an empirical lower bound on ε.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::diagnostics::{diagnostics, DiagnosticReport};
use crate::erm::erm_fit;
use crate::error::{Error, Result};
use crate::hmc::{hmc_run, hmc_run_chains, ops_release, HmcConfig};
use crate::mechanisms::{chaudhuri_noise_scale, laplace_sample, minami_weight, Mechanism};
use crate::model::{DataKind, Dataset, ModelSpec, ParamVector, Prior, Record};
use crate::posterior::PosteriorDensity;
use crate::privacy::{beta_of_epsilon, LossSpec, PrivacyBudget};
use crate::rng::{derive_seed, rng_from_seed};

/// `D = {(1, 1), (0, 0)}` and `D′ = {(−1, 1), (0, 0)}`.
pub fn worst_case_pair() -> (Dataset, Dataset) {
    let d = Dataset::new(
        DataKind::Classification,
        vec![Record::new(vec![1.0], 1.0), Record::new(vec![0.0], 0.0)],
    )
    .expect("valid dataset");
    let d_prime = d.replace(0, Record::new(vec![-1.0], 1.0)).expect("valid record");
    (d, d_prime)
}

/// A mechanism under audit. All act on 1-D logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditMechanism {
    /// Output perturbation; `lambda` defaults to `1/(9n)`.
    Chaudhuri { epsilon: f64, lambda: Option<f64> },
    BetaDOps { epsilon: f64 },
    MinamiOps { epsilon: f64, delta: f64 },
    /// Ignores the data and releases `N(0, scale²)`.
    NoiseOnly { scale: f64 },
}

impl AuditMechanism {
    pub fn mechanism(&self) -> Option<Mechanism> {
        match self {
            Self::Chaudhuri { .. } => Some(Mechanism::ChaudhuriOutput),
            Self::BetaDOps { .. } => Some(Mechanism::BetaDOps),
            Self::MinamiOps { .. } => Some(Mechanism::MinamiOps),
            Self::NoiseOnly { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Chaudhuri { .. } => "chaudhuri",
            Self::BetaDOps { .. } => "betad_ops",
            Self::MinamiOps { .. } => "minami_ops",
            Self::NoiseOnly { .. } => "noise_only",
        }
    }

    /// Claimed budget; `None` for the noise-only control.
    pub fn budget(&self) -> Result<Option<PrivacyBudget>> {
        match *self {
            Self::Chaudhuri { epsilon, .. } | Self::BetaDOps { epsilon } => {
                PrivacyBudget::pure(epsilon).map(Some)
            }
            Self::MinamiOps { epsilon, delta } => PrivacyBudget::new(epsilon, delta).map(Some),
            Self::NoiseOnly { .. } => Ok(None),
        }
    }

    fn loss(&self, prior: &Prior) -> Result<Option<LossSpec>> {
        Ok(match *self {
            Self::BetaDOps { epsilon } => Some(LossSpec::BetaDLoss { beta: beta_of_epsilon(1.0, epsilon)? }),
            Self::MinamiOps { epsilon, delta } => {
                let w = minami_weight(&PrivacyBudget::new(epsilon, delta)?, 1, prior)?;
                Some(LossSpec::WeightedLogLoss { w })
            }
            _ => None,
        })
    }
}

/// Samplers, prior and decision rule of an audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub prior: Prior,
    /// Sampler behind each OPS release (first chain only).
    pub release_hmc: HmcConfig,
    /// Sampler for the attacker's draws from `π(θ|D)`; all chains are pooled.
    pub attacker_hmc: HmcConfig,
    pub threshold: f64,
    pub confidence: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            prior: Prior::default(),
            release_hmc: HmcConfig::release(0),
            attacker_hmc: HmcConfig { chains: 4, keep_iters: 100, ..HmcConfig::default() },
            threshold: 0.5,
            confidence: 0.95,
        }
    }
}

/// Confusion counts of an audit, with `m = 1` (release on `D′`) as positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub rounds: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
    pub accuracy: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub eps_lower: f64,
    pub confidence: f64,
    pub delta: f64,
    /// Diagnostics of the attacker's reference chains, for OPS mechanisms.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attacker_diagnostics: Option<DiagnosticReport>,
    /// Divergent transitions summed over all release chains.
    pub release_divergences: u64,
}

/// Attacker's view of a mechanism on a fixed pair.
enum Scorer {
    Laplace { hat_d: Vec<f64>, hat_d_prime: Vec<f64>, scale: f64 },
    Posterior { post_d: PosteriorDensity, post_d_prime: PosteriorDensity, log_z_ratio: f64 },
    Constant,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `1/(1 + e^{log r})`, exact in the tails.
fn score_from_log_ratio(log_r: f64) -> f64 {
    if log_r.is_nan() {
        return 0.5;
    }
    if log_r > 0.0 {
        let e = (-log_r).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + log_r.exp())
    }
}

fn lambda_for(lambda: Option<f64>, n: usize) -> f64 {
    lambda.unwrap_or(1.0 / (9.0 * n as f64))
}

impl Scorer {
    fn new(
        mech: &AuditMechanism,
        d: &Dataset,
        d_prime: &Dataset,
        prior: &Prior,
        draws: Option<&[Vec<f64>]>,
    ) -> Result<Self> {
        match *mech {
            AuditMechanism::Chaudhuri { epsilon, lambda } => {
                let lambda = lambda_for(lambda, d.len());
                Ok(Scorer::Laplace {
                    hat_d: erm_fit(d, lambda)?.0,
                    hat_d_prime: erm_fit(d_prime, lambda)?.0,
                    scale: chaudhuri_noise_scale(d.len(), lambda, epsilon),
                })
            }
            AuditMechanism::NoiseOnly { .. } => Ok(Scorer::Constant),
            AuditMechanism::BetaDOps { .. } | AuditMechanism::MinamiOps { .. } => {
                let draws = draws.ok_or_else(|| {
                    Error::InvalidArgument("OPS attacker needs posterior draws from π(θ|D)".into())
                })?;
                if draws.is_empty() {
                    return Err(Error::Empty("no posterior draws".into()));
                }
                let loss = mech.loss(prior)?.expect("OPS loss");
                let model = ModelSpec::logistic_linear(d.d());
                let post_d = PosteriorDensity::new(model, *prior, loss, d.clone())?;
                let post_d_prime = PosteriorDensity::new(model, *prior, loss, d_prime.clone())?;
                // Z(D′)/Z(D) = E_{π(θ|D)} exp{ℓ(D;θ) − ℓ(D′;θ)}
                let terms = draws
                    .iter()
                    .map(|t| {
                        let t = ParamVector(t.clone());
                        Ok(post_d_prime.log_unnorm(&t)? - post_d.log_unnorm(&t)?)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let log_z_ratio = log_sum_exp(&terms) - (terms.len() as f64).ln();
                Ok(Scorer::Posterior { post_d, post_d_prime, log_z_ratio })
            }
        }
    }

    /// `log p(θ̃|D) − log p(θ̃|D′)`.
    fn log_ratio(&self, theta: &[f64]) -> Result<f64> {
        match self {
            Scorer::Laplace { hat_d, hat_d_prime, scale } => Ok(theta
                .iter()
                .zip(hat_d.iter().zip(hat_d_prime))
                .map(|(t, (a, b))| ((t - b).abs() - (t - a).abs()) / scale)
                .sum()),
            Scorer::Posterior { post_d, post_d_prime, log_z_ratio } => {
                let t = ParamVector(theta.to_vec());
                Ok(post_d.log_unnorm(&t)? - post_d_prime.log_unnorm(&t)? + log_z_ratio)
            }
            Scorer::Constant => Ok(0.0),
        }
    }
}

/// Bayes-optimal membership score `1/(r+1)`, `r = p(θ̃|D)/p(θ̃|D′)`.
///
/// Scores above 1/2 favour `D′`. OPS mechanisms need draws from `π(θ|D)` to
/// estimate the ratio of normalizing constants.
pub fn attacker_score(
    mech: &AuditMechanism,
    theta_tilde: &[f64],
    d: &Dataset,
    d_prime: &Dataset,
    prior: &Prior,
    posterior_draws: Option<&[Vec<f64>]>,
) -> Result<f64> {
    let scorer = Scorer::new(mech, d, d_prime, prior, posterior_draws)?;
    Ok(score_from_log_ratio(scorer.log_ratio(theta_tilde)?))
}

/// Pooled draws from `π(θ|D)` for the OPS attacker, with their diagnostics.
pub fn attacker_draws(
    mech: &AuditMechanism,
    d: &Dataset,
    cfg: &AuditConfig,
) -> Result<Option<(Vec<Vec<f64>>, DiagnosticReport)>> {
    let Some(loss) = mech.loss(&cfg.prior)? else {
        return Ok(None);
    };
    let post = PosteriorDensity::new(ModelSpec::logistic_linear(d.d()), cfg.prior, loss, d.clone())?;
    let chains = hmc_run_chains(&post, &cfg.attacker_hmc)?;
    let report = diagnostics(&chains)?;
    let draws = chains.into_iter().flat_map(|c| c.draws).collect();
    Ok(Some((draws, report)))
}

/// One release of `mech` on `data`; returns the draw and its divergence count.
fn release(
    mech: &AuditMechanism,
    data: &Dataset,
    cfg: &AuditConfig,
    hat: Option<&[f64]>,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    match *mech {
        AuditMechanism::Chaudhuri { epsilon, lambda } => {
            let lambda = lambda_for(lambda, data.len());
            let scale = chaudhuri_noise_scale(data.len(), lambda, epsilon);
            let mut rng = rng_from_seed(seed);
            let hat = hat.expect("ERM solution");
            Ok((hat.iter().map(|h| h + laplace_sample(scale, &mut rng)).collect(), 0))
        }
        AuditMechanism::NoiseOnly { scale } => {
            let mut rng = rng_from_seed(seed);
            Ok((
                (0..data.d())
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect(),
                0,
            ))
        }
        AuditMechanism::BetaDOps { .. } | AuditMechanism::MinamiOps { .. } => {
            let loss = mech.loss(&cfg.prior)?.expect("OPS loss");
            let post =
                PosteriorDensity::new(ModelSpec::logistic_linear(data.d()), cfg.prior, loss, data.clone())?;
            let hmc = HmcConfig { seed, ..cfg.release_hmc.clone() };
            let chain = hmc_run(&post, &hmc)?;
            let theta = ops_release(&chain, derive_seed(seed, &[u64::MAX]))?;
            Ok((theta.0, chain.divergences))
        }
    }
}

/// Run `rounds` attack rounds on the worst-case pair.
///
/// Rounds are seeded independently from `seed` and run in parallel; the
/// tallies do not depend on scheduling.
pub fn run_attack(
    mech: &AuditMechanism,
    rounds: u64,
    cfg: &AuditConfig,
    seed: u64,
) -> Result<AttackOutcome> {
    let (d, d_prime) = worst_case_pair();
    run_attack_on(mech, &d, &d_prime, rounds, cfg, seed)
}

/// [`run_attack`] on an arbitrary neighbouring pair.
pub fn run_attack_on(
    mech: &AuditMechanism,
    d: &Dataset,
    d_prime: &Dataset,
    rounds: u64,
    cfg: &AuditConfig,
    seed: u64,
) -> Result<AttackOutcome> {
    if rounds < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 rounds, got {rounds}")));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::InvalidArgument("confidence must lie in (0, 1)".into()));
    }
    let delta = mech.budget()?.map_or(0.0, |b| b.delta);
    let attacker = attacker_draws(mech, d, &AuditConfig {
        attacker_hmc: HmcConfig { seed: derive_seed(seed, &[u64::MAX]), ..cfg.attacker_hmc.clone() },
        ..cfg.clone()
    })?;
    let scorer = Scorer::new(mech, d, d_prime, &cfg.prior, attacker.as_ref().map(|a| a.0.as_slice()))?;
    let hats = match *mech {
        AuditMechanism::Chaudhuri { lambda, .. } => {
            let lambda = lambda_for(lambda, d.len());
            Some((erm_fit(d, lambda)?.0, erm_fit(d_prime, lambda)?.0))
        }
        _ => None,
    };

    // (m, guess, divergences) per round
    let results = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let round_seed = derive_seed(seed, &[r]);
            let m = rng_from_seed(round_seed).gen_bool(0.5);
            let (data, hat) = if m {
                (d_prime, hats.as_ref().map(|h| h.1.as_slice()))
            } else {
                (d, hats.as_ref().map(|h| h.0.as_slice()))
            };
            let (theta, div) = release(mech, data, cfg, hat, derive_seed(round_seed, &[1]))?;
            let score = score_from_log_ratio(scorer.log_ratio(&theta)?);
            Ok((m, score > cfg.threshold, div))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fneg = 0;
    let mut divergences = 0u64;
    for (m, guess, div) in results {
        match (m, guess) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
        divergences += div as u64;
    }
    let rate = |k: u64, n: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(AttackOutcome {
        rounds,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fneg,
        accuracy: (tp + tn) as f64 / rounds as f64,
        fpr: rate(fp, fp + tn),
        fnr: rate(fneg, fneg + tp),
        eps_lower: eps_lower_bound(fp, fp + tn, fneg, fneg + tp, delta, cfg.confidence),
        confidence: cfg.confidence,
        delta,
        attacker_diagnostics: attacker.map(|a| a.1),
        release_divergences: divergences,
    })
}

/// Upper end of the two-sided Clopper–Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson_upper(k: u64, n: u64, confidence: f64) -> f64 {
    if n == 0 || k >= n {
        return 1.0;
    }
    // P(Bin(n, u) ≤ k) = (1 − c)/2  ⇔  I_u(k+1, n−k) = (1 + c)/2
    let target = 0.5 * (1.0 + confidence);
    let (a, b) = ((k + 1) as f64, (n - k) as f64);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

/// `max(log((1−δ−fpr)/fnr), log((1−δ−fnr)/fpr), 0)` for given error rates.
pub fn eps_from_rates(fpr: f64, fnr: f64, delta: f64) -> f64 {
    let side = |a: f64, b: f64| {
        let num = 1.0 - delta - a;
        if num <= 0.0 {
            0.0
        } else {
            (num / b).ln()
        }
    };
    side(fpr, fnr).max(side(fnr, fpr)).max(0.0)
}

/// Empirical ε lower bound from confusion counts, using Clopper–Pearson
/// upper bounds on both error rates.
pub fn eps_lower_bound(
    false_positives: u64,
    negatives: u64,
    false_negatives: u64,
    positives: u64,
    delta: f64,
    confidence: f64,
) -> f64 {
    let fpr = clopper_pearson_upper(false_positives, negatives, confidence);
    let fnr = clopper_pearson_upper(false_negatives, positives, confidence);
    eps_from_rates(fpr, fnr, delta)
}
