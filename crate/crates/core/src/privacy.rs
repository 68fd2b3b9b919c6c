//! β-divergence loss, its sensitivity, and the ε ↔ β calibration.
//!
//! The βD loss of a record `D` under density `f(·; θ)` is
//!
//! ```text
//! ℓ⁽ᵝ⁾(D, θ) = −f(D; θ)^(β−1) / (β−1) + (1/β) ∫ f(z; θ)^β dz
//! ```
//!
//! For classification the integral is the two-point sum over labels; for the
//! Gaussian families it has the closed form `(2πσ²)^((1−β)/2) β^(−1/2)`,
//! which does not depend on the mean function.
//!
//! If `f ≤ M` everywhere, the loss changes by at most `M^(β−1)/(β−1)` between
//! any two records, and one draw from the resulting posterior is
//! `(2M^(β−1)/(β−1), 0)`-differentially private.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{log_sigmoid, DataKind, ModelSpec, ParamVector, Record};

/// The loss plugged into the generalized Bayesian update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `−w log f`; `w = 1` is the standard posterior.
    WeightedLogLoss { w: f64 },
    BetaDLoss { beta: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::WeightedLogLoss { w } if !(w > 0.0 && w.is_finite()) => {
                Err(Error::InvalidArgument(format!("Gibbs weight must be positive, got {w}")))
            }
            LossSpec::BetaDLoss { beta } => check_beta(beta),
            _ => Ok(()),
        }
    }
}

/// An `(ε, δ)` claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

/// Loss of one record; optionally adds `scale · ∇θ ℓ` into `grad`.
pub(crate) fn record_loss(
    model: &ModelSpec,
    loss: LossSpec,
    theta: &[f64],
    x: &[f64],
    y: f64,
    hidden: &mut [f64],
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    if let (LossSpec::BetaDLoss { beta }, DataKind::Classification) = (loss, model.kind()) {
        return classification_beta_loss(model, beta, theta, x, y, hidden, grad);
    }
    let pw = model.pointwise(theta, x, y, hidden);
    let (value, dl_dm, dl_dzeta) = match loss {
        LossSpec::WeightedLogLoss { w } => {
            (-w * pw.log_f, -w * pw.dlogf_dm, -w * pw.dlogf_dzeta)
        }
        LossSpec::BetaDLoss { beta } => {
            // Gaussian; classification takes the early return above
            let b1 = beta - 1.0;
            let f_b1 = (b1 * pw.log_f).exp();
            let zeta = theta[model.n_mean_params()];
            let s2 = model.variance_floor_s2 + zeta.exp();
            let integral = gaussian_power_integral(s2, beta);
            // (1/β) dI/dζ = (1/β)(1−β)/2 · I/σ² · e^ζ
            let d_int = (1.0 - beta) / (2.0 * beta) * integral / s2 * zeta.exp();
            (
                -f_b1 / b1 + integral / beta,
                -f_b1 * pw.dlogf_dm,
                -f_b1 * pw.dlogf_dzeta + d_int,
            )
        }
    };
    if let Some((out, scale)) = grad {
        model.add_mean_grad(theta, x, hidden, scale * dl_dm, out);
        if let Some(z) = model.zeta_index() {
            out[z] += scale * dl_dzeta;
        }
    }
    value
}

/// βD loss of a Bernoulli record with few transcendental evaluations; the
/// hot path of classification posteriors.
fn classification_beta_loss(
    model: &ModelSpec,
    beta: f64,
    theta: &[f64],
    x: &[f64],
    y: f64,
    hidden: &mut [f64],
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let m = model.forward(theta, x, hidden);
    let b1 = beta - 1.0;
    let log_p = log_sigmoid(m);
    let log_q = log_p - m;
    let (p, q) = (log_p.exp(), log_q.exp());
    let (p_b1, q_b1) = ((b1 * log_p).exp(), (b1 * log_q).exp());
    let (p_beta, q_beta) = (p * p_b1, q * q_b1);
    let (f_b1, dlogf_dm) = if y == 1.0 { (p_b1, q) } else { (q_b1, -p) };
    if let Some((out, scale)) = grad {
        // (1/β) dI/dm = p^β q − q^β p
        let dl_dm = -f_b1 * dlogf_dm + p_beta * q - q_beta * p;
        model.add_mean_grad(theta, x, hidden, scale * dl_dm, out);
    }
    -f_b1 / b1 + (p_beta + q_beta) / beta
}

/// `∫ N(z; μ, σ²)^β dz = (2πσ²)^((1−β)/2) β^(−1/2)`.
pub fn gaussian_power_integral(sigma2: f64, beta: f64) -> f64 {
    (2.0 * PI * sigma2).powf((1.0 - beta) / 2.0) / beta.sqrt()
}

fn checked_record(model: &ModelSpec, theta: &ParamVector, record: &Record, beta: f64) -> Result<()> {
    check_beta(beta)?;
    model.check_theta(theta)?;
    model.check_record(&record.features, record.label)
}

/// βD loss `ℓ⁽ᵝ⁾(record, θ)`.
pub fn beta_loss(model: &ModelSpec, theta: &ParamVector, record: &Record, beta: f64) -> Result<f64> {
    checked_record(model, theta, record, beta)?;
    let mut hidden = model.scratch();
    Ok(record_loss(
        model,
        LossSpec::BetaDLoss { beta },
        theta,
        &record.features,
        record.label,
        &mut hidden,
        None,
    ))
}

/// Exact θ-gradient of [`beta_loss`].
pub fn beta_loss_grad(
    model: &ModelSpec,
    theta: &ParamVector,
    record: &Record,
    beta: f64,
) -> Result<Vec<f64>> {
    checked_record(model, theta, record, beta)?;
    let mut hidden = model.scratch();
    let mut grad = vec![0.0; model.n_params()];
    record_loss(
        model,
        LossSpec::BetaDLoss { beta },
        theta,
        &record.features,
        record.label,
        &mut hidden,
        Some((&mut grad, 1.0)),
    );
    Ok(grad)
}

/// Sensitivity of the βD loss when `f ≤ m`: `M^(β−1)/(β−1)`.
pub fn sensitivity_bound(m: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    check_m(m)?;
    Ok(m.powf(beta - 1.0) / (beta - 1.0))
}

/// Privacy level of one βD-Bayes posterior draw: `2M^(β−1)/(β−1)`.
pub fn epsilon_of_beta(m: f64, beta: f64) -> Result<f64> {
    Ok(2.0 * sensitivity_bound(m, beta)?)
}

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("density bound M must be positive, got {m}")))
    }
}

const BETA_FLOOR: f64 = 1.0 + 1e-12;
const BETA_CEIL: f64 = 64.0;

/// Invert [`epsilon_of_beta`].
///
/// ε(β) is decreasing on `(1, β*]` with `β* = 1 + 1/ln M` when `M > 1` (and on
/// all of `(1, ∞)` when `M ≤ 1`). The root on that branch is found by
/// bisection carried to full double precision; the returned β always satisfies
/// `epsilon_of_beta(M, β) ≤ ε`. For `M > 1` the branch nearest the log-score
/// is the one returned.
pub fn beta_of_epsilon(m: f64, epsilon: f64) -> Result<f64> {
    check_m(m)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let eps_at = |b: f64| 2.0 * m.powf(b - 1.0) / (b - 1.0);

    let mut hi = if m > 1.0 {
        let beta_star = 1.0 + 1.0 / m.ln();
        let minimum = eps_at(beta_star);
        if epsilon < minimum {
            return Err(Error::InfeasibleEpsilon { requested: epsilon, m, minimum });
        }
        beta_star
    } else {
        let mut hi = BETA_CEIL;
        while eps_at(hi) > epsilon {
            hi = 1.0 + 2.0 * (hi - 1.0);
            if !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("epsilon {epsilon} is too small")));
            }
        }
        hi
    };
    let mut lo = BETA_FLOOR;
    if eps_at(lo) < epsilon {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} exceeds the largest calibratable value {}",
            eps_at(lo)
        )));
    }
    // Invariant: eps_at(lo) ≥ ε ≥ eps_at(hi).
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eps_at(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Gibbs weight `w = ε/(4B)` for a log-density bounded by `B` in magnitude.
pub fn gibbs_weight_wang(epsilon: f64, b: f64) -> f64 {
    epsilon / (4.0 * b)
}

/// Gibbs weight `w = (ε/2L)·√(m_π/(1 + 2 log(1/δ)))` for convex `L`-Lipschitz
/// log-likelihoods under an `m_π`-strongly log-concave prior.
pub fn gibbs_weight_minami(epsilon: f64, delta: f64, l: f64, m_pi: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the Minami weight needs delta in (0, 1), got {delta}"
        )));
    }
    if !(l > 0.0 && m_pi > 0.0) {
        return Err(Error::InvalidArgument("L and m_pi must be positive".into()));
    }
    Ok(epsilon / (2.0 * l) * (m_pi / (1.0 + 2.0 * (1.0 / delta).ln())).sqrt())
}

/// Lipschitz constant `2√d` of the logistic log-likelihood on `[0, 1]^d`.
pub fn lipschitz_logistic(d: usize) -> f64 {
    2.0 * (d as f64).sqrt()
}
