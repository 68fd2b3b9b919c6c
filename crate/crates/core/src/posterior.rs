//! Generalized posteriors `π(θ|D) ∝ π(θ) exp{−Σᵢ ℓ(Dᵢ, θ)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec, ParamVector, Prior};
use crate::privacy::{record_loss, LossSpec};

/// Anything HMC can sample from: an unnormalized log density with gradient.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Returns `log p(θ)` and writes `∇ log p(θ)` into `grad`.
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;

    /// Starting point for chains, before jitter.
    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// Prior, loss and data making up one generalized posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDensity {
    pub model: ModelSpec,
    pub prior: Prior,
    pub loss: LossSpec,
    pub data: Dataset,
}

impl PosteriorDensity {
    pub fn new(model: ModelSpec, prior: Prior, loss: LossSpec, data: Dataset) -> Result<Self> {
        model.check_dataset(&data)?;
        loss.validate()?;
        Ok(Self { model, prior, loss, data })
    }

    /// Sum of per-record losses in record order; adds `−∇` into `grad` if given.
    fn total_loss(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let mut hidden = self.model.scratch();
        let mut total = 0.0;
        for (x, y) in self.data.iter() {
            let g = grad.as_deref_mut().map(|g| (g, -1.0));
            total += record_loss(&self.model, self.loss, theta, x, y, &mut hidden, g);
        }
        total
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        self.model.check_theta(theta)
    }

    /// `log π(θ) − Σᵢ ℓ(Dᵢ, θ)`.
    pub fn log_unnorm(&self, theta: &ParamVector) -> Result<f64> {
        self.check(theta)?;
        let v = self.prior.log_density(theta) - self.total_loss(theta, None);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("log posterior is {v}")))
        }
    }

    pub fn grad_log_unnorm(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut grad = vec![0.0; theta.len()];
        self.prior.add_grad(theta, &mut grad);
        self.total_loss(theta, Some(&mut grad));
        if grad.iter().all(|g| g.is_finite()) {
            Ok(grad)
        } else {
            Err(Error::NonFinite("log posterior gradient".into()))
        }
    }
}

impl LogDensity for PosteriorDensity {
    fn dim(&self) -> usize {
        self.model.n_params()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        self.prior.add_grad(theta, grad);
        self.prior.log_density(theta) - self.total_loss(theta, Some(grad))
    }
}

/// Posterior masses on a finite grid, normalized with log-sum-exp.
///
/// Restricted to models with at most two parameters.
pub fn grid_posterior(post: &PosteriorDensity, grid: &[ParamVector]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Empty("grid has no points".into()));
    }
    if post.model.n_params() > 2 {
        return Err(Error::InvalidArgument(
            "grid posteriors are limited to models with at most 2 parameters".into(),
        ));
    }
    let logs: Vec<f64> = grid
        .iter()
        .map(|t| {
            post.check(t)?;
            Ok(post.prior.log_density(t) - post.total_loss(t, None))
        })
        .collect::<Result<_>>()?;
    if logs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("grid log density".into()));
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NonFinite("every grid point has zero density".into()));
    }
    let lse = max + logs.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(logs.iter().map(|v| (v - lse).exp()).collect())
}

/// Evenly spaced 1-D grid of `points` values on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<ParamVector> {
    if points == 1 {
        return vec![ParamVector(vec![lo])];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| ParamVector(vec![lo + step * k as f64])).collect()
}
