//! L2-regularized logistic regression, the base estimator of output perturbation.

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::model::{dot, log_sigmoid, sigmoid, DataKind, Dataset, ParamVector};

const GRAD_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

/// `(1/n) Σ log-loss + (λ/2)‖θ‖²` and its gradient.
fn objective(data: &Dataset, lambda: f64, theta: &[f64], grad: &mut [f64]) -> f64 {
    let n = data.len() as f64;
    grad.iter_mut().zip(theta).for_each(|(g, t)| *g = lambda * t);
    let mut loss = 0.0;
    for (x, y) in data.iter() {
        let m = dot(theta, x);
        loss -= if y == 1.0 { log_sigmoid(m) } else { log_sigmoid(-m) };
        let r = (sigmoid(m) - y) / n;
        grad.iter_mut().zip(x).for_each(|(g, xi)| *g += r * xi);
    }
    loss / n + 0.5 * lambda * dot(theta, theta)
}

fn hessian(data: &Dataset, lambda: f64, theta: &[f64]) -> Vec<f64> {
    let d = theta.len();
    let n = data.len() as f64;
    let mut h = vec![0.0; d * d];
    for (x, _) in data.iter() {
        let p = sigmoid(dot(theta, x));
        let w = p * (1.0 - p) / n;
        for i in 0..d {
            for j in 0..=i {
                h[i * d + j] += w * x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        h[i * d + i] += lambda;
        for j in 0..i {
            h[j * d + i] = h[i * d + j];
        }
    }
    h
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Minimizer of the regularized logistic risk.
///
/// Damped Newton iterations with Armijo backtracking, run until the gradient
/// norm drops below 1e-10. Deterministic.
pub fn erm_fit(data: &Dataset, lambda: f64) -> Result<ParamVector> {
    if data.kind() != DataKind::Classification {
        return Err(Error::KindMismatch("ERM output perturbation needs classification data".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if data.is_empty() {
        return Err(Error::Empty("dataset has no records".into()));
    }
    let d = data.d();
    let mut theta = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut value = objective(data, lambda, &theta, &mut grad);
    let mut trial_grad = vec![0.0; d];

    for _ in 0..MAX_ITERS {
        let gnorm = norm(&grad);
        if gnorm < GRAD_TOL {
            return Ok(ParamVector(theta));
        }
        let h = hessian(data, lambda, &theta);
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = cholesky_solve(&h, &neg_grad).unwrap_or(neg_grad);
        let slope = dot(&grad, &step);

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let v = objective(data, lambda, &trial, &mut trial_grad);
            let armijo = v <= value + 1e-4 * t * slope;
            // Near the optimum the decrease drops below rounding of the
            // objective; accept steps that still shrink the gradient.
            let rounding = (v - value).abs() <= 1e-14 * value.abs().max(1.0)
                && norm(&trial_grad) < gnorm;
            if armijo || rounding {
                theta = trial;
                value = v;
                std::mem::swap(&mut grad, &mut trial_grad);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NotConverged { iterations: MAX_ITERS, grad_norm: gnorm });
        }
    }
    Err(Error::NotConverged { iterations: MAX_ITERS, grad_norm: norm(&grad) })
}

/// Gradient norm of the regularized risk at `theta`.
pub fn erm_grad_norm(data: &Dataset, lambda: f64, theta: &[f64]) -> f64 {
    let mut g = vec![0.0; theta.len()];
    objective(data, lambda, theta, &mut g);
    norm(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_data, FeatureScaling, GeneratorSpec, ModelSpec, Record};

    #[test]
    fn symmetric_data_gives_zero() {
        let data = Dataset::new(
            DataKind::Classification,
            vec![
                Record::new(vec![0.7, 0.2], 1.0),
                Record::new(vec![-0.7, -0.2], 1.0),
                Record::new(vec![0.7, 0.2], 0.0),
                Record::new(vec![-0.7, -0.2], 0.0),
            ],
        )
        .unwrap();
        let theta = erm_fit(&data, 0.1).unwrap();
        assert!(theta.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn norm_shrinks_with_regularization() {
        let mut gen = GeneratorSpec::new(ModelSpec::logistic_linear(3), 500, 2);
        gen.feature_scaling = FeatureScaling::MinMax;
        let (data, _) = simulate_data(&gen).unwrap();
        let norms: Vec<f64> = [0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| {
                let t = erm_fit(&data, l).unwrap();
                assert!(erm_grad_norm(&data, l, &t) < 1e-10);
                norm(&t)
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn weak_regularization_converges() {
        let mut gen = GeneratorSpec::new(ModelSpec::logistic_linear(2), 10_000, 8);
        gen.feature_scaling = FeatureScaling::MinMax;
        let (data, _) = simulate_data(&gen).unwrap();
        let lambda = 1.0 / (9.0 * data.len() as f64);
        let t = erm_fit(&data, lambda).unwrap();
        assert!(erm_grad_norm(&data, lambda, &t) < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let reg = Dataset::new(DataKind::Regression, vec![Record::new(vec![1.0], 0.3)]).unwrap();
        assert!(erm_fit(&reg, 1.0).is_err());
        let cls = Dataset::new(DataKind::Classification, vec![Record::new(vec![1.0], 1.0)]).unwrap();
        assert!(erm_fit(&cls, 0.0).is_err());
    }
}
