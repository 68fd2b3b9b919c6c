//! Hamiltonian Monte Carlo with warm-up adaptation.
//!
//! Each transition draws a momentum, runs a leapfrog trajectory and applies a
//! Metropolis correction. The trajectory length is jittered: with step size
//! ε it takes `⌈u·T/ε⌉` steps, `u ~ Uniform(0, 1]`, capped at
//! `max_leapfrog_steps`, where `T` is `integration_time` in units of the
//! adapted metric. Warm-up runs in three windows:
//!
//! 1. first 75 iterations: dual-averaging step-size adaptation under a unit
//!    metric;
//! 2. doubling windows (25, 50, 100, …; the last one stretched to the
//!    terminal buffer) each end with a diagonal metric estimate and a
//!    step-size restart;
//! 3. last 50 iterations: the metric is fixed and only the step size adapts.
//!
//! Transitions whose energy error exceeds `divergence_threshold` are
//! rejected and, after warm-up, counted as divergent.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{ess, split_rhat_classic};
use crate::error::{Error, Result};
use crate::linalg::{backward_solve, cholesky, mat_vec};
use crate::model::ParamVector;
use crate::posterior::LogDensity;
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    pub warmup_iters: usize,
    pub keep_iters: usize,
    pub target_accept: f64,
    pub max_leapfrog_steps: usize,
    /// Longest integration time; jittered trajectories average half of it.
    pub integration_time: f64,
    pub metric: MetricKind,
    pub divergence_threshold: f64,
    pub chains: usize,
    /// Scale of the Gaussian jitter around the initial point.
    pub init_jitter: f64,
    pub seed: u64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            warmup_iters: 1000,
            keep_iters: 100,
            target_accept: 0.8,
            max_leapfrog_steps: 64,
            integration_time: 3.0,
            metric: MetricKind::Diagonal,
            divergence_threshold: 1000.0,
            chains: 4,
            init_jitter: 0.1,
            seed: 0,
        }
    }
}

impl HmcConfig {
    /// Defaults with a single chain, as used for releases.
    pub fn release(seed: u64) -> Self {
        Self { chains: 1, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("hmc config: {m}")));
        if self.warmup_iters == 0 || self.keep_iters == 0 || self.chains == 0 {
            return bad("iteration and chain counts must be positive");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        if self.max_leapfrog_steps == 0 {
            return bad("max_leapfrog_steps must be positive");
        }
        if !(self.integration_time > 0.0 && self.integration_time.is_finite()) {
            return bad("integration_time must be positive");
        }
        if !(self.divergence_threshold > 0.0) || !(self.init_jitter >= 0.0) {
            return bad("divergence threshold must be positive and jitter nonnegative");
        }
        Ok(())
    }
}

/// Form of the adapted mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Inverse of the per-coordinate variance estimate.
    #[default]
    Diagonal,
    /// Inverse of the full covariance estimate; suits strongly correlated
    /// low-dimensional posteriors.
    Dense,
}

/// Inverse mass matrix used by the integrator.
#[derive(Debug, Clone)]
enum Metric {
    Diagonal(Vec<f64>),
    /// Covariance `Σ` and its lower Cholesky factor.
    Dense { cov: Vec<f64>, chol: Vec<f64> },
}

impl Metric {
    fn from_variances(kind: MetricKind, var: Vec<f64>) -> Self {
        match kind {
            MetricKind::Diagonal => Metric::Diagonal(var),
            MetricKind::Dense => {
                let d = var.len();
                let mut cov = vec![0.0; d * d];
                let mut chol = vec![0.0; d * d];
                for (i, v) in var.iter().enumerate() {
                    cov[i * d + i] = *v;
                    chol[i * d + i] = v.sqrt();
                }
                Metric::Dense { cov, chol }
            }
        }
    }

    fn estimate(kind: MetricKind, window: &[Vec<f64>]) -> Self {
        match kind {
            MetricKind::Diagonal => Metric::Diagonal(regularized_variance(window)),
            MetricKind::Dense => {
                let cov = regularized_covariance(window);
                let dim = window[0].len();
                match cholesky(&cov, dim) {
                    Some(chol) => Metric::Dense { cov, chol },
                    None => Metric::Diagonal(regularized_variance(window)),
                }
            }
        }
    }

    /// Diagonal of `Σ`.
    fn variances(&self) -> Vec<f64> {
        match self {
            Metric::Diagonal(v) => v.clone(),
            Metric::Dense { cov, .. } => {
                let d = (cov.len() as f64).sqrt() as usize;
                (0..d).map(|i| cov[i * d + i]).collect()
            }
        }
    }

    /// `v = Σ p`.
    fn velocity(&self, p: &[f64], v: &mut [f64]) {
        match self {
            Metric::Diagonal(m) => v.iter_mut().zip(p.iter().zip(m)).for_each(|(vi, (pi, mi))| *vi = pi * mi),
            Metric::Dense { cov, .. } => mat_vec(cov, p, v),
        }
    }

    /// `p ~ N(0, Σ⁻¹)`.
    fn draw(&self, p: &mut [f64], rng: &mut Rng) {
        let z: Vec<f64> = (0..p.len()).map(|_| StandardNormal.sample(rng)).collect();
        match self {
            Metric::Diagonal(m) => p.iter_mut().zip(z.iter().zip(m)).for_each(|(pi, (zi, mi))| *pi = zi / mi.sqrt()),
            Metric::Dense { chol, .. } => p.copy_from_slice(&backward_solve(chol, &z)),
        }
    }
}

/// Post-warm-up draws of one chain with its sampler statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// `keep_iters` rows of length `p`.
    pub draws: Vec<Vec<f64>>,
    /// Mean Metropolis acceptance probability over kept transitions.
    pub accept_rate: f64,
    pub divergences: usize,
    pub step_size: f64,
    /// Inverse of the adapted metric's variances; the diagonal of the mass
    /// matrix for a diagonal metric.
    pub mass_diag: Vec<f64>,
    /// Single-chain split-R̂ per coordinate (NaN when undefined).
    pub split_rhat: Vec<f64>,
    pub ess: Vec<f64>,
    /// `|ΔH|` of every kept transition.
    pub energy_errors: Vec<f64>,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.mass_diag.len()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            h_bar: 0.0,
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            t: 0.0,
            target,
        }
    }

    fn update(&mut self, accept: f64) {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let k = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = k * self.log_eps + (1.0 - k) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

struct Sampler<'a, T: LogDensity> {
    target: &'a T,
    metric: Metric,
    theta: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
    // trajectory scratch
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    v: Vec<f64>,
}

struct Transition {
    accept_prob: f64,
    divergent: bool,
    energy_error: f64,
}

impl<'a, T: LogDensity> Sampler<'a, T> {
    fn kinetic(&mut self) -> f64 {
        self.metric.velocity(&self.p, &mut self.v);
        0.5 * self.p.iter().zip(&self.v).map(|(a, b)| a * b).sum::<f64>()
    }

    fn draw_momentum(&mut self, rng: &mut Rng) {
        self.metric.draw(&mut self.p, rng);
    }

    /// Integrate `steps` leapfrog steps from the current state into `q, p, g`.
    fn leapfrog(&mut self, eps: f64, steps: usize) -> f64 {
        self.q.copy_from_slice(&self.theta);
        self.g.copy_from_slice(&self.grad);
        let mut logp = self.logp;
        for _ in 0..steps {
            for (pi, gi) in self.p.iter_mut().zip(&self.g) {
                *pi += 0.5 * eps * gi;
            }
            self.metric.velocity(&self.p, &mut self.v);
            for (qi, vi) in self.q.iter_mut().zip(&self.v) {
                *qi += eps * vi;
            }
            logp = self.target.log_density_and_grad(&self.q, &mut self.g);
            if !logp.is_finite() {
                return f64::NEG_INFINITY;
            }
            for (pi, gi) in self.p.iter_mut().zip(&self.g) {
                *pi += 0.5 * eps * gi;
            }
        }
        logp
    }

    fn transition(&mut self, eps: f64, steps: usize, threshold: f64, rng: &mut Rng) -> Transition {
        self.draw_momentum(rng);
        let h0 = -self.logp + self.kinetic();
        let logp_new = self.leapfrog(eps, steps);
        let h1 = -logp_new + self.kinetic();
        let delta = h1 - h0;
        if !delta.is_finite() || delta > threshold {
            return Transition { accept_prob: 0.0, divergent: true, energy_error: f64::INFINITY };
        }
        let accept_prob = (-delta).exp().min(1.0);
        if rng.gen::<f64>() < accept_prob {
            std::mem::swap(&mut self.theta, &mut self.q);
            std::mem::swap(&mut self.grad, &mut self.g);
            self.logp = logp_new;
        }
        Transition { accept_prob, divergent: false, energy_error: delta.abs() }
    }

    /// Heuristic initial step size: double or halve until the one-step
    /// acceptance probability crosses 1/2.
    fn reasonable_step(&mut self, rng: &mut Rng) -> f64 {
        let mut eps: f64 = 1.0;
        let accept = |s: &mut Self, eps: f64, rng: &mut Rng| {
            s.draw_momentum(rng);
            let h0 = -s.logp + s.kinetic();
            let lp = s.leapfrog(eps, 1);
            let h1 = -lp + s.kinetic();
            let a = (h0 - h1).exp();
            if a.is_finite() { a } else { 0.0 }
        };
        let first = accept(self, eps, rng);
        let dir = if first > 0.5 { 1.0 } else { -1.0 };
        let mut a = first;
        for _ in 0..100 {
            if !(dir * (a.ln()) > -dir * 2f64.ln()) {
                break;
            }
            eps *= 2f64.powf(dir);
            a = accept(self, eps, rng);
        }
        eps.clamp(1e-10, 1e3)
    }
}

fn trajectory_steps(cfg: &HmcConfig, eps: f64, rng: &mut Rng) -> usize {
    let u = 1.0 - rng.gen::<f64>();
    let steps = (u * cfg.integration_time / eps).ceil();
    if steps.is_finite() {
        (steps as usize).clamp(1, cfg.max_leapfrog_steps)
    } else {
        cfg.max_leapfrog_steps
    }
}

/// Inverse curvature of `−log π` along each coordinate at `theta`, by central
/// differences of the gradient; 1 where the curvature is not positive.
///
/// Starts warm-up on roughly the right scale, so the unit-metric phase does
/// not spend its trajectories at the step cap on concentrated posteriors.
fn initial_variances<T: LogDensity>(target: &T, theta: &[f64]) -> Vec<f64> {
    let dim = theta.len();
    let mut q = theta.to_vec();
    let mut g_plus = vec![0.0; dim];
    let mut g_minus = vec![0.0; dim];
    (0..dim)
        .map(|k| {
            let h = 1e-4 * theta[k].abs().max(1.0);
            q[k] = theta[k] + h;
            let a = target.log_density_and_grad(&q, &mut g_plus);
            q[k] = theta[k] - h;
            let b = target.log_density_and_grad(&q, &mut g_minus);
            q[k] = theta[k];
            let curv = -(g_plus[k] - g_minus[k]) / (2.0 * h);
            if a.is_finite() && b.is_finite() && curv.is_finite() && curv > 0.0 {
                (1.0 / curv).clamp(1e-8, 1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Run one chain with seed `seed`.
pub fn hmc_chain<T: LogDensity>(target: &T, cfg: &HmcConfig, seed: u64) -> Result<Chain> {
    cfg.validate()?;
    let dim = target.dim();
    let mut rng = rng_from_seed(seed);

    let mut theta = target.initial_point();
    for t in theta.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *t += cfg.init_jitter * z;
    }
    let mut grad = vec![0.0; dim];
    let logp = target.log_density_and_grad(&theta, &mut grad);
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("log density or gradient at the initial point".into()));
    }

    let mut s = Sampler {
        target,
        metric: Metric::from_variances(cfg.metric, initial_variances(target, &theta)),
        theta,
        grad,
        logp,
        q: vec![0.0; dim],
        p: vec![0.0; dim],
        g: vec![0.0; dim],
        v: vec![0.0; dim],
    };

    let warm = cfg.warmup_iters;
    let windows = metric_windows(warm);
    let mut next_window = 0;
    let mut da = DualAveraging::new(s.reasonable_step(&mut rng), cfg.target_accept);
    let mut window: Vec<Vec<f64>> = Vec::new();
    let mut warm_accept = 0.0;

    for it in 0..warm {
        let eps = da.current();
        let steps = trajectory_steps(cfg, eps, &mut rng);
        let tr = s.transition(eps, steps, cfg.divergence_threshold, &mut rng);
        warm_accept += tr.accept_prob;
        da.update(tr.accept_prob);
        if let Some(&(start, end)) = windows.get(next_window) {
            if it >= start {
                window.push(s.theta.clone());
            }
            if it + 1 == end {
                s.metric = Metric::estimate(cfg.metric, &window);
                window.clear();
                next_window += 1;
                let eps0 = s.reasonable_step(&mut rng);
                da = DualAveraging::new(eps0, cfg.target_accept);
            }
        }
    }
    if warm_accept == 0.0 {
        return Err(Error::AdaptationFailed("no proposal was accepted during warm-up".into()));
    }
    let eps = da.final_step();
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::AdaptationFailed(format!("adapted step size {eps}")));
    }

    let mut draws = Vec::with_capacity(cfg.keep_iters);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    let mut energy_errors = Vec::with_capacity(cfg.keep_iters);
    for _ in 0..cfg.keep_iters {
        let steps = trajectory_steps(cfg, eps, &mut rng);
        let tr = s.transition(eps, steps, cfg.divergence_threshold, &mut rng);
        accept_sum += tr.accept_prob;
        divergences += usize::from(tr.divergent);
        energy_errors.push(tr.energy_error);
        draws.push(s.theta.clone());
    }

    let mut split = Vec::with_capacity(dim);
    let mut ess_k = Vec::with_capacity(dim);
    for k in 0..dim {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        split.push(split_rhat_classic(&[&col]).unwrap_or(f64::NAN));
        ess_k.push(ess(&[&col]).unwrap_or(f64::NAN));
    }

    Ok(Chain {
        draws,
        accept_rate: accept_sum / cfg.keep_iters as f64,
        divergences,
        step_size: eps,
        mass_diag: s.metric.variances().iter().map(|v| 1.0 / v).collect(),
        split_rhat: split,
        ess: ess_k,
        energy_errors,
    })
}

/// Seed of chain `k` under `cfg`.
pub fn chain_seed(cfg: &HmcConfig, k: usize) -> u64 {
    derive_seed(cfg.seed, &[k as u64])
}

/// Run the first chain of `cfg`.
pub fn hmc_run<T: LogDensity>(target: &T, cfg: &HmcConfig) -> Result<Chain> {
    hmc_chain(target, cfg, chain_seed(cfg, 0))
}

/// Run `cfg.chains` independent chains in parallel.
pub fn hmc_run_chains<T: LogDensity + Sync>(target: &T, cfg: &HmcConfig) -> Result<Vec<Chain>> {
    (0..cfg.chains)
        .into_par_iter()
        .map(|k| hmc_chain(target, cfg, chain_seed(cfg, k)))
        .collect()
}

/// Metric adaptation windows `[start, end)` inside warm-up: a 75-iteration
/// initial buffer, doubling windows from 25 iterations and a 50-iteration
/// terminal buffer; the last window is stretched to meet the terminal
/// buffer. Warm-ups shorter than 150 scale the buffers to 15% and 10%;
/// below 20 iterations only the step size adapts.
fn metric_windows(warm: usize) -> Vec<(usize, usize)> {
    if warm < 20 {
        return Vec::new();
    }
    let (init, term, base) = if warm < 150 {
        let init = warm * 15 / 100;
        let term = warm / 10;
        (init, term, warm - init - term)
    } else {
        (75, 50, 25)
    };
    let end = warm - term;
    let mut out = Vec::new();
    let mut lo = init;
    let mut size = base;
    loop {
        let hi = lo + size;
        // stretch the window if the next one would not fit
        if hi + 2 * size > end {
            out.push((lo, end));
            break;
        }
        out.push((lo, hi));
        lo = hi;
        size *= 2;
    }
    out
}

fn regularized_variance(window: &[Vec<f64>]) -> Vec<f64> {
    let n = window.len() as f64;
    let dim = window[0].len();
    (0..dim)
        .map(|k| {
            let m = window.iter().map(|w| w[k]).sum::<f64>() / n;
            let v = window.iter().map(|w| (w[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0))
        })
        .collect()
}

/// Sample covariance shrunk towards `1e-3·I` like the diagonal estimate.
fn regularized_covariance(window: &[Vec<f64>]) -> Vec<f64> {
    let n = window.len() as f64;
    let dim = window[0].len();
    let mean: Vec<f64> = (0..dim).map(|k| window.iter().map(|w| w[k]).sum::<f64>() / n).collect();
    let mut cov = vec![0.0; dim * dim];
    for w in window {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += (w[i] - mean[i]) * (w[j] - mean[j]);
            }
        }
    }
    let shrink = n / (n + 5.0) / (n - 1.0);
    cov.iter_mut().for_each(|c| *c *= shrink);
    for i in 0..dim {
        cov[i * dim + i] += 1e-3 * (5.0 / (n + 5.0));
    }
    cov
}

/// One draw chosen uniformly from the chain's kept draws.
pub fn ops_release(chain: &Chain, seed: u64) -> Result<ParamVector> {
    if chain.draws.is_empty() {
        return Err(Error::Empty("chain has no draws".into()));
    }
    let idx = rng_from_seed(seed).gen_range(0..chain.draws.len());
    Ok(ParamVector(chain.draws[idx].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent Gaussian target with given scales.
    pub(crate) struct Gaussian {
        pub sd: Vec<f64>,
    }

    impl LogDensity for Gaussian {
        fn dim(&self) -> usize {
            self.sd.len()
        }
        fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for ((t, g), s) in theta.iter().zip(grad.iter_mut()).zip(&self.sd) {
                lp -= 0.5 * (t / s).powi(2);
                *g = -t / (s * s);
            }
            lp
        }
    }

    struct Flat;
    impl LogDensity for Flat {
        fn dim(&self) -> usize {
            1
        }
        fn log_density_and_grad(&self, _: &[f64], grad: &mut [f64]) -> f64 {
            grad[0] = f64::NAN;
            0.0
        }
    }

    #[test]
    fn standard_gaussian_moments() {
        let cfg = HmcConfig { keep_iters: 1000, seed: 4, ..HmcConfig::default() };
        let chains = hmc_run_chains(&Gaussian { sd: vec![1.0, 1.0] }, &cfg).unwrap();
        let report = crate::diagnostics::diagnostics(&chains).unwrap();
        for k in 0..2 {
            let pooled: Vec<f64> = chains.iter().flat_map(|c| c.column(k)).collect();
            let n = pooled.len() as f64;
            let mean = pooled.iter().sum::<f64>() / n;
            let var = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let ess = report.ess[k].unwrap();
            assert!(mean.abs() < 3.0 / ess.sqrt(), "mean {mean} ess {ess}");
            assert!(ess >= 400.0);
            assert!((var - 1.0).abs() < 0.15, "var {var}");
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let cfg = HmcConfig { warmup_iters: 200, keep_iters: 50, seed: 9, ..HmcConfig::default() };
        let t = Gaussian { sd: vec![0.5, 2.0, 1.0] };
        let a = hmc_run(&t, &cfg).unwrap();
        let b = hmc_run(&t, &cfg).unwrap();
        assert_eq!(a, b);
        let c = hmc_run(&t, &HmcConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn metric_adapts_to_scales() {
        let cfg = HmcConfig { keep_iters: 200, seed: 1, ..HmcConfig::default() };
        let chain = hmc_run(&Gaussian { sd: vec![0.01, 10.0] }, &cfg).unwrap();
        // mass ≈ 1/variance
        assert!(chain.mass_diag[0] > 1e3 && chain.mass_diag[1] < 0.1, "{:?}", chain.mass_diag);
        assert_eq!(chain.divergences, 0);
        assert!(chain.accept_rate > 0.5);
    }

    #[test]
    fn nonfinite_initial_gradient_is_an_error() {
        let cfg = HmcConfig::release(0);
        assert!(matches!(hmc_run(&Flat, &cfg), Err(Error::NonFinite(_))));
    }

    #[test]
    fn release_picks_kept_draws_uniformly() {
        let chain = Chain {
            draws: (0..100).map(|i| vec![i as f64]).collect(),
            accept_rate: 1.0,
            divergences: 0,
            step_size: 1.0,
            mass_diag: vec![1.0],
            split_rhat: vec![1.0],
            ess: vec![100.0],
            energy_errors: vec![],
        };
        let mut counts = vec![0usize; 100];
        for s in 0..100_000u64 {
            let t = ops_release(&chain, derive_seed(77, &[s])).unwrap();
            counts[t[0] as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (800..=1200).contains(&c)), "{counts:?}");

        let single = Chain { draws: vec![vec![3.5]], ..chain.clone() };
        assert_eq!(ops_release(&single, 1).unwrap().0, vec![3.5]);
        let empty = Chain { draws: vec![], ..chain };
        assert!(ops_release(&empty, 1).is_err());
    }

    #[test]
    fn window_layout() {
        assert_eq!(
            metric_windows(1000),
            vec![(75, 100), (100, 150), (150, 250), (250, 450), (450, 950)]
        );
        assert!(metric_windows(10).is_empty());
        for w in [30, 77, 149] {
            let ws = metric_windows(w);
            assert_eq!(ws[0].0, w * 15 / 100);
            assert_eq!(ws.last().unwrap().1, w - w / 10);
        }
        for w in [150, 200, 5000] {
            let ws = metric_windows(w);
            assert!(ws.windows(2).all(|p| p[0].1 == p[1].0));
            assert_eq!((ws[0].0, ws.last().unwrap().1), (75, w - 50));
        }
    }

    #[test]
    fn config_validation() {
        assert!(HmcConfig { target_accept: 1.0, ..HmcConfig::default() }.validate().is_err());
        assert!(HmcConfig { keep_iters: 0, ..HmcConfig::default() }.validate().is_err());
        assert!(HmcConfig::default().validate().is_ok());
    }
}
