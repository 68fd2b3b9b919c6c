//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr (visible
//! without `--nocapture`) and then asserts. Tests hold a shared lock so the
//! wall-clock budgets are measured without interference from one another.

use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use betaops::audit::{run_attack, AuditConfig, AuditMechanism};
use betaops::diagnostics::split_rhat;
use betaops::experiment::{cmd_sweep, release_hmc, ExperimentConfig, MechanismName, SweepRecord, Task};
use betaops::hmc::{hmc_run_chains, HmcConfig, MetricKind};
use betaops::model::{
    simulate_data, DataKind, Dataset, Family, FeatureScaling, GeneratorSpec, ModelSpec, ParamVector, Prior,
    Record,
};
use betaops::posterior::{grid_posterior, linear_grid, LogDensity, PosteriorDensity};
use betaops::privacy::{
    beta_loss, beta_loss_grad, beta_of_epsilon, epsilon_of_beta, gaussian_power_integral,
    LossSpec,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("{} [{id:>2}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---------------------------------------------------------------- 1

/// Largest `|log π(θ|D) − log π(θ|D′)|` over grid points and all single-record
/// replacements of `data` by a record from `pool`.
fn max_grid_log_ratio(loss: LossSpec, data: &Dataset, pool: &[Record], grid: &[ParamVector]) -> f64 {
    let model = ModelSpec::logistic_linear(1);
    let log_mass = |d: &Dataset| -> Vec<f64> {
        let post = PosteriorDensity::new(model, Prior::default(), loss, d.clone()).unwrap();
        grid_posterior(&post, grid).unwrap().iter().map(|p| p.ln()).collect()
    };
    let base = log_mass(data);
    let mut worst = 0.0f64;
    for i in 0..data.len() {
        for cand in pool {
            let other = log_mass(&data.replace(i, cand.clone()).unwrap());
            for (a, b) in base.iter().zip(&other) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

#[test]
fn c01_grid_posterior_ratio_respects_epsilon() {
    let _g = serial();
    let start = Instant::now();
    let mut r = rng(101);
    let record = |r: &mut ChaCha20Rng| Record::new(vec![r.gen_range(-1.0..=1.0)], f64::from(r.gen_bool(0.5) as u8));
    let data = Dataset::new(DataKind::Classification, (0..20).map(|_| record(&mut r)).collect()).unwrap();
    let mut pool: Vec<Record> = (0..48).map(|_| record(&mut r)).collect();
    // extreme candidates make the log-loss violation easy to exhibit
    pool.push(Record::new(vec![1.0], 0.0));
    pool.push(Record::new(vec![-1.0], 0.0));
    let grid = linear_grid(-5.0, 5.0, 201);

    let beta = 1.5;
    let eps = epsilon_of_beta(1.0, beta).unwrap();
    let beta_ratio = max_grid_log_ratio(LossSpec::BetaDLoss { beta }, &data, &pool, &grid);
    let log_ratio = max_grid_log_ratio(LossSpec::WeightedLogLoss { w: 1.0 }, &data, &pool, &grid);
    let elapsed = start.elapsed();

    let pass = (eps - 4.0).abs() < 1e-12
        && beta_ratio <= 4.0 + 1e-9
        && log_ratio > 4.0
        && elapsed < Duration::from_secs(10);
    verdict(
        1,
        "grid-posterior DP ratio",
        pass,
        &format!(
            "βD max log-ratio {beta_ratio:.6} ≤ 4; log-loss max log-ratio {log_ratio:.3} > 4; {}",
            secs(elapsed)
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

fn family_model(family: Family) -> ModelSpec {
    match family {
        Family::LogisticLinear => ModelSpec::logistic_linear(3),
        Family::LogisticMlp => ModelSpec::logistic_mlp(3, 10),
        Family::GaussianLinear => ModelSpec::gaussian_linear(3, 0.5).unwrap(),
        Family::GaussianMlp => ModelSpec::gaussian_mlp(3, 10, 0.5).unwrap(),
    }
}

const FAMILIES: [Family; 4] =
    [Family::LogisticLinear, Family::LogisticMlp, Family::GaussianLinear, Family::GaussianMlp];

fn random_record(model: &ModelSpec, r: &mut ChaCha20Rng) -> Record {
    let x: Vec<f64> = (0..model.d).map(|_| r.gen_range(-2.0..2.0)).collect();
    let y = match model.kind() {
        DataKind::Classification => f64::from(r.gen_bool(0.5) as u8),
        DataKind::Regression => r.gen_range(-6.0..6.0),
    };
    Record::new(x, y)
}

fn random_theta(model: &ModelSpec, r: &mut ChaCha20Rng, sd: f64) -> ParamVector {
    ParamVector((0..model.n_params()).map(|_| sd * r.gen_range(-1.0..1.0)).collect())
}

#[test]
fn c02_loss_sensitivity_bound() {
    let _g = serial();
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, family) in FAMILIES.into_iter().enumerate() {
        let model = family_model(family);
        let m = model.density_upper_bound();
        let mut r = rng(200 + k as u64);
        let mut worst_slack = f64::INFINITY;
        for _ in 0..100_000 {
            let beta = 1.0 + r.gen_range(0.01..3.0);
            let theta = random_theta(&model, &mut r, 3.0);
            // the datasets differ in one record; the other records cancel
            let z = random_record(&model, &mut r);
            let z_prime = random_record(&model, &mut r);
            let diff = (beta_loss(&model, &theta, &z, beta).unwrap()
                - beta_loss(&model, &theta, &z_prime, beta).unwrap())
            .abs();
            let bound = m.powf(beta - 1.0) / (beta - 1.0);
            worst_slack = worst_slack.min(bound + 1e-9 - diff);
        }
        pass &= worst_slack >= 0.0;
        lines.push(format!("{family:?} min slack {worst_slack:.3e}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    verdict(2, "loss sensitivity bound", pass, &format!("{}; {}", lines.join(", "), secs(elapsed)));
    assert!(pass);
}

// ---------------------------------------------------------------- 3

#[test]
fn c03_calibration_golden_values() {
    let _g = serial();
    let eps = epsilon_of_beta(1.0, 4.0 / 3.0).unwrap();
    // 4/3 is not representable; the correctly rounded result for the stored
    // β lies a couple of ulps above 6
    let golden = (eps - 6.0).abs() <= 4.0 * 6.0 * f64::EPSILON;
    let inverse = (beta_of_epsilon(1.0, 6.0).unwrap() - 4.0 / 3.0).abs() <= 1e-15;

    let mut r = rng(300);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let m: f64 = if r.gen_bool(0.5) { r.gen_range(0.01..1.0) } else { r.gen_range(1.0..5.0) };
        let beta_star: f64 = if m > 1.0 { 1.0 + 1.0 / m.ln() } else { 5.0 };
        let beta = 1.0 + r.gen_range(0.02..1.0) * (beta_star.min(5.0) - 1.0);
        let eps = epsilon_of_beta(m, beta).unwrap();
        worst = worst.max((beta_of_epsilon(m, eps).unwrap() - beta).abs());
    }
    let pass = golden && inverse && worst < 1e-10;
    verdict(
        3,
        "calibration golden values",
        pass,
        &format!("ε(1, 4/3) = {eps:?}; β(1, 6) within 1e-15 of 4/3: {inverse}; max round-trip error {worst:.2e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn c04_gaussian_integral_matches_quadrature() {
    let _g = serial();
    let mut r = rng(400);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let sigma2: f64 = 10f64.powf(r.gen_range(-2.0..2.0));
        let beta = 1.0 + r.gen_range(1e-6..=3.0);
        let sd = sigma2.sqrt();
        let density = |z: f64| (-0.5 * z * z / sigma2).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt();
        let f = |z: f64| density(z).powf(beta);
        let peak = f(0.0);
        // both halves separately so the symmetric peak is a node
        let half = adaptive_simpson(&f, 0.0, 40.0 * sd, 1e-14 * peak * sd);
        let quad = 2.0 * half;
        let closed = gaussian_power_integral(sigma2, beta);
        worst = worst.max(((closed - quad) / quad).abs());
    }
    let pass = worst < 1e-8;
    verdict(4, "Gaussian power integral", pass, &format!("max relative error {worst:.2e} over 1000 draws"));
    assert!(pass);
}

// ---------------------------------------------------------------- 5

fn gradient_error(f: &dyn Fn(&[f64]) -> f64, grad: &[f64], theta: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut t = theta.to_vec();
    for k in 0..theta.len() {
        let h = 1e-5 * theta[k].abs().max(1.0);
        t[k] = theta[k] + h;
        let up = f(&t);
        t[k] = theta[k] - h;
        let down = f(&t);
        t[k] = theta[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((grad[k] - fd).abs() / fd.abs().max(1.0));
    }
    worst
}

#[test]
fn c05_gradients_match_finite_differences() {
    let _g = serial();
    let mut lines = Vec::new();
    let mut overall = 0.0f64;
    for (k, family) in FAMILIES.into_iter().enumerate() {
        let model = family_model(family);
        let mut r = rng(500 + k as u64);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let beta = 1.0 + r.gen_range(0.05..2.0);
            let theta = random_theta(&model, &mut r, 1.5);
            let z = random_record(&model, &mut r);
            let g = beta_loss_grad(&model, &theta, &z, beta).unwrap();
            let f = |t: &[f64]| beta_loss(&model, &ParamVector(t.to_vec()), &z, beta).unwrap();
            worst = worst.max(gradient_error(&f, &g, &theta.0));

            let data = Dataset::new(model.kind(), (0..15).map(|_| random_record(&model, &mut r)).collect()).unwrap();
            for loss in [LossSpec::BetaDLoss { beta }, LossSpec::WeightedLogLoss { w: 0.7 }] {
                let post = PosteriorDensity::new(model, Prior::default(), loss, data.clone()).unwrap();
                let g = post.grad_log_unnorm(&theta).unwrap();
                let f = |t: &[f64]| post.log_unnorm(&ParamVector(t.to_vec())).unwrap();
                worst = worst.max(gradient_error(&f, &g, &theta.0));
            }
        }
        overall = overall.max(worst);
        lines.push(format!("{family:?} {worst:.1e}"));
    }
    let pass = overall < 1e-5;
    verdict(5, "gradients vs central differences", pass, &format!("max relative error: {}", lines.join(", ")));
    assert!(pass);
}

// ---------------------------------------------------------------- 6

#[test]
fn c06_loss_tends_to_log_loss() {
    let _g = serial();
    // The gap behaves like (β − 1)(log² f₁ − log² f₂)/2, so records are drawn
    // from the model at the evaluated θ rather than from its far tails.
    let mut final_gap = 0.0f64;
    let mut monotone = true;
    for (k, family) in [Family::LogisticLinear, Family::GaussianLinear, Family::GaussianMlp].into_iter().enumerate() {
        let model = family_model(family);
        let mut gen = GeneratorSpec::new(model, 40, 600 + k as u64);
        gen.feature_scaling = FeatureScaling::MinMax;
        let (data, theta) = simulate_data(&gen).unwrap();
        for i in (0..data.len()).step_by(2) {
            let (z1, z2) = (data.record(i), data.record(i + 1));
            let log_diff = model.log_density(&theta, &z2).unwrap() - model.log_density(&theta, &z1).unwrap();
            let mut prev = f64::INFINITY;
            for p in 1..=6 {
                let beta = 1.0 + 10f64.powi(-p);
                let diff =
                    beta_loss(&model, &theta, &z1, beta).unwrap() - beta_loss(&model, &theta, &z2, beta).unwrap();
                let gap = (diff - log_diff).abs();
                monotone &= gap <= prev + 1e-9;
                prev = gap;
                if p == 6 {
                    final_gap = final_gap.max(gap);
                }
            }
        }
    }
    let pass = final_gap < 1e-4 && monotone;
    verdict(
        6,
        "β → 1 limit",
        pass,
        &format!("largest gap at β = 1 + 1e-6: {final_gap:.2e}; gaps shrink with β − 1: {monotone}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7

struct Gaussian2 {
    mean: [f64; 2],
    sd: [f64; 2],
    rho: f64,
}

impl LogDensity for Gaussian2 {
    fn dim(&self) -> usize {
        2
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let u = (theta[0] - self.mean[0]) / self.sd[0];
        let v = (theta[1] - self.mean[1]) / self.sd[1];
        let c = 1.0 - self.rho * self.rho;
        grad[0] = -(u - self.rho * v) / (c * self.sd[0]);
        grad[1] = -(v - self.rho * u) / (c * self.sd[1]);
        -0.5 * (u * u - 2.0 * self.rho * u * v + v * v) / c
    }
}

fn ks_statistic(sample: &[f64], dist: &Normal) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let c = dist.cdf(*x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn c07_hmc_recovers_gaussian() {
    let _g = serial();
    let start = Instant::now();
    let target = Gaussian2 { mean: [1.0, -2.0], sd: [1.0, 2.5], rho: 0.6 };
    let cfg = HmcConfig { keep_iters: 1000, chains: 4, seed: 7, ..HmcConfig::default() };
    let chains = hmc_run_chains(&target, &cfg).unwrap();
    let elapsed = start.elapsed();

    let divergences: usize = chains.iter().map(|c| c.divergences).sum();
    let mut rhat = Vec::new();
    let mut ks = Vec::new();
    for k in 0..2 {
        let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(k)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        rhat.push(split_rhat(&refs).unwrap());
        let pooled: Vec<f64> = cols.concat();
        ks.push(ks_statistic(&pooled, &Normal::new(target.mean[k], target.sd[k]).unwrap()));
    }
    let pass = rhat.iter().all(|r| *r < 1.01)
        && ks.iter().all(|d| *d < 0.05)
        && divergences == 0
        && elapsed < Duration::from_secs(20);
    verdict(
        7,
        "HMC on a 2-D Gaussian",
        pass,
        &format!("split-R̂ {rhat:.4?}, KS {ks:.4?}, {divergences} divergences, {}", secs(elapsed)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 8, 9

const SWEEP_N: [usize; 3] = [100, 1000, 10_000];

struct Sweep {
    records: Vec<SweepRecord>,
    elapsed: Duration,
}

fn logistic_sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let cfg = ExperimentConfig {
            task: Task::Logistic,
            mechanisms: vec![MechanismName::BetadOps, MechanismName::MinamiOps, MechanismName::Chaudhuri],
            n: SWEEP_N.to_vec(),
            d: vec![2],
            epsilon: vec![6.0],
            seeds: (1..=20).collect(),
            chaudhuri_lambda: Some(1.0 / 9.0),
            force_release: true,
            ..ExperimentConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let records = cmd_sweep(&cfg, &dir.path().join("sweep.jsonl")).unwrap();
        Sweep { records, elapsed: start.elapsed() }
    })
}

fn median_rmse(sweep: &Sweep, mech: MechanismName, n: usize) -> f64 {
    let values: Vec<f64> = sweep
        .records
        .iter()
        .filter(|r| r.mechanism == mech && r.n == n)
        .map(|r| {
            let err = r.error.as_deref().unwrap_or("");
            r.metrics.as_ref().and_then(|m| m.param_rmse).unwrap_or_else(|| panic!("cell failed: {err}"))
        })
        .collect();
    assert_eq!(values.len(), 20);
    median(&values)
}

#[test]
fn c08_consistency_trend() {
    let _g = serial();
    let sweep = logistic_sweep();
    let betad: Vec<f64> = SWEEP_N.iter().map(|&n| median_rmse(sweep, MechanismName::BetadOps, n)).collect();
    let minami = median_rmse(sweep, MechanismName::MinamiOps, 10_000);
    let decreasing = betad.windows(2).all(|w| w[1] < w[0]);
    let pass = decreasing && betad[2] <= minami && sweep.elapsed < Duration::from_secs(30 * 60);
    verdict(
        8,
        "consistency trend",
        pass,
        &format!(
            "βD median RMSE at n = 1e2, 1e3, 1e4: {betad:.4?}; Gibbs OPS at 1e4: {minami:.4}; sweep {}",
            secs(sweep.elapsed)
        ),
    );
    assert!(pass);
}

#[test]
fn c09_output_perturbation_bias() {
    let _g = serial();
    let sweep = logistic_sweep();
    let ratio = |m| median_rmse(sweep, m, 10_000) / median_rmse(sweep, m, 1000);
    let (chaudhuri, betad) = (ratio(MechanismName::Chaudhuri), ratio(MechanismName::BetadOps));
    let pass = chaudhuri > 0.8 && betad < 0.6;
    verdict(
        9,
        "output-perturbation bias plateau",
        pass,
        &format!("RMSE(1e4)/RMSE(1e3): output perturbation {chaudhuri:.3} > 0.8, βD {betad:.3} < 0.6"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 10

#[test]
fn c10_audit_is_sound_for_output_perturbation() {
    let _g = serial();
    let start = Instant::now();
    let cfg = AuditConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, eps) in [0.2, 1.0, 2.0].into_iter().enumerate() {
        let mech = AuditMechanism::Chaudhuri { epsilon: eps, lambda: None };
        let out = run_attack(&mech, 10_000, &cfg, 1000 + k as u64).unwrap();
        pass &= out.eps_lower <= eps;
        if eps == 0.2 {
            pass &= (0.48..=0.56).contains(&out.accuracy);
        }
        lines.push(format!("ε {eps}: accuracy {:.4}, ε lower bound {:.3}", out.accuracy, out.eps_lower));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    verdict(10, "audit soundness", pass, &format!("{}; {}", lines.join("; "), secs(elapsed)));
    assert!(pass);
}

// ---------------------------------------------------------------- 11

#[test]
fn c11_attack_accuracy_grows_with_epsilon() {
    let _g = serial();
    const REPEATS: u64 = 7;
    let start = Instant::now();
    let cfg = AuditConfig::default();
    let medians: Vec<f64> = [0.2, 1.0, 2.0, 7.0]
        .into_iter()
        .enumerate()
        .map(|(k, eps)| {
            let acc: Vec<f64> = (0..REPEATS)
                .map(|rep| {
                    let seed = 1100 + 100 * k as u64 + rep;
                    run_attack(&AuditMechanism::BetaDOps { epsilon: eps }, 1000, &cfg, seed).unwrap().accuracy
                })
                .collect();
            median(&acc)
        })
        .collect();
    let pass = medians.windows(2).all(|w| w[1] >= w[0]);
    verdict(
        11,
        "attack accuracy monotone in ε",
        pass,
        &format!(
            "median accuracy over {REPEATS} audits at ε = 0.2, 1, 2, 7: {medians:.4?}; {}",
            secs(start.elapsed())
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 12

fn skew_and_excess_kurtosis(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let moment = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let m2 = moment(2);
    (moment(3) / m2.powf(1.5), moment(4) / (m2 * m2) - 3.0)
}

#[test]
fn c12_posterior_is_approximately_normal() {
    let _g = serial();
    let start = Instant::now();
    let mut gen = GeneratorSpec::new(ModelSpec::logistic_linear(2), 10_000, 12);
    gen.feature_scaling = FeatureScaling::MinMax;
    let (data, _) = simulate_data(&gen).unwrap();
    let beta = beta_of_epsilon(1.0, 6.0).unwrap();
    let post = PosteriorDensity::new(
        ModelSpec::logistic_linear(2),
        Prior::default(),
        LossSpec::BetaDLoss { beta },
        data,
    )
    .unwrap();
    let cfg = HmcConfig { keep_iters: 5000, chains: 4, metric: MetricKind::Dense, seed: 12, ..HmcConfig::default() };
    let chains = hmc_run_chains(&post, &cfg).unwrap();
    let mut shape = Vec::new();
    for k in 0..2 {
        let pooled: Vec<f64> = chains.iter().flat_map(|c| c.column(k)).collect();
        shape.push(skew_and_excess_kurtosis(&pooled));
    }
    let pass = shape.iter().all(|(s, k)| s.abs() < 0.1 && k.abs() < 0.2);
    verdict(
        12,
        "posterior normality at n = 1e4",
        pass,
        &format!("(skew, excess kurtosis) per coordinate {shape:.4?} from 20000 draws; {}", secs(start.elapsed())),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 13

#[test]
fn c13_sweeps_are_deterministic() {
    let _g = serial();
    let cfg = ExperimentConfig {
        task: Task::Logistic,
        mechanisms: vec![
            MechanismName::BetadOps,
            MechanismName::MinamiOps,
            MechanismName::Chaudhuri,
            MechanismName::Dpsgd,
            MechanismName::NonPrivate,
        ],
        n: vec![200],
        d: vec![2],
        epsilon: vec![1.0, 6.0],
        seeds: vec![1, 2],
        hmc: HmcConfig { warmup_iters: 300, ..release_hmc() },
        force_release: true,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let ra = cmd_sweep(&cfg, &a).unwrap();
    let rb = cmd_sweep(&ExperimentConfig { workers: Some(2), ..cfg.clone() }, &b).unwrap();
    let metrics = |rs: &[SweepRecord]| -> Vec<String> {
        rs.iter().map(|r| serde_json::to_string(&r.metrics).unwrap()).collect()
    };
    let files_equal = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
    let metrics_equal = metrics(&ra) == metrics(&rb);
    let all_ok = ra.iter().all(|r| r.error.is_none() && r.metrics.is_some());
    let pass = files_equal && metrics_equal && all_ok;
    verdict(
        13,
        "sweep determinism",
        pass,
        &format!("{} cells; metric fields identical: {metrics_equal}; files identical: {files_equal}", ra.len()),
    );
    assert!(pass);
}
