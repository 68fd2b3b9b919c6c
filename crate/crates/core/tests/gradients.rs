use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use betaops::model::{DataKind, Dataset, ModelSpec, ParamVector, Prior, Record};
use betaops::posterior::PosteriorDensity;
use betaops::privacy::{beta_loss, beta_loss_grad, LossSpec};

fn families() -> Vec<ModelSpec> {
    vec![
        ModelSpec::logistic_linear(3),
        ModelSpec::logistic_mlp(3, 10),
        ModelSpec::gaussian_linear(3, 0.4).unwrap(),
        ModelSpec::gaussian_mlp(3, 10, 0.4).unwrap(),
    ]
}

fn record(model: &ModelSpec, rng: &mut ChaCha20Rng) -> Record {
    let x = (0..model.d).map(|_| rng.gen_range(0.0..1.0)).collect();
    let y = match model.kind() {
        DataKind::Classification => f64::from(rng.gen_bool(0.5) as u8),
        DataKind::Regression => rng.gen_range(-3.0..3.0),
    };
    Record::new(x, y)
}

fn theta(model: &ModelSpec, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..model.n_params()).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn assert_matches_fd(f: impl Fn(&[f64]) -> f64, grad: &[f64], at: &[f64], what: &str) {
    let mut t = at.to_vec();
    for k in 0..at.len() {
        let h = 1e-6 * at[k].abs().max(1.0);
        t[k] = at[k] + h;
        let up = f(&t);
        t[k] = at[k] - h;
        let down = f(&t);
        t[k] = at[k];
        let fd = (up - down) / (2.0 * h);
        let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1.0);
        assert!(rel < 1e-5, "{what}, coordinate {k}: {} vs {fd}", grad[k]);
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for model in families() {
        for _ in 0..1000 {
            let beta = rng.gen_range(1.05..3.0);
            let th = theta(&model, &mut rng);
            let z = record(&model, &mut rng);
            let g = beta_loss_grad(&model, &ParamVector(th.clone()), &z, beta).unwrap();
            let f = |t: &[f64]| beta_loss(&model, &ParamVector(t.to_vec()), &z, beta).unwrap();
            assert_matches_fd(f, &g, &th, &format!("{:?} β = {beta}", model.family));
        }
    }
}

#[test]
fn log_posterior_gradient_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for model in families() {
        for _ in 0..100 {
            let data = Dataset::new(model.kind(), (0..20).map(|_| record(&model, &mut rng)).collect()).unwrap();
            let th = theta(&model, &mut rng);
            let losses = [LossSpec::BetaDLoss { beta: rng.gen_range(1.05..3.0) }, LossSpec::WeightedLogLoss { w: 0.3 }];
            for loss in losses {
                let post = PosteriorDensity::new(model, Prior::default(), loss, data.clone()).unwrap();
                let g = post.grad_log_unnorm(&ParamVector(th.clone())).unwrap();
                let f = |t: &[f64]| post.log_unnorm(&ParamVector(t.to_vec())).unwrap();
                assert_matches_fd(f, &g, &th, &format!("{:?} {loss:?}", model.family));
            }
        }
    }
}
