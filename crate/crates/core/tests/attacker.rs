use betaops::audit::{attacker_draws, attacker_score, worst_case_pair, AuditConfig, AuditMechanism};
use betaops::hmc::HmcConfig;

fn pooled_draws(mech: &AuditMechanism, keep_per_chain: usize, seed: u64) -> Vec<Vec<f64>> {
    let (d, _) = worst_case_pair();
    let cfg = AuditConfig {
        attacker_hmc: HmcConfig { chains: 4, keep_iters: keep_per_chain, seed, ..HmcConfig::default() },
        ..AuditConfig::default()
    };
    let (draws, report) = attacker_draws(mech, &d, &cfg).unwrap().unwrap();
    assert_eq!(report.divergences, 0);
    draws
}

#[test]
fn ops_scores_converge_in_the_number_of_draws() {
    let (d, d_prime) = worst_case_pair();
    let prior = AuditConfig::default().prior;
    for eps in [1.0, 2.0] {
        let mech = AuditMechanism::BetaDOps { epsilon: eps };
        let small = pooled_draws(&mech, 250, 1);
        let large = pooled_draws(&mech, 2500, 2);
        assert_eq!((small.len(), large.len()), (1000, 10_000));
        for theta in [-3.0, -1.0, -0.2, 0.0, 0.5, 1.5, 3.0] {
            let a = attacker_score(&mech, &[theta], &d, &d_prime, &prior, Some(&small)).unwrap();
            let b = attacker_score(&mech, &[theta], &d, &d_prime, &prior, Some(&large)).unwrap();
            assert!((a - b).abs() < 0.01, "ε = {eps}, θ = {theta}: {a} vs {b}");
        }
    }
}

#[test]
fn ops_scores_stay_within_the_privacy_bound() {
    // r = p(θ|D)/p(θ|D′) lies in [e^−ε, e^ε], so the score lies in [1/(1+e^ε), 1/(1+e^−ε)]
    let (d, d_prime) = worst_case_pair();
    let prior = AuditConfig::default().prior;
    let eps: f64 = 2.0;
    let mech = AuditMechanism::BetaDOps { epsilon: eps };
    let draws = pooled_draws(&mech, 250, 3);
    for k in -40..=40 {
        let s = attacker_score(&mech, &[k as f64 / 8.0], &d, &d_prime, &prior, Some(&draws)).unwrap();
        assert!(s >= 1.0 / (1.0 + eps.exp()) - 1e-12 && s <= 1.0 / (1.0 + (-eps).exp()) + 1e-12, "{s}");
    }
}
