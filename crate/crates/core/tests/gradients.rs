//! Analytic PPO gradients against central finite differences.

use rand::Rng;

use rlmeta::policy::{gaussian_log_prob, Activation, Mlp, PolicyNet};
use rlmeta::ppo::{clipped_surrogate, ppo_loss, LossCoefficients, Sample};
use rlmeta::rng::{normal, stream_rng, Rng as StreamRng};

struct Case {
    policy: PolicyNet<f64>,
    value: Mlp<f64>,
    samples: Vec<Sample<f64>>,
    coeffs: LossCoefficients<f64>,
}

fn random_case(rng: &mut StreamRng) -> Case {
    let obs = rng.random_range(1..4);
    let hidden = rng.random_range(2..5);
    let act = rng.random_range(1..3);
    let mut policy = PolicyNet::new(Mlp::init(vec![obs, hidden, act], Activation::Tanh, 1.0, 1.0, rng));
    for ls in policy.log_std.iter_mut() {
        *ls = rng.random_range(-1.0..0.5);
    }
    let value = Mlp::init(vec![obs, hidden, 1], Activation::Tanh, 1.0, 1.0, rng);
    assert!(policy.num_params() <= 50 && value.num_params() <= 50);

    let n = rng.random_range(1..8);
    let samples = (0..n)
        .map(|_| {
            let observation: Vec<f64> = (0..obs).map(|_| normal(rng)).collect();
            let mean = policy.mlp.forward(&observation).unwrap();
            let action: Vec<f64> = mean
                .iter()
                .zip(&policy.log_std)
                .map(|(m, ls)| m + ls.exp() * normal::<f64, _>(rng))
                .collect();
            // Old log-probs scattered around the current ones so that ratios
            // land on both sides of the clip range.
            let old_log_prob = gaussian_log_prob(&action, &mean, &policy.log_std) + 0.4 * normal::<f64, _>(rng);
            Sample {
                observation,
                action,
                old_log_prob,
                advantage: normal(rng),
                value_target: normal(rng),
            }
        })
        .collect();
    let coeffs = LossCoefficients {
        clip: rng.random_range(0.1..0.4),
        value: rng.random_range(0.1..2.0),
        entropy: rng.random_range(0.0..0.1),
    };
    Case { policy, value, samples, coeffs }
}

fn total(case: &Case, policy: &PolicyNet<f64>, value: &Mlp<f64>) -> f64 {
    let batch: Vec<&Sample<f64>> = case.samples.iter().collect();
    ppo_loss(policy, value, &batch, case.coeffs).unwrap().total
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()) + 1e-8
}

/// Checks every policy and value gradient entry of 100 random configurations.
/// Returns the number of entries compared.
pub fn check_all() -> usize {
    let mut rng = stream_rng(2024, 0);
    let h = 1e-6;
    let mut compared = 0;
    for cfg in 0..100 {
        let case = random_case(&mut rng);
        let batch: Vec<&Sample<f64>> = case.samples.iter().collect();
        let out = ppo_loss(&case.policy, &case.value, &batch, case.coeffs).unwrap();
        let np = case.policy.mlp.num_params();
        for k in 0..case.policy.num_params() {
            let bump = |delta: f64| {
                let mut p = case.policy.clone();
                if k < np {
                    p.mlp.params_mut()[k] += delta;
                } else {
                    p.log_std[k - np] += delta;
                }
                total(&case, &p, &case.value)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            assert!(close(out.policy_grad[k], fd), "config {cfg} policy param {k}: {} vs {fd}", out.policy_grad[k]);
            compared += 1;
        }
        for k in 0..case.value.num_params() {
            let bump = |delta: f64| {
                let mut v = case.value.clone();
                v.params_mut()[k] += delta;
                total(&case, &case.policy, &v)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            assert!(close(out.value_grad[k], fd), "config {cfg} value param {k}: {} vs {fd}", out.value_grad[k]);
            compared += 1;
        }
    }
    compared
}

#[test]
fn ppo_loss_gradients_match_finite_differences() {
    assert!(check_all() > 1000);
}

#[test]
fn unit_ratio_surrogate_is_mean_advantage() {
    let mut rng = stream_rng(5, 0);
    let case = random_case(&mut rng);
    let samples: Vec<Sample<f64>> = case
        .samples
        .iter()
        .map(|s| {
            let mean = case.policy.mlp.forward(&s.observation).unwrap();
            Sample { old_log_prob: gaussian_log_prob(&s.action, &mean, &case.policy.log_std), ..s.clone() }
        })
        .collect();
    let batch: Vec<&Sample<f64>> = samples.iter().collect();
    let out = ppo_loss(&case.policy, &case.value, &batch, case.coeffs).unwrap();
    let mean_adv = samples.iter().map(|s| s.advantage).sum::<f64>() / samples.len() as f64;
    assert!((out.policy_loss + mean_adv).abs() < 1e-12);
}

#[test]
fn surrogate_never_exceeds_either_branch() {
    let mut rng = stream_rng(6, 0);
    for _ in 0..10_000 {
        let r: f64 = rng.random_range(0.0..3.0);
        let a: f64 = normal(&mut rng);
        let eps: f64 = rng.random_range(0.05..0.5);
        let (s, _) = clipped_surrogate(r, a, eps);
        let clipped = r.clamp(1.0 - eps, 1.0 + eps) * a;
        assert!(s <= r * a + 1e-15 && s <= clipped + 1e-15);
        assert!(s == r * a || s == clipped);
    }
    assert!((clipped_surrogate(2.0f64, 3.0, 0.3).0 - 3.9).abs() < 1e-12);
}
