//! Proximal Policy Optimization: rollout collection, GAE, the clipped
//! surrogate loss with hand-written gradients, and the training loop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{gaussian_entropy, gaussian_log_prob, sample_action, Activation, Mlp, PolicyNet};
use crate::rng::Rng;
use crate::Scalar;

/// An episodic environment with a continuous, box-bounded action.
pub trait Environment<S> {
    fn observation_dim(&self) -> usize;
    fn action_bounds(&self) -> Vec<(S, S)>;
    /// Number of decisions in one episode.
    fn episode_length(&self) -> usize;
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<S>>;
    /// `action` is already clipped into [`Environment::action_bounds`].
    fn step(&mut self, action: &[S], rng: &mut Rng) -> Result<Transition<S>>;
    /// Free-form tag for the current episode, e.g. the sampled function.
    fn episode_label(&self) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub observation: Vec<S>,
    pub reward: S,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub sgd_epochs: usize,
    /// Steps collected per iteration (T).
    pub horizon: usize,
    pub minibatch: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub optimizer: OptimizerKind,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub normalize_advantages: bool,
    /// Test hook: poison the policy weights at this iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_nan_at_iteration: Option<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            sgd_epochs: 200,
            horizon: 4000,
            minibatch: 128,
            clip: 0.3,
            gamma: 0.99,
            lambda: 1.0,
            learning_rate: 5e-5,
            value_coeff: 1.0,
            entropy_coeff: 0.0,
            grad_clip: Some(40.0),
            optimizer: OptimizerKind::Sgd,
            hidden_layers: vec![50, 50],
            activation: Activation::Relu,
            normalize_advantages: true,
            inject_nan_at_iteration: None,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.horizon == 0 || self.sgd_epochs == 0 || self.minibatch == 0 {
            return bad("horizon, sgd_epochs and minibatch must be positive");
        }
        if self.minibatch > self.horizon {
            return bad("minibatch must not exceed the horizon");
        }
        if !(self.clip > 0.0 && self.learning_rate > 0.0 && self.gamma > 0.0 && self.lambda > 0.0) {
            return bad("clip, learning_rate, gamma and lambda must be positive");
        }
        if self.gamma > 1.0 || self.lambda > 1.0 {
            return bad("gamma and lambda must not exceed 1");
        }
        if self.value_coeff < 0.0 || self.entropy_coeff < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }
}

/// Number of full iterations an episode budget pays for.
pub fn planned_iterations(episodes: usize, steps_per_episode: usize, horizon: usize) -> usize {
    episodes * steps_per_episode / horizon
}

/// One stored timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub observation: Vec<S>,
    /// Pre-clip action, the one the log-probability refers to.
    pub action: Vec<S>,
    pub log_prob: S,
    pub reward: S,
    pub value: S,
    /// True when this step ended its episode.
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer<S> {
    pub steps: Vec<Step<S>>,
    /// V(s_T) for the observation after the last step; only used when the
    /// last step did not end an episode.
    pub bootstrap_value: S,
}

impl<S: Scalar> RolloutBuffer<S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// GAE over a sequence; returns (advantages, value targets). The recursion
/// resets at every `done` and bootstraps from `bootstrap_value` after the
/// final step if it is not terminal.
pub fn compute_gae<S: Scalar>(
    rewards: &[S],
    values: &[S],
    dones: &[bool],
    bootstrap_value: S,
    gamma: S,
    lambda: S,
) -> (Vec<S>, Vec<S>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "length mismatch");
    let mut adv = vec![S::zero(); n];
    let mut next_value = bootstrap_value;
    let mut running = S::zero();
    for t in (0..n).rev() {
        if dones[t] {
            next_value = S::zero();
            running = S::zero();
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    let targets = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, targets)
}

/// Shift to zero mean and scale to unit (population) variance. A nearly
/// constant vector is only centred.
pub fn normalize_advantages<S: Scalar>(adv: &mut [S]) {
    if adv.is_empty() {
        return;
    }
    let n = S::from_usize_lossy(adv.len());
    let mean = adv.iter().copied().sum::<S>() / n;
    let var = adv.iter().map(|&a| (a - mean) * (a - mean)).sum::<S>() / n;
    let std = var.sqrt();
    let scale = if std > S::lit(1e-8) { std } else { S::one() };
    for a in adv.iter_mut() {
        *a = (*a - mean) / scale;
    }
}

/// Training sample after advantage estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<S> {
    pub observation: Vec<S>,
    pub action: Vec<S>,
    pub old_log_prob: S,
    pub advantage: S,
    pub value_target: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients<S> {
    pub clip: S,
    pub value: S,
    pub entropy: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<S> {
    pub total: S,
    /// Negated mean clipped surrogate.
    pub policy_loss: S,
    pub value_loss: S,
    pub entropy: S,
    /// Gradient w.r.t. the policy MLP parameters followed by log_std.
    pub policy_grad: Vec<S>,
    pub value_grad: Vec<S>,
}

/// min(r·Â, clip(r, 1−ε, 1+ε)·Â) and its derivative w.r.t. r.
pub fn clipped_surrogate<S: Scalar>(ratio: S, advantage: S, clip: S) -> (S, S) {
    let clipped = ratio.max(S::one() - clip).min(S::one() + clip);
    let a = ratio * advantage;
    let b = clipped * advantage;
    if a <= b {
        (a, advantage)
    } else {
        (b, S::zero())
    }
}

/// Loss = −mean(surrogate) + c_v·mean((V − target)²) − c_e·entropy, with
/// analytic gradients for both networks.
pub fn ppo_loss<S: Scalar>(
    policy: &PolicyNet<S>,
    value: &Mlp<S>,
    batch: &[&Sample<S>],
    coeffs: LossCoefficients<S>,
) -> Result<LossOutput<S>> {
    let n = S::from_usize_lossy(batch.len().max(1));
    let act_dim = policy.log_std.len();
    let np = policy.mlp.num_params();
    let mut policy_grad = vec![S::zero(); np + act_dim];
    let mut value_grad = vec![S::zero(); value.num_params()];
    let mut surrogate_sum = S::zero();
    let mut value_sum = S::zero();
    let inv_var: Vec<S> = policy.log_std.iter().map(|&ls| (-(ls + ls)).exp()).collect();

    for s in batch {
        let cache = policy.mlp.forward_cached(&s.observation)?;
        let mean = cache.output();
        let logp = gaussian_log_prob(&s.action, mean, &policy.log_std);
        let ratio = (logp - s.old_log_prob).exp();
        let (surr, d_surr_d_ratio) = clipped_surrogate(ratio, s.advantage, coeffs.clip);
        surrogate_sum += surr;
        // d(−surr/n)/d logp = −d_surr/d_ratio · ratio / n
        let d_logp = -d_surr_d_ratio * ratio / n;
        if d_logp != S::zero() {
            let mut d_mean = vec![S::zero(); act_dim];
            for k in 0..act_dim {
                let diff = s.action[k] - mean[k];
                d_mean[k] = d_logp * diff * inv_var[k];
                policy_grad[np + k] += d_logp * (diff * diff * inv_var[k] - S::one());
            }
            policy.mlp.backward(&cache, &d_mean, &mut policy_grad[..np]);
        }

        let vcache = value.forward_cached(&s.observation)?;
        let err = vcache.output()[0] - s.value_target;
        value_sum += err * err;
        let d_v = coeffs.value * (err + err) / n;
        value.backward(&vcache, &[d_v], &mut value_grad);
    }

    let entropy = gaussian_entropy(&policy.log_std);
    for g in &mut policy_grad[np..] {
        *g -= coeffs.entropy;
    }
    let policy_loss = -surrogate_sum / n;
    let value_loss = value_sum / n;
    let total = policy_loss + coeffs.value * value_loss - coeffs.entropy * entropy;
    Ok(LossOutput { total, policy_loss, value_loss, entropy, policy_grad, value_grad })
}

/// First-order optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer<S> {
    Sgd { lr: S },
    Adam { lr: S, m: Vec<S>, v: Vec<S>, t: i32 },
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, lr: S, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam { lr, m: vec![S::zero(); n], v: vec![S::zero(); n], t: 0 },
        }
    }

    pub fn step(&mut self, params: &mut [S], grad: &[S]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam { lr, m, v, t } => {
                let (b1, b2, eps) = (S::lit(0.9), S::lit(0.999), S::lit(1e-8));
                *t += 1;
                let c1 = S::one() - b1.powi(*t);
                let c2 = S::one() - b2.powi(*t);
                for i in 0..params.len() {
                    m[i] = b1 * m[i] + (S::one() - b1) * grad[i];
                    v[i] = b2 * v[i] + (S::one() - b2) * grad[i] * grad[i];
                    params[i] -= *lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Scales both gradients so their joint norm is at most `max_norm`.
/// Returns the norm before scaling.
pub fn clip_grad_norm<S: Scalar>(a: &mut [S], b: &mut [S], max_norm: S) -> S {
    let norm = a.iter().chain(b.iter()).map(|&g| g * g).sum::<S>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        a.iter_mut().chain(b.iter_mut()).for_each(|g| *g *= scale);
    }
    norm
}

/// Freshly initialised policy and value networks for an environment.
pub fn init_networks<S: Scalar>(
    obs_dim: usize,
    bounds: &[(S, S)],
    config: &PpoConfig,
    rng: &mut Rng,
) -> (PolicyNet<S>, Mlp<S>) {
    let mut sizes = vec![obs_dim];
    sizes.extend(&config.hidden_layers);
    let mut vsizes = sizes.clone();
    sizes.push(bounds.len());
    vsizes.push(1);
    let mut mlp = Mlp::init(sizes, config.activation, S::one(), S::lit(0.01), rng);
    let mid: Vec<S> = bounds.iter().map(|&(lo, hi)| (lo + hi) / S::lit(2.0)).collect();
    mlp.set_output_bias(&mid);
    let value = Mlp::init(vsizes, config.activation, S::one(), S::lit(0.01), rng);
    (PolicyNet::new(mlp), value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub episodes_done: usize,
    /// Mean return of the episodes finished during this iteration (NaN if none).
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub label: Option<String>,
    pub episode_return: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub policy: PolicyNet<S>,
    pub value: Mlp<S>,
    pub log: Vec<IterationStats>,
    pub episodes: Vec<EpisodeRecord>,
}

/// Live rollout state carried across iterations: an episode may straddle
/// two buffers.
struct Collector<S> {
    observation: Vec<S>,
    episode_return: S,
    episodes_done: usize,
    label: Option<String>,
}

fn collect<S: Scalar, E: Environment<S>>(
    env: &mut E,
    policy: &PolicyNet<S>,
    value: &Mlp<S>,
    bounds: &[(S, S)],
    horizon: usize,
    state: &mut Collector<S>,
    episodes: &mut Vec<EpisodeRecord>,
    rng: &mut Rng,
) -> Result<(RolloutBuffer<S>, Vec<f64>)> {
    let mut steps = Vec::with_capacity(horizon);
    let mut finished = Vec::new();
    for _ in 0..horizon {
        let obs = std::mem::take(&mut state.observation);
        let (mean, log_std) = policy.forward(&obs)?;
        let v = value.forward(&obs)?[0];
        let a = sample_action(&mean, &log_std, bounds, rng, true);
        let tr = env.step(&a.action, rng)?;
        state.episode_return += tr.reward;
        steps.push(Step {
            observation: obs,
            action: a.raw,
            log_prob: a.log_prob,
            reward: tr.reward,
            value: v,
            done: tr.done,
        });
        if tr.done {
            let ret = state.episode_return.to_f64_lossy();
            finished.push(ret);
            episodes.push(EpisodeRecord {
                episode: state.episodes_done,
                label: state.label.take(),
                episode_return: ret,
            });
            state.episodes_done += 1;
            state.episode_return = S::zero();
            state.observation = env.reset(rng)?;
            state.label = env.episode_label();
        } else {
            state.observation = tr.observation;
        }
    }
    let bootstrap_value = value.forward(&state.observation)?[0];
    Ok((RolloutBuffer { steps, bootstrap_value }, finished))
}

/// Full training run. `on_iteration` sees every iteration's statistics and
/// the current networks (e.g. for logging and periodic checkpoints); an
/// error from it aborts training.
pub fn train<S, E, F>(
    env: &mut E,
    config: &PpoConfig,
    episodes_budget: usize,
    rng: &mut Rng,
    mut on_iteration: F,
) -> Result<TrainOutcome<S>>
where
    S: Scalar,
    E: Environment<S>,
    F: FnMut(&IterationStats, &PolicyNet<S>, &Mlp<S>) -> Result<()>,
{
    config.validate()?;
    let iterations = planned_iterations(episodes_budget, env.episode_length(), config.horizon);
    if iterations == 0 {
        return Err(Error::InvalidArgument(format!(
            "{episodes_budget} episodes of {} steps do not fill one horizon of {}",
            env.episode_length(),
            config.horizon
        )));
    }
    let bounds = env.action_bounds();
    let (mut policy, mut value) = init_networks::<S>(env.observation_dim(), &bounds, config, rng);
    let np = policy.num_params();
    let mut policy_opt = Optimizer::new(config.optimizer, S::lit(config.learning_rate), np);
    let mut value_opt = Optimizer::new(config.optimizer, S::lit(config.learning_rate), value.num_params());
    let coeffs = LossCoefficients {
        clip: S::lit(config.clip),
        value: S::lit(config.value_coeff),
        entropy: S::lit(config.entropy_coeff),
    };
    let grad_clip = config.grad_clip.map(S::lit);

    let mut state = Collector {
        observation: env.reset(rng)?,
        episode_return: S::zero(),
        episodes_done: 0,
        label: env.episode_label(),
    };
    let mut episodes = Vec::new();
    let mut log = Vec::with_capacity(iterations);
    let mut flat = vec![S::zero(); np];

    for iteration in 0..iterations {
        let (buffer, finished) =
            collect(env, &policy, &value, &bounds, config.horizon, &mut state, &mut episodes, rng)?;
        let rewards: Vec<S> = buffer.steps.iter().map(|s| s.reward).collect();
        let values: Vec<S> = buffer.steps.iter().map(|s| s.value).collect();
        let dones: Vec<bool> = buffer.steps.iter().map(|s| s.done).collect();
        let (mut adv, targets) = compute_gae(
            &rewards,
            &values,
            &dones,
            buffer.bootstrap_value,
            S::lit(config.gamma),
            S::lit(config.lambda),
        );
        if config.normalize_advantages {
            normalize_advantages(&mut adv);
        }
        let samples: Vec<Sample<S>> = buffer
            .steps
            .into_iter()
            .zip(adv)
            .zip(targets)
            .map(|((s, a), t)| Sample {
                observation: s.observation,
                action: s.action,
                old_log_prob: s.log_prob,
                advantage: a,
                value_target: t,
            })
            .collect();

        if config.inject_nan_at_iteration == Some(iteration) {
            policy.mlp.params_mut()[0] = S::nan();
        }

        let mut order: Vec<usize> = (0..samples.len()).collect();
        let (mut pl, mut vl, mut batches) = (0.0, 0.0, 0usize);
        for _ in 0..config.sgd_epochs {
            order.shuffle(rng);
            for chunk in order.chunks(config.minibatch) {
                let batch: Vec<&Sample<S>> = chunk.iter().map(|&i| &samples[i]).collect();
                let mut out = ppo_loss(&policy, &value, &batch, coeffs)?;
                if !out.total.is_finite() {
                    return Err(Error::Unstable { iteration, reason: "non-finite loss".into() });
                }
                if let Some(c) = grad_clip {
                    clip_grad_norm(&mut out.policy_grad, &mut out.value_grad, c);
                }
                flat[..np - policy.log_std.len()].copy_from_slice(policy.mlp.params());
                flat[np - policy.log_std.len()..].copy_from_slice(&policy.log_std);
                policy_opt.step(&mut flat, &out.policy_grad);
                let split = np - policy.log_std.len();
                policy.mlp.params_mut().copy_from_slice(&flat[..split]);
                policy.log_std.copy_from_slice(&flat[split..]);
                value_opt.step(value.params_mut(), &out.value_grad);
                pl += out.policy_loss.to_f64_lossy();
                vl += out.value_loss.to_f64_lossy();
                batches += 1;
            }
        }
        if !policy.is_finite() || !value.is_finite() {
            return Err(Error::Unstable { iteration, reason: "non-finite weights".into() });
        }

        let mean_return = if finished.is_empty() {
            f64::NAN
        } else {
            finished.iter().sum::<f64>() / finished.len() as f64
        };
        let stats = IterationStats {
            iteration,
            episodes_done: state.episodes_done,
            mean_return,
            policy_loss: pl / batches as f64,
            value_loss: vl / batches as f64,
            entropy: gaussian_entropy(&policy.log_std).to_f64_lossy(),
        };
        log::info!(
            "iteration {iteration}: episodes {} mean return {:.6}",
            stats.episodes_done,
            stats.mean_return
        );
        on_iteration(&stats, &policy, &value)?;
        log.push(stats);
    }
    Ok(TrainOutcome { policy, value, log, episodes })
}

/// One-step environment with a constant observation and reward
/// `1 − |a − target|`; its optimum is known in closed form.
#[derive(Debug, Clone)]
pub struct BanditEnv<S> {
    pub target: S,
    pub bounds: (S, S),
}

impl<S: Scalar> BanditEnv<S> {
    pub fn new(target: S, bounds: (S, S)) -> Self {
        Self { target, bounds }
    }
}

impl<S: Scalar> Environment<S> for BanditEnv<S> {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_bounds(&self) -> Vec<(S, S)> {
        vec![self.bounds]
    }

    fn episode_length(&self) -> usize {
        1
    }

    fn reset(&mut self, _rng: &mut Rng) -> Result<Vec<S>> {
        Ok(vec![S::one()])
    }

    fn step(&mut self, action: &[S], _rng: &mut Rng) -> Result<Transition<S>> {
        Ok(Transition {
            observation: vec![S::one()],
            reward: S::one() - (action[0] - self.target).abs(),
            done: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn gae_hand_cases() {
        let (adv, ret) = compute_gae(&[1.0, 2.0, 3.0], &[0.0; 3], &[false, false, true], 9.0, 1.0, 1.0);
        assert_eq!(adv, vec![6.0, 5.0, 3.0]);
        assert_eq!(ret, adv);
        let (adv, _) = compute_gae(&[2.0], &[0.5], &[true], 100.0, 0.99, 0.95);
        assert_eq!(adv, vec![1.5]);
        let (adv, _) = compute_gae(&[0.0; 4], &[0.0; 4], &[false, true, false, true], 0.0, 0.9, 0.9);
        assert_eq!(adv, vec![0.0; 4]);
    }

    #[test]
    fn gae_resets_at_episode_boundary() {
        let (adv, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[true, true], 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![1.0, 1.0]);
    }

    #[test]
    fn gae_bootstraps_unfinished_tail() {
        let (adv, _) = compute_gae(&[1.0], &[0.0], &[false], 4.0, 0.5, 1.0);
        assert_eq!(adv, vec![3.0]);
    }

    #[test]
    fn surrogate_branches() {
        assert_eq!(clipped_surrogate(1.0, 2.5, 0.3).0, 2.5);
        assert!((clipped_surrogate(2.0f64, 1.0, 0.3).0 - 1.3).abs() < 1e-15);
        assert_eq!(clipped_surrogate(2.0, 1.0, 0.3).1, 0.0);
        // Negative advantage: the unclipped (more pessimistic) branch wins.
        assert_eq!(clipped_surrogate(2.0, -1.0, 0.3), (-2.0, -1.0));
    }

    #[test]
    fn normalization_moments() {
        let mut a = vec![1.0, 2.0, 3.0, 10.0];
        normalize_advantages(&mut a);
        let m: f64 = a.iter().sum::<f64>() / 4.0;
        let v: f64 = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        let mut c = vec![2.0; 5];
        normalize_advantages(&mut c);
        assert_eq!(c, vec![0.0; 5]);
    }

    #[test]
    fn planned_iteration_arithmetic() {
        assert_eq!(planned_iterations(5000, 50, 4000), 62);
        assert_eq!(planned_iterations(100, 50, 4000), 1);
        assert_eq!(planned_iterations(10, 50, 4000), 0);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        let c = PpoConfig { minibatch: 5000, ..Default::default() };
        assert!(c.validate().is_err());
        let c = PpoConfig { learning_rate: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 2);
        let mut p = vec![0.0f64, 0.0];
        opt.step(&mut p, &[1.0, -3.0]);
        assert!((p[0] + 0.1).abs() < 1e-6 && (p[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn grad_norm_clip() {
        let mut a = vec![3.0f64];
        let mut b = vec![4.0f64];
        assert_eq!(clip_grad_norm(&mut a, &mut b, 1.0), 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn nan_injection_reports_instability() {
        let cfg = PpoConfig {
            horizon: 16,
            minibatch: 8,
            sgd_epochs: 1,
            hidden_layers: vec![4],
            inject_nan_at_iteration: Some(1),
            ..Default::default()
        };
        let mut env = BanditEnv::new(0.7f64, (0.0, 1.0));
        let mut rng = stream_rng(0, 0);
        let mut seen = 0;
        let err = train(&mut env, &cfg, 64, &mut rng, |_, _, _| {
            seen += 1;
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::Unstable { iteration: 1, .. }));
        assert_eq!(seen, 1);
    }
}
