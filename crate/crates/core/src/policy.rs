//! Fully-connected policy and value networks, the Gaussian action head and the
//! four ways an action is turned into EA parameters.

use serde::{Deserialize, Serialize};

use crate::de::{DeParams, CR_BOUNDS, F_BOUNDS};
use crate::cmaes::SIGMA_BOUNDS;
use crate::error::{Error, Result};
use crate::observe::ObservationSpec;
use crate::rng::{normal, uniform};
use crate::scalar::clamp;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => x.max(S::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative<S: Scalar>(self, z: S, a: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => S::one() - a * a,
        }
    }
}

/// Multilayer perceptron with a linear output layer. Parameters live in one
/// flat vector: for each layer, the `out × in` row-major weights then the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<S>,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache<S> {
    /// `activations[0]` is the input; `activations[l+1]` the output of layer l.
    activations: Vec<Vec<S>>,
    pre_activations: Vec<Vec<S>>,
}

impl<S> ForwardCache<S> {
    pub fn output(&self) -> &[S] {
        self.activations.last().expect("non-empty cache")
    }
}

impl<S: Scalar> Mlp<S> {
    /// Zero-initialised network with layer sizes `[in, h1, …, out]`.
    pub fn zeros(sizes: Vec<usize>, activation: Activation) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self { sizes, activation, params: vec![S::zero(); n] }
    }

    /// Column-normalised Gaussian init: every unit's incoming weights have
    /// norm `hidden_std` (hidden layers) or `output_std` (output layer).
    pub fn init<R: rand::Rng + ?Sized>(
        sizes: Vec<usize>,
        activation: Activation,
        hidden_std: S,
        output_std: S,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(sizes, activation);
        let layers = net.sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let std = if l + 1 == layers { output_std } else { hidden_std };
            let off = net.layer_offset(l);
            for o in 0..fan_out {
                let row: Vec<S> = (0..fan_in).map(|_| normal(rng)).collect();
                let n = row.iter().map(|&v| v * v).sum::<S>().sqrt();
                for (i, v) in row.into_iter().enumerate() {
                    net.params[off + o * fan_in + i] = std * v / n;
                }
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..=layer]
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Weights (row per output unit) and biases of one layer.
    pub fn layer(&self, layer: usize) -> (Vec<Vec<S>>, Vec<S>) {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.layer_offset(layer);
        let w = (0..fan_out)
            .map(|o| self.params[off + o * fan_in..off + (o + 1) * fan_in].to_vec())
            .collect();
        let b = self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out].to_vec();
        (w, b)
    }

    pub fn set_output_bias(&mut self, bias: &[S]) {
        let l = self.sizes.len() - 2;
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        assert_eq!(bias.len(), fan_out);
        let off = self.layer_offset(l) + fan_in * fan_out;
        self.params[off..off + fan_out].copy_from_slice(bias);
    }

    pub fn forward_cached(&self, input: &[S]) -> Result<ForwardCache<S>> {
        if input.len() != self.in_dim() {
            return Err(Error::DimensionMismatch { expected: self.in_dim(), got: input.len() });
        }
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre_activations = Vec::with_capacity(layers);
        activations.push(input.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let x = &activations[l];
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let z: Vec<S> = (0..fan_out)
                .map(|o| {
                    w[o * fan_in..(o + 1) * fan_in]
                        .iter()
                        .zip(x)
                        .fold(b[o], |acc, (&wi, &xi)| acc + wi * xi)
                })
                .collect();
            let a = if l + 1 == layers {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre_activations.push(z);
            activations.push(a);
            off += fan_in * fan_out + fan_out;
        }
        Ok(ForwardCache { activations, pre_activations })
    }

    pub fn forward(&self, input: &[S]) -> Result<Vec<S>> {
        Ok(self.forward_cached(input)?.activations.pop().expect("output layer"))
    }

    /// Adds dL/dθ to `grad` given dL/d(output).
    pub fn backward(&self, cache: &ForwardCache<S>, d_output: &[S], grad: &mut [S]) {
        assert_eq!(grad.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut delta = d_output.to_vec();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 != layers {
                for (o, d) in delta.iter_mut().enumerate() {
                    *d *= self
                        .activation
                        .derivative(cache.pre_activations[l][o], cache.activations[l + 1][o]);
                }
            }
            let off = self.layer_offset(l);
            let x = &cache.activations[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == S::zero() {
                    continue;
                }
                let row = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                grad[off + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + fan_in * fan_out];
                let mut prev = vec![S::zero(); fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    for (p, &wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *p += d * wi;
                    }
                }
                delta = prev;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }
}

/// Policy network plus state-independent log standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet<S> {
    pub mlp: Mlp<S>,
    pub log_std: Vec<S>,
}

impl<S: Scalar> PolicyNet<S> {
    pub fn new(mlp: Mlp<S>) -> Self {
        let out = mlp.out_dim();
        Self { mlp, log_std: vec![S::zero(); out] }
    }

    pub fn forward(&self, obs: &[S]) -> Result<(Vec<S>, Vec<S>)> {
        Ok((self.mlp.forward(obs)?, self.log_std.clone()))
    }

    pub fn num_params(&self) -> usize {
        self.mlp.num_params() + self.log_std.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mlp.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}

/// log N(raw; mean, exp(log_std)²) summed over dimensions.
pub fn gaussian_log_prob<S: Scalar>(raw: &[S], mean: &[S], log_std: &[S]) -> S {
    let half_ln_2pi = S::lit(0.5) * (S::TAU()).ln();
    raw.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&a, &m), &ls)| {
            let u = (a - m) / ls.exp();
            -S::lit(0.5) * u * u - ls - half_ln_2pi
        })
        .sum()
}

/// Entropy of the diagonal Gaussian.
pub fn gaussian_entropy<S: Scalar>(log_std: &[S]) -> S {
    let c = S::lit(0.5) * (S::TAU() * S::E()).ln();
    log_std.iter().map(|&ls| ls + c).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction<S> {
    /// Pre-clip draw (the mean in deterministic mode).
    pub raw: Vec<S>,
    /// Draw clipped into the action bounds.
    pub action: Vec<S>,
    /// Log-probability of `raw` under the policy.
    pub log_prob: S,
}

/// Gaussian draw around `mean` (or the mean itself when `stochastic` is
/// false), clipped into `bounds`.
pub fn sample_action<S: Scalar, R: rand::Rng + ?Sized>(
    mean: &[S],
    log_std: &[S],
    bounds: &[(S, S)],
    rng: &mut R,
    stochastic: bool,
) -> SampledAction<S> {
    let raw: Vec<S> = if stochastic {
        mean.iter()
            .zip(log_std)
            .map(|(&m, &ls)| {
                let std = ls.exp();
                let eps: S = normal(rng);
                if std == S::zero() {
                    m
                } else {
                    m + std * eps
                }
            })
            .collect()
    } else {
        mean.to_vec()
    };
    let action = raw
        .iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| clamp(v, lo, hi))
        .collect();
    let log_prob = gaussian_log_prob(&raw, mean, log_std);
    SampledAction { raw, action, log_prob }
}

/// The four action parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// CMA-ES step-size σ ∈ [1e−10, 3].
    CmaSigma,
    /// (F, CR) applied to every individual.
    DeDirect,
    /// (μ_F, σ_F, μ_CR, σ_CR); per-individual normal draws.
    DeNormal,
    /// (F_min, F_max, CR_min, CR_max); per-individual uniform draws.
    DeUniform,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::CmaSigma,
        ActionKind::DeDirect,
        ActionKind::DeNormal,
        ActionKind::DeUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::CmaSigma => "cma_sigma",
            ActionKind::DeDirect => "de_direct",
            ActionKind::DeNormal => "de_normal",
            ActionKind::DeUniform => "de_uniform",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ActionKind::CmaSigma => 1,
            ActionKind::DeDirect => 2,
            ActionKind::DeNormal | ActionKind::DeUniform => 4,
        }
    }

    pub fn is_de(self) -> bool {
        self != ActionKind::CmaSigma
    }

    pub fn bounds<S: Scalar>(self) -> Vec<(S, S)> {
        let f = (S::lit(F_BOUNDS.0), S::lit(F_BOUNDS.1));
        let cr = (S::lit(CR_BOUNDS.0), S::lit(CR_BOUNDS.1));
        let unit = (S::zero(), S::one());
        match self {
            ActionKind::CmaSigma => vec![(S::lit(SIGMA_BOUNDS.0), S::lit(SIGMA_BOUNDS.1))],
            ActionKind::DeDirect => vec![f, cr],
            ActionKind::DeNormal => vec![f, unit, cr, unit],
            ActionKind::DeUniform => vec![f, f, cr, cr],
        }
    }

    /// Mid-range action, used before the first decision of a run.
    pub fn neutral<S: Scalar>(self) -> Vec<S> {
        self.bounds::<S>()
            .into_iter()
            .map(|(lo, hi)| (lo + hi) / S::lit(2.0))
            .collect()
    }

    pub fn normalize<S: Scalar>(self, action: &[S]) -> Vec<S> {
        normalize_action(action, &self.bounds())
    }

    /// Turns an in-bounds action into engine parameters. `np` is the DE
    /// population size (ignored for σ).
    pub fn decode<S: Scalar, R: rand::Rng + ?Sized>(
        self,
        action: &[S],
        np: usize,
        rng: &mut R,
    ) -> EngineParams<S> {
        assert_eq!(action.len(), self.dim(), "action dimension");
        let b = self.bounds::<S>();
        let a: Vec<S> = action.iter().zip(&b).map(|(&v, &(lo, hi))| clamp(v, lo, hi)).collect();
        match self {
            ActionKind::CmaSigma => EngineParams::Sigma(a[0]),
            _ => EngineParams::De(decode_de_params(self, &a, np, rng)),
        }
    }
}

impl std::str::FromStr for ActionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown action space `{s}`")))
    }
}

/// (a − lo) / (hi − lo) per component.
pub fn normalize_action<S: Scalar>(action: &[S], bounds: &[(S, S)]) -> Vec<S> {
    action
        .iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| (v - lo) / (hi - lo))
        .collect()
}

/// Parameters handed to an engine for one generation.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineParams<S> {
    Sigma(S),
    De(DeParams<S>),
}

/// Per-individual (F, CR) from a DE action.
pub fn decode_de_params<S: Scalar, R: rand::Rng + ?Sized>(
    kind: ActionKind,
    action: &[S],
    np: usize,
    rng: &mut R,
) -> DeParams<S> {
    let (flo, fhi) = (S::lit(F_BOUNDS.0), S::lit(F_BOUNDS.1));
    let (clo, chi) = (S::lit(CR_BOUNDS.0), S::lit(CR_BOUNDS.1));
    match kind {
        ActionKind::DeDirect => DeParams::broadcast(action[0], action[1], np),
        ActionKind::DeNormal => {
            let pairs: Vec<(S, S)> = (0..np)
                .map(|_| {
                    let f = action[0] + action[1] * normal::<S, _>(rng);
                    let cr = action[2] + action[3] * normal::<S, _>(rng);
                    (clamp(f, flo, fhi), clamp(cr, clo, chi))
                })
                .collect();
            DeParams::from_pairs(&pairs)
        }
        ActionKind::DeUniform => {
            let (f_lo, f_hi) = (action[0].min(action[1]), action[0].max(action[1]));
            let (c_lo, c_hi) = (action[2].min(action[3]), action[2].max(action[3]));
            let pairs: Vec<(S, S)> = (0..np)
                .map(|_| {
                    let f = uniform(rng, f_lo, f_hi);
                    let cr = uniform(rng, c_lo, c_hi);
                    (clamp(f, flo, fhi), clamp(cr, clo, chi))
                })
                .collect();
            DeParams::from_pairs(&pairs)
        }
        ActionKind::CmaSigma => panic!("cma_sigma is not a DE action space"),
    }
}

/// Serialized layer: one weight row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord<S> {
    pub weights: Vec<Vec<S>>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord<S> {
    pub layers: Vec<LayerRecord<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_std: Option<Vec<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

/// Checkpoint document written by training and read for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Checkpoint<S> {
    pub format: String,
    pub architecture: Architecture,
    pub action: ActionKind,
    pub observation: ObservationSpec,
    pub policy: NetworkRecord<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<NetworkRecord<S>>,
}

pub const CHECKPOINT_FORMAT: &str = "rlmeta-policy-v1";

fn record_of<S: Scalar>(mlp: &Mlp<S>, log_std: Option<&[S]>) -> NetworkRecord<S> {
    let layers = (0..mlp.sizes().len() - 1)
        .map(|l| {
            let (weights, bias) = mlp.layer(l);
            LayerRecord { weights, bias }
        })
        .collect();
    NetworkRecord { layers, log_std: log_std.map(<[S]>::to_vec) }
}

fn mlp_from_record<S: Scalar>(
    rec: &NetworkRecord<S>,
    sizes: &[usize],
    activation: Activation,
) -> Result<Mlp<S>> {
    let bad = |msg: String| Error::InvalidArgument(format!("malformed checkpoint: {msg}"));
    if rec.layers.len() + 1 != sizes.len() {
        return Err(bad(format!(
            "{} layers stored for {} declared sizes",
            rec.layers.len(),
            sizes.len()
        )));
    }
    let mut mlp = Mlp::zeros(sizes.to_vec(), activation);
    let mut off = 0;
    for (l, layer) in rec.layers.iter().enumerate() {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        if layer.weights.len() != fan_out
            || layer.weights.iter().any(|r| r.len() != fan_in)
            || layer.bias.len() != fan_out
        {
            return Err(bad(format!("layer {l} does not match {fan_in}→{fan_out}")));
        }
        for row in &layer.weights {
            mlp.params[off..off + fan_in].copy_from_slice(row);
            off += fan_in;
        }
        mlp.params[off..off + fan_out].copy_from_slice(&layer.bias);
        off += fan_out;
    }
    if !mlp.is_finite() {
        return Err(bad("non-finite weights".into()));
    }
    Ok(mlp)
}

impl<S: Scalar> Checkpoint<S> {
    pub fn new(
        policy: &PolicyNet<S>,
        value: Option<&Mlp<S>>,
        action: ActionKind,
        observation: ObservationSpec,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            architecture: Architecture {
                layer_sizes: policy.mlp.sizes().to_vec(),
                activation: policy.mlp.activation(),
            },
            action,
            observation,
            policy: record_of(&policy.mlp, Some(&policy.log_std)),
            value: value.map(|v| record_of(v, None)),
        }
    }

    /// Rebuilds the policy, checking every shape against the declared
    /// architecture, action space and observation spec.
    pub fn policy_net(&self) -> Result<PolicyNet<S>> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!("unsupported checkpoint format `{}`", self.format)));
        }
        let sizes = &self.architecture.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument("checkpoint declares fewer than two layers".into()));
        }
        let want_in = self.observation.len(self.action.dim());
        if sizes[0] != want_in || *sizes.last().unwrap() != self.action.dim() {
            return Err(Error::InvalidArgument(format!(
                "architecture {:?} does not fit observation length {want_in} and action `{}`",
                sizes,
                self.action.name()
            )));
        }
        let mlp = mlp_from_record(&self.policy, sizes, self.architecture.activation)?;
        let log_std = self.policy.log_std.clone().unwrap_or_else(|| vec![S::zero(); self.action.dim()]);
        if log_std.len() != self.action.dim() || log_std.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("malformed checkpoint: bad log_std".into()));
        }
        Ok(PolicyNet { mlp, log_std })
    }

    pub fn value_net(&self) -> Result<Option<Mlp<S>>> {
        let Some(rec) = &self.value else { return Ok(None) };
        let mut sizes: Vec<usize> = self.architecture.layer_sizes.clone();
        *sizes.last_mut().unwrap() = 1;
        mlp_from_record(rec, &sizes, self.architecture.activation).map(Some)
    }
}
