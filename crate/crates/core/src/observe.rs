//! State metrics fed to the policy and the per-generation reward.
//!
//! All history vectors are newest-first and zero-padded for generations that
//! do not exist yet.

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Added to every fitness-normalization denominator.
pub const DENOM_EPS: f64 = 1e-5;

/// Statistics recorded for one generation of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord<S> {
    /// Best fitness in the population, f*_k.
    pub best_fitness: S,
    /// Genotype of that best individual, X*_k.
    pub best_genotype: Vec<S>,
    pub max_fitness: S,
    pub min_fitness: S,
    /// Per-dimension population maximum and minimum.
    pub genotype_max: Vec<S>,
    pub genotype_min: Vec<S>,
    /// Parameters applied to produce this generation (empty for an
    /// uncontrolled initialization).
    pub action: Vec<S>,
}

impl<S: Scalar> GenerationRecord<S> {
    /// Summarizes a population of genotypes and their fitnesses.
    pub fn from_population(genotypes: &[Vec<S>], fitnesses: &[S], action: Vec<S>) -> Self {
        assert!(!genotypes.is_empty() && genotypes.len() == fitnesses.len());
        let d = genotypes[0].len();
        let mut best = 0;
        let mut max = fitnesses[0];
        for (i, &f) in fitnesses.iter().enumerate() {
            if f < fitnesses[best] {
                best = i;
            }
            if f > max {
                max = f;
            }
        }
        let mut gmax = genotypes[0].clone();
        let mut gmin = genotypes[0].clone();
        for g in &genotypes[1..] {
            for j in 0..d {
                gmax[j] = gmax[j].max(g[j]);
                gmin[j] = gmin[j].min(g[j]);
            }
        }
        Self {
            best_fitness: fitnesses[best],
            best_genotype: genotypes[best].clone(),
            max_fitness: max,
            min_fitness: fitnesses[best],
            genotype_max: gmax,
            genotype_min: gmin,
            action,
        }
    }
}

/// Per-generation history of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace<S> {
    pub generations: Vec<GenerationRecord<S>>,
}

impl<S: Scalar> RunTrace<S> {
    pub fn new() -> Self {
        Self { generations: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    pub fn push(&mut self, record: GenerationRecord<S>) {
        self.generations.push(record);
    }

    pub fn best_fitness_curve(&self) -> Vec<S> {
        self.generations.iter().map(|g| g.best_fitness).collect()
    }

    /// Record `m` generations before the newest one, if it exists.
    fn back(&self, m: usize) -> Option<(usize, &GenerationRecord<S>)> {
        let k = self.generations.len().checked_sub(1 + m)?;
        Some((k, &self.generations[k]))
    }
}

/// Which optional blocks the observation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    /// History length g.
    pub history_length: usize,
    #[serde(default)]
    pub include_intra_df: bool,
    #[serde(default)]
    pub include_inter_dx: bool,
    #[serde(default)]
    pub include_intra_dx: bool,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self {
            history_length: 40,
            include_intra_df: false,
            include_inter_dx: false,
            include_intra_dx: false,
        }
    }
}

impl ObservationSpec {
    /// Flattened length for an action of dimension `action_dim`.
    pub fn len(&self, action_dim: usize) -> usize {
        let g = self.history_length;
        g + action_dim
            + if self.include_intra_df { g } else { 0 }
            + if self.include_inter_dx { 2 * g } else { 0 }
            + if self.include_intra_dx { 2 * g } else { 0 }
    }
}

/// (f*_k − f*_{k−1}) / (|f*_k − f*_{k−1}| + |f*_{k−1}| + 1e−5).
pub fn inter_delta_f_value<S: Scalar>(current: S, previous: S) -> S {
    let diff = current - previous;
    below_one(diff / (diff.abs() + previous.abs() + S::lit(DENOM_EPS)))
}

/// Once |numerator| dwarfs the other denominator terms the quotient rounds
/// to ±1; pull it back inside the open interval.
fn below_one<S: Scalar>(r: S) -> S {
    if r.abs() >= S::one() {
        r.signum() * (S::one() - S::epsilon())
    } else {
        r
    }
}

/// |f^max − f^min| / (|f^max − f^min| + |f*| + 1e−5).
pub fn intra_delta_f_value<S: Scalar>(max: S, min: S, best: S) -> S {
    let spread = (max - min).abs();
    below_one(spread / (spread + best.abs() + S::lit(DENOM_EPS)))
}

/// Inter-generational Δf history of length `g`.
pub fn inter_delta_f<S: Scalar>(trace: &RunTrace<S>, g: usize) -> Vec<S> {
    (0..g)
        .map(|m| match trace.back(m) {
            Some((k, rec)) if k >= 1 => {
                inter_delta_f_value(rec.best_fitness, trace.generations[k - 1].best_fitness)
            }
            _ => S::zero(),
        })
        .collect()
}

/// Intra-generational Δf history of length `g`.
pub fn intra_delta_f<S: Scalar>(trace: &RunTrace<S>, g: usize) -> Vec<S> {
    (0..g)
        .map(|m| match trace.back(m) {
            Some((_, rec)) => intra_delta_f_value(rec.max_fitness, rec.min_fitness, rec.best_fitness),
            None => S::zero(),
        })
        .collect()
}

fn min_max<S: Scalar>(v: impl Iterator<Item = S>) -> (S, S) {
    v.fold((S::infinity(), S::neg_infinity()), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// (min, max) of the best-genotype displacement divided by the bound widths.
pub fn inter_delta_x_pair<S: Scalar>(current: &[S], previous: &[S], widths: &[S]) -> (S, S) {
    min_max(
        current
            .iter()
            .zip(previous)
            .zip(widths)
            .map(|((&c, &p), &w)| (c - p) / w),
    )
}

/// (min, max) of per-dimension population spread divided by the bound widths.
pub fn intra_delta_x_pair<S: Scalar>(gmax: &[S], gmin: &[S], widths: &[S]) -> (S, S) {
    min_max(
        gmax.iter()
            .zip(gmin)
            .zip(widths)
            .map(|((&hi, &lo), &w)| (hi - lo).abs() / w),
    )
}

/// Inter-generational ΔX history: `g` (min, max) pairs, flattened.
pub fn inter_delta_x<S: Scalar>(trace: &RunTrace<S>, g: usize, widths: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(2 * g);
    for m in 0..g {
        let (lo, hi) = match trace.back(m) {
            Some((k, rec)) if k >= 1 => inter_delta_x_pair(
                &rec.best_genotype,
                &trace.generations[k - 1].best_genotype,
                widths,
            ),
            _ => (S::zero(), S::zero()),
        };
        out.push(lo);
        out.push(hi);
    }
    out
}

/// Intra-generational ΔX history: `g` (min, max) pairs, flattened.
pub fn intra_delta_x<S: Scalar>(trace: &RunTrace<S>, g: usize, widths: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(2 * g);
    for m in 0..g {
        let (lo, hi) = match trace.back(m) {
            Some((_, rec)) => intra_delta_x_pair(&rec.genotype_max, &rec.genotype_min, widths),
            None => (S::zero(), S::zero()),
        };
        out.push(lo);
        out.push(hi);
    }
    out
}

/// `[inter Δf | previous action | intra Δf? | inter ΔX? | intra ΔX?]`.
///
/// `previous_action` is expected already normalized to [0, 1] per component.
pub fn build_observation<S: Scalar>(
    trace: &RunTrace<S>,
    spec: &ObservationSpec,
    previous_action: &[S],
    bound_widths: &[S],
) -> Vec<S> {
    let g = spec.history_length;
    let mut obs = Vec::with_capacity(spec.len(previous_action.len()));
    obs.extend(inter_delta_f(trace, g));
    obs.extend_from_slice(previous_action);
    if spec.include_intra_df {
        obs.extend(intra_delta_f(trace, g));
    }
    if spec.include_inter_dx {
        obs.extend(inter_delta_x(trace, g, bound_widths));
    }
    if spec.include_intra_dx {
        obs.extend(intra_delta_x(trace, g, bound_widths));
    }
    obs
}

/// Reward for the newest generation: the negated inter-generational Δf, so
/// that an improvement under minimization is rewarded positively. Zero when
/// there is no previous generation.
pub fn reward<S: Scalar>(trace: &RunTrace<S>) -> S {
    let n = trace.len();
    if n < 2 {
        return S::zero();
    }
    -inter_delta_f_value(
        trace.generations[n - 1].best_fitness,
        trace.generations[n - 2].best_fitness,
    )
}
