//! CMA-ES with the step-size supplied from outside every generation.
//!
//! Mean and covariance follow the standard (μ/μ_w, λ) updates with Hansen's
//! default weights and learning rates. The engine never adapts σ itself: the
//! caller passes the σ to sample with, whether it comes from a learned policy,
//! from [`crate::baselines::CsaState`] or from a constant.

use log::warn;

use crate::benchfn::Objective;
use crate::error::{Error, Result};
use crate::linalg::{compose, identity, mat_vec, symmetric_eigen, Matrix};
use crate::rng::normal;
use crate::scalar::clamp;
use crate::Scalar;

/// Range of σ a policy may request.
pub const SIGMA_BOUNDS: (f64, f64) = (1e-10, 3.0);

/// Floor applied to covariance eigenvalues when the matrix loses definiteness.
pub const EIGEN_FLOOR: f64 = 1e-20;

/// Strategy constants derived from (d, λ).
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams<S> {
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<S>,
    pub mu_eff: S,
    pub c_c: S,
    pub c_1: S,
    pub c_mu: S,
    /// Cumulation constant for a σ path; consumed by CSA.
    pub c_sigma: S,
    pub d_sigma: S,
}

impl<S: Scalar> CmaParams<S> {
    pub fn new(dim: usize, lambda: usize) -> Self {
        let n = S::from_usize_lossy(dim);
        let mu = lambda / 2;
        let one = S::one();
        let two = S::lit(2.0);
        let raw: Vec<S> = (1..=mu)
            .map(|i| (S::from_usize_lossy(lambda + 1) / two).ln() - S::from_usize_lossy(i).ln())
            .collect();
        let total: S = raw.iter().copied().sum();
        let weights: Vec<S> = raw.iter().map(|&w| w / total).collect();
        let mu_eff = one / weights.iter().map(|&w| w * w).sum::<S>();
        let c_c = (S::lit(4.0) + mu_eff / n) / (n + S::lit(4.0) + two * mu_eff / n);
        let c_1 = two / ((n + S::lit(1.3)).powi(2) + mu_eff);
        let c_mu = (one - c_1).min(
            two * (mu_eff - two + one / mu_eff) / ((n + two).powi(2) + mu_eff),
        );
        let c_sigma = (mu_eff + two) / (n + mu_eff + S::lit(5.0));
        let d_sigma = one
            + two * S::zero().max(((mu_eff - one) / (n + one)).sqrt() - one)
            + c_sigma;
        Self { lambda, mu, weights, mu_eff, c_c, c_1, c_mu, c_sigma, d_sigma }
    }
}

#[derive(Debug, Clone)]
pub struct CmaState<S> {
    pub mean: Vec<S>,
    pub covariance: Matrix<S>,
    pub sigma: S,
    /// Rank-one evolution path.
    pub path_c: Vec<S>,
    pub generation: usize,
    pub params: CmaParams<S>,
    /// Evaluate the bound-clipped sample while updating with the raw one.
    pub clip_for_evaluation: bool,
    eigenvalues: Vec<S>,
    eigenvectors: Matrix<S>,
}

/// One offspring: the standard-normal draw, its shaped step and the point.
#[derive(Debug, Clone)]
pub struct Sample<S> {
    pub z: Vec<S>,
    pub y: Vec<S>,
    pub x: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct CmaStep<S> {
    /// Points that were evaluated (clipped when clipping is on).
    pub points: Vec<Vec<S>>,
    pub fitnesses: Vec<S>,
    pub best_index: usize,
    /// Best child's step in the whitened frame, C^{-1/2}(x_best − m)/σ.
    pub best_direction: Vec<S>,
    /// Whether eigenvalue flooring was applied after the covariance update.
    pub repaired: bool,
}

impl<S: Scalar> CmaState<S> {
    pub fn new(mean: Vec<S>, sigma: S, lambda: usize) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::InvalidArgument(format!("lambda must be ≥ 2, got {lambda}")));
        }
        let d = mean.len();
        Ok(Self {
            covariance: identity(d),
            sigma,
            path_c: vec![S::zero(); d],
            generation: 0,
            params: CmaParams::new(d, lambda),
            clip_for_evaluation: true,
            eigenvalues: vec![S::one(); d],
            eigenvectors: identity(d),
            mean,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn eigenvalues(&self) -> &[S] {
        &self.eigenvalues
    }

    /// Draws `x = m + σ B D z`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, sigma: S, rng: &mut R) -> Sample<S> {
        let d = self.dimension();
        let z: Vec<S> = (0..d).map(|_| normal(rng)).collect();
        let dz: Vec<S> = z
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&zi, &ev)| zi * ev.sqrt())
            .collect();
        let y = mat_vec(&self.eigenvectors, &dz);
        let x = self.mean.iter().zip(&y).map(|(&m, &yi)| m + sigma * yi).collect();
        Sample { z, y, x }
    }

    /// Replaces the covariance, flooring eigenvalues if needed. Returns true on repair.
    fn set_covariance(&mut self, mut c: Matrix<S>) -> bool {
        let d = self.dimension();
        for i in 0..d {
            for j in 0..i {
                let avg = (c[i][j] + c[j][i]) / S::lit(2.0);
                c[i][j] = avg;
                c[j][i] = avg;
            }
        }
        let (mut values, vectors) = symmetric_eigen(&c);
        let floor = S::lit(EIGEN_FLOOR);
        let repaired = values.iter().any(|&v| !(v > floor));
        if repaired {
            for v in values.iter_mut() {
                if !(*v > floor) {
                    *v = floor;
                }
            }
            c = compose(&values, &vectors);
            warn!("covariance lost positive definiteness; eigenvalues floored at {EIGEN_FLOOR:e}");
        }
        self.covariance = c;
        self.eigenvalues = values;
        self.eigenvectors = vectors;
        repaired
    }
}

/// Samples λ offspring with step-size `sigma`, evaluates them and updates
/// mean, rank-one path and covariance. Consumes exactly λ evaluations; if the
/// budget cannot cover them nothing is evaluated and `BudgetExhausted` is
/// returned.
pub fn cma_generation<S: Scalar, R: rand::Rng + ?Sized>(
    state: &mut CmaState<S>,
    sigma: S,
    objective: &mut Objective<'_, S>,
    rng: &mut R,
) -> Result<CmaStep<S>> {
    if !(sigma > S::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive and finite, got {sigma}")));
    }
    let lambda = state.params.lambda;
    if objective.budget().remaining() < lambda {
        return Err(Error::BudgetExhausted { max: objective.budget().max_evaluations });
    }
    let bounds = objective.function().bounds().to_vec();
    let d = state.dimension();

    let samples: Vec<Sample<S>> = (0..lambda).map(|_| state.sample(sigma, rng)).collect();
    let points: Vec<Vec<S>> = samples
        .iter()
        .map(|s| {
            if state.clip_for_evaluation {
                s.x.iter().zip(&bounds).map(|(&v, &(lo, hi))| clamp(v, lo, hi)).collect()
            } else {
                s.x.clone()
            }
        })
        .collect();
    let fitnesses = points
        .iter()
        .map(|p| objective.evaluate(p))
        .collect::<Result<Vec<S>>>()?;

    let mut order: Vec<usize> = (0..lambda).collect();
    order.sort_by(|&a, &b| fitnesses[a].partial_cmp(&fitnesses[b]).unwrap_or(std::cmp::Ordering::Equal));
    let best_index = order[0];

    let p = &state.params;
    let old_mean = state.mean.clone();
    let mut y_w = vec![S::zero(); d];
    for (w, &k) in p.weights.iter().zip(&order) {
        for j in 0..d {
            y_w[j] += *w * samples[k].y[j];
        }
    }
    let new_mean: Vec<S> = old_mean.iter().zip(&y_w).map(|(&m, &y)| m + sigma * y).collect();

    let pc_scale = (p.c_c * (S::lit(2.0) - p.c_c) * p.mu_eff).sqrt();
    let path_c: Vec<S> = state
        .path_c
        .iter()
        .zip(&y_w)
        .map(|(&pc, &y)| (S::one() - p.c_c) * pc + pc_scale * y)
        .collect();

    let decay = S::one() - p.c_1 - p.c_mu;
    let mut cov = state.covariance.clone();
    for i in 0..d {
        for j in 0..d {
            let rank_mu: S = p
                .weights
                .iter()
                .zip(&order)
                .map(|(&w, &k)| w * samples[k].y[i] * samples[k].y[j])
                .sum();
            cov[i][j] = decay * cov[i][j] + p.c_1 * path_c[i] * path_c[j] + p.c_mu * rank_mu;
        }
    }

    // B z is the whitened step of the best child: C^{-1/2} y = B D^{-1} Bᵀ B D z.
    let best_direction = mat_vec(&state.eigenvectors, &samples[best_index].z);

    state.mean = new_mean;
    state.path_c = path_c;
    state.sigma = sigma;
    state.generation += 1;
    let repaired = state.set_covariance(cov);

    Ok(CmaStep { points, fitnesses, best_index, best_direction, repaired })
}
