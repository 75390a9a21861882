//! Handcrafted adaptation rules used as opponents: CSA for the CMA-ES
//! step-size, iDE and jDE for DE's scale factor and crossover rate.


use crate::de::{CR_BOUNDS, F_BOUNDS};
use crate::linalg::norm;
use crate::rng::{normal, uniform, unit};
use crate::scalar::clamp;
use crate::Scalar;

/// E‖N(0, I_d)‖ ≈ √d (1 − 1/(4d) + 1/(21d²)).
pub fn expected_norm<S: Scalar>(d: usize) -> S {
    let n = S::from_usize_lossy(d);
    n.sqrt() * (S::one() - S::one() / (S::lit(4.0) * n) + S::one() / (S::lit(21.0) * n * n))
}

/// Cumulative step-size adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct CsaState<S> {
    pub path: Vec<S>,
    /// Cumulation factor; 1/c is the lifespan of information in the path.
    pub c: S,
    pub d_sigma: S,
    pub expected_norm: S,
}

impl<S: Scalar> CsaState<S> {
    pub fn new(dim: usize, c: S, d_sigma: S) -> Self {
        assert!(c >= S::zero() && c <= S::one(), "cumulation factor must lie in [0,1]");
        assert!(d_sigma > S::zero(), "damping must be positive");
        Self {
            path: vec![S::zero(); dim],
            c,
            d_sigma,
            expected_norm: expected_norm(dim),
        }
    }

    /// Multiplier exp((c/d_σ)(‖p‖/E‖N‖ − 1)) for a given path norm.
    pub fn multiplier(&self, path_norm: S) -> S {
        ((self.c / self.d_sigma) * (path_norm / self.expected_norm - S::one())).exp()
    }

    /// Folds the best child's normalized step into the path and returns σ_{t+1}.
    pub fn update(&mut self, xi_star: &[S], sigma: S) -> S {
        let c = self.c;
        let scale = (c * (S::lit(2.0) - c)).sqrt();
        for (p, &x) in self.path.iter_mut().zip(xi_star) {
            *p = (S::one() - c) * *p + scale * x;
        }
        sigma * self.multiplier(norm(&self.path))
    }
}

/// iDE: per-individual F/CR drawn around the best individual's values.
#[derive(Debug, Clone, PartialEq)]
pub struct IdeState<S> {
    /// Values currently attached to each individual.
    pub f: Vec<S>,
    pub cr: Vec<S>,
    /// Successful values accumulated so far (seeded with the initial draws).
    pub f_archive: Vec<S>,
    pub cr_archive: Vec<S>,
}

/// Standard deviation of the iDE perturbation N(0, 0.5).
pub const IDE_NOISE_STD: f64 = 0.5;

impl<S: Scalar> IdeState<S> {
    /// F ~ U(0.1, 1), CR ~ U(0, 1) per individual.
    pub fn new<R: rand::Rng + ?Sized>(np: usize, rng: &mut R) -> Self {
        let f: Vec<S> = (0..np).map(|_| uniform(rng, S::lit(0.1), S::one())).collect();
        let cr: Vec<S> = (0..np).map(|_| unit(rng)).collect();
        Self { f_archive: f.clone(), cr_archive: cr.clone(), f, cr }
    }

    /// State with explicit archives; per-individual values start as the first
    /// `np` archive entries (cycled).
    pub fn with_archives(np: usize, f_archive: Vec<S>, cr_archive: Vec<S>) -> Self {
        assert!(!f_archive.is_empty() && !cr_archive.is_empty());
        let f = (0..np).map(|i| f_archive[i % f_archive.len()]).collect();
        let cr = (0..np).map(|i| cr_archive[i % cr_archive.len()]).collect();
        Self { f, cr, f_archive, cr_archive }
    }

    /// Proposes (F, CR) for every individual:
    /// `F = F_best + N(0, 0.5)(F_r1 − F_r2)`, likewise CR, with r1 ≠ r2 drawn
    /// from the archives and results clipped to [0,2] × [0,1].
    pub fn propose<R: rand::Rng + ?Sized>(&self, best_index: usize, rng: &mut R) -> Vec<(S, S)> {
        let f_best = self.f[best_index];
        let cr_best = self.cr[best_index];
        (0..self.f.len())
            .map(|_| {
                let (a, b) = pick_two(self.f_archive.len(), rng);
                let f = f_best + S::lit(IDE_NOISE_STD) * normal::<S, _>(rng) * (self.f_archive[a] - self.f_archive[b]);
                let (a, b) = pick_two(self.cr_archive.len(), rng);
                let cr = cr_best
                    + S::lit(IDE_NOISE_STD) * normal::<S, _>(rng) * (self.cr_archive[a] - self.cr_archive[b]);
                (
                    clamp(f, S::lit(F_BOUNDS.0), S::lit(F_BOUNDS.1)),
                    clamp(cr, S::lit(CR_BOUNDS.0), S::lit(CR_BOUNDS.1)),
                )
            })
            .collect()
    }

    /// Keeps the proposals whose trial replaced its parent and archives them.
    pub fn record(&mut self, proposals: &[(S, S)], improved: &[bool]) {
        for (i, (&(f, cr), &ok)) in proposals.iter().zip(improved).enumerate() {
            if ok {
                self.f[i] = f;
                self.cr[i] = cr;
                self.f_archive.push(f);
                self.cr_archive.push(cr);
            }
        }
    }
}

/// Two distinct indices when `n ≥ 2`, otherwise `(0, 0)`.
fn pick_two<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    if n < 2 {
        return (0, 0);
    }
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// jDE: keep the best-so-far (F, CR), resample with probability 0.1.
#[derive(Debug, Clone, PartialEq)]
pub struct JdeState<S> {
    pub best_f: S,
    pub best_cr: S,
    pub p: S,
    /// Values handed out for the current generation.
    pub current_f: S,
    pub current_cr: S,
}

pub const JDE_RESAMPLE_PROB: f64 = 0.1;
pub const JDE_F_RANGE: (f64, f64) = (0.1, 1.0);

impl<S: Scalar> Default for JdeState<S> {
    fn default() -> Self {
        Self::new(S::lit(0.5), S::lit(0.9))
    }
}

impl<S: Scalar> JdeState<S> {
    pub fn new(best_f: S, best_cr: S) -> Self {
        Self {
            best_f,
            best_cr,
            p: S::lit(JDE_RESAMPLE_PROB),
            current_f: best_f,
            current_cr: best_cr,
        }
    }

    /// F for given coin and sample draws in [0,1): resample iff `coin < p`.
    pub fn choose_f(&self, coin: S, draw: S) -> S {
        if coin < self.p {
            S::lit(JDE_F_RANGE.0) + draw * S::lit(JDE_F_RANGE.1 - JDE_F_RANGE.0)
        } else {
            self.best_f
        }
    }

    pub fn choose_cr(&self, coin: S, draw: S) -> S {
        if coin < self.p {
            draw
        } else {
            self.best_cr
        }
    }

    /// Draws this generation's (F, CR).
    pub fn next_params<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> (S, S) {
        let (c1, d1, c2, d2) = (unit(rng), unit(rng), unit(rng), unit(rng));
        self.current_f = self.choose_f(c1, d1);
        self.current_cr = self.choose_cr(c2, d2);
        (self.current_f, self.current_cr)
    }

    /// Adopts the current values as best when the run's best fitness improved.
    pub fn report(&mut self, improved_best: bool) {
        if improved_best {
            self.best_f = self.current_f;
            self.best_cr = self.current_cr;
        }
    }
}
