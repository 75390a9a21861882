//! Differential Evolution, best/1/bin, with F and CR supplied per individual
//! from outside every generation.


use crate::benchfn::Objective;
use crate::error::{Error, Result};
use crate::rng::uniform;
use crate::scalar::clamp;
use crate::Scalar;

/// Smallest population for which best, parent and two donors can be distinct.
pub const MIN_POPULATION: usize = 4;

pub const F_BOUNDS: (f64, f64) = (0.0, 2.0);
pub const CR_BOUNDS: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Population<S> {
    pub genotypes: Vec<Vec<S>>,
    pub fitnesses: Vec<S>,
    pub generation: usize,
}

impl<S: Scalar> Population<S> {
    pub fn size(&self) -> usize {
        self.genotypes.len()
    }

    /// Index of the lowest fitness (first one on ties).
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, &f) in self.fitnesses.iter().enumerate().skip(1) {
            if f < self.fitnesses[best] {
                best = i;
            }
        }
        best
    }

    pub fn best_fitness(&self) -> S {
        self.fitnesses[self.best_index()]
    }
}

/// Per-individual scale factors and crossover rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DeParams<S> {
    pub f: Vec<S>,
    pub cr: Vec<S>,
}

impl<S: Scalar> DeParams<S> {
    /// The same pair for every individual.
    pub fn broadcast(f: S, cr: S, np: usize) -> Self {
        Self { f: vec![f; np], cr: vec![cr; np] }
    }

    pub fn from_pairs(pairs: &[(S, S)]) -> Self {
        Self {
            f: pairs.iter().map(|p| p.0).collect(),
            cr: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    fn validate(&self, np: usize) -> Result<()> {
        if self.f.len() != np || self.cr.len() != np {
            return Err(Error::InvalidArgument(format!(
                "expected {np} (F, CR) pairs, got {}/{}",
                self.f.len(),
                self.cr.len()
            )));
        }
        let (flo, fhi) = (S::lit(F_BOUNDS.0), S::lit(F_BOUNDS.1));
        let (clo, chi) = (S::lit(CR_BOUNDS.0), S::lit(CR_BOUNDS.1));
        let bad = self.f.iter().any(|&f| !(f >= flo && f <= fhi))
            || self.cr.iter().any(|&c| !(c >= clo && c <= chi));
        if bad {
            return Err(Error::InvalidArgument("F must lie in [0,2] and CR in [0,1]".into()));
        }
        Ok(())
    }
}

/// Result of one generation: the next population and which trials replaced
/// their parent.
#[derive(Debug, Clone)]
pub struct DeStep<S> {
    pub population: Population<S>,
    pub improved: Vec<bool>,
    /// Every trial vector evaluated this generation with its fitness.
    pub trial_fitnesses: Vec<S>,
}

/// `best + F (a - b)`.
pub fn mutant<S: Scalar>(best: &[S], a: &[S], b: &[S], f: S) -> Vec<S> {
    best.iter()
        .zip(a.iter().zip(b))
        .map(|(&x, (&ai, &bi))| x + f * (ai - bi))
        .collect()
}

/// Uniform random population inside the bounds; charges `np` evaluations.
pub fn init_population<S: Scalar, R: rand::Rng + ?Sized>(
    objective: &mut Objective<'_, S>,
    np: usize,
    rng: &mut R,
) -> Result<Population<S>> {
    if np < MIN_POPULATION {
        return Err(Error::InvalidArgument(format!(
            "DE population must be at least {MIN_POPULATION}, got {np}"
        )));
    }
    let bounds = objective.function().bounds().to_vec();
    let genotypes: Vec<Vec<S>> = (0..np)
        .map(|_| bounds.iter().map(|&(lo, hi)| uniform(rng, lo, hi)).collect())
        .collect();
    let fitnesses = genotypes
        .iter()
        .map(|g| objective.evaluate(g))
        .collect::<Result<Vec<_>>>()?;
    Ok(Population { genotypes, fitnesses, generation: 0 })
}

/// Draws `k` distinct indices from `0..n` that avoid everything in `exclude`.
fn distinct_indices<R: rand::Rng + ?Sized>(
    n: usize,
    exclude: &[usize],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let c = rng.random_range(0..n);
        if !exclude.contains(&c) && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// One best/1/bin generation with greedy one-to-one replacement.
///
/// Consumes exactly `NP` evaluations. If the budget runs out part-way the
/// generation is discarded and `BudgetExhausted` is returned; the input
/// population is untouched.
pub fn de_generation<S: Scalar, R: rand::Rng + ?Sized>(
    pop: &Population<S>,
    params: &DeParams<S>,
    objective: &mut Objective<'_, S>,
    rng: &mut R,
) -> Result<DeStep<S>> {
    let np = pop.size();
    if np < MIN_POPULATION {
        return Err(Error::InvalidArgument(format!("population of {np} is too small")));
    }
    params.validate(np)?;
    if objective.budget().remaining() < np {
        return Err(Error::BudgetExhausted { max: objective.budget().max_evaluations });
    }
    let bounds = objective.function().bounds().to_vec();
    let dim = bounds.len();
    let best = pop.best_index();

    let mut next = pop.clone();
    next.generation += 1;
    let mut improved = vec![false; np];
    let mut trial_fitnesses = Vec::with_capacity(np);

    for i in 0..np {
        let exclude: &[usize] = if i == best { &[best] } else { &[best, i] };
        let donors = distinct_indices(np, exclude, 2, rng);
        let m = mutant(
            &pop.genotypes[best],
            &pop.genotypes[donors[0]],
            &pop.genotypes[donors[1]],
            params.f[i],
        );
        let j_rand = rng.random_range(0..dim);
        let parent = &pop.genotypes[i];
        let trial: Vec<S> = (0..dim)
            .map(|j| {
                let take_mutant = j == j_rand || S::lit(rng.random::<f64>()) < params.cr[i];
                let v = if take_mutant { m[j] } else { parent[j] };
                clamp(v, bounds[j].0, bounds[j].1)
            })
            .collect();
        let ft = objective.evaluate(&trial)?;
        trial_fitnesses.push(ft);
        if ft <= pop.fitnesses[i] {
            next.genotypes[i] = trial;
            next.fitnesses[i] = ft;
            improved[i] = true;
        }
    }
    Ok(DeStep { population: next, improved, trial_fitnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchfn::lookup;
    use crate::rng::stream_rng;

    #[test]
    fn mutant_formula() {
        let m = mutant(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 0.5);
        assert_eq!(m, vec![0.5, -0.5]);
    }

    #[test]
    fn init_respects_bounds_and_seed() {
        let f = lookup::<f64>("Sphere", 10).unwrap();
        let mut o1 = Objective::new(&f, 500);
        let p1 = init_population(&mut o1, 10, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(p1.size(), 10);
        assert_eq!(o1.budget().used, 10);
        assert!(p1.genotypes.iter().flatten().all(|&v| (-5.0..=5.0).contains(&v)));
        let mut o2 = Objective::new(&f, 500);
        let p2 = init_population(&mut o2, 10, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn init_rejects_tiny_population() {
        let f = lookup::<f64>("Sphere", 10).unwrap();
        let mut o = Objective::new(&f, 500);
        assert!(init_population(&mut o, 3, &mut stream_rng(1, 0)).is_err());
    }

    #[test]
    fn zero_scale_factor_with_full_crossover_copies_best() {
        let f = lookup::<f64>("Sphere", 10).unwrap();
        let mut o = Objective::new(&f, 500);
        let mut rng = stream_rng(2, 0);
        let pop = init_population(&mut o, 10, &mut rng).unwrap();
        let best = pop.genotypes[pop.best_index()].clone();
        let step = de_generation(&pop, &DeParams::broadcast(0.0, 1.0, 10), &mut o, &mut rng).unwrap();
        // Every trial is the best itself, so every non-best parent that is worse gets replaced by it.
        for (i, g) in step.population.genotypes.iter().enumerate() {
            if step.improved[i] {
                assert_eq!(g, &best);
            }
        }
        assert!(step.trial_fitnesses.iter().all(|&t| t == pop.best_fitness()));
    }

    #[test]
    fn full_crossover_takes_every_mutant_gene() {
        // With CR = 1 and F = 0 the trial equals best; with CR = 0 only j_rand differs.
        let f = lookup::<f64>("Sphere", 10).unwrap();
        let mut o = Objective::new(&f, 500);
        let mut rng = stream_rng(4, 0);
        let pop = init_population(&mut o, 10, &mut rng).unwrap();
        let step = de_generation(&pop, &DeParams::broadcast(0.0, 0.0, 10), &mut o, &mut rng).unwrap();
        let best = &pop.genotypes[pop.best_index()];
        for (i, g) in step.population.genotypes.iter().enumerate() {
            if step.improved[i] && g != &pop.genotypes[i] {
                let diff = g.iter().zip(&pop.genotypes[i]).filter(|(a, b)| a != b).count();
                assert!(diff <= 1);
                assert!(g.iter().zip(best).zip(&pop.genotypes[i]).all(|((a, b), p)| a == b || a == p));
            }
        }
    }

    #[test]
    fn consumes_np_evaluations_and_stays_in_bounds() {
        let f = lookup::<f64>("Rastrigin", 10).unwrap();
        let mut o = Objective::new(&f, 500);
        let mut rng = stream_rng(5, 0);
        let mut pop = init_population(&mut o, 10, &mut rng).unwrap();
        for g in 1..=49 {
            let prev_best = pop.best_fitness();
            let step = de_generation(&pop, &DeParams::broadcast(1.9, 0.9, 10), &mut o, &mut rng).unwrap();
            pop = step.population;
            assert_eq!(o.budget().used, 10 + 10 * g);
            assert!(pop.best_fitness() <= prev_best);
            assert!(pop.genotypes.iter().flatten().all(|&v| (-5.0..=5.0).contains(&v)));
        }
        assert!(matches!(
            de_generation(&pop, &DeParams::broadcast(0.5, 0.9, 10), &mut o, &mut rng),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_params() {
        let f = lookup::<f64>("Sphere", 10).unwrap();
        let mut o = Objective::new(&f, 500);
        let mut rng = stream_rng(6, 0);
        let pop = init_population(&mut o, 10, &mut rng).unwrap();
        assert!(de_generation(&pop, &DeParams::broadcast(2.5, 0.5, 10), &mut o, &mut rng).is_err());
        assert!(de_generation(&pop, &DeParams::broadcast(0.5, 0.5, 9), &mut o, &mut rng).is_err());
    }
}
