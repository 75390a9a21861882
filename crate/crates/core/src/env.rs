//! Episodes: one episode is one full evolutionary run driven generation by
//! generation by a controller (a trained policy, a baseline rule or fixed
//! parameters). Also the RL environment used for training and the
//! fixed-seed test protocol.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{CsaState, IdeState, JdeState};
use crate::benchfn::{BenchmarkFunction, EvalBudget, FunctionId, Objective};
use crate::cmaes::{cma_generation, CmaState, SIGMA_BOUNDS};
use crate::de::{de_generation, init_population, DeParams, Population};
use crate::error::{Error, Result};
use crate::observe::{build_observation, reward, GenerationRecord, ObservationSpec, RunTrace};
use crate::policy::{sample_action, ActionKind, EngineParams, PolicyNet};
use crate::ppo::{Environment, Transition};
use crate::rng::{stream_rng, uniform, Rng};
use crate::scalar::clamp;
use crate::stats::{auc, best_of_run};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    De,
    Cmaes,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::De => "de",
            Algorithm::Cmaes => "cmaes",
        }
    }

    pub fn for_action(kind: ActionKind) -> Self {
        if kind.is_de() {
            Algorithm::De
        } else {
            Algorithm::Cmaes
        }
    }
}

/// Shape of one run. The evaluation budget is `generations × population`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub generations: usize,
    pub population: usize,
    /// Starting CMA-ES step-size.
    pub initial_sigma: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { generations: 50, population: 10, initial_sigma: 0.5 }
    }
}

impl RunSettings {
    pub fn evaluations(&self) -> usize {
        self.generations * self.population
    }

    /// Generations whose parameters a controller chooses. DE spends its
    /// first generation's worth of evaluations on the initial population.
    pub fn controlled_steps(&self, algorithm: Algorithm) -> usize {
        match algorithm {
            Algorithm::De => self.generations - 1,
            Algorithm::Cmaes => self.generations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations < 2 || self.population < 4 {
            return Err(Error::InvalidArgument(
                "runs need at least 2 generations and a population of 4".into(),
            ));
        }
        if !(self.initial_sigma > 0.0 && self.initial_sigma <= SIGMA_BOUNDS.1) {
            return Err(Error::InvalidArgument("initial_sigma must lie in (0, 3]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Engine<S> {
    De(Population<S>),
    Cma(CmaState<S>),
}

/// What the engine reports back after a generation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFeedback<S> {
    /// DE: which trials replaced their parent.
    pub improved: Vec<bool>,
    /// Whether the population's best fitness went down.
    pub best_improved: bool,
    /// CMA-ES: whitened step of the generation's best child.
    pub best_direction: Option<Vec<S>>,
}

/// A single run advanced one generation at a time.
#[derive(Debug, Clone)]
pub struct EvolutionRun<S> {
    function: BenchmarkFunction<S>,
    algorithm: Algorithm,
    settings: RunSettings,
    budget: EvalBudget,
    engine: Engine<S>,
    trace: RunTrace<S>,
    steps_taken: usize,
}

impl<S: Scalar> EvolutionRun<S> {
    /// DE: samples and evaluates the initial population (recorded as
    /// generation 0). CMA-ES: draws the initial mean uniformly in the bounds.
    pub fn start(
        function: BenchmarkFunction<S>,
        algorithm: Algorithm,
        settings: RunSettings,
        rng: &mut Rng,
    ) -> Result<Self> {
        settings.validate()?;
        let mut budget = EvalBudget::new(settings.evaluations());
        let mut trace = RunTrace::new();
        let engine = match algorithm {
            Algorithm::De => {
                let mut obj = Objective::with_budget(&function, budget);
                let pop = init_population(&mut obj, settings.population, rng)?;
                budget = obj.budget();
                trace.push(GenerationRecord::from_population(&pop.genotypes, &pop.fitnesses, Vec::new()));
                Engine::De(pop)
            }
            Algorithm::Cmaes => {
                let mean = function.bounds().iter().map(|&(lo, hi)| uniform(rng, lo, hi)).collect();
                Engine::Cma(CmaState::new(mean, S::lit(settings.initial_sigma), settings.population)?)
            }
        };
        Ok(Self { function, algorithm, settings, budget, engine, trace, steps_taken: 0 })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn function(&self) -> &BenchmarkFunction<S> {
        &self.function
    }

    pub fn trace(&self) -> &RunTrace<S> {
        &self.trace
    }

    pub fn into_trace(self) -> RunTrace<S> {
        self.trace
    }

    pub fn evaluations(&self) -> usize {
        self.budget.used
    }

    pub fn population_size(&self) -> usize {
        self.settings.population
    }

    pub fn is_done(&self) -> bool {
        self.steps_taken >= self.settings.controlled_steps(self.algorithm)
    }

    /// Index of the current best DE individual (0 for CMA-ES).
    pub fn best_index(&self) -> usize {
        match &self.engine {
            Engine::De(p) => p.best_index(),
            Engine::Cma(_) => 0,
        }
    }

    /// Current CMA-ES step-size (the initial σ before the first step).
    pub fn sigma(&self) -> Option<S> {
        match &self.engine {
            Engine::Cma(c) => Some(c.sigma),
            Engine::De(_) => None,
        }
    }

    pub fn observation(&self, spec: &ObservationSpec, previous_action: &[S]) -> Vec<S> {
        build_observation(&self.trace, spec, previous_action, &self.function.bound_widths())
    }

    /// Runs one generation with `params`, recording `action` in the trace.
    pub fn advance(&mut self, params: &EngineParams<S>, action: Vec<S>, rng: &mut Rng) -> Result<StepFeedback<S>> {
        if self.is_done() {
            return Err(Error::BudgetExhausted { max: self.budget.max_evaluations });
        }
        let previous_best = self.trace.generations.last().map(|g| g.best_fitness);
        let mut obj = Objective::with_budget(&self.function, self.budget);
        let feedback = match (&mut self.engine, params) {
            (Engine::De(pop), EngineParams::De(p)) => {
                let step = de_generation(pop, p, &mut obj, rng)?;
                *pop = step.population;
                self.trace
                    .push(GenerationRecord::from_population(&pop.genotypes, &pop.fitnesses, action));
                StepFeedback { improved: step.improved, best_improved: false, best_direction: None }
            }
            (Engine::Cma(state), EngineParams::Sigma(sigma)) => {
                let sigma = clamp(*sigma, S::lit(SIGMA_BOUNDS.0), S::lit(SIGMA_BOUNDS.1));
                let step = cma_generation(state, sigma, &mut obj, rng)?;
                self.trace
                    .push(GenerationRecord::from_population(&step.points, &step.fitnesses, action));
                StepFeedback { improved: Vec::new(), best_improved: false, best_direction: Some(step.best_direction) }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "parameters do not match the {} engine",
                    self.algorithm.name()
                )))
            }
        };
        self.budget = obj.budget();
        self.steps_taken += 1;
        let best = self.trace.generations.last().expect("just pushed").best_fitness;
        let best_improved = previous_best.is_some_and(|p| best < p);
        Ok(StepFeedback { best_improved, ..feedback })
    }
}

/// A trained policy plus everything needed to feed and decode it.
#[derive(Debug, Clone)]
pub struct PolicyController<S> {
    pub net: PolicyNet<S>,
    pub kind: ActionKind,
    pub observation: ObservationSpec,
    /// Sample around the mean instead of using the mean itself.
    pub stochastic: bool,
}

/// Who sets the engine parameters each generation.
#[derive(Debug, Clone)]
pub enum Controller<S> {
    FixedDe { f: S, cr: S },
    FixedSigma { sigma: S },
    Csa,
    Ide,
    Jde,
    Policy(PolicyController<S>),
}

impl<S: Scalar> Controller<S> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Controller::FixedDe { .. } | Controller::Ide | Controller::Jde => Algorithm::De,
            Controller::FixedSigma { .. } | Controller::Csa => Algorithm::Cmaes,
            Controller::Policy(p) => Algorithm::for_action(p.kind),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Controller::FixedDe { .. } | Controller::FixedSigma { .. } => "fixed".into(),
            Controller::Csa => "csa".into(),
            Controller::Ide => "ide".into(),
            Controller::Jde => "jde".into(),
            Controller::Policy(p) => format!("policy-{}", p.kind.name()),
        }
    }
}

/// Per-run controller state.
enum ControlState<S> {
    Stateless,
    Csa(CsaState<S>, S),
    Ide(IdeState<S>, Vec<(S, S)>),
    Jde(JdeState<S>),
    Policy(Vec<S>),
}

impl<S: Scalar> ControlState<S> {
    fn new(controller: &Controller<S>, run: &EvolutionRun<S>, rng: &mut Rng) -> Self {
        match controller {
            Controller::FixedDe { .. } | Controller::FixedSigma { .. } => ControlState::Stateless,
            Controller::Csa => {
                let d = run.function().dimension();
                let c = crate::cmaes::CmaParams::<S>::new(d, run.population_size()).c_sigma;
                ControlState::Csa(CsaState::new(d, c, S::one()), run.sigma().expect("CMA-ES run"))
            }
            Controller::Ide => ControlState::Ide(IdeState::new(run.population_size(), rng), Vec::new()),
            Controller::Jde => ControlState::Jde(JdeState::default()),
            Controller::Policy(p) => ControlState::Policy(normalized_neutral(p.kind)),
        }
    }

    /// Parameters for the next generation and the action to record.
    fn decide(
        &mut self,
        controller: &Controller<S>,
        run: &EvolutionRun<S>,
        rng: &mut Rng,
    ) -> Result<(EngineParams<S>, Vec<S>)> {
        let np = run.population_size();
        Ok(match (self, controller) {
            (_, Controller::FixedDe { f, cr }) => (EngineParams::De(DeParams::broadcast(*f, *cr, np)), vec![*f, *cr]),
            (_, Controller::FixedSigma { sigma }) => (EngineParams::Sigma(*sigma), vec![*sigma]),
            (ControlState::Csa(_, sigma), _) => (EngineParams::Sigma(*sigma), vec![*sigma]),
            (ControlState::Ide(state, proposals), _) => {
                *proposals = state.propose(run.best_index(), rng);
                let n = S::from_usize_lossy(np);
                let mf = proposals.iter().map(|p| p.0).sum::<S>() / n;
                let mc = proposals.iter().map(|p| p.1).sum::<S>() / n;
                (EngineParams::De(DeParams::from_pairs(proposals)), vec![mf, mc])
            }
            (ControlState::Jde(state), _) => {
                let (f, cr) = state.next_params(rng);
                (EngineParams::De(DeParams::broadcast(f, cr, np)), vec![f, cr])
            }
            (ControlState::Policy(previous), Controller::Policy(p)) => {
                let obs = run.observation(&p.observation, previous);
                let (mean, log_std) = p.net.forward(&obs)?;
                let bounds = p.kind.bounds::<S>();
                let action = sample_action(&mean, &log_std, &bounds, rng, p.stochastic).action;
                *previous = p.kind.normalize(&action);
                (p.kind.decode(&action, np, rng), action)
            }
            _ => unreachable!("controller state built from this controller"),
        })
    }

    fn feedback(&mut self, fb: &StepFeedback<S>) {
        match self {
            ControlState::Csa(state, sigma) => {
                let dir = fb.best_direction.as_deref().expect("CMA-ES feedback");
                let next = state.update(dir, *sigma);
                *sigma = clamp(next, S::lit(SIGMA_BOUNDS.0), S::lit(SIGMA_BOUNDS.1));
            }
            ControlState::Ide(state, proposals) => state.record(proposals, &fb.improved),
            ControlState::Jde(state) => state.report(fb.best_improved),
            ControlState::Stateless | ControlState::Policy(_) => {}
        }
    }
}

fn normalized_neutral<S: Scalar>(kind: ActionKind) -> Vec<S> {
    kind.normalize(&kind.neutral::<S>())
}

/// A finished run: the trace plus per-step records.
#[derive(Debug, Clone)]
pub struct Episode<S> {
    pub trace: RunTrace<S>,
    /// Reward of every controlled generation.
    pub rewards: Vec<S>,
    pub evaluations: usize,
}

/// Runs `controller` on `function` until the budget is spent.
pub fn run_episode<S: Scalar>(
    function: &BenchmarkFunction<S>,
    controller: &Controller<S>,
    settings: &RunSettings,
    rng: &mut Rng,
) -> Result<Episode<S>> {
    let mut run = EvolutionRun::start(function.clone(), controller.algorithm(), *settings, rng)?;
    let mut state = ControlState::new(controller, &run, rng);
    let mut rewards = Vec::with_capacity(settings.generations);
    while !run.is_done() {
        let (params, action) = state.decide(controller, &run, rng)?;
        match run.advance(&params, action, rng) {
            Ok(fb) => state.feedback(&fb),
            Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        }
        rewards.push(reward(run.trace()));
    }
    let evaluations = run.evaluations();
    Ok(Episode { trace: run.into_trace(), rewards, evaluations })
}

/// Uniform choice of one function for the next training episode.
pub fn sample_function<'a, R: rand::Rng + ?Sized>(set: &'a [FunctionId], rng: &mut R) -> &'a FunctionId {
    assert!(!set.is_empty(), "function set must not be empty");
    &set[rng.random_range(0..set.len())]
}

/// Training environment: every episode is a fresh run on a function drawn
/// uniformly from the set.
#[derive(Debug, Clone)]
pub struct AdaptationEnv<S> {
    functions: Vec<BenchmarkFunction<S>>,
    kind: ActionKind,
    observation: ObservationSpec,
    settings: RunSettings,
    run: Option<EvolutionRun<S>>,
    previous_action: Vec<S>,
}

impl<S: Scalar> AdaptationEnv<S> {
    pub fn new(
        functions: Vec<BenchmarkFunction<S>>,
        kind: ActionKind,
        observation: ObservationSpec,
        settings: RunSettings,
    ) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidArgument("training needs at least one function".into()));
        }
        settings.validate()?;
        Ok(Self { functions, kind, observation, settings, run: None, previous_action: Vec::new() })
    }

    pub fn action_kind(&self) -> ActionKind {
        self.kind
    }
}

impl<S: Scalar> Environment<S> for AdaptationEnv<S> {
    fn observation_dim(&self) -> usize {
        self.observation.len(self.kind.dim())
    }

    fn action_bounds(&self) -> Vec<(S, S)> {
        self.kind.bounds()
    }

    fn episode_length(&self) -> usize {
        self.settings.controlled_steps(Algorithm::for_action(self.kind))
    }

    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<S>> {
        let k = rng.random_range(0..self.functions.len());
        let run = EvolutionRun::start(
            self.functions[k].clone(),
            Algorithm::for_action(self.kind),
            self.settings,
            rng,
        )?;
        self.previous_action = normalized_neutral(self.kind);
        let obs = run.observation(&self.observation, &self.previous_action);
        self.run = Some(run);
        Ok(obs)
    }

    fn step(&mut self, action: &[S], rng: &mut Rng) -> Result<Transition<S>> {
        let run = self
            .run
            .as_mut()
            .ok_or_else(|| Error::InvalidArgument("step before reset".into()))?;
        let params = self.kind.decode(action, run.population_size(), rng);
        run.advance(&params, action.to_vec(), rng)?;
        self.previous_action = self.kind.normalize(action);
        Ok(Transition {
            observation: run.observation(&self.observation, &self.previous_action),
            reward: reward(run.trace()),
            done: run.is_done(),
        })
    }

    fn episode_label(&self) -> Option<String> {
        self.run.as_ref().map(|r| r.function().id().to_string())
    }
}

/// Metrics of one test run.
#[derive(Debug, Clone)]
pub struct RunResult<S> {
    pub run: usize,
    pub seed: u64,
    pub episode: Episode<S>,
    pub auc: S,
    pub best_of_run: S,
}

/// Independent runs with seeds `seed_base, seed_base + 1, …`. Runs execute
/// on the current rayon pool; results come back ordered by run index.
pub fn run_test_protocol<S: Scalar>(
    controller: &Controller<S>,
    function: &BenchmarkFunction<S>,
    settings: &RunSettings,
    seed_base: u64,
    runs: usize,
) -> Result<Vec<RunResult<S>>> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base + i as u64;
            let mut rng = stream_rng(seed, 0);
            let episode = run_episode(function, controller, settings, &mut rng)?;
            let curve = episode.trace.best_fitness_curve();
            Ok(RunResult { run: i, seed, auc: auc(&curve)?, best_of_run: best_of_run(&curve)?, episode })
        })
        .collect()
}

/// Number of runs in the standard test protocol.
pub const TEST_RUNS: usize = 50;

/// `<root>/<experiment>/<function>_<dim>/run_<seed>.csv`.
pub fn trace_path(root: &Path, experiment: &str, function: &FunctionId, seed: u64) -> PathBuf {
    root.join(experiment).join(function.slug()).join(format!("run_{seed}.csv"))
}

/// One row per generation: generation, best_fitness, reward, action_0…
/// Generations without a recorded action leave those cells empty.
pub fn write_trace_csv<S: Scalar, W: Write>(trace: &RunTrace<S>, out: W) -> Result<()> {
    let width = trace.generations.iter().map(|g| g.action.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["generation".to_string(), "best_fitness".into(), "reward".into()];
    header.extend((0..width).map(|i| format!("action_{i}")));
    w.write_record(&header)?;
    let mut prefix = RunTrace::new();
    for (k, g) in trace.generations.iter().enumerate() {
        prefix.push(g.clone());
        let mut rec = vec![k.to_string(), g.best_fitness.to_string(), reward(&prefix).to_string()];
        rec.extend((0..width).map(|i| g.action.get(i).map(|a| a.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace<S: Scalar>(trace: &RunTrace<S>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_trace_csv(trace, std::io::BufWriter::new(std::fs::File::create(path)?))
}
