//! Learned parameter control for differential evolution and CMA-ES.
//!
//! The crate bundles the benchmark suite, both evolutionary engines, the
//! hand-designed adaptation baselines, the observation features, a small
//! MLP policy trained with PPO, the episode runner and the evaluation
//! statistics. Everything numeric is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix it to `f64`.

pub mod baselines;
pub mod benchfn;
pub mod cmaes;
pub mod de;
pub mod env;
pub mod error;
pub mod linalg;
pub mod observe;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Function = benchfn::BenchmarkFunction<f64>;
pub type Trace = observe::RunTrace<f64>;
pub type Policy = policy::PolicyNet<f64>;
pub type Network = policy::Mlp<f64>;
pub type Checkpoint = policy::Checkpoint<f64>;
pub type Controller = env::Controller<f64>;
pub type Episode = env::Episode<f64>;
pub type RunResult = env::RunResult<f64>;
pub type Population = de::Population<f64>;
pub type CmaState = cmaes::CmaState<f64>;
