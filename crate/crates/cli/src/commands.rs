use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use rlmeta::benchfn::{lookup_id, registry_list, FunctionId};
use rlmeta::env::{run_test_protocol, save_trace, trace_path, AdaptationEnv, PolicyController};
use rlmeta::policy::Checkpoint;
use rlmeta::ppo::{train, IterationStats};
use rlmeta::rng::stream_rng;
use rlmeta::stats::{build_comparison, Metric};
use rlmeta::{Controller, Error, RunResult};

use crate::config::ExperimentConfig;
use crate::{Adaptation, Cli, Command, CompareArgs, EvaluateArgs, TrainArgs};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_UNSTABLE: u8 = 4;
pub const EXIT_BUDGET: u8 = 5;

/// Marks an error as a configuration problem.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(e: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(ConfigError(format!("{e:#}")))
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        match cause.downcast_ref::<Error>() {
            Some(Error::Unstable { .. }) => return EXIT_UNSTABLE,
            Some(Error::BudgetExhausted { .. }) => return EXIT_BUDGET,
            Some(Error::UnknownFunction { .. } | Error::InvalidArgument(_)) => return EXIT_CONFIG,
            _ => {}
        }
    }
    EXIT_FAILURE
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(config_error)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.test.seed = s;
    }
    match &cli.command {
        Command::ListFunctions => list_functions(),
        Command::Train(args) => cmd_train(cli, cfg, args),
        Command::Evaluate(args) => cmd_evaluate(cli, cfg, args),
        Command::Compare(args) => cmd_compare(cli, cfg, args),
    }
}

fn list_functions() -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for id in registry_list() {
        match writeln!(out, "{},{}", id.name, id.dimension) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            r => r?,
        }
    }
    Ok(())
}

fn parse_functions(list: &[String]) -> anyhow::Result<Vec<FunctionId>> {
    list.iter()
        .map(|s| {
            let id: FunctionId = s.parse().map_err(config_error)?;
            lookup_id::<f64>(&id).map_err(config_error)?;
            Ok(id)
        })
        .collect()
}

fn thread_pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn stamp_config(cfg: &ExperimentConfig, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

fn write_checkpoint(ck: &Checkpoint<f64>, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(ck)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_checkpoint(path: &Path) -> anyhow::Result<Checkpoint<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ck: Checkpoint<f64> = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{}: not a valid checkpoint: {e}", path.display())))?;
    ck.policy_net().map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    Ok(ck)
}

fn log_row(w: &mut csv::Writer<File>, s: &IterationStats) -> anyhow::Result<()> {
    w.write_record([
        s.iteration.to_string(),
        s.episodes_done.to_string(),
        s.mean_return.to_string(),
        s.policy_loss.to_string(),
        s.value_loss.to_string(),
        s.entropy.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn cmd_train(cli: &Cli, mut cfg: ExperimentConfig, args: &TrainArgs) -> anyhow::Result<()> {
    if !args.functions.is_empty() {
        cfg.functions = args.functions.clone();
    }
    if let Some(e) = args.episodes {
        cfg.episodes = e;
    }
    if let Some(a) = args.action {
        cfg.action = a;
    }
    if let Some(r) = args.retries {
        cfg.retries = r;
    }
    cfg.validate().map_err(config_error)?;
    let ids = cfg.function_ids().map_err(config_error)?;
    let functions = ids.iter().map(lookup_id::<f64>).collect::<rlmeta::Result<Vec<_>>>()?;

    let dir = cli.out.join(&cfg.name);
    stamp_config(&cfg, &dir)?;
    let mut attempts = csv::Writer::from_path(dir.join("attempts.csv"))?;
    attempts.write_record(["attempt", "seed", "outcome", "iterations"])?;
    attempts.flush()?;

    let total = cfg.retries + 1;
    for attempt in 1..=total {
        let seed = cfg.seed + (attempt as u64 - 1);
        log::info!("training attempt {attempt}/{total} with seed {seed}");
        let mut ppo = cfg.ppo.clone();
        if attempt <= args.inject_nan_attempts {
            ppo.inject_nan_at_iteration = Some(0);
        }
        let mut env = AdaptationEnv::new(functions.clone(), cfg.action, cfg.observation, cfg.run)?;
        let log_path = dir.join("training_log.csv");
        let mut log = csv::Writer::from_path(&log_path)?;
        log.write_record(["iteration", "episodes_done", "mean_return", "policy_loss", "value_loss", "entropy"])?;
        let mut done = 0usize;
        let mut rng = stream_rng(seed, 1);
        let result = train(&mut env, &ppo, cfg.episodes, &mut rng, |stats, policy, value| {
            log_row(&mut log, stats).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            done = stats.iteration + 1;
            if done.is_multiple_of(10) {
                let ck = Checkpoint::new(policy, Some(value), cfg.action, cfg.observation);
                write_checkpoint(&ck, &dir.join("checkpoints").join(format!("iter_{done:04}.json")))
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            }
            Ok(())
        });
        log.flush()?;
        drop(log);
        match result {
            Ok(outcome) => {
                attempts.write_record([attempt.to_string(), seed.to_string(), "ok".into(), done.to_string()])?;
                attempts.flush()?;
                let ck = Checkpoint::new(&outcome.policy, Some(&outcome.value), cfg.action, cfg.observation);
                write_checkpoint(&ck, &dir.join("checkpoint.json"))?;
                let mut ep = csv::Writer::from_path(dir.join("episodes.csv"))?;
                ep.write_record(["episode", "function", "return"])?;
                for e in &outcome.episodes {
                    ep.write_record([
                        e.episode.to_string(),
                        e.label.clone().unwrap_or_default(),
                        e.episode_return.to_string(),
                    ])?;
                }
                ep.flush()?;
                log::info!("wrote {}", dir.join("checkpoint.json").display());
                return Ok(());
            }
            Err(Error::Unstable { iteration, reason }) => {
                log::warn!("attempt {attempt} unstable at iteration {iteration}: {reason}");
                attempts.write_record([attempt.to_string(), seed.to_string(), "unstable".into(), done.to_string()])?;
                attempts.flush()?;
                fs::rename(&log_path, dir.join(format!("training_log.attempt{attempt}.csv")))?;
                if attempt == total {
                    return Err(Error::Unstable { iteration, reason })
                        .with_context(|| format!("all {total} training attempts were unstable"));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("loop returns on the last attempt")
}

/// A controller ready to run, plus the label of its result directory.
struct Variant {
    name: String,
    controller: Controller,
}

fn baseline(adaptation: Adaptation, cfg: &ExperimentConfig) -> anyhow::Result<Controller> {
    Ok(match adaptation {
        Adaptation::Csa => Controller::Csa,
        Adaptation::Ide => Controller::Ide,
        Adaptation::Jde => Controller::Jde,
        Adaptation::Fixed => match cfg.algorithm() {
            rlmeta::env::Algorithm::De => Controller::FixedDe { f: cfg.fixed.f, cr: cfg.fixed.cr },
            rlmeta::env::Algorithm::Cmaes => Controller::FixedSigma { sigma: cfg.fixed.sigma },
        },
        Adaptation::Policy => bail!(config_error("the policy adaptation needs a checkpoint")),
    })
}

fn policy_variant(path: &Path, cfg: &ExperimentConfig, strict: bool) -> anyhow::Result<Controller> {
    let ck = read_checkpoint(path)?;
    if strict && (ck.action != cfg.action || ck.observation != cfg.observation) {
        return Err(config_error(format!(
            "{} was trained with action `{}` and {:?}, but the config asks for `{}` and {:?}",
            path.display(),
            ck.action.name(),
            ck.observation,
            cfg.action.name(),
            cfg.observation
        )));
    }
    Ok(Controller::Policy(PolicyController {
        net: ck.policy_net()?,
        kind: ck.action,
        observation: ck.observation,
        stochastic: false,
    }))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "policy".into())
}

fn run_protocol(
    controller: &Controller,
    id: &FunctionId,
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
) -> anyhow::Result<Vec<RunResult>> {
    let f = lookup_id::<f64>(id)?;
    Ok(pool.install(|| run_test_protocol(controller, &f, &cfg.run, cfg.test.seed, cfg.test.runs))?)
}

fn write_metrics(results: &[RunResult], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["run", "seed", "auc", "best_of_run"])?;
    for r in results {
        w.write_record([r.run.to_string(), r.seed.to_string(), r.auc.to_string(), r.best_of_run.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_evaluate(cli: &Cli, mut cfg: ExperimentConfig, args: &EvaluateArgs) -> anyhow::Result<()> {
    if let Some(r) = args.runs {
        cfg.test.runs = r;
    }
    if !args.functions.is_empty() {
        cfg.functions = args.functions.clone();
    }
    cfg.validate().map_err(config_error)?;
    let ids = parse_functions(&cfg.functions)?;
    let ids = if ids.is_empty() { registry_list() } else { ids };
    let variant = match (args.adaptation, &args.checkpoint) {
        (Adaptation::Policy, Some(p)) => Variant {
            name: args.label.clone().unwrap_or_else(|| stem(p)),
            controller: policy_variant(p, &cfg, cli.config.is_some())?,
        },
        (Adaptation::Policy, None) => return Err(config_error("--adaptation policy needs --checkpoint")),
        (a, _) => Variant {
            name: args.label.clone().unwrap_or_else(|| a.name().to_string()),
            controller: baseline(a, &cfg)?,
        },
    };
    let pool = thread_pool(cli.jobs)?;
    let root = cli.out.join(&cfg.name);
    stamp_config(&cfg, &root.join(&variant.name))?;
    for id in &ids {
        let results = run_protocol(&variant.controller, id, &cfg, &pool)?;
        let dir = root.join(&variant.name).join(id.slug());
        fs::create_dir_all(&dir)?;
        if cfg.test.write_traces {
            for r in &results {
                save_trace(&r.episode.trace, &trace_path(&root, &variant.name, id, r.seed))?;
            }
        }
        let path = dir.join("metrics.csv");
        write_metrics(&results, &path)?;
        log::info!("{} on {id}: wrote {}", variant.name, path.display());
    }
    Ok(())
}

fn parse_variant(spec: &str, cfg: &ExperimentConfig) -> anyhow::Result<Variant> {
    let (name, target) = match spec.split_once('=') {
        Some((n, t)) => (Some(n.to_string()), t),
        None => (None, spec),
    };
    if let Ok(a) = <Adaptation as clap::ValueEnum>::from_str(target, true) {
        if a != Adaptation::Policy {
            return Ok(Variant { name: name.unwrap_or_else(|| a.name().into()), controller: baseline(a, cfg)? });
        }
    }
    let path = PathBuf::from(target);
    Ok(Variant { name: name.unwrap_or_else(|| stem(&path)), controller: policy_variant(&path, cfg, false)? })
}

fn read_metric(path: &Path, metric: Metric) -> anyhow::Result<Option<Vec<f64>>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(path)?;
    let col = match metric {
        Metric::Auc => "auc",
        Metric::Best => "best_of_run",
    };
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == col)
        .with_context(|| format!("{} has no `{col}` column", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        out.push(rec?[idx].parse::<f64>()?);
    }
    Ok(Some(out))
}

fn metric_of(results: &[RunResult], metric: Metric) -> Vec<f64> {
    results
        .iter()
        .map(|r| match metric {
            Metric::Auc => r.auc,
            Metric::Best => r.best_of_run,
        })
        .collect()
}

fn cmd_compare(cli: &Cli, mut cfg: ExperimentConfig, args: &CompareArgs) -> anyhow::Result<()> {
    if let Some(r) = args.runs {
        cfg.test.runs = r;
    }
    if !args.functions.is_empty() {
        cfg.functions = args.functions.clone();
    }
    cfg.validate().map_err(config_error)?;
    let ids = cfg.function_ids().map_err(config_error)?;
    let columns: Vec<String> = ids.iter().map(FunctionId::slug).collect();
    let opponent_name = match (args.adaptation, &args.opponent_checkpoint) {
        (Adaptation::Policy, Some(p)) => stem(p),
        (a, _) => a.name().to_string(),
    };

    let mut names = Vec::new();
    let mut variant_metrics = Vec::new();
    let opponent_metrics: Vec<Option<Vec<f64>>>;

    if let Some(mdir) = &args.metrics_dir {
        for spec in &args.variants {
            names.push(spec.split_once('=').map(|(n, _)| n.to_string()).unwrap_or_else(|| spec.clone()));
        }
        names.extend(args.checkpoints.iter().map(|p| stem(p)));
        if names.is_empty() {
            return Err(config_error("compare needs at least one --variant or --checkpoint"));
        }
        for n in &names {
            let row = ids
                .iter()
                .map(|id| read_metric(&mdir.join(n).join(id.slug()).join("metrics.csv"), args.metric))
                .collect::<anyhow::Result<Vec<_>>>()?;
            variant_metrics.push(row);
        }
        opponent_metrics = ids
            .iter()
            .map(|id| read_metric(&mdir.join(&opponent_name).join(id.slug()).join("metrics.csv"), args.metric))
            .collect::<anyhow::Result<Vec<_>>>()?;
    } else {
        let mut variants = args.variants.iter().map(|s| parse_variant(s, &cfg)).collect::<anyhow::Result<Vec<_>>>()?;
        for p in &args.checkpoints {
            variants.push(Variant { name: stem(p), controller: policy_variant(p, &cfg, false)? });
        }
        if variants.is_empty() {
            return Err(config_error("compare needs at least one --variant or --checkpoint"));
        }
        let opponent = match (args.adaptation, &args.opponent_checkpoint) {
            (Adaptation::Policy, Some(p)) => policy_variant(p, &cfg, false)?,
            (Adaptation::Policy, None) => {
                return Err(config_error("--adaptation policy needs --opponent-checkpoint"))
            }
            (a, _) => baseline(a, &cfg)?,
        };
        let pool = thread_pool(cli.jobs)?;
        opponent_metrics = ids
            .iter()
            .map(|id| Ok(Some(metric_of(&run_protocol(&opponent, id, &cfg, &pool)?, args.metric))))
            .collect::<anyhow::Result<Vec<_>>>()?;
        for v in &variants {
            let row = ids
                .iter()
                .map(|id| Ok(Some(metric_of(&run_protocol(&v.controller, id, &cfg, &pool)?, args.metric))))
                .collect::<anyhow::Result<Vec<_>>>()?;
            names.push(v.name.clone());
            variant_metrics.push(row);
        }
    }

    let matrix = build_comparison(args.metric, &opponent_name, &names, &columns, &variant_metrics, &opponent_metrics)?;
    let dir = cli.out.join(&cfg.name);
    stamp_config(&cfg, &dir)?;
    let base = format!("comparison_{}_vs_{}", args.metric.name(), opponent_name);
    matrix.save(&dir.join(format!("{base}.csv")), &dir.join(format!("{base}.json")))?;
    for (n, r) in names.iter().zip(matrix.ratios()) {
        match r {
            Some(r) => log::info!("{n} vs {opponent_name}: ratio {r:.3}"),
            None => log::info!("{n} vs {opponent_name}: ratio n/a"),
        }
    }
    Ok(())
}
