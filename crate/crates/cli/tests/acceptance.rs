//! Acceptance suite: one PASS/FAIL line per criterion on stderr.
//!
//! Criterion 7 trains a real policy and takes a few minutes per attempt.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use tempfile::TempDir;

use rlmeta::benchfn::lookup;
use rlmeta::env::{run_episode, run_test_protocol, Controller, RunSettings};
use rlmeta::observe::{inter_delta_f, intra_delta_f, intra_delta_x, GenerationRecord, RunTrace};
use rlmeta::policy::{gaussian_log_prob, Activation, Mlp, PolicyNet};
use rlmeta::ppo::{ppo_loss, train, BanditEnv, LossCoefficients, OptimizerKind, PpoConfig, Sample};
use rlmeta::rng::{normal, stream_rng};
use rlmeta::stats::{auc, win_probability};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn metric_oracles() -> Outcome {
    for c in [0.0f64, 2.5, -7.25, 1e6] {
        let got = auc(&[c; 50]).unwrap();
        check((got - 49.0 * c).abs() <= 1e-12 * (49.0 * c).abs().max(1.0), format!("constant {c}: {got}"))?;
    }
    for (n, slope) in [(10usize, 1.0), (50, 0.3), (2, 4.0)] {
        // Decreasing line f_k = slope·(n-1-k): area slope·(n-1)²/2.
        let curve: Vec<f64> = (0..n).map(|k| slope * (n - 1 - k) as f64).collect();
        let want = slope * ((n - 1) * (n - 1)) as f64 / 2.0;
        let got = auc(&curve).unwrap();
        check((got - want).abs() <= 1e-12 * want.max(1.0), format!("linear n={n}: {got} vs {want}"))?;
    }
    let mut rng = stream_rng(1, 0);
    for trial in 0..200 {
        let mut draw = || -> Vec<f64> {
            (0..50)
                .map(|_| {
                    let v: f64 = rng.random_range(-5.0..5.0);
                    if trial % 2 == 0 { v.round() } else { v }
                })
                .collect()
        };
        let (a, b) = (draw(), draw());
        let mut wins = 0usize;
        for x in &a {
            for y in &b {
                wins += usize::from(x < y);
            }
        }
        let want = wins as f64 / 2500.0;
        let got = win_probability(&a, &b).unwrap();
        check(got == want, format!("trial {trial}: {got} vs {want}"))?;
    }
    Ok("closed forms to 1e-12, 200/200 brute-force matches".into())
}

fn observation_bounds() -> Outcome {
    let g = 40;
    for seed in 0..1000 {
        let mut rng = stream_rng(seed, 9);
        let d = rng.random_range(1..6);
        let np = rng.random_range(1..8);
        let len = rng.random_range(1..60);
        let widths: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..20.0)).collect();
        let mut trace = RunTrace::new();
        for _ in 0..len {
            let genotypes: Vec<Vec<f64>> = (0..np)
                .map(|_| widths.iter().map(|w| rng.random_range(-w / 2.0..=w / 2.0)).collect())
                .collect();
            let fitnesses: Vec<f64> = (0..np)
                .map(|_| {
                    let m = 10f64.powf(rng.random_range(-8.0..12.0));
                    if rng.random_bool(0.3) { -m } else { m }
                })
                .collect();
            trace.push(GenerationRecord::from_population(&genotypes, &fitnesses, vec![]));
        }
        let inter = inter_delta_f(&trace, g);
        check(inter.iter().all(|&v| v > -1.0 && v < 1.0), format!("seed {seed}: inter Δf out of (-1,1)"))?;
        check(inter[(len - 1).min(g)..].iter().all(|&v| v == 0.0), format!("seed {seed}: inter Δf padding"))?;
        let intra = intra_delta_f(&trace, g);
        check(intra.iter().all(|&v| (0.0..1.0).contains(&v)), format!("seed {seed}: intra Δf out of [0,1)"))?;
        check(intra[len.min(g)..].iter().all(|&v| v == 0.0), format!("seed {seed}: intra Δf padding"))?;
        let ix = intra_delta_x(&trace, g, &widths);
        check(ix.iter().all(|&v| (0.0..=1.0).contains(&v)), format!("seed {seed}: intra ΔX out of [0,1]"))?;
        check(ix[2 * len.min(g)..].iter().all(|&v| v == 0.0), format!("seed {seed}: intra ΔX padding"))?;
    }
    Ok("1000 random traces in bounds with zero padding".into())
}

fn gradients() -> Outcome {
    let mut rng = stream_rng(31, 0);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for cfg in 0..100 {
        let obs = rng.random_range(1..4);
        let hid = rng.random_range(2..5);
        let act = rng.random_range(1..3);
        let mut policy = PolicyNet::new(Mlp::init(vec![obs, hid, act], Activation::Tanh, 1.0, 1.0, &mut rng));
        policy.log_std = (0..act).map(|_| rng.random_range(-1.0..0.5)).collect();
        let value = Mlp::init(vec![obs, hid, 1], Activation::Tanh, 1.0, 1.0, &mut rng);
        let samples: Vec<Sample<f64>> = (0..rng.random_range(1..8))
            .map(|_| {
                let observation: Vec<f64> = (0..obs).map(|_| normal(&mut rng)).collect();
                let mean = policy.mlp.forward(&observation).unwrap();
                let action: Vec<f64> = mean.iter().map(|m| m + normal::<f64, _>(&mut rng)).collect();
                let old_log_prob = gaussian_log_prob(&action, &mean, &policy.log_std) + 0.4 * normal::<f64, _>(&mut rng);
                Sample { observation, action, old_log_prob, advantage: normal(&mut rng), value_target: normal(&mut rng) }
            })
            .collect();
        let batch: Vec<&Sample<f64>> = samples.iter().collect();
        let coeffs = LossCoefficients { clip: 0.2, value: 0.5, entropy: 0.01 };
        let out = ppo_loss(&policy, &value, &batch, coeffs).unwrap();
        let np = policy.mlp.num_params();
        let loss = |p: &PolicyNet<f64>, v: &Mlp<f64>| ppo_loss(p, v, &batch, coeffs).unwrap().total;
        let mut compare = |analytic: f64, fd: f64, what: String| -> Result<(), String> {
            let scale = analytic.abs().max(fd.abs());
            let rel = (analytic - fd).abs() / scale.max(1e-4);
            worst = worst.max(rel);
            check(rel <= 1e-4, format!("config {cfg} {what}: {analytic} vs {fd}"))
        };
        for k in 0..policy.num_params() {
            let bumped = |d: f64| {
                let mut p = policy.clone();
                if k < np { p.mlp.params_mut()[k] += d } else { p.log_std[k - np] += d }
                loss(&p, &value)
            };
            compare(out.policy_grad[k], (bumped(h) - bumped(-h)) / (2.0 * h), format!("policy {k}"))?;
        }
        for k in 0..value.num_params() {
            let bumped = |d: f64| {
                let mut v = value.clone();
                v.params_mut()[k] += d;
                loss(&policy, &v)
            };
            compare(out.value_grad[k], (bumped(h) - bumped(-h)) / (2.0 * h), format!("value {k}"))?;
        }
    }
    Ok(format!("100 configurations, worst relative error {worst:.2e}"))
}

fn ppo_bandit() -> Outcome {
    let cfg = PpoConfig {
        horizon: 200,
        minibatch: 50,
        sgd_epochs: 10,
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-3,
        ..Default::default()
    };
    let mut means = Vec::new();
    for seed in 0..5 {
        let mut env = BanditEnv::new(0.7, (-2.0, 2.0));
        // 50 iterations of 200 one-step episodes.
        let out = train(&mut env, &cfg, 50 * 200, &mut stream_rng(seed, 1), |_, _, _| Ok(())).map_err(|e| e.to_string())?;
        check(out.log.len() == 50, format!("{} iterations", out.log.len()))?;
        means.push(out.policy.forward(&[1.0]).unwrap().0[0]);
    }
    let hits = means.iter().filter(|m| (*m - 0.7f64).abs() < 0.1).count();
    let detail = format!("{hits}/5 seeds within 0.1 of 0.7, means {means:.3?}");
    check(hits >= 4, detail.clone())?;
    Ok(detail)
}

fn engines() -> Outcome {
    let f = lookup::<f64>("Sphere", 10).unwrap();
    let s = RunSettings::default();
    let mut strict = 0;
    for seed in 0..100 {
        let ep = run_episode(&f, &Controller::FixedDe { f: 0.5, cr: 0.9 }, &s, &mut stream_rng(seed, 0))
            .map_err(|e| e.to_string())?;
        let c = ep.trace.best_fitness_curve();
        check(c.windows(2).all(|w| w[1] <= w[0]), format!("seed {seed}: envelope increased"))?;
        strict += usize::from(c[c.len() - 1] < c[0]);
    }
    check(strict == 100, format!("DE strictly improved in {strict}/100 runs"))?;
    let best = |ctl: Controller<f64>| -> Vec<f64> {
        run_test_protocol(&ctl, &f, &s, 1000, 50).unwrap().iter().map(|r| r.best_of_run).collect()
    };
    let p = win_probability(&best(Controller::Csa), &best(Controller::FixedSigma { sigma: 0.5 })).unwrap();
    check(p > 0.5, format!("CSA vs fixed sigma p = {p}"))?;
    Ok(format!("DE 100/100 strict improvement; CSA vs fixed sigma p = {p:.3}"))
}

fn protocol() -> Outcome {
    let s = RunSettings::default();
    for name in ["Sphere", "Rastrigin", "Schwefel"] {
        let f = lookup::<f64>(name, 10).unwrap();
        for ctl in [Controller::Jde, Controller::Ide, Controller::FixedDe { f: 0.5, cr: 0.9 }, Controller::Csa] {
            let res = run_test_protocol(&ctl, &f, &s, 1000, 50).map_err(|e| e.to_string())?;
            check(res.len() == 50, format!("{} on {name}: {} runs", ctl.name(), res.len()))?;
            for r in &res {
                check(r.episode.evaluations == 500, format!("{} on {name}: {} evaluations", ctl.name(), r.episode.evaluations))?;
            }
        }
    }
    Ok("50 runs of exactly 500 evaluations for 4 controllers on 3 functions".into())
}

fn rlmeta(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rlmeta"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("`rlmeta {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)),
    )
}

fn comparison_cell(path: &Path) -> Result<f64, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let rec = r.records().next().ok_or("empty comparison")?.map_err(|e| e.to_string())?;
    rec[2].parse().map_err(|e| format!("{e}"))
}

fn desk_training() -> Outcome {
    let base = include_str!("../../../configs/desk_smoke.toml");
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let mut tried = Vec::new();
    for seed in 0..4u64 {
        let cfg = base.replace("seed = 0\n", &format!("seed = {seed}\n"));
        check(cfg != base || seed == 0, "seed line not found in desk_smoke.toml")?;
        fs::write(tmp.path().join("cfg.toml"), cfg).map_err(|e| e.to_string())?;
        let start = Instant::now();
        rlmeta(tmp.path(), &["--config", "cfg.toml", "train"])?;
        rlmeta(
            tmp.path(),
            &[
                "--config", "cfg.toml", "compare", "--variant", "policy=results/desk_smoke/checkpoint.json",
                "--adaptation", "fixed", "--metric", "best", "--function", "Sphere:10",
            ],
        )?;
        let p = comparison_cell(&tmp.path().join("results/desk_smoke/comparison_best_vs_fixed.csv"))?;
        tried.push(format!("seed {seed}: p = {p:.3} ({:.0} s)", start.elapsed().as_secs_f64()));
        if p > 0.5 {
            return Ok(tried.join("; "));
        }
    }
    Err(tried.join("; "))
}

fn csv_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv" || e == "json") {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn reproducibility() -> Outcome {
    let cfg = r#"
name = "repro"
seed = 5
action = "de_normal"
episodes = 30
functions = ["Sphere:10", "Rastrigin:10"]
[ppo]
horizon = 300
minibatch = 60
sgd_epochs = 3
[test]
runs = 10
seed = 200
"#;
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let tmp = TempDir::new().map_err(|e| e.to_string())?;
        fs::write(tmp.path().join("cfg.toml"), cfg).map_err(|e| e.to_string())?;
        let base = ["--config", "cfg.toml", "--jobs", jobs];
        let steps: [&[&str]; 4] = [
            &["train"],
            &["evaluate", "--checkpoint", "results/repro/checkpoint.json"],
            &["evaluate", "--adaptation", "jde"],
            &["compare", "--variant", "checkpoint=results/repro/checkpoint.json", "--variant", "ide"],
        ];
        for rest in steps {
            rlmeta(tmp.path(), &[&base[..], rest].concat())?;
        }
        outputs.push(csv_files(&tmp.path().join("results")));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    check(a.len() > 20, format!("only {} output files", a.len()))?;
    check(a.keys().eq(b.keys()), "different output file sets")?;
    for (path, bytes) in a {
        check(&b[path] == bytes, format!("{} differs between runs", path.display()))?;
    }
    Ok(format!("{} CSV/JSON files byte-identical across two runs (1 and 4 workers)", a.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("metric oracles", metric_oracles),
        ("observation bounds", observation_bounds),
        ("gradient correctness", gradients),
        ("PPO bandit sanity", ppo_bandit),
        ("engine behaviour", engines),
        ("protocol fidelity", protocol),
        ("desk-scale training", desk_training),
        ("reproducibility", reproducibility),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => writeln!(err, "criterion {} {name}: PASS ({detail}) [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed.push(i + 1);
                writeln!(err, "criterion {} {name}: FAIL ({detail}) [{secs:.1} s]", i + 1)
            }
        }
        .unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
