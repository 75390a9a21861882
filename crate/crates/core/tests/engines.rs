//! DE and CMA-ES behaviour on the benchmark set.

use rlmeta::benchfn::{lookup, registry_list, lookup_id, Objective};
use rlmeta::cmaes::{cma_generation, CmaState};
use rlmeta::de::{de_generation, init_population, DeParams};
use rlmeta::env::{run_episode, run_test_protocol, Controller, RunSettings};
use rlmeta::rng::stream_rng;
use rlmeta::stats::win_probability;
use rlmeta::Error;

#[test]
fn de_improves_sphere_in_every_run() {
    let f = lookup::<f64>("Sphere", 10).unwrap();
    let settings = RunSettings::default();
    let ctl = Controller::FixedDe { f: 0.5, cr: 0.9 };
    let mut strict = 0;
    for seed in 0..100 {
        let ep = run_episode(&f, &ctl, &settings, &mut stream_rng(seed, 0)).unwrap();
        assert_eq!(ep.evaluations, 500);
        let curve = ep.trace.best_fitness_curve();
        assert_eq!(curve.len(), 50);
        // Greedy replacement never loses the best individual.
        assert!(curve.windows(2).all(|w| w[1] <= w[0]), "seed {seed}");
        if curve[49] < curve[0] {
            strict += 1;
        }
    }
    assert_eq!(strict, 100);
}

#[test]
fn de_generation_is_all_or_nothing_on_budget() {
    let f = lookup::<f64>("Rastrigin", 10).unwrap();
    let mut obj = Objective::new(&f, 15);
    let mut rng = stream_rng(3, 0);
    let pop = init_population(&mut obj, 10, &mut rng).unwrap();
    let params = DeParams::broadcast(0.5, 0.9, 10);
    let err = de_generation(&pop, &params, &mut obj, &mut rng).unwrap_err();
    assert!(matches!(err, Error::BudgetExhausted { max: 15 }));
    assert_eq!(obj.budget().used, 10);
}

#[test]
fn de_trials_stay_in_bounds_on_every_function() {
    for id in registry_list() {
        let f = lookup_id::<f64>(&id).unwrap();
        let mut obj = Objective::new(&f, 200);
        let mut rng = stream_rng(11, 0);
        let mut pop = init_population(&mut obj, 10, &mut rng).unwrap();
        // F = 2 pushes mutants well outside the box.
        let params = DeParams::broadcast(2.0, 1.0, 10);
        for _ in 0..5 {
            pop = de_generation(&pop, &params, &mut obj, &mut rng).unwrap().population;
            for g in &pop.genotypes {
                assert!(g.iter().zip(f.bounds()).all(|(v, (lo, hi))| lo <= v && v <= hi), "{id}");
            }
        }
    }
}

#[test]
fn cma_generation_charges_lambda_and_keeps_covariance_spd() {
    let f = lookup::<f64>("Ellipsoid", 10).unwrap();
    let mut obj = Objective::new(&f, 500);
    let mut rng = stream_rng(4, 0);
    let mut st = CmaState::new(vec![1.0; 10], 0.5, 10).unwrap();
    for g in 1..=50 {
        let step = cma_generation(&mut st, 0.5, &mut obj, &mut rng).unwrap();
        assert_eq!(step.points.len(), 10);
        assert_eq!(obj.budget().used, 10 * g);
        assert!(st.eigenvalues().iter().all(|&e| e > 0.0));
        let c = &st.covariance;
        for i in 0..10 {
            for j in 0..10 {
                assert!((c[i][j] - c[j][i]).abs() <= 1e-12 * c[i][i].abs().max(1.0));
            }
        }
    }
    assert!(matches!(cma_generation(&mut st, 0.5, &mut obj, &mut rng), Err(Error::BudgetExhausted { .. })));
}

#[test]
fn csa_beats_fixed_sigma_on_sphere() {
    let f = lookup::<f64>("Sphere", 10).unwrap();
    let s = RunSettings::default();
    let csa = run_test_protocol(&Controller::Csa, &f, &s, 1000, 50).unwrap();
    let fixed = run_test_protocol(&Controller::FixedSigma { sigma: 0.5 }, &f, &s, 1000, 50).unwrap();
    let a: Vec<f64> = csa.iter().map(|r| r.best_of_run).collect();
    let b: Vec<f64> = fixed.iter().map(|r| r.best_of_run).collect();
    assert!(win_probability(&a, &b).unwrap() > 0.5);
}
