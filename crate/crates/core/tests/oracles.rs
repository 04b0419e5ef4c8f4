mod common;

use num_traits::{One, Zero};
use omega_cop::eval::{evaluate_mixture, monte_carlo};
use omega_cop::fixtures;
use omega_cop::graph::decompose;
use omega_cop::lagrange::solve_weighted;
use omega_cop::lp::{build_lp, solve};
use omega_cop::rational::{rat, to_f64};
use omega_cop::synthesis::{plan, single_mec_policy};
use omega_cop::{Error, Rat};

#[test]
fn lp_value_does_not_depend_on_state_order() {
    for seed in 0..60u64 {
        let p = rat((seed % 5) as i64, 4);
        let value = |perm| {
            let product = common::random_product_relabeled(seed, 6, perm);
            let dec = decompose(&product);
            match solve(&build_lp(&dec, &product, &p).unwrap()) {
                Ok(s) => Some(s.value),
                Err(Error::Infeasible) => None,
                Err(e) => panic!("seed {seed}: {e}"),
            }
        };
        let base = value(None);
        for ps in 0..3 {
            assert_eq!(value(Some(ps)), base, "seed {seed} permutation {ps}");
        }
    }
}

#[test]
fn monte_carlo_interval_covers_exact_values() {
    for f in [fixtures::fig1(), fixtures::fig3(), fixtures::fig2()] {
        let pl = plan(&f.product, &f.threshold).unwrap();
        let exact = evaluate_mixture(&f.product, &pl.policy).unwrap();
        let mc = monte_carlo(&f.product, &pl.policy, 4000, 400, 7).unwrap();
        // allow a little slack beyond the 95% interval so the test is not flaky
        for (est, val) in [
            (mc.objective, &exact.objective),
            (mc.constraint, &exact.constraint),
        ] {
            let x = to_f64(val);
            assert!(
                (est.mean - x).abs() <= 1.5 * est.half_width + 1e-3,
                "{}: {est:?} vs {x}",
                f.name
            );
        }
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let f = fixtures::fig1();
    let pl = plan(&f.product, &f.threshold).unwrap();
    let a = monte_carlo(&f.product, &pl.policy, 500, 100, 3).unwrap();
    let b = monte_carlo(&f.product, &pl.policy, 500, 100, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn weighted_optimum_matches_best_deterministic_policy() {
    let lambdas = [rat(0, 1), rat(1, 3), rat(1, 1), rat(5, 2)];
    for seed in 0..40u64 {
        let product = common::random_product(seed, 5);
        let dec = decompose(&product);
        let vals: Vec<(Rat, Rat)> = common::all_deterministic(&product)
            .iter()
            .map(|pi| common::values(&product, pi))
            .collect();
        for lambda in &lambdas {
            let sol = solve_weighted(&product, &dec, lambda).unwrap();
            let best = vals.iter().map(|(o, c)| o + lambda * c).max().unwrap();
            assert_eq!(sol.value, best, "seed {seed} lambda {lambda}");
            let (o, c) = common::values(&product, &sol.policy);
            assert_eq!(o + lambda * c, sol.value, "seed {seed} lambda {lambda}");
        }
    }
}

#[test]
fn threshold_one_gives_almost_sure_constraint() {
    for name in fixtures::NAMES {
        let f = fixtures::by_name(name).unwrap();
        match plan(&f.product, &Rat::one()) {
            Ok(pl) => {
                let r = evaluate_mixture(&f.product, &pl.policy).unwrap();
                assert!(r.constraint.is_one(), "{name}");
                assert_eq!(r.objective, pl.solution.value, "{name}");
            }
            Err(Error::Infeasible) => {}
            Err(e) => panic!("{name}: {e}"),
        }
    }
}

#[test]
fn threshold_zero_maximises_objective_alone() {
    for seed in 0..40u64 {
        let product = common::random_product(seed, 5);
        let pl = plan(&product, &Rat::zero()).unwrap();
        let best = common::all_deterministic(&product)
            .iter()
            .map(|pi| common::values(&product, pi).0)
            .max()
            .unwrap();
        assert_eq!(pl.solution.value, best, "seed {seed}");
    }
}

#[test]
fn single_mec_shortcut_agrees_with_lp() {
    let f = fixtures::single_mec();
    let dec = decompose(&f.product);
    for k in 0..=10 {
        let p = rat(k, 10);
        let lp = build_lp(&dec, &f.product, &p).unwrap();
        let sol = solve(&lp);
        let shortcut = single_mec_policy(&dec, &f.product, &p).expect("one MEC");
        match (sol, shortcut) {
            (Ok(sol), Ok(m)) => {
                let r = evaluate_mixture(&f.product, &m).unwrap();
                assert_eq!(r.objective, sol.value, "p = {p}");
                assert!(r.constraint >= p);
            }
            (Err(Error::Infeasible), Err(Error::Infeasible)) => {}
            (a, b) => panic!("p = {p}: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn random_products_plan_soundly_across_thresholds() {
    for seed in 100..140u64 {
        let product = common::random_product(seed, 7);
        let mut last: Option<Rat> = None;
        for k in (0..=8).rev() {
            let p = rat(k, 8);
            let value = match plan(&product, &p) {
                Ok(pl) => {
                    let r = evaluate_mixture(&product, &pl.policy).unwrap();
                    assert!(r.constraint >= p, "seed {seed} p {p}");
                    assert_eq!(r.objective, pl.solution.value, "seed {seed} p {p}");
                    Some(pl.solution.value)
                }
                Err(Error::Infeasible) => None,
                Err(e) => panic!("seed {seed}: {e}"),
            };
            // lowering the threshold never lowers the optimum
            if let (Some(prev), Some(v)) = (&last, &value) {
                assert!(v >= prev, "seed {seed} p {p}");
            }
            if value.is_some() {
                last = value;
            } else {
                assert!(
                    last.is_none(),
                    "seed {seed}: infeasible below a feasible threshold"
                );
            }
        }
    }
}
