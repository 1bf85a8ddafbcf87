mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ucpd::bnb::{solve_ilp, BnbOptions, IlpStatus};
use ucpd::colgen::{
    cg_solve, compare_bounds, integer_rmp_heuristic, CgConfig, CgStatus, Column, CompareConfig, IntegerRmpStatus,
};
use ucpd::compact::{build_compact, solve_compact_relaxation};
use ucpd::lp::LpStatus;
use ucpd::model::{generate_instance, DemandProfile, GeneratorConfig, Plan};
use ucpd::subproblem::price_unit_dp;

#[test]
fn cg_bound_equals_explicit_extended_relaxation() {
    for seed in 0..6 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instance = common::random_instance(&mut rng, 2, 8, 3);
        let oracle = common::extended_lp(&instance).expect("instance is feasible");
        let cg = cg_solve(&instance, &CgConfig::default()).unwrap();
        assert_eq!(cg.status, CgStatus::Converged);
        assert!(
            common::rel_diff(cg.lower_bound, oracle) <= 1e-6,
            "seed {seed}: cg {} extended {oracle}",
            cg.lower_bound
        );
    }
}

#[test]
fn converged_duals_price_nothing_negative() {
    let instance = generate_instance(&GeneratorConfig::new(5, 4, 12, 3)).unwrap();
    let cg = cg_solve(&instance, &CgConfig::default()).unwrap();
    assert_eq!(cg.status, CgStatus::Converged);
    let duals = cg.dual_history.last().unwrap();
    for (u, unit) in instance.units.iter().enumerate() {
        let best = price_unit_dp(unit, &duals.unit(u), instance.horizon).unwrap();
        assert!(best.reduced_cost >= -1e-6, "unit {u}: {}", best.reduced_cost);
    }
    for w in cg.log.windows(2) {
        assert!(w[1].rmp_value <= w[0].rmp_value + 1e-7 * (1.0 + w[0].rmp_value.abs()));
    }
}

#[test]
fn bound_chain_on_small_instances() {
    for seed in 10..16 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_units = 2 + seed as usize % 2;
        let instance = common::random_instance(&mut rng, n_units, 6, 2);
        let (optimum, _) = common::global_optimum(&instance).unwrap();
        let report = compare_bounds(&instance, &CompareConfig::default()).unwrap().unwrap();
        let tol = 1e-6 * (1.0 + optimum.abs());
        assert!(report.compact_lp <= report.cg_bound + tol, "seed {seed}: {report:?}");
        assert!(report.cg_bound <= optimum + tol, "seed {seed}: {report:?} optimum {optimum}");
        assert!(report.compact_ilp_proved);
        assert!((report.compact_ilp.unwrap() - optimum).abs() <= tol, "seed {seed}: {report:?} optimum {optimum}");
    }
}

#[test]
fn integer_master_never_beats_the_bound_nor_a_pooled_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let instance = common::random_instance(&mut rng, 3, 6, 2);
    let (optimum, best) = common::global_optimum(&instance).unwrap();
    let cg = cg_solve(&instance, &CgConfig::default()).unwrap();
    let mut pool = cg.pool.clone();
    for (u, unit) in instance.units.iter().enumerate() {
        let column = Column::new(&instance, u, Plan::new(unit.id.clone(), best[u].clone()));
        if !pool.iter().any(|c| c.unit == u && c.plan == column.plan) {
            pool.push(column);
        }
    }
    let out = integer_rmp_heuristic(&pool, &instance, &BnbOptions::default()).unwrap();
    assert_eq!(out.status, IntegerRmpStatus::Feasible);
    let tol = 1e-6 * (1.0 + optimum);
    assert!(out.upper_bound <= optimum + tol);
    assert!(out.upper_bound >= cg.lower_bound - tol);
    let total: f64 = instance.units.iter().zip(&out.plans).map(|(u, p)| common::cost(u, &p.points)).sum();
    assert!((total - out.upper_bound).abs() <= tol);
    for (u, p) in instance.units.iter().zip(&out.plans) {
        assert!(common::feasible(u, &p.points));
    }
}

#[test]
fn zero_demand_bounds_vanish() {
    let mut cfg = GeneratorConfig::new(3, 4, 10, 2);
    cfg.profile = DemandProfile::Zero;
    let mut instance = generate_instance(&cfg).unwrap();
    for u in &mut instance.units {
        u.init = ucpd::model::InitialCondition::offline(5);
    }
    let report = compare_bounds(&instance, &CompareConfig::default()).unwrap().unwrap();
    assert_eq!(report.compact_lp.abs() <= 1e-9, true, "{report:?}");
    assert!(report.cg_bound.abs() <= 1e-9);
    assert!(report.compact_ilp.unwrap().abs() <= 1e-9);
    let cg = cg_solve(&instance, &CgConfig::default()).unwrap();
    let out = integer_rmp_heuristic(&cg.pool, &instance, &BnbOptions::default()).unwrap();
    assert_eq!(out.status, IntegerRmpStatus::Feasible);
    assert!(out.upper_bound.abs() <= 1e-9);
    assert!(out.plans.iter().all(|p| p.points.iter().all(|&q| q == 0)));
}

#[test]
fn purging_leaves_the_bound_unchanged() {
    for seed in 20..24 {
        let instance = generate_instance(&GeneratorConfig::new(seed, 5, 16, 3)).unwrap();
        let with = cg_solve(&instance, &CgConfig::default()).unwrap();
        let without = cg_solve(
            &instance,
            &CgConfig {
                purge: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(common::rel_diff(with.lower_bound, without.lower_bound) <= 1e-6);
    }
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let instance = generate_instance(&GeneratorConfig::new(8, 6, 16, 3)).unwrap();
    let run = |threads| {
        cg_solve(
            &instance,
            &CgConfig {
                threads: Some(threads),
                ..Default::default()
            },
        )
        .unwrap()
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
    assert_eq!(a.log_csv(false), b.log_csv(false));
}

#[test]
fn compact_ilp_matches_enumeration() {
    for seed in 30..34 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let instance = common::random_instance(&mut rng, 2, 8, 2);
        let (optimum, _) = common::global_optimum(&instance).unwrap();
        let m = build_compact(&instance);
        let lp = solve_compact_relaxation(&instance, &m).unwrap();
        assert_eq!(lp.status, LpStatus::Optimal);
        let r = solve_ilp(&m.lp, &BnbOptions::default()).unwrap();
        assert_eq!(r.status, IlpStatus::Optimal);
        assert!(common::rel_diff(r.objective, optimum) <= 1e-6, "seed {seed}: {} vs {optimum}", r.objective);
        assert!(lp.objective <= r.objective + 1e-6 * (1.0 + optimum));
    }
}
