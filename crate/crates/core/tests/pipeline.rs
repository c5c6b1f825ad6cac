use proptest::prelude::*;
use snc_cover::driver::{cheap_cover, partition_sets, solve, SolveConfig};
use snc_cover::instance::{gen_interval, gen_random, gen_vertex_cover, load, Instance, WeightLaw};
use snc_cover::oracles::{exact_opt, max_multiplicity, verify_cover, SearchLimits};
use snc_cover::snc::{min_tau, SncOracle};
use snc_cover::system::WeightedSetSystem;

fn law(i: u8) -> WeightLaw {
    [WeightLaw::Unit, WeightLaw::Uniform, WeightLaw::PowerLaw][i as usize % 3]
}

fn solve_auto(inst: &Instance, tau: usize, seed: u64) -> snc_cover::driver::Solution {
    let oracle = SncOracle::auto(&inst.system, inst.geometry.as_ref());
    solve(&inst.system, &oracle, SolveConfig { tau, seed, ..SolveConfig::default() }).unwrap()
}

#[test]
fn shipped_fixture_solves() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig1.json");
    let inst = load(path).unwrap();
    let sol = solve_auto(&inst, 1, 0);
    assert!(verify_cover(&inst.system, &sol.cover));
    assert_eq!(sol.weight, 3.0);
    assert_eq!(sol.reduced.layers.depth(), 4);
}

#[test]
fn vertex_cover_instances_with_their_own_tau() {
    for seed in 0..30 {
        let inst = gen_vertex_cover(7, 0.4, WeightLaw::Uniform, seed).unwrap();
        if inst.system.n() == 0 {
            continue;
        }
        let Some((tau, _)) = min_tau(&inst.system, 3, &SncOracle::exact()).unwrap() else { continue };
        let sol = solve_auto(&inst, tau, seed);
        assert!(verify_cover(&inst.system, &sol.cover));
        let opt = exact_opt(&inst.system, SearchLimits::default()).unwrap().opt_weight;
        assert!(sol.dual_objective() <= opt + 1e-6);
    }
}

#[test]
fn dropped_sets_never_matter() {
    // A huge set covering everything is above n·β and must not change OPT.
    for seed in 0..20 {
        let inst = gen_interval(10, 8, WeightLaw::Uniform, true, seed).unwrap();
        let sys = &inst.system;
        let mut sets = sys.sets().to_vec();
        let mut weights = sys.weights().to_vec();
        sets.push((0..sys.n()).collect());
        weights.push(1e6);
        let padded = WeightedSetSystem::new(sys.n(), sets, weights).unwrap();
        let a = exact_opt(sys, SearchLimits::default()).unwrap().opt_weight;
        let b = exact_opt(&padded, SearchLimits::default()).unwrap().opt_weight;
        assert_eq!(a, b);
        let sol = solve(&padded, &SncOracle::exact(), SolveConfig::default()).unwrap();
        assert!(sol.partition.dropped.contains(sys.m()));
        assert!(!sol.cover.contains(sys.m()));
    }
}

#[test]
fn cheap_cover_weight_bound() {
    let mut nonempty = 0;
    for seed in 0..500 {
        let mut inst = gen_random(30, 20, 3, WeightLaw::PowerLaw, seed).unwrap();
        // Spread weights over several orders of magnitude so some sets fall below βε/n.
        let weights: Vec<f64> = inst.system.weights().iter().enumerate().map(|(h, w)| w * 10f64.powi(-((h % 4) as i32))).collect();
        inst.system = WeightedSetSystem::new(30, inst.system.sets().to_vec(), weights).unwrap();
        let sys = &inst.system;
        let p = partition_sets(sys, 0.1).unwrap();
        let b1 = cheap_cover(sys, &p.cheap).unwrap();
        nonempty += usize::from(!b1.is_empty());
        let reach = sys.covered_elements(&p.cheap).unwrap().len() as f64;
        assert!(sys.total_weight(&b1) <= reach * p.beta * 0.1 / 30.0 + 1e-12);
        assert!(sys.total_weight(&b1) <= p.beta * 0.1 + 1e-12);
    }
    assert!(nonempty > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interval_pipeline_invariants(
        n in 4usize..30,
        extra in 0usize..10,
        w in 0u8..3,
        normalized in any::<bool>(),
        gen_seed in 0u64..10_000,
        seed in 0u64..1_000,
    ) {
        let inst = gen_interval(n, n / 2 + extra + 1, law(w), normalized, gen_seed).unwrap();
        let sys = &inst.system;
        let oracle = SncOracle::auto(sys, inst.geometry.as_ref());
        let Some((tau, _)) = min_tau(sys, 2, &oracle).unwrap() else { return Ok(()) };
        let sol = solve(sys, &oracle, SolveConfig { tau, seed, ..SolveConfig::default() }).unwrap();
        prop_assert!(verify_cover(sys, &sol.cover));
        prop_assert_eq!(&sol.cover, &sol.b1.union(&sol.b2));
        prop_assert!(sol.weight <= sys.total_weight(&sol.b1) + sol.reduced.system.total_weight(&sol.reduced.forward_cover) + 1e-9);
        prop_assert!(sys.total_weight(&sol.b1) <= sol.partition.beta * 0.1 + 1e-12);
        prop_assert_eq!(max_multiplicity(sys, &sol.cover, &sol.targets), sol.target_multiplicity);
        for r in &sol.reduced.deletion.layers {
            prop_assert!(r.assembled_multiplicity <= tau * tau);
            prop_assert!(r.output.is_subset(&r.assembled));
        }
        // Same seed, same answer.
        let again = solve(sys, &oracle, SolveConfig { tau, seed, ..SolveConfig::default() }).unwrap();
        prop_assert_eq!(sol, again);
    }
}
