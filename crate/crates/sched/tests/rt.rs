mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windflex_sched::{
    build_rt_dispatch, build_scuc, extract_redispatch, ContingencyRule, DaSolution, GridCase, HighsBackend,
    ReservePolicy, RtPenalties, RtSolution, ScucOptions, SolveLimits,
};

fn da_of(case: &GridCase) -> DaSolution {
    let opts = ScucOptions {
        contingency: ContingencyRule::Off,
        ..Default::default()
    };
    build_scuc(case, None, ReservePolicy::None, &opts).unwrap().solve(&HighsBackend, &tight()).unwrap()
}

fn rt_of(case: &GridCase, da: &DaSolution, pen: &RtPenalties) -> RtSolution {
    build_rt_dispatch(case, da, pen).unwrap().solve(&HighsBackend, &SolveLimits::default()).unwrap()
}

fn wind_case(da: f64, rt: f64) -> GridCase {
    single_bus(vec![unit("g", "b", 0.0, 200.0, 20.0)], vec![100.0], Some((vec![da], vec![rt])))
}

#[test]
fn no_deviation_means_no_balancing() {
    let case = wind_case(30.0, 30.0);
    let da = da_of(&case);
    let rt = rt_of(&case, &da, &RtPenalties::default());
    let c = rt.total_costs();
    assert_eq!((c.load_shedding, c.wind_spillage), (0.0, 0.0));
    assert!(c.redispatch.abs() < 1e-9);
    assert!((c.generation - da.costs.generation()).abs() < 1e-6);
}

#[test]
fn shortfall_splits_into_ranges() {
    let case = wind_case(20.0, 10.0);
    let mut da = da_of(&case);
    da.reserve_up[0][0] = 6.0;
    let pen = RtPenalties::default();
    let rt = rt_of(&case, &da, &pen);
    assert!((rt.range_i(0, 0) - 6.0).abs() < 1e-9);
    assert!((rt.range_ii(0, 0) - 4.0).abs() < 1e-9);
    assert!((rt.total_costs().redispatch - (6.0 * pen.redispatch_i + 4.0 * pen.redispatch_ii)).abs() < 1e-9);
    let r = extract_redispatch(&da, &rt).unwrap()[0][0];
    assert!((r.total - 10.0).abs() < 1e-9 && (r.range_i - 6.0).abs() < 1e-9 && (r.range_ii - 4.0).abs() < 1e-9);
}

#[test]
fn surplus_beyond_downward_flexibility_is_spilled() {
    // the unit sits at p_min, so extra wind has nowhere to go
    let case = single_bus(vec![unit("g", "b", 50.0, 200.0, 20.0)], vec![100.0], Some((vec![50.0], vec![80.0])));
    let da = da_of(&case);
    let rt = rt_of(&case, &da, &RtPenalties::default());
    assert!((rt.spill[0][0] - 30.0).abs() < 1e-9);
    assert!((rt.total_costs().wind_spillage - 3000.0).abs() < 1e-6);
}

#[test]
fn undeliverable_load_is_shed() {
    let mut case = single_bus(vec![unit("g", "b", 0.0, 100.0, 20.0)], vec![90.0], None);
    case.loads[0].rt = vec![115.0];
    let da = da_of(&case);
    let rt = rt_of(&case, &da, &RtPenalties::default());
    assert!((rt.shed[0][0] - 15.0).abs() < 1e-9);
    assert!((rt.dispatch[0][0] - 100.0).abs() < 1e-9);
}

#[test]
fn penalty_order_is_checked() {
    let case = wind_case(20.0, 20.0);
    let da = da_of(&case);
    let bad = RtPenalties {
        redispatch_i: 9.0,
        ..Default::default()
    };
    assert!(build_rt_dispatch(&case, &da, &bad).is_err());
}

#[test]
fn free_redispatch_and_equal_inputs_reproduce_da_generation_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 5 {
        let mut case = random_case(&mut rng, 3, 3, 3);
        for d in &mut case.loads {
            d.rt = d.da.clone();
        }
        for w in &mut case.wind_farms {
            w.rt = w.da.clone();
        }
        case.contingency_fraction = 0.0;
        case.load_extent = 0.0;
        let opts = ScucOptions {
            contingency: ContingencyRule::Off,
            ..Default::default()
        };
        let Ok(da) = build_scuc(&case, None, ReservePolicy::None, &opts).unwrap().solve(&HighsBackend, &tight()) else {
            continue;
        };
        // free shedding would undercut generation, so only redispatch is free
        let zero = RtPenalties {
            redispatch_i: 0.0,
            redispatch_ii: 0.0,
            ..Default::default()
        };
        let rt = rt_of(&case, &da, &zero);
        assert!((rt.objective - da.costs.generation()).abs() < 1e-6 * da.costs.generation().max(1.0));
        checked += 1;
    }
}

#[test]
fn random_instances_reconcile_and_satisfy_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 10 {
        let case = random_case(&mut rng, 3, 3, 4);
        let policy = ReservePolicy::ALL[rng.gen_range(0..4)];
        let reserve = random_reserve(&mut rng, &case, policy);
        let Ok(da) = build_scuc(&case, Some(&reserve), policy, &Default::default())
            .unwrap()
            .solve(&HighsBackend, &SolveLimits::default())
        else {
            continue;
        };
        let Ok(rt) = build_rt_dispatch(&case, &da, &RtPenalties::default())
            .unwrap()
            .solve(&HighsBackend, &SolveLimits::default())
        else {
            continue;
        };
        let scale = rt.objective.abs().max(1.0);
        assert!((rt.objective - rt.dual_objective.unwrap()).abs() <= 1e-6 * scale, "{} vs {:?}", rt.objective, rt.dual_objective);
        assert!((rt.total_costs().total() - rt.objective).abs() <= 1e-6 * scale);
        let post = extract_redispatch(&da, &rt).unwrap();
        for (g, row) in post.iter().enumerate() {
            for (t, r) in row.iter().enumerate() {
                assert!((r.range_i - rt.range_i(g, t)).abs() < 1e-6);
                assert!((r.range_ii - rt.range_ii(g, t)).abs() < 1e-6);
            }
        }
        for (i, row) in rt.shed.iter().enumerate() {
            for (t, &s) in row.iter().enumerate() {
                assert!(s >= -1e-9 && s <= case.bus_load_rt()[i][t] + 1e-9);
            }
        }
        assert_eq!(rt.commitment, da.commitment);
        checked += 1;
    }
}

proptest::proptest! {
    #[test]
    fn split_parts_cover_the_deviation(
        p_da in 0.0..200.0f64,
        p_rt in 0.0..200.0f64,
        r_up in 0.0..50.0f64,
        r_down in 0.0..50.0f64,
    ) {
        let s = windflex_sched::redispatch_split(p_rt, p_da, r_up, r_down);
        let r = p_rt - p_da;
        proptest::prop_assert!(s.range_i >= 0.0 && s.range_ii >= 0.0);
        proptest::prop_assert!((s.range_i + s.range_ii - r.abs()).abs() <= 1e-9);
        let cap = if r >= 0.0 { r_up } else { r_down };
        proptest::prop_assert!(s.range_i <= cap + 1e-12);
        proptest::prop_assert!(s.range_ii == 0.0 || (s.range_i - cap).abs() <= 1e-9);
    }
}
