#![allow(dead_code)]

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use windflex_core::reserve::{ReserveMethod, ReserveSchedule};
use windflex_sched::case::{Bus, CostSegment, Generator, InitialStatus, Line, Load, WindFarm};
use windflex_sched::{
    ContingencyRule, DaSolution, GridCase, HighsBackend, ReservePolicy, ScucModel, SolveLimits, SolverBackend,
    SolverError,
};

pub fn tight() -> SolveLimits {
    SolveLimits {
        mip_rel_gap: 1e-9,
        ..Default::default()
    }
}

pub fn schedule(entity: &str, up: Vec<f64>, down: Vec<f64>) -> ReserveSchedule {
    let start = NaiveDate::from_ymd_opt(2013, 2, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    ReserveSchedule {
        entity: entity.to_string(),
        timestamps: (0..up.len()).map(|h| start + chrono::Duration::hours(h as i64)).collect(),
        up_mw: up,
        down_mw: down,
        method: ReserveMethod::Extent { epsilon: 0.1 },
    }
}

pub fn unit(id: &str, bus: &str, p_min: f64, p_max: f64, c1: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        p_min,
        p_max,
        ramp_60: p_max,
        ramp_10: p_max,
        min_up: 1,
        min_down: 1,
        no_load_cost: 0.0,
        startup_cost: 0.0,
        shutdown_cost: 0.0,
        segments: vec![CostSegment { c1, c0: 0.0 }],
        initial: InitialStatus {
            on: true,
            power: p_min,
            periods_in_state: None,
        },
    }
}

/// One bus, given units, flat load and optional wind (da, rt).
pub fn single_bus(units: Vec<Generator>, load: Vec<f64>, wind: Option<(Vec<f64>, Vec<f64>)>) -> GridCase {
    let t = load.len();
    GridCase {
        version: 1,
        name: "single".into(),
        periods: t,
        reference_bus: "b".into(),
        contingency_fraction: 0.0,
        load_extent: 0.0,
        buses: vec![Bus {
            id: "b".into(),
            zone: "Z".into(),
        }],
        lines: vec![],
        generators: units,
        wind_farms: wind
            .map(|(da, rt)| {
                vec![WindFarm {
                    id: "w".into(),
                    bus: "b".into(),
                    capacity: 200.0,
                    da,
                    rt,
                }]
            })
            .unwrap_or_default(),
        loads: vec![Load {
            id: "d".into(),
            bus: "b".into(),
            da: load.clone(),
            rt: load,
        }],
    }
}

/// Random small case with at most the given numbers of units, buses and periods.
pub fn random_case(rng: &mut ChaCha8Rng, max_gen: usize, max_bus: usize, max_t: usize) -> GridCase {
    let n_bus = rng.gen_range(1..=max_bus);
    let n_gen = rng.gen_range(1..=max_gen);
    let n_t = rng.gen_range(1..=max_t);
    let bus = |i: usize| format!("b{i}");
    let buses = (0..n_bus)
        .map(|i| Bus {
            id: bus(i),
            zone: format!("Z{}", rng.gen_range(0..2)),
        })
        .collect();
    let mut lines: Vec<Line> = (1..n_bus)
        .map(|i| Line {
            id: format!("l{i}"),
            from: bus(rng.gen_range(0..i)),
            to: bus(i),
            susceptance: rng.gen_range(5.0..20.0),
            limit: rng.gen_bool(0.7).then(|| rng.gen_range(20.0..120.0)),
        })
        .collect();
    if n_bus == 3 && rng.gen_bool(0.5) {
        lines.push(Line {
            id: "lx".into(),
            from: bus(0),
            to: bus(2),
            susceptance: rng.gen_range(5.0..20.0),
            limit: Some(rng.gen_range(20.0..120.0)),
        });
    }
    let generators: Vec<Generator> = (0..n_gen)
        .map(|k| {
            let p_min = rng.gen_range(0.0..30.0);
            let p_max = p_min + rng.gen_range(30.0..100.0);
            let c1 = rng.gen_range(10.0..40.0);
            let mut segments = vec![CostSegment { c1, c0: rng.gen_range(0.0..50.0) }];
            if rng.gen_bool(0.5) {
                let c2 = c1 + rng.gen_range(1.0..20.0);
                let bp = rng.gen_range(p_min..p_max);
                segments.push(CostSegment {
                    c1: c2,
                    c0: segments[0].c0 - (c2 - c1) * bp,
                });
            }
            let on = rng.gen_bool(0.6);
            Generator {
                id: format!("g{k}"),
                bus: bus(rng.gen_range(0..n_bus)),
                p_min,
                p_max,
                ramp_60: rng.gen_range(20.0..p_max + 20.0),
                ramp_10: rng.gen_range(5.0..40.0),
                min_up: rng.gen_range(1..=3),
                min_down: rng.gen_range(1..=3),
                no_load_cost: rng.gen_range(0.0..200.0),
                startup_cost: rng.gen_range(0.0..500.0),
                shutdown_cost: rng.gen_range(0.0..100.0),
                segments,
                initial: InitialStatus {
                    on,
                    power: if on { rng.gen_range(p_min..=p_max) } else { 0.0 },
                    periods_in_state: rng.gen_bool(0.5).then(|| rng.gen_range(1..=3)),
                },
            }
        })
        .collect();
    let cap: f64 = generators.iter().map(|g| g.p_max).sum();
    let loads = (0..rng.gen_range(1..=n_bus))
        .map(|k| {
            let da: Vec<f64> = (0..n_t).map(|_| rng.gen_range(0.05..0.5) * cap / n_bus as f64).collect();
            Load {
                id: format!("d{k}"),
                bus: bus(rng.gen_range(0..n_bus)),
                rt: da.iter().map(|d| d * rng.gen_range(0.9..1.1)).collect(),
                da,
            }
        })
        .collect();
    let wind_farms = if rng.gen_bool(0.5) {
        let da: Vec<f64> = (0..n_t).map(|_| rng.gen_range(0.0..30.0)).collect();
        vec![WindFarm {
            id: "w0".into(),
            bus: bus(rng.gen_range(0..n_bus)),
            capacity: 30.0,
            rt: da.iter().map(|_| rng.gen_range(0.0..30.0)).collect(),
            da,
        }]
    } else {
        vec![]
    };
    GridCase {
        version: 1,
        name: "random".into(),
        periods: n_t,
        reference_bus: bus(0),
        contingency_fraction: rng.gen_range(0.0..0.1),
        load_extent: rng.gen_range(0.0..0.05),
        buses,
        lines,
        generators,
        wind_farms,
        loads,
    }
}

pub fn random_contingency(rng: &mut ChaCha8Rng) -> ContingencyRule {
    [ContingencyRule::Literal, ContingencyRule::ExcludeOwn, ContingencyRule::Off][rng.gen_range(0..3)]
}

/// Random reserve schedules matching `policy`'s entities.
pub fn random_reserve(rng: &mut ChaCha8Rng, case: &GridCase, policy: ReservePolicy) -> Vec<ReserveSchedule> {
    policy
        .entities(case)
        .iter()
        .map(|e| {
            let up = (0..case.periods).map(|_| rng.gen_range(0.0..15.0)).collect();
            let down = (0..case.periods).map(|_| rng.gen_range(0.0..15.0)).collect();
            schedule(e, up, down)
        })
        .collect()
}

/// Exhaustive commitment enumeration: the best LP objective over all 2^(G·T)
/// fixed commitments, `None` when every pattern is infeasible.
pub fn brute_force(model: &ScucModel) -> Option<f64> {
    let g = model.case().generators.len();
    let t = model.case().periods;
    let mut best: Option<f64> = None;
    for bits in 0u64..(1 << (g * t)) {
        let u: Vec<Vec<bool>> = (0..g).map(|k| (0..t).map(|s| bits >> (k * t + s) & 1 == 1).collect()).collect();
        let mut m = model.clone();
        if m.fix_commitment(&u).is_err() {
            continue;
        }
        match HighsBackend.solve(m.linear_model(), &SolveLimits::default()) {
            Ok(s) => best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective))),
            Err(SolverError::Infeasible { .. }) => {}
            Err(e) => panic!("LP failed: {e}"),
        }
    }
    best
}

/// Kirchhoff, nodal balance, commitment logic and min up/down replay checks.
pub fn check_da_physics(case: &GridCase, da: &DaSolution) {
    let tol = 1e-6;
    let ends = case.line_ends();
    for (l, line) in case.lines.iter().enumerate() {
        for t in 0..case.periods {
            let (a, b) = ends[l];
            let f = line.susceptance * (da.angles[a][t] - da.angles[b][t]);
            assert!((da.flows[l][t] - f).abs() < tol, "kirchhoff {l} {t}");
            for net in da.reserve_network.iter().flatten() {
                let f = line.susceptance * (net.angles[a][t] - net.angles[b][t]);
                assert!((net.flows[l][t] - f).abs() < tol, "reserve kirchhoff {l} {t}");
            }
        }
    }
    let load = case.bus_load_da();
    let wind = case.bus_wind_da();
    let gbus = case.generator_buses();
    for i in 0..case.buses.len() {
        for t in 0..case.periods {
            let gen: f64 = (0..case.generators.len()).filter(|&k| gbus[k] == i).map(|k| da.dispatch[k][t]).sum();
            let inflow: f64 = ends
                .iter()
                .enumerate()
                .map(|(l, &(a, b))| if a == i { -da.flows[l][t] } else if b == i { da.flows[l][t] } else { 0.0 })
                .sum();
            let r = gen + wind[i][t] + inflow - load[i][t];
            assert!(r.abs() < tol, "balance residual {r} at bus {i} period {t}");
        }
    }
    for (k, g) in case.generators.iter().enumerate() {
        let u = |t: isize| -> f64 {
            if t < 0 {
                if g.initial.on { 1.0 } else { 0.0 }
            } else {
                if da.commitment[k][t as usize] { 1.0 } else { 0.0 }
            }
        };
        for t in 0..case.periods {
            let d = da.startup[k][t] - da.shutdown[k][t] - (u(t as isize) - u(t as isize - 1));
            assert!(d.abs() < tol, "transition {k} {t}");
            let p = da.dispatch[k][t];
            assert!(p <= u(t as isize) * g.p_max + tol && p >= u(t as isize) * g.p_min - tol);
            let on_switch = u(t as isize) == 1.0 && u(t as isize - 1) == 0.0;
            let off_switch = u(t as isize) == 0.0 && u(t as isize - 1) == 1.0;
            for s in t..(t + g.min_up.max(1)).min(case.periods) {
                if on_switch {
                    assert_eq!(u(s as isize), 1.0, "min up {k} from {t}");
                }
            }
            for s in t..(t + g.min_down.max(1)).min(case.periods) {
                if off_switch {
                    assert_eq!(u(s as isize), 0.0, "min down {k} from {t}");
                }
            }
        }
    }
}
