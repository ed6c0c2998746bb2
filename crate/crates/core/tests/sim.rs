mod common;

use std::collections::HashMap;

use ridepool_core::harness::{generate_synthetic, DemandPattern, SyntheticSpec};
use ridepool_core::{
    all_pairs_shortest, build_grid_zones, run_scenario, EventKind, NodeId, RateTable, Request, RequestId, Scenario,
    SimConfig, Variant,
};

fn three_stops() -> Scenario {
    let net = common::undirected(
        vec![
            common::node("a", 0.0, 0.0),
            common::node("b", 3000.0, 0.0),
            common::node("c", 5000.0, 0.0),
        ],
        &[("a", "b", 1000.0, 20.0), ("b", "c", 1000.0, 20.0)],
    );
    let tables = all_pairs_shortest(&net);
    let zones = build_grid_zones(&net, 2000.0).unwrap();
    let req = |id: u64, o: u32, d: u32, t: i64| Request::new(RequestId(id), NodeId(o), NodeId(d), t, &tables).unwrap();
    let requests = vec![req(1, 1, 2, 5), req(2, 0, 1, 45), req(3, 1, 0, 75)];
    Scenario {
        net,
        tables,
        zones,
        requests,
        rates: RateTable::new(900),
    }
}

fn three_stops_config() -> SimConfig {
    SimConfig {
        fleet: 2,
        variant: Variant::SqBase,
        alpha: 0.0,
        max_wait_s: 60,
        epoch_s: 30,
        warmup_s: 0,
        measure_s: 90,
        cooloff_s: 0,
        ..Default::default()
    }
}

fn records(csv: &str) -> Vec<String> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn golden_journal_for_three_epochs() {
    let s = three_stops();
    assert_eq!(s.zones.len(), 3);
    let out = run_scenario(&s, &three_stops_config()).unwrap();
    let csv = out.journal.to_csv(&s.net);
    assert!(csv.starts_with("# ridepool journal seed=0 "));
    let golden = include_str!("fixtures/golden_journal.csv");
    assert_eq!(records(&csv), records(golden), "\n{csv}");
    assert_eq!(out.report.served, 3);
    assert_eq!(out.report.avg_wait, Some((25.0 + 15.0 + 15.0) / 3.0));
}

#[test]
fn journal_parses_back_to_the_same_events() {
    let s = three_stops();
    let out = run_scenario(&s, &three_stops_config()).unwrap();
    let parsed = ridepool_core::Journal::parse(&out.journal.to_csv(&s.net), &s.net).unwrap();
    assert_eq!(parsed, out.journal);
}

fn small_synthetic(seed: u64) -> Scenario {
    generate_synthetic(&SyntheticSpec {
        grid_size: 7,
        spacing_m: 400.0,
        speed_mps: 8.33,
        zone_cell_m: 1200.0,
        pattern: DemandPattern::Hotspot {
            rate_per_s: 0.03,
            hot_zones: vec![0],
            hot_share: 0.5,
        },
        start_s: 0,
        duration_s: 1800,
        interval_s: 900,
        seed,
    })
    .unwrap()
    .scenario
}

fn small_config(variant: Variant) -> SimConfig {
    SimConfig {
        fleet: 8,
        variant,
        max_wait_s: 300,
        max_delay_s: 600,
        horizon_s: 900,
        warmup_s: 600,
        measure_s: 600,
        cooloff_s: 600,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_byte_identical_journals() {
    let s = small_synthetic(4);
    for variant in [Variant::Integrated, Variant::Sequential] {
        let c = small_config(variant);
        let a = run_scenario(&s, &c).unwrap().journal.to_csv(&s.net);
        let b = run_scenario(&s, &c).unwrap().journal.to_csv(&s.net);
        assert_eq!(a, b, "{variant}");
    }
}

#[test]
fn synthetic_runs_respect_service_invariants() {
    let s = small_synthetic(5);
    let arrival: HashMap<RequestId, &Request> = s.requests.iter().map(|r| (r.id, r)).collect();
    for variant in Variant::ALL {
        let c = small_config(variant);
        let out = run_scenario(&s, &c).unwrap();
        let mut pos: HashMap<u32, NodeId> = HashMap::new();
        let mut driven = [0.0f64; 3];
        let mut per_vehicle: HashMap<u32, f64> = HashMap::new();
        let mut pickup: HashMap<RequestId, i64> = HashMap::new();
        let mut outcome: HashMap<RequestId, EventKind> = HashMap::new();
        let mut requested = 0usize;
        for e in &out.journal.events {
            if let Some(o) = e.occupancy {
                assert!(o <= c.capacity, "{variant}: occupancy {o}");
            }
            match e.kind {
                EventKind::Init => {
                    pos.insert(e.vehicle.unwrap().0, e.node.unwrap());
                }
                EventKind::Request => requested += 1,
                EventKind::Pickup => {
                    let r = e.request.unwrap();
                    let w = e.time - arrival[&r].arrival;
                    assert!((0..=c.max_wait_s).contains(&w), "{variant}: wait {w} for {r:?}");
                    assert!(pickup.insert(r, e.time).is_none());
                }
                EventKind::Dropoff => {
                    let r = e.request.unwrap();
                    let delay = e.time - pickup[&r] - arrival[&r].direct_time;
                    assert!(
                        (0..=c.max_delay_s).contains(&delay),
                        "{variant}: delay {delay} for {r:?}"
                    );
                    assert!(outcome.insert(r, e.kind).is_none());
                }
                EventKind::Expire => {
                    let r = e.request.unwrap();
                    assert!(!pickup.contains_key(&r));
                    assert!(outcome.insert(r, e.kind).is_none());
                }
                k => {
                    if let Some(class) = k.drive_class() {
                        let v = e.vehicle.unwrap().0;
                        let from = pos[&v];
                        let to = e.node.unwrap();
                        let edge = s
                            .net
                            .edge_between(from, to)
                            .unwrap_or_else(|| panic!("{variant}: vehicle {v} jumped from {from:?} to {to:?}"));
                        driven[class as usize] += edge.length_m;
                        *per_vehicle.entry(v).or_default() += edge.length_m;
                        pos.insert(v, to);
                    }
                }
            }
        }
        // every ingested request is either resolved or still on the books
        let pending: usize =
            out.state.outstanding.len() + out.state.fleet.iter().map(|v| v.requests.len()).sum::<usize>();
        assert_eq!(outcome.len() + pending, requested, "{variant}");
        assert!(requested > 50, "{variant}: only {requested} requests");
        // odometers are charged on departure, so the edge in flight counts too
        for v in &out.state.fleet {
            if let Some(f) = &v.in_flight {
                driven[f.class as usize] += f.length_m;
                *per_vehicle.entry(v.id.0).or_default() += f.length_m;
            }
        }
        for v in &out.state.fleet {
            let d = per_vehicle.get(&v.id.0).copied().unwrap_or(0.0);
            assert!(
                (v.odometer.total() - d).abs() < 1e-6,
                "{variant}: odometer of {:?}",
                v.id
            );
            assert_eq!(
                pos[&v.id.0],
                v.in_flight.as_ref().map_or(v.node, |f| f.from),
                "{variant}"
            );
        }
        let odo = |f: fn(&ridepool_core::sim::Odometer) -> f64| -> f64 {
            out.state.fleet.iter().map(|v| f(&v.odometer)).sum()
        };
        assert!((odo(|o| o.active_m) - driven[0]).abs() < 1e-6);
        assert!((odo(|o| o.deadhead_m) - driven[1]).abs() < 1e-6);
        assert!((odo(|o| o.rebalance_m) - driven[2]).abs() < 1e-6);
        assert_eq!(out.report.violations.total(), 0, "{variant}");
        if !variant.zone_edges() && !variant.probabilistic_rebalancing() {
            assert_eq!(driven[2], 0.0, "{variant} never rebalances");
        }
    }
}

#[test]
fn zero_demand_has_no_service_rate() {
    let mut s = small_synthetic(6);
    s.requests.clear();
    let out = run_scenario(&s, &small_config(Variant::Integrated)).unwrap();
    assert_eq!(out.report.requests, 0);
    assert_eq!(out.report.service_rate, None);
    assert_eq!(out.report.avg_wait, None);
}
