mod common;

use std::collections::{BTreeMap, HashMap};

use ridepool_core::harness::{generate_synthetic, DemandPattern, SyntheticSpec};
use ridepool_core::metrics::MetricsContext;
use ridepool_core::{
    compute_metrics, run_scenario, tour_statistics, EventKind, Journal, RequestId, SimConfig, Variant, VehicleId,
};

const SCRIPT: &str = "\
# scripted tour fixture
time,event_kind,vehicle_id,request_id,node,occupancy
0,init,0,,n0,0
5,request,,1,n1,
10,assign,0,1,n0,0
110,drive_deadhead,0,,n1,0
110,pickup,0,1,n1,1
120,request,,2,n2,
150,assign,0,2,n1,1
210,drive_active,0,,n2,1
210,pickup,0,2,n2,2
310,drive_active,0,,n3,2
310,dropoff,0,1,n3,1
310,dropoff,0,2,n3,0
310,idle,0,,n3,0
400,rebalance,0,,n3,0
500,drive_rebalance,0,,n2,0
500,idle,0,,n2,0
600,request,,3,n2,
600,assign,0,3,n2,0
600,pickup,0,3,n2,1
700,drive_active,0,,n1,1
";

fn line4() -> ridepool_core::RoadNetwork {
    common::line(&[0.0, 1000.0, 2000.0, 3000.0], &[100.0, 100.0, 100.0])
}

#[test]
fn scripted_tours_split_at_idle() {
    let net = line4();
    let j = Journal::parse(SCRIPT, &net).unwrap();
    let tours = tour_statistics(&j, &net);
    assert_eq!(tours.len(), 2);
    assert_eq!((tours[0].start, tours[0].end, tours[0].size), (10, Some(310), 2));
    assert_eq!(tours[0].distance_m, 3000.0);
    // the journal stops mid-tour, and the rebalancing leg belongs to no tour
    assert_eq!((tours[1].start, tours[1].end, tours[1].size), (600, None, 1));
    assert_eq!(tours[1].distance_m, 1000.0);
    assert!(tours.iter().all(|t| t.vehicle == VehicleId(0)));
}

#[test]
fn scripted_metrics_match_hand_counts() {
    let net = line4();
    let tables = ridepool_core::all_pairs_shortest(&net);
    let j = Journal::parse(SCRIPT, &net).unwrap();
    let ctx = MetricsContext {
        net: &net,
        tables: &tables,
        capacity: 4,
        max_wait: 300,
        max_delay: 300,
        window: (0, 1000),
    };
    let m = compute_metrics(&j, &ctx);
    assert_eq!((m.requests, m.served, m.expired, m.unresolved), (3, 2, 0, 1));
    assert_eq!(m.service_rate, Some(2.0 / 3.0));
    assert_eq!(m.vmr, Some(2.5));
    assert_eq!(m.active_vmr, Some(1.5));
    assert_eq!(m.idle_vmr, Some(0.5));
    assert_eq!(m.rebalancing_vmr, Some(0.5));
    assert_eq!(m.total_vmt_km, 5.0);
    assert_eq!(m.shared_trip_ratio, Some(1.0));
    assert_eq!(m.avg_wait, Some(97.5));
    assert_eq!(m.avg_delay, Some(0.0));
    // 400 seat-seconds over 400 s of touring with four seats
    assert_eq!(m.avg_occupancy, Some(0.25));
    assert_eq!(m.tour_sizes, BTreeMap::from([(1, 1), (2, 1)]));
    assert_eq!(m.violations.total(), 0);

    // a window that excludes the first two requests
    let late = compute_metrics(
        &j,
        &MetricsContext {
            window: (500, 1000),
            ..ctx
        },
    );
    assert_eq!((late.requests, late.served), (1, 0));
    assert_eq!(late.vmr, None);
    assert_eq!(late.service_rate, Some(0.0));
}

#[test]
fn breaches_are_counted() {
    let net = line4();
    let tables = ridepool_core::all_pairs_shortest(&net);
    let j = Journal::parse(SCRIPT, &net).unwrap();
    let ctx = MetricsContext {
        net: &net,
        tables: &tables,
        capacity: 1,
        max_wait: 100,
        max_delay: 300,
        window: (0, 1000),
    };
    let m = compute_metrics(&j, &ctx);
    // r1 waited 105 s; two events carried two passengers
    assert_eq!(m.violations.wait, 1);
    assert_eq!(m.violations.capacity, 2);
    assert_eq!(m.violations.delay, 0);
}

struct Recount {
    requests: usize,
    served: usize,
    expired: usize,
    km: [f64; 3],
    shared: usize,
    wait: f64,
    delay: f64,
}

/// Straight recount from the event log: ride intervals per vehicle and
/// edge lengths looked up hop by hop.
fn recount(
    j: &Journal,
    net: &ridepool_core::RoadNetwork,
    tables: &ridepool_core::ShortestPathTables,
    window: (i64, i64),
) -> Recount {
    let inside = |t: i64| window.0 <= t && t < window.1;
    let mut at = HashMap::new();
    let mut km = [0.0; 3];
    let mut arrival = HashMap::new();
    let mut origin = HashMap::new();
    let mut expired_set = Vec::new();
    let mut rides: HashMap<RequestId, (VehicleId, i64, Option<(i64, ridepool_core::NodeId)>)> = HashMap::new();
    for e in &j.events {
        match e.kind {
            EventKind::Init => {
                at.insert(e.vehicle.unwrap(), e.node.unwrap());
            }
            EventKind::Request => {
                arrival.insert(e.request.unwrap(), e.time);
                origin.insert(e.request.unwrap(), e.node.unwrap());
            }
            EventKind::Expire => expired_set.push(e.request.unwrap()),
            EventKind::Pickup => {
                rides.insert(e.request.unwrap(), (e.vehicle.unwrap(), e.time, None));
            }
            EventKind::Dropoff => {
                rides.get_mut(&e.request.unwrap()).unwrap().2 = Some((e.time, e.node.unwrap()));
            }
            EventKind::DriveActive | EventKind::DriveDeadhead | EventKind::DriveRebalance => {
                let v = e.vehicle.unwrap();
                let len = net.edge_between(at[&v], e.node.unwrap()).unwrap().length_m;
                at.insert(v, e.node.unwrap());
                let slot = match e.kind {
                    EventKind::DriveActive => 0,
                    EventKind::DriveDeadhead => 1,
                    _ => 2,
                };
                if inside(e.time) {
                    km[slot] += len / 1000.0;
                }
            }
            _ => {}
        }
    }
    let mut out = Recount {
        requests: arrival.values().filter(|&&t| inside(t)).count(),
        served: 0,
        expired: expired_set.iter().filter(|r| inside(arrival[*r])).count(),
        km,
        shared: 0,
        wait: 0.0,
        delay: 0.0,
    };
    for (r, &(v, p, drop)) in &rides {
        let Some((d, dest)) = drop else { continue };
        if !inside(arrival[r]) {
            continue;
        }
        out.served += 1;
        out.wait += (p - arrival[r]) as f64;
        out.delay += (d - p - tables.time(origin[r], dest)) as f64;
        let overlaps = rides.iter().any(|(r2, &(v2, p2, drop2))| {
            let d2 = drop2.map_or(i64::MAX, |x| x.0);
            r2 != r && v2 == v && p.max(p2) < d.min(d2)
        });
        if overlaps {
            out.shared += 1;
        }
    }
    out
}

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() <= 1e-9 * (1.0 + b.abs()))
}

#[test]
fn report_agrees_with_an_independent_recount() {
    let syn = generate_synthetic(&SyntheticSpec {
        grid_size: 9,
        spacing_m: 400.0,
        speed_mps: 8.33,
        zone_cell_m: 1200.0,
        pattern: DemandPattern::Hotspot {
            rate_per_s: 0.05,
            hot_zones: vec![4],
            hot_share: 0.6,
        },
        start_s: 0,
        duration_s: 2400,
        interval_s: 900,
        seed: 21,
    })
    .unwrap();
    let s = &syn.scenario;
    for variant in [Variant::Sequential, Variant::Integrated, Variant::SqBase] {
        let c = SimConfig {
            fleet: 10,
            variant,
            max_wait_s: 300,
            max_delay_s: 600,
            horizon_s: 900,
            warmup_s: 600,
            measure_s: 1200,
            cooloff_s: 600,
            seed: 2,
            ..Default::default()
        };
        let out = run_scenario(s, &c).unwrap();
        let m = &out.report;
        let o = recount(&out.journal, &s.net, &s.tables, c.window());
        assert_eq!(
            (m.requests, m.served, m.expired),
            (o.requests, o.served, o.expired),
            "{variant}"
        );
        assert!(o.served > 0);
        let n = o.served as f64;
        assert!(close(m.active_vmr, o.km[0] / n), "{variant}");
        assert!(close(m.idle_vmr, o.km[1] / n), "{variant}");
        assert!(close(m.rebalancing_vmr, o.km[2] / n), "{variant}");
        assert!(close(m.shared_trip_ratio, o.shared as f64 / n), "{variant}");
        assert!(close(m.avg_wait, o.wait / n), "{variant}");
        assert!(close(m.avg_delay, o.delay / n), "{variant}");
        assert!(close(m.service_rate, n / o.requests as f64), "{variant}");

        let parts = m.active_vmr.unwrap() + m.idle_vmr.unwrap() + m.rebalancing_vmr.unwrap();
        assert!((m.vmr.unwrap() - parts).abs() < 1e-9, "{variant}");
        if variant == Variant::SqBase {
            assert_eq!(m.rebalancing_vmr, Some(0.0));
        }
    }
}
