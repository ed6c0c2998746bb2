mod common;

use proptest::prelude::*;
use ridepool_core::demand::{estimate_rates, window_theta, write_requests};
use ridepool_core::harness::{generate_synthetic, DemandPattern, SyntheticSpec};
use ridepool_core::network::{build_rect_zones, Rect};
use ridepool_core::{
    all_pairs_shortest, load_requests, target_supply, NodeId, RateTable, Request, RequestId, Seconds, ZoneId, ZoneSet,
};

fn two_zones() -> ZoneSet {
    let net = common::line(&[0.0, 100.0], &[10.0]);
    let rect = |a: f64, b: f64| Rect {
        min_x: a,
        min_y: -1.0,
        max_x: b,
        max_y: 1.0,
    };
    build_rect_zones(&net, &[rect(-1.0, 50.0), rect(50.0, 101.0)]).unwrap()
}

fn rates(values: &[(u32, i64, f64)]) -> RateTable {
    let mut r = RateTable::new(900);
    for &(z, k, l) in values {
        r.set(ZoneId(z), k, l);
    }
    r
}

/// Share of [t, t+h) lying in the interval that contains t, by counting
/// whole seconds.
fn theta_by_counting(t: Seconds, h: Seconds, len: Seconds) -> f64 {
    let k = t.div_euclid(len);
    (t..t + h).filter(|s| s.div_euclid(len) == k).count() as f64 / h as f64
}

#[test]
fn aligned_window_uses_current_rate() {
    let zones = two_zones();
    let r = rates(&[(0, 4, 6.0), (0, 5, 12.0), (1, 4, 1.0)]);
    let ts = target_supply(&r, &zones, 4 * 900, 900).unwrap();
    assert_eq!(ts.theta, 1.0);
    assert_eq!(ts.phi, vec![6.0, 1.0]);
}

#[test]
fn one_third_of_the_window_in_the_current_interval() {
    let zones = two_zones();
    let r = rates(&[(0, 4, 6.0), (0, 5, 12.0)]);
    let ts = target_supply(&r, &zones, 4 * 900 + 600, 900).unwrap();
    assert!((ts.theta - 1.0 / 3.0).abs() < 1e-12);
    assert!((ts.phi[0] - 10.0).abs() < 1e-12);
    assert_eq!(ts.phi[1], 0.0);
}

#[test]
fn ten_minute_horizon_hand_cases() {
    let zones = two_zones();
    let r = rates(&[(0, 0, 2.0), (0, 1, 4.0)]);
    // 300 s into the interval the window still fits
    let a = target_supply(&r, &zones, 300, 600).unwrap();
    assert_eq!(a.theta, 1.0);
    assert_eq!(a.phi[0], 2.0);
    // 600 s in, half the window spills into the next interval
    let b = target_supply(&r, &zones, 600, 600).unwrap();
    assert_eq!(b.theta, 0.5);
    assert_eq!(b.phi[0], 3.0);
    for (t, h) in [(300, 600), (600, 600), (0, 900), (899, 1800), (450, 1)] {
        assert_eq!(window_theta(t, h, 900), theta_by_counting(t, h, 900), "t={t} h={h}");
    }
}

#[test]
fn horizon_limits() {
    let zones = two_zones();
    let r = rates(&[]);
    assert!(target_supply(&r, &zones, 0, 1800).is_ok());
    assert!(target_supply(&r, &zones, 0, 1801).is_err());
    assert!(target_supply(&r, &zones, 0, 0).is_err());
}

#[test]
fn generated_requests_survive_a_file_round_trip() {
    let spec = SyntheticSpec {
        grid_size: 8,
        duration_s: 3600,
        pattern: DemandPattern::Uniform { rate_per_s: 0.3 },
        seed: 5,
        ..Default::default()
    };
    let g = generate_synthetic(&spec).unwrap();
    let s = &g.scenario;
    assert!(s.requests.len() > 900);
    let text = write_requests(&s.requests, &s.net);
    let back = load_requests(text.as_bytes(), &s.net, &s.tables).unwrap();
    assert_eq!(back, s.requests);
    assert!(back
        .windows(2)
        .all(|w| (w[0].arrival, w[0].id) <= (w[1].arrival, w[1].id)));
}

#[test]
fn uniform_counts_stay_within_three_sigma() {
    let rate = 0.25;
    let spec = SyntheticSpec {
        grid_size: 11,
        spacing_m: 400.0,
        zone_cell_m: 2000.0,
        duration_s: 4 * 3600,
        pattern: DemandPattern::Uniform { rate_per_s: rate },
        seed: 9,
        ..Default::default()
    };
    let g = generate_synthetic(&spec).unwrap();
    let s = &g.scenario;
    // whole-run count
    let mean = rate * spec.duration_s as f64;
    let n = s.requests.len() as f64;
    assert!((n - mean).abs() <= 3.0 * mean.sqrt(), "{n} vs {mean}");
    // per hour
    for h in 0..4 {
        let c = s.requests.iter().filter(|r| r.arrival / 3600 == h).count() as f64;
        let m = rate * 3600.0;
        assert!((c - m).abs() <= 3.0 * m.sqrt(), "hour {h}: {c} vs {m}");
    }
    // estimated rates per cell against the generating intensity
    let est = estimate_rates(&[s.requests.clone()], &s.zones, 900).unwrap();
    let mut outside = 0;
    let mut cells = 0;
    for z in s.zones.zones() {
        for k in 0..16 {
            let lam = s.rates.get(z.id, k);
            cells += 1;
            if (est.get(z.id, k) - lam).abs() > 3.0 * lam.sqrt() {
                outside += 1;
            }
        }
    }
    // a 3 sigma band holds for ~99.7% of Poisson cells
    assert!(
        outside as f64 <= 0.02 * cells as f64 + 1.0,
        "{outside} of {cells} cells outside 3 sigma"
    );
}

fn day(seed: u64) -> Vec<Request> {
    let net = common::line(&[0.0, 100.0], &[10.0]);
    let t = all_pairs_shortest(&net);
    let mut r = common::rng(seed);
    use rand::Rng;
    (0..r.random_range(0..40))
        .map(|i| {
            let o = r.random_range(0..2u32);
            Request::new(RequestId(i), NodeId(o), NodeId(1 - o), r.random_range(0..7200), &t).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn theta_is_a_fraction_and_matches_counting(t in 0i64..100_000, h in 1i64..=1800) {
        let th = window_theta(t, h, 900);
        prop_assert!((0.0..=1.0).contains(&th));
        prop_assert_eq!(th, theta_by_counting(t, h, 900));
    }

    #[test]
    fn phi_moves_smoothly(t in 0i64..20_000, h in 1i64..=1800, l in proptest::collection::vec(0.0f64..50.0, 30)) {
        let zones = two_zones();
        let mut r = RateTable::new(900);
        for (k, &v) in l.iter().enumerate() {
            r.set(ZoneId(0), k as i64, v);
        }
        let max_step = l.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
        let a = target_supply(&r, &zones, t, h).unwrap().phi[0];
        let b = target_supply(&r, &zones, t + 1, h).unwrap().phi[0];
        prop_assert!((a - b).abs() <= max_step + 1e-9);
        if h <= 900 {
            // with the window inside two intervals the change per second is tiny
            prop_assert!((a - b).abs() <= max_step / h as f64 + 1e-9);
        }
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn rate_estimates_ignore_day_order(seeds in proptest::collection::vec(any::<u64>(), 1..5), rot in 0usize..5) {
        let zones = two_zones();
        let days: Vec<Vec<Request>> = seeds.iter().map(|&s| day(s)).collect();
        let mut rotated = days.clone();
        rotated.rotate_left(rot % days.len());
        rotated.reverse();
        prop_assert_eq!(estimate_rates(&days, &zones, 900).unwrap(), estimate_rates(&rotated, &zones, 900).unwrap());
    }
}
