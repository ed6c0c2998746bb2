//! Sequential benchmark rebalancer: idle vehicles sample deficit zones and
//! are then paired with the sampled targets nearest-first.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, Seconds, VehicleId, ZoneId};
use crate::network::{ShortestPathTables, ZoneSet};
use crate::sim::{Vehicle, VehicleState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalanceDirective {
    pub vehicle: VehicleId,
    pub zone: ZoneId,
    pub path: Vec<NodeId>,
    pub arrival: Seconds,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalancePlan {
    pub directives: Vec<RebalanceDirective>,
}

/// Per-zone unmet target, `max(phi - supply, 0)`.
pub fn deficits(phi: &[f64], supply: &[f64]) -> Vec<f64> {
    phi.iter().zip(supply).map(|(p, s)| (p - s).max(0.0)).collect()
}

/// Seed for one epoch's draws.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch.wrapping_add(1));
    rng
}

/// Idle vehicles draw zones one at a time with probability proportional to
/// the remaining deficit, and every draw takes one vehicle's worth of seats
/// (its capacity) off that zone's deficit. Drawing stops once no deficit is
/// left. The multiset of draws is then matched to vehicles greedily by
/// centroid distance. A vehicle matched to its own zone stays and gets no
/// directive. Non-idle vehicles are ignored.
pub fn probabilistic_rebalance(
    vehicles: &[Vehicle],
    phi: &[f64],
    current_supply: &[f64],
    zones: &ZoneSet,
    tables: &ShortestPathTables,
    now: Seconds,
    rng: &mut ChaCha8Rng,
) -> RebalancePlan {
    let idle: Vec<&Vehicle> = vehicles.iter().filter(|v| v.state == VehicleState::Idle).collect();
    let mut d = deficits(phi, current_supply);
    let mut targets: Vec<usize> = Vec::new();
    for v in &idle {
        if !(d.iter().sum::<f64>() > 0.0) {
            break;
        }
        let z = WeightedIndex::new(&d).expect("positive total weight").sample(rng);
        d[z] = (d[z] - v.capacity as f64).max(0.0);
        targets.push(z);
    }
    if targets.is_empty() {
        return RebalancePlan::default();
    }

    let mut pairs = Vec::with_capacity(idle.len() * targets.len());
    for (vi, v) in idle.iter().enumerate() {
        let (node, _) = v.plan_origin(now);
        for (slot, &z) in targets.iter().enumerate() {
            let c = zones.zones()[z].centroid;
            pairs.push((tables.distance(node, c), v.id, slot, vi));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut vehicle_done = vec![false; idle.len()];
    let mut slot_done = vec![false; targets.len()];
    let mut directives = Vec::new();
    for (_, _, slot, vi) in pairs {
        if vehicle_done[vi] || slot_done[slot] {
            continue;
        }
        vehicle_done[vi] = true;
        slot_done[slot] = true;
        let v = idle[vi];
        let (node, start) = v.plan_origin(now);
        let zone = zones.zones()[targets[slot]].id;
        if zones.zone_of(node) == zone {
            continue;
        }
        let target = zones.zone(zone).centroid;
        directives.push(RebalanceDirective {
            vehicle: v.id,
            zone,
            path: tables.path_between(node, target).expect("zone centroid reachable"),
            arrival: start + tables.time(node, target),
        });
    }
    directives.sort_by_key(|d| d.vehicle);
    RebalancePlan { directives }
}
