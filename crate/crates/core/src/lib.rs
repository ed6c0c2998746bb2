//! Ride-pooling dispatch engine: shortest paths, exact single-vehicle
//! routing, shareability and trip graphs, an assignment MILP that couples
//! ride matching with fleet rebalancing, and a rolling-horizon simulator.

pub mod assignment;
pub mod costs;
pub mod demand;
pub mod graphs;
pub mod harness;
pub mod ids;
pub mod metrics;
pub mod network;
pub mod rebalancing;
pub mod routing;
pub mod sim;

pub use assignment::{
    build_model, decode, solve_assignment, Assignment, AssignmentError, AssignmentModel, SolveOptions,
};
pub use costs::{assemble_objective, supply_contribution, CostParams, ObjectiveSpec, SupplyRoute, SupplyVector};
pub use demand::{load_requests, target_supply, RateTable, Request, TargetSupply};
pub use graphs::{build_prs_graph, build_rtvz_graph, enumerate_trips, PrsGraph, RtvzGraph, Trip, TripSet};
pub use ids::{NodeId, RequestId, Seconds, TripId, VehicleId, ZoneId};
pub use metrics::{compute_metrics, tour_statistics, MetricsContext, MetricsReport, Tour};
pub use network::{all_pairs_shortest, build_grid_zones, load_network, RoadNetwork, ShortestPathTables, ZoneSet};
pub use rebalancing::{probabilistic_rebalance, RebalancePlan};
pub use routing::{insertion_feasible, pairwise_shareable, solve_darp, LosParams, RoutingInstance, Schedule};
pub use sim::{run_scenario, Event, EventKind, Journal, Scenario, SimConfig, SimError, SimOutput, Variant, Vehicle};
