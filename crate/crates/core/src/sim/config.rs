use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::Seconds;

/// Matching/rebalancing pipeline run at each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Ride matching, then probabilistic rebalancing of idle vehicles.
    Sequential,
    /// Ride matching only.
    SqBase,
    /// Joint matching and rebalancing over the RTVZ graph.
    Integrated,
    /// Matching with the supply term, but idle vehicles may only stay.
    IntegratedBase,
    /// `IntegratedBase` followed by probabilistic rebalancing.
    IntegratedSequential,
    /// `Integrated` with the solo-trip penalty.
    IntegratedIs,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Sequential,
        Variant::SqBase,
        Variant::Integrated,
        Variant::IntegratedBase,
        Variant::IntegratedSequential,
        Variant::IntegratedIs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Sequential => "sequential",
            Variant::SqBase => "sq-base",
            Variant::Integrated => "integrated",
            Variant::IntegratedBase => "integrated-base",
            Variant::IntegratedSequential => "integrated-sequential",
            Variant::IntegratedIs => "integrated-is",
        }
    }

    /// Idle vehicles get edges to other zones.
    pub fn zone_edges(self) -> bool {
        matches!(self, Variant::Integrated | Variant::IntegratedIs)
    }

    /// The supply-deviation term is part of the matching objective.
    pub fn uses_supply_term(self) -> bool {
        !matches!(self, Variant::Sequential | Variant::SqBase)
    }

    pub fn probabilistic_rebalancing(self) -> bool {
        matches!(self, Variant::Sequential | Variant::IntegratedSequential)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == norm)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub epoch_s: Seconds,
    pub horizon_s: Seconds,
    pub max_wait_s: Seconds,
    pub max_delay_s: Seconds,
    pub fleet: usize,
    pub capacity: u32,
    pub variant: Variant,
    /// Zone weight applied to every zone.
    pub alpha: f64,
    /// Rejection penalty; defaults to the sum of zone weights plus 1000.
    pub beta: Option<f64>,
    pub gamma: f64,
    pub start_s: Seconds,
    pub warmup_s: Seconds,
    pub measure_s: Seconds,
    pub cooloff_s: Seconds,
    pub seed: u64,
    pub max_trip_size: usize,
    pub max_trips_per_size: usize,
    pub solver_node_limit: usize,
    pub solver_time_budget_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epoch_s: 30,
            horizon_s: 600,
            max_wait_s: 420,
            max_delay_s: 900,
            fleet: 100,
            capacity: 4,
            variant: Variant::Integrated,
            alpha: 1.0,
            beta: None,
            gamma: 1.0,
            start_s: 0,
            warmup_s: 3600,
            measure_s: 3600,
            cooloff_s: 3600,
            seed: 0,
            max_trip_size: 4,
            max_trips_per_size: 400,
            solver_node_limit: 2000,
            solver_time_budget_s: 10.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("epoch_s", self.epoch_s),
            ("horizon_s", self.horizon_s),
            ("max_wait_s", self.max_wait_s),
            ("max_delay_s", self.max_delay_s),
        ];
        for (name, v) in positive {
            if v <= 0 {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.capacity == 0 {
            return Err("capacity must be at least 1".into());
        }
        if self.warmup_s < 0 || self.measure_s < 0 || self.cooloff_s < 0 {
            return Err("warm-up, measurement and cool-off lengths must be non-negative".into());
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.gamma >= 1.0) {
            return Err(format!("gamma must be at least 1, got {}", self.gamma));
        }
        if self.gamma != 1.0 && self.variant != Variant::IntegratedIs {
            return Err(format!(
                "gamma = {} only applies to the integrated-is variant, not {}",
                self.gamma, self.variant
            ));
        }
        if self.max_trip_size == 0 {
            return Err("max_trip_size must be at least 1".into());
        }
        if !(self.solver_time_budget_s > 0.0) {
            return Err("solver_time_budget_s must be positive".into());
        }
        Ok(())
    }

    pub fn end_s(&self) -> Seconds {
        self.start_s + self.warmup_s + self.measure_s + self.cooloff_s
    }

    /// Half-open measurement window.
    pub fn window(&self) -> (Seconds, Seconds) {
        let m0 = self.start_s + self.warmup_s;
        (m0, m0 + self.measure_s)
    }
}
