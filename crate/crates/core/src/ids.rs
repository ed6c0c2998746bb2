//! Strongly typed identifiers shared across the engine.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Whole seconds. All clock and travel-time arithmetic uses this unit.
pub type Seconds = i64;

macro_rules! index_id {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[repr(transparent)]
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl $name {
            #[inline]
            pub const fn new(v: $inner) -> Self {
                Self(v)
            }

            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<usize> for $name {
            fn from(v: usize) -> Self {
                Self(v as $inner)
            }
        }
    };
}

index_id!(
    /// Dense index of a node inside a [`crate::RoadNetwork`]. External labels
    /// are kept by the network itself.
    NodeId(u32)
);
index_id!(
    /// Dense index of a rebalancing zone.
    ZoneId(u32)
);
index_id!(RequestId(u64));
index_id!(VehicleId(u32));
index_id!(TripId(u32));
