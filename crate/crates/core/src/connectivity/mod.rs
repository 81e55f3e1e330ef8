//! Connectivity of the occupied set and event indicators.

pub mod dsu;
pub mod dump;
pub mod events;
pub mod index;
pub mod probe;

pub use dsu::DisjointSets;
pub use events::{bad_balls, evaluate_event, evaluate_unchecked, EventError, EventSpec, Influence, Plan};
pub use index::{build_index, cluster_of, connected, ClusterIndex};
pub use probe::EventProbe;
