//! Block renormalization of 1d one-sided oriented percolation onto the
//! coarse lattice `G*`.

pub mod coarse;
pub mod domination;
pub mod events;
pub mod explore;
pub mod params;
pub mod verify;

pub use coarse::{exterior_boundary, interval_of, z_coordinate, CoarseVertex, FineInterval};
pub use domination::{
    compare_level_reach, comparison_survival, domination_report, ComparisonMode, DominationReport,
    LevelComparison,
};
pub use events::{event_t, target_segments, EdgeKey, EventOutcome};
pub use explore::{explore_field, explore_renormalized, ExplorationTrace, StopReason, TraceStep};
pub use params::{binomial_levels, derive_parameters, BinomialCondition, RenormParams};
pub use verify::{verify_trace, Condition, VerificationReport, Violation};
