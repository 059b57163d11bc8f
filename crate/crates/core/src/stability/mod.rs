//! Long-term voltage stability of the road: the two-bus closed form,
//! continuation in road length, loadability limits and collapse tracking.

mod collapse;
mod continuation;
mod family;
mod limits;
mod two_bus;

pub use collapse::{
    collapse_trajectory, collapse_trajectory_with, CollapseTrajectory, DrivePlan, TrackOptions,
    TrackState, TrajectoryPoint, COLLAPSE_THRESHOLD,
};
pub use continuation::{
    trace_family, trace_nose_curve, CurvePoint, NoseCurve, NosePoint, SolutionBranch, TraceOptions,
};
pub use family::{LengthFamily, PERTURBED_MAGNITUDES, PERTURBED_STARTS};
pub use limits::{
    critical_length, critical_length_of, fleet_at_road_end, max_vehicle_count,
    max_vehicle_count_with, CriticalLength, VehicleCount, LENGTH_BRACKET_KM,
};
pub use two_bus::{two_bus_pr_equivalence_check, two_bus_roots, TwoBusCase};
