//! Multi-hop streaming: sessions routed over delay-bounded paths, each
//! carrying several amplify-and-forward tunnels on sensed-idle channels.

pub mod dual;
pub mod plan;
pub mod schedule;
pub mod select;
pub mod sim;
pub mod topology;

pub use dual::{dual_path_select, round_relaxed, DualOutcome, DualParams, Rounding, StepRule};
pub use plan::{validate_plan, PlannedPath, SessionPlan};
pub use schedule::{path_gain, schedule_channels, tunnel_loss, ChannelSchedule, LinkChannels};
pub use select::{brute_force_crv, centralized_sf, heuristic, lp_multipliers, BruteCaps, PathOption, PathProblem};
pub use sim::{run_multihop, MultihopConfig, MultihopRun, MultihopScheme, SlotRecord};
pub use topology::{enumerate_paths, Link, Session, Topology};
