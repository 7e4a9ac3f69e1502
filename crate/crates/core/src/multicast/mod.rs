//! Base-station multicast of layered video to groups of users.

pub mod budget;
pub mod fixing;
pub mod greedy;
pub mod sim;
pub mod tsa;

pub use budget::{base_tiles, estimate_budget, gop_budget};
pub use fixing::{relaxation_bound, sequential_fixing, FixingResult};
pub use greedy::{equal_allocation, exhaustive_optimum, grd1, grd1_state, grd2_adjust, PlannerState};
pub use sim::{run_infrastructure, AudienceChange, GroupOutcome, InfraConfig, InfraRun, InfraScheme, InfraSim};
pub use tsa::{expected_reward, tsa_schedule, Layer, QueuedTile, TileGrant};
