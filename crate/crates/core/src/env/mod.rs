//! Benchmark environments: bridge, tree and cliff (tabular) plus sparse-reward
//! mountain car (continuous).

mod bridge;
mod cliff;
mod mountain_car;
mod tree;

pub use bridge::{make_bridge, BridgeLayout, EAST, WEST};
pub use cliff::{make_cliff, CliffLayout};
pub use mountain_car::{ContinuousState, MountainCarEnv, POSITION_BOUNDS, VELOCITY_BOUNDS};
pub use tree::{make_tree, TreeLayout};
