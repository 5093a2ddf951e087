use crate::error::{config_err, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};

pub const EAST: ActionId = ActionId(0);
pub const WEST: ActionId = ActionId(1);

const GOAL_REWARD: f64 = 10.0;
const TRAP_REWARD: f64 = 1.0;

/// State indices of a bridge of length `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BridgeLayout {
    pub k: usize,
}

impl BridgeLayout {
    pub fn start(&self) -> StateId {
        StateId(0)
    }

    pub fn cell(&self, i: usize) -> StateId {
        assert!(i >= 1 && i <= self.k);
        StateId(i)
    }

    pub fn goal(&self) -> StateId {
        StateId(self.k + 1)
    }

    pub fn trap(&self) -> StateId {
        StateId(self.k + 2)
    }
}

/// Bridge MDP: a line of `k` cells between a start state and a distant goal.
///
/// West from the start falls into the trap for a small immediate reward; east
/// from the last cell reaches the goal for a large one. Every other move is
/// free. With `normalized` all rewards are divided by the goal reward.
pub fn make_bridge(k: usize, normalized: bool) -> Result<TabularMdp> {
    if k < 1 {
        return config_err("bridge length k must be at least 1");
    }
    let layout = BridgeLayout { k };
    let scale = if normalized { 1.0 / GOAL_REWARD } else { 1.0 };
    let (goal, trap) = (layout.goal().0, layout.trap().0);

    let mut b = TabularMdp::builder(k + 3, 2)
        .discount(0.9)
        .initial(0)
        .terminal(goal)
        .terminal(trap)
        .action_label(EAST.0, "east")
        .action_label(WEST.0, "west")
        .state_label(0, "start")
        .state_label(goal, "goal")
        .state_label(trap, "trap")
        .edge(0, EAST.0, 1, 0.0)
        .edge(0, WEST.0, trap, TRAP_REWARD * scale);
    for i in 1..=k {
        b = b.state_label(i, format!("cell{i}"));
        b = if i == k {
            b.edge(i, EAST.0, goal, GOAL_REWARD * scale)
        } else {
            b.edge(i, EAST.0, i + 1, 0.0)
        };
        b = b.edge(i, WEST.0, i - 1, 0.0);
    }
    b.build()
}
