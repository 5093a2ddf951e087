use crate::error::{config_err, Result};
use crate::mdp::{StateId, TabularMdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLayout {
    pub k: usize,
}

impl TreeLayout {
    pub fn root(&self) -> StateId {
        StateId(0)
    }

    pub fn chooser(&self) -> StateId {
        StateId(1)
    }

    pub fn leaf(&self, i: usize) -> StateId {
        assert!(i < self.k);
        StateId(2 + i)
    }
}

/// Depth-two tree: the root's single `start` action leads to a chooser node
/// whose `k` actions each end the episode in a distinct leaf. All rewards are 0.
pub fn make_tree(k: usize) -> Result<TabularMdp> {
    if k < 1 {
        return config_err("tree needs at least one leaf");
    }
    let mut b = TabularMdp::builder(k + 2, k)
        .initial(0)
        .actions_at(0, 1)
        .state_label(0, "root")
        .state_label(1, "chooser")
        .action_label(0, "start")
        .edge(0, 0, 1, 0.0);
    for i in 0..k {
        b = b
            .edge(1, i, 2 + i, 0.0)
            .terminal(2 + i)
            .state_label(2 + i, format!("leaf{i}"));
        if i > 0 {
            b = b.action_label(i, format!("leaf{i}"));
        }
    }
    b.build()
}
