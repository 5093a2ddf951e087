use crate::error::{config_err, Result};
use crate::mdp::{StateId, TabularMdp};

const STEP_REWARD: f64 = -1.0;
const CLIFF_REWARD: f64 = -100.0;

/// Row-major grid indexing; row 0 is the top row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CliffLayout {
    pub height: usize,
    pub width: usize,
}

impl CliffLayout {
    pub fn cell(&self, row: usize, col: usize) -> StateId {
        StateId(row * self.width + col)
    }

    pub fn start(&self) -> StateId {
        self.cell(self.height - 1, 0)
    }

    pub fn goal(&self) -> StateId {
        self.cell(self.height - 1, self.width - 1)
    }

    pub fn is_cliff(&self, s: StateId) -> bool {
        let (row, col) = (s.0 / self.width, s.0 % self.width);
        row == self.height - 1 && col > 0 && col < self.width - 1
    }
}

/// Cliff-walking gridworld. Actions are up, right, down, left; moves off the
/// grid leave the agent in place. Stepping into the cliff costs -100 and sends
/// the agent back to the start, every other move costs -1.
pub fn make_cliff(height: usize, width: usize) -> Result<TabularMdp> {
    if height < 2 || width < 2 {
        return config_err("cliff grid needs height >= 2 and width >= 2");
    }
    let g = CliffLayout { height, width };
    let moves: [(isize, isize, &str); 4] =
        [(-1, 0, "up"), (0, 1, "right"), (1, 0, "down"), (0, -1, "left")];

    let mut b = TabularMdp::builder(height * width, 4)
        .initial(g.start().0)
        .terminal(g.goal().0);
    for (a, (_, _, name)) in moves.iter().enumerate() {
        b = b.action_label(a, *name);
    }
    for row in 0..height {
        for col in 0..width {
            let s = g.cell(row, col);
            b = b.state_label(s.0, format!("r{row}c{col}"));
            if s == g.goal() {
                continue;
            }
            for (a, (dr, dc, _)) in moves.iter().enumerate() {
                let r2 = row as isize + dr;
                let c2 = col as isize + dc;
                let inside = r2 >= 0 && r2 < height as isize && c2 >= 0 && c2 < width as isize;
                let next = if inside {
                    g.cell(r2 as usize, c2 as usize)
                } else {
                    s
                };
                b = if g.is_cliff(next) {
                    b.edge(s.0, a, g.start().0, CLIFF_REWARD)
                } else {
                    b.edge(s.0, a, next.0, STEP_REWARD)
                };
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::ActionId;
    use crate::rng::SeededRng;

    #[test]
    fn standard_grid() {
        let mdp = make_cliff(4, 12).unwrap();
        assert_eq!(mdp.num_states(), 48);
        assert_eq!(mdp.num_actions(), 4);
        assert_eq!(mdp.reset(), CliffLayout { height: 4, width: 12 }.start());
    }

    #[test]
    fn walls_and_cliff() {
        let g = CliffLayout { height: 4, width: 12 };
        let mdp = make_cliff(4, 12).unwrap();
        let mut rng = SeededRng::new(0);
        let tr = mdp.step(g.start(), ActionId(3), &mut rng);
        assert_eq!((tr.next, tr.r), (g.start(), -1.0));
        let tr = mdp.step(g.start(), ActionId(1), &mut rng);
        assert_eq!((tr.next, tr.r, tr.done), (g.start(), -100.0, false));
        let tr = mdp.step(g.cell(2, 11), ActionId(2), &mut rng);
        assert!(tr.done);
    }

    #[test]
    fn too_small_rejected() {
        assert!(make_cliff(1, 12).is_err());
        assert!(make_cliff(4, 1).is_err());
    }
}
