//! Finite MDPs with discrete transition and reward distributions.
//!
//! A [`TabularMdp`] is both the simulator agents interact with and the exact
//! model the evaluation oracle solves. States may expose different numbers of
//! actions (the tree MDP's root has one, its chooser node has `k`); tables are
//! still laid out densely as `num_states x num_actions`.

use crate::error::{config_err, Result};
use crate::rng::SeededRng;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: StateId,
    pub a: ActionId,
    pub r: f64,
    pub next: StateId,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    actions: Vec<usize>,
    transition: Vec<Vec<(StateId, f64)>>,
    reward: Vec<Vec<(f64, f64)>>,
    initial_state: StateId,
    terminal: Vec<bool>,
    discount: f64,
    state_labels: Vec<String>,
    action_labels: Vec<String>,
}

impl TabularMdp {
    pub fn builder(num_states: usize, num_actions: usize) -> MdpBuilder {
        MdpBuilder::new(num_states, num_actions)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Width of the dense table layout (max actions over states).
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of actions available at `s`; always `0..n`.
    pub fn actions_at(&self, s: StateId) -> usize {
        self.actions[s.0]
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.actions
    }

    pub fn initial_state(&self) -> StateId {
        self.initial_state
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return config_err(format!("discount must lie in [0, 1), got {discount}"));
        }
        self.discount = discount;
        Ok(self)
    }

    pub fn transitions(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.transition[s.0 * self.num_actions + a.0]
    }

    pub fn rewards(&self, s: StateId, a: ActionId) -> &[(f64, f64)] {
        &self.reward[s.0 * self.num_actions + a.0]
    }

    pub fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.rewards(s, a).iter().map(|(r, p)| r * p).sum()
    }

    /// Smallest and largest reward value with positive probability.
    pub fn reward_range(&self) -> (f64, f64) {
        self.reward
            .iter()
            .flatten()
            .filter(|(_, p)| *p > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (r, _)| {
                (lo.min(*r), hi.max(*r))
            })
    }

    pub fn state_label(&self, s: StateId) -> &str {
        &self.state_labels[s.0]
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.action_labels[a.0]
    }

    pub fn reset(&self) -> StateId {
        self.initial_state
    }

    /// Samples one transition from `(s, a)`.
    ///
    /// Point-mass distributions consume no randomness. Panics when `s` is
    /// terminal or `a` is not available at `s`.
    pub fn step(&self, s: StateId, a: ActionId, rng: &mut SeededRng) -> Transition {
        assert!(
            !self.terminal[s.0],
            "step called from terminal state {}",
            self.state_labels[s.0]
        );
        assert!(
            a.0 < self.actions[s.0],
            "action {} not available at state {}",
            a.0,
            self.state_labels[s.0]
        );
        let idx = s.0 * self.num_actions + a.0;
        let next = sample_discrete(&self.transition[idx], rng);
        let r = sample_discrete(&self.reward[idx], rng);
        Transition {
            s,
            a,
            r,
            next,
            done: self.terminal[next.0],
        }
    }
}

fn sample_discrete<T: Copy>(outcomes: &[(T, f64)], rng: &mut SeededRng) -> T {
    if outcomes.len() == 1 {
        return outcomes[0].0;
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    for &(value, p) in outcomes {
        acc += p;
        if u < acc {
            return value;
        }
    }
    // rounding left u above the final cumulative sum
    outcomes
        .iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(v, _)| *v)
        .expect("validated distribution has positive mass")
}

#[derive(Debug, Clone)]
pub struct MdpBuilder {
    num_states: usize,
    num_actions: usize,
    actions: Vec<usize>,
    transition: Vec<Vec<(StateId, f64)>>,
    reward: Vec<Vec<(f64, f64)>>,
    initial_state: StateId,
    terminal: Vec<bool>,
    discount: f64,
    state_labels: Vec<String>,
    action_labels: Vec<String>,
}

impl MdpBuilder {
    fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            actions: vec![num_actions; num_states],
            transition: vec![Vec::new(); num_states * num_actions],
            reward: vec![Vec::new(); num_states * num_actions],
            initial_state: StateId(0),
            terminal: vec![false; num_states],
            discount: 0.9,
            state_labels: (0..num_states).map(|s| s.to_string()).collect(),
            action_labels: (0..num_actions).map(|a| a.to_string()).collect(),
        }
    }

    pub fn discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn initial(mut self, s: usize) -> Self {
        self.initial_state = StateId(s);
        self
    }

    pub fn terminal(mut self, s: usize) -> Self {
        self.terminal[s] = true;
        self.actions[s] = 0;
        self
    }

    pub fn actions_at(mut self, s: usize, n: usize) -> Self {
        self.actions[s] = n;
        self
    }

    pub fn state_label(mut self, s: usize, label: impl Into<String>) -> Self {
        self.state_labels[s] = label.into();
        self
    }

    pub fn action_label(mut self, a: usize, label: impl Into<String>) -> Self {
        self.action_labels[a] = label.into();
        self
    }

    pub fn transition(mut self, s: usize, a: usize, outcomes: Vec<(usize, f64)>) -> Self {
        self.transition[s * self.num_actions + a] =
            outcomes.into_iter().map(|(n, p)| (StateId(n), p)).collect();
        self
    }

    pub fn reward(mut self, s: usize, a: usize, outcomes: Vec<(f64, f64)>) -> Self {
        self.reward[s * self.num_actions + a] = outcomes;
        self
    }

    /// Point-mass transition with a deterministic reward.
    pub fn edge(self, s: usize, a: usize, next: usize, r: f64) -> Self {
        self.transition(s, a, vec![(next, 1.0)]).reward(s, a, vec![(r, 1.0)])
    }

    pub fn build(self) -> Result<TabularMdp> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 0 || na == 0 {
            return config_err("MDP needs at least one state and one action");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return config_err(format!("discount must lie in [0, 1), got {}", self.discount));
        }
        if self.initial_state.0 >= ns {
            return config_err("initial state out of range");
        }
        for s in 0..ns {
            if self.actions[s] > na {
                return config_err(format!("state {s} declares more than {na} actions"));
            }
            if !self.terminal[s] && self.actions[s] == 0 {
                return config_err(format!("non-terminal state {s} has no actions"));
            }
            for a in 0..self.actions[s] {
                let idx = s * na + a;
                let tr = &self.transition[idx];
                if tr.iter().any(|(n, p)| n.0 >= ns || !(*p >= 0.0)) {
                    return config_err(format!("invalid transition entry at ({s}, {a})"));
                }
                check_mass(tr.iter().map(|(_, p)| *p), s, a, "transition")?;
                let rw = &self.reward[idx];
                if rw.iter().any(|(r, p)| !r.is_finite() || !(*p >= 0.0)) {
                    return config_err(format!("invalid reward entry at ({s}, {a})"));
                }
                check_mass(rw.iter().map(|(_, p)| *p), s, a, "reward")?;
            }
        }
        Ok(TabularMdp {
            num_states: ns,
            num_actions: na,
            actions: self.actions,
            transition: self.transition,
            reward: self.reward,
            initial_state: self.initial_state,
            terminal: self.terminal,
            discount: self.discount,
            state_labels: self.state_labels,
            action_labels: self.action_labels,
        })
    }
}

fn check_mass(ps: impl Iterator<Item = f64>, s: usize, a: usize, what: &str) -> Result<()> {
    let total: f64 = ps.sum();
    if (total - 1.0).abs() > PROB_TOL {
        return config_err(format!(
            "{what} probabilities at ({s}, {a}) sum to {total}, expected 1"
        ));
    }
    Ok(())
}
