//! Tabular learners: Q-learning values, on-policy E-values, visit counters and
//! the Delayed Q-Learning baseline.
//!
//! E-values are stored as `ln E`. Repeated visits drive `E` geometrically
//! toward zero (`0.9^n` leaves the normal `f64` range after roughly 6700
//! visits) while `ln E` stays well scaled, and the generalized counter
//! `log_{1-a} E` is a plain ratio of logarithms.

use crate::error::{config_err, Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp, Transition};

/// Dense per-(state, action) layout with a per-state action count.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    num_actions: usize,
    actions: Vec<usize>,
}

impl Layout {
    fn of(mdp: &TabularMdp) -> Self {
        Self {
            num_actions: mdp.num_actions(),
            actions: mdp.action_counts().to_vec(),
        }
    }

    fn idx(&self, s: StateId, a: ActionId) -> usize {
        debug_assert!(a.0 < self.num_actions);
        s.0 * self.num_actions + a.0
    }

    fn row(&self, s: StateId) -> std::ops::Range<usize> {
        let start = s.0 * self.num_actions;
        start..start + self.actions[s.0]
    }

    fn len(&self) -> usize {
        self.actions.len() * self.num_actions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    layout: Layout,
    values: Vec<f64>,
    init_value: f64,
}

impl ValueTable {
    pub fn new(mdp: &TabularMdp, init_value: f64) -> Self {
        let layout = Layout::of(mdp);
        let values = vec![init_value; layout.len()];
        Self {
            layout,
            values,
            init_value,
        }
    }

    pub fn init_value(&self) -> f64 {
        self.init_value
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[self.layout.idx(s, a)]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        let i = self.layout.idx(s, a);
        self.values[i] = v;
    }

    /// Values of the actions available at `s`.
    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[self.layout.row(s)]
    }

    /// `max_a Q(s, a)`; 0 for states without actions.
    pub fn max_at(&self, s: StateId) -> f64 {
        let row = self.row(s);
        if row.is_empty() {
            0.0
        } else {
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// Greedy action at `s`, lowest index on ties.
    pub fn argmax_at(&self, s: StateId) -> ActionId {
        ActionId(argmax(self.row(s)))
    }

    pub fn num_states(&self) -> usize {
        self.layout.actions.len()
    }

    pub fn num_actions(&self) -> usize {
        self.layout.num_actions
    }

    pub fn actions_at(&self, s: StateId) -> usize {
        self.layout.actions[s.0]
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Q-learning update of the visited pair toward `r + gamma max_a Q(s', a)`,
/// with a zero bootstrap when the transition ends the episode.
pub fn q_update(q: &mut ValueTable, tr: &Transition, alpha: f64, gamma: f64) {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    let bootstrap = if tr.done { 0.0 } else { q.max_at(tr.next) };
    let old = q.get(tr.s, tr.a);
    q.set(tr.s, tr.a, (1.0 - alpha) * old + alpha * (tr.r + gamma * bootstrap));
}

/// E-values learned by SARSA on the reward-free copy of the MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationTable {
    layout: Layout,
    log_e: Vec<f64>,
    alpha: f64,
    gamma: f64,
    ln_keep: f64,
    ln_pass: f64,
}

impl ExplorationTable {
    /// Every entry starts at exactly 1.
    pub fn new(mdp: &TabularMdp, alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return config_err(format!("E-value learning rate must lie in (0, 1), got {alpha}"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return config_err(format!("E-value discount must lie in [0, 1), got {gamma}"));
        }
        let layout = Layout::of(mdp);
        let log_e = vec![0.0; layout.len()];
        Ok(Self {
            layout,
            log_e,
            alpha,
            gamma,
            ln_keep: (1.0 - alpha).ln(),
            ln_pass: (alpha * gamma).ln(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.log_e[self.layout.idx(s, a)].exp()
    }

    pub fn ln_get(&self, s: StateId, a: ActionId) -> f64 {
        self.log_e[self.layout.idx(s, a)]
    }

    /// `E(s,a) <- (1 - a) E(s,a) + a gamma_E E(s',a')`, with the bootstrap
    /// dropped when `next` is `None` (terminal successor).
    pub fn update(&mut self, s: StateId, a: ActionId, next: Option<(StateId, ActionId)>) {
        let i = self.layout.idx(s, a);
        let keep = self.ln_keep + self.log_e[i];
        self.log_e[i] = match next {
            Some((s2, a2)) if self.gamma > 0.0 => {
                let pass = self.ln_pass + self.log_e[self.layout.idx(s2, a2)];
                log_add_exp(keep, pass)
            }
            _ => keep,
        };
    }

    /// `log_{1-a} E(s, a)`: zero for an untouched pair, `n` after `n` visits
    /// when `gamma_E = 0`.
    pub fn generalized_counter(&self, s: StateId, a: ActionId) -> f64 {
        let ln_e = self.ln_get(s, a);
        if ln_e == 0.0 {
            0.0
        } else {
            ln_e / self.ln_keep
        }
    }

    /// Generalized counters of the actions available at `s`.
    pub fn counters_into(&self, s: StateId, out: &mut Vec<f64>) {
        out.clear();
        let ln_keep = self.ln_keep;
        out.extend(self.log_e[self.layout.row(s)].iter().map(|&l| {
            if l == 0.0 {
                0.0
            } else {
                l / ln_keep
            }
        }));
    }
}

/// SARSA E-value update as a free function over an explicit successor.
pub fn e_update(
    e: &mut ExplorationTable,
    s: StateId,
    a: ActionId,
    next: StateId,
    next_action: ActionId,
    done: bool,
) {
    let succ = if done { None } else { Some((next, next_action)) };
    e.update(s, a, succ);
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log_{1-alpha}(e)` computed as `ln e / ln(1 - alpha)`.
///
/// Panics unless `0 < e <= 1` and `0 < alpha < 1`.
pub fn generalized_counter(e: f64, alpha: f64) -> f64 {
    assert!(
        e > 0.0 && e <= 1.0,
        "E-value {e} outside (0, 1]: generalized counter undefined"
    );
    assert!(alpha > 0.0 && alpha < 1.0, "alpha {alpha} outside (0, 1)");
    if e == 1.0 {
        0.0
    } else {
        e.ln() / (1.0 - alpha).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounter {
    layout: Layout,
    counts: Vec<u64>,
    total: u64,
}

impl VisitCounter {
    pub fn new(mdp: &TabularMdp) -> Self {
        let layout = Layout::of(mdp);
        let counts = vec![0; layout.len()];
        Self {
            layout,
            counts,
            total: 0,
        }
    }

    pub fn record(&mut self, s: StateId, a: ActionId) {
        let i = self.layout.idx(s, a);
        self.counts[i] += 1;
        self.total += 1;
    }

    pub fn get(&self, s: StateId, a: ActionId) -> u64 {
        self.counts[self.layout.idx(s, a)]
    }

    pub fn row(&self, s: StateId) -> &[u64] {
        &self.counts[self.layout.row(s)]
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Delayed Q-Learning (Strehl et al. 2006) with optimistic `1/(1-gamma)` init.
///
/// Each pair collects `m` bootstrapped targets before attempting an update,
/// and the update only lands if it lowers the value by at least `2 eps1`.
#[derive(Debug, Clone)]
pub struct DelayedQ {
    q: ValueTable,
    u: Vec<f64>,
    l: Vec<u32>,
    learn: Vec<bool>,
    t_last_attempt: Vec<u64>,
    t_star: u64,
    m: u32,
    epsilon1: f64,
    gamma: f64,
}

impl DelayedQ {
    pub fn new(mdp: &TabularMdp, m: u32, epsilon1: f64) -> Result<Self> {
        let gamma = mdp.discount();
        if !(gamma > 0.0 && gamma < 1.0) {
            return config_err("delayed Q-learning needs 0 < gamma < 1");
        }
        if m == 0 {
            return config_err("delayed Q-learning needs m >= 1");
        }
        if !(epsilon1 >= 0.0) {
            return config_err("delayed Q-learning needs eps1 >= 0");
        }
        let (lo, hi) = mdp.reward_range();
        if lo < 0.0 || hi > 1.0 {
            return config_err(format!(
                "delayed Q-learning assumes rewards in [0, 1], environment spans [{lo}, {hi}]"
            ));
        }
        let q = ValueTable::new(mdp, 1.0 / (1.0 - gamma));
        let n = q.layout.len();
        Ok(Self {
            q,
            u: vec![0.0; n],
            l: vec![0; n],
            learn: vec![true; n],
            t_last_attempt: vec![0; n],
            t_star: 0,
            m,
            epsilon1,
            gamma,
        })
    }

    pub fn q(&self) -> &ValueTable {
        &self.q
    }

    pub fn samples(&self, s: StateId, a: ActionId) -> u32 {
        self.l[self.q.layout.idx(s, a)]
    }

    pub fn is_learning(&self, s: StateId, a: ActionId) -> bool {
        self.learn[self.q.layout.idx(s, a)]
    }

    /// Processes the transition observed at global step `t` (1-based).
    /// Returns whether a successful update occurred.
    pub fn step(&mut self, tr: &Transition, t: u64) -> Result<bool> {
        if !(0.0..=1.0).contains(&tr.r) {
            return Err(Error::Config(format!(
                "delayed Q-learning received reward {} outside [0, 1]",
                tr.r
            )));
        }
        let i = self.q.layout.idx(tr.s, tr.a);
        if !self.learn[i] {
            if self.t_last_attempt[i] < self.t_star {
                self.learn[i] = true;
            }
            return Ok(false);
        }
        let bootstrap = if tr.done { 0.0 } else { self.q.max_at(tr.next) };
        self.u[i] += tr.r + self.gamma * bootstrap;
        self.l[i] += 1;
        if self.l[i] < self.m {
            return Ok(false);
        }
        let target = self.u[i] / self.m as f64;
        let mut updated = false;
        if self.q.values[i] - target >= 2.0 * self.epsilon1 {
            self.q.values[i] = target + self.epsilon1;
            self.t_star = t;
            updated = true;
        } else if self.t_last_attempt[i] >= self.t_star {
            self.learn[i] = false;
        }
        self.t_last_attempt[i] = t;
        self.u[i] = 0.0;
        self.l[i] = 0;
        Ok(updated)
    }
}

/// Flat `s,a,q,e,c` CSV rows for one table snapshot.
pub fn snapshot_csv(
    q: &ValueTable,
    e: &ExplorationTable,
    c: &VisitCounter,
) -> String {
    let mut out = String::from("s,a,q,e,c\n");
    for s in 0..q.num_states() {
        let s = StateId(s);
        for a in 0..q.actions_at(s) {
            let a = ActionId(a);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.0,
                a.0,
                q.get(s, a),
                e.get(s, a),
                c.get(s, a)
            ));
        }
    }
    out
}
