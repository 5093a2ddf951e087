//! Tabular agents and the episode loop.
//!
//! Every agent learns Q-values with Q-learning and, alongside, E-values with
//! SARSA and plain visit counters. The agent kind decides which of these drive
//! action selection.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp, Transition};
use crate::rng::SeededRng;
use crate::select::{
    lll_select, sample_action, ucb_select, BonusForm, StochasticRule,
};
use crate::tables::{q_update, DelayedQ, ExplorationTable, ValueTable, VisitCounter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    EGreedy,
    Softmax,
    EGreedyLllCounter,
    EGreedyLllEvalue,
    SoftmaxLllCounter,
    SoftmaxLllEvalue,
    UcbCounter,
    UcbEvalue,
    EGreedyBonus,
    DelayedQ,
}

impl AgentKind {
    pub const ALL: [AgentKind; 10] = [
        AgentKind::EGreedy,
        AgentKind::Softmax,
        AgentKind::EGreedyLllCounter,
        AgentKind::EGreedyLllEvalue,
        AgentKind::SoftmaxLllCounter,
        AgentKind::SoftmaxLllEvalue,
        AgentKind::UcbCounter,
        AgentKind::UcbEvalue,
        AgentKind::EGreedyBonus,
        AgentKind::DelayedQ,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::EGreedy => "egreedy",
            AgentKind::Softmax => "softmax",
            AgentKind::EGreedyLllCounter => "egreedy-lll-counter",
            AgentKind::EGreedyLllEvalue => "egreedy-lll-evalue",
            AgentKind::SoftmaxLllCounter => "softmax-lll-counter",
            AgentKind::SoftmaxLllEvalue => "softmax-lll-evalue",
            AgentKind::UcbCounter => "ucb-counter",
            AgentKind::UcbEvalue => "ucb-evalue",
            AgentKind::EGreedyBonus => "egreedy-bonus",
            AgentKind::DelayedQ => "delayedq",
        }
    }

    /// Whether the base stochastic rule is softmax (otherwise epsilon-greedy).
    pub fn uses_softmax(&self) -> bool {
        matches!(
            self,
            AgentKind::Softmax | AgentKind::SoftmaxLllCounter | AgentKind::SoftmaxLllEvalue
        )
    }

    pub fn uses_evalues(&self) -> bool {
        matches!(
            self,
            AgentKind::EGreedyLllEvalue
                | AgentKind::SoftmaxLllEvalue
                | AgentKind::UcbEvalue
                | AgentKind::EGreedyBonus
        )
    }

    pub fn uses_counters(&self) -> bool {
        matches!(
            self,
            AgentKind::EGreedyLllCounter | AgentKind::SoftmaxLllCounter | AgentKind::UcbCounter
        )
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = AgentKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown agent '{s}'; valid agents: {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub alpha: f64,
    pub alpha_e: f64,
    pub gamma_e: f64,
    pub epsilon: f64,
    pub temperature: f64,
    pub beta: f64,
    pub m: u32,
    pub epsilon1: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            alpha_e: 0.1,
            gamma_e: 0.9,
            epsilon: 0.1,
            temperature: 0.25,
            beta: 1.0,
            m: 10,
            epsilon1: 0.01,
        }
    }
}

impl AgentParams {
    pub fn rule(&self, kind: AgentKind) -> Result<StochasticRule> {
        if kind.uses_softmax() {
            StochasticRule::softmax(self.temperature)
        } else {
            StochasticRule::epsilon_greedy(self.epsilon)
        }
    }
}

/// Per-episode summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub total_reward: f64,
    /// Whether the episode ended in a terminal state (not truncated).
    pub terminated: bool,
}

#[derive(Debug, Clone)]
pub struct TabularAgent {
    kind: AgentKind,
    params: AgentParams,
    rule: StochasticRule,
    bonus: BonusForm,
    gamma: f64,
    q: ValueTable,
    e: ExplorationTable,
    counts: VisitCounter,
    delayed: Option<DelayedQ>,
    steps: u64,
    dist: Vec<f64>,
    scratch: Vec<f64>,
}

impl TabularAgent {
    pub fn new(kind: AgentKind, params: AgentParams, mdp: &TabularMdp) -> Result<Self> {
        if !(params.alpha > 0.0 && params.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate must lie in (0, 1], got {}",
                params.alpha
            )));
        }
        let delayed = match kind {
            AgentKind::DelayedQ => Some(DelayedQ::new(mdp, params.m, params.epsilon1)?),
            _ => None,
        };
        Ok(Self {
            kind,
            params,
            rule: params.rule(kind)?,
            bonus: BonusForm::inverse_counter(params.beta),
            gamma: mdp.discount(),
            q: ValueTable::new(mdp, 0.0),
            e: ExplorationTable::new(mdp, params.alpha_e, params.gamma_e)?,
            counts: VisitCounter::new(mdp),
            delayed,
            steps: 0,
            dist: Vec::new(),
            scratch: Vec::new(),
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    /// The Q-values used for evaluation (Delayed Q's own table for that kind).
    pub fn q(&self) -> &ValueTable {
        match &self.delayed {
            Some(d) => d.q(),
            None => &self.q,
        }
    }

    pub fn e(&self) -> &ExplorationTable {
        &self.e
    }

    pub fn counts(&self) -> &VisitCounter {
        &self.counts
    }

    pub fn total_steps(&self) -> u64 {
        self.steps
    }

    /// Chooses an action at `s` under the agent's rule.
    pub fn select(&mut self, s: StateId, rng: &mut SeededRng) -> ActionId {
        let kind = self.kind;
        if kind == AgentKind::DelayedQ {
            return self.q().argmax_at(s);
        }
        match kind {
            AgentKind::UcbCounter => {
                self.scratch.clear();
                self.scratch
                    .extend(self.counts.row(s).iter().map(|&c| c as f64));
                ucb_select(self.q.row(s), &self.scratch, self.steps + 1)
            }
            AgentKind::UcbEvalue => {
                self.e.counters_into(s, &mut self.scratch);
                ucb_select(self.q.row(s), &self.scratch, self.steps + 1)
            }
            _ => {
                self.rule.distribution_into(self.q.row(s), &mut self.dist);
                if kind.uses_counters() {
                    self.scratch.clear();
                    self.scratch
                        .extend(self.counts.row(s).iter().map(|&c| c as f64));
                    lll_select(&self.dist, &self.scratch)
                } else if kind.uses_evalues() && kind != AgentKind::EGreedyBonus {
                    self.e.counters_into(s, &mut self.scratch);
                    lll_select(&self.dist, &self.scratch)
                } else {
                    sample_action(&self.dist, rng)
                }
            }
        }
    }

    /// Learns from one transition; `next_action` is the action that will be
    /// taken at `tr.next` (ignored when `tr.done`).
    pub fn learn(&mut self, tr: &Transition, next_action: Option<ActionId>) -> Result<()> {
        let succ = if tr.done {
            None
        } else {
            next_action.map(|a2| (tr.next, a2))
        };
        self.e.update(tr.s, tr.a, succ);
        match &mut self.delayed {
            Some(d) => {
                d.step(tr, self.steps)?;
            }
            None => {
                let mut shaped = *tr;
                if self.kind == AgentKind::EGreedyBonus {
                    let gc = self.e.generalized_counter(tr.s, tr.a);
                    shaped.r += self.bonus.bonus(gc, self.params.alpha_e);
                }
                q_update(&mut self.q, &shaped, self.params.alpha, self.gamma);
                let v = self.q.get(tr.s, tr.a);
                if !v.is_finite() {
                    return Err(Error::Divergence(format!(
                        "Q({}, {}) became {v}",
                        tr.s.0, tr.a.0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Runs one episode, truncating after `max_steps` transitions.
    pub fn run_episode(
        &mut self,
        mdp: &TabularMdp,
        rng: &mut SeededRng,
        max_steps: usize,
    ) -> Result<EpisodeSummary> {
        let mut s = mdp.reset();
        let mut a = self.select(s, rng);
        let mut summary = EpisodeSummary {
            steps: 0,
            total_reward: 0.0,
            terminated: false,
        };
        while summary.steps < max_steps {
            let tr = mdp.step(s, a, rng);
            self.counts.record(tr.s, tr.a);
            self.steps += 1;
            summary.steps += 1;
            summary.total_reward += tr.r;
            let next_action = if tr.done {
                None
            } else {
                Some(self.select(tr.next, rng))
            };
            self.learn(&tr, next_action)?;
            if tr.done {
                summary.terminated = true;
                break;
            }
            s = tr.next;
            a = next_action.expect("non-terminal successor has an action");
        }
        Ok(summary)
    }
}

/// One episode of DORA with the LLL determinization over E-values.
///
/// Tables must start at `Q = 0`, `E = 1`. Returns the transitions taken.
pub fn dora_episode(
    mdp: &TabularMdp,
    q: &mut ValueTable,
    e: &mut ExplorationTable,
    rule: &StochasticRule,
    alpha: f64,
    rng: &mut SeededRng,
    max_steps: usize,
) -> Vec<Transition> {
    let gamma = mdp.discount();
    let mut dist = Vec::new();
    let mut gc = Vec::new();
    let mut choose = |q: &ValueTable, e: &ExplorationTable, s: StateId| {
        rule.distribution_into(q.row(s), &mut dist);
        e.counters_into(s, &mut gc);
        lll_select(&dist, &gc)
    };

    let mut trace = Vec::new();
    let mut s = mdp.reset();
    let mut a = choose(q, e, s);
    while trace.len() < max_steps {
        let tr = mdp.step(s, a, rng);
        let next_action = (!tr.done).then(|| choose(q, e, tr.next));
        q_update(q, &tr, alpha, gamma);
        e.update(tr.s, tr.a, next_action.map(|a2| (tr.next, a2)));
        trace.push(tr);
        match next_action {
            Some(a2) => {
                s = tr.next;
                a = a2;
            }
            None => break,
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_bridge, make_tree, TreeLayout, EAST};

    #[test]
    fn names_round_trip() {
        for kind in AgentKind::ALL {
            assert_eq!(kind.name().parse::<AgentKind>().unwrap(), kind);
        }
        let err = "greedy".parse::<AgentKind>().unwrap_err().to_string();
        assert!(err.contains("egreedy-lll-evalue"));
    }

    #[test]
    fn tree_leaves_visited_in_turn() {
        let k = 5;
        let mdp = make_tree(k).unwrap();
        let layout = TreeLayout { k };
        let rule = StochasticRule::softmax(1.0).unwrap();
        let mut q = ValueTable::new(&mdp, 0.0);
        let mut e = ExplorationTable::new(&mdp, 0.1, 0.9).unwrap();
        let mut rng = SeededRng::new(0);
        let mut leaves = Vec::new();
        for _ in 0..k {
            let trace = dora_episode(&mdp, &mut q, &mut e, &rule, 0.1, &mut rng, 100);
            let last = trace.last().unwrap();
            assert!(last.done);
            leaves.push(last.next);
        }
        let mut sorted = leaves.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), k);
        assert!(leaves.iter().all(|&l| (0..k).any(|i| layout.leaf(i) == l)));
    }

    #[test]
    fn start_e_value_decreases_on_bridge() {
        let mdp = make_bridge(5, false).unwrap();
        let rule = StochasticRule::epsilon_greedy(0.1).unwrap();
        let mut q = ValueTable::new(&mdp, 0.0);
        let mut e = ExplorationTable::new(&mdp, 0.1, 0.9).unwrap();
        let mut rng = SeededRng::new(0);
        let mut prev = e.get(StateId(0), EAST);
        let mut decreases = 0;
        for _ in 0..200 {
            let trace = dora_episode(&mdp, &mut q, &mut e, &rule, 0.1, &mut rng, 100_000);
            let now = e.get(StateId(0), EAST);
            assert!(now <= prev);
            let took_east = trace.iter().any(|tr| tr.s == StateId(0) && tr.a == EAST);
            if took_east {
                assert!(now < prev);
                decreases += 1;
            }
            prev = now;
        }
        assert!(decreases > 0);
    }

    #[test]
    fn zero_reward_q_stays_zero() {
        let mdp = make_tree(3).unwrap();
        let rule = StochasticRule::epsilon_greedy(0.2).unwrap();
        let mut q = ValueTable::new(&mdp, 0.0);
        let mut e = ExplorationTable::new(&mdp, 0.1, 0.9).unwrap();
        let mut rng = SeededRng::new(3);
        for _ in 0..100 {
            dora_episode(&mdp, &mut q, &mut e, &rule, 0.1, &mut rng, 100);
        }
        for s in 0..2 {
            assert!(q.row(StateId(s)).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn agent_matches_dora_episode() {
        let mdp = make_bridge(5, false).unwrap();
        let params = AgentParams::default();
        let mut agent = TabularAgent::new(AgentKind::EGreedyLllEvalue, params, &mdp).unwrap();
        let rule = params.rule(AgentKind::EGreedyLllEvalue).unwrap();
        let mut q = ValueTable::new(&mdp, 0.0);
        let mut e = ExplorationTable::new(&mdp, params.alpha, params.gamma_e).unwrap();
        let (mut r1, mut r2) = (SeededRng::new(9), SeededRng::new(9));
        for _ in 0..300 {
            agent.run_episode(&mdp, &mut r1, 100_000).unwrap();
            dora_episode(&mdp, &mut q, &mut e, &rule, params.alpha, &mut r2, 100_000);
        }
        assert_eq!(agent.q(), &q);
        assert_eq!(agent.e(), &e);
    }

    #[test]
    fn delayedq_requires_normalized_rewards() {
        let mdp = make_bridge(5, false).unwrap();
        assert!(TabularAgent::new(AgentKind::DelayedQ, AgentParams::default(), &mdp).is_err());
        let mdp = make_bridge(5, true).unwrap();
        assert!(TabularAgent::new(AgentKind::DelayedQ, AgentParams::default(), &mdp).is_ok());
    }

    #[test]
    fn counters_track_steps() {
        let mdp = make_bridge(5, false).unwrap();
        let mut agent =
            TabularAgent::new(AgentKind::EGreedy, AgentParams::default(), &mdp).unwrap();
        let mut rng = SeededRng::new(1);
        let mut steps = 0;
        for _ in 0..50 {
            steps += agent.run_episode(&mdp, &mut rng, 10_000).unwrap().steps;
        }
        assert_eq!(agent.counts().total(), steps as u64);
        assert_eq!(agent.total_steps(), steps as u64);
    }
}
