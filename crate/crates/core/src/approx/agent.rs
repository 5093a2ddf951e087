use super::heads::{LinearQHead, LogisticEHead};
use super::tiles::{SparseFeatures, TileCoder};
use crate::agent::{AgentKind, AgentParams};
use crate::env::{ContinuousState, MountainCarEnv};
use crate::error::{Error, Result};
use crate::mdp::ActionId;
use crate::rng::SeededRng;
use crate::select::{lll_select, sample_action, ucb_select, BonusForm, StochasticRule};
use crate::tables::argmax;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEpisode {
    pub steps: usize,
    pub success: bool,
}

/// Q and E heads learned in parallel over shared tile-coded features.
///
/// Q follows semi-gradient Q-learning, E follows SARSA on the realized next
/// action. Counter-based kinds and Delayed Q have no continuous analogue.
#[derive(Debug, Clone)]
pub struct LinearAgent {
    kind: AgentKind,
    params: AgentParams,
    gamma: f64,
    rule: StochasticRule,
    bonus: BonusForm,
    coder: TileCoder,
    q: LinearQHead,
    e: LogisticEHead,
    steps: u64,
    base: Vec<usize>,
    cur: Vec<SparseFeatures>,
    next: Vec<SparseFeatures>,
    dist: Vec<f64>,
    qs: Vec<f64>,
    gcs: Vec<f64>,
}

impl LinearAgent {
    pub fn new(
        kind: AgentKind,
        params: AgentParams,
        gamma: f64,
        coder: TileCoder,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if kind.uses_counters() || kind == AgentKind::DelayedQ {
            return Err(Error::Config(format!(
                "agent '{kind}' needs a tabular environment"
            )));
        }
        if !(params.alpha_e > 0.0 && params.alpha_e < 1.0) || !(0.0..1.0).contains(&params.gamma_e)
        {
            return Err(Error::Config("E-value alpha must lie in (0, 1) and gamma_E in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("discount must lie in [0, 1), got {gamma}")));
        }
        let n = coder.num_features();
        let na = coder.num_actions();
        Ok(Self {
            kind,
            params,
            gamma,
            rule: params.rule(kind)?,
            bonus: BonusForm::inverse_sqrt_neglog(params.beta),
            q: LinearQHead::new(n, rng),
            e: LogisticEHead::new(n),
            steps: 0,
            base: Vec::with_capacity(coder.num_tilings()),
            cur: vec![SparseFeatures::default(); na],
            next: vec![SparseFeatures::default(); na],
            dist: Vec::with_capacity(na),
            qs: Vec::with_capacity(na),
            gcs: Vec::with_capacity(na),
            coder,
        })
    }

    pub fn coder(&self) -> &TileCoder {
        &self.coder
    }

    pub fn q_head(&self) -> &LinearQHead {
        &self.q
    }

    pub fn e_head(&self) -> &LogisticEHead {
        &self.e
    }

    fn encode(coder: &TileCoder, base: &mut Vec<usize>, s: ContinuousState, out: &mut [SparseFeatures]) {
        coder.base_indices(s.as_array(), base);
        for (a, f) in out.iter_mut().enumerate() {
            coder.with_action(base, ActionId(a), f);
        }
    }

    fn gc_scale(&self) -> f64 {
        (1.0 - self.params.alpha_e).ln()
    }

    fn select(&mut self, feats: &[SparseFeatures], rng: &mut SeededRng) -> ActionId {
        self.qs.clear();
        self.qs.extend(feats.iter().map(|f| self.q.predict(f)));
        let scale = self.gc_scale();
        let fill_gc = |gcs: &mut Vec<f64>, e: &LogisticEHead| {
            gcs.clear();
            gcs.extend(feats.iter().map(|f| e.ln_predict(f) / scale));
        };
        match self.kind {
            AgentKind::UcbEvalue => {
                fill_gc(&mut self.gcs, &self.e);
                ucb_select(&self.qs, &self.gcs, self.steps + 1)
            }
            AgentKind::EGreedyLllEvalue | AgentKind::SoftmaxLllEvalue => {
                self.rule.distribution_into(&self.qs, &mut self.dist);
                fill_gc(&mut self.gcs, &self.e);
                lll_select(&self.dist, &self.gcs)
            }
            _ => {
                self.rule.distribution_into(&self.qs, &mut self.dist);
                sample_action(&self.dist, rng)
            }
        }
    }

    /// Runs one episode; every state the agent acts from is appended to
    /// `visits` when given.
    pub fn run_episode(
        &mut self,
        env: &MountainCarEnv,
        rng: &mut SeededRng,
        mut visits: Option<&mut Vec<ContinuousState>>,
    ) -> Result<LinearEpisode> {
        let mut cur = std::mem::take(&mut self.cur);
        let mut next = std::mem::take(&mut self.next);
        let result = self.episode_inner(env, rng, &mut visits, &mut cur, &mut next);
        self.cur = cur;
        self.next = next;
        result
    }

    fn episode_inner(
        &mut self,
        env: &MountainCarEnv,
        rng: &mut SeededRng,
        visits: &mut Option<&mut Vec<ContinuousState>>,
        cur: &mut Vec<SparseFeatures>,
        next: &mut Vec<SparseFeatures>,
    ) -> Result<LinearEpisode> {
        let mut s = env.reset(rng);
        Self::encode(&self.coder, &mut self.base, s, cur);
        let mut a = self.select(cur, rng);
        for t in 0..env.step_cap {
            if let Some(v) = visits.as_deref_mut() {
                v.push(s);
            }
            let (s2, r, done) = env.step(s, a, t);
            self.steps += 1;
            let a2 = if done {
                None
            } else {
                Self::encode(&self.coder, &mut self.base, s2, next);
                Some(self.select(next, rng))
            };
            let phi = &cur[a.0];
            self.e.td_step(
                phi,
                a2.map(|a2| &next[a2.0]),
                self.params.gamma_e,
                self.params.alpha_e,
            );
            let mut reward = r;
            if self.kind == AgentKind::EGreedyBonus {
                let gc = self.e.ln_predict(phi) / self.gc_scale();
                reward += self.bonus.bonus(gc, self.params.alpha_e);
            }
            let greedy = a2.map(|_| {
                self.qs.clear();
                self.qs.extend(next.iter().map(|f| self.q.predict(f)));
                &next[argmax(&self.qs)]
            });
            self.q
                .td_step(phi, reward, greedy, self.gamma, self.params.alpha)?;
            match a2 {
                None => {
                    return Ok(LinearEpisode {
                        steps: t + 1,
                        success: r > 0.0,
                    })
                }
                Some(a2) => {
                    std::mem::swap(cur, next);
                    s = s2;
                    a = a2;
                }
            }
        }
        unreachable!("mountain car always ends by the step cap")
    }
}
