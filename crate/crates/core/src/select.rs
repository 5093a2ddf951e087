//! Action-selection rules.
//!
//! Stochastic rules (epsilon-greedy, softmax) produce a target distribution
//! `f(a)`. The determinized rules pick deterministically so that empirical
//! action frequencies track `f`:
//!
//! * [`mindiff_select`] picks `argmin_a C(a)/C - f(a)`, the most under-served
//!   action, which keeps every over-representation within `1/t`;
//! * [`lll_select`] picks `argmax_a log f(a) - log C(a)`, where `C` is a visit
//!   counter or a generalized counter `log_{1-a} E`.
//!
//! All deterministic rules break ties toward the lowest action index.

use crate::error::{config_err, Result};
use crate::mdp::ActionId;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StochasticRule {
    EpsilonGreedy { epsilon: f64 },
    Softmax { temperature: f64 },
}

impl StochasticRule {
    pub fn epsilon_greedy(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return config_err(format!("epsilon must lie in [0, 1], got {epsilon}"));
        }
        Ok(Self::EpsilonGreedy { epsilon })
    }

    pub fn softmax(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return config_err(format!("softmax temperature must be positive, got {temperature}"));
        }
        Ok(Self::Softmax { temperature })
    }

    /// Writes `f(.|s)` for the action values `q` into `out`.
    pub fn distribution_into(&self, q: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let n = q.len();
        assert!(n > 0, "no actions to choose from");
        let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match *self {
            Self::EpsilonGreedy { epsilon } => {
                let ties = q.iter().filter(|&&v| v == max).count();
                let base = epsilon / n as f64;
                let greedy = (1.0 - epsilon) / ties as f64;
                out.extend(q.iter().map(|&v| if v == max { base + greedy } else { base }));
            }
            Self::Softmax { temperature } => {
                out.extend(q.iter().map(|&v| ((v - max) / temperature).exp()));
                let z: f64 = out.iter().sum();
                out.iter_mut().for_each(|p| *p /= z);
            }
        }
    }

    pub fn distribution(&self, q: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(q.len());
        self.distribution_into(q, &mut out);
        out
    }
}

/// Inverse-CDF draw from `dist`. Zero-probability actions are never returned.
pub fn sample_action(dist: &[f64], rng: &mut SeededRng) -> ActionId {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (a, &p) in dist.iter().enumerate() {
        acc += p;
        if p > 0.0 && u < acc {
            return ActionId(a);
        }
    }
    let last = dist
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("distribution has no positive entry");
    ActionId(last)
}

/// `argmax_a log f(a) - log counters(a)`.
///
/// `f(a) = 0` scores minus infinity; an untried action (`counters(a) = 0`)
/// with `f(a) > 0` scores plus infinity. Panics if every `f(a)` is zero.
pub fn lll_select(f: &[f64], counters: &[f64]) -> ActionId {
    assert_eq!(f.len(), counters.len());
    let mut best: Option<(usize, f64)> = None;
    for (a, (&p, &c)) in f.iter().zip(counters).enumerate() {
        let score = if p <= 0.0 {
            f64::NEG_INFINITY
        } else if c <= 0.0 {
            f64::INFINITY
        } else {
            p.ln() - c.ln()
        };
        if score == f64::NEG_INFINITY {
            continue;
        }
        match best {
            Some((_, b)) if score <= b => {}
            _ => best = Some((a, score)),
        }
    }
    ActionId(best.expect("lll_select: every action has zero probability").0)
}

/// `argmin_a counts(a)/total - f(a)`; ratios are 0 when `total` is 0.
pub fn mindiff_select(f: &[f64], counts: &[u64], total: u64) -> ActionId {
    assert_eq!(f.len(), counts.len());
    let mut best = 0;
    let mut best_diff = f64::INFINITY;
    for (a, (&p, &c)) in f.iter().zip(counts).enumerate() {
        let ratio = if total == 0 { 0.0 } else { c as f64 / total as f64 };
        let diff = ratio - p;
        if diff < best_diff {
            best = a;
            best_diff = diff;
        }
    }
    ActionId(best)
}

/// `argmax_a q(a) + sqrt(ln t / counts(a))`, untried actions first.
pub fn ucb_select(q: &[f64], counts: &[f64], t: u64) -> ActionId {
    assert_eq!(q.len(), counts.len());
    assert!(t >= 1, "UCB step index starts at 1");
    let log_t = (t as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, (&v, &c)) in q.iter().zip(counts).enumerate() {
        let score = if c <= 0.0 {
            f64::INFINITY
        } else {
            v + (log_t / c).sqrt()
        };
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    ActionId(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BonusKind {
    /// `beta / log_{1-a} E`
    InverseCounter,
    /// `beta / sqrt(-ln E)`
    InverseSqrtNegLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusForm {
    pub kind: BonusKind,
    pub beta: f64,
}

impl BonusForm {
    pub fn inverse_counter(beta: f64) -> Self {
        Self {
            kind: BonusKind::InverseCounter,
            beta,
        }
    }

    pub fn inverse_sqrt_neglog(beta: f64) -> Self {
        Self {
            kind: BonusKind::InverseSqrtNegLog,
            beta,
        }
    }

    /// The exploration bonus alone, for a generalized counter taken after the
    /// pair's E-update.
    pub fn bonus(&self, gc_post: f64, alpha: f64) -> f64 {
        assert!(
            gc_post > 0.0,
            "bonus needs a positive generalized counter; update E before computing it"
        );
        match self.kind {
            BonusKind::InverseCounter => self.beta / gc_post,
            BonusKind::InverseSqrtNegLog => self.beta / (gc_post * -(1.0 - alpha).ln()).sqrt(),
        }
    }
}

/// Observed reward plus the exploration bonus.
pub fn reward_bonus(r: f64, gc_post: f64, form: BonusForm, alpha: f64) -> f64 {
    r + form.bonus(gc_post, alpha)
}
