//! Ground truth and analysis: value iteration, optimal-policy occupancy, the
//! occupancy-weighted MSE, visit histograms, `C_E` maps and correlations.

use crate::approx::{LogisticEHead, TileCoder};
use crate::env::{ContinuousState, POSITION_BOUNDS, VELOCITY_BOUNDS};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::tables::{ExplorationTable, ValueTable, VisitCounter};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const OCCUPANCY_RESIDUAL: f64 = 1e-9;
const OCCUPANCY_HORIZON: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub q_star: ValueTable,
    /// Greedy optimal action per state, `None` for terminal states.
    pub pi_star: Vec<Option<ActionId>>,
    pub iterations: usize,
}

fn backup(mdp: &TabularMdp, q: &ValueTable, s: StateId, a: ActionId) -> f64 {
    let future: f64 = mdp
        .transitions(s, a)
        .iter()
        .map(|&(n, p)| p * if mdp.is_terminal(n) { 0.0 } else { q.max_at(n) })
        .sum();
    mdp.expected_reward(s, a) + mdp.discount() * future
}

/// Bellman optimality iteration on Q until the sup-norm change drops below
/// `tol (1 - gamma) / gamma`, which bounds the distance to `Q*` by `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> ValueSolution {
    assert!(tol > 0.0);
    let gamma = mdp.discount();
    let threshold = if gamma == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - gamma) / gamma
    };
    let mut q = ValueTable::new(mdp, 0.0);
    let mut next = q.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut change: f64 = 0.0;
        for s in 0..mdp.num_states() {
            let s = StateId(s);
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..mdp.actions_at(s) {
                let a = ActionId(a);
                let v = backup(mdp, &q, s, a);
                change = change.max((v - q.get(s, a)).abs());
                next.set(s, a, v);
            }
        }
        std::mem::swap(&mut q, &mut next);
        if change < threshold || (gamma == 0.0 && iterations >= 1) {
            break;
        }
    }
    let pi_star = (0..mdp.num_states())
        .map(|s| {
            let s = StateId(s);
            (!mdp.is_terminal(s)).then(|| q.argmax_at(s))
        })
        .collect();
    ValueSolution {
        q_star: q,
        pi_star,
        iterations,
    }
}

/// Largest `|Q(s,a) - (T Q)(s,a)|` over non-terminal pairs.
pub fn bellman_residual(mdp: &TabularMdp, q: &ValueTable) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..mdp.num_states() {
        let s = StateId(s);
        if mdp.is_terminal(s) {
            continue;
        }
        for a in 0..mdp.actions_at(s) {
            let a = ActionId(a);
            worst = worst.max((q.get(s, a) - backup(mdp, q, s, a)).abs());
        }
    }
    worst
}

/// Normalized expected visit frequency of each pair under `pi` from the
/// initial state until absorption, as a dense `num_states x num_actions` vector.
///
/// Mass is propagated until less than `1e-9` remains outside terminal states.
/// MDPs without terminal states are cut at a horizon of `10^6` steps; when
/// terminal states exist but the policy never reaches them, this is an error.
pub fn optimal_occupancy(mdp: &TabularMdp, pi: &[Option<ActionId>]) -> Result<Vec<f64>> {
    let na = mdp.num_actions();
    let ns = mdp.num_states();
    let mut occupancy = vec![0.0; ns * na];
    let mut mass = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    mass[mdp.initial_state().0] = 1.0;
    let has_terminal = (0..ns).any(|s| mdp.is_terminal(StateId(s)));
    let mut live: f64 = 1.0;
    let mut steps = 0;
    while live >= OCCUPANCY_RESIDUAL && steps < OCCUPANCY_HORIZON {
        steps += 1;
        next.iter_mut().for_each(|m| *m = 0.0);
        for s in 0..ns {
            if mass[s] == 0.0 || mdp.is_terminal(StateId(s)) {
                continue;
            }
            let a = pi[s].ok_or_else(|| {
                Error::Diagnostic(format!("policy undefined at non-terminal state {s}"))
            })?;
            occupancy[s * na + a.0] += mass[s];
            for &(n, p) in mdp.transitions(StateId(s), a) {
                next[n.0] += mass[s] * p;
            }
        }
        std::mem::swap(&mut mass, &mut next);
        live = (0..ns)
            .filter(|&s| !mdp.is_terminal(StateId(s)))
            .map(|s| mass[s])
            .sum();
    }
    if live >= OCCUPANCY_RESIDUAL && has_terminal {
        return Err(Error::Diagnostic(format!(
            "optimal policy keeps {live} probability mass away from terminal states after {OCCUPANCY_HORIZON} steps"
        )));
    }
    let total: f64 = occupancy.iter().sum();
    occupancy.iter_mut().for_each(|m| *m /= total);
    Ok(occupancy)
}

/// `Q*`, `pi*` and the `pi*` occupancy of a tabular MDP.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub q_star: ValueTable,
    pub pi_star: Vec<Option<ActionId>>,
    occupancy: Vec<f64>,
    num_actions: usize,
}

impl OptimalSolution {
    pub fn solve(mdp: &TabularMdp, tol: f64) -> Result<Self> {
        let vs = value_iteration(mdp, tol);
        let occupancy = optimal_occupancy(mdp, &vs.pi_star)?;
        Ok(Self {
            q_star: vs.q_star,
            pi_star: vs.pi_star,
            occupancy,
            num_actions: mdp.num_actions(),
        })
    }

    pub fn occupancy(&self, s: StateId, a: ActionId) -> f64 {
        self.occupancy[s.0 * self.num_actions + a.0]
    }

    /// Pairs with positive occupancy, with their weights.
    pub fn support(&self) -> impl Iterator<Item = (StateId, ActionId, f64)> + '_ {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (StateId(i / self.num_actions), ActionId(i % self.num_actions), m))
    }
}

/// Occupancy-weighted squared error `sum occ(s,a) (Q - Q*)^2`.
pub fn mse(q: &ValueTable, sol: &OptimalSolution) -> f64 {
    sol.support()
        .map(|(s, a, m)| {
            let d = q.get(s, a) - sol.q_star.get(s, a);
            m * d * d
        })
        .sum()
}

/// Divides every element by the series maximum. An all-zero (or empty)
/// series is returned unchanged together with `false`.
pub fn normalize_series(series: &[f64]) -> (Vec<f64>, bool) {
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return (series.to_vec(), false);
    }
    (series.iter().map(|x| x / max).collect(), true)
}

/// Visit counts over a `bins.0 x bins.1` grid on (position, velocity).
#[derive(Debug, Clone, PartialEq)]
pub struct VisitHistogram {
    pub bins: (usize, usize),
    pub counts: Vec<u64>,
}

impl VisitHistogram {
    pub fn new(bins: (usize, usize)) -> Self {
        assert!(bins.0 >= 1 && bins.1 >= 1);
        Self {
            bins,
            counts: vec![0; bins.0 * bins.1],
        }
    }

    /// Flat bin index (position-major). Values on an interior edge go to the
    /// higher bin; the top edge belongs to the last bin.
    pub fn bin_of(&self, s: ContinuousState) -> usize {
        let idx = |x: f64, (lo, hi): (f64, f64), n: usize| {
            let t = ((x - lo) / (hi - lo) * n as f64).floor();
            (t.max(0.0) as usize).min(n - 1)
        };
        let p = idx(s.position, POSITION_BOUNDS, self.bins.0);
        let v = idx(s.velocity, VELOCITY_BOUNDS, self.bins.1);
        p * self.bins.1 + v
    }

    pub fn center(&self, bin: usize) -> ContinuousState {
        let (p, v) = (bin / self.bins.1, bin % self.bins.1);
        let mid = |i: usize, (lo, hi): (f64, f64), n: usize| lo + (i as f64 + 0.5) * (hi - lo) / n as f64;
        ContinuousState::new(
            mid(p, POSITION_BOUNDS, self.bins.0),
            mid(v, VELOCITY_BOUNDS, self.bins.1),
        )
    }

    pub fn add(&mut self, s: ContinuousState) {
        let b = self.bin_of(s);
        self.counts[b] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn visit_histogram(states: &[ContinuousState], bins: (usize, usize)) -> VisitHistogram {
    let mut h = VisitHistogram::new(bins);
    for &s in states {
        h.add(s);
    }
    h
}

/// `C_E(s) = sum_a log_{1-alpha} E(s, a)`.
pub fn aggregated_counter(head: &LogisticEHead, coder: &TileCoder, s: ContinuousState, alpha: f64) -> f64 {
    let scale = (1.0 - alpha).ln();
    (0..coder.num_actions())
        .map(|a| head.ln_predict(&coder.features(s, ActionId(a))) / scale)
        .sum()
}

/// `C_E` evaluated at every bin center, in [`VisitHistogram::bin_of`] order.
pub fn ce_map(head: &LogisticEHead, coder: &TileCoder, bins: (usize, usize), alpha: f64) -> Vec<f64> {
    let grid = VisitHistogram::new(bins);
    (0..bins.0 * bins.1)
        .map(|b| aggregated_counter(head, coder, grid.center(b), alpha))
        .collect()
}

/// Pearson correlation; `None` when lengths differ, fewer than two points,
/// or either series has zero variance.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One point of the convergence-versus-counter analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterRow {
    /// Flat pair index `s * num_actions + a`.
    pub pair: usize,
    pub episode: usize,
    pub c: u64,
    pub gc: f64,
    pub rel_err: f64,
}

/// Rows `(C, log_{1-a} E, |Q - Q*| / |Q*|)` for every non-terminal pair with
/// `Q* != 0`; pairs with `Q* = 0` are skipped since their relative error is
/// undefined.
pub fn convergence_vs_counter(
    episode: usize,
    q: &ValueTable,
    e: &ExplorationTable,
    counts: &VisitCounter,
    q_star: &ValueTable,
) -> Vec<CounterRow> {
    let na = q.num_actions();
    let mut rows = Vec::new();
    for s in 0..q.num_states() {
        let s = StateId(s);
        for a in 0..q.actions_at(s) {
            let a = ActionId(a);
            let target = q_star.get(s, a);
            if target == 0.0 {
                continue;
            }
            rows.push(CounterRow {
                pair: s.0 * na + a.0,
                episode,
                c: counts.get(s, a),
                gc: e.generalized_counter(s, a),
                rel_err: ((q.get(s, a) - target) / target).abs(),
            });
        }
    }
    rows
}

/// Which counter to bin the convergence rows by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterAxis {
    Visits,
    Generalized,
}

/// Mean per-bin coefficient of variation of the relative error across pairs.
///
/// Rows are bucketed by `floor(log2(1 + counter))` of the chosen axis. Within
/// a bucket each pair contributes its mean relative error; the coefficient of
/// variation `std / mean` of those per-pair means measures how much the
/// convergence level depends on pair identity at equal counter. Buckets with
/// fewer than two pairs or a zero mean are skipped. Returns `None` if no
/// bucket qualifies.
pub fn counter_dispersion(rows: &[CounterRow], axis: CounterAxis) -> Option<f64> {
    use std::collections::BTreeMap;
    let mut buckets: BTreeMap<u32, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let x = match axis {
            CounterAxis::Visits => r.c as f64,
            CounterAxis::Generalized => r.gc,
        };
        let bucket = (1.0 + x).log2().floor() as u32;
        let slot = buckets.entry(bucket).or_default().entry(r.pair).or_insert((0.0, 0));
        slot.0 += r.rel_err;
        slot.1 += 1;
    }
    let cvs: Vec<f64> = buckets
        .values()
        .filter(|pairs| pairs.len() >= 2)
        .filter_map(|pairs| {
            let means: Vec<f64> = pairs.values().map(|(sum, n)| sum / *n as f64).collect();
            let n = means.len() as f64;
            let mean = means.iter().sum::<f64>() / n;
            if mean <= 0.0 {
                return None;
            }
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
            Some(var.sqrt() / mean)
        })
        .collect();
    if cvs.is_empty() {
        None
    } else {
        Some(cvs.iter().sum::<f64>() / cvs.len() as f64)
    }
}
