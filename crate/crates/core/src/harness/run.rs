use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::agent::TabularAgent;
use crate::approx::{LinearAgent, TileCoder};
use crate::env::ContinuousState;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};
use crate::oracle::{convergence_vs_counter, mse, CounterRow, OptimalSolution, DEFAULT_TOLERANCE};
use crate::rng::SeededRng;

use super::config::ExperimentConfig;

/// One `trial,episode,metric,steps` row. `metric` is the MSE against `Q*`
/// for tabular runs and the goal indicator for MountainCar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub trial: u64,
    pub episode: usize,
    pub metric: f64,
    pub steps: usize,
}

/// One row of a tabular snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSnapshotRow {
    pub episode: usize,
    pub state: usize,
    pub action: usize,
    pub q: f64,
    pub e: f64,
    pub c: u64,
}

/// Weights of both heads at the end of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub episode: usize,
    pub q_weights: Vec<f64>,
    pub e_weights: Vec<f64>,
}

/// Extra output recorded on the first trial only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialExtras {
    pub fig6: Vec<CounterRow>,
    pub tables: Vec<TableSnapshotRow>,
    pub weights: Vec<WeightSnapshot>,
    /// Every state acted from, in order, with the episode it belongs to.
    pub visits: Vec<(usize, ContinuousState)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub seed: u64,
    pub rows: Vec<MetricRow>,
    /// Error that aborted the trial, if any; `rows` holds what was completed.
    pub failure: Option<String>,
    pub extras: Option<TrialExtras>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    /// In trial order.
    pub trials: Vec<TrialOutput>,
}

impl RunOutput {
    pub fn rows(&self) -> impl Iterator<Item = &MetricRow> {
        self.trials.iter().flat_map(|t| t.rows.iter())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &str)> {
        self.trials
            .iter()
            .filter_map(|t| t.failure.as_deref().map(|f| (t.seed, f)))
    }

    /// Mean metric per evaluated episode over trials that reported it.
    pub fn mean_curve(&self) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in self.rows() {
            let e = acc.entry(r.episode).or_insert((0.0, 0));
            e.0 += r.metric;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(ep, (sum, n))| (ep, sum / n as f64))
            .collect()
    }

    pub fn extras(&self) -> Option<&TrialExtras> {
        self.trials.first().and_then(|t| t.extras.as_ref())
    }
}

fn evaluated(cfg: &ExperimentConfig, episode: usize) -> bool {
    episode.is_multiple_of(cfg.eval_every)
}

fn snapshot_due(cfg: &ExperimentConfig, episode: usize) -> bool {
    cfg.snapshot_every.is_some_and(|n| episode.is_multiple_of(n))
}

fn tabular_trial(
    cfg: &ExperimentConfig,
    solution: &OptimalSolution,
    trial: usize,
) -> Result<TrialOutput> {
    let mdp = cfg.tabular_mdp()?;
    let seed = cfg.seed(trial);
    let mut rng = SeededRng::new(seed);
    let mut agent = TabularAgent::new(cfg.agent, cfg.params, &mdp)?;
    let record = trial == 0 && (cfg.fig6 || cfg.snapshot_every.is_some());
    let mut extras = record.then(TrialExtras::default);
    let mut out = TrialOutput {
        seed,
        rows: Vec::with_capacity(cfg.episodes / cfg.eval_every),
        failure: None,
        extras: None,
    };
    for episode in 1..=cfg.episodes {
        let summary = match agent.run_episode(&mdp, &mut rng, cfg.max_steps) {
            Ok(s) => s,
            Err(e) => {
                out.failure = Some(format!("episode {episode}: {e}"));
                break;
            }
        };
        if evaluated(cfg, episode) {
            out.rows.push(MetricRow {
                trial: seed,
                episode,
                metric: mse(agent.q(), solution),
                steps: summary.steps,
            });
        }
        if let Some(x) = extras.as_mut() {
            if cfg.fig6 {
                x.fig6.extend(convergence_vs_counter(
                    episode,
                    agent.q(),
                    agent.e(),
                    agent.counts(),
                    &solution.q_star,
                ));
            }
            if snapshot_due(cfg, episode) {
                for s in 0..mdp.num_states() {
                    let s = StateId(s);
                    for a in 0..mdp.actions_at(s) {
                        let a = ActionId(a);
                        x.tables.push(TableSnapshotRow {
                            episode,
                            state: s.0,
                            action: a.0,
                            q: agent.q().get(s, a),
                            e: agent.e().get(s, a),
                            c: agent.counts().get(s, a),
                        });
                    }
                }
            }
        }
    }
    out.extras = extras;
    Ok(out)
}

fn linear_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    let env = cfg.mountain_car();
    let seed = cfg.seed(trial);
    let mut rng = SeededRng::new(seed);
    let gamma = cfg.gamma.expect("continuous configs carry a discount");
    let mut agent = LinearAgent::new(cfg.agent, cfg.params, gamma, TileCoder::mountain_car(), &mut rng)?;
    let record = trial == 0 && cfg.snapshot_every.is_some();
    let mut extras = record.then(TrialExtras::default);
    let mut visits = Vec::new();
    let mut out = TrialOutput {
        seed,
        rows: Vec::with_capacity(cfg.episodes / cfg.eval_every),
        failure: None,
        extras: None,
    };
    for episode in 1..=cfg.episodes {
        visits.clear();
        let track = extras.as_ref().filter(|_| cfg.correlation).map(|_| &mut visits);
        let ep = match agent.run_episode(&env, &mut rng, track) {
            Ok(ep) => ep,
            Err(e) => {
                out.failure = Some(format!("episode {episode}: {e}"));
                break;
            }
        };
        if evaluated(cfg, episode) {
            out.rows.push(MetricRow {
                trial: seed,
                episode,
                metric: if ep.success { 1.0 } else { 0.0 },
                steps: ep.steps,
            });
        }
        if let Some(x) = extras.as_mut() {
            x.visits.extend(visits.iter().map(|&s| (episode, s)));
            if snapshot_due(cfg, episode) {
                x.weights.push(WeightSnapshot {
                    episode,
                    q_weights: agent.q_head().weights().to_vec(),
                    e_weights: agent.e_head().weights().to_vec(),
                });
            }
        }
    }
    out.extras = extras;
    Ok(out)
}

/// Runs one trial of `cfg`; `solution` must be the oracle of its MDP for
/// tabular configs. Errors before the first episode (bad agent setup) are
/// returned; errors during learning end the trial and are recorded in it.
pub fn run_trial(
    cfg: &ExperimentConfig,
    solution: Option<&OptimalSolution>,
    trial: usize,
) -> Result<TrialOutput> {
    if cfg.env.is_tabular() {
        let sol = solution.ok_or_else(|| Error::Diagnostic("tabular trial without oracle".into()))?;
        tabular_trial(cfg, sol, trial)
    } else {
        linear_trial(cfg, trial)
    }
}

/// Runs every trial of `cfg` on up to `workers` threads.
///
/// Finished trials are handed to `sink` strictly in trial order, whatever
/// order the workers complete them in.
pub fn run_with_sink<F>(cfg: &ExperimentConfig, workers: usize, mut sink: F) -> Result<RunOutput>
where
    F: FnMut(&TrialOutput) -> Result<()>,
{
    cfg.validate()?;
    let solution = if cfg.env.is_tabular() {
        Some(OptimalSolution::solve(&cfg.tabular_mdp()?, DEFAULT_TOLERANCE)?)
    } else {
        None
    };
    let workers = workers.clamp(1, cfg.trials);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<TrialOutput>)>();
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut first_err = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, solution) = (&next, solution.as_ref());
            scope.spawn(move || loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= cfg.trials {
                    break;
                }
                if tx.send((t, run_trial(cfg, solution, t))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        for (t, result) in rx {
            if first_err.is_some() {
                continue;
            }
            pending.insert(t, result);
            while let Some(result) = pending.remove(&trials.len()) {
                match result.and_then(|out| sink(&out).map(|()| out)) {
                    Ok(out) => trials.push(out),
                    Err(e) => {
                        first_err.get_or_insert(e);
                        next.store(cfg.trials, Ordering::Relaxed);
                        pending.clear();
                        break;
                    }
                }
            }
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(RunOutput {
        config: cfg.clone(),
        trials,
    })
}

pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    run_with_sink(cfg, workers, |_| Ok(()))
}
