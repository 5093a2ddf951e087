//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary so the verdict lines are never captured. Pass
//! criterion ids (`c1` .. `c12`) as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dora_core::agent::{AgentKind, AgentParams, TabularAgent};
use dora_core::approx::{LinearQHead, LogisticEHead, SparseFeatures, TileCoder};
use dora_core::env::{make_tree, ContinuousState, TreeLayout, POSITION_BOUNDS, VELOCITY_BOUNDS};
use dora_core::harness::{correlation_analysis, raw_csv, run, EnvSpec, ExperimentConfig};
use dora_core::mdp::{ActionId, StateId, TabularMdp};
use dora_core::oracle::{counter_dispersion, mse, CounterAxis, OptimalSolution, DEFAULT_TOLERANCE};
use dora_core::rng::SeededRng;
use dora_core::select::mindiff_select;
use dora_core::tables::ExplorationTable;

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    title: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_closed_form_counter() -> Outcome {
    let mdp = TabularMdp::builder(2, 1).edge(0, 0, 1, 0.0).edge(1, 0, 0, 0.0).build().map_err(|e| e.to_string())?;
    let mut e = ExplorationTable::new(&mdp, 0.1, 0.0).map_err(|e| e.to_string())?;
    let (s, a) = (StateId(0), ActionId(0));
    for _ in 0..20 {
        e.update(s, a, Some((StateId(1), ActionId(0))));
    }
    let value = e.get(s, a);
    let gc = e.generalized_counter(s, a);
    let expected = 0.9f64.powi(20);
    verdict(
        (value - expected).abs() <= 1e-9 && (gc - 20.0).abs() <= 1e-9,
        format!("E={value:.12} (expected {expected:.12}), counter={gc:.12}"),
    )
}

fn c2_tree_counting() -> Outcome {
    const CYCLES: usize = 30;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2usize, 4, 8] {
        let mdp = make_tree(k).map_err(|e| e.to_string())?;
        let layout = TreeLayout { k };
        let mut agent =
            TabularAgent::new(AgentKind::SoftmaxLllEvalue, AgentParams::default(), &mdp).map_err(|e| e.to_string())?;
        let mut rng = SeededRng::new(k as u64);
        for _ in 0..CYCLES * k {
            agent.run_episode(&mdp, &mut rng, 10).map_err(|e| e.to_string())?;
        }
        let balanced = (0..k).all(|a| agent.counts().get(layout.chooser(), ActionId(a)) == CYCLES as u64);
        let gc = agent.e().generalized_counter(layout.root(), ActionId(0));
        let m = CYCLES as f64;
        ok &= balanced && gc >= 0.7 * m && gc <= 1.3 * m;
        parts.push(format!("k={k}: counter={gc:.2} full cycles={balanced}"));
    }
    verdict(ok, format!("{} (window [{:.0}, {:.0}])", parts.join(", "), 0.7 * CYCLES as f64, 1.3 * CYCLES as f64))
}

fn c3_determinization_bound() -> Outcome {
    const T: u64 = 10_000;
    let mut rng = SeededRng::new(3);
    let mut worst_step = f64::NEG_INFINITY;
    let mut worst_final = 0.0f64;
    let mut violations = 0;
    let mut cases = 0;
    for n in [2usize, 3, 5] {
        for _ in 0..20 {
            cases += 1;
            let raw: Vec<f64> = (0..n).map(|_| 0.01 + rng.uniform()).collect();
            let sum: f64 = raw.iter().sum();
            let f: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let mut counts = vec![0u64; n];
            for t in 1..=T {
                let a = mindiff_select(&f, &counts, t - 1);
                counts[a.0] += 1;
                let tf = t as f64;
                let excess = (0..n).map(|b| counts[b] as f64 / tf - f[b]).fold(f64::NEG_INFINITY, f64::max);
                worst_step = worst_step.max(excess * tf);
                if excess > 1.0 / tf {
                    violations += 1;
                }
            }
            let tf = T as f64;
            let dev = (0..n).map(|b| (counts[b] as f64 / tf - f[b]).abs()).fold(0.0, f64::max);
            worst_final = worst_final.max(dev * tf / n as f64);
            if dev > n as f64 / tf {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0,
        format!(
            "{cases} distributions, {violations} violations, max t*excess={worst_step:.4}, max T*|dev|/|A|={worst_final:.4}"
        ),
    )
}

fn random_cyclic_mdp(rng: &mut SeededRng) -> TabularMdp {
    let ns = 2 + rng.below(7);
    let na = 1 + rng.below(4);
    let mut b = TabularMdp::builder(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let outcomes: Vec<(usize, f64)> = if rng.uniform() < 0.5 {
                vec![(rng.below(ns), 1.0)]
            } else {
                let (x, y) = (rng.below(ns), rng.below(ns));
                let p = rng.uniform_range(0.1, 0.9);
                vec![(x, p), (y, 1.0 - p)]
            };
            b = b.transition(s, a, outcomes).reward(s, a, vec![(0.0, 1.0)]);
        }
    }
    b.build().expect("random MDP is well formed")
}

/// Random walk until a state-action pair repeats; returns the loop.
fn closed_trajectory(mdp: &TabularMdp, rng: &mut SeededRng) -> Vec<(StateId, ActionId)> {
    let mut s = StateId(rng.below(mdp.num_states()));
    let mut path: Vec<(StateId, ActionId)> = Vec::new();
    loop {
        let a = ActionId(rng.below(mdp.actions_at(s)));
        if let Some(i) = path.iter().position(|&p| p == (s, a)) {
            return path.split_off(i);
        }
        path.push((s, a));
        s = mdp.step(s, a, rng).next;
    }
}

fn c4_cyclic_decrease() -> Outcome {
    let mut rng = SeededRng::new(4);
    let mut failures = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..100 {
        let mdp = random_cyclic_mdp(&mut rng);
        let alpha = rng.uniform_range(0.01, 0.99);
        let gamma_e = rng.uniform_range(0.0, 0.999);
        let mut e = ExplorationTable::new(&mdp, alpha, gamma_e).map_err(|e| e.to_string())?;
        // Arbitrary prior history so the cycle does not start from all ones.
        let mut s = StateId(0);
        for _ in 0..rng.below(50) {
            let a = ActionId(rng.below(mdp.actions_at(s)));
            let next = mdp.step(s, a, &mut rng).next;
            let a2 = ActionId(rng.below(mdp.actions_at(next)));
            e.update(s, a, Some((next, a2)));
            s = next;
        }
        let cycle = closed_trajectory(&mdp, &mut rng);
        let max_e = |e: &ExplorationTable| cycle.iter().map(|&(s, a)| e.get(s, a)).fold(0.0, f64::max);
        let before = max_e(&e);
        for i in 0..cycle.len() {
            let (s, a) = cycle[i];
            e.update(s, a, Some(cycle[(i + 1) % cycle.len()]));
        }
        let after = max_e(&e);
        worst_ratio = worst_ratio.max(after / before);
        if !(after < before) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("100 cycles, {failures} without strict decrease, worst after/before={worst_ratio:.6}"))
}

fn initial_mse(cfg: &ExperimentConfig) -> Result<f64, String> {
    let mdp = cfg.tabular_mdp().map_err(|e| e.to_string())?;
    let sol = OptimalSolution::solve(&mdp, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    let agent = TabularAgent::new(cfg.agent, cfg.params, &mdp).map_err(|e| e.to_string())?;
    Ok(mse(agent.q(), &sol))
}

struct Curve {
    initial: f64,
    points: Vec<(usize, f64)>,
}

impl Curve {
    fn of(cfg: &ExperimentConfig) -> Result<Self, String> {
        let out = run(cfg, workers()).map_err(|e| e.to_string())?;
        if let Some((seed, msg)) = out.failures().next() {
            return Err(format!("{}: trial {seed} failed: {msg}", cfg.name));
        }
        Ok(Self {
            initial: initial_mse(cfg)?,
            points: out.mean_curve(),
        })
    }

    /// First episode whose mean MSE is at most `frac` of the initial MSE.
    fn reach(&self, frac: f64) -> Option<usize> {
        self.points.iter().find(|(_, m)| *m <= frac * self.initial).map(|(e, _)| *e)
    }
}

fn bridge(name: &str, k: usize, normalized: bool, agent: AgentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(name, EnvSpec::Bridge { k, normalized }, agent);
    cfg.trials = 50;
    cfg
}

fn c5_gamma_sweep() -> Outcome {
    let mut reach = Vec::new();
    for gamma_e in [0.0, 0.5, 0.9] {
        let mut cfg = bridge("c5", 5, false, AgentKind::EGreedyBonus);
        cfg.episodes = 1000;
        cfg.params.gamma_e = gamma_e;
        let curve = Curve::of(&cfg)?;
        // Not reaching the threshold ranks after every budgeted episode.
        let r = curve.reach(0.05).unwrap_or(cfg.episodes + 1);
        reach.push((gamma_e, r));
    }
    let ok = reach.windows(2).all(|w| w[1].1 <= w[0].1) && reach[2].1 < reach[0].1;
    let text: Vec<String> = reach
        .iter()
        .map(|(g, r)| if *r > 1000 { format!("gamma_E={g}: not reached") } else { format!("gamma_E={g}: {r}") })
        .collect();
    verdict(ok, format!("episodes to 5% of initial MSE: {}", text.join(", ")))
}

const EPSILON_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.5];
const TEMPERATURE_GRID: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

/// Earliest threshold crossing over the agent's grid, with its setting.
fn best_over_grid(agent: AgentKind) -> Result<(Option<usize>, String), String> {
    let settings: Vec<(String, AgentParams)> = match agent {
        AgentKind::UcbCounter | AgentKind::UcbEvalue => vec![("-".into(), AgentParams::default())],
        k if k.uses_softmax() => TEMPERATURE_GRID
            .iter()
            .map(|&t| (format!("tau={t}"), AgentParams { temperature: t, ..AgentParams::default() }))
            .collect(),
        _ => EPSILON_GRID
            .iter()
            .map(|&e| (format!("eps={e}"), AgentParams { epsilon: e, ..AgentParams::default() }))
            .collect(),
    };
    let mut best: (Option<usize>, String) = (None, settings[0].0.clone());
    for (label, params) in settings {
        let mut cfg = bridge("c6", 15, false, agent);
        cfg.episodes = 4000;
        cfg.params = params;
        let r = Curve::of(&cfg)?.reach(0.1);
        if r.is_some() && (best.0.is_none() || r < best.0) {
            best = (r, label);
        }
    }
    Ok(best)
}

fn c6_agent_comparison() -> Outcome {
    let show = |agent: AgentKind, (r, label): &(Option<usize>, String)| match r {
        Some(e) => format!("{} reaches at {e} ({label})", agent.name()),
        None => format!("{} never reaches", agent.name()),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for agent in [AgentKind::EGreedyLllEvalue, AgentKind::SoftmaxLllEvalue] {
        let best = best_over_grid(agent)?;
        ok &= best.0.is_some();
        parts.push(show(agent, &best));
    }
    for agent in [AgentKind::EGreedy, AgentKind::EGreedyLllCounter, AgentKind::UcbCounter] {
        let best = best_over_grid(agent)?;
        ok &= best.0.is_none();
        parts.push(show(agent, &best));
    }
    verdict(ok, format!("10% of initial MSE within 4000: {}", parts.join("; ")))
}

/// Mean of each of `blocks` equal slices is no larger than the previous one.
fn block_monotone(values: &[f64], blocks: usize) -> bool {
    let size = values.len() / blocks;
    let means: Vec<f64> = values.chunks(size).take(blocks).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    means.windows(2).all(|w| w[1] <= w[0])
}

fn c7_delayed_q() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for agent in [AgentKind::DelayedQ, AgentKind::SoftmaxLllEvalue] {
        let cfg = bridge("c7", 15, true, agent);
        let curve = Curve::of(&cfg)?;
        let peak = curve.points.iter().map(|p| p.1).fold(curve.initial, f64::max);
        let norm: Vec<f64> = curve.points.iter().map(|p| p.1 / peak).collect();
        let below = norm.iter().position(|&v| v < 0.2).map(|i| curve.points[i].0);
        let trending = block_monotone(&norm, 10);
        ok &= below.is_some() && trending;
        parts.push(format!(
            "{}: below 0.2 at {}, block means non-increasing={trending}",
            agent.name(),
            below.map_or("never".into(), |e| e.to_string())
        ));
    }
    verdict(ok, parts.join("; "))
}

fn mountain_car(name: &str, agent: AgentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(name, EnvSpec::MountainCar, agent);
    cfg.episodes = 1000;
    cfg.trials = 50;
    cfg
}

fn goal_rate_at_last(cfg: &ExperimentConfig) -> Result<f64, String> {
    let out = run(cfg, workers()).map_err(|e| e.to_string())?;
    if let Some((seed, msg)) = out.failures().next() {
        return Err(format!("{}: trial {seed} failed: {msg}", cfg.name));
    }
    out.mean_curve()
        .last()
        .filter(|(e, _)| *e == cfg.episodes)
        .map(|p| p.1)
        .ok_or_else(|| "no metric at the final episode".into())
}

fn c8_mountain_car() -> Outcome {
    let mut lll = mountain_car("c8-lll", AgentKind::SoftmaxLllEvalue);
    lll.params.gamma_e = 0.99;
    let softmax = mountain_car("c8-softmax", AgentKind::Softmax);
    let p_lll = goal_rate_at_last(&lll)?;
    let p_soft = goal_rate_at_last(&softmax)?;
    verdict(
        p_lll >= 0.5 && p_soft <= 0.1 && p_lll - p_soft >= 0.4,
        format!("goal rate at episode 1000: LLL {p_lll:.2}, softmax {p_soft:.2}"),
    )
}

fn c9_correlation() -> Outcome {
    let mut cfg = mountain_car("c9", AgentKind::EGreedy);
    cfg.trials = 1;
    cfg.params.gamma_e = 0.0;
    cfg.correlation = true;
    cfg.snapshot_every = Some(10);
    let out = run(&cfg, workers()).map_err(|e| e.to_string())?;
    let extras = out.extras().ok_or("no snapshots recorded")?;
    let rows = correlation_analysis(
        extras,
        &TileCoder::mountain_car(),
        cfg.params.alpha_e,
        cfg.correlation_bins,
        cfg.correlation_samples,
        cfg.seed(0),
    );
    let positive = rows.iter().filter(|r| r.coefficient.is_some_and(|c| c > 0.0)).count();
    let frac = positive as f64 / rows.len().max(1) as f64;
    verdict(
        !rows.is_empty() && frac >= 0.7,
        format!("{positive} of {} sampled states positive ({:.1}%)", rows.len(), 100.0 * frac),
    )
}

fn c10_counter_collapse() -> Outcome {
    let mut cfg = bridge("c10", 5, false, AgentKind::SoftmaxLllEvalue);
    cfg.trials = 1;
    cfg.episodes = 1000;
    cfg.fig6 = true;
    let out = run(&cfg, workers()).map_err(|e| e.to_string())?;
    let rows = &out.extras().ok_or("no counter rows recorded")?.fig6;
    let by_visits = counter_dispersion(rows, CounterAxis::Visits).ok_or("no multi-pair visit bins")?;
    let by_gc = counter_dispersion(rows, CounterAxis::Generalized).ok_or("no multi-pair counter bins")?;
    let reduction = 1.0 - by_gc / by_visits;
    verdict(
        by_gc < by_visits && reduction >= 0.2,
        format!("mean CV by visits {by_visits:.4}, by generalized counter {by_gc:.4}, reduction {:.1}%", 100.0 * reduction),
    )
}

fn random_state(rng: &mut SeededRng) -> ContinuousState {
    ContinuousState::new(
        rng.uniform_range(POSITION_BOUNDS.0, POSITION_BOUNDS.1),
        rng.uniform_range(VELOCITY_BOUNDS.0, VELOCITY_BOUNDS.1),
    )
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-10 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative error between `(new - old) / step` and the central
/// difference of `-loss` over every active index plus a few inactive ones.
fn compare(
    old: &[f64],
    new: &[f64],
    step: f64,
    phi: &SparseFeatures,
    loss: impl Fn(&[f64]) -> f64,
    rng: &mut SeededRng,
) -> f64 {
    const H: f64 = 1e-6;
    let mut probe: Vec<usize> = phi.indices().to_vec();
    probe.extend((0..4).map(|_| rng.below(old.len())));
    let mut w = old.to_vec();
    let mut worst = 0.0f64;
    for i in probe {
        w[i] = old[i] + H;
        let up = loss(&w);
        w[i] = old[i] - H;
        let down = loss(&w);
        w[i] = old[i];
        let numeric = -(up - down) / (2.0 * H);
        let analytic = (new[i] - old[i]) / step;
        worst = worst.max(relative_error(analytic, numeric));
    }
    worst
}

fn c11_gradient_check() -> Outcome {
    let coder = TileCoder::mountain_car();
    let n = coder.num_features();
    let mut rng = SeededRng::new(11);
    let mut worst_q = 0.0f64;
    let mut worst_e = 0.0f64;
    for _ in 0..1000 {
        let phi = coder.features(random_state(&mut rng), ActionId(rng.below(3)));
        let next = (rng.uniform() < 0.9).then(|| coder.features(random_state(&mut rng), ActionId(rng.below(3))));
        let alpha = rng.uniform_range(0.01, 1.0);
        let step = alpha / phi.len() as f64;

        let qw: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let reward = rng.uniform_range(-1.0, 1.0);
        let gamma = rng.uniform_range(0.0, 0.999);
        let mut q = LinearQHead::from_weights(qw.clone());
        let target = reward + gamma * next.as_ref().map_or(0.0, |s| q.predict(s));
        q.td_step(&phi, reward, next.as_ref(), gamma, alpha).map_err(|e| e.to_string())?;
        let loss = |w: &[f64]| 0.5 * (target - LinearQHead::from_weights(w.to_vec()).predict(&phi)).powi(2);
        worst_q = worst_q.max(compare(&qw, q.weights(), step, &phi, loss, &mut rng));

        let ew: Vec<f64> = (0..n).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
        let gamma_e = rng.uniform_range(0.0, 0.999);
        let mut e = LogisticEHead::from_weights(ew.clone());
        let target = next.as_ref().map_or(0.0, |s| gamma_e * e.predict(s));
        e.td_step(&phi, next.as_ref(), gamma_e, alpha);
        let loss = |w: &[f64]| 0.5 * (target - LogisticEHead::from_weights(w.to_vec()).predict(&phi)).powi(2);
        worst_e = worst_e.max(compare(&ew, e.weights(), step, &phi, loss, &mut rng));
    }
    verdict(
        worst_q <= 1e-4 && worst_e <= 1e-4,
        format!("1000 configurations, max relative error: Q head {worst_q:.2e}, E head {worst_e:.2e}"),
    )
}

fn c12_determinism() -> Outcome {
    let mut tab = bridge("det-bridge", 5, false, AgentKind::UcbEvalue);
    tab.trials = 8;
    tab.episodes = 200;
    tab.base_seed = 12;
    let mut cont = mountain_car("det-car", AgentKind::SoftmaxLllEvalue);
    cont.trials = 4;
    cont.episodes = 30;
    cont.base_seed = 12;
    let mut parts = Vec::new();
    let mut ok = true;
    for cfg in [tab, cont] {
        let runs: Vec<String> = [1, 1, 3, 8]
            .iter()
            .map(|&w| run(&cfg, w).and_then(|o| raw_csv(&o)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let same = runs.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        parts.push(format!("{}: {} bytes, identical across workers 1,1,3,8={same}", cfg.name, runs[0].len()));
    }
    verdict(ok, parts.join("; "))
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: "c1", title: "closed-form counter", limit: Duration::from_secs(1), check: c1_closed_form_counter },
    Criterion { id: "c2", title: "tree generalized counting", limit: Duration::from_secs(10), check: c2_tree_counting },
    Criterion { id: "c3", title: "determinization bound", limit: Duration::from_secs(10), check: c3_determinization_bound },
    Criterion { id: "c4", title: "cyclic max-E decrease", limit: Duration::from_secs(5), check: c4_cyclic_decrease },
    Criterion { id: "c5", title: "bridge gamma_E sweep", limit: Duration::from_secs(5 * 60), check: c5_gamma_sweep },
    Criterion { id: "c6", title: "agent comparison", limit: Duration::from_secs(15 * 60), check: c6_agent_comparison },
    Criterion { id: "c7", title: "delayed Q comparison", limit: Duration::from_secs(10 * 60), check: c7_delayed_q },
    Criterion { id: "c8", title: "mountain car", limit: Duration::from_secs(20 * 60), check: c8_mountain_car },
    Criterion { id: "c9", title: "visit correlation", limit: Duration::from_secs(10 * 60), check: c9_correlation },
    Criterion { id: "c10", title: "counter collapse", limit: Duration::from_secs(5 * 60), check: c10_counter_collapse },
    Criterion { id: "c11", title: "gradient check", limit: Duration::from_secs(10), check: c11_gradient_check },
    Criterion { id: "c12", title: "determinism", limit: Duration::from_secs(60), check: c12_determinism },
];

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).map(|a| a.to_lowercase()).collect();
    let mut failed = Vec::new();
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.iter().any(|w| w == c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (ok, detail) = match result {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), c.limit.as_secs());
        println!(
            "{} {:<4} {:<26} [{timing}{}] {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            if in_time { "" } else { ", over time" }
        );
        if !ok {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
    println!("acceptance: all passed");
}
