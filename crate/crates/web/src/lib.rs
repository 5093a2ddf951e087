use wasm_bindgen::prelude::*;

use dora_core::agent::{AgentKind, AgentParams, TabularAgent};
use dora_core::approx::{LinearAgent, TileCoder};
use dora_core::env::{make_bridge, make_tree, MountainCarEnv, TreeLayout};
use dora_core::mdp::ActionId;
use dora_core::oracle::{ce_map, mse, visit_histogram, OptimalSolution, DEFAULT_TOLERANCE};
use dora_core::rng::SeededRng;

fn js(e: dora_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Generalized counter of the root action after each full cycle over the
/// leaves of a tree with `k` leaves, under E-value LLL.
pub fn tree_counter_series(k: usize, cycles: usize, gamma_e: f64) -> dora_core::Result<Vec<f64>> {
    let mdp = make_tree(k)?;
    let root = TreeLayout { k }.root();
    let params = AgentParams {
        gamma_e,
        ..AgentParams::default()
    };
    let mut agent = TabularAgent::new(AgentKind::SoftmaxLllEvalue, params, &mdp)?;
    let mut rng = SeededRng::new(0);
    let mut out = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        for _ in 0..k {
            agent.run_episode(&mdp, &mut rng, 10)?;
        }
        out.push(agent.e().generalized_counter(root, ActionId(0)));
    }
    Ok(out)
}

/// Mean MSE per episode on the bridge, divided by the MSE of the initial table.
pub fn bridge_curve_series(
    k: usize,
    agent: &str,
    episodes: usize,
    trials: usize,
    gamma_e: f64,
    seed: u64,
) -> dora_core::Result<Vec<f64>> {
    let kind: AgentKind = agent.parse()?;
    let mdp = make_bridge(k, kind == AgentKind::DelayedQ)?;
    let sol = OptimalSolution::solve(&mdp, DEFAULT_TOLERANCE)?;
    let params = AgentParams {
        gamma_e,
        ..AgentParams::default()
    };
    let mut curve = vec![0.0; episodes];
    let mut initial = 0.0;
    for t in 0..trials.max(1) {
        let mut rng = SeededRng::new(seed.wrapping_add(t as u64));
        let mut ag = TabularAgent::new(kind, params, &mdp)?;
        initial += mse(ag.q(), &sol);
        for slot in curve.iter_mut() {
            ag.run_episode(&mdp, &mut rng, 1_000_000)?;
            *slot += mse(ag.q(), &sol);
        }
    }
    if initial > 0.0 {
        curve.iter_mut().for_each(|m| *m /= initial);
    }
    Ok(curve)
}

/// A trained MountainCar agent's goal indicators, visit histogram and `C_E` map.
#[wasm_bindgen]
pub struct MountainCarRun {
    bins: usize,
    successes: Vec<u8>,
    counts: Vec<f64>,
    c_e: Vec<f64>,
}

#[wasm_bindgen]
impl MountainCarRun {
    #[wasm_bindgen(constructor)]
    pub fn new(agent: &str, episodes: usize, gamma_e: f64, seed: u64, bins: usize) -> Result<MountainCarRun, JsError> {
        Self::train(agent, episodes, gamma_e, seed, bins).map_err(js)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// 1 where the episode reached the goal.
    pub fn successes(&self) -> Vec<u8> {
        self.successes.clone()
    }

    /// Position-major visit counts.
    pub fn counts(&self) -> Vec<f64> {
        self.counts.clone()
    }

    /// Position-major `C_E` at bin centers.
    pub fn c_e(&self) -> Vec<f64> {
        self.c_e.clone()
    }
}

impl MountainCarRun {
    pub fn train(agent: &str, episodes: usize, gamma_e: f64, seed: u64, bins: usize) -> dora_core::Result<Self> {
        let kind: AgentKind = agent.parse()?;
        let params = AgentParams {
            gamma_e,
            beta: 0.05,
            ..AgentParams::default()
        };
        let env = MountainCarEnv::default();
        let coder = TileCoder::mountain_car();
        let mut rng = SeededRng::new(seed);
        let mut ag = LinearAgent::new(kind, params, 0.99, coder.clone(), &mut rng)?;
        let mut visits = Vec::new();
        let mut successes = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let ep = ag.run_episode(&env, &mut rng, Some(&mut visits))?;
            successes.push(u8::from(ep.success));
        }
        let bins = bins.max(1);
        let hist = visit_histogram(&visits, (bins, bins));
        Ok(Self {
            bins,
            successes,
            counts: hist.counts.iter().map(|&c| c as f64).collect(),
            c_e: ce_map(ag.e_head(), &coder, (bins, bins), params.alpha_e),
        })
    }
}

#[wasm_bindgen]
pub fn tree_counters(k: usize, cycles: usize, gamma_e: f64) -> Result<Vec<f64>, JsError> {
    tree_counter_series(k, cycles, gamma_e).map_err(js)
}

#[wasm_bindgen]
pub fn bridge_curve(
    k: usize,
    agent: &str,
    episodes: usize,
    trials: usize,
    gamma_e: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    bridge_curve_series(k, agent, episodes, trials, gamma_e, seed).map_err(js)
}

#[wasm_bindgen]
pub fn agent_names() -> Vec<String> {
    AgentKind::ALL.iter().map(|k| k.name().to_owned()).collect()
}
