//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page needs no exception handling.

use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;
use wayward_core::env::{compile_mdp, generate_network, reduce_network, subdivide};
use wayward_core::io::network_to_value;
use wayward_core::irl::{estimate_policy, recover_reward, validate_recovery, IrlConfig};
use wayward_core::sim::{init_world, Event, Scenario};
use wayward_core::toy::toy_scenario;

const MAX_TICKS: u32 = 2_000;
const MAX_NODES: u32 = 2_000;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// The toy scenario with six office workers of the given fixation.
fn toy_with(fixation: f64, seed: u64) -> Result<Scenario, String> {
    if !(0.0..=1.0).contains(&fixation) {
        return Err(format!("fixation {fixation} outside [0, 1]"));
    }
    let mut scenario = toy_scenario(seed);
    scenario.profiles[0].profile.fixation = fixation;
    scenario.profiles[0].count = 6;
    Ok(scenario)
}

/// Runs the toy scenario and returns the network, each agent's node per
/// tick, and event counts.
#[wasm_bindgen]
pub fn simulate_toy(fixation: f64, ticks: u32, seed: u32) -> String {
    respond((|| {
        let scenario = toy_with(fixation, u64::from(seed))?;
        let ticks = ticks.min(MAX_TICKS);
        let compilation = compile_mdp(&scenario.network, scenario.slip_probability, scenario.discount)
            .map_err(|e| e.to_string())?;
        let mut world = init_world(&scenario).map_err(|e| e.to_string())?;
        let frame = |w: &wayward_core::sim::World| -> Vec<Value> {
            w.snapshot(Vec::new())
                .agents
                .iter()
                .filter(|a| a.active)
                .map(|a| json!({ "agent": a.agent_id, "node": a.node_id }))
                .collect()
        };
        let mut frames = vec![frame(&world)];
        let (mut deviations, mut arrivals) = (0, 0);
        for _ in 0..ticks {
            if world.active_count() == 0 {
                break;
            }
            for event in world.step(&compilation).map_err(|e| e.to_string())? {
                match event {
                    Event::Deviated { .. } => deviations += 1,
                    Event::Arrived { .. } => arrivals += 1,
                    Event::Deactivated { .. } => {}
                }
            }
            frames.push(frame(&world));
        }
        Ok(json!({
            "network": network_to_value(&scenario.network),
            "frames": frames,
            "deviations": deviations,
            "arrivals": arrivals,
        }))
    })())
}

/// Simulates the toy scenario, then recovers a per-node reward from the
/// resulting log.
#[wasm_bindgen]
pub fn recover_toy_reward(sparsity_weight: f64, fixation: f64, seed: u32) -> String {
    respond((|| {
        let scenario = toy_with(fixation, u64::from(seed))?;
        let compilation = compile_mdp(&scenario.network, scenario.slip_probability, scenario.discount)
            .map_err(|e| e.to_string())?;
        let mut world = init_world(&scenario).map_err(|e| e.to_string())?;
        world.run(&compilation, scenario.ticks).map_err(|e| e.to_string())?;
        let mdp = &compilation.dynamics;
        let config = IrlConfig { sparsity_weight, reward_bound: 1.0 };
        let observed = estimate_policy(world.log(), mdp.n_states(), mdp.n_actions()).map_err(|e| e.to_string())?;
        let reward = recover_reward(mdp, &observed, &config).map_err(|e| e.to_string())?;
        let report = validate_recovery(mdp, &reward, &observed).map_err(|e| e.to_string())?;
        let net = &scenario.network;
        let rewards: Vec<Value> = reward
            .values
            .iter()
            .enumerate()
            .map(|(s, r)| json!({ "node": net.id_of(s), "reward": r }))
            .collect();
        Ok(json!({
            "network": network_to_value(net),
            "rewards": rewards,
            "agreement": report.agreement,
            "log_entries": world.log().len(),
        }))
    })())
}

/// Generates a network, subdivides its streets, and contracts plain
/// degree-2 corners again.
#[wasm_bindgen]
pub fn reduce_random(nodes: u32, buildings: u32, seed: u32) -> String {
    respond((|| {
        if !(2..=MAX_NODES).contains(&nodes) {
            return Err(format!("nodes must be in 2..={MAX_NODES}"));
        }
        let base = generate_network(nodes as usize, buildings as usize, u64::from(seed));
        let original = subdivide(&base, nodes as usize, u64::from(seed));
        let (reduced, mapping) = reduce_network(&original);
        Ok(json!({
            "original": network_to_value(&original),
            "reduced": network_to_value(&reduced),
            "removed": mapping.removed.len(),
        }))
    })())
}
