//! Instance generators and independent oracles shared by integration tests.
#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wayward_core::env::StreetNetwork;
use wayward_core::mdp::{
    policy_evaluation, value_iteration, MdpDynamics, Policy, RewardFunction, ValueFunction,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each transition row puts random weight on `support` distinct successors.
pub fn random_mdp<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, discount: f64, support: usize) -> MdpDynamics {
    let mut flat = vec![0.0; n_actions * n_states * n_states];
    for a in 0..n_actions {
        for s in 0..n_states {
            let k = support.clamp(1, n_states);
            let targets = sample(rng, n_states, k).into_vec();
            let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let base = (a * n_states + s) * n_states;
            for (t, w) in targets.into_iter().zip(weights) {
                flat[base + t] = w / total;
            }
        }
    }
    MdpDynamics::new(n_states, n_actions, flat, discount).expect("rows sum to one")
}

pub fn q_values(mdp: &MdpDynamics, reward: &RewardFunction, values: &ValueFunction) -> Vec<Vec<f64>> {
    (0..mdp.n_states())
        .map(|s| (0..mdp.n_actions()).map(|a| mdp.q_value(reward, values, s, a)).collect())
        .collect()
}

/// A planted per-state reward whose optimal policy beats every other action
/// by at least `gap` in every state, with that policy.
pub struct Planted {
    pub mdp: MdpDynamics,
    pub rewards: Vec<f64>,
    pub policy: Policy,
}

pub fn planted_instance<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, discount: f64, gap: f64) -> Planted {
    loop {
        let mdp = random_mdp(rng, n_states, n_actions, discount, 2);
        let rewards: Vec<f64> = (0..n_states)
            .map(|_| if rng.gen_bool(0.4) { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let reward = RewardFunction::broadcast(&rewards, n_actions).unwrap();
        let (v, _) = value_iteration(&mdp, &reward, 1e-12, 100_000).unwrap();
        let q = q_values(&mdp, &reward, &v);
        let mut actions = Vec::with_capacity(n_states);
        let mut unique = true;
        for row in &q {
            let best = (0..n_actions).fold(0, |b, a| if row[a] > row[b] { a } else { b });
            let runner_up = (0..n_actions).filter(|&a| a != best).map(|a| row[a]).fold(f64::NEG_INFINITY, f64::max);
            unique &= row[best] - runner_up >= gap;
            actions.push(best);
        }
        if unique {
            let policy = Policy::new(actions, n_actions).unwrap();
            return Planted { mdp, rewards, policy };
        }
    }
}

/// Whether two policies are both optimal to within `tol` in value.
pub fn equally_good(mdp: &MdpDynamics, reward: &RewardFunction, a: &Policy, b: &Policy, tol: f64) -> bool {
    let va = policy_evaluation(mdp, reward, a).unwrap();
    let vb = policy_evaluation(mdp, reward, b).unwrap();
    va.sup_distance(&vb) <= tol
}

/// All-pairs shortest path lengths by Floyd–Warshall over the edge list.
pub fn floyd_warshall(net: &StreetNetwork) -> Vec<Vec<f64>> {
    let n = net.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in net.edges() {
        let (a, b) = (net.index_of(e.from).unwrap(), net.index_of(e.to).unwrap());
        d[a][b] = d[a][b].min(e.length);
        d[b][a] = d[b][a].min(e.length);
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
