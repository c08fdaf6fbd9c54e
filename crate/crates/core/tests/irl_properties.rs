mod common;

use proptest::prelude::*;
use rand::Rng;
use wayward_core::irl::{
    constraint_slacks, estimate_policy, forward_policy, generate_noisy_demos, optimality_constraints,
    recover_reward, validate_recovery, IrlConfig, ObservedPolicy, STRICTNESS_BUDGET,
};
use wayward_core::lp::LinearProgram;
use wayward_core::mdp::{policy_evaluation, MdpDynamics, Policy, RewardFunction};

use common::{planted_instance, random_mdp, rng};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pick = (0..k).collect::<Vec<_>>();
    if k > n {
        return out;
    }
    loop {
        out.push(pick.clone());
        let Some(i) = (0..k).rev().find(|&i| pick[i] != i + n - k) else { return out };
        pick[i] += 1;
        for j in i + 1..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Optimum of a bounded LP by enumerating every basic feasible point: each
/// choice of `n` tight constraints among the rows and sign bounds.
fn vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let mut all: Vec<(Vec<f64>, f64)> = lp.rows.iter().cloned().zip(lp.rhs.iter().copied()).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        all.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for pick in combinations(all.len(), n) {
        let a = pick.iter().map(|&i| all[i].0.clone()).collect();
        let b = pick.iter().map(|&i| all[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        if lp.max_violation(&x) <= 1e-9 {
            let value = lp.evaluate(&x);
            best = Some(best.map_or(value, |v: f64| v.max(value)));
        }
    }
    best
}

fn random_bounded_lp(seed: u64) -> LinearProgram {
    let mut r = rng(seed);
    let n = r.gen_range(1..=5);
    let mut lp = LinearProgram::new(n);
    lp.objective = (0..n).map(|_| r.gen_range(-1.0..2.0)).collect();
    for _ in 0..r.gen_range(0..=4) {
        lp.add_row((0..n).map(|_| r.gen_range(-1.0..2.0)).collect(), r.gen_range(0.0..5.0));
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        lp.add_row(e, r.gen_range(0.5..10.0));
    }
    lp
}

/// The reward LP written out independently of the library: variables
/// `p, q` (reward = p − q) then one margin per constrained state.
fn reward_lp(mdp: &MdpDynamics, observed: &ObservedPolicy, config: &IrlConfig) -> LinearProgram {
    let n = mdp.n_states();
    let constraints = optimality_constraints(mdp, observed).unwrap();
    let mut margin_of = vec![None; n];
    let mut n_vars = 2 * n;
    for c in &constraints {
        if margin_of[c.state].is_none() {
            margin_of[c.state] = Some(n_vars);
            n_vars += 1;
        }
    }
    let mut lp = LinearProgram::new(n_vars);
    for v in 0..2 * n {
        lp.objective[v] = -config.sparsity_weight;
        let mut row = vec![0.0; n_vars];
        row[v] = 1.0;
        lp.add_row(row, config.reward_bound);
    }
    for t in margin_of.iter().flatten() {
        lp.objective[*t] = 1.0;
    }
    for c in &constraints {
        let mut feasible = vec![0.0; n_vars];
        for s in 0..n {
            feasible[s] = -c.coefficients[s];
            feasible[n + s] = c.coefficients[s];
        }
        let mut margin = feasible.clone();
        margin[margin_of[c.state].unwrap()] = 1.0;
        lp.add_row(feasible, 0.0);
        lp.add_row(margin, 0.0);
    }
    lp
}

fn random_observed(r: &mut impl Rng, n_states: usize, n_actions: usize, coverage: f64) -> ObservedPolicy {
    let counts = (0..n_states)
        .map(|_| {
            let mut row = vec![0u64; n_actions];
            if r.gen_bool(coverage) {
                row[r.gen_range(0..n_actions)] = r.gen_range(1..10);
            }
            row
        })
        .collect();
    ObservedPolicy::from_counts(counts, n_actions)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_bounded_lp(seed);
        let solution = lp.solve(10_000).unwrap();
        let oracle = vertex_optimum(&lp).expect("origin is feasible");
        prop_assert!(lp.max_violation(&solution.x) <= 1e-9);
        prop_assert!((solution.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), "{} vs {oracle}", solution.objective);
    }

    #[test]
    fn tiny_reward_lps_reach_the_vertex_optimum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_actions = r.gen_range(2..=3);
        let discount = r.gen_range(0.0..0.95);
        let mdp = random_mdp(&mut r, 2, n_actions, discount, 2);
        let observed = random_observed(&mut r, 2, n_actions, 1.0);
        let config = IrlConfig { sparsity_weight: r.gen_range(0.0..0.3), reward_bound: r.gen_range(0.5..2.0) };
        let estimate = recover_reward(&mdp, &observed, &config).unwrap();
        let lp = reward_lp(&mdp, &observed, &config);
        prop_assume!(lp.n_vars() <= 6);
        let oracle = vertex_optimum(&lp).unwrap();
        prop_assert!(estimate.objective <= oracle + 1e-7, "{} above optimum {oracle}", estimate.objective);
        prop_assert!(estimate.objective >= oracle - STRICTNESS_BUDGET - 1e-7, "{} below optimum {oracle}", estimate.objective);
    }

    #[test]
    fn zero_reward_is_always_feasible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, k) = (r.gen_range(1..=9), r.gen_range(1..=4));
        let (discount, support) = (r.gen_range(0.0..0.99), r.gen_range(1..=n));
        let mdp = random_mdp(&mut r, n, k, discount, support);
        let observed = random_observed(&mut r, n, k, 0.6);
        let slacks = constraint_slacks(&mdp, &observed, &vec![0.0; n]).unwrap();
        prop_assert!(slacks.iter().all(|&(_, _, s)| s == 0.0));
    }

    #[test]
    fn recovered_rewards_satisfy_every_constraint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, k) = (r.gen_range(2..=9), r.gen_range(2..=4));
        let (discount, support) = (r.gen_range(0.0..0.99), r.gen_range(1..=n));
        let mdp = random_mdp(&mut r, n, k, discount, support);
        let observed = random_observed(&mut r, n, k, 0.7);
        prop_assume!(observed.covered_states().next().is_some());
        let config = IrlConfig { sparsity_weight: r.gen_range(0.0..1.0), reward_bound: r.gen_range(0.1..3.0) };
        let estimate = recover_reward(&mdp, &observed, &config).unwrap();
        prop_assert!(estimate.values.iter().all(|v| v.abs() <= config.reward_bound + 1e-9));
        let rows = optimality_constraints(&mdp, &observed).unwrap();
        for row in &rows {
            let lhs: f64 = row.coefficients.iter().zip(&estimate.values).map(|(c, v)| c * v).sum();
            prop_assert!(lhs >= -1e-6);
        }
        for (_, _, slack) in constraint_slacks(&mdp, &observed, &estimate.values).unwrap() {
            prop_assert!(slack >= -1e-6);
        }
    }

    #[test]
    fn positive_scaling_keeps_the_forward_policy(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut r = rng(seed);
        let (n, k) = (r.gen_range(2..=9), r.gen_range(2..=3));
        let mdp = random_mdp(&mut r, n, k, 0.9, 2);
        let observed = random_observed(&mut r, n, k, 1.0);
        let estimate = recover_reward(&mdp, &observed, &IrlConfig { sparsity_weight: 0.1, reward_bound: 1.0 }).unwrap();
        let scaled: Vec<f64> = estimate.values.iter().map(|v| v * c).collect();
        let base = forward_policy(&mdp, &estimate.values).unwrap();
        let after = forward_policy(&mdp, &scaled).unwrap();
        if base != after {
            // only exact ties may flip
            let reward = RewardFunction::broadcast(&estimate.values, k).unwrap();
            let a = policy_evaluation(&mdp, &reward, &base).unwrap();
            let b = policy_evaluation(&mdp, &reward, &after).unwrap();
            prop_assert!(a.sup_distance(&b) <= 1e-9, "scaling by {c} changed the argmax");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planted_policies_round_trip(seed in any::<u64>(), lambda in 0.0f64..=0.1) {
        let mut r = rng(seed);
        let n = r.gen_range(5..=12);
        let planted = planted_instance(&mut r, n, 3, 0.9, 1e-2);
        let observed = ObservedPolicy::from_policy(&planted.policy, 3);
        let config = IrlConfig { sparsity_weight: lambda, reward_bound: 1.0 };
        let estimate = recover_reward(&planted.mdp, &observed, &config).unwrap();
        let report = validate_recovery(&planted.mdp, &estimate, &observed).unwrap();
        prop_assert_eq!(report.agreement, 1.0, "mismatched {:?}", report.mismatched_states);
    }
}

#[test]
fn estimated_policy_converges_under_noise() {
    let mut r = rng(77);
    let mdp = random_mdp(&mut r, 10, 3, 0.9, 3);
    let truth = Policy::new((0..10).map(|_| r.gen_range(0..3)).collect(), 3).unwrap();
    for (seed, rate) in [0.0, 0.2, 0.4].into_iter().enumerate() {
        let log = generate_noisy_demos(&mdp, &truth, rate, 1000, 50, seed as u64);
        let observed = estimate_policy(&log, 10, 3).unwrap();
        for s in observed.covered_states() {
            assert_eq!(observed.action_for(s), Some(truth.action(s)), "rate {rate}, state {s}");
        }
    }
}
