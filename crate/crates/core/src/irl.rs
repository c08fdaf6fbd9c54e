//! Reward recovery from demonstrated behaviour.
//!
//! The observed policy is taken as given and a per-state reward is sought
//! under which it is optimal. The search is a linear program over the reward
//! vector that maximises the summed optimality margins of the demonstrated
//! actions, minus an L1 penalty, inside a box `|R(s)| ≤ R_max`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpError};
use crate::mdp::{
    greedy_policy, value_iteration, MdpDynamics, MdpError, Policy, RewardFunction, DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
};
use crate::trajectory::{LogEntry, Source, TrajectoryLog};

/// Transition rows closer than this are treated as the same action.
const SAME_ROW_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IrlError {
    #[error("trajectory log is empty")]
    EmptyLog,
    #[error("log entry {index} references state {state} / action {action} outside {n_states}x{n_actions}")]
    IndexOutOfRange { index: usize, state: u32, action: u32, n_states: usize, n_actions: usize },
    #[error("no state is covered by the demonstrations")]
    NoCoverage,
    #[error("reward LP is infeasible")]
    Infeasible,
    #[error("reward LP stalled after {0} pivots")]
    SolverStalled(usize),
    #[error("invalid IRL configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Objective value the returned reward may give up, relative to the LP
/// optimum, to make the observed action strictly optimal everywhere.
pub const STRICTNESS_BUDGET: f64 = 5e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlConfig {
    /// Weight on `Σ|R(s)|`.
    pub sparsity_weight: f64,
    /// Box bound on every recovered reward entry.
    pub reward_bound: f64,
}

impl Default for IrlConfig {
    fn default() -> Self {
        Self { sparsity_weight: 1.0, reward_bound: 1.0 }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<(), IrlError> {
        if !(self.reward_bound > 0.0 && self.reward_bound.is_finite()) {
            return Err(IrlError::InvalidConfig(format!("reward_bound {} must be positive", self.reward_bound)));
        }
        if !(self.sparsity_weight >= 0.0 && self.sparsity_weight.is_finite()) {
            return Err(IrlError::InvalidConfig(format!(
                "sparsity_weight {} must be nonnegative",
                self.sparsity_weight
            )));
        }
        Ok(())
    }
}

/// Majority-vote policy estimated from visit counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedPolicy {
    n_actions: usize,
    action_for: Vec<Option<usize>>,
    visit_counts: Vec<Vec<u64>>,
}

impl ObservedPolicy {
    /// Builds from per-state visit counts; majority action per state, ties
    /// to the lowest index, unvisited states left uncovered.
    pub fn from_counts(visit_counts: Vec<Vec<u64>>, n_actions: usize) -> Self {
        let action_for = visit_counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                (total > 0).then(|| {
                    let mut best = 0;
                    for (a, &c) in row.iter().enumerate() {
                        if c > row[best] {
                            best = a;
                        }
                    }
                    best
                })
            })
            .collect();
        Self { n_actions, action_for, visit_counts }
    }

    /// Every state covered, taking the action of `policy`.
    pub fn from_policy(policy: &Policy, n_actions: usize) -> Self {
        let counts = policy
            .actions()
            .iter()
            .map(|&a| {
                let mut row = vec![0; n_actions];
                row[a] = 1;
                row
            })
            .collect();
        Self::from_counts(counts, n_actions)
    }

    pub fn n_states(&self) -> usize {
        self.action_for.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn action_for(&self, state: usize) -> Option<usize> {
        self.action_for[state]
    }

    pub fn is_covered(&self, state: usize) -> bool {
        self.action_for[state].is_some()
    }

    pub fn covered_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(|&s| self.is_covered(s))
    }

    pub fn visit_counts(&self) -> &[Vec<u64>] {
        &self.visit_counts
    }
}

/// Recovered per-state reward with LP diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEstimate {
    pub values: Vec<f64>,
    pub objective: f64,
    /// Smallest optimality margin of the observed action per state; zero for
    /// uncovered states and states without a distinguishable alternative.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub agreement: f64,
    pub mismatched_states: Vec<usize>,
}

/// Counts `(state, action)` visits over every entry of `log`.
pub fn estimate_policy(log: &TrajectoryLog, n_states: usize, n_actions: usize) -> Result<ObservedPolicy, IrlError> {
    estimate_policy_from(&log.entries, n_states, n_actions)
}

pub fn estimate_policy_from(entries: &[LogEntry], n_states: usize, n_actions: usize) -> Result<ObservedPolicy, IrlError> {
    if entries.is_empty() {
        return Err(IrlError::EmptyLog);
    }
    let mut counts = vec![vec![0u64; n_actions]; n_states];
    for (index, e) in entries.iter().enumerate() {
        let (s, a) = (e.state as usize, e.action as usize);
        if s >= n_states || a >= n_actions {
            return Err(IrlError::IndexOutOfRange { index, state: e.state, action: e.action, n_states, n_actions });
        }
        counts[s][a] += 1;
    }
    Ok(ObservedPolicy::from_counts(counts, n_actions))
}

fn check_dims(mdp: &MdpDynamics, observed: &ObservedPolicy) -> Result<(), IrlError> {
    if observed.n_states() != mdp.n_states() || observed.n_actions() != mdp.n_actions() {
        return Err(IrlError::DimensionMismatch(format!(
            "observed policy is {}x{}, MDP is {}x{}",
            observed.n_states(),
            observed.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// Transition matrix of the observed policy; uncovered states self-loop.
fn observed_transitions(mdp: &MdpDynamics, observed: &ObservedPolicy) -> DMatrix<f64> {
    let n = mdp.n_states();
    DMatrix::from_fn(n, n, |s, t| match observed.action_for(s) {
        Some(a) => mdp.prob(a, s, t),
        None => f64::from(u8::from(s == t)),
    })
}

/// Two actions are interchangeable at `state` when their transition rows coincide.
fn same_behaviour(mdp: &MdpDynamics, state: usize, a: usize, b: usize) -> bool {
    a == b || mdp.row(a, state).iter().zip(mdp.row(b, state)).all(|(p, q)| (p - q).abs() <= SAME_ROW_EPS)
}

fn distinct_alternatives(mdp: &MdpDynamics, state: usize, chosen: usize) -> impl Iterator<Item = usize> + '_ {
    (0..mdp.n_actions()).filter(move |&a| !same_behaviour(mdp, state, chosen, a))
}

/// One optimality constraint `coefficients · R ≥ 0` of the reward LP.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityConstraint {
    pub state: usize,
    pub alternative: usize,
    pub coefficients: Vec<f64>,
}

/// Builds `(P_π(s,·) − P_a(s,·)) (I − γ P_π)⁻¹` for every covered state and
/// every alternative action whose transition row differs from the observed
/// action's row.
pub fn optimality_constraints(
    mdp: &MdpDynamics,
    observed: &ObservedPolicy,
) -> Result<Vec<OptimalityConstraint>, IrlError> {
    check_dims(mdp, observed)?;
    let n = mdp.n_states();
    let system = DMatrix::<f64>::identity(n, n) - observed_transitions(mdp, observed) * mdp.discount();
    let inverse = system.try_inverse().ok_or(IrlError::Mdp(MdpError::SingularSystem))?;
    let mut constraints = Vec::new();
    for s in observed.covered_states() {
        let chosen = observed.action_for(s).expect("covered");
        for a in distinct_alternatives(mdp, s, chosen) {
            let diff = DVector::from_iterator(
                n,
                mdp.row(chosen, s).iter().zip(mdp.row(a, s)).map(|(p, q)| p - q),
            );
            let coefficients = (inverse.transpose() * diff).iter().copied().collect();
            constraints.push(OptimalityConstraint { state: s, alternative: a, coefficients });
        }
    }
    Ok(constraints)
}

/// Slack `P_π(s)·V − P_a(s)·V` of every optimality constraint at `rewards`,
/// with `V` obtained by solving `(I − γ P_π) V = R` directly. A constraint is
/// satisfied when its slack is nonnegative.
pub fn constraint_slacks(
    mdp: &MdpDynamics,
    observed: &ObservedPolicy,
    rewards: &[f64],
) -> Result<Vec<(usize, usize, f64)>, IrlError> {
    check_dims(mdp, observed)?;
    let n = mdp.n_states();
    if rewards.len() != n {
        return Err(IrlError::DimensionMismatch(format!("{} rewards for {n} states", rewards.len())));
    }
    let system = DMatrix::<f64>::identity(n, n) - observed_transitions(mdp, observed) * mdp.discount();
    let values = system
        .lu()
        .solve(&DVector::from_column_slice(rewards))
        .ok_or(IrlError::Mdp(MdpError::SingularSystem))?;
    let dot = |row: &[f64]| -> f64 { row.iter().zip(values.iter()).map(|(p, v)| p * v).sum() };
    let mut slacks = Vec::new();
    for s in observed.covered_states() {
        let chosen = observed.action_for(s).expect("covered");
        let own = dot(mdp.row(chosen, s));
        for a in distinct_alternatives(mdp, s, chosen) {
            slacks.push((s, a, own - dot(mdp.row(a, s))));
        }
    }
    Ok(slacks)
}

/// Solves the margin-maximising reward LP.
///
/// Variables are `R = p − q` with `0 ≤ p, q ≤ R_max`, plus one margin
/// variable `t_s` per covered state that has a distinguishable alternative.
/// Objective `Σ t_s − λ Σ (p + q)`; rows `t_s ≤ c·R` and `c·R ≥ 0` for
/// every optimality constraint `c`.
pub fn recover_reward(
    mdp: &MdpDynamics,
    observed: &ObservedPolicy,
    config: &IrlConfig,
) -> Result<RewardEstimate, IrlError> {
    config.validate()?;
    check_dims(mdp, observed)?;
    if observed.covered_states().next().is_none() {
        return Err(IrlError::NoCoverage);
    }
    let n = mdp.n_states();
    let constraints = optimality_constraints(mdp, observed)?;

    let mut margin_var = vec![None; n];
    let mut n_vars = 2 * n;
    for c in &constraints {
        if margin_var[c.state].is_none() {
            margin_var[c.state] = Some(n_vars);
            n_vars += 1;
        }
    }

    let mut lp = LinearProgram::new(n_vars);
    for s in 0..n {
        lp.objective[s] = -config.sparsity_weight;
        lp.objective[n + s] = -config.sparsity_weight;
    }
    for t in margin_var.iter().flatten() {
        lp.objective[*t] = 1.0;
    }
    for c in &constraints {
        let mut row = vec![0.0; n_vars];
        for (j, &v) in c.coefficients.iter().enumerate() {
            row[j] = -v;
            row[n + j] = v;
        }
        lp.add_row(row.clone(), 0.0);
        row[margin_var[c.state].expect("assigned above")] = 1.0;
        lp.add_row(row, 0.0);
    }
    for j in 0..2 * n {
        let mut row = vec![0.0; n_vars];
        row[j] = 1.0;
        lp.add_row(row, config.reward_bound);
    }

    let max_pivots = 200 * (lp.rows.len() + n_vars).max(50);
    let solution = lp.solve(max_pivots).map_err(|e| match e {
        LpError::Stalled(p) => IrlError::SolverStalled(p),
        _ => IrlError::Infeasible,
    })?;

    let mut values: Vec<f64> = (0..n)
        .map(|s| (solution.x[s] - solution.x[n + s]).clamp(-config.reward_bound, config.reward_bound))
        .collect();
    let objective_of = |values: &[f64]| {
        let margins = state_margins(&constraints, values);
        margins.iter().sum::<f64>() - config.sparsity_weight * values.iter().map(|r| r.abs()).sum::<f64>()
    };
    let weakest = |values: &[f64]| {
        let margins = state_margins(&constraints, values);
        margin_var.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(s, _)| margins[s]).fold(f64::INFINITY, f64::min)
    };

    // The optimum can sit on a vertex where some state's observed action only
    // ties its best alternative. Unless the optimum is R = 0, step toward the
    // reward with the largest smallest margin; by concavity of the objective
    // this costs at most STRICTNESS_BUDGET and leaves every margin positive.
    if values.iter().any(|v| v.abs() > STRICT_MARGIN) && weakest(&values) <= STRICT_MARGIN {
        let strict = max_min_margin_reward(&constraints, n, config.reward_bound)?;
        if weakest(&strict) > STRICT_MARGIN {
            let loss = objective_of(&values) - objective_of(&strict);
            let theta = if loss <= STRICTNESS_BUDGET { 1.0 } else { STRICTNESS_BUDGET / loss };
            values = values.iter().zip(&strict).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        }
    }

    let margins = state_margins(&constraints, &values);
    let objective = objective_of(&values);
    Ok(RewardEstimate { values, objective, margins })
}

/// Margins below this count as ties.
const STRICT_MARGIN: f64 = 1e-9;

/// Smallest constraint value per state; zero where a state has no constraint.
fn state_margins(constraints: &[OptimalityConstraint], values: &[f64]) -> Vec<f64> {
    let mut margins = vec![f64::INFINITY; values.len()];
    for c in constraints {
        let v: f64 = c.coefficients.iter().zip(values).map(|(a, r)| a * r).sum();
        margins[c.state] = margins[c.state].min(v);
    }
    for m in &mut margins {
        if m.is_infinite() {
            *m = 0.0;
        }
    }
    margins
}

/// Reward in the box maximizing the smallest constraint value over all rows.
fn max_min_margin_reward(constraints: &[OptimalityConstraint], n: usize, bound: f64) -> Result<Vec<f64>, IrlError> {
    let n_vars = 2 * n + 1;
    let floor = 2 * n;
    let mut lp = LinearProgram::new(n_vars);
    lp.objective[floor] = 1.0;
    for c in constraints {
        let mut row = vec![0.0; n_vars];
        for (j, &v) in c.coefficients.iter().enumerate() {
            row[j] = -v;
            row[n + j] = v;
        }
        row[floor] = 1.0;
        lp.add_row(row, 0.0);
    }
    for j in 0..2 * n {
        let mut row = vec![0.0; n_vars];
        row[j] = 1.0;
        lp.add_row(row, bound);
    }
    let max_pivots = 200 * (lp.rows.len() + n_vars).max(50);
    let solution = lp.solve(max_pivots).map_err(|e| match e {
        LpError::Stalled(p) => IrlError::SolverStalled(p),
        _ => IrlError::Infeasible,
    })?;
    Ok((0..n).map(|s| (solution.x[s] - solution.x[n + s]).clamp(-bound, bound)).collect())
}

/// Forward-optimal policy under a per-state reward broadcast to all actions.
pub fn forward_policy(mdp: &MdpDynamics, state_rewards: &[f64]) -> Result<Policy, IrlError> {
    let reward = RewardFunction::broadcast(state_rewards, mdp.n_actions())?;
    let (values, _) = value_iteration(mdp, &reward, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)?;
    Ok(greedy_policy(mdp, &reward, &values))
}

/// Fraction of covered states where the forward-optimal policy under the
/// recovered reward reproduces the observed action. An action with the same
/// transition row as the observed one counts as a match.
pub fn validate_recovery(
    mdp: &MdpDynamics,
    estimate: &RewardEstimate,
    observed: &ObservedPolicy,
) -> Result<ValidationReport, IrlError> {
    check_dims(mdp, observed)?;
    if estimate.values.len() != mdp.n_states() {
        return Err(IrlError::DimensionMismatch(format!(
            "estimate has {} values for {} states",
            estimate.values.len(),
            mdp.n_states()
        )));
    }
    let covered: Vec<usize> = observed.covered_states().collect();
    if covered.is_empty() {
        return Err(IrlError::NoCoverage);
    }
    let policy = forward_policy(mdp, &estimate.values)?;
    let mismatched_states: Vec<usize> = covered
        .iter()
        .copied()
        .filter(|&s| {
            let chosen = observed.action_for(s).expect("covered");
            !same_behaviour(mdp, s, chosen, policy.action(s))
        })
        .collect();
    let agreement = 1.0 - mismatched_states.len() as f64 / covered.len() as f64;
    Ok(ValidationReport { agreement, mismatched_states })
}

/// Samples `n_trajectories` rollouts of `policy` that deviate to a uniformly
/// random action with probability `deviation_rate` at each step.
///
/// Start states are uniform. Entry `tick` is the step index and `agent_id`
/// the trajectory index; the log is sorted by `(tick, agent_id)`.
pub fn generate_noisy_demos(
    mdp: &MdpDynamics,
    policy: &Policy,
    deviation_rate: f64,
    n_trajectories: usize,
    horizon: usize,
    seed: u64,
) -> TrajectoryLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = TrajectoryLog::new(seed);
    log.entries.reserve(n_trajectories * horizon);
    for traj in 0..n_trajectories {
        let mut state = rng.gen_range(0..mdp.n_states());
        for step in 0..horizon {
            let action = if rng.gen::<f64>() < deviation_rate {
                rng.gen_range(0..mdp.n_actions())
            } else {
                policy.action(state)
            };
            log.push(LogEntry {
                tick: step as u64,
                agent_id: traj as u32,
                source: Source::Virtual,
                state: state as u32,
                action: action as u32,
            });
            state = sample_successor(mdp, state, action, rng.gen::<f64>());
        }
    }
    log.sort();
    log
}

fn sample_successor(mdp: &MdpDynamics, state: usize, action: usize, u: f64) -> usize {
    let successors = mdp.successors(action, state);
    let mut acc = 0.0;
    for &(t, p) in successors {
        acc += p;
        if u < acc {
            return t;
        }
    }
    successors.last().map_or(state, |&(t, _)| t)
}
