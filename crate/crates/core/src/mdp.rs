//! Finite Markov decision processes and exact/iterative forward solvers.
//!
//! Transitions are stored dense, indexed `[action][from][to]`, with a sparse
//! companion used for Bellman backups. Discount is restricted to `[0, 1)` so
//! both value iteration and the direct linear solve are well posed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Row-sum tolerance for stochastic rows.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Upper bound on `n_actions ^ n_states` accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpViolation {
    #[error("transition row (action {action}, state {state}) sums to {sum}")]
    TransitionNotStochastic { action: usize, state: usize, sum: f64 },
    #[error("discount {0} outside [0, 1)")]
    DiscountOutOfRange(f64),
    #[error("non-finite transition entry at ({action}, {from}, {to})")]
    NonFiniteEntry { action: usize, from: usize, to: usize },
    #[error("transition entry {value} at ({action}, {from}, {to}) outside [0, 1]")]
    ProbabilityOutOfRange { action: usize, from: usize, to: usize, value: f64 },
    #[error("expected {expected} transition entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("an MDP needs at least one state and one action")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("invalid MDP: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<MdpViolation>),
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { residual: f64, iterations: usize },
    #[error("policy evaluation system is singular")]
    SingularSystem,
    #[error("{policies} deterministic policies exceed the enumeration limit")]
    SizeLimitExceeded { policies: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite reward at state {state}, action {action}")]
    NonFiniteReward { state: usize, action: usize },
}

/// Checks the raw parts of an MDP, reporting every violation found.
pub fn validate_mdp(
    n_states: usize,
    n_actions: usize,
    transitions: &[f64],
    discount: f64,
) -> Result<(), Vec<MdpViolation>> {
    let mut violations = Vec::new();
    if n_states == 0 || n_actions == 0 {
        violations.push(MdpViolation::Empty);
    }
    if !(0.0..1.0).contains(&discount) {
        violations.push(MdpViolation::DiscountOutOfRange(discount));
    }
    let expected = n_actions * n_states * n_states;
    if transitions.len() != expected {
        violations.push(MdpViolation::ShapeMismatch { expected, found: transitions.len() });
        return Err(violations);
    }
    for a in 0..n_actions {
        for s in 0..n_states {
            let row = &transitions[(a * n_states + s) * n_states..][..n_states];
            let mut finite = true;
            for (t, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    finite = false;
                    violations.push(MdpViolation::NonFiniteEntry { action: a, from: s, to: t });
                } else if !(0.0..=1.0).contains(&p) {
                    violations.push(MdpViolation::ProbabilityOutOfRange {
                        action: a,
                        from: s,
                        to: t,
                        value: p,
                    });
                }
            }
            if finite {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    violations.push(MdpViolation::TransitionNotStochastic { action: a, state: s, sum });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// States, actions, transition tensor and discount of a finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpDynamics {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    discount: f64,
    // nonzero (to, p) per (action, from), in the same order as the dense rows
    sparse: Vec<Vec<(usize, f64)>>,
}

impl MdpDynamics {
    /// Builds an MDP from a flat `[action][from][to]` tensor.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        discount: f64,
    ) -> Result<Self, MdpError> {
        validate_mdp(n_states, n_actions, &transitions, discount).map_err(MdpError::Invalid)?;
        let sparse = transitions
            .chunks(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(t, &p)| (t, p))
                    .collect()
            })
            .collect();
        Ok(Self { n_states, n_actions, transitions, discount, sparse })
    }

    /// Builds an MDP from a nested `[action][from][to]` tensor.
    pub fn from_nested(transitions: &[Vec<Vec<f64>>], discount: f64) -> Result<Self, MdpError> {
        let n_actions = transitions.len();
        let n_states = transitions.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(n_actions * n_states * n_states);
        for per_action in transitions {
            if per_action.len() != n_states {
                return Err(MdpError::DimensionMismatch(format!(
                    "action block has {} rows, expected {n_states}",
                    per_action.len()
                )));
            }
            for row in per_action {
                if row.len() != n_states {
                    return Err(MdpError::DimensionMismatch(format!(
                        "row has {} entries, expected {n_states}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
        }
        Self::new(n_states, n_actions, flat, discount)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Dense distribution over successor states for `action` taken in `state`.
    pub fn row(&self, action: usize, state: usize) -> &[f64] {
        &self.transitions[(action * self.n_states + state) * self.n_states..][..self.n_states]
    }

    pub fn prob(&self, action: usize, from: usize, to: usize) -> f64 {
        self.row(action, from)[to]
    }

    /// Nonzero successors of (`state`, `action`) as `(to, probability)` pairs.
    pub fn successors(&self, action: usize, state: usize) -> &[(usize, f64)] {
        &self.sparse[action * self.n_states + state]
    }

    /// Same MDP with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self, MdpError> {
        if !(0.0..1.0).contains(&discount) {
            return Err(MdpError::Invalid(vec![MdpViolation::DiscountOutOfRange(discount)]));
        }
        Ok(Self { discount, ..self.clone() })
    }

    fn expected_next(&self, action: usize, state: usize, values: &[f64]) -> f64 {
        self.successors(action, state).iter().map(|&(t, p)| p * values[t]).sum()
    }

    /// `R(s,a) + γ Σ P(s'|s,a) V(s')`.
    pub fn q_value(&self, reward: &RewardFunction, values: &ValueFunction, state: usize, action: usize) -> f64 {
        reward.get(state, action) + self.discount * self.expected_next(action, state, values.as_slice())
    }
}

/// Reward per (state, action) pair, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl RewardFunction {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self, MdpError> {
        if values.len() != n_states * n_actions {
            return Err(MdpError::DimensionMismatch(format!(
                "reward has {} entries, expected {}",
                values.len(),
                n_states * n_actions
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MdpError::NonFiniteReward { state: i / n_actions, action: i % n_actions });
        }
        Ok(Self { n_states, n_actions, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MdpError> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(MdpError::DimensionMismatch("ragged reward rows".into()));
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    /// Broadcasts a per-state reward to every action: `R(s,a) := R(s)`.
    pub fn broadcast(state_rewards: &[f64], n_actions: usize) -> Result<Self, MdpError> {
        let values = state_rewards
            .iter()
            .flat_map(|&r| std::iter::repeat(r).take(n_actions))
            .collect();
        Self::new(state_rewards.len(), n_actions, values)
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Adds `c` to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect(), ..self.clone() }
    }

    fn check_shape(&self, mdp: &MdpDynamics) -> Result<(), MdpError> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(MdpError::DimensionMismatch(format!(
                "reward is {}x{}, MDP is {}x{}",
                self.n_states, self.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }
}

/// Deterministic stationary policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>, n_actions: usize) -> Result<Self, MdpError> {
        if let Some(s) = actions.iter().position(|&a| a >= n_actions) {
            return Err(MdpError::DimensionMismatch(format!(
                "policy action {} at state {s} exceeds {n_actions} actions",
                actions[s]
            )));
        }
        Ok(Self(actions))
    }

    pub fn action(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// One Bellman optimality backup `(T V)(s) = max_a Q(s, a)`.
pub fn bellman_backup(mdp: &MdpDynamics, reward: &RewardFunction, values: &ValueFunction) -> ValueFunction {
    let next = (0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_actions)
                .map(|a| mdp.q_value(reward, values, s, a))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    ValueFunction(next)
}

/// Sup-norm Bellman residual `‖T V − V‖∞`.
pub fn bellman_residual(mdp: &MdpDynamics, reward: &RewardFunction, values: &ValueFunction) -> f64 {
    bellman_backup(mdp, reward, values).sup_distance(values)
}

/// Value iteration from `V = 0`.
///
/// Stops once `γ/(1−γ)·‖V_{k+1} − V_k‖∞ ≤ tolerance`, which bounds both the
/// distance to the optimal values and the Bellman residual of the returned
/// iterate by `tolerance`. Returns the values and the number of backups.
pub fn value_iteration(
    mdp: &MdpDynamics,
    reward: &RewardFunction,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(ValueFunction, usize), MdpError> {
    reward.check_shape(mdp)?;
    let gamma = mdp.discount;
    let scale = if gamma == 0.0 { 0.0 } else { gamma / (1.0 - gamma) };
    let mut values = ValueFunction(vec![0.0; mdp.n_states]);
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let next = bellman_backup(mdp, reward, &values);
        residual = scale * next.sup_distance(&values);
        values = next;
        if residual <= tolerance {
            return Ok((values, iteration));
        }
    }
    Err(MdpError::NotConverged { residual, iterations: max_iterations })
}

/// Greedy policy with respect to `values`; ties go to the lowest action index.
pub fn greedy_policy(mdp: &MdpDynamics, reward: &RewardFunction, values: &ValueFunction) -> Policy {
    let actions = (0..mdp.n_states)
        .map(|s| {
            let mut best = 0;
            let mut best_q = mdp.q_value(reward, values, s, 0);
            for a in 1..mdp.n_actions {
                let q = mdp.q_value(reward, values, s, a);
                if q > best_q {
                    best = a;
                    best_q = q;
                }
            }
            best
        })
        .collect();
    Policy(actions)
}

/// Value iteration followed by greedy extraction, with default settings.
pub fn solve_optimal(mdp: &MdpDynamics, reward: &RewardFunction) -> Result<(Policy, ValueFunction), MdpError> {
    let (values, _) = value_iteration(mdp, reward, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)?;
    Ok((greedy_policy(mdp, reward, &values), values))
}

/// `P_π` as a dense matrix.
pub fn policy_transition_matrix(mdp: &MdpDynamics, policy: &Policy) -> DMatrix<f64> {
    let n = mdp.n_states;
    DMatrix::from_fn(n, n, |s, t| mdp.prob(policy.action(s), s, t))
}

/// Exact value of `policy`: solves `(I − γ P_π) V = R_π` directly.
pub fn policy_evaluation(
    mdp: &MdpDynamics,
    reward: &RewardFunction,
    policy: &Policy,
) -> Result<ValueFunction, MdpError> {
    reward.check_shape(mdp)?;
    if policy.len() != mdp.n_states {
        return Err(MdpError::DimensionMismatch(format!(
            "policy covers {} states, MDP has {}",
            policy.len(),
            mdp.n_states
        )));
    }
    let n = mdp.n_states;
    let system = DMatrix::<f64>::identity(n, n) - policy_transition_matrix(mdp, policy) * mdp.discount;
    let rhs = DVector::from_fn(n, |s, _| reward.get(s, policy.action(s)));
    let lu = system.clone().lu();
    let mut solution = lu.solve(&rhs).ok_or(MdpError::SingularSystem)?;
    // one round of iterative refinement keeps the residual at rounding level
    let correction = lu.solve(&(&rhs - &system * &solution)).ok_or(MdpError::SingularSystem)?;
    solution += correction;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(MdpError::SingularSystem);
    }
    Ok(ValueFunction(solution.iter().copied().collect()))
}

/// Enumerates every deterministic policy and returns the one with the largest
/// summed value. Enumeration is lexicographic with state 0 most significant;
/// the first maximiser wins.
pub fn brute_force_optimal(mdp: &MdpDynamics, reward: &RewardFunction) -> Result<Policy, MdpError> {
    reward.check_shape(mdp)?;
    let count = (mdp.n_actions as u64)
        .checked_pow(mdp.n_states as u32)
        .unwrap_or(u64::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(MdpError::SizeLimitExceeded { policies: count });
    }
    let mut current = vec![0usize; mdp.n_states];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..count {
        let policy = Policy(current.clone());
        let total: f64 = policy_evaluation(mdp, reward, &policy)?.0.iter().sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, current.clone()));
        }
        // odometer increment, last state fastest
        for s in (0..mdp.n_states).rev() {
            current[s] += 1;
            if current[s] < mdp.n_actions {
                break;
            }
            current[s] = 0;
        }
    }
    Ok(Policy(best.map(|(_, p)| p).unwrap_or_default()))
}
