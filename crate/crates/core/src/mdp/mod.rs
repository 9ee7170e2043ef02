//! Networked multi-agent discounted MDP: data model, exact matrix views under
//! a policy, sampling, and the random-instance generator.

pub(crate) mod format;
mod generate;

pub use format::{read_instance, write_instance};
pub use generate::{generate_instance, FeatureKind, GenConfig, TransitionKind};

use crate::error::{Error, Result};
use crate::linalg::{tol, DenseMatrix};
use crate::rng::SimRng;

/// Mixed-radix enumeration of the joint action space, agent 0 most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl JointActionSpace {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidInstance(format!(
                "action sizes must be positive, got {sizes:?}"
            )));
        }
        let mut strides = vec![1; sizes.len()];
        for i in (0..sizes.len() - 1).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let total = strides[0] * sizes[0];
        Ok(Self {
            sizes: sizes.to_vec(),
            strides,
            total,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Action of `agent` inside the joint index `joint`.
    #[inline]
    pub fn component(&self, joint: usize, agent: usize) -> usize {
        (joint / self.strides[agent]) % self.sizes[agent]
    }

    pub fn encode(&self, action: &JointAction) -> Result<usize> {
        if action.0.len() != self.sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sizes.len(),
                actual: action.0.len(),
            });
        }
        if let Some((&a, &size)) = action.0.iter().zip(&self.sizes).find(|(&a, &n)| a >= n) {
            return Err(Error::IndexOutOfRange {
                what: "agent action",
                index: a,
                limit: size,
            });
        }
        Ok(self.encode_slice(&action.0))
    }

    /// Unchecked encoding of per-agent actions.
    #[inline]
    pub fn encode_slice(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode(&self, joint: usize) -> JointAction {
        JointAction(
            (0..self.sizes.len())
                .map(|i| self.component(joint, i))
                .collect(),
        )
    }
}

/// One action index per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointAction(pub Vec<usize>);

/// Joint policy table: row `s` is a distribution over joint-action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy(DenseMatrix);

impl JointPolicy {
    pub fn new(table: DenseMatrix) -> Result<Self> {
        for s in 0..table.rows() {
            let row = table.row(s);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > tol::STOCHASTIC {
                return Err(Error::InvalidPolicy(format!(
                    "state {s}: distribution sums to {sum} or has negative mass"
                )));
            }
        }
        Ok(Self(table))
    }

    /// Deterministic policy choosing joint action `actions[s]` in state `s`.
    pub fn deterministic(n_joint: usize, actions: &[usize]) -> Result<Self> {
        let mut t = DenseMatrix::zeros(actions.len(), n_joint);
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_joint {
                return Err(Error::IndexOutOfRange {
                    what: "joint action",
                    index: a,
                    limit: n_joint,
                });
            }
            t[(s, a)] = 1.0;
        }
        Ok(Self(t))
    }

    pub fn uniform(n_states: usize, n_joint: usize) -> Self {
        Self(DenseMatrix::from_fn(n_states, n_joint, |_, _| {
            1.0 / n_joint as f64
        }))
    }

    pub fn table(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.0[(s, a)]
    }
}

/// A realised environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub joint_action: usize,
    pub next_state: usize,
    pub local_rewards: Vec<f64>,
    pub global_reward: f64,
}

/// Finite multi-agent discounted MDP with a linear feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    actions: JointActionSpace,
    /// `P(s' | s, a)` at `(s * n_joint + a) * n_states + s'`.
    transition: Vec<f64>,
    /// `r^i(s, a)` at `(i * n_states + s) * n_joint + a`.
    local_rewards: Vec<f64>,
    gamma: f64,
    features: DenseMatrix,
}

impl Mdp {
    pub fn new(
        n_states: usize,
        action_sizes: &[usize],
        transition: Vec<f64>,
        local_rewards: Vec<f64>,
        gamma: f64,
        features: DenseMatrix,
    ) -> Result<Self> {
        let actions = JointActionSpace::new(action_sizes)?;
        let n_joint = actions.len();
        let n_agents = actions.n_agents();
        if n_states == 0 {
            return Err(Error::InvalidInstance("no states".into()));
        }
        if transition.len() != n_states * n_joint * n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_joint * n_states,
                actual: transition.len(),
            });
        }
        if local_rewards.len() != n_agents * n_states * n_joint {
            return Err(Error::DimensionMismatch {
                expected: n_agents * n_states * n_joint,
                actual: local_rewards.len(),
            });
        }
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite())
                || (sum - 1.0).abs() > tol::STOCHASTIC
            {
                return Err(Error::NotStochastic(format!(
                    "transition row (s={}, a={}) sums to {sum}",
                    row_idx / n_joint,
                    row_idx % n_joint
                )));
            }
        }
        if local_rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInstance("non-finite reward".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidInstance(format!(
                "discount must lie in (0, 1), got {gamma}"
            )));
        }
        if features.rows() != n_states {
            return Err(Error::DimensionMismatch {
                expected: n_states,
                actual: features.rows(),
            });
        }
        if features.cols() == 0 || features.rank() < features.cols() {
            return Err(Error::InvalidInstance(
                "feature matrix lacks full column rank".into(),
            ));
        }
        Ok(Self {
            n_states,
            actions,
            transition,
            local_rewards,
            gamma,
            features,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.actions.n_agents()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_joint_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_sizes(&self) -> &[usize] {
        self.actions.sizes()
    }

    pub fn actions(&self) -> &JointActionSpace {
        &self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Replaces the feature matrix (e.g. with a tabular identity).
    pub fn with_features(mut self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: self.n_states,
                actual: features.rows(),
            });
        }
        if features.rank() < features.cols() {
            return Err(Error::InvalidInstance(
                "feature matrix lacks full column rank".into(),
            ));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidInstance(format!(
                "discount must lie in (0, 1), got {gamma}"
            )));
        }
        self.gamma = gamma;
        Ok(self)
    }

    fn check_sa(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                limit: self.n_states,
            });
        }
        if a >= self.actions.len() {
            return Err(Error::IndexOutOfRange {
                what: "joint action",
                index: a,
                limit: self.actions.len(),
            });
        }
        Ok(())
    }

    /// `P(· | s, a)`; indices are assumed valid.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.actions.len() + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn local_reward(&self, agent: usize, s: usize, a: usize) -> f64 {
        self.local_rewards[(agent * self.n_states + s) * self.actions.len() + a]
    }

    pub(crate) fn raw_transition(&self) -> &[f64] {
        &self.transition
    }

    pub(crate) fn raw_rewards(&self) -> &[f64] {
        &self.local_rewards
    }

    /// `r̄(s, a)`: mean of the local rewards.
    pub fn global_reward(&self, s: usize, a: usize) -> Result<f64> {
        self.check_sa(s, a)?;
        Ok(self.global_reward_unchecked(s, a))
    }

    #[inline]
    pub fn global_reward_unchecked(&self, s: usize, a: usize) -> f64 {
        let n = self.n_agents();
        (0..n).map(|i| self.local_reward(i, s, a)).sum::<f64>() / n as f64
    }

    fn check_policy(&self, policy: &JointPolicy) -> Result<()> {
        let t = policy.table();
        if t.rows() != self.n_states || t.cols() != self.actions.len() {
            return Err(Error::InvalidPolicy(format!(
                "policy table is {}x{}, expected {}x{}",
                t.rows(),
                t.cols(),
                self.n_states,
                self.actions.len()
            )));
        }
        Ok(())
    }

    /// `P_π(s, s') = Σ_a π(a|s) P(s'|s, a)`.
    pub fn transition_matrix_under(&self, policy: &JointPolicy) -> Result<DenseMatrix> {
        self.check_policy(policy)?;
        let n = self.n_states;
        let mut p = DenseMatrix::zeros(n, n);
        for s in 0..n {
            for a in 0..self.actions.len() {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let row = self.transition_row(s, a);
                for (out, &pr) in p.row_mut(s).iter_mut().zip(row) {
                    *out += w * pr;
                }
            }
        }
        Ok(p)
    }

    /// `r_π(s) = Σ_a π(a|s) r̄(s, a)`.
    pub fn reward_vector_under(&self, policy: &JointPolicy) -> Result<Vec<f64>> {
        self.check_policy(policy)?;
        Ok((0..self.n_states)
            .map(|s| {
                (0..self.actions.len())
                    .map(|a| policy.prob(s, a) * self.global_reward_unchecked(s, a))
                    .sum()
            })
            .collect())
    }

    /// Samples `s' ~ P(·|s, a)` by inverse CDF over the stored row.
    pub fn sample_step(&self, s: usize, a: usize, rng: &mut SimRng) -> Result<Transition> {
        self.check_sa(s, a)?;
        let next_state = rng.categorical(self.transition_row(s, a));
        let local_rewards: Vec<f64> = (0..self.n_agents())
            .map(|i| self.local_reward(i, s, a))
            .collect();
        let global_reward = local_rewards.iter().sum::<f64>() / local_rewards.len() as f64;
        Ok(Transition {
            state: s,
            joint_action: a,
            next_state,
            local_rewards,
            global_reward,
        })
    }
}
