//! Factored softmax target policies, fixed behaviour policies, score
//! functions and importance ratios.
//!
//! Each agent's target policy is a one-hidden-layer network: sigmoid hidden
//! units, a linear output with one score per local action, and a softmax on
//! top. The flattened parameter vector is laid out as
//! `[hidden_weights (H×D, row-major), hidden_bias (H), output_weights (|A|×H, row-major), output_bias (|A|)]`.

use crate::error::{Error, Result};
use crate::linalg::{tol, DenseMatrix};
use crate::mdp::{JointPolicy, Mdp};
use crate::rng::SimRng;

/// Default hidden width of each agent's policy network.
pub const DEFAULT_HIDDEN_UNITS: usize = 64;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-agent network parameters `θⁱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicyParams {
    input_dim: usize,
    hidden: usize,
    n_actions: usize,
    theta: Vec<f64>,
}

/// Intermediate values of one forward pass, reused by the score computation.
#[derive(Debug, Clone)]
pub struct Forward {
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
    /// Log-softmax, finite even where `probs` underflows to zero.
    pub log_probs: Vec<f64>,
}

impl AgentPolicyParams {
    pub fn param_len(input_dim: usize, hidden: usize, n_actions: usize) -> usize {
        hidden * input_dim + hidden + n_actions * hidden + n_actions
    }

    pub fn zeros(input_dim: usize, hidden: usize, n_actions: usize) -> Self {
        Self {
            input_dim,
            hidden,
            n_actions,
            theta: vec![0.0; Self::param_len(input_dim, hidden, n_actions)],
        }
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn random(
        input_dim: usize,
        hidden: usize,
        n_actions: usize,
        scale: f64,
        rng: &mut SimRng,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden, n_actions);
        for x in p.theta.iter_mut() {
            *x = rng.uniform_in(-scale, scale);
        }
        p
    }

    pub fn from_flat(
        input_dim: usize,
        hidden: usize,
        n_actions: usize,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let len = Self::param_len(input_dim, hidden, n_actions);
        if theta.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "policy parameters",
                agent: None,
            });
        }
        Ok(Self {
            input_dim,
            hidden,
            n_actions,
            theta,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.n_actions * self.hidden;
        (b1, w2, b2)
    }

    /// Adds `c` to every output bias; leaves the distribution unchanged.
    pub fn shift_output_bias(&mut self, c: f64) {
        let (_, _, b2) = self.offsets();
        self.theta[b2..].iter_mut().for_each(|b| *b += c);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let (b1, w2, b2) = self.offsets();
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.theta[j * self.input_dim..(j + 1) * self.input_dim];
                let u = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.theta[b1 + j];
                sigmoid(u)
            })
            .collect();
        let logits: Vec<f64> = (0..self.n_actions)
            .map(|k| {
                let row = &self.theta[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
                row.iter().zip(&hidden).map(|(w, z)| w * z).sum::<f64>() + self.theta[b2 + k]
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|h| (h - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let log_total = total.ln();
        let log_probs = logits.iter().map(|h| h - max - log_total).collect();
        let probs = exps.into_iter().map(|e| e / total).collect();
        Ok(Forward {
            hidden,
            probs,
            log_probs,
        })
    }

    /// `πⁱ(· | x)`
    pub fn action_distribution(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.probs)
    }

    /// `∇_θ log πⁱ(action | x)` given a forward pass at `x`.
    pub fn score_from_forward(&self, x: &[f64], fwd: &Forward, action: usize) -> Vec<f64> {
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![0.0; self.theta.len()];
        // d log π(a) / d logit_k = 1[k = a] − π_k
        let g: Vec<f64> = fwd
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| if k == action { 1.0 - p } else { -p })
            .collect();
        let mut dz = vec![0.0; self.hidden];
        for (k, &gk) in g.iter().enumerate() {
            grad[b2 + k] = gk;
            let wrow = &self.theta[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
            let grow = &mut grad[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
            for j in 0..self.hidden {
                grow[j] = gk * fwd.hidden[j];
                dz[j] += gk * wrow[j];
            }
        }
        for j in 0..self.hidden {
            let z = fwd.hidden[j];
            let du = dz[j] * z * (1.0 - z);
            grad[b1 + j] = du;
            for (m, &xm) in x.iter().enumerate() {
                grad[j * self.input_dim + m] = du * xm;
            }
        }
        grad
    }

    pub fn log_policy_gradient(&self, x: &[f64], action: usize) -> Result<Vec<f64>> {
        if action >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "agent action",
                index: action,
                limit: self.n_actions,
            });
        }
        let fwd = self.forward(x)?;
        Ok(self.score_from_forward(x, &fwd, action))
    }
}

/// How a state is presented to the policy networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyInput {
    /// The critic's feature row `φ(s)`.
    Features,
    /// Indicator vector of the state.
    OneHot,
}

impl std::str::FromStr for PolicyInput {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "features" => Ok(Self::Features),
            "one-hot" => Ok(Self::OneHot),
            other => Err(format!("unknown policy input '{other}'")),
        }
    }
}

impl std::fmt::Display for PolicyInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Features => "features",
            Self::OneHot => "one-hot",
        })
    }
}

/// Precomputed network inputs, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoder {
    inputs: DenseMatrix,
}

impl StateEncoder {
    pub fn new(mdp: &Mdp, kind: PolicyInput) -> Self {
        let inputs = match kind {
            PolicyInput::Features => mdp.features().clone(),
            PolicyInput::OneHot => DenseMatrix::identity(mdp.n_states()),
        };
        Self { inputs }
    }

    pub fn input(&self, s: usize) -> &[f64] {
        self.inputs.row(s)
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn n_states(&self) -> usize {
        self.inputs.rows()
    }
}

/// Joint target policy `π_θ = ∏ᵢ πⁱ_{θⁱ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredPolicy {
    agents: Vec<AgentPolicyParams>,
    encoder: StateEncoder,
}

impl FactoredPolicy {
    pub fn new(agents: Vec<AgentPolicyParams>, encoder: StateEncoder) -> Result<Self> {
        if let Some(bad) = agents.iter().find(|a| a.input_dim != encoder.dim()) {
            return Err(Error::DimensionMismatch {
                expected: encoder.dim(),
                actual: bad.input_dim,
            });
        }
        Ok(Self { agents, encoder })
    }

    pub fn zeros(mdp: &Mdp, hidden: usize, input: PolicyInput) -> Self {
        let encoder = StateEncoder::new(mdp, input);
        let agents = mdp
            .action_sizes()
            .iter()
            .map(|&na| AgentPolicyParams::zeros(encoder.dim(), hidden, na))
            .collect();
        Self { agents, encoder }
    }

    /// Every agent's parameters drawn uniformly from `[-scale, scale]`.
    pub fn random(
        mdp: &Mdp,
        hidden: usize,
        input: PolicyInput,
        scale: f64,
        rng: &mut SimRng,
    ) -> Self {
        let encoder = StateEncoder::new(mdp, input);
        let agents = mdp
            .action_sizes()
            .iter()
            .map(|&na| AgentPolicyParams::random(encoder.dim(), hidden, na, scale, rng))
            .collect();
        Self { agents, encoder }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &AgentPolicyParams {
        &self.agents[i]
    }

    pub fn agent_mut(&mut self, i: usize) -> &mut AgentPolicyParams {
        &mut self.agents[i]
    }

    pub fn agents(&self) -> &[AgentPolicyParams] {
        &self.agents
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn agent_distribution(&self, agent: usize, s: usize) -> Result<Vec<f64>> {
        self.check_state(s)?;
        self.agents[agent].action_distribution(self.encoder.input(s))
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.encoder.n_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                limit: self.encoder.n_states(),
            });
        }
        Ok(())
    }

    /// `π_θ(a | s)` as the product of the per-agent factors.
    pub fn joint_target_probability(&self, s: usize, joint: &[usize]) -> Result<f64> {
        if joint.len() != self.agents.len() {
            return Err(Error::DimensionMismatch {
                expected: self.agents.len(),
                actual: joint.len(),
            });
        }
        let mut p = 1.0;
        for (i, &a) in joint.iter().enumerate() {
            let dist = self.agent_distribution(i, s)?;
            let pa = *dist.get(a).ok_or(Error::IndexOutOfRange {
                what: "agent action",
                index: a,
                limit: dist.len(),
            })?;
            p *= pa;
        }
        Ok(p)
    }

    /// Per-agent distribution tables, indexed `[agent][state][action]`.
    pub fn agent_tables(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        self.agents
            .iter()
            .map(|p| {
                (0..self.encoder.n_states())
                    .map(|s| p.action_distribution(self.encoder.input(s)))
                    .collect()
            })
            .collect()
    }

    /// Full joint table over the instance's joint actions.
    pub fn joint_table(&self, mdp: &Mdp) -> Result<JointPolicy> {
        if mdp.action_sizes().len() != self.agents.len()
            || mdp
                .action_sizes()
                .iter()
                .zip(&self.agents)
                .any(|(&n, a)| n != a.n_actions)
        {
            return Err(Error::InvalidPolicy(
                "policy action sizes differ from the instance".into(),
            ));
        }
        let tables = self.agent_tables()?;
        Ok(product_table(mdp, |i, s, a| tables[i][s][a]))
    }

    /// `ρⁱ = πⁱ(aⁱ|s) / μⁱ(aⁱ|s)`.
    pub fn local_ratio(
        &self,
        behavior: &BehaviorPolicy,
        agent: usize,
        s: usize,
        action: usize,
    ) -> Result<f64> {
        let pi = self.agent_distribution(agent, s)?;
        let mu = behavior.prob(agent, s, action);
        if mu <= 0.0 {
            return Err(Error::ZeroBehaviorProbability {
                agent,
                state: s,
                action,
            });
        }
        Ok(pi[action] / mu)
    }
}

fn product_table(mdp: &Mdp, factor: impl Fn(usize, usize, usize) -> f64) -> JointPolicy {
    let space = mdp.actions();
    let t = DenseMatrix::from_fn(mdp.n_states(), space.len(), |s, a| {
        (0..space.n_agents())
            .map(|i| factor(i, s, space.component(a, i)))
            .product()
    });
    // Products of per-agent distributions are distributions.
    JointPolicy::new(t).expect("product of distributions")
}

/// Fixed per-agent behaviour policies `μⁱ(aⁱ | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPolicy {
    tables: Vec<DenseMatrix>,
}

impl BehaviorPolicy {
    pub fn new(tables: Vec<DenseMatrix>) -> Result<Self> {
        for (i, t) in tables.iter().enumerate() {
            for s in 0..t.rows() {
                let row = t.row(s);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > tol::PROB_SUM {
                    return Err(Error::InvalidPolicy(format!(
                        "behaviour of agent {i} at state {s} sums to {sum}"
                    )));
                }
            }
        }
        Ok(Self { tables })
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        Self {
            tables: mdp
                .action_sizes()
                .iter()
                .map(|&na| DenseMatrix::from_fn(mdp.n_states(), na, |_, _| 1.0 / na as f64))
                .collect(),
        }
    }

    /// Behaviour equal to the current target policy.
    pub fn from_target(policy: &FactoredPolicy) -> Result<Self> {
        let tables = policy.agent_tables()?;
        Self::new(
            tables
                .into_iter()
                .map(|t| DenseMatrix::from_rows(&t))
                .collect::<Result<_>>()?,
        )
    }

    pub fn n_agents(&self) -> usize {
        self.tables.len()
    }

    #[inline]
    pub fn prob(&self, agent: usize, s: usize, a: usize) -> f64 {
        self.tables[agent][(s, a)]
    }

    pub fn row(&self, agent: usize, s: usize) -> &[f64] {
        self.tables[agent].row(s)
    }

    pub fn joint_table(&self, mdp: &Mdp) -> JointPolicy {
        product_table(mdp, |i, s, a| self.tables[i][(s, a)])
    }

    /// Smallest joint behaviour probability `min_{s,a} μ(a|s)`.
    pub fn min_joint_probability(&self) -> f64 {
        let n_states = self.tables.first().map_or(0, |t| t.rows());
        (0..n_states)
            .map(|s| {
                self.tables
                    .iter()
                    .map(|t| t.row(s).iter().cloned().fold(f64::INFINITY, f64::min))
                    .product::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Exploration check: returns the certified `ε = min(min μ, 1/(|S||A|))`.
    pub fn validate_exploration(&self, mdp: &Mdp) -> Result<f64> {
        if self.tables.len() != mdp.n_agents()
            || self
                .tables
                .iter()
                .zip(mdp.action_sizes())
                .any(|(t, &na)| t.rows() != mdp.n_states() || t.cols() != na)
        {
            return Err(Error::config(
                "A5",
                "behaviour tables do not match the instance",
            ));
        }
        let min = self.min_joint_probability();
        if !(min > 0.0) {
            return Err(Error::config(
                "A5",
                "behaviour policy assigns zero probability to some joint action",
            ));
        }
        let cap = 1.0 / (mdp.n_states() * mdp.n_joint_actions()) as f64;
        Ok(min.min(cap))
    }
}
