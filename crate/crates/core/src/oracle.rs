//! Exact off-policy policy-gradient quantities on small instances.
//!
//! Everything here enumerates joint actions, so it is guarded by
//! [`ENUMERATION_GUARD`]. The objective is `J_μ(θ) = Σ_s d_μ(s) v_θ(s)`, the
//! emphatic vector is `mᵀ = d_μᵀ(I − γP_θ)⁻¹`, and the gradient with respect
//! to agent `i` is `Σ_s m(s) Σ_a π_θ(a|s) q_θ(s,a) ∇ log πⁱ(aⁱ|s)`.

use crate::error::{Error, Result};
use crate::linalg::{
    dot, solve_left, solve_linear, stationary_distribution, DenseMatrix, ProbVector,
};
use crate::mdp::Mdp;
use crate::policy::{BehaviorPolicy, FactoredPolicy};
use crate::rng::SimRng;

/// Largest joint-action count the exact oracles will enumerate.
pub const ENUMERATION_GUARD: usize = 4096;

fn guard(mdp: &Mdp) -> Result<()> {
    if mdp.n_joint_actions() > ENUMERATION_GUARD {
        return Err(Error::InstanceTooLarge {
            size: mdp.n_joint_actions(),
            limit: ENUMERATION_GUARD,
        });
    }
    Ok(())
}

/// `v_θ` per state and `q_θ` per (state, joint action).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub v: Vec<f64>,
    /// `|S| × |A|`
    pub q: DenseMatrix,
}

/// Stationary distribution of the behaviour chain.
pub fn behavior_distribution(mdp: &Mdp, behavior: &BehaviorPolicy) -> Result<ProbVector> {
    guard(mdp)?;
    stationary_distribution(&mdp.transition_matrix_under(&behavior.joint_table(mdp))?)
}

pub fn exact_values(mdp: &Mdp, policy: &FactoredPolicy) -> Result<ValueTables> {
    guard(mdp)?;
    let n = mdp.n_states();
    let pi = policy.joint_table(mdp)?;
    let p = mdp.transition_matrix_under(&pi)?;
    let r = mdp.reward_vector_under(&pi)?;
    let a = DenseMatrix::identity(n).sub(&p.scale(mdp.gamma()))?;
    let v = solve_linear(&a, &r)?;
    let q = DenseMatrix::from_fn(n, mdp.n_joint_actions(), |s, a| {
        mdp.global_reward_unchecked(s, a) + mdp.gamma() * dot(mdp.transition_row(s, a), &v)
    });
    Ok(ValueTables { v, q })
}

/// `J_μ(θ)` given a precomputed behaviour distribution.
pub fn objective_with(mdp: &Mdp, policy: &FactoredPolicy, d_mu: &[f64]) -> Result<f64> {
    Ok(dot(d_mu, &exact_values(mdp, policy)?.v))
}

pub fn objective(mdp: &Mdp, policy: &FactoredPolicy, behavior: &BehaviorPolicy) -> Result<f64> {
    let d_mu = behavior_distribution(mdp, behavior)?;
    objective_with(mdp, policy, &d_mu)
}

/// Emphatic weighting `m` with the residual of its defining system.
#[derive(Debug, Clone, PartialEq)]
pub struct EmphaticVector {
    pub m: Vec<f64>,
    /// Whether some entry came out negative (reported, not an error).
    pub has_negative: bool,
}

impl EmphaticVector {
    /// `‖mᵀ(I − γP_θ) − d_μᵀ‖∞`
    pub fn residual(&self, mdp: &Mdp, policy: &FactoredPolicy, d_mu: &[f64]) -> Result<f64> {
        let p = mdp.transition_matrix_under(&policy.joint_table(mdp)?)?;
        let a = DenseMatrix::identity(mdp.n_states()).sub(&p.scale(mdp.gamma()))?;
        let lhs = a.vec_mul(&self.m)?;
        Ok(lhs
            .iter()
            .zip(d_mu)
            .map(|(x, d)| (x - d).abs())
            .fold(0.0, f64::max))
    }
}

pub fn emphatic_vector_with(
    mdp: &Mdp,
    policy: &FactoredPolicy,
    d_mu: &[f64],
) -> Result<EmphaticVector> {
    guard(mdp)?;
    let p = mdp.transition_matrix_under(&policy.joint_table(mdp)?)?;
    let a = DenseMatrix::identity(mdp.n_states()).sub(&p.scale(mdp.gamma()))?;
    let m = solve_left(&a, d_mu)?;
    let has_negative = m.iter().any(|&x| x < 0.0);
    Ok(EmphaticVector { m, has_negative })
}

pub fn emphatic_vector(
    mdp: &Mdp,
    policy: &FactoredPolicy,
    behavior: &BehaviorPolicy,
) -> Result<EmphaticVector> {
    let d_mu = behavior_distribution(mdp, behavior)?;
    emphatic_vector_with(mdp, policy, &d_mu)
}

/// Exact `∇_{θⁱ} J_μ(θ)`.
pub fn exact_gradient(
    mdp: &Mdp,
    policy: &FactoredPolicy,
    behavior: &BehaviorPolicy,
    agent: usize,
) -> Result<Vec<f64>> {
    guard(mdp)?;
    check_agent(policy, agent)?;
    let d_mu = behavior_distribution(mdp, behavior)?;
    let m = emphatic_vector_with(mdp, policy, &d_mu)?.m;
    let values = exact_values(mdp, policy)?;
    let pi = policy.joint_table(mdp)?;
    let space = mdp.actions();
    let params = policy.agent(agent);
    let mut grad = vec![0.0; params.flat().len()];
    for (s, &m_s) in m.iter().enumerate() {
        let x = policy.encoder().input(s);
        let fwd = params.forward(x)?;
        // Σ_a π(a|s) q(s,a) ψ(aⁱ) grouped by the agent's own action.
        let mut weight = vec![0.0; params.n_actions()];
        for a in 0..space.len() {
            weight[space.component(a, agent)] += pi.prob(s, a) * values.q[(s, a)];
        }
        for (ai, &w) in weight.iter().enumerate() {
            let coef = m_s * w;
            if coef == 0.0 {
                continue;
            }
            let score = params.score_from_forward(x, &fwd, ai);
            for (g, sc) in grad.iter_mut().zip(score) {
                *g += coef * sc;
            }
        }
    }
    Ok(grad)
}

fn check_agent(policy: &FactoredPolicy, agent: usize) -> Result<()> {
    if agent >= policy.n_agents() {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: agent,
            limit: policy.n_agents(),
        });
    }
    Ok(())
}

/// Central finite differences of [`objective`] over agent `agent`'s
/// parameters with step `h`.
pub fn finite_difference_gradient(
    mdp: &Mdp,
    policy: &FactoredPolicy,
    behavior: &BehaviorPolicy,
    agent: usize,
    h: f64,
) -> Result<Vec<f64>> {
    check_agent(policy, agent)?;
    let d_mu = behavior_distribution(mdp, behavior)?;
    let mut probe = policy.clone();
    let len = policy.agent(agent).flat().len();
    let mut grad = Vec::with_capacity(len);
    for k in 0..len {
        let base = policy.agent(agent).flat()[k];
        probe.agent_mut(agent).flat_mut()[k] = base + h;
        let up = objective_with(mdp, &probe, &d_mu)?;
        probe.agent_mut(agent).flat_mut()[k] = base - h;
        let down = objective_with(mdp, &probe, &d_mu)?;
        probe.agent_mut(agent).flat_mut()[k] = base;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Monte Carlo estimate with a batch-means standard error per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct McGradient {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub horizon: usize,
    pub batches: usize,
}

impl McGradient {
    /// Largest `|mean − reference| / std_err` over coordinates with nonzero error.
    pub fn max_z_score(&self, reference: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.std_err)
            .zip(reference)
            .map(|((m, se), r)| {
                if *se > 0.0 {
                    (m - r).abs() / se
                } else if m == r {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Time average of `ρ_t M^θ_t δ_t ψⁱ_t` along one behaviour trajectory started
/// from `d_μ`, where `δ_t = r̄_{t+1} + γ v_θ(s_{t+1}) − v_θ(s_t)` uses exact
/// values. `M^θ_t = 1 + λ^θ γ ρ_{t−1} F_{t−1}`, and the estimator targets the
/// exact gradient when `lambda_actor = 1`.
#[allow(clippy::too_many_arguments)]
pub fn sampled_gradient_mc(
    mdp: &Mdp,
    policy: &FactoredPolicy,
    behavior: &BehaviorPolicy,
    agent: usize,
    horizon: usize,
    lambda_actor: f64,
    batches: usize,
    rng: &mut SimRng,
) -> Result<McGradient> {
    guard(mdp)?;
    check_agent(policy, agent)?;
    if batches < 2 || horizon < batches {
        return Err(Error::config(
            "mc",
            format!("horizon {horizon} cannot be split into {batches} batches"),
        ));
    }
    let d_mu = behavior_distribution(mdp, behavior)?;
    let values = exact_values(mdp, policy)?;
    let pi = policy.joint_table(mdp)?;
    let space = mdp.actions();
    let gamma = mdp.gamma();
    let params = policy.agent(agent);
    let dim = params.flat().len();

    // Scores per (state, own action) are reused throughout the trajectory.
    let mut scores = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        let x = policy.encoder().input(s);
        let fwd = params.forward(x)?;
        scores.push(
            (0..params.n_actions())
                .map(|a| params.score_from_forward(x, &fwd, a))
                .collect::<Vec<_>>(),
        );
    }

    let batch_len = horizon / batches;
    let used = batch_len * batches;
    let mut batch_means = vec![vec![0.0; dim]; batches];
    let mut s = rng.categorical(&d_mu);
    let mut f = 0.0;
    let mut rho_prev = 1.0;
    let mut joint = vec![0usize; space.n_agents()];
    for t in 0..used {
        let mut mu_prob = 1.0;
        for (i, a) in joint.iter_mut().enumerate() {
            *a = rng.categorical(behavior.row(i, s));
            mu_prob *= behavior.prob(i, s, *a);
        }
        let a = space.encode_slice(&joint);
        let next = rng.categorical(mdp.transition_row(s, a));
        let rho = pi.prob(s, a) / mu_prob;
        let carried = gamma * rho_prev * f;
        let m_actor = 1.0 + lambda_actor * carried;
        f = carried + 1.0;
        let delta = mdp.global_reward_unchecked(s, a) + gamma * values.v[next] - values.v[s];
        let coef = rho * m_actor * delta;
        if !coef.is_finite() {
            return Err(Error::NonFinite {
                what: "gradient sample",
                agent: Some(agent),
            });
        }
        let acc = &mut batch_means[t / batch_len];
        for (x, sc) in acc.iter_mut().zip(&scores[s][joint[agent]]) {
            *x += coef * sc;
        }
        rho_prev = rho;
        s = next;
    }
    for b in batch_means.iter_mut() {
        b.iter_mut().for_each(|x| *x /= batch_len as f64);
    }
    let nb = batches as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|k| batch_means.iter().map(|b| b[k]).sum::<f64>() / nb)
        .collect();
    let std_err = (0..dim)
        .map(|k| {
            let var = batch_means
                .iter()
                .map(|b| (b[k] - mean[k]).powi(2))
                .sum::<f64>()
                / (nb - 1.0);
            (var / nb).sqrt()
        })
        .collect();
    Ok(McGradient {
        mean,
        std_err,
        horizon: used,
        batches,
    })
}
