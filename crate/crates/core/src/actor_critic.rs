//! Two-timescale off-policy actor-critic, single-agent and networked.
//!
//! Each outer step of the networked loop runs, for every agent in order:
//! consensus on the critic weights broadcast at the previous step, a local
//! action draw from the behaviour policy, the local importance ratio, the
//! global ratio estimate, then the emphatic critic and actor updates. The
//! environment is stepped once per outer iteration and shared by all agents.

use std::fmt::Write as _;

use crate::config::{AlgorithmConfig, ExperimentConfig, NetworkSource};
use crate::consensus::{
    consensus_average, disagreement_norm, global_ratio_from_logs, mean_vector,
    validate_assumption_a2, A2Report, Graph, GraphSequence, WeightMatrix,
};
use crate::error::{Error, Result};
use crate::etd::{bellman_model, update_emphasis, update_trace, EtdConfig, TraceState};
use crate::linalg::{dot, norm2, norm_inf};
use crate::mdp::format::fmt_f64;
use crate::mdp::{generate_instance, read_instance, Mdp};
use crate::oracle::{behavior_distribution, objective_with, ENUMERATION_GUARD};
use crate::policy::{AgentPolicyParams, BehaviorPolicy, FactoredPolicy, Forward, StateEncoder};
use crate::rng::SimRng;

/// Componentwise clamp into `[-radius, radius]`.
pub fn project(theta: &[f64], radius: f64) -> Vec<f64> {
    theta.iter().map(|x| x.clamp(-radius, radius)).collect()
}

/// Everything one agent carries between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Critic weights after consensus, used during the current step.
    pub omega: Vec<f64>,
    /// Critic weights after the local update, broadcast to neighbours.
    pub omega_tilde: Vec<f64>,
    pub theta: AgentPolicyParams,
    pub trace: TraceState,
}

/// All agents plus the shared environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub agents: Vec<AgentState>,
    pub encoder: StateEncoder,
    pub state: usize,
    pub t: u64,
}

impl System {
    /// Zero critic weights, empty traces, the given policy parameters.
    pub fn new(mdp: &Mdp, policy: &FactoredPolicy, initial_state: usize) -> Result<Self> {
        if policy.n_agents() != mdp.n_agents() {
            return Err(Error::DimensionMismatch {
                expected: mdp.n_agents(),
                actual: policy.n_agents(),
            });
        }
        if initial_state >= mdp.n_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: initial_state,
                limit: mdp.n_states(),
            });
        }
        let k = mdp.n_features();
        let agents = policy
            .agents()
            .iter()
            .map(|theta| AgentState {
                omega: vec![0.0; k],
                omega_tilde: vec![0.0; k],
                theta: theta.clone(),
                trace: TraceState::new(k),
            })
            .collect();
        Ok(Self {
            agents,
            encoder: policy.encoder().clone(),
            state: initial_state,
            t: 0,
        })
    }

    pub fn policy(&self) -> FactoredPolicy {
        FactoredPolicy::new(
            self.agents.iter().map(|a| a.theta.clone()).collect(),
            self.encoder.clone(),
        )
        .expect("agents share the encoder")
    }

    /// Disagreement of the post-consensus critic weights.
    pub fn disagreement(&self) -> f64 {
        let w: Vec<Vec<f64>> = self.agents.iter().map(|a| a.omega.clone()).collect();
        disagreement_norm(&w).expect("equal lengths")
    }

    /// Cross-agent mean of the latest local critic estimates.
    pub fn mean_omega(&self) -> Vec<f64> {
        let w: Vec<Vec<f64>> = self.agents.iter().map(|a| a.omega_tilde.clone()).collect();
        mean_vector(&w)
    }
}

struct LocalStep<'a> {
    x: &'a [f64],
    action: usize,
    phi: &'a [f64],
    phi_next: &'a [f64],
    reward: f64,
    rho: f64,
    gamma: f64,
    beta_omega: f64,
    beta_theta: f64,
}

fn agent_update(
    agent: &mut AgentState,
    index: usize,
    step: &LocalStep<'_>,
    fwd: &Forward,
    config: &AlgorithmConfig,
) -> Result<()> {
    let emph = update_emphasis(
        &agent.trace,
        step.gamma,
        config.lambda,
        1.0,
        config.lambda_actor,
    );
    let e = update_trace(
        &agent.trace,
        emph.m,
        step.phi,
        step.gamma,
        config.lambda,
        config.trace_form,
    )?;
    let delta =
        step.reward + step.gamma * dot(step.phi_next, &agent.omega) - dot(step.phi, &agent.omega);
    let critic_scale = step.beta_omega * step.rho * delta;
    agent.omega_tilde = agent
        .omega
        .iter()
        .zip(&e)
        .map(|(w, ei)| w + critic_scale * ei)
        .collect();
    if step.beta_theta != 0.0 {
        let score = agent.theta.score_from_forward(step.x, fwd, step.action);
        let actor_scale = step.beta_theta * step.rho * emph.m_actor * delta;
        let radius = config.box_radius;
        for (p, g) in agent.theta.flat_mut().iter_mut().zip(score) {
            *p += actor_scale * g;
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    what: "actor parameters",
                    agent: Some(index),
                });
            }
            *p = p.clamp(-radius, radius);
        }
    }
    if !emph.f.is_finite() || agent.omega_tilde.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "critic parameters",
            agent: Some(index),
        });
    }
    agent.trace = TraceState {
        e,
        f: emph.f,
        rho_prev: step.rho,
        t: agent.trace.t + 1,
    };
    Ok(())
}

fn step_sizes(t: u64, config: &AlgorithmConfig) -> (f64, f64) {
    let bw = config.schedule.beta_omega(t);
    let bt = if config.freeze_actor {
        0.0
    } else {
        config.schedule.beta_theta(t)
    };
    (bw, bt)
}

/// One step of the single-agent algorithm.
pub fn single_agent_step(
    sys: &mut System,
    mdp: &Mdp,
    behavior: &BehaviorPolicy,
    config: &AlgorithmConfig,
    rng: &mut SimRng,
) -> Result<()> {
    if sys.agents.len() != 1 || mdp.n_agents() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: sys.agents.len(),
        });
    }
    let s = sys.state;
    let agent = &mut sys.agents[0];
    agent.omega.clone_from(&agent.omega_tilde);
    let action = rng.categorical(behavior.row(0, s));
    let tr = mdp.sample_step(s, action, rng)?;
    let x = sys.encoder.input(s);
    let fwd = agent.theta.forward(x)?;
    let mu = behavior.prob(0, s, action);
    if mu <= 0.0 {
        return Err(Error::ZeroBehaviorProbability {
            agent: 0,
            state: s,
            action,
        });
    }
    let rho = (fwd.log_probs[action] - mu.ln()).exp();
    let (beta_omega, beta_theta) = step_sizes(sys.t, config);
    let step = LocalStep {
        x,
        action,
        phi: mdp.features().row(s),
        phi_next: mdp.features().row(tr.next_state),
        reward: tr.global_reward,
        rho,
        gamma: mdp.gamma(),
        beta_omega,
        beta_theta,
    };
    agent_update(agent, 0, &step, &fwd, config)?;
    sys.state = tr.next_state;
    sys.t += 1;
    Ok(())
}

/// One outer step of the networked algorithm.
///
/// `consensus` holds the weights of the previous step and is `None` on the
/// first step, when there is nothing to average yet. `inner` drives the
/// ratio reconstruction for this step.
pub fn multi_agent_step(
    sys: &mut System,
    mdp: &Mdp,
    behavior: &BehaviorPolicy,
    consensus: Option<&WeightMatrix>,
    inner: &WeightMatrix,
    config: &AlgorithmConfig,
    rng: &mut SimRng,
) -> Result<()> {
    let n = sys.agents.len();
    if n != mdp.n_agents() || inner.n() != n {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_agents(),
            actual: if n != mdp.n_agents() { n } else { inner.n() },
        });
    }
    if let Some(w) = consensus {
        let tilde: Vec<Vec<f64>> = sys.agents.iter().map(|a| a.omega_tilde.clone()).collect();
        for (agent, omega) in sys.agents.iter_mut().zip(consensus_average(&tilde, w)?) {
            agent.omega = omega;
        }
    } else {
        for agent in sys.agents.iter_mut() {
            agent.omega.clone_from(&agent.omega_tilde);
        }
    }

    let s = sys.state;
    let actions: Vec<usize> = (0..n)
        .map(|i| rng.categorical(behavior.row(i, s)))
        .collect();
    let joint = mdp.actions().encode_slice(&actions);
    let tr = mdp.sample_step(s, joint, rng)?;

    let x = sys.encoder.input(s);
    let mut forwards = Vec::with_capacity(n);
    let mut local = Vec::with_capacity(n);
    for (i, agent) in sys.agents.iter().enumerate() {
        let fwd = agent.theta.forward(x)?;
        let mu = behavior.prob(i, s, actions[i]);
        if mu <= 0.0 {
            return Err(Error::ZeroBehaviorProbability {
                agent: i,
                state: s,
                action: actions[i],
            });
        }
        local.push(fwd.log_probs[actions[i]] - mu.ln());
        forwards.push(fwd);
    }
    let rho = global_ratio_from_logs(&local, config.inner_loop, inner)?;
    let (beta_omega, beta_theta) = step_sizes(sys.t, config);
    for (i, agent) in sys.agents.iter_mut().enumerate() {
        let step = LocalStep {
            x,
            action: actions[i],
            phi: mdp.features().row(s),
            phi_next: mdp.features().row(tr.next_state),
            reward: tr.local_rewards[i],
            rho: rho[i],
            gamma: mdp.gamma(),
            beta_omega,
            beta_theta,
        };
        agent_update(agent, i, &step, &forwards[i], config)?;
    }
    sys.state = tr.next_state;
    sys.t += 1;
    Ok(())
}

/// One logged row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub step: u64,
    /// Exact objective, present on oracle steps.
    pub j_mu: Option<f64>,
    pub disagreement: f64,
    /// `‖⟨ω⟩ − ω*_θ‖₂`, present on oracle steps.
    pub omega_err: Option<f64>,
    /// Agent 0's latest global ratio estimate.
    pub rho_t: f64,
    /// Agent 0's follow-on trace.
    pub f_t: f64,
    /// Largest `‖eⁱ‖∞` over agents.
    pub e_inf_norm: f64,
    /// Whether `C` failed the negative-definiteness check, on oracle steps.
    pub nd_flag: Option<bool>,
}

pub const CSV_HEADER: &str = "step,J_mu,disagreement,omega_err,rho_t,F_t,e_inf_norm,nd_flag";

impl LogRecord {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            opt(self.j_mu),
            fmt_f64(self.disagreement),
            opt(self.omega_err),
            fmt_f64(self.rho_t),
            fmt_f64(self.f_t),
            fmt_f64(self.e_inf_norm),
            self.nd_flag
                .map(|b| if b { "1" } else { "0" })
                .unwrap_or("")
        )
    }
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
    pub final_state: System,
    pub checkpoint: String,
    pub a2: A2Report,
    /// Exploration constant certified for the behaviour policy.
    pub epsilon: f64,
    /// `ω*` at the final parameters, when the oracle is available.
    pub final_omega_star: Option<Vec<f64>>,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.j_mu)
    }
}

/// Plain-text checkpoint: dimensions, every agent's parameters and traces,
/// and the trajectory stream position.
pub fn checkpoint_text(sys: &System, rng: &SimRng) -> String {
    let mut out = String::new();
    let k = sys.agents.first().map_or(0, |a| a.omega.len());
    let plen = sys.agents.first().map_or(0, |a| a.theta.flat().len());
    writeln!(
        out,
        "emarl-checkpoint v1 n_agents={} n_features={k} param_len={plen} step={} state={}",
        sys.agents.len(),
        sys.t,
        sys.state
    )
    .unwrap();
    writeln!(out, "rng {}", rng.state_label()).unwrap();
    let row = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
    for (i, a) in sys.agents.iter().enumerate() {
        writeln!(out, "agent {i}").unwrap();
        writeln!(out, "theta {}", row(a.theta.flat())).unwrap();
        writeln!(out, "omega {}", row(&a.omega)).unwrap();
        writeln!(out, "omega_tilde {}", row(&a.omega_tilde)).unwrap();
        writeln!(out, "e {}", row(&a.trace.e)).unwrap();
        writeln!(
            out,
            "scalars f={} rho_prev={} t={}",
            fmt_f64(a.trace.f),
            fmt_f64(a.trace.rho_prev),
            a.trace.t
        )
        .unwrap();
    }
    out.push_str("END\n");
    out
}

/// The instance a config describes.
pub fn build_instance(config: &ExperimentConfig) -> Result<Mdp> {
    match &config.instance_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            read_instance(&text)
        }
        None => generate_instance(&config.instance, config.instance_seed()),
    }
}

/// The communication graphs a config describes, for `n` agents.
pub fn build_network(config: &ExperimentConfig, n: usize) -> Result<GraphSequence> {
    Ok(match &config.network {
        NetworkSource::Complete => GraphSequence::fixed(Graph::complete(n)),
        NetworkSource::Ring => GraphSequence::fixed(Graph::ring(n)),
        NetworkSource::Path => GraphSequence::fixed(Graph::path(n)),
        NetworkSource::Random { edge_prob } => {
            let mut rng = SimRng::new(config.seed, "network-graph");
            GraphSequence::fixed(Graph::random_connected(n, *edge_prob, &mut rng))
        }
        NetworkSource::RandomPool {
            pool_size,
            edge_prob,
        } => GraphSequence::random_pool(n, *pool_size, *edge_prob, config.seed),
        NetworkSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let g = Graph::from_edge_list(&text)?;
            if g.n_nodes() != n {
                return Err(Error::config(
                    "A2",
                    format!(
                        "graph has {} nodes but the instance has {n} agents",
                        g.n_nodes()
                    ),
                ));
            }
            GraphSequence::fixed(g)
        }
    })
}

struct Oracle {
    d_mu: Vec<f64>,
    behavior_joint: crate::mdp::JointPolicy,
    etd: EtdConfig,
}

/// `(J_μ, ‖⟨ω⟩ − ω*‖, not-negative-definite flag, ω*)`
type Evaluation = (f64, Option<f64>, bool, Option<Vec<f64>>);

impl Oracle {
    fn evaluate(&self, mdp: &Mdp, sys: &System) -> Result<Evaluation> {
        let policy = sys.policy();
        let j = objective_with(mdp, &policy, &self.d_mu)?;
        let target = policy.joint_table(mdp)?;
        match bellman_model(
            mdp,
            &target,
            &self.behavior_joint,
            &self.etd,
            mdp.features(),
        ) {
            Ok(bm) => {
                let mean = sys.mean_omega();
                let diff: Vec<f64> = mean
                    .iter()
                    .zip(&bm.omega_star)
                    .map(|(a, b)| a - b)
                    .collect();
                Ok((
                    j,
                    Some(norm2(&diff)),
                    bm.not_negative_definite,
                    Some(bm.omega_star),
                ))
            }
            Err(Error::SingularC) => Ok((j, None, true, None)),
            Err(e) => Err(e),
        }
    }
}

fn record(
    sys: &System,
    oracle: Option<&Oracle>,
    mdp: &Mdp,
    with_oracle: bool,
) -> Result<(LogRecord, Option<Vec<f64>>)> {
    let a0 = &sys.agents[0];
    let mut rec = LogRecord {
        step: sys.t,
        j_mu: None,
        disagreement: sys.disagreement(),
        omega_err: None,
        rho_t: a0.trace.rho_prev,
        f_t: a0.trace.f,
        e_inf_norm: sys
            .agents
            .iter()
            .map(|a| norm_inf(&a.trace.e))
            .fold(0.0, f64::max),
        nd_flag: None,
    };
    let mut star = None;
    if let (Some(o), true) = (oracle, with_oracle) {
        let (j, err, nd, w) = o.evaluate(mdp, sys)?;
        rec.j_mu = Some(j);
        rec.omega_err = err;
        rec.nd_flag = Some(nd);
        star = w;
    }
    Ok((rec, star))
}

/// Runs a full experiment. Deterministic in the config.
pub fn run(config: &ExperimentConfig) -> Result<RunLog> {
    config.validate()?;
    let mdp = build_instance(config)?;
    let behavior = BehaviorPolicy::uniform(&mdp);
    let epsilon = behavior.validate_exploration(&mdp)?;
    let mut network = build_network(config, mdp.n_agents())?;
    let a2 = validate_assumption_a2(&network.support())?;
    if let Some(item) = a2.violation() {
        return Err(Error::config(
            item,
            format!(
                "weight matrices fail the consensus conditions (rho = {:.6})",
                a2.rho
            ),
        ));
    }

    let mut init_rng = SimRng::new(config.seed, "init");
    let policy = FactoredPolicy::random(
        &mdp,
        config.policy.hidden,
        config.policy.input,
        config.policy.init_scale,
        &mut init_rng,
    );
    let mut rng = SimRng::new(config.seed, "trajectory");
    let s0 = rng.below(mdp.n_states());
    let mut sys = System::new(&mdp, &policy, s0)?;

    let oracle = if config.oracle.enabled && mdp.n_joint_actions() <= ENUMERATION_GUARD {
        Some(Oracle {
            d_mu: behavior_distribution(&mdp, &behavior)?.into_vec(),
            behavior_joint: behavior.joint_table(&mdp),
            etd: EtdConfig::constant(mdp.gamma(), config.algorithm.lambda)
                .with_trace_form(config.algorithm.trace_form),
        })
    } else {
        None
    };

    let mut records = Vec::with_capacity((config.steps / config.log_every) as usize + 1);
    let (rec, mut final_omega_star) = record(&sys, oracle.as_ref(), &mdp, true)?;
    records.push(rec);

    let mut previous: Option<WeightMatrix> = None;
    for t in 0..config.steps {
        let weights = network.weights_at(t).clone();
        multi_agent_step(
            &mut sys,
            &mdp,
            &behavior,
            previous.as_ref(),
            &weights,
            &config.algorithm,
            &mut rng,
        )?;
        previous = Some(weights);
        let step = t + 1;
        if step % config.log_every == 0 {
            let with_oracle = step % config.oracle.every == 0 || step == config.steps;
            let (rec, star) = record(&sys, oracle.as_ref(), &mdp, with_oracle)?;
            records.push(rec);
            if star.is_some() {
                final_omega_star = star;
            }
        }
    }
    let checkpoint = checkpoint_text(&sys, &rng);
    Ok(RunLog {
        records,
        final_state: sys,
        checkpoint,
        a2,
        epsilon,
        final_omega_star,
    })
}
