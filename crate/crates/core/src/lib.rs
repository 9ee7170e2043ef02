//! Networked multi-agent off-policy actor-critic with consensus emphatic
//! TD(λ) critics, together with exact oracles for every stochastic piece:
//! stationary distributions, the projected Bellman fixed point, and the
//! exact off-policy policy gradient.
//!
//! All agents live in one process and the consensus layer is simulated with
//! dense averaging matrices.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actor_critic;
pub mod config;
pub mod consensus;
pub mod error;
pub mod etd;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod oracle;
pub mod policy;
pub mod rng;

pub use actor_critic::{
    multi_agent_step, project, run, single_agent_step, AgentState, LogRecord, RunLog, System,
    CSV_HEADER,
};
pub use config::{AlgorithmConfig, ExperimentConfig, NetworkSource, StepSchedule};
pub use consensus::{Graph, GraphSequence, InnerLoop, WeightMatrix};
pub use error::{Error, Result};
pub use etd::{BellmanModel, EtdConfig, TraceForm, TraceState};
pub use linalg::DenseMatrix;
pub use mdp::{generate_instance, FeatureKind, GenConfig, JointPolicy, Mdp, TransitionKind};
pub use policy::{BehaviorPolicy, FactoredPolicy, PolicyInput};
pub use rng::SimRng;
