//! Experiment configuration: a flat `key = value` text format with dotted
//! section prefixes (`instance.n_states = 20`). `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::consensus::InnerLoop;
use crate::error::{Error, Result};
use crate::etd::TraceForm;
use crate::mdp::{FeatureKind, GenConfig, TransitionKind};
use crate::policy::{PolicyInput, DEFAULT_HIDDEN_UNITS};

/// Power-law step sizes `c_ω/(t+1)^{p_ω}` and `c_θ/(t+1)^{p_θ}`, `t` zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub c_omega: f64,
    pub p_omega: f64,
    pub c_theta: f64,
    pub p_theta: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            c_omega: 1.0,
            p_omega: 0.6,
            c_theta: 1.0,
            p_theta: 0.85,
        }
    }
}

impl StepSchedule {
    /// Both sums diverge, both squared sums converge, and the actor runs on
    /// the slower timescale.
    pub fn validate(&self) -> Result<()> {
        let in_range = |p: f64| p > 0.5 && p <= 1.0;
        if !(self.c_omega > 0.0 && self.c_theta > 0.0) {
            return Err(Error::config(
                "A4",
                "step-size coefficients must be positive",
            ));
        }
        if !in_range(self.p_omega) || !in_range(self.p_theta) {
            return Err(Error::config(
                "A4",
                format!(
                    "exponents must lie in (0.5, 1], got p_omega={} p_theta={}",
                    self.p_omega, self.p_theta
                ),
            ));
        }
        if self.p_theta <= self.p_omega {
            return Err(Error::config(
                "A4",
                format!(
                    "actor exponent {} must exceed critic exponent {}",
                    self.p_theta, self.p_omega
                ),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn beta_omega(&self, t: u64) -> f64 {
        self.c_omega / (t as f64 + 1.0).powf(self.p_omega)
    }

    #[inline]
    pub fn beta_theta(&self, t: u64) -> f64 {
        self.c_theta / (t as f64 + 1.0).powf(self.p_theta)
    }
}

/// Per-step algorithm constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub lambda: f64,
    pub lambda_actor: f64,
    pub trace_form: TraceForm,
    pub inner_loop: InnerLoop,
    pub box_radius: f64,
    pub schedule: StepSchedule,
    /// Critic-only runs: the actor step size is forced to zero.
    pub freeze_actor: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            lambda_actor: 0.9,
            trace_form: TraceForm::SuttonYu,
            inner_loop: InnerLoop::Exact,
            box_radius: 1e6,
            schedule: StepSchedule::default(),
            freeze_actor: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.lambda_actor) {
            return Err(Error::config(
                "algorithm",
                "lambda values must lie in [0, 1]",
            ));
        }
        if !(self.box_radius > 0.0) {
            return Err(Error::config("A1", "box radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub input: PolicyInput,
    /// Initial parameters are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN_UNITS,
            input: PolicyInput::Features,
            init_scale: 0.1,
        }
    }
}

/// Where the communication graphs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Complete,
    Ring,
    Path,
    /// One random connected graph, fixed for the whole run.
    Random {
        edge_prob: f64,
    },
    /// A fresh draw from a pool of random connected graphs at every step.
    RandomPool {
        pool_size: usize,
        edge_prob: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub enabled: bool,
    /// Oracle metrics are recomputed on logged steps that are multiples of this.
    pub every: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            every: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub instance: GenConfig,
    /// Overrides `seed` for instance generation only.
    pub instance_seed: Option<u64>,
    /// Load the instance from a file instead of generating it.
    pub instance_file: Option<PathBuf>,
    pub policy: PolicyConfig,
    pub algorithm: AlgorithmConfig,
    pub steps: u64,
    pub log_every: u64,
    pub network: NetworkSource,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instance: GenConfig::default(),
            instance_seed: None,
            instance_file: None,
            policy: PolicyConfig::default(),
            algorithm: AlgorithmConfig::default(),
            steps: 100_000,
            log_every: 100,
            network: NetworkSource::Random { edge_prob: 0.3 },
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::parse(
            line,
            format!("invalid boolean '{value}' for '{key}'"),
        )),
    }
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut network_kind: Option<String> = None;
        let mut network_file: Option<PathBuf> = None;
        let mut pool_size = 8usize;
        let mut edge_prob: Option<f64> = None;
        let mut inner_mode: Option<String> = None;
        let mut inner_steps: Option<usize> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    Error::parse(line_no, format!("expected 'key = value', found '{line}'"))
                })?;
            let l = line_no;
            match key {
                "seed" => cfg.seed = parse_value(key, value, l)?,
                "instance.n_agents" => cfg.instance.n_agents = parse_value(key, value, l)?,
                "instance.n_states" => cfg.instance.n_states = parse_value(key, value, l)?,
                "instance.n_actions" => cfg.instance.n_actions = parse_value(key, value, l)?,
                "instance.n_features" => cfg.instance.n_features = parse_value(key, value, l)?,
                "instance.reward_min" => cfg.instance.reward_min = parse_value(key, value, l)?,
                "instance.reward_max" => cfg.instance.reward_max = parse_value(key, value, l)?,
                "instance.gamma" => cfg.instance.gamma = parse_value(key, value, l)?,
                "instance.transitions" => {
                    cfg.instance.transitions = value
                        .parse::<TransitionKind>()
                        .map_err(|e| Error::parse(l, e))?
                }
                "instance.features" => {
                    cfg.instance.features = value
                        .parse::<FeatureKind>()
                        .map_err(|e| Error::parse(l, e))?
                }
                "instance.seed" => cfg.instance_seed = Some(parse_value(key, value, l)?),
                "instance.file" => cfg.instance_file = Some(PathBuf::from(value)),
                "policy.hidden" => cfg.policy.hidden = parse_value(key, value, l)?,
                "policy.input" => {
                    cfg.policy.input = value
                        .parse::<PolicyInput>()
                        .map_err(|e| Error::parse(l, e))?
                }
                "policy.init_scale" => cfg.policy.init_scale = parse_value(key, value, l)?,
                "algorithm.lambda" => cfg.algorithm.lambda = parse_value(key, value, l)?,
                "algorithm.lambda_actor" => {
                    cfg.algorithm.lambda_actor = parse_value(key, value, l)?
                }
                "algorithm.trace_form" => {
                    cfg.algorithm.trace_form =
                        value.parse::<TraceForm>().map_err(|e| Error::parse(l, e))?
                }
                "algorithm.inner_loop" => inner_mode = Some(value.to_string()),
                "algorithm.inner_steps" => inner_steps = Some(parse_value(key, value, l)?),
                "algorithm.box_radius" => cfg.algorithm.box_radius = parse_value(key, value, l)?,
                "algorithm.beta_omega.c" => {
                    cfg.algorithm.schedule.c_omega = parse_value(key, value, l)?
                }
                "algorithm.beta_omega.p" => {
                    cfg.algorithm.schedule.p_omega = parse_value(key, value, l)?
                }
                "algorithm.beta_theta.c" => {
                    cfg.algorithm.schedule.c_theta = parse_value(key, value, l)?
                }
                "algorithm.beta_theta.p" => {
                    cfg.algorithm.schedule.p_theta = parse_value(key, value, l)?
                }
                "algorithm.freeze_actor" => cfg.algorithm.freeze_actor = parse_bool(key, value, l)?,
                "algorithm.steps" => cfg.steps = parse_value(key, value, l)?,
                "algorithm.log_every" => cfg.log_every = parse_value(key, value, l)?,
                "network.source" => network_kind = Some(value.to_string()),
                "network.file" => network_file = Some(PathBuf::from(value)),
                "network.pool_size" => pool_size = parse_value(key, value, l)?,
                "network.edge_prob" => edge_prob = Some(parse_value(key, value, l)?),
                "oracle.enabled" => cfg.oracle.enabled = parse_bool(key, value, l)?,
                "oracle.every" => cfg.oracle.every = parse_value(key, value, l)?,
                "output.csv" => cfg.output.csv = Some(PathBuf::from(value)),
                "output.checkpoint" => cfg.output.checkpoint = Some(PathBuf::from(value)),
                other => return Err(Error::parse(l, format!("unknown key '{other}'"))),
            }
        }

        if let Some(mode) = inner_mode {
            cfg.algorithm.inner_loop = match mode.as_str() {
                "truncated" => InnerLoop::Truncated(inner_steps.unwrap_or(3)),
                other => other
                    .parse::<InnerLoop>()
                    .map_err(|e| Error::config("config", e))?,
            };
        } else if let Some(k) = inner_steps {
            cfg.algorithm.inner_loop = InnerLoop::Truncated(k);
        }

        let p = edge_prob.unwrap_or(0.3);
        if let Some(kind) = network_kind {
            cfg.network = match kind.as_str() {
                "complete" => NetworkSource::Complete,
                "ring" => NetworkSource::Ring,
                "path" => NetworkSource::Path,
                "random" => NetworkSource::Random { edge_prob: p },
                "random-pool" => NetworkSource::RandomPool {
                    pool_size,
                    edge_prob: p,
                },
                "file" => NetworkSource::File(network_file.clone().ok_or_else(|| {
                    Error::config("config", "network.source = file requires network.file")
                })?),
                other => {
                    return Err(Error::config(
                        "config",
                        format!("unknown network source '{other}'"),
                    ))
                }
            };
        } else if let Some(f) = network_file {
            cfg.network = NetworkSource::File(f);
        } else if edge_prob.is_some() {
            cfg.network = NetworkSource::Random { edge_prob: p };
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Structural checks that do not need the instance.
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        self.algorithm.validate()?;
        if self.log_every == 0 || self.oracle.every == 0 {
            return Err(Error::config(
                "config",
                "log and oracle cadences must be positive",
            ));
        }
        if self.policy.hidden == 0 {
            return Err(Error::config("config", "policy.hidden must be positive"));
        }
        if let NetworkSource::Random { edge_prob } | NetworkSource::RandomPool { edge_prob, .. } =
            self.network
        {
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(Error::config(
                    "config",
                    "network.edge_prob must lie in [0, 1]",
                ));
            }
        }
        if let NetworkSource::RandomPool { pool_size: 0, .. } = self.network {
            return Err(Error::config(
                "config",
                "network.pool_size must be positive",
            ));
        }
        Ok(())
    }

    /// Seed used for instance generation.
    pub fn instance_seed(&self) -> u64 {
        self.instance_seed.unwrap_or(self.seed)
    }

    /// Serialises back to the text format; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let g = &self.instance;
        let a = &self.algorithm;
        let mut kv = |k: &str, v: String| writeln!(o, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("instance.n_agents", g.n_agents.to_string());
        kv("instance.n_states", g.n_states.to_string());
        kv("instance.n_actions", g.n_actions.to_string());
        kv("instance.n_features", g.n_features.to_string());
        kv("instance.reward_min", format!("{:?}", g.reward_min));
        kv("instance.reward_max", format!("{:?}", g.reward_max));
        kv("instance.gamma", format!("{:?}", g.gamma));
        kv("instance.transitions", g.transitions.to_string());
        kv("instance.features", g.features.to_string());
        if let Some(s) = self.instance_seed {
            kv("instance.seed", s.to_string());
        }
        if let Some(f) = &self.instance_file {
            kv("instance.file", f.display().to_string());
        }
        kv("policy.hidden", self.policy.hidden.to_string());
        kv("policy.input", self.policy.input.to_string());
        kv("policy.init_scale", format!("{:?}", self.policy.init_scale));
        kv("algorithm.lambda", format!("{:?}", a.lambda));
        kv("algorithm.lambda_actor", format!("{:?}", a.lambda_actor));
        kv("algorithm.trace_form", a.trace_form.to_string());
        match a.inner_loop {
            InnerLoop::Truncated(k) => {
                kv("algorithm.inner_loop", "truncated".into());
                kv("algorithm.inner_steps", k.to_string());
            }
            other => kv("algorithm.inner_loop", other.to_string()),
        }
        kv("algorithm.box_radius", format!("{:?}", a.box_radius));
        kv(
            "algorithm.beta_omega.c",
            format!("{:?}", a.schedule.c_omega),
        );
        kv(
            "algorithm.beta_omega.p",
            format!("{:?}", a.schedule.p_omega),
        );
        kv(
            "algorithm.beta_theta.c",
            format!("{:?}", a.schedule.c_theta),
        );
        kv(
            "algorithm.beta_theta.p",
            format!("{:?}", a.schedule.p_theta),
        );
        kv("algorithm.freeze_actor", a.freeze_actor.to_string());
        kv("algorithm.steps", self.steps.to_string());
        kv("algorithm.log_every", self.log_every.to_string());
        match &self.network {
            NetworkSource::Complete => kv("network.source", "complete".into()),
            NetworkSource::Ring => kv("network.source", "ring".into()),
            NetworkSource::Path => kv("network.source", "path".into()),
            NetworkSource::Random { edge_prob } => {
                kv("network.source", "random".into());
                kv("network.edge_prob", format!("{edge_prob:?}"));
            }
            NetworkSource::RandomPool {
                pool_size,
                edge_prob,
            } => {
                kv("network.source", "random-pool".into());
                kv("network.pool_size", pool_size.to_string());
                kv("network.edge_prob", format!("{edge_prob:?}"));
            }
            NetworkSource::File(p) => {
                kv("network.source", "file".into());
                kv("network.file", p.display().to_string());
            }
        }
        kv("oracle.enabled", self.oracle.enabled.to_string());
        kv("oracle.every", self.oracle.every.to_string());
        if let Some(p) = &self.output.csv {
            kv("output.csv", p.display().to_string());
        }
        if let Some(p) = &self.output.checkpoint {
            kv("output.checkpoint", p.display().to_string());
        }
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_benchmark_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.instance.n_agents, 10);
        assert_eq!(c.policy.hidden, 64);
        assert_eq!(c.algorithm.schedule, StepSchedule::default());
        assert_eq!(
            (c.algorithm.schedule.p_omega, c.algorithm.schedule.p_theta),
            (0.6, 0.85)
        );
        c.validate().unwrap();
    }

    #[test]
    fn schedule_validation_names_a4() {
        let bad = StepSchedule {
            p_theta: 0.6,
            ..StepSchedule::default()
        };
        match bad.validate() {
            Err(Error::ConfigInvalid { assumption, .. }) => assert_eq!(assumption, "A4"),
            other => panic!("{other:?}"),
        }
        let bad = StepSchedule {
            p_omega: 0.5,
            ..StepSchedule::default()
        };
        assert!(bad.validate().is_err());
        let s = StepSchedule::default();
        assert_eq!(s.beta_omega(0), 1.0);
        assert!((s.beta_theta(1) - 2f64.powf(-0.85)).abs() < 1e-15);
    }

    #[test]
    fn parse_and_roundtrip() {
        let text = "\
# small run
seed = 7
instance.n_agents = 3
instance.n_states = 5   # tiny
instance.n_features = 2
instance.transitions = per-action
algorithm.inner_loop = truncated
algorithm.inner_steps = 4
algorithm.steps = 50
network.source = random-pool
network.pool_size = 3
oracle.enabled = false
output.csv = out.csv
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.instance.n_states, 5);
        assert_eq!(c.instance.transitions, TransitionKind::PerJointAction);
        assert_eq!(c.algorithm.inner_loop, InnerLoop::Truncated(4));
        assert_eq!(
            c.network,
            NetworkSource::RandomPool {
                pool_size: 3,
                edge_prob: 0.3
            }
        );
        assert!(!c.oracle.enabled);
        assert_eq!(c.output.csv, Some(PathBuf::from("out.csv")));
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match ExperimentConfig::parse("seed = 1\nbogus.key = 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::parse("seed 1").is_err());
        assert!(ExperimentConfig::parse("seed = -1").is_err());
        assert!(ExperimentConfig::parse("algorithm.inner_loop = sometimes").is_err());
        assert!(ExperimentConfig::parse("network.source = file").is_err());
    }
}
