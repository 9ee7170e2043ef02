use super::Mdp;
use crate::error::{Error, Result};
use crate::linalg::{stationary_distribution, DenseMatrix};
use crate::rng::SimRng;

const MAX_ATTEMPTS: usize = 100;

/// Whether transition rows depend on the joint action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// One `|S|×|S|` matrix shared by every joint action.
    StateOnly,
    /// An independent row for every `(s, a)`.
    PerJointAction,
}

impl std::str::FromStr for TransitionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "state-only" => Ok(Self::StateOnly),
            "per-action" => Ok(Self::PerJointAction),
            other => Err(format!("unknown transition kind '{other}'")),
        }
    }
}

/// How the feature matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Entries `U[0,1]`, redrawn until full column rank.
    Random,
    /// `Φ = I`; requires as many features as states.
    OneHot,
}

impl std::str::FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random" => Ok(Self::Random),
            "one-hot" => Ok(Self::OneHot),
            other => Err(format!("unknown feature kind '{other}'")),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::OneHot => "one-hot",
        })
    }
}

impl std::fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::StateOnly => "state-only",
            Self::PerJointAction => "per-action",
        })
    }
}

/// Random-instance recipe. Defaults reproduce the ten-agent benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_agents: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_features: usize,
    pub reward_min: f64,
    pub reward_max: f64,
    pub gamma: f64,
    pub transitions: TransitionKind,
    pub features: FeatureKind,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            n_states: 20,
            n_actions: 2,
            n_features: 10,
            reward_min: 0.0,
            reward_max: 4.0,
            gamma: 0.9,
            transitions: TransitionKind::StateOnly,
            features: FeatureKind::Random,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.n_states == 0 || self.n_actions == 0 || self.n_features == 0 {
            return Err(Error::config("instance", "all counts must be positive"));
        }
        if self.n_features > self.n_states {
            return Err(Error::config(
                "A3",
                format!(
                    "{} features cannot have full column rank over {} states",
                    self.n_features, self.n_states
                ),
            ));
        }
        if self.features == FeatureKind::OneHot && self.n_features != self.n_states {
            return Err(Error::config(
                "instance",
                "one-hot features need n_features equal to n_states",
            ));
        }
        if !(self.reward_min <= self.reward_max) {
            return Err(Error::config("instance", "reward_min exceeds reward_max"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("instance", "gamma must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn normalized_row(rng: &mut SimRng, n: usize) -> Vec<f64> {
    loop {
        let row: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            return row.into_iter().map(|x| x / sum).collect();
        }
    }
}

fn strongly_connected(p: &DenseMatrix) -> bool {
    let n = p.rows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward { p[(u, v)] } else { p[(v, u)] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reach(true) && reach(false)
}

/// Draws an instance: transition entries `U[0,1]` then row-normalised,
/// `r^i(s, a^i) ~ U[reward_min, reward_max]`, features `U[0,1]` redrawn until
/// full column rank. Deterministic in `(config, seed)`.
pub fn generate_instance(config: &GenConfig, seed: u64) -> Result<Mdp> {
    config.validate()?;
    let n = config.n_states;
    let sizes = vec![config.n_actions; config.n_agents];
    let space = super::JointActionSpace::new(&sizes)?;
    let n_joint = space.len();

    let mut transition = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = SimRng::indexed(seed, "transitions", attempt);
        let data: Vec<f64> = match config.transitions {
            TransitionKind::StateOnly => {
                let base: Vec<Vec<f64>> = (0..n).map(|_| normalized_row(&mut rng, n)).collect();
                let mut data = Vec::with_capacity(n * n_joint * n);
                for row in &base {
                    for _ in 0..n_joint {
                        data.extend_from_slice(row);
                    }
                }
                data
            }
            TransitionKind::PerJointAction => (0..n * n_joint)
                .flat_map(|_| normalized_row(&mut rng, n))
                .collect(),
        };
        // Irreducibility under the uniform behaviour policy.
        let mut p_mu = DenseMatrix::zeros(n, n);
        for s in 0..n {
            for a in 0..n_joint {
                let row = &data[(s * n_joint + a) * n..(s * n_joint + a + 1) * n];
                for (o, &x) in p_mu.row_mut(s).iter_mut().zip(row) {
                    *o += x / n_joint as f64;
                }
            }
        }
        if strongly_connected(&p_mu) && stationary_distribution(&p_mu).is_ok() {
            transition = Some(data);
            break;
        }
    }
    let transition = transition
        .ok_or_else(|| Error::InvalidInstance("no irreducible transition kernel found".into()))?;

    let mut rng = SimRng::new(seed, "rewards");
    let mut per_agent_action = vec![0.0; config.n_agents * n * config.n_actions];
    for r in per_agent_action.iter_mut() {
        *r = rng.uniform_in(config.reward_min, config.reward_max);
    }
    let mut rewards = vec![0.0; config.n_agents * n * n_joint];
    for i in 0..config.n_agents {
        for s in 0..n {
            for a in 0..n_joint {
                let ai = space.component(a, i);
                rewards[(i * n + s) * n_joint + a] =
                    per_agent_action[(i * n + s) * config.n_actions + ai];
            }
        }
    }

    if config.features == FeatureKind::OneHot {
        let phi = DenseMatrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 });
        return Mdp::new(n, &sizes, transition, rewards, config.gamma, phi);
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = SimRng::indexed(seed, "features", attempt);
        let phi = DenseMatrix::from_fn(n, config.n_features, |_, _| rng.uniform());
        if phi.rank() == config.n_features {
            return Mdp::new(n, &sizes, transition, rewards, config.gamma, phi);
        }
    }
    Err(Error::RankDeficientFeatures {
        attempts: MAX_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_features_are_identity() {
        let cfg = GenConfig {
            n_agents: 2,
            n_states: 4,
            n_features: 4,
            features: FeatureKind::OneHot,
            ..GenConfig::default()
        };
        let mdp = generate_instance(&cfg, 3).unwrap();
        for s in 0..4 {
            for k in 0..4 {
                assert_eq!(mdp.features()[(s, k)], if s == k { 1.0 } else { 0.0 });
            }
        }
        let bad = GenConfig {
            n_features: 3,
            ..cfg
        };
        assert!(generate_instance(&bad, 3).is_err());
    }

    #[test]
    fn defaults_match_benchmark_dimensions() {
        let c = GenConfig::default();
        assert_eq!(
            (c.n_agents, c.n_states, c.n_actions, c.n_features),
            (10, 20, 2, 10)
        );
        assert_eq!((c.reward_min, c.reward_max), (0.0, 4.0));
        let m = generate_instance(&c, 1).unwrap();
        assert_eq!(m.n_joint_actions(), 1024);
        assert_eq!(m.n_features(), 10);
    }

    #[test]
    fn same_seed_same_instance() {
        let c = GenConfig {
            n_agents: 3,
            n_states: 6,
            n_features: 4,
            transitions: TransitionKind::PerJointAction,
            ..GenConfig::default()
        };
        assert_eq!(
            generate_instance(&c, 42).unwrap(),
            generate_instance(&c, 42).unwrap()
        );
        assert_ne!(
            generate_instance(&c, 42).unwrap(),
            generate_instance(&c, 43).unwrap()
        );
    }

    #[test]
    fn rows_normalized_and_rewards_local() {
        let c = GenConfig {
            n_agents: 3,
            n_states: 5,
            n_features: 3,
            transitions: TransitionKind::PerJointAction,
            ..GenConfig::default()
        };
        let m = generate_instance(&c, 9).unwrap();
        for s in 0..m.n_states() {
            for a in 0..m.n_joint_actions() {
                let sum: f64 = m.transition_row(s, a).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        // r^i depends on a only through a^i.
        let space = m.actions().clone();
        for i in 0..3 {
            for s in 0..5 {
                for a in 0..m.n_joint_actions() {
                    for b in 0..m.n_joint_actions() {
                        if space.component(a, i) == space.component(b, i) {
                            assert_eq!(m.local_reward(i, s, a), m.local_reward(i, s, b));
                        }
                    }
                    let r = m.local_reward(i, s, a);
                    assert!((0.0..=4.0).contains(&r));
                }
            }
        }
    }

    #[test]
    fn state_only_kernel_ignores_action() {
        let c = GenConfig {
            n_agents: 2,
            n_states: 4,
            n_features: 2,
            ..GenConfig::default()
        };
        let m = generate_instance(&c, 3).unwrap();
        for s in 0..4 {
            for a in 1..m.n_joint_actions() {
                assert_eq!(m.transition_row(s, a), m.transition_row(s, 0));
            }
        }
    }

    #[test]
    fn too_many_features_rejected() {
        let c = GenConfig {
            n_states: 3,
            n_features: 4,
            ..GenConfig::default()
        };
        assert!(generate_instance(&c, 0).is_err());
    }
}
