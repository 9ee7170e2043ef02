//! Emphatic TD(λ) with linear function approximation.
//!
//! The per-step recursions (follow-on trace `F`, emphasis `M`, eligibility
//! trace `e`, parameter update) in their general state-dependent form, and
//! the exact [`BellmanModel`] whose fixed point `ω* = −C⁻¹b` the iteration
//! converges to when `C` is negative definite.

use crate::error::{Error, Result};
use crate::linalg::{
    self, dot, is_negative_definite, solve_left, solve_linear, stationary_distribution, DenseMatrix,
};
use crate::mdp::{JointPolicy, Mdp};

/// A scalar function of the state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFn {
    Constant(f64),
    PerState(Vec<f64>),
}

impl StateFn {
    #[inline]
    pub fn at(&self, s: usize) -> f64 {
        match self {
            StateFn::Constant(c) => *c,
            StateFn::PerState(v) => v[s],
        }
    }

    fn values(&self, n: usize) -> Vec<f64> {
        (0..n).map(|s| self.at(s)).collect()
    }

    fn check(&self, name: &'static str, lo: f64, hi: f64, n: usize) -> Result<()> {
        let vals = match self {
            StateFn::Constant(c) => vec![*c],
            StateFn::PerState(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: v.len(),
                    });
                }
                v.clone()
            }
        };
        if vals.iter().any(|&x| !(x >= lo && x <= hi)) {
            return Err(Error::config("etd", format!("{name} outside [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Which eligibility-trace recursion to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceForm {
    /// `e_t = λ_t γ_t ρ_{t−1} e_{t−1} + M_t φ_t`
    SuttonYu,
    /// `e_t = λ γ e_{t−1} + M_t φ_t` (no ratio on the carried trace)
    RhoFree,
}

impl std::str::FromStr for TraceForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sutton-yu" => Ok(Self::SuttonYu),
            "rho-free" => Ok(Self::RhoFree),
            other => Err(format!("unknown trace form '{other}'")),
        }
    }
}

impl std::fmt::Display for TraceForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SuttonYu => "sutton-yu",
            Self::RhoFree => "rho-free",
        })
    }
}

/// Discounting, bootstrapping and interest, plus the trace form.
#[derive(Debug, Clone, PartialEq)]
pub struct EtdConfig {
    pub gamma: StateFn,
    pub lambda: StateFn,
    pub interest: StateFn,
    pub trace_form: TraceForm,
}

impl EtdConfig {
    /// Constant `γ`, `λ` and unit interest.
    pub fn constant(gamma: f64, lambda: f64) -> Self {
        Self {
            gamma: StateFn::Constant(gamma),
            lambda: StateFn::Constant(lambda),
            interest: StateFn::Constant(1.0),
            trace_form: TraceForm::SuttonYu,
        }
    }

    pub fn with_trace_form(mut self, form: TraceForm) -> Self {
        self.trace_form = form;
        self
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        self.gamma.check("gamma", 0.0, 1.0, n_states)?;
        self.lambda.check("lambda", 0.0, 1.0, n_states)?;
        self.interest.check("interest", 0.0, f64::MAX, n_states)?;
        if matches!(self.interest, StateFn::Constant(c) if c <= 0.0)
            || matches!(&self.interest, StateFn::PerState(v) if v.iter().any(|&x| x <= 0.0))
        {
            return Err(Error::config("etd", "interest must be positive"));
        }
        Ok(())
    }
}

/// Trace state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub e: Vec<f64>,
    pub f: f64,
    pub rho_prev: f64,
    pub t: u64,
}

impl TraceState {
    /// `e₋₁ = 0`, `F₋₁ = 0`, `ρ₋₁ = 1`.
    pub fn new(k: usize) -> Self {
        Self {
            e: vec![0.0; k],
            f: 0.0,
            rho_prev: 1.0,
            t: 0,
        }
    }
}

/// Scalars produced by one emphasis update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emphasis {
    /// Follow-on trace `F_t`.
    pub f: f64,
    /// Critic emphasis `M_t`.
    pub m: f64,
    /// Actor emphasis `M^θ_t`.
    pub m_actor: f64,
}

/// Emphasis from `(ρ_{t−1}, F_{t−1})`, computed before `ρ_prev` is overwritten.
#[inline]
pub fn update_emphasis(
    trace: &TraceState,
    gamma_t: f64,
    lambda_t: f64,
    interest_t: f64,
    lambda_actor: f64,
) -> Emphasis {
    let carried = gamma_t * trace.rho_prev * trace.f;
    let f = carried + interest_t;
    let m = lambda_t * interest_t + (1.0 - lambda_t) * f;
    let m_actor = interest_t + lambda_actor * carried;
    Emphasis { f, m, m_actor }
}

/// New eligibility trace `e_t`.
pub fn update_trace(
    trace: &TraceState,
    m_t: f64,
    phi_t: &[f64],
    gamma_t: f64,
    lambda_t: f64,
    form: TraceForm,
) -> Result<Vec<f64>> {
    if phi_t.len() != trace.e.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.e.len(),
            actual: phi_t.len(),
        });
    }
    let decay = match form {
        TraceForm::SuttonYu => lambda_t * gamma_t * trace.rho_prev,
        TraceForm::RhoFree => lambda_t * gamma_t,
    };
    Ok(trace
        .e
        .iter()
        .zip(phi_t)
        .map(|(e, p)| decay * e + m_t * p)
        .collect())
}

/// One observed step for the critic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtdSample {
    pub state: usize,
    pub reward: f64,
    pub next_state: usize,
    pub rho: f64,
}

/// One ETD(λ) iteration: emphasis, then trace, then parameters.
pub fn etd_step(
    omega: &[f64],
    trace: &TraceState,
    features: &DenseMatrix,
    sample: &EtdSample,
    config: &EtdConfig,
    alpha: f64,
) -> Result<(Vec<f64>, TraceState)> {
    let s = sample.state;
    let (gamma_t, lambda_t, interest_t) = (
        config.gamma.at(s),
        config.lambda.at(s),
        config.interest.at(s),
    );
    let emph = update_emphasis(trace, gamma_t, lambda_t, interest_t, 0.0);
    let phi = features.row(s);
    let phi_next = features.row(sample.next_state);
    if omega.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            actual: omega.len(),
        });
    }
    let e = update_trace(trace, emph.m, phi, gamma_t, lambda_t, config.trace_form)?;
    let delta =
        sample.reward + config.gamma.at(sample.next_state) * dot(phi_next, omega) - dot(phi, omega);
    let scale = alpha * sample.rho * delta;
    let omega_next: Vec<f64> = omega.iter().zip(&e).map(|(w, ei)| w + scale * ei).collect();
    if omega_next.iter().any(|x| !x.is_finite()) || !emph.f.is_finite() {
        return Err(Error::NonFinite {
            what: "critic parameters",
            agent: None,
        });
    }
    Ok((
        omega_next,
        TraceState {
            e,
            f: emph.f,
            rho_prev: sample.rho,
            t: trace.t + 1,
        },
    ))
}

/// Exact quantities of the projected generalised Bellman equation for a
/// fixed `(π, μ)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanModel {
    pub p_lambda: DenseMatrix,
    pub r_lambda: Vec<f64>,
    /// Diagonal of `M̄`.
    pub m_bar: Vec<f64>,
    pub c: DenseMatrix,
    pub b: Vec<f64>,
    pub omega_star: Vec<f64>,
    /// Set when `C + Cᵀ` is not negative definite.
    pub not_negative_definite: bool,
}

impl BellmanModel {
    /// `‖Cω* + b‖∞`
    pub fn fixed_point_residual(&self) -> f64 {
        let cw = self.c.mul_vec(&self.omega_star).expect("square C");
        linalg::norm_inf(
            &cw.iter()
                .zip(&self.b)
                .map(|(x, y)| x + y)
                .collect::<Vec<_>>(),
        )
    }
}

/// Builds `P^λ`, `r^λ`, `M̄`, `C`, `b` and `ω*` for target `target` evaluated
/// from data generated by `behavior`.
pub fn bellman_model(
    mdp: &Mdp,
    target: &JointPolicy,
    behavior: &JointPolicy,
    config: &EtdConfig,
    phi: &DenseMatrix,
) -> Result<BellmanModel> {
    let n = mdp.n_states();
    config.validate(n)?;
    if phi.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: phi.rows(),
        });
    }
    let p_pi = mdp.transition_matrix_under(target)?;
    let r_pi = mdp.reward_vector_under(target)?;
    let d_mu = stationary_distribution(&mdp.transition_matrix_under(behavior)?)?;
    let gammas = config.gamma.values(n);
    let lambdas = config.lambda.values(n);
    let interest = config.interest.values(n);
    let identity = DenseMatrix::identity(n);

    let p_gamma = p_pi.mul_diag_right(&gammas);
    let gamma_lambda: Vec<f64> = gammas.iter().zip(&lambdas).map(|(g, l)| g * l).collect();
    let a = identity.sub(&p_pi.mul_diag_right(&gamma_lambda))?;
    let a_inv = linalg::inverse(&a)?;
    let i_minus_p_lambda = a_inv.matmul(&identity.sub(&p_gamma)?)?;
    let p_lambda = identity.sub(&i_minus_p_lambda)?;
    let r_lambda = a_inv.mul_vec(&r_pi)?;

    let d_mu_i: Vec<f64> = d_mu.iter().zip(&interest).map(|(d, i)| d * i).collect();
    let m_bar = solve_left(&i_minus_p_lambda, &d_mu_i)?;

    let weighted = i_minus_p_lambda.mul_diag_left(&m_bar);
    let c = phi.transpose().matmul(&weighted)?.matmul(phi)?.scale(-1.0);
    let b = phi.transpose().mul_vec(
        &m_bar
            .iter()
            .zip(&r_lambda)
            .map(|(m, r)| m * r)
            .collect::<Vec<_>>(),
    )?;
    let neg_b: Vec<f64> = b.iter().map(|x| -x).collect();
    let omega_star = solve_linear(&c, &neg_b).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularC,
        other => other,
    })?;
    let sym = c.add(&c.transpose())?;
    Ok(BellmanModel {
        p_lambda,
        r_lambda,
        m_bar,
        c,
        b,
        omega_star,
        not_negative_definite: !is_negative_definite(&sym),
    })
}
