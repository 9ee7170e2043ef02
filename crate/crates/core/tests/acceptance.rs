//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line; the
//! test fails if any asserted criterion fails. The trace-boundedness
//! criterion is report-only.
//!
//! The reference values here come from oracles written in this file (dense
//! Gaussian elimination, power iteration, central differences) rather than
//! from the library's own oracle module.

use emarl_core::actor_critic::{
    build_instance, build_network, multi_agent_step, single_agent_step, System,
};
use emarl_core::consensus::{global_ratio, metropolis_weights, validate_assumption_a2};
use emarl_core::harness::{critic_errors, critic_only_config};
use emarl_core::linalg::norm_inf;
use emarl_core::oracle::sampled_gradient_mc;
use emarl_core::{
    generate_instance, run, AlgorithmConfig, BehaviorPolicy, Error, ExperimentConfig,
    FactoredPolicy, GenConfig, Graph, InnerLoop, Mdp, PolicyInput, SimRng, TransitionKind,
};

struct Outcome {
    name: &'static str,
    pass: bool,
    /// Report-only criteria never fail the test.
    asserted: bool,
    detail: String,
}

impl Outcome {
    fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let suffix = if self.asserted { "" } else { " [report only]" };
        format!("{tag} {}{suffix}: {}", self.name, self.detail)
    }
}

// ---------------------------------------------------------------------------
// Independent dense oracles
// ---------------------------------------------------------------------------

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot_row = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / pivot_row[col];
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Joint-action probability tables `pi[s][a]` built from per-agent marginals.
fn joint_probs(mdp: &Mdp, marginal: impl Fn(usize, usize, usize) -> f64) -> Vec<Vec<f64>> {
    let space = mdp.actions();
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_joint_actions())
                .map(|a| {
                    (0..mdp.n_agents())
                        .map(|i| marginal(i, s, space.component(a, i)))
                        .product()
                })
                .collect()
        })
        .collect()
}

fn state_chain(mdp: &Mdp, pi: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = mdp.n_states();
    let mut p = vec![vec![0.0; n]; n];
    let mut r = vec![0.0; n];
    for s in 0..n {
        for (a, &w) in pi[s].iter().enumerate() {
            let mean_reward: f64 = (0..mdp.n_agents())
                .map(|i| mdp.local_reward(i, s, a))
                .sum::<f64>()
                / mdp.n_agents() as f64;
            r[s] += w * mean_reward;
            for (o, &x) in p[s].iter_mut().zip(mdp.transition_row(s, a)) {
                *o += w * x;
            }
        }
    }
    (p, r)
}

/// Stationary distribution of an irreducible chain: solve `dᵀ(I − P) = 0`
/// with one equation replaced by `Σ d = 1`.
fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == j { 1.0 } else { 0.0 } - p[j][i];
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve(a, b)
}

fn behaviour_stationary(mdp: &Mdp, mu: &BehaviorPolicy) -> Vec<f64> {
    let pi_mu = joint_probs(mdp, |i, s, a| mu.prob(i, s, a));
    stationary(&state_chain(mdp, &pi_mu).0)
}

/// `J_μ(θ) = Σ_s d_μ(s) v_θ(s)` with `v_θ = (I − γP_θ)⁻¹ r_θ`.
fn objective(mdp: &Mdp, policy: &FactoredPolicy, d_mu: &[f64]) -> f64 {
    let tables: Vec<Vec<Vec<f64>>> = (0..mdp.n_agents())
        .map(|i| {
            (0..mdp.n_states())
                .map(|s| policy.agent_distribution(i, s).unwrap())
                .collect()
        })
        .collect();
    let pi = joint_probs(mdp, |i, s, a| tables[i][s][a]);
    let (p, r) = state_chain(mdp, &pi);
    let n = mdp.n_states();
    let g = mdp.gamma();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - g * p[i][j])
                .collect()
        })
        .collect();
    let v = solve(a, r);
    d_mu.iter().zip(&v).map(|(d, v)| d * v).sum()
}

/// Central differences of `objective` in every parameter of one agent.
fn fd_gradient(mdp: &Mdp, policy: &FactoredPolicy, d_mu: &[f64], agent: usize, h: f64) -> Vec<f64> {
    let len = policy.agent(agent).flat().len();
    (0..len)
        .map(|k| {
            let mut plus = policy.clone();
            plus.agent_mut(agent).flat_mut()[k] += h;
            let mut minus = policy.clone();
            minus.agent_mut(agent).flat_mut()[k] -= h;
            (objective(mdp, &plus, d_mu) - objective(mdp, &minus, d_mu)) / (2.0 * h)
        })
        .collect()
}

fn small_instance(seed: u64) -> Mdp {
    generate_instance(
        &GenConfig {
            n_agents: 2,
            n_states: 3,
            n_features: 2,
            transitions: TransitionKind::PerJointAction,
            ..GenConfig::default()
        },
        seed,
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// Critic-only runs reach the projected fixed point with consensus.
fn critic_fixed_point() -> Outcome {
    let steps = 200_000;
    let mut worst_rel = 0.0f64;
    let mut worst_dis = 0.0f64;
    let mut failures = Vec::new();
    let mut skipped = 0;
    let mut runs = 0;
    let mut slowest = 0.0f64;
    for k in 0..10u64 {
        let n = 5 + (k as usize * 15) / 9;
        for n_features in [n, 5] {
            let cfg = critic_only_config(100 + k, n, n_features, steps);
            let start = std::time::Instant::now();
            let outcome = run(&cfg);
            slowest = slowest.max(start.elapsed().as_secs_f64());
            runs += 1;
            let tag = format!("{n} states/K={n_features}");
            match outcome.as_ref().map(critic_errors) {
                Ok(Some((_, _, true))) => skipped += 1,
                Ok(Some((rel, dis, false))) => {
                    worst_rel = worst_rel.max(rel);
                    worst_dis = worst_dis.max(dis);
                    if rel > 0.05 || dis > 1e-3 {
                        failures.push(format!("{tag}: rel {rel:.3e}, disagreement {dis:.1e}"));
                    }
                }
                Ok(None) => failures.push(format!("{tag}: oracle unavailable")),
                Err(e) => failures.push(format!("{tag}: {e}")),
            }
        }
    }
    let pass = failures.is_empty() && slowest <= 120.0;
    Outcome {
        name: "1 critic fixed point",
        pass,
        asserted: true,
        detail: format!(
            "{runs} runs at T = {steps}, {skipped} skipped (C not negative definite), worst relative \
             error {worst_rel:.3e} (limit 0.05), worst disagreement {worst_dis:.1e} (limit 1e-3), \
             slowest run {slowest:.1}s; failures: [{}]",
            failures.join("; ")
        ),
    }
}

/// Relative error with an absolute floor for near-zero coordinates.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

/// Exact policy gradient against central differences of the objective.
fn exact_gradient_matches_differences() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let mdp = small_instance(1000 + k);
        let mu = BehaviorPolicy::uniform(&mdp);
        let d_mu = behaviour_stationary(&mdp, &mu);
        let mut rng = SimRng::indexed(k, "init", 0);
        let pol = FactoredPolicy::random(&mdp, 3, PolicyInput::Features, 1.0, &mut rng);
        for agent in 0..2 {
            let g = emarl_core::oracle::exact_gradient(&mdp, &pol, &mu, agent).unwrap();
            let fd = fd_gradient(&mdp, &pol, &d_mu, agent, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                worst = worst.max(rel_err(*a, *b));
            }
        }
    }
    Outcome {
        name: "2 exact policy gradient",
        pass: worst <= 1e-4,
        asserted: true,
        detail: format!("max relative error {worst:.3e} over 50 instances (limit 1e-4)"),
    }
}

/// Long-run average of the sampled actor update against the gradient.
fn unbiasedness() -> Outcome {
    let mut worst = 0.0f64;
    let mut per_instance = Vec::new();
    for k in 0..5u64 {
        let mdp = small_instance(2000 + k);
        let mu = BehaviorPolicy::uniform(&mdp);
        let d_mu = behaviour_stationary(&mdp, &mu);
        let mut rng = SimRng::new(k, "init");
        let pol = FactoredPolicy::random(&mdp, 1, PolicyInput::Features, 1.0, &mut rng);
        let agent = (k % 2) as usize;
        let reference = fd_gradient(&mdp, &pol, &d_mu, agent, 1e-5);
        let mut traj = SimRng::new(k, "trajectory");
        let est =
            sampled_gradient_mc(&mdp, &pol, &mu, agent, 1_000_000, 1.0, 200, &mut traj).unwrap();
        let z = est.max_z_score(&reference);
        per_instance.push(format!("{z:.2}"));
        worst = worst.max(z);
    }
    Outcome {
        name: "3 sampled actor update unbiased",
        pass: worst <= 3.0,
        asserted: true,
        detail: format!(
            "max |z| per instance [{}] with horizon 1e6 (limit 3)",
            per_instance.join(", ")
        ),
    }
}

/// Exact-mode ratio reconstruction equals the product of local ratios.
fn ratio_reconstruction() -> Outcome {
    let mut rng = SimRng::new(4, "network-graph");
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = 1 + rng.below(10);
        let ratios: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.uniform_in(-2.0, 2.0)))
            .collect();
        let product: f64 = ratios.iter().product();
        let w = metropolis_weights(&Graph::random_connected(n, 0.3, &mut rng));
        for r in global_ratio(&ratios, InnerLoop::Exact, &w).unwrap() {
            worst = worst.max(((r - product) / product).abs());
        }
    }
    Outcome {
        name: "4 ratio reconstruction",
        pass: worst <= 1e-10,
        asserted: true,
        detail: format!("max relative error {worst:.3e} over 1e4 tuples (limit 1e-10)"),
    }
}

/// `‖W − 11ᵀ/n‖₂` by power iteration on `(W − J)ᵀ(W − J)`.
fn consensus_contraction(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let d: Vec<Vec<f64>> = w
        .iter()
        .map(|row| row.iter().map(|x| x - 1.0 / n as f64).collect())
        .collect();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.37).collect();
    let mut est = 0.0;
    for _ in 0..5000 {
        let dv: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| d[i][j] * v[j]).sum())
            .collect();
        let dtdv: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| d[i][j] * dv[i]).sum())
            .collect();
        let norm = dtdv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm.sqrt() / v.iter().map(|x| x * x).sum::<f64>().sqrt().sqrt();
        v = dtdv.iter().map(|x| x / norm).collect();
    }
    est
}

/// Metropolis weights on random connected graphs meet the consensus conditions.
fn metropolis_conditions() -> Outcome {
    let mut rng = SimRng::new(5, "network-graph");
    let mut failures = 0;
    let mut worst_rho = 0.0f64;
    let mut worst_sum = 0.0f64;
    for _ in 0..100 {
        let n = 2 + rng.below(19);
        let g = Graph::random_connected(n, rng.uniform() * 0.5, &mut rng);
        let w = metropolis_weights(&g);
        let report = validate_assumption_a2(std::slice::from_ref(&w)).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| w.get(i, j)).collect())
            .collect();
        for i in 0..n {
            let r: f64 = rows[i].iter().sum();
            let c: f64 = rows.iter().map(|row| row[i]).sum();
            worst_sum = worst_sum.max((r - 1.0).abs()).max((c - 1.0).abs());
        }
        let rho = consensus_contraction(&rows);
        worst_rho = worst_rho.max(rho);
        if !report.passes() || rho >= 1.0 || worst_sum > 1e-12 {
            failures += 1;
        }
    }
    Outcome {
        name: "5 Metropolis weights",
        pass: failures == 0,
        asserted: true,
        detail: format!(
            "100 graphs, {failures} failures, max stochasticity error {worst_sum:.1e}, \
             largest contraction factor {worst_rho:.6}"
        ),
    }
}

fn benchmark_config(seed: u64, mode: InnerLoop) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        seed,
        instance_seed: Some(7),
        steps: 100_000,
        ..ExperimentConfig::default()
    };
    c.algorithm.inner_loop = mode;
    c
}

/// Window means of the objective over the final half of the run, each no
/// more than 0.1% below its predecessor.
fn non_decreasing_tail(samples: &[(u64, f64)], steps: u64) -> bool {
    let tail: Vec<f64> = samples
        .iter()
        .filter(|(t, _)| *t >= steps / 2)
        .map(|(_, j)| *j)
        .collect();
    let windows: Vec<f64> = tail
        .chunks(tail.len().div_ceil(5).max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    windows.windows(2).all(|w| w[1] >= w[0] - 1e-3 * w[0].abs())
}

/// Ten-agent benchmark: seed stability, late monotonicity, mode agreement.
fn benchmark_reproduction() -> Outcome {
    let seeds = [1u64, 2, 3];
    let modes = [InnerLoop::Exact, InnerLoop::Truncated(3), InnerLoop::Local];
    let start = std::time::Instant::now();
    let mut finals: Vec<Vec<Option<f64>>> = Vec::new();
    let mut notes = Vec::new();
    let mut monotone = true;
    for &seed in &seeds {
        let mut row = Vec::new();
        for &mode in &modes {
            let cfg = benchmark_config(seed, mode);
            match run(&cfg) {
                Ok(log) => {
                    let samples: Vec<(u64, f64)> = log
                        .records
                        .iter()
                        .filter_map(|r| r.j_mu.map(|j| (r.step, j)))
                        .collect();
                    if !non_decreasing_tail(&samples, cfg.steps) {
                        monotone = false;
                        notes.push(format!("seed {seed} {mode}: tail decreases"));
                    }
                    row.push(log.final_objective());
                }
                Err(e @ Error::NonFinite { .. }) => {
                    notes.push(format!("seed {seed} {mode}: {e}"));
                    row.push(None);
                }
                Err(e) => panic!("benchmark run failed to start: {e}"),
            }
        }
        finals.push(row);
    }
    let exact: Vec<f64> = finals.iter().filter_map(|r| r[0]).collect();
    let spread = if exact.len() == seeds.len() {
        let mean = exact.iter().sum::<f64>() / exact.len() as f64;
        let (lo, hi) = exact
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        (hi - lo) / mean
    } else {
        f64::INFINITY
    };
    let mut mode_gap = 0.0f64;
    for row in &finals {
        let vals: Vec<f64> = row.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        for a in &vals {
            for b in &vals {
                let gap = (a - b).abs() / a.abs().min(b.abs());
                mode_gap = if gap.is_nan() {
                    f64::INFINITY
                } else {
                    mode_gap.max(gap)
                };
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let table: Vec<String> = seeds
        .iter()
        .zip(&finals)
        .map(|(s, row)| {
            let vals: Vec<String> = row
                .iter()
                .map(|v| v.map_or("diverged".into(), |x| format!("{x:.4}")))
                .collect();
            format!("seed {s}: {}", vals.join("/"))
        })
        .collect();
    Outcome {
        name: "6 ten-agent benchmark",
        pass: spread <= 0.02 && monotone && mode_gap <= 0.05 && elapsed <= 900.0,
        asserted: true,
        detail: format!(
            "final J exact/truncated3/local [{}]; exact spread {:.2}% (limit 2%), \
             largest mode gap {:.2}% (limit 5%), tails non-decreasing: {monotone}, {elapsed:.0}s; \
             notes: [{}]",
            table.join("; "),
            spread * 100.0,
            mode_gap * 100.0,
            notes.join("; ")
        ),
    }
}

/// One-agent networks reproduce the single-agent algorithm bit for bit.
fn degenerate_network() -> Outcome {
    let seeds = 0..25u64;
    let mut mismatches = Vec::new();
    for seed in seeds.clone() {
        let mdp = generate_instance(
            &GenConfig {
                n_agents: 1,
                n_states: 4 + (seed as usize % 5),
                n_features: 3,
                transitions: TransitionKind::PerJointAction,
                ..GenConfig::default()
            },
            seed,
        )
        .unwrap();
        let mu = BehaviorPolicy::uniform(&mdp);
        let mut init = SimRng::new(seed, "init");
        let pol = FactoredPolicy::random(&mdp, 8, PolicyInput::Features, 0.5, &mut init);
        let mode = [InnerLoop::Exact, InnerLoop::Truncated(2), InnerLoop::Local][seed as usize % 3];
        let cfg = AlgorithmConfig {
            inner_loop: mode,
            ..AlgorithmConfig::default()
        };
        let w = metropolis_weights(&Graph::complete(1));
        let mut single = System::new(&mdp, &pol, 0).unwrap();
        let mut multi = single.clone();
        let mut rng_s = SimRng::new(seed, "trajectory");
        let mut rng_m = rng_s.clone();
        for t in 0..2000 {
            single_agent_step(&mut single, &mdp, &mu, &cfg, &mut rng_s).unwrap();
            let consensus = (t > 0).then_some(&w);
            multi_agent_step(&mut multi, &mdp, &mu, consensus, &w, &cfg, &mut rng_m).unwrap();
        }
        let bits = |s: &System| {
            let a = &s.agents[0];
            let mut v: Vec<u64> = a.theta.flat().iter().map(|x| x.to_bits()).collect();
            v.extend(a.omega_tilde.iter().map(|x| x.to_bits()));
            v.extend(a.trace.e.iter().map(|x| x.to_bits()));
            v.extend([
                a.trace.f.to_bits(),
                a.trace.rho_prev.to_bits(),
                s.state as u64,
            ]);
            v
        };
        let same_stream = rng_s.uniform().to_bits() == rng_m.uniform().to_bits();
        if bits(&single) != bits(&multi) || !same_stream {
            mismatches.push(seed);
        }
    }
    Outcome {
        name: "7 one-agent network equals single-agent run",
        pass: mismatches.is_empty(),
        asserted: true,
        detail: format!(
            "{} seeds x 2000 steps, bitwise mismatches at seeds {mismatches:?}",
            seeds.count()
        ),
    }
}

/// Running maximum of the trace sup-norm plateaus over a long run.
fn trace_boundedness() -> Outcome {
    let steps = 1_000_000u64;
    let cfg = benchmark_config(1, InnerLoop::Exact);
    let mdp = build_instance(&cfg).unwrap();
    let mu = BehaviorPolicy::uniform(&mdp);
    let eps = mu.validate_exploration(&mdp).unwrap();
    let mut init = SimRng::new(cfg.seed, "init");
    let pol = FactoredPolicy::random(
        &mdp,
        cfg.policy.hidden,
        cfg.policy.input,
        cfg.policy.init_scale,
        &mut init,
    );
    let mut rng = SimRng::new(cfg.seed, "trajectory");
    let s0 = rng.below(mdp.n_states());
    let mut sys = System::new(&mdp, &pol, s0).unwrap();
    let mut network = build_network(&cfg, mdp.n_agents()).unwrap();
    let w = network.weights_at(0).clone();
    let cutoff = steps - steps / 10;
    let (mut head_max, mut tail_max) = (0.0f64, 0.0f64);
    let mut aborted = None;
    for t in 0..steps {
        let consensus = (t > 0).then_some(&w);
        if let Err(e) =
            multi_agent_step(&mut sys, &mdp, &mu, consensus, &w, &cfg.algorithm, &mut rng)
        {
            aborted = Some(format!("aborted at step {t}: {e}"));
            break;
        }
        let e_inf = sys
            .agents
            .iter()
            .map(|a| norm_inf(&a.trace.e))
            .fold(0.0, f64::max);
        if t < cutoff {
            head_max = head_max.max(e_inf);
        } else {
            tail_max = tail_max.max(e_inf);
        }
    }
    let (pass, detail) = match aborted {
        Some(msg) => (false, msg),
        None => (
            head_max.is_finite() && tail_max <= head_max,
            format!(
                "max |e|_inf {head_max:.3e} over the first 90% of 1e6 steps, {tail_max:.3e} over \
                 the last 10%, exploration floor {eps:.2e}"
            ),
        ),
    };
    Outcome {
        name: "8 trace boundedness",
        pass,
        asserted: false,
        detail,
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [fn() -> Outcome; 8] = [
        critic_fixed_point,
        exact_gradient_matches_differences,
        unbiasedness,
        ratio_reconstruction,
        metropolis_conditions,
        benchmark_reproduction,
        degenerate_network,
        trace_boundedness,
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|c| scope.spawn(c)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("criterion panicked"))
            .collect()
    });
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| o.asserted && !o.pass)
        .map(|o| o.name)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
