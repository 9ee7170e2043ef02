use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use emarl_core::actor_critic::{multi_agent_step, System};
use emarl_core::consensus::{global_ratio_from_logs, metropolis_weights};
use emarl_core::etd::bellman_model;
use emarl_core::oracle::exact_gradient;
use emarl_core::{
    generate_instance, AlgorithmConfig, BehaviorPolicy, EtdConfig, FactoredPolicy, GenConfig,
    Graph, InnerLoop, PolicyInput, SimRng,
};

fn benchmark_system() -> (emarl_core::Mdp, BehaviorPolicy, System) {
    let mdp = generate_instance(&GenConfig::default(), 7).unwrap();
    let mu = BehaviorPolicy::uniform(&mdp);
    let mut rng = SimRng::new(1, "init");
    let pol = FactoredPolicy::random(&mdp, 64, PolicyInput::Features, 0.1, &mut rng);
    let sys = System::new(&mdp, &pol, 0).unwrap();
    (mdp, mu, sys)
}

fn step(c: &mut Criterion) {
    let (mdp, mu, sys) = benchmark_system();
    let mut graph_rng = SimRng::new(1, "network-graph");
    let w = metropolis_weights(&Graph::random_connected(
        mdp.n_agents(),
        0.3,
        &mut graph_rng,
    ));
    for (name, mode) in [
        ("multi_agent_step/exact", InnerLoop::Exact),
        ("multi_agent_step/truncated3", InnerLoop::Truncated(3)),
    ] {
        let cfg = AlgorithmConfig {
            inner_loop: mode,
            ..AlgorithmConfig::default()
        };
        c.bench_function(name, |b| {
            b.iter_batched_ref(
                || (sys.clone(), SimRng::new(1, "trajectory")),
                |(s, rng)| {
                    for _ in 0..100 {
                        multi_agent_step(s, &mdp, &mu, Some(&w), &w, &cfg, rng).unwrap();
                    }
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn ratios(c: &mut Criterion) {
    let mut rng = SimRng::new(2, "network-graph");
    let w = metropolis_weights(&Graph::random_connected(10, 0.3, &mut rng));
    let logs: Vec<f64> = (0..10).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    c.bench_function("global_ratio/truncated3", |b| {
        b.iter(|| global_ratio_from_logs(black_box(&logs), InnerLoop::Truncated(3), &w).unwrap())
    });
}

fn oracles(c: &mut Criterion) {
    let (mdp, mu, sys) = benchmark_system();
    let target = sys.policy().joint_table(&mdp).unwrap();
    let behavior = mu.joint_table(&mdp);
    let etd = EtdConfig::constant(mdp.gamma(), 0.0);
    c.bench_function("bellman_model/20 states", |b| {
        b.iter(|| bellman_model(&mdp, &target, &behavior, &etd, mdp.features()).unwrap())
    });

    let small = generate_instance(
        &GenConfig {
            n_agents: 2,
            n_states: 5,
            n_features: 3,
            ..GenConfig::default()
        },
        3,
    )
    .unwrap();
    let mut rng = SimRng::new(3, "init");
    let pol = FactoredPolicy::random(&small, 8, PolicyInput::Features, 1.0, &mut rng);
    let small_mu = BehaviorPolicy::uniform(&small);
    c.bench_function("exact_gradient/2 agents 5 states", |b| {
        b.iter(|| exact_gradient(&small, &pol, &small_mu, 0).unwrap())
    });
}

criterion_group!(benches, step, ratios, oracles);
criterion_main!(benches);
