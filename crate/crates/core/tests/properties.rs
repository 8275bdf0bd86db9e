mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use truthbound::em::run_em_observed;
use truthbound::{
    e_step, exact_log_posterior, generate_graph, m_step, run_em, sample_ground_truth,
    generate_reviews, GraphModel, PriorParams, ReviewerId,
};

use common::{brute_force_log_posterior, brute_force_posterior, small_instance};

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) as f64 / 2.0
    } else {
        v[m] as f64
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_graphs_are_simple_and_exact(
        model in prop::sample::select(GraphModel::ALL.to_vec()),
        nr in 1usize..30, ni in 1usize..30, frac in 0.0f64..1.0, seed: u64,
    ) {
        let ne = 1 + ((nr * ni - 1) as f64 * frac) as usize;
        let g = generate_graph(model, nr, ni, ne, seed).unwrap();
        prop_assert_eq!(g.num_edges(), ne);
        let distinct: HashSet<_> = g.edges().iter().collect();
        prop_assert_eq!(distinct.len(), ne);
        let (dr, di) = g.degree_sequences();
        prop_assert_eq!(dr.iter().sum::<usize>(), ne);
        prop_assert_eq!(di.iter().sum::<usize>(), ne);
        prop_assert_eq!(g, generate_graph(model, nr, ni, ne, seed).unwrap());
    }

    #[test]
    fn reviews_conserve_n(seed: u64, n in 0u64..3000) {
        let g = generate_graph(GraphModel::ReviewerItemPA, 12, 9, 40, seed).unwrap();
        let truth = sample_ground_truth(&g, &PriorParams::default(), seed ^ 1).unwrap();
        let r = generate_reviews(&g, &truth, n, seed ^ 2).unwrap();
        prop_assert_eq!(r.n(), n);
        prop_assert_eq!(r.counts().values().map(|c| c.total()).sum::<u64>(), n);
        prop_assert!(r.validate_against(&g).is_ok());
    }

    #[test]
    fn e_step_is_normalized(seed: u64) {
        let inst = small_instance(seed, 6, 6, 40);
        let mu = e_step(&inst.graph, &inst.samples, &inst.theta, &inst.cfg).unwrap();
        for m in mu.items() {
            prop_assert!((m.plus + m.minus - 1.0).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&m.plus) && (0.0..=1.0).contains(&m.minus));
        }
    }

    #[test]
    fn e_step_matches_enumeration(seed: u64) {
        let inst = small_instance(seed, 4, 3, 12);
        let mu = e_step(&inst.graph, &inst.samples, &inst.theta, &inst.cfg).unwrap();
        let oracle = brute_force_posterior(&inst, &inst.theta);
        for (m, o) in mu.items().iter().zip(&oracle) {
            prop_assert!((m.plus - o).abs() <= 1e-10, "{} vs {}", m.plus, o);
        }
    }

    #[test]
    fn log_posterior_matches_enumeration(seed: u64) {
        let inst = small_instance(seed, 2, 2, 6);
        let got = exact_log_posterior(&inst.graph, &inst.samples, &inst.theta, &inst.cfg).unwrap();
        let want = brute_force_log_posterior(&inst, &inst.theta);
        prop_assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }

    #[test]
    fn m_step_stays_in_prior_band(seed: u64) {
        let inst = small_instance(seed, 5, 5, 60);
        let mu = e_step(&inst.graph, &inst.samples, &inst.theta, &inst.cfg).unwrap();
        let theta = m_step(&inst.graph, &inst.samples, &mu, &inst.cfg).unwrap();
        let (a, b) = (inst.cfg.prior.alpha(), inst.cfg.prior.beta());
        for (u, t) in theta.iter().enumerate() {
            let d: f64 = inst.graph.items_of(ReviewerId(u)).iter()
                .map(|&i| inst.samples.get(ReviewerId(u), i).total() as f64).sum();
            let lo = (a - 1.0) / (d + a + b - 2.0);
            let hi = (d + a - 1.0) / (d + a + b - 2.0);
            prop_assert!(*t >= lo - 1e-15 && *t <= hi + 1e-15);
            prop_assert!(*t > 0.0 && *t < 1.0);
        }
    }

    #[test]
    fn em_ascends_the_log_posterior(seed: u64) {
        let inst = small_instance(seed, 4, 4, 30);
        let mut values = Vec::new();
        run_em_observed(&inst.graph, &inst.samples, &inst.cfg, |theta| {
            values.push(exact_log_posterior(&inst.graph, &inst.samples, theta, &inst.cfg).unwrap());
        }).unwrap();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn item_pa_concentrates_degree() {
    let max_item_degree = |model, seed| {
        let g = generate_graph(model, 100, 100, 500, seed).unwrap();
        *g.degree_sequences().1.iter().max().unwrap()
    };
    let seeds = 0..60u64;
    let pa = median(seeds.clone().map(|s| max_item_degree(GraphModel::ItemPA, s)).collect());
    let rnd = median(seeds.map(|s| max_item_degree(GraphModel::Random, s)).collect());
    assert!(pa > rnd, "median max item degree: ipa {pa}, rnd {rnd}");
}

#[test]
fn converged_em_is_stationary() {
    for seed in 0..50 {
        let mut inst = small_instance(seed, 5, 4, 40);
        inst.cfg.max_iterations = 20_000;
        let est = run_em(&inst.graph, &inst.samples, &inst.cfg).unwrap();
        assert!(est.converged, "seed {seed}");
        let h = 1e-5;
        for u in 0..est.theta_hat.len() {
            let mut up = est.theta_hat.clone();
            let mut down = est.theta_hat.clone();
            up[u] += h;
            down[u] -= h;
            let f = |t: &[f64]| exact_log_posterior(&inst.graph, &inst.samples, t, &inst.cfg).unwrap();
            let grad = (f(&up) - f(&down)) / (2.0 * h);
            assert!(grad.abs() < 1e-3, "seed {seed} reviewer {u}: {grad}");
        }
    }
}
