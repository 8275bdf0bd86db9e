//! Small-instance generators and brute-force oracles shared by the
//! integration suites. The oracles enumerate every joint label vector in the
//! probability domain and never use the per-item factorization.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use truthbound::{
    generate_reviews, BipartiteGraph, EmConfig, GroundTruth, ItemId, Label, PriorParams,
    ReviewSamples, ReviewerId,
};

pub struct Instance {
    pub graph: BipartiteGraph,
    pub samples: ReviewSamples,
    pub theta: Vec<f64>,
    pub cfg: EmConfig,
}

/// A random instance with at most `max_reviewers` x `max_items` nodes and
/// at most `max_samples` reviews.
pub fn small_instance(
    seed: u64,
    max_reviewers: usize,
    max_items: usize,
    max_samples: u64,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nr = rng.random_range(1..=max_reviewers);
    let ni = rng.random_range(1..=max_items);
    let mut pairs: Vec<(usize, usize)> = (0..nr).flat_map(|u| (0..ni).map(move |i| (u, i))).collect();
    pairs.shuffle(&mut rng);
    let k = rng.random_range(1..=pairs.len());
    pairs.truncate(k);
    let graph = BipartiteGraph::new(nr, ni, pairs).unwrap();

    let truth = GroundTruth::new(
        (0..nr).map(|_| rng.random_range(0.05..0.95)).collect(),
        (0..ni)
            .map(|_| if rng.random_bool(0.5) { Label::Positive } else { Label::Negative })
            .collect(),
    )
    .unwrap();
    let n = rng.random_range(0..=max_samples);
    let samples = generate_reviews(&graph, &truth, n, rng.random()).unwrap();

    let alpha = rng.random_range(1.1..8.0);
    let beta = rng.random_range(1.1..8.0);
    let mut cfg = EmConfig::new(PriorParams::new(alpha, beta).unwrap());
    cfg.label_prior_plus = rng.random_range(0.2..0.8);

    let theta = (0..nr).map(|_| rng.random_range(0.02..0.98)).collect();
    Instance {
        graph,
        samples,
        theta,
        cfg,
    }
}

/// P(z, R | theta) for one full label vector, in the probability domain.
fn joint(inst: &Instance, theta: &[f64], labels: &[Label]) -> f64 {
    let p = inst.cfg.label_prior_plus;
    let mut prob: f64 = labels
        .iter()
        .map(|z| if *z == Label::Positive { p } else { 1.0 - p })
        .product();
    for u in 0..inst.graph.num_reviewers() {
        for i in 0..inst.graph.num_items() {
            let c = inst.samples.get(ReviewerId(u), ItemId(i));
            let z = labels[i];
            let right = c.of(z) as i32;
            let wrong = c.of(z.flipped()) as i32;
            prob *= theta[u].powi(right) * (1.0 - theta[u]).powi(wrong);
        }
    }
    prob
}

fn all_labelings(num_items: usize) -> Vec<Vec<Label>> {
    (0..1usize << num_items)
        .map(|mask| {
            (0..num_items)
                .map(|i| if mask >> i & 1 == 1 { Label::Positive } else { Label::Negative })
                .collect()
        })
        .collect()
}

/// P(z_i = +1 | R, theta) for every item by full enumeration.
pub fn brute_force_posterior(inst: &Instance, theta: &[f64]) -> Vec<f64> {
    let ni = inst.graph.num_items();
    let mut plus = vec![0.0; ni];
    let mut total = 0.0;
    for labels in all_labelings(ni) {
        let w = joint(inst, theta, &labels);
        total += w;
        for i in 0..ni {
            if labels[i] == Label::Positive {
                plus[i] += w;
            }
        }
    }
    plus.iter().map(|p| p / total).collect()
}

/// log sum_z P(theta) P(z) P(R | theta, z), prior density unnormalized.
pub fn brute_force_log_posterior(inst: &Instance, theta: &[f64]) -> f64 {
    let (a, b) = (inst.cfg.prior.alpha(), inst.cfg.prior.beta());
    let prior: f64 = theta
        .iter()
        .map(|t| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0))
        .product();
    let marginal: f64 = all_labelings(inst.graph.num_items())
        .iter()
        .map(|l| joint(inst, theta, l))
        .sum();
    (prior * marginal).ln()
}

/// Spearman rank correlation; ties get their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut j = k;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[k]] {
                j += 1;
            }
            let avg = (k + j) as f64 / 2.0 + 1.0;
            for m in k..=j {
                r[idx[m]] = avg;
            }
            k = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}
