//! Ground truth and review samples with known answers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{parse_err, Error, Result};
use crate::graph::{BipartiteGraph, ItemId, ReviewerId};
use crate::seed;

/// Beta(alpha, beta) prior on reviewer reliability.
///
/// Both shape parameters must exceed 1: below that the observed information
/// stops being positive and the M-step can leave (0, 1). The
/// majority-reliable assumption `alpha > beta` is checked separately by
/// [`PriorParams::check_majority_reliable`], since symmetric priors are still
/// meaningful for the bound computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    alpha: f64,
    beta: f64,
}

impl PriorParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha <= 1.0 || beta <= 1.0 {
            return Err(Error::Parameter(format!(
                "prior needs alpha > 1 and beta > 1, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn mode(&self) -> f64 {
        (self.alpha - 1.0) / (self.alpha + self.beta - 2.0)
    }

    pub fn check_majority_reliable(&self) -> Result<()> {
        if self.alpha > self.beta {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "prior must favour reliable reviewers (alpha > beta), got alpha={}, beta={}",
                self.alpha, self.beta
            )))
        }
    }
}

impl Default for PriorParams {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            beta: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Probability that reviewer u's review equals the true label.
    pub theta: Vec<f64>,
    pub labels: Vec<Label>,
}

impl GroundTruth {
    pub fn new(theta: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if let Some((u, t)) = theta
            .iter()
            .enumerate()
            .find(|(_, t)| !(0.0..=1.0).contains(*t))
        {
            return Err(Error::Validation(format!(
                "theta[{u}] = {t} is not a probability"
            )));
        }
        Ok(Self { theta, labels })
    }

    fn check_shape(&self, g: &BipartiteGraph) -> Result<()> {
        if self.theta.len() != g.num_reviewers() || self.labels.len() != g.num_items() {
            return Err(Error::Parameter(format!(
                "ground truth has {} reviewers / {} items, graph has {} / {}",
                self.theta.len(),
                self.labels.len(),
                g.num_reviewers(),
                g.num_items()
            )));
        }
        Ok(())
    }

    /// Text format: header `reviewers <n> items <m>`, then `theta <u> <value>`
    /// lines and `z <i> <+1|-1>` lines.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "reviewers {} items {}", self.theta.len(), self.labels.len())?;
        for (u, t) in self.theta.iter().enumerate() {
            writeln!(w, "theta {u} {t}")?;
        }
        for (i, z) in self.labels.iter().enumerate() {
            writeln!(w, "z {i} {}", z.sign())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut theta: Vec<Option<f64>> = Vec::new();
        let mut labels: Vec<Option<Label>> = Vec::new();
        let mut header_seen = false;
        for (k, line) in r.lines().enumerate() {
            let k = k + 1;
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if !header_seen {
                if f.len() != 4 || f[0] != "reviewers" || f[2] != "items" {
                    return Err(parse_err(k, "expected header `reviewers <n> items <m>`"));
                }
                let nr: usize = f[1].parse().map_err(|_| parse_err(k, "bad reviewer count"))?;
                let ni: usize = f[3].parse().map_err(|_| parse_err(k, "bad item count"))?;
                theta = vec![None; nr];
                labels = vec![None; ni];
                header_seen = true;
                continue;
            }
            if f.len() != 3 {
                return Err(parse_err(k, format!("expected 3 fields, got {line:?}")));
            }
            let idx: usize = f[1].parse().map_err(|_| parse_err(k, "bad index"))?;
            match f[0] {
                "theta" => {
                    let v: f64 = f[2].parse().map_err(|_| parse_err(k, "bad theta value"))?;
                    let slot = theta
                        .get_mut(idx)
                        .ok_or_else(|| Error::Validation(format!("reviewer {idx} out of range")))?;
                    *slot = Some(v);
                }
                "z" => {
                    let s: i64 = f[2].parse().map_err(|_| parse_err(k, "bad label"))?;
                    let z = Label::from_sign(s).ok_or_else(|| parse_err(k, "label must be 1 or -1"))?;
                    let slot = labels
                        .get_mut(idx)
                        .ok_or_else(|| Error::Validation(format!("item {idx} out of range")))?;
                    *slot = Some(z);
                }
                other => return Err(parse_err(k, format!("unknown record {other:?}"))),
            }
        }
        if !header_seen {
            return Err(parse_err(1, "missing header"));
        }
        let theta = theta
            .into_iter()
            .enumerate()
            .map(|(u, t)| t.ok_or_else(|| Error::Validation(format!("missing theta for reviewer {u}"))))
            .collect::<Result<Vec<_>>>()?;
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(i, z)| z.ok_or_else(|| Error::Validation(format!("missing label for item {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(theta, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Number of +1 and -1 reviews a reviewer gave an item.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCounts {
    pub plus: u64,
    pub minus: u64,
}

impl EdgeCounts {
    pub fn total(&self) -> u64 {
        self.plus + self.minus
    }

    /// Count of reviews equal to `x`.
    pub fn of(&self, x: Label) -> u64 {
        match x {
            Label::Positive => self.plus,
            Label::Negative => self.minus,
        }
    }
}

/// Review samples aggregated into per-edge counts.
///
/// Only pairs with at least one review are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReviewSamples {
    n: u64,
    counts: BTreeMap<(ReviewerId, ItemId), EdgeCounts>,
}

impl ReviewSamples {
    /// Build from explicit counts; `n` is their total.
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = ((ReviewerId, ItemId), EdgeCounts)>,
    {
        let mut map: BTreeMap<_, EdgeCounts> = BTreeMap::new();
        for (k, c) in counts {
            let e = map.entry(k).or_default();
            e.plus += c.plus;
            e.minus += c.minus;
        }
        map.retain(|_, c| c.total() > 0);
        let n = map.values().map(EdgeCounts::total).sum();
        Self { n, counts: map }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &BTreeMap<(ReviewerId, ItemId), EdgeCounts> {
        &self.counts
    }

    pub fn get(&self, u: ReviewerId, i: ItemId) -> EdgeCounts {
        self.counts.get(&(u, i)).copied().unwrap_or_default()
    }

    fn record(&mut self, u: ReviewerId, i: ItemId, review: Label) {
        let c = self.counts.entry((u, i)).or_default();
        match review {
            Label::Positive => c.plus += 1,
            Label::Negative => c.minus += 1,
        }
        self.n += 1;
    }

    /// Check that every counted pair is an edge of `g`.
    pub fn validate_against(&self, g: &BipartiteGraph) -> Result<()> {
        match self.counts.keys().find(|(u, i)| !g.contains_edge(*u, *i)) {
            Some((u, i)) => Err(Error::Validation(format!(
                "reviews recorded on ({},{}) which is not an edge of the graph",
                u.0, i.0
            ))),
            None => Ok(()),
        }
    }

    /// Text format: header `n <total>`, then `u i n_plus n_minus` lines.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        for ((u, i), c) in &self.counts {
            writeln!(w, "{} {} {} {}", u.0, i.0, c.plus, c.minus)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut declared = None;
        let mut counts = BTreeMap::new();
        for (k, line) in r.lines().enumerate() {
            let k = k + 1;
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if declared.is_none() {
                if f.len() != 2 || f[0] != "n" {
                    return Err(parse_err(k, "expected header `n <total>`"));
                }
                declared = Some(
                    f[1].parse::<u64>()
                        .map_err(|_| parse_err(k, format!("bad total {:?}", f[1])))?,
                );
                continue;
            }
            if f.len() != 4 {
                return Err(parse_err(k, format!("expected `u i n_plus n_minus`, got {line:?}")));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| parse_err(k, format!("bad index {s:?}")));
            let cnt = |s: &str| -> Result<u64> {
                let v: i64 = s.parse().map_err(|_| parse_err(k, format!("bad count {s:?}")))?;
                u64::try_from(v)
                    .map_err(|_| Error::Validation(format!("line {k}: negative count {v}")))
            };
            let key = (ReviewerId(idx(f[0])?), ItemId(idx(f[1])?));
            let c = EdgeCounts {
                plus: cnt(f[2])?,
                minus: cnt(f[3])?,
            };
            if counts.insert(key, c).is_some() {
                return Err(Error::Validation(format!(
                    "line {k}: pair ({},{}) listed twice",
                    key.0 .0, key.1 .0
                )));
            }
        }
        let declared = declared.ok_or_else(|| parse_err(1, "missing header"))?;
        let samples = Self::from_counts(counts);
        if samples.n != declared {
            return Err(Error::Validation(format!(
                "header declares n = {declared} but counts sum to {}",
                samples.n
            )));
        }
        Ok(samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Draw reliabilities from the Beta prior and labels from a fair coin.
pub fn sample_ground_truth(g: &BipartiteGraph, prior: &PriorParams, seed: u64) -> Result<GroundTruth> {
    let mut rng = seed::rng(seed);
    let beta = Beta::new(prior.alpha(), prior.beta())
        .map_err(|e| Error::Parameter(format!("beta distribution: {e}")))?;
    let theta = (0..g.num_reviewers()).map(|_| beta.sample(&mut rng)).collect();
    let labels = (0..g.num_items())
        .map(|_| {
            if rng.random_bool(0.5) {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    Ok(GroundTruth { theta, labels })
}

/// Draw `n` reviews: each picks an edge uniformly with replacement and
/// reports the true label with probability theta_u, its negation otherwise.
pub fn generate_reviews(
    g: &BipartiteGraph,
    truth: &GroundTruth,
    n: u64,
    seed: u64,
) -> Result<ReviewSamples> {
    truth.check_shape(g)?;
    let mut samples = ReviewSamples::default();
    if n == 0 {
        return Ok(samples);
    }
    let edges = g.edges();
    if edges.is_empty() {
        return Err(Error::Parameter("cannot sample reviews from a graph with no edges".into()));
    }
    let mut rng = seed::rng(seed);
    for _ in 0..n {
        let (u, i) = edges[rng.random_range(0..edges.len())];
        // x in (0, 1], so theta = 1 always and theta = 0 never reports the truth.
        let x = 1.0 - rng.random::<f64>();
        let z = truth.labels[i.0];
        let review = if x <= truth.theta[u.0] { z } else { z.flipped() };
        samples.record(u, i, review);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, GraphModel};

    fn one_edge() -> BipartiteGraph {
        BipartiteGraph::complete(1, 1)
    }

    #[test]
    fn prior_validation() {
        assert!(PriorParams::new(1.0, 2.0).is_err());
        assert!(PriorParams::new(3.0, 0.5).is_err());
        assert!(PriorParams::new(f64::NAN, 2.0).is_err());
        let p = PriorParams::new(2.0, 2.0).unwrap();
        assert!(p.check_majority_reliable().is_err());
        assert!(PriorParams::default().check_majority_reliable().is_ok());
        assert_eq!(PriorParams::default().mode(), 0.75);
    }

    #[test]
    fn ground_truth_is_deterministic() {
        let g = generate_graph(GraphModel::Random, 20, 30, 80, 1).unwrap();
        let p = PriorParams::default();
        let a = sample_ground_truth(&g, &p, 17).unwrap();
        let b = sample_ground_truth(&g, &p, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.theta.len(), 20);
        assert_eq!(a.labels.len(), 30);
        assert!(a.theta.iter().all(|t| (0.0..=1.0).contains(t)));
        assert_ne!(a, sample_ground_truth(&g, &p, 18).unwrap());
    }

    #[test]
    fn perfect_and_adversarial_reviewers() {
        let g = generate_graph(GraphModel::Random, 10, 10, 40, 2).unwrap();
        let labels: Vec<Label> = (0..10)
            .map(|i| if i % 3 == 0 { Label::Negative } else { Label::Positive })
            .collect();
        for (theta, honest) in [(1.0, true), (0.0, false)] {
            let truth = GroundTruth::new(vec![theta; 10], labels.clone()).unwrap();
            let r = generate_reviews(&g, &truth, 2000, 5).unwrap();
            assert_eq!(r.n(), 2000);
            for ((_, i), c) in r.counts() {
                let expect = if honest { labels[i.0] } else { labels[i.0].flipped() };
                assert_eq!(c.of(expect), c.total());
            }
        }
    }

    #[test]
    fn counts_conserve_total_and_stay_on_edges() {
        let g = generate_graph(GraphModel::ItemPA, 15, 15, 50, 3).unwrap();
        let truth = sample_ground_truth(&g, &PriorParams::default(), 4).unwrap();
        let r = generate_reviews(&g, &truth, 777, 9).unwrap();
        let total: u64 = r.counts().values().map(EdgeCounts::total).sum();
        assert_eq!(total, 777);
        r.validate_against(&g).unwrap();
    }

    #[test]
    fn empty_graph_with_samples_is_an_error() {
        let g = BipartiteGraph::new(2, 2, []).unwrap();
        let truth = GroundTruth::new(vec![0.5; 2], vec![Label::Positive; 2]).unwrap();
        assert!(matches!(generate_reviews(&g, &truth, 3, 0), Err(Error::Parameter(_))));
        assert_eq!(generate_reviews(&g, &truth, 0, 0).unwrap().n(), 0);
    }

    #[test]
    fn single_edge_frequency() {
        let truth = GroundTruth::new(vec![0.8], vec![Label::Positive]).unwrap();
        let r = generate_reviews(&one_edge(), &truth, 100_000, 21).unwrap();
        let frac = r.get(ReviewerId(0), ItemId(0)).plus as f64 / 1e5;
        assert!((frac - 0.8).abs() < 0.01, "{frac}");
    }

    #[test]
    fn samples_roundtrip_and_validation() {
        let empty = ReviewSamples::default();
        let mut buf = Vec::new();
        empty.write_to(&mut buf).unwrap();
        let back = ReviewSamples::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.n(), 0);
        assert!(back.counts().is_empty());

        let g = generate_graph(GraphModel::Random, 50, 50, 300, 8).unwrap();
        let truth = sample_ground_truth(&g, &PriorParams::default(), 8).unwrap();
        let r = generate_reviews(&g, &truth, 5000, 8).unwrap();
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        assert_eq!(ReviewSamples::read_from(buf.as_slice()).unwrap(), r);

        let neg = "n 1\n0 0 2 -1\n";
        assert!(matches!(
            ReviewSamples::read_from(neg.as_bytes()),
            Err(Error::Validation(_))
        ));
        let mismatch = "n 5\n0 0 2 1\n";
        assert!(matches!(
            ReviewSamples::read_from(mismatch.as_bytes()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            ReviewSamples::read_from("n 1\n0 0 1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn off_graph_counts_are_rejected() {
        let g = BipartiteGraph::new(2, 2, [(0, 0)]).unwrap();
        let r = ReviewSamples::from_counts([(
            (ReviewerId(1), ItemId(1)),
            EdgeCounts { plus: 1, minus: 0 },
        )]);
        assert!(r.validate_against(&g).is_err());
    }

    #[test]
    fn truth_file_roundtrip() {
        let truth = GroundTruth::new(
            vec![0.1, 0.123456789012345, 1.0],
            vec![Label::Negative, Label::Positive],
        )
        .unwrap();
        let mut buf = Vec::new();
        truth.write_to(&mut buf).unwrap();
        assert_eq!(GroundTruth::read_from(buf.as_slice()).unwrap(), truth);
        assert!(GroundTruth::read_from("reviewers 1 items 0\n".as_bytes()).is_err());
    }
}
