//! Monte-Carlo comparison of graph topologies.
//!
//! For every grid cell `(model, |E|, n, repetition)` the runner generates a
//! fresh graph, ground truth, and review sample, runs EM, and records item
//! classification accuracy, the mean RMSE lower bound at the estimate, and
//! the realized RMSE against the true reliabilities. Cells are seeded with
//! [`cell_seed`] and are independent, so they run in parallel while results
//! stay identical to a sequential run.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::em::{run_em, EmConfig, LabelPosterior};
use crate::error::{parse_err, Error, Result};
use crate::fisher::{bcrlb_report, observed_information};
use crate::graph::{generate_graph, GraphModel};
use crate::seed;
use crate::synthesis::{generate_reviews, sample_ground_truth, GroundTruth, Label, PriorParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub models: Vec<GraphModel>,
    pub num_reviewers: usize,
    pub num_items: usize,
    pub edge_counts: Vec<usize>,
    pub sample_counts: Vec<u64>,
    pub repetitions: usize,
    pub prior: PriorParams,
    pub em: EmConfig,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// 100 reviewers and items, |E| in 200..=1000, n in 500..=5000,
    /// 20 repetitions. Runs in well under a minute.
    pub fn desk() -> Self {
        let prior = PriorParams::default();
        Self {
            models: GraphModel::ALL.to_vec(),
            num_reviewers: 100,
            num_items: 100,
            edge_counts: vec![200, 400, 600, 800, 1000],
            sample_counts: (1..=10).map(|k| k * 500).collect(),
            repetitions: 20,
            prior,
            em: EmConfig::new(prior),
            base_seed: 1,
        }
    }

    /// 500 reviewers and items, |E| in 1000..=5000, n in 500..=5000,
    /// 100 repetitions.
    pub fn paper() -> Self {
        Self {
            num_reviewers: 500,
            num_items: 500,
            edge_counts: (1..=5).map(|k| k * 1000).collect(),
            repetitions: 100,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Parameter(format!(
                "unknown preset {other:?} (expected desk or paper)"
            ))),
        }
    }

    /// Apply `key = value` lines on top of `self`. Lists are comma
    /// separated; `#` starts a comment.
    ///
    /// Keys: `models`, `num_reviewers`, `num_items`, `edge_counts`,
    /// `sample_counts`, `repetitions`, `alpha`, `beta`, `label_prior_plus`,
    /// `tolerance`, `max_iterations`, `base_seed`.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        let (mut alpha, mut beta) = (self.prior.alpha(), self.prior.beta());
        for (k, raw) in text.lines().enumerate() {
            let k = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(k, format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let scalar = |what: &str| parse_err(k, format!("bad {what} value {value:?}"));
            fn list<T: std::str::FromStr>(value: &str, k: usize) -> Result<Vec<T>> {
                value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| parse_err(k, format!("bad list entry {:?}", s.trim())))
                    })
                    .collect()
            }
            match key {
                "models" => {
                    self.models = value
                        .split(',')
                        .map(|s| s.parse::<GraphModel>().map_err(|e| parse_err(k, e.to_string())))
                        .collect::<Result<_>>()?
                }
                "num_reviewers" => self.num_reviewers = value.parse().map_err(|_| scalar(key))?,
                "num_items" => self.num_items = value.parse().map_err(|_| scalar(key))?,
                "edge_counts" => self.edge_counts = list(value, k)?,
                "sample_counts" => self.sample_counts = list(value, k)?,
                "repetitions" => self.repetitions = value.parse().map_err(|_| scalar(key))?,
                "alpha" => alpha = value.parse().map_err(|_| scalar(key))?,
                "beta" => beta = value.parse().map_err(|_| scalar(key))?,
                "label_prior_plus" => {
                    self.em.label_prior_plus = value.parse().map_err(|_| scalar(key))?
                }
                "tolerance" => self.em.tolerance = value.parse().map_err(|_| scalar(key))?,
                "max_iterations" => {
                    self.em.max_iterations = value.parse().map_err(|_| scalar(key))?
                }
                "base_seed" => self.base_seed = value.parse().map_err(|_| scalar(key))?,
                other => return Err(parse_err(k, format!("unknown key {other:?}"))),
            }
        }
        self.prior = PriorParams::new(alpha, beta)?;
        self.em.prior = self.prior;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.models.is_empty() || self.edge_counts.is_empty() || self.sample_counts.is_empty() {
            return fail("models, edge_counts and sample_counts must be non-empty");
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1");
        }
        if self.num_reviewers == 0 || self.num_items == 0 {
            return fail("num_reviewers and num_items must be positive");
        }
        if self.edge_counts.contains(&0) || self.sample_counts.contains(&0) {
            return fail("edge and sample counts must be positive");
        }
        if self.em.prior != self.prior {
            return fail("EM prior differs from the generating prior");
        }
        self.prior.check_majority_reliable()?;
        self.em.validate()
    }

    /// Every `(model, |E|, n, repetition)` tuple in result order.
    pub fn grid(&self) -> Vec<(GraphModel, usize, u64, usize)> {
        let mut cells = Vec::new();
        for &m in &self.models {
            for &e in &self.edge_counts {
                for &n in &self.sample_counts {
                    for rep in 0..self.repetitions {
                        cells.push((m, e, n, rep));
                    }
                }
            }
        }
        cells
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub model: GraphModel,
    pub num_edges: usize,
    pub n: u64,
    pub repetition: usize,
    pub accuracy: f64,
    pub mean_rmse_bound: f64,
    pub empirical_rmse: f64,
    pub em_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub model: GraphModel,
    pub num_edges: usize,
    pub n: u64,
    pub repetitions: usize,
    pub acc_mean: f64,
    pub acc_se: f64,
    pub rmse_bound_mean: f64,
    pub rmse_bound_se: f64,
    pub emp_rmse_mean: f64,
    pub emp_rmse_se: f64,
}

/// +1 when mu_i(+1) >= 0.5, so exact ties go to +1.
pub fn classify_items(mu: &LabelPosterior) -> Vec<Label> {
    mu.items()
        .iter()
        .map(|m| {
            if m.plus >= 0.5 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect()
}

/// (TP + TN) / (P + N).
pub fn accuracy(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "{} predictions for {} items",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Parameter("accuracy of an empty item set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Root mean squared difference between estimated and true reliabilities.
pub fn empirical_rmse(theta_hat: &[f64], truth: &GroundTruth) -> Result<f64> {
    if theta_hat.len() != truth.theta.len() {
        return Err(Error::Parameter(format!(
            "{} estimates for {} reviewers",
            theta_hat.len(),
            truth.theta.len()
        )));
    }
    if theta_hat.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = theta_hat
        .iter()
        .zip(&truth.theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / theta_hat.len() as f64).sqrt())
}

/// Seed for one grid cell.
pub fn cell_seed(base_seed: u64, model: GraphModel, num_edges: usize, n: u64, repetition: usize) -> u64 {
    seed::derive(
        base_seed,
        &[model.code(), num_edges as u64, n, repetition as u64],
    )
}

fn run_cell(
    cfg: &ExperimentConfig,
    model: GraphModel,
    num_edges: usize,
    n: u64,
    repetition: usize,
) -> Result<RunResult> {
    let s = cell_seed(cfg.base_seed, model, num_edges, n, repetition);
    let g = generate_graph(
        model,
        cfg.num_reviewers,
        cfg.num_items,
        num_edges,
        seed::stream_seed(s, 1),
    )?;
    let truth = sample_ground_truth(&g, &cfg.prior, seed::stream_seed(s, 2))?;
    let reviews = generate_reviews(&g, &truth, n, seed::stream_seed(s, 3))?;
    let est = run_em(&g, &reviews, &cfg.em)?;
    let acc = accuracy(&classify_items(&est.posterior), &truth.labels)?;
    let report = bcrlb_report(&observed_information(&est.theta_hat, &cfg.prior)?)?;
    Ok(RunResult {
        model,
        num_edges,
        n,
        repetition,
        accuracy: acc,
        mean_rmse_bound: report.mean_rmse_lower,
        empirical_rmse: empirical_rmse(&est.theta_hat, &truth)?,
        em_iterations: est.iterations,
        converged: est.converged,
    })
}

/// Run every grid cell. Results come back in grid order: model, then |E|,
/// then n, then repetition.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    cfg.grid()
        .into_par_iter()
        .map(|(m, e, n, rep)| {
            run_cell(cfg, m, e, n, rep).map_err(|err| Error::Cell {
                cell: format!("model={m}, edges={e}, n={n}, repetition={rep}"),
                source: Box::new(err),
            })
        })
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Mean and standard error (sample sd / sqrt(reps)) per (model, |E|, n).
///
/// The grid is inferred as the product of the distinct models, edge
/// counts, sample counts, and repetition indices that occur in `results`;
/// any missing or repeated tuple is an error. Rows follow the order in which
/// each (model, |E|, n) first appears.
pub fn aggregate(results: &[RunResult]) -> Result<Vec<AggregateRow>> {
    fn distinct<T: Copy + Eq + std::hash::Hash>(it: impl Iterator<Item = T>) -> Vec<T> {
        let mut seen = HashSet::new();
        it.filter(|x| seen.insert(*x)).collect()
    }
    let models = distinct(results.iter().map(|r| r.model));
    let edges = distinct(results.iter().map(|r| r.num_edges));
    let ns = distinct(results.iter().map(|r| r.n));
    let reps = distinct(results.iter().map(|r| r.repetition));

    let mut present = HashSet::new();
    for r in results {
        if !present.insert((r.model, r.num_edges, r.n, r.repetition)) {
            return Err(Error::Validation(format!(
                "duplicate result for model={}, edges={}, n={}, repetition={}",
                r.model, r.num_edges, r.n, r.repetition
            )));
        }
    }
    let mut missing = Vec::new();
    for &m in &models {
        for &e in &edges {
            for &n in &ns {
                for &rep in &reps {
                    if !present.contains(&(m, e, n, rep)) {
                        missing.push(format!("({m},{e},{n},{rep})"));
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "incomplete grid, missing (model,edges,n,repetition): {}",
            missing.join(" ")
        )));
    }

    let mut order = Vec::new();
    let mut groups: HashMap<(GraphModel, usize, u64), Vec<&RunResult>> = HashMap::new();
    for r in results {
        let key = (r.model, r.num_edges, r.n);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let col = |f: fn(&RunResult) -> f64| mean_se(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (acc_mean, acc_se) = col(|r| r.accuracy);
            let (rmse_bound_mean, rmse_bound_se) = col(|r| r.mean_rmse_bound);
            let (emp_rmse_mean, emp_rmse_se) = col(|r| r.empirical_rmse);
            AggregateRow {
                model: key.0,
                num_edges: key.1,
                n: key.2,
                repetitions: group.len(),
                acc_mean,
                acc_se,
                rmse_bound_mean,
                rmse_bound_se,
                emp_rmse_mean,
                emp_rmse_se,
            }
        })
        .collect())
}

pub const CSV_HEADER: &str =
    "model,edges,n,acc_mean,acc_se,rmse_bound_mean,rmse_bound_se,emp_rmse_mean,emp_rmse_se";

pub const DETAILS_HEADER: &str =
    "model,edges,n,repetition,accuracy,mean_rmse_bound,empirical_rmse,em_iterations,converged";

// 13 significant digits in scientific notation.
fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn write_csv_to<W: Write>(rows: &[AggregateRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.num_edges,
            r.n,
            num(r.acc_mean),
            num(r.acc_se),
            num(r.rmse_bound_mean),
            num(r.rmse_bound_se),
            num(r.emp_rmse_mean),
            num(r.emp_rmse_se)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[AggregateRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(rows, BufWriter::new(File::create(path)?))
}

pub fn write_details_csv_to<W: Write>(results: &[RunResult], mut w: W) -> Result<()> {
    writeln!(w, "{DETAILS_HEADER}")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.num_edges,
            r.n,
            r.repetition,
            num(r.accuracy),
            num(r.mean_rmse_bound),
            num(r.empirical_rmse),
            r.em_iterations,
            r.converged
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_details_csv(results: &[RunResult], path: impl AsRef<Path>) -> Result<()> {
    write_details_csv_to(results, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::ItemPosterior;

    fn post(plus: f64) -> ItemPosterior {
        ItemPosterior {
            plus,
            minus: 1.0 - plus,
        }
    }

    fn result(model: GraphModel, n: u64, rep: usize, acc: f64) -> RunResult {
        RunResult {
            model,
            num_edges: 10,
            n,
            repetition: rep,
            accuracy: acc,
            mean_rmse_bound: 0.2,
            empirical_rmse: 0.1,
            em_iterations: 3,
            converged: true,
        }
    }

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            models: vec![GraphModel::Random],
            num_reviewers: 10,
            num_items: 10,
            edge_counts: vec![30],
            sample_counts: vec![200],
            repetitions: 2,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn classification_threshold_and_tie() {
        let mu = LabelPosterior(vec![post(0.941), post(0.5), post(0.2)]);
        assert_eq!(
            classify_items(&mu),
            vec![Label::Positive, Label::Positive, Label::Negative]
        );
    }

    #[test]
    fn accuracy_examples() {
        use Label::*;
        let truth = [Positive, Negative, Positive, Negative];
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        let flipped: Vec<_> = truth.iter().map(|z| z.flipped()).collect();
        assert_eq!(accuracy(&flipped, &truth).unwrap(), 0.0);
        assert_eq!(
            accuracy(&[Positive, Negative, Positive, Positive], &truth).unwrap(),
            0.75
        );
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[Positive], &truth).is_err());
    }

    #[test]
    fn empirical_rmse_examples() {
        let truth = GroundTruth::new(vec![0.2, 0.5, 0.7], vec![]).unwrap();
        assert_eq!(empirical_rmse(&truth.theta, &truth).unwrap(), 0.0);
        let shifted: Vec<f64> = truth.theta.iter().map(|t| t + 0.1).collect();
        assert!((empirical_rmse(&shifted, &truth).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cardinality_and_reproducibility() {
        let cfg = tiny();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, run_experiment(&cfg).unwrap());
        assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.accuracy) && r.empirical_rmse >= 0.0));
    }

    #[test]
    fn grid_order_is_model_major() {
        let cfg = ExperimentConfig {
            models: vec![GraphModel::ItemPA, GraphModel::Random],
            edge_counts: vec![20, 30],
            sample_counts: vec![50, 100],
            repetitions: 2,
            ..tiny()
        };
        let results = run_experiment(&cfg).unwrap();
        let got: Vec<_> = results
            .iter()
            .map(|r| (r.model, r.num_edges, r.n, r.repetition))
            .collect();
        assert_eq!(got, cfg.grid());
        assert_eq!(got[0], (GraphModel::ItemPA, 20, 50, 0));
        assert_eq!(got[15], (GraphModel::Random, 30, 100, 1));
    }

    #[test]
    fn aggregate_two_point_statistics() {
        let rows = aggregate(&[
            result(GraphModel::Random, 100, 0, 0.8),
            result(GraphModel::Random, 100, 1, 0.9),
        ])
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].acc_mean - 0.85).abs() < 1e-15);
        assert!((rows[0].acc_se - 0.05).abs() < 1e-15);

        let rows = aggregate(&[result(GraphModel::Random, 100, 0, 0.8)]).unwrap();
        assert_eq!(rows[0].acc_se, 0.0);
    }

    #[test]
    fn aggregate_reports_missing_tuples() {
        let err = aggregate(&[
            result(GraphModel::Random, 100, 0, 0.8),
            result(GraphModel::Random, 100, 1, 0.9),
            result(GraphModel::Random, 200, 0, 0.9),
        ])
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(rnd,10,200,1)"), "{msg}");

        let dup = aggregate(&[
            result(GraphModel::Random, 100, 0, 0.8),
            result(GraphModel::Random, 100, 0, 0.8),
        ]);
        assert!(matches!(dup, Err(Error::Validation(_))));
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn config_overrides() {
        let text = "# comment\nmodels = rnd, ripa\nedge_counts=100,200\nalpha=5\nbeta = 3 # trailing\nbase_seed=9\n";
        let cfg = ExperimentConfig::desk().with_overrides(text).unwrap();
        assert_eq!(cfg.models, vec![GraphModel::Random, GraphModel::ReviewerItemPA]);
        assert_eq!(cfg.edge_counts, vec![100, 200]);
        assert_eq!(cfg.prior, PriorParams::new(5.0, 3.0).unwrap());
        assert_eq!(cfg.em.prior, cfg.prior);
        assert_eq!(cfg.base_seed, 9);
        cfg.validate().unwrap();

        assert!(matches!(
            ExperimentConfig::desk().with_overrides("a=1\nbogus=2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::desk().with_overrides("repetitions=1\nedge_counts=1,x\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn validation_rejects_degenerate_configs() {
        let mut cfg = tiny();
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny();
        cfg.sample_counts.clear();
        assert!(cfg.validate().is_err());
        let cfg = tiny().with_overrides("alpha=2\nbeta=3").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cell_errors_name_the_tuple() {
        let cfg = ExperimentConfig {
            edge_counts: vec![1000],
            ..tiny()
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().contains("edges=1000"), "{err}");
    }

    #[test]
    fn presets() {
        assert_eq!(ExperimentConfig::preset("paper").unwrap().num_reviewers, 500);
        assert_eq!(ExperimentConfig::preset("desk").unwrap().repetitions, 20);
        assert!(ExperimentConfig::preset("huge").is_err());
    }
}
