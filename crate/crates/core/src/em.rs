//! MAP estimation of reviewer reliabilities by expectation-maximization.
//!
//! Item labels are the latent variables. Given reliabilities `theta`, the
//! E-step computes each item's label posterior independently:
//!
//! ```text
//! mu_i(x) ∝ P(z_i = x) · Π_{u ∈ V_i} theta_u^{n_ui^x} (1 - theta_u)^{n_ui^{-x}}
//! ```
//!
//! and the M-step maximizes the expected complete-data log posterior under a
//! Beta(alpha, beta) prior, which has the closed form
//!
//! ```text
//! theta_u = (Σ_i Σ_x n_ui^x mu_i(x) + alpha - 1) / (|R_u| + alpha + beta - 2)
//! ```
//!
//! Because items decouple given `theta`, the marginal log posterior
//! `log P(theta | R)` is also available exactly (up to a constant); see
//! [`exact_log_posterior`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{parse_err, Error, Result};
use crate::graph::BipartiteGraph;
use crate::synthesis::{PriorParams, ReviewSamples};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub prior: PriorParams,
    /// P(z_i = +1) for every item.
    pub label_prior_plus: f64,
    /// Stop once max_u |theta_new - theta_old| falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl EmConfig {
    pub fn new(prior: PriorParams) -> Self {
        Self {
            prior,
            label_prior_plus: 0.5,
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be at least 1".into()));
        }
        if !(self.label_prior_plus > 0.0 && self.label_prior_plus < 1.0) {
            return Err(Error::Parameter(format!(
                "label_prior_plus must lie in (0, 1), got {}",
                self.label_prior_plus
            )));
        }
        Ok(())
    }
}

impl Default for EmConfig {
    fn default() -> Self {
        Self::new(PriorParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemPosterior {
    pub plus: f64,
    pub minus: f64,
}

/// Per-item label posteriors `mu_i(+1), mu_i(-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPosterior(pub Vec<ItemPosterior>);

impl LabelPosterior {
    pub fn items(&self) -> &[ItemPosterior] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmEstimate {
    pub theta_hat: Vec<f64>,
    pub posterior: LabelPosterior,
    pub iterations: usize,
    pub converged: bool,
    /// max_u |theta change| after each iteration.
    pub delta_trace: Vec<f64>,
}

/// Review counts indexed both ways. Only pairs with at least one review are
/// kept; unreviewed edges contribute a factor of one everywhere.
struct ReviewTable {
    by_item: Vec<Vec<(usize, f64, f64)>>,
    by_reviewer: Vec<Vec<(usize, f64, f64)>>,
}

impl ReviewTable {
    fn build(g: &BipartiteGraph, r: &ReviewSamples) -> Result<Self> {
        r.validate_against(g)?;
        let mut by_item = vec![Vec::new(); g.num_items()];
        let mut by_reviewer = vec![Vec::new(); g.num_reviewers()];
        for (&(u, i), c) in r.counts() {
            let (p, m) = (c.plus as f64, c.minus as f64);
            by_item[i.0].push((u.0, p, m));
            by_reviewer[u.0].push((i.0, p, m));
        }
        Ok(Self {
            by_item,
            by_reviewer,
        })
    }
}

fn check_theta(g: &BipartiteGraph, theta: &[f64]) -> Result<()> {
    if theta.len() != g.num_reviewers() {
        return Err(Error::Parameter(format!(
            "theta has {} entries, graph has {} reviewers",
            theta.len(),
            g.num_reviewers()
        )));
    }
    match theta.iter().position(|&t| !(t > 0.0 && t < 1.0)) {
        Some(u) => Err(Error::Domain(format!(
            "theta[{u}] = {} is not strictly inside (0, 1)",
            theta[u]
        ))),
        None => Ok(()),
    }
}

/// Unnormalized log mass of z_i = +1 and z_i = -1 for every item.
fn item_log_masses(table: &ReviewTable, theta: &[f64], cfg: &EmConfig) -> Vec<(f64, f64)> {
    let ln_t: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    let ln_f: Vec<f64> = theta.iter().map(|t| (-t).ln_1p()).collect();
    let (prior_p, prior_m) = (cfg.label_prior_plus.ln(), (-cfg.label_prior_plus).ln_1p());
    table
        .by_item
        .iter()
        .map(|reviews| {
            reviews
                .iter()
                .fold((prior_p, prior_m), |(lp, lm), &(u, np, nm)| {
                    (
                        lp + np * ln_t[u] + nm * ln_f[u],
                        lm + nm * ln_t[u] + np * ln_f[u],
                    )
                })
        })
        .collect()
}

fn normalize(lp: f64, lm: f64) -> ItemPosterior {
    let top = lp.max(lm);
    let (a, b) = ((lp - top).exp(), (lm - top).exp());
    let s = a + b;
    ItemPosterior {
        plus: a / s,
        minus: b / s,
    }
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let top = a.max(b);
    top + ((a - top).exp() + (b - top).exp()).ln()
}

fn e_step_table(table: &ReviewTable, theta: &[f64], cfg: &EmConfig) -> LabelPosterior {
    LabelPosterior(
        item_log_masses(table, theta, cfg)
            .into_iter()
            .map(|(lp, lm)| normalize(lp, lm))
            .collect(),
    )
}

fn m_step_table(table: &ReviewTable, mu: &LabelPosterior, prior: &PriorParams) -> Vec<f64> {
    let (a1, b1) = (prior.alpha() - 1.0, prior.beta() - 1.0);
    table
        .by_reviewer
        .iter()
        .map(|reviews| {
            let (agree, total) = reviews.iter().fold((0.0, 0.0), |(agree, total), &(i, np, nm)| {
                let m = mu.0[i];
                (agree + np * m.plus + nm * m.minus, total + np + nm)
            });
            (agree + a1) / (total + a1 + b1)
        })
        .collect()
}

/// Label posteriors given reliabilities `theta`.
pub fn e_step(
    g: &BipartiteGraph,
    r: &ReviewSamples,
    theta: &[f64],
    cfg: &EmConfig,
) -> Result<LabelPosterior> {
    cfg.validate()?;
    check_theta(g, theta)?;
    let table = ReviewTable::build(g, r)?;
    Ok(e_step_table(&table, theta, cfg))
}

/// Closed-form reliability update given label posteriors.
pub fn m_step(
    g: &BipartiteGraph,
    r: &ReviewSamples,
    mu: &LabelPosterior,
    cfg: &EmConfig,
) -> Result<Vec<f64>> {
    if mu.len() != g.num_items() {
        return Err(Error::Parameter(format!(
            "posterior covers {} items, graph has {}",
            mu.len(),
            g.num_items()
        )));
    }
    let table = ReviewTable::build(g, r)?;
    Ok(m_step_table(&table, mu, &cfg.prior))
}

/// `log P(theta | R)` up to an additive constant independent of `theta`.
pub fn exact_log_posterior(
    g: &BipartiteGraph,
    r: &ReviewSamples,
    theta: &[f64],
    cfg: &EmConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_theta(g, theta)?;
    let table = ReviewTable::build(g, r)?;
    Ok(log_posterior_table(&table, theta, cfg))
}

fn log_posterior_table(table: &ReviewTable, theta: &[f64], cfg: &EmConfig) -> f64 {
    let (a1, b1) = (cfg.prior.alpha() - 1.0, cfg.prior.beta() - 1.0);
    let prior: f64 = theta.iter().map(|t| a1 * t.ln() + b1 * (-t).ln_1p()).sum();
    let data: f64 = item_log_masses(table, theta, cfg)
        .into_iter()
        .map(|(lp, lm)| log_sum_exp2(lp, lm))
        .sum();
    prior + data
}

/// Run EM from the prior mean until the largest reliability change drops
/// below `cfg.tolerance` or `cfg.max_iterations` is reached.
pub fn run_em(g: &BipartiteGraph, r: &ReviewSamples, cfg: &EmConfig) -> Result<EmEstimate> {
    run_em_observed(g, r, cfg, |_| {})
}

/// Like [`run_em`], calling `observe` with the reliabilities before the
/// first iteration and after every iteration.
pub fn run_em_observed<F>(
    g: &BipartiteGraph,
    r: &ReviewSamples,
    cfg: &EmConfig,
    mut observe: F,
) -> Result<EmEstimate>
where
    F: FnMut(&[f64]),
{
    cfg.validate()?;
    let table = ReviewTable::build(g, r)?;
    let mut theta = vec![cfg.prior.mean(); g.num_reviewers()];
    observe(&theta);
    let mut delta_trace = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let mu = e_step_table(&table, &theta, cfg);
        let next = m_step_table(&table, &mu, &cfg.prior);
        let delta = theta
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta = next;
        delta_trace.push(delta);
        observe(&theta);
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let posterior = e_step_table(&table, &theta, cfg);
    Ok(EmEstimate {
        iterations: delta_trace.len(),
        theta_hat: theta,
        posterior,
        converged,
        delta_trace,
    })
}

/// The parts of an [`EmEstimate`] that are written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedEstimate {
    pub theta_hat: Vec<f64>,
    pub mu_plus: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmEstimate {
    /// Text columns: a header
    /// `reviewers <n> items <m> iterations <k> converged <0|1>`, then
    /// `theta <u> <theta_hat>` per reviewer and `mu_plus <i> <mu>` per item.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "reviewers {} items {} iterations {} converged {}",
            self.theta_hat.len(),
            self.posterior.len(),
            self.iterations,
            u8::from(self.converged)
        )?;
        for (u, t) in self.theta_hat.iter().enumerate() {
            writeln!(w, "theta {u} {t}")?;
        }
        for (i, m) in self.posterior.items().iter().enumerate() {
            writeln!(w, "mu_plus {i} {}", m.plus)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }
}

impl SavedEstimate {
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.as_ref().map(|s| s.trim().is_empty()).unwrap_or(false) => {}
                Some((_, l)) => break l?,
                None => return Err(parse_err(1, "missing header")),
            }
        };
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 8
            || f[0] != "reviewers"
            || f[2] != "items"
            || f[4] != "iterations"
            || f[6] != "converged"
        {
            return Err(parse_err(
                1,
                "expected `reviewers <n> items <m> iterations <k> converged <0|1>`",
            ));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err(1, format!("bad number {s:?}")));
        let (nr, ni, iterations) = (num(f[1])?, num(f[3])?, num(f[5])?);
        let converged = match f[7] {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(1, format!("bad converged flag {other:?}"))),
        };

        let mut theta_hat = vec![f64::NAN; nr];
        let mut mu_plus = vec![f64::NAN; ni];
        for (k, line) in lines {
            let k = k + 1;
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 3 {
                return Err(parse_err(k, format!("expected 3 fields, got {line:?}")));
            }
            let idx: usize = f[1].parse().map_err(|_| parse_err(k, "bad index"))?;
            let v: f64 = f[2].parse().map_err(|_| parse_err(k, "bad value"))?;
            let slot = match f[0] {
                "theta" => theta_hat.get_mut(idx),
                "mu_plus" => mu_plus.get_mut(idx),
                other => return Err(parse_err(k, format!("unknown record {other:?}"))),
            };
            *slot.ok_or_else(|| Error::Validation(format!("line {k}: index {idx} out of range")))? = v;
        }
        if theta_hat.iter().chain(&mu_plus).any(|v| v.is_nan()) {
            return Err(Error::Validation("estimate file is missing entries".into()));
        }
        Ok(Self {
            theta_hat,
            mu_plus,
            iterations,
            converged,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
