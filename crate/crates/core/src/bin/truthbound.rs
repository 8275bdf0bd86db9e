use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use truthbound::em::SavedEstimate;
use truthbound::experiments::{aggregate, run_experiment, write_csv, write_details_csv, ExperimentConfig};
use truthbound::fisher::{bcrlb_report, observed_information};
use truthbound::graph::{generate_graph, BipartiteGraph, GraphModel};
use truthbound::seed::stream_seed;
use truthbound::synthesis::{generate_reviews, sample_ground_truth, PriorParams, ReviewSamples};
use truthbound::{run_em, EmConfig, Result};

#[derive(Parser)]
#[command(name = "truthbound", version, about = "Review-system truth inference and estimation-error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reviewer-item bipartite graph.
    Generate {
        #[arg(long, value_parser = parse_model)]
        model: GraphModel,
        #[arg(long)]
        reviewers: usize,
        /// Defaults to the number of reviewers.
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw ground truth and review samples on a graph.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_truth: PathBuf,
        #[arg(long)]
        out_reviews: PathBuf,
    },
    /// Estimate reviewer reliabilities and item labels with EM.
    Infer {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-reviewer information and RMSE lower bounds for an estimate.
    Bounds {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the topology comparison grid and write aggregated CSV.
    #[command(group(ArgGroup::new("source").required(true).multiple(true).args(["config", "preset"])))]
    Experiment {
        /// key=value file; applied on top of --preset (or desk).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = ["desk", "paper"])]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write one row per run.
        #[arg(long)]
        details: Option<PathBuf>,
    },
}

fn parse_model(s: &str) -> std::result::Result<GraphModel, String> {
    s.parse().map_err(|e: truthbound::Error| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            model,
            reviewers,
            items,
            edges,
            seed,
            out,
        } => {
            let g = generate_graph(model, reviewers, items.unwrap_or(reviewers), edges, seed)?;
            g.save(out)?;
        }
        Command::Simulate {
            graph,
            alpha,
            beta,
            samples,
            seed,
            out_truth,
            out_reviews,
        } => {
            let g = BipartiteGraph::load(graph)?;
            let prior = PriorParams::new(alpha, beta)?;
            prior.check_majority_reliable()?;
            let truth = sample_ground_truth(&g, &prior, stream_seed(seed, 2))?;
            let reviews = generate_reviews(&g, &truth, samples, stream_seed(seed, 3))?;
            truth.save(out_truth)?;
            reviews.save(out_reviews)?;
        }
        Command::Infer {
            graph,
            reviews,
            alpha,
            beta,
            tol,
            max_iters,
            out,
        } => {
            let g = BipartiteGraph::load(graph)?;
            let r = ReviewSamples::load(reviews)?;
            let cfg = EmConfig {
                tolerance: tol,
                max_iterations: max_iters,
                ..EmConfig::new(PriorParams::new(alpha, beta)?)
            };
            let est = run_em(&g, &r, &cfg)?;
            est.save(out)?;
            eprintln!(
                "EM finished after {} iterations (converged: {})",
                est.iterations, est.converged
            );
        }
        Command::Bounds {
            estimate,
            alpha,
            beta,
            out,
        } => {
            let est = SavedEstimate::load(estimate)?;
            let prior = PriorParams::new(alpha, beta)?;
            let info = observed_information(&est.theta_hat, &prior)?;
            let report = bcrlb_report(&info)?;
            let mut w = BufWriter::new(File::create(out)?);
            writeln!(w, "reviewer,theta_hat,information,mse_lower,rmse_lower")?;
            for (u, t) in est.theta_hat.iter().enumerate() {
                writeln!(
                    w,
                    "{u},{t:.12e},{:.12e},{:.12e},{:.12e}",
                    info.diagonal()[u],
                    report.mse_lower[u],
                    report.rmse_lower[u]
                )?;
            }
            writeln!(w, "mean,,,,{:.12e}", report.mean_rmse_lower)?;
            w.flush()?;
        }
        Command::Experiment {
            config,
            preset,
            out,
            details,
        } => {
            let mut cfg = ExperimentConfig::preset(preset.as_deref().unwrap_or("desk"))?;
            if let Some(path) = config {
                cfg = cfg.with_overrides(&fs::read_to_string(path)?)?;
            }
            let results = run_experiment(&cfg)?;
            write_csv(&aggregate(&results)?, out)?;
            if let Some(path) = details {
                write_details_csv(&results, path)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
