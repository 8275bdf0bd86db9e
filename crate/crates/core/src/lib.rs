//! Truth inference for online review systems whose reviewers can only reach
//! a subset of items.
//!
//! The crate covers the whole pipeline:
//!
//! - [`graph`]: reviewer-item bipartite topologies (uniform and
//!   preferential-attachment generators) and their text format.
//! - [`synthesis`]: ground-truth reliabilities and labels, and review
//!   samples drawn with replacement along graph edges.
//! - [`em`]: MAP estimation of reviewer reliabilities by EM with a Beta
//!   prior, plus the exact log posterior used to check it.
//! - [`fisher`]: observed Fisher information at the MAP point and the
//!   resulting RMSE lower bounds.
//! - [`experiments`]: the accuracy / bound experiments across topologies,
//!   with deterministic seeding and CSV output.

pub mod em;
pub mod error;
pub mod experiments;
pub mod fisher;
pub mod graph;
pub mod seed;
pub mod synthesis;

pub use em::{
    e_step, exact_log_posterior, m_step, run_em, run_em_observed, EmConfig, EmEstimate,
    ItemPosterior, LabelPosterior, SavedEstimate,
};
pub use error::{Error, Result};
pub use experiments::{
    accuracy, aggregate, cell_seed, classify_items, empirical_rmse, run_experiment, write_csv,
    write_details_csv, AggregateRow, ExperimentConfig, RunResult,
};
pub use fisher::{bcrlb_report, observed_information, theta_star, BoundReport, ObservedInformation};
pub use graph::{generate_graph, BipartiteGraph, GraphModel, ItemId, ReviewerId};
pub use synthesis::{
    generate_reviews, sample_ground_truth, EdgeCounts, GroundTruth, Label, PriorParams,
    ReviewSamples,
};
