//! Experiment configuration, synthetic fixtures and seeded sweep pipelines.

mod config;
mod fixture;
mod report;
mod run;

use thiserror::Error;

pub use config::{ChannelKind, ExperimentConfig, Pipeline};
pub use fixture::{generate_toy_fixture, Fixture, FixturePaths, FixtureSpec};
pub use report::{corpus_report, train_embeddings, CorpusReport, EmbeddingRun};
pub use run::{
    paired_difference, run, run_with, trial_seed, write_csv, Message, PointStats, Resources,
    ResultRow, RunOutput, CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("loading {what}: {msg}")]
    Load { what: String, msg: String },
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("sweep point {sweep}, trial {trial}: {msg}")]
    Trial {
        sweep: usize,
        trial: usize,
        msg: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
