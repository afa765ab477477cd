use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use semcom::harness::{
    corpus_report, generate_toy_fixture, run_with, train_embeddings, write_csv, ExperimentConfig,
    FixtureSpec, Pipeline, Resources,
};

/// Knowledge-graph semantic communication simulator.
#[derive(Parser)]
#[command(name = "semcom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (flat TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train ComplEx embeddings on the config's graph and save a checkpoint.
    TrainEmbeddings {
        #[command(flatten)]
        common: Common,
        /// Checkpoint path; defaults to the config's `model`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured sweep and write the results CSV.
    Run {
        #[command(flatten)]
        common: Common,
        /// Transmit without semantic correction.
        #[arg(long)]
        no_correction: bool,
        /// CSV path; defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Generate a synthetic graph, corpus, templates and user splits.
    Fixture {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        entities: usize,
        #[arg(long, default_value_t = 5)]
        relations: usize,
        #[arg(long, default_value_t = 200)]
        triplets: usize,
        #[arg(long, default_value_t = 2)]
        users: usize,
    },
    /// Print entropy and source-bit statistics of the config's corpus.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainEmbeddings { common, out } => {
            let cfg = common.load()?;
            let Some(path) = out.or_else(|| cfg.model.clone()) else {
                bail!("no checkpoint path: pass --out or set `model` in the config");
            };
            let mut cfg = cfg;
            if let Some(s) = common.seed {
                cfg.train_seed = Some(s);
            }
            let trained = train_embeddings(&cfg)?;
            trained
                .model
                .save(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "checkpoint\t{}", path.display())?;
            writeln!(stdout, "train_triplets\t{}", trained.train_triplets)?;
            if let Some(loss) = trained.final_loss {
                writeln!(stdout, "final_loss\t{loss}")?;
            }
            if let Some(r) = trained.heldout {
                writeln!(stdout, "heldout_queries\t{}", r.queries)?;
                writeln!(stdout, "mrr\t{}", r.mrr)?;
                writeln!(stdout, "hits@1\t{}", r.hits_at_1)?;
                writeln!(stdout, "hits@3\t{}", r.hits_at_3)?;
                writeln!(stdout, "hits@10\t{}", r.hits_at_10)?;
            }
        }
        Command::Run {
            common,
            no_correction,
            out,
            parallel,
        } => {
            let mut cfg = common.load()?;
            if no_correction {
                cfg.correction = false;
            }
            if parallel.is_some() {
                cfg.parallel = parallel;
            }
            cfg.validate()?;
            let target = out.or_else(|| cfg.output.take());
            let res = Resources::load(&cfg)?;
            let output = run_with(&cfg, &res)?;
            match target {
                Some(path) => {
                    let file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    write_csv(&output.rows, file)?;
                    log::info!("wrote {} rows to {}", output.rows.len(), path.display());
                }
                None => write_csv(&output.rows, io::stdout().lock())?,
            }
        }
        Command::Fixture {
            out,
            seed,
            entities,
            relations,
            triplets,
            users,
        } => {
            let spec = FixtureSpec {
                entities,
                relations,
                triplets,
                users,
            };
            let paths = generate_toy_fixture(&spec, seed)?.write(&out)?;
            println!("{}", paths.config.display());
        }
        Command::Report { common } => {
            let mut cfg = common.load()?;
            cfg.pipeline = Pipeline::Compression;
            let res = Resources::load(&cfg)?;
            let r = corpus_report(&res)?;
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "messages\t{}", r.messages)?;
            writeln!(stdout, "H(M)\t{:.6}", r.message_entropy)?;
            writeln!(stdout, "H(S)\t{:.6}", r.semantic_entropy)?;
            writeln!(stdout, "H(S|M)\t{:.6}", r.semantic_given_message)?;
            writeln!(stdout, "H(M|S)\t{:.6}", r.message_given_semantic)?;
            writeln!(stdout, "bits_semantic\t{}", r.bits_semantic)?;
            writeln!(stdout, "bits_fixed7\t{}", r.bits_fixed7)?;
            match r.bits_huffman {
                Some(b) => writeln!(stdout, "bits_huffman\t{b}")?,
                None => writeln!(stdout, "bits_huffman\t")?,
            }
            writeln!(
                stdout,
                "semantic_shorter\t{}/{}",
                r.semantic_shorter, r.messages
            )?;
        }
    }
    Ok(())
}
