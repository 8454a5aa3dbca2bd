use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use intent_collections::cli::serve::{serve, ServeState};
use intent_collections::cli::{self, Layout, RunConfig};
use intent_collections::Result;

#[derive(Parser)]
#[command(name = "intentcol", version, about = "Intent-based product collection retrieval")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// easy0, hard0, hard15, hard40 or hard55.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluation cutoff, or result count for `retrieve`.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Augmentation ratio, overriding the preset.
    #[arg(long, global = true)]
    aug: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, or copy the configured one.
    GenCorpus,
    /// Build the vocabulary and triplet dataset.
    BuildDataset,
    Train,
    /// Embed every product with the trained checkpoint.
    Index,
    /// Offline recall/precision of the trained checkpoint.
    Eval,
    /// Offline recall/precision of BM25.
    Baseline,
    /// Print the top-k products for a query.
    Retrieve {
        #[arg(long)]
        query: String,
        #[arg(long)]
        category: Option<String>,
    },
    /// Loss and metric curves plus statistics tables.
    Report,
    /// The whole pipeline.
    Run,
    /// HTTP retrieval service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.preset {
        cfg.apply_preset(p)?;
    }
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(a) = cli.aug {
        cfg.aug_ratio = a;
    }
    if let Some(k) = cli.k {
        cfg.eval.k = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    match cli.command {
        Command::GenCorpus => println!("{}", cli::cmd_gen_corpus(&cfg)?),
        Command::BuildDataset => println!("{}", serde_json::to_string_pretty(&cli::cmd_build_dataset(&cfg)?)?),
        Command::Train => {
            let s = cli::cmd_train(&cfg)?;
            println!("trained {} steps, loss {:?} -> {:?}", s.steps, s.first_loss, s.last_loss);
        }
        Command::Index => {
            let index = cli::cmd_index(&cfg)?;
            println!("indexed {} products (d = {})", index.len(), index.dim());
        }
        Command::Eval => print!("{}", cli::cmd_eval(&cfg)?.to_table()),
        Command::Baseline => print!("{}", cli::cmd_baseline(&cfg)?.to_table()),
        Command::Retrieve { query, category } => {
            let k = cli.k.unwrap_or(10);
            for (rank, (id, score)) in cli::cmd_retrieve(&cfg, &query, k, category.as_deref())?.iter().enumerate() {
                println!("{:>3}  {id}  {score:.6}", rank + 1);
            }
        }
        Command::Report => {
            for path in cli::cmd_report(&cfg)? {
                println!("{}", path.display());
            }
        }
        Command::Run => {
            let s = cli::cmd_run(&cfg)?;
            print!("{}{}", s.encoder.to_table(), s.baseline.to_table());
        }
        Command::Serve { port } => {
            let layout = Layout::new(&cfg.out);
            let state = ServeState::load(&layout.index(), &layout.checkpoint(), &layout.vocab())?;
            tokio::runtime::Runtime::new()?.block_on(serve(state, port))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
