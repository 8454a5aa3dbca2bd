//! Recall@100 / Precision@100 tables for a trained model and BM25 on the
//! same tasks.
//!
//! ```text
//! cargo run --release --example offline_eval -- hard15 7
//! ```

use intent_collections::cli::pipeline::{load_or_generate, run_experiment};
use intent_collections::cli::RunConfig;

fn main() -> intent_collections::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "hard15".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = RunConfig::from_preset(&preset, seed)?;
    let bundle = load_or_generate(&cfg)?;
    let exp = run_experiment(&cfg, &bundle, false)?;
    print!("{}\n{}", exp.encoder_report.to_table(), exp.bm25_report.to_table());
    print!("\n{}", exp.encoder_report.to_csv());
    Ok(())
}
