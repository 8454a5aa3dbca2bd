//! Train the mean-pooled encoder on hard0 triplets and watch the loss and
//! recall move.
//!
//! ```text
//! cargo run --release --example train_encoder -- 2000
//! ```

use intent_collections::cli::pipeline::{eval_suite, prepare, train_with_eval};
use intent_collections::cli::RunConfig;
use intent_collections::corpus::generate_synthetic_corpus;

fn main() -> intent_collections::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut cfg = RunConfig::from_preset("hard0", 7)?;
    cfg.train.max_steps = steps;
    cfg.train.eval_interval = (steps / 5).max(1);

    let bundle = generate_synthetic_corpus(&cfg.corpus)?;
    let prepared = prepare(&cfg, &bundle)?;
    println!("{} triplets, vocabulary {}", prepared.dataset.len(), prepared.vocab.len());
    let suite = eval_suite(&cfg, &bundle)?;
    let trained = train_with_eval(&cfg, &prepared.dataset, &prepared.vocab, Some(&suite))?;

    let curve = &trained.output.curve;
    let window = (steps / 10).max(1);
    for chunk in curve.chunks(window) {
        let mean = chunk.iter().map(|c| c.1).sum::<f64>() / chunk.len() as f64;
        println!("step {:>6}  loss {mean:.4}", chunk[0].0);
    }
    for p in &trained.eval_curve {
        println!("step {:>6}  recall@{} {:.4}  precision {:?}", p.step, cfg.eval.k, p.recall, p.precision);
    }
    Ok(())
}
