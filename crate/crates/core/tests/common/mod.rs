#![allow(dead_code)]

use std::path::Path;

use intent_collections::cli::RunConfig;

/// A corpus and training budget small enough for a few seconds per pipeline.
pub fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_preset("hard15", 7).unwrap();
    cfg.out = out.to_path_buf();
    cfg.corpus.n_products = 300;
    cfg.corpus.n_collections = 12;
    cfg.train.max_steps = 200;
    cfg.train.eval_interval = 100;
    cfg
}

pub fn bin() -> std::process::Command {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_intentcol"));
    cmd.env("RUST_LOG", "warn");
    cmd
}
