//! BM25-mined hard negatives next to same-category random negatives for
//! one positive pair.

use intent_collections::cli::pipeline::bm25_over;
use intent_collections::corpus::{generate_synthetic_corpus, SyntheticConfig};
use intent_collections::dataset::{build_triplets, decompose_positive_pairs, NegSamplingConfig, NegativeSource};

fn main() -> intent_collections::Result<()> {
    let bundle = generate_synthetic_corpus(&SyntheticConfig::default())?;
    let bm25 = bm25_over(&bundle.products)?;
    let pairs = decompose_positive_pairs(&bundle, None, 1);
    let ds = build_triplets(&pairs[..1], &bundle, &bm25, &NegSamplingConfig { n_random_same_category: 3, n_bm25: 5, seed: 1 })?;

    let first = &ds.examples[0];
    println!("query:    {}", first.query_text);
    println!("positive: {}\n", first.positive_text);
    for e in &ds.examples {
        let tag = match e.negative_source {
            NegativeSource::RandomCategory => "random",
            NegativeSource::Bm25 => "bm25  ",
        };
        println!("{tag} {}  {}", e.negative_product_id, e.negative_text);
    }
    Ok(())
}
