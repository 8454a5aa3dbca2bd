//! Exact cosine top-k over a trained index, with and without a category
//! filter.

use intent_collections::cli::pipeline::{prepare, train_with_eval};
use intent_collections::cli::RunConfig;
use intent_collections::corpus::generate_synthetic_corpus;
use intent_collections::retrieval::{build_embedding_index, embed_query};

fn main() -> intent_collections::Result<()> {
    let mut cfg = RunConfig::from_preset("hard40", 7)?;
    cfg.train.max_steps = 3000;
    let bundle = generate_synthetic_corpus(&cfg.corpus)?;
    let prepared = prepare(&cfg, &bundle)?;
    let params = train_with_eval(&cfg, &prepared.dataset, &prepared.vocab, None)?.output.params;
    let index = build_embedding_index(&params, &prepared.vocab, &bundle.products)?;

    let c = &bundle.collections[0];
    let query = format!("{} [SEP] {}", c.title, c.sections[0].name);
    let q = embed_query(&params, &prepared.vocab, &query)?;
    println!("{query}");
    for filter in [None, Some("skirts")] {
        println!("\ncategory filter {filter:?}");
        for (id, score) in index.retrieve_topk(&q.0, 5, filter)? {
            let member = if c.member_ids().contains(id.as_str()) { "*" } else { " " };
            println!("  {member} {id}  {score:.4}  {}", index.category(&id).unwrap());
        }
    }
    Ok(())
}
