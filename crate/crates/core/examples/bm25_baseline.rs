//! The lexical baseline: BM25 over rendered products, queried with a
//! collection's title and section.

use intent_collections::bm25::default_stopwords;
use intent_collections::cli::pipeline::{bm25_over, eval_suite};
use intent_collections::cli::RunConfig;
use intent_collections::corpus::generate_synthetic_corpus;
use intent_collections::text::render_query;

fn main() -> intent_collections::Result<()> {
    let cfg = RunConfig::default();
    let bundle = generate_synthetic_corpus(&cfg.corpus)?;
    let index = bm25_over(&bundle.products)?;
    println!("{} docs, {} terms, avg length {:.1}", index.n_docs(), index.n_terms(), index.avg_doc_len());

    // first query that still shares words with its products; paraphrased
    // titles often match nothing at all
    let stop = default_stopwords();
    let (_, s, query, hits) = bundle
        .collections
        .iter()
        .flat_map(|c| c.sections.iter().map(move |s| (c, s)))
        .map(|(c, s)| {
            let query = render_query(&c.title, &s.name, c.start_date);
            let hits = index.search(&query, 10, &stop, true);
            (c, s, query, hits)
        })
        .find(|(_, _, _, hits)| hits.len() == 10)
        .expect("some lexical overlap");
    println!("\n{query}");
    for (id, score) in &hits {
        let member = if s.product_ids.contains(id) { "*" } else { " " };
        println!("  {member} {id}  {score:7.3}  {}", bundle.product(id).unwrap().title);
    }

    let report = eval_suite(&cfg, &bundle)?.evaluate_bm25()?.with_identity("BM25", 0);
    print!("\n{}", report.to_table());
    Ok(())
}
