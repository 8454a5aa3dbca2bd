//! Generate the synthetic catalog and look at one planted collection.
//!
//! ```text
//! cargo run --release --example synthetic_corpus
//! ```

use intent_collections::corpus::{corpus_stats, generate_synthetic_corpus, SyntheticConfig};

fn main() -> intent_collections::Result<()> {
    let bundle = generate_synthetic_corpus(&SyntheticConfig::default())?;
    println!("{}\n", corpus_stats(&bundle));

    let c = &bundle.collections[0];
    let truth = &bundle.planted_truth.as_ref().expect("synthetic")[&c.collection_id];
    println!("{}  \"{}\"  starts {}", c.collection_id, c.title, c.start_date);
    println!("planted intent: {:?}", truth.intent_tokens);
    for s in &c.sections {
        println!("  section \"{}\": {} products", s.name, s.product_ids.len());
    }

    // members carry some of the intent tokens; the title may paraphrase them
    for id in c.sections[0].product_ids.iter().take(3) {
        let p = bundle.product(id).unwrap();
        println!("  {id}  {}  tags {:?}", p.title, p.tags);
    }
    Ok(())
}
