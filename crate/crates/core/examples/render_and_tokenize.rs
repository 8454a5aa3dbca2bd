//! Query and product text rendering, vocabulary, subword tokenization.

use intent_collections::corpus::{generate_synthetic_corpus, SyntheticConfig};
use intent_collections::text::{build_vocab, render_product, render_query, tokenize};

fn main() -> intent_collections::Result<()> {
    let bundle = generate_synthetic_corpus(&SyntheticConfig { n_products: 300, n_collections: 8, ..Default::default() })?;
    let vocab = build_vocab(&bundle, 1)?;
    println!("vocabulary: {} tokens", vocab.len());

    let c = &bundle.collections[0];
    let query = render_query(&c.title, &c.sections[0].name, c.start_date);
    let product = render_product(bundle.product(&c.sections[0].product_ids[0]).unwrap());
    for text in [query.as_str(), product.as_str()] {
        let seq = tokenize(text, &vocab);
        let pieces: Vec<&str> = seq.ids.iter().map(|&i| vocab.token(i).unwrap()).collect();
        println!("\n{text}\n  -> {pieces:?}");
    }

    // unseen words fall back to the longest known pieces, then [UNK]
    let seq = tokenize("pantsskirts qqq", &vocab);
    println!("\n{:?}", seq.ids.iter().map(|&i| vocab.token(i).unwrap()).collect::<Vec<_>>());
    Ok(())
}
