//! Reorder retrieved products with a least-squares fit on popularity and
//! review count.

use intent_collections::corpus::{generate_synthetic_corpus, SyntheticConfig};
use intent_collections::eval::{reorder_products, Features};

fn main() -> intent_collections::Result<()> {
    let bundle = generate_synthetic_corpus(&SyntheticConfig { n_products: 200, n_collections: 4, ..Default::default() })?;
    let features = |i: usize| {
        let p = &bundle.products[i];
        (p.product_id.clone(), Features { popularity: p.popularity, review_count: p.review_count as f64 })
    };
    // made-up relevance labels: popular and well-reviewed products did well
    let training: Vec<(Features, f64)> = (0..150)
        .map(|i| {
            let (_, f) = features(i);
            (f, 2.0 * f.popularity + 0.004 * f.review_count)
        })
        .collect();
    let candidates: Vec<_> = (150..160).map(features).collect();
    let out = reorder_products(&candidates, &training)?;
    println!("coefficients {:?}", out.coefficients);
    for id in &out.order {
        let (_, f) = candidates.iter().find(|(c, _)| c == id).unwrap();
        println!("  {id}  popularity {:.3}  reviews {:>3}", f.popularity, f.review_count);
    }
    Ok(())
}
