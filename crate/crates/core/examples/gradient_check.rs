//! Analytic triplet gradients against central differences.

use intent_collections::corpus::{generate_synthetic_corpus, SyntheticConfig};
use intent_collections::encoder::{finite_diff_check, init_encoder};
use intent_collections::text::{build_vocab, render_product, render_query};

fn main() -> intent_collections::Result<()> {
    let bundle = generate_synthetic_corpus(&SyntheticConfig { n_products: 100, n_collections: 3, ..Default::default() })?;
    let vocab = build_vocab(&bundle, 1)?;
    let c = &bundle.collections[0];
    let query = render_query(&c.title, &c.sections[0].name, c.start_date);
    let positive = render_product(bundle.product(&c.sections[0].product_ids[0]).unwrap());
    let negative = render_product(&bundle.products[99]);

    for dim in [4, 64] {
        let params = init_encoder(vocab.len(), dim, 11)?;
        // a large margin keeps the hinge active at initialization
        let check = finite_diff_check(&params, [&query, &positive, &negative], &vocab, 5.0, 1e-6)?;
        println!("d = {dim:>2}: {} coordinates, max relative error {:.2e}, {} near the hinge",
            check.n_checked, check.max_rel_error, check.n_kink);
    }
    Ok(())
}
