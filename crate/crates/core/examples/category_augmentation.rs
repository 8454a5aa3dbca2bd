//! Category-wise augmentation: a multi-category collection becomes one
//! collection per leaf category, and the section name becomes the category.

use intent_collections::corpus::{generate_synthetic_corpus, SyntheticConfig};
use intent_collections::dataset::augment_category_wise;
use intent_collections::text::render_query;

fn main() -> intent_collections::Result<()> {
    let bundle = generate_synthetic_corpus(&SyntheticConfig { n_collections: 20, ..Default::default() })?;
    let augmented = augment_category_wise(&bundle, 0.4, 3)?;
    println!("{} collections -> {}", bundle.collections.len(), augmented.len());

    for c in augmented.iter().filter(|c| c.augmented_category.is_some()).take(4) {
        let s = &c.sections[0];
        println!("{:<18} {:>3} products  {}", c.collection_id, s.product_ids.len(), render_query(&c.title, &s.name, c.start_date));
    }
    Ok(())
}
