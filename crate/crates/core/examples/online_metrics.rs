//! CTR, CVR and order diversity from simulated traffic, and the score of
//! model-built collections relative to expert-built ones.

use intent_collections::eval::{compute_online_metrics, relative_score, simulate_interactions, SimulationConfig};

fn main() -> intent_collections::Result<()> {
    // ranked (product, similarity) lists; the "model" lists are slightly closer matches
    let ranked = |name: &str, base: f64| {
        let items = (0..40).map(|i| (format!("{name}-p{i}"), base - i as f64 * 0.005)).collect();
        (name.to_string(), items)
    };
    let expert = vec![ranked("expert-a", 0.6), ranked("expert-b", 0.55)];
    let model = vec![ranked("model-a", 0.7), ranked("model-b", 0.62)];

    let cfg = SimulationConfig { views_per_collection: 20_000, ..Default::default() };
    let mut per_side = Vec::new();
    for side in [&expert, &model] {
        let logs = simulate_interactions(side, &cfg)?;
        let metrics: Vec<_> = logs.iter().map(compute_online_metrics).collect::<Result<_, _>>()?;
        for (l, m) in logs.iter().zip(&metrics) {
            println!("{:<9} views {} clicks {:>5} purchases {:>4}  ctr {:.4} cvr {:.4} diversity {:.3}",
                l.collection_id, l.views, l.clicks, l.purchases, m.ctr, m.cvr, m.order_diversity);
        }
        per_side.push(metrics);
    }
    let pick = |i: usize, f: fn(&intent_collections::eval::OnlineMetrics) -> f64| -> Vec<f64> { per_side[i].iter().map(f).collect() };
    println!("\nrelative CTR {:.3}", relative_score(&pick(1, |m| m.ctr), &pick(0, |m| m.ctr))?);
    println!("relative CVR {:.3}", relative_score(&pick(1, |m| m.cvr), &pick(0, |m| m.cvr))?);
    println!("relative order diversity {:.3}", relative_score(&pick(1, |m| m.order_diversity), &pick(0, |m| m.order_diversity))?);
    Ok(())
}
