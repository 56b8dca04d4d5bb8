//! Inspect what the attention mechanisms learned: train briefly on a
//! fixture where one relation is much more label-informative than the
//! other, then print the per-relation fusion weights and a sample of
//! neighbor attention distributions.

use hinbot::graph::NeighborIndex;
use hinbot::model::{ModelConfig, ModelState, TrainConfig};
use hinbot::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = synth::fixture("hetero-two-relations").expect("known preset");
    let graph = synth::generate(&spec)?;
    let index = NeighborIndex::build(&graph);
    let names = graph.relation_names();

    let config = ModelConfig {
        hidden: 32,
        rgt_heads: 4,
        semantic_heads: 4,
        relations: names.clone(),
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        max_epochs: 30,
        seed: 42,
        ..TrainConfig::default()
    };
    let mut model = ModelState::new(config, graph.feature_dim(), train.seed)?;
    let report = model.train(&graph, &index, &train)?;
    println!("test accuracy {:.3}\n", report.test.accuracy);

    let cache = model.forward(&graph, &index, false)?;
    println!("relation weights (mean over fusion heads):");
    for (l, lc) in cache.layers.iter().enumerate() {
        let beta = &lc.semantic.as_ref().expect("semantic fusion").weights.beta;
        for (r, name) in names.iter().enumerate() {
            let mean: f64 =
                (0..beta.rows()).map(|d| beta.get(d, r)).sum::<f64>() / beta.rows() as f64;
            println!("  layer {l}  {name:<10} {mean:.3}");
        }
    }

    // Neighbor attention for the first target with at least three
    // in-neighbors under the first relation.
    let target = (0..graph.num_nodes())
        .find(|&i| index.neighbors(0, i).len() >= 3)
        .expect("some node has neighbors");
    let js = index.neighbors(0, target);
    let off = index.edge_offset(0, target);
    let alpha = &cache.layers[0].rgt.relations[0].alpha[0];
    println!(
        "\nlayer 0, {}, head 0: attention over node {target}'s {} in-neighbors:",
        names[0],
        js.len()
    );
    for (t, &j) in js.iter().enumerate() {
        println!("  {j:>4} -> {target}: {:.4}", alpha[off + t]);
    }
    let sum: f64 = (0..js.len()).map(|t| alpha[off + t]).sum();
    println!("  (sums to {sum:.6})");
    Ok(())
}
