//! How little labeled data is enough? Train with progressively smaller
//! fractions of the training split and watch test accuracy degrade
//! gracefully rather than collapse.

use hinbot::graph::NeighborIndex;
use hinbot::model::{ModelConfig, ModelState, TrainConfig};
use hinbot::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = synth::fixture("hetero-two-relations").expect("known preset");
    let graph = synth::generate(&spec)?;
    let index = NeighborIndex::build(&graph);

    let config = ModelConfig {
        hidden: 32,
        rgt_heads: 4,
        semantic_heads: 4,
        relations: graph.relation_names(),
        ..ModelConfig::default()
    };

    println!("train_fraction  nodes_used  test_accuracy");
    for fraction in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let train = TrainConfig {
            max_epochs: 40,
            seed: 42,
            train_fraction: fraction,
            ..TrainConfig::default()
        };
        let mut model = ModelState::new(config.clone(), graph.feature_dim(), train.seed)?;
        let report = model.train(&graph, &index, &train)?;
        println!(
            "{fraction:>14}  {:>10}  {:>13.3}",
            report.train_nodes_used, report.test.accuracy
        );
    }
    Ok(())
}
