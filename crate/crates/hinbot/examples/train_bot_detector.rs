//! Train the full model on the two-relation synthetic fixture and print
//! the training curve plus final test metrics. Runs in a few seconds.

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
    let train = TrainConfig {
        max_epochs: 20,
        seed: 42,
        ..TrainConfig::default()
    };

    let mut model = ModelState::new(config, graph.feature_dim(), train.seed)?;
    println!(
        "training {} parameters on {} nodes",
        model.num_parameters(),
        graph.num_nodes()
    );
    let report = model.train(&graph, &index, &train)?;

    println!("epoch  train_loss  val_acc  val_f1");
    for row in report.rows.iter().step_by(4) {
        println!(
            "{:>5}  {:>10.3}  {:>7.3}  {:>6.3}",
            row.epoch, row.train_loss, row.val_acc, row.val_f1
        );
    }
    println!(
        "best epoch {} -> test accuracy {:.3}, test F1 {:.3}",
        report.best_epoch, report.test.accuracy, report.test.f1
    );
    Ok(())
}
