//! Why per-edge attention? The two-relation fixture plants camouflage
//! accounts: half the nodes wire their outgoing edges against the class
//! structure while a feature signature marks them. Equal-weight neighbor
//! averaging absorbs those misleading edges; attention can weight each
//! neighbor individually. Train both aggregators on the same graph and
//! compare.

use hinbot::graph::NeighborIndex;
use hinbot::model::{ModelConfig, ModelState, TrainConfig};
use hinbot::rgt::AggregatorMode;
use hinbot::synth::{self, generate_with_confusers};

fn train(
    config: ModelConfig,
    graph: &hinbot::graph::HinGraph,
    index: &NeighborIndex,
) -> Result<f64, Box<dyn std::error::Error>> {
    let train = TrainConfig { seed: 42, ..TrainConfig::default() };
    let mut model = ModelState::new(config, graph.feature_dim(), train.seed)?;
    Ok(model.train(graph, index, &train)?.test.accuracy)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = synth::fixture("hetero-two-relations").expect("known preset");
    let (graph, camouflaged) = generate_with_confusers(&spec)?;
    let index = NeighborIndex::build(&graph);

    let marked = camouflaged.iter().filter(|&&c| c).count();
    let misleading: usize = (0..graph.num_relations())
        .flat_map(|r| graph.edges(r))
        .filter(|(src, _)| camouflaged[*src])
        .count();
    let total: usize = (0..graph.num_relations()).map(|r| graph.edges(r).len()).sum();
    println!(
        "{} of {} nodes are camouflaged; they send {} of {} edges ({:.0}%)",
        marked,
        graph.num_nodes(),
        misleading,
        total,
        100.0 * misleading as f64 / total as f64
    );

    let base = ModelConfig {
        hidden: 32,
        rgt_heads: 4,
        semantic_heads: 4,
        relations: graph.relation_names(),
        ..ModelConfig::default()
    };
    let attention = train(base.clone(), &graph, &index)?;
    let uniform_config = ModelConfig {
        aggregator_mode: AggregatorMode::NoTransformer,
        ..base
    };
    let uniform = train(uniform_config, &graph, &index)?;

    println!();
    println!("per-edge attention aggregation: test accuracy {attention:.3}");
    println!("equal-weight aggregation:       test accuracy {uniform:.3}");
    println!();
    println!(
        "attention recovers the class signal the camouflage edges cancel \
         out of plain neighborhood averages."
    );
    Ok(())
}
