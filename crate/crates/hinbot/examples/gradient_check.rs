//! Verify the hand-written backward pass against central finite
//! differences on a tiny two-layer model. Every parameter tensor of the
//! whole network is perturbed coordinate by coordinate.

use hinbot::graph::{HinGraph, Label, NeighborIndex, Split};
use hinbot::model::{ModelConfig, ModelState};
use hinbot::nn::{finite_diff_check, Matrix, Rng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = Rng::new(17);
    let n = 6;
    let features = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.standard_normal()).collect())?;
    let labels: Vec<Label> = (0..n)
        .map(|i| if i % 2 == 0 { Label::Human } else { Label::Bot })
        .collect();
    let graph = HinGraph::new(
        vec!["r0".to_string(), "r1".to_string()],
        vec![
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)],
            vec![(1, 0), (3, 0), (5, 2), (0, 4)],
        ],
        features,
        labels,
        vec![Split::Train; n],
    )?;
    let index = NeighborIndex::build(&graph);

    let config = ModelConfig {
        hidden: 8,
        layers: 2,
        rgt_heads: 2,
        semantic_heads: 2,
        dropout: 0.0,
        relations: graph.relation_names(),
        ..ModelConfig::default()
    };
    let mut model = ModelState::new(config, 3, 5)?;
    for p in model.params_mut() {
        if p.value.as_slice().iter().all(|&v| v == 0.0) {
            for v in p.value.as_mut_slice() {
                *v = rng.uniform(-0.3, 0.3);
            }
        }
    }
    let batch = graph.labeled_nodes_in(Split::Train);
    let lambda = 1e-3;

    model.zero_grads();
    let cache = model.forward(&graph, &index, false)?;
    let loss = model.loss(&cache, &graph, &batch, lambda)?;
    model.backward(&graph, &index, &cache, &batch, lambda)?;
    println!(
        "loss {loss:.6} over {} parameters in {} tensors",
        model.num_parameters(),
        model.params().len()
    );

    struct Check {
        model: ModelState,
        graph: HinGraph,
        index: NeighborIndex,
        batch: Vec<usize>,
        lambda: f64,
    }
    let mut state = Check {
        model,
        graph,
        index,
        batch,
        lambda,
    };
    let max_err = finite_diff_check(
        &mut state,
        |s| s.model.params_mut(),
        |s| {
            let cache = s.model.forward(&s.graph, &s.index, false).unwrap();
            s.model.loss(&cache, &s.graph, &s.batch, s.lambda).unwrap()
        },
        1e-5,
    )?;
    println!("max relative error vs finite differences: {max_err:.3e}");
    assert!(max_err < 1e-4, "gradient disagreement");
    Ok(())
}
