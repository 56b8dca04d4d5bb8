//! End-to-end bot detector: feature encoder, stacked relation-attention
//! layers with cross-relation fusion, classification head, training loop,
//! metrics, checkpointing, and CSV exports.
//!
//! The forward pass is full-graph: every node's representation is computed
//! each step, and minibatching restricts only the loss to a batch of
//! labeled training nodes. This keeps the global node mean inside semantic
//! attention exact rather than an estimate over sampled neighborhoods.
//!
//! Everything is deterministic for a fixed config and seed: parameter
//! initialization, batch shuffling, and dropout masks all come from one
//! seeded generator consumed in a fixed order, so reports and checkpoints
//! are byte-identical across runs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{ConfigError, KvReader};
use crate::fusion::{pool_backward, pool_fuse, FusionMode, SemanticCache, SemanticParams};
use crate::graph::{HinGraph, Label, NeighborIndex, Split};
use crate::nn::{
    adamw_step, leaky_relu, linear, linear_backward, softmax_in_place, Matrix, NnError,
    ParamTensor, Rng, LEAKY_RELU_SLOPE,
};
use crate::rgt::{init_tensor_xavier, AggregatorMode, LayerActivations, RgtParams};

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-8;
/// Probabilities are clamped here before taking logs in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

const CHECKPOINT_MAGIC: &str = "hinbot checkpoint v1";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("model expects relations [{}] but graph provides [{}]", model.join(", "), graph.join(", "))]
    RelationMismatch {
        model: Vec<String>,
        graph: Vec<String>,
    },
    #[error("model expects {expected} input features, graph has {got}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("no labeled nodes in the {0} split")]
    EmptySplit(&'static str),
    #[error("node {node} in the loss batch has no label")]
    UnlabeledNode { node: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: check learning rate and data scale")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
}

/// Architecture hyperparameters. Defaults: 128 hidden units, 2 layers,
/// 8 aggregation heads, 8 fusion heads, dropout 0.5.
///
/// `rgt_heads == 0` means "no attention": aggregation falls back to
/// uniform neighbor weights with a single value projection.
/// `semantic_heads == 0` means "no learned fusion": relation outputs are
/// mean-pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub rgt_heads: usize,
    pub semantic_heads: usize,
    pub dropout: f64,
    pub relations: Vec<String>,
    pub fusion_mode: FusionMode,
    pub aggregator_mode: AggregatorMode,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            hidden: 128,
            layers: 2,
            rgt_heads: 8,
            semantic_heads: 8,
            dropout: 0.5,
            relations: vec!["follower".to_string(), "following".to_string()],
            fusion_mode: FusionMode::SemanticAttention,
            aggregator_mode: AggregatorMode::Rgt,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.hidden == 0 {
            return err("hidden size must be positive".into());
        }
        if self.layers == 0 {
            return err("layer count must be at least 1".into());
        }
        if self.rgt_heads > 0 && self.hidden % self.rgt_heads != 0 {
            return err(format!(
                "hidden size {} not divisible by rgt_heads {}",
                self.hidden, self.rgt_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.relations.is_empty() {
            return err("at least one relation is required".into());
        }
        for (i, name) in self.relations.iter().enumerate() {
            if self.relations[..i].contains(name) {
                return err(format!("duplicate relation '{name}'"));
            }
        }
        Ok(())
    }

    /// Aggregator actually run: zero attention heads disables the
    /// transformer path.
    pub fn effective_aggregator(&self) -> AggregatorMode {
        if self.rgt_heads == 0 && self.aggregator_mode == AggregatorMode::Rgt {
            AggregatorMode::NoTransformer
        } else {
            self.aggregator_mode
        }
    }

    /// Fusion actually run: zero semantic heads disables learned fusion.
    pub fn effective_fusion(&self) -> FusionMode {
        if self.semantic_heads == 0 && self.fusion_mode == FusionMode::SemanticAttention {
            FusionMode::Mean
        } else {
            self.fusion_mode
        }
    }

    /// Head counts used for parameter allocation (at least one each, so
    /// the ablated configurations still have well-formed tensors).
    fn storage_rgt_heads(&self) -> usize {
        self.rgt_heads.max(1)
    }

    fn storage_semantic_heads(&self) -> usize {
        self.semantic_heads.max(1)
    }
}

/// Optimization hyperparameters. Defaults: learning rate 1e-3, L2 weight
/// 3e-5, batch size 256, 40 epochs, full training set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_regularization: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Fraction of labeled training nodes actually used (seeded
    /// subsample), for data-efficiency sweeps.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            l2_regularization: 3e-5,
            batch_size: 256,
            max_epochs: 40,
            seed: 42,
            train_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.l2_regularization >= 0.0 && self.l2_regularization.is_finite()) {
            return err(format!(
                "l2 regularization {} must be non-negative",
                self.l2_regularization
            ));
        }
        if self.batch_size == 0 {
            return err("batch size must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return err(format!("train fraction {} outside (0, 1]", self.train_fraction));
        }
        Ok(())
    }
}

/// Classification quality on one split, bot as the positive class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Metrics {
    /// Accuracy and F1 from confusion counts; precision or recall with an
    /// empty denominator counts as 0.
    pub fn from_confusion(tp: usize, fp: usize, tn: usize, fn_: usize) -> Metrics {
        let total = tp + fp + tn + fn_;
        let accuracy = if total == 0 {
            0.0
        } else {
            (tp + tn) as f64 / total as f64
        };
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy,
            f1,
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
        }
    }
}

/// One line of training history. Epoch 0 records the freshly initialized
/// model; the loss is the full training-set objective (regularizer
/// included), evaluated with dropout off.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_f1: f64,
}

/// Training history plus final test metrics for the best-validation model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    pub best_epoch: usize,
    pub train_nodes_used: usize,
    pub test: Metrics,
    /// Wall time of each epoch's optimization loop. Excluded from the CSV
    /// so reports stay byte-identical across equally seeded runs.
    pub epoch_seconds: Vec<f64>,
}

impl TrainReport {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_acc,val_f1\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.epoch, r.train_loss, r.val_acc, r.val_f1);
        }
        let t = &self.test;
        let _ = writeln!(
            s,
            "# best_epoch={} train_nodes_used={} test_accuracy={} test_f1={} tp={} fp={} tn={} fn={}",
            self.best_epoch,
            self.train_nodes_used,
            t.accuracy,
            t.f1,
            t.true_pos,
            t.false_pos,
            t.true_neg,
            t.false_neg
        );
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_csv_string()).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// One layer's parameters: per-relation aggregation plus fusion. The
/// fusion parameters are allocated (and initialized) even under pooling
/// modes so that two configs differing only in fusion mode share identical
/// aggregation weights for a given seed.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub rgt: RgtParams,
    pub semantic: SemanticParams,
}

/// Per-layer forward intermediates.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub rgt: LayerActivations,
    pub h_rels: Vec<Matrix>,
    pub semantic: Option<SemanticCache>,
    pub fused: Matrix,
    /// Inverted-dropout multipliers (0 or 1/keep); absent in eval mode.
    pub dropout: Option<Matrix>,
    pub x_out: Matrix,
}

/// Whole-model forward intermediates.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x0: Matrix,
    pub layers: Vec<LayerCache>,
    pub head_a: Matrix,
    pub head_dropout: Option<Matrix>,
    pub head_a_dropped: Matrix,
    pub logits: Matrix,
    /// Row-wise softmax of the logits; column 1 is the bot probability.
    pub probs: Matrix,
}

/// All trainable state plus the seeded generator that drives shuffling and
/// dropout.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub config: ModelConfig,
    pub feature_dim: usize,
    pub encoder_w: ParamTensor,
    pub encoder_b: ParamTensor,
    pub layers: Vec<LayerParams>,
    pub head_w1: ParamTensor,
    pub head_b1: ParamTensor,
    pub head_w2: ParamTensor,
    pub head_b2: ParamTensor,
    rng: Rng,
}

impl ModelState {
    /// Builds and initializes a model. Same config, feature width, and
    /// seed always produce identical parameters.
    pub fn new(config: ModelConfig, feature_dim: usize, seed: u64) -> Result<ModelState, ModelError> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(ModelError::InvalidConfig("feature width must be positive".into()));
        }
        let h = config.hidden;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let rgt = RgtParams::new(
                &format!("layer{l}"),
                &config.relations,
                h,
                config.storage_rgt_heads(),
            )?;
            let semantic = SemanticParams::new(&format!("layer{l}"), h, config.storage_semantic_heads());
            layers.push(LayerParams { rgt, semantic });
        }
        let mut state = ModelState {
            config,
            feature_dim,
            encoder_w: ParamTensor::new("encoder.w", Matrix::zeros(h, feature_dim)),
            encoder_b: ParamTensor::new("encoder.b", Matrix::zeros(h, 1)),
            layers,
            head_w1: ParamTensor::new("head.w1", Matrix::zeros(h, h)),
            head_b1: ParamTensor::new("head.b1", Matrix::zeros(h, 1)),
            head_w2: ParamTensor::new("head.w2", Matrix::zeros(2, h)),
            head_b2: ParamTensor::new("head.b2", Matrix::zeros(2, 1)),
            rng: Rng::new(seed),
        };
        let mut rng = Rng::new(seed.wrapping_add(0x9e3779b97f4a7c15));
        init_tensor_xavier(&mut state.encoder_w, &mut rng);
        for layer in &mut state.layers {
            layer.rgt.init_xavier(&mut rng);
            layer.semantic.init_xavier(&mut rng);
        }
        init_tensor_xavier(&mut state.head_w1, &mut rng);
        init_tensor_xavier(&mut state.head_w2, &mut rng);
        Ok(state)
    }

    /// Fixed enumeration order: encoder, layers (aggregation then fusion),
    /// head. Optimizer steps, regularization, snapshots, and checkpoints
    /// all iterate in this order.
    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = vec![&mut self.encoder_w, &mut self.encoder_b];
        for layer in &mut self.layers {
            out.extend(layer.rgt.params_mut());
            out.extend(layer.semantic.params_mut());
        }
        out.push(&mut self.head_w1);
        out.push(&mut self.head_b1);
        out.push(&mut self.head_w2);
        out.push(&mut self.head_b2);
        out
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = vec![&self.encoder_w, &self.encoder_b];
        for layer in &self.layers {
            out.extend(layer.rgt.params());
            out.extend(layer.semantic.params());
        }
        out.push(&self.head_w1);
        out.push(&self.head_b1);
        out.push(&self.head_w2);
        out.push(&self.head_b2);
        out
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// The graph a model runs on must carry exactly the relations (by name
    /// and order) and feature width it was built for.
    pub fn check_graph(&self, graph: &HinGraph) -> Result<(), ModelError> {
        let names = graph.relation_names();
        if names != self.config.relations {
            return Err(ModelError::RelationMismatch {
                model: self.config.relations.clone(),
                graph: names,
            });
        }
        if graph.feature_dim() != self.feature_dim {
            return Err(ModelError::FeatureWidth {
                expected: self.feature_dim,
                got: graph.feature_dim(),
            });
        }
        Ok(())
    }

    fn dropout_mask(&mut self, rows: usize, cols: usize) -> Matrix {
        let keep = 1.0 - self.config.dropout;
        let inv_keep = 1.0 / keep;
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = if self.rng.bernoulli(self.config.dropout) {
                0.0
            } else {
                inv_keep
            };
        }
        m
    }

    /// Full-graph forward pass. `train` enables dropout (and consumes the
    /// model's random stream); with it off the pass is deterministic.
    pub fn forward(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        train: bool,
    ) -> Result<ForwardCache, ModelError> {
        self.check_graph(graph)?;
        let agg = self.config.effective_aggregator();
        let fusion = self.config.effective_fusion();
        let use_dropout = train && self.config.dropout > 0.0;

        let x0 = leaky_relu(&linear(&self.encoder_w, &self.encoder_b, graph.features())?)?;
        let mut layer_caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        let mut x = x0.clone();
        for l in 0..self.layers.len() {
            let (h_rels, rgt_cache) = self.layers[l].rgt.forward(&x, index, agg)?;
            let (fused, semantic) = if fusion == FusionMode::SemanticAttention {
                let (f, c) = self.layers[l].semantic.forward(&h_rels)?;
                (f, Some(c))
            } else {
                (pool_fuse(fusion, &h_rels), None)
            };
            let dropout = if use_dropout {
                Some(self.dropout_mask(fused.rows(), fused.cols()))
            } else {
                None
            };
            let mut x_out = fused.clone();
            if let Some(m) = &dropout {
                x_out.mul_assign(m);
            }
            x = x_out.clone();
            layer_caches.push(LayerCache {
                rgt: rgt_cache,
                h_rels,
                semantic,
                fused,
                dropout,
                x_out,
            });
        }
        let head_a = leaky_relu(&linear(&self.head_w1, &self.head_b1, &x)?)?;
        let head_dropout = if use_dropout {
            Some(self.dropout_mask(head_a.rows(), head_a.cols()))
        } else {
            None
        };
        let mut head_a_dropped = head_a.clone();
        if let Some(m) = &head_dropout {
            head_a_dropped.mul_assign(m);
        }
        let logits = linear(&self.head_w2, &self.head_b2, &head_a_dropped)?;
        let mut probs = logits.clone();
        for i in 0..probs.rows() {
            softmax_in_place(probs.row_mut(i));
        }
        Ok(ForwardCache {
            x0,
            layers: layer_caches,
            head_a,
            head_dropout,
            head_a_dropped,
            logits,
            probs,
        })
    }

    /// Training objective over one batch of labeled nodes: summed binary
    /// cross-entropy on the bot probability (logs clamped at
    /// [`PROB_FLOOR`]) plus `lambda` times the squared norm of every
    /// parameter tensor.
    pub fn loss(
        &self,
        cache: &ForwardCache,
        graph: &HinGraph,
        batch: &[usize],
        lambda: f64,
    ) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut ce = 0.0;
        for &i in batch {
            let y = match graph.labels()[i] {
                Label::Bot => 1.0,
                Label::Human => 0.0,
                Label::Unlabeled => return Err(ModelError::UnlabeledNode { node: i }),
            };
            let p1 = cache.probs.get(i, 1);
            ce -= y * p1.max(PROB_FLOOR).ln() + (1.0 - y) * (1.0 - p1).max(PROB_FLOOR).ln();
        }
        let reg: f64 = if lambda == 0.0 {
            0.0
        } else {
            lambda * self.params().iter().map(|p| p.value.sum_of_squares()).sum::<f64>()
        };
        Ok(ce + reg)
    }

    /// Accumulates gradients of [`Self::loss`] into every parameter's
    /// `grad`. Caller zeroes gradients between optimizer steps.
    pub fn backward(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        cache: &ForwardCache,
        batch: &[usize],
        lambda: f64,
    ) -> Result<(), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let n = graph.num_nodes();
        let mut g_logits = Matrix::zeros(n, 2);
        for &i in batch {
            let bot = match graph.labels()[i] {
                Label::Bot => true,
                Label::Human => false,
                Label::Unlabeled => return Err(ModelError::UnlabeledNode { node: i }),
            };
            let p0 = cache.probs.get(i, 0);
            let p1 = cache.probs.get(i, 1);
            // d(ce)/d(p1), respecting the log clamp (zero slope inside it).
            let mut dldp = 0.0;
            if bot {
                if p1 > PROB_FLOOR {
                    dldp -= 1.0 / p1;
                }
            } else if 1.0 - p1 > PROB_FLOOR {
                dldp += 1.0 / (1.0 - p1);
            }
            let g = dldp * p1 * p0;
            g_logits.set(i, 1, g);
            g_logits.set(i, 0, -g);
        }

        let mut g_a = linear_backward(
            &mut self.head_w2,
            &mut self.head_b2,
            &cache.head_a_dropped,
            &g_logits,
        );
        if let Some(m) = &cache.head_dropout {
            g_a.mul_assign(m);
        }
        let g_pre1 = leaky_backward(&cache.head_a, &g_a);
        let x_last = cache
            .layers
            .last()
            .map(|c| &c.x_out)
            .unwrap_or(&cache.x0);
        let mut g_x = linear_backward(&mut self.head_w1, &mut self.head_b1, x_last, &g_pre1);

        let agg = self.config.effective_aggregator();
        let fusion = self.config.effective_fusion();
        for l in (0..self.layers.len()).rev() {
            let lc = &cache.layers[l];
            if let Some(m) = &lc.dropout {
                g_x.mul_assign(m);
            }
            let g_h = if let Some(sc) = &lc.semantic {
                self.layers[l].semantic.backward(&lc.h_rels, sc, &g_x)
            } else {
                pool_backward(fusion, &lc.h_rels, &g_x)
            };
            let x_prev = if l == 0 { &cache.x0 } else { &cache.layers[l - 1].x_out };
            g_x = self.layers[l].rgt.backward(x_prev, index, agg, &lc.rgt, &g_h);
        }

        let g_pre0 = leaky_backward(&cache.x0, &g_x);
        linear_backward(&mut self.encoder_w, &mut self.encoder_b, graph.features(), &g_pre0);

        if lambda != 0.0 {
            for p in self.params_mut() {
                let reg_grad = p.value.map(|v| 2.0 * lambda * v);
                p.grad.add_assign(&reg_grad);
            }
        }
        Ok(())
    }

    /// Accuracy/F1/confusion over the labeled nodes of one split.
    pub fn evaluate(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        split: Split,
    ) -> Result<Metrics, ModelError> {
        let nodes = graph.labeled_nodes_in(split);
        if nodes.is_empty() {
            return Err(ModelError::EmptySplit(split.as_str()));
        }
        let cache = self.forward(graph, index, false)?;
        Ok(metrics_on(&cache.probs, graph, &nodes))
    }

    /// Full-set loss and validation metrics from one dropout-free forward.
    fn snapshot(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        train_nodes: &[usize],
        val_nodes: &[usize],
        lambda: f64,
    ) -> Result<(f64, Metrics), ModelError> {
        let cache = self.forward(graph, index, false)?;
        let loss = self.loss(&cache, graph, train_nodes, lambda)?;
        Ok((loss, metrics_on(&cache.probs, graph, val_nodes)))
    }

    /// Supervised training. Per epoch: shuffle the (possibly subsampled)
    /// training nodes, run a full-graph forward per batch with the loss
    /// restricted to that batch, and take one AdamW step per batch. The
    /// parameters with the best validation F1 (earliest epoch on ties,
    /// including the untrained epoch 0) are restored before the final test
    /// evaluation, so evaluating after `train` reproduces the report.
    pub fn train(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        cfg: &TrainConfig,
    ) -> Result<TrainReport, ModelError> {
        cfg.validate()?;
        self.check_graph(graph)?;
        let full_train = graph.labeled_nodes_in(Split::Train);
        if full_train.is_empty() {
            return Err(ModelError::EmptySplit(Split::Train.as_str()));
        }
        let val_nodes = graph.labeled_nodes_in(Split::Val);
        if val_nodes.is_empty() {
            return Err(ModelError::EmptySplit(Split::Val.as_str()));
        }
        if graph.labeled_nodes_in(Split::Test).is_empty() {
            return Err(ModelError::EmptySplit(Split::Test.as_str()));
        }

        let mut train_nodes = full_train.clone();
        let used = ((cfg.train_fraction * full_train.len() as f64).ceil() as usize)
            .clamp(1, full_train.len());
        if used < full_train.len() {
            self.rng.shuffle(&mut train_nodes);
            train_nodes.truncate(used);
            train_nodes.sort_unstable();
        }

        let lambda = cfg.l2_regularization;
        let (loss0, val0) = self.snapshot(graph, index, &train_nodes, &val_nodes, lambda)?;
        let mut rows = vec![EpochRow {
            epoch: 0,
            train_loss: loss0,
            val_acc: val0.accuracy,
            val_f1: val0.f1,
        }];
        let mut best_epoch = 0;
        let mut best_f1 = val0.f1;
        let mut best_values: Vec<Matrix> = self.params().iter().map(|p| p.value.clone()).collect();
        let mut epoch_seconds = Vec::with_capacity(cfg.max_epochs);

        let mut batch_order = train_nodes.clone();
        for epoch in 1..=cfg.max_epochs {
            let start = Instant::now();
            self.rng.shuffle(&mut batch_order);
            let num_batches = batch_order.len().div_ceil(cfg.batch_size);
            for b in 0..num_batches {
                let lo = b * cfg.batch_size;
                let hi = (lo + cfg.batch_size).min(batch_order.len());
                let batch: Vec<usize> = batch_order[lo..hi].to_vec();
                self.zero_grads();
                let cache = self.forward(graph, index, true)?;
                let batch_loss = self.loss(&cache, graph, &batch, lambda)?;
                if !batch_loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch, batch: b });
                }
                self.backward(graph, index, &cache, &batch, lambda)?;
                adamw_step(self.params_mut(), cfg.learning_rate, ADAM_BETAS, ADAM_EPS, 0.0)?;
            }
            epoch_seconds.push(start.elapsed().as_secs_f64());

            let (train_loss, vm) = self.snapshot(graph, index, &train_nodes, &val_nodes, lambda)?;
            rows.push(EpochRow {
                epoch,
                train_loss,
                val_acc: vm.accuracy,
                val_f1: vm.f1,
            });
            if vm.f1 > best_f1 {
                best_f1 = vm.f1;
                best_epoch = epoch;
                best_values = self.params().iter().map(|p| p.value.clone()).collect();
            }
        }

        for (p, v) in self.params_mut().into_iter().zip(best_values) {
            p.value = v;
        }
        let test = self.evaluate(graph, index, Split::Test)?;
        Ok(TrainReport {
            rows,
            best_epoch,
            train_nodes_used: train_nodes.len(),
            test,
            epoch_seconds,
        })
    }

    /// Writes config and every parameter tensor as text. Values use the
    /// shortest decimal form that parses back to the identical double, so
    /// save/load round trips are value-exact.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), ModelError> {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(s, "[config]");
        let _ = writeln!(s, "hidden = {}", c.hidden);
        let _ = writeln!(s, "layers = {}", c.layers);
        let _ = writeln!(s, "rgt_heads = {}", c.rgt_heads);
        let _ = writeln!(s, "semantic_heads = {}", c.semantic_heads);
        let _ = writeln!(s, "dropout = {}", c.dropout);
        let _ = writeln!(s, "fusion_mode = {}", c.fusion_mode.as_str());
        let _ = writeln!(s, "aggregator_mode = {}", c.aggregator_mode.as_str());
        let _ = writeln!(s, "relations = {}", c.relations.join(","));
        let _ = writeln!(s, "feature_dim = {}", self.feature_dim);
        let _ = writeln!(s, "[tensors]");
        for p in self.params() {
            let _ = writeln!(s, "tensor {} {} {}", p.name, p.value.rows(), p.value.cols());
            for i in 0..p.value.rows() {
                let row = p.value.row(i);
                for (j, v) in row.iter().enumerate() {
                    if j > 0 {
                        s.push(' ');
                    }
                    let _ = write!(s, "{v}");
                }
                s.push('\n');
            }
        }
        fs::write(path, s).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Rebuilds a model from [`Self::save_checkpoint`] output. The stored
    /// config reconstructs the architecture; tensors are matched by name
    /// and must cover the model exactly.
    pub fn load_checkpoint(path: &Path) -> Result<ModelState, ModelError> {
        let bad = |msg: String| ModelError::Checkpoint {
            path: path.to_path_buf(),
            msg,
        };
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad(format!("missing '{CHECKPOINT_MAGIC}' header")));
        }
        if lines.next() != Some("[config]") {
            return Err(bad("missing [config] section".into()));
        }
        let mut config_text = String::new();
        let mut rest: Vec<&str> = Vec::new();
        let mut in_config = true;
        for line in lines {
            if in_config {
                if line == "[tensors]" {
                    in_config = false;
                } else {
                    config_text.push_str(line);
                    config_text.push('\n');
                }
            } else {
                rest.push(line);
            }
        }
        if in_config {
            return Err(bad("missing [tensors] section".into()));
        }

        let mut kv = KvReader::parse(&config_text).map_err(|e| bad(e.to_string()))?;
        let parse = |r: Result<ModelConfig, ConfigError>| r.map_err(|e| bad(e.to_string()));
        let defaults = ModelConfig::default();
        let config = parse((|| {
            let fusion_raw = kv
                .take_raw("fusion_mode")
                .map(|(v, _)| v)
                .unwrap_or_else(|| defaults.fusion_mode.as_str().to_string());
            let agg_raw = kv
                .take_raw("aggregator_mode")
                .map(|(v, _)| v)
                .unwrap_or_else(|| defaults.aggregator_mode.as_str().to_string());
            let relations_raw = kv
                .take_raw("relations")
                .map(|(v, _)| v)
                .unwrap_or_default();
            Ok(ModelConfig {
                hidden: kv.take_required("hidden")?,
                layers: kv.take_required("layers")?,
                rgt_heads: kv.take_required("rgt_heads")?,
                semantic_heads: kv.take_required("semantic_heads")?,
                dropout: kv.take_required("dropout")?,
                relations: relations_raw
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect(),
                fusion_mode: FusionMode::from_str(&fusion_raw).ok_or(ConfigError::BadValue {
                    line: 0,
                    key: "fusion_mode".into(),
                    msg: format!("unknown fusion mode '{fusion_raw}'"),
                })?,
                aggregator_mode: AggregatorMode::from_str(&agg_raw).ok_or(
                    ConfigError::BadValue {
                        line: 0,
                        key: "aggregator_mode".into(),
                        msg: format!("unknown aggregator mode '{agg_raw}'"),
                    },
                )?,
            })
        })())?;
        let feature_dim: usize = kv
            .take_required("feature_dim")
            .map_err(|e| bad(e.to_string()))?;
        kv.finish().map_err(|e| bad(e.to_string()))?;

        let mut tensors: HashMap<String, Matrix> = HashMap::new();
        let mut it = rest.into_iter().filter(|l| !l.trim().is_empty());
        while let Some(header) = it.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "tensor" {
                return Err(bad(format!("malformed tensor header '{header}'")));
            }
            let name = parts[1].to_string();
            let rows: usize = parts[2]
                .parse()
                .map_err(|_| bad(format!("bad row count in '{header}'")))?;
            let cols: usize = parts[3]
                .parse()
                .map_err(|_| bad(format!("bad column count in '{header}'")))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = it
                    .next()
                    .ok_or_else(|| bad(format!("tensor '{name}' truncated")))?;
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| bad(format!("tensor '{name}': bad value '{tok}'")))?;
                    data.push(v);
                }
            }
            if data.len() != rows * cols {
                return Err(bad(format!(
                    "tensor '{name}': expected {} values, found {}",
                    rows * cols,
                    data.len()
                )));
            }
            let m = Matrix::from_vec(rows, cols, data).map_err(|e| bad(e.to_string()))?;
            if tensors.insert(name.clone(), m).is_some() {
                return Err(bad(format!("duplicate tensor '{name}'")));
            }
        }

        let mut state = ModelState::new(config, feature_dim, 0)?;
        for p in state.params_mut() {
            let m = tensors
                .remove(&p.name)
                .ok_or_else(|| ModelError::Checkpoint {
                    path: path.to_path_buf(),
                    msg: format!("missing tensor '{}'", p.name),
                })?;
            if !m.same_shape(&p.value) {
                return Err(ModelError::Checkpoint {
                    path: path.to_path_buf(),
                    msg: format!(
                        "tensor '{}': expected shape {}, found {}",
                        p.name,
                        p.value.shape_string(),
                        m.shape_string()
                    ),
                });
            }
            p.value = m;
        }
        if let Some(name) = tensors.keys().next() {
            return Err(bad(format!("unexpected tensor '{name}'")));
        }
        Ok(state)
    }

    /// Writes each node's final fused representation as
    /// `id,label,e0..e{H-1}` (label codes: 0 human, 1 bot, -1 unlabeled).
    pub fn export_embeddings(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        path: &Path,
    ) -> Result<(), ModelError> {
        let io_err = |source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        };
        let cache = self.forward(graph, index, false)?;
        let emb = &cache.layers.last().expect("at least one layer").x_out;
        let file = fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let mut header = String::from("id,label");
        for c in 0..emb.cols() {
            let _ = write!(header, ",e{c}");
        }
        writeln!(w, "{header}").map_err(io_err)?;
        for i in 0..graph.num_nodes() {
            let mut line = format!("{},{}", i, graph.labels()[i].to_code());
            for &v in emb.row(i) {
                let _ = write!(line, ",{v}");
            }
            writeln!(w, "{line}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    /// Writes relation weights (`layer,head,relation,beta`) and neighbor
    /// attention (`layer,relation,head,src,dst,alpha`). Configurations
    /// without the corresponding attention produce header-only files.
    pub fn export_attention(
        &mut self,
        graph: &HinGraph,
        index: &NeighborIndex,
        beta_path: &Path,
        alpha_path: &Path,
    ) -> Result<(), ModelError> {
        let cache = self.forward(graph, index, false)?;
        let names = graph.relation_names();

        let mut beta_csv = String::from("layer,head,relation,beta\n");
        for (l, lc) in cache.layers.iter().enumerate() {
            if let Some(sc) = &lc.semantic {
                let beta = &sc.weights.beta;
                for d in 0..beta.rows() {
                    for (r, name) in names.iter().enumerate() {
                        let _ = writeln!(beta_csv, "{l},{d},{name},{}", beta.get(d, r));
                    }
                }
            }
        }
        fs::write(beta_path, beta_csv).map_err(|source| ModelError::Io {
            path: beta_path.to_path_buf(),
            source,
        })?;

        let alpha_err = |source| ModelError::Io {
            path: alpha_path.to_path_buf(),
            source,
        };
        let file = fs::File::create(alpha_path).map_err(alpha_err)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "layer,relation,head,src,dst,alpha").map_err(alpha_err)?;
        for (l, lc) in cache.layers.iter().enumerate() {
            for (r, name) in names.iter().enumerate() {
                let rel_cache = &lc.rgt.relations[r];
                for (c, alpha) in rel_cache.alpha.iter().enumerate() {
                    for i in 0..graph.num_nodes() {
                        let js = index.neighbors(r, i);
                        let off = index.edge_offset(r, i);
                        for (t, &j) in js.iter().enumerate() {
                            writeln!(w, "{l},{name},{c},{j},{i},{}", alpha[off + t])
                                .map_err(alpha_err)?;
                        }
                    }
                }
            }
        }
        w.flush().map_err(alpha_err)
    }
}

/// Gradient of leaky relu from its cached output (the activation keeps the
/// input's sign, so the output tells which slope applied).
fn leaky_backward(post: &Matrix, grad: &Matrix) -> Matrix {
    let mut out = grad.clone();
    for (g, &a) in out.as_mut_slice().iter_mut().zip(post.as_slice()) {
        if a < 0.0 {
            *g *= LEAKY_RELU_SLOPE;
        }
    }
    out
}

/// Confusion tally over `nodes`: predict bot when its probability exceeds
/// the human one (ties go to human).
fn metrics_on(probs: &Matrix, graph: &HinGraph, nodes: &[usize]) -> Metrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for &i in nodes {
        let predicted_bot = probs.get(i, 1) > probs.get(i, 0);
        match (graph.labels()[i] == Label::Bot, predicted_bot) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    Metrics::from_confusion(tp, fp, tn, fn_)
}
