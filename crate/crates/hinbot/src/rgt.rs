//! Relation-aware graph transformer layer.
//!
//! For each relation the layer runs multi-head attention over a node's
//! in-neighbors under that relation, then mixes the aggregate with the
//! node's previous representation through a learned gate:
//!
//! * Per head `c`, each node gets query/key/value vectors via affine maps
//!   `q = W_q x + b_q` (and likewise `k`, `v`), each head owning its own
//!   weights per relation.
//! * Attention over the in-neighborhood `N(i)`:
//!   `alpha_ij = softmax_j(q_i . k_j / sqrt(d))`, a distribution over the
//!   neighbors of `i` (empty neighborhoods produce a zero aggregate).
//! * Heads are concatenated and the concatenation scaled by `1/heads`,
//!   giving the neighborhood summary `u_i`.
//! * Gated residual: `z = sigmoid(W_g [u ; x] + b_g)` and
//!   `h = tanh(u) * z + x * (1 - z)`, so each coordinate interpolates
//!   between neighborhood evidence and the node's own representation.
//!
//! The layer emits one output matrix per relation; fusing them is the next
//! stage's job. Backward passes are written by hand and verified against
//! central differences in the tests.
//!
//! [`AggregatorMode`] swaps the aggregation for ablation variants: uniform
//! attention, no gate, or plain neighbor averaging.

use crate::graph::NeighborIndex;
use crate::nn::{linear, linear_backward, sigmoid, softmax_in_place, tanh};
use crate::nn::{Matrix, NnError, ParamTensor, Rng};

/// Neighborhood aggregation variant.
///
/// `Rgt` is the full layer. The others are ablations: `NoTransformer`
/// replaces attention with uniform weights (value projection and gate
/// kept), `NoGate` drops the gated residual (`h = tanh(u)`), and
/// `MeanNeighbor` averages raw neighbor representations (projections and
/// attention dropped, gate kept).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregatorMode {
    Rgt,
    NoTransformer,
    NoGate,
    MeanNeighbor,
}

impl AggregatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregatorMode::Rgt => "rgt",
            AggregatorMode::NoTransformer => "no_transformer",
            AggregatorMode::NoGate => "no_gate",
            AggregatorMode::MeanNeighbor => "mean_neighbor",
        }
    }

    pub fn from_str(s: &str) -> Option<AggregatorMode> {
        match s {
            "rgt" => Some(AggregatorMode::Rgt),
            "no_transformer" => Some(AggregatorMode::NoTransformer),
            "no_gate" => Some(AggregatorMode::NoGate),
            "mean_neighbor" => Some(AggregatorMode::MeanNeighbor),
            _ => None,
        }
    }
}

/// Per-relation parameters: one q/k/v affine map per head plus the gate.
#[derive(Debug, Clone)]
pub struct RgtRelationParams {
    pub w_q: Vec<ParamTensor>,
    pub b_q: Vec<ParamTensor>,
    pub w_k: Vec<ParamTensor>,
    pub b_k: Vec<ParamTensor>,
    pub w_v: Vec<ParamTensor>,
    pub b_v: Vec<ParamTensor>,
    pub w_gate: ParamTensor,
    pub b_gate: ParamTensor,
}

/// One layer's parameters across all relations.
#[derive(Debug, Clone)]
pub struct RgtParams {
    pub hidden: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub relations: Vec<RgtRelationParams>,
}

/// Forward intermediates one relation needs for its backward pass.
/// Matrices irrelevant to the active [`AggregatorMode`] stay empty.
#[derive(Debug, Clone)]
pub struct RelationCache {
    pub q: Vec<Matrix>,
    pub k: Vec<Matrix>,
    pub v: Vec<Matrix>,
    /// Attention weights per head, one entry per edge in CSR order.
    pub alpha: Vec<Vec<f64>>,
    pub u: Matrix,
    pub tanh_u: Matrix,
    pub z: Matrix,
}

/// Forward intermediates of a whole layer, relation by relation.
#[derive(Debug, Clone)]
pub struct LayerActivations {
    pub relations: Vec<RelationCache>,
}

impl RgtParams {
    /// Zero-initialized parameters. `prefix` scopes tensor names (for
    /// optimizer diagnostics and checkpoints); `hidden` must be divisible
    /// by `heads`.
    pub fn new(
        prefix: &str,
        relation_names: &[String],
        hidden: usize,
        heads: usize,
    ) -> Result<RgtParams, NnError> {
        if heads == 0 || hidden == 0 || hidden % heads != 0 {
            return Err(NnError::ShapeMismatch {
                op: "rgt_params",
                expected: "hidden divisible by a positive head count".to_string(),
                got: format!("hidden {hidden}, heads {heads}"),
            });
        }
        let head_dim = hidden / heads;
        let relations = relation_names
            .iter()
            .map(|rel| {
                let mk = |kind: &str, c: usize, rows: usize, cols: usize| {
                    ParamTensor::new(
                        format!("{prefix}.{rel}.{kind}{c}.w"),
                        Matrix::zeros(rows, cols),
                    )
                };
                let mkb = |kind: &str, c: usize, rows: usize| {
                    ParamTensor::new(
                        format!("{prefix}.{rel}.{kind}{c}.b"),
                        Matrix::zeros(rows, 1),
                    )
                };
                RgtRelationParams {
                    w_q: (0..heads).map(|c| mk("q", c, head_dim, hidden)).collect(),
                    b_q: (0..heads).map(|c| mkb("q", c, head_dim)).collect(),
                    w_k: (0..heads).map(|c| mk("k", c, head_dim, hidden)).collect(),
                    b_k: (0..heads).map(|c| mkb("k", c, head_dim)).collect(),
                    w_v: (0..heads).map(|c| mk("v", c, head_dim, hidden)).collect(),
                    b_v: (0..heads).map(|c| mkb("v", c, head_dim)).collect(),
                    w_gate: ParamTensor::new(
                        format!("{prefix}.{rel}.gate.w"),
                        Matrix::zeros(hidden, 2 * hidden),
                    ),
                    b_gate: ParamTensor::new(
                        format!("{prefix}.{rel}.gate.b"),
                        Matrix::zeros(hidden, 1),
                    ),
                }
            })
            .collect();
        Ok(RgtParams {
            hidden,
            heads,
            head_dim,
            relations,
        })
    }

    /// All tensors in a fixed enumeration order (relations, then per head
    /// q/k/v weight-bias pairs, then the gate). Initialization, the
    /// optimizer, and checkpoints all rely on this order being stable.
    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for rel in &mut self.relations {
            for (w, b) in rel.w_q.iter_mut().zip(&mut rel.b_q) {
                out.push(w);
                out.push(b);
            }
            for (w, b) in rel.w_k.iter_mut().zip(&mut rel.b_k) {
                out.push(w);
                out.push(b);
            }
            for (w, b) in rel.w_v.iter_mut().zip(&mut rel.b_v) {
                out.push(w);
                out.push(b);
            }
            out.push(&mut rel.w_gate);
            out.push(&mut rel.b_gate);
        }
        out
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        for rel in &self.relations {
            for (w, b) in rel.w_q.iter().zip(&rel.b_q) {
                out.push(w);
                out.push(b);
            }
            for (w, b) in rel.w_k.iter().zip(&rel.b_k) {
                out.push(w);
                out.push(b);
            }
            for (w, b) in rel.w_v.iter().zip(&rel.b_v) {
                out.push(w);
                out.push(b);
            }
            out.push(&rel.w_gate);
            out.push(&rel.b_gate);
        }
        out
    }

    /// Forward pass: one output matrix per relation plus the activations
    /// the backward pass needs. `x_prev` is nodes x hidden.
    pub fn forward(
        &self,
        x_prev: &Matrix,
        index: &NeighborIndex,
        mode: AggregatorMode,
    ) -> Result<(Vec<Matrix>, LayerActivations), NnError> {
        if x_prev.cols() != self.hidden {
            return Err(NnError::ShapeMismatch {
                op: "rgt_forward",
                expected: format!("input width {}", self.hidden),
                got: x_prev.shape_string(),
            });
        }
        if index.num_relations() != self.relations.len() {
            return Err(NnError::ShapeMismatch {
                op: "rgt_forward",
                expected: format!("{} relations", self.relations.len()),
                got: format!("{} relations", index.num_relations()),
            });
        }
        let mut outputs = Vec::with_capacity(self.relations.len());
        let mut caches = Vec::with_capacity(self.relations.len());
        for (r, rel) in self.relations.iter().enumerate() {
            let (h, cache) = self.forward_relation(rel, r, x_prev, index, mode)?;
            outputs.push(h);
            caches.push(cache);
        }
        Ok((outputs, LayerActivations { relations: caches }))
    }

    fn forward_relation(
        &self,
        rel: &RgtRelationParams,
        r: usize,
        x_prev: &Matrix,
        index: &NeighborIndex,
        mode: AggregatorMode,
    ) -> Result<(Matrix, RelationCache), NnError> {
        let (q, k, v, alpha, u) = match mode {
            AggregatorMode::Rgt | AggregatorMode::NoGate => {
                let (q, k, v) = compute_qkv(rel, x_prev)?;
                let alpha: Vec<Vec<f64>> = (0..self.heads)
                    .map(|c| attention_coeffs(&q[c], &k[c], index, r))
                    .collect();
                let u = aggregate(&alpha, &v, index, r);
                (q, k, v, alpha, u)
            }
            AggregatorMode::NoTransformer => {
                let v: Vec<Matrix> = rel
                    .w_v
                    .iter()
                    .zip(&rel.b_v)
                    .map(|(w, b)| linear(w, b, x_prev))
                    .collect::<Result<_, _>>()?;
                let alpha: Vec<Vec<f64>> =
                    (0..self.heads).map(|_| uniform_coeffs(index, r)).collect();
                let u = aggregate(&alpha, &v, index, r);
                (Vec::new(), Vec::new(), v, alpha, u)
            }
            AggregatorMode::MeanNeighbor => {
                let u = mean_neighbor_aggregate(x_prev, index, r);
                (Vec::new(), Vec::new(), Vec::new(), Vec::new(), u)
            }
        };
        let (h, z, tanh_u) = if mode == AggregatorMode::NoGate {
            let tanh_u = tanh(&u)?;
            (tanh_u.clone(), Matrix::zeros(0, 0), tanh_u)
        } else {
            gated_residual(rel, &u, x_prev)?
        };
        Ok((
            h,
            RelationCache {
                q,
                k,
                v,
                alpha,
                u,
                tanh_u,
                z,
            },
        ))
    }

    /// Backward pass. `grad_h[r]` is the loss gradient at relation `r`'s
    /// output. Accumulates parameter gradients and returns the gradient
    /// with respect to `x_prev`. `mode` must match the forward call.
    pub fn backward(
        &mut self,
        x_prev: &Matrix,
        index: &NeighborIndex,
        mode: AggregatorMode,
        cache: &LayerActivations,
        grad_h: &[Matrix],
    ) -> Matrix {
        assert_eq!(grad_h.len(), self.relations.len(), "one gradient per relation");
        let n = x_prev.rows();
        let mut g_x = Matrix::zeros(n, self.hidden);
        let heads = self.heads;
        let head_dim = self.head_dim;
        for (r, rel) in self.relations.iter_mut().enumerate() {
            relation_backward(
                rel,
                r,
                heads,
                head_dim,
                x_prev,
                index,
                mode,
                &cache.relations[r],
                &grad_h[r],
                &mut g_x,
            );
        }
        g_x
    }

    /// Glorot-uniform weights, zero biases, drawn in enumeration order.
    pub fn init_xavier(&mut self, rng: &mut Rng) {
        for p in self.params_mut() {
            init_tensor_xavier(p, rng);
        }
    }
}

/// Glorot-uniform fill for a weight tensor; bias tensors (single column)
/// stay zero.
pub(crate) fn init_tensor_xavier(p: &mut ParamTensor, rng: &mut Rng) {
    if p.value.cols() == 1 {
        return;
    }
    let bound = (6.0 / (p.value.rows() + p.value.cols()) as f64).sqrt();
    for v in p.value.as_mut_slice() {
        *v = rng.uniform(-bound, bound);
    }
}

/// Per-head query/key/value projections of every node.
pub fn compute_qkv(
    rel: &RgtRelationParams,
    x_prev: &Matrix,
) -> Result<(Vec<Matrix>, Vec<Matrix>, Vec<Matrix>), NnError> {
    let project = |ws: &[ParamTensor], bs: &[ParamTensor]| -> Result<Vec<Matrix>, NnError> {
        ws.iter()
            .zip(bs)
            .map(|(w, b)| linear(w, b, x_prev))
            .collect()
    };
    Ok((
        project(&rel.w_q, &rel.b_q)?,
        project(&rel.w_k, &rel.b_k)?,
        project(&rel.w_v, &rel.b_v)?,
    ))
}

/// Scaled dot-product attention weights for one head of one relation.
///
/// Returns one weight per edge, aligned with [`NeighborIndex`] CSR order:
/// for each target node, a softmax over its in-neighbors (computed with
/// max-subtraction, so large logits stay stable). Nodes without neighbors
/// contribute no entries.
pub fn attention_coeffs(q: &Matrix, k: &Matrix, index: &NeighborIndex, relation: usize) -> Vec<f64> {
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut alpha = Vec::with_capacity(index.num_edges(relation));
    for i in 0..index.num_nodes() {
        let js = index.neighbors(relation, i);
        if js.is_empty() {
            continue;
        }
        let q_i = q.row(i);
        let start = alpha.len();
        for &j in js {
            let logit: f64 = q_i.iter().zip(k.row(j)).map(|(a, b)| a * b).sum();
            alpha.push(logit * scale);
        }
        softmax_in_place(&mut alpha[start..]);
    }
    alpha
}

/// Uniform attention weights (`1 / |N(i)|` per neighbor), CSR order.
pub fn uniform_coeffs(index: &NeighborIndex, relation: usize) -> Vec<f64> {
    let mut alpha = Vec::with_capacity(index.num_edges(relation));
    for i in 0..index.num_nodes() {
        let m = index.neighbors(relation, i).len();
        alpha.extend(std::iter::repeat(1.0 / m as f64).take(m));
    }
    alpha
}

/// Attention-weighted neighborhood sum: head `c` fills its own column
/// block of the output with `sum_j alpha_ij v_j`, and the concatenation is
/// scaled by `1/heads`. Rows of isolated nodes are zero.
pub fn aggregate(
    alphas: &[Vec<f64>],
    vs: &[Matrix],
    index: &NeighborIndex,
    relation: usize,
) -> Matrix {
    let heads = vs.len();
    let d = vs[0].cols();
    let n = index.num_nodes();
    let mut u = Matrix::zeros(n, heads * d);
    for (c, (alpha, v)) in alphas.iter().zip(vs).enumerate() {
        for i in 0..n {
            let js = index.neighbors(relation, i);
            let base = index.edge_offset(relation, i);
            let u_i = u.row_mut(i);
            for (e, &j) in js.iter().enumerate() {
                let a = alpha[base + e];
                let v_j = v.row(j);
                for t in 0..d {
                    u_i[c * d + t] += a * v_j[t];
                }
            }
        }
    }
    u.scale(1.0 / heads as f64);
    u
}

/// Plain average of raw neighbor representations (ablation aggregate).
pub fn mean_neighbor_aggregate(x_prev: &Matrix, index: &NeighborIndex, relation: usize) -> Matrix {
    let n = x_prev.rows();
    let width = x_prev.cols();
    let mut u = Matrix::zeros(n, width);
    for i in 0..n {
        let js = index.neighbors(relation, i);
        if js.is_empty() {
            continue;
        }
        let inv = 1.0 / js.len() as f64;
        let u_i = u.row_mut(i);
        for &j in js {
            for (t, &v) in x_prev.row(j).iter().enumerate() {
                u_i[t] += v;
            }
        }
        for t in 0..width {
            u_i[t] *= inv;
        }
    }
    u
}

/// Gate and mix: `z = sigmoid(W_g [u ; x] + b_g)`,
/// `h = tanh(u) * z + x * (1 - z)`. Returns `(h, z, tanh(u))`.
pub fn gated_residual(
    rel: &RgtRelationParams,
    u: &Matrix,
    x_prev: &Matrix,
) -> Result<(Matrix, Matrix, Matrix), NnError> {
    let cat = u.hcat(x_prev);
    let z = sigmoid(&linear(&rel.w_gate, &rel.b_gate, &cat)?)?;
    let tanh_u = tanh(u)?;
    let mut h = Matrix::zeros(u.rows(), u.cols());
    let (hs, ts, zs, xs) = (
        h.as_mut_slice(),
        tanh_u.as_slice(),
        z.as_slice(),
        x_prev.as_slice(),
    );
    for idx in 0..hs.len() {
        hs[idx] = ts[idx] * zs[idx] + xs[idx] * (1.0 - zs[idx]);
    }
    Ok((h, z, tanh_u))
}

#[allow(clippy::too_many_arguments)]
fn relation_backward(
    rel: &mut RgtRelationParams,
    r: usize,
    heads: usize,
    head_dim: usize,
    x_prev: &Matrix,
    index: &NeighborIndex,
    mode: AggregatorMode,
    cache: &RelationCache,
    grad_h: &Matrix,
    g_x: &mut Matrix,
) {
    let n = x_prev.rows();
    let hidden = x_prev.cols();

    // Gate stage: recover dL/du and the direct residual path into x.
    let mut g_u = Matrix::zeros(n, hidden);
    if mode == AggregatorMode::NoGate {
        let (gu, gh, ts) = (g_u.as_mut_slice(), grad_h.as_slice(), cache.tanh_u.as_slice());
        for idx in 0..gu.len() {
            gu[idx] = gh[idx] * (1.0 - ts[idx] * ts[idx]);
        }
    } else {
        let mut g_zpre = Matrix::zeros(n, hidden);
        {
            let (gzp, gh, ts, zs, xs, gu) = (
                g_zpre.as_mut_slice(),
                grad_h.as_slice(),
                cache.tanh_u.as_slice(),
                cache.z.as_slice(),
                x_prev.as_slice(),
                g_u.as_mut_slice(),
            );
            for idx in 0..gzp.len() {
                let g = gh[idx];
                let z = zs[idx];
                let t = ts[idx];
                gu[idx] = g * z * (1.0 - t * t);
                let g_z = g * (t - xs[idx]);
                gzp[idx] = g_z * z * (1.0 - z);
            }
        }
        {
            let (gx, gh, zs) = (g_x.as_mut_slice(), grad_h.as_slice(), cache.z.as_slice());
            for idx in 0..gx.len() {
                gx[idx] += gh[idx] * (1.0 - zs[idx]);
            }
        }
        let cat = cache.u.hcat(x_prev);
        let g_cat = linear_backward(&mut rel.w_gate, &mut rel.b_gate, &cat, &g_zpre);
        for i in 0..n {
            let row = g_cat.row(i);
            let gu_i = g_u.row_mut(i);
            for t in 0..hidden {
                gu_i[t] += row[t];
            }
            let gx_i = g_x.row_mut(i);
            for t in 0..hidden {
                gx_i[t] += row[hidden + t];
            }
        }
    }

    // Aggregation stage: push dL/du through the mode's aggregate into
    // parameter gradients and dL/dx.
    match mode {
        AggregatorMode::Rgt | AggregatorMode::NoGate => {
            let inv_heads = 1.0 / heads as f64;
            let inv_sqrt_d = 1.0 / (head_dim as f64).sqrt();
            for c in 0..heads {
                let (q, k, v) = (&cache.q[c], &cache.k[c], &cache.v[c]);
                let alpha = &cache.alpha[c];
                let mut gq = Matrix::zeros(n, head_dim);
                let mut gk = Matrix::zeros(n, head_dim);
                let mut gv = Matrix::zeros(n, head_dim);
                for i in 0..n {
                    let js = index.neighbors(r, i);
                    if js.is_empty() {
                        continue;
                    }
                    let base = index.edge_offset(r, i);
                    let ga: Vec<f64> = g_u.row(i)[c * head_dim..(c + 1) * head_dim]
                        .iter()
                        .map(|g| g * inv_heads)
                        .collect();
                    // dL/dalpha and values' gradient in one sweep.
                    let mut d_alpha = Vec::with_capacity(js.len());
                    let mut gdot = 0.0;
                    for (e, &j) in js.iter().enumerate() {
                        let a = alpha[base + e];
                        let v_j = v.row(j);
                        let da: f64 = ga.iter().zip(v_j).map(|(g, vv)| g * vv).sum();
                        d_alpha.push(da);
                        gdot += a * da;
                        let gv_j = gv.row_mut(j);
                        for t in 0..head_dim {
                            gv_j[t] += a * ga[t];
                        }
                    }
                    // Softmax Jacobian, then chain into q and k.
                    let mut gq_acc = vec![0.0; head_dim];
                    let q_i = q.row(i);
                    for (e, &j) in js.iter().enumerate() {
                        let a = alpha[base + e];
                        let ds = a * (d_alpha[e] - gdot) * inv_sqrt_d;
                        let k_j = k.row(j);
                        for t in 0..head_dim {
                            gq_acc[t] += ds * k_j[t];
                        }
                        let gk_j = gk.row_mut(j);
                        for t in 0..head_dim {
                            gk_j[t] += ds * q_i[t];
                        }
                    }
                    let gq_i = gq.row_mut(i);
                    for t in 0..head_dim {
                        gq_i[t] += gq_acc[t];
                    }
                }
                g_x.add_assign(&linear_backward(&mut rel.w_q[c], &mut rel.b_q[c], x_prev, &gq));
                g_x.add_assign(&linear_backward(&mut rel.w_k[c], &mut rel.b_k[c], x_prev, &gk));
                g_x.add_assign(&linear_backward(&mut rel.w_v[c], &mut rel.b_v[c], x_prev, &gv));
            }
        }
        AggregatorMode::NoTransformer => {
            let inv_heads = 1.0 / heads as f64;
            for c in 0..heads {
                let mut gv = Matrix::zeros(n, head_dim);
                for i in 0..n {
                    let js = index.neighbors(r, i);
                    if js.is_empty() {
                        continue;
                    }
                    let w = inv_heads / js.len() as f64;
                    let gu_block = &g_u.row(i)[c * head_dim..(c + 1) * head_dim];
                    let ga: Vec<f64> = gu_block.iter().map(|g| g * w).collect();
                    for &j in js {
                        let gv_j = gv.row_mut(j);
                        for t in 0..head_dim {
                            gv_j[t] += ga[t];
                        }
                    }
                }
                g_x.add_assign(&linear_backward(&mut rel.w_v[c], &mut rel.b_v[c], x_prev, &gv));
            }
        }
        AggregatorMode::MeanNeighbor => {
            for i in 0..n {
                let js = index.neighbors(r, i);
                if js.is_empty() {
                    continue;
                }
                let inv = 1.0 / js.len() as f64;
                for &j in js {
                    let gu_i = g_u.row(i).to_vec();
                    let gx_j = g_x.row_mut(j);
                    for t in 0..hidden {
                        gx_j[t] += inv * gu_i[t];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{HinGraph, Label, Split};
    use crate::nn::finite_diff_check;

    fn test_graph(n: usize, edges: Vec<Vec<(usize, usize)>>) -> HinGraph {
        let names = (0..edges.len()).map(|r| format!("rel{r}")).collect();
        HinGraph::new(
            names,
            edges,
            Matrix::zeros(n, 1),
            vec![Label::Unlabeled; n],
            vec![Split::None; n],
        )
        .unwrap()
    }

    fn random_x(n: usize, h: usize, rng: &mut Rng) -> Matrix {
        let data = (0..n * h).map(|_| rng.standard_normal()).collect();
        Matrix::from_vec(n, h, data).unwrap()
    }

    /// 6 nodes, 2 relations; node 5 is isolated in relation 0.
    fn small_setup(hidden: usize, heads: usize, seed: u64) -> (RgtParams, Matrix, NeighborIndex) {
        let g = test_graph(
            6,
            vec![
                vec![(1, 0), (2, 0), (3, 0), (0, 1), (4, 2), (2, 3), (0, 4), (3, 4)],
                vec![(5, 0), (4, 1), (1, 2), (2, 5), (3, 5), (0, 3)],
            ],
        );
        let index = NeighborIndex::build(&g);
        let mut rng = Rng::new(seed);
        let mut params = RgtParams::new(
            "layer0",
            &["rel0".to_string(), "rel1".to_string()],
            hidden,
            heads,
        )
        .unwrap();
        params.init_xavier(&mut rng);
        let x = random_x(6, hidden, &mut rng);
        (params, x, index)
    }

    #[test]
    fn attention_rows_are_distributions() {
        let (params, x, index) = small_setup(6, 3, 1);
        let (q, k, _) = compute_qkv(&params.relations[0], &x).unwrap();
        for c in 0..3 {
            let alpha = attention_coeffs(&q[c], &k[c], &index, 0);
            assert_eq!(alpha.len(), index.num_edges(0));
            for i in 0..6 {
                let js = index.neighbors(0, i);
                if js.is_empty() {
                    continue;
                }
                let base = index.edge_offset(0, i);
                let sum: f64 = alpha[base..base + js.len()].iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "node {i} head {c} sum {sum}");
                assert!(alpha[base..base + js.len()].iter().all(|&a| a > 0.0));
            }
        }
    }

    #[test]
    fn attention_matches_dense_softmax_on_complete_graph() {
        // Complete graph with self-loops: every neighborhood is all nodes,
        // so attention must equal a row softmax of the dense logit matrix.
        let n = 5;
        let mut edges = Vec::new();
        for s in 0..n {
            for d in 0..n {
                edges.push((s, d));
            }
        }
        let g = test_graph(n, vec![edges]);
        let index = NeighborIndex::build(&g);
        let mut rng = Rng::new(2);
        let mut params = RgtParams::new("l", &["rel0".to_string()], 4, 2).unwrap();
        params.init_xavier(&mut rng);
        let x = random_x(n, 4, &mut rng);
        let (q, k, _) = compute_qkv(&params.relations[0], &x).unwrap();
        for c in 0..2 {
            let alpha = attention_coeffs(&q[c], &k[c], &index, 0);
            let scale = 1.0 / (q[c].cols() as f64).sqrt();
            for i in 0..n {
                let mut logits: Vec<f64> = (0..n)
                    .map(|j| {
                        q[c].row(i)
                            .iter()
                            .zip(k[c].row(j))
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            * scale
                    })
                    .collect();
                softmax_in_place(&mut logits);
                let base = index.edge_offset(0, i);
                for j in 0..n {
                    assert!(
                        (alpha[base + j] - logits[j]).abs() < 1e-12,
                        "mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_query_params_give_uniform_attention() {
        let (mut params, x, index) = small_setup(6, 2, 3);
        for c in 0..2 {
            params.relations[0].w_q[c].value.fill(0.0);
            params.relations[0].b_q[c].value.fill(0.0);
        }
        let (q, k, _) = compute_qkv(&params.relations[0], &x).unwrap();
        let alpha = attention_coeffs(&q[0], &k[0], &index, 0);
        let uniform = uniform_coeffs(&index, 0);
        for (a, u) in alpha.iter().zip(&uniform) {
            assert!((a - u).abs() < 1e-15);
        }
    }

    #[test]
    fn single_neighbor_gets_weight_one() {
        let g = test_graph(3, vec![vec![(2, 1)]]);
        let index = NeighborIndex::build(&g);
        let mut rng = Rng::new(4);
        let mut params = RgtParams::new("l", &["rel0".to_string()], 4, 1).unwrap();
        params.init_xavier(&mut rng);
        let x = random_x(3, 4, &mut rng);
        let (q, k, _) = compute_qkv(&params.relations[0], &x).unwrap();
        let alpha = attention_coeffs(&q[0], &k[0], &index, 0);
        assert_eq!(alpha, vec![1.0]);
    }

    #[test]
    fn isolated_node_aggregates_to_zero() {
        let (params, x, index) = small_setup(6, 3, 5);
        let (_, cache) = params.forward(&x, &index, AggregatorMode::Rgt).unwrap();
        // Node 5 has no in-neighbors in relation 0.
        assert!(cache.relations[0].u.row(5).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn head_blocks_are_disjoint() {
        // Zeroing one head's value weights must zero exactly its block of u.
        let (mut params, x, index) = small_setup(6, 3, 6);
        params.relations[0].w_v[1].value.fill(0.0);
        params.relations[0].b_v[1].value.fill(0.0);
        let (_, cache) = params.forward(&x, &index, AggregatorMode::Rgt).unwrap();
        let u = &cache.relations[0].u;
        let d = params.head_dim;
        for i in 0..6 {
            assert!(u.row(i)[d..2 * d].iter().all(|&v| v == 0.0), "head 1 block");
        }
        // Other heads keep signal for nodes with neighbors.
        assert!(u.row(0)[..d].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gate_limits_select_each_branch() {
        let (mut params, x, index) = small_setup(6, 2, 7);
        // Large positive gate bias: z -> 1, h -> tanh(u).
        params.relations[0].w_gate.value.fill(0.0);
        params.relations[0].b_gate.value.fill(20.0);
        params.relations[1].w_gate.value.fill(0.0);
        params.relations[1].b_gate.value.fill(20.0);
        let (hs, cache) = params.forward(&x, &index, AggregatorMode::Rgt).unwrap();
        for (h, c) in hs.iter().zip(&cache.relations) {
            for (a, b) in h.as_slice().iter().zip(c.tanh_u.as_slice()) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        // Large negative bias: z -> 0, h -> x.
        params.relations[0].b_gate.value.fill(-20.0);
        params.relations[1].b_gate.value.fill(-20.0);
        let (hs, _) = params.forward(&x, &index, AggregatorMode::Rgt).unwrap();
        for h in &hs {
            for (a, b) in h.as_slice().iter().zip(x.as_slice()) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        // Zero gate parameters: exact even mix.
        params.relations[0].b_gate.value.fill(0.0);
        params.relations[1].b_gate.value.fill(0.0);
        let (hs, cache) = params.forward(&x, &index, AggregatorMode::Rgt).unwrap();
        for (h, c) in hs.iter().zip(&cache.relations) {
            for ((a, t), xv) in h
                .as_slice()
                .iter()
                .zip(c.tanh_u.as_slice())
                .zip(x.as_slice())
            {
                assert!((a - (0.5 * t + 0.5 * xv)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_neighbor_equals_uniform_attention_with_identity_values() {
        // With one head, identity value projection, and zero bias, uniform
        // attention aggregates exactly the neighbor mean; the two ablation
        // paths must agree.
        let (mut params, x, index) = small_setup(4, 1, 8);
        for rel in &mut params.relations {
            rel.w_v[0].value = Matrix::identity(4);
            rel.b_v[0].value.fill(0.0);
        }
        let (h_nt, cache_nt) = params
            .forward(&x, &index, AggregatorMode::NoTransformer)
            .unwrap();
        let (h_mn, cache_mn) = params
            .forward(&x, &index, AggregatorMode::MeanNeighbor)
            .unwrap();
        for r in 0..2 {
            for (a, b) in cache_nt.relations[r]
                .u
                .as_slice()
                .iter()
                .zip(cache_mn.relations[r].u.as_slice())
            {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in h_nt[r].as_slice().iter().zip(h_mn[r].as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        // Relabeling nodes and edges consistently must permute the outputs.
        let n = 6;
        let edges0 = vec![(1, 0), (2, 0), (3, 0), (0, 1), (4, 2), (2, 3), (0, 4), (3, 4)];
        let edges1 = vec![(5, 0), (4, 1), (1, 2), (2, 5), (3, 5), (0, 3)];
        let perm = [3usize, 5, 0, 2, 4, 1];
        let mut rng = Rng::new(9);
        let mut params = RgtParams::new(
            "l",
            &["rel0".to_string(), "rel1".to_string()],
            6,
            2,
        )
        .unwrap();
        params.init_xavier(&mut rng);
        let x = random_x(n, 6, &mut rng);

        let g = test_graph(n, vec![edges0.clone(), edges1.clone()]);
        let (hs, _) = params
            .forward(&x, &NeighborIndex::build(&g), AggregatorMode::Rgt)
            .unwrap();

        let remap = |es: &[(usize, usize)]| {
            es.iter().map(|&(s, d)| (perm[s], perm[d])).collect::<Vec<_>>()
        };
        let gp = test_graph(n, vec![remap(&edges0), remap(&edges1)]);
        let mut xp = Matrix::zeros(n, 6);
        for i in 0..n {
            xp.row_mut(perm[i]).copy_from_slice(x.row(i));
        }
        let (hps, _) = params
            .forward(&xp, &NeighborIndex::build(&gp), AggregatorMode::Rgt)
            .unwrap();
        for r in 0..2 {
            for i in 0..n {
                for t in 0..6 {
                    let diff = (hs[r].get(i, t) - hps[r].get(perm[i], t)).abs();
                    assert!(diff < 1e-10, "relation {r} node {i} dim {t}: {diff}");
                }
            }
        }
    }

    struct LayerCheck {
        params: RgtParams,
        x: ParamTensor,
        index: NeighborIndex,
        loss_weights: Vec<Matrix>,
        mode: AggregatorMode,
    }

    /// Tiny L2 tether on the parameters. Without it, coordinates whose
    /// data gradient is exactly zero by symmetry (key biases: softmax is
    /// invariant to a per-neighborhood logit shift) would compare pure
    /// rounding noise against the relative-error floor. The real training
    /// loss carries an L2 term for the same reason.
    const TETHER: f64 = 1e-3;

    fn layer_loss(state: &mut LayerCheck) -> f64 {
        let (hs, _) = state
            .params
            .forward(&state.x.value, &state.index, state.mode)
            .unwrap();
        let data: f64 = hs
            .iter()
            .zip(&state.loss_weights)
            .map(|(h, w)| {
                h.as_slice()
                    .iter()
                    .zip(w.as_slice())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum();
        let reg: f64 = state
            .params
            .params()
            .iter()
            .map(|p| p.value.sum_of_squares())
            .sum();
        data + TETHER * reg
    }

    fn gradcheck_mode(mode: AggregatorMode) {
        let hidden = 6;
        let (mut params, x, index) = small_setup(hidden, 3, 11);
        let mut rng = Rng::new(77);
        // Give biases nonzero values so every coordinate is live.
        for p in params.params_mut() {
            if p.value.cols() == 1 {
                for v in p.value.as_mut_slice() {
                    *v = rng.uniform(-0.5, 0.5);
                }
            }
        }
        let loss_weights: Vec<Matrix> = (0..2).map(|_| random_x(6, hidden, &mut rng)).collect();

        let (_, cache) = params.forward(&x, &index, mode).unwrap();
        let g_x = params.backward(&x, &index, mode, &cache, &loss_weights);
        for p in params.params_mut() {
            let scaled = p.value.map(|v| 2.0 * TETHER * v);
            p.grad.add_assign(&scaled);
        }
        let mut state = LayerCheck {
            params,
            x: ParamTensor::new("x", x),
            index,
            loss_weights,
            mode,
        };
        state.x.grad = g_x;
        let err = finite_diff_check(
            &mut state,
            |s| {
                let mut ps = s.params.params_mut();
                ps.push(&mut s.x);
                ps
            },
            layer_loss,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "mode {mode:?}: max rel error {err}");
    }

    #[test]
    fn layer_gradient_check_full() {
        gradcheck_mode(AggregatorMode::Rgt);
    }

    #[test]
    fn layer_gradient_check_no_transformer() {
        gradcheck_mode(AggregatorMode::NoTransformer);
    }

    #[test]
    fn layer_gradient_check_no_gate() {
        gradcheck_mode(AggregatorMode::NoGate);
    }

    #[test]
    fn layer_gradient_check_mean_neighbor() {
        gradcheck_mode(AggregatorMode::MeanNeighbor);
    }

    #[test]
    fn rejects_indivisible_head_count() {
        assert!(RgtParams::new("l", &["r".to_string()], 6, 4).is_err());
        assert!(RgtParams::new("l", &["r".to_string()], 6, 0).is_err());
    }
}
