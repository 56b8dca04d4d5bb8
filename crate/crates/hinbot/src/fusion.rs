//! Fusing per-relation representations into one vector per node.
//!
//! The layer stage before this one emits one matrix per relation. Semantic
//! attention scores each relation with a learned probe: head `d` maps node
//! vectors through `tanh(W_d h + b_d)`, dots them with an attention vector
//! `q_d`, and averages over all nodes, giving one scalar per relation.
//! A softmax over relations turns the scores into weights `beta`, and the
//! fused output is the beta-weighted sum of relation outputs averaged over
//! heads:
//!
//! `x_i = (1/D) * sum_d sum_r beta[d][r] * h_i^r`
//!
//! The per-node average makes `beta` a property of the whole graph, not of
//! individual nodes; exporting it tells you how much each relation
//! contributed. [`FusionMode`] offers elementwise pooling ablations (sum,
//! mean, max, min) in place of semantic attention.

use crate::nn::{linear, linear_backward, softmax_in_place, tanh};
use crate::nn::{Matrix, NnError, ParamTensor, Rng};
use crate::rgt::init_tensor_xavier;

/// How per-relation outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    SemanticAttention,
    Sum,
    Mean,
    Max,
    Min,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::SemanticAttention => "semantic_attention",
            FusionMode::Sum => "sum",
            FusionMode::Mean => "mean",
            FusionMode::Max => "max",
            FusionMode::Min => "min",
        }
    }

    pub fn from_str(s: &str) -> Option<FusionMode> {
        match s {
            "semantic_attention" => Some(FusionMode::SemanticAttention),
            "sum" => Some(FusionMode::Sum),
            "mean" => Some(FusionMode::Mean),
            "max" => Some(FusionMode::Max),
            "min" => Some(FusionMode::Min),
            _ => None,
        }
    }
}

/// One semantic head: projection `w`/`b` and attention vector `q`.
#[derive(Debug, Clone)]
pub struct SemanticHead {
    pub w: ParamTensor,
    pub b: ParamTensor,
    pub q: ParamTensor,
}

/// Semantic attention parameters; `heads.len()` is the head count `D`.
/// The probe dimension equals `hidden`.
#[derive(Debug, Clone)]
pub struct SemanticParams {
    pub hidden: usize,
    pub heads: Vec<SemanticHead>,
}

/// Raw scores and normalized weights, heads x relations.
#[derive(Debug, Clone)]
pub struct RelationWeights {
    pub scores: Matrix,
    pub beta: Matrix,
}

/// Forward intermediates for the backward pass: `t[d][r]` holds head `d`'s
/// tanh probe of relation `r`, plus the relation weights.
#[derive(Debug, Clone)]
pub struct SemanticCache {
    pub t: Vec<Vec<Matrix>>,
    pub weights: RelationWeights,
}

impl SemanticParams {
    pub fn new(prefix: &str, hidden: usize, heads: usize) -> SemanticParams {
        let heads = (0..heads)
            .map(|d| SemanticHead {
                w: ParamTensor::new(
                    format!("{prefix}.sem{d}.w"),
                    Matrix::zeros(hidden, hidden),
                ),
                b: ParamTensor::new(format!("{prefix}.sem{d}.b"), Matrix::zeros(hidden, 1)),
                q: ParamTensor::new(format!("{prefix}.sem{d}.q"), Matrix::zeros(hidden, 1)),
            })
            .collect();
        SemanticParams { hidden, heads }
    }

    /// Fixed enumeration order: per head `w`, `b`, `q`.
    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for head in &mut self.heads {
            out.push(&mut head.w);
            out.push(&mut head.b);
            out.push(&mut head.q);
        }
        out
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        for head in &self.heads {
            out.push(&head.w);
            out.push(&head.b);
            out.push(&head.q);
        }
        out
    }

    /// Glorot-uniform `w`; `q` gets a small uniform draw (it is a weight,
    /// not a bias, despite being a single column); `b` stays zero.
    pub fn init_xavier(&mut self, rng: &mut Rng) {
        for head in &mut self.heads {
            init_tensor_xavier(&mut head.w, rng);
            let bound = (6.0 / (head.q.value.rows() + 1) as f64).sqrt();
            for v in head.q.value.as_mut_slice() {
                *v = rng.uniform(-bound, bound);
            }
        }
    }

    /// Raw relation scores (heads x relations) plus the probe activations
    /// each score was averaged from.
    pub fn relation_scores(
        &self,
        h_rels: &[Matrix],
    ) -> Result<(Matrix, Vec<Vec<Matrix>>), NnError> {
        if h_rels.is_empty() {
            return Err(NnError::EmptyInput);
        }
        let n = h_rels[0].rows();
        if n == 0 {
            return Err(NnError::EmptyInput);
        }
        for h in h_rels {
            if h.rows() != n || h.cols() != self.hidden {
                return Err(NnError::ShapeMismatch {
                    op: "relation_scores",
                    expected: format!("{n}x{}", self.hidden),
                    got: h.shape_string(),
                });
            }
        }
        let mut scores = Matrix::zeros(self.heads.len(), h_rels.len());
        let mut t_all = Vec::with_capacity(self.heads.len());
        for (d, head) in self.heads.iter().enumerate() {
            let mut t_head = Vec::with_capacity(h_rels.len());
            for (r, h) in h_rels.iter().enumerate() {
                let t = tanh(&linear(&head.w, &head.b, h)?)?;
                let mut total = 0.0;
                for i in 0..n {
                    let t_i = t.row(i);
                    let mut dot = 0.0;
                    for (s, &tv) in t_i.iter().enumerate() {
                        dot += head.q.value.get(s, 0) * tv;
                    }
                    total += dot;
                }
                scores.set(d, r, total / n as f64);
                t_head.push(t);
            }
            t_all.push(t_head);
        }
        Ok((scores, t_all))
    }

    /// Full semantic-attention fusion.
    pub fn forward(&self, h_rels: &[Matrix]) -> Result<(Matrix, SemanticCache), NnError> {
        let (scores, t) = self.relation_scores(h_rels)?;
        let beta = normalize_relation_weights(&scores);
        let fused = fuse(&beta, h_rels);
        Ok((
            fused,
            SemanticCache {
                t,
                weights: RelationWeights { scores, beta },
            },
        ))
    }

    /// Backward pass: accumulates parameter gradients and returns the loss
    /// gradient per relation output.
    pub fn backward(
        &mut self,
        h_rels: &[Matrix],
        cache: &SemanticCache,
        grad_x: &Matrix,
    ) -> Vec<Matrix> {
        let num_rel = h_rels.len();
        let num_heads = self.heads.len();
        let n = h_rels[0].rows();
        let inv_d = 1.0 / num_heads as f64;
        let beta = &cache.weights.beta;

        // Direct path: x depends on h^r with coefficient mean_d beta[d][r].
        let mut g_h: Vec<Matrix> = (0..num_rel)
            .map(|r| {
                let coeff: f64 = (0..num_heads).map(|d| beta.get(d, r)).sum::<f64>() * inv_d;
                let mut g = grad_x.clone();
                g.scale(coeff);
                g
            })
            .collect();

        // dL/dbeta[d][r] = <grad_x, h^r> / D, shared across heads.
        let g_beta_row: Vec<f64> = (0..num_rel)
            .map(|r| {
                grad_x
                    .as_slice()
                    .iter()
                    .zip(h_rels[r].as_slice())
                    .map(|(g, h)| g * h)
                    .sum::<f64>()
                    * inv_d
            })
            .collect();

        for (d, head) in self.heads.iter_mut().enumerate() {
            // Softmax Jacobian over relations for this head.
            let dot: f64 = (0..num_rel).map(|r| beta.get(d, r) * g_beta_row[r]).sum();
            for r in 0..num_rel {
                let g_score = beta.get(d, r) * (g_beta_row[r] - dot);
                if g_score == 0.0 {
                    continue;
                }
                let t = &cache.t[d][r];
                // score = mean_i q . t_i
                let per_node = g_score / n as f64;
                // q gradient: mean of t rows.
                {
                    let gq = head.q.grad.as_mut_slice();
                    for i in 0..n {
                        for (s, &tv) in t.row(i).iter().enumerate() {
                            gq[s] += per_node * tv;
                        }
                    }
                }
                // Probe gradient through tanh into w, b, and h^r.
                let mut g_pre = Matrix::zeros(n, self.hidden);
                for i in 0..n {
                    let t_i = t.row(i);
                    let row = g_pre.row_mut(i);
                    for s in 0..t_i.len() {
                        row[s] = per_node * head.q.value.get(s, 0) * (1.0 - t_i[s] * t_i[s]);
                    }
                }
                g_h[r].add_assign(&linear_backward(&mut head.w, &mut head.b, &h_rels[r], &g_pre));
            }
        }
        g_h
    }
}

/// Row softmax: normalizes each head's scores into relation weights.
pub fn normalize_relation_weights(scores: &Matrix) -> Matrix {
    let mut beta = scores.clone();
    for d in 0..beta.rows() {
        softmax_in_place(beta.row_mut(d));
    }
    beta
}

/// Weighted fusion `x_i = (1/D) sum_d sum_r beta[d][r] h_i^r`.
pub fn fuse(beta: &Matrix, h_rels: &[Matrix]) -> Matrix {
    assert_eq!(beta.cols(), h_rels.len(), "one weight column per relation");
    let inv_d = 1.0 / beta.rows() as f64;
    let mut out = Matrix::zeros(h_rels[0].rows(), h_rels[0].cols());
    for (r, h) in h_rels.iter().enumerate() {
        let coeff: f64 = (0..beta.rows()).map(|d| beta.get(d, r)).sum::<f64>() * inv_d;
        let o = out.as_mut_slice();
        for (idx, &v) in h.as_slice().iter().enumerate() {
            o[idx] += coeff * v;
        }
    }
    out
}

/// Elementwise pooling across relations for the ablation modes. Max and
/// min break ties toward the lowest relation index.
pub fn pool_fuse(mode: FusionMode, h_rels: &[Matrix]) -> Matrix {
    assert!(
        mode != FusionMode::SemanticAttention,
        "pool_fuse handles pooling modes only"
    );
    let mut out = h_rels[0].clone();
    match mode {
        FusionMode::Sum | FusionMode::Mean => {
            for h in &h_rels[1..] {
                out.add_assign(h);
            }
            if mode == FusionMode::Mean {
                out.scale(1.0 / h_rels.len() as f64);
            }
        }
        FusionMode::Max => {
            for h in &h_rels[1..] {
                let o = out.as_mut_slice();
                for (idx, &v) in h.as_slice().iter().enumerate() {
                    if v > o[idx] {
                        o[idx] = v;
                    }
                }
            }
        }
        FusionMode::Min => {
            for h in &h_rels[1..] {
                let o = out.as_mut_slice();
                for (idx, &v) in h.as_slice().iter().enumerate() {
                    if v < o[idx] {
                        o[idx] = v;
                    }
                }
            }
        }
        FusionMode::SemanticAttention => unreachable!(),
    }
    out
}

/// Backward companion of [`pool_fuse`]. For max/min the gradient routes to
/// the first relation attaining the extremum, matching the forward
/// tie-break.
pub fn pool_backward(mode: FusionMode, h_rels: &[Matrix], grad_x: &Matrix) -> Vec<Matrix> {
    match mode {
        FusionMode::Sum => h_rels.iter().map(|_| grad_x.clone()).collect(),
        FusionMode::Mean => {
            let inv = 1.0 / h_rels.len() as f64;
            h_rels
                .iter()
                .map(|_| {
                    let mut g = grad_x.clone();
                    g.scale(inv);
                    g
                })
                .collect()
        }
        FusionMode::Max | FusionMode::Min => {
            let mut out: Vec<Matrix> = h_rels
                .iter()
                .map(|h| Matrix::zeros(h.rows(), h.cols()))
                .collect();
            let len = grad_x.len();
            for idx in 0..len {
                let mut best_r = 0;
                let mut best = h_rels[0].as_slice()[idx];
                for (r, h) in h_rels.iter().enumerate().skip(1) {
                    let v = h.as_slice()[idx];
                    let better = if mode == FusionMode::Max { v > best } else { v < best };
                    if better {
                        best = v;
                        best_r = r;
                    }
                }
                out[best_r].as_mut_slice()[idx] = grad_x.as_slice()[idx];
            }
            out
        }
        FusionMode::SemanticAttention => {
            panic!("pool_backward handles pooling modes only")
        }
    }
}
