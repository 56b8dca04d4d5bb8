//! Heterogeneous graph container and CSV IO.
//!
//! One shared node set carries features, labels, and split assignments;
//! each relation contributes its own directed edge set over those nodes.
//! Message passing reads *in-neighbors*: an edge `(src, dst)` makes `src`
//! visible to `dst`. [`NeighborIndex`] stores that view in CSR form with
//! sources sorted ascending, so reductions over a neighborhood always run
//! in the same order.
//!
//! On disk a graph is a directory: `nodes.csv` with header
//! `id,label,split,f0,...`, one `edges_<relation>.csv` per relation with
//! header `src,dst`, and `relations.txt` listing relation names in order.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::nn::Matrix;

/// Errors from graph construction and IO. IO and parse variants carry the
/// offending path, and parse variants the 1-based line number.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: feature '{field}' is not a finite number")]
    NonNumericFeature {
        path: PathBuf,
        line: usize,
        field: String,
    },
    #[error("{path}:{line}: duplicate node id {id} (splits would overlap)")]
    DuplicateNode {
        path: PathBuf,
        line: usize,
        id: usize,
    },
    #[error("{path}:{line}: node id {id} out of range for {num_nodes} nodes")]
    NodeIdOutOfRange {
        path: PathBuf,
        line: usize,
        id: usize,
        num_nodes: usize,
    },
    #[error("{path}:{line}: unknown node id {id} in edge (graph has {num_nodes} nodes)")]
    UnknownNodeId {
        path: PathBuf,
        line: usize,
        id: usize,
        num_nodes: usize,
    },
    #[error("duplicate relation name '{name}'")]
    DuplicateRelation { name: String },
    #[error("edge ({src}, {dst}) in relation '{relation}' out of range for {num_nodes} nodes")]
    EdgeOutOfRange {
        relation: String,
        src: usize,
        dst: usize,
        num_nodes: usize,
    },
    #[error("node {node} is labeled but assigned to no split")]
    LabeledNodeWithoutSplit { node: usize },
    #[error("{what} has {got} entries but the graph has {expected} nodes")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{got} edge sets for {expected} relations")]
    RelationCountMismatch { got: usize, expected: usize },
    #[error("graph has no nodes")]
    Empty,
}

/// Ground-truth class of a node, or absence thereof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Human,
    Bot,
    Unlabeled,
}

impl Label {
    /// CSV encoding: 0 human, 1 bot, -1 unlabeled.
    pub fn to_code(self) -> i8 {
        match self {
            Label::Human => 0,
            Label::Bot => 1,
            Label::Unlabeled => -1,
        }
    }

    pub fn from_code(code: i64) -> Option<Label> {
        match code {
            0 => Some(Label::Human),
            1 => Some(Label::Bot),
            -1 => Some(Label::Unlabeled),
            _ => None,
        }
    }
}

/// Dataset partition a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }

    pub fn from_str(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            "none" => Some(Split::None),
            _ => None,
        }
    }
}

/// A relation's position and name. Index equals its position in the graph's
/// relation list, so it can address per-relation parameter and edge arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationId {
    pub index: usize,
    pub name: String,
}

/// Heterogeneous graph: one node set, one directed edge set per relation.
///
/// Invariants, enforced at construction: edge endpoints are in range, edges
/// per relation are sorted and deduplicated, relation names are unique,
/// feature rows are finite (via [`Matrix`]), and every labeled node belongs
/// to exactly one split.
#[derive(Debug, Clone, PartialEq)]
pub struct HinGraph {
    num_nodes: usize,
    relations: Vec<RelationId>,
    edges: Vec<Vec<(usize, usize)>>,
    features: Matrix,
    labels: Vec<Label>,
    splits: Vec<Split>,
}

impl HinGraph {
    pub fn new(
        relation_names: Vec<String>,
        mut edges: Vec<Vec<(usize, usize)>>,
        features: Matrix,
        labels: Vec<Label>,
        splits: Vec<Split>,
    ) -> Result<HinGraph, GraphError> {
        let num_nodes = features.rows();
        if num_nodes == 0 {
            return Err(GraphError::Empty);
        }
        if labels.len() != num_nodes {
            return Err(GraphError::LengthMismatch {
                what: "label vector",
                got: labels.len(),
                expected: num_nodes,
            });
        }
        if splits.len() != num_nodes {
            return Err(GraphError::LengthMismatch {
                what: "split vector",
                got: splits.len(),
                expected: num_nodes,
            });
        }
        if edges.len() != relation_names.len() {
            return Err(GraphError::RelationCountMismatch {
                got: edges.len(),
                expected: relation_names.len(),
            });
        }
        for (i, name) in relation_names.iter().enumerate() {
            if relation_names[..i].contains(name) {
                return Err(GraphError::DuplicateRelation { name: name.clone() });
            }
        }
        for (r, rel_edges) in edges.iter_mut().enumerate() {
            for &(src, dst) in rel_edges.iter() {
                if src >= num_nodes || dst >= num_nodes {
                    return Err(GraphError::EdgeOutOfRange {
                        relation: relation_names[r].clone(),
                        src,
                        dst,
                        num_nodes,
                    });
                }
            }
            rel_edges.sort_unstable();
            rel_edges.dedup();
        }
        for (node, (&label, &split)) in labels.iter().zip(&splits).enumerate() {
            if label != Label::Unlabeled && split == Split::None {
                return Err(GraphError::LabeledNodeWithoutSplit { node });
            }
        }
        let relations = relation_names
            .into_iter()
            .enumerate()
            .map(|(index, name)| RelationId { index, name })
            .collect();
        Ok(HinGraph {
            num_nodes,
            relations,
            edges,
            features,
            labels,
            splits,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    pub fn relation_names(&self) -> Vec<String> {
        self.relations.iter().map(|r| r.name.clone()).collect()
    }

    /// Sorted, deduplicated `(src, dst)` pairs of one relation.
    pub fn edges(&self, relation: usize) -> &[(usize, usize)] {
        &self.edges[relation]
    }

    /// Node features, one row per node.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    /// Labeled nodes assigned to `split`, ascending. Unlabeled nodes are
    /// never returned: they carry no supervision signal.
    pub fn labeled_nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes)
            .filter(|&i| self.splits[i] == split && self.labels[i] != Label::Unlabeled)
            .collect()
    }

    /// Restriction to a subset of relations (same nodes, features, labels).
    /// `keep` lists relation indices; their order becomes the new index order.
    pub fn subset_relations(&self, keep: &[usize]) -> HinGraph {
        let relations = keep
            .iter()
            .enumerate()
            .map(|(index, &r)| RelationId {
                index,
                name: self.relations[r].name.clone(),
            })
            .collect();
        let edges = keep.iter().map(|&r| self.edges[r].clone()).collect();
        HinGraph {
            num_nodes: self.num_nodes,
            relations,
            edges,
            features: self.features.clone(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
        }
    }
}

/// CSR view of in-neighborhoods: for each relation and target node `i`, the
/// ascending list of sources `j` with an edge `(j, i)`.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    num_nodes: usize,
    offsets: Vec<Vec<usize>>,
    sources: Vec<Vec<usize>>,
}

impl NeighborIndex {
    pub fn build(graph: &HinGraph) -> NeighborIndex {
        let n = graph.num_nodes();
        let mut offsets = Vec::with_capacity(graph.num_relations());
        let mut sources = Vec::with_capacity(graph.num_relations());
        for r in 0..graph.num_relations() {
            let edges = graph.edges(r);
            let mut counts = vec![0usize; n + 1];
            for &(_, dst) in edges {
                counts[dst + 1] += 1;
            }
            for i in 0..n {
                counts[i + 1] += counts[i];
            }
            let mut srcs = vec![0usize; edges.len()];
            let mut cursor = counts.clone();
            for &(src, dst) in edges {
                srcs[cursor[dst]] = src;
                cursor[dst] += 1;
            }
            // Edges arrive sorted by (src, dst), so each target's source run
            // is already ascending; assert rather than re-sort.
            for i in 0..n {
                debug_assert!(srcs[counts[i]..counts[i + 1]].windows(2).all(|w| w[0] < w[1]));
            }
            offsets.push(counts);
            sources.push(srcs);
        }
        NeighborIndex {
            num_nodes: n,
            offsets,
            sources,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.offsets.len()
    }

    /// In-neighbors of `target` under `relation`, ascending. Empty slice for
    /// isolated nodes.
    pub fn neighbors(&self, relation: usize, target: usize) -> &[usize] {
        let off = &self.offsets[relation];
        &self.sources[relation][off[target]..off[target + 1]]
    }

    /// Number of edges in `relation` (equals the CSR storage length).
    pub fn num_edges(&self, relation: usize) -> usize {
        self.sources[relation].len()
    }

    /// Offset of `target`'s neighbor run inside the relation's edge-aligned
    /// arrays, for code that stores one value per edge in CSR order.
    pub fn edge_offset(&self, relation: usize, target: usize) -> usize {
        self.offsets[relation][target]
    }
}

/// Per-relation edge-count and in-degree summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationDegreeStats {
    pub relation: String,
    pub num_edges: usize,
    pub mean_in_degree: f64,
    /// `histogram[d]` = number of nodes with in-degree `d`.
    pub histogram: Vec<usize>,
}

impl fmt::Display for RelationDegreeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} edges, mean in-degree {:.3}, max in-degree {}",
            self.relation,
            self.num_edges,
            self.mean_in_degree,
            self.histogram.len().saturating_sub(1)
        )
    }
}

pub fn degree_stats(graph: &HinGraph) -> Vec<RelationDegreeStats> {
    let n = graph.num_nodes();
    (0..graph.num_relations())
        .map(|r| {
            let mut in_degree = vec![0usize; n];
            for &(_, dst) in graph.edges(r) {
                in_degree[dst] += 1;
            }
            let num_edges = graph.edges(r).len();
            let max_deg = in_degree.iter().copied().max().unwrap_or(0);
            let mut histogram = vec![0usize; max_deg + 1];
            for &d in &in_degree {
                histogram[d] += 1;
            }
            RelationDegreeStats {
                relation: graph.relations()[r].name.clone(),
                num_edges,
                mean_in_degree: num_edges as f64 / n as f64,
                histogram,
            }
        })
        .collect()
}

fn read_to_string(path: &Path) -> Result<String, GraphError> {
    std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), GraphError> {
    let io_err = |source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(contents.as_bytes()).map_err(io_err)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Loads a graph from a node file plus one `(name, path)` edge file per
/// relation. Relation order follows the slice order.
pub fn load_graph(
    nodes_path: &Path,
    edge_files: &[(String, PathBuf)],
) -> Result<HinGraph, GraphError> {
    let (features, labels, splits) = load_nodes(nodes_path)?;
    let num_nodes = features.rows();
    let mut relation_names = Vec::with_capacity(edge_files.len());
    let mut edges = Vec::with_capacity(edge_files.len());
    for (name, path) in edge_files {
        relation_names.push(name.clone());
        edges.push(load_edges(path, num_nodes)?);
    }
    HinGraph::new(relation_names, edges, features, labels, splits)
}

fn load_nodes(path: &Path) -> Result<(Matrix, Vec<Label>, Vec<Split>), GraphError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty node file"))?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.len() < 3 || header_fields[..3] != ["id", "label", "split"] {
        return Err(parse_err(path, 1, "node header must start with 'id,label,split'"));
    }
    let feature_dim = header_fields.len() - 3;
    for (k, field) in header_fields[3..].iter().enumerate() {
        if *field != format!("f{k}") {
            return Err(parse_err(
                path,
                1,
                format!("feature column {} must be named 'f{k}', got '{field}'", k + 3),
            ));
        }
    }

    struct Row {
        id: usize,
        label: Label,
        split: Split,
        feats: Vec<f64>,
        line: usize,
    }
    let mut rows: Vec<Row> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            return Err(parse_err(path, line, "empty line"));
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != header_fields.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", header_fields.len(), fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad node id '{}'", fields[0])))?;
        let label_code: i64 = fields[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad label '{}'", fields[1])))?;
        let label = Label::from_code(label_code).ok_or_else(|| {
            parse_err(path, line, format!("label must be 0, 1, or -1, got {label_code}"))
        })?;
        let split = Split::from_str(fields[2]).ok_or_else(|| {
            parse_err(
                path,
                line,
                format!("split must be train, val, test, or none, got '{}'", fields[2]),
            )
        })?;
        let mut feats = Vec::with_capacity(feature_dim);
        for field in &fields[3..] {
            let v: f64 = field.parse().map_err(|_| GraphError::NonNumericFeature {
                path: path.to_path_buf(),
                line,
                field: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(GraphError::NonNumericFeature {
                    path: path.to_path_buf(),
                    line,
                    field: field.to_string(),
                });
            }
            feats.push(v);
        }
        rows.push(Row {
            id,
            label,
            split,
            feats,
            line,
        });
    }

    let num_nodes = rows.len();
    if num_nodes == 0 {
        return Err(GraphError::Empty);
    }
    let mut feature_data = vec![0.0; num_nodes * feature_dim];
    let mut labels = vec![Label::Unlabeled; num_nodes];
    let mut splits = vec![Split::None; num_nodes];
    let mut seen = vec![false; num_nodes];
    for row in rows {
        if row.id >= num_nodes {
            return Err(GraphError::NodeIdOutOfRange {
                path: path.to_path_buf(),
                line: row.line,
                id: row.id,
                num_nodes,
            });
        }
        if seen[row.id] {
            return Err(GraphError::DuplicateNode {
                path: path.to_path_buf(),
                line: row.line,
                id: row.id,
            });
        }
        seen[row.id] = true;
        feature_data[row.id * feature_dim..(row.id + 1) * feature_dim].copy_from_slice(&row.feats);
        labels[row.id] = row.label;
        splits[row.id] = row.split;
    }
    let features = Matrix::from_vec(num_nodes, feature_dim, feature_data)
        .expect("finiteness checked per field");
    Ok((features, labels, splits))
}

fn load_edges(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>, GraphError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty edge file"))?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields != ["src", "dst"] {
        return Err(parse_err(path, 1, "edge header must be 'src,dst'"));
    }
    let mut edges = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            return Err(parse_err(path, line, "empty line"));
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, got {}", fields.len())));
        }
        let endpoint = |field: &str| -> Result<usize, GraphError> {
            let id: usize = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad node id '{field}'")))?;
            if id >= num_nodes {
                return Err(GraphError::UnknownNodeId {
                    path: path.to_path_buf(),
                    line,
                    id,
                    num_nodes,
                });
            }
            Ok(id)
        };
        edges.push((endpoint(fields[0])?, endpoint(fields[1])?));
    }
    Ok(edges)
}

/// Loads a graph directory written by [`save_graph`]: `relations.txt` names
/// the relations in order, `nodes.csv` and `edges_<name>.csv` hold the data.
pub fn load_graph_dir(dir: &Path) -> Result<HinGraph, GraphError> {
    let relations_path = dir.join("relations.txt");
    let text = read_to_string(&relations_path)?;
    let mut edge_files = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let name = raw.trim();
        if name.is_empty() {
            return Err(parse_err(&relations_path, idx + 1, "empty relation name"));
        }
        edge_files.push((name.to_string(), dir.join(format!("edges_{name}.csv"))));
    }
    load_graph(&dir.join("nodes.csv"), &edge_files)
}

/// Writes `nodes.csv`, `edges_<name>.csv` per relation, and `relations.txt`
/// into `dir` (which must exist). Floats use Rust's shortest round-trip
/// formatting, so save/load is value-exact.
pub fn save_graph(graph: &HinGraph, dir: &Path) -> Result<(), GraphError> {
    let mut nodes = String::from("id,label,split");
    for k in 0..graph.feature_dim() {
        nodes.push_str(&format!(",f{k}"));
    }
    nodes.push('\n');
    for i in 0..graph.num_nodes() {
        nodes.push_str(&format!(
            "{i},{},{}",
            graph.labels()[i].to_code(),
            graph.splits()[i].as_str()
        ));
        for k in 0..graph.feature_dim() {
            nodes.push_str(&format!(",{}", graph.features().get(i, k)));
        }
        nodes.push('\n');
    }
    write_file(&dir.join("nodes.csv"), &nodes)?;

    let mut relations = String::new();
    for rel in graph.relations() {
        relations.push_str(&rel.name);
        relations.push('\n');
        let mut out = String::from("src,dst\n");
        for &(src, dst) in graph.edges(rel.index) {
            out.push_str(&format!("{src},{dst}\n"));
        }
        write_file(&dir.join(format!("edges_{}.csv", rel.name)), &out)?;
    }
    write_file(&dir.join("relations.txt"), &relations)
}
