//! Command implementations behind the `hinbot` binary: generate synthetic
//! graphs, train, evaluate checkpoints, and run ablation sweeps.
//!
//! Each command returns its machine-readable output (key=value lines or
//! CSV) as a string for the binary to print; progress and diagnostics go
//! straight to standard error. Run configs are flat `key = value` files
//! with hard errors on unknown keys, so hyperparameter typos cannot pass
//! silently.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ConfigError, KvReader};
use crate::fusion::FusionMode;
use crate::graph::{load_graph_dir, save_graph, GraphError, HinGraph, NeighborIndex};
use crate::model::{ModelConfig, ModelError, ModelState, TrainConfig, TrainReport};
use crate::rgt::AggregatorMode;
use crate::synth::{self, SynthError, SynthSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything a run needs: architecture, optimization, and paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub graph_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        RunConfig::from_reader(KvReader::parse_file(path)?)
    }

    pub fn from_config_str(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_reader(KvReader::parse(text)?)
    }

    fn from_reader(mut kv: KvReader) -> Result<RunConfig, CliError> {
        let model_defaults = ModelConfig::default();
        let train_defaults = TrainConfig::default();

        if let Some((value, line)) = kv.take_raw("optimizer") {
            if value != "adamw" {
                return Err(ConfigError::BadValue {
                    line,
                    key: "optimizer".into(),
                    msg: format!("only 'adamw' is supported, got '{value}'"),
                }
                .into());
            }
        }
        let fusion_mode = match kv.take_raw("fusion_mode") {
            Some((value, line)) => {
                FusionMode::from_str(&value).ok_or(ConfigError::BadValue {
                    line,
                    key: "fusion_mode".into(),
                    msg: format!(
                        "expected semantic_attention, sum, mean, max, or min; got '{value}'"
                    ),
                })?
            }
            None => model_defaults.fusion_mode,
        };
        let aggregator_mode = match kv.take_raw("aggregator_mode") {
            Some((value, line)) => {
                AggregatorMode::from_str(&value).ok_or(ConfigError::BadValue {
                    line,
                    key: "aggregator_mode".into(),
                    msg: format!(
                        "expected rgt, no_transformer, no_gate, or mean_neighbor; got '{value}'"
                    ),
                })?
            }
            None => model_defaults.aggregator_mode,
        };
        let relations = match kv.take_raw("relations") {
            Some((value, _)) => value
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            None => model_defaults.relations.clone(),
        };

        let model = ModelConfig {
            hidden: kv.take_or("hidden_size", model_defaults.hidden)?,
            layers: kv.take_or("layer_count", model_defaults.layers)?,
            rgt_heads: kv.take_or("rgt_heads", model_defaults.rgt_heads)?,
            semantic_heads: kv.take_or("semantic_heads", model_defaults.semantic_heads)?,
            dropout: kv.take_or("dropout", model_defaults.dropout)?,
            relations,
            fusion_mode,
            aggregator_mode,
        };
        let train = TrainConfig {
            learning_rate: kv.take_or("learning_rate", train_defaults.learning_rate)?,
            l2_regularization: kv
                .take_or("l2_regularization", train_defaults.l2_regularization)?,
            batch_size: kv.take_or("batch_size", train_defaults.batch_size)?,
            max_epochs: kv.take_or("max_epochs", train_defaults.max_epochs)?,
            seed: kv.take_or("seed", train_defaults.seed)?,
            train_fraction: kv.take_or("train_fraction", train_defaults.train_fraction)?,
        };
        let graph_dir = kv.take_raw("graph_dir").map(|(v, _)| PathBuf::from(v));
        let checkpoint = kv.take_raw("checkpoint").map(|(v, _)| PathBuf::from(v));
        kv.finish()?;
        Ok(RunConfig {
            model,
            train,
            graph_dir,
            checkpoint,
        })
    }
}

/// Restricts `graph` to the named relations (order per the graph), erroring
/// with both lists when a name is missing.
pub fn select_relations(graph: &HinGraph, wanted: &[String]) -> Result<HinGraph, CliError> {
    let names = graph.relation_names();
    let mut keep = Vec::new();
    for w in wanted {
        match names.iter().position(|n| n == w) {
            Some(i) => keep.push(i),
            None => {
                return Err(CliError::Usage(format!(
                    "relation '{}' not in graph; config asks for [{}], graph provides [{}]",
                    w,
                    wanted.join(", "),
                    names.join(", ")
                )))
            }
        }
    }
    keep.sort_unstable();
    keep.dedup();
    Ok(graph.subset_relations(&keep))
}

fn prepare_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))
}

/// Generates a synthetic graph into `out_dir` from a preset name or a spec
/// file. The written `manifest.txt` holds the exact spec; regenerating
/// from it reproduces the graph byte for byte.
pub fn cmd_generate(
    spec_arg: &str,
    seed: Option<u64>,
    out_dir: &Path,
    force: bool,
) -> Result<String, CliError> {
    let mut spec = if Path::new(spec_arg).is_file() {
        let path = Path::new(spec_arg);
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        SynthSpec::from_config_str(&text)?
    } else {
        synth::fixture(spec_arg).ok_or_else(|| {
            CliError::Usage(format!(
                "'{spec_arg}' is neither a spec file nor a preset; presets: {}",
                synth::fixture_names().join(", ")
            ))
        })?
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if out_dir.exists() {
        let occupied = fs::read_dir(out_dir)
            .map_err(io_err(out_dir))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(CliError::Usage(format!(
                "output directory {} is not empty (use --force to overwrite)",
                out_dir.display()
            )));
        }
    }
    prepare_out_dir(out_dir)?;
    let graph = synth::generate(&spec)?;
    save_graph(&graph, out_dir)?;
    let manifest = out_dir.join("manifest.txt");
    fs::write(&manifest, spec.to_config_string()).map_err(io_err(&manifest))?;
    let edges: usize = (0..graph.num_relations()).map(|r| graph.edges(r).len()).sum();
    eprintln!(
        "generated {} nodes, {} relations, {} edges into {}",
        graph.num_nodes(),
        graph.num_relations(),
        edges,
        out_dir.display()
    );
    Ok(String::new())
}

fn load_run_graph(config: &RunConfig, config_path: &Path) -> Result<HinGraph, CliError> {
    let dir = config.graph_dir.as_ref().ok_or_else(|| {
        CliError::Usage(format!(
            "config {} has no graph_dir key",
            config_path.display()
        ))
    })?;
    let graph = load_graph_dir(dir)?;
    select_relations(&graph, &config.model.relations)
}

fn metrics_stdout(report: &TrainReport) -> String {
    let t = &report.test;
    format!(
        "test_accuracy={}\ntest_f1={}\nbest_epoch={}\ntrain_nodes_used={}\n",
        t.accuracy, t.f1, report.best_epoch, report.train_nodes_used
    )
}

/// Trains per the run config, writing `report.csv` and `model.ckpt` into
/// `out_dir` and returning the test metrics as key=value lines.
pub fn cmd_train(
    config_path: &Path,
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<String, CliError> {
    let mut config = RunConfig::from_file(config_path)?;
    if let Some(s) = seed {
        config.train.seed = s;
    }
    let graph = load_run_graph(&config, config_path)?;
    let index = NeighborIndex::build(&graph);
    let mut model_config = config.model.clone();
    model_config.relations = graph.relation_names();
    let mut model = ModelState::new(model_config, graph.feature_dim(), config.train.seed)?;
    eprintln!(
        "training on {} nodes, {} relations, {} parameters, seed {}",
        graph.num_nodes(),
        graph.num_relations(),
        model.num_parameters(),
        config.train.seed
    );
    let report = model.train(&graph, &index, &config.train)?;
    prepare_out_dir(out_dir)?;
    let report_path = out_dir.join("report.csv");
    report.write_csv(&report_path)?;
    let ckpt_path = out_dir.join("model.ckpt");
    model.save_checkpoint(&ckpt_path)?;
    eprintln!(
        "wrote {} and {}",
        report_path.display(),
        ckpt_path.display()
    );
    Ok(metrics_stdout(&report))
}

/// Inputs for [`cmd_eval`]: explicit flags win over run-config keys.
#[derive(Debug, Default)]
pub struct EvalOptions {
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub graph_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub export_embeddings: bool,
    pub export_attention: bool,
}

/// Evaluates a checkpoint on a graph's test split, optionally exporting
/// embeddings and attention weights into the output directory.
pub fn cmd_eval(opts: &EvalOptions) -> Result<String, CliError> {
    let run_config = match &opts.config {
        Some(path) => Some(RunConfig::from_file(path)?),
        None => None,
    };
    let checkpoint = opts
        .checkpoint
        .clone()
        .or_else(|| run_config.as_ref().and_then(|c| c.checkpoint.clone()))
        .ok_or_else(|| {
            CliError::Usage("no checkpoint given (flag --checkpoint or config key)".into())
        })?;
    let graph_dir = opts
        .graph_dir
        .clone()
        .or_else(|| run_config.as_ref().and_then(|c| c.graph_dir.clone()))
        .ok_or_else(|| {
            CliError::Usage("no graph directory given (flag --graph-dir or config key)".into())
        })?;

    let mut model = ModelState::load_checkpoint(&checkpoint)?;
    let full_graph = load_graph_dir(&graph_dir)?;
    let graph = select_relations(&full_graph, &model.config.relations)?;
    let index = NeighborIndex::build(&graph);
    let metrics = model.evaluate(&graph, &index, crate::graph::Split::Test)?;

    if opts.export_embeddings || opts.export_attention {
        prepare_out_dir(&opts.out_dir)?;
    }
    if opts.export_embeddings {
        let path = opts.out_dir.join("embeddings.csv");
        model.export_embeddings(&graph, &index, &path)?;
        eprintln!("wrote {}", path.display());
    }
    if opts.export_attention {
        let beta = opts.out_dir.join("attention_beta.csv");
        let alpha = opts.out_dir.join("attention_alpha.csv");
        model.export_attention(&graph, &index, &beta, &alpha)?;
        eprintln!("wrote {} and {}", beta.display(), alpha.display());
    }
    Ok(format!(
        "test_accuracy={}\ntest_f1={}\ntp={}\nfp={}\ntn={}\nfn={}\n",
        metrics.accuracy,
        metrics.f1,
        metrics.true_pos,
        metrics.false_pos,
        metrics.true_neg,
        metrics.false_neg
    ))
}

/// Ablation sweeps mirroring the evaluation protocols: drop relations,
/// swap architecture pieces, vary attention head counts, or shrink the
/// training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Relations,
    Architecture,
    Heads,
    DataEfficiency,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Relations => "relations",
            Protocol::Architecture => "architecture",
            Protocol::Heads => "heads",
            Protocol::DataEfficiency => "data_efficiency",
        }
    }

    pub fn from_str(s: &str) -> Option<Protocol> {
        match s {
            "relations" => Some(Protocol::Relations),
            "architecture" => Some(Protocol::Architecture),
            "heads" => Some(Protocol::Heads),
            "data_efficiency" => Some(Protocol::DataEfficiency),
            _ => None,
        }
    }
}

pub const ABLATION_SEEDS: u64 = 5;

/// Number of heads swept by the heads protocol (0 disables the mechanism).
pub const HEAD_SWEEP: [usize; 5] = [0, 1, 2, 4, 8];

/// Training fractions swept by the data-efficiency protocol.
pub const DATA_FRACTIONS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// One ablation setting's aggregate over the seed sweep.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub setting: String,
    pub accuracy: SeedSummary,
    pub f1: SeedSummary,
}

/// Mean and quartiles over per-seed results (linear-interpolation
/// quartiles; at five seeds these are the 2nd, 3rd, and 4th order
/// statistics).
#[derive(Debug, Clone)]
pub struct SeedSummary {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn summarize(values: &[f64]) -> SeedSummary {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    SeedSummary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
    }
}

fn ablation_csv(protocol: Protocol, rows: &[AblationRow]) -> String {
    let mut s = String::from(
        "protocol,setting,runs,acc_mean,acc_q1,acc_median,acc_q3,f1_mean,f1_q1,f1_median,f1_q3\n",
    );
    for row in rows {
        let a = &row.accuracy;
        let f = &row.f1;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            protocol.as_str(),
            row.setting,
            ABLATION_SEEDS,
            a.mean,
            a.q1,
            a.median,
            a.q3,
            f.mean,
            f.q1,
            f.median,
            f.q3
        );
    }
    s
}

fn run_seeds(
    setting: &str,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    graph: &HinGraph,
    index: &NeighborIndex,
) -> Result<AblationRow, CliError> {
    let mut accs = Vec::with_capacity(ABLATION_SEEDS as usize);
    let mut f1s = Vec::with_capacity(ABLATION_SEEDS as usize);
    for offset in 0..ABLATION_SEEDS {
        let seed = train_config.seed + offset;
        let mut tc = train_config.clone();
        tc.seed = seed;
        let mut model = ModelState::new(model_config.clone(), graph.feature_dim(), seed)?;
        let report = model.train(graph, index, &tc)?;
        eprintln!(
            "[{setting} seed {seed}] test_accuracy={} test_f1={}",
            report.test.accuracy, report.test.f1
        );
        accs.push(report.test.accuracy);
        f1s.push(report.test.f1);
    }
    Ok(AblationRow {
        setting: setting.to_string(),
        accuracy: summarize(&accs),
        f1: summarize(&f1s),
    })
}

/// Runs one ablation protocol, 5 seeds per setting, and returns the CSV
/// table. With an output directory the table is also written to
/// `ablation_<protocol>.csv`.
pub fn cmd_ablate(
    config_path: &Path,
    protocol: Protocol,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<String, CliError> {
    let mut config = RunConfig::from_file(config_path)?;
    if let Some(s) = seed {
        config.train.seed = s;
    }
    let graph = load_run_graph(&config, config_path)?;
    let mut base_model = config.model.clone();
    base_model.relations = graph.relation_names();

    let mut rows = Vec::new();
    match protocol {
        Protocol::Relations => {
            let index = NeighborIndex::build(&graph);
            rows.push(run_seeds("all", &base_model, &config.train, &graph, &index)?);
            for name in graph.relation_names() {
                let sub = select_relations(&graph, std::slice::from_ref(&name))?;
                let sub_index = NeighborIndex::build(&sub);
                let mut mc = base_model.clone();
                mc.relations = sub.relation_names();
                rows.push(run_seeds(&name, &mc, &config.train, &sub, &sub_index)?);
            }
        }
        Protocol::Architecture => {
            let index = NeighborIndex::build(&graph);
            let aggregators = [
                ("full", None, None),
                ("no_transformer", Some(AggregatorMode::NoTransformer), None),
                ("no_gate", Some(AggregatorMode::NoGate), None),
                ("mean_neighbor", Some(AggregatorMode::MeanNeighbor), None),
                ("fusion_sum", None, Some(FusionMode::Sum)),
                ("fusion_mean", None, Some(FusionMode::Mean)),
                ("fusion_max", None, Some(FusionMode::Max)),
                ("fusion_min", None, Some(FusionMode::Min)),
            ];
            for (setting, agg, fusion) in aggregators {
                let mut mc = base_model.clone();
                if let Some(a) = agg {
                    mc.aggregator_mode = a;
                }
                if let Some(f) = fusion {
                    mc.fusion_mode = f;
                }
                rows.push(run_seeds(setting, &mc, &config.train, &graph, &index)?);
            }
        }
        Protocol::Heads => {
            for &h in HEAD_SWEEP.iter().filter(|&&h| h > 0) {
                if base_model.hidden % h != 0 {
                    return Err(CliError::Usage(format!(
                        "heads protocol needs hidden_size divisible by {h}; got {}",
                        base_model.hidden
                    )));
                }
            }
            let index = NeighborIndex::build(&graph);
            for heads in HEAD_SWEEP {
                let mut mc = base_model.clone();
                mc.rgt_heads = heads;
                mc.semantic_heads = heads;
                let setting = format!("c{heads}_d{heads}");
                rows.push(run_seeds(&setting, &mc, &config.train, &graph, &index)?);
            }
        }
        Protocol::DataEfficiency => {
            let index = NeighborIndex::build(&graph);
            for fraction in DATA_FRACTIONS {
                let mut tc = config.train.clone();
                tc.train_fraction = fraction;
                let setting = format!("{fraction}");
                rows.push(run_seeds(&setting, &base_model, &tc, &graph, &index)?);
            }
        }
    }

    let csv = ablation_csv(protocol, &rows);
    if let Some(dir) = out_dir {
        prepare_out_dir(dir)?;
        let path = dir.join(format!("ablation_{}.csv", protocol.as_str()));
        fs::write(&path, &csv).map_err(io_err(&path))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(csv)
}
