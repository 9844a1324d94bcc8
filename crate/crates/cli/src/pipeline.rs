//! Stage implementations. Every stage reads its inputs from and writes its
//! outputs to one run directory, so stages can be rerun and diffed
//! independently.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toponet_core::embedding::{self, EpsRule};
use toponet_core::moves::network_move_summary;
use toponet_core::nn::trace_cloud;
use toponet_core::simplex::verdict_from_outputs;
use toponet_core::{
    io, kernel_collision_witness, ActivationTrace, Error as CoreError, LabeledPointSet, MoveReport,
    Network, SeparationVerdict, Shape,
};

use crate::config::{ConfigError, ExperimentConfig, IsomapConfig};

pub const CONFIG_FILE: &str = "config.toml";
pub const DATASET_FILE: &str = "dataset.csv";
pub const NETWORK_FILE: &str = "network.txt";
pub const TRAINING_FILE: &str = "training.json";
pub const TRACE_DIR: &str = "trace";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ANALYSIS_DIR: &str = "analysis";
pub const MOVES_FILE: &str = "moves.json";
pub const SEPARATION_FILE: &str = "separation.json";
pub const COMPONENTS_FILE: &str = "components.json";
pub const ISOMAP_FILE: &str = "isomap.json";
pub const REPORT_FILE: &str = "report.json";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or missing/invalid inputs; exit code 1.
    Validation(String),
    /// Failure while computing, including training divergence; exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn missing(path: &Path, producer: &str) -> Self {
        CliError::Validation(format!(
            "missing upstream artifact {} (run the `{producer}` stage first)",
            path.display()
        ))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("malformed JSON artifact: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Train,
    Trace,
    Analyze,
    Isomap,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Generate,
        Stage::Train,
        Stage::Trace,
        Stage::Analyze,
        Stage::Isomap,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Train => "train",
            Stage::Trace => "trace",
            Stage::Analyze => "analyze",
            Stage::Isomap => "isomap",
            Stage::Report => "report",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialise");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, producer: &str) -> CliResult<T> {
    if !path.exists() {
        return Err(CliError::missing(path, producer));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn require(path: &Path, producer: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(path, producer))
    }
}

fn write_config(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml())?;
    Ok(())
}

pub fn generate_stage(cfg: &ExperimentConfig, out: &Path) -> CliResult<LabeledPointSet> {
    write_config(cfg, out)?;
    let data = toponet_core::generate(&cfg.dataset)?;
    let comments = vec![
        format!("shape={}", data.shape_tag),
        format!("seed={}", cfg.dataset.seed),
        format!("points_per_class={}", cfg.dataset.points_per_class),
    ];
    io::write_dataset(&out.join(DATASET_FILE), &data, &comments)?;
    Ok(data)
}

pub fn load_dataset(out: &Path) -> CliResult<LabeledPointSet> {
    let path = out.join(DATASET_FILE);
    require(&path, "generate")?;
    Ok(io::read_dataset(&path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub loss_history: Vec<f64>,
}

pub fn train_stage(cfg: &ExperimentConfig, out: &Path) -> CliResult<(Network, TrainingReport)> {
    let data = load_dataset(out)?;
    let outcome = toponet_core::train(&cfg.network_spec(), &data, &cfg.training)?;
    io::write_network(&out.join(NETWORK_FILE), &outcome.network)?;
    let report = TrainingReport {
        seed: cfg.training.seed,
        epochs: outcome.network.epochs_run,
        learning_rate: cfg.training.learning_rate,
        final_loss: outcome.final_loss,
        final_accuracy: outcome.final_accuracy,
        loss_history: outcome.loss_history,
    };
    write_json(&out.join(TRAINING_FILE), &report)?;
    Ok((outcome.network, report))
}

pub fn load_network(out: &Path) -> CliResult<Network> {
    let path = out.join(NETWORK_FILE);
    require(&path, "train")?;
    Ok(io::read_network(&path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    /// Trace indices of the injected points: `p1` (label 0), then `p2` (label 1).
    pub indices: (usize, usize),
    pub direction: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// `‖W₁ (p1 − p2)‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLayerEntry {
    pub index: usize,
    pub file: String,
    pub dim: usize,
    /// Activation that produced this cloud; absent for the input cloud.
    pub activation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub points: usize,
    pub num_classes: usize,
    pub layers: Vec<TraceLayerEntry>,
    pub witness: Option<WitnessRecord>,
}

fn layer_file(i: usize) -> String {
    format!("layer_{i:02}.csv")
}

pub fn trace_stage(cfg: &ExperimentConfig, out: &Path) -> CliResult<(ActivationTrace, TraceManifest)> {
    let mut data = load_dataset(out)?;
    let net = load_network(out)?;
    let witness = if cfg.analysis.witness_injection {
        let Shape::BallShell {
            inner_radius,
            shell_inner,
            shell_outer,
            ..
        } = cfg.dataset.shape
        else {
            return Err(CliError::Validation(
                "analysis.witness_injection: needs a ball_shell dataset".into(),
            ));
        };
        let w = kernel_collision_witness(&net.layers[0].weights, inner_radius, (shell_inner, shell_outer))?;
        let i = data.push(&w.p1, 0)?;
        let j = data.push(&w.p2, 1)?;
        Some(WitnessRecord {
            indices: (i, j),
            direction: w.direction,
            p1: w.p1,
            p2: w.p2,
            residual: w.residual,
        })
    } else {
        None
    };
    let trace = trace_cloud(&net, &data.points, data.labels.clone())?;

    let dir = out.join(TRACE_DIR);
    fs::create_dir_all(&dir)?;
    let mut layers = Vec::with_capacity(trace.clouds.len());
    for (i, cloud) in trace.clouds.iter().enumerate() {
        let activation = (i > 0).then(|| net.layers[i - 1].activation.name().to_string());
        let layer_data = LabeledPointSet::new(cloud.clone(), trace.labels.clone(), data.num_classes, &data.shape_tag)?;
        let mut comments = vec![format!("shape={}", data.shape_tag), format!("layer={i}")];
        if let Some(a) = &activation {
            comments.push(format!("activation={a}"));
        }
        io::write_dataset(&dir.join(layer_file(i)), &layer_data, &comments)?;
        layers.push(TraceLayerEntry {
            index: i,
            file: layer_file(i),
            dim: cloud.dim(),
            activation,
        });
    }
    let manifest = TraceManifest {
        points: data.len(),
        num_classes: data.num_classes,
        layers,
        witness,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok((trace, manifest))
}

/// Reads a stored trace. Pre-activation clouds are not stored and come back empty.
pub fn load_trace(out: &Path) -> CliResult<(ActivationTrace, TraceManifest)> {
    let dir = out.join(TRACE_DIR);
    let manifest: TraceManifest = read_json(&dir.join(MANIFEST_FILE), "trace")?;
    let mut clouds = Vec::with_capacity(manifest.layers.len());
    let mut labels: Option<Vec<usize>> = None;
    for entry in &manifest.layers {
        let path = dir.join(&entry.file);
        require(&path, "trace")?;
        let layer = io::read_dataset(&path)?;
        if layer.len() != manifest.points || layer.dim() != entry.dim {
            return Err(CliError::Validation(format!(
                "{} does not match the trace manifest",
                path.display()
            )));
        }
        match &labels {
            Some(l) if *l != layer.labels => {
                return Err(CliError::Validation(format!(
                    "{} has labels that differ from layer 0",
                    path.display()
                )))
            }
            Some(_) => {}
            None => labels = Some(layer.labels.clone()),
        }
        clouds.push(layer.points);
    }
    let trace = ActivationTrace {
        clouds,
        pre_activations: Vec::new(),
        labels: labels.unwrap_or_default(),
    };
    Ok((trace, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessOutcome {
    pub indices: (usize, usize),
    pub outputs: (Vec<f64>, Vec<f64>),
    /// Bitwise equality of the two network outputs.
    pub outputs_identical: bool,
    pub max_output_difference: f64,
    pub assigned: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub verdict: SeparationVerdict,
    pub witness: Option<WitnessOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerComponents {
    pub layer: usize,
    pub eps: f64,
    pub count: usize,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsReport {
    pub class: usize,
    pub rule: EpsRule,
    pub layers: Vec<LayerComponents>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutputs {
    pub moves: Option<Vec<MoveReport>>,
    pub separation: Option<SeparationReport>,
    pub components: Option<ComponentsReport>,
}

pub fn separation_report(trace: &ActivationTrace, manifest: &TraceManifest) -> SeparationReport {
    let output = trace.output();
    let outputs: Vec<Vec<f64>> = output.iter().map(<[f64]>::to_vec).collect();
    let verdict = verdict_from_outputs(&outputs, &trace.labels, manifest.num_classes);
    let witness = manifest.witness.as_ref().map(|w| {
        let (i, j) = w.indices;
        let (a, b) = (outputs[i].clone(), outputs[j].clone());
        let max_output_difference = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        WitnessOutcome {
            indices: w.indices,
            outputs_identical: a == b,
            max_output_difference,
            assigned: (verdict.assignments[i], verdict.assignments[j]),
            outputs: (a, b),
        }
    });
    SeparationReport { verdict, witness }
}

pub fn components_report(trace: &ActivationTrace, class: usize, rule: EpsRule) -> CliResult<ComponentsReport> {
    let idx = trace.class_indices(class);
    let mut layers = Vec::with_capacity(trace.clouds.len());
    for (l, cloud) in trace.clouds.iter().enumerate() {
        let subset = cloud.select(&idx);
        let eps = rule.resolve(&subset, cloud);
        let assignment = embedding::epsilon_components(&subset, eps)?;
        layers.push(LayerComponents {
            layer: l,
            eps,
            count: assignment.count,
            sizes: assignment.sizes(),
        });
    }
    Ok(ComponentsReport { class, rule, layers })
}

pub fn analyze_stage(cfg: &ExperimentConfig, out: &Path) -> CliResult<AnalysisOutputs> {
    let net = load_network(out)?;
    let (trace, manifest) = load_trace(out)?;
    let dir = out.join(ANALYSIS_DIR);
    fs::create_dir_all(&dir)?;

    let moves = if cfg.analysis.moves {
        let m = network_move_summary(&net, &trace)?;
        write_json(&dir.join(MOVES_FILE), &m)?;
        Some(m)
    } else {
        None
    };
    let separation = if cfg.analysis.separation {
        let s = separation_report(&trace, &manifest);
        write_json(&dir.join(SEPARATION_FILE), &s)?;
        Some(s)
    } else {
        None
    };
    let components = match &cfg.analysis.components {
        Some(c) => {
            let r = components_report(&trace, c.class, c.eps)?;
            write_json(&dir.join(COMPONENTS_FILE), &r)?;
            Some(r)
        }
        None => None,
    };
    Ok(AnalysisOutputs {
        moves,
        separation,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsomapLayer {
    pub layer: usize,
    pub file: Option<String>,
    pub points: usize,
    pub eigenvalues: Vec<f64>,
    pub residual_variance: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsomapReport {
    pub k: usize,
    pub target_dim: usize,
    /// Trace indices of the projected points.
    pub sample: Vec<usize>,
    pub layers: Vec<IsomapLayer>,
}

/// Evenly strided indices, at most `max` of `n`.
fn stride_sample(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max).map(|i| i * n / max).collect()
}

pub fn isomap_stage(cfg: &ExperimentConfig, out: &Path) -> CliResult<Option<IsomapReport>> {
    let Some(iso) = &cfg.analysis.isomap else {
        return Ok(None);
    };
    let (trace, _) = load_trace(out)?;
    Ok(Some(isomap_report(&trace, iso, &out.join(ANALYSIS_DIR))?))
}

/// Projects every traced cloud and writes `isomap/layer_XX.csv` plus a summary.
pub fn isomap_report(trace: &ActivationTrace, iso: &IsomapConfig, dir: &Path) -> CliResult<IsomapReport> {
    let proj_dir = dir.join("isomap");
    fs::create_dir_all(&proj_dir)?;
    let sample = stride_sample(trace.labels.len(), iso.max_points);
    let labels: Vec<usize> = sample.iter().map(|&i| trace.labels[i]).collect();
    let mut layers = Vec::new();
    for (l, cloud) in trace.clouds.iter().enumerate() {
        let sub = cloud.select(&sample);
        match embedding::isomap(&sub, iso.k, iso.target_dim) {
            Ok(emb) => {
                let file = layer_file(l);
                let classes = labels.iter().max().map_or(0, |m| m + 1);
                let comments = vec![
                    format!("source_layer={l}"),
                    format!("k={}", iso.k),
                    format!("target_dim={}", iso.target_dim),
                    format!("residual_variance={}", emb.residual_variance),
                ];
                match LabeledPointSet::new(emb.coords.clone(), labels.clone(), classes.max(2), "isomap") {
                    Ok(set) => io::write_dataset(&proj_dir.join(&file), &set, &comments)?,
                    Err(_) => io::write_cloud(&proj_dir.join(&file), &emb.coords, &comments)?,
                }
                layers.push(IsomapLayer {
                    layer: l,
                    file: Some(format!("isomap/{file}")),
                    points: sub.len(),
                    eigenvalues: emb.eigenvalues,
                    residual_variance: Some(emb.residual_variance),
                    error: None,
                });
            }
            Err(e) => layers.push(IsomapLayer {
                layer: l,
                file: None,
                points: sub.len(),
                eigenvalues: Vec::new(),
                residual_variance: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let report = IsomapReport {
        k: iso.k,
        target_dim: iso.target_dim,
        sample,
        layers,
    };
    write_json(&dir.join(ISOMAP_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub shape: String,
    pub dim: usize,
    pub points: usize,
    pub num_classes: usize,
    pub class_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub clouds: usize,
    pub dims: Vec<usize>,
    pub points: usize,
}

/// Everything a run produced, minus wall-clock metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub training: TrainingReport,
    pub trace: TraceSummary,
    pub witness: Option<WitnessRecord>,
    pub moves: Option<Vec<MoveReport>>,
    pub separation: Option<SeparationReport>,
    pub components: Option<ComponentsReport>,
    pub isomap: Option<IsomapReport>,
}

impl RunReport {
    pub fn load(out: &Path) -> CliResult<Self> {
        read_json(&out.join(REPORT_FILE), "report")
    }
}

fn read_optional<T: for<'de> Deserialize<'de>>(path: PathBuf, enabled: bool, producer: &str) -> CliResult<Option<T>> {
    if enabled {
        read_json(&path, producer).map(Some)
    } else {
        Ok(None)
    }
}

pub fn report_stage(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunReport> {
    let data = load_dataset(out)?;
    let training: TrainingReport = read_json(&out.join(TRAINING_FILE), "train")?;
    let manifest: TraceManifest = read_json(&out.join(TRACE_DIR).join(MANIFEST_FILE), "trace")?;
    let dir = out.join(ANALYSIS_DIR);
    let report = RunReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        dataset: DatasetSummary {
            shape: data.shape_tag.clone(),
            dim: data.dim(),
            points: data.len(),
            num_classes: data.num_classes,
            class_counts: data.class_counts(),
        },
        training,
        trace: TraceSummary {
            clouds: manifest.layers.len(),
            dims: manifest.layers.iter().map(|l| l.dim).collect(),
            points: manifest.points,
        },
        witness: manifest.witness,
        moves: read_optional(dir.join(MOVES_FILE), cfg.analysis.moves, "analyze")?,
        separation: read_optional(dir.join(SEPARATION_FILE), cfg.analysis.separation, "analyze")?,
        components: read_optional(dir.join(COMPONENTS_FILE), cfg.analysis.components.is_some(), "analyze")?,
        isomap: read_optional(dir.join(ISOMAP_FILE), cfg.analysis.isomap.is_some(), "isomap")?,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub unix_time: u64,
}

pub fn write_metadata(out: &Path, command: &str) -> CliResult<()> {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json(
        &out.join(METADATA_FILE),
        &Metadata {
            tool: "toponet".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            unix_time,
        },
    )
}

pub fn run_stage(stage: Stage, cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    match stage {
        Stage::Generate => generate_stage(cfg, out).map(drop),
        Stage::Train => train_stage(cfg, out).map(drop),
        Stage::Trace => trace_stage(cfg, out).map(drop),
        Stage::Analyze => analyze_stage(cfg, out).map(drop),
        Stage::Isomap => isomap_stage(cfg, out).map(drop),
        Stage::Report => {
            report_stage(cfg, out)?;
            write_metadata(out, "report")
        }
    }
}

/// The full pipeline into a fresh (missing or empty) directory.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunReport> {
    cfg.validate()?;
    if out.exists() {
        let nonempty = fs::read_dir(out)?.next().is_some();
        if nonempty {
            return Err(CliError::Validation(format!(
                "output directory {} is not empty",
                out.display()
            )));
        }
    }
    for stage in &Stage::ALL[..Stage::ALL.len() - 1] {
        run_stage(*stage, cfg, out)?;
    }
    let report = report_stage(cfg, out)?;
    write_metadata(out, "run")?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_sample_is_even_and_bounded() {
        assert_eq!(stride_sample(5, 10), vec![0, 1, 2, 3, 4]);
        assert_eq!(stride_sample(10, 5), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::from_name(s.name()), Some(s));
        }
        assert_eq!(Stage::from_name("plot"), None);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 1);
        assert_eq!(CliError::Runtime(String::new()).exit_code(), 2);
        let div: CliError = CoreError::Divergence { epoch: 3, loss: f64::NAN }.into();
        assert_eq!(div.exit_code(), 2);
    }
}
