//! Command-line interface: `datagen`, `train`, `classify`, `evaluate`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, ClassifierChoice, EvalConfig, Protocol};
use crate::features::BandMode;
use crate::mode::Mode;
use crate::pipeline::{PipelineConfig, TraceClassification, TrainedModel};
use crate::signal::io::{load_corpus, read_trace_csv};
use crate::signal::{ThresholdRule, TraceMeta};
use crate::synthgen::{self, GeneratorConfig};

pub const OUTPUT_FORMAT_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "KEHMODE_OUT_DIR";

const MODULE: &str = "cli";

#[derive(Debug, Parser)]
#[command(name = "kehmode", version, about = "Transportation mode detection from KEH voltage traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Datagen(DatagenArgs),
    /// Train a model from a manifest.
    Train(TrainArgs),
    /// Classify one trace or every trace in a manifest.
    Classify(ClassifyArgs),
    /// Run a cross-validation protocol and write report files.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
    /// Generator config JSON; defaults to the shipped profiles.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub traces_per_mode: Option<usize>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long)]
    pub sampling_rate_hz: Option<f64>,
    #[arg(long)]
    pub user_gain_jitter: Option<f64>,
}

/// Pipeline overrides shared by `train` and `evaluate`.
#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// JSON run config (`{"pipeline": {...}, "eval": {...}}`); flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub window_seconds: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub span: Option<usize>,
    /// `auto`, `otsu`, `p<percentile>` (e.g. `p10`) or a value in volts.
    #[arg(long)]
    pub threshold: Option<String>,
    /// `per-bin` or `summed`.
    #[arg(long)]
    pub bands: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub selected: Option<usize>,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["trace", "manifest"])))]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Sampling rate of `--trace`; defaults to the model's training rate.
    #[arg(long)]
    pub sampling_rate_hz: Option<f64>,
    /// Directory for `classification.json` and CSVs; stdout JSON otherwise.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Comma-separated subset of src,svm,knn,nb.
    #[arg(long, value_delimiter = ',')]
    pub classifiers: Option<Vec<String>>,
    /// Window lengths in seconds, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub sweep_window: Option<Vec<f64>>,
    /// Target sampling rates in Hz, comma-separated integer divisions of the
    /// corpus rate.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub sweep_rate: Option<Vec<f64>>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub eval: EvalConfig,
}

pub fn parse_threshold(s: &str) -> Result<ThresholdRule> {
    let bad = || Error::param(MODULE, format!("cannot parse threshold {s:?}"));
    match s {
        "auto" => Ok(ThresholdRule::default()),
        "otsu" => Ok(ThresholdRule::Otsu),
        _ if s.starts_with('p') => s[1..].parse().map(ThresholdRule::Percentile).map_err(|_| bad()),
        _ => s.parse().map(ThresholdRule::Fixed).map_err(|_| bad()),
    }
}

fn parse_bands(s: &str) -> Result<BandMode> {
    match s {
        "per-bin" | "per_bin" => Ok(BandMode::PerBin),
        "summed" => Ok(BandMode::Summed),
        _ => Err(Error::param(MODULE, format!("unknown band mode {s:?}"))),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("{what} {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T, what: &str) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::json(what, e))
}

impl PipelineArgs {
    /// Config file (if any) with flag overrides applied, validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut rc: RunConfig = match &self.config {
            Some(p) => read_json(p, "run config")?,
            None => RunConfig::default(),
        };
        let p = &mut rc.pipeline;
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if let Some(v) = self.window_seconds {
            p.window_seconds = v;
        }
        if let Some(v) = self.overlap {
            p.overlap = v;
        }
        if let Some(v) = self.span {
            p.span = v;
        }
        if let Some(v) = &self.threshold {
            p.threshold = parse_threshold(v)?;
        }
        if let Some(v) = &self.bands {
            p.band_mode = parse_bands(v)?;
        }
        if let Some(v) = self.bins {
            p.bin_count = v;
        }
        if let Some(v) = self.selected {
            p.selected_count = v;
        }
        if let Some(v) = self.atoms {
            p.src.atoms_per_class = v;
        }
        if let Some(v) = self.sparsity {
            p.src.sparsity = v;
        }
        if let Some(v) = self.epsilon {
            p.src.epsilon = v;
        }
        if let Some(v) = self.iterations {
            p.src.iterations = v;
        }
        p.validate()?;
        Ok(rc)
    }
}

pub fn cmd_datagen(args: &DatagenArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => read_json::<GeneratorConfig>(p, "generator config")?,
        None => GeneratorConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.traces_per_mode {
        config.traces_per_mode = v;
    }
    if let Some(v) = args.users {
        config.users = v;
    }
    if let Some(v) = args.duration_s {
        config.trace_duration_s = v;
    }
    if let Some(v) = args.sampling_rate_hz {
        config.sampling_rate_hz = v;
    }
    if let Some(v) = args.user_gain_jitter {
        config.user_gain_jitter = v;
    }
    config.validate()?;
    let entries = synthgen::generate_corpus(&config, &args.out)?;
    log::info!("wrote {} traces to {}", entries.len(), args.out.display());
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let rc = args.pipeline.resolve()?;
    let traces = load_corpus(&args.manifest)?;
    let model = crate::pipeline::train_pipeline(&traces, &rc.pipeline)?;
    for w in &model.training.warnings {
        log::warn!("{w}");
    }
    model.save(&args.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOutput {
    pub format_version: u32,
    pub class_list: Vec<Mode>,
    pub traces: Vec<TraceClassification>,
}

fn windows_csv(out: &ClassifyOutput) -> String {
    let mut s = String::from("trace_id,offset,predicted,low_confidence");
    for m in &out.class_list {
        write!(s, ",residual_{m}").unwrap();
    }
    s.push('\n');
    for t in &out.traces {
        for w in &t.windows {
            write!(s, "{},{},{},{}", t.trace_id, w.offset, w.predicted, w.low_confidence).unwrap();
            for r in &w.residuals {
                write!(s, ",{r}").unwrap();
            }
            s.push('\n');
        }
    }
    s
}

fn traces_csv(out: &ClassifyOutput) -> String {
    let mut s = String::from("trace_id,label,predicted,windows,low_confidence_windows\n");
    for t in &out.traces {
        let label = t.label.map(|m| m.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{}",
            t.trace_id,
            label,
            t.majority,
            t.windows.len(),
            t.low_confidence_windows
        )
        .unwrap();
    }
    s
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let traces = match (&args.trace, &args.manifest) {
        (Some(path), _) => {
            let rate = args
                .sampling_rate_hz
                .unwrap_or(model.feature_spec.sampling_rate_hz);
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let meta = TraceMeta {
                trace_id: id,
                ..TraceMeta::default()
            };
            vec![read_trace_csv(path, rate, meta)?]
        }
        (None, Some(manifest)) => load_corpus(manifest)?,
        (None, None) => unreachable!("clap enforces one input"),
    };
    let results = traces
        .iter()
        .map(|t| model.classify_trace(t))
        .collect::<Result<Vec<_>>>()?;
    let out = ClassifyOutput {
        format_version: OUTPUT_FORMAT_VERSION,
        class_list: model.classes().to_vec(),
        traces: results,
    };
    let json = to_json(&out, "classification")?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write_text(&dir.join("classification.json"), &json)?;
            write_text(&dir.join("windows.csv"), &windows_csv(&out))?;
            write_text(&dir.join("traces.csv"), &traces_csv(&out))
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn parse_classifier(s: &str) -> Result<ClassifierChoice> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| Error::param(MODULE, format!("unknown classifier {s:?}")))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut rc = args.pipeline.resolve()?;
    let e = &mut rc.eval;
    if let Some(v) = args.protocol {
        e.protocol = v;
    }
    if let Some(v) = args.folds {
        e.folds = v;
    }
    if let Some(v) = args.repetitions {
        e.repetitions = v;
    }
    if let Some(v) = &args.classifiers {
        e.classifiers = v.iter().map(|s| parse_classifier(s)).collect::<Result<_>>()?;
    }
    if let Some(v) = &args.sweep_window {
        e.window_sweep_s = if v.is_empty() {
            (1..=6).map(f64::from).collect()
        } else {
            v.clone()
        };
    }
    if let Some(v) = &args.sweep_rate {
        e.rate_sweep_hz = if v.is_empty() {
            vec![100.0, 50.0, 25.0, 20.0, 10.0]
        } else {
            v.clone()
        };
    }
    e.validate()?;
    let traces = load_corpus(&args.manifest)?;
    let report = eval::evaluate(&traces, &rc.pipeline, &rc.eval)?;
    eval::report::write_report(&report, &args.out)
}

/// Machine-readable error document written to stderr on failure.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "format_version": OUTPUT_FORMAT_VERSION,
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        }
    })
    .to_string()
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Datagen(a) => cmd_datagen(a),
        Command::Train(a) => cmd_train(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}
