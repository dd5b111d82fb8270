//! `psg-stager` command line: synth, preprocess, split, train, evaluate, predict, gradcheck.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{
    read_edf, read_epochs, read_hypnogram, read_native, split_cohort, synth_recording_with, write_epochs,
    write_hypnogram, write_native, ChannelMap, EpochDataset, EpochRecording, Recording, Stage, StageChain,
    SynthOptions,
};
use crate::error::Error;
use crate::metrics::{confusion_csv, recordings_csv, report_json};
use crate::resnet::{argmax, load_checkpoint, ModelParams};
use crate::signal::{preprocess_recording, PreprocessConfig};
use crate::train::{evaluate, grad_check, train_loop, GradCheckConfig, TrainConfig};
use crate::util::{atomic_write, read_file};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "psg-stager", version, about = "Sleep staging from raw polysomnograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic recordings with hypnogram sidecars.
    Synth(SynthArgs),
    /// Resample, filter, normalize and segment recordings into epoch files.
    Preprocess(PreprocessArgs),
    /// Split epoch files into train/eval/test directories.
    Split(SplitArgs),
    /// Train a model from a TOML config.
    Train(TrainArgs),
    /// Score a checkpoint on a directory of epoch files.
    Evaluate(EvaluateArgs),
    /// Write the hypnodensity and hypnogram of one recording.
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients of a small model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ChainArg {
    Default,
    N2Heavy,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minutes per recording.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, value_enum, default_value_t = ChainArg::Default)]
    pub chain: ChainArg,
    /// Write into a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// A recording (`.psgr`, or EDF with `--edf`) or a directory of them.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output `.psge` file, or a directory when the input is one.
    #[arg(long)]
    pub out: PathBuf,
    /// Read EDF instead of the native format.
    #[arg(long)]
    pub edf: bool,
    /// Hypnogram for a single input (default: `<input stem>.hyp` when present).
    #[arg(long)]
    pub hypnogram: Option<PathBuf>,
    /// TOML table of EDF label aliases per pipeline channel.
    #[arg(long)]
    pub channel_map: Option<PathBuf>,
    /// TOML preprocessing settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Directory of `.psge` files.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ThreadArgs {
    /// Worker threads for evaluation (default: available cores).
    #[arg(long, env = "PSG_STAGER_THREADS")]
    pub threads: Option<usize>,
}

impl ThreadArgs {
    fn resolve(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of `.psge` files.
    #[arg(long)]
    pub data: PathBuf,
    /// Also write `report.json`, `recordings.csv` and `confusion.csv` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// A `.psge` epoch file, or a raw `.psgr`/`.edf` recording preprocessed with defaults.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub hypnodensity: Option<PathBuf>,
    #[arg(long)]
    pub hypnogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Usage(_) | Error::Config(_) | Error::FilterDesign(_) => EXIT_USAGE,
            Error::NonFinite(_) => EXIT_NUMERIC,
            Error::Dimension { .. } | Error::Parse { .. } | Error::MissingChannel(_) | Error::Io { .. } | Error::Json(_) => {
                EXIT_DATA
            }
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Error::io(path, e).into()
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list_files(dir: &Path, ext: &str) -> std::result::Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_fail(dir, e))? {
        let path = entry.map_err(|e| io_fail(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

pub fn cmd_synth(a: &SynthArgs) -> CmdResult {
    if !(a.duration >= 0.0 && a.duration.is_finite()) {
        return Err(Failure::new(EXIT_USAGE, "--duration must be a non-negative number of minutes"));
    }
    if a.out.exists() {
        let non_empty = std::fs::read_dir(&a.out).map_err(|e| io_fail(&a.out, e))?.next().is_some();
        if non_empty && !a.force {
            return Err(Failure::new(
                EXIT_DATA,
                format!("{} is not empty (use --force to write into it)", a.out.display()),
            ));
        }
    }
    std::fs::create_dir_all(&a.out).map_err(|e| io_fail(&a.out, e))?;
    let opts = SynthOptions {
        chain: match a.chain {
            ChainArg::Default => StageChain::default(),
            ChainArg::N2Heavy => StageChain::n2_heavy(),
        },
        ..Default::default()
    };
    let epochs = (a.duration * 2.0).floor() as usize;
    for i in 0..a.n {
        let rec = synth_recording_with(a.seed.wrapping_add(i as u64), epochs, None, &opts);
        write_native(&rec, &a.out.join(format!("{}.psgr", rec.id)))?;
        let labels = rec.labels.as_deref().unwrap_or_default();
        write_hypnogram(labels, &a.out.join(format!("{}.hyp", rec.id)))?;
    }
    println!("wrote {} recordings of {epochs} epochs to {}", a.n, a.out.display());
    Ok(())
}

fn load_recording(path: &Path, edf: bool, map: &ChannelMap, hypnogram: Option<&Path>) -> std::result::Result<Recording, Failure> {
    let mut rec = if edf { read_edf(path, map)? } else { read_native(path)? };
    let sidecar = path.with_extension("hyp");
    let hyp = hypnogram.map(Path::to_path_buf).or_else(|| sidecar.exists().then_some(sidecar));
    if let Some(h) = hyp {
        if rec.labels.is_none() || hypnogram.is_some() {
            rec.labels = Some(read_hypnogram(&h)?);
        }
    }
    rec.validate()?;
    Ok(rec)
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = String::from_utf8(read_file(path)?).map_err(|_| Failure::new(EXIT_USAGE, format!("{} is not UTF-8", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn preprocess_one(
    input: &Path,
    out: &Path,
    a: &PreprocessArgs,
    map: &ChannelMap,
    cfg: &PreprocessConfig,
    hypnogram: Option<&Path>,
) -> CmdResult {
    let rec = load_recording(input, a.edf, map, hypnogram)?;
    let (epochs, diag) = preprocess_recording(&rec, cfg)?;
    let er = EpochRecording::new(rec.id.clone(), epochs, rec.labels.as_deref())?;
    write_epochs(&er, out)?;
    let json = serde_json::to_vec_pretty(&diag).map_err(Error::from)?;
    atomic_write(&out.with_extension("diag.json"), &json)?;
    println!("{}: {} epochs", rec.id, diag.epochs);
    Ok(())
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> CmdResult {
    let map: ChannelMap = match &a.channel_map {
        Some(p) => read_toml(p)?,
        None => ChannelMap::default(),
    };
    let cfg: PreprocessConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => PreprocessConfig::default(),
    };
    cfg.validate()?;
    if a.input.is_dir() {
        if a.hypnogram.is_some() {
            return Err(Failure::new(EXIT_USAGE, "--hypnogram applies to a single input file"));
        }
        std::fs::create_dir_all(&a.out).map_err(|e| io_fail(&a.out, e))?;
        let files = list_files(&a.input, if a.edf { "edf" } else { "psgr" })?;
        for f in &files {
            preprocess_one(f, &a.out.join(format!("{}.psge", stem(f))), a, &map, &cfg, None)?;
        }
        return Ok(());
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_fail(parent, e))?;
    }
    preprocess_one(&a.input, &a.out, a, &map, &cfg, a.hypnogram.as_deref())
}

pub fn cmd_split(a: &SplitArgs) -> CmdResult {
    let files = list_files(&a.input, "psge")?;
    let ids: Vec<String> = files.iter().map(|f| stem(f)).collect();
    let split = split_cohort(&ids, a.seed);
    for (name, members) in [("train", &split.train), ("eval", &split.eval), ("test", &split.test)] {
        let dir = a.out.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| io_fail(&dir, e))?;
        for id in members {
            let bytes = read_file(&a.input.join(format!("{id}.psge")))?;
            atomic_write(&dir.join(format!("{id}.psge")), &bytes)?;
        }
    }
    atomic_write(&a.out.join("split.json"), &serde_json::to_vec_pretty(&split).map_err(Error::from)?)?;
    println!(
        "train {} / eval {} / test {}",
        split.train.len(),
        split.eval.len(),
        split.test.len()
    );
    Ok(())
}

pub fn load_epoch_dir(dir: &Path) -> std::result::Result<EpochDataset, Failure> {
    let files = list_files(dir, "psge")?;
    let recs = files.iter().map(|f| read_epochs(f)).collect::<crate::Result<Vec<_>>>()?;
    Ok(EpochDataset::new(recs)?)
}

pub fn cmd_train(a: &TrainArgs) -> CmdResult {
    let mut cfg = TrainConfig::from_toml_file(&a.config)?;
    cfg.threads = Some(a.threads.resolve());
    if cfg.checkpoint_dir.is_none() {
        return Err(Failure::new(EXIT_USAGE, "config needs checkpoint_dir"));
    }
    let train_dir = cfg
        .train_data
        .clone()
        .ok_or_else(|| Failure::new(EXIT_USAGE, "config needs train_data"))?;
    let train = load_epoch_dir(&train_dir)?;
    let eval = cfg.eval_data.as_deref().map(load_epoch_dir).transpose()?;
    let out = train_loop(&cfg, &train, eval.as_ref())?;
    let dir = cfg.checkpoint_dir.as_deref().expect("checked above");
    println!("trained to step {} in {}", out.optimizer.step, dir.display());
    if let Some(b) = out.best {
        println!("best eval accuracy {:.4} at step {}", b.accuracy, b.step);
    }
    Ok(())
}

fn load_params(path: &Path) -> std::result::Result<ModelParams<f32>, Failure> {
    Ok(load_checkpoint(path)?.params)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CmdResult {
    let params = load_params(&a.checkpoint)?;
    let data = load_epoch_dir(&a.data)?;
    if data.labeled().is_empty() {
        return Err(Failure::new(EXIT_DATA, format!("no scored epochs in {}", a.data.display())));
    }
    let ev = evaluate(&params, &data, a.threads.resolve())?;
    let csv = confusion_csv(&ev.confusion);
    print!("{csv}");
    let s = &ev.report.summary;
    eprintln!(
        "accuracy {:.4} ± {:.4}, kappa {:.3} ± {:.3} over {} recordings",
        s.accuracy.mean, s.accuracy.sd, s.kappa.mean, s.kappa.sd, s.recordings
    );
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).map_err(|e| io_fail(out, e))?;
        atomic_write(&out.join("report.json"), report_json(&ev.report)?.as_bytes())?;
        atomic_write(&out.join("recordings.csv"), recordings_csv(&ev.report.recordings).as_bytes())?;
        atomic_write(&out.join("confusion.csv"), csv.as_bytes())?;
    }
    Ok(())
}

/// CSV with a `W,N1,N2,N3,REM` header and one six-decimal row per epoch.
pub fn hypnodensity_csv(probs: &[Vec<f64>]) -> String {
    let mut out = Stage::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in probs {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        writeln!(out, "{}", cells.join(",")).expect("writing to a String");
    }
    out
}

pub fn cmd_predict(a: &PredictArgs) -> CmdResult {
    let params = load_params(&a.checkpoint)?;
    if params.config.num_classes != Stage::COUNT {
        return Err(Failure::new(EXIT_DATA, "checkpoint is not a five-stage model"));
    }
    let ext = a.input.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
    let epochs = match ext.as_deref() {
        Some("psge") => read_epochs(&a.input)?.epochs,
        Some("edf") => preprocess_recording(&load_recording(&a.input, true, &ChannelMap::default(), None)?, &PreprocessConfig::default())?.0,
        _ => preprocess_recording(&load_recording(&a.input, false, &ChannelMap::default(), None)?, &PreprocessConfig::default())?.0,
    };
    let probs = params.hypnodensity(&epochs)?;
    if let Some(path) = &a.hypnodensity {
        atomic_write(path, hypnodensity_csv(&probs).as_bytes())?;
    }
    let labels: Vec<Option<Stage>> = probs.iter().map(|p| Stage::from_index(argmax(p))).collect();
    if let Some(path) = &a.hypnogram {
        write_hypnogram(&labels, path)?;
    }
    println!("{} epochs", probs.len());
    Ok(())
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> CmdResult {
    let cfg = GradCheckConfig {
        seed: a.seed,
        tolerance: a.tolerance,
        ..Default::default()
    };
    let report = grad_check(&cfg)?;
    for t in &report.tensors {
        println!(
            "{:<32} {:>6} {:.3e} {}",
            t.name,
            t.elements,
            t.relative_error,
            if t.passed { "ok" } else { "FAIL" }
        );
    }
    println!("max relative error {:.3e} ({})", report.max_relative_error, report.worst);
    if let Some(path) = &a.json {
        atomic_write(path, &serde_json::to_vec_pretty(&report).map_err(Error::from)?)?;
    }
    if !report.passed {
        return Err(Failure::new(
            EXIT_NUMERIC,
            format!("gradient check failed for: {}", report.failures().join(", ")),
        ));
    }
    Ok(())
}
