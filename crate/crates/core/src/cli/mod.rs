//! Command-line front end. Every command is deterministic given its flags,
//! writes outputs atomically and echoes its resolved settings next to its
//! main output as `<out>.config`.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::gan::LossVariant;
use crate::io::atomic_write;
use crate::io::structext::Document;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "guidegan", version, about = "Guide a trained GAN toward a subcategory from a few exemplars")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic dataset.
    GenData(GenDataArgs),
    /// Train a GAN on a dataset.
    TrainGan(TrainGanArgs),
    /// Train an encoder that inverts a trained generator.
    TrainEncoder(TrainEncoderArgs),
    /// Generate samples of the subcategory shown by a set of exemplars.
    Guide(GuideArgs),
    /// Score guidance with the oracle classifier and realism proxy.
    Eval(EvalArgs),
    /// Draw samples or a confusion matrix.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Mixture2d,
    Tiles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossFlag {
    Minimax,
    NonSaturating,
}

impl From<LossFlag> for LossVariant {
    fn from(l: LossFlag) -> Self {
        match l {
            LossFlag::Minimax => LossVariant::Minimax,
            LossFlag::NonSaturating => LossVariant::NonSaturating,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    Guided,
    Unguided,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub mode: DataKind,
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    pub count: usize,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of subcategories.
    #[arg(long, default_value_t = 5, value_parser = positive_usize)]
    pub modes: usize,
    /// Mixture mode: distance of the mode centers from the origin.
    #[arg(long, default_value_t = 4.0, value_parser = positive_f64)]
    pub radius: f64,
    /// Mixture mode: per-mode standard deviation.
    #[arg(long, default_value_t = 0.3)]
    pub std: f64,
    /// Tiles mode: side length (4, 8 or 16).
    #[arg(long, default_value_t = 8)]
    pub resolution: usize,
    /// Tiles mode: uniform noise amplitude.
    #[arg(long, default_value_t = crate::synthdata::TILE_NOISE)]
    pub noise: f64,
    /// Read further flags from a `key = value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct TrainGanArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Latent dimension; 32 for vector data and 64 for images when omitted.
    #[arg(long, value_parser = positive_usize)]
    pub latent_dim: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 2_000, value_parser = positive_usize)]
    pub steps_per_stage: usize,
    #[arg(long, default_value_t = 0.5)]
    pub fade_fraction: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    #[arg(long, default_value_t = 3e-4, value_parser = positive_f64)]
    pub lr_g: f64,
    #[arg(long, default_value_t = 1.5e-4, value_parser = positive_f64)]
    pub lr_d: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta1: f64,
    #[arg(long, value_enum, default_value_t = LossFlag::NonSaturating)]
    pub loss: LossFlag,
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2, value_parser = positive_usize)]
    pub depth: usize,
    #[arg(long)]
    pub no_pixel_norm: bool,
    #[arg(long)]
    pub no_equalized: bool,
    /// Write per-step metrics as a whitespace-separated table.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct TrainEncoderArgs {
    #[arg(long)]
    pub gan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::inversion::DEFAULT_PAIRS, value_parser = positive_usize)]
    pub pairs: usize,
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    pub batch: usize,
    #[arg(long, default_value_t = 5)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.05)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2, value_parser = positive_usize)]
    pub depth: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
#[command(group(clap::ArgGroup::new("exemplars").required(true).args(["exemplar_dir", "exemplar_label"])))]
pub struct GuideArgs {
    #[arg(long)]
    pub gan: PathBuf,
    #[arg(long)]
    pub encoder: PathBuf,
    /// Directory of binary PPM exemplar images.
    #[arg(long)]
    pub exemplar_dir: Option<PathBuf>,
    /// Subcategory to draw exemplars of from `--data`.
    #[arg(long, requires_all = ["data", "n"])]
    pub exemplar_label: Option<usize>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of exemplars drawn with `--exemplar-label`.
    #[arg(long, value_parser = positive_usize)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub exemplar_seed: u64,
    #[arg(long, default_value_t = crate::guide::DEFAULT_ALPHA, value_parser = positive_f64)]
    pub alpha: f64,
    /// Lower bound on each prototype standard deviation; 0 disables it.
    #[arg(long, default_value_t = crate::guide::DEFAULT_SIGMA_FLOOR)]
    pub sigma_floor: f64,
    #[arg(long, default_value_t = 1000, value_parser = positive_usize)]
    pub count: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub prototype_out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub gan: PathBuf,
    #[arg(long)]
    pub encoder: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Exemplars per subcategory.
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    pub n: usize,
    #[arg(long, default_value_t = crate::guide::DEFAULT_ALPHA, value_parser = positive_f64)]
    pub alpha: f64,
    #[arg(long, default_value_t = crate::eval::DEFAULT_PER_CLASS_COUNT, value_parser = positive_usize)]
    pub per_class: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_PER_CLASS_COUNT, value_parser = positive_usize)]
    pub unguided_per_class: usize,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256")]
    pub sweep_n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub sweep_seeds: Vec<u64>,
    #[arg(long)]
    pub no_sweep: bool,
    /// Also write the confusion tables as aligned plain text.
    #[arg(long)]
    pub table_out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["samples", "report"])))]
pub struct PlotArgs {
    /// Sample file to draw (scatter for 2-D vectors, tile grid for images).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Evaluation report whose confusion matrix is drawn.
    #[arg(long, conflicts_with = "samples")]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MatrixKind::Guided)]
    pub matrix: MatrixKind,
    /// Generator to draw unguided comparison samples from.
    #[arg(long)]
    pub gan: Option<PathBuf>,
    #[arg(long, default_value_t = 1000, value_parser = positive_usize)]
    pub unguided_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset whose mixture centers are marked.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// At most this many images in a tile grid.
    #[arg(long, default_value_t = 64, value_parser = positive_usize)]
    pub max_tiles: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let matches = match Cli::command().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = commands::execute(&cli.command).and_then(|out| {
        let echo = echo_path(&out);
        atomic_write(&echo, resolved_config(name, sub).to_string().as_bytes())?;
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn echo_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config");
    PathBuf::from(s)
}

fn resolved_config(name: &str, matches: &ArgMatches) -> Document {
    let mut doc = Document {
        comments: vec![format!("resolved settings for `{name}`")],
        ..Document::default()
    };
    let sec = doc.section_mut(name);
    let cmd = Cli::command();
    let def = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut ids: Vec<&str> = def.get_arguments().map(|a| a.get_id().as_str()).collect();
    ids.sort_unstable();
    for id in ids {
        if id == "config" || id == "help" {
            continue;
        }
        if let Ok(Some(flag)) = matches.try_get_one::<bool>(id) {
            sec.set(id.replace('_', "-"), flag);
        } else if let Some(raw) = matches.get_raw(id) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            sec.set(id.replace('_', "-"), vals.join(","));
        }
    }
    doc
}

/// Expands `--config FILE` into flags placed before the explicit ones, so
/// explicit flags win. Keys may sit at the top of the file or under a
/// section named after the subcommand; any key that is not a flag of that
/// subcommand is an error.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let pos = args.iter().position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(pos) = pos else {
        return Ok(args);
    };
    let path = match args[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(
            args.get(pos + 1)
                .ok_or("--config needs a file argument")?,
        ),
    };
    let sub = args
        .get(1)
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.starts_with('-'))
        .ok_or("--config requires a subcommand first")?;
    let cmd = Cli::command();
    let sub_cmd = cmd
        .find_subcommand(&sub)
        .ok_or_else(|| format!("unknown subcommand {sub:?}"))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let doc = Document::parse(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
    let mut extra = Vec::new();
    for section in &doc.sections {
        if !section.name.is_empty() && section.name != sub {
            return Err(format!("config section [{}] does not match subcommand {sub:?}", section.name));
        }
        for (key, value) in &section.entries {
            let long = key.replace('_', "-");
            let arg = sub_cmd
                .get_arguments()
                .find(|a| a.get_long() == Some(long.as_str()) && long != "config")
                .ok_or_else(|| format!("unknown config key {key:?} for {sub}"))?;
            if arg.get_action().takes_values() {
                extra.push(OsString::from(format!("--{long}")));
                extra.push(OsString::from(value));
            } else {
                match value.as_str() {
                    "true" => extra.push(OsString::from(format!("--{long}"))),
                    "false" => {}
                    _ => return Err(format!("config key {key:?} expects true or false")),
                }
            }
        }
    }
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend(args[2..].iter().cloned());
    Ok(out)
}
