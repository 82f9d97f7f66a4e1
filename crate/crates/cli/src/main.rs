//! `resrate`: generate datasets, fit and evaluate residual rate models.

mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use resrate::data::{self, SynthConfig};
use resrate::evaluation::{self, CvOptions, EvalOptions};
use resrate::{features, DatasetRecord, FeatureSet, GdConfig, ModelFile, ModelKind, ModelSpec};

use report::{Format, ReportRow};

#[derive(Parser)]
#[command(name = "resrate", version, about = "Rate models for quantized residual blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset labelled with the reference bit count
    Gen(GenArgs),
    /// Write per-record features as CSV
    Features(FeaturesArgs),
    /// Fit a model and write a model file
    Fit(FitArgs),
    /// Evaluate a model file on a dataset
    Eval(EvalArgs),
    /// k-fold cross-validation
    Cv(CvArgs),
    /// Train on one dataset and evaluate on another (e.g. different QPs)
    CrossQp(CrossQpArgs),
    /// Cross-validate the bias-free sub-block model on all 15 feature subsets
    Ablate(AblateArgs),
    /// Write measured vs estimated rate as CSV for plotting
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of blocks
    #[arg(long, default_value_t = 1000)]
    blocks: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability that a coefficient is zero
    #[arg(long, default_value_t = 0.7)]
    sparsity: f64,
    /// Mean of |c| - 1 for nonzero coefficients
    #[arg(long, default_value_t = 1.5)]
    scale: f64,
    /// QP label attached to every record
    #[arg(long, default_value_t = 22)]
    qp: i32,
    /// Block sizes, e.g. "4x4,8x8,16x8"
    #[arg(long, default_value = "4x4,8x8,16x16,32x32,8x4,4x8,16x8,8x16")]
    sizes: String,
    /// Output dataset path
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input dataset
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (stdout if omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Feature subset for the sub-block model, e.g. "SLZE" or "SL"
    #[arg(long, default_value = "SLZE")]
    features: String,
    /// Fit without an offset term
    #[arg(long)]
    no_bias: bool,
    /// Logistic model: initial descent step
    #[arg(long, default_value_t = GdConfig::default().step)]
    gd_step: f64,
    /// Logistic model: step multiplier after an accepted step (1 = fixed step)
    #[arg(long, default_value_t = GdConfig::default().step_growth)]
    gd_growth: f64,
    /// Logistic model: iteration limit
    #[arg(long, default_value_t = GdConfig::default().max_iters)]
    gd_iters: usize,
    /// Logistic model: stop when the relative MSE improvement drops below this
    #[arg(long, default_value_t = GdConfig::default().rel_tol)]
    gd_tol: f64,
}

impl TrainArgs {
    fn spec(&self, kind: ModelKind) -> Result<ModelSpec> {
        let features: FeatureSet = self.features.parse().map_err(usage)?;
        Ok(ModelSpec {
            kind,
            features,
            bias: !self.no_bias,
            gd: GdConfig {
                step: self.gd_step,
                step_growth: self.gd_growth,
                max_iters: self.gd_iters,
                rel_tol: self.gd_tol,
                ..GdConfig::default()
            },
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Subblock,
    Rho,
    Logistic,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Subblock => ModelKind::SubBlock,
            KindArg::Rho => ModelKind::Rho,
            KindArg::Logistic => ModelKind::Logistic,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "subblock")]
    model: KindArg,
    #[command(flatten)]
    train: TrainArgs,
    /// Output model file
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Measure per-block prediction time (makes output non-reproducible)
    #[arg(long)]
    timing: bool,
    /// Write the report here instead of stdout
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `fit`
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Floor predictions at zero bits
    #[arg(long)]
    clamp: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    /// Models to cross-validate
    #[arg(long, value_enum, value_delimiter = ',', default_value = "subblock")]
    model: Vec<KindArg>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep blocks of the same image (source_id prefix before '/') in one fold
    #[arg(long)]
    group_by_image: bool,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CrossQpArgs {
    /// Training dataset
    #[arg(long)]
    train: PathBuf,
    /// Evaluation dataset
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "subblock")]
    model: Vec<KindArg>,
    #[command(flatten)]
    train_args: TrainArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (stdout if omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (stdout if omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Bad flag values or combinations.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<resrate::Error>() {
        Some(resrate::Error::Config(_)) => 1,
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(resrate::Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", path.display()),
        ))
        .into());
    }
    Ok(())
}

fn load(path: &Path) -> Result<Vec<DatasetRecord>> {
    require_file(path)?;
    let ds = data::read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ds.records)
}

fn load_model(path: &Path) -> Result<resrate::RateModel> {
    require_file(path)?;
    let file = ModelFile::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.model()?)
}

/// Writes via a sibling temporary file so a failed run leaves nothing behind.
fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(path) => {
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            std::fs::write(&tmp, bytes)
                .map_err(resrate::Error::from)
                .with_context(|| format!("writing {}", path.display()))?;
            std::fs::rename(&tmp, path).map_err(resrate::Error::from)?;
        }
    }
    Ok(())
}

fn dataset_bytes(records: &[DatasetRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    data::write_records(&mut buf, records)?;
    Ok(buf)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => {
            let cfg = SynthConfig {
                n_blocks: a.blocks,
                seed: a.seed,
                size_set: data::parse_sizes(&a.sizes)?,
                sparsity: a.sparsity,
                magnitude_scale: a.scale,
                qp_label: a.qp,
            };
            cfg.validate()?;
            let ds = data::generate(&cfg)?;
            write_output(Some(&a.out), &dataset_bytes(&ds.records)?)
        }
        Command::Features(a) => {
            let records = load(&a.data)?;
            let mut csv = String::from("source_id,width,height,qp,S,L,Z,E,rate_bits\n");
            for r in &records {
                let fv = features::extract(&r.block);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    report::csv_field(r.block.source_id()),
                    r.block.width(),
                    r.block.height(),
                    r.block.qp(),
                    fv.s,
                    fv.l,
                    fv.z,
                    fv.e,
                    r.rate_bits()
                ));
            }
            write_output(a.out.as_deref(), csv.as_bytes())
        }
        Command::Fit(a) => {
            let spec = a.train.spec(a.model.into())?;
            let records = load(&a.data)?;
            let file = evaluation::train_model_file(&records, &spec)?;
            write_output(Some(&a.out), file.to_json()?.as_bytes())
        }
        Command::Eval(a) => {
            let model = load_model(&a.model)?;
            let records = load(&a.data)?;
            let opts = EvalOptions {
                measure_time: a.output.timing,
                clamp: a.clamp,
            };
            let metrics = evaluation::evaluate(&model, &records, opts)?;
            let qps = resrate::models::qp_set(&records);
            let row = ReportRow::new(model.kind(), None, qps, metrics);
            write_output(a.output.out.as_deref(), report::render(&[row], a.output.format)?.as_bytes())
        }
        Command::Cv(a) => {
            let specs = a
                .model
                .iter()
                .map(|&k| a.train.spec(k.into()))
                .collect::<Result<Vec<_>>>()?;
            let records = load(&a.data)?;
            let qps = resrate::models::qp_set(&records);
            let opts = CvOptions {
                k: a.folds,
                seed: a.seed,
                group_by_image: a.group_by_image,
                eval: EvalOptions {
                    measure_time: a.output.timing,
                    clamp: false,
                },
            };
            let mut rows = Vec::new();
            for spec in &specs {
                let cv = evaluation::kfold_cv(&records, spec, opts)?;
                rows.push(ReportRow::from_cv(spec.kind, qps.clone(), cv));
            }
            write_output(a.output.out.as_deref(), report::render(&rows, a.output.format)?.as_bytes())
        }
        Command::CrossQp(a) => {
            let specs = a
                .model
                .iter()
                .map(|&k| a.train_args.spec(k.into()))
                .collect::<Result<Vec<_>>>()?;
            require_file(&a.test)?;
            let train = load(&a.train)?;
            let test = load(&a.test)?;
            let opts = EvalOptions {
                measure_time: a.output.timing,
                clamp: false,
            };
            let mut rows = Vec::new();
            for spec in &specs {
                let rep = evaluation::cross_qp_eval(&train, &test, spec, opts)?;
                rows.push(ReportRow::new(spec.kind, Some(rep.qp_train), rep.qp_eval, rep.metrics));
            }
            write_output(a.output.out.as_deref(), report::render(&rows, a.output.format)?.as_bytes())
        }
        Command::Ablate(a) => {
            let records = load(&a.data)?;
            let table = evaluation::ablate(
                &records,
                CvOptions {
                    k: a.folds,
                    seed: a.seed,
                    ..Default::default()
                },
            )?;
            write_output(a.out.as_deref(), report::ablation_csv(&table).as_bytes())
        }
        Command::Plot(a) => {
            let model = load_model(&a.model)?;
            let records = load(&a.data)?;
            let points = evaluation::scatter_dump(&records, &model);
            write_output(a.out.as_deref(), report::scatter_csv(&points).as_bytes())
        }
    }
}
