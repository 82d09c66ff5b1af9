use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use dar_core::dar::{BorderMode, DarEvaluator, DarParams, EmptyGtPolicy};
use dar_core::iou::AggregationMode;
use dar_eval::config::{
    parse_aggregation, parse_border, parse_empty_gt, parse_format, OutputFormat, Settings,
};
use dar_eval::harness::{render_report, run_eval};
use dar_eval::io::{load_label_map, load_remap};
use dar_eval::{dar_debug_dump, EvalError, MetricSet};

const EXIT_CONFIG: u8 = 1;
const EXIT_IMAGE_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "dareval",
    version,
    about = "Segmentation mask evaluation: mIoU, class IoU and DaR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every prediction/ground-truth pair in two directories.
    #[command(
        long_about = "Score every prediction/ground-truth pair in two directories.\n\n\
        Files are paired by name stem, ignoring extensions. Masks must be single-channel \
        8-bit PNG or PGM and each pair must share a resolution; nothing is resampled, so \
        upsample predictions to ground-truth size first.\n\n\
        Exit status: 0 on success, 1 on configuration errors, 2 if any image failed \
        (the report is still written)."
    )]
    Eval(EvalArgs),
    /// Score a single pair and write the seven DaR intermediates as images.
    DarDebug(DebugArgs),
    /// Print the active Gaussian kernel.
    KernelDump(KernelArgs),
}

#[derive(Args)]
struct DarFlags {
    /// Gaussian standard deviation [default: 3.0]
    #[arg(long)]
    sigma: Option<f64>,
    /// Survival threshold on the blurred field, compared strictly [default: 0.999]
    #[arg(long)]
    th: Option<f64>,
    /// Kernel half-width in pixels [default: ceil(3 * sigma)]
    #[arg(long)]
    kernel_radius: Option<usize>,
    /// Outside-image handling for the blur [default: zero]
    #[arg(long, value_parser = parse_border, value_name = "zero|replicate")]
    border: Option<BorderMode>,
    /// Clamp negative DaR scores to 0
    #[arg(long)]
    clamp_dar: bool,
    /// Empty ground truth: skip and flag, or score 1 when prediction is also empty [default: skip]
    #[arg(long, value_parser = parse_empty_gt, value_name = "skip|binary")]
    empty_gt: Option<EmptyGtPolicy>,
}

#[derive(Args)]
struct MaskFlags {
    /// Number of classes in the label maps [default: 2]
    #[arg(long)]
    num_classes: Option<u32>,
    /// Class treated as foreground for DaR and class IoU [default: 1]
    #[arg(long)]
    positive_class: Option<u32>,
    /// Pixel value to class id table, one `raw class` pair per line
    #[arg(long, value_name = "FILE")]
    remap: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Flat `key = value` file using the long flag names; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pred_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    gt_dir: Option<PathBuf>,
    /// Comma-separated subset of miou, class-iou, dar [default: all]
    #[arg(long, value_parser = |s: &str| s.parse::<MetricSet>())]
    metrics: Option<MetricSet>,
    #[command(flatten)]
    mask: MaskFlags,
    #[command(flatten)]
    dar: DarFlags,
    /// Dataset IoU aggregation [default: per-image]
    #[arg(long, value_parser = parse_aggregation, value_name = "per-image|global")]
    iou_agg: Option<AggregationMode>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Report path [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format, value_name = "json|csv")]
    format: Option<OutputFormat>,
    /// Write DaR intermediates for each image into DIR/<image id>/
    #[arg(long, value_name = "DIR")]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DebugArgs {
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    #[arg(long, value_name = "DIR")]
    dump_dir: PathBuf,
    #[command(flatten)]
    mask: MaskFlags,
    #[command(flatten)]
    dar: DarFlags,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    dar: DarFlags,
}

impl DarFlags {
    fn settings(&self) -> Settings {
        Settings {
            sigma: self.sigma,
            th: self.th,
            kernel_radius: self.kernel_radius,
            border: self.border,
            clamp_dar: self.clamp_dar.then_some(true),
            empty_gt: self.empty_gt,
            ..Settings::default()
        }
    }
}

impl MaskFlags {
    fn apply(&self, s: Settings) -> Settings {
        Settings {
            num_classes: self.num_classes,
            positive_class: self.positive_class,
            remap: self.remap.clone(),
            ..s
        }
    }
}

impl EvalArgs {
    fn settings(&self) -> Settings {
        Settings {
            pred_dir: self.pred_dir.clone(),
            gt_dir: self.gt_dir.clone(),
            metrics: self.metrics,
            iou_agg: self.iou_agg,
            workers: self.workers,
            out: self.out.clone(),
            format: self.format,
            dump_dir: self.dump_dir.clone(),
            ..self.mask.apply(self.dar.settings())
        }
    }
}

/// A failure with its exit status.
struct Failure(u8, String);

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure(EXIT_CONFIG, e.to_string())
    }
}

/// Writes `text` to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<u8, Failure> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Ok(()) => Ok(0),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(0),
        Err(e) => Err(Failure(EXIT_CONFIG, e.to_string())),
    }
}

fn warn_subsets(ev: &DarEvaluator) {
    if !ev.preserves_subsets() {
        let p = ev.params();
        eprintln!(
            "warning: centre weight {} does not exceed 1 - th ({}); survivors may include pixels outside the disagreement",
            ev.kernel().center_weight(),
            1.0 - p.th
        );
    }
}

fn eval(args: &EvalArgs) -> Result<u8, Failure> {
    let file = match &args.config {
        Some(path) => Settings::load_file(path)?,
        None => Settings::default(),
    };
    let cfg = match file.overlay(args.settings()).resolve() {
        Ok(cfg) => cfg,
        Err(e @ EvalError::Config(_)) => {
            let mut cmd = Cli::command();
            let help = cmd.find_subcommand_mut("eval").unwrap().render_help();
            return Err(Failure(EXIT_CONFIG, format!("{e}\n\n{help}")));
        }
        Err(e) => return Err(e.into()),
    };
    if cfg.metrics.dar {
        warn_subsets(&DarEvaluator::new(cfg.dar).map_err(EvalError::from)?);
    }
    let report = run_eval(&cfg)?;
    let bytes = render_report(&report, cfg.format)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure(EXIT_CONFIG, format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?,
    }
    for e in report.per_image.iter().filter(|e| e.error.is_some()) {
        eprintln!("{}: {}", e.image_id, e.error.as_deref().unwrap_or_default());
    }
    Ok(if report.dataset.failed > 0 {
        EXIT_IMAGE_FAILURE
    } else {
        0
    })
}

fn dar_debug(args: &DebugArgs) -> Result<u8, Failure> {
    let s = args.mask.apply(args.dar.settings());
    let params = s.dar_params();
    let ev = DarEvaluator::new(params).map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
    warn_subsets(&ev);
    let num_classes = s.num_classes.unwrap_or(2);
    let positive = s.positive_class.unwrap_or(1);
    if positive >= num_classes {
        return Err(Failure(
            EXIT_CONFIG,
            format!("positive-class {positive} is out of range for {num_classes} classes"),
        ));
    }
    let remap = match &s.remap {
        Some(p) => Some(load_remap(p)?),
        None if num_classes == 2 => Some(dar_core::mask::ValueRemap::binary_nonzero()),
        None => None,
    };
    let image_failure = |e: EvalError| Failure(EXIT_IMAGE_FAILURE, e.to_string());
    let pred = load_label_map(&args.pred, num_classes, remap.as_ref()).map_err(image_failure)?;
    let gt = load_label_map(&args.gt, num_classes, remap.as_ref()).map_err(image_failure)?;
    let binarize =
        |m: &dar_core::mask::LabelMap| m.binarize(positive).map_err(|e| image_failure(e.into()));
    let result = ev
        .components(&binarize(&pred)?, &binarize(&gt)?)
        .map_err(|e| image_failure(e.into()))?;
    let files = dar_debug_dump(&result, &args.dump_dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "dar = {}", result.score);
    if let Some(raw) = result.raw_score {
        let _ = writeln!(out, "raw_score = {raw}");
    }
    let _ = writeln!(out, "surviving_fp = {}", result.surviving_fp);
    let _ = writeln!(out, "surviving_fn = {}", result.surviving_fn);
    let _ = writeln!(out, "gt_ones = {}", result.gt_ones);
    let _ = writeln!(out, "vanished_components = {}", result.vanished_components);
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    emit(&out)
}

fn kernel_dump(args: &KernelArgs) -> Result<u8, Failure> {
    let params: DarParams = args.dar.settings().dar_params();
    let ev = DarEvaluator::new(params).map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
    warn_subsets(&ev);
    let k = ev.kernel();
    let mut out = String::new();
    let _ = writeln!(out, "sigma = {}", k.sigma());
    let _ = writeln!(out, "radius = {}", k.radius());
    let _ = writeln!(out, "side = {}", k.side());
    let _ = writeln!(out, "th = {}", params.th);
    let _ = writeln!(out, "center_weight = {}", k.center_weight());
    let _ = writeln!(out, "subset_guaranteed = {}", ev.preserves_subsets());
    let taps: Vec<String> = k.taps().iter().map(f64::to_string).collect();
    let _ = writeln!(out, "taps = {}", taps.join(" "));
    let _ = writeln!(out, "weights:");
    for row in k.weights().chunks(k.side()) {
        let row: Vec<String> = row.iter().map(|w| format!("{w:.17e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    emit(&out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Eval(a) => eval(a),
        Command::DarDebug(a) => dar_debug(a),
        Command::KernelDump(a) => kernel_dump(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
