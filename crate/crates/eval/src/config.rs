//! Evaluation settings: defaults, then a flat `key = value` file, then
//! command-line flags. Keys are the long flag names without the leading dashes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dar_core::dar::{default_radius, BorderMode, DarParams, EmptyGtPolicy};
use dar_core::iou::AggregationMode;
use dar_core::mask::{ClassId, ValueRemap};

use crate::error::{EvalError, Result};
use crate::io::load_remap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricSet {
    pub miou: bool,
    pub class_iou: bool,
    pub dar: bool,
}

impl MetricSet {
    pub const ALL: MetricSet = MetricSet {
        miou: true,
        class_iou: true,
        dar: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.miou || self.class_iou || self.dar)
    }

    pub fn any_iou(&self) -> bool {
        self.miou || self.class_iou
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.miou {
            out.push("miou");
        }
        if self.class_iou {
            out.push("class-iou");
        }
        if self.dar {
            out.push("dar");
        }
        out
    }
}

impl Default for MetricSet {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for MetricSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut set = MetricSet {
            miou: false,
            class_iou: false,
            dar: false,
        };
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "miou" => set.miou = true,
                "class-iou" => set.class_iou = true,
                "dar" => set.dar = true,
                other => {
                    return Err(format!(
                        "unknown metric `{other}` (expected miou, class-iou, dar)"
                    ))
                }
            }
        }
        if set.is_empty() {
            return Err("at least one metric is required".into());
        }
        Ok(set)
    }
}

impl fmt::Display for MetricSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

pub fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        _ => Err(format!("unknown format `{s}` (expected json or csv)")),
    }
}

pub fn parse_border(s: &str) -> Result<BorderMode, String> {
    match s {
        "zero" => Ok(BorderMode::ZeroPad),
        "replicate" => Ok(BorderMode::Replicate),
        _ => Err(format!(
            "unknown border mode `{s}` (expected zero or replicate)"
        )),
    }
}

pub fn border_name(b: BorderMode) -> &'static str {
    match b {
        BorderMode::ZeroPad => "zero",
        BorderMode::Replicate => "replicate",
    }
}

pub fn parse_empty_gt(s: &str) -> Result<EmptyGtPolicy, String> {
    match s {
        "skip" => Ok(EmptyGtPolicy::Skip),
        "binary" => Ok(EmptyGtPolicy::ScoreOneIfClean),
        _ => Err(format!(
            "unknown empty-gt policy `{s}` (expected skip or binary)"
        )),
    }
}

pub fn empty_gt_name(p: EmptyGtPolicy) -> &'static str {
    match p {
        EmptyGtPolicy::Skip => "skip",
        EmptyGtPolicy::ScoreOneIfClean => "binary",
    }
}

pub fn parse_aggregation(s: &str) -> Result<AggregationMode, String> {
    match s {
        "per-image" => Ok(AggregationMode::PerImageMean),
        "global" => Ok(AggregationMode::GlobalCounts),
        _ => Err(format!(
            "unknown aggregation `{s}` (expected per-image or global)"
        )),
    }
}

pub fn aggregation_name(m: AggregationMode) -> &'static str {
    match m {
        AggregationMode::PerImageMean => "per-image",
        AggregationMode::GlobalCounts => "global",
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, found `{s}`")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("invalid number `{s}`"))
}

/// A fully resolved evaluation run.
#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    pub metrics: MetricSet,
    pub num_classes: u32,
    pub positive_class: ClassId,
    pub dar: DarParams,
    pub iou_aggregation: AggregationMode,
    /// Explicit remap table and the file it came from.
    pub remap: Option<(PathBuf, ValueRemap)>,
    pub workers: usize,
    pub debug_dump_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl EvalConfig {
    /// Binary evaluation of `pred_dir` against `gt_dir` with every metric.
    pub fn new(pred_dir: impl Into<PathBuf>, gt_dir: impl Into<PathBuf>) -> Self {
        EvalConfig {
            pred_dir: pred_dir.into(),
            gt_dir: gt_dir.into(),
            metrics: MetricSet::ALL,
            num_classes: 2,
            positive_class: 1,
            dar: DarParams::default(),
            iou_aggregation: AggregationMode::default(),
            remap: None,
            workers: 1,
            debug_dump_dir: None,
            out: None,
            format: OutputFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(EvalError::Config(m));
        if self.metrics.is_empty() {
            return fail("at least one metric is required".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.num_classes == 0 {
            return fail("num-classes must be at least 1".into());
        }
        if self.positive_class >= self.num_classes {
            return fail(format!(
                "positive-class {} is out of range for {} classes",
                self.positive_class, self.num_classes
            ));
        }
        self.dar
            .validate()
            .map_err(|e| EvalError::Config(e.to_string()))
    }

    /// The table applied to raw pixel values: the explicit one, else
    /// `{0 -> 0, nonzero -> 1}` for two classes, else none.
    pub fn effective_remap(&self) -> Option<ValueRemap> {
        match (&self.remap, self.num_classes) {
            (Some((_, r)), _) => Some(r.clone()),
            (None, 2) => Some(ValueRemap::binary_nonzero()),
            (None, _) => None,
        }
    }
}

/// Partially specified settings from one source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub pred_dir: Option<PathBuf>,
    pub gt_dir: Option<PathBuf>,
    pub metrics: Option<MetricSet>,
    pub num_classes: Option<u32>,
    pub positive_class: Option<ClassId>,
    pub sigma: Option<f64>,
    pub th: Option<f64>,
    pub kernel_radius: Option<usize>,
    pub border: Option<BorderMode>,
    pub clamp_dar: Option<bool>,
    pub empty_gt: Option<EmptyGtPolicy>,
    pub iou_agg: Option<AggregationMode>,
    pub remap: Option<PathBuf>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub dump_dir: Option<PathBuf>,
}

impl Settings {
    /// Sets one key by its flag name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "pred-dir" => self.pred_dir = Some(value.into()),
            "gt-dir" => self.gt_dir = Some(value.into()),
            "metrics" => self.metrics = Some(value.parse()?),
            "num-classes" => self.num_classes = Some(parse_num(value)?),
            "positive-class" => self.positive_class = Some(parse_num(value)?),
            "sigma" => self.sigma = Some(parse_num(value)?),
            "th" => self.th = Some(parse_num(value)?),
            "kernel-radius" => self.kernel_radius = Some(parse_num(value)?),
            "border" => self.border = Some(parse_border(value)?),
            "clamp-dar" => self.clamp_dar = Some(parse_bool(value)?),
            "empty-gt" => self.empty_gt = Some(parse_empty_gt(value)?),
            "iou-agg" => self.iou_agg = Some(parse_aggregation(value)?),
            "remap" => self.remap = Some(value.into()),
            "workers" => self.workers = Some(parse_num(value)?),
            "out" => self.out = Some(value.into()),
            "format" => self.format = Some(parse_format(value)?),
            "dump-dir" => self.dump_dir = Some(value.into()),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn parse_file_text(text: &str, origin: &Path) -> Result<Settings> {
        let mut s = Settings::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| EvalError::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim().trim_start_matches("--");
            s.set(key, value.trim()).map_err(err)?;
        }
        Ok(s)
    }

    pub fn load_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        Self::parse_file_text(&text, path)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            pred_dir: over.pred_dir.or(self.pred_dir),
            gt_dir: over.gt_dir.or(self.gt_dir),
            metrics: over.metrics.or(self.metrics),
            num_classes: over.num_classes.or(self.num_classes),
            positive_class: over.positive_class.or(self.positive_class),
            sigma: over.sigma.or(self.sigma),
            th: over.th.or(self.th),
            kernel_radius: over.kernel_radius.or(self.kernel_radius),
            border: over.border.or(self.border),
            clamp_dar: over.clamp_dar.or(self.clamp_dar),
            empty_gt: over.empty_gt.or(self.empty_gt),
            iou_agg: over.iou_agg.or(self.iou_agg),
            remap: over.remap.or(self.remap),
            workers: over.workers.or(self.workers),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            dump_dir: over.dump_dir.or(self.dump_dir),
        }
    }

    /// DaR parameters with unset fields at their defaults. The radius
    /// follows the effective sigma unless given.
    pub fn dar_params(&self) -> DarParams {
        let sigma = self.sigma.unwrap_or(dar_core::dar::DEFAULT_SIGMA);
        DarParams {
            sigma,
            th: self.th.unwrap_or(dar_core::dar::DEFAULT_THRESHOLD),
            kernel_radius: self.kernel_radius.unwrap_or_else(|| default_radius(sigma)),
            border_mode: self.border.unwrap_or_default(),
            empty_gt_policy: self.empty_gt.unwrap_or_default(),
            clamp_negative: self.clamp_dar.unwrap_or(false),
        }
    }

    /// Fills defaults, loads the remap file and validates.
    pub fn resolve(self) -> Result<EvalConfig> {
        let pred_dir = self
            .pred_dir
            .clone()
            .ok_or_else(|| EvalError::Config("--pred-dir is required".into()))?;
        let gt_dir = self
            .gt_dir
            .clone()
            .ok_or_else(|| EvalError::Config("--gt-dir is required".into()))?;
        let remap = match &self.remap {
            Some(p) => Some((p.clone(), load_remap(p)?)),
            None => None,
        };
        let cfg = EvalConfig {
            pred_dir,
            gt_dir,
            metrics: self.metrics.unwrap_or_default(),
            num_classes: self.num_classes.unwrap_or(2),
            positive_class: self.positive_class.unwrap_or(1),
            dar: self.dar_params(),
            iou_aggregation: self.iou_agg.unwrap_or_default(),
            remap,
            workers: self.workers.unwrap_or_else(default_workers),
            debug_dump_dir: self.dump_dir.clone(),
            out: self.out.clone(),
            format: self.format.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
