//! Batch evaluation over paired prediction and ground-truth directories.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dar_core::dar::{DarEvaluator, DarResult};
use dar_core::iou::{aggregate_iou, confusion_counts, ConfusionCounts};
use dar_core::mask::{LabelMap, ValueRemap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    aggregation_name, border_name, empty_gt_name, parse_aggregation, EvalConfig, OutputFormat,
};
use crate::debug::dar_debug_dump;
use crate::error::{EvalError, Result};
use crate::io::load_label_map;

/// Id used for the aggregate row in CSV output.
pub const DATASET_ROW_ID: &str = "__dataset__";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskPair {
    pub id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pairing {
    /// Sorted by id.
    pub pairs: Vec<MaskPair>,
    /// File names without a partner, sorted.
    pub unmatched_pred: Vec<String>,
    pub unmatched_gt: Vec<String>,
}

fn list_stems(dir: &Path) -> Result<(BTreeMap<String, PathBuf>, Vec<String>)> {
    if !dir.is_dir() {
        return Err(EvalError::DirectoryNotFound(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| EvalError::io(dir, e))? {
        let entry = entry.map_err(|e| EvalError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !path.is_file() {
            continue;
        }
        files.push((name, path));
    }
    files.sort();
    let mut stems = BTreeMap::new();
    let mut duplicates = Vec::new();
    for (name, path) in files {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.clone());
        match stems.entry(stem) {
            Entry::Occupied(_) => duplicates.push(name),
            Entry::Vacant(slot) => {
                slot.insert(path);
            }
        }
    }
    Ok((stems, duplicates))
}

/// Matches files by stem, ignoring extensions. When several files in one
/// directory share a stem the first by file name is used and the rest are
/// reported as unmatched.
pub fn pair_masks(pred_dir: &Path, gt_dir: &Path) -> Result<Pairing> {
    let (mut pred, dup_pred) = list_stems(pred_dir)?;
    let (mut gt, dup_gt) = list_stems(gt_dir)?;
    let mut out = Pairing {
        unmatched_pred: dup_pred,
        unmatched_gt: dup_gt,
        ..Pairing::default()
    };
    let file_name = |p: &Path| {
        p.file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned()
    };
    let ids: Vec<String> = pred
        .keys()
        .filter(|k| gt.contains_key(*k))
        .cloned()
        .collect();
    for id in ids {
        let p = pred.remove(&id).unwrap();
        let g = gt.remove(&id).unwrap();
        out.pairs.push(MaskPair { id, pred: p, gt: g });
    }
    out.unmatched_pred
        .extend(pred.values().map(|p| file_name(p)));
    out.unmatched_gt.extend(gt.values().map(|p| file_name(p)));
    out.unmatched_pred.sort();
    out.unmatched_gt.sort();
    if out.pairs.is_empty() {
        return Err(EvalError::NoPairsFound {
            unmatched_pred: out.unmatched_pred,
            unmatched_gt: out.unmatched_gt,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Ground truth has no positive pixels.
    EmptyGt,
    /// Raw DaR was below zero.
    DarNegative,
    /// Raw DaR was below zero and the reported score was clamped.
    DarClamped,
    /// A ground-truth component was missed entirely yet left no survivors.
    VanishedGtComponent,
    Failed,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::EmptyGt => "empty-gt",
            Flag::DarNegative => "dar-negative",
            Flag::DarClamped => "dar-clamped",
            Flag::VanishedGtComponent => "vanished-gt-component",
            Flag::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    #[serde(rename = "fn")]
    pub fn_: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarDetail {
    pub raw_score: Option<f64>,
    pub surviving_fp: usize,
    pub surviving_fn: usize,
    pub y_prime_ones: usize,
    pub gt_ones: usize,
    pub vanished_components: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub pred_file: String,
    pub gt_file: String,
    pub status: Status,
    pub error: Option<String>,
    /// `[width, height]` shared by the pair.
    pub resolution: Option<[usize; 2]>,
    pub miou: Option<f64>,
    pub cgl_iou: Option<f64>,
    pub per_class_iou: Option<Vec<Option<f64>>>,
    pub confusion: Option<Confusion>,
    pub dar: Option<f64>,
    pub dar_detail: Option<DarDetail>,
    pub flags: Vec<Flag>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapRange {
    pub raw_from: u8,
    pub raw_to: u8,
    pub class: u32,
}

fn remap_ranges(remap: &ValueRemap) -> Vec<RemapRange> {
    let mut out: Vec<RemapRange> = Vec::new();
    for (raw, class) in remap.entries() {
        match out.last_mut() {
            Some(r) if r.class == class && u16::from(r.raw_to) + 1 == u16::from(raw) => {
                r.raw_to = raw
            }
            _ => out.push(RemapRange {
                raw_from: raw,
                raw_to: raw,
                class,
            }),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub pred_dir: String,
    pub gt_dir: String,
    pub metrics: Vec<String>,
    pub num_classes: u32,
    pub positive_class: u32,
    pub sigma: f64,
    pub th: f64,
    pub kernel_radius: usize,
    pub kernel_center_weight: f64,
    pub subset_guaranteed: bool,
    pub border_mode: String,
    pub empty_gt_policy: String,
    pub clamp_dar: bool,
    pub iou_aggregation: String,
    /// `null` for identity, `"default-binary"`, or the remap file path.
    pub remap_source: Option<String>,
    pub remap: Vec<RemapRange>,
    pub debug_dump_dir: Option<String>,
    pub format: String,
    /// Distinct `[width, height]` among evaluated pairs, sorted.
    pub resolutions: Vec<[usize; 2]>,
    pub unmatched_pred: Vec<String>,
    pub unmatched_gt: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub images: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub miou: Option<f64>,
    pub cgl_iou: Option<f64>,
    pub per_class_iou: Option<Vec<Option<f64>>>,
    pub dar: Option<f64>,
    /// Images contributing to the DaR mean.
    pub dar_images: usize,
    pub empty_gt_images: usize,
    pub dar_clamped_images: usize,
    pub vanished_component_images: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub per_image: Vec<ImageEntry>,
    pub dataset: DatasetSummary,
}

impl EvalReport {
    /// Dataset aggregates derived from `per_image` and the provenance
    /// settings alone.
    pub fn recompute_dataset(&self) -> Result<DatasetSummary> {
        let p = &self.provenance;
        let mode = parse_aggregation(&p.iou_aggregation).map_err(EvalError::Config)?;
        let has = |m: &str| p.metrics.iter().any(|x| x == m);
        let mut s = DatasetSummary {
            images: self.per_image.len(),
            ..DatasetSummary::default()
        };
        let mut counts = Vec::new();
        let mut dar_sum = 0.0;
        for e in &self.per_image {
            if e.status == Status::Failed {
                s.failed += 1;
                continue;
            }
            s.evaluated += 1;
            if let Some(c) = &e.confusion {
                counts.push(ConfusionCounts::from_parts(
                    c.tp.clone(),
                    c.fp.clone(),
                    c.fn_.clone(),
                )?);
            }
            if let Some(d) = e.dar {
                dar_sum += d;
                s.dar_images += 1;
            }
            s.empty_gt_images += e.flags.contains(&Flag::EmptyGt) as usize;
            s.dar_clamped_images += e.flags.contains(&Flag::DarClamped) as usize;
            s.vanished_component_images += e.flags.contains(&Flag::VanishedGtComponent) as usize;
        }
        if (has("miou") || has("class-iou")) && !counts.is_empty() {
            let r = aggregate_iou(&counts, mode, p.positive_class)?;
            s.per_class_iou = Some(r.per_class_iou);
            if has("miou") {
                s.miou = Some(r.mean_iou);
            }
            if has("class-iou") {
                s.cgl_iou = r.cgl_iou;
            }
        }
        if s.dar_images > 0 {
            s.dar = Some(dar_sum / s.dar_images as f64);
        }
        Ok(s)
    }
}

struct Job<'a> {
    cfg: &'a EvalConfig,
    remap: Option<ValueRemap>,
    dar: Option<DarEvaluator>,
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

fn blank_entry(pair: &MaskPair) -> ImageEntry {
    ImageEntry {
        image_id: pair.id.clone(),
        pred_file: file_name(&pair.pred),
        gt_file: file_name(&pair.gt),
        status: Status::Ok,
        error: None,
        resolution: None,
        miou: None,
        cgl_iou: None,
        per_class_iou: None,
        confusion: None,
        dar: None,
        dar_detail: None,
        flags: Vec::new(),
    }
}

impl Job<'_> {
    fn entry(&self, pair: &MaskPair) -> ImageEntry {
        let mut e = blank_entry(pair);
        if let Err(err) = self.fill(pair, &mut e) {
            let resolution = e.resolution;
            e = ImageEntry {
                status: Status::Failed,
                error: Some(err.to_string()),
                resolution,
                flags: vec![Flag::Failed],
                ..blank_entry(pair)
            };
        }
        e
    }

    fn fill(&self, pair: &MaskPair, e: &mut ImageEntry) -> Result<()> {
        let cfg = self.cfg;
        let remap = self.remap.as_ref();
        let pred = load_label_map(&pair.pred, cfg.num_classes, remap)?;
        let gt = load_label_map(&pair.gt, cfg.num_classes, remap)?;
        gt.dims()
            .ensure_same(pred.dims())
            .map_err(|source| EvalError::Mask {
                path: pair.pred.clone(),
                source,
            })?;
        e.resolution = Some([gt.width(), gt.height()]);
        if cfg.metrics.any_iou() {
            self.iou(&pred, &gt, e)?;
        }
        if let Some(ev) = &self.dar {
            self.dar(ev, pair, &pred, &gt, e)?;
        }
        Ok(())
    }

    fn iou(&self, pred: &LabelMap, gt: &LabelMap, e: &mut ImageEntry) -> Result<()> {
        let c = confusion_counts(pred, gt)?;
        if self.cfg.metrics.miou {
            e.miou = Some(c.mean_iou()?);
        }
        if self.cfg.metrics.class_iou {
            e.cgl_iou = c.class_iou(self.cfg.positive_class)?;
        }
        e.per_class_iou = Some(c.per_class_iou());
        e.confusion = Some(Confusion {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        });
        Ok(())
    }

    fn dar(
        &self,
        ev: &DarEvaluator,
        pair: &MaskPair,
        pred: &LabelMap,
        gt: &LabelMap,
        e: &mut ImageEntry,
    ) -> Result<()> {
        let pos = self.cfg.positive_class;
        let (pred, gt) = (pred.binarize(pos)?, gt.binarize(pos)?);
        let dump = self.cfg.debug_dump_dir.as_ref();
        let result = if dump.is_some() {
            ev.components(&pred, &gt)
        } else {
            ev.score(&pred, &gt)
        };
        let r: DarResult = match result {
            Ok(r) => r,
            Err(dar_core::Error::EmptyGroundTruth) => {
                e.flags.push(Flag::EmptyGt);
                return Ok(());
            }
            Err(err) => return Err(err.into()),
        };
        if let Some(dir) = dump {
            dar_debug_dump(&r, &dir.join(&pair.id))?;
        }
        if r.empty_gt {
            e.flags.push(Flag::EmptyGt);
        }
        if r.raw_score.is_some_and(|s| s < 0.0) {
            e.flags.push(Flag::DarNegative);
        }
        if r.clamped {
            e.flags.push(Flag::DarClamped);
        }
        if r.vanished_components > 0 {
            e.flags.push(Flag::VanishedGtComponent);
        }
        e.dar = Some(r.score);
        e.dar_detail = Some(DarDetail {
            raw_score: r.raw_score,
            surviving_fp: r.surviving_fp,
            surviving_fn: r.surviving_fn,
            y_prime_ones: r.y_prime_ones,
            gt_ones: r.gt_ones,
            vanished_components: r.vanished_components,
        });
        Ok(())
    }
}

/// Runs every selected metric on every pair. Per-image problems become
/// failed entries; only configuration and pairing problems abort the run.
pub fn run_eval(cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let pairing = pair_masks(&cfg.pred_dir, &cfg.gt_dir)?;
    let dar = if cfg.metrics.dar {
        Some(DarEvaluator::new(cfg.dar).map_err(|e| EvalError::Config(e.to_string()))?)
    } else {
        None
    };
    let kernel = cfg
        .dar
        .kernel()
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let job = Job {
        cfg,
        remap: cfg.effective_remap(),
        dar,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| EvalError::Config(format!("cannot start worker pool: {e}")))?;
    let mut per_image: Vec<ImageEntry> =
        pool.install(|| pairing.pairs.par_iter().map(|p| job.entry(p)).collect());
    per_image.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let mut resolutions: Vec<[usize; 2]> = per_image.iter().filter_map(|e| e.resolution).collect();
    resolutions.sort();
    resolutions.dedup();
    let remap_source = match (&cfg.remap, &job.remap) {
        (Some((path, _)), _) => Some(path.display().to_string()),
        (None, Some(_)) => Some("default-binary".to_string()),
        (None, None) => None,
    };
    let provenance = Provenance {
        toolkit: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        pred_dir: cfg.pred_dir.display().to_string(),
        gt_dir: cfg.gt_dir.display().to_string(),
        metrics: cfg.metrics.names().into_iter().map(String::from).collect(),
        num_classes: cfg.num_classes,
        positive_class: cfg.positive_class,
        sigma: cfg.dar.sigma,
        th: cfg.dar.th,
        kernel_radius: cfg.dar.kernel_radius,
        kernel_center_weight: kernel.center_weight(),
        subset_guaranteed: kernel.preserves_subsets(cfg.dar.th),
        border_mode: border_name(cfg.dar.border_mode).to_string(),
        empty_gt_policy: empty_gt_name(cfg.dar.empty_gt_policy).to_string(),
        clamp_dar: cfg.dar.clamp_negative,
        iou_aggregation: aggregation_name(cfg.iou_aggregation).to_string(),
        remap_source,
        remap: job.remap.as_ref().map(remap_ranges).unwrap_or_default(),
        debug_dump_dir: cfg.debug_dump_dir.as_ref().map(|p| p.display().to_string()),
        format: format_name(cfg.format).to_string(),
        resolutions,
        unmatched_pred: pairing.unmatched_pred,
        unmatched_gt: pairing.unmatched_gt,
    };
    let mut report = EvalReport {
        provenance,
        per_image,
        dataset: DatasetSummary::default(),
    };
    report.dataset = report.recompute_dataset()?;
    Ok(report)
}

pub fn format_name(f: OutputFormat) -> &'static str {
    match f {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn join_flags(flags: &[Flag]) -> String {
    flags.iter().map(|f| f.name()).collect::<Vec<_>>().join(";")
}

/// Serializes the report. JSON carries everything; CSV has one row per image
/// plus a trailing aggregate row.
pub fn render_report(report: &EvalReport, format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["image_id", "miou", "cgl_iou", "dar", "flags"])?;
            for e in &report.per_image {
                w.write_record([
                    e.image_id.clone(),
                    opt(e.miou),
                    opt(e.cgl_iou),
                    opt(e.dar),
                    join_flags(&e.flags),
                ])?;
            }
            let d = &report.dataset;
            let mut counts = Vec::new();
            for (flag, n) in [
                (Flag::Failed, d.failed),
                (Flag::EmptyGt, d.empty_gt_images),
                (Flag::DarClamped, d.dar_clamped_images),
                (Flag::VanishedGtComponent, d.vanished_component_images),
            ] {
                if n > 0 {
                    counts.push(format!("{}={n}", flag.name()));
                }
            }
            w.write_record([
                DATASET_ROW_ID.to_string(),
                opt(d.miou),
                opt(d.cgl_iou),
                opt(d.dar),
                counts.join(";"),
            ])?;
            w.into_inner().map_err(|e| EvalError::Io {
                path: PathBuf::from("<csv>"),
                source: e.into_error(),
            })
        }
    }
}

pub fn write_report(report: &EvalReport, format: OutputFormat, path: &Path) -> Result<()> {
    let bytes = render_report(report, format)?;
    fs::write(path, bytes).map_err(|e| EvalError::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<EvalReport> {
    let bytes = fs::read(path).map_err(|e| EvalError::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}
