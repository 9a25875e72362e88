//! Runs a pipeline over a dataset and collects per-sample metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::EditSample;
use super::{delegated, idcs, metrics, ssim, EvalError};
use crate::canonical::Canon;
use crate::gateway::{EmbedTag, Gateway};
use crate::pipeline::EditPipeline;
use crate::reasoning::{PromptSet, PROMPT_VERSION};
use crate::ssr::BinaryMask;

pub const REPORT_VERSION: i64 = 1;

/// Declaration order is table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Psnr,
    Ssim,
    Lpips,
    Idcs,
    Clip,
    ClipI,
    Dino,
    L1,
    L2,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Psnr,
        Metric::Ssim,
        Metric::Lpips,
        Metric::Idcs,
        Metric::Clip,
        Metric::ClipI,
        Metric::Dino,
        Metric::L1,
        Metric::L2,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::Lpips => "lpips",
            Metric::Idcs => "idcs",
            Metric::Clip => "clip",
            Metric::ClipI => "clip_i",
            Metric::Dino => "dino",
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Metric::Psnr => "PSNR",
            Metric::Ssim => "SSIM",
            Metric::Lpips => "LPIPS",
            Metric::Idcs => "IDCS",
            Metric::Clip => "CLIP",
            Metric::ClipI => "CLIP-I",
            Metric::Dino => "DINO",
            Metric::L1 => "L1",
            Metric::L2 => "L2",
        }
    }

    /// Parses a comma-separated list; the result is deduplicated and in
    /// column order.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>, String> {
        let set: BTreeSet<Metric> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Metric::from_str)
            .collect::<Result<_, _>>()?;
        if set.is_empty() {
            return Err("no metrics given".into());
        }
        Ok(set.into_iter().collect())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.key().eq_ignore_ascii_case(s) || m.header().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// Where preservation metrics (PSNR, SSIM, LPIPS) look.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionMode {
    Full,
    /// Only pixels outside the ground-truth edit mask.
    #[default]
    OutsideMask,
}

impl RegionMode {
    pub fn name(self) -> &'static str {
        match self {
            RegionMode::Full => "full",
            RegionMode::OutsideMask => "outside-mask",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipVariant {
    /// Edited image against the query text.
    ImageText,
    /// Edited image against the reference image.
    ImageImage,
}

impl ClipVariant {
    pub fn name(self) -> &'static str {
        match self {
            ClipVariant::ImageText => "image-text",
            ClipVariant::ImageImage => "image-image",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub metrics: Vec<Metric>,
    pub region: RegionMode,
    /// Required when `metrics` contains `Clip`.
    pub clip_variant: Option<ClipVariant>,
    pub workers: usize,
    /// Label recorded with IDCS difference reports.
    pub judge: String,
    pub config_hash: String,
    pub timestamp: String,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::Psnr, Metric::Ssim],
            region: RegionMode::default(),
            clip_variant: None,
            workers: 4,
            judge: "default".into(),
            config_hash: String::new(),
            timestamp: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub id: String,
    /// One entry per configured metric; `None` when it could not be computed.
    pub values: BTreeMap<Metric, Option<f64>>,
    /// Why a metric is missing.
    pub errors: BTreeMap<Metric, String>,
    /// Set when the pipeline itself failed on this sample.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    /// Sorted by sample id.
    pub rows: Vec<SampleRow>,
    /// Mean over the rows that have a value.
    pub aggregates: BTreeMap<Metric, Option<f64>>,
    pub metadata: BTreeMap<String, Canon>,
}

struct Ctx<'a> {
    gw: &'a Gateway,
    prompts: &'a PromptSet,
    cfg: &'a BenchConfig,
}

fn no_reference() -> EvalError {
    EvalError::Shape("sample has no reference image".into())
}

/// Copy of `image` with the masked pixels set to black.
fn blank(image: &RgbImage, mask: &BinaryMask) -> RgbImage {
    let mut out = image.clone();
    for (x, y) in mask.pixels() {
        out.put_pixel(x, y, image::Rgb([0, 0, 0]));
    }
    out
}

impl Ctx<'_> {
    fn metric(&self, m: Metric, s: &EditSample, edited: &RgbImage) -> Result<f64, EvalError> {
        let outside = s.gt_mask.complement();
        let region = match self.cfg.region {
            RegionMode::Full => None,
            RegionMode::OutsideMask => Some(&outside),
        };
        let reference = || s.reference.as_ref().ok_or_else(no_reference);
        match m {
            Metric::Psnr => metrics::psnr(&s.image, edited, region),
            Metric::Ssim => ssim::ssim(&s.image, edited, region),
            Metric::Lpips => match self.cfg.region {
                RegionMode::Full => delegated::lpips(self.gw, &s.image, edited),
                RegionMode::OutsideMask => delegated::lpips(
                    self.gw,
                    &blank(&s.image, &s.gt_mask),
                    &blank(edited, &s.gt_mask),
                ),
            },
            Metric::Idcs => idcs::idcs(self.gw, self.prompts, &self.cfg.judge, &s.image, edited, &s.query)
                .map(|(_, score)| score as f64),
            Metric::Clip => match self.cfg.clip_variant {
                Some(ClipVariant::ImageText) => delegated::clip_image_text(self.gw, edited, &s.query),
                Some(ClipVariant::ImageImage) => {
                    delegated::delegated_similarity(self.gw, EmbedTag::ClipImage, edited, reference()?)
                }
                None => Err(EvalError::Config("clip metric needs an explicit variant".into())),
            },
            Metric::ClipI => {
                delegated::delegated_similarity(self.gw, EmbedTag::ClipImage, edited, reference()?)
            }
            Metric::Dino => delegated::delegated_similarity(self.gw, EmbedTag::Dino, edited, reference()?),
            Metric::L1 => metrics::l1(edited, reference()?),
            Metric::L2 => metrics::l2(edited, reference()?),
        }
    }

    fn row(&self, s: &EditSample, pipeline: &dyn EditPipeline) -> (SampleRow, BTreeSet<Metric>) {
        let mut row = SampleRow {
            id: s.id.clone(),
            values: self.cfg.metrics.iter().map(|&m| (m, None)).collect(),
            errors: BTreeMap::new(),
            failure: None,
        };
        let mut unavailable = BTreeSet::new();
        let edited = match pipeline.edit(&s.image, &s.query) {
            Ok(img) if img.dimensions() == s.image.dimensions() => img,
            Ok(img) => {
                row.failure = Some(format!(
                    "pipeline returned {:?} for a {:?} input",
                    img.dimensions(),
                    s.image.dimensions()
                ));
                return (row, unavailable);
            }
            Err(e) => {
                row.failure = Some(e.to_string());
                return (row, unavailable);
            }
        };
        for &m in &self.cfg.metrics {
            match self.metric(m, s, &edited) {
                Ok(v) => {
                    row.values.insert(m, Some(v));
                }
                Err(e) => {
                    if matches!(e, EvalError::MetricUnavailable(_)) {
                        unavailable.insert(m);
                    }
                    row.errors.insert(m, e.to_string());
                }
            }
        }
        (row, unavailable)
    }
}

/// Edits every sample with `pipeline` on a pool of `cfg.workers` threads and
/// scores the results. Per-sample failures are recorded in the rows; only
/// configuration problems abort the run.
pub fn run_benchmark(
    samples: &[EditSample],
    pipeline: &dyn EditPipeline,
    gw: &Gateway,
    prompts: &PromptSet,
    cfg: &BenchConfig,
) -> Result<MetricReport, EvalError> {
    if cfg.metrics.is_empty() {
        return Err(EvalError::Config("no metrics selected".into()));
    }
    if cfg.metrics.contains(&Metric::Clip) && cfg.clip_variant.is_none() {
        return Err(EvalError::Config(
            "clip metric needs clip_variant = \"image-text\" or \"image-image\"".into(),
        ));
    }
    let mut metrics_sorted = cfg.metrics.clone();
    metrics_sorted.sort();
    metrics_sorted.dedup();
    let cfg = BenchConfig {
        metrics: metrics_sorted,
        ..cfg.clone()
    };
    let ctx = Ctx {
        gw,
        prompts,
        cfg: &cfg,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| EvalError::Io(e.to_string()))?;
    let results: Vec<(SampleRow, BTreeSet<Metric>)> =
        pool.install(|| samples.par_iter().map(|s| ctx.row(s, pipeline)).collect());

    let mut unavailable = BTreeSet::new();
    let mut rows = Vec::with_capacity(results.len());
    for (row, u) in results {
        unavailable.extend(u);
        rows.push(row);
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let aggregates = cfg
        .metrics
        .iter()
        .map(|&m| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.values[&m]).collect();
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            (m, mean)
        })
        .collect();

    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    let metadata = BTreeMap::from([
        ("report_version".to_string(), Canon::Int(REPORT_VERSION)),
        ("pipeline".into(), Canon::str(pipeline.name())),
        ("prompt_version".into(), Canon::str(PROMPT_VERSION)),
        ("metric_region".into(), Canon::str(cfg.region.name())),
        (
            "clip_variant".into(),
            cfg.clip_variant.map_or(Canon::Null, |v| Canon::str(v.name())),
        ),
        ("judge".into(), Canon::str(cfg.judge.clone())),
        ("config_hash".into(), Canon::str(cfg.config_hash.clone())),
        ("timestamp".into(), Canon::str(cfg.timestamp.clone())),
        ("sample_count".into(), Canon::Int(rows.len() as i64)),
        ("failed_samples".into(), Canon::Int(failed as i64)),
        (
            "unavailable_metrics".into(),
            Canon::Array(unavailable.iter().map(|m| Canon::str(m.key())).collect()),
        ),
    ]);
    Ok(MetricReport {
        metrics: cfg.metrics,
        rows,
        aggregates,
        metadata,
    })
}

fn value(m: Metric, v: Option<f64>) -> Canon {
    match (m, v) {
        (_, None) => Canon::Null,
        (Metric::Idcs, Some(v)) if v.fract() == 0.0 => Canon::Int(v as i64),
        (_, Some(v)) => Canon::Fixed(v),
    }
}

impl MetricReport {
    pub fn to_canon(&self) -> Canon {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Canon::object([
                    ("id", Canon::str(r.id.clone())),
                    (
                        "values",
                        Canon::object(r.values.iter().map(|(m, v)| (m.key(), value(*m, *v)))),
                    ),
                    (
                        "errors",
                        Canon::object(r.errors.iter().map(|(m, e)| (m.key(), Canon::str(e.clone())))),
                    ),
                    ("failure", r.failure.clone().map_or(Canon::Null, Canon::Str)),
                ])
            })
            .collect();
        Canon::object([
            (
                "metrics",
                Canon::Array(self.metrics.iter().map(|m| Canon::str(m.key())).collect()),
            ),
            ("samples", Canon::Array(rows)),
            (
                "aggregates",
                Canon::object(self.aggregates.iter().map(|(m, v)| (m.key(), Canon::opt_fixed(*v)))),
            ),
            ("metadata", Canon::Object(self.metadata.clone())),
        ])
    }

    /// Canonical pretty JSON. Identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        self.to_canon().to_pretty()
    }
}

/// Fixed-width text table with one row per sample and a closing mean row.
pub fn render_table(report: &MetricReport) -> String {
    let id_w = report
        .rows
        .iter()
        .map(|r| r.id.len())
        .chain(["sample".len(), "mean".len()])
        .max()
        .unwrap_or(6);
    let cell = |m: Metric, v: Option<f64>| match v {
        None => "-".to_string(),
        Some(v) if m == Metric::Psnr => format!("{v:.3}"),
        Some(v) => format!("{v:.4}"),
    };
    let mut out = String::new();
    let _ = write!(out, "{:<id_w$}", "sample");
    for m in &report.metrics {
        let _ = write!(out, "  {:>8}", m.header());
    }
    out.push('\n');
    let line = |out: &mut String, id: &str, vals: &dyn Fn(Metric) -> Option<f64>| {
        let _ = write!(out, "{id:<id_w$}");
        for &m in &report.metrics {
            let _ = write!(out, "  {:>8}", cell(m, vals(m)));
        }
        out.push('\n');
    };
    for r in &report.rows {
        line(&mut out, &r.id, &|m| r.values[&m]);
    }
    line(&mut out, "mean", &|m| report.aggregates[&m]);
    out
}
