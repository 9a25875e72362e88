//! Metrics, benchmark datasets and reports.

mod bench;
mod dataset;
mod delegated;
mod idcs;
mod metrics;
mod ssim;

use crate::gateway::GatewayError;

pub use bench::{
    render_table, run_benchmark, BenchConfig, ClipVariant, Metric, MetricReport, RegionMode,
    SampleRow, REPORT_VERSION,
};
pub use dataset::{load_dataset, EditSample, MANIFEST_FILE};
pub use delegated::{clip_image_text, cosine, delegated_similarity, lpips};
pub use idcs::{idcs, DiffReport};
pub use metrics::{l1, l2, psnr, PSNR_CAP};
pub use ssim::{ssim, C1, C2, SSIM_SIGMA, SSIM_WINDOW};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("evaluation region is empty")]
    EmptyRegion,
    #[error("metric {0} is unavailable: no backend configured")]
    MetricUnavailable(String),
    #[error("sample `{sample}`: {detail}")]
    Dataset { sample: String, detail: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Io(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("prompt error: {0}")]
    Prompt(String),
}
