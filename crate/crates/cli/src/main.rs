//! `reasonedit`: reasoning-based image editing from the command line.

mod error;
mod run_config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reasonedit_core::eval::{self, BenchConfig, Metric};
use reasonedit_core::exec::save_intermediates;
use reasonedit_core::gateway::{conformance, Gateway};
use reasonedit_core::pipeline::{EditPipeline, IdentityPipeline, ReasoningPipeline};
use reasonedit_core::raster;
use reasonedit_core::reasoning::{render_plan, ChainConfig, PromptSet, Trace};
use reasonedit_core::ssr::{build_ssr, export_mask_pngs, ssr_parse, ssr_serialize, SceneRep};

use error::CliError;
use run_config::{parse_clip_variant, parse_region, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "reasonedit", version, about = "Reasoning-based image editing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Edit an image according to a natural-language request.
    Edit {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        query: String,
        /// Edited image (PNG). Required unless --dry-run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace file (JSON lines). Defaults to <out>.trace.jsonl, or
        /// <output_dir>/trace.jsonl for a dry run without --out.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write per-step inputs, masks and outputs under <output_dir>/intermediates.
        #[arg(long)]
        save_intermediates: bool,
        /// Stop after planning and print the plan.
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        common: Overrides,
    },
    /// Build or inspect a scene representation.
    Ssr {
        #[command(subcommand)]
        action: SsrAction,
    },
    /// Score a pipeline on a benchmark dataset.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated: psnr,ssim,lpips,idcs,clip,clip_i,dino,l1,l2
        #[arg(long, default_value = "psnr,ssim")]
        metrics: String,
        /// Report JSON; the text table goes next to it with a .txt extension.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// full or outside-mask
        #[arg(long)]
        metric_region: Option<String>,
        /// image-text or image-image; required for the clip metric.
        #[arg(long)]
        clip_variant: Option<String>,
        /// reasoning or identity
        #[arg(long, default_value = "reasoning")]
        pipeline: String,
        #[command(flatten)]
        common: Overrides,
    },
    /// Run the protocol conformance checks against the configured backends.
    Conformance {
        #[command(flatten)]
        common: Overrides,
    },
}

#[derive(Subcommand)]
enum SsrAction {
    /// Print the canonical scene JSON.
    Build {
        #[arg(long)]
        image: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one mask PNG per object into this directory.
        #[arg(long)]
        masks_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Overrides,
    },
    /// Print an object table.
    Show {
        #[arg(long, conflicts_with = "ssr", required_unless_present = "ssr")]
        image: Option<PathBuf>,
        /// Read a scene JSON file instead of building one.
        #[arg(long)]
        ssr: Option<PathBuf>,
        #[command(flatten)]
        common: Overrides,
    },
}

fn env(key: &str) -> Option<String> {
    std::env::var(key).ok()
}

struct Setup {
    run: RunConfig,
    gateway: Gateway,
    prompts: PromptSet,
}

fn setup(common: &Overrides) -> Result<Setup, CliError> {
    let run = RunConfig::resolve(common, &env)?;
    let gateway = run.backend_config(&env)?.connect()?;
    let prompts = match &run.prompts_dir {
        Some(d) => PromptSet::from_dir(&run.base_dir.join(d))?,
        None => PromptSet::builtin(),
    };
    Ok(Setup { run, gateway, prompts })
}

fn pipeline(s: &Setup) -> ReasoningPipeline {
    ReasoningPipeline {
        prompts: s.prompts.clone(),
        chain: ChainConfig {
            cap: s.run.cap,
            tau: s.run.tau,
            ..ChainConfig::default()
        },
        dilation: s.run.dilation,
        rebuild_between_steps: s.run.rebuild_between_steps,
        ..ReasoningPipeline::new(s.gateway.clone())
    }
}

fn load_image(path: &Path) -> Result<image::RgbImage, CliError> {
    raster::load_rgb(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn default_trace_path(out: Option<&Path>, run: &RunConfig) -> PathBuf {
    match out {
        Some(o) => o.with_extension("trace.jsonl"),
        None => run.output_dir.join("trace.jsonl"),
    }
}

fn cmd_edit(
    image: &Path,
    query: &str,
    out: Option<&Path>,
    trace: Option<&Path>,
    save: bool,
    dry_run: bool,
    common: &Overrides,
) -> Result<(), CliError> {
    if out.is_none() && !dry_run {
        return Err(CliError::config("--out is required unless --dry-run is given"));
    }
    let s = setup(common)?;
    let img = load_image(image)?;
    let trace_path = trace.map_or_else(|| default_trace_path(out, &s.run), Path::to_path_buf);
    let p = pipeline(&s);
    let write_trace = |t: &Trace| write_file(&trace_path, t.to_jsonl().as_bytes());

    let outcome = if dry_run {
        p.plan(&img, query).map(|plan| (plan, None)).map_err(CliError::from)
    } else {
        p.run(&img, query)
            .map(|o| (o.plan, Some(o.result)))
            .map_err(CliError::from)
    };
    let (plan, result) = match outcome {
        Ok(v) => v,
        Err(e) => {
            if let Some(t) = &e.trace {
                write_trace(t)?;
            }
            return Err(e);
        }
    };
    write_trace(&plan.trace)?;
    if dry_run {
        print!("{}", render_plan(&plan));
    }
    if let (Some(r), Some(out)) = (result, out) {
        write_file(out, &raster::encode_png(&r.final_image))?;
        if save {
            let dir = s.run.output_dir.join("intermediates");
            save_intermediates(&r.intermediates, &plan.steps, &dir)
                .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        }
    }
    Ok(())
}

fn scene_for(image: &Path, s: &Setup) -> Result<SceneRep, CliError> {
    let img = load_image(image)?;
    build_ssr(&img, &s.gateway, s.run.tau).map_err(CliError::from)
}

fn cmd_ssr(action: &SsrAction) -> Result<(), CliError> {
    match action {
        SsrAction::Build {
            image,
            out,
            masks_dir,
            common,
        } => {
            let s = setup(common)?;
            let scene = scene_for(image, &s)?;
            let json = ssr_serialize(&scene);
            match out {
                Some(p) => write_file(p, json.as_bytes())?,
                None => print!("{json}"),
            }
            if let Some(dir) = masks_dir {
                export_mask_pngs(&scene, dir)
                    .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
            }
        }
        SsrAction::Show { image, ssr, common } => {
            let scene = match (image, ssr) {
                (_, Some(p)) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
                    ssr_parse(&text).map_err(|e| CliError::new("E_SSR", 1, format!("{}: {e}", p.display())))?
                }
                (Some(img), None) => scene_for(img, &setup(common)?)?,
                (None, None) => return Err(CliError::config("give --image or --ssr")),
            };
            print!("{}", object_table(&scene));
        }
    }
    Ok(())
}

fn object_table(scene: &SceneRep) -> String {
    let mut out = format!(
        "{:>4}  {:<20}  {:>8}  {:>8}  bbox\n",
        "id", "label", "depth", "area"
    );
    for o in scene.objects() {
        let depth = o.depth.map_or("-".to_string(), |d| format!("{d:.6}"));
        let bbox = o.mask.bbox().map_or("-".to_string(), |b| {
            format!("{},{},{},{}", b.x_min, b.y_min, b.x_max, b.y_max)
        });
        let _ = writeln!(
            out,
            "{:>4}  {:<20}  {:>8}  {:>8}  {}",
            o.id,
            o.label_str(),
            depth,
            o.mask.area(),
            bbox
        );
    }
    let _ = writeln!(out, "{} objects, revision {}", scene.len(), scene.revision());
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    dataset: &Path,
    metrics: &str,
    report: Option<&Path>,
    workers: Option<usize>,
    metric_region: Option<&str>,
    clip_variant: Option<&str>,
    pipeline_name: &str,
    common: &Overrides,
) -> Result<(), CliError> {
    let s = setup(common)?;
    let metrics = Metric::parse_list(metrics).map_err(CliError::config)?;
    let region = match metric_region {
        Some(r) => parse_region(r)?,
        None => s.run.metric_region,
    };
    let clip_variant = match clip_variant {
        Some(v) => Some(parse_clip_variant(v)?),
        None => s.run.clip_variant,
    };
    let workers = workers.unwrap_or(s.run.workers);
    if workers == 0 || workers > run_config::MAX_WORKERS {
        return Err(CliError::config(format!(
            "invalid value for `workers`: must lie in 1..={}",
            run_config::MAX_WORKERS
        )));
    }
    let reasoning;
    let pipe: &dyn EditPipeline = match pipeline_name {
        "identity" => &IdentityPipeline,
        "reasoning" => {
            reasoning = pipeline(&s);
            &reasoning
        }
        other => {
            return Err(CliError::config(format!(
                "unknown pipeline `{other}` (expected reasoning or identity)"
            )))
        }
    };
    let samples = eval::load_dataset(dataset)?;
    let cfg = BenchConfig {
        metrics,
        region,
        clip_variant,
        workers,
        judge: s.run.judge.clone(),
        config_hash: s.run.config_hash(),
        timestamp: s.run.report_timestamp(&env)?,
    };
    let rep = eval::run_benchmark(&samples, pipe, &s.gateway, &s.prompts, &cfg)?;
    let table = eval::render_table(&rep);
    let report_path = report.map_or_else(|| s.run.output_dir.join("report.json"), Path::to_path_buf);
    write_file(&report_path, rep.to_json().as_bytes())?;
    write_file(&report_path.with_extension("txt"), table.as_bytes())?;
    print!("{table}");
    for row in rep.rows.iter().filter(|r| r.failure.is_some()) {
        eprintln!("warning: sample `{}` failed: {}", row.id, row.failure.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn cmd_conformance(common: &Overrides) -> Result<(), CliError> {
    let s = setup(common)?;
    let report = conformance::run(&s.gateway);
    for c in &report.checks {
        println!("{c}");
    }
    let failed = report.count(|o| matches!(o, conformance::Outcome::Fail(_)));
    let skipped = report.count(|o| matches!(o, conformance::Outcome::Skipped(_)));
    println!(
        "{} checks: {} failed, {} skipped",
        report.checks.len(),
        failed,
        skipped
    );
    if failed > 0 {
        return Err(CliError::new(
            "E_CONFORMANCE",
            3,
            format!("{failed} conformance checks failed"),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Edit {
            image,
            query,
            out,
            trace,
            save_intermediates,
            dry_run,
            common,
        } => cmd_edit(
            image,
            query,
            out.as_deref(),
            trace.as_deref(),
            *save_intermediates,
            *dry_run,
            common,
        ),
        Command::Ssr { action } => cmd_ssr(action),
        Command::Bench {
            dataset,
            metrics,
            report,
            workers,
            metric_region,
            clip_variant,
            pipeline,
            common,
        } => cmd_bench(
            dataset,
            metrics,
            report.as_deref(),
            *workers,
            metric_region.as_deref(),
            clip_variant.as_deref(),
            pipeline,
            common,
        ),
        Command::Conformance { common } => cmd_conformance(common),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
