//! The `omnipose` command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use omnipose_core::dataset::Dataset;
use omnipose_core::pipeline::{eval_render, eval_trajectory, run_incremental, PipelineConfig, RunResult};
use omnipose_core::sim::{simulate, DepthRegime, ScenePreset, SimConfig, TrajectoryMode};

use crate::config::{load_config, to_toml};
use crate::dataset::{load_dataset, save_dataset};
use crate::formats::{read_ply, read_tum, write_mask_png, write_ply, write_tum};
use crate::report::{write_frame_errors_csv, write_json, write_log_jsonl, Metrics, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "omnipose", version, about = "Pose estimation and map densification for 360-degree video")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset with ground truth.
    Simulate(SimulateArgs),
    /// Run the incremental pipeline on a dataset.
    Run(RunArgs),
    /// Compare an estimated trajectory with ground truth.
    Eval(EvalArgs),
    /// Novel-view metrics of a map snapshot on held-out frames.
    RenderEval(RenderEvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// room or courtyard
    #[arg(long, default_value = "room")]
    pub preset: ScenePreset,
    #[arg(long)]
    pub frames: usize,
    /// ego (orbit, mostly rotation) or nonego (sweep, large baselines)
    #[arg(long, default_value = "ego")]
    pub trajectory: TrajectoryMode,
    /// Monocular depth error regime: absolute, scale or affine
    #[arg(long, default_value = "absolute")]
    pub corruption: DepthRegime,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Panorama height; width is twice this.
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Matches per frame pair.
    #[arg(long, default_value_t = 400)]
    pub matches: usize,
    /// Fraction of matches replaced by random pixels.
    #[arg(long, default_value_t = 0.1)]
    pub outliers: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write each frame's last consistency masks as PNG.
    #[arg(long)]
    pub dump_masks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-frame error table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderEvalArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Evaluate frames holdout-1, 2*holdout-1, ...; 0 evaluates every frame.
    #[arg(long, default_value_t = 8)]
    pub holdout: usize,
    /// Camera poses; defaults to trajectory.txt next to the map.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Write metrics JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const MAP_FILE: &str = "map.ply";
pub const LOG_FILE: &str = "log.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const FRAME_ERRORS_FILE: &str = "frame_errors.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SIMULATION_FILE: &str = "simulation.toml";

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate_cmd(&a),
        Command::Run(a) => run_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::RenderEval(a) => render_eval_cmd(&a),
    }
}

pub fn simulate_cmd(a: &SimulateArgs) -> anyhow::Result<()> {
    if a.frames == 0 {
        bail!("--frames must be at least 1");
    }
    let mut sc = SimConfig::new(a.preset, a.trajectory, a.corruption, a.frames, a.seed);
    sc.height = a.height;
    sc.matches.count = a.matches;
    sc.matches.outlier_fraction = a.outliers;
    let ds = simulate(&sc)?;
    save_dataset(&a.out, &ds)?;
    let path = a.out.join(SIMULATION_FILE);
    fs::write(&path, toml::to_string(&sc)?).with_context(|| path.display().to_string())?;
    info!("wrote {} frames to {}", ds.len(), a.out.display());
    Ok(())
}

/// Trajectory and held-out render metrics of a finished run.
pub fn run_metrics(
    ds: &Dataset,
    cfg: &PipelineConfig,
    r: &RunResult,
) -> anyhow::Result<(Metrics, Option<Vec<omnipose_core::pipeline::FrameErrors>>)> {
    let held_out = cfg.held_out_frames(ds.len());
    let (trajectory, rows) = match &ds.gt_poses {
        Some(gt) => {
            let (m, rows) = eval_trajectory(&r.poses, gt)?;
            (Some(m), Some(rows))
        }
        None => (None, None),
    };
    let render = if held_out.is_empty() {
        None
    } else {
        let images: Vec<_> = ds.frames.iter().map(|f| &f.color).collect();
        let m = eval_render(&r.map, &r.poses, &images, &held_out)?;
        for f in &m.skipped {
            warn!("held-out frame {f} has no rendered pixel; skipped");
        }
        Some(m)
    };
    let metrics = Metrics {
        frames: ds.len(),
        run: Some(RunSummary {
            flagged: r.states.iter().filter(|s| s.flagged).map(|s| s.index).collect(),
            failed: r.failed,
            map_size: r.map.len(),
            held_out,
        }),
        trajectory,
        render,
    };
    Ok((metrics, rows))
}

/// Runs the pipeline and writes every output file into `out`.
pub fn run_to_dir(ds: &Dataset, cfg: &PipelineConfig, out: &Path, dump_masks: Option<&Path>) -> anyhow::Result<Metrics> {
    let r = run_incremental(ds, cfg)?;
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    write_tum(&out.join(TRAJECTORY_FILE), &r.poses)?;
    write_ply(&out.join(MAP_FILE), &r.map)?;
    write_log_jsonl(&out.join(LOG_FILE), &r.log)?;
    let cfg_path = out.join(CONFIG_FILE);
    fs::write(&cfg_path, to_toml(cfg)).with_context(|| cfg_path.display().to_string())?;
    let (metrics, rows) = run_metrics(ds, cfg, &r)?;
    write_json(&out.join(METRICS_FILE), &metrics)?;
    if let Some(rows) = rows {
        write_frame_errors_csv(&out.join(FRAME_ERRORS_FILE), &rows)?;
    }
    if let Some(dir) = dump_masks {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        for s in &r.states {
            let masks = [
                ("m_con", &s.m_con),
                ("m_inc", &s.m_inc),
                ("m_adj", &s.m_adj),
                ("m_inlier", &s.m_inlier),
            ];
            for (name, m) in masks {
                if let Some(m) = m {
                    write_mask_png(&dir.join(format!("{:05}.{name}.png", s.index)), m)?;
                }
            }
        }
    }
    if r.failed {
        warn!(
            "{} of {} frames were extrapolated; run marked failed",
            metrics.run.as_ref().map_or(0, |s| s.flagged.len()),
            ds.len()
        );
    }
    Ok(metrics)
}

pub fn run_cmd(a: &RunArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => PipelineConfig::default(),
    };
    let m = run_to_dir(&ds, &cfg, &a.out, a.dump_masks.as_deref())?;
    if let Some(t) = &m.trajectory {
        info!("ATE {:.6}, scale {:.4}", t.ate_rmse, t.alignment_scale);
    }
    if let Some(r) = &m.render {
        info!(
            "held-out PSNR {:.2} dB, SSIM {:.4}, invalid {:.4}",
            r.psnr, r.ssim, r.invalid_fraction
        );
    }
    if m.run.as_ref().is_some_and(|s| s.failed) {
        bail!("too many frames failed to track");
    }
    Ok(())
}

pub fn eval_cmd(a: &EvalArgs) -> anyhow::Result<()> {
    let est = read_tum(&a.est)?;
    let gt = read_tum(&a.gt)?;
    let (m, rows) = eval_trajectory(&est.poses, &gt.poses)?;
    let metrics = Metrics {
        frames: est.poses.len(),
        run: None,
        trajectory: Some(m),
        render: None,
    };
    write_json(&a.out, &metrics)?;
    if let Some(csv) = &a.csv {
        write_frame_errors_csv(csv, &rows)?;
    }
    Ok(())
}

pub fn render_eval_cmd(a: &RenderEvalArgs) -> anyhow::Result<()> {
    let map = read_ply(&a.map)?;
    let ds = load_dataset(&a.dataset)?;
    let traj_path = match &a.trajectory {
        Some(p) => p.clone(),
        None => a.map.parent().unwrap_or(Path::new(".")).join(TRAJECTORY_FILE),
    };
    let poses = read_tum(&traj_path)?.poses;
    if poses.len() != ds.len() {
        bail!("{}: {} poses for {} frames", traj_path.display(), poses.len(), ds.len());
    }
    let cfg = PipelineConfig {
        holdout: a.holdout,
        ..PipelineConfig::default()
    };
    let frames = if a.holdout == 0 {
        (0..ds.len()).collect()
    } else {
        cfg.held_out_frames(ds.len())
    };
    if frames.is_empty() {
        bail!("no frame is held out with --holdout {} and {} frames", a.holdout, ds.len());
    }
    let images: Vec<_> = ds.frames.iter().map(|f| &f.color).collect();
    let render = eval_render(&map, &poses, &images, &frames)?;
    for f in &render.skipped {
        warn!("frame {f} has no rendered pixel; skipped");
    }
    let metrics = Metrics {
        frames: ds.len(),
        run: None,
        trajectory: None,
        render: Some(render),
    };
    match &a.out {
        Some(p) => write_json(p, &metrics)?,
        None => print!("{}", crate::report::to_json(&metrics)),
    }
    Ok(())
}
