use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use masklift::cli::{cmd_associate, cmd_baseline, cmd_evaluate, cmd_synth, RunConfig};
use masklift::error::Result;

/// Cross-view building instance association over a sparse 3D reconstruction.
///
/// Log verbosity is read from RUST_LOG (default: warn).
#[derive(Parser)]
#[command(name = "masklift", version)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Overrides {
    /// TOML file with run parameters; flags take precedence.
    #[arg(long, global = true, env = "MASKLIFT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    tau_j: Option<f64>,
    #[arg(long, global = true)]
    tau_m: Option<f64>,
    #[arg(long, global = true)]
    n_min: Option<usize>,
    #[arg(long, global = true)]
    min_score: Option<f64>,
    /// Keep only masks with this class label.
    #[arg(long, global = true)]
    label: Option<String>,
    #[arg(long, global = true)]
    tau_iou: Option<f64>,
    #[arg(long, global = true)]
    tau_eval: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// instance-palette, original-rgb or single-instance:<id>
    #[arg(long, global = true)]
    color_mode: Option<String>,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Group masks into instances and label 3D points.
    Associate {
        /// Directory with images.txt and points3D.txt.
        model: PathBuf,
        detections: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Frame-to-frame IoU tracker over an ordered frame list.
    Baseline {
        detections: PathBuf,
        /// One image name per line, blank line between sequences.
        frame_order: PathBuf,
        #[arg(short, long, default_value = "out-baseline")]
        out: PathBuf,
    },
    /// Coverage and adjusted coverage against ground-truth boxes.
    Evaluate {
        predictions: PathBuf,
        detections: PathBuf,
        gt: PathBuf,
        /// Also write report.json and report.csv here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic street scene with ground truth.
    Synth {
        /// Scene spec TOML; defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long, default_value = "scene")]
        out: PathBuf,
    },
}

impl Overrides {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        take!(tau_j => tau_j, tau_m => tau_m, n_min => n_min, min_score => min_score,
              tau_iou => tau_iou, tau_eval => tau_eval, color_mode => color_mode);
        if self.label.is_some() {
            cfg.label = self.label.clone();
        }
        if self.seed.is_some() {
            cfg.rng_seed = self.seed;
        }
        Ok(cfg)
    }
}

fn emit<T: Serialize + std::fmt::Display>(value: &T, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("summary serialize"));
    } else {
        println!("{value}");
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.opts.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| masklift::error::Error::Config(e.to_string()))?;
    }
    let cfg = cli.opts.config()?;
    for w in cfg.range_warnings() {
        log::warn!("{w}");
    }
    let json = cli.opts.json;
    match cli.cmd {
        Command::Associate { model, detections, out } => emit(&cmd_associate(&model, &detections, &out, &cfg)?, json),
        Command::Baseline { detections, frame_order, out } => {
            emit(&cmd_baseline(&detections, &frame_order, &out, &cfg)?, json)
        }
        Command::Evaluate { predictions, detections, gt, out } => {
            let report = cmd_evaluate(&predictions, &detections, &gt, out.as_deref(), &cfg)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::Synth { spec, out } => emit(&cmd_synth(spec.as_deref(), &out, &cfg)?, json),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
