use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iap_core::config::PipelineConfig;
use iap_core::pipeline::{self, ClassifyOptions, FeatureSet};
use iap_core::{IapError, Result};

/// Invariant attribute profiles for hyperspectral image classification.
#[derive(Parser, Debug)]
#[command(name = "iap", version)]
struct Cli {
    /// Worker threads (defaults to the config value, then to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log per-stage timings.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Evaluate a single ablation row: osf, sif, fif or nodr.
    #[arg(long, value_parser = parse_ablation)]
    ablate: Option<FeatureSet>,
    /// Accept features that are not at the REDUCED stage.
    #[arg(long)]
    raw: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract OSF, SIF, FIF, stacked and reduced feature matrices.
    Extract(RunArgs),
    /// Classify previously extracted features with NN and RF.
    Classify {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Feature matrix stem to classify instead of `<out>/features/...`.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Render a label raster as a color PNG.
    Render {
        /// Label raster header.
        header: PathBuf,
        /// Label raster payload.
        raw: PathBuf,
        /// Output image.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Classify over a grid of extraction parameters (`[sweep]` section).
    Sweep(RunArgs),
    /// Write the configured synthetic scene to disk.
    Synth(RunArgs),
    /// Extract, classify and render in one run.
    Pipeline {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

fn parse_ablation(s: &str) -> std::result::Result<FeatureSet, String> {
    match s {
        "osf" | "sif" | "fif" | "nodr" => s.parse().map_err(|e: IapError| e.to_string()),
        _ => Err(format!("expected one of osf, sif, fif, nodr; got `{s}`")),
    }
}

fn load(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.run.out = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn set_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(IapError::Config {
                line: None,
                message: "--threads must be >= 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| IapError::Numeric(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn report(eval: &pipeline::Evaluation) {
    println!(
        "NN  OA {:.4}  AA {:.4}  kappa {:.4}",
        eval.nn.oa, eval.nn.aa, eval.nn.kappa
    );
    println!(
        "RF  OA {:.4}  AA {:.4}  kappa {:.4}",
        eval.rf.oa, eval.rf.aa, eval.rf.kappa
    );
}

fn run(cli: Cli) -> Result<()> {
    let threads_from = |cfg: &PipelineConfig| cli.threads.or(cfg.run.threads);
    match cli.command {
        Command::Extract(args) => {
            let cfg = load(&args)?;
            set_threads(threads_from(&cfg))?;
            let f = pipeline::cmd_extract(&cfg)?;
            println!(
                "widths: OSF {} SIF {} FIF {} IAP {} REDUCED {}",
                f.blocks.osf.cols(),
                f.blocks.sif.cols(),
                f.blocks.fif.cols(),
                f.iap.cols(),
                f.reduced.cols()
            );
        }
        Command::Classify { run, eval, features } => {
            let cfg = load(&run)?;
            set_threads(threads_from(&cfg))?;
            let opts = ClassifyOptions {
                ablate: eval.ablate,
                raw: eval.raw,
                features,
            };
            report(&pipeline::cmd_classify(&cfg, &opts)?);
        }
        Command::Render { header, raw, output } => pipeline::cmd_render(&header, &raw, &output)?,
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            set_threads(threads_from(&cfg))?;
            let grid = cfg.sweep.clone().ok_or_else(|| IapError::Config {
                line: None,
                message: "sweep needs a [sweep] section".into(),
            })?;
            let cells = pipeline::cmd_sweep(&cfg, &grid)?;
            print!("{}", pipeline::render_sweep(&cells));
        }
        Command::Synth(args) => {
            let cfg = load(&args)?;
            pipeline::cmd_synth(&cfg)?;
        }
        Command::Pipeline { run, eval } => {
            let cfg = load(&run)?;
            set_threads(threads_from(&cfg))?;
            let opts = ClassifyOptions {
                ablate: eval.ablate,
                raw: eval.raw,
                features: None,
            };
            report(&pipeline::cmd_pipeline(&cfg, &opts)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
