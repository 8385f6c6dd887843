//! Command-line front end for the EEG emotion classification pipeline.
//!
//! Every failure is reported as a single `error: ...` line on stderr
//! with exit code 1, so wrapper scripts can parse it.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emowave::pipeline::config::{DataConfig, EvalConfig, RecordingEntry};
use emowave::pipeline::{
    self, load_config, render_plot, run, stage_evaluate, stage_features, stage_plot,
    stage_train_knn, stage_train_rnn, EvalOutcome, OutputContext, PipelineConfig, PipelineError,
    Protocol,
};
use emowave::signal_io::Channel;
use emowave::synth;

/// Output directory override honoured by every config-driven command.
const OUTPUT_DIR_ENV: &str = "EMOWAVE_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "emowave",
    version,
    about = "EEG emotion classification: wavelet features, kNN and recurrent-network classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and EMOWAVE_OUTPUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Plot the comparison table from this config's output directory.
    #[arg(long, conflicts_with = "input")]
    config: Option<PathBuf>,
    /// Plot an arbitrary comparison CSV instead (no hash check).
    #[arg(long, requires = "output")]
    input: Option<PathBuf>,
    /// SVG path for --input mode.
    #[arg(long, requires = "input")]
    output: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for the generated CSV files and run.toml.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recording length in seconds.
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    /// Sessions per emotion label.
    #[arg(long, default_value_t = 3)]
    sessions: u32,
    /// Gaussian noise level added to every sample.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all artifacts.
    Run(ConfigArgs),
    /// Extract features and write features.csv.
    Features(ConfigArgs),
    /// Pick k by cross-validation and write knn_model.json.
    TrainKnn(ConfigArgs),
    /// Train the recurrent classifier and write rnn_model.json.
    TrainRnn(ConfigArgs),
    /// Score both classifiers and write the reports.
    Evaluate(ConfigArgs),
    /// Render the comparison chart to SVG.
    Plot(PlotArgs),
    /// Generate a synthetic dataset plus a ready-to-run config.
    Synth(SynthArgs),
}

fn resolve(args: &ConfigArgs) -> Result<(PipelineConfig, OutputContext), PipelineError> {
    let mut cfg = load_config(&args.config)?;
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.eval.output_dir = PathBuf::from(dir);
        }
    }
    if let Some(out) = &args.out {
        cfg.eval.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.eval.seed = seed;
    }
    let ctx = OutputContext::new(&cfg.eval.output_dir)?;
    Ok((cfg, ctx))
}

fn print_outcome(outcome: &EvalOutcome) {
    println!("kNN");
    if let Some(k) = outcome.knn.chosen_k {
        println!("chosen k: {k}");
    }
    if let Some(ks) = &outcome.knn.fold_chosen_ks {
        let list: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
        println!("chosen k per fold: {}", list.join(", "));
    }
    if let Some(subjects) = &outcome.knn.subject_chosen_ks {
        for s in subjects {
            println!("chosen k for {}: {}", s.subject, s.chosen_k);
        }
    }
    println!("{}", outcome.knn.report);
    println!();
    println!("RNN");
    println!("{}", outcome.rnn.report);
}

fn synth_command(args: &SynthArgs) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&args.out).map_err(|source| PipelineError::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    let synth_cfg = synth::SynthConfig {
        seconds_per_recording: args.seconds,
        sampling_rate_hz: 256.0,
        sessions_per_label: args.sessions,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    let files = synth::write_dataset(&synth_cfg, &args.out)?;

    // Bare file names: recording paths resolve relative to the config.
    let recordings = files
        .iter()
        .map(|f| RecordingEntry {
            path: PathBuf::from(f.path.file_name().expect("generated name")),
            label: Some(f.label.name().to_string()),
            session: f.session,
            subject: None,
        })
        .collect();
    let cfg = PipelineConfig {
        data: DataConfig {
            recordings,
            channels: Channel::ALL.iter().map(|c| c.name().to_string()).collect(),
            sampling_rate_hz: 256.0,
            timestamp_column: Some("timestamp".into()),
            label_column: Some("label".into()),
            window_length: 256,
            overlap: 0.0,
        },
        dwt: Default::default(),
        features: Default::default(),
        knn: Default::default(),
        rnn: Default::default(),
        eval: EvalConfig {
            protocol: Protocol::Session,
            seed: args.seed,
            output_dir: PathBuf::from("out"),
        },
    };
    let config_path = args.out.join("run.toml");
    std::fs::write(&config_path, pipeline::config::render_config_toml(&cfg)).map_err(
        |source| PipelineError::Io {
            path: config_path.display().to_string(),
            source,
        },
    )?;
    println!(
        "wrote {} recordings and run.toml to {}",
        files.len(),
        args.out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, ctx) = resolve(&args)?;
            let summary = run(&cfg, &ctx)?;
            print_outcome(&summary.outcome);
            println!();
            println!("artifacts in {}", ctx.out_dir().display());
        }
        Command::Features(args) => {
            let (cfg, ctx) = resolve(&args)?;
            let path = stage_features(&cfg, &ctx)?;
            println!("wrote {}", path.display());
        }
        Command::TrainKnn(args) => {
            let (cfg, ctx) = resolve(&args)?;
            let path = stage_train_knn(&cfg, &ctx)?;
            println!("wrote {}", path.display());
        }
        Command::TrainRnn(args) => {
            let (cfg, ctx) = resolve(&args)?;
            let path = stage_train_rnn(&cfg, &ctx)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate(args) => {
            let (cfg, ctx) = resolve(&args)?;
            let outcome = stage_evaluate(&cfg, &ctx)?;
            print_outcome(&outcome);
        }
        Command::Plot(args) => match (&args.input, &args.output, &args.config) {
            (Some(input), Some(output), None) => {
                render_plot(input, output)?;
                println!("wrote {}", output.display());
            }
            (None, None, Some(config)) => {
                let (cfg, ctx) = resolve(&ConfigArgs {
                    config: config.clone(),
                    out: args.out,
                    seed: args.seed,
                })?;
                let path = stage_plot(&cfg, &ctx)?;
                println!("wrote {}", path.display());
            }
            _ => {
                return Err(PipelineError::Config(
                    "plot needs either --config or --input with --output".into(),
                ))
            }
        },
        Command::Synth(args) => synth_command(&args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
