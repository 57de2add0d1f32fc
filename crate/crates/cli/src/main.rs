use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use decisionflow_cli::*;
use decisionflow_core::FilterPolicy;
use decisionflow_pipeline::{DatasetKind, Mode};

#[derive(Parser)]
#[command(name = "decisionflow", version, about = "Structured decision runs over MTA- and DeLLMa-style datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every problem of the dataset in one mode.
    Run(ConfigArgs),
    /// Score a prediction file.
    Eval(EvalArgs),
    /// Re-solve recorded runs under a list of filter settings.
    Sweep(SweepArgs),
    /// Check that a transcript corpus covers every run of a config.
    ReplayVerify(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    dataset_kind: Option<DatasetKind>,
    #[arg(long)]
    mode: Option<Mode>,
    /// live_record or replay.
    #[arg(long)]
    transcript_mode: Option<TranscriptModeArg>,
    #[arg(long)]
    transcript_dir: Option<PathBuf>,
    /// Output directory; defaults to runs/<label>-<unix time>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    info_model: Option<String>,
    #[arg(long)]
    reasoning_model: Option<String>,
    /// Threshold filter; conflicts with --filter-top-k.
    #[arg(long, conflicts_with = "filter_top_k")]
    epsilon: Option<f64>,
    #[arg(long)]
    filter_top_k: Option<usize>,
    #[arg(long)]
    max_concurrency: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<CliConfig, CliError> {
        let filter_policy = match (self.epsilon, self.filter_top_k) {
            (Some(e), _) => Some(FilterPolicy::threshold(e).map_err(|e| CliError::Usage(e.to_string()))?),
            (_, Some(k)) => Some(FilterPolicy::top_k(k).map_err(|e| CliError::Usage(e.to_string()))?),
            _ => None,
        };
        let o = Overrides {
            dataset: self.dataset.clone(),
            dataset_kind: self.dataset_kind,
            mode: self.mode,
            transcript_mode: self.transcript_mode,
            transcript_dir: self.transcript_dir.clone(),
            output_dir: self.out.clone(),
            repeats: self.repeats,
            seed: self.seed,
            info_model: self.info_model.clone(),
            reasoning_model: self.reasoning_model.clone(),
            filter_policy,
            max_concurrency: self.max_concurrency,
        };
        CliConfig::load(&self.config, &o)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dataset_kind: DatasetKind,
    /// runs.jsonl for token and latency means.
    #[arg(long)]
    runs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated thresholds, e.g. 0,0.1,0.3,0.5,0.7.
    #[arg(long, conflicts_with = "top_k", required_unless_present = "top_k")]
    epsilons: Option<String>,
    /// Comma-separated k values; `none` disables filtering.
    #[arg(long)]
    top_k: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Fatal as u8 } else { 0 });
        }
    };
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = Arc::clone(&cancel);
        let _ = ctrlc::set_handler(move || {
            if cancel.swap(true, Ordering::SeqCst) {
                std::process::exit(Exit::Fatal as i32);
            }
            eprintln!("interrupted: finishing in-flight runs (press again to abort)");
        });
    }
    match dispatch(cli.command, &cancel) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Exit::Fatal as u8)
        }
    }
}

fn dispatch(command: Command, cancel: &AtomicBool) -> Result<Exit, CliError> {
    match command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let out = execute_run(&cfg, cancel)?;
            let m = &out.manifest;
            eprintln!(
                "{} runs: {} answered, {} abstained; {} requests, {} network calls -> {}",
                m.runs_completed,
                m.answered,
                m.abstained,
                m.gateway.requests,
                m.gateway.network_calls,
                out.out_dir.display()
            );
            if let Some(f) = &m.fatal {
                eprintln!("fatal: {f}");
            }
            if m.interrupted {
                eprintln!("interrupted after {} of {} runs", m.runs_completed, m.runs_planned);
            }
            Ok(out.exit)
        }
        Command::Eval(args) => {
            let report = execute_eval(&args.predictions, &args.dataset, args.dataset_kind, args.runs.as_deref(), &args.out)?;
            print!("{}", report.to_markdown());
            Ok(Exit::Ok)
        }
        Command::Sweep(args) => {
            let cfg = args.config.load()?;
            let (parameter, policies) = match (&args.epsilons, &args.top_k) {
                (Some(list), _) => ("epsilon", parse_epsilons(list).map_err(CliError::Usage)?),
                (_, Some(list)) => ("top_k", parse_top_k(list).map_err(CliError::Usage)?),
                _ => return Err(CliError::Usage("give --epsilons or --top-k".into())),
            };
            let out = execute_sweep(&cfg, parameter, &policies, cancel)?;
            print!("{}", out.summary.to_markdown());
            eprintln!(
                "reference runs: {} requests, {} network calls; settings added {} requests -> {}",
                out.manifest.reference.requests,
                out.manifest.reference.network_calls,
                out.manifest.total.requests - out.manifest.reference.requests,
                out.out_dir.display()
            );
            if let Some(f) = &out.manifest.fatal {
                eprintln!("fatal: {f}");
            }
            Ok(out.exit)
        }
        Command::ReplayVerify(args) => {
            let cfg = args.load()?;
            let report = execute_verify(&cfg, cancel)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(if report.complete() { Exit::Ok } else { Exit::Fatal })
        }
    }
}
