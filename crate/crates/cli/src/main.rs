//! `freqtag` command-line interface.
//!
//! Failures print one JSON line `{"error":{"kind":..,"message":..}}` on
//! stderr and exit with status 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freqtag::pipeline::{
    inspect_model, run_analyze, run_prune, run_report, AnalyzeOptions, ImageSelection, PruneOptions, RunConfig,
    RunManifest,
};
use freqtag::tinynet::ReductionMode;
use freqtag::Error;

#[derive(Parser)]
#[command(name = "freqtag", version, about = "Frequency-tagging analysis of CNN filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tag images, record filter traces, and write spectra, SNR tables and the importance report.
    Analyze(AnalyzeArgs),
    /// Recompute SNR tables and the importance report, reusing cached traces.
    Report(AnalyzeArgs),
    /// Mask unimportant filters and compare accuracy against the original model.
    Prune(PruneArgs),
    /// Print the model's nodes, shapes and taps as JSON.
    InspectModel(ModelArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_name = "PATH")]
    model_graph: PathBuf,
    #[arg(long, value_name = "PATH")]
    weights: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// CIFAR-10 binary batch file.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// `all`, a count, or a comma-separated id list (`7,` for a single id).
    #[arg(long, value_name = "SPEC")]
    images: Option<ImageSelection>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides `analysis.reduction` from the config.
    #[arg(long, value_name = "MODE")]
    reduction: Option<ReductionMode>,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Seed for image sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace cache directory [default: <out>/cache].
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    /// `report.json` from an analyze or report run.
    #[arg(long, value_name = "PATH")]
    report: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Evaluation images [default: all].
    #[arg(long, value_name = "SPEC")]
    images: Option<ImageSelection>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn analyze_options(args: AnalyzeArgs) -> freqtag::Result<AnalyzeOptions> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(mode) = args.reduction {
        config.analysis.reduction = mode;
    }
    Ok(AnalyzeOptions {
        config,
        graph: args.model.model_graph,
        weights: args.model.weights,
        data: args.data,
        images: args.images,
        seed: args.seed,
        out: args.out,
        cache: args.cache,
        threads: args.threads,
    })
}

fn finished(manifest: &RunManifest, out: &std::path::Path) {
    println!(
        "{}: {} images, {} files, manifest at {}",
        manifest.command,
        manifest.selection.image_ids.len(),
        manifest.artifacts.len(),
        out.join(RunManifest::FILE_NAME).display()
    );
}

fn run(cli: Cli) -> freqtag::Result<()> {
    match cli.command {
        Command::Analyze(args) => {
            let opts = analyze_options(args)?;
            finished(&run_analyze(&opts)?, &opts.out);
        }
        Command::Report(args) => {
            let opts = analyze_options(args)?;
            finished(&run_report(&opts)?, &opts.out);
        }
        Command::Prune(args) => {
            let opts = PruneOptions {
                report: args.report,
                graph: args.model.model_graph,
                weights: args.model.weights,
                data: args.data,
                images: args.images,
                seed: args.seed,
                out: args.out,
                threads: args.threads,
            };
            finished(&run_prune(&opts)?, &opts.out);
        }
        Command::InspectModel(args) => {
            let info = inspect_model(&args.model_graph, &args.weights)?;
            println!("{}", serde_json::to_string_pretty(&info)?);
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{line}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return fail("argument", first.trim_start_matches("error: "));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &error_message(&e)),
    }
}

fn error_message(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}
