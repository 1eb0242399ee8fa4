use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use structamp_cli::{execute, load, report_dir, validate, CliError, Overrides, Verb, EXIT_INVALID, EXIT_OK};

#[derive(Parser)]
#[command(name = "structamp", version, about = "Structure-alignment analysis of predicted questionnaire data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `analysis.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `synth.seed`.
    #[arg(long)]
    synth_seed: Option<u64>,
    /// Overrides `llm.max_concurrency`.
    #[arg(long)]
    concurrency: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, synth_seed: self.synth_seed, concurrency: self.concurrency }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config without running anything.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Generate the synthetic dataset described by `[synth]`.
    Synth(RunArgs),
    /// Run every predictor.
    Predict(RunArgs),
    /// Score, fit, and run the noise and attentive comparisons.
    Analyze(RunArgs),
    /// Annotate reasoning traces and compare attribution vectors.
    Attribution(RunArgs),
    /// Render figures and CSVs from a finished run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// All stages, resuming from the manifest.
    Run(RunArgs),
}

fn fail(e: &CliError) -> ExitCode {
    if let CliError::Invalid(diags) = e {
        for d in diags {
            eprintln!("error: {d}");
        }
    }
    eprintln!("structamp: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| writeln!(buf, "[{}] {}", rec.target(), rec.args()))
        .init();
    let cli = Cli::parse();
    let (args, verb) = match cli.command {
        Command::Validate { config, format } => {
            let diags = match load(&config) {
                Ok(cfg) => validate(&cfg),
                Err(d) => d,
            };
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&diags).expect("diagnostics serialize")),
                Format::Text => {
                    for d in &diags {
                        eprintln!("error: {d}");
                    }
                }
            }
            return ExitCode::from(if diags.is_empty() { EXIT_OK } else { EXIT_INVALID });
        }
        Command::Report { run_dir } => {
            return match report_dir(&run_dir) {
                Ok(figs) => {
                    for f in figs {
                        println!("{}", run_dir.join("reports").join(format!("{}.svg", f.stem)).display());
                    }
                    ExitCode::from(EXIT_OK)
                }
                Err(e) => fail(&e),
            };
        }
        Command::Synth(a) => (a, Verb::Synth),
        Command::Predict(a) => (a, Verb::Predict),
        Command::Analyze(a) => (a, Verb::Analyze),
        Command::Attribution(a) => (a, Verb::Attribution),
        Command::Run(a) => (a, Verb::Run),
    };
    match execute(&args.config, &args.overrides(), verb) {
        Ok(p) => {
            println!("{}", p.dir().root().join(structamp_cli::manifest::MANIFEST).display());
            ExitCode::from(EXIT_OK)
        }
        Err(e) => fail(&e),
    }
}
