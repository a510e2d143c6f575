use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use schedforge::discovery::TargetMetric;
use schedforge::policy::DEFAULT_MAX_STEPS;
use schedforge_cli::{
    cmd_discover, cmd_gen_traces, cmd_report, cmd_simulate, to_json, CliError, PolicyChoice, SimulateArgs, TraceSource,
    EXIT_INPUT,
};

/// Scheduling-policy simulator and discovery loop.
///
/// Exit codes: 0 ok, 1 output I/O failure, 2 bad input, 3 policy error, 4 provider failure.
#[derive(Parser)]
#[command(name = "schedforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate `.trace.jsonl` files from a preset or a params file.
    GenTraces(GenTracesArgs),
    /// Run one policy over a set of traces and print metrics as JSON.
    Simulate(SimulateCli),
    /// Run a discovery experiment described by a JSON config.
    Discover {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarize a finished run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Also write the per-iteration trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct SourceArgs {
    /// Preset name, or `canonical` for all six canonical traces.
    #[arg(long)]
    preset: Option<String>,
    /// JSON WorkloadParams file.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct GenTracesArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Seed; repeat for several. Defaults to the canonical seeds.
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Fifo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Throughput,
    P99Latency,
}

#[derive(Args)]
struct SimulateCli {
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    policy: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<Baseline>,
    /// Directory of `.trace.jsonl` files, `canonical`, or a preset name.
    #[arg(long)]
    traces: String,
    /// JSON SimConfig; defaults to 4 pools of 16 cpu / 64 GB.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "throughput")]
    metric: Metric,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    /// Write `<trace>.assignments.jsonl` files here.
    #[arg(long)]
    assignment_log: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::GenTraces(args) => {
            let source = match (&args.source.preset, &args.source.params) {
                (Some(name), _) => TraceSource::Preset(name),
                (None, Some(path)) => TraceSource::Params(path),
                (None, None) => unreachable!("clap requires one source"),
            };
            let paths = cmd_gen_traces(source, &args.seed, &args.out)?;
            Ok(to_json(&paths))
        }
        Command::Simulate(args) => {
            let policy = match args.policy {
                Some(path) => PolicyChoice::File(path),
                None => PolicyChoice::NativeFifo,
            };
            let sim = SimulateArgs {
                policy,
                traces: &args.traces,
                sim_config: args.config.as_deref(),
                target_metric: match args.metric {
                    Metric::Throughput => TargetMetric::Throughput,
                    Metric::P99Latency => TargetMetric::P99Latency,
                },
                max_steps: args.max_steps,
                assignment_log_dir: args.assignment_log.as_deref(),
            };
            Ok(to_json(&cmd_simulate(&sim)?))
        }
        Command::Discover { config } => Ok(to_json(&cmd_discover(&config)?)),
        Command::Report { run, csv } => Ok(to_json(&cmd_report(&run, csv.as_deref())?)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
