//! `taskquant` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use taskquant::design::{design, DesignMethod, LevelBudget};
use taskquant::experiments::{
    emit_results, run_sweep, write_csv, write_json, Method, OutputFormat, ScenarioSpec,
    SweepConfig, SweepRecord, BUILTIN_PRESETS,
};
use taskquant::scenarios::EstimatorVariant;
use taskquant::Error;

const PRESET_HELP: &str = "Presets:
  fig5        channel estimation, k = 2 taps, n = 120 observations
  fig6        channel estimation, k = 8 taps, n = 120 observations
  eig-setup1  eigen-spectrum recovery, k = 2, n_x = 20, 2x2 DFT basis
  eig-setup2  eigen-spectrum recovery, k = 4, n_x = 60, identity basis
  scalar      scalar Wiener model, k = n = 1

Exit codes: 0 ok, 2 configuration or usage, 3 infeasible design,
4 numerical failure, 5 I/O.";

#[derive(Parser)]
#[command(
    name = "taskquant",
    version,
    about = "Design and evaluate task-based quantization systems",
    after_help = PRESET_HELP
)]
struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true, env = "TASKQUANT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a system and write it as JSON.
    Design(DesignArgs),
    /// Simulate one design at one bit budget.
    Simulate(SimulateArgs),
    /// Evaluate the vector-quantizer benchmarks over a bit grid.
    Bounds(BoundsArgs),
    /// Run a sweep described by a TOML config file.
    Sweep(SweepArgs),
    /// List the built-in scenarios.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignChoice {
    Thm1,
    Cor2,
    Cor3,
}

impl DesignChoice {
    fn method(self) -> DesignMethod {
        match self {
            DesignChoice::Thm1 => DesignMethod::Optimal,
            DesignChoice::Cor2 => DesignMethod::DigitalOnly,
            DesignChoice::Cor3 => DesignMethod::QuantizeMmse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimulateChoice {
    Thm1,
    Thm1Nodither,
    Cor3,
    Cor3Nodither,
    Cor2,
}

impl SimulateChoice {
    fn method(self) -> Method {
        match self {
            SimulateChoice::Thm1 => Method::Thm1,
            SimulateChoice::Thm1Nodither => Method::Thm1NoDither,
            SimulateChoice::Cor3 => Method::Cor3,
            SimulateChoice::Cor3Nodither => Method::Cor3NoDither,
            SimulateChoice::Cor2 => Method::Cor2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatChoice {
    Csv,
    Json,
}

impl From<FormatChoice> for OutputFormat {
    fn from(f: FormatChoice) -> Self {
        match f {
            FormatChoice::Csv => OutputFormat::Csv,
            FormatChoice::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct ScenarioArg {
    /// Preset name or path to a config file defining the scenario.
    #[arg(long)]
    scenario: String,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value = "thm1")]
    method: DesignChoice,
    /// Total bit budget log2 M.
    #[arg(long)]
    bits: u32,
    /// Number of scalar quantizers (thm1 only; default picks the best).
    #[arg(long)]
    p: Option<usize>,
    /// Dynamic range in standard deviations.
    #[arg(long, default_value_t = 3.0)]
    eta: f64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value = "thm1")]
    method: SimulateChoice,
    #[arg(long)]
    bits: u32,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    eta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Comma-separated, strictly increasing log2 M values.
    #[arg(long, value_delimiter = ',', required = true)]
    bits_list: Vec<u32>,
    /// Trials for the random-codebook estimates.
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest log2 M for which codebooks are enumerated.
    #[arg(long, default_value_t = 16)]
    max_bits: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatChoice,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Infeasible(_) => 3,
        Error::Numerical(_) | Error::DimensionMismatch(_) => 4,
        Error::Io { .. } | Error::Format { .. } => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> taskquant::Result<()> {
    if let Some(0) = cli.threads {
        return Err(Error::Config(vec!["threads: must be at least 1".into()]));
    }
    match cli.command {
        Command::Design(args) => cmd_design(args),
        Command::Simulate(args) => cmd_simulate(args, cli.threads),
        Command::Bounds(args) => cmd_bounds(args, cli.threads),
        Command::Sweep(args) => cmd_sweep(args, cli.threads),
        Command::Presets => {
            for (name, about) in BUILTIN_PRESETS {
                println!("{name:<11} {about}");
            }
            Ok(())
        }
    }
}

/// Base config for a preset name or a config file.
fn base_config(scenario: &str) -> taskquant::Result<SweepConfig> {
    if ScenarioSpec::preset(scenario).is_some() {
        return SweepConfig::for_preset(scenario);
    }
    let path = Path::new(scenario);
    if path.exists() {
        return SweepConfig::from_file(path);
    }
    let names: Vec<&str> = BUILTIN_PRESETS.iter().map(|(n, _)| *n).collect();
    Err(Error::Config(vec![format!(
        "scenario: '{scenario}' is neither a preset ({}) nor a config file",
        names.join(", ")
    )]))
}

fn channel_config(scenario: &str) -> taskquant::Result<SweepConfig> {
    let cfg = base_config(scenario)?;
    if !cfg.scenario.is_channel() {
        return Err(Error::Config(vec![format!(
            "scenario: '{scenario}' is an eigen-spectrum scenario; this command needs a linear \
             channel model (use sweep)"
        )]));
    }
    Ok(cfg)
}

fn cmd_design(args: DesignArgs) -> taskquant::Result<()> {
    let cfg = channel_config(&args.scenario.scenario)?;
    if args.p.is_some() && !matches!(args.method, DesignChoice::Thm1) {
        return Err(Error::Config(vec!["p: only applies to thm1".into()]));
    }
    let taskquant::experiments::BuiltScenario::Channel(scenario) =
        cfg.scenario.build(EstimatorVariant::AsPrinted)?
    else {
        unreachable!("checked above");
    };
    let budget = LevelBudget::from_bits(args.bits);
    let system = design(
        args.method.method(),
        scenario.model(),
        &budget,
        args.eta,
        args.p,
    )?;
    let mut doc = system.to_json();
    doc["mmse_floor"] = serde_json::json!(scenario.model().mmse_floor());
    let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n";
    let summary = format!(
        "{}: p = {}, M~ = {}, gamma = {:.6}, predicted MSE = {:.6e} (+ floor {:.6e})",
        system.method.name(),
        system.output_dim(),
        system.quantizer.resolution(),
        system.quantizer.dynamic_range(),
        system.predicted_mse,
        scenario.model().mmse_floor()
    );
    match &args.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| io_error(path, e))?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, threads: Option<usize>) -> taskquant::Result<()> {
    let mut cfg = channel_config(&args.scenario.scenario)?;
    let method = args.method.method();
    if args.p.is_some() && !matches!(method, Method::Thm1 | Method::Thm1NoDither) {
        return Err(Error::Config(vec![
            "p: only applies to thm1 variants".into()
        ]));
    }
    cfg.methods = vec![method, Method::MmseFloor];
    cfg.bits = vec![args.bits];
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    cfg.eta = args.eta;
    cfg.output_dim = args.p;
    cfg.threads = threads;
    check_trials(args.trials, "trials")?;
    let records = run_sweep(&cfg)?;
    let rec = &records[0];
    if let Some(err) = &rec.error {
        return Err(record_error(err));
    }
    let floor = records[1].estimate.unwrap_or(f64::NAN);
    println!(
        "{} at log2 M = {}: total MSE {:.6e} ± {:.2e} (95%), distortion {:.6e}, floor {:.6e}",
        rec.method,
        rec.log_m,
        rec.estimate.unwrap_or(f64::NAN),
        rec.ci.unwrap_or(f64::NAN),
        rec.distortion.unwrap_or(f64::NAN),
        floor
    );
    if let Some(t) = rec.theoretical {
        println!("theoretical total MSE {t:.6e}");
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs, threads: Option<usize>) -> taskquant::Result<()> {
    let mut cfg = channel_config(&args.scenario.scenario)?;
    if args.bits_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(vec![
            "bits-list: must be strictly increasing".into(),
        ]));
    }
    check_trials(args.trials, "trials")?;
    cfg.methods = vec![
        Method::MmseFloor,
        Method::Prop1Lower,
        Method::Prop1Upper,
        Method::TaskIgnorantEmp,
        Method::TaskIgnorantApprox,
    ];
    cfg.bits = args.bits_list;
    cfg.bound_trials = args.trials;
    cfg.bound_max_bits = args.max_bits;
    cfg.seed = args.seed;
    cfg.threads = threads;
    let records = run_sweep(&cfg)?;
    write_records(&records, args.out.as_deref(), args.format.into())?;
    print_table(&records, args.out.is_some());
    Ok(())
}

fn cmd_sweep(args: SweepArgs, threads: Option<usize>) -> taskquant::Result<()> {
    let mut cfg = SweepConfig::from_file(&args.config)?;
    cfg.threads = threads.or(cfg.threads);
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    let records = run_sweep(&cfg)?;
    write_records(&records, cfg.output.as_deref(), cfg.format)?;
    print_table(&records, cfg.output.is_some());
    Ok(())
}

fn check_trials(trials: usize, what: &str) -> taskquant::Result<()> {
    if trials == 0 {
        return Err(Error::Config(vec![format!("{what}: must be at least 1")]));
    }
    Ok(())
}

/// Re-raises a failed record with the exit category its message implies.
fn record_error(message: &str) -> Error {
    if message.starts_with("infeasible design") {
        Error::Infeasible(
            message
                .trim_start_matches("infeasible design: ")
                .to_string(),
        )
    } else if message.starts_with("numerical failure") {
        Error::Numerical(message.to_string())
    } else {
        Error::InvalidParameter(message.to_string())
    }
}

fn write_records(
    records: &[SweepRecord],
    path: Option<&Path>,
    format: OutputFormat,
) -> taskquant::Result<()> {
    match path {
        Some(p) => emit_results(records, p, format),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match format {
                OutputFormat::Csv => write_csv(records, &mut lock),
                OutputFormat::Json => write_json(records, &mut lock),
            }?;
            lock.flush().map_err(|e| io_error(Path::new("<stdout>"), e))
        }
    }
}

/// Human-readable summary. Goes to stdout when results went to a file, to
/// stderr otherwise so piped output stays machine-readable.
fn print_table(records: &[SweepRecord], to_stdout: bool) {
    let mut lines = vec![format!(
        "{:<22} {:>6} {:>5} {:>13} {:>10} {:>13}",
        "method", "logM", "n_s", "estimate", "ci", "theoretical"
    )];
    let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
    for r in records {
        let mut line = format!(
            "{:<22} {:>6} {:>5} {:>13} {:>10} {:>13}",
            r.method,
            r.log_m,
            r.n_s.map_or_else(|| "-".to_string(), |n| n.to_string()),
            num(r.estimate),
            r.ci.map_or_else(|| "-".to_string(), |x| format!("{x:.2e}")),
            num(r.theoretical)
        );
        if let Some(e) = &r.error {
            line.push_str(&format!("  [{e}]"));
        }
        lines.push(line);
    }
    let text = lines.join("\n");
    if to_stdout {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
