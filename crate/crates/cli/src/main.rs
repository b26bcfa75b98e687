mod commands;
mod input;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Least fixed points of monotone polynomial systems, with certified valid bits.
#[derive(Parser, Debug)]
#[command(name = "mspsolve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Variables, cleanliness, SCC structure and coefficient data.
    Info(InfoArgs),
    /// Run Kleene, Newton or decomposed Newton iteration.
    Solve(SolveArgs),
    /// Run exact Newton iteration and emit a valid-bits certificate.
    Certify(CertifyArgs),
    /// Translate inputs to equation form, quadratize or clean a system.
    Convert(ConvertArgs),
    /// Emit a random pPDA termination system.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Input file, or `-` for standard input.
    file: String,
    /// Input format; detected from the first statement when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Mspe,
    Ppda,
    Backbutton,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputArg {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "text")]
    output: OutputArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeArg {
    Kleene,
    Newton,
    Dnm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "newton")]
    scheme: SchemeArg,
    /// DNM parameter: an SCC at depth t gets j * 2^t Newton steps.
    #[arg(short = 'j', long = "dnm-j", default_value_t = 1)]
    j: u64,
    #[arg(long, conflicts_with = "residual_eps")]
    max_iterations: Option<u64>,
    /// Stop once the max-norm of f(x) - x is below this value.
    #[arg(long)]
    residual_eps: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Mantissa bits kept per float iterate (at most 53).
    #[arg(long, default_value_t = 53, value_parser = clap::value_parser!(u32).range(1..=53))]
    float_precision: u32,
    /// Working precision of stored exact iterates, or `none` for unrounded iterates.
    #[arg(long, default_value = "256")]
    iterate_bits: String,
    /// Pivot magnitude below which a float matrix counts as singular.
    #[arg(long, default_value_t = 1e-12)]
    pivot_tolerance: f64,
    /// Solve SCCs of equal depth concurrently (DNM).
    #[arg(long)]
    parallel_sccs: bool,
    /// Stop an SCC early once it reaches an exact fixed point (DNM).
    #[arg(long)]
    early_exit: bool,
    #[arg(long, value_enum, default_value = "text")]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Newton steps to run (at least this many when --target-bits is given).
    #[arg(long)]
    iterations: Option<u64>,
    /// Iterate until this many bits are certified.
    #[arg(long)]
    target_bits: Option<u64>,
    #[arg(long, default_value = "scc_general",
          value_parser = ["scc_general", "size_based", "ppda", "strict_ppda", "cone_vector"])]
    method: String,
    /// `one`, `none`, `auto`, or a comma-separated vector such as `1,1,1/2`.
    /// Defaults to `one` for pPDA termination systems with f(1) <= 1 and `auto` otherwise.
    #[arg(long)]
    upper_bound: Option<String>,
    /// Also decide whether every enclosure upper end is below 1.
    #[arg(long)]
    prove_below_one: bool,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    #[arg(long, default_value = "256")]
    iterate_bits: String,
    #[arg(long, value_enum, default_value = "json")]
    output: OutputArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvertTarget {
    Mspe,
    Quadratize,
    Clean,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "mspe")]
    to: ConvertTarget,
    /// Write to this file instead of standard output.
    #[arg(short, long)]
    out: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitArg {
    Mspe,
    Ppda,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 2)]
    n_states: usize,
    #[arg(long, default_value_t = 3)]
    n_symbols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mspe")]
    emit: EmitArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Info(a) => commands::info(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Certify(a) => commands::certify(&a),
        Command::Convert(a) => commands::convert(&a),
        Command::Generate(a) => commands::generate(&a),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
