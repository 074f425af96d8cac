use clap::{Args, Parser, Subcommand};
use shear_cli::experiments::{self as ex, CliError, FloatList, ModeArg, NumList, Report};
use shear_cli::table::{write_atomic, Format};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Thread count for the parallel sweeps.
const THREADS_VAR: &str = "SHEAR_THREADS";

#[derive(Parser)]
#[command(name = "shear", version, about = "Continued fractions, lattices and horocycle experiments")]
struct Cli {
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
    /// Write here instead of stdout; the file appears only when complete.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Store per-unit results here and reuse them on the next run.
    #[arg(long, global = true)]
    checkpoint_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continued fraction word, Gauss orbit and convergents of p/q.
    Cfe {
        #[arg(required = true)]
        values: Vec<String>,
    },
    /// Family-averaged orbit measures and their distance to the Gauss measure.
    OrbitMeasure(OrbitMeasureArgs),
    /// Coprime counts on random intervals against the density bound.
    Coprime(CoprimeArgs),
    /// Expanding horocycle histogram over cells of the fundamental domain.
    Horocycle(HorocycleArgs),
    /// Translated coprime orbit histogram over [0, ln(max(1,n) m)].
    Shear(ShearArgs),
    /// Residuals of the matrix identities and the reduction round trip.
    Identities(IdentitiesArgs),
    /// Randomized p-adic arithmetic, Iwasawa and gamma-fix checks.
    Padic(PadicArgs),
    /// Mirror index table n -> n' and the sign of n n' mod m.
    Mirror {
        #[arg(long)]
        m: NumList,
    },
}

#[derive(Args)]
struct OrbitMeasureArgs {
    /// Moduli, e.g. `101,1009` or `2..=50`.
    #[arg(long)]
    m: NumList,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    /// One row per (m, mode) with the distances instead of all atoms.
    #[arg(long)]
    summary: bool,
    #[arg(long, default_value_t = 64)]
    bins: usize,
}

#[derive(Args)]
struct CoprimeArgs {
    #[arg(long)]
    m: NumList,
    /// Random intervals per modulus, besides [0, m).
    #[arg(long, default_value_t = 0)]
    intervals: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One row per modulus with the worst deviation and slack.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct HorocycleArgs {
    /// Flow times, e.g. `0,2,5,10`.
    #[arg(long)]
    t: FloatList,
    #[arg(long, visible_alias = "N", default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct ShearArgs {
    /// Translations; a single value is paired with every modulus.
    #[arg(long)]
    n: NumList,
    /// Moduli; a single value is paired with every translation.
    #[arg(long)]
    m: NumList,
    /// Samples per unit time over the whole orbit.
    #[arg(long, default_value_t = 20_000.0)]
    spu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct IdentitiesArgs {
    #[arg(long, default_value_t = 10_000)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PadicArgs {
    #[arg(long, default_value = "2,3,5,7,13")]
    primes: NumList,
    #[arg(long, default_value_t = shear_core::padic::DEFAULT_PRECISION)]
    precision: usize,
    /// Cases per prime for the pairwise arithmetic checks.
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    /// Cases for the matrix, product-formula and gamma-fix checks.
    #[arg(long, default_value_t = 1_000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn pairs(n: &[u64], m: &[u64]) -> Result<Vec<(u64, u64)>, CliError> {
    match (n.len(), m.len()) {
        (1, _) => Ok(m.iter().map(|&m| (n[0], m)).collect()),
        (_, 1) => Ok(n.iter().map(|&n| (n, m[0])).collect()),
        (a, b) if a == b => Ok(n.iter().copied().zip(m.iter().copied()).collect()),
        (a, b) => Err(CliError::Config(format!("--n has {a} values but --m has {b}"))),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR}=`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let ck = cli.checkpoint_dir.as_deref();
    match &cli.command {
        Command::Cfe { values } => ex::cfe(values),
        Command::OrbitMeasure(a) => ex::orbit_measure(&ex::OrbitMeasureConfig {
            ms: &a.m.0,
            mode: a.mode,
            summary: a.summary,
            bins: a.bins,
            checkpoint: ck,
        }),
        Command::Coprime(a) => ex::coprime(&ex::CoprimeConfig {
            ms: &a.m.0,
            intervals: a.intervals,
            seed: a.seed,
            summary: a.summary,
            checkpoint: ck,
        }),
        Command::Horocycle(a) => ex::horocycle(&ex::HorocycleConfig {
            times: &a.t.0,
            samples: a.samples,
            seed: a.seed,
            summary: a.summary,
            checkpoint: ck,
        }),
        Command::Shear(a) => ex::shear(&ex::ShearConfig {
            pairs: &pairs(&a.n.0, &a.m.0)?,
            samples_per_unit_time: a.spu,
            seed: a.seed,
            summary: a.summary,
            checkpoint: ck,
        }),
        Command::Identities(a) => ex::identities(a.cases, a.seed),
        Command::Padic(a) => ex::padic(&ex::PadicConfig {
            primes: &a.primes.0,
            precision: a.precision,
            pairs: a.pairs,
            instances: a.instances,
            seed: a.seed,
        }),
        Command::Mirror { m } => ex::mirror(&m.0, ck),
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), CliError> {
    let bytes = report.table.render(cli.format).map_err(CliError::Config)?;
    match &cli.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| run(&cli)).and_then(|report| {
        emit(&cli, &report)?;
        match report.violations.first() {
            None => Ok(()),
            Some(first) => Err(CliError::Invariant(format!("{first} ({} in total)", report.violations.len()))),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
