use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "tenfold", version, about = "Gaussian ensembles of the ten symmetry classes")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "TENFOLD_THREADS")]
    threads: Option<usize>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the class table.
    Classes,
    /// Sample matrices and write their reduced spectra.
    Sample {
        #[command(flatten)]
        ens: EnsembleArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Use sigma2 as the Gaussian scale instead of sigma2 / n.
        #[arg(long)]
        raw_sigma2: bool,
        /// Also write the sampled matrices as JSON.
        #[arg(long, value_name = "PATH")]
        emit_matrix: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint log density and weights at given reduced eigenvalues.
    Density {
        #[command(flatten)]
        ens: EnsembleArgs,
        /// Comma-separated reduced eigenvalues, one per reduced slot.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        raw_sigma2: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the equilibrium measure as x,pdf,cdf.
    Equilibrium {
        #[command(flatten)]
        ens: EnsembleArgs,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the rate functional on a grid measure.
    Rate {
        #[command(flatten)]
        ens: EnsembleArgs,
        /// Cells of the equilibrium grid.
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        /// Choose c so that the equilibrium measure has rate zero.
        #[arg(long)]
        calibrate: bool,
        /// Grid measure CSV (x_lo,x_hi,mass); defaults to the equilibrium.
        #[arg(long, value_name = "PATH")]
        measure: Option<PathBuf>,
        /// Shift the measure by this amount.
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<f64>,
        /// Dilate the measure by this factor.
        #[arg(long)]
        dilate: Option<f64>,
        /// Write the evaluated grid measure as CSV.
        #[arg(long, value_name = "PATH")]
        emit_grid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// KS distance of pooled spectra to the equilibrium across n.
    Ks {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Record wall time per row.
        #[arg(long)]
        timed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequency of KS deviations larger than delta across n.
    Ldp {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value_t = 0.08)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binned two-eigenvalue law against the exact joint density.
    Oracle {
        #[command(flatten)]
        ens: EnsembleArgs,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural and trace-identity checks on fresh samples.
    Check {
        /// Restrict to one class.
        #[arg(long)]
        class: Option<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 16])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub class: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sigma2: f64,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub class: String,
    /// Comma-separated, strictly increasing sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Fixed chiral block size.
    #[arg(long, conflicts_with = "kappa")]
    pub s: Option<usize>,
    /// Chiral block fraction: s = max(1, floor(kappa n)).
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub enum Failure {
    /// Bad invocation; exit code 2.
    Usage { flag: &'static str, message: String },
    /// Exit code 1.
    Runtime(String),
}

impl From<tenfold::error::Error> for Failure {
    fn from(e: tenfold::error::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub fn usage(flag: &'static str, message: impl Into<String>) -> Failure {
    Failure::Usage { flag, message: message.into() }
}

/// Where a subcommand's main output goes.
pub struct Sink {
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Sink {
    pub fn emit(&self, body: &str) -> Outcome {
        match &self.out {
            Some(path) => write_atomic(path, body.as_bytes()),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
                Ok(())
            }
        }
    }
}

/// Write through a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| Failure::Runtime(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn sink(format: Option<Format>, default: Format, allowed: &[Format], out: Option<PathBuf>) -> Outcome<Sink> {
    let format = format.unwrap_or(default);
    if !allowed.contains(&format) {
        return Err(usage("--format", format!("{format:?} output is not available for this subcommand").to_lowercase()));
    }
    Ok(Sink { format, out })
}

fn dispatch(cli: Cli) -> Outcome {
    use Format::*;
    let f = cli.format;
    match cli.command {
        Command::Classes => commands::classes(&sink(f, Text, &[Text, Csv, Json], None)?),
        Command::Sample { ens, seed, reps, raw_sigma2, emit_matrix, out } => {
            commands::sample(&ens, seed, reps, raw_sigma2, emit_matrix.as_deref(), &sink(f, Csv, &[Csv, Json], out)?)
        }
        Command::Density { ens, values, raw_sigma2, out } => {
            commands::density(&ens, &values, raw_sigma2, &sink(f, Text, &[Text, Json], out)?)
        }
        Command::Equilibrium { ens, grid, out } => commands::equilibrium(&ens, grid, &sink(f, Csv, &[Csv, Json], out)?),
        Command::Rate { ens, grid, calibrate, measure, shift, dilate, emit_grid, out } => commands::rate(
            &ens,
            commands::RateOptions { grid, calibrate, measure, shift, dilate, emit_grid },
            &sink(f, Text, &[Text, Json], out)?,
        ),
        Command::Ks { exp, timed, out } => commands::ks(&exp, timed, &sink(f, Json, &[Json, Text], out)?),
        Command::Ldp { exp, delta, out } => commands::ldp(&exp, delta, &sink(f, Json, &[Json, Text], out)?),
        Command::Oracle { ens, bins, reps, seed, out } => {
            commands::oracle(&ens, bins, reps, seed, &sink(f, Json, &[Json, Text], out)?)
        }
        Command::Check { class, n, reps, seed } => {
            commands::check(class.as_deref(), &n, reps, seed, &sink(f, Text, &[Text, Json], None)?)
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Outcome {
    match threads {
        Some(0) => Err(usage("--threads", "thread count must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string())),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match configure_threads(cli.threads).and_then(|_| dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage { flag, message }) => {
            eprintln!("error: invalid value for '{flag}': {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
