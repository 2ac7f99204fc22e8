use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bblab_core::bodies::{self, VoxelSet};
use bblab_core::envelope::p_concave_envelope;
use bblab_core::format::{to_json_string, to_json_string_pretty};
use bblab_core::means::{q_mean, MeanOrder};
use bblab_core::rational::parse_fraction;
use bblab_core::stability::{self, StabilityConfig};
use bblab_core::supconv::{bbl_deficit, discretization_tolerance, sup_convolution};
use bblab_core::symmetry::{s_symmetrize, SplitBody};
use bblab_core::{ConcavityIndex, Error, GridFunction, RationalWeight};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

const EXIT_DOMAIN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_IO: u8 = 66;

/// Borell-Brascamp-Lieb stability toolkit.
#[derive(Parser)]
#[command(name = "bblab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted q-mean of two nonnegative numbers.
    Mean {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long)]
        lambda: RationalWeight,
        /// Order of the mean; `inf` and `-inf` select max and min.
        #[arg(long, allow_hyphen_values = true)]
        q: f64,
    },
    /// Lattice supremal convolution of two grid functions.
    Supconv {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        lambda: RationalWeight,
        #[arg(long)]
        s: ConcavityIndex,
        #[arg(long)]
        out: PathBuf,
    },
    /// BBL deficit of (f, g, h), with h defaulting to the supremal convolution.
    Bbl {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        h: Option<PathBuf>,
        #[arg(long)]
        lambda: RationalWeight,
        #[arg(long)]
        s: ConcavityIndex,
    },
    /// Lifted body of a grid function (graph lift for integer s, product lift
    /// for rational s).
    Lift {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        s: ConcavityIndex,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minkowski combination (1-λ)A + λB of voxel sets.
    Minkowski {
        #[command(flatten)]
        sets: SetPair,
        #[arg(long)]
        lambda: RationalWeight,
        /// Combine cell centers instead of solid cells.
        #[arg(long)]
        centers: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brunn-Minkowski deficit of two voxel sets.
    Bm {
        #[command(flatten)]
        sets: SetPair,
        #[arg(long)]
        lambda: RationalWeight,
    },
    /// Slice-wise ball symmetrization of a voxel body.
    Symmetrize {
        #[arg(long)]
        body: PathBuf,
        #[arg(long)]
        nsplit: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least p-concave majorant of a grid function.
    Envelope {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        p: ConcavityIndex,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full stability report: deficit, normalization, witness and bound.
    Stability {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        h: Option<PathBuf>,
        #[arg(long)]
        lambda: RationalWeight,
        #[arg(long)]
        s: ConcavityIndex,
        #[command(flatten)]
        constants: ConstantOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explicit stability constants log M_n(τ), log σ_n(τ).
    Constants {
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        constants: ConstantOpts,
    },
    /// Parameter sweeps.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Triangle-plus-spike sweep over bump masses.
    SpikeSweep {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        masses: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Pair {
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
}

#[derive(Args)]
struct SetPair {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct ConstantOpts {
    /// τ in (0, 1/2], as a fraction or decimal.
    #[arg(long, default_value = "1/2")]
    tau: String,
    /// The free constant N.
    #[arg(long = "N", default_value_t = 1.0)]
    n_override: f64,
}

impl ConstantOpts {
    fn tau(&self) -> Result<f64, Error> {
        let (num, den) = parse_fraction(&self.tau)?;
        Ok(num as f64 / den as f64)
    }
}

fn io_error(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        if e.is_io() {
            io_error(path, e.into())
        } else {
            Error::Format(format!("{}: {e}", path.display()))
        }
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| io_error(path, e))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", to_json_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Mean { a, b, lambda, q } => {
            let value = q_mean(a, b, lambda.value(), MeanOrder::new(q)?)?;
            print_json(&json!({ "a": a, "b": b, "lambda": lambda.to_string(), "q": q.to_string(), "value": value }))
        }
        Command::Supconv { pair, lambda, s, out } => {
            let f: GridFunction = read_json(&pair.f)?;
            let g: GridFunction = read_json(&pair.g)?;
            let h = sup_convolution(&f, &g, lambda, s.value())?;
            write_text(&out, &to_json_string(&h)?)
        }
        Command::Bbl { pair, h, lambda, s } => {
            let f: GridFunction = read_json(&pair.f)?;
            let g: GridFunction = read_json(&pair.g)?;
            let h: Option<GridFunction> = h.as_deref().map(read_json).transpose()?;
            let d = bbl_deficit(&f, &g, h.as_ref(), lambda, s.value())?;
            let tol = discretization_tolerance(&f, &g);
            print_json(&json!({
                "F": d.mass_f,
                "G": d.mass_g,
                "lhs": d.lhs,
                "rhs": d.rhs,
                "deficit": d.deficit,
                "delta": d.delta,
                "tol_disc": tol,
            }))
        }
        Command::Lift { f, s, out } => {
            let f: GridFunction = read_json(&f)?;
            let lifted = match s.as_integer() {
                Some(k) => bodies::lift_graph(&f, k)?,
                None => bodies::lift_product(&f, s)?,
            };
            let body = SplitBody::new(lifted.voxels, lifted.n_split)?;
            write_text(&out, &to_json_string(&body)?)
        }
        Command::Minkowski { sets, lambda, centers, out } => {
            let a: VoxelSet = read_json(&sets.a)?;
            let b: VoxelSet = read_json(&sets.b)?;
            let s = if centers {
                bodies::minkowski_combine_centers(&a, &b, lambda)?
            } else {
                bodies::minkowski_combine(&a, &b, lambda)?
            };
            write_text(&out, &to_json_string(&s)?)
        }
        Command::Bm { sets, lambda } => {
            let a: VoxelSet = read_json(&sets.a)?;
            let b: VoxelSet = read_json(&sets.b)?;
            print_json(&bodies::bm_deficit(&a, &b, lambda)?)
        }
        Command::Symmetrize { body, nsplit, out } => {
            let voxels: VoxelSet = read_json(&body)?;
            let sym = s_symmetrize(&SplitBody::new(voxels, nsplit)?)?;
            write_text(&out, &to_json_string(&sym)?)
        }
        Command::Envelope { f, p, out } => {
            let f: GridFunction = read_json(&f)?;
            let u = p_concave_envelope(&f, p.value())?;
            write_text(&out, &to_json_string(&u)?)
        }
        Command::Stability { pair, h, lambda, s, constants, out } => {
            let f: GridFunction = read_json(&pair.f)?;
            let g: GridFunction = read_json(&pair.g)?;
            let h: Option<GridFunction> = h.as_deref().map(read_json).transpose()?;
            let cfg = StabilityConfig { tau: constants.tau()?, n_override: constants.n_override, ..Default::default() };
            let report = stability::stability_report(&f, &g, h.as_ref(), lambda, s, &cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            write_text(&out, &to_json_string_pretty(&report)?)
        }
        Command::Constants { n, constants } => {
            let c = stability::fj_log_constants(n, constants.tau()?, constants.n_override)?;
            print_json(&json!({
                "n": c.n,
                "tau": c.tau,
                "N": c.n_override,
                "log_M": c.log_m,
                "log_sigma": c.log_sigma,
                "sigma": c.sigma(),
            }))
        }
        Command::Experiment { which: Experiment::SpikeSweep { base, masses, out } } => {
            let base: GridFunction = read_json(&base)?;
            let rows = stability::spike_sweep(&base, &masses, &StabilityConfig::default())?;
            let mut file = create(&out)?;
            stability::write_sweep_csv(&rows, &mut file)?;
            file.flush().map_err(|e| io_error(&out, e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Json(_) | Error::Format(_) => EXIT_DATA,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_DOMAIN,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("BBLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("BBLAB_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("bblab: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("bblab: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
