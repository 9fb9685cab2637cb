//! Command-line front end: verification suites, model construction and
//! boundary traces.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use polydisc::boundary::{radial_carapoint, write_radial_csv, BoundaryPoint, RadialSchedule};
use polydisc::derivative::{directional_derivative, finite_difference, slope, Direction, StepSchedule};
use polydisc::desingularize::{desingularize, DesingularizedModel};
use polydisc::phi3::{lift_path, path_grid, phi3_realization_seeded, write_path_csv, DEFAULT_FIT_SAMPLES};
use polydisc::realization::Realization;
use polydisc::suite::{verify_phi3, Phi3SuiteConfig, Status};

mod parse;

pub use parse::{parse_complex, parse_complex_vector, ParseError};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "polydisc",
    version,
    about = "Boundary behaviour of Schur-Agler functions on the polydisc"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a verification suite.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Write a unitary realization of φ₃ as JSON.
    Realize {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the desingularized model of a realization at a carapoint.
    Desingularize {
        #[arg(long)]
        realization: PathBuf,
        #[arg(long)]
        tau: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Slope and directional derivative of a desingularized model.
    Dirderiv {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
        /// Also extrapolate a finite-difference quotient of the model's function.
        #[arg(long)]
        fd: bool,
    },
    /// Lift the path t ↦ s(t) in the symmetrized tridisc to the tridisc.
    Path {
        /// Largest k in the grid t = 2^-k, k = 2..=K.
        #[arg(long)]
        steps: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Radial Julia quotient trace of a realization at a boundary point.
    Julia {
        #[arg(long)]
        realization: PathBuf,
        #[arg(long)]
        tau: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Suite {
    Phi3 {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tolerance of the exact algebraic identities.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot parse {what}: {source}")]
    Parse { what: &'static str, source: ParseError },
    #[error(transparent)]
    Core(#[from] polydisc::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use polydisc::Error as E;
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => EXIT_INPUT,
            CliError::Core(e) => match e {
                E::Input(_) | E::Domain(_) | E::Precondition(_) | E::Io(_) | E::Json(_) | E::Csv(_) => {
                    EXIT_INPUT
                }
                _ => EXIT_CHECK_FAILED,
            },
        }
    }
}

/// Parses the arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Verify {
            suite:
                Suite::Phi3 {
                    samples,
                    seed,
                    tol,
                    json,
                },
        } => verify(samples, seed, tol, json.as_deref()),
        Command::Realize { seed, out } => {
            let fit = phi3_realization_seeded(seed, DEFAULT_FIT_SAMPLES, true)?;
            write_json(&out, &fit.realization.to_json_value())?;
            Ok(EXIT_PASS)
        }
        Command::Desingularize {
            realization,
            tau,
            out,
        } => {
            let r = Realization::load(&realization)?;
            let tau = boundary_point(&tau)?;
            let m = desingularize(&r, &tau)?;
            write_json(&out, &m.to_json_value())?;
            println!(
                "dim N = {}, dim N⊥ = {}, ω = {}, ‖u(τ)‖² = {:.12}",
                m.kernel_dim(),
                m.dim(),
                m.omega,
                m.u_tau.norm_squared()
            );
            Ok(EXIT_PASS)
        }
        Command::Dirderiv { model, delta, fd } => dirderiv(&model, &delta, fd),
        Command::Path { steps, out } => {
            if steps < 2 {
                return Err(CliError::Usage("--steps must be at least 2".into()));
            }
            let samples = path_grid(steps)
                .into_iter()
                .map(lift_path)
                .collect::<polydisc::Result<Vec<_>>>()?;
            write_atomic(&out, |w| write_path_csv(&samples, w))?;
            let last = samples.last().expect("grid is nonempty");
            println!(
                "t = {:e}: φ₃ = {:.9}, closed form {:.9}, ‖λ - 𝟙‖ = {:.3e}",
                last.t,
                last.phi_value.re,
                last.closed_form,
                last.dist_to_one()
            );
            Ok(EXIT_PASS)
        }
        Command::Julia {
            realization,
            tau,
            out,
        } => {
            let r = Realization::load(&realization)?;
            let tau = boundary_point(&tau)?;
            let report = radial_carapoint(&r, &tau, &RadialSchedule::default())?;
            write_atomic(&out, |w| write_radial_csv(&report.trace, w))?;
            if report.converged {
                println!("α = {:.9}, ω = {}", report.alpha, report.omega);
                Ok(EXIT_PASS)
            } else {
                println!("radial Julia quotient did not converge; τ is not a carapoint");
                Ok(EXIT_CHECK_FAILED)
            }
        }
    }
}

fn verify(samples: usize, seed: u64, tol: f64, json_out: Option<&Path>) -> Result<u8, CliError> {
    let report = verify_phi3(&Phi3SuiteConfig { samples, seed, tol })?;
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
        };
        println!(
            "{status} {:<26} {:>12.3e} (tol {:.1e})",
            c.name, c.worst_value, c.tolerance
        );
    }
    eprintln!("wall time {:.2} s", report.wall_time);
    if let Some(path) = json_out {
        let text = report.to_json_string();
        write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    Ok(if report.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}

fn dirderiv(model: &Path, delta: &str, fd: bool) -> Result<u8, CliError> {
    let m = DesingularizedModel::load(model)?;
    let delta = parse_complex_vector(delta).map_err(|source| CliError::Parse {
        what: "--delta",
        source,
    })?;
    let d = Direction::new(delta, &m.tau)?;
    let h = slope(&m, &d)?;
    let derivative = directional_derivative(&m, &d)?;
    let pair = |z: Complex64| json!([z.re, z.im]);
    let mut out = json!({
        "delta": d.coords().iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "h": pair(h),
        "derivative": pair(derivative),
    });
    if fd {
        let est = finite_difference(&m, &m.tau, m.omega, &d, &StepSchedule::default())?;
        out["fd"] = pair(est.value);
        out["fd_err"] = json!(est.err_est);
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    Ok(EXIT_PASS)
}

fn boundary_point(text: &str) -> Result<BoundaryPoint, CliError> {
    let coords = parse_complex_vector(text).map_err(|source| CliError::Parse {
        what: "--tau",
        source,
    })?;
    Ok(BoundaryPoint::new(coords)?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json value");
    text.push('\n');
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut std::fs::File) -> polydisc::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Core(polydisc::Error::Io(e));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    body(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
