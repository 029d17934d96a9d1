mod commands;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lossmodes::examples::{build_circuit, build_damped_oscillator, CircuitParams};
use lossmodes::io::parse_system;
use lossmodes::{Error, System, Tolerances};

#[derive(Parser)]
#[command(name = "lossmodes", version, about = "Modal analysis of dissipative Lagrangian systems with high-loss components")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check symmetry and definiteness of the system matrices.
    Validate(Common),
    /// Eigenmodes of A(β) with Q factors, classes and thresholds.
    Spectrum(Common),
    /// Tracked eigenvalues and asymptotic predictions over a grid of β.
    Sweep(Common),
    /// Integrate the equations of motion and write the trajectory.
    Simulate(SimulateArgs),
    /// Overdamping regime, counts and claim checks (θ = 0 only).
    Classify(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Built-in system.
    #[arg(long, value_enum, conflicts_with = "input", required_unless_present = "input")]
    pub example: Option<Example>,
    /// JSON system definition.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Loss parameter, overriding the system's own.
    #[arg(long)]
    pub beta: Option<f64>,
    /// `START:STOP:COUNT` or `START:STOP:COUNT:log`.
    #[arg(long, value_parser = parse_grid)]
    pub beta_grid: Option<BetaGrid>,
    /// Defaults to csv for sweep and simulate, json otherwise.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance override `KEY=VALUE`; repeatable.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    pub tol: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial displacement, comma separated, one real entry per coordinate.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "eigenmode")]
    pub q0: Option<String>,
    /// Initial velocity, comma separated; zero when absent.
    #[arg(long, allow_hyphen_values = true, requires = "q0")]
    pub qdot0: Option<String>,
    /// Start on an eigenmode: 1-based index in mode order, or `hi` for the most damped.
    #[arg(long)]
    pub eigenmode: Option<String>,
    /// Duration.
    #[arg(long = "t")]
    pub t: f64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Example {
    /// Two-loop RLC circuit with unit parameters, resistor in the second loop.
    Circuit,
    /// Scalar oscillator q̈ + βq̇ + q = 0.
    Oscillator,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug)]
pub struct BetaGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl BetaGrid {
    pub fn points(&self) -> Vec<f64> {
        let m = (self.count - 1) as f64;
        let mut v: Vec<f64> = (0..self.count)
            .map(|k| {
                let s = k as f64 / m;
                if self.log {
                    (self.start.ln() + s * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + s * (self.stop - self.start)
                }
            })
            .collect();
        // Endpoints exactly as given.
        v[0] = self.start;
        v[self.count - 1] = self.stop;
        v
    }
}

fn parse_grid(s: &str) -> Result<BetaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err("expected START:STOP:COUNT[:log]".into());
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    let (start, stop) = (num(parts[0])?, num(parts[1])?);
    let count: usize = parts[2].trim().parse().map_err(|e| format!("{:?}: {e}", parts[2]))?;
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(other) => return Err(format!("unknown spacing {other:?}; only \"log\" is accepted")),
    };
    if !(start.is_finite() && stop.is_finite()) || start < 0.0 || start >= stop {
        return Err(format!("need 0 <= START < STOP, got {start} and {stop}"));
    }
    if count < 2 {
        return Err(format!("COUNT must be at least 2, got {count}"));
    }
    if log && start <= 0.0 {
        return Err("log spacing needs START > 0".into());
    }
    Ok(BetaGrid { start, stop, count, log })
}

/// Failure with its exit status.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_INTEGRATOR: u8 = 4;
pub const EXIT_UNSUPPORTED: u8 = 5;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::Parameter(_) | Error::Dimension(_) | Error::NonFinite(_) => EXIT_PARSE,
            Error::Stiff { .. } | Error::Sampling(_) => EXIT_INTEGRATOR,
            Error::Unsupported(_) | Error::Inapplicable(_) => EXIT_UNSUPPORTED,
            _ => EXIT_SOLVER,
        };
        Self::new(code, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::new(EXIT_PARSE, format!("i/o error: {e}"))
    }
}

pub type Outcome = Result<(), Failure>;

impl Common {
    /// The system with `--beta` applied.
    pub fn load(&self) -> Result<(System, Option<String>), Failure> {
        let (sys, label) = match (self.example, &self.input) {
            (Some(Example::Circuit), _) => {
                (build_circuit::<f64>(&CircuitParams::unit(1.0))?, Some("unit circuit".to_string()))
            }
            (Some(Example::Oscillator), _) => (build_damped_oscillator::<f64>(), Some("damped oscillator".to_string())),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
                parse_system::<f64>(&text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?
            }
            (None, None) => return Err(Failure::new(EXIT_PARSE, "one of --example or --input is required")),
        };
        let beta = self.beta.unwrap_or(sys.beta);
        if !beta.is_finite() || beta < 0.0 {
            return Err(Failure::new(EXIT_PARSE, format!("beta must be finite and nonnegative, got {beta}")));
        }
        Ok((sys.with_beta(beta), label))
    }

    pub fn tolerances(&self) -> Result<Tolerances, Failure> {
        let mut tol = Tolerances::default();
        for item in &self.tol {
            tol.apply_override(item)?;
        }
        Ok(tol)
    }

    pub fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
            None => Box::new(io::BufWriter::new(io::stdout().lock())),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate(c) => commands::validate(c),
        Command::Spectrum(c) => commands::spectrum(c),
        Command::Sweep(c) => commands::sweep(c),
        Command::Simulate(a) => commands::simulate(a),
        Command::Classify(c) => commands::classify(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
