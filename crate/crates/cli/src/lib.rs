//! The `mco` command line: simulate protocols, print figure data, run the
//! invariant suite, classify transitions and evaluate no-go bounds.
//!
//! Exit codes: 0 success, 1 usage, 2 validation failure, 3 verification failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mco_core::bounds::{check_bound, figure8, figure8_csv, lemma_simplecase_bound};
use mco_core::characterize::{classify_transition, synthesize_protocol, TransitionClassification};
use mco_core::format::g17;
use mco_core::protocol::build_average_work_protocol;
use mco_core::verify::{forbidden_bound, run_suite, VerifyConfig};
use mco_core::{monte_carlo, Error, ExactSolver, Protocol, QubitState, ThermalContext, WorkDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mco",
    version,
    about = "Memoryless thermal protocols on a qubit: simulation and no-go bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Work distribution and final state of a protocol.
    Simulate(SimulateArgs),
    /// Loss threshold and bound probabilities over p_out in (p_beta, 1/2].
    Figure8(Figure8Args),
    /// Run the randomized invariant suite.
    Verify(VerifyArgs),
    /// Decide whether p_in -> p_out is achievable without work.
    Classify(ClassifyArgs),
    /// Evaluate the no-go bound for a forbidden transition.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ThermoArgs {
    /// Inverse temperature.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Excited-level energy of the fixed Hamiltonian.
    #[arg(long, conflicts_with = "p_beta")]
    pub e0: Option<f64>,
    /// Gibbs population of the excited level; the default is 1/4.
    #[arg(long)]
    pub p_beta: Option<f64>,
}

impl ThermoArgs {
    pub fn context(&self) -> mco_core::Result<ThermalContext> {
        match (self.e0, self.p_beta) {
            (Some(e0), _) => ThermalContext::new(self.beta, e0),
            (None, p) => ThermalContext::from_gibbs_population(self.beta, p.unwrap_or(0.25)),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub thermo: ThermoArgs,
    /// Protocol JSON file; its own beta and e0 override the thermal flags.
    #[arg(long)]
    pub protocol: Option<PathBuf>,
    /// Initial excited population; defaults to the Gibbs population.
    #[arg(long)]
    pub p_in: Option<f64>,
    /// Target population for the built-in average-work protocol.
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub stage2_steps: usize,
    /// Monte Carlo sample count (accepts `1e6`); exact solution when absent.
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct Figure8Args {
    #[command(flatten)]
    pub thermo: ThermoArgs,
    /// Number of grid points.
    #[arg(long, default_value_t = 250, value_parser = parse_count)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Randomized instances per property.
    #[arg(long, default_value_t = 200, value_parser = parse_count)]
    pub cases: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Deliberately break the named check.
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub thermo: ThermoArgs,
    #[arg(long)]
    pub p_in: f64,
    #[arg(long)]
    pub p_out: f64,
    /// Write the synthesized protocol here when the transition is achievable.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub thermo: ThermoArgs,
    #[arg(long)]
    pub p_in: f64,
    #[arg(long)]
    pub p_out: f64,
    /// Also solve this protocol exactly from p_in and compare it with the bound.
    #[arg(long)]
    pub protocol: Option<PathBuf>,
    /// Also check the average-work protocol with this many stage II steps.
    #[arg(long)]
    pub stage2_steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses a positive integer written either plainly or in exponent form.
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return if n > 0 { Ok(n) } else { Err("must be positive".into()) };
    }
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if x.is_finite() && x >= 1.0 && x.fract() == 0.0 && x <= 1e15 {
        Ok(x as usize)
    } else {
        Err(format!("expected a positive integer, got {s}"))
    }
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, stdout, stderr),
        Command::Figure8(a) => cmd_figure8(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Classify(a) => cmd_classify(a, stdout, stderr),
        Command::Bounds(a) => cmd_bounds(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_VALIDATION
        }
        Err(Failure::Verification(msg)) => {
            let _ = writeln!(stderr, "verification failed: {msg}");
            EXIT_VERIFICATION
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Outcome {
    match out {
        Some(path) => write_file(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Validation(format!("cannot write output: {e}"))),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display())))
}

fn read_protocol(path: &Path) -> Result<Protocol, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    let proto = Protocol::from_json(&text)?;
    let report = proto.validate();
    if !report.is_valid() {
        return Err(Failure::Validation(format!("{}: {report}", path.display())));
    }
    Ok(proto)
}

fn atoms_json(d: &WorkDistribution) -> serde_json::Value {
    d.atoms().iter().map(|(w, p)| json!([w, p])).collect()
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let proto = match (&a.protocol, a.p_out) {
        (Some(path), _) => read_protocol(path)?,
        (None, Some(p_out)) => {
            let p_in = a
                .p_in
                .ok_or_else(|| Failure::Validation("--p-out needs --p-in".into()))?;
            build_average_work_protocol(p_in, p_out, a.thermo.context()?, a.stage2_steps)?
        }
        (None, None) => Protocol::empty(a.thermo.context()?),
    };
    let initial = match a.p_in {
        Some(p) => QubitState::new(p)?,
        None => QubitState::new(proto.ctx().p_beta())?,
    };
    let exact = match a.samples {
        Some(_) => None,
        None => match ExactSolver::default().solve(&proto, initial) {
            Ok(o) => Some(o),
            Err(Error::Resource(msg)) => {
                let _ = writeln!(stderr, "exact solution too large ({msg}); falling back to Monte Carlo");
                None
            }
            Err(e) => return Err(e.into()),
        },
    };
    let (dist, final_p, summary) = match exact {
        Some(o) => {
            let summary = json!({
                "method": "exact",
                "final_p_excited": o.final_state.p_excited(),
                "mean_work": o.distribution.mean(),
                "work_variance": o.distribution.variance(),
                "atoms": o.distribution.len(),
            });
            (o.distribution, o.final_state.p_excited(), summary)
        }
        None => {
            let n = a.samples.unwrap_or(100_000);
            let mc = monte_carlo(&proto, initial, n, a.seed);
            let summary = json!({
                "method": "monte_carlo",
                "samples": n,
                "seed": a.seed,
                "final_p_excited": mc.final_state.p_excited(),
                "final_p_excited_std_error": mc.final_state_std_error,
                "mean_work": mc.distribution.mean(),
                "mean_work_std_error": mc.mean_std_error,
                "work_variance": mc.distribution.variance(),
            });
            (mc.distribution, mc.final_state.p_excited(), summary)
        }
    };
    match a.format {
        Format::Csv => {
            emit(&a.out, &dist.to_csv(), stdout)?;
            let mut line = format!("final_p_excited={}", g17(final_p));
            if let Some(se) = summary.get("mean_work_std_error").and_then(|v| v.as_f64()) {
                line.push_str(&format!(" mean_work_std_error={}", g17(se)));
            }
            let _ = writeln!(stderr, "{line}");
        }
        Format::Json => {
            let mut doc = summary;
            doc["distribution"] = atoms_json(&dist);
            emit(
                &a.out,
                &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()),
                stdout,
            )?;
        }
    }
    Ok(())
}

pub fn cmd_figure8(a: &Figure8Args, stdout: &mut dyn Write) -> Outcome {
    let rows = figure8(&a.thermo.context()?, a.points)?;
    let text = match a.format {
        Format::Csv => figure8_csv(&rows),
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&rows).unwrap()),
    };
    emit(&a.out, &text, stdout)
}

pub fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Outcome {
    let report = run_suite(&VerifyConfig {
        cases: a.cases,
        seed: a.seed,
        inject_fault: a.inject_fault.clone(),
    })?;
    emit(&a.out, &format!("{}\n", report.to_json()), stdout)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == mco_core::verify::Status::Fail)
            .map(|c| c.name.as_str())
            .collect();
        Err(Failure::Verification(failed.join(", ")))
    }
}

pub fn cmd_classify(a: &ClassifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let ctx = a.thermo.context()?;
    let c = classify_transition(a.p_in, a.p_out, &ctx)?;
    writeln!(stdout, "{}", c.to_json()).map_err(|e| Failure::Validation(e.to_string()))?;
    match &c {
        TransitionClassification::Forbidden { bound } => {
            let _ = writeln!(
                stderr,
                "guaranteed loss >= {} with probability >= {}",
                g17(bound.threshold),
                g17(bound.probability)
            );
        }
        _ => {
            if let Some(path) = &a.out {
                let proto = synthesize_protocol(&c, a.p_in, a.p_out, &ctx)?;
                write_file(path, &format!("{}\n", proto.to_json()))?;
            }
        }
    }
    Ok(())
}

pub fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write) -> Outcome {
    let ctx = a.thermo.context()?;
    let c = classify_transition(a.p_in, a.p_out, &ctx)?;
    if c.is_achievable() {
        return Err(Failure::Validation(format!(
            "p_in={} -> p_out={} is achievable ({}); no loss bound applies",
            a.p_in,
            a.p_out,
            c.verdict()
        )));
    }
    let bound = forbidden_bound(a.p_in, a.p_out, &ctx)?;
    let mut doc = json!({ "bound": bound });
    if let Ok(simple) = lemma_simplecase_bound(a.p_in, a.p_out, &ctx) {
        doc["simplecase"] = json!(simple);
    }
    let initial = QubitState::new(a.p_in)?;
    let mut checks = Vec::new();
    if let Some(path) = &a.protocol {
        checks.push(("protocol", read_protocol(path)?));
    }
    if let Some(n) = a.stage2_steps {
        checks.push(("average_work", build_average_work_protocol(a.p_in, a.p_out, ctx, n)?));
    }
    let mut violated = false;
    for (name, proto) in checks {
        let d = ExactSolver::default().solve(&proto, initial)?.distribution;
        let check = check_bound(&d, bound.tail());
        violated |= !check.holds;
        doc[name] = json!(check);
    }
    emit(
        &a.out,
        &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()),
        stdout,
    )?;
    if violated {
        return Err(Failure::Verification("measured probability below the bound".into()));
    }
    Ok(())
}
