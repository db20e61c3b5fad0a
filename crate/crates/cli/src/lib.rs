//! Problem files, subcommands and exit codes for the `annihilator` binary.
//!
//! A problem file is JSON:
//!
//! ```json
//! {
//!   "version": 1,
//!   "mode": "solve",
//!   "domain": "unit_interval",
//!   "functions": [{"kind": "polynomial", "coeffs": [1.0]}],
//!   "options": {"residual_tol": 1e-9},
//!   "output": {"samples_n": 1001}
//! }
//! ```
//!
//! Exit codes: 0 success, 1 usage or schema error, 2 solver failure
//! (including a failed verification).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use annihilator_core::driver::{
    realify, solve_annihilating_phase, verify, ComplexFunction, SolveOptions, SolveReport,
};
use annihilator_core::extensions::real_line::DEFAULT_SAMPLES;
use annihilator_core::extensions::{
    marginalize, orthogonalize, orthogonalize_real_line, phase_pushforward, to_unit_interval,
    ComplexRealLineFunction, MultiFunction, PushedPhase, RealLineFunction,
};
use annihilator_core::{FunctionSet, FunctionSpec, Phase, SmoothPhase};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Orthogonalize,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitInterval,
    RealLine,
    /// `R^N`, reduced to its first coordinate.
    RealN(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Functions {
    Unit(Vec<ComplexFunction>),
    RealLine(Vec<ComplexRealLineFunction>),
    RealN(Vec<MultiFunction>),
}

impl Functions {
    pub fn len(&self) -> usize {
        match self {
            Functions::Unit(f) => f.len(),
            Functions::RealLine(f) => f.len(),
            Functions::RealN(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub report_path: Option<PathBuf>,
    pub phase_path: Option<PathBuf>,
    pub samples_path: Option<PathBuf>,
    pub samples_n: Option<usize>,
}

pub const DEFAULT_SAMPLES_N: usize = 1001;

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub version: u32,
    pub mode: Mode,
    pub domain: Domain,
    pub functions: Functions,
    pub options: SolveOptions,
    pub output: OutputOptions,
    /// Sample count of the logistic transform for real-line domains.
    pub transform_samples: usize,
}

/// A schema violation located by JSON pointer.
#[derive(Debug)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "schema error at {}: {}", self.pointer, self.message)
    }
}

impl std::error::Error for SchemaError {}

fn schema(pointer: impl Into<String>, message: impl fmt::Display) -> SchemaError {
    SchemaError {
        pointer: pointer.into(),
        message: message.to_string(),
    }
}

fn field<T: serde::de::DeserializeOwned>(value: &Value, pointer: &str) -> Result<T, SchemaError> {
    serde_json::from_value(value.clone()).map_err(|e| schema(pointer, e))
}

fn is_complex(v: &Value) -> bool {
    v.get("re").is_some()
}

fn parse_pair<T: serde::de::DeserializeOwned>(
    v: &Value,
    pointer: &str,
) -> Result<(T, Option<T>), SchemaError> {
    if is_complex(v) {
        let re = field(&v["re"], &format!("{pointer}/re"))?;
        let im = match v.get("im") {
            None | Some(Value::Null) => None,
            Some(im) => Some(field(im, &format!("{pointer}/im"))?),
        };
        Ok((re, im))
    } else {
        Ok((field(v, pointer)?, None))
    }
}

impl ProblemFile {
    pub fn from_value(root: &Value) -> Result<Self, SchemaError> {
        let obj = root
            .as_object()
            .ok_or_else(|| schema("", "problem must be a JSON object"))?;
        let get = |key: &str| {
            obj.get(key)
                .ok_or_else(|| schema(format!("/{key}"), "missing required field"))
        };

        let version: u32 = field(get("version")?, "/version")?;
        if version != 1 {
            return Err(schema(
                "/version",
                format!("unsupported version {version}, expected 1"),
            ));
        }
        let mode: Mode = field(get("mode")?, "/mode")?;
        let domain: Domain = match obj.get("domain") {
            None => Domain::UnitInterval,
            Some(v) => field(v, "/domain")?,
        };
        if let Domain::RealN(0) = domain {
            return Err(schema("/domain/real_n", "dimension must be at least 1"));
        }
        let list = get("functions")?
            .as_array()
            .ok_or_else(|| schema("/functions", "expected an array of functions"))?;
        if list.is_empty() {
            return Err(schema("/functions", "at least one function is required"));
        }
        let functions = match domain {
            Domain::UnitInterval => {
                let mut out = Vec::with_capacity(list.len());
                for (i, v) in list.iter().enumerate() {
                    let ptr = format!("/functions/{i}");
                    let (re, im): (FunctionSpec, Option<FunctionSpec>) = parse_pair(v, &ptr)?;
                    re.validate().map_err(|e| schema(&ptr, e))?;
                    if let Some(im) = &im {
                        im.validate().map_err(|e| schema(format!("{ptr}/im"), e))?;
                    }
                    out.push(ComplexFunction { re, im });
                }
                Functions::Unit(out)
            }
            Domain::RealLine => {
                let mut out = Vec::with_capacity(list.len());
                for (i, v) in list.iter().enumerate() {
                    let ptr = format!("/functions/{i}");
                    let (re, im): (RealLineFunction, Option<RealLineFunction>) =
                        parse_pair(v, &ptr)?;
                    re.validate().map_err(|e| schema(&ptr, e))?;
                    if let Some(im) = &im {
                        im.validate().map_err(|e| schema(format!("{ptr}/im"), e))?;
                    }
                    out.push(ComplexRealLineFunction { re, im });
                }
                Functions::RealLine(out)
            }
            Domain::RealN(n) => {
                let mut out = Vec::with_capacity(list.len());
                for (i, v) in list.iter().enumerate() {
                    let ptr = format!("/functions/{i}");
                    let f: MultiFunction = field(v, &ptr)?;
                    if f.dimension() != n {
                        return Err(schema(
                            &ptr,
                            format!("function has dimension {}, domain has {n}", f.dimension()),
                        ));
                    }
                    out.push(f);
                }
                Functions::RealN(out)
            }
        };
        let options: SolveOptions = match obj.get("options") {
            None => SolveOptions::default(),
            Some(v) => field(v, "/options")?,
        };
        options.validate().map_err(|e| schema("/options", e))?;
        let output: OutputOptions = match obj.get("output") {
            None => OutputOptions::default(),
            Some(v) => field(v, "/output")?,
        };
        if output.samples_n.is_some_and(|n| n < 2) {
            return Err(schema("/output/samples_n", "need at least 2 samples"));
        }
        let transform_samples = match obj.get("transform_samples") {
            None => DEFAULT_SAMPLES,
            Some(v) => field(v, "/transform_samples")?,
        };
        if transform_samples < 3 {
            return Err(schema("/transform_samples", "need at least 3 samples"));
        }
        Ok(Self {
            version,
            mode,
            domain,
            functions,
            options,
            output,
            transform_samples,
        })
    }

    pub fn to_value(&self) -> Value {
        fn pair<T: Serialize>(re: &T, im: &Option<T>) -> Value {
            match im {
                None => serde_json::to_value(re).expect("serializable"),
                Some(im) => json!({"re": re, "im": im}),
            }
        }
        let functions: Vec<Value> = match &self.functions {
            Functions::Unit(fs) => fs.iter().map(|f| pair(&f.re, &f.im)).collect(),
            Functions::RealLine(fs) => fs.iter().map(|f| pair(&f.re, &f.im)).collect(),
            Functions::RealN(fs) => fs
                .iter()
                .map(|f| serde_json::to_value(f).expect("serializable"))
                .collect(),
        };
        json!({
            "version": self.version,
            "mode": self.mode,
            "domain": self.domain,
            "functions": functions,
            "options": self.options,
            "output": self.output,
            "transform_samples": self.transform_samples,
        })
    }
}

/// Failures, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Solver(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e:#}"),
            CliError::Solver(e) => write!(f, "solver failure: {e:#}"),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn solver(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Solver(e.into())
}

pub fn parse_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not valid JSON", path.display()))
        .map_err(usage)?;
    ProblemFile::from_value(&value).map_err(usage)
}

#[derive(Debug, Parser)]
#[command(
    name = "annihilator",
    version,
    about = "Smooth phases that annihilate finite families of integrals"
)]
pub struct Cli {
    /// Seed for multistart and basis jitter (overrides the problem file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Residual tolerance (overrides the problem file).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a phase annihilating every integral of the family.
    Solve { problem: PathBuf },
    /// Check a saved phase against the family of a problem file.
    Verify { problem: PathBuf, phase: PathBuf },
    /// Find phases making the functions pairwise orthogonal.
    Orthogonalize { problem: PathBuf },
}

/// Where the artifacts of one run go.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub report: PathBuf,
    pub phase: PathBuf,
    pub samples: PathBuf,
    pub samples_n: usize,
}

impl OutputPaths {
    /// Explicit paths are taken relative to the problem file's directory;
    /// missing ones default to `<stem>.report.json`, `<stem>.phase.json`
    /// and `<stem>.samples.csv` beside it.
    pub fn resolve(problem_path: &Path, output: &OutputOptions) -> Self {
        let dir = problem_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let stem = problem_path
            .file_stem()
            .map_or_else(|| "problem".into(), |s| s.to_string_lossy().into_owned());
        let pick = |given: &Option<PathBuf>, suffix: &str| match given {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => dir.join(p),
            None => dir.join(format!("{stem}.{suffix}")),
        };
        Self {
            report: pick(&output.report_path, "report.json"),
            phase: pick(&output.phase_path, "phase.json"),
            samples: pick(&output.samples_path, "samples.csv"),
            samples_n: output.samples_n.unwrap_or(DEFAULT_SAMPLES_N),
        }
    }

    /// `foo.csv` → `foo.<index>.csv`.
    pub fn indexed_samples(&self, index: usize) -> PathBuf {
        let stem = self
            .samples
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let ext = self
            .samples
            .extension()
            .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
        self.samples.with_file_name(format!("{stem}.{index}.{ext}"))
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))
                .map_err(usage)?;
        }
    }
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(usage)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Samples of a real-line phase over `[-R - 1, R + 1]`, `R` its support radius.
fn real_line_samples_csv(pushed: &PushedPhase, n: usize) -> String {
    use std::fmt::Write as _;
    let r = pushed.support_radius();
    let r = if r.is_finite() { r + 1.0 } else { 40.0 };
    let mut out = String::from("x,g,re_exp,im_exp\n");
    for i in 0..n {
        let x = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        let g = pushed.value(x);
        let _ = writeln!(out, "{},{},{},{}", x, g, g.cos(), g.sin());
    }
    out
}

/// The family on `[0, 1]` that a phase must annihilate.
fn unit_family(problem: &ProblemFile) -> Result<FunctionSet, CliError> {
    let samples = problem.transform_samples;
    let real_line = |fs: Vec<RealLineFunction>| -> Result<FunctionSet, CliError> {
        let specs = fs
            .iter()
            .map(|f| to_unit_interval(f, samples))
            .collect::<annihilator_core::Result<Vec<_>>>()
            .map_err(usage)?;
        FunctionSet::unit(specs).map_err(usage)
    };
    match &problem.functions {
        Functions::Unit(fs) => realify(fs).map_err(usage),
        Functions::RealLine(fs) => {
            let mut flat = Vec::new();
            for f in fs {
                flat.push(f.re.clone());
                flat.extend(f.im.clone());
            }
            real_line(flat)
        }
        Functions::RealN(fs) => {
            let quad = problem.options.quad;
            let marginals = fs
                .iter()
                .map(|f| marginalize(f, 0, &quad))
                .collect::<annihilator_core::Result<Vec<_>>>()
                .map_err(usage)?;
            real_line(marginals)
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    domain: Domain,
    #[serde(flatten)]
    report: &'a SolveReport,
}

/// Outcome of a command that ran to completion.
#[derive(Debug)]
pub struct Summary {
    pub message: String,
    pub passed: bool,
}

fn samples_for(problem: &ProblemFile, phase: &SmoothPhase, n: usize) -> String {
    match problem.domain {
        Domain::UnitInterval => phase.samples_csv(n),
        _ => real_line_samples_csv(&phase_pushforward(phase), n),
    }
}

pub fn run_solve(problem: &ProblemFile, paths: &OutputPaths) -> Result<Summary, CliError> {
    let fset = unit_family(problem)?;
    let (phase, report) = solve_annihilating_phase(&fset, &problem.options).map_err(solver)?;
    write(&paths.phase, &to_json(&phase))?;
    write(
        &paths.samples,
        &samples_for(problem, &phase, paths.samples_n),
    )?;
    write(
        &paths.report,
        &to_json(&SolveOutput {
            domain: problem.domain,
            report: &report,
        }),
    )?;
    Ok(Summary {
        message: format!(
            "solved: {} functions, max residual {:.3e}, eps {:.3e}",
            fset.len(),
            report.max_residual,
            report.eps_final
        ),
        passed: report.passed,
    })
}

pub fn run_verify(
    problem: &ProblemFile,
    phase_path: &Path,
    paths: &OutputPaths,
) -> Result<Summary, CliError> {
    let text = fs::read_to_string(phase_path)
        .with_context(|| format!("cannot read {}", phase_path.display()))
        .map_err(usage)?;
    let phase = SmoothPhase::from_json(&text)
        .with_context(|| format!("{} is not a phase", phase_path.display()))
        .map_err(usage)?;
    let fset = unit_family(problem)?;
    let report = verify(&fset, &phase, &problem.options).map_err(solver)?;
    write(
        &paths.report,
        &to_json(&SolveOutput {
            domain: problem.domain,
            report: &report,
        }),
    )?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !report.passed {
        return Err(solver(anyhow!(
            "verification failed ({}), max residual {:.3e}",
            failed.join(", "),
            report.max_residual
        )));
    }
    Ok(Summary {
        message: format!("verified: max residual {:.3e}", report.max_residual),
        passed: true,
    })
}

pub fn run_orthogonalize(problem: &ProblemFile, paths: &OutputPaths) -> Result<Summary, CliError> {
    let opts = &problem.options;
    let (result, pushed) = match &problem.functions {
        Functions::Unit(fs) => (orthogonalize(fs, opts).map_err(solver)?, None),
        Functions::RealLine(fs) => {
            let r = orthogonalize_real_line(fs, problem.transform_samples, opts).map_err(solver)?;
            (r.unit, Some(r.phases))
        }
        Functions::RealN(_) => {
            return Err(usage(anyhow!(
                "orthogonalize does not support real_n domains"
            )));
        }
    };
    write(&paths.phase, &to_json(&result.phases))?;
    for (j, g) in result.phases.iter().enumerate() {
        let csv = match &pushed {
            None => g.samples_csv(paths.samples_n),
            Some(p) => real_line_samples_csv(&p[j], paths.samples_n),
        };
        write(&paths.indexed_samples(j + 1), &csv)?;
    }
    // each level bounds real and imaginary parts separately
    let threshold = 2.0 * opts.residual_tol;
    let passed = result.max_inner_product < threshold;
    write(
        &paths.report,
        &to_json(&json!({
            "domain": problem.domain,
            "max_inner_product": result.max_inner_product,
            "threshold": threshold,
            "passed": passed,
            "levels": result.levels,
        })),
    )?;
    if !passed {
        return Err(solver(anyhow!(
            "largest inner product {:.3e} exceeds {:.3e}",
            result.max_inner_product,
            threshold
        )));
    }
    Ok(Summary {
        message: format!(
            "orthogonalized {} functions, max |<phi_j, phi_k>| {:.3e}",
            result.phases.len(),
            result.max_inner_product
        ),
        passed,
    })
}

fn load(
    path: &Path,
    cli: &Cli,
    accepted: &[Mode],
    command: &str,
) -> Result<(ProblemFile, OutputPaths), CliError> {
    let mut problem = parse_problem(path)?;
    if !accepted.contains(&problem.mode) {
        return Err(usage(anyhow!(
            "problem file declares mode {:?}, which `{command}` cannot run",
            problem.mode
        )));
    }
    if let Some(seed) = cli.seed {
        problem.options.seed = seed;
    }
    if let Some(tol) = cli.tol {
        problem.options.residual_tol = tol;
        problem.options.validate().map_err(usage)?;
    }
    let paths = OutputPaths::resolve(path, &problem.output);
    Ok((problem, paths))
}

pub fn execute(cli: &Cli) -> Result<Summary, CliError> {
    match &cli.command {
        Command::Solve { problem } => {
            let (p, paths) = load(problem, cli, &[Mode::Solve], "solve")?;
            run_solve(&p, &paths)
        }
        Command::Verify { problem, phase } => {
            let (p, paths) = load(problem, cli, &[Mode::Verify, Mode::Solve], "verify")?;
            run_verify(&p, phase, &paths)
        }
        Command::Orthogonalize { problem } => {
            let (p, paths) = load(problem, cli, &[Mode::Orthogonalize], "orthogonalize")?;
            run_orthogonalize(&p, &paths)
        }
    }
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            if !cli.quiet {
                println!("{}", summary.message);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
