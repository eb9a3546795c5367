//! The `wvn` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 usage
//! error. Data goes to `--out` (or stdout), diagnostics to stderr.

pub mod recursion_check;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::eigen_construct::{self, Branch};
use crate::error::{Error, ErrorClass, Result};
use crate::exceptional_set::build_sp;
use crate::infinite_type::{self, CoefficientBound, TailDeclaration};
use crate::operator_data::OperatorData;
use crate::prufer::{self, BoundaryCondition, SolveConfig};
use crate::recursion::TwoFloat;

pub use recursion_check::{recursion_check, RecursionCheckReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Extended,
}

#[derive(Debug, Parser)]
#[command(name = "wvn", version, about = "Dirac operators with Wigner-von Neumann type data")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Precision::Double)]
    pub precision: Precision,
    /// Output file, or directory for `example`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Check operator data against the admissibility conditions.
    Validate(ValidateArgs),
    /// Enumerate the exceptional set S_p.
    Sp(SpArgs),
    /// Integrate the Pruefer system and write `x,theta,log_r`.
    Simulate(SimulateArgs),
    /// Build and integrate the embedded-eigenvalue example.
    Example(ExampleArgs),
    /// Randomized check of the recursion identities.
    RecursionCheck(RecursionCheckArgs),
    /// Truncated small-divisor sums on an energy grid.
    Divisors(DivisorsArgs),
    /// Hausdorff-dimension bound (p - 2) alpha.
    Dimension(DimensionArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SpArgs {
    /// Comma-separated frequencies; taken from --config when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta0: f64,
    #[arg(long, default_value_t = 1e3)]
    pub xmax: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchChoice {
    Decay,
    Growth,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct ExampleArgs {
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0])]
    pub amods: Vec<f64>,
    #[arg(long, value_enum, default_value_t = BranchChoice::Both)]
    pub branch: BranchChoice,
    #[arg(long, default_value_t = 1e4)]
    pub xmax: f64,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RecursionCheckArgs {
    #[arg(long = "max-I", default_value_t = 5)]
    pub max_i: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DivisorsArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `a:b:n` for n evenly spaced points, or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub eta_grid: String,
    #[arg(long)]
    pub trunc: usize,
    /// Declared `|c_j| <= A r^j` as `A,r`.
    #[arg(long, value_delimiter = ',')]
    pub tail_geometric: Option<Vec<f64>>,
    /// Declared lower bound on omitted denominators.
    #[arg(long)]
    pub min_denominator: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DimensionArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Emitted next to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

/// Parse `a:b:n` (inclusive, `n >= 1` points) or `x1,x2,...`.
pub fn parse_eta_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Precondition(format!("bad eta grid {spec:?}; use a:b:n or a comma list"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        return Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect());
    }
    let v: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok(v)
}

fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation => EXIT_VALIDATION,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Usage => EXIT_USAGE,
    }
}

/// What a subcommand produced, before it is written out.
enum Output {
    /// Single document, to `--out` or stdout.
    Text(String),
    /// Named files, requiring `--out DIR`, with a stdout summary otherwise.
    Files(Vec<(String, String)>, String),
}

struct Outcome {
    output: Output,
    code: i32,
    note: Option<String>,
}

impl Outcome {
    fn ok(output: Output) -> Self {
        Self {
            output,
            code: EXIT_OK,
            note: None,
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn read_data(path: &Path) -> Result<(OperatorData, String)> {
    let text = fs::read_to_string(path)?;
    Ok((OperatorData::from_json(&text)?, text))
}

fn config_text(path: Option<&PathBuf>) -> Result<String> {
    match path {
        Some(p) => Ok(fs::read_to_string(p)?),
        None => Ok(String::new()),
    }
}

/// Run with `argv` (including the program name) and return the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let started = Instant::now();
    let result = pool.install(|| execute(&cli));
    match result.and_then(|(outcome, hash)| finish(&cli, outcome, hash, started)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn hash_config(cli: &Cli, config: &str) -> Result<String> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        command: &'a Command,
        seed: u64,
        precision: Precision,
        config: &'a str,
    }
    let text = serde_json::to_string(&Resolved {
        command: &cli.command,
        seed: cli.seed,
        precision: cli.precision,
        config,
    })?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn execute(cli: &Cli) -> Result<(Outcome, String)> {
    let (outcome, config) = match &cli.command {
        Command::Validate(a) => {
            let (data, text) = read_data(&a.config)?;
            let report = data.validate();
            let mut o = Outcome::ok(Output::Text(json(&report)?));
            if !report.is_valid() {
                o.code = EXIT_VALIDATION;
                o.note = Some(format!("invalid data: {}", report.violations.join("; ")));
            }
            (o, text)
        }
        Command::Sp(a) => {
            let text = config_text(a.config.as_ref())?;
            let data = if text.is_empty() {
                None
            } else {
                Some(OperatorData::from_json(&text)?)
            };
            let phi = match (&a.phi, &data) {
                (Some(phi), _) => phi.clone(),
                (None, Some(d)) => d.frequencies(),
                (None, None) => return Err(Error::Precondition("sp needs --phi or --config".into())),
            };
            let p = a
                .p
                .or(data.as_ref().map(|d| d.p))
                .ok_or_else(|| Error::Precondition("sp needs --p or --config".into()))?;
            (Outcome::ok(Output::Text(json(&build_sp(&phi, p)?)?)), text)
        }
        Command::Simulate(a) => {
            let (data, text) = read_data(&a.config)?;
            let mut cfg = SolveConfig::default().with_range(1.0, a.xmax).with_samples(a.samples);
            cfg.rel_tol = a.rel_tol;
            cfg.abs_tol = a.rel_tol * 1e-2;
            let traj = prufer::integrate_prufer(&data, a.eta, BoundaryCondition::new(a.theta0), &cfg)?;
            let mut csv = Vec::new();
            traj.write_csv(&mut csv)?;
            let mut o = Outcome::ok(Output::Text(String::from_utf8(csv).expect("ascii csv")));
            if let Ok(rep) = prufer::boundedness_diagnostic(&traj, None) {
                o.note = Some(format!(
                    "verdict {:?}, log-x slope {:.4}, last window diff {:.4}",
                    rep.verdict,
                    rep.log_fit().slope,
                    rep.last_window_diff
                ));
            }
            (o, text)
        }
        Command::Example(a) => (run_example(a)?, String::new()),
        Command::RecursionCheck(a) => {
            if a.max_i > recursion_check::MAX_ORDER {
                return Err(Error::Precondition(format!(
                    "--max-I must be at most {}, got {}",
                    recursion_check::MAX_ORDER,
                    a.max_i
                )));
            }
            let report = match cli.precision {
                Precision::Double => recursion_check::<f64>(a.max_i, a.trials, cli.seed)?,
                Precision::Extended => recursion_check::<TwoFloat>(a.max_i, a.trials, cli.seed)?,
            };
            let mut o = Outcome::ok(Output::Text(json(&report)?));
            if !report.passed {
                o.code = EXIT_NUMERICAL;
                o.note = Some("some identity residual exceeds the tolerance".into());
            }
            (o, String::new())
        }
        Command::Divisors(a) => {
            let (data, text) = read_data(&a.config)?;
            let grid = parse_eta_grid(&a.eta_grid)?;
            let tail = match (&a.tail_geometric, a.min_denominator) {
                (Some(g), _) if g.len() != 2 => {
                    return Err(Error::Precondition("--tail-geometric takes A,r".into()));
                }
                (Some(g), Some(m)) => Some(TailDeclaration {
                    coefficients: CoefficientBound::Geometric { a: g[0], ratio: g[1] },
                    min_denominator: m,
                }),
                (None, None) => None,
                _ => {
                    return Err(Error::Precondition(
                        "--tail-geometric and --min-denominator go together".into(),
                    ))
                }
            };
            let prof = infinite_type::exceptional_profile(&data, data.p, &grid, a.trunc, tail.as_ref())?;
            (Outcome::ok(Output::Text(json(&prof)?)), text)
        }
        Command::Dimension(a) => {
            let text = config_text(a.config.as_ref())?;
            let data = if text.is_empty() {
                None
            } else {
                Some(OperatorData::from_json(&text)?)
            };
            let p = a
                .p
                .or(data.as_ref().map(|d| d.p))
                .ok_or_else(|| Error::Precondition("dimension needs --p or --config".into()))?;
            let alpha = a
                .alpha
                .or(data.as_ref().and_then(|d| d.alpha))
                .ok_or_else(|| Error::Precondition("dimension needs --alpha or a config with alpha".into()))?;
            let bound = infinite_type::hausdorff_bound(p, alpha)?;
            let mut o = Outcome::ok(Output::Text(format!("{}\n", bound.bound)));
            if !bound.informative {
                o.note = Some("bound reaches 1 and carries no information".into());
            }
            (o, text)
        }
    };
    let hash = hash_config(cli, &config)?;
    Ok((outcome, hash))
}

fn run_example(a: &ExampleArgs) -> Result<Outcome> {
    if a.amods.len() != 2 {
        return Err(Error::Precondition("--amods takes two moduli a,b".into()));
    }
    let spec = eigen_construct::reference_spec(a.amods[0], a.amods[1])?.with_delta(a.delta)?;
    let cfg = SolveConfig::default().with_range(1.0, a.xmax).with_samples(a.samples);
    let bc = BoundaryCondition::new(0.0);
    let branches: Vec<Branch> = match a.branch {
        BranchChoice::Decay => vec![Branch::Decay],
        BranchChoice::Growth => vec![Branch::Growth],
        BranchChoice::Both => vec![Branch::Decay, Branch::Growth],
    };
    let runs: Vec<_> = {
        use rayon::prelude::*;
        branches
            .par_iter()
            .map(|&b| eigen_construct::run_example(&spec, b, bc, &cfg))
            .collect::<Result<_>>()?
    };
    let mut files = vec![("spec.json".to_string(), json(&spec)?)];
    let mut summary = Vec::new();
    for run in &runs {
        let mut csv = Vec::new();
        run.lock.trajectory.write_csv(&mut csv)?;
        let name = run.branch.name();
        files.push((format!("trajectory_{name}.csv"), String::from_utf8(csv).expect("ascii csv")));
        files.push((format!("fit_{name}.json"), json(&run.report())?));
        summary.push((name, run.report()));
    }
    let summary: std::collections::BTreeMap<_, _> = summary.into_iter().collect();
    Ok(Outcome::ok(Output::Files(files, json(&summary)?)))
}

fn finish(cli: &Cli, outcome: Outcome, hash: String, started: Instant) -> Result<i32> {
    let mut outputs = Vec::new();
    let name = subcommand_name(&cli.command);
    let manifest_path = match (&outcome.output, &cli.out) {
        (Output::Text(text), Some(path)) => {
            write_file(path, text)?;
            outputs.push(path.display().to_string());
            Some(sibling(path, "manifest.json"))
        }
        (Output::Text(text), None) => {
            print!("{text}");
            None
        }
        (Output::Files(files, _), Some(dir)) => {
            fs::create_dir_all(dir)?;
            for (file, body) in files {
                let p = dir.join(file);
                write_file(&p, body)?;
                outputs.push(p.display().to_string());
            }
            Some(dir.join("manifest.json"))
        }
        (Output::Files(_, summary), None) => {
            print!("{summary}");
            None
        }
    };
    let manifest = RunManifest {
        subcommand: name.to_string(),
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
    };
    match manifest_path {
        Some(p) => write_file(&p, &json(&manifest)?)?,
        None if !cli.quiet => eprint!("{}", json(&manifest)?),
        None => {}
    }
    if let Some(note) = outcome.note {
        if !cli.quiet || outcome.code != EXIT_OK {
            eprintln!("{note}");
        }
    }
    Ok(outcome.code)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Validate(_) => "validate",
        Command::Sp(_) => "sp",
        Command::Simulate(_) => "simulate",
        Command::Example(_) => "example",
        Command::RecursionCheck(_) => "recursion-check",
        Command::Divisors(_) => "divisors",
        Command::Dimension(_) => "dimension",
    }
}

/// `out.csv` -> `out.csv.manifest.json`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}
