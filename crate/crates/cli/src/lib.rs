//! Command-line front end. [`run`] parses arguments and returns the exit code
//! together with everything that would be written to stdout and stderr.
//!
//! Exit codes: 0 feasible or success, 1 infeasible, 2 input error, 3 numerical
//! failure.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ncpick::derive::{cara_feasible, cara_residuals, cara_synthesize, Variant};
use ncpick::displacement::{solve_exact, solve_series, DEFAULT_DEPTH_CAP};
use ncpick::generate::{generate_cara, generate_np, CaraParams, NpParams, CARA_POINT_MARGIN, GENERATOR_DEGREE, NP_POINT_MARGIN};
use ncpick::interpolate::{np_feasible, synthesize, verify_certificate, FeasibilityReport, InterpolantCertificate, Settings};
use ncpick::io::{parse_json, DisplacementJson, InstanceFile, KernelJson, MatrixJson, Problem, SchurJson, SettingsJson};
use ncpick::linalg::operator_norm;
use ncpick::points::{closed_form_kernel, szego_kernel};
use ncpick::{Error, ErrorClass};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Contractivity slack allowed for certified truncation norms.
const NORM_SLACK: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "ncpick", version, about = "Nevanlinna-Pick and Caratheodory interpolation on the operator ball")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalFlags {
    /// Relative eigenvalue floor for positivity tests [default: 1e-9]
    #[arg(long = "tol-psd", global = true)]
    pub tol_psd: Option<f64>,
    /// Interpolation residual tolerance [default: 1e-6]
    #[arg(long = "tol-interp", global = true)]
    pub tol_interp: Option<f64>,
    /// Level cap for series solvers [default: 200]
    #[arg(long = "depth-cap", global = true)]
    pub depth_cap: Option<usize>,
    /// Degree of the synthesized interpolant [default: 8]
    #[arg(long = "K-out", global = true)]
    pub k_out: Option<usize>,
    /// Emit JSON (the default output format)
    #[arg(long, global = true)]
    pub json: bool,
    /// Pretty-print JSON output
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Include wall-clock timing in reports
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide feasibility of an instance
    Feasibility {
        path: PathBuf,
        /// Include the Pick or displacement matrix in the report
        #[arg(long)]
        show_matrix: bool,
    },
    /// Construct an interpolant with a certificate
    Synthesize {
        path: PathBuf,
        /// Recompute the certificate's residuals independently
        #[arg(long)]
        verify: bool,
    },
    /// Write a seeded instance that is feasible by construction
    Generate(GenerateArgs),
    /// Evaluate the kernel K(Z, W)
    Kernel { path: PathBuf },
    /// Solve A - sum F A F* = UU* - VV*
    SolveDisplacement {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
    },
    /// Run the built-in invariant checks
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Series,
    Exact,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Nevpick,
    Cara,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Partial,
    Total,
}

#[derive(Args, Debug, Clone)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of points (nevpick)
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Derivative order (cara)
    #[arg(short = 'l', long = "order", default_value_t = 1)]
    pub order: usize,
    /// Number of variables
    #[arg(long = "N", default_value_t = 2)]
    pub alphabet: usize,
    #[arg(long = "dimE", default_value_t = 1)]
    pub dim: usize,
    /// Norm bound of the hidden Schur element
    #[arg(long, default_value_t = 0.9)]
    pub margin: f64,
    /// Ceiling on the ball margin of generated points
    #[arg(long = "point-margin")]
    pub point_margin: Option<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Total)]
    pub variant: VariantArg,
    /// Degree of the hidden Schur element
    #[arg(long, default_value_t = GENERATOR_DEGREE)]
    pub degree: usize,
    /// Place the Caratheodory point at the origin
    #[arg(long = "zero-point")]
    pub zero_point: bool,
    /// Write to a file instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Everything a command produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Input => EXIT_INPUT,
        ErrorClass::Infeasible => EXIT_INFEASIBLE,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

fn failure(e: &Error) -> Outcome {
    Outcome { code: exit_code(e), stdout: String::new(), stderr: format!("error: {e}\n") }
}

fn render(value: &Value, pretty: bool) -> String {
    let mut s = if pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) }
        .expect("reports serialize");
    s.push('\n');
    s
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))
}

fn effective_settings(file: &SettingsJson, flags: &GlobalFlags) -> Result<Settings, Error> {
    let mut s = file.to_settings()?;
    if let Some(v) = flags.tol_psd {
        s.tol_psd = v;
    }
    if let Some(v) = flags.tol_interp {
        s.tol_interp = v;
    }
    if let Some(v) = flags.depth_cap {
        s.depth_cap = v;
    }
    if let Some(v) = flags.k_out {
        s.k_out = v;
    }
    if !(s.tol_psd > 0.0 && s.tol_interp > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    Ok(s)
}

#[derive(Serialize)]
struct CertificateJson {
    element: SchurJson,
    residuals: Vec<f64>,
    max_residual: f64,
    norm_bounds: Vec<f64>,
    theta_defect: f64,
    wave_residual: f64,
    rank: usize,
    r1: usize,
    r2: usize,
}

impl From<&InterpolantCertificate> for CertificateJson {
    fn from(c: &InterpolantCertificate) -> Self {
        CertificateJson {
            element: (&c.element).into(),
            residuals: c.residuals.clone(),
            max_residual: c.max_residual(),
            norm_bounds: c.norm_bounds.clone(),
            theta_defect: c.theta_defect,
            wave_residual: c.wave_residual,
            rank: c.rank,
            r1: c.r1,
            r2: c.r2,
        }
    }
}

fn feasibility_of(problem: &Problem, settings: &Settings) -> Result<FeasibilityReport, Error> {
    match problem {
        Problem::NevPick(p) => np_feasible(p, settings),
        Problem::Cara(p) => cara_feasible(p, settings),
    }
}

fn feasibility_json(rep: &FeasibilityReport, show_matrix: bool) -> Value {
    let mut v = json!({
        "verdict": if rep.feasible { "feasible" } else { "infeasible" },
        "min_eig": rep.min_eig,
        "cross_check": rep.cross_check,
        "depth": rep.depth,
    });
    if show_matrix {
        v["matrix"] = serde_json::to_value(MatrixJson::from(&rep.matrix)).expect("plain data");
    }
    v
}

fn cmd_feasibility(path: &PathBuf, show_matrix: bool, flags: &GlobalFlags) -> Result<(i32, Value), Error> {
    let inst = InstanceFile::parse(&read(path)?)?;
    let settings = effective_settings(&inst.settings, flags)?;
    let rep = feasibility_of(&inst.problem, &settings)?;
    let mut v = feasibility_json(&rep, show_matrix);
    v["kind"] = json!(inst.problem.kind());
    v["settings"] = json!(SettingsJson::from(&settings));
    Ok((if rep.feasible { EXIT_OK } else { EXIT_INFEASIBLE }, v))
}

fn cmd_synthesize(path: &PathBuf, verify: bool, flags: &GlobalFlags) -> Result<(i32, Value), Error> {
    let inst = InstanceFile::parse(&read(path)?)?;
    let settings = effective_settings(&inst.settings, flags)?;
    let rep = feasibility_of(&inst.problem, &settings)?;
    let mut v = feasibility_json(&rep, false);
    v["kind"] = json!(inst.problem.kind());
    v["settings"] = json!(SettingsJson::from(&settings));
    if !rep.feasible {
        return Ok((EXIT_INFEASIBLE, v));
    }
    let cert = match &inst.problem {
        Problem::NevPick(p) => synthesize(p, &settings)?,
        Problem::Cara(p) => cara_synthesize(p, &settings)?,
    };
    let mut ok = cert.max_residual() <= settings.tol_interp && cert.max_norm() <= 1.0 + NORM_SLACK;
    v["certificate"] = json!(CertificateJson::from(&cert));
    if verify {
        let check = match &inst.problem {
            Problem::NevPick(p) => serde_json::to_value(verify_certificate(&cert, p, &settings)?).expect("plain data"),
            Problem::Cara(p) => {
                let residuals = cara_residuals(p, &cert.element)?;
                let max_residual = residuals.iter().copied().fold(0.0, f64::max);
                json!({ "residuals": residuals, "max_residual": max_residual, "passed": max_residual <= settings.tol_interp })
            }
        };
        ok &= check["passed"].as_bool() == Some(true);
        v["verification"] = check;
    }
    Ok((if ok { EXIT_OK } else { EXIT_NUMERICAL }, v))
}

fn cmd_generate(args: &GenerateArgs, flags: &GlobalFlags) -> Result<Value, Error> {
    let settings = effective_settings(&SettingsJson::default(), flags)?;
    let problem = match args.kind {
        Kind::Nevpick => {
            let p = NpParams {
                seed: args.seed,
                points: args.n,
                alphabet: args.alphabet,
                dim: args.dim,
                margin: args.margin,
                point_margin: args.point_margin.unwrap_or(NP_POINT_MARGIN),
                degree: args.degree,
            };
            Problem::NevPick(generate_np(&p)?.0)
        }
        Kind::Cara => {
            let p = CaraParams {
                seed: args.seed,
                order: args.order,
                alphabet: args.alphabet,
                dim: args.dim,
                margin: args.margin,
                point_margin: args.point_margin.unwrap_or(CARA_POINT_MARGIN),
                variant: match args.variant {
                    VariantArg::Partial => Variant::Partial,
                    VariantArg::Total => Variant::Total,
                },
                degree: args.degree,
                zero_point: args.zero_point,
            };
            Problem::Cara(generate_cara(&p)?.0)
        }
    };
    Ok(InstanceFile::new(problem, &settings).to_value())
}

fn cmd_kernel(path: &PathBuf, flags: &GlobalFlags) -> Result<Value, Error> {
    let k: KernelJson = parse_json(&read(path)?)?;
    let (z, w) = (k.z.to_point()?, k.w.to_point()?);
    let tol = flags.tol_psd.unwrap_or(1e-10).min(1e-10);
    let value = szego_kernel(&z, &w, tol, flags.depth_cap.unwrap_or(DEFAULT_DEPTH_CAP))?;
    let mut v = json!({
        "value": MatrixJson::from(&value.value),
        "depth": value.depth,
        "tail_bound": value.tail_bound,
    });
    if z.dim() == 1 {
        let closed = closed_form_kernel(&z, &w)?;
        v["closed_form"] = json!(MatrixJson::from(&closed));
        v["closed_form_gap"] = json!(operator_norm(&(&value.value - &closed)));
    }
    Ok(v)
}

fn cmd_solve_displacement(path: &PathBuf, method: Method, flags: &GlobalFlags) -> Result<(i32, Value), Error> {
    let sys: DisplacementJson = parse_json(&read(path)?)?;
    let sys = sys.to_system()?;
    let settings = Settings::default();
    let cap = flags.depth_cap.unwrap_or(settings.depth_cap);
    let mut v = json!({});
    let series = if method != Method::Exact { Some(solve_series(&sys, settings.tol_series, cap)?) } else { None };
    let exact = if method != Method::Series { Some(solve_exact(&sys)?) } else { None };
    if let Some(s) = &series {
        v["series"] = json!({
            "A": MatrixJson::from(&s.a),
            "depth": s.depth,
            "tail_estimate": s.tail_estimate,
            "residual": sys.residual(&s.a),
        });
    }
    if let Some(a) = &exact {
        v["exact"] = json!({ "A": MatrixJson::from(a), "residual": sys.residual(a) });
    }
    let mut code = EXIT_OK;
    if let (Some(s), Some(a)) = (&series, &exact) {
        let gap = operator_norm(&(&s.a - a));
        let agree = gap <= settings.cross_check * (1.0 + operator_norm(a));
        v["agreement"] = json!({ "gap": gap, "agree": agree });
        if !agree {
            code = EXIT_NUMERICAL;
        }
    }
    Ok((code, v))
}

fn cmd_selftest(flags: &GlobalFlags) -> (i32, String) {
    let rows = ncpick::selftest::run_all();
    let code = if rows.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_NUMERICAL };
    if flags.json || flags.pretty {
        let v: Vec<Value> = rows.iter().map(|r| json!({ "check": r.name, "passed": r.passed, "detail": r.detail })).collect();
        return (code, render(&json!(v), flags.pretty));
    }
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in &rows {
        out.push_str(&format!("{:<width$}  {}  {}\n", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail));
    }
    (code, out)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let flags = &cli.global;
    let started = Instant::now();
    let result: Result<(i32, Value), Error> = match &cli.command {
        Command::Feasibility { path, show_matrix } => cmd_feasibility(path, *show_matrix, flags),
        Command::Synthesize { path, verify } => cmd_synthesize(path, *verify, flags),
        Command::Kernel { path } => cmd_kernel(path, flags).map(|v| (EXIT_OK, v)),
        Command::SolveDisplacement { path, method } => cmd_solve_displacement(path, *method, flags),
        Command::Generate(args) => match cmd_generate(args, flags) {
            Ok(v) => {
                let text = render(&v, flags.pretty);
                if let Some(out) = &args.output {
                    if let Err(e) = std::fs::write(out, &text) {
                        return failure(&Error::Format(format!("cannot write {}: {e}", out.display())));
                    }
                    return Outcome { code: EXIT_OK, stdout: String::new(), stderr: String::new() };
                }
                return Outcome { code: EXIT_OK, stdout: text, stderr: String::new() };
            }
            Err(e) => Err(e),
        },
        Command::Selftest => {
            let (code, stdout) = cmd_selftest(flags);
            return Outcome { code, stdout, stderr: String::new() };
        }
    };
    match result {
        Ok((code, mut v)) => {
            if flags.timing {
                v["timing_ms"] = json!(started.elapsed().as_secs_f64() * 1e3);
            }
            let stderr = match code {
                EXIT_INFEASIBLE => "infeasible\n".to_string(),
                EXIT_NUMERICAL => "numerical check failed\n".to_string(),
                _ => String::new(),
            };
            Outcome { code, stdout: render(&v, flags.pretty), stderr }
        }
        Err(e) => failure(&e),
    }
}
