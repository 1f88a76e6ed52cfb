//! Command-line front end.
//!
//! Exit codes: 0 holds, 1 violated, 2 inconclusive, 64 usage error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::chains::{eval_coord_gl_symmetric, evaluate, ChainId, ChainOptions, ChainVerdict};
use crate::classes::{
    check_1d, check_class, CheckOptions, ClassTag, SampleGrid, Tolerance, Verdict,
};
use crate::domain::Domain;
use crate::expr::{parse, Expr};
use crate::func::{Bivariate, Univariate};
use crate::probe::{fuzz_chain, CoefficientRange, FuzzConfig};
use crate::quadrature::QuadConfig;
use crate::report::{to_json, CorollaryAudit, CorollaryPair, Envelope, Render};

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const THREADS_ENV: &str = "HADAMARD_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "hadamard-lab",
    version,
    about = "Numerical verification of Hadamard-type inequalities for Godunova-Levin and P-functions"
)]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sampled membership check of a function class.
    CheckClass(CheckClassArgs),
    /// Evaluate one inequality chain term by term.
    Verify(VerifyArgs),
    /// Run a chain on seeded certified class members.
    Fuzz(FuzzArgs),
    /// Compare the stated and corrected symmetric chains.
    #[command(name = "audit-corollary2")]
    AuditCorollary2(AuditArgs),
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 17)]
    pub grid: usize,
    /// Number of λ values.
    #[arg(long, default_value_t = 9)]
    pub lambdas: usize,
    /// Use λ = k/m including 0 and 1 (never for Godunova-Levin classes).
    #[arg(long)]
    pub closed_lambdas: bool,
    /// Absolute comparison tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Relative comparison tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
    /// Maximum number of witnesses reported.
    #[arg(long, default_value_t = 8)]
    pub witnesses: usize,
}

impl SamplingArgs {
    fn options(&self) -> Result<CheckOptions, String> {
        if self.grid < 2 {
            return Err("--grid must be at least 2".into());
        }
        if self.lambdas < 1 {
            return Err("--lambdas must be at least 1".into());
        }
        if !(self.tol >= 0.0 && self.rtol >= 0.0 && self.tol.is_finite() && self.rtol.is_finite()) {
            return Err("tolerances must be finite and nonnegative".into());
        }
        Ok(CheckOptions {
            grid: SampleGrid {
                point_count: self.grid,
                lambda_count: self.lambdas,
                lambda_open: !self.closed_lambdas,
            },
            tol: Tolerance {
                atol: self.tol,
                rtol: self.rtol,
            },
            witness_cap: self.witnesses,
        })
    }
}

#[derive(Debug, Args)]
pub struct QuadArgs {
    /// Gauss-Legendre nodes per panel.
    #[arg(long, default_value_t = 8)]
    pub quad_nodes: usize,
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub quad_tol: f64,
    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub quad_abs_tol: f64,
    #[arg(long, default_value_t = 4)]
    pub initial_panels: usize,
    #[arg(long, default_value_t = 12)]
    pub max_refinements: u32,
}

impl QuadArgs {
    fn config(&self) -> Result<QuadConfig, String> {
        let cfg = QuadConfig {
            nodes_per_panel: self.quad_nodes,
            initial_panels: self.initial_panels,
            max_refinements: self.max_refinements,
            abs_tol: self.quad_abs_tol,
            rel_tol: self.quad_tol,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct CheckClassArgs {
    #[arg(long)]
    pub f: String,
    /// `a,b` for one-dimensional classes, `a,b,c,d` otherwise.
    #[arg(long)]
    pub domain: String,
    /// convex, p, gl, joint-convex, joint-p, joint-gl, coord-convex, coord-p, coord-gl
    #[arg(long)]
    pub class: String,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub chain: String,
    #[arg(long)]
    pub f: String,
    /// Second function of the product chains.
    #[arg(long)]
    pub g: Option<String>,
    #[arg(long)]
    pub domain: String,
    /// Skip the sampled class checks of the hypotheses.
    #[arg(long)]
    pub no_preconditions: bool,
    /// Add sampled intermediate checks to the details.
    #[arg(long)]
    pub verbose: bool,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    #[arg(long)]
    pub chain: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Terms per generated function (1..=8).
    #[arg(long, default_value_t = 3)]
    pub atoms: usize,
    #[arg(long, default_value_t = 0.5)]
    pub coef_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub coef_max: f64,
    /// Defaults to the unit interval or square.
    #[arg(long)]
    pub domain: Option<String>,
    /// Skip the constant and affine injection trials.
    #[arg(long)]
    pub no_injections: bool,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// `a,b`; the chains live on the square `[a,b]²`.
    #[arg(long)]
    pub domain: String,
    /// Additional symmetric function to audit besides f = 1.
    #[arg(long)]
    pub f: Option<String>,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn parse_expr(flag: &str, text: &str) -> Result<Expr, Usage> {
    parse(text).map_err(|e| {
        let caret = " ".repeat(e.position());
        Usage(format!("--{flag}: {e}\n  {text}\n  {caret}^"))
    })
}

fn parse_domain(text: &str) -> Result<Domain, Usage> {
    Domain::parse(text).map_err(|e| Usage(format!("--domain: {e}")))
}

struct Outcome {
    body: String,
    code: i32,
}

fn emit<R: Render>(
    format: Format,
    command: &str,
    inputs: Map<String, Value>,
    result: &R,
) -> String {
    match format {
        Format::Json => to_json(&Envelope::new(command, inputs, result)),
        Format::Csv => result.csv(),
        Format::Text => result.text(),
    }
}

fn membership_code(v: Verdict) -> i32 {
    match v {
        Verdict::HoldsOnSamples => EXIT_HOLDS,
        Verdict::Violated => EXIT_VIOLATED,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn chain_code(v: ChainVerdict) -> i32 {
    match v {
        ChainVerdict::Holds => EXIT_HOLDS,
        ChainVerdict::Violated => EXIT_VIOLATED,
        ChainVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("inputs serialize")
}

fn check_class_cmd(a: &CheckClassArgs, format: Format) -> Result<Outcome, Usage> {
    let f = parse_expr("f", &a.f)?;
    let domain = parse_domain(&a.domain)?;
    let class = ClassTag::from_name(&a.class).ok_or_else(|| {
        let names: Vec<&str> = ClassTag::ALL.iter().map(|c| c.name()).collect();
        Usage(format!(
            "--class: unknown class `{}` (expected one of {})",
            a.class,
            names.join(", ")
        ))
    })?;
    let opts = a.sampling.options()?;
    let report = match (class.dimension(), domain) {
        (1, Domain::Interval(iv)) => {
            if !f.is_univariate() {
                return Err(Usage(format!("class `{class}` takes a function of x only")));
            }
            check_1d(&f as &dyn Univariate, iv, class, &opts)?
        }
        (2, Domain::Rect(r)) => check_class(&f as &dyn Bivariate, r, class, &opts)?,
        (1, _) => return Err(Usage(format!("class `{class}` needs an interval a,b"))),
        _ => return Err(Usage(format!("class `{class}` needs a rectangle a,b,c,d"))),
    };
    let mut inputs = Map::new();
    inputs.insert("f".into(), json!(a.f));
    inputs.insert("domain".into(), to_value(&domain));
    inputs.insert("class".into(), to_value(&class));
    inputs.insert("sampling".into(), to_value(&opts));
    Ok(Outcome {
        body: emit(format, "check-class", inputs, &report),
        code: membership_code(report.verdict),
    })
}

fn chain_id(name: &str) -> Result<ChainId, Usage> {
    ChainId::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = ChainId::ALL.iter().map(|c| c.name()).collect();
        Usage(format!(
            "--chain: unknown chain `{name}` (expected one of {})",
            names.join(", ")
        ))
    })
}

fn verify_cmd(a: &VerifyArgs, format: Format) -> Result<Outcome, Usage> {
    let chain = chain_id(&a.chain)?;
    let f = parse_expr("f", &a.f)?;
    let g = a.g.as_deref().map(|t| parse_expr("g", t)).transpose()?;
    let domain = parse_domain(&a.domain)?;
    let opts = ChainOptions {
        quad: a.quad.config()?,
        check: a.sampling.options()?,
        preconditions: !a.no_preconditions,
        verbose: a.verbose,
    };
    let report = evaluate(chain, &f, g.as_ref(), domain, &opts)?;
    let mut inputs = Map::new();
    inputs.insert("chain".into(), to_value(&chain));
    inputs.insert("f".into(), json!(a.f));
    inputs.insert("g".into(), json!(a.g));
    inputs.insert("domain".into(), to_value(&domain));
    inputs.insert("quadrature".into(), to_value(&opts.quad));
    inputs.insert("sampling".into(), to_value(&opts.check));
    inputs.insert("preconditions".into(), json!(opts.preconditions));
    Ok(Outcome {
        body: emit(format, "verify", inputs, &report),
        code: chain_code(report.verdict),
    })
}

fn fuzz_cmd(a: &FuzzArgs, format: Format) -> Result<Outcome, Usage> {
    let chain = chain_id(&a.chain)?;
    let domain = a.domain.as_deref().map(parse_domain).transpose()?;
    let cfg = FuzzConfig {
        atom_count: a.atoms,
        coefficient_range: CoefficientRange {
            lo: a.coef_min,
            hi: a.coef_max,
        },
        domain,
        injections: !a.no_injections,
    };
    let opts = ChainOptions {
        quad: a.quad.config()?,
        check: a.sampling.options()?,
        preconditions: true,
        verbose: false,
    };
    let report = fuzz_chain(chain, &cfg, a.trials, a.seed, &opts)?;
    let mut inputs = Map::new();
    inputs.insert("chain".into(), to_value(&chain));
    inputs.insert("trials".into(), json!(a.trials));
    inputs.insert("seed".into(), json!(a.seed));
    inputs.insert("atoms".into(), json!(a.atoms));
    inputs.insert("coefficient_range".into(), to_value(&cfg.coefficient_range));
    inputs.insert("domain".into(), to_value(&report.domain));
    inputs.insert("injections".into(), json!(cfg.injections));
    inputs.insert("quadrature".into(), to_value(&opts.quad));
    inputs.insert("sampling".into(), to_value(&opts.check));
    let code = if report.violations.is_empty() && report.precondition_failures.is_empty() {
        EXIT_HOLDS
    } else {
        EXIT_VIOLATED
    };
    Ok(Outcome {
        body: emit(format, "fuzz", inputs, &report),
        code,
    })
}

fn audit_cmd(a: &AuditArgs, format: Format) -> Result<Outcome, Usage> {
    let iv = match parse_domain(&a.domain)? {
        Domain::Interval(iv) => iv,
        Domain::Rect(_) => return Err(Usage("--domain: expected an interval a,b".into())),
    };
    let opts = ChainOptions {
        quad: a.quad.config()?,
        check: a.sampling.options()?,
        preconditions: true,
        verbose: false,
    };
    let mut texts = vec!["1".to_string()];
    texts.extend(a.f.clone());
    let mut pairs = Vec::new();
    for text in texts {
        let f = parse_expr("f", &text)?;
        let (stated, corrected) = eval_coord_gl_symmetric(&f as &dyn Bivariate, iv, &opts)?;
        pairs.push(CorollaryPair {
            f: text,
            stated,
            corrected,
        });
    }
    let corrected: Vec<ChainVerdict> = pairs.iter().map(|p| p.corrected.verdict).collect();
    let code = if corrected.contains(&ChainVerdict::Violated) {
        EXIT_VIOLATED
    } else if corrected.contains(&ChainVerdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_HOLDS
    };
    let audit = CorollaryAudit {
        domain: iv.into(),
        pairs,
    };
    let mut inputs = Map::new();
    inputs.insert("domain".into(), to_value(&audit.domain));
    inputs.insert("f".into(), json!(a.f));
    inputs.insert("quadrature".into(), to_value(&opts.quad));
    inputs.insert("sampling".into(), to_value(&opts.check));
    Ok(Outcome {
        body: emit(format, "audit-corollary2", inputs, &audit),
        code,
    })
}

/// Sizes the global thread pool from `HADAMARD_LAB_THREADS`, if set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{text}`"))?;
    // A pool configured earlier in the same process is kept.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Runs the command line `args` (including the program name), writing the
/// report to `--out` or `stdout` and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{}", e.render());
                EXIT_HOLDS
            };
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(stderr, "error: {msg}");
        return EXIT_USAGE;
    }
    let outcome = match &cli.command {
        Command::CheckClass(a) => check_class_cmd(a, cli.format),
        Command::Verify(a) => verify_cmd(a, cli.format),
        Command::Fuzz(a) => fuzz_cmd(a, cli.format),
        Command::AuditCorollary2(a) => audit_cmd(a, cli.format),
    };
    match outcome {
        Ok(Outcome { body, code }) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, body.as_bytes()),
                None => stdout.write_all(body.as_bytes()),
            };
            match written {
                Ok(()) => code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: cannot write report: {e}");
                    EXIT_USAGE
                }
            }
        }
        Err(Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}
