//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 per-item failures in a
//! moment run, 3 a verification suite failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use momentlab_core::arith::is_admissible;
use momentlab_core::eigenform::FormKind;
use momentlab_core::moments::{error_exponent, MomentContext, MomentQuery, Rational, SweepSummary};
use momentlab_core::voronoi::VoronoiLab;

use crate::cache::CharacterCache;
use crate::coeff::{load_form, table_for_moments, FormSelector};
use crate::error::{AppError, AppResult};
use crate::report::{sibling, write_csv, write_json, write_jsonl, write_plot, MomentRow, MOMENT_COLUMNS};
use crate::sweep::{run_moments, sweep_queries, SummaryJson};
use crate::verify::{self, SuiteReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_ITEMS: u8 = 2;
pub const EXIT_SUITE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "momentlab", version, about = "Numerical experiments on the mixed moment of twisted L-functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Character-table cache directory [default: $MOMENTLAB_CACHE_DIR, else no cache].
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Output path [default: stdout for single reports, sweep.csv for sweeps].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the moment for one modulus or a range of moduli.
    Moment(MomentArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Print the exact error exponents for a Ramanujan exponent θ.
    Exponent(ExponentArgs),
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    /// Modulus q (must not be 2 mod 4).
    #[arg(long, conflicts_with = "q_range", required_unless_present = "q_range")]
    pub q: Option<u64>,
    /// Inclusive range lo:hi; inadmissible moduli and those not coprime to ab are skipped.
    #[arg(long, value_parser = parse_range)]
    pub q_range: Option<(u64, u64)>,
    #[arg(long, default_value_t = 1)]
    pub a: u64,
    #[arg(long, default_value_t = 1)]
    pub b: u64,
    /// builtin:delta or file:PATH (relative paths also searched in $MOMENTLAB_COEFF_DIR).
    #[arg(long, default_value = "builtin:delta")]
    pub form: String,
    /// Rows with |Im| > tol·(1 + |Re|) count as failures.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Also write the summary JSON and plot data (needs --q-range).
    #[arg(long, requires = "q_range")]
    pub sweep: bool,
    /// Fill the seconds column (makes output non-reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Orthogonality,
    Hecke,
    Weil,
    Afe,
    Voronoi,
    Coprime,
    Routes,
    Trend,
    Exponent,
    Aq,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: Suite,
    /// Largest modulus [orthogonality 60, coprime 200, routes 100].
    #[arg(long)]
    pub q_max: Option<u64>,
    /// Largest Kloosterman modulus (weil).
    #[arg(long, default_value_t = 500)]
    pub c_max: u64,
    /// Range bound for the Hecke and Deligne checks.
    #[arg(long, default_value_t = 10_000)]
    pub limit: u64,
    /// Voronoi grid; only `default` exists.
    #[arg(long, default_value = "default")]
    pub grid: String,
    /// Moduli for the trend sweep.
    #[arg(long, value_parser = parse_range, default_value = "30:300")]
    pub q_range: (u64, u64),
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    /// θ_f as p/q or a decimal, in [0, 1/2).
    #[arg(long, value_parser = parse_rational)]
    pub theta: Rational,
    /// a = q^α.
    #[arg(long, value_parser = parse_rational, default_value = "0")]
    pub alpha: Rational,
    /// b = q^β.
    #[arg(long, value_parser = parse_rational, default_value = "0")]
    pub beta: Rational,
}

pub fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("range '{s}' must be lo:hi"))?;
    let lo = lo.trim().parse::<u64>().map_err(|e| format!("bad lower end: {e}"))?;
    let hi = hi.trim().parse::<u64>().map_err(|e| format!("bad upper end: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Exact rational from `p/q`, an integer, or a terminating decimal.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    let bad = || format!("'{s}' is not a rational number");
    if let Some((p, q)) = s.split_once('/') {
        let p = p.trim().parse::<i128>().map_err(|_| bad())?;
        let q = q.trim().parse::<i128>().map_err(|_| bad())?;
        if q == 0 {
            return Err("zero denominator".into());
        }
        return Ok(Rational::new(p, q));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 30 || !frac.bytes().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let negative = int.starts_with('-');
    let whole = if int.is_empty() || int == "-" { 0 } else { int.parse::<i128>().map_err(|_| bad())? };
    let den = 10i128.pow(frac.len() as u32);
    let num = if frac.is_empty() { 0 } else { frac.parse::<i128>().map_err(|_| bad())? };
    let signed = if negative { -num } else { num };
    Ok(Rational::new(whole * den + signed, den))
}

/// Runs the command line `args` (including the program name), writing to
/// `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.common.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start {} worker threads: {e}", cli.common.jobs);
            return EXIT_CONFIG;
        }
    };
    // workers never touch `out`; the report is buffered and written here
    let mut buffer = Vec::new();
    let result = pool.install(|| dispatch(&cli, &mut buffer));
    let _ = out.write_all(&buffer);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Process entry point.
pub fn main_with_env() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    ExitCode::from(run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock()))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> AppResult<u8> {
    let cache = CharacterCache::from_config(cli.common.cache_dir.as_deref());
    match &cli.command {
        Command::Moment(args) => cmd_moment(args, &cli.common, &cache, out),
        Command::Verify(args) => cmd_verify(args, &cli.common, &cache, out),
        Command::Exponent(args) => cmd_exponent(args, out),
    }
}

fn io_err(e: std::io::Error) -> AppError {
    AppError::Io { path: PathBuf::from("<stdout>"), source: e }
}

pub fn cmd_moment(args: &MomentArgs, common: &Common, cache: &CharacterCache, out: &mut dyn Write) -> AppResult<u8> {
    let selector: FormSelector = args.form.parse()?;
    let queries = match (args.q, args.q_range) {
        (Some(q), _) => {
            if !is_admissible(q) {
                return Err(AppError::Config(format!(
                    "q = {q} is not admissible: primitive characters mod q exist only when q is not 2 mod 4"
                )));
            }
            vec![MomentQuery::new(q, args.a, args.b)?]
        }
        (None, Some((lo, hi))) => sweep_queries(lo, hi, args.a, args.b),
        (None, None) => return Err(AppError::Config("one of --q or --q-range is required".into())),
    };
    if queries.is_empty() {
        return Err(AppError::Config("no admissible modulus coprime to ab in the range".into()));
    }
    if !(args.tol > 0.0) {
        return Err(AppError::Config(format!("--tol must be positive, got {}", args.tol)));
    }
    let q_max = queries.iter().map(|q| q.q).max().unwrap_or(3);
    let kind = match &selector {
        FormSelector::Delta => FormKind::Holomorphic { weight: 12 },
        FormSelector::File(_) => load_form(&selector, 1)?.kind(),
    };
    let f = load_form(&selector, table_for_moments(kind, q_max)?)?;
    let ctx = MomentContext::new(f)?.with_sieve(q_max);
    let result = run_moments(&ctx, &queries, cache, args.timings);

    let mut failed = result.failures.len();
    for row in &result.rows {
        if row.brute_im.abs() > args.tol * (1.0 + row.brute_re.abs()) {
            failed += 1;
        }
    }
    let out_path = common.out.clone().or_else(|| args.sweep.then(|| PathBuf::from("sweep.csv")));
    match &out_path {
        Some(path) => {
            write_csv(path, &MOMENT_COLUMNS, &result.rows)?;
            write_jsonl(&sibling(path, ".jsonl"), &result.rows)?;
        }
        None => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(MOMENT_COLUMNS)?;
            for r in &result.rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| AppError::Config(e.to_string()))?;
            out.write_all(&bytes).map_err(io_err)?;
        }
    }
    for (q, e) in &result.failures {
        writeln!(out, "# failed (q,a,b) = ({},{},{}): {e}", q.q, q.a, q.b).map_err(io_err)?;
    }
    if args.sweep {
        let path = out_path.as_deref().unwrap_or(Path::new("sweep.csv"));
        write_sweep_extras(path, &result.rows, &result.points(), result.failures.len())?;
    }
    Ok(if failed > 0 { EXIT_ITEMS } else { EXIT_OK })
}

fn write_sweep_extras(path: &Path, rows: &[MomentRow], points: &[momentlab_core::moments::SweepPoint], failures: usize) -> AppResult<()> {
    if points.len() >= 3 {
        let summary = SweepSummary::from_points(points)?;
        write_json(&sibling(path, "-summary.json"), &SummaryJson::new(&summary, points.len(), failures))?;
    }
    let series = |f: fn(&MomentRow) -> f64| rows.iter().map(|r| (r.q as f64, f(r))).collect::<Vec<_>>();
    write_plot(&sibling(path, "-ratio_theorem.dat"), "q ratio_theorem", &series(|r| r.ratio_theorem))?;
    write_plot(&sibling(path, "-ratio_corollary.dat"), "q ratio_corollary", &series(|r| r.ratio_corollary))?;
    let dev: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.q as f64).ln(), (r.brute_re - r.main_theorem).abs().ln()))
        .filter(|p| p.1.is_finite())
        .collect();
    write_plot(&sibling(path, "-deviation.dat"), "log q, log |brute - main_theorem|", &dev)
}

pub fn run_suite(args: &VerifyArgs, cache: &CharacterCache) -> AppResult<SuiteReport> {
    match args.suite {
        Suite::Orthogonality => verify::orthogonality(args.q_max.unwrap_or(60), cache),
        Suite::Hecke => verify::hecke(args.limit),
        Suite::Weil => verify::weil(args.c_max),
        Suite::Afe => {
            let ctx = verify::delta_context(13)?;
            verify::afe_cross_route(&[5, 7, 13], ctx.form(), cache)
        }
        Suite::Voronoi => {
            if args.grid != "default" {
                return Err(AppError::Config(format!("unknown Voronoi grid '{}' (known: default)", args.grid)));
            }
            let mut lab = VoronoiLab::new(12)?;
            lab.reserve(36, 5, 10.0);
            verify::voronoi(&lab)
        }
        Suite::Coprime => verify::coprime_removal(args.q_max.unwrap_or(200), 1000),
        Suite::Routes => {
            let q_max = args.q_max.unwrap_or(100);
            verify::moment_routes(&verify::delta_context(q_max)?, q_max, cache)
        }
        Suite::Trend => {
            let (lo, hi) = args.q_range;
            Ok(verify::main_term_trend(&verify::delta_context(hi)?, lo, hi, cache)?.0)
        }
        Suite::Exponent => verify::exponents(),
        Suite::Aq => Ok(verify::aq(&verify::aq_form()?)?.0),
    }
}

pub fn cmd_verify(args: &VerifyArgs, common: &Common, cache: &CharacterCache, out: &mut dyn Write) -> AppResult<u8> {
    let report = run_suite(args, cache)?;
    for line in report.lines() {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    match &common.out {
        Some(path) => write_json(path, &report)?,
        None => writeln!(out, "{}", serde_json::to_string(&report)?).map_err(io_err)?,
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_SUITE })
}

pub fn cmd_exponent(args: &ExponentArgs, out: &mut dyn Write) -> AppResult<u8> {
    let e = error_exponent(args.theta, args.alpha, args.beta)?;
    // the moment error is O(q^{-q_exponent + ε})
    writeln!(
        out,
        "q_exponent {}\nunbalanced_exponent {}\nbilinear_exponent {}\neta {}\nbilinear_valid {}",
        e.q_exponent, e.unbalanced_exponent, e.bilinear_exponent, e.eta, e.bilinear_valid
    )
    .map_err(io_err)?;
    Ok(EXIT_OK)
}
