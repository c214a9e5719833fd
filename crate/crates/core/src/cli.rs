//! Command-line front end: single-β reports, β sweeps for plotting,
//! verification, bounds and asymptotics tables.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::critical::{
    asymptotic_critical, bounds_kz, critical_report, log_offset_grid, Beta, CriticalReport,
    ImprovedBound, Source, GENERIC_BETA_MIN,
};
use crate::error::{Error, Result};
use crate::numerics::Tolerances;
use crate::polytrope::{solve_polytrope, PolytropeIndex};
use crate::verify::{run_full_verification, THRESHOLDS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "vp-critical",
    version,
    about = "Critical constants of the relativistic Vlasov-Poisson system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Relative tolerance for every kernel.
    #[arg(long, global = true)]
    pub tol_rel: Option<f64>,

    /// Absolute tolerance for every kernel.
    #[arg(long, global = true)]
    pub tol_abs: Option<f64>,

    /// Step, iteration and evaluation budget for every kernel.
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,

    /// Emit a single JSON object instead of text/CSV.
    #[arg(long, global = true)]
    pub json: bool,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Linear,
    LogOffset,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First zero and boundary slope of the Lane-Emden polytrope of index n.
    Polytrope {
        #[arg(long, allow_negative_numbers = true)]
        n: f64,
        /// Dump `xi,theta,dtheta` at the integrator nodes.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Full report for one β (accepts `inf`).
    Critical {
        #[arg(long, allow_negative_numbers = true)]
        beta: Beta,
    },
    /// C_β table with bounds over a β grid.
    Sweep {
        #[arg(long, default_value_t = 1.51)]
        beta_min: f64,
        #[arg(long, default_value_t = 10.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Spacing::LogOffset)]
        spacing: Spacing,
    },
    /// Rebuild the minimizer and check every identity by quadrature.
    Verify {
        #[arg(long, allow_negative_numbers = true)]
        beta: Beta,
    },
    /// Exact vs near-3/2 asymptotic C_β.
    Asymptotics {
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        beta_max: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Lower, upper and improved upper bounds over a β grid.
    Bounds {
        #[arg(long, default_value_t = 1.5)]
        beta_min: f64,
        #[arg(long, default_value_t = 20.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Spacing::Linear)]
        spacing: Spacing,
    },
}

/// Validated β grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn new(beta_min: f64, beta_max: f64, points: usize, spacing: Spacing) -> Result<Self> {
        if !(beta_min >= 1.5) {
            return Err(Error::domain(format!(
                "beta_min must be >= 1.5, got {beta_min}"
            )));
        }
        if !(beta_max > beta_min && beta_max.is_finite()) {
            return Err(Error::domain(format!(
                "beta_max must be finite and exceed beta_min, got {beta_max}"
            )));
        }
        if points < 2 {
            return Err(Error::domain(format!(
                "need at least 2 grid points, got {points}"
            )));
        }
        Ok(Self {
            beta_min,
            beta_max,
            points,
            spacing,
        })
    }

    /// Grid values; with log-offset spacing a `beta_min` of exactly 3/2 is
    /// kept as its own first point ahead of the logarithmic part.
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi, k) = (self.beta_min, self.beta_max, self.points);
        match self.spacing {
            Spacing::Linear => (0..k)
                .map(|i| {
                    if i + 1 == k {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (k - 1) as f64
                    }
                })
                .collect(),
            Spacing::LogOffset if lo > 1.5 => log_offset_grid(lo, hi, k),
            Spacing::LogOffset => {
                let mut v = vec![1.5];
                v.extend(log_offset_grid(1.5 + (hi - 1.5) * 1e-4, hi, k - 1));
                v
            }
        }
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub n: f64,
    pub xi_n: Option<f64>,
    pub slope_product: f64,
    #[serde(rename = "R_beta")]
    pub r_beta: Option<f64>,
    #[serde(rename = "C_beta")]
    pub c_beta: f64,
    pub lower_kz: f64,
    pub upper_kz: f64,
    pub upper_improved: f64,
    pub source: Source,
}

impl SweepRow {
    fn from_report(beta: f64, r: &CriticalReport) -> Self {
        Self {
            beta,
            n: r.n,
            xi_n: r.xi_n,
            slope_product: r.slope_product,
            r_beta: r.r_beta,
            c_beta: r.critical_constant,
            lower_kz: r.lower_kz,
            upper_kz: r.upper_kz,
            upper_improved: r.upper_improved,
            source: r.source,
        }
    }
}

pub const SWEEP_HEADER: [&str; 10] = [
    "beta",
    "n",
    "xi_n",
    "slope_product",
    "R_beta",
    "C_beta",
    "lower_kz",
    "upper_kz",
    "upper_improved",
    "source",
];

/// Rows computed in parallel, returned in grid order.
pub fn sweep(grid: &GridSpec, tol: &Tolerances) -> Result<Vec<SweepRow>> {
    let improved = ImprovedBound::with_default_grid()?;
    grid.values()
        .par_iter()
        .map(|&b| {
            critical_report(Beta::Finite(b), tol, &improved).map(|r| SweepRow::from_report(b, &r))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub beta: f64,
    #[serde(rename = "C_exact")]
    pub c_exact: f64,
    #[serde(rename = "C_asymptotic")]
    pub c_asymptotic: f64,
    pub rel_gap: f64,
}

pub const ASYMPTOTICS_HEADER: [&str; 4] = ["beta", "C_exact", "C_asymptotic", "rel_gap"];

/// Endpoint row at 3/2, then exact-pipeline rows log-spaced on
/// `[GENERIC_BETA_MIN, beta_max]`.
pub fn asymptotics(beta_max: f64, points: usize, tol: &Tolerances) -> Result<Vec<AsymptoticsRow>> {
    if !(beta_max > GENERIC_BETA_MIN && beta_max.is_finite()) {
        return Err(Error::domain(format!(
            "beta_max must be finite and exceed {GENERIC_BETA_MIN}, got {beta_max}"
        )));
    }
    if points < 2 {
        return Err(Error::domain(format!(
            "need at least 2 points, got {points}"
        )));
    }
    let improved = ImprovedBound::with_default_grid()?;
    let mut betas = vec![1.5];
    betas.extend(log_offset_grid(GENERIC_BETA_MIN, beta_max, points - 1));
    betas
        .par_iter()
        .map(|&b| {
            let beta = Beta::Finite(b);
            let exact = if b == 1.5 {
                crate::critical::critical_at_three_halves()
            } else {
                critical_report(beta, tol, &improved)?.critical_constant
            };
            let asym = asymptotic_critical(beta)?;
            Ok(AsymptoticsRow {
                beta: b,
                c_exact: exact,
                c_asymptotic: asym,
                rel_gap: (asym - exact) / exact,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub beta: f64,
    pub lower_kz: f64,
    pub upper_kz: f64,
    pub upper_improved: f64,
}

pub const BOUNDS_HEADER: [&str; 4] = ["beta", "lower_kz", "upper_kz", "upper_improved"];

#[derive(Debug, Clone, Serialize)]
pub struct BoundsTable {
    pub beta_star: f64,
    pub plateau: f64,
    pub rows: Vec<BoundsRow>,
}

pub fn bounds_table(grid: &GridSpec) -> Result<BoundsTable> {
    let improved = ImprovedBound::with_default_grid()?;
    let rows = grid
        .values()
        .into_iter()
        .map(|b| {
            let kz = bounds_kz(Beta::Finite(b))?;
            Ok(BoundsRow {
                beta: b,
                lower_kz: kz.lower,
                upper_kz: kz.upper,
                upper_improved: improved.eval(Beta::Finite(b)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsTable {
        beta_star: improved.beta_star(),
        plateau: improved.plateau(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolytropeSummary {
    pub n: f64,
    pub xi_n: f64,
    pub slope: f64,
    pub slope_product: f64,
}

/// `x` to `digits` significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros dropped.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -5 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_num(x: f64) -> String {
    format_sig(x, 12)
}

fn csv_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "inf".to_string(), csv_num)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                csv_num(r.beta),
                csv_num(r.n),
                csv_opt(r.xi_n),
                csv_num(r.slope_product),
                csv_opt(r.r_beta),
                csv_num(r.c_beta),
                csv_num(r.lower_kz),
                csv_num(r.upper_kz),
                csv_num(r.upper_improved),
                r.source.to_string(),
            ]
        }),
    )
}

pub fn asymptotics_csv(rows: &[AsymptoticsRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &ASYMPTOTICS_HEADER,
        rows.iter().map(|r| {
            vec![
                csv_num(r.beta),
                csv_num(r.c_exact),
                csv_num(r.c_asymptotic),
                csv_num(r.rel_gap),
            ]
        }),
    )
}

pub fn bounds_csv(rows: &[BoundsRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &BOUNDS_HEADER,
        rows.iter().map(|r| {
            vec![
                csv_num(r.beta),
                csv_num(r.lower_kz),
                csv_num(r.upper_kz),
                csv_num(r.upper_improved),
            ]
        }),
    )
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn text_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

fn critical_text(r: &CriticalReport) -> Vec<u8> {
    let lines = [
        format!("beta            = {}", r.beta),
        format!("source          = {}", r.source),
        format!("n               = {}", r.n),
        format!("c_beta          = {}", r.c_beta),
        format!("alpha_n         = {}", r.alpha_n),
        format!(
            "ln_A_n          = {}",
            r.ln_a_n.map_or("-inf".into(), |v| v.to_string())
        ),
        format!("R_beta          = {}", text_opt(r.r_beta)),
        format!("xi_n            = {}", text_opt(r.xi_n)),
        format!(
            "slope           = {}",
            r.slope.map_or("0".into(), |v| v.to_string())
        ),
        format!("slope_product   = {}", r.slope_product),
        format!("C_beta          = {}", r.critical_constant),
        format!("lower_kz        = {}", r.lower_kz),
        format!("upper_kz        = {}", r.upper_kz),
        format!("upper_improved  = {}", r.upper_improved),
    ];
    (lines.join("\n") + "\n").into_bytes()
}

fn tolerances(cli: &Cli) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    if let Some(r) = cli.tol_rel {
        tol = tol.with_rel(r);
    }
    if let Some(a) = cli.tol_abs {
        tol = tol.with_abs(a);
    }
    if let Some(m) = cli.max_steps {
        tol.max_steps = m;
    }
    tol.validate()?;
    Ok(tol)
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => File::create(path)?.write_all(bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

/// Runs one command; returns the exit code on success paths that still
/// signal failure (verification).
fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let tol = tolerances(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Polytrope { n, profile } => {
            let p = solve_polytrope(PolytropeIndex::new(*n)?, &tol)?;
            if let Some(path) = profile {
                let rows = p.breakpoints().into_iter().map(|xi| {
                    let s = p.state(xi).unwrap_or([0.0, p.slope_at_zero()]);
                    vec![csv_num(xi), csv_num(s[0]), csv_num(s[1])]
                });
                File::create(path)?.write_all(&csv_bytes(&["xi", "theta", "dtheta"], rows)?)?;
            }
            let summary = PolytropeSummary {
                n: p.n(),
                xi_n: p.xi_n(),
                slope: p.slope_at_zero(),
                slope_product: p.slope_product(),
            };
            let bytes = if cli.json {
                json_bytes(&summary)?
            } else {
                format!(
                    "n             = {}\nxi_n          = {}\nslope         = {}\nslope_product = {}\n",
                    summary.n, summary.xi_n, summary.slope, summary.slope_product
                )
                .into_bytes()
            };
            emit(out, stdout, &bytes)?;
        }
        Command::Critical { beta } => {
            let improved = ImprovedBound::with_default_grid()?;
            let r = critical_report(*beta, &tol, &improved)?;
            let bytes = if cli.json {
                json_bytes(&r)?
            } else {
                critical_text(&r)
            };
            emit(out, stdout, &bytes)?;
        }
        Command::Sweep {
            beta_min,
            beta_max,
            points,
            spacing,
        } => {
            let grid = GridSpec::new(*beta_min, *beta_max, *points, *spacing)?;
            let rows = sweep(&grid, &tol)?;
            let bytes = if cli.json {
                json_bytes(&serde_json::json!({ "rows": rows }))?
            } else {
                sweep_csv(&rows)?
            };
            emit(out, stdout, &bytes)?;
        }
        Command::Verify { beta } => {
            let rep = run_full_verification(*beta, &tol)?;
            let bytes = if cli.json {
                json_bytes(&rep)?
            } else {
                let mut s = format!("beta = {}\n", rep.beta);
                for (name, _) in THRESHOLDS {
                    let v = rep.residual(name).unwrap_or(f64::NAN);
                    let t = rep.thresholds[name];
                    let verdict = if v < t { "PASS" } else { "FAIL" };
                    s += &format!("{name:<10} {v:<24e} < {t:e}  {verdict}\n");
                }
                s += &format!(
                    "closure C_beta = {} (pipeline {})\n",
                    rep.closure_critical, rep.critical_constant
                );
                s += &format!("pass = {}\n", rep.pass);
                s.into_bytes()
            };
            emit(out, stdout, &bytes)?;
            if !rep.pass {
                writeln!(stderr, "verification failed: {}", rep.failures().join(", "))?;
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
        Command::Asymptotics { beta_max, points } => {
            let rows = asymptotics(*beta_max, *points, &tol)?;
            let bytes = if cli.json {
                json_bytes(&serde_json::json!({ "rows": rows }))?
            } else {
                asymptotics_csv(&rows)?
            };
            emit(out, stdout, &bytes)?;
        }
        Command::Bounds {
            beta_min,
            beta_max,
            points,
            spacing,
        } => {
            let grid = GridSpec::new(*beta_min, *beta_max, *points, *spacing)?;
            let table = bounds_table(&grid)?;
            let bytes = if cli.json {
                json_bytes(&table)?
            } else {
                bounds_csv(&table.rows)?
            };
            emit(out, stdout, &bytes)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main_with_std() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(1.0, 12), "1");
        assert_eq!(format_sig(0.242754833166634, 12), "0.242754833167");
        assert_eq!(format_sig(1234.5, 12), "1234.5");
        assert_eq!(format_sig(1.5e-7, 12), "1.5e-7");
        assert_eq!(format_sig(-2.5e20, 12), "-2.5e20");
        assert_eq!(format_sig(999999999999.9, 12), "1e12");
        assert_eq!(format_sig(f64::INFINITY, 12), "inf");
    }

    #[test]
    fn grid_specs() {
        assert!(GridSpec::new(1.4, 2.0, 10, Spacing::Linear).is_err());
        assert!(GridSpec::new(2.0, 2.0, 10, Spacing::Linear).is_err());
        assert!(GridSpec::new(1.6, 2.0, 1, Spacing::Linear).is_err());
        let g = GridSpec::new(1.51, 10.0, 100, Spacing::LogOffset)
            .unwrap()
            .values();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1.51);
        assert_eq!(g[99], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let g = GridSpec::new(1.5, 3.0, 20, Spacing::LogOffset)
            .unwrap()
            .values();
        assert_eq!(g[0], 1.5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let g = GridSpec::new(2.0, 4.0, 3, Spacing::Linear)
            .unwrap()
            .values();
        assert_eq!(g, vec![2.0, 3.0, 4.0]);
    }
}
