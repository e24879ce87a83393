//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when any check fails, 2 on usage or input
//! errors. Errors go to stderr as one line, `error: kind=<kind> message=<text>`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::extremal::ExtremalSum;
use crate::grid::{GridDensity, GridSpec};
use crate::oracle1d::oracle1d_sum_of_uniforms;
use crate::rearrange::symmetric_decreasing_rearrangement;
use crate::report::{reports_to_csv, VerificationReport};
use crate::sbd::{fmt_real, format_density, read_density_file, read_mask_file, write_file_atomic};
use crate::sumdist::{convolve_with, sum_density_cell_exact, CoefficientMatrix, ConvolutionMethod};
use crate::verify::{
    check_bll, default_resolution, equality_case_reports, generate_bounded_density,
    monte_carlo_sum_prob, run_bll_sweep, run_bridge_sweep, run_lemma_sweep, run_monte_carlo_sweep,
    run_sweep, RandomDensitySpec, Shape, SweepCheck, SweepConfig, CONVOLUTION_TOLERANCE,
};

/// Name of the optional thread-count variable. It only sizes the worker
/// pool; results are identical for every value.
pub const THREADS_ENV: &str = "SMALLBALL_THREADS";

const RESOLUTION_HELP: &str = "Cells per axis across the smallest extremal ball \
    (default: 512 for d=1, 128 for d=2, 32 for d>=3)";

#[derive(Debug, Parser)]
#[command(
    name = "smallball",
    version,
    about = "Small-ball probabilities and maximum densities of sums of bounded-density random vectors",
    after_help = "Default resolutions: 512 cells per axis for d=1, 128 for d=2, 32 for d>=3.\n\
                  Set SMALLBALL_THREADS to size the worker pool; it never changes results."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random density bounded by K
    Gen(GenArgs),
    /// Symmetric decreasing rearrangement of a density
    Rearrange(RearrangeArgs),
    /// Density of the sum of independent variables
    Convolve(ConvolveArgs),
    /// Extremal bound for a set volume or for the maximum density
    Bound(BoundArgs),
    /// Seeded verification sweeps, written as CSV
    #[command(subcommand)]
    Check(CheckCommand),
    /// Monte Carlo estimate of P(X_1 + ... + X_n in S)
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Sbd,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Auto,
    Direct,
    Fft,
}

impl From<Method> for ConvolutionMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => ConvolutionMethod::Auto,
            Method::Direct => ConvolutionMethod::Direct,
            Method::Fft => ConvolutionMethod::Fft,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    /// Bound on the density
    #[arg(long, allow_hyphen_values = true)]
    pub k: f64,
    /// Cells per axis
    #[arg(long, default_value_t = 32)]
    pub cells: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
    /// multi-bump, random-cells or indicator-union
    #[arg(long, default_value = "random-cells")]
    pub shape: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Sbd)]
    pub format: Format,
    /// Output path (stdout when absent)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RearrangeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Sbd)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvolveArgs {
    /// Density files, one per variable (repeat the flag)
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    /// Exact cell averages of the continuous sum instead of the lattice sum
    #[arg(long)]
    pub cell_exact: bool,
    #[arg(long, value_enum, default_value_t = Format::Sbd)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub d: usize,
    /// Density bound of one variable (repeat once per variable)
    #[arg(long = "k", required = true, allow_hyphen_values = true)]
    pub ks: Vec<f64>,
    /// Volume of the set; without it the maximum density is bounded
    #[arg(long, allow_hyphen_values = true)]
    pub set_volume: Option<f64>,
    #[arg(long, help = RESOLUTION_HELP)]
    pub resolution: Option<usize>,
    /// Compare with the exact piecewise-polynomial value (d=1 only)
    #[arg(long)]
    pub exact_check: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Number of variables
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// K per variable; a single value applies to all, none draws from {0.5, 1, 4}
    #[arg(long = "k", allow_hyphen_values = true)]
    pub ks: Vec<f64>,
    /// Number of seeded instances
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1)]
    pub base_seed: u64,
    #[arg(long, help = RESOLUTION_HELP)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1)]
    pub base_seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BllArgs {
    /// Function files, one per coefficient row (random sweep when absent)
    #[arg(long = "input", requires = "coefficients")]
    pub inputs: Vec<PathBuf>,
    /// Coefficient matrix file: `k n`, then k rows of n reals
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
    #[command(flatten)]
    pub sweep: SeedArgs,
}

#[derive(Debug, Args)]
pub struct EqualityArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "k", required = true, allow_hyphen_values = true)]
    pub ks: Vec<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub set_volume: f64,
    #[arg(long, help = RESOLUTION_HELP)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Small-ball inequality on random instances
    Theorem1(SweepArgs),
    /// Maximum-density inequality on random instances
    Corollary(SweepArgs),
    /// Rearrangement inequality for multilinear integrals, by brute force
    Bll(BllArgs),
    /// Multilinear integral against the small-ball probability
    Bridge(SeedArgs),
    /// Midpoint decomposition of non-extremal densities
    Lemma(SeedArgs),
    /// Monte Carlo against the grid small-ball probability
    Montecarlo(MonteCarloArgs),
    /// Both inequalities at the extremal configuration
    Equality(EqualityArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Mask file for the set S
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// What a successful command produced.
struct Outcome {
    text: String,
    output: Option<PathBuf>,
    all_passed: bool,
}

impl Outcome {
    fn data(text: String, output: Option<PathBuf>) -> Self {
        Self {
            text,
            output,
            all_passed: true,
        }
    }

    fn reports(reports: &[VerificationReport], output: Option<PathBuf>) -> Self {
        Self {
            text: reports_to_csv(reports),
            output,
            all_passed: reports.iter().all(|r| r.passed),
        }
    }
}

fn usage(flag: &str, message: impl std::fmt::Display) -> Error {
    Error::Precondition(format!("--{flag}: {message}"))
}

fn positive_real(flag: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(usage(
            flag,
            format!("must be a positive finite number, got {x}"),
        ))
    }
}

fn validate_d(d: usize) -> Result<()> {
    if d == 0 {
        return Err(usage("d", "must be at least 1"));
    }
    Ok(())
}

fn validate_ks(ks: &[f64]) -> Result<()> {
    ks.iter().try_for_each(|&k| positive_real("k", k))
}

fn resolution_for(d: usize, r: Option<usize>) -> Result<usize> {
    let r = r.unwrap_or_else(|| default_resolution(d));
    if r < crate::extremal::MIN_RESOLUTION {
        return Err(usage(
            "resolution",
            format!(
                "must be at least {}, got {r}",
                crate::extremal::MIN_RESOLUTION
            ),
        ));
    }
    Ok(r)
}

fn density_csv(f: &GridDensity) -> String {
    let d = f.spec().dim();
    let mut out: String = (0..d).map(|a| format!("x{a},")).collect();
    out.push_str("value\n");
    let mut x = vec![0.0; d];
    for (i, v) in f.values().iter().enumerate() {
        f.spec().cell_center_into(i, &mut x);
        for c in &x {
            out.push_str(&fmt_real(*c));
            out.push(',');
        }
        out.push_str(&fmt_real(*v));
        out.push('\n');
    }
    out
}

fn render_density(f: &GridDensity, format: Format) -> String {
    match format {
        Format::Sbd => format_density(f),
        Format::Csv => density_csv(f),
    }
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<GridDensity>> {
    paths.iter().map(read_density_file).collect()
}

fn sweep_config(a: &SweepArgs) -> Result<SweepConfig> {
    validate_d(a.d)?;
    if a.n == 0 {
        return Err(usage("n", "must be at least 1"));
    }
    if a.seeds == 0 {
        return Err(usage("seeds", "must be at least 1"));
    }
    validate_ks(&a.ks)?;
    let ks = match a.ks.len() {
        0 => None,
        1 => Some(vec![a.ks[0]; a.n]),
        m if m == a.n => Some(a.ks.clone()),
        m => return Err(usage("k", format!("given {m} times for n = {}", a.n))),
    };
    Ok(SweepConfig {
        d: a.d,
        n: a.n,
        ks,
        count: a.seeds,
        base_seed: a.base_seed,
        resolution: resolution_for(a.d, a.resolution)?,
    })
}

fn gen(a: GenArgs) -> Result<Outcome> {
    validate_d(a.d)?;
    positive_real("k", a.k)?;
    if a.cells == 0 {
        return Err(usage("cells", "must be at least 1"));
    }
    if !(a.lo < a.hi) {
        return Err(usage(
            "hi",
            format!("must exceed --lo ({} >= {})", a.lo, a.hi),
        ));
    }
    let shape: Shape = a.shape.parse().map_err(|_| {
        usage(
            "shape",
            format!(
                "unknown shape {:?}; use multi-bump, random-cells or indicator-union",
                a.shape
            ),
        )
    })?;
    let f = generate_bounded_density(&RandomDensitySpec {
        k: a.k,
        spec: GridSpec::cube(a.d, a.lo, a.hi, a.cells)?,
        seed: a.seed,
        shape,
    })?;
    Ok(Outcome::data(render_density(&f, a.format), a.output))
}

fn rearrange(a: RearrangeArgs) -> Result<Outcome> {
    let f = read_density_file(&a.input)?;
    let g = symmetric_decreasing_rearrangement(&f)?;
    Ok(Outcome::data(render_density(&g, a.format), a.output))
}

fn convolve(a: ConvolveArgs) -> Result<Outcome> {
    let fs = read_all(&a.inputs)?;
    let sum = if a.cell_exact {
        sum_density_cell_exact(&fs)?
    } else {
        let mut acc = fs[0].clone();
        for f in &fs[1..] {
            acc = convolve_with(&acc, f, a.method.into())?;
        }
        acc
    };
    Ok(Outcome::data(render_density(&sum, a.format), a.output))
}

/// Exact `P(|U_1 + ... + U_n| <= v/2)` or the peak density, for d = 1.
fn oracle_value(ks: &[f64], set_volume: Option<f64>) -> Result<f64> {
    let widths: Vec<f64> = ks.iter().map(|k| 1.0 / k).collect();
    let p = oracle1d_sum_of_uniforms(&widths)?;
    Ok(match set_volume {
        Some(v) => p.integral_between(-v / 2.0, v / 2.0),
        None => p.eval(0.0),
    })
}

fn bound(a: BoundArgs) -> Result<Outcome> {
    validate_d(a.d)?;
    validate_ks(&a.ks)?;
    if let Some(v) = a.set_volume {
        positive_real("set-volume", v)?;
    }
    if a.exact_check && a.d != 1 {
        return Err(usage(
            "exact-check",
            "the exact oracle exists only for --d 1",
        ));
    }
    let resolution = resolution_for(a.d, a.resolution)?;
    let extremal = ExtremalSum::new(a.d, &a.ks, resolution)?;
    let (quantity, b) = match a.set_volume {
        Some(v) => ("prob", extremal.prob_bound(v)?),
        None => ("density", extremal.density_bound()),
    };
    let mut text = String::from("quantity,d,n,resolution,value,budget\n");
    text.push_str(&format!(
        "{quantity},{},{},{resolution},{},{}\n",
        a.d,
        a.ks.len(),
        fmt_real(b.value),
        fmt_real(b.budget)
    ));
    let mut all_passed = true;
    if a.exact_check {
        let exact = oracle_value(&a.ks, a.set_volume)?;
        let r = VerificationReport::two_sided(
            "exact-check",
            b.value,
            exact,
            b.budget + CONVOLUTION_TOLERANCE,
            format!("{quantity} against the exact piecewise-polynomial value"),
        );
        all_passed = r.passed;
        text.push_str(&reports_to_csv(&[r]));
    }
    Ok(Outcome {
        text,
        output: a.output,
        all_passed,
    })
}

fn seeds_of(a: &SeedArgs) -> Result<usize> {
    if a.seeds == 0 {
        return Err(usage("seeds", "must be at least 1"));
    }
    Ok(a.seeds)
}

fn check(c: CheckCommand) -> Result<Outcome> {
    match c {
        CheckCommand::Theorem1(a) => {
            let cfg = sweep_config(&a)?;
            Ok(Outcome::reports(
                &run_sweep(&cfg, SweepCheck::Theorem1)?,
                a.output,
            ))
        }
        CheckCommand::Corollary(a) => {
            let cfg = sweep_config(&a)?;
            Ok(Outcome::reports(
                &run_sweep(&cfg, SweepCheck::Corollary)?,
                a.output,
            ))
        }
        CheckCommand::Bll(a) => {
            let reports = match &a.coefficients {
                Some(path) => {
                    let m = CoefficientMatrix::parse(&std::fs::read_to_string(path)?)?;
                    vec![check_bll(&read_all(&a.inputs)?, &m)?]
                }
                None => run_bll_sweep(seeds_of(&a.sweep)?, a.sweep.base_seed)?,
            };
            Ok(Outcome::reports(&reports, a.sweep.output))
        }
        CheckCommand::Bridge(a) => {
            let reports = run_bridge_sweep(seeds_of(&a)?, a.base_seed)?;
            Ok(Outcome::reports(&reports, a.output))
        }
        CheckCommand::Lemma(a) => {
            let reports = run_lemma_sweep(seeds_of(&a)?, a.base_seed)?;
            Ok(Outcome::reports(&reports, a.output))
        }
        CheckCommand::Montecarlo(a) => {
            if a.samples == 0 {
                return Err(usage("samples", "must be at least 1"));
            }
            let cfg = sweep_config(&a.sweep)?;
            let reports = run_monte_carlo_sweep(&cfg, a.samples)?;
            Ok(Outcome::reports(&reports, a.sweep.output))
        }
        CheckCommand::Equality(a) => {
            validate_d(a.d)?;
            validate_ks(&a.ks)?;
            positive_real("set-volume", a.set_volume)?;
            let resolution = resolution_for(a.d, a.resolution)?;
            let reports = equality_case_reports(a.d, &a.ks, a.set_volume, resolution)?;
            Ok(Outcome::reports(&reports, a.output))
        }
    }
}

fn sample(a: SampleArgs) -> Result<Outcome> {
    if a.samples == 0 {
        return Err(usage("samples", "must be at least 1"));
    }
    let fs = read_all(&a.inputs)?;
    let mask = read_mask_file(&a.mask)?;
    let (p, stderr) = monte_carlo_sum_prob(&fs, &mask, a.samples, a.seed)?;
    let text = format!(
        "estimate,stderr,samples,seed\n{},{},{},{}\n",
        fmt_real(p),
        fmt_real(stderr),
        a.samples,
        a.seed
    );
    Ok(Outcome::data(text, a.output))
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Rearrange(a) => rearrange(a),
        Command::Convolve(a) => convolve(a),
        Command::Bound(a) => bound(a),
        Command::Check(c) => check(c),
        Command::Sample(a) => sample(a),
    }
}

fn emit(text: &str, output: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => write_file_atomic(path, text),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// One-line diagnostic for `err`.
pub fn error_line(kind: &str, message: &str) -> String {
    let flat: String = message
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    format!("error: kind={kind} message={}", flat.trim())
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            let _ = writeln!(stderr, "{}", error_line("usage", first));
            return 2;
        }
    };
    match execute(cli).and_then(|o| {
        emit(&o.text, o.output.as_deref(), stdout)?;
        Ok(o.all_passed)
    }) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), &e.to_string()));
            2
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            Error::Precondition(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Precondition(format!("cannot size worker pool: {e}")))
}
