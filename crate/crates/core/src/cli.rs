//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::bivariate::{
    bivariate_design, bivariate_variance, g_scalar, gls_estimate, GlsProblem, Simplification,
    StressRectangle,
};
use crate::design::{guest_design, hoel_levine_design, rescale_design, Design, DesignRequest};
use crate::error::Error;
use crate::inference::{confidence_interval, NodeSamples, VarianceMode};
use crate::io;
use crate::poly::{Interval, NodeSet};
use crate::sim::{
    compare_designs, run_experiment, simulate_replicates, summarize, Noise, NoiseFamily,
    PolynomialModel,
};
use crate::variance::{crossover_c1, variance_at, Allocation, VarianceProfile};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "OPTDESIGN_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "optdesign",
    version,
    about = "Optimal interpolation and extrapolation designs for polynomial regression"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Build a design and print it as JSON.
    #[command(subcommand)]
    Design(DesignVerb),
    /// Variance profile of a design as CSV.
    Variance(VarianceArgs),
    /// Hoel-Levine/Guest crossover radius.
    Crossover(CrossoverArgs),
    /// Confidence interval for f(x) from node samples.
    Confidence(ConfidenceArgs),
    /// Monte Carlo check of a design (JSON lines, one report per design).
    Simulate(SimulateArgs),
    /// Bivariate designs on a stress rectangle and node-level GLS.
    #[command(subcommand)]
    Bivariate(BivariateVerb),
}

#[derive(Debug, Args)]
struct SizeArgs {
    /// Number of nodes (polynomial degree + 1).
    #[arg(long)]
    g: Option<usize>,
    /// Polynomial degree; alias for g - 1.
    #[arg(long, conflicts_with = "g")]
    degree: Option<usize>,
    /// Total number of observations.
    #[arg(long)]
    n: usize,
    /// Design interval as a,b (default -1,1).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Write output to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DesignVerb {
    /// Extrapolation design for a target outside the interval.
    #[command(allow_negative_numbers = true)]
    HoelLevine {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long)]
        target: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Minimax interpolation design.
    #[command(allow_negative_numbers = true)]
    Guest {
        #[command(flatten)]
        size: SizeArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Design from explicit nodes and frequencies.
    #[command(allow_negative_numbers = true)]
    Custom {
        #[arg(long, allow_hyphen_values = true)]
        nodes: String,
        #[arg(long)]
        frequencies: String,
        /// Interval containing the nodes (default: first to last node).
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct VarianceArgs {
    /// Design JSON file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Profile interval as a,b (default: the design interval).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Use continuous weights instead of rounded frequencies.
    #[arg(long)]
    weights: bool,
    /// Print the variance at a single point as JSON instead of a profile.
    #[arg(long)]
    at: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct CrossoverArgs {
    #[arg(long)]
    g: Option<usize>,
    #[arg(long, conflicts_with = "g")]
    degree: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Known,
    Pooled,
    PaperPooled,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ConfidenceArgs {
    /// Design JSON file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Samples CSV with columns node_index,replicate_index,y.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    x: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Pooled)]
    mode: ModeArg,
    /// Known noise variance (required with --mode known).
    #[arg(long)]
    sigma2: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    GumbelWeibull,
    Logistic,
}

impl From<NoiseArg> for NoiseFamily {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseFamily::Gaussian,
            NoiseArg::GumbelWeibull => NoiseFamily::GumbelWeibull,
            NoiseArg::Logistic => NoiseFamily::Logistic,
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// Design JSON file; repeat to compare designs under common random numbers.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Regression coefficients θ₀,θ₁,… of the true polynomial.
    #[arg(long, allow_hyphen_values = true)]
    coefficients: String,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    noise: NoiseArg,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Evaluation point.
    #[arg(long)]
    x: f64,
    #[arg(long, default_value_t = 10_000)]
    replications: usize,
    /// Confidence level for known-variance coverage (single design only).
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-replication estimates of the first design as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimplificationArg {
    General,
    SymmetricG1,
    RowSumG2,
}

#[derive(Debug, Subcommand)]
enum BivariateVerb {
    /// Chebyshev product design with α/β replications.
    #[command(allow_negative_numbers = true)]
    Design {
        #[arg(long)]
        g1: usize,
        #[arg(long)]
        g2: usize,
        #[arg(long, allow_hyphen_values = true)]
        x_interval: String,
        #[arg(long, allow_hyphen_values = true)]
        y_interval: String,
        /// Unstressed target point as x,y.
        #[arg(long, allow_hyphen_values = true)]
        u: String,
        #[arg(long)]
        m1: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Variance of a saved bivariate design at a point.
    #[command(allow_negative_numbers = true)]
    Variance {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        u: String,
        #[arg(long, default_value_t = 1.0)]
        sigma2eta2: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// GLS location estimate for one node from ordered responses.
    #[command(allow_negative_numbers = true)]
    Gls {
        /// Covariance CSV with a dim=n header.
        #[arg(long)]
        omega: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        responses: String,
        /// Second design column (expected order statistics); omit for the mean-only model.
        #[arg(long, allow_hyphen_values = true)]
        expected_z: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        sigma2eta2: f64,
        #[arg(long, value_enum, default_value_t = SimplificationArg::General)]
        simplification: SimplificationArg,
        #[command(flatten)]
        out: OutArg,
    },
}

enum CliError {
    Usage(String),
    Compute(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--{flag}: {t:?} is not a number")))
        })
        .collect()
}

fn parse_counts(flag: &str, text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("--{flag}: {t:?} is not a non-negative integer")))
        })
        .collect()
}

fn parse_pair(flag: &str, text: &str) -> CliResult<(f64, f64)> {
    match parse_list(flag, text)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(usage(format!(
            "--{flag}: expected two comma-separated numbers"
        ))),
    }
}

fn parse_interval(flag: &str, text: &str) -> CliResult<Interval> {
    let (a, b) = parse_pair(flag, text)?;
    Interval::new(a, b).map_err(|e| usage(format!("--{flag}: {e}")))
}

fn node_count(g: Option<usize>, degree: Option<usize>) -> CliResult<usize> {
    match (g, degree) {
        (Some(g), None) => Ok(g),
        (None, Some(d)) => Ok(d + 1),
        _ => Err(usage("exactly one of --g or --degree is required")),
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Compute(Error::Io(format!("{}: {e}", path.display()))))
}

fn emit(out: &OutArg, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match &out.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Compute(Error::Io(format!("{}: {e}", path.display())))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Compute(e.into())),
    }
}

/// Profile CSV for a design over `interval`.
pub fn emit_profile(
    d: &Design,
    sigma2: f64,
    interval: Interval,
    points: usize,
    alloc: Allocation,
) -> crate::error::Result<String> {
    let p = VarianceProfile::compute(d, sigma2, interval, points, alloc)?;
    Ok(io::profile_to_csv(&p))
}

fn run_design(verb: DesignVerb, stdout: &mut dyn Write) -> CliResult<()> {
    let (design, out) = match verb {
        DesignVerb::HoelLevine { size, target, out } => {
            let g = node_count(size.g, size.degree)?;
            let interval = match &size.interval {
                Some(s) => parse_interval("interval", s)?,
                None => Interval::unit(),
            };
            let req = DesignRequest::new(g, size.n, interval, Some(target))?;
            (hoel_levine_design(&req)?, out)
        }
        DesignVerb::Guest { size, out } => {
            let g = node_count(size.g, size.degree)?;
            let req = DesignRequest::unit(g, size.n, None)?;
            let d = guest_design(&req)?;
            let d = match &size.interval {
                Some(s) => rescale_design(&d, parse_interval("interval", s)?)?,
                None => d,
            };
            (d, out)
        }
        DesignVerb::Custom {
            nodes,
            frequencies,
            interval,
            out,
        } => {
            let nodes = parse_list("nodes", &nodes)?;
            let freqs = parse_counts("frequencies", &frequencies)?;
            let nodes = match &interval {
                Some(s) => NodeSet::new(nodes, parse_interval("interval", s)?)?,
                None => NodeSet::spanning(nodes)?,
            };
            (Design::from_frequencies(nodes, freqs)?, out)
        }
    };
    emit(&out, &io::design_to_json(&design), stdout)
}

fn load_design(path: &Path) -> CliResult<Design> {
    Ok(io::design_from_json(&read_file(path)?)?)
}

fn run_variance(args: VarianceArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let d = load_design(&args.input)?;
    let alloc = if args.weights {
        Allocation::Weights
    } else {
        Allocation::Frequencies
    };
    if let Some(x) = args.at {
        let v = variance_at(&d, args.sigma2, x, alloc)?;
        let text = format!(
            "{{\"x\":{},\"variance\":{}}}",
            io::format_real(x),
            io::format_real(v)
        );
        return emit(&args.out, &text, stdout);
    }
    if args.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let interval = match &args.interval {
        Some(s) => parse_interval("interval", s)?,
        None => d.interval(),
    };
    let csv = emit_profile(&d, args.sigma2, interval, args.points, alloc)?;
    emit(&args.out, &csv, stdout)
}

fn run_confidence(args: ConfidenceArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let d = load_design(&args.input)?;
    let file = fs::File::open(&args.samples)
        .map_err(|e| CliError::Compute(Error::Io(format!("{}: {e}", args.samples.display()))))?;
    let obs = io::read_samples_csv(file, d.g())?;
    let samples = NodeSamples::for_design(&d, obs)?;
    let mode = match (args.mode, args.sigma2) {
        (ModeArg::Known, Some(s2)) => VarianceMode::Known(s2),
        (ModeArg::Known, None) => return Err(usage("--mode known requires --sigma2")),
        (_, Some(_)) => return Err(usage("--sigma2 is only valid with --mode known")),
        (ModeArg::Pooled, None) => VarianceMode::Pooled,
        (ModeArg::PaperPooled, None) => VarianceMode::PaperPooled,
    };
    let ci = confidence_interval(&samples, args.x, args.level, mode)?;
    emit(&args.out, &io::confidence_to_json(&ci), stdout)
}

fn run_simulate(args: SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let designs = args
        .inputs
        .iter()
        .map(|p| load_design(p))
        .collect::<CliResult<Vec<_>>>()?;
    let coefficients = parse_list("coefficients", &args.coefficients)?;
    let model = PolynomialModel::new(coefficients, Noise::new(args.noise.into(), args.sigma)?);
    if args.level.is_some() && designs.len() > 1 {
        return Err(usage("--level applies to a single --in design"));
    }
    let mut lines = String::new();
    if designs.len() == 1 || args.dump.is_some() {
        let reps = simulate_replicates(
            &model,
            &designs[0],
            args.x,
            args.replications,
            args.level,
            args.seed,
        )?;
        if let Some(path) = &args.dump {
            fs::write(path, io::replicates_to_csv(&reps))
                .map_err(|e| CliError::Compute(Error::Io(format!("{}: {e}", path.display()))))?;
        }
        let first = summarize(&model, &designs[0], args.x, &reps, args.seed)?;
        lines.push_str(&io::report_to_json(&first));
        lines.push('\n');
        for d in &designs[1..] {
            let r = run_experiment(&model, d, args.x, args.replications, None, args.seed)?;
            lines.push_str(&io::report_to_json(&r));
            lines.push('\n');
        }
    } else {
        for r in compare_designs(&model, &designs, args.x, args.replications, args.seed)? {
            lines.push_str(&io::report_to_json(&r));
            lines.push('\n');
        }
    }
    emit(&args.out, &lines, stdout)
}

fn run_bivariate(verb: BivariateVerb, stdout: &mut dyn Write) -> CliResult<()> {
    match verb {
        BivariateVerb::Design {
            g1,
            g2,
            x_interval,
            y_interval,
            u,
            m1,
            alpha,
            beta,
            out,
        } => {
            let rect = StressRectangle::new(
                parse_interval("x-interval", &x_interval)?,
                parse_interval("y-interval", &y_interval)?,
            );
            let u = parse_pair("u", &u)?;
            let d = bivariate_design(u, &rect, g1, g2, m1, alpha, beta)?;
            emit(&out, &io::bivariate_to_json(&d), stdout)
        }
        BivariateVerb::Variance {
            input,
            u,
            sigma2eta2,
            out,
        } => {
            let d = io::bivariate_from_json(&read_file(&input)?)?;
            let u = parse_pair("u", &u)?;
            let v = bivariate_variance(&d, sigma2eta2, u)?;
            let method = match v.method {
                crate::bivariate::VarianceMethod::ClosedForm => "closed_form",
                crate::bivariate::VarianceMethod::DirectSum => "direct_sum",
            };
            let text = format!(
                "{{\"variance\":{},\"method\":\"{method}\",\"clamped\":{}}}",
                io::format_real(v.value),
                v.clamped
            );
            emit(&out, &text, stdout)
        }
        BivariateVerb::Gls {
            omega,
            responses,
            expected_z,
            sigma2eta2,
            simplification,
            out,
        } => {
            let file = fs::File::open(&omega)
                .map_err(|e| CliError::Compute(Error::Io(format!("{}: {e}", omega.display()))))?;
            let omega: DMatrix<f64> = io::read_omega_csv(file)?;
            let y = parse_list("responses", &responses)?;
            let problem = match expected_z {
                Some(z) => GlsProblem::location_scale(omega, y, parse_list("expected-z", &z)?)?,
                None => GlsProblem::mean_only(omega, y)?,
            };
            let fit = gls_estimate(&problem)?;
            let simp = match simplification {
                SimplificationArg::General => Simplification::General,
                SimplificationArg::SymmetricG1 => Simplification::SymmetricG1,
                SimplificationArg::RowSumG2 => Simplification::RowSumG2,
            };
            let g = g_scalar(sigma2eta2, &problem, simp)?;
            let mut text = format!("{{\"location\":{}", io::format_real(fit.location()));
            if let Some(s) = fit.scale() {
                text.push_str(&format!(",\"scale\":{}", io::format_real(s)));
            }
            text.push_str(&format!(",\"variance\":{}}}", io::format_real(g)));
            emit(&out, &text, stdout)
        }
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        // the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns the
/// process exit status: 0 on success, 2 on usage errors, 1 on computation errors.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = configure_threads().and_then(|_| match cli.verb {
        Verb::Design(v) => run_design(v, stdout),
        Verb::Variance(a) => run_variance(a, stdout),
        Verb::Crossover(a) => node_count(a.g, a.degree).and_then(|g| {
            let r = crossover_c1(g)?;
            emit(&a.out, &io::crossover_to_json(&r), stdout)
        }),
        Verb::Confidence(a) => run_confidence(a, stdout),
        Verb::Simulate(a) => run_simulate(a, stdout),
        Verb::Bivariate(v) => run_bivariate(v, stdout),
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(CliError::Compute(e)) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.name());
            1
        }
    }
}
