//! `gecp`: batch driver for the random-channel laboratory.
//!
//! Every subcommand is a pure function of its flags and the seed; when
//! `--seed` is omitted one is drawn and printed to stderr so the run stays
//! replayable. Reports go to `--out` (default: stdout, JSON).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gecp::channels::ChannelKind;
use gecp::ensembles::{sample_kraus_family, EnsembleFlavor, SeedSpec};
use gecp::experiments::{
    self, bell_pair_experiment, convergence_study, estimate_mopn, moe_experiment,
    validate_optimal_shape, EmitFormat, ExperimentPlan, Report, SCHEMA_VERSION,
};
use gecp::freelimits::{
    limit_mopn, minimal_moe_violating_k, minimal_violating_k, moe_gap, multiplicativity_verdict,
};
use gecp::matrixkit::SchattenIndex;
use gecp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gecp",
    version,
    about = "Random CP maps from GUE/Ginibre ensembles: limits, violation tables, \
             Monte Carlo convergence, and oracle self-tests",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Gue,
    Ge,
}

impl From<FlavorArg> for EnsembleFlavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Gue => EnsembleFlavor::Gue,
            FlavorArg::Ge => EnsembleFlavor::Ginibre,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for EmitFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => EmitFormat::Json,
            FormatArg::Csv => EmitFormat::Csv,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: FormatArg,
}

#[derive(Args)]
struct PlanArgs {
    /// TOML plan file; flags below override nothing when present
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Number of Kraus operators
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Matrix dimensions to sample, ascending (comma separated)
    #[arg(long = "n-grid", value_delimiter = ',', default_value = "100,200")]
    n_grid: Vec<usize>,
    /// Schatten indices (comma separated; `inf` accepted)
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    p: Vec<SchattenIndex>,
    /// Independent trials per dimension
    #[arg(long, default_value_t = 4)]
    trials: usize,
    /// Master seed; omitted means draw one and print it
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble flavor
    #[arg(long, value_enum, default_value = "gue")]
    flavor: FlavorArg,
    /// Rectifier spectral margin in (0, 1)
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
}

impl PlanArgs {
    fn resolve(&self) -> Result<ExperimentPlan> {
        let mut plan = match &self.plan {
            Some(path) => load_plan(path)?,
            None => {
                let mut plan =
                    ExperimentPlan::new(self.flavor.into(), self.k, self.n_grid.clone());
                plan.p_list = self.p.clone();
                plan.trials = self.trials;
                plan.epsilon = self.epsilon;
                plan.master_seed = self.seed;
                plan
            }
        };
        if let Some(seed) = self.seed {
            plan.master_seed = Some(seed);
        }
        if plan.master_seed.is_none() {
            let seed: u64 = rand::random();
            eprintln!("seed: {seed}");
            plan.master_seed = Some(seed);
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form limiting MOpN bounds and the multiplicativity verdict
    Limits {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "inf")]
        p: SchattenIndex,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Stream multiplicativity margins over a range of k
    ViolationTable {
        #[arg(long, default_value = "inf")]
        p: SchattenIndex,
        #[arg(long = "k-min", default_value_t = 2)]
        k_min: usize,
        #[arg(long = "k-max", default_value_t = 100_000)]
        k_max: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Additivity gap for the paired channel and its first violating k
    MoeGap {
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Finite-n observables against their analytic limits
    Convergence {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Pair-channel output on the Bell state vs its limit
    BellPair {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Minimum output entropy statistics for the rectified channel
    Moe {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Alternating dual-ascent MOpN estimate for one sampled family
    MopnEstimate {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value = "inf")]
        p: SchattenIndex,
        /// Independent restarts (minimum 4)
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "gue")]
        flavor: FlavorArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Self-test of the non-crossing-partition oracle identities
    NcVerify {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Brute-force validation of the two-level optimal eigenvalue shape
    ShapeCheck {
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Dual exponents q > 1 to check (comma separated)
        #[arg(long, value_delimiter = ',', default_value = "3,4")]
        q: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Loads and validates a TOML plan file.
fn load_plan(path: &std::path::Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path)?;
    let plan: ExperimentPlan = toml::from_str(&text).map_err(|e| {
        // toml errors carry line/column spans in their Display output
        Error::PlanParse(format!("{}: {e}", path.display()))
    })?;
    plan.validate()?;
    Ok(plan)
}

fn write_output(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, body)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_output(out, &body)
}

fn emit_report(report: &Report, output: &OutputArgs) -> Result<()> {
    match &output.out {
        Some(path) => experiments::emit(report, output.format.into(), path),
        None => {
            let mut stdout = std::io::stdout().lock();
            experiments::emit_to(report, output.format.into(), &mut stdout)
        }
    }
}

#[derive(Serialize)]
struct LimitsOutput {
    schema_version: u32,
    k: usize,
    p: SchattenIndex,
    limit_mopn: f64,
    verdict: gecp::ViolationReport,
}

#[derive(Serialize)]
struct MoeGapOutput {
    schema_version: u32,
    k: Option<usize>,
    gap: Option<gecp::ViolationReport>,
    minimal_violating_k: usize,
}

#[derive(Serialize)]
struct MopnOutput {
    schema_version: u32,
    k: usize,
    n: usize,
    p: SchattenIndex,
    seed: u64,
    restarts: usize,
    value: f64,
    limit: f64,
    rel_err: f64,
    converged: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct NcVerifyOutput {
    schema_version: u32,
    checks: Vec<NcCheck>,
    all_passed: bool,
}

#[derive(Serialize)]
struct NcCheck {
    name: String,
    passed: bool,
    detail: String,
}

fn violation_row_csv(r: &gecp::ViolationReport, minimal: Option<usize>) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        r.k,
        r.single_bound,
        r.pair_bound,
        r.margin,
        r.violated,
        minimal == Some(r.k)
    )
}

fn run_violation_table(
    p: SchattenIndex,
    k_min: usize,
    k_max: usize,
    output: &OutputArgs,
) -> Result<()> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::InvalidPlan {
            field: "k-min".into(),
            msg: format!("need 2 <= k-min <= k-max, got {k_min}..{k_max}"),
        });
    }
    let minimal = minimal_violating_k(p, k_max);
    let sink: Box<dyn Write> = match &output.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    };
    let mut sink = sink;
    let csv = matches!(output.format, FormatArg::Csv);
    if csv {
        sink.write_all(b"k,single_bound,pair_bound,margin,violated,minimal_violating\n")?;
    }
    // rows stream one at a time; memory stays constant over k_max = 10^6
    for k in k_min..=k_max {
        let report = multiplicativity_verdict(k, p);
        if csv {
            sink.write_all(violation_row_csv(&report, minimal).as_bytes())?;
        } else {
            serde_json::to_writer(&mut sink, &report)?;
            sink.write_all(b"\n")?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn run_nc_verify(output: &OutputArgs) -> Result<i32> {
    use gecp::ncoracle as nc;

    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(NcCheck {
            name: name.into(),
            passed,
            detail,
        });
    };

    let cat_ok = (1..=8).all(|n| nc::enumerate_nc(n).map(|v| v.len()).unwrap_or(0) == nc::catalan(n));
    push("catalan_counts", cat_ok, "NC(n) sizes for n <= 8".into());

    let pair_ok = (1..=6).all(|m| {
        nc::enumerate_nc2(2 * m).map(|v| v.len()).unwrap_or(0) == nc::catalan(m)
    });
    push("pairing_counts", pair_ok, "NC2(2m) sizes for m <= 6".into());

    // kappa_r[s_A] = Tr[A^r] for random PSD A, r <= 4 (diagonal A suffices:
    // both sides are basis-independent)
    const NC_SEED: u64 = 0x4E43;
    let mut cum_ok = true;
    let mut detail = String::new();
    let mut g = gecp::ensembles::GaussStream::new(SeedSpec::new(NC_SEED, 0));
    for trial in 0..20 {
        let k = 2 + trial % 2;
        let lam: Vec<f64> = (0..k).map(|_| g.standard_normal().powi(2)).collect();
        let a = gecp::CoefficientMatrix::from_diagonal(&lam).expect("PSD diagonal");
        for r in 1..=4usize {
            let kappa = match nc::quadratic_form_cumulant(&a, r, nc::LetterKind::Semicircular) {
                Ok(v) => v,
                Err(e) => {
                    cum_ok = false;
                    detail = e.to_string();
                    break;
                }
            };
            let tr: f64 = lam.iter().map(|v| v.powi(r as i32)).sum();
            if (kappa - tr).abs() > 1e-10 * (1.0 + tr.abs()) {
                cum_ok = false;
                detail = format!("r={r}: {kappa} vs {tr}");
            }
        }
    }
    push("cumulants_trace_power", cum_ok, detail);

    // semicircular and circular quadratic forms share *-moments
    let mut eq_ok = true;
    let mut g = gecp::ensembles::GaussStream::new(SeedSpec::new(NC_SEED, 1));
    for _ in 0..10 {
        let lam: Vec<f64> = (0..2).map(|_| g.standard_normal().powi(2)).collect();
        let a = gecp::CoefficientMatrix::from_diagonal(&lam).expect("PSD diagonal");
        for r in 1..=3usize {
            let s = nc::quadratic_form_moment(&a, 2 * r, nc::LetterKind::Semicircular);
            let c = nc::quadratic_form_moment(&a, 2 * r, nc::LetterKind::Circular);
            match (s, c) {
                (Ok(s), Ok(c)) if (s - c).abs() <= 1e-10 * (1.0 + s.abs()) => {}
                _ => eq_ok = false,
            }
        }
    }
    push(
        "semicircular_circular_agreement",
        eq_ok,
        "orders <= 6".into(),
    );

    let all_passed = checks.iter().all(|c| c.passed);
    emit_json(
        &output.out,
        &NcVerifyOutput {
            schema_version: SCHEMA_VERSION,
            checks,
            all_passed,
        },
    )?;
    Ok(if all_passed { 0 } else { 1 })
}

fn classify(err: &Error) -> u8 {
    match err {
        Error::InvalidPlan { .. }
        | Error::PlanParse(_)
        | Error::InvalidSchattenIndex { .. }
        | Error::OutOfDomain { .. }
        | Error::DimensionMismatch { .. }
        | Error::SizeGuard { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Limits { k, p, output } => {
            let limit = limit_mopn(k, p)?;
            let verdict = multiplicativity_verdict(k, p);
            emit_json(
                &output.out,
                &LimitsOutput {
                    schema_version: SCHEMA_VERSION,
                    k,
                    p,
                    limit_mopn: limit.value,
                    verdict,
                },
            )?;
            Ok(0)
        }
        Command::ViolationTable {
            p,
            k_min,
            k_max,
            output,
        } => {
            run_violation_table(p, k_min, k_max, &output)?;
            Ok(0)
        }
        Command::MoeGap { k, output } => {
            let gap = k.map(moe_gap);
            let minimal = minimal_moe_violating_k();
            emit_json(
                &output.out,
                &MoeGapOutput {
                    schema_version: SCHEMA_VERSION,
                    k,
                    gap,
                    minimal_violating_k: minimal,
                },
            )?;
            Ok(0)
        }
        Command::Convergence { plan, output } => {
            let plan = plan.resolve()?;
            let report = Report::Convergence(convergence_study(&plan)?);
            emit_report(&report, &output)?;
            Ok(0)
        }
        Command::BellPair { plan, output } => {
            let plan = plan.resolve()?;
            let report = Report::BellPair(bell_pair_experiment(&plan)?);
            emit_report(&report, &output)?;
            Ok(0)
        }
        Command::Moe { plan, output } => {
            let plan = plan.resolve()?;
            let report = Report::Moe(moe_experiment(&plan)?);
            emit_report(&report, &output)?;
            Ok(0)
        }
        Command::MopnEstimate {
            k,
            n,
            p,
            restarts,
            seed,
            flavor,
            output,
        } => {
            let seed = seed.unwrap_or_else(|| {
                let s: u64 = rand::random();
                eprintln!("seed: {s}");
                s
            });
            let fam = sample_kraus_family(n, k, flavor.into(), SeedSpec::new(seed, 0));
            let est = estimate_mopn(
                &fam,
                ChannelKind::RAW,
                None,
                p,
                restarts,
                60,
                SeedSpec::new(seed, 1 << 32),
            )?;
            let limit = limit_mopn(k, p)?.value;
            emit_json(
                &output.out,
                &MopnOutput {
                    schema_version: SCHEMA_VERSION,
                    k,
                    n,
                    p,
                    seed,
                    restarts,
                    value: est.value,
                    limit,
                    rel_err: (est.value - limit).abs() / limit,
                    converged: est.converged,
                    iterations: est.iterations,
                },
            )?;
            Ok(0)
        }
        Command::NcVerify { output } => run_nc_verify(&output),
        Command::ShapeCheck { k, q, output } => {
            let report = Report::Shape(validate_optimal_shape(k, &q)?);
            emit_report(&report, &output)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}
