//! Command-line front end: flag parsing, study configuration files, and
//! CSV/JSON result output.
//!
//! Three subcommands cover the crate's surface. `estimate` runs the
//! estimator once and prints the interval; `diagnose` reports leverage
//! numbers and growth-rule verdicts for a basis; `study` runs a replication
//! study and writes its rows. A resolved configuration can be written with
//! `--emit-config` and replayed with `--config`, which reproduces the same
//! output bytes for the same seed (timing column aside). The environment
//! variable CVMC_SEED overrides any configured seed.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::basis::BasisFamily;
use crate::diagnostics::{
    check_growth_rule, leverage_profile, mean_leverage_by_quadrature, sup_leverage, GrowthCheck,
};
use crate::domain::{draw_samples, Domain};
use crate::error::{CvmcError, Result};
use crate::estimator::{olsmc, OlsForm, QuantileRule};
use crate::experiments::{basis_for, run_study, Schedule, StudyKind, StudyResult, StudyRow, StudySpec, Verdict};
use crate::integrand::integrand_by_id;
use crate::quadrature::QuadratureSpec;

/// Column order of study CSV output; fixed so downstream tooling can rely
/// on it.
pub const STUDY_CSV_HEADER: &str =
    "n,m,rmse,mean_sigma2_hat,oracle_sigma2,coverage,ks_stat,ks_pvalue,failures,op_count,wallclock_ns";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcommandKind {
    Estimate,
    Diagnose,
    Study,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully resolved run description. Serializing and re-loading a config
/// reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliConfig {
    pub subcommand: SubcommandKind,
    pub study: Option<StudyKind>,
    pub integrand: String,
    pub basis: BasisFamily,
    /// Constant size ("8") or schedule expression ("n^1/3", "2*n^0.25").
    pub m: String,
    /// Sample size for estimate, grid for studies, profile size for diagnose.
    pub n: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub form: OlsForm,
    pub quantile: QuantileRule,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Option<usize>,
    /// Budget-match with the O(nm) localized cost model.
    pub localized: bool,
    #[serde(skip)]
    pub emit_config: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(
    name = "cvmc",
    version,
    about = "Monte Carlo integration with a growing number of control variates"
)]
struct Cli {
    /// Load a JSON config written by --emit-config instead of flags.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,
    /// Write the resolved config as JSON to this path before running.
    #[arg(long, value_name = "PATH", global = true)]
    emit_config: Option<PathBuf>,
    /// Result file; summaries always go to stdout.
    #[arg(long, value_name = "PATH", global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<FormatArg>,
    /// Cap the replication worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<CommandArgs>,
}

#[derive(Subcommand, Debug)]
enum CommandArgs {
    /// One estimate: integrand, basis, n samples, confidence interval.
    Estimate(EstimateArgs),
    /// Leverage diagnostics and growth-rule verdicts for a basis.
    Diagnose(DiagnoseArgs),
    /// A replication study (rate, normality, coverage, budget, sigma).
    Study(StudyArgs),
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Integrand id: const, linear, square, exp, abs_shift, runge,
    /// product_exp, or step:u.
    #[arg(long)]
    integrand: String,
    #[arg(long, value_enum, default_value = "legendre")]
    basis: BasisArg,
    /// Number of control functions (must be a plain integer here).
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    m: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "regression")]
    form: FormArg,
    #[arg(long, value_enum, default_value = "normal")]
    quantile: QuantileArg,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long, value_enum, default_value = "legendre")]
    basis: BasisArg,
    #[arg(long, default_value = "3", allow_hyphen_values = true)]
    m: String,
    /// Sample size for the empirical leverage profile.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(value_enum)]
    study: StudyKindArg,
    #[arg(long, default_value = "exp")]
    integrand: String,
    #[arg(long, value_enum, default_value = "legendre")]
    basis: BasisArg,
    /// Constant number of control functions; see also --schedule.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    m: String,
    /// Growth schedule expression such as "n^1/3"; overrides --m.
    #[arg(long)]
    schedule: Option<String>,
    /// Comma-separated strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    /// Single sample size, shorthand for a one-point grid.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "regression")]
    form: FormArg,
    #[arg(long, value_enum, default_value = "normal")]
    quantile: QuantileArg,
    /// Budget-match with the O(nm) localized cost model.
    #[arg(long)]
    localized: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BasisArg {
    Indicator,
    Legendre,
    Tensor,
}

impl From<BasisArg> for BasisFamily {
    fn from(value: BasisArg) -> Self {
        match value {
            BasisArg::Indicator => BasisFamily::IndicatorStrata,
            BasisArg::Legendre => BasisFamily::Legendre1d,
            BasisArg::Tensor => BasisFamily::LegendreTensor,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormArg {
    Regression,
    Projection,
}

impl From<FormArg> for OlsForm {
    fn from(value: FormArg) -> Self {
        match value {
            FormArg::Regression => OlsForm::Regression,
            FormArg::Projection => OlsForm::Projection,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuantileArg {
    Normal,
    StudentT,
}

impl From<QuantileArg> for QuantileRule {
    fn from(value: QuantileArg) -> Self {
        match value {
            QuantileArg::Normal => QuantileRule::Normal,
            QuantileArg::StudentT => QuantileRule::StudentT,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StudyKindArg {
    Rate,
    Normality,
    Coverage,
    Budget,
    SigmaConsistency,
}

impl From<StudyKindArg> for StudyKind {
    fn from(value: StudyKindArg) -> Self {
        match value {
            StudyKindArg::Rate => StudyKind::Rate,
            StudyKindArg::Normality => StudyKind::Normality,
            StudyKindArg::Coverage => StudyKind::Coverage,
            StudyKindArg::Budget => StudyKind::Budget,
            StudyKindArg::SigmaConsistency => StudyKind::SigmaConsistency,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

fn usage(msg: String) -> CvmcError {
    CvmcError::Usage { msg }
}

/// Parse command-line arguments (the first entry is the program name) into a
/// resolved config, honoring --config files and the CVMC_SEED override.
pub fn parse_config<I, T>(argv: I) -> Result<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    parse_config_with_env(argv, std::env::var("CVMC_SEED").ok().as_deref())
}

/// Like parse_config but with the CVMC_SEED value passed explicitly, so unit
/// tests stay independent of process-global state.
pub fn parse_config_with_env<I, T>(argv: I, env_seed: Option<&str>) -> Result<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
    let mut config = match (&cli.config, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<CliConfig>(&text)?
        }
        (Some(_), Some(_)) => {
            return Err(usage(
                "--config replaces a subcommand; pass one or the other".into(),
            ))
        }
        (None, Some(command)) => config_from_command(command)?,
        (None, None) => {
            return Err(usage(
                "expected a subcommand (estimate, diagnose, study) or --config".into(),
            ))
        }
    };
    if let Some(path) = cli.out {
        config.out = Some(path);
    }
    if let Some(format) = cli.format {
        config.format = format.into();
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    config.emit_config = cli.emit_config;
    if let Some(text) = env_seed {
        config.seed = text
            .parse()
            .map_err(|_| usage(format!("CVMC_SEED must be an unsigned integer, got {text:?}")))?;
    }
    parse_schedule(&config.m)?;
    Ok(config)
}

fn config_from_command(command: CommandArgs) -> Result<CliConfig> {
    Ok(match command {
        CommandArgs::Estimate(a) => CliConfig {
            subcommand: SubcommandKind::Estimate,
            study: None,
            integrand: a.integrand,
            basis: a.basis.into(),
            m: a.m,
            n: vec![a.n],
            reps: 1,
            alpha: a.alpha,
            seed: a.seed,
            form: a.form.into(),
            quantile: a.quantile.into(),
            out: None,
            format: OutputFormat::Json,
            threads: None,
            localized: false,
            emit_config: None,
        },
        CommandArgs::Diagnose(a) => CliConfig {
            subcommand: SubcommandKind::Diagnose,
            study: None,
            integrand: String::new(),
            basis: a.basis.into(),
            m: a.m,
            n: vec![a.n],
            reps: 1,
            alpha: 0.05,
            seed: a.seed,
            form: OlsForm::Regression,
            quantile: QuantileRule::Normal,
            out: None,
            format: OutputFormat::Json,
            threads: None,
            localized: false,
            emit_config: None,
        },
        CommandArgs::Study(a) => {
            let grid = match (a.n, a.n_grid.is_empty()) {
                (Some(n), true) => vec![n],
                (None, false) => a.n_grid,
                (Some(_), false) => {
                    return Err(usage("--n and --n-grid are mutually exclusive".into()))
                }
                (None, true) => {
                    return Err(usage("study needs --n or --n-grid".into()))
                }
            };
            CliConfig {
                subcommand: SubcommandKind::Study,
                study: Some(a.study.into()),
                integrand: a.integrand,
                basis: a.basis.into(),
                m: a.schedule.unwrap_or(a.m),
                n: grid,
                reps: a.reps,
                alpha: a.alpha,
                seed: a.seed,
                form: a.form.into(),
                quantile: a.quantile.into(),
                out: None,
                format: OutputFormat::Csv,
                threads: None,
                localized: a.localized,
                emit_config: None,
            }
        }
    })
}

/// The box a CLI-built basis lives on; the CLI works in one dimension.
fn natural_domain(family: BasisFamily) -> Domain {
    match family {
        BasisFamily::IndicatorStrata => Domain::UnitInterval01,
        _ => Domain::IntervalM1P1,
    }
}

fn parse_schedule(text: &str) -> Result<Schedule> {
    Schedule::parse(text).map_err(|e| usage(format!("--m / --schedule: {e}")))
}

fn constant_m(text: &str) -> Result<usize> {
    let schedule = parse_schedule(text)?;
    if schedule.p != 0.0 {
        return Err(usage(format!(
            "--m: this subcommand needs a constant size, not the schedule {text:?}"
        )));
    }
    Ok(schedule.c as usize)
}

/// Execute a config and return the process exit code: 0 on success, 2 on any
/// error, 3 when a study ran but its verdicts failed.
pub fn run(config: &CliConfig) -> i32 {
    match run_inner(config) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(CvmcError::Usage { msg }) => {
            eprintln!("{msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_inner(config: &CliConfig) -> Result<bool> {
    if let Some(path) = &config.emit_config {
        let mut text = serde_json::to_string_pretty(config)?;
        text.push('\n');
        std::fs::write(path, text)?;
    }
    match config.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CvmcError::InvalidSpec {
                    msg: format!("could not build a {k}-thread pool: {e}"),
                })?;
            pool.install(|| execute(config))
        }
        None => execute(config),
    }
}

fn execute(config: &CliConfig) -> Result<bool> {
    match config.subcommand {
        SubcommandKind::Estimate => run_estimate(config),
        SubcommandKind::Diagnose => run_diagnose(config),
        SubcommandKind::Study => run_study_command(config),
    }
}

fn single_n(config: &CliConfig) -> Result<usize> {
    match config.n.as_slice() {
        [n] => Ok(*n),
        other => Err(usage(format!(
            "expected exactly one sample size, got {other:?}"
        ))),
    }
}

fn run_estimate(config: &CliConfig) -> Result<bool> {
    let m = constant_m(&config.m)?;
    let n = single_n(config)?;
    let domain = natural_domain(config.basis);
    let basis = basis_for(config.basis, m, domain)?;
    let f = integrand_by_id(&config.integrand, domain)?;
    let samples = draw_samples(domain, n, config.seed)?;
    let mut report = olsmc(&f, &samples, &basis, config.alpha, config.form)?;
    let (lo, hi) = report.ci_with(config.quantile);
    report.ci_low = lo;
    report.ci_high = hi;
    let half = (hi - lo) / 2.0;
    println!(
        "mu_hat = {} +/- {half} (alpha = {}, n = {n}, m = {}, method = {:?})",
        report.mu_hat, report.alpha, report.m, report.method
    );
    if let Some(path) = &config.out {
        match config.format {
            OutputFormat::Json => {
                let mut text = serde_json::to_string_pretty(&report)?;
                text.push('\n');
                std::fs::write(path, text)?;
            }
            OutputFormat::Csv => {
                let text = format!(
                    "mu_hat,sigma2_hat,sigma2_hat_dof,ci_low,ci_high,alpha,n,m,denom\n{},{},{},{},{},{},{},{},{}\n",
                    report.mu_hat,
                    report.sigma2_hat,
                    report.sigma2_hat_dof,
                    report.ci_low,
                    report.ci_high,
                    report.alpha,
                    report.n,
                    report.m,
                    report.denom
                );
                std::fs::write(path, text)?;
            }
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct DiagnoseOutput {
    family: BasisFamily,
    m: usize,
    sup_q: f64,
    sup_q_is_lower_bound: bool,
    mean_q: f64,
    profile: crate::diagnostics::LeverageProfile,
    growth_checks: Vec<GrowthCheck>,
}

fn run_diagnose(config: &CliConfig) -> Result<bool> {
    let m = constant_m(&config.m)?;
    let n = single_n(config)?;
    let domain = natural_domain(config.basis);
    let basis = basis_for(config.basis, m, domain)?;
    let quad = QuadratureSpec::default();
    let (sup_q, lower_bound) = sup_leverage(&basis, &quad)?;
    let mean_q = mean_leverage_by_quadrature(&basis, &quad)?;
    let samples = draw_samples(domain, n, config.seed)?;
    let profile = leverage_profile(&basis, &samples, &quad, 3.0)?;
    println!(
        "basis {:?} m = {m}: sup_q = {sup_q}{}, mean_q = {mean_q:.6}",
        config.basis,
        if lower_bound { " (probed lower bound)" } else { "" },
    );
    println!(
        "empirical at n = {n}: max leverage = {:.6}, {} point(s) above 3m/n",
        profile.max_empirical,
        profile.high_leverage_flags.len()
    );
    let grid = [100, 10_000, 1_000_000];
    let mut growth_checks = Vec::new();
    for expr in ["n^1/4", "n^1/3", "n^1/2"] {
        let schedule = Schedule::parse(expr)?;
        let check = check_growth_rule(config.basis, |n| schedule.eval(n), &grid)?;
        println!(
            "schedule m = {expr}: {} (last ratio {:.4}, sufficient: {})",
            if check.passes { "PASS" } else { "FAIL" },
            check.rows.last().map(|r| r.ratio).unwrap_or(f64::NAN),
            check.sufficient_schedule
        );
        growth_checks.push(check);
    }
    if let Some(path) = &config.out {
        let out = DiagnoseOutput {
            family: config.basis,
            m,
            sup_q,
            sup_q_is_lower_bound: lower_bound,
            mean_q,
            profile,
            growth_checks,
        };
        let mut text = serde_json::to_string_pretty(&out)?;
        text.push('\n');
        std::fs::write(path, text)?;
    }
    Ok(true)
}

/// Render study rows in the fixed CSV schema, LF line endings, `.` decimals.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from(STUDY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.m,
            r.rmse,
            r.mean_sigma2_hat,
            r.oracle_sigma2,
            r.coverage,
            r.ks_stat,
            r.ks_pvalue,
            r.failures,
            r.op_count,
            r.wallclock_ns
        ));
    }
    out
}

#[derive(Serialize)]
struct StudyJson<'a> {
    spec: &'a StudySpec,
    rows: &'a [StudyRow],
    verdicts: Vec<Verdict>,
    version: &'static str,
}

/// Render a study result as the stable JSON envelope {spec, rows, verdicts,
/// version}; fitted slopes ride along as informational verdicts.
pub fn study_json(spec: &StudySpec, result: &StudyResult) -> Result<String> {
    let mut verdicts = result.verdicts.clone();
    if let Some(slope) = result.fitted_slope {
        verdicts.push(Verdict {
            name: "fitted_slope".into(),
            pass: true,
            value: slope,
        });
    }
    if let Some(slope) = result.control_slope {
        verdicts.push(Verdict {
            name: "control_slope".into(),
            pass: true,
            value: slope,
        });
    }
    let mut text = serde_json::to_string_pretty(&StudyJson {
        spec,
        rows: &result.rows,
        verdicts,
        version: env!("CARGO_PKG_VERSION"),
    })?;
    text.push('\n');
    Ok(text)
}

fn run_study_command(config: &CliConfig) -> Result<bool> {
    let kind = config
        .study
        .ok_or_else(|| usage("study subcommand needs a study kind".into()))?;
    let schedule = parse_schedule(&config.m)?;
    let domain = natural_domain(config.basis);
    let spec = StudySpec {
        study: kind,
        integrand_id: config.integrand.clone(),
        domain,
        basis_family: config.basis,
        schedule,
        n_grid: config.n.clone(),
        reps: config.reps,
        alpha: config.alpha,
        seed: config.seed,
        form: config.form,
        localized_cost: config.localized,
    };
    let result = run_study(&spec)?;
    if let Some(path) = &config.out {
        let text = match config.format {
            OutputFormat::Csv => study_csv(&result.rows),
            OutputFormat::Json => study_json(&spec, &result)?,
        };
        std::fs::write(path, text)?;
    }
    let verdict_text: Vec<String> = result
        .verdicts
        .iter()
        .map(|v| {
            format!(
                "{}={} ({:.4})",
                v.name,
                if v.pass { "pass" } else { "fail" },
                v.value
            )
        })
        .collect();
    let slope_text = match result.fitted_slope {
        Some(s) => format!(", slope = {s:.4}"),
        None => String::new(),
    };
    println!(
        "study {kind:?}: {}{slope_text} [{}]",
        if result.passes() { "PASS" } else { "FAIL" },
        verdict_text.join(", ")
    );
    Ok(result.passes())
}
