//! Front end for the `weakinfo` binary.
//!
//! Exit codes: 0 success, 2 configuration error, 3 impossible or degenerate
//! outcome, 4 an identity or verification check failed.

pub mod config;
pub mod output;

use std::ffi::OsString;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use weakinfo::identity::{IdentityRegistry, Selection};
use weakinfo::oracle::{self, OracleConfig};
use weakinfo::reversal::{self, Exclusion};
use weakinfo::verify::{FamilyResult, Fault, VerifyConfig, VerifyRegistry};
use weakinfo::{detection, DetectionContext, Error, InfoLedger, PriorState, RESIDUAL_TOL};

use crate::config::{Format, RunConfig};
use crate::output::{Envelope, Meta, Row};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IMPOSSIBLE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Impossible(String),
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Impossible(_) => EXIT_IMPOSSIBLE,
            Failure::Invariant(_) => EXIT_INVARIANT,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Impossible(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::ImpossibleOutcome { .. }
            | Error::OutcomeTooRare { .. }
            | Error::DegenerateRatio
            | Error::DegenerateMean(_)
            | Error::NoInteriorPeak
            | Error::GroundStateUnsupported => Failure::Impossible(msg),
            Error::SupportViolation(_) => Failure::Invariant(msg),
            _ => Failure::Config(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "weakinfo",
    version,
    about = "Information balances for photon-counting weak measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one balance identity at a single time
    Ledger(RunConfig),
    /// Evaluate a balance identity along a grid in tau
    Sweep(RunConfig),
    /// Reversal probability and every applicable reversal identity
    Reversal(RunConfig),
    /// Run the invariant suite and the Monte Carlo comparisons
    Verify(VerifyArgs),
    /// Monte Carlo estimates next to their closed forms
    Oracle(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    DecaySign,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunConfig,

    /// Run only the named check family (repeatable)
    #[arg(long = "family")]
    pub families: Vec<String>,

    #[arg(long, hide = true, value_enum)]
    pub inject_fault: Option<FaultArg>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ledger(c) => cmd_ledger(&RunConfig::resolve(c)?),
        Command::Sweep(c) => cmd_sweep(&RunConfig::resolve(c)?),
        Command::Reversal(c) => cmd_reversal(&RunConfig::resolve(c)?),
        Command::Verify(v) => {
            let fault = v.inject_fault.map(|FaultArg::DecaySign| Fault::DecaySignFlip);
            cmd_verify(&RunConfig::resolve(v.run)?, &v.families, fault)
        }
        Command::Oracle(c) => cmd_oracle(&RunConfig::resolve(c)?),
    }
}

fn check_residuals(ledgers: &[&InfoLedger]) -> Result<(), Failure> {
    let bad = ledgers.iter().filter(|l| !l.balances(RESIDUAL_TOL)).count();
    if bad == 0 {
        Ok(())
    } else {
        let worst = ledgers
            .iter()
            .filter_map(|l| l.residual)
            .fold(0.0f64, |m, r| m.max(r.abs()));
        Err(Failure::Invariant(format!(
            "{bad} ledger(s) exceed the residual tolerance {RESIDUAL_TOL} (worst {worst})"
        )))
    }
}

fn write_ledgers<S: Serialize>(
    cfg: &RunConfig,
    prior: &PriorState,
    rows: &[Row],
    summary: Option<S>,
) -> Result<(), Failure> {
    let text = match cfg.format() {
        Format::Csv => output::ledger_csv(rows)?,
        Format::Json => output::to_json(&Envelope {
            config: cfg,
            rows,
            meta: Meta::new(Some(prior)),
            summary,
        })?,
    };
    output::emit(&text, cfg.out.as_deref())
}

/// Ledgers of the selected identity at one time. Per-level identities
/// without `--n` report every supported level `n >= k` in increasing `n`.
pub fn cmd_ledger(cfg: &RunConfig) -> Result<(), Failure> {
    let prior = cfg.prior()?;
    let ctx = cfg.context()?;
    let registry = IdentityRegistry::with_builtins();
    let identity = registry.get(&cfg.identity_name(false)?)?;
    let sel = Selection {
        clicks: cfg.clicks()?,
        level: cfg.n,
    };
    let ledgers = identity.evaluate(&prior, &ctx, &sel)?;
    let rows: Vec<Row> = ledgers
        .iter()
        .map(|l| Row {
            tau: ctx.tau(),
            ledger: l,
        })
        .collect();
    write_ledgers::<()>(cfg, &prior, &rows, None)?;
    check_residuals(&ledgers.iter().collect::<Vec<_>>())
}

/// One row per grid node (per ledger, for multi-ledger identities).
/// Without `--n` the averaged balance is used.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), Failure> {
    let prior = cfg.prior()?;
    let grid = cfg.grid()?;
    let registry = IdentityRegistry::with_builtins();
    let identity = registry.get(&cfg.identity_name(true)?)?;
    let sel = Selection {
        clicks: cfg.clicks()?,
        level: cfg.n,
    };
    let mut samples: Vec<(f64, InfoLedger)> = Vec::new();
    for tau in grid.taus() {
        let ctx = DetectionContext::from_tau(tau)?;
        samples.extend(identity.evaluate(&prior, &ctx, &sel)?.into_iter().map(|l| (tau, l)));
    }
    let rows: Vec<Row> = samples.iter().map(|(tau, l)| Row { tau: *tau, ledger: l }).collect();
    write_ledgers::<()>(cfg, &prior, &rows, None)?;
    check_residuals(&samples.iter().map(|(_, l)| l).collect::<Vec<_>>())
}

#[derive(Debug, Serialize)]
struct ReversalSummary<'a> {
    p_rev: f64,
    i_rev: f64,
    max_abs_residual: f64,
    excluded: &'a [Exclusion],
    warnings: &'a [String],
}

pub fn cmd_reversal(cfg: &RunConfig) -> Result<(), Failure> {
    let prior = cfg.prior()?;
    let ctx = cfg.context()?;
    let report = reversal::reversal_identity_suite(&prior, &ctx)?;
    let rows: Vec<Row> = report
        .ledgers
        .iter()
        .map(|l| Row {
            tau: ctx.tau(),
            ledger: l,
        })
        .collect();
    let summary = ReversalSummary {
        p_rev: report.p_rev,
        i_rev: report.i_rev,
        max_abs_residual: report.max_abs_residual,
        excluded: &report.excluded,
        warnings: &report.warnings,
    };
    write_ledgers(cfg, &prior, &rows, Some(summary))?;
    eprintln!(
        "p_rev={} I_rev={} max_abs_residual={}",
        report.p_rev, report.i_rev, report.max_abs_residual
    );
    for e in &report.excluded {
        match e.level {
            Some(n) => eprintln!("excluded {} at n={n}: {}", e.identity, e.reason),
            None => eprintln!("excluded {}: {}", e.identity, e.reason),
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.passes(RESIDUAL_TOL) {
        Ok(())
    } else {
        Err(Failure::Invariant(format!(
            "reversal identities exceed the residual tolerance (worst {})",
            report.max_abs_residual
        )))
    }
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    passed: bool,
    failed: Vec<String>,
    trials: u64,
    seed: u64,
}

pub fn cmd_verify(cfg: &RunConfig, families: &[String], fault: Option<Fault>) -> Result<(), Failure> {
    let mut vc = VerifyConfig::new(cfg.trials(), cfg.seed())?;
    vc.fault = fault;
    let mut registry = VerifyRegistry::with_builtins();
    if !families.is_empty() {
        let names: Vec<&str> = families.iter().map(String::as_str).collect();
        registry = registry.only(&names)?;
    }
    let report = registry.run(&vc)?;
    let failed: Vec<String> = report.failed_families().into_iter().map(String::from).collect();
    let text = match cfg.format() {
        Format::Csv => output::csv_string(
            &["family", "passed", "checks", "failures", "worst", "first_failure"],
            report.families.iter().map(|f: &FamilyResult| {
                vec![
                    f.name.clone(),
                    f.passed.to_string(),
                    f.checks.to_string(),
                    f.failures.to_string(),
                    output::float(f.worst),
                    f.first_failure.clone().unwrap_or_default(),
                ]
            }),
        )?,
        Format::Json => output::to_json(&Envelope {
            config: cfg,
            rows: &report.families,
            meta: Meta::new(None),
            summary: Some(VerifySummary {
                passed: report.passed,
                failed: failed.clone(),
                trials: report.trials,
                seed: report.seed,
            }),
        })?,
    };
    output::emit(&text, cfg.out.as_deref())?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Invariant(format!(
            "failed check families: {}",
            failed.join(", ")
        )))
    }
}

#[derive(Debug, Serialize)]
pub struct OracleRow {
    pub quantity: &'static str,
    pub level: Option<usize>,
    pub clicks: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub exact: f64,
    /// Deviation in standard errors of the closed form.
    pub sigmas: f64,
    pub agrees: bool,
}

impl OracleRow {
    fn new(
        quantity: &'static str,
        level: Option<usize>,
        clicks: usize,
        (estimate, stderr, samples): (f64, f64, u64),
        exact: f64,
    ) -> Self {
        let sigmas = oracle::deviation_sigmas(estimate, exact, samples);
        Self {
            quantity,
            level,
            clicks,
            estimate,
            stderr,
            exact,
            sigmas,
            agrees: sigmas <= oracle_band(),
        }
    }
}

fn oracle_band() -> f64 {
    weakinfo::verify::ORACLE_SIGMAS
}

/// With `--n`: click likelihoods of that level. Otherwise outcome
/// probabilities and posteriors for `--prior`. `--k` restricts to one outcome.
pub fn cmd_oracle(cfg: &RunConfig) -> Result<(), Failure> {
    let ctx = cfg.context()?;
    let oc = OracleConfig::new(cfg.trials(), cfg.seed())?;
    let mut rows = Vec::new();
    let mut prior = None;
    if let Some(n) = cfg.n {
        let ks: Vec<usize> = match cfg.k {
            Some(k) if k > n => return Err(Error::LevelBelowClicks { n, k }.into()),
            Some(k) => vec![k],
            None => (0..=n).collect(),
        };
        for k in ks {
            let e = oracle::estimate_likelihood(n, k, &ctx, &oc)?;
            let exact = detection::outcome_likelihood(n, k, &ctx);
            rows.push(OracleRow::new(
                "likelihood",
                Some(n),
                k,
                (e.value, e.stderr, e.trials),
                exact,
            ));
        }
    } else {
        let p = cfg.prior()?;
        let ks: Vec<usize> = match cfg.k {
            Some(k) => vec![k],
            None => (0..p.dim()).collect(),
        };
        for k in ks {
            let e = oracle::estimate_outcome_prob(&p, k, &ctx, &oc)?;
            rows.push(OracleRow::new(
                "outcome",
                None,
                k,
                (e.value, e.stderr, e.trials),
                detection::outcome_prob(&p, k, &ctx),
            ));
            match oracle::estimate_posterior(&p, k, &ctx, &oc) {
                Ok(post) => {
                    let exact = detection::posterior(&p, k, &ctx)?;
                    for n in 0..p.dim() {
                        rows.push(OracleRow::new(
                            "posterior",
                            Some(n),
                            k,
                            (post.probs[n], post.stderr[n], post.conditioned),
                            exact.get(n),
                        ));
                    }
                }
                Err(Error::OutcomeTooRare { count, .. }) => {
                    eprintln!("skipping posterior for k={k}: observed {count} times");
                }
                Err(e) => return Err(e.into()),
            }
        }
        prior = Some(p);
    }
    let text = match cfg.format() {
        Format::Csv => output::csv_string(
            &[
                "quantity", "level", "clicks", "estimate", "stderr", "exact", "sigmas", "agrees",
            ],
            rows.iter().map(|r| {
                vec![
                    r.quantity.to_string(),
                    r.level.map(|n| n.to_string()).unwrap_or_default(),
                    r.clicks.to_string(),
                    output::float(r.estimate),
                    output::float(r.stderr),
                    output::float(r.exact),
                    output::float(r.sigmas),
                    r.agrees.to_string(),
                ]
            }),
        )?,
        Format::Json => output::to_json(&Envelope::<_, ()> {
            config: cfg,
            rows: &rows,
            meta: Meta::new(prior.as_ref()),
            summary: None,
        })?,
    };
    output::emit(&text, cfg.out.as_deref())?;
    let bad = rows.iter().filter(|r| !r.agrees).count();
    if bad == 0 {
        Ok(())
    } else {
        Err(Failure::Invariant(format!(
            "{bad} estimate(s) outside {} standard errors",
            oracle_band()
        )))
    }
}
