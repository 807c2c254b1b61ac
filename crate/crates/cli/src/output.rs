//! CSV and JSON emission.
//!
//! Floats are written with Rust's `Display` for `f64`, the shortest decimal
//! string that parses back to the same value, so identical runs produce
//! identical bytes. JSON numbers use the same shortest round-trip rule;
//! non-finite values become `null` in JSON and `inf`/`NaN` in CSV.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use weakinfo::infotheory::{DECAY_TERM, DELTA_I, LHS_OUTCOME, MULTIPLICITY_TERM, NO_DECAY_TERM, RELATIVE_ENTROPY};
use weakinfo::{InfoLedger, PriorState, RESIDUAL_TOL};

use crate::config::RunConfig;
use crate::Failure;

#[derive(Debug, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub tolerance: f64,
    /// Prior after normalization, when the command takes one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

impl Meta {
    pub fn new(prior: Option<&PriorState>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            tolerance: RESIDUAL_TOL,
            prior: prior.map(|p| p.probs().to_vec()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, R: Serialize, S: Serialize> {
    pub config: &'a RunConfig,
    pub rows: R,
    pub meta: Meta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<S>,
}

/// A ledger at one time, flattened for JSON.
#[derive(Debug, Serialize)]
pub struct Row<'a> {
    pub tau: f64,
    #[serde(flatten)]
    pub ledger: &'a InfoLedger,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn float(x: f64) -> String {
    format!("{x}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn csv_string(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Config(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in records {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Config(e.to_string()))
}

/// True for ledgers of the `I(y_k) = ...` family, which share fixed columns.
pub fn is_outcome_family(rows: &[Row]) -> bool {
    rows.iter().all(|r| r.ledger.lhs_name == LHS_OUTCOME)
}

/// `tau, I_outcome, delta_I|relative_entropy, decay_term, no_decay_term,
/// multiplicity_term, residual`; absent terms are empty fields.
pub fn outcome_csv(rows: &[Row]) -> Result<String, Failure> {
    let averaged = rows.iter().any(|r| r.ledger.term(RELATIVE_ENTROPY).is_some());
    let third = if averaged { RELATIVE_ENTROPY } else { DELTA_I };
    let header = [
        "tau",
        LHS_OUTCOME,
        third,
        DECAY_TERM,
        NO_DECAY_TERM,
        MULTIPLICITY_TERM,
        "residual",
    ];
    csv_string(
        &header,
        rows.iter().map(|r| {
            let mut rec = vec![float(r.tau), float(r.ledger.lhs)];
            rec.extend(header[2..6].iter().map(|name| opt_float(r.ledger.term(name))));
            rec.push(opt_float(r.ledger.residual));
            rec
        }),
    )
}

/// Any ledger: terms packed as `name=value` pairs separated by `;`.
pub fn generic_csv(rows: &[Row]) -> Result<String, Failure> {
    let header = [
        "tau", "identity", "level", "clicks", "lhs_name", "lhs", "terms", "residual",
    ];
    csv_string(
        &header,
        rows.iter().map(|r| {
            let l = r.ledger;
            let terms: Vec<String> = l.terms.iter().map(|t| format!("{}={}", t.name, t.bits)).collect();
            vec![
                float(r.tau),
                l.identity.clone(),
                l.level.map(|n| n.to_string()).unwrap_or_default(),
                l.clicks.map(|k| k.to_string()).unwrap_or_default(),
                l.lhs_name.clone(),
                float(l.lhs),
                terms.join(";"),
                opt_float(l.residual),
            ]
        }),
    )
}

pub fn ledger_csv(rows: &[Row]) -> Result<String, Failure> {
    if is_outcome_family(rows) {
        outcome_csv(rows)
    } else {
        generic_csv(rows)
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Config(format!("cannot write output: {e}")))
        }
    }
}
