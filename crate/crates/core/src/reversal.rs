//! Reversal success probability after a null result and the balance
//! identities that involve it.
//!
//! `p(rev) = e^{-N tau} / p(y_0)` and `I(rev) = -log2 p(rev)`, where `N` is the
//! top level of the configured state vector (trailing zeros included).

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::detection::{self, DetectionContext};
use crate::error::{Error, Result};
use crate::infotheory::{
    self, decay_info, InfoLedger, Measured, DECAY_TERM, DELTA_I, LHS_OUTCOME, RELATIVE_ENTROPY, REVERSAL_TERM,
};
use crate::state::PriorState;

pub const LHS_REVERSAL: &str = "I_rev";
pub const LHS_DECAY: &str = "N_decay_term";
pub const LHS_RATIO: &str = "level_ratio";
pub const GROUND_GAIN: &str = "delta_I_ground";
pub const FIRST_GAIN: &str = "delta_I_first";
pub const INFO_RATIO: &str = "info_ratio";

/// An identity that could not be evaluated for this input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub identity: String,
    pub level: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversalReport {
    pub p_rev: f64,
    pub i_rev: f64,
    pub ledgers: Vec<InfoLedger>,
    pub excluded: Vec<Exclusion>,
    pub warnings: Vec<String>,
    pub max_abs_residual: f64,
}

impl ReversalReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_residual <= tol
    }

    /// The averaged balance was excluded because `<n> = N`.
    pub fn degenerate_mean(&self) -> bool {
        self.excluded.iter().any(|e| e.identity == "reversal-avg")
    }
}

/// `ln p(rev)`.
pub fn log_reversal_prob(prior: &PriorState, ctx: &DetectionContext) -> f64 {
    let top = prior.top_level() as f64;
    -top * ctx.tau() - detection::log_outcome_prob(prior, 0, ctx)
}

pub fn reversal_prob(prior: &PriorState, ctx: &DetectionContext) -> f64 {
    log_reversal_prob(prior, ctx).exp()
}

/// Quantities shared by the reversal identities for one `(prior, tau)`.
struct Inputs {
    top: f64,
    info: f64,
    i_rev: f64,
    decay: f64,
    null: Measured,
}

impl Inputs {
    fn new(prior: &PriorState, ctx: &DetectionContext) -> Result<Self> {
        let null = Measured::new(prior, 0, ctx)?;
        Ok(Self {
            top: prior.top_level() as f64,
            info: null.info,
            i_rev: -log_reversal_prob(prior, ctx) / LN_2 + 0.0,
            decay: decay_info(ctx),
            null,
        })
    }

    fn gain(&self, prior: &PriorState, n: usize) -> Result<f64> {
        infotheory::pointwise_gain(prior, &self.null.posterior, n)
    }
}

/// `I(y_0) = N I(decay) - I(rev)`.
pub fn reversal_ledger(prior: &PriorState, ctx: &DetectionContext) -> Result<InfoLedger> {
    let x = Inputs::new(prior, ctx)?;
    Ok(balance(&x))
}

fn balance(x: &Inputs) -> InfoLedger {
    InfoLedger::new(
        "reversal",
        LHS_OUTCOME,
        x.info,
        vec![(DECAY_TERM, x.top * x.decay), (REVERSAL_TERM, -x.i_rev)],
    )
}

/// `I(y_0) = [N dI(x_n|y_0) + n I(rev)] / (N - n)`, for `n < N`.
pub fn level_reversal_ledger(prior: &PriorState, ctx: &DetectionContext, n: usize) -> Result<InfoLedger> {
    let x = Inputs::new(prior, ctx)?;
    level_reversal(&x, prior, n)
}

fn level_reversal(x: &Inputs, prior: &PriorState, n: usize) -> Result<InfoLedger> {
    if n >= prior.top_level() {
        return Err(Error::UnsupportedLevel(n));
    }
    let gain = x.gain(prior, n)?;
    let span = x.top - n as f64;
    Ok(InfoLedger::new(
        "reversal-level",
        LHS_OUTCOME,
        x.info,
        vec![
            (DELTA_I, x.top * gain / span),
            (REVERSAL_TERM, n as f64 * x.i_rev / span),
        ],
    )
    .at_level(n))
}

/// `N I(decay) = I(rev) + dI(x_0|y_0)`.
fn decay_split(x: &Inputs, prior: &PriorState) -> Result<InfoLedger> {
    let g0 = x.gain(prior, 0)?;
    Ok(InfoLedger::new(
        "reversal-decay",
        LHS_DECAY,
        x.top * x.decay,
        vec![(REVERSAL_TERM, x.i_rev), (GROUND_GAIN, g0)],
    ))
}

/// `dI(x_n|y_0) = (N - n)/N dI(x_0|y_0) - (n/N) I(rev)`.
fn gain_from_ground(x: &Inputs, prior: &PriorState, n: usize) -> Result<InfoLedger> {
    let g0 = x.gain(prior, 0)?;
    let gn = x.gain(prior, n)?;
    let frac = n as f64 / x.top;
    Ok(InfoLedger::new(
        "reversal-gain",
        DELTA_I,
        gn,
        vec![(GROUND_GAIN, (1.0 - frac) * g0), (REVERSAL_TERM, -frac * x.i_rev)],
    )
    .at_level(n))
}

/// `n/N = [dI(x_0|y_0) - dI(x_n|y_0)] / [I(rev) + dI(x_0|y_0)]`, for `tau > 0`.
pub fn ratio_ledger(prior: &PriorState, ctx: &DetectionContext, n: usize) -> Result<InfoLedger> {
    if ctx.tau() == 0.0 {
        return Err(Error::DegenerateRatio);
    }
    let x = Inputs::new(prior, ctx)?;
    ratio(&x, prior, n)
}

fn ratio(x: &Inputs, prior: &PriorState, n: usize) -> Result<InfoLedger> {
    let g0 = x.gain(prior, 0)?;
    let gn = x.gain(prior, n)?;
    Ok(InfoLedger::new(
        "level-ratio",
        LHS_RATIO,
        n as f64 / x.top,
        vec![(INFO_RATIO, (g0 - gn) / (x.i_rev + g0))],
    )
    .at_level(n))
}

fn lowest_two(x: &Inputs, prior: &PriorState) -> Result<(f64, f64)> {
    for n in [0, 1] {
        if !prior.is_supported(n) {
            return Err(Error::UnsupportedLevel(n));
        }
    }
    Ok((x.gain(prior, 0)?, x.gain(prior, 1)?))
}

/// `I(rev) = (N - 1) dI(x_0|y_0) - N dI(x_1|y_0)`.
pub fn reversal_from_lowest_levels(prior: &PriorState, ctx: &DetectionContext) -> Result<InfoLedger> {
    let x = Inputs::new(prior, ctx)?;
    from_lowest(&x, prior)
}

fn from_lowest(x: &Inputs, prior: &PriorState) -> Result<InfoLedger> {
    let (g0, g1) = lowest_two(x, prior)?;
    Ok(InfoLedger::new(
        "reversal-lowest",
        LHS_REVERSAL,
        x.i_rev,
        vec![(GROUND_GAIN, (x.top - 1.0) * g0), (FIRST_GAIN, -x.top * g1)],
    ))
}

/// `dI(x_n|y_0) = n dI(x_1|y_0) - (n - 1) dI(x_0|y_0)`.
pub fn gain_from_lowest_levels(prior: &PriorState, ctx: &DetectionContext, n: usize) -> Result<InfoLedger> {
    let x = Inputs::new(prior, ctx)?;
    gain_lowest(&x, prior, n)
}

fn gain_lowest(x: &Inputs, prior: &PriorState, n: usize) -> Result<InfoLedger> {
    let (g0, g1) = lowest_two(x, prior)?;
    let gn = x.gain(prior, n)?;
    let m = n as f64;
    Ok(InfoLedger::new(
        "gain-lowest",
        DELTA_I,
        gn,
        vec![(FIRST_GAIN, m * g1), (GROUND_GAIN, -(m - 1.0) * g0)],
    )
    .at_level(n))
}

fn check_mean(prior: &PriorState, mean: f64) -> Result<()> {
    let top = prior.top_level();
    // <n> = N exactly iff all prior mass sits on the top level
    if (0..top).all(|n| !prior.is_supported(n)) || mean >= top as f64 {
        return Err(Error::DegenerateMean(top));
    }
    Ok(())
}

/// `D = (N - <n>)/N dI(x_0|y_0) - (<n>/N) I(rev)`.
fn averaged_gain(x: &Inputs, prior: &PriorState) -> Result<InfoLedger> {
    let g0 = x.gain(prior, 0)?;
    let d = infotheory::relative_entropy(&x.null.posterior, prior)?;
    let frac = infotheory::mean_excitation(&x.null.posterior) / x.top;
    Ok(InfoLedger::new(
        "reversal-gain-avg",
        RELATIVE_ENTROPY,
        d,
        vec![(GROUND_GAIN, (1.0 - frac) * g0), (REVERSAL_TERM, -frac * x.i_rev)],
    ))
}

/// `I(y_0) = N/(N - <n>) D + <n>/(N - <n>) I(rev)`.
pub fn reversal_ledger_avg(prior: &PriorState, ctx: &DetectionContext) -> Result<InfoLedger> {
    let x = Inputs::new(prior, ctx)?;
    averaged(&x, prior)
}

fn averaged(x: &Inputs, prior: &PriorState) -> Result<InfoLedger> {
    let mean = infotheory::mean_excitation(&x.null.posterior);
    check_mean(prior, mean)?;
    let d = infotheory::relative_entropy(&x.null.posterior, prior)?;
    let span = x.top - mean;
    Ok(InfoLedger::new(
        "reversal-avg",
        LHS_OUTCOME,
        x.info,
        vec![
            (RELATIVE_ENTROPY, x.top * d / span),
            (REVERSAL_TERM, mean * x.i_rev / span),
        ],
    ))
}

/// Evaluates every reversal identity that applies to `(prior, tau)`.
///
/// Per-level identities run over supported levels; the `(N - n)` form skips
/// `n = N`, the ratio form skips `tau = 0`, the lowest-level forms need
/// levels 0 and 1 in support and the averaged forms need `<n> < N`. Skipped
/// instances are listed in `excluded`.
pub fn reversal_identity_suite(prior: &PriorState, ctx: &DetectionContext) -> Result<ReversalReport> {
    let x = Inputs::new(prior, ctx)?;
    let top = prior.top_level();
    let levels: Vec<usize> = (0..prior.dim()).filter(|&n| prior.is_supported(n)).collect();

    let mut ledgers = vec![balance(&x)];
    let mut excluded = Vec::new();
    let mut record = |name: &str, level: Option<usize>, r: Result<InfoLedger>| match r {
        Ok(l) => ledgers.push(l),
        Err(e) => excluded.push(Exclusion {
            identity: name.to_string(),
            level,
            reason: e.to_string(),
        }),
    };

    for &n in levels.iter().filter(|&&n| n < top) {
        record("reversal-level", Some(n), level_reversal(&x, prior, n));
    }
    record("reversal-decay", None, decay_split(&x, prior));
    for &n in &levels {
        record("reversal-gain", Some(n), gain_from_ground(&x, prior, n));
    }
    if ctx.tau() > 0.0 {
        for &n in &levels {
            record("level-ratio", Some(n), ratio(&x, prior, n));
        }
    } else {
        record("level-ratio", None, Err(Error::DegenerateRatio));
    }
    record("reversal-lowest", None, from_lowest(&x, prior));
    for &n in &levels {
        record("gain-lowest", Some(n), gain_lowest(&x, prior, n));
    }
    record("reversal-gain-avg", None, averaged_gain(&x, prior));
    record("reversal-avg", None, averaged(&x, prior));

    let mut warnings = Vec::new();
    if !prior.is_supported(top) {
        warnings.push(format!(
            "top level N = {top} has zero prior; p(rev) depends on the configured dimension"
        ));
    }
    let max_abs_residual = ledgers
        .iter()
        .filter_map(|l| l.residual)
        .fold(0.0, |m: f64, r| m.max(r.abs()));

    Ok(ReversalReport {
        p_rev: (-x.i_rev * LN_2).exp(),
        i_rev: x.i_rev,
        ledgers,
        excluded,
        warnings,
        max_abs_residual,
    })
}
