//! Information functionals and the outcome-resolved balance ledgers.
//!
//! Every ledger has the shape `lhs = sum(terms)` and carries its residual
//! `lhs - sum(terms)`. For an outcome `y_k` and level `n >= k`:
//!
//! ```text
//! I(y_k) = dI(x_n|y_k) + (n - k) I(decay) + k I(no decay) - log2 C(n, k)
//! I(y_k) = D(post || prior) + (<n> - k) I(decay) + k I(no decay) - <log2 C(n, k)>
//! ```
//!
//! with `I(decay) = tau / ln 2` and `I(no decay) = -log2(1 - e^{-tau})`. The
//! null result is the `k = 0` case.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::detection::{self, DetectionContext, Distribution};
use crate::error::{Error, Result};
use crate::state::PriorState;

/// Residual budget, in bits, for every balance identity.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub const LHS_OUTCOME: &str = "I_outcome";
pub const DELTA_I: &str = "delta_I";
pub const DECAY_TERM: &str = "decay_term";
pub const NO_DECAY_TERM: &str = "no_decay_term";
pub const MULTIPLICITY_TERM: &str = "multiplicity_term";
pub const RELATIVE_ENTROPY: &str = "relative_entropy";
pub const REVERSAL_TERM: &str = "reversal_term";

/// Information content in bits; `+inf` for impossible events.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct InfoValue(f64);

impl InfoValue {
    pub fn bits(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub bits: f64,
}

/// One instance of a balance identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoLedger {
    pub identity: String,
    pub level: Option<usize>,
    pub clicks: Option<usize>,
    pub lhs_name: String,
    pub lhs: f64,
    pub terms: Vec<Term>,
    /// `lhs - sum(terms)`; `None` when any entry is infinite.
    pub residual: Option<f64>,
}

impl InfoLedger {
    pub fn new(identity: &str, lhs_name: &str, lhs: f64, terms: Vec<(&str, f64)>) -> Self {
        let terms: Vec<Term> = terms
            .into_iter()
            .map(|(name, bits)| Term {
                name: name.to_string(),
                bits: bits + 0.0, // store +0 rather than -0
            })
            .collect();
        let mut ledger = Self {
            identity: identity.to_string(),
            level: None,
            clicks: None,
            lhs_name: lhs_name.to_string(),
            lhs: lhs + 0.0,
            terms,
            residual: None,
        };
        ledger.recompute_residual();
        ledger
    }

    pub fn at_level(mut self, n: usize) -> Self {
        self.level = Some(n);
        self
    }

    pub fn with_clicks(mut self, k: usize) -> Self {
        self.clicks = Some(k);
        self
    }

    fn recompute_residual(&mut self) {
        let finite = self.lhs.is_finite() && self.terms.iter().all(|t| t.bits.is_finite());
        self.residual = finite.then(|| self.lhs - self.terms.iter().map(|t| t.bits).sum::<f64>());
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.bits)
    }

    /// Flips the sign of one term. Only used to check that the verifier
    /// notices a broken identity.
    pub fn with_term_negated(mut self, name: &str) -> Self {
        for t in self.terms.iter_mut().filter(|t| t.name == name) {
            t.bits = -t.bits;
        }
        self.recompute_residual();
        self
    }

    /// True when the residual is within `tol`, or not applicable.
    pub fn balances(&self, tol: f64) -> bool {
        self.residual.is_none_or(|r| r.abs() <= tol)
    }
}

/// One sample of a ledger along a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub tau: f64,
    pub ledger: InfoLedger,
}

/// `-log2 p`.
pub fn info_content(p: f64) -> Result<InfoValue> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(p));
    }
    Ok(InfoValue(-p.log2() + 0.0))
}

/// `I(decay) = -log2 e^{-tau}`, straight from `tau`.
pub fn decay_info(ctx: &DetectionContext) -> f64 {
    ctx.tau() / LN_2
}

/// `I(no decay) = -log2(1 - e^{-tau})`; infinite at `tau = 0`.
pub fn no_decay_info(ctx: &DetectionContext) -> f64 {
    -ctx.log_escape_prob() / LN_2
}

/// `dI(x_n|y) = log2 p(x_n|y) / p(x_n)`.
pub fn pointwise_gain(prior: &PriorState, post: &Distribution, n: usize) -> Result<f64> {
    let p = prior.get(n);
    if p <= 0.0 {
        return Err(Error::UnsupportedLevel(n));
    }
    let log_post = post.log_probs().get(n).copied().unwrap_or(f64::NEG_INFINITY);
    Ok((log_post - p.ln()) / LN_2)
}

/// `D(post || prior)` in bits, with `0 log 0 = 0`.
pub fn relative_entropy(post: &Distribution, prior: &PriorState) -> Result<f64> {
    let mut d = 0.0;
    for (n, (&q, &lq)) in post.probs().iter().zip(post.log_probs()).enumerate() {
        if q == 0.0 {
            continue;
        }
        let p = prior.get(n);
        if p <= 0.0 {
            return Err(Error::SupportViolation(n));
        }
        d += q * (lq - p.ln());
    }
    Ok(d / LN_2)
}

/// `<n> = sum_n n p(x_n)`.
pub fn mean_excitation(post: &Distribution) -> f64 {
    post.probs().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

pub fn excitation_variance(post: &Distribution) -> f64 {
    let mean = mean_excitation(post);
    post.probs()
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
        .sum()
}

/// `<I(W)> = sum_n log2 C(n, k) p(x_n|y_k)`.
pub fn mean_multiplicity_info(post: &Distribution, k: usize) -> Result<f64> {
    let mut acc = 0.0;
    for (n, &p) in post.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        if n < k {
            return Err(Error::SupportViolation(n));
        }
        acc += p * detection::ln_binomial(n, k);
    }
    Ok(acc / LN_2)
}

/// Outcome evidence and posterior, computed once and shared by every ledger
/// built for the same `(prior, k, tau)`.
#[derive(Debug, Clone)]
pub struct Measured {
    pub k: usize,
    pub info: f64,
    pub posterior: Distribution,
}

impl Measured {
    pub fn new(prior: &PriorState, k: usize, ctx: &DetectionContext) -> Result<Self> {
        let log_evidence = detection::log_outcome_prob(prior, k, ctx);
        if log_evidence == f64::NEG_INFINITY {
            return Err(Error::ImpossibleOutcome { k });
        }
        Ok(Self {
            k,
            info: -log_evidence / LN_2 + 0.0,
            posterior: detection::posterior(prior, k, ctx)?,
        })
    }
}

fn check_level(prior: &PriorState, n: usize, k: usize) -> Result<()> {
    if !prior.is_supported(n) {
        return Err(Error::UnsupportedLevel(n));
    }
    if n < k {
        return Err(Error::LevelBelowClicks { n, k });
    }
    Ok(())
}

fn level_ledger(m: &Measured, prior: &PriorState, ctx: &DetectionContext, n: usize) -> Result<InfoLedger> {
    check_level(prior, n, m.k)?;
    let gain = pointwise_gain(prior, &m.posterior, n)?;
    let decay = (n - m.k) as f64 * decay_info(ctx);
    let ledger = if m.k == 0 {
        InfoLedger::new("null", LHS_OUTCOME, m.info, vec![(DELTA_I, gain), (DECAY_TERM, decay)])
    } else {
        InfoLedger::new(
            "kclick",
            LHS_OUTCOME,
            m.info,
            vec![
                (DELTA_I, gain),
                (DECAY_TERM, decay),
                (NO_DECAY_TERM, m.k as f64 * no_decay_info(ctx)),
                (MULTIPLICITY_TERM, -detection::ln_binomial(n, m.k) / LN_2),
            ],
        )
    };
    Ok(ledger.at_level(n).with_clicks(m.k))
}

fn averaged_ledger(m: &Measured, prior: &PriorState, ctx: &DetectionContext) -> Result<InfoLedger> {
    let d = relative_entropy(&m.posterior, prior)?;
    let mean = mean_excitation(&m.posterior);
    let decay = (mean - m.k as f64) * decay_info(ctx);
    let ledger = if m.k == 0 {
        InfoLedger::new(
            "null-avg",
            LHS_OUTCOME,
            m.info,
            vec![(RELATIVE_ENTROPY, d), (DECAY_TERM, decay)],
        )
    } else {
        InfoLedger::new(
            "kclick-avg",
            LHS_OUTCOME,
            m.info,
            vec![
                (RELATIVE_ENTROPY, d),
                (DECAY_TERM, decay),
                (NO_DECAY_TERM, m.k as f64 * no_decay_info(ctx)),
                (MULTIPLICITY_TERM, -mean_multiplicity_info(&m.posterior, m.k)?),
            ],
        )
    };
    Ok(ledger.with_clicks(m.k))
}

/// Null-result balance `I(y_0) = dI(x_n|y_0) + n I(decay)` at one level.
pub fn null_ledger(prior: &PriorState, ctx: &DetectionContext, n: usize) -> Result<InfoLedger> {
    check_level(prior, n, 0)?;
    level_ledger(&Measured::new(prior, 0, ctx)?, prior, ctx, n)
}

/// Per-level ledgers for every supported level `n >= k`, sharing one
/// evidence computation.
pub fn level_ledgers(prior: &PriorState, ctx: &DetectionContext, k: usize) -> Result<Vec<InfoLedger>> {
    let m = Measured::new(prior, k, ctx)?;
    (k..prior.dim())
        .filter(|&n| prior.is_supported(n))
        .map(|n| level_ledger(&m, prior, ctx, n))
        .collect()
}

/// Averaged null balance `I(y_0) = D + <n> I(decay)`.
pub fn null_ledger_avg(prior: &PriorState, ctx: &DetectionContext) -> Result<InfoLedger> {
    averaged_ledger(&Measured::new(prior, 0, ctx)?, prior, ctx)
}

/// k-click balance at a single level.
pub fn kclick_ledger(prior: &PriorState, ctx: &DetectionContext, k: usize, n: usize) -> Result<InfoLedger> {
    check_level(prior, n, k)?;
    level_ledger(&Measured::new(prior, k, ctx)?, prior, ctx, n)
}

pub fn kclick_ledger_avg(prior: &PriorState, ctx: &DetectionContext, k: usize) -> Result<InfoLedger> {
    averaged_ledger(&Measured::new(prior, k, ctx)?, prior, ctx)
}

/// Initial rate of `dI(x_0|y_0)` for a qubit, `2 gamma |c_1|^2 / ln 2` bits/s.
pub fn small_time_rate(prior_qubit: &PriorState, gamma: f64) -> Result<f64> {
    if prior_qubit.dim() != 2 {
        return Err(Error::NotAQubit(prior_qubit.dim()));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidContext(format!("gamma must be > 0, got {gamma}")));
    }
    Ok(2.0 * gamma * prior_qubit.get(1) / LN_2)
}
