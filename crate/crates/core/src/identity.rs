//! Balance identities behind one trait, registered by name.
//!
//! The CLI resolves `--avg`/`--k` (or an explicit identity name) through an
//! [`IdentityRegistry`] and evaluates whatever it finds there.

use crate::detection::DetectionContext;
use crate::error::{Error, Result};
use crate::infotheory::{self, InfoLedger};
use crate::reversal;
use crate::state::PriorState;

/// Which outcome and, for per-level identities, which level to evaluate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Selection {
    pub clicks: usize,
    /// `None` evaluates every applicable level.
    pub level: Option<usize>,
}

pub trait BalanceIdentity: Send + Sync {
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, sel: &Selection) -> Result<Vec<InfoLedger>>;
}

struct LevelBalance;

impl BalanceIdentity for LevelBalance {
    fn name(&self) -> &'static str {
        "kclick"
    }

    fn summary(&self) -> &'static str {
        "I(y_k) = dI(x_n|y_k) + (n-k) I(decay) + k I(no decay) - log2 C(n,k), per level"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, sel: &Selection) -> Result<Vec<InfoLedger>> {
        match sel.level {
            Some(n) => Ok(vec![infotheory::kclick_ledger(prior, ctx, sel.clicks, n)?]),
            None => infotheory::level_ledgers(prior, ctx, sel.clicks),
        }
    }
}

struct NullBalance;

impl BalanceIdentity for NullBalance {
    fn name(&self) -> &'static str {
        "null"
    }

    fn summary(&self) -> &'static str {
        "I(y_0) = dI(x_n|y_0) + n I(decay), per level"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, sel: &Selection) -> Result<Vec<InfoLedger>> {
        LevelBalance.evaluate(prior, ctx, &Selection { clicks: 0, ..*sel })
    }
}

struct AveragedBalance;

impl BalanceIdentity for AveragedBalance {
    fn name(&self) -> &'static str {
        "kclick-avg"
    }

    fn summary(&self) -> &'static str {
        "I(y_k) = D + (<n>-k) I(decay) + k I(no decay) - <I(W)>"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, sel: &Selection) -> Result<Vec<InfoLedger>> {
        Ok(vec![infotheory::kclick_ledger_avg(prior, ctx, sel.clicks)?])
    }
}

struct NullAveraged;

impl BalanceIdentity for NullAveraged {
    fn name(&self) -> &'static str {
        "null-avg"
    }

    fn summary(&self) -> &'static str {
        "I(y_0) = D + <n> I(decay)"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, _sel: &Selection) -> Result<Vec<InfoLedger>> {
        Ok(vec![infotheory::null_ledger_avg(prior, ctx)?])
    }
}

struct ReversalBalance;

impl BalanceIdentity for ReversalBalance {
    fn name(&self) -> &'static str {
        "reversal"
    }

    fn summary(&self) -> &'static str {
        "I(y_0) = N I(decay) - I(rev)"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, _sel: &Selection) -> Result<Vec<InfoLedger>> {
        Ok(vec![reversal::reversal_ledger(prior, ctx)?])
    }
}

struct ReversalAveraged;

impl BalanceIdentity for ReversalAveraged {
    fn name(&self) -> &'static str {
        "reversal-avg"
    }

    fn summary(&self) -> &'static str {
        "I(y_0) = N/(N-<n>) D + <n>/(N-<n>) I(rev)"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, _sel: &Selection) -> Result<Vec<InfoLedger>> {
        Ok(vec![reversal::reversal_ledger_avg(prior, ctx)?])
    }
}

struct ReversalSuite;

impl BalanceIdentity for ReversalSuite {
    fn name(&self) -> &'static str {
        "reversal-suite"
    }

    fn summary(&self) -> &'static str {
        "every applicable reversal identity"
    }

    fn evaluate(&self, prior: &PriorState, ctx: &DetectionContext, _sel: &Selection) -> Result<Vec<InfoLedger>> {
        Ok(reversal::reversal_identity_suite(prior, ctx)?.ledgers)
    }
}

/// Identities in registration order.
#[derive(Default)]
pub struct IdentityRegistry {
    entries: Vec<Box<dyn BalanceIdentity>>,
}

impl IdentityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Box::new(NullBalance));
        r.register(Box::new(NullAveraged));
        r.register(Box::new(LevelBalance));
        r.register(Box::new(AveragedBalance));
        r.register(Box::new(ReversalBalance));
        r.register(Box::new(ReversalAveraged));
        r.register(Box::new(ReversalSuite));
        r
    }

    /// Adds an identity, replacing any previous one with the same name.
    pub fn register(&mut self, identity: Box<dyn BalanceIdentity>) {
        self.entries.retain(|e| e.name() != identity.name());
        self.entries.push(identity);
    }

    pub fn get(&self, name: &str) -> Result<&dyn BalanceIdentity> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "identity",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn BalanceIdentity> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

/// Identity picked by the `--avg` / `--k` flags.
pub fn default_identity(avg: bool, clicks: usize) -> &'static str {
    match (avg, clicks) {
        (false, 0) => "null",
        (true, 0) => "null-avg",
        (false, _) => "kclick",
        (true, _) => "kclick-avg",
    }
}
