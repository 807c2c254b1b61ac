//! Invariant suite behind `weakinfo verify`.
//!
//! Each family of checks implements [`CheckFamily`] and is registered by
//! name in a [`VerifyRegistry`]. A family reports how many checks it ran, how
//! many failed and the worst deviation it saw; the report is deterministic
//! for a fixed oracle configuration.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::detection::{self, DetectionContext};
use crate::error::{Error, Result};
use crate::infotheory::{
    self, pointwise_gain, small_time_rate, InfoLedger, DECAY_TERM, LHS_OUTCOME, MULTIPLICITY_TERM, RELATIVE_ENTROPY,
    RESIDUAL_TOL,
};
use crate::oracle::{self, OracleConfig};
use crate::reversal;
use crate::state::{make_prior, AmplitudeVector, PriorState};
use crate::sweep::{self, GridSpec};

/// Rescaled times of the standard test matrix.
pub const STANDARD_TAUS: [f64; 8] = [0.01, 0.1, LN_2, 1.0, 2.0, 5.0, 10.0, 30.0];

/// Acceptance band of the Monte Carlo comparisons, in standard errors.
pub const ORACLE_SIGMAS: f64 = 4.0;

/// Significance level of the click-count goodness-of-fit test.
pub const CHI_SQUARE_ALPHA: f64 = 1e-4;

/// Standard prior matrix: dimensions 2 to 8, the figure priors, degenerate
/// and gapped supports.
pub fn standard_priors() -> Vec<PriorState> {
    let third = 1.0 / 3.0;
    let geometric: Vec<f64> = (0..7).map(|n| 0.5f64.powi(n)).collect();
    let thermal: Vec<f64> = (0..8).map(|n| (-0.7 * n as f64).exp()).collect();
    let weights: Vec<Vec<f64>> = vec![
        vec![0.5, 0.5],
        vec![0.2, 0.8],
        vec![0.9, 0.1],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![third, third, third],
        vec![0.2, 0.4, 0.4],
        vec![0.5, 0.3, 0.2],
        vec![0.2, 0.2, 0.6],
        vec![0.5, 0.0, 0.5],
        vec![0.0, 0.3, 0.7],
        vec![0.25; 4],
        vec![0.1, 0.2, 0.3, 0.4],
        vec![0.7, 0.1, 0.1, 0.1],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.05, 0.1, 0.2, 0.3, 0.35],
        vec![0.2; 5],
        vec![0.3, 0.0, 0.2, 0.0, 0.1, 0.4],
        vec![1.0; 6],
        geometric,
        vec![1.0; 8],
        thermal,
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    ];
    weights.iter().map(|w| make_prior(w).expect("valid prior")).collect()
}

/// Deliberate corruption used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    DecaySignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub oracle: OracleConfig,
    pub fault: Option<Fault>,
}

impl VerifyConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        Ok(Self {
            oracle: OracleConfig::new(trials, seed)?,
            fault: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// Largest deviation seen, in the family's own unit.
    pub worst: f64,
    pub first_failure: Option<String>,
}

/// Running tally for one family.
struct Tally {
    checks: usize,
    failures: usize,
    worst: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checks: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
        }
    }

    /// Records a deviation against its limit.
    fn check(&mut self, deviation: f64, limit: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if deviation.is_finite() {
            self.worst = self.worst.max(deviation);
        }
        if deviation.is_nan() || deviation > limit {
            self.fail(what);
        }
    }

    fn holds(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.fail(what);
        }
    }

    fn fail(&mut self, what: impl FnOnce() -> String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(what());
        }
    }

    fn ledger(&mut self, l: &InfoLedger, what: impl FnOnce() -> String) {
        match l.residual {
            Some(r) => self.check(r.abs(), RESIDUAL_TOL, what),
            None => self.holds(false, || format!("{} (non-finite ledger)", what())),
        }
    }

    fn finish(self, name: &str) -> FamilyResult {
        FamilyResult {
            name: name.to_string(),
            passed: self.failures == 0,
            checks: self.checks,
            failures: self.failures,
            worst: self.worst,
            first_failure: self.first_failure,
        }
    }
}

fn rel_dev(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn tau(t: f64) -> DetectionContext {
    DetectionContext::from_tau(t).expect("nonnegative tau")
}

pub trait CheckFamily: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, cfg: &VerifyConfig) -> Result<FamilyResult>;
}

struct Normalization;

impl CheckFamily for Normalization {
    fn name(&self) -> &'static str {
        "normalization"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for prior in standard_priors() {
            for &x in STANDARD_TAUS.iter().chain(&[0.0, 50.0]) {
                let ctx = tau(x);
                let total: f64 = (0..prior.dim()).map(|k| detection::outcome_prob(&prior, k, &ctx)).sum();
                t.check((total - 1.0).abs(), 1e-10, || format!("sum_k p(y_k) at tau={x}"));
                for n in 0..prior.dim() {
                    let s: f64 = (0..=n).map(|k| detection::outcome_likelihood(n, k, &ctx)).sum();
                    t.check((s - 1.0).abs(), 1e-12, || format!("sum_k p(y_k|x_{n}) at tau={x}"));
                }
            }
        }
        Ok(t.finish(self.name()))
    }
}

struct Bayes;

impl CheckFamily for Bayes {
    fn name(&self) -> &'static str {
        "bayes"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for prior in standard_priors() {
            let amps = AmplitudeVector::normalized(prior.probs().iter().map(|p| p.sqrt()).collect())?;
            for &x in &STANDARD_TAUS {
                let ctx = tau(x);
                for k in 0..prior.dim() {
                    let evidence = detection::outcome_prob(&prior, k, &ctx);
                    if evidence == 0.0 {
                        continue;
                    }
                    let post = detection::posterior(&prior, k, &ctx)?;
                    let after = detection::post_measurement_amplitudes(&amps, k, &ctx)?;
                    for n in 0..prior.dim() {
                        let direct = prior.get(n) * detection::outcome_likelihood(n, k, &ctx) / evidence;
                        t.check((post.get(n) - direct).abs(), 1e-12, || {
                            format!("posterior n={n} k={k} tau={x}")
                        });
                        t.check((after.mags()[n].powi(2) - post.get(n)).abs(), 1e-12, || {
                            format!("amplitude n={n} k={k} tau={x}")
                        });
                    }
                }
            }
        }
        Ok(t.finish(self.name()))
    }
}

struct Conservation;

impl CheckFamily for Conservation {
    fn name(&self) -> &'static str {
        "conservation"
    }

    fn run(&self, cfg: &VerifyConfig) -> Result<FamilyResult> {
        let corrupt = |l: InfoLedger| match cfg.fault {
            Some(Fault::DecaySignFlip) => l.with_term_negated(DECAY_TERM),
            None => l,
        };
        let mut t = Tally::new();
        for prior in standard_priors() {
            for &x in &STANDARD_TAUS {
                let ctx = tau(x);
                for l in infotheory::level_ledgers(&prior, &ctx, 0)? {
                    let n = l.level;
                    t.ledger(&corrupt(l), || {
                        format!("null n={n:?} tau={x} prior={:?}", prior.probs())
                    });
                }
                let avg = corrupt(infotheory::null_ledger_avg(&prior, &ctx)?);
                t.ledger(&avg, || format!("null-avg tau={x} prior={:?}", prior.probs()));
            }
        }
        Ok(t.finish(self.name()))
    }
}

struct Bound;

impl CheckFamily for Bound {
    fn name(&self) -> &'static str {
        "bound"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for prior in standard_priors() {
            for &x in STANDARD_TAUS.iter().chain(&[0.0]) {
                let l = infotheory::null_ledger_avg(&prior, &tau(x))?;
                let d = l.term(RELATIVE_ENTROPY).unwrap_or(f64::NAN);
                t.check((-d).max(d - l.lhs).max(0.0), RESIDUAL_TOL, || {
                    format!("0 <= D <= I(y_0) at tau={x} prior={:?}", prior.probs())
                });
            }
        }
        Ok(t.finish(self.name()))
    }
}

struct KClick;

impl CheckFamily for KClick {
    fn name(&self) -> &'static str {
        "kclick"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for prior in standard_priors().into_iter().filter(|p| p.dim() <= 6) {
            for x in [0.1, LN_2, 2.0, 10.0] {
                let ctx = tau(x);
                for k in 0..prior.dim() {
                    if detection::outcome_prob(&prior, k, &ctx) == 0.0 {
                        continue;
                    }
                    for l in infotheory::level_ledgers(&prior, &ctx, k)? {
                        let n = l.level;
                        t.ledger(&l, || format!("kclick k={k} n={n:?} tau={x}"));
                        if k == 0 {
                            let null = infotheory::null_ledger(&prior, &ctx, n.unwrap_or(0))?;
                            let dev = l
                                .terms
                                .iter()
                                .map(|term| (term.bits - null.term(&term.name).unwrap_or(0.0)).abs())
                                .fold((l.lhs - null.lhs).abs(), f64::max);
                            t.check(dev, 1e-12, || format!("k=0 reduces to null at n={n:?} tau={x}"));
                        }
                    }
                    let avg = infotheory::kclick_ledger_avg(&prior, &ctx, k)?;
                    t.ledger(&avg, || format!("kclick-avg k={k} tau={x}"));
                }
            }
        }
        Ok(t.finish(self.name()))
    }
}

struct Reversal;

impl CheckFamily for Reversal {
    fn name(&self) -> &'static str {
        "reversal"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for prior in standard_priors() {
            for &x in STANDARD_TAUS.iter().chain(&[0.0]) {
                let r = reversal::reversal_identity_suite(&prior, &tau(x))?;
                t.check(r.max_abs_residual, RESIDUAL_TOL, || {
                    format!("reversal suite tau={x} prior={:?}", prior.probs())
                });
                t.holds((0.0..=1.0).contains(&r.p_rev), || format!("p(rev) in [0,1] at tau={x}"));
            }
        }
        Ok(t.finish(self.name()))
    }
}

/// `ln p(y_0)` split as `ln p_m - m tau + ln(1 + S(tau))`, with `m` the
/// lowest supported level, so that the slope survives when the excited
/// populations are far below machine epsilon relative to `p_m`.
fn ln_null_prob_split(prior: &PriorState, x: f64) -> (usize, f64) {
    let m = (0..prior.dim()).find(|&n| prior.is_supported(n)).unwrap_or(0);
    let pm = prior.get(m);
    let s: f64 = (m + 1..prior.dim())
        .map(|n| prior.get(n) / pm * (-((n - m) as f64) * x).exp())
        .sum();
    (m, s.ln_1p())
}

/// `-d/dtau ln p(y_0)` by central differences with step `h`.
pub fn mean_excitation_fd(prior: &PriorState, x: f64, h: f64) -> f64 {
    let (m, up) = ln_null_prob_split(prior, x + h);
    let (_, down) = ln_null_prob_split(prior, x - h);
    m as f64 - (up - down) / (2.0 * h)
}

struct LogDerivative;

impl CheckFamily for LogDerivative {
    fn name(&self) -> &'static str {
        "log-derivative"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for prior in standard_priors() {
            for &x in &STANDARD_TAUS {
                let post = detection::posterior(&prior, 0, &tau(x))?;
                let mean = infotheory::mean_excitation(&post);
                let fd = mean_excitation_fd(&prior, x, 1e-5);
                t.check(rel_dev(mean, fd), 1e-6, || {
                    format!("<n> vs -d ln p(y_0)/dtau at tau={x} prior={:?}", prior.probs())
                });
            }
        }
        Ok(t.finish(self.name()))
    }
}

/// Richardson-extrapolated initial slope of `dI(x_0|y_0)` in `t`.
pub fn ground_gain_slope(prior: &PriorState, gamma: f64, h: f64) -> Result<f64> {
    let gain = |t: f64| -> Result<f64> {
        let ctx = DetectionContext::new(gamma, t)?;
        if prior.is_supported(0) {
            pointwise_gain(prior, &detection::posterior(prior, 0, &ctx)?, 0)
        } else {
            // dI(x_0|y_0) = I(y_0) on the ground level
            Ok(-detection::log_outcome_prob(prior, 0, &ctx) / LN_2)
        }
    };
    let coarse = gain(h)? / h;
    let fine = gain(h / 2.0)? / (h / 2.0);
    Ok(2.0 * fine - coarse)
}

struct SmallTime;

impl CheckFamily for SmallTime {
    fn name(&self) -> &'static str {
        "small-time"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        for w in [[0.5, 0.5], [0.2, 0.8], [0.9, 0.1], [1.0, 0.0], [0.0, 1.0]] {
            let prior = make_prior(&w)?;
            for gamma in [1.0, 3.5] {
                let rate = small_time_rate(&prior, gamma)?;
                let slope = ground_gain_slope(&prior, gamma, 1e-4 / gamma)?;
                let dev = if rate == 0.0 { slope.abs() } else { rel_dev(slope, rate) };
                t.check(dev, 1e-6, || format!("initial rate prior={w:?} gamma={gamma}"));
            }
        }
        let extremes = [
            (small_time_rate(&make_prior(&[1.0, 0.0])?, 1.0)?, 0.0),
            (small_time_rate(&make_prior(&[0.0, 1.0])?, 1.0)?, 2.0 / LN_2),
        ];
        for (got, want) in extremes {
            t.check((got - want).abs(), 1e-15, || format!("extreme rate {want}"));
        }
        Ok(t.finish(self.name()))
    }
}

struct Saturation;

impl CheckFamily for Saturation {
    fn name(&self) -> &'static str {
        "saturation"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        let long = GridSpec::linear(0.0, 20.0, 400)?;
        let qutrit = make_prior(&[1.0, 1.0, 1.0])?;
        let s = sweep::sweep_null_avg(&qutrit, &long)?;
        let lhs = s.column(LHS_OUTCOME);
        t.check((lhs[lhs.len() - 1] - 3f64.log2()).abs(), 1e-3, || {
            "qutrit I(y_0) at tau=20".into()
        });
        t.holds(lhs.windows(2).all(|w| w[1] >= w[0]), || "qutrit I(y_0) monotone".into());

        let uni4 = make_prior(&[1.0; 4])?;
        let s = sweep::sweep_kclick_avg(&uni4, &long, 0)?;
        let lhs = s.column(LHS_OUTCOME);
        t.check((lhs[lhs.len() - 1] - 2.0).abs(), 1e-3, || {
            "uniform-4 I(y_0) at tau=20".into()
        });
        let d = s.column(RELATIVE_ENTROPY);
        t.holds(d.windows(2).all(|w| w[1] >= w[0] - 1e-12), || "null D monotone".into());

        let late = GridSpec::linear(0.01, 20.0, 400)?;
        for k in 1..4 {
            let s = sweep::sweep_kclick_avg(&uni4, &late, k)?;
            let lhs = s.column(LHS_OUTCOME);
            t.check((lhs[lhs.len() - 1] - 2.0).abs(), 1e-3, || {
                format!("uniform-4 I(y_{k}) at tau=20")
            });
            if k == 3 {
                for (d, w) in s.column(RELATIVE_ENTROPY).iter().zip(s.column(MULTIPLICITY_TERM)) {
                    t.check((d - 2.0).abs(), 1e-9, || "k=3 relative entropy constant".into());
                    t.holds(w == 0.0, || "k=3 multiplicity identically 0".into());
                }
            }
        }
        Ok(t.finish(self.name()))
    }
}

/// Root of `tau = 1 + e^{-tau}` by bisection.
pub fn qubit_peak_root() -> f64 {
    let (mut a, mut b) = (1.0f64, 2.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m - 1.0 - (-m).exp() > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

struct Peak;

impl CheckFamily for Peak {
    fn name(&self) -> &'static str {
        "peak"
    }

    fn run(&self, _cfg: &VerifyConfig) -> Result<FamilyResult> {
        let mut t = Tally::new();
        let grid = GridSpec::linear(0.0, 8.0, 400)?;
        let r = sweep::find_decay_term_peak(&make_prior(&[0.5, 0.5])?, &grid)?;
        t.check((r.tau_star - 1.0 - (-r.tau_star).exp()).abs(), 1e-4, || {
            "qubit tau* = 1 + e^-tau*".into()
        });
        t.check((r.tau_star - qubit_peak_root()).abs(), 1e-4, || {
            "qubit tau* vs bisection".into()
        });
        for w in [vec![1.0; 3], vec![1.0; 4]] {
            let r = sweep::find_decay_term_peak(&make_prior(&w)?, &grid)?;
            t.check(r.consistency_gap, 1e-4, || format!("peak consistency prior={w:?}"));
        }
        Ok(t.finish(self.name()))
    }
}

/// Priors from the figure captions.
pub fn caption_priors() -> Vec<PriorState> {
    let third = 1.0 / 3.0;
    [
        vec![third, third, third],
        vec![0.2, 0.4, 0.4],
        vec![0.5, 0.3, 0.2],
        vec![0.2, 0.2, 0.6],
        vec![0.25; 4],
    ]
    .iter()
    .map(|w| make_prior(w).expect("valid prior"))
    .collect()
}

struct Oracle;

impl CheckFamily for Oracle {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn run(&self, cfg: &VerifyConfig) -> Result<FamilyResult> {
        let oc = &cfg.oracle;
        let mut t = Tally::new();
        for x in [0.1, LN_2, 0.7, 2.0] {
            let ctx = tau(x);
            for n in 0..=6 {
                let hist = oracle::click_histogram(n, &ctx, oc);
                let exact: Vec<f64> = (0..=n).map(|k| detection::outcome_likelihood(n, k, &ctx)).collect();
                if n <= 5 {
                    for (k, (&c, &p)) in hist.iter().zip(&exact).enumerate() {
                        let v = c as f64 / oc.trials as f64;
                        t.check(oracle::deviation_sigmas(v, p, oc.trials), ORACLE_SIGMAS, || {
                            format!("p(y_{k}|x_{n}) at tau={x}")
                        });
                    }
                }
                if x != 0.7 {
                    let gof = oracle::chi_square_gof(&hist, &exact);
                    t.holds(gof.p_value >= CHI_SQUARE_ALPHA, || {
                        format!("chi-square n={n} tau={x} p={}", gof.p_value)
                    });
                }
            }
        }
        let ctx = tau(LN_2);
        for prior in caption_priors() {
            let joint = oracle::joint_counts(&prior, &ctx, oc);
            for k in 0..prior.dim() {
                let column: Vec<u64> = joint.iter().map(|row| row[k]).collect();
                let count: u64 = column.iter().sum();
                let v = count as f64 / oc.trials as f64;
                let exact = detection::outcome_prob(&prior, k, &ctx);
                t.check(oracle::deviation_sigmas(v, exact, oc.trials), ORACLE_SIGMAS, || {
                    format!("p(y_{k}) prior={:?}", prior.probs())
                });
                if count < oracle::MIN_CONDITIONED {
                    continue;
                }
                let post = detection::posterior(&prior, k, &ctx)?;
                for (n, &c) in column.iter().enumerate() {
                    let f = c as f64 / count as f64;
                    t.check(oracle::deviation_sigmas(f, post.get(n), count), ORACLE_SIGMAS, || {
                        format!("p(x_{n}|y_{k}) prior={:?}", prior.probs())
                    });
                }
            }
        }
        Ok(t.finish(self.name()))
    }
}

#[derive(Default)]
pub struct VerifyRegistry {
    families: Vec<Box<dyn CheckFamily>>,
}

impl VerifyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Box::new(Normalization));
        r.register(Box::new(Bayes));
        r.register(Box::new(Conservation));
        r.register(Box::new(Bound));
        r.register(Box::new(KClick));
        r.register(Box::new(Reversal));
        r.register(Box::new(LogDerivative));
        r.register(Box::new(SmallTime));
        r.register(Box::new(Saturation));
        r.register(Box::new(Peak));
        r.register(Box::new(Oracle));
        r
    }

    pub fn register(&mut self, family: Box<dyn CheckFamily>) {
        self.families.retain(|f| f.name() != family.name());
        self.families.push(family);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.iter().map(|f| f.name()).collect()
    }

    /// Keeps only the named families, in registry order.
    pub fn only(mut self, names: &[&str]) -> Result<Self> {
        for name in names {
            if !self.families.iter().any(|f| f.name() == *name) {
                return Err(Error::Unknown {
                    kind: "check family",
                    name: name.to_string(),
                });
            }
        }
        self.families.retain(|f| names.contains(&f.name()));
        Ok(self)
    }

    pub fn run(&self, cfg: &VerifyConfig) -> Result<VerifyReport> {
        let families = self.families.iter().map(|f| f.run(cfg)).collect::<Result<Vec<_>>>()?;
        Ok(VerifyReport {
            passed: families.iter().all(|f| f.passed),
            trials: cfg.oracle.trials,
            seed: cfg.oracle.seed,
            families,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub trials: u64,
    pub seed: u64,
    pub families: Vec<FamilyResult>,
}

impl VerifyReport {
    pub fn failed_families(&self) -> Vec<&str> {
        self.families
            .iter()
            .filter(|f| !f.passed)
            .map(|f| f.name.as_str())
            .collect()
    }
}
