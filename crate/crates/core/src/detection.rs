//! Photon-counting measurement on a decaying mode.
//!
//! The outcome `y_k` (exactly `k` clicks in `[0, t]`) has likelihood
//!
//! ```text
//! p(y_k | x_n) = C(n, k) (1 - e^{-tau})^k e^{-(n - k) tau},   tau = 2 gamma t
//! ```
//!
//! Everything here is evaluated in the log domain first; `e^{-n tau}` leaves
//! the range of `f64` long before the long-time tails stop mattering.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::state::{AmplitudeVector, PriorState};

/// Decay rate, elapsed time and the rescaled time `tau = 2 gamma t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionContext {
    gamma: Option<f64>,
    t: Option<f64>,
    tau: f64,
}

impl DetectionContext {
    pub fn new(gamma: f64, t: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidContext(format!("gamma must be > 0, got {gamma}")));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidContext(format!("t must be >= 0, got {t}")));
        }
        Ok(Self {
            gamma: Some(gamma),
            t: Some(t),
            tau: 2.0 * gamma * t,
        })
    }

    /// Context given directly in rescaled time; rates are unavailable.
    pub fn from_tau(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidContext(format!("tau must be >= 0, got {tau}")));
        }
        Ok(Self {
            gamma: None,
            t: None,
            tau,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn t(&self) -> Option<f64> {
        self.t
    }

    /// `p(decay) = e^{-tau}`: one excitation emits nothing during `[0, t]`.
    pub fn survival_prob(&self) -> f64 {
        (-self.tau).exp()
    }

    pub fn log_survival_prob(&self) -> f64 {
        -self.tau
    }

    /// `p(no decay) = 1 - e^{-tau}`: one excitation escapes to the detector.
    pub fn escape_prob(&self) -> f64 {
        -(-self.tau).exp_m1()
    }

    pub fn log_escape_prob(&self) -> f64 {
        self.escape_prob().ln()
    }
}

pub fn survival_prob(ctx: &DetectionContext) -> f64 {
    ctx.survival_prob()
}

/// Number of detector clicks registered in `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Outcome(pub usize);

/// Probability vector over levels, kept together with its logarithms so
/// pointwise gains stay accurate when entries are tiny.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
    #[serde(skip)]
    log_probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > crate::state::NORM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self { probs, log_probs })
    }

    /// Normalizes unnormalized log-weights; `None` if all are `-inf`.
    pub fn from_log_weights(log_w: &[f64]) -> Option<Self> {
        let norm = log_sum_exp(log_w);
        if norm == f64::NEG_INFINITY {
            return None;
        }
        let log_probs: Vec<f64> = log_w.iter().map(|lw| lw - norm).collect();
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();
        Some(Self { probs, log_probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl From<&PriorState> for Distribution {
    fn from(p: &PriorState) -> Self {
        Self {
            probs: p.probs().to_vec(),
            log_probs: p.probs().iter().map(|x| x.ln()).collect(),
        }
    }
}

/// `ln sum_i exp(x_i)`, with the largest term factored out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let (imax, max) =
        xs.iter().copied().enumerate().fold(
            (usize::MAX, f64::NEG_INFINITY),
            |acc, (i, x)| {
                if x > acc.1 {
                    (i, x)
                } else {
                    acc
                }
            },
        );
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let rest: f64 = xs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != imax)
        .map(|(_, x)| (x - max).exp())
        .sum();
    max + rest.ln_1p()
}

/// `ln C(n, k)` through log-gamma; exactly zero on the edges `k = 0, n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma((n + 1) as f64) - libm::lgamma((k + 1) as f64) - libm::lgamma((n - k + 1) as f64)
}

/// `ln p(y_k | x_n)`.
pub fn log_likelihood(n: usize, k: usize, ctx: &DetectionContext) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let decay = -((n - k) as f64) * ctx.tau();
    if k == 0 {
        return decay;
    }
    if ctx.tau() == 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_binomial(n, k) + k as f64 * ctx.log_escape_prob() + decay
}

/// `p(y_k | x_n)`; exactly zero when `k > n`.
pub fn outcome_likelihood(n: usize, k: usize, ctx: &DetectionContext) -> f64 {
    log_likelihood(n, k, ctx).exp()
}

/// Straight evaluation of the binomial law without logarithms. Used to
/// cross-check the log-domain path where neither underflows.
pub fn outcome_likelihood_direct(n: usize, k: usize, ctx: &DetectionContext) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    binom * ctx.escape_prob().powi(k as i32) * ctx.survival_prob().powi((n - k) as i32)
}

fn joint_log_weights(prior: &PriorState, k: usize, ctx: &DetectionContext) -> Vec<f64> {
    prior
        .probs()
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            if p > 0.0 {
                p.ln() + log_likelihood(n, k, ctx)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// `ln p(y_k)`; `-inf` for an impossible outcome.
pub fn log_outcome_prob(prior: &PriorState, k: usize, ctx: &DetectionContext) -> f64 {
    if k == 0 && ctx.tau() == 0.0 {
        return 0.0;
    }
    log_sum_exp(&joint_log_weights(prior, k, ctx))
}

/// `p(y_k) = sum_n p(x_n) p(y_k | x_n)`.
pub fn outcome_prob(prior: &PriorState, k: usize, ctx: &DetectionContext) -> f64 {
    log_outcome_prob(prior, k, ctx).exp()
}

/// Bayes posterior `p(x_n | y_k)`.
pub fn posterior(prior: &PriorState, k: usize, ctx: &DetectionContext) -> Result<Distribution> {
    // zero-time null result leaves the prior untouched, bit for bit
    if k == 0 && ctx.tau() == 0.0 {
        return Ok(Distribution::from(prior));
    }
    Distribution::from_log_weights(&joint_log_weights(prior, k, ctx)).ok_or(Error::ImpossibleOutcome { k })
}

/// Post-measurement magnitudes `|<n| M_k |psi>| / norm`.
pub fn post_measurement_amplitudes(a: &AmplitudeVector, k: usize, ctx: &DetectionContext) -> Result<AmplitudeVector> {
    let log_mags: Vec<f64> = a
        .mags()
        .iter()
        .enumerate()
        .map(|(n, &m)| m.ln() + 0.5 * log_likelihood(n, k, ctx))
        .collect();
    let doubled: Vec<f64> = log_mags.iter().map(|l| 2.0 * l).collect();
    let log_norm = 0.5 * log_sum_exp(&doubled);
    if log_norm == f64::NEG_INFINITY {
        return Err(Error::ImpossibleOutcome { k });
    }
    AmplitudeVector::normalized(log_mags.iter().map(|l| (l - log_norm).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_prior, prior_from_amplitudes};
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn tau(t: f64) -> DetectionContext {
        DetectionContext::from_tau(t).unwrap()
    }

    #[test]
    fn context_validation() {
        assert!(DetectionContext::new(0.0, 1.0).is_err());
        assert!(DetectionContext::new(1.0, -1.0).is_err());
        assert!(DetectionContext::from_tau(f64::NAN).is_err());
        let c = DetectionContext::new(2.0, 0.25).unwrap();
        assert_eq!(c.tau(), 1.0);
        assert_eq!(c.gamma(), Some(2.0));
    }

    #[test]
    fn survival_values() {
        assert_eq!(survival_prob(&tau(0.0)), 1.0);
        assert!((survival_prob(&tau(LN_2)) - 0.5).abs() < 1e-15);
        let s = survival_prob(&tau(50.0));
        assert!(s > 0.0 && (s - 1.9287498479639178e-22).abs() < 1e-34);
        assert_eq!(tau(50.0).log_survival_prob(), -50.0);
    }

    #[test]
    fn likelihood_examples() {
        for t in [0.0, 0.3, 7.0] {
            assert_eq!(outcome_likelihood(0, 0, &tau(t)), 1.0);
            assert_eq!(outcome_likelihood(1, 2, &tau(t)), 0.0);
        }
        assert!((outcome_likelihood(2, 1, &tau(LN_2)) - 0.5).abs() < 1e-15);
        // 3 (1 - e^-0.7)^2 e^-0.7, evaluated at 40 digits
        assert!((outcome_likelihood(3, 2, &tau(0.7)) - 0.3775434124835354).abs() < 1e-14);
    }

    #[test]
    fn outcome_prob_examples() {
        let uni = make_prior(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(outcome_prob(&uni, 0, &tau(0.0)), 1.0);
        assert!((outcome_prob(&uni, 0, &tau(LN_2)) - 7.0 / 12.0).abs() < 1e-15);
        let fig = make_prior(&[0.5, 0.3, 0.2]).unwrap();
        assert!((outcome_prob(&fig, 1, &tau(LN_2)) - 0.25).abs() < 1e-15);
        assert_eq!(outcome_prob(&fig, 3, &tau(LN_2)), 0.0);
    }

    #[test]
    fn posterior_examples() {
        let fig = make_prior(&[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(posterior(&fig, 0, &tau(0.0)).unwrap().probs(), fig.probs());

        let uni = make_prior(&[1.0, 1.0, 1.0]).unwrap();
        let post = posterior(&uni, 0, &tau(LN_2)).unwrap();
        for (x, y) in post.probs().iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((x - y).abs() < 1e-15);
        }

        let uni4 = make_prior(&[1.0; 4]).unwrap();
        assert_eq!(posterior(&uni4, 3, &tau(0.4)).unwrap().probs(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn impossible_outcomes() {
        let uni4 = make_prior(&[1.0; 4]).unwrap();
        assert_eq!(posterior(&uni4, 4, &tau(1.0)), Err(Error::ImpossibleOutcome { k: 4 }));
        assert_eq!(posterior(&uni4, 1, &tau(0.0)), Err(Error::ImpossibleOutcome { k: 1 }));
        assert_eq!(outcome_prob(&uni4, 1, &tau(0.0)), 0.0);
    }

    #[test]
    fn amplitude_examples() {
        let ground = AmplitudeVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(
            post_measurement_amplitudes(&ground, 0, &tau(3.0)).unwrap().mags(),
            &[1.0, 0.0]
        );

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = AmplitudeVector::new(vec![h, h]).unwrap();
        let b = post_measurement_amplitudes(&a, 0, &tau(LN_2)).unwrap();
        assert!((b.mags()[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((b.mags()[1] - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);

        let s = 1.0 / 3.0f64.sqrt();
        let a = AmplitudeVector::new(vec![s, s, s]).unwrap();
        let b = post_measurement_amplitudes(&a, 2, &tau(0.5)).unwrap();
        assert_eq!(b.mags(), &[0.0, 0.0, 1.0]);
        assert!(post_measurement_amplitudes(&a, 3, &tau(0.5)).is_err());
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[-3.0]), -3.0);
        assert!((log_sum_exp(&[0.0, 0.0]) - LN_2).abs() < 1e-16);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (LN_2 - 1000.0)).abs() < 1e-12);
    }

    fn prior_strategy() -> impl Strategy<Value = PriorState> {
        prop::collection::vec(0.0f64..1.0, 2..9)
            .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3)
            .prop_map(|w| make_prior(&w).unwrap())
    }

    proptest! {
        #[test]
        fn outcome_probs_complete(prior in prior_strategy(), t in 0.0f64..50.0) {
            let ctx = tau(t);
            let total: f64 = (0..prior.dim()).map(|k| outcome_prob(&prior, k, &ctx)).sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn likelihood_is_binomial(n in 0usize..40, t in 0.0f64..30.0) {
            let ctx = tau(t);
            let total: f64 = (0..=n).map(|k| outcome_likelihood(n, k, &ctx)).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn log_and_direct_paths_agree(n in 0usize..8, k in 0usize..8, t in 0.0f64..30.0) {
            let ctx = tau(t);
            let a = outcome_likelihood(n, k, &ctx);
            let b = outcome_likelihood_direct(n, k, &ctx);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{} vs {}", a, b);
        }

        #[test]
        fn bayes_consistency(prior in prior_strategy(), t in 0.01f64..30.0, k in 0usize..8) {
            let ctx = tau(t);
            let evidence = outcome_prob(&prior, k, &ctx);
            prop_assume!(evidence > 0.0);
            let post = posterior(&prior, k, &ctx).unwrap();
            for n in 0..prior.dim() {
                let direct = prior.get(n) * outcome_likelihood(n, k, &ctx) / evidence;
                prop_assert!((post.get(n) - direct).abs() <= 1e-12);
            }
            prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn amplitudes_match_posterior(prior in prior_strategy(), t in 0.0f64..30.0, k in 0usize..4) {
            let ctx = tau(t);
            prop_assume!(outcome_prob(&prior, k, &ctx) > 0.0);
            let a = AmplitudeVector::normalized(prior.probs().iter().map(|p| p.sqrt()).collect()).unwrap();
            let b = post_measurement_amplitudes(&a, k, &ctx).unwrap();
            let post = posterior(&prior, k, &ctx).unwrap();
            let squared = prior_from_amplitudes(&b);
            for n in 0..prior.dim() {
                prop_assert!((squared.get(n) - post.get(n)).abs() <= 1e-12);
            }
        }

        #[test]
        fn null_prob_nonincreasing(prior in prior_strategy(), t in 0.0f64..30.0, dt in 0.0f64..5.0) {
            let a = outcome_prob(&prior, 0, &tau(t));
            let b = outcome_prob(&prior, 0, &tau(t + dt));
            prop_assert!(b <= a);
        }
    }
}
