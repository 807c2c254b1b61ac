//! Fock-state priors over levels `0..=N`.
//!
//! Only the populations `|c_n|^2` enter any of the information relations, so
//! amplitudes are stored as nonnegative magnitudes and phases never appear.
//! A vector of length `L` describes levels `0..=N` with `N = L - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the normalization of probability vectors.
pub const NORM_TOL: f64 = 1e-12;

/// Validated prior populations `p(x_n)` over levels `0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorState {
    probs: Vec<f64>,
}

impl PriorState {
    /// Accepts an already normalized probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_weights(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of levels, `N + 1`.
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Highest level index `N`.
    pub fn top_level(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn is_supported(&self, n: usize) -> bool {
        self.get(n) > 0.0
    }
}

impl TryFrom<Vec<f64>> for PriorState {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<PriorState> for Vec<f64> {
    fn from(p: PriorState) -> Self {
        p.probs
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.len() < 2 {
        return Err(Error::EmptyOrSingleLevel(weights.len()));
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    Ok(())
}

/// Normalizes nonnegative weights into a prior.
pub fn make_prior(weights: &[f64]) -> Result<PriorState> {
    check_weights(weights)?;
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::AllZero);
    }
    Ok(PriorState {
        probs: weights.iter().map(|w| w / sum).collect(),
    })
}

/// Amplitude magnitudes `|c_n|` of a pure single-mode state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeVector {
    mags: Vec<f64>,
}

impl AmplitudeVector {
    pub fn new(mags: Vec<f64>) -> Result<Self> {
        check_weights(&mags)?;
        let norm: f64 = mags.iter().map(|m| m * m).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { mags })
    }

    /// Rescales arbitrary nonnegative magnitudes to unit norm.
    pub fn normalized(mags: Vec<f64>) -> Result<Self> {
        check_weights(&mags)?;
        let norm = mags.iter().map(|m| m * m).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::AllZero);
        }
        Ok(Self {
            mags: mags.into_iter().map(|m| m / norm).collect(),
        })
    }

    pub fn mags(&self) -> &[f64] {
        &self.mags
    }

    pub fn dim(&self) -> usize {
        self.mags.len()
    }
}

pub fn prior_from_amplitudes(a: &AmplitudeVector) -> PriorState {
    PriorState {
        probs: a.mags.iter().map(|m| m * m).collect(),
    }
}

/// Levels with strictly positive prior mass.
pub fn support(prior: &PriorState) -> Vec<usize> {
    prior
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, _)| n)
        .collect()
}
