//! Run configuration: JSON file values with command-line flags on top.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use weakinfo::identity::default_identity;
use weakinfo::oracle::{DEFAULT_SEED, DEFAULT_TRIALS};
use weakinfo::sweep::{self, GridSpec, Spacing};
use weakinfo::{make_prior, DetectionContext, PriorState};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Prior as given: a weight list or the textual `1,1,1` / `1/3,2/3` form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorInput {
    Weights(Vec<f64>),
    Text(String),
}

impl PriorInput {
    pub fn weights(&self) -> Result<Vec<f64>, Failure> {
        match self {
            PriorInput::Weights(w) => Ok(w.clone()),
            PriorInput::Text(s) => parse_weights(s),
        }
    }
}

fn parse_number(s: &str) -> Result<f64, Failure> {
    let s = s.trim();
    let bad = || Failure::Config(format!("cannot parse prior weight '{s}'"));
    match s.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a.trim().parse().map_err(|_| bad())?;
            let den: f64 = b.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

pub fn parse_weights(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(parse_number).collect()
}

/// `start:stop:points`, optionally followed by `:log`.
pub fn parse_tau_range(s: &str) -> Result<GridSpec, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::Config(format!("--tau-range expects start:stop:points, got '{s}'"));
    let spacing = match parts.len() {
        3 => Spacing::Linear,
        4 if parts[3] == "log" => Spacing::Log,
        4 if parts[3] == "linear" => Spacing::Linear,
        _ => return Err(bad()),
    };
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(GridSpec::new(start, stop, points, spacing)?)
}

/// Every setting is optional so that file and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Prior weights, e.g. `1,1,1` or `1/3,1/3,1/3`; normalized automatically
    #[arg(long, value_parser = |s: &str| Ok::<_, String>(PriorInput::Text(s.to_string())))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorInput>,

    /// Rescaled time tau = 2 gamma t
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,

    /// Decay rate, used together with --time
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,

    /// Elapsed time, used together with --gamma
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,

    /// Number of detector clicks
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    /// Level for the per-level balances
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Use the averaged balance
    #[arg(long, num_args = 0, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg: Option<bool>,

    /// Balance identity by name, overriding --avg/--k selection
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity: Option<String>,

    /// Figure preset: fig1a..fig1d, fig2k0..fig2k3
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,

    /// Sweep grid as start:stop:points
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_range: Option<String>,

    /// Monte Carlo trials
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,

    /// Oracle seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Output format
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,

    /// Write output here instead of stdout
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// JSON file with any of the above settings; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Settings from `top` replace those in `self`.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(self, top, prior, tau, gamma, time, k, n, avg, identity, preset, tau_range, trials, seed, format, out);
        self
    }

    /// Flags merged over the `--config` file, if any.
    pub fn resolve(flags: RunConfig) -> Result<Self, Failure> {
        match &flags.config {
            Some(path) => Ok(Self::load(path)?.overlay(flags)),
            None => Ok(flags),
        }
    }

    pub fn preset(&self) -> Result<Option<sweep::Preset>, Failure> {
        Ok(match &self.preset {
            Some(name) => Some(sweep::preset(name)?),
            None => None,
        })
    }

    pub fn prior(&self) -> Result<PriorState, Failure> {
        if let Some(p) = &self.prior {
            return Ok(make_prior(&p.weights()?)?);
        }
        match self.preset()? {
            Some(p) => Ok(p.prior()),
            None => Err(Failure::Config("--prior is required".into())),
        }
    }

    /// Exactly one of `--tau` or `--gamma` with `--time`.
    pub fn context(&self) -> Result<DetectionContext, Failure> {
        match (self.tau, self.gamma, self.time) {
            (Some(tau), None, None) => Ok(DetectionContext::from_tau(tau)?),
            (None, Some(g), Some(t)) => Ok(DetectionContext::new(g, t)?),
            (None, None, None) => Err(Failure::Config("give --tau or --gamma with --time".into())),
            (Some(_), _, _) => Err(Failure::Config("give either --tau or --gamma/--time, not both".into())),
            _ => Err(Failure::Config("--gamma and --time must be given together".into())),
        }
    }

    pub fn clicks(&self) -> Result<usize, Failure> {
        Ok(match (self.k, self.preset()?) {
            (Some(k), _) => k,
            (None, Some(p)) => p.clicks,
            (None, None) => 0,
        })
    }

    pub fn grid(&self) -> Result<GridSpec, Failure> {
        if self.tau.is_some() || self.gamma.is_some() || self.time.is_some() {
            return Err(Failure::Config(
                "a sweep takes --tau-range or --preset, not a single time".into(),
            ));
        }
        if let Some(r) = &self.tau_range {
            return parse_tau_range(r);
        }
        match self.preset()? {
            Some(p) => Ok(p.grid),
            None => Err(Failure::Config("a sweep needs --tau-range or --preset".into())),
        }
    }

    /// Identity named explicitly, else picked from `--avg` and `--k`.
    /// `averaged_default` applies when neither `--avg` nor `--n` is given.
    pub fn identity_name(&self, averaged_default: bool) -> Result<String, Failure> {
        if let Some(name) = &self.identity {
            return Ok(name.clone());
        }
        let avg = self.avg.unwrap_or(averaged_default && self.n.is_none());
        if avg && self.n.is_some() {
            return Err(Failure::Config(
                "--n selects a per-level balance and cannot be combined with --avg".into(),
            ));
        }
        Ok(default_identity(avg, self.clicks()?).to_string())
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Json)
    }
}
