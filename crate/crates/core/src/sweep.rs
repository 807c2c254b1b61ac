//! Ledgers evaluated along a grid in `tau`, figure presets and the
//! long-time / peak diagnostics of the averaged null balance.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::detection::{self, DetectionContext};
use crate::error::{Error, Result};
use crate::infotheory::{self, info_content, InfoLedger, LedgerRow};
use crate::state::{make_prior, PriorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub tau_start: f64,
    pub tau_stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn new(tau_start: f64, tau_stop: f64, points: usize, spacing: Spacing) -> Result<Self> {
        if !(tau_start.is_finite() && tau_stop.is_finite() && 0.0 <= tau_start && tau_start < tau_stop) {
            return Err(Error::InvalidGrid(format!(
                "need 0 <= start < stop, got {tau_start}..{tau_stop}"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {points}")));
        }
        if spacing == Spacing::Log && tau_start == 0.0 {
            return Err(Error::InvalidGrid("log spacing needs start > 0".into()));
        }
        Ok(Self {
            tau_start,
            tau_stop,
            points,
            spacing,
        })
    }

    pub fn linear(tau_start: f64, tau_stop: f64, points: usize) -> Result<Self> {
        Self::new(tau_start, tau_stop, points, Spacing::Linear)
    }

    /// Grid nodes, strictly increasing, ending exactly at `tau_stop`.
    pub fn taus(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        let mut out: Vec<f64> = (0..self.points)
            .map(|i| {
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.tau_start + f * (self.tau_stop - self.tau_start),
                    Spacing::Log => self.tau_start * (self.tau_stop / self.tau_start).powf(f),
                }
            })
            .collect();
        out[self.points - 1] = self.tau_stop;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub identity: String,
    pub clicks: usize,
    pub prior: Vec<f64>,
    pub rows: Vec<LedgerRow>,
}

impl TimeSeries {
    pub fn max_abs_residual(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.ledger.residual)
            .fold(0.0, |m: f64, r| m.max(r.abs()))
    }

    /// Values of one ledger entry (lhs or a named term) along the grid.
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                if r.ledger.lhs_name == name {
                    r.ledger.lhs
                } else {
                    r.ledger.term(name).unwrap_or(f64::NAN)
                }
            })
            .collect()
    }
}

fn sweep_with<F>(prior: &PriorState, grid: &GridSpec, k: usize, identity: &str, f: F) -> Result<TimeSeries>
where
    F: Fn(&DetectionContext) -> Result<InfoLedger> + Sync,
{
    let rows = grid
        .taus()
        .into_par_iter()
        .map(|tau| {
            let ctx = DetectionContext::from_tau(tau)?;
            Ok(LedgerRow { tau, ledger: f(&ctx)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeSeries {
        identity: identity.to_string(),
        clicks: k,
        prior: prior.probs().to_vec(),
        rows,
    })
}

/// Averaged null balance along the grid.
pub fn sweep_null_avg(prior: &PriorState, grid: &GridSpec) -> Result<TimeSeries> {
    sweep_with(prior, grid, 0, "null-avg", |ctx| {
        infotheory::null_ledger_avg(prior, ctx)
    })
}

/// Averaged k-click balance along the grid. Fails if any node makes the
/// outcome impossible (every node for `k >= 1` when the grid starts at 0).
pub fn sweep_kclick_avg(prior: &PriorState, grid: &GridSpec, k: usize) -> Result<TimeSeries> {
    let identity = if k == 0 { "null-avg" } else { "kclick-avg" };
    sweep_with(prior, grid, k, identity, |ctx| {
        infotheory::kclick_ledger_avg(prior, ctx, k)
    })
}

/// Location of the maximum of `<n> I(decay)` after a null result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakReport {
    pub tau_star: f64,
    pub value_at_peak: f64,
    pub mean: f64,
    pub variance: f64,
    /// `|tau_star - <n>/Var(n)|`, both evaluated at `tau_star`.
    pub consistency_gap: f64,
    /// False when the scan found several local maxima and the dense-grid
    /// argmax was returned unrefined.
    pub unimodal: bool,
}

fn decay_term(prior: &PriorState, tau: f64) -> Result<(f64, f64, f64)> {
    let ctx = DetectionContext::from_tau(tau)?;
    let post = detection::posterior(prior, 0, &ctx)?;
    let mean = infotheory::mean_excitation(&post);
    let var = infotheory::excitation_variance(&post);
    Ok((mean * tau / LN_2, mean, var))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Scans the grid for the maximum of the null-result decay term and
/// refines it by golden-section search to a bracket of `1e-6` in `tau`.
pub fn find_decay_term_peak(prior: &PriorState, grid: &GridSpec) -> Result<PeakReport> {
    if (1..prior.dim()).all(|n| !prior.is_supported(n)) {
        return Err(Error::NoInteriorPeak);
    }
    let taus = grid.taus();
    let values = taus
        .iter()
        .map(|&t| decay_term(prior, t).map(|v| v.0))
        .collect::<Result<Vec<_>>>()?;
    let (imax, vmax) =
        values.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
    if imax == 0 || imax == taus.len() - 1 || vmax <= 0.0 {
        return Err(Error::NoInteriorPeak);
    }
    let local_maxima = (1..values.len() - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .count();
    let unimodal = local_maxima == 1;
    let tau_star = if unimodal {
        golden_max(
            |t| decay_term(prior, t).map(|v| v.0).unwrap_or(f64::NEG_INFINITY),
            taus[imax - 1],
            taus[imax + 1],
            1e-6,
        )
    } else {
        taus[imax]
    };
    let (value_at_peak, mean, variance) = decay_term(prior, tau_star)?;
    Ok(PeakReport {
        tau_star,
        value_at_peak,
        mean,
        variance,
        consistency_gap: (tau_star - mean / variance).abs(),
        unimodal,
    })
}

/// Long-time value of `I(y_0)`, namely `-log2 p(x_0)`.
pub fn asymptote(prior: &PriorState) -> Result<f64> {
    if !prior.is_supported(0) {
        return Err(Error::GroundStateUnsupported);
    }
    Ok(info_content(prior.get(0))?.bits())
}

/// Named prior, click count and grid reproducing one figure panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub weights: Vec<f64>,
    pub clicks: usize,
    pub grid: GridSpec,
}

impl Preset {
    pub fn prior(&self) -> PriorState {
        make_prior(&self.weights).expect("preset weights are valid")
    }

    pub fn run(&self) -> Result<TimeSeries> {
        sweep_kclick_avg(&self.prior(), &self.grid, self.clicks)
    }
}

pub const PRESET_POINTS: usize = 400;

pub fn presets() -> Vec<Preset> {
    let fig1 = GridSpec::linear(0.0, 8.0, PRESET_POINTS).expect("valid grid");
    let fig2 = GridSpec::linear(0.01, 8.0, PRESET_POINTS).expect("valid grid");
    let third = 1.0 / 3.0;
    let mut out = vec![
        ("fig1a", vec![third, third, third]),
        ("fig1b", vec![0.2, 0.4, 0.4]),
        ("fig1c", vec![0.5, 0.3, 0.2]),
        ("fig1d", vec![0.2, 0.2, 0.6]),
    ]
    .into_iter()
    .map(|(name, weights)| Preset {
        name,
        weights,
        clicks: 0,
        grid: fig1,
    })
    .collect::<Vec<_>>();
    for (k, name) in ["fig2k0", "fig2k1", "fig2k2", "fig2k3"].into_iter().enumerate() {
        out.push(Preset {
            name,
            weights: vec![0.25; 4],
            clicks: k,
            grid: fig2,
        });
    }
    out
}

pub fn preset(name: &str) -> Result<Preset> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Unknown {
            kind: "preset",
            name: name.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::{LHS_OUTCOME, MULTIPLICITY_TERM, NO_DECAY_TERM, RELATIVE_ENTROPY, RESIDUAL_TOL};

    fn prior(w: &[f64]) -> PriorState {
        make_prior(w).unwrap()
    }

    #[test]
    fn grid_validation_and_nodes() {
        assert!(GridSpec::linear(1.0, 1.0, 5).is_err());
        assert!(GridSpec::linear(-1.0, 1.0, 5).is_err());
        assert!(GridSpec::linear(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(0.0, 1.0, 5, Spacing::Log).is_err());
        assert_eq!(
            GridSpec::linear(0.0, 1.0, 5).unwrap().taus(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        let g = GridSpec::new(0.01, 100.0, 5, Spacing::Log).unwrap().taus();
        assert!((g[1] - 0.1).abs() < 1e-15 && (g[2] - 1.0).abs() < 1e-14);
        assert_eq!(g[4], 100.0);
    }

    #[test]
    fn qutrit_saturation() {
        let s = sweep_null_avg(&prior(&[1.0, 1.0, 1.0]), &GridSpec::linear(0.0, 20.0, 400).unwrap()).unwrap();
        assert_eq!(s.rows.len(), 400);
        let lhs = s.column(LHS_OUTCOME);
        assert!((lhs[399] - 3f64.log2()).abs() < 1e-3);
        assert!(lhs.windows(2).all(|w| w[1] >= w[0]));
        let d = s.column(RELATIVE_ENTROPY);
        assert!(d.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        assert!(s.max_abs_residual() <= RESIDUAL_TOL);
    }

    #[test]
    fn saturates_at_ground_information() {
        let s = sweep_null_avg(&prior(&[0.5, 0.3, 0.2]), &GridSpec::linear(0.0, 20.0, 50).unwrap()).unwrap();
        assert!((s.column(LHS_OUTCOME)[49] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ground_state_sweep_is_flat() {
        let s = sweep_null_avg(&prior(&[1.0, 0.0, 0.0]), &GridSpec::linear(0.0, 8.0, 100).unwrap()).unwrap();
        for row in &s.rows {
            assert_eq!(row.ledger.lhs, 0.0);
            assert!(row.ledger.terms.iter().all(|t| t.bits == 0.0));
        }
    }

    #[test]
    fn kclick_sweeps() {
        let uni4 = prior(&[1.0; 4]);
        let s = sweep_kclick_avg(&uni4, &GridSpec::linear(0.0, 20.0, 200).unwrap(), 0).unwrap();
        let lhs = s.column(LHS_OUTCOME);
        assert_eq!(lhs[0], 0.0);
        assert!(lhs.windows(2).all(|w| w[1] >= w[0]));
        assert!((lhs[199] - 2.0).abs() < 1e-3);

        let g = GridSpec::linear(0.01, 8.0, 100).unwrap();
        let s = sweep_kclick_avg(&uni4, &g, 1).unwrap();
        let lhs = s.column(LHS_OUTCOME);
        let nd = s.column(NO_DECAY_TERM);
        assert!(lhs[0] > 5.0 && nd[0] > 5.0);
        assert!(nd.windows(2).all(|w| w[1] < w[0]));

        let s = sweep_kclick_avg(&uni4, &g, 3).unwrap();
        assert!(s.column(RELATIVE_ENTROPY).iter().all(|&d| (d - 2.0).abs() <= 1e-9));
        assert!(s.column(MULTIPLICITY_TERM).iter().all(|&w| w == 0.0));

        let zero = GridSpec::linear(0.0, 8.0, 10).unwrap();
        assert_eq!(
            sweep_kclick_avg(&uni4, &zero, 1),
            Err(Error::ImpossibleOutcome { k: 1 })
        );
    }

    #[test]
    fn qubit_peak_location() {
        let r = find_decay_term_peak(&prior(&[0.5, 0.5]), &GridSpec::linear(0.0, 8.0, 400).unwrap()).unwrap();
        // root of tau = 1 + e^{-tau}, 40-digit bisection
        assert!((r.tau_star - 1.278_464_542_761_074).abs() < 1e-5);
        assert!(r.consistency_gap < 1e-4);
        assert!(r.unimodal);
    }

    #[test]
    fn no_peak_for_ground_state() {
        let g = GridSpec::linear(0.0, 8.0, 100).unwrap();
        assert_eq!(
            find_decay_term_peak(&prior(&[1.0, 0.0]), &g),
            Err(Error::NoInteriorPeak)
        );
        assert_eq!(
            find_decay_term_peak(&prior(&[1.0, 0.0, 0.0]), &g),
            Err(Error::NoInteriorPeak)
        );
    }

    #[test]
    fn asymptote_values() {
        assert!((asymptote(&prior(&[1.0, 1.0, 1.0])).unwrap() - 1.584_962_500_721_156).abs() < 1e-15);
        assert_eq!(asymptote(&prior(&[1.0; 4])).unwrap(), 2.0);
        assert_eq!(asymptote(&prior(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(asymptote(&prior(&[0.0, 1.0])), Err(Error::GroundStateUnsupported));
    }

    #[test]
    fn preset_lookup() {
        assert_eq!(presets().len(), 8);
        let p = preset("fig1c").unwrap();
        assert_eq!(p.weights, vec![0.5, 0.3, 0.2]);
        assert_eq!(preset("fig2k3").unwrap().clicks, 3);
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn decay_term_vanishes_late() {
        for w in [[1.0, 1.0, 1.0], [0.2, 0.4, 0.4], [0.5, 0.3, 0.2], [0.2, 0.2, 0.6]] {
            let l = infotheory::null_ledger_avg(&prior(&w), &DetectionContext::from_tau(30.0).unwrap()).unwrap();
            assert!(l.terms[1].bits <= 1e-6);
        }
    }
}
