//! Parameter sweeps, logistic fits of transition curves, critical values,
//! phase diagrams and pole-capacity bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Window;
use crate::percolation::{estimate_connection_probability, ProbabilityEstimate};
use crate::placement::NetworkParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("unknown sweep parameter `{0}` (lambda, U, theta, tau, p, kappa, noise, beta)")]
    UnknownParameter(String),
    #[error("grid must be nonempty")]
    EmptyGrid,
    #[error("grid values must be finite and strictly increasing")]
    UnorderedGrid,
    #[error("replications must be at least 1")]
    NoReplications,
}

/// Parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "lambda")]
    UserIntensity,
    /// Users per typical street, converted with `lambda = U / l1`.
    #[serde(rename = "U")]
    UsersPerStreet,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "tau")]
    Threshold,
    #[serde(rename = "p")]
    RelayProbability,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "beta")]
    Beta,
}

impl SweepParam {
    pub const ALL: [SweepParam; 8] = [
        Self::UserIntensity,
        Self::UsersPerStreet,
        Self::Theta,
        Self::Threshold,
        Self::RelayProbability,
        Self::Kappa,
        Self::Noise,
        Self::Beta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::UserIntensity => "lambda",
            Self::UsersPerStreet => "U",
            Self::Theta => "theta",
            Self::Threshold => "tau",
            Self::RelayProbability => "p",
            Self::Kappa => "kappa",
            Self::Noise => "noise",
            Self::Beta => "beta",
        }
    }

    /// `params` with this parameter set to `value`.
    pub fn apply(self, params: &NetworkParams, value: f64) -> NetworkParams {
        let mut p = *params;
        match self {
            Self::UserIntensity => p.user_intensity = value,
            Self::UsersPerStreet => p = p.with_users_per_street(value),
            Self::Theta => p.theta = value,
            Self::Threshold => p.threshold = value,
            Self::RelayProbability => p.relay_probability = value,
            Self::Kappa => p.kappa = value,
            Self::Noise => p.noise = value,
            Self::Beta => p.beta = value,
        }
        p
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "lambda" | "user_intensity" => Self::UserIntensity,
            "U" | "u" | "users_per_street" => Self::UsersPerStreet,
            "theta" => Self::Theta,
            "tau" | "threshold" => Self::Threshold,
            "p" | "relay_probability" => Self::RelayProbability,
            "kappa" => Self::Kappa,
            "noise" | "N" => Self::Noise,
            "beta" => Self::Beta,
            other => return Err(ExperimentError::UnknownParameter(other.to_string())),
        })
    }
}

/// `steps` evenly spaced values from `from` to `to` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>, ExperimentError> {
        linspace(self.from, self.to, self.steps)
    }
}

pub fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, ExperimentError> {
    let grid: Vec<f64> = match steps {
        0 => return Err(ExperimentError::EmptyGrid),
        1 => vec![from],
        n => (0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect(),
    };
    check_grid(&grid)?;
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::UnorderedGrid);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub value: f64,
    /// `Err` holds the reason the point could not be simulated.
    pub estimate: Result<ProbabilityEstimate, String>,
}

impl CurvePoint {
    pub fn probability(&self) -> Option<f64> {
        self.estimate.as_ref().ok().map(|e| e.probability)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCurve {
    pub param: SweepParam,
    pub points: Vec<CurvePoint>,
}

impl TransitionCurve {
    /// `(value, probability)` of every simulated point.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.probability().map(|q| (p.value, q)))
            .collect()
    }

    pub fn replications(&self) -> usize {
        self.points
            .iter()
            .filter_map(|p| p.estimate.as_ref().ok())
            .map(|e| e.replications)
            .max()
            .unwrap_or(0)
    }
}

/// One probability estimate per grid value, other parameters fixed. Every
/// point reuses `master_seed`, so neighbouring points share street systems.
pub fn sweep(
    params: &NetworkParams,
    param: SweepParam,
    grid: &[f64],
    window: &Window,
    replications: usize,
    master_seed: u64,
) -> Result<TransitionCurve, ExperimentError> {
    check_grid(grid)?;
    if replications == 0 {
        return Err(ExperimentError::NoReplications);
    }
    let points = grid
        .iter()
        .map(|&value| {
            let p = param.apply(params, value);
            let estimate = estimate_connection_probability(&p, window, replications, master_seed)
                .map_err(|e| e.to_string());
            CurvePoint { value, estimate }
        })
        .collect();
    Ok(TransitionCurve { param, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("probabilities do not change along the segment")]
    NoTransition,
    #[error("fitted slope {slope} does not match a {expected:?} curve")]
    WrongDirection { expected: Direction, slope: f64 },
    #[error("critical value {mu_star} lies outside the segment [{lo}, {hi}]")]
    OutOfRange { mu_star: f64, lo: f64, hi: f64 },
}

/// `logit(t) = a x + b`, critical value at the inflection `-b/a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub direction: Direction,
    pub a: f64,
    pub b: f64,
    pub mu_star: f64,
    /// Root mean square of the logit residuals.
    pub residual: f64,
}

impl LogisticFit {
    pub fn predict(&self, x: f64) -> f64 {
        logistic(self.a * x + self.b)
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn logit(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

/// Least-squares line through the clipped logits of `samples`. Empirical
/// probabilities are clipped to `[1/(2R), 1 - 1/(2R)]`.
pub fn fit_logistic(
    samples: &[(f64, f64)],
    replications: usize,
    direction: Direction,
) -> Result<LogisticFit, FitError> {
    if samples.len() < 3 {
        return Err(FitError::TooFewPoints(samples.len()));
    }
    let eps = 0.5 / replications.max(1) as f64;
    let ys: Vec<f64> = samples
        .iter()
        .map(|&(_, t)| logit(t.clamp(eps, 1.0 - eps)))
        .collect();
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(FitError::NoTransition);
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&(x, _), &y) in samples.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let consistent = match direction {
        Direction::Rising => a > 0.0,
        Direction::Falling => a < 0.0,
    };
    if !consistent {
        return Err(FitError::WrongDirection {
            expected: direction,
            slope: a,
        });
    }
    let residual = (samples
        .iter()
        .zip(&ys)
        .map(|(&(x, _), &y)| (y - a * x - b).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LogisticFit {
        direction,
        a,
        b,
        mu_star: -b / a,
        residual,
    })
}

/// Like [`fit_logistic`], but rejects a critical value the segment does
/// not reach.
pub fn fit_within(
    samples: &[(f64, f64)],
    replications: usize,
    direction: Direction,
) -> Result<LogisticFit, FitError> {
    let fit = fit_logistic(samples, replications, direction)?;
    let lo = samples.first().map_or(f64::NAN, |s| s.0);
    let hi = samples.last().map_or(f64::NAN, |s| s.0);
    if !(lo..=hi).contains(&fit.mu_star) {
        return Err(FitError::OutOfRange {
            mu_star: fit.mu_star,
            lo,
            hi,
        });
    }
    Ok(fit)
}

/// Probabilities strictly inside this band mark the transition.
pub const TRANSITION_BAND: (f64, f64) = (0.05, 0.95);

/// Points inside [`TRANSITION_BAND`] plus one neighbour on each side,
/// widened to at least three points when the segment allows. Plateaus and
/// flat tails then do not pull the fitted line. Segments with no point in
/// the band are returned whole.
pub fn transition_region(samples: &[(f64, f64)]) -> &[(f64, f64)] {
    let inside = |t: f64| t > TRANSITION_BAND.0 && t < TRANSITION_BAND.1;
    let Some(first) = samples.iter().position(|s| inside(s.1)) else {
        return samples;
    };
    let last = samples.iter().rposition(|s| inside(s.1)).unwrap_or(first);
    let mut lo = first.saturating_sub(1);
    let mut hi = (last + 2).min(samples.len());
    while hi - lo < 3 && (lo > 0 || hi < samples.len()) {
        lo = lo.saturating_sub(1);
        if hi - lo < 3 && hi < samples.len() {
            hi += 1;
        }
    }
    &samples[lo..hi]
}

/// Index of the maximum of the 3-point moving average; ties go to the
/// index nearest the middle of the grid.
pub fn smoothed_peak(probabilities: &[f64]) -> Option<usize> {
    let n = probabilities.len();
    if n == 0 {
        return None;
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let w = &probabilities[i.saturating_sub(1)..(i + 2).min(n)];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect();
    let best = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = (n - 1) as f64 / 2.0;
    (0..n).filter(|&i| smooth[i] == best).min_by(|&i, &j| {
        (i as f64 - mid)
            .abs()
            .total_cmp(&(j as f64 - mid).abs())
            .then(i.cmp(&j))
    })
}

/// Rising and falling critical values of a curve with an interior peak.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleCritical {
    pub peak_value: f64,
    pub peak_probability: f64,
    pub rising: Result<LogisticFit, FitError>,
    pub falling: Result<LogisticFit, FitError>,
    /// First and last grid values.
    pub span: (f64, f64),
    /// Probability above one half at the first and last grid values.
    pub open_at_ends: (bool, bool),
}

impl DoubleCritical {
    pub fn lower(&self) -> Option<f64> {
        self.rising.as_ref().ok().map(|f| f.mu_star)
    }

    pub fn upper(&self) -> Option<f64> {
        self.falling.as_ref().ok().map(|f| f.mu_star)
    }

    /// Interval where the curve exceeds one half. An end the curve is still
    /// above one half at is censored to the grid edge.
    pub fn window(&self) -> Option<(f64, f64)> {
        let lo = self
            .lower()
            .or(self.open_at_ends.0.then_some(self.span.0))?;
        let hi = self
            .upper()
            .or(self.open_at_ends.1.then_some(self.span.1))?;
        Some((lo, hi))
    }
}

/// Splits at the smoothed peak and fits a rising logistic to the left
/// part, a falling one to the right. `None` when the curve never exceeds
/// one half.
pub fn extract_double_critical(
    samples: &[(f64, f64)],
    replications: usize,
) -> Option<DoubleCritical> {
    let probs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let peak_probability = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak_probability > 0.5) {
        return None;
    }
    let k = smoothed_peak(&probs)?;
    Some(DoubleCritical {
        peak_value: samples[k].0,
        peak_probability,
        rising: fit_within(
            transition_region(&samples[..=k]),
            replications,
            Direction::Rising,
        ),
        falling: fit_within(
            transition_region(&samples[k..]),
            replications,
            Direction::Falling,
        ),
        span: (samples[0].0, samples[samples.len() - 1].0),
        open_at_ends: (probs[0] > 0.5, probs[probs.len() - 1] > 0.5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub theta: f64,
    pub u1_star: Option<f64>,
    pub u2_star: Option<f64>,
    pub peak_probability: f64,
    /// `window`, `no-percolation`, or the fits that failed.
    pub status: String,
    /// Probability re-simulated at `(u1 + u2) / 2`, when requested.
    pub midpoint_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub rows: Vec<PhaseRow>,
}

/// One U-sweep per `theta`. Rows whose fits fail are kept and flagged.
pub fn phase_diagram(
    thetas: &[f64],
    params: &NetworkParams,
    u_grid: &[f64],
    window: &Window,
    replications: usize,
    master_seed: u64,
    check_midpoint: bool,
) -> Result<PhaseDiagram, ExperimentError> {
    if thetas.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let base = NetworkParams { theta, ..*params };
        let curve = sweep(
            &base,
            SweepParam::UsersPerStreet,
            u_grid,
            window,
            replications,
            master_seed,
        )?;
        let samples = curve.samples();
        let peak_probability = samples.iter().map(|s| s.1).fold(0.0, f64::max);
        let row = match extract_double_critical(&samples, replications) {
            None => PhaseRow {
                theta,
                u1_star: None,
                u2_star: None,
                peak_probability,
                status: if samples.len() < curve.points.len() {
                    "simulation-error".to_string()
                } else {
                    "no-percolation".to_string()
                },
                midpoint_probability: None,
            },
            Some(dc) => {
                let mut problems = Vec::new();
                if let Err(e) = &dc.rising {
                    problems.push(format!("rising: {e}"));
                }
                if let Err(e) = &dc.falling {
                    problems.push(format!("falling: {e}"));
                }
                let (u1, u2) = (dc.lower(), dc.upper());
                if let (Some(a), Some(b)) = (u1, u2) {
                    if a > b {
                        problems.push("crossed critical values".to_string());
                    }
                }
                let midpoint_probability = match (check_midpoint, u1, u2) {
                    (true, Some(a), Some(b)) if a <= b => {
                        let p = base.with_users_per_street((a + b) / 2.0);
                        estimate_connection_probability(&p, window, replications, master_seed)
                            .ok()
                            .map(|e| e.probability)
                    }
                    _ => None,
                };
                PhaseRow {
                    theta,
                    u1_star: u1,
                    u2_star: u2,
                    peak_probability,
                    status: if problems.is_empty() {
                        "window".to_string()
                    } else {
                        problems.join("; ")
                    },
                    midpoint_probability,
                }
            }
        };
        rows.push(row);
    }
    Ok(PhaseDiagram { rows })
}

/// Most links a receiver can decode at once, `1 + 1/(theta tau)`.
/// Unbounded without interference.
pub fn pole_capacity(theta: f64, tau: f64) -> f64 {
    let t = theta * tau;
    if t == 0.0 {
        f64::INFINITY
    } else {
        1.0 + 1.0 / t
    }
}

/// Necessary bound `H M / 2` on the critical users per street.
pub fn hop_bound(hops_per_street: f64, theta: f64, tau: f64) -> f64 {
    hops_per_street * pole_capacity(theta, tau) / 2.0
}
