//! Closed-form predictions and estimators: the subjective-case heads
//! distribution, drift, predicted convergence exponents, the inefficiency
//! series and power-law fits.

use std::fmt;

use statrs::function::factorial::ln_binomial;

use crate::engine::Trajectory;
use crate::game::PlayerPopulation;
use crate::reality::{FixedPointInfo, RealityMap};
use crate::{Error, Result};

/// Sample points per decade used by [`fit_power_law`].
pub const FIT_POINTS_PER_DECADE: f64 = 64.0;
/// Default lower edge of the fit window.
pub const DEFAULT_FIT_LO: usize = 100;
/// Fewest sample points a fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

/// `z ln z - z + 1` for `z = 1 + d`, accurate near `d = 0`.
fn bregman_term(d: f64) -> f64 {
    if d.abs() < 1e-2 {
        // sum_{k>=2} (-d)^k / (k (k - 1))
        let mut acc = 0.0;
        let mut pow = d * d;
        for k in 2..12 {
            let kf = k as f64;
            acc += pow / (kf * (kf - 1.0));
            pow *= -d;
        }
        acc
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

/// `KL(q || p)` between Bernoulli distributions, using `0 log 0 = 0`.
///
/// Each side contributes a non-negative term, so the result is never
/// negative, even when `q` and `p` are nearly equal.
pub fn kl_bernoulli(q: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain {
            what: "q",
            value: q,
            domain: "[0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "p",
            value: p,
            domain: "[0, 1]",
        });
    }
    let side = |a: f64, b: f64| -> Result<f64> {
        if a == 0.0 {
            return Ok(b);
        }
        if b == 0.0 {
            return Err(Error::Domain {
                what: "p",
                value: p,
                domain: "(0, 1) unless q equals p",
            });
        }
        Ok((b * bregman_term((a - b) / b)).max(0.0))
    };
    Ok(side(q, p)? + side(1.0 - q, 1.0 - p)?)
}

/// Log of the unnormalized weight `w s^m (1 - s)^(t - m)`.
fn log_weight(w: f64, s: f64, m: u64, t: u64) -> f64 {
    if w == 0.0 {
        return f64::NEG_INFINITY;
    }
    let heads = if m == 0 { 0.0 } else { m as f64 * s.ln() };
    let tails = if m == t { 0.0 } else { (t - m) as f64 * (1.0 - s).ln() };
    w.ln() + heads + tails
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Heads-count distribution after `t` tosses under the identity map.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectiveDistribution {
    pub t: u64,
    /// `probabilities[m]` is the chance of exactly `m` heads.
    pub probabilities: Vec<f64>,
    population: PlayerPopulation,
}

impl SubjectiveDistribution {
    /// Wealth vector given `m` heads; see [`subjective_wealth_given_heads`].
    pub fn wealth_given_heads(&self, m: u64) -> Result<Vec<f64>> {
        subjective_wealth_given_heads(&self.population, m, self.t)
    }

    /// Indices `m` that are strict local maxima of the distribution.
    pub fn peaks(&self) -> Vec<usize> {
        let p = &self.probabilities;
        (0..p.len())
            .filter(|&m| {
                let left = m == 0 || p[m] > p[m - 1];
                let right = m + 1 == p.len() || p[m] > p[m + 1];
                left && right
            })
            .collect()
    }

    /// Total variation distance to an empirical histogram of heads counts.
    pub fn total_variation(&self, counts: &[u64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let len = self.probabilities.len().max(counts.len());
        0.5 * (0..len)
            .map(|m| {
                let p = self.probabilities.get(m).copied().unwrap_or(0.0);
                let e = counts.get(m).map_or(0.0, |&c| c as f64 / n as f64);
                (p - e).abs()
            })
            .sum::<f64>()
    }
}

/// Exact distribution of the number of heads in `t` tosses when `q = p`:
/// a wealth-weighted mixture of binomials, one per player.
pub fn subjective_heads_distribution(pop: &PlayerPopulation, t: u64) -> SubjectiveDistribution {
    let mut logs: Vec<f64> = (0..=t)
        .map(|m| {
            let lc = ln_binomial(t, m);
            let terms = pop
                .strategies()
                .iter()
                .zip(pop.wealths())
                .map(move |(&s, &w)| log_weight(w, s, m, t));
            lc + log_sum_exp(terms)
        })
        .collect();
    let norm = log_sum_exp(logs.iter().copied());
    for l in &mut logs {
        *l = (*l - norm).exp();
    }
    SubjectiveDistribution {
        t,
        probabilities: logs,
        population: pop.clone(),
    }
}

/// Wealths after `m` heads in `t` tosses under the identity map, whatever
/// the order: `w_i ∝ s_i^m (1 - s_i)^(t - m) w_i(0)`.
pub fn subjective_wealth_given_heads(pop: &PlayerPopulation, m: u64, t: u64) -> Result<Vec<f64>> {
    if m > t {
        return Err(Error::Domain {
            what: "m",
            value: m as f64,
            domain: "0..=t",
        });
    }
    let logs: Vec<f64> = pop
        .strategies()
        .iter()
        .zip(pop.wealths())
        .map(|(&s, &w)| log_weight(w, s, m, t))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateAllZero { heads: m, tosses: t });
    }
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

fn check_open_unit(what: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: p,
            domain: "(0, 1)",
        })
    }
}

/// Expected change in `p` over one toss in the Gaussian regime: `(q - p)/t`.
pub fn gaussian_drift(p: f64, q: f64, t: usize) -> Result<f64> {
    check_open_unit("p", p)?;
    if t == 0 {
        return Err(Error::Domain {
            what: "t",
            value: 0.0,
            domain: ">= 1",
        });
    }
    Ok((q - p) / t as f64)
}

/// Drift with the wealth-distribution variance `d` given explicitly:
/// `(q - p) d / (p (1 - p))`.
pub fn exact_drift(p: f64, q: f64, d: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    Ok((q - p) * d / (p * (1.0 - p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceCase {
    InteriorNegativeSlope,
    InteriorNonNegative,
    Boundary,
}

impl fmt::Display for ConvergenceCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InteriorNegativeSlope => "interior-negative-slope",
            Self::InteriorNonNegative => "interior-nonnegative",
            Self::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePrediction {
    pub fixed_point: f64,
    /// Slope of the map at the fixed point.
    pub slope: f64,
    /// Exponent of the mean distance to the fixed point.
    pub mean_exponent: f64,
    /// Exponent of the typical fluctuation size.
    pub fluctuation_exponent: f64,
    /// Inefficiency decays as `t^-gamma`.
    pub gamma: f64,
    pub case: ConvergenceCase,
}

impl ConvergencePrediction {
    fn from_fixed_point(fp: FixedPointInfo) -> Result<Self> {
        let mu = fp.slope;
        if !(mu < 1.0) {
            return Err(Error::UnstableFixedPoint {
                at: fp.location,
                slope: mu,
            });
        }
        let (case, gamma) = if fp.boundary {
            (ConvergenceCase::Boundary, (1.0 - mu) / 2.0)
        } else if mu < 0.0 {
            (ConvergenceCase::InteriorNegativeSlope, 1.0)
        } else {
            (ConvergenceCase::InteriorNonNegative, 1.0 - mu)
        };
        Ok(Self {
            fixed_point: fp.location,
            slope: mu,
            mean_exponent: mu - 1.0,
            fluctuation_exponent: if mu >= 0.0 { (mu - 1.0) / 2.0 } else { -0.5 },
            gamma,
            case,
        })
    }
}

/// Predicted exponents near the fixed point `fixed_point` of `map`.
pub fn predict_convergence(map: &RealityMap, fixed_point: f64) -> Result<ConvergencePrediction> {
    if !(0.0..=1.0).contains(&fixed_point) {
        return Err(Error::Domain {
            what: "fixed point",
            value: fixed_point,
            domain: "[0, 1]",
        });
    }
    let slope = map.slope_at(fixed_point)?;
    ConvergencePrediction::from_fixed_point(FixedPointInfo::new(fixed_point, slope))
}

/// Predictions for every stable fixed point, lowest location first.
pub fn predict_all(map: &RealityMap) -> Vec<ConvergencePrediction> {
    map.stable_fixed_points()
        .into_iter()
        .filter_map(|fp| ConvergencePrediction::from_fixed_point(fp).ok())
        .collect()
}

/// Leading-order inefficiency at distance `y` from an interior fixed point
/// `fixed_point` with slope `mu`.
pub fn interior_expansion(fixed_point: f64, mu: f64, y: f64) -> f64 {
    0.5 * (1.0 - mu).powi(2) * y * y / (fixed_point * (1.0 - fixed_point))
}

/// Leading-order inefficiency at distance `y >= 0` from a boundary fixed
/// point with slope `mu`.
pub fn boundary_expansion(mu: f64, y: f64) -> f64 {
    let mu_log_mu = if mu == 0.0 { 0.0 } else { mu * mu.ln() };
    (1.0 - mu + mu_log_mu) * y
}

/// `KL(q_t || p_t)` for every toss of a trajectory.
pub fn inefficiency_series(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.biases
        .iter()
        .zip(&traj.bets)
        .map(|(&q, &p)| kl_bernoulli(q, p))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r2: f64,
}

/// Streaming sums for a simple linear regression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Regression {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

impl Regression {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
        self.syy += y * y;
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sx += other.sx;
        self.sy += other.sy;
        self.sxx += other.sxx;
        self.sxy += other.sxy;
        self.syy += other.syy;
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0.0
    }

    /// Ordinary least squares fit with intercept.
    pub fn fit(&self) -> Result<LinearFit> {
        let n = self.n;
        if n < 3.0 {
            return Err(Error::InvalidConfig(format!(
                "regression needs at least 3 points, got {n}"
            )));
        }
        let sxx = self.sxx - self.sx * self.sx / n;
        let sxy = self.sxy - self.sx * self.sy / n;
        let syy = self.syy - self.sy * self.sy / n;
        if !(sxx > 0.0) {
            return Err(Error::InvalidConfig("regressor has zero variance".into()));
        }
        let slope = sxy / sxx;
        let intercept = (self.sy - slope * self.sx) / n;
        let sse = (syy - slope * sxy).max(0.0);
        let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        Ok(LinearFit {
            slope,
            intercept,
            stderr: (sse / (n - 2.0) / sxx).sqrt(),
            r2,
        })
    }
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if y.len() != x.len() {
        return Err(Error::InvalidConfig(format!(
            "regression needs paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    // Centre first: log-times are far from zero.
    let mx = x.iter().sum::<f64>() / x.len().max(1) as f64;
    let my = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let mut reg = Regression::new();
    for (&a, &b) in x.iter().zip(y) {
        reg.add(a - mx, b - my);
    }
    let mut fit = reg.fit()?;
    fit.intercept = my - fit.slope * mx;
    Ok(fit)
}

/// Adds one run's drift observations to `reg`: `t (p_{t+1} - p_t)` against
/// `q_t - p_t` for every `t >= t_lo`, with `t` the number of tosses
/// already played. The fitted slope is 1 when the Gaussian drift law holds.
pub fn add_drift_observations(reg: &mut Regression, bets: &[f64], biases: &[f64], t_lo: usize) {
    let len = bets.len().min(biases.len());
    for t in t_lo.max(1)..len.saturating_sub(1) {
        let tf = t as f64;
        reg.add(biases[t] - bets[t], tf * (bets[t + 1] - bets[t]));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// Fitted decay exponent (minus the log-log slope).
    pub gamma: f64,
    /// Log-log intercept.
    pub intercept: f64,
    pub stderr: f64,
    pub window: (usize, usize),
    pub r2: f64,
    pub points: usize,
}

/// Default window `[100, T/10]` for a series of length `horizon`.
pub fn default_fit_window(horizon: usize) -> (usize, usize) {
    (DEFAULT_FIT_LO, horizon / 10)
}

/// Distinct integer times from `lo` to `hi`, 64 per decade.
pub fn log_spaced_times(lo: usize, hi: usize) -> Vec<usize> {
    if lo == 0 || hi < lo {
        return Vec::new();
    }
    let decades = (hi as f64 / lo as f64).log10();
    let steps = (decades * FIT_POINTS_PER_DECADE).floor() as usize;
    let mut ts: Vec<usize> = (0..=steps)
        .map(|k| (lo as f64 * 10f64.powf(k as f64 / FIT_POINTS_PER_DECADE)).round() as usize)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    if ts.last() != Some(&hi) {
        ts.push(hi);
    }
    ts.dedup();
    ts
}

/// Fits `series[t - 1] ≈ C t^-gamma` over `window` (inclusive, 1-based).
pub fn fit_power_law(series: &[f64], window: (usize, usize)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    if lo == 0 || lo >= hi || hi > series.len() {
        return Err(Error::InvalidConfig(format!(
            "fit window [{lo}, {hi}] does not fit a series of length {}",
            series.len()
        )));
    }
    let times = log_spaced_times(lo, hi);
    if times.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidConfig(format!(
            "fit window [{lo}, {hi}] yields {} points, need {MIN_FIT_POINTS}",
            times.len()
        )));
    }
    let mut x = Vec::with_capacity(times.len());
    let mut y = Vec::with_capacity(times.len());
    for &t in &times {
        let v = series[t - 1];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveData { t, value: v });
        }
        x.push((t as f64).ln());
        y.push(v.ln());
    }
    let fit = linear_regression(&x, &y)?;
    Ok(PowerLawFit {
        gamma: -fit.slope,
        intercept: fit.intercept,
        stderr: fit.stderr,
        window,
        r2: fit.r2,
        points: times.len(),
    })
}
