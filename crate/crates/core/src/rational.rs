//! Myopic log-optimal players.
//!
//! A rational player with wealth share `w` bets a fraction `s` on heads
//! against fixed players whose aggregate bet (as a share of their own
//! wealth) is `b`. The total wager on heads is then `p = (1 - w) b + w s`,
//! the coin's bias is `q(p)`, and her expected one-step log-return is
//!
//! ```text
//! r(s) = q ln(s / p) + (1 - q) ln((1 - s) / (1 - p)).
//! ```
//!
//! With `w = 0` (the epsilon player) neither `p` nor `q` depend on `s`,
//! so the optimum is `s = q` and `r = KL(q || p)`.

use crate::game::PlayerPopulation;
use crate::reality::{bisect, RealityMap};
use crate::{Error, Result};

/// Points in the coarse scan of `optimal_strategy`.
pub const DEFAULT_GRID: usize = 10_000;

/// Maxima whose value is within this of the best are reported as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

const EDGE: f64 = 1e-12;

/// `a ln(b)` with the convention `0 ln(anything) = 0`.
#[inline]
pub(crate) fn xlogy(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RationalContext<'a> {
    opponent_bet: f64,
    wealth: f64,
    map: &'a RealityMap,
}

impl<'a> RationalContext<'a> {
    /// `opponents` carry their wealth normalized among themselves; the
    /// rational player's share `wealth` scales them by `1 - wealth`.
    pub fn new(opponents: &PlayerPopulation, wealth: f64, map: &'a RealityMap) -> Result<Self> {
        Self::from_opponent_bet(opponents.total_bet(), wealth, map)
    }

    /// Same as [`new`](Self::new) but from the opponents' aggregate bet only.
    pub fn from_opponent_bet(opponent_bet: f64, wealth: f64, map: &'a RealityMap) -> Result<Self> {
        if !(0.0..1.0).contains(&wealth) {
            return Err(Error::Domain {
                what: "rational wealth",
                value: wealth,
                domain: "[0, 1)",
            });
        }
        if !(0.0..=1.0).contains(&opponent_bet) {
            return Err(Error::Domain {
                what: "opponent bet",
                value: opponent_bet,
                domain: "[0, 1]",
            });
        }
        Ok(Self {
            opponent_bet,
            wealth,
            map,
        })
    }

    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    pub fn map(&self) -> &RealityMap {
        self.map
    }

    /// Total fraction bet on heads when the rational player bets `s`.
    #[inline]
    pub fn total_bet(&self, s: f64) -> f64 {
        ((1.0 - self.wealth) * self.opponent_bet + self.wealth * s).clamp(0.0, 1.0)
    }

    fn check_strategy(s: f64) -> Result<()> {
        if s > 0.0 && s < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "s",
                value: s,
                domain: "(0, 1)",
            })
        }
    }

    fn check_bet(p: f64) -> Result<()> {
        if p > 0.0 && p < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "total bet p",
                value: p,
                domain: "(0, 1)",
            })
        }
    }

    /// Expected one-step log-return of betting `s` on heads.
    pub fn expected_log_return(&self, s: f64) -> Result<f64> {
        Self::check_strategy(s)?;
        let p = self.total_bet(s);
        Self::check_bet(p)?;
        Ok(self.raw_log_return(s))
    }

    #[inline]
    fn raw_log_return(&self, s: f64) -> f64 {
        let p = self.total_bet(s);
        let q = self.map.eval(p);
        xlogy(q, s / p) + xlogy(1.0 - q, (1.0 - s) / (1.0 - p))
    }

    /// `dr/ds`, including the feedback of the player's own bet on `q`.
    pub fn log_return_derivative(&self, s: f64) -> Result<f64> {
        Self::check_strategy(s)?;
        let p = self.total_bet(s);
        Self::check_bet(p)?;
        let q = self.map.eval(p);
        let w = self.wealth;
        let feedback = if w == 0.0 {
            0.0
        } else {
            let dq = self.map.slope_at(p)?;
            dq * w * (s.ln() - p.ln() - (1.0 - s).ln() + (1.0 - p).ln())
        };
        Ok(feedback + q * (1.0 / s - w / p) + (1.0 - q) * (-1.0 / (1.0 - s) + w / (1.0 - p)))
    }

    /// Global maximizer of `r(s)` on `(0, 1)` with the default grid.
    pub fn optimal_strategy(&self) -> OptimalStrategy {
        self.optimal_strategy_with_grid(DEFAULT_GRID)
    }

    /// Coarse scan over `grid` interior points, then refinement of every
    /// local maximum: bisection on `dr/ds` when it changes sign across the
    /// bracket, golden-section search on `r` otherwise. All maxima tied
    /// with the best value are returned in ascending order.
    pub fn optimal_strategy_with_grid(&self, grid: usize) -> OptimalStrategy {
        let grid = grid.max(3);
        let node = |k: usize| k as f64 / (grid + 1) as f64;
        let value = |s: f64| {
            let r = self.raw_log_return(s);
            if r.is_nan() {
                f64::NEG_INFINITY
            } else {
                r
            }
        };
        let values: Vec<f64> = (1..=grid).map(|k| value(node(k))).collect();

        let mut candidates: Vec<(f64, f64)> = Vec::new();
        for i in 0..grid {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = if i + 1 == grid { f64::NEG_INFINITY } else { values[i + 1] };
            if values[i] >= left && values[i] >= right && values[i] > f64::NEG_INFINITY {
                let lo = if i == 0 { EDGE } else { node(i) };
                let hi = if i + 1 == grid { 1.0 - EDGE } else { node(i + 2) };
                let s = self.refine(lo, hi, node(i + 1));
                candidates.push((s, value(s)));
            }
        }

        let best = candidates
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut maximizers: Vec<f64> = candidates
            .iter()
            .filter(|c| c.1 >= best - TIE_TOLERANCE)
            .map(|c| c.0)
            .collect();
        maximizers.sort_by(f64::total_cmp);
        maximizers.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        OptimalStrategy {
            maximizers,
            log_return: best,
        }
    }

    fn refine(&self, lo: f64, hi: f64, start: f64) -> f64 {
        let d = |s: f64| self.log_return_derivative(s).unwrap_or(f64::NAN);
        let (dlo, dhi) = (d(lo), d(hi));
        if dlo > 0.0 && dhi < 0.0 {
            let s = bisect(&d, lo, hi);
            if self.raw_log_return(s) >= self.raw_log_return(start) {
                return s;
            }
        }
        golden_section_max(&|s| self.raw_log_return(s), lo, hi)
    }

    /// `r(s)` sampled on `points` interior grid nodes, with located maxima.
    pub fn curve(&self, points: usize) -> LogReturnCurve {
        let points = points.max(2);
        let strategies: Vec<f64> = (1..=points)
            .map(|k| k as f64 / (points + 1) as f64)
            .collect();
        let log_returns = strategies.iter().map(|&s| self.raw_log_return(s)).collect();
        LogReturnCurve {
            wealth: self.wealth,
            strategies,
            log_returns,
            optimum: self.optimal_strategy(),
        }
    }
}

fn golden_section_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalStrategy {
    /// Tied global maximizers, ascending.
    pub maximizers: Vec<f64>,
    /// `r(s*)`.
    pub log_return: f64,
}

impl OptimalStrategy {
    /// The smallest maximizer.
    pub fn first(&self) -> f64 {
        self.maximizers[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogReturnCurve {
    pub wealth: f64,
    pub strategies: Vec<f64>,
    pub log_returns: Vec<f64>,
    pub optimum: OptimalStrategy,
}

/// Whether the equilibrium strategy `s = p~` is a local maximum of `r` for
/// a rational player of wealth `w`: `2 w q'(p~) - (1 + w) < 0`.
pub fn equilibrium_stability(map: &RealityMap, wealth: f64, fixed_point: f64) -> Result<bool> {
    if !(0.0..1.0).contains(&wealth) {
        return Err(Error::Domain {
            what: "rational wealth",
            value: wealth,
            domain: "[0, 1)",
        });
    }
    let slope = map.slope_at(fixed_point)?;
    Ok(2.0 * wealth * slope - (1.0 + wealth) < 0.0)
}

/// `d^2 r / ds^2` at the equilibrium strategy `s = p~`.
pub fn equilibrium_curvature(map: &RealityMap, wealth: f64, fixed_point: f64) -> Result<f64> {
    if !(fixed_point > 0.0 && fixed_point < 1.0) {
        return Err(Error::Domain {
            what: "fixed point",
            value: fixed_point,
            domain: "(0, 1)",
        });
    }
    let slope = map.slope_at(fixed_point)?;
    let s = fixed_point;
    Ok((1.0 - wealth) / (s * (1.0 - s)) * (2.0 * wealth * slope - (1.0 + wealth)))
}

/// An epsilon player's plan over a whole horizon. Because her bets never
/// move `p`, the horizon optimum is the sequence of one-step optima
/// `s_t = q_t`, and the horizon log-return is the sum of one-step returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonPlan {
    pub strategies: Vec<f64>,
    pub horizon_log_return: f64,
}

pub fn epsilon_plan(bets: &[f64], biases: &[f64]) -> Result<EpsilonPlan> {
    let mut total = 0.0;
    for (&p, &q) in bets.iter().zip(biases) {
        total += crate::analytics::kl_bernoulli(q, p)?;
    }
    Ok(EpsilonPlan {
        strategies: biases.to_vec(),
        horizon_log_return: total,
    })
}
