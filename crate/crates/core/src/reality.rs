//! Reality maps: the objective probability of heads `q` as a function of
//! the fraction of wealth `p` bet on heads.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::{Error, Result};

/// Step used for finite-difference slopes of piecewise-linear maps.
pub const FD_STEP: f64 = 1e-6;

/// Bisection tolerance for fixed points located numerically.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum RealityMap {
    /// Fair (or fixed-bias) coin: `q = c` regardless of bets.
    Constant(f64),
    /// `q = 1 - p`.
    SelfDefeating,
    /// `q = 1/2 + atan(pi a (p - 1/2) / (1 - (2p - 1)^2)) / pi`, slope `a` at 1/2.
    Arctan { alpha: f64 },
    /// Purely subjective: `q = p`.
    Identity,
    /// `q = 3p mod 1`.
    Multimodal,
    PiecewiseLinear(PiecewiseLinear),
}

impl RealityMap {
    pub fn constant(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidMap(format!("constant {c} outside [0, 1]")));
        }
        Ok(Self::Constant(c))
    }

    pub fn arctan(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidMap(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self::Arctan { alpha })
    }

    /// Short label used in file names and CSV rows.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Constant(_) => "constant",
            Self::SelfDefeating => "self-defeating",
            Self::Arctan { .. } => "arctan",
            Self::Identity => "identity",
            Self::Multimodal => "multimodal",
            Self::PiecewiseLinear(_) => "piecewise",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::Arctan { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// `q(p)`. Fails for `p` outside `[0, 1]`.
    pub fn evaluate(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain {
                what: "p",
                value: p,
                domain: "[0, 1]",
            });
        }
        Ok(self.eval(p))
    }

    /// `q(p)` for `p` already known to lie in `[0, 1]`.
    #[inline]
    pub(crate) fn eval(&self, p: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::SelfDefeating => 1.0 - p,
            Self::Arctan { alpha } => arctan_map(*alpha, p),
            Self::Identity => p,
            Self::Multimodal => {
                if p >= 1.0 {
                    // Last branch 3p - 2 taken up to and including p = 1.
                    1.0
                } else {
                    let x = 3.0 * p;
                    x - x.floor()
                }
            }
            Self::PiecewiseLinear(pl) => pl.eval(p),
        }
    }

    /// `q'(p)`, one-sided at the ends of `[0, 1]`.
    pub fn slope_at(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain {
                what: "p",
                value: p,
                domain: "[0, 1]",
            });
        }
        Ok(match self {
            Self::Constant(_) => 0.0,
            Self::SelfDefeating => -1.0,
            Self::Identity => 1.0,
            Self::Arctan { alpha } => arctan_slope(*alpha, p),
            Self::Multimodal => {
                for jump in [1.0 / 3.0, 2.0 / 3.0] {
                    if (p - jump).abs() < 1e-12 {
                        return Err(Error::NotDifferentiable { at: p });
                    }
                }
                3.0
            }
            Self::PiecewiseLinear(pl) => {
                if p < FD_STEP {
                    (pl.eval(p + FD_STEP) - pl.eval(p)) / FD_STEP
                } else if p > 1.0 - FD_STEP {
                    (pl.eval(p) - pl.eval(p - FD_STEP)) / FD_STEP
                } else {
                    (pl.eval(p + FD_STEP) - pl.eval(p - FD_STEP)) / (2.0 * FD_STEP)
                }
            }
        })
    }

    /// All solutions of `q(p) = p` with their slopes and stability.
    pub fn fixed_points(&self) -> FixedPoints {
        let locations: Vec<f64> = match self {
            Self::Identity => return FixedPoints::Continuum,
            Self::Constant(c) => vec![*c],
            Self::SelfDefeating => vec![0.5],
            Self::Multimodal => vec![0.0, 0.5, 1.0],
            Self::Arctan { alpha } => {
                let mut pts = vec![0.0, 0.5, 1.0];
                // Away from 1/2 and the ends the map can cross the diagonal
                // again (for 8/pi^2 < alpha < 1); scan the lower half and
                // mirror, since q(1 - p) = 1 - q(p).
                let alpha = *alpha;
                let g = |p: f64| arctan_map(alpha, p) - p;
                for root in scan_roots(&g, 1e-6, 0.5 - 1e-6, 4000) {
                    pts.push(root);
                    pts.push(1.0 - root);
                }
                pts
            }
            Self::PiecewiseLinear(pl) => pl.crossings(),
        };
        let mut points: Vec<FixedPointInfo> = locations
            .into_iter()
            .map(|p| {
                // Built-in maps are differentiable at all of their fixed points.
                let slope = self.slope_at(p).unwrap_or(f64::INFINITY);
                FixedPointInfo::new(p, slope)
            })
            .collect();
        points.sort_by(|a, b| a.location.total_cmp(&b.location));
        points.dedup_by(|a, b| (a.location - b.location).abs() < FIXED_POINT_TOLERANCE);
        let discontinuity_attractors = match self {
            Self::Multimodal => vec![1.0 / 3.0, 2.0 / 3.0],
            _ => Vec::new(),
        };
        FixedPoints::Isolated {
            points,
            discontinuity_attractors,
        }
    }

    /// Fixed points with slope below one.
    pub fn stable_fixed_points(&self) -> Vec<FixedPointInfo> {
        match self.fixed_points() {
            FixedPoints::Continuum => Vec::new(),
            FixedPoints::Isolated { points, .. } => {
                points.into_iter().filter(|f| f.stable).collect()
            }
        }
    }
}

impl fmt::Display for RealityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "constant({c})"),
            Self::Arctan { alpha } => write!(f, "arctan({alpha})"),
            Self::PiecewiseLinear(pl) => write!(f, "piecewise({} points)", pl.points.len()),
            other => f.write_str(other.label()),
        }
    }
}

/// The arctan family written with `atan2` so that both ends are exact:
/// `q(0) = 0`, `q(1) = 1`, and `q(p)` keeps full relative precision as
/// `p -> 0`.
#[inline]
fn arctan_map(alpha: f64, p: f64) -> f64 {
    (4.0 * p * (1.0 - p)).atan2(PI * alpha * (0.5 - p)) / PI
}

/// `alpha (1 + 4u^2) / ((1 - 4u^2)^2 + pi^2 alpha^2 u^2)` with `u = p - 1/2`.
/// Equals `alpha` at 1/2 and `8 / (pi^2 alpha)` at both ends.
#[inline]
fn arctan_slope(alpha: f64, p: f64) -> f64 {
    let u = p - 0.5;
    let u2 = u * u;
    let d = 1.0 - 4.0 * u2;
    alpha * (1.0 + 4.0 * u2) / (d * d + PI * PI * alpha * alpha * u2)
}

/// Roots of `g` on `[lo, hi]` found by sign changes over `cells` equal cells.
fn scan_roots(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let step = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut ga = g(a);
    for k in 1..=cells {
        let b = lo + step * k as f64;
        let gb = g(b);
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            roots.push(bisect(g, a, b));
        }
        a = b;
        ga = gb;
    }
    roots
}

/// Bisection for a bracketed sign change of `g` on `[a, b]`.
pub(crate) fn bisect(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointInfo {
    pub location: f64,
    /// `q'` at the fixed point.
    pub slope: f64,
    pub stable: bool,
    /// Fixed point sits at 0 or 1.
    pub boundary: bool,
}

impl FixedPointInfo {
    pub fn new(location: f64, slope: f64) -> Self {
        Self {
            location,
            slope,
            stable: slope < 1.0,
            boundary: location == 0.0 || location == 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixedPoints {
    Isolated {
        points: Vec<FixedPointInfo>,
        /// Jump discontinuities that act as attractors although `q != p` there.
        discontinuity_attractors: Vec<f64>,
    },
    /// Every `p` is a fixed point (the identity map).
    Continuum,
}

impl FixedPoints {
    pub fn points(&self) -> &[FixedPointInfo] {
        match self {
            Self::Isolated { points, .. } => points,
            Self::Continuum => &[],
        }
    }
}

/// A user-supplied map given by breakpoints, linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Breakpoints must start at `p = 0`, end at `p = 1`, and strictly
    /// increase in `p`. Values of `q` are clamped to `[0, 1]`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidMap("need at least two breakpoints".into()));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(Error::InvalidMap(
                "breakpoints must start at p = 0 and end at p = 1".into(),
            ));
        }
        if points.iter().any(|(p, q)| !p.is_finite() || !q.is_finite()) {
            return Err(Error::InvalidMap("non-finite breakpoint".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidMap("p must be strictly increasing".into()));
        }
        let points = points
            .into_iter()
            .map(|(p, q)| (p, q.clamp(0.0, 1.0)))
            .collect();
        Ok(Self { points })
    }

    /// Parses whitespace-separated `p q` pairs, one per line. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed: Option<(f64, f64)> = match fields.as_slice() {
                [p, q] => p.parse().ok().zip(q.parse().ok()),
                _ => None,
            };
            match parsed {
                Some(pq) => points.push(pq),
                None => {
                    return Err(Error::InvalidMap(format!(
                        "line {}: expected two numbers \"p q\", got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidMap(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn eval(&self, p: f64) -> f64 {
        let idx = self.points.partition_point(|&(x, _)| x <= p);
        if idx == 0 {
            return self.points[0].1;
        }
        if idx >= self.points.len() {
            return self.points[self.points.len() - 1].1;
        }
        let (x0, y0) = self.points[idx - 1];
        let (x1, y1) = self.points[idx];
        y0 + (y1 - y0) * (p - x0) / (x1 - x0)
    }

    fn crossings(&self) -> Vec<f64> {
        let g = |p: f64| self.eval(p) - p;
        let mut roots = Vec::new();
        for seg in self.points.windows(2) {
            let (a, b) = (seg[0].0, seg[1].0);
            let (ga, gb) = (seg[0].1 - a, seg[1].1 - b);
            if ga == 0.0 {
                roots.push(a);
            } else if ga * gb < 0.0 {
                roots.push(bisect(&g, a, b));
            }
        }
        let (last_p, last_q) = self.points[self.points.len() - 1];
        if last_q == last_p {
            roots.push(last_p);
        }
        roots
    }
}
