//! Population state and the pari-mutuel wealth kernel.
//!
//! Every player bets all of her wealth each round: a fraction `s_i` on heads
//! and `1 - s_i` on tails. The winning side splits the entire pool in
//! proportion to individual wagers, so after heads
//!
//! ```text
//! w_i' = s_i w_i / p,          p = sum_i s_i w_i
//! ```
//!
//! and after tails `w_i' = (1 - s_i) w_i / (1 - p)`. Total wealth stays 1.

use std::fmt;

use crate::{Error, Result};

/// Absolute tolerance on `sum(w) == 1`.
pub const WEALTH_TOLERANCE: f64 = 1e-12;

/// Wealth entries below this are set to zero after an update.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Result of one coin toss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Heads,
    Tails,
}

impl Outcome {
    /// Column of this outcome in a [`GeneralBetMatrix`]: heads is the first.
    pub fn column(self) -> usize {
        match self {
            Outcome::Heads => 0,
            Outcome::Tails => 1,
        }
    }

    pub fn is_heads(self) -> bool {
        self == Outcome::Heads
    }

    /// Fraction of a player's wealth that lands on this side for strategy `s`.
    #[inline]
    pub fn stake(self, s: f64) -> f64 {
        match self {
            Outcome::Heads => s,
            Outcome::Tails => 1.0 - s,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Heads => "heads",
            Outcome::Tails => "tails",
        })
    }
}

/// Fixed-strategy players and their current wealth shares.
///
/// Strategies never change once the population is built; only the wealth
/// vector evolves.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPopulation {
    strategies: Vec<f64>,
    wealths: Vec<f64>,
}

impl PlayerPopulation {
    /// Builds a population, checking that wealth is already normalized.
    pub fn new(strategies: Vec<f64>, wealths: Vec<f64>) -> Result<Self> {
        validate_strategies(&strategies)?;
        if wealths.len() != strategies.len() {
            return Err(Error::InvalidPopulation(format!(
                "{} strategies but {} wealths",
                strategies.len(),
                wealths.len()
            )));
        }
        if let Some(w) = wealths.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidPopulation(format!(
                "wealth {w} outside [0, 1]"
            )));
        }
        let total: f64 = wealths.iter().sum();
        if (total - 1.0).abs() > WEALTH_TOLERANCE {
            return Err(Error::InvalidPopulation(format!(
                "wealths sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            strategies,
            wealths,
        })
    }

    /// Builds a population from non-negative weights, rescaling them to sum to 1.
    pub fn with_weights(strategies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPopulation(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPopulation("weights sum to zero".into()));
        }
        let wealths = weights.iter().map(|w| w / total).collect();
        Self::new(strategies, wealths)
    }

    /// Every player starts with wealth `1/N`.
    pub fn equal_wealth(strategies: Vec<f64>) -> Result<Self> {
        validate_strategies(&strategies)?;
        let n = strategies.len();
        Self::new(strategies, vec![1.0 / n as f64; n])
    }

    /// `N` players on the open grid `k/(N+1)`, `k = 1..=N`, with equal wealth.
    pub fn uniform_grid(n: usize) -> Result<Self> {
        Self::equal_wealth(grid_strategies(n))
    }

    pub fn strategies(&self) -> &[f64] {
        &self.strategies
    }

    pub fn wealths(&self) -> &[f64] {
        &self.wealths
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// Fraction of total wealth wagered on heads, `p = sum_i s_i w_i`.
    pub fn total_bet(&self) -> f64 {
        total_bet(&self.strategies, &self.wealths)
    }

    /// Wealth after the toss lands on `outcome`.
    pub fn apply_outcome(&self, outcome: Outcome) -> Result<Self> {
        let mut next = self.clone();
        next.apply_outcome_mut(outcome)?;
        Ok(next)
    }

    /// In-place version of [`apply_outcome`](Self::apply_outcome). On error
    /// the population is left untouched.
    pub fn apply_outcome_mut(&mut self, outcome: Outcome) -> Result<()> {
        let pool = side_pool(&self.strategies, &self.wealths, outcome);
        settle(&self.strategies, &mut self.wealths, outcome, pool).map(|_| ())
    }

    /// Index and wealth of the richest player. Ties go to the lowest index.
    pub fn dominant(&self) -> (usize, f64) {
        self.wealths
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, w)| {
                if w > best.1 {
                    (i, w)
                } else {
                    best
                }
            })
    }

    /// Skips the normalization check; callers guarantee the invariants.
    pub(crate) fn from_parts(strategies: Vec<f64>, wealths: Vec<f64>) -> Self {
        Self {
            strategies,
            wealths,
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.strategies, self.wealths)
    }
}

/// Strategies `k/(n+1)` for `k = 1..=n`.
pub fn grid_strategies(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

fn validate_strategies(strategies: &[f64]) -> Result<()> {
    if strategies.is_empty() {
        return Err(Error::InvalidPopulation("population has no players".into()));
    }
    if let Some(s) = strategies.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidPopulation(format!(
            "strategy {s} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `sum_i s_i w_i`.
#[inline]
pub fn total_bet(strategies: &[f64], wealths: &[f64]) -> f64 {
    strategies.iter().zip(wealths).map(|(s, w)| s * w).sum()
}

/// Total wealth wagered on `outcome`. Computed directly rather than as
/// `1 - p` so the tails pool keeps full relative precision near `p = 1`.
#[inline]
pub(crate) fn side_pool(strategies: &[f64], wealths: &[f64], outcome: Outcome) -> f64 {
    strategies
        .iter()
        .zip(wealths)
        .map(|(&s, w)| outcome.stake(s) * w)
        .sum()
}

/// Pays out a pool of size `pool` on `outcome`, in place, and returns the
/// heads and tails pools of the updated wealth.
pub(crate) fn settle(
    strategies: &[f64],
    wealths: &mut [f64],
    outcome: Outcome,
    pool: f64,
) -> Result<(f64, f64)> {
    if !(pool > 0.0) {
        return Err(Error::ZeroPool {
            outcome: outcome.to_string(),
        });
    }
    let inv = 1.0 / pool;
    let mut clamped = false;
    let (mut heads, mut tails) = (0.0, 0.0);
    for (w, &s) in wealths.iter_mut().zip(strategies) {
        let mut next = outcome.stake(s) * *w * inv;
        if next < UNDERFLOW_FLOOR && next != 0.0 {
            next = 0.0;
            clamped = true;
        }
        *w = next;
        heads += s * next;
        tails += (1.0 - s) * next;
    }
    if clamped {
        let total: f64 = wealths.iter().sum();
        wealths.iter_mut().for_each(|w| *w /= total);
        heads = total_bet(strategies, wealths);
        tails = side_pool(strategies, wealths, Outcome::Tails);
    }
    Ok((heads, tails))
}

/// Bets over `L` outcomes: row `i` is player `i`'s split of her wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralBetMatrix {
    bets: Vec<Vec<f64>>,
    wealths: Vec<f64>,
}

impl GeneralBetMatrix {
    pub fn new(bets: Vec<Vec<f64>>, wealths: Vec<f64>) -> Result<Self> {
        if bets.is_empty() || bets.len() != wealths.len() {
            return Err(Error::InvalidPopulation(format!(
                "{} bet rows but {} wealths",
                bets.len(),
                wealths.len()
            )));
        }
        let outcomes = bets[0].len();
        if outcomes == 0 {
            return Err(Error::InvalidPopulation("no outcomes".into()));
        }
        for (i, row) in bets.iter().enumerate() {
            if row.len() != outcomes {
                return Err(Error::InvalidPopulation(format!(
                    "row {i} has {} outcomes, expected {outcomes}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::InvalidPopulation(format!(
                    "row {i} has a negative bet"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > WEALTH_TOLERANCE {
                return Err(Error::InvalidPopulation(format!(
                    "row {i} sums to {total}, expected 1"
                )));
            }
        }
        if wealths.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidPopulation("negative wealth".into()));
        }
        let total: f64 = wealths.iter().sum();
        if (total - 1.0).abs() > WEALTH_TOLERANCE {
            return Err(Error::InvalidPopulation(format!(
                "wealths sum to {total}, expected 1"
            )));
        }
        Ok(Self { bets, wealths })
    }

    /// Two-outcome matrix equivalent to a [`PlayerPopulation`].
    pub fn from_population(pop: &PlayerPopulation) -> Self {
        Self {
            bets: pop.strategies().iter().map(|&s| vec![s, 1.0 - s]).collect(),
            wealths: pop.wealths().to_vec(),
        }
    }

    pub fn outcomes(&self) -> usize {
        self.bets[0].len()
    }

    /// Total wager on outcome `l`.
    pub fn pool(&self, l: usize) -> f64 {
        self.bets
            .iter()
            .zip(&self.wealths)
            .map(|(row, w)| row[l] * w)
            .sum()
    }

    /// Payoffs `pi_i = s_il w_i / p_l` when outcome `winning` is realized.
    pub fn payoff(&self, winning: usize) -> Result<Vec<f64>> {
        if winning >= self.outcomes() {
            return Err(Error::Domain {
                what: "winning outcome",
                value: winning as f64,
                domain: "[0, L)",
            });
        }
        let pool = self.pool(winning);
        if !(pool > 0.0) {
            return Err(Error::ZeroPool {
                outcome: format!("outcome {winning}"),
            });
        }
        Ok(self
            .bets
            .iter()
            .zip(&self.wealths)
            .map(|(row, w)| row[winning] * w / pool)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn total_bet_of_symmetric_grid_is_half() {
        let pop = PlayerPopulation::uniform_grid(29).unwrap();
        assert_abs_diff_eq!(pop.total_bet(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pop.strategies()[0], 1.0 / 30.0);
    }

    #[test]
    fn total_bet_single_player() {
        let pop = PlayerPopulation::new(vec![0.3], vec![1.0]).unwrap();
        assert_eq!(pop.total_bet(), 0.3);
    }

    #[test]
    fn total_bet_hand_evaluated() {
        let pop = PlayerPopulation::new(vec![0.2, 0.6], vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(pop.total_bet(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn heads_update_matches_hand_calculation() {
        let pop = PlayerPopulation::new(vec![1.0 / 3.0, 2.0 / 3.0], vec![0.5, 0.5]).unwrap();
        let next = pop.apply_outcome(Outcome::Heads).unwrap();
        assert_abs_diff_eq!(next.wealths()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.wealths()[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sole_player_keeps_everything() {
        for &s in &[0.01, 0.3, 0.5, 0.99] {
            let pop = PlayerPopulation::new(vec![s], vec![1.0]).unwrap();
            for o in [Outcome::Heads, Outcome::Tails] {
                assert_eq!(pop.apply_outcome(o).unwrap().wealths(), &[1.0]);
            }
        }
    }

    #[test]
    fn identical_strategies_leave_wealth_unchanged() {
        let pop = PlayerPopulation::new(vec![0.4; 3], vec![0.2, 0.3, 0.5]).unwrap();
        let next = pop.apply_outcome(Outcome::Tails).unwrap();
        for (a, b) in pop.wealths().iter().zip(next.wealths()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn player_matching_the_pool_share_is_unchanged() {
        // p = 0.5, so the player with s = 0.5 neither gains nor loses.
        let pop = PlayerPopulation::equal_wealth(vec![0.2, 0.5, 0.8]).unwrap();
        let next = pop.apply_outcome(Outcome::Heads).unwrap();
        assert_abs_diff_eq!(next.wealths()[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_pool_is_an_error_and_leaves_state_alone() {
        let mut pop = PlayerPopulation::equal_wealth(vec![0.0, 0.0]).unwrap();
        let before = pop.clone();
        let err = pop.apply_outcome_mut(Outcome::Heads).unwrap_err();
        assert!(matches!(err, Error::ZeroPool { .. }));
        assert_eq!(pop, before);

        let all_heads = PlayerPopulation::equal_wealth(vec![1.0, 1.0]).unwrap();
        assert!(all_heads.apply_outcome(Outcome::Tails).is_err());
    }

    #[test]
    fn rejects_bad_populations() {
        assert!(PlayerPopulation::new(vec![], vec![]).is_err());
        assert!(PlayerPopulation::new(vec![0.5, 1.2], vec![0.5, 0.5]).is_err());
        assert!(PlayerPopulation::new(vec![0.5, 0.2], vec![0.5, 0.6]).is_err());
        assert!(PlayerPopulation::new(vec![0.5], vec![0.5, 0.5]).is_err());
        assert!(PlayerPopulation::with_weights(vec![0.5, 0.2], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn tiny_wealth_is_clamped_to_zero() {
        let mut pop = PlayerPopulation::new(vec![1e-200, 0.5], vec![1e-150, 1.0 - 1e-150]).unwrap();
        pop.apply_outcome_mut(Outcome::Heads).unwrap();
        assert_eq!(pop.wealths()[0], 0.0);
        assert_eq!(pop.wealths()[1], 1.0);
    }

    #[test]
    fn general_payoff_three_outcomes() {
        let m = GeneralBetMatrix::new(
            vec![vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let pi = m.payoff(2).unwrap();
        assert_abs_diff_eq!(pi[0], 0.25 / 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[1], 0.10 / 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[0], 0.7142857142857143, epsilon = 1e-12);
    }

    #[test]
    fn general_payoff_single_player_gets_everything() {
        let m = GeneralBetMatrix::new(vec![vec![0.1, 0.7, 0.2]], vec![1.0]).unwrap();
        for l in 0..3 {
            assert_abs_diff_eq!(m.payoff(l).unwrap()[0], 1.0, epsilon = 1e-15);
        }
        let zero = GeneralBetMatrix::new(vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
        assert!(matches!(zero.payoff(0), Err(Error::ZeroPool { .. })));
        assert!(zero.payoff(5).is_err());
    }

    #[test]
    fn general_matrix_rejects_rows_not_summing_to_one() {
        assert!(GeneralBetMatrix::new(vec![vec![0.5, 0.6]], vec![1.0]).is_err());
        assert!(GeneralBetMatrix::new(vec![vec![1.5, -0.5]], vec![1.0]).is_err());
    }

    fn population(max: usize) -> impl Strategy<Value = PlayerPopulation> {
        (1..max).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.001f64..0.999, n),
                proptest::collection::vec(0.01f64..1.0, n),
            )
                .prop_map(|(s, w)| PlayerPopulation::with_weights(s, w).unwrap())
        })
    }

    proptest! {
        #[test]
        fn two_outcome_general_payoff_matches_apply_outcome(pop in population(40), heads in any::<bool>()) {
            let outcome = if heads { Outcome::Heads } else { Outcome::Tails };
            let direct = pop.apply_outcome(outcome).unwrap();
            let general = GeneralBetMatrix::from_population(&pop).payoff(outcome.column()).unwrap();
            for (a, b) in direct.wealths().iter().zip(&general) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn heads_update_is_a_bayes_posterior(pop in population(40)) {
            let next = pop.apply_outcome(Outcome::Heads).unwrap();
            let joint: Vec<f64> = pop.strategies().iter().zip(pop.wealths()).map(|(s, w)| s * w).collect();
            let evidence: f64 = joint.iter().sum();
            for (posterior, j) in next.wealths().iter().zip(&joint) {
                prop_assert!((posterior - j / evidence).abs() < 1e-12);
            }
            let total: f64 = next.wealths().iter().sum();
            prop_assert!((total - 1.0).abs() < WEALTH_TOLERANCE);
        }

        #[test]
        fn heads_growth_factor_increases_with_strategy(pop in population(40)) {
            let next = pop.apply_outcome(Outcome::Heads).unwrap();
            let mut growth: Vec<(f64, f64)> = pop.strategies().iter().zip(pop.wealths().iter().zip(next.wealths()))
                .map(|(&s, (w0, w1))| (s, w1 / w0)).collect();
            growth.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in growth.windows(2) {
                if pair[1].0 > pair[0].0 {
                    prop_assert!(pair[1].1 > pair[0].1);
                }
            }
        }
    }
}
