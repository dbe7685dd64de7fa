//! Seeded single runs and parallel ensembles.
//!
//! Randomness comes from a [`TossStream`]: a ChaCha8 generator keyed by a
//! master seed and a per-run seed, positioned by toss index. Each toss
//! consumes exactly one 64-bit word pair, so any run can be replayed from
//! any toss and ensemble members never share a stream.

use std::fmt;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::game::{self, Outcome, PlayerPopulation};
use crate::rational::RationalContext;
use crate::reality::RealityMap;
use crate::{Error, Result};

pub const DEFAULT_SNAPSHOT_STRIDE: usize = 100;

/// Runs aggregated per parallel batch in [`ensemble`]. Fixed so that the
/// merge order never depends on the worker count.
const ENSEMBLE_BATCH: usize = 64;

/// Uniform variates for coin tosses, keyed by `(seed, run, toss)`.
#[derive(Debug, Clone)]
pub struct TossStream {
    rng: ChaCha8Rng,
    position: u64,
}

impl TossStream {
    pub fn new(seed: u64, run: u64) -> Self {
        Self::at(seed, run, 0)
    }

    /// A stream positioned just before toss number `toss` (0-based).
    pub fn at(seed: u64, run: u64, toss: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        rng.set_word_pos(2 * toss as u128);
        Self {
            rng,
            position: toss,
        }
    }

    /// Next uniform variate in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        self.position += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Number of tosses drawn so far, counted from toss 0.
    pub fn position(&self) -> u64 {
        self.position
    }
}

/// What a single toss looked like.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// `p`, the fraction bet on heads before the toss.
    pub bet: f64,
    /// `q(p)`, the probability of heads.
    pub bias: f64,
    pub outcome: Outcome,
}

/// One toss of the coin: draw heads with probability `q(p)` and pay out.
pub fn step(
    pop: &PlayerPopulation,
    map: &RealityMap,
    stream: &mut TossStream,
) -> Result<(PlayerPopulation, StepRecord)> {
    let bet = pop.total_bet().clamp(0.0, 1.0);
    let bias = map.eval(bet);
    let outcome = if stream.next_uniform() < bias {
        Outcome::Heads
    } else {
        Outcome::Tails
    };
    let next = pop.apply_outcome(outcome)?;
    Ok((next, StepRecord { bet, bias, outcome }))
}

/// [`step`] with the outcome supplied instead of drawn.
pub fn step_forced(
    pop: &PlayerPopulation,
    map: &RealityMap,
    outcome: Outcome,
) -> Result<(PlayerPopulation, StepRecord)> {
    let bet = pop.total_bet().clamp(0.0, 1.0);
    let bias = map.eval(bet);
    let next = pop.apply_outcome(outcome)?;
    Ok((next, StepRecord { bet, bias, outcome }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordOptions {
    /// Wealth vectors are kept every `snapshot_stride` tosses.
    pub snapshot_stride: usize,
    pub wealth_snapshots: bool,
    /// Record the epsilon player's expected log-return at every toss.
    pub epsilon_player: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: DEFAULT_SNAPSHOT_STRIDE,
            wealth_snapshots: true,
            epsilon_player: true,
        }
    }
}

/// A myopic log-optimal player taking part in the game. Her strategy is
/// recomputed before every toss and her wealth moves `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalParticipant {
    /// Starting share of total wealth, in `(0, 1)`.
    pub initial_wealth: f64,
    /// Grid size for the per-toss strategy search.
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub map: RealityMap,
    pub population: PlayerPopulation,
    pub horizon: usize,
    /// Master seed.
    pub seed: u64,
    pub record: RecordOptions,
    pub rational: Option<RationalParticipant>,
}

impl RunConfig {
    /// Defaults: snapshots every 100 tosses, epsilon player on, no rational player.
    pub fn new(map: RealityMap, population: PlayerPopulation, horizon: usize, seed: u64) -> Self {
        Self {
            map,
            population,
            horizon,
            seed,
            record: RecordOptions::default(),
            rational: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.record.snapshot_stride == 0 {
            return Err(Error::InvalidConfig("snapshot stride must be at least 1".into()));
        }
        if let Some(r) = &self.rational {
            if !(r.initial_wealth > 0.0 && r.initial_wealth < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "rational wealth {} outside (0, 1)",
                    r.initial_wealth
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WealthSnapshot {
    /// Tosses completed when the snapshot was taken.
    pub t: usize,
    pub wealths: Vec<f64>,
}

/// Per-toss history of one run. Entry `k` describes toss `t = k + 1`:
/// the state it was played from and how it landed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Per-run seed under the config's master seed.
    pub seed: u64,
    pub bets: Vec<f64>,
    pub biases: Vec<f64>,
    pub outcomes: Vec<Outcome>,
    /// `KL(q_t || p_t)`, present when the epsilon player is recorded.
    pub log_returns: Option<Vec<f64>>,
    pub snapshots: Vec<WealthSnapshot>,
    /// Population after the last completed toss. With a rational
    /// participant she is the last player, holding her latest strategy.
    pub final_population: PlayerPopulation,
    /// Rational participant's strategy and wealth share before each toss.
    pub rational: Option<RationalPath>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RationalPath {
    pub strategies: Vec<f64>,
    pub wealths: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.bets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bets.is_empty()
    }

    pub fn heads(&self) -> u64 {
        self.outcomes.iter().filter(|o| o.is_heads()).count() as u64
    }

    /// Bias the next toss would be played at.
    pub fn terminal_bias(&self, map: &RealityMap) -> f64 {
        map.eval(self.final_population.total_bet().clamp(0.0, 1.0))
    }
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAborted {
    pub partial: Trajectory,
    /// 1-based toss at which the run failed.
    pub step: usize,
    pub error: Error,
}

impl fmt::Display for RunAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run with seed {} aborted at toss {}: {}",
            self.partial.seed, self.step, self.error
        )
    }
}

impl std::error::Error for RunAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// `KL(q || p)` for the engine's hot loop; infinite when `p` is degenerate
/// and `q` disagrees.
#[inline]
fn epsilon_return(q: f64, p: f64) -> f64 {
    crate::analytics::kl_bernoulli(q, p).unwrap_or(f64::INFINITY)
}

/// Single run keyed by `(config.seed, 0)`.
pub fn run(config: &RunConfig) -> std::result::Result<Trajectory, RunAborted> {
    run_seeded(config, 0)
}

/// Single run keyed by `(config.seed, seed)`.
pub fn run_seeded(config: &RunConfig, seed: u64) -> std::result::Result<Trajectory, RunAborted> {
    let mut stream = TossStream::new(config.seed, seed);
    run_with_stream(config, seed, &mut stream)
}

/// Runs `config.horizon` tosses drawing from `stream`.
pub fn run_with_stream(
    config: &RunConfig,
    seed: u64,
    stream: &mut TossStream,
) -> std::result::Result<Trajectory, RunAborted> {
    let horizon = config.horizon;
    let mut traj = Trajectory {
        seed,
        bets: Vec::with_capacity(horizon),
        biases: Vec::with_capacity(horizon),
        outcomes: Vec::with_capacity(horizon),
        log_returns: config.record.epsilon_player.then(|| Vec::with_capacity(horizon)),
        snapshots: Vec::new(),
        final_population: config.population.clone(),
        rational: None,
    };
    if let Err(e) = config.validate() {
        return Err(RunAborted {
            partial: traj,
            step: 0,
            error: e,
        });
    }
    match config.rational {
        None => run_fixed(config, stream, traj),
        Some(r) => {
            traj.rational = Some(RationalPath::default());
            run_with_rational(config, r, stream, traj)
        }
    }
}

fn run_fixed(
    config: &RunConfig,
    stream: &mut TossStream,
    mut traj: Trajectory,
) -> std::result::Result<Trajectory, RunAborted> {
    let (strategies, mut wealths) = config.population.clone().into_parts();
    let record = config.record;
    let mut heads_pool = game::total_bet(&strategies, &wealths);
    let mut tails_pool = game::side_pool(&strategies, &wealths, Outcome::Tails);
    if record.wealth_snapshots {
        traj.snapshots.push(WealthSnapshot {
            t: 0,
            wealths: wealths.clone(),
        });
    }
    for t in 1..=config.horizon {
        let bet = heads_pool.clamp(0.0, 1.0);
        let bias = config.map.eval(bet);
        let outcome = if stream.next_uniform() < bias {
            Outcome::Heads
        } else {
            Outcome::Tails
        };
        traj.bets.push(bet);
        traj.biases.push(bias);
        traj.outcomes.push(outcome);
        if let Some(r) = traj.log_returns.as_mut() {
            r.push(epsilon_return(bias, bet));
        }
        let pool = match outcome {
            Outcome::Heads => heads_pool,
            Outcome::Tails => tails_pool,
        };
        match game::settle(&strategies, &mut wealths, outcome, pool) {
            Ok((h, tl)) => {
                heads_pool = h;
                tails_pool = tl;
            }
            Err(error) => {
                traj.final_population = PlayerPopulation::from_parts(strategies, wealths);
                return Err(RunAborted {
                    partial: traj,
                    step: t,
                    error,
                });
            }
        }
        if record.wealth_snapshots && t % record.snapshot_stride == 0 {
            traj.snapshots.push(WealthSnapshot {
                t,
                wealths: wealths.clone(),
            });
        }
    }
    traj.final_population = PlayerPopulation::from_parts(strategies, wealths);
    Ok(traj)
}

fn run_with_rational(
    config: &RunConfig,
    participant: RationalParticipant,
    stream: &mut TossStream,
    mut traj: Trajectory,
) -> std::result::Result<Trajectory, RunAborted> {
    let (mut strategies, fixed) = config.population.clone().into_parts();
    let n = fixed.len();
    let w0 = participant.initial_wealth;
    let mut wealths: Vec<f64> = fixed.iter().map(|w| w * (1.0 - w0)).collect();
    wealths.push(w0);
    strategies.push(0.5);
    let record = config.record;
    if record.wealth_snapshots {
        traj.snapshots.push(WealthSnapshot {
            t: 0,
            wealths: wealths.clone(),
        });
    }
    for t in 1..=config.horizon {
        let own = wealths[n];
        let others = 1.0 - own;
        let opponent_bet = if others > 0.0 {
            (game::total_bet(&strategies[..n], &wealths[..n]) / others).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let ctx = RationalContext::from_opponent_bet(opponent_bet, own.min(1.0 - 1e-15), &config.map);
        let choice = match ctx {
            Ok(ctx) => ctx.optimal_strategy_with_grid(participant.grid).first(),
            Err(error) => {
                traj.final_population = PlayerPopulation::from_parts(strategies, wealths);
                return Err(RunAborted {
                    partial: traj,
                    step: t,
                    error,
                });
            }
        };
        strategies[n] = choice;
        let bet = game::total_bet(&strategies, &wealths).clamp(0.0, 1.0);
        let bias = config.map.eval(bet);
        let outcome = if stream.next_uniform() < bias {
            Outcome::Heads
        } else {
            Outcome::Tails
        };
        traj.bets.push(bet);
        traj.biases.push(bias);
        traj.outcomes.push(outcome);
        if let Some(r) = traj.log_returns.as_mut() {
            r.push(epsilon_return(bias, bet));
        }
        if let Some(path) = traj.rational.as_mut() {
            path.strategies.push(choice);
            path.wealths.push(own);
        }
        let pool = game::side_pool(&strategies, &wealths, outcome);
        if let Err(error) = game::settle(&strategies, &mut wealths, outcome, pool) {
            traj.final_population = PlayerPopulation::from_parts(strategies, wealths);
            return Err(RunAborted {
                partial: traj,
                step: t,
                error,
            });
        }
        if record.wealth_snapshots && t % record.snapshot_stride == 0 {
            traj.snapshots.push(WealthSnapshot {
                t,
                wealths: wealths.clone(),
            });
        }
    }
    traj.final_population = PlayerPopulation::from_parts(strategies, wealths);
    Ok(traj)
}

/// Runs every seed and applies `f` to each result, in parallel on the
/// current rayon pool. Results come back in seed order.
pub fn map_runs<T, F>(config: &RunConfig, seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::result::Result<Trajectory, RunAborted>) -> T + Sync + Send,
{
    seeds
        .par_iter()
        .map(|&seed| f(run_seeded(config, seed)))
        .collect()
}

/// All trajectories for `seeds`, in seed order.
pub fn run_many(
    config: &RunConfig,
    seeds: &[u64],
) -> Vec<std::result::Result<Trajectory, RunAborted>> {
    map_runs(config, seeds, |r| r)
}

/// Per-step mean and (population) variance across runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentSeries {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1.0;
        for ((m, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(xs) {
            let delta = x - *m;
            *m += delta / self.n;
            *m2 += delta * (x - *m);
        }
    }

    fn finish(self) -> MomentSeries {
        let n = self.n;
        MomentSeries {
            variance: self.m2.iter().map(|v| (v / n).max(0.0)).collect(),
            mean: self.mean,
        }
    }
}

/// Terminal summary of one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub heads: u64,
    /// Index of the richest player at the end.
    pub dominant: usize,
    pub dominant_wealth: f64,
    pub final_bet: f64,
    pub final_bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedRun {
    pub seed: u64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub master_seed: u64,
    /// Seeds requested, in order.
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub bet: MomentSeries,
    pub bias: MomentSeries,
    pub log_return: Option<MomentSeries>,
    /// One entry per completed run, in seed order.
    pub summaries: Vec<RunSummary>,
    pub excluded: Vec<ExcludedRun>,
}

impl EnsembleStats {
    pub fn run_count(&self) -> usize {
        self.summaries.len()
    }
}

/// Runs every seed and aggregates per-step moments. Wealth snapshots are
/// not kept. Runs that abort are left out and listed in `excluded`.
pub fn ensemble(config: &RunConfig, seeds: &[u64]) -> Result<EnsembleStats> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("ensemble needs at least one seed".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("ensemble seeds must be distinct".into()));
    }
    let mut lean = config.clone();
    lean.record.wealth_snapshots = false;

    let horizon = config.horizon;
    let mut bet = Welford::new(horizon);
    let mut bias = Welford::new(horizon);
    let mut log_return = config.record.epsilon_player.then(|| Welford::new(horizon));
    let mut summaries = Vec::with_capacity(seeds.len());
    let mut excluded = Vec::new();

    for batch in seeds.chunks(ENSEMBLE_BATCH) {
        for result in run_many(&lean, batch) {
            match result {
                Ok(traj) => {
                    bet.push(&traj.bets);
                    bias.push(&traj.biases);
                    if let (Some(acc), Some(r)) = (log_return.as_mut(), traj.log_returns.as_ref()) {
                        acc.push(r);
                    }
                    let (dominant, dominant_wealth) = traj.final_population.dominant();
                    let final_bet = traj.final_population.total_bet().clamp(0.0, 1.0);
                    summaries.push(RunSummary {
                        seed: traj.seed,
                        heads: traj.heads(),
                        dominant,
                        dominant_wealth,
                        final_bet,
                        final_bias: config.map.eval(final_bet),
                    });
                }
                Err(aborted) => excluded.push(ExcludedRun {
                    seed: aborted.partial.seed,
                    step: aborted.step,
                    reason: aborted.error.to_string(),
                }),
            }
        }
    }
    if summaries.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "all {} runs aborted; first: {}",
            seeds.len(),
            excluded[0].reason
        )));
    }
    Ok(EnsembleStats {
        master_seed: config.seed,
        seeds: seeds.to_vec(),
        horizon,
        bet: bet.finish(),
        bias: bias.finish(),
        log_return: log_return.map(Welford::finish),
        summaries,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid_config(map: RealityMap, horizon: usize) -> RunConfig {
        RunConfig::new(map, PlayerPopulation::uniform_grid(29).unwrap(), horizon, 11)
    }

    #[test]
    fn stream_is_replayable_from_any_toss() {
        let mut a = TossStream::new(5, 3);
        let draws: Vec<f64> = (0..100).map(|_| a.next_uniform()).collect();
        assert_eq!(a.position(), 100);
        let mut b = TossStream::at(5, 3, 40);
        for &d in &draws[40..] {
            assert_eq!(b.next_uniform(), d);
        }
        let mut other_run = TossStream::new(5, 4);
        assert_ne!(other_run.next_uniform(), draws[0]);
        assert!(draws.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn identity_with_everyone_on_heads() {
        let pop = PlayerPopulation::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let mut stream = TossStream::new(0, 0);
        let (next, rec) = step(&pop, &RealityMap::Identity, &mut stream).unwrap();
        assert_eq!(rec.outcome, Outcome::Heads);
        assert_eq!(rec.bias, 1.0);
        assert_eq!(next.wealths(), pop.wealths());
    }

    #[test]
    fn forced_step_delegates_to_the_kernel() {
        let pop = PlayerPopulation::uniform_grid(7).unwrap();
        let (next, rec) = step_forced(&pop, &RealityMap::SelfDefeating, Outcome::Heads).unwrap();
        assert_eq!(next, pop.apply_outcome(Outcome::Heads).unwrap());
        assert_abs_diff_eq!(rec.bias, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn constant_half_is_a_fair_coin() {
        let pop = PlayerPopulation::equal_wealth(vec![0.9, 0.95]).unwrap();
        let mut stream = TossStream::new(1, 0);
        let heads = (0..20_000)
            .filter(|_| step(&pop, &RealityMap::Constant(0.5), &mut stream).unwrap().1.outcome.is_heads())
            .count();
        // 20k fair tosses: sd 70.7, so 5 sd is about 354.
        assert!((heads as i64 - 10_000).abs() < 354, "{heads}");
    }

    #[test]
    fn run_matches_repeated_step() {
        let config = grid_config(RealityMap::Arctan { alpha: 0.5 }, 300);
        let traj = run(&config).unwrap();
        let mut pop = config.population.clone();
        let mut stream = TossStream::new(config.seed, 0);
        for k in 0..300 {
            let (next, rec) = step(&pop, &config.map, &mut stream).unwrap();
            assert_eq!(rec.outcome, traj.outcomes[k]);
            assert_abs_diff_eq!(rec.bet, traj.bets[k], epsilon = 1e-12);
            pop = next;
        }
        for (a, b) in pop.wealths().iter().zip(traj.final_population.wealths()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn runs_are_bit_identical_and_consume_one_draw_per_toss() {
        let config = grid_config(RealityMap::SelfDefeating, 500);
        assert_eq!(run(&config).unwrap(), run(&config).unwrap());
        let mut stream = TossStream::new(config.seed, 9);
        let traj = run_with_stream(&config, 9, &mut stream).unwrap();
        assert_eq!(stream.position(), 500);
        assert_eq!(traj, run_seeded(&config, 9).unwrap());
    }

    #[test]
    fn trajectory_invariants_hold() {
        let config = grid_config(RealityMap::Multimodal, 1000);
        let traj = run(&config).unwrap();
        for (p, q) in traj.bets.iter().zip(&traj.biases) {
            assert_eq!(*q, config.map.evaluate(*p).unwrap());
        }
        assert!(traj.log_returns.as_ref().unwrap().iter().all(|r| *r >= 0.0));
        assert_eq!(traj.snapshots.len(), 11);
        for snap in &traj.snapshots {
            let total: f64 = snap.wealths.iter().sum();
            assert!((total - 1.0).abs() < game::WEALTH_TOLERANCE);
        }
    }

    #[test]
    fn single_player_bias_never_moves() {
        let pop = PlayerPopulation::new(vec![0.3], vec![1.0]).unwrap();
        let config = RunConfig::new(RealityMap::Arctan { alpha: 1.5 }, pop, 200, 0);
        let traj = run(&config).unwrap();
        assert!(traj.biases.iter().all(|q| *q == traj.biases[0]));
    }

    #[test]
    fn zero_pool_aborts_with_a_partial_trajectory() {
        // Nobody bets on tails, but the coin is biased to tails.
        let pop = PlayerPopulation::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let config = RunConfig::new(RealityMap::SelfDefeating, pop, 10, 0);
        let aborted = run(&config).unwrap_err();
        assert_eq!(aborted.step, 1);
        assert_eq!(aborted.partial.len(), 1);
        assert!(matches!(aborted.error, Error::ZeroPool { .. }));
        assert!(aborted.to_string().contains("aborted at toss 1"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = grid_config(RealityMap::Identity, 0);
        assert!(run(&config).is_err());
        config.horizon = 10;
        config.record.snapshot_stride = 0;
        assert!(ensemble(&config, &[0]).is_err());
        config.record.snapshot_stride = 1;
        assert!(ensemble(&config, &[]).is_err());
        assert!(ensemble(&config, &[1, 1]).is_err());
    }

    #[test]
    fn single_seed_ensemble_is_that_run() {
        let config = grid_config(RealityMap::SelfDefeating, 200);
        let stats = ensemble(&config, &[4]).unwrap();
        let traj = run_seeded(&config, 4).unwrap();
        assert_eq!(stats.bias.mean, traj.biases);
        assert!(stats.bias.variance.iter().all(|v| *v == 0.0));
        assert_eq!(stats.run_count(), 1);
    }

    #[test]
    fn constant_map_ensemble_mean_is_exact() {
        let config = grid_config(RealityMap::Constant(0.5), 100);
        let seeds: Vec<u64> = (0..20).collect();
        let stats = ensemble(&config, &seeds).unwrap();
        assert!(stats.bias.mean.iter().all(|q| *q == 0.5));
    }

    #[test]
    fn ensemble_reports_aborted_runs() {
        // Heads-only players against a map that can produce tails: some
        // seeds abort at the first tails, others do not.
        let pop = PlayerPopulation::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let config = RunConfig::new(RealityMap::Constant(0.9), pop, 5, 0);
        let seeds: Vec<u64> = (0..40).collect();
        let stats = ensemble(&config, &seeds).unwrap();
        assert!(!stats.excluded.is_empty());
        assert!(stats.run_count() > 0);
        assert_eq!(stats.run_count() + stats.excluded.len(), 40);
    }

    #[test]
    fn ensemble_ignores_worker_count() {
        let config = grid_config(RealityMap::Arctan { alpha: 0.5 }, 300);
        let seeds: Vec<u64> = (100..230).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| ensemble(&config, &seeds).unwrap());
        let b = many.install(|| ensemble(&config, &seeds).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rational_participant_is_tracked() {
        let pop = PlayerPopulation::new(vec![0.5], vec![1.0]).unwrap();
        let mut config = RunConfig::new(RealityMap::Arctan { alpha: 2.0 }, pop, 50, 2);
        config.rational = Some(RationalParticipant {
            initial_wealth: 0.6,
            grid: 1000,
        });
        let traj = run(&config).unwrap();
        let path = traj.rational.as_ref().unwrap();
        assert_eq!(path.strategies.len(), 50);
        assert_abs_diff_eq!(path.wealths[0], 0.6, epsilon = 1e-15);
        // Rich enough to move the coin: she leaves the symmetric point.
        assert!((path.strategies[0] - 0.5).abs() > 0.05);
        let total: f64 = traj.final_population.wealths().iter().sum();
        assert!((total - 1.0).abs() < game::WEALTH_TOLERANCE);

        config.rational = Some(RationalParticipant {
            initial_wealth: 0.1,
            grid: 1000,
        });
        let poor = run(&config).unwrap();
        assert_abs_diff_eq!(poor.rational.unwrap().strategies[0], 0.5, epsilon = 1e-8);
    }
}
