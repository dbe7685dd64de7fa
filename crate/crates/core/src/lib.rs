//! The reality game: a repeated pari-mutuel coin toss in which the bias of
//! the coin depends on how much wealth is wagered on heads.
//!
//! The crate is split by concern:
//!
//! - [`game`] holds the population state and the exact wealth-update kernel.
//! - [`reality`] defines the reality maps `q(p)`, their fixed points and slopes.
//! - [`engine`] runs seeded single games and parallel ensembles.
//! - [`rational`] covers log-optimal (Kelly) players that react to the crowd.
//! - [`analytics`] has the closed-form predictions and the power-law fitting.

pub mod analytics;
pub mod engine;
mod error;
pub mod game;
pub mod rational;
pub mod reality;

pub use error::{Error, Result};
pub use game::{Outcome, PlayerPopulation};
pub use reality::RealityMap;
