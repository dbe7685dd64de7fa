use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The realized outcome received no wagers, so the pool cannot be split.
    #[error("zero pool: no wealth was wagered on the realized outcome ({outcome})")]
    ZeroPool { outcome: String },

    #[error("{what} = {value} is outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("reality map is not differentiable at p = {at}")]
    NotDifferentiable { at: f64 },

    #[error("fixed point at p = {at} has slope {slope} >= 1 and is not stable")]
    UnstableFixedPoint { at: f64, slope: f64 },

    #[error("non-positive value {value} at t = {t} inside the fit window")]
    NonPositiveData { t: usize, value: f64 },

    #[error("every wealth numerator vanishes for m = {heads} heads in t = {tosses} tosses")]
    DegenerateAllZero { heads: u64, tosses: u64 },

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("invalid reality map: {0}")]
    InvalidMap(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
