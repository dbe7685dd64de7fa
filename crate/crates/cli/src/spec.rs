//! Experiment spec files: flat `key = value` lines, `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use realitygame_core::reality::PiecewiseLinear;
use realitygame_core::{PlayerPopulation, RealityMap};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_PLAYERS: usize = 29;
pub const DEFAULT_HORIZON: usize = 2000;
pub const DEFAULT_RATIONAL_WEALTH: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read spec {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> SpecError {
    SpecError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BiasDynamics,
    WealthDynamics,
    SubjectiveDistribution,
    RationalCurve,
    Inefficiency,
    Table1,
}

impl ExperimentKind {
    pub const ALL: [Self; 6] = [
        Self::BiasDynamics,
        Self::WealthDynamics,
        Self::SubjectiveDistribution,
        Self::RationalCurve,
        Self::Inefficiency,
        Self::Table1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::BiasDynamics => "bias-dynamics",
            Self::WealthDynamics => "wealth-dynamics",
            Self::SubjectiveDistribution => "subjective-distribution",
            Self::RationalCurve => "rational-curve",
            Self::Inefficiency => "inefficiency",
            Self::Table1 => "table1",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

/// A validated experiment with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub map: RealityMap,
    pub population: PlayerPopulation,
    pub horizon: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub snapshot_stride: usize,
    pub fit_lo: Option<usize>,
    pub fit_hi: Option<usize>,
    pub epsilon_player: bool,
    /// Wealth shares for the rational-curve experiment.
    pub rational_wealth: Vec<f64>,
    /// Source of a piecewise-linear map, if any.
    pub map_file: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Run seeds `0..ensemble` under the master seed.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.ensemble as u64).collect()
    }

    /// Fit window with defaults `[100, T/10]` filled in.
    pub fn fit_window(&self) -> (usize, usize) {
        let (lo, hi) = realitygame_core::analytics::default_fit_window(self.horizon);
        (self.fit_lo.unwrap_or(lo), self.fit_hi.unwrap_or(hi))
    }

    /// Flat key/value view of the resolved spec, for manifests.
    pub fn resolved(&self) -> BTreeMap<&'static str, String> {
        let mut out = BTreeMap::new();
        out.insert("kind", self.kind.to_string());
        out.insert("map", self.map.label().to_string());
        match &self.map {
            RealityMap::Arctan { alpha } => {
                out.insert("alpha", alpha.to_string());
            }
            RealityMap::Constant(c) => {
                out.insert("constant", c.to_string());
            }
            _ => {}
        }
        if let Some(path) = &self.map_file {
            out.insert("map_file", path.display().to_string());
        }
        out.insert("n_players", self.population.len().to_string());
        out.insert("strategies", join(self.population.strategies()));
        out.insert("horizon", self.horizon.to_string());
        out.insert("ensemble", self.ensemble.to_string());
        out.insert("seed", self.seed.to_string());
        out.insert("snapshot_stride", self.snapshot_stride.to_string());
        let (lo, hi) = self.fit_window();
        out.insert("fit_lo", lo.to_string());
        out.insert("fit_hi", hi.to_string());
        out.insert("epsilon_player", self.epsilon_player.to_string());
        out.insert("rational_wealth", join(&self.rational_wealth));
        out
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

const KEYS: [&str; 15] = [
    "kind",
    "map",
    "alpha",
    "constant",
    "map_file",
    "n_players",
    "strategies",
    "horizon",
    "ensemble",
    "seed",
    "snapshot_stride",
    "fit_lo",
    "fit_hi",
    "epsilon_player",
    "rational_wealth",
];

struct Entry {
    value: String,
}

/// Parses and validates spec text. Relative `map_file` paths resolve
/// against `base_dir` when one is given.
pub fn parse_spec_in(text: &str, base_dir: Option<&Path>) -> Result<ExperimentSpec, SpecError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = content.len() - content.trim_start().len() + 1;
            return Err(SpecError::Parse {
                line,
                column,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(SpecError::Parse {
                line,
                column: content.len() - content.trim_start().len() + 1,
                message: format!("malformed key {key:?}"),
            });
        }
        if value.is_empty() {
            return Err(SpecError::Parse {
                line,
                column: eq + 2,
                message: format!("missing value for `{key}`"),
            });
        }
        if !KEYS.contains(&key) {
            return Err(invalid(key, "unknown key"));
        }
        if entries.contains_key(key) {
            return Err(SpecError::Parse {
                line,
                column: content.len() - content.trim_start().len() + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
        entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
            },
        );
    }
    build(&entries, base_dir)
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    parse_spec_in(text, None)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_spec_in(&text, path.parent())
}

fn get<T: FromStr>(entries: &BTreeMap<String, Entry>, key: &str) -> Result<Option<T>, SpecError>
where
    T::Err: fmt::Display,
{
    entries
        .get(key)
        .map(|e| {
            e.value
                .parse::<T>()
                .map_err(|err| invalid(key, format!("{:?}: {err}", e.value)))
        })
        .transpose()
}

fn get_list(entries: &BTreeMap<String, Entry>, key: &str) -> Result<Option<Vec<f64>>, SpecError> {
    entries
        .get(key)
        .map(|e| {
            e.value
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|err| invalid(key, format!("{x:?}: {err}")))
                })
                .collect()
        })
        .transpose()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, SpecError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(invalid(key, format!("expected a boolean, got {other:?}"))),
    }
}

/// Integers written as `10000`, `1e4` or `10_000`.
fn get_count(entries: &BTreeMap<String, Entry>, key: &str) -> Result<Option<usize>, SpecError> {
    let Some(e) = entries.get(key) else {
        return Ok(None);
    };
    let cleaned = e.value.replace('_', "");
    if let Ok(n) = cleaned.parse::<usize>() {
        return Ok(Some(n));
    }
    match cleaned.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(Some(x as usize)),
        _ => Err(invalid(key, format!("expected a non-negative integer, got {:?}", e.value))),
    }
}

fn build(entries: &BTreeMap<String, Entry>, base_dir: Option<&Path>) -> Result<ExperimentSpec, SpecError> {
    let kind = match get::<ExperimentKind>(entries, "kind")? {
        Some(k) => k,
        None => return Err(invalid("kind", "required")),
    };

    let alpha = get::<f64>(entries, "alpha")?;
    let constant = get::<f64>(entries, "constant")?;
    let map_file = entries.get("map_file").map(|e| {
        let p = PathBuf::from(&e.value);
        match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    });
    let map_name = entries.get("map").map(|e| e.value.as_str());
    let map = match (kind, map_name) {
        (ExperimentKind::Table1, _) => RealityMap::Constant(0.5),
        (_, None) => return Err(invalid("map", "required for this kind")),
        (_, Some(name)) => match name {
            "constant" => RealityMap::constant(constant.unwrap_or(0.5))
                .map_err(|e| invalid("constant", e.to_string()))?,
            "self-defeating" => RealityMap::SelfDefeating,
            "identity" => RealityMap::Identity,
            "multimodal" => RealityMap::Multimodal,
            "arctan" => {
                let a = alpha.ok_or_else(|| invalid("alpha", "required when map = arctan"))?;
                RealityMap::arctan(a).map_err(|_| invalid("alpha", format!("must be > 0, got {a}")))?
            }
            "piecewise" => {
                let path = map_file
                    .as_ref()
                    .ok_or_else(|| invalid("map_file", "required when map = piecewise"))?;
                let pl = PiecewiseLinear::load(path).map_err(|e| invalid("map_file", e.to_string()))?;
                RealityMap::PiecewiseLinear(pl)
            }
            other => return Err(invalid("map", format!("unknown map {other:?}"))),
        },
    };
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("alpha", format!("must be > 0, got {a}")));
        }
    }

    let n_players = get_count(entries, "n_players")?;
    let population = match get_list(entries, "strategies")? {
        Some(strategies) => {
            if let Some(n) = n_players {
                if n != strategies.len() {
                    return Err(invalid(
                        "n_players",
                        format!("{n} does not match {} listed strategies", strategies.len()),
                    ));
                }
            }
            PlayerPopulation::equal_wealth(strategies).map_err(|e| invalid("strategies", e.to_string()))?
        }
        None => {
            let n = n_players.unwrap_or(DEFAULT_PLAYERS);
            PlayerPopulation::uniform_grid(n).map_err(|e| invalid("n_players", e.to_string()))?
        }
    };

    let horizon = get_count(entries, "horizon")?.unwrap_or(DEFAULT_HORIZON);
    if horizon == 0 && kind != ExperimentKind::SubjectiveDistribution {
        return Err(invalid("horizon", "must be at least 1"));
    }
    let ensemble = get_count(entries, "ensemble")?.unwrap_or(1);
    if ensemble == 0 {
        return Err(invalid("ensemble", "must be at least 1"));
    }
    let seed = match entries.get("seed") {
        Some(e) => e
            .value
            .replace('_', "")
            .parse::<u64>()
            .map_err(|err| invalid("seed", format!("{:?}: {err}", e.value)))?,
        None => 0,
    };
    let snapshot_stride =
        get_count(entries, "snapshot_stride")?.unwrap_or(realitygame_core::engine::DEFAULT_SNAPSHOT_STRIDE);
    if snapshot_stride == 0 {
        return Err(invalid("snapshot_stride", "must be at least 1"));
    }
    let fit_lo = get_count(entries, "fit_lo")?;
    let fit_hi = get_count(entries, "fit_hi")?;
    let epsilon_player = match entries.get("epsilon_player") {
        Some(e) => parse_bool("epsilon_player", &e.value)?,
        None => true,
    };
    let rational_wealth = get_list(entries, "rational_wealth")?.unwrap_or_else(|| DEFAULT_RATIONAL_WEALTH.to_vec());
    if let Some(w) = rational_wealth.iter().find(|w| !(**w >= 0.0 && **w < 1.0)) {
        return Err(invalid("rational_wealth", format!("{w} outside [0, 1)")));
    }

    let spec = ExperimentSpec {
        kind,
        map,
        population,
        horizon,
        ensemble,
        seed,
        snapshot_stride,
        fit_lo,
        fit_hi,
        epsilon_player,
        rational_wealth,
        map_file,
    };
    if matches!(kind, ExperimentKind::Inefficiency | ExperimentKind::Table1) {
        if !spec.epsilon_player {
            return Err(invalid("epsilon_player", "inefficiency needs the epsilon player"));
        }
        let (lo, hi) = spec.fit_window();
        if lo == 0 || lo >= hi || hi > spec.horizon {
            return Err(invalid(
                if spec.fit_hi.is_some() { "fit_hi" } else { "fit_lo" },
                format!("window [{lo}, {hi}] must satisfy 1 <= lo < hi <= horizon ({})", spec.horizon),
            ));
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_gets_defaults() {
        let spec = parse_spec("kind = bias-dynamics\nmap = self-defeating\n").unwrap();
        assert_eq!(spec.kind, ExperimentKind::BiasDynamics);
        assert_eq!(spec.map, RealityMap::SelfDefeating);
        assert_eq!(spec.population, PlayerPopulation::uniform_grid(29).unwrap());
        assert_eq!(spec.horizon, 2000);
        assert_eq!(spec.ensemble, 1);
        assert_eq!(spec.seed, 0);
        assert!(spec.epsilon_player);
    }

    #[test]
    fn arctan_with_alpha() {
        let spec = parse_spec("kind = bias-dynamics\nmap = arctan\nalpha = 1.5").unwrap();
        assert_eq!(spec.map, RealityMap::Arctan { alpha: 1.5 });
    }

    #[test]
    fn negative_alpha_names_the_key() {
        let err = parse_spec("kind = bias-dynamics\nmap = arctan\nalpha = -1").unwrap_err();
        assert!(matches!(err, SpecError::Validation { ref key, .. } if key == "alpha"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_spec("kind = table1\n   oops\n").unwrap_err();
        assert_eq!(
            err,
            SpecError::Parse {
                line: 2,
                column: 4,
                message: "expected `key = value`".into()
            }
        );
        let err = parse_spec("kind = table1\nhorizon =\n").unwrap_err();
        assert!(matches!(err, SpecError::Parse { line: 2, column: 10, .. }), "{err}");
        let err = parse_spec("kind = table1\nkind = table1\n").unwrap_err();
        assert!(matches!(err, SpecError::Parse { line: 2, .. }));
    }

    #[test]
    fn validation_errors() {
        for (text, key) in [
            ("map = identity", "kind"),
            ("kind = nope", "kind"),
            ("kind = bias-dynamics", "map"),
            ("kind = bias-dynamics\nmap = arctan", "alpha"),
            ("kind = bias-dynamics\nmap = wobbly", "map"),
            ("kind = bias-dynamics\nmap = identity\nhorizon = 0", "horizon"),
            ("kind = bias-dynamics\nmap = identity\nensemble = many", "ensemble"),
            ("kind = bias-dynamics\nmap = identity\nsurprise = 1", "surprise"),
            ("kind = bias-dynamics\nmap = identity\nepsilon_player = maybe", "epsilon_player"),
            ("kind = bias-dynamics\nmap = identity\nn_players = 0", "n_players"),
            ("kind = bias-dynamics\nmap = identity\nn_players = 3\nstrategies = 0.1,0.2", "n_players"),
            ("kind = bias-dynamics\nmap = constant\nconstant = 2", "constant"),
            ("kind = inefficiency\nmap = identity\nhorizon = 500", "fit_lo"),
            ("kind = rational-curve\nmap = identity\nrational_wealth = 0.2,1.0", "rational_wealth"),
            ("kind = bias-dynamics\nmap = piecewise", "map_file"),
        ] {
            match parse_spec(text) {
                Err(SpecError::Validation { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn full_spec_round_trip() {
        let text = "# exponent run\nkind = inefficiency   # trailing comment\nmap = constant\n\
                    n_players = 3000\nhorizon = 1e4\nensemble = 256\nseed = 17\n\
                    snapshot_stride = 50\nfit_lo = 200\nfit_hi = 2_000\nepsilon_player = true\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.population.len(), 3000);
        assert_eq!(spec.horizon, 10_000);
        assert_eq!(spec.ensemble, 256);
        assert_eq!(spec.seed, 17);
        assert_eq!(spec.snapshot_stride, 50);
        assert_eq!(spec.fit_window(), (200, 2000));
        assert_eq!(spec.run_seeds().len(), 256);
        assert_eq!(spec.resolved()["fit_hi"], "2000");
    }

    #[test]
    fn explicit_strategies() {
        let spec = parse_spec("kind = wealth-dynamics\nmap = identity\nstrategies = 0.25, 0.75").unwrap();
        assert_eq!(spec.population.strategies(), &[0.25, 0.75]);
        assert_eq!(spec.population.wealths(), &[0.5, 0.5]);
    }

    #[test]
    fn table1_needs_no_map() {
        let spec = parse_spec("kind = table1\nhorizon = 10000").unwrap();
        assert_eq!(spec.fit_window(), (100, 1000));
    }
}
