//! CSV schemas, writers and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// A versioned CSV layout. Bump `version` whenever `columns` change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
}

impl Schema {
    pub fn tag(&self) -> String {
        format!("{}/v{}", self.name, self.version)
    }
}

pub const BIAS: Schema = Schema {
    name: "bias",
    version: 1,
    columns: &["t", "seed", "p", "q"],
};
pub const INEFFICIENCY: Schema = Schema {
    name: "inefficiency",
    version: 1,
    columns: &["t", "mean_r", "var_r", "n_runs"],
};
pub const FITS: Schema = Schema {
    name: "fits",
    version: 1,
    columns: &["map", "alpha", "gamma_hat", "stderr", "r2", "gamma_predicted"],
};
pub const WEALTH: Schema = Schema {
    name: "wealth",
    version: 1,
    columns: &["t", "seed", "player", "strategy", "wealth"],
};
pub const DOMINANCE: Schema = Schema {
    name: "dominance",
    version: 1,
    columns: &["seed", "heads", "dominant", "strategy", "wealth"],
};
pub const SUBJECTIVE: Schema = Schema {
    name: "subjective",
    version: 1,
    columns: &["m", "probability"],
};
pub const RATIONAL_CURVE: Schema = Schema {
    name: "rational-curve",
    version: 1,
    columns: &["wealth", "s", "log_return"],
};
pub const RATIONAL_OPTIMA: Schema = Schema {
    name: "rational-optima",
    version: 1,
    columns: &["wealth", "s_star", "log_return", "center_stable"],
};

pub const ALL_SCHEMAS: [Schema; 8] = [
    BIAS,
    INEFFICIENCY,
    FITS,
    WEALTH,
    DOMINANCE,
    SUBJECTIVE,
    RATIONAL_CURVE,
    RATIONAL_OPTIMA,
];

/// Shortest round-trip text for a float; scientific notation outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Collects the files an experiment writes, in order.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    schemas: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            schemas: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv<I>(&mut self, file: &str, schema: Schema, rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(file);
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(schema.columns)?;
        for row in rows {
            debug_assert_eq!(row.len(), schema.columns.len());
            writer.write_record(&row)?;
        }
        writer.flush().map_err(|e| CliError::io(&path, e))?;
        self.schemas.insert(file.to_string(), schema.tag());
        self.written.push(path);
        Ok(())
    }

    pub fn text(&mut self, file: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(file);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `manifest.json` last, listing everything written before it.
    pub fn manifest(&mut self, mut manifest: RunManifest) -> Result<PathBuf, CliError> {
        manifest.schemas = self.schemas.clone();
        manifest.outputs = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let path = self.root.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStatus {
    /// Map label, for experiments that sweep maps.
    pub map: String,
    pub seed: u64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunStatus {
    pub fn ok(map: &str, seed: u64) -> Self {
        Self {
            map: map.to_string(),
            seed,
            status: "ok",
            aborted_at: None,
            error: None,
        }
    }

    pub fn aborted(map: &str, seed: u64, step: usize, error: String) -> Self {
        Self {
            map: map.to_string(),
            seed,
            status: "aborted",
            aborted_at: Some(step),
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec: BTreeMap<&'static str, String>,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub schemas: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub runs: Vec<RunStatus>,
    /// Wall-clock fields; the only ones that differ between identical runs.
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}
