//! Experiment runner for the reality game: spec parsing, experiment
//! dispatch, CSV/SVG/manifest output and the acceptance checks.

pub mod experiment;
pub mod output;
pub mod spec;
pub mod svg;
pub mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] spec::SpecError),
    #[error(transparent)]
    Model(#[from] realitygame_core::Error),
    #[error(transparent)]
    Svg(#[from] svg::SvgError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
