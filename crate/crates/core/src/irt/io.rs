//! Line-delimited interaction logs and the calibrated-parameters document.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CalibrationConfig, CalibrationResult, InteractionRecord, ItemParams};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one JSON record per line; blank lines are skipped.
pub fn read_interactions(reader: impl BufRead) -> Result<Vec<InteractionRecord>, IoError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| IoError::Record { line: idx + 1, source })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_interactions(mut writer: impl Write, records: &[InteractionRecord]) -> Result<(), IoError> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsMeta {
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

/// `{items: [{item_id, a, d}], meta: {seed, iterations, converged}}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub items: Vec<ItemParams>,
    pub meta: ParamsMeta,
}

impl ParamsDocument {
    pub fn from_calibration(result: &CalibrationResult, config: &CalibrationConfig) -> Self {
        Self {
            items: result.item_params.values().cloned().collect(),
            meta: ParamsMeta {
                seed: config.seed,
                iterations: result.iterations,
                converged: result.converged,
            },
        }
    }

    pub fn by_id(&self) -> BTreeMap<&str, &ItemParams> {
        self.items.iter().map(|p| (p.item_id.as_str(), p)).collect()
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
