//! Run manifests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nukes_core::metrics::MetricReport;

use crate::config::TrainConfig;
use crate::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    /// Git-style blob hash (SHA-256) of the canonical config JSON.
    pub input_hash: String,
    pub loss_csv: String,
    pub checkpoint: String,
    pub params_train: usize,
    pub params_infer: usize,
    pub init_report: MetricReport,
    pub final_report: MetricReport,
}

/// `sha256("blob <len>\0" + content)` in hex.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &TrainConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    blob_hash(canonical.as_bytes())
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }
}
