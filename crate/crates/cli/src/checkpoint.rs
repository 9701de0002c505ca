//! Checkpoints: a JSON manifest plus one little-endian f32 blob per
//! parameter group.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nukes_core::gradcore::{ParamSet, Tensor};
use nukes_core::nukesformer::{ModelConfig, NukesFormer, Role, GROUPS};

use crate::{HarnessError, Result};

pub const CHECKPOINT_FORMAT: &str = "nukes-ckpt-1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub name: String,
    pub file: String,
    /// Tensors in blob order.
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub model: ModelConfig,
    pub groups: Vec<GroupEntry>,
}

/// Parameters read back from a checkpoint and the files that were opened.
#[derive(Clone, Debug)]
pub struct LoadedCheckpoint {
    pub model: ModelConfig,
    pub params: ParamSet,
    pub groups: Vec<String>,
    pub files_read: Vec<String>,
}

fn group_of(name: &str) -> Option<&'static str> {
    GROUPS.iter().copied().find(|g| name.strip_prefix(g).is_some_and(|r| r.starts_with('.')))
}

/// Writes every parameter of `params`, grouped by name prefix. Values are
/// stored as f32.
pub fn save_checkpoint(dir: &Path, model: &ModelConfig, params: &ParamSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut groups = Vec::new();
    for g in GROUPS {
        let mut entries = Vec::new();
        let mut blob = Vec::new();
        for (name, t) in params.iter() {
            if group_of(name) != Some(g) {
                continue;
            }
            entries.push(TensorEntry { name: name.clone(), shape: t.shape().to_vec() });
            for v in t.data() {
                blob.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        if entries.is_empty() {
            continue;
        }
        let file = format!("{g}.bin");
        let path = dir.join(&file);
        fs::write(&path, &blob).map_err(|e| HarnessError::io(&path, e))?;
        groups.push(GroupEntry { name: g.to_string(), file, tensors: entries });
    }
    if let Some((name, _)) = params.iter().find(|(n, _)| group_of(n).is_none()) {
        return Err(HarnessError::CorruptCheckpoint(format!("parameter `{name}` belongs to no group")));
    }
    let manifest = CheckpointManifest { format: CHECKPOINT_FORMAT.into(), model: model.clone(), groups };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let m: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| HarnessError::CorruptCheckpoint(format!("manifest: {e}")))?;
    if m.format != CHECKPOINT_FORMAT {
        return Err(HarnessError::CorruptCheckpoint(format!("unknown format `{}`", m.format)));
    }
    Ok(m)
}

/// Loads only the listed groups; other blobs are never opened. The tensors
/// are checked against the shapes the stored model config implies.
pub fn load_checkpoint(dir: &Path, groups: &[&str]) -> Result<LoadedCheckpoint> {
    let manifest = read_manifest(dir)?;
    let model = NukesFormer::new(manifest.model.clone())
        .map_err(|e| HarnessError::CorruptCheckpoint(format!("model config: {e}")))?;
    let mut params = ParamSet::new();
    let mut files_read = Vec::new();
    for &g in groups {
        let entry = manifest
            .groups
            .iter()
            .find(|e| e.name == g)
            .ok_or_else(|| HarnessError::CorruptCheckpoint(format!("group `{g}` missing")))?;
        let mut expected: Vec<(String, Vec<usize>)> =
            model.group_specs(g).into_iter().map(|s| (s.name, s.shape)).collect();
        expected.sort();
        let mut listed: Vec<(String, Vec<usize>)> =
            entry.tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect();
        listed.sort();
        if expected != listed {
            return Err(HarnessError::CorruptCheckpoint(format!("group `{g}` does not match its model config")));
        }
        if entry.file.contains('/') || entry.file.contains('\\') || entry.file.starts_with('.') {
            return Err(HarnessError::CorruptCheckpoint(format!("bad blob name `{}`", entry.file)));
        }
        let path = dir.join(&entry.file);
        let blob = fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        let total: usize = entry.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if blob.len() != 4 * total {
            return Err(HarnessError::CorruptCheckpoint(format!(
                "{}: {} bytes, expected {}",
                entry.file,
                blob.len(),
                4 * total
            )));
        }
        let mut values = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        for t in &entry.tensors {
            let n = t.shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(HarnessError::CorruptCheckpoint(format!("non-finite value in `{}`", t.name)));
            }
            params.insert(t.name.clone(), Tensor::new(t.shape.clone(), data)?);
        }
        files_read.push(entry.file.clone());
    }
    Ok(LoadedCheckpoint {
        model: manifest.model,
        params,
        groups: groups.iter().map(|g| g.to_string()).collect(),
        files_read,
    })
}

/// The groups inference needs.
pub fn load_for_inference(dir: &Path) -> Result<LoadedCheckpoint> {
    load_checkpoint(dir, Role::Infer.groups())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (ModelConfig, ParamSet) {
        let cfg = ModelConfig { bands: 5, ..ModelConfig::default() };
        let m = NukesFormer::new(cfg.clone()).unwrap();
        (cfg, m.init_params(Role::Train, 4).unwrap())
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, ps) = small();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        save_checkpoint(&a, &cfg, &ps).unwrap();
        let loaded = load_checkpoint(&a, &GROUPS).unwrap();
        save_checkpoint(&b, &loaded.model, &loaded.params).unwrap();
        for g in GROUPS {
            let f = format!("{g}.bin");
            assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
        }
        assert_eq!(fs::read(a.join(MANIFEST_FILE)).unwrap(), fs::read(b.join(MANIFEST_FILE)).unwrap());
        let mut rounded = ps.clone();
        rounded.round_to_f32();
        assert_eq!(loaded.params, rounded);
    }

    #[test]
    fn inference_reads_only_generator_blob() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, ps) = small();
        save_checkpoint(dir.path(), &cfg, &ps).unwrap();
        fs::remove_file(dir.path().join("d_h.bin")).unwrap();
        let l = load_for_inference(dir.path()).unwrap();
        assert_eq!(l.files_read, vec!["g_rh.bin".to_string()]);
        assert!(l.params.names().all(|n| n.starts_with("g_rh.")));
        assert_eq!(l.params.count(), ps.subset("g_rh.").count());
        assert!(load_checkpoint(dir.path(), &["d_h"]).is_err());
    }

    #[test]
    fn corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, ps) = small();
        save_checkpoint(dir.path(), &cfg, &ps).unwrap();
        let blob = dir.path().join("g_rh.bin");
        let mut bytes = fs::read(&blob).unwrap();
        bytes.pop();
        fs::write(&blob, &bytes).unwrap();
        assert!(matches!(load_for_inference(dir.path()), Err(HarnessError::CorruptCheckpoint(_))));
        fs::write(dir.path().join(MANIFEST_FILE), "{").unwrap();
        assert!(matches!(load_for_inference(dir.path()), Err(HarnessError::CorruptCheckpoint(_))));
    }
}
