//! Instruction corpora on disk.
//!
//! A corpus is a directory tree of `.txt` files, one instruction each, read
//! in lexicographic path order. An instruction's id is its relative path
//! without extension, with separators replaced by `.`. When several devices
//! are in play, the first directory component names the device an
//! instruction runs on.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::device::{DeviceDef, DeviceError};

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub id: String,
    pub path: PathBuf,
    pub text: String,
    /// First path component below the corpus root, if nested.
    pub device_hint: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("{path} is not valid UTF-8")]
    NotUtf8 { path: String },
    #[error("no device for instruction `{id}` (hint {hint:?}); pass a single --device or name the corpus subdirectory after a device id")]
    NoDevice { id: String, hint: Option<String> },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

pub fn load_corpus(root: &Path) -> Result<Vec<Instruction>, CorpusError> {
    let unreadable = |message: String| CorpusError::Unreadable {
        path: root.display().to_string(),
        message,
    };
    if !root.is_dir() {
        return Err(unreadable("not a directory".into()));
    }
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| unreadable(e.to_string()))?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !entry.file_type().is_file() || hidden || path.extension().is_none_or(|e| e != "txt") {
            continue;
        }
        let bytes = std::fs::read(path).map_err(|e| unreadable(e.to_string()))?;
        let text = String::from_utf8(bytes).map_err(|_| CorpusError::NotUtf8 {
            path: path.display().to_string(),
        })?;
        let rel = path.strip_prefix(root).expect("walk stays under root").with_extension("");
        let parts: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let device_hint = (parts.len() > 1).then(|| parts[0].clone());
        out.push(Instruction {
            id: parts.join("."),
            path: path.to_path_buf(),
            text: text.trim().to_string(),
            device_hint,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub fn load_devices<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<Arc<DeviceDef>>, CorpusError> {
    paths
        .iter()
        .map(|p| DeviceDef::load(p).map(Arc::new).map_err(CorpusError::from))
        .collect()
}

/// Picks the device an instruction runs on.
pub fn device_for(
    instruction: &Instruction,
    devices: &[Arc<DeviceDef>],
) -> Result<Arc<DeviceDef>, CorpusError> {
    if let [only] = devices {
        return Ok(only.clone());
    }
    instruction
        .device_hint
        .as_ref()
        .and_then(|hint| devices.iter().find(|d| &d.id == hint))
        .cloned()
        .ok_or_else(|| CorpusError::NoDevice {
            id: instruction.id.clone(),
            hint: instruction.device_hint.clone(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::fixtures::small_device;

    #[test]
    fn ordered_ids_and_hints() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("b_dev")).unwrap();
        std::fs::write(dir.path().join("z.txt"), "Tap Z.\n").unwrap();
        std::fs::write(dir.path().join("b_dev/a.txt"), "Tap A.").unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        std::fs::write(dir.path().join(".hidden.txt"), "ignored").unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        let ids: Vec<_> = corpus.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["b_dev.a", "z"]);
        assert_eq!(corpus[0].device_hint.as_deref(), Some("b_dev"));
        assert_eq!(corpus[1].text, "Tap Z.");
    }

    #[test]
    fn missing_dir() {
        assert!(matches!(
            load_corpus(Path::new("/definitely/not/here")),
            Err(CorpusError::Unreadable { .. })
        ));
    }

    #[test]
    fn device_assignment() {
        let mut other = small_device();
        other.id = "other".into();
        let devices = vec![Arc::new(small_device()), Arc::new(other)];
        let ins = |hint: Option<&str>| Instruction {
            id: "x".into(),
            path: PathBuf::new(),
            text: String::new(),
            device_hint: hint.map(str::to_string),
        };
        assert_eq!(device_for(&ins(Some("other")), &devices).unwrap().id, "other");
        assert!(device_for(&ins(None), &devices).is_err());
        assert_eq!(device_for(&ins(None), &devices[..1]).unwrap().id, "test");
    }
}
