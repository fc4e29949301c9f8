//! Dataset manifests: a CSV of image paths and two-class labels.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class label. Class 0 is non-consolidation, class 1 is consolidation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NonConsolidation,
    Consolidation,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::NonConsolidation => 0,
            Label::Consolidation => 1,
        }
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        match idx {
            0 => Some(Label::NonConsolidation),
            1 => Some(Label::Consolidation),
            _ => None,
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.trim() {
            "0" | "non_consolidation" => Some(Label::NonConsolidation),
            "1" | "consolidation" => Some(Label::Consolidation),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::NonConsolidation => write!(f, "non_consolidation"),
            Label::Consolidation => write!(f, "consolidation"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
}

/// Validated list of dataset entries. Paths are unique and both classes are
/// present. Relative paths are resolved against the manifest's directory.
#[derive(Clone, Debug)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.clone()) {
                return Err(Error::Manifest(format!(
                    "duplicate path {}",
                    e.path.display()
                )));
            }
        }
        let counts = class_counts(&entries);
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::Manifest(format!(
                "both classes must be present (got {} non-consolidation, {} consolidation)",
                counts[0], counts[1]
            )));
        }
        Ok(DatasetManifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        class_counts(&self.entries)
    }
}

fn class_counts(entries: &[ManifestEntry]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for e in entries {
        counts[e.label.index()] += 1;
    }
    counts
}

/// Reads a manifest CSV with header `path,label`; labels are
/// `{consolidation, non_consolidation}` or `{1, 0}`.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "path,label" => {}
        _ => {
            return Err(Error::Manifest(format!(
                "{}: first line must be the header 'path,label'",
                path.display()
            )))
        }
    }
    let mut entries = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        // split on the last comma so paths containing commas survive
        let (raw_path, raw_label) = line.rsplit_once(',').ok_or_else(|| {
            Error::Manifest(format!("{}:{}: expected 'path,label'", path.display(), lineno + 1))
        })?;
        let label = Label::parse(raw_label).ok_or_else(|| {
            Error::Manifest(format!(
                "{}:{}: unknown label token {:?}",
                path.display(),
                lineno + 1,
                raw_label.trim()
            ))
        })?;
        let entry_path = PathBuf::from(raw_path.trim());
        let resolved = if entry_path.is_absolute() {
            entry_path
        } else {
            base.join(entry_path)
        };
        entries.push(ManifestEntry {
            path: resolved,
            label,
        });
    }
    DatasetManifest::new(entries)
}

/// Writes a manifest CSV. Paths are written as given.
pub fn save_manifest<P: AsRef<Path>>(
    path: P,
    rows: &[(String, Label)],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("path,label\n");
    for (p, label) in rows {
        out.push_str(&format!("{p},{label}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
