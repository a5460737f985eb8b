//! Versioned JSON model document, the payload exchanged between edge nodes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassId, ClassifierEntry, MetaClassifier, ModelSchema, Provenance};
use crate::error::{Error, Result};
use crate::iforest::IsolationForest;

pub const FORMAT_NAME: &str = "isoswarm-model";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub format_version: u64,
    pub schema: ModelSchema,
    pub entries: Vec<EntryRecord>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub class: String,
    pub threshold: f64,
    pub weight: f64,
    pub forest: IsolationForest,
}

impl From<&MetaClassifier> for ModelDocument {
    fn from(meta: &MetaClassifier) -> Self {
        ModelDocument {
            format: FORMAT_NAME.to_owned(),
            format_version: FORMAT_VERSION,
            schema: meta.schema.clone(),
            entries: meta
                .entries
                .iter()
                .map(|e| EntryRecord {
                    class: e.class_id.name.clone(),
                    threshold: e.threshold,
                    weight: e.weight,
                    forest: e.forest.clone(),
                })
                .collect(),
            provenance: meta.provenance.clone(),
        }
    }
}

impl TryFrom<ModelDocument> for MetaClassifier {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.format != FORMAT_NAME {
            return Err(Error::CorruptDocument(format!("unexpected format `{}`", doc.format)));
        }
        for e in &doc.entries {
            e.forest.validate()?;
        }
        let entries = doc
            .entries
            .into_iter()
            .enumerate()
            .map(|(index, e)| ClassifierEntry {
                class_id: ClassId { name: e.class, index },
                forest: e.forest,
                threshold: e.threshold,
                weight: e.weight,
            })
            .collect();
        MetaClassifier::new(entries, doc.schema, doc.provenance)
    }
}

/// Serializes with shortest round-trip reals, so import reproduces every split exactly.
pub fn export_model(meta: &MetaClassifier) -> String {
    serde_json::to_string_pretty(&ModelDocument::from(meta)).expect("model document serializes")
}

pub fn import_model(text: &str) -> Result<MetaClassifier> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CorruptDocument(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptDocument("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let doc: ModelDocument = serde_json::from_value(value).map_err(|e| Error::CorruptDocument(e.to_string()))?;
    MetaClassifier::try_from(doc)
}

pub fn save_model(meta: &MetaClassifier, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = export_model(meta);
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MetaClassifier> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    import_model(&text)
}
