//! Directory-backed knowledge base: per-model documents plus an immutable
//! content-addressed artifact area.
//!
//! ```text
//! <root>/models/<name>/{states,transitions,rules}.kmf
//! <root>/artifacts/<sha256-hex>
//! <root>/index.json
//! ```
//!
//! Mutations of one model are serialized by a per-model lock; artifact files
//! are written once via rename and never replaced.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use kbplan_core::pddl::{content_hash, parse_rules, TransformationRules};
use kbplan_core::syntax::parse_model;
use kbplan_core::{Model, ParseError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocumentKind {
    States,
    Transitions,
    Rules,
}

impl DocumentKind {
    pub const ALL: [DocumentKind; 3] = [DocumentKind::States, DocumentKind::Transitions, DocumentKind::Rules];

    pub fn as_str(self) -> &'static str {
        match self {
            DocumentKind::States => "states",
            DocumentKind::Transitions => "transitions",
            DocumentKind::Rules => "rules",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid {kind} document at {}:{}: {}", .error.pos.line, .error.pos.col, .error.message)]
    Invalid { kind: &'static str, error: ParseError },
    #[error("{0}")]
    Rejected(String),
    #[error("invalid model name `{0}`")]
    BadName(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` has no {kind} document")]
    Incomplete { model: String, kind: &'static str },
    #[error("storage error: {0}")]
    Io(#[from] io::Error),
}

/// Result of storing a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Revision {
    pub model: String,
    pub kind: DocumentKind,
    /// SHA-256 of the document bytes.
    pub revision: String,
    /// False when the identical document was already stored.
    pub changed: bool,
    /// True when the model had no document of this kind before.
    pub created: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    models: BTreeMap<String, BTreeMap<DocumentKind, String>>,
}

pub struct Store {
    root: PathBuf,
    index: Mutex<Index>,
    model_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn valid_model_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn valid_hash(hash: &str) -> bool {
    hash.len() == 64 && hash.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp-{}-{n}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Checks that a document has the expected shape: states documents carry
/// only states and `model`/`initial`/`goal` headers, transitions documents
/// only transitions, rules documents a rules block.
pub fn check_document(kind: DocumentKind, text: &str) -> Result<(), StoreError> {
    match kind {
        DocumentKind::Rules => {
            parse_rules(text).map_err(|error| StoreError::Invalid { kind: "rules", error })?;
        }
        DocumentKind::States => {
            let m = parse_model(text).map_err(|error| StoreError::Invalid { kind: "states", error })?;
            if !m.transitions.is_empty() {
                return Err(StoreError::Rejected("a states document may not define transitions".into()));
            }
        }
        DocumentKind::Transitions => {
            let m = parse_model(text).map_err(|error| StoreError::Invalid { kind: "transitions", error })?;
            if !m.states.is_empty() || m.initial.is_some() || m.goal.is_some() || m.name.is_some() {
                return Err(StoreError::Rejected("a transitions document may only define transitions".into()));
            }
        }
    }
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("models"))?;
        fs::create_dir_all(root.join("artifacts"))?;
        let index_path = root.join("index.json");
        let index = match fs::read_to_string(&index_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Rejected(format!("corrupt index: {e}")))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Index::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Store { root, index: Mutex::new(index), model_locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn model_lock(&self, name: &str) -> Arc<Mutex<()>> {
        let mut locks = self.model_locks.lock().expect("lock table poisoned");
        locks.entry(name.to_string()).or_default().clone()
    }

    fn document_path(&self, name: &str, kind: DocumentKind) -> PathBuf {
        self.root.join("models").join(name).join(format!("{}.kmf", kind.as_str()))
    }

    pub fn put_document(&self, name: &str, kind: DocumentKind, text: &str) -> Result<Revision, StoreError> {
        if !valid_model_name(name) {
            return Err(StoreError::BadName(name.to_string()));
        }
        check_document(kind, text)?;
        let lock = self.model_lock(name);
        let _guard = lock.lock().expect("model lock poisoned");
        let revision = content_hash(text.as_bytes());
        let previous = self.index.lock().expect("index poisoned").models.get(name).and_then(|d| d.get(&kind).cloned());
        let result = Revision {
            model: name.to_string(),
            kind,
            revision: revision.clone(),
            changed: previous.as_deref() != Some(revision.as_str()),
            created: previous.is_none(),
        };
        if !result.changed {
            return Ok(result);
        }
        // The combined model must still be consistent.
        let mut docs = self.documents(name);
        docs.insert(kind, text.to_string());
        if let Err(e) = assemble(name, &docs) {
            if !matches!(e, StoreError::Incomplete { .. }) {
                return Err(e);
            }
        }
        fs::create_dir_all(self.root.join("models").join(name))?;
        write_atomic(&self.document_path(name, kind), text.as_bytes())?;
        let mut index = self.index.lock().expect("index poisoned");
        index.models.entry(name.to_string()).or_default().insert(kind, revision);
        let json = serde_json::to_string_pretty(&*index).expect("index serializes");
        write_atomic(&self.root.join("index.json"), json.as_bytes())?;
        Ok(result)
    }

    pub fn has_model(&self, name: &str) -> bool {
        self.index.lock().expect("index poisoned").models.contains_key(name)
    }

    pub fn get_document(&self, name: &str, kind: DocumentKind) -> Option<String> {
        self.has_model(name).then(|| fs::read_to_string(self.document_path(name, kind)).ok()).flatten()
    }

    fn documents(&self, name: &str) -> BTreeMap<DocumentKind, String> {
        DocumentKind::ALL.into_iter().filter_map(|k| self.get_document(name, k).map(|t| (k, t))).collect()
    }

    pub fn revisions(&self, name: &str) -> Option<BTreeMap<DocumentKind, String>> {
        self.index.lock().expect("index poisoned").models.get(name).cloned()
    }

    /// States and transitions combined into one model.
    pub fn model(&self, name: &str) -> Result<Model, StoreError> {
        if !self.has_model(name) {
            return Err(StoreError::UnknownModel(name.to_string()));
        }
        assemble(name, &self.documents(name))
    }

    pub fn rules(&self, name: &str) -> Result<TransformationRules, StoreError> {
        if !self.has_model(name) {
            return Err(StoreError::UnknownModel(name.to_string()));
        }
        let text = self
            .get_document(name, DocumentKind::Rules)
            .ok_or_else(|| StoreError::Incomplete { model: name.to_string(), kind: "rules" })?;
        parse_rules(&text).map_err(|error| StoreError::Invalid { kind: "rules", error })
    }

    /// Stores bytes under their hash; an existing artifact is never
    /// rewritten.
    pub fn put_artifact(&self, bytes: &[u8]) -> Result<String, StoreError> {
        let hash = content_hash(bytes);
        let path = self.root.join("artifacts").join(&hash);
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    pub fn get_artifact(&self, hash: &str) -> Option<Vec<u8>> {
        if !valid_hash(hash) {
            return None;
        }
        fs::read(self.root.join("artifacts").join(hash)).ok()
    }
}

/// Parses the states and transitions documents as one model. A missing
/// transitions document is `Incomplete`.
fn assemble(name: &str, docs: &BTreeMap<DocumentKind, String>) -> Result<Model, StoreError> {
    let states = docs
        .get(&DocumentKind::States)
        .ok_or_else(|| StoreError::Incomplete { model: name.to_string(), kind: "states" })?;
    let transitions = docs
        .get(&DocumentKind::Transitions)
        .ok_or_else(|| StoreError::Incomplete { model: name.to_string(), kind: "transitions" })?;
    let combined = format!("{states}\n{transitions}");
    let mut model = parse_model(&combined).map_err(|e| StoreError::Rejected(format!("combined model is invalid: {}", e.message)))?;
    if model.name.is_none() {
        model.name = Some(name.to_string());
    }
    Ok(model)
}
