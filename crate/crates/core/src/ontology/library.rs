//! Reusable transition library: states, transitions and a predicate
//! vocabulary loaded from `.kmf` files and pinned by a checksum manifest.
//!
//! ```text
//! vocabulary its {
//!   at/2.
//!   route_vertex is_poi/1.
//!   route_edge next/2.
//! }
//! ```
//!
//! Manifest lines are `<kind> <name> <sha256> <provenance>`, where the hash
//! covers the entry's canonical text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};
use std::path::Path;

use super::taxonomy::{validate_against_taxonomy, Taxonomy, TaxonomyReport};
use crate::model::Model;
use crate::pddl::content_hash;
use crate::print::{print_state, print_transition};
use crate::syntax::{parse_model, Cursor, ParseError, Tok};
use crate::term::{is_literal_name, Predicate, State, TransitionSpec};

pub type Functor = (String, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VocabularyRole {
    Plain,
    RouteVertex,
    RouteEdge,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub name: Option<String>,
    pub functors: BTreeMap<Functor, VocabularyRole>,
}

impl Vocabulary {
    pub fn parse(text: &str) -> Result<Option<Self>, ParseError> {
        let mut cur = Cursor::new(text)?;
        let mut found = None;
        while !cur.at_eof() {
            let (keyword, pos) = cur.name()?;
            if keyword != "vocabulary" {
                cur.skip_item()?;
                continue;
            }
            if found.is_some() {
                return Err(ParseError::new(pos, "duplicate `vocabulary` block"));
            }
            found = Some(vocabulary_block(&mut cur)?);
        }
        Ok(found)
    }

    pub fn contains(&self, functor: &str, arity: usize) -> bool {
        self.functors.contains_key(&(functor.to_string(), arity))
    }

    pub fn role(&self, functor: &str, arity: usize) -> Option<VocabularyRole> {
        self.functors.get(&(functor.to_string(), arity)).copied()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("vocabulary");
        if let Some(n) = &self.name {
            let _ = write!(out, " {n}");
        }
        out.push_str(" {\n");
        for ((f, n), role) in &self.functors {
            let prefix = match role {
                VocabularyRole::Plain => "",
                VocabularyRole::RouteVertex => "route_vertex ",
                VocabularyRole::RouteEdge => "route_edge ",
            };
            let _ = writeln!(out, "  {prefix}{f}/{n}.");
        }
        out.push_str("}\n");
        out
    }
}

fn vocabulary_block(cur: &mut Cursor) -> Result<Vocabulary, ParseError> {
    let name = match cur.peek() {
        Tok::Name(_) => Some(cur.block_name()?.0),
        _ => None,
    };
    let mut functors = BTreeMap::new();
    cur.expect(Tok::LBrace)?;
    while !cur.eat(&Tok::RBrace) {
        let role = if cur.is_keyword("route_vertex") {
            cur.bump();
            VocabularyRole::RouteVertex
        } else if cur.is_keyword("route_edge") {
            cur.bump();
            VocabularyRole::RouteEdge
        } else {
            VocabularyRole::Plain
        };
        let (functor, pos) = cur.name()?;
        if !is_literal_name(&functor) {
            return Err(ParseError::new(pos, format!("invalid functor `{functor}`")));
        }
        cur.expect(Tok::Slash)?;
        let (arity, _) = cur.integer()?;
        cur.expect(Tok::Dot)?;
        if functors.insert((functor.clone(), arity), role).is_some() {
            return Err(ParseError::new(pos, format!("`{functor}/{arity}` is declared twice")));
        }
    }
    Ok(Vocabulary { name, functors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntryKind {
    State,
    Transition,
    Vocabulary,
}

impl EntryKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EntryKind::State => "state",
            EntryKind::Transition => "transition",
            EntryKind::Vocabulary => "vocabulary",
        }
    }

    fn from_keyword(word: &str) -> Option<Self> {
        [EntryKind::State, EntryKind::Transition, EntryKind::Vocabulary].into_iter().find(|k| k.keyword() == word)
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestLine {
    pub kind: EntryKind,
    pub name: String,
    pub checksum: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibraryError {
    #[error("{file}: {error}")]
    Parse { file: String, error: ParseError },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{kind} `{name}` is defined twice")]
    Duplicate { kind: EntryKind, name: String },
    #[error("{kind} `{name}` is not listed in the manifest")]
    Unlisted { kind: EntryKind, name: String },
    #[error("manifest lists {kind} `{name}` but no file defines it")]
    Missing { kind: EntryKind, name: String },
    #[error("checksum mismatch for {kind} `{name}`: manifest {expected}, content {actual}")]
    Checksum { kind: EntryKind, name: String, expected: String, actual: String },
    #[error("{kind} `{name}` uses `{functor}`, which the vocabulary does not declare")]
    Undeclared { kind: EntryKind, name: String, functor: String },
    #[error("library has no vocabulary block")]
    NoVocabulary,
}

/// A loaded library. Every functor used by an entry is declared in the
/// vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionLibrary {
    pub states: BTreeMap<String, State>,
    pub transitions: BTreeMap<String, TransitionSpec>,
    pub vocabulary: Vocabulary,
    provenance: BTreeMap<(EntryKind, String), String>,
}

fn state_text(name: &str, s: &State) -> String {
    let mut out = String::new();
    print_state(&mut out, name, s);
    out
}

fn transition_text(t: &TransitionSpec) -> String {
    let mut out = String::new();
    print_transition(&mut out, t);
    out
}

fn functor_label(p: &Predicate) -> String {
    format!("{}/{}", p.functor, p.arity())
}

impl TransitionLibrary {
    /// Builds a library from document texts `(file label, text)` without a
    /// manifest; every entry gets `default_provenance`.
    pub fn from_documents(docs: &[(String, String)], default_provenance: &str) -> Result<Self, LibraryError> {
        let mut states = BTreeMap::new();
        let mut transitions = BTreeMap::new();
        let mut vocabulary: Option<Vocabulary> = None;
        for (file, text) in docs {
            let parse_err = |error| LibraryError::Parse { file: file.clone(), error };
            let m = parse_model(text).map_err(parse_err)?;
            for (name, s) in m.states {
                if states.insert(name.clone(), s).is_some() {
                    return Err(LibraryError::Duplicate { kind: EntryKind::State, name });
                }
            }
            for (name, t) in m.transitions {
                if transitions.insert(name.clone(), t).is_some() {
                    return Err(LibraryError::Duplicate { kind: EntryKind::Transition, name });
                }
            }
            if let Some(v) = Vocabulary::parse(text).map_err(parse_err)? {
                if vocabulary.is_some() {
                    let name = v.name.unwrap_or_else(|| "vocabulary".into());
                    return Err(LibraryError::Duplicate { kind: EntryKind::Vocabulary, name });
                }
                vocabulary = Some(v);
            }
        }
        let vocabulary = vocabulary.ok_or(LibraryError::NoVocabulary)?;
        let mut lib = TransitionLibrary { states, transitions, vocabulary, provenance: BTreeMap::new() };
        lib.check_closure()?;
        let keys: Vec<_> = lib.entry_keys().collect();
        lib.provenance = keys.into_iter().map(|k| (k, default_provenance.to_string())).collect();
        Ok(lib)
    }

    /// Loads every `*.kmf` file of `dir` and verifies them against
    /// `dir/manifest.txt`.
    pub fn load(dir: &Path) -> Result<Self, LibraryError> {
        let io = |path: &Path, e: std::io::Error| LibraryError::Io { path: path.display().to_string(), message: e.to_string() };
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "kmf"))
            .collect();
        files.sort();
        let mut docs = Vec::new();
        for f in &files {
            let text = std::fs::read_to_string(f).map_err(|e| io(f, e))?;
            let label = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            docs.push((label, text));
        }
        let manifest_path = dir.join("manifest.txt");
        let manifest = std::fs::read_to_string(&manifest_path).map_err(|e| io(&manifest_path, e))?;
        Self::from_documents_with_manifest(&docs, &manifest)
    }

    pub fn from_documents_with_manifest(docs: &[(String, String)], manifest: &str) -> Result<Self, LibraryError> {
        let mut lib = Self::from_documents(docs, "")?;
        let lines = parse_manifest(manifest)?;
        let mut listed = BTreeMap::new();
        for l in lines {
            let key = (l.kind, l.name.clone());
            let actual = lib.entry_text(l.kind, &l.name).map(|t| content_hash(t.as_bytes()));
            let Some(actual) = actual else {
                return Err(LibraryError::Missing { kind: l.kind, name: l.name });
            };
            if actual != l.checksum {
                return Err(LibraryError::Checksum { kind: l.kind, name: l.name, expected: l.checksum, actual });
            }
            if listed.insert(key, l.provenance).is_some() {
                return Err(LibraryError::Duplicate { kind: l.kind, name: l.name });
            }
        }
        for (kind, name) in lib.entry_keys() {
            if !listed.contains_key(&(kind, name.clone())) {
                return Err(LibraryError::Unlisted { kind, name });
            }
        }
        lib.provenance = listed;
        Ok(lib)
    }

    fn entry_keys(&self) -> impl Iterator<Item = (EntryKind, String)> + '_ {
        let vocab_name = self.vocabulary_name().to_string();
        self.states
            .keys()
            .map(|n| (EntryKind::State, n.clone()))
            .chain(self.transitions.keys().map(|n| (EntryKind::Transition, n.clone())))
            .chain(std::iter::once((EntryKind::Vocabulary, vocab_name)))
    }

    fn vocabulary_name(&self) -> &str {
        self.vocabulary.name.as_deref().unwrap_or("vocabulary")
    }

    /// Canonical text of one entry, the input of its checksum.
    pub fn entry_text(&self, kind: EntryKind, name: &str) -> Option<String> {
        match kind {
            EntryKind::State => self.states.get(name).map(|s| state_text(name, s)),
            EntryKind::Transition => self.transitions.get(name).map(transition_text),
            EntryKind::Vocabulary => (name == self.vocabulary_name()).then(|| self.vocabulary.to_text()),
        }
    }

    pub fn provenance(&self, kind: EntryKind, name: &str) -> Option<&str> {
        self.provenance.get(&(kind, name.to_string())).map(String::as_str)
    }

    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        for (kind, name) in self.entry_keys() {
            let text = self.entry_text(kind, &name).expect("entry key is present");
            let provenance = self.provenance(kind, &name).filter(|p| !p.is_empty()).unwrap_or("-");
            let _ = writeln!(out, "{kind} {name} {} {provenance}", content_hash(text.as_bytes()));
        }
        out
    }

    fn check_closure(&self) -> Result<(), LibraryError> {
        let undeclared = |kind, name: &str, p: &Predicate| {
            (!self.vocabulary.contains(&p.functor, p.arity())).then(|| LibraryError::Undeclared {
                kind,
                name: name.to_string(),
                functor: functor_label(p),
            })
        };
        for (name, s) in &self.states {
            if let Some(e) = s.iter().find_map(|p| undeclared(EntryKind::State, name, p)) {
                return Err(e);
            }
        }
        for (name, t) in &self.transitions {
            let preds = t.precondition.iter().chain(t.action.iter().map(|a| &a.predicate));
            if let Some(e) = preds.into_iter().find_map(|p| undeclared(EntryKind::Transition, name, p)) {
                return Err(e);
            }
        }
        Ok(())
    }

    /// The library's states and transitions as one model.
    pub fn as_model(&self) -> Model {
        Model {
            name: Some("library".into()),
            states: self.states.clone(),
            transitions: self.transitions.clone(),
            ..Model::default()
        }
    }

    pub fn validate(&self, t: &Taxonomy) -> TaxonomyReport {
        validate_against_taxonomy(&self.as_model(), t)
    }

    /// Whether a ground fact appears in some library state.
    pub fn has_fact(&self, p: &Predicate) -> bool {
        self.states.values().any(|s| s.contains(p))
    }

    pub fn has_transition_body(&self, t: &TransitionSpec) -> bool {
        self.transitions.values().any(|l| l.same_body(t))
    }

    pub fn has_state(&self, s: &State) -> bool {
        self.states.values().any(|l| l == s)
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestLine>, LibraryError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| LibraryError::Manifest { line: i + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [kind, name, checksum, provenance] = fields.as_slice() else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let kind = EntryKind::from_keyword(kind).ok_or_else(|| err(format!("unknown entry kind `{kind}`")))?;
        if checksum.len() != 64 || !checksum.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(err(format!("`{checksum}` is not a lowercase SHA-256 hex digest")));
        }
        out.push(ManifestLine {
            kind,
            name: name.to_string(),
            checksum: checksum.to_string(),
            provenance: provenance.to_string(),
        });
    }
    Ok(out)
}

/// Functors used anywhere in a model's states and transitions.
pub fn model_functors(m: &Model) -> BTreeSet<Functor> {
    let mut out = BTreeSet::new();
    let mut add = |p: &Predicate| {
        out.insert((p.functor.to_string(), p.arity()));
    };
    for s in m.states.values() {
        s.iter().for_each(&mut add);
    }
    for t in m.transitions.values() {
        t.precondition.iter().for_each(&mut add);
        t.action.iter().for_each(|a| add(&a.predicate));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "vocabulary v {
  at/2.
  route_vertex is_poi/1.
  route_edge next/2.
}
state map { is_poi(a). is_poi(b). next(a, b). }
transition move {
  pre { is_poi(X). is_poi(Y). at(A, X). next(X, Y). }
  action { delete(at(A, X)). add(at(A, Y)). }
}
";

    fn docs() -> Vec<(String, String)> {
        vec![("lib.kmf".to_string(), DOC.to_string())]
    }

    #[test]
    fn manifest_round_trip() {
        let lib = TransitionLibrary::from_documents(&docs(), "test").unwrap();
        let manifest = lib.manifest_text();
        assert_eq!(manifest.lines().count(), 3);
        let again = TransitionLibrary::from_documents_with_manifest(&docs(), &manifest).unwrap();
        assert_eq!(again, lib);
        assert_eq!(again.provenance(EntryKind::Transition, "move"), Some("test"));
    }

    #[test]
    fn tampered_entry_fails_checksum() {
        let manifest = TransitionLibrary::from_documents(&docs(), "t").unwrap().manifest_text();
        let tampered = vec![("lib.kmf".to_string(), DOC.replace("next(a, b)", "next(b, a)"))];
        let err = TransitionLibrary::from_documents_with_manifest(&tampered, &manifest).unwrap_err();
        assert!(matches!(err, LibraryError::Checksum { kind: EntryKind::State, .. }), "{err}");
    }

    #[test]
    fn unlisted_and_missing_entries() {
        let manifest = TransitionLibrary::from_documents(&docs(), "t").unwrap().manifest_text();
        let partial: String = manifest.lines().filter(|l| !l.starts_with("state")).map(|l| format!("{l}\n")).collect();
        let err = TransitionLibrary::from_documents_with_manifest(&docs(), &partial).unwrap_err();
        assert!(matches!(err, LibraryError::Unlisted { .. }));
        let extra = format!("{manifest}state ghost {} x\n", "0".repeat(64));
        let err = TransitionLibrary::from_documents_with_manifest(&docs(), &extra).unwrap_err();
        assert!(matches!(err, LibraryError::Missing { .. }));
    }

    #[test]
    fn closure_requires_declared_functors() {
        let bad = vec![("x.kmf".to_string(), format!("{DOC}state extra {{ bus(b). }}\n"))];
        let err = TransitionLibrary::from_documents(&bad, "t").unwrap_err();
        assert!(matches!(err, LibraryError::Undeclared { .. }), "{err}");
    }

    #[test]
    fn vocabulary_round_trip() {
        let v = Vocabulary::parse(DOC).unwrap().unwrap();
        assert_eq!(v.role("next", 2), Some(VocabularyRole::RouteEdge));
        assert_eq!(Vocabulary::parse(&v.to_text()).unwrap().unwrap(), v);
        assert!(Vocabulary::parse("state s { }").unwrap().is_none());
    }

    #[test]
    fn manifest_syntax_errors() {
        assert!(parse_manifest("state a b").is_err());
        assert!(parse_manifest("widget a 00 p").is_err());
        assert!(parse_manifest(&format!("state a {} p", "G".repeat(64))).is_err());
        assert_eq!(parse_manifest("# comment\n\n").unwrap(), vec![]);
    }
}
