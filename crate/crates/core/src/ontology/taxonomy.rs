//! Concept taxonomy with predicate annotations.
//!
//! ```text
//! taxonomy its {
//!   concept Thing.
//!   concept Agent is_a System.
//!   concept Passenger is_a TransportableEntity, Human.
//!   annotate at(TransportableEntity, POI).
//!   annotate capacity(TransportAgent, _).
//! }
//! ```
//!
//! `_` leaves an argument position unconstrained. A functor may carry several
//! annotations of the same arity; a use is accepted when any of them fits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use crate::model::Model;
use crate::syntax::{Cursor, ParseError, Tok};
use crate::term::{is_variable_name, Predicate, Term};

/// Argument concepts of one annotation; `None` is unconstrained.
pub type Signature = Vec<Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    name: Option<String>,
    /// concept → direct parents, in declaration order.
    parents: BTreeMap<String, Vec<String>>,
    annotations: BTreeMap<(String, usize), Vec<Signature>>,
    root: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaxonomyError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("concept `{0}` is declared twice")]
    Duplicate(String),
    #[error("{context} references undeclared concept `{concept}`")]
    UnknownConcept { concept: String, context: String },
    #[error("is_a cycle through `{0}`")]
    Cycle(String),
    #[error("expected exactly one top concept, found {}", .0.join(", "))]
    Roots(Vec<String>),
}

impl Taxonomy {
    /// Builds and checks a taxonomy: parents and annotation concepts are
    /// declared, `is_a` is acyclic and has a single top concept.
    pub fn new(
        name: Option<String>,
        parents: BTreeMap<String, Vec<String>>,
        annotations: BTreeMap<(String, usize), Vec<Signature>>,
    ) -> Result<Self, TaxonomyError> {
        for (c, ps) in &parents {
            for p in ps {
                if !parents.contains_key(p) {
                    return Err(TaxonomyError::UnknownConcept { concept: p.clone(), context: format!("concept `{c}`") });
                }
            }
        }
        for ((functor, _), sigs) in &annotations {
            for c in sigs.iter().flatten().flatten() {
                if !parents.contains_key(c) {
                    return Err(TaxonomyError::UnknownConcept {
                        concept: c.clone(),
                        context: format!("annotation of `{functor}`"),
                    });
                }
            }
        }
        // Kahn's algorithm: every concept must be removable.
        let mut pending: BTreeMap<&str, usize> = parents.iter().map(|(c, ps)| (c.as_str(), ps.len())).collect();
        let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (c, ps) in &parents {
            for p in ps {
                children.entry(p).or_default().push(c);
            }
        }
        let roots: Vec<String> = pending.iter().filter(|(_, n)| **n == 0).map(|(c, _)| c.to_string()).collect();
        let mut ready: Vec<&str> = roots.iter().map(String::as_str).collect();
        let mut removed = 0;
        while let Some(c) = ready.pop() {
            removed += 1;
            for child in children.get(c).into_iter().flatten() {
                let n = pending.get_mut(child).expect("child is declared");
                *n -= 1;
                if *n == 0 {
                    ready.push(child);
                }
            }
        }
        if removed != parents.len() {
            let stuck = pending.iter().find(|(_, n)| **n > 0).map(|(c, _)| c.to_string()).unwrap_or_default();
            return Err(TaxonomyError::Cycle(stuck));
        }
        let [root] = roots.as_slice() else {
            return Err(TaxonomyError::Roots(roots));
        };
        Ok(Taxonomy { name, root: root.clone(), parents, annotations })
    }

    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut cur = Cursor::new(text)?;
        let mut found = None;
        while !cur.at_eof() {
            let (keyword, pos) = cur.name()?;
            if keyword != "taxonomy" {
                cur.skip_item()?;
                continue;
            }
            if found.is_some() {
                return Err(ParseError::new(pos, "duplicate `taxonomy` block").into());
            }
            found = Some(taxonomy_block(&mut cur)?);
        }
        let (name, parents, annotations) =
            found.ok_or_else(|| ParseError::new(cur.pos(), "no `taxonomy` block found"))?;
        Taxonomy::new(name, parents, annotations)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.parents.contains_key(concept)
    }

    pub fn parents(&self, concept: &str) -> &[String] {
        self.parents.get(concept).map_or(&[], Vec::as_slice)
    }

    pub fn annotations(&self, functor: &str, arity: usize) -> &[Signature] {
        self.annotations.get(&(functor.to_string(), arity)).map_or(&[], Vec::as_slice)
    }

    /// Reflexive-transitive `is_a`.
    pub fn is_a(&self, sub: &str, sup: &str) -> bool {
        let mut stack = vec![sub];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == sup {
                return true;
            }
            if seen.insert(c) {
                stack.extend(self.parents(c).iter().map(String::as_str));
            }
        }
        false
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("taxonomy");
        if let Some(n) = &self.name {
            let _ = write!(out, " {n}");
        }
        out.push_str(" {\n");
        for (c, ps) in &self.parents {
            let _ = write!(out, "  concept {c}");
            if !ps.is_empty() {
                let _ = write!(out, " is_a {}", ps.join(", "));
            }
            out.push_str(".\n");
        }
        for ((functor, _), sigs) in &self.annotations {
            for sig in sigs {
                let args: Vec<&str> = sig.iter().map(|c| c.as_deref().unwrap_or("_")).collect();
                let _ = writeln!(out, "  annotate {functor}({}).", args.join(", "));
            }
        }
        out.push_str("}\n");
        out
    }
}

type Parts = (Option<String>, BTreeMap<String, Vec<String>>, BTreeMap<(String, usize), Vec<Signature>>);

fn concept_name(cur: &mut Cursor) -> Result<String, ParseError> {
    let (name, pos) = cur.name()?;
    if !is_variable_name(&name) {
        return Err(ParseError::new(pos, format!("concept names start with an uppercase letter: `{name}`")));
    }
    Ok(name)
}

fn taxonomy_block(cur: &mut Cursor) -> Result<Parts, TaxonomyError> {
    let name = match cur.peek() {
        Tok::Name(_) => Some(cur.block_name()?.0),
        _ => None,
    };
    let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut annotations: BTreeMap<(String, usize), Vec<Signature>> = BTreeMap::new();
    cur.expect(Tok::LBrace)?;
    while !cur.eat(&Tok::RBrace) {
        let (keyword, pos) = cur.name()?;
        match keyword.as_str() {
            "concept" => {
                let c = concept_name(cur)?;
                let mut ps = Vec::new();
                if cur.is_keyword("is_a") {
                    cur.bump();
                    ps.push(concept_name(cur)?);
                    while cur.eat(&Tok::Comma) {
                        ps.push(concept_name(cur)?);
                    }
                }
                cur.expect(Tok::Dot)?;
                if parents.insert(c.clone(), ps).is_some() {
                    return Err(TaxonomyError::Duplicate(c));
                }
            }
            "annotate" => {
                let (functor, _) = cur.name()?;
                let mut sig = Vec::new();
                if cur.eat(&Tok::LParen) {
                    loop {
                        if cur.is_keyword("_") {
                            cur.bump();
                            sig.push(None);
                        } else {
                            sig.push(Some(concept_name(cur)?));
                        }
                        if !cur.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    cur.expect(Tok::RParen)?;
                }
                cur.expect(Tok::Dot)?;
                let sigs = annotations.entry((functor, sig.len())).or_default();
                if !sigs.contains(&sig) {
                    sigs.push(sig);
                }
            }
            _ => return Err(ParseError::new(pos, format!("expected `concept` or `annotate`, found `{keyword}`")).into()),
        }
    }
    Ok((name, parents, annotations))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// `state <name>` or `transition <name>`.
    pub context: String,
    pub predicate: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.context, self.predicate, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaxonomyReport {
    pub violations: Vec<Violation>,
    /// Functors without an annotation, as `functor/arity`.
    pub warnings: Vec<String>,
}

impl TaxonomyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Concepts of the arguments in one context, inferred from unary `is_*`
/// facts whose functor is annotated with a concept.
fn infer_concepts<'a>(t: &Taxonomy, facts: impl IntoIterator<Item = &'a Predicate>) -> BTreeMap<Term, BTreeSet<String>> {
    let mut out: BTreeMap<Term, BTreeSet<String>> = BTreeMap::new();
    for p in facts {
        if p.arity() != 1 || !p.functor.starts_with("is_") {
            continue;
        }
        for sig in t.annotations(&p.functor, 1) {
            if let Some(c) = &sig[0] {
                out.entry(p.args[0].clone()).or_default().insert(c.clone());
            }
        }
    }
    out
}

fn fits(t: &Taxonomy, sig: &Signature, p: &Predicate, concepts: &BTreeMap<Term, BTreeSet<String>>) -> bool {
    sig.iter().zip(&p.args).all(|(want, arg)| {
        let Some(want) = want else { return true };
        match arg {
            Term::Literal(_) | Term::Variable(_) => match concepts.get(arg) {
                Some(have) => have.iter().any(|c| t.is_a(c, want)),
                None => true,
            },
            _ => false,
        }
    })
}

fn signature_text(functor: &str, sig: &Signature) -> String {
    let args: Vec<&str> = sig.iter().map(|c| c.as_deref().unwrap_or("_")).collect();
    format!("{functor}({})", args.join(", "))
}

/// Checks every predicate use against the annotations of its functor.
/// States also see the initial state's type facts; transitions see their
/// precondition's type facts.
pub fn validate_against_taxonomy(m: &Model, t: &Taxonomy) -> TaxonomyReport {
    let mut report = TaxonomyReport::default();
    let mut unannotated = BTreeSet::new();
    let initial = m.initial_state().ok();
    let mut check = |context: String, uses: Vec<&Predicate>, concepts: &BTreeMap<Term, BTreeSet<String>>| {
        for p in uses {
            let sigs = t.annotations(&p.functor, p.arity());
            if sigs.is_empty() {
                unannotated.insert(format!("{}/{}", p.functor, p.arity()));
                continue;
            }
            if !sigs.iter().any(|s| fits(t, s, p, concepts)) {
                let expected: Vec<String> = sigs.iter().map(|s| signature_text(&p.functor, s)).collect();
                report.violations.push(Violation {
                    context: context.clone(),
                    predicate: p.to_string(),
                    message: format!("arguments do not fit {}", expected.join(" or ")),
                });
            }
        }
    };
    for (name, state) in &m.states {
        let facts = state.iter().chain(initial.into_iter().flat_map(|s| s.iter()));
        let concepts = infer_concepts(t, facts);
        check(format!("state {name}"), state.iter().collect(), &concepts);
    }
    for (name, tr) in &m.transitions {
        let concepts = infer_concepts(t, &tr.precondition);
        let uses = tr.precondition.iter().chain(tr.action.iter().map(|a| &a.predicate)).collect();
        check(format!("transition {name}"), uses, &concepts);
    }
    report.warnings = unannotated.into_iter().map(|f| format!("functor `{f}` has no annotation")).collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_model;

    const TAX: &str = "taxonomy t {
  concept Thing.
  concept Agent is_a Thing.
  concept TransportAgent is_a Agent.
  concept Bus is_a TransportAgent.
  concept Human is_a Thing.
  concept TransportableEntity is_a Thing.
  concept Passenger is_a TransportableEntity, Human.
  concept POI is_a Thing.
  annotate is_bus(Bus).
  annotate is_passenger(Passenger).
  annotate is_bus_stop(POI).
  annotate at(TransportableEntity, POI).
  annotate at(TransportAgent, POI).
  annotate capacity(TransportAgent, _).
}";

    #[test]
    fn is_a_is_reflexive_and_transitive() {
        let t = Taxonomy::parse(TAX).unwrap();
        assert_eq!(t.root(), "Thing");
        assert!(t.is_a("Passenger", "Passenger"));
        assert!(t.is_a("Passenger", "Human"));
        assert!(t.is_a("Bus", "Thing"));
        assert!(!t.is_a("Human", "Passenger"));
        assert_eq!(Taxonomy::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn structural_errors() {
        let cyc = "taxonomy { concept A is_a B. concept B is_a A. concept T. }";
        assert!(matches!(Taxonomy::parse(cyc), Err(TaxonomyError::Cycle(_))));
        let two = "taxonomy { concept A. concept B. }";
        assert!(matches!(Taxonomy::parse(two), Err(TaxonomyError::Roots(_))));
        let unknown = "taxonomy { concept A is_a Z. }";
        assert!(matches!(Taxonomy::parse(unknown), Err(TaxonomyError::UnknownConcept { .. })));
        let ann = "taxonomy { concept A. annotate p(B). }";
        assert!(matches!(Taxonomy::parse(ann), Err(TaxonomyError::UnknownConcept { .. })));
    }

    #[test]
    fn passenger_at_stop_is_valid() {
        let t = Taxonomy::parse(TAX).unwrap();
        let m = parse_model("initial s. state s { is_passenger(p1). is_bus_stop(bs1). at(p1, bs1). }").unwrap();
        let r = validate_against_taxonomy(&m, &t);
        assert!(r.is_ok(), "{:?}", r.violations);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn swapped_arguments_violate() {
        let t = Taxonomy::parse(TAX).unwrap();
        let m = parse_model("initial s. state s { is_passenger(p1). is_bus_stop(bs1). at(bs1, p1). }").unwrap();
        let r = validate_against_taxonomy(&m, &t);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].predicate, "at(bs1, p1)");
    }

    #[test]
    fn empty_model_and_warnings() {
        let t = Taxonomy::parse(TAX).unwrap();
        assert_eq!(validate_against_taxonomy(&Model::new(), &t), TaxonomyReport::default());
        let m = parse_model("state s { next(a, b). }").unwrap();
        let r = validate_against_taxonomy(&m, &t);
        assert!(r.is_ok());
        assert_eq!(r.warnings, vec!["functor `next/2` has no annotation"]);
    }

    #[test]
    fn transitions_use_precondition_types() {
        let t = Taxonomy::parse(TAX).unwrap();
        let ok = "transition m { pre { is_bus(B). is_bus_stop(S). at(B, S). } }";
        assert!(validate_against_taxonomy(&parse_model(ok).unwrap(), &t).is_ok());
        let bad = "transition m { pre { is_bus(B). is_bus_stop(S). at(S, B). } }";
        assert_eq!(validate_against_taxonomy(&parse_model(bad).unwrap(), &t).violations.len(), 1);
    }
}
