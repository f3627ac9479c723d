//! Terms, predicates, states and transition specifications.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::number::Number;

/// Interned-ish identifier. Cheap to clone and shareable across threads.
pub type Symbol = Arc<str>;

pub fn sym(name: &str) -> Symbol {
    Arc::from(name)
}

/// `[a-z][A-Za-z0-9_]*`
pub fn is_literal_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `[A-Z][A-Za-z0-9_]*`
pub fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// State, transition and model names may also contain `-` (e.g. `pickup-agent`).
pub fn is_block_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Number(Number),
    Literal(Symbol),
    Variable(Symbol),
    /// Arity is always at least one; a zero-argument symbol is a `Literal`.
    Compound(Symbol, Vec<Term>),
}

impl Term {
    pub fn num(value: i64) -> Term {
        Term::Number(Number::from_int(value))
    }

    pub fn lit(name: &str) -> Term {
        debug_assert!(is_literal_name(name), "bad literal {name}");
        Term::Literal(sym(name))
    }

    pub fn var(name: &str) -> Term {
        debug_assert!(is_variable_name(name), "bad variable {name}");
        Term::Variable(sym(name))
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        assert!(!args.is_empty(), "compound terms need at least one argument");
        Term::Compound(sym(functor), args)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Number(_) | Term::Literal(_) => true,
            Term::Variable(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_number(&self) -> Option<Number> {
        match self {
            Term::Number(n) => Some(*n),
            _ => None,
        }
    }

    /// Appends every variable (depth-first, left to right, with repeats).
    pub fn collect_variables<'a>(&'a self, out: &mut Vec<&'a Symbol>) {
        match self {
            Term::Variable(v) => out.push(v),
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_variables(out)),
            Term::Number(_) | Term::Literal(_) => {}
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Number(_) => 0,
            Term::Literal(_) => 1,
            Term::Variable(_) => 2,
            Term::Compound(..) => 3,
        }
    }
}

/// Numbers < literals < variables < compounds; compounds by
/// (functor, arity, arguments left to right).
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Number(a), Term::Number(b)) => a.cmp(b),
            (Term::Literal(a), Term::Literal(b)) | (Term::Variable(a), Term::Variable(b)) => {
                a.cmp(b)
            }
            (Term::Compound(fa, aa), Term::Compound(fb, ab)) => fa
                .cmp(fb)
                .then(aa.len().cmp(&ab.len()))
                .then_with(|| aa.cmp(ab)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Number(n) => write!(f, "{n}"),
            Term::Literal(s) | Term::Variable(s) => f.write_str(s),
            Term::Compound(functor, args) => write_application(f, functor, args),
        }
    }
}

fn write_application(f: &mut fmt::Formatter<'_>, functor: &str, args: &[Term]) -> fmt::Result {
    f.write_str(functor)?;
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{arg}")?;
    }
    f.write_str(")")
}

/// `functor(args...)`; arity 0 is an atomic fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub functor: Symbol,
    pub args: Vec<Term>,
}

impl Predicate {
    pub fn new(functor: &str, args: Vec<Term>) -> Self {
        Predicate { functor: sym(functor), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn variables(&self) -> Vec<&Symbol> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_variables(&mut out));
        out
    }

    /// The predicate viewed as a term: a compound, or a literal at arity 0.
    pub fn to_term(&self) -> Term {
        if self.args.is_empty() {
            Term::Literal(self.functor.clone())
        } else {
            Term::Compound(self.functor.clone(), self.args.clone())
        }
    }

    /// Inverse of [`Predicate::to_term`]; numbers and variables are not predicates.
    pub fn from_term(term: &Term) -> Option<Predicate> {
        match term {
            Term::Literal(name) => Some(Predicate { functor: name.clone(), args: Vec::new() }),
            Term::Compound(functor, args) => {
                Some(Predicate { functor: functor.clone(), args: args.clone() })
            }
            Term::Number(_) | Term::Variable(_) => None,
        }
    }
}

impl Ord for Predicate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.functor
            .cmp(&other.functor)
            .then(self.args.len().cmp(&other.args.len()))
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Predicate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_application(f, &self.functor, &self.args)
    }
}

/// An implicitly conjunctive set of predicates.
///
/// Model states are ground; the goal state is the one place where variables
/// are allowed, and [`crate::model::Model::validate`] enforces that.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    predicates: BTreeSet<Predicate>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn predicates(&self) -> &BTreeSet<Predicate> {
        &self.predicates
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter()
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn contains(&self, p: &Predicate) -> bool {
        self.predicates.contains(p)
    }

    /// Returns false if the predicate was already present.
    pub fn insert(&mut self, p: Predicate) -> bool {
        self.predicates.insert(p)
    }

    pub fn remove(&mut self, p: &Predicate) -> bool {
        self.predicates.remove(p)
    }

    pub fn is_ground(&self) -> bool {
        self.predicates.iter().all(Predicate::is_ground)
    }

    /// Predicates with the given functor and arity, in canonical order.
    pub fn with_signature<'a>(
        &'a self,
        functor: &'a Symbol,
        arity: usize,
    ) -> impl Iterator<Item = &'a Predicate> + 'a {
        let start = Predicate { functor: functor.clone(), args: Vec::new() };
        self.predicates
            .range(start..)
            .skip_while(move |p| p.arity() < arity)
            .take_while(move |p| p.functor == *functor && p.arity() == arity)
    }

    /// Canonical body text: one predicate per line, each terminated by `.`.
    /// This is the input to [`crate::trace::state_hash`].
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for p in &self.predicates {
            out.push_str(&p.to_string());
            out.push_str(".\n");
        }
        out
    }
}

impl FromIterator<Predicate> for State {
    fn from_iter<I: IntoIterator<Item = Predicate>>(iter: I) -> Self {
        State { predicates: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a State {
    type Item = &'a Predicate;
    type IntoIter = std::collections::btree_set::Iter<'a, Predicate>;

    fn into_iter(self) -> Self::IntoIter {
        self.predicates.iter()
    }
}

/// An effect-free call in a transition's computation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionCall {
    pub functor: Symbol,
    pub args: Vec<Term>,
}

impl FunctionCall {
    pub fn new(functor: &str, args: Vec<Term>) -> Self {
        FunctionCall { functor: sym(functor), args }
    }
}

impl fmt::Display for FunctionCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_application(f, &self.functor, &self.args)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Add,
    Delete,
}

impl ActionKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ActionKind::Add => "add",
            ActionKind::Delete => "delete",
        }
    }
}

/// `add(p)` or `delete(p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionPredicate {
    pub kind: ActionKind,
    pub predicate: Predicate,
}

impl ActionPredicate {
    pub fn add(predicate: Predicate) -> Self {
        ActionPredicate { kind: ActionKind::Add, predicate }
    }

    pub fn delete(predicate: Predicate) -> Self {
        ActionPredicate { kind: ActionKind::Delete, predicate }
    }
}

impl fmt::Display for ActionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind.keyword(), self.predicate)
    }
}

/// A named (precondition, computation, action) triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionSpec {
    pub name: String,
    pub precondition: BTreeSet<Predicate>,
    pub computation: Vec<FunctionCall>,
    pub action: Vec<ActionPredicate>,
}

impl TransitionSpec {
    pub fn new(name: &str) -> Self {
        TransitionSpec {
            name: name.to_string(),
            precondition: BTreeSet::new(),
            computation: Vec::new(),
            action: Vec::new(),
        }
    }

    /// Same precondition, computation and action, regardless of name.
    pub fn same_body(&self, other: &TransitionSpec) -> bool {
        self.precondition == other.precondition
            && self.computation == other.computation
            && self.action == other.action
    }

    /// Variables bound by matching the precondition, sorted by name.
    pub fn precondition_variables(&self) -> BTreeSet<Symbol> {
        self.precondition
            .iter()
            .flat_map(|p| p.variables().into_iter().cloned())
            .collect()
    }
}

/// Variable → ground term bindings. Keys iterate in name order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution {
    bindings: BTreeMap<Symbol, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn bind(&mut self, var: Symbol, value: Term) {
        debug_assert!(value.is_ground(), "bindings must be ground");
        self.bindings.insert(var, value);
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Term)> {
        self.bindings.iter()
    }

    /// Replaces bound variables; unbound variables are left in place.
    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Variable(v) => self.bindings.get(v).cloned().unwrap_or_else(|| term.clone()),
            Term::Compound(functor, args) => {
                Term::Compound(functor.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
            Term::Number(_) | Term::Literal(_) => term.clone(),
        }
    }

    pub fn apply_predicate(&self, p: &Predicate) -> Predicate {
        Predicate { functor: p.functor.clone(), args: p.args.iter().map(|a| self.apply(a)).collect() }
    }

    /// Keeps only bindings for the given variables.
    pub fn restrict(&self, vars: &BTreeSet<Symbol>) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(k, _)| vars.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

impl FromIterator<(Symbol, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Symbol, Term)>>(iter: I) -> Self {
        Substitution { bindings: iter.into_iter().collect() }
    }
}

/// `{P=p1, S=bs1}`
impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (var, value)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{var}={value}")?;
        }
        f.write_str("}")
    }
}
