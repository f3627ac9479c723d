//! Model → PDDL compiler.
//!
//! Mapping table:
//! - a type predicate `is_t(X)` in a precondition types the parameter `?x - t`;
//! - any other precondition predicate becomes a positive atom;
//! - a fluent `f(k.., V)` (or `f(k.., w(V))` for a wrapper `w`) becomes the
//!   numeric function `(f k..)` (or `(f_w k..)`) guarded by the presence atom
//!   `(has_f k..)`; `V` denotes the function's value;
//! - comparison tests become numeric comparisons and `add`, `subtract`,
//!   `multiply`, `divide` become `+ - * /`;
//! - `delete(f(k.., V))` followed by `add(f(k.., V2))` becomes `increase`,
//!   `decrease` or `assign`; an unpaired fluent delete clears the presence atom;
//! - other action predicates become add or delete literals.
//!
//! Anything outside this table is a [`MappingError`]. The emitted text is a
//! pure function of the model and the rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::builtins::{self, Builtin, BuiltinKind};
use crate::model::Model;
use crate::number::Number;
use crate::term::{ActionKind, FunctionCall, Predicate, State, Symbol, Term, TransitionSpec};

use super::rules::TransformationRules;
use super::{ArtifactKind, PddlArtifact};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MappingError {
    #[error("transition `{transition}`: `{construct}`: {reason}")]
    Transition { transition: String, construct: String, reason: String },
    #[error("state `{state}`: `{construct}`: {reason}")]
    State { state: String, construct: String, reason: String },
    #[error("{0}")]
    Model(String),
}

/// Names that PDDL readers treat as keywords.
const RESERVED: &[&str] = &[
    "and", "or", "not", "imply", "exists", "forall", "either", "object", "number", "increase",
    "decrease", "assign", "scale-up", "scale-down", "when", "define", "domain", "problem",
];

pub fn compile_domain(m: &Model, r: &TransformationRules) -> Result<PddlArtifact, MappingError> {
    let vocab = Vocabulary::collect(m, r)?;
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", vocab.domain_name);
    out.push_str("  (:requirements");
    if r.typing {
        out.push_str(" :typing");
    }
    out.push_str(" :numeric-fluents");
    if r.existential_goals {
        out.push_str(" :existential-preconditions");
    }
    out.push_str(")\n");
    if r.typing && !vocab.types.is_empty() {
        let names: Vec<&str> = vocab.types.values().map(String::as_str).collect();
        let _ = writeln!(out, "  (:types {} - object)", names.join(" "));
    }
    if !vocab.constants.is_empty() {
        let items: Vec<String> = vocab
            .constants
            .iter()
            .map(|c| typed(&vocab.objects[c], vocab.object_type(c, r)))
            .collect();
        let _ = writeln!(out, "  (:constants {})", items.join(" "));
    }
    out.push_str("  (:predicates");
    for (name, arity) in vocab.predicate_decls() {
        let _ = write!(out, "\n    ({name}{})", placeholder_params(arity, r.typing));
    }
    out.push_str(")\n");
    if !vocab.fluents.is_empty() {
        out.push_str("  (:functions");
        for (name, keys) in &vocab.fluents {
            let _ = write!(out, "\n    ({name}{})", placeholder_params(*keys, r.typing));
        }
        out.push_str(")\n");
    }
    for t in m.transitions.values() {
        out.push_str(&compile_action(t, &vocab, r)?);
    }
    out.push_str(")\n");
    Ok(PddlArtifact::new(ArtifactKind::Domain, out))
}

pub fn compile_problem(m: &Model, r: &TransformationRules) -> Result<PddlArtifact, MappingError> {
    let vocab = Vocabulary::collect(m, r)?;
    let initial_name = m.initial.clone().ok_or_else(|| MappingError::Model("model has no initial state".into()))?;
    let goal_name = m.goal.clone().ok_or_else(|| MappingError::Model("model has no goal state".into()))?;
    let initial = m.initial_state().map_err(|e| MappingError::Model(e.to_string()))?;
    let goal = m.goal_state().map_err(|e| MappingError::Model(e.to_string()))?;
    let state_err = |state: &str, construct: &dyn std::fmt::Display, reason: &str| MappingError::State {
        state: state.to_string(),
        construct: construct.to_string(),
        reason: reason.to_string(),
    };

    let mut objects: BTreeSet<&str> = BTreeSet::new();
    for state in [initial, goal] {
        for p in state.iter() {
            collect_literals(&p.args, &mut objects);
        }
    }
    let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for o in objects.iter().filter(|o| !vocab.constants.contains(**o)) {
        let ty = if r.typing {
            match vocab.object_types.get(*o).map(Vec::as_slice) {
                Some([ty]) => ty.as_str(),
                Some(many) if many.len() > 1 => {
                    return Err(state_err(&initial_name, o, "object has more than one type predicate"))
                }
                _ => return Err(state_err(&initial_name, o, "object has no type predicate")),
            }
        } else {
            ""
        };
        by_type.entry(ty).or_default().push(&vocab.objects[*o]);
    }

    let mut init = Vec::new();
    let mut seen_keys = BTreeSet::new();
    for p in initial.iter() {
        if r.is_type(&p.functor) {
            if p.arity() != 1 || !matches!(p.args[0], Term::Literal(_)) {
                return Err(state_err(&initial_name, p, "type predicate must have one literal argument"));
            }
            continue;
        }
        if let Some(f) = vocab.fluent_atom(p).map_err(|reason| state_err(&initial_name, p, &reason))? {
            let keys = ground_args(f.keys, &vocab).ok_or_else(|| state_err(&initial_name, p, "fluent keys must be literals"))?;
            let value = match f.value {
                Term::Number(n) => init_number(n).ok_or_else(|| {
                    state_err(&initial_name, p, "value has no finite decimal form")
                })?,
                _ => return Err(state_err(&initial_name, p, "fluent value must be a number")),
            };
            if !seen_keys.insert((f.name.clone(), keys.clone())) {
                return Err(state_err(&initial_name, p, "fluent has more than one value"));
            }
            init.push(format!("(has_{}{keys})", f.name));
            init.push(format!("(= ({}{keys}) {value})", f.name));
        } else {
            let args = ground_args(&p.args, &vocab)
                .ok_or_else(|| state_err(&initial_name, p, "arguments of a plain predicate must be literals"))?;
            init.push(format!("({}{args})", vocab.predicates[&*p.functor].0));
        }
    }

    let goal_text = compile_goal(goal, initial, &vocab, r).map_err(|(construct, reason)| MappingError::State {
        state: goal_name.clone(),
        construct,
        reason,
    })?;

    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {}-problem)", vocab.domain_name);
    let _ = writeln!(out, "  (:domain {})", vocab.domain_name);
    out.push_str("  (:objects");
    for (ty, names) in &by_type {
        if ty.is_empty() {
            for n in names {
                let _ = write!(out, "\n    {n}");
            }
        } else {
            let _ = write!(out, "\n    {} - {ty}", names.join(" "));
        }
    }
    out.push_str(")\n  (:init");
    for line in &init {
        let _ = write!(out, "\n    {line}");
    }
    out.push_str(")\n");
    let _ = writeln!(out, "  (:goal {goal_text})");
    out.push_str(")\n");
    Ok(PddlArtifact::new(ArtifactKind::Problem, out))
}

fn typed(name: &str, ty: Option<&str>) -> String {
    match ty {
        Some(t) => format!("{name} - {t}"),
        None => name.to_string(),
    }
}

fn placeholder_params(count: usize, typing: bool) -> String {
    (0..count)
        .map(|i| if typing { format!(" ?x{i} - object") } else { format!(" ?x{i}") })
        .collect()
}

fn collect_literals<'a>(args: &'a [Term], out: &mut BTreeSet<&'a str>) {
    for a in args {
        match a {
            Term::Literal(l) => {
                out.insert(l);
            }
            Term::Compound(_, inner) => collect_literals(inner, out),
            _ => {}
        }
    }
}

/// ` a b` for literal arguments, `None` if any argument is not a literal.
fn ground_args(args: &[Term], vocab: &Vocabulary) -> Option<String> {
    args.iter()
        .map(|a| match a {
            Term::Literal(l) => Some(format!(" {}", vocab.objects[&**l])),
            _ => None,
        })
        .collect()
}

fn init_number(n: &Number) -> Option<String> {
    let text = n.to_string();
    (!text.contains('/')).then_some(text)
}

/// Numeric literal inside an expression; negative and non-decimal values
/// use arithmetic forms so no signed or fractional token is emitted.
fn number_expr(n: &Number) -> String {
    let magnitude = n.checked_abs().unwrap_or(*n);
    let text = match init_number(&magnitude) {
        Some(t) => t,
        None => format!("(/ {} {})", magnitude.numer(), magnitude.denom()),
    };
    if n < &Number::from_int(0) {
        format!("(- {text})")
    } else {
        text
    }
}

/// A fluent occurrence split into function name, key arguments and value.
struct FluentAtom<'a> {
    name: String,
    keys: &'a [Term],
    value: &'a Term,
}

/// Names and signatures shared by the domain and the problem.
struct Vocabulary {
    domain_name: String,
    /// functor → (PDDL name, arity) for plain predicates.
    predicates: BTreeMap<String, (String, usize)>,
    /// fluent function name → key count.
    fluents: BTreeMap<String, usize>,
    /// fluent functor → function name (fixed per functor).
    fluent_names: BTreeMap<String, String>,
    /// type functor → PDDL type name.
    types: BTreeMap<String, String>,
    /// literal → PDDL object name.
    objects: BTreeMap<String, String>,
    /// literal → PDDL types from the initial state's type facts.
    object_types: BTreeMap<String, Vec<String>>,
    /// literals that appear inside transitions.
    constants: BTreeSet<String>,
}

impl Vocabulary {
    fn collect(m: &Model, r: &TransformationRules) -> Result<Self, MappingError> {
        r.check_disjoint().map_err(MappingError::Model)?;
        let domain_name = m.display_name().to_ascii_lowercase();
        let mut v = Vocabulary {
            domain_name,
            predicates: BTreeMap::new(),
            fluents: BTreeMap::new(),
            fluent_names: BTreeMap::new(),
            types: BTreeMap::new(),
            objects: BTreeMap::new(),
            object_types: BTreeMap::new(),
            constants: BTreeSet::new(),
        };
        let mut pddl_names: BTreeMap<String, String> = BTreeMap::new();
        let mut claim = |pddl: &str, origin: &str| -> Result<(), MappingError> {
            if RESERVED.contains(&pddl) {
                return Err(MappingError::Model(format!("`{origin}` maps to the reserved PDDL word `{pddl}`")));
            }
            match pddl_names.get(pddl) {
                Some(prev) if prev != origin => Err(MappingError::Model(format!(
                    "`{origin}` and `{prev}` both map to the PDDL name `{pddl}`"
                ))),
                _ => {
                    pddl_names.insert(pddl.to_string(), origin.to_string());
                    Ok(())
                }
            }
        };
        if r.typing {
            for t in &r.types {
                let name = TransformationRules::type_name(t).to_ascii_lowercase();
                claim(&name, t)?;
                v.types.insert(t.clone(), name);
            }
        }

        let mut uses: Vec<(&Predicate, Option<&str>)> = Vec::new();
        for (name, state) in &m.states {
            uses.extend(state.iter().map(|p| (p, Some(name.as_str()))));
        }
        for t in m.transitions.values() {
            uses.extend(t.precondition.iter().map(|p| (p, None)));
            uses.extend(t.action.iter().map(|a| (&a.predicate, None)));
        }
        for (p, _) in &uses {
            v.register(p, r, &mut claim)?;
        }

        let mut literals = BTreeSet::new();
        for (p, _) in &uses {
            collect_literals(&p.args, &mut literals);
        }
        for t in m.transitions.values() {
            let mut local = BTreeSet::new();
            for p in t.precondition.iter().chain(t.action.iter().map(|a| &a.predicate)) {
                collect_literals(&p.args, &mut local);
            }
            for c in &t.computation {
                collect_literals(&c.args, &mut local);
            }
            literals.extend(local.iter().copied());
            v.constants.extend(local.into_iter().map(str::to_string));
        }
        let mut object_names: BTreeMap<String, &str> = BTreeMap::new();
        for l in literals {
            let lower = l.to_ascii_lowercase();
            if RESERVED.contains(&lower.as_str()) {
                return Err(MappingError::Model(format!("object `{l}` maps to the reserved PDDL word `{lower}`")));
            }
            if let Some(prev) = object_names.insert(lower.clone(), l) {
                return Err(MappingError::Model(format!("objects `{prev}` and `{l}` both map to `{lower}`")));
            }
            v.objects.insert(l.to_string(), lower);
        }
        if let Ok(initial) = m.initial_state() {
            for p in initial.iter().filter(|p| r.is_type(&p.functor)) {
                if let [Term::Literal(l)] = p.args.as_slice() {
                    v.object_types.entry(l.to_string()).or_default().push(v.types[&*p.functor].clone());
                }
            }
        }
        Ok(v)
    }

    fn register(
        &mut self,
        p: &Predicate,
        r: &TransformationRules,
        claim: &mut impl FnMut(&str, &str) -> Result<(), MappingError>,
    ) -> Result<(), MappingError> {
        if r.is_type(&p.functor) {
            if p.arity() != 1 {
                return Err(MappingError::Model(format!("type predicate `{p}` must be unary")));
            }
            return Ok(());
        }
        if let Some(arity) = r.fluent_arity(&p.functor) {
            if p.arity() != arity {
                return Err(MappingError::Model(format!("fluent `{p}` must have {arity} arguments")));
            }
            let last = &p.args[arity - 1];
            let name = match last {
                Term::Compound(w, inner) if inner.len() == 1 && r.wrappers.contains_key(&**w) => {
                    format!("{}_{}", p.functor, r.wrappers[&**w]).to_ascii_lowercase()
                }
                Term::Compound(..) => {
                    return Err(MappingError::Model(format!("fluent `{p}` has a compound value that is not a declared wrapper")))
                }
                _ => p.functor.to_ascii_lowercase(),
            };
            match self.fluent_names.get(&*p.functor) {
                Some(prev) if *prev != name => {
                    return Err(MappingError::Model(format!(
                        "fluent `{}` is used both as `{prev}` and as `{name}`",
                        p.functor
                    )))
                }
                Some(_) => {}
                None => {
                    claim(&name, &p.functor)?;
                    claim(&format!("has_{name}"), &p.functor)?;
                    self.fluent_names.insert(p.functor.to_string(), name.clone());
                    self.fluents.insert(name, arity - 1);
                }
            }
            return Ok(());
        }
        let name = p.functor.to_ascii_lowercase();
        match self.predicates.get(&*p.functor) {
            Some((_, arity)) if *arity != p.arity() => Err(MappingError::Model(format!(
                "predicate `{}` is used with arities {arity} and {}",
                p.functor,
                p.arity()
            ))),
            Some(_) => Ok(()),
            None => {
                claim(&name, &p.functor)?;
                self.predicates.insert(p.functor.to_string(), (name, p.arity()));
                Ok(())
            }
        }
    }

    /// Declared atoms sorted by PDDL name: plain predicates plus presence
    /// atoms of fluents.
    fn predicate_decls(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self.predicates.values().cloned().collect();
        out.extend(self.fluents.iter().map(|(n, k)| (format!("has_{n}"), *k)));
        out.sort();
        out
    }

    fn object_type(&self, literal: &str, r: &TransformationRules) -> Option<&str> {
        if !r.typing {
            return None;
        }
        match self.object_types.get(literal).map(Vec::as_slice) {
            Some([ty]) => Some(ty),
            _ => Some("object"),
        }
    }

    fn fluent_atom<'a>(&self, p: &'a Predicate) -> Result<Option<FluentAtom<'a>>, String> {
        let Some(name) = self.fluent_names.get(&*p.functor) else {
            return Ok(None);
        };
        let (keys, last) = p.args.split_at(p.args.len() - 1);
        let value = match &last[0] {
            Term::Compound(_, inner) => &inner[0],
            other => other,
        };
        for k in keys {
            if !matches!(k, Term::Literal(_) | Term::Variable(_)) {
                return Err("fluent keys must be literals or variables".into());
            }
        }
        Ok(Some(FluentAtom { name: name.clone(), keys, value }))
    }
}

type Failure = (String, String);

fn fail(construct: impl ToString, reason: impl Into<String>) -> Failure {
    (construct.to_string(), reason.into())
}

/// Translates a conjunction of predicates (a precondition or a goal) into
/// PDDL conditions, collecting object variables and numeric bindings.
struct Conditions<'v> {
    vocab: &'v Vocabulary,
    typing: bool,
    /// object variables in first-appearance order.
    objects: Vec<Symbol>,
    types: BTreeMap<Symbol, String>,
    /// numeric variable → expression denoting its value.
    numeric: BTreeMap<Symbol, String>,
    conds: Vec<String>,
}

impl<'v> Conditions<'v> {
    fn new(vocab: &'v Vocabulary, typing: bool) -> Self {
        Conditions {
            vocab,
            typing,
            objects: Vec::new(),
            types: BTreeMap::new(),
            numeric: BTreeMap::new(),
            conds: Vec::new(),
        }
    }

    fn var_name(v: &str) -> String {
        format!("?{}", v.to_ascii_lowercase())
    }

    fn object_var(&mut self, v: &Symbol, at: &Predicate) -> Result<String, Failure> {
        if self.numeric.contains_key(v) {
            return Err(fail(at, format!("variable `{v}` is used both as an object and as a number")));
        }
        if !self.objects.contains(v) {
            self.objects.push(v.clone());
        }
        Ok(Self::var_name(v))
    }

    fn object_args(&mut self, args: &[Term], at: &Predicate) -> Result<String, Failure> {
        let mut out = String::new();
        for a in args {
            match a {
                Term::Variable(v) => {
                    let name = self.object_var(v, at)?;
                    let _ = write!(out, " {name}");
                }
                Term::Literal(l) => {
                    let _ = write!(out, " {}", self.vocab.objects[&**l]);
                }
                _ => return Err(fail(at, "numbers and compound terms are only allowed as fluent values")),
            }
        }
        Ok(out)
    }

    fn add_type(&mut self, p: &Predicate) -> Result<(), Failure> {
        let Term::Variable(v) = &p.args[0] else {
            return Err(fail(p, "type predicate over a constant has no PDDL counterpart"));
        };
        self.object_var(v, p)?;
        let ty = self.vocab.types[&*p.functor].clone();
        match self.types.get(v) {
            Some(prev) if *prev != ty => Err(fail(p, format!("variable `{v}` would need both types `{prev}` and `{ty}`"))),
            _ => {
                self.types.insert(v.clone(), ty);
                Ok(())
            }
        }
    }

    /// Object variables are claimed in a first pass so the numeric pass can
    /// reject variables that are used in both roles.
    fn add_all<'p>(&mut self, preds: impl IntoIterator<Item = &'p Predicate> + Clone, r: &TransformationRules) -> Result<(), Failure> {
        for p in preds.clone() {
            if r.is_type(&p.functor) {
                continue;
            }
            match self.vocab.fluent_atom(p).map_err(|e| fail(p, e))? {
                Some(f) => {
                    self.object_args(f.keys, p)?;
                }
                None => {
                    self.object_args(&p.args, p)?;
                }
            }
        }
        for p in preds {
            if r.is_type(&p.functor) {
                self.add_type(p)?;
                continue;
            }
            match self.vocab.fluent_atom(p).map_err(|e| fail(p, e))? {
                Some(f) => {
                    let keys = self.object_args(f.keys, p)?;
                    self.conds.push(format!("(has_{}{keys})", f.name));
                    let expr = format!("({}{keys})", f.name);
                    match f.value {
                        Term::Variable(v) if self.objects.contains(v) => {
                            return Err(fail(p, format!("variable `{v}` is used both as an object and as a number")))
                        }
                        Term::Variable(v) => match self.numeric.get(v) {
                            Some(prev) => self.conds.push(format!("(= {expr} {prev})")),
                            None => {
                                self.numeric.insert(v.clone(), expr);
                            }
                        },
                        Term::Number(n) => self.conds.push(format!("(= {expr} {})", number_expr(n))),
                        _ => return Err(fail(p, "fluent value must be a number or a variable")),
                    }
                }
                None => {
                    let args = self.object_args(&p.args, p)?;
                    self.conds.push(format!("({}{args})", self.vocab.predicates[&*p.functor].0));
                }
            }
        }
        Ok(())
    }

    fn typed_vars(&self) -> Result<Vec<String>, Failure> {
        let mut seen: BTreeMap<String, &Symbol> = BTreeMap::new();
        let mut out = Vec::new();
        for v in &self.objects {
            let name = Self::var_name(v);
            if let Some(prev) = seen.insert(name.clone(), v) {
                return Err(fail(v, format!("variables `{prev}` and `{v}` both map to `{name}`")));
            }
            out.push(match (self.typing, self.types.get(v)) {
                (false, _) => name,
                (true, Some(t)) => format!("{name} - {t}"),
                (true, None) => format!("{name} - object"),
            });
        }
        Ok(out)
    }

    fn numeric_arg(&self, t: &Term, call: &FunctionCall) -> Result<String, Failure> {
        match t {
            Term::Number(n) => Ok(number_expr(n)),
            Term::Variable(v) => self
                .numeric
                .get(v)
                .cloned()
                .ok_or_else(|| fail(call, format!("`{v}` is not a numeric value"))),
            _ => Err(fail(call, format!("`{t}` is not a numeric value"))),
        }
    }
}

fn comparison(b: Builtin) -> Option<&'static str> {
    Some(match b {
        Builtin::LessThan => "<",
        Builtin::LessOrEqual => "<=",
        Builtin::GreaterThan => ">",
        Builtin::GreaterOrEqual => ">=",
        Builtin::Equal => "=",
        _ => return None,
    })
}

fn arithmetic(b: Builtin) -> Option<&'static str> {
    Some(match b {
        Builtin::Add => "+",
        Builtin::Subtract => "-",
        Builtin::Multiply => "*",
        Builtin::Divide => "/",
        _ => return None,
    })
}

/// Whether two atoms may denote the same ground atom for some binding.
fn aliasable(a: &Predicate, b: &Predicate) -> bool {
    a.functor == b.functor
        && a.arity() == b.arity()
        && a.args.iter().zip(&b.args).all(|(x, y)| {
            matches!(x, Term::Variable(_)) || matches!(y, Term::Variable(_)) || x == y
        })
}

fn keys_aliasable(a: &[Term], b: &[Term]) -> bool {
    a.iter().zip(b).all(|(x, y)| matches!(x, Term::Variable(_)) || matches!(y, Term::Variable(_)) || x == y)
}

fn compile_action(t: &TransitionSpec, vocab: &Vocabulary, r: &TransformationRules) -> Result<String, MappingError> {
    compile_action_inner(t, vocab, r).map_err(|(construct, reason)| MappingError::Transition {
        transition: t.name.clone(),
        construct,
        reason,
    })
}

fn compile_action_inner(t: &TransitionSpec, vocab: &Vocabulary, r: &TransformationRules) -> Result<String, Failure> {
    let mut c = Conditions::new(vocab, r.typing);
    c.add_all(&t.precondition, r)?;
    let params = c.typed_vars()?;

    // value-function result → (call, still unconsumed)
    let mut results: BTreeMap<Symbol, (&FunctionCall, Builtin)> = BTreeMap::new();
    for call in &t.computation {
        let spec = builtins::lookup(&call.functor).ok_or_else(|| fail(call, "unknown function"))?;
        match spec.kind {
            BuiltinKind::Test => {
                let op = comparison(spec.builtin).ok_or_else(|| fail(call, "no PDDL comparison corresponds to this test"))?;
                let a = c.numeric_arg(&call.args[0], call)?;
                let b = c.numeric_arg(&call.args[1], call)?;
                c.conds.push(format!("({op} {a} {b})"));
            }
            BuiltinKind::Value => {
                let op = arithmetic(spec.builtin).ok_or_else(|| fail(call, "no PDDL arithmetic corresponds to this function"))?;
                let a = c.numeric_arg(&call.args[0], call)?;
                let b = c.numeric_arg(&call.args[1], call)?;
                let expr = format!("({op} {a} {b})");
                match &call.args[2] {
                    Term::Variable(v) if c.objects.contains(v) => {
                        return Err(fail(call, format!("result `{v}` is also used as an object")))
                    }
                    Term::Variable(v) => match c.numeric.get(v) {
                        Some(prev) => c.conds.push(format!("(= {expr} {prev})")),
                        None => {
                            c.numeric.insert(v.clone(), expr);
                            results.insert(v.clone(), (call, spec.builtin));
                        }
                    },
                    Term::Number(n) => c.conds.push(format!("(= {expr} {})", number_expr(n))),
                    other => return Err(fail(call, format!("result `{other}` is not numeric"))),
                }
            }
        }
    }

    let mut effects = Vec::new();
    let mut consumed: BTreeSet<Symbol> = BTreeSet::new();
    // (fluent name, keys) → index into `effects` of the pending delete
    let mut pending: Vec<(String, &[Term], usize)> = Vec::new();
    let mut updated: Vec<(String, &[Term])> = Vec::new();
    for (i, a) in t.action.iter().enumerate() {
        let p = &a.predicate;
        if r.is_type(&p.functor) {
            return Err(fail(a, "actions may not change type predicates"));
        }
        let fluent = vocab.fluent_atom(p).map_err(|e| fail(a, e))?;
        let Some(f) = fluent else {
            let args = c.object_args(&p.args, p)?;
            let atom = format!("({}{args})", vocab.predicates[&*p.functor].0);
            if a.kind == ActionKind::Add {
                let later_delete = t.action[i + 1..]
                    .iter()
                    .any(|b| b.kind == ActionKind::Delete && aliasable(p, &b.predicate));
                if later_delete {
                    return Err(fail(a, "add followed by a delete that may remove the same atom"));
                }
                effects.push(atom);
            } else {
                effects.push(format!("(not {atom})"));
            }
            continue;
        };
        let keys = c.object_args(f.keys, p)?;
        let current = format!("({}{keys})", f.name);
        match a.kind {
            ActionKind::Delete => {
                if !t.precondition.contains(p) {
                    return Err(fail(a, "a fluent delete must repeat a precondition fluent exactly"));
                }
                if updated.iter().any(|(n, k)| *n == f.name && keys_aliasable(k, f.keys)) {
                    return Err(fail(a, "the same fluent may be updated twice"));
                }
                updated.push((f.name.clone(), f.keys));
                pending.push((f.name.clone(), f.keys, effects.len()));
                effects.push(format!("(not (has_{}{keys}))", f.name));
            }
            ActionKind::Add => {
                let Some(idx) = pending.iter().position(|(n, k, _)| *n == f.name && *k == f.keys) else {
                    return Err(fail(a, "a fluent add needs an earlier delete of the same fluent"));
                };
                let (_, _, slot) = pending.remove(idx);
                effects[slot] = match f.value {
                    Term::Number(n) => format!("(assign {current} {})", number_expr(n)),
                    Term::Variable(v) => {
                        consumed.insert(v.clone());
                        let expr = c.numeric.get(v).ok_or_else(|| fail(a, format!("`{v}` is not numeric")))?;
                        fluent_update(&current, expr, results.get(v).copied(), &c)
                    }
                    _ => return Err(fail(a, "fluent value must be a number or a variable")),
                };
            }
        }
    }
    for (v, (call, _)) in &results {
        if !consumed.contains(v) {
            return Err(fail(call, format!("result `{v}` is not consumed by a fluent update")));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "  (:action {}", t.name.to_ascii_lowercase());
    let _ = writeln!(out, "    :parameters ({})", params.join(" "));
    let _ = writeln!(out, "    :precondition {}", conjunction(&c.conds, 6));
    let _ = writeln!(out, "    :effect {})", conjunction(&effects, 6));
    Ok(out)
}

fn fluent_update(current: &str, expr: &str, origin: Option<(&FunctionCall, Builtin)>, c: &Conditions) -> String {
    if let Some((call, b)) = origin {
        let arg = |i: usize| c.numeric_arg(&call.args[i], call).ok();
        let (a0, a1) = (arg(0), arg(1));
        match b {
            Builtin::Add if a0.as_deref() == Some(current) => return format!("(increase {current} {})", a1.unwrap_or_default()),
            Builtin::Add if a1.as_deref() == Some(current) => return format!("(increase {current} {})", a0.unwrap_or_default()),
            Builtin::Subtract if a0.as_deref() == Some(current) => {
                return format!("(decrease {current} {})", a1.unwrap_or_default())
            }
            _ => {}
        }
    }
    format!("(assign {current} {expr})")
}

/// `(and)`, or `(and` with one item per line at `indent`.
fn conjunction(items: &[String], indent: usize) -> String {
    if items.is_empty() {
        return "(and)".to_string();
    }
    let pad = " ".repeat(indent);
    let mut out = String::from("(and");
    for item in items {
        let _ = write!(out, "\n{pad}{item}");
    }
    out.push(')');
    out
}

fn compile_goal(goal: &State, initial: &State, vocab: &Vocabulary, r: &TransformationRules) -> Result<String, Failure> {
    let mut kept = Vec::new();
    for p in goal.iter() {
        if r.is_type(&p.functor) && p.is_ground() {
            if !initial.contains(p) {
                return Err(fail(p, "goal requires a type fact the initial state lacks"));
            }
            continue;
        }
        kept.push(p);
    }
    let mut c = Conditions::new(vocab, r.typing);
    c.add_all(kept.iter().copied(), r)?;
    if !c.objects.is_empty() || !c.numeric.is_empty() {
        let first = c.objects.first().or_else(|| c.numeric.keys().next()).cloned().unwrap_or_default();
        if !r.existential_goals {
            return Err(fail(first, "goal variables need the `existential_goals` option"));
        }
        if !c.numeric.is_empty() && c.objects.is_empty() {
            return Ok(conjunction(&c.conds, 4));
        }
        let vars = c.typed_vars()?;
        return Ok(format!("(exists ({}) {})", vars.join(" "), conjunction(&c.conds, 4)));
    }
    Ok(match c.conds.as_slice() {
        [single] => single.clone(),
        _ => conjunction(&c.conds, 4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::rules::parse_rules;
    use crate::syntax::parse_model;

    const RULES: &str = "rules {
  types { is_bus. is_bus_stop. is_passenger. }
  fluents { capacity/2. waiting/2. }
  wrappers { min -> minutes. }
}";

    const BOARD: &str = "
model board.
initial s2.
goal s3.
state s2 {
  is_bus(b25). is_bus_stop(bs1). is_passenger(p1).
  at(b25, bs1). at(p1, bs1). capacity(b25, 23). waiting(p1, min(2)).
}
state s3 { at(p1, b25). }
transition board {
  pre { is_bus(B). is_bus_stop(S). is_passenger(P). at(B, S). at(P, S). capacity(B, C). waiting(P, min(T)). }
  compute { less_than(T, 20). greater_than(C, 0). subtract(C, 1, C2). }
  action { delete(waiting(P, min(T))). delete(at(P, S)). add(at(P, B)). delete(capacity(B, C)). add(capacity(B, C2)). }
}
";

    fn rules() -> TransformationRules {
        parse_rules(RULES).unwrap()
    }

    #[test]
    fn board_action_shape() {
        let m = parse_model(BOARD).unwrap();
        let d = compile_domain(&m, &rules()).unwrap();
        assert!(d.text.contains("(< (waiting_minutes ?p) 20)"), "{}", d.text);
        assert!(d.text.contains("(> (capacity ?b) 0)"));
        assert!(d.text.contains("(decrease (capacity ?b) 1)"));
        assert!(d.text.contains("(not (has_waiting_minutes ?p))"));
        assert!(d.text.contains(":parameters (?b - bus ?s - bus_stop ?p - passenger)"), "{}", d.text);
        assert!(d.text.contains("(:types bus bus_stop passenger - object)"));
    }

    #[test]
    fn board_problem_shape() {
        let m = parse_model(BOARD).unwrap();
        let p = compile_problem(&m, &rules()).unwrap();
        assert!(p.text.contains("(= (capacity b25) 23)"), "{}", p.text);
        assert!(p.text.contains("(= (waiting_minutes p1) 2)"));
        assert!(p.text.contains("(:goal (at p1 b25))"));
        assert!(p.text.contains("b25 - bus"));
        assert!(p.text.contains("(:domain board)"));
        let d = compile_domain(&m, &rules()).unwrap();
        crate::pddl::check::check_problem(&d.text, &p.text).unwrap();
    }

    #[test]
    fn zero_transitions_and_empty_goal() {
        let m = parse_model("initial s. goal g. state s { is_bus(b). } state g { }").unwrap();
        let d = compile_domain(&m, &rules()).unwrap();
        assert!(!d.text.contains(":action"));
        let p = compile_problem(&m, &rules()).unwrap();
        assert!(p.text.contains("(:goal (and))"));
    }

    #[test]
    fn unconsumed_result_is_rejected() {
        let text = "transition t { pre { capacity(B, C). } compute { multiply(C, 2, D). } }";
        let err = compile_domain(&parse_model(text).unwrap(), &rules()).unwrap_err();
        match err {
            MappingError::Transition { transition, construct, .. } => {
                assert_eq!(transition, "t");
                assert_eq!(construct, "multiply(C, 2, D)");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn result_feeding_only_a_function_is_rejected() {
        let text = "transition t { pre { capacity(B, C). } compute { add(C, 1, D). less_than(D, 5). } }";
        assert!(compile_domain(&parse_model(text).unwrap(), &rules()).is_err());
    }

    #[test]
    fn unmappable_constructs() {
        let cases = [
            "transition t { pre { capacity(B, C). } compute { min(C, 1, D). } action { delete(capacity(B, C)). add(capacity(B, D)). } }",
            "transition t { pre { capacity(B, C). } compute { not_equal(C, 1). } }",
            "transition t { pre { at(B, S). } action { add(capacity(B, 1)). } }",
            "transition t { pre { at(B, S). } action { add(at(B, S)). delete(at(S, B)). } }",
            "transition t { pre { at(B, S). } action { add(is_bus(B)). } }",
            "transition t { pre { at(B, 3). } }",
            "transition t { pre { is_bus(b1). } }",
        ];
        for text in cases {
            let m = parse_model(text).unwrap();
            assert!(compile_domain(&m, &rules()).is_err(), "{text}");
        }
    }

    #[test]
    fn increase_and_assign() {
        let text = "transition t { pre { capacity(B, C). } compute { add(2, C, D). } action { delete(capacity(B, C)). add(capacity(B, D)). } }
transition u { pre { capacity(B, C). } action { delete(capacity(B, C)). add(capacity(B, 5)). } }";
        let d = compile_domain(&parse_model(text).unwrap(), &rules()).unwrap();
        assert!(d.text.contains("(increase (capacity ?b) 2)"), "{}", d.text);
        assert!(d.text.contains("(assign (capacity ?b) 5)"));
    }

    #[test]
    fn goal_variables_need_option() {
        let text = "initial s. goal g. state s { is_bus(b). at(b, b). } state g { at(X, b). }";
        let m = parse_model(text).unwrap();
        assert!(compile_problem(&m, &rules()).is_err());
        let mut r = rules();
        r.existential_goals = true;
        let p = compile_problem(&m, &r).unwrap();
        assert!(p.text.contains("(:goal (exists (?x - object) (and"), "{}", p.text);
    }

    #[test]
    fn untyped_object_rejected_when_typing() {
        let m = parse_model("initial s. goal s. state s { at(a, b). }").unwrap();
        assert!(compile_problem(&m, &rules()).is_err());
        let mut r = rules();
        r.typing = false;
        let p = compile_problem(&m, &r).unwrap();
        assert!(p.text.contains("(:goal (at a b))"), "{}", p.text);
    }

    #[test]
    fn name_collisions() {
        let m = parse_model("initial s. goal s. state s { at(busA, busa). }").unwrap();
        assert!(compile_domain(&m, &rules()).is_err());
        let m = parse_model("initial s. goal s. state s { and(x). }").unwrap();
        assert!(compile_domain(&m, &rules()).is_err());
    }

    #[test]
    fn deterministic_output() {
        let m = parse_model(BOARD).unwrap();
        assert_eq!(compile_domain(&m, &rules()).unwrap(), compile_domain(&m, &rules()).unwrap());
    }

    #[test]
    fn numbers_in_expressions() {
        assert_eq!(number_expr(&Number::from_int(-3)), "(- 3)");
        assert_eq!(number_expr(&Number::from_ratio(1, 3).unwrap()), "(/ 1 3)");
        assert_eq!(number_expr(&"2.5".parse().unwrap()), "2.5");
    }
}
