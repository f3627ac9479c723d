//! Well-formedness checker for the PDDL fragment the compiler targets:
//! typed STRIPS with numeric fluents, optional existential preconditions.
//!
//! Beyond the grammar it resolves every name: predicates, functions, types,
//! constants, objects and variables must be declared, arities must match and
//! argument types must be compatible with the declarations.

use std::collections::{BTreeMap, BTreeSet};

use super::sexpr::{parse_one, Sexpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CheckError {
    pub message: String,
}

fn err<T>(message: impl Into<String>) -> Result<T, CheckError> {
    Err(CheckError { message: message.into() })
}

const REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":numeric-fluents",
    ":fluents",
    ":negative-preconditions",
    ":existential-preconditions",
    ":equality",
];

/// The declarations of a checked domain.
#[derive(Debug, Clone, Default)]
pub struct DomainSignature {
    pub name: String,
    pub requirements: BTreeSet<String>,
    /// type → parent type.
    pub types: BTreeMap<String, String>,
    pub constants: BTreeMap<String, String>,
    pub predicates: BTreeMap<String, Vec<String>>,
    pub functions: BTreeMap<String, Vec<String>>,
    pub actions: Vec<String>,
}

impl DomainSignature {
    fn has(&self, req: &str) -> bool {
        self.requirements.contains(req)
    }

    fn numeric(&self) -> bool {
        self.has(":numeric-fluents") || self.has(":fluents")
    }

    fn typing(&self) -> bool {
        self.has(":typing")
    }

    fn known_type(&self, t: &str) -> bool {
        t == "object" || self.types.contains_key(t)
    }

    /// `sub` is `sup` or reaches it through parent links.
    fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = sub;
        for _ in 0..=self.types.len() {
            if cur == sup || sup == "object" {
                return true;
            }
            match self.types.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

fn is_var(s: &str) -> bool {
    s.strip_prefix('?').is_some_and(is_name)
}

fn is_number(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

fn atom_of<'a>(e: &'a Sexpr, what: &str) -> Result<&'a str, CheckError> {
    e.atom().map_or_else(|| err(format!("expected {what}, found `{e}`")), Ok)
}

fn list_of<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr], CheckError> {
    e.list().map_or_else(|| err(format!("expected {what}, found `{e}`")), Ok)
}

/// `a b - t c - u d` → [(a, t), (b, t), (c, u), (d, object)].
fn typed_list(items: &[Sexpr], typing: bool, names_ok: fn(&str) -> bool) -> Result<Vec<(String, String)>, CheckError> {
    let mut out = Vec::new();
    let mut pending = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let a = atom_of(&items[i], "a name")?;
        if a == "-" {
            if !typing {
                return err("`-` type annotation requires :typing");
            }
            let ty = items.get(i + 1).ok_or_else(|| CheckError { message: "missing type after `-`".into() })?;
            let ty = atom_of(ty, "a type name")?;
            if pending.is_empty() {
                return err(format!("type `{ty}` annotates nothing"));
            }
            out.extend(pending.drain(..).map(|n: String| (n, ty.to_string())));
            i += 2;
            continue;
        }
        if !names_ok(a) {
            return err(format!("invalid name `{a}`"));
        }
        pending.push(a.to_string());
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    let mut seen = BTreeSet::new();
    for (n, _) in &out {
        if !seen.insert(n) {
            return err(format!("`{n}` is declared twice"));
        }
    }
    Ok(out)
}

fn header<'a>(items: &'a [Sexpr], keyword: &str) -> Result<&'a str, CheckError> {
    if items.first().and_then(Sexpr::atom) != Some("define") {
        return err("document must start with `(define`");
    }
    let head = items.get(1).and_then(Sexpr::list).unwrap_or(&[]);
    match head {
        [Sexpr::Atom(k), Sexpr::Atom(name)] if k == keyword && is_name(name) => Ok(name),
        _ => err(format!("expected `({keyword} <name>)` after define")),
    }
}

/// Checks a domain document and returns its declarations.
pub fn check_domain(text: &str) -> Result<DomainSignature, CheckError> {
    let doc = parse_one(text).map_err(|e| CheckError { message: e.to_string() })?;
    let items = list_of(&doc, "a define form")?;
    let mut sig = DomainSignature { name: header(items, "domain")?.to_string(), ..Default::default() };
    const ORDER: &[&str] = &[":requirements", ":types", ":constants", ":predicates", ":functions", ":action"];
    let mut last: Option<usize> = None;
    let mut action_names = BTreeSet::new();
    for section in &items[2..] {
        let parts = list_of(section, "a domain section")?;
        let key = section.head().unwrap_or("");
        let order = ORDER.iter().position(|k| *k == key).ok_or_else(|| CheckError {
            message: format!("unknown domain section `{key}`"),
        })?;
        if last.is_some_and(|prev| order < prev || (order == prev && key != ":action")) {
            return err(format!("section `{key}` is duplicated or out of order"));
        }
        last = Some(order);
        let body = &parts[1..];
        match key {
            ":requirements" => {
                for r in body {
                    let r = atom_of(r, "a requirement")?;
                    if !REQUIREMENTS.contains(&r) {
                        return err(format!("unsupported requirement `{r}`"));
                    }
                    sig.requirements.insert(r.to_string());
                }
            }
            ":types" => {
                if !sig.typing() {
                    return err(":types requires :typing");
                }
                for (t, parent) in typed_list(body, true, is_name)? {
                    if t == "object" {
                        return err("`object` cannot be redeclared");
                    }
                    sig.types.insert(t, parent);
                }
                for (t, parent) in &sig.types {
                    if !sig.known_type(parent) {
                        return err(format!("type `{t}` has undeclared parent `{parent}`"));
                    }
                }
                if sig.types.keys().any(|t| !sig.reaches_object(t)) {
                    return err("type hierarchy is cyclic");
                }
            }
            ":constants" => {
                for (c, ty) in typed_list(body, sig.typing(), is_name)? {
                    if !sig.known_type(&ty) {
                        return err(format!("constant `{c}` has undeclared type `{ty}`"));
                    }
                    sig.constants.insert(c, ty);
                }
            }
            ":predicates" => {
                for p in body {
                    let (name, params) = signature(p, &sig)?;
                    if sig.predicates.insert(name.clone(), params).is_some() {
                        return err(format!("predicate `{name}` is declared twice"));
                    }
                }
            }
            ":functions" => {
                if !sig.numeric() {
                    return err(":functions requires :numeric-fluents");
                }
                let mut i = 0;
                while i < body.len() {
                    let (name, params) = signature(&body[i], &sig)?;
                    if sig.predicates.contains_key(&name) || sig.functions.insert(name.clone(), params).is_some() {
                        return err(format!("function `{name}` is declared twice"));
                    }
                    i += 1;
                    if body.get(i).and_then(Sexpr::atom) == Some("-") {
                        if body.get(i + 1).and_then(Sexpr::atom) != Some("number") {
                            return err(format!("function `{name}` must have type number"));
                        }
                        i += 2;
                    }
                }
            }
            _ => {
                let name = check_action(body, &sig)?;
                if !action_names.insert(name.clone()) {
                    return err(format!("action `{name}` is declared twice"));
                }
                sig.actions.push(name);
            }
        }
    }
    Ok(sig)
}

impl DomainSignature {
    /// Parent links from `t` end at `object` (false on a cycle).
    fn reaches_object(&self, t: &str) -> bool {
        let mut cur = t;
        for _ in 0..=self.types.len() {
            match self.types.get(cur) {
                Some(p) => cur = p,
                None => return cur == "object",
            }
        }
        false
    }
}

fn signature(e: &Sexpr, sig: &DomainSignature) -> Result<(String, Vec<String>), CheckError> {
    let parts = list_of(e, "a signature")?;
    let name = atom_of(parts.first().ok_or_else(|| CheckError { message: "empty signature".into() })?, "a name")?;
    if !is_name(name) {
        return err(format!("invalid name `{name}`"));
    }
    let params = typed_list(&parts[1..], sig.typing(), is_var)?;
    for (_, ty) in &params {
        if !sig.known_type(ty) {
            return err(format!("`{name}` uses undeclared type `{ty}`"));
        }
    }
    Ok((name.to_string(), params.into_iter().map(|(_, t)| t).collect()))
}

/// Names visible inside a formula: variables in scope plus objects.
struct Scope<'a> {
    sig: &'a DomainSignature,
    objects: &'a BTreeMap<String, String>,
    vars: Vec<(String, String)>,
}

impl Scope<'_> {
    fn term_type(&self, t: &Sexpr) -> Result<String, CheckError> {
        let a = atom_of(t, "a term")?;
        if a.starts_with('?') {
            return self
                .vars
                .iter()
                .rev()
                .find(|(v, _)| v == a)
                .map(|(_, ty)| ty.clone())
                .ok_or_else(|| CheckError { message: format!("unbound variable `{a}`") });
        }
        self.sig
            .constants
            .get(a)
            .or_else(|| self.objects.get(a))
            .cloned()
            .ok_or_else(|| CheckError { message: format!("undeclared object `{a}`") })
    }

    fn args(&self, what: &str, declared: &[String], args: &[Sexpr]) -> Result<(), CheckError> {
        if declared.len() != args.len() {
            return err(format!("`{what}` takes {} arguments, got {}", declared.len(), args.len()));
        }
        for (ty, a) in declared.iter().zip(args) {
            let actual = self.term_type(a)?;
            if !self.sig.is_subtype(&actual, ty) {
                return err(format!("argument `{a}` of `{what}` has type `{actual}`, expected `{ty}`"));
            }
        }
        Ok(())
    }

    fn atom(&self, e: &Sexpr) -> Result<(), CheckError> {
        let parts = list_of(e, "an atom")?;
        let name = parts.first().and_then(Sexpr::atom).unwrap_or("");
        let declared = self
            .sig
            .predicates
            .get(name)
            .ok_or_else(|| CheckError { message: format!("undeclared predicate in `{e}`") })?;
        self.args(name, declared, &parts[1..])
    }

    fn fexp(&self, e: &Sexpr) -> Result<(), CheckError> {
        match e {
            Sexpr::Atom(a) if is_number(a) => Ok(()),
            Sexpr::Atom(a) => err(format!("`{a}` is not a numeric expression")),
            Sexpr::List(parts) => {
                let head = parts.first().and_then(Sexpr::atom).unwrap_or("");
                match (head, parts.len()) {
                    ("+" | "-" | "*" | "/", 3) => {
                        self.fexp(&parts[1])?;
                        self.fexp(&parts[2])
                    }
                    ("-", 2) => self.fexp(&parts[1]),
                    _ => self.fluent(e),
                }
            }
        }
    }

    fn fluent(&self, e: &Sexpr) -> Result<(), CheckError> {
        let parts = list_of(e, "a function term")?;
        let name = parts.first().and_then(Sexpr::atom).unwrap_or("");
        let declared = self
            .sig
            .functions
            .get(name)
            .ok_or_else(|| CheckError { message: format!("undeclared function in `{e}`") })?;
        self.args(name, declared, &parts[1..])
    }

    fn goal(&mut self, e: &Sexpr) -> Result<(), CheckError> {
        let parts = list_of(e, "a condition")?;
        match e.head().unwrap_or("") {
            "and" => parts[1..].iter().try_for_each(|g| self.goal(g)),
            "not" => {
                if !self.sig.has(":negative-preconditions") {
                    return err("`not` in a condition requires :negative-preconditions");
                }
                match parts {
                    [_, inner] => self.atom(inner),
                    _ => err(format!("malformed `{e}`")),
                }
            }
            "exists" => {
                if !self.sig.has(":existential-preconditions") {
                    return err("`exists` requires :existential-preconditions");
                }
                let [_, vars, body] = parts else {
                    return err(format!("malformed `{e}`"));
                };
                let vars = typed_list(list_of(vars, "a variable list")?, self.sig.typing(), is_var)?;
                for (_, ty) in &vars {
                    if !self.sig.known_type(ty) {
                        return err(format!("undeclared type `{ty}`"));
                    }
                }
                let depth = self.vars.len();
                self.vars.extend(vars);
                let result = self.goal(body);
                self.vars.truncate(depth);
                result
            }
            "<" | "<=" | ">" | ">=" | "=" => {
                let [_, a, b] = parts else {
                    return err(format!("malformed comparison `{e}`"));
                };
                let terms = a.atom().is_some_and(|x| !is_number(x)) && b.atom().is_some_and(|x| !is_number(x));
                if e.head() == Some("=") && terms {
                    if !self.sig.has(":equality") {
                        return err("object equality requires :equality");
                    }
                    self.term_type(a)?;
                    self.term_type(b)?;
                    return Ok(());
                }
                if !self.sig.numeric() {
                    return err("numeric comparison requires :numeric-fluents");
                }
                self.fexp(a)?;
                self.fexp(b)
            }
            _ => self.atom(e),
        }
    }

    fn effect(&self, e: &Sexpr) -> Result<(), CheckError> {
        let parts = list_of(e, "an effect")?;
        match e.head().unwrap_or("") {
            "and" => parts[1..].iter().try_for_each(|x| self.effect(x)),
            "not" => match parts {
                [_, inner] => self.atom(inner),
                _ => err(format!("malformed `{e}`")),
            },
            "increase" | "decrease" | "assign" | "scale-up" | "scale-down" => {
                let [_, target, value] = parts else {
                    return err(format!("malformed `{e}`"));
                };
                self.fluent(target)?;
                self.fexp(value)
            }
            _ => self.atom(e),
        }
    }
}

fn check_action(body: &[Sexpr], sig: &DomainSignature) -> Result<String, CheckError> {
    let name = atom_of(body.first().ok_or_else(|| CheckError { message: "action without name".into() })?, "an action name")?;
    if !is_name(name) {
        return err(format!("invalid action name `{name}`"));
    }
    let no_objects = BTreeMap::new();
    let mut scope = Scope { sig, objects: &no_objects, vars: Vec::new() };
    let mut i = 1;
    let mut seen = Vec::new();
    while i < body.len() {
        let key = atom_of(&body[i], "an action keyword")?;
        let value = body.get(i + 1).ok_or_else(|| CheckError { message: format!("`{key}` without value") })?;
        if seen.contains(&key) {
            return err(format!("action `{name}`: duplicate `{key}`"));
        }
        seen.push(key);
        let result = match key {
            ":parameters" if seen.len() == 1 => {
                let params = typed_list(list_of(value, "a parameter list")?, sig.typing(), is_var)?;
                for (_, ty) in &params {
                    if !sig.known_type(ty) {
                        return err(format!("action `{name}`: undeclared type `{ty}`"));
                    }
                }
                scope.vars = params;
                Ok(())
            }
            ":precondition" => scope.goal(value),
            ":effect" => scope.effect(value),
            _ => err(format!("unexpected `{key}`")),
        };
        result.map_err(|e| CheckError { message: format!("action `{name}`: {}", e.message) })?;
        i += 2;
    }
    if !seen.contains(&":parameters") {
        return err(format!("action `{name}` has no :parameters"));
    }
    Ok(name.to_string())
}

/// Checks a problem document against the domain it names.
pub fn check_problem(domain_text: &str, problem_text: &str) -> Result<(), CheckError> {
    let sig = check_domain(domain_text)?;
    let doc = parse_one(problem_text).map_err(|e| CheckError { message: e.to_string() })?;
    let items = list_of(&doc, "a define form")?;
    header(items, "problem")?;
    let sections = &items[2..];
    let key = |i: usize| sections.get(i).and_then(Sexpr::head).unwrap_or("");
    let mut i = 0;
    match sections.first().and_then(Sexpr::list) {
        Some([Sexpr::Atom(k), Sexpr::Atom(d)]) if k == ":domain" => {
            if *d != sig.name {
                return err(format!("problem names domain `{d}`, expected `{}`", sig.name));
            }
            i += 1;
        }
        _ => return err("expected `(:domain <name>)`"),
    }
    let mut objects = BTreeMap::new();
    if key(i) == ":objects" {
        let parts = sections[i].list().unwrap_or(&[]);
        for (o, ty) in typed_list(&parts[1..], sig.typing(), is_name)? {
            if sig.constants.contains_key(&o) {
                return err(format!("object `{o}` is also a domain constant"));
            }
            if !sig.known_type(&ty) {
                return err(format!("object `{o}` has undeclared type `{ty}`"));
            }
            objects.insert(o, ty);
        }
        i += 1;
    }
    let mut scope = Scope { sig: &sig, objects: &objects, vars: Vec::new() };
    if key(i) != ":init" {
        return err("expected `(:init ...)`");
    }
    let mut assigned = BTreeSet::new();
    for fact in &sections[i].list().unwrap_or(&[])[1..] {
        if fact.head() == Some("=") {
            let [_, target, value] = list_of(fact, "an assignment")? else {
                return err(format!("malformed `{fact}`"));
            };
            scope.fluent(target)?;
            if !value.atom().is_some_and(is_number) {
                return err(format!("initial value in `{fact}` must be a number"));
            }
            if !assigned.insert(target.to_string()) {
                return err(format!("`{target}` is assigned twice"));
            }
        } else {
            scope.atom(fact)?;
        }
    }
    i += 1;
    match sections.get(i).and_then(Sexpr::list) {
        Some([Sexpr::Atom(k), g]) if k == ":goal" => scope.goal(g)?,
        _ => return err("expected `(:goal <condition>)`"),
    }
    if i + 1 != sections.len() {
        return err(format!("unexpected section after :goal: `{}`", sections[i + 1]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOMAIN: &str = "(define (domain d)
  (:requirements :typing :numeric-fluents)
  (:types bus stop - object)
  (:predicates (at ?x - object ?y - object))
  (:functions (capacity ?b - bus))
  (:action go
    :parameters (?b - bus ?s - stop)
    :precondition (and (at ?b ?s) (> (capacity ?b) 0))
    :effect (and (not (at ?b ?s)) (decrease (capacity ?b) 1))))";

    #[test]
    fn accepts_well_formed() {
        let sig = check_domain(DOMAIN).unwrap();
        assert_eq!(sig.actions, vec!["go"]);
        let problem = "(define (problem p) (:domain d) (:objects b - bus s - stop)
          (:init (at b s) (= (capacity b) 2)) (:goal (and)))";
        check_problem(DOMAIN, problem).unwrap();
    }

    #[test]
    fn rejects_bad_documents() {
        let cases = [
            DOMAIN.replace("(at ?b ?s)", "(at ?b)"),
            DOMAIN.replace("(at ?b ?s)", "(at ?b ?z)"),
            DOMAIN.replace("(capacity ?b) 0", "(cap ?b) 0"),
            DOMAIN.replace(":numeric-fluents", ""),
            DOMAIN.replace("stop - object", "stop - vehicle"),
            DOMAIN.replace("(> (capacity ?b) 0)", "(not (at ?b ?b))"),
            DOMAIN.replace("1))))", "1)))"),
        ];
        for c in &cases {
            assert!(check_domain(c).is_err(), "{c}");
        }
    }

    #[test]
    fn problem_errors() {
        let base = "(define (problem p) (:domain d) (:objects b - bus s - stop) (:init (at b s)) (:goal (at b s)))";
        check_problem(DOMAIN, base).unwrap();
        for bad in [
            base.replace("(:domain d)", "(:domain e)"),
            base.replace("(:goal (at b s))", "(:goal (at b q))"),
            base.replace("b - bus", "b - car"),
            base.replace("(at b s))", "(at b s) (= (capacity b) x))"),
            base.replace("(at b s))", "(= (capacity s) 1))"),
        ] {
            assert!(check_problem(DOMAIN, &bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn numbers() {
        assert!(is_number("3") && is_number("-3") && is_number("2.5"));
        assert!(!is_number("2.") && !is_number("-") && !is_number("1/3"));
    }
}
