//! Transformation rules: which predicates become PDDL types, which become
//! numeric fluents, and which unary wrappers are unwrapped.
//!
//! ```text
//! rules {
//!   types { is_vehicle. is_poi. }
//!   fluents { capacity/2. waiting/2. }
//!   wrappers { min -> minutes. }
//!   options { existential_goals. }
//! }
//! ```
//!
//! A fluent `f/n` has `n - 1` key arguments and a numeric last argument.
//! `options` accepts `no_typing` and `existential_goals`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::syntax::{Cursor, ParseError, Tok};
use crate::term::is_literal_name;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformationRules {
    pub types: BTreeSet<String>,
    /// functor → total arity (keys plus the numeric value).
    pub fluents: BTreeMap<String, usize>,
    /// wrapper functor → name suffix used in fluent names.
    pub wrappers: BTreeMap<String, String>,
    pub typing: bool,
    pub existential_goals: bool,
}

impl Default for TransformationRules {
    fn default() -> Self {
        TransformationRules {
            types: BTreeSet::new(),
            fluents: BTreeMap::new(),
            wrappers: BTreeMap::new(),
            typing: true,
            existential_goals: false,
        }
    }
}

impl TransformationRules {
    pub fn is_type(&self, functor: &str) -> bool {
        self.typing && self.types.contains(functor)
    }

    pub fn fluent_arity(&self, functor: &str) -> Option<usize> {
        self.fluents.get(functor).copied()
    }

    /// `is_bus` → `bus`; other functors keep their name.
    pub fn type_name(functor: &str) -> &str {
        functor.strip_prefix("is_").filter(|s| !s.is_empty()).unwrap_or(functor)
    }

    /// The three declaration sets must not share a functor.
    pub fn check_disjoint(&self) -> Result<(), String> {
        for t in &self.types {
            if self.fluents.contains_key(t) || self.wrappers.contains_key(t) {
                return Err(format!("`{t}` is declared in more than one rules section"));
            }
        }
        for f in self.fluents.keys() {
            if self.wrappers.contains_key(f) {
                return Err(format!("`{f}` is declared in more than one rules section"));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("rules {\n");
        let _ = write!(out, "  types {{");
        for t in &self.types {
            let _ = write!(out, " {t}.");
        }
        out.push_str(" }\n  fluents {");
        for (f, arity) in &self.fluents {
            let _ = write!(out, " {f}/{arity}.");
        }
        out.push_str(" }\n  wrappers {");
        for (w, alias) in &self.wrappers {
            let _ = write!(out, " {w} -> {alias}.");
        }
        out.push_str(" }\n  options {");
        if !self.typing {
            out.push_str(" no_typing.");
        }
        if self.existential_goals {
            out.push_str(" existential_goals.");
        }
        out.push_str(" }\n}\n");
        out
    }
}

/// Finds the single `rules { ... }` block in a document; other top-level
/// blocks are skipped.
pub fn parse_rules(text: &str) -> Result<TransformationRules, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut found = None;
    while !cur.at_eof() {
        let (keyword, pos) = cur.name()?;
        if keyword == "rules" {
            if found.is_some() {
                return Err(ParseError::new(pos, "duplicate `rules` block"));
            }
            found = Some(rules_block(&mut cur)?);
            continue;
        }
        cur.skip_item()?;
    }
    found.ok_or_else(|| ParseError::new(cur.pos(), "no `rules` block found"))
}

fn rules_block(cur: &mut Cursor) -> Result<TransformationRules, ParseError> {
    let mut rules = TransformationRules::default();
    cur.expect(Tok::LBrace)?;
    while !cur.eat(&Tok::RBrace) {
        let (section, pos) = cur.name()?;
        match section.as_str() {
            "types" => {
                for (name, pos) in cur.dotted_block(functor)? {
                    if !rules.types.insert(name.clone()) {
                        return Err(ParseError::new(pos, format!("duplicate type predicate `{name}`")));
                    }
                }
            }
            "fluents" => {
                let entries = cur.dotted_block(|c| {
                    let (name, pos) = functor(c)?;
                    c.expect(Tok::Slash)?;
                    let (arity, apos) = c.integer()?;
                    if arity == 0 {
                        return Err(ParseError::new(apos, "a fluent needs a value argument"));
                    }
                    Ok((name, arity, pos))
                })?;
                for (name, arity, pos) in entries {
                    if rules.fluents.insert(name.clone(), arity).is_some() {
                        return Err(ParseError::new(pos, format!("duplicate fluent `{name}`")));
                    }
                }
            }
            "wrappers" => {
                let entries = cur.dotted_block(|c| {
                    let (name, pos) = functor(c)?;
                    let alias = if c.eat(&Tok::Arrow) { functor(c)?.0 } else { name.clone() };
                    Ok((name, alias, pos))
                })?;
                for (name, alias, pos) in entries {
                    if rules.wrappers.insert(name.clone(), alias).is_some() {
                        return Err(ParseError::new(pos, format!("duplicate wrapper `{name}`")));
                    }
                }
            }
            "options" => {
                for (name, pos) in cur.dotted_block(functor)? {
                    match name.as_str() {
                        "no_typing" => rules.typing = false,
                        "existential_goals" => rules.existential_goals = true,
                        _ => return Err(ParseError::new(pos, format!("unknown option `{name}`"))),
                    }
                }
            }
            _ => {
                return Err(ParseError::new(
                    pos,
                    format!("expected `types`, `fluents`, `wrappers` or `options`, found `{section}`"),
                ))
            }
        }
    }
    rules.check_disjoint().map_err(|m| cur.error(m))?;
    Ok(rules)
}

fn functor(cur: &mut Cursor) -> Result<(String, crate::syntax::Pos), ParseError> {
    let (name, pos) = cur.name()?;
    if !is_literal_name(&name) {
        return Err(ParseError::new(pos, format!("invalid functor `{name}`")));
    }
    Ok((name, pos))
}
