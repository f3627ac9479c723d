//! Minimal s-expression reader for PDDL text.
//!
//! Atoms are lowercased (PDDL is case-insensitive); `;` starts a comment.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

impl Sexpr {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(a) => Some(a),
            Sexpr::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items) => Some(items),
            Sexpr::Atom(_) => None,
        }
    }

    /// The head atom of a list, e.g. `and` in `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexpr::atom)
    }
}

impl fmt::Display for Sexpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexpr::Atom(a) => f.write_str(a),
            Sexpr::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SexprError {
    pub line: usize,
    pub message: String,
}

/// Reads every top-level expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexpr>, SexprError> {
    let mut stack: Vec<(usize, Vec<Sexpr>)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            ';' => {
                while chars.peek().is_some_and(|c| *c != '\n') {
                    chars.next();
                }
            }
            '(' => stack.push((line, Vec::new())),
            ')' => {
                let (_, items) = stack
                    .pop()
                    .ok_or_else(|| SexprError { line, message: "unbalanced `)`".into() })?;
                let list = Sexpr::List(items);
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => top.push(list),
                }
            }
            c if c.is_whitespace() => {}
            c => {
                let mut atom = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    atom.push(n);
                    chars.next();
                }
                let atom = Sexpr::Atom(atom.to_ascii_lowercase());
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(atom),
                    None => top.push(atom),
                }
            }
        }
    }
    if let Some((open_line, _)) = stack.last() {
        return Err(SexprError { line: *open_line, message: "unclosed `(`".into() });
    }
    Ok(top)
}

/// Reads exactly one top-level expression.
pub fn parse_one(text: &str) -> Result<Sexpr, SexprError> {
    let mut all = parse_all(text)?;
    match all.len() {
        1 => Ok(all.remove(0)),
        n => Err(SexprError { line: 1, message: format!("expected one expression, found {n}") }),
    }
}
