//! Lexer and recursive-descent parser for `.kmf` documents.
//!
//! ```text
//! model bus.
//! initial s0.
//! goal done.
//! state s0 { is_bus(b25). capacity(b25, 23). waiting(p1, min(2)). }
//! transition board {
//!   pre { at(P, S). waiting(P, min(T)). }
//!   compute { less_than(T, 20). }
//!   action { delete(waiting(P, min(T))). }
//! }
//! ```
//!
//! `#` starts a comment that runs to the end of the line. Identifiers are
//! ASCII only. The cursor type is shared by the other block formats (rules,
//! taxonomy, vocabulary, perturbation scripts) so they report positions the
//! same way.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{Model, ModelError};
use crate::number::Number;
use crate::term::{
    is_block_name, is_literal_name, is_variable_name, sym, ActionPredicate, FunctionCall,
    Predicate, State, Term, TransitionSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseError { pos, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Name(String),
    Number(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Slash,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(n) => write!(f, "`{n}`"),
            Tok::Number(n) => write!(f, "number `{n}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let digits_from = |mut j: usize| {
        while j < chars.len() && chars[j].is_ascii_digit() {
            j += 1;
        }
        j
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if !c.is_ascii() {
            return Err(ParseError::new(pos, format!("non-ASCII character `{c}`")));
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let hyphen = d == '-' && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric());
                if d.is_ascii_alphanumeric() || d == '_' || hyphen {
                    i += 1;
                } else {
                    break;
                }
            }
            Tok::Name(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            i = digits_from(i + 1);
            if matches!(chars.get(i), Some('.') | Some('/'))
                && chars.get(i + 1).is_some_and(char::is_ascii_digit)
            {
                i = digits_from(i + 1);
            }
            Tok::Number(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '/' => Tok::Slash,
                '-' if chars.get(i) == Some(&'>') => {
                    i += 1;
                    Tok::Arrow
                }
                _ => return Err(ParseError::new(pos, format!("unexpected character `{c}`"))),
            }
        };
        col += i - start;
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

/// Token cursor with the term-level grammar shared by every block format.
pub struct Cursor {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Cursor { toks: tokenize(text)?, at: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[idx].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.pos(), message)
    }

    pub fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    pub fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == word)
    }

    pub fn expect_keyword(&mut self, word: &str) -> Result<Pos, ParseError> {
        if self.is_keyword(word) {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    pub fn name(&mut self) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                let pos = self.bump().1;
                Ok((n, pos))
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    pub fn block_name(&mut self) -> Result<(String, Pos), ParseError> {
        let (name, pos) = self.name()?;
        if !is_block_name(&name) {
            return Err(ParseError::new(pos, format!("invalid name `{name}`")));
        }
        Ok((name, pos))
    }

    pub fn integer(&mut self) -> Result<(usize, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                let pos = self.pos();
                let value = n
                    .parse::<usize>()
                    .map_err(|_| ParseError::new(pos, format!("expected a count, found `{n}`")))?;
                self.bump();
                Ok((value, pos))
            }
            _ => Err(self.unexpected("a count")),
        }
    }

    pub fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Number(text) => {
                let pos = self.pos();
                let n: Number = text.parse().map_err(|e: crate::number::NumberParseError| {
                    ParseError::new(pos, e.to_string())
                })?;
                self.bump();
                Ok(Term::Number(n))
            }
            Tok::Name(name) => {
                let pos = self.bump().1;
                if *self.peek() == Tok::LParen {
                    if !is_literal_name(&name) {
                        return Err(ParseError::new(pos, format!("invalid functor `{name}`")));
                    }
                    self.bump();
                    if *self.peek() == Tok::RParen {
                        return Err(self.error(format!(
                            "`{name}()` has no arguments; write `{name}` for an atomic symbol"
                        )));
                    }
                    let mut args = vec![self.term()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.term()?);
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Term::Compound(sym(&name), args))
                } else if is_variable_name(&name) {
                    Ok(Term::Variable(sym(&name)))
                } else if is_literal_name(&name) {
                    Ok(Term::Literal(sym(&name)))
                } else {
                    Err(ParseError::new(pos, format!("invalid symbol `{name}`")))
                }
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    pub fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let pos = self.pos();
        let term = self.term()?;
        Predicate::from_term(&term)
            .ok_or_else(|| ParseError::new(pos, format!("`{term}` is not a predicate")))
    }

    /// `{ item. item. ... }`
    pub fn dotted_block<T>(
        &mut self,
        mut item: impl FnMut(&mut Cursor) -> Result<T, ParseError>,
    ) -> Result<Vec<T>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            out.push(item(self)?);
            self.expect(Tok::Dot)?;
        }
        Ok(out)
    }

    /// Skips a `{ ... }` block with balanced braces.
    pub fn skip_block(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::LBrace)?;
        let mut depth = 1usize;
        while depth > 0 {
            match self.bump().0 {
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth -= 1,
                Tok::Eof => return Err(self.error("unterminated block")),
                _ => {}
            }
        }
        Ok(())
    }

    /// Skips the rest of a top-level item whose keyword was consumed:
    /// `kw name.`, `kw { ... }` or `kw name { ... }`.
    pub fn skip_item(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Name(_)) {
            self.bump();
            if self.eat(&Tok::Dot) {
                return Ok(());
            }
        }
        self.skip_block()
    }

    pub fn action_predicate(&mut self) -> Result<ActionPredicate, ParseError> {
        let pos = self.pos();
        let term = self.term()?;
        let illegal = |what: &str| ParseError::new(pos, what.to_string());
        match &term {
            Term::Compound(functor, args) if &**functor == "add" || &**functor == "delete" => {
                if args.len() != 1 {
                    return Err(illegal(&format!("`{functor}` takes exactly one predicate")));
                }
                let predicate = Predicate::from_term(&args[0]).ok_or_else(|| {
                    illegal(&format!("argument of `{functor}` must be a predicate"))
                })?;
                Ok(if &**functor == "add" {
                    ActionPredicate::add(predicate)
                } else {
                    ActionPredicate::delete(predicate)
                })
            }
            Term::Compound(functor, _) | Term::Literal(functor) => Err(illegal(&format!(
                "illegal action functor `{functor}`; actions are restricted to add and delete"
            ))),
            _ => Err(illegal(&format!("`{term}` is not an action"))),
        }
    }

    fn function_call(&mut self) -> Result<FunctionCall, ParseError> {
        let pos = self.pos();
        match self.term()? {
            Term::Compound(functor, args) => Ok(FunctionCall { functor, args }),
            other => Err(ParseError::new(pos, format!("`{other}` is not a function call"))),
        }
    }
}

/// Block keywords owned by other formats; `parse_model` skips them so one
/// file can carry a model together with its rules or vocabulary.
const FOREIGN_BLOCKS: &[&str] = &["rules", "vocabulary", "taxonomy"];

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut model = Model::new();
    let mut state_pos = BTreeMap::new();
    let mut transition_pos = BTreeMap::new();
    let mut header_pos = BTreeMap::new();
    while !cur.at_eof() {
        let (keyword, pos) = cur.name()?;
        match keyword.as_str() {
            "model" | "initial" | "goal" => {
                let (name, _) = cur.block_name()?;
                cur.expect(Tok::Dot)?;
                let slot = match keyword.as_str() {
                    "model" => &mut model.name,
                    "initial" => &mut model.initial,
                    _ => &mut model.goal,
                };
                if slot.is_some() {
                    return Err(ParseError::new(pos, format!("duplicate `{keyword}` declaration")));
                }
                *slot = Some(name);
                header_pos.insert(keyword, pos);
            }
            "state" => {
                let (name, name_pos) = cur.block_name()?;
                let preds = cur.dotted_block(Cursor::predicate)?;
                if model.states.contains_key(&name) {
                    return Err(ParseError::new(name_pos, format!("duplicate state `{name}`")));
                }
                model.states.insert(name.clone(), preds.into_iter().collect::<State>());
                state_pos.insert(name, name_pos);
            }
            "transition" => {
                let (name, name_pos) = cur.block_name()?;
                let t = parse_transition_body(&mut cur, &name)?;
                if model.transitions.contains_key(&name) {
                    return Err(ParseError::new(name_pos, format!("duplicate transition `{name}`")));
                }
                model.transitions.insert(name.clone(), t);
                transition_pos.insert(name, name_pos);
            }
            k if FOREIGN_BLOCKS.contains(&k) => cur.skip_item()?,
            _ => return Err(ParseError::new(pos, format!("unexpected `{keyword}` at top level"))),
        }
    }
    model.validate().map_err(|e| {
        let pos = match &e {
            ModelError::UnknownState { role, .. } => header_pos.get(*role).copied(),
            ModelError::NonGroundState { state, .. } => state_pos.get(state).copied(),
            ModelError::Transition { transition, .. } => transition_pos.get(transition).copied(),
            ModelError::Missing(_) => None,
        };
        ParseError::new(pos.unwrap_or_default(), e.to_string())
    })?;
    Ok(model)
}

fn parse_transition_body(cur: &mut Cursor, name: &str) -> Result<TransitionSpec, ParseError> {
    let mut t = TransitionSpec::new(name);
    cur.expect(Tok::LBrace)?;
    let mut stage = 0;
    while !cur.eat(&Tok::RBrace) {
        let (section, pos) = cur.name()?;
        let order = match section.as_str() {
            "pre" => 1,
            "compute" => 2,
            "action" => 3,
            _ => {
                return Err(ParseError::new(
                    pos,
                    format!("expected `pre`, `compute` or `action`, found `{section}`"),
                ))
            }
        };
        if order <= stage {
            return Err(ParseError::new(pos, format!("section `{section}` is duplicated or out of order")));
        }
        stage = order;
        match order {
            1 => t.precondition = cur.dotted_block(Cursor::predicate)?.into_iter().collect(),
            2 => t.computation = cur.dotted_block(Cursor::function_call)?,
            _ => t.action = cur.dotted_block(Cursor::action_predicate)?,
        }
    }
    Ok(t)
}

/// Parses a single term such as `min(2)` or `p1`.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut cur = Cursor::new(text)?;
    let t = cur.term()?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(t)
}

/// Parses a single predicate such as `at(p1, bs1)` (no trailing dot needed).
pub fn parse_predicate(text: &str) -> Result<Predicate, ParseError> {
    let mut cur = Cursor::new(text)?;
    let p = cur.predicate()?;
    cur.eat(&Tok::Dot);
    if !cur.at_eof() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(p)
}
