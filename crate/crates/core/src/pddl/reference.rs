//! Reference executor for the emitted PDDL fragment.
//!
//! Reads the PDDL text only (no access to the source model), grounds every
//! action over the typed objects and runs breadth-first search. Effects
//! follow PDDL semantics: all numeric right-hand sides are evaluated in the
//! source state, deletes are applied before adds. An expression that reads an
//! undefined function or divides by zero makes the action inapplicable.
//! Documents are expected to have passed the grammar checker.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::number::Number;

use super::cross::PlanAction;
use super::sexpr::{parse_one, Sexpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReferenceError {
    #[error("malformed PDDL: {0}")]
    Malformed(String),
    #[error("search limit of {0} expanded states reached")]
    Limit(usize),
    #[error("plan step {index} `{action}`: {reason}")]
    Invalid { index: usize, action: String, reason: String },
}

fn malformed<T>(what: impl std::fmt::Display) -> Result<T, ReferenceError> {
    Err(ReferenceError::Malformed(what.to_string()))
}

#[derive(Debug, Clone)]
enum Arg {
    Var(String),
    Obj(String),
}

#[derive(Debug, Clone)]
enum Expr {
    Num(Number),
    Fluent(String, Vec<Arg>),
    Bin(char, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

#[derive(Debug, Clone)]
enum Cond {
    And(Vec<Cond>),
    Atom(String, Vec<Arg>),
    Not(String, Vec<Arg>),
    Cmp(String, Expr, Expr),
    Exists(Vec<(String, String)>, Box<Cond>),
}

#[derive(Debug, Clone)]
enum Effect {
    Add(String, Vec<Arg>),
    Del(String, Vec<Arg>),
    Update(String, String, Vec<Arg>, Expr),
}

#[derive(Debug, Clone)]
struct Action {
    name: String,
    params: Vec<(String, String)>,
    pre: Cond,
    effects: Vec<Effect>,
}

type Atom = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct World {
    atoms: BTreeSet<Atom>,
    fluents: BTreeMap<Atom, Number>,
}

struct Task {
    parents: BTreeMap<String, String>,
    /// object → declared type.
    objects: BTreeMap<String, String>,
    actions: Vec<Action>,
    init: World,
    goal: Cond,
}

fn parse_number(s: &str) -> Option<Number> {
    s.parse().ok()
}

fn typed(items: &[Sexpr]) -> Result<Vec<(String, String)>, ReferenceError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut iter = items.iter();
    while let Some(item) = iter.next() {
        let Some(a) = item.atom() else { return malformed(item) };
        if a == "-" {
            let Some(ty) = iter.next().and_then(Sexpr::atom) else { return malformed("dangling `-`") };
            out.extend(pending.drain(..).map(|n| (n, ty.to_string())));
        } else {
            pending.push(a.to_string());
        }
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    Ok(out)
}

fn args(items: &[Sexpr]) -> Result<Vec<Arg>, ReferenceError> {
    items
        .iter()
        .map(|a| match a.atom() {
            Some(v) if v.starts_with('?') => Ok(Arg::Var(v.to_string())),
            Some(o) => Ok(Arg::Obj(o.to_string())),
            None => malformed(a),
        })
        .collect()
}

fn name_and_args(e: &Sexpr) -> Result<(String, Vec<Arg>), ReferenceError> {
    match e.list() {
        Some([Sexpr::Atom(name), rest @ ..]) => Ok((name.clone(), args(rest)?)),
        _ => malformed(e),
    }
}

fn expr(e: &Sexpr) -> Result<Expr, ReferenceError> {
    if let Some(a) = e.atom() {
        return parse_number(a).map(Expr::Num).map_or_else(|| malformed(a), Ok);
    }
    let parts = e.list().unwrap_or(&[]);
    match (e.head(), parts.len()) {
        (Some(op @ ("+" | "-" | "*" | "/")), 3) => Ok(Expr::Bin(
            op.chars().next().unwrap_or('+'),
            Box::new(expr(&parts[1])?),
            Box::new(expr(&parts[2])?),
        )),
        (Some("-"), 2) => Ok(Expr::Neg(Box::new(expr(&parts[1])?))),
        _ => {
            let (name, a) = name_and_args(e)?;
            Ok(Expr::Fluent(name, a))
        }
    }
}

fn cond(e: &Sexpr) -> Result<Cond, ReferenceError> {
    let parts = e.list().map_or_else(|| malformed(e), Ok)?;
    match e.head() {
        Some("and") => Ok(Cond::And(parts[1..].iter().map(cond).collect::<Result<_, _>>()?)),
        Some("not") if parts.len() == 2 => {
            let (n, a) = name_and_args(&parts[1])?;
            Ok(Cond::Not(n, a))
        }
        Some("exists") if parts.len() == 3 => {
            let vars = typed(parts[1].list().unwrap_or(&[]))?;
            Ok(Cond::Exists(vars, Box::new(cond(&parts[2])?)))
        }
        Some(op @ ("<" | "<=" | ">" | ">=" | "=")) if parts.len() == 3 => {
            Ok(Cond::Cmp(op.to_string(), expr(&parts[1])?, expr(&parts[2])?))
        }
        _ => {
            let (n, a) = name_and_args(e)?;
            Ok(Cond::Atom(n, a))
        }
    }
}

fn effects(e: &Sexpr, out: &mut Vec<Effect>) -> Result<(), ReferenceError> {
    let parts = e.list().map_or_else(|| malformed(e), Ok)?;
    match e.head() {
        Some("and") => parts[1..].iter().try_for_each(|x| effects(x, out)),
        Some("not") if parts.len() == 2 => {
            let (n, a) = name_and_args(&parts[1])?;
            out.push(Effect::Del(n, a));
            Ok(())
        }
        Some(op @ ("increase" | "decrease" | "assign")) if parts.len() == 3 => {
            let (n, a) = name_and_args(&parts[1])?;
            out.push(Effect::Update(op.to_string(), n, a, expr(&parts[2])?));
            Ok(())
        }
        _ => {
            let (n, a) = name_and_args(e)?;
            out.push(Effect::Add(n, a));
            Ok(())
        }
    }
}

fn sections(doc: &Sexpr) -> Result<&[Sexpr], ReferenceError> {
    match doc.list() {
        Some(items) if doc.head() == Some("define") && items.len() >= 2 => Ok(&items[2..]),
        _ => malformed("expected a define form"),
    }
}

fn load(domain: &str, problem: &str) -> Result<Task, ReferenceError> {
    let d = parse_one(domain).map_err(|e| ReferenceError::Malformed(e.to_string()))?;
    let p = parse_one(problem).map_err(|e| ReferenceError::Malformed(e.to_string()))?;
    let mut task = Task {
        parents: BTreeMap::new(),
        objects: BTreeMap::new(),
        actions: Vec::new(),
        init: World { atoms: BTreeSet::new(), fluents: BTreeMap::new() },
        goal: Cond::And(Vec::new()),
    };
    for s in sections(&d)? {
        let parts = s.list().unwrap_or(&[]);
        match s.head() {
            Some(":types") => task.parents.extend(typed(&parts[1..])?),
            Some(":constants") => task.objects.extend(typed(&parts[1..])?),
            Some(":action") => {
                let name = parts.get(1).and_then(Sexpr::atom).map_or_else(|| malformed(s), Ok)?.to_string();
                let mut action = Action { name, params: Vec::new(), pre: Cond::And(Vec::new()), effects: Vec::new() };
                for pair in parts[2..].chunks(2) {
                    let [key, value] = pair else { return malformed(s) };
                    match key.atom() {
                        Some(":parameters") => action.params = typed(value.list().unwrap_or(&[]))?,
                        Some(":precondition") => action.pre = cond(value)?,
                        Some(":effect") => effects(value, &mut action.effects)?,
                        _ => return malformed(key),
                    }
                }
                task.actions.push(action);
            }
            _ => {}
        }
    }
    for s in sections(&p)? {
        let parts = s.list().unwrap_or(&[]);
        match s.head() {
            Some(":objects") => task.objects.extend(typed(&parts[1..])?),
            Some(":init") => {
                for fact in &parts[1..] {
                    let items = fact.list().map_or_else(|| malformed(fact), Ok)?;
                    if fact.head() == Some("=") && items.len() == 3 {
                        let key = items[1].list().map_or_else(|| malformed(fact), Ok)?;
                        let key: Atom = key.iter().filter_map(Sexpr::atom).map(str::to_string).collect();
                        let value = items[2].atom().and_then(parse_number).map_or_else(|| malformed(fact), Ok)?;
                        task.init.fluents.insert(key, value);
                    } else {
                        task.init.atoms.insert(items.iter().filter_map(Sexpr::atom).map(str::to_string).collect());
                    }
                }
            }
            Some(":goal") if parts.len() == 2 => task.goal = cond(&parts[1])?,
            _ => {}
        }
    }
    Ok(task)
}

type Binding = BTreeMap<String, String>;

impl Task {
    fn is_a(&self, ty: &str, want: &str) -> bool {
        let mut cur = ty;
        for _ in 0..=self.parents.len() {
            if cur == want || want == "object" {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    fn objects_of<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.objects.iter().filter(move |(_, t)| self.is_a(t, ty)).map(|(o, _)| o)
    }

    fn ground(name: &str, a: &[Arg], b: &Binding) -> Option<Atom> {
        let mut out = vec![name.to_string()];
        for x in a {
            out.push(match x {
                Arg::Var(v) => b.get(v)?.clone(),
                Arg::Obj(o) => o.clone(),
            });
        }
        Some(out)
    }

    fn eval(&self, e: &Expr, w: &World, b: &Binding) -> Option<Number> {
        match e {
            Expr::Num(n) => Some(*n),
            Expr::Fluent(name, a) => w.fluents.get(&Self::ground(name, a, b)?).copied(),
            Expr::Neg(x) => Number::from_int(0).checked_sub(&self.eval(x, w, b)?),
            Expr::Bin(op, x, y) => {
                let (x, y) = (self.eval(x, w, b)?, self.eval(y, w, b)?);
                match op {
                    '+' => x.checked_add(&y),
                    '-' => x.checked_sub(&y),
                    '*' => x.checked_mul(&y),
                    _ => x.checked_div(&y),
                }
            }
        }
    }

    fn holds(&self, c: &Cond, w: &World, b: &mut Binding) -> bool {
        match c {
            Cond::And(items) => items.iter().all(|i| self.holds(i, w, b)),
            Cond::Atom(n, a) => Self::ground(n, a, b).is_some_and(|g| w.atoms.contains(&g)),
            Cond::Not(n, a) => Self::ground(n, a, b).is_some_and(|g| !w.atoms.contains(&g)),
            Cond::Cmp(op, x, y) => {
                let (Some(x), Some(y)) = (self.eval(x, w, b), self.eval(y, w, b)) else {
                    return false;
                };
                match op.as_str() {
                    "<" => x < y,
                    "<=" => x <= y,
                    ">" => x > y,
                    ">=" => x >= y,
                    _ => x == y,
                }
            }
            Cond::Exists(vars, body) => self.exists(vars, body, w, b),
        }
    }

    fn exists(&self, vars: &[(String, String)], body: &Cond, w: &World, b: &mut Binding) -> bool {
        let Some(((v, ty), rest)) = vars.split_first() else {
            return self.holds(body, w, b);
        };
        let saved = b.get(v).cloned();
        let mut found = false;
        for o in self.objects_of(ty) {
            b.insert(v.clone(), o.clone());
            if self.exists(rest, body, w, b) {
                found = true;
                break;
            }
        }
        match saved {
            Some(s) => b.insert(v.clone(), s),
            None => b.remove(v),
        };
        found
    }

    /// Applies a ground action; `None` when it is inapplicable.
    fn apply(&self, action: &Action, w: &World, b: &Binding) -> Option<World> {
        let mut scratch = b.clone();
        if !self.holds(&action.pre, w, &mut scratch) {
            return None;
        }
        let mut updates = Vec::new();
        for e in &action.effects {
            if let Effect::Update(op, name, a, x) = e {
                let key = Self::ground(name, a, b)?;
                let rhs = self.eval(x, w, b)?;
                let value = match op.as_str() {
                    "assign" => rhs,
                    "increase" => w.fluents.get(&key)?.checked_add(&rhs)?,
                    _ => w.fluents.get(&key)?.checked_sub(&rhs)?,
                };
                updates.push((key, value));
            }
        }
        let mut next = w.clone();
        for e in &action.effects {
            if let Effect::Del(n, a) = e {
                next.atoms.remove(&Self::ground(n, a, b)?);
            }
        }
        for e in &action.effects {
            if let Effect::Add(n, a) = e {
                next.atoms.insert(Self::ground(n, a, b)?);
            }
        }
        next.fluents.extend(updates);
        Some(next)
    }

    fn groundings(&self, action: &Action) -> Vec<Binding> {
        let mut out = vec![Binding::new()];
        for (v, ty) in &action.params {
            let choices: Vec<&String> = self.objects_of(ty).collect();
            out = out
                .into_iter()
                .flat_map(|b| {
                    choices.iter().map(move |o| {
                        let mut b = b.clone();
                        b.insert(v.clone(), (*o).clone());
                        b
                    })
                })
                .collect();
        }
        out
    }

    fn goal_holds(&self, w: &World) -> bool {
        self.holds(&self.goal, w, &mut Binding::new())
    }
}

fn to_plan_action(action: &Action, b: &Binding) -> PlanAction {
    PlanAction { name: action.name.clone(), args: action.params.iter().map(|(v, _)| b[v].clone()).collect() }
}

/// Shortest plan by breadth-first search; `Ok(None)` when the reachable
/// space is exhausted without reaching the goal.
pub fn solve(domain: &str, problem: &str, max_expanded: usize) -> Result<Option<Vec<PlanAction>>, ReferenceError> {
    let task = load(domain, problem)?;
    if task.goal_holds(&task.init) {
        return Ok(Some(Vec::new()));
    }
    let ground: Vec<(&Action, Vec<Binding>)> = task.actions.iter().map(|a| (a, task.groundings(a))).collect();
    let mut parent: Vec<(usize, PlanAction)> = vec![(usize::MAX, PlanAction { name: String::new(), args: Vec::new() })];
    let mut worlds = vec![task.init.clone()];
    let mut seen: BTreeSet<World> = BTreeSet::from([task.init.clone()]);
    let mut queue = VecDeque::from([0usize]);
    let mut expanded = 0;
    while let Some(idx) = queue.pop_front() {
        if expanded == max_expanded {
            return Err(ReferenceError::Limit(max_expanded));
        }
        expanded += 1;
        let w = worlds[idx].clone();
        for (action, bindings) in &ground {
            for b in bindings {
                let Some(next) = task.apply(action, &w, b) else { continue };
                if !seen.insert(next.clone()) {
                    continue;
                }
                let goal = task.goal_holds(&next);
                worlds.push(next);
                parent.push((idx, to_plan_action(action, b)));
                let node = worlds.len() - 1;
                if goal {
                    let mut plan = Vec::new();
                    let mut cur = node;
                    while cur != 0 {
                        plan.push(parent[cur].1.clone());
                        cur = parent[cur].0;
                    }
                    plan.reverse();
                    return Ok(Some(plan));
                }
                queue.push_back(node);
            }
        }
    }
    Ok(None)
}

/// Executes `plan` under PDDL semantics and checks the goal at the end.
pub fn validate(domain: &str, problem: &str, plan: &[PlanAction]) -> Result<(), ReferenceError> {
    let task = load(domain, problem)?;
    let mut w = task.init.clone();
    for (index, step) in plan.iter().enumerate() {
        let invalid = |reason: &str| ReferenceError::Invalid { index, action: step.to_string(), reason: reason.into() };
        let action = task.actions.iter().find(|a| a.name == step.name).ok_or_else(|| invalid("unknown action"))?;
        if action.params.len() != step.args.len() {
            return Err(invalid("wrong number of arguments"));
        }
        let mut b = Binding::new();
        for ((v, ty), o) in action.params.iter().zip(&step.args) {
            match task.objects.get(o) {
                Some(t) if task.is_a(t, ty) => {
                    b.insert(v.clone(), o.clone());
                }
                _ => return Err(invalid("argument has the wrong type")),
            }
        }
        w = task.apply(action, &w, &b).ok_or_else(|| invalid("not applicable"))?;
    }
    if !task.goal_holds(&w) {
        return Err(ReferenceError::Invalid { index: plan.len(), action: String::new(), reason: "goal not reached".into() });
    }
    Ok(())
}
