//! The built-in function library available to computations.
//!
//! Each function denotes a set of tuples. A test function's tuples end in a
//! boolean and the call succeeds only when that boolean is `true`; a value
//! function's last argument receives the tuple's final element. When no tuple
//! exists for the given inputs (a non-numeric argument, division by zero,
//! overflow) the call fails.

use crate::number::Number;
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    /// Returns a boolean; all arguments are inputs.
    Test,
    /// Binds (or checks) the last argument.
    Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    LessThan,
    LessOrEqual,
    GreaterThan,
    GreaterOrEqual,
    Equal,
    NotEqual,
    Add,
    Subtract,
    Multiply,
    Divide,
    Min,
    Max,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinSpec {
    pub builtin: Builtin,
    pub name: &'static str,
    /// Total argument count, including the result slot of value functions.
    pub arity: usize,
    pub kind: BuiltinKind,
}

pub const LIBRARY: &[BuiltinSpec] = &[
    BuiltinSpec { builtin: Builtin::LessThan, name: "less_than", arity: 2, kind: BuiltinKind::Test },
    BuiltinSpec { builtin: Builtin::LessOrEqual, name: "less_or_equal", arity: 2, kind: BuiltinKind::Test },
    BuiltinSpec { builtin: Builtin::GreaterThan, name: "greater_than", arity: 2, kind: BuiltinKind::Test },
    BuiltinSpec { builtin: Builtin::GreaterOrEqual, name: "greater_or_equal", arity: 2, kind: BuiltinKind::Test },
    BuiltinSpec { builtin: Builtin::Equal, name: "equal", arity: 2, kind: BuiltinKind::Test },
    BuiltinSpec { builtin: Builtin::NotEqual, name: "not_equal", arity: 2, kind: BuiltinKind::Test },
    BuiltinSpec { builtin: Builtin::Add, name: "add", arity: 3, kind: BuiltinKind::Value },
    BuiltinSpec { builtin: Builtin::Subtract, name: "subtract", arity: 3, kind: BuiltinKind::Value },
    BuiltinSpec { builtin: Builtin::Multiply, name: "multiply", arity: 3, kind: BuiltinKind::Value },
    BuiltinSpec { builtin: Builtin::Divide, name: "divide", arity: 3, kind: BuiltinKind::Value },
    BuiltinSpec { builtin: Builtin::Min, name: "min", arity: 3, kind: BuiltinKind::Value },
    BuiltinSpec { builtin: Builtin::Max, name: "max", arity: 3, kind: BuiltinKind::Value },
    BuiltinSpec { builtin: Builtin::Abs, name: "abs", arity: 2, kind: BuiltinKind::Value },
];

pub fn lookup(name: &str) -> Option<&'static BuiltinSpec> {
    LIBRARY.iter().find(|b| b.name == name)
}

/// Result of evaluating a built-in on ground inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Holds(bool),
    Value(Term),
    /// No tuple in the function's denotation for these inputs.
    Undefined,
}

impl Builtin {
    /// `inputs` excludes the result slot of value functions.
    pub fn eval(self, inputs: &[Term]) -> Outcome {
        use Builtin::*;
        match self {
            Equal => return Outcome::Holds(inputs[0] == inputs[1]),
            NotEqual => return Outcome::Holds(inputs[0] != inputs[1]),
            _ => {}
        }
        let Some(nums) = inputs.iter().map(Term::as_number).collect::<Option<Vec<Number>>>() else {
            return Outcome::Undefined;
        };
        let value = |v: Option<Number>| v.map_or(Outcome::Undefined, |n| Outcome::Value(Term::Number(n)));
        match self {
            LessThan => Outcome::Holds(nums[0] < nums[1]),
            LessOrEqual => Outcome::Holds(nums[0] <= nums[1]),
            GreaterThan => Outcome::Holds(nums[0] > nums[1]),
            GreaterOrEqual => Outcome::Holds(nums[0] >= nums[1]),
            Add => value(nums[0].checked_add(&nums[1])),
            Subtract => value(nums[0].checked_sub(&nums[1])),
            Multiply => value(nums[0].checked_mul(&nums[1])),
            Divide => value(nums[0].checked_div(&nums[1])),
            Min => value(Some(nums[0].min(nums[1]))),
            Max => value(Some(nums[0].max(nums[1]))),
            Abs => value(nums[0].checked_abs()),
            Equal | NotEqual => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: i64) -> Term {
        Term::num(v)
    }

    #[test]
    fn tests_compare_exactly() {
        assert_eq!(Builtin::LessThan.eval(&[n(2), n(20)]), Outcome::Holds(true));
        assert_eq!(Builtin::GreaterThan.eval(&[n(0), n(5)]), Outcome::Holds(false));
        assert_eq!(Builtin::GreaterOrEqual.eval(&[n(5), n(5)]), Outcome::Holds(true));
        assert_eq!(Builtin::Equal.eval(&[Term::lit("a"), Term::lit("a")]), Outcome::Holds(true));
        assert_eq!(Builtin::NotEqual.eval(&[Term::lit("a"), n(1)]), Outcome::Holds(true));
    }

    #[test]
    fn arithmetic() {
        assert_eq!(Builtin::Subtract.eval(&[n(23), n(1)]), Outcome::Value(n(22)));
        assert_eq!(Builtin::Min.eval(&[n(3), n(-1)]), Outcome::Value(n(-1)));
        assert_eq!(Builtin::Abs.eval(&[n(-4)]), Outcome::Value(n(4)));
        let half = Term::Number(Number::from_ratio(1, 2).unwrap());
        assert_eq!(Builtin::Divide.eval(&[n(1), n(2)]), Outcome::Value(half));
    }

    #[test]
    fn undefined_tuples() {
        assert_eq!(Builtin::Divide.eval(&[n(1), n(0)]), Outcome::Undefined);
        assert_eq!(Builtin::LessThan.eval(&[Term::lit("a"), n(0)]), Outcome::Undefined);
        assert_eq!(Builtin::Add.eval(&[n(i64::MAX), n(1)]), Outcome::Undefined);
    }

    #[test]
    fn library_names_are_unique() {
        for (i, a) in LIBRARY.iter().enumerate() {
            assert!(LIBRARY[i + 1..].iter().all(|b| b.name != a.name));
            assert_eq!(lookup(a.name).unwrap().builtin, a.builtin);
        }
    }
}
