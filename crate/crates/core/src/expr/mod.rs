//! The small expression language used to describe candidate functions.
//!
//! Expressions are parsed once into an immutable [`Expr`] tree and then
//! evaluated at many points. Evaluation never produces NaN or infinity:
//! every domain fault is reported as an [`EvalError`].

mod parse;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse, ParseError};

/// A free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    X,
    Y,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => f.write_str("x"),
            Var::Y => f.write_str("y"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Built-in functions. `Min` and `Max` take two arguments, the rest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Point at which an expression is evaluated. `y` is absent for
/// univariate functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub x: f64,
    pub y: Option<f64>,
}

impl EvalPoint {
    pub fn x(x: f64) -> Self {
        EvalPoint { x, y: None }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        EvalPoint { x, y: Some(y) }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self.y {
            Some(y) => vec![self.x, y],
            None => vec![self.x],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalErrorKind {
    DivisionByZero,
    LogDomain,
    SqrtDomain,
    PowDomain,
    Overflow,
    MissingVariable,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogDomain => "log of a nonpositive number",
            EvalErrorKind::SqrtDomain => "sqrt of a negative number",
            EvalErrorKind::PowDomain => "negative base with non-integer exponent",
            EvalErrorKind::Overflow => "non-finite result",
            EvalErrorKind::MissingVariable => "variable not bound at this point",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{kind} at {point:?}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub point: EvalPoint,
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Number(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Exact set of variables occurring in the expression.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Number(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn is_univariate(&self) -> bool {
        !self.free_vars().contains(&Var::Y)
    }

    pub fn eval(&self, p: EvalPoint) -> Result<f64, EvalError> {
        self.eval_at(p.x, p.y)
            .map_err(|kind| EvalError { kind, point: p })
    }

    fn eval_at(&self, x: f64, y: Option<f64>) -> Result<f64, EvalErrorKind> {
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EvalErrorKind::Overflow)
            }
        };
        match self {
            Expr::Number(v) => finite(*v),
            Expr::Var(Var::X) => finite(x),
            Expr::Var(Var::Y) => finite(y.ok_or(EvalErrorKind::MissingVariable)?),
            Expr::Neg(e) => Ok(-e.eval_at(x, y)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval_at(x, y)?;
                let b = r.eval_at(x, y)?;
                match op {
                    BinOp::Add => finite(a + b),
                    BinOp::Sub => finite(a - b),
                    BinOp::Mul => finite(a * b),
                    BinOp::Div if b == 0.0 => Err(EvalErrorKind::DivisionByZero),
                    BinOp::Div => finite(a / b),
                    BinOp::Pow => finite(pow(a, b)?),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval_at(x, y)?;
                match func {
                    Func::Sin => finite(a.sin()),
                    Func::Cos => finite(a.cos()),
                    Func::Exp => finite(a.exp()),
                    Func::Log if a <= 0.0 => Err(EvalErrorKind::LogDomain),
                    Func::Log => finite(a.ln()),
                    Func::Sqrt if a < 0.0 => Err(EvalErrorKind::SqrtDomain),
                    Func::Sqrt => finite(a.sqrt()),
                    Func::Abs => finite(a.abs()),
                    Func::Min => Ok(a.min(args[1].eval_at(x, y)?)),
                    Func::Max => Ok(a.max(args[1].eval_at(x, y)?)),
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            Expr::Number(v) if v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn pow(base: f64, exp: f64) -> Result<f64, EvalErrorKind> {
    if base == 0.0 && exp < 0.0 {
        return Err(EvalErrorKind::DivisionByZero);
    }
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(EvalErrorKind::PowDomain);
    }
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        Ok(base.powi(exp as i32))
    } else {
        Ok(base.powf(exp))
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the minimum parentheses needed for the output to reparse
/// to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, e.precedence() < 4)
            }
            Expr::Binary(op, l, r) => {
                let (lp, rp) = match op {
                    BinOp::Add | BinOp::Sub => (l.precedence() < 1, r.precedence() <= 1),
                    BinOp::Mul | BinOp::Div => (l.precedence() < 2, r.precedence() <= 2),
                    BinOp::Pow => (l.precedence() < 5, r.precedence() < 3),
                };
                write_operand(f, l, lp)?;
                match op {
                    BinOp::Pow => f.write_str(op.symbol())?,
                    _ => write!(f, " {} ", op.symbol())?,
                }
                write_operand(f, r, rp)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
