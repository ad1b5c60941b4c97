//! Coefficient expressions over the patch coordinates `x1 .. xd`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" [ "+" | "-" ] integer ] ;
//! primary = number | "pi" | "e" | variable
//!         | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "exp" | "sqrt" | "log" ;
//! variable = "x" integer ;            (* 1-based, at most the patch dimension *)
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! Exponents are integer literals only, so differentiation stays inside the
//! grammar. A minus sign written directly in front of a number literal that is
//! not raised to a power is folded into the literal.
//!
//! Expressions are immutable DAGs behind `Arc`; the smart constructors fold
//! constants and drop neutral elements, which keeps symbolic derivatives small.

mod diff;
mod parse;
mod program;

use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::error::{Error, EvalError, Result};

pub use parse::parse_expr;
pub use program::Program;

/// Elementary functions available in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    /// Natural logarithm.
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return None,
        })
    }

    fn apply(self, a: f64) -> std::result::Result<f64, EvalError> {
        Ok(match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Sqrt => {
                if a < 0.0 {
                    return Err(EvalError::SqrtOfNegative);
                }
                a.sqrt()
            }
            Func::Log => {
                if a <= 0.0 {
                    return Err(EvalError::LogOfNonPositive);
                }
                a.ln()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    E,
    /// Zero-based coordinate index; printed as `x{index + 1}`.
    Var(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Call(Func, Expr),
}

/// Shared expression node. Equality is structural.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn new(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn num(value: f64) -> Expr {
        Expr::new(Node::Num(value))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    pub fn pi() -> Expr {
        Expr::new(Node::Pi)
    }

    pub fn e() -> Expr {
        Expr::new(Node::E)
    }

    /// Coordinate `x{axis + 1}`.
    pub fn var(axis: usize) -> Expr {
        Expr::new(Node::Var(axis))
    }

    pub fn as_num(&self) -> Option<f64> {
        match *self.0 {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn neg(a: &Expr) -> Expr {
        match a.node() {
            Node::Num(v) => Expr::num(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(a.clone())),
        }
    }

    pub fn add(a: &Expr, b: &Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::num(x + y),
            (Some(0.0), _) => b.clone(),
            (_, Some(0.0)) => a.clone(),
            _ => match b.node() {
                Node::Neg(inner) => Expr::new(Node::Sub(a.clone(), inner.clone())),
                _ => Expr::new(Node::Add(a.clone(), b.clone())),
            },
        }
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::num(x - y),
            (Some(0.0), _) => Expr::neg(b),
            (_, Some(0.0)) => a.clone(),
            _ => match b.node() {
                Node::Neg(inner) => Expr::new(Node::Add(a.clone(), inner.clone())),
                _ => Expr::new(Node::Sub(a.clone(), b.clone())),
            },
        }
    }

    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::num(x * y),
            (Some(0.0), _) => Expr::zero(),
            (_, Some(0.0)) => Expr::zero(),
            (Some(1.0), _) => b.clone(),
            (_, Some(1.0)) => a.clone(),
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            _ => Expr::new(Node::Mul(a.clone(), b.clone())),
        }
    }

    /// Quotient. `0 / b` folds to `0` without inspecting `b`.
    pub fn div(a: &Expr, b: &Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::num(x / y),
            (Some(0.0), _) => Expr::zero(),
            (_, Some(1.0)) => a.clone(),
            _ => Expr::new(Node::Div(a.clone(), b.clone())),
        }
    }

    pub fn powi(a: &Expr, k: i32) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        if k == 1 {
            return a.clone();
        }
        match a.as_num() {
            Some(x) if x != 0.0 || k > 0 => Expr::num(x.powi(k)),
            _ => Expr::new(Node::Pow(a.clone(), k)),
        }
    }

    pub fn call(f: Func, a: &Expr) -> Expr {
        match (f, a.as_num()) {
            (Func::Sqrt, Some(x)) if x >= 0.0 => Expr::num(x.sqrt()),
            (Func::Sqrt, _) => Expr::new(Node::Call(f, a.clone())),
            (Func::Log, Some(x)) if x > 0.0 => Expr::num(x.ln()),
            (Func::Log, _) => Expr::new(Node::Call(f, a.clone())),
            (_, Some(x)) => Expr::num(f.apply(x).expect("total function")),
            _ => Expr::new(Node::Call(f, a.clone())),
        }
    }

    /// Sum of all terms, folding through the simplifying `add`.
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a Expr>) -> Expr {
        terms
            .into_iter()
            .fold(Expr::zero(), |acc, t| Expr::add(&acc, t))
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut best = None;
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr_id()) {
                continue;
            }
            match e.node() {
                Node::Var(i) => best = best.max(Some(*i)),
                Node::Num(_) | Node::Pi | Node::E => {}
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => stack.push(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        best
    }

    /// Fails when a variable beyond `dim` coordinates is referenced.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.max_var() {
            Some(i) if i >= dim => Err(Error::VariableOutOfRange { index: i + 1, dim }),
            _ => Ok(()),
        }
    }

    /// Direct recursive evaluation. Use [`Program`] for repeated evaluation.
    pub fn eval(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        Ok(match self.node() {
            Node::Num(v) => *v,
            Node::Pi => std::f64::consts::PI,
            Node::E => std::f64::consts::E,
            Node::Var(i) => *x.get(*i).ok_or(EvalError::MissingVariable(i + 1))?,
            Node::Neg(a) => -a.eval(x)?,
            Node::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Node::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Node::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Node::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(x)? / d
            }
            Node::Pow(a, k) => {
                let base = a.eval(x)?;
                if base == 0.0 && *k < 0 {
                    return Err(EvalError::DivisionByZero);
                }
                base.powi(*k)
            }
            Node::Call(f, a) => f.apply(a.eval(x)?)?,
        })
    }

    /// Exact partial derivative along `axis` (zero-based).
    pub fn diff(&self, axis: usize) -> Expr {
        diff::differentiate(self, axis)
    }

    /// Replaces every variable `x{i+1}` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        let mut memo = std::collections::HashMap::new();
        substitute_rec(self, subs, &mut memo)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn substitute_rec(
    e: &Expr,
    subs: &[Expr],
    memo: &mut std::collections::HashMap<usize, Expr>,
) -> Expr {
    if let Some(done) = memo.get(&e.ptr_id()) {
        return done.clone();
    }
    let out = match e.node() {
        Node::Var(i) => subs.get(*i).cloned().unwrap_or_else(|| e.clone()),
        Node::Num(_) | Node::Pi | Node::E => e.clone(),
        Node::Neg(a) => Expr::neg(&substitute_rec(a, subs, memo)),
        Node::Add(a, b) => Expr::add(&substitute_rec(a, subs, memo), &substitute_rec(b, subs, memo)),
        Node::Sub(a, b) => Expr::sub(&substitute_rec(a, subs, memo), &substitute_rec(b, subs, memo)),
        Node::Mul(a, b) => Expr::mul(&substitute_rec(a, subs, memo), &substitute_rec(b, subs, memo)),
        Node::Div(a, b) => Expr::div(&substitute_rec(a, subs, memo), &substitute_rec(b, subs, memo)),
        Node::Pow(a, k) => Expr::powi(&substitute_rec(a, subs, memo), *k),
        Node::Call(f, a) => Expr::call(*f, &substitute_rec(a, subs, memo)),
    };
    memo.insert(e.ptr_id(), out.clone());
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self.node() {
            Node::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Node::Num(v) => write!(f, "{v}"),
            Node::Pi => f.write_str("pi"),
            Node::E => f.write_str("e"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                f.write_str("-")?;
                if a.as_num().is_some() {
                    // keeps `-(3)` distinct from the folded literal `-3`
                    write!(f, "({a})")
                } else {
                    wrap(f, a, 3)
                }
            }
            Node::Add(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" + ")?;
                wrap(f, b, 2)
            }
            Node::Sub(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" - ")?;
                wrap(f, b, 2)
            }
            Node::Mul(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("*")?;
                wrap(f, b, 3)
            }
            Node::Div(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("/")?;
                wrap(f, b, 3)
            }
            Node::Pow(a, k) => {
                wrap(f, a, 5)?;
                write!(f, "^{k}")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(&self, &rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(&self, &Expr::num(rhs))
            }
        }
        impl ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(self, &Expr::num(rhs))
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_fold_neutral_elements() {
        let x = Expr::var(0);
        assert_eq!(&x + &Expr::zero(), x);
        assert_eq!(&x * 1.0, x);
        assert!((&x * 0.0).is_zero());
        assert_eq!(Expr::num(2.0) * Expr::num(3.0), Expr::num(6.0));
        assert_eq!(-(-x.clone()), x);
        assert_eq!(Expr::powi(&x, 1), x);
        assert_eq!(Expr::powi(&x, 0), Expr::one());
    }

    #[test]
    fn eval_reports_runtime_errors() {
        let inv = parse_expr("1/x1", 1).unwrap();
        assert_eq!(inv.eval(&[0.0]), Err(EvalError::DivisionByZero));
        let root = parse_expr("sqrt(x1)", 1).unwrap();
        assert_eq!(root.eval(&[-1.0]), Err(EvalError::SqrtOfNegative));
        assert_eq!(root.eval(&[4.0]), Ok(2.0));
    }

    #[test]
    fn substitution_composes() {
        let h = parse_expr("x1^2 - x2^2", 2).unwrap();
        let phi = [parse_expr("x1 + x2", 2).unwrap(), parse_expr("x1 - x2", 2).unwrap()];
        let composed = h.substitute(&phi);
        // (a+b)^2 - (a-b)^2 = 4ab
        let v = composed.eval(&[0.3, -1.7]).unwrap();
        assert!((v - 4.0 * 0.3 * -1.7).abs() < 1e-14);
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = parse_expr("(x1 + x2)*x3 - -x1^2 / (x2 - x3)", 3).unwrap();
        assert_eq!(e.to_string(), "(x1 + x2)*x3 - -x1^2/(x2 - x3)");
        let n = Expr::powi(&Expr::num(-2.0), 3);
        assert_eq!(n, Expr::num(-8.0));
        let p = Expr::new(Node::Pow(Expr::num(-2.0), 3));
        assert_eq!(p.to_string(), "(-2)^3");
    }
}
