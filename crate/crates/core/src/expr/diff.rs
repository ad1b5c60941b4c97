use std::collections::HashMap;

use super::{Expr, Func, Node};

/// Symbolic partial derivative; shared subexpressions are differentiated once.
pub(super) fn differentiate(e: &Expr, axis: usize) -> Expr {
    let mut memo = HashMap::new();
    rec(e, axis, &mut memo)
}

fn rec(e: &Expr, axis: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.ptr_id()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Num(_) | Node::Pi | Node::E => Expr::zero(),
        Node::Var(i) => {
            if *i == axis {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Neg(a) => Expr::neg(&rec(a, axis, memo)),
        Node::Add(a, b) => Expr::add(&rec(a, axis, memo), &rec(b, axis, memo)),
        Node::Sub(a, b) => Expr::sub(&rec(a, axis, memo), &rec(b, axis, memo)),
        Node::Mul(a, b) => {
            let da = rec(a, axis, memo);
            let db = rec(b, axis, memo);
            Expr::add(&Expr::mul(&da, b), &Expr::mul(a, &db))
        }
        Node::Div(a, b) => {
            let da = rec(a, axis, memo);
            let db = rec(b, axis, memo);
            if db.is_zero() {
                Expr::div(&da, b)
            } else {
                let num = Expr::sub(&Expr::mul(&da, b), &Expr::mul(a, &db));
                Expr::div(&num, &Expr::powi(b, 2))
            }
        }
        Node::Pow(a, k) => {
            let da = rec(a, axis, memo);
            let outer = Expr::mul(&Expr::num(*k as f64), &Expr::powi(a, k - 1));
            Expr::mul(&outer, &da)
        }
        Node::Call(f, a) => {
            let da = rec(a, axis, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::neg(&Expr::call(Func::Sin, a)),
                    Func::Exp => e.clone(),
                    Func::Sqrt => Expr::div(&Expr::num(0.5), e),
                    Func::Log => Expr::div(&Expr::one(), a),
                };
                Expr::mul(&outer, &da)
            }
        }
    };
    memo.insert(e.ptr_id(), d.clone());
    d
}
