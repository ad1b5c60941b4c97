use std::collections::HashMap;

use super::{Expr, Func, Node};
use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Const(u64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Call(Func, usize),
}

/// Straight-line evaluation program for a batch of expressions.
///
/// Structurally identical subexpressions (across all outputs) share one
/// slot, so a matrix of derivatives costs roughly one pass over the union
/// of their distinct nodes per point.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    dim: usize,
}

struct Builder {
    ops: Vec<Op>,
    dedup: HashMap<Op, usize>,
    by_ptr: HashMap<usize, usize>,
}

impl Builder {
    fn push(&mut self, op: Op) -> usize {
        let op = match op {
            Op::Add(a, b) if a > b => Op::Add(b, a),
            Op::Mul(a, b) if a > b => Op::Mul(b, a),
            op => op,
        };
        if let Some(&slot) = self.dedup.get(&op) {
            return slot;
        }
        self.ops.push(op);
        self.dedup.insert(op, self.ops.len() - 1);
        self.ops.len() - 1
    }

    fn lower(&mut self, e: &Expr) -> usize {
        if let Some(&slot) = self.by_ptr.get(&e.ptr_id()) {
            return slot;
        }
        let op = match e.node() {
            Node::Num(v) => Op::Const(v.to_bits()),
            Node::Pi => Op::Const(std::f64::consts::PI.to_bits()),
            Node::E => Op::Const(std::f64::consts::E.to_bits()),
            Node::Var(i) => Op::Var(*i),
            Node::Neg(a) => Op::Neg(self.lower(a)),
            Node::Add(a, b) => Op::Add(self.lower(a), self.lower(b)),
            Node::Sub(a, b) => Op::Sub(self.lower(a), self.lower(b)),
            Node::Mul(a, b) => Op::Mul(self.lower(a), self.lower(b)),
            Node::Div(a, b) => Op::Div(self.lower(a), self.lower(b)),
            Node::Pow(a, k) => Op::Pow(self.lower(a), *k),
            Node::Call(f, a) => Op::Call(*f, self.lower(a)),
        };
        let slot = self.push(op);
        self.by_ptr.insert(e.ptr_id(), slot);
        slot
    }
}

impl Program {
    /// Compiles `exprs` for evaluation at points with `dim` coordinates.
    pub fn compile(exprs: &[Expr], dim: usize) -> Program {
        let mut b = Builder {
            ops: Vec::new(),
            dedup: HashMap::new(),
            by_ptr: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| b.lower(e)).collect();
        Program {
            ops: b.ops,
            outputs,
            dim,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_slots(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Scratch buffer sized for [`Program::eval_into`].
    pub fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.ops.len()]
    }

    /// Evaluates all outputs at `x`, writing them to `out`.
    pub fn eval_into(
        &self,
        x: &[f64],
        scratch: &mut [f64],
        out: &mut [f64],
    ) -> Result<(), EvalError> {
        for (i, op) in self.ops.iter().enumerate() {
            let v = match *op {
                Op::Const(bits) => f64::from_bits(bits),
                Op::Var(k) => *x.get(k).ok_or(EvalError::MissingVariable(k + 1))?,
                Op::Neg(a) => -scratch[a],
                Op::Add(a, b) => scratch[a] + scratch[b],
                Op::Sub(a, b) => scratch[a] - scratch[b],
                Op::Mul(a, b) => scratch[a] * scratch[b],
                Op::Div(a, b) => {
                    if scratch[b] == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    scratch[a] / scratch[b]
                }
                Op::Pow(a, k) => {
                    if scratch[a] == 0.0 && k < 0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    scratch[a].powi(k)
                }
                Op::Call(f, a) => f.apply(scratch[a])?,
            };
            scratch[i] = v;
        }
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[slot];
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = self.scratch();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(x, &mut scratch, &mut out)?;
        Ok(out)
    }
}
