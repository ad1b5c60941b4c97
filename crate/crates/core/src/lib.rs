//! Almost-complex and hypercomplex structures on coordinate patches.

pub mod brackets;
pub mod calculus;
pub mod csvio;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod field;
pub mod fixtures;
pub mod grid;
pub mod holomorphy;
pub mod hypercomplex;
pub mod linalg;
pub mod par;
pub mod report;
pub mod spencer;
pub mod structures;

pub use error::{Error, EvalError, Result};
pub use expr::{parse_expr, Expr, Program};
pub use field::{ComplexField, DiffMode, Evaluator, MatrixField, ScalarField, Table};
pub use grid::Patch;
