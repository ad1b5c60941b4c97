//! The twisted bracket `[X,Y]_J = X∘JY − Y∘JX` acting on functions.
//!
//! For `ω = J*du` the identity `dω(X,Y) = X(ω(Y)) − Y(ω(X)) − ω([X,Y])`
//! becomes `[X,Y]_J(u) − (J[X,Y])(u) = dω(X,Y)`, so the potential equation
//! reads `[X,Y]_J(u) = J[X,Y](u)`. The tangent action is
//! `(JX)^k = Σ_j j_tan[k][j] X^j`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ComplexField, DiffMode, Evaluator, ScalarField};
use crate::grid::Patch;
use crate::par;
use crate::report::ResidualReport;
use crate::structures::AlmostComplexStructure;

/// Complex vector field `Σ X^k ∂_k`.
#[derive(Debug, Clone)]
pub struct VectorFieldC {
    comps: Vec<ComplexField>,
}

impl VectorFieldC {
    pub fn new(comps: Vec<ComplexField>) -> Result<VectorFieldC> {
        let Some(first) = comps.first() else {
            return Err(Error::DimensionMismatch("vector field without components".into()));
        };
        let patch = first.patch().clone();
        if comps.len() != patch.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} components on a {}-dimensional patch",
                comps.len(),
                patch.dim()
            )));
        }
        if comps.iter().any(|c| **c.patch() != *patch) {
            return Err(Error::PatchMismatch);
        }
        Ok(VectorFieldC { comps })
    }

    /// Components given as `(re, im)` expression pairs.
    pub fn parse(patch: &Arc<Patch>, comps: &[(&str, &str)]) -> Result<VectorFieldC> {
        VectorFieldC::new(
            comps
                .iter()
                .map(|(re, im)| ComplexField::parse(patch, re, im))
                .collect::<Result<_>>()?,
        )
    }

    /// Real field with the given components.
    pub fn real(comps: Vec<ScalarField>) -> Result<VectorFieldC> {
        VectorFieldC::new(comps.into_iter().map(ComplexField::real).collect())
    }

    /// `∂/∂x_{axis+1}`.
    pub fn coordinate(patch: &Arc<Patch>, axis: usize) -> VectorFieldC {
        let comps = (0..patch.dim())
            .map(|k| ComplexField::constant(patch, if k == axis { 1.0 } else { 0.0 }, 0.0))
            .collect();
        VectorFieldC { comps }
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.comps[0].patch()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[ComplexField] {
        &self.comps
    }

    pub fn is_exact(&self) -> bool {
        self.comps.iter().all(ComplexField::is_exact)
    }

    pub fn add(&self, o: &VectorFieldC) -> Result<VectorFieldC> {
        VectorFieldC::new(
            self.comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.add(b))
                .collect::<Result<_>>()?,
        )
    }

    pub fn sub(&self, o: &VectorFieldC) -> Result<VectorFieldC> {
        VectorFieldC::new(
            self.comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.sub(b))
                .collect::<Result<_>>()?,
        )
    }

    /// Multiplication by the constant `a + ib`.
    pub fn scale(&self, a: f64, b: f64) -> Result<VectorFieldC> {
        VectorFieldC::new(self.comps.iter().map(|c| c.scale(a, b)).collect::<Result<_>>()?)
    }

    /// Multiplication by a function.
    pub fn times(&self, f: &ComplexField) -> Result<VectorFieldC> {
        VectorFieldC::new(self.comps.iter().map(|c| f.mul(c)).collect::<Result<_>>()?)
    }
}

fn check(acs: &AlmostComplexStructure, x: &VectorFieldC) -> Result<()> {
    if x.dim() != acs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector field of dimension {}, structure of size {}",
            x.dim(),
            acs.dim()
        )));
    }
    if **x.patch() != **acs.patch() {
        return Err(Error::PatchMismatch);
    }
    Ok(())
}

fn same(x: &VectorFieldC, u: &ComplexField) -> Result<()> {
    if **x.patch() != **u.patch() {
        return Err(Error::PatchMismatch);
    }
    Ok(())
}

/// `X(u) = Σ X^k ∂u/∂x^k`.
pub fn apply_vf(x: &VectorFieldC, u: &ComplexField, mode: DiffMode) -> Result<ComplexField> {
    same(x, u)?;
    let mut acc = ComplexField::constant(x.patch(), 0.0, 0.0);
    for (k, xk) in x.comps.iter().enumerate() {
        acc = acc.add(&xk.mul(&u.partial(k, mode)?)?)?;
    }
    Ok(acc)
}

/// `JX`.
pub fn j_action(acs: &AlmostComplexStructure, x: &VectorFieldC) -> Result<VectorFieldC> {
    check(acs, x)?;
    let d = acs.dim();
    let j = acs.j_tan();
    let comps = (0..d)
        .map(|k| {
            let mut acc = ComplexField::constant(x.patch(), 0.0, 0.0);
            for (l, xl) in x.comps.iter().enumerate() {
                let c = j.get(k, l);
                if c.as_constant() == Some(0.0) {
                    continue;
                }
                acc = acc.add(&ComplexField::real(c.clone()).mul(xl)?)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    VectorFieldC::new(comps)
}

/// Classical commutator applied to `u`: `X(Y(u)) − Y(X(u))`.
pub fn bracket(x: &VectorFieldC, y: &VectorFieldC, u: &ComplexField, mode: DiffMode) -> Result<ComplexField> {
    apply_vf(x, &apply_vf(y, u, mode)?, mode)?.sub(&apply_vf(y, &apply_vf(x, u, mode)?, mode)?)
}

/// Anticommutator applied to `u`: `X(Y(u)) + Y(X(u))`.
pub fn anticommutator(
    x: &VectorFieldC,
    y: &VectorFieldC,
    u: &ComplexField,
    mode: DiffMode,
) -> Result<ComplexField> {
    apply_vf(x, &apply_vf(y, u, mode)?, mode)?.add(&apply_vf(y, &apply_vf(x, u, mode)?, mode)?)
}

/// `[X,Y]_J(u) = X((JY)(u)) − Y((JX)(u))`.
pub fn bracket_j(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
    y: &VectorFieldC,
    u: &ComplexField,
    mode: DiffMode,
) -> Result<ComplexField> {
    let jx = j_action(acs, x)?;
    let jy = j_action(acs, y)?;
    apply_vf(x, &apply_vf(&jy, u, mode)?, mode)?.sub(&apply_vf(y, &apply_vf(&jx, u, mode)?, mode)?)
}

/// `(J[X,Y])(u) = Σ_k (JZ)^k ∂_k u` with `Z = [X,Y]` the commutator field,
/// `Z^k = X(Y^k) − Y(X^k)`.
pub fn j_commutator(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
    y: &VectorFieldC,
    u: &ComplexField,
    mode: DiffMode,
) -> Result<ComplexField> {
    check(acs, x)?;
    check(acs, y)?;
    let z = VectorFieldC::new(
        (0..x.dim())
            .map(|k| apply_vf(x, &y.comps[k], mode)?.sub(&apply_vf(y, &x.comps[k], mode)?))
            .collect::<Result<_>>()?,
    )?;
    apply_vf(&j_action(acs, &z)?, u, mode)
}

/// `[X,Y]_J(u) − (J[X,Y])(u)`, which equals `d(J*du)(X,Y)`.
pub fn potential_vf_residual(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
    y: &VectorFieldC,
    u: &ComplexField,
    mode: DiffMode,
) -> Result<ComplexField> {
    bracket_j(acs, x, y, u, mode)?.sub(&j_commutator(acs, x, y, u, mode)?)
}

/// `(X^{1,0}, X^{0,1}) = ((X − iJX)/2, (X + iJX)/2)`.
pub fn splitting_projections(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
) -> Result<(VectorFieldC, VectorFieldC)> {
    let ijx = j_action(acs, x)?.scale(0.0, 1.0)?;
    Ok((x.sub(&ijx)?.scale(0.5, 0.0)?, x.add(&ijx)?.scale(0.5, 0.0)?))
}

/// Pointwise modulus of complex fields at interior nodes, one column per field.
fn moduli(fields: &[&ComplexField]) -> Result<(Arc<Patch>, Vec<usize>, Vec<f64>)> {
    let patch = fields[0].patch().clone();
    let nodes = patch.interior_nodes();
    let flat: Vec<ScalarField> = fields
        .iter()
        .flat_map(|f| [f.re.clone(), f.im.clone()])
        .collect();
    let table = Evaluator::new(&flat)?.table(&nodes)?;
    let m = fields.len();
    let values = par::map_range(nodes.len(), |i| {
        let r = table.row(i);
        (0..m).map(|e| r[2 * e].hypot(r[2 * e + 1])).collect::<Vec<_>>()
    })
    .concat();
    Ok((patch, nodes, values))
}

/// Sup of `|JX − λX|` over interior nodes, `λ = i` (`holomorphic = true`) or `−i`.
pub fn eigen_residual(acs: &AlmostComplexStructure, x: &VectorFieldC, holomorphic: bool) -> Result<f64> {
    let lambda = if holomorphic { 1.0 } else { -1.0 };
    let diff = j_action(acs, x)?.sub(&x.scale(0.0, lambda)?)?;
    let refs: Vec<&ComplexField> = diff.comps.iter().collect();
    let (_, _, v) = moduli(&refs)?;
    Ok(v.iter().fold(0.0, |m, &a| m.max(a)))
}

/// Which eigenspaces `X` and `Y` are declared to lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketCase {
    /// Both in `T^{1,0}`.
    Holomorphic,
    /// Both in `T^{0,1}`.
    Antiholomorphic,
    /// `X ∈ T^{1,0}`, `Y ∈ T^{0,1}`.
    Mixed,
    /// `X ∈ T^{0,1}`, `Y ∈ T^{1,0}`.
    MixedReversed,
}

impl BracketCase {
    fn spaces(self) -> (bool, bool) {
        match self {
            BracketCase::Holomorphic => (true, true),
            BracketCase::Antiholomorphic => (false, false),
            BracketCase::Mixed => (true, false),
            BracketCase::MixedReversed => (false, true),
        }
    }

    /// Law obtained from `JX = λX`, `JY = μY`:
    /// `[X,Y]_J = μ XY − λ YX`. Returns (coefficient, uses anticommutator).
    pub fn derived_law(self) -> (f64, bool) {
        match self {
            BracketCase::Holomorphic => (1.0, false),
            BracketCase::Antiholomorphic => (-1.0, false),
            BracketCase::Mixed => (-1.0, true),
            BracketCase::MixedReversed => (1.0, true),
        }
    }

    /// Law as commonly displayed, with `+i{X,Y}` for `X ∈ T^{1,0}, Y ∈ T^{0,1}`
    /// and `−i{X,Y}` for the reverse order.
    pub fn displayed_law(self) -> (f64, bool) {
        match self {
            BracketCase::Mixed => (1.0, true),
            BracketCase::MixedReversed => (-1.0, true),
            c => c.derived_law(),
        }
    }

    pub fn law_name(law: (f64, bool)) -> &'static str {
        match law {
            (c, false) if c > 0.0 => "i[X,Y]",
            (_, false) => "-i[X,Y]",
            (c, true) if c > 0.0 => "i{X,Y}",
            (_, true) => "-i{X,Y}",
        }
    }
}

impl std::str::FromStr for BracketCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<BracketCase> {
        match s {
            "holomorphic" | "10" => Ok(BracketCase::Holomorphic),
            "antiholomorphic" | "01" => Ok(BracketCase::Antiholomorphic),
            "mixed" | "10-01" => Ok(BracketCase::Mixed),
            "mixed_reversed" | "01-10" => Ok(BracketCase::MixedReversed),
            _ => Err(Error::Precondition(format!("unknown bracket case `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketLawReport {
    pub case: BracketCase,
    pub eigen_residual_x: f64,
    pub eigen_residual_y: f64,
    pub derived_law: String,
    pub displayed_law: String,
    /// `sup |[X,Y]_J(u) − law(u)|` for the law derived from the eigen relations.
    pub derived: ResidualReport,
    /// Same for the displayed law; equal to `derived` outside the mixed cases.
    pub displayed: ResidualReport,
    /// Whether the displayed law also holds within the tolerance.
    pub display_agrees: bool,
    /// `sup |[X,Y]_J(u)|`, for scale.
    pub lhs_sup: f64,
}

/// Checks the bracket law for eigenfields. Fails with
/// [`Error::Precondition`] when `X` or `Y` is not in its declared eigenspace.
pub fn bracket_law_check(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
    y: &VectorFieldC,
    u: &ComplexField,
    case: BracketCase,
    mode: DiffMode,
    tol: f64,
) -> Result<BracketLawReport> {
    let (hx, hy) = case.spaces();
    let ex = eigen_residual(acs, x, hx)?;
    let ey = eigen_residual(acs, y, hy)?;
    if ex > tol || ey > tol {
        return Err(Error::Precondition(format!(
            "vector fields not in the declared eigenspaces (residuals {ex:.3e}, {ey:.3e})"
        )));
    }
    let lhs = bracket_j(acs, x, y, u, mode)?;
    let comm = bracket(x, y, u, mode)?;
    let anti = anticommutator(x, y, u, mode)?;
    let law = |(c, uses_anti): (f64, bool)| -> Result<ComplexField> {
        let base = if uses_anti { &anti } else { &comm };
        lhs.sub(&base.scale(0.0, c)?)
    };
    let derived_law = case.derived_law();
    let displayed_law = case.displayed_law();
    let rd = law(derived_law)?;
    let rs = law(displayed_law)?;
    let (patch, nodes, values) = moduli(&[&rd, &rs, &lhs])?;
    let col = |e: usize| values.iter().skip(e).step_by(3).copied().collect::<Vec<_>>();
    let derived = ResidualReport::scalar(
        "twisted bracket law (derived from JX = ±iX)",
        mode,
        &patch,
        &nodes,
        BracketCase::law_name(derived_law),
        &col(0),
    );
    let displayed = ResidualReport::scalar(
        "twisted bracket law (as displayed)",
        mode,
        &patch,
        &nodes,
        BracketCase::law_name(displayed_law),
        &col(1),
    );
    let lhs_sup = col(2).into_iter().fold(0.0, f64::max);
    Ok(BracketLawReport {
        case,
        eigen_residual_x: ex,
        eigen_residual_y: ey,
        derived_law: BracketCase::law_name(derived_law).into(),
        displayed_law: BracketCase::law_name(displayed_law).into(),
        display_agrees: displayed.sup_norm <= tol,
        derived,
        displayed,
        lhs_sup,
    })
}

/// Difference of the two sides of the product rule for `[X,Y]_J`:
/// `[X,Y]_J(fh) = [X,Y]_J(f)h + f[X,Y]_J(h) + X(f)(JY)(h) − (JX)(f)Y(h)
///  + X(h)(JY)(f) − (JX)(h)Y(f)`.
pub fn leibniz_defect_check(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
    y: &VectorFieldC,
    f: &ComplexField,
    h: &ComplexField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    if mode == DiffMode::Exact && !(acs.is_exact() && x.is_exact() && y.is_exact() && f.is_exact() && h.is_exact()) {
        return Err(Error::ModeUnavailable(
            "product rule check needs symbolic inputs in exact mode".into(),
        ));
    }
    let jx = j_action(acs, x)?;
    let jy = j_action(acs, y)?;
    let a = |v: &VectorFieldC, g: &ComplexField| apply_vf(v, g, mode);
    let lhs = bracket_j(acs, x, y, &f.mul(h)?, mode)?;
    let terms = [
        bracket_j(acs, x, y, f, mode)?.mul(h)?,
        f.mul(&bracket_j(acs, x, y, h, mode)?)?,
        a(x, f)?.mul(&a(&jy, h)?)?,
        a(&jx, f)?.mul(&a(y, h)?)?.scale(-1.0, 0.0)?,
        a(x, h)?.mul(&a(&jy, f)?)?,
        a(&jx, h)?.mul(&a(y, f)?)?.scale(-1.0, 0.0)?,
    ];
    let mut rhs = ComplexField::constant(x.patch(), 0.0, 0.0);
    for t in &terms {
        rhs = rhs.add(t)?;
    }
    let diff = lhs.sub(&rhs)?;
    let (patch, nodes, values) = moduli(&[&diff])?;
    Ok(ResidualReport::scalar(
        "product rule of the twisted bracket",
        mode,
        &patch,
        &nodes,
        "leibniz defect",
        &values,
    ))
}

/// Sup of `|[X,Y]_J(u) − J[X,Y](u)|` over interior nodes.
pub fn potential_vf_report(
    acs: &AlmostComplexStructure,
    x: &VectorFieldC,
    y: &VectorFieldC,
    u: &ComplexField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    let r = potential_vf_residual(acs, x, y, u, mode)?;
    let (patch, nodes, values) = moduli(&[&r])?;
    Ok(ResidualReport::scalar(
        "potential equation in bracket form: [X,Y]_J(u) = J[X,Y](u)",
        mode,
        &patch,
        &nodes,
        "[X,Y]_J(u) - J[X,Y](u)",
        &values,
    ))
}
