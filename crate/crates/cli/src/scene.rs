//! Scene files: a patch, a structure and named objects on it.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "patch": { "bounds": [[-1, 1], [-1, 1]], "resolution": 17 },
//!   "structure": { "kind": "standard" },
//!   "fields": { "u": "x1^2 - x2^2" },
//!   "complex_fields": { "z": ["x1", "x2"] }
//! }
//! ```
//!
//! Structure kinds: `standard`, `matrix` (`j_cot` rows), `pq` (`p`, `q` rows),
//! `pullback` (`phi`, one expression per coordinate) and `hypercomplex`
//! (`j`, `k` nested structures; both absent means the flat pair). Charts hold
//! inline `[re, im]` pairs, vector fields one `[re, im]` pair per component,
//! quaternion functions four real components `u, v, ζ, η`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use spencer_core::brackets::VectorFieldC;
use spencer_core::fixtures::pullback_structure;
use spencer_core::hypercomplex::QuaternionFunction;
use spencer_core::spencer::SpencerChart;
use spencer_core::structures::{reconstruct_cotangent, AlmostComplexStructure, HypercomplexStructure, PqPair};
use spencer_core::{parse_expr, ComplexField, DiffMode, Expr, MatrixField, Patch, ScalarField};

use crate::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_half: Option<usize>,
    pub patch: PatchSpec,
    pub structure: StructureSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub complex_fields: BTreeMap<String, [String; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub charts: BTreeMap<String, ChartSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vector_fields: BTreeMap<String, Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub quaternion_functions: BTreeMap<String, [String; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<DiffMode>,
    /// Base point of the normalization; defaults to the patch center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub bounds: Vec<[f64; 2]>,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    Standard {},
    Matrix {
        j_cot: Vec<Vec<String>>,
    },
    Pq {
        p: Vec<Vec<String>>,
        q: Vec<Vec<String>>,
    },
    Pullback {
        phi: Vec<String>,
    },
    Hypercomplex {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j: Option<Box<StructureSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<Box<StructureSpec>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub holo: Vec<[String; 2]>,
    #[serde(default)]
    pub complement: Vec<[String; 2]>,
}

fn scene_err(at: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Scene(format!("{at}: {e}"))
}

impl Scene {
    pub fn read(path: &Path) -> Result<Scene, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Scene(format!("{}: {e}", path.display())))?;
        let scene: Scene = serde_json::from_str(&text)
            .map_err(|e| CliError::Scene(format!("{}: {e}", path.display())))?;
        if scene.schema != SCHEMA {
            return Err(CliError::Scene(format!(
                "{}: unsupported schema {} (expected {SCHEMA})",
                path.display(),
                scene.schema
            )));
        }
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }
}

/// A scene resolved against a concrete grid. Every expression is parsed on
/// load, so name and syntax problems surface before any check runs.
pub struct Model {
    pub scene: Scene,
    pub patch: Arc<Patch>,
}

impl Model {
    pub fn new(scene: Scene, grid: Option<usize>) -> Result<Model, CliError> {
        let bounds: Vec<(f64, f64)> = scene.patch.bounds.iter().map(|b| (b[0], b[1])).collect();
        let dim = bounds.len();
        let resolution = match (grid, &scene.patch.resolution) {
            (Some(r), _) | (None, &Resolution::Uniform(r)) => vec![r; dim],
            (None, Resolution::PerAxis(v)) => v.clone(),
        };
        let patch = Arc::new(Patch::new(bounds, resolution).map_err(|e| scene_err("patch", e))?);
        if let Some(n) = scene.dim_half {
            if 2 * n != dim {
                return Err(scene_err("dim_half", format!("{n} does not match a {dim}-dimensional patch")));
            }
        }
        let model = Model { scene, patch };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = &self.scene;
        let d = self.patch.dim();
        check_structure_spec(&s.structure, d, "structure")?;
        for (name, e) in &s.fields {
            self.expr(e, &format!("fields.{name}"))?;
        }
        for (name, pair) in &s.complex_fields {
            self.pair(pair, &format!("complex_fields.{name}"))?;
        }
        for (name, c) in &s.charts {
            for (i, pair) in c.holo.iter().enumerate() {
                self.pair(pair, &format!("charts.{name}.holo[{i}]"))?;
            }
            for (i, pair) in c.complement.iter().enumerate() {
                self.pair(pair, &format!("charts.{name}.complement[{i}]"))?;
            }
            if c.holo.len() + c.complement.len() != d / 2 {
                return Err(scene_err(
                    &format!("charts.{name}"),
                    format!("{} coordinates for complex dimension {}", c.holo.len() + c.complement.len(), d / 2),
                ));
            }
        }
        for (name, v) in &s.vector_fields {
            if v.len() != d {
                return Err(scene_err(&format!("vector_fields.{name}"), format!("{} components for dimension {d}", v.len())));
            }
            for (i, pair) in v.iter().enumerate() {
                self.pair(pair, &format!("vector_fields.{name}[{i}]"))?;
            }
        }
        for (name, q) in &s.quaternion_functions {
            for (i, e) in q.iter().enumerate() {
                self.expr(e, &format!("quaternion_functions.{name}[{i}]"))?;
            }
        }
        if let Some(b) = &s.base_point {
            if b.len() != d {
                return Err(scene_err("base_point", format!("{} coordinates for dimension {d}", b.len())));
            }
        }
        Ok(())
    }

    fn expr(&self, text: &str, at: &str) -> Result<Expr, CliError> {
        parse_expr(text, self.patch.dim()).map_err(|e| scene_err(at, e))
    }

    fn pair(&self, p: &[String; 2], at: &str) -> Result<(Expr, Expr), CliError> {
        Ok((self.expr(&p[0], &format!("{at}[0]"))?, self.expr(&p[1], &format!("{at}[1]"))?))
    }

    fn complex(&self, p: &[String; 2], at: &str) -> Result<ComplexField, CliError> {
        let (re, im) = self.pair(p, at)?;
        let f = |e: Expr| ScalarField::from_expr(&self.patch, e).map_err(|e| scene_err(at, e));
        ComplexField::new(f(re)?, f(im)?).map_err(|e| scene_err(at, e))
    }

    /// A named real field, or an inline expression when no field has that name.
    pub fn scalar(&self, name_or_expr: &str, at: &str) -> Result<ScalarField, CliError> {
        let text = self.scene.fields.get(name_or_expr).map(String::as_str).unwrap_or(name_or_expr);
        let e = self.expr(text, at)?;
        ScalarField::from_expr(&self.patch, e).map_err(|e| scene_err(at, e))
    }

    /// A named complex field, falling back to a named real field.
    pub fn complex_field(&self, name: &str) -> Result<ComplexField, CliError> {
        if let Some(p) = self.scene.complex_fields.get(name) {
            return self.complex(p, &format!("complex_fields.{name}"));
        }
        if self.scene.fields.contains_key(name) {
            return Ok(ComplexField::real(self.scalar(name, &format!("fields.{name}"))?));
        }
        Err(CliError::Usage(format!("no field named `{name}` in the scene")))
    }

    pub fn chart(&self, name: &str) -> Result<SpencerChart, CliError> {
        let c = self
            .scene
            .charts
            .get(name)
            .ok_or_else(|| CliError::Usage(format!("no chart named `{name}` in the scene")))?;
        let at = format!("charts.{name}");
        let conv = |v: &[[String; 2]]| v.iter().map(|p| self.complex(p, &at)).collect::<Result<Vec<_>, _>>();
        SpencerChart::new(conv(&c.holo)?, conv(&c.complement)?).map_err(|e| scene_err(&at, e))
    }

    pub fn vector_field(&self, name: &str) -> Result<VectorFieldC, CliError> {
        let v = self
            .scene
            .vector_fields
            .get(name)
            .ok_or_else(|| CliError::Usage(format!("no vector field named `{name}` in the scene")))?;
        let at = format!("vector_fields.{name}");
        let comps = v.iter().map(|p| self.complex(p, &at)).collect::<Result<Vec<_>, _>>()?;
        VectorFieldC::new(comps).map_err(|e| scene_err(&at, e))
    }

    pub fn quaternion_function(&self, name: &str) -> Result<QuaternionFunction, CliError> {
        let q = self
            .scene
            .quaternion_functions
            .get(name)
            .ok_or_else(|| CliError::Usage(format!("no quaternion function named `{name}` in the scene")))?;
        let at = format!("quaternion_functions.{name}");
        QuaternionFunction::parse(&self.patch, [&q[0], &q[1], &q[2], &q[3]]).map_err(|e| scene_err(&at, e))
    }

    pub fn mode(&self, flag: Option<DiffMode>) -> DiffMode {
        flag.or(self.scene.mode).unwrap_or(DiffMode::Exact)
    }

    pub fn base_node(&self) -> Result<usize, CliError> {
        let point = self.scene.base_point.clone().unwrap_or_else(|| {
            self.patch.bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
        });
        self.patch.nearest_node(&point).map_err(|e| scene_err("base_point", e))
    }

    /// Cotangent matrices of the structure without validating `J² = −E`:
    /// one entry, or `j` and `k` for a hypercomplex scene.
    pub fn raw_cotangents(&self) -> Result<Vec<(&'static str, MatrixField)>, spencer_core::Error> {
        match &self.scene.structure {
            StructureSpec::Hypercomplex { j, k } => {
                let (j, k) = match (j, k) {
                    (Some(j), Some(k)) => (raw_cotangent(j, &self.patch)?, raw_cotangent(k, &self.patch)?),
                    _ => {
                        let h = HypercomplexStructure::flat(&self.patch)?;
                        (h.j.j_cot().clone(), h.k.j_cot().clone())
                    }
                };
                Ok(vec![("j", j), ("k", k)])
            }
            s => Ok(vec![("j", raw_cotangent(s, &self.patch)?)]),
        }
    }

    /// The validated almost-complex structure; `J` for a hypercomplex scene.
    pub fn acs(&self) -> Result<AlmostComplexStructure, spencer_core::Error> {
        match &self.scene.structure {
            StructureSpec::Hypercomplex { .. } => Ok(self.hyper()?.j),
            s => build(s, &self.patch),
        }
    }

    pub fn hyper(&self) -> Result<HypercomplexStructure, spencer_core::Error> {
        match &self.scene.structure {
            StructureSpec::Hypercomplex { j: Some(j), k: Some(k) } => {
                HypercomplexStructure::new(build(j, &self.patch)?, build(k, &self.patch)?)
            }
            StructureSpec::Hypercomplex { .. } => HypercomplexStructure::flat(&self.patch),
            _ => Err(spencer_core::Error::Precondition("the scene structure is not hypercomplex".into())),
        }
    }
}

fn check_structure_spec(s: &StructureSpec, d: usize, at: &str) -> Result<(), CliError> {
    let matrix = |rows: &[Vec<String>], n: usize, at: &str| -> Result<(), CliError> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(scene_err(at, format!("expected a {n}x{n} matrix")));
        }
        for (i, r) in rows.iter().enumerate() {
            for (j, e) in r.iter().enumerate() {
                parse_expr(e, d).map_err(|err| scene_err(&format!("{at}[{i}][{j}]"), err))?;
            }
        }
        Ok(())
    };
    match s {
        StructureSpec::Standard {} => Ok(()),
        StructureSpec::Matrix { j_cot } => matrix(j_cot, d, &format!("{at}.j_cot")),
        StructureSpec::Pq { p, q } => {
            matrix(p, d / 2, &format!("{at}.p"))?;
            matrix(q, d / 2, &format!("{at}.q"))
        }
        StructureSpec::Pullback { phi } => {
            if phi.len() != d {
                return Err(scene_err(&format!("{at}.phi"), format!("{} components for dimension {d}", phi.len())));
            }
            for (i, e) in phi.iter().enumerate() {
                parse_expr(e, d).map_err(|err| scene_err(&format!("{at}.phi[{i}]"), err))?;
            }
            Ok(())
        }
        StructureSpec::Hypercomplex { j, k } => {
            if !d.is_multiple_of(4) {
                return Err(scene_err(at, format!("hypercomplex scenes need a multiple of 4 dimensions, got {d}")));
            }
            match (j, k) {
                (Some(j), Some(k)) => {
                    check_structure_spec(j, d, &format!("{at}.j"))?;
                    check_structure_spec(k, d, &format!("{at}.k"))
                }
                (None, None) => Ok(()),
                _ => Err(scene_err(at, "give both `j` and `k`, or neither for the flat pair")),
            }
        }
    }
}

fn raw_cotangent(s: &StructureSpec, patch: &Arc<Patch>) -> Result<MatrixField, spencer_core::Error> {
    match s {
        StructureSpec::Standard {} => Ok(AlmostComplexStructure::standard(patch).j_cot().clone()),
        StructureSpec::Matrix { j_cot } => MatrixField::parse(patch, j_cot),
        StructureSpec::Pq { p, q } => {
            let pq = PqPair::new(MatrixField::parse(patch, p)?, MatrixField::parse(patch, q)?)?;
            reconstruct_cotangent(&pq)
        }
        StructureSpec::Pullback { phi } => {
            let phi = phi.iter().map(|e| parse_expr(e, patch.dim())).collect::<Result<Vec<_>, _>>()?;
            Ok(pullback_structure(patch, &phi)?.j_cot().clone())
        }
        StructureSpec::Hypercomplex { .. } => Err(spencer_core::Error::Precondition(
            "nested hypercomplex structure".into(),
        )),
    }
}

fn build(s: &StructureSpec, patch: &Arc<Patch>) -> Result<AlmostComplexStructure, spencer_core::Error> {
    match s {
        StructureSpec::Standard {} => Ok(AlmostComplexStructure::standard(patch)),
        other => AlmostComplexStructure::from_cotangent(raw_cotangent(other, patch)?),
    }
}

/// `(P, Q)` of a `pq` scene.
pub fn pq_of(model: &Model) -> Result<PqPair, CliError> {
    match &model.scene.structure {
        StructureSpec::Pq { p, q } => {
            let f = |m: &[Vec<String>]| MatrixField::parse(&model.patch, m);
            PqPair::new(f(p).map_err(|e| scene_err("structure.p", e))?, f(q).map_err(|e| scene_err("structure.q", e))?)
                .map_err(|e| scene_err("structure", e))
        }
        _ => Err(CliError::Usage("`acs from-pq` needs a scene with a `pq` structure".into())),
    }
}
