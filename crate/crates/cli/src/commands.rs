use std::path::Path;

use serde_json::{json, Value};

use spencer_core::brackets::bracket_law_check;
use spencer_core::csvio::write_grid;
use spencer_core::elliptic::{
    assemble_operator, ellipticity_certificate, potential_closedness_residual, solve_dirichlet, theorem_check,
    DirichletProblem,
};
use spencer_core::holomorphy::{antiholo_residual, holo_residual, reduced_system_residual, reduction_equivalence_check};
use spencer_core::hypercomplex::{hyper_potential_residual, j_hyperholo_residual, k_hyperholo_residual};
use spencer_core::report::EXACT_TOL;
use spencer_core::spencer::{independence_rank, verify_antichart, verify_chart};
use spencer_core::structures::{
    block_identities, extract_pq, nijenhuis_residual, normalize_at_origin, reconstruct_cotangent, validation_report,
    AlmostComplexStructure, BlockDecomposition,
};
use spencer_core::{DiffMode, Error, MatrixField};

use crate::scene::{pq_of, Model, Resolution, Scene, StructureSpec};
use crate::{
    AcsCmd, BracketCmd, CheckKind, Cli, CliError, Command, ConvergenceArgs, EllipticCmd, Global, HoloCmd, HyperCmd,
    Outcome, PluriCmd, SpencerCmd,
};

pub struct Run {
    pub outcome: Outcome,
    /// `--out` already received another artifact.
    pub out_taken: bool,
    /// Stdout carries data, so the report goes to stderr.
    pub report_to_stderr: bool,
}

impl From<Outcome> for Run {
    fn from(outcome: Outcome) -> Run {
        Run { outcome, out_taken: false, report_to_stderr: false }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn load(path: &Path, g: &Global) -> Result<Model, CliError> {
    Model::new(Scene::read(path)?, g.grid)
}

fn tolerance(model: &Model, g: &Global, mode: DiffMode) -> f64 {
    g.tol.or(model.scene.tolerance).unwrap_or(match mode {
        DiffMode::Exact => EXACT_TOL,
        DiffMode::FiniteDifference => 1e-4,
    })
}

fn entry_gap(a: &MatrixField, b: &MatrixField) -> Result<f64, Error> {
    let nodes = a.patch().all_nodes();
    let (ma, mb) = (a.at_nodes(&nodes)?, b.at_nodes(&nodes)?);
    Ok(ma.iter().zip(&mb).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max))
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn normalized(model: &Model, acs: &AlmostComplexStructure) -> Result<BlockDecomposition, CliError> {
    Ok(normalize_at_origin(acs, model.base_node()?)?)
}

pub fn dispatch(cli: &Cli) -> Result<Run, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Acs(AcsCmd::Check { scene, nijenhuis, samples }) => acs_check(&load(scene, g)?, g, *nijenhuis, *samples).map(Run::from),
        Command::Acs(AcsCmd::FromPq { scene }) => acs_from_pq(&load(scene, g)?, g),
        Command::Acs(AcsCmd::ExtractPq { scene }) => acs_extract_pq(&load(scene, g)?, g).map(Run::from),
        Command::Holo(HoloCmd::Residual { scene, field, anti }) => holo(&load(scene, g)?, g, field, *anti).map(Run::from),
        Command::Holo(HoloCmd::Reduced { scene, field }) => holo_reduced(&load(scene, g)?, g, field).map(Run::from),
        Command::Pluri(PluriCmd::Check { scene, field }) => pluri(&load(scene, g)?, g, field).map(Run::from),
        Command::Elliptic(EllipticCmd::Solve { scene, bc, oracle, source, csv }) => {
            elliptic_solve(&load(scene, g)?, g, bc, oracle.as_deref(), source.as_deref(), csv.as_deref())
        }
        Command::Bracket(BracketCmd::Check { scene, x, y, u, case }) => {
            let model = load(scene, g)?;
            let mode = model.mode(g.mode);
            let tol = tolerance(&model, g, mode);
            let acs = model.acs()?;
            let r = bracket_law_check(
                &acs,
                &model.vector_field(x)?,
                &model.vector_field(y)?,
                &model.complex_field(u)?,
                *case,
                mode,
                tol,
            )?;
            Ok(Outcome {
                command: "bracket check",
                anchor: r.derived.anchor.clone(),
                passes: r.derived.passes(tol),
                tolerance: tol,
                mode,
                report: to_value(&r),
            }
            .into())
        }
        Command::Hyper(HyperCmd::Check { scene, function, potential }) => {
            hyper(&load(scene, g)?, g, function.as_deref(), potential.as_deref()).map(Run::from)
        }
        Command::Spencer(SpencerCmd::Verify { scene, chart, anti }) => {
            let model = load(scene, g)?;
            let mode = model.mode(g.mode);
            let tol = tolerance(&model, g, mode);
            let acs = model.acs()?;
            let c = model.chart(chart)?;
            let pattern = if *anti { verify_antichart(&acs, &c, mode, tol)? } else { verify_chart(&acs, &c, mode, tol)? };
            let rank = independence_rank(c.holo(), mode)?;
            Ok(Outcome {
                command: "spencer verify",
                anchor: pattern.anchor.clone(),
                passes: pattern.passes && rank.independent,
                tolerance: tol,
                mode,
                report: json!({ "pattern": pattern, "rank": rank }),
            }
            .into())
        }
        Command::Convergence(args) => convergence(args, g).map(Run::from),
    }
}

fn acs_check(model: &Model, g: &Global, nijenhuis: bool, samples: usize) -> Result<Outcome, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let mut passes = true;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, j_cot) in model.raw_cotangents()? {
        let validation = validation_report(&j_cot, tol)?;
        worst = worst.max(validation.acs_residual);
        let mut part = json!({ "name": name, "validation": validation });
        if !validation.valid {
            passes = false;
            parts.push(part);
            continue;
        }
        let acs = AlmostComplexStructure::from_cotangent_with_tol(j_cot, tol)?;
        let op = assemble_operator(&acs, mode)?;
        match ellipticity_certificate(&acs, &op, samples, g.seed) {
            Ok(cert) => {
                passes &= cert.passes;
                part["ellipticity"] = to_value(&cert);
            }
            Err(e @ Error::EllipticityViolated { .. }) => {
                passes = false;
                part["ellipticity"] = json!({ "passes": false, "error": e.to_string() });
            }
            Err(e) => return Err(e.into()),
        }
        if nijenhuis {
            let n = nijenhuis_residual(&acs, mode)?;
            passes &= n <= tol;
            part["nijenhuis"] = json!(n);
        }
        parts.push(part);
    }
    let mut report = json!({ "acs_residual": worst, "structures": parts });
    if let StructureSpec::Hypercomplex { .. } = model.scene.structure {
        if passes {
            match model.hyper() {
                Ok(_) => report["anticommute"] = json!(true),
                Err(e @ Error::NotHypercomplex { .. }) => {
                    passes = false;
                    report["anticommute"] = json!(false);
                    report["hypercomplex_error"] = json!(e.to_string());
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(Outcome {
        command: "acs check",
        anchor: "almost-complex structure J^2 = -E".into(),
        passes,
        tolerance: tol,
        mode,
        report,
    })
}

fn acs_from_pq(model: &Model, g: &Global) -> Result<Run, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let pq = pq_of(model)?;
    let j = reconstruct_cotangent(&pq)?;
    let validation = validation_report(&j, tol)?;
    let rows = j
        .to_strings()
        .ok_or_else(|| Error::Precondition("reconstructed structure is not expression-backed".into()))?;
    let mut scene = model.scene.clone();
    scene.structure = StructureSpec::Matrix { j_cot: rows };
    let text = scene.to_json();
    let to_stdout = g.out.is_none();
    crate::emit(&text, g.out.as_ref(), false)?;
    Ok(Run {
        outcome: Outcome {
            command: "acs from-pq",
            anchor: "structure generated by (P, Q)".into(),
            passes: validation.valid,
            tolerance: tol,
            mode,
            report: json!({ "q_condition": pq.q_condition(), "validation": validation }),
        },
        out_taken: true,
        report_to_stderr: to_stdout,
    })
}

fn acs_extract_pq(model: &Model, g: &Global) -> Result<Outcome, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let acs = model.acs()?;
    let bd = normalized(model, &acs)?;
    let pq = extract_pq(&bd)?;
    let round_trip = entry_gap(&reconstruct_cotangent(&pq)?, &bd.normalized)?;
    let blocks = block_identities(&bd, &acs)?;
    Ok(Outcome {
        command: "acs extract-pq",
        anchor: "normalized form and extraction of (P, Q)".into(),
        passes: round_trip <= tol && blocks.max() <= tol,
        tolerance: tol,
        mode,
        report: json!({
            "base_point": model.patch.point(bd.base_node),
            "frame": matrix_rows(&bd.g),
            "q_condition": pq.q_condition(),
            "round_trip": round_trip,
            "block_identities": blocks,
        }),
    })
}

fn holo(model: &Model, g: &Global, field: &str, anti: bool) -> Result<Outcome, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let acs = model.acs()?;
    let f = model.complex_field(field)?;
    let r = if anti { antiholo_residual(&acs, &f, mode)? } else { holo_residual(&acs, &f, mode)? };
    Ok(Outcome {
        command: "holo residual",
        anchor: r.anchor.clone(),
        passes: r.passes(tol),
        tolerance: tol,
        mode,
        report: to_value(&r),
    })
}

fn holo_reduced(model: &Model, g: &Global, field: &str) -> Result<Outcome, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let acs = model.acs()?;
    let f = model.complex_field(field)?;
    let bd = normalized(model, &acs)?;
    let pq = extract_pq(&bd)?;
    let reduced = reduced_system_residual(&bd, &pq, &f, mode)?;
    let equivalence = reduction_equivalence_check(&acs, &bd, &pq, &f, mode)?;
    Ok(Outcome {
        command: "holo reduced",
        anchor: equivalence.anchor.clone(),
        passes: equivalence.passes(),
        tolerance: tol,
        mode,
        report: json!({ "reduced": reduced, "equivalence": equivalence }),
    })
}

fn pluri(model: &Model, g: &Global, field: &str) -> Result<Outcome, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let acs = model.acs()?;
    let u = model.scalar(field, "--field")?;
    let r = theorem_check(&acs, &u, mode, tol)?;
    Ok(Outcome {
        command: "pluri check",
        anchor: r.closedness.anchor.clone(),
        passes: r.closedness.passes(tol) && r.bound_holds,
        tolerance: tol,
        mode,
        report: to_value(&r),
    })
}

struct Solved {
    u: Vec<f64>,
    oracle: Option<Vec<f64>>,
    max_error: Option<f64>,
    stats: Value,
}

fn solve(model: &Model, mode: DiffMode, bc: &str, oracle: Option<&str>, source: Option<&str>) -> Result<Solved, CliError> {
    let acs = model.acs()?;
    let op = assemble_operator(&acs, mode)?;
    let mut problem = DirichletProblem::new(&op, model.scalar(bc, "--bc")?);
    problem.source = source.map(|s| model.scalar(s, "--source")).transpose()?;
    let sol = solve_dirichlet(&problem)?;
    let u = sol.field.samples()?.to_vec();
    let oracle = oracle.map(|o| -> Result<Vec<f64>, CliError> { Ok(model.scalar(o, "--oracle")?.samples()?.to_vec()) }).transpose()?;
    let max_error = oracle.as_ref().map(|o| o.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
    Ok(Solved { u, oracle, max_error, stats: to_value(&sol.stats) })
}

fn elliptic_solve(
    model: &Model,
    g: &Global,
    bc: &str,
    oracle: Option<&str>,
    source: Option<&str>,
    csv: Option<&Path>,
) -> Result<Run, CliError> {
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let s = solve(model, mode, bc, oracle, source)?;
    let mut columns: Vec<(&str, &[f64])> = vec![("u", &s.u)];
    let error: Option<Vec<f64>> = s.oracle.as_ref().map(|o| o.iter().zip(&s.u).map(|(a, b)| b - a).collect());
    if let (Some(o), Some(e)) = (&s.oracle, &error) {
        columns.push(("oracle", o));
        columns.push(("error", e));
    }
    match csv {
        Some(path) => write_grid(std::fs::File::create(path)?, &model.patch, &columns)?,
        None => write_grid(std::io::stdout().lock(), &model.patch, &columns)?,
    }
    Ok(Run {
        outcome: Outcome {
            command: "elliptic solve",
            anchor: "Dirichlet problem for Delta_J".into(),
            passes: s.max_error.is_none_or(|e| e <= tol),
            tolerance: tol,
            mode,
            report: json!({ "stats": s.stats, "max_error": s.max_error }),
        },
        out_taken: false,
        report_to_stderr: csv.is_none(),
    })
}

fn hyper(model: &Model, g: &Global, function: Option<&str>, potential: Option<&[String]>) -> Result<Outcome, CliError> {
    if function.is_none() && potential.is_none() {
        return Err(CliError::Usage("`hyper check` needs --function and/or --potential".into()));
    }
    let mode = model.mode(g.mode);
    let tol = tolerance(model, g, mode);
    let h = model.hyper()?;
    let mut passes = true;
    let mut report = json!({});
    if let Some(name) = function {
        let f = model.quaternion_function(name)?;
        let j = j_hyperholo_residual(&h, &f, mode)?;
        let k = k_hyperholo_residual(&h, &f, mode)?;
        passes &= j.residual.passes(tol) && k.residual.passes(tol);
        report["j"] = to_value(&j);
        report["k"] = to_value(&k);
    }
    if let Some([u, zeta]) = potential {
        let r = hyper_potential_residual(&h, &model.scalar(u, "--potential")?, &model.scalar(zeta, "--potential")?, mode)?;
        passes &= r.coupled.passes(tol);
        report["potential"] = to_value(&r);
    }
    Ok(Outcome {
        command: "hyper check",
        anchor: "hyperholomorphic functions: dF o J = S o dF, dF o K = T o dF".into(),
        passes,
        tolerance: tol,
        mode,
        report,
    })
}

fn need<'a>(v: &'a Option<String>, flag: &str, check: CheckKind) -> Result<&'a str, CliError> {
    v.as_deref()
        .ok_or_else(|| CliError::Usage(format!("convergence --check {check:?} needs --{flag}").to_lowercase()))
}

fn metric(model: &Model, args: &ConvergenceArgs, mode: DiffMode) -> Result<f64, CliError> {
    let c = args.check;
    Ok(match c {
        CheckKind::Holo => holo_residual(&model.acs()?, &model.complex_field(need(&args.field, "field", c)?)?, mode)?.sup_norm,
        CheckKind::Pluri => {
            let u = model.scalar(need(&args.field, "field", c)?, "--field")?;
            potential_closedness_residual(&model.acs()?, &u, mode)?.sup_norm
        }
        CheckKind::Nijenhuis => nijenhuis_residual(&model.acs()?, mode)?,
        CheckKind::Spencer => {
            let chart = model.chart(need(&args.chart, "chart", c)?)?;
            verify_chart(&model.acs()?, &chart, mode, f64::INFINITY)?.max_residual()
        }
        CheckKind::Hyper => {
            let h = model.hyper()?;
            let f = model.quaternion_function(need(&args.function, "function", c)?)?;
            let j = j_hyperholo_residual(&h, &f, mode)?.residual.sup_norm;
            j.max(k_hyperholo_residual(&h, &f, mode)?.residual.sup_norm)
        }
        CheckKind::Elliptic => {
            let bc = need(&args.bc, "bc", c)?;
            let oracle = args.oracle.as_deref().unwrap_or(bc);
            solve(model, mode, bc, Some(oracle), None)?.max_error.unwrap_or(0.0)
        }
    })
}

fn convergence(args: &ConvergenceArgs, g: &Global) -> Result<Outcome, CliError> {
    let scene = Scene::read(&args.scene)?;
    let r = match (g.grid, &scene.patch.resolution) {
        (Some(r), _) | (None, &Resolution::Uniform(r)) => r,
        (None, Resolution::PerAxis(_)) => {
            return Err(CliError::Usage("convergence needs a uniform resolution; pass --grid".into()));
        }
    };
    let mode = g.mode.unwrap_or(DiffMode::FiniteDifference);
    let tol = g.tol.unwrap_or(EXACT_TOL);
    let mut levels = Vec::new();
    for res in [r, 2 * r - 1, 4 * r - 3] {
        let model = Model::new(scene.clone(), Some(res))?;
        let h = model.patch.max_spacing();
        levels.push((res, h, metric(&model, args, mode)?));
    }
    let orders: Vec<Option<f64>> = levels
        .windows(2)
        .map(|w| (w[0].2 > 0.0 && w[1].2 > 0.0).then(|| (w[0].2 / w[1].2).log2()))
        .collect();
    let finest = levels.last().map_or(0.0, |l| l.2);
    let passes = finest <= tol || orders.iter().all(|o| o.is_some_and(|o| o >= args.min_order));
    Ok(Outcome {
        command: "convergence",
        anchor: "observed order of the discretization error".into(),
        passes,
        tolerance: tol,
        mode,
        report: json!({
            "check": format!("{:?}", args.check).to_lowercase(),
            "levels": levels.iter().map(|(r, h, e)| json!({ "resolution": r, "h": h, "residual": e })).collect::<Vec<_>>(),
            "orders": orders,
            "min_order": args.min_order,
        }),
    })
}
