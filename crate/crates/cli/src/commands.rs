//! Drivers behind the subcommands. Each returns an [`Outcome`] holding the
//! report, its CSV rows and the exit code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bstraight::error::StraightenError;
use bstraight::isometry::random_isometry_with;
use bstraight::jacobian::{derivative_check, endomorphisms_hk, jscan, QuadratureInfo, ScanConfig, Violation, BOUND_TOL, DERIVATIVE_FD_TOL};
use bstraight::model::{Model, ModelPoint};
use bstraight::sampling::{derived_rng, sample_interior_simplex_point, sample_simplex_point, sample_vertices};
use bstraight::simvol::{self, degree_bound, euler_bound, BoundInterval, DegreeBound, EvalConfig, SimvolError};
use bstraight::straighten::{
    geodesic_homotopy, straighten_point_full, verify_equivariance, verify_face_compatibility, SingularSimplex,
    SphericalSimplexPoint, VertexTuple, EQUIVARIANCE_TOL, FACE_TOL,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{parse_model, RunConfig};
use crate::report::{join, now, num, Outcome, Report, Table, Timestamps, REPORT_VERSION};
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;

/// Simplex vertices further than this from the hyperboloid are rejected;
/// closer ones are projected onto it.
pub const VERTEX_INPUT_TOL: f64 = 1e-6;
/// Straightened vertices must reproduce the input vertices to this distance.
pub const VERTEX_TOL: f64 = 1e-7;
/// Coordinates of `sigma` in the `c1` check stay above this.
pub const C1_INTERIOR: f64 = 0.05;
pub const C1_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Equivariance,
    Faces,
    C1,
    JacobianBound,
    All,
}

impl Property {
    fn expand(self) -> Vec<Property> {
        match self {
            Property::All => vec![Property::Equivariance, Property::Faces, Property::C1, Property::JacobianBound],
            p => vec![p],
        }
    }
}

fn exit_code(violations: &[Violation], non_converged: usize) -> i32 {
    if non_converged > 0 {
        EXIT_NON_CONVERGENCE
    } else if !violations.is_empty() {
        EXIT_VIOLATIONS
    } else {
        EXIT_OK
    }
}

fn finish(command: &str, config: Value, started: String, results: Value, violations: Vec<Violation>, table: Table, exit_code: i32) -> Outcome {
    Outcome {
        report: Report {
            version: REPORT_VERSION.into(),
            command: command.into(),
            config,
            timestamps: Timestamps {
                started,
                finished: now(),
            },
            results,
            violations,
        },
        table,
        exit_code,
    }
}

fn violation(sample: usize, check: &str, detail: impl Into<String>) -> Violation {
    Violation {
        sample,
        check: check.into(),
        detail: detail.into(),
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report payloads serialize")
}

/// One per-sample value of a verified property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    /// What the values measure.
    pub quantity: String,
    pub tolerance: f64,
    pub samples: usize,
    pub max_value: f64,
    pub passed: bool,
    pub non_converged: usize,
    pub values: Vec<Option<f64>>,
}

struct CheckRun {
    summary: CheckSummary,
    violations: Vec<Violation>,
    extra: Option<Value>,
}

fn summarise(check: &str, quantity: &str, tolerance: f64, results: Vec<Result<f64, StraightenError>>) -> CheckRun {
    let mut violations = Vec::new();
    let mut non_converged = 0;
    let mut values = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => {
                if !(v <= tolerance) {
                    violations.push(violation(i, check, format!("{quantity} {v:e} exceeds {tolerance:e}")));
                }
                values.push(Some(v));
            }
            Err(e) => {
                if matches!(e, StraightenError::Solver(_)) {
                    non_converged += 1;
                }
                violations.push(violation(i, "solver", format!("{check}: {e}")));
                values.push(None);
            }
        }
    }
    CheckRun {
        summary: CheckSummary {
            check: check.into(),
            quantity: quantity.into(),
            tolerance,
            samples: values.len(),
            max_value: values.iter().flatten().cloned().fold(0.0, f64::max),
            passed: violations.is_empty(),
            non_converged,
            values,
        },
        violations,
        extra: None,
    }
}

#[derive(Serialize)]
struct VerifyEcho<'a> {
    #[serde(flatten)]
    run: &'a RunConfig,
    property: Property,
}

pub fn verify(run: &RunConfig, property: Property) -> Result<Outcome, CliError> {
    let started = now();
    run.validate()?;
    let model = run.model()?;
    let grid = run.grid()?;
    let solver = run.solver();
    let n = model.dimension();
    let samples = run.samples;

    let mut checks = Vec::new();
    for p in property.expand() {
        match p {
            Property::Equivariance => {
                let r: Vec<_> = (0..samples)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = derived_rng(run.seed, i as u64);
                        let gamma = random_isometry_with(&model, &mut rng);
                        let v = VertexTuple::new(&grid, sample_vertices(&model, n + 1, run.radius, &mut rng))?;
                        Ok(verify_equivariance(&v, &gamma, 1, rng.random(), &solver)?.max_discrepancy)
                    })
                    .collect();
                checks.push(summarise("equivariance", "distance", EQUIVARIANCE_TOL, r));
            }
            Property::Faces => {
                let faces: Vec<_> = (0..samples)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = derived_rng(run.seed, i as u64);
                        let v = VertexTuple::new(&grid, sample_vertices(&model, n + 1, run.radius, &mut rng))?;
                        Ok(verify_face_compatibility(&v, 1, rng.random(), &solver)?.max_discrepancy)
                    })
                    .collect();
                checks.push(summarise("faces", "distance", FACE_TOL, faces));
                let ends: Vec<_> = (0..samples)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = derived_rng(run.seed, i as u64);
                        let v = VertexTuple::new(&grid, sample_vertices(&model, n + 1, run.radius, &mut rng))?;
                        let sigma = sample_simplex_point(n, &mut rng);
                        let f = SingularSimplex::geodesic_cone(v.clone());
                        let start = geodesic_homotopy(&f, 0.0, &sigma, &solver)?;
                        let end = geodesic_homotopy(&f, 1.0, &sigma, &solver)?;
                        let st = straighten_point_full(&v, &sigma, &solver)?.point;
                        Ok(model.distance(&start, &f.evaluate(&sigma)).max(model.distance(&end, &st)))
                    })
                    .collect();
                checks.push(summarise("homotopy-endpoints", "distance", FACE_TOL, ends));
            }
            Property::C1 => {
                let r: Vec<_> = (0..samples)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = derived_rng(run.seed, i as u64);
                        let v = VertexTuple::new(&grid, sample_vertices(&model, n + 1, run.radius, &mut rng))?;
                        let sigma = sample_interior_simplex_point(n, C1_INTERIOR, &mut rng);
                        let c = derivative_check(&v, &sigma, C1_STEP, &solver)?;
                        // a residual failure counts as an infinite error
                        Ok(if c.residual <= bstraight::jacobian::DERIVATIVE_RESIDUAL_TOL { c.relative_error } else { f64::INFINITY })
                    })
                    .collect();
                checks.push(summarise("c1", "relative-error", DERIVATIVE_FD_TOL, r));
            }
            Property::JacobianBound => {
                let scan = jscan(
                    &grid,
                    &ScanConfig {
                        samples,
                        seed: run.seed,
                        radius: run.radius,
                        volume_samples: 0,
                        cprime: run.cprime,
                        solver,
                    },
                );
                let mut values = vec![None; samples];
                for e in &scan.entries {
                    values[e.sample] = Some(e.abs_jacobian - e.bound);
                }
                checks.push(CheckRun {
                    summary: CheckSummary {
                        check: "jacobian-bound".into(),
                        quantity: "abs-jacobian-minus-bound".into(),
                        tolerance: BOUND_TOL,
                        samples,
                        max_value: values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max),
                        passed: scan.violations.is_empty(),
                        non_converged: scan.non_converged,
                        values,
                    },
                    violations: scan.violations.clone(),
                    extra: Some(json!({
                        "sup_abs_jacobian": scan.sup_abs_jacobian,
                        "sup_j": scan.sup_j,
                        "sup_bound": scan.sup_bound,
                        "cprime": scan.cprime,
                        "cprime_bound": scan.cprime_bound,
                    })),
                });
            }
            Property::All => unreachable!("expanded above"),
        }
    }

    let mut table = Table::new(&["check", "sample", "value", "tolerance", "passed"]);
    let mut violations = Vec::new();
    let mut non_converged = 0;
    let mut summaries = Vec::new();
    for c in checks {
        for (i, v) in c.summary.values.iter().enumerate() {
            let passed = v.is_some() && !c.violations.iter().any(|x| x.sample == i);
            table.push(vec![
                c.summary.check.clone(),
                i.to_string(),
                v.map(num).unwrap_or_default(),
                num(c.summary.tolerance),
                passed.to_string(),
            ]);
        }
        non_converged += c.summary.non_converged;
        violations.extend(c.violations);
        let mut s = to_json(&c.summary);
        if let (Some(extra), Some(obj)) = (c.extra, s.as_object_mut()) {
            obj.insert("scan".into(), extra);
        }
        summaries.push(s);
    }
    let results = json!({
        "model": model.id(),
        "quadrature": QuadratureInfo::of(&grid),
        "checks": summaries,
    });
    let code = exit_code(&violations, non_converged);
    Ok(finish("verify", to_json(&VerifyEcho { run, property }), started, results, violations, table, code))
}

#[derive(Serialize)]
struct JscanEcho<'a> {
    #[serde(flatten)]
    run: &'a RunConfig,
    volume_samples: usize,
}

pub fn jscan_command(run: &RunConfig, volume_samples: usize) -> Result<Outcome, CliError> {
    let started = now();
    run.validate()?;
    let grid = run.grid()?;
    let scan = jscan(
        &grid,
        &ScanConfig {
            samples: run.samples,
            seed: run.seed,
            radius: run.radius,
            volume_samples,
            cprime: run.cprime,
            solver: run.solver(),
        },
    );
    let mut table = Table::new(&[
        "sample",
        "sigma",
        "j_value",
        "abs_jacobian",
        "bound",
        "det_k",
        "zero_jacobian",
        "iterations",
        "volume",
        "volume_stderr",
        "passed",
    ]);
    for e in &scan.entries {
        table.push(vec![
            e.sample.to_string(),
            join(&e.sigma),
            num(e.j_value),
            num(e.abs_jacobian),
            num(e.bound),
            num(e.det_k),
            e.zero_jacobian.to_string(),
            e.iterations.to_string(),
            e.volume.map(num).unwrap_or_default(),
            e.volume_stderr.map(num).unwrap_or_default(),
            e.passed.to_string(),
        ]);
    }
    let code = exit_code(&scan.violations, scan.non_converged);
    let violations = scan.violations.clone();
    Ok(finish("jscan", to_json(&JscanEcho { run, volume_samples }), started, to_json(&scan), violations, table, code))
}

/// `{"model": ..., "vertices": [[...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplexFile {
    pub model: String,
    pub vertices: Vec<Vec<f64>>,
}

impl SimplexFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::SimplexFile(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::SimplexFile(format!("{}: {e}", path.display())))
    }

    /// Validates the model and projects the vertices onto the hyperboloid.
    pub fn points(&self) -> Result<(Model, Vec<ModelPoint>), CliError> {
        let model = Model::from_id(&self.model).map_err(|e| CliError::SimplexFile(e.to_string()))?;
        if self.vertices.is_empty() {
            return Err(CliError::SimplexFile("no vertices".into()));
        }
        let points = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                model
                    .project_point(v, VERTEX_INPUT_TOL)
                    .map_err(|e| CliError::SimplexFile(format!("vertex {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((model, points))
    }
}

/// Loads a simplex file and reconciles its model with an explicit `--model`.
pub fn load_simplex(path: &Path, model_flag: Option<&str>) -> Result<(Model, Vec<ModelPoint>), CliError> {
    let file = SimplexFile::read(path)?;
    let (model, points) = file.points()?;
    if let Some(flag) = model_flag {
        let m = parse_model(flag)?;
        if m != model {
            return Err(CliError::Config(format!("--model {} does not match the simplex file model {}", m.id(), model.id())));
        }
    }
    Ok((model, points))
}

/// Integer points `i` with `sum i = per_edge` in `k + 1` coordinates, in
/// lexicographic order.
pub fn lattice(k: usize, per_edge: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, left: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for i in (0..=left).rev() {
            prefix.push(i);
            fill(prefix, left - i, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(&mut Vec::new(), per_edge, k + 1, &mut out);
    out
}

#[derive(Serialize)]
struct StraightenEcho<'a> {
    #[serde(flatten)]
    run: &'a RunConfig,
    simplex: &'a Path,
    vertices: Vec<Vec<f64>>,
    grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StraightenedPoint {
    pub lattice: Vec<usize>,
    pub sigma: Vec<f64>,
    pub point: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub gradient_norm: Option<f64>,
}

pub fn straighten(run: &RunConfig, simplex: &Path, vertices: Vec<ModelPoint>, per_edge: usize) -> Result<Outcome, CliError> {
    let started = now();
    run.validate()?;
    if per_edge == 0 {
        return Err(CliError::Config("--grid must be positive".into()));
    }
    let model = run.model()?;
    let grid = run.grid()?;
    let solver = run.solver();
    let v = VertexTuple::new(&grid, vertices.clone()).map_err(|e| CliError::SimplexFile(e.to_string()))?;
    let k = v.degree();
    let nodes = lattice(k, per_edge);
    let solved: Vec<(StraightenedPoint, Option<StraightenError>)> = nodes
        .par_iter()
        .map(|idx| {
            let b: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
            let sigma = SphericalSimplexPoint::from_barycentric(&b).expect("lattice weights are non-negative");
            let coords = sigma.coords().to_vec();
            match straighten_point_full(&v, &sigma, &solver) {
                Ok(r) => (
                    StraightenedPoint {
                        lattice: idx.clone(),
                        sigma: coords,
                        point: Some(r.point.to_vec()),
                        iterations: Some(r.iterations),
                        gradient_norm: Some(r.gradient_norm),
                    },
                    None,
                ),
                Err(e) => (
                    StraightenedPoint {
                        lattice: idx.clone(),
                        sigma: coords,
                        point: None,
                        iterations: None,
                        gradient_norm: None,
                    },
                    Some(e),
                ),
            }
        })
        .collect();

    let mut violations = Vec::new();
    let mut non_converged = 0;
    let mut vertex_error: f64 = 0.0;
    let mut table = Table::new(&["sample", "lattice", "sigma", "point", "iterations", "gradient_norm"]);
    for (i, (p, err)) in solved.iter().enumerate() {
        if let Some(e) = err {
            if matches!(e, StraightenError::Solver(_)) {
                non_converged += 1;
            }
            violations.push(violation(i, "solver", e.to_string()));
        }
        if let (Some(j), Some(pt)) = (p.lattice.iter().position(|&c| c == per_edge), &p.point) {
            let y = model.project_point(pt, 1e-9).map_err(|e| CliError::Io(e.to_string()))?;
            let d = model.distance(&y, &vertices[j]);
            vertex_error = vertex_error.max(d);
            if !(d <= VERTEX_TOL) {
                violations.push(violation(i, "vertex-interpolation", format!("vertex {j} reproduced at distance {d:e}")));
            }
        }
        table.push(vec![
            i.to_string(),
            p.lattice.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
            join(&p.sigma),
            p.point.as_deref().map(join).unwrap_or_default(),
            p.iterations.map(|c| c.to_string()).unwrap_or_default(),
            p.gradient_norm.map(num).unwrap_or_default(),
        ]);
    }
    let points: Vec<StraightenedPoint> = solved.into_iter().map(|(p, _)| p).collect();
    let results = json!({
        "model": model.id(),
        "degree": k,
        "quadrature": QuadratureInfo::of(&grid),
        "per_edge": per_edge,
        "vertex_error": vertex_error,
        "vertex_tolerance": VERTEX_TOL,
        "points": points,
    });
    let echo = StraightenEcho {
        run,
        simplex,
        vertices: vertices.iter().map(|p| p.to_vec()).collect(),
        grid: per_edge,
    };
    let code = exit_code(&violations, non_converged);
    Ok(finish("straighten", to_json(&echo), started, results, violations, table, code))
}

#[derive(Serialize)]
struct BarycenterEcho<'a> {
    #[serde(flatten)]
    run: &'a RunConfig,
    simplex: &'a Path,
    vertices: Vec<Vec<f64>>,
    weights: &'a [f64],
}

/// Barycenter of `sum w_i nu(x_i)` for barycentric weights `w` (normalised to sum 1).
pub fn barycenter(run: &RunConfig, simplex: &Path, vertices: Vec<ModelPoint>, weights: Option<Vec<f64>>) -> Result<Outcome, CliError> {
    let started = now();
    run.validate()?;
    let grid = run.grid()?;
    let solver = run.solver();
    let weights = weights.unwrap_or_else(|| vec![1.0; vertices.len()]);
    if weights.len() != vertices.len() {
        return Err(CliError::Config(format!("{} weights for {} vertices", weights.len(), vertices.len())));
    }
    let sigma = SphericalSimplexPoint::from_barycentric(&weights).map_err(|e| CliError::Config(format!("--weights: {e}")))?;
    let v = VertexTuple::new(&grid, vertices.clone()).map_err(|e| CliError::SimplexFile(e.to_string()))?;
    let echo = BarycenterEcho {
        run,
        simplex,
        vertices: vertices.iter().map(|p| p.to_vec()).collect(),
        weights: &weights,
    };
    let mut table = Table::new(&["point", "iterations", "gradient_norm", "g_value", "det_k", "det_h", "j_value"]);
    let (results, violations, code) = match straighten_point_full(&v, &sigma, &solver).and_then(|r| Ok((r, endomorphisms_hk(&v, &sigma, &solver)?))) {
        Ok((r, e)) => {
            table.push(vec![
                join(r.point.as_slice()),
                r.iterations.to_string(),
                num(r.gradient_norm),
                num(r.g_value),
                num(e.k.determinant()),
                num(e.h.determinant()),
                num(e.j_value()),
            ]);
            let results = json!({
                "model": run.model,
                "quadrature": QuadratureInfo::of(&grid),
                "sigma": sigma.coords(),
                "point": r.point.to_vec(),
                "iterations": r.iterations,
                "gradient_norm": r.gradient_norm,
                "g_value": r.g_value,
                "g_trace": r.g_trace,
                "det_trace": r.det_trace,
                "det_k": e.k.determinant(),
                "det_h": e.h.determinant(),
                "j_value": e.j_value(),
            });
            (results, Vec::new(), EXIT_OK)
        }
        Err(e) => {
            let code = if matches!(e, StraightenError::Solver(_)) { EXIT_NON_CONVERGENCE } else { EXIT_VIOLATIONS };
            (json!({ "model": run.model, "error": e.to_string() }), vec![violation(0, "solver", e.to_string())], code)
        }
    };
    Ok(finish("barycenter", to_json(&echo), started, results, violations, table, code))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimvolRequest {
    pub expression: String,
    /// Target of the degree bound `|deg(f: N -> M)|`, with `N` the expression.
    pub target: Option<String>,
    #[serde(flatten)]
    pub constants: EvalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimvolResult {
    pub interval: BoundInterval,
    pub uses_configured_constants: bool,
    pub euler_bound: f64,
    pub target: Option<BoundInterval>,
    pub degree_bound: Option<DegreeBound>,
}

fn expression_error(what: &str, e: SimvolError) -> CliError {
    CliError::Expression(format!("{what}: {e}"))
}

pub fn simvol_command(req: &SimvolRequest) -> Result<Outcome, CliError> {
    let started = now();
    let interval = simvol::evaluate_str(&req.expression, &req.constants).map_err(|e| expression_error("expression", e))?;
    let (target, degree) = match &req.target {
        Some(t) => {
            let m = simvol::evaluate_str(t, &req.constants).map_err(|e| expression_error("target", e))?;
            let d = degree_bound(&interval, &m).map_err(|e| expression_error("degree bound", e))?;
            (Some(m), Some(d))
        }
        None => (None, None),
    };
    let mut table = Table::new(&["step", "rule", "detail", "constants"]);
    for (i, s) in interval.trace.iter().enumerate() {
        let constants: Vec<String> = s.constants.iter().map(|c| format!("{}={}", c.name, num(c.value))).collect();
        table.push(vec![i.to_string(), s.rule.clone(), s.detail.clone(), constants.join(" ")]);
    }
    let result = SimvolResult {
        uses_configured_constants: interval.uses_configured_constants() || target.as_ref().is_some_and(|t| t.uses_configured_constants()),
        euler_bound: euler_bound(&interval),
        interval,
        target,
        degree_bound: degree,
    };
    Ok(finish("simvol", to_json(req), started, to_json(&result), Vec::new(), table, EXIT_OK))
}

/// Parses `n=value` pairs of constant overrides.
pub fn parse_constants(pairs: &[String]) -> Result<BTreeMap<usize, f64>, CliError> {
    pairs
        .iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("expected DIM=VALUE, got {p:?}")))?;
            let dim = k.trim().parse::<usize>().map_err(|e| CliError::Config(format!("{p:?}: {e}")))?;
            let value = v.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{p:?}: {e}")))?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(CliError::Config(format!("{p:?}: constants must be positive")));
            }
            Ok((dim, value))
        })
        .collect()
}

/// Re-runs the command recorded in a report, for fixed-seed replay.
pub fn replay(report: &Report) -> Result<Outcome, CliError> {
    let cfg = &report.config;
    let field = |name: &str| cfg.get(name).cloned().ok_or_else(|| CliError::Config(format!("report config lacks {name}")));
    let de = |e: serde_json::Error| CliError::Config(format!("report config: {e}"));
    match report.command.as_str() {
        "simvol" => simvol_command(&serde_json::from_value(cfg.clone()).map_err(de)?),
        cmd => {
            let run: RunConfig = serde_json::from_value(cfg.clone()).map_err(de)?;
            match cmd {
                "verify" => verify(&run, serde_json::from_value(field("property")?).map_err(de)?),
                "jscan" => jscan_command(&run, serde_json::from_value(field("volume_samples")?).map_err(de)?),
                "straighten" | "barycenter" => {
                    let model = run.model()?;
                    let coords: Vec<Vec<f64>> = serde_json::from_value(field("vertices")?).map_err(de)?;
                    let vertices = coords
                        .iter()
                        .map(|c| model.project_point(c, VERTEX_INPUT_TOL).map_err(|e| CliError::Config(e.to_string())))
                        .collect::<Result<Vec<_>, _>>()?;
                    let simplex: PathBuf = serde_json::from_value(field("simplex")?).map_err(de)?;
                    if cmd == "straighten" {
                        straighten(&run, &simplex, vertices, serde_json::from_value(field("grid")?).map_err(de)?)
                    } else {
                        barycenter(&run, &simplex, vertices, Some(serde_json::from_value(field("weights")?).map_err(de)?))
                    }
                }
                other => Err(CliError::Config(format!("unknown command {other:?} in report"))),
            }
        }
    }
}
