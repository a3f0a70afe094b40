//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bstraight::barycenter::{barycenter, SolverSettings};
use bstraight::busemann::{busemann, busemann_one_form, busemann_two_form};
use bstraight::isometry::random_isometry_with;
use bstraight::jacobian::{derivative_check, jacobian, symmetric_endomorphisms};
use bstraight::measure::{ps_density, weighted_combination};
use bstraight::model::{BoundaryPoint, Model};
use bstraight::quadrature::{build_grid, default_resolution, QuadratureGrid};
use bstraight::sampling::{derived_rng, sample_interior_simplex_point, sample_point_in_ball, sample_simplex_point, sample_vertices};
use bstraight::simvol::{degree_bound, euler_bound, evaluate_str, DegreeBound, EvalConfig, V3};
use bstraight::straighten::{
    geodesic_homotopy, straighten_point, verify_equivariance, verify_face_compatibility, SingularSimplex, VertexTuple,
};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_models() -> Vec<Model> {
    ["h2", "h3", "h4", "h5", "h2xh2"].iter().map(|id| Model::from_id(id).unwrap()).collect()
}

fn grid(m: &Model) -> QuadratureGrid {
    build_grid(m, default_resolution(m), 0).unwrap()
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn lorentz(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() - 1;
    (0..n).map(|i| a[i] * b[i]).sum::<f64>() - a[n] * b[n]
}

fn random_theta<R: Rng>(m: &Model, rng: &mut R) -> BoundaryPoint {
    let d: usize = m.factor_dims().iter().sum();
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    m.boundary_from_directions(&v).unwrap()
}

fn busemann_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        let m = Model::hyperbolic(n).unwrap();
        for i in 0..100 {
            let mut rng = derived_rng(101, i);
            let p = sample_point_in_ball(&m, 2.0, &mut rng);
            let x = sample_point_in_ball(&m, 2.0, &mut rng);
            let th = random_theta(&m, &mut rng);
            // ray from p toward theta: cosh(t) p + sinh(t) (xi / -<p, xi> - p)
            let s = -lorentz(p.as_slice(), th.as_slice());
            let t = 20.0f64;
            let ray: Vec<f64> = p
                .as_slice()
                .iter()
                .zip(th.as_slice())
                .map(|(pi, xi)| t.cosh() * pi + t.sinh() * (xi / s - pi))
                .collect();
            let d = (-lorentz(x.as_slice(), &ray)).acosh();
            worst = worst.max((busemann(&m, &p, &x, &th) - (d - t)).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max error {worst:e} > 1e-6"))?;
    Ok(format!("max |B - (d - 20)| = {worst:.2e} over 200 samples"))
}

fn derivative_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in all_models() {
        for i in 0..100 {
            let mut rng = derived_rng(102, i);
            let p = m.basepoint();
            let x = sample_point_in_ball(&m, 2.0, &mut rng);
            let th = random_theta(&m, &mut rng);
            let coords: Vec<f64> = (0..m.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = m.from_frame(&x, &coords);
            let b = |t: f64| busemann(&m, &p, &m.exp_map(&x, &u, t), &th);
            let d1 = busemann_one_form(&m, &x, &th, &u);
            let d2 = busemann_two_form(&m, &x, &th, &u, &u);
            for h in [1e-4, 1e-3] {
                let fd1 = (b(h) - b(-h)) / (2.0 * h);
                let fd2 = (b(h) - 2.0 * b(0.0) + b(-h)) / (h * h);
                let e1 = (fd1 - d1).abs() / d1.abs().max(1.0);
                let e2 = (fd2 - d2).abs() / d2.abs().max(1.0);
                worst = worst.max(e1).max(e2);
            }
        }
    }
    ensure(worst <= 1e-5, || format!("finite-difference error {worst:e} > 1e-5"))?;
    let mut eig_err: f64 = 0.0;
    for n in 2..=5 {
        let m = Model::hyperbolic(n).unwrap();
        for i in 0..20 {
            let mut rng = derived_rng(103, i);
            let x = sample_point_in_ball(&m, 3.0, &mut rng);
            let th = random_theta(&m, &mut rng);
            let basis = m.orthonormal_tangent_basis(&x);
            let mat = DMatrix::from_fn(n, n, |a, c| busemann_two_form(&m, &x, &th, &basis[a], &basis[c]));
            let mut ev: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().cloned().collect();
            ev.sort_by(f64::total_cmp);
            eig_err = eig_err.max(ev[0].abs());
            for e in &ev[1..] {
                eig_err = eig_err.max((e - 1.0).abs());
            }
        }
    }
    ensure(eig_err <= 1e-8, || format!("DdB spectrum off by {eig_err:e}"))?;
    Ok(format!("fd error {worst:.2e}, spectrum error {eig_err:.2e}"))
}

fn symmetric_anchors() -> Outcome {
    let mut parts = Vec::new();
    for m in all_models() {
        let n = m.dimension();
        let e = symmetric_endomorphisms(&grid(&m), &m.basepoint());
        let (k, h, j) = if m.rank() == 1 {
            let nf = n as f64;
            ((nf - 1.0) / nf, 1.0 / nf, nf.powf(nf / 2.0) / (nf - 1.0).powi(n as i32))
        } else {
            // per factor of H^2 x H^2 with Busemann weight w = 1/sqrt 2: K = w/2, H = w^2/2
            let w = 0.5f64.sqrt();
            let (k, h) = (w / 2.0, w * w / 2.0);
            (k, h, h.powi(2) / k.powi(4))
        };
        let id = DMatrix::<f64>::identity(n, n);
        let dk = (&e.k.matrix - &id * k).amax();
        let dh = (&e.h.matrix - &id * h).amax();
        ensure(dk <= 1e-3 && dh <= 1e-3, || format!("{m}: K off by {dk:e}, H off by {dh:e}"))?;
        let jv = e.j_value();
        ensure((jv - j).abs() <= 1e-3 * j.max(1.0), || format!("{m}: J = {jv} expected {j}"))?;
        parts.push(format!("{m} J={jv:.4}"));
    }
    Ok(parts.join(", "))
}

fn barycenter_correctness() -> Outcome {
    let mut worst_fix: f64 = 0.0;
    let mut worst_mid: f64 = 0.0;
    let mut max_iter = 0;
    for m in all_models() {
        let g = grid(&m);
        // radius within which the default grid resolves the kernel to 1e-8
        let r = if m.id() == "h5" { 0.5 } else { 1.0 };
        for i in 0..20 {
            let x = sample_point_in_ball(&m, r, &mut derived_rng(104, i));
            let res = barycenter(&ps_density(&g, &x), &settings(), None).map_err(|e| format!("{m}: {e}"))?;
            worst_fix = worst_fix.max(m.distance(&res.point, &x));
            max_iter = max_iter.max(res.iterations);
        }
        for i in 0..5 {
            let mut rng = derived_rng(105, i);
            let x = sample_point_in_ball(&m, r, &mut rng);
            let y = sample_point_in_ball(&m, r, &mut rng);
            let s = 0.5f64.sqrt();
            let mu = weighted_combination(&[s, s], &[ps_density(&g, &x), ps_density(&g, &y)]).unwrap();
            let res = barycenter(&mu, &settings(), None).map_err(|e| format!("{m}: {e}"))?;
            let mid = m.exp_map(&x, &m.log_map(&x, &y), 0.5);
            worst_mid = worst_mid.max(m.distance(&res.point, &mid));
            max_iter = max_iter.max(res.iterations);
        }
    }
    ensure(worst_fix <= 1e-8, || format!("bar(nu(x)) off by {worst_fix:e}"))?;
    ensure(worst_mid <= 1e-7, || format!("midpoint off by {worst_mid:e}"))?;
    ensure(max_iter <= 15, || format!("{max_iter} Newton iterations"))?;
    Ok(format!("fixed point {worst_fix:.2e}, midpoint {worst_mid:.2e}, max iterations {max_iter}"))
}

fn equivariance() -> Outcome {
    let mut parts = Vec::new();
    for m in all_models() {
        let g = grid(&m);
        let n = m.dimension();
        let mut worst: f64 = 0.0;
        for i in 0..50 {
            let mut rng = derived_rng(106, i);
            let gamma = random_isometry_with(&m, &mut rng);
            let v = VertexTuple::new(&g, sample_vertices(&m, n + 1, 2.0, &mut rng)).unwrap();
            let r = verify_equivariance(&v, &gamma, 1, i, &settings()).map_err(|e| format!("{m}: {e}"))?;
            worst = worst.max(r.max_discrepancy);
        }
        ensure(worst <= 1e-6, || format!("{m}: {worst:e}"))?;
        parts.push(format!("{m} {worst:.1e}"));
    }
    Ok(parts.join(", "))
}

fn faces_and_homotopy() -> Outcome {
    let cases = [("h2", 2), ("h3", 2), ("h3", 3), ("h4", 3), ("h2xh2", 2), ("h2xh2", 3)];
    let mut worst_face: f64 = 0.0;
    let mut worst_end: f64 = 0.0;
    for (id, k) in cases {
        let m = Model::from_id(id).unwrap();
        let g = grid(&m);
        for s in 0..3 {
            let v = VertexTuple::new(&g, sample_vertices(&m, k + 1, 3.0, &mut derived_rng(107, 10 * k as u64 + s))).unwrap();
            let r = verify_face_compatibility(&v, 25, s, &settings()).map_err(|e| format!("{id} k={k}: {e}"))?;
            ensure(r.samples == 25 * (k + 1), || "wrong face sample count".into())?;
            worst_face = worst_face.max(r.max_discrepancy);
            let f = SingularSimplex::geodesic_cone(v.clone());
            for t in 0..5 {
                let sigma = sample_simplex_point(k, &mut derived_rng(108, 10 * s + t));
                let start = geodesic_homotopy(&f, 0.0, &sigma, &settings()).map_err(|e| e.to_string())?;
                let end = geodesic_homotopy(&f, 1.0, &sigma, &settings()).map_err(|e| e.to_string())?;
                let st = straighten_point(&v, &sigma, &settings()).map_err(|e| e.to_string())?;
                worst_end = worst_end.max(m.distance(&start, &f.evaluate(&sigma))).max(m.distance(&end, &st));
            }
        }
    }
    ensure(worst_face <= 1e-7, || format!("face discrepancy {worst_face:e}"))?;
    ensure(worst_end <= 1e-7, || format!("homotopy endpoint error {worst_end:e}"))?;
    Ok(format!("faces {worst_face:.1e}, homotopy endpoints {worst_end:.1e}"))
}

fn c1() -> Outcome {
    let mut parts = Vec::new();
    for id in ["h2", "h3"] {
        let m = Model::from_id(id).unwrap();
        let g = grid(&m);
        let n = m.dimension();
        let mut worst: f64 = 0.0;
        let mut residual: f64 = 0.0;
        for i in 0..50 {
            let mut rng = derived_rng(109, i);
            let v = VertexTuple::new(&g, sample_vertices(&m, n + 1, 2.0, &mut rng)).unwrap();
            let sigma = sample_interior_simplex_point(n, 0.05, &mut rng);
            let c = derivative_check(&v, &sigma, 1e-4, &settings()).map_err(|e| format!("{id}: {e}"))?;
            worst = worst.max(c.relative_error);
            residual = residual.max(c.residual);
        }
        ensure(residual <= 1e-8, || format!("{id}: implicit residual {residual:e}"))?;
        ensure(worst <= 1e-3, || format!("{id}: finite-difference error {worst:e}"))?;
        parts.push(format!("{id} fd {worst:.1e} residual {residual:.1e}"));
    }
    Ok(parts.join(", "))
}

fn core_bound() -> Outcome {
    let mut parts = Vec::new();
    for (id, count) in [("h3", 200u64), ("h2xh2", 100)] {
        let m = Model::from_id(id).unwrap();
        let g = grid(&m);
        let n = m.dimension();
        let mut violations = Vec::new();
        let mut sup_ratio: f64 = 0.0;
        let mut max_iter = 0;
        for i in 0..count {
            let mut rng = derived_rng(110, i);
            let v = VertexTuple::new(&g, sample_vertices(&m, n + 1, 3.0, &mut rng)).unwrap();
            let sigma = sample_simplex_point(n, &mut rng);
            let r = jacobian(&v, &sigma, &settings()).map_err(|e| format!("{id} sample {i}: {e}"))?;
            if !r.passed || r.abs_jacobian > r.bound + 1e-8 {
                violations.push(format!("{i}: {:?}", r.failures()));
            }
            sup_ratio = sup_ratio.max(r.abs_jacobian / r.bound);
            max_iter = max_iter.max(r.iterations);
        }
        ensure(violations.is_empty(), || format!("{id}: {} violations, first {}", violations.len(), violations[0]))?;
        ensure(max_iter <= 15, || format!("{id}: {max_iter} Newton iterations"))?;
        parts.push(format!("{id} {count} ok, sup |Jac|/2^n J = {sup_ratio:.3}"));
    }
    Ok(parts.join(", "))
}

/// `-int_0^theta log|2 sin t| dt`, with the singular `log t` part integrated
/// exactly and the smooth remainder by composite Simpson.
fn lobachevsky(theta: f64) -> f64 {
    let smooth = |t: f64| if t == 0.0 { 2f64.ln() } else { (2.0 * t.sin() / t).ln() };
    let n = 20_000;
    let h = theta / n as f64;
    let mut s = smooth(0.0) + smooth(theta);
    for i in 1..n {
        s += smooth(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    -(s * h / 3.0 + theta * theta.ln() - theta)
}

fn calculator() -> Outcome {
    let c = EvalConfig::default();
    let v3 = 3.0 * lobachevsky(std::f64::consts::PI / 3.0);
    ensure((v3 - V3).abs() <= 1e-8, || format!("v3 oracle {v3} vs {V3}"))?;
    let ev = |s: &str| evaluate_str(s, &c).map_err(|e| e.to_string());
    let s2 = ev("surface(genus=2)")?;
    ensure(s2.lo == 4.0 && s2.hi == 4.0, || format!("surface(2) = [{}, {}]", s2.lo, s2.hi))?;
    let h = ev(&format!("hyperbolic(3, vol={})", 2.0 * v3))?;
    ensure((h.lo - 2.0).abs() <= 1e-4 && h.is_exact(), || format!("hyperbolic = {}", h.lo))?;
    let a = ev("opaque(dim=3, simvol=[1.25, 2.5])")?;
    let b = ev("hyperbolic(3, vol=2)")?;
    let cs = ev("connect_sum(opaque(dim=3, simvol=[1.25, 2.5]), hyperbolic(3, vol=2))")?;
    ensure(cs.lo == a.lo + b.lo && cs.hi == a.hi + b.hi, || "connect_sum not additive".into())?;
    let s3 = ev("surface(genus=3)")?;
    let p = ev("product(surface(genus=3), surface(genus=2))")?;
    ensure(p.lo == s3.lo * s2.lo, || format!("product lower bound {}", p.lo))?;
    let d = degree_bound(&s3, &s2).map_err(|e| e.to_string())?;
    ensure(d == DegreeBound::Bounded(2), || format!("degree bound {d:?}"))?;
    ensure(euler_bound(&s2) == 1.0, || format!("euler bound {}", euler_bound(&s2)))?;
    Ok(format!("v3 oracle error {:.1e}", (v3 - V3).abs()))
}

fn run_cli(args: &[&str], threads: &str, out: &Path) -> Result<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_bstraight"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("BSTRAIGHT_THREADS", threads)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.code() == Some(0), || format!("{args:?} exited with {status}"))?;
    std::fs::read_to_string(out).map_err(|e| e.to_string())
}

/// Replaces the two timestamp values, leaving every other byte in place.
fn blank_timestamps(text: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut out = text.to_string();
    for key in ["started", "finished"] {
        let stamp = v["timestamps"][key].as_str().ok_or("missing timestamp")?;
        out = out.replacen(stamp, "", 1);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 3] = [
        &["jscan", "--model", "h2xh2", "--samples", "100", "--seed", "1"],
        &["verify", "--model", "h3", "--property", "all", "--samples", "20", "--seed", "2"],
        &["jscan", "--model", "h2", "--samples", "30", "--seed", "3", "--volume-samples", "16"],
    ];
    for (r, args) in runs.iter().enumerate() {
        let mut texts = Vec::new();
        for threads in ["1", "4"] {
            let path = dir.path().join(format!("run{r}_{threads}.json"));
            texts.push(blank_timestamps(&run_cli(args, threads, &path)?)?);
        }
        ensure(texts[0] == texts[1], || format!("{args:?}: reports differ between 1 and 4 workers"))?;
    }
    Ok("jscan and verify reports byte-identical across 1 and 4 workers".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("busemann-fidelity", busemann_fidelity),
        ("derivative-fidelity", derivative_fidelity),
        ("symmetric-anchors", symmetric_anchors),
        ("barycenter-correctness", barycenter_correctness),
        ("equivariance", equivariance),
        ("faces-and-homotopy", faces_and_homotopy),
        ("c1-derivative", c1),
        ("jacobian-bound-chain", core_bound),
        ("calculator", calculator),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
