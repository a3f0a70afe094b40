//! Derivative and Jacobian of straightened simplices.
//!
//! At `y = st_V(sigma)` with `mu = sum a_i^2 nu(x_i)`, the defining equation
//! `int dB_(y,theta) dmu = 0` differentiates to
//!
//! ```text
//! K_sigma D(st_V)_sigma u = - L_sigma u,   L_sigma u = sum_i 2 a_i u_i G_i
//! ```
//!
//! where `G_i` is the metric dual of `int dB_(y,.) dnu(x_i)`. For top-degree
//! simplices the Jacobian is bounded through the chain
//!
//! ```text
//! det K |Jac| = |det(K D)| = prod_j |<K D u_j, v_j>|
//!   <= prod_j 2 |u_j| (sum_i a_i^2 <G_i, v_j>^2)^{1/2}
//!   <= prod_j 2 <H v_j, v_j>^{1/2} = 2^n det(H)^{1/2}
//! ```
//!
//! with `v_j` an eigenbasis of `H` and `u_j` the Gram–Schmidt
//! orthonormalisation of `(K D)^{-1} v_j`. [`jacobian`] evaluates every term.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{
    covariance_from_second, hessian_from_second, one_forms, BarycenterResult, FrameOperator, SolverSettings,
};
use crate::error::{SolverError, StraightenError};
use crate::measure::{pairwise_sum, ps_density};
use crate::model::{Model, ModelPoint};
use crate::quadrature::{GridScheme, QuadratureGrid};
use crate::sampling::{derived_rng, sample_orthant_point, sample_simplex_point, sample_vertices};
use crate::straighten::{
    straighten_chain, straighten_point, straighten_point_full, chain_l1_norm, Chain, SphericalSimplexPoint,
    VertexTuple,
};

/// Relative tolerance for the equalities of the chain.
pub const CHAIN_EQ_TOL: f64 = 1e-8;
/// Relative tolerance for the inequalities of the chain.
pub const CHAIN_INEQ_TOL: f64 = 1e-10;
/// Absolute slack in `|Jac| <= 2^n J`.
pub const BOUND_TOL: f64 = 1e-8;
/// Residual allowed when solving the derivative equation.
pub const DERIVATIVE_RESIDUAL_TOL: f64 = 1e-8;
/// `K D` counts as singular when its smallest singular value is below this
/// fraction of `max(|K D|, |K|)`.
pub const ZERO_JACOBIAN_REL: f64 = 1e-10;

/// Everything at `st_V(sigma)` that the derivative and the bounds need.
struct Local {
    solve: BarycenterResult,
    frame: DMatrix<f64>,
    /// `K_sigma` in the frame.
    k: DMatrix<f64>,
    /// `H_sigma` from the combined measure.
    h: DMatrix<f64>,
    /// `sum_i a_i^2 H(nu(x_i))`, the same operator assembled vertex by vertex.
    h_split: DMatrix<f64>,
    /// Columns `G_i` in frame coordinates.
    g: DMatrix<f64>,
}

fn analyse(v: &VertexTuple, sigma: &SphericalSimplexPoint, settings: &SolverSettings) -> Result<Local, StraightenError> {
    let solve = straighten_point_full(v, sigma, settings)?;
    let model = v.model();
    let y = &solve.point;
    let frame = model.tangent_frame(y);
    let atoms = v.grid().atoms();
    let (b, _) = one_forms(atoms, y, &frame);
    let w = model.busemann_weight();
    let n = model.dimension();
    let a = sigma.coords();

    let mu = v.measure_at(sigma)?;
    let second = weighted_gram(&b, mu.masses());
    let k = hessian_from_second(model, &second);
    let h = covariance_from_second(model, &second);

    let mut g = DMatrix::zeros(n, a.len());
    let mut h_split = DMatrix::zeros(n, n);
    for (i, nu) in v.measures().iter().enumerate() {
        let m = DVector::from_column_slice(nu.masses());
        g.set_column(i, &((&b * m) * w));
        if a[i] != 0.0 {
            h_split += covariance_from_second(model, &weighted_gram(&b, nu.masses())) * (a[i] * a[i]);
        }
    }
    let det = k.determinant();
    if !(det > 0.0) {
        return Err(SolverError::DegenerateHessian { det }.into());
    }
    Ok(Local {
        solve,
        frame,
        k,
        h,
        h_split,
        g,
    })
}

fn weighted_gram(b: &DMatrix<f64>, masses: &[f64]) -> DMatrix<f64> {
    let mut weighted = b.clone();
    for (j, mut col) in weighted.column_iter_mut().enumerate() {
        col *= masses[j];
    }
    &weighted * b.transpose()
}

/// `H_sigma` and `K_sigma` at `st_V(sigma)`.
#[derive(Clone, Debug)]
pub struct Endomorphisms {
    pub h: FrameOperator,
    pub k: FrameOperator,
}

impl Endomorphisms {
    /// `det(H)^{1/2} / det(K)`.
    pub fn j_value(&self) -> f64 {
        self.h.determinant().max(0.0).sqrt() / self.k.determinant()
    }
}

pub fn endomorphisms_hk(
    v: &VertexTuple,
    sigma: &SphericalSimplexPoint,
    settings: &SolverSettings,
) -> Result<Endomorphisms, StraightenError> {
    let local = analyse(v, sigma, settings)?;
    let point = local.solve.point;
    Ok(Endomorphisms {
        h: FrameOperator {
            point: point.clone(),
            frame: local.frame.clone(),
            matrix: local.h,
        },
        k: FrameOperator {
            point,
            frame: local.frame,
            matrix: local.k,
        },
    })
}

/// `D(st_V)_sigma` as an `n x (k+1)` matrix from `R^{k+1}` to frame
/// coordinates at `st_V(sigma)`. Only its restriction to `T_sigma` (vectors
/// orthogonal to `sigma`) is meaningful.
#[derive(Clone, Debug)]
pub struct ImplicitDerivative {
    pub point: ModelPoint,
    pub frame: DMatrix<f64>,
    pub matrix: DMatrix<f64>,
    /// `|K D + L|_max / max(1, |L|_max)` on `T_sigma`.
    pub residual: f64,
}

impl ImplicitDerivative {
    /// Matrix of the derivative restricted to `T_sigma` in the basis `q`.
    pub fn on_basis(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        &self.matrix * q
    }
}

pub fn implicit_derivative(
    v: &VertexTuple,
    sigma: &SphericalSimplexPoint,
    settings: &SolverSettings,
) -> Result<ImplicitDerivative, StraightenError> {
    let local = analyse(v, sigma, settings)?;
    Ok(derivative_from(&local, sigma))
}

fn derivative_from(local: &Local, sigma: &SphericalSimplexPoint) -> ImplicitDerivative {
    let l = l_matrix(&local.g, sigma);
    let det = local.k.determinant();
    let chol = local.k.clone().cholesky().expect("K is positive definite at a converged barycenter");
    let d = -chol.solve(&l);
    let q = simplex_tangent_basis(sigma);
    let lq = &l * &q;
    let res = (&local.k * &d * &q + &lq).amax() / lq.amax().max(1.0);
    debug_assert!(det > 0.0);
    ImplicitDerivative {
        point: local.solve.point.clone(),
        frame: local.frame.clone(),
        matrix: d,
        residual: res,
    }
}

/// `L[:, i] = 2 a_i G_i`.
fn l_matrix(g: &DMatrix<f64>, sigma: &SphericalSimplexPoint) -> DMatrix<f64> {
    let mut l = g.clone();
    for (i, a) in sigma.coords().iter().enumerate() {
        l.column_mut(i).scale_mut(2.0 * a);
    }
    l
}

/// Orthonormal basis of `T_sigma Delta^k_s = sigma^perp` as columns of a
/// `(k+1) x k` matrix, oriented so that `det[sigma, Q] > 0`.
pub fn simplex_tangent_basis(sigma: &SphericalSimplexPoint) -> DMatrix<f64> {
    let a = sigma.coords();
    let dim = a.len();
    // complete sigma with the coordinate axes, skipping the one it leans on most
    let skip = (0..dim).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
    let mut m = DMatrix::zeros(dim, dim);
    m.set_column(0, &DVector::from_column_slice(a));
    for (col, i) in (1..).zip((0..dim).filter(|&i| i != skip)) {
        m[(i, col)] = 1.0;
    }
    let mut q = m.qr().q();
    if q.column(0).dot(&DVector::from_column_slice(a)) < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut basis = q.columns(1, dim - 1).into_owned();
    let mut full = DMatrix::zeros(dim, dim);
    full.set_column(0, &DVector::from_column_slice(a));
    full.columns_mut(1, dim - 1).copy_from(&basis);
    if dim > 1 && full.determinant() < 0.0 {
        basis.column_mut(dim - 2).neg_mut();
    }
    basis
}

/// The terms of the Jacobian bound chain, in the order they are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainValues {
    /// `det(K) |Jac|`.
    pub det_k_times_jac: f64,
    /// `|det(K D)|` computed as `|det(L Q)|`.
    pub det_kd: f64,
    /// `prod_j |<K D u_j, v_j>|`.
    pub triangular_product: f64,
    /// `prod_j 2 |u_j| (sum_i a_i^2 <G_i, v_j>^2)^{1/2}`.
    pub cauchy_schwarz: f64,
    /// `prod_j 2 (sum_i a_i^2 int dB(v_j)^2 dnu(x_i))^{1/2}`.
    pub second_moment: f64,
    /// `2^n det(H)^{1/2}`.
    pub eigen_product: f64,
    /// `max_j | |u_j| - 1 |`.
    pub unit_norm_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainChecks {
    pub jac_equals_det: bool,
    pub det_equals_triangular: bool,
    pub triangular_le_cauchy_schwarz: bool,
    pub cauchy_schwarz_le_second_moment: bool,
    pub second_moment_equals_eigen: bool,
    pub unit_vectors: bool,
}

impl ChainChecks {
    pub fn all(&self) -> bool {
        self.jac_equals_det
            && self.det_equals_triangular
            && self.triangular_le_cauchy_schwarz
            && self.cauchy_schwarz_le_second_moment
            && self.second_moment_equals_eigen
            && self.unit_vectors
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let named = [
            (self.jac_equals_det, "jac-equals-det"),
            (self.det_equals_triangular, "det-equals-triangular"),
            (self.triangular_le_cauchy_schwarz, "triangular-le-cauchy-schwarz"),
            (self.cauchy_schwarz_le_second_moment, "cauchy-schwarz-le-second-moment"),
            (self.second_moment_equals_eigen, "second-moment-equals-eigen"),
            (self.unit_vectors, "unit-vectors"),
        ];
        for (ok, name) in named {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub sigma: SphericalSimplexPoint,
    pub point: ModelPoint,
    /// Signed Jacobian in the frame at the image and the oriented basis of `T_sigma`.
    pub jacobian: f64,
    pub abs_jacobian: f64,
    pub det_k: f64,
    pub det_h: f64,
    pub j_value: f64,
    /// `2^n J`.
    pub bound: f64,
    pub zero_jacobian: bool,
    /// Absent at zero-Jacobian points, where the bases are not built.
    pub chain: Option<ChainValues>,
    pub checks: Option<ChainChecks>,
    pub derivative_residual: f64,
    pub bound_holds: bool,
    pub passed: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl JacobianReport {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = self.checks.as_ref().map(|c| c.failures()).unwrap_or_default();
        if !self.bound_holds {
            out.push("jacobian-bound");
        }
        if !(self.det_k > 0.0) {
            out.push("det-k-positive");
        }
        if !(self.derivative_residual <= DERIVATIVE_RESIDUAL_TOL) {
            out.push("derivative-residual");
        }
        out
    }
}

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn rel_le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs())
}

/// Evaluates `|Jac(st_V)(sigma)|` and every term of the bound chain.
pub fn jacobian(
    v: &VertexTuple,
    sigma: &SphericalSimplexPoint,
    settings: &SolverSettings,
) -> Result<JacobianReport, StraightenError> {
    let model = v.model();
    let n = model.dimension();
    if v.degree() != n {
        return Err(StraightenError::Degree {
            needed: format!("a {n}-simplex"),
            got: v.degree(),
        });
    }
    if sigma.degree() != n {
        return Err(StraightenError::DimensionMismatch {
            expected: n + 1,
            got: sigma.coords().len(),
        });
    }
    let local = analyse(v, sigma, settings)?;
    let deriv = derivative_from(&local, sigma);
    let q = simplex_tangent_basis(sigma);
    let dq = deriv.on_basis(&q);
    let jac = dq.determinant();
    let det_k = local.k.determinant();
    let det_h = local.h.determinant();
    let j_value = det_h.max(0.0).sqrt() / det_k;
    let two_n = 2f64.powi(n as i32);
    let bound = two_n * j_value;

    let lq = l_matrix(&local.g, sigma) * &q;
    let a_mat = -&lq; // K D restricted to T_sigma
    let det_kd = a_mat.determinant().abs();
    let sv = a_mat.singular_values();
    let scale = sv.max().max(spectral_norm(&local.k));
    let zero_jacobian = sv.min() <= ZERO_JACOBIAN_REL * scale || jac == 0.0;

    let (chain, checks) = if zero_jacobian {
        (None, None)
    } else {
        let values = bound_chain(&local, sigma, &q, &a_mat, det_k, jac, det_kd, n);
        let checks = ChainChecks {
            jac_equals_det: rel_eq(values.det_k_times_jac, values.det_kd, CHAIN_EQ_TOL),
            det_equals_triangular: rel_eq(values.det_kd, values.triangular_product, CHAIN_EQ_TOL),
            triangular_le_cauchy_schwarz: rel_le(values.triangular_product, values.cauchy_schwarz, CHAIN_INEQ_TOL),
            cauchy_schwarz_le_second_moment: rel_le(values.cauchy_schwarz, values.second_moment, CHAIN_INEQ_TOL),
            second_moment_equals_eigen: rel_eq(values.second_moment, values.eigen_product, CHAIN_EQ_TOL),
            unit_vectors: values.unit_norm_defect <= CHAIN_EQ_TOL,
        };
        (Some(values), Some(checks))
    };
    let bound_holds = jac.abs() <= bound + BOUND_TOL;
    let mut report = JacobianReport {
        sigma: sigma.clone(),
        point: local.solve.point.clone(),
        jacobian: jac,
        abs_jacobian: jac.abs(),
        det_k,
        det_h,
        j_value,
        bound,
        zero_jacobian,
        chain,
        checks,
        derivative_residual: deriv.residual,
        bound_holds,
        passed: false,
        iterations: local.solve.iterations,
        gradient_norm: local.solve.gradient_norm,
    };
    report.passed = report.failures().is_empty();
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn bound_chain(
    local: &Local,
    sigma: &SphericalSimplexPoint,
    q: &DMatrix<f64>,
    a_mat: &DMatrix<f64>,
    det_k: f64,
    jac: f64,
    det_kd: f64,
    n: usize,
) -> ChainValues {
    let eig = SymmetricEigen::new(local.h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vs: Vec<DVector<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();

    // u~_j = A^{-1} v_j in T_sigma coordinates, then Gram–Schmidt in order
    let lu = a_mat.clone().lu();
    let mut us: Vec<DVector<f64>> = Vec::with_capacity(n);
    for vj in &vs {
        let mut u = lu.solve(vj).expect("A is invertible away from zero-Jacobian points");
        for prev in &us {
            let c = prev.dot(&u);
            u -= prev * c;
        }
        let norm = u.norm();
        us.push(u / norm);
    }

    let a = sigma.coords();
    let mut triangular = 1.0;
    let mut cauchy = 1.0;
    let mut second = 1.0;
    let mut defect: f64 = 0.0;
    for (uj, vj) in us.iter().zip(&vs) {
        triangular *= (a_mat * uj).dot(vj).abs();
        // u_j as a vector of R^{k+1}
        let amb = q * uj;
        let unorm = amb.norm();
        defect = defect.max((unorm - 1.0).abs());
        let gv = local.g.tr_mul(vj);
        let weighted: f64 = a.iter().zip(gv.iter()).map(|(ai, g)| ai * ai * g * g).sum();
        cauchy *= 2.0 * unorm * weighted.sqrt();
        second *= 2.0 * vj.dot(&(&local.h_split * vj)).max(0.0).sqrt();
    }
    let eigen_product = 2f64.powi(n as i32) * local.h.determinant().max(0.0).sqrt();
    ChainValues {
        det_k_times_jac: det_k * jac.abs(),
        det_kd,
        triangular_product: triangular,
        cauchy_schwarz: cauchy,
        second_moment: second,
        eigen_product,
        unit_norm_defect: defect,
    }
}

/// Comparison of the implicit derivative with central differences on one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub sigma: SphericalSimplexPoint,
    pub step: f64,
    /// Spectral norm of `D` on `T_sigma`.
    pub derivative_norm: f64,
    /// Spectral norm of the difference to the finite-difference matrix.
    pub difference_norm: f64,
    /// `difference_norm / (1 + derivative_norm)`.
    pub relative_error: f64,
    pub residual: f64,
    pub passed: bool,
}

/// Relative tolerance for [`derivative_check`].
pub const DERIVATIVE_FD_TOL: f64 = 1e-3;

/// Central differences of `st_V` along the curves `(sigma + t q) / |sigma + t q|`
/// for each basis vector `q` of `T_sigma`. `sigma` must stay in the simplex for
/// `|t| <= step`.
pub fn derivative_check(
    v: &VertexTuple,
    sigma: &SphericalSimplexPoint,
    step: f64,
    settings: &SolverSettings,
) -> Result<DerivativeCheck, StraightenError> {
    let model = v.model();
    let deriv = implicit_derivative(v, sigma, settings)?;
    let q = simplex_tangent_basis(sigma);
    let dq = deriv.on_basis(&q);
    let y = &deriv.point;
    let mut fd = DMatrix::zeros(dq.nrows(), dq.ncols());
    for c in 0..q.ncols() {
        let plus = straighten_point(v, &curve_point(sigma, &q.column(c).into_owned(), step)?, settings)?;
        let minus = straighten_point(v, &curve_point(sigma, &q.column(c).into_owned(), -step)?, settings)?;
        let lp = model.to_frame(y, &model.log_map(y, &plus));
        let lm = model.to_frame(y, &model.log_map(y, &minus));
        fd.set_column(c, &((lp - lm) / (2.0 * step)));
    }
    let derivative_norm = spectral_norm(&dq);
    let difference_norm = spectral_norm(&(&dq - &fd));
    let relative_error = difference_norm / (1.0 + derivative_norm);
    Ok(DerivativeCheck {
        sigma: sigma.clone(),
        step,
        derivative_norm,
        difference_norm,
        relative_error,
        residual: deriv.residual,
        passed: relative_error <= DERIVATIVE_FD_TOL && deriv.residual <= DERIVATIVE_RESIDUAL_TOL,
    })
}

fn curve_point(sigma: &SphericalSimplexPoint, dir: &DVector<f64>, t: f64) -> Result<SphericalSimplexPoint, StraightenError> {
    let raw: Vec<f64> = sigma.coords().iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
    if raw.iter().any(|c| *c < 0.0) {
        return Err(StraightenError::InvalidSimplexPoint("finite-difference step leaves the simplex".into()));
    }
    let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    SphericalSimplexPoint::new(raw.iter().map(|c| c / norm).collect())
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Area of the unit sphere `S^m`.
pub fn sphere_area(m: usize) -> f64 {
    let k = (m + 1) as f64;
    2.0 * std::f64::consts::PI.powf(k / 2.0) / gamma(k / 2.0)
}

/// Gamma function at positive integers and half-integers.
fn gamma(x: f64) -> f64 {
    let twice = (2.0 * x).round() as i64;
    if twice % 2 == 0 {
        (1..(twice / 2)).map(|i| i as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(x + 1) = x Gamma(x)
        let mut g = std::f64::consts::PI.sqrt();
        let mut y = 0.5;
        while y < x - 0.25 {
            g *= y;
            y += 1.0;
        }
        g
    }
}

/// Volume of the orthant `Delta^n_s`, a `2^{-(n+1)}` share of `S^n`.
pub fn simplex_sphere_volume(n: usize) -> f64 {
    sphere_area(n) / 2f64.powi(n as i32 + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub samples: usize,
    /// `int Jac` over `Delta^n_s`.
    pub signed: f64,
    pub signed_stderr: f64,
    /// `int |Jac|` over `Delta^n_s`.
    pub absolute: f64,
    pub absolute_stderr: f64,
    /// Largest `2^n J` seen at the samples.
    pub max_bound: f64,
}

/// Monte-Carlo volume of the straightened simplex over uniform samples of
/// `Delta^n_s`. Sample `i` uses the stream `i` of `seed`.
pub fn simplex_volume(
    v: &VertexTuple,
    mc_samples: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<VolumeEstimate, StraightenError> {
    let n = v.model().dimension();
    let per: Vec<Result<(f64, f64), StraightenError>> = (0..mc_samples)
        .into_par_iter()
        .map(|i| {
            let sigma = sample_orthant_point(n, &mut derived_rng(seed, i as u64));
            let r = jacobian(v, &sigma, settings)?;
            Ok((r.jacobian, r.bound))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>, _>>()?;
    let area = simplex_sphere_volume(n);
    let signed: Vec<f64> = per.iter().map(|p| p.0).collect();
    let absolute: Vec<f64> = signed.iter().map(|j| j.abs()).collect();
    let (ms, ss) = mean_stderr(&signed);
    let (ma, sa) = mean_stderr(&absolute);
    Ok(VolumeEstimate {
        samples: mc_samples,
        signed: area * ms,
        signed_stderr: area * ss,
        absolute: area * ma,
        absolute_stderr: area * sa,
        max_bound: per.iter().map(|p| p.1).fold(0.0, f64::max),
    })
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Parameters of a seeded Jacobian scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub samples: usize,
    pub seed: u64,
    /// Vertices are drawn uniformly from the tangent ball of this radius at `o`.
    pub radius: f64,
    /// Monte-Carlo samples for the volume of each scanned simplex; 0 skips volumes.
    pub volume_samples: usize,
    /// Optional user constant `C'`; points with `J > C'` are violations.
    pub cprime: Option<f64>,
    pub solver: SolverSettings,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            radius: 3.0,
            volume_samples: 0,
            cprime: None,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureInfo {
    pub scheme: GridScheme,
    pub resolution: usize,
    pub atoms: usize,
    pub seed: u64,
}

impl QuadratureInfo {
    pub fn of(grid: &QuadratureGrid) -> Self {
        Self {
            scheme: grid.scheme(),
            resolution: grid.resolution(),
            atoms: grid.len(),
            seed: grid.seed(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: usize,
    pub check: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub sample: usize,
    pub sigma: Vec<f64>,
    pub j_value: f64,
    pub abs_jacobian: f64,
    pub bound: f64,
    pub det_k: f64,
    pub zero_jacobian: bool,
    pub iterations: usize,
    pub volume: Option<f64>,
    pub volume_stderr: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub model: String,
    pub samples: usize,
    pub seed: u64,
    pub radius: f64,
    pub quadrature: QuadratureInfo,
    pub sup_abs_jacobian: f64,
    pub sup_j: f64,
    /// `2^n sup J`.
    pub sup_bound: f64,
    /// Largest Monte-Carlo simplex volume, when volumes were computed.
    pub k_emp: Option<f64>,
    pub cprime: Option<f64>,
    /// `2^n C'`, when `C'` is configured.
    pub cprime_bound: Option<f64>,
    pub non_converged: usize,
    pub violations: Vec<Violation>,
    pub entries: Vec<ScanEntry>,
}

/// Seeded scan over random top-degree simplices. Sample `i` draws its
/// vertices and `sigma` from stream `i`; volumes use the seed of that stream's
/// first draw so they are also fixed per sample.
pub fn jscan(grid: &QuadratureGrid, config: &ScanConfig) -> ScanReport {
    let model = grid.model().clone();
    let n = model.dimension();
    let outcomes: Vec<(Option<ScanEntry>, Vec<Violation>, bool)> = (0..config.samples)
        .into_par_iter()
        .map(|i| scan_one(grid, &model, config, i))
        .collect();

    let mut violations = Vec::new();
    let mut entries = Vec::new();
    let mut non_converged = 0;
    for (entry, v, failed_solve) in outcomes {
        violations.extend(v);
        if failed_solve {
            non_converged += 1;
        }
        if let Some(e) = entry {
            entries.push(e);
        }
    }
    let sup_j = entries.iter().map(|e| e.j_value).fold(0.0, f64::max);
    let k_emp = if config.volume_samples > 0 {
        Some(entries.iter().filter_map(|e| e.volume).fold(0.0, f64::max))
    } else {
        None
    };
    ScanReport {
        model: model.id(),
        samples: config.samples,
        seed: config.seed,
        radius: config.radius,
        quadrature: QuadratureInfo::of(grid),
        sup_abs_jacobian: entries.iter().map(|e| e.abs_jacobian).fold(0.0, f64::max),
        sup_j,
        sup_bound: 2f64.powi(n as i32) * sup_j,
        k_emp,
        cprime: config.cprime,
        cprime_bound: config.cprime.map(|c| 2f64.powi(n as i32) * c),
        non_converged,
        violations,
        entries,
    }
}

fn scan_one(grid: &QuadratureGrid, model: &Model, config: &ScanConfig, i: usize) -> (Option<ScanEntry>, Vec<Violation>, bool) {
    let n = model.dimension();
    let mut rng = derived_rng(config.seed, i as u64);
    let vertices = sample_vertices(model, n + 1, config.radius, &mut rng);
    let sigma = sample_simplex_point(n, &mut rng);
    let volume_seed = rand::Rng::random::<u64>(&mut rng);
    let violation = |check: &str, detail: String| Violation {
        sample: i,
        check: check.to_string(),
        detail,
    };
    let v = match VertexTuple::new(grid, vertices) {
        Ok(v) => v,
        Err(e) => return (None, vec![violation("vertices", e.to_string())], false),
    };
    let report = match jacobian(&v, &sigma, &config.solver) {
        Ok(r) => r,
        Err(e) => {
            let solver = matches!(e, StraightenError::Solver(_));
            return (None, vec![violation("solver", e.to_string())], solver);
        }
    };
    let mut violations: Vec<Violation> = report
        .failures()
        .into_iter()
        .map(|f| violation(f, format!("|Jac| = {:e}, 2^n J = {:e}", report.abs_jacobian, report.bound)))
        .collect();
    if let Some(c) = config.cprime {
        if report.j_value > c {
            violations.push(violation("cprime", format!("J = {:e} exceeds C' = {:e}", report.j_value, c)));
        }
    }
    let (volume, volume_stderr) = if config.volume_samples > 0 {
        match simplex_volume(&v, config.volume_samples, volume_seed, &config.solver) {
            Ok(est) => (Some(est.absolute), Some(est.absolute_stderr)),
            Err(e) => {
                violations.push(violation("volume", e.to_string()));
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    let entry = ScanEntry {
        sample: i,
        sigma: sigma.coords().to_vec(),
        j_value: report.j_value,
        abs_jacobian: report.abs_jacobian,
        bound: report.bound,
        det_k: report.det_k,
        zero_jacobian: report.zero_jacobian,
        iterations: report.iterations,
        volume,
        volume_stderr,
        passed: report.passed,
    };
    (Some(entry), violations, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTermVolume {
    pub coefficient: f64,
    pub signed_volume: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainVolumeReport {
    pub terms: Vec<ChainTermVolume>,
    /// `sum a_i int Jac(st f_i)`.
    pub weighted_volume: f64,
    pub weighted_stderr: f64,
    pub l1_norm: f64,
    pub k_emp: f64,
    /// `K_emp ||c||_1`.
    pub upper: f64,
    pub holds: bool,
    pub slack: f64,
    /// `weighted_volume / K_emp`, the implied lower bound for `||c||_1`.
    pub quotient: f64,
}

/// Straightens `c`, integrates each term's Jacobian and checks
/// `sum a_i int Jac <= K_emp ||c||_1`. Term `t` uses stream `t` of `seed`.
pub fn chain_volume_bound(
    c: &Chain,
    k_emp: f64,
    mc_samples: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<ChainVolumeReport, StraightenError> {
    if !(k_emp > 0.0) {
        return Err(StraightenError::InvalidSimplexPoint(format!("K_emp must be positive, got {k_emp}")));
    }
    let st = straighten_chain(c);
    let mut terms = Vec::with_capacity(st.len());
    for (t, (a, s)) in st.terms().iter().enumerate() {
        let est = simplex_volume(s.vertices(), mc_samples, derived_seed(seed, t), settings)?;
        terms.push(ChainTermVolume {
            coefficient: *a,
            signed_volume: est.signed,
            stderr: est.signed_stderr,
        });
    }
    let weighted_volume: f64 = terms.iter().map(|t| t.coefficient * t.signed_volume).sum();
    let weighted_stderr = terms.iter().map(|t| (t.coefficient * t.stderr).powi(2)).sum::<f64>().sqrt();
    let l1_norm = chain_l1_norm(&st);
    let upper = k_emp * l1_norm;
    Ok(ChainVolumeReport {
        terms,
        weighted_volume,
        weighted_stderr,
        l1_norm,
        k_emp,
        upper,
        holds: weighted_volume <= upper,
        slack: upper - weighted_volume,
        quotient: weighted_volume / k_emp,
    })
}

fn derived_seed(seed: u64, index: usize) -> u64 {
    rand::Rng::random(&mut derived_rng(seed, index as u64))
}

/// `H` and `K` of `nu(x)` evaluated at `x` itself.
pub fn symmetric_endomorphisms(grid: &QuadratureGrid, x: &ModelPoint) -> Endomorphisms {
    let model = grid.model();
    let nu = ps_density(grid, x);
    let frame = model.tangent_frame(x);
    let (b, _) = one_forms(grid.atoms(), x, &frame);
    let second = weighted_gram(&b, nu.masses());
    Endomorphisms {
        h: FrameOperator {
            point: x.clone(),
            frame: frame.clone(),
            matrix: covariance_from_second(model, &second),
        },
        k: FrameOperator {
            point: x.clone(),
            frame,
            matrix: hessian_from_second(model, &second),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_grid;

    #[test]
    fn tangent_basis_is_oriented_and_orthonormal() {
        for a in [vec![0.6, 0.8], vec![0.5, 0.5, 0.5, 0.5], vec![1.0, 0.0, 0.0]] {
            let s = SphericalSimplexPoint::new(a.clone()).unwrap();
            let q = simplex_tangent_basis(&s);
            let sv = DVector::from_column_slice(&a);
            assert!(q.tr_mul(&sv).amax() < 1e-14);
            assert!((q.tr_mul(&q) - DMatrix::identity(a.len() - 1, a.len() - 1)).amax() < 1e-14);
            let mut full = DMatrix::zeros(a.len(), a.len());
            full.set_column(0, &sv);
            full.columns_mut(1, a.len() - 1).copy_from(&q);
            assert!((full.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
        assert!((simplex_sphere_volume(2) - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn h2_symmetric_anchor() {
        let m = Model::hyperbolic(2).unwrap();
        let grid = build_grid(&m, 512, 0).unwrap();
        let e = symmetric_endomorphisms(&grid, &m.basepoint());
        assert!((e.h.matrix.clone() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-12);
        assert!((e.j_value() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn constant_simplex_has_zero_derivative() {
        let m = Model::hyperbolic(2).unwrap();
        let grid = build_grid(&m, 256, 0).unwrap();
        let x = m.point_from_spatial(&[0.2, 0.1]);
        let v = VertexTuple::new(&grid, vec![x.clone(), x.clone(), x]).unwrap();
        let s = SphericalSimplexPoint::from_barycentric(&[0.2, 0.3, 0.5]).unwrap();
        let d = implicit_derivative(&v, &s, &SolverSettings::default()).unwrap();
        assert!(d.on_basis(&simplex_tangent_basis(&s)).amax() < 1e-8);
        let r = jacobian(&v, &s, &SolverSettings::default()).unwrap();
        assert!(r.zero_jacobian && r.passed && r.chain.is_none(), "{r:?}");
    }
}
