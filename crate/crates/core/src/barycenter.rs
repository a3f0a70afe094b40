//! The functional `g_mu(y) = int B_p(y, theta) dmu(theta)`, its derivatives,
//! and the barycenter `bar(mu)` as its minimiser.
//!
//! All derivative quantities are assembled in the orthonormal frame returned by
//! [`Model::tangent_frame`]. For an atom `xi` and frame vector `E_k` living in
//! factor `f`, write `b_k = <E_k, xi_f> / <y_f, xi_f>` (the factor one-form).
//! With `w` the model's Busemann weight and `S = sum_j m_j b_j b_j^T`:
//!
//! ```text
//! grad g = w sum_j m_j b_j
//! K      = w (I - S restricted to factor blocks)
//! H      = w^2 S
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::busemann::busemann;
use crate::error::SolverError;
use crate::measure::{integrate, BoundaryMeasure};
use crate::model::{minkowski, Model, ModelPoint, TangentVector};
use crate::quadrature::AtomSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Stop once the Riemannian gradient norm is at most this.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    /// First trial step fraction of each Newton step.
    pub initial_damping: f64,
    /// Newton steps longer than this (in distance) are shortened.
    pub max_step: f64,
    /// `det K` at or below this is reported as degenerate.
    pub degenerate_det: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_grad: 1e-10,
            max_iter: 100,
            backtrack: 0.5,
            initial_damping: 1.0,
            max_step: 2.0,
            degenerate_det: 1e-14,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterResult {
    pub point: ModelPoint,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// `g_mu` at the solution with basepoint `o`.
    pub g_value: f64,
    /// `g_mu` (basepoint `o`) at the initial point and after every accepted step.
    pub g_trace: Vec<f64>,
    /// `det K` at every iterate where a Newton step was computed.
    pub det_trace: Vec<f64>,
}

/// A symmetric endomorphism of `T_y X`, as a matrix in the frame at `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOperator {
    pub point: ModelPoint,
    pub frame: DMatrix<f64>,
    pub matrix: DMatrix<f64>,
}

impl FrameOperator {
    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn quadratic_form(&self, model: &Model, u: &TangentVector) -> f64 {
        let c = model.to_frame(&self.point, u);
        c.dot(&(&self.matrix * &c))
    }

    pub fn apply(&self, model: &Model, u: &TangentVector) -> TangentVector {
        let c = model.to_frame(&self.point, u);
        TangentVector(&self.frame * (&self.matrix * c))
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }
}

/// First and second Busemann moments of a measure at `y`, in the frame at `y`.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    /// `g_mu(y)` with basepoint `o`.
    pub g: f64,
    pub grad: DVector<f64>,
    /// `sum_j m_j b_j b_j^T` with factor-local one-forms `b_j`.
    pub second: DMatrix<f64>,
}

/// Factor-local one-forms `b_{kj}` (frame index `k`, atom `j`) and the values
/// `log(-<y_f, xi_j>)` summed over factors.
pub(crate) fn one_forms(atoms: &AtomSet, y: &ModelPoint, frame: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let model = atoms.model();
    let coords = atoms.coords();
    let sig = DVector::from_column_slice(model.signature());
    let mut frame_j = frame.transpose();
    for mut row in frame_j.row_iter_mut() {
        row.component_mul_assign(&sig.transpose());
    }
    let mut b = &frame_j * coords;
    let factor_of = model.tangent_factor_map();
    let ranges = model.factor_ranges();
    let mut logs = vec![0.0; coords.ncols()];
    let mut inv = vec![0.0; ranges.len()];
    for j in 0..coords.ncols() {
        let atom = atoms.atom(j);
        for (f, r) in ranges.iter().enumerate() {
            let s = minkowski(&y.as_slice()[r.clone()], &atom[r.clone()]);
            inv[f] = 1.0 / s;
            logs[j] += (-s).ln();
        }
        for (k, &f) in factor_of.iter().enumerate() {
            b[(k, j)] *= inv[f];
        }
    }
    (b, logs)
}

pub(crate) fn moments(atoms: &AtomSet, masses: &[f64], y: &ModelPoint, frame: &DMatrix<f64>) -> Moments {
    let w = atoms.model().busemann_weight();
    let (b, logs) = one_forms(atoms, y, frame);
    let m = DVector::from_column_slice(masses);
    let grad = (&b * &m) * w;
    let mut weighted = b.clone();
    for (j, mut col) in weighted.column_iter_mut().enumerate() {
        col *= masses[j];
    }
    let second = &weighted * b.transpose();
    let g = w * logs.iter().zip(masses).map(|(l, m)| l * m).sum::<f64>();
    Moments { g, grad, second }
}

/// `K = w (I - S)` on factor blocks, zero across factors.
pub(crate) fn hessian_from_second(model: &Model, second: &DMatrix<f64>) -> DMatrix<f64> {
    let w = model.busemann_weight();
    let factor_of = model.tangent_factor_map();
    let n = second.nrows();
    DMatrix::from_fn(n, n, |k, l| {
        if factor_of[k] != factor_of[l] {
            0.0
        } else {
            let delta = if k == l { 1.0 } else { 0.0 };
            w * (delta - second[(k, l)])
        }
    })
}

/// `H = w^2 S`.
pub(crate) fn covariance_from_second(model: &Model, second: &DMatrix<f64>) -> DMatrix<f64> {
    let w = model.busemann_weight();
    second * (w * w)
}

/// `g_mu(y)` computed from `B_p` with an explicit basepoint `p`.
pub fn g_value(mu: &BoundaryMeasure, y: &ModelPoint, p: &ModelPoint) -> f64 {
    let model = mu.model();
    integrate(mu, |theta| busemann(model, p, y, theta))
}

/// Metric dual of `u -> int dB_(y,theta)(u) dmu`.
pub fn g_gradient(mu: &BoundaryMeasure, y: &ModelPoint) -> TangentVector {
    let frame = mu.model().tangent_frame(y);
    let mo = moments(mu.atoms(), mu.masses(), y, &frame);
    TangentVector(&frame * mo.grad)
}

/// `<K u, u> = int DdB_(y,theta)(u, u) dmu`.
pub fn hessian_k(mu: &BoundaryMeasure, y: &ModelPoint) -> FrameOperator {
    let model = mu.model();
    let frame = model.tangent_frame(y);
    let mo = moments(mu.atoms(), mu.masses(), y, &frame);
    FrameOperator {
        point: y.clone(),
        matrix: hessian_from_second(model, &mo.second),
        frame,
    }
}

/// `<H u, u> = int dB_(y,theta)(u)^2 dmu`.
pub fn covariance_h(mu: &BoundaryMeasure, y: &ModelPoint) -> FrameOperator {
    let model = mu.model();
    let frame = model.tangent_frame(y);
    let mo = moments(mu.atoms(), mu.masses(), y, &frame);
    FrameOperator {
        point: y.clone(),
        matrix: covariance_from_second(model, &mo.second),
        frame,
    }
}

/// Minimises `g_mu` by damped Newton iteration `y <- exp_y(-t K^{-1} grad g)`.
///
/// The basepoint only shifts `g_mu` by a constant, so the iteration (which
/// uses only the gradient and `K`) does not depend on it. Starts from `init`,
/// or from `o` when none is given.
pub fn barycenter(
    mu: &BoundaryMeasure,
    settings: &SolverSettings,
    init: Option<&ModelPoint>,
) -> Result<BarycenterResult, SolverError> {
    barycenter_raw(mu.atoms(), mu.masses(), settings, init)
}

pub(crate) fn barycenter_raw(
    atoms: &AtomSet,
    masses: &[f64],
    settings: &SolverSettings,
    init: Option<&ModelPoint>,
) -> Result<BarycenterResult, SolverError> {
    let model = atoms.model();
    let mut y = init.cloned().unwrap_or_else(|| model.basepoint());
    let mut frame = model.tangent_frame(&y);
    let mut cur = moments(atoms, masses, &y, &frame);
    let mut g_trace = vec![cur.g];
    let mut det_trace = Vec::new();

    for iter in 0..=settings.max_iter {
        let gnorm = cur.grad.norm();
        if gnorm <= settings.tol_grad {
            return Ok(BarycenterResult {
                point: y,
                gradient_norm: gnorm,
                iterations: iter,
                g_value: cur.g,
                g_trace,
                det_trace,
            });
        }
        if iter == settings.max_iter {
            break;
        }
        let k = hessian_from_second(model, &cur.second);
        let det = k.determinant();
        det_trace.push(det);
        if !(det > settings.degenerate_det) {
            return Err(SolverError::DegenerateHessian { det });
        }
        let chol = k.cholesky().ok_or(SolverError::DegenerateHessian { det })?;
        let mut step = -chol.solve(&cur.grad);
        let len = step.norm();
        if len > settings.max_step {
            step *= settings.max_step / len;
        }
        let dir = TangentVector(&frame * step);

        let mut t = settings.initial_damping;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = model.exp_map(&y, &dir, t);
            let cand_frame = model.tangent_frame(&cand);
            let cm = moments(atoms, masses, &cand, &cand_frame);
            let flat = cm.g <= cur.g + 1e-14 * (1.0 + cur.g.abs());
            if cm.g < cur.g || (flat && cm.grad.norm() < gnorm) {
                accepted = Some((cand, cand_frame, cm));
                break;
            }
            t *= settings.backtrack;
        }
        let Some((cand, cand_frame, cm)) = accepted else {
            return Err(SolverError::NonConvergence {
                iterations: iter,
                gradient_norm: gnorm,
            });
        };
        y = cand;
        frame = cand_frame;
        cur = cm;
        g_trace.push(cur.g);
    }
    Err(SolverError::NonConvergence {
        iterations: settings.max_iter,
        gradient_norm: cur.grad.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{ps_density, weighted_combination};
    use crate::quadrature::build_grid;

    fn h2() -> Model {
        Model::hyperbolic(2).unwrap()
    }

    #[test]
    fn g_vanishes_at_the_basepoint() {
        let m = h2();
        let g = build_grid(&m, 128, 0).unwrap();
        let o = m.basepoint();
        let nu = ps_density(&g, &o);
        assert!(g_value(&nu, &o, &o).abs() < 1e-15);
        assert!(m.norm(&g_gradient(&nu, &o)) < 1e-12);
    }

    #[test]
    fn basepoint_change_is_a_constant_shift() {
        let m = h2();
        let g = build_grid(&m, 128, 0).unwrap();
        let o = m.basepoint();
        let q = m.point_from_spatial(&[0.7, -0.2]);
        let nu = ps_density(&g, &o);
        let x1 = m.point_from_spatial(&[1.0, 0.5]);
        let x2 = m.point_from_spatial(&[-2.0, 0.1]);
        let d1 = g_value(&nu, &x1, &o) - g_value(&nu, &x1, &q);
        let d2 = g_value(&nu, &x2, &o) - g_value(&nu, &x2, &q);
        assert!((d1 - d2).abs() < 1e-10);
    }

    #[test]
    fn symmetric_hessian_in_h2() {
        let m = h2();
        let g = build_grid(&m, 512, 0).unwrap();
        let o = m.basepoint();
        let k = hessian_k(&ps_density(&g, &o), &o);
        assert!((k.matrix.clone() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-10);
        assert!((k.determinant() - 0.25).abs() < 1e-10);
        assert!(k.asymmetry() < 1e-15);
    }

    #[test]
    fn operator_forms_agree_with_pointwise_integrals() {
        use crate::busemann::{busemann_one_form, busemann_two_form};
        let m = Model::product_h2h2();
        let g = build_grid(&m, 24, 0).unwrap();
        let x = m.point_from_spatial(&[0.3, 0.1, -0.4, 0.9]);
        let y = m.point_from_spatial(&[-0.2, 0.5, 0.3, 0.3]);
        let nu = ps_density(&g, &x);
        let k = hessian_k(&nu, &y);
        let h = covariance_h(&nu, &y);
        let u = m.from_frame(&y, &[0.3, -1.0, 0.5, 0.2]);
        let kq = integrate(&nu, |th| busemann_two_form(&m, &y, th, &u, &u));
        let hq = integrate(&nu, |th| busemann_one_form(&m, &y, th, &u).powi(2));
        assert!((k.quadratic_form(&m, &u) - kq).abs() < 1e-13);
        assert!((h.quadratic_form(&m, &u) - hq).abs() < 1e-13);
        let grad = g_gradient(&nu, &y);
        let dq = integrate(&nu, |th| busemann_one_form(&m, &y, th, &u));
        assert!((m.inner(grad.as_slice(), u.as_slice()) - dq).abs() < 1e-13);
    }

    #[test]
    fn midpoint_of_two_densities() {
        let m = h2();
        let g = build_grid(&m, 512, 0).unwrap();
        let x1 = m.basepoint();
        let x2 = m.point(&[2f64.sinh(), 0.0, 2f64.cosh()]).unwrap();
        let s = 0.5f64.sqrt();
        let mu = weighted_combination(&[s, s], &[ps_density(&g, &x1), ps_density(&g, &x2)]).unwrap();
        let r = barycenter(&mu, &SolverSettings::default(), None).unwrap();
        let mid = m.point(&[1f64.sinh(), 0.0, 1f64.cosh()]).unwrap();
        assert!(m.distance(&r.point, &mid) < 1e-7);
        assert!(r.gradient_norm <= 1e-10);
        for w in r.g_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = h2();
        let g = build_grid(&m, 64, 0).unwrap();
        let x = m.point_from_spatial(&[3.0, 1.0]);
        let settings = SolverSettings {
            max_iter: 1,
            ..SolverSettings::default()
        };
        let err = barycenter(&ps_density(&g, &x), &settings, None).unwrap_err();
        assert!(matches!(err, SolverError::NonConvergence { .. }));
    }

    #[test]
    fn degenerate_hessian_is_reported() {
        let m = h2();
        let g = build_grid(&m, 64, 0).unwrap();
        let x = m.point_from_spatial(&[1.0, 1.0]);
        let settings = SolverSettings {
            degenerate_det: 10.0,
            ..SolverSettings::default()
        };
        let err = barycenter(&ps_density(&g, &x), &settings, None).unwrap_err();
        assert!(matches!(err, SolverError::DegenerateHessian { .. }));
    }
}
