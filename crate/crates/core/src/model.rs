//! Coordinate models of symmetric spaces of non-compact type.
//!
//! Real hyperbolic space `H^n` (2 <= n <= 5) is realised as the upper sheet of
//! the hyperboloid `{x : <x,x> = -1, x_n > 0}` in Minkowski space `R^{n,1}`, with
//! the time coordinate stored **last** so that the basepoint is
//! `o = (0, ..., 0, 1)`. The rank-two product `H^2 x H^2` stores its two factors
//! back to back in one ambient vector of length 6.
//!
//! Points, tangent vectors and boundary points are thin newtypes over ambient
//! coordinates. They do not carry their model; every operation takes the
//! [`Model`] explicitly.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Hyperboloid constraint tolerance for validated points.
pub const POINT_TOL: f64 = 1e-12;
/// Orthogonality tolerance for validated tangent vectors.
pub const TANGENT_TOL: f64 = 1e-10;
/// Null-cone and normalisation tolerance for boundary points.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Real hyperbolic space of the given dimension.
    Hyperbolic(usize),
    /// The Riemannian product `H^2 x H^2`.
    ProductH2H2,
}

/// A concrete model of a symmetric space together with its volume entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    kind: ModelKind,
    factor_dims: Vec<usize>,
    signature: Vec<f64>,
}

impl Model {
    pub fn hyperbolic(n: usize) -> Result<Self, ModelError> {
        if !(2..=5).contains(&n) {
            return Err(ModelError::UnsupportedDimension(n));
        }
        Ok(Self::from_factors(ModelKind::Hyperbolic(n), vec![n]))
    }

    pub fn product_h2h2() -> Self {
        Self::from_factors(ModelKind::ProductH2H2, vec![2, 2])
    }

    /// Parses the identifiers `h2`..`h5` and `h2xh2`.
    pub fn from_id(id: &str) -> Result<Self, ModelError> {
        match id.trim().to_ascii_lowercase().as_str() {
            "h2xh2" => Ok(Self::product_h2h2()),
            s => match s.strip_prefix('h').and_then(|d| d.parse::<usize>().ok()) {
                Some(n) if (2..=5).contains(&n) => Self::hyperbolic(n),
                _ => Err(ModelError::UnknownModel(id.to_string())),
            },
        }
    }

    fn from_factors(kind: ModelKind, factor_dims: Vec<usize>) -> Self {
        let mut signature = Vec::new();
        for &d in &factor_dims {
            signature.extend(std::iter::repeat_n(1.0, d));
            signature.push(-1.0);
        }
        Self {
            kind,
            factor_dims,
            signature,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn id(&self) -> String {
        match self.kind {
            ModelKind::Hyperbolic(n) => format!("h{n}"),
            ModelKind::ProductH2H2 => "h2xh2".to_string(),
        }
    }

    /// Manifold dimension `n`.
    pub fn dimension(&self) -> usize {
        self.factor_dims.iter().sum()
    }

    pub fn rank(&self) -> usize {
        self.factor_dims.len()
    }

    /// Volume entropy `h`: `n - 1` for `H^n`, `sqrt 2` for `H^2 x H^2`.
    pub fn volume_entropy(&self) -> f64 {
        match self.kind {
            ModelKind::Hyperbolic(n) => (n - 1) as f64,
            ModelKind::ProductH2H2 => std::f64::consts::SQRT_2,
        }
    }

    /// Weight with which each factor Busemann function enters the model's
    /// Busemann function (the Furstenberg direction makes equal angles with
    /// all factors).
    pub fn busemann_weight(&self) -> f64 {
        1.0 / (self.rank() as f64).sqrt()
    }

    pub fn ambient_dim(&self) -> usize {
        self.signature.len()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    /// Ambient coordinate range of each factor.
    pub fn factor_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.factor_dims
            .iter()
            .map(|&d| {
                let r = start..start + d + 1;
                start += d + 1;
                r
            })
            .collect()
    }

    /// For each index of an orthonormal tangent frame, the factor it lives in.
    pub fn tangent_factor_map(&self) -> Vec<usize> {
        self.factor_dims
            .iter()
            .enumerate()
            .flat_map(|(f, &d)| std::iter::repeat_n(f, d))
            .collect()
    }

    /// Diagonal of the Minkowski Gram array (`+1` spatial, `-1` time, per factor).
    pub fn signature(&self) -> &[f64] {
        &self.signature
    }

    /// Full Minkowski form `<a,b>` summed over factors. On tangent vectors this
    /// is the Riemannian metric.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signature
            .iter()
            .zip(a.iter().zip(b))
            .map(|(s, (x, y))| s * x * y)
            .sum()
    }

    pub fn basepoint(&self) -> ModelPoint {
        let mut v = DVector::zeros(self.ambient_dim());
        for r in self.factor_ranges() {
            v[r.end - 1] = 1.0;
        }
        ModelPoint(v)
    }

    /// Validates ambient coordinates against the hyperboloid constraint.
    pub fn point(&self, coords: &[f64]) -> Result<ModelPoint, ModelError> {
        self.check_len(coords.len())?;
        for r in self.factor_ranges() {
            let f = &coords[r];
            let q = minkowski(f, f);
            if (q + 1.0).abs() > POINT_TOL || f[f.len() - 1] <= 0.0 {
                return Err(ModelError::NotOnHyperboloid { residual: q + 1.0 });
            }
        }
        Ok(ModelPoint(DVector::from_column_slice(coords)))
    }

    /// Accepts coordinates within `tol` of the hyperboloid and recomputes the
    /// time coordinate of each factor from its spatial part.
    pub fn project_point(&self, coords: &[f64], tol: f64) -> Result<ModelPoint, ModelError> {
        self.check_len(coords.len())?;
        let mut v = DVector::from_column_slice(coords);
        for r in self.factor_ranges() {
            let f = &coords[r.clone()];
            let q = minkowski(f, f);
            if !q.is_finite() || (q + 1.0).abs() > tol || f[f.len() - 1] <= 0.0 {
                return Err(ModelError::NotOnHyperboloid { residual: q + 1.0 });
            }
            renormalize_factor(&mut v.as_mut_slice()[r]);
        }
        Ok(ModelPoint(v))
    }

    /// Lifts spatial coordinates (one block of length `d` per factor, concatenated)
    /// onto the hyperboloid.
    pub fn point_from_spatial(&self, spatial: &[f64]) -> ModelPoint {
        assert_eq!(spatial.len(), self.dimension());
        let mut v = DVector::zeros(self.ambient_dim());
        let mut k = 0;
        for (r, &d) in self.factor_ranges().into_iter().zip(&self.factor_dims) {
            let f = &mut v.as_mut_slice()[r];
            f[..d].copy_from_slice(&spatial[k..k + d]);
            renormalize_factor(f);
            k += d;
        }
        ModelPoint(v)
    }

    pub fn tangent(&self, x: &ModelPoint, coords: &[f64]) -> Result<TangentVector, ModelError> {
        self.check_len(coords.len())?;
        for r in self.factor_ranges() {
            let ip = minkowski(&x.0.as_slice()[r.clone()], &coords[r]);
            if ip.abs() > TANGENT_TOL {
                return Err(ModelError::NotTangent { residual: ip });
            }
        }
        Ok(TangentVector(DVector::from_column_slice(coords)))
    }

    /// Orthogonal projection of an ambient vector onto `T_x`.
    pub fn project_tangent(&self, x: &ModelPoint, v: &[f64]) -> TangentVector {
        let mut out = DVector::from_column_slice(v);
        for r in self.factor_ranges() {
            let xf = &x.0.as_slice()[r.clone()];
            let ip = minkowski(xf, &v[r.clone()]);
            for (o, xi) in out.as_mut_slice()[r].iter_mut().zip(xf) {
                *o += ip * xi;
            }
        }
        TangentVector(out)
    }

    /// Boundary point from one unit spatial direction per factor (concatenated).
    pub fn boundary_from_directions(&self, dirs: &[f64]) -> Result<BoundaryPoint, ModelError> {
        if dirs.len() != self.dimension() {
            return Err(ModelError::WrongLength {
                expected: self.dimension(),
                got: dirs.len(),
            });
        }
        let mut v = DVector::zeros(self.ambient_dim());
        let mut k = 0;
        for (r, &d) in self.factor_ranges().into_iter().zip(&self.factor_dims) {
            let s = &dirs[k..k + d];
            let norm = s.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(ModelError::DegenerateDirection);
            }
            let f = &mut v.as_mut_slice()[r];
            for (fi, si) in f.iter_mut().zip(s) {
                *fi = si / norm;
            }
            f[d] = 1.0;
            k += d;
        }
        Ok(BoundaryPoint(v))
    }

    pub fn boundary(&self, coords: &[f64]) -> Result<BoundaryPoint, ModelError> {
        self.check_len(coords.len())?;
        for r in self.factor_ranges() {
            let f = &coords[r];
            let q = minkowski(f, f);
            let t = f[f.len() - 1];
            if q.abs() > BOUNDARY_TOL || (t - 1.0).abs() > BOUNDARY_TOL {
                return Err(ModelError::NotOnBoundary { residual: q.abs().max((t - 1.0).abs()) });
            }
        }
        Ok(BoundaryPoint(DVector::from_column_slice(coords)))
    }

    fn check_len(&self, len: usize) -> Result<(), ModelError> {
        if len != self.ambient_dim() {
            return Err(ModelError::WrongLength {
                expected: self.ambient_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Riemannian distance; the product metric combines factors in `l^2`.
    pub fn distance(&self, x: &ModelPoint, y: &ModelPoint) -> f64 {
        self.factor_ranges()
            .into_iter()
            .map(|r| {
                let d = factor_distance(&x.0.as_slice()[r.clone()], &y.0.as_slice()[r]);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Riemannian norm of a tangent vector.
    pub fn norm(&self, u: &TangentVector) -> f64 {
        self.inner(u.as_slice(), u.as_slice()).max(0.0).sqrt()
    }

    /// Geodesic `t -> exp_x(t u)`.
    pub fn exp_map(&self, x: &ModelPoint, u: &TangentVector, t: f64) -> ModelPoint {
        let mut out = x.0.clone();
        for r in self.factor_ranges() {
            let xf = &x.0.as_slice()[r.clone()];
            let uf = &u.0.as_slice()[r.clone()];
            let len = minkowski(uf, uf).max(0.0).sqrt() * t;
            let (c, sc) = (len.cosh(), sinhc(len) * t);
            let of = &mut out.as_mut_slice()[r];
            for ((o, xi), ui) in of.iter_mut().zip(xf).zip(uf) {
                *o = c * xi + sc * ui;
            }
            renormalize_factor(of);
        }
        ModelPoint(out)
    }

    /// Inverse of [`Model::exp_map`]; `log_map(x, x) = 0`.
    pub fn log_map(&self, x: &ModelPoint, y: &ModelPoint) -> TangentVector {
        let mut out = DVector::zeros(self.ambient_dim());
        for r in self.factor_ranges() {
            let xf = &x.0.as_slice()[r.clone()];
            let yf = &y.0.as_slice()[r.clone()];
            let diff: Vec<f64> = yf.iter().zip(xf).map(|(a, b)| a - b).collect();
            let q = minkowski(&diff, &diff).max(0.0);
            let d = 2.0 * (q.sqrt() / 2.0).asinh();
            // y + <x,y> x with <x,y> = -1 - q/2
            let scale = 1.0 / sinhc(d);
            let of = &mut out.as_mut_slice()[r];
            for ((o, di), xi) in of.iter_mut().zip(&diff).zip(xf) {
                *o = scale * (di - 0.5 * q * xi);
            }
        }
        // remove rounding drift off the tangent space
        self.project_tangent(x, out.as_slice())
    }

    /// Orthonormal frame of `T_x`, obtained by transporting the standard frame at
    /// the basepoint with the pure boost taking `o` to `x`. Columns are the
    /// frame vectors in ambient coordinates.
    pub fn tangent_frame(&self, x: &ModelPoint) -> DMatrix<f64> {
        let n = self.dimension();
        let mut frame = DMatrix::zeros(self.ambient_dim(), n);
        let mut col = 0;
        for (r, &d) in self.factor_ranges().into_iter().zip(&self.factor_dims) {
            let xf = &x.0.as_slice()[r.clone()];
            let t = xf[d];
            for i in 0..d {
                let si = xf[i];
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    frame[(r.start + j, col)] = delta + si * xf[j] / (1.0 + t);
                }
                frame[(r.start + d, col)] = si;
                col += 1;
            }
        }
        frame
    }

    pub fn orthonormal_tangent_basis(&self, x: &ModelPoint) -> Vec<TangentVector> {
        let frame = self.tangent_frame(x);
        frame
            .column_iter()
            .map(|c| TangentVector(c.into_owned()))
            .collect()
    }

    /// Tangent vector with the given coordinates in the frame at `x`.
    pub fn from_frame(&self, x: &ModelPoint, coords: &[f64]) -> TangentVector {
        let frame = self.tangent_frame(x);
        TangentVector(&frame * DVector::from_column_slice(coords))
    }

    /// Coordinates of `u` in the frame at `x`.
    pub fn to_frame(&self, x: &ModelPoint, u: &TangentVector) -> DVector<f64> {
        let frame = self.tangent_frame(x);
        let sig = DVector::from_column_slice(&self.signature);
        frame.tr_mul(&u.0.component_mul(&sig))
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// A point of the model in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint(pub(crate) DVector<f64>);

/// Ambient components of a tangent vector. The base point is supplied to each
/// operation that needs it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector(pub(crate) DVector<f64>);

/// A point of the Furstenberg boundary: one null vector per factor, each with
/// time component 1 (equivalently `<o, xi> = -1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint(pub(crate) DVector<f64>);

macro_rules! coords_impl {
    ($t:ty) => {
        impl $t {
            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }
            pub fn to_vec(&self) -> Vec<f64> {
                self.0.as_slice().to_vec()
            }
            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }
        }
    };
}
coords_impl!(ModelPoint);
coords_impl!(TangentVector);
coords_impl!(BoundaryPoint);

impl TangentVector {
    pub fn zeros(model: &Model) -> Self {
        Self(DVector::zeros(model.ambient_dim()))
    }
    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }
    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }
}

/// Minkowski form of one factor, time coordinate last.
#[inline]
pub(crate) fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    let d = a.len() - 1;
    let mut s = -a[d] * b[d];
    for i in 0..d {
        s += a[i] * b[i];
    }
    s
}

/// Distance in one hyperboloid factor, `2 asinh(|x - y| / 2)`; accurate for
/// nearby points where `acosh(-<x,y>)` loses digits.
pub(crate) fn factor_distance(x: &[f64], y: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let q = minkowski(&diff, &diff).max(0.0);
    2.0 * (q.sqrt() / 2.0).asinh()
}

fn renormalize_factor(f: &mut [f64]) {
    let d = f.len() - 1;
    let s2: f64 = f[..d].iter().map(|c| c * c).sum();
    f[d] = (1.0 + s2).sqrt();
}

/// `sinh(s) / s`, continuous at zero.
pub(crate) fn sinhc(s: f64) -> f64 {
    if s.abs() < 1e-5 {
        1.0 + s * s / 6.0
    } else {
        s.sinh() / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(t: f64) -> Vec<f64> {
        vec![t.sinh(), 0.0, t.cosh()]
    }

    #[test]
    fn distances_match_closed_forms() {
        let m = Model::hyperbolic(2).unwrap();
        let o = m.basepoint();
        assert_eq!(m.distance(&o, &o), 0.0);
        let x = m.point(&g(1.0)).unwrap();
        assert!((m.distance(&o, &x) - 1.0).abs() < 1e-14);

        let p = Model::product_h2h2();
        let oo = p.basepoint();
        let xx = p.point(&[g(1.0), g(1.0)].concat()).unwrap();
        assert!((p.distance(&oo, &xx) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exp_map_examples() {
        let m = Model::hyperbolic(2).unwrap();
        let o = m.basepoint();
        let zero = TangentVector::zeros(&m);
        assert_eq!(m.exp_map(&o, &zero, 1.0), o);
        let e1 = m.tangent(&o, &[1.0, 0.0, 0.0]).unwrap();
        let x = m.exp_map(&o, &e1, 1.0);
        for (a, b) in x.as_slice().iter().zip(g(1.0)) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(m.log_map(&o, &o), TangentVector::zeros(&m));
    }

    #[test]
    fn model_ids() {
        assert_eq!(Model::from_id("h3").unwrap().dimension(), 3);
        assert_eq!(Model::from_id("h2xh2").unwrap().dimension(), 4);
        assert_eq!(Model::from_id("h2xh2").unwrap().rank(), 2);
        assert!(matches!(Model::from_id("h9"), Err(ModelError::UnknownModel(_))));
        assert!(Model::hyperbolic(1).is_err());
        assert_eq!(Model::hyperbolic(4).unwrap().volume_entropy(), 3.0);
        assert_eq!(Model::product_h2h2().volume_entropy(), 2f64.sqrt());
    }

    #[test]
    fn validation_rejects_bad_input() {
        let m = Model::hyperbolic(2).unwrap();
        assert!(m.point(&[0.1, 0.0, 1.0]).is_err());
        assert!(m.point(&[0.0, 0.0, -1.0]).is_err());
        assert!(m.point(&[0.0, 1.0]).is_err());
        let o = m.basepoint();
        assert!(m.tangent(&o, &[0.0, 0.0, 1.0]).is_err());
        assert!(m.boundary(&[1.0, 0.0, 2.0]).is_err());
        let p = m.project_point(&[1.1752011936, 0.0, 1.5430806348], 1e-6).unwrap();
        assert!((p.as_slice()[2] - 1f64.cosh()).abs() < 1e-9);
    }

    #[test]
    fn frame_is_orthonormal_and_tangent() {
        let m = Model::product_h2h2();
        let x = m.point_from_spatial(&[0.3, -1.2, 2.0, 0.4]);
        let basis = m.orthonormal_tangent_basis(&x);
        assert_eq!(basis.len(), 4);
        for (i, u) in basis.iter().enumerate() {
            assert!(m.tangent(&x, u.as_slice()).is_ok());
            for (j, v) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((m.inner(u.as_slice(), v.as_slice()) - expect).abs() < 1e-12);
            }
        }
        let u = m.from_frame(&x, &[0.5, -1.0, 0.25, 2.0]);
        let c = m.to_frame(&x, &u);
        assert!((c - DVector::from_column_slice(&[0.5, -1.0, 0.25, 2.0])).norm() < 1e-12);
    }
}
