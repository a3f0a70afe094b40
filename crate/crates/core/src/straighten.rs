//! Barycentric straightening of simplices.
//!
//! A `k`-simplex is parametrised by the spherical simplex
//! `Delta^k_s = {a in R^{k+1} : a_i >= 0, sum a_i^2 = 1}`. For vertices
//! `x_1, ..., x_{k+1}` the straightened simplex is
//!
//! ```text
//! st_V(a) = bar( sum_i a_i^2 nu(x_i) )
//! ```
//!
//! which depends only on the vertex tuple. Everything here is keyed on
//! [`VertexTuple`]; [`SingularSimplex`] exists to exercise the homotopy
//! between a map and its straightening.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{barycenter, BarycenterResult, SolverSettings};
use crate::error::StraightenError;
use crate::isometry::Isometry;
use crate::measure::{ps_density, weighted_combination, BoundaryMeasure};
use crate::model::{minkowski, Model, ModelPoint};
use crate::quadrature::QuadratureGrid;
use crate::sampling::{derived_rng, sample_simplex_point};

/// Tolerance on `sum a_i^2 = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Pass threshold of the equivariance check (distance).
pub const EQUIVARIANCE_TOL: f64 = 1e-6;
/// Pass threshold of the face-compatibility check (distance).
pub const FACE_TOL: f64 = 1e-7;

/// A point `sum a_i e_i` of the spherical simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SphericalSimplexPoint {
    a: Vec<f64>,
}

impl SphericalSimplexPoint {
    pub fn new(a: Vec<f64>) -> Result<Self, StraightenError> {
        if a.is_empty() {
            return Err(StraightenError::InvalidSimplexPoint("no coordinates".into()));
        }
        if let Some(c) = a.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(StraightenError::InvalidSimplexPoint(format!("coordinate {c} is not a finite non-negative number")));
        }
        let sq: f64 = a.iter().map(|c| c * c).sum();
        if (sq - 1.0).abs() > SIMPLEX_TOL {
            return Err(StraightenError::InvalidSimplexPoint(format!("squared coordinates sum to {sq}")));
        }
        Ok(Self { a })
    }

    /// `a_i = sqrt(b_i / sum b)` for non-negative weights `b`.
    pub fn from_barycentric(b: &[f64]) -> Result<Self, StraightenError> {
        if b.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(StraightenError::InvalidSimplexPoint("negative barycentric weight".into()));
        }
        let total: f64 = b.iter().sum();
        if !(total > 0.0) {
            return Err(StraightenError::InvalidSimplexPoint("barycentric weights sum to zero".into()));
        }
        let mut a: Vec<f64> = b.iter().map(|c| (c / total).sqrt()).collect();
        let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        a.iter_mut().for_each(|c| *c /= norm);
        Self::new(a)
    }

    /// The vertex `e_i` of `Delta^k_s`.
    pub fn vertex(k: usize, i: usize) -> Result<Self, StraightenError> {
        if i > k {
            return Err(StraightenError::FaceIndex { index: i, degree: k });
        }
        let mut a = vec![0.0; k + 1];
        a[i] = 1.0;
        Ok(Self { a })
    }

    pub fn coords(&self) -> &[f64] {
        &self.a
    }

    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Drops coordinate `i`, which must be zero.
    pub fn restrict(&self, i: usize) -> Result<Self, StraightenError> {
        if i >= self.a.len() || self.a.len() < 2 {
            return Err(StraightenError::FaceIndex {
                index: i,
                degree: self.degree(),
            });
        }
        if self.a[i] != 0.0 {
            return Err(StraightenError::InvalidSimplexPoint(format!("coordinate {i} is not zero")));
        }
        let mut a = self.a.clone();
        a.remove(i);
        Ok(Self { a })
    }

    /// Inserts a zero coordinate at position `i`.
    pub fn extend_at(&self, i: usize) -> Result<Self, StraightenError> {
        if i > self.a.len() {
            return Err(StraightenError::FaceIndex {
                index: i,
                degree: self.degree() + 1,
            });
        }
        let mut a = self.a.clone();
        a.insert(i, 0.0);
        Ok(Self { a })
    }

    /// `new[j] = old[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            a: perm.iter().map(|&p| self.a[p]).collect(),
        }
    }

    /// Euclidean distance in `R^{k+1}`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.a.iter().zip(&other.a).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for SphericalSimplexPoint {
    type Error = StraightenError;
    fn try_from(a: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(a)
    }
}

impl From<SphericalSimplexPoint> for Vec<f64> {
    fn from(p: SphericalSimplexPoint) -> Self {
        p.a
    }
}

/// Ordered vertices with their densities `nu(x_i)` on one shared grid.
#[derive(Clone, Debug)]
pub struct VertexTuple {
    grid: QuadratureGrid,
    vertices: Vec<ModelPoint>,
    measures: Vec<BoundaryMeasure>,
}

impl VertexTuple {
    pub fn new(grid: &QuadratureGrid, vertices: Vec<ModelPoint>) -> Result<Self, StraightenError> {
        if vertices.is_empty() {
            return Err(StraightenError::Degree {
                needed: "at least one vertex".into(),
                got: 0,
            });
        }
        let model = grid.model();
        for v in &vertices {
            model.point(v.as_slice())?;
        }
        let measures = vertices.iter().map(|x| ps_density(grid, x)).collect();
        Ok(Self {
            grid: grid.clone(),
            vertices,
            measures,
        })
    }

    pub fn model(&self) -> &Model {
        self.grid.model()
    }
    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }
    pub fn vertices(&self) -> &[ModelPoint] {
        &self.vertices
    }
    pub fn measures(&self) -> &[BoundaryMeasure] {
        &self.measures
    }
    pub fn degree(&self) -> usize {
        self.vertices.len() - 1
    }

    /// The face opposite vertex `i`.
    pub fn face(&self, i: usize) -> Result<Self, StraightenError> {
        let k = self.degree();
        if k == 0 {
            return Err(StraightenError::Degree {
                needed: "a simplex of degree >= 1".into(),
                got: 0,
            });
        }
        if i > k {
            return Err(StraightenError::FaceIndex { index: i, degree: k });
        }
        let mut out = self.clone();
        out.vertices.remove(i);
        out.measures.remove(i);
        Ok(out)
    }

    /// `new[j] = old[perm[j]]`, sharing the cached measures.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            grid: self.grid.clone(),
            vertices: perm.iter().map(|&p| self.vertices[p].clone()).collect(),
            measures: perm.iter().map(|&p| self.measures[p].clone()).collect(),
        }
    }

    /// `gamma V`, with densities taken on the transported grid so that they
    /// are the pushforwards `gamma_* nu(x_i)`.
    pub fn transport(&self, g: &Isometry) -> Self {
        let grid = self.grid.transport(g);
        let vertices: Vec<ModelPoint> = self.vertices.iter().map(|x| g.apply_point(x)).collect();
        let measures = vertices.iter().map(|x| ps_density(&grid, x)).collect();
        Self {
            grid,
            vertices,
            measures,
        }
    }

    /// `sum a_i^2 nu(x_i)`.
    pub fn measure_at(&self, sigma: &SphericalSimplexPoint) -> Result<BoundaryMeasure, StraightenError> {
        self.check_degree(sigma)?;
        Ok(weighted_combination(sigma.coords(), &self.measures)?)
    }

    /// Per-factor normalised Minkowski average `sum a_i^2 x_i`, used as the
    /// Newton starting point.
    pub fn initial_guess(&self, sigma: &SphericalSimplexPoint) -> ModelPoint {
        let model = self.model();
        let mut y = vec![0.0; model.ambient_dim()];
        for (a, x) in sigma.coords().iter().zip(&self.vertices) {
            let w = a * a;
            if w == 0.0 {
                continue;
            }
            for (acc, c) in y.iter_mut().zip(x.as_slice()) {
                *acc += w * c;
            }
        }
        for r in model.factor_ranges() {
            let f = &mut y[r];
            let s = (-minkowski(f, f)).sqrt();
            f.iter_mut().for_each(|c| *c /= s);
        }
        ModelPoint(y.into())
    }

    fn check_degree(&self, sigma: &SphericalSimplexPoint) -> Result<(), StraightenError> {
        if sigma.coords().len() != self.vertices.len() {
            return Err(StraightenError::DimensionMismatch {
                expected: self.vertices.len(),
                got: sigma.coords().len(),
            });
        }
        Ok(())
    }

    /// Same vertices and same grid atoms.
    pub fn same_simplex(&self, other: &Self) -> bool {
        Arc::ptr_eq(self.grid.atoms(), other.grid.atoms()) && self.vertices == other.vertices
    }
}

/// `st_V(sigma)`.
pub fn straighten_point(
    v: &VertexTuple,
    sigma: &SphericalSimplexPoint,
    settings: &SolverSettings,
) -> Result<ModelPoint, StraightenError> {
    Ok(straighten_point_full(v, sigma, settings)?.point)
}

/// `st_V(sigma)` with the solver diagnostics.
pub fn straighten_point_full(
    v: &VertexTuple,
    sigma: &SphericalSimplexPoint,
    settings: &SolverSettings,
) -> Result<BarycenterResult, StraightenError> {
    let mu = v.measure_at(sigma)?;
    let init = v.initial_guess(sigma);
    Ok(barycenter(&mu, settings, Some(&init))?)
}

type SimplexMap = dyn Fn(&SphericalSimplexPoint) -> ModelPoint + Send + Sync;

/// A continuous map `Delta^k_s -> X` together with its vertex tuple.
#[derive(Clone)]
pub struct SingularSimplex {
    vertices: VertexTuple,
    map: Arc<SimplexMap>,
}

impl fmt::Debug for SingularSimplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SingularSimplex").field("vertices", &self.vertices.vertices).finish()
    }
}

impl SingularSimplex {
    /// Wraps `map`, checking that it sends `e_i` to `x_i` (within 1e-9).
    pub fn new<F>(vertices: VertexTuple, map: F) -> Result<Self, StraightenError>
    where
        F: Fn(&SphericalSimplexPoint) -> ModelPoint + Send + Sync + 'static,
    {
        let k = vertices.degree();
        for (i, x) in vertices.vertices().iter().enumerate() {
            let e = SphericalSimplexPoint::vertex(k, i)?;
            let d = vertices.model().distance(&map(&e), x);
            if !(d <= 1e-9) {
                return Err(StraightenError::InvalidSimplexPoint(format!("map sends e_{i} at distance {d} from vertex {i}")));
            }
        }
        Ok(Self {
            vertices,
            map: Arc::new(map),
        })
    }

    /// Iterated geodesic cone: vertex 0 is joined by geodesics to the cone on
    /// the remaining vertices, with the barycentric weight `a_0^2` fixing the
    /// position along each geodesic.
    pub fn geodesic_cone(vertices: VertexTuple) -> Self {
        let model = vertices.model().clone();
        let points = vertices.vertices().to_vec();
        let map = move |s: &SphericalSimplexPoint| {
            let b: Vec<f64> = s.coords().iter().map(|a| a * a).collect();
            cone_point(&model, &points, &b)
        };
        Self {
            vertices,
            map: Arc::new(map),
        }
    }

    pub fn vertices(&self) -> &VertexTuple {
        &self.vertices
    }

    pub fn evaluate(&self, sigma: &SphericalSimplexPoint) -> ModelPoint {
        (self.map)(sigma)
    }
}

fn cone_point(model: &Model, points: &[ModelPoint], b: &[f64]) -> ModelPoint {
    let total: f64 = b.iter().sum();
    let rest = total - b[0];
    if points.len() == 1 || rest <= 0.0 {
        return points[0].clone();
    }
    let inner = cone_point(model, &points[1..], &b[1..]);
    let u = model.log_map(&points[0], &inner);
    model.exp_map(&points[0], &u, rest / total)
}

/// `exp_{f(sigma)}(s log_{f(sigma)} st_V(sigma))`.
pub fn geodesic_homotopy(
    f: &SingularSimplex,
    s: f64,
    sigma: &SphericalSimplexPoint,
    settings: &SolverSettings,
) -> Result<ModelPoint, StraightenError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(StraightenError::HomotopyParameter(s));
    }
    let model = f.vertices.model();
    let start = f.evaluate(sigma);
    if s == 0.0 {
        return Ok(start);
    }
    let end = straighten_point(&f.vertices, sigma, settings)?;
    if s == 1.0 {
        return Ok(end);
    }
    let u = model.log_map(&start, &end);
    Ok(model.exp_map(&start, &u, s))
}

#[derive(Clone, Debug)]
pub enum ChainSimplex {
    Straight(VertexTuple),
    Singular(SingularSimplex),
}

impl ChainSimplex {
    pub fn vertices(&self) -> &VertexTuple {
        match self {
            ChainSimplex::Straight(v) => v,
            ChainSimplex::Singular(f) => f.vertices(),
        }
    }
}

/// A finite real chain `sum a_i f_i` with nonzero coefficients.
#[derive(Clone, Debug, Default)]
pub struct Chain {
    terms: Vec<(f64, ChainSimplex)>,
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff * simplex`; zero coefficients are dropped.
    pub fn push(&mut self, coeff: f64, simplex: ChainSimplex) {
        if coeff != 0.0 {
            self.terms.push((coeff, simplex));
        }
    }

    pub fn terms(&self) -> &[(f64, ChainSimplex)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `sum |a_i|`.
pub fn chain_l1_norm(c: &Chain) -> f64 {
    c.terms.iter().map(|(a, _)| a.abs()).sum()
}

/// Replaces every simplex by its straightening. Since `st` depends only on the
/// vertices, simplices sharing a vertex tuple merge, and cancelled terms drop.
pub fn straighten_chain(c: &Chain) -> Chain {
    let mut merged: Vec<(f64, VertexTuple)> = Vec::new();
    for (a, s) in &c.terms {
        let v = s.vertices();
        match merged.iter_mut().find(|(_, w)| w.same_simplex(v)) {
            Some((b, _)) => *b += a,
            None => merged.push((*a, v.clone())),
        }
    }
    let mut out = Chain::new();
    for (a, v) in merged {
        out.push(a, ChainSimplex::Straight(v));
    }
    out
}

/// Per-sample distances of a verification, with the pass verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub samples: usize,
    pub tolerance: f64,
    pub max_discrepancy: f64,
    pub passed: bool,
    pub values: Vec<f64>,
}

impl DiscrepancyReport {
    pub fn from_values(values: Vec<f64>, tolerance: f64) -> Self {
        let max_discrepancy = values.iter().cloned().fold(0.0, f64::max);
        Self {
            samples: values.len(),
            tolerance,
            passed: values.iter().all(|v| *v <= tolerance),
            max_discrepancy,
            values,
        }
    }
}

/// Compares `st_V` on each face `a_i = 0` with `st_{face(V, i)}`.
/// Sample `s` of face `i` uses the stream `i * samples_per_face + s`.
pub fn verify_face_compatibility(
    v: &VertexTuple,
    samples_per_face: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<DiscrepancyReport, StraightenError> {
    let k = v.degree();
    if k == 0 {
        return Err(StraightenError::Degree {
            needed: "a simplex of degree >= 1".into(),
            got: 0,
        });
    }
    let faces: Vec<VertexTuple> = (0..=k).map(|i| v.face(i)).collect::<Result<_, _>>()?;
    let model = v.model();
    let values: Vec<Result<f64, StraightenError>> = (0..(k + 1) * samples_per_face)
        .into_par_iter()
        .map(|idx| {
            let i = idx / samples_per_face;
            let mut rng = derived_rng(seed, idx as u64);
            let inner = sample_simplex_point(k - 1, &mut rng);
            let sigma = inner.extend_at(i)?;
            let full = straighten_point(v, &sigma, settings)?;
            let restricted = straighten_point(&faces[i], &inner, settings)?;
            Ok(model.distance(&full, &restricted))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(DiscrepancyReport::from_values(values, FACE_TOL))
}

/// `d(st_{gamma V}(sigma), gamma st_V(sigma))` over seeded `sigma`.
pub fn verify_equivariance(
    v: &VertexTuple,
    g: &Isometry,
    samples: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<DiscrepancyReport, StraightenError> {
    let moved = v.transport(g);
    let model = v.model();
    let k = v.degree();
    let values: Vec<Result<f64, StraightenError>> = (0..samples)
        .into_par_iter()
        .map(|idx| {
            let sigma = sample_simplex_point(k, &mut derived_rng(seed, idx as u64));
            let lhs = straighten_point(&moved, &sigma, settings)?;
            let rhs = g.apply_point(&straighten_point(v, &sigma, settings)?);
            Ok(model.distance(&lhs, &rhs))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(DiscrepancyReport::from_values(values, EQUIVARIANCE_TOL))
}

/// Empirical Lipschitz quotients `d(st(sigma), st(sigma')) / |sigma - sigma'|`
/// for perturbations of size at most `step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub samples: usize,
    pub step: f64,
    pub max_lipschitz: f64,
    pub quotients: Vec<f64>,
}

pub fn continuity_report(
    v: &VertexTuple,
    samples: usize,
    step: f64,
    seed: u64,
    settings: &SolverSettings,
) -> Result<ContinuityReport, StraightenError> {
    let model = v.model();
    let k = v.degree();
    let quotients: Vec<Result<f64, StraightenError>> = (0..samples)
        .into_par_iter()
        .map(|idx| {
            let mut rng = derived_rng(seed, idx as u64);
            let sigma = sample_simplex_point(k, &mut rng);
            let other = sample_simplex_point(k, &mut rng);
            // move from sigma towards another point, then renormalise
            let dist = sigma.distance(&other).max(f64::MIN_POSITIVE);
            let t = (step / dist).min(1.0) * 0.5;
            let mixed: Vec<f64> = sigma
                .coords()
                .iter()
                .zip(other.coords())
                .map(|(a, b)| a + t * (b - a))
                .collect();
            let norm = mixed.iter().map(|c| c * c).sum::<f64>().sqrt();
            let near = SphericalSimplexPoint::new(mixed.iter().map(|c| c / norm).collect())?;
            let gap = sigma.distance(&near);
            if gap == 0.0 {
                return Ok(0.0);
            }
            let a = straighten_point(v, &sigma, settings)?;
            let b = straighten_point(v, &near, settings)?;
            Ok(model.distance(&a, &b) / gap)
        })
        .collect();
    let quotients = quotients.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ContinuityReport {
        samples,
        step,
        max_lipschitz: quotients.iter().cloned().fold(0.0, f64::max),
        quotients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_grid;

    #[test]
    fn simplex_point_validation() {
        assert!(SphericalSimplexPoint::new(vec![0.6, 0.8]).is_ok());
        assert!(SphericalSimplexPoint::new(vec![0.6, 0.7]).is_err());
        assert!(SphericalSimplexPoint::new(vec![-0.6, 0.8]).is_err());
        assert!(SphericalSimplexPoint::new(vec![]).is_err());
        let p = SphericalSimplexPoint::from_barycentric(&[1.0, 1.0, 2.0]).unwrap();
        assert!((p.coords()[2] - 0.5f64.sqrt()).abs() < 1e-15);
        let e = SphericalSimplexPoint::vertex(2, 1).unwrap();
        assert_eq!(e.coords(), &[0.0, 1.0, 0.0]);
        assert_eq!(e.restrict(0).unwrap().coords(), &[1.0, 0.0]);
        assert!(e.restrict(1).is_err());
        let raw: Vec<f64> = p.into();
        assert_eq!(raw.len(), 3);
    }

    #[test]
    fn vertices_and_constant_simplex() {
        let m = Model::hyperbolic(2).unwrap();
        let grid = build_grid(&m, 256, 0).unwrap();
        let x = m.point_from_spatial(&[0.3, -0.4]);
        let y = m.point_from_spatial(&[-0.5, 0.1]);
        let v = VertexTuple::new(&grid, vec![x.clone(), y.clone(), x.clone()]).unwrap();
        let s = SolverSettings::default();
        let e1 = SphericalSimplexPoint::vertex(2, 1).unwrap();
        assert!(m.distance(&straighten_point(&v, &e1, &s).unwrap(), &y) < 1e-7);

        let c = VertexTuple::new(&grid, vec![x.clone(), x.clone(), x.clone()]).unwrap();
        let sigma = SphericalSimplexPoint::from_barycentric(&[0.2, 0.3, 0.5]).unwrap();
        assert!(m.distance(&straighten_point(&c, &sigma, &s).unwrap(), &x) < 1e-7);

        let short = SphericalSimplexPoint::vertex(1, 0).unwrap();
        assert!(matches!(
            straighten_point(&v, &short, &s),
            Err(StraightenError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn chain_norms() {
        let m = Model::hyperbolic(2).unwrap();
        let grid = build_grid(&m, 64, 0).unwrap();
        let o = m.basepoint();
        let x = m.point_from_spatial(&[0.3, 0.0]);
        let v = VertexTuple::new(&grid, vec![o.clone(), x.clone()]).unwrap();
        let w = VertexTuple::new(&grid, vec![x, o]).unwrap();
        let mut c = Chain::new();
        assert_eq!(chain_l1_norm(&c), 0.0);
        c.push(1.0, ChainSimplex::Straight(v.clone()));
        c.push(-2.0, ChainSimplex::Straight(w.clone()));
        c.push(0.5, ChainSimplex::Singular(SingularSimplex::geodesic_cone(v.clone())));
        c.push(0.0, ChainSimplex::Straight(w));
        assert_eq!(c.len(), 3);
        assert_eq!(chain_l1_norm(&c), 3.5);
        let st = straighten_chain(&c);
        assert_eq!(st.len(), 2);
        assert_eq!(chain_l1_norm(&st), 3.5);

        let mut cancel = Chain::new();
        cancel.push(1.0, ChainSimplex::Straight(v.clone()));
        cancel.push(-1.0, ChainSimplex::Singular(SingularSimplex::geodesic_cone(v)));
        assert!(straighten_chain(&cancel).is_empty());
    }

    #[test]
    fn homotopy_rejects_bad_parameter() {
        let m = Model::hyperbolic(2).unwrap();
        let grid = build_grid(&m, 64, 0).unwrap();
        let v = VertexTuple::new(&grid, vec![m.basepoint(), m.point_from_spatial(&[0.2, 0.1])]).unwrap();
        let f = SingularSimplex::geodesic_cone(v);
        let sigma = SphericalSimplexPoint::vertex(1, 0).unwrap();
        assert!(geodesic_homotopy(&f, 1.5, &sigma, &SolverSettings::default()).is_err());
    }
}
