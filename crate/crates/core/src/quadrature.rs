//! Quadrature grids on the boundary at infinity.
//!
//! The boundary of `H^n` is the unit sphere `S^{n-1}` of spatial directions;
//! the Furstenberg boundary of `H^2 x H^2` is the torus `S^1 x S^1`. A grid is
//! an equal-or-positive-weight cubature for the visual (round) measure seen
//! from a reference point, which is the basepoint `o` unless the grid has been
//! transported by an isometry.
//!
//! Schemes:
//! - [`GridScheme::Uniform`]: equispaced circle (trapezoid rule), and its
//!   tensor square on the torus.
//! - [`GridScheme::GaussProduct`]: uniform azimuth combined with
//!   Gauss–Gegenbauer nodes in each polar coordinate, on any `S^m`. Spectrally
//!   accurate for the analytic Poisson-kernel integrands used downstream.
//! - [`GridScheme::Fibonacci`]: spherical Fibonacci lattice on `S^2`.
//! - [`GridScheme::Random`]: seeded uniform random nodes on any `S^m`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::MeasureError;
use crate::isometry::Isometry;
use crate::model::{BoundaryPoint, Model, ModelKind, ModelPoint};

pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    Uniform,
    GaussProduct,
    Fibonacci,
    Random,
}

impl GridScheme {
    pub fn default_for(model: &Model) -> Self {
        match model.kind() {
            ModelKind::Hyperbolic(2) | ModelKind::ProductH2H2 => GridScheme::Uniform,
            ModelKind::Hyperbolic(_) => GridScheme::GaussProduct,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridScheme::Uniform => "uniform",
            GridScheme::GaussProduct => "gauss-product",
            GridScheme::Fibonacci => "fibonacci",
            GridScheme::Random => "random",
        }
    }
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default resolution per model; see [`build_grid`] for its meaning.
pub fn default_resolution(model: &Model) -> usize {
    match model.kind() {
        ModelKind::Hyperbolic(2) => 512,
        ModelKind::Hyperbolic(3) => 64,
        ModelKind::Hyperbolic(4) => 40,
        ModelKind::Hyperbolic(_) => 20,
        ModelKind::ProductH2H2 => 128,
    }
}

/// Boundary atoms of one model, stored column-wise in ambient coordinates.
/// Measures compare atom sets by identity.
#[derive(Debug)]
pub struct AtomSet {
    model: Model,
    coords: DMatrix<f64>,
}

impl AtomSet {
    pub(crate) fn new(model: Model, coords: DMatrix<f64>) -> Arc<Self> {
        Arc::new(Self { model, coords })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.ncols() == 0
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        let a = self.coords.nrows();
        &self.coords.as_slice()[j * a..(j + 1) * a]
    }

    pub fn point(&self, j: usize) -> BoundaryPoint {
        BoundaryPoint(self.coords.column(j).into_owned())
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    atoms: Arc<AtomSet>,
    weights: Arc<Vec<f64>>,
    scheme: GridScheme,
    resolution: usize,
    seed: u64,
    reference: ModelPoint,
}

impl QuadratureGrid {
    pub fn model(&self) -> &Model {
        self.atoms.model()
    }
    pub fn atoms(&self) -> &Arc<AtomSet> {
        &self.atoms
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    /// Point whose visual measure the weights discretise.
    pub fn reference_point(&self) -> &ModelPoint {
        &self.reference
    }

    /// Transports atoms and reference point by `g`, keeping the weights.
    pub fn transport(&self, g: &Isometry) -> QuadratureGrid {
        let coords = g.apply_boundary_columns(self.atoms.coords());
        QuadratureGrid {
            atoms: AtomSet::new(self.model().clone(), coords),
            weights: Arc::clone(&self.weights),
            scheme: self.scheme,
            resolution: self.resolution,
            seed: self.seed,
            reference: g.apply_point(&self.reference),
        }
    }
}

/// Builds the default-scheme grid.
///
/// `resolution` is the number of azimuthal nodes; with
/// [`GridScheme::GaussProduct`] every further polar angle contributes
/// `resolution / 2` Gauss nodes, so `S^2` carries `resolution^2 / 2` atoms.
/// On `H^2 x H^2` the grid is the tensor square of a circle grid.
pub fn build_grid(model: &Model, resolution: usize, seed: u64) -> Result<QuadratureGrid, MeasureError> {
    build_grid_with(model, GridScheme::default_for(model), resolution, seed)
}

pub fn build_grid_with(
    model: &Model,
    scheme: GridScheme,
    resolution: usize,
    seed: u64,
) -> Result<QuadratureGrid, MeasureError> {
    if resolution < MIN_RESOLUTION {
        return Err(MeasureError::ResolutionTooSmall(resolution));
    }
    let unavailable = || MeasureError::SchemeUnavailable {
        scheme: scheme.name().to_string(),
        model: model.id(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<Vec<(Vec<f64>, f64)>> = model
        .factor_dims()
        .iter()
        .map(|&d| {
            let sphere = d - 1;
            match scheme {
                GridScheme::Uniform if sphere == 1 => Ok(circle(resolution)),
                GridScheme::Uniform => Err(unavailable()),
                GridScheme::GaussProduct => Ok(gauss_product(sphere, resolution)),
                GridScheme::Fibonacci if sphere == 2 => Ok(fibonacci(resolution)),
                GridScheme::Fibonacci => Err(unavailable()),
                GridScheme::Random => Ok(random_sphere(sphere, resolution, &mut rng)),
            }
        })
        .collect::<Result<_, _>>()?;

    // tensor product over factors
    let mut nodes: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for factor in &factors {
        let mut next = Vec::with_capacity(nodes.len() * factor.len());
        for (head, wh) in &nodes {
            for (dir, wd) in factor {
                let mut v = head.clone();
                v.extend_from_slice(dir);
                v.push(1.0);
                next.push((v, wh * wd));
            }
        }
        nodes = next;
    }
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    let amb = model.ambient_dim();
    let mut coords = DMatrix::zeros(amb, nodes.len());
    let mut weights = Vec::with_capacity(nodes.len());
    for (j, (v, w)) in nodes.into_iter().enumerate() {
        coords.column_mut(j).copy_from_slice(&v);
        weights.push(w / total);
    }
    Ok(QuadratureGrid {
        atoms: AtomSet::new(model.clone(), coords),
        weights: Arc::new(weights),
        scheme,
        resolution,
        seed,
        reference: model.basepoint(),
    })
}

fn circle(n: usize) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / n as f64;
            (vec![phi.cos(), phi.sin()], 1.0 / n as f64)
        })
        .collect()
}

/// Product rule on `S^m`: `x = (sqrt(1 - z^2) y, z)` with `y` on `S^{m-1}` and
/// `z` a Gauss node for the weight `(1 - z^2)^{(m-2)/2}`.
fn gauss_product(m: usize, resolution: usize) -> Vec<(Vec<f64>, f64)> {
    if m == 1 {
        return circle(resolution);
    }
    let inner = gauss_product(m - 1, resolution);
    let polar = gauss_gegenbauer((resolution / 2).max(2), (m as f64 - 2.0) / 2.0);
    let mut out = Vec::with_capacity(inner.len() * polar.len());
    for &(z, wz) in &polar {
        let r = (1.0 - z * z).sqrt();
        for (y, wy) in &inner {
            let mut v: Vec<f64> = y.iter().map(|c| r * c).collect();
            v.push(z);
            out.push((v, wz * wy));
        }
    }
    out
}

/// Gauss quadrature on `[-1, 1]` for the weight `(1 - z^2)^a` via the
/// Golub–Welsch eigenvalue method. Weights are normalised to sum to 1.
pub fn gauss_gegenbauer(count: usize, a: f64) -> Vec<(f64, f64)> {
    let mut jac = DMatrix::zeros(count, count);
    for k in 1..count {
        let kf = k as f64;
        let b2 = kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0));
        let b = b2.sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<(f64, f64)> = (0..count)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    nodes.iter_mut().for_each(|n| n.1 /= total);
    nodes
}

fn fibonacci(n: usize) -> Vec<(Vec<f64>, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            (vec![r * phi.cos(), r * phi.sin(), z], 1.0 / n as f64)
        })
        .collect()
}

fn random_sphere(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..=m).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-8 {
                break (v.iter().map(|c| c / norm).collect(), 1.0 / n as f64);
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_grid_example() {
        let m = Model::hyperbolic(2).unwrap();
        let g = build_grid(&m, 512, 0).unwrap();
        assert_eq!(g.len(), 512);
        assert!(g.weights().iter().all(|&w| (w - 1.0 / 512.0).abs() < 1e-18));
        let a = g.atoms().point(128);
        assert!((a.as_slice()[0]).abs() < 1e-15 && (a.as_slice()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_grid_example() {
        let m = Model::product_h2h2();
        let g = build_grid(&m, 128, 0).unwrap();
        assert_eq!(g.len(), 128 * 128);
        assert!(g.weights().iter().all(|&w| (w - 1.0 / 16384.0).abs() < 1e-18));
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_floor() {
        let m = Model::hyperbolic(3).unwrap();
        assert_eq!(build_grid(&m, 15, 0).unwrap_err(), MeasureError::ResolutionTooSmall(15));
        assert!(build_grid_with(&m, GridScheme::Uniform, 64, 0).is_err());
        assert!(build_grid_with(&Model::hyperbolic(4).unwrap(), GridScheme::Fibonacci, 64, 0).is_err());
    }

    #[test]
    fn all_atoms_are_normalised_null_vectors() {
        for (id, scheme, res) in [
            ("h3", GridScheme::GaussProduct, 16),
            ("h3", GridScheme::Fibonacci, 100),
            ("h4", GridScheme::GaussProduct, 16),
            ("h5", GridScheme::Random, 64),
            ("h5", GridScheme::GaussProduct, 16),
        ] {
            let m = Model::from_id(id).unwrap();
            let g = build_grid_with(&m, scheme, res, 9).unwrap();
            assert!(g.len() >= MIN_RESOLUTION);
            assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(g.weights().iter().all(|&w| w > 0.0));
            for j in 0..g.len() {
                assert!(m.boundary(g.atoms().atom(j)).is_ok(), "{id} {scheme} atom {j}");
            }
        }
    }

    #[test]
    fn gegenbauer_rules_integrate_polynomials() {
        // int z^2 (1 - z^2)^a dz / int (1 - z^2)^a dz = 1 / (2a + 3)
        for a in [0.0, 0.5, 1.0] {
            let rule = gauss_gegenbauer(6, a);
            let m2: f64 = rule.iter().map(|(z, w)| w * z * z).sum();
            assert!((m2 - 1.0 / (2.0 * a + 3.0)).abs() < 1e-14);
            let m1: f64 = rule.iter().map(|(z, w)| w * z).sum();
            assert!(m1.abs() < 1e-15);
        }
    }

    #[test]
    fn seeded_random_grid_is_deterministic() {
        let m = Model::hyperbolic(4).unwrap();
        let a = build_grid_with(&m, GridScheme::Random, 64, 5).unwrap();
        let b = build_grid_with(&m, GridScheme::Random, 64, 5).unwrap();
        assert_eq!(a.atoms().coords(), b.atoms().coords());
    }
}
