//! Linear isometries of the hyperboloid models, acting factor-wise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::model::{BoundaryPoint, Model, ModelPoint, TangentVector};

/// Form-preserving tolerance `|A^T J A - J|_max`.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// One `(d+1) x (d+1)` Lorentz matrix per factor (time coordinate last).
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    blocks: Vec<DMatrix<f64>>,
}

impl Isometry {
    pub fn identity(model: &Model) -> Self {
        Self {
            blocks: model.factor_dims().iter().map(|&d| DMatrix::identity(d + 1, d + 1)).collect(),
        }
    }

    /// Validates the blocks: each must preserve the Minkowski form and the
    /// upper sheet.
    pub fn new(model: &Model, blocks: Vec<DMatrix<f64>>) -> Result<Self, ModelError> {
        if blocks.len() != model.rank() {
            return Err(ModelError::IsometryShape {
                expected: model.rank(),
                got: blocks.len(),
            });
        }
        for (b, &d) in blocks.iter().zip(model.factor_dims()) {
            if b.nrows() != d + 1 || b.ncols() != d + 1 {
                return Err(ModelError::IsometryShape {
                    expected: d + 1,
                    got: b.nrows(),
                });
            }
            let residual = form_residual(b);
            if residual > ISOMETRY_TOL || b[(d, d)] <= 0.0 {
                return Err(ModelError::NotAnIsometry { residual });
            }
        }
        Ok(Self { blocks })
    }

    /// Boost of rapidity `t` mixing spatial `axis` of `factor` with its time axis.
    pub fn boost(model: &Model, factor: usize, axis: usize, t: f64) -> Self {
        let mut iso = Self::identity(model);
        let b = &mut iso.blocks[factor];
        let d = b.nrows() - 1;
        b[(axis, axis)] = t.cosh();
        b[(d, d)] = t.cosh();
        b[(axis, d)] = t.sinh();
        b[(d, axis)] = t.sinh();
        iso
    }

    /// `exp(A)` per factor for Minkowski-antisymmetric generators
    /// (`A^T J + J A = 0`).
    pub fn from_generators(model: &Model, generators: &[DMatrix<f64>]) -> Result<Self, ModelError> {
        Self::new(model, generators.iter().map(|a| a.clone().exp()).collect())
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn max_form_residual(&self) -> f64 {
        self.blocks.iter().map(form_residual).fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Self {
        // A^{-1} = J A^T J
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    let j = minkowski_gram(b.nrows());
                    &j * b.transpose() * &j
                })
                .collect(),
        }
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect(),
        }
    }

    fn apply_raw(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        let mut start = 0;
        for b in &self.blocks {
            let k = b.nrows();
            let seg = b * v.rows(start, k);
            out.rows_mut(start, k).copy_from(&seg);
            start += k;
        }
        out
    }

    pub fn apply_point(&self, x: &ModelPoint) -> ModelPoint {
        ModelPoint(self.apply_raw(x.as_vector()))
    }

    pub fn apply_tangent(&self, u: &TangentVector) -> TangentVector {
        TangentVector(self.apply_raw(u.as_vector()))
    }

    /// Image of a boundary point, renormalised so each factor has time component 1.
    pub fn apply_boundary(&self, theta: &BoundaryPoint) -> BoundaryPoint {
        let mut v = self.apply_raw(theta.as_vector());
        let mut start = 0;
        for b in &self.blocks {
            let k = b.nrows();
            let t = v[start + k - 1];
            v.rows_mut(start, k).scale_mut(1.0 / t);
            start += k;
        }
        BoundaryPoint(v)
    }

    /// Transforms a matrix whose columns are boundary atoms, renormalising each.
    pub(crate) fn apply_boundary_columns(&self, atoms: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(atoms.nrows(), atoms.ncols());
        let mut start = 0;
        for b in &self.blocks {
            let k = b.nrows();
            let mut seg = b * atoms.rows(start, k);
            for mut col in seg.column_iter_mut() {
                let t = col[k - 1];
                col /= t;
            }
            out.rows_mut(start, k).copy_from(&seg);
            start += k;
        }
        out
    }
}

/// Seeded random isometry `exp(A)`, with generator entries uniform in `[-1, 1]`.
pub fn random_isometry(model: &Model, seed: u64) -> Isometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_isometry_with(model, &mut rng)
}

pub fn random_isometry_with<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Isometry {
    let gens: Vec<DMatrix<f64>> = model
        .factor_dims()
        .iter()
        .map(|&d| random_generator(d, rng))
        .collect();
    Isometry::from_generators(model, &gens).expect("exponential of a Lorentz generator is an isometry")
}

fn random_generator<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in i + 1..d {
            let r = rng.random_range(-1.0..=1.0);
            a[(i, j)] = r;
            a[(j, i)] = -r;
        }
        let r = rng.random_range(-1.0..=1.0);
        a[(i, d)] = r;
        a[(d, i)] = r;
    }
    a
}

fn minkowski_gram(k: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(k, k);
    j[(k - 1, k - 1)] = -1.0;
    j
}

fn form_residual(b: &DMatrix<f64>) -> f64 {
    let j = minkowski_gram(b.nrows());
    (b.transpose() * &j * b - j).amax()
}
