//! Finitely supported measures on the boundary and the discretised
//! Patterson–Sullivan density `x -> nu(x)`.

use std::sync::Arc;

use crate::busemann::busemann_raw;
use crate::error::MeasureError;
use crate::isometry::Isometry;
use crate::model::{BoundaryPoint, Model, ModelPoint};
use crate::quadrature::{AtomSet, QuadratureGrid};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BoundaryMeasure {
    atoms: Arc<AtomSet>,
    masses: Vec<f64>,
}

impl BoundaryMeasure {
    /// Normalises `masses` to total 1. All masses must be positive.
    pub fn new(atoms: Arc<AtomSet>, masses: Vec<f64>) -> Self {
        assert_eq!(atoms.len(), masses.len(), "one mass per atom");
        let total = pairwise_sum(&masses);
        let masses = masses.into_iter().map(|m| m / total).collect();
        Self { atoms, masses }
    }

    pub fn model(&self) -> &Model {
        self.atoms.model()
    }
    pub fn atoms(&self) -> &Arc<AtomSet> {
        &self.atoms
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn shares_atoms(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.atoms, &other.atoms)
    }

    /// Positivity and unit total mass.
    pub fn is_valid(&self) -> bool {
        self.masses.iter().all(|&m| m > 0.0 && m.is_finite())
            && (pairwise_sum(&self.masses) - 1.0).abs() <= MASS_TOL
    }

    /// Same measure with atoms reordered by `perm` (`new[j] = old[perm[j]]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let amb = self.atoms.coords().nrows();
        let mut coords = self.atoms.coords().clone();
        for (j, &p) in perm.iter().enumerate() {
            coords.column_mut(j).copy_from(&self.atoms.coords().column(p));
        }
        debug_assert_eq!(coords.nrows(), amb);
        Self {
            atoms: AtomSet::new(self.model().clone(), coords),
            masses: perm.iter().map(|&p| self.masses[p]).collect(),
        }
    }
}

/// Mass of `w_j exp(-h B_ref(x, theta_j))` before normalisation. In `H^n` this
/// is the Poisson integral of 1 and equals 1 up to quadrature error.
pub fn ps_unnormalized_mass(grid: &QuadratureGrid, x: &ModelPoint) -> f64 {
    pairwise_sum(&ps_raw_masses(grid, x))
}

fn ps_raw_masses(grid: &QuadratureGrid, x: &ModelPoint) -> Vec<f64> {
    let model = grid.model();
    let h = model.volume_entropy();
    let reference = grid.reference_point().as_slice();
    let atoms = grid.atoms();
    grid.weights()
        .iter()
        .enumerate()
        .map(|(j, w)| w * (-h * busemann_raw(model, reference, x.as_slice(), atoms.atom(j))).exp())
        .collect()
}

/// Patterson–Sullivan probability measure `nu(x)` on the grid's atoms.
pub fn ps_density(grid: &QuadratureGrid, x: &ModelPoint) -> BoundaryMeasure {
    BoundaryMeasure::new(Arc::clone(grid.atoms()), ps_raw_masses(grid, x))
}

/// `sum_i a_i^2 mu_i` for coefficients with `sum a_i^2 = 1`.
pub fn weighted_combination(coeffs: &[f64], measures: &[BoundaryMeasure]) -> Result<BoundaryMeasure, MeasureError> {
    if coeffs.len() != measures.len() {
        return Err(MeasureError::CountMismatch {
            coeffs: coeffs.len(),
            measures: measures.len(),
        });
    }
    let first = measures.first().ok_or(MeasureError::Empty)?;
    if measures.iter().any(|m| !m.shares_atoms(first)) {
        return Err(MeasureError::MismatchedAtoms);
    }
    let sq: f64 = coeffs.iter().map(|a| a * a).sum();
    if (sq - 1.0).abs() > 1e-10 {
        return Err(MeasureError::NotUnitCoefficients(sq));
    }
    let mut masses = vec![0.0; first.len()];
    for (a, mu) in coeffs.iter().zip(measures) {
        let w = a * a;
        if w == 0.0 {
            continue;
        }
        for (acc, m) in masses.iter_mut().zip(mu.masses()) {
            *acc += w * m;
        }
    }
    Ok(BoundaryMeasure {
        atoms: Arc::clone(first.atoms()),
        masses,
    })
}

/// `g_* mu`: atoms are moved, masses kept.
pub fn pushforward(g: &Isometry, mu: &BoundaryMeasure) -> BoundaryMeasure {
    BoundaryMeasure {
        atoms: AtomSet::new(mu.model().clone(), g.apply_boundary_columns(mu.atoms().coords())),
        masses: mu.masses.clone(),
    }
}

/// `sum_j m_j f(theta_j)` with a fixed pairwise summation order.
pub fn integrate<F>(mu: &BoundaryMeasure, f: F) -> f64
where
    F: Fn(&BoundaryPoint) -> f64,
{
    let terms: Vec<f64> = (0..mu.len()).map(|j| mu.masses[j] * f(&mu.atoms.point(j))).collect();
    pairwise_sum(&terms)
}

/// Pairwise (cascade) summation; the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::busemann::busemann;
    use crate::isometry::random_isometry;
    use crate::quadrature::{build_grid, build_grid_with, GridScheme};

    #[test]
    fn density_at_basepoint_is_uniform() {
        let m = Model::hyperbolic(2).unwrap();
        let g = build_grid(&m, 256, 0).unwrap();
        let nu = ps_density(&g, &m.basepoint());
        assert!(nu.masses().iter().all(|&x| (x - 1.0 / 256.0).abs() < 1e-17));
        assert!(nu.is_valid());
    }

    #[test]
    fn product_density_is_a_tensor() {
        let m = Model::product_h2h2();
        let g = build_grid(&m, 32, 0).unwrap();
        let x = m.point_from_spatial(&[0.4, -0.3, 1.1, 0.2]);
        let nu = ps_density(&g, &x);
        let m1 = Model::hyperbolic(2).unwrap();
        let g1 = build_grid(&m1, 32, 0).unwrap();
        let a = ps_density(&g1, &m1.point_from_spatial(&[0.4, -0.3]));
        let b = ps_density(&g1, &m1.point_from_spatial(&[1.1, 0.2]));
        for i in 0..32 {
            for j in 0..32 {
                let got = nu.masses()[i * 32 + j];
                assert!((got - a.masses()[i] * b.masses()[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn combination_rules() {
        let m = Model::hyperbolic(2).unwrap();
        let g = build_grid(&m, 64, 0).unwrap();
        let x = m.point(&[1f64.sinh(), 0.0, 1f64.cosh()]).unwrap();
        let nu_o = ps_density(&g, &m.basepoint());
        let nu_x = ps_density(&g, &x);

        let vertex = weighted_combination(&[1.0, 0.0], &[nu_x.clone(), nu_o.clone()]).unwrap();
        assert_eq!(vertex.masses(), nu_x.masses());

        let s = 0.5f64.sqrt();
        let same = weighted_combination(&[s, s], &[nu_x.clone(), nu_x.clone()]).unwrap();
        for (a, b) in same.masses().iter().zip(nu_x.masses()) {
            assert!((a - b).abs() < 1e-15);
        }

        let mix = weighted_combination(&[s, s], &[nu_o.clone(), nu_x.clone()]).unwrap();
        for j in 0..64 {
            let expect = (g.weights()[j] + nu_x.masses()[j]) / 2.0;
            assert!((mix.masses()[j] - expect).abs() < 1e-12);
        }
        assert!(mix.is_valid());

        let other = build_grid(&m, 64, 0).unwrap();
        let foreign = ps_density(&other, &x);
        assert_eq!(
            weighted_combination(&[s, s], &[nu_o.clone(), foreign]).unwrap_err(),
            MeasureError::MismatchedAtoms
        );
        assert!(matches!(
            weighted_combination(&[1.0, 1.0], &[nu_o.clone(), nu_x]),
            Err(MeasureError::NotUnitCoefficients(_))
        ));
        assert!(weighted_combination(&[], &[]).is_err());
    }

    #[test]
    fn pushforward_is_exact_under_integration() {
        let m = Model::hyperbolic(3).unwrap();
        let g = build_grid(&m, 32, 0).unwrap();
        let x = m.point_from_spatial(&[0.3, 0.2, -0.5]);
        let y = m.point_from_spatial(&[-1.0, 0.2, 0.5]);
        let nu = ps_density(&g, &x);
        let iso = random_isometry(&m, 4);
        let o = m.basepoint();
        let f = |th: &BoundaryPoint| busemann(&m, &o, &y, th);
        let lhs = integrate(&pushforward(&iso, &nu), f);
        let rhs = integrate(&nu, |th| f(&iso.apply_boundary(th)));
        assert!((lhs - rhs).abs() < 1e-13);

        let id = pushforward(&Isometry::identity(&m), &nu);
        for j in 0..nu.len() {
            assert_eq!(id.atoms().atom(j), nu.atoms().atom(j));
        }
    }

    #[test]
    fn fibonacci_mass_is_near_one() {
        let m = Model::hyperbolic(3).unwrap();
        let g = build_grid_with(&m, GridScheme::Fibonacci, 2000, 0).unwrap();
        let x = m.point_from_spatial(&[2f64.sinh(), 0.0, 0.0]);
        assert!((ps_unnormalized_mass(&g, &x) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
