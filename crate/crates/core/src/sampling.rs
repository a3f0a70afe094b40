//! Seeded samplers used by the verifiers and scans.
//!
//! Each sample `i` of a run with seed `s` draws from its own ChaCha stream
//! `(s, i)`, so results do not depend on how samples are spread over workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::model::{Model, ModelPoint};
use crate::straighten::SphericalSimplexPoint;

pub fn derived_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform direction in `T_o`, with radius `R U^{1/n}`, pushed through `exp_o`.
pub fn sample_point_in_ball<R: Rng + ?Sized>(model: &Model, radius: f64, rng: &mut R) -> ModelPoint {
    let n = model.dimension();
    let dir: Vec<f64> = loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-8 {
            break v.into_iter().map(|c| c / norm).collect();
        }
    };
    let len = radius * rng.random::<f64>().powf(1.0 / n as f64);
    let o = model.basepoint();
    let u = model.from_frame(&o, &dir.iter().map(|c| c * len).collect::<Vec<_>>());
    model.exp_map(&o, &u, 1.0)
}

pub fn sample_vertices<R: Rng + ?Sized>(model: &Model, count: usize, radius: f64, rng: &mut R) -> Vec<ModelPoint> {
    (0..count).map(|_| sample_point_in_ball(model, radius, rng)).collect()
}

/// `a_i = sqrt(b_i)` with `b` uniform on the Euclidean `k`-simplex.
pub fn sample_simplex_point<R: Rng + ?Sized>(k: usize, rng: &mut R) -> SphericalSimplexPoint {
    let b: Vec<f64> = (0..=k).map(|_| Exp1.sample(rng)).collect();
    SphericalSimplexPoint::from_barycentric(&b).expect("exponential draws are positive")
}

/// [`sample_simplex_point`] conditioned on every coordinate exceeding `floor`,
/// by rejection. `floor` must be below `1 / sqrt(k + 1)`.
pub fn sample_interior_simplex_point<R: Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> SphericalSimplexPoint {
    assert!(floor * floor * ((k + 1) as f64) < 1.0, "no simplex point has all coordinates above {floor}");
    loop {
        let s = sample_simplex_point(k, rng);
        if s.coords().iter().all(|a| *a > floor) {
            return s;
        }
    }
}

/// Uniform point of the orthant `Delta^k_s`: normalised absolute Gaussians.
pub fn sample_orthant_point<R: Rng + ?Sized>(k: usize, rng: &mut R) -> SphericalSimplexPoint {
    loop {
        let a: Vec<f64> = (0..=k).map(|_| StandardNormal.sample(rng)).map(|c: f64| c.abs()).collect();
        let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return SphericalSimplexPoint::new(a.iter().map(|c| c / norm).collect())
                .expect("normalised orthant vector");
        }
    }
}

/// Point on the face opposite vertex `face` (its coordinate is zero).
pub fn sample_face_point<R: Rng + ?Sized>(k: usize, face: usize, rng: &mut R) -> SphericalSimplexPoint {
    let inner = sample_simplex_point(k - 1, rng);
    let mut a = inner.coords().to_vec();
    a.insert(face, 0.0);
    SphericalSimplexPoint::new(a).expect("face point")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = derived_rng(1, 5).random();
        let b: f64 = derived_rng(1, 5).random();
        let c: f64 = derived_rng(1, 6).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ball_samples_stay_in_the_ball() {
        let m = Model::product_h2h2();
        let mut rng = derived_rng(0, 0);
        let o = m.basepoint();
        for _ in 0..100 {
            let x = sample_point_in_ball(&m, 3.0, &mut rng);
            assert!(m.distance(&o, &x) <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn simplex_samples_are_valid() {
        let mut rng = derived_rng(2, 0);
        for k in 1..5 {
            let s = sample_simplex_point(k, &mut rng);
            assert_eq!(s.coords().len(), k + 1);
            let f = sample_face_point(k, 0, &mut rng);
            assert_eq!(f.coords()[0], 0.0);
            let q = sample_orthant_point(k, &mut rng);
            assert!(q.coords().iter().all(|&c| c >= 0.0));
        }
    }
}
