//! Reproducible random sources: Haar measure on `O(2m)`, the uniform
//! measure on a sphere in phase space and uniform angles on `[−π, π]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::linear_optics::OrthogonalMatrix;
use crate::phase_space::MeanVector;

/// Generator used for every stream. ChaCha is counter based, so substream
/// `i` of seed `s` is a fixed sequence no matter which thread draws it.
pub const RNG_ALGORITHM: &str = "chacha8";

/// A seeded family of independent streams.
///
/// Stream 0 is what [`RandomSource::rng`] returns; Monte Carlo chunk `i`
/// draws from stream `i + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn substream(&self, chunk: u64) -> ChaCha8Rng {
        self.stream(chunk + 1)
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed `T ∈ O(2m)`: QR of a Gaussian matrix with the columns of
/// `Q` flipped so that `R` has a positive diagonal.
pub fn haar_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> OrthogonalMatrix {
    assert!(m >= 1);
    OrthogonalMatrix::new_unchecked(haar_qr(gaussian_matrix(2 * m, rng)))
}

pub(crate) fn haar_qr(g: DMatrix<f64>) -> DMatrix<f64> {
    let qr = g.qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniform point on the sphere of the given radius in `R^{2m}`.
pub fn uniform_sphere<R: Rng + ?Sized>(m: usize, radius: f64, rng: &mut R) -> MeanVector {
    assert!(m >= 1);
    assert!(radius >= 0.0, "radius must be nonnegative");
    if radius == 0.0 {
        return MeanVector::zeros(m);
    }
    loop {
        let g: DVector<f64> = DVector::from_fn(2 * m, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 0.0 {
            return MeanVector::from_dvector(g * (radius / norm));
        }
    }
}

/// `m` i.i.d. angles uniform on `[−π, π]`.
pub fn uniform_angles<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    assert!(m >= 1);
    let dist = Uniform::new_inclusive(-PI, PI).expect("valid range");
    (0..m).map(|_| dist.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = RandomSource::new(3).rng();
        for m in 1..=6 {
            let t = haar_orthogonal(m, &mut rng);
            let n = 2 * m;
            let defect = (t.matrix() * t.matrix().transpose() - DMatrix::identity(n, n)).norm();
            assert!(defect < 1e-10);
        }
    }

    #[test]
    fn haar_first_row_second_moment() {
        let m = 3;
        let mut rng = RandomSource::new(11).rng();
        let draws: Vec<f64> = (0..100_000)
            .map(|_| haar_orthogonal(m, &mut rng).matrix()[(0, 2)].powi(2))
            .collect();
        let (mean, se) = mean_and_se(&draws);
        assert!((mean - 1.0 / 6.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn haar_covers_both_components() {
        let mut rng = RandomSource::new(5).rng();
        let n = 10_000;
        let neg = (0..n)
            .filter(|_| haar_orthogonal(2, &mut rng).matrix().determinant() < 0.0)
            .count() as f64;
        let p = neg / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn haar_left_invariance() {
        // QT for a fixed orthogonal Q has the same column moments as T
        let m = 2;
        let mut rng = RandomSource::new(21).rng();
        let q = haar_orthogonal(m, &mut rng);
        let n = 100_000;
        let mut firsts = Vec::with_capacity(n);
        let mut seconds = Vec::with_capacity(n);
        for _ in 0..n {
            let t = haar_orthogonal(m, &mut rng);
            let qt = q.matrix() * t.matrix();
            firsts.push(qt[(0, 0)].powi(2));
            seconds.push(qt[(1, 1)].powi(2));
        }
        for xs in [firsts, seconds] {
            let (mean, se) = mean_and_se(&xs);
            assert!((mean - 0.25).abs() < 3.0 * se, "{mean} ± {se}");
        }
    }

    #[test]
    fn sphere_examples() {
        let mut rng = RandomSource::new(8).rng();
        assert_eq!(uniform_sphere(3, 0.0, &mut rng), MeanVector::zeros(3));
        let (m, r) = (4, 1.7);
        let mut ys = Vec::new();
        for _ in 0..100_000 {
            let y = uniform_sphere(m, r, &mut rng);
            assert!((y.norm() - r).abs() < 1e-12);
            ys.push(y.as_slice()[5].powi(2));
        }
        let (mean, se) = mean_and_se(&ys);
        assert!((mean - r * r / 8.0).abs() < 3.0 * se);
    }

    #[test]
    fn angle_examples() {
        let mut rng = RandomSource::new(1).rng();
        let xs: Vec<f64> = (0..20_000).flat_map(|_| uniform_angles(5, &mut rng)).collect();
        assert!(xs.iter().all(|x| (-PI..=PI).contains(x)));
        let (mean, se) = mean_and_se(&xs);
        assert!(mean.abs() < 3.0 * se);
        let cos: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let (mean, se) = mean_and_se(&cos);
        assert!(mean.abs() < 3.0 * se);
    }

    #[test]
    fn seed_determinism() {
        let a = RandomSource::new(99);
        let b = RandomSource::new(99);
        let ta = haar_orthogonal(3, &mut a.substream(7));
        let tb = haar_orthogonal(3, &mut b.substream(7));
        assert_eq!(ta, tb);
        let tc = haar_orthogonal(3, &mut a.substream(8));
        assert_ne!(ta, tc);
        assert_eq!(a.algorithm(), "chacha8");
    }
}
