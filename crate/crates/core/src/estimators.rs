//! Monte Carlo estimates of gradient moments.
//!
//! Samples are drawn in fixed-size chunks. Chunk `i` owns substream `i` of
//! the seed, and chunk summaries are merged in index order, so results are
//! identical for any number of worker threads.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    bk_matrix, compiling_grad, measurement_grad, quadratic_grad_kernel, toy_grad_from_s,
    BkMatrix, QuadraticHamiltonian,
};
use crate::error::{invalid, Result};
use crate::linear_optics::OrthogonalMatrix;
use crate::phase_space::MeanVector;
use crate::sampling::{haar_orthogonal, uniform_angles, RandomSource};

/// Samples per chunk.
pub const CHUNK_SIZE: usize = 4096;

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

/// A gradient `∂_θ C` as a random variable.
#[derive(Clone, Debug)]
pub enum CostFamily {
    /// Local phase shifters on `|α⟩^{⊗m}` with `s = u₁² + u₂²`; derivative
    /// in the first angle over uniform angles.
    Toy { s: f64, m: usize },
    /// Compiling cost over independent Haar `O₋, O₊`.
    Compiling { u: MeanVector, d: DMatrix<f64> },
    /// Coherent-target measurement cost over independent Haar `O₋, O₊`.
    Measurement {
        u: MeanVector,
        target: MeanVector,
        d: DMatrix<f64>,
    },
    /// Quadratic mean-field cost with `O₊` held fixed, over Haar `O₋`.
    Quadratic {
        u: MeanVector,
        eps: DMatrix<f64>,
        hamiltonian: QuadraticHamiltonian,
        o_plus: OrthogonalMatrix,
    },
}

enum Prepared<'a> {
    Toy { s: f64, m: usize },
    Overlap {
        u: &'a MeanVector,
        target: &'a MeanVector,
        d: &'a DMatrix<f64>,
    },
    Quadratic { u: &'a MeanVector, b: BkMatrix },
}

impl CostFamily {
    /// Number of modes the family acts on.
    pub fn modes(&self) -> usize {
        match self {
            CostFamily::Toy { m, .. } => *m,
            CostFamily::Compiling { u, .. }
            | CostFamily::Measurement { u, .. }
            | CostFamily::Quadratic { u, .. } => u.modes(),
        }
    }

    fn prepare(&self) -> Result<Prepared<'_>> {
        Ok(match self {
            CostFamily::Toy { s, m } => {
                if !(*s >= 0.0 && s.is_finite()) || *m == 0 {
                    return Err(invalid("toy", format!("need s >= 0 and m >= 1, got s={s}, m={m}")));
                }
                Prepared::Toy { s: *s, m: *m }
            }
            CostFamily::Compiling { u, d } => {
                // validate shapes once
                let id = OrthogonalMatrix::identity(u.modes());
                compiling_grad(u, d, &id, &id)?;
                Prepared::Overlap { u, target: u, d }
            }
            CostFamily::Measurement { u, target, d } => {
                let id = OrthogonalMatrix::identity(u.modes());
                measurement_grad(u, target, d, &id, &id)?;
                Prepared::Overlap { u, target, d }
            }
            CostFamily::Quadratic {
                u,
                eps,
                hamiltonian,
                o_plus,
            } => {
                u.check_dim(o_plus.dim())?;
                let b = bk_matrix(eps, &hamiltonian.conjugated(o_plus))?;
                u.check_dim(b.matrix().nrows())?;
                Prepared::Quadratic { u, b }
            }
        })
    }
}

impl Prepared<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Prepared::Toy { s, m } => toy_grad_from_s(*s, &uniform_angles(*m, rng), 0),
            Prepared::Overlap { u, target, d } => {
                let m = u.modes();
                let om = haar_orthogonal(m, rng);
                let op = haar_orthogonal(m, rng);
                measurement_grad(u, target, d, &om, &op).expect("shapes validated")
            }
            Prepared::Quadratic { u, b } => {
                let om = haar_orthogonal(u.modes(), rng);
                quadratic_grad_kernel(&om.matrix().tr_mul(u.as_dvector()), b)
            }
        }
    }
}

/// Monte Carlo estimate of the first two moments of a gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub n_samples: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub std_error_mean: f64,
    pub std_error_second: f64,
    pub seed: u64,
}

/// Fraction of samples with `|∂C| ≥ ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n_samples: usize,
    pub epsilon: f64,
    pub frequency: f64,
    /// Binomial standard error `√(p(1−p)/n)`.
    pub std_error: f64,
    pub seed: u64,
}

/// One-pass mean and centered sum of squares.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Running) -> Running {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Running {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Summary {
    signed: Running,
    abs: Running,
    squared: Running,
    tail: u64,
}

impl Summary {
    fn merge(self, other: Summary) -> Summary {
        Summary {
            signed: self.signed.merge(other.signed),
            abs: self.abs.merge(other.abs),
            squared: self.squared.merge(other.squared),
            tail: self.tail + other.tail,
        }
    }
}

fn summarize(family: &CostFamily, n_samples: usize, source: &RandomSource, epsilon: f64) -> Result<Summary> {
    if n_samples < MIN_SAMPLES {
        return Err(invalid(
            "n_samples",
            format!("need at least {MIN_SAMPLES}, got {n_samples}"),
        ));
    }
    let prepared = family.prepare()?;
    let n_chunks = n_samples.div_ceil(CHUNK_SIZE);
    let chunks: Vec<Summary> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = source.substream(c as u64);
            let len = CHUNK_SIZE.min(n_samples - c * CHUNK_SIZE);
            let mut s = Summary::default();
            for _ in 0..len {
                let g = prepared.draw(&mut rng);
                s.signed.push(g);
                s.abs.push(g.abs());
                s.squared.push(g * g);
                if g.abs() >= epsilon {
                    s.tail += 1;
                }
            }
            s
        })
        .collect();
    Ok(chunks.into_iter().fold(Summary::default(), Summary::merge))
}

/// Mean and second moment of `∂C`.
pub fn estimate_grad_moments(
    family: &CostFamily,
    n_samples: usize,
    source: &RandomSource,
) -> Result<MomentEstimate> {
    let s = summarize(family, n_samples, source, f64::INFINITY)?;
    Ok(MomentEstimate {
        n_samples,
        mean: s.signed.mean,
        second_moment: s.squared.mean,
        std_error_mean: s.signed.std_error(),
        std_error_second: s.squared.std_error(),
        seed: source.seed,
    })
}

/// As [`estimate_grad_moments`] with `mean` and its error taken over `|∂C|`.
pub fn estimate_abs_grad(
    family: &CostFamily,
    n_samples: usize,
    source: &RandomSource,
) -> Result<MomentEstimate> {
    let s = summarize(family, n_samples, source, f64::INFINITY)?;
    Ok(MomentEstimate {
        n_samples,
        mean: s.abs.mean,
        second_moment: s.squared.mean,
        std_error_mean: s.abs.std_error(),
        std_error_second: s.squared.std_error(),
        seed: source.seed,
    })
}

pub fn tail_frequency(
    family: &CostFamily,
    epsilon: f64,
    n_samples: usize,
    source: &RandomSource,
) -> Result<TailEstimate> {
    if !(epsilon >= 0.0) {
        return Err(invalid("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    let s = summarize(family, n_samples, source, epsilon)?;
    let p = s.tail as f64 / n_samples as f64;
    Ok(TailEstimate {
        n_samples,
        epsilon,
        frequency: p,
        std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
        seed: source.seed,
    })
}
