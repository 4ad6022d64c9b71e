//! Coherent states as phase-space mean vectors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linear_optics::OrthogonalMatrix;

/// Total mean photon number `E = ‖u‖²/2`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Intensity(f64);

impl Intensity {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid("intensity", format!("must be finite and >= 0, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mean vector of an `m`-mode coherent state, ordered `(q₁, p₁, …, q_m, p_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MeanVector {
    values: DVector<f64>,
}

impl MeanVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::OddLength(values.len()));
        }
        Ok(Self {
            values: DVector::from_vec(values),
        })
    }

    pub fn zeros(m: usize) -> Self {
        assert!(m >= 1);
        Self {
            values: DVector::zeros(2 * m),
        }
    }

    pub(crate) fn from_dvector(values: DVector<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.len().is_multiple_of(2));
        Self { values }
    }

    /// `(u₁, u₂)` repeated on every mode, i.e. `|α⟩^{⊗m}`.
    pub fn product(m: usize, u1: f64, u2: f64) -> Self {
        assert!(m >= 1);
        Self::from_dvector(DVector::from_fn(2 * m, |i, _| if i % 2 == 0 { u1 } else { u2 }))
    }

    /// A state of intensity `e` with all amplitude in the `q` quadrature of mode 0.
    pub fn with_intensity(m: usize, e: Intensity) -> Self {
        let mut v = Self::zeros(m);
        v.values[0] = (2.0 * e.value()).sqrt();
        v
    }

    pub fn modes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn intensity(&self) -> Intensity {
        Intensity(0.5 * self.values.norm_squared())
    }

    /// Mode intensity `(q_j² + p_j²)/2`.
    pub fn mode_intensity(&self, j: usize) -> f64 {
        0.5 * (self.values[2 * j].powi(2) + self.values[2 * j + 1].powi(2))
    }

    /// Image `uT` of the state under a linear-optical action `T`.
    pub fn transform(&self, t: &OrthogonalMatrix) -> Result<Self> {
        self.check_dim(t.dim())?;
        Ok(Self::from_dvector(t.matrix().tr_mul(&self.values)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_dvector(&self.values * factor)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for MeanVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MeanVector> for Vec<f64> {
    fn from(v: MeanVector) -> Self {
        v.values.as_slice().to_vec()
    }
}

/// `|⟨u|v⟩|² = exp(−½‖u − v‖²)`.
pub fn overlap_fidelity(u: &MeanVector, v: &MeanVector) -> Result<f64> {
    v.check_dim(u.dim())?;
    Ok((-0.5 * (&u.values - &v.values).norm_squared()).exp())
}
