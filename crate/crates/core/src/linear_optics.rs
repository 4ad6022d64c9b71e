//! Generators, gate exponentials and layered circuits `U(θ) = U₊U₋`.
//!
//! A gate `U(θ) = exp(−iθ RεRᵀ)` with symmetric `ε` moves mean vectors by
//! `u ↦ u·exp(θD)` where `D = −2εΔ`. With `ε = ½I₂` this is the phase
//! shifter `exp(−iθa*a)`, which sends `α ↦ e^{−iθ}α`. When `ε` commutes
//! with `Δ` the gate conserves energy and `D` is skew-symmetric.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{gaussian_matrix, haar_orthogonal, uniform_angles};

/// Orthogonality tolerance on `‖TᵀT − I‖_F`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Standard symplectic form `Δ = (iσ_y)^{⊕m}`, blocks `[[0, 1], [−1, 0]]`.
pub fn symplectic_form(m: usize) -> DMatrix<f64> {
    assert!(m >= 1);
    let mut delta = DMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        delta[(2 * j, 2 * j + 1)] = 1.0;
        delta[(2 * j + 1, 2 * j)] = -1.0;
    }
    delta
}

/// A real `2m × 2m` orthogonal matrix: the phase-space action of a
/// linear-optical unitary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct OrthogonalMatrix(DMatrix<f64>);

impl OrthogonalMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || n != m.ncols() || !n.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: n.max(2) + n % 2,
                actual: m.ncols(),
            });
        }
        let defect = orthogonality_defect(&m);
        if !(defect <= ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal(defect));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(orthogonality_defect(&m) <= 1e-8);
        Self(m)
    }

    pub fn identity(m: usize) -> Self {
        Self(DMatrix::identity(2 * m, 2 * m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn modes(&self) -> usize {
        self.dim() / 2
    }

    /// `self · rhs`: apply `self` first, then `rhs`.
    pub fn then(&self, rhs: &OrthogonalMatrix) -> OrthogonalMatrix {
        Self(&self.0 * &rhs.0)
    }

    pub fn transpose(&self) -> OrthogonalMatrix {
        Self(self.0.transpose())
    }

    pub fn defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }
}

impl TryFrom<DMatrix<f64>> for OrthogonalMatrix {
    type Error = Error;
    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

impl From<OrthogonalMatrix> for DMatrix<f64> {
    fn from(m: OrthogonalMatrix) -> Self {
        m.0
    }
}

pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (m.tr_mul(m) - DMatrix::<f64>::identity(n, n)).norm()
}

/// Kind of parameterized gate, with the modes it touches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "modes")]
pub enum GateKind {
    /// `exp(−iθ a*_j a_j)`
    PhaseShifter(usize),
    /// `exp(−i(θ/2)(q_i² + p_i² − q_j² − p_j²))`
    TwoModePhase(usize, usize),
    /// `exp(−iθ(a*_i a_j + a*_j a_i))`, the two-mode phase conjugated by a
    /// balanced beamsplitter.
    Beamsplitter(usize, usize),
    /// `exp(−iθ Σ_j a*_j a_j)`. Every column of `D` has unit norm.
    GlobalPhase,
    /// Generator given directly by its symmetric matrix.
    Custom,
}

impl GateKind {
    pub fn modes(&self) -> Vec<usize> {
        match *self {
            GateKind::PhaseShifter(j) => vec![j],
            GateKind::TwoModePhase(i, j) | GateKind::Beamsplitter(i, j) => vec![i, j],
            GateKind::GlobalPhase | GateKind::Custom => vec![],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::PhaseShifter(_) => "phase_shifter",
            GateKind::TwoModePhase(..) => "two_mode_phase",
            GateKind::Beamsplitter(..) => "beamsplitter",
            GateKind::GlobalPhase => "global_phase",
            GateKind::Custom => "custom",
        }
    }
}

/// The pair `(D, ε)` defining one parameterized gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorPair {
    d: DMatrix<f64>,
    eps: DMatrix<f64>,
    kind: GateKind,
}

impl GeneratorPair {
    /// Build a named energy-conserving gate on `m` modes.
    pub fn new(kind: GateKind, m: usize) -> Result<Self> {
        let bad = || Error::InvalidModes {
            modes: kind.modes(),
            m,
        };
        if m == 0 {
            return Err(bad());
        }
        let mut eps = DMatrix::zeros(2 * m, 2 * m);
        match kind {
            GateKind::PhaseShifter(j) => {
                if j >= m {
                    return Err(bad());
                }
                eps[(2 * j, 2 * j)] = 0.5;
                eps[(2 * j + 1, 2 * j + 1)] = 0.5;
            }
            GateKind::TwoModePhase(i, j) => {
                if i >= m || j >= m || i == j {
                    return Err(bad());
                }
                for (mode, sign) in [(i, 0.5), (j, -0.5)] {
                    eps[(2 * mode, 2 * mode)] = sign;
                    eps[(2 * mode + 1, 2 * mode + 1)] = sign;
                }
            }
            GateKind::Beamsplitter(i, j) => {
                if i >= m || j >= m || i == j {
                    return Err(bad());
                }
                // a*_i a_j + a*_j a_i = q_i q_j + p_i p_j
                for r in 0..2 {
                    eps[(2 * i + r, 2 * j + r)] = 0.5;
                    eps[(2 * j + r, 2 * i + r)] = 0.5;
                }
            }
            GateKind::GlobalPhase => eps.fill_with_identity(),
            GateKind::Custom => {
                return Err(crate::error::invalid(
                    "kind",
                    "custom generators are built with GeneratorPair::from_symmetric",
                ))
            }
        }
        if matches!(kind, GateKind::GlobalPhase) {
            eps *= 0.5;
        }
        Ok(Self::from_parts(eps, kind))
    }

    /// Build from a symmetric `ε` that commutes with `Δ`.
    pub fn from_symmetric(eps: DMatrix<f64>) -> Result<Self> {
        let n = eps.nrows();
        if n == 0 || !n.is_multiple_of(2) || eps.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n + n % 2,
                actual: eps.ncols(),
            });
        }
        let asym = (&eps - eps.transpose()).norm();
        if asym > 1e-12 * (1.0 + eps.norm()) {
            return Err(Error::NotSymmetric(asym));
        }
        let delta = symplectic_form(n / 2);
        let comm = (&eps * &delta - &delta * &eps).norm();
        if comm > 1e-12 * (1.0 + eps.norm()) {
            return Err(Error::NotPassive(comm));
        }
        Ok(Self::from_parts(eps, GateKind::Custom))
    }

    /// Random passive generator `R(h)` for a Hermitian `h` with i.i.d.
    /// Gaussian entries; its `D` has unequal column norms.
    pub fn random_passive<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let a = gaussian_matrix(m, rng);
        let b = gaussian_matrix(m, rng);
        let re = (&a + a.transpose()) * 0.5;
        let im = (&b - b.transpose()) * 0.5;
        // n = Σ h_ij a*_i a_j  ↦  ε with 2×2 blocks ½[[Re, −Im], [Im, Re]]
        let mut eps = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                eps[(2 * i, 2 * j)] = 0.5 * re[(i, j)];
                eps[(2 * i + 1, 2 * j + 1)] = 0.5 * re[(i, j)];
                eps[(2 * i, 2 * j + 1)] = -0.5 * im[(i, j)];
                eps[(2 * i + 1, 2 * j)] = 0.5 * im[(i, j)];
            }
        }
        Self::from_parts(eps, GateKind::Custom)
    }

    fn from_parts(eps: DMatrix<f64>, kind: GateKind) -> Self {
        let delta = symplectic_form(eps.nrows() / 2);
        let d = &eps * &delta * -2.0;
        Self { d, eps, kind }
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn eps(&self) -> &DMatrix<f64> {
        &self.eps
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn modes(&self) -> usize {
        self.d.nrows() / 2
    }

    /// `exp(θD)`.
    pub fn gate_action(&self, theta: f64) -> OrthogonalMatrix {
        if theta == 0.0 {
            return OrthogonalMatrix::identity(self.modes());
        }
        OrthogonalMatrix::new_unchecked((&self.d * theta).exp())
    }
}

/// One circuit layer: parameterized gate followed by a fixed element `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub generator: GeneratorPair,
    pub fixed: OrthogonalMatrix,
}

impl Layer {
    pub fn action(&self, theta: f64) -> OrthogonalMatrix {
        self.generator.gate_action(theta).then(&self.fixed)
    }
}

/// `U(θ) = U₊U₋` with `U₋` holding layers `1..k−1` and `U₊` layers `k..L`.
///
/// The phase-space action is the ordered product `∏_ℓ exp(θ_ℓ D_ℓ) W_ℓ`
/// acting from the right, so `T = O₋O₊` and `∂T/∂θ_k = O₋ D_k O₊`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitDoc", into = "CircuitDoc")]
pub struct LayeredCircuit {
    m: usize,
    layers: Vec<Layer>,
    split: usize,
    theta: Vec<f64>,
}

impl LayeredCircuit {
    /// `split` is the 1-based index `k` of the layer under study.
    pub fn new(m: usize, layers: Vec<Layer>, split: usize, theta: Vec<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(crate::error::invalid("layers", "circuit needs at least one layer"));
        }
        if theta.len() != layers.len() {
            return Err(Error::DimensionMismatch {
                expected: layers.len(),
                actual: theta.len(),
            });
        }
        if split < 1 || split > layers.len() {
            return Err(crate::error::invalid(
                "k",
                format!("split index {split} outside 1..={}", layers.len()),
            ));
        }
        for layer in &layers {
            for dim in [layer.generator.d.nrows(), layer.fixed.dim()] {
                if dim != 2 * m {
                    return Err(Error::DimensionMismatch {
                        expected: 2 * m,
                        actual: dim,
                    });
                }
            }
        }
        Ok(Self {
            m,
            layers,
            split,
            theta,
        })
    }

    /// Gates cycle through `kinds`; each `W_ℓ` is a frozen Haar draw and
    /// `θ` is uniform on `[−π, π]`.
    pub fn random<R: Rng + ?Sized>(
        m: usize,
        kinds: &[GateKind],
        n_layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let generator = GeneratorPair::new(kinds[l % kinds.len()].clone(), m)?;
            layers.push(Layer {
                generator,
                fixed: haar_orthogonal(m, rng),
            });
        }
        let theta = (0..n_layers)
            .map(|_| uniform_angles(1, rng)[0])
            .collect();
        Self::new(m, layers, 1, theta)
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                actual: theta.len(),
            });
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn with_split(mut self, split: usize) -> Result<Self> {
        if split < 1 || split > self.layers.len() {
            return Err(crate::error::invalid("k", format!("split index {split} out of range")));
        }
        self.split = split;
        Ok(self)
    }

    fn layer_actions(&self) -> Vec<OrthogonalMatrix> {
        self.layers
            .iter()
            .zip(&self.theta)
            .map(|(layer, &t)| layer.action(t))
            .collect()
    }

    /// Full action `T(θ)`.
    pub fn action(&self) -> OrthogonalMatrix {
        let (minus, plus) = self.split_action();
        minus.then(&plus)
    }

    /// `(O₋, O₊)` for the configured split.
    pub fn split_action(&self) -> (OrthogonalMatrix, OrthogonalMatrix) {
        let actions = self.layer_actions();
        let k = self.split - 1;
        (product(&actions[..k], self.m), product(&actions[k..], self.m))
    }

    /// `(O₋, O₊)` for every split `k = 1..L`, computed from prefix and suffix
    /// products in `O(L)` matrix multiplications.
    pub fn all_split_actions(&self) -> Vec<(OrthogonalMatrix, OrthogonalMatrix)> {
        let actions = self.layer_actions();
        let n = actions.len();
        let mut prefix = Vec::with_capacity(n);
        let mut acc = OrthogonalMatrix::identity(self.m);
        for a in &actions {
            prefix.push(acc.clone());
            acc = acc.then(a);
        }
        let mut suffix = vec![OrthogonalMatrix::identity(self.m); n];
        let mut acc = OrthogonalMatrix::identity(self.m);
        for l in (0..n).rev() {
            acc = actions[l].then(&acc);
            suffix[l] = acc.clone();
        }
        prefix.into_iter().zip(suffix).collect()
    }
}

fn product(actions: &[OrthogonalMatrix], m: usize) -> OrthogonalMatrix {
    actions
        .iter()
        .fold(OrthogonalMatrix::identity(m), |acc, a| acc.then(a))
}

/// JSON document form of a circuit: `{m, L, k, layers, theta}` with each
/// fixed element stored row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircuitDoc {
    pub m: usize,
    #[serde(rename = "L")]
    pub depth: usize,
    pub k: usize,
    pub layers: Vec<LayerDoc>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerDoc {
    #[serde(flatten)]
    pub kind: GateKind,
    /// Symmetric generator, row-major; only for `custom` gates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(n: usize, data: &[f64]) -> Result<DMatrix<f64>> {
    if data.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            actual: data.len(),
        });
    }
    Ok(DMatrix::from_row_slice(n, n, data))
}

impl TryFrom<CircuitDoc> for LayeredCircuit {
    type Error = Error;
    fn try_from(doc: CircuitDoc) -> Result<Self> {
        if doc.layers.len() != doc.depth {
            return Err(Error::DimensionMismatch {
                expected: doc.depth,
                actual: doc.layers.len(),
            });
        }
        let n = 2 * doc.m;
        let layers = doc
            .layers
            .iter()
            .map(|l| {
                let generator = match (&l.kind, &l.eps) {
                    (GateKind::Custom, Some(eps)) => {
                        GeneratorPair::from_symmetric(from_row_major(n, eps)?)?
                    }
                    (GateKind::Custom, None) => {
                        return Err(crate::error::invalid("eps", "custom layer needs eps"))
                    }
                    (kind, _) => GeneratorPair::new(kind.clone(), doc.m)?,
                };
                let fixed = OrthogonalMatrix::new(from_row_major(n, &l.w)?)?;
                Ok(Layer { generator, fixed })
            })
            .collect::<Result<Vec<_>>>()?;
        LayeredCircuit::new(doc.m, layers, doc.k, doc.theta)
    }
}

impl From<LayeredCircuit> for CircuitDoc {
    fn from(c: LayeredCircuit) -> Self {
        let layers = c
            .layers
            .iter()
            .map(|l| LayerDoc {
                kind: l.generator.kind.clone(),
                eps: matches!(l.generator.kind, GateKind::Custom)
                    .then(|| row_major(&l.generator.eps)),
                w: row_major(l.fixed.matrix()),
            })
            .collect();
        CircuitDoc {
            m: c.m,
            depth: c.layers.len(),
            k: c.split,
            layers,
            theta: c.theta,
        }
    }
}
