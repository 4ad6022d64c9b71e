//! Cost functions and their analytic gradients.
//!
//! All circuit costs take the split actions `(O₋, O₊)` of a layered circuit,
//! with the gate under study as the first factor of `O₊`, so that
//! `∂_{θ_k}(O₋O₊) = O₋ D_k O₊`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linear_optics::{symplectic_form, OrthogonalMatrix};
use crate::phase_space::{Intensity, MeanVector};
use crate::special::{bessel_i, LogScaled};

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

// ---------------------------------------------------------------------------
// local phase-shifter toy model

/// `C(θ) = 1 − exp(−2m|α|²) ∏_j exp(2|α|² cos θ_j)` for the input `|α⟩^{⊗m}`
/// with `|α|² = (u₁² + u₂²)/2` and `m = theta.len()`.
pub fn toy_cost(u_single: [f64; 2], theta: &[f64]) -> f64 {
    let s = u_single[0].powi(2) + u_single[1].powi(2);
    1.0 - toy_fidelity(s, theta)
}

fn toy_fidelity(s: f64, theta: &[f64]) -> f64 {
    // exponent −s Σ_j (1 − cos θ_j), with s = 2|α|²
    let e: f64 = theta.iter().map(|t| 1.0 - t.cos()).sum();
    (-s * e).exp()
}

/// `∂C/∂θ_j = s·sin θ_j·(1 − C)` with `s = u₁² + u₂²`.
pub fn toy_grad(u_single: [f64; 2], theta: &[f64], j: usize) -> f64 {
    let s = u_single[0].powi(2) + u_single[1].powi(2);
    toy_grad_from_s(s, theta, j)
}

pub(crate) fn toy_grad_from_s(s: f64, theta: &[f64], j: usize) -> f64 {
    s * theta[j].sin() * toy_fidelity(s, theta)
}

/// Closed form `E|∂_{θ₁}C| = (2/π) e^{−ms} I₀(s)^{m−1} sinh(s)` over uniform
/// angles, with `s = u₁² + u₂²`.
pub fn toy_grad_abs_expectation(s: f64, m: usize) -> LogScaled {
    assert!(s >= 0.0 && m >= 1);
    if s == 0.0 {
        return LogScaled::ZERO;
    }
    // log sinh s = s + log(1 − e^{−2s}) − log 2
    let log_sinh = s + (-(-2.0 * s).exp()).ln_1p() - std::f64::consts::LN_2;
    LogScaled::from_log(
        (2.0 / PI).ln() - m as f64 * s + (m - 1) as f64 * bessel_i(0, s).ln() + log_sinh,
    )
}

// ---------------------------------------------------------------------------
// compiling and measurement costs

/// Compiling cost `1 − exp(−½‖u(I − O₋O₊)‖²)`.
pub fn compiling_cost(
    u: &MeanVector,
    o_minus: &OrthogonalMatrix,
    o_plus: &OrthogonalMatrix,
) -> Result<f64> {
    measurement_cost(u, u, o_minus, o_plus)
}

/// Analytic `∂_{θ_k}` of [`compiling_cost`]: with `y = O₋ᵀuᵀ`, `b = O₊uᵀ`,
/// `∂C = −e^{−2E} (yᵀ D_k b) e^{bᵀy}`.
pub fn compiling_grad(
    u: &MeanVector,
    d_k: &DMatrix<f64>,
    o_minus: &OrthogonalMatrix,
    o_plus: &OrthogonalMatrix,
) -> Result<f64> {
    measurement_grad(u, u, d_k, o_minus, o_plus)
}

/// Heterodyne-outcome cost `1 − |⟨u|U|n⟩|² = 1 − exp(−½‖uO₋O₊ − n‖²)`.
pub fn measurement_cost(
    u: &MeanVector,
    n: &MeanVector,
    o_minus: &OrthogonalMatrix,
    o_plus: &OrthogonalMatrix,
) -> Result<f64> {
    n.check_dim(u.dim())?;
    let out = u.transform(o_minus)?.transform(o_plus)?;
    Ok(1.0 - (-0.5 * (out.as_dvector() - n.as_dvector()).norm_squared()).exp())
}

/// Analytic `∂_{θ_k}` of [`measurement_cost`]:
/// `−e^{−(E₀+E₁)} (yᵀ D_k b) e^{yᵀb}` with `y = O₋ᵀuᵀ`, `b = O₊nᵀ`.
pub fn measurement_grad(
    u: &MeanVector,
    n: &MeanVector,
    d_k: &DMatrix<f64>,
    o_minus: &OrthogonalMatrix,
    o_plus: &OrthogonalMatrix,
) -> Result<f64> {
    let dim = u.dim();
    n.check_dim(dim)?;
    check_square(d_k, dim)?;
    check_square(o_minus.matrix(), dim)?;
    check_square(o_plus.matrix(), dim)?;
    let y = o_minus.matrix().tr_mul(u.as_dvector());
    let b = o_plus.matrix() * n.as_dvector();
    let half_norms = 0.5 * (u.as_dvector().norm_squared() + n.as_dvector().norm_squared());
    Ok(overlap_grad_kernel(&y, &b, d_k, half_norms))
}

/// Shared kernel `−e^{−h} (yᵀDb) e^{yᵀb}` where `h = E₀ + E₁`.
pub fn overlap_grad_kernel(y: &DVector<f64>, b: &DVector<f64>, d: &DMatrix<f64>, h: f64) -> f64 {
    let ydb = y.dot(&(d * b));
    -ydb * (y.dot(b) - h).exp()
}

/// Coherent target reached when photon counts `n_j` (summing to `N`) are the
/// most likely outcome: mode `j` carries intensity `E n_j / N` with zero phase.
pub fn photon_count_target(u: &MeanVector, counts: &[u64]) -> Result<MeanVector> {
    if counts.len() != u.modes() {
        return Err(Error::DimensionMismatch {
            expected: u.modes(),
            actual: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(invalid("counts", "photon counts must not all be zero"));
    }
    let e = u.intensity().value();
    let mut v = vec![0.0; u.dim()];
    for (j, &n) in counts.iter().enumerate() {
        v[2 * j] = (2.0 * e * n as f64 / total as f64).sqrt();
    }
    MeanVector::new(v)
}

/// Intensity after `layers` quantum-limited attenuators of amplitude
/// transmissivity `k`: `k^{2L} E₀`.
pub fn attenuated_intensity(e0: Intensity, k: f64, layers: u32) -> Result<Intensity> {
    if !(k > 0.0 && k < 1.0) {
        return Err(invalid("k", format!("attenuation must lie in (0, 1), got {k}")));
    }
    Intensity::new(k.powi(2 * layers as i32) * e0.value())
}

// ---------------------------------------------------------------------------
// quadratic Hamiltonians

/// `H = RηRᵀ` with `η` real symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct QuadraticHamiltonian {
    eta: DMatrix<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(eta: DMatrix<f64>) -> Result<Self> {
        let n = eta.nrows();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::OddLength(n));
        }
        check_square(&eta, n)?;
        let asym = symmetry_defect(&eta);
        if asym > 1e-12 * (1.0 + eta.norm()) {
            return Err(Error::NotSymmetric(asym));
        }
        let min_eig = eta.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { eta })
    }

    /// `GGᵀ/(2m)` for a Gaussian `G`.
    pub fn random<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let g = crate::sampling::gaussian_matrix(2 * m, rng);
        let eta = &g * g.transpose() / (2 * m) as f64;
        let eta = (&eta + eta.transpose()) * 0.5;
        Self { eta }
    }

    pub fn eta(&self) -> &DMatrix<f64> {
        &self.eta
    }

    /// `η̃ = O₊ η O₊ᵀ`.
    pub fn conjugated(&self, o_plus: &OrthogonalMatrix) -> DMatrix<f64> {
        o_plus.matrix() * &self.eta * o_plus.matrix().transpose()
    }
}

impl TryFrom<DMatrix<f64>> for QuadraticHamiltonian {
    type Error = Error;
    fn try_from(eta: DMatrix<f64>) -> Result<Self> {
        Self::new(eta)
    }
}

impl From<QuadraticHamiltonian> for DMatrix<f64> {
    fn from(h: QuadraticHamiltonian) -> Self {
        h.eta
    }
}

/// Mean-field energy `wηwᵀ + ½tr η` of the output state, `w = uO₋O₊`.
///
/// The `½tr η` term is the vacuum contribution of the coherent-state
/// covariance `½I`; it does not depend on `θ`.
pub fn quadratic_cost(
    u: &MeanVector,
    h: &QuadraticHamiltonian,
    o_minus: &OrthogonalMatrix,
    o_plus: &OrthogonalMatrix,
) -> Result<f64> {
    check_square(&h.eta, u.dim())?;
    let w = u.transform(o_minus)?.transform(o_plus)?;
    let w = w.as_dvector();
    Ok(w.dot(&(&h.eta * w)) + 0.5 * h.eta.trace())
}

/// `B_k = 2ε_kΔη̃ − 2η̃Δε_k`, symmetric and traceless.
#[derive(Clone, Debug, PartialEq)]
pub struct BkMatrix(DMatrix<f64>);

impl BkMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    #[cfg(test)]
    pub(crate) fn from_matrix_unchecked(b: DMatrix<f64>) -> Self {
        Self(b)
    }
}

pub fn bk_matrix(eps_k: &DMatrix<f64>, eta_tilde: &DMatrix<f64>) -> Result<BkMatrix> {
    let n = eps_k.nrows();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::OddLength(n));
    }
    check_square(eps_k, n)?;
    check_square(eta_tilde, n)?;
    for m in [eps_k, eta_tilde] {
        let asym = symmetry_defect(m);
        if asym > 1e-12 * (1.0 + m.norm()) {
            return Err(Error::NotSymmetric(asym));
        }
    }
    let delta = symplectic_form(n / 2);
    let comm = (eps_k * &delta - &delta * eps_k).norm();
    if comm > 1e-12 * (1.0 + eps_k.norm()) {
        return Err(Error::NotPassive(comm));
    }
    let b = (eps_k * &delta * eta_tilde - eta_tilde * &delta * eps_k) * 2.0;
    // symmetrize away rounding
    Ok(BkMatrix((&b + b.transpose()) * 0.5))
}

/// Analytic `∂_{θ_k}` of [`quadratic_cost`], `−(uO₋) B_k (uO₋)ᵀ`.
///
/// The sign follows from `D_k = −2ε_kΔ`; see the module docs of
/// [`crate::linear_optics`].
pub fn quadratic_grad(
    u: &MeanVector,
    eps_k: &DMatrix<f64>,
    h: &QuadraticHamiltonian,
    o_minus: &OrthogonalMatrix,
    o_plus: &OrthogonalMatrix,
) -> Result<f64> {
    check_square(&h.eta, u.dim())?;
    let b = bk_matrix(eps_k, &h.conjugated(o_plus))?;
    let x = o_minus.matrix().tr_mul(u.as_dvector());
    Ok(quadratic_grad_kernel(&x, &b))
}

/// `−xᵀBx` with `x = O₋ᵀuᵀ`.
pub fn quadratic_grad_kernel(x: &DVector<f64>, b: &BkMatrix) -> f64 {
    -x.dot(&(&b.0 * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_optics::{GateKind, GeneratorPair, Layer, LayeredCircuit};
    use crate::sampling::{haar_orthogonal, uniform_angles, RandomSource};

    #[test]
    fn toy_cost_examples() {
        assert_eq!(toy_cost([0.8, 0.3], &[0.0; 4]), 0.0);
        // |α|² = 1 ⇔ u₁² + u₂² = 2
        let c = toy_cost([2f64.sqrt(), 0.0], &[PI]);
        assert!((c - (1.0 - (-4f64).exp())).abs() < 1e-15);
        let a = toy_cost([0.5, 0.9], &[0.1, -2.0, 1.3]);
        let b = toy_cost([0.5, 0.9], &[1.3, 0.1, -2.0]);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn toy_grad_matches_finite_difference() {
        let mut rng = RandomSource::new(6).rng();
        let u = [0.7, -0.4];
        let h = 1e-5;
        for _ in 0..20 {
            let theta = uniform_angles(5, &mut rng);
            for j in 0..5 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += h;
                tm[j] -= h;
                let fd = (toy_cost(u, &tp) - toy_cost(u, &tm)) / (2.0 * h);
                let g = toy_grad(u, &theta, j);
                assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn toy_closed_form_examples() {
        assert!(toy_grad_abs_expectation(0.0, 3).is_zero());
        let v = toy_grad_abs_expectation(1.0, 1).value();
        assert!((v - 2.0 / PI * (-1f64).exp() * 1f64.sinh()).abs() < 1e-15);
        // large intensity and many modes stay finite in log scale
        assert!(toy_grad_abs_expectation(500.0, 10_000).ln().is_finite());
    }

    #[test]
    fn toy_angular_integral_by_quadrature() {
        // ∫_{−π}^{π} |sin θ| e^{x cos θ} dθ/2π = 2 sinh(x)/(πx)
        for x in [0.1, 0.5, 1.0, 3.0] {
            let n = 200_000;
            let h = 2.0 * PI / n as f64;
            let integral: f64 = (0..n)
                .map(|i| {
                    let t = -PI + (i as f64 + 0.5) * h;
                    t.sin().abs() * (x * t.cos()).exp()
                })
                .sum::<f64>()
                * h
                / (2.0 * PI);
            let closed = 2.0 * x.sinh() / (PI * x);
            assert!((integral - closed).abs() < 1e-8 * closed);
        }
    }

    #[test]
    fn compiling_examples() {
        let u = MeanVector::new(vec![0.3, 1.0, -0.2, 0.5]).unwrap();
        let id = OrthogonalMatrix::identity(2);
        assert_eq!(compiling_cost(&u, &id, &id).unwrap(), 0.0);

        let e = 0.8;
        let u1 = MeanVector::with_intensity(1, Intensity::new(e).unwrap());
        let flip = GeneratorPair::new(GateKind::PhaseShifter(0), 1)
            .unwrap()
            .gate_action(PI);
        let c = compiling_cost(&u1, &OrthogonalMatrix::identity(1), &flip).unwrap();
        assert!((c - (1.0 - (-4.0 * e).exp())).abs() < 1e-14);

        let mut rng = RandomSource::new(1).rng();
        let (om, op) = (haar_orthogonal(2, &mut rng), haar_orthogonal(2, &mut rng));
        let out = u.transform(&om).unwrap().transform(&op).unwrap();
        let f = crate::phase_space::overlap_fidelity(&u, &out).unwrap();
        assert!((compiling_cost(&u, &om, &op).unwrap() - (1.0 - f)).abs() < 1e-15);
        assert!(matches!(
            compiling_cost(&MeanVector::zeros(1), &om, &op),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compiling_grad_trivial_cases() {
        let mut rng = RandomSource::new(2).rng();
        let (om, op) = (haar_orthogonal(2, &mut rng), haar_orthogonal(2, &mut rng));
        let d = GeneratorPair::new(GateKind::Beamsplitter(0, 1), 2).unwrap();
        assert_eq!(compiling_grad(&MeanVector::zeros(2), d.d(), &om, &op).unwrap(), 0.0);
        let u = MeanVector::new(vec![1.0, 0.2, -0.3, 0.4]).unwrap();
        assert_eq!(compiling_grad(&u, &DMatrix::zeros(4, 4), &om, &op).unwrap(), 0.0);
    }

    fn circuit_cost_fd(
        circuit: &LayeredCircuit,
        k: usize,
        h: f64,
        cost: impl Fn(&OrthogonalMatrix, &OrthogonalMatrix) -> f64,
    ) -> f64 {
        let eval = |delta: f64| {
            let mut c = circuit.clone();
            let mut th = c.theta().to_vec();
            th[k - 1] += delta;
            c.set_theta(&th).unwrap();
            let (om, op) = c.with_split(k).unwrap().split_action();
            cost(&om, &op)
        };
        (eval(h) - eval(-h)) / (2.0 * h)
    }

    fn random_circuit(m: usize, seed: u64) -> LayeredCircuit {
        let mut rng = RandomSource::new(seed).rng();
        let kinds = if m == 1 {
            vec![GateKind::PhaseShifter(0), GateKind::GlobalPhase]
        } else {
            vec![
                GateKind::PhaseShifter(0),
                GateKind::Beamsplitter(0, m - 1),
                GateKind::TwoModePhase(m - 1, 0),
            ]
        };
        LayeredCircuit::random(m, &kinds, 4, &mut rng).unwrap()
    }

    #[test]
    fn compiling_and_measurement_grads_match_finite_differences() {
        for seed in 0..10 {
            let m = 2;
            let c = random_circuit(m, seed);
            let mut rng = RandomSource::new(100 + seed).rng();
            let u = crate::sampling::uniform_sphere(m, 1.2, &mut rng);
            let n = crate::sampling::uniform_sphere(m, 0.7, &mut rng);
            for k in 1..=c.depth() {
                let cc = c.clone().with_split(k).unwrap();
                let (om, op) = cc.split_action();
                let d = cc.layers()[k - 1].generator.d();
                let g = compiling_grad(&u, d, &om, &op).unwrap();
                let fd = circuit_cost_fd(&c, k, 1e-5, |a, b| compiling_cost(&u, a, b).unwrap());
                assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-4), "{g} vs {fd}");
                let g = measurement_grad(&u, &n, d, &om, &op).unwrap();
                let fd = circuit_cost_fd(&c, k, 1e-5, |a, b| {
                    measurement_cost(&u, &n, a, b).unwrap()
                });
                assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-4), "{g} vs {fd}");
            }
        }
    }

    #[test]
    fn photon_count_examples() {
        let u = MeanVector::new(vec![1.0, 2.0, 0.0, -1.0, 0.5, 0.5]).unwrap();
        let e = u.intensity().value();
        let v = photon_count_target(&u, &[4, 4, 4]).unwrap();
        for j in 0..3 {
            assert!((v.mode_intensity(j) - e / 3.0).abs() < 1e-14);
        }
        let v = photon_count_target(&u, &[7, 0, 0]).unwrap();
        assert!((v.as_slice()[0] - (2.0 * e).sqrt()).abs() < 1e-14);
        assert!(v.as_slice()[1..].iter().all(|&x| x == 0.0));
        let v = photon_count_target(&u, &[1, 5, 2]).unwrap();
        assert!((v.norm() - u.norm()).abs() < 1e-14);
        assert!(photon_count_target(&u, &[0, 0, 0]).is_err());
        assert!(photon_count_target(&u, &[1, 1]).is_err());
    }

    #[test]
    fn measurement_examples() {
        let mut rng = RandomSource::new(9).rng();
        let u = crate::sampling::uniform_sphere(3, 1.5, &mut rng);
        let (om, op) = (haar_orthogonal(3, &mut rng), haar_orthogonal(3, &mut rng));
        let target = u.transform(&om).unwrap().transform(&op).unwrap();
        assert!(measurement_cost(&u, &target, &om, &op).unwrap().abs() < 1e-14);
        let e0 = u.intensity().value();
        let zero = MeanVector::zeros(3);
        let c = measurement_cost(&u, &zero, &om, &op).unwrap();
        assert!((c - (1.0 - (-e0).exp())).abs() < 1e-14);
        assert_eq!(
            measurement_cost(&u, &u, &om, &op).unwrap(),
            compiling_cost(&u, &om, &op).unwrap()
        );
    }

    #[test]
    fn attenuation_examples() {
        let e0 = Intensity::new(1.0).unwrap();
        assert_eq!(attenuated_intensity(e0, 0.5, 0).unwrap(), e0);
        let e = attenuated_intensity(e0, 0.9, 10).unwrap().value();
        assert!((e - 0.121_576_654_590_569_2).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for l in 0..20 {
            let e = attenuated_intensity(e0, 0.8, l).unwrap().value();
            assert!(e < prev);
            prev = e;
        }
        assert!(attenuated_intensity(e0, 1.0, 1).is_err());
        assert!(attenuated_intensity(e0, 0.0, 1).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let id = OrthogonalMatrix::identity(3);
        let h = QuadraticHamiltonian::new(DMatrix::identity(6, 6)).unwrap();
        assert_eq!(quadratic_cost(&MeanVector::zeros(3), &h, &id, &id).unwrap(), 3.0);
        let zero = QuadraticHamiltonian::new(DMatrix::zeros(6, 6)).unwrap();
        let u = MeanVector::product(3, 0.4, 1.0);
        assert_eq!(quadratic_cost(&u, &zero, &id, &id).unwrap(), 0.0);
        let mut bad = DMatrix::identity(4, 4);
        bad[(0, 1)] = 0.5;
        assert!(matches!(QuadraticHamiltonian::new(bad), Err(Error::NotSymmetric(_))));
        assert!(matches!(
            QuadraticHamiltonian::new(-DMatrix::<f64>::identity(2, 2)),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn quadratic_grad_matches_finite_difference_and_ignores_constant() {
        for seed in 0..10 {
            let m = 2;
            let c = random_circuit(m, 40 + seed);
            let mut rng = RandomSource::new(seed).rng();
            let h = QuadraticHamiltonian::random(m, &mut rng);
            let u = crate::sampling::uniform_sphere(m, 1.1, &mut rng);
            for k in 1..=c.depth() {
                let cc = c.clone().with_split(k).unwrap();
                let (om, op) = cc.split_action();
                let eps = cc.layers()[k - 1].generator.eps();
                let g = quadratic_grad(&u, eps, &h, &om, &op).unwrap();
                let fd = circuit_cost_fd(&c, k, 1e-5, |a, b| quadratic_cost(&u, &h, a, b).unwrap());
                assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-3), "{g} vs {fd}");
                // the vacuum term does not move with θ
                let fd_shifted = circuit_cost_fd(&c, k, 1e-5, |a, b| {
                    quadratic_cost(&u, &h, a, b).unwrap() - 0.5 * h.eta().trace()
                });
                assert!((fd - fd_shifted).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bk_examples() {
        let m = 2;
        let eps = GeneratorPair::new(GateKind::TwoModePhase(0, 1), m).unwrap();
        let b = bk_matrix(eps.eps(), eps.eps()).unwrap();
        assert!(b.trace().abs() < 1e-12);
        let z = bk_matrix(&DMatrix::zeros(4, 4), &DMatrix::identity(4, 4)).unwrap();
        assert_eq!(z.frobenius_sq(), 0.0);
        let mut rng = RandomSource::new(3).rng();
        let h = QuadraticHamiltonian::random(m, &mut rng);
        let b = bk_matrix(eps.eps(), h.eta()).unwrap();
        assert!((b.matrix() - b.matrix().transpose()).amax() < 1e-12);
        assert!(b.trace().abs() < 1e-10);
        let mut not_passive = DMatrix::zeros(4, 4);
        not_passive[(0, 0)] = 1.0;
        assert!(matches!(bk_matrix(&not_passive, h.eta()), Err(Error::NotPassive(_))));
    }

    #[test]
    fn gradient_identity_for_single_layer() {
        // a one-layer circuit has O₋ = I
        let g = GeneratorPair::new(GateKind::PhaseShifter(0), 1).unwrap();
        let c = LayeredCircuit::new(
            1,
            vec![Layer {
                generator: g.clone(),
                fixed: OrthogonalMatrix::identity(1),
            }],
            1,
            vec![0.3],
        )
        .unwrap();
        let u = MeanVector::new(vec![1.0, 0.0]).unwrap();
        let (om, op) = c.split_action();
        let grad = compiling_grad(&u, g.d(), &om, &op).unwrap();
        // C(θ) = 1 − exp(−(1 − cos θ)) for ‖u‖² = 1
        let want = 0.3f64.sin() * (-(1.0 - 0.3f64.cos())).exp();
        assert!((grad - want).abs() < 1e-14);
    }
}
