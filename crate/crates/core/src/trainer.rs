//! Plain gradient descent on all circuit angles.

use serde::{Deserialize, Serialize};

use crate::cost::{
    compiling_cost, compiling_grad, measurement_cost, measurement_grad, quadratic_cost,
    quadratic_grad, QuadraticHamiltonian,
};
use crate::error::{invalid, Error, Result};
use crate::linear_optics::{GateKind, LayeredCircuit};
use crate::phase_space::MeanVector;
use crate::sampling::RandomSource;

/// Objective minimized by [`train`].
#[derive(Clone, Debug, PartialEq)]
pub enum TrainCost {
    /// Return the input state to itself.
    Compiling,
    /// Map the input state onto a coherent target.
    Target(MeanVector),
    /// Mean-field energy of a quadratic Hamiltonian.
    Quadratic(QuadraticHamiltonian),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm is at or below this value.
    pub tol: f64,
    /// How many times the step may be halved after a cost increase.
    pub max_backoffs: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            max_iters: 2000,
            tol: 1e-8,
            max_backoffs: 3,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", format!("must be finite and > 0, got {}", self.lr)));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol", format!("must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub theta_snapshot: Vec<f64>,
}

pub fn circuit_cost(circuit: &LayeredCircuit, cost: &TrainCost, u: &MeanVector) -> Result<f64> {
    let (om, op) = circuit.split_action();
    match cost {
        TrainCost::Compiling => compiling_cost(u, &om, &op),
        TrainCost::Target(n) => measurement_cost(u, n, &om, &op),
        TrainCost::Quadratic(h) => quadratic_cost(u, h, &om, &op),
    }
}

/// `∂C/∂θ_ℓ` for every layer, each from its own split `(O₋, O₊)`.
pub fn circuit_gradient(
    circuit: &LayeredCircuit,
    cost: &TrainCost,
    u: &MeanVector,
) -> Result<Vec<f64>> {
    circuit
        .all_split_actions()
        .iter()
        .zip(circuit.layers())
        .map(|((om, op), layer)| match cost {
            TrainCost::Compiling => compiling_grad(u, layer.generator.d(), om, op),
            TrainCost::Target(n) => measurement_grad(u, n, layer.generator.d(), om, op),
            TrainCost::Quadratic(h) => quadratic_grad(u, layer.generator.eps(), h, om, op),
        })
        .collect()
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_finite(iteration: usize, cost: f64, grad: &[f64]) -> Result<()> {
    if !cost.is_finite() {
        return Err(Error::NonFinite {
            iteration,
            what: "cost",
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            iteration,
            what: "gradient",
        });
    }
    Ok(())
}

/// Gradient descent from the circuit's current angles. Records every
/// iteration, starting with the initial point as iteration 0.
///
/// A step that raises the cost is retried from the same point with half the
/// learning rate, at most `max_backoffs` times over the whole run.
pub fn train(
    circuit: &LayeredCircuit,
    cost: &TrainCost,
    u: &MeanVector,
    config: &TrainConfig,
) -> Result<Vec<TrainRecord>> {
    config.validate()?;
    u.check_dim(2 * circuit.modes())?;
    let mut circuit = circuit.clone();
    let mut lr = config.lr;
    let mut backoffs = 0;
    let mut value = circuit_cost(&circuit, cost, u)?;
    let mut grad = circuit_gradient(&circuit, cost, u)?;
    check_finite(0, value, &grad)?;
    let mut records = vec![TrainRecord {
        iteration: 0,
        cost: value,
        grad_norm: norm(&grad),
        lr,
        theta_snapshot: circuit.theta().to_vec(),
    }];
    for iteration in 1..=config.max_iters {
        if norm(&grad) <= config.tol {
            break;
        }
        let start = circuit.theta().to_vec();
        let (next, next_value) = loop {
            let theta: Vec<f64> = start.iter().zip(&grad).map(|(t, g)| t - lr * g).collect();
            let mut trial = circuit.clone();
            trial.set_theta(&theta)?;
            let v = circuit_cost(&trial, cost, u)?;
            if v > value && backoffs < config.max_backoffs {
                backoffs += 1;
                lr *= 0.5;
                continue;
            }
            break (trial, v);
        };
        circuit = next;
        value = next_value;
        grad = circuit_gradient(&circuit, cost, u)?;
        check_finite(iteration, value, &grad)?;
        records.push(TrainRecord {
            iteration,
            cost: value,
            grad_norm: norm(&grad),
            lr,
            theta_snapshot: circuit.theta().to_vec(),
        });
    }
    Ok(records)
}

/// Gate sequence used for training circuits: single-mode phase shifters
/// interleaved with nearest-neighbour beamsplitters.
pub fn training_gates(m: usize) -> Vec<GateKind> {
    if m == 1 {
        return vec![GateKind::PhaseShifter(0)];
    }
    (0..m)
        .flat_map(|j| [GateKind::PhaseShifter(j), GateKind::Beamsplitter(j, (j + 1) % m)])
        .collect()
}

/// Random training circuit with Haar fixed layers and uniform angles.
pub fn random_training_circuit(m: usize, layers: usize, seed: u64) -> Result<LayeredCircuit> {
    LayeredCircuit::random(m, &training_gates(m), layers, &mut RandomSource::new(seed).rng())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{bk_matrix, quadratic_grad_kernel};
    use crate::linear_optics::{GeneratorPair, Layer, OrthogonalMatrix};
    use crate::phase_space::Intensity;

    fn input(m: usize, e: f64) -> MeanVector {
        MeanVector::with_intensity(m, Intensity::new(e).unwrap())
    }

    #[test]
    fn zero_cost_start_stops_immediately() {
        let m = 2;
        let layers = training_gates(m)
            .into_iter()
            .map(|kind| Layer {
                generator: GeneratorPair::new(kind, m).unwrap(),
                fixed: OrthogonalMatrix::identity(m),
            })
            .collect();
        let c = LayeredCircuit::new(m, layers, 1, vec![0.0; 4]).unwrap();
        let u = input(m, 0.8);
        let trace = train(&c, &TrainCost::Compiling, &u, &TrainConfig::default()).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].iteration, 0);
        assert_eq!(trace[0].cost, 0.0);
        assert_eq!(trace[0].grad_norm, 0.0);
    }

    #[test]
    fn cost_decreases_monotonically() {
        for seed in 0..10 {
            let c = random_training_circuit(2, 4, seed).unwrap();
            let u = input(2, 0.5);
            let config = TrainConfig {
                lr: 0.2,
                max_iters: 200,
                ..TrainConfig::default()
            };
            let trace = train(&c, &TrainCost::Compiling, &u, &config).unwrap();
            for w in trace.windows(2) {
                assert!(w[1].cost <= w[0].cost + 1e-15, "seed {seed}: {} -> {}", w[0].cost, w[1].cost);
            }
            assert!(trace.iter().all(|r| (0.0..=1.0).contains(&r.cost)));
        }
    }

    #[test]
    fn quadratic_training_decreases_energy() {
        let mut rng = RandomSource::new(70).rng();
        let h = QuadraticHamiltonian::random(2, &mut rng);
        let c = random_training_circuit(2, 4, 71).unwrap();
        let u = input(2, 1.0);
        let config = TrainConfig {
            lr: 0.05,
            max_iters: 300,
            ..TrainConfig::default()
        };
        let trace = train(&c, &TrainCost::Quadratic(h.clone()), &u, &config).unwrap();
        let first = trace.first().unwrap().cost;
        let last = trace.last().unwrap().cost;
        assert!(last < first);
        assert!(trace.iter().all(|r| r.cost >= 0.0));
        // the vacuum term is a floor
        assert!(last >= 0.5 * h.eta().trace() - 1e-12);
    }

    #[test]
    fn gradient_is_the_shared_kernel() {
        let c = random_training_circuit(3, 5, 9).unwrap();
        let u = input(3, 1.3);
        let n = crate::sampling::uniform_sphere(3, 1.0, &mut RandomSource::new(1).rng());
        let mut rng = RandomSource::new(2).rng();
        let h = QuadraticHamiltonian::random(3, &mut rng);
        let g_comp = circuit_gradient(&c, &TrainCost::Compiling, &u).unwrap();
        let g_meas = circuit_gradient(&c, &TrainCost::Target(n.clone()), &u).unwrap();
        let g_quad = circuit_gradient(&c, &TrainCost::Quadratic(h.clone()), &u).unwrap();
        for (k, (om, op)) in (1..).zip(c.all_split_actions()) {
            let layer = &c.layers()[k - 1];
            let d = layer.generator.d();
            // same splits and kernels as the Monte Carlo estimators
            assert_eq!(g_comp[k - 1], measurement_grad(&u, &u, d, &om, &op).unwrap());
            assert_eq!(g_meas[k - 1], measurement_grad(&u, &n, d, &om, &op).unwrap());
            let b = bk_matrix(layer.generator.eps(), &h.conjugated(&op)).unwrap();
            let kernel = quadratic_grad_kernel(&om.matrix().tr_mul(u.as_dvector()), &b);
            assert_eq!(g_quad[k - 1], kernel);
            // and each split agrees with the directly computed one
            let (om2, op2) = c.clone().with_split(k).unwrap().split_action();
            let direct = compiling_grad(&u, d, &om2, &op2).unwrap();
            assert!((g_comp[k - 1] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn small_instance_converges() {
        let c = random_training_circuit(2, 4, 0).unwrap();
        let trace = train(&c, &TrainCost::Compiling, &input(2, 0.5), &TrainConfig::default()).unwrap();
        assert!(trace.last().unwrap().cost < 1e-3);
    }

    #[test]
    fn rejects_bad_config() {
        let c = random_training_circuit(2, 2, 0).unwrap();
        let u = input(2, 0.5);
        for lr in [0.0, -1.0, f64::NAN] {
            let config = TrainConfig {
                lr,
                ..TrainConfig::default()
            };
            assert!(train(&c, &TrainCost::Compiling, &u, &config).is_err());
        }
        assert!(matches!(
            train(&c, &TrainCost::Compiling, &input(3, 0.5), &TrainConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_values_abort() {
        let c = random_training_circuit(1, 2, 0).unwrap();
        let u = MeanVector::new(vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            train(&c, &TrainCost::Compiling, &u, &TrainConfig::default()),
            Err(Error::NonFinite { iteration: 0, .. })
        ));
    }
}
