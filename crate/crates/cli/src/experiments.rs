//! One function per command, each producing a long-format table.

use optical_bpl::closed_forms::{
    classify_log_moments, compiling_curve, compiling_second_moment, fit_exponential_rate,
    heterodyne_prefactor, heterodyne_second_moment, noise_curve, prop1_interval, prop2_value,
    xi_bounds, IntensityLaw, MomentModel, NoiseDepth,
};
use optical_bpl::cost::{attenuated_intensity, bk_matrix, toy_grad_abs_expectation, QuadraticHamiltonian};
use optical_bpl::estimators::{estimate_abs_grad, estimate_grad_moments, CostFamily};
use optical_bpl::sampling::haar_orthogonal;
use optical_bpl::trainer::{random_training_circuit, train, TrainConfig, TrainCost};
use optical_bpl::{GeneratorPair, Intensity, MeanVector, OrthogonalMatrix, RandomSource};

use crate::config::{CommandKind, ExperimentConfig};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(&'static str),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&'static str> for Cell {
    fn from(v: &'static str) -> Self {
        Cell::Text(v)
    }
}

/// Rows plus summary lines such as regime verdicts.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    fn new(columns: &'static [&'static str]) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn check_finite(&self) -> Result<(), CliError> {
        for row in &self.rows {
            for (col, cell) in self.columns.iter().zip(row) {
                if let Cell::Num(v) = cell {
                    if !v.is_finite() {
                        return Err(CliError::Numerical(format!(
                            "non-finite {col} = {v} in row {}",
                            render_row_hint(self.columns, row)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn render_row_hint(columns: &[&str], row: &[Cell]) -> String {
    columns
        .iter()
        .zip(row)
        .take(3)
        .map(|(c, v)| match v {
            Cell::Int(i) => format!("{c}={i}"),
            Cell::Num(x) => format!("{c}={x}"),
            Cell::Text(t) => format!("{c}={t}"),
            Cell::Empty => format!("{c}="),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn intensity(name: &str, e: f64) -> Result<Intensity, CliError> {
    Intensity::new(e).map_err(|err| CliError::config(name, err.to_string()))
}

/// Monte Carlo source for the `idx`-th cell of a sweep.
fn cell_source(config: &ExperimentConfig, idx: usize) -> RandomSource {
    RandomSource::new(config.seed.wrapping_add(idx as u64))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Table, CliError> {
    config.validate()?;
    let table = match config.command {
        CommandKind::Toy => toy(config)?,
        CommandKind::Prop1 => prop1(config)?,
        CommandKind::Prop2 => prop2(config)?,
        CommandKind::Heterodyne => heterodyne(config)?,
        CommandKind::Noise => noise(config)?,
        CommandKind::Regimes => regimes(config)?,
        CommandKind::Train => training(config)?,
    };
    table.check_finite()?;
    Ok(table)
}

fn toy(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["m", "s", "source", "abs_grad_mean", "stderr"]);
    let mut idx = 0;
    for m in config.modes()? {
        for &s in &config.s {
            let closed = toy_grad_abs_expectation(s, m).value();
            t.push(vec![m.into(), s.into(), "closed_form".into(), closed.into(), Cell::Empty]);
            let est = estimate_abs_grad(&CostFamily::Toy { s, m }, config.samples, &cell_source(config, idx))?;
            t.push(vec![
                m.into(),
                s.into(),
                "monte_carlo".into(),
                est.mean.into(),
                est.std_error_mean.into(),
            ]);
            idx += 1;
        }
    }
    Ok(t)
}

fn prop1(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "m",
        "E",
        "xi_min",
        "xi_max",
        "pred_lo",
        "pred_hi",
        "mc_second_moment",
        "mc_stderr",
        "exact_pred",
    ]);
    let mut current = None;
    for (idx, (m, e)) in config.intensity_pairs()?.into_iter().enumerate() {
        let d = gate_for(config, m, &mut current)?.d().clone();
        let e_val = intensity("intensity", e)?;
        let (xi_min, xi_max) = xi_bounds(&d)?;
        let interval = prop1_interval(m, e_val, &d)?;
        let exact = compiling_second_moment(m, e_val, &d)?;
        let family = CostFamily::Compiling {
            u: MeanVector::with_intensity(m, e_val),
            d,
        };
        let est = estimate_grad_moments(&family, config.samples, &cell_source(config, idx))?;
        t.push(vec![
            m.into(),
            e.into(),
            xi_min.into(),
            xi_max.into(),
            interval.lo.value().into(),
            interval.hi.value().into(),
            est.second_moment.into(),
            est.std_error_second.into(),
            exact.value().into(),
        ]);
    }
    Ok(t)
}

fn prop2(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "m",
        "E",
        "trace_b",
        "pred",
        "pred_frobenius_form",
        "mc_second_moment",
        "mc_stderr",
    ]);
    let mut rng = RandomSource::new(config.seed).rng();
    let mut current = None;
    let mut hamiltonians: Option<(usize, QuadraticHamiltonian, OrthogonalMatrix)> = None;
    for (idx, (m, e)) in config.intensity_pairs()?.into_iter().enumerate() {
        let generator = gate_for(config, m, &mut current)?;
        if hamiltonians.as_ref().map(|h| h.0) != Some(m) {
            let h = QuadraticHamiltonian::random(m, &mut rng);
            let op = haar_orthogonal(m, &mut rng);
            hamiltonians = Some((m, h, op));
        }
        let (_, h, op) = hamiltonians.as_ref().expect("set above");
        let u = MeanVector::with_intensity(m, intensity("intensity", e)?);
        let b = bk_matrix(generator.eps(), &h.conjugated(op))?;
        let pred = prop2_value(&u, &b)?;
        let family = CostFamily::Quadratic {
            u,
            eps: generator.eps().clone(),
            hamiltonian: h.clone(),
            o_plus: op.clone(),
        };
        let est = estimate_grad_moments(&family, config.samples, &cell_source(config, idx))?;
        t.push(vec![
            m.into(),
            e.into(),
            b.trace().into(),
            pred.trace_form.into(),
            pred.frobenius_form.into(),
            est.second_moment.into(),
            est.std_error_second.into(),
        ]);
    }
    Ok(t)
}

fn heterodyne(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&[
        "m",
        "E0",
        "E1",
        "prefactor",
        "pred_lo",
        "pred_hi",
        "exact_pred",
        "mc_second_moment",
        "mc_stderr",
    ]);
    let mut current = None;
    let mut idx = 0;
    for (m, e0) in config.intensity_pairs()? {
        let d = gate_for(config, m, &mut current)?.d().clone();
        let (xi_min, xi_max) = xi_bounds(&d)?;
        for &e1 in &config.target_intensity {
            let (i0, i1) = (intensity("intensity", e0)?, intensity("target_intensity", e1)?);
            let prefactor = heterodyne_prefactor(m, i0, i1);
            let exact = heterodyne_second_moment(m, i0, i1, &d)?;
            let family = CostFamily::Measurement {
                u: MeanVector::with_intensity(m, i0),
                target: MeanVector::with_intensity(m, i1),
                d: d.clone(),
            };
            let est = estimate_grad_moments(&family, config.samples, &cell_source(config, idx))?;
            t.push(vec![
                m.into(),
                e0.into(),
                e1.into(),
                prefactor.value().into(),
                prefactor.scale(xi_min).value().into(),
                prefactor.scale(xi_max).value().into(),
                exact.value().into(),
                est.second_moment.into(),
                est.std_error_second.into(),
            ]);
            idx += 1;
        }
    }
    Ok(t)
}

fn verdict(model: MomentModel, grid: &[usize], curve: &[f64]) -> Result<String, CliError> {
    let fit = classify_log_moments(grid, curve)?;
    let rate = fit_exponential_rate(grid, curve)?;
    let model = match model {
        MomentModel::Interval => "interval",
        MomentModel::Exact => "exact",
    };
    Ok(format!(
        "verdict: model={model} regime={} linear_rate={} exponential_rate={}",
        fit.regime,
        crate::output::number(fit.linear_rate)?,
        crate::output::number(rate)?
    ))
}

fn noise(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["m", "E0", "layers", "E1", "log_prefactor", "log_exact"]);
    let grid = config.modes()?;
    let law: &IntensityLaw = config.law.as_ref().expect("validated");
    let k = config.k.expect("validated");
    let depth: NoiseDepth = config.noise_layers.expect("validated");
    let interval = noise_curve(law, k, depth, &grid, MomentModel::Interval)?;
    let exact = noise_curve(law, k, depth, &grid, MomentModel::Exact)?;
    for (i, &m) in grid.iter().enumerate() {
        let e0 = law.intensity(m)?;
        let layers = depth.layers(m);
        let e1 = attenuated_intensity(e0, k, layers)?;
        t.push(vec![
            m.into(),
            e0.value().into(),
            layers.into(),
            e1.value().into(),
            interval[i].into(),
            exact[i].into(),
        ]);
    }
    t.notes.push(verdict(MomentModel::Interval, &grid, &interval)?);
    t.notes.push(verdict(MomentModel::Exact, &grid, &exact)?);
    Ok(t)
}

fn regimes(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["m", "E", "log_moment", "log_moment_exact"]);
    let grid = config.modes()?;
    let law = config.law.as_ref().expect("validated");
    let interval = compiling_curve(law, &grid, MomentModel::Interval)?;
    let exact = compiling_curve(law, &grid, MomentModel::Exact)?;
    for (i, &m) in grid.iter().enumerate() {
        t.push(vec![
            m.into(),
            law.intensity(m)?.value().into(),
            interval[i].into(),
            exact[i].into(),
        ]);
    }
    t.notes.push(verdict(MomentModel::Interval, &grid, &interval)?);
    t.notes.push(verdict(MomentModel::Exact, &grid, &exact)?);
    Ok(t)
}

fn training(config: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["iteration", "cost", "grad_norm"]);
    let m = config.modes()?[0];
    let u = MeanVector::with_intensity(m, intensity("intensity", config.intensity[0])?);
    let circuit = random_training_circuit(m, config.train.depth, config.seed)?;
    let settings = TrainConfig {
        lr: config.train.lr,
        max_iters: config.train.max_iters,
        tol: config.train.tol,
        ..TrainConfig::default()
    };
    for r in train(&circuit, &TrainCost::Compiling, &u, &settings)? {
        t.push(vec![r.iteration.into(), r.cost.into(), r.grad_norm.into()]);
    }
    Ok(t)
}

/// The configured gate for `m` modes, rebuilt only when `m` changes. A
/// random gate for `m` is drawn from its own stream so that it does not
/// depend on the rest of the sweep.
fn gate_for(
    config: &ExperimentConfig,
    m: usize,
    current: &mut Option<(usize, GeneratorPair)>,
) -> Result<GeneratorPair, CliError> {
    if let Some((cm, g)) = current {
        if *cm == m {
            return Ok(g.clone());
        }
    }
    let g = config.gate.generator(m, &RandomSource::new(config.seed.wrapping_add(m as u64)))?;
    *current = Some((m, g.clone()));
    Ok(g)
}
