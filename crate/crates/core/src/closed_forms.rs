//! Closed-form gradient moments and the regime classifier built on them.
//!
//! Two families of compiling-cost moments are provided. The interval family
//! (`prop1_interval`, `heterodyne_prefactor`) scales a Bessel prefactor of
//! order `m − 1` by the extreme squared column norms of the generator. The
//! exact family (`compiling_second_moment`, `heterodyne_second_moment`)
//! averages over the joint Haar measure without freezing the generator
//! basis; it has order `m` and depends on `D` only through `‖D‖²_F`. The
//! interval prefactor is always at least the exact one.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::BkMatrix;
use crate::error::{invalid, Error, Result};
use crate::phase_space::{Intensity, MeanVector};
use crate::special::{bessel_i, log_gamma, LogScaled};

/// Skew-symmetry tolerance for generator checks.
const SKEW_TOL: f64 = 1e-10;

/// Largest admissible `|tr B|` in the quadratic second moment.
pub const TRACE_TOL: f64 = 1e-8;

/// Decay rate (nats per mode) at or below which the fitted linear term
/// declares a barren plateau.
pub const BPL_RATE_THRESHOLD: f64 = -0.05;

/// Fewest grid points accepted by the classifier.
pub const MIN_GRID_POINTS: usize = 6;

fn check_generator(d: &DMatrix<f64>) -> Result<usize> {
    let n = d.nrows();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::OddLength(n));
    }
    if d.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: d.ncols(),
        });
    }
    let skew = (d + d.transpose()).norm();
    if skew > SKEW_TOL * (1.0 + d.norm()) {
        return Err(Error::NotSkew(skew));
    }
    Ok(n / 2)
}

fn check_modes(m: usize, d: &DMatrix<f64>) -> Result<()> {
    let dm = check_generator(d)?;
    if dm != m {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            actual: 2 * dm,
        });
    }
    Ok(())
}

/// Smallest and largest squared column norm of a skew-symmetric generator.
pub fn xi_bounds(d: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_generator(d)?;
    let norms = d.column_iter().map(|c| c.norm_squared());
    Ok(norms.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    }))
}

/// Endpoints of a predicted range for a positive moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentInterval {
    pub lo: LogScaled,
    pub hi: LogScaled,
}

impl MomentInterval {
    pub fn point(value: LogScaled) -> Self {
        Self {
            lo: value,
            hi: value,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Whether `value ± slack` meets `[lo, hi]`.
    pub fn contains(&self, value: f64, slack: f64) -> bool {
        value + slack >= self.lo.value() && value - slack <= self.hi.value()
    }
}

/// `e^{−4E} Γ(m) I_{m−1}(4E) / (2m (2E)^{m−3})`, the compiling-cost
/// prefactor multiplying the squared column norms of `D_k`.
pub fn prop1_prefactor(m: usize, e: Intensity) -> LogScaled {
    assert!(m >= 1);
    let e = e.value();
    if e == 0.0 {
        return LogScaled::ZERO;
    }
    let mf = m as f64;
    LogScaled::from_log(
        -4.0 * e + log_gamma(mf) + bessel_i((m - 1) as u32, 4.0 * e).ln()
            - (2.0 * mf).ln()
            - (mf - 3.0) * (2.0 * e).ln(),
    )
}

/// The prefactor scaled by `[ξ_min, ξ_max]` from [`xi_bounds`].
pub fn prop1_interval(m: usize, e: Intensity, d: &DMatrix<f64>) -> Result<MomentInterval> {
    check_modes(m, d)?;
    let (xi_min, xi_max) = xi_bounds(d)?;
    let p = prop1_prefactor(m, e);
    Ok(MomentInterval {
        lo: p.scale(xi_min),
        hi: p.scale(xi_max),
    })
}

/// Exact `E_{O₋,O₊}[(∂C)²]` of the compiling-cost gradient over independent
/// Haar `O₋, O₊`:
/// `e^{−4E} Γ(m) I_m(4E) ‖D‖²_F / (4m (2E)^{m−2})`.
pub fn compiling_second_moment(m: usize, e: Intensity, d: &DMatrix<f64>) -> Result<LogScaled> {
    check_modes(m, d)?;
    let e = e.value();
    Ok(exact_overlap_moment(m, 2.0 * e, e, e, d.norm_squared()))
}

/// Prefactor `t` of the measurement-cost moment interval with input and
/// target intensities `E₀, E₁`:
/// `e^{−2(E₀+E₁)} Γ(m) I_{m−1}(4√(E₀E₁)) / (2m (2√(E₀E₁))^{m−3})`.
///
/// Zero when either intensity vanishes; the cost is then constant in `θ`.
pub fn heterodyne_prefactor(m: usize, e0: Intensity, e1: Intensity) -> LogScaled {
    assert!(m >= 1);
    let (e0, e1) = (e0.value(), e1.value());
    let z = 2.0 * (e0 * e1).sqrt();
    if z == 0.0 {
        return LogScaled::ZERO;
    }
    let mf = m as f64;
    LogScaled::from_log(
        -2.0 * (e0 + e1) + log_gamma(mf) + bessel_i((m - 1) as u32, 2.0 * z).ln()
            - (2.0 * mf).ln()
            - (mf - 3.0) * z.ln(),
    )
}

/// Exact measurement-cost second moment,
/// `e^{−2(E₀+E₁)} Γ(m) I_m(2z) ‖D‖²_F / (4m z^{m−2})` with `z = 2√(E₀E₁)`.
pub fn heterodyne_second_moment(
    m: usize,
    e0: Intensity,
    e1: Intensity,
    d: &DMatrix<f64>,
) -> Result<LogScaled> {
    check_modes(m, d)?;
    let (e0, e1) = (e0.value(), e1.value());
    Ok(exact_overlap_moment(m, 2.0 * (e0 * e1).sqrt(), e0, e1, d.norm_squared()))
}

fn exact_overlap_moment(m: usize, z: f64, e0: f64, e1: f64, frob_sq: f64) -> LogScaled {
    if z == 0.0 || frob_sq == 0.0 {
        return LogScaled::ZERO;
    }
    let mf = m as f64;
    LogScaled::from_log(
        -2.0 * (e0 + e1) + log_gamma(mf) + bessel_i(m as u32, 2.0 * z).ln() + frob_sq.ln()
            - (4.0 * mf).ln()
            - (mf - 2.0) * z.ln(),
    )
}

/// Both algebraic forms of the quadratic-cost second moment over Haar `O₋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMoment {
    /// `‖u‖⁴ (tr B² + ‖B‖²_F) / (2m(2m+2))`
    pub trace_form: f64,
    /// `‖u‖⁴ ‖B‖²_F / (m(2m+2))`
    pub frobenius_form: f64,
}

impl QuadraticMoment {
    pub fn value(&self) -> f64 {
        self.trace_form
    }

    pub fn relative_gap(&self) -> f64 {
        let scale = self.trace_form.abs().max(self.frobenius_form.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.trace_form - self.frobenius_form).abs() / scale
        }
    }
}

/// Second moment of `uO₋B_kO₋ᵀuᵀ` over Haar `O₋`. Requires `tr B_k = 0`.
pub fn prop2_value(u: &MeanVector, b: &BkMatrix) -> Result<QuadraticMoment> {
    let bm = b.matrix();
    u.check_dim(bm.nrows())?;
    let tr = b.trace();
    if tr.abs() > TRACE_TOL {
        return Err(Error::NonzeroTrace(tr));
    }
    let m = u.modes() as f64;
    let u4 = u.as_dvector().norm_squared().powi(2);
    let tr_sq = (bm * bm).trace();
    let frob = b.frobenius_sq();
    Ok(QuadraticMoment {
        trace_form: u4 * (tr_sq + frob) / (2.0 * m * (2.0 * m + 2.0)),
        frobenius_form: u4 * frob / (m * (2.0 * m + 2.0)),
    })
}

/// Tail bound of the given order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChebyshevOrder {
    /// `P(|X| ≥ ε) ≤ E|X|/ε`
    First,
    /// `P(|X| ≥ ε) ≤ E X²/ε²`
    Second,
}

pub fn chebyshev_bound(moment: f64, order: ChebyshevOrder, epsilon: f64) -> Result<f64> {
    if !(moment >= 0.0) {
        return Err(invalid("moment", format!("must be >= 0, got {moment}")));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let bound = match order {
        ChebyshevOrder::First => moment / epsilon,
        ChebyshevOrder::Second => moment / (epsilon * epsilon),
    };
    Ok(bound.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// intensity scaling laws and regime classification

/// Total intensity as a function of the mode count.
///
/// Text form: `constant:E`, `power:a,r` (`a·m^r`), `linear:a` (`a·m`),
/// `expdecay:a,b` (`a·b^{−m}`), `logpower:a,r` (`a·ln(m)·m^r`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum IntensityLaw {
    Constant(f64),
    Power { a: f64, r: f64 },
    Linear(f64),
    ExpDecay { a: f64, b: f64 },
    LogPower { a: f64, r: f64 },
}

impl IntensityLaw {
    pub fn intensity(&self, m: usize) -> Result<Intensity> {
        let mf = m as f64;
        let e = match *self {
            IntensityLaw::Constant(e) => e,
            IntensityLaw::Power { a, r } => a * mf.powf(r),
            IntensityLaw::Linear(a) => a * mf,
            IntensityLaw::ExpDecay { a, b } => a * b.powf(-mf),
            IntensityLaw::LogPower { a, r } => a * mf.ln() * mf.powf(r),
        };
        Intensity::new(e)
    }

    fn validate(self) -> Result<Self> {
        let ok = match self {
            IntensityLaw::Constant(e) => e >= 0.0 && e.is_finite(),
            IntensityLaw::Power { a, r } | IntensityLaw::LogPower { a, r } => {
                a >= 0.0 && a.is_finite() && r.is_finite()
            }
            IntensityLaw::Linear(a) => a >= 0.0 && a.is_finite(),
            IntensityLaw::ExpDecay { a, b } => a >= 0.0 && a.is_finite() && b > 0.0 && b.is_finite(),
        };
        if ok {
            Ok(self)
        } else {
            Err(invalid("law", format!("parameters out of range in `{self}`")))
        }
    }
}

impl fmt::Display for IntensityLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensityLaw::Constant(e) => write!(f, "constant:{e}"),
            IntensityLaw::Power { a, r } => write!(f, "power:{a},{r}"),
            IntensityLaw::Linear(a) => write!(f, "linear:{a}"),
            IntensityLaw::ExpDecay { a, b } => write!(f, "expdecay:{a},{b}"),
            IntensityLaw::LogPower { a, r } => write!(f, "logpower:{a},{r}"),
        }
    }
}

impl FromStr for IntensityLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| invalid("law", format!("`{s}`: {why}"));
        let (name, args) = s.split_once(':').ok_or_else(|| bad("expected name:args"))?;
        let nums = args
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        let law = match (name.trim(), nums.as_slice()) {
            ("constant", &[e]) => IntensityLaw::Constant(e),
            ("power", &[a, r]) => IntensityLaw::Power { a, r },
            ("linear", &[a]) => IntensityLaw::Linear(a),
            ("expdecay", &[a, b]) => IntensityLaw::ExpDecay { a, b },
            ("logpower", &[a, r]) => IntensityLaw::LogPower { a, r },
            ("constant" | "power" | "linear" | "expdecay" | "logpower", _) => {
                return Err(bad("wrong number of parameters"))
            }
            _ => return Err(bad("unknown law")),
        };
        law.validate()
    }
}

impl TryFrom<String> for IntensityLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<IntensityLaw> for String {
    fn from(law: IntensityLaw) -> Self {
        law.to_string()
    }
}

/// Which closed form a regime curve is built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentModel {
    /// Interval prefactor with unit column norm.
    #[default]
    Interval,
    /// Exact moment for a generator with unit mean squared column norm.
    Exact,
}

impl MomentModel {
    fn log_moment(self, m: usize, e0: Intensity, e1: Intensity) -> f64 {
        match self {
            MomentModel::Interval => heterodyne_prefactor(m, e0, e1).ln(),
            MomentModel::Exact => {
                let z = 2.0 * (e0.value() * e1.value()).sqrt();
                exact_overlap_moment(m, z, e0.value(), e1.value(), 2.0 * m as f64).ln()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Bpl,
    Trainable,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Bpl => "BPL",
            Regime::Trainable => "trainable",
        })
    }
}

/// Least-squares fit of `log moment ≈ c₀ + c₁ ln m + c₂ √m + c₃ m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeFit {
    pub regime: Regime,
    /// `c₃`, nats per mode.
    pub linear_rate: f64,
    pub coefficients: [f64; 4],
    pub rms_residual: f64,
    pub m_grid: Vec<usize>,
    pub log_moments: Vec<f64>,
}

fn check_curve(m_grid: &[usize], log_moments: &[f64], min_points: usize) -> Result<()> {
    if m_grid.len() != log_moments.len() {
        return Err(Error::DimensionMismatch {
            expected: m_grid.len(),
            actual: log_moments.len(),
        });
    }
    if m_grid.len() < min_points {
        return Err(Error::DegenerateFit(format!(
            "need at least {min_points} grid points, got {}",
            m_grid.len()
        )));
    }
    if m_grid[0] == 0 || m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("m_grid", "must be positive and strictly ascending"));
    }
    if let Some(i) = log_moments.iter().position(|y| !y.is_finite()) {
        return Err(Error::DegenerateFit(format!(
            "log moment at m = {} is not finite",
            m_grid[i]
        )));
    }
    let first = log_moments[0];
    if log_moments.iter().all(|&y| y == first) {
        return Err(Error::DegenerateFit("all values are equal".into()));
    }
    Ok(())
}

fn least_squares(
    m_grid: &[usize],
    y: &[f64],
    basis: &[fn(f64) -> f64],
) -> Result<(DVector<f64>, f64)> {
    let a = DMatrix::from_fn(m_grid.len(), basis.len(), |i, j| basis[j](m_grid[i] as f64));
    let y = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let resid = (&a * &coef - &y).norm() / (m_grid.len() as f64).sqrt();
    Ok((coef, resid))
}

/// Classify a curve of log second moments on an ascending `m` grid.
pub fn classify_log_moments(m_grid: &[usize], log_moments: &[f64]) -> Result<RegimeFit> {
    check_curve(m_grid, log_moments, MIN_GRID_POINTS)?;
    let basis: [fn(f64) -> f64; 4] = [|_| 1.0, f64::ln, f64::sqrt, |m| m];
    let (c, rms_residual) = least_squares(m_grid, log_moments, &basis)?;
    let linear_rate = c[3];
    Ok(RegimeFit {
        regime: if linear_rate <= BPL_RATE_THRESHOLD {
            Regime::Bpl
        } else {
            Regime::Trainable
        },
        linear_rate,
        coefficients: [c[0], c[1], c[2], c[3]],
        rms_residual,
        m_grid: m_grid.to_vec(),
        log_moments: log_moments.to_vec(),
    })
}

/// Log second-moment curve of the compiling cost under an intensity law.
pub fn compiling_curve(law: &IntensityLaw, m_grid: &[usize], model: MomentModel) -> Result<Vec<f64>> {
    m_grid
        .iter()
        .map(|&m| {
            let e = law.intensity(m)?;
            Ok(model.log_moment(m, e, e))
        })
        .collect()
}

/// Regime of the compiling cost under an intensity law, from the interval
/// prefactor with unit column norm.
pub fn classify_regime(law: &IntensityLaw, m_grid: &[usize]) -> Result<RegimeFit> {
    classify_log_moments(m_grid, &compiling_curve(law, m_grid, MomentModel::Interval)?)
}

/// Number of attenuating layers as a function of the mode count.
///
/// Text form: `linear` (`L = m`), `sqrt` (`L = ⌈√m⌉`) or a fixed count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NoiseDepth {
    /// `L = m`
    Linear,
    /// `L = ⌈√m⌉`
    Sqrt,
    Fixed(u32),
}

impl NoiseDepth {
    pub fn layers(self, m: usize) -> u32 {
        match self {
            NoiseDepth::Linear => m as u32,
            NoiseDepth::Sqrt => (m as f64).sqrt().ceil() as u32,
            NoiseDepth::Fixed(l) => l,
        }
    }
}

impl fmt::Display for NoiseDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseDepth::Linear => f.write_str("linear"),
            NoiseDepth::Sqrt => f.write_str("sqrt"),
            NoiseDepth::Fixed(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for NoiseDepth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" | "m" => Ok(NoiseDepth::Linear),
            "sqrt" => Ok(NoiseDepth::Sqrt),
            other => other
                .parse()
                .map(NoiseDepth::Fixed)
                .map_err(|_| invalid("layers", format!("expected linear, sqrt or an integer, got `{s}`"))),
        }
    }
}

impl TryFrom<String> for NoiseDepth {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NoiseDepth> for String {
    fn from(d: NoiseDepth) -> Self {
        d.to_string()
    }
}

/// Log measurement-cost curve where the target intensity is the input
/// intensity after `depth(m)` attenuators of amplitude transmissivity `k`.
pub fn noise_curve(
    law: &IntensityLaw,
    k: f64,
    depth: NoiseDepth,
    m_grid: &[usize],
    model: MomentModel,
) -> Result<Vec<f64>> {
    m_grid
        .iter()
        .map(|&m| {
            let e0 = law.intensity(m)?;
            let e1 = crate::cost::attenuated_intensity(e0, k, depth.layers(m))?;
            Ok(model.log_moment(m, e0, e1))
        })
        .collect()
}

pub fn classify_noise(
    law: &IntensityLaw,
    k: f64,
    depth: NoiseDepth,
    m_grid: &[usize],
) -> Result<RegimeFit> {
    classify_log_moments(m_grid, &noise_curve(law, k, depth, m_grid, MomentModel::Interval)?)
}

/// Coefficient of `m` in a fit `c₀ + c₁ ln m + c₂ m`, the exponential
/// rate of a curve whose subleading behavior is a power of `m`.
pub fn fit_exponential_rate(m_grid: &[usize], log_moments: &[f64]) -> Result<f64> {
    check_curve(m_grid, log_moments, 3)?;
    let basis: [fn(f64) -> f64; 3] = [|_| 1.0, f64::ln, |m| m];
    let (c, _) = least_squares(m_grid, log_moments, &basis)?;
    Ok(c[2])
}

/// Leading exponential rate of the interval prefactor at `E = a(m − 1)`:
/// `−(4a + 1 − √(16a² + 1)) + ln(2 / (1 + √(16a² + 1)))`.
pub fn linear_intensity_rate(a: f64) -> f64 {
    let s = (16.0 * a * a + 1.0).sqrt();
    -(4.0 * a + 1.0 - s) + (2.0 / (1.0 + s)).ln()
}

/// Parse `a:b:step` into an inclusive ascending grid.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || invalid("m_grid", format!("expected start:stop:step, got `{s}`"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [a, b, step] = parts[..] else {
        return Err(bad());
    };
    if a == 0 || step == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).step_by(step).collect())
}
