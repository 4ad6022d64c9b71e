//! Modified Bessel functions of the first kind, log-Gamma and the two
//! asymptotic regimes of `I_ν` that govern the gradient moments.
//!
//! Every quantity is carried as a natural logarithm. The moment prefactors
//! combine `e^{-4E}`, `Γ(m)` and `I_{m-1}(4E)`, each of which leaves the
//! range of `f64` long before `m` reaches a few hundred, while their product
//! stays representable in log scale for `m` up to `10^4` and `E` up to `10^6`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Div, Mul};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Arguments at or below this value are summed with the power series for every
/// order. Pinned by `switchover_constants_are_pinned`.
pub const SERIES_MAX_ARG: f64 = 20.0;

/// Orders at or above this value use the corrected uniform (Debye) expansion
/// when the argument is outside the series region; lower orders recur
/// downwards from this order.
pub const DEBYE_MIN_ORDER: u32 = 40;

/// Number of correction polynomials `u_k(t)` used in the uniform expansion.
const DEBYE_TERMS: usize = 12;

/// A positive quantity stored by its natural logarithm.
///
/// Zero is represented by a log value of `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogScaled {
    log_value: f64,
}

impl LogScaled {
    pub const ZERO: LogScaled = LogScaled {
        log_value: f64::NEG_INFINITY,
    };
    pub const ONE: LogScaled = LogScaled { log_value: 0.0 };

    pub fn from_log(log_value: f64) -> Self {
        debug_assert!(!log_value.is_nan());
        Self { log_value }
    }

    /// Panics in debug builds on negative input.
    pub fn from_value(value: f64) -> Self {
        debug_assert!(value >= 0.0, "LogScaled holds nonnegative values only");
        Self {
            log_value: value.ln(),
        }
    }

    pub fn ln(self) -> f64 {
        self.log_value
    }

    /// Linear-scale value; under/overflows to `0` or `inf` when unrepresentable.
    pub fn value(self) -> f64 {
        self.log_value.exp()
    }

    pub fn is_zero(self) -> bool {
        self.log_value == f64::NEG_INFINITY
    }

    pub fn powi(self, n: i32) -> Self {
        if self.is_zero() && n == 0 {
            return Self::ONE;
        }
        Self::from_log(self.log_value * n as f64)
    }

    pub fn scale(self, factor: f64) -> Self {
        self * LogScaled::from_value(factor)
    }
}

impl Mul for LogScaled {
    type Output = LogScaled;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::from_log(self.log_value + rhs.log_value)
    }
}

impl Div for LogScaled {
    type Output = LogScaled;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::from_log(self.log_value - rhs.log_value)
    }
}

impl fmt::Display for LogScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", self.log_value)
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of `Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "log_gamma requires a positive argument, got {x}");
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - log_gamma(1.0 - x);
    }
    if x >= 1.0e3 {
        return stirling_log_gamma(x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn stirling_log_gamma(x: f64) -> f64 {
    // Bernoulli terms B_{2k} / (2k(2k-1) x^{2k-1})
    const B: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    let mut p = inv;
    for b in B {
        corr += b * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + corr
}

/// `log I_ν(x)` for integer order `ν ≥ 0` and `x ≥ 0`.
///
/// `I_ν(0)` is `1` for `ν = 0` and `0` (log `-inf`) otherwise.
pub fn bessel_i(nu: u32, x: f64) -> LogScaled {
    assert!(x >= 0.0 && !x.is_nan(), "bessel_i requires x >= 0, got {x}");
    if x == 0.0 {
        return if nu == 0 {
            LogScaled::ONE
        } else {
            LogScaled::ZERO
        };
    }
    if x <= SERIES_MAX_ARG {
        return LogScaled::from_log(log_bessel_series(nu, x));
    }
    if nu >= DEBYE_MIN_ORDER {
        return LogScaled::from_log(log_bessel_debye(nu, x));
    }
    LogScaled::from_log(log_bessel_downward(nu, x))
}

/// Power series `Σ_k (x²/4)^k / (k! (ν+k)!)` scaled by `(x/2)^ν`, with the
/// running sum rescaled whenever it grows large so that nothing overflows.
fn log_bessel_series(nu: u32, x: f64) -> f64 {
    let nu_f = nu as f64;
    let q = 0.25 * x * x;
    let lead = nu_f * (0.5 * x).ln() - log_gamma(nu_f + 1.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut shift = 0.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu_f));
        sum += term;
        if term < sum * 1e-17 && k * (k + nu_f) > q {
            break;
        }
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            shift += 250.0 * std::f64::consts::LN_10;
        }
    }
    lead + shift + sum.ln()
}

/// Coefficients (ascending powers of `t`) of the Debye polynomials
/// `u_0 .. u_{DEBYE_TERMS-1}`, generated from
/// `u_{k+1} = ½t²(1−t²)u_k' + ⅛∫₀ᵗ(1−5s²)u_k ds`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &polys[k];
            let deg = u.len() - 1;
            let mut next = vec![0.0; deg + 4];
            // ½ t² (1 - t²) u'(t)
            for (i, &c) in u.iter().enumerate().skip(1) {
                let d = c * i as f64;
                // d t^{i-1} * (t² - t⁴)/2
                next[i + 1] += 0.5 * d;
                next[i + 3] -= 0.5 * d;
            }
            // ⅛ ∫ (1 - 5s²) u(s) ds
            for (i, &c) in u.iter().enumerate() {
                next[i + 1] += 0.125 * c / (i as f64 + 1.0);
                next[i + 3] -= 0.125 * 5.0 * c / (i as f64 + 3.0);
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Uniform asymptotic expansion with correction terms, accurate to near
/// machine precision for `ν ≥ DEBYE_MIN_ORDER`.
fn log_bessel_debye(nu: u32, x: f64) -> f64 {
    let nu_f = nu as f64;
    let root = nu_f.hypot(x);
    let t = nu_f / root;
    let mut series = 0.0;
    let mut inv_pow = 1.0;
    for poly in debye_polynomials() {
        series += horner(poly, t) * inv_pow;
        inv_pow /= nu_f;
    }
    debye_leading_log(nu_f, x, root) + series.ln()
}

/// `νη − ½log(2πν) − ¼log(1+z²)` with `z = x/ν`, written in terms of
/// `root = √(ν²+x²)` so that large arguments do not lose precision.
fn debye_leading_log(nu: f64, x: f64, root: f64) -> f64 {
    // ν·ln(z/(1+√(1+z²))) = ν·ln(x/(ν+root)) = −ν·ln1p(ν/x + (root−x)/x)
    let ln_ratio = if x > nu {
        let rel = (nu + (root - x)) / x;
        -rel.ln_1p()
    } else {
        (x / (nu + root)).ln()
    };
    root + nu * ln_ratio - 0.5 * (2.0 * PI * nu).ln() - 0.5 * (root / nu).ln()
}

/// Downward recurrence `I_{k-1} = I_{k+1} + (2k/x) I_k` started from the
/// uniform expansion at orders `DEBYE_MIN_ORDER` and `DEBYE_MIN_ORDER + 1`.
fn log_bessel_downward(nu: u32, x: f64) -> f64 {
    let top = DEBYE_MIN_ORDER;
    let log_top = log_bessel_debye(top, x);
    let mut above = (log_bessel_debye(top + 1, x) - log_top).exp();
    let mut current = 1.0;
    let mut log_shift = 0.0;
    for k in (nu + 1..=top).rev() {
        let below = above + (2.0 * k as f64 / x) * current;
        above = current;
        current = below;
        if current > 1e200 {
            above /= current;
            log_shift += current.ln();
            current = 1.0;
        }
    }
    log_top + log_shift + current.ln()
}

/// Leading-order uniform asymptotic `log I_ν(νz) ≈ νη(z) − ½log(2πν) − ¼log(1+z²)`,
/// with `η(z) = √(1+z²) + log(z/(1+√(1+z²)))`.
pub fn uniform_asymptotic_i(nu: u32, x: f64) -> LogScaled {
    assert!(nu >= 1, "uniform asymptotic requires nu >= 1");
    assert!(x >= 0.0);
    if x == 0.0 {
        return LogScaled::ZERO;
    }
    let nu_f = nu as f64;
    LogScaled::from_log(debye_leading_log(nu_f, x, nu_f.hypot(x)))
}

/// Small-argument asymptotic `log[(x/2)^ν / Γ(ν+1)]`.
pub fn small_arg_asymptotic_i(nu: u32, x: f64) -> LogScaled {
    assert!(x >= 0.0);
    if nu == 0 {
        return LogScaled::ONE;
    }
    if x == 0.0 {
        return LogScaled::ZERO;
    }
    let nu_f = nu as f64;
    LogScaled::from_log(nu_f * (0.5 * x).ln() - log_gamma(nu_f + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close_log(actual: f64, expected: f64, rel: f64) {
        let tol = rel * expected.abs().max(1.0);
        assert!(
            (actual - expected).abs() <= tol,
            "log value {actual} vs {expected} (tol {tol})"
        );
    }

    /// 30-term series for `I_ν(x)` in plain linear arithmetic.
    fn naive_series(nu: u32, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(nu as i32);
        for j in 1..=nu {
            term /= j as f64;
        }
        let mut sum = term;
        for k in 1..30 {
            term *= 0.25 * x * x / (k as f64 * (k + nu) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn small_order_values() {
        assert_eq!(bessel_i(0, 0.0).value(), 1.0);
        assert!(bessel_i(3, 0.0).is_zero());
        assert!((bessel_i(0, 1.0).value() - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i(5, 2.0).value() - 0.009_825_679_323_131_702).abs() < 1e-16);
    }

    #[test]
    fn matches_naive_series() {
        for nu in [0, 1, 7, 20] {
            for x in [0.01, 0.7, 3.0, 9.5] {
                let want = naive_series(nu, x);
                let got = bessel_i(nu, x).value();
                assert!(((got - want) / want).abs() < 1e-12, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn high_precision_reference_values() {
        // (ν, x, log I_ν(x)) from a 40-digit evaluation.
        let refs: [(u32, f64, f64); 17] = [
            (0, 0.5, 0.061_549_719_185_481_31),
            (0, 25.0, 22.476_728_004_999_245),
            (1, 30.0, 27.367_748_089_282_408),
            (3, 100.0, 96.734_508_690_490_96),
            (10, 21.0, 16.172_683_919_788_618),
            (20, 400.0, 395.585_120_259_528_54),
            (39, 60.0, 44.670_077_393_112_98),
            (40, 60.0, 44.048_018_676_691_87),
            (45, 10.0, -56.158_845_068_170_244),
            (50, 1000.0, 994.376_944_215_458_7),
            (120, 35.0, -111.842_850_411_741_57),
            (300, 50.0, -447.173_764_347_820_2),
            (999, 4000.0, 3_870.805_446_506_181),
            (1000, 0.5, -7_298.422_477_170_493),
            (2, 1e5, 99_993.324_579_984_21),
            (9999, 4e6, 3_999_978.982_663_859),
            (30, 2000.0, 1_995.055_620_696_965_7),
        ];
        for (nu, x, want) in refs {
            close_log(bessel_i(nu, x).ln(), want, 1e-12);
        }
    }

    #[test]
    fn log_gamma_reference_values() {
        let refs: [(f64, f64); 9] = [
            (0.1, 2.252_712_651_734_206),
            (0.5, 0.572_364_942_924_700_1),
            (1.5, -0.120_782_237_635_245_22),
            (2.5, 0.284_682_870_472_919_2),
            (10.5, 13.940_625_219_403_763),
            (33.3, 82.603_723_581_654_95),
            (170.2, 702.463_952_631_530_8),
            (1234.5, 7_550.550_901_077_895),
            (1e6, 12_815_504.569_147_611),
        ];
        for (x, want) in refs {
            close_log(log_gamma(x), want, 1e-13);
        }
        assert!(log_gamma(1.0).abs() < 1e-15);
        assert!((log_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn log_gamma_matches_half_integer_recursion() {
        // Γ(n + ½) = (n − ½)(n − 3/2)…(½)·√π
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < 40.0 {
            assert!(((log_gamma(x) - g.ln()) / g.ln().abs().max(1.0)).abs() < 1e-13);
            g *= x;
            x += 1.0;
        }
        assert!((log_gamma(10.5).exp() / 1_133_278.388_948_785 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn debye_polynomials_match_tabulated() {
        let p = debye_polynomials();
        // u_1 = (3t − 5t³)/24, u_2 = (81t² − 462t⁴ + 385t⁶)/1152
        let t = 0.37;
        assert!((horner(&p[1], t) - (3.0 * t - 5.0 * t.powi(3)) / 24.0).abs() < 1e-15);
        let u2 = (81.0 * t * t - 462.0 * t.powi(4) + 385.0 * t.powi(6)) / 1152.0;
        assert!((horner(&p[2], t) - u2).abs() < 1e-15);
    }

    #[test]
    fn switchover_constants_are_pinned() {
        assert_eq!(SERIES_MAX_ARG, 20.0);
        assert_eq!(DEBYE_MIN_ORDER, 40);
        // both sides of each switchover agree
        for nu in [0, 5, 39] {
            let a = log_bessel_series(nu, SERIES_MAX_ARG);
            let b = log_bessel_downward(nu, SERIES_MAX_ARG);
            close_log(a, b, 1e-13);
        }
        for x in [20.5, 80.0] {
            let a = log_bessel_debye(DEBYE_MIN_ORDER, x);
            let b = log_bessel_series(DEBYE_MIN_ORDER, x);
            close_log(a, b, 1e-13);
        }
    }

    #[test]
    fn uniform_leading_order_ratio() {
        // within 1% at ν = 50, z = 1
        let exact = bessel_i(50, 50.0);
        let approx = uniform_asymptotic_i(50, 50.0);
        assert!(((approx / exact).value() - 1.0).abs() < 0.01);
        // error shrinks with the order at fixed z
        let mut prev = f64::INFINITY;
        for nu in [10, 20, 50, 100, 200] {
            let x = nu as f64;
            let err = ((uniform_asymptotic_i(nu, x) / bessel_i(nu, x)).value() - 1.0).abs();
            assert!(err < prev, "nu={nu}: {err} !< {prev}");
            prev = err;
        }
    }

    #[test]
    fn small_argument_limit() {
        assert_eq!(small_arg_asymptotic_i(0, 1e-9).ln(), 0.0);
        // the first dropped series term has relative size q = x²/(4(ν+1))
        for q in [1e-4, 1e-6, 1e-8] {
            for nu in [0, 1, 4, 30, 500] {
                let x = (4.0 * q * (nu + 1) as f64).sqrt();
                let r = (small_arg_asymptotic_i(nu, x) / bessel_i(nu, x)).value();
                assert!((1.0 - r).abs() <= 1.000_1 * q, "nu={nu} q={q}: {r}");
            }
        }
    }

    #[test]
    fn log_scaled_arithmetic() {
        let a = LogScaled::from_value(6.0);
        let b = LogScaled::from_value(3.0);
        assert!(((a / b).value() - 2.0).abs() < 1e-15);
        assert!(((a * b).value() - 18.0).abs() < 1e-13);
        assert!((a * LogScaled::ZERO).is_zero());
        assert_eq!(LogScaled::ZERO.powi(0), LogScaled::ONE);
    }
}
