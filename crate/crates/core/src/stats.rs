//! Welch's unequal-variance t-test and the special functions behind it.
//!
//! Two-sided p-values come from the Student t distribution, evaluated through
//! the regularized incomplete beta function:
//!
//! ```text
//! P(|T| >= |t|) = I_x(df/2, 1/2),   x = df / (df + t^2)
//! ```

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("insufficient data: need at least 2 observations per sample (got {n_a} and {n_b})")]
    InsufficientData { n_a: usize, n_b: usize },
    #[error("argument outside the function's domain: {0}")]
    Domain(String),
}

/// Outcome of a Welch test of sample `b` against sample `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// `mean_b - mean_a`.
    pub mean_diff: f64,
    /// Both samples have zero variance but different means; `t` is infinite
    /// and `p` is reported as 0.
    pub degenerate: bool,
}

impl TestResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch's t-test. `t` is signed as `mean_b - mean_a`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let (n_a, n_b) = (a.len(), b.len());
    if n_a < 2 || n_b < 2 {
        return Err(StatsError::InsufficientData { n_a, n_b });
    }
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let mean_diff = mean_b - mean_a;
    let (na, nb) = (n_a as f64, n_b as f64);
    let va = var_a / na;
    let vb = var_b / nb;
    let se2 = va + vb;

    let mut res =
        TestResult { t: 0.0, df: na + nb - 2.0, p: 1.0, mean_a, mean_b, n_a, n_b, mean_diff, degenerate: false };
    if se2 == 0.0 {
        if mean_diff != 0.0 {
            res.t = mean_diff.signum() * f64::INFINITY;
            res.p = 0.0;
            res.degenerate = true;
        }
        return Ok(res);
    }
    res.t = mean_diff / se2.sqrt();
    res.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    res.p = t_two_sided_p(res.t, res.df);
    Ok(res)
}

fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let denom = df + t2;
    reg_inc_beta_pair(df / denom, t2 / denom, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Bonferroni-adjusted p-value for a family of `m` tests.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m.max(1) as f64).min(1.0)
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::Domain(format!("df must be > 0, got {df}")));
    }
    if t.is_nan() {
        return Err(StatsError::Domain("t is NaN".into()));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let tail = if t.is_infinite() { 0.0 } else { 0.5 * t_two_sided_p(t, df) };
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(StatsError::Domain(format!("x must be in [0,1], got {x}")));
    }
    if !(a > 0.0) || !(b > 0.0) || a.is_infinite() || b.is_infinite() {
        return Err(StatsError::Domain(format!("a and b must be finite and > 0, got a={a}, b={b}")));
    }
    Ok(reg_inc_beta_pair(x, 1.0 - x, a, b))
}

/// `I_x(a, b)` given both `x` and `1 - x`, so callers that can form the
/// complement exactly avoid cancellation near 1.
fn reg_inc_beta_pair(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(x, a, b) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(y, b, a) / b).clamp(0.0, 1.0)
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln Γ(z)` for `z > 0` (Lanczos, g = 7, n = 9), with the reflection formula
/// below 0.5.
pub fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if z < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}
