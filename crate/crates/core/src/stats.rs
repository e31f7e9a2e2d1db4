//! Descriptive statistics and Welch's unequal-variance t-test.
//!
//! Quartiles use the inclusive median-of-halves convention: for odd `n` the
//! median belongs to both halves, and each quartile is the median of its half.

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no values")]
    Empty,
    #[error("need at least two values, got {0}")]
    TooFew(usize),
    #[error("coefficient of variation undefined for zero mean")]
    ZeroMean,
    #[error("both samples have zero variance")]
    DegenerateVariance,
    #[error("non-finite value in sample")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsSummary {
    pub n: usize,
    pub mean: f64,
    std: Option<f64>,
    pub median: f64,
    iqr: Option<f64>,
    cov: Option<f64>,
}

impl StatsSummary {
    /// Sample standard deviation (n - 1 denominator).
    pub fn std(&self) -> Result<f64, StatsError> {
        self.std.ok_or(StatsError::TooFew(self.n))
    }

    pub fn iqr(&self) -> Result<f64, StatsError> {
        self.iqr.ok_or(StatsError::TooFew(self.n))
    }

    /// Coefficient of variation, std / mean.
    pub fn cov(&self) -> Result<f64, StatsError> {
        match (self.std, self.cov) {
            (None, _) => Err(StatsError::TooFew(self.n)),
            (Some(_), None) => Err(StatsError::ZeroMean),
            (Some(_), Some(c)) => Ok(c),
        }
    }
}

pub fn descriptive(values: &[f64]) -> Result<StatsSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    // compensated two-pass: Neumaier sum for the mean, then centred squares
    // with the residual-sum correction
    let n = values.len();
    let mean = neumaier(values.iter().copied()) / n as f64;
    let resid = neumaier(values.iter().map(|&x| x - mean));
    let m2 = neumaier(values.iter().map(|&x| (x - mean) * (x - mean))) - resid * resid / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted_median(&sorted);
    let (std, iqr) = if n >= 2 {
        let (q1, q3) = sorted_quartiles(&sorted);
        (Some(libm::sqrt(m2.max(0.0) / (n - 1) as f64)), Some(q3 - q1))
    } else {
        (None, None)
    };
    let cov = match std {
        Some(s) if mean != 0.0 => Some(s / mean),
        _ => None,
    };
    Ok(StatsSummary {
        n,
        mean,
        std,
        median,
        iqr,
        cov,
    })
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted_median(&sorted))
}

fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// (Q1, Q3) of a sorted sample with at least two values.
pub fn sorted_quartiles(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len();
    let half = n.div_ceil(2);
    (sorted_median(&sorted[..half]), sorted_median(&sorted[n - half..]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    let sa = descriptive(a)?;
    let sb = descriptive(b)?;
    let (da, db) = (sa.std()?, sb.std()?);
    let va = da * da / sa.n as f64;
    let vb = db * db / sb.n as f64;
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = (sa.mean - sb.mean) / libm::sqrt(se2);
    let dof = se2 * se2 / (va * va / (sa.n - 1) as f64 + vb * vb / (sb.n - 1) as f64);
    Ok(WelchResult {
        t,
        dof,
        p: student_t_two_sided_p(t, dof),
    })
}

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(0.5 * dof, 0.5, x).clamp(0.0, 1.0)
}

/// Student-t cumulative distribution function.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided_p(t, dof);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Regularised incomplete beta I_x(a, b), by continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // the fraction converges fast for x < (a + 1) / (a + b + 2)
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 10_000;

    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
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

/// Pool-adjacent-violators fit: the non-decreasing sequence closest to
/// `values` in least squares.
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m1, w1) = blocks[blocks.len() - 1];
            let (m0, w0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks present");
            *last = ((m0 * w0 as f64 + m1 * w1 as f64) / (w0 + w1) as f64, w0 + w1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, w)| core::iter::repeat_n(m, w))
        .collect()
}
