//! Descriptive statistics and the rank/reliability coefficients used by the
//! metric suite.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::StatsError;

/// Below this many complete pairs no p-value is reported.
pub const MIN_N_FOR_P_VALUE: usize = 3;

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Variance with the n - 1 denominator.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(f64::sqrt)
}

/// Adjusted Fisher-Pearson standardized moment coefficient (G1).
///
/// Undefined for fewer than three samples or when all samples are equal.
pub fn skewness(xs: &[f64]) -> Result<f64, StatsError> {
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::Undefined("skewness needs at least three samples"));
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo == hi {
        return Err(StatsError::Undefined("skewness of constant samples"));
    }
    let nf = n as f64;
    let m = xs.iter().sum::<f64>() / nf;
    let (m2, m3) = xs.iter().fold((0.0, 0.0), |(s2, s3), &x| {
        let d = x - m;
        (s2 + d * d, s3 + d * d * d)
    });
    let (m2, m3) = (m2 / nf, m3 / nf);
    if m2 == 0.0 {
        return Err(StatsError::Undefined("skewness of constant samples"));
    }
    let g1 = m3 / m2.powf(1.5);
    Ok(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauB {
    pub tau: f64,
    /// Two-sided, normal approximation with tie-adjusted variance.
    pub p_value: Option<f64>,
    /// Complete pairs used.
    pub n: usize,
    /// Concordant minus discordant pairs.
    pub s: i64,
}

/// Sum of `f(t)` over the sizes `t` of runs of equal adjacent values.
fn tie_sum(sorted: &[f64], f: impl Fn(u64) -> u64) -> u64 {
    let mut total = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        total += f((j - i) as u64);
        i = j;
    }
    total
}

/// Sorts `v` in place, returning the number of inversions (pairs i < j with
/// v[i] > v[j]). Equal values are not counted.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf.push(v[i]);
            i += 1;
        } else {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b with tie correction, O(n log n).
///
/// Pairs where either value is NaN are dropped. Fails when fewer than two
/// pairs remain or when either variable is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<TauB, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let mut pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .map(|(&a, &b)| (a, b))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::Undefined("tau-b needs at least two complete pairs"));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n * (n - 1) / 2) as u64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_ties = tie_sum(&xs, |t| t * (t - 1) / 2);

    // Pairs tied in both x and y.
    let mut joint_ties = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pairs[j] == pairs[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        joint_ties += t * (t - 1) / 2;
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut ys, &mut Vec::with_capacity(n));
    let y_ties = tie_sum(&ys, |t| t * (t - 1) / 2);

    if x_ties == n0 || y_ties == n0 {
        return Err(StatsError::Degenerate("one variable is constant"));
    }
    let s = n0 as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * discordant as i64;
    let tau = s as f64 / (((n0 - x_ties) as f64) * ((n0 - y_ties) as f64)).sqrt();

    let p_value = (n >= MIN_N_FOR_P_VALUE).then(|| {
        let nf = n as f64;
        let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
        let moments = |sorted: &[f64]| {
            (
                tie_sum(sorted, |t| t * (t - 1) * (2 * t + 5)) as f64,
                tie_sum(sorted, |t| t * (t - 1)) as f64,
                tie_sum(sorted, |t| t * (t - 1) * t.saturating_sub(2)) as f64,
            )
        };
        let (vt, t1, t2) = moments(&xs);
        let (vu, u1, u2) = moments(&ys);
        let var = (v0 - vt - vu) / 18.0
            + t1 * u1 / (2.0 * nf * (nf - 1.0))
            + t2 * u2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
        let z = s as f64 / var.sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    });

    Ok(TauB {
        tau: tau.clamp(-1.0, 1.0),
        p_value,
        n,
        s,
    })
}

/// Cronbach's alpha for a participant-by-item matrix.
///
/// Rows containing NaN are dropped (complete cases only). Needs at least two
/// items and two complete rows.
pub fn cronbach_alpha(rows: &[Vec<f64>]) -> Result<f64, StatsError> {
    let k = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != k) {
        return Err(StatsError::LengthMismatch(k, bad.len()));
    }
    if k < 2 {
        return Err(StatsError::Undefined("alpha needs at least two items"));
    }
    let complete: Vec<&Vec<f64>> = rows.iter().filter(|r| r.iter().all(|v| !v.is_nan())).collect();
    if complete.len() < 2 {
        return Err(StatsError::Undefined("alpha needs at least two complete rows"));
    }
    let item_var_sum: f64 = (0..k)
        .map(|j| {
            let col: Vec<f64> = complete.iter().map(|r| r[j]).collect();
            sample_variance(&col).expect("two or more rows")
        })
        .sum();
    let totals: Vec<f64> = complete.iter().map(|r| r.iter().sum()).collect();
    let total_var = sample_variance(&totals).expect("two or more rows");
    if total_var == 0.0 {
        return Err(StatsError::Degenerate("total score variance is zero"));
    }
    let kf = k as f64;
    Ok(kf / (kf - 1.0) * (1.0 - item_var_sum / total_var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Descriptive {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: Option<f64>,
    pub skewness: Option<f64>,
}

pub fn describe(xs: &[f64]) -> Option<Descriptive> {
    Some(Descriptive {
        count: xs.len(),
        mean: mean(xs)?,
        median: median(xs)?,
        sd: sample_sd(xs),
        skewness: skewness(xs).ok(),
    })
}
