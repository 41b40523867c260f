//! Single-channel complexity measures: Higuchi fractal dimension, approximate
//! entropy, permutation entropy, Lempel-Ziv complexity, and multiscale
//! (sample) entropy.
//!
//! Tolerances are multiples of the sample standard deviation (divisor n-1)
//! and distances are Chebyshev, so every measure here except the fractal
//! dimension's intercept is invariant under `a * x + b` with `a > 0`.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexityError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("series has {len} samples, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("series has zero variance")]
    Flat,
}

pub type Result<T> = std::result::Result<T, ComplexityError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityParams {
    pub hd_kmax: usize,
    pub apen_m: usize,
    pub apen_r: f64,
    pub permen_m: usize,
    pub permen_tau: usize,
    pub mse_scales: Vec<usize>,
    pub mse_m: usize,
    pub mse_r: f64,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        ComplexityParams {
            hd_kmax: 10,
            apen_m: 2,
            apen_r: 0.2,
            permen_m: 3,
            permen_tau: 1,
            mse_scales: (1..=20).collect(),
            mse_m: 2,
            mse_r: 0.15,
        }
    }
}

impl ComplexityParams {
    pub fn validate(&self) -> Result<()> {
        let p = |msg: &str| Err(ComplexityError::Param(msg.to_string()));
        if self.hd_kmax < 2 {
            return p("hd_kmax must be at least 2");
        }
        if self.apen_m < 1 || self.mse_m < 1 {
            return p("embedding lengths must be at least 1");
        }
        if !(self.apen_r > 0.0 && self.mse_r > 0.0) {
            return p("tolerances must be positive");
        }
        if self.permen_m < 2 || self.permen_m > MAX_ORDINAL_ORDER {
            return p("permen_m must lie in 2..=20");
        }
        if self.permen_tau < 1 {
            return p("permen_tau must be at least 1");
        }
        if self.mse_scales.first() != Some(&1) || self.mse_scales.windows(2).any(|w| w[1] <= w[0]) {
            return p("mse_scales must be strictly increasing and start at 1");
        }
        Ok(())
    }
}

/// Sample standard deviation (divisor n-1).
pub fn sample_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn tolerance(x: &[f64], r_multiple: f64) -> Result<f64> {
    if !(r_multiple > 0.0) {
        return Err(ComplexityError::Param("tolerance multiple must be positive".into()));
    }
    let sd = sample_std(x);
    if !(sd > 0.0) {
        return Err(ComplexityError::Flat);
    }
    Ok(r_multiple * sd)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Higuchi fractal dimension: slope of `ln L(k)` against `ln(1/k)` for
/// `k = 1..=kmax`, where `L(k)` is the mean normalized curve length over the
/// `k` offset subsamplings.
pub fn higuchi_fd(x: &[f64], kmax: usize) -> Result<f64> {
    if kmax < 2 {
        return Err(ComplexityError::Param("kmax must be at least 2".into()));
    }
    let n = x.len();
    if n < 4 * kmax {
        return Err(ComplexityError::TooShort { len: n, need: 4 * kmax });
    }
    let mut log_inv_k = Vec::with_capacity(kmax);
    let mut log_len = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut total = 0.0;
        for m in 0..k {
            let steps = (n - 1 - m) / k;
            let mut sum = 0.0;
            for i in 1..=steps {
                sum += (x[m + i * k] - x[m + (i - 1) * k]).abs();
            }
            total += sum * (n - 1) as f64 / (steps * k) as f64 / k as f64;
        }
        let mean_len = total / k as f64;
        if !(mean_len > 0.0) {
            return Err(ComplexityError::Flat);
        }
        log_inv_k.push((1.0 / k as f64).ln());
        log_len.push(mean_len.ln());
    }
    Ok(least_squares_slope(&log_inv_k, &log_len))
}

/// Match counts for every template of length `m` and `m + 1` (self-matches
/// included), Chebyshev distance, tolerance `r`.
fn template_matches(x: &[f64], m: usize, r: f64) -> (Vec<u32>, Vec<u32>) {
    let n = x.len();
    let count_m = n - m + 1;
    let count_m1 = n - m;
    let mut cm = vec![0u32; count_m];
    let mut cm1 = vec![0u32; count_m1];
    for i in 0..count_m {
        // j == i always matches
        cm[i] += 1;
        if i < count_m1 {
            cm1[i] += 1;
        }
        for j in (i + 1)..count_m {
            if (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r) {
                cm[i] += 1;
                cm[j] += 1;
                if j < count_m1 && (x[i + m] - x[j + m]).abs() <= r {
                    cm1[i] += 1;
                    cm1[j] += 1;
                }
            }
        }
    }
    (cm, cm1)
}

/// Approximate entropy `Phi(m) - Phi(m + 1)` with self-matches included.
pub fn approx_entropy(x: &[f64], m: usize, r_multiple: f64) -> Result<f64> {
    if m < 1 {
        return Err(ComplexityError::Param("m must be at least 1".into()));
    }
    if x.len() <= m + 1 {
        return Err(ComplexityError::TooShort { len: x.len(), need: m + 2 });
    }
    let r = tolerance(x, r_multiple)?;
    let (cm, cm1) = template_matches(x, m, r);
    let phi = |counts: &[u32]| {
        let total = counts.len() as f64;
        counts.iter().map(|&c| (c as f64 / total).ln()).sum::<f64>() / total
    };
    Ok(phi(&cm) - phi(&cm1))
}

/// Sample entropy `-ln(A / B)` at an absolute tolerance, over the first
/// `n - m` templates, self-matches excluded. `None` when no template pair
/// matches at length `m` or `m + 1`.
pub fn sample_entropy_abs(x: &[f64], m: usize, r: f64) -> Option<f64> {
    let n = x.len();
    if n < m + 2 {
        return None;
    }
    let templates = n - m;
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..templates {
        for j in (i + 1)..templates {
            if (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r) {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    if a == 0 || b == 0 {
        None
    } else {
        Some(-(a as f64 / b as f64).ln())
    }
}

/// Sample entropy with tolerance `r_multiple` times the sample std.
pub fn sample_entropy(x: &[f64], m: usize, r_multiple: f64) -> Result<Option<f64>> {
    if m < 1 {
        return Err(ComplexityError::Param("m must be at least 1".into()));
    }
    let r = tolerance(x, r_multiple)?;
    Ok(sample_entropy_abs(x, m, r))
}

/// Largest ordinal order accepted; `m!` must fit the pattern index.
pub const MAX_ORDINAL_ORDER: usize = 20;

/// Lehmer-code index of the ordinal pattern of `window`; ties are ranked by
/// position.
fn ordinal_index(window: &[f64]) -> u64 {
    let m = window.len();
    let mut index = 0u64;
    for i in 0..m {
        // count later elements that rank below element i
        let smaller = (i + 1..m)
            .filter(|&j| window[j] < window[i])
            .count() as u64;
        index = index * (m - i) as u64 + smaller;
    }
    index
}

fn factorial(m: usize) -> f64 {
    (2..=m).map(|v| v as f64).product()
}

/// Shannon entropy (nats) of the ordinal-pattern distribution, optionally
/// divided by `ln(m!)`.
pub fn permutation_entropy(x: &[f64], m: usize, tau: usize, normalize: bool) -> Result<f64> {
    if !(2..=MAX_ORDINAL_ORDER).contains(&m) || tau < 1 {
        return Err(ComplexityError::Param(format!("need 2 <= m <= {MAX_ORDINAL_ORDER} and tau >= 1")));
    }
    let span = (m - 1) * tau;
    if x.len() < span + 2 {
        return Err(ComplexityError::TooShort { len: x.len(), need: span + 2 });
    }
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    let mut window = vec![0.0; m];
    let windows = x.len() - span;
    for start in 0..windows {
        for (k, w) in window.iter_mut().enumerate() {
            *w = x[start + k * tau];
        }
        *counts.entry(ordinal_index(&window)).or_default() += 1;
    }
    let total = windows as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    // -0.0 from a single pattern
    let h = h.max(0.0);
    Ok(if normalize { h / factorial(m).ln() } else { h })
}

/// 1 where the sample exceeds the median, else 0.
pub fn binarize_median(x: &[f64]) -> Vec<u8> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = crate::preprocess::median_sorted(&sorted);
    x.iter().map(|&v| u8::from(v > med)).collect()
}

/// LZ76 phrase count of a symbol sequence (exhaustive-history parsing,
/// Kaspar-Schuster scan). A trailing phrase that copies history is counted.
pub fn lz76_phrase_count(s: &[u8]) -> usize {
    let n = s.len();
    if n <= 1 {
        return n;
    }
    let (mut c, mut l, mut i, mut k, mut k_max) = (1usize, 1usize, 0usize, 1usize, 1usize);
    loop {
        if s[i + k - 1] == s[l + k - 1] {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        } else {
            k_max = k_max.max(k);
            i += 1;
            if i == l {
                c += 1;
                l += k_max;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                k_max = 1;
            } else {
                k = 1;
            }
        }
    }
    c
}

/// Median-binarized LZ76 complexity normalized as `c(n) * log2(n) / n`.
pub fn lz_complexity(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(ComplexityError::TooShort { len: n, need: 2 });
    }
    let c = lz76_phrase_count(&binarize_median(x)) as f64;
    Ok(c * (n as f64).log2() / n as f64)
}

/// Means of consecutive non-overlapping windows of width `scale`.
pub fn coarse_grain(x: &[f64], scale: usize) -> Vec<f64> {
    x.chunks_exact(scale)
        .map(|w| w.iter().sum::<f64>() / scale as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleEntropy {
    pub scales: Vec<usize>,
    /// Sample entropy per scale; `None` where undefined.
    pub curve: Vec<Option<f64>>,
    /// Mean over the defined scales.
    pub scalar: Option<f64>,
}

/// Sample entropy of coarse-grained copies of `x`, with the tolerance fixed
/// at `r_multiple` times the std of the original series.
pub fn multiscale_entropy(x: &[f64], scales: &[usize], m: usize, r_multiple: f64) -> Result<MultiscaleEntropy> {
    if m < 1 || scales.is_empty() || scales.contains(&0) {
        return Err(ComplexityError::Param("need m >= 1 and positive scales".into()));
    }
    let r = tolerance(x, r_multiple)?;
    let max_scale = *scales.iter().max().unwrap_or(&1);
    if x.len() / max_scale <= 10 * (m + 1) {
        log::debug!(
            "coarsest scale {max_scale} leaves {} points, below the recommended {}",
            x.len() / max_scale,
            10 * (m + 1) + 1
        );
    }
    let curve: Vec<Option<f64>> = scales
        .iter()
        .map(|&s| {
            if s == 1 {
                sample_entropy_abs(x, m, r)
            } else {
                sample_entropy_abs(&coarse_grain(x, s), m, r)
            }
        })
        .collect();
    let defined: Vec<f64> = curve.iter().flatten().copied().collect();
    let scalar = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(MultiscaleEntropy {
        scales: scales.to_vec(),
        curve,
        scalar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityFeatures {
    pub hd: Option<f64>,
    pub apen: Option<f64>,
    pub permen: Option<f64>,
    pub lzc: Option<f64>,
    pub mse: MultiscaleEntropy,
}

/// Every single-channel measure; a failing measure becomes `None` rather than
/// failing the rest.
pub fn complexity_features(x: &[f64], params: &ComplexityParams) -> Result<ComplexityFeatures> {
    params.validate()?;
    let mse = multiscale_entropy(x, &params.mse_scales, params.mse_m, params.mse_r).unwrap_or_else(|e| {
        log::debug!("multiscale entropy unavailable: {e}");
        MultiscaleEntropy {
            scales: params.mse_scales.clone(),
            curve: vec![None; params.mse_scales.len()],
            scalar: None,
        }
    });
    Ok(ComplexityFeatures {
        hd: higuchi_fd(x, params.hd_kmax).ok(),
        apen: approx_entropy(x, params.apen_m, params.apen_r).ok(),
        permen: permutation_entropy(x, params.permen_m, params.permen_tau, true).ok(),
        lzc: lz_complexity(x).ok(),
        mse,
    })
}
