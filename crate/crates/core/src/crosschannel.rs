//! Dependence between leads: Spearman rank correlation and a fixed-bin
//! histogram estimate of mutual information (nats).

use thiserror::Error;

use crate::ranks::midranks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrossError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} samples, got {len}")]
    TooShort { len: usize, need: usize },
    #[error("correlation undefined for a constant series")]
    Constant,
    #[error("need at least 2 bins, got {0}")]
    Bins(usize),
}

pub type Result<T> = std::result::Result<T, CrossError>;

pub const DEFAULT_BINS: usize = 16;

fn check_lengths(x: &[f64], y: &[f64], need: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(CrossError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < need {
        return Err(CrossError::TooShort { len: x.len(), need });
    }
    Ok(())
}

/// Pearson correlation of the mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 3)?;
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    // mid-ranks always average to (n + 1) / 2
    let centre = (x.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - centre, b - centre);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CrossError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation {
    pub nats: f64,
    /// At least one input was constant; `nats` is 0.
    pub degenerate: bool,
}

/// Equal-width bin index over `[min, max]`; `None` for a constant series.
fn bin_indices(x: &[f64], bins: usize) -> Option<Vec<usize>> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = hi - lo;
    if !(width > 0.0) {
        return None;
    }
    Some(
        x.iter()
            .map(|&v| (((v - lo) / width * bins as f64) as usize).min(bins - 1))
            .collect(),
    )
}

fn plogp_sum(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Shannon entropy (nats) of the equal-width histogram of `x`.
pub fn histogram_entropy(x: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(CrossError::Bins(bins));
    }
    let Some(idx) = bin_indices(x, bins) else {
        return Ok(0.0);
    };
    let mut counts = vec![0usize; bins];
    idx.iter().for_each(|&i| counts[i] += 1);
    Ok(plogp_sum(counts.into_iter(), x.len() as f64))
}

/// Plug-in mutual information of the `bins x bins` joint histogram, each axis
/// spanning its own series' range. No bias correction.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<MutualInformation> {
    check_lengths(x, y, 1)?;
    if bins < 2 {
        return Err(CrossError::Bins(bins));
    }
    let (Some(ix), Some(iy)) = (bin_indices(x, bins), bin_indices(y, bins)) else {
        return Ok(MutualInformation {
            nats: 0.0,
            degenerate: true,
        });
    };
    let n = x.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (&a, &b) in ix.iter().zip(&iy) {
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let p = c as f64 / n;
            mi += p * (c as f64 * n / (px[a] as f64 * py[b] as f64)).ln();
        }
    }
    Ok(MutualInformation {
        nats: mi.max(0.0),
        degenerate: false,
    })
}

/// Spearman and mutual information between leads II, AVL, and V2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CrossFeatures {
    pub rho_ii_avl: Option<f64>,
    pub rho_ii_v2: Option<f64>,
    pub rho_v2_avl: Option<f64>,
    pub mi_ii_avl: Option<f64>,
    pub mi_ii_v2: Option<f64>,
    pub mi_v2_avl: Option<f64>,
}

pub fn cross_features(ii: &[f64], avl: &[f64], v2: &[f64], bins: usize) -> CrossFeatures {
    let rho = |a: &[f64], b: &[f64]| spearman(a, b).ok();
    let mi = |a: &[f64], b: &[f64]| {
        mutual_information(a, b, bins)
            .ok()
            .filter(|m| !m.degenerate)
            .map(|m| m.nats)
    };
    CrossFeatures {
        rho_ii_avl: rho(ii, avl),
        rho_ii_v2: rho(ii, v2),
        rho_v2_avl: rho(v2, avl),
        mi_ii_avl: mi(ii, avl),
        mi_ii_v2: mi(ii, v2),
        mi_v2_avl: mi(v2, avl),
    }
}
