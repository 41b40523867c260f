//! Rank-based hypothesis tests and the per-class z heatmap.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::features::FeatureTable;
use crate::ingest::{BinaryLabel, Superclass};
use crate::ranks::midranks;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    EmptySample(usize),
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("exact Mann-Whitney distribution requires tie-free samples")]
    ExactWithTies,
    #[error("exact distribution for sizes {0} and {1} is too large")]
    ExactTooLarge(usize, usize),
    #[error("reference class {0} has no members")]
    NoReference(Superclass),
}

/// Below this group size the normal approximation is flagged.
pub const MIN_ASYMPTOTIC_N: usize = 20;
/// Largest smaller-group size that uses the exact distribution under `Auto`.
pub const MAX_EXACT_N: usize = 8;
pub const DEFAULT_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwOptions {
    pub continuity: bool,
    pub method: Method,
}

impl Default for MwOptions {
    fn default() -> Self {
        MwOptions {
            continuity: true,
            method: Method::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// z for Mann-Whitney, H for Kruskal-Wallis.
    pub statistic: f64,
    pub p_value: f64,
    pub n_per_group: Vec<usize>,
    /// Mann-Whitney U of the first sample.
    pub u: Option<f64>,
    /// `Exact` or `Asymptotic`, whichever produced the p-value.
    pub method: Method,
}

impl TestResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn two_sided_normal(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Null distribution of U (count of a-over-b pairs) for tie-free samples of
/// sizes `m` and `n`, as arrangement counts: index `u` holds how many of the
/// `C(m+n, m)` orderings give `U = u`. `None` when the total overflows.
///
/// The counts are the coefficients of the Gaussian binomial
/// `prod_{i=1..m} (1 - q^(n+i)) / (1 - q^i)`.
pub fn exact_u_counts(m: usize, n: usize) -> Option<Vec<u128>> {
    let (m, n) = (m.min(n), m.max(n));
    let mut total: i128 = 1;
    for i in 1..=m {
        total = total.checked_mul((n + i) as i128)? / i as i128;
    }
    let width = m * n + 1;
    let mut c = vec![0i128; width];
    c[0] = 1;
    for i in 1..=m {
        for k in (n + i..width).rev() {
            c[k] -= c[k - n - i];
        }
        for k in i..width {
            c[k] += c[k - i];
        }
    }
    debug_assert_eq!(c.iter().sum::<i128>(), total);
    Some(c.into_iter().map(|v| v as u128).collect())
}

/// Two-sided exact p-value `min(1, 2 min(P(U <= u), P(U >= u)))`.
pub fn exact_p_value(counts: &[u128], u: usize) -> f64 {
    let total: u128 = counts.iter().sum();
    let lower: u128 = counts[..=u].iter().sum();
    let upper: u128 = counts[u..].iter().sum();
    let tail = lower.min(upper);
    if 2 * tail >= total {
        1.0
    } else {
        (2 * tail) as f64 / total as f64
    }
}

/// Two-sided Mann-Whitney test of `a` against `b`.
///
/// z is negative when `a` has the higher mean rank.
pub fn mann_whitney(a: &[f64], b: &[f64], opts: MwOptions) -> Result<TestResult, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample(0));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample(1));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let (f1, f2, n) = (n1 as f64, n2 as f64, (n1 + n2) as f64);
    let mu = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let dev = u - mu;
    let z = if var <= 0.0 {
        0.0
    } else {
        let mag = if opts.continuity {
            (dev.abs() - 0.5).max(0.0)
        } else {
            dev.abs()
        };
        -dev.signum() * mag / var.sqrt()
    };
    // avoid -0.0 in reports
    let z = if z == 0.0 { 0.0 } else { z };

    let ties = tie_term > 0.0;
    // Auto falls back to the normal tail when the arrangement count overflows
    let counts = match opts.method {
        Method::Auto if !ties && n1.min(n2) <= MAX_EXACT_N => exact_u_counts(n1, n2),
        Method::Exact if ties => return Err(StatsError::ExactWithTies),
        Method::Exact => Some(exact_u_counts(n1, n2).ok_or(StatsError::ExactTooLarge(n1, n2))?),
        _ => None,
    };
    let exact = counts.is_some();
    let p_value = if let Some(counts) = counts {
        exact_p_value(&counts, u.round() as usize)
    } else if var <= 0.0 {
        1.0
    } else {
        two_sided_normal(z)
    };
    Ok(TestResult {
        statistic: z,
        p_value,
        n_per_group: vec![n1, n2],
        u: Some(u),
        method: if exact { Method::Exact } else { Method::Asymptotic },
    })
}

/// Tie-corrected Kruskal-Wallis H with a chi-squared p-value on k-1 degrees
/// of freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptySample(i));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    let (ranks, tie_term) = midranks(&pooled);
    let mut offset = 0;
    let mut sum_sq = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum_sq += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum_sq - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term / (n * n * n - n);
    let (h, p) = if correction <= 0.0 {
        (0.0, 1.0)
    } else {
        let h = (h_raw / correction).max(0.0);
        let chi = ChiSquared::new((groups.len() - 1) as f64).expect("positive dof");
        (h, chi.sf(h).clamp(0.0, 1.0))
    };
    Ok(TestResult {
        statistic: h,
        p_value: p,
        n_per_group: groups.iter().map(|g| g.len()).collect(),
        u: None,
        method: Method::Asymptotic,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapCell {
    pub z: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    /// Class smaller than [`MIN_ASYMPTOTIC_N`].
    pub small_sample: bool,
}

impl HeatmapCell {
    /// Displayed value: z when significant at `alpha`, otherwise 0.
    pub fn shown(&self, alpha: f64) -> f64 {
        match (self.z, self.p) {
            (Some(z), Some(p)) if p < alpha => z,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub features: Vec<String>,
    pub classes: [Superclass; 4],
    pub cells: Vec<[HeatmapCell; 4]>,
    pub alpha: f64,
}

impl Heatmap {
    pub fn shape(&self) -> (usize, usize) {
        (self.features.len(), self.classes.len())
    }

    pub fn matrix(&self) -> Vec<[f64; 4]> {
        self.cells
            .iter()
            .map(|row| std::array::from_fn(|c| row[c].shown(self.alpha)))
            .collect()
    }

    pub fn to_csv_string(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = config_hash {
            out.push_str(&format!("# config_hash={h}\n"));
        }
        out.push_str("feature");
        for c in &self.classes {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (name, row) in self.features.iter().zip(self.matrix()) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn column_values(table: &FeatureTable, col: usize, keep: impl Fn(usize) -> bool) -> Vec<f64> {
    table
        .rows
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .filter_map(|(_, r)| r.values[col])
        .collect()
}

fn class_values(table: &FeatureTable, col: usize, class: Superclass) -> Vec<f64> {
    column_values(table, col, |i| table.rows[i].superclass == class)
}

fn heatmap_row(table: &FeatureTable, col: usize, norm: &[f64]) -> [HeatmapCell; 4] {
    std::array::from_fn(|c| {
        let class = Superclass::DISEASES[c];
        let vals = class_values(table, col, class);
        let small_sample = vals.len() < MIN_ASYMPTOTIC_N;
        match mann_whitney(&vals, norm, MwOptions::default()) {
            Ok(t) => HeatmapCell {
                z: Some(t.statistic),
                p: Some(t.p_value),
                n: vals.len(),
                small_sample,
            },
            Err(_) => HeatmapCell {
                z: None,
                p: None,
                n: vals.len(),
                small_sample,
            },
        }
    })
}

/// Mann-Whitney z of each disease class against NORM for every feature,
/// with cells at `p >= alpha` shown as 0.
pub fn pairwise_heatmap(table: &FeatureTable, alpha: f64) -> Result<Heatmap, StatsError> {
    let cells: Vec<[HeatmapCell; 4]> = (0..table.feature_names.len())
        .into_par_iter()
        .map(|col| {
            let norm = class_values(table, col, Superclass::Norm);
            if norm.is_empty() {
                return Err(StatsError::NoReference(Superclass::Norm));
            }
            Ok(heatmap_row(table, col, &norm))
        })
        .collect::<Result<_, _>>()?;
    for (name, row) in table.feature_names.iter().zip(&cells) {
        for (class, cell) in Superclass::DISEASES.iter().zip(row) {
            if cell.small_sample {
                log::warn!(
                    "{name}: {class} has {} members; normal approximation is unreliable",
                    cell.n
                );
            }
        }
    }
    Ok(Heatmap {
        features: table.feature_names.clone(),
        classes: Superclass::DISEASES,
        cells,
        alpha,
    })
}

/// One line of the stats report.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub feature: String,
    /// Diseased vs healthy.
    pub binary: Option<TestResult>,
    /// Across the five superclasses.
    pub kruskal: Option<TestResult>,
    pub per_class: [HeatmapCell; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub rows: Vec<FeatureStats>,
    pub alpha: f64,
}

pub fn stats_report(table: &FeatureTable, alpha: f64) -> Result<StatsReport, StatsError> {
    let heat = pairwise_heatmap(table, alpha)?;
    let rows = (0..table.feature_names.len())
        .into_par_iter()
        .map(|col| {
            let diseased = column_values(table, col, |i| {
                table.rows[i].binary_label == BinaryLabel::Diseased
            });
            let healthy = column_values(table, col, |i| {
                table.rows[i].binary_label == BinaryLabel::Healthy
            });
            let binary = mann_whitney(&diseased, &healthy, MwOptions::default()).ok();
            let groups: Vec<Vec<f64>> = Superclass::ALL
                .iter()
                .map(|c| class_values(table, col, *c))
                .filter(|g| !g.is_empty())
                .collect();
            let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
            FeatureStats {
                feature: table.feature_names[col].clone(),
                binary,
                kruskal: kruskal_wallis(&refs).ok(),
                per_class: heat.cells[col].clone(),
            }
        })
        .collect();
    Ok(StatsReport { rows, alpha })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl StatsReport {
    pub fn to_csv_string(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = config_hash {
            out.push_str(&format!("# config_hash={h}\n"));
        }
        out.push_str("feature,z,p_mw,H,p_kw");
        for c in Superclass::DISEASES {
            out.push_str(&format!(",z_{c}"));
        }
        out.push_str(",significant_mw,significant_kw,small_classes\n");
        for r in &self.rows {
            let small: Vec<String> = Superclass::DISEASES
                .iter()
                .zip(&r.per_class)
                .filter(|(_, c)| c.small_sample)
                .map(|(s, _)| s.to_string())
                .collect();
            out.push_str(&format!(
                "{},{},{},{},{}",
                r.feature,
                cell(r.binary.as_ref().map(|t| t.statistic)),
                cell(r.binary.as_ref().map(|t| t.p_value)),
                cell(r.kruskal.as_ref().map(|t| t.statistic)),
                cell(r.kruskal.as_ref().map(|t| t.p_value)),
            ));
            for c in &r.per_class {
                out.push_str(&format!(",{}", cell(c.z)));
            }
            out.push_str(&format!(
                ",{},{},{}\n",
                r.binary.as_ref().is_some_and(|t| t.significant(self.alpha)),
                r.kruskal.as_ref().is_some_and(|t| t.significant(self.alpha)),
                small.join(";")
            ));
        }
        out
    }
}
