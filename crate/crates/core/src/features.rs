//! Baseline features (amplitude, RR interval, spectral) and the feature table
//! that carries per-record values between extraction, testing, and modelling.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::ingest::{BinaryLabel, Superclass};
use crate::preprocess::{median_sorted, PeakTrain, Signal};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub const BASELINE_FEATURES: [&str; 11] = [
    "amp_mean",
    "amp_median",
    "amp_std",
    "rr_mean",
    "rr_median",
    "rr_std",
    "f1",
    "f2",
    "p_f1",
    "p_f2",
    "p_f1_over_p_2f1",
];

pub const COMPLEXITY_FEATURES: [&str; 11] = [
    "hd", "apen", "permen", "mse", "lzc", "det", "lam", "dbyl", "tt", "d_ent", "v_ent",
];

pub const CROSS_FEATURES: [&str; 6] = [
    "rho_ii_avl",
    "rho_ii_v2",
    "rho_v2_avl",
    "mi_ii_avl",
    "mi_ii_v2",
    "mi_v2_avl",
];

pub const META_FEATURES: [&str; 3] = ["age", "sex", "weight"];

/// Every extracted column, in table order.
pub fn all_feature_names() -> Vec<&'static str> {
    BASELINE_FEATURES
        .iter()
        .chain(&COMPLEXITY_FEATURES)
        .chain(&CROSS_FEATURES)
        .chain(&META_FEATURES)
        .copied()
        .collect()
}

/// Cumulative feature groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureSet {
    Baseline,
    Complexity,
    Cross,
    Meta,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::Baseline,
        FeatureSet::Complexity,
        FeatureSet::Cross,
        FeatureSet::Meta,
    ];

    pub fn columns(self) -> Vec<&'static str> {
        let mut cols: Vec<&'static str> = BASELINE_FEATURES.to_vec();
        if self >= FeatureSet::Complexity {
            cols.extend(COMPLEXITY_FEATURES);
        }
        if self >= FeatureSet::Cross {
            cols.extend(CROSS_FEATURES);
        }
        if self >= FeatureSet::Meta {
            cols.extend(META_FEATURES);
        }
        cols
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Baseline => "baseline",
            FeatureSet::Complexity => "complexity",
            FeatureSet::Cross => "cross",
            FeatureSet::Meta => "meta",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim_start_matches('+') {
            "baseline" => Ok(FeatureSet::Baseline),
            "complexity" => Ok(FeatureSet::Complexity),
            "cross" => Ok(FeatureSet::Cross),
            "meta" => Ok(FeatureSet::Meta),
            other => Err(format!(
                "unknown feature set `{other}` (expected baseline, complexity, cross, or meta)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeStats {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (divisor n-1); 0 for a single sample.
    pub std: f64,
}

pub fn amplitude_stats(x: &[f64]) -> Option<AmplitudeStats> {
    if x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let std = if x.len() > 1 {
        (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(AmplitudeStats {
        mean,
        median: median_sorted(&sorted),
        std,
    })
}

/// Mean, median, and sample std of RR intervals (seconds); needs at least two.
pub fn rr_stats(intervals: &[f64]) -> Option<AmplitudeStats> {
    if intervals.len() < 2 {
        return None;
    }
    amplitude_stats(intervals)
}

pub fn rr_stats_of(peaks: &PeakTrain) -> Option<AmplitudeStats> {
    rr_stats(&peaks.rr_intervals)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub f1: f64,
    pub f2: f64,
    pub p_f1: f64,
    pub p_f2: f64,
    /// `P(f1) / P(2 f1)`; `None` above Nyquist or when `P(2 f1)` is zero.
    pub harmonic_ratio: Option<f64>,
}

pub const MIN_SPECTRAL_LEN: usize = 64;

/// One-sided Hann-windowed periodogram, bins `0..=n/2`.
pub fn periodogram(x: &[f64], sampling_rate: f64) -> Vec<f64> {
    let n = x.len();
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let scale = sampling_rate * window.iter().map(|w| w * w).sum::<f64>();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .zip(&window)
        .map(|(v, w)| Complex::new(v * w, 0.0))
        .collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    (0..=n / 2)
        .map(|k| {
            let p = buf[k].norm_sqr() / scale;
            // one-sided: double everything except DC and an even-length Nyquist bin
            if k == 0 || (n % 2 == 0 && k == n / 2) {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Two dominant spectral peaks (DC excluded; the second may not sit next to
/// the first) and the first peak's harmonic ratio.
pub fn spectral_features(signal: &Signal) -> Option<SpectralFeatures> {
    let n = signal.len();
    if n < MIN_SPECTRAL_LEN {
        return None;
    }
    let fs = signal.sampling_rate();
    let power = periodogram(signal.samples(), fs);
    let argmax = |skip: &dyn Fn(usize) -> bool| {
        (1..power.len())
            .filter(|k| !skip(*k))
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if power[b] >= power[k] => Some(b),
                _ => Some(k),
            })
    };
    let k1 = argmax(&|_| false)?;
    let k2 = argmax(&|k| k.abs_diff(k1) <= 1)?;
    let hz = |k: usize| k as f64 * fs / n as f64;
    let k_harm = 2 * k1;
    let harmonic_ratio = power
        .get(k_harm)
        .filter(|p| **p > 0.0)
        .map(|p| power[k1] / p);
    Some(SpectralFeatures {
        f1: hz(k1),
        f2: hz(k2),
        p_f1: power[k1],
        p_f2: power[k2],
        harmonic_ratio,
    })
}

/// One record's extracted values, aligned with [`all_feature_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub record_id: String,
    pub strat_fold: u8,
    pub binary_label: BinaryLabel,
    /// Single label by priority (MI > STTC > CD > HYP > NORM).
    pub superclass: Superclass,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    /// Parameter snapshot (`key=value`) written next to the table.
    pub provenance: Vec<(String, String)>,
}

/// Record-id ordering: numeric ids numerically, then lexicographic.
pub fn record_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Fraction of missing values above which a row is dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

/// Keep the columns of `set` from full-width rows, dropping rows with more
/// than half their values missing. Rows come out in record-id order.
pub fn assemble(rows: &[FeatureRow], names: &[String], set: FeatureSet) -> FeatureTable {
    let wanted = set.columns();
    let positions: Vec<usize> = wanted
        .iter()
        .map(|w| {
            names
                .iter()
                .position(|n| n == w)
                .unwrap_or_else(|| panic!("feature `{w}` missing from the source table"))
        })
        .collect();
    let mut out: Vec<FeatureRow> = Vec::with_capacity(rows.len());
    for row in rows {
        let values: Vec<Option<f64>> = positions.iter().map(|&p| row.values[p]).collect();
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing as f64 > MAX_MISSING_FRACTION * values.len() as f64 {
            log::info!(
                "dropping record {} for feature set {set}: {missing} of {} features missing",
                row.record_id,
                values.len()
            );
            continue;
        }
        out.push(FeatureRow {
            values,
            ..row.clone()
        });
    }
    out.sort_by(|a, b| record_order(&a.record_id, &b.record_id));
    FeatureTable {
        feature_names: wanted.iter().map(|s| s.to_string()).collect(),
        rows: out,
        provenance: vec![("feature_set".into(), set.to_string())],
    }
}

const FIXED_COLUMNS: [&str; 4] = ["record_id", "strat_fold", "binary_label", "superclass"];

impl FeatureTable {
    pub fn empty(feature_names: Vec<String>) -> Self {
        FeatureTable {
            feature_names,
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn select(&self, set: FeatureSet) -> FeatureTable {
        let mut t = assemble(&self.rows, &self.feature_names, set);
        t.provenance.extend(self.provenance.iter().cloned());
        t
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// CSV text: an optional `# config_hash=...` line, a header, one row per
    /// record, missing values as empty cells. Floats use the shortest
    /// representation that round-trips.
    pub fn to_csv_string(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = config_hash {
            out.push_str(&format!("# config_hash={h}\n"));
        }
        let header: Vec<&str> = FIXED_COLUMNS
            .iter()
            .copied()
            .chain(self.feature_names.iter().map(String::as_str))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}",
                r.record_id,
                r.strat_fold,
                r.binary_label.as_str(),
                r.superclass
            ));
            for v in &r.values {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<(), FeatureError> {
        fs::write(path, self.to_csv_string(config_hash)).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Plain-text `key=value` companion file.
    pub fn write_metadata(&self, path: &Path) -> Result<(), FeatureError> {
        let io = |source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = fs::File::create(path).map_err(io)?;
        for (k, v) in &self.provenance {
            writeln!(f, "{k}={v}").map_err(io)?;
        }
        Ok(())
    }

    /// Read a table written by [`FeatureTable::write_csv`]; returns the
    /// embedded config hash when present.
    pub fn read_csv(path: &Path) -> Result<(FeatureTable, Option<String>), FeatureError> {
        let io = |source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        };
        let fmt_err = |reason: String| FeatureError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let file = fs::File::open(path).map_err(io)?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first).map_err(io)?;
        let hash = first
            .trim()
            .strip_prefix("# config_hash=")
            .map(str::to_string);

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|source| FeatureError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        let headers = reader
            .headers()
            .map_err(|source| FeatureError::Csv {
                path: path.to_path_buf(),
                source,
            })?
            .clone();
        if headers.len() < FIXED_COLUMNS.len()
            || headers.iter().zip(FIXED_COLUMNS).any(|(h, want)| h != want)
        {
            return Err(fmt_err(format!(
                "header must start with {}",
                FIXED_COLUMNS.join(",")
            )));
        }
        let feature_names: Vec<String> = headers.iter().skip(FIXED_COLUMNS.len()).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|source| FeatureError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            let line = i + 2;
            let bad = |what: &str, v: &str| fmt_err(format!("row {line}: bad {what} `{v}`"));
            let strat_fold = rec[1].parse().map_err(|_| bad("strat_fold", &rec[1]))?;
            let binary_label = rec[2].parse().map_err(|_| bad("binary_label", &rec[2]))?;
            let superclass = rec[3].parse().map_err(|_| bad("superclass", &rec[3]))?;
            let values = rec
                .iter()
                .skip(FIXED_COLUMNS.len())
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .map(Some)
                            .ok_or_else(|| bad("value", cell))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(FeatureRow {
                record_id: rec[0].to_string(),
                strat_fold,
                binary_label,
                superclass,
                values,
            });
        }
        Ok((
            FeatureTable {
                feature_names,
                rows,
                provenance: Vec::new(),
            },
            hash,
        ))
    }
}
