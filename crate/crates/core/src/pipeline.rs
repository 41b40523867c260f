//! Per-record feature extraction and the parallel pass over a dataset.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::complexity::complexity_features;
use crate::config::RunConfig;
use crate::crosschannel::cross_features;
use crate::features::{
    all_feature_names, amplitude_stats, record_order, rr_stats_of, spectral_features, FeatureRow,
    FeatureTable,
};
use crate::ingest::{DatasetIndex, EcgRecord, IngestError, Sex};
use crate::preprocess::{detect_r_peaks, detrend_polynomial, standardize, Signal, SignalError};
use crate::recurrence::rqa_features;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("lead {0} not present")]
    MissingLead(String),
    #[error("lead {lead}: {source}")]
    Signal {
        lead: String,
        #[source]
        source: SignalError,
    },
    #[error("record has no label")]
    Unlabeled,
    #[error("complexity parameters: {0}")]
    Params(String),
}

/// Detrend and standardize one lead; also returns the detrended signal.
pub fn prepare_lead(record: &EcgRecord, name: &str, order: usize) -> Result<(Signal, Signal), RecordError> {
    let samples = record
        .lead(name)
        .ok_or_else(|| RecordError::MissingLead(name.to_string()))?;
    let wrap = |source| RecordError::Signal {
        lead: name.to_string(),
        source,
    };
    let raw = Signal::new(samples.to_vec(), record.sampling_rate).map_err(wrap)?;
    let detrended = detrend_polynomial(&raw, order).map_err(wrap)?;
    let standardized = standardize(&detrended).map_err(wrap)?;
    Ok((detrended, standardized))
}

/// All 31 values for one record, in [`all_feature_names`] order. Individual
/// measures that cannot be computed come back as `None`.
pub fn extract_values(record: &EcgRecord, cfg: &RunConfig) -> Result<Vec<Option<f64>>, RecordError> {
    let (detrended, main) = prepare_lead(record, &cfg.complexity_lead, cfg.detrend_order)?;
    let mut values: Vec<Option<f64>> = Vec::with_capacity(31);

    let amp = amplitude_stats(detrended.samples());
    values.extend([amp.map(|a| a.mean), amp.map(|a| a.median), amp.map(|a| a.std)]);

    let rr = match detect_r_peaks(&main) {
        Ok(peaks) => rr_stats_of(&peaks),
        Err(e) => {
            log::debug!("{}: {e}", record.record_id);
            None
        }
    };
    if rr.is_none() {
        log::info!("{}: fewer than two RR intervals; RR features missing", record.record_id);
    }
    values.extend([rr.map(|a| a.mean), rr.map(|a| a.median), rr.map(|a| a.std)]);

    let spec = spectral_features(&main);
    values.extend([
        spec.map(|s| s.f1),
        spec.map(|s| s.f2),
        spec.map(|s| s.p_f1),
        spec.map(|s| s.p_f2),
        spec.and_then(|s| s.harmonic_ratio),
    ]);

    let cx = complexity_features(main.samples(), &cfg.complexity)
        .map_err(|e| RecordError::Params(e.to_string()))?;
    values.extend([cx.hd, cx.apen, cx.permen, cx.mse.scalar, cx.lzc]);

    match rqa_features(main.samples(), &cfg.rqa) {
        Ok((r, _tau)) => values.extend([Some(r.det), Some(r.lam), r.dbyl, r.tt, Some(r.d_ent), Some(r.v_ent)]),
        Err(e) => {
            log::info!("{}: recurrence measures missing: {e}", record.record_id);
            values.extend([None; 6]);
        }
    }

    let [a, b, c] = &cfg.cross_leads;
    let lead = |name: &str| -> Option<Signal> {
        if name.eq_ignore_ascii_case(&cfg.complexity_lead) {
            return Some(main.clone());
        }
        match prepare_lead(record, name, cfg.detrend_order) {
            Ok((_, s)) => Some(s),
            Err(e) => {
                log::info!("{}: {e}; cross-channel measures involving it missing", record.record_id);
                None
            }
        }
    };
    match (lead(a), lead(b), lead(c)) {
        (Some(x), Some(y), Some(z)) if x.len() == y.len() && y.len() == z.len() => {
            let cf = cross_features(x.samples(), y.samples(), z.samples(), cfg.mi_bins);
            values.extend([
                cf.rho_ii_avl,
                cf.rho_ii_v2,
                cf.rho_v2_avl,
                cf.mi_ii_avl,
                cf.mi_ii_v2,
                cf.mi_v2_avl,
            ]);
        }
        _ => values.extend([None; 6]),
    }

    values.extend([record.age, record.sex.map(Sex::code), record.weight]);
    debug_assert_eq!(values.len(), all_feature_names().len());
    Ok(values)
}

pub fn extract_row(record: &EcgRecord, cfg: &RunConfig) -> Result<FeatureRow, RecordError> {
    let binary_label = record.labels.binary.ok_or(RecordError::Unlabeled)?;
    let superclass = record.labels.primary().ok_or(RecordError::Unlabeled)?;
    Ok(FeatureRow {
        record_id: record.record_id.clone(),
        strat_fold: record.strat_fold.unwrap_or(0),
        binary_label,
        superclass,
        values: extract_values(record, cfg)?,
    })
}

#[derive(Debug)]
pub struct Extraction {
    /// Full-width table (every feature column), record-id order.
    pub table: FeatureTable,
    pub failures: Vec<(String, String)>,
    pub unlabeled: usize,
    pub multi_labeled: usize,
    pub attempted: usize,
}

impl Extraction {
    /// Clean run: at least `min_success` of labeled records extracted, or at
    /// most one failure, and at least one row.
    pub fn acceptable(&self, min_success: f64) -> bool {
        let ok = self.table.rows.len();
        ok > 0
            && (self.failures.len() <= 1 || ok as f64 >= min_success * self.attempted as f64)
    }
}

pub fn thread_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

/// Extract every labeled record of `index` under `data_dir`.
pub fn extract_dataset(index: &DatasetIndex, data_dir: &Path, cfg: &RunConfig) -> Extraction {
    let labeled: Vec<_> = index
        .rows
        .iter()
        .filter(|r| index.labels(r).is_labeled())
        .collect();
    let unlabeled = index.rows.len() - labeled.len();
    if unlabeled > 0 {
        log::info!("{unlabeled} records carry no diagnostic superclass and are excluded");
    }
    let multi_labeled = labeled
        .iter()
        .filter(|r| index.labels(r).is_multi_labeled())
        .count();

    let results: Vec<Result<FeatureRow, (String, String)>> = thread_pool(cfg.jobs).install(|| {
        labeled
            .par_iter()
            .map(|row| {
                index
                    .load_record(row, data_dir, cfg.format, cfg.csv_rate)
                    .map_err(RecordError::from)
                    .and_then(|rec| extract_row(&rec, cfg))
                    .map_err(|e| (row.record_id.clone(), e.to_string()))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err((id, reason)) => {
                log::warn!("record {id} failed: {reason}");
                failures.push((id, reason));
            }
        }
    }
    rows.sort_by(|a, b| record_order(&a.record_id, &b.record_id));
    let mut provenance = cfg.parameters();
    provenance.push(("config_hash".into(), cfg.hash()));
    Extraction {
        table: FeatureTable {
            feature_names: all_feature_names().iter().map(|s| s.to_string()).collect(),
            rows,
            provenance,
        },
        failures,
        unlabeled,
        multi_labeled,
        attempted: labeled.len(),
    }
}
