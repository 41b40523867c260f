//! Synthetic PTB-XL-shaped datasets: Gaussian-bump beats with class-specific
//! morphology, twelve leads, format-16 records, and the two metadata CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{write_statements, write_wfdb_record, IngestError, Lead, Superclass};

pub const LEAD_NAMES: [&str; 12] = [
    "I", "II", "III", "AVR", "AVL", "AVF", "V1", "V2", "V3", "V4", "V5", "V6",
];
const LEAD_GAINS: [f64; 12] = [0.6, 1.0, 0.4, -0.8, 0.3, 0.7, -0.5, 0.8, 1.1, 1.3, 1.1, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_records: usize,
    pub seed: u64,
    pub sampling_rate: f64,
    pub seconds: f64,
    /// 0-based record positions whose signal file is truncated.
    pub corrupt: Vec<usize>,
    /// Every n-th record carries only a rhythm code (no superclass).
    pub unlabeled_every: Option<usize>,
    /// Every n-th record gets a second superclass.
    pub multi_label_every: Option<usize>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_records: 10,
            seed: 7,
            sampling_rate: 100.0,
            seconds: 10.0,
            corrupt: Vec::new(),
            unlabeled_every: None,
            multi_label_every: None,
        }
    }
}

pub fn code_for(class: Superclass) -> &'static str {
    match class {
        Superclass::Norm => "NORM",
        Superclass::Mi => "IMI",
        Superclass::Sttc => "NDT",
        Superclass::Cd => "CLBBB",
        Superclass::Hyp => "LVH",
    }
}

struct Bump {
    amp: f64,
    /// Offset from the R peak, seconds.
    at: f64,
    width: f64,
}

fn morphology(class: Superclass) -> Vec<Bump> {
    let mut p = Bump { amp: 0.15, at: -0.2, width: 0.025 };
    let mut q = Bump { amp: -0.1, at: -0.035, width: 0.01 };
    let mut r = Bump { amp: 1.0, at: 0.0, width: 0.012 };
    let s = Bump { amp: -0.25, at: 0.035, width: 0.012 };
    let mut t = Bump { amp: 0.3, at: 0.28, width: 0.05 };
    match class {
        Superclass::Norm => {}
        Superclass::Mi => {
            q.amp = -0.45;
            t.amp = 0.1;
        }
        Superclass::Sttc => t.amp = -0.25,
        Superclass::Cd => {
            r.width = 0.03;
            p.amp = 0.08;
        }
        Superclass::Hyp => {
            r.amp = 2.0;
            t.amp = 0.45;
        }
    }
    vec![p, q, r, s, t]
}

/// Twelve-lead signal (millivolts) for one record of `class`.
pub fn synth_leads(class: Superclass, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Lead> {
    let n = (spec.sampling_rate * spec.seconds).round() as usize;
    let fs = spec.sampling_rate;
    let bumps = morphology(class);
    let hr_bpm = Normal::<f64>::new(70.0, 8.0).unwrap().sample(rng).clamp(45.0, 120.0);
    let jitter = if class == Superclass::Cd { 0.08 } else { 0.03 };
    let mut beats = Vec::new();
    let mut at: f64 = rng.random_range(0.1..0.6);
    while at < spec.seconds + 1.0 {
        beats.push(at);
        let rr: f64 = 60.0 / hr_bpm * (1.0 + jitter * Normal::<f64>::new(0.0, 1.0).unwrap().sample(rng));
        at += rr.max(0.3);
    }
    let clean: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            beats
                .iter()
                .filter(|b| (t - **b).abs() < 0.6)
                .flat_map(|b| bumps.iter().map(move |bump| (b, bump)))
                .map(|(b, bump)| {
                    let d = (t - b - bump.at) / bump.width;
                    bump.amp * (-0.5 * d * d).exp()
                })
                .sum()
        })
        .collect();
    let noise = Normal::new(0.0, 0.03).unwrap();
    LEAD_NAMES
        .iter()
        .zip(LEAD_GAINS)
        .map(|(name, gain)| {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let wander = rng.random_range(0.05..0.2);
            let samples = clean
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let t = i as f64 / fs;
                    gain * v + wander * (std::f64::consts::TAU * 0.3 * t + phase).sin() + noise.sample(rng)
                })
                .collect();
            Lead {
                name: name.to_string(),
                samples,
            }
        })
        .collect()
}

/// Relative signal path (no extension) for a record id.
pub fn record_path(id: usize) -> String {
    format!("records100/{:05}/{id:05}_lr", id / 1000 * 1000)
}

/// Write a dataset under `dir`; returns the metadata CSV path.
pub fn write_dataset(dir: &Path, spec: &SynthSpec) -> Result<PathBuf, IngestError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    let scp_map: BTreeMap<String, Superclass> = Superclass::ALL
        .iter()
        .map(|c| (code_for(*c).to_string(), *c))
        .collect();
    write_statements(&dir.join("scp_statements.csv"), &scp_map)?;

    let mut meta = String::from("ecg_id,patient_id,age,sex,height,weight,scp_codes,strat_fold,filename_lr\n");
    for pos in 0..spec.n_records {
        let id = pos + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ id as u64);
        let class = Superclass::ALL[pos % 5];
        let unlabeled = spec.unlabeled_every.is_some_and(|k| k > 0 && pos % k == k - 1);
        let mut codes = vec![];
        if !unlabeled {
            codes.push(format!("'{}': 100.0", code_for(class)));
            if class != Superclass::Norm && spec.multi_label_every.is_some_and(|k| k > 0 && pos % k == k - 1) {
                let other = Superclass::ALL[1 + (pos / 5) % 4];
                if other != class {
                    codes.push(format!("'{}': 80.0", code_for(other)));
                }
            }
        }
        codes.push("'SR': 0.0".into());

        let leads = synth_leads(class, spec, &mut rng);
        let rel = record_path(id);
        let full = dir.join(&rel);
        let parent = full.parent().expect("record path has a parent");
        fs::create_dir_all(parent).map_err(io(parent))?;
        let name = full.file_name().unwrap().to_string_lossy().into_owned();
        write_wfdb_record(parent, &name, spec.sampling_rate, &leads, 1000.0)?;
        if spec.corrupt.contains(&pos) {
            let dat = parent.join(format!("{name}.dat"));
            let bytes = fs::read(&dat).map_err(io(&dat))?;
            fs::write(&dat, &bytes[..bytes.len() / 3]).map_err(io(&dat))?;
        }

        let age = rng.random_range(25..85);
        let sex = rng.random_range(0..2);
        let weight = if pos % 4 == 3 {
            String::new()
        } else {
            format!("{:.1}", rng.random_range(50.0..110.0))
        };
        meta.push_str(&format!(
            "{id},{},{age}.0,{sex},,{weight},\"{{{}}}\",{},{rel}\n",
            1000 + id,
            codes.join(", "),
            (pos / 5) % 10 + 1
        ));
    }
    let path = dir.join("ptbxl_database.csv");
    fs::write(&path, meta).map_err(io(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_index;

    #[test]
    fn dataset_round_trips_through_the_index() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_records: 12,
            unlabeled_every: Some(6),
            multi_label_every: Some(4),
            ..Default::default()
        };
        let meta = write_dataset(dir.path(), &spec).unwrap();
        let index = load_index(&meta, &dir.path().join("scp_statements.csv")).unwrap();
        assert_eq!(index.rows.len(), 12);
        assert!(index.skipped.is_empty());
        let labeled = index.rows.iter().filter(|r| index.labels(r).is_labeled()).count();
        assert_eq!(labeled, 10);
        assert!(index.rows.iter().any(|r| index.labels(r).is_multi_labeled()));
        let rec = index
            .load_record(&index.rows[1], dir.path(), crate::ingest::SignalFormat::Wfdb, 100.0)
            .unwrap();
        assert_eq!(rec.leads.len(), 12);
        assert_eq!(rec.len(), 1000);
        assert_eq!(rec.labels.primary(), Some(Superclass::Mi));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = SynthSpec { n_records: 3, ..Default::default() };
        write_dataset(a.path(), &spec).unwrap();
        write_dataset(b.path(), &spec).unwrap();
        for rel in ["ptbxl_database.csv", "records100/00000/00002_lr.dat"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap());
        }
    }
}
