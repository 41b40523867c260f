//! Run configuration: flat `section.key=value` text, overridable from the
//! command line, with a stable hash over every parameter that shapes outputs.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::complexity::ComplexityParams;
use crate::crosschannel::DEFAULT_BINS;
use crate::features::FeatureSet;
use crate::ingest::SignalFormat;
use crate::model::{TrainOptions, DEFAULT_TEST_FOLD};
use crate::preprocess::DEFAULT_DETREND_ORDER;
use crate::recurrence::RqaParams;
use crate::stats::DEFAULT_ALPHA;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for {key}: `{value}` ({reason})")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    /// Relative paths resolve against `data_dir`.
    pub metadata: PathBuf,
    pub statements: PathBuf,
    pub format: SignalFormat,
    /// Sampling rate assumed for CSV records.
    pub csv_rate: f64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub feature_set: FeatureSet,
    /// Minimum extracted fraction for a clean exit (one failure is always
    /// tolerated).
    pub min_success: f64,
    pub complexity_lead: String,
    pub cross_leads: [String; 3],
    pub detrend_order: usize,
    pub complexity: ComplexityParams,
    pub rqa: RqaParams,
    pub mi_bins: usize,
    pub alpha: f64,
    pub test_fold: u8,
    pub train: TrainOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: None,
            metadata: PathBuf::from("ptbxl_database.csv"),
            statements: PathBuf::from("scp_statements.csv"),
            format: SignalFormat::Wfdb,
            csv_rate: 100.0,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            feature_set: FeatureSet::Cross,
            min_success: 0.99,
            complexity_lead: "II".into(),
            cross_leads: ["II".into(), "AVL".into(), "V2".into()],
            detrend_order: DEFAULT_DETREND_ORDER,
            complexity: ComplexityParams::default(),
            rqa: RqaParams::default(),
            mi_bins: DEFAULT_BINS,
            alpha: DEFAULT_ALPHA,
            test_fold: DEFAULT_TEST_FOLD,
            train: TrainOptions::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn format_name(f: SignalFormat) -> &'static str {
    match f {
        SignalFormat::Wfdb => "wfdb",
        SignalFormat::Csv => "csv",
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Apply `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "data.dir" => self.data_dir = Some(PathBuf::from(value)),
            "data.metadata" => self.metadata = PathBuf::from(value),
            "data.statements" => self.statements = PathBuf::from(value),
            "data.format" => self.format = parse(key, value)?,
            "data.csv_rate" => self.csv_rate = parse(key, value)?,
            "output.dir" => self.out_dir = PathBuf::from(value),
            "run.jobs" => self.jobs = parse(key, value)?,
            "run.feature_set" => self.feature_set = parse(key, value)?,
            "run.min_success" => self.min_success = parse(key, value)?,
            "leads.complexity" => self.complexity_lead = value.to_string(),
            "leads.cross" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let [a, b, c] = parts.as_slice() else {
                    return Err(ConfigError::Value {
                        key: key.into(),
                        value: value.into(),
                        reason: "expected three comma-separated leads".into(),
                    });
                };
                self.cross_leads = [a.to_string(), b.to_string(), c.to_string()];
            }
            "preprocess.detrend_order" => self.detrend_order = parse(key, value)?,
            "complexity.hd_kmax" => self.complexity.hd_kmax = parse(key, value)?,
            "complexity.apen_m" => self.complexity.apen_m = parse(key, value)?,
            "complexity.apen_r" => self.complexity.apen_r = parse(key, value)?,
            "complexity.permen_m" => self.complexity.permen_m = parse(key, value)?,
            "complexity.permen_tau" => self.complexity.permen_tau = parse(key, value)?,
            "complexity.mse_max_scale" => {
                let s: usize = parse(key, value)?;
                self.complexity.mse_scales = (1..=s).collect();
            }
            "complexity.mse_m" => self.complexity.mse_m = parse(key, value)?,
            "complexity.mse_r" => self.complexity.mse_r = parse(key, value)?,
            "rqa.m" => self.rqa.m = parse(key, value)?,
            "rqa.tau" => {
                self.rqa.tau = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "rqa.tau_cap" => self.rqa.tau_cap = parse(key, value)?,
            "rqa.tau_fallback" => self.rqa.tau_fallback = parse(key, value)?,
            "rqa.target_rr" => self.rqa.target_rr = parse(key, value)?,
            "rqa.l_min" => self.rqa.l_min = parse(key, value)?,
            "rqa.v_min" => self.rqa.v_min = parse(key, value)?,
            "cross.mi_bins" => self.mi_bins = parse(key, value)?,
            "stats.alpha" => self.alpha = parse(key, value)?,
            "model.test_fold" => self.test_fold = parse(key, value)?,
            "model.l2_lambda" => self.train.l2_lambda = parse(key, value)?,
            "model.max_iter" => self.train.max_iter = parse(key, value)?,
            "model.tol" => self.train.tol = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if let Err(e) = self.complexity.validate() {
            return bad(e.to_string());
        }
        if self.complexity.mse_scales.is_empty() {
            return bad("complexity.mse_max_scale must be at least 1".into());
        }
        if !(self.csv_rate > 0.0 && self.csv_rate.is_finite()) {
            return bad(format!("data.csv_rate must be positive, got {}", self.csv_rate));
        }
        if !(0.0..=1.0).contains(&self.min_success) {
            return bad(format!("run.min_success must lie in [0, 1], got {}", self.min_success));
        }
        if self.rqa.m < 1 || self.rqa.tau == Some(0) || self.rqa.tau_cap < 1 || self.rqa.tau_fallback < 1 {
            return bad("rqa.m, rqa.tau, rqa.tau_cap and rqa.tau_fallback must be at least 1".into());
        }
        if !(self.rqa.target_rr > 0.0 && self.rqa.target_rr < 1.0) {
            return bad(format!("rqa.target_rr must lie in (0, 1), got {}", self.rqa.target_rr));
        }
        if self.rqa.l_min < 1 || self.rqa.v_min < 1 {
            return bad("rqa.l_min and rqa.v_min must be at least 1".into());
        }
        if self.mi_bins < 2 {
            return bad("cross.mi_bins must be at least 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("stats.alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(1..=10).contains(&self.test_fold) {
            return bad(format!("model.test_fold must lie in 1..=10, got {}", self.test_fold));
        }
        if let Err(e) = self.train.validate() {
            return bad(e.to_string());
        }
        Ok(())
    }

    pub fn metadata_path(&self) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(&self.metadata))
    }

    pub fn statements_path(&self) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(&self.statements))
    }

    /// Every parameter that affects an output, one `key=value` per entry, in
    /// a fixed order. Paths and the thread count are left out.
    pub fn parameters(&self) -> Vec<(String, String)> {
        let c = &self.complexity;
        let r = &self.rqa;
        let mse_max = c.mse_scales.iter().max().copied().unwrap_or(0);
        let entries: Vec<(&str, String)> = vec![
            ("data.format", format_name(self.format).into()),
            ("data.csv_rate", self.csv_rate.to_string()),
            ("run.feature_set", self.feature_set.to_string()),
            ("run.min_success", self.min_success.to_string()),
            ("leads.complexity", self.complexity_lead.clone()),
            ("leads.cross", self.cross_leads.join(",")),
            ("preprocess.detrend_order", self.detrend_order.to_string()),
            ("complexity.hd_kmax", c.hd_kmax.to_string()),
            ("complexity.apen_m", c.apen_m.to_string()),
            ("complexity.apen_r", c.apen_r.to_string()),
            ("complexity.permen_m", c.permen_m.to_string()),
            ("complexity.permen_tau", c.permen_tau.to_string()),
            ("complexity.mse_max_scale", mse_max.to_string()),
            ("complexity.mse_m", c.mse_m.to_string()),
            ("complexity.mse_r", c.mse_r.to_string()),
            ("rqa.m", r.m.to_string()),
            ("rqa.tau", r.tau.map_or("auto".into(), |t| t.to_string())),
            ("rqa.tau_cap", r.tau_cap.to_string()),
            ("rqa.tau_fallback", r.tau_fallback.to_string()),
            ("rqa.target_rr", r.target_rr.to_string()),
            ("rqa.l_min", r.l_min.to_string()),
            ("rqa.v_min", r.v_min.to_string()),
            ("cross.mi_bins", self.mi_bins.to_string()),
            ("stats.alpha", self.alpha.to_string()),
            ("model.test_fold", self.test_fold.to_string()),
            ("model.l2_lambda", self.train.l2_lambda.to_string()),
            ("model.max_iter", self.train.max_iter.to_string()),
            ("model.tol", self.train.tol.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn render(&self) -> String {
        self.parameters()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Hex SHA-256 of [`RunConfig::render`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rendered_config_parses_back() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("rqa.target_rr = 0.05\n# note\nrqa.tau=7\nleads.cross=I, II ,V1\ncomplexity.mse_max_scale=4\n")
            .unwrap();
        assert_eq!(cfg.rqa.target_rr, 0.05);
        assert_eq!(cfg.rqa.tau, Some(7));
        assert_eq!(cfg.cross_leads, ["I".to_string(), "II".into(), "V1".into()]);
        assert_eq!(cfg.complexity.mse_scales, [1, 2, 3, 4]);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hash_tracks_parameters_not_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.jobs = 7;
        b.out_dir = "elsewhere".into();
        b.data_dir = Some("x".into());
        assert_eq!(a.hash(), b.hash());
        b.rqa.l_min = 3;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn errors() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.apply_text("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(cfg.set("rqa.bogus", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg.set("rqa.m", "three"), Err(ConfigError::Value { .. })));
        assert!(matches!(cfg.set("leads.cross", "II,V2"), Err(ConfigError::Value { .. })));
        cfg.set("rqa.target_rr", "1.5").unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
