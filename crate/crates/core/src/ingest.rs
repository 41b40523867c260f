//! Dataset ingestion: WFDB format-16 records, the PTB-XL style metadata index,
//! the statement dictionary, and diagnostic labelling.
//!
//! The physical value of a stored sample is `(stored - baseline) / gain`, in
//! the header's physical units (millivolts for PTB-XL). Only format 16
//! (16-bit little-endian two's complement, interleaved per file) is decoded;
//! a plain per-record CSV covers synthetic fixtures.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// WFDB default ADC gain when the header leaves it unset or zero.
const DEFAULT_GAIN: f64 = 200.0;
/// Format-16 marker for an invalid sample.
const INVALID_SAMPLE: i16 = i16::MIN;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed header: {reason}")]
    Header {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unsupported signal format `{0}` (only format 16 is supported)")]
    UnsupportedFormat(String),
    #[error("{path}: signal file holds {actual} bytes, header implies {expected}")]
    LengthMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: missing required column `{column}`")]
    Schema { path: PathBuf, column: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {reason}")]
    CsvRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// PTB-XL diagnostic superclass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Superclass {
    Norm,
    Mi,
    Sttc,
    Cd,
    Hyp,
}

impl Superclass {
    pub const ALL: [Superclass; 5] = [
        Superclass::Norm,
        Superclass::Mi,
        Superclass::Sttc,
        Superclass::Cd,
        Superclass::Hyp,
    ];

    /// Disease classes in the column order used for the pairwise heatmap.
    pub const DISEASES: [Superclass; 4] = [
        Superclass::Sttc,
        Superclass::Mi,
        Superclass::Cd,
        Superclass::Hyp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Superclass::Norm => "NORM",
            Superclass::Mi => "MI",
            Superclass::Sttc => "STTC",
            Superclass::Cd => "CD",
            Superclass::Hyp => "HYP",
        }
    }

    /// Rank used to pick a single label for multi-labelled records (higher wins).
    pub fn priority(self) -> u8 {
        match self {
            Superclass::Mi => 4,
            Superclass::Sttc => 3,
            Superclass::Cd => 2,
            Superclass::Hyp => 1,
            Superclass::Norm => 0,
        }
    }

    /// Dense index 0..5 in `ALL` order.
    pub fn index(self) -> usize {
        match self {
            Superclass::Norm => 0,
            Superclass::Mi => 1,
            Superclass::Sttc => 2,
            Superclass::Cd => 3,
            Superclass::Hyp => 4,
        }
    }
}

impl fmt::Display for Superclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Superclass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NORM" => Ok(Superclass::Norm),
            "MI" => Ok(Superclass::Mi),
            "STTC" => Ok(Superclass::Sttc),
            "CD" => Ok(Superclass::Cd),
            "HYP" => Ok(Superclass::Hyp),
            other => Err(format!("unknown superclass `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryLabel {
    Healthy,
    Diseased,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Healthy => "healthy",
            BinaryLabel::Diseased => "diseased",
        }
    }
}

impl FromStr for BinaryLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "healthy" => Ok(BinaryLabel::Healthy),
            "diseased" => Ok(BinaryLabel::Diseased),
            other => Err(format!("unknown binary label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    /// Encoding used as a model feature: male 0, female 1.
    pub fn code(self) -> f64 {
        match self {
            Sex::Male => 0.0,
            Sex::Female => 1.0,
        }
    }

    fn parse(s: &str) -> Option<Sex> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "0.0" | "m" | "male" => Some(Sex::Male),
            "1" | "1.0" | "f" | "female" => Some(Sex::Female),
            _ => None,
        }
    }
}

/// Superclass set plus derived binary label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labels {
    pub superclasses: BTreeSet<Superclass>,
    /// `None` when no code mapped to a superclass.
    pub binary: Option<BinaryLabel>,
}

impl Labels {
    /// Highest-priority superclass (MI > STTC > CD > HYP > NORM).
    pub fn primary(&self) -> Option<Superclass> {
        self.superclasses.iter().copied().max_by_key(|c| c.priority())
    }

    pub fn is_labeled(&self) -> bool {
        self.binary.is_some()
    }

    pub fn is_multi_labeled(&self) -> bool {
        self.superclasses.len() > 1
    }
}

/// Map a record's SCP statements to superclasses. Codes absent from
/// `scp_map` are ignored, as are confidence values.
pub fn assign_labels(scp_codes: &BTreeMap<String, f64>, scp_map: &BTreeMap<String, Superclass>) -> Labels {
    let superclasses: BTreeSet<Superclass> = scp_codes
        .keys()
        .filter_map(|code| scp_map.get(code).copied())
        .collect();
    let binary = if superclasses.is_empty() {
        None
    } else if superclasses.iter().any(|c| *c != Superclass::Norm) {
        Some(BinaryLabel::Diseased)
    } else {
        Some(BinaryLabel::Healthy)
    };
    Labels {
        superclasses,
        binary,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lead {
    pub name: String,
    pub samples: Vec<f64>,
}

/// One patient recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub record_id: String,
    pub sampling_rate: f64,
    pub leads: Vec<Lead>,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
    pub weight: Option<f64>,
    pub labels: Labels,
    pub strat_fold: Option<u8>,
}

impl EcgRecord {
    fn unlabeled(record_id: String, sampling_rate: f64, leads: Vec<Lead>) -> Self {
        EcgRecord {
            record_id,
            sampling_rate,
            leads,
            age: None,
            sex: None,
            weight: None,
            labels: Labels::default(),
            strat_fold: None,
        }
    }

    /// Case-insensitive lead lookup (`aVL` and `AVL` both match).
    pub fn lead(&self, name: &str) -> Option<&[f64]> {
        self.leads
            .iter()
            .find(|l| l.name.eq_ignore_ascii_case(name))
            .map(|l| l.samples.as_slice())
    }

    pub fn len(&self) -> usize {
        self.leads.first().map_or(0, |l| l.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// ---------------------------------------------------------------------------
// WFDB header

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format: u16,
    pub byte_offset: usize,
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: Option<i32>,
    pub checksum: Option<i32>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record_name: String,
    pub sampling_rate: f64,
    pub num_samples: Option<usize>,
    pub signals: Vec<SignalSpec>,
}

impl WfdbHeader {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, reason: String| IngestError::Header {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (lno, record_line) = lines.next().ok_or_else(|| bad(1, "empty header".into()))?;
        let fields: Vec<&str> = record_line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(bad(lno, "record line needs at least a name and signal count".into()));
        }
        let record_name = fields[0].split('/').next().unwrap_or_default().to_string();
        if record_name.is_empty() {
            return Err(bad(lno, "empty record name".into()));
        }
        let nsig: usize = fields[1]
            .parse()
            .map_err(|_| bad(lno, format!("bad signal count `{}`", fields[1])))?;
        let sampling_rate = match fields.get(2) {
            Some(f) => {
                let head = f.split(['/', '(']).next().unwrap_or_default();
                head.parse::<f64>()
                    .ok()
                    .filter(|v| *v > 0.0 && v.is_finite())
                    .ok_or_else(|| bad(lno, format!("bad sampling frequency `{f}`")))?
            }
            None => 250.0,
        };
        let num_samples = match fields.get(3) {
            Some(f) => Some(f.parse().map_err(|_| bad(lno, format!("bad sample count `{f}`")))?),
            None => None,
        };

        let mut signals = Vec::with_capacity(nsig);
        let mut last = lno;
        for _ in 0..nsig {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| bad(last, format!("expected {nsig} signal lines, found {}", signals.len())))?;
            signals.push(parse_signal_line(line).map_err(|reason| bad(lno, reason))?);
            last = lno;
        }
        Ok(WfdbHeader {
            record_name,
            sampling_rate,
            num_samples,
            signals,
        })
    }

    /// Renders the header in the layout PTB-XL ships.
    pub fn render(&self) -> String {
        let mut out = format!("{} {} {}", self.record_name, self.signals.len(), fmt_num(self.sampling_rate));
        if let Some(n) = self.num_samples {
            out.push_str(&format!(" {n}"));
        }
        out.push('\n');
        for s in &self.signals {
            out.push_str(&format!(
                "{} {} {}({})/{} {} {} {} {} 0 {}\n",
                s.file_name,
                s.format,
                fmt_gain(s.gain),
                s.baseline,
                s.units,
                s.adc_resolution,
                s.adc_zero,
                s.initial_value.unwrap_or(0),
                s.checksum.unwrap_or(0),
                s.description
            ));
        }
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn fmt_gain(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn parse_signal_line(line: &str) -> Result<SignalSpec, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err("signal line needs at least a file name and format".into());
    }
    let file_name = fields[0].to_string();

    // format[xsamples_per_frame][:skew][+byte_offset]
    let fmt_field = fields[1];
    let digits_end = fmt_field
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(fmt_field.len());
    let format: u16 = fmt_field[..digits_end]
        .parse()
        .map_err(|_| format!("bad format field `{fmt_field}`"))?;
    let mut rest = &fmt_field[digits_end..];
    let mut byte_offset = 0usize;
    if let Some(stripped) = rest.strip_prefix('x') {
        let end = stripped.find([':', '+']).unwrap_or(stripped.len());
        if &stripped[..end] != "1" {
            return Err(format!("multi-sample frames are not supported (`{fmt_field}`)"));
        }
        rest = &stripped[end..];
    }
    if let Some(stripped) = rest.strip_prefix(':') {
        let end = stripped.find('+').unwrap_or(stripped.len());
        rest = &stripped[end..];
    }
    if let Some(stripped) = rest.strip_prefix('+') {
        byte_offset = stripped
            .parse()
            .map_err(|_| format!("bad byte offset in `{fmt_field}`"))?;
    }

    let parse_i32 = |idx: usize, what: &str| -> Result<Option<i32>, String> {
        fields
            .get(idx)
            .map(|f| f.parse::<i32>().map_err(|_| format!("bad {what} `{f}`")))
            .transpose()
    };
    let adc_resolution = match fields.get(3) {
        Some(f) => f.parse().map_err(|_| format!("bad ADC resolution `{f}`"))?,
        None => 12,
    };
    let adc_zero = parse_i32(4, "ADC zero")?.unwrap_or(0);
    let initial_value = parse_i32(5, "initial value")?;
    let checksum = parse_i32(6, "checksum")?;
    let description = if fields.len() > 8 {
        fields[8..].join(" ")
    } else {
        String::new()
    };

    // gain[(baseline)][/units]
    let (mut gain, mut baseline, mut units) = (DEFAULT_GAIN, adc_zero, String::from("mV"));
    if let Some(g) = fields.get(2) {
        let (value_part, unit_part) = match g.split_once('/') {
            Some((v, u)) => (v, Some(u)),
            None => (*g, None),
        };
        let (gain_str, base_str) = match value_part.split_once('(') {
            Some((v, b)) => (
                v,
                Some(b.strip_suffix(')').ok_or_else(|| format!("unclosed baseline in `{g}`"))?),
            ),
            None => (value_part, None),
        };
        gain = gain_str.parse().map_err(|_| format!("bad gain `{g}`"))?;
        if gain == 0.0 {
            gain = DEFAULT_GAIN;
        }
        if let Some(b) = base_str {
            baseline = b.parse().map_err(|_| format!("bad baseline `{g}`"))?;
        }
        if let Some(u) = unit_part {
            units = u.to_string();
        }
    }
    if !gain.is_finite() || gain <= 0.0 {
        return Err(format!("gain must be positive, got {gain}"));
    }

    Ok(SignalSpec {
        file_name,
        format,
        byte_offset,
        gain,
        baseline,
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        description,
    })
}

// ---------------------------------------------------------------------------
// Format 16

/// Split an interleaved format-16 byte stream into per-signal sample vectors.
/// Byte order is fixed little-endian regardless of host.
pub fn decode_format16(bytes: &[u8], nsig: usize) -> Vec<Vec<i16>> {
    if nsig == 0 {
        return Vec::new();
    }
    let frames = bytes.len() / (2 * nsig);
    let mut out = vec![Vec::with_capacity(frames); nsig];
    for frame in bytes.chunks_exact(2 * nsig) {
        for (sig, pair) in frame.chunks_exact(2).enumerate() {
            out[sig].push(i16::from_le_bytes([pair[0], pair[1]]));
        }
    }
    out
}

/// Interleave per-signal samples into a format-16 byte stream.
pub fn encode_format16(signals: &[Vec<i16>]) -> Vec<u8> {
    let frames = signals.iter().map(Vec::len).min().unwrap_or(0);
    let mut out = Vec::with_capacity(frames * signals.len() * 2);
    for t in 0..frames {
        for s in signals {
            out.extend_from_slice(&s[t].to_le_bytes());
        }
    }
    out
}

/// Read a WFDB record (header plus its format-16 signal files). Labels and
/// demographics are left unset.
pub fn read_wfdb_record(header_path: &Path) -> Result<EcgRecord> {
    let text = fs::read_to_string(header_path).map_err(io_err(header_path))?;
    let header = WfdbHeader::parse(&text, header_path)?;
    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));

    if let Some(bad) = header.signals.iter().find(|s| s.format != 16) {
        return Err(IngestError::UnsupportedFormat(bad.format.to_string()));
    }

    // Signals sharing a file are interleaved in header order.
    let mut files: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, s) in header.signals.iter().enumerate() {
        match files.iter_mut().find(|(f, _)| *f == s.file_name) {
            Some((_, idx)) => idx.push(i),
            None => files.push((&s.file_name, vec![i])),
        }
    }

    let mut digital: Vec<Vec<i16>> = vec![Vec::new(); header.signals.len()];
    for (file, members) in &files {
        let path = dir.join(file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let offset = header.signals[members[0]].byte_offset;
        let payload = bytes.get(offset..).unwrap_or(&[]);
        let frame_bytes = 2 * members.len();
        let expected = match header.num_samples {
            Some(n) => n * frame_bytes,
            None => payload.len() - payload.len() % frame_bytes,
        };
        if payload.len() < expected || (header.num_samples.is_none() && payload.len() % frame_bytes != 0) {
            return Err(IngestError::LengthMismatch {
                path,
                expected: expected.max(frame_bytes),
                actual: payload.len(),
            });
        }
        let decoded = decode_format16(&payload[..expected], members.len());
        for (slot, samples) in members.iter().zip(decoded) {
            digital[*slot] = samples;
        }
    }

    let leads = header
        .signals
        .iter()
        .zip(digital)
        .map(|(spec, raw)| Lead {
            name: spec.description.clone(),
            samples: raw
                .into_iter()
                .map(|v| {
                    if v == INVALID_SAMPLE {
                        f64::NAN
                    } else {
                        (f64::from(v) - f64::from(spec.baseline)) / spec.gain
                    }
                })
                .collect(),
        })
        .collect();
    Ok(EcgRecord::unlabeled(header.record_name, header.sampling_rate, leads))
}

/// Write physical samples (millivolts) as a format-16 record `<dir>/<name>.hea`
/// + `<name>.dat`, quantized with the given gain and a zero baseline.
pub fn write_wfdb_record(dir: &Path, name: &str, sampling_rate: f64, leads: &[Lead], gain: f64) -> Result<PathBuf> {
    let dat_name = format!("{name}.dat");
    let digital: Vec<Vec<i16>> = leads
        .iter()
        .map(|l| {
            l.samples
                .iter()
                .map(|v| (v * gain).round().clamp(-32767.0, 32767.0) as i16)
                .collect()
        })
        .collect();
    let signals = leads
        .iter()
        .zip(&digital)
        .map(|(l, d)| SignalSpec {
            file_name: dat_name.clone(),
            format: 16,
            byte_offset: 0,
            gain,
            baseline: 0,
            units: "mV".into(),
            adc_resolution: 16,
            adc_zero: 0,
            initial_value: d.first().map(|v| i32::from(*v)),
            checksum: Some(i32::from(d.iter().fold(0i16, |acc, v| acc.wrapping_add(*v)))),
            description: l.name.clone(),
        })
        .collect();
    let header = WfdbHeader {
        record_name: name.to_string(),
        sampling_rate,
        num_samples: Some(digital.iter().map(Vec::len).min().unwrap_or(0)),
        signals,
    };
    let hea = dir.join(format!("{name}.hea"));
    fs::write(&hea, header.render()).map_err(io_err(&hea))?;
    let dat = dir.join(dat_name);
    fs::write(&dat, encode_format16(&digital)).map_err(io_err(&dat))?;
    Ok(hea)
}

// ---------------------------------------------------------------------------
// CSV fallback

/// Read a per-record CSV: a header row of lead names, one column per lead.
pub fn read_csv_record(path: &Path, sampling_rate: f64) -> Result<EcgRecord> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let names: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.len() != names.len() {
            return Err(IngestError::CsvRecord {
                path: path.to_path_buf(),
                line: i + 2,
                reason: format!("expected {} columns, found {}", names.len(), row.len()),
            });
        }
        for (col, cell) in columns.iter_mut().zip(row.iter()) {
            let v = cell.parse::<f64>().map_err(|_| IngestError::CsvRecord {
                path: path.to_path_buf(),
                line: i + 2,
                reason: format!("not a number: `{cell}`"),
            })?;
            col.push(v);
        }
    }
    let record_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let leads = names
        .into_iter()
        .zip(columns)
        .map(|(name, samples)| Lead { name, samples })
        .collect();
    Ok(EcgRecord::unlabeled(record_id, sampling_rate, leads))
}

// ---------------------------------------------------------------------------
// Metadata index

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub record_id: String,
    /// Signal path relative to the dataset root, without extension.
    pub filename: String,
    pub scp_codes: BTreeMap<String, f64>,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
    pub weight: Option<f64>,
    pub strat_fold: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: usize,
    pub record_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetIndex {
    pub rows: Vec<IndexRow>,
    pub scp_map: BTreeMap<String, Superclass>,
    pub skipped: Vec<RowError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Wfdb,
    Csv,
}

impl FromStr for SignalFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wfdb" => Ok(SignalFormat::Wfdb),
            "csv" => Ok(SignalFormat::Csv),
            other => Err(format!("unknown signal format `{other}` (expected wfdb or csv)")),
        }
    }
}

impl DatasetIndex {
    pub fn labels(&self, row: &IndexRow) -> Labels {
        assign_labels(&row.scp_codes, &self.scp_map)
    }

    /// Load the signals for one index row and attach labels and demographics.
    pub fn load_record(&self, row: &IndexRow, data_dir: &Path, format: SignalFormat, csv_rate: f64) -> Result<EcgRecord> {
        let mut record = match format {
            SignalFormat::Wfdb => read_wfdb_record(&data_dir.join(format!("{}.hea", row.filename)))?,
            SignalFormat::Csv => read_csv_record(&data_dir.join(format!("{}.csv", row.filename)), csv_rate)?,
        };
        record.record_id = row.record_id.clone();
        record.age = row.age;
        record.sex = row.sex;
        record.weight = row.weight;
        record.strat_fold = Some(row.strat_fold);
        record.labels = self.labels(row);
        Ok(record)
    }
}

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    names
        .iter()
        .find_map(|n| headers.iter().position(|h| h.trim() == *n))
}

/// Parse a Python-style dict literal of code → confidence, e.g.
/// `{'NORM': 100.0, 'SR': 0.0}`. Double quotes are accepted too.
pub fn parse_scp_codes(text: &str) -> Result<BTreeMap<String, f64>, String> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| format!("expected a {{...}} mapping, got `{text}`"))?;
    let mut out = BTreeMap::new();
    if inner.trim().is_empty() {
        return Ok(out);
    }
    for entry in inner.split(',') {
        let (key, value) = entry
            .split_once(':')
            .ok_or_else(|| format!("entry `{}` lacks a `:`", entry.trim()))?;
        let key = key.trim();
        let unquoted = key
            .strip_prefix('\'')
            .and_then(|k| k.strip_suffix('\''))
            .or_else(|| key.strip_prefix('"').and_then(|k| k.strip_suffix('"')))
            .ok_or_else(|| format!("unquoted code `{key}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad confidence `{}` for `{unquoted}`", value.trim()))?;
        out.insert(unquoted.to_string(), value);
    }
    Ok(out)
}

fn parse_opt_f64(cell: &str) -> Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| format!("not a number: `{cell}`"))
}

/// Load the metadata index and the statement dictionary. Rows with
/// unparseable fields are skipped and reported in `skipped`.
pub fn load_index(metadata_csv: &Path, statements_csv: &Path) -> Result<DatasetIndex> {
    let scp_map = load_statements(statements_csv)?;

    let csv_err = |source| IngestError::Csv {
        path: metadata_csv.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().from_path(metadata_csv).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |names: &[&str]| {
        find_column(&headers, names).ok_or_else(|| IngestError::Schema {
            path: metadata_csv.to_path_buf(),
            column: names[0].to_string(),
        })
    };
    let id_col = col(&["ecg_id", "record_id"])?;
    let scp_col = col(&["scp_codes"])?;
    let age_col = col(&["age"])?;
    let sex_col = col(&["sex"])?;
    let weight_col = col(&["weight"])?;
    let fold_col = col(&["strat_fold"])?;
    let file_col = col(&["filename_lr", "filename"])?;

    let mut index = DatasetIndex {
        scp_map,
        ..DatasetIndex::default()
    };
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                index.skipped.push(RowError {
                    line,
                    record_id: None,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let cell = |c: usize| row.get(c).unwrap_or("");
        let record_id = cell(id_col).trim().to_string();
        let parsed = (|| -> Result<IndexRow, String> {
            if record_id.is_empty() {
                return Err("empty record id".into());
            }
            if !seen.insert(record_id.clone()) {
                return Err(format!("duplicate record id `{record_id}`"));
            }
            let strat_fold: u8 = cell(fold_col)
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && (1.0..=10.0).contains(v))
                .map(|v| v as u8)
                .ok_or_else(|| format!("bad strat_fold `{}`", cell(fold_col)))?;
            let filename = cell(file_col).trim().to_string();
            if filename.is_empty() {
                return Err("empty filename".into());
            }
            Ok(IndexRow {
                record_id: record_id.clone(),
                filename,
                scp_codes: parse_scp_codes(cell(scp_col))?,
                age: parse_opt_f64(cell(age_col))?,
                sex: Sex::parse(cell(sex_col)),
                weight: parse_opt_f64(cell(weight_col))?,
                strat_fold,
            })
        })();
        match parsed {
            Ok(r) => index.rows.push(r),
            Err(reason) => index.skipped.push(RowError {
                line,
                record_id: Some(record_id).filter(|s| !s.is_empty()),
                reason,
            }),
        }
    }
    log::info!(
        "indexed {} records ({} skipped), {} diagnostic statements",
        index.rows.len(),
        index.skipped.len(),
        index.scp_map.len()
    );
    Ok(index)
}

/// Statement dictionary: code in the first column, `diagnostic` flag, and
/// `diagnostic_class` naming the superclass.
pub fn load_statements(path: &Path) -> Result<BTreeMap<String, Superclass>> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let schema = |column: &str| IngestError::Schema {
        path: path.to_path_buf(),
        column: column.to_string(),
    };
    let diag_col = find_column(&headers, &["diagnostic"]).ok_or_else(|| schema("diagnostic"))?;
    let class_col = find_column(&headers, &["diagnostic_class"]).ok_or_else(|| schema("diagnostic_class"))?;

    let mut map = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let code = row.get(0).unwrap_or("").trim();
        let flagged = row
            .get(diag_col)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .is_some_and(|v| v != 0.0);
        if code.is_empty() || !flagged {
            continue;
        }
        if let Some(class) = row.get(class_col).and_then(|c| c.parse::<Superclass>().ok()) {
            map.insert(code.to_string(), class);
        }
    }
    Ok(map)
}

/// Write a PTB-XL style statement dictionary for the given code map.
pub fn write_statements(path: &Path, scp_map: &BTreeMap<String, Superclass>) -> Result<()> {
    let mut out = String::from(",description,diagnostic,form,rhythm,diagnostic_class,diagnostic_subclass\n");
    for (code, class) in scp_map {
        out.push_str(&format!("{code},{code},1.0,,,{class},{class}\n"));
    }
    // A rhythm statement that maps to no superclass.
    out.push_str("SR,sinus rhythm,,,1.0,,\n");
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}
