//! Delay embedding, fixed-recurrence-rate recurrence plots, and recurrence
//! quantification (DET, LAM, DET/LAM, TT, diagonal and vertical line-length
//! entropies).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrenceError {
    #[error("embedding needs more than {need} samples, got {len}")]
    Embedding { len: usize, need: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("malformed recurrence grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, RecurrenceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingParams {
    pub m: usize,
    pub tau: usize,
}

/// Delay vectors stored row-major, `dim` coordinates per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub params: EmbeddingParams,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.coords.len() / self.params.m
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let m = self.params.m;
        &self.coords[i * m..(i + 1) * m]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.params.m)
    }
}

/// Point `i` is `(x[i], x[i + tau], ..., x[i + (m - 1) tau])`.
pub fn delay_embed(x: &[f64], m: usize, tau: usize) -> Result<Embedding> {
    if m < 1 || tau < 1 {
        return Err(RecurrenceError::Param("m and tau must be at least 1".into()));
    }
    let span = (m - 1) * tau;
    if x.len() <= span {
        return Err(RecurrenceError::Embedding { len: x.len(), need: span });
    }
    let count = x.len() - span;
    let mut coords = Vec::with_capacity(count * m);
    for i in 0..count {
        coords.extend((0..m).map(|k| x[i + k * tau]));
    }
    Ok(Embedding {
        params: EmbeddingParams { m, tau },
        coords,
    })
}

/// Normalized autocorrelation at `lag`.
fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 || lag >= n {
        return 0.0;
    }
    let num: f64 = (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum();
    num / denom
}

/// Embedding delay from the first local minimum of the autocorrelation,
/// searched up to a quarter of the series, clamped to `cap`; `fallback` when
/// the autocorrelation has no local minimum in that range.
pub fn autocorrelation_delay(x: &[f64], cap: usize, fallback: usize) -> usize {
    let horizon = (x.len() / 4).max(3);
    let acf: Vec<f64> = (0..=horizon).map(|lag| autocorrelation(x, lag)).collect();
    (1..horizon)
        .find(|&lag| acf[lag] < acf[lag - 1] && acf[lag] <= acf[lag + 1])
        .map_or(fallback, |lag| lag.min(cap))
}

/// Symmetric binary recurrence matrix with a unit main diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrencePlot {
    n: usize,
    bits: Vec<u64>,
    /// Distance threshold; `dist <= epsilon` recurs.
    pub epsilon: f64,
    /// Fraction of recurrent off-diagonal entries.
    pub recurrence_rate: f64,
    pub params: Option<EmbeddingParams>,
    /// All points coincided, so the matrix is all ones.
    pub degenerate: bool,
}

impl RecurrencePlot {
    fn empty(n: usize) -> Self {
        let mut rp = RecurrencePlot {
            n,
            bits: vec![0; (n * n).div_ceil(64)],
            epsilon: 0.0,
            recurrence_rate: 0.0,
            params: None,
            degenerate: false,
        };
        for i in 0..n {
            rp.set(i, i);
        }
        rp
    }

    fn set(&mut self, i: usize, j: usize) {
        let k = i * self.n + j;
        self.bits[k / 64] |= 1 << (k % 64);
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        let k = i * self.n + j;
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    fn update_rate(&mut self) {
        let n = self.n;
        let ones = self.bits.iter().map(|w| w.count_ones() as usize).sum::<usize>() - n;
        self.recurrence_rate = if n > 1 {
            ones as f64 / (n * (n - 1)) as f64
        } else {
            1.0
        };
    }

    /// Parse a text grid of `1`/`0` (or `#`/`.`) rows; whitespace is ignored.
    /// The grid must be square, symmetric, and have a unit diagonal.
    pub fn from_grid(text: &str) -> Result<Self> {
        let rows: Vec<Vec<bool>> = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with("//"))
            .map(|l| {
                l.chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| match c {
                        '1' | '#' => Ok(true),
                        '0' | '.' => Ok(false),
                        other => Err(RecurrenceError::Grid(format!("unexpected character `{other}`"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(RecurrenceError::Grid("grid must be square and nonempty".into()));
        }
        let mut rp = RecurrencePlot::empty(n);
        for i in 0..n {
            if !rows[i][i] {
                return Err(RecurrenceError::Grid(format!("diagonal entry {i} is not recurrent")));
            }
            for j in 0..n {
                if rows[i][j] != rows[j][i] {
                    return Err(RecurrenceError::Grid(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
                if rows[i][j] {
                    rp.set(i, j);
                }
            }
        }
        rp.update_rate();
        Ok(rp)
    }

    /// `#`/`.` text grid, one row per line.
    pub fn to_grid(&self) -> String {
        let mut out = String::with_capacity(self.n * (self.n + 1));
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(if self.get(i, j) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    /// Diagonal line-length histogram over both triangles, main diagonal
    /// excluded.
    pub fn diagonal_lines(&self) -> BTreeMap<usize, usize> {
        let n = self.n;
        let mut hist = BTreeMap::new();
        for offset in 1..n {
            let mut run = 0;
            for i in 0..n - offset {
                if self.get(i, i + offset) {
                    run += 1;
                } else if run > 0 {
                    *hist.entry(run).or_insert(0) += 2;
                    run = 0;
                }
            }
            if run > 0 {
                *hist.entry(run).or_insert(0) += 2;
            }
        }
        hist
    }

    /// Vertical line-length histogram over all columns, main diagonal included.
    pub fn vertical_lines(&self) -> BTreeMap<usize, usize> {
        let n = self.n;
        let mut hist = BTreeMap::new();
        for j in 0..n {
            let mut run = 0;
            for i in 0..n {
                if self.get(i, j) {
                    run += 1;
                } else if run > 0 {
                    *hist.entry(run).or_insert(0) += 1;
                    run = 0;
                }
            }
            if run > 0 {
                *hist.entry(run).or_insert(0) += 1;
            }
        }
        hist
    }

    fn recurrent_points(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Recurrence plot whose threshold is the `target_rr` quantile of the
/// pairwise Euclidean distances, so the off-diagonal recurrence rate matches
/// `target_rr` up to ties.
pub fn recurrence_matrix(embedding: &Embedding, target_rr: f64) -> Result<RecurrencePlot> {
    let n = embedding.len();
    if n < 2 {
        return Err(RecurrenceError::Param("need at least two points".into()));
    }
    if !(target_rr > 0.0 && target_rr < 1.0) {
        return Err(RecurrenceError::Param(format!("target recurrence rate {target_rr} outside (0, 1)")));
    }
    let m = embedding.params.m;
    let coords = &embedding.coords;

    // Upper-triangle squared distances, row by row.
    let pairs = n * (n - 1) / 2;
    let mut dist2 = Vec::with_capacity(pairs);
    for i in 0..n - 1 {
        let p = &coords[i * m..(i + 1) * m];
        for q in coords[(i + 1) * m..].chunks_exact(m) {
            dist2.push(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        }
    }

    let rank = ((target_rr * pairs as f64).ceil() as usize).clamp(1, pairs);
    let mut scratch = dist2.clone();
    let (_, kth, _) = scratch.select_nth_unstable_by(rank - 1, f64::total_cmp);
    let eps2 = *kth;
    drop(scratch);

    let mut rp = RecurrencePlot::empty(n);
    let mut k = 0;
    for i in 0..n - 1 {
        for j in i + 1..n {
            if dist2[k] <= eps2 {
                rp.set(i, j);
                rp.set(j, i);
            }
            k += 1;
        }
    }
    rp.epsilon = eps2.sqrt();
    rp.params = Some(embedding.params);
    rp.degenerate = dist2.iter().all(|d| *d == 0.0);
    if rp.degenerate {
        log::warn!("all {n} embedded points coincide; recurrence plot is all ones");
    }
    rp.update_rate();
    Ok(rp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RqaSummary {
    pub det: f64,
    pub lam: f64,
    /// DET / LAM; `None` when LAM is zero.
    pub dbyl: Option<f64>,
    /// Mean vertical line length; `None` without qualifying vertical lines.
    pub tt: Option<f64>,
    pub d_ent: f64,
    pub v_ent: f64,
}

fn line_entropy(hist: &BTreeMap<usize, usize>, min_len: usize) -> f64 {
    let lines: usize = hist.range(min_len..).map(|(_, c)| c).sum();
    if lines == 0 {
        return 0.0;
    }
    let total = lines as f64;
    let h: f64 = hist
        .range(min_len..)
        .map(|(_, &c)| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Line-structure measures of a recurrence plot. DET counts diagonal lines
/// of length `>= l_min` off the main diagonal; LAM and TT count vertical lines
/// of length `>= v_min` with the main diagonal included.
pub fn rqa(rp: &RecurrencePlot, l_min: usize, v_min: usize) -> RqaSummary {
    let l_min = l_min.max(1);
    let v_min = v_min.max(1);
    let diag = rp.diagonal_lines();
    let vert = rp.vertical_lines();

    let total = rp.recurrent_points();
    let off_diagonal = total - rp.n;

    let on_diag_lines: usize = diag.range(l_min..).map(|(l, c)| l * c).sum();
    let vert_points: usize = vert.range(v_min..).map(|(l, c)| l * c).sum();
    let vert_lines: usize = vert.range(v_min..).map(|(_, c)| c).sum();

    let det = if off_diagonal == 0 {
        0.0
    } else {
        on_diag_lines as f64 / off_diagonal as f64
    };
    let lam = if total == 0 {
        0.0
    } else {
        vert_points as f64 / total as f64
    };
    RqaSummary {
        det,
        lam,
        dbyl: (lam > 0.0).then(|| det / lam),
        tt: (vert_lines > 0).then(|| vert_points as f64 / vert_lines as f64),
        d_ent: line_entropy(&diag, l_min),
        v_ent: line_entropy(&vert, v_min),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RqaParams {
    pub m: usize,
    /// Fixed delay; `None` picks it from the autocorrelation.
    pub tau: Option<usize>,
    pub tau_cap: usize,
    pub tau_fallback: usize,
    pub target_rr: f64,
    pub l_min: usize,
    pub v_min: usize,
}

impl Default for RqaParams {
    fn default() -> Self {
        RqaParams {
            m: 3,
            tau: None,
            tau_cap: 20,
            tau_fallback: 5,
            target_rr: 0.10,
            l_min: 2,
            v_min: 2,
        }
    }
}

/// Embed, threshold, and summarize one series. Returns the summary and the
/// delay used.
pub fn rqa_features(x: &[f64], params: &RqaParams) -> Result<(RqaSummary, usize)> {
    let tau = params
        .tau
        .unwrap_or_else(|| autocorrelation_delay(x, params.tau_cap, params.tau_fallback));
    let emb = delay_embed(x, params.m, tau)?;
    let rp = recurrence_matrix(&emb, params.target_rr)?;
    Ok((rqa(&rp, params.l_min, params.v_min), tau))
}

/// Debug dump: parameters as comments followed by the grid.
pub fn render_debug(rp: &RecurrencePlot) -> String {
    let mut out = String::new();
    if let Some(p) = rp.params {
        let _ = writeln!(out, "// m={} tau={}", p.m, p.tau);
    }
    let _ = writeln!(out, "// epsilon={} recurrence_rate={}", rp.epsilon, rp.recurrence_rate);
    out.push_str(&rp.to_grid());
    out
}
