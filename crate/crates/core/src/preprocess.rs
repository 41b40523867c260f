//! Baseline-drift removal, amplitude standardization, and R-peak location.

use thiserror::Error;

/// Polynomial order used for baseline removal.
pub const DEFAULT_DETREND_ORDER: usize = 20;
/// Minimum spacing between accepted R-peaks, in seconds.
pub const REFRACTORY_SECONDS: f64 = 0.2;
/// Width of the windows whose maxima set the peak threshold, in seconds.
pub const PEAK_WINDOW_SECONDS: f64 = 2.0;
/// Fraction of the typical window maximum (above the mean) a peak must reach.
pub const PEAK_THRESHOLD_FRACTION: f64 = 0.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal has {len} samples, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("signal contains non-finite samples")]
    NonFinite,
    #[error("sampling rate must be positive, got {0}")]
    BadRate(f64),
    #[error("signal has zero variance")]
    Flat,
    #[error("cannot fit a polynomial of order {order} to {len} samples")]
    DegenerateFit { len: usize, order: usize },
    #[error("found {found} R-peaks, need at least 2")]
    InsufficientPeaks { found: usize },
}

/// A uniformly sampled, finite-valued series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sampling_rate: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sampling_rate: f64) -> Result<Self, SignalError> {
        if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
            return Err(SignalError::BadRate(sampling_rate));
        }
        if samples.len() < 2 {
            return Err(SignalError::TooShort {
                len: samples.len(),
                need: 2,
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite);
        }
        Ok(Signal {
            samples,
            sampling_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    fn with_samples(&self, samples: Vec<f64>) -> Signal {
        Signal {
            samples,
            sampling_rate: self.sampling_rate,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis for polynomials of degree `0..=order` sampled at `n`
/// points evenly spread over [-1, 1]. Built by Arnoldi iteration on the
/// abscissae with two Gram-Schmidt passes per vector, which spans exactly the
/// same subspace as the monomials without forming their Vandermonde matrix.
fn polynomial_basis(n: usize, order: usize) -> Vec<Vec<f64>> {
    let t: Vec<f64> = (0..n)
        .map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0)
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    basis.push(vec![1.0 / (n as f64).sqrt(); n]);
    for k in 0..order {
        let mut v: Vec<f64> = basis[k].iter().zip(&t).map(|(q, ti)| q * ti).collect();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|vi| *vi /= norm);
        basis.push(v);
    }
    basis
}

/// Least-squares polynomial trend of the given order.
pub fn polynomial_trend(signal: &Signal, order: usize) -> Result<Vec<f64>, SignalError> {
    let n = signal.len();
    if n <= order + 1 {
        return Err(SignalError::DegenerateFit { len: n, order });
    }
    let basis = polynomial_basis(n, order);
    let mut residual = signal.samples.clone();
    for q in &basis {
        let c = dot(&residual, q);
        residual.iter_mut().zip(q).for_each(|(r, qi)| *r -= c * qi);
    }
    Ok(signal
        .samples
        .iter()
        .zip(&residual)
        .map(|(x, r)| x - r)
        .collect())
}

/// Subtract the least-squares polynomial fit of the given order.
pub fn detrend_polynomial(signal: &Signal, order: usize) -> Result<Signal, SignalError> {
    let trend = polynomial_trend(signal, order)?;
    Ok(signal.with_samples(
        signal
            .samples
            .iter()
            .zip(&trend)
            .map(|(x, f)| x - f)
            .collect(),
    ))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population (divisor n) standard deviation.
pub fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Zero mean, unit population standard deviation.
pub fn standardize(signal: &Signal) -> Result<Signal, SignalError> {
    let m = mean(&signal.samples);
    let centered: Vec<f64> = signal.samples.iter().map(|v| v - m).collect();
    let sd = (centered.iter().map(|v| v * v).sum::<f64>() / centered.len() as f64).sqrt();
    // Anything this small relative to the data is rounding noise on a constant.
    let scale = signal.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if sd == 0.0 || sd <= scale * 1e-12 {
        return Err(SignalError::Flat);
    }
    let mut out: Vec<f64> = centered.iter().map(|v| v / sd).collect();
    // One correction pass so the moments land within rounding of 0 and 1.
    let m2 = mean(&out);
    out.iter_mut().for_each(|v| *v -= m2);
    let sd2 = population_std(&out);
    out.iter_mut().for_each(|v| *v /= sd2);
    Ok(signal.with_samples(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakTrain {
    pub indices: Vec<usize>,
    /// Successive index differences in seconds.
    pub rr_intervals: Vec<f64>,
}

/// Locate R-peaks as strict local maxima above an adaptive threshold, at
/// least 200 ms apart.
///
/// The threshold sits 60% of the way from the signal mean to the median of
/// the maxima of consecutive 2 s windows. Within the refractory period the
/// taller candidate wins. Only order comparisons and affine-equivariant
/// statistics are used, so the result is unchanged by `a * x + b` for `a > 0`.
pub fn detect_r_peaks(signal: &Signal) -> Result<PeakTrain, SignalError> {
    let x = &signal.samples;
    let fs = signal.sampling_rate;
    let n = x.len();

    let window = ((PEAK_WINDOW_SECONDS * fs).round() as usize).max(1);
    let mut maxima: Vec<f64> = x
        .chunks(window)
        .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    maxima.sort_by(f64::total_cmp);
    let typical_max = median_sorted(&maxima);
    let m = mean(x);
    let threshold = m + PEAK_THRESHOLD_FRACTION * (typical_max - m);

    let refractory = (REFRACTORY_SECONDS * fs).ceil() as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] > threshold) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < refractory => {
                if x[i] > x[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    if peaks.len() < 2 {
        return Err(SignalError::InsufficientPeaks { found: peaks.len() });
    }
    let rr_intervals = peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / fs)
        .collect();
    Ok(PeakTrain {
        indices: peaks,
        rr_intervals,
    })
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sig(v: Vec<f64>) -> Signal {
        Signal::new(v, 100.0).unwrap()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn signal_validation() {
        assert_eq!(Signal::new(vec![1.0], 100.0), Err(SignalError::TooShort { len: 1, need: 2 }));
        assert_eq!(Signal::new(vec![1.0, f64::NAN], 100.0), Err(SignalError::NonFinite));
        assert_eq!(Signal::new(vec![1.0, 2.0], 0.0), Err(SignalError::BadRate(0.0)));
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = polynomial_basis(1000, 20);
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&b[i], &b[j]) - want).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn polynomial_input_is_removed() {
        let x: Vec<f64> = (0..1000)
            .map(|i| {
                let t = i as f64;
                3.0 - 0.02 * t + 4e-5 * t * t - 1e-8 * t.powi(3) + 2e-12 * t.powi(4) - 1e-15 * t.powi(5)
            })
            .collect();
        let range = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
        let r = detrend_polynomial(&sig(x), 20).unwrap();
        let worst = r.samples().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-6 * range, "{worst}");
    }

    #[test]
    fn constant_detrends_to_zero() {
        let r = detrend_polynomial(&sig(vec![4.2; 500]), 20).unwrap();
        assert!(r.samples().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn degenerate_fit() {
        assert_eq!(
            detrend_polynomial(&sig(vec![0.0; 21]), 20),
            Err(SignalError::DegenerateFit { len: 21, order: 20 })
        );
        assert!(detrend_polynomial(&sig(vec![0.0; 22]), 20).is_ok());
    }

    #[test]
    fn sine_survives_ramp_removal() {
        let sine: Vec<f64> = (0..1000)
            .map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 100.0).sin())
            .collect();
        let x: Vec<f64> = sine.iter().enumerate().map(|(i, s)| s + 0.002 * i as f64).collect();
        let r = detrend_polynomial(&sig(x), 20).unwrap();
        assert!(pearson(r.samples(), &sine) > 0.99);
    }

    #[test]
    fn trend_is_the_removed_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let s = sig(x.clone());
        let trend = polynomial_trend(&s, 20).unwrap();
        let r = detrend_polynomial(&s, 20).unwrap();
        for i in 0..x.len() {
            assert!((trend[i] + r.samples()[i] - x[i]).abs() < 1e-12);
        }
        // residual is orthogonal to the fitted component
        assert!(dot(&trend, r.samples()).abs() < 1e-9);
    }

    #[test]
    fn standardize_closed_form() {
        let s = standardize(&sig(vec![1.0, 2.0, 3.0])).unwrap();
        let e = 1.5f64.sqrt();
        for (a, b) in s.samples().iter().zip([-e, 0.0, e]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(standardize(&sig(vec![3.0; 10])), Err(SignalError::Flat));
    }

    #[test]
    fn standardized_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..1000).map(|_| 40.0 + 3.0 * rng.random::<f64>()).collect();
        let s = standardize(&sig(x)).unwrap();
        assert!(mean(s.samples()).abs() < 1e-12);
        assert!((population_std(s.samples()) - 1.0).abs() < 1e-12);
    }

    fn impulse_train() -> Vec<f64> {
        let mut x = vec![0.0; 1000];
        for k in 0..10 {
            x[50 + 100 * k] = 1.0;
        }
        x
    }

    #[test]
    fn impulse_train_peaks() {
        let s = standardize(&sig(impulse_train())).unwrap();
        let p = detect_r_peaks(&s).unwrap();
        assert_eq!(p.indices.len(), 10);
        assert!(p.rr_intervals.iter().all(|rr| (rr - 1.0).abs() < 1e-12));
    }

    #[test]
    fn noisy_impulse_train_peaks() {
        let noise = Normal::new(0.0, 0.1).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = impulse_train().into_iter().map(|v| v + noise.sample(&mut rng)).collect();
            let s = standardize(&sig(x)).unwrap();
            let p = detect_r_peaks(&s).unwrap();
            assert_eq!(p.indices.len(), 10, "seed {seed}");
            assert!(p.rr_intervals.iter().all(|rr| (rr - 1.0).abs() <= 0.02), "seed {seed}");
        }
    }

    #[test]
    fn flat_signal_has_no_peaks() {
        assert_eq!(
            detect_r_peaks(&sig(vec![0.5; 1000])),
            Err(SignalError::InsufficientPeaks { found: 0 })
        );
    }

    #[test]
    fn refractory_keeps_the_taller_peak() {
        let mut x = vec![0.0; 400];
        x[100] = 1.0;
        x[110] = 2.0; // 100 ms later, taller
        x[300] = 1.5;
        let p = detect_r_peaks(&sig(x)).unwrap();
        assert_eq!(p.indices, vec![110, 300]);
        assert!(p.rr_intervals.iter().all(|rr| *rr > REFRACTORY_SECONDS));
    }

    fn arb_signal() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 50..200)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn detrend_is_linear(x in arb_signal(), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let dx = detrend_polynomial(&sig(x), 20).unwrap();
            let dy = detrend_polynomial(&sig(y), 20).unwrap();
            let dc = detrend_polynomial(&sig(combo), 20).unwrap();
            for i in 0..dc.len() {
                let want = a * dx.samples()[i] + b * dy.samples()[i];
                prop_assert!((dc.samples()[i] - want).abs() < 1e-9);
            }
        }

        #[test]
        fn detrend_is_idempotent(x in arb_signal()) {
            let once = detrend_polynomial(&sig(x), 20).unwrap();
            let twice = detrend_polynomial(&once, 20).unwrap();
            for (p, q) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn standardize_is_idempotent(x in arb_signal()) {
            let once = standardize(&sig(x)).unwrap();
            let twice = standardize(&once).unwrap();
            for (p, q) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn standardize_is_affine_invariant(x in arb_signal(), a in 0.01f64..100.0, b in -100.0f64..100.0) {
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let sx = standardize(&sig(x)).unwrap();
            let sy = standardize(&sig(y)).unwrap();
            for (p, q) in sx.samples().iter().zip(sy.samples()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn peaks_are_affine_invariant(seed in any::<u64>(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            // Integer-valued, well separated amplitudes keep the comparisons exact.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x: Vec<f64> = (0..1000).map(|_| rng.random_range(0..4) as f64).collect();
            for k in 0..10 {
                x[30 + 97 * k] = 64.0 + rng.random_range(0..16) as f64;
            }
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let px = detect_r_peaks(&sig(x)).map(|p| p.indices);
            let py = detect_r_peaks(&sig(y)).map(|p| p.indices);
            prop_assert_eq!(px, py);
        }
    }
}
