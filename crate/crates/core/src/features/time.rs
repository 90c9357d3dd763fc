//! Time-domain statistics of a window.
//!
//! Conventions: moments are population moments (divide by `n`); kurtosis is
//! excess (Fisher) kurtosis; the absolute median is `median(|x|)`; energy is
//! `sum x^2`; crest factor is `max|x| / RMS`, reported as 0 when RMS < 1e-12.
//! A peak is a local maximum (plateaus count once, at their middle) with
//! topographic prominence of at least half the standard deviation. Zero
//! crossings are sign changes of `x - mean(x)`, with exact zeros counted as
//! positive. The normality statistic is the Shapiro-Wilk W (Royston's
//! approximation for the coefficients) over at most 512 points; longer windows
//! are subsampled with a fixed-seed draw. The divergence is
//! `KL(histogram || Gaussian)` over 32 equal-width bins spanning the window's
//! range, the Gaussian having the window's mean and standard deviation; both
//! bin-mass vectors get 1e-9 added and are renormalized before comparison.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub const TIME_FEATURE_NAMES: [&str; 12] = [
    "mean",
    "abs_median",
    "std",
    "skewness",
    "kurtosis",
    "crest_factor",
    "energy",
    "rms",
    "n_peaks",
    "n_zero_crossings",
    "shapiro_w",
    "kl_divergence",
];

pub const MIN_TIME_WINDOW: usize = 8;
const SHAPIRO_MAX_POINTS: usize = 512;
const SHAPIRO_SUBSAMPLE_SEED: u64 = 0x5348_4150_4952_4f57;
const KL_BINS: usize = 32;
const KL_SMOOTHING: f64 = 1e-9;
const RMS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub values: [f64; 12],
    /// The crest factor was forced to 0 because the window has no energy.
    pub crest_guarded: bool,
}

pub fn time_features(window: &[f64]) -> Result<TimeFeatures> {
    let n = window.len();
    if n < MIN_TIME_WINDOW {
        return Err(Error::InvalidInput(format!(
            "time features need at least {MIN_TIME_WINDOW} samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = window.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in window {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let std = m2.sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let energy: f64 = window.iter().map(|x| x * x).sum();
    let rms = (energy / nf).sqrt();
    let peak = window.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let crest_guarded = rms < RMS_FLOOR;
    let crest = if crest_guarded { 0.0 } else { peak / rms };

    let values = [
        mean,
        abs_median(window),
        std,
        skewness,
        kurtosis,
        crest,
        energy,
        rms,
        count_peaks(window, 0.5 * std) as f64,
        zero_crossings(window, mean) as f64,
        shapiro_w(&shapiro_subsample(window)),
        kl_divergence(window, mean, std),
    ];
    Ok(TimeFeatures {
        values,
        crest_guarded,
    })
}

fn abs_median(x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    }
}

fn zero_crossings(x: &[f64], mean: f64) -> usize {
    x.windows(2)
        .filter(|w| ((w[0] - mean) >= 0.0) != ((w[1] - mean) >= 0.0))
        .count()
}

/// Indices of local maxima; a flat top is reported once at its midpoint.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

fn count_peaks(x: &[f64], min_prominence: f64) -> usize {
    local_maxima(x)
        .into_iter()
        .filter(|&p| prominence(x, p) >= min_prominence)
        .count()
}

fn shapiro_subsample(x: &[f64]) -> Vec<f64> {
    if x.len() <= SHAPIRO_MAX_POINTS {
        return x.to_vec();
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    Stream::new(SHAPIRO_SUBSAMPLE_SEED, 0).shuffle(&mut idx);
    idx.truncate(SHAPIRO_MAX_POINTS);
    idx.sort_unstable();
    idx.into_iter().map(|i| x[i]).collect()
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Shapiro-Wilk W; 1 for fewer than 3 points or a constant sample.
pub fn shapiro_w(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return 1.0;
    }
    let mut y = x.to_vec();
    y.sort_by(f64::total_cmp);
    if y[n - 1] - y[0] < 1e-300 {
        return 1.0;
    }
    let half = n / 2;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = 0.5_f64.sqrt();
    } else {
        let normal = std_normal();
        let nf = n as f64;
        // expected upper-tail normal order statistics, largest first
        let m: Vec<f64> = (0..half)
            .map(|i| normal.inverse_cdf((nf - i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let u = 1.0 / nf.sqrt();
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let a1 = poly(&C1, u) + m[0] / ssumm2;
        a[0] = a1;
        let (first_free, fac) = if n > 5 {
            let a2 = poly(&C2, u) + m[1] / ssumm2;
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        for i in first_free..half {
            a[i] = m[i] / fac;
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (y[n - 1 - i] - y[i])).sum();
    (num * num / ss).min(1.0)
}

fn kl_divergence(x: &[f64], mean: f64, std: f64) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(std > 0.0) || !(hi > lo) {
        return 0.0;
    }
    let width = (hi - lo) / KL_BINS as f64;
    let mut counts = [0usize; KL_BINS];
    for &v in x {
        let b = (((v - lo) / width) as usize).min(KL_BINS - 1);
        counts[b] += 1;
    }
    let normal = Normal::new(mean, std).expect("positive std");
    let mut p = [0.0; KL_BINS];
    let mut q = [0.0; KL_BINS];
    for b in 0..KL_BINS {
        let left = lo + width * b as f64;
        let right = if b + 1 == KL_BINS { hi } else { lo + width * (b + 1) as f64 };
        p[b] = counts[b] as f64 / x.len() as f64 + KL_SMOOTHING;
        q[b] = normal.cdf(right) - normal.cdf(left) + KL_SMOOTHING;
    }
    let (ps, qs): (f64, f64) = (p.iter().sum(), q.iter().sum());
    p.iter()
        .zip(&q)
        .map(|(&pb, &qb)| {
            let (pb, qb) = (pb / ps, qb / qs);
            pb * (pb / qb).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Reference values computed with numpy/scipy (skew, kurtosis,
    /// find_peaks(prominence=0.5*std), shapiro, histogram) for the input
    /// below.
    fn fixture() -> Vec<f64> {
        (0..256)
            .map(|n| {
                let t = n as f64;
                (0.37 * t).sin() + 0.5 * (1.91 * t + 0.2).sin() + 0.8 * ((t * t * 0.618034) % 1.0 - 0.5)
            })
            .collect()
    }

    const FIXTURE_EXPECTED: [f64; 12] = [
        0.005458988357304472,
        0.6703969797182447,
        0.8149295061553129,
        0.04127039897234854,
        -0.9426732537537323,
        2.2169115565477733,
        170.01981454244543,
        0.8149477900800931,
        60.0,
        53.0,
        0.9775867216905708,
        0.06388723733402678,
    ];

    #[test]
    fn matches_reference_statistics() {
        let f = time_features(&fixture()).unwrap();
        for (i, (got, want)) in f.values.iter().zip(FIXTURE_EXPECTED).enumerate() {
            // W reference uses a lower-precision normal quantile approximation
            let tol = if i == 10 { 1e-6 } else { 1e-9 };
            assert!(
                (got - want).abs() <= tol * want.abs().max(1.0),
                "{}: {got} vs {want}",
                TIME_FEATURE_NAMES[i]
            );
        }
    }

    #[test]
    fn unit_sine() {
        let cycles = 8.0;
        let x: Vec<f64> = (0..2048)
            .map(|n| (2.0 * PI * cycles * n as f64 / 2048.0 + 0.3).sin())
            .collect();
        let v = time_features(&x).unwrap().values;
        assert!(v[0].abs() < 1e-9);
        assert!((v[7] - 0.5_f64.sqrt()).abs() < 1e-9);
        assert!((v[5] - 2.0_f64.sqrt()).abs() < 1e-3);
        assert_eq!(v[9], 2.0 * cycles);
        assert_eq!(v[8], cycles);
    }

    #[test]
    fn zero_window() {
        let f = time_features(&[0.0; 64]).unwrap();
        assert!(f.crest_guarded);
        let v = f.values;
        for i in [0, 1, 2, 5, 6, 7, 8, 9] {
            assert_eq!(v[i], 0.0, "{}", TIME_FEATURE_NAMES[i]);
        }
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn gaussian_noise_statistics() {
        let mut s = Stream::new(42, 0);
        let x: Vec<f64> = (0..2048).map(|_| s.normal()).collect();
        let v = time_features(&x).unwrap().values;
        assert!(v[3].abs() <= 0.3, "skew {}", v[3]);
        assert!(v[4].abs() <= 0.5, "kurtosis {}", v[4]);
        assert!(v[10] >= 0.98, "W {}", v[10]);
    }

    #[test]
    fn shapiro_small_samples_match_reference() {
        // scipy.stats.shapiro([1, 2, 4]) and ([1, 2, 3, 4, 10, 3])
        assert!((shapiro_w(&[1.0, 2.0, 4.0]) - 0.9642857142857142).abs() < 1e-9);
        assert!((shapiro_w(&[1.0, 2.0, 3.0, 4.0, 10.0, 3.0]) - 0.7927713855043578).abs() < 1e-6);
    }

    #[test]
    fn too_short_window() {
        assert!(time_features(&[1.0; 7]).is_err());
    }

    #[test]
    fn scaling_behaviour() {
        let x = fixture();
        let c = -2.5;
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = time_features(&x).unwrap().values;
        let b = time_features(&y).unwrap().values;
        let close = |p: f64, q: f64| (p - q).abs() <= 1e-9 * p.abs().max(1.0);
        assert!(close(b[0], c * a[0]));
        assert!(close(b[2], c.abs() * a[2]));
        assert!(close(b[7], c.abs() * a[7]));
        assert!(close(b[3], -a[3]), "skewness flips with the sign");
        assert!(close(b[4], a[4]));
        assert!(close(b[10], a[10]));
        assert_eq!(b[9], a[9]);
    }

    #[test]
    fn plateau_peak_counts_once() {
        let x = [0.0, 1.0, 3.0, 3.0, 3.0, 1.0, 0.0, 2.0, 0.0];
        assert_eq!(local_maxima(&x), vec![3, 7]);
    }
}
