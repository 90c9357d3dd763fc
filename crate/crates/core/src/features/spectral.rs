//! Magnitude spectra.
//!
//! `rfft_features` returns `|X_k| / L` for `k = 0..=L/2`, where `X` is the
//! unnormalized DFT of the rectangular-windowed input. A cosine of amplitude
//! `A` on bin `k` (0 < k < L/2) shows up as `A/2`; the one-sided bins are not
//! doubled. With this scaling Parseval reads
//! `L * (m_0^2 + 2 * sum_{0<k<L/2} m_k^2 + m_{L/2}^2) = sum x^2` for even `L`.
//!
//! `stft_features` slides a periodic Hann window of `sub_len` samples with hop
//! `round(sub_len * (1 - sub_overlap))`, takes the same scaled magnitude
//! spectrum of each weighted frame, and concatenates the frames in time
//! order: `frames * (sub_len/2 + 1)` values.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn scaled_magnitudes(frame: impl Iterator<Item = f64>, len: usize) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = frame.map(|x| Complex::new(x, 0.0)).collect();
    debug_assert_eq!(buf.len(), len);
    if len == 0 {
        return Vec::new();
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len));
    fft.process(&mut buf);
    let scale = 1.0 / len as f64;
    buf[..len / 2 + 1].iter().map(|c| c.norm() * scale).collect()
}

pub fn rfft_features(window: &[f64]) -> Vec<f64> {
    scaled_magnitudes(window.iter().copied(), window.len())
}

/// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftSpec {
    pub sub_len: usize,
    pub sub_overlap: f64,
}

impl Default for StftSpec {
    fn default() -> Self {
        StftSpec {
            sub_len: 256,
            sub_overlap: 0.5,
        }
    }
}

impl StftSpec {
    pub fn hop(&self) -> usize {
        (self.sub_len as f64 * (1.0 - self.sub_overlap)).round() as usize
    }

    pub fn frames(&self, window_len: usize) -> usize {
        if window_len < self.sub_len {
            0
        } else {
            (window_len - self.sub_len) / self.hop() + 1
        }
    }

    pub fn bins(&self) -> usize {
        self.sub_len / 2 + 1
    }

    pub fn output_len(&self, window_len: usize) -> usize {
        self.frames(window_len) * self.bins()
    }

    pub fn validate(&self, window_len: usize) -> Result<()> {
        if self.sub_len == 0 || !(0.0..1.0).contains(&self.sub_overlap) || self.hop() == 0 {
            return Err(Error::Config(format!("invalid STFT parameters {self:?}")));
        }
        if self.sub_len > window_len {
            return Err(Error::InvalidInput(format!(
                "STFT sub-window {} longer than window {window_len}",
                self.sub_len
            )));
        }
        Ok(())
    }
}

pub fn stft_features(window: &[f64], spec: &StftSpec) -> Result<Vec<f64>> {
    spec.validate(window.len())?;
    let taper = hann(spec.sub_len);
    let hop = spec.hop();
    let mut out = Vec::with_capacity(spec.output_len(window.len()));
    for f in 0..spec.frames(window.len()) {
        let frame = &window[f * hop..f * hop + spec.sub_len];
        out.extend(scaled_magnitudes(
            frame.iter().zip(&taper).map(|(x, w)| x * w),
            spec.sub_len,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn naive_dft(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let ph = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (re * re + im * im).sqrt() / n as f64
            })
            .collect()
    }

    #[test]
    fn cosine_on_a_bin() {
        let (n, k, a) = (512, 37, 3.0);
        let x: Vec<f64> = (0..n).map(|t| a * (2.0 * PI * (k * t) as f64 / n as f64).cos()).collect();
        let m = rfft_features(&x);
        assert_eq!(m.len(), n / 2 + 1);
        for (i, v) in m.iter().enumerate() {
            let want = if i == k { a / 2.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "bin {i}: {v}");
        }
    }

    #[test]
    fn zeros_give_zeros() {
        assert!(rfft_features(&[0.0; 64]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_dft() {
        let mut s = Stream::new(5, 0);
        let x: Vec<f64> = (0..300).map(|_| s.normal()).collect();
        for (a, b) in rfft_features(&x).iter().zip(naive_dft(&x)) {
            assert!((a - b).abs() <= 1e-9 * b.max(1e-3));
        }
    }

    #[test]
    fn parseval() {
        let mut s = Stream::new(6, 0);
        let x: Vec<f64> = (0..1024).map(|_| s.normal() * 2.0 + 0.3).collect();
        let m = rfft_features(&x);
        let l = x.len() as f64;
        let inner: f64 = m[1..m.len() - 1].iter().map(|v| v * v).sum();
        let spectral = l * (m[0] * m[0] + 2.0 * inner + m[m.len() - 1].powi(2));
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert!((spectral - energy).abs() <= 1e-6 * energy);
    }

    #[test]
    fn stationary_tone_keeps_its_bin() {
        let x: Vec<f64> = (0..2048).map(|t| (2.0 * PI * 0.1 * t as f64).sin()).collect();
        let spec = StftSpec::default();
        let v = stft_features(&x, &spec).unwrap();
        assert_eq!(v.len(), 15 * 129);
        let argmaxes: Vec<usize> = v
            .chunks(spec.bins())
            .map(|f| (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap())
            .collect();
        assert!(argmaxes.iter().all(|&a| a == argmaxes[0]));
        assert_eq!(argmaxes[0], (0.1 * 256.0_f64).round() as usize);
    }

    #[test]
    fn chirp_argmax_is_non_decreasing() {
        // instantaneous frequency rises from 0.02 to 0.4 cycles/sample
        let n = 2048;
        let (f0, f1) = (0.02, 0.4);
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let t = t as f64;
                (2.0 * PI * (f0 * t + 0.5 * (f1 - f0) / n as f64 * t * t)).sin()
            })
            .collect();
        let spec = StftSpec::default();
        let v = stft_features(&x, &spec).unwrap();
        let argmaxes: Vec<usize> = v
            .chunks(spec.bins())
            .map(|f| (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap())
            .collect();
        assert!(argmaxes.windows(2).all(|w| w[0] <= w[1]), "{argmaxes:?}");
        assert!(argmaxes.last().unwrap() > argmaxes.first().unwrap());
    }

    #[test]
    fn degenerate_stft_is_hann_rfft() {
        let mut s = Stream::new(7, 0);
        let x: Vec<f64> = (0..512).map(|_| s.normal()).collect();
        let spec = StftSpec {
            sub_len: 512,
            sub_overlap: 0.0,
        };
        let tapered: Vec<f64> = x.iter().zip(hann(512)).map(|(a, w)| a * w).collect();
        let want = rfft_features(&tapered);
        let got = stft_features(&x, &spec).unwrap();
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn sub_window_longer_than_window() {
        assert!(stft_features(&[0.0; 100], &StftSpec::default()).is_err());
    }

    #[test]
    fn amplitude_equivariance() {
        let mut s = Stream::new(8, 0);
        let x: Vec<f64> = (0..256).map(|_| s.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| -4.0 * v).collect();
        for (a, b) in rfft_features(&x).iter().zip(rfft_features(&y)) {
            assert!((4.0 * a - b).abs() <= 1e-9 * b + 1e-12);
        }
    }
}
