use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::GazeStream;

/// Daubechies-4 (8-tap) reconstruction low-pass filter.
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];
// Filter alignment: coefficient i starts at sample 2i - 3.
const SHIFT: usize = 3;
// Scale of the MAD estimator for Gaussian noise.
const MAD_SCALE: f64 = 0.6745;

fn high_pass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (k, v) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB4[7 - k];
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Soft,
    Hard,
}

/// Universal-threshold wavelet denoising settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub levels: usize,
    pub threshold: Threshold,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            threshold: Threshold::Soft,
        }
    }
}

/// One level of the periodic transform. `x.len()` must be even.
pub fn dwt_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let g = high_pass();
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..8 {
            let j = (2 * i + k + n * 8 - SHIFT) % n;
            a += DB4[k] * x[j];
            d += g[k] * x[j];
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// Inverse of [`dwt_step`].
pub fn idwt_step(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    let n = approx.len() * 2;
    let g = high_pass();
    let mut x = vec![0.0; n];
    for i in 0..approx.len() {
        for k in 0..8 {
            let j = (2 * i + k + n * 8 - SHIFT) % n;
            x[j] += DB4[k] * approx[i] + g[k] * detail[i];
        }
    }
    x
}

/// Multi-level periodic decomposition: `(approximation, details)` with
/// details ordered finest first. Length must be divisible by `2^levels`.
pub fn wavedec(x: &[f64], levels: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if levels == 0 || x.len() % (1 << levels) != 0 {
        return Err(Error::InvalidParameter(format!(
            "length {} is not divisible by 2^{levels}",
            x.len()
        )));
    }
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = dwt_step(&approx);
        approx = a;
        details.push(d);
    }
    Ok((approx, details))
}

pub fn waverec(approx: &[f64], details: &[Vec<f64>]) -> Vec<f64> {
    details
        .iter()
        .rev()
        .fold(approx.to_vec(), |a, d| idwt_step(&a, d))
}

/// Mirrors `x` (edge sample repeated) up to a length divisible by
/// `2^(levels-1)`, then appends the reversed copy, giving a continuous
/// periodic signal whose length is divisible by `2^levels`.
fn symmetric_extension(x: &[f64], levels: usize) -> Vec<f64> {
    let block = 1usize << (levels - 1);
    let padded_len = x.len().div_ceil(block) * block;
    let mut ext: Vec<f64> = x.to_vec();
    let mut k = x.len();
    while ext.len() < padded_len {
        k -= 1;
        ext.push(x[k]);
    }
    let tail: Vec<f64> = ext.iter().rev().copied().collect();
    ext.extend(tail);
    ext
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Noise level from the finest detail coefficients: median(|d|) / 0.6745.
pub fn estimate_sigma(finest_detail: &[f64]) -> f64 {
    if finest_detail.is_empty() {
        return 0.0;
    }
    median(finest_detail.iter().map(|d| d.abs()).collect()) / MAD_SCALE
}

fn shrink(c: f64, t: f64, mode: Threshold) -> f64 {
    match mode {
        Threshold::Soft => c.signum() * (c.abs() - t).max(0.0),
        Threshold::Hard => {
            if c.abs() > t {
                c
            } else {
                0.0
            }
        }
    }
}

/// Denoised channel and the noise level estimated for it.
pub fn denoise_channel(x: &[f64], config: &WaveletConfig) -> Result<(Vec<f64>, f64)> {
    if config.levels == 0 {
        return Err(Error::InvalidParameter("wavelet levels must be at least 1".into()));
    }
    if x.len() < 1 << config.levels {
        return Err(Error::InsufficientData(format!(
            "{} samples is too short for a {}-level decomposition",
            x.len(),
            config.levels
        )));
    }
    let ext = symmetric_extension(x, config.levels);
    let (approx, mut details) = wavedec(&ext, config.levels)?;
    let sigma = estimate_sigma(&details[0]);
    let threshold = sigma * (2.0 * (x.len() as f64).ln()).sqrt();
    for d in details.iter_mut() {
        for c in d.iter_mut() {
            *c = shrink(*c, threshold, config.threshold);
        }
    }
    let mut out = waverec(&approx, &details);
    out.truncate(x.len());
    Ok((out, sigma))
}

/// Denoises θ and ψ independently with the universal threshold
/// σ̂·sqrt(2 ln n). Timestamps pass through unchanged.
pub fn wavelet_denoise(stream: &GazeStream, config: &WaveletConfig) -> Result<GazeStream> {
    let theta: Vec<f64> = stream.theta().collect();
    let psi: Vec<f64> = stream.psi().collect();
    let (theta, _) = denoise_channel(&theta, config)?;
    let (psi, _) = denoise_channel(&psi, config)?;
    let samples = stream
        .samples
        .iter()
        .zip(theta.into_iter().zip(psi))
        .map(|(s, (t, p))| s.with_angles(t, p))
        .collect();
    Ok(stream.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, &[]);
        let d = Normal::new(0.0, sigma).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn filter_identities() {
        let s: f64 = DB4.iter().sum();
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        assert!((DB4.iter().map(|h| h * h).sum::<f64>() - 1.0).abs() < 1e-12);
        // Four vanishing moments.
        let g = high_pass();
        for m in 0..4 {
            let moment: f64 = g.iter().enumerate().map(|(k, v)| v * (k as f64).powi(m)).sum();
            assert!(moment.abs() < 1e-9, "moment {m}: {moment}");
        }
    }

    #[test]
    fn matches_reference_transform() {
        // Values from an independent periodized db4 implementation.
        let x: Vec<f64> = (0..32).map(|i| (0.3 * i as f64).sin() + 0.1 * i as f64).collect();
        let (a, d) = wavedec(&x, 2).unwrap();
        let a2 = [
            7.632595703311, 5.186406245339, 1.787442611473, 3.130051799346, 2.207548894447,
            1.0241490342, 2.101062679732, 5.057291929431,
        ];
        let d2 = [
            1.049466432468, -0.335175195776, -0.052544324735, 0.047703279473, 0.078277802511,
            0.001638960506, -0.304216683673, -2.156244102045,
        ];
        let d1_head = [-0.076438421154, -0.041731520301, -0.004061138128, -0.003334409175];
        let d1_tail = [0.69460182867, 0.605353530829];
        for (x, y) in a.iter().zip(a2) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in d[1].iter().zip(d2) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in d[0].iter().zip(d1_head) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in d[0][14..].iter().zip(d1_tail) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_is_untouched() {
        let x = vec![7.25; 300];
        let (y, sigma) = denoise_channel(&x, &WaveletConfig::default()).unwrap();
        assert!(sigma < 1e-9);
        assert!(y.iter().all(|v| (v - 7.25).abs() < 1e-6));
    }

    #[test]
    fn sigma_estimate_on_noise() {
        for seed in 0..10 {
            let x = noise(4096, 3.0, seed);
            let (_, d) = wavedec(&x, 1).unwrap();
            let s = estimate_sigma(&d[0]);
            assert!((2.7..=3.3).contains(&s), "seed {seed}: {s}");
        }
    }

    #[test]
    fn sinusoid_error_halved() {
        let rate = 125.0;
        let n = 1250;
        let clean: Vec<f64> = (0..n)
            .map(|i| 10.0 * (std::f64::consts::TAU * i as f64 / rate).sin())
            .collect();
        let noisy: Vec<f64> = clean.iter().zip(noise(n, 3.0, 5)).map(|(c, e)| c + e).collect();
        let (den, _) = denoise_channel(&noisy, &WaveletConfig::default()).unwrap();
        let mse = |y: &[f64]| y.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        let (before, after) = (mse(&noisy), mse(&den));
        assert!(after <= 0.5 * before, "{before} -> {after}");
    }

    #[test]
    fn stream_shape_preserved() {
        let s = GazeStream::from_angles("u", 1, 72.0, (0..1001).map(|i| ((i as f64 * 0.02).sin(), 1.0)));
        let d = wavelet_denoise(&s, &WaveletConfig::default()).unwrap();
        assert_eq!(d.len(), s.len());
        assert!(d.samples.iter().zip(&s.samples).all(|(a, b)| a.timestamp_s == b.timestamp_s));
        let short = GazeStream::from_angles("u", 1, 72.0, (0..15).map(|_| (0.0, 0.0)));
        assert!(matches!(
            wavelet_denoise(&short, &WaveletConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    proptest! {
        #[test]
        fn perfect_reconstruction(xs in prop::collection::vec(-50.0f64..50.0, 1..20), levels in 1usize..5) {
            let n = xs.len() << levels;
            let x: Vec<f64> = (0..n).map(|i| xs[i % xs.len()] + i as f64 * 0.01).collect();
            let (a, d) = wavedec(&x, levels).unwrap();
            let y = waverec(&a, &d);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn extension_is_periodic_and_divisible(n in 16usize..400, levels in 1usize..5) {
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let e = symmetric_extension(&x, levels);
            prop_assert_eq!(e.len() % (1 << levels), 0);
            prop_assert_eq!(&e[..n], &x[..]);
            prop_assert_eq!(e[e.len() - 1], x[0]);
        }
    }
}
