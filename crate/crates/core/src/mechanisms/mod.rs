//! Per-sample privacy mechanisms.
//!
//! Each mechanism is a streaming operator: it sees one gaze sample at a time,
//! in capture order, and emits exactly one privatized sample with the same
//! timestamp. Temporal downsampling and smoothing carry state between frames,
//! so a single stream must be processed sequentially; distinct streams share
//! nothing and can be privatized in parallel.

mod bench;
mod config;

pub use bench::{bench_mechanism, BenchReport, MIN_BENCH_SAMPLES};
pub use config::{
    MechanismConfig, MechanismKind, MechanismSpec, Preset, MAX_SWEEP_B, MAX_SWEEP_K, MAX_SWEEP_L,
    MAX_SWEEP_SIGMA_DEG,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeStream};
use crate::rng::{stream_rng, GazeRng};

/// Adds independent N(0, σ) noise to both angles.
pub fn apply_gaussian<R: Rng + ?Sized>(
    sample: &GazeSample,
    sigma_deg: f64,
    rng: &mut R,
) -> Result<GazeSample> {
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be finite and >= 0, got {sigma_deg}"
        )));
    }
    if sigma_deg == 0.0 {
        return Ok(*sample);
    }
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    Ok(sample.with_angles(sample.theta_deg + sigma_deg * x, sample.psi_deg + sigma_deg * y))
}

/// Sample-and-hold state for temporal downsampling.
#[derive(Debug, Clone, Default)]
pub struct TemporalState {
    frame_counter: u64,
    last_output: (f64, f64),
}

impl TemporalState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frame_counter(&self) -> u64 {
        self.frame_counter
    }
}

/// Passes frame n through when n is a multiple of k, otherwise repeats the
/// previous output angles under the current timestamp.
pub fn apply_temporal(sample: &GazeSample, k: usize, state: &mut TemporalState) -> GazeSample {
    let k = k.max(1) as u64;
    let n = state.frame_counter;
    state.frame_counter += 1;
    if n % k == 0 {
        state.last_output = (sample.theta_deg, sample.psi_deg);
        *sample
    } else {
        sample.with_angles(state.last_output.0, state.last_output.1)
    }
}

/// Quantization grid for spatial downsampling: 2160 base points over a 180°
/// field of view, coarsened by a factor `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    l: usize,
    m: f64,
    delta_deg: f64,
}

impl SpatialGrid {
    pub const BASE_POINTS: f64 = 2160.0;
    pub const FOV_DEG: f64 = 180.0;

    pub fn new(l: usize) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidParameter("spatial l must be >= 1".into()));
        }
        // M stays real-valued so that factors not dividing 2160 still work.
        let m = Self::BASE_POINTS / l as f64;
        Ok(Self {
            l,
            m,
            delta_deg: Self::FOV_DEG / m,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Cell size in degrees (l / 12).
    pub fn delta_deg(&self) -> f64 {
        self.delta_deg
    }

    /// Floors an angle to the lower edge of its cell.
    pub fn quantize(&self, angle_deg: f64) -> f64 {
        let delta = self.delta_deg;
        let mut cell = (angle_deg / delta).floor();
        // The division can land one ulp on the wrong side of an integer;
        // nudge so that cell * delta <= angle < (cell + 1) * delta holds.
        if cell * delta > angle_deg {
            cell -= 1.0;
        } else if (cell + 1.0) * delta <= angle_deg {
            cell += 1.0;
        }
        cell * delta
    }
}

/// Floors both angles onto the grid.
pub fn apply_spatial(sample: &GazeSample, grid: &SpatialGrid) -> GazeSample {
    sample.with_angles(grid.quantize(sample.theta_deg), grid.quantize(sample.psi_deg))
}

/// Sliding window for linearly weighted average smoothing.
///
/// The window holds the last `b` raw inputs, oldest first; the i-th oldest
/// (1-based) is weighted by i and the sum is divided by b(b+1)/2.
#[derive(Debug, Clone)]
pub struct SmoothingState {
    theta: Vec<f64>,
    psi: Vec<f64>,
    // Index of the oldest entry.
    head: usize,
    d: f64,
    primed: bool,
    warm_start: bool,
}

impl SmoothingState {
    /// Zero-filled window of length `b`.
    pub fn new(b: usize) -> Self {
        let b = b.max(1);
        Self {
            theta: vec![0.0; b],
            psi: vec![0.0; b],
            head: 0,
            d: (1..=b).map(|i| i as f64).sum(),
            primed: true,
            warm_start: false,
        }
    }

    /// Window that is filled with the first sample it sees instead of zeros.
    pub fn warm_start(b: usize) -> Self {
        Self {
            primed: false,
            warm_start: true,
            ..Self::new(b)
        }
    }

    pub fn window_len(&self) -> usize {
        self.theta.len()
    }

    /// Weight normalizer b(b+1)/2.
    pub fn normalizer(&self) -> f64 {
        self.d
    }

    pub fn is_warm_start(&self) -> bool {
        self.warm_start
    }

    fn push(&mut self, theta: f64, psi: f64) {
        if !self.primed {
            self.theta.fill(theta);
            self.psi.fill(psi);
            self.primed = true;
        }
        // Overwriting the oldest slot is the pop-then-push of a queue.
        self.theta[self.head] = theta;
        self.psi[self.head] = psi;
        self.head = (self.head + 1) % self.theta.len();
    }

    fn weighted_mean(&self) -> (f64, f64) {
        let b = self.theta.len();
        let (mut sum_theta, mut sum_psi) = (0.0, 0.0);
        let mut weight = 1.0;
        // Oldest entries run from head to the end, then wrap to the start.
        for idx in (self.head..b).chain(0..self.head) {
            sum_theta += self.theta[idx] * weight;
            sum_psi += self.psi[idx] * weight;
            weight += 1.0;
        }
        (sum_theta / self.d, sum_psi / self.d)
    }
}

/// Pushes the raw sample into the window and returns the weighted average.
pub fn apply_smoothing(sample: &GazeSample, state: &mut SmoothingState) -> GazeSample {
    state.push(sample.theta_deg, sample.psi_deg);
    let (theta, psi) = state.weighted_mean();
    sample.with_angles(theta, psi)
}

/// Per-stream mutable state for any mechanism.
#[derive(Debug, Clone)]
pub enum MechanismState {
    None,
    Gaussian { sigma_deg: f64, rng: Box<GazeRng> },
    Temporal { k: usize, state: TemporalState },
    Spatial { grid: SpatialGrid },
    Smoothing { state: SmoothingState },
}

impl MechanismState {
    /// Fresh state for one stream, with noise drawn from `rng`.
    pub fn new(config: &MechanismConfig, rng: GazeRng) -> Result<Self> {
        config.validate()?;
        Ok(match *config {
            MechanismConfig::None => MechanismState::None,
            MechanismConfig::Gaussian { sigma_deg } => MechanismState::Gaussian {
                sigma_deg,
                rng: Box::new(rng),
            },
            MechanismConfig::Temporal { k } => MechanismState::Temporal {
                k,
                state: TemporalState::new(),
            },
            MechanismConfig::Spatial { l } => MechanismState::Spatial {
                grid: SpatialGrid::new(l)?,
            },
            MechanismConfig::Smoothing { b, warm_start } => MechanismState::Smoothing {
                state: if warm_start {
                    SmoothingState::warm_start(b)
                } else {
                    SmoothingState::new(b)
                },
            },
        })
    }

    /// Fresh state for the stream identified by `(user_id, trial_id)`.
    pub fn for_stream(
        config: &MechanismConfig,
        master_seed: u64,
        user_id: &str,
        trial_id: u32,
    ) -> Result<Self> {
        Self::new(config, stream_rng(master_seed, user_id, trial_id))
    }

    /// Processes the next frame.
    pub fn apply(&mut self, sample: &GazeSample) -> Result<GazeSample> {
        Ok(match self {
            MechanismState::None => *sample,
            MechanismState::Gaussian { sigma_deg, rng } => {
                apply_gaussian(sample, *sigma_deg, rng.as_mut())?
            }
            MechanismState::Temporal { k, state } => apply_temporal(sample, *k, state),
            MechanismState::Spatial { grid } => apply_spatial(sample, grid),
            MechanismState::Smoothing { state } => apply_smoothing(sample, state),
        })
    }
}

/// Privatizes a whole stream frame by frame with fresh state.
///
/// Noise for stochastic mechanisms comes from a substream keyed by
/// `(master_seed, user_id, trial_id)`, so the result does not depend on
/// which other streams are processed or in what order.
pub fn privatize_stream(
    stream: &GazeStream,
    config: &MechanismConfig,
    master_seed: u64,
) -> Result<GazeStream> {
    if matches!(config, MechanismConfig::None) {
        return Ok(stream.clone());
    }
    let mut state =
        MechanismState::for_stream(config, master_seed, &stream.user_id, stream.trial_id)?;
    let samples = stream
        .samples
        .iter()
        .map(|s| state.apply(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(stream.with_samples(samples))
}

/// Privatizes many streams in parallel. Output order matches input order.
pub fn privatize_all(
    streams: &[GazeStream],
    config: &MechanismConfig,
    master_seed: u64,
) -> Result<Vec<GazeStream>> {
    use rayon::prelude::*;
    streams
        .par_iter()
        .map(|s| privatize_stream(s, config, master_seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn s(theta: f64, psi: f64) -> GazeSample {
        GazeSample::new(theta, psi, 0.0)
    }

    fn random_stream(seed: u64, n: usize) -> GazeStream {
        let mut rng = GazeRng::seed_from_u64(seed);
        GazeStream::from_angles(
            format!("u{seed}"),
            1,
            72.0,
            (0..n).map(|_| (rng.random_range(-45.0..45.0), rng.random_range(-45.0..45.0))),
        )
    }

    #[test]
    fn gaussian_zero_sigma_is_identity() {
        let mut rng = GazeRng::seed_from_u64(1);
        let x = GazeSample::new(-0.0, 12.5, 3.0);
        let y = apply_gaussian(&x, 0.0, &mut rng).unwrap();
        assert_eq!(x.theta_deg.to_bits(), y.theta_deg.to_bits());
        assert_eq!(x.psi_deg.to_bits(), y.psi_deg.to_bits());
    }

    #[test]
    fn gaussian_rejects_negative_sigma() {
        let mut rng = GazeRng::seed_from_u64(1);
        assert!(matches!(
            apply_gaussian(&s(0.0, 0.0), -0.5, &mut rng),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = GazeRng::seed_from_u64(99);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| apply_gaussian(&s(0.0, 0.0), 3.0, &mut rng).unwrap().theta_deg)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((2.94..=3.06).contains(&var.sqrt()), "{}", var.sqrt());
    }

    #[test]
    fn gaussian_reproducible() {
        let stream = random_stream(5, 500);
        let cfg = MechanismConfig::Gaussian { sigma_deg: 3.0 };
        let a = privatize_stream(&stream, &cfg, 11).unwrap();
        let b = privatize_stream(&stream, &cfg, 11).unwrap();
        let c = privatize_stream(&stream, &cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn temporal_rule() {
        let mut st = TemporalState::new();
        let inputs = [s(1.0, 1.0), s(2.0, 2.0), s(3.0, 3.0), s(4.0, 4.0)];
        let out: Vec<f64> = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let x = GazeSample::new(x.theta_deg, x.psi_deg, i as f64);
                let y = apply_temporal(&x, 3, &mut st);
                assert_eq!(y.timestamp_s, i as f64);
                y.theta_deg
            })
            .collect();
        assert_eq!(out, vec![1.0, 1.0, 1.0, 4.0]);
        assert_eq!(st.frame_counter(), 4);
    }

    #[test]
    fn temporal_held_value_count() {
        let stream = random_stream(3, 6480);
        let out = privatize_stream(&stream, &MechanismConfig::Temporal { k: 3 }, 0).unwrap();
        let changes = 1 + out
            .samples
            .windows(2)
            .filter(|w| w[0].theta_deg != w[1].theta_deg)
            .count();
        assert_eq!(changes, 2160);
    }

    #[test]
    fn spatial_examples() {
        let g48 = SpatialGrid::new(48).unwrap();
        assert_eq!(g48.delta_deg(), 4.0);
        let y = apply_spatial(&s(10.5, -3.2), &g48);
        assert_eq!((y.theta_deg, y.psi_deg), (8.0, -4.0));
        let g144 = SpatialGrid::new(144).unwrap();
        assert_eq!(g144.delta_deg(), 12.0);
        let y = apply_spatial(&s(10.5, -3.2), &g144);
        assert_eq!((y.theta_deg, y.psi_deg), (0.0, -12.0));
    }

    #[test]
    fn spatial_grid_delta() {
        for l in [1, 7, 12, 48, 144, 256, 300] {
            let g = SpatialGrid::new(l).unwrap();
            assert!((g.delta_deg() - l as f64 / 12.0).abs() <= 4.0 * f64::EPSILON * g.delta_deg());
            assert!((g.m() - 2160.0 / l as f64).abs() < 1e-12);
        }
        assert!(SpatialGrid::new(0).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let mut st = SmoothingState::new(3);
        assert_eq!(st.normalizer(), 6.0);
        let y1 = apply_smoothing(&s(6.0, 0.0), &mut st);
        assert_eq!((y1.theta_deg, y1.psi_deg), (3.0, 0.0));
        let y2 = apply_smoothing(&s(6.0, 0.0), &mut st);
        assert_eq!((y2.theta_deg, y2.psi_deg), (5.0, 0.0));
        let y3 = apply_smoothing(&s(6.0, 0.0), &mut st);
        assert_eq!(y3.theta_deg, 6.0);
    }

    #[test]
    fn smoothing_constant_after_saturation() {
        let mut st = SmoothingState::new(7);
        let mut last = s(0.0, 0.0);
        for _ in 0..20 {
            last = apply_smoothing(&s(2.5, -1.25), &mut st);
        }
        assert_eq!((last.theta_deg, last.psi_deg), (2.5, -1.25));
    }

    #[test]
    fn smoothing_warm_start_removes_zero_bias() {
        let mut st = SmoothingState::warm_start(50);
        let y = apply_smoothing(&s(10.0, -5.0), &mut st);
        assert!((y.theta_deg - 10.0).abs() < 1e-12);
        assert!((y.psi_deg + 5.0).abs() < 1e-12);
    }

    #[test]
    fn identities() {
        let stream = random_stream(8, 300);
        for cfg in [
            MechanismConfig::None,
            MechanismConfig::Gaussian { sigma_deg: 0.0 },
            MechanismConfig::Temporal { k: 1 },
            MechanismConfig::Smoothing {
                b: 1,
                warm_start: false,
            },
        ] {
            let out = privatize_stream(&stream, &cfg, 1).unwrap();
            assert_eq!(out, stream, "{cfg}");
        }
    }

    #[test]
    fn spatial_stream_bound() {
        let stream = random_stream(4, 2000);
        let out = privatize_stream(&stream, &MechanismConfig::Spatial { l: 48 }, 0).unwrap();
        for (a, b) in stream.samples.iter().zip(&out.samples) {
            assert!((a.theta_deg - b.theta_deg).abs() < 4.0);
            assert!((a.psi_deg - b.psi_deg).abs() < 4.0);
        }
    }

    // Independent oracle: explicit dot product over the raw-input history,
    // zero-padded before the first sample.
    fn smoothing_oracle(xs: &[f64], b: usize) -> Vec<f64> {
        let d = (b * (b + 1) / 2) as f64;
        (0..xs.len())
            .map(|n| {
                let mut acc = 0.0;
                for w in 1..=b {
                    // weight w applies to x[n - (b - w)]
                    let lag = b - w;
                    if lag <= n {
                        acc += w as f64 * xs[n - lag];
                    }
                }
                acc / d
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn smoothing_matches_oracle(seed in any::<u64>(), len in 1usize..2000, bi in 0usize..5) {
            let b = [1, 2, 50, 150, 300][bi];
            let stream = random_stream(seed, len);
            let out = privatize_stream(&stream, &MechanismConfig::Smoothing { b, warm_start: false }, 0).unwrap();
            let theta: Vec<f64> = stream.theta().collect();
            let psi: Vec<f64> = stream.psi().collect();
            let ot = smoothing_oracle(&theta, b);
            let op = smoothing_oracle(&psi, b);
            for (i, y) in out.samples.iter().enumerate() {
                prop_assert!((y.theta_deg - ot[i]).abs() < 1e-9);
                prop_assert!((y.psi_deg - op[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn spatial_cell_membership_and_idempotence(theta in -90.0f64..90.0, psi in -90.0f64..90.0, l in 1usize..300) {
            let grid = SpatialGrid::new(l).unwrap();
            let x = GazeSample::new(theta, psi, 1.0);
            let y = apply_spatial(&x, &grid);
            prop_assert!(y.theta_deg <= theta && theta < y.theta_deg + grid.delta_deg());
            prop_assert!(y.psi_deg <= psi && psi < y.psi_deg + grid.delta_deg());
            prop_assert_eq!(apply_spatial(&y, &grid), y);
        }

        #[test]
        fn mechanisms_preserve_length_and_timestamps(seed in any::<u64>(), len in 0usize..500, which in 0usize..5) {
            let cfg = [
                MechanismConfig::None,
                MechanismConfig::Gaussian { sigma_deg: 2.0 },
                MechanismConfig::Temporal { k: 4 },
                MechanismConfig::Spatial { l: 96 },
                MechanismConfig::Smoothing { b: 25, warm_start: false },
            ][which];
            let stream = random_stream(seed, len);
            let out = privatize_stream(&stream, &cfg, seed).unwrap();
            prop_assert_eq!(out.len(), stream.len());
            prop_assert_eq!(&out.user_id, &stream.user_id);
            prop_assert_eq!(out.trial_id, stream.trial_id);
            for (a, b) in stream.samples.iter().zip(&out.samples) {
                prop_assert_eq!(a.timestamp_s.to_bits(), b.timestamp_s.to_bits());
            }
        }
    }
}
