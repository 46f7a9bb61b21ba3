use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::Serialize;

use super::{MechanismConfig, MechanismState};
use crate::error::{Error, Result};
use crate::gaze::GazeSample;
use crate::rng::GazeRng;

/// Smallest run that gives a stable per-sample figure.
pub const MIN_BENCH_SAMPLES: usize = 10_000;

const BENCH_RATE_HZ: f64 = 72.0;

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub mechanism: String,
    pub samples: usize,
    pub ns_per_sample: f64,
    pub samples_per_second: f64,
}

/// Times single-threaded per-sample throughput of one mechanism.
///
/// The input is a bounded random walk. The first tenth of the stream warms
/// the state (and the caches) and is not timed.
pub fn bench_mechanism(config: &MechanismConfig, n_samples: usize) -> Result<BenchReport> {
    if n_samples < MIN_BENCH_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "benchmark needs at least {MIN_BENCH_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut rng = GazeRng::seed_from_u64(0x6a7e);
    let (mut theta, mut psi) = (0.0f64, 0.0f64);
    let input: Vec<GazeSample> = (0..n_samples)
        .map(|i| {
            theta = (theta + rng.random_range(-0.5..0.5)).clamp(-45.0, 45.0);
            psi = (psi + rng.random_range(-0.5..0.5)).clamp(-45.0, 45.0);
            GazeSample::new(theta, psi, i as f64 / BENCH_RATE_HZ)
        })
        .collect();

    let mut state = MechanismState::new(config, GazeRng::seed_from_u64(0xbe7c))?;
    let warmup = n_samples / 10;
    let mut sink = 0.0;
    for s in &input[..warmup] {
        sink += state.apply(s)?.theta_deg;
    }

    let timed = &input[warmup..];
    let start = Instant::now();
    for s in timed {
        let out = state.apply(black_box(s))?;
        sink += out.theta_deg + out.psi_deg;
    }
    let elapsed = start.elapsed();
    black_box(sink);

    // Clock resolution floor keeps the figure positive and finite.
    let ns_total = (elapsed.as_nanos() as f64).max(1.0);
    let ns_per_sample = ns_total / timed.len() as f64;
    Ok(BenchReport {
        mechanism: config.to_string(),
        samples: timed.len(),
        ns_per_sample,
        samples_per_second: 1e9 / ns_per_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_is_positive_and_finite() {
        let r = bench_mechanism(&MechanismConfig::None, 20_000).unwrap();
        assert!(r.ns_per_sample > 0.0 && r.ns_per_sample.is_finite());
        assert!(r.samples_per_second.is_finite());
    }

    #[test]
    fn rejects_tiny_runs() {
        assert!(bench_mechanism(&MechanismConfig::None, 100).is_err());
    }
}
