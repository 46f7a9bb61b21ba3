//! Gaze data model: samples, streams, fixed-length segments, and the
//! resampling / windowing / angular arithmetic every other module builds on.
//!
//! Angles are head-localized and stored in degrees. Radians only appear
//! inside trigonometric helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate that segments are resampled to before embedding.
pub const SEGMENT_RATE_HZ: f64 = 125.0;
/// Default window length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 5.0;
/// Default stride between window starts in seconds.
pub const DEFAULT_STRIDE_S: f64 = 1.0;
/// Samples per channel in a default 5 s window at 125 Hz.
pub const SEGMENT_LEN: usize = 625;

/// Angles beyond this magnitude trigger a validation warning.
pub const ANGLE_WARN_LIMIT_DEG: f64 = 90.0;

// Tolerance used when converting durations to whole sample counts.
const GRID_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub theta_deg: f64,
    pub psi_deg: f64,
    pub timestamp_s: f64,
}

impl GazeSample {
    pub fn new(theta_deg: f64, psi_deg: f64, timestamp_s: f64) -> Self {
        Self {
            theta_deg,
            psi_deg,
            timestamp_s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_deg.is_finite() && self.psi_deg.is_finite() && self.timestamp_s.is_finite()
    }

    /// True when both angles lie inside the expected head-localized range.
    pub fn in_expected_range(&self) -> bool {
        self.theta_deg.abs() <= ANGLE_WARN_LIMIT_DEG && self.psi_deg.abs() <= ANGLE_WARN_LIMIT_DEG
    }

    /// Same timestamp, new angles.
    pub fn with_angles(&self, theta_deg: f64, psi_deg: f64) -> Self {
        Self {
            theta_deg,
            psi_deg,
            timestamp_s: self.timestamp_s,
        }
    }
}

/// One trial of one user: an ordered series of gaze samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeStream {
    pub samples: Vec<GazeSample>,
    pub nominal_rate_hz: f64,
    pub user_id: String,
    pub trial_id: u32,
}

impl GazeStream {
    pub fn new(
        user_id: impl Into<String>,
        trial_id: u32,
        nominal_rate_hz: f64,
        samples: Vec<GazeSample>,
    ) -> Self {
        Self {
            samples,
            nominal_rate_hz,
            user_id: user_id.into(),
            trial_id,
        }
    }

    /// Builds a stream on a uniform grid starting at t = 0.
    pub fn from_angles(
        user_id: impl Into<String>,
        trial_id: u32,
        rate_hz: f64,
        angles: impl IntoIterator<Item = (f64, f64)>,
    ) -> Self {
        let samples = angles
            .into_iter()
            .enumerate()
            .map(|(i, (theta, psi))| GazeSample::new(theta, psi, i as f64 / rate_hz))
            .collect();
        Self::new(user_id, trial_id, rate_hz, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Recording duration, counting one nominal sample period for the last
    /// sample: a 90 s trial captured at 72 Hz holds 6480 samples and lasts
    /// exactly 90 s.
    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(first), Some(last)) => {
                last.timestamp_s - first.timestamp_s + 1.0 / self.nominal_rate_hz
            }
            _ => 0.0,
        }
    }

    pub fn theta(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.theta_deg)
    }

    pub fn psi(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.psi_deg)
    }

    /// Copy of this stream with new samples, keeping identity and rate.
    pub fn with_samples(&self, samples: Vec<GazeSample>) -> Self {
        Self {
            samples,
            nominal_rate_hz: self.nominal_rate_hz,
            user_id: self.user_id.clone(),
            trial_id: self.trial_id,
        }
    }

    /// Checks the structural invariants: finite values, strictly increasing
    /// timestamps, a positive nominal rate. Returns the number of samples
    /// whose angles fall outside the expected range (a warning, not an error).
    pub fn validate(&self) -> Result<usize> {
        if !(self.nominal_rate_hz.is_finite() && self.nominal_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nominal rate must be positive, got {}",
                self.nominal_rate_hz
            )));
        }
        let mut out_of_range = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sample {i} of user {} trial {} is not finite",
                    self.user_id, self.trial_id
                )));
            }
            if i > 0 && s.timestamp_s <= self.samples[i - 1].timestamp_s {
                return Err(Error::InvalidParameter(format!(
                    "timestamps not strictly increasing at sample {i} of user {} trial {}",
                    self.user_id, self.trial_id
                )));
            }
            if !s.in_expected_range() {
                out_of_range += 1;
            }
        }
        if out_of_range > 0 {
            log::warn!(
                "user {} trial {}: {out_of_range} samples outside ±{ANGLE_WARN_LIMIT_DEG}°",
                self.user_id,
                self.trial_id
            );
        }
        Ok(out_of_range)
    }
}

/// A fixed-length window resampled to 125 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub rate_hz: f64,
    pub user_id: String,
    pub trial_id: u32,
    pub segment_index: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

fn grid_len(duration_s: f64, rate_hz: f64) -> usize {
    (duration_s * rate_hz + GRID_EPS).floor() as usize
}

/// Linearly resamples a stream onto a uniform grid at `target_hz`.
///
/// The grid starts at the first timestamp and covers the stream duration
/// (see [`GazeStream::duration_s`]). Grid points past the last input
/// timestamp hold the last sample; nothing is extrapolated.
pub fn resample_linear(stream: &GazeStream, target_hz: f64) -> Result<GazeStream> {
    if stream.samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "resampling needs at least 2 samples, got {}",
            stream.samples.len()
        )));
    }
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target rate must be positive, got {target_hz}"
        )));
    }

    let samples = &stream.samples;
    let t0 = samples[0].timestamp_s;
    let t_last = samples[samples.len() - 1].timestamp_s;
    let n_out = grid_len(stream.duration_s(), target_hz).max(1);

    let mut out = Vec::with_capacity(n_out);
    let mut j = 0;
    for i in 0..n_out {
        let t = t0 + i as f64 / target_hz;
        let sample = if t >= t_last {
            samples[samples.len() - 1]
        } else {
            while samples[j + 1].timestamp_s <= t {
                j += 1;
            }
            let (a, b) = (&samples[j], &samples[j + 1]);
            if t == a.timestamp_s {
                *a
            } else {
                let w = (t - a.timestamp_s) / (b.timestamp_s - a.timestamp_s);
                GazeSample::new(
                    a.theta_deg + w * (b.theta_deg - a.theta_deg),
                    a.psi_deg + w * (b.psi_deg - a.psi_deg),
                    t,
                )
            }
        };
        out.push(GazeSample {
            timestamp_s: t,
            ..sample
        });
    }

    Ok(GazeStream {
        samples: out,
        nominal_rate_hz: target_hz,
        user_id: stream.user_id.clone(),
        trial_id: stream.trial_id,
    })
}

/// Number of full windows that fit in `duration_s`.
pub fn segment_count(duration_s: f64, window_s: f64, stride_s: f64) -> usize {
    if duration_s + GRID_EPS < window_s {
        0
    } else {
        ((duration_s - window_s) / stride_s + GRID_EPS).floor() as usize + 1
    }
}

/// Cuts a stream into fixed windows at 125 Hz, starting at the first sample.
/// Incomplete trailing windows are dropped.
pub fn segment(stream: &GazeStream, window_s: f64, stride_s: f64) -> Result<Vec<Segment>> {
    if !(window_s > 0.0 && stride_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window ({window_s}) and stride ({stride_s}) must be positive"
        )));
    }
    let duration = stream.duration_s();
    if duration + GRID_EPS < window_s {
        return Err(Error::InsufficientData(format!(
            "stream of user {} trial {} lasts {duration:.3} s, window is {window_s} s",
            stream.user_id, stream.trial_id
        )));
    }

    let on_grid = (stream.nominal_rate_hz - SEGMENT_RATE_HZ).abs() < 1e-12;
    let resampled;
    let uniform = if on_grid {
        stream
    } else {
        resampled = resample_linear(stream, SEGMENT_RATE_HZ)?;
        &resampled
    };

    let window_len = grid_len(window_s, SEGMENT_RATE_HZ);
    let stride_len = grid_len(stride_s, SEGMENT_RATE_HZ).max(1);
    let count = segment_count(duration, window_s, stride_s);

    let mut segments = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride_len;
        let end = start + window_len;
        if end > uniform.samples.len() {
            break;
        }
        let window = &uniform.samples[start..end];
        segments.push(Segment {
            theta: window.iter().map(|s| s.theta_deg).collect(),
            psi: window.iter().map(|s| s.psi_deg).collect(),
            rate_hz: SEGMENT_RATE_HZ,
            user_id: stream.user_id.clone(),
            trial_id: stream.trial_id,
            segment_index: k,
        });
    }
    Ok(segments)
}

/// Unit direction vector for a head-localized (θ, ψ) pair: θ rotates about
/// the vertical axis, ψ elevates out of the horizontal plane.
pub fn direction_vector(theta_deg: f64, psi_deg: f64) -> [f64; 3] {
    let (st, ct) = theta_deg.to_radians().sin_cos();
    let (sp, cp) = psi_deg.to_radians().sin_cos();
    [cp * st, sp, cp * ct]
}

/// Inverse of [`direction_vector`] for a unit vector.
pub fn direction_angles(v: [f64; 3]) -> (f64, f64) {
    (v[0].atan2(v[2]).to_degrees(), v[1].clamp(-1.0, 1.0).asin().to_degrees())
}

/// Moves `distance_deg` along a great circle from `origin`. A bearing of 0°
/// heads up (towards +ψ), 90° heads towards +θ.
pub fn offset_direction(origin: (f64, f64), bearing_deg: f64, distance_deg: f64) -> (f64, f64) {
    let p = direction_vector(origin.0, origin.1);
    let (st, ct) = origin.0.to_radians().sin_cos();
    let (sp, cp) = origin.1.to_radians().sin_cos();
    // Local tangent basis at p: east is ∂p/∂θ normalized, north is ∂p/∂ψ.
    let east = [ct, 0.0, -st];
    let north = [-sp * st, cp, -sp * ct];
    let (sb, cb) = bearing_deg.to_radians().sin_cos();
    let (sd, cd) = distance_deg.to_radians().sin_cos();
    let v = [
        p[0] * cd + (north[0] * cb + east[0] * sb) * sd,
        p[1] * cd + (north[1] * cb + east[1] * sb) * sd,
        p[2] * cd + (north[2] * cb + east[2] * sb) * sd,
    ];
    direction_angles(v)
}

/// Great-circle angle in degrees between a gaze sample and a target direction.
pub fn angular_error(gaze: &GazeSample, target: (f64, f64)) -> f64 {
    angle_between((gaze.theta_deg, gaze.psi_deg), target)
}

/// Great-circle angle in degrees between two (θ, ψ) directions.
pub fn angle_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    let u = direction_vector(a.0, a.1);
    let v = direction_vector(b.0, b.1);
    // atan2 of cross and dot stays accurate for tiny angles where acos does not.
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    cross_norm.atan2(dot).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(rate: f64, n: usize) -> GazeStream {
        GazeStream::from_angles("u", 1, rate, (0..n).map(|i| (i as f64 * 0.1, -(i as f64) * 0.05)))
    }

    #[test]
    fn resample_midpoint() {
        let s = GazeStream::new(
            "u",
            0,
            1.0,
            vec![GazeSample::new(0.0, 0.0, 0.0), GazeSample::new(10.0, -4.0, 1.0)],
        );
        let r = resample_linear(&s, 2.0).unwrap();
        let mid = r.samples.iter().find(|s| (s.timestamp_s - 0.5).abs() < 1e-12).unwrap();
        assert!((mid.theta_deg - 5.0).abs() < 1e-12);
        assert!((mid.psi_deg + 2.0).abs() < 1e-12);
        // endpoints preserved
        assert_eq!(r.samples[0], s.samples[0]);
        let end = r.samples.iter().find(|s| s.timestamp_s == 1.0).unwrap();
        assert_eq!(*end, s.samples[1]);
    }

    #[test]
    fn resample_five_seconds_to_625() {
        let s = ramp(72.0, 360);
        let r = resample_linear(&s, 125.0).unwrap();
        assert_eq!(r.len(), 625);
        assert_eq!(r.nominal_rate_hz, 125.0);
        assert!(r.samples.last().unwrap().timestamp_s < 5.0);
    }

    #[test]
    fn resample_identity_on_grid() {
        let s = ramp(125.0, 700);
        let r = resample_linear(&s, 125.0).unwrap();
        assert_eq!(r.len(), s.len());
        for (a, b) in r.samples.iter().zip(&s.samples) {
            assert!((a.theta_deg - b.theta_deg).abs() < 1e-12);
            assert!((a.psi_deg - b.psi_deg).abs() < 1e-12);
            assert!((a.timestamp_s - b.timestamp_s).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_clamps_tail() {
        let s = ramp(50.0, 10);
        let r = resample_linear(&s, 200.0).unwrap();
        let last = s.samples.last().unwrap();
        for x in r.samples.iter().filter(|x| x.timestamp_s > last.timestamp_s) {
            assert_eq!(x.theta_deg, last.theta_deg);
            assert_eq!(x.psi_deg, last.psi_deg);
        }
    }

    #[test]
    fn resample_rejects_short_stream() {
        let s = ramp(72.0, 1);
        assert!(matches!(resample_linear(&s, 125.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn segment_counts() {
        for (secs, expected) in [(90usize, 86usize), (30, 26), (5, 1)] {
            let s = ramp(72.0, secs * 72);
            let segs = segment(&s, 5.0, 1.0).unwrap();
            assert_eq!(segs.len(), expected, "{secs} s");
            assert!(segs.iter().all(|g| g.len() == SEGMENT_LEN && g.psi.len() == SEGMENT_LEN));
            assert_eq!(segs[0].theta[0], 0.0);
        }
    }

    #[test]
    fn segment_starts_on_stride() {
        let s = ramp(125.0, 125 * 8);
        let segs = segment(&s, 5.0, 1.0).unwrap();
        assert_eq!(segs.len(), 4);
        for (k, g) in segs.iter().enumerate() {
            assert_eq!(g.segment_index, k);
            assert!((g.theta[0] - (k * 125) as f64 * 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_too_short() {
        let s = ramp(72.0, 4 * 72);
        assert!(matches!(segment(&s, 5.0, 1.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn angular_error_examples() {
        let g = |t, p| GazeSample::new(t, p, 0.0);
        assert_eq!(angular_error(&g(0.0, 0.0), (0.0, 0.0)), 0.0);
        assert!((angular_error(&g(2.0, 0.0), (0.0, 0.0)) - 2.0).abs() < 1e-12);
        // Oracle: acos of the plain 3-D dot product.
        let u = direction_vector(3.0, 4.0);
        let oracle = u[2].clamp(-1.0, 1.0).acos().to_degrees();
        let e = angular_error(&g(3.0, 4.0), (0.0, 0.0));
        assert!((e - oracle).abs() < 1e-9);
        // Frozen from the dot-product oracle (3° azimuth, 4° elevation).
        assert!((e - 4.998_536_88).abs() < 1e-8, "{e}");
        assert!(e < 5.0);
    }

    #[test]
    fn offset_direction_distance() {
        for origin in [(0.0, 0.0), (19.29, -19.29), (-30.0, 40.0)] {
            for bearing in [0.0, 45.0, 90.0, 200.0] {
                let moved = offset_direction(origin, bearing, 2.0);
                assert!((angle_between(origin, moved) - 2.0).abs() < 1e-9);
            }
        }
        let east = offset_direction((0.0, 0.0), 90.0, 2.0);
        assert!((east.0 - 2.0).abs() < 1e-12 && east.1.abs() < 1e-12);
    }

    #[test]
    fn validate_flags_out_of_range_without_failing() {
        let s = GazeStream::from_angles("u", 0, 10.0, [(0.0, 0.0), (95.0, 0.0)]);
        assert_eq!(s.validate().unwrap(), 1);
        let bad = GazeStream::new(
            "u",
            0,
            10.0,
            vec![GazeSample::new(0.0, 0.0, 1.0), GazeSample::new(0.0, 0.0, 1.0)],
        );
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn segment_count_formula(duration_tenths in 50u32..1500) {
            let duration = duration_tenths as f64 / 10.0;
            let n = (duration * 125.0).round() as usize;
            let s = GazeStream::from_angles("u", 0, 125.0, (0..n).map(|i| (i as f64, 0.0)));
            let segs = segment(&s, 5.0, 1.0).unwrap();
            let expected = ((duration - 5.0) / 1.0).floor() as usize + 1;
            prop_assert_eq!(segs.len(), expected);
        }

        #[test]
        fn resample_idempotent(n in 8usize..400, rate in 20.0f64..200.0) {
            let s = GazeStream::from_angles("u", 0, 37.0, (0..n).map(|i| ((i as f64).sin() * 10.0, (i as f64 * 0.3).cos())));
            let once = resample_linear(&s, rate).unwrap();
            let twice = resample_linear(&once, rate).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for (a, b) in once.samples.iter().zip(&twice.samples) {
                prop_assert!((a.theta_deg - b.theta_deg).abs() < 1e-12);
                prop_assert!((a.psi_deg - b.psi_deg).abs() < 1e-12);
            }
        }

        #[test]
        fn angular_error_symmetric(a in -80.0f64..80.0, b in -80.0f64..80.0, c in -80.0f64..80.0, d in -80.0f64..80.0) {
            let x = angle_between((a, b), (c, d));
            let y = angle_between((c, d), (a, b));
            prop_assert!((x - y).abs() < 1e-9);
            prop_assert!(x >= 0.0);
            prop_assert!(angle_between((a, b), (a, b)) < 1e-9);
        }
    }
}
