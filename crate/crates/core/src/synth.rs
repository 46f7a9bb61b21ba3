//! Seeded synthetic gaze with per-user oculomotor signatures.
//!
//! A trial alternates fixations and saccades. Fixations hold a point with
//! correlated tremor and a slow linear drift; saccades move along a smoothstep
//! (3t² − 2t³) profile whose duration follows a per-user main sequence
//! `duration_ms = a · amplitude_deg + b`. Users differ in fixation timing,
//! saccade amplitude distribution, main-sequence slope and intercept,
//! tremor, drift and preferred saccade directions, which is what lets the
//! statistical embedder tell them apart.

use std::f64::consts::TAU;

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::GazeStream;
use crate::rng::{substream, Key};

/// Ranges the per-user parameters are drawn from.
pub mod ranges {
    pub const FIXATION_MU: (f64, f64) = (-1.6, -0.5);
    pub const FIXATION_SIGMA: (f64, f64) = (0.2, 0.6);
    pub const AMPLITUDE_SHAPE: (f64, f64) = (1.5, 4.0);
    pub const AMPLITUDE_SCALE: (f64, f64) = (1.5, 5.0);
    pub const MAIN_SEQUENCE_A: (f64, f64) = (2.0, 2.7);
    pub const MAIN_SEQUENCE_B: (f64, f64) = (20.0, 30.0);
    pub const TREMOR_SIGMA: (f64, f64) = (0.05, 0.3);
    pub const DRIFT_RATE: (f64, f64) = (0.0, 0.5);
    pub const DIRECTION_CONCENTRATION: (f64, f64) = (1.0, 4.0);
}

/// Saccades are truncated so the fixation point stays inside this box.
pub const SACCADE_BOX_DEG: f64 = 40.0;
/// Generated angles are clamped to this magnitude.
pub const CLAMP_DEG: f64 = 45.0;
/// Longest single saccade.
pub const MAX_AMPLITUDE_DEG: f64 = 50.0;
// Shortest saccade worth generating; shorter truncations reverse direction.
const MIN_AMPLITUDE_DEG: f64 = 0.5;
// Number of continuous parameters checked for user separation.
const PROFILE_COORDS: usize = 8;
const SEPARATION: f64 = 0.25;
// Correlation time of the fixational noise.
const TREMOR_CORRELATION_S: f64 = 0.1;
const MAX_PROFILE_ATTEMPTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUserProfile {
    pub user_id: String,
    /// (mu, sigma) of the log of fixation duration in seconds.
    pub fixation_duration_lognormal: (f64, f64),
    /// (shape, scale) of saccade amplitude in degrees.
    pub saccade_amplitude_gamma: (f64, f64),
    /// Main-sequence slope in ms per degree.
    pub main_sequence_a: f64,
    /// Main-sequence intercept in ms.
    pub main_sequence_b: f64,
    pub tremor_sigma_deg: f64,
    pub drift_rate_deg_s: f64,
    /// Probability of each of 8 saccade directions, bin i centred on i·45°
    /// (0° = +θ, 90° = +ψ).
    pub preferred_direction_bias: [f64; 8],
}

impl SyntheticUserProfile {
    /// The eight continuous parameters mapped onto [0, 1] by their ranges.
    pub fn normalized_coords(&self) -> [f64; PROFILE_COORDS] {
        use ranges::*;
        let norm = |x: f64, (lo, hi): (f64, f64)| (x - lo) / (hi - lo);
        [
            norm(self.fixation_duration_lognormal.0, FIXATION_MU),
            norm(self.fixation_duration_lognormal.1, FIXATION_SIGMA),
            norm(self.saccade_amplitude_gamma.0, AMPLITUDE_SHAPE),
            norm(self.saccade_amplitude_gamma.1, AMPLITUDE_SCALE),
            norm(self.main_sequence_a, MAIN_SEQUENCE_A),
            norm(self.main_sequence_b, MAIN_SEQUENCE_B),
            norm(self.tremor_sigma_deg, TREMOR_SIGMA),
            norm(self.drift_rate_deg_s, DRIFT_RATE),
        ]
    }

    /// Peak angular speed of the smoothstep profile for a saccade of the
    /// largest allowed amplitude.
    pub fn peak_saccade_speed_deg_s(&self) -> f64 {
        let duration_s = (self.main_sequence_a * MAX_AMPLITUDE_DEG + self.main_sequence_b) / 1000.0;
        1.5 * MAX_AMPLITUDE_DEG / duration_s
    }

    fn validate(&self) -> Result<()> {
        let (_, sigma) = self.fixation_duration_lognormal;
        let (shape, scale) = self.saccade_amplitude_gamma;
        let ok = sigma >= 0.0
            && shape > 0.0
            && scale > 0.0
            && self.main_sequence_a > 0.0
            && self.main_sequence_b > 0.0
            && self.tremor_sigma_deg >= 0.0
            && self.drift_rate_deg_s >= 0.0
            && self.preferred_direction_bias.iter().all(|p| *p >= 0.0)
            && self.preferred_direction_bias.iter().sum::<f64>() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "profile {} has out-of-range parameters",
                self.user_id
            )))
        }
    }
}

/// Number of coordinates in which two profiles differ by at least
/// `SEPARATION` of the parameter range.
pub fn separated_coords(a: &SyntheticUserProfile, b: &SyntheticUserProfile) -> usize {
    a.normalized_coords()
        .iter()
        .zip(b.normalized_coords())
        .filter(|(x, y)| (*x - y).abs() >= SEPARATION)
        .count()
}

fn draw_candidate<R: Rng>(rng: &mut R, user_id: String) -> SyntheticUserProfile {
    use ranges::*;
    let mut u = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let fixation = (u(FIXATION_MU), u(FIXATION_SIGMA));
    let amplitude = (u(AMPLITUDE_SHAPE), u(AMPLITUDE_SCALE));
    let a = u(MAIN_SEQUENCE_A);
    let b = u(MAIN_SEQUENCE_B);
    let tremor = u(TREMOR_SIGMA);
    let drift = u(DRIFT_RATE);
    let kappa = u(DIRECTION_CONCENTRATION);
    let preferred = u((0.0, TAU));
    // Axial von Mises weights: a preferred saccade axis, both senses alike.
    // A one-way preference would cancel out once gaze reaches the box edge.
    let mut bias = [0.0; 8];
    for (i, w) in bias.iter_mut().enumerate() {
        let centre = i as f64 * TAU / 8.0;
        *w = (kappa * (2.0 * (centre - preferred)).cos()).exp();
    }
    let total: f64 = bias.iter().sum();
    bias.iter_mut().for_each(|w| *w /= total);
    SyntheticUserProfile {
        user_id,
        fixation_duration_lognormal: fixation,
        saccade_amplitude_gamma: amplitude,
        main_sequence_a: a,
        main_sequence_b: b,
        tremor_sigma_deg: tremor,
        drift_rate_deg_s: drift,
        preferred_direction_bias: bias,
    }
}

/// Canonical user id for an index.
pub fn user_label(user_index: usize) -> String {
    format!("p{user_index:03}")
}

/// Profile for user `user_index` under `master_seed`.
///
/// Profiles are built as a sequence: candidate `i` is drawn from the
/// `(master_seed, i, attempt)` substream and accepted only if it differs
/// from every earlier profile by at least a quarter of the parameter range
/// in two or more parameters. The result depends only on the seed and the
/// index, so any prefix of users is pairwise separated. If no candidate is
/// accepted within the attempt budget the best-separated one is kept.
pub fn generate_profile(user_index: usize, master_seed: u64) -> SyntheticUserProfile {
    generate_profiles(user_index + 1, master_seed)
        .pop()
        .expect("at least one profile")
}

/// Profiles for users `0..n_users`.
pub fn generate_profiles(n_users: usize, master_seed: u64) -> Vec<SyntheticUserProfile> {
    let mut accepted: Vec<SyntheticUserProfile> = Vec::with_capacity(n_users);
    for index in 0..n_users {
        let mut best: Option<(usize, SyntheticUserProfile)> = None;
        for attempt in 0..MAX_PROFILE_ATTEMPTS {
            let mut rng = substream(
                master_seed,
                &[Key::Str("profile"), Key::Int(index as u64), Key::Int(attempt as u64)],
            );
            let candidate = draw_candidate(&mut rng, user_label(index));
            let worst = accepted
                .iter()
                .map(|p| separated_coords(p, &candidate))
                .min()
                .unwrap_or(PROFILE_COORDS);
            if worst >= 2 {
                best = Some((worst, candidate));
                break;
            }
            if best.as_ref().is_none_or(|(w, _)| worst > *w) {
                best = Some((worst, candidate));
            }
        }
        accepted.push(best.expect("attempt budget is non-zero").1);
    }
    accepted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetSpec {
    pub n_users: usize,
    pub trials_per_user: usize,
    pub trial_duration_s: f64,
    pub rate_hz: f64,
    pub master_seed: u64,
}

impl Default for SyntheticDatasetSpec {
    fn default() -> Self {
        Self {
            n_users: 10,
            trials_per_user: 4,
            trial_duration_s: 90.0,
            rate_hz: 72.0,
            master_seed: 42,
        }
    }
}

impl SyntheticDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 2 {
            return Err(Error::InvalidParameter("need at least 2 users".into()));
        }
        if self.trials_per_user < 2 {
            return Err(Error::InvalidParameter("need at least 2 trials per user".into()));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidParameter("rate must be positive".into()));
        }
        if !(self.trial_duration_s >= 5.0) {
            return Err(Error::InvalidParameter("trials must last at least 5 s".into()));
        }
        Ok(())
    }
}

/// Largest step along (cos φ, sin φ) from `p` that stays inside the box.
fn room_along(p: (f64, f64), dir: (f64, f64)) -> f64 {
    let axis = |x: f64, d: f64| {
        if d > 1e-12 {
            (SACCADE_BOX_DEG - x) / d
        } else if d < -1e-12 {
            (-SACCADE_BOX_DEG - x) / d
        } else {
            f64::INFINITY
        }
    };
    axis(p.0, dir.0).min(axis(p.1, dir.1)).max(0.0)
}

fn smoothstep(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

enum Event {
    Fixation {
        start_s: f64,
        end_s: f64,
        point: (f64, f64),
        drift: (f64, f64),
    },
    Saccade {
        start_s: f64,
        end_s: f64,
        from: (f64, f64),
        to: (f64, f64),
    },
}

impl Event {
    fn end_s(&self) -> f64 {
        match self {
            Event::Fixation { end_s, .. } | Event::Saccade { end_s, .. } => *end_s,
        }
    }
}

/// One trial for one user, sampled on a uniform grid starting at t = 0.
pub fn generate_trial(
    profile: &SyntheticUserProfile,
    trial_id: u32,
    duration_s: f64,
    rate_hz: f64,
    trial_seed: u64,
) -> Result<GazeStream> {
    profile.validate()?;
    if !(duration_s >= 5.0) {
        return Err(Error::InvalidParameter(format!(
            "trial duration must be at least 5 s, got {duration_s}"
        )));
    }
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidParameter("rate must be positive".into()));
    }
    let mut rng = substream(trial_seed, &[Key::Str("trial")]);
    let (mu, sigma) = profile.fixation_duration_lognormal;
    let fixation_dist =
        LogNormal::new(mu, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (shape, scale) = profile.saccade_amplitude_gamma;
    let amplitude_dist =
        Gamma::new(shape, scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let direction_dist = WeightedIndex::new(profile.preferred_direction_bias)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let tremor = Normal::new(0.0, profile.tremor_sigma_deg)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let n = (duration_s * rate_hz + 1e-6).floor() as usize;
    let mut position = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));

    let next_fixation = |rng: &mut crate::rng::GazeRng, start_s: f64, point: (f64, f64)| {
        let heading = rng.random_range(0.0..TAU);
        Event::Fixation {
            start_s,
            end_s: start_s + fixation_dist.sample(rng),
            point,
            drift: (
                profile.drift_rate_deg_s * heading.cos(),
                profile.drift_rate_deg_s * heading.sin(),
            ),
        }
    };
    let mut event = next_fixation(&mut rng, 0.0, position);
    // Fixational noise is AR(1) with stationary deviation tremor_sigma_deg.
    let rho = (-1.0 / (rate_hz * TREMOR_CORRELATION_S)).exp();
    let innovation = (1.0 - rho * rho).sqrt();
    let mut jitter = if profile.tremor_sigma_deg > 0.0 {
        (tremor.sample(&mut rng), tremor.sample(&mut rng))
    } else {
        (0.0, 0.0)
    };

    let mut angles = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate_hz;
        while t >= event.end_s() {
            event = match event {
                Event::Fixation {
                    start_s,
                    end_s,
                    point,
                    drift,
                } => {
                    let elapsed = end_s - start_s;
                    let from = (point.0 + drift.0 * elapsed, point.1 + drift.1 * elapsed);
                    let bin = direction_dist.sample(&mut rng);
                    let jitter = rng.random_range(-0.5..0.5);
                    let mut angle = (bin as f64 + jitter) * TAU / 8.0;
                    let mut dir = (angle.cos(), angle.sin());
                    if room_along(from, dir) < MIN_AMPLITUDE_DEG {
                        angle += TAU / 2.0;
                        dir = (angle.cos(), angle.sin());
                    }
                    let amplitude = amplitude_dist
                        .sample(&mut rng)
                        .min(MAX_AMPLITUDE_DEG)
                        .min(room_along(from, dir));
                    let to = (from.0 + amplitude * dir.0, from.1 + amplitude * dir.1);
                    let duration =
                        (profile.main_sequence_a * amplitude + profile.main_sequence_b) / 1000.0;
                    Event::Saccade {
                        start_s: end_s,
                        end_s: end_s + duration,
                        from,
                        to,
                    }
                }
                Event::Saccade { end_s, to, .. } => next_fixation(&mut rng, end_s, to),
            };
        }
        position = match event {
            Event::Fixation {
                start_s,
                point,
                drift,
                ..
            } => {
                let dt = t - start_s;
                if profile.tremor_sigma_deg > 0.0 {
                    jitter = (
                        rho * jitter.0 + innovation * tremor.sample(&mut rng),
                        rho * jitter.1 + innovation * tremor.sample(&mut rng),
                    );
                }
                (point.0 + drift.0 * dt + jitter.0, point.1 + drift.1 * dt + jitter.1)
            }
            Event::Saccade {
                start_s,
                end_s,
                from,
                to,
            } => {
                let s = smoothstep(((t - start_s) / (end_s - start_s)).clamp(0.0, 1.0));
                (from.0 + s * (to.0 - from.0), from.1 + s * (to.1 - from.1))
            }
        };
        angles.push((
            position.0.clamp(-CLAMP_DEG, CLAMP_DEG),
            position.1.clamp(-CLAMP_DEG, CLAMP_DEG),
        ));
    }
    Ok(GazeStream::from_angles(
        profile.user_id.clone(),
        trial_id,
        rate_hz,
        angles,
    ))
}

/// Seed of one trial of one user.
pub fn trial_seed(master_seed: u64, user_index: usize, trial_id: u32) -> u64 {
    crate::rng::derive_seed(
        master_seed,
        &[Key::Str("trial"), Key::Int(user_index as u64), Key::Int(trial_id as u64)],
    )
}

/// Full dataset: users `p000..`, trials numbered from 1.
pub fn generate_dataset(spec: &SyntheticDatasetSpec) -> Result<Vec<GazeStream>> {
    use rayon::prelude::*;
    spec.validate()?;
    let profiles = generate_profiles(spec.n_users, spec.master_seed);
    let jobs: Vec<(usize, u32)> = (0..spec.n_users)
        .flat_map(|u| (1..=spec.trials_per_user as u32).map(move |t| (u, t)))
        .collect();
    jobs.par_iter()
        .map(|&(u, t)| {
            generate_trial(
                &profiles[u],
                t,
                spec.trial_duration_s,
                spec.rate_hz,
                trial_seed(spec.master_seed, u, t),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_deterministic() {
        assert_eq!(generate_profile(3, 42), generate_profile(3, 42));
        assert_ne!(generate_profile(3, 42), generate_profile(3, 43));
        assert_eq!(generate_profiles(5, 9)[4], generate_profile(4, 9));
    }

    #[test]
    fn profile_ranges() {
        for seed in [1, 42, 777] {
            for p in generate_profiles(10, seed) {
                assert!((0.05..=0.3).contains(&p.tremor_sigma_deg));
                assert!((2.0..=2.7).contains(&p.main_sequence_a));
                assert!((20.0..=30.0).contains(&p.main_sequence_b));
                assert!((0.0..=0.5).contains(&p.drift_rate_deg_s));
                assert!((p.preferred_direction_bias.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.normalized_coords().iter().all(|c| (0.0..=1.0).contains(c)));
            }
        }
    }

    #[test]
    fn profiles_pairwise_separated() {
        for seed in [0, 42, 1234] {
            let ps = generate_profiles(10, seed);
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    // Exhaustive check, recomputed from the raw coordinates.
                    let (a, b) = (ps[i].normalized_coords(), ps[j].normalized_coords());
                    let far = a.iter().zip(&b).filter(|(x, y)| (*x - *y).abs() >= 0.25).count();
                    assert!(far >= 2, "seed {seed}: users {i} and {j}");
                }
            }
        }
    }

    #[test]
    fn sample_count() {
        let p = generate_profile(0, 1);
        let s = generate_trial(&p, 1, 90.0, 72.0, 5).unwrap();
        assert_eq!(s.len(), 6480);
        assert!(s.validate().is_ok());
        assert!(s.samples.windows(2).all(|w| w[1].timestamp_s > w[0].timestamp_s));
    }

    #[test]
    fn trial_deterministic() {
        let p = generate_profile(2, 1);
        let a = generate_trial(&p, 1, 20.0, 72.0, 9).unwrap();
        let b = generate_trial(&p, 1, 20.0, 72.0, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_trial(&p, 1, 20.0, 72.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_infinite_fixation_is_constant() {
        let p = SyntheticUserProfile {
            fixation_duration_lognormal: (30.0, 0.0),
            tremor_sigma_deg: 0.0,
            drift_rate_deg_s: 0.0,
            ..generate_profile(0, 3)
        };
        let s = generate_trial(&p, 1, 30.0, 72.0, 4).unwrap();
        let first = s.samples[0];
        assert!(s.samples.iter().all(|x| x.theta_deg == first.theta_deg && x.psi_deg == first.psi_deg));
    }

    #[test]
    fn bounded_speed_and_range() {
        for (u, p) in generate_profiles(6, 11).iter().enumerate() {
            let s = generate_trial(p, 1, 60.0, 72.0, u as u64).unwrap();
            let bound = p.peak_saccade_speed_deg_s();
            assert!(bound < 700.0);
            for w in s.samples.windows(2) {
                assert!(w[1].theta_deg.abs() <= CLAMP_DEG && w[1].psi_deg.abs() <= CLAMP_DEG);
                let dt = w[1].timestamp_s - w[0].timestamp_s;
                let v = (w[1].theta_deg - w[0].theta_deg).hypot(w[1].psi_deg - w[0].psi_deg) / dt;
                assert!(v.is_finite() && v < 700.0, "{v}");
            }
        }
    }

    #[test]
    fn dataset_shape() {
        let spec = SyntheticDatasetSpec {
            n_users: 3,
            trials_per_user: 2,
            trial_duration_s: 10.0,
            ..Default::default()
        };
        let d = generate_dataset(&spec).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d[0].user_id, "p000");
        assert_eq!(d[1].trial_id, 2);
        assert!(SyntheticDatasetSpec { n_users: 1, ..spec.clone() }.validate().is_err());
        assert!(SyntheticDatasetSpec { trials_per_user: 1, ..spec }.validate().is_err());
    }
}
