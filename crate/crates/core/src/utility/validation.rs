use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{angular_error, GazeStream};

/// Default angular extent of the 3×3 target grid.
pub const DEFAULT_GRID_SPAN_DEG: f64 = 38.58;
/// Default time each target stays active.
pub const DEFAULT_DWELL_S: f64 = 2.0;
// Only the central second of each dwell window is scored.
const SCORED_WINDOW_S: f64 = 1.0;

/// A 3×3 grid of validation targets activated one after another with no gap.
///
/// Target index `i` sits at row `i / 3` (top to bottom) and column `i % 3`
/// (left to right); the centre target is index 4 at (0°, 0°).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSchedule {
    pub grid_span_deg: f64,
    pub dwell_s: f64,
    /// Target indices in activation order.
    pub order: Vec<usize>,
}

impl Default for ValidationSchedule {
    fn default() -> Self {
        Self {
            grid_span_deg: DEFAULT_GRID_SPAN_DEG,
            dwell_s: DEFAULT_DWELL_S,
            order: (0..9).collect(),
        }
    }
}

impl ValidationSchedule {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schedule: Self = serde_json::from_str(&text)?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_span_deg > 0.0 && self.grid_span_deg.is_finite()) {
            return Err(Error::InvalidParameter("grid span must be positive".into()));
        }
        if self.dwell_s < SCORED_WINDOW_S {
            return Err(Error::InvalidParameter(format!(
                "dwell time must be at least {SCORED_WINDOW_S} s"
            )));
        }
        if self.order.is_empty() || self.order.iter().any(|&i| i >= 9) {
            return Err(Error::InvalidParameter(
                "order must list target indices in 0..9".into(),
            ));
        }
        Ok(())
    }

    /// Angular position (θ, ψ) of target `index`.
    pub fn target(&self, index: usize) -> (f64, f64) {
        let half = self.grid_span_deg / 2.0;
        let row = (index / 3) as f64;
        let col = (index % 3) as f64;
        ((col - 1.0) * half, (1.0 - row) * half)
    }

    pub fn duration_s(&self) -> f64 {
        self.order.len() as f64 * self.dwell_s
    }

    /// Position in `order` of the target active at `t` seconds after start.
    pub fn active_slot(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        let slot = (t / self.dwell_s).floor() as usize;
        (slot < self.order.len()).then_some(slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetError {
    /// Position in the activation order.
    pub slot: usize,
    pub target_index: usize,
    pub target_deg: (f64, f64),
    pub mean_deg: f64,
    pub std_deg: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub mean_deg: f64,
    pub std_deg: f64,
    pub samples: usize,
    pub per_target: Vec<TargetError>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Spatial accuracy of a validation recording.
///
/// The first target is skipped. For every other target only samples inside
/// the central second of its dwell window are scored, which leaves out the
/// transition from the previous target. Time is measured from the first
/// sample of the recording.
pub fn validation_error(
    recording: &GazeStream,
    schedule: &ValidationSchedule,
) -> Result<ValidationReport> {
    schedule.validate()?;
    let Some(first) = recording.samples.first() else {
        return Err(Error::InsufficientData("empty validation recording".into()));
    };
    if recording.duration_s() + 1e-6 < schedule.duration_s() {
        return Err(Error::InsufficientData(format!(
            "recording lasts {:.3} s, schedule needs {:.3} s",
            recording.duration_s(),
            schedule.duration_s()
        )));
    }
    let t0 = first.timestamp_s;
    let lo = (schedule.dwell_s - SCORED_WINDOW_S) / 2.0;
    let hi = lo + SCORED_WINDOW_S;

    let mut per_slot: Vec<Vec<f64>> = vec![Vec::new(); schedule.order.len()];
    for s in &recording.samples {
        let t = s.timestamp_s - t0;
        let Some(slot) = schedule.active_slot(t) else {
            continue;
        };
        if slot == 0 {
            continue;
        }
        let within = t - slot as f64 * schedule.dwell_s;
        if within >= lo && within < hi {
            let target = schedule.target(schedule.order[slot]);
            per_slot[slot].push(angular_error(s, target));
        }
    }

    let per_target = per_slot
        .iter()
        .enumerate()
        .skip(1)
        .map(|(slot, errs)| {
            let (mean_deg, std_deg) = mean_std(errs);
            let target_index = schedule.order[slot];
            TargetError {
                slot,
                target_index,
                target_deg: schedule.target(target_index),
                mean_deg,
                std_deg,
                samples: errs.len(),
            }
        })
        .collect();
    let all: Vec<f64> = per_slot.into_iter().skip(1).flatten().collect();
    if all.is_empty() {
        return Err(Error::InsufficientData(
            "no samples fall inside the scored windows".into(),
        ));
    }
    let (mean_deg, std_deg) = mean_std(&all);
    Ok(ValidationReport {
        mean_deg,
        std_deg,
        samples: all.len(),
        per_target,
    })
}
