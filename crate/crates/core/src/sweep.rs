//! Privacy curves: identification accuracy, and optionally AOI retention,
//! across a list of mechanism strengths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaze::GazeStream;
use crate::identify::{evaluate_identification, EmbedderSpec};
use crate::mechanisms::{
    privatize_all, MechanismKind, MAX_SWEEP_B, MAX_SWEEP_K, MAX_SWEEP_L, MAX_SWEEP_SIGMA_DEG,
};
use crate::utility::{aoi_retention_pooled, Scene};

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub mechanism: MechanismKind,
    /// Strictly increasing.
    pub strengths: Vec<f64>,
    /// AOI F1 is computed only when a scene is given.
    pub scene: Option<Scene>,
}

/// One point of a privacy curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mechanism: MechanismKind,
    pub strength: f64,
    pub id_accuracy: f64,
    pub aoi_f1: Option<f64>,
}

/// Default strength lists, ending at the largest swept value.
pub fn default_strengths(kind: MechanismKind) -> Result<Vec<f64>> {
    Ok(match kind {
        MechanismKind::Gaussian => vec![0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0],
        MechanismKind::Spatial => vec![12.0, 24.0, 48.0, 96.0, 144.0, 192.0, 256.0],
        MechanismKind::Temporal => vec![2.0, 3.0, 5.0, 10.0, 20.0, 30.0],
        MechanismKind::Smoothing => vec![10.0, 25.0, 50.0, 100.0, 150.0, 200.0, 300.0],
        MechanismKind::None => {
            return Err(Error::InvalidParameter("nothing to sweep for mechanism none".into()))
        }
    })
}

fn sweep_max(kind: MechanismKind) -> f64 {
    match kind {
        MechanismKind::Gaussian => MAX_SWEEP_SIGMA_DEG,
        MechanismKind::Spatial => MAX_SWEEP_L as f64,
        MechanismKind::Temporal => MAX_SWEEP_K as f64,
        MechanismKind::Smoothing => MAX_SWEEP_B as f64,
        MechanismKind::None => 0.0,
    }
}

impl SweepSpec {
    pub fn new(mechanism: MechanismKind, strengths: Vec<f64>) -> Result<Self> {
        let spec = Self {
            mechanism,
            strengths,
            scene: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_defaults(mechanism: MechanismKind) -> Result<Self> {
        Self::new(mechanism, default_strengths(mechanism)?)
    }

    pub fn with_scene(mut self, scene: Scene) -> Self {
        self.scene = Some(scene);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mechanism == MechanismKind::None {
            return Err(Error::InvalidParameter("nothing to sweep for mechanism none".into()));
        }
        if let Some(w) = self.strengths.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "strengths must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let max = sweep_max(self.mechanism);
        if let Some(s) = self.strengths.iter().find(|&&s| s > max) {
            return Err(Error::InvalidParameter(format!(
                "{} strength {s} is beyond the swept maximum {max}",
                self.mechanism
            )));
        }
        for &s in &self.strengths {
            self.mechanism.with_strength(s)?;
        }
        Ok(())
    }
}

/// One row per strength, in order. Every strength privatizes the dataset
/// with the same master seed.
pub fn run_sweep(
    dataset: &[GazeStream],
    spec: &SweepSpec,
    embedder: &EmbedderSpec,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.strengths
        .iter()
        .map(|&strength| {
            let config = spec.mechanism.with_strength(strength)?;
            let id_accuracy = evaluate_identification(dataset, embedder, &config, seed)?.mean_accuracy;
            let aoi_f1 = match &spec.scene {
                Some(scene) => {
                    let privatized = privatize_all(dataset, &config, seed)?;
                    let pairs: Vec<_> = dataset.iter().zip(&privatized).collect();
                    Some(aoi_retention_pooled(&pairs, scene)?.f1)
                }
                None => None,
            };
            log::info!("{config}: accuracy {id_accuracy:.4}");
            Ok(SweepRow {
                mechanism: spec.mechanism,
                strength,
                id_accuracy,
                aoi_f1,
            })
        })
        .collect()
}
