use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper ends of the strength ranges exercised by the privacy-curve sweeps.
/// Larger values are accepted but logged.
pub const MAX_SWEEP_SIGMA_DEG: f64 = 20.0;
pub const MAX_SWEEP_K: usize = 30;
pub const MAX_SWEEP_L: usize = 256;
pub const MAX_SWEEP_B: usize = 300;

fn is_false(b: &bool) -> bool {
    !*b
}

/// Which mechanism to apply, and at what strength.
///
/// Serializes as a flat JSON object tagged by `"mechanism"`, e.g.
/// `{"mechanism":"spatial","l":48}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum MechanismConfig {
    #[default]
    None,
    Gaussian {
        #[serde(rename = "sigma")]
        sigma_deg: f64,
    },
    Temporal {
        k: usize,
    },
    Spatial {
        l: usize,
    },
    Smoothing {
        b: usize,
        /// Fill the window with the first sample instead of zeros.
        #[serde(default, skip_serializing_if = "is_false")]
        warm_start: bool,
    },
}

/// A mechanism configuration together with the master seed used for its
/// random draws. This is the on-disk JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    #[serde(flatten)]
    pub config: MechanismConfig,
    #[serde(default)]
    pub seed: u64,
}

/// Discriminant of [`MechanismConfig`], used by sweeps and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    None,
    Gaussian,
    Temporal,
    Spatial,
    Smoothing,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::None,
        MechanismKind::Gaussian,
        MechanismKind::Temporal,
        MechanismKind::Spatial,
        MechanismKind::Smoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::None => "none",
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::Temporal => "temporal",
            MechanismKind::Spatial => "spatial",
            MechanismKind::Smoothing => "smoothing",
        }
    }

    /// Builds a config of this kind at the given strength. Integer-valued
    /// strengths must be whole numbers.
    pub fn with_strength(self, strength: f64) -> Result<MechanismConfig> {
        let whole = || -> Result<usize> {
            if strength.fract() != 0.0 || strength < 0.0 || !strength.is_finite() {
                Err(Error::InvalidParameter(format!(
                    "{} strength must be a non-negative integer, got {strength}",
                    self.name()
                )))
            } else {
                Ok(strength as usize)
            }
        };
        let config = match self {
            MechanismKind::None => MechanismConfig::None,
            MechanismKind::Gaussian => MechanismConfig::Gaussian {
                sigma_deg: strength,
            },
            MechanismKind::Temporal => MechanismConfig::Temporal { k: whole()? },
            MechanismKind::Spatial => MechanismConfig::Spatial { l: whole()? },
            MechanismKind::Smoothing => MechanismConfig::Smoothing {
                b: whole()?,
                warm_start: false,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mechanism '{s}'")))
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Low / high strength anchors used in the interactive study conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Low,
    High,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Preset::Low),
            "high" => Ok(Preset::High),
            _ => Err(Error::InvalidParameter(format!("unknown preset '{s}'"))),
        }
    }
}

impl MechanismConfig {
    pub fn kind(&self) -> MechanismKind {
        match self {
            MechanismConfig::None => MechanismKind::None,
            MechanismConfig::Gaussian { .. } => MechanismKind::Gaussian,
            MechanismConfig::Temporal { .. } => MechanismKind::Temporal,
            MechanismConfig::Spatial { .. } => MechanismKind::Spatial,
            MechanismConfig::Smoothing { .. } => MechanismKind::Smoothing,
        }
    }

    /// Strength parameter as a number (σ, K, L or B); 0 for `None`.
    pub fn strength(&self) -> f64 {
        match *self {
            MechanismConfig::None => 0.0,
            MechanismConfig::Gaussian { sigma_deg } => sigma_deg,
            MechanismConfig::Temporal { k } => k as f64,
            MechanismConfig::Spatial { l } => l as f64,
            MechanismConfig::Smoothing { b, .. } => b as f64,
        }
    }

    /// Preset strengths. Temporal downsampling has no preset.
    pub fn preset(kind: MechanismKind, preset: Preset) -> Result<Self> {
        let strength = match (kind, preset) {
            (MechanismKind::None, _) => 0.0,
            (MechanismKind::Gaussian, Preset::Low) => 1.0,
            (MechanismKind::Gaussian, Preset::High) => 3.0,
            (MechanismKind::Spatial, Preset::Low) => 48.0,
            (MechanismKind::Spatial, Preset::High) => 144.0,
            (MechanismKind::Smoothing, Preset::Low) => 50.0,
            (MechanismKind::Smoothing, Preset::High) => 150.0,
            (MechanismKind::Temporal, _) => {
                return Err(Error::InvalidParameter(
                    "temporal downsampling has no strength preset".into(),
                ))
            }
        };
        kind.with_strength(strength)
    }

    /// Rejects impossible parameters; warns on strengths beyond the sweep
    /// range.
    pub fn validate(&self) -> Result<()> {
        match *self {
            MechanismConfig::None => {}
            MechanismConfig::Gaussian { sigma_deg } => {
                if !(sigma_deg.is_finite() && sigma_deg >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian sigma must be finite and >= 0, got {sigma_deg}"
                    )));
                }
                if sigma_deg > MAX_SWEEP_SIGMA_DEG {
                    log::warn!("gaussian sigma {sigma_deg}° exceeds the swept range");
                }
            }
            MechanismConfig::Temporal { k } => {
                if k < 1 {
                    return Err(Error::InvalidParameter("temporal k must be >= 1".into()));
                }
                if k > MAX_SWEEP_K {
                    log::warn!("temporal k = {k} exceeds the swept range");
                }
            }
            MechanismConfig::Spatial { l } => {
                if l < 1 {
                    return Err(Error::InvalidParameter("spatial l must be >= 1".into()));
                }
                if l > MAX_SWEEP_L {
                    log::warn!("spatial l = {l} exceeds the swept range");
                }
            }
            MechanismConfig::Smoothing { b, .. } => {
                if b < 1 {
                    return Err(Error::InvalidParameter("smoothing b must be >= 1".into()));
                }
                if b > MAX_SWEEP_B {
                    log::warn!("smoothing b = {b} exceeds the swept range");
                }
            }
        }
        Ok(())
    }

    /// True for mechanisms that consume random draws.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, MechanismConfig::Gaussian { .. })
    }
}

impl fmt::Display for MechanismConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MechanismConfig::None => write!(f, "none"),
            MechanismConfig::Gaussian { sigma_deg } => write!(f, "gaussian(sigma={sigma_deg})"),
            MechanismConfig::Temporal { k } => write!(f, "temporal(k={k})"),
            MechanismConfig::Spatial { l } => write!(f, "spatial(l={l})"),
            MechanismConfig::Smoothing { b, warm_start } => {
                if warm_start {
                    write!(f, "smoothing(b={b},warm_start)")
                } else {
                    write!(f, "smoothing(b={b})")
                }
            }
        }
    }
}
