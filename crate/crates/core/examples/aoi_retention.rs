//! How much of the AOI label sequence survives each mechanism, on a scene
//! with two panels left and right of centre.

use gazeguard::mechanisms::{privatize_all, MechanismConfig};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};
use gazeguard::utility::{aoi_retention_pooled, AoiRegion, Scene};

fn region(id: &str, theta: (f64, f64), psi: (f64, f64)) -> AoiRegion {
    AoiRegion {
        id: id.into(),
        theta_min: theta.0,
        theta_max: theta.1,
        psi_min: psi.0,
        psi_max: psi.1,
    }
}

fn main() -> gazeguard::Result<()> {
    let spec = SyntheticDatasetSpec {
        n_users: 4,
        trial_duration_s: 30.0,
        ..SyntheticDatasetSpec::default()
    };
    let data = generate_dataset(&spec)?;
    let scene = Scene::new(vec![
        region("left", (-25.0, -3.0), (-12.0, 12.0)),
        region("right", (3.0, 25.0), (-12.0, 12.0)),
    ])?;

    for config in [
        MechanismConfig::None,
        MechanismConfig::Gaussian { sigma_deg: 1.0 },
        MechanismConfig::Gaussian { sigma_deg: 3.0 },
        MechanismConfig::Spatial { l: 48 },
        MechanismConfig::Spatial { l: 144 },
        MechanismConfig::Smoothing { b: 50, warm_start: false },
        MechanismConfig::Smoothing { b: 150, warm_start: false },
    ] {
        let privatized = privatize_all(&data, &config, 1)?;
        let pairs: Vec<_> = data.iter().zip(&privatized).collect();
        let r = aoi_retention_pooled(&pairs, &scene)?;
        println!(
            "{:<24} precision {:.3} recall {:.3} F1 {:.3}",
            config.to_string(),
            r.weighted_precision,
            r.weighted_recall,
            r.f1
        );
    }
    Ok(())
}
