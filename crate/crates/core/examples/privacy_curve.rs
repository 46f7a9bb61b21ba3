//! Identification accuracy on a synthetic cohort across mechanism strengths.
//!
//! cargo run --release --example privacy_curve -- [users] [seed]

use gazeguard::identify::{evaluate_identification, EmbedderSpec};
use gazeguard::mechanisms::MechanismConfig;
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};

fn main() -> gazeguard::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_users = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);
    let spec = SyntheticDatasetSpec {
        n_users,
        master_seed: seed,
        ..SyntheticDatasetSpec::default()
    };
    let data = generate_dataset(&spec)?;
    let embedder = EmbedderSpec::default();

    let conditions = [
        MechanismConfig::None,
        MechanismConfig::Gaussian { sigma_deg: 0.5 },
        MechanismConfig::Gaussian { sigma_deg: 3.0 },
        MechanismConfig::Gaussian { sigma_deg: 20.0 },
        MechanismConfig::Temporal { k: 2 },
        MechanismConfig::Temporal { k: 30 },
        MechanismConfig::Spatial { l: 144 },
        MechanismConfig::Spatial { l: 256 },
        MechanismConfig::Smoothing { b: 150, warm_start: false },
        MechanismConfig::Smoothing { b: 300, warm_start: false },
    ];
    for config in &conditions {
        let report = evaluate_identification(&data, &embedder, config, seed)?;
        println!("{:<28} {:.3}", config.to_string(), report.mean_accuracy);
    }
    Ok(())
}
