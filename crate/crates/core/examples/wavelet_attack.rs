//! Black-box attack: wavelet-denoise Gaussian-privatized queries and match
//! them against raw references.

use gazeguard::attacks::{run_threat_scenario, Scenario};
use gazeguard::identify::EmbedderSpec;
use gazeguard::mechanisms::MechanismConfig;
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};

fn main() -> gazeguard::Result<()> {
    let data = generate_dataset(&SyntheticDatasetSpec::default())?;
    for config in [
        MechanismConfig::Gaussian { sigma_deg: 1.0 },
        MechanismConfig::Gaussian { sigma_deg: 3.0 },
        MechanismConfig::Spatial { l: 144 },
    ] {
        let r = run_threat_scenario(Scenario::Blackbox, &data, &config, &EmbedderSpec::default(), 42)?;
        println!("{:<24} before {:.3}  after {:.3}", r.mechanism, r.accuracy_before, r.accuracy_after);
    }
    Ok(())
}
