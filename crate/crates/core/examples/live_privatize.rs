//! Privatizes a gaze stream one frame at a time, the way a headset runtime
//! would, and shows each mechanism's effect on a few frames.

use gazeguard::mechanisms::{MechanismConfig, MechanismState};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};

fn main() -> gazeguard::Result<()> {
    let spec = SyntheticDatasetSpec {
        n_users: 2,
        trials_per_user: 2,
        trial_duration_s: 10.0,
        ..SyntheticDatasetSpec::default()
    };
    let stream = &generate_dataset(&spec)?[0];
    let seed = 7;

    for config in [
        MechanismConfig::Gaussian { sigma_deg: 3.0 },
        MechanismConfig::Temporal { k: 3 },
        MechanismConfig::Spatial { l: 144 },
        MechanismConfig::Smoothing { b: 50, warm_start: false },
    ] {
        let mut state = MechanismState::for_stream(&config, seed, &stream.user_id, stream.trial_id)?;
        println!("{config}");
        for (i, sample) in stream.samples.iter().enumerate() {
            let out = state.apply(sample)?;
            if i % 100 == 0 {
                println!(
                    "  t={:6.3}s  raw ({:7.3}, {:7.3})  out ({:7.3}, {:7.3})",
                    sample.timestamp_s, sample.theta_deg, sample.psi_deg, out.theta_deg, out.psi_deg
                );
            }
        }
    }
    Ok(())
}
