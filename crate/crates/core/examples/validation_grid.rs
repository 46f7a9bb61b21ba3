//! Angular error on the 3×3 target-grid task for a simulated recording that
//! lands 1.5° right of each target, before and after privatization.

use gazeguard::mechanisms::{privatize_stream, MechanismConfig};
use gazeguard::utility::{validation_error, ValidationSchedule};
use gazeguard::GazeStream;

fn main() -> gazeguard::Result<()> {
    let schedule = ValidationSchedule::default();
    let rate = 72.0;
    let n = (schedule.duration_s() * rate).round() as usize;
    let recording = GazeStream::from_angles(
        "viewer",
        1,
        rate,
        (0..n).map(|i| {
            let slot = schedule.active_slot(i as f64 / rate).unwrap_or(0);
            let (theta, psi) = schedule.target(schedule.order[slot]);
            (theta + 1.5, psi)
        }),
    );

    for config in [
        MechanismConfig::None,
        MechanismConfig::Gaussian { sigma_deg: 3.0 },
        MechanismConfig::Spatial { l: 144 },
        MechanismConfig::Smoothing { b: 150, warm_start: false },
    ] {
        let r = validation_error(&privatize_stream(&recording, &config, 3)?, &schedule)?;
        println!("{:<24} mean {:.3}°  std {:.3}°", config.to_string(), r.mean_deg, r.std_deg);
        if matches!(config, MechanismConfig::None) {
            for t in &r.per_target {
                println!("    target {} at {:?}: {:.3}°", t.target_index, t.target_deg, t.mean_deg);
            }
        }
    }
    Ok(())
}
