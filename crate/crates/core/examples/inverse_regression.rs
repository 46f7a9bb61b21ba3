//! Trains the convolutional inverse regressor on (smoothed, raw) windows,
//! then undoes smoothing on a held-out trial.
//!
//! cargo run --release --example inverse_regression -- [epochs]

use gazeguard::attacks::{apply_inverse, exemplar_pairs, train_inverse_regressor, RegressorHyper};
use gazeguard::mechanisms::{privatize_all, MechanismConfig};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};
use gazeguard::GazeStream;

fn rms(a: &GazeStream, b: &GazeStream) -> f64 {
    let sum: f64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x.theta_deg - y.theta_deg).powi(2) + (x.psi_deg - y.psi_deg).powi(2))
        .sum();
    (sum / a.len() as f64).sqrt()
}

fn main() -> gazeguard::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let spec = SyntheticDatasetSpec {
        n_users: 6,
        trials_per_user: 3,
        trial_duration_s: 60.0,
        ..SyntheticDatasetSpec::default()
    };
    let data = generate_dataset(&spec)?;
    let config = MechanismConfig::Smoothing { b: 50, warm_start: false };
    let privatized = privatize_all(&data, &config, 5)?;

    let (train, held_out): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data[i].trial_id < 3);
    let pick = |set: &[GazeStream], idx: &[usize]| idx.iter().map(|&i| set[i].clone()).collect::<Vec<_>>();
    let pairs = exemplar_pairs(&pick(&privatized, &train), &pick(&data, &train))?;
    let hyper = RegressorHyper {
        epochs,
        ..RegressorHyper::default()
    };
    println!("training on {} window pairs for {epochs} epochs", pairs.len());
    let model = train_inverse_regressor(&pairs, &hyper, 1)?;
    println!("loss {:.4} -> {:.4}", model.loss_history()[0], model.final_loss().unwrap_or(f64::NAN));

    for &i in &held_out {
        let restored = apply_inverse(&model, &privatized[i])?;
        println!(
            "{} trial {}: rms error {:.2}° privatized, {:.2}° restored",
            data[i].user_id,
            data[i].trial_id,
            rms(&privatized[i], &data[i]),
            rms(&restored, &data[i])
        );
    }
    Ok(())
}
