//! Generates a synthetic cohort, prints each user's behavioural profile and
//! writes the gaze CSV.
//!
//! cargo run --release --example synth_cohort -- [out.csv]

use gazeguard::io::write_stream_csv;
use gazeguard::synth::{generate_dataset, generate_profiles, SyntheticDatasetSpec};

fn main() -> gazeguard::Result<()> {
    let spec = SyntheticDatasetSpec::default();
    for (i, p) in generate_profiles(spec.n_users, spec.master_seed).iter().enumerate() {
        println!("user {i}: peak saccade speed {:.0}°/s  {p:?}", p.peak_saccade_speed_deg_s());
    }
    let data = generate_dataset(&spec)?;
    let samples: usize = data.iter().map(|s| s.len()).sum();
    println!("{} streams, {samples} samples", data.len());
    if let Some(path) = std::env::args().nth(1) {
        write_stream_csv(&data, path)?;
    }
    Ok(())
}
