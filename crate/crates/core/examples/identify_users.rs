//! Rank-1 identification on a synthetic cohort, with per-pair and per-user
//! breakdowns.
//!
//! cargo run --release --example identify_users -- [users]

use gazeguard::identify::{evaluate_identification, EmbedderSpec};
use gazeguard::mechanisms::MechanismConfig;
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};

fn main() -> gazeguard::Result<()> {
    let n_users = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let spec = SyntheticDatasetSpec {
        n_users,
        ..SyntheticDatasetSpec::default()
    };
    let data = generate_dataset(&spec)?;
    let report = evaluate_identification(&data, &EmbedderSpec::default(), &MechanismConfig::None, 0)?;

    println!("mean accuracy {:.3} over {} ordered trial pairs", report.mean_accuracy, report.pair_count());
    for ((q, r), acc) in report.per_pair_accuracy() {
        println!("  query trial {q} vs reference trial {r}: {acc:.2}");
    }
    for (user, acc) in report.per_user_accuracy() {
        println!("  {user}: identified in {:.0}% of pairs", 100.0 * acc);
    }
    Ok(())
}
