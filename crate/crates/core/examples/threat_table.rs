//! All three attacks against the strong preset of each mechanism, written
//! as a CSV table.
//!
//! cargo run --release --example threat_table -- [out.csv]

use gazeguard::attacks::{run_threat_scenario, Scenario, ThreatRow};
use gazeguard::identify::EmbedderSpec;
use gazeguard::io::{write_results, write_results_csv};
use gazeguard::mechanisms::{MechanismConfig, MechanismKind, Preset};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};

fn main() -> gazeguard::Result<()> {
    let out = std::env::args().nth(1);
    let data = generate_dataset(&SyntheticDatasetSpec::default())?;
    let embedder = EmbedderSpec::default();
    let mut rows = Vec::new();
    for kind in [MechanismKind::Gaussian, MechanismKind::Spatial, MechanismKind::Smoothing] {
        let config = MechanismConfig::preset(kind, Preset::High)?;
        let reports = Scenario::ALL
            .into_iter()
            .map(|s| run_threat_scenario(s, &data, &config, &embedder, 42))
            .collect::<gazeguard::Result<Vec<_>>>()?;
        rows.push(ThreatRow::from_reports(&reports)?);
    }
    match out {
        Some(path) => write_results_csv(rows.as_slice(), path),
        None => write_results(std::io::stdout().lock(), rows.as_slice()),
    }
}
