//! A spatial privacy curve with AOI retention, as plot-ready CSV.

use gazeguard::identify::EmbedderSpec;
use gazeguard::io::write_results;
use gazeguard::mechanisms::MechanismKind;
use gazeguard::sweep::{run_sweep, SweepSpec};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};
use gazeguard::utility::{AoiRegion, Scene};

fn main() -> gazeguard::Result<()> {
    let data = generate_dataset(&SyntheticDatasetSpec {
        n_users: 6,
        trial_duration_s: 30.0,
        ..SyntheticDatasetSpec::default()
    })?;
    let scene = Scene::new(vec![AoiRegion {
        id: "centre".into(),
        theta_min: -10.0,
        theta_max: 10.0,
        psi_min: -10.0,
        psi_max: 10.0,
    }])?;
    let spec = SweepSpec::with_defaults(MechanismKind::Spatial)?.with_scene(scene);
    let rows = run_sweep(&data, &spec, &EmbedderSpec::default(), 42)?;
    write_results(std::io::stdout().lock(), rows.as_slice())
}
