use gazeguard::attacks::{run_threat_scenario, Scenario};
use gazeguard::identify::{evaluate_identification, EmbedderSpec};
use gazeguard::mechanisms::{privatize_all, MechanismConfig, MechanismKind};
use gazeguard::sweep::{run_sweep, SweepSpec};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};
use gazeguard::GazeStream;

fn cohort() -> Vec<GazeStream> {
    generate_dataset(&SyntheticDatasetSpec {
        n_users: 5,
        trials_per_user: 3,
        trial_duration_s: 30.0,
        rate_hz: 72.0,
        master_seed: 11,
    })
    .unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let data = cohort();
    let m = MechanismConfig::Gaussian { sigma_deg: 2.0 };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate_identification(&data, &EmbedderSpec::default(), &m, 4).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn privatizing_a_subset_matches_the_full_run() {
    let data = cohort();
    let m = MechanismConfig::Gaussian { sigma_deg: 5.0 };
    let full = privatize_all(&data, &m, 8).unwrap();
    let part = privatize_all(&data[3..5], &m, 8).unwrap();
    assert_eq!(&full[3..5], &part[..]);
}

#[test]
fn whitebox_references_use_their_own_noise() {
    let data = cohort();
    let m = MechanismConfig::Gaussian { sigma_deg: 3.0 };
    let a = run_threat_scenario(Scenario::Whitebox, &data, &m, &EmbedderSpec::default(), 1).unwrap();
    let b = run_threat_scenario(Scenario::Whitebox, &data, &m, &EmbedderSpec::default(), 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.mechanism, "gaussian(sigma=3)");
    assert!((0.0..=1.0).contains(&a.accuracy_after));
}

#[test]
fn single_strength_sweep_matches_direct_evaluation() {
    let data = cohort();
    let spec = SweepSpec::new(MechanismKind::Temporal, vec![3.0]).unwrap();
    let rows = run_sweep(&data, &spec, &EmbedderSpec::default(), 2).unwrap();
    assert_eq!(rows.len(), 1);
    let direct =
        evaluate_identification(&data, &EmbedderSpec::default(), &MechanismConfig::Temporal { k: 3 }, 2)
            .unwrap();
    assert_eq!(rows[0].id_accuracy, direct.mean_accuracy);
    assert_eq!(rows[0].aoi_f1, None);
}
