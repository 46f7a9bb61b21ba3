use gazeguard::io::{
    import_stream_csv, read_stream_csv, write_results_csv, write_stream_csv, ColumnMapping,
};
use gazeguard::mechanisms::{privatize_all, MechanismConfig};
use gazeguard::synth::{generate_dataset, SyntheticDatasetSpec};
use gazeguard::Error;

fn small() -> Vec<gazeguard::GazeStream> {
    generate_dataset(&SyntheticDatasetSpec {
        n_users: 3,
        trials_per_user: 2,
        trial_duration_s: 12.0,
        rate_hz: 72.0,
        master_seed: 5,
    })
    .unwrap()
}

#[test]
fn privatized_streams_survive_a_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gaze.csv");
    let streams = privatize_all(&small(), &MechanismConfig::Gaussian { sigma_deg: 3.0 }, 9).unwrap();
    write_stream_csv(&streams, &path).unwrap();
    let back = read_stream_csv(&path, &ColumnMapping::default()).unwrap();
    assert_eq!(back.len(), streams.len());
    for (a, b) in streams.iter().zip(&back) {
        assert_eq!((&a.user_id, a.trial_id), (&b.user_id, b.trial_id));
        assert!((a.nominal_rate_hz - b.nominal_rate_hz).abs() < 1e-6);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.theta_deg - y.theta_deg).abs() <= 1e-12);
            assert!((x.psi_deg - y.psi_deg).abs() <= 1e-12);
            assert!((x.timestamp_s - y.timestamp_s).abs() <= 1e-12);
        }
    }
}

#[test]
fn renamed_columns_and_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("export.csv");
    std::fs::write(
        &csv,
        "subject,session,frame,yaw,pitch,time,task\n\
         p1,1,0,1.5,0.5,10.0,reading\n\
         p1,1,1,2.5,0.5,10.1,reading\n\
         p1,1,2,3.5,0.5,10.2,reading\n",
    )
    .unwrap();
    let map = dir.path().join("map.json");
    std::fs::write(
        &map,
        r#"{"user_id":"subject","trial_id":"session","theta_deg":"yaw","psi_deg":"pitch",
            "timestamp_s":"time","conditions":["task"]}"#,
    )
    .unwrap();
    let import = import_stream_csv(&csv, &ColumnMapping::load(&map).unwrap()).unwrap();
    let s = &import.streams[0];
    assert_eq!(s.user_id, "p1");
    assert_eq!(s.samples[0].timestamp_s, 0.0);
    assert!((s.nominal_rate_hz - 10.0).abs() < 1e-6);
    assert_eq!(import.conditions[&("p1".into(), 1)]["task"], "reading");
}

#[test]
fn missing_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "user_id,trial_id,theta_deg\nu,1,0\n").unwrap();
    let err = read_stream_csv(&csv, &ColumnMapping::default()).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
    assert!(matches!(
        read_stream_csv(dir.path().join("absent.csv"), &ColumnMapping::default()),
        Err(Error::Io { .. })
    ));
}

#[test]
fn identification_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("id.csv");
    let data = small();
    let report = gazeguard::identify::evaluate_identification(
        &data,
        &Default::default(),
        &MechanismConfig::None,
        0,
    )
    .unwrap();
    write_results_csv(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    // Header, one row per user and ordered pair, one summary row.
    assert_eq!(lines.len(), 1 + 3 * 2 + 1);
    assert!(lines.last().unwrap().starts_with("all,all,all"));
}
