//! Imports a gaze log with its own column names through a column mapping,
//! then writes it back in the canonical layout.

use gazeguard::io::{read_streams, write_streams, ColumnMapping};

const LOG: &str = "\
participant,block,frameNo,time,eyeYaw,eyePitch,condition
P01,1,0,12.000,1.5,-0.5,high-noise
P01,1,2,12.028,1.9,-0.4,high-noise
P01,1,1,12.014,1.7,-0.5,high-noise
P01,1,2,12.028,2.0,-0.4,high-noise
P02,1,0,3.500,-4.0,2.0,low-noise
P02,1,1,3.514,-4.1,2.1,low-noise
";

fn main() -> gazeguard::Result<()> {
    let mapping = ColumnMapping {
        user_id: "participant".into(),
        trial_id: "block".into(),
        frame: "frameNo".into(),
        timestamp_s: "time".into(),
        theta_deg: "eyeYaw".into(),
        psi_deg: "eyePitch".into(),
        conditions: vec!["condition".into()],
    };
    let import = read_streams(LOG.as_bytes(), &mapping)?;
    println!("{} streams, {} duplicate rows collapsed", import.streams.len(), import.collapsed_rows);
    for ((user, trial), c) in &import.conditions {
        println!("{user} trial {trial}: {c:?}");
    }
    write_streams(std::io::stdout().lock(), &import.streams)
}
