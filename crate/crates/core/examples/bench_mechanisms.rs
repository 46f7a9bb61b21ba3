//! Single-threaded throughput of each mechanism.
//!
//! cargo run --release --example bench_mechanisms -- [samples]

use gazeguard::mechanisms::{bench_mechanism, MechanismConfig};

fn main() -> gazeguard::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2_000_000);
    for config in [
        MechanismConfig::Gaussian { sigma_deg: 3.0 },
        MechanismConfig::Temporal { k: 30 },
        MechanismConfig::Spatial { l: 144 },
        MechanismConfig::Smoothing { b: 50, warm_start: false },
        MechanismConfig::Smoothing { b: 300, warm_start: false },
    ] {
        let r = bench_mechanism(&config, n)?;
        // One 72 Hz frame lasts about 13.9 ms.
        println!(
            "{:<22} {:8.1} ns/sample  {:>12.0} samples/s  {:.5}% of a frame",
            r.mechanism,
            r.ns_per_sample,
            r.samples_per_second,
            r.ns_per_sample / (1e9 / 72.0) * 100.0
        );
    }
    Ok(())
}
