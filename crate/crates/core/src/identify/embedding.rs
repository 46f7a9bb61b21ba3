use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{Segment, SEGMENT_LEN};

/// Dimension of the built-in statistical embedding.
pub const STAT_EMBEDDING_DIM: usize = 32;

/// Default I-VT speed threshold separating fixation from saccade samples.
pub const DEFAULT_VELOCITY_THRESHOLD_DEG_S: f64 = 20.0;

/// Identity feature vector for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub user_id: String,
    pub trial_id: u32,
    pub segment_index: usize,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetRole {
    Query,
    Reference,
}

/// A homogeneous, non-empty collection of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    records: Vec<Embedding>,
    role: SetRole,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new(records: Vec<Embedding>, role: SetRole) -> Result<Self> {
        let dim = records.first().ok_or(Error::EmptySet)?.dim();
        if let Some(bad) = records.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.dim(),
            });
        }
        if records.iter().any(|r| r.vector.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidParameter("embedding contains non-finite values".into()));
        }
        Ok(Self { records, role, dim })
    }

    pub fn records(&self) -> &[Embedding] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Embedding> {
        self.records
    }

    pub fn role(&self) -> SetRole {
        self.role
    }

    pub fn with_role(self, role: SetRole) -> Self {
        Self { role, ..self }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Percentile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// mean, std, median, p75, p90, p95, max
fn seven_stats(xs: &[f64], out: &mut Vec<f64>) {
    if xs.is_empty() {
        out.extend([0.0; 7]);
        return;
    }
    let (mean, std) = mean_std(xs);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    out.extend([
        mean,
        std,
        percentile(&sorted, 50.0),
        percentile(&sorted, 75.0),
        percentile(&sorted, 90.0),
        percentile(&sorted, 95.0),
        sorted[sorted.len() - 1],
    ]);
}

/// Deterministic 32-dimension hand-crafted feature vector for a 5 s segment.
///
/// Layout:
///
/// | index  | feature |
/// |--------|---------|
/// | 0..4   | mean θ, std θ, mean ψ, std ψ |
/// | 4..11  | angular speed: mean, std, median, p75, p90, p95, max |
/// | 11..18 | angular acceleration: same seven statistics |
/// | 18     | fraction of samples below the I-VT speed threshold |
/// | 19     | saccade count (upward threshold crossings) |
/// | 20     | mean interval between crossings, s (window length if < 2) |
/// | 21..29 | 8-bin displacement direction histogram, magnitude weighted |
/// | 29     | RMS jerk |
/// | 30..32 | net drift in θ and ψ (last minus first) |
///
/// Speed, acceleration and jerk are magnitudes of the first, second and third
/// finite differences of the (θ, ψ) trajectory scaled by the sample rate.
pub fn embed_statistical(segment: &Segment, velocity_threshold_deg_s: f64) -> Result<Embedding> {
    if segment.theta.len() != SEGMENT_LEN || segment.psi.len() != SEGMENT_LEN {
        return Err(Error::InvalidSegment {
            expected: SEGMENT_LEN,
            actual: segment.theta.len().min(segment.psi.len()),
        });
    }
    let rate = segment.rate_hz;
    let th = &segment.theta;
    let ps = &segment.psi;
    let n = th.len();

    let mut v = Vec::with_capacity(STAT_EMBEDDING_DIM);
    let (mt, st) = mean_std(th);
    let (mp, sp) = mean_std(ps);
    v.extend([mt, st, mp, sp]);

    let dth: Vec<f64> = th.windows(2).map(|w| w[1] - w[0]).collect();
    let dps: Vec<f64> = ps.windows(2).map(|w| w[1] - w[0]).collect();
    let speed: Vec<f64> = dth
        .iter()
        .zip(&dps)
        .map(|(a, b)| a.hypot(*b) * rate)
        .collect();

    let ddth: Vec<f64> = dth.windows(2).map(|w| w[1] - w[0]).collect();
    let ddps: Vec<f64> = dps.windows(2).map(|w| w[1] - w[0]).collect();
    let accel: Vec<f64> = ddth
        .iter()
        .zip(&ddps)
        .map(|(a, b)| a.hypot(*b) * rate * rate)
        .collect();

    seven_stats(&speed, &mut v);
    seven_stats(&accel, &mut v);

    let below = speed.iter().filter(|&&s| s < velocity_threshold_deg_s).count();
    v.push(below as f64 / speed.len() as f64);

    let crossings: Vec<usize> = speed
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < velocity_threshold_deg_s && w[1] >= velocity_threshold_deg_s)
        .map(|(i, _)| i + 1)
        .collect();
    v.push(crossings.len() as f64);
    let window_s = n as f64 / rate;
    let mean_interval = if crossings.len() >= 2 {
        (crossings[crossings.len() - 1] - crossings[0]) as f64
            / (crossings.len() - 1) as f64
            / rate
    } else {
        window_s
    };
    v.push(mean_interval);

    let mut hist = [0.0f64; 8];
    for (a, b) in dth.iter().zip(&dps) {
        let mag = a.hypot(*b);
        if mag > 0.0 {
            let angle = b.atan2(*a).to_degrees().rem_euclid(360.0);
            let bin = ((angle / 45.0).floor() as usize).min(7);
            hist[bin] += mag;
        }
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|h| *h /= total);
    }
    v.extend(hist);

    let jerk_sq: Vec<f64> = ddth
        .windows(2)
        .zip(ddps.windows(2))
        .map(|(a, b)| {
            let j = (a[1] - a[0]).hypot(b[1] - b[0]) * rate.powi(3);
            j * j
        })
        .collect();
    let rms_jerk = if jerk_sq.is_empty() {
        0.0
    } else {
        (jerk_sq.iter().sum::<f64>() / jerk_sq.len() as f64).sqrt()
    };
    v.push(rms_jerk);

    v.push(th[n - 1] - th[0]);
    v.push(ps[n - 1] - ps[0]);

    debug_assert_eq!(v.len(), STAT_EMBEDDING_DIM);
    Ok(Embedding {
        vector: v,
        user_id: segment.user_id.clone(),
        trial_id: segment.trial_id,
        segment_index: segment.segment_index,
    })
}

/// Reads externally computed embeddings from CSV.
///
/// Expected header: `user_id,trial_id,segment_index,e0,e1,...`; the
/// dimension is the number of `e*` columns. Row numbers in errors are
/// 1-based file lines (the header is line 1).
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(file)
}

/// Same as [`load_embeddings`], from any reader.
pub fn read_embeddings<R: Read>(reader: R) -> Result<EmbeddingSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            return Err(Error::Parse {
                row: 1,
                message: e.to_string(),
            })
        }
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptySet);
    }
    let expected = ["user_id", "trial_id", "segment_index"];
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(Error::Schema(format!(
                "embedding column {i} must be '{name}', found {:?}",
                headers.get(i)
            )));
        }
    }
    let dim = headers.len() - expected.len();
    if dim == 0 {
        return Err(Error::Schema("embedding file has no vector columns".into()));
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        if row.len() != headers.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} fields, found {}", headers.len(), row.len()),
            });
        }
        let parse_int = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Parse {
                row: line,
                message: format!("{what} '{s}' is not an integer"),
            })
        };
        let trial_id = parse_int(&row[1], "trial_id")? as u32;
        let segment_index = parse_int(&row[2], "segment_index")? as usize;
        let mut vector = Vec::with_capacity(dim);
        for field in row.iter().skip(3) {
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                message: format!("'{field}' is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    message: format!("non-finite value '{field}'"),
                });
            }
            vector.push(x);
        }
        records.push(Embedding {
            vector,
            user_id: row[0].to_string(),
            trial_id,
            segment_index,
        });
    }
    EmbeddingSet::new(records, SetRole::Reference)
}
