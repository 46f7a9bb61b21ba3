use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embedding::{
    embed_statistical, load_embeddings, Embedding, DEFAULT_VELOCITY_THRESHOLD_DEG_S,
};
use super::matching::{predict_identity, ZScore};
use crate::error::{Error, Result};
use crate::gaze::{segment, GazeStream, DEFAULT_STRIDE_S, DEFAULT_WINDOW_S};
use crate::mechanisms::{privatize_all, MechanismConfig};

/// How segments are turned into identity vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbedderSpec {
    /// Built-in 32-dimension hand-crafted features.
    Statistical { velocity_threshold_deg_s: f64 },
    /// Precomputed vectors read from an embedding CSV.
    Imported { path: PathBuf },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Statistical {
            velocity_threshold_deg_s: DEFAULT_VELOCITY_THRESHOLD_DEG_S,
        }
    }
}

impl std::str::FromStr for EmbedderSpec {
    type Err = Error;

    /// `stat` or `imported:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "stat" || s == "statistical" {
            Ok(Self::default())
        } else if let Some(path) = s.strip_prefix("imported:") {
            Ok(EmbedderSpec::Imported { path: path.into() })
        } else {
            Err(Error::InvalidParameter(format!(
                "unknown embedder '{s}' (expected 'stat' or 'imported:<path>')"
            )))
        }
    }
}

/// Embeds every segment of every stream with the statistical embedder.
/// Order: streams in input order, segments in time order.
pub fn embed_streams(streams: &[GazeStream], embedder: &EmbedderSpec) -> Result<Vec<Embedding>> {
    let threshold = match embedder {
        EmbedderSpec::Statistical {
            velocity_threshold_deg_s,
        } => *velocity_threshold_deg_s,
        EmbedderSpec::Imported { .. } => {
            return Err(Error::InvalidParameter(
                "imported embeddings cannot be computed from gaze streams".into(),
            ))
        }
    };
    let per_stream: Vec<Vec<Embedding>> = streams
        .par_iter()
        .map(|s| {
            segment(s, DEFAULT_WINDOW_S, DEFAULT_STRIDE_S)?
                .iter()
                .map(|g| embed_statistical(g, threshold))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_stream.into_iter().flatten().collect())
}

/// Keeps samples within the first `duration_s` seconds of the stream.
pub fn truncate_record(stream: &GazeStream, duration_s: f64) -> Result<GazeStream> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation duration must be positive, got {duration_s}"
        )));
    }
    if duration_s > stream.duration_s() + 1e-9 {
        return Err(Error::InsufficientData(format!(
            "cannot truncate a {:.3} s stream to {duration_s} s",
            stream.duration_s()
        )));
    }
    let Some(first) = stream.samples.first() else {
        return Ok(stream.clone());
    };
    let t0 = first.timestamp_s;
    let samples = stream
        .samples
        .iter()
        .take_while(|s| s.timestamp_s - t0 < duration_s - 1e-9)
        .copied()
        .collect();
    Ok(stream.with_samples(samples))
}

/// One user's result in one trial pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserOutcome {
    pub user_id: String,
    pub predicted: String,
    pub correct: bool,
    pub votes: usize,
    pub query_records: usize,
}

/// Results for one ordered (query trial, reference trial) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    pub query_trial: u32,
    pub reference_trial: u32,
    pub accuracy: f64,
    pub outcomes: Vec<UserOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentificationReport {
    /// Sorted by (query_trial, reference_trial).
    pub pairs: Vec<PairResult>,
    /// Unweighted mean of the per-pair accuracies.
    pub mean_accuracy: f64,
}

impl IdentificationReport {
    fn from_pairs(mut pairs: Vec<PairResult>) -> Self {
        pairs.sort_by_key(|p| (p.query_trial, p.reference_trial));
        let mean_accuracy = if pairs.is_empty() {
            0.0
        } else {
            pairs.iter().map(|p| p.accuracy).sum::<f64>() / pairs.len() as f64
        };
        Self {
            pairs,
            mean_accuracy,
        }
    }

    pub fn per_pair_accuracy(&self) -> BTreeMap<(u32, u32), f64> {
        self.pairs
            .iter()
            .map(|p| ((p.query_trial, p.reference_trial), p.accuracy))
            .collect()
    }

    /// Fraction of pairs in which each user was identified.
    pub fn per_user_accuracy(&self) -> BTreeMap<String, f64> {
        let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for o in self.pairs.iter().flat_map(|p| &p.outcomes) {
            let t = tally.entry(o.user_id.clone()).or_default();
            t.0 += o.correct as usize;
            t.1 += 1;
        }
        tally
            .into_iter()
            .map(|(u, (c, n))| (u, c as f64 / n as f64))
            .collect()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

fn group_by_trial(records: Vec<Embedding>) -> BTreeMap<u32, Vec<Embedding>> {
    let mut by_trial: BTreeMap<u32, Vec<Embedding>> = BTreeMap::new();
    for r in records {
        by_trial.entry(r.trial_id).or_default().push(r);
    }
    by_trial
}

/// Every ordered pair of distinct trial ids.
pub fn ordered_trial_pairs(trials: &BTreeSet<u32>) -> Vec<(u32, u32)> {
    trials
        .iter()
        .flat_map(|&q| trials.iter().filter(move |&&r| r != q).map(move |&r| (q, r)))
        .collect()
}

/// Scores one trial pair. Features are standardized with statistics of the
/// reference trial only; each user with query records in `q` and reference
/// records in `r` is predicted by nearest-neighbour majority vote.
fn evaluate_pair(
    query_trial: u32,
    reference_trial: u32,
    queries: &[Embedding],
    references: &[Embedding],
) -> Result<PairResult> {
    let z = ZScore::fit(references)?;
    let reference = z.transform_all(references)?;
    let reference_users: BTreeSet<&str> = references.iter().map(|r| r.user_id.as_str()).collect();

    let mut by_user: BTreeMap<&str, Vec<&Embedding>> = BTreeMap::new();
    for q in queries {
        by_user.entry(q.user_id.as_str()).or_default().push(q);
    }

    let outcomes = by_user
        .into_par_iter()
        .filter(|(user, _)| reference_users.contains(user))
        .map(|(user, records)| {
            let query = records
                .into_iter()
                .map(|e| z.transform(e))
                .collect::<Result<Vec<_>>>()?;
            let prediction = predict_identity(&query, &reference)?;
            let votes = prediction.votes.get(&prediction.label).copied().unwrap_or(0);
            Ok(UserOutcome {
                user_id: user.to_string(),
                correct: prediction.label == user,
                predicted: prediction.label,
                votes,
                query_records: query.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let accuracy = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().filter(|o| o.correct).count() as f64 / outcomes.len() as f64
    };
    Ok(PairResult {
        query_trial,
        reference_trial,
        accuracy,
        outcomes,
    })
}

/// Runs the fold protocol on precomputed embeddings.
///
/// `queries` and `references` are grouped into folds by trial id. When
/// `pairs` is `None`, every ordered pair of distinct trials present in both
/// sets is evaluated.
pub fn evaluate_embeddings(
    queries: Vec<Embedding>,
    references: Vec<Embedding>,
    pairs: Option<&[(u32, u32)]>,
) -> Result<IdentificationReport> {
    if queries.is_empty() || references.is_empty() {
        return Err(Error::EmptySet);
    }
    let query_folds = group_by_trial(queries);
    let reference_folds = group_by_trial(references);
    let pairs: Vec<(u32, u32)> = match pairs {
        Some(p) => p.to_vec(),
        None => {
            let trials: BTreeSet<u32> = query_folds
                .keys()
                .filter(|t| reference_folds.contains_key(t))
                .copied()
                .collect();
            ordered_trial_pairs(&trials)
        }
    };
    if pairs.is_empty() {
        return Err(Error::Protocol("no trial pairs to evaluate".into()));
    }
    let results = pairs
        .par_iter()
        .map(|&(q, r)| {
            let qs = query_folds
                .get(&q)
                .ok_or_else(|| Error::Protocol(format!("no query records for trial {q}")))?;
            let rs = reference_folds
                .get(&r)
                .ok_or_else(|| Error::Protocol(format!("no reference records for trial {r}")))?;
            evaluate_pair(q, r, qs, rs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentificationReport::from_pairs(results))
}

/// Checks that every user contributes at least two trials and every stream
/// is long enough for one window.
pub fn check_dataset(dataset: &[GazeStream]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("dataset is empty".into()));
    }
    let mut trials: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for s in dataset {
        if s.duration_s() + 1e-6 < DEFAULT_WINDOW_S {
            return Err(Error::InsufficientData(format!(
                "user {} trial {} lasts {:.3} s, shorter than one {DEFAULT_WINDOW_S} s window",
                s.user_id,
                s.trial_id,
                s.duration_s()
            )));
        }
        trials.entry(&s.user_id).or_default().insert(s.trial_id);
    }
    if let Some((user, _)) = trials.iter().find(|(_, t)| t.len() < 2) {
        return Err(Error::Protocol(format!(
            "user {user} has fewer than 2 trials"
        )));
    }
    Ok(())
}

/// Embeds query and reference streams and runs the fold protocol.
pub fn evaluate_streams(
    queries: &[GazeStream],
    references: &[GazeStream],
    embedder: &EmbedderSpec,
    pairs: Option<&[(u32, u32)]>,
) -> Result<IdentificationReport> {
    let q = embed_streams(queries, embedder)?;
    let r = embed_streams(references, embedder)?;
    evaluate_embeddings(q, r, pairs)
}

/// Re-identification accuracy of a dataset under a privacy mechanism.
///
/// For every ordered pair of distinct trials, the query trial's streams are
/// privatized (the reference trial stays raw), segmented, embedded and
/// matched user by user.
pub fn evaluate_identification(
    dataset: &[GazeStream],
    embedder: &EmbedderSpec,
    mechanism: &MechanismConfig,
    seed: u64,
) -> Result<IdentificationReport> {
    match embedder {
        EmbedderSpec::Imported { path } => {
            if !matches!(mechanism, MechanismConfig::None) {
                return Err(Error::InvalidParameter(
                    "a mechanism cannot be applied to imported embeddings".into(),
                ));
            }
            let set = load_embeddings(path)?.into_records();
            evaluate_embeddings(set.clone(), set, None)
        }
        EmbedderSpec::Statistical { .. } => {
            check_dataset(dataset)?;
            let references = embed_streams(dataset, embedder)?;
            let queries = if matches!(mechanism, MechanismConfig::None) {
                references.clone()
            } else {
                embed_streams(&privatize_all(dataset, mechanism, seed)?, embedder)?
            };
            evaluate_embeddings(queries, references, None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::GazeSample;

    fn emb(user: &str, trial: u32, v: &[f64]) -> Embedding {
        Embedding {
            vector: v.to_vec(),
            user_id: user.into(),
            trial_id: trial,
            segment_index: 0,
        }
    }

    fn stream(user: &str, trial: u32, secs: usize) -> GazeStream {
        GazeStream::from_angles(user, trial, 72.0, (0..secs * 72).map(|i| ((i as f64 * 0.01).sin(), 0.0)))
    }

    #[test]
    fn twelve_pairs_for_four_trials() {
        let trials: BTreeSet<u32> = (1..=4).collect();
        let pairs = ordered_trial_pairs(&trials);
        assert_eq!(pairs.len(), 12);
        assert!(pairs.contains(&(2, 1)) && pairs.contains(&(1, 2)));
    }

    #[test]
    fn self_reference_is_perfect() {
        let mut records = Vec::new();
        for (u, base) in [("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0]), ("c", [0.0, 0.0, 1.0])] {
            for t in 1..=3 {
                for k in 0..4 {
                    let jitter = 0.1 * (k as f64 + t as f64);
                    records.push(emb(u, t, &[base[0] + jitter, base[1] - jitter, base[2] + 0.5 * jitter]));
                }
            }
        }
        let report = evaluate_embeddings(records.clone(), records.clone(), None).unwrap();
        assert_eq!(report.pair_count(), 6);
        // Queries identical to the other fold's references.
        let pairs: Vec<(u32, u32)> = (1..=3).map(|t| (t, t)).collect();
        let self_report = evaluate_embeddings(records.clone(), records, Some(&pairs)).unwrap();
        assert_eq!(self_report.mean_accuracy, 1.0);
        assert!(self_report.per_user_accuracy().values().all(|&a| a == 1.0));
    }

    #[test]
    fn rejects_single_trial_user() {
        let data = vec![stream("a", 1, 6), stream("a", 2, 6), stream("b", 1, 6)];
        match check_dataset(&data) {
            Err(Error::Protocol(msg)) => assert!(msg.contains("user b")),
            other => panic!("{other:?}"),
        }
        let short = vec![stream("a", 1, 6), stream("a", 2, 4)];
        assert!(matches!(check_dataset(&short), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn truncation() {
        let s = stream("a", 1, 90);
        let t = truncate_record(&s, 5.0).unwrap();
        assert_eq!(t.samples[0], s.samples[0]);
        assert!((t.duration_s() - 5.0).abs() < 1e-9);
        assert_eq!(truncate_record(&s, 60.0).unwrap().len(), 4320);
        assert_eq!(truncate_record(&s, 90.0).unwrap(), s);
        assert!(matches!(truncate_record(&s, 0.0), Err(Error::InvalidParameter(_))));
        assert!(truncate_record(&s, 120.0).is_err());
        let offset = s.with_samples(
            s.samples
                .iter()
                .map(|x| GazeSample::new(x.theta_deg, x.psi_deg, x.timestamp_s + 3.0))
                .collect(),
        );
        assert_eq!(truncate_record(&offset, 60.0).unwrap().len(), 4320);
    }

    #[test]
    fn embedder_parsing() {
        assert_eq!("stat".parse::<EmbedderSpec>().unwrap(), EmbedderSpec::default());
        assert_eq!(
            "imported:emb.csv".parse::<EmbedderSpec>().unwrap(),
            EmbedderSpec::Imported {
                path: "emb.csv".into()
            }
        );
        assert!("ekyt".parse::<EmbedderSpec>().is_err());
    }
}
