use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regressor::{apply_inverse, train_inverse_regressor, RegressorHyper};
use super::wavelet::{wavelet_denoise, WaveletConfig};
use crate::error::{Error, Result};
use crate::gaze::{segment, GazeStream, Segment, DEFAULT_WINDOW_S};
use crate::identify::{evaluate_identification, evaluate_streams, EmbedderSpec};
use crate::mechanisms::{privatize_all, MechanismConfig};
use crate::rng::{derive_seed, Key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Wavelet denoising of the privatized queries.
    Blackbox,
    /// Inverse regression learned from (privatized, raw) exemplars.
    Exemplars,
    /// The reference set privatized with the same mechanism.
    Whitebox,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Blackbox, Scenario::Exemplars, Scenario::Whitebox];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Blackbox => "blackbox",
            Scenario::Exemplars => "exemplars",
            Scenario::Whitebox => "whitebox",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown scenario '{s}' (expected blackbox, exemplars or whitebox)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreatReport {
    pub scenario: Scenario,
    pub mechanism: String,
    /// Privatized-query accuracy with no attack.
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

/// One mechanism's line of the attack table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreatRow {
    pub mechanism: String,
    pub before: f64,
    pub blackbox: Option<f64>,
    pub exemplars: Option<f64>,
    pub whitebox: Option<f64>,
}

impl ThreatRow {
    /// Collects reports for one mechanism into a row. The `before` value is
    /// taken from the first report.
    pub fn from_reports(reports: &[ThreatReport]) -> Result<Self> {
        let first = reports.first().ok_or(Error::EmptySet)?;
        if let Some(other) = reports.iter().find(|r| r.mechanism != first.mechanism) {
            return Err(Error::InvalidParameter(format!(
                "reports mix mechanisms {} and {}",
                first.mechanism, other.mechanism
            )));
        }
        let after = |s: Scenario| reports.iter().find(|r| r.scenario == s).map(|r| r.accuracy_after);
        Ok(Self {
            mechanism: first.mechanism.clone(),
            before: first.accuracy_before,
            blackbox: after(Scenario::Blackbox),
            exemplars: after(Scenario::Exemplars),
            whitebox: after(Scenario::Whitebox),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreatOptions {
    pub wavelet: WaveletConfig,
    pub regressor: RegressorHyper,
}

/// Each user's trials split in two by trial order: the first half and the
/// rest. Returns the (user, trial) keys of each half.
pub fn split_trials(dataset: &[GazeStream]) -> [BTreeSet<(String, u32)>; 2] {
    let mut by_user: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for s in dataset {
        by_user.entry(&s.user_id).or_default().insert(s.trial_id);
    }
    let mut halves = [BTreeSet::new(), BTreeSet::new()];
    for (user, trials) in by_user {
        let cut = trials.len() / 2;
        for (i, t) in trials.into_iter().enumerate() {
            halves[usize::from(i >= cut)].insert((user.to_string(), t));
        }
    }
    halves
}

/// Aligned (privatized, original) 5 s windows without overlap.
pub fn exemplar_pairs(
    privatized: &[GazeStream],
    originals: &[GazeStream],
) -> Result<Vec<(Segment, Segment)>> {
    if privatized.len() != originals.len() {
        return Err(Error::StreamMismatch(format!(
            "{} privatized streams for {} originals",
            privatized.len(),
            originals.len()
        )));
    }
    let mut pairs = Vec::new();
    for (p, o) in privatized.iter().zip(originals) {
        if p.user_id != o.user_id || p.trial_id != o.trial_id || p.len() != o.len() {
            return Err(Error::StreamMismatch(format!(
                "privatized user {} trial {} does not match original user {} trial {}",
                p.user_id, p.trial_id, o.user_id, o.trial_id
            )));
        }
        let ps = segment(p, DEFAULT_WINDOW_S, DEFAULT_WINDOW_S)?;
        let os = segment(o, DEFAULT_WINDOW_S, DEFAULT_WINDOW_S)?;
        pairs.extend(ps.into_iter().zip(os));
    }
    Ok(pairs)
}

fn select(streams: &[GazeStream], keys: &BTreeSet<(String, u32)>) -> Vec<GazeStream> {
    streams
        .iter()
        .filter(|s| keys.contains(&(s.user_id.clone(), s.trial_id)))
        .cloned()
        .collect()
}

fn exemplars_accuracy(
    dataset: &[GazeStream],
    privatized: &[GazeStream],
    embedder: &EmbedderSpec,
    options: &ThreatOptions,
    seed: u64,
) -> Result<f64> {
    let halves = split_trials(dataset);
    if halves.iter().any(BTreeSet::is_empty) {
        return Err(Error::Protocol(
            "the exemplars split needs at least 2 trials per user".into(),
        ));
    }
    let mut accuracies = Vec::with_capacity(2);
    for fold in 0..2 {
        let (train, eval) = (&halves[fold], &halves[1 - fold]);
        let pairs = exemplar_pairs(&select(privatized, train), &select(dataset, train))?;
        let model_seed = derive_seed(seed, &[Key::Str("exemplars"), Key::Int(fold as u64)]);
        let model = train_inverse_regressor(&pairs, &options.regressor, model_seed)?;
        let queries = select(privatized, eval)
            .par_iter()
            .map(|s| apply_inverse(&model, s))
            .collect::<Result<Vec<_>>>()?;
        // Held-out queries against every other raw trial.
        let eval_trials: BTreeSet<u32> = eval.iter().map(|(_, t)| *t).collect();
        let all_trials: BTreeSet<u32> = dataset.iter().map(|s| s.trial_id).collect();
        let trial_pairs: Vec<(u32, u32)> = eval_trials
            .iter()
            .flat_map(|&q| all_trials.iter().filter(move |&&r| r != q).map(move |&r| (q, r)))
            .collect();
        let report = evaluate_streams(&queries, dataset, embedder, Some(&trial_pairs))?;
        log::info!("exemplars fold {fold}: accuracy {:.4}", report.mean_accuracy);
        accuracies.push(report.mean_accuracy);
    }
    Ok(accuracies.iter().sum::<f64>() / accuracies.len() as f64)
}

/// Runs one attack with default attack settings.
pub fn run_threat_scenario(
    scenario: Scenario,
    dataset: &[GazeStream],
    mechanism: &MechanismConfig,
    embedder: &EmbedderSpec,
    seed: u64,
) -> Result<ThreatReport> {
    run_threat_scenario_with(scenario, dataset, mechanism, embedder, seed, &ThreatOptions::default())
}

/// Identification accuracy of privatized queries before and after an
/// attack.
///
/// Queries are privatized with `seed` exactly as in the unattacked
/// evaluation. The white-box reference set is privatized with a seed
/// derived from `seed`, so the attacker never sees the defender's draws.
pub fn run_threat_scenario_with(
    scenario: Scenario,
    dataset: &[GazeStream],
    mechanism: &MechanismConfig,
    embedder: &EmbedderSpec,
    seed: u64,
    options: &ThreatOptions,
) -> Result<ThreatReport> {
    mechanism.validate()?;
    let before = evaluate_identification(dataset, embedder, mechanism, seed)?.mean_accuracy;
    let privatized = privatize_all(dataset, mechanism, seed)?;
    let after = match scenario {
        Scenario::Blackbox => {
            let denoised = privatized
                .par_iter()
                .map(|s| wavelet_denoise(s, &options.wavelet))
                .collect::<Result<Vec<_>>>()?;
            evaluate_streams(&denoised, dataset, embedder, None)?.mean_accuracy
        }
        Scenario::Exemplars => exemplars_accuracy(dataset, &privatized, embedder, options, seed)?,
        Scenario::Whitebox => {
            let reference_seed = derive_seed(seed, &[Key::Str("whitebox-reference")]);
            let references = privatize_all(dataset, mechanism, reference_seed)?;
            evaluate_streams(&privatized, &references, embedder, None)?.mean_accuracy
        }
    };
    Ok(ThreatReport {
        scenario,
        mechanism: mechanism.to_string(),
        accuracy_before: before,
        accuracy_after: after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(user: &str, trial: u32) -> GazeStream {
        GazeStream::from_angles(user, trial, 72.0, (0..72 * 6).map(|i| (i as f64 * 0.01, 0.0)))
    }

    #[test]
    fn scenario_names() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("greybox".parse::<Scenario>().is_err());
    }

    #[test]
    fn split_by_trial_within_user() {
        let data: Vec<_> = ["a", "b"]
            .iter()
            .flat_map(|u| [4, 1, 3, 2].map(|t| stream(u, t)))
            .chain([stream("c", 7), stream("c", 9), stream("c", 8)])
            .collect();
        let [first, second] = split_trials(&data);
        assert!(first.contains(&("a".into(), 1)) && first.contains(&("a".into(), 2)));
        assert!(second.contains(&("b".into(), 3)) && second.contains(&("b".into(), 4)));
        // Odd counts put the extra trial in the second half.
        assert!(first.contains(&("c".into(), 7)));
        assert!(second.contains(&("c".into(), 8)) && second.contains(&("c".into(), 9)));
        assert_eq!(first.len() + second.len(), data.len());
    }

    #[test]
    fn exemplar_pairs_align() {
        let raw = vec![stream("a", 1)];
        let pairs = exemplar_pairs(&raw, &raw).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0, pairs[0].1);
        assert!(matches!(
            exemplar_pairs(&raw, &[stream("a", 2)]),
            Err(Error::StreamMismatch(_))
        ));
    }

    #[test]
    fn row_from_reports() {
        let r = |s, after| ThreatReport {
            scenario: s,
            mechanism: "spatial(l=144)".into(),
            accuracy_before: 0.2,
            accuracy_after: after,
        };
        let row = ThreatRow::from_reports(&[r(Scenario::Whitebox, 0.6), r(Scenario::Blackbox, 0.2)]).unwrap();
        assert_eq!(row.blackbox, Some(0.2));
        assert_eq!(row.exemplars, None);
        assert_eq!(row.whitebox, Some(0.6));
        assert!(ThreatRow::from_reports(&[]).is_err());
    }
}
