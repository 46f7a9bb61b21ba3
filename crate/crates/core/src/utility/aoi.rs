use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeStream};

/// Label reported for samples outside every region.
pub const BACKGROUND_LABEL: &str = "background";

/// An axis-aligned angular area of interest, half-open on both axes:
/// `[theta_min, theta_max) × [psi_min, psi_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRegion {
    pub id: String,
    pub theta_min: f64,
    pub theta_max: f64,
    pub psi_min: f64,
    pub psi_max: f64,
}

impl AoiRegion {
    pub fn contains(&self, theta: f64, psi: f64) -> bool {
        theta >= self.theta_min && theta < self.theta_max && psi >= self.psi_min && psi < self.psi_max
    }
}

/// An ordered list of regions; earlier regions win on overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scene {
    regions: Vec<AoiRegion>,
}

impl Scene {
    pub fn new(regions: Vec<AoiRegion>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &regions {
            if !(r.theta_min < r.theta_max && r.psi_min < r.psi_max) {
                return Err(Error::InvalidParameter(format!(
                    "region '{}' has an empty extent",
                    r.id
                )));
            }
            if r.id == BACKGROUND_LABEL {
                return Err(Error::InvalidParameter(format!(
                    "region id '{BACKGROUND_LABEL}' is reserved"
                )));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate region id '{}'", r.id)));
            }
        }
        Ok(Self { regions })
    }

    /// Reads a JSON array of regions.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let regions: Vec<AoiRegion> = serde_json::from_str(&text)?;
        Self::new(regions)
    }

    pub fn regions(&self) -> &[AoiRegion] {
        &self.regions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AoiLabel<'a> {
    Region(&'a str),
    Background,
}

impl<'a> AoiLabel<'a> {
    pub fn as_str(self) -> &'a str {
        match self {
            AoiLabel::Region(id) => id,
            AoiLabel::Background => BACKGROUND_LABEL,
        }
    }
}

/// First region in scene order that contains the sample, else background.
pub fn aoi_label<'a>(sample: &GazeSample, scene: &'a Scene) -> AoiLabel<'a> {
    scene
        .regions
        .iter()
        .find(|r| r.contains(sample.theta_deg, sample.psi_deg))
        .map_or(AoiLabel::Background, |r| AoiLabel::Region(&r.id))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of frames whose true label is this class.
    pub support: usize,
}

/// Prevalence-weighted precision / recall / F1 of privatized AOI labels
/// against the labels of the original stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiRetentionReport {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassScore>,
    /// Class weight (true-label prevalence) per label.
    pub class_weights: BTreeMap<String, f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Weighted multi-class scores for two label sequences.
///
/// Each class is weighted by its share of `truth`. With
/// `include_background = false` the background class is not scored, though
/// frames predicted as background still count as misses for the true class.
pub fn weighted_scores(
    truth: &[&str],
    predicted: &[&str],
    include_background: bool,
) -> Result<AoiRetentionReport> {
    if truth.len() != predicted.len() {
        return Err(Error::StreamMismatch(format!(
            "{} true labels vs {} predicted",
            truth.len(),
            predicted.len()
        )));
    }
    // (tp, fp, fn)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (&t, &p) in truth.iter().zip(predicted) {
        if t == p {
            counts.entry(t).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(t).or_default().2 += 1;
        }
    }
    let scored: Vec<(&str, (usize, usize, usize))> = counts
        .into_iter()
        .filter(|(label, _)| include_background || *label != BACKGROUND_LABEL)
        .collect();
    let total_support: usize = scored.iter().map(|(_, (tp, _, fn_))| tp + fn_).sum();

    let mut report = AoiRetentionReport {
        weighted_precision: 0.0,
        weighted_recall: 0.0,
        f1: 0.0,
        per_class: Vec::new(),
        class_weights: BTreeMap::new(),
    };
    for (label, (tp, fp, fn_)) in scored {
        let support = tp + fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        // Accumulate support-weighted sums and divide once, so identical
        // label sequences score exactly 1.
        report.weighted_precision += support as f64 * precision;
        report.weighted_recall += support as f64 * recall;
        report.f1 += support as f64 * f1;
        report
            .class_weights
            .insert(label.to_string(), ratio(support, total_support));
        report.per_class.push(ClassScore {
            label: label.to_string(),
            precision,
            recall,
            f1,
            support,
        });
    }
    if total_support > 0 {
        let n = total_support as f64;
        report.weighted_precision /= n;
        report.weighted_recall /= n;
        report.f1 /= n;
    }
    Ok(report)
}

/// AOI retention of a privatized stream, background included as a class.
pub fn aoi_retention(
    original: &GazeStream,
    privatized: &GazeStream,
    scene: &Scene,
) -> Result<AoiRetentionReport> {
    aoi_retention_with(original, privatized, scene, true)
}

pub fn aoi_retention_with(
    original: &GazeStream,
    privatized: &GazeStream,
    scene: &Scene,
    include_background: bool,
) -> Result<AoiRetentionReport> {
    if original.len() != privatized.len() {
        return Err(Error::StreamMismatch(format!(
            "original has {} samples, privatized has {}",
            original.len(),
            privatized.len()
        )));
    }
    if let Some(i) = original
        .samples
        .iter()
        .zip(&privatized.samples)
        .position(|(a, b)| (a.timestamp_s - b.timestamp_s).abs() > 1e-9)
    {
        return Err(Error::StreamMismatch(format!("timestamps differ at sample {i}")));
    }
    let truth: Vec<&str> = original.samples.iter().map(|s| aoi_label(s, scene).as_str()).collect();
    let predicted: Vec<&str> =
        privatized.samples.iter().map(|s| aoi_label(s, scene).as_str()).collect();
    weighted_scores(&truth, &predicted, include_background)
}

/// Pools several stream pairs into one retention report.
pub fn aoi_retention_pooled(
    pairs: &[(&GazeStream, &GazeStream)],
    scene: &Scene,
) -> Result<AoiRetentionReport> {
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (o, p) in pairs {
        if o.len() != p.len() {
            return Err(Error::StreamMismatch(format!(
                "user {} trial {}: {} vs {} samples",
                o.user_id,
                o.trial_id,
                o.len(),
                p.len()
            )));
        }
        truth.extend(o.samples.iter().map(|s| aoi_label(s, scene).as_str()));
        predicted.extend(p.samples.iter().map(|s| aoi_label(s, scene).as_str()));
    }
    weighted_scores(&truth, &predicted, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scene() -> Scene {
        Scene::new(vec![AoiRegion {
            id: "P".into(),
            theta_min: -5.0,
            theta_max: 5.0,
            psi_min: -5.0,
            psi_max: 5.0,
        }])
        .unwrap()
    }

    #[test]
    fn labels() {
        let sc = scene();
        assert_eq!(aoi_label(&GazeSample::new(0.0, 0.0, 0.0), &sc), AoiLabel::Region("P"));
        assert_eq!(aoi_label(&GazeSample::new(10.0, 0.0, 0.0), &sc), AoiLabel::Background);
        assert_eq!(aoi_label(&GazeSample::new(5.0, 0.0, 0.0), &sc), AoiLabel::Background);
        assert_eq!(aoi_label(&GazeSample::new(-5.0, -5.0, 0.0), &sc), AoiLabel::Region("P"));
    }

    #[test]
    fn scene_validation() {
        let r = |id: &str, lo: f64, hi: f64| AoiRegion {
            id: id.into(),
            theta_min: lo,
            theta_max: hi,
            psi_min: lo,
            psi_max: hi,
        };
        assert!(Scene::new(vec![r("a", 0.0, 1.0), r("a", 1.0, 2.0)]).is_err());
        assert!(Scene::new(vec![r("a", 1.0, 1.0)]).is_err());
        assert!(Scene::new(vec![r(BACKGROUND_LABEL, 0.0, 1.0)]).is_err());
        let parsed: Vec<AoiRegion> = serde_json::from_str(
            r#"[{"id":"menu","theta_min":-10,"theta_max":0,"psi_min":-5,"psi_max":5}]"#,
        )
        .unwrap();
        assert_eq!(Scene::new(parsed).unwrap().regions()[0].id, "menu");
    }

    #[test]
    fn confusion_example() {
        let r = weighted_scores(&["A", "A", "B", "B"], &["A", "B", "B", "B"], true).unwrap();
        assert!((r.weighted_precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.weighted_recall - 0.75).abs() < 1e-12);
        assert!((r.f1 - 11.0 / 15.0).abs() < 1e-12);
        assert!((r.f1 - 0.7333).abs() < 1e-4);
    }

    #[test]
    fn total_miss() {
        let r = weighted_scores(&["A"; 5], &[BACKGROUND_LABEL; 5], true).unwrap();
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.class_weights["A"], 1.0);
    }

    #[test]
    fn identity_stream() {
        let s = GazeStream::from_angles("u", 0, 72.0, (0..200).map(|i| ((i as f64 * 0.1).sin() * 8.0, 0.0)));
        let r = aoi_retention(&s, &s, &scene()).unwrap();
        assert_eq!((r.weighted_precision, r.weighted_recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn mismatch() {
        let s = GazeStream::from_angles("u", 0, 72.0, (0..20).map(|_| (0.0, 0.0)));
        let t = GazeStream::from_angles("u", 0, 72.0, (0..19).map(|_| (0.0, 0.0)));
        assert!(matches!(aoi_retention(&s, &t, &scene()), Err(Error::StreamMismatch(_))));
    }

    #[test]
    fn excluding_background() {
        let r = weighted_scores(&["A", "A", "background", "background"], &["A", "background", "background", "A"], false)
            .unwrap();
        assert_eq!(r.per_class.len(), 1);
        assert!((r.weighted_recall - 0.5).abs() < 1e-12);
        assert!((r.weighted_precision - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn swap_exchanges_precision_and_recall(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let names = ["A", "B", "C", BACKGROUND_LABEL];
            let t: Vec<&str> = pairs.iter().map(|(a, _)| names[*a]).collect();
            let p: Vec<&str> = pairs.iter().map(|(_, b)| names[*b]).collect();
            let fwd = weighted_scores(&t, &p, true).unwrap();
            let rev = weighted_scores(&p, &t, true).unwrap();
            for c in &fwd.per_class {
                if let Some(d) = rev.per_class.iter().find(|d| d.label == c.label) {
                    prop_assert!((c.precision - d.recall).abs() < 1e-12);
                    prop_assert!((c.recall - d.precision).abs() < 1e-12);
                }
            }
            prop_assert_eq!(fwd.f1 == 1.0, t == p);
            prop_assert!((0.0..=1.0).contains(&fwd.f1));
        }
    }
}
