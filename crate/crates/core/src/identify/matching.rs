use std::collections::BTreeMap;

use super::embedding::Embedding;
use crate::error::{Error, Result};

/// Cosine distance `1 - a·b / (|a| |b|)`, in [0, 2].
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok((1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0))
}

/// Per-dimension standardization fitted on one set and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl ZScore {
    /// Fits mean and standard deviation per dimension. Constant dimensions
    /// get unit scale.
    pub fn fit(records: &[Embedding]) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptySet)?;
        let dim = first.dim();
        let n = records.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in records {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.dim(),
                });
            }
            for (m, x) in mean.iter_mut().zip(&r.vector) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in records {
            for ((v, x), m) in var.iter_mut().zip(&r.vector).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, e: &Embedding) -> Result<Embedding> {
        if e.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: e.dim(),
            });
        }
        let vector = e
            .vector
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(Embedding {
            vector,
            ..e.clone()
        })
    }

    pub fn transform_all(&self, es: &[Embedding]) -> Result<Vec<Embedding>> {
        es.iter().map(|e| self.transform(e)).collect()
    }
}

/// Outcome of matching one user's query records against a reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// Nearest-neighbour votes per label.
    pub votes: BTreeMap<String, usize>,
}

/// Label of the reference record nearest to `query`. Exact distance ties go
/// to the lexicographically smallest label.
pub fn nearest_label<'a>(query: &[f64], reference: &'a [Embedding]) -> Result<&'a str> {
    let mut best: Option<(f64, &str)> = None;
    for r in reference {
        let d = match cosine_distance(query, &r.vector) {
            Ok(d) => d,
            Err(Error::DegenerateVector) => continue,
            Err(e) => return Err(e),
        };
        best = match best {
            Some((bd, bl)) if bd < d || (bd == d && bl <= r.user_id.as_str()) => Some((bd, bl)),
            _ => Some((d, r.user_id.as_str())),
        };
    }
    best.map(|(_, l)| l).ok_or(Error::DegenerateVector)
}

/// Nearest-neighbour vote over one user's query records.
///
/// Each query record votes for the label of its closest reference record by
/// cosine distance; the modal label wins, ties going to the
/// lexicographically smallest label. Zero-norm records cannot be matched
/// and are skipped.
pub fn predict_identity(query: &[Embedding], reference: &[Embedding]) -> Result<Prediction> {
    if query.is_empty() || reference.is_empty() {
        return Err(Error::EmptySet);
    }
    let dim = reference[0].dim();
    if let Some(bad) = query.iter().chain(reference).find(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }
    let mut votes: BTreeMap<String, usize> = BTreeMap::new();
    for q in query {
        match nearest_label(&q.vector, reference) {
            Ok(label) => *votes.entry(label.to_string()).or_default() += 1,
            Err(Error::DegenerateVector) => continue,
            Err(e) => return Err(e),
        }
    }
    // BTreeMap iterates in label order, so the first maximum is the smallest label.
    let label = votes
        .iter()
        .fold(None::<(&String, usize)>, |acc, (l, &c)| match acc {
            Some((_, bc)) if bc >= c => acc,
            _ => Some((l, c)),
        })
        .map(|(l, _)| l.clone())
        .ok_or(Error::DegenerateVector)?;
    Ok(Prediction { label, votes })
}
