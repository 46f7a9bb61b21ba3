//! CSV formats: gaze streams in and out, and one results schema per report
//! kind.
//!
//! Result schemas (all floats at 9 decimal places):
//!
//! * identification: `query_trial,reference_trial,user_id,predicted,correct`,
//!   one row per user per trial pair, then a summary row
//!   `all,all,all,,<mean accuracy>`.
//! * AOI retention: `label,precision,recall,f1,support,weight`, one row per
//!   class, then `weighted,<precision>,<recall>,<f1>,<frames>,1`.
//! * threat table: `mechanism,before,blackbox,exemplars,whitebox`; scenarios
//!   that were not run are left empty.
//! * sweep: `mechanism,strength,id_accuracy,aoi_f1`; `aoi_f1` is empty when no
//!   scene was given.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::ThreatRow;
use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeStream};
use crate::identify::IdentificationReport;
use crate::sweep::SweepRow;
use crate::utility::AoiRetentionReport;

pub const STREAM_HEADER: [&str; 6] = [
    "user_id",
    "trial_id",
    "frame",
    "timestamp_s",
    "theta_deg",
    "psi_deg",
];

// Estimated rates are rounded to this many Hz.
const RATE_RESOLUTION_HZ: f64 = 1e-6;

/// Source column name for each canonical field, plus per-trial condition
/// columns to carry through. Fields left out of a mapping file keep their
/// canonical names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub user_id: String,
    pub trial_id: String,
    pub frame: String,
    pub timestamp_s: String,
    pub theta_deg: String,
    pub psi_deg: String,
    pub conditions: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        let [user_id, trial_id, frame, timestamp_s, theta_deg, psi_deg] =
            STREAM_HEADER.map(String::from);
        Self {
            user_id,
            trial_id,
            frame,
            timestamp_s,
            theta_deg,
            psi_deg,
            conditions: Vec::new(),
        }
    }
}

impl ColumnMapping {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(file)?)
    }

    fn fields(&self) -> [(&'static str, &str); 6] {
        [
            ("user_id", &self.user_id),
            ("trial_id", &self.trial_id),
            ("frame", &self.frame),
            ("timestamp_s", &self.timestamp_s),
            ("theta_deg", &self.theta_deg),
            ("psi_deg", &self.psi_deg),
        ]
    }
}

/// Everything an import produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamImport {
    /// Sorted by (user_id, trial_id).
    pub streams: Vec<GazeStream>,
    /// Condition values per (user_id, trial_id), taken from the trial's first
    /// row in file order.
    pub conditions: BTreeMap<(String, u32), BTreeMap<String, String>>,
    /// Rows dropped because a later row had the same timestamp.
    pub collapsed_rows: usize,
}

struct Row {
    timestamp: f64,
    theta: f64,
    psi: f64,
}

fn parse_f64(field: &str, column: &str, row: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column {column}: '{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column {column}: '{field}' is not finite"),
        });
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(field: &str, column: &str, row: usize) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column {column}: '{field}' is not a non-negative integer"),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        row,
        message: e.to_string(),
    }
}

/// Median inter-sample interval, as a rate.
fn estimate_rate(samples: &[GazeSample]) -> f64 {
    let mut dts: Vec<f64> = samples
        .windows(2)
        .map(|w| w[1].timestamp_s - w[0].timestamp_s)
        .collect();
    if dts.is_empty() {
        return 1.0;
    }
    dts.sort_by(f64::total_cmp);
    let rate = 1.0 / dts[dts.len() / 2];
    (rate / RATE_RESOLUTION_HZ).round() * RATE_RESOLUTION_HZ
}

/// Reads gaze rows from any reader. See [`read_stream_csv`].
pub fn read_streams<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<StreamImport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };
    let mut idx = [0usize; 6];
    for (slot, (_, source)) in idx.iter_mut().zip(mapping.fields()) {
        *slot = column(source)?;
    }
    let condition_idx = mapping
        .conditions
        .iter()
        .map(|c| column(c).map(|i| (c.clone(), i)))
        .collect::<Result<Vec<_>>>()?;
    let names = mapping.fields().map(|(_, source)| source.to_string());

    let mut groups: BTreeMap<(String, u32), Vec<(u64, Row)>> = BTreeMap::new();
    let mut conditions = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize| record.get(idx[i]).unwrap_or("");
        let user = get(0).to_string();
        if user.is_empty() {
            return Err(Error::Parse {
                row,
                message: format!("column {}: empty user id", names[0]),
            });
        }
        let trial: u32 = parse_int(get(1), &names[1], row)?;
        let frame: u64 = parse_int(get(2), &names[2], row)?;
        let parsed = Row {
            timestamp: parse_f64(get(3), &names[3], row)?,
            theta: parse_f64(get(4), &names[4], row)?,
            psi: parse_f64(get(5), &names[5], row)?,
        };
        let key = (user, trial);
        conditions.entry(key.clone()).or_insert_with(|| {
            condition_idx
                .iter()
                .map(|(name, i)| (name.clone(), record.get(*i).unwrap_or("").to_string()))
                .collect::<BTreeMap<_, _>>()
        });
        groups.entry(key).or_default().push((frame, parsed));
    }

    let mut collapsed_rows = 0;
    let mut streams = Vec::with_capacity(groups.len());
    for ((user, trial), mut rows) in groups {
        // Stable: rows sharing a timestamp stay in file order.
        rows.sort_by(|a, b| a.1.timestamp.total_cmp(&b.1.timestamp));
        let mut samples: Vec<GazeSample> = Vec::with_capacity(rows.len());
        for (_, r) in rows {
            let s = GazeSample::new(r.theta, r.psi, r.timestamp);
            match samples.last_mut() {
                Some(last) if last.timestamp_s == s.timestamp_s => {
                    *last = s;
                    collapsed_rows += 1;
                }
                _ => samples.push(s),
            }
        }
        let t0 = samples[0].timestamp_s;
        if t0 != 0.0 {
            for s in &mut samples {
                s.timestamp_s -= t0;
            }
        }
        let rate = estimate_rate(&samples);
        streams.push(GazeStream::new(user, trial, rate, samples));
    }
    if collapsed_rows > 0 {
        log::warn!("{collapsed_rows} rows with duplicate timestamps collapsed to the last occurrence");
    }
    Ok(StreamImport {
        streams,
        conditions,
        collapsed_rows,
    })
}

/// Full import of a gaze CSV, with conditions and the collapse count.
pub fn import_stream_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<StreamImport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_streams(file, mapping)
}

/// Reads a gaze CSV into one stream per (user, trial).
///
/// Rows are sorted by timestamp, duplicate timestamps keep the last row, and
/// each trial's timestamps are shifted to start at 0. The nominal rate is
/// estimated from the median sample interval.
pub fn read_stream_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Vec<GazeStream>> {
    Ok(import_stream_csv(path, mapping)?.streams)
}

/// Writes streams in the canonical layout. Floats are written in their
/// shortest exact form, so reading the file back gives the same values.
pub fn write_streams<W: Write>(writer: W, streams: &[GazeStream]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STREAM_HEADER).map_err(csv_error)?;
    for s in streams {
        let trial = s.trial_id.to_string();
        for (frame, g) in s.samples.iter().enumerate() {
            w.write_record([
                s.user_id.as_str(),
                &trial,
                &frame.to_string(),
                &g.timestamp_s.to_string(),
                &g.theta_deg.to_string(),
                &g.psi_deg.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_stream_csv(streams: &[GazeStream], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for s in streams {
        s.validate()?;
    }
    write_streams(create(path)?, streams).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Fixed-point, nine decimal places.
pub fn format_value(x: f64) -> String {
    format!("{x:.9}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_value).unwrap_or_default()
}

/// A report with a CSV layout.
pub trait ResultsCsv {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

impl ResultsCsv for IdentificationReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["query_trial", "reference_trial", "user_id", "predicted", "correct"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .pairs
            .iter()
            .flat_map(|p| {
                p.outcomes.iter().map(move |o| {
                    vec![
                        p.query_trial.to_string(),
                        p.reference_trial.to_string(),
                        o.user_id.clone(),
                        o.predicted.clone(),
                        u8::from(o.correct).to_string(),
                    ]
                })
            })
            .collect();
        rows.push(vec![
            "all".into(),
            "all".into(),
            "all".into(),
            String::new(),
            format_value(self.mean_accuracy),
        ]);
        rows
    }
}

impl ResultsCsv for AoiRetentionReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["label", "precision", "recall", "f1", "support", "weight"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self
            .per_class
            .iter()
            .map(|c| {
                vec![
                    c.label.clone(),
                    format_value(c.precision),
                    format_value(c.recall),
                    format_value(c.f1),
                    c.support.to_string(),
                    format_value(self.class_weights.get(&c.label).copied().unwrap_or(0.0)),
                ]
            })
            .collect();
        let frames: usize = self.per_class.iter().map(|c| c.support).sum();
        rows.push(vec![
            "weighted".into(),
            format_value(self.weighted_precision),
            format_value(self.weighted_recall),
            format_value(self.f1),
            frames.to_string(),
            format_value(1.0),
        ]);
        rows
    }
}

impl ResultsCsv for [ThreatRow] {
    fn header(&self) -> Vec<&'static str> {
        vec!["mechanism", "before", "blackbox", "exemplars", "whitebox"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.mechanism.clone(),
                    format_value(r.before),
                    format_opt(r.blackbox),
                    format_opt(r.exemplars),
                    format_opt(r.whitebox),
                ]
            })
            .collect()
    }
}

impl ResultsCsv for [SweepRow] {
    fn header(&self) -> Vec<&'static str> {
        vec!["mechanism", "strength", "id_accuracy", "aoi_f1"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.mechanism.to_string(),
                    r.strength.to_string(),
                    format_value(r.id_accuracy),
                    format_opt(r.aoi_f1),
                ]
            })
            .collect()
    }
}

pub fn write_results<W: Write, R: ResultsCsv + ?Sized>(writer: W, report: &R) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(report.header()).map_err(csv_error)?;
    for row in report.rows() {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

pub fn write_results_csv<R: ResultsCsv + ?Sized>(report: &R, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_results(create(path)?, report).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}
