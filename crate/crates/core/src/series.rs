//! Time series, datasets, wide-CSV ingestion and centroid-referenced normalization.
//!
//! A [`Dataset`] is a group of aligned series sharing one epoch axis. Before
//! clustering, every series is mapped onto the level and scale of the group
//! centroid by a per-series affine transform ([`normalize`]); the parameters
//! of that transform are kept so forecasts can be reported in original units
//! ([`denormalize`], [`SeriesNormalization::to_original`]).

use std::collections::HashSet;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working range for series length; shorter or longer series are accepted with a warning.
pub const RECOMMENDED_LEN: std::ops::RangeInclusive<usize> = 10..=30;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub id: String,
    pub label: String,
    pub unit: String,
    pub values: Vec<f64>,
    pub epochs: Vec<i64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>, epochs: Vec<i64>) -> Result<Self> {
        let id = id.into();
        let ts = TimeSeries {
            label: id.clone(),
            id,
            unit: String::new(),
            values,
            epochs,
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidSeries {
            id: self.id.clone(),
            message,
        };
        if self.values.len() < 2 {
            return Err(bad(format!(
                "needs at least 2 values, has {}",
                self.values.len()
            )));
        }
        if self.values.len() != self.epochs.len() {
            return Err(bad(format!(
                "{} values but {} epochs",
                self.values.len(),
                self.epochs.len()
            )));
        }
        if let Some(j) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(bad(format!("value at position {j} is not finite")));
        }
        if self.epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("epochs are not strictly increasing".into()));
        }
        Ok(())
    }
}

/// A group of series aligned on a shared epoch axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    epochs: Vec<i64>,
    series: Vec<TimeSeries>,
}

impl Dataset {
    pub fn new(epochs: Vec<i64>, series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::InvalidDataset("dataset has no series".into()));
        }
        let mut seen = HashSet::new();
        for ts in &series {
            if !seen.insert(ts.id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate series id `{}`",
                    ts.id
                )));
            }
            if ts.epochs != epochs {
                return Err(Error::InvalidDataset(format!(
                    "series `{}` is not aligned with the dataset epochs",
                    ts.id
                )));
            }
            ts.validate()?;
        }
        Ok(Dataset { epochs, series })
    }

    /// Builds a dataset with epochs `0..n` from `(id, values)` pairs.
    pub fn from_values<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let rows: Vec<(String, Vec<f64>)> =
            rows.into_iter().map(|(id, v)| (id.into(), v)).collect();
        let n = rows.first().map(|r| r.1.len()).unwrap_or(0);
        let epochs: Vec<i64> = (0..n as i64).collect();
        let series = rows
            .into_iter()
            .map(|(id, values)| TimeSeries::new(id, values, epochs.clone()))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(epochs, series)
    }

    pub fn epochs(&self) -> &[i64] {
        &self.epochs
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    /// Number of series, `m`.
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Number of points per series, `n`.
    pub fn n(&self) -> usize {
        self.epochs.len()
    }

    pub fn get(&self, id: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.series.iter().position(|s| s.id == id)
    }

    /// Rows of values, one per series.
    pub fn rows(&self) -> Vec<&[f64]> {
        self.series.iter().map(|s| s.values.as_slice()).collect()
    }

    /// Keeps the epochs `<= cutoff`.
    pub fn truncate_to(&self, cutoff: i64) -> Result<Dataset> {
        let keep = self.epochs.iter().take_while(|&&e| e <= cutoff).count();
        self.take_prefix(keep)
    }

    pub fn take_prefix(&self, keep: usize) -> Result<Dataset> {
        let epochs = self.epochs[..keep.min(self.n())].to_vec();
        let series = self
            .series
            .iter()
            .map(|s| TimeSeries {
                values: s.values[..epochs.len()].to_vec(),
                epochs: epochs.clone(),
                ..s.clone()
            })
            .collect();
        Dataset::new(epochs, series)
    }

    /// Same ids and metadata, new values (used for transformed copies).
    fn with_values(&self, values: Vec<Vec<f64>>) -> Result<Dataset> {
        let series = self
            .series
            .iter()
            .zip(values)
            .map(|(s, v)| TimeSeries {
                values: v,
                ..s.clone()
            })
            .collect();
        Dataset::new(self.epochs.clone(), series)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(DatasetDoc::from(self)).expect("dataset serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Dataset> {
        let doc: DatasetDoc = serde_json::from_value(value)?;
        doc.try_into()
    }
}

/// Persisted dataset layout: `{epochs, series:[{id,label,unit,values}]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetDoc {
    pub epochs: Vec<i64>,
    pub series: Vec<SeriesDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesDoc {
    pub id: String,
    pub label: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl From<&Dataset> for DatasetDoc {
    fn from(ds: &Dataset) -> Self {
        DatasetDoc {
            epochs: ds.epochs.clone(),
            series: ds
                .series
                .iter()
                .map(|s| SeriesDoc {
                    id: s.id.clone(),
                    label: s.label.clone(),
                    unit: s.unit.clone(),
                    values: s.values.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DatasetDoc> for Dataset {
    type Error = Error;

    fn try_from(doc: DatasetDoc) -> Result<Dataset> {
        let series = doc
            .series
            .into_iter()
            .map(|s| {
                Ok(TimeSeries::new(s.id, s.values, doc.epochs.clone())?
                    .with_label(s.label)
                    .with_unit(s.unit))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(doc.epochs, series)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Fill interior gaps by linear interpolation; leading/trailing gaps still fail.
    Linear,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub missing: MissingPolicy,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | ".." | "...")
}

/// Reads a wide CSV: header `id[,unit],<epoch>,<epoch>,...`, one row per series.
pub fn ingest_csv(path: impl AsRef<Path>, options: IngestOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, options)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, options: IngestOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Ingest {
                row: 1,
                column: String::new(),
                message: "missing header row".into(),
            })
        }
    };
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    if header.is_empty() || header[0].is_empty() {
        return Err(Error::Ingest {
            row: 1,
            column: "1".into(),
            message: "first column must hold series ids".into(),
        });
    }
    let has_unit = header.len() > 1 && header[1].parse::<i64>().is_err();
    let first_epoch = if has_unit { 2 } else { 1 };
    let epochs = header[first_epoch..]
        .iter()
        .enumerate()
        .map(|(k, h)| {
            h.parse::<i64>().map_err(|_| Error::Ingest {
                row: 1,
                column: (first_epoch + k + 1).to_string(),
                message: format!("epoch header `{h}` is not an integer"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if epochs.len() < 2 {
        return Err(Error::Ingest {
            row: 1,
            column: String::new(),
            message: "need at least two epoch columns".into(),
        });
    }

    let mut series = Vec::new();
    let mut seen = HashSet::new();
    for (idx, record) in records.enumerate() {
        let row = idx + 2;
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::Ingest {
                row,
                column: String::new(),
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Ingest {
                row,
                column: header[0].clone(),
                message: format!("duplicate id `{id}`"),
            });
        }
        let unit = if has_unit {
            record[1].to_string()
        } else {
            String::new()
        };
        let mut cells: Vec<Option<f64>> = Vec::with_capacity(epochs.len());
        for (k, cell) in record.iter().skip(first_epoch).enumerate() {
            if is_missing(cell) {
                cells.push(None);
                continue;
            }
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Ingest {
                    row,
                    column: header[first_epoch + k].clone(),
                    message: format!("cannot parse `{cell}` as a number"),
                })?;
            cells.push(Some(v));
        }
        let values = fill_gaps(&cells, options.missing).map_err(|k| Error::Ingest {
            row,
            column: header[first_epoch + k].clone(),
            message: "missing value".into(),
        })?;
        series.push(TimeSeries::new(id, values, epochs.clone())?.with_unit(unit));
    }
    if !RECOMMENDED_LEN.contains(&epochs.len()) {
        warn!(
            "series have {} points, outside the recommended range {:?}",
            epochs.len(),
            RECOMMENDED_LEN
        );
    }
    Dataset::new(epochs, series)
}

/// Returns the index of the first unfillable gap on failure.
fn fill_gaps(cells: &[Option<f64>], policy: MissingPolicy) -> std::result::Result<Vec<f64>, usize> {
    if let Some(first_gap) = cells.iter().position(Option::is_none) {
        if policy == MissingPolicy::Reject {
            return Err(first_gap);
        }
    }
    let known: Vec<usize> = (0..cells.len()).filter(|&j| cells[j].is_some()).collect();
    let (Some(&lo), Some(&hi)) = (known.first(), known.last()) else {
        return Err(0);
    };
    if lo > 0 {
        return Err(0);
    }
    if hi < cells.len() - 1 {
        return Err(hi + 1);
    }
    let mut out = Vec::with_capacity(cells.len());
    for (j, c) in cells.iter().enumerate() {
        match c {
            Some(v) => out.push(*v),
            None => {
                let left = known.iter().rev().find(|&&k| k < j).copied().unwrap();
                let right = known.iter().find(|&&k| k > j).copied().unwrap();
                let (a, b) = (cells[left].unwrap(), cells[right].unwrap());
                let w = (j - left) as f64 / (right - left) as f64;
                out.push(a + (b - a) * w);
            }
        }
    }
    Ok(out)
}

/// Elementwise mean of all series in a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCentroid {
    pub values: Vec<f64>,
}

pub fn group_centroid(ds: &Dataset) -> GroupCentroid {
    GroupCentroid {
        values: elementwise_mean(ds.series().iter().map(|s| s.values.as_slice()), ds.n()),
    }
}

pub(crate) fn elementwise_mean<'a>(rows: impl Iterator<Item = &'a [f64]>, n: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n];
    let mut count = 0usize;
    for row in rows {
        for (acc, v) in sum.iter_mut().zip(row) {
            *acc += v;
        }
        count += 1;
    }
    sum.into_iter().map(|s| s / count as f64).collect()
}

/// Direction of the per-series deviation term.
///
/// `Paper` uses `(mean - value) / step`, which mirrors each series about its
/// mean. `Corrected` uses `(value - mean) / step` and preserves trend direction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Paper,
    #[default]
    Corrected,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Paper => -1.0,
            Orientation::Corrected => 1.0,
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Orientation::Paper),
            "corrected" => Ok(Orientation::Corrected),
            other => Err(Error::Config(format!("unknown orientation `{other}`"))),
        }
    }
}

/// Affine map of one series onto the centroid's level and step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesNormalization {
    pub id: String,
    pub orientation: Orientation,
    /// Average step of the reference centroid.
    pub h_s: f64,
    /// Average step of this series.
    pub h_t: f64,
    /// Mean level of the reference centroid.
    pub s_bar: f64,
    /// Mean level of this series.
    pub t_bar: f64,
}

impl SeriesNormalization {
    pub fn to_normalized(&self, value: f64) -> f64 {
        let delta = self.orientation.sign() * (value - self.t_bar) / self.h_t;
        self.s_bar + delta * self.h_s
    }

    pub fn to_original(&self, value: f64) -> f64 {
        let delta = (value - self.s_bar) / self.h_s;
        self.t_bar + self.orientation.sign() * delta * self.h_t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub orientation: Orientation,
    pub series: Vec<SeriesNormalization>,
}

impl NormalizationParams {
    pub fn get(&self, id: &str) -> Result<&SeriesNormalization> {
        self.series
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::UnknownSeries(id.to_string()))
    }
}

/// `(max - min) / n` and the arithmetic mean.
fn step_and_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    ((max - min) / n, values.iter().sum::<f64>() / n)
}

pub fn normalize(
    ds: &Dataset,
    centroid: &GroupCentroid,
    orientation: Orientation,
) -> Result<(Dataset, NormalizationParams)> {
    if centroid.values.len() != ds.n() {
        return Err(Error::LengthMismatch {
            left: centroid.values.len(),
            right: ds.n(),
        });
    }
    let (h_s, s_bar) = step_and_mean(&centroid.values);
    if !(h_s > 0.0) {
        return Err(Error::DegenerateCentroid);
    }
    let mut params = Vec::with_capacity(ds.len());
    let mut values = Vec::with_capacity(ds.len());
    for ts in ds.series() {
        let (h_t, t_bar) = step_and_mean(&ts.values);
        if !(h_t > 0.0) {
            return Err(Error::DegenerateSeries(ts.id.clone()));
        }
        let p = SeriesNormalization {
            id: ts.id.clone(),
            orientation,
            h_s,
            h_t,
            s_bar,
            t_bar,
        };
        values.push(ts.values.iter().map(|&v| p.to_normalized(v)).collect());
        params.push(p);
    }
    Ok((
        ds.with_values(values)?,
        NormalizationParams {
            orientation,
            series: params,
        },
    ))
}

/// Applies already-fitted parameters to a dataset with the same ids (e.g. one
/// that includes the holdout range).
pub fn apply_normalization(ds: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    let values = ds
        .series()
        .iter()
        .map(|ts| {
            let p = params.get(&ts.id)?;
            Ok(ts.values.iter().map(|&v| p.to_normalized(v)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ds.with_values(values)
}

pub fn denormalize(ds: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    let values = ds
        .series()
        .iter()
        .map(|ts| {
            let p = params.get(&ts.id)?;
            Ok(ts.values.iter().map(|&v| p.to_original(v)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ds.with_values(values)
}
