//! The grouped forecasting workflow: normalize the group on its training
//! range, cluster it, fit one general model per cluster centroid, forecast
//! every series with its cluster's model, and refit individual models for
//! series the general model serves poorly.
//!
//! Models live in the normalized space they were trained in. A series is
//! forecast by normalizing its own history with its affine parameters,
//! iterating the one-step model with forecast feedback, and mapping the
//! results back to original units.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{kmeans, ClusterModelSet, KMeansConfig, Partition, PartitionDoc};
use crate::error::{Error, Result};
use crate::mcsa::{
    afer, mcsa_run, mcsa_run_seeded, seeded_population, FittedModel, FittedModelDoc, McsaConfig,
};
use crate::rng;
use crate::series::{
    group_centroid, normalize, Dataset, NormalizationParams, Orientation, SeriesNormalization,
};

const SEED_GENERAL: u64 = 10;
const SEED_REFINE: u64 = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kmeans: KMeansConfig,
    pub mcsa: McsaConfig,
    pub orientation: Orientation,
    pub horizon: usize,
    /// Train AFER (percent) above which a series gets an individual model.
    pub refine_threshold: f64,
    /// Last training epoch; later epochs are holdout. `None` trains on everything.
    pub train_cutoff: Option<i64>,
    /// Added to a cluster's normalized space when its centroid contains a zero.
    pub epsilon_shift: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kmeans: KMeansConfig::default(),
            mcsa: McsaConfig::default(),
            orientation: Orientation::default(),
            horizon: 3,
            refine_threshold: 2.0,
            train_cutoff: None,
            epsilon_shift: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(self.refine_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "refine_threshold must be positive".into(),
            ));
        }
        if let Some(e) = self.epsilon_shift {
            if !e.is_finite() || e == 0.0 {
                return Err(Error::InvalidConfig(
                    "epsilon_shift must be finite and non-zero".into(),
                ));
            }
        }
        self.mcsa.validate()?;
        self.kmeans.validate(ds.len())?;
        let train_len = self.train_len(ds)?;
        let needed = self.mcsa.template.k_max() + 2;
        if train_len < needed {
            return Err(Error::InvalidConfig(format!(
                "train_cutoff leaves {train_len} training points, need at least {needed}"
            )));
        }
        Ok(())
    }

    fn train_len(&self, ds: &Dataset) -> Result<usize> {
        match self.train_cutoff {
            None => Ok(ds.n()),
            Some(cut) => {
                let (first, last) = (ds.epochs()[0], ds.epochs()[ds.n() - 1]);
                if cut < first || cut > last {
                    return Err(Error::InvalidConfig(format!(
                        "train_cutoff {cut} outside the dataset's epochs {first}..{last}"
                    )));
                }
                Ok(ds.epochs().iter().take_while(|&&e| e <= cut).count())
            }
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Training range of a dataset, its normalized copy and the affine parameters.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub normalized: Dataset,
    pub params: NormalizationParams,
}

pub fn prepare(ds: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate(ds)?;
    normalize_training(ds, cfg)
}

/// Cuts and normalizes the training range without checking the model
/// settings, for callers that only cluster.
pub fn normalize_training(ds: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    let train = ds.take_prefix(cfg.train_len(ds)?)?;
    let (normalized, params) = normalize(&train, &group_centroid(&train), cfg.orientation)
        .map_err(|e| e.in_stage("normalize", "group"))?;
    Ok(Prepared {
        train,
        normalized,
        params,
    })
}

/// A fitted model together with the offset of the space it was fit in.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub cluster: usize,
    pub shift: f64,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModelDoc {
    pub cluster: usize,
    pub shift: f64,
    #[serde(flatten)]
    pub model: FittedModelDoc,
}

impl ClusterModel {
    pub fn to_doc(&self, config_digest: &str, train_range: (i64, i64)) -> ClusterModelDoc {
        ClusterModelDoc {
            cluster: self.cluster,
            shift: self.shift,
            model: self.model.to_doc(config_digest, Some(train_range)),
        }
    }
}

impl ClusterModelDoc {
    pub fn cluster_model(&self) -> Result<ClusterModel> {
        Ok(ClusterModel {
            cluster: self.cluster,
            shift: self.shift,
            model: self.model.fitted()?,
        })
    }
}

/// Output of the general stage: everything needed to forecast and refine.
#[derive(Debug, Clone)]
pub struct GeneralStage {
    pub prepared: Prepared,
    pub partition: Partition,
    pub clusters: ClusterModelSet,
    pub models: Vec<ClusterModel>,
}

impl GeneralStage {
    pub fn train_range(&self) -> (i64, i64) {
        let e = self.prepared.train.epochs();
        (e[0], e[e.len() - 1])
    }
}

pub fn cluster_stage(
    prepared: &Prepared,
    cfg: &PipelineConfig,
) -> Result<(Partition, ClusterModelSet)> {
    kmeans(&prepared.normalized, &cfg.kmeans).map_err(|e| e.in_stage("cluster", "group"))
}

fn space_shift(values: &[f64], cfg: &PipelineConfig) -> f64 {
    match cfg.epsilon_shift {
        Some(e) if values.iter().skip(1).any(|&v| v == 0.0) => e,
        _ => 0.0,
    }
}

/// One MCSA run per cluster centroid.
pub fn fit_cluster_models(
    centroids: &[Vec<f64>],
    cfg: &PipelineConfig,
) -> Result<Vec<ClusterModel>> {
    centroids
        .par_iter()
        .enumerate()
        .map(|(r, centroid)| {
            let shift = space_shift(centroid, cfg);
            let shifted: Vec<f64> = centroid.iter().map(|v| v + shift).collect();
            let mcsa = McsaConfig {
                seed: rng::derive_seed(cfg.mcsa.seed, &[SEED_GENERAL, r as u64]),
                ..cfg.mcsa.clone()
            };
            let model =
                mcsa_run(&shifted, &mcsa).map_err(|e| e.in_stage("fit", format!("cluster {r}")))?;
            Ok(ClusterModel {
                cluster: r,
                shift,
                model,
            })
        })
        .collect()
}

pub fn fit_general_models(ds: &Dataset, cfg: &PipelineConfig) -> Result<GeneralStage> {
    let prepared = prepare(ds, cfg)?;
    let (partition, clusters) = cluster_stage(&prepared, cfg)?;
    let models = fit_cluster_models(&clusters.centroids, cfg)?;
    Ok(GeneralStage {
        prepared,
        partition,
        clusters,
        models,
    })
}

/// Iterated one-step forecasts in original units. `values[i]` is `None` from
/// the first invalid step onwards, and `invalid_step` is that step (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub values: Vec<Option<f64>>,
    pub invalid_step: Option<usize>,
}

pub fn forecast_series(
    history: &[f64],
    model: &FittedModel,
    shift: f64,
    norm: &SeriesNormalization,
    h: usize,
) -> Result<Forecast> {
    let k = model.order_k;
    if history.len() < k {
        return Err(Error::TrainTooShort {
            len: history.len(),
            needed: k,
        });
    }
    let tree = model.tree();
    let mut window: Vec<f64> = history
        .iter()
        .rev()
        .take(k)
        .map(|&v| norm.to_normalized(v) + shift)
        .collect();
    let mut values = Vec::with_capacity(h);
    let mut invalid_step = None;
    for step in 1..=h {
        match tree.evaluate_unchecked(&window) {
            Some(f) => {
                values.push(Some(norm.to_original(f - shift)));
                window.insert(0, f);
                window.truncate(k);
            }
            None => {
                invalid_step = Some(step);
                break;
            }
        }
    }
    values.resize(h, None);
    Ok(Forecast {
        values,
        invalid_step,
    })
}

/// AFER of `model` on a normalized series, in the model's shifted space.
pub fn series_afer(normalized: &[f64], model: &FittedModel, shift: f64) -> Result<f64> {
    let shifted: Vec<f64> = normalized.iter().map(|v| v + shift).collect();
    let tree = model.tree();
    afer(&shifted, model.order_k, |w| tree.evaluate_unchecked(w))
}

/// Mean absolute relative error over the horizon, in percent.
pub fn horizon_error(facts: &[f64], forecasts: &[Option<f64>]) -> Option<f64> {
    if facts.is_empty() || facts.contains(&0.0) {
        return None;
    }
    let mut sum = 0.0;
    for (d, f) in facts.iter().zip(forecasts) {
        sum += ((*f)? - d).abs() / d.abs();
    }
    Some(sum * 100.0 / facts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSource {
    General { cluster: usize },
    Refined,
}

/// Per-series report entry. AFER fields are `None` when the model produced an
/// invalid one-step prediction on the training range (an infinite score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub id: String,
    pub cluster: usize,
    pub model_source: ModelSource,
    pub general_afer: Option<f64>,
    pub train_afer: Option<f64>,
    pub forecast_epochs: Vec<i64>,
    pub forecasts: Vec<Option<f64>>,
    pub invalid_step: Option<usize>,
    pub holdout: Vec<f64>,
    pub horizon_error: Option<f64>,
    /// Present when the general AFER exceeded the threshold and an individual fit ran.
    pub refit: Option<Refit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refit {
    pub train_afer: Option<f64>,
    /// Whether the refit strictly improved on the general model and replaced it.
    pub accepted: bool,
    pub model: FittedModelDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub config_digest: String,
    pub partition: PartitionDoc,
    pub models: Vec<ClusterModelDoc>,
    pub series: Vec<SeriesReport>,
}

impl ForecastReport {
    /// Series whose individual model replaced the general one.
    pub fn refined_count(&self) -> usize {
        self.series
            .iter()
            .filter(|s| s.model_source == ModelSource::Refined)
            .count()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Total MCSA runs behind a report: one per cluster plus one per series
/// that went through refinement.
pub fn count_model_fits(report: &ForecastReport) -> usize {
    report.models.len() + report.series.iter().filter(|s| s.refit.is_some()).count()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Epochs of the `h` forecast steps: the holdout epochs where they exist,
/// extended by the last observed epoch spacing.
pub fn forecast_epochs(epochs: &[i64], train_len: usize, h: usize) -> Vec<i64> {
    let step = if epochs.len() >= 2 {
        (epochs[epochs.len() - 1] - epochs[epochs.len() - 2]).max(1)
    } else {
        1
    };
    let mut out: Vec<i64> = epochs[train_len..].iter().copied().take(h).collect();
    let mut last = *out.last().unwrap_or(&epochs[train_len - 1]);
    while out.len() < h {
        last += step;
        out.push(last);
    }
    out
}

/// Scores every series under its cluster model, refits those above the
/// threshold from a population seeded by the general antibody, and assembles
/// the report. A refit replaces the general model only on strict improvement.
pub fn refine(
    ds: &Dataset,
    general: &GeneralStage,
    cfg: &PipelineConfig,
) -> Result<ForecastReport> {
    let digest = cfg.digest();
    let prepared = &general.prepared;
    let train_len = prepared.train.n();
    let train_range = general.train_range();
    let epochs = forecast_epochs(ds.epochs(), train_len, cfg.horizon);

    let series = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let ts = &ds.series()[i];
            let r = general.partition.cluster_of(i);
            let cm = &general.models[r];
            let norm = prepared.params.get(&ts.id)?;
            let own = &prepared.normalized.series()[i].values;
            let general_afer =
                series_afer(own, &cm.model, cm.shift).map_err(|e| e.in_stage("refine", &ts.id))?;

            let mut chosen = &cm.model;
            let mut source = ModelSource::General { cluster: r };
            let mut train_afer = general_afer;
            let mut refit = None;
            let refit_model;
            if general_afer > cfg.refine_threshold {
                let mcsa = McsaConfig {
                    seed: rng::derive_seed(cfg.mcsa.seed, &[SEED_REFINE, i as u64]),
                    ..cfg.mcsa.clone()
                };
                let shifted: Vec<f64> = own.iter().map(|v| v + cm.shift).collect();
                let seeds = seeded_population(&cm.model.antibody, &mcsa);
                refit_model = mcsa_run_seeded(&shifted, &mcsa, &seeds)
                    .map_err(|e| e.in_stage("refine", &ts.id))?;
                let accepted = refit_model.train_afer < general_afer;
                if accepted {
                    chosen = &refit_model;
                    source = ModelSource::Refined;
                    train_afer = refit_model.train_afer;
                }
                refit = Some(Refit {
                    train_afer: finite(refit_model.train_afer),
                    accepted,
                    model: refit_model.to_doc(&digest, Some(train_range)),
                });
            }

            let forecast =
                forecast_series(&ts.values[..train_len], chosen, cm.shift, norm, cfg.horizon)
                    .map_err(|e| e.in_stage("forecast", &ts.id))?;
            let holdout: Vec<f64> = ts.values[train_len..]
                .iter()
                .copied()
                .take(cfg.horizon)
                .collect();
            Ok(SeriesReport {
                id: ts.id.clone(),
                cluster: r,
                model_source: source,
                general_afer: finite(general_afer),
                train_afer: finite(train_afer),
                forecast_epochs: epochs.clone(),
                horizon_error: horizon_error(&holdout, &forecast.values),
                forecasts: forecast.values,
                invalid_step: forecast.invalid_step,
                holdout,
                refit,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ForecastReport {
        partition: PartitionDoc::new(&prepared.train, &general.partition, &general.clusters),
        models: general
            .models
            .iter()
            .map(|m| m.to_doc(&digest, train_range))
            .collect(),
        config_digest: digest,
        series,
    })
}

/// General stage followed by refinement.
pub fn run_pipeline(ds: &Dataset, cfg: &PipelineConfig) -> Result<(GeneralStage, ForecastReport)> {
    let general = fit_general_models(ds, cfg)?;
    let report = refine(ds, &general, cfg)?;
    Ok((general, report))
}

/// One plot row: fact where observed, forecast over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub epoch: i64,
    pub fact: Option<f64>,
    pub forecast: Option<f64>,
}

pub fn plot_rows(ds: &Dataset, entry: &SeriesReport) -> Result<Vec<PlotRow>> {
    let ts = ds
        .get(&entry.id)
        .ok_or_else(|| Error::UnknownSeries(entry.id.clone()))?;
    let mut rows: Vec<PlotRow> = ds
        .epochs()
        .iter()
        .zip(&ts.values)
        .map(|(&epoch, &v)| PlotRow {
            epoch,
            fact: Some(v),
            forecast: None,
        })
        .collect();
    for (&epoch, &f) in entry.forecast_epochs.iter().zip(&entry.forecasts) {
        match rows.iter_mut().find(|r| r.epoch == epoch) {
            Some(row) => row.forecast = f,
            None => rows.push(PlotRow {
                epoch,
                fact: None,
                forecast: f,
            }),
        }
    }
    Ok(rows)
}

/// Writes `epoch,fact,forecast`; missing cells are empty.
pub fn write_plot_csv<W: std::io::Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("plot", e))?;
    Ok(())
}
