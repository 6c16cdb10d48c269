//! Village-level prediction of cumulative incidence from network
//! characteristics: z-scoring, pooled least squares, network-grouped
//! cross-validation and exhaustive predictor-subset search.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fcd::{truncate, TruncationParams};
use crate::graph::Graph;
use crate::metrics::{selected_characteristics, Characteristic};
use crate::rngcore::StreamKey;

const N_CHAR: usize = Characteristic::ALL.len();

/// One SIR run on one network. Characteristics are indexed by
/// [`Characteristic::index`]; `NaN` marks a value that was not computed.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    /// Percentage, 0 to 100.
    pub incidence: f64,
    pub characteristics: [f64; N_CHAR],
    pub network_id: String,
    pub village_id: String,
}

/// A row as produced by measurement, where any characteristic may be
/// undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRow {
    pub incidence: f64,
    pub characteristics: [Option<f64>; N_CHAR],
    pub network_id: String,
    pub village_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Standardization {
    pub means: [f64; N_CHAR],
    pub sds: [f64; N_CHAR],
}

impl Standardization {
    /// Coefficients on the raw scale from coefficients fitted on z-scores.
    pub fn unstandardize(&self, predictors: &[Characteristic], coefficients: &[f64]) -> Vec<f64> {
        let mut out = coefficients.to_vec();
        for (i, c) in predictors.iter().enumerate() {
            let j = c.index();
            out[i + 1] = coefficients[i + 1] / self.sds[j];
            out[0] -= coefficients[i + 1] * self.means[j] / self.sds[j];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionDataset {
    pub rows: Vec<DatasetRow>,
    /// Rows dropped because a required characteristic was undefined.
    pub excluded_rows: usize,
    pub standardization: Option<Standardization>,
}

impl RegressionDataset {
    pub fn new(rows: Vec<DatasetRow>) -> Result<Self> {
        for r in &rows {
            check_incidence(r.incidence)?;
        }
        Ok(RegressionDataset {
            rows,
            excluded_rows: 0,
            standardization: None,
        })
    }

    /// Keep rows where every `required` characteristic is defined; other
    /// undefined values become `NaN`.
    pub fn from_partial(rows: Vec<PartialRow>, required: &[Characteristic]) -> Result<Self> {
        let mut kept = Vec::with_capacity(rows.len());
        let mut excluded = 0;
        for r in rows {
            check_incidence(r.incidence)?;
            if required.iter().any(|c| r.characteristics[c.index()].is_none()) {
                excluded += 1;
                continue;
            }
            kept.push(DatasetRow {
                incidence: r.incidence,
                characteristics: r.characteristics.map(|x| x.unwrap_or(f64::NAN)),
                network_id: r.network_id,
                village_id: r.village_id,
            });
        }
        Ok(RegressionDataset {
            rows: kept,
            excluded_rows: excluded,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// A characteristic is available when every row carries a finite value.
    pub fn is_available(&self, c: Characteristic) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.characteristics[c.index()].is_finite())
    }

    pub fn network_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.rows.iter().map(|r| r.network_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub const CSV_HEADER: [&'static str; 10] = [
        "incidence",
        "density",
        "size",
        "mean_degree",
        "sd_degree",
        "assortativity",
        "lcc_fraction",
        "mean_betweenness",
        "network_id",
        "village_id",
    ];

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            let mut rec = Vec::with_capacity(10);
            rec.push(r.incidence.to_string());
            for x in r.characteristics {
                rec.push(if x.is_finite() { x.to_string() } else { "NA".into() });
            }
            rec.push(r.network_id.clone());
            rec.push(r.village_id.clone());
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Read the CSV layout of [`Self::write_csv`]. Rows with `NA` in any
    /// characteristic are excluded and counted.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("dataset is missing column {name:?}")))
        };
        let incidence_col = col("incidence")?;
        let char_cols: Vec<usize> = Characteristic::ALL
            .iter()
            .map(|c| col(c.name()))
            .collect::<Result<_>>()?;
        let network_col = col("network_id")?;
        let village_col = col("village_id")?;
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let number = |i: usize| -> Result<Option<f64>> {
                let field = rec.get(i).unwrap_or("").trim();
                if field.eq_ignore_ascii_case("na") || field.is_empty() {
                    return Ok(None);
                }
                field.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                    path: "<dataset>".into(),
                    line: line + 2,
                    message: format!("not a number: {field:?}"),
                })
            };
            let incidence = number(incidence_col)?.ok_or_else(|| Error::Parse {
                path: "<dataset>".into(),
                line: line + 2,
                message: "missing incidence".into(),
            })?;
            let mut characteristics = [None; N_CHAR];
            for (slot, &i) in characteristics.iter_mut().zip(&char_cols) {
                *slot = number(i)?;
            }
            rows.push(PartialRow {
                incidence,
                characteristics,
                network_id: rec.get(network_col).unwrap_or("").to_string(),
                village_id: rec.get(village_col).unwrap_or("").to_string(),
            });
        }
        Self::from_partial(rows, &Characteristic::ALL)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn check_incidence(x: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("incidence {x} outside [0, 100]")));
    }
    Ok(())
}

/// Z-score every available characteristic with the pooled mean and
/// population SD over all rows.
pub fn standardize(ds: &RegressionDataset) -> Result<RegressionDataset> {
    let columns: Vec<Characteristic> = Characteristic::ALL
        .into_iter()
        .filter(|&c| ds.is_available(c))
        .collect();
    standardize_columns(ds, &columns)
}

/// Z-score only `columns`; the others keep their values and get `NaN` stats.
pub fn standardize_columns(ds: &RegressionDataset, columns: &[Characteristic]) -> Result<RegressionDataset> {
    if ds.rows.is_empty() {
        return Err(Error::InvalidParameter("cannot standardize an empty dataset".into()));
    }
    let n = ds.rows.len() as f64;
    let mut stats = Standardization {
        means: [f64::NAN; N_CHAR],
        sds: [f64::NAN; N_CHAR],
    };
    for &c in columns {
        let j = c.index();
        let mean = ds.rows.iter().map(|r| r.characteristics[j]).sum::<f64>() / n;
        let var = ds
            .rows
            .iter()
            .map(|r| (r.characteristics[j] - mean).powi(2))
            .sum::<f64>()
            / n;
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!("characteristic {c} is not available")));
        }
        if !(var > 0.0) {
            return Err(Error::ZeroVariance(c.name()));
        }
        stats.means[j] = mean;
        stats.sds[j] = var.sqrt();
    }
    let rows = ds
        .rows
        .iter()
        .map(|r| {
            let mut out = r.clone();
            for &c in columns {
                let j = c.index();
                out.characteristics[j] = (r.characteristics[j] - stats.means[j]) / stats.sds[j];
            }
            out
        })
        .collect();
    Ok(RegressionDataset {
        rows,
        excluded_rows: ds.excluded_rows,
        standardization: Some(stats),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub predictors: Vec<Characteristic>,
    /// Intercept first, then one coefficient per predictor in order.
    pub coefficients: Vec<f64>,
    pub rss: f64,
    pub aic: f64,
    /// Set by [`cv_rmse`]-aware callers such as [`subset_search`].
    pub cv_rmse: Option<f64>,
    pub n_rows: usize,
}

impl ModelFit {
    pub fn predict(&self, characteristics: &[f64; N_CHAR]) -> f64 {
        self.coefficients[0]
            + self
                .predictors
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(c, b)| b * characteristics[c.index()])
                .sum::<f64>()
    }

    pub fn includes(&self, c: Characteristic) -> bool {
        self.predictors.contains(&c)
    }
}

/// `n ln(rss / n) + 2 (p + 2)`: Gaussian likelihood up to a constant shared
/// by all models on the same rows, counting intercept and variance.
pub fn aic(n_rows: usize, rss: f64, n_predictors: usize) -> f64 {
    let n = n_rows as f64;
    n * (rss / n).ln() + 2.0 * (n_predictors as f64 + 2.0)
}

fn canonical(predictors: &[Characteristic]) -> Vec<Characteristic> {
    let mut p = predictors.to_vec();
    p.sort();
    p.dedup();
    p
}

fn design<'a>(rows: impl Iterator<Item = &'a DatasetRow>, predictors: &[Characteristic]) -> (DMatrix<f64>, DVector<f64>) {
    let rows: Vec<&DatasetRow> = rows.collect();
    let p = predictors.len() + 1;
    let x = DMatrix::from_fn(rows.len(), p, |i, j| {
        if j == 0 {
            1.0
        } else {
            rows[i].characteristics[predictors[j - 1].index()]
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.incidence));
    (x, y)
}

/// Least squares through a Householder QR; a near-zero diagonal entry of
/// `R` means the design is rank deficient.
fn least_squares(x: DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let p = x.ncols();
    let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("design matrix has undefined values".into()));
    }
    let qr = x.qr();
    let r = qr.r();
    for i in 0..p {
        if r[(i, i)].abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(format!("column {i} of the design is collinear")));
        }
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    r.solve_upper_triangular(&head)
        .ok_or_else(|| Error::RankDeficient("singular triangular factor".into()))
}

pub fn fit_ols(ds: &RegressionDataset, predictors: &[Characteristic]) -> Result<ModelFit> {
    let predictors = canonical(predictors);
    fit_rows(&ds.rows.iter().collect::<Vec<_>>(), &predictors)
}

fn fit_rows(rows: &[&DatasetRow], predictors: &[Characteristic]) -> Result<ModelFit> {
    let n = rows.len();
    if n <= predictors.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "{n} rows cannot fit {} predictors and an intercept",
            predictors.len()
        )));
    }
    let (x, y) = design(rows.iter().copied(), predictors);
    let beta = least_squares(x.clone(), &y)?;
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    Ok(ModelFit {
        predictors: predictors.to_vec(),
        coefficients: beta.iter().copied().collect(),
        rss,
        aic: aic(n, rss, predictors.len()),
        cv_rmse: None,
        n_rows: n,
    })
}

/// Fold of every row: distinct network ids are sorted, shuffled with
/// `seed`, and dealt round-robin into `k_folds` groups.
pub fn fold_assignment(ds: &RegressionDataset, k_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if k_folds < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least 2 folds".into()));
    }
    let mut ids = ds.network_ids();
    if ids.len() < k_folds {
        return Err(Error::InvalidParameter(format!(
            "{} networks cannot fill {k_folds} folds",
            ids.len()
        )));
    }
    StreamKey::new(seed).with_str("purpose", "cv-folds").stream().shuffle(&mut ids);
    let fold_of: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i % k_folds)).collect();
    Ok(ds.rows.iter().map(|r| fold_of[r.network_id.as_str()]).collect())
}

/// Root mean squared out-of-fold prediction error, pooled over all rows.
pub fn cv_rmse(ds: &RegressionDataset, predictors: &[Characteristic], k_folds: usize, seed: u64) -> Result<f64> {
    let folds = fold_assignment(ds, k_folds, seed)?;
    cv_rmse_with_folds(ds, &canonical(predictors), &folds, k_folds)
}

fn cv_rmse_with_folds(ds: &RegressionDataset, predictors: &[Characteristic], folds: &[usize], k_folds: usize) -> Result<f64> {
    let mut sse = 0.0;
    for k in 0..k_folds {
        let (test, train): (Vec<_>, Vec<_>) = ds.rows.iter().zip(folds).partition(|(_, &f)| f == k);
        if test.is_empty() {
            return Err(Error::EmptyFold(k));
        }
        let train: Vec<&DatasetRow> = train.into_iter().map(|(r, _)| r).collect();
        let fit = fit_rows(&train, predictors)?;
        sse += test
            .iter()
            .map(|(r, _)| (r.incidence - fit.predict(&r.characteristics)).powi(2))
            .sum::<f64>();
    }
    Ok((sse / ds.rows.len() as f64).sqrt())
}

/// The empty model, every subset of size `1..=max_subset_size`, and the full
/// model, each fitted and cross-validated, sorted by `cv_rmse`.
pub fn subset_search(ds: &RegressionDataset, max_subset_size: usize, k_folds: usize, seed: u64) -> Result<Vec<ModelFit>> {
    subset_search_over(ds, &Characteristic::ALL, max_subset_size, k_folds, seed)
}

/// As [`subset_search`], drawing predictors from `candidates` only; the
/// full model is the one using every candidate. Rank-deficient models are
/// dropped.
pub fn subset_search_over(
    ds: &RegressionDataset,
    candidates: &[Characteristic],
    max_subset_size: usize,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<ModelFit>> {
    let mut candidates = candidates.to_vec();
    candidates.sort();
    candidates.dedup();
    let p = candidates.len();
    if max_subset_size > p {
        return Err(Error::InvalidParameter(format!(
            "subset size {max_subset_size} exceeds the {p} candidate characteristics"
        )));
    }
    let mut masks: Vec<u32> = (0..1u32 << p)
        .filter(|m| m.count_ones() as usize <= max_subset_size)
        .collect();
    let full = (1u32 << p) - 1;
    if !masks.contains(&full) {
        masks.push(full);
    }
    let folds = fold_assignment(ds, k_folds, seed)?;
    let mut fits: Vec<(u32, ModelFit)> = masks
        .par_iter()
        .map(|&mask| {
            let predictors: Vec<Characteristic> = candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            let fitted = fit_ols(ds, &predictors).and_then(|mut fit| {
                fit.cv_rmse = Some(cv_rmse_with_folds(ds, &predictors, &folds, k_folds)?);
                Ok(fit)
            });
            match fitted {
                Ok(fit) => Ok(Some((mask, fit))),
                Err(Error::RankDeficient(_)) if mask != 0 => {
                    warn!("model {predictors:?} is rank deficient and left out");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    fits.sort_by(|a, b| {
        a.1.cv_rmse
            .unwrap()
            .total_cmp(&b.1.cv_rmse.unwrap())
            .then(a.1.predictors.len().cmp(&b.1.predictors.len()))
            .then(a.0.cmp(&b.0))
    });
    Ok(fits.into_iter().map(|(_, f)| f).collect())
}

/// One row per model: a flag column per characteristic, then
/// RMSE, AIC and AIC change against the full model.
pub fn write_subset_table<W: Write>(fits: &[ModelFit], w: W) -> Result<()> {
    let full_aic = fits
        .iter()
        .max_by_key(|f| f.predictors.len())
        .map(|f| f.aic);
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = vec!["model"];
    header.extend(Characteristic::ALL.iter().map(|c| c.name()));
    header.extend(["cv_rmse", "aic", "aic_change"]);
    out.write_record(&header)?;
    for (i, f) in fits.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(Characteristic::ALL.iter().map(|&c| if f.includes(c) { "X".into() } else { String::new() }));
        rec.push(f.cv_rmse.map_or_else(String::new, |x| format!("{x:.6}")));
        rec.push(format!("{:.4}", f.aic));
        rec.push(full_aic.map_or_else(String::new, |a| format!("{:.4}", f.aic - a)));
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One network of a generated ensemble and its SIR outcomes.
#[derive(Debug, Clone)]
pub struct EnsembleNetwork {
    pub network_id: String,
    pub village_id: String,
    pub graph: Graph,
    /// Incidence per SIR run, in percent; run `i` of every network forms
    /// replicate `i`.
    pub incidences: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SweepLevel {
    /// Intercept-only model.
    Empty,
    Truncated(usize),
    Full,
}

impl fmt::Display for SweepLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepLevel::Empty => f.write_str("Empty"),
            SweepLevel::Truncated(k) => write!(f, "K={k}"),
            SweepLevel::Full => f.write_str("Full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub level: SweepLevel,
    /// Fit and grouped CV over all rows.
    pub fit: ModelFit,
    pub excluded_rows: usize,
    /// Mean and standard error, across SIR replicates, of the CV RMSE of a
    /// fit on one row per network.
    pub replicate_rmse: Option<(f64, f64)>,
    pub replicate_aic: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub predictors: Vec<Characteristic>,
    pub k_folds: usize,
    pub seed: u64,
    /// Also fit each SIR replicate separately.
    pub per_replicate: bool,
}

/// Predict full-network incidence from characteristics measured on the
/// full network and on each truncation level; one truncation per network
/// and level, keyed by the seed, network position and `K`.
pub fn fcd_prediction_sweep(ensemble: &[EnsembleNetwork], config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let predictors = canonical(&config.predictors);
    let mut levels = vec![SweepLevel::Empty];
    levels.extend(config.k_values.iter().map(|&k| SweepLevel::Truncated(k)));
    levels.push(SweepLevel::Full);

    levels
        .iter()
        .map(|&level| {
            let used: &[Characteristic] = if level == SweepLevel::Empty { &[] } else { &predictors };
            let measured: Vec<[Option<f64>; N_CHAR]> = ensemble
                .par_iter()
                .enumerate()
                .map(|(i, net)| match level {
                    SweepLevel::Empty => Ok([None; N_CHAR]),
                    SweepLevel::Full => selected_characteristics(&net.graph, used),
                    SweepLevel::Truncated(k) => {
                        let seed = StreamKey::new(config.seed)
                            .with("network", i as u64)
                            .with("k", k as u64)
                            .seed();
                        selected_characteristics(&truncate(&net.graph, TruncationParams { k, rng_seed: seed }), used)
                    }
                })
                .collect::<Result<_>>()?;
            let rows: Vec<PartialRow> = ensemble
                .iter()
                .zip(&measured)
                .flat_map(|(net, chars)| {
                    net.incidences.iter().map(move |&incidence| PartialRow {
                        incidence,
                        characteristics: *chars,
                        network_id: net.network_id.clone(),
                        village_id: net.village_id.clone(),
                    })
                })
                .collect();
            let ds = standardize_columns(&RegressionDataset::from_partial(rows, used)?, used)?;
            let mut fit = fit_ols(&ds, used)?;
            fit.cv_rmse = Some(cv_rmse(&ds, used, config.k_folds, config.seed)?);
            let (replicate_rmse, replicate_aic) = if config.per_replicate {
                let (r, a) = replicate_summary(ensemble, &measured, used, config)?;
                (Some(r), Some(a))
            } else {
                (None, None)
            };
            Ok(SweepRow {
                level,
                fit,
                excluded_rows: ds.excluded_rows,
                replicate_rmse,
                replicate_aic,
            })
        })
        .collect()
}

fn replicate_summary(
    ensemble: &[EnsembleNetwork],
    measured: &[[Option<f64>; N_CHAR]],
    used: &[Characteristic],
    config: &SweepConfig,
) -> Result<((f64, f64), (f64, f64))> {
    let n_reps = ensemble.iter().map(|n| n.incidences.len()).min().unwrap_or(0);
    if n_reps == 0 {
        return Err(Error::InvalidParameter("ensemble has no SIR runs".into()));
    }
    let per_rep: Vec<(f64, f64)> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let rows = ensemble
                .iter()
                .zip(measured)
                .map(|(net, chars)| PartialRow {
                    incidence: net.incidences[rep],
                    characteristics: *chars,
                    network_id: net.network_id.clone(),
                    village_id: net.village_id.clone(),
                })
                .collect();
            let ds = standardize_columns(&RegressionDataset::from_partial(rows, used)?, used)?;
            let fit = fit_ols(&ds, used)?;
            Ok((cv_rmse(&ds, used, config.k_folds, config.seed)?, fit.aic))
        })
        .collect::<Result<_>>()?;
    let summary = |xs: Vec<f64>| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, sd / n.sqrt())
    };
    Ok((
        summary(per_rep.iter().map(|p| p.0).collect()),
        summary(per_rep.iter().map(|p| p.1).collect()),
    ))
}

/// One row per sweep level: fit quality of the pooled and per-replicate models.
pub fn write_sweep_table<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model",
        "cv_rmse",
        "aic",
        "replicate_rmse_mean",
        "replicate_rmse_se",
        "replicate_aic_mean",
        "replicate_aic_se",
        "excluded_rows",
    ])?;
    let pair = |p: Option<(f64, f64)>, i: usize| {
        p.map_or_else(String::new, |p| format!("{:.6}", if i == 0 { p.0 } else { p.1 }))
    };
    for r in rows {
        out.write_record([
            r.level.to_string(),
            r.fit.cv_rmse.map_or_else(String::new, |x| format!("{x:.6}")),
            format!("{:.4}", r.fit.aic),
            pair(r.replicate_rmse, 0),
            pair(r.replicate_rmse, 1),
            pair(r.replicate_aic, 0),
            pair(r.replicate_aic, 1),
            r.excluded_rows.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
