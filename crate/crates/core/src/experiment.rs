//! End-to-end experiments: vaccination campaigns over villages, and the
//! village-level pipeline from degree mixing matrices to regression tables.
//!
//! Every random draw comes from a stream keyed by the master seed, the
//! village id, the strategy variant and the run index, so results do not
//! depend on scheduling or worker count.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcd::{truncate, TruncationParams};
use crate::graph::{load_villages, Graph, Village};
use crate::metrics::{betweenness_all, village_characteristics, Characteristic, DegreeMixingMatrix};
use crate::netgen::{
    convergence_check, sample_ensemble, ConvergenceReport, ConvergenceTolerances, ConvergenceVerdict, McmcParams,
    Proposal, DEFAULT_BURN_IN, DEFAULT_CONCENTRATION, DEFAULT_EDGE_PENALTY, DEFAULT_THINNING,
};
use crate::regress::{
    fcd_prediction_sweep, standardize_columns, subset_search_over, write_subset_table, write_sweep_table, EnsembleNetwork,
    ModelFit, PartialRow, RegressionDataset, SweepConfig, SweepRow,
};
use crate::rngcore::StreamKey;
use crate::sir::{run_sir, SirParams};
use crate::vaccinate::{
    quota, select_high_degree, select_none, select_nomination, select_random, select_top_by_degree,
    select_top_by_scores, Strategy, VaccinationPlan,
};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "VAXNET_THREADS";

/// A pool sized by `VAXNET_THREADS`, or rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={value:?} is not a thread count")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// A strategy with its HighDegree cutoff or observation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fcd_k: Option<usize>,
}

impl StrategySpec {
    pub fn new(strategy: Strategy) -> Self {
        StrategySpec {
            strategy,
            cutoff: None,
            fcd_k: None,
        }
    }

    pub fn high_degree(cutoff: usize) -> Self {
        StrategySpec {
            cutoff: Some(cutoff),
            ..Self::new(Strategy::HighDegree)
        }
    }

    pub fn observed(strategy: Strategy, fcd_k: Option<usize>) -> Self {
        StrategySpec {
            fcd_k,
            ..Self::new(strategy)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::HighDegree if self.cutoff.is_none() => Err(Error::Config("high-degree needs a cutoff".into())),
            s if s != Strategy::HighDegree && self.cutoff.is_some() => {
                Err(Error::Config(format!("{s} takes no cutoff")))
            }
            s if !s.uses_observed_network() && self.fcd_k.is_some() => {
                Err(Error::Config(format!("{s} does not use an observed network")))
            }
            _ => Ok(()),
        }
    }

    /// Cutoff or observation level as written in output tables; empty when
    /// neither applies, `full` for whole-network observation.
    pub fn param(&self) -> String {
        match (self.cutoff, self.fcd_k, self.strategy.uses_observed_network()) {
            (Some(c), _, _) => c.to_string(),
            (_, Some(k), _) => k.to_string(),
            (_, None, true) => "full".into(),
            _ => String::new(),
        }
    }

    pub fn label(&self) -> String {
        let p = self.param();
        if p.is_empty() {
            self.strategy.to_string()
        } else {
            format!("{}:{p}", self.strategy)
        }
    }
}

fn default_threshold() -> u8 {
    1
}

fn default_coverage() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub villages: Vec<PathBuf>,
    #[serde(default = "default_threshold")]
    pub tie_threshold: u8,
    pub strategies: Vec<StrategySpec>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default)]
    pub sir: SirParams,
    pub runs_per_cell: usize,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// One truncation per (village, K) instead of a fresh one per run.
    #[serde(default)]
    pub freeze_truncation: bool,
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for v in &mut self.villages {
            if v.is_relative() {
                *v = base.join(&*v);
            }
        }
        if let Some(out) = &mut self.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
    }

    pub fn settings(&self) -> CampaignSettings {
        CampaignSettings {
            strategies: self.strategies.clone(),
            coverage: self.coverage,
            sir: self.sir,
            runs_per_cell: self.runs_per_cell,
            master_seed: self.master_seed,
            freeze_truncation: self.freeze_truncation,
        }
    }
}

/// Campaign parameters independent of where the villages come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSettings {
    pub strategies: Vec<StrategySpec>,
    pub coverage: f64,
    pub sir: SirParams,
    pub runs_per_cell: usize,
    pub master_seed: u64,
    pub freeze_truncation: bool,
}

impl CampaignSettings {
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be at least 1".into()));
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(Error::Config(format!("coverage {} outside (0, 1)", self.coverage)));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies configured".into()));
        }
        self.sir.validate()?;
        for s in &self.strategies {
            s.validate()?;
        }
        Ok(())
    }

    fn check_village(&self, v: &Village) -> Result<()> {
        let n = v.graph.n_nodes();
        let q = quota(self.coverage, n);
        let seeds = self.sir.seed_count(n);
        let needs_vaccinees = self.strategies.iter().any(|s| s.strategy != Strategy::None);
        if needs_vaccinees && q == 0 {
            return Err(Error::GraphTooSmall(format!(
                "village {}: coverage {} of {n} nodes selects nobody",
                v.id, self.coverage
            )));
        }
        if seeds == 0 || seeds + q > n {
            return Err(Error::GraphTooSmall(format!(
                "village {}: {n} nodes cannot hold {seeds} seeds and {q} vaccinees",
                v.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub village_id: String,
    pub strategy: Strategy,
    pub param: String,
    pub run: usize,
    /// Fraction of the village ever infected.
    pub incidence: f64,
    pub n_seeds: usize,
    pub seed_caused: usize,
    pub duration: usize,
    pub n_vaccinated: usize,
    pub interviews: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub param: String,
    pub n_villages: usize,
    pub runs_per_village: usize,
    /// Percentages.
    pub mean_incidence: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// False when a single village leaves the SD undefined; the interval
    /// then collapses to the point estimate.
    pub ci_defined: bool,
    pub min_village_mean: f64,
    pub max_village_mean: f64,
}

impl SummaryRow {
    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl CampaignResult {
    pub fn cell(&self, spec: &StrategySpec) -> Option<&SummaryRow> {
        let param = spec.param();
        self.summary
            .iter()
            .find(|r| r.strategy == spec.strategy && r.param == param)
    }
}

/// Load the villages named in `config`, run every cell and write outputs
/// when an output directory is configured.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    let settings = config.settings();
    settings.validate()?;
    let villages = load_villages(&config.villages, config.tie_threshold)?;
    let result = run_campaign_on(&villages, &settings)?;
    if let Some(dir) = &config.output_dir {
        write_campaign_outputs(dir, config, &result)?;
    }
    Ok(result)
}

struct PreparedVillage<'a> {
    village: &'a Village,
    betweenness: Option<Vec<f64>>,
}

fn run_key(master: u64, village: &str, spec: &StrategySpec, run: usize) -> StreamKey {
    StreamKey::new(master)
        .with_str("village", village)
        .with_str("strategy", &spec.label())
        .with("run", run as u64)
}

/// Run every (village, strategy, run) cell on in-memory villages. Villages
/// are checked before any simulation starts.
pub fn run_campaign_on(villages: &[Village], settings: &CampaignSettings) -> Result<CampaignResult> {
    settings.validate()?;
    for v in villages {
        settings.check_village(v)?;
    }
    let needs_betweenness = settings
        .strategies
        .iter()
        .any(|s| s.strategy == Strategy::MostCentral && s.fcd_k.is_none());
    let prepared: Vec<PreparedVillage> = villages
        .par_iter()
        .map(|village| PreparedVillage {
            village,
            betweenness: needs_betweenness.then(|| betweenness_all(&village.graph)),
        })
        .collect();
    let frozen: BTreeMap<(usize, usize), (Graph, Option<Vec<f64>>)> = if settings.freeze_truncation {
        let mut wanted: Vec<(usize, usize, bool)> = Vec::new();
        for (vi, _) in villages.iter().enumerate() {
            for s in &settings.strategies {
                if let Some(k) = s.fcd_k {
                    wanted.push((vi, k, s.strategy == Strategy::MostCentral));
                }
            }
        }
        wanted
            .par_iter()
            .map(|&(vi, k, scores)| {
                let v = &villages[vi];
                let seed = StreamKey::new(settings.master_seed)
                    .with_str("village", &v.id)
                    .with("frozen-k", k as u64)
                    .seed();
                let g = truncate(&v.graph, TruncationParams { k, rng_seed: seed });
                let b = scores.then(|| betweenness_all(&g));
                ((vi, k), (g, b))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(BTreeMap::new(), |mut acc, (key, (g, b))| {
                let entry: &mut (Graph, Option<Vec<f64>>) = acc.entry(key).or_insert((g, None));
                if b.is_some() {
                    entry.1 = b;
                }
                acc
            })
    } else {
        BTreeMap::new()
    };

    let cells: Vec<(usize, usize, usize)> = (0..villages.len())
        .flat_map(|v| {
            (0..settings.strategies.len()).flat_map(move |s| (0..settings.runs_per_cell).map(move |r| (v, s, r)))
        })
        .collect();
    info!(
        "campaign: {} villages x {} strategies x {} runs",
        villages.len(),
        settings.strategies.len(),
        settings.runs_per_cell
    );
    let runs: Vec<RunRecord> = cells
        .par_iter()
        .map(|&(vi, si, run)| run_cell(&prepared[vi], vi, &settings.strategies[si], run, settings, &frozen))
        .collect::<Result<_>>()?;
    let summary = summarize(&runs);
    Ok(CampaignResult { runs, summary })
}

fn run_cell(
    prepared: &PreparedVillage,
    village_index: usize,
    spec: &StrategySpec,
    run: usize,
    settings: &CampaignSettings,
    frozen: &BTreeMap<(usize, usize), (Graph, Option<Vec<f64>>)>,
) -> Result<RunRecord> {
    let village = prepared.village;
    let g = &village.graph;
    let key = run_key(settings.master_seed, &village.id, spec, run);
    let mut rng = key.with_str("phase", "select").stream();
    let coverage = settings.coverage;
    let plan: VaccinationPlan = match spec.strategy {
        Strategy::None => select_none(g),
        Strategy::Random => select_random(g, coverage, &mut rng)?,
        Strategy::Nomination => select_nomination(g, coverage, &mut rng)?,
        Strategy::HighDegree => select_high_degree(g, coverage, spec.cutoff.unwrap_or(0), &mut rng)?,
        Strategy::HighestDegree | Strategy::MostCentral => {
            let redrawn;
            let (observed, cached_scores): (&Graph, Option<&Vec<f64>>) = match spec.fcd_k {
                None => (g, prepared.betweenness.as_ref()),
                Some(k) => match frozen.get(&(village_index, k)) {
                    Some((t, scores)) => (t, scores.as_ref()),
                    None => {
                        let seed = key.with_str("phase", "observe").seed();
                        redrawn = truncate(g, TruncationParams { k, rng_seed: seed });
                        (&redrawn, None)
                    }
                },
            };
            if spec.strategy == Strategy::HighestDegree {
                select_top_by_degree(observed, coverage, spec.fcd_k, &mut rng)?
            } else {
                let computed;
                let scores = match cached_scores {
                    Some(s) => s,
                    None => {
                        computed = betweenness_all(observed);
                        &computed
                    }
                };
                select_top_by_scores(observed, scores, coverage, spec.fcd_k, &mut rng)?
            }
        }
    };
    let sir = settings.sir.with_seed(key.with_str("phase", "sir").seed());
    let outcome = run_sir(g, &sir, &plan.selected)?;
    Ok(RunRecord {
        village_id: village.id.clone(),
        strategy: spec.strategy,
        param: spec.param(),
        run,
        incidence: outcome.cumulative_incidence,
        n_seeds: outcome.n_seeds,
        seed_caused: outcome.seed_caused_infections,
        duration: outcome.duration_steps,
        n_vaccinated: plan.selected.len(),
        interviews: plan.interviews_conducted,
    })
}

/// Per cell: each village's mean incidence over its runs, then the mean,
/// `1.96 SD / sqrt(villages)` interval and range of those village means.
/// Cells appear in order of first occurrence.
pub fn summarize(runs: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(Strategy, String)> = Vec::new();
    let mut cells: BTreeMap<(Strategy, String), BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in runs {
        let key = (r.strategy, r.param.clone());
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        let v = cells.entry(key).or_default().entry(r.village_id.clone()).or_insert((0.0, 0));
        v.0 += r.incidence;
        v.1 += 1;
    }
    order
        .into_iter()
        .map(|key| {
            let villages = &cells[&key];
            let means: Vec<f64> = villages.values().map(|(s, n)| 100.0 * s / *n as f64).collect();
            let k = means.len() as f64;
            let mean = means.iter().sum::<f64>() / k;
            let (half, defined) = if means.len() > 1 {
                let sd = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
                (1.96 * sd / k.sqrt(), true)
            } else {
                (0.0, false)
            };
            let runs_per_village = villages.values().map(|v| v.1).min().unwrap_or(0);
            SummaryRow {
                strategy: key.0,
                param: key.1,
                n_villages: means.len(),
                runs_per_village,
                mean_incidence: mean,
                ci_low: mean - half,
                ci_high: mean + half,
                ci_defined: defined,
                min_village_mean: means.iter().copied().fold(f64::INFINITY, f64::min),
                max_village_mean: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub const RUN_CSV_HEADER: [&str; 10] = [
    "village_id",
    "strategy",
    "param",
    "run",
    "incidence",
    "n_seeds",
    "seed_caused",
    "duration",
    "n_vaccinated",
    "interviews",
];

pub fn write_runs_csv<W: Write>(runs: &[RunRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RUN_CSV_HEADER)?;
    for r in runs {
        out.write_record([
            r.village_id.clone(),
            r.strategy.to_string(),
            r.param.clone(),
            r.run.to_string(),
            r.incidence.to_string(),
            r.n_seeds.to_string(),
            r.seed_caused.to_string(),
            r.duration.to_string(),
            r.n_vaccinated.to_string(),
            r.interviews.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "strategy",
        "param",
        "n_villages",
        "runs_per_village",
        "mean",
        "ci_low",
        "ci_high",
        "ci_defined",
        "min_village_mean",
        "max_village_mean",
    ])?;
    for r in rows {
        out.write_record([
            r.strategy.to_string(),
            r.param.clone(),
            r.n_villages.to_string(),
            r.runs_per_village.to_string(),
            format!("{:.4}", r.mean_incidence),
            format!("{:.4}", r.ci_low),
            format!("{:.4}", r.ci_high),
            r.ci_defined.to_string(),
            format!("{:.4}", r.min_village_mean),
            format!("{:.4}", r.max_village_mean),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_metadata<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    let body = toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join("metadata.toml");
    let text = format!("# vaxnet {}\n{body}", env!("CARGO_PKG_VERSION"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// `runs.csv`, `summary.csv` and `metadata.toml` in `dir`.
pub fn write_campaign_outputs(dir: &Path, config: &CampaignConfig, result: &CampaignResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_runs_csv(&result.runs, create_file(&dir.join("runs.csv"))?)?;
    write_summary_csv(&result.summary, create_file(&dir.join("summary.csv"))?)?;
    write_metadata(dir, config)
}

/// Sampler settings for the village pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSettings {
    pub burn_in: u64,
    pub thinning: u64,
    pub concentration: f64,
    pub edge_penalty: f64,
    pub proposal: Proposal,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            concentration: DEFAULT_CONCENTRATION,
            edge_penalty: DEFAULT_EDGE_PENALTY,
            proposal: Proposal::default(),
        }
    }
}

fn default_k_values() -> Vec<usize> {
    (1..=10).collect()
}

fn default_sweep_predictors() -> Vec<Characteristic> {
    vec![Characteristic::MeanDegree, Characteristic::SdDegree]
}

fn default_max_subset() -> usize {
    3
}

fn default_folds() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub villages: Vec<PathBuf>,
    #[serde(default = "default_threshold")]
    pub tie_threshold: u8,
    pub samples_per_village: usize,
    pub runs_per_sample: usize,
    #[serde(default)]
    pub sir: SirParams,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default = "default_sweep_predictors")]
    pub sweep_predictors: Vec<Characteristic>,
    #[serde(default = "default_max_subset")]
    pub max_subset_size: usize,
    #[serde(default = "default_folds")]
    pub k_folds: usize,
    #[serde(default = "default_true")]
    pub per_replicate: bool,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mcmc: McmcSettings,
    #[serde(default)]
    pub tolerances: ConvergenceTolerances,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for v in &mut config.villages {
            if v.is_relative() {
                *v = base.join(&*v);
            }
        }
        if let Some(out) = &mut config.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_village == 0 || self.runs_per_sample == 0 {
            return Err(Error::Config("samples_per_village and runs_per_sample must be at least 1".into()));
        }
        self.sir.validate()
    }
}

#[derive(Debug, Clone)]
pub struct VillageDiagnostics {
    pub village_id: String,
    pub n_nodes: usize,
    pub target_mean_degree: f64,
    pub verdict: ConvergenceVerdict,
    pub report: ConvergenceReport,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub villages: Vec<VillageDiagnostics>,
    /// Raw (unstandardized) rows; incidence in percent.
    pub dataset: RegressionDataset,
    pub subset_fits: Vec<ModelFit>,
    pub sweep: Vec<SweepRow>,
    /// Mean incidence (percent) over all rows of included villages.
    pub mean_incidence: f64,
}

impl PipelineResult {
    pub fn fit_for(&self, predictors: &[Characteristic]) -> Option<&ModelFit> {
        let mut wanted = predictors.to_vec();
        wanted.sort();
        self.subset_fits.iter().find(|f| f.predictors == wanted)
    }
}

pub fn run_village_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let villages = load_villages(&config.villages, config.tie_threshold)?;
    let result = run_village_pipeline_on(&villages, config)?;
    if let Some(dir) = &config.output_dir {
        write_pipeline_outputs(dir, config, &result)?;
    }
    Ok(result)
}

struct VillageEnsemble {
    diagnostics: VillageDiagnostics,
    networks: Vec<EnsembleNetwork>,
}

/// Village pipeline on in-memory villages; `config.villages` is ignored.
pub fn run_village_pipeline_on(villages: &[Village], config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let ensembles: Vec<VillageEnsemble> = villages
        .par_iter()
        .map(|v| village_ensemble(v, config))
        .collect::<Result<_>>()?;

    let mut diagnostics = Vec::new();
    let mut networks = Vec::new();
    for e in ensembles {
        if e.diagnostics.verdict.passed {
            networks.extend(e.networks);
        } else {
            warn!(
                "village {} excluded: {}",
                e.diagnostics.village_id,
                e.diagnostics.verdict.reasons.join("; ")
            );
        }
        diagnostics.push(e.diagnostics);
    }
    if networks.is_empty() {
        return Err(Error::InvalidParameter("no village passed the convergence check".into()));
    }

    let characteristics: Vec<[Option<f64>; 7]> = networks
        .par_iter()
        .map(|net| {
            let vc = village_characteristics(&net.graph)?;
            Ok(Characteristic::ALL.map(|c| vc.get(c)))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<PartialRow> = networks
        .iter()
        .zip(&characteristics)
        .flat_map(|(net, chars)| {
            net.incidences.iter().map(move |&incidence| PartialRow {
                incidence,
                characteristics: *chars,
                network_id: net.network_id.clone(),
                village_id: net.village_id.clone(),
            })
        })
        .collect();
    let dataset = RegressionDataset::from_partial(rows, &Characteristic::ALL)?;
    if dataset.excluded_rows > 0 {
        warn!("{} rows excluded for undefined characteristics", dataset.excluded_rows);
    }
    let mean_incidence = dataset.rows.iter().map(|r| r.incidence).sum::<f64>() / dataset.len() as f64;
    let candidates = usable_characteristics(&dataset);
    let subset_fits = subset_search_over(
        &standardize_columns(&dataset, &candidates)?,
        &candidates,
        config.max_subset_size.min(candidates.len()),
        config.k_folds,
        StreamKey::new(config.master_seed).with_str("purpose", "subset-cv").seed(),
    )?;
    let sweep = fcd_prediction_sweep(
        &networks,
        &SweepConfig {
            k_values: config.k_values.clone(),
            predictors: config.sweep_predictors.clone(),
            k_folds: config.k_folds,
            seed: StreamKey::new(config.master_seed).with_str("purpose", "fcd-sweep").seed(),
            per_replicate: config.per_replicate,
        },
    )?;
    Ok(PipelineResult {
        villages: diagnostics,
        dataset,
        subset_fits,
        sweep,
        mean_incidence,
    })
}

/// Characteristics that are defined and vary across the pooled rows.
fn usable_characteristics(ds: &RegressionDataset) -> Vec<Characteristic> {
    Characteristic::ALL
        .into_iter()
        .filter(|&c| {
            if !ds.is_available(c) {
                return false;
            }
            let first = ds.rows[0].characteristics[c.index()];
            let varies = ds.rows.iter().any(|r| r.characteristics[c.index()] != first);
            if !varies {
                warn!("{c} is constant across the ensemble and is left out of the subset search");
            }
            varies
        })
        .collect()
}

fn village_ensemble(v: &Village, config: &PipelineConfig) -> Result<VillageEnsemble> {
    let key = StreamKey::new(config.master_seed).with_str("village", &v.id);
    let n = v.graph.n_nodes();
    let target_mean_degree = 2.0 * v.graph.n_edges() as f64 / n as f64;
    let params = McmcParams {
        target: DegreeMixingMatrix::from_graph(&v.graph)?,
        n_nodes: n,
        target_mean_degree,
        burn_in: config.mcmc.burn_in,
        thinning: config.mcmc.thinning,
        concentration: config.mcmc.concentration,
        edge_penalty: config.mcmc.edge_penalty,
        proposal: config.mcmc.proposal,
        rng_seed: key.with_str("phase", "netgen").seed(),
    };
    let ensemble = sample_ensemble(&params, config.samples_per_village)?;
    let verdict = convergence_check(&ensemble.report, target_mean_degree, &config.tolerances);
    let networks = if verdict.passed {
        ensemble
            .samples
            .into_iter()
            .enumerate()
            .map(|(j, graph)| {
                let incidences = (0..config.runs_per_sample)
                    .map(|r| {
                        let seed = key.with("sample", j as u64).with("run", r as u64).seed();
                        run_sir(&graph, &config.sir.with_seed(seed), &[]).map(|o| 100.0 * o.cumulative_incidence)
                    })
                    .collect::<Result<_>>()?;
                Ok(EnsembleNetwork {
                    network_id: format!("{}/{j:04}", v.id),
                    village_id: v.id.clone(),
                    graph,
                    incidences,
                })
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    info!(
        "village {}: trailing DMM distance {:.3}, mean degree {:.2} (target {:.2})",
        v.id, verdict.trailing_dmm_distance, verdict.trailing_mean_degree, target_mean_degree
    );
    Ok(VillageEnsemble {
        diagnostics: VillageDiagnostics {
            village_id: v.id.clone(),
            n_nodes: n,
            target_mean_degree,
            verdict,
            report: ensemble.report,
        },
        networks,
    })
}

/// `dataset.csv`, `subset_models.csv`, `fcd_sweep.csv`, `villages.csv`,
/// one `convergence/<village>.csv` per village and `metadata.toml`.
pub fn write_pipeline_outputs(dir: &Path, config: &PipelineConfig, result: &PipelineResult) -> Result<()> {
    let conv_dir = dir.join("convergence");
    fs::create_dir_all(&conv_dir).map_err(|e| Error::io(&conv_dir, e))?;
    result.dataset.write_csv(create_file(&dir.join("dataset.csv"))?)?;
    write_subset_table(&result.subset_fits, create_file(&dir.join("subset_models.csv"))?)?;
    write_sweep_table(&result.sweep, create_file(&dir.join("fcd_sweep.csv"))?)?;
    let mut villages = csv::Writer::from_writer(create_file(&dir.join("villages.csv"))?);
    villages.write_record([
        "village_id",
        "n_nodes",
        "target_mean_degree",
        "trailing_mean_degree",
        "trailing_dmm_distance",
        "accepted_fraction",
        "included",
        "reasons",
    ])?;
    for v in &result.villages {
        villages.write_record([
            v.village_id.clone(),
            v.n_nodes.to_string(),
            format!("{:.4}", v.target_mean_degree),
            format!("{:.4}", v.verdict.trailing_mean_degree),
            format!("{:.4}", v.verdict.trailing_dmm_distance),
            format!("{:.4}", v.report.accepted_fraction),
            v.verdict.passed.to_string(),
            v.verdict.reasons.join("; "),
        ])?;
        v.report
            .write_csv(create_file(&conv_dir.join(format!("{}.csv", v.village_id)))?)?;
    }
    villages.flush().map_err(csv::Error::from)?;
    write_metadata(dir, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_village, VillageParams};

    fn small_villages(count: usize, n: usize) -> Vec<Village> {
        (0..count)
            .map(|i| Village {
                id: format!("village{i:02}"),
                graph: synth_village(
                    &VillageParams {
                        n_nodes: n + 10 * i,
                        ..VillageParams::default()
                    },
                    &StreamKey::new(40 + i as u64),
                )
                .unwrap(),
            })
            .collect()
    }

    fn settings(strategies: Vec<StrategySpec>, runs: usize) -> CampaignSettings {
        CampaignSettings {
            strategies,
            coverage: 0.1,
            sir: SirParams::default(),
            runs_per_cell: runs,
            master_seed: 7,
            freeze_truncation: false,
        }
    }

    #[test]
    fn spec_labels_and_validation() {
        assert_eq!(StrategySpec::high_degree(6).label(), "high-degree:6");
        assert_eq!(StrategySpec::observed(Strategy::MostCentral, None).label(), "top-betweenness:full");
        assert_eq!(StrategySpec::observed(Strategy::HighestDegree, Some(3)).param(), "3");
        assert_eq!(StrategySpec::new(Strategy::Random).param(), "");
        assert!(StrategySpec::new(Strategy::HighDegree).validate().is_err());
        assert!(StrategySpec::observed(Strategy::Random, Some(2)).validate().is_err());
        assert!(StrategySpec { cutoff: Some(2), ..StrategySpec::new(Strategy::Nomination) }.validate().is_err());
    }

    #[test]
    fn campaign_shapes_and_none_baseline() {
        let villages = small_villages(2, 120);
        let specs = vec![
            StrategySpec::new(Strategy::None),
            StrategySpec::new(Strategy::Random),
            StrategySpec::observed(Strategy::MostCentral, Some(2)),
        ];
        let result = run_campaign_on(&villages, &settings(specs.clone(), 5)).unwrap();
        assert_eq!(result.runs.len(), 2 * 3 * 5);
        assert_eq!(result.summary.len(), 3);
        for row in &result.summary {
            assert_eq!(row.n_villages, 2);
            assert_eq!(row.runs_per_village, 5);
            assert!(row.ci_low <= row.mean_incidence && row.mean_incidence <= row.ci_high);
        }
        let none: Vec<&RunRecord> = result.runs.iter().filter(|r| r.strategy == Strategy::None).collect();
        assert!(none.iter().all(|r| r.n_vaccinated == 0));
        let only_none = run_campaign_on(&villages, &settings(vec![specs[0]], 5)).unwrap();
        assert_eq!(only_none.summary[0], result.summary[0]);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let villages = small_villages(2, 100);
        let s = settings(
            vec![StrategySpec::new(Strategy::Nomination), StrategySpec::observed(Strategy::HighestDegree, Some(3))],
            4,
        );
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_campaign_on(&villages, &s)).unwrap();
        let b = three.install(|| run_campaign_on(&villages, &s)).unwrap();
        assert_eq!(a.runs, b.runs);
    }

    #[test]
    fn frozen_truncation_reuses_one_observation() {
        let villages = small_villages(1, 150);
        let mut s = settings(vec![StrategySpec::observed(Strategy::HighestDegree, Some(1))], 6);
        s.freeze_truncation = true;
        let frozen = run_campaign_on(&villages, &s).unwrap();
        s.freeze_truncation = false;
        let redrawn = run_campaign_on(&villages, &s).unwrap();
        assert_eq!(frozen.runs.len(), redrawn.runs.len());
        assert_ne!(frozen.runs, redrawn.runs);
    }

    #[test]
    fn summary_edge_cases() {
        let rec = |v: &str, x: f64| RunRecord {
            village_id: v.into(),
            strategy: Strategy::Random,
            param: String::new(),
            run: 0,
            incidence: x,
            n_seeds: 1,
            seed_caused: 0,
            duration: 1,
            n_vaccinated: 1,
            interviews: 1,
        };
        let single = summarize(&[rec("a", 0.3), rec("a", 0.5)]);
        assert!(!single[0].ci_defined);
        assert!((single[0].mean_incidence - 40.0).abs() < 1e-12);
        assert_eq!(single[0].ci_low, single[0].ci_high);
        let constant = summarize(&[rec("a", 0.25), rec("b", 0.25), rec("c", 0.25)]);
        assert!((constant[0].mean_incidence - 25.0).abs() < 1e-12);
        assert!((constant[0].ci_low - 25.0).abs() < 1e-12 && (constant[0].ci_high - 25.0).abs() < 1e-12);
        let spread = summarize(&[rec("a", 0.1), rec("b", 0.3)]);
        let sd = (2.0f64 * 100.0).sqrt();
        assert!((spread[0].ci_half_width() - 1.96 * sd / 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(spread[0].min_village_mean, 10.0);
        assert_eq!(spread[0].max_village_mean, 30.0);
    }

    #[test]
    fn undersized_village_fails_before_simulation() {
        let tiny = Village {
            id: "tiny".into(),
            graph: Graph::from_edges(4, &[(0, 1)]).unwrap(),
        };
        let err = run_campaign_on(&[tiny], &settings(vec![StrategySpec::new(Strategy::Random)], 1));
        assert!(matches!(err, Err(Error::GraphTooSmall(_))));
    }

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
            villages = ["a.txt", "b.txt"]
            runs_per_cell = 500
            master_seed = 42
            output_dir = "out"

            [[strategies]]
            strategy = "none"

            [[strategies]]
            strategy = "high-degree"
            cutoff = 6

            [[strategies]]
            strategy = "top-betweenness"
            fcd_k = 3

            [sir]
            beta = 0.25
            gamma = 0.1
            seed_fraction = 0.01
        "#;
        let c = CampaignConfig::from_toml(text).unwrap();
        assert_eq!(c.tie_threshold, 1);
        assert_eq!(c.coverage, 0.1);
        assert_eq!(c.strategies[1], StrategySpec::high_degree(6));
        assert_eq!(c.strategies[2].fcd_k, Some(3));
        assert!(c.settings().validate().is_ok());
        assert!(CampaignConfig::from_toml("villages = 3").is_err());
    }

    #[test]
    fn one_sample_pipeline_has_runs_per_sample_rows_per_village() {
        let villages = small_villages(16, 100);
        let config = PipelineConfig {
            villages: Vec::new(),
            tie_threshold: 1,
            samples_per_village: 1,
            runs_per_sample: 4,
            sir: SirParams::default(),
            k_values: vec![2],
            sweep_predictors: default_sweep_predictors(),
            max_subset_size: 1,
            k_folds: 4,
            per_replicate: false,
            master_seed: 3,
            output_dir: None,
            mcmc: McmcSettings {
                burn_in: 20_000,
                thinning: 100,
                ..McmcSettings::default()
            },
            tolerances: ConvergenceTolerances {
                dmm_distance: 2.0,
                ..ConvergenceTolerances::default()
            },
        };
        let result = run_village_pipeline_on(&villages, &config).unwrap();
        for v in &villages {
            let rows = result.dataset.rows.iter().filter(|r| r.village_id == v.id).count();
            assert_eq!(rows + result.dataset.excluded_rows, 4, "{}", v.id);
        }
        let p = result.subset_fits.iter().map(|f| f.predictors.len()).max().unwrap();
        assert_eq!(result.subset_fits.len(), 1 + p + usize::from(p > 1));
        assert_eq!(result.sweep.len(), 3);
    }
}
