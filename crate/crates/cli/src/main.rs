use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use vaxnet_core::experiment::{
    run_campaign, run_village_pipeline, worker_pool, CampaignConfig, PipelineConfig, THREADS_ENV,
};
use vaxnet_core::fcd::{truncate, TruncationParams};
use vaxnet_core::graph::{load_village, Village};
use vaxnet_core::metrics::{village_characteristics, VillageCharacteristics};
use vaxnet_core::netgen::{
    convergence_check, sample_ensemble, ConvergenceTolerances, McmcParams, Proposal, DEFAULT_BURN_IN,
    DEFAULT_CONCENTRATION, DEFAULT_EDGE_PENALTY, DEFAULT_THINNING,
};
use vaxnet_core::regress::{standardize, subset_search, write_subset_table, RegressionDataset};
use vaxnet_core::sir::{run_sir, ContactRule, SirParams};
use vaxnet_core::synth::{synth_village, VillageParams};
use vaxnet_core::vaccinate::{
    select_high_degree, select_nomination, select_none, select_random, select_top_by_betweenness,
    select_top_by_degree, Strategy,
};
use vaxnet_core::StreamKey;

#[derive(Parser)]
#[command(name = "vaxnet", version, about = "Epidemics and vaccination strategies on village contact networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Network characteristics of one village as a CSV row.
    Metrics(MetricsArgs),
    /// Observe a network through a fixed-choice survey capped at K nominations.
    Truncate(TruncateArgs),
    /// Repeated SIR epidemics on one network.
    Simulate(SimulateArgs),
    /// Choose vaccinees with one strategy.
    Vaccinate(VaccinateArgs),
    /// Sample networks matching a reference network's degree mixing.
    Netgen(NetgenArgs),
    /// Best-subset regression of incidence on network characteristics.
    Regress(RegressArgs),
    /// Vaccination campaign over villages, from a TOML config.
    Campaign(ConfigArgs),
    /// Generated ensembles, epidemics and prediction tables, from a TOML config.
    VillagePipeline(ConfigArgs),
    /// Write a synthetic village edge list.
    Synth(SynthArgs),
}

#[derive(Args)]
struct NetworkInput {
    /// Edge-list file: `a b [multiplexity]` per line.
    network: PathBuf,
    /// Keep ties reported on at least this many interaction types.
    #[arg(long, default_value_t = 1)]
    tie_threshold: u8,
}

impl NetworkInput {
    fn load(&self) -> Result<Village> {
        load_village(&self.network, self.tie_threshold)
            .with_context(|| format!("loading {}", self.network.display()))
    }
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    input: NetworkInput,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TruncateArgs {
    #[command(flatten)]
    input: NetworkInput,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: NetworkInput,
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    seed_fraction: f64,
    /// `neighbor` or `susceptible`.
    #[arg(long, default_value = "neighbor")]
    contact: ContactRule,
    #[arg(long, default_value_t = 500)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// File of node ids to vaccinate, one per line.
    #[arg(long)]
    vaccinated: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VaccinateArgs {
    #[command(flatten)]
    input: NetworkInput,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long, default_value_t = 0.1)]
    coverage: f64,
    /// Minimum reported degree for `high-degree`.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Rank on a K-capped survey of the network instead of the whole network.
    #[arg(long)]
    fcd_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NetgenArgs {
    /// Reference network whose degree mixing matrix is the target.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 1)]
    tie_threshold: u8,
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: u64,
    #[arg(long, default_value_t = DEFAULT_THINNING)]
    thinning: u64,
    #[arg(long, default_value_t = DEFAULT_CONCENTRATION)]
    concentration: f64,
    #[arg(long, default_value_t = DEFAULT_EDGE_PENALTY)]
    edge_penalty: f64,
    /// `rewire`, `tie-no-tie` or `uniform`.
    #[arg(long, default_value = "rewire")]
    proposal: Proposal,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct RegressArgs {
    /// Dataset CSV: incidence, seven characteristics, network_id, village_id.
    dataset: PathBuf,
    #[arg(long, default_value_t = 3)]
    max_subset: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 900)]
    n_nodes: usize,
    #[arg(long, default_value_t = 8.5)]
    mean_degree: f64,
    #[arg(long, default_value_t = 6.0)]
    sd_degree: f64,
    #[arg(long, default_value_t = 0.8)]
    mixing_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let village = args.input.load()?;
    let vc = village_characteristics(&village.graph)?;
    let mut out = csv::Writer::from_writer(sink(args.output.as_deref())?);
    let mut header = vec!["village_id"];
    header.extend(VillageCharacteristics::CSV_HEADER);
    out.write_record(&header)?;
    let mut row = vec![village.id];
    row.extend(vc.csv_fields());
    out.write_record(&row)?;
    out.flush()?;
    Ok(())
}

fn truncate_cmd(args: TruncateArgs) -> Result<()> {
    let village = args.input.load()?;
    let observed = truncate(&village.graph, TruncationParams { k: args.k, rng_seed: args.seed });
    let mut out = sink(args.output.as_deref())?;
    observed.write_edge_list(&mut out)?;
    out.flush()?;
    Ok(())
}

fn read_node_list(path: &Path, village: &Village) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|id| {
            village
                .graph
                .index_of(id)
                .with_context(|| format!("{}: node {id:?} is not in {}", path.display(), village.id))
        })
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let village = args.input.load()?;
    let vaccinated = match &args.vaccinated {
        Some(p) => read_node_list(p, &village)?,
        None => Vec::new(),
    };
    let params = SirParams {
        beta: args.beta,
        gamma: args.gamma,
        seed_fraction: args.seed_fraction,
        contact: args.contact,
        rng_seed: 0,
    };
    let key = StreamKey::new(args.seed).with_str("village", &village.id);
    let mut out = csv::Writer::from_writer(sink(args.output.as_deref())?);
    out.write_record([
        "village_id",
        "run",
        "cumulative_incidence",
        "n_seeds",
        "seed_caused_infections",
        "duration_steps",
    ])?;
    for run in 0..args.runs {
        let o = run_sir(&village.graph, &params.with_seed(key.with("run", run as u64).seed()), &vaccinated)?;
        out.write_record([
            village.id.clone(),
            run.to_string(),
            o.cumulative_incidence.to_string(),
            o.n_seeds.to_string(),
            o.seed_caused_infections.to_string(),
            o.duration_steps.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn vaccinate(args: VaccinateArgs) -> Result<()> {
    let village = args.input.load()?;
    let g = &village.graph;
    let mut rng = StreamKey::new(args.seed).with_str("phase", "select").stream();
    if args.cutoff.is_some() != (args.strategy == Strategy::HighDegree) {
        bail!("--cutoff is required for high-degree and accepted by no other strategy");
    }
    if args.fcd_k.is_some() && !args.strategy.uses_observed_network() {
        bail!("--fcd-k applies only to top-degree and top-betweenness");
    }
    let observed = args.fcd_k.map(|k| {
        truncate(
            g,
            TruncationParams {
                k,
                rng_seed: StreamKey::new(args.seed).with_str("phase", "observe").seed(),
            },
        )
    });
    let view = observed.as_ref().unwrap_or(g);
    let plan = match args.strategy {
        Strategy::None => select_none(g),
        Strategy::Random => select_random(g, args.coverage, &mut rng)?,
        Strategy::Nomination => select_nomination(g, args.coverage, &mut rng)?,
        Strategy::HighDegree => select_high_degree(g, args.coverage, args.cutoff.unwrap_or(0), &mut rng)?,
        Strategy::HighestDegree => select_top_by_degree(view, args.coverage, args.fcd_k, &mut rng)?,
        Strategy::MostCentral => select_top_by_betweenness(view, args.coverage, args.fcd_k, &mut rng)?,
    };
    let mut out = sink(args.output.as_deref())?;
    writeln!(
        out,
        "# strategy={} target_coverage={} achieved_coverage={} interviews={} cutoff={} fcd_k={} fallback_filled={}",
        plan.strategy,
        plan.target_coverage,
        plan.achieved_coverage,
        plan.interviews_conducted,
        plan.cutoff.map_or_else(|| "NA".into(), |c| c.to_string()),
        plan.observation_k.map_or_else(|| "full".into(), |k| k.to_string()),
        plan.fallback_filled,
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["order", "node_id", "degree"])?;
    for (i, &v) in plan.selected.iter().enumerate() {
        w.write_record([(i + 1).to_string(), g.id(v).to_string(), g.degree(v).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn netgen(args: NetgenArgs) -> Result<()> {
    let reference = load_village(&args.target, args.tie_threshold)?;
    let mut params = McmcParams::from_reference(&reference.graph, args.seed)?;
    params.burn_in = args.burn_in;
    params.thinning = args.thinning;
    params.concentration = args.concentration;
    params.edge_penalty = args.edge_penalty;
    params.proposal = args.proposal;
    let ensemble = sample_ensemble(&params, args.n_samples)?;
    fs::create_dir_all(&args.output_dir)?;
    for (i, g) in ensemble.samples.iter().enumerate() {
        g.save(args.output_dir.join(format!("{}_{i:04}.txt", reference.id)))?;
    }
    let conv = args.output_dir.join("convergence.csv");
    ensemble.report.write_csv(BufWriter::new(fs::File::create(&conv)?))?;
    let verdict = convergence_check(&ensemble.report, params.target_mean_degree, &ConvergenceTolerances::default());
    if verdict.passed {
        info!(
            "converged: DMM distance {:.3}, mean degree {:.2}",
            verdict.trailing_dmm_distance, verdict.trailing_mean_degree
        );
    } else {
        eprintln!("warning: chain failed the convergence check: {}", verdict.reasons.join("; "));
    }
    Ok(())
}

fn regress(args: RegressArgs) -> Result<()> {
    let raw = RegressionDataset::load(&args.dataset)?;
    if raw.excluded_rows > 0 {
        eprintln!("{} rows with missing values excluded", raw.excluded_rows);
    }
    let fits = subset_search(&standardize(&raw)?, args.max_subset, args.folds, args.seed)?;
    write_subset_table(&fits, sink(args.output.as_deref())?)?;
    Ok(())
}

fn campaign(args: ConfigArgs) -> Result<()> {
    let config = CampaignConfig::load(&args.config)?;
    let pool = worker_pool()?;
    info!("{} workers ({THREADS_ENV})", pool.current_num_threads());
    let result = pool.install(|| run_campaign(&config))?;
    if config.output_dir.is_none() {
        vaxnet_core::experiment::write_summary_csv(&result.summary, io::stdout().lock())?;
    }
    Ok(())
}

fn village_pipeline(args: ConfigArgs) -> Result<()> {
    let config = PipelineConfig::load(&args.config)?;
    let pool = worker_pool()?;
    let result = pool.install(|| run_village_pipeline(&config))?;
    let excluded = result.villages.iter().filter(|v| !v.verdict.passed).count();
    eprintln!(
        "{} villages, {} excluded by the convergence check, {} dataset rows, mean incidence {:.2}%",
        result.villages.len(),
        excluded,
        result.dataset.len(),
        result.mean_incidence
    );
    if config.output_dir.is_none() {
        write_subset_table(&result.subset_fits, io::stdout().lock())?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let params = VillageParams {
        n_nodes: args.n_nodes,
        mean_degree: args.mean_degree,
        sd_degree: args.sd_degree,
        mixing_noise: args.mixing_noise,
    };
    let g = synth_village(&params, &StreamKey::new(args.seed))?;
    let mut out = sink(args.output.as_deref())?;
    g.write_edge_list(&mut out)?;
    out.flush()?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Metrics(a) => metrics(a),
        Command::Truncate(a) => truncate_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Vaccinate(a) => vaccinate(a),
        Command::Netgen(a) => netgen(a),
        Command::Regress(a) => regress(a),
        Command::Campaign(a) => campaign(a),
        Command::VillagePipeline(a) => village_pipeline(a),
        Command::Synth(a) => synth(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
