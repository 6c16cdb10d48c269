//! Vaccinee selection strategies.
//!
//! Every selector works on the graph it is handed. The whole-network
//! strategies take an *observed* graph (possibly a fixed-choice-design
//! truncation) and the caller runs the epidemic on the true graph.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::betweenness_all;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    None,
    Random,
    Nomination,
    HighDegree,
    #[serde(rename = "top-degree")]
    HighestDegree,
    #[serde(rename = "top-betweenness")]
    MostCentral,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::None,
        Strategy::Random,
        Strategy::Nomination,
        Strategy::HighDegree,
        Strategy::HighestDegree,
        Strategy::MostCentral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Random => "random",
            Strategy::Nomination => "nomination",
            Strategy::HighDegree => "high-degree",
            Strategy::HighestDegree => "top-degree",
            Strategy::MostCentral => "top-betweenness",
        }
    }

    /// Whether the strategy ranks nodes on a (possibly truncated) observed network.
    pub fn uses_observed_network(self) -> bool {
        matches!(self, Strategy::HighestDegree | Strategy::MostCentral)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaccinationPlan {
    pub strategy: Strategy,
    /// Selected node indices, in selection order.
    pub selected: Vec<usize>,
    pub target_coverage: f64,
    pub achieved_coverage: f64,
    pub interviews_conducted: usize,
    pub cutoff: Option<usize>,
    /// FCD truncation level of the observed network; `None` for the full network.
    pub observation_k: Option<usize>,
    /// High-degree only: vaccinees taken from non-qualifying interviewees
    /// because the quota could not be met.
    pub fallback_filled: usize,
}

impl VaccinationPlan {
    fn new(strategy: Strategy, g: &Graph, coverage: f64, selected: Vec<usize>, interviews: usize) -> Self {
        let n = g.n_nodes();
        VaccinationPlan {
            strategy,
            achieved_coverage: if n == 0 { 0.0 } else { selected.len() as f64 / n as f64 },
            selected,
            target_coverage: coverage,
            interviews_conducted: interviews,
            cutoff: None,
            observation_k: None,
            fallback_filled: 0,
        }
    }

    pub fn under_qualified(&self) -> bool {
        self.fallback_filled > 0
    }
}

/// `round(coverage * n)`, tolerant of binary rounding in the product.
pub fn quota(coverage: f64, n: usize) -> usize {
    (coverage * n as f64 + 1e-9).round() as usize
}

fn check_coverage(coverage: f64) -> Result<()> {
    if coverage > 0.0 && coverage < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("coverage {coverage} outside (0, 1)")))
    }
}

pub fn select_none(g: &Graph) -> VaccinationPlan {
    VaccinationPlan::new(Strategy::None, g, 0.0, Vec::new(), 0)
}

pub fn select_random<R: Rng + ?Sized>(g: &Graph, coverage: f64, rng: &mut R) -> Result<VaccinationPlan> {
    check_coverage(coverage)?;
    let q = quota(coverage, g.n_nodes());
    if q == 0 {
        return Err(Error::InvalidParameter(format!(
            "coverage {coverage} of {} nodes selects nobody",
            g.n_nodes()
        )));
    }
    let mut nodes: Vec<usize> = (0..g.n_nodes()).collect();
    let (chosen, _) = nodes.partial_shuffle(rng, q);
    let selected = chosen.to_vec();
    Ok(VaccinationPlan::new(Strategy::Random, g, coverage, selected, q))
}

/// Random egos each nominate one random contact not already selected.
/// Egos with no such contact contribute nobody and are not replaced.
pub fn select_nomination<R: Rng + ?Sized>(g: &Graph, coverage: f64, rng: &mut R) -> Result<VaccinationPlan> {
    check_coverage(coverage)?;
    let n = g.n_nodes();
    let q = quota(coverage, n);
    let mut nodes: Vec<usize> = (0..n).collect();
    let (egos, _) = nodes.partial_shuffle(rng, q);
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(q);
    let mut open: Vec<usize> = Vec::new();
    for &ego in egos.iter() {
        open.clear();
        open.extend(g.neighbors(ego).iter().copied().filter(|&v| !taken[v]));
        if let Some(&nominee) = open.choose(rng) {
            taken[nominee] = true;
            selected.push(nominee);
        }
    }
    Ok(VaccinationPlan::new(Strategy::Nomination, g, coverage, selected, q))
}

/// Interview random people in turn and vaccinate those reporting at least
/// `cutoff` contacts, until the quota is met or everyone was asked. A short
/// quota is topped up at random from the non-qualifying interviewees.
pub fn select_high_degree<R: Rng + ?Sized>(
    g: &Graph,
    coverage: f64,
    cutoff: usize,
    rng: &mut R,
) -> Result<VaccinationPlan> {
    check_coverage(coverage)?;
    let n = g.n_nodes();
    let q = quota(coverage, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut selected = Vec::with_capacity(q);
    let mut rejected = Vec::new();
    let mut interviews = 0;
    for &v in &order {
        if selected.len() >= q {
            break;
        }
        interviews += 1;
        if g.degree(v) >= cutoff {
            selected.push(v);
        } else {
            rejected.push(v);
        }
    }
    let shortfall = q - selected.len();
    if shortfall > 0 {
        let (fill, _) = rejected.partial_shuffle(rng, shortfall);
        selected.extend_from_slice(fill);
    }
    let mut plan = VaccinationPlan::new(Strategy::HighDegree, g, coverage, selected, interviews);
    plan.cutoff = Some(cutoff);
    plan.fallback_filled = shortfall;
    Ok(plan)
}

/// Top `quota` nodes by score with ties broken uniformly at random.
fn top_by_score<R: Rng + ?Sized>(scores: &[f64], q: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(rng);
    // stable sort keeps the random order within equal scores
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(q);
    order
}

pub fn select_top_by_degree<R: Rng + ?Sized>(
    observed: &Graph,
    coverage: f64,
    observation_k: Option<usize>,
    rng: &mut R,
) -> Result<VaccinationPlan> {
    check_coverage(coverage)?;
    let scores: Vec<f64> = observed.degrees().into_iter().map(|d| d as f64).collect();
    let q = quota(coverage, observed.n_nodes());
    let selected = top_by_score(&scores, q, rng);
    let mut plan = VaccinationPlan::new(Strategy::HighestDegree, observed, coverage, selected, observed.n_nodes());
    plan.observation_k = observation_k;
    Ok(plan)
}

pub fn select_top_by_betweenness<R: Rng + ?Sized>(
    observed: &Graph,
    coverage: f64,
    observation_k: Option<usize>,
    rng: &mut R,
) -> Result<VaccinationPlan> {
    let scores = betweenness_all(observed);
    select_top_by_scores(observed, &scores, coverage, observation_k, rng)
}

/// Betweenness selection with precomputed scores for `observed`.
pub fn select_top_by_scores<R: Rng + ?Sized>(
    observed: &Graph,
    scores: &[f64],
    coverage: f64,
    observation_k: Option<usize>,
    rng: &mut R,
) -> Result<VaccinationPlan> {
    check_coverage(coverage)?;
    if scores.len() != observed.n_nodes() {
        return Err(Error::InvalidParameter("score vector length mismatch".into()));
    }
    let q = quota(coverage, observed.n_nodes());
    let selected = top_by_score(scores, q, rng);
    let mut plan = VaccinationPlan::new(Strategy::MostCentral, observed, coverage, selected, observed.n_nodes());
    plan.observation_k = observation_k;
    Ok(plan)
}
