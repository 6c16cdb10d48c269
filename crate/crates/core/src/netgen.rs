//! Synthetic networks matching a target degree mixing matrix.
//!
//! The sampler is a Metropolis-Hastings chain over simple graphs on a fixed
//! node set with stationary density proportional to
//! `exp(-concentration * (L1(DMM(G), target) + edge_penalty * |m - m*| / m*))`
//! where `m* = n * target_mean_degree / 2`. The L1 term alone is blind to
//! isolated nodes, so without the edge term the edge count drifts freely.
//! Every proposal toggles one
//! node pair. Under [`Proposal::Uniform`] the pair is uniform over all pairs;
//! under [`Proposal::TieNoTie`] half the proposals pick an existing edge,
//! which keeps removals frequent in sparse graphs. The acceptance ratio
//! carries the Hastings correction for the chosen proposal. The chain starts
//! from an Erdős–Rényi graph with the target mean degree.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{pair_key, DegreeMixingMatrix};
use crate::rngcore::{stream_from_seed, Stream};

/// Sum over unordered degree pairs of `|a(i,j) - b(i,j)|`.
pub fn dmm_distance(a: &DegreeMixingMatrix, b: &DegreeMixingMatrix) -> f64 {
    let fa: BTreeMap<(usize, usize), f64> = a.fractions().collect();
    let fb: BTreeMap<(usize, usize), f64> = b.fractions().collect();
    let mut total = 0.0;
    for (k, x) in &fa {
        total += (x - fb.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, y) in &fb {
        if !fa.contains_key(k) {
            total += y;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    /// Toggle a pair drawn uniformly from all `n(n-1)/2` pairs.
    Uniform,
    /// With probability 1/2 toggle a uniformly drawn edge, otherwise a
    /// uniformly drawn pair.
    TieNoTie,
    /// Mix tie/no-tie toggles, endpoint rewires (an edge `{u, v}` moves to
    /// `{u, w}` for a uniform `w`) and degree-preserving double-edge swaps
    /// in equal proportion.
    #[default]
    Rewire,
}

impl std::str::FromStr for Proposal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Proposal::Uniform),
            "tie-no-tie" | "tnt" => Ok(Proposal::TieNoTie),
            "rewire" => Ok(Proposal::Rewire),
            other => Err(Error::InvalidParameter(format!("unknown proposal {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcParams {
    pub target: DegreeMixingMatrix,
    pub n_nodes: usize,
    pub target_mean_degree: f64,
    pub burn_in: u64,
    pub thinning: u64,
    pub concentration: f64,
    /// Weight of the relative edge-count error in the energy; 0 gives the
    /// pure DMM-distance density.
    pub edge_penalty: f64,
    pub proposal: Proposal,
    pub rng_seed: u64,
}

pub const DEFAULT_BURN_IN: u64 = 300_000;
pub const DEFAULT_THINNING: u64 = 1_000;
pub const DEFAULT_CONCENTRATION: f64 = 50_000.0;
pub const DEFAULT_EDGE_PENALTY: f64 = 4.0;

impl McmcParams {
    /// Target taken from a reference graph, with default chain settings.
    pub fn from_reference(reference: &Graph, rng_seed: u64) -> Result<Self> {
        let target = DegreeMixingMatrix::from_graph(reference)?;
        Ok(McmcParams {
            target,
            n_nodes: reference.n_nodes(),
            target_mean_degree: 2.0 * reference.n_edges() as f64 / reference.n_nodes() as f64,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            concentration: DEFAULT_CONCENTRATION,
            edge_penalty: DEFAULT_EDGE_PENALTY,
            proposal: Proposal::default(),
            rng_seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.concentration > 0.0) || !self.concentration.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "concentration {} must be positive",
                self.concentration
            )));
        }
        if self.target.is_empty() {
            return Err(Error::InvalidParameter("target degree mixing matrix has no edges".into()));
        }
        if self.n_nodes < 3 {
            return Err(Error::InvalidParameter("sampler needs at least 3 nodes".into()));
        }
        if self.target_mean_degree * self.n_nodes as f64 / 2.0 < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "target mean degree {} gives fewer than one edge",
                self.target_mean_degree
            )));
        }
        if !(self.edge_penalty >= 0.0) || !self.edge_penalty.is_finite() {
            return Err(Error::InvalidParameter("edge penalty must be non-negative".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Chain diagnostics, sampled every `thinning` steps from step 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConvergenceReport {
    pub steps: Vec<u64>,
    pub mean_degree_trace: Vec<f64>,
    pub dmm_distance_trace: Vec<f64>,
    /// Cumulative accepted proposals at each trace point.
    pub accepted_trace: Vec<u64>,
    pub accepted_fraction: f64,
}

impl ConvergenceReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "mean_degree", "dmm_distance", "accepted"])?;
        for i in 0..self.steps.len() {
            out.write_record([
                self.steps[i].to_string(),
                self.mean_degree_trace[i].to_string(),
                self.dmm_distance_trace[i].to_string(),
                self.accepted_trace[i].to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub samples: Vec<Graph>,
    pub report: ConvergenceReport,
}

/// Graph state plus an incrementally maintained degree mixing matrix.
#[derive(Debug, Clone)]
pub struct ToggleChain {
    adj: Vec<Vec<u32>>,
    edge_list: Vec<(u32, u32)>,
    edge_pos: HashMap<(u32, u32), usize>,
    n_pairs: f64,
    proposal: Proposal,
    target_edges: f64,
    edge_penalty: f64,
    deg: Vec<usize>,
    m: usize,
    counts: HashMap<(usize, usize), i64>,
    concentration: f64,
    // target restricted to its support, with a dense index for lookups
    target_frac: Vec<f64>,
    target_max: usize,
    support_index: Vec<u32>,
    support_counts: Vec<i64>,
    support_total: i64,
    distance: f64,
    // proposal scratch
    delta: Vec<((usize, usize), i64)>,
}

const NO_SUPPORT: u32 = u32::MAX;

impl ToggleChain {
    pub fn new(g: &Graph, target: &DegreeMixingMatrix, concentration: f64) -> Self {
        let n = g.n_nodes();
        let adj: Vec<Vec<u32>> = (0..n)
            .map(|u| g.neighbors(u).iter().map(|&v| v as u32).collect())
            .collect();
        let deg = g.degrees();
        let edge_list: Vec<(u32, u32)> = g.edges().map(|(u, v)| (u as u32, v as u32)).collect();
        let edge_pos = edge_list.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let target_max = target.max_degree();
        let side = target_max + 1;
        let mut support_index = vec![NO_SUPPORT; side * side];
        let mut n_support = 0u32;
        let mut target_frac = Vec::new();
        for ((a, b), f) in target.fractions() {
            support_index[a * side + b] = n_support;
            n_support += 1;
            target_frac.push(f);
        }
        let mut chain = ToggleChain {
            adj,
            edge_list,
            edge_pos,
            n_pairs: (n * n.saturating_sub(1)) as f64 / 2.0,
            proposal: Proposal::Uniform,
            target_edges: 1.0,
            edge_penalty: 0.0,
            deg,
            m: g.n_edges(),
            counts: HashMap::new(),
            concentration,
            support_counts: vec![0; target_frac.len()],
            target_frac,
            target_max,
            support_index,
            support_total: 0,
            distance: 0.0,
            delta: Vec::new(),
        };
        for (u, v) in g.edges() {
            let key = pair_key(chain.deg[u], chain.deg[v]);
            *chain.counts.entry(key).or_insert(0) += 1;
            if let Some(i) = chain.support_slot(key) {
                chain.support_counts[i] += 1;
                chain.support_total += 1;
            }
        }
        chain.distance = chain.distance_with(&chain.support_counts, chain.support_total, chain.m);
        chain
    }

    fn support_slot(&self, (a, b): (usize, usize)) -> Option<usize> {
        if b > self.target_max {
            return None;
        }
        let i = self.support_index[a * (self.target_max + 1) + b];
        (i != NO_SUPPORT).then_some(i as usize)
    }

    /// L1 distance given support-aligned counts; off-support mass is
    /// `m - support_total`.
    fn distance_with(&self, counts: &[i64], support_total: i64, m: usize) -> f64 {
        if m == 0 {
            return self.target_frac.iter().sum();
        }
        let inv = 1.0 / m as f64;
        let mut d = 0.0;
        for (c, t) in counts.iter().zip(&self.target_frac) {
            d += (*c as f64 * inv - t).abs();
        }
        d + (m as i64 - support_total) as f64 * inv
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Self {
        self.proposal = proposal;
        self
    }

    /// Penalize the relative deviation of the edge count from `target_edges`.
    pub fn with_edge_target(mut self, target_edges: f64, edge_penalty: f64) -> Self {
        self.target_edges = target_edges.max(1.0);
        self.edge_penalty = edge_penalty;
        self
    }

    fn energy(&self, distance: f64, m: usize) -> f64 {
        distance + self.edge_penalty * (m as f64 - self.target_edges).abs() / self.target_edges
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.m
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.m as f64 / self.adj.len() as f64
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() { (u, v) } else { (v, u) };
        self.adj[a].contains(&(b as u32))
    }

    /// The incrementally maintained matrix.
    pub fn dmm(&self) -> DegreeMixingMatrix {
        DegreeMixingMatrix::from_counts(
            self.counts
                .iter()
                .filter(|&(_, &c)| c > 0)
                .map(|(&k, &c)| (k, c as u64))
                .collect(),
        )
    }

    pub fn graph(&self) -> Graph {
        let edges: Vec<(usize, usize)> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| {
                nbrs.iter()
                    .filter(move |&&v| (v as usize) > u)
                    .map(move |&v| (u, v as usize))
            })
            .collect();
        Graph::from_edges(self.adj.len(), &edges).expect("chain state is a simple graph")
    }

    /// Fill `self.delta` with the DMM count changes of toggling `{u, v}`.
    fn collect_delta(&mut self, u: usize, v: usize, adding: bool) {
        self.delta.clear();
        let (du, dv) = (self.deg[u], self.deg[v]);
        let (nu, nv) = if adding { (du + 1, dv + 1) } else { (du - 1, dv - 1) };
        for (x, dx, nx, other) in [(u, du, nu, v), (v, dv, nv, u)] {
            for &w in &self.adj[x] {
                let w = w as usize;
                if w == other {
                    continue;
                }
                let dw = self.deg[w];
                self.delta.push((pair_key(dx, dw), -1));
                self.delta.push((pair_key(nx, dw), 1));
            }
        }
        if adding {
            self.delta.push((pair_key(nu, nv), 1));
        } else {
            self.delta.push((pair_key(du, dv), -1));
        }
    }

    /// Distance after toggling `{u, v}`, without changing the state.
    pub fn proposed_distance(&mut self, u: usize, v: usize) -> f64 {
        let adding = !self.has_edge(u, v);
        self.collect_delta(u, v, adding);
        let mut total = self.support_total;
        let mut touched: Vec<(usize, i64)> = Vec::with_capacity(self.delta.len());
        for i in 0..self.delta.len() {
            let (key, d) = self.delta[i];
            if let Some(slot) = self.support_slot(key) {
                self.support_counts[slot] += d;
                total += d;
                touched.push((slot, d));
            }
        }
        let m = if adding { self.m + 1 } else { self.m - 1 };
        let dist = self.distance_with(&self.support_counts, total, m);
        for (slot, d) in touched {
            self.support_counts[slot] -= d;
        }
        dist
    }

    /// Probability that the next proposal toggles `{u, v}` in a state with
    /// `m` edges, `is_edge` saying whether the pair is currently an edge.
    fn proposal_probability(&self, is_edge: bool, m: usize) -> f64 {
        match self.proposal {
            Proposal::Uniform => 1.0 / self.n_pairs,
            Proposal::TieNoTie | Proposal::Rewire if m == 0 => 1.0 / self.n_pairs,
            Proposal::TieNoTie | Proposal::Rewire => {
                0.5 / self.n_pairs + if is_edge { 0.5 / m as f64 } else { 0.0 }
            }
        }
    }

    /// Log Metropolis-Hastings ratio for toggling `{u, v}`.
    fn log_acceptance_ratio(&mut self, u: usize, v: usize) -> f64 {
        let is_edge = self.has_edge(u, v);
        let proposed = self.proposed_distance(u, v);
        let m_after = if is_edge { self.m - 1 } else { self.m + 1 };
        let forward = self.proposal_probability(is_edge, self.m);
        let backward = self.proposal_probability(!is_edge, m_after);
        -self.concentration * (self.energy(proposed, m_after) - self.energy(self.distance, self.m))
            + (backward / forward).ln()
    }

    /// Probability that the chain's next step toggles `{u, v}`.
    pub fn transition_probability(&mut self, u: usize, v: usize) -> f64 {
        let q = self.proposal_probability(self.has_edge(u, v), self.m);
        q * self.acceptance_probability(u, v)
    }

    /// Metropolis-Hastings acceptance probability of toggling `{u, v}`.
    pub fn acceptance_probability(&mut self, u: usize, v: usize) -> f64 {
        self.log_acceptance_ratio(u, v).exp().min(1.0)
    }

    /// Unconditionally toggle `{u, v}`, maintaining the DMM incrementally.
    pub fn toggle(&mut self, u: usize, v: usize) {
        assert!(u != v, "cannot toggle a self-loop");
        let adding = !self.has_edge(u, v);
        self.collect_delta(u, v, adding);
        for i in 0..self.delta.len() {
            let (key, d) = self.delta[i];
            let c = self.counts.entry(key).or_insert(0);
            *c += d;
            if *c == 0 {
                self.counts.remove(&key);
            }
            if let Some(slot) = self.support_slot(key) {
                self.support_counts[slot] += d;
                self.support_total += d;
            }
        }
        if adding {
            self.adj[u].push(v as u32);
            self.adj[v].push(u as u32);
            let key = (u.min(v) as u32, u.max(v) as u32);
            self.edge_pos.insert(key, self.edge_list.len());
            self.edge_list.push(key);
            self.deg[u] += 1;
            self.deg[v] += 1;
            self.m += 1;
        } else {
            let pu = self.adj[u].iter().position(|&x| x as usize == v).unwrap();
            self.adj[u].swap_remove(pu);
            let pv = self.adj[v].iter().position(|&x| x as usize == u).unwrap();
            self.adj[v].swap_remove(pv);
            let key = (u.min(v) as u32, u.max(v) as u32);
            let pos = self.edge_pos.remove(&key).expect("edge is indexed");
            self.edge_list.swap_remove(pos);
            if let Some(&moved) = self.edge_list.get(pos) {
                self.edge_pos.insert(moved, pos);
            }
            self.deg[u] -= 1;
            self.deg[v] -= 1;
            self.m -= 1;
        }
        self.distance = self.distance_with(&self.support_counts, self.support_total, self.m);
    }

    /// One proposal plus accept/reject. Returns whether the toggle was
    /// accepted.
    pub fn step(&mut self, rng: &mut Stream) -> bool {
        if self.proposal == Proposal::Rewire {
            match rng.below(3) {
                0 => return self.rewire_step(rng),
                1 => return self.swap_step(rng),
                _ => {}
            }
        }
        let (u, v) = if self.proposal != Proposal::Uniform && self.m > 0 && rng.bernoulli(0.5) {
            let (a, b) = self.edge_list[rng.below(self.m)];
            (a as usize, b as usize)
        } else {
            let n = self.adj.len();
            let u = rng.below(n);
            let mut v = rng.below(n - 1);
            if v >= u {
                v += 1;
            }
            (u, v)
        };
        let log_ratio = self.log_acceptance_ratio(u, v);
        if log_ratio >= 0.0 || rng.uniform() < log_ratio.exp() {
            self.toggle(u, v);
            true
        } else {
            false
        }
    }
}

impl ToggleChain {
    /// Move a uniform edge `{u, v}` (with `u` a uniform endpoint) to
    /// `{u, w}`, `w` uniform over nodes other than `u`. Symmetric, so the
    /// acceptance ratio is the density ratio; moves onto an existing edge
    /// are rejected.
    fn rewire_step(&mut self, rng: &mut Stream) -> bool {
        if self.m == 0 {
            return false;
        }
        let (a, b) = self.edge_list[rng.below(self.m)];
        let (u, v) = if rng.bernoulli(0.5) { (a as usize, b as usize) } else { (b as usize, a as usize) };
        let n = self.adj.len();
        let mut w = rng.below(n - 1);
        if w >= u {
            w += 1;
        }
        if w == v || self.has_edge(u, w) {
            return false;
        }
        let before = self.distance;
        self.toggle(u, v);
        let proposed = self.proposed_distance(u, w);
        let log_ratio = -self.concentration * (proposed - before);
        if log_ratio >= 0.0 || rng.uniform() < log_ratio.exp() {
            self.toggle(u, w);
            true
        } else {
            self.toggle(u, v);
            false
        }
    }
}

impl ToggleChain {
    /// Replace uniform distinct edges `{a, b}`, `{c, d}` (uniform
    /// orientation) by `{a, d}`, `{c, b}`. Degrees are unchanged, so only
    /// four DMM cells move. Symmetric; degenerate swaps are rejected.
    fn swap_step(&mut self, rng: &mut Stream) -> bool {
        if self.m < 2 {
            return false;
        }
        let i = rng.below(self.m);
        let mut j = rng.below(self.m - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = self.edge_list[i];
        let (c, d) = self.edge_list[j];
        let (c, d) = if rng.bernoulli(0.5) { (c, d) } else { (d, c) };
        let (a, b, c, d) = (a as usize, b as usize, c as usize, d as usize);
        if a == d || c == b || self.has_edge(a, d) || self.has_edge(c, b) {
            return false;
        }
        let deg = |x: usize| self.deg[x];
        let moves = [
            (pair_key(deg(a), deg(b)), -1i64),
            (pair_key(deg(c), deg(d)), -1),
            (pair_key(deg(a), deg(d)), 1),
            (pair_key(deg(c), deg(b)), 1),
        ];
        let mut total = self.support_total;
        let mut touched = [(usize::MAX, 0i64); 4];
        for (t, &(key, dlt)) in touched.iter_mut().zip(&moves) {
            if let Some(slot) = self.support_slot(key) {
                self.support_counts[slot] += dlt;
                total += dlt;
                *t = (slot, dlt);
            }
        }
        let proposed = self.distance_with(&self.support_counts, total, self.m);
        for &(slot, dlt) in &touched {
            if slot != usize::MAX {
                self.support_counts[slot] -= dlt;
            }
        }
        let log_ratio = -self.concentration * (proposed - self.distance);
        if log_ratio >= 0.0 || rng.uniform() < log_ratio.exp() {
            self.toggle(a, b);
            self.toggle(c, d);
            self.toggle(a, d);
            self.toggle(c, b);
            true
        } else {
            false
        }
    }
}

/// Erdős–Rényi graph with edge probability `mean_degree / (n - 1)`.
pub fn erdos_renyi(n: usize, mean_degree: f64, rng: &mut Stream) -> Graph {
    let p = (mean_degree / (n as f64 - 1.0)).clamp(0.0, 1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("generated edges are simple")
}

pub fn sample_ensemble(params: &McmcParams, n_samples: usize) -> Result<Ensemble> {
    params.validate()?;
    let mut rng = stream_from_seed(params.rng_seed);
    let start = erdos_renyi(params.n_nodes, params.target_mean_degree, &mut rng);
    let mut chain =
        ToggleChain::new(&start, &params.target, params.concentration)
        .with_proposal(params.proposal)
        .with_edge_target(
            params.target_mean_degree * params.n_nodes as f64 / 2.0,
            params.edge_penalty,
        );

    let total = params.burn_in + n_samples as u64 * params.thinning;
    let mut report = ConvergenceReport::default();
    let mut samples = Vec::with_capacity(n_samples);
    let mut accepted = 0u64;
    let record = |chain: &ToggleChain, step: u64, accepted: u64, report: &mut ConvergenceReport| {
        report.steps.push(step);
        report.mean_degree_trace.push(chain.mean_degree());
        report.dmm_distance_trace.push(chain.distance());
        report.accepted_trace.push(accepted);
    };
    record(&chain, 0, 0, &mut report);
    for step in 1..=total {
        if chain.step(&mut rng) {
            accepted += 1;
        }
        if step % params.thinning == 0 {
            record(&chain, step, accepted, &mut report);
        }
        if step > params.burn_in && (step - params.burn_in) % params.thinning == 0 {
            samples.push(chain.graph());
        }
    }
    report.accepted_fraction = if total == 0 { 0.0 } else { accepted as f64 / total as f64 };
    Ok(Ensemble { samples, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTolerances {
    pub mean_degree: f64,
    pub dmm_distance: f64,
    /// Fraction of the trace (from the end) averaged for the check.
    pub window_fraction: f64,
}

impl Default for ConvergenceTolerances {
    fn default() -> Self {
        ConvergenceTolerances {
            mean_degree: 0.5,
            dmm_distance: 0.5,
            window_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceVerdict {
    pub passed: bool,
    pub reasons: Vec<String>,
    pub trailing_mean_degree: f64,
    pub trailing_dmm_distance: f64,
}

pub fn convergence_check(
    report: &ConvergenceReport,
    target_mean_degree: f64,
    tolerances: &ConvergenceTolerances,
) -> ConvergenceVerdict {
    let len = report.mean_degree_trace.len();
    if len == 0 || report.dmm_distance_trace.len() != len {
        return ConvergenceVerdict {
            passed: false,
            reasons: vec!["empty or ragged trace".into()],
            trailing_mean_degree: f64::NAN,
            trailing_dmm_distance: f64::NAN,
        };
    }
    let window = ((len as f64 * tolerances.window_fraction).ceil() as usize).clamp(1, len);
    let tail = |xs: &[f64]| xs[len - window..].iter().sum::<f64>() / window as f64;
    let md = tail(&report.mean_degree_trace);
    let dd = tail(&report.dmm_distance_trace);
    let mut reasons = Vec::new();
    if (md - target_mean_degree).abs() > tolerances.mean_degree {
        reasons.push(format!(
            "mean degree {md:.3} differs from target {target_mean_degree:.3} by more than {}",
            tolerances.mean_degree
        ));
    }
    if dd > tolerances.dmm_distance {
        reasons.push(format!(
            "DMM distance {dd:.4} exceeds {}",
            tolerances.dmm_distance
        ));
    }
    ConvergenceVerdict {
        passed: reasons.is_empty(),
        reasons,
        trailing_mean_degree: md,
        trailing_dmm_distance: dd,
    }
}
