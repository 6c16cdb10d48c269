//! Discrete-time SIR with unit infectivity.
//!
//! Each step has two synchronous phases over the nodes infectious at the
//! start of the step:
//!
//! 1. every infectious node makes one contact with probability `beta` and
//!    infects the contacted node if it was susceptible at step start; the
//!    [`ContactRule`] says whether the contact is drawn among susceptible
//!    neighbors or among all unvaccinated neighbors;
//! 2. every one of those nodes recovers with probability `gamma`.
//!
//! Nodes infected during a step become infectious at the next step.
//! Vaccinated nodes are never susceptible, which removes them and their
//! edges from the contact process.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rngcore::stream_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactRule {
    /// The contact is uniform over neighbors susceptible at step start.
    Susceptible,
    /// The contact is uniform over unvaccinated neighbors; contacts with
    /// infectious or recovered nodes are wasted.
    #[default]
    Neighbor,
}

impl std::str::FromStr for ContactRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "susceptible" => Ok(ContactRule::Susceptible),
            "neighbor" => Ok(ContactRule::Neighbor),
            other => Err(Error::InvalidParameter(format!("unknown contact rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub gamma: f64,
    pub seed_fraction: f64,
    #[serde(default)]
    pub contact: ContactRule,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for SirParams {
    fn default() -> Self {
        SirParams {
            beta: 0.25,
            gamma: 0.1,
            seed_fraction: 0.01,
            contact: ContactRule::default(),
            rng_seed: 0,
        }
    }
}

impl SirParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "seed fraction {} outside (0, 1]",
                self.seed_fraction
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    /// `ceil(seed_fraction * n)`, tolerant of binary rounding in the product.
    pub fn seed_count(&self, n_nodes: usize) -> usize {
        (self.seed_fraction * n_nodes as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepCounts {
    pub susceptible: usize,
    pub infectious: usize,
    pub recovered: usize,
    pub vaccinated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InfectionEvent {
    pub step: usize,
    pub infector: usize,
    pub infectee: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SirTrace {
    /// Counts after seeding (index 0) and after each step.
    pub counts: Vec<StepCounts>,
    pub infections: Vec<InfectionEvent>,
    pub seeds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SirOutcome {
    /// Ever-infected nodes (seeds included) over all nodes, vaccinated included.
    pub cumulative_incidence: f64,
    pub n_nodes: usize,
    pub n_seeds: usize,
    pub n_ever_infected: usize,
    pub seed_caused_infections: usize,
    pub duration_steps: usize,
    #[serde(skip)]
    pub trace: Option<SirTrace>,
}

pub fn run_sir(g: &Graph, params: &SirParams, vaccinated: &[usize]) -> Result<SirOutcome> {
    simulate(g, params, vaccinated, false)
}

/// As [`run_sir`], also recording per-step compartment counts and every
/// infection event.
pub fn run_sir_traced(g: &Graph, params: &SirParams, vaccinated: &[usize]) -> Result<SirOutcome> {
    simulate(g, params, vaccinated, true)
}

const SUSCEPTIBLE: u8 = 0;
const INFECTIOUS: u8 = 1;
const RECOVERED: u8 = 2;
const VACCINATED: u8 = 3;

fn simulate(g: &Graph, params: &SirParams, vaccinated: &[usize], traced: bool) -> Result<SirOutcome> {
    params.validate()?;
    let n = g.n_nodes();
    let mut state = vec![SUSCEPTIBLE; n];
    let mut n_vaccinated = 0;
    for &v in vaccinated {
        if v >= n {
            return Err(Error::NodeOutOfRange(v));
        }
        if state[v] != VACCINATED {
            state[v] = VACCINATED;
            n_vaccinated += 1;
        }
    }
    let n_seeds = params.seed_count(n);
    if n_seeds == 0 {
        return Err(Error::InvalidParameter(format!(
            "seed fraction {} yields no seeds on {n} nodes",
            params.seed_fraction
        )));
    }
    if n_seeds > n - n_vaccinated {
        return Err(Error::InvalidParameter(format!(
            "{n_seeds} seeds requested but only {} unvaccinated nodes",
            n - n_vaccinated
        )));
    }

    let mut rng = stream_from_seed(params.rng_seed);
    let mut pool: Vec<usize> = (0..n).filter(|&v| state[v] == SUSCEPTIBLE).collect();
    let (chosen, _) = pool.partial_shuffle(&mut rng, n_seeds);
    let mut infectious: Vec<usize> = chosen.to_vec();
    infectious.sort_unstable();
    let mut is_seed = vec![false; n];
    for &s in &infectious {
        is_seed[s] = true;
        state[s] = INFECTIOUS;
    }

    let mut trace = traced.then(|| SirTrace {
        seeds: infectious.clone(),
        ..SirTrace::default()
    });
    let mut counts = StepCounts {
        susceptible: n - n_vaccinated - n_seeds,
        infectious: n_seeds,
        recovered: 0,
        vaccinated: n_vaccinated,
    };
    if let Some(t) = trace.as_mut() {
        t.counts.push(counts);
    }

    let mut pending = vec![false; n];
    let mut newly: Vec<usize> = Vec::new();
    let mut candidates: Vec<usize> = Vec::new();
    let mut still: Vec<usize> = Vec::new();
    let mut seed_caused = 0;
    let mut ever = n_seeds;
    let mut step = 0;

    while !infectious.is_empty() {
        step += 1;
        // phase 1: one attack per infectious node
        for &u in &infectious {
            // Drawing the Bernoulli first and the target second has the same
            // law as target-then-Bernoulli and skips the scan on failure.
            if !rng.bernoulli(params.beta) {
                continue;
            }
            candidates.clear();
            let contact = params.contact;
            candidates.extend(g.neighbors(u).iter().copied().filter(|&v| match contact {
                ContactRule::Susceptible => state[v] == SUSCEPTIBLE,
                ContactRule::Neighbor => state[v] != VACCINATED,
            }));
            if candidates.is_empty() {
                continue;
            }
            let target = candidates[rng.below(candidates.len())];
            if state[target] != SUSCEPTIBLE || pending[target] {
                continue;
            }
            pending[target] = true;
            newly.push(target);
            if is_seed[u] {
                seed_caused += 1;
            }
            if let Some(t) = trace.as_mut() {
                t.infections.push(InfectionEvent {
                    step,
                    infector: u,
                    infectee: target,
                });
            }
        }
        // phase 2: recovery of nodes infectious at step start
        still.clear();
        let mut recovered_now = 0;
        for &u in &infectious {
            if rng.bernoulli(params.gamma) {
                state[u] = RECOVERED;
                recovered_now += 1;
            } else {
                still.push(u);
            }
        }
        for &v in &newly {
            pending[v] = false;
            state[v] = INFECTIOUS;
        }
        still.extend_from_slice(&newly);
        ever += newly.len();
        counts.susceptible -= newly.len();
        counts.infectious = counts.infectious + newly.len() - recovered_now;
        counts.recovered += recovered_now;
        newly.clear();
        std::mem::swap(&mut infectious, &mut still);
        if let Some(t) = trace.as_mut() {
            t.counts.push(counts);
        }
    }

    Ok(SirOutcome {
        cumulative_incidence: ever as f64 / n as f64,
        n_nodes: n,
        n_seeds,
        n_ever_infected: ever,
        seed_caused_infections: seed_caused,
        duration_steps: step,
        trace,
    })
}

/// Mean over runs of infections caused directly by seeds, per seed.
pub fn estimate_r0(outcomes: &[SirOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no outcomes to estimate R0 from".into()));
    }
    let mut total = 0.0;
    for o in outcomes {
        if o.n_seeds == 0 {
            return Err(Error::InvalidParameter("outcome without seeds".into()));
        }
        total += o.seed_caused_infections as f64 / o.n_seeds as f64;
    }
    Ok(total / outcomes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64, gamma: f64, seed_fraction: f64, rng_seed: u64) -> SirParams {
        SirParams {
            beta,
            gamma,
            seed_fraction,
            contact: ContactRule::Susceptible,
            rng_seed,
        }
    }

    fn ring_lattice(n: usize, k: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for d in 1..=k {
                edges.push((i, (i + d) % n));
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn edgeless_graph_only_seeds_are_infected() {
        let g = Graph::from_edges(200, &[]).unwrap();
        let o = run_sir(&g, &params(1.0, 0.1, 0.01, 3), &[]).unwrap();
        assert_eq!(o.n_seeds, 2);
        assert_eq!(o.cumulative_incidence, 2.0 / 200.0);
        assert!(o.duration_steps >= 1);
    }

    #[test]
    fn zero_beta_only_seeds_are_infected() {
        let g = ring_lattice(300, 3);
        for seed in 0..10 {
            let o = run_sir(&g, &params(0.0, 0.2, 0.01, seed), &[]).unwrap();
            assert_eq!(o.n_seeds, 3);
            assert_eq!(o.cumulative_incidence, 3.0 / 300.0);
            assert_eq!(o.seed_caused_infections, 0);
        }
    }

    #[test]
    fn all_but_seeds_vaccinated() {
        let g = ring_lattice(100, 2);
        let vaccinated: Vec<usize> = (1..100).collect();
        let o = run_sir(&g, &params(1.0, 0.1, 0.01, 5), &vaccinated).unwrap();
        assert_eq!(o.n_seeds, 1);
        assert_eq!(o.cumulative_incidence, 0.01);
        assert_eq!(o.seed_caused_infections, 0);
    }

    #[test]
    fn seed_count_uses_ceiling() {
        let p = params(0.25, 0.1, 0.01, 0);
        assert_eq!(p.seed_count(900), 9);
        assert_eq!(p.seed_count(901), 10);
        assert_eq!(p.seed_count(100), 1);
        assert_eq!(p.seed_count(1), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = ring_lattice(50, 2);
        assert!(run_sir(&g, &params(0.25, 0.1, 0.01, 0), &[50]).is_err());
        assert!(run_sir(&g, &params(1.5, 0.1, 0.01, 0), &[]).is_err());
        assert!(run_sir(&g, &params(0.25, 0.1, 0.0, 0), &[]).is_err());
        let everyone: Vec<usize> = (0..50).collect();
        assert!(run_sir(&g, &params(0.25, 0.1, 0.01, 0), &everyone).is_err());
        assert!(run_sir(&Graph::empty(), &params(0.25, 0.1, 0.01, 0), &[]).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = ring_lattice(400, 4);
        let p = params(0.25, 0.1, 0.01, 42);
        assert_eq!(run_sir(&g, &p, &[5, 6]).unwrap(), run_sir(&g, &p, &[5, 6]).unwrap());
    }

    #[test]
    fn conservation_and_causality_hold_along_trace() {
        let g = ring_lattice(500, 3);
        let vaccinated: Vec<usize> = (0..500).step_by(7).collect();
        for seed in 0..20 {
            let o = run_sir_traced(&g, &params(0.4, 0.1, 0.02, seed), &vaccinated).unwrap();
            let t = o.trace.as_ref().unwrap();
            assert_eq!(t.counts.len(), o.duration_steps + 1);
            for c in &t.counts {
                assert_eq!(c.susceptible + c.infectious + c.recovered + c.vaccinated, 500);
                assert_eq!(c.vaccinated, vaccinated.len());
            }
            assert_eq!(t.counts.last().unwrap().infectious, 0);
            assert_eq!(o.n_ever_infected, o.n_seeds + t.infections.len());
            let mut infected_at = vec![None; 500];
            for &s in &t.seeds {
                infected_at[s] = Some(0);
            }
            for ev in &t.infections {
                assert!(g.has_edge(ev.infector, ev.infectee));
                assert!(!vaccinated.contains(&ev.infectee));
                assert!(infected_at[ev.infectee].is_none(), "double infection");
                let since = infected_at[ev.infector].expect("infector was infected");
                assert!(since < ev.step);
                infected_at[ev.infectee] = Some(ev.step);
            }
            assert!(o.cumulative_incidence >= o.n_seeds as f64 / 500.0);
        }
    }

    #[test]
    fn r0_is_mean_seed_ratio() {
        let o = SirOutcome {
            cumulative_incidence: 0.5,
            n_nodes: 100,
            n_seeds: 5,
            n_ever_infected: 50,
            seed_caused_infections: 10,
            duration_steps: 30,
            trace: None,
        };
        assert_eq!(estimate_r0(&[o]).unwrap(), 2.0);
        assert!(estimate_r0(&[]).is_err());

        let g = ring_lattice(300, 3);
        let runs: Vec<_> = (0..20)
            .map(|s| run_sir(&g, &params(0.0, 0.1, 0.01, s), &[]).unwrap())
            .collect();
        assert_eq!(estimate_r0(&runs).unwrap(), 0.0);
    }

    #[test]
    fn incidence_monotone_in_beta_and_gamma() {
        let g = ring_lattice(300, 3);
        let mean = |beta: f64, gamma: f64| -> (f64, f64) {
            let xs: Vec<f64> = (0..500)
                .map(|s| {
                    run_sir(&g, &params(beta, gamma, 0.01, 1000 + s), &[])
                        .unwrap()
                        .cumulative_incidence
                })
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (m, (var / xs.len() as f64).sqrt())
        };
        let levels: Vec<(f64, f64)> = [0.1, 0.25, 0.5].iter().map(|&b| mean(b, 0.1)).collect();
        for w in levels.windows(2) {
            assert!(w[1].0 + 2.0 * (w[0].1 + w[1].1) >= w[0].0, "{levels:?}");
        }
        let (slow, fast) = (mean(0.25, 0.05), mean(0.25, 0.3));
        assert!(slow.0 + 2.0 * (slow.1 + fast.1) >= fast.0);
    }
}
