//! Stand-in village networks with a right-skewed, assortative degree
//! structure, for runs where no surveyed edge lists are available.
//!
//! Degrees are `1 + NegativeBinomial`, drawn as a gamma-Poisson mixture.
//! Stubs are sorted by `ln(degree) + noise` and adjacent stubs are paired,
//! so smaller noise gives stronger degree assortativity. Self-loops and
//! repeated pairs are dropped.

use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rngcore::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VillageParams {
    pub n_nodes: usize,
    pub mean_degree: f64,
    pub sd_degree: f64,
    /// Standard deviation of the log-degree noise used when pairing stubs.
    pub mixing_noise: f64,
}

impl Default for VillageParams {
    fn default() -> Self {
        VillageParams {
            n_nodes: 900,
            mean_degree: 8.5,
            sd_degree: 6.0,
            mixing_noise: 0.8,
        }
    }
}

impl VillageParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::InvalidParameter("a village needs at least 2 nodes".into()));
        }
        if !(self.mean_degree > 1.0) || !self.mean_degree.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mean degree {} must exceed 1",
                self.mean_degree
            )));
        }
        if !(self.sd_degree >= 0.0) || !(self.mixing_noise >= 0.0) {
            return Err(Error::InvalidParameter("sd_degree and mixing_noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Degree sequence with every degree at least 1.
pub fn degree_sequence(params: &VillageParams, key: &StreamKey) -> Result<Vec<usize>> {
    params.validate()?;
    let mut rng = key.with_str("phase", "degrees").stream();
    let mu = params.mean_degree - 1.0;
    let var = params.sd_degree * params.sd_degree;
    let degrees = if var > mu {
        let shape = mu * mu / (var - mu);
        let gamma = Gamma::new(shape, mu / shape)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (0..params.n_nodes)
            .map(|_| {
                let lambda: f64 = gamma.sample(&mut rng);
                1 + poisson_draw(lambda, &mut rng)
            })
            .collect()
    } else {
        (0..params.n_nodes).map(|_| 1 + poisson_draw(mu, &mut rng)).collect()
    };
    Ok(degrees)
}

fn poisson_draw(lambda: f64, rng: &mut crate::rngcore::Stream) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let p = Poisson::new(lambda).expect("positive rate");
    let x: f64 = p.sample(rng);
    x as usize
}

pub fn synth_village(params: &VillageParams, key: &StreamKey) -> Result<Graph> {
    let degrees = degree_sequence(params, key)?;
    let mut rng = key.with_str("phase", "pairing").stream();
    let mut stubs: Vec<(f64, usize)> = Vec::with_capacity(degrees.iter().sum());
    for (node, &d) in degrees.iter().enumerate() {
        let base = (d as f64).ln();
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            stubs.push((base + params.mixing_noise * z, node));
        }
    }
    stubs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut edges: Vec<(usize, usize)> = stubs
        .chunks_exact(2)
        .filter(|pair| pair[0].1 != pair[1].1)
        .map(|pair| (pair[0].1.min(pair[1].1), pair[0].1.max(pair[1].1)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Graph::from_edges(params.n_nodes, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::largest_component_fraction;
    use crate::metrics::{assortativity, degree_stats};

    #[test]
    fn default_village_resembles_surveyed_ones() {
        let g = synth_village(&VillageParams::default(), &StreamKey::new(1)).unwrap();
        let stats = degree_stats(&g).unwrap();
        assert_eq!(g.n_nodes(), 900);
        assert!((7.0..10.0).contains(&stats.mean), "{stats:?}");
        assert!((4.0..8.0).contains(&stats.sd), "{stats:?}");
        let r = assortativity(&g).unwrap().unwrap();
        assert!((0.2..0.5).contains(&r), "assortativity {r}");
        assert!(largest_component_fraction(&g) > 0.85);
    }

    #[test]
    fn more_noise_means_less_assortativity() {
        let mut p = VillageParams::default();
        p.mixing_noise = 0.2;
        let tight = assortativity(&synth_village(&p, &StreamKey::new(2)).unwrap()).unwrap().unwrap();
        p.mixing_noise = 5.0;
        let loose = assortativity(&synth_village(&p, &StreamKey::new(2)).unwrap()).unwrap().unwrap();
        assert!(tight > loose + 0.2, "{tight} vs {loose}");
    }

    #[test]
    fn deterministic_and_validated() {
        let p = VillageParams { n_nodes: 200, ..Default::default() };
        let key = StreamKey::new(3).with("village", 4);
        assert_eq!(synth_village(&p, &key).unwrap(), synth_village(&p, &key).unwrap());
        assert!(synth_village(&VillageParams { mean_degree: 0.5, ..p }, &key).is_err());
        assert!(synth_village(&VillageParams { n_nodes: 1, ..p }, &key).is_err());
    }

    #[test]
    fn degrees_are_positive_with_requested_moments() {
        let p = VillageParams { n_nodes: 20_000, ..Default::default() };
        let d = degree_sequence(&p, &StreamKey::new(5)).unwrap();
        assert!(d.iter().all(|&x| x >= 1));
        let mean = d.iter().sum::<usize>() as f64 / d.len() as f64;
        let var = d.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / d.len() as f64;
        assert!((mean - 8.5).abs() < 0.2, "{mean}");
        assert!((var.sqrt() - 6.0).abs() < 0.3, "{}", var.sqrt());
    }
}
