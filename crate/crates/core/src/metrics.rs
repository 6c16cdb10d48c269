//! Village-level network characteristics, degree mixing, betweenness.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{largest_component_fraction, Graph};

/// Population mean, population SD and median of the degree sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeStats {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
}

pub fn degree_stats(g: &Graph) -> Result<DegreeStats> {
    let n = g.n_nodes();
    if n == 0 {
        return Err(Error::GraphTooSmall("degree statistics need at least one node".into()));
    }
    let mut degrees = g.degrees();
    let mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    let var = degrees
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    degrees.sort_unstable();
    let median = if n % 2 == 1 {
        degrees[n / 2] as f64
    } else {
        (degrees[n / 2 - 1] + degrees[n / 2]) as f64 / 2.0
    };
    Ok(DegreeStats {
        mean,
        sd: var.sqrt(),
        median,
    })
}

pub fn density(g: &Graph) -> Result<f64> {
    let n = g.n_nodes();
    if n < 2 {
        return Err(Error::GraphTooSmall("density needs at least two nodes".into()));
    }
    Ok(2.0 * g.n_edges() as f64 / (n as f64 * (n as f64 - 1.0)))
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Degree assortativity over directed edge stubs.
///
/// Every undirected edge contributes both orientations, so the two stub
/// marginals coincide and the coefficient is
/// `(S·Σjk - (Σk)^2) / (S·Σk^2 - (Σk)^2)` over the `S = 2m` stubs. The sums
/// are exact integers; `None` when all edge ends share one degree.
pub fn assortativity(g: &Graph) -> Result<Option<f64>> {
    let m = g.n_edges();
    if m == 0 {
        return Err(Error::GraphTooSmall("assortativity needs at least one edge".into()));
    }
    let deg = g.degrees();
    let (mut s1, mut s2, mut sxy) = (0i128, 0i128, 0i128);
    for (u, v) in g.edges() {
        let (a, b) = (deg[u] as i128, deg[v] as i128);
        s1 += a + b;
        s2 += a * a + b * b;
        sxy += 2 * a * b;
    }
    let stubs = 2 * m as i128;
    let num = stubs * sxy - s1 * s1;
    let den = stubs * s2 - s1 * s1;
    if den == 0 {
        return Ok(None);
    }
    Ok(Some((num as f64 / den as f64).clamp(-1.0, 1.0)))
}

/// Sources are processed in fixed-size blocks whose partial sums are added
/// in block order, so output does not depend on the thread count.
const BETWEENNESS_BLOCK: usize = 32;

/// Unnormalized betweenness for every node over unordered pairs `{s, t}`
/// (endpoints excluded). One BFS per source, dependency accumulation on
/// the way back.
pub fn betweenness_all(g: &Graph) -> Vec<f64> {
    let n = g.n_nodes();
    if n < 3 {
        return vec![0.0; n];
    }
    let blocks: Vec<Vec<f64>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(BETWEENNESS_BLOCK)
        .map(|sources| {
            let mut ws = BrandesWorkspace::new(n);
            let mut acc = vec![0.0; n];
            for &s in sources {
                ws.accumulate(g, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for block in blocks {
        for (t, b) in total.iter_mut().zip(block) {
            *t += b;
        }
    }
    // each unordered pair was counted from both ends
    for t in &mut total {
        *t /= 2.0;
    }
    total
}

struct BrandesWorkspace {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BrandesWorkspace {
    fn new(n: usize) -> Self {
        BrandesWorkspace {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    fn accumulate(&mut self, g: &Graph, s: usize, acc: &mut [f64]) {
        for &v in &self.order {
            self.dist[v] = -1;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let dv = self.dist[v];
            for &w in g.neighbors(v) {
                if self.dist[w] < 0 {
                    self.dist[w] = dv + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == dv + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
        // predecessors of w are the neighbors one step closer to s
        for &w in self.order.iter().rev() {
            let dw = self.dist[w];
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in g.neighbors(w) {
                if self.dist[v] == dw - 1 {
                    self.delta[v] += self.sigma[v] * coeff;
                }
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Edge fractions keyed by unordered endpoint-degree pairs `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DegreeMixingMatrix {
    counts: BTreeMap<(usize, usize), u64>,
    n_edges: u64,
    max_degree: usize,
}

impl DegreeMixingMatrix {
    pub fn from_graph(g: &Graph) -> Result<Self> {
        if g.n_edges() == 0 {
            return Err(Error::GraphTooSmall("degree mixing matrix needs an edge".into()));
        }
        let deg = g.degrees();
        let mut counts = BTreeMap::new();
        for (u, v) in g.edges() {
            *counts.entry(pair_key(deg[u], deg[v])).or_insert(0) += 1;
        }
        Ok(Self::from_counts(counts))
    }

    /// Zero counts are dropped.
    pub fn from_counts(counts: BTreeMap<(usize, usize), u64>) -> Self {
        let counts: BTreeMap<(usize, usize), u64> = counts
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .map(|((a, b), c)| (pair_key(a, b), c))
            .fold(BTreeMap::new(), |mut acc, (k, c)| {
                *acc.entry(k).or_insert(0) += c;
                acc
            });
        let n_edges = counts.values().sum();
        let max_degree = counts.keys().map(|&(_, hi)| hi).max().unwrap_or(0);
        DegreeMixingMatrix {
            counts,
            n_edges,
            max_degree,
        }
    }

    /// Fraction of edges joining a degree-`a` node to a degree-`b` node.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        if self.n_edges == 0 {
            return 0.0;
        }
        self.counts.get(&pair_key(a, b)).copied().unwrap_or(0) as f64 / self.n_edges as f64
    }

    pub fn counts(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.counts
    }

    pub fn n_edges(&self) -> u64 {
        self.n_edges
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn is_empty(&self) -> bool {
        self.n_edges == 0
    }

    /// Non-zero unordered entries as `((lo, hi), fraction)`.
    pub fn fractions(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let m = self.n_edges as f64;
        self.counts.iter().map(move |(&k, &c)| (k, c as f64 / m))
    }

    /// Fraction of edge ends attached to nodes of each degree.
    pub fn edge_end_distribution(&self) -> BTreeMap<usize, f64> {
        let mut ends = BTreeMap::new();
        for (&(a, b), &c) in &self.counts {
            *ends.entry(a).or_insert(0u64) += c;
            *ends.entry(b).or_insert(0u64) += c;
        }
        let total = 2.0 * self.n_edges as f64;
        ends.into_iter().map(|(k, c)| (k, c as f64 / total)).collect()
    }
}

pub(crate) fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn degree_mixing_matrix(g: &Graph) -> Result<DegreeMixingMatrix> {
    DegreeMixingMatrix::from_graph(g)
}

/// Pearson correlation of average-tie ranks.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "rank correlation of unequal lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter("rank correlation needs two values".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// The seven regression predictors, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    Density,
    Size,
    MeanDegree,
    SdDegree,
    Assortativity,
    LccFraction,
    MeanBetweenness,
}

impl Characteristic {
    pub const ALL: [Characteristic; 7] = [
        Characteristic::Density,
        Characteristic::Size,
        Characteristic::MeanDegree,
        Characteristic::SdDegree,
        Characteristic::Assortativity,
        Characteristic::LccFraction,
        Characteristic::MeanBetweenness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Characteristic::Density => "density",
            Characteristic::Size => "size",
            Characteristic::MeanDegree => "mean_degree",
            Characteristic::SdDegree => "sd_degree",
            Characteristic::Assortativity => "assortativity",
            Characteristic::LccFraction => "lcc_fraction",
            Characteristic::MeanBetweenness => "mean_betweenness",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VillageCharacteristics {
    pub n_nodes: usize,
    pub mean_degree: f64,
    pub sd_degree: f64,
    pub median_degree: f64,
    pub density: f64,
    /// `None` when endpoint degrees have zero variance.
    pub assortativity: Option<f64>,
    /// Mean betweenness divided by the number of pairs excluding the node.
    pub mean_betweenness: f64,
    pub lcc_fraction: f64,
}

impl VillageCharacteristics {
    pub fn get(&self, c: Characteristic) -> Option<f64> {
        match c {
            Characteristic::Density => Some(self.density),
            Characteristic::Size => Some(self.n_nodes as f64),
            Characteristic::MeanDegree => Some(self.mean_degree),
            Characteristic::SdDegree => Some(self.sd_degree),
            Characteristic::Assortativity => self.assortativity,
            Characteristic::LccFraction => Some(self.lcc_fraction),
            Characteristic::MeanBetweenness => Some(self.mean_betweenness),
        }
    }

    pub const CSV_HEADER: [&'static str; 8] = [
        "Number of network members",
        "Mean degree of network members",
        "Median degree of network members",
        "Standard deviation of degree",
        "Network density",
        "Degree-assortativity",
        "Mean betweenness centrality",
        "Percentage of nodes in the largest connected component",
    ];

    pub fn csv_fields(&self) -> [String; 8] {
        [
            self.n_nodes.to_string(),
            self.mean_degree.to_string(),
            self.median_degree.to_string(),
            self.sd_degree.to_string(),
            self.density.to_string(),
            self.assortativity
                .map_or_else(|| "NA".to_string(), |a| a.to_string()),
            self.mean_betweenness.to_string(),
            (100.0 * self.lcc_fraction).to_string(),
        ]
    }
}

pub fn mean_normalized_betweenness(g: &Graph, scores: &[f64]) -> f64 {
    let n = g.n_nodes();
    if n < 3 {
        return 0.0;
    }
    let pairs = (n as f64 - 1.0) * (n as f64 - 2.0) / 2.0;
    scores.iter().sum::<f64>() / n as f64 / pairs
}

pub fn village_characteristics(g: &Graph) -> Result<VillageCharacteristics> {
    if g.n_nodes() < 2 || g.n_edges() == 0 {
        return Err(Error::GraphTooSmall(
            "village characteristics need two nodes and an edge".into(),
        ));
    }
    let stats = degree_stats(g)?;
    let scores = betweenness_all(g);
    Ok(VillageCharacteristics {
        n_nodes: g.n_nodes(),
        mean_degree: stats.mean,
        sd_degree: stats.sd,
        median_degree: stats.median,
        density: density(g)?,
        assortativity: assortativity(g)?,
        mean_betweenness: mean_normalized_betweenness(g, &scores),
        lcc_fraction: largest_component_fraction(g),
    })
}

/// Compute only the requested characteristics; slots not requested are `None`.
/// An undefined assortativity is also `None`.
pub fn selected_characteristics(
    g: &Graph,
    wanted: &[Characteristic],
) -> Result<[Option<f64>; 7]> {
    let mut out = [None; 7];
    let stats = degree_stats(g)?;
    for &c in wanted {
        out[c.index()] = match c {
            Characteristic::Density => Some(density(g)?),
            Characteristic::Size => Some(g.n_nodes() as f64),
            Characteristic::MeanDegree => Some(stats.mean),
            Characteristic::SdDegree => Some(stats.sd),
            Characteristic::Assortativity => {
                if g.n_edges() == 0 {
                    None
                } else {
                    assortativity(g)?
                }
            }
            Characteristic::LccFraction => Some(largest_component_fraction(g)),
            Characteristic::MeanBetweenness => {
                Some(mean_normalized_betweenness(g, &betweenness_all(g)))
            }
        };
    }
    Ok(out)
}

/// Pairwise Pearson correlations across villages, indexed by
/// [`Characteristic::index`]. Entries touching a constant column are `None`.
pub fn characteristic_correlations(
    rows: &[VillageCharacteristics],
) -> Result<[[Option<f64>; 7]; 7]> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("correlations need at least two villages".into()));
    }
    let columns: Vec<Option<Vec<f64>>> = Characteristic::ALL
        .iter()
        .map(|&c| rows.iter().map(|r| r.get(c)).collect())
        .collect();
    let mut out = [[None; 7]; 7];
    for i in 0..7 {
        for j in 0..7 {
            if let (Some(x), Some(y)) = (&columns[i], &columns[j]) {
                out[i][j] = pearson(x, y);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edges(leaves + 1, &edges).unwrap()
    }

    fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    /// Explicitly enumerate every shortest path between every unordered pair.
    fn brute_force_betweenness(g: &Graph) -> Vec<f64> {
        let n = g.n_nodes();
        let mut out = vec![0.0; n];
        for s in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in g.neighbors(u) {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            for t in s + 1..n {
                if dist[t] == usize::MAX {
                    continue;
                }
                let mut paths: Vec<Vec<usize>> = Vec::new();
                let mut stack = vec![vec![t]];
                while let Some(p) = stack.pop() {
                    let head = *p.last().unwrap();
                    if head == s {
                        paths.push(p);
                        continue;
                    }
                    for &v in g.neighbors(head) {
                        if dist[v] + 1 == dist[head] {
                            let mut next = p.clone();
                            next.push(v);
                            stack.push(next);
                        }
                    }
                }
                let total = paths.len() as f64;
                for p in &paths {
                    for &v in &p[1..p.len() - 1] {
                        out[v] += 1.0 / total;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn degree_stats_examples() {
        let tri = complete(3);
        assert_eq!(
            degree_stats(&tri).unwrap(),
            DegreeStats { mean: 2.0, sd: 0.0, median: 2.0 }
        );
        let s = degree_stats(&star(4)).unwrap();
        assert!((s.mean - 1.6).abs() < 1e-12);
        assert!((s.sd - 1.2).abs() < 1e-12);
        assert_eq!(s.median, 1.0);
        let p = degree_stats(&path(4)).unwrap();
        assert_eq!(p.median, 1.5);
        assert!(degree_stats(&Graph::empty()).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&complete(4)).unwrap(), 1.0);
        assert!((density(&path(3)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(density(&Graph::from_edges(1, &[]).unwrap()).is_err());
    }

    #[test]
    fn assortativity_examples() {
        assert_eq!(assortativity(&path(4)).unwrap(), Some(-0.5));
        assert_eq!(assortativity(&complete(5)).unwrap(), None);
        let cycle = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(assortativity(&cycle).unwrap(), None);
        assert!(assortativity(&Graph::from_edges(3, &[]).unwrap()).is_err());
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness_all(&path(3)), vec![0.0, 1.0, 0.0]);
        let b = betweenness_all(&star(4));
        assert_eq!(b[0], 6.0);
        assert!(b[1..].iter().all(|&x| x == 0.0));
        let p5 = betweenness_all(&path(5));
        assert_eq!(p5, vec![0.0, 3.0, 4.0, 3.0, 0.0]);
    }

    #[test]
    fn dmm_examples() {
        let tri = degree_mixing_matrix(&complete(3)).unwrap();
        assert_eq!(tri.entry(2, 2), 1.0);
        assert_eq!(tri.counts().len(), 1);
        let p3 = degree_mixing_matrix(&path(3)).unwrap();
        assert_eq!(p3.entry(1, 2), 1.0);
        assert_eq!(p3.entry(2, 1), 1.0);
        let s = degree_mixing_matrix(&star(4)).unwrap();
        assert_eq!(s.entry(4, 1), 1.0);
        assert_eq!(s.max_degree(), 4);
        assert!(degree_mixing_matrix(&Graph::from_edges(2, &[]).unwrap()).is_err());
    }

    #[test]
    fn characteristics_examples() {
        let k4 = village_characteristics(&complete(4)).unwrap();
        assert_eq!(k4.density, 1.0);
        assert_eq!(k4.mean_degree, 3.0);
        assert_eq!(k4.sd_degree, 0.0);
        assert_eq!(k4.lcc_fraction, 1.0);
        assert_eq!(k4.assortativity, None);
        let two = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let c = village_characteristics(&two).unwrap();
        assert_eq!(c.lcc_fraction, 0.5);
        assert_eq!(c.mean_degree, 2.0);
        let sel = selected_characteristics(&two, &[Characteristic::MeanDegree]).unwrap();
        assert_eq!(sel[Characteristic::MeanDegree.index()], Some(2.0));
        assert_eq!(sel[Characteristic::Density.index()], None);
    }

    #[test]
    fn rank_correlation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rank_correlation(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap(), Some(1.0));
        assert_eq!(rank_correlation(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        let g = star(4);
        let deg: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
        let r = rank_correlation(&betweenness_all(&g), &deg).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(rank_correlation(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), None);
        assert!(rank_correlation(&[1.0], &[1.0]).is_err());
        assert!(rank_correlation(&[1.0, 2.0], &[1.0]).is_err());
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn correlation_matrix_flags_constant_columns() {
        let row = village_characteristics(&complete(4)).unwrap();
        let corr = characteristic_correlations(&[row, row]).unwrap();
        assert!(corr.iter().flatten().all(Option::is_none));

        let a = village_characteristics(&path(5)).unwrap();
        let b = village_characteristics(&star(6)).unwrap();
        let c = village_characteristics(&complete(3)).unwrap();
        let corr = characteristic_correlations(&[a, b, c]).unwrap();
        // density is an exact affine function of mean degree at fixed n only,
        // so check the always-collinear pair: a column with itself.
        let md = Characteristic::MeanDegree.index();
        assert!((corr[md][md].unwrap() - 1.0).abs() < 1e-12);
        assert!(characteristic_correlations(&[a]).is_err());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (3usize..=max_n, 0.05f64..0.6, any::<u64>()).prop_map(|(n, p, seed)| {
            let mut rng = crate::rngcore::stream_from_seed(seed);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.bernoulli(p) {
                        edges.push((i, j));
                    }
                }
            }
            Graph::from_edges(n, &edges).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn betweenness_matches_enumeration(g in arb_graph(18)) {
            let fast = betweenness_all(&g);
            let slow = brute_force_betweenness(&g);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            }
            for v in 0..g.n_nodes() {
                if g.degree(v) <= 1 {
                    prop_assert_eq!(fast[v], 0.0);
                }
            }
            // every shortest path of length d has d - 1 interior nodes
            let mut interior = 0.0;
            for s in 0..g.n_nodes() {
                let mut dist = vec![usize::MAX; g.n_nodes()];
                dist[s] = 0;
                let mut q = VecDeque::from([s]);
                while let Some(u) = q.pop_front() {
                    for &v in g.neighbors(u) {
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            q.push_back(v);
                        }
                    }
                }
                interior += dist[s + 1..].iter().filter(|&&d| d != usize::MAX).map(|&d| d as f64 - 1.0).sum::<f64>();
            }
            prop_assert!((fast.iter().sum::<f64>() - interior).abs() < 1e-7);
        }

        #[test]
        fn assortativity_matches_stub_pearson(g in arb_graph(25)) {
            prop_assume!(g.n_edges() > 0);
            let deg = g.degrees();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (u, v) in g.edges() {
                xs.push(deg[u] as f64); ys.push(deg[v] as f64);
                xs.push(deg[v] as f64); ys.push(deg[u] as f64);
            }
            let direct = pearson(&xs, &ys);
            match (assortativity(&g).unwrap(), direct) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (None, None) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn dmm_is_a_distribution(g in arb_graph(25)) {
            prop_assume!(g.n_edges() > 0);
            let dmm = degree_mixing_matrix(&g).unwrap();
            let total: f64 = dmm.fractions().map(|(_, f)| f).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            // marginal edge-end distribution matches the graph's
            let mut ends: BTreeMap<usize, usize> = BTreeMap::new();
            for (u, v) in g.edges() {
                *ends.entry(g.degree(u)).or_insert(0) += 1;
                *ends.entry(g.degree(v)).or_insert(0) += 1;
            }
            let marginal = dmm.edge_end_distribution();
            prop_assert_eq!(marginal.len(), ends.len());
            for (k, c) in ends {
                let want = c as f64 / (2 * g.n_edges()) as f64;
                prop_assert!((marginal[&k] - want).abs() < 1e-12);
            }
        }

        #[test]
        fn metrics_invariant_under_relabeling(g in arb_graph(20), seed in any::<u64>()) {
            prop_assume!(g.n_edges() > 0);
            let n = g.n_nodes();
            let mut perm: Vec<usize> = (0..n).collect();
            crate::rngcore::stream_from_seed(seed).shuffle(&mut perm);
            let edges: Vec<_> = g.edges().map(|(u, v)| (perm[u], perm[v])).collect();
            let h = Graph::from_edges(n, &edges).unwrap();
            let (a, b) = (village_characteristics(&g).unwrap(), village_characteristics(&h).unwrap());
            prop_assert_eq!(a.n_nodes, b.n_nodes);
            prop_assert!((a.mean_degree - b.mean_degree).abs() < 1e-12);
            prop_assert!((a.sd_degree - b.sd_degree).abs() < 1e-12);
            prop_assert!((a.mean_betweenness - b.mean_betweenness).abs() < 1e-12);
            prop_assert_eq!(a.lcc_fraction, b.lcc_fraction);
            match (a.assortativity, b.assortativity) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
            prop_assert_eq!(degree_mixing_matrix(&g).unwrap(), degree_mixing_matrix(&h).unwrap());
            let bg = betweenness_all(&g);
            let bh = betweenness_all(&h);
            for v in 0..n {
                prop_assert!((bg[v] - bh[perm[v]]).abs() < 1e-9);
            }
        }
    }
}
