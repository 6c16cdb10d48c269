//! Undirected simple graphs and multiplex edge-list ingestion.
//!
//! Edge-list format, one tie per line:
//!
//! ```text
//! # comment
//! node_a node_b [multiplexity]
//! ```
//!
//! The multiplexity (1..=12 interaction types) defaults to 12 when absent.
//! Nodes without any tie are declared with a `#@node <id>` line, which other
//! readers treat as an ordinary comment.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAX_MULTIPLEXITY: u8 = 12;
const NODE_DIRECTIVE: &str = "#@node";

/// One undirected tie between two respondents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieRecord {
    pub a: String,
    pub b: String,
    pub multiplexity: u8,
}

/// Parsed ties with duplicates merged (max multiplexity wins).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MultiplexEdgeList {
    pub records: Vec<TieRecord>,
    /// Every node id seen, in first-appearance order.
    pub nodes: Vec<String>,
}

impl MultiplexEdgeList {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Build from in-memory records, merging duplicates.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, u8)>,
    {
        let mut builder = EdgeListBuilder::default();
        for (a, b, m) in records {
            if !(1..=MAX_MULTIPLEXITY).contains(&m) {
                return Err(Error::InvalidParameter(format!(
                    "multiplexity {m} outside 1..=12"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop on node {a:?}")));
            }
            builder.add(a, b, m);
        }
        Ok(builder.finish())
    }
}

#[derive(Default)]
struct EdgeListBuilder {
    nodes: Vec<String>,
    seen_nodes: HashMap<String, usize>,
    records: Vec<TieRecord>,
    pair_slot: HashMap<(usize, usize), usize>,
}

impl EdgeListBuilder {
    fn node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.seen_nodes.get(id) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(id.to_string());
        self.seen_nodes.insert(id.to_string(), i);
        i
    }

    fn add(&mut self, a: String, b: String, m: u8) {
        let ia = self.node(&a);
        let ib = self.node(&b);
        let key = (ia.min(ib), ia.max(ib));
        match self.pair_slot.get(&key) {
            Some(&slot) => {
                let rec = &mut self.records[slot];
                rec.multiplexity = rec.multiplexity.max(m);
            }
            None => {
                self.pair_slot.insert(key, self.records.len());
                self.records.push(TieRecord {
                    a,
                    b,
                    multiplexity: m,
                });
            }
        }
    }

    fn finish(self) -> MultiplexEdgeList {
        MultiplexEdgeList {
            records: self.records,
            nodes: self.nodes,
        }
    }
}

pub fn parse_edge_list(path: impl AsRef<Path>) -> Result<MultiplexEdgeList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list_str(&text, path)
}

/// Parse edge-list text; `origin` is only used in error messages.
pub fn parse_edge_list_str(text: &str, origin: impl AsRef<Path>) -> Result<MultiplexEdgeList> {
    let origin = origin.as_ref();
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut builder = EdgeListBuilder::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(NODE_DIRECTIVE) {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 1 || !rest.starts_with(char::is_whitespace) {
                return Err(err(lineno, format!("expected `{NODE_DIRECTIVE} <id>`")));
            }
            builder.node(fields[0]);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let multiplexity = match fields.len() {
            2 => MAX_MULTIPLEXITY,
            3 => {
                let m: u8 = fields[2].parse().map_err(|_| {
                    err(lineno, format!("multiplexity {:?} is not an integer", fields[2]))
                })?;
                if !(1..=MAX_MULTIPLEXITY).contains(&m) {
                    return Err(err(lineno, format!("multiplexity {m} outside 1..=12")));
                }
                m
            }
            n => return Err(err(lineno, format!("expected 2 or 3 fields, found {n}"))),
        };
        if fields[0] == fields[1] {
            return Err(err(lineno, format!("self-loop on node {:?}", fields[0])));
        }
        builder.add(fields[0].to_string(), fields[1].to_string(), multiplexity);
    }
    Ok(builder.finish())
}

/// Tie counts per multiplexity level; index 0 holds multiplexity 1.
pub fn multiplexity_histogram(edges: &MultiplexEdgeList) -> [usize; 12] {
    let mut hist = [0usize; 12];
    for rec in &edges.records {
        hist[usize::from(rec.multiplexity) - 1] += 1;
    }
    hist
}

/// Keep ties reported on at least `min_multiplexity` interaction types.
pub fn build_graph(edges: &MultiplexEdgeList, min_multiplexity: u8) -> Result<Graph> {
    if !(1..=MAX_MULTIPLEXITY).contains(&min_multiplexity) {
        return Err(Error::InvalidParameter(format!(
            "tie threshold {min_multiplexity} outside 1..=12"
        )));
    }
    let index: HashMap<&str, usize> = edges
        .nodes
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let kept: Vec<(usize, usize)> = edges
        .records
        .iter()
        .filter(|r| r.multiplexity >= min_multiplexity)
        .map(|r| (index[r.a.as_str()], index[r.b.as_str()]))
        .collect();
    Graph::with_ids(edges.nodes.clone(), &kept)
}

/// Undirected simple graph over dense indices `0..n` with opaque string ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<usize>>,
    n_edges: usize,
}

impl Graph {
    pub fn empty() -> Self {
        Graph {
            ids: Vec::new(),
            index: HashMap::new(),
            adj: Vec::new(),
            n_edges: 0,
        }
    }

    /// Graph on nodes `0..n` whose ids are the decimal indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_ids((0..n).map(|i| i.to_string()).collect(), edges)
    }

    /// Duplicate edges are merged; self-loops and out-of-range endpoints are errors.
    pub fn with_ids(ids: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = ids.len();
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate node id {id:?}")));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::NodeOutOfRange(u));
            }
            if v >= n {
                return Err(Error::NodeOutOfRange(v));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop on node {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut total = 0;
        for nbrs in &mut adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            total += nbrs.len();
        }
        Ok(Graph {
            ids,
            index,
            adj,
            n_edges: total / 2,
        })
    }

    /// Same node set and ids, different edges.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_ids(self.ids.clone(), edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Sorted neighbor indices.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Component label per node; labels are dense and ordered by first node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_nodes();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut buf = String::new();
        for (i, nbrs) in self.adj.iter().enumerate() {
            if nbrs.is_empty() {
                let _ = writeln!(buf, "{NODE_DIRECTIVE} {}", self.ids[i]);
            }
        }
        for (u, v) in self.edges() {
            let _ = writeln!(buf, "{} {}", self.ids[u], self.ids[v]);
        }
        w.write_all(buf.as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_edge_list(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Size of the largest connected component over the node count; 0 when empty.
pub fn largest_component_fraction(g: &Graph) -> f64 {
    let n = g.n_nodes();
    if n == 0 {
        return 0.0;
    }
    let labels = g.components();
    let mut sizes = vec![0usize; labels.iter().max().map_or(0, |m| m + 1)];
    for l in labels {
        sizes[l] += 1;
    }
    *sizes.iter().max().unwrap_or(&0) as f64 / n as f64
}

/// A named village contact network.
#[derive(Debug, Clone)]
pub struct Village {
    pub id: String,
    pub graph: Graph,
}

pub fn village_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Parse and threshold one village file.
pub fn load_village(path: impl AsRef<Path>, min_multiplexity: u8) -> Result<Village> {
    let path = path.as_ref();
    let edges = parse_edge_list(path)?;
    Ok(Village {
        id: village_id_from_path(path),
        graph: build_graph(&edges, min_multiplexity)?,
    })
}

/// Load villages sorted lexicographically by file name.
pub fn load_villages(paths: &[PathBuf], min_multiplexity: u8) -> Result<Vec<Village>> {
    let mut sorted: Vec<&PathBuf> = paths.iter().collect();
    sorted.sort_by(|a, b| a.file_name().cmp(&b.file_name()).then(a.cmp(b)));
    sorted
        .into_iter()
        .map(|p| load_village(p, min_multiplexity))
        .collect()
}
