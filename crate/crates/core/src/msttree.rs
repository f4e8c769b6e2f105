//! Correlation distances, minimal spanning trees and node-degree statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::CurrencyCode;
use crate::spectrum::CorrelationMatrix;

/// Tolerance for correlation entries slightly outside [-1, 1].
pub const CORRELATION_RANGE_TOL: f64 = 1e-10;

/// `d(A, B) = sqrt((1 - C_AB) / 2)`, a metric on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    currencies: Vec<CurrencyCode>,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and the [0, 1] range.
    pub fn from_entries(currencies: Vec<CurrencyCode>, entries: Vec<f64>) -> Result<Self> {
        let n = currencies.len();
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "{} entries for a {n} x {n} matrix",
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::EntryOutOfRange {
                    row: i,
                    col: i,
                    value: entries[i * n + i],
                });
            }
            for j in 0..n {
                let d = entries[i * n + j];
                if !(0.0..=1.0).contains(&d) {
                    return Err(Error::EntryOutOfRange {
                        row: i,
                        col: j,
                        value: d,
                    });
                }
                if d != entries[j * n + i] {
                    return Err(Error::Asymmetric((d - entries[j * n + i]).abs()));
                }
            }
        }
        Ok(DistanceMatrix {
            currencies,
            entries,
        })
    }

    pub fn currencies(&self) -> &[CurrencyCode] {
        &self.currencies
    }

    pub fn size(&self) -> usize {
        self.currencies.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    /// Applies `f` to every off-diagonal entry. `f` must map [0, 1] into [0, 1].
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<DistanceMatrix> {
        let n = self.size();
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, &d)| if k / n == k % n { 0.0 } else { f(d) })
            .collect();
        DistanceMatrix::from_entries(self.currencies.clone(), entries)
    }
}

pub fn distance_matrix(c: &CorrelationMatrix) -> Result<DistanceMatrix> {
    let n = c.size();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (c.get(i, j) + c.get(j, i));
            if !(v.abs() <= 1.0 + CORRELATION_RANGE_TOL) {
                return Err(Error::EntryOutOfRange {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            let d = ((1.0 - v.clamp(-1.0, 1.0)) / 2.0).sqrt();
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix {
        currencies: c.currencies().to_vec(),
        entries,
    })
}

/// Disjoint-set forest with path halving and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeEdge {
    /// Lexicographically smaller endpoint.
    pub a: CurrencyCode,
    pub b: CurrencyCode,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    nodes: Vec<CurrencyCode>,
    edges: Vec<TreeEdge>,
    degree: BTreeMap<CurrencyCode, usize>,
}

impl SpanningTree {
    /// Checks that `edges` form a spanning tree over `nodes`.
    pub fn from_edges(nodes: Vec<CurrencyCode>, edges: Vec<TreeEdge>) -> Result<Self> {
        let index: BTreeMap<CurrencyCode, usize> =
            nodes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::MalformedTree("duplicate node".into()));
        }
        if nodes.len() < 2 {
            return Err(Error::MalformedTree("a tree needs at least two nodes".into()));
        }
        if edges.len() != nodes.len() - 1 {
            return Err(Error::MalformedTree(format!(
                "{} edges for {} nodes",
                edges.len(),
                nodes.len()
            )));
        }
        let mut uf = UnionFind::new(nodes.len());
        let mut degree: BTreeMap<CurrencyCode, usize> = nodes.iter().map(|c| (*c, 0)).collect();
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            let (a, b) = if e.a <= e.b { (e.a, e.b) } else { (e.b, e.a) };
            let (ia, ib) = match (index.get(&a), index.get(&b)) {
                (Some(&ia), Some(&ib)) => (ia, ib),
                _ => return Err(Error::MalformedTree(format!("edge {a}-{b} has unknown endpoint"))),
            };
            if ia == ib || !uf.union(ia, ib) {
                return Err(Error::MalformedTree(format!("edge {a}-{b} closes a cycle")));
            }
            *degree.get_mut(&a).unwrap() += 1;
            *degree.get_mut(&b).unwrap() += 1;
            normalized.push(TreeEdge {
                a,
                b,
                distance: e.distance,
            });
        }
        Ok(SpanningTree {
            nodes,
            edges: normalized,
            degree,
        })
    }

    pub fn nodes(&self) -> &[CurrencyCode] {
        &self.nodes
    }

    /// Edges in the order they were added.
    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn degree(&self) -> &BTreeMap<CurrencyCode, usize> {
        &self.degree
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }

    pub fn mean_degree(&self) -> f64 {
        self.degree.values().sum::<usize>() as f64 / self.nodes.len() as f64
    }

    /// Edges sorted by endpoint codes.
    pub fn sorted_edges(&self) -> Vec<TreeEdge> {
        let mut e = self.edges.clone();
        e.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));
        e
    }
}

/// Kruskal's algorithm: repeatedly join the closest pair of nodes that are not
/// yet connected. Ties are broken by the endpoint codes.
pub fn build_mst(d: &DistanceMatrix) -> Result<SpanningTree> {
    let n = d.size();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "a spanning tree needs at least two nodes".into(),
        ));
    }
    let codes = d.currencies();
    let mut candidates: Vec<(f64, CurrencyCode, CurrencyCode, usize, usize)> =
        Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b, ia, ib) = if codes[i] <= codes[j] {
                (codes[i], codes[j], i, j)
            } else {
                (codes[j], codes[i], j, i)
            };
            candidates.push((d.get(i, j), a, b, ia, ib));
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| x.1.cmp(&y.1))
            .then_with(|| x.2.cmp(&y.2))
    });

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (dist, a, b, ia, ib) in candidates {
        if uf.union(ia, ib) {
            edges.push(TreeEdge {
                a,
                b,
                distance: dist,
            });
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    SpanningTree::from_edges(codes.to_vec(), edges)
}

/// Degree counts `N'(K)` and the cumulative share `F(K)` of nodes with K or more legs.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    pub nodes: usize,
    pub counts: BTreeMap<usize, usize>,
    /// Defined at every K in 1..=k_max, occupied or not.
    pub cumulative: BTreeMap<usize, f64>,
    pub k_max: usize,
}

impl DegreeDistribution {
    pub fn from_degrees(degrees: &[usize]) -> Result<Self> {
        if degrees.is_empty() || degrees.contains(&0) {
            return Err(Error::InvalidParameter(
                "degree sequence must be non-empty with positive entries".into(),
            ));
        }
        let n = degrees.len();
        let mut counts = BTreeMap::new();
        for &k in degrees {
            *counts.entry(k).or_insert(0) += 1;
        }
        let k_max = *counts.keys().next_back().unwrap();
        let mut cumulative = BTreeMap::new();
        let mut at_least = 0usize;
        for k in (1..=k_max).rev() {
            at_least += counts.get(&k).copied().unwrap_or(0);
            cumulative.insert(k, at_least as f64 / n as f64);
        }
        Ok(DegreeDistribution {
            nodes: n,
            counts,
            cumulative,
            k_max,
        })
    }

    pub fn count(&self, k: usize) -> usize {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    pub fn f(&self, k: usize) -> f64 {
        self.cumulative.get(&k).copied().unwrap_or(0.0)
    }

    /// `(K, F(K))` at occupied K only.
    pub fn occupied(&self) -> Vec<(f64, f64)> {
        self.counts
            .keys()
            .map(|&k| (k as f64, self.cumulative[&k]))
            .collect()
    }
}

pub fn degree_distribution(tree: &SpanningTree) -> DegreeDistribution {
    let degrees: Vec<usize> = tree.degree().values().copied().collect();
    DegreeDistribution::from_degrees(&degrees).expect("tree degrees are positive")
}

/// Degree distribution CSV: `K,N_prime,F` for K = 1..=k_max.
pub fn write_degree_distribution<W: Write>(dist: &DegreeDistribution, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["K", "N_prime", "F"])?;
    for (&k, &f) in &dist.cumulative {
        w.write_record([k.to_string(), dist.count(k).to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Dot,
    EdgeCsv,
}

impl FromStr for TreeFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(TreeFormat::Dot),
            "edge-csv" | "csv" => Ok(TreeFormat::EdgeCsv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Serializes a tree as an undirected Graphviz graph or as `a,b,distance` rows.
pub fn export_tree(tree: &SpanningTree, format: TreeFormat) -> Vec<u8> {
    match format {
        TreeFormat::Dot => {
            let mut out = String::from("graph mst {\n");
            for node in tree.nodes() {
                let _ = writeln!(out, "  \"{node}\";");
            }
            for e in tree.sorted_edges() {
                let _ = writeln!(
                    out,
                    "  \"{}\" -- \"{}\" [label=\"{:.6}\", distance={:.6}];",
                    e.a, e.b, e.distance, e.distance
                );
            }
            out.push_str("}\n");
            out.into_bytes()
        }
        TreeFormat::EdgeCsv => {
            let mut out = String::from("a,b,distance\n");
            for e in tree.sorted_edges() {
                let _ = writeln!(out, "{},{},{}", e.a, e.b, e.distance);
            }
            out.into_bytes()
        }
    }
}

/// Reads an edge CSV produced by [`export_tree`]; nodes are the edge endpoints.
pub fn parse_edge_csv<R: Read>(source: R) -> Result<SpanningTree> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["a", "b", "distance"] {
        return Err(Error::MalformedHeader(format!(
            "expected a,b,distance, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut edges = Vec::new();
    let mut nodes = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let a = CurrencyCode::new(&rec[0])?;
        let b = CurrencyCode::new(&rec[1])?;
        let distance: f64 = rec[2]
            .parse()
            .map_err(|_| Error::MalformedTree(format!("bad distance {:?}", &rec[2])))?;
        for c in [a, b] {
            if !nodes.contains(&c) {
                nodes.push(c);
            }
        }
        edges.push(TreeEdge { a, b, distance });
    }
    nodes.sort();
    SpanningTree::from_edges(nodes, edges)
}
