//! Paper × reference incidence matrix and the bibliographic-coupling network
//! derived from it.
//!
//! The coupling weight of two papers is the number of references they share
//! (the off-diagonal of `A·Aᵀ`); the diagonal, each paper's reference count,
//! is kept separately as `self_counts`. Association strength divides the
//! shared count by the product of both reference counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::fmt::real;

/// Sparse binary paper × reference matrix. Rows follow ascending paper id,
/// columns ascending reference key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    paper_ids: Vec<String>,
    reference_keys: Vec<String>,
    // sorted column indices of the ones in each row
    rows: Vec<Vec<u32>>,
}

impl IncidenceMatrix {
    pub fn paper_ids(&self) -> &[String] {
        &self.paper_ids
    }

    pub fn reference_keys(&self) -> &[String] {
        &self.reference_keys
    }

    pub fn nrows(&self) -> usize {
        self.paper_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.reference_keys.len()
    }

    /// Column indices of the ones in row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&(j as u32)).is_ok()
    }

    /// Number of stored ones.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Builds `A` with `a_ij = 1` iff paper `i` cites reference `j`.
pub fn build_incidence(corpus: &Corpus) -> IncidenceMatrix {
    let reference_keys: Vec<String> = corpus.reference_universe().iter().cloned().collect();
    let col_of: BTreeMap<&str, u32> = reference_keys
        .iter()
        .enumerate()
        .map(|(j, k)| (k.as_str(), j as u32))
        .collect();
    let mut recs: Vec<_> = corpus.records().iter().collect();
    recs.sort_by(|a, b| a.id.cmp(&b.id));
    let paper_ids = recs.iter().map(|r| r.id.clone()).collect();
    // BTreeSet iteration is sorted, so each row comes out sorted
    let rows = recs
        .iter()
        .map(|r| r.references.iter().map(|k| col_of[k.as_str()]).collect())
        .collect();
    IncidenceMatrix {
        paper_ids,
        reference_keys,
        rows,
    }
}

/// One undirected coupling edge, `source < target` by node index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub raw: u32,
    pub norm: f64,
}

/// Weighted undirected paper network.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    node_ids: Vec<String>,
    self_counts: Vec<u32>,
    // sorted by (source, target)
    edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CouplingGraph {
    /// Assembles a graph from explicit parts. Edges are canonicalized
    /// (`source < target`, sorted) and normalized weights recomputed.
    pub fn from_parts(node_ids: Vec<String>, self_counts: Vec<u32>, edges: impl IntoIterator<Item = (usize, usize, u32)>) -> Self {
        assert_eq!(node_ids.len(), self_counts.len());
        let mut map: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (a, b, w) in edges {
            assert!(a != b, "self loops are not part of a coupling graph");
            assert!(a < node_ids.len() && b < node_ids.len());
            if w > 0 {
                map.insert((a.min(b), a.max(b)), w);
            }
        }
        let edges = map
            .into_iter()
            .map(|((s, t), raw)| Edge {
                source: s,
                target: t,
                raw,
                norm: association_strength(raw, self_counts[s], self_counts[t]),
            })
            .collect();
        Self {
            node_ids,
            self_counts,
            edges,
        }
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    /// Reference count `b_ii` of each node.
    pub fn self_counts(&self) -> &[u32] {
        &self.self_counts
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn find(&self, i: usize, j: usize) -> Option<&Edge> {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.source, e.target).cmp(&key))
            .ok()
            .map(|k| &self.edges[k])
    }

    /// Shared-reference count `b_ij` (0 when no edge, `i == j` included).
    pub fn raw_weight(&self, i: usize, j: usize) -> u32 {
        if i == j {
            return 0;
        }
        self.find(i, j).map_or(0, |e| e.raw)
    }

    /// Association strength `b_ij / (b_ii b_jj)`.
    pub fn norm_weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        self.find(i, j).map_or(0.0, |e| e.norm)
    }

    /// Indices of nodes without any edge.
    pub fn isolated(&self) -> Vec<usize> {
        let mut has = vec![false; self.node_count()];
        for e in &self.edges {
            has[e.source] = true;
            has[e.target] = true;
        }
        (0..self.node_count()).filter(|&i| !has[i]).collect()
    }

    /// TSV edge list with header `source, target, raw_weight, norm_weight`.
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "source\ttarget\traw_weight\tnorm_weight")?;
        for e in &self.edges {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                self.node_ids[e.source],
                self.node_ids[e.target],
                e.raw,
                real(e.norm)
            )?;
        }
        Ok(())
    }

    /// Reads a TSV edge list back against a known node list and reference
    /// counts; normalized weights are recomputed from the raw ones.
    pub fn read_tsv(node_ids: Vec<String>, self_counts: Vec<u32>, r: impl BufRead) -> Result<Self, GraphError> {
        let index: BTreeMap<&str, usize> = node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut edges = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let schema = |message: String| GraphError::Schema { line: lineno, message };
            if n == 0 {
                if line != "source\ttarget\traw_weight\tnorm_weight" {
                    return Err(schema("expected header `source<TAB>target<TAB>raw_weight<TAB>norm_weight`".into()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(schema(format!("expected 4 tab-separated columns, found {}", cols.len())));
            }
            let node = |s: &str| index.get(s).copied().ok_or_else(|| schema(format!("unknown node `{s}`")));
            let (a, b) = (node(cols[0])?, node(cols[1])?);
            if a == b {
                return Err(schema("self loop".into()));
            }
            let raw: u32 = cols[2]
                .parse()
                .map_err(|_| schema(format!("raw_weight `{}` is not an integer", cols[2])))?;
            edges.push((a, b, raw));
        }
        drop(index);
        Ok(Self::from_parts(node_ids, self_counts, edges))
    }

    /// GraphML with `raw_weight`, `norm_weight` edge attributes and a
    /// `references` node attribute.
    pub fn write_graphml(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
        writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
        writeln!(w, r#"  <key id="references" for="node" attr.name="references" attr.type="int"/>"#)?;
        writeln!(w, r#"  <key id="raw_weight" for="edge" attr.name="raw_weight" attr.type="int"/>"#)?;
        writeln!(w, r#"  <key id="norm_weight" for="edge" attr.name="norm_weight" attr.type="double"/>"#)?;
        writeln!(w, r#"  <graph id="coupling" edgedefault="undirected">"#)?;
        for (id, c) in self.node_ids.iter().zip(&self.self_counts) {
            writeln!(w, r#"    <node id="{}"><data key="references">{c}</data></node>"#, xml_escape(id))?;
        }
        for e in &self.edges {
            writeln!(
                w,
                r#"    <edge source="{}" target="{}"><data key="raw_weight">{}</data><data key="norm_weight">{}</data></edge>"#,
                xml_escape(&self.node_ids[e.source]),
                xml_escape(&self.node_ids[e.target]),
                e.raw,
                real(e.norm)
            )?;
        }
        writeln!(w, "  </graph>")?;
        writeln!(w, "</graphml>")?;
        Ok(())
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// `shared / (refs_i · refs_j)`.
pub fn association_strength(shared: u32, refs_i: u32, refs_j: u32) -> f64 {
    shared as f64 / (refs_i as f64 * refs_j as f64)
}

/// Derives the coupling network from the incidence matrix.
///
/// Shared counts are accumulated through the column postings, one source row
/// at a time, so the output order is fixed by row index alone.
pub fn coupling_graph(incidence: &IncidenceMatrix) -> CouplingGraph {
    let n = incidence.nrows();
    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); incidence.ncols()];
    for i in 0..n {
        for &j in incidence.row(i) {
            postings[j as usize].push(i as u32);
        }
    }
    let self_counts: Vec<u32> = (0..n).map(|i| incidence.row(i).len() as u32).collect();

    let mut edges = Vec::new();
    let mut counts = vec![0u32; n];
    let mut touched: Vec<usize> = Vec::new();
    for i in 0..n {
        for &j in incidence.row(i) {
            let post = &postings[j as usize];
            // postings are ascending; only partners after i
            let from = post.partition_point(|&r| r as usize <= i);
            for &r in &post[from..] {
                let r = r as usize;
                if counts[r] == 0 {
                    touched.push(r);
                }
                counts[r] += 1;
            }
        }
        touched.sort_unstable();
        for &t in &touched {
            let raw = counts[t];
            edges.push(Edge {
                source: i,
                target: t,
                raw,
                norm: association_strength(raw, self_counts[i], self_counts[t]),
            });
            counts[t] = 0;
        }
        touched.clear();
    }
    CouplingGraph {
        node_ids: incidence.paper_ids().to_vec(),
        self_counts,
        edges,
    }
}

/// Histogram bucket edges for [`graph_stats`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Buckets {
    /// `[1,2), [2,3), ..., [max, max+1)`.
    #[default]
    UnitWidth,
    /// Explicit ascending edges; bucket `k` is `[edges[k], edges[k+1])`.
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Summary of a coupling graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub isolated_nodes: Vec<String>,
    pub max_raw_weight: u32,
    pub histogram: Vec<Bucket>,
}

pub fn graph_stats(graph: &CouplingGraph) -> GraphStats {
    graph_stats_with(graph, &Buckets::UnitWidth)
}

pub fn graph_stats_with(graph: &CouplingGraph, buckets: &Buckets) -> GraphStats {
    let max_raw_weight = graph.edges.iter().map(|e| e.raw).max().unwrap_or(0);
    let histogram = match buckets {
        Buckets::UnitWidth => {
            let mut counts = vec![0usize; max_raw_weight as usize];
            for e in &graph.edges {
                counts[e.raw as usize - 1] += 1;
            }
            counts
                .into_iter()
                .enumerate()
                .map(|(k, count)| Bucket {
                    lo: (k + 1) as f64,
                    hi: (k + 2) as f64,
                    count,
                })
                .collect()
        }
        Buckets::Edges(edges) => edges
            .windows(2)
            .map(|w| Bucket {
                lo: w[0],
                hi: w[1],
                count: graph
                    .edges
                    .iter()
                    .filter(|e| (e.raw as f64) >= w[0] && (e.raw as f64) < w[1])
                    .count(),
            })
            .collect(),
    };
    GraphStats {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        isolated_nodes: graph.isolated().into_iter().map(|i| graph.node_ids[i].clone()).collect(),
        max_raw_weight,
        histogram,
    }
}

/// Reference sets per paper id, as a convenience for oracles and reports.
pub fn reference_sets(corpus: &Corpus) -> BTreeMap<String, BTreeSet<String>> {
    corpus.records().iter().map(|r| (r.id.clone(), r.references.clone())).collect()
}
