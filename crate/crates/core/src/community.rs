//! Louvain community detection on the coupling network and per-cluster
//! profiles.
//!
//! Modularity is the weighted Newman–Girvan quality
//! `Q = (1/2m) Σ_ij [w_ij − k_i k_j / 2m] δ(c_i, c_j)` with resolution 1.
//! The move phase visits nodes in ascending id order (or a seeded shuffle),
//! accepts a move only when it raises `Q` by more than `min_gain`, and
//! communities are numbered by their smallest member id.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bibliometrics::collaboration_index_of;
use crate::corpus::{Corpus, Corridor, DocType, EnvFactor, Level, Record, Unit};
use crate::coupling::CouplingGraph;

/// Which coupling weight the detector sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Raw,
    #[default]
    Normalized,
}

impl std::str::FromStr for WeightKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "raw" => Ok(WeightKind::Raw),
            "normalized" => Ok(WeightKind::Normalized),
            other => Err(format!("unknown weight kind `{other}` (expected raw|normalized)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    #[default]
    Ascending,
    /// Seeded shuffle of the visiting order at every level.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LouvainOptions {
    pub weight: WeightKind,
    pub min_gain: f64,
    pub order: NodeOrder,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        Self {
            weight: WeightKind::Normalized,
            min_gain: 1e-9,
            order: NodeOrder::Ascending,
        }
    }
}

#[derive(Debug, Error)]
pub enum CommunityError {
    #[error("node `{0}` is missing from the partition")]
    MissingNode(String),
    #[error("min_gain must be positive, got {0}")]
    InvalidMinGain(f64),
    #[error("partition CSV line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("partition CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Node → community assignment with dense labels `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignment: BTreeMap<String, usize>,
    modularity: f64,
    passes: usize,
    pass_scores: Vec<f64>,
    isolated: BTreeSet<String>,
}

impl Partition {
    /// Wraps an arbitrary assignment, renumbering communities by their
    /// smallest member id. Modularity is left at 0 until computed.
    pub fn from_assignment(assignment: BTreeMap<String, usize>) -> Self {
        let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
        let assignment = assignment
            .into_iter()
            .map(|(id, c)| {
                let next = relabel.len();
                let l = *relabel.entry(c).or_insert(next);
                (id, l)
            })
            .collect();
        Self {
            assignment,
            modularity: 0.0,
            passes: 0,
            pass_scores: Vec::new(),
            isolated: BTreeSet::new(),
        }
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn modularity(&self) -> f64 {
        self.modularity
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    /// Modularity after each aggregation pass.
    pub fn pass_scores(&self) -> &[f64] {
        &self.pass_scores
    }

    /// Nodes that had no coupling edge (singleton communities).
    pub fn isolated(&self) -> &BTreeSet<String> {
        &self.isolated
    }

    pub fn community_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }

    /// Ascending labels `0..community_count()`.
    pub fn labels(&self) -> std::ops::Range<usize> {
        0..self.community_count()
    }

    pub fn members(&self, label: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &l)| l == label)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn with_isolated(mut self, isolated: BTreeSet<String>) -> Self {
        self.isolated = isolated;
        self
    }

    pub fn with_modularity(mut self, q: f64) -> Self {
        self.modularity = q;
        self
    }

    /// `paper_id,cluster` CSV.
    pub fn write_csv(&self, w: impl Write) -> Result<(), CommunityError> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wtr.write_record(["paper_id", "cluster"])?;
        for (id, l) in &self.assignment {
            wtr.write_record([id.as_str(), &l.to_string()])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self, CommunityError> {
        let mut rdr = csv::Reader::from_reader(r);
        if rdr.headers()?.iter().collect::<Vec<_>>() != ["paper_id", "cluster"] {
            return Err(CommunityError::Schema {
                line: 1,
                message: "expected header `paper_id,cluster`".into(),
            });
        }
        let mut assignment = BTreeMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            if row.len() != 2 {
                return Err(CommunityError::Schema {
                    line,
                    message: "expected 2 columns".into(),
                });
            }
            let label: usize = row[1].parse().map_err(|_| CommunityError::Schema {
                line,
                message: format!("cluster `{}` is not a non-negative integer", &row[1]),
            })?;
            if assignment.insert(row[0].to_string(), label).is_some() {
                return Err(CommunityError::Schema {
                    line,
                    message: format!("paper `{}` listed twice", &row[0]),
                });
            }
        }
        Ok(Self::from_assignment(assignment))
    }
}

/// Adjacency view of a coupling graph under one weight kind.
struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    // weight of i with itself, counted once per ordered pair (i,i)
    self_w: Vec<f64>,
}

impl WeightedGraph {
    fn from_coupling(graph: &CouplingGraph, kind: WeightKind) -> Self {
        let n = graph.node_count();
        let mut adj = vec![Vec::new(); n];
        for e in graph.edges() {
            let w = match kind {
                WeightKind::Raw => e.raw as f64,
                WeightKind::Normalized => e.norm,
            };
            adj[e.source].push((e.target, w));
            adj[e.target].push((e.source, w));
        }
        Self {
            adj,
            self_w: vec![0.0; n],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, i: usize) -> f64 {
        self.self_w[i] + self.adj[i].iter().map(|(_, w)| w).sum::<f64>()
    }

    fn aggregate(&self, comm: &[usize], k: usize) -> WeightedGraph {
        let mut self_w = vec![0.0; k];
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        for i in 0..self.len() {
            let ci = comm[i];
            self_w[ci] += self.self_w[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    self_w[ci] += w;
                } else {
                    *maps[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        WeightedGraph {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_w,
        }
    }
}

fn modularity_of(g: &WeightedGraph, comm: &[usize]) -> f64 {
    let degrees: Vec<f64> = (0..g.len()).map(|i| g.degree(i)).collect();
    let two_m: f64 = degrees.iter().sum();
    if two_m <= 0.0 {
        return 0.0;
    }
    let k = comm.iter().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; k];
    let mut tot = vec![0.0; k];
    for i in 0..g.len() {
        tot[comm[i]] += degrees[i];
        internal[comm[i]] += g.self_w[i];
        for &(j, w) in &g.adj[i] {
            if comm[j] == comm[i] {
                internal[comm[i]] += w;
            }
        }
    }
    (0..k).map(|c| internal[c] / two_m - (tot[c] / two_m).powi(2)).sum()
}

/// Modularity of `partition` on `graph` under `kind` weights.
pub fn modularity(graph: &CouplingGraph, partition: &Partition, kind: WeightKind) -> Result<f64, CommunityError> {
    let comm = graph
        .node_ids()
        .iter()
        .map(|id| partition.label_of(id).ok_or_else(|| CommunityError::MissingNode(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(modularity_of(&WeightedGraph::from_coupling(graph, kind), &comm))
}

// One move phase; returns whether any node moved.
fn move_nodes(g: &WeightedGraph, comm: &mut [usize], min_gain: f64, order: &[usize]) -> bool {
    let n = g.len();
    let degrees: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let two_m: f64 = degrees.iter().sum();
    let m = two_m / 2.0;
    let mut tot = vec![0.0; n];
    for i in 0..n {
        tot[comm[i]] += degrees[i];
    }
    let mut neigh_w = vec![0.0; n];
    let mut neigh: Vec<usize> = Vec::new();
    let mut any = false;
    loop {
        let mut moved = false;
        for &i in order {
            let ci = comm[i];
            let ki = degrees[i];
            for &(j, w) in &g.adj[i] {
                let c = comm[j];
                if neigh_w[c] == 0.0 && !neigh.contains(&c) {
                    neigh.push(c);
                }
                neigh_w[c] += w;
            }
            tot[ci] -= ki;
            let gain = |c: usize, kin: f64| kin - tot[c] * ki / two_m;
            let own = gain(ci, neigh_w[ci]);
            neigh.sort_unstable();
            let mut best = ci;
            let mut best_gain = own;
            for &c in &neigh {
                let gc = gain(c, neigh_w[c]);
                if gc > best_gain {
                    best_gain = gc;
                    best = c;
                }
            }
            if best != ci && (best_gain - own) / m > min_gain {
                comm[i] = best;
                moved = true;
            }
            tot[comm[i]] += ki;
            for &c in &neigh {
                neigh_w[c] = 0.0;
            }
            neigh_w[ci] = 0.0;
            neigh.clear();
        }
        if !moved {
            break;
        }
        any = true;
    }
    any
}

// Renumbers communities by first appearance in index order.
fn compact(comm: &mut [usize]) -> usize {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for c in comm.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Two-phase Louvain: local moves until stable, then aggregation, repeated
/// until a level produces no move.
pub fn louvain(graph: &CouplingGraph, opts: &LouvainOptions) -> Result<Partition, CommunityError> {
    if !(opts.min_gain > 0.0) {
        return Err(CommunityError::InvalidMinGain(opts.min_gain));
    }
    let n = graph.node_count();
    let isolated: BTreeSet<String> = graph.isolated().into_iter().map(|i| graph.node_ids()[i].clone()).collect();
    let base = WeightedGraph::from_coupling(graph, opts.weight);
    let mut node_comm: Vec<usize> = (0..n).collect();
    let mut level = WeightedGraph::from_coupling(graph, opts.weight);
    let mut rng = match opts.order {
        NodeOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        NodeOrder::Ascending => None,
    };
    let mut passes = 0;
    let mut pass_scores = Vec::new();

    loop {
        let ln = level.len();
        let mut comm: Vec<usize> = (0..ln).collect();
        let mut order: Vec<usize> = (0..ln).collect();
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        if !move_nodes(&level, &mut comm, opts.min_gain, &order) {
            break;
        }
        let k = compact(&mut comm);
        for c in node_comm.iter_mut() {
            *c = comm[*c];
        }
        passes += 1;
        pass_scores.push(modularity_of(&base, &node_comm));
        if k == ln {
            break;
        }
        level = level.aggregate(&comm, k);
    }

    compact(&mut node_comm);
    let q = modularity_of(&base, &node_comm);
    let assignment = graph.node_ids().iter().cloned().zip(node_comm).collect();
    Ok(Partition {
        assignment,
        modularity: q,
        passes,
        pass_scores,
        isolated,
    })
}

/// Size, citation and category breakdown of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterProfile {
    pub label: usize,
    pub size: usize,
    pub published: usize,
    pub time_span: Option<(i32, i32)>,
    /// Mean global citations over non-isolated members; `None` if all are
    /// isolated.
    pub average_citations_per_document: Option<f64>,
    pub isolated_excluded_from_citation_mean: usize,
    pub collaboration_index: f64,
    pub type_of_paper: BTreeMap<String, usize>,
    pub level_of_analysis: BTreeMap<String, usize>,
    pub unit_of_analysis: BTreeMap<String, usize>,
    pub migration: BTreeMap<String, usize>,
    pub environmental_factors: BTreeMap<String, usize>,
}

const NA: &str = "not_applicable";

fn tally<T: Copy>(records: &[&Record], all: &[(T, &str)], get: impl Fn(&Record) -> Option<T>, eq: impl Fn(T, T) -> bool) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = all.iter().map(|(_, name)| (name.to_string(), 0)).collect();
    out.insert(NA.to_string(), 0);
    for r in records {
        let key = match get(r) {
            Some(v) => all.iter().find(|(a, _)| eq(*a, v)).map(|(_, n)| *n).unwrap_or(NA),
            None => NA,
        };
        *out.get_mut(key).unwrap() += 1;
    }
    out
}

/// Tabulates each community of `partition` against the corpus records.
pub fn profile_clusters(corpus: &Corpus, partition: &Partition) -> Vec<ClusterProfile> {
    let mut groups: BTreeMap<usize, Vec<&Record>> = BTreeMap::new();
    for (id, &label) in partition.assignment() {
        match corpus.get(id) {
            Some(r) => groups.entry(label).or_default().push(r),
            None => log::warn!("partition node `{id}` is not in the corpus; skipped in profiles"),
        }
    }
    groups
        .into_iter()
        .map(|(label, members)| {
            let cited: Vec<&&Record> = members.iter().filter(|r| !partition.isolated().contains(&r.id)).collect();
            let average = if cited.is_empty() {
                None
            } else {
                Some(cited.iter().map(|r| r.global_citations as f64).sum::<f64>() / cited.len() as f64)
            };
            let years = members.iter().map(|r| r.year);
            let time_span = years.clone().min().zip(years.max());
            let mut type_of_paper: BTreeMap<String, usize> = DocType::ALL.iter().map(|d| (d.as_str().to_string(), 0)).collect();
            for r in &members {
                *type_of_paper.get_mut(r.doc_type.as_str()).unwrap() += 1;
            }
            ClusterProfile {
                label,
                size: members.len(),
                published: members.iter().filter(|r| r.published).count(),
                time_span,
                average_citations_per_document: average,
                isolated_excluded_from_citation_mean: members.len() - cited.len(),
                collaboration_index: collaboration_index_of(members.iter().copied()).value,
                type_of_paper,
                level_of_analysis: tally(&members, &[(Level::Macro, "macro"), (Level::Micro, "micro")], |r| r.level, |a, b| a == b),
                unit_of_analysis: tally(
                    &members,
                    &[
                        (Unit::Country, "country"),
                        (Unit::Household, "household"),
                        (Unit::Individual, "individual"),
                        (Unit::Territorial, "territorial"),
                    ],
                    |r| r.unit,
                    |a, b| a == b,
                ),
                migration: tally(
                    &members,
                    &[
                        (Corridor::Both, "both"),
                        (Corridor::CrossCountry, "cross_country"),
                        (Corridor::Internal, "internal"),
                    ],
                    |r| r.corridor,
                    |a, b| a == b,
                ),
                environmental_factors: tally(
                    &members,
                    &[
                        (EnvFactor::Both, "both"),
                        (EnvFactor::SlowOnset, "slow_onset"),
                        (EnvFactor::FastOnset, "fast_onset"),
                    ],
                    |r| r.env_factor,
                    |a, b| a == b,
                ),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ProfileReport<'a> {
    note: &'static str,
    modularity: f64,
    clusters: &'a [ClusterProfile],
}

/// Writes the profiles as pretty JSON.
pub fn write_profiles_json(profiles: &[ClusterProfile], modularity: f64, mut w: impl Write) -> std::io::Result<()> {
    let report = ProfileReport {
        note: "average_citations_per_document excludes isolated (uncoupled) papers, which form singleton clusters",
        modularity,
        clusters: profiles,
    };
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")
}
