//! Descriptive indicators: global and local citations, h-index,
//! collaboration index, yearly production and growth.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::corpus::{surname, Corpus, Record};

/// Global and local citation counts for one paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CitationRow {
    pub id: String,
    pub global_citations: u64,
    /// Corpus papers whose references contain this paper's key.
    pub local_citations: usize,
}

/// One row per corpus record, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CitationTable {
    pub rows: Vec<CitationRow>,
}

impl CitationTable {
    pub fn get(&self, id: &str) -> Option<&CitationRow> {
        self.rows.iter().find(|r| r.id == id)
    }
}

/// Counts in-sample citations by matching each record's reference key
/// against the references of every other record.
pub fn local_citations(corpus: &Corpus) -> CitationTable {
    let mut by_key: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, r) in corpus.records().iter().enumerate() {
        by_key.entry(r.reference_key()).or_default().push(i);
    }
    let mut counts = vec![0usize; corpus.len()];
    for (citer, r) in corpus.records().iter().enumerate() {
        for key in &r.references {
            if let Some(targets) = by_key.get(key) {
                for &t in targets {
                    if t != citer {
                        counts[t] += 1;
                    }
                }
            }
        }
    }
    CitationTable {
        rows: corpus
            .records()
            .iter()
            .zip(counts)
            .map(|(r, local)| CitationRow {
                id: r.id.clone(),
                global_citations: r.global_citations,
                local_citations: local,
            })
            .collect(),
    }
}

/// Largest `h` such that at least `h` counts are `>= h`.
pub fn h_index(counts: &[u64]) -> u64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .iter()
        .enumerate()
        .take_while(|(i, &c)| c > *i as u64)
        .count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollaborationIndex {
    pub value: f64,
    pub multi_authored: usize,
    /// Set when no record has two or more authors; `value` is then 0.
    pub no_multi_authored: bool,
}

/// Authors of multi-authored records divided by the number of such records.
pub fn collaboration_index_of<'a>(records: impl IntoIterator<Item = &'a Record>) -> CollaborationIndex {
    let (sum, n) = records
        .into_iter()
        .map(|r| r.authors.len())
        .filter(|&a| a >= 2)
        .fold((0usize, 0usize), |(s, n), a| (s + a, n + 1));
    if n == 0 {
        CollaborationIndex {
            value: 0.0,
            multi_authored: 0,
            no_multi_authored: true,
        }
    } else {
        CollaborationIndex {
            value: sum as f64 / n as f64,
            multi_authored: n,
            no_multi_authored: false,
        }
    }
}

pub fn collaboration_index(corpus: &Corpus) -> CollaborationIndex {
    let ci = collaboration_index_of(corpus.records());
    if ci.no_multi_authored {
        log::warn!("collaboration index: no multi-authored records, reporting 0");
    }
    ci
}

pub fn production_by_year(corpus: &Corpus) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for r in corpus.records() {
        *out.entry(r.year).or_insert(0) += 1;
    }
    out
}

/// Compound annual growth between the first and last years with output:
/// `(last / first)^(1 / (y_last − y_first)) − 1`. `None` with fewer than
/// two distinct years.
pub fn annual_growth_rate(production: &BTreeMap<i32, usize>) -> Option<f64> {
    let mut nonzero = production.iter().filter(|(_, &c)| c > 0);
    let (&y0, &c0) = nonzero.next()?;
    let (&y1, &c1) = nonzero.next_back()?;
    Some((c1 as f64 / c0 as f64).powf(1.0 / (y1 - y0) as f64) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuthorStats {
    pub author: String,
    pub documents: usize,
    pub global_citations: u64,
    pub local_citations: usize,
    pub h_index_global: u64,
    pub h_index_local: u64,
}

/// Per-author production, keyed by the normalized author string. Sorted by
/// document count (descending), then name.
pub fn author_stats(corpus: &Corpus, table: &CitationTable) -> Vec<AuthorStats> {
    let mut per: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records().iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        for a in &r.authors {
            if seen.insert(a.as_str()) {
                per.entry(a.as_str()).or_default().push(i);
            }
        }
    }
    let mut out: Vec<AuthorStats> = per
        .into_iter()
        .map(|(author, docs)| {
            let global: Vec<u64> = docs.iter().map(|&i| table.rows[i].global_citations).collect();
            let local: Vec<u64> = docs.iter().map(|&i| table.rows[i].local_citations as u64).collect();
            AuthorStats {
                author: author.to_string(),
                documents: docs.len(),
                global_citations: global.iter().sum(),
                local_citations: local.iter().sum::<u64>() as usize,
                h_index_global: h_index(&global),
                h_index_local: h_index(&local),
            }
        })
        .collect();
    out.sort_by(|a, b| b.documents.cmp(&a.documents).then_with(|| a.author.cmp(&b.author)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopCited {
    pub id: String,
    pub first_author: String,
    pub year: i32,
    pub global_citations: u64,
    pub local_citations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BibliometricReport {
    pub documents: usize,
    pub top_global: Vec<TopCited>,
    pub top_local: Vec<TopCited>,
    pub uncited_locally: usize,
    pub authors: Vec<AuthorStats>,
    pub h_index_corpus_global: u64,
    pub h_index_corpus_local: u64,
    pub collaboration_index: CollaborationIndex,
    pub production_by_year: BTreeMap<i32, usize>,
    pub annual_growth_rate: Option<f64>,
    pub growth_rate_formula: &'static str,
}

pub const TOP_N: usize = 10;

pub fn report(corpus: &Corpus) -> BibliometricReport {
    let table = local_citations(corpus);
    let top = |key: &dyn Fn(&CitationRow) -> u64| {
        let mut idx: Vec<usize> = (0..table.rows.len()).collect();
        // stable sort keeps corpus (id) order among ties
        idx.sort_by(|&a, &b| key(&table.rows[b]).cmp(&key(&table.rows[a])));
        idx.into_iter()
            .take(TOP_N)
            .map(|i| {
                let r = &corpus.records()[i];
                TopCited {
                    id: r.id.clone(),
                    first_author: r.authors.first().map(|a| surname(a)).unwrap_or_default(),
                    year: r.year,
                    global_citations: table.rows[i].global_citations,
                    local_citations: table.rows[i].local_citations,
                }
            })
            .collect::<Vec<_>>()
    };
    let top_global = top(&|r| r.global_citations);
    let top_local = top(&|r| r.local_citations as u64);
    let globals: Vec<u64> = table.rows.iter().map(|r| r.global_citations).collect();
    let locals: Vec<u64> = table.rows.iter().map(|r| r.local_citations as u64).collect();
    let production = production_by_year(corpus);
    BibliometricReport {
        documents: corpus.len(),
        top_global,
        top_local,
        uncited_locally: locals.iter().filter(|&&c| c == 0).count(),
        authors: author_stats(corpus, &table),
        h_index_corpus_global: h_index(&globals),
        h_index_corpus_local: h_index(&locals),
        collaboration_index: collaboration_index(corpus),
        annual_growth_rate: annual_growth_rate(&production),
        production_by_year: production,
        growth_rate_formula: "(count_last / count_first)^(1 / (year_last - year_first)) - 1 over the first and last years with output",
    }
}

pub fn write_report_json(report: &BibliometricReport, mut w: impl Write) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")
}
