//! Bibliographic records: ingestion, normalization, deduplication, and the
//! stage-by-stage screening ledger.
//!
//! Two input formats are accepted:
//!
//! * `bibtex_subset`: `@TYPE{key, field = {value}, ...}` entries. Recognized
//!   fields are `title`, `author`, `year`, `journal`, `keywords`, `cites`
//!   (comma-separated reference keys), `citations` (integer) and
//!   `impactfactor` (decimal). Other fields are ignored with a warning.
//!   Text between entries is treated as a comment.
//! * `jsonl`: one JSON object per line carrying the [`Record`] field names.
//!   This is the canonical interchange format between stages.
//!
//! Reference keys are normalized to `surname_year_firstword`-style tokens:
//! lowercase, with every run of non-alphanumeric characters replaced by one
//! underscore. A record's own key is built the same way from its first
//! author's surname, its year and the first word of its title.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    #[default]
    Quantitative,
    Qualitative,
    Review,
    Theoretical,
    Policy,
}

impl DocType {
    pub const ALL: [DocType; 5] = [
        DocType::Policy,
        DocType::Qualitative,
        DocType::Quantitative,
        DocType::Review,
        DocType::Theoretical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Quantitative => "quantitative",
            DocType::Qualitative => "qualitative",
            DocType::Review => "review",
            DocType::Theoretical => "theoretical",
            DocType::Policy => "policy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ScopusExport,
    WosExport,
    #[default]
    Manual,
    PriorMeta,
}

/// Level of analysis, one of the cluster profile dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Macro,
    Micro,
}

/// Unit of analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Country,
    Household,
    Individual,
    Territorial,
}

/// Migration corridor studied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corridor {
    Both,
    CrossCountry,
    Internal,
}

/// Environmental factor studied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvFactor {
    Both,
    SlowOnset,
    FastOnset,
}

/// One bibliographic item with its reference list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    pub year: i32,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub doc_type: DocType,
    #[serde(default)]
    pub published: bool,
    #[serde(default)]
    pub global_citations: u64,
    #[serde(default)]
    pub impact_factor: f64,
    #[serde(default)]
    pub references: BTreeSet<String>,
    #[serde(default)]
    pub keywords: BTreeSet<String>,
    #[serde(default)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Unit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corridor: Option<Corridor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_factor: Option<EnvFactor>,
}

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

impl Record {
    /// A record with the given identity and every optional field defaulted.
    pub fn new(id: impl Into<String>, title: impl Into<String>, year: i32) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            authors: Vec::new(),
            year,
            venue: String::new(),
            doc_type: DocType::default(),
            published: false,
            global_citations: 0,
            impact_factor: 0.0,
            references: BTreeSet::new(),
            keywords: BTreeSet::new(),
            source: Source::default(),
            level: None,
            unit: None,
            corridor: None,
            env_factor: None,
        }
    }

    /// Normalizes names, keywords and reference keys in place and removes
    /// the record's own id from its references. Idempotent.
    pub fn normalize(&mut self) {
        self.id = self.id.trim().to_string();
        self.title = collapse_ws(&self.title);
        self.venue = collapse_ws(&self.venue);
        self.authors = self
            .authors
            .iter()
            .map(|a| normalize_author(a))
            .filter(|a| !a.is_empty())
            .collect();
        self.keywords = self
            .keywords
            .iter()
            .map(|k| collapse_ws(&k.to_lowercase()))
            .filter(|k| !k.is_empty())
            .collect();
        let own = normalize_ref_key(&self.id);
        self.references = self
            .references
            .iter()
            .map(|r| normalize_ref_key(r))
            .filter(|r| !r.is_empty() && *r != own && *r != self.id)
            .collect();
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if !(MIN_YEAR..=MAX_YEAR).contains(&self.year) {
            return Err(format!("year {} outside [{MIN_YEAR}, {MAX_YEAR}]", self.year));
        }
        if !self.impact_factor.is_finite() || self.impact_factor < 0.0 {
            return Err(format!("impact_factor {} must be finite and non-negative", self.impact_factor));
        }
        if self.references.contains(&self.id) {
            return Err("references contain the record's own id".into());
        }
        Ok(())
    }

    /// Normalized key under which other records cite this one.
    pub fn reference_key(&self) -> String {
        let surname = self
            .authors
            .first()
            .map(|a| surname(a))
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| "anonymous".to_string());
        let word = self
            .title
            .split_whitespace()
            .map(normalize_ref_key)
            .find(|w| !w.is_empty())
            .unwrap_or_else(|| "untitled".to_string());
        normalize_ref_key(&format!("{surname}_{}_{word}", self.year))
    }

    /// Normalized `(title, year)` used for duplicate detection.
    pub fn dedupe_key(&self) -> (String, i32) {
        (normalize_title(&self.title), self.year)
    }
}

/// Lowercases and replaces each run of non-alphanumeric characters by `_`.
pub fn normalize_ref_key(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending = false;
    for ch in raw.chars() {
        if ch.is_alphanumeric() {
            if pending && !out.is_empty() {
                out.push('_');
            }
            pending = false;
            out.extend(ch.to_lowercase());
        } else {
            pending = true;
        }
    }
    out
}

/// Lowercase, punctuation stripped, whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    let cleaned: String = title
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    collapse_ws(&cleaned.to_lowercase())
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_author(raw: &str) -> String {
    let no_braces: String = raw.chars().filter(|c| *c != '{' && *c != '}').collect();
    collapse_ws(&no_braces)
}

/// Surname of a normalized author string: the part before a comma, or the
/// last whitespace-separated token.
pub fn surname(author: &str) -> String {
    let s = match author.split_once(',') {
        Some((last, _)) => last.trim(),
        None => author.split_whitespace().last().unwrap_or(""),
    };
    normalize_ref_key(s)
}

/// Input format for [`parse_records`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    BibtexSubset,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension (`.bib` or `.jsonl`/`.json`).
    pub fn from_path(path: &std::path::Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "bib" | "bibtex" => Some(Format::BibtexSubset),
            "jsonl" | "json" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

/// Position of an entry in its input stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    /// Zero-based entry index.
    pub entry: usize,
    /// Byte offset of the entry start.
    pub offset: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "entry {} at byte {}", self.entry, self.offset)
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed {at}: {message}")]
    Malformed { at: Location, message: String },
    #[error("duplicate key `{key}`: first {first}, again {second}")]
    DuplicateKey {
        key: String,
        first: Location,
        second: Location,
    },
    #[error("input is not valid UTF-8 at byte {offset}")]
    Utf8 { offset: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses a byte stream into records.
///
/// Bibtex entries default to `source = scopus_export`; jsonl entries carry
/// their own `source`.
pub fn parse_records(input: &[u8], format: Format) -> Result<Vec<Record>, ParseError> {
    let text = std::str::from_utf8(input).map_err(|e| ParseError::Utf8 {
        offset: e.valid_up_to(),
    })?;
    let parsed = match format {
        Format::BibtexSubset => parse_bibtex(text, Source::ScopusExport)?,
        Format::Jsonl => parse_jsonl(text)?,
    };
    let mut seen: HashMap<String, Location> = HashMap::new();
    let mut out = Vec::with_capacity(parsed.len());
    for (loc, rec) in parsed {
        if let Some(first) = seen.get(&rec.id) {
            return Err(ParseError::DuplicateKey {
                key: rec.id,
                first: *first,
                second: loc,
            });
        }
        seen.insert(rec.id.clone(), loc);
        out.push(rec);
    }
    Ok(out)
}

/// Like [`parse_records`] but reads from any reader, overriding the source
/// tag of bibtex entries.
pub fn read_records(mut reader: impl Read, format: Format, source: Source) -> Result<Vec<Record>, ParseError> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    let mut records = parse_records(&buf, format)?;
    if format == Format::BibtexSubset {
        for r in &mut records {
            r.source = source;
        }
    }
    Ok(records)
}

fn parse_jsonl(text: &str) -> Result<Vec<(Location, Record)>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (line_no, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let at = Location {
            entry: line_no,
            offset: start,
        };
        let mut rec: Record = serde_json::from_str(trimmed).map_err(|e| ParseError::Malformed {
            at,
            message: format!("line {}: {e}", line_no + 1),
        })?;
        rec.normalize();
        rec.validate().map_err(|message| ParseError::Malformed { at, message })?;
        out.push((at, rec));
    }
    Ok(out)
}

/// Writes records as jsonl, one object per line.
pub fn write_jsonl(records: &[Record], mut w: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

struct Scanner<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    /// Reads a `{...}` group with nested braces; `pos` is on the `{`.
    fn braced(&mut self) -> Option<&'a str> {
        debug_assert_eq!(self.peek(), Some(b'{'));
        let start = self.pos + 1;
        let mut depth = 0usize;
        while let Some(b) = self.peek() {
            match b {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return Some(&self.text[start..self.pos - 1]);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        None
    }

    fn quoted(&mut self) -> Option<&'a str> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        self.pos += 1;
        let start = self.pos;
        let mut depth = 0i64;
        while let Some(b) = self.peek() {
            match b {
                b'{' => depth += 1,
                b'}' => depth -= 1,
                b'"' if depth == 0 => {
                    self.pos += 1;
                    return Some(&self.text[start..self.pos - 1]);
                }
                _ => {}
            }
            self.pos += 1;
        }
        None
    }

    fn bare(&mut self) -> &'a str {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| !b.is_ascii_whitespace() && b != b',' && b != b'}')
        {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }
}

fn parse_bibtex(text: &str, source: Source) -> Result<Vec<(Location, Record)>, ParseError> {
    let mut sc = Scanner {
        text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut out = Vec::new();
    let mut warned: BTreeSet<String> = BTreeSet::new();
    let mut entry = 0usize;

    while let Some(rel) = text[sc.pos..].find('@') {
        let start = sc.pos + rel;
        sc.pos = start + 1;
        let at = Location { entry, offset: start };
        let bad = |message: String| ParseError::Malformed { at, message };

        let kind = sc.ident().to_ascii_lowercase();
        if kind.is_empty() {
            return Err(bad("expected entry type after `@`".into()));
        }
        sc.skip_ws();
        if sc.peek() != Some(b'{') {
            return Err(bad(format!("expected `{{` after @{kind}")));
        }
        if kind == "comment" {
            sc.braced().ok_or_else(|| bad("unbalanced braces in @comment".into()))?;
            continue;
        }
        if kind == "string" || kind == "preamble" {
            return Err(bad(format!("@{kind} is not supported")));
        }
        sc.pos += 1;
        sc.skip_ws();
        let key_start = sc.pos;
        while sc.peek().is_some_and(|b| b != b',' && b != b'}' && !b.is_ascii_whitespace()) {
            sc.pos += 1;
        }
        let key = text[key_start..sc.pos].to_string();
        if key.is_empty() {
            return Err(bad("missing citation key".into()));
        }
        sc.skip_ws();

        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        loop {
            match sc.peek() {
                None => return Err(bad("unbalanced braces: entry is not closed".into())),
                Some(b'}') => {
                    sc.pos += 1;
                    break;
                }
                Some(b',') => {
                    sc.pos += 1;
                    sc.skip_ws();
                    continue;
                }
                _ => {}
            }
            let name = sc.ident().to_ascii_lowercase();
            if name.is_empty() {
                return Err(bad(format!("unexpected character at byte {}", sc.pos)));
            }
            sc.skip_ws();
            if sc.peek() != Some(b'=') {
                return Err(bad(format!("expected `=` after field `{name}`")));
            }
            sc.pos += 1;
            sc.skip_ws();
            let value = match sc.peek() {
                Some(b'{') => sc.braced().ok_or_else(|| bad(format!("unbalanced braces in field `{name}`")))?,
                Some(b'"') => sc.quoted().ok_or_else(|| bad(format!("unterminated string in field `{name}`")))?,
                Some(_) => sc.bare(),
                None => return Err(bad("unbalanced braces: entry is not closed".into())),
            };
            if fields.insert(name.clone(), value.to_string()).is_some() {
                return Err(bad(format!("field `{name}` given twice")));
            }
            sc.skip_ws();
            match sc.peek() {
                Some(b',') | Some(b'}') => {}
                None => return Err(bad("unbalanced braces: entry is not closed".into())),
                Some(_) => return Err(bad(format!("expected `,` or `}}` after field `{name}`"))),
            }
        }

        let rec = record_from_fields(key, fields, source, &mut warned).map_err(bad)?;
        out.push((at, rec));
        entry += 1;
    }
    Ok(out)
}

fn clean_value(v: &str) -> String {
    let s: String = v.chars().filter(|c| *c != '{' && *c != '}').collect();
    collapse_ws(&s)
}

fn record_from_fields(
    key: String,
    fields: BTreeMap<String, String>,
    source: Source,
    warned: &mut BTreeSet<String>,
) -> Result<Record, String> {
    let title = fields.get("title").map(|t| clean_value(t)).ok_or("missing field `title`")?;
    let year_raw = fields.get("year").map(|t| clean_value(t)).ok_or("missing field `year`")?;
    let year: i32 = year_raw
        .parse()
        .map_err(|_| format!("year `{year_raw}` is not an integer"))?;
    let mut rec = Record::new(key, title, year);
    rec.source = source;

    for (name, raw) in &fields {
        let value = clean_value(raw);
        match name.as_str() {
            "title" | "year" => {}
            "author" => {
                rec.authors = value.split(" and ").map(str::to_string).collect();
            }
            "journal" => {
                rec.venue = value;
                rec.published = true;
            }
            "keywords" => {
                rec.keywords = value
                    .split([',', ';'])
                    .map(|k| k.trim().to_lowercase())
                    .filter(|k| !k.is_empty())
                    .collect();
            }
            "cites" => {
                rec.references = value.split(',').map(|r| r.trim().to_string()).collect();
            }
            "citations" => {
                rec.global_citations = value
                    .parse()
                    .map_err(|_| format!("citations `{value}` is not a non-negative integer"))?;
            }
            "impactfactor" => {
                rec.impact_factor = value
                    .parse()
                    .map_err(|_| format!("impactfactor `{value}` is not a number"))?;
            }
            other => {
                if warned.insert(other.to_string()) {
                    log::warn!("ignoring unknown bibtex field `{other}`");
                }
            }
        }
    }
    rec.normalize();
    rec.validate()?;
    Ok(rec)
}

/// One screening stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub entered: usize,
    pub excluded: usize,
    pub reason: String,
}

/// PRISMA-style accounting of records entering and leaving each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningLedger {
    stages: Vec<Stage>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("records `{0}` and `{1}` share normalized title and year")]
    DuplicateTitleYear(String, String),
    #[error("unknown record id(s): {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("stage `{0}` already exists in the ledger")]
    RepeatedStage(String),
    #[error("ledger inconsistency: {0}")]
    Ledger(String),
    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("ledger CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl ScreeningLedger {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Records remaining after the last stage, if any stage exists.
    pub fn remaining(&self) -> Option<usize> {
        self.stages.last().map(|s| s.entered - s.excluded)
    }

    /// Appends a stage, enforcing name uniqueness and telescoping counts.
    pub fn push(&mut self, stage: Stage) -> Result<(), CorpusError> {
        if self.stages.iter().any(|s| s.name == stage.name) {
            return Err(CorpusError::RepeatedStage(stage.name));
        }
        if stage.excluded > stage.entered {
            return Err(CorpusError::Ledger(format!(
                "stage `{}` excludes {} of {} records",
                stage.name, stage.excluded, stage.entered
            )));
        }
        if let Some(rem) = self.remaining() {
            if rem != stage.entered {
                return Err(CorpusError::Ledger(format!(
                    "stage `{}` enters {} records but {} remain after the previous stage",
                    stage.name, stage.entered, rem
                )));
            }
        }
        self.stages.push(stage);
        Ok(())
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), CorpusError> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wtr.write_record(["stage", "entered", "excluded", "reason"])?;
        for s in &self.stages {
            wtr.write_record([s.name.as_str(), &s.entered.to_string(), &s.excluded.to_string(), &s.reason])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self, CorpusError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["stage", "entered", "excluded", "reason"] {
            return Err(CorpusError::Ledger(
                "expected header `stage,entered,excluded,reason`".into(),
            ));
        }
        let mut ledger = ScreeningLedger::default();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let num = |k: usize| -> Result<usize, CorpusError> {
                row[k]
                    .parse()
                    .map_err(|_| CorpusError::Ledger(format!("line {}: `{}` is not a count", i + 2, &row[k])))
            };
            ledger.push(Stage {
                name: row[0].to_string(),
                entered: num(1)?,
                excluded: num(2)?,
                reason: row[3].to_string(),
            })?;
        }
        Ok(ledger)
    }
}

/// The screened collection with its ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<Record>,
    ledger: ScreeningLedger,
    reference_universe: BTreeSet<String>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus with an empty ledger.
    pub fn new(records: Vec<Record>) -> Result<Self, CorpusError> {
        Self::with_ledger(records, ScreeningLedger::default())
    }

    /// Builds a corpus whose size must agree with the ledger's final count.
    pub fn with_ledger(records: Vec<Record>, ledger: ScreeningLedger) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(records.len());
        let mut titles: HashMap<(String, i32), usize> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|message| CorpusError::InvalidRecord {
                id: r.id.clone(),
                message,
            })?;
            if index.insert(r.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
            if let Some(&j) = titles.get(&r.dedupe_key()) {
                return Err(CorpusError::DuplicateTitleYear(records[j].id.clone(), r.id.clone()));
            }
            titles.insert(r.dedupe_key(), i);
        }
        if let Some(rem) = ledger.remaining() {
            if rem != records.len() {
                return Err(CorpusError::Ledger(format!(
                    "ledger leaves {rem} records but the corpus holds {}",
                    records.len()
                )));
            }
        }
        let reference_universe = records.iter().flat_map(|r| r.references.iter().cloned()).collect();
        Ok(Self {
            records,
            ledger,
            reference_universe,
            index,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn ledger(&self) -> &ScreeningLedger {
        &self.ledger
    }

    pub fn reference_universe(&self) -> &BTreeSet<String> {
        &self.reference_universe
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }
}

/// Collapses records sharing a normalized `(title, year)` (or an id) to one
/// survivor: the record with the most references, ties broken by the
/// lexicographically smaller id. Survivors keep their input order.
///
/// The returned corpus ledger starts with a `deduplication` stage.
pub fn dedupe(records: Vec<Record>) -> (Corpus, Vec<Record>) {
    let n = records.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut by_title: HashMap<(String, i32), usize> = HashMap::new();
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        for j in [by_title.get(&r.dedupe_key()).copied(), by_id.get(r.id.as_str()).copied()]
            .into_iter()
            .flatten()
        {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        by_title.entry(r.dedupe_key()).or_insert(i);
        by_id.entry(r.id.as_str()).or_insert(i);
    }

    let mut best: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let cur = best.entry(root).or_insert(i);
        let (a, b) = (&records[i], &records[*cur]);
        let better = a.references.len() > b.references.len()
            || (a.references.len() == b.references.len() && a.id < b.id);
        if better {
            *cur = i;
        }
    }
    let survivors: BTreeSet<usize> = best.into_values().collect();

    let mut kept = Vec::with_capacity(survivors.len());
    let mut removed = Vec::new();
    for (i, r) in records.into_iter().enumerate() {
        if survivors.contains(&i) {
            kept.push(r);
        } else {
            removed.push(r);
        }
    }
    let mut ledger = ScreeningLedger::default();
    ledger
        .push(Stage {
            name: "deduplication".into(),
            entered: n,
            excluded: removed.len(),
            reason: "duplicate normalized title and year".into(),
        })
        .expect("first stage is always consistent");
    let corpus = Corpus::with_ledger(kept, ledger).expect("dedupe survivors are unique by construction");
    (corpus, removed)
}

/// Removes `exclude_ids` from the corpus and records the stage.
pub fn screen(
    corpus: &Corpus,
    stage_name: &str,
    exclude_ids: &BTreeSet<String>,
    reason: &str,
) -> Result<Corpus, CorpusError> {
    let unknown: Vec<String> = exclude_ids.iter().filter(|id| !corpus.contains(id)).cloned().collect();
    if !unknown.is_empty() {
        return Err(CorpusError::UnknownIds(unknown));
    }
    let mut ledger = corpus.ledger.clone();
    ledger.push(Stage {
        name: stage_name.to_string(),
        entered: corpus.len(),
        excluded: exclude_ids.len(),
        reason: reason.to_string(),
    })?;
    let records = corpus
        .records
        .iter()
        .filter(|r| !exclude_ids.contains(&r.id))
        .cloned()
        .collect();
    Corpus::with_ledger(records, ledger)
}
