//! Partial correlation effect sizes and the effects table loader.
//!
//! Every estimate is reduced to `pcc = t / √(t² + df)` with
//! `se = √((1 − pcc²) / df)`. The Fisher-z variant uses
//! `se_z = 1 / √(df − 1)`; this is a convention, since a partial correlation
//! carries no sample size from which the usual `n − 3` rule could be taken.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::Partition;
use crate::corpus::Corpus;
use crate::fmt::real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Onset {
    Slow,
    Fast,
}

impl Onset {
    pub const ALL: [Onset; 2] = [Onset::Slow, Onset::Fast];

    pub fn as_str(self) -> &'static str {
        match self {
            Onset::Slow => "slow",
            Onset::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Onset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slow" => Ok(Onset::Slow),
            "fast" => Ok(Onset::Fast),
            other => Err(format!("onset `{other}` is not slow|fast")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EffectError {
    #[error("df must be at least 1")]
    ZeroDf,
    #[error("t-value {0} is not finite")]
    NonFiniteT(f64),
    #[error("coefficient standard error must be positive, got {0}")]
    NonPositiveCoefSe(f64),
    #[error("|pcc| = 1: degenerate estimate")]
    Degenerate,
    #[error("|pcc| must be below 1, got {0}")]
    PccOutOfRange(f64),
    #[error("Fisher z needs df >= 2")]
    FisherDf,
}

/// `(pcc, se)` from a t-statistic.
pub fn pcc_from_t(t: f64, df: u32) -> Result<(f64, f64), EffectError> {
    if df == 0 {
        return Err(EffectError::ZeroDf);
    }
    if !t.is_finite() {
        return Err(EffectError::NonFiniteT(t));
    }
    let df = df as f64;
    let denom = t * t + df;
    // t² overflow: the limit is ±1, rejected downstream as degenerate
    if !denom.is_finite() {
        return Ok((t.signum(), 0.0));
    }
    // √((1 − pcc²)/df) rewritten as 1/√(t² + df); the literal form cancels
    // for large |t|
    let root = denom.sqrt();
    Ok((t / root, 1.0 / root))
}

/// `(pcc, se)` from a coefficient and its standard error.
pub fn pcc_from_coef(coef: f64, coef_se: f64, df: u32) -> Result<(f64, f64), EffectError> {
    if !(coef_se > 0.0) {
        return Err(EffectError::NonPositiveCoefSe(coef_se));
    }
    pcc_from_t(coef / coef_se, df)
}

/// Fisher's z transform `(½ ln((1+r)/(1−r)), 1/√(df−1))`.
pub fn fisher_z(pcc: f64, df: u32) -> Result<(f64, f64), EffectError> {
    if !(pcc.abs() < 1.0) {
        return Err(EffectError::PccOutOfRange(pcc));
    }
    if df < 2 {
        return Err(EffectError::FisherDf);
    }
    Ok((pcc.atanh(), 1.0 / ((df - 1) as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeratorKind {
    Dummy,
    Continuous,
}

/// One coded moderator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeratorSpec {
    pub name: String,
    /// Row group in the regression tables.
    pub group: &'static str,
    pub kind: ModeratorKind,
    /// Dummies sharing a group here are mutually exclusive.
    pub exclusive: Option<&'static str>,
}

const CONTROL_NAMES: [&str; 18] = [
    "income",
    "agriculture",
    "conflict",
    "political_stability",
    "population",
    "diaspora",
    "past_migration",
    "poverty",
    "culture",
    "geography",
    "labor",
    "urban",
    "international_aid",
    "education",
    "environment",
    "destination",
    "origin",
    "slow_and_fast_included",
];

/// Moderator taxonomy in canonical (table) order.
pub fn moderator_specs() -> &'static [ModeratorSpec] {
    static SPECS: OnceLock<Vec<ModeratorSpec>> = OnceLock::new();
    SPECS.get_or_init(|| {
        use ModeratorKind::*;
        let mut v = Vec::new();
        let mut add = |name: String, group: &'static str, kind, exclusive| {
            v.push(ModeratorSpec {
                name,
                group,
                kind,
                exclusive,
            })
        };
        add("preferred_specification".into(), "paper", Dummy, None);
        add("published".into(), "paper", Dummy, None);
        add("impact_factor".into(), "paper", Continuous, None);
        for c in ["internal", "international", "urbanization"] {
            add(format!("corridor_{c}"), "corridor", Dummy, Some("corridor"));
        }
        for m in ["flows", "stock"] {
            add(format!("measurement_{m}"), "measurement", Dummy, Some("measurement"));
        }
        for o in ["africa", "asia", "europe", "lac", "mena", "north_america"] {
            add(format!("origin_{o}"), "origin", Dummy, None);
        }
        for d in ["high", "upper_middle", "lower_middle"] {
            add(format!("dest_{d}_income"), "destination", Dummy, None);
        }
        for p in ["temperature", "precipitation", "soil_degradation"] {
            for m in ["levels", "deviation", "anomaly"] {
                add(format!("{p}_{m}"), "slow_onset", Dummy, None);
            }
        }
        add("time_lag".into(), "slow_onset", Continuous, None);
        for e in ["geophysical", "meteorological", "hydrological", "climatological"] {
            add(format!("event_{e}"), "fast_onset", Dummy, None);
        }
        for m in ["occurrence", "frequency", "intensity", "duration", "losses"] {
            add(format!("disaster_{m}"), "fast_onset", Dummy, None);
        }
        add("multiple_disasters".into(), "fast_onset", Dummy, None);
        for s in ["census", "survey", "official_statistics", "research_data"] {
            add(format!("source_{s}"), "sample", Dummy, Some("source"));
        }
        for u in ["household", "individual", "country"] {
            add(format!("unit_{u}"), "sample", Dummy, Some("unit"));
        }
        add("time_span".into(), "sample", Continuous, None);
        for e in ["panel", "poisson", "linear", "iv", "logit"] {
            add(format!("est_{e}"), "estimation", Dummy, None);
        }
        for c in CONTROL_NAMES {
            add(format!("control_{c}"), "controls", Dummy, None);
        }
        for c in &CONTROL_NAMES[..CONTROL_NAMES.len() - 1] {
            add(format!("channel_{c}"), "channels", Dummy, None);
        }
        v
    })
}

pub fn moderator_index(name: &str) -> Option<usize> {
    moderator_specs().iter().position(|s| s.name == name)
}

/// One reported estimate with its derived effect size.
///
/// `pcc` and `se` are computed from `(t, df)` at construction and cannot be
/// set independently.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectRecord {
    pub study_id: String,
    pub estimate_id: String,
    pub onset: Onset,
    /// Community of the study, `None` when unassigned.
    pub cluster: Option<usize>,
    /// Nonzero moderator values by name; absent means 0.
    pub moderators: BTreeMap<String, f64>,
    /// Source-scale coefficient, when reported.
    pub coef: Option<f64>,
    pub coef_se: Option<f64>,
    t: f64,
    df: u32,
    pcc: f64,
    se: f64,
}

impl EffectRecord {
    pub fn from_t(study_id: impl Into<String>, estimate_id: impl Into<String>, onset: Onset, t: f64, df: u32) -> Result<Self, EffectError> {
        let (pcc, se) = pcc_from_t(t, df)?;
        if pcc.abs() >= 1.0 || se <= 0.0 {
            return Err(EffectError::Degenerate);
        }
        Ok(Self {
            study_id: study_id.into(),
            estimate_id: estimate_id.into(),
            onset,
            cluster: None,
            moderators: BTreeMap::new(),
            coef: None,
            coef_se: None,
            t,
            df,
            pcc,
            se,
        })
    }

    pub fn from_coef(
        study_id: impl Into<String>,
        estimate_id: impl Into<String>,
        onset: Onset,
        coef: f64,
        coef_se: f64,
        df: u32,
    ) -> Result<Self, EffectError> {
        if !(coef_se > 0.0) {
            return Err(EffectError::NonPositiveCoefSe(coef_se));
        }
        let mut r = Self::from_t(study_id, estimate_id, onset, coef / coef_se, df)?;
        r.coef = Some(coef);
        r.coef_se = Some(coef_se);
        Ok(r)
    }

    pub fn with_moderator(mut self, name: &str, value: f64) -> Self {
        self.set_moderator(name, value);
        self
    }

    pub fn set_moderator(&mut self, name: &str, value: f64) {
        if value == 0.0 {
            self.moderators.remove(name);
        } else {
            self.moderators.insert(name.to_string(), value);
        }
    }

    pub fn with_cluster(mut self, cluster: Option<usize>) -> Self {
        self.cluster = cluster;
        self
    }

    pub fn moderator(&self, name: &str) -> f64 {
        self.moderators.get(name).copied().unwrap_or(0.0)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn df(&self) -> u32 {
        self.df
    }

    pub fn pcc(&self) -> f64 {
        self.pcc
    }

    pub fn se(&self) -> f64 {
        self.se
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.se
    }
}

#[derive(Debug, Error)]
pub enum EffectsError {
    #[error("effects CSV header: {0}")]
    Header(String),
    #[error("study id(s) not in the corpus: {}", .0.join(", "))]
    UnknownStudies(Vec<String>),
    #[error("effects CSV line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("effects CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// A row that could not be turned into an [`EffectRecord`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// 1-based line number in the input (header is line 1).
    pub line: u64,
    pub study_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadReport {
    pub raw: BTreeMap<String, usize>,
    pub validated: BTreeMap<String, usize>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone)]
pub struct LoadedEffects {
    pub records: Vec<EffectRecord>,
    pub report: LoadReport,
}

pub const FIXED_COLUMNS: [&str; 7] = ["study_id", "estimate_id", "onset", "coef", "coef_se", "t", "df"];

fn parse_opt(cell: &str) -> Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|_| format!("`{cell}` is not a number"))
}

fn parse_row(
    row: &csv::StringRecord,
    mods: &[(usize, usize)],
    onset_col: usize,
) -> Result<EffectRecord, String> {
    let onset: Onset = row[onset_col].parse()?;
    let coef = parse_opt(&row[3])?;
    let coef_se = parse_opt(&row[4])?;
    let t = parse_opt(&row[5])?;
    let df_cell = row[6].trim();
    if df_cell.is_empty() {
        return Err("df is missing".into());
    }
    let df: u32 = df_cell
        .parse()
        .map_err(|_| format!("df `{df_cell}` is not a non-negative integer"))?;
    if df == 0 {
        return Err("df must be at least 1".into());
    }
    let mut rec = match (t, coef, coef_se) {
        (Some(t), None, None) => EffectRecord::from_t(&row[0], &row[1], onset, t, df),
        (None, Some(c), Some(s)) => EffectRecord::from_coef(&row[0], &row[1], onset, c, s, df),
        (None, None, None) => return Err("neither t nor coef/coef_se given".into()),
        (Some(_), _, _) => return Err("both t and coef/coef_se given".into()),
        _ => return Err("coef and coef_se must both be given".into()),
    }
    .map_err(|e| e.to_string())?;

    let specs = moderator_specs();
    let mut active: BTreeMap<&str, &str> = BTreeMap::new();
    for &(col, m) in mods {
        let spec = &specs[m];
        let v = parse_opt(&row[col])
            .map_err(|e| format!("{}: {e}", spec.name))?
            .unwrap_or(0.0);
        if !v.is_finite() {
            return Err(format!("{} is not finite", spec.name));
        }
        if spec.kind == ModeratorKind::Dummy && v != 0.0 && v != 1.0 {
            return Err(format!("{} must be 0 or 1, got {v}", spec.name));
        }
        if v != 0.0 {
            if let Some(group) = spec.exclusive {
                if let Some(prev) = active.insert(group, &spec.name) {
                    return Err(format!("{prev} and {} are mutually exclusive", spec.name));
                }
            }
        }
        rec.set_moderator(&spec.name, v);
    }
    Ok(rec)
}

/// Reads an effects table.
///
/// Row-level problems are collected in the report and the row is skipped.
/// Study ids that do not resolve in `corpus` abort the load. `published`
/// and `impact_factor` are taken from the corpus when the table has no such
/// column. Clusters come from `partition` when given.
pub fn load_effects(input: impl Read, corpus: &Corpus, partition: Option<&Partition>) -> Result<LoadedEffects, EffectsError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.len() < FIXED_COLUMNS.len() || names[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(EffectsError::Header(format!(
            "must start with `{}`",
            FIXED_COLUMNS.join(",")
        )));
    }
    let mut mods = Vec::new();
    let mut seen = BTreeSet::new();
    for (col, name) in names.iter().enumerate().skip(FIXED_COLUMNS.len()) {
        let m = moderator_index(name).ok_or_else(|| EffectsError::Header(format!("unknown moderator column `{name}`")))?;
        if !seen.insert(m) {
            return Err(EffectsError::Header(format!("moderator column `{name}` repeated")));
        }
        mods.push((col, m));
    }
    let fill_published = moderator_index("published").filter(|m| !seen.contains(m)).is_some();
    let fill_if = moderator_index("impact_factor").filter(|m| !seen.contains(m)).is_some();

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut raw: BTreeMap<String, usize> = Onset::ALL.iter().map(|o| (o.as_str().to_string(), 0)).collect();
    let mut unknown = BTreeSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if let Ok(o) = row[2].parse::<Onset>() {
            *raw.get_mut(o.as_str()).unwrap() += 1;
        }
        let study = row[0].trim().to_string();
        let Some(paper) = corpus.get(&study) else {
            unknown.insert(study);
            continue;
        };
        match parse_row(&row, &mods, 2) {
            Ok(mut rec) => {
                rec.study_id = study.clone();
                if fill_published {
                    rec.set_moderator("published", if paper.published { 1.0 } else { 0.0 });
                }
                if fill_if {
                    rec.set_moderator("impact_factor", paper.impact_factor);
                }
                rec.cluster = partition.and_then(|p| p.label_of(&study));
                records.push(rec);
            }
            Err(reason) => rejected.push(Rejection {
                line,
                study_id: study,
                reason,
            }),
        }
    }
    if !unknown.is_empty() {
        return Err(EffectsError::UnknownStudies(unknown.into_iter().collect()));
    }
    let mut validated: BTreeMap<String, usize> = Onset::ALL.iter().map(|o| (o.as_str().to_string(), 0)).collect();
    for r in &records {
        *validated.get_mut(r.onset.as_str()).unwrap() += 1;
    }
    for r in &rejected {
        log::warn!("effects line {}: {}", r.line, r.reason);
    }
    Ok(LoadedEffects {
        records,
        report: LoadReport { raw, validated, rejected },
    })
}

/// Integers are written exactly, other reals with 17 significant digits.
fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        real(v)
    }
}

pub const VALIDATED_FIXED: [&str; 10] = ["study_id", "estimate_id", "onset", "cluster", "coef", "coef_se", "t", "df", "pcc", "se"];

/// Writes validated effects. Only moderators that are nonzero somewhere get
/// a column; missing columns read back as 0.
pub fn write_validated_csv(records: &[EffectRecord], w: impl Write) -> Result<(), EffectsError> {
    let used: Vec<&ModeratorSpec> = moderator_specs()
        .iter()
        .filter(|s| records.iter().any(|r| r.moderators.contains_key(&s.name)))
        .collect();
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header: Vec<&str> = VALIDATED_FIXED.to_vec();
    header.extend(used.iter().map(|s| s.name.as_str()));
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.study_id.clone(),
            r.estimate_id.clone(),
            r.onset.as_str().to_string(),
            r.cluster.map_or_else(|| "unassigned".to_string(), |c| c.to_string()),
            r.coef.map(real).unwrap_or_default(),
            r.coef_se.map(real).unwrap_or_default(),
            real(r.t),
            r.df.to_string(),
            real(r.pcc),
            real(r.se),
        ];
        row.extend(used.iter().map(|s| number(r.moderator(&s.name))));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads the output of [`write_validated_csv`]. `pcc`/`se` are recomputed
/// and must agree with the stored columns.
pub fn read_validated_csv(input: impl Read) -> Result<Vec<EffectRecord>, EffectsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < VALIDATED_FIXED.len() || names[..VALIDATED_FIXED.len()] != VALIDATED_FIXED {
        return Err(EffectsError::Header(format!("must start with `{}`", VALIDATED_FIXED.join(","))));
    }
    let mut mods = Vec::new();
    for name in &names[VALIDATED_FIXED.len()..] {
        mods.push(moderator_index(name).ok_or_else(|| EffectsError::Header(format!("unknown moderator column `{name}`")))?);
    }
    let specs = moderator_specs();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| EffectsError::Schema { line, message };
        let onset: Onset = row[2].parse().map_err(err)?;
        let cluster = match &row[3] {
            "unassigned" => None,
            c => Some(c.parse().map_err(|_| err(format!("cluster `{c}` is not a label")))?),
        };
        let num = |k: usize| parse_opt(&row[k]).map_err(err);
        let t = num(6)?.ok_or_else(|| err("t is missing".into()))?;
        let df: u32 = row[7].parse().map_err(|_| err(format!("df `{}` is not an integer", &row[7])))?;
        let mut rec = EffectRecord::from_t(&row[0], &row[1], onset, t, df).map_err(|e| err(e.to_string()))?;
        let stored_pcc = num(8)?.unwrap_or(f64::NAN);
        if stored_pcc.to_bits() != rec.pcc.to_bits() {
            return Err(err(format!("pcc {stored_pcc} disagrees with t and df")));
        }
        rec.cluster = cluster;
        rec.coef = num(4)?;
        rec.coef_se = num(5)?;
        for (k, &m) in mods.iter().enumerate() {
            let v = num(VALIDATED_FIXED.len() + k)?.unwrap_or(0.0);
            rec.set_moderator(&specs[m].name, v);
        }
        out.push(rec);
    }
    Ok(out)
}
