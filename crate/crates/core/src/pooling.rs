//! Fixed- and random-effects pooling with Cochran's Q and I².
//!
//! The between-study variance under REM is the DerSimonian–Laird moment
//! estimator. Confidence intervals use the normal critical value
//! [`Z_95`](crate::special::Z_95).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::Partition;
use crate::effects::{EffectRecord, Onset};
use crate::fmt::{opt_real, real};
use crate::special::{chi2_sf, Z_95};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "FEM")]
    Fem,
    #[serde(rename = "REM")]
    Rem,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Fem => "FEM",
            Model::Rem => "REM",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "FEM" => Ok(Model::Fem),
            "REM" => Ok(Model::Rem),
            _ => Err(format!("unknown model `{s}` (expected FEM|REM)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("pooling needs at least 2 estimates, got {0}")]
    TooFew(usize),
    #[error("estimate {index} has non-positive or non-finite se {se}")]
    BadSe { index: usize, se: f64 },
    #[error("estimate {index} has non-finite effect {value}")]
    BadEffect { index: usize, value: f64 },
    #[error("effect and se lengths differ ({0} vs {1})")]
    Length(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PooledResult {
    pub model: Model,
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub q: f64,
    pub q_df: usize,
    pub q_pvalue: f64,
    pub i2: f64,
    pub tau2: f64,
    pub k: usize,
    pub n_studies: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QStat {
    pub q: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn check(y: &[f64], se: &[f64]) -> Result<(), PoolError> {
    if y.len() != se.len() {
        return Err(PoolError::Length(y.len(), se.len()));
    }
    if y.len() < 2 {
        return Err(PoolError::TooFew(y.len()));
    }
    for (index, (&v, &s)) in y.iter().zip(se).enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(PoolError::BadSe { index, se: s });
        }
        if !v.is_finite() {
            return Err(PoolError::BadEffect { index, value: v });
        }
    }
    Ok(())
}

fn weights(se: &[f64], tau2: f64) -> Vec<f64> {
    se.iter().map(|s| 1.0 / (s * s + tau2)).collect()
}

fn weighted_mean(y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw = neumaier_sum(w.iter().copied());
    (neumaier_sum(y.iter().zip(w).map(|(y, w)| y * w)) / sw, sw)
}

/// Cochran's Q on raw vectors, with FEM weights `1/se²`.
pub fn q_statistic_raw(y: &[f64], se: &[f64]) -> Result<QStat, PoolError> {
    check(y, se)?;
    let w = weights(se, 0.0);
    let (mean, _) = weighted_mean(y, &w);
    let q = neumaier_sum(y.iter().zip(&w).map(|(y, w)| w * (y - mean).powi(2)));
    let df = y.len() - 1;
    Ok(QStat {
        q,
        df,
        p_value: chi2_sf(q, df as f64),
    })
}

pub fn q_statistic(effects: &[EffectRecord]) -> Result<QStat, PoolError> {
    let (y, se) = split(effects);
    q_statistic_raw(&y, &se)
}

/// `max(0, (Q − (k−1)) / Q) · 100`, and 0 when `Q = 0`.
pub fn i_squared(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    ((q - (k as f64 - 1.0)) / q).max(0.0) * 100.0
}

/// DerSimonian–Laird `τ² = max(0, (Q − (k−1)) / (Σw − Σw²/Σw))`.
pub fn dl_tau2(q: f64, k: usize, se: &[f64]) -> f64 {
    let w = weights(se, 0.0);
    let sw = neumaier_sum(w.iter().copied());
    let sw2 = neumaier_sum(w.iter().map(|w| w * w));
    let c = sw - sw2 / sw;
    if !(c > 0.0) {
        return 0.0;
    }
    ((q - (k as f64 - 1.0)) / c).max(0.0)
}

/// Pools raw `(effect, se)` pairs; `n_studies` is set to `k`.
pub fn pool_raw(y: &[f64], se: &[f64], model: Model) -> Result<PooledResult, PoolError> {
    let qs = q_statistic_raw(y, se)?;
    let k = y.len();
    let tau2 = match model {
        Model::Fem => 0.0,
        Model::Rem => dl_tau2(qs.q, k, se),
    };
    let w = weights(se, tau2);
    let (mean, sw) = weighted_mean(y, &w);
    let var = 1.0 / sw;
    let half = Z_95 * var.sqrt();
    Ok(PooledResult {
        model,
        mean,
        se: var.sqrt(),
        ci_low: mean - half,
        ci_high: mean + half,
        q: qs.q,
        q_df: qs.df,
        q_pvalue: qs.p_value,
        i2: i_squared(qs.q, k),
        tau2,
        k,
        n_studies: k,
    })
}

fn split(effects: &[EffectRecord]) -> (Vec<f64>, Vec<f64>) {
    effects.iter().map(|e| (e.pcc(), e.se())).unzip()
}

pub fn pool(effects: &[EffectRecord], model: Model) -> Result<PooledResult, PoolError> {
    let (y, se) = split(effects);
    let mut r = pool_raw(&y, &se, model)?;
    r.n_studies = count_studies(effects.iter());
    Ok(r)
}

fn count_studies<'a>(effects: impl Iterator<Item = &'a EffectRecord>) -> usize {
    effects.map(|e| e.study_id.as_str()).collect::<BTreeSet<_>>().len()
}

/// Sub-sample of one onset type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Overall,
    Cluster(usize),
    Unassigned,
}

impl Group {
    pub fn name(self, onset: Onset) -> String {
        match self {
            Group::Overall => format!("{}/overall", onset.as_str()),
            Group::Cluster(c) => format!("{}/cluster_{c}", onset.as_str()),
            Group::Unassigned => format!("{}/unassigned", onset.as_str()),
        }
    }

    pub fn contains(self, e: &EffectRecord) -> bool {
        match self {
            Group::Overall => true,
            Group::Cluster(c) => e.cluster == Some(c),
            Group::Unassigned => e.cluster.is_none(),
        }
    }
}

/// Groups in table order for one onset: overall, every cluster holding at
/// least one estimate (of any onset), then unassigned when present.
pub fn groups(effects: &[EffectRecord], partition: Option<&Partition>) -> Vec<Group> {
    let with_effects: BTreeSet<usize> = effects.iter().filter_map(|e| e.cluster).collect();
    let clusters: Vec<usize> = match partition {
        Some(p) => p.labels().filter(|l| with_effects.contains(l)).collect(),
        None => with_effects.into_iter().collect(),
    };
    let mut out = vec![Group::Overall];
    out.extend(clusters.into_iter().map(Group::Cluster));
    if effects.iter().any(|e| e.cluster.is_none()) {
        out.push(Group::Unassigned);
    }
    out
}

/// One row of the pooling table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolRow {
    pub onset: Onset,
    pub group: Group,
    pub model: Model,
    pub k: usize,
    pub n_studies: usize,
    /// `None` when the group had fewer than 2 estimates.
    pub result: Option<PooledResult>,
}

impl PoolRow {
    pub fn name(&self) -> String {
        self.group.name(self.onset)
    }
}

/// Pools every (onset, group) pair under each model. Never aborts: groups
/// with fewer than 2 estimates come back with `result = None`.
pub fn pool_by_cluster(effects: &[EffectRecord], partition: Option<&Partition>, models: &[Model]) -> Vec<PoolRow> {
    let groups = groups(effects, partition);
    let mut out = Vec::new();
    for onset in Onset::ALL {
        for &group in &groups {
            let sub: Vec<EffectRecord> = effects.iter().filter(|e| e.onset == onset && group.contains(e)).cloned().collect();
            for &model in models {
                let result = match pool(&sub, model) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        log::info!("{} {}: skipped ({e})", group.name(onset), model.as_str());
                        None
                    }
                };
                out.push(PoolRow {
                    onset,
                    group,
                    model,
                    k: sub.len(),
                    n_studies: count_studies(sub.iter()),
                    result,
                });
            }
        }
    }
    out
}

pub const POOLING_HEADER: [&str; 9] = ["group", "model", "mean", "ci_low", "ci_high", "I2", "Q_pvalue", "k", "n_studies"];

pub fn write_pooling_csv(rows: &[PoolRow], w: impl Write) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record(POOLING_HEADER)?;
    for row in rows {
        let r = row.result.as_ref();
        wtr.write_record([
            row.name(),
            row.model.as_str().to_string(),
            opt_real(r.map(|r| r.mean)),
            opt_real(r.map(|r| r.ci_low)),
            opt_real(r.map(|r| r.ci_high)),
            opt_real(r.map(|r| r.i2)),
            opt_real(r.map(|r| r.q_pvalue)),
            row.k.to_string(),
            row.n_studies.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub study_id: String,
    pub onset: Onset,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Five-number summary of pcc per (study, onset), ordered by onset then
/// study id.
pub fn boxplot_data(effects: &[EffectRecord]) -> Vec<BoxStats> {
    let mut by: BTreeMap<(Onset, &str), Vec<f64>> = BTreeMap::new();
    for e in effects {
        by.entry((e.onset, e.study_id.as_str())).or_default().push(e.pcc());
    }
    by.into_iter()
        .map(|((onset, study), mut v)| {
            v.sort_by(f64::total_cmp);
            BoxStats {
                study_id: study.to_string(),
                onset,
                n: v.len(),
                min: v[0],
                q1: quantile_sorted(&v, 0.25),
                median: quantile_sorted(&v, 0.5),
                q3: quantile_sorted(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect()
}

pub fn write_boxplot_csv(stats: &[BoxStats], w: impl Write) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record(["study_id", "onset", "n", "min", "q1", "median", "q3", "max"])?;
    for s in stats {
        wtr.write_record([
            s.study_id.clone(),
            s.onset.as_str().to_string(),
            s.n.to_string(),
            real(s.min),
            real(s.q1),
            real(s.median),
            real(s.q3),
            real(s.max),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
