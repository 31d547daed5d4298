//! Weighted least squares with classical or cluster-robust errors, the
//! FAT-PET and PEESE bias regressions, moderated meta-regression and
//! stepwise moderator selection.
//!
//! All bias regressions are fitted in the t-form obtained by dividing the
//! level equation `pcc_i = β₀ + β₁ se_i + Σ γ_j m_ij + ε_i` through by `se_i`:
//!
//! ```text
//! t_i = β₀ (1/se_i) + β₁ + Σ γ_j (m_ij / se_i) + ε_i/se_i
//! ```
//!
//! with unit weights, which is the level form under weights `1/se_i²`.
//! Moderators therefore enter as `m_ij / se_i`. PEESE replaces the
//! intercept by `se_i` (the level form uses `se_i²`).
//!
//! Coefficient inference is normal for classical errors and Student t with
//! `G − 1` degrees of freedom for cluster-robust errors over `G` clusters.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::community::Partition;
use crate::effects::{moderator_index, moderator_specs, EffectRecord, Onset};
use crate::fmt::real;
use crate::linalg::{Matrix, Qr};
use crate::pooling::{groups, Group};
use crate::special::{normal_two_sided_p, t_critical, t_two_sided_p, Z_95};

pub const PET: &str = "pet_constant";
pub const FAT: &str = "fat_se";
pub const PEESE_CONSTANT: &str = "peese_constant";
pub const PEESE_SE: &str = "peese_se";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Spec {
    FatPet,
    Peese,
    MultipleMra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeKind {
    Classical,
    ClusterRobust,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TraceAction {
    #[serde(rename = "add")]
    Add,
    #[serde(rename = "drop")]
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub action: TraceAction,
    pub moderator: String,
    pub p_value: f64,
    /// Threshold the p-value was compared against.
    pub criterion: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("row {row}: {message}")]
    BadInput { row: usize, message: String },
    #[error("design is rank deficient; collinear column(s): {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("{n} observations cannot identify {p} coefficients")]
    TooFewObservations { n: usize, p: usize },
    #[error("cluster-robust errors need at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("unknown moderator `{0}`")]
    UnknownModerator(String),
    #[error("stepwise thresholds need 0 < enter_p <= remove_p < 1, got {0} and {1}")]
    Thresholds(f64, f64),
    #[error("stepwise did not converge within {limit} steps")]
    NoConvergence { limit: usize, trace: Vec<TraceStep> },
}

/// Solution of one weighted least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub coefficients: Vec<Coefficient>,
    pub cov: Matrix,
    /// Unweighted residuals `y − Xβ`.
    pub residuals: Vec<f64>,
    pub se_kind: SeKind,
    pub n_obs: usize,
    pub n_clusters: Option<usize>,
    /// Residual variance of the weighted fit, `Σ w e² / (n − p)`.
    pub sigma2: f64,
}

impl WlsFit {
    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

/// Weighted least squares `β = (XᵀWX)⁻¹XᵀWy` via Householder QR of `√W X`.
///
/// With `clusters`, standard errors come from the sandwich
/// `(XᵀWX)⁻¹ (Σ_g X_gᵀW_g e_g e_gᵀW_g X_g) (XᵀWX)⁻¹` scaled by
/// `G/(G−1) · (N−1)/(N−K)`.
pub fn wls(y: &[f64], x: &Matrix, names: &[String], weights: &[f64], clusters: Option<&[usize]>) -> Result<WlsFit, RegressionError> {
    let n = y.len();
    let p = x.ncols();
    if x.nrows() != n || weights.len() != n || names.len() != p {
        return Err(RegressionError::Dimension(format!(
            "y has {n} rows, X is {}x{}, {} weights, {} names",
            x.nrows(),
            p,
            weights.len(),
            names.len()
        )));
    }
    if let Some(c) = clusters {
        if c.len() != n {
            return Err(RegressionError::Dimension(format!("{} cluster ids for {n} rows", c.len())));
        }
    }
    for i in 0..n {
        if !(weights[i] > 0.0 && weights[i].is_finite()) {
            return Err(RegressionError::BadInput {
                row: i,
                message: format!("weight {} must be positive and finite", weights[i]),
            });
        }
        if !y[i].is_finite() || (0..p).any(|j| !x[(i, j)].is_finite()) {
            return Err(RegressionError::BadInput {
                row: i,
                message: "non-finite value".into(),
            });
        }
    }
    if n <= p {
        return Err(RegressionError::TooFewObservations { n, p });
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let xs = Matrix::from_fn(n, p, |i, j| x[(i, j)] * sw[i]);
    let ys: Vec<f64> = y.iter().zip(&sw).map(|(y, s)| y * s).collect();
    let qr = Qr::new(&xs);
    if !qr.is_full_rank() {
        return Err(RegressionError::RankDeficient(qr.dropped().iter().map(|&j| names[j].clone()).collect()));
    }
    let beta = qr.solve(&ys);
    let fitted = x.mul_vec(&beta);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let ssr: f64 = residuals.iter().zip(weights).map(|(e, w)| w * e * e).sum();
    let sigma2 = ssr / (n - p) as f64;
    let ginv = qr.gram_inverse();

    let (cov, se_kind, n_clusters, crit, pfun): (Matrix, SeKind, Option<usize>, f64, Box<dyn Fn(f64) -> f64>) = match clusters {
        None => {
            let mut cov = ginv;
            cov.scale(sigma2);
            (cov, SeKind::Classical, None, Z_95, Box::new(normal_two_sided_p))
        }
        Some(ids) => {
            let mut index: BTreeMap<usize, usize> = BTreeMap::new();
            for &c in ids {
                let next = index.len();
                index.entry(c).or_insert(next);
            }
            let g = index.len();
            if g < 2 {
                return Err(RegressionError::TooFewClusters(g));
            }
            let mut scores = vec![vec![0.0; p]; g];
            for i in 0..n {
                let s = &mut scores[index[&ids[i]]];
                let we = weights[i] * residuals[i];
                for j in 0..p {
                    s[j] += x[(i, j)] * we;
                }
            }
            let mut meat = Matrix::zeros(p, p);
            for s in &scores {
                for a in 0..p {
                    for b in 0..p {
                        meat[(a, b)] += s[a] * s[b];
                    }
                }
            }
            let mut cov = ginv.matmul(&meat).matmul(&ginv);
            let gf = g as f64;
            cov.scale(gf / (gf - 1.0) * (n as f64 - 1.0) / (n - p) as f64);
            let df = gf - 1.0;
            (
                cov,
                SeKind::ClusterRobust,
                Some(g),
                t_critical(0.05, df),
                Box::new(move |t| t_two_sided_p(t, df)),
            )
        }
    };

    let coefficients = (0..p)
        .map(|j| {
            let se = cov[(j, j)].max(0.0).sqrt();
            let est = beta[j];
            Coefficient {
                name: names[j].clone(),
                estimate: est,
                se,
                p_value: pfun(est / se),
                ci_low: est - crit * se,
                ci_high: est + crit * se,
            }
        })
        .collect();
    Ok(WlsFit {
        coefficients,
        cov,
        residuals,
        se_kind,
        n_obs: n,
        n_clusters,
        sigma2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub spec: Spec,
    pub coefficients: Vec<Coefficient>,
    pub weights_kind: &'static str,
    pub se_kind: SeKind,
    pub n_obs: usize,
    pub n_studies: usize,
    pub included_moderators: Vec<String>,
    pub warnings: Vec<String>,
}

impl RegressionResult {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// `term,estimate,se,p,ci_low,ci_high` rows.
    pub fn write_csv_rows(&self, wtr: &mut csv::Writer<impl Write>) -> Result<(), csv::Error> {
        for c in &self.coefficients {
            wtr.write_record([c.name.clone(), real(c.estimate), real(c.se), real(c.p_value), real(c.ci_low), real(c.ci_high)])?;
        }
        Ok(())
    }
}

const WEIGHTS_KIND: &str = "inverse variance 1/se^2 (t-form, unit weights)";

/// Columns of a bias regression prepared from raw `(pcc, se)` data.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaData {
    pub pcc: Vec<f64>,
    pub se: Vec<f64>,
    /// Study index per row; used as cluster id.
    pub study: Vec<usize>,
    pub n_studies: usize,
}

impl MetaData {
    /// Panics if the lengths differ.
    pub fn new(pcc: Vec<f64>, se: Vec<f64>, study: Vec<usize>) -> Self {
        assert!(pcc.len() == se.len() && se.len() == study.len(), "length mismatch");
        let n_studies = study.iter().collect::<BTreeSet<_>>().len();
        Self { pcc, se, study, n_studies }
    }

    pub fn from_effects(effects: &[EffectRecord]) -> Self {
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        for e in effects {
            let next = ids.len();
            ids.entry(e.study_id.as_str()).or_insert(next);
        }
        Self::new(
            effects.iter().map(|e| e.pcc()).collect(),
            effects.iter().map(|e| e.se()).collect(),
            effects.iter().map(|e| ids[e.study_id.as_str()]).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.pcc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pcc.is_empty()
    }

    /// `pcc / se`.
    pub fn t(&self) -> Vec<f64> {
        self.pcc.iter().zip(&self.se).map(|(p, s)| p / s).collect()
    }

    fn check(&self) -> Result<(), RegressionError> {
        for (row, &s) in self.se.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(RegressionError::BadInput {
                    row,
                    message: format!("se {s} must be positive and finite"),
                });
            }
        }
        Ok(())
    }
}

fn clusters_of(data: &MetaData, cluster_robust: bool) -> Option<&[usize]> {
    cluster_robust.then_some(data.study.as_slice())
}

fn fit(
    spec: Spec,
    data: &MetaData,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    cluster_robust: bool,
    included: Vec<String>,
    warnings: Vec<String>,
) -> Result<RegressionResult, RegressionError> {
    data.check()?;
    let x = Matrix::from_columns(&columns);
    let w = vec![1.0; data.len()];
    let f = wls(&data.t(), &x, &names, &w, clusters_of(data, cluster_robust))?;
    Ok(RegressionResult {
        spec,
        coefficients: f.coefficients,
        weights_kind: WEIGHTS_KIND,
        se_kind: f.se_kind,
        n_obs: f.n_obs,
        n_studies: data.n_studies,
        included_moderators: included,
        warnings,
    })
}

fn inv_se(data: &MetaData) -> Vec<f64> {
    data.se.iter().map(|s| 1.0 / s).collect()
}

/// `t_i = β₀ (1/se_i) + β₁`: PET is `pet_constant` (β₀), FAT is `fat_se` (β₁).
pub fn fat_pet_data(data: &MetaData, cluster_robust: bool) -> Result<RegressionResult, RegressionError> {
    fit(
        Spec::FatPet,
        data,
        vec![inv_se(data), vec![1.0; data.len()]],
        vec![PET.into(), FAT.into()],
        cluster_robust,
        Vec::new(),
        Vec::new(),
    )
}

pub fn fat_pet(effects: &[EffectRecord], cluster_robust: bool) -> Result<RegressionResult, RegressionError> {
    fat_pet_data(&MetaData::from_effects(effects), cluster_robust)
}

/// `t_i = β₀ (1/se_i) + β₁ se_i`, no intercept; `peese_constant` is the
/// bias-corrected effect.
pub fn peese_data(data: &MetaData, cluster_robust: bool) -> Result<RegressionResult, RegressionError> {
    fit(
        Spec::Peese,
        data,
        vec![inv_se(data), data.se.clone()],
        vec![PEESE_CONSTANT.into(), PEESE_SE.into()],
        cluster_robust,
        Vec::new(),
        Vec::new(),
    )
}

pub fn peese(effects: &[EffectRecord], cluster_robust: bool) -> Result<RegressionResult, RegressionError> {
    peese_data(&MetaData::from_effects(effects), cluster_robust)
}

/// FAT-PET extended with moderators entering as `m / se`. Moderators are
/// reordered canonically; constant columns and columns dependent on earlier
/// ones are dropped with a warning.
pub fn mra_data(data: &MetaData, moderators: &[(String, Vec<f64>)], cluster_robust: bool) -> Result<RegressionResult, RegressionError> {
    let inv = inv_se(data);
    let mut warnings = Vec::new();
    let mut kept: Vec<&(String, Vec<f64>)> = Vec::new();
    for m in moderators {
        if m.1.len() != data.len() {
            return Err(RegressionError::Dimension(format!("moderator `{}` has {} values", m.0, m.1.len())));
        }
        if m.1.iter().all(|v| *v == m.1[0]) {
            warnings.push(format!("dropped constant moderator `{}`", m.0));
        } else {
            kept.push(m);
        }
    }
    let base_cols = vec![inv.clone(), vec![1.0; data.len()]];
    let mut columns = base_cols.clone();
    let mut names: Vec<String> = vec![PET.into(), FAT.into()];
    for (name, vals) in &kept {
        columns.push(vals.iter().zip(&inv).map(|(m, i)| m * i).collect());
        names.push(name.clone());
    }
    let qr = Qr::new(&Matrix::from_columns(&columns));
    if qr.dropped().iter().any(|&j| j < 2) {
        return Err(RegressionError::RankDeficient(qr.dropped().iter().map(|&j| names[j].clone()).collect()));
    }
    for &j in qr.dropped().iter().rev() {
        warnings.push(format!("dropped moderator `{}`: linearly dependent on earlier columns", names[j]));
    }
    let keep: Vec<usize> = qr.kept().to_vec();
    let columns: Vec<Vec<f64>> = keep.iter().map(|&j| columns[j].clone()).collect();
    let names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    let included = names[2..].to_vec();
    for w in &warnings {
        log::warn!("{w}");
    }
    fit(Spec::MultipleMra, data, columns, names, cluster_robust, included, warnings)
}

/// Values of the named moderators for every effect, in canonical order.
pub fn moderator_columns(effects: &[EffectRecord], names: &[&str]) -> Result<Vec<(String, Vec<f64>)>, RegressionError> {
    let mut idx: Vec<usize> = names
        .iter()
        .map(|n| moderator_index(n).ok_or_else(|| RegressionError::UnknownModerator(n.to_string())))
        .collect::<Result<_, _>>()?;
    idx.sort_unstable();
    idx.dedup();
    let specs = moderator_specs();
    Ok(idx
        .into_iter()
        .map(|i| {
            let name = &specs[i].name;
            (name.clone(), effects.iter().map(|e| e.moderator(name)).collect())
        })
        .collect())
}

pub fn multiple_mra(effects: &[EffectRecord], moderators: &[&str], cluster_robust: bool) -> Result<RegressionResult, RegressionError> {
    let cols = moderator_columns(effects, moderators)?;
    mra_data(&MetaData::from_effects(effects), &cols, cluster_robust)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepwiseOptions {
    pub enter_p: f64,
    pub remove_p: f64,
    pub cluster_robust: bool,
}

impl Default for StepwiseOptions {
    fn default() -> Self {
        Self {
            enter_p: 0.05,
            remove_p: 0.10,
            cluster_robust: true,
        }
    }
}

/// Forward selection with backward pruning over `candidates` (kept in the
/// given order, which is the tie-break order). The FAT-PET terms are always
/// in the model.
pub fn stepwise_data(
    data: &MetaData,
    candidates: &[(String, Vec<f64>)],
    opts: &StepwiseOptions,
) -> Result<(RegressionResult, Vec<TraceStep>), RegressionError> {
    if !(opts.enter_p > 0.0 && opts.enter_p <= opts.remove_p && opts.remove_p < 1.0) {
        return Err(RegressionError::Thresholds(opts.enter_p, opts.remove_p));
    }
    let limit = 10 * candidates.len().max(1);
    let mut included: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let model = |inc: &[usize]| -> Vec<(String, Vec<f64>)> { inc.iter().map(|&i| candidates[i].clone()).collect() };
    let p_of = |r: &RegressionResult, i: usize| r.coef(&candidates[i].0).map(|c| c.p_value);

    loop {
        let mut changed = false;
        let mut best: Option<(usize, f64)> = None;
        for c in 0..candidates.len() {
            if included.contains(&c) {
                continue;
            }
            let mut inc = included.clone();
            inc.push(c);
            inc.sort_unstable();
            let r = match mra_data(data, &model(&inc), opts.cluster_robust) {
                Ok(r) => r,
                Err(RegressionError::RankDeficient(_)) => continue,
                Err(e) => return Err(e),
            };
            if let Some(p) = p_of(&r, c) {
                if p < opts.enter_p && best.is_none_or(|(_, bp)| p < bp) {
                    best = Some((c, p));
                }
            }
        }
        if let Some((c, p)) = best {
            included.push(c);
            included.sort_unstable();
            trace.push(TraceStep {
                step: trace.len() + 1,
                action: TraceAction::Add,
                moderator: candidates[c].0.clone(),
                p_value: p,
                criterion: opts.enter_p,
            });
            changed = true;
        }
        loop {
            let r = mra_data(data, &model(&included), opts.cluster_robust)?;
            let worst = included
                .iter()
                .filter_map(|&i| p_of(&r, i).map(|p| (i, p)))
                .filter(|&(_, p)| p > opts.remove_p)
                .fold(None::<(usize, f64)>, |acc, (i, p)| match acc {
                    Some((_, bp)) if bp >= p => acc,
                    _ => Some((i, p)),
                });
            let Some((i, p)) = worst else { break };
            included.retain(|&x| x != i);
            trace.push(TraceStep {
                step: trace.len() + 1,
                action: TraceAction::Drop,
                moderator: candidates[i].0.clone(),
                p_value: p,
                criterion: opts.remove_p,
            });
            changed = true;
            if trace.len() > limit {
                break;
            }
        }
        if trace.len() > limit {
            return Err(RegressionError::NoConvergence { limit, trace });
        }
        if !changed {
            break;
        }
    }
    let r = mra_data(data, &model(&included), opts.cluster_robust)?;
    Ok((r, trace))
}

pub fn stepwise(
    effects: &[EffectRecord],
    candidates: &[&str],
    enter_p: f64,
    remove_p: f64,
    cluster_robust: bool,
) -> Result<(RegressionResult, Vec<TraceStep>), RegressionError> {
    let cols = moderator_columns(effects, candidates)?;
    stepwise_data(
        &MetaData::from_effects(effects),
        &cols,
        &StepwiseOptions {
            enter_p,
            remove_p,
            cluster_robust,
        },
    )
}

/// Canonical moderators that vary within `effects`.
pub fn varying_moderators(effects: &[EffectRecord]) -> Vec<&'static str> {
    moderator_specs()
        .iter()
        .filter(|s| {
            let first = effects.first().map_or(0.0, |e| e.moderator(&s.name));
            effects.iter().any(|e| e.moderator(&s.name) != first)
        })
        .map(|s| s.name.as_str())
        .collect()
}

pub const MIN_BATTERY_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub name: String,
    pub onset: Onset,
    pub group: Group,
    pub k: usize,
    pub n_studies: usize,
    /// Reason the group was not estimated.
    pub skipped: Option<String>,
    pub fat_pet: Option<RegressionResult>,
    pub peese: Option<RegressionResult>,
    pub mra: Option<RegressionResult>,
    pub stepwise_trace: Vec<TraceStep>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub options: StepwiseOptions,
    pub min_k: usize,
    pub note: &'static str,
    pub groups: Vec<GroupReport>,
}

/// FAT-PET, PEESE and stepwise MRA for every onset × {overall, cluster}
/// group with at least [`MIN_BATTERY_K`] estimates.
pub fn run_battery(effects: &[EffectRecord], partition: Option<&Partition>, opts: &StepwiseOptions) -> BatteryReport {
    let mut out = Vec::new();
    let all_groups: Vec<Group> = groups(effects, partition).into_iter().filter(|g| *g != Group::Unassigned).collect();
    for onset in Onset::ALL {
        for &group in &all_groups {
            let sub: Vec<EffectRecord> = effects.iter().filter(|e| e.onset == onset && group.contains(e)).cloned().collect();
            let data = MetaData::from_effects(&sub);
            let mut rep = GroupReport {
                name: group.name(onset),
                onset,
                group,
                k: sub.len(),
                n_studies: data.n_studies,
                skipped: None,
                fat_pet: None,
                peese: None,
                mra: None,
                stepwise_trace: Vec::new(),
                errors: Vec::new(),
            };
            if sub.len() < MIN_BATTERY_K {
                let msg = format!("k = {} < {MIN_BATTERY_K}", sub.len());
                log::info!("{}: skipped ({msg})", rep.name);
                rep.skipped = Some(msg);
                out.push(rep);
                continue;
            }
            match fat_pet_data(&data, opts.cluster_robust) {
                Ok(r) => rep.fat_pet = Some(r),
                Err(e) => rep.errors.push(format!("fat_pet: {e}")),
            }
            match peese_data(&data, opts.cluster_robust) {
                Ok(r) => rep.peese = Some(r),
                Err(e) => rep.errors.push(format!("peese: {e}")),
            }
            let cand = varying_moderators(&sub);
            let result = moderator_columns(&sub, &cand).and_then(|cols| stepwise_data(&data, &cols, opts));
            match result {
                Ok((r, trace)) => {
                    rep.mra = Some(r);
                    rep.stepwise_trace = trace;
                }
                Err(e) => rep.errors.push(format!("mra: {e}")),
            }
            for e in &rep.errors {
                log::warn!("{}: {e}", rep.name);
            }
            out.push(rep);
        }
    }
    BatteryReport {
        options: *opts,
        min_k: MIN_BATTERY_K,
        note: "precision-weighted WLS with study-clustered errors; no between-study variance term inside the meta-regressions",
        groups: out,
    }
}

pub const TERM_HEADER: [&str; 6] = ["term", "estimate", "se", "p", "ci_low", "ci_high"];

/// Writes one coefficient table for the given results, concatenated.
pub fn write_terms_csv(results: &[&RegressionResult], w: impl Write) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record(TERM_HEADER)?;
    for r in results {
        r.write_csv_rows(&mut wtr)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `pcc,se,precision` per effect, in input order.
pub fn write_funnel_csv(effects: &[EffectRecord], w: impl Write) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record(["pcc", "se", "precision"])?;
    for e in effects {
        wtr.write_record([real(e.pcc()), real(e.se()), real(e.precision())])?;
    }
    wtr.flush()?;
    Ok(())
}
