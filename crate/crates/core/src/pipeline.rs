//! End-to-end pipeline driven by a JSON config.
//!
//! Each stage reads the artifacts of earlier stages from disk and writes its
//! own, so any stage can be re-run alone or have its output replaced by
//! hand. A full run works in `OUT/.staging`, moves the finished tree into
//! `OUT` on success and into `OUT/quarantine` on failure. `OUT/.lock`
//! guards against concurrent runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bibliometrics;
use crate::community::{louvain, profile_clusters, write_profiles_json, LouvainOptions, NodeOrder, Partition, WeightKind};
use crate::corpus::{dedupe, read_records, screen, write_jsonl, Corpus, Format, ScreeningLedger, Source};
use crate::coupling::{build_incidence, coupling_graph, graph_stats, CouplingGraph};
use crate::effects::{load_effects, read_validated_csv, write_validated_csv, EffectRecord};
use crate::metareg::{fat_pet_data, peese_data, run_battery, write_funnel_csv, write_terms_csv, MetaData, StepwiseOptions, MIN_BATTERY_K};
use crate::pooling::{boxplot_data, groups, pool_by_cluster, write_boxplot_csv, write_pooling_csv, Group, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningStage {
    pub name: String,
    #[serde(default)]
    pub exclude: BTreeSet<String>,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LouvainConfig {
    #[serde(default = "default_min_gain")]
    pub min_gain: f64,
    #[serde(default)]
    pub ordering: NodeOrder,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        Self {
            min_gain: default_min_gain(),
            ordering: NodeOrder::Ascending,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepwiseConfig {
    #[serde(default = "default_enter")]
    pub enter_p: f64,
    #[serde(default = "default_remove")]
    pub remove_p: f64,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            enter_p: default_enter(),
            remove_p: default_remove(),
        }
    }
}

fn default_min_gain() -> f64 {
    1e-9
}
fn default_enter() -> f64 {
    0.05
}
fn default_remove() -> f64 {
    0.10
}
fn default_models() -> Vec<Model> {
    vec![Model::Fem, Model::Rem]
}
fn default_true() -> bool {
    true
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Pipeline configuration. Relative paths resolve against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub records: Vec<PathBuf>,
    #[serde(default)]
    pub effects: Option<PathBuf>,
    #[serde(default)]
    pub screening: Vec<ScreeningStage>,
    #[serde(default)]
    pub weight_kind: WeightKind,
    #[serde(default)]
    pub louvain: LouvainConfig,
    #[serde(default = "default_models")]
    pub pooling_models: Vec<Model>,
    #[serde(default)]
    pub stepwise: StepwiseConfig,
    #[serde(default = "default_true")]
    pub cluster_robust: bool,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Only used by simulations; the pipeline itself is deterministic.
    #[serde(default)]
    pub seed: u64,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub weight_kind: Option<WeightKind>,
    pub enter_p: Option<f64>,
    pub remove_p: Option<f64>,
    pub min_gain: Option<f64>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit code: 2 for validation errors, 3 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Screen,
    Couple,
    Cluster,
    Biblio,
    Effects,
    Pool,
    Bias,
    Mra,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Screen,
        Stage::Couple,
        Stage::Cluster,
        Stage::Biblio,
        Stage::Effects,
        Stage::Pool,
        Stage::Bias,
        Stage::Mra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Screen => "screen",
            Stage::Couple => "couple",
            Stage::Cluster => "cluster",
            Stage::Biblio => "biblio",
            Stage::Effects => "effects",
            Stage::Pool => "pool",
            Stage::Bias => "bias",
            Stage::Mra => "mra",
        }
    }

    fn needs_effects(self) -> bool {
        matches!(self, Stage::Effects | Stage::Pool | Stage::Bias | Stage::Mra)
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// A parsed config together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn apply(&mut self, o: &Overrides) {
        let c = &mut self.config;
        if let Some(out) = &o.out_dir {
            // relative to the caller, not the config file
            c.out_dir = std::env::current_dir().map(|d| d.join(out)).unwrap_or_else(|_| out.clone());
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if let Some(w) = o.weight_kind {
            c.weight_kind = w;
        }
        if let Some(p) = o.enter_p {
            c.stepwise.enter_p = p;
        }
        if let Some(p) = o.remove_p {
            c.stepwise.remove_p = p;
        }
        if let Some(g) = o.min_gain {
            c.louvain.min_gain = g;
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out_dir)
    }

    /// Checks paths and thresholds before any stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let c = &self.config;
        let err = |m: String| Err(PipelineError::Validation(m));
        if c.records.is_empty() {
            return err("`records` lists no input files".into());
        }
        for p in &c.records {
            let full = self.resolve(p);
            if !full.is_file() {
                return err(format!("records file {} does not exist", full.display()));
            }
            if Format::from_path(&full).is_none() {
                return err(format!("records file {} must end in .bib or .jsonl", full.display()));
            }
        }
        if let Some(e) = &c.effects {
            let full = self.resolve(e);
            if !full.is_file() {
                return err(format!("effects file {} does not exist", full.display()));
            }
        }
        let mut names = BTreeSet::new();
        for s in &c.screening {
            if s.name.is_empty() || s.name == "deduplication" {
                return err(format!("screening stage name `{}` is reserved or empty", s.name));
            }
            if !names.insert(&s.name) {
                return err(format!("screening stage `{}` is defined twice", s.name));
            }
        }
        if !(c.louvain.min_gain > 0.0 && c.louvain.min_gain.is_finite()) {
            return err(format!("louvain.min_gain must be positive, got {}", c.louvain.min_gain));
        }
        let (e, r) = (c.stepwise.enter_p, c.stepwise.remove_p);
        if !(e > 0.0 && e <= r && r < 1.0) {
            return err(format!("stepwise thresholds need 0 < enter_p <= remove_p < 1, got {e} and {r}"));
        }
        if c.pooling_models.is_empty() {
            return err("`pooling_models` is empty".into());
        }
        Ok(())
    }
}

/// What one stage wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageSummary {
    pub outputs: Vec<String>,
    pub counts: BTreeMap<String, Value>,
}

struct Ctx<'a> {
    loaded: &'a Loaded,
    dir: &'a Path,
}

type StageResult = Result<StageSummary, String>;

impl Ctx<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn write(&self, summary: &mut StageSummary, rel: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), String>) -> Result<(), String> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
        let file = fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|e| format!("{rel}: {e}"))?;
        w.flush().map_err(|e| format!("{rel}: {e}"))?;
        summary.outputs.push(rel.to_string());
        Ok(())
    }

    fn open(&self, rel: &str) -> Result<BufReader<fs::File>, String> {
        let path = self.path(rel);
        fs::File::open(&path)
            .map(BufReader::new)
            .map_err(|e| format!("{}: {e} (run the stage that produces it first)", path.display()))
    }

    fn corpus(&self) -> Result<Corpus, String> {
        let records = read_records(self.open("corpus.jsonl")?, Format::Jsonl, Source::Manual).map_err(|e| format!("corpus.jsonl: {e}"))?;
        let ledger = ScreeningLedger::read_csv(self.open("ledger.csv")?).map_err(|e| format!("ledger.csv: {e}"))?;
        Corpus::with_ledger(records, ledger).map_err(|e| format!("corpus.jsonl: {e}"))
    }

    fn partition(&self) -> Result<Partition, String> {
        Partition::read_csv(self.open("partition.csv")?).map_err(|e| format!("partition.csv: {e}"))
    }

    fn effects(&self) -> Result<Vec<EffectRecord>, String> {
        read_validated_csv(self.open("effects_validated.csv")?).map_err(|e| format!("effects_validated.csv: {e}"))
    }

    fn stepwise(&self) -> StepwiseOptions {
        let c = &self.loaded.config;
        StepwiseOptions {
            enter_p: c.stepwise.enter_p,
            remove_p: c.stepwise.remove_p,
            cluster_robust: c.cluster_robust,
        }
    }

    fn clear_dir(&self, rel: &str) -> Result<(), String> {
        let p = self.path(rel);
        if p.exists() {
            fs::remove_dir_all(&p).map_err(|e| format!("{}: {e}", p.display()))?;
        }
        Ok(())
    }
}

fn json_to<T: Serialize>(w: &mut impl Write, v: &T) -> Result<(), String> {
    serde_json::to_writer_pretty(&mut *w, v).map_err(|e| e.to_string())?;
    w.write_all(b"\n").map_err(|e| e.to_string())
}

fn file_name(group: Group, onset: crate::effects::Onset) -> String {
    group.name(onset).replace('/', "_")
}

fn run_stage(stage: Stage, ctx: &Ctx) -> StageResult {
    let cfg = &ctx.loaded.config;
    let mut s = StageSummary::default();
    match stage {
        Stage::Ingest => {
            let mut all = Vec::new();
            for p in &cfg.records {
                let full = ctx.loaded.resolve(p);
                let format = Format::from_path(&full).ok_or_else(|| format!("{}: unknown format", full.display()))?;
                let f = fs::File::open(&full).map_err(|e| format!("{}: {e}", full.display()))?;
                let recs = read_records(BufReader::new(f), format, Source::ScopusExport).map_err(|e| format!("{}: {e}", full.display()))?;
                all.extend(recs);
            }
            let raw = all.len();
            let (corpus, removed) = dedupe(all);
            ctx.write(&mut s, "ingested.jsonl", |w| write_jsonl(corpus.records(), w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "ingest_ledger.csv", |w| corpus.ledger().write_csv(w).map_err(|e| e.to_string()))?;
            s.counts.insert("records_raw".into(), json!(raw));
            s.counts.insert("duplicates_removed".into(), json!(removed.len()));
        }
        Stage::Screen => {
            let records = read_records(ctx.open("ingested.jsonl")?, Format::Jsonl, Source::Manual).map_err(|e| format!("ingested.jsonl: {e}"))?;
            let ledger = ScreeningLedger::read_csv(ctx.open("ingest_ledger.csv")?).map_err(|e| format!("ingest_ledger.csv: {e}"))?;
            let mut corpus = Corpus::with_ledger(records, ledger).map_err(|e| format!("ingested.jsonl: {e}"))?;
            for st in &cfg.screening {
                corpus = screen(&corpus, &st.name, &st.exclude, &st.reason).map_err(|e| format!("screening stage `{}`: {e}", st.name))?;
            }
            ctx.write(&mut s, "corpus.jsonl", |w| write_jsonl(corpus.records(), w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "ledger.csv", |w| corpus.ledger().write_csv(w).map_err(|e| e.to_string()))?;
            s.counts.insert("corpus".into(), json!(corpus.len()));
        }
        Stage::Couple => {
            let corpus = ctx.corpus()?;
            let inc = build_incidence(&corpus);
            let g = coupling_graph(&inc);
            let stats = graph_stats(&g);
            ctx.write(&mut s, "graph.tsv", |w| g.write_tsv(w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "graph.graphml", |w| g.write_graphml(w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "graph_stats.json", |w| json_to(w, &stats))?;
            s.counts.insert("references".into(), json!(inc.ncols()));
            s.counts.insert("edges".into(), json!(stats.edges));
            s.counts.insert("max_raw_weight".into(), json!(stats.max_raw_weight));
            s.counts.insert("isolated".into(), json!(stats.isolated_nodes.len()));
        }
        Stage::Cluster => {
            let corpus = ctx.corpus()?;
            let inc = build_incidence(&corpus);
            let self_counts = (0..inc.nrows()).map(|i| inc.row(i).len() as u32).collect();
            let g = CouplingGraph::read_tsv(inc.paper_ids().to_vec(), self_counts, ctx.open("graph.tsv")?)
                .map_err(|e| format!("graph.tsv: {e} (expected `source<TAB>target<TAB>raw_weight<TAB>norm_weight`)"))?;
            let opts = LouvainOptions {
                weight: cfg.weight_kind,
                min_gain: cfg.louvain.min_gain,
                order: cfg.louvain.ordering,
            };
            let p = louvain(&g, &opts).map_err(|e| e.to_string())?;
            let profiles = profile_clusters(&corpus, &p);
            ctx.write(&mut s, "partition.csv", |w| p.write_csv(w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "cluster_profiles.json", |w| write_profiles_json(&profiles, p.modularity(), w).map_err(|e| e.to_string()))?;
            s.counts.insert("communities".into(), json!(p.community_count()));
            s.counts.insert("modularity".into(), json!(p.modularity()));
            s.counts.insert("louvain_passes".into(), json!(p.passes()));
        }
        Stage::Biblio => {
            let corpus = ctx.corpus()?;
            let rep = bibliometrics::report(&corpus);
            ctx.write(&mut s, "bibliometrics.json", |w| bibliometrics::write_report_json(&rep, w).map_err(|e| e.to_string()))?;
            s.counts.insert("collaboration_index".into(), json!(rep.collaboration_index.value));
        }
        Stage::Effects => {
            let path = cfg.effects.as_ref().map(|p| ctx.loaded.resolve(p)).ok_or("no effects file configured")?;
            let corpus = ctx.corpus()?;
            let partition = ctx.partition()?;
            let f = fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let loaded = load_effects(BufReader::new(f), &corpus, Some(&partition)).map_err(|e| format!("{}: {e}", path.display()))?;
            ctx.write(&mut s, "effects_validated.csv", |w| write_validated_csv(&loaded.records, w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "effects_report.json", |w| json_to(w, &loaded.report))?;
            s.counts.insert("effects_raw".into(), json!(loaded.report.raw));
            s.counts.insert("effects_validated".into(), json!(loaded.report.validated));
            s.counts.insert("effects_rejected".into(), json!(loaded.report.rejected.len()));
        }
        Stage::Pool => {
            let effects = ctx.effects()?;
            let partition = ctx.partition()?;
            let rows = pool_by_cluster(&effects, Some(&partition), &cfg.pooling_models);
            ctx.write(&mut s, "pooling.csv", |w| write_pooling_csv(&rows, w).map_err(|e| e.to_string()))?;
            ctx.write(&mut s, "boxplot_data.csv", |w| write_boxplot_csv(&boxplot_data(&effects), w).map_err(|e| e.to_string()))?;
            s.counts.insert("pooling_rows".into(), json!(rows.len()));
            s.counts.insert("pooling_skipped".into(), json!(rows.iter().filter(|r| r.result.is_none()).count()));
        }
        Stage::Bias => {
            let effects = ctx.effects()?;
            let partition = ctx.partition()?;
            ctx.clear_dir("fatpet_peese")?;
            let robust = cfg.cluster_robust;
            let mut written = 0usize;
            for onset in crate::effects::Onset::ALL {
                for group in groups(&effects, Some(&partition)) {
                    if group == Group::Unassigned {
                        continue;
                    }
                    let sub: Vec<EffectRecord> = effects.iter().filter(|e| e.onset == onset && group.contains(e)).cloned().collect();
                    if sub.len() < MIN_BATTERY_K {
                        log::info!("{}: skipped (k = {})", group.name(onset), sub.len());
                        continue;
                    }
                    let data = MetaData::from_effects(&sub);
                    let fp = fat_pet_data(&data, robust);
                    let pe = peese_data(&data, robust);
                    let results: Vec<_> = [&fp, &pe].into_iter().filter_map(|r| r.as_ref().ok()).collect();
                    for e in [&fp, &pe].into_iter().filter_map(|r| r.as_ref().err()) {
                        log::warn!("{}: {e}", group.name(onset));
                    }
                    if results.is_empty() {
                        continue;
                    }
                    let rel = format!("fatpet_peese/{}.csv", file_name(group, onset));
                    ctx.write(&mut s, &rel, |w| write_terms_csv(&results, w).map_err(|e| e.to_string()))?;
                    written += 1;
                }
            }
            ctx.write(&mut s, "funnel_data.csv", |w| write_funnel_csv(&effects, w).map_err(|e| e.to_string()))?;
            s.counts.insert("bias_groups".into(), json!(written));
        }
        Stage::Mra => {
            let effects = ctx.effects()?;
            let partition = ctx.partition()?;
            ctx.clear_dir("mra")?;
            let report = run_battery(&effects, Some(&partition), &ctx.stepwise());
            for g in &report.groups {
                if let Some(r) = &g.mra {
                    let rel = format!("mra/{}.csv", file_name(g.group, g.onset));
                    ctx.write(&mut s, &rel, |w| write_terms_csv(&[r], w).map_err(|e| e.to_string()))?;
                }
            }
            ctx.write(&mut s, "battery.json", |w| json_to(w, &report))?;
            s.counts.insert("battery_groups".into(), json!(report.groups.len()));
            s.counts.insert("battery_skipped".into(), json!(report.groups.iter().filter(|g| g.skipped.is_some()).count()));
        }
    }
    Ok(s)
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(out: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(out).map_err(|e| PipelineError::Validation(format!("{}: {e}", out.display())))?;
        let path = out.join(".lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|_| PipelineError::Validation(format!("{} exists: another run holds this output directory", path.display())))?;
        Ok(Lock(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Runs one stage against the artifacts already in the output directory.
pub fn run_single_stage(loaded: &Loaded, stage: Stage) -> Result<StageSummary, PipelineError> {
    loaded.validate()?;
    if stage.needs_effects() && loaded.config.effects.is_none() {
        return Err(PipelineError::Validation(format!("stage `{stage}` needs an `effects` file in the config")));
    }
    let out = loaded.out_dir();
    let _lock = Lock::acquire(&out)?;
    let ctx = Ctx { loaded, dir: &out };
    run_stage(stage, &ctx).map_err(|message| PipelineError::Stage { stage, message })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn move_entry(from: &Path, to: &Path) -> std::io::Result<()> {
    if to.is_dir() {
        fs::remove_dir_all(to)?;
    } else if to.exists() {
        fs::remove_file(to)?;
    }
    fs::rename(from, to)
}

/// Summary of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub stages: Vec<(Stage, StageSummary)>,
    pub counts: BTreeMap<String, Value>,
}

/// Runs every stage in order. Stages that need effects are skipped when no
/// effects file is configured.
pub fn run_pipeline(loaded: &Loaded) -> Result<RunSummary, PipelineError> {
    loaded.validate()?;
    let out = loaded.out_dir();
    let _lock = Lock::acquire(&out)?;
    let staging = out.join(".staging");
    let io = |e: std::io::Error, p: &Path| PipelineError::Validation(format!("{}: {e}", p.display()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| io(e, &staging))?;
    }
    fs::create_dir_all(&staging).map_err(|e| io(e, &staging))?;
    let ctx = Ctx { loaded, dir: &staging };

    let mut stages = Vec::new();
    let mut counts = BTreeMap::new();
    for stage in Stage::ALL {
        if stage.needs_effects() && loaded.config.effects.is_none() {
            log::info!("stage {stage}: skipped (no effects file)");
            continue;
        }
        log::info!("stage {stage}");
        match run_stage(stage, &ctx) {
            Ok(s) => {
                counts.extend(s.counts.clone());
                stages.push((stage, s));
            }
            Err(message) => {
                let q = out.join("quarantine");
                let _ = move_entry(&staging, &q);
                return Err(PipelineError::Stage { stage, message });
            }
        }
    }

    let mut stage_json = Vec::new();
    for (stage, s) in &stages {
        let mut outputs = BTreeMap::new();
        for rel in &s.outputs {
            let bytes = fs::read(staging.join(rel)).map_err(|e| io(e, &staging.join(rel)))?;
            outputs.insert(rel.clone(), sha256_hex(&bytes));
        }
        stage_json.push(json!({ "stage": stage.as_str(), "outputs": outputs }));
    }
    let generated = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let manifest = json!({
        "tool": "litmeta",
        "version": env!("CARGO_PKG_VERSION"),
        "generated_at_unix": generated,
        "config": loaded.config,
        "stages": stage_json,
        "counts": counts,
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Validation(e.to_string()))?;
    text.push('\n');
    fs::write(staging.join("manifest.json"), text).map_err(|e| io(e, &staging))?;

    let entries = fs::read_dir(&staging).map_err(|e| io(e, &staging))?;
    let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    names.sort();
    for from in names {
        let to = out.join(from.file_name().expect("directory entry has a name"));
        move_entry(&from, &to).map_err(|e| io(e, &to))?;
    }
    fs::remove_dir_all(&staging).map_err(|e| io(e, &staging))?;
    Ok(RunSummary { out_dir: out, stages, counts })
}
