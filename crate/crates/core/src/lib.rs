//! Science mapping and meta-analysis toolkit.
//!
//! The crate follows the flow of a literature-mapping study:
//!
//! 1. [`corpus`]: ingest bibliographic exports, deduplicate, and keep a
//!    PRISMA-style screening ledger.
//! 2. [`coupling`] and [`community`]: build the bibliographic-coupling
//!    network (association-strength weights) and partition it with Louvain.
//! 3. [`bibliometrics`]: descriptive indicators (local/global citations,
//!    h-index, collaboration index, yearly production).
//! 4. [`effects`], [`pooling`], [`metareg`]: convert reported estimates to
//!    partial correlations, pool them (fixed/random effects), and run
//!    FAT-PET / PEESE and moderated meta-regressions with cluster-robust
//!    standard errors.
//!
//! [`pipeline`] wires the stages together and writes a reproducible
//! artifact tree.

pub mod bibliometrics;
pub mod community;
pub mod corpus;
pub mod coupling;
pub mod effects;
pub mod fmt;
pub mod linalg;
pub mod metareg;
pub mod pipeline;
pub mod pooling;
pub mod special;
pub mod synth;

pub use community::{louvain, modularity, LouvainOptions, NodeOrder, Partition, WeightKind};
pub use corpus::{dedupe, parse_records, screen, Corpus, Format, Record, ScreeningLedger};
pub use coupling::{build_incidence, coupling_graph, graph_stats, CouplingGraph, IncidenceMatrix};
pub use effects::{fisher_z, load_effects, pcc_from_coef, pcc_from_t, EffectRecord, Onset};
pub use metareg::{fat_pet, multiple_mra, peese, stepwise, wls, RegressionResult};
pub use pooling::{i_squared, pool, pool_by_cluster, q_statistic, Model, PooledResult};
