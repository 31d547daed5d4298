//! Deterministic synthetic fixtures shaped like a real mapping study:
//! 151 papers in four planted coupling communities citing 5,433 distinct
//! references, plus an effects table with 3,904 slow-onset and 2,065
//! fast-onset rows (a few of them invalid on purpose).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corridor, DocType, EnvFactor, Level, Record, Source, Unit};
use crate::fmt::real;

pub const COMMUNITY_SIZES: [usize; 4] = [51, 28, 37, 35];
pub const PAPERS: usize = 151;
pub const REFERENCES: usize = 5433;
pub const DUPLICATES: usize = 3;
pub const SLOW_ROWS: usize = 3904;
pub const FAST_ROWS: usize = 2065;
pub const SLOW_INVALID: usize = 7;
pub const FAST_INVALID: usize = 3;
pub const SLOW_STUDIES: usize = 66;
pub const FAST_STUDIES: usize = 60;
pub const STUDIES: usize = 96;

const POOL_PER_COMMUNITY: usize = 60;
const SHARED_POOL: usize = 20;

const SURNAMES: [&str; 24] = [
    "Adams", "Baker", "Chen", "Diallo", "Evans", "Fischer", "Garcia", "Hassan", "Ito", "Jensen", "Khan", "Lopez", "Mensah", "Nguyen", "Okafor",
    "Petrov", "Quispe", "Rossi", "Silva", "Tanaka", "Usman", "Varga", "Weber", "Zhou",
];
const TOPICS: [&str; 4] = ["climate shocks", "natural disasters", "rainfall variability", "environmental change"];

/// Generated fixture content.
#[derive(Debug, Clone)]
pub struct MappingFixture {
    /// Records as ingested, including planted duplicates.
    pub records: Vec<Record>,
    /// Planted community of every surviving paper id.
    pub planted: BTreeMap<String, usize>,
    pub effects_csv: Vec<u8>,
}

fn community_of(i: usize) -> usize {
    let mut acc = 0;
    for (c, &s) in COMMUNITY_SIZES.iter().enumerate() {
        acc += s;
        if i < acc {
            return c;
        }
    }
    unreachable!("paper index out of range")
}

fn paper_id(i: usize) -> String {
    format!("p{:03}", i + 1)
}

fn metadata(rng: &mut ChaCha8Rng) -> Vec<Record> {
    (0..PAPERS)
        .map(|i| {
            let c = community_of(i);
            let year = 1995 + 5 * c as i32 + rng.random_range(0..12);
            let mut r = Record::new(paper_id(i), format!("Evidence{:03} on {} and migration", i + 1, TOPICS[c]), year);
            let n_auth = [1usize, 2, 2, 3, 3, 4][rng.random_range(0..6)];
            let mut names: Vec<&str> = SURNAMES.choose_multiple(rng, n_auth).copied().collect();
            names.sort_unstable();
            r.authors = names.iter().map(|s| format!("{s}, {}.", (b'A' + (i % 26) as u8) as char)).collect();
            r.venue = format!("Journal of {}", ["Development", "Population", "Environment", "Economics"][c]);
            r.doc_type = if rng.random_bool(0.75) {
                DocType::Quantitative
            } else {
                [DocType::Qualitative, DocType::Review, DocType::Theoretical][rng.random_range(0..3)]
            };
            r.published = rng.random_bool(0.8);
            r.global_citations = rng.random_range(0..300);
            r.impact_factor = if r.published { (rng.random_range(5..60) as f64) / 10.0 } else { 0.0 };
            r.source = if i % 2 == 0 { Source::ScopusExport } else { Source::WosExport };
            r.keywords = ["migration".to_string(), TOPICS[c].to_string()].into();
            r.level = Some(if c.is_multiple_of(2) { Level::Macro } else { Level::Micro });
            r.unit = Some([Unit::Country, Unit::Household, Unit::Territorial, Unit::Individual][c]);
            r.corridor = Some([Corridor::CrossCountry, Corridor::Internal, Corridor::Both, Corridor::Internal][c]);
            r.env_factor = Some([EnvFactor::SlowOnset, EnvFactor::FastOnset, EnvFactor::Both, EnvFactor::SlowOnset][c]);
            r
        })
        .collect()
}

fn attach_references(rng: &mut ChaCha8Rng, records: &mut [Record]) {
    let pools: Vec<Vec<String>> = (0..4)
        .map(|c| (0..POOL_PER_COMMUNITY).map(|j| format!("c{c}_pool_{j:02}")).collect())
        .collect();
    let shared: Vec<String> = (0..SHARED_POOL).map(|j| format!("shared_pool_{j:02}")).collect();
    let keys: Vec<String> = records.iter().map(Record::reference_key).collect();
    for i in 0..PAPERS {
        let c = community_of(i);
        let refs = &mut records[i].references;
        // guarantee every pooled key is used at least once
        refs.insert(pools[c][i % POOL_PER_COMMUNITY].clone());
        refs.insert(shared[i % SHARED_POOL].clone());
        refs.extend(pools[c].choose_multiple(rng, 22).cloned());
        refs.extend(shared.choose_multiple(rng, 3).cloned());
        let start: usize = COMMUNITY_SIZES[..c].iter().sum();
        if i > start && rng.random_bool(0.4) {
            let cited = rng.random_range(start..i);
            refs.insert(keys[cited].clone());
        }
    }
    let used: BTreeSet<&String> = records.iter().flat_map(|r| r.references.iter()).collect();
    let mut missing = REFERENCES - used.len();
    let mut i = 0usize;
    let mut j = 0usize;
    while missing > 0 {
        records[i].references.insert(format!("ext{:03}_{j:02}", i + 1));
        missing -= 1;
        i += 1;
        if i == PAPERS {
            i = 0;
            j += 1;
        }
    }
}

fn duplicates(records: &[Record]) -> Vec<Record> {
    [7usize, 60, 120]
        .iter()
        .map(|&i| {
            let mut d = records[i].clone();
            d.id = format!("{}_dup", d.id);
            d.title = d.title.to_uppercase();
            let keep: Vec<String> = d.references.iter().take(5).cloned().collect();
            d.references = keep.into_iter().collect();
            d
        })
        .collect()
}

/// Moderator columns written to the fixture effects table.
pub const FIXTURE_MODERATORS: [&str; 16] = [
    "preferred_specification",
    "corridor_internal",
    "corridor_international",
    "corridor_urbanization",
    "measurement_flows",
    "measurement_stock",
    "temperature_levels",
    "precipitation_levels",
    "time_lag",
    "event_hydrological",
    "disaster_occurrence",
    "source_survey",
    "unit_household",
    "time_span",
    "est_panel",
    "control_income",
];

fn allocate(rng: &mut ChaCha8Rng, total: usize, studies: usize, base: usize) -> Vec<usize> {
    let mut counts = vec![base; studies];
    for _ in 0..total - base * studies {
        counts[rng.random_range(0..studies)] += 1;
    }
    counts
}

fn effects_table(rng: &mut ChaCha8Rng, planted: &BTreeMap<String, usize>) -> Vec<u8> {
    let mut ids: Vec<&String> = planted.keys().collect();
    ids.shuffle(rng);
    let studies = &ids[..STUDIES];
    let mut slow_studies = studies[..SLOW_STUDIES].to_vec();
    let mut fast_studies = studies[STUDIES - FAST_STUDIES..].to_vec();
    slow_studies.sort_unstable();
    fast_studies.sort_unstable();

    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["study_id", "estimate_id", "onset", "coef", "coef_se", "t", "df"];
    header.extend(FIXTURE_MODERATORS);
    wtr.write_record(&header).unwrap();

    for (onset, list, total, invalid, base) in [
        ("slow", &slow_studies, SLOW_ROWS, SLOW_INVALID, 20usize),
        ("fast", &fast_studies, FAST_ROWS, FAST_INVALID, 15usize),
    ] {
        let counts = allocate(rng, total, list.len(), base);
        let effect_by_cluster: [f64; 4] = if onset == "slow" { [0.0, 0.01, -0.01, 0.02] } else { [0.01, 0.03, 0.0, 0.02] };
        let mut row_no = 0usize;
        let invalid_at: BTreeSet<usize> = (0..invalid).map(|k| 11 + k * (total / invalid)).collect();
        for (s, &study) in list.iter().enumerate() {
            let c = planted[study];
            let study_effect = Normal::new(0.0, 0.02).unwrap().sample(rng);
            let panel = rng.random_bool(0.5);
            let survey = rng.random_bool(0.4);
            let household = rng.random_bool(0.3);
            let span = rng.random_range(3..40);
            let corridor = rng.random_range(0..4);
            for e in 0..counts[s] {
                let df: u32 = rng.random_range(30..3000);
                let pref = rng.random_bool(0.3);
                let income = rng.random_bool(0.5);
                let lag = rng.random_range(0..4);
                let measure = rng.random_range(0..3);
                let phen = rng.random_range(0..3);
                let theta = effect_by_cluster[c] + study_effect + if income { 0.015 } else { 0.0 };
                let se0 = 1.0 / (df as f64).sqrt();
                let pcc = (theta + Normal::new(0.0, se0).unwrap().sample(rng)).clamp(-0.9, 0.9);
                let t = pcc * (df as f64 / (1.0 - pcc * pcc)).sqrt();
                let use_coef = e % 4 == 3;
                let coef_se = (rng.random_range(1..100) as f64) / 100.0;
                let mut row: Vec<String> = vec![
                    study.to_string(),
                    format!("{onset}{:02}_{e:03}", s + 1),
                    onset.to_string(),
                    if use_coef { real(t * coef_se) } else { String::new() },
                    if use_coef { real(coef_se) } else { String::new() },
                    if use_coef { String::new() } else { real(t) },
                    df.to_string(),
                ];
                if invalid_at.contains(&row_no) {
                    match row_no % 3 {
                        0 => row[6] = "0".into(),
                        1 => {
                            row[3].clear();
                            row[4].clear();
                            row[5].clear();
                        }
                        _ => {
                            row[3] = "1".into();
                            row[4] = "0.5".into();
                            row[5] = "2".into();
                        }
                    }
                }
                let flag = |b: bool| if b { "1".to_string() } else { String::new() };
                let slow = onset == "slow";
                row.extend([
                    flag(pref),
                    flag(corridor == 1),
                    flag(corridor == 2),
                    flag(corridor == 3),
                    flag(measure == 1),
                    flag(measure == 2),
                    flag(slow && phen == 0),
                    flag(slow && phen == 1),
                    lag.to_string(),
                    flag(!slow && phen == 0),
                    flag(!slow && phen != 2),
                    flag(survey),
                    flag(household),
                    span.to_string(),
                    flag(panel),
                    flag(income),
                ]);
                wtr.write_record(&row).unwrap();
                row_no += 1;
            }
        }
    }
    wtr.into_inner().unwrap()
}

/// Builds the fixture from `seed`. Identical seeds give identical bytes.
pub fn mapping_fixture(seed: u64) -> MappingFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = metadata(&mut rng);
    attach_references(&mut rng, &mut records);
    let planted: BTreeMap<String, usize> = (0..PAPERS).map(|i| (paper_id(i), community_of(i))).collect();
    let effects_csv = effects_table(&mut rng, &planted);
    let dups = duplicates(&records);
    records.extend(dups);
    MappingFixture {
        records,
        planted,
        effects_csv,
    }
}

/// Writes `records.jsonl`, `effects.csv` and `config.json` into `dir` and
/// returns the config path. Output goes to `dir/out`.
pub fn write_mapping_fixture(dir: &std::path::Path, seed: u64) -> std::io::Result<std::path::PathBuf> {
    let fx = mapping_fixture(seed);
    std::fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("records.jsonl"))?);
    crate::corpus::write_jsonl(&fx.records, &mut f)?;
    f.flush()?;
    std::fs::write(dir.join("effects.csv"), &fx.effects_csv)?;
    let config = serde_json::json!({
        "records": ["records.jsonl"],
        "effects": "effects.csv",
        "screening": [],
        "out_dir": "out",
        "seed": seed,
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config)? + "\n")?;
    Ok(path)
}
