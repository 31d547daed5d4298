//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::ops::{Add, Div, Mul, Neg, Sub};

use litmeta::{Corpus, Record};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Double-double number, roughly 32 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let q = Dd::new(self.hi.sqrt());
        let r = self - q * q;
        q + Dd::new(r.hi / (2.0 * q.hi))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn max0(self) -> Dd {
        if self.hi < 0.0 {
            Dd::ZERO
        } else {
            self
        }
    }

    pub fn sum(xs: impl IntoIterator<Item = Dd>) -> Dd {
        xs.into_iter().fold(Dd::ZERO, |a, b| a + b)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        quick_two_sum(q1, q2) + Dd::new(q3)
    }
}

/// `a == b`, or `|a − b| <= tol·|b|`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * b.abs()
}

/// Newman–Girvan modularity by the full double sum over a dense symmetric
/// weight matrix without self loops.
pub fn dense_modularity(w: &[Vec<f64>], comm: &[usize]) -> f64 {
    let n = w.len();
    let k: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if comm[i] == comm[j] {
                q += w[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `n` items as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, cur: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..=used {
            cur.push(c);
            rec(n, cur, if c == used { used + 1 } else { used }, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), 0, &mut out);
    out
}

/// Same blocks, possibly different labels.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

pub type Dense = Vec<Vec<f64>>;

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

pub fn dense_t(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn dense_inv(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

const SURNAMES: [&str; 10] = ["Ahn", "Berg", "Cruz", "Dube", "Eze", "Fox", "Gil", "Holm", "Iqbal", "Jara"];

/// Random valid corpus: distinct titles, up to `max_refs` distinct external
/// keys, and some citations of other corpus members by their reference key.
pub fn random_corpus(rng: &mut impl Rng, max_papers: usize, max_refs: usize) -> Corpus {
    let n = rng.random_range(1..=max_papers);
    let n_refs = rng.random_range(1..=max_refs);
    let mut records: Vec<Record> = (0..n)
        .map(|i| {
            let mut r = Record::new(format!("w{i:03}"), format!("Paper{i} on topic {}", rng.random_range(0..5)), rng.random_range(1990..2024));
            let n_auth = rng.random_range(0..6);
            r.authors = (0..n_auth).map(|_| format!("{}, X.", SURNAMES.choose(rng).unwrap())).collect();
            r.global_citations = rng.random_range(0..60);
            let len = rng.random_range(0..=n_refs.min(30));
            r.references = (0..len).map(|_| format!("ext{}", rng.random_range(0..n_refs))).collect();
            r
        })
        .collect();
    let keys: Vec<String> = records.iter().map(Record::reference_key).collect();
    for (i, r) in records.iter_mut().enumerate() {
        for (j, k) in keys.iter().enumerate() {
            if i != j && rng.random_bool(0.15) {
                r.references.insert(k.clone());
            }
        }
    }
    Corpus::new(records).expect("generated corpus is valid")
}

/// Pairwise reference-set intersections and set sizes.
pub fn brute_coupling(corpus: &Corpus) -> (Vec<String>, Vec<u32>, Vec<Vec<u32>>) {
    let mut recs: Vec<&Record> = corpus.records().iter().collect();
    recs.sort_by(|a, b| a.id.cmp(&b.id));
    let sets: Vec<&BTreeSet<String>> = recs.iter().map(|r| &r.references).collect();
    let n = sets.len();
    let shared = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0 } else { sets[i].intersection(sets[j]).count() as u32 }).collect())
        .collect();
    (
        recs.iter().map(|r| r.id.clone()).collect(),
        sets.iter().map(|s| s.len() as u32).collect(),
        shared,
    )
}
