// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference computations. Nothing here calls the code under test.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

/// Lowercased maximal alphanumeric runs.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn by_score_then_id(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).expect("finite").then_with(|| a.0.cmp(&b.0))
}

/// Okapi BM25 (k1 1.2, b 0.75, idf `ln(1 + (N - df + 0.5)/(df + 0.5))`),
/// distinct query terms, scanning every document.
pub fn bm25(docs: &[(String, String)], query: &str, k: usize) -> Vec<(String, f64)> {
    let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| words(t)).collect();
    let n = docs.len() as f64;
    let avg = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut terms: Vec<String> = Vec::new();
    for w in words(query) {
        if !terms.contains(&w) {
            terms.push(w);
        }
    }
    let mut out = Vec::new();
    for (d, (id, _)) in docs.iter().enumerate() {
        let mut score = 0.0;
        let mut hit = false;
        for t in &terms {
            let tf = toks[d].iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            hit = true;
            let df = toks.iter().filter(|ws| ws.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let len = toks[d].len() as f64;
            score += idf * (tf * 2.2) / (tf + 1.2 * (0.25 + 0.75 * len / avg));
        }
        if hit {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(by_score_then_id);
    out.truncate(k);
    out
}

/// Exact cosine of `query` against every vector, summing in index order so
/// that mathematically tied scores stay bitwise tied.
pub fn cosine_scan(vectors: &[(String, Vec<f64>)], query: &[f64], k: usize) -> Vec<(String, f64)> {
    let dot = |a: &[f64], b: &[f64]| {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += a[i] * b[i];
        }
        s
    };
    let qn = dot(query, query).sqrt();
    let mut out: Vec<(String, f64)> = vectors
        .iter()
        .map(|(id, v)| {
            let den = qn * dot(v, v).sqrt();
            (id.clone(), if den == 0.0 { 0.0 } else { dot(query, v) / den })
        })
        .collect();
    out.sort_by(by_score_then_id);
    out.truncate(k);
    out
}

/// Lexicographically greatest feasible order: among permutations that move no
/// item more than `budget` slots, the one whose slot-by-slot keys
/// `(score, -position)` compare greatest.
pub fn best_budgeted_permutation(scores: &[f64], budget: usize) -> Vec<usize> {
    let n = scores.len();
    let mut best: Option<Vec<usize>> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        if p.iter().enumerate().any(|(slot, &pos)| slot.abs_diff(pos) > budget) {
            return;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                let key = |o: &[usize]| -> Vec<(f64, i64)> { o.iter().map(|&i| (scores[i], -(i as i64))).collect() };
                key(p).partial_cmp(&key(b)) == Some(Ordering::Greater)
            }
        };
        if better {
            best = Some(p.to_vec());
        }
    });
    best.expect("identity is always feasible")
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// LinUCB state rebuilt with dense matrices and an explicit inverse.
pub struct DenseLinUcb {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DenseLinUcb {
    pub fn new(d: usize) -> Self {
        Self {
            a: DMatrix::identity(d, d),
            b: DVector::zeros(d),
        }
    }

    pub fn update(&mut self, x: &[f64], r: f64) {
        let x = DVector::from_column_slice(x);
        self.a += &x * x.transpose();
        self.b += x * r;
    }

    pub fn theta(&self) -> DVector<f64> {
        self.a.clone().try_inverse().expect("A is positive definite") * &self.b
    }

    pub fn ucb(&self, x: &[f64], alpha: f64) -> f64 {
        let inv = self.a.clone().try_inverse().expect("A is positive definite");
        let x = DVector::from_column_slice(x);
        let theta = &inv * &self.b;
        theta.dot(&x) + alpha * x.dot(&(&inv * &x)).sqrt()
    }
}

/// Value at 1-based index `ceil(p n / 100)` of the ascending sort, `p` integral.
pub fn nearest_rank(samples: &[f64], p: u32) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = s.len() as u64;
    let idx = (u64::from(p) * n).div_ceil(100).max(1);
    s[(idx - 1) as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion(predicted: &[bool], gold: &[bool]) -> Counts {
    let mut c = Counts::default();
    for (&p, &g) in predicted.iter().zip(gold) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// `(precision, recall, f1)`; with nothing predicted and nothing to find all
/// three are 1, any other empty denominator gives 0.
pub fn prf(c: Counts) -> (f64, f64, f64) {
    if c.tp + c.fp + c.fn_ == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let r = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f = if c.tp == 0 { 0.0 } else { (2 * c.tp) as f64 / (2 * c.tp + c.fp + c.fn_) as f64 };
    (p, r, f)
}

/// Exact rational `num/den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Self {
        let g = gcd(num, den).max(1);
        Self { num: num / g, den: den / g }
    }

    pub fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn parse(s: &str) -> Ratio {
        let (n, d) = s.split_once('/').expect("n/d");
        Ratio::new(n.parse().expect("int"), d.parse().expect("int"))
    }
}

/// Routing score at alpha = beta = 1/2 as an exact fraction: half the gold
/// coverage plus half the share of predictions that are gold (1 when nothing
/// was predicted).
pub fn routing_score_half(gold: &BTreeSet<String>, predicted: &BTreeSet<String>) -> Ratio {
    let hits = predicted.iter().filter(|p| gold.contains(*p)).count() as i128;
    let g = gold.len() as i128;
    let p = predicted.len() as i128;
    let coverage = Ratio::new(hits, g);
    let precision = if p == 0 { Ratio::new(1, 1) } else { Ratio::new(hits, p) };
    let sum = coverage.add(precision);
    Ratio::new(sum.num, sum.den * 2)
}

/// Cohen's kappa from a 2x2 table, straight from the definition.
pub fn kappa(t: [[u64; 2]; 2]) -> f64 {
    let n = (t[0][0] + t[0][1] + t[1][0] + t[1][1]) as f64;
    let po = (t[0][0] + t[1][1]) as f64 / n;
    let r0 = (t[0][0] + t[0][1]) as f64 / n;
    let c0 = (t[0][0] + t[1][0]) as f64 / n;
    let pe = r0 * c0 + (1.0 - r0) * (1.0 - c0);
    (po - pe) / (1.0 - pe)
}

/// Item-to-position map of a ranked id list.
pub fn positions<S: AsRef<str>>(ids: &[S]) -> BTreeMap<String, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_ref().to_string(), i)).collect()
}
