//! Parallel moment evaluation over lists of moduli.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use momentlab_core::arith::{gcd, is_admissible};
use momentlab_core::moments::{brute_moment_with, MomentContext, MomentQuery, MomentReport, Normalization, SweepPoint, SweepSummary, Thirds};

use crate::cache::CharacterCache;
use crate::report::{sig12, MomentRow};

/// Queries for every admissible q in `lo..=hi` with (ab, q) = 1.
pub fn sweep_queries(lo: u64, hi: u64, a: u64, b: u64) -> Vec<MomentQuery> {
    (lo.max(3)..=hi)
        .filter(|&q| is_admissible(q) && gcd(a * b, q) == 1 && a.max(b) <= q)
        .filter_map(|q| MomentQuery::new(q, a, b).ok())
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Successful evaluations, sorted by (q, a, b).
    pub reports: Vec<MomentReport>,
    pub rows: Vec<MomentRow>,
    /// Per-item failures; the sweep carries on past them.
    pub failures: Vec<(MomentQuery, String)>,
}

impl SweepOutcome {
    pub fn points(&self) -> Vec<SweepPoint> {
        self.reports
            .iter()
            .map(|r| SweepPoint { q: r.query.q, brute: r.brute.re, main_theorem: r.main.theorem, main_corollary: r.main.corollary })
            .collect()
    }
}

/// Evaluates every query on the current rayon pool.
pub fn run_moments(ctx: &MomentContext, queries: &[MomentQuery], cache: &CharacterCache, timings: bool) -> SweepOutcome {
    let results: Vec<_> = queries
        .par_iter()
        .map(|query| {
            let start = Instant::now();
            let out = cache
                .group(query.q)
                .and_then(|g| Ok(brute_moment_with(ctx, query, &g)?))
                .map(|r| {
                    let secs = timings.then(|| start.elapsed().as_secs_f64());
                    (MomentRow::new(&r, secs), r)
                });
            (*query, out)
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (query, r) in results {
        match r {
            Ok(pair) => ok.push(pair),
            Err(e) => failures.push((query, e.to_string())),
        }
    }
    ok.sort_by_key(|(row, _)| (row.q, row.a, row.b));
    failures.sort_by_key(|(q, _)| (q.q, q.a, q.b));
    let (rows, reports) = ok.into_iter().unzip();
    SweepOutcome { reports, rows, failures }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThirdsJson {
    pub bottom: f64,
    pub middle: f64,
    pub top: f64,
}

impl From<Thirds> for ThirdsJson {
    fn from(t: Thirds) -> Self {
        Self { bottom: sig12(t.bottom), middle: sig12(t.middle), top: sig12(t.top) }
    }
}

/// JSON form of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryJson {
    pub points: usize,
    pub failures: usize,
    /// Median |ratio - 1| per third of the q-range.
    pub theorem: ThirdsJson,
    pub corollary: ThirdsJson,
    /// (lower end of the dyadic block, median |ratio - 1|) for the theorem
    /// normalization.
    pub dyadic: Vec<(u64, f64)>,
    pub convergent: Vec<&'static str>,
    pub winner: Option<&'static str>,
    pub fitted_exponent: Option<f64>,
}

pub fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::Theorem => "theorem",
        Normalization::Corollary => "corollary",
    }
}

impl SummaryJson {
    pub fn new(s: &SweepSummary, points: usize, failures: usize) -> Self {
        Self {
            points,
            failures,
            theorem: s.theorem.into(),
            corollary: s.corollary.into(),
            dyadic: s.dyadic.iter().map(|&(q, v)| (q, sig12(v))).collect(),
            convergent: s.convergent.iter().copied().map(normalization_name).collect(),
            winner: s.winner().map(normalization_name),
            fitted_exponent: s.fitted_exponent.map(sig12),
        }
    }
}
