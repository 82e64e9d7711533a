//! Verification suites: each runs one family of identities or bounds and
//! reports pass/fail per invariant.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use momentlab_core::arith::{gcd, is_admissible};
use momentlab_core::characters::{orthogonality_sum, Parity};
use momentlab_core::eigenform::{coprime_removal_exact, coprime_removal_exact_divisor, EigenformData};
use momentlab_core::expsums::{shifted_conv_aq, thm_aq_bound, weil_certify, CongruenceSign, ConvolutionQuery};
use momentlab_core::lfunc::{afe_triple_product, dirichlet_l_half, twisted_l_half, RootNumbers, WeightFunction};
use momentlab_core::moments::{
    brute_moment_with, divisor_route, error_exponent, MomentContext, MomentQuery, Rational, SweepSummary,
};
use momentlab_core::voronoi::{acceptance_grid, required_table, voronoi_check, VoronoiLab};

use crate::cache::CharacterCache;
use crate::coeff::table_for_moments;
use crate::error::AppResult;
use crate::sweep::{normalization_name, run_moments, sweep_queries};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn new(suite: &str, checks: Vec<Check>) -> Self {
        Self { suite: suite.into(), passed: checks.iter().all(|c| c.passed), checks }
    }

    /// `PASS`/`FAIL` lines, one per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}/{}: {}", if c.passed { "PASS" } else { "FAIL" }, self.suite, c.name, c.detail))
            .collect()
    }
}

fn admissible_moduli(lo: u64, hi: u64) -> impl Iterator<Item = u64> {
    (lo..=hi).filter(|&q| is_admissible(q))
}

/// Divisor formula against enumerated primitive characters, for every
/// admissible q <= `q_max` and coprime m, n <= 30, both parities.
pub fn orthogonality(q_max: u64, cache: &CharacterCache) -> AppResult<SuiteReport> {
    let per_q: Vec<AppResult<(u64, f64, usize)>> = admissible_moduli(1, q_max)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|q| {
            let g = cache.group(q)?;
            let (mut worst, mut count) = (0.0f64, 0);
            for m in 1..=30i64 {
                for n in 1..=30i64 {
                    if gcd((m * n) as u64, q) != 1 {
                        continue;
                    }
                    for parity in [Parity::Even, Parity::Odd] {
                        let e = g.primitive_parity_sum(m, n, parity);
                        let o = orthogonality_sum(q, m, n, parity)?.to_f64();
                        worst = worst.max((e.re - o).abs()).max(e.im.abs());
                        count += 1;
                    }
                }
            }
            Ok((q, worst, count))
        })
        .collect();
    let mut worst = (0.0f64, 0);
    let mut count = 0;
    for r in per_q {
        let (q, w, c) = r?;
        count += c;
        if w > worst.0 {
            worst = (w, q);
        }
    }
    Ok(SuiteReport::new(
        "orthogonality",
        vec![Check::new(
            format!("divisor formula equals enumeration, q <= {q_max}"),
            worst.0 <= 1e-9,
            format!("{count} sums, max deviation {:.3e} (q = {})", worst.0, worst.1),
        )],
    ))
}

/// Exact Hecke relations and Deligne's bound for Δ up to `limit`.
pub fn hecke(limit: u64) -> AppResult<SuiteReport> {
    let f = EigenformData::delta(limit as usize)?;
    let hecke = f.hecke_exact_failures(limit)?;
    let deligne = f.deligne_exact_failures(limit)?;
    Ok(SuiteReport::new(
        "hecke",
        vec![
            Check::new(
                format!("multiplicativity exact for mn <= {limit}"),
                hecke.is_empty(),
                match hecke.first() {
                    None => "no failures".into(),
                    Some(p) => format!("{} failures, first at {p:?}", hecke.len()),
                },
            ),
            Check::new(
                format!("|lambda(n)| <= d(n) exact for n <= {limit}"),
                deligne.is_empty(),
                match deligne.first() {
                    None => "no failures".into(),
                    Some(n) => format!("{} failures, first at n = {n}", deligne.len()),
                },
            ),
        ],
    ))
}

pub fn weil(c_max: u64) -> AppResult<SuiteReport> {
    let check = match weil_certify(c_max) {
        Ok(r) => Check::new(
            format!("Weil bound for c <= {c_max}"),
            true,
            format!("{} sums, max ratio {:.6} at (m, n, c) = {:?}", r.checked, r.max_ratio, r.worst),
        ),
        Err(e) => Check::new(format!("Weil bound for c <= {c_max}"), false, e.to_string()),
    };
    Ok(SuiteReport::new("weil", vec![check]))
}

/// The triple-product AFE against the product of separately computed
/// L-values, for every primitive χ with ε(f,χ) = +1.
pub fn afe_cross_route(moduli: &[u64], f: &EigenformData, cache: &CharacterCache) -> AppResult<SuiteReport> {
    let weights = [WeightFunction::new(f.kind(), Parity::Even)?, WeightFunction::new(f.kind(), Parity::Odd)?];
    let mut checks = Vec::new();
    for &q in moduli {
        let g = cache.group(q)?;
        let chars: Vec<usize> = g.primitive().map(|i| i.index).collect();
        let results: Vec<AppResult<Option<f64>>> = chars
            .par_iter()
            .map(|&chi| {
                if RootNumbers::new(&g, chi, f)?.pair != 1 {
                    return Ok(None);
                }
                let w = &weights[usize::from(g.info(chi).parity == Parity::Odd)];
                let afe = afe_triple_product(&g, chi, f, w)?.value;
                let d = dirichlet_l_half(&g, g.conjugate(chi))?;
                let direct = twisted_l_half(&g, chi, f)? * d * d;
                Ok(Some((afe - direct).norm() / direct.norm().max(1e-300)))
            })
            .collect();
        let mut worst = 0.0f64;
        let mut count = 0;
        for r in results {
            if let Some(rel) = r? {
                worst = worst.max(rel);
                count += 1;
            }
        }
        checks.push(Check::new(
            format!("AFE equals L-value product, q = {q}"),
            count > 0 && worst <= 1e-6,
            format!("{count} characters, max relative deviation {worst:.3e}"),
        ));
    }
    Ok(SuiteReport::new("afe", checks))
}

/// Voronoi summation on the grid d <= 5, q ∈ {1,2,3,6}, X ∈ {10,20,40}.
pub fn voronoi(lab: &VoronoiLab) -> AppResult<SuiteReport> {
    let grid = acceptance_grid();
    let planning = EigenformData::delta(64)?;
    let need = required_table(lab, &grid, &planning)?;
    let f = EigenformData::delta(need as usize)?;
    let results: Vec<_> = grid.par_iter().map(|c| (c, voronoi_check(lab, c, &f))).collect();
    let mut worst = (0.0f64, None);
    let mut failed = Vec::new();
    let mut max_tail = 0.0f64;
    for (c, r) in results {
        match r {
            Ok(r) => {
                max_tail = max_tail.max(r.rhs.tail);
                if r.residual > worst.0 || worst.1.is_none() {
                    worst = (r.residual, Some(*c));
                }
            }
            Err(e) => failed.push(format!("(b,d,q,X) = ({},{},{},{}): {e}", c.b, c.d, c.q, c.x)),
        }
    }
    let case = worst.1.map_or_else(String::new, |c| format!(" at (b,d,q,X) = ({},{},{},{})", c.b, c.d, c.q, c.x));
    Ok(SuiteReport::new(
        "voronoi",
        vec![
            Check::new(
                "residual <= 1e-6 on the grid",
                failed.is_empty() && worst.0 <= 1e-6,
                format!("{} cases, max residual {:.3e}{case}", grid.len(), worst.0),
            ),
            Check::new(
                "dual tails certified",
                failed.is_empty(),
                if failed.is_empty() {
                    format!("largest certified tail {max_tail:.3e}, times safety factor 10 <= 1e-8")
                } else {
                    failed.join("; ")
                },
            ),
        ],
    ))
}

/// Exact coprime removal for every q <= `q_max` and every interval inside
/// [1, `support`]: the per-N residuals vanish, so every interval sum does.
pub fn coprime_removal(q_max: u64, support: u64) -> AppResult<SuiteReport> {
    let f = EigenformData::delta(support as usize)?;
    let lam: Vec<AppResult<(u64, usize, usize)>> = (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let a = coprime_removal_exact(&f, q, 1, support)?.len();
            let b = coprime_removal_exact_divisor(q, 1, support)?.len();
            Ok((q, a, b))
        })
        .collect();
    let (mut bad_l, mut bad_t) = (Vec::new(), Vec::new());
    for r in lam {
        let (q, a, b) = r?;
        if a > 0 {
            bad_l.push(q);
        }
        if b > 0 {
            bad_t.push(q);
        }
    }
    let detail = |bad: &[u64]| if bad.is_empty() { "residual exactly 0".to_string() } else { format!("nonzero for q in {bad:?}") };
    Ok(SuiteReport::new(
        "coprime",
        vec![
            Check::new(format!("lambda version, q <= {q_max}, F in [1, {support}]"), bad_l.is_empty(), detail(&bad_l)),
            Check::new(format!("divisor version, q <= {q_max}, F in [1, {support}]"), bad_t.is_empty(), detail(&bad_t)),
        ],
    ))
}

/// Realness of the brute moment and agreement of its parity components
/// with the divisor route, q <= `q_max`, a, b ∈ {1,2,3}.
pub fn moment_routes(ctx: &MomentContext, q_max: u64, cache: &CharacterCache) -> AppResult<SuiteReport> {
    let mut queries = Vec::new();
    for q in admissible_moduli(3, q_max) {
        for a in 1..=3 {
            for b in 1..=3 {
                if let Ok(query) = MomentQuery::new(q, a, b) {
                    queries.push(query);
                }
            }
        }
    }
    let worst_im = Mutex::new((0.0f64, None));
    let worst_route = Mutex::new((0.0f64, None));
    let errors = Mutex::new(Vec::new());
    queries.par_iter().for_each(|query| {
        let run = || -> AppResult<()> {
            let g = cache.group(query.q)?;
            let r = brute_moment_with(ctx, query, &g)?;
            let im = r.brute.im.abs() / (1.0 + r.brute.re.abs());
            let mut w = worst_im.lock().expect("lock");
            if im > w.0 || w.1.is_none() {
                *w = (im, Some(*query));
            }
            drop(w);
            for parity in [Parity::Even, Parity::Odd] {
                let d = divisor_route(ctx, query, parity)?;
                let brute = r.part(parity).value.re;
                let rel = (brute - d.value).abs() / (1.0 + d.value.abs());
                let mut w = worst_route.lock().expect("lock");
                if rel > w.0 || w.1.is_none() {
                    *w = (rel, Some(*query));
                }
            }
            Ok(())
        };
        if let Err(e) = run() {
            errors.lock().expect("lock").push(format!("(q,a,b) = ({},{},{}): {e}", query.q, query.a, query.b));
        }
    });
    let errors = errors.into_inner().expect("lock");
    let at = |w: Option<MomentQuery>| w.map_or_else(String::new, |q| format!(" at (q,a,b) = ({},{},{})", q.q, q.a, q.b));
    let (im, im_at) = worst_im.into_inner().expect("lock");
    let (route, route_at) = worst_route.into_inner().expect("lock");
    let mut checks = vec![
        Check::new(
            "imaginary part <= 1e-8 relative",
            errors.is_empty() && im <= 1e-8,
            format!("{} queries, max {im:.3e}{}", queries.len(), at(im_at)),
        ),
        Check::new(
            "parity components equal divisor route to 1e-6 relative",
            errors.is_empty() && route <= 1e-6,
            format!("max deviation {route:.3e}{}", at(route_at)),
        ),
    ];
    if !errors.is_empty() {
        checks.push(Check::new("evaluation errors", false, errors.join("; ")));
    }
    Ok(SuiteReport::new("routes", checks))
}

/// The main-term trend over admissible q in `lo..=hi`, a = b = 1.
pub fn main_term_trend(ctx: &MomentContext, lo: u64, hi: u64, cache: &CharacterCache) -> AppResult<(SuiteReport, SweepSummary)> {
    let queries = sweep_queries(lo, hi, 1, 1);
    let out = run_moments(ctx, &queries, cache, false);
    let summary = SweepSummary::from_points(&out.points())?;
    let winner = summary.winner();
    let shrinking = match winner {
        Some(momentlab_core::moments::Normalization::Theorem) => summary.theorem.top < summary.theorem.bottom,
        Some(momentlab_core::moments::Normalization::Corollary) => summary.corollary.top < summary.corollary.bottom,
        None => false,
    };
    let t = |x: momentlab_core::moments::Thirds| format!("{:.4}/{:.4}/{:.4}", x.bottom, x.middle, x.top);
    let checks = vec![
        Check::new(
            "all sweep points evaluated",
            out.failures.is_empty(),
            format!("{} points, {} failures", out.reports.len(), out.failures.len()),
        ),
        Check::new(
            "top-third median |ratio-1| below bottom third",
            shrinking,
            format!("theorem {}, corollary {} (bottom/middle/top)", t(summary.theorem), t(summary.corollary)),
        ),
        Check::new(
            "exactly one normalization convergent",
            summary.convergent.len() == 1,
            format!(
                "convergent: [{}]",
                summary.convergent.iter().map(|&n| normalization_name(n)).collect::<Vec<_>>().join(", ")
            ),
        ),
        Check::new(
            "fitted error exponent",
            true,
            summary.fitted_exponent.map_or_else(|| "not enough points".into(), |e| format!("{e:.4}")),
        ),
    ];
    Ok((SuiteReport::new("trend", checks), summary))
}

pub fn exponents() -> AppResult<SuiteReport> {
    let r = |n, d| Rational::new(n, d);
    let mut checks = Vec::new();
    for (theta, want) in [(r(0, 1), r(1, 22)), (r(7, 64), r(5, 152))] {
        let got = error_exponent(theta, r(0, 1), r(0, 1))?.q_exponent;
        checks.push(Check::new(format!("error_exponent({theta}, 0, 0)"), got == want, format!("{got}, expected {want}")));
    }
    Ok(SuiteReport::new("exponent", checks))
}

/// One cell of the shifted-convolution grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AqCell {
    pub q: u64,
    pub a: u64,
    pub b: u64,
    pub m_size: f64,
    pub n_size: f64,
    pub sign: i64,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
    pub precluded: bool,
}

/// q ∈ 31..=200, M, N ∈ {√q, 10√q, 50√q, q/10}, both signs,
/// (a, b) ∈ {(1,1), (2,3)}.
pub fn aq_grid() -> Vec<ConvolutionQuery> {
    let mut out = Vec::new();
    for q in 31..=200u64 {
        let r = (q as f64).sqrt();
        let sizes = [r, 10.0 * r, 50.0 * r, q as f64 / 10.0];
        for (a, b) in [(1u64, 1u64), (2, 3)] {
            if gcd(a * b, q) != 1 {
                continue;
            }
            for &m in &sizes {
                for &n in &sizes {
                    for sign in [CongruenceSign::Plus, CongruenceSign::Minus] {
                        if let Ok(query) = ConvolutionQuery::new(a, b, m, n, q, sign) {
                            out.push(query);
                        }
                    }
                }
            }
        }
    }
    out
}

/// A_q on [`aq_grid`]: exact zeros where the supports rule out solutions,
/// finite bound ratios elsewhere.
pub fn aq(f: &EigenformData) -> AppResult<(SuiteReport, Vec<AqCell>)> {
    let cells: Vec<AppResult<AqCell>> = aq_grid()
        .par_iter()
        .map(|query| {
            let value = shifted_conv_aq(query, f)?;
            let bound = thm_aq_bound(query);
            Ok(AqCell {
                q: query.q,
                a: query.a,
                b: query.b,
                m_size: query.m_size,
                n_size: query.n_size,
                sign: query.sign.sign(),
                value,
                bound,
                ratio: value.abs() / bound,
                precluded: query.precluded(),
            })
        })
        .collect();
    let cells = cells.into_iter().collect::<AppResult<Vec<_>>>()?;
    let precluded: Vec<&AqCell> = cells.iter().filter(|c| c.precluded).collect();
    let nonzero = precluded.iter().filter(|c| c.value != 0.0).count();
    let worst = cells.iter().fold(None::<&AqCell>, |w, c| match w {
        Some(w) if w.ratio >= c.ratio => Some(w),
        _ => Some(c),
    });
    let finite = cells.iter().all(|c| c.ratio.is_finite());
    let checks = vec![
        Check::new(
            "exact zero where supports preclude solutions",
            !precluded.is_empty() && nonzero == 0,
            format!("{} precluded cells, {nonzero} nonzero", precluded.len()),
        ),
        Check::new(
            "bound ratios finite",
            finite,
            worst.map_or_else(String::new, |w| {
                format!(
                    "{} cells, max ratio {:.4} at q = {}, (a,b) = ({},{}), M = {:.1}, N = {:.1}, sign {}",
                    cells.len(),
                    w.ratio,
                    w.q,
                    w.a,
                    w.b,
                    w.m_size,
                    w.n_size,
                    w.sign
                )
            }),
        ),
    ];
    Ok((SuiteReport::new("aq", checks), cells))
}

/// Form and table size for [`aq`].
pub fn aq_form() -> AppResult<EigenformData> {
    let m_max = aq_grid().iter().map(|q| q.m_range().1).max().unwrap_or(1);
    Ok(EigenformData::delta(m_max as usize)?)
}

/// Moment context for Δ covering every q <= `q_max`.
pub fn delta_context(q_max: u64) -> AppResult<MomentContext> {
    let f = EigenformData::delta(64)?;
    let need = table_for_moments(f.kind(), q_max)?;
    let f = EigenformData::delta(need as usize)?;
    Ok(MomentContext::new(f)?.with_sieve(q_max))
}

