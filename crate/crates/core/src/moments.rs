//! The twisted mixed moment M_{f,E}(q;a,b) by brute force over characters
//! and by the divisor-sum route, its predicted main term, and the error
//! exponents as exact rationals.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_rational::Ratio;

use crate::arith::{divisors, euler_phi, factorize, gcd, is_admissible, mod_inv, moebius, phi_star, SieveCache};
use crate::characters::{CharacterGroup, Parity, NON_UNIT};
use crate::eigenform::EigenformData;
use crate::error::invalid;
use crate::lfunc::{l_one_f, zeta_two, AfeKernel, WeightFunction};
use crate::{Error, Result};

/// (q; a, b) with q ≢ 2 (mod 4), (a, b) = (ab, q) = 1 and 1 <= a, b <= q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MomentQuery {
    pub q: u64,
    pub a: u64,
    pub b: u64,
}

impl MomentQuery {
    pub fn new(q: u64, a: u64, b: u64) -> Result<Self> {
        if q < 3 || !is_admissible(q) {
            return Err(Error::Inadmissible(q));
        }
        if a == 0 || b == 0 || a > q || b > q {
            return Err(invalid!("need 1 <= a, b <= q, got a={a}, b={b}, q={q}"));
        }
        if gcd(a, b) != 1 || gcd(a * b, q) != 1 {
            return Err(Error::NotCoprime(alloc::format!("(a,b)=({a},{b}) with q={q}")));
        }
        Ok(Self { q, a, b })
    }

    pub fn swapped(&self) -> Self {
        Self { q: self.q, a: self.b, b: self.a }
    }
}

/// ε(f,χ) for χ of the given parity.
pub fn pair_root_number(f: &EigenformData, parity: Parity) -> i8 {
    if f.is_holomorphic() {
        parity.sign() as i8 * f.epsilon()
    } else {
        f.epsilon()
    }
}

/// Parities whose characters enter M_{f,E}.
pub fn included_parities(f: &EigenformData) -> Vec<Parity> {
    [Parity::Even, Parity::Odd]
        .into_iter()
        .filter(|&p| pair_root_number(f, p) == 1)
        .collect()
}

/// Everything that depends on f only: the two AFE weights and L(1,f).
#[derive(Debug, Clone)]
pub struct MomentContext {
    f: EigenformData,
    weights: [WeightFunction; 2],
    l_one: f64,
    sieve: Option<SieveCache>,
}

fn slot(p: Parity) -> usize {
    match p {
        Parity::Even => 0,
        Parity::Odd => 1,
    }
}

impl MomentContext {
    pub fn new(f: EigenformData) -> Result<Self> {
        let weights = [
            WeightFunction::new(f.kind(), Parity::Even)?,
            WeightFunction::new(f.kind(), Parity::Odd)?,
        ];
        let l_one = l_one_f(&f)?;
        Ok(Self { f, weights, l_one, sieve: None })
    }

    /// Shares one divisor sieve across every q up to `q_max`.
    pub fn with_sieve(mut self, q_max: u64) -> Self {
        let limit = self.required_table(q_max);
        self.sieve = Some(SieveCache::new(limit as u32 + 1));
        self
    }

    pub fn form(&self) -> &EigenformData {
        &self.f
    }

    pub fn weight(&self, parity: Parity) -> &WeightFunction {
        &self.weights[slot(parity)]
    }

    pub fn l_one(&self) -> f64 {
        self.l_one
    }

    /// λ-table length needed for modulus `q`.
    pub fn required_table(&self, q: u64) -> u64 {
        let x = self.weights[0].x_cut().max(self.weights[1].x_cut());
        libm::floor((q * q) as f64 * x) as u64
    }

    pub fn kernel(&self, q: u64, parity: Parity) -> Result<AfeKernel> {
        AfeKernel::with_sieve(q, self.weight(parity), &self.f, self.sieve.as_ref())
    }
}

/// Per-parity pieces of a brute-force evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityPart {
    /// 𝓜_σ = (1/φ*) Σ*_{χ(-1)=σ} L(1/2,f⊗χ)L(1/2,χ̄)² χ(āb).
    pub value: Complex64,
    pub characters: usize,
    pub root_number: i8,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub query: MomentQuery,
    pub form: alloc::string::String,
    /// M_{f,E}(q;a,b).
    pub brute: Complex64,
    pub even: ParityPart,
    pub odd: ParityPart,
    pub main: MainTerm,
    pub ratio_theorem: f64,
    pub ratio_corollary: f64,
    /// Characters summed into M_{f,E}.
    pub chars_used: usize,
    /// Primitive characters with ε(f,χ) = -1 left out of M_{f,E}.
    pub chars_skipped: usize,
}

impl MomentReport {
    pub fn part(&self, parity: Parity) -> &ParityPart {
        match parity {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        }
    }
}

/// T[u] = Σ_{m n̄ ≡ u (q)} λ(m)τ(n)(mn)^{-1/2}V(mn/q²) over (mn, q) = 1.
fn residue_weights(kernel: &AfeKernel, f: &EigenformData) -> Vec<f64> {
    let q = kernel.q() as usize;
    let inv: Vec<usize> = (0..q)
        .map(|x| mod_inv(x as i64, q as u64).map_or(usize::MAX, |v| v as usize))
        .collect();
    let mut t = vec![0.0; q];
    kernel.for_each(f.lambda_table(), |m, n, w| {
        let (mi, ni) = (m % q, inv[n % q]);
        if ni != usize::MAX && inv[mi] != usize::MAX {
            t[mi * ni % q] += w;
        }
    });
    t
}

fn parity_part(
    ctx: &MomentContext,
    group: &CharacterGroup,
    query: &MomentQuery,
    parity: Parity,
) -> Result<ParityPart> {
    let q = query.q;
    let kernel = ctx.kernel(q, parity)?;
    let t = residue_weights(&kernel, &ctx.f);
    let eps = pair_root_number(&ctx.f, parity);
    let twist = (mod_inv(query.a as i64, q).ok_or_else(|| invalid!("a not invertible"))? * query.b % q) as usize;
    let mut total = Complex64::new(0.0, 0.0);
    let mut count = 0;
    for info in group.primitive_with_parity(parity) {
        let row = group.row(info.index);
        // A(χ) = Σ_u T[u]χ(u); A(χ̄) is its conjugate because T is real
        let mut a = Complex64::new(0.0, 0.0);
        for (u, &w) in t.iter().enumerate() {
            if w != 0.0 && row[u] != NON_UNIT {
                a += group.root(row[u]) * w;
            }
        }
        let g = a + a.conj() * f64::from(eps);
        total += g * group.root(row[twist]);
        count += 1;
    }
    let phi = phi_star(q)? as f64;
    Ok(ParityPart { value: total / phi, characters: count, root_number: eps, tail: 2.0 * kernel.tail })
}

/// M_{f,E}(q;a,b) as the average of the AFE over primitive characters.
pub fn brute_moment(ctx: &MomentContext, query: &MomentQuery) -> Result<MomentReport> {
    brute_moment_with(ctx, query, &CharacterGroup::new(query.q)?)
}

/// Same, with a prebuilt (for example cached) character group.
pub fn brute_moment_with(ctx: &MomentContext, query: &MomentQuery, group: &CharacterGroup) -> Result<MomentReport> {
    if group.modulus() != query.q {
        return Err(invalid!("character group mod {} for query mod {}", group.modulus(), query.q));
    }
    ctx.f.require(ctx.required_table(query.q))?;
    let even = parity_part(ctx, group, query, Parity::Even)?;
    let odd = parity_part(ctx, group, query, Parity::Odd)?;
    let (mut brute, mut used, mut skipped) = (Complex64::new(0.0, 0.0), 0, 0);
    for part in [&even, &odd] {
        if part.root_number == 1 {
            brute += part.value;
            used += part.characters;
        } else {
            skipped += part.characters;
        }
    }
    let main = main_term(ctx, query)?;
    Ok(MomentReport {
        query: *query,
        form: alloc::string::String::from(ctx.f.label()),
        brute,
        even,
        odd,
        ratio_theorem: brute.re / main.theorem,
        ratio_corollary: brute.re / main.corollary,
        main,
        chars_used: used,
        chars_skipped: skipped,
    })
}

/// 𝓜ˢ_σ(q;a,b) split into the diagonal bm = an and the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisorSum {
    pub diagonal: f64,
    pub off_diagonal: f64,
}

impl DivisorSum {
    pub fn total(&self) -> f64 {
        self.diagonal + self.off_diagonal
    }
}

/// The parity component from the orthogonality formula:
/// 𝓜_σ = (𝓜ˢ_σ(q;a,b) + ε(f,χ)·𝓜ˢ_σ(q;b,a))/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisorRoute {
    pub forward: DivisorSum,
    pub backward: DivisorSum,
    pub value: f64,
}

pub const DIVISOR_ROUTE_MAX_Q: u64 = 150;

/// 𝓜ˢ_σ directly over pairs (m, n): for each d | q with μ(q/d) != 0 the
/// congruences bm ≡ ±an (mod d) are tested pair by pair.
pub fn divisor_route(ctx: &MomentContext, query: &MomentQuery, parity: Parity) -> Result<DivisorRoute> {
    let q = query.q;
    if q > DIVISOR_ROUTE_MAX_Q {
        return Err(Error::Budget(alloc::format!("divisor route limited to q <= {DIVISOR_ROUTE_MAX_Q}")));
    }
    ctx.f.require(ctx.required_table(q))?;
    let kernel = ctx.kernel(q, parity)?;
    let sigma = parity.sign() as f64;
    let coeffs: Vec<(u64, f64)> = divisors(q)?
        .into_iter()
        .map(|d| Ok((d, euler_phi(d)? as f64 * f64::from(moebius(q / d)?))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&(_, c)| c != 0.0)
        .collect();
    let (a, b) = (query.a as i128, query.b as i128);
    let mut fwd = [0.0f64; 2];
    let mut bwd = [0.0f64; 2];
    kernel.for_each(ctx.f.lambda_table(), |m, n, w| {
        if gcd((m as u64) * (n as u64) % q, q) != 1 {
            return;
        }
        let (m, n) = (m as i128, n as i128);
        for (x, y, acc) in [(a, b, &mut fwd), (b, a, &mut bwd)] {
            // condition y·m ≡ ±x·n (mod d)
            let (minus, plus) = (y * m - x * n, y * m + x * n);
            let (mut same, mut opposite) = (0.0, 0.0);
            for &(d, c) in &coeffs {
                let d = d as i128;
                if minus % d == 0 {
                    same += c;
                }
                if plus % d == 0 {
                    opposite += sigma * c;
                }
            }
            if minus == 0 {
                acc[0] += w * same;
                acc[1] += w * opposite;
            } else {
                acc[1] += w * (same + opposite);
            }
        }
    });
    let phi = phi_star(q)? as f64;
    let forward = DivisorSum { diagonal: fwd[0] / phi, off_diagonal: fwd[1] / phi };
    let backward = DivisorSum { diagonal: bwd[0] / phi, off_diagonal: bwd[1] / phi };
    let eps = f64::from(pair_root_number(&ctx.f, parity));
    Ok(DivisorRoute { forward, backward, value: 0.5 * (forward.total() + eps * backward.total()) })
}

/// MT^d(q;a,b) = Σ_{(t,q)=1} λ(at)τ(bt)/(√(ab)·t)·V(ab t²/q²).
pub fn diagonal_term(ctx: &MomentContext, query: &MomentQuery, parity: Parity) -> Result<f64> {
    let (q, a, b) = (query.q, query.a, query.b);
    let w = ctx.weight(parity);
    let t_max = libm::floor((q as f64) * libm::sqrt(w.x_cut() / (a * b) as f64)) as u64;
    ctx.f.require(a * t_max.max(1))?;
    let tau_table = SieveCache::new((b * t_max.max(1)) as u32 + 1).divisor_count_table();
    let mut s = 0.0;
    for t in 1..=t_max {
        if gcd(t, q) != 1 {
            continue;
        }
        let x = (a * b) as f64 * (t * t) as f64 / (q * q) as f64;
        s += ctx.f.lambda(a * t)? * f64::from(tau_table[(b * t) as usize]) / t as f64 * w.eval(x)?;
    }
    Ok(s / libm::sqrt((a * b) as f64))
}

/// c_{a,b} with a certified bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cab {
    pub value: f64,
    pub tail: f64,
    /// Largest exponent of each prime that was summed.
    pub depth: u32,
}

/// λ(p^j) for j <= depth from λ(p) by the Hecke recursion.
fn prime_power_lambdas(lp: f64, depth: usize) -> Vec<f64> {
    let mut v = vec![1.0, lp];
    while v.len() <= depth {
        let n = v.len();
        v.push(lp * v[n - 1] - v[n - 2]);
    }
    v
}

/// c_{a,b} = Σ_{a₁|a^∞} Σ_{b₁|b^∞} λ(a a₁ b₁)τ(b a₁ b₁)/(a₁b₁).
///
/// The double sum factors over primes: p | a gives Σ_e λ(p^{α+e})(e+1)/p^e and
/// p | b gives Σ_e λ(p^e)(β+e+1)/p^e. Each series is summed to depth E and
/// the rest bounded with |λ(p^j)| <= (j+1)p^{jθ}.
pub fn c_ab(a: u64, b: u64, f: &EigenformData, tol: f64) -> Result<Cab> {
    if gcd(a, b) != 1 {
        return Err(Error::NotCoprime(alloc::format!("(a,b)=({a},{b})")));
    }
    let theta = f.theta();
    if !(theta < 0.5) {
        return Err(invalid!("θ_f = {theta} >= 1/2: the c_(a,b) majorant diverges"));
    }
    let mut factors: Vec<(u64, u32, u32)> = Vec::new();
    for (p, e) in factorize(a)?.factors() {
        factors.push((*p, *e, 0));
    }
    for (p, e) in factorize(b)?.factors() {
        factors.push((*p, 0, *e));
    }
    let mut depth = 8u32;
    loop {
        let mut value = 1.0;
        let mut full_major = 1.0;
        let mut trunc_major = 1.0;
        for &(p, alpha, beta) in &factors {
            let lp = f.lambda(p)?;
            let pf = p as f64;
            let lam = prime_power_lambdas(lp, (alpha + depth) as usize);
            let mut s = 0.0;
            let mut maj = 0.0;
            let term_major = |e: u32| -> f64 {
                let j = f64::from(alpha + e);
                (j + 1.0) * libm::pow(pf, j * theta) * f64::from(beta + e + 1) / libm::pow(pf, f64::from(e))
            };
            for e in 0..=depth {
                s += lam[(alpha + e) as usize] * f64::from(beta + e + 1) / libm::pow(pf, f64::from(e));
                maj += term_major(e);
            }
            // the majorant terms have ratio -> p^{θ-1} < 1; sum on to convergence
            let mut full = maj;
            let mut e = depth + 1;
            loop {
                let t = term_major(e);
                full += t;
                if t < 1e-18 * full || e > depth + 10_000 {
                    break;
                }
                e += 1;
            }
            value *= s;
            full_major *= full;
            trunc_major *= maj;
        }
        let tail = (full_major - trunc_major).max(0.0);
        if tail <= tol {
            return Ok(Cab { value, tail, depth });
        }
        if depth > 4096 {
            return Err(Error::TailCertificate(alloc::format!("c_(a,b) tail {tail} above {tol}")));
        }
        depth *= 2;
    }
}

/// Which Euler factor at p | qab multiplies L(1,f)²/ζ(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerFactor {
    /// (1 - λ(p)/p + 1/p²)(1 - 1/p²)^{-2}, as printed with the theorem.
    Printed,
    /// (1 - λ(p)/p + 1/p²)²(1 - 1/p²)^{-1}, the local factor that removes p
    /// from Σ λ(n)τ(n)n^{-s} = L(s,f)²/ζ(2s).
    RankinSelberg,
}

impl EulerFactor {
    pub fn at(self, lp: f64, p: f64, s: f64) -> f64 {
        let e = 1.0 - lp / libm::pow(p, s) + 1.0 / libm::pow(p, 2.0 * s);
        let z = 1.0 - 1.0 / libm::pow(p, 2.0 * s);
        match self {
            EulerFactor::Printed => e / (z * z),
            EulerFactor::RankinSelberg => e * e / z,
        }
    }
}

pub fn euler_product(f: &EigenformData, n: u64, variant: EulerFactor) -> Result<f64> {
    factorize(n)?
        .primes()
        .try_fold(1.0, |acc, p| Ok(acc * variant.at(f.lambda(p)?, p as f64, 1.0)))
}

pub const CAB_TOLERANCE: f64 = 1e-10;

/// Predicted main terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainTerm {
    /// c_f·E·(c_{a,b}+c_{b,a})/√(ab)·L(1,f)²/ζ(2) with the printed E.
    pub theorem: f64,
    /// The same with (c_{a,b}+c_{b,a})/√(ab) replaced by 1.
    pub corollary: f64,
    /// `theorem` with the Rankin–Selberg Euler factor.
    pub theorem_rankin: f64,
    pub c_ab: f64,
    pub c_ba: f64,
    pub euler_printed: f64,
    pub euler_rankin: f64,
}

pub fn main_term(ctx: &MomentContext, query: &MomentQuery) -> Result<MainTerm> {
    let f = &ctx.f;
    let n = query.q * query.a * query.b;
    let euler_printed = euler_product(f, n, EulerFactor::Printed)?;
    let euler_rankin = euler_product(f, n, EulerFactor::RankinSelberg)?;
    let cab = c_ab(query.a, query.b, f, CAB_TOLERANCE)?.value;
    let cba = c_ab(query.b, query.a, f, CAB_TOLERANCE)?.value;
    let base = f.c_f() * ctx.l_one * ctx.l_one / zeta_two();
    let pair = (cab + cba) / libm::sqrt((query.a * query.b) as f64);
    Ok(MainTerm {
        theorem: base * euler_printed * pair,
        corollary: base * euler_printed,
        theorem_rankin: base * euler_rankin * pair,
        c_ab: cab,
        c_ba: cba,
        euler_printed,
        euler_rankin,
    })
}

/// The two candidate normalizations of the main term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Theorem,
    Corollary,
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub q: u64,
    pub brute: f64,
    pub main_theorem: f64,
    pub main_corollary: f64,
}

/// Median |ratio - 1| per third of the q-range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thirds {
    pub bottom: f64,
    pub middle: f64,
    pub top: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub theorem: Thirds,
    pub corollary: Thirds,
    /// Medians of |ratio_theorem - 1| over dyadic q-blocks [2^j, 2^{j+1}).
    pub dyadic: Vec<(u64, f64)>,
    /// Normalizations whose median deviation shrinks from the bottom third
    /// of the q-range to the top third and is the smaller one there.
    pub convergent: Vec<Normalization>,
    /// Least-squares slope of ln|brute - main_theorem| against ln q on the
    /// top half of the range.
    pub fitted_exponent: Option<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SweepSummary {
    pub fn from_points(points: &[SweepPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid!("empty sweep"));
        }
        let lo = points.iter().map(|p| p.q).min().unwrap_or(0) as f64;
        let hi = points.iter().map(|p| p.q).max().unwrap_or(0) as f64;
        let span = (hi - lo).max(1.0);
        let third = |p: &SweepPoint| (((p.q as f64 - lo) / span * 3.0) as usize).min(2);
        let thirds = |dev: &dyn Fn(&SweepPoint) -> f64| {
            let mut buckets = [Vec::new(), Vec::new(), Vec::new()];
            for p in points {
                buckets[third(p)].push(dev(p));
            }
            let [b, m, t] = buckets;
            Thirds { bottom: median(b), middle: median(m), top: median(t) }
        };
        let theorem = thirds(&|p| (p.brute / p.main_theorem - 1.0).abs());
        let corollary = thirds(&|p| (p.brute / p.main_corollary - 1.0).abs());
        // a constant-factor miss can still shrink along a monotone sweep, so the
        // convergent normalization must also be the closer one at the top
        let mut convergent = Vec::new();
        if theorem.top < theorem.bottom && theorem.top < corollary.top {
            convergent.push(Normalization::Theorem);
        }
        if corollary.top < corollary.bottom && corollary.top < theorem.top {
            convergent.push(Normalization::Corollary);
        }
        let mut dyadic = Vec::new();
        let mut j = 1u64;
        while j <= hi as u64 {
            let block: Vec<f64> = points
                .iter()
                .filter(|p| p.q >= j && p.q < 2 * j)
                .map(|p| (p.brute / p.main_theorem - 1.0).abs())
                .collect();
            if !block.is_empty() {
                dyadic.push((j, median(block)));
            }
            j *= 2;
        }
        let mid = 0.5 * (lo + hi);
        let fit: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.q as f64 >= mid)
            .map(|p| (libm::log(p.q as f64), libm::log((p.brute - p.main_theorem).abs())))
            .filter(|(_, y)| y.is_finite())
            .collect();
        let fitted_exponent = (fit.len() >= 2).then(|| {
            let n = fit.len() as f64;
            let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
            let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = fit.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            sxy / sxx
        });
        Ok(Self { theorem, corollary, dyadic, convergent, fitted_exponent })
    }

    pub fn winner(&self) -> Option<Normalization> {
        self.convergent.first().copied()
    }
}

pub type Rational = Ratio<i128>;

/// The error exponents of the moment asymptotic as exact rationals, with
/// a = q^α, b = q^β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentBudget {
    pub theta: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    /// -1/20 + 3α/10.
    pub unbalanced_exponent: Rational,
    /// -(1-2θ)/(22+16θ) + β(3+2θ)/(11+8θ).
    pub bilinear_exponent: Rational,
    /// The power saving: minus the larger of the two exponents above.
    pub q_exponent: Rational,
    /// η = min((1-2θ)/(12+12θ), (1-2θ-(6+4θ)β)/(22+16θ)).
    pub eta: Rational,
    /// The bilinear Kloosterman step needs θ < 1/4.
    pub bilinear_valid: bool,
}

pub fn error_exponent(theta: Rational, alpha: Rational, beta: Rational) -> Result<ExponentBudget> {
    let r = |n: i128, d: i128| Rational::new(n, d);
    let zero = r(0, 1);
    if theta < zero || theta >= r(1, 2) {
        return Err(invalid!("θ_f = {theta} outside [0, 1/2)"));
    }
    if alpha < zero || beta < zero {
        return Err(invalid!("α and β must be nonnegative"));
    }
    let one = r(1, 1);
    let two = r(2, 1);
    let unbalanced_exponent = -r(1, 20) + r(3, 10) * alpha;
    let bilinear_exponent =
        -(one - two * theta) / (r(22, 1) + r(16, 1) * theta) + beta * (r(3, 1) + two * theta) / (r(11, 1) + r(8, 1) * theta);
    let q_exponent = -core::cmp::max(unbalanced_exponent, bilinear_exponent);
    let eta = core::cmp::min(
        (one - two * theta) / (r(12, 1) + r(12, 1) * theta),
        (one - two * theta - (r(6, 1) + r(4, 1) * theta) * beta) / (r(22, 1) + r(16, 1) * theta),
    );
    Ok(ExponentBudget {
        theta,
        alpha,
        beta,
        unbalanced_exponent,
        bilinear_exponent,
        q_exponent,
        eta,
        bilinear_valid: theta < r(1, 4),
    })
}

/// Σ_{(n,P)=1} λ(n)τ(n)n^{-s} for s > 1 up to `n_max`, with P = `coprime_to`.
pub fn coprime_rankin_sum(f: &EigenformData, coprime_to: u64, s: f64, n_max: u64) -> Result<f64> {
    f.require(n_max)?;
    let tau = SieveCache::new(n_max as u32 + 1).divisor_count_table();
    let mut acc = 0.0;
    for n in 1..=n_max {
        if gcd(n, coprime_to) == 1 {
            acc += f.lambda_table()[n as usize] * f64::from(tau[n as usize]) / libm::pow(n as f64, s);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> MomentContext {
        MomentContext::new(EigenformData::delta(200_000).unwrap()).unwrap()
    }

    #[test]
    fn query_guards() {
        assert!(matches!(MomentQuery::new(6, 1, 1), Err(Error::Inadmissible(6))));
        assert!(matches!(MomentQuery::new(15, 3, 1), Err(Error::NotCoprime(_))));
        assert!(matches!(MomentQuery::new(15, 2, 4), Err(Error::NotCoprime(_))));
        assert!(MomentQuery::new(15, 2, 7).is_ok());
        assert!(MomentQuery::new(15, 16, 1).is_err());
    }

    #[test]
    fn c_ab_examples() {
        let f = EigenformData::delta(1000).unwrap();
        let one = c_ab(1, 1, &f, 1e-10).unwrap();
        assert_eq!(one.value, 1.0);
        for p in [2u64, 3, 7] {
            let c = c_ab(p, 1, &f, 1e-10).unwrap();
            // 30-term oracle from the table: Σ_j λ(p^{j+1}) d(p^j) / p^j
            let mut oracle = 0.0;
            let mut pj = 1u64;
            for j in 0..30u32 {
                let Some(n) = pj.checked_mul(p).filter(|&n| n <= 1000) else { break };
                oracle += f.lambda(n).unwrap() * f64::from(j + 1) / pj as f64;
                pj = n;
            }
            // the table stops early; the remaining terms are below the majorant tail
            let rest: f64 = (0..200)
                .map(|j: i32| {
                    let jj = f64::from(j);
                    if (p as f64).powi(j + 1) <= 1000.0 {
                        0.0
                    } else {
                        (jj + 2.0) * (jj + 1.0) / (p as f64).powi(j)
                    }
                })
                .sum();
            assert!((c.value - oracle).abs() <= rest + 1e-10, "p={p}");
            assert!(c.tail <= 1e-10);
        }
        assert!(c_ab(2, 4, &f, 1e-10).is_err());
    }

    #[test]
    fn c_ab_matches_table_sum() {
        // independent route: enumerate S-units r = a₁b₁, read λ and τ from
        // tables where they reach, and bound the rest by d(ar)d(br)/r
        const N: u64 = 200_000;
        let f = EigenformData::delta(N as usize).unwrap();
        let tau = SieveCache::new(N as u32 + 1).divisor_count_table();
        let divisor_count = |n: u64| -> f64 {
            factorize(n).unwrap().factors().iter().map(|(_, e)| f64::from(e + 1)).product()
        };
        for (a, b) in [(2u64, 3u64), (3, 2), (5, 1), (1, 7), (6, 5)] {
            let primes: Vec<u64> = factorize(a * b).unwrap().primes().collect();
            let mut units = vec![1u64];
            for &p in &primes {
                let mut next = Vec::new();
                for &u in &units {
                    let mut v = u;
                    while v <= 1_000_000_000_000 {
                        next.push(v);
                        v *= p;
                    }
                }
                units = next;
            }
            let (mut s, mut rest) = (0.0, 0.0);
            for r in units {
                if a.max(b) * r <= N {
                    s += f.lambda(a * r).unwrap() * f64::from(tau[(b * r) as usize]) / r as f64;
                } else {
                    rest += divisor_count(a * r) * divisor_count(b * r) / r as f64;
                }
            }
            let c = c_ab(a, b, &f, 1e-12).unwrap();
            assert!((c.value - s).abs() <= rest + 1e-6, "({a},{b}) {} {s} {rest}", c.value);
        }
    }

    #[test]
    fn c_ab_tail_shrinks() {
        let f = EigenformData::delta(100).unwrap();
        let loose = c_ab(2, 3, &f, 1e-4).unwrap();
        let tight = c_ab(2, 3, &f, 1e-12).unwrap();
        assert!(tight.tail <= 0.5 * loose.tail);
        assert!((loose.value - tight.value).abs() <= loose.tail);
    }

    #[test]
    fn exponents_exact() {
        let r = |n, d| Rational::new(n, d);
        let b = error_exponent(r(0, 1), r(0, 1), r(0, 1)).unwrap();
        assert_eq!(b.q_exponent, r(1, 22));
        assert_eq!(b.eta, r(1, 22));
        let m = error_exponent(r(7, 64), r(0, 1), r(0, 1)).unwrap();
        assert_eq!(m.q_exponent, r(5, 152));
        assert!(m.bilinear_valid);
        // (3+2θ)/(11+8θ) = 3/11 at θ = 0
        let beta = error_exponent(r(0, 1), r(0, 1), r(1, 1)).unwrap();
        assert_eq!(beta.bilinear_exponent + r(1, 22), r(3, 11));
        assert!(error_exponent(r(1, 2), r(0, 1), r(0, 1)).is_err());
        for t in 0..=7 {
            let th = r(t, 64);
            let v = (r(1, 1) - r(2, 1) * th) / (r(22, 1) + r(16, 1) * th);
            assert!(v > r(0, 1) && v <= r(1, 22));
        }
    }

    #[test]
    fn printed_euler_factor_is_transcribed() {
        let f = EigenformData::delta(100).unwrap();
        let l2 = f.lambda(2).unwrap();
        let want = (1.0 - l2 / 2.0 + 0.25) * (1.0 - 0.25f64).powi(-2);
        assert!((EulerFactor::Printed.at(l2, 2.0, 1.0) - want).abs() < 1e-15);
        assert!((euler_product(&f, 12, EulerFactor::Printed).unwrap()
            - want * EulerFactor::Printed.at(f.lambda(3).unwrap(), 3.0, 1.0))
        .abs()
            < 1e-14);
    }

    #[test]
    fn rankin_selberg_factor_removes_primes() {
        // at s = 3 the Dirichlet series converges absolutely and fast
        let f = EigenformData::delta(100_000).unwrap();
        let full = coprime_rankin_sum(&f, 1, 3.0, 100_000).unwrap();
        for p in [2u64, 3, 6, 35] {
            let coprime = coprime_rankin_sum(&f, p, 3.0, 100_000).unwrap();
            let mut rs = full;
            let mut printed = full;
            for prime in factorize(p).unwrap().primes() {
                let lp = f.lambda(prime).unwrap();
                rs *= EulerFactor::RankinSelberg.at(lp, prime as f64, 3.0);
                printed *= EulerFactor::Printed.at(lp, prime as f64, 3.0);
            }
            assert!((coprime - rs).abs() < 1e-9, "p={p}");
            assert!((coprime - printed).abs() > 1e-4, "p={p}");
        }
    }

    #[test]
    fn brute_is_real_and_counts_characters() {
        let ctx = ctx();
        for (q, a, b) in [(5u64, 1u64, 1u64), (7, 2, 3), (12, 1, 5), (13, 3, 1)] {
            let query = MomentQuery::new(q, a, b).unwrap();
            let r = brute_moment(&ctx, &query).unwrap();
            assert!(r.brute.im.abs() <= 1e-8 * (1.0 + r.brute.norm()), "q={q}");
            let g = CharacterGroup::new(q).unwrap();
            let even = g.primitive_with_parity(Parity::Even).count();
            assert_eq!(r.chars_used, even);
            assert_eq!(r.chars_used + r.chars_skipped, phi_star(q).unwrap() as usize);
        }
    }

    #[test]
    fn q5_single_character() {
        // one even primitive character mod 5: M = L(1/2,f⊗χ)L(1/2,χ)²/φ*(5)
        let ctx = ctx();
        let r = brute_moment(&ctx, &MomentQuery::new(5, 1, 1).unwrap()).unwrap();
        let g = CharacterGroup::new(5).unwrap();
        let chi = g.primitive_with_parity(Parity::Even).next().unwrap().index;
        let f = ctx.form();
        let l = crate::lfunc::twisted_l_half(&g, chi, f).unwrap();
        let d = crate::lfunc::dirichlet_l_half(&g, g.conjugate(chi)).unwrap();
        assert!((r.brute - l * d * d / 3.0).norm() < 1e-9);
    }

    #[test]
    fn routes_agree() {
        let ctx = ctx();
        for (q, a, b) in [(5u64, 1u64, 1u64), (7, 1, 1), (13, 1, 1), (12, 1, 5), (9, 2, 1), (16, 3, 1), (15, 1, 2)] {
            let query = MomentQuery::new(q, a, b).unwrap();
            let r = brute_moment(&ctx, &query).unwrap();
            for parity in [Parity::Even, Parity::Odd] {
                let d = divisor_route(&ctx, &query, parity).unwrap();
                let brute = r.part(parity).value;
                assert!((brute.re - d.value).abs() <= 1e-6 * (1.0 + d.value.abs()), "q={q} {parity:?} {} {}", brute.re, d.value);
                let diag = diagonal_term(&ctx, &query, parity).unwrap();
                assert!((d.forward.diagonal - diag).abs() < 1e-12, "q={q}");
            }
        }
    }

    #[test]
    fn orthogonality_route_matches_enumeration() {
        // replacing the divisor sums by enumerated character sums gives the
        // same weights pair by pair
        use crate::characters::orthogonality_sum;
        for q in [5u64, 9, 12, 13, 16] {
            let g = CharacterGroup::new(q).unwrap();
            for m in 1..=20i64 {
                for n in 1..=20i64 {
                    if gcd((m * n) as u64, q) != 1 {
                        continue;
                    }
                    for parity in [Parity::Even, Parity::Odd] {
                        let e = g.primitive_parity_sum(m, n, parity);
                        let o = orthogonality_sum(q, m, n, parity).unwrap().to_f64();
                        assert!((e.re - o).abs() < 1e-9 && e.im.abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn main_term_shapes() {
        let ctx = ctx();
        let m = main_term(&ctx, &MomentQuery::new(7, 1, 1).unwrap()).unwrap();
        assert!((m.theorem / m.corollary - 2.0).abs() < 1e-14);
        assert_eq!(ctx.form().c_f(), 0.5);
    }

    #[test]
    fn excluded_parity_vanishes_only_on_the_diagonal_twist() {
        let ctx = ctx();
        let r = brute_moment(&ctx, &MomentQuery::new(31, 1, 1).unwrap()).unwrap();
        assert!(r.odd.value.norm() < 1e-12);
        let r = brute_moment(&ctx, &MomentQuery::new(31, 2, 1).unwrap()).unwrap();
        assert!(r.odd.value.im.abs() < 1e-12);
        assert!(r.odd.value.re.abs() > 0.1);
        let s = brute_moment(&ctx, &MomentQuery::new(31, 1, 2).unwrap()).unwrap();
        assert!((s.odd.value + r.odd.value).norm() < 1e-12);
        assert!((s.brute - r.brute).norm() < 1e-12);
    }

    #[test]
    fn sweep_summary_adjudicates() {
        // brute -> main_theorem with deviation 1/q; the corollary main term is half as large
        let points: Vec<SweepPoint> = (30..=300)
            .map(|q| {
                let main = 2.0;
                SweepPoint { q, brute: main * (1.0 + 5.0 / q as f64), main_theorem: main, main_corollary: main / 2.0 }
            })
            .collect();
        let s = SweepSummary::from_points(&points).unwrap();
        assert_eq!(s.winner(), Some(Normalization::Theorem));
        assert!(s.theorem.top < s.theorem.middle && s.theorem.middle < s.theorem.bottom);
        // |brute - main| = 10/q exactly
        assert!((s.fitted_exponent.unwrap() + 1.0).abs() < 1e-9);
        assert!(SweepSummary::from_points(&[]).is_err());
    }
}
