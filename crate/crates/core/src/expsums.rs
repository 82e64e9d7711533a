//! Kloosterman sums, shifted convolution sums and the bilinear forms that
//! bound them, evaluated by brute force and compared with their bounds.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::arith::{divisor_count, divisors, euler_phi, gcd, mod_inv, moebius, phi_star, SieveCache};
use crate::eigenform::EigenformData;
use crate::error::invalid;
use crate::special::bump;
use crate::{Error, Result};

pub const KLOOSTERMAN_MAX_MODULUS: u64 = 1_000_000;

/// Work budget for the brute-force convolution sums.
pub const PAIR_BUDGET: u64 = 10_000_000;

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn residue(x: i64, c: u64) -> u64 {
    x.rem_euclid(c as i64) as u64
}

/// Units modulo c with their inverses and the phase table e(k/c).
#[derive(Debug, Clone)]
pub struct KloostermanTable {
    c: u64,
    units: Vec<(u64, u64)>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl KloostermanTable {
    pub fn new(c: u64) -> Result<Self> {
        if c == 0 || c > KLOOSTERMAN_MAX_MODULUS {
            return Err(invalid!("Kloosterman modulus must lie in [1, {KLOOSTERMAN_MAX_MODULUS}], got {c}"));
        }
        let units = (0..c)
            .filter_map(|x| mod_inv(x as i64, c).map(|xi| (x, xi)))
            .collect();
        let (cos, sin) = (0..c)
            .map(|k| {
                let t = TAU * k as f64 / c as f64;
                (libm::cos(t), libm::sin(t))
            })
            .unzip();
        Ok(Self { c, units, cos, sin })
    }

    pub fn modulus(&self) -> u64 {
        self.c
    }

    /// How often each phase k/c occurs as (mx + n x̄)/c.
    ///
    /// Summing over this histogram in k order makes the result independent of
    /// the order of x, so S(m,n;c) = S(n,m;c) holds bit for bit.
    fn histogram(&self, m: i64, n: i64) -> Vec<u32> {
        let c = self.c;
        let (m, n) = (residue(m, c) as u128, residue(n, c) as u128);
        let mut h = vec![0u32; c as usize];
        for &(x, xi) in &self.units {
            let k = (m * x as u128 + n * xi as u128) % c as u128;
            h[k as usize] += 1;
        }
        h
    }

    pub fn eval_complex(&self, m: i64, n: i64) -> Complex64 {
        let h = self.histogram(m, n);
        let (mut re, mut im) = (Compensated::default(), Compensated::default());
        for (k, &count) in h.iter().enumerate() {
            if count != 0 {
                re.add(f64::from(count) * self.cos[k]);
                im.add(f64::from(count) * self.sin[k]);
            }
        }
        Complex64::new(re.value(), im.value())
    }

    /// S(m,n;c). The x ↔ -x pairing makes it real.
    pub fn eval(&self, m: i64, n: i64) -> f64 {
        self.eval_complex(m, n).re
    }
}

/// S(m,n;c) = Σ_{x mod c, (x,c)=1} e((mx + n x̄)/c).
pub fn kloosterman(m: i64, n: i64, c: u64) -> Result<f64> {
    Ok(KloostermanTable::new(c)?.eval(m, n))
}

/// The Kloosterman sum attached to the cusp 1/u of Γ₀(uv) at modulus u√v·w:
/// e(n ū/v)·S(m v̄, n; uw).
pub fn kloosterman_cusp(m: i64, n: i64, u: u64, v: u64, w: u64) -> Result<Complex64> {
    if u == 0 || v == 0 || w == 0 {
        return Err(invalid!("u, v, w must be positive"));
    }
    if gcd(u, v) != 1 || gcd(w, v) != 1 {
        return Err(Error::NotCoprime(alloc::format!("(u,v)=({u},{v}), (w,v)=({w},{v})")));
    }
    let c = u.checked_mul(w).ok_or_else(|| Error::Overflow(alloc::format!("u·w = {u}·{w}")))?;
    let u_bar = mod_inv(u as i64, v).ok_or_else(|| invalid!("u not invertible mod v"))?;
    let v_bar = mod_inv(v as i64, c).ok_or_else(|| invalid!("v not invertible mod uw"))?;
    let first = (residue(m, c) as u128 * v_bar as u128 % c as u128) as i64;
    let s = kloosterman(first, n, c)?;
    let k = (residue(n, v) as u128 * u_bar as u128 % v as u128) as f64;
    let t = TAU * k / v as f64;
    Ok(Complex64::new(libm::cos(t), libm::sin(t)) * s)
}

/// Largest |S(m,n;c)| / (d(c)(m,n,c)^{1/2}c^{1/2}) over one modulus range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeilReport {
    pub c_max: u64,
    pub checked: u64,
    pub max_ratio: f64,
    pub worst: (i64, i64, u64),
}

pub const WEIL_MAX_MODULUS: u64 = 500;

/// The fixed (m, n) sample grid: both run over 1..=20.
pub fn weil_grid() -> impl Iterator<Item = (i64, i64)> {
    (1..=20).flat_map(|m| (1..=20).map(move |n| (m, n)))
}

/// Checks the Weil bound for every c <= `c_max` on the sample grid. A single
/// violation is an error, because the bound is a theorem.
pub fn weil_certify(c_max: u64) -> Result<WeilReport> {
    if c_max == 0 || c_max > WEIL_MAX_MODULUS {
        return Err(invalid!("c_max must lie in [1, {WEIL_MAX_MODULUS}]"));
    }
    let mut report = WeilReport { c_max, checked: 0, max_ratio: 0.0, worst: (1, 1, 1) };
    for c in 1..=c_max {
        let table = KloostermanTable::new(c)?;
        let dc = divisor_count(c)? as f64;
        for (m, n) in weil_grid() {
            let s = table.eval(m, n);
            let g = gcd(gcd(m as u64, n as u64), c) as f64;
            let bound = dc * libm::sqrt(g * c as f64);
            // slack for the rounding error of the phase sum
            if s.abs() > bound + 1e-9 * c as f64 {
                return Err(Error::Validation(alloc::format!(
                    "Weil bound violated: |S({m},{n};{c})| = {} > {bound}",
                    s.abs()
                )));
            }
            let ratio = s.abs() / bound;
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst = (m, n, c);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Sign of the congruence bm ≡ ±an.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CongruenceSign {
    Plus,
    Minus,
}

impl CongruenceSign {
    pub fn sign(self) -> i64 {
        match self {
            CongruenceSign::Plus => 1,
            CongruenceSign::Minus => -1,
        }
    }
}

/// Smooth window shapes, both supported on [1/2, 3].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Window {
    #[default]
    Bump,
    /// W², a second member of the same smoothness class.
    BumpSquared,
}

impl Window {
    pub fn eval(self, x: f64) -> f64 {
        let w = bump(x);
        match self {
            Window::Bump => w,
            Window::BumpSquared => w * w,
        }
    }
}

/// (a, b, M, N, q) for A_q(a,b,M,N), with window shape and sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionQuery {
    pub a: u64,
    pub b: u64,
    pub m_size: f64,
    pub n_size: f64,
    pub q: u64,
    pub sign: CongruenceSign,
    pub window: Window,
}

impl ConvolutionQuery {
    pub fn new(a: u64, b: u64, m_size: f64, n_size: f64, q: u64, sign: CongruenceSign) -> Result<Self> {
        if a == 0 || b == 0 || q == 0 {
            return Err(invalid!("a, b, q must be positive"));
        }
        if !(m_size >= 1.0 && n_size >= 1.0 && m_size.is_finite() && n_size.is_finite()) {
            return Err(invalid!("M, N must be finite and >= 1"));
        }
        Ok(Self { a, b, m_size, n_size, q, sign, window: Window::Bump })
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    /// m with bm in [M/2, 3M].
    pub fn m_range(&self) -> (u64, u64) {
        support(self.m_size, self.b)
    }

    /// n with an in [N/2, 3N].
    pub fn n_range(&self) -> (u64, u64) {
        support(self.n_size, self.a)
    }

    /// Work estimate: bucketing plus the expected number of congruent pairs.
    pub fn work(&self) -> u64 {
        let count = |(lo, hi): (u64, u64)| (hi + 1).saturating_sub(lo);
        let (m, n) = (count(self.m_range()), count(self.n_range()));
        m + n + m.saturating_mul(n) / self.q
    }

    /// Whether the window supports rule out every off-diagonal solution:
    /// bm + an <= 3(M + N) < q leaves only bm = an.
    pub fn precluded(&self) -> bool {
        3.0 * (self.m_size + self.n_size) < self.q as f64
    }
}

fn support(size: f64, scale: u64) -> (u64, u64) {
    let lo = libm::ceil(0.5 * size / scale as f64).max(1.0) as u64;
    let hi = libm::floor(3.0 * size / scale as f64) as u64;
    (lo, hi)
}

fn check_budget(work: u64) -> Result<()> {
    if work > PAIR_BUDGET {
        return Err(Error::Budget(alloc::format!("about {work} pair operations, budget {PAIR_BUDGET}")));
    }
    Ok(())
}

/// A_q(a,b,M,N) = Σ_{bm ≡ ±an (q), bm ≠ an} λ(m)τ(n)W(bm/M)W(an/N).
pub fn shifted_conv_aq(query: &ConvolutionQuery, f: &EigenformData) -> Result<f64> {
    check_budget(query.work())?;
    let (m_lo, m_hi) = query.m_range();
    let (n_lo, n_hi) = query.n_range();
    if m_lo > m_hi || n_lo > n_hi {
        return Ok(0.0);
    }
    f.require(m_hi)?;
    let tau = SieveCache::new(n_hi as u32 + 1).divisor_count_table();
    let (a, b, q) = (query.a as u128, query.b as u128, query.q as u128);
    // bucket n by an mod q
    let mut buckets: Vec<Vec<(u64, f64)>> = vec![Vec::new(); query.q as usize];
    for n in n_lo..=n_hi {
        let w = f64::from(tau[n as usize]) * query.window.eval((a * n as u128) as f64 / query.n_size);
        if w != 0.0 {
            buckets[(a * n as u128 % q) as usize].push((n, w));
        }
    }
    let mut total = Compensated::default();
    for m in m_lo..=m_hi {
        let bm = b * m as u128;
        let wm = f.lambda(m)? * query.window.eval(bm as f64 / query.m_size);
        if wm == 0.0 {
            continue;
        }
        let r = match query.sign {
            CongruenceSign::Plus => bm % q,
            CongruenceSign::Minus => (q - bm % q) % q,
        };
        for &(n, wn) in &buckets[r as usize] {
            if a * n as u128 != bm {
                total.add(wm * wn);
            }
        }
    }
    Ok(total.value())
}

/// The four-term bound for A_q with M >= N (roles swapped otherwise) and the
/// q^ε factor set to (log q)².
pub fn thm_aq_bound(query: &ConvolutionQuery) -> f64 {
    let (m, n) = if query.m_size >= query.n_size {
        (query.m_size, query.n_size)
    } else {
        (query.n_size, query.m_size)
    };
    let q = query.q as f64;
    let ab = (query.a * query.b) as f64;
    let g = gcd(query.a * query.b, query.q) as f64;
    let eps = log_factor(query.q);
    eps * (m / libm::sqrt(q)
        + libm::pow(g, 0.25) * libm::pow(m, 1.25) * libm::pow(n, 0.25) / (libm::pow(ab, 0.25) * q)
        + libm::pow(m, 0.75) * libm::pow(n, 0.25) / (libm::pow(ab, 0.25) * libm::pow(q, 0.25))
        + libm::pow(g, 0.25) * m * libm::sqrt(n) / (libm::sqrt(ab) * libm::pow(q, 0.75)))
}

/// |A_q| over its bound.
pub fn thm_aq_ratio(query: &ConvolutionQuery, f: &EigenformData) -> Result<f64> {
    Ok(shifted_conv_aq(query, f)?.abs() / thm_aq_bound(query))
}

/// (log q)², standing in for q^ε; at least 1.
pub fn log_factor(q: u64) -> f64 {
    let l = libm::log(q as f64);
    (l * l).max(1.0)
}

/// Which (m, n) enter E_{M,N}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoprimeFilter {
    /// (mn, q) = 1, the sum itself.
    Coprime,
    /// No condition.
    All,
    /// (mn, q) > 1.
    Complement,
}

/// Inputs of E_{M,N}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearQuery {
    pub m_size: f64,
    pub n_size: f64,
    pub a: u64,
    pub b: u64,
    pub q: u64,
    pub sign: CongruenceSign,
}

/// E_{M,N} = (1/φ*(q)) Σ_{d|q} φ(d)μ(q/d)(MN)^{-1/2}
///           Σ_{bm ≡ ±an (d), bm ≠ an, (mn,q)=1} λ(m)τ(n)W(m/M)W(n/N).
pub fn emn_brute(query: &BilinearQuery, f: &EigenformData) -> Result<f64> {
    emn_brute_filtered(query, f, CoprimeFilter::Coprime)
}

pub fn emn_brute_filtered(query: &BilinearQuery, f: &EigenformData, filter: CoprimeFilter) -> Result<f64> {
    let BilinearQuery { m_size, n_size, a, b, q, sign } = *query;
    if a == 0 || b == 0 || !(m_size >= 1.0 && n_size >= 1.0) {
        return Err(invalid!("need a, b >= 1 and M, N >= 1"));
    }
    let phi = phi_star(q)?;
    if phi == 0 {
        return Err(Error::Inadmissible(q));
    }
    let (m_lo, m_hi) = support(m_size, 1);
    let (n_lo, n_hi) = support(n_size, 1);
    let coeffs: Vec<(u64, f64)> = divisors(q)?
        .into_iter()
        .map(|d| Ok((d, euler_phi(d)? as f64 * f64::from(moebius(q / d)?))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&(_, c)| c != 0.0)
        .collect();
    let (mc, nc) = (m_hi + 1 - m_lo, n_hi + 1 - n_lo);
    let work: u64 = coeffs.iter().map(|&(d, _)| mc + nc + mc.saturating_mul(nc) / d).sum();
    check_budget(work)?;
    f.require(m_hi)?;
    let tau = SieveCache::new(n_hi as u32 + 1).divisor_count_table();
    let keep = |x: u64| {
        let unit = gcd(x, q) == 1;
        match filter {
            CoprimeFilter::Coprime => unit,
            CoprimeFilter::All => true,
            CoprimeFilter::Complement => !unit,
        }
    };
    let ms: Vec<(u64, f64)> = (m_lo..=m_hi)
        .map(|m| Ok((m, f.lambda(m)? * bump(m as f64 / m_size))))
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<(u64, f64)> = (n_lo..=n_hi)
        .map(|n| (n, f64::from(tau[n as usize]) * bump(n as f64 / n_size)))
        .collect();
    let (a, b) = (a as u128, b as u128);
    let mut total = Compensated::default();
    for &(d, c) in &coeffs {
        let dd = d as u128;
        let mut buckets: Vec<Vec<(u64, f64)>> = vec![Vec::new(); d as usize];
        for &(n, w) in &ns {
            if w != 0.0 {
                buckets[(a * n as u128 % dd) as usize].push((n, w));
            }
        }
        let mut inner = Compensated::default();
        for &(m, wm) in &ms {
            if wm == 0.0 {
                continue;
            }
            let bm = b * m as u128;
            let r = match sign {
                CongruenceSign::Plus => bm % dd,
                CongruenceSign::Minus => (dd - bm % dd) % dd,
            };
            for &(n, wn) in &buckets[r as usize] {
                if a * n as u128 != bm && keep(m * n % q) {
                    inner.add(wm * wn);
                }
            }
        }
        total.add(c * inner.value());
    }
    Ok(total.value() / (phi as f64 * libm::sqrt(m_size * n_size)))
}

/// The two trivial bounds for E_{M,N}, with q^ε set to (log q)²:
/// (q^{-1}(MN)^{1/2} + (M/N)^{1/2}) and M^θ(q^{-1}(MN)^{1/2} + (N/M)^{1/2}).
pub fn trivial_bounds(m_size: f64, n_size: f64, q: u64, theta: f64) -> (f64, f64) {
    let eps = log_factor(q);
    let diag = libm::sqrt(m_size * n_size) / q as f64;
    let a = eps * (diag + libm::sqrt(m_size / n_size));
    let b = eps * libm::pow(m_size, theta) * (diag + libm::sqrt(n_size / m_size));
    (a, b)
}

/// Σ_{a<=A} |α_a| |Σ_{b<=B, (b,q)=1} β_b e(c a b̄/q)| with A = len(α), B = len(β),
/// and its ratio to |α|₂|β|_∞A^{1/2}B(log q)²(A^{-1/2}B^{-1/4}q^{1/4} + A^{-1/2} + q^{-1/2} + B^{-1/2}).
pub fn bilinear_incomplete(alpha: &[Complex64], beta: &[Complex64], c: i64, q: u64) -> Result<(f64, f64)> {
    if q == 0 || alpha.is_empty() || beta.is_empty() {
        return Err(invalid!("need q >= 1 and nonempty coefficient lists"));
    }
    if alpha.len() > 10_000 || beta.len() > 10_000 {
        return Err(invalid!("A and B are limited to 10^4"));
    }
    if gcd(residue(c, q), q) != 1 && q != 1 {
        return Err(Error::NotCoprime(alloc::format!("(c,q)=({c},{q})")));
    }
    let cr = residue(c, q) as u128;
    let inverses: Vec<Option<u64>> = (1..=beta.len() as u64).map(|b| mod_inv(b as i64, q)).collect();
    let phase = |k: u128| {
        let t = TAU * (k % q as u128) as f64 / q as f64;
        Complex64::new(libm::cos(t), libm::sin(t))
    };
    let mut value = 0.0;
    for (i, &al) in alpha.iter().enumerate() {
        let ca = cr * (i as u128 + 1) % q as u128;
        let mut inner = Complex64::new(0.0, 0.0);
        for (bb, inv) in beta.iter().zip(&inverses) {
            if let Some(inv) = inv {
                inner += bb * phase(ca * *inv as u128);
            }
        }
        value += al.norm() * inner.norm();
    }
    let (big_a, big_b, qf) = (alpha.len() as f64, beta.len() as f64, q as f64);
    let alpha2 = libm::sqrt(alpha.iter().map(|x| x.norm_sqr()).sum::<f64>());
    let beta_inf = beta.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let bound = alpha2
        * beta_inf
        * libm::sqrt(big_a)
        * big_b
        * log_factor(q)
        * (libm::pow(qf, 0.25) / (libm::sqrt(big_a) * libm::pow(big_b, 0.25))
            + 1.0 / libm::sqrt(big_a)
            + 1.0 / libm::sqrt(qf)
            + 1.0 / libm::sqrt(big_b));
    let ratio = if bound > 0.0 { value / bound } else { 0.0 };
    Ok((value, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    // e(k/c) evaluated directly, independent of the phase table
    fn direct_kloosterman(m: i64, n: i64, c: u64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for x in 0..c as i64 {
            if let Some(xi) = mod_inv(x, c) {
                let t = TAU * (m * x + n * xi as i64) as f64 / c as f64;
                s += Complex64::new(t.cos(), t.sin());
            }
        }
        s
    }

    #[test]
    fn small_values() {
        assert_eq!(kloosterman(5, 7, 1).unwrap(), 1.0);
        assert!((kloosterman(1, 1, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((kloosterman(1, 1, 3).unwrap() + 1.0).abs() < 1e-15);
        // S(0,0;c) = φ(c), S(1,0;c) = μ(c)
        for c in [7u64, 12, 30, 49] {
            assert!((kloosterman(0, 0, c).unwrap() - euler_phi(c).unwrap() as f64).abs() < 1e-12);
            assert!((kloosterman(1, 0, c).unwrap() - f64::from(moebius(c).unwrap())).abs() < 1e-12);
        }
        assert!(kloosterman(1, 1, 0).is_err());
    }

    #[test]
    fn real_symmetric_and_matches_direct_sum() {
        for c in [1u64, 2, 9, 35, 64, 101, 210] {
            let t = KloostermanTable::new(c).unwrap();
            for (m, n) in [(1i64, 1i64), (2, 5), (-3, 7), (12, 18), (0, 4)] {
                let s = t.eval_complex(m, n);
                assert!(s.im.abs() <= 1e-9 * c as f64);
                assert_eq!(t.eval(m, n), t.eval(n, m));
                assert!((s - direct_kloosterman(m, n, c)).norm() <= 1e-15 * c as f64 * 10.0);
            }
        }
    }

    #[test]
    fn large_modulus_stays_real() {
        let c = 100_003;
        let s = KloostermanTable::new(c).unwrap().eval_complex(3, 11);
        assert!(s.im.abs() <= 1e-9 * c as f64);
        assert!(s.re.abs() <= 2.0 * (c as f64).sqrt());
    }

    #[test]
    fn twisted_multiplicativity() {
        for (c1, c2) in [(3u64, 4u64), (5, 7), (8, 9), (11, 25), (16, 45)] {
            let i1 = mod_inv(c1 as i64, c2).unwrap() as i64;
            let i2 = mod_inv(c2 as i64, c1).unwrap() as i64;
            for (m, n) in [(1i64, 1i64), (2, 3), (5, 10), (7, 0)] {
                let whole = direct_kloosterman(m, n, c1 * c2);
                let split = direct_kloosterman(m * i2 * i2, n, c1) * direct_kloosterman(m * i1 * i1, n, c2);
                assert!((whole - split).norm() < 1e-9, "c1={c1} c2={c2} m={m} n={n}");
            }
        }
    }

    #[test]
    fn weil_bound_small_range() {
        let r = weil_certify(100).unwrap();
        assert!(r.max_ratio <= 1.0);
        assert_eq!(r.checked, 100 * 400);
        for p in [101u64, 211, 499] {
            assert!(kloosterman(1, 1, p).unwrap().abs() <= 2.0 * (p as f64).sqrt());
        }
        for p in [7u64, 11, 13, 19] {
            assert!(kloosterman(1, 1, p * p).unwrap().abs() <= 2.0 * p as f64 + 1e-9);
        }
        assert!(weil_certify(501).is_err());
    }

    #[test]
    fn cusp_sum_reductions() {
        for (m, n, u, w) in [(1i64, 1i64, 3u64, 5u64), (2, 7, 4, 9), (5, -3, 1, 12)] {
            let c = kloosterman_cusp(m, n, u, 1, w).unwrap();
            assert!((c - direct_kloosterman(m, n, u * w)).norm() < 1e-9);
        }
        // u = w = 1: a single phase times S(·,·;1) = 1
        let c = kloosterman_cusp(4, 3, 1, 7, 1).unwrap();
        let t = TAU * 3.0 / 7.0;
        assert!((c - Complex64::new(t.cos(), t.sin())).norm() < 1e-12);
        for u in 1..=20u64 {
            for v in 1..=20u64 {
                for w in [1u64, 2, 7, 15] {
                    if gcd(u, v) != 1 || gcd(w, v) != 1 {
                        assert!(kloosterman_cusp(1, 1, u, v, w).is_err());
                        continue;
                    }
                    let c = kloosterman_cusp(3, 5, u, v, w).unwrap();
                    let vb = mod_inv(v as i64, u * w).unwrap() as i64;
                    assert!((c.norm() - direct_kloosterman(3 * vb, 5, u * w).norm()).abs() < 1e-9);
                }
            }
        }
    }

    fn delta() -> EigenformData {
        EigenformData::delta(20_000).unwrap()
    }

    #[test]
    fn aq_vanishes_when_precluded() {
        let f = delta();
        for sign in [CongruenceSign::Plus, CongruenceSign::Minus] {
            let q = ConvolutionQuery::new(2, 3, 20.0, 15.0, 107, sign).unwrap();
            assert!(q.precluded());
            assert_eq!(shifted_conv_aq(&q, &f).unwrap(), 0.0);
            assert_eq!(thm_aq_ratio(&q, &f).unwrap(), 0.0);
        }
    }

    // both sums with explicit loops over every pair
    fn aq_pairs(q: &ConvolutionQuery, f: &EigenformData) -> f64 {
        let mut s = 0.0;
        for m in 1..=(3.0 * q.m_size) as u64 {
            for n in 1..=(3.0 * q.n_size) as u64 {
                let (bm, an) = ((q.b * m) as i64, (q.a * n) as i64);
                if bm == an || (bm - q.sign.sign() * an).rem_euclid(q.q as i64) != 0 {
                    continue;
                }
                s += f.lambda(m).unwrap()
                    * divisor_count(n).unwrap() as f64
                    * q.window.eval(bm as f64 / q.m_size)
                    * q.window.eval(an as f64 / q.n_size);
            }
        }
        s
    }

    #[test]
    fn aq_matches_pair_enumeration() {
        let f = delta();
        for (a, b, m, n, q) in [(1u64, 1u64, 200.0, 150.0, 1u64), (1, 1, 400.0, 300.0, 37), (2, 3, 500.0, 200.0, 29), (3, 1, 300.0, 600.0, 60)] {
            for sign in [CongruenceSign::Plus, CongruenceSign::Minus] {
                for window in [Window::Bump, Window::BumpSquared] {
                    let query = ConvolutionQuery::new(a, b, m, n, q, sign).unwrap().with_window(window);
                    let got = shifted_conv_aq(&query, &f).unwrap();
                    let want = aq_pairs(&query, &f);
                    assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} {want}");
                }
            }
        }
    }

    #[test]
    fn aq_q_one_is_full_sum_minus_diagonal() {
        let f = delta();
        let query = ConvolutionQuery::new(1, 1, 100.0, 80.0, 1, CongruenceSign::Plus).unwrap();
        let full: f64 = (1..=300u64)
            .map(|m| f.lambda(m).unwrap() * bump(m as f64 / 100.0))
            .sum::<f64>()
            * (1..=240u64).map(|n| divisor_count(n).unwrap() as f64 * bump(n as f64 / 80.0)).sum::<f64>();
        let diagonal: f64 = (1..=240u64)
            .map(|t| f.lambda(t).unwrap() * divisor_count(t).unwrap() as f64 * bump(t as f64 / 100.0) * bump(t as f64 / 80.0))
            .sum();
        let got = shifted_conv_aq(&query, &f).unwrap();
        assert!((got - (full - diagonal)).abs() < 1e-9 * full.abs().max(1.0));
    }

    #[test]
    fn aq_budget_is_enforced() {
        let f = delta();
        let query = ConvolutionQuery::new(1, 1, 1e6, 1e6, 2, CongruenceSign::Plus).unwrap();
        assert!(matches!(shifted_conv_aq(&query, &f), Err(Error::Budget(_))));
    }

    #[test]
    fn aq_bound_is_symmetric_in_m_n() {
        let q = ConvolutionQuery::new(2, 3, 400.0, 100.0, 101, CongruenceSign::Plus).unwrap();
        let mut s = q;
        core::mem::swap(&mut s.m_size, &mut s.n_size);
        assert_eq!(thm_aq_bound(&q), thm_aq_bound(&s));
    }

    #[test]
    fn emn_filter_is_a_partition() {
        let f = delta();
        for (q, a, b) in [(15u64, 1u64, 2u64), (36, 5, 1), (49, 1, 1)] {
            for sign in [CongruenceSign::Plus, CongruenceSign::Minus] {
                let query = BilinearQuery { m_size: 60.0, n_size: 40.0, a, b, q, sign };
                let coprime = emn_brute_filtered(&query, &f, CoprimeFilter::Coprime).unwrap();
                let all = emn_brute_filtered(&query, &f, CoprimeFilter::All).unwrap();
                let rest = emn_brute_filtered(&query, &f, CoprimeFilter::Complement).unwrap();
                assert!((all - rest - coprime).abs() < 1e-9 * (1.0 + all.abs()));
                assert_eq!(coprime, emn_brute(&query, &f).unwrap());
            }
        }
    }

    #[test]
    fn emn_prime_modulus_by_pairs() {
        // for prime q the divisor sum is (q-1)[d = q] - [d = 1]
        let f = delta();
        let (q, m_size, n_size) = (13u64, 50.0, 30.0);
        let query = BilinearQuery { m_size, n_size, a: 2, b: 1, q, sign: CongruenceSign::Plus };
        let mut s = 0.0;
        for m in 1..=150u64 {
            for n in 1..=90u64 {
                if m == 2 * n || (m * n) % q == 0 {
                    continue;
                }
                let w = f.lambda(m).unwrap() * divisor_count(n).unwrap() as f64 * bump(m as f64 / m_size) * bump(n as f64 / n_size);
                let hit = if (m as i64 - 2 * n as i64).rem_euclid(q as i64) == 0 { (q - 1) as f64 } else { 0.0 };
                s += w * (hit - 1.0);
            }
        }
        let want = s / ((q - 2) as f64 * (m_size * n_size).sqrt());
        assert!((emn_brute(&query, &f).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn trivial_bounds_swap() {
        let (a, b) = trivial_bounds(101.0, 101.0, 101, 7.0 / 64.0);
        assert!((b - a * 101f64.powf(7.0 / 64.0)).abs() < 1e-9 * b);
        let (a, b) = trivial_bounds(50.0, 200.0, 97, 0.0);
        let (a2, b2) = trivial_bounds(200.0, 50.0, 97, 0.0);
        assert!((a - b2).abs() < 1e-12 && (b - a2).abs() < 1e-12);
    }

    #[test]
    fn bilinear_single_b() {
        let alpha: Vec<Complex64> = (1..=30).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let mut beta = vec![Complex64::new(0.0, 0.0); 20];
        beta[6] = Complex64::new(0.0, 2.5);
        let (v, _) = bilinear_incomplete(&alpha, &beta, 3, 101).unwrap();
        let want: f64 = alpha.iter().map(|a| a.norm() * 2.5).sum();
        assert!((v - want).abs() < 1e-9);
        assert!(bilinear_incomplete(&alpha, &beta, 101, 101).is_err());
    }

    #[test]
    fn bilinear_bound_is_uniform_in_c() {
        // deterministic ±1 coefficients
        let sign = |k: u64| if (k * 2_654_435_761) % 7 < 3 { -1.0 } else { 1.0 };
        // A = 30: with A = 50 the classes ±ca would cover every unit mod 101 for any c
        let alpha: Vec<Complex64> = (0..30).map(|i| Complex64::new(sign(i), 0.0)).collect();
        let beta: Vec<Complex64> = (50..100).map(|i| Complex64::new(sign(i), 0.0)).collect();
        let (v1, r1) = bilinear_incomplete(&alpha, &beta, 1, 101).unwrap();
        let (v2, r2) = bilinear_incomplete(&alpha, &beta, 7, 101).unwrap();
        assert!(r1 <= 10.0 && r2 <= 10.0);
        assert!((v1 - v2).abs() > 1e-6);
        assert!((v1 / r1 - v2 / r2).abs() < 1e-9 * v1 / r1);
    }
}
