//! Exact integer arithmetic: factorization and the multiplicative functions
//! built on it.
//!
//! Every multiplicative function goes through [`Factorization`]. The optional
//! [`SieveCache`] only speeds up obtaining factorizations; the values it
//! produces come from the same code path.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::Result;

/// Largest input accepted by [`factorize`].
pub const FACTORIZE_LIMIT: u64 = 1 << 63;

const TRIAL_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Builds a factorization from prime/exponent pairs, checking the invariants.
    pub fn from_factors(mut factors: Vec<(u64, u32)>) -> Result<Self> {
        factors.sort_unstable();
        let mut value: u64 = 1;
        for (i, &(p, e)) in factors.iter().enumerate() {
            if e == 0 || !is_prime(p) {
                return Err(invalid!("bad factor {p}^{e}"));
            }
            if i > 0 && factors[i - 1].0 == p {
                return Err(invalid!("repeated prime {p}"));
            }
            for _ in 0..e {
                value = value
                    .checked_mul(p)
                    .ok_or_else(|| invalid!("factorization value overflows u64"))?;
            }
        }
        Ok(Self { value, factors })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn moebius(&self) -> i8 {
        if !self.is_squarefree() {
            return 0;
        }
        if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn euler_phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    /// The divisor function, written τ(n) in the moment formulas.
    pub fn divisor_count(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(_, e)| u64::from(e) + 1)
            .product()
    }

    /// Number of primitive characters modulo `value`.
    pub fn phi_star(&self) -> u64 {
        // multiplicative with φ*(p) = p-2, φ*(p^e) = p^{e-2}(p-1)^2 for e >= 2
        self.factors
            .iter()
            .map(|&(p, e)| match e {
                1 => p - 2,
                _ => p.pow(e - 2) * (p - 1) * (p - 1),
            })
            .product()
    }

    /// All positive divisors in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for &(p, e) in &self.factors {
            let len = out.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    out.push(out[i] * pk);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Exponent of `p` in the factorization.
    pub fn valuation(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }
}

/// Factors `n` exactly: trial division to 10^6, then Miller–Rabin and
/// Pollard rho on whatever cofactor remains.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(invalid!("cannot factor 0"));
    }
    if n > FACTORIZE_LIMIT {
        return Err(invalid!("{n} exceeds the factorization limit 2^63"));
    }
    let mut factors = Vec::new();
    let mut m = n;
    for p in [2u64, 3, 5] {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if e > 0 {
            factors.push((p, e));
        }
    }
    // wheel mod 30
    const STEPS: [u64; 8] = [4, 2, 4, 2, 4, 6, 2, 6];
    let mut p = 7u64;
    let mut i = 0;
    while p <= TRIAL_LIMIT && p * p <= m {
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p, e));
        }
        p += STEPS[i];
        i = (i + 1) % 8;
    }
    if m > 1 {
        let mut large = Vec::new();
        split_large(m, &mut large);
        large.sort_unstable();
        for q in large {
            match factors.last_mut() {
                Some((p, e)) if *p == q => *e += 1,
                _ => factors.push((q, 1)),
            }
        }
    }
    factors.sort_unstable();
    Ok(Factorization { value: n, factors })
}

fn split_large(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_large(d, out);
    split_large(n / d, out);
}

fn pollard_brent(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut y, mut r, mut q, mut g) = (2u64, 1u64, 1u64, 1u64);
        let mut x = y;
        let mut ys = y;
        const BLOCK: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BLOCK.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += BLOCK;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

/// Deterministic Miller–Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(m)) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm.
/// Returns `None` when `gcd(a, m) != 1`. For `m == 1` the inverse is 0.
pub fn mod_inv(a: i64, m: u64) -> Option<u64> {
    if m == 0 {
        return None;
    }
    if m == 1 {
        return Some(0);
    }
    let m_i = i128::from(m);
    let (mut old_r, mut r) = (i128::from(a).rem_euclid(m_i), m_i);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m_i) as u64)
}

pub fn moebius(n: u64) -> Result<i8> {
    Ok(factorize(n)?.moebius())
}

pub fn euler_phi(n: u64) -> Result<u64> {
    Ok(factorize(n)?.euler_phi())
}

pub fn divisor_count(n: u64) -> Result<u64> {
    Ok(factorize(n)?.divisor_count())
}

/// φ*(q) = Σ_{d|q} μ(q/d) φ(d), the number of primitive characters mod q.
pub fn phi_star(q: u64) -> Result<u64> {
    let fq = factorize(q)?;
    let mut total: i64 = 0;
    for d in fq.divisors() {
        let mu = factorize(q / d)?.moebius();
        total += i64::from(mu) * factorize(d)?.euler_phi() as i64;
    }
    Ok(total as u64)
}

/// `q` is admissible when `q mod 4 != 2`.
pub fn is_admissible(q: u64) -> bool {
    q % 4 != 2
}

pub fn divisors(n: u64) -> Result<Vec<u64>> {
    Ok(factorize(n)?.divisors())
}

/// Smallest-prime-factor table for fast factorization of small integers.
///
/// Multiplicative functions obtained through the cache are evaluated by the
/// same [`Factorization`] methods as the uncached path.
#[derive(Debug, Clone)]
pub struct SieveCache {
    spf: Vec<u32>,
}

impl SieveCache {
    pub fn new(limit: u32) -> Self {
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                let mut j = i;
                while j <= n {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        Self { spf }
    }

    pub fn limit(&self) -> u64 {
        (self.spf.len() - 1) as u64
    }

    pub fn factorize(&self, n: u64) -> Result<Factorization> {
        if n == 0 {
            return Err(invalid!("cannot factor 0"));
        }
        if n > self.limit() {
            return factorize(n);
        }
        let mut m = n as usize;
        let mut factors: Vec<(u64, u32)> = Vec::new();
        while m > 1 {
            let p = self.spf[m] as usize;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            factors.push((p as u64, e));
        }
        Ok(Factorization { value: n, factors })
    }

    pub fn is_prime(&self, n: u64) -> bool {
        if n <= self.limit() {
            n >= 2 && u64::from(self.spf[n as usize]) == n
        } else {
            is_prime(n)
        }
    }

    /// τ(n) for 0 <= n <= limit (index 0 holds 0).
    pub fn divisor_count_table(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.spf.len()];
        for (n, slot) in out.iter_mut().enumerate().skip(1) {
            *slot = self
                .factorize(n as u64)
                .map(|f| f.divisor_count() as u32)
                .unwrap_or(0);
        }
        out
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.spf
            .iter()
            .enumerate()
            .filter(|&(i, &p)| i >= 2 && p as usize == i)
            .map(|(i, _)| i as u64)
    }
}
