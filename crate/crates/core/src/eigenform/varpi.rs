//! Coprime-removal coefficients ϖ_λ(δ,q), ϖ_τ(δ,q) and the identity
//! Σ_{(n,q)=1} λ(n)F(n) = Σ_δ ϖ_λ(δ,q) Σ_n λ(n)F(δn).

use alloc::vec::Vec;

use super::EigenformData;
use crate::arith::{divisor_count, factorize, gcd};
use crate::error::invalid;
use crate::{Error, Result};

/// One term δ = k·l² with `kl | q` squarefree; other pairs carry μ(kl) = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarpiEntry {
    pub delta: u64,
    pub k: u64,
    pub l: u64,
    /// μ(l)μ(kl).
    pub sign: i8,
    /// ϖ_λ(δ,q) = μ(l)μ(kl)λ(k).
    pub lambda: f64,
    /// ϖ_τ(δ,q) = μ(l)μ(kl)d(k), an integer.
    pub tau: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarpiTable {
    pub q: u64,
    /// Sorted by δ.
    pub entries: Vec<VarpiEntry>,
}

/// Pairs `(k, l, μ(l)μ(kl))` with `kl | q` squarefree.
fn pairs(q: u64) -> Result<Vec<(u64, u64, i8)>> {
    let primes: Vec<u64> = factorize(q)?.primes().collect();
    let r = primes.len();
    let mut out = Vec::new();
    // each prime of q goes to k, to l, or to neither
    let mut code = 0usize;
    let total = 3usize.pow(r as u32);
    while code < total {
        let (mut k, mut l, mut c) = (1u64, 1u64, code);
        let mut nk = 0u32;
        for &p in &primes {
            match c % 3 {
                1 => {
                    k *= p;
                    nk += 1;
                }
                2 => l *= p,
                _ => {}
            }
            c /= 3;
        }
        // μ(l)μ(kl) = μ(k) on squarefree kl
        let sign = if nk % 2 == 0 { 1 } else { -1 };
        out.push((k, l, sign));
        code += 1;
    }
    Ok(out)
}

impl VarpiTable {
    pub fn new(f: &EigenformData, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(invalid!("q must be positive"));
        }
        let mut entries = Vec::new();
        for (k, l, sign) in pairs(q)? {
            let lk = f.lambda(k)?;
            entries.push(VarpiEntry {
                delta: k * l * l,
                k,
                l,
                sign,
                lambda: f64::from(sign) * lk,
                tau: i64::from(sign) * divisor_count(k)? as i64,
            });
        }
        entries.sort_by_key(|e| e.delta);
        Ok(Self { q, entries })
    }

    pub fn get(&self, delta: u64) -> Option<&VarpiEntry> {
        self.entries
            .binary_search_by_key(&delta, |e| e.delta)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_support(support: u64) -> Result<()> {
    if support > 10_000 {
        return Err(Error::Budget(alloc::format!(
            "test function support {support} exceeds 10^4"
        )));
    }
    Ok(())
}

/// |Σ_{(n,q)=1} λ(n)F(n) - Σ_δ ϖ_λ(δ,q) Σ_n λ(n)F(δn)| for `F` supported
/// on `1..=support`.
pub fn coprime_removal_check(
    f: &EigenformData,
    q: u64,
    support: u64,
    test_fn: impl Fn(u64) -> f64,
) -> Result<f64> {
    check_support(support)?;
    f.require(support)?;
    let table = VarpiTable::new(f, q)?;
    let lhs: f64 = (1..=support)
        .filter(|&n| gcd(n, q) == 1)
        .map(|n| f.lambda_table()[n as usize] * test_fn(n))
        .sum();
    let mut rhs = 0.0;
    for e in &table.entries {
        for n in 1..=support / e.delta {
            rhs += e.lambda * f.lambda_table()[n as usize] * test_fn(e.delta * n);
        }
    }
    Ok((lhs - rhs).abs())
}

/// The same identity with the divisor function in place of λ.
pub fn coprime_removal_check_divisor(
    q: u64,
    support: u64,
    test_fn: impl Fn(u64) -> f64,
) -> Result<f64> {
    check_support(support)?;
    let pairs = pairs(q)?;
    let lhs: f64 = (1..=support)
        .filter(|&n| gcd(n, q) == 1)
        .map(|n| divisor_count(n).map(|d| d as f64 * test_fn(n)))
        .sum::<Result<f64>>()?;
    let mut rhs = 0.0;
    for (k, l, sign) in pairs {
        let delta = k * l * l;
        let w = f64::from(sign) * divisor_count(k)? as f64;
        for n in 1..=support / delta {
            rhs += w * divisor_count(n)? as f64 * test_fn(delta * n);
        }
    }
    Ok((lhs - rhs).abs())
}

/// Exact form of the identity for Δ, one integer per `N` in `lo..=hi`:
/// R_N = [(N,q)=1]τ(N) - Σ_{kl²n=N} μ(l)μ(kl)τ(k)τ(n)l^11, which is the
/// coefficient of F(N) after clearing the factor N^{-11/2}. Returns the
/// `(N, R_N)` with `R_N != 0`; an empty list means the residual is exactly
/// zero for every `F` supported in `[lo, hi]`.
pub fn coprime_removal_exact(
    f: &EigenformData,
    q: u64,
    lo: u64,
    hi: u64,
) -> Result<Vec<(u64, i128)>> {
    check_support(hi)?;
    let tau = f
        .exact_tau()
        .ok_or_else(|| invalid!("exact coprime removal needs the built-in Δ"))?;
    f.require(hi)?;
    let pairs = pairs(q)?;
    let overflow = || Error::Overflow(alloc::string::String::from("coprime removal residual"));
    let mut out = Vec::new();
    for big_n in lo.max(1)..=hi {
        let mut r: i128 = if gcd(big_n, q) == 1 {
            tau[big_n as usize]
        } else {
            0
        };
        for &(k, l, sign) in &pairs {
            let delta = k * l * l;
            if big_n % delta != 0 {
                continue;
            }
            let n = big_n / delta;
            let term = tau[k as usize]
                .checked_mul(tau[n as usize])
                .and_then(|t| t.checked_mul(i128::from(l).pow(11)))
                .ok_or_else(overflow)?;
            r -= i128::from(sign) * term;
        }
        if r != 0 {
            out.push((big_n, r));
        }
    }
    Ok(out)
}

/// Divisor-function analogue of [`coprime_removal_exact`].
pub fn coprime_removal_exact_divisor(q: u64, lo: u64, hi: u64) -> Result<Vec<(u64, i64)>> {
    check_support(hi)?;
    let pairs = pairs(q)?;
    let mut out = Vec::new();
    for big_n in lo.max(1)..=hi {
        let mut r: i64 = if gcd(big_n, q) == 1 {
            divisor_count(big_n)? as i64
        } else {
            0
        };
        for &(k, l, sign) in &pairs {
            let delta = k * l * l;
            if big_n % delta == 0 {
                r -= i64::from(sign) * (divisor_count(k)? * divisor_count(big_n / delta)?) as i64;
            }
        }
        if r != 0 {
            out.push((big_n, r));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_modulus_entries() {
        let f = EigenformData::delta(100).unwrap();
        let t = VarpiTable::new(&f, 7).unwrap();
        let deltas: Vec<u64> = t.entries.iter().map(|e| e.delta).collect();
        assert_eq!(deltas, [1, 7, 49]);
        assert_eq!(t.get(1).unwrap().lambda, 1.0);
        assert_eq!(t.get(1).unwrap().tau, 1);
        assert_eq!(t.get(7).unwrap().lambda, -f.lambda(7).unwrap());
        assert!(t.get(343).is_none());
    }

    #[test]
    fn table_size_bound() {
        let f = EigenformData::delta(1000).unwrap();
        for q in 1..=200u64 {
            let t = VarpiTable::new(&f, q).unwrap();
            let d = divisor_count(q).unwrap() as usize;
            assert!(t.len() <= d * d);
            for e in &t.entries {
                assert!(e.tau.unsigned_abs() <= (d * d) as u64);
            }
        }
    }

    #[test]
    fn removal_examples() {
        let f = EigenformData::delta(1000).unwrap();
        let ind = |n: u64| if n <= 100 { 1.0 } else { 0.0 };
        assert!(coprime_removal_check(&f, 6, 100, ind).unwrap() < 1e-12);
        assert_eq!(coprime_removal_check(&f, 6, 100, |_| 0.0).unwrap(), 0.0);
        assert!(coprime_removal_check_divisor(6, 100, ind).unwrap() < 1e-9);
        assert!(coprime_removal_exact(&f, 6, 1, 100).unwrap().is_empty());
        assert!(coprime_removal_exact_divisor(6, 1, 100).unwrap().is_empty());
    }
}
