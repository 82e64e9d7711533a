//! Normalized Hecke eigenvalues of level-one eigenforms.
//!
//! The discriminant form Δ is built in from exact Ramanujan τ values; other
//! forms enter as coefficient records and are validated on construction.

mod tau;
mod varpi;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;

use crate::arith::{divisors, gcd, SieveCache};
use crate::error::invalid;
use crate::{Error, Result};

pub use tau::{tau_sparse, tau_table, TAU_LIMIT};
pub use varpi::{
    coprime_removal_check, coprime_removal_check_divisor, coprime_removal_exact,
    coprime_removal_exact_divisor, VarpiEntry, VarpiTable,
};

/// Tolerance for the Hecke relations on ingested floating-point data.
pub const HECKE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormKind {
    Holomorphic {
        weight: u32,
    },
    /// Spectral parameter κ; the Laplace eigenvalue is 1/4 + κ².
    Maass {
        kappa: f64,
    },
}

#[derive(Debug, Clone)]
pub struct EigenformData {
    label: String,
    kind: FormKind,
    theta: f64,
    epsilon: i8,
    /// λ(n) for `0 <= n <= n_max`, with λ(0) = 0.
    lambda: Vec<f64>,
    /// Exact Ramanujan τ(n) when the form is Δ.
    tau: Option<Vec<i128>>,
}

fn check_root_number(kind: FormKind, epsilon: i8) -> Result<()> {
    if epsilon != 1 && epsilon != -1 {
        return Err(Error::RootNumber(format!("ε(f) must be ±1, got {epsilon}")));
    }
    if matches!(kind, FormKind::Maass { .. }) && epsilon == -1 {
        return Err(Error::RootNumber(String::from(
            "Maass form with ε(f) = -1: every twisted term cancels against its \
             conjugate, so M_{f,E}(q;a,b) vanishes by symmetry",
        )));
    }
    Ok(())
}

impl EigenformData {
    /// The weight-12 discriminant form with λ(n) = τ(n)/n^{11/2} for
    /// `n <= n_max`.
    pub fn delta(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(invalid!("n_max must be at least 1"));
        }
        let tau = tau_table(n_max)?;
        let lambda = tau
            .iter()
            .enumerate()
            .map(|(n, &t)| {
                if n == 0 {
                    0.0
                } else {
                    let x = n as f64;
                    t as f64 / libm::pow(x, 5.5)
                }
            })
            .collect();
        Ok(Self {
            label: String::from("delta"),
            kind: FormKind::Holomorphic { weight: 12 },
            theta: 0.0,
            epsilon: 1,
            lambda,
            tau: Some(tau),
        })
    }

    /// Builds a form from a complete table `λ(0..=n_max)` (λ(0) ignored)
    /// and validates it.
    pub fn from_table(
        label: &str,
        kind: FormKind,
        epsilon: i8,
        theta: f64,
        mut lambda: Vec<f64>,
    ) -> Result<Self> {
        check_root_number(kind, epsilon)?;
        if !(0.0..0.5).contains(&theta) {
            return Err(invalid!("θ_f = {theta} outside [0, 1/2)"));
        }
        if let FormKind::Holomorphic { weight } = kind {
            if weight < 2 || weight % 2 != 0 {
                return Err(invalid!("weight {weight} is not a positive even integer"));
            }
        }
        if lambda.len() < 2 {
            return Err(invalid!("empty eigenvalue table"));
        }
        lambda[0] = 0.0;
        let data = Self {
            label: String::from(label),
            kind,
            theta,
            epsilon,
            lambda,
            tau: None,
        };
        data.validate()?;
        Ok(data)
    }

    /// Builds a form from `(n, λ(n))` records. With `extend` set, λ is
    /// filled up to the largest record by Hecke multiplicativity from the
    /// prime values, which must then all be present; otherwise the records
    /// must cover `1..=n_max` without gaps.
    pub fn from_records(
        label: &str,
        kind: FormKind,
        epsilon: i8,
        theta: f64,
        records: &[(u64, f64)],
        extend: bool,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(n, v) in records {
            if n == 0 {
                return Err(invalid!("coefficient index 0"));
            }
            if !v.is_finite() {
                return Err(invalid!("non-finite λ({n})"));
            }
            if map.insert(n, v).is_some() {
                return Err(invalid!("duplicate record for n = {n}"));
            }
        }
        let Some((&top, _)) = map.iter().next_back() else {
            return Err(invalid!("no coefficient records"));
        };
        let lambda = if extend {
            extend_by_hecke(&map, top)?
        } else {
            let mut out = vec![0.0; top as usize + 1];
            for n in 1..=top {
                out[n as usize] = *map
                    .get(&n)
                    .ok_or_else(|| invalid!("missing λ({n}); records must be contiguous"))?;
            }
            out
        };
        Self::from_table(label, kind, epsilon, theta, lambda)
    }

    /// Hecke relations λ(m)λ(n) = Σ_{d|(m,n)} λ(mn/d²), λ(1) = 1, and the
    /// bound |λ(n)| <= d(n) n^θ.
    fn validate(&self) -> Result<()> {
        let n_max = self.n_max();
        if (self.lambda[1] - 1.0).abs() > HECKE_TOLERANCE {
            return Err(Error::Validation(format!("λ(1) = {} != 1", self.lambda[1])));
        }
        let sieve = SieveCache::new(n_max as u32);
        let dcount = sieve.divisor_count_table();
        for n in 1..=n_max {
            let bound = f64::from(dcount[n as usize]) * libm::pow(n as f64, self.theta);
            if self.lambda[n as usize].abs() > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Validation(format!(
                    "|λ({n})| = {} exceeds d(n)·n^θ = {bound}",
                    self.lambda[n as usize].abs()
                )));
            }
        }
        let residual = self.hecke_residual(n_max)?;
        if residual.0 > HECKE_TOLERANCE {
            return Err(Error::Validation(format!(
                "Hecke relation violated at (m, n) = {:?} by {:e}",
                residual.1, residual.0
            )));
        }
        Ok(())
    }

    /// Largest deviation in the Hecke relations over `m <= n`, `mn <= limit`,
    /// and where it occurs.
    pub fn hecke_residual(&self, limit: u64) -> Result<(f64, (u64, u64))> {
        let limit = limit.min(self.n_max());
        let mut worst = (0.0f64, (1u64, 1u64));
        let mut m = 1u64;
        while m * m <= limit {
            for n in m..=limit / m {
                let g = gcd(m, n);
                let rhs: f64 = if g == 1 {
                    self.lambda[(m * n) as usize]
                } else {
                    divisors(g)?
                        .into_iter()
                        .map(|d| self.lambda[(m * n / (d * d)) as usize])
                        .sum()
                };
                let dev = (self.lambda[m as usize] * self.lambda[n as usize] - rhs).abs();
                if dev > worst.0 {
                    worst = (dev, (m, n));
                }
            }
            m += 1;
        }
        Ok(worst)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn is_holomorphic(&self) -> bool {
        matches!(self.kind, FormKind::Holomorphic { .. })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> i8 {
        self.epsilon
    }

    /// c_f: 1/2 for holomorphic forms and 1 for Maass forms.
    pub fn c_f(&self) -> f64 {
        if self.is_holomorphic() {
            0.5
        } else {
            1.0
        }
    }

    pub fn n_max(&self) -> u64 {
        (self.lambda.len() - 1) as u64
    }

    pub fn lambda(&self, n: u64) -> Result<f64> {
        self.lambda
            .get(n as usize)
            .copied()
            .filter(|_| n >= 1)
            .ok_or(Error::TableTooShort {
                needed: n,
                available: self.n_max(),
            })
    }

    /// λ(0..=n_max) with λ(0) = 0.
    pub fn lambda_table(&self) -> &[f64] {
        &self.lambda
    }

    /// Fails with [`Error::TableTooShort`] unless λ is known up to `n`.
    pub fn require(&self, n: u64) -> Result<()> {
        if n > self.n_max() {
            Err(Error::TableTooShort {
                needed: n,
                available: self.n_max(),
            })
        } else {
            Ok(())
        }
    }

    /// Exact Ramanujan τ(0..=n_max) for Δ.
    pub fn exact_tau(&self) -> Option<&[i128]> {
        self.tau.as_deref()
    }

    /// A copy truncated to `n_max`.
    pub fn truncated(&self, n_max: u64) -> Self {
        let keep = (n_max.min(self.n_max()) + 1) as usize;
        let mut out = self.clone();
        out.lambda.truncate(keep);
        if let Some(t) = out.tau.as_mut() {
            t.truncate(keep);
        }
        out
    }

    /// (1/x) Σ_{n<=x} λ(n)², bounded on average by Rankin–Selberg.
    pub fn mean_square(&self, x: u64) -> Result<f64> {
        self.require(x)?;
        let s: f64 = self.lambda[1..=x as usize].iter().map(|l| l * l).sum();
        Ok(s / x as f64)
    }

    /// Exact Hecke check for Δ over all `m <= n` with `mn <= limit`:
    /// τ(m)τ(n) = Σ_{d|(m,n)} d^11 τ(mn/d²). Returns the failing pairs.
    pub fn hecke_exact_failures(&self, limit: u64) -> Result<Vec<(u64, u64)>> {
        let tau = self
            .tau
            .as_ref()
            .ok_or_else(|| invalid!("exact check needs the built-in Δ"))?;
        self.require(limit)?;
        let big = |n: u64| BigInt::from(tau[n as usize]);
        let mut failures = Vec::new();
        let mut m = 1u64;
        while m * m <= limit {
            for n in m..=limit / m {
                let lhs = big(m) * big(n);
                let mut rhs = BigInt::from(0);
                for d in divisors(gcd(m, n))? {
                    rhs += BigInt::from(d).pow(11) * big(m * n / (d * d));
                }
                if lhs != rhs {
                    failures.push((m, n));
                }
            }
            m += 1;
        }
        Ok(failures)
    }

    /// Exact Deligne check τ(n)² <= d(n)² n^11 for `n <= limit`. Returns the
    /// failing `n`.
    pub fn deligne_exact_failures(&self, limit: u64) -> Result<Vec<u64>> {
        let tau = self
            .tau
            .as_ref()
            .ok_or_else(|| invalid!("exact check needs the built-in Δ"))?;
        self.require(limit)?;
        let sieve = SieveCache::new(limit as u32);
        let dcount = sieve.divisor_count_table();
        Ok((1..=limit)
            .filter(|&n| {
                let t = BigInt::from(tau[n as usize]);
                let d = BigInt::from(dcount[n as usize]);
                &t * &t > &d * &d * BigInt::from(n).pow(11)
            })
            .collect())
    }
}

/// Fills λ(1..=top) from prime values by λ(p^{e+1}) = λ(p)λ(p^e) - λ(p^{e-1})
/// and multiplicativity. Supplied composite values are cross-checked.
fn extend_by_hecke(map: &BTreeMap<u64, f64>, top: u64) -> Result<Vec<f64>> {
    let sieve = SieveCache::new(top as u32);
    let mut out = vec![0.0f64; top as usize + 1];
    out[1] = 1.0;
    for p in sieve.primes() {
        let lp = *map
            .get(&p)
            .ok_or_else(|| invalid!("cannot extend: λ({p}) missing for prime {p} <= {top}"))?;
        let (mut prev, mut cur) = (1.0, lp);
        let mut pk = p;
        loop {
            out[pk as usize] = cur;
            match pk.checked_mul(p) {
                Some(next) if next <= top => pk = next,
                _ => break,
            }
            (prev, cur) = (cur, lp * cur - prev);
        }
    }
    for n in 2..=top {
        let f = sieve.factorize(n)?;
        if f.factors().len() > 1 {
            out[n as usize] = f
                .factors()
                .iter()
                .map(|&(p, e)| out[p.pow(e) as usize])
                .product();
        }
    }
    for (&n, &v) in map {
        if (out[n as usize] - v).abs() > HECKE_TOLERANCE {
            return Err(Error::Validation(format!(
                "λ({n}) = {v} disagrees with its Hecke extension {}",
                out[n as usize]
            )));
        }
    }
    Ok(out)
}
