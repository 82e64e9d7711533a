//! Ramanujan τ from the eta product `x ∏ (1 - x^n)^24`.
//!
//! The production route writes `∏(1-x^n)^3` with Jacobi's identity, squares it
//! once sparsely and twice more with number-theoretic transforms modulo three
//! 62-bit primes, then lifts with Garner's algorithm. The lift is checked to
//! land in the symmetric range, so an overflow is an error rather than a wrong
//! coefficient. [`tau_sparse`] multiplies in Euler's pentagonal series 24
//! times in checked `i128` and serves as an independent oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::arith::{factorize, is_prime, pow_mod};
use crate::{Error, Result};

/// Largest table the transform route accepts (coefficients `1..=TAU_LIMIT`).
pub const TAU_LIMIT: usize = 1 << 23;

const LOG_MAX_LEN: u32 = 24;

#[derive(Clone, Copy)]
struct Montgomery {
    p: u64,
    /// -p^{-1} mod 2^64
    n_prime: u64,
    /// 2^128 mod p
    r2: u64,
}

impl Montgomery {
    fn new(p: u64) -> Self {
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r = ((1u128 << 64) % u128::from(p)) as u64;
        let r2 = (u128::from(r) * u128::from(r) % u128::from(p)) as u64;
        Self {
            p,
            n_prime: inv.wrapping_neg(),
            r2,
        }
    }

    #[inline(always)]
    fn reduce(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.n_prime);
        let u = ((t + u128::from(m) * u128::from(self.p)) >> 64) as u64;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    #[inline(always)]
    fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(u128::from(a) * u128::from(b))
    }

    fn to_mont(&self, a: u64) -> u64 {
        self.mul(a % self.p, self.r2)
    }
}

/// The three largest primes below 2^62 of the form `c·2^24 + 1`.
fn ntt_primes() -> [u64; 3] {
    let mut out = [0u64; 3];
    let mut found = 0;
    let mut c = ((1u64 << 62) - 1) >> LOG_MAX_LEN;
    while found < 3 {
        let p = (c << LOG_MAX_LEN) + 1;
        if is_prime(p) {
            out[found] = p;
            found += 1;
        }
        c -= 1;
    }
    out
}

fn primitive_root(p: u64) -> u64 {
    let fac = factorize(p - 1).expect("p - 1 is below the factorization limit");
    (2..)
        .find(|&g| fac.primes().all(|r| pow_mod(g, (p - 1) / r, p) != 1))
        .expect("a primitive root exists")
}

/// A twiddle factor with its Shoup companion `floor(w·2^64 / p)`.
#[derive(Clone, Copy)]
struct Twiddle {
    w: u64,
    shoup: u64,
}

impl Twiddle {
    fn new(w: u64, p: u64) -> Self {
        Self {
            w,
            shoup: ((u128::from(w) << 64) / u128::from(p)) as u64,
        }
    }

    /// `x·w mod p`, lazily reduced into `[0, 2p)`.
    #[inline(always)]
    fn mul(self, x: u64, p: u64) -> u64 {
        let q = ((u128::from(x) * u128::from(self.shoup)) >> 64) as u64;
        x.wrapping_mul(self.w).wrapping_sub(q.wrapping_mul(p))
    }
}

/// Transforms with Harvey's lazy butterflies. Values travel in `[0, 4p)`
/// between stages, which is safe because `p < 2^62`.
struct Ntt {
    mont: Montgomery,
    /// Powers `ω^j`, `j < size/2`, of a root of unity of order `size`, and
    /// the same for `ω^{-1}`.
    forward_table: Vec<Twiddle>,
    inverse_table: Vec<Twiddle>,
    size: usize,
}

impl Ntt {
    fn new(p: u64, size: usize) -> Self {
        let g = primitive_root(p);
        let w = pow_mod(g, (p - 1) / size as u64, p);
        let w_inv = pow_mod(w, p - 2, p);
        let table = |root: u64| {
            let step = Twiddle::new(root, p);
            let mut out = Vec::with_capacity(size / 2);
            let mut x = 1u64;
            for _ in 0..size / 2 {
                out.push(Twiddle::new(x, p));
                x = step.mul(x, p);
                if x >= p {
                    x -= p;
                }
            }
            out
        };
        Self {
            mont: Montgomery::new(p),
            forward_table: table(w),
            inverse_table: table(w_inv),
            size,
        }
    }

    /// Decimation in frequency: natural order in, bit-reversed order out.
    /// Input in `[0, 2p)`, output in `[0, 2p)`.
    fn forward(&self, a: &mut [u64]) {
        let p = self.mont.p;
        let two_p = 2 * p;
        let mut len = a.len();
        while len >= 2 {
            let stride = self.size / len;
            let half = len / 2;
            for chunk in a.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for (j, (x, y)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let (u, v) = (*x, *y);
                    let mut s = u + v;
                    if s >= two_p {
                        s -= two_p;
                    }
                    *x = s;
                    *y = self.forward_table[j * stride].mul(u + two_p - v, p);
                }
            }
            len >>= 1;
        }
    }

    /// Decimation in time on bit-reversed input, natural order out, without
    /// the `1/n` scaling. Input in `[0, 2p)`, output in `[0, 4p)`.
    fn inverse(&self, a: &mut [u64]) {
        let p = self.mont.p;
        let two_p = 2 * p;
        let n = a.len();
        let mut len = 2;
        while len <= n {
            let stride = self.size / len;
            let half = len / 2;
            for chunk in a.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for (j, (x, y)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let mut u = *x;
                    if u >= two_p {
                        u -= two_p;
                    }
                    let v = self.inverse_table[j * stride].mul(*y, p);
                    *x = u + v;
                    *y = u + two_p - v;
                }
            }
            len <<= 1;
        }
    }

    /// Squares a series with entries in `[0, p)` in place, truncated to its
    /// length. Output entries are fully reduced.
    fn square_truncated(&self, a: &mut Vec<u64>) {
        let m = &self.mont;
        let keep = a.len();
        let size = (2 * keep - 1).next_power_of_two();
        debug_assert!(size <= self.size);
        a.resize(size, 0);
        self.forward(a);
        for x in a.iter_mut() {
            let r = *x % m.p;
            // Montgomery squaring leaves a factor R^{-1}; the final scale undoes it
            *x = m.mul(r, r);
        }
        self.inverse(a);
        let n_inv = pow_mod(size as u64, m.p - 2, m.p);
        let scale = m.to_mont(m.to_mont(n_inv));
        a.truncate(keep);
        for x in a.iter_mut() {
            *x = m.mul(*x % m.p, scale);
        }
    }
}

/// Coefficients of `∏(1-x^n)^6` below `len`, by squaring Jacobi's series.
fn eta_six(len: usize) -> Vec<i64> {
    let mut jacobi: Vec<(usize, i64)> = Vec::new();
    let mut k = 0usize;
    while k * (k + 1) / 2 < len {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        jacobi.push((k * (k + 1) / 2, sign * (2 * k as i64 + 1)));
        k += 1;
    }
    let mut out = vec![0i64; len];
    for &(i, a) in &jacobi {
        for &(j, b) in &jacobi {
            if i + j >= len {
                break;
            }
            out[i + j] += a * b;
        }
    }
    out
}

struct Garner {
    p: [u64; 3],
    inv_p1_mod_p2: u64,
    inv_p1p2_mod_p3: u64,
}

impl Garner {
    fn new(p: [u64; 3]) -> Self {
        let p1p2_mod_p3 = (u128::from(p[0]) * u128::from(p[1]) % u128::from(p[2])) as u64;
        Self {
            p,
            inv_p1_mod_p2: pow_mod(p[0] % p[1], p[1] - 2, p[1]),
            inv_p1p2_mod_p3: pow_mod(p1p2_mod_p3, p[2] - 2, p[2]),
        }
    }

    /// Signed lift of a residue triple; `None` unless the value lies within
    /// `p1·p2` of zero.
    fn lift(&self, r: [u64; 3]) -> Option<i128> {
        let Garner {
            p,
            inv_p1_mod_p2,
            inv_p1p2_mod_p3,
        } = *self;
        let mulm = |a: u64, b: u64, m: u64| (u128::from(a) * u128::from(b) % u128::from(m)) as u64;

        let t2 = mulm((r[1] + p[1] - r[0] % p[1]) % p[1], inv_p1_mod_p2, p[1]);
        let partial = (u128::from(r[0]) + u128::from(p[0]) * u128::from(t2)) % u128::from(p[2]);
        let t3 = mulm(
            ((u128::from(r[2]) + u128::from(p[2]) - partial) % u128::from(p[2])) as u64,
            inv_p1p2_mod_p3,
            p[2],
        );
        let low = i128::from(r[0]) + i128::from(p[0]) * i128::from(t2);
        if t3 == 0 {
            Some(low)
        } else if t3 == p[2] - 1 {
            Some(low - i128::from(p[0]) * i128::from(p[1]))
        } else {
            None
        }
    }
}

/// τ(n) for `n` in `0..=n_max`, with τ(0) = 0, via number-theoretic transforms.
pub fn tau_table(n_max: usize) -> Result<Vec<i128>> {
    if n_max > TAU_LIMIT {
        return Err(Error::Budget(alloc::format!(
            "tau table up to {n_max} exceeds the limit {TAU_LIMIT}"
        )));
    }
    let mut out = vec![0i128; n_max + 1];
    if n_max == 0 {
        return Ok(out);
    }
    let six = eta_six(n_max);
    let primes = ntt_primes();
    let size = (2 * n_max - 1).next_power_of_two();
    let mut residues: Vec<Vec<u64>> = Vec::with_capacity(3);
    for &p in &primes {
        let ntt = Ntt::new(p, size);
        let mut a: Vec<u64> = six.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
        ntt.square_truncated(&mut a);
        ntt.square_truncated(&mut a);
        residues.push(a);
    }
    let crt = Garner::new(primes);
    for i in 0..n_max {
        let r = [residues[0][i], residues[1][i], residues[2][i]];
        out[i + 1] = crt
            .lift(r)
            .ok_or_else(|| Error::Overflow(alloc::format!("tau({}) left the CRT range", i + 1)))?;
    }
    Ok(out)
}

/// τ(n) for `n` in `0..=n_max` by 24 sparse multiplications with Euler's
/// pentagonal series in checked `i128`.
pub fn tau_sparse(n_max: usize) -> Result<Vec<i128>> {
    let mut out = vec![0i128; n_max + 1];
    if n_max == 0 {
        return Ok(out);
    }
    let len = n_max;
    let mut pentagonal: Vec<(usize, i128)> = vec![(0, 1)];
    let mut k = 1usize;
    loop {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let g1 = k * (3 * k - 1) / 2;
        let g2 = k * (3 * k + 1) / 2;
        if g1 >= len {
            break;
        }
        pentagonal.push((g1, sign));
        if g2 < len {
            pentagonal.push((g2, sign));
        }
        k += 1;
    }
    let overflow = || Error::Overflow(alloc::string::String::from("sparse eta product"));
    let mut series = vec![0i128; len];
    series[0] = 1;
    for _ in 0..24 {
        for i in (0..len).rev() {
            let mut acc = 0i128;
            for &(j, s) in &pentagonal {
                if j > i {
                    break;
                }
                let term = series[i - j].checked_mul(s).ok_or_else(overflow)?;
                acc = acc.checked_add(term).ok_or_else(overflow)?;
            }
            series[i] = acc;
        }
    }
    out[1..].copy_from_slice(&series);
    Ok(out)
}
