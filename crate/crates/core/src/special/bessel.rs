//! Bessel functions J_ν(x) of real order.
//!
//! Three regimes: the power series where it does not cancel badly, Hankel's
//! asymptotic expansion for `x` large against ν², and Miller's backward
//! recurrence in between, normalized by the Neumann-type identity
//! `(x/2)^{ν0} = Σ_k (ν0+2k) Γ(ν0+k)/k! J_{ν0+2k}(x)`.

use core::f64::consts::PI;

use super::gamma::ln_gamma_real;
use crate::error::invalid;
use crate::Result;

pub const MAX_ORDER: f64 = 60.0;
pub const MAX_ARGUMENT: f64 = 1e6;

/// Which evaluation route [`bessel_j`] takes for `(ν, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselRegime {
    Series,
    Asymptotic,
    Recurrence,
}

pub fn regime(nu: f64, x: f64) -> BesselRegime {
    if x <= 12.0 || x * x <= 8.0 * (nu + 1.0) {
        BesselRegime::Series
    } else if x >= 25.0 && x >= nu * nu {
        BesselRegime::Asymptotic
    } else {
        BesselRegime::Recurrence
    }
}

/// J_ν(x) for `0 <= ν <= 60`, `0 <= x <= 10^6`, absolute error below 1e-10.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if !(0.0..=MAX_ORDER).contains(&nu) || !(0.0..=MAX_ARGUMENT).contains(&x) {
        return Err(invalid!("bessel_j({nu}, {x}) outside 0 <= ν <= 60, 0 <= x <= 1e6"));
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(match regime(nu, x) {
        BesselRegime::Series => series(nu, x),
        BesselRegime::Asymptotic => match asymptotic(nu, x) {
            Some(v) => v,
            None => recurrence(nu, x),
        },
        BesselRegime::Recurrence => recurrence(nu, x),
    })
}

pub(crate) fn series(nu: f64, x: f64) -> f64 {
    let lead = libm::exp(nu * libm::log(x / 2.0) - ln_gamma_real(nu + 1.0));
    let y = -x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= y / (k * (nu + k));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && k > -y {
            break;
        }
        if k > 500.0 {
            break;
        }
    }
    lead * sum
}

/// Hankel's expansion; `None` if the terms stop decreasing before 1e-15.
pub(crate) fn asymptotic(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() && next != 0.0 {
            if term.abs() > 1e-15 {
                return None;
            }
            break;
        }
        term = next;
        // signs: P = t0 - t2 + t4 ..., Q = t1 - t3 + ...
        match (k as u64) % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 || term == 0.0 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            return None;
        }
    }
    let omega = reduced_phase(x, nu);
    Some(libm::sqrt(2.0 / (PI * x)) * (p * libm::cos(omega) - q * libm::sin(omega)))
}

/// x - νπ/2 - π/4 reduced modulo 2π with the large part split off first.
fn reduced_phase(x: f64, nu: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let xr = x - two_pi * libm::floor(x / two_pi);
    let shift = (nu / 2.0 + 0.25) * PI;
    xr - (shift - two_pi * libm::floor(shift / two_pi))
}

pub(crate) fn recurrence(nu: f64, x: f64) -> f64 {
    let n = libm::floor(nu) as usize;
    let nu0 = nu - n as f64;
    let top = n.max(x as usize);
    let mut start = top + 20 + libm::sqrt(40.0 * top as f64) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    // h_m = Γ(ν0+m)/m! for m >= 1
    let g1 = libm::exp(ln_gamma_real(nu0 + 1.0));
    let weight = |k: usize, h: f64| -> f64 {
        if k == 0 {
            g1
        } else {
            (nu0 + k as f64) * h
        }
    };
    // precompute h_m up to start/2
    let mut h = alloc::vec![0.0f64; start / 2 + 1];
    if start / 2 >= 1 {
        h[1] = g1;
        for m in 2..=start / 2 {
            h[m] = h[m - 1] * (nu0 + m as f64 - 1.0) / m as f64;
        }
    }
    let mut j_next = 0.0f64; // order ν0 + k + 1
    let mut j_cur = 1e-280f64; // order ν0 + k
    let mut target = 0.0;
    let mut norm = 0.0;
    let mut k = start;
    loop {
        if k == n {
            target = j_cur;
        }
        if k % 2 == 0 {
            norm += weight(k, h[k / 2]) * j_cur;
        }
        if k == 0 {
            break;
        }
        let j_prev = 2.0 * (nu0 + k as f64) / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        k -= 1;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            target *= 1e-250;
            norm *= 1e-250;
        }
    }
    target * libm::pow(x / 2.0, nu0) / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    /// Bessel's integral J_n(x) = (1/π)∫_0^π cos(nτ - x sin τ) dτ; the
    /// trapezoid rule on this periodic integrand converges geometrically.
    fn integral_oracle(n: u32, x: f64) -> f64 {
        let m = 4000 + 4 * x as usize;
        let h = PI / m as f64;
        let f = |t: f64| (f64::from(n) * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn limits_and_leading_term() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert!((bessel_j(0.0, 1e-9).unwrap() - 1.0).abs() < 1e-15);
        let x = 1e-3f64;
        let lead = (x / 2.0).powi(11) / 39_916_800.0;
        assert!((bessel_j(11.0, x).unwrap() / lead - 1.0).abs() < 1e-6);
        assert!(bessel_j(61.0, 1.0).is_err());
        assert!(bessel_j(1.0, 2e6).is_err());
    }

    #[test]
    fn integer_orders_match_integral() {
        for n in [0u32, 1, 5, 11, 23, 40] {
            for x in [0.5, 3.0, 11.0, 13.0, 20.0, 47.0, 90.0, 140.0, 400.0, 1700.0] {
                let got = bessel_j(f64::from(n), x).unwrap();
                let want = integral_oracle(n, x);
                assert!((got - want).abs() < 1e-10, "n={n} x={x} {got} {want} {:?}", regime(n as f64, x));
            }
        }
    }

    #[test]
    fn half_integer_closed_form() {
        for x in [0.3, 7.0, 30.0, 250.0, 9000.0, 9.99e5] {
            let want = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x).unwrap() - want).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn regimes_agree_where_they_overlap() {
        for nu in [0.0, 2.5, 7.3, 11.0] {
            for x in [30.0, 60.0, 150.0] {
                let r = recurrence(nu, x);
                if let Some(a) = asymptotic(nu, x) {
                    assert!((r - a).abs() < 1e-11, "nu={nu} x={x}");
                }
            }
            for x in [4.0, 9.0, 12.0] {
                assert!((series(nu, x) - recurrence(nu, x)).abs() < 1e-11, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn bounded_by_one() {
        let xs: Vec<f64> = (1..400).map(|i| i as f64 * 0.37).collect();
        for nu in [0.0, 1.0, 11.0, 59.5] {
            for &x in &xs {
                assert!(bessel_j(nu, x).unwrap().abs() <= 1.0);
            }
        }
    }
}
