//! Complex log-gamma and the regularized incomplete gamma function.

use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::invalid;
use crate::{Error, Result};

/// B_{2j} / (2j (2j - 1)) for j = 1..=10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

const SHIFT_TARGET: f64 = 15.0;

/// ln √(2π)
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

fn stirling(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut term = inv;
    let mut series = Complex64::new(0.0, 0.0);
    for c in STIRLING {
        series += term * c;
        term *= inv2;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_TWO_PI + series
}

/// ln Γ(z), continuous in `z` off the negative real axis.
///
/// For `Re z >= 1/2` the argument is shifted until `Re z >= 15` and the
/// Stirling series with ten terms is applied; the left half-plane uses the
/// reflection formula.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(invalid!("log_gamma of non-finite {z}"));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == libm::floor(z.re) {
        return Err(invalid!("log_gamma pole at {}", z.re));
    }
    if z.re < 0.5 {
        // ln Γ(z) = ln π - ln sin(πz) - ln Γ(1-z)
        let s = (z * PI).sin();
        return Ok(Complex64::new(libm::log(PI), 0.0) - s.ln() - log_gamma(Complex64::new(1.0, 0.0) - z)?);
    }
    let mut w = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while w.re < SHIFT_TARGET {
        acc += w.ln();
        w += 1.0;
    }
    Ok(stirling(w) - acc)
}

/// Γ(z) as a complex number.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    Ok(log_gamma(z)?.exp())
}

/// ln Γ(x) for real `x > 0`.
pub fn ln_gamma_real(x: f64) -> f64 {
    libm::lgamma(x)
}

const INCOMPLETE_EPS: f64 = 1e-16;
const INCOMPLETE_MAX_ITER: usize = 10_000;

/// The regularized upper incomplete gamma function Q(a, x) = Γ(a, x)/Γ(a)
/// for `a > 0`, `x >= 0`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) || !x.is_finite() {
        return Err(invalid!("gamma_q needs a > 0 and finite x >= 0, got ({a}, {x})"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - lower_series(a, x)?)
    } else {
        upper_fraction(a, x)
    }
}

/// The regularized lower incomplete gamma function P(a, x) = 1 - Q(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) || !x.is_finite() {
        return Err(invalid!("gamma_p needs a > 0 and finite x >= 0, got ({a}, {x})"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        Ok(1.0 - upper_fraction(a, x)?)
    }
}

fn prefactor(a: f64, x: f64) -> f64 {
    libm::exp(a * libm::log(x) - x - ln_gamma_real(a))
}

fn lower_series(a: f64, x: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..INCOMPLETE_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * INCOMPLETE_EPS {
            return Ok(sum * prefactor(a, x));
        }
    }
    Err(Error::Quadrature {
        achieved: term.abs() / sum.abs(),
        requested: INCOMPLETE_EPS,
    })
}

/// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn upper_fraction(a: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..INCOMPLETE_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < INCOMPLETE_EPS {
            return Ok(h * prefactor(a, x));
        }
    }
    Err(Error::Quadrature {
        achieved: f64::NAN,
        requested: INCOMPLETE_EPS,
    })
}
