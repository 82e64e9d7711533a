//! The canonical smooth weight W, supported on [1/2, 3] with W = 1 on [1, 2].
//!
//! W(x) = g(2x - 1)·g(3 - x) with the ramp g(t) = 1/(1 + exp(1/t - 1/(1-t)))
//! on (0, 1). Derivatives come from truncated Taylor arithmetic, so the
//! derivative bounds B_j are computed from exact jets on a dense grid.

use alloc::vec::Vec;

/// Highest derivative order carried by the certificates.
pub const MAX_DERIVATIVE: usize = 6;
const JET: usize = MAX_DERIVATIVE + 1;

/// Truncated Taylor series `Σ c_k h^k` of length `N` (coefficients are
/// f^{(k)}/k!).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize = JET>(pub [f64; N]);

impl<const N: usize> Jet<N> {
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = c;
        Jet(a)
    }

    /// The identity jet at `x`.
    pub fn variable(x: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = x;
        a[1] = 1.0;
        Jet(a)
    }

    pub fn scale(self, s: f64) -> Self {
        Jet(self.0.map(|c| c * s))
    }

    pub fn add(self, o: Self) -> Self {
        let mut a = self.0;
        for (x, y) in a.iter_mut().zip(o.0) {
            *x += y;
        }
        Jet(a)
    }

    pub fn add_scalar(mut self, s: f64) -> Self {
        self.0[0] += s;
        self
    }

    pub fn mul(self, o: Self) -> Self {
        let mut a = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                a[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(a)
    }

    pub fn recip(self) -> Self {
        let mut r = [0.0; N];
        r[0] = 1.0 / self.0[0];
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.0[j] * r[k - j];
            }
            r[k] = -s * r[0];
        }
        Jet(r)
    }

    pub fn exp(self) -> Self {
        let mut e = [0.0; N];
        e[0] = libm::exp(self.0[0]);
        for k in 1..N {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.0[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    /// The jet of f', exact up to one order less.
    pub fn derivative(self) -> Self {
        let mut a = [0.0; N];
        for k in 0..N - 1 {
            a[k] = (k + 1) as f64 * self.0[k + 1];
        }
        Jet(a)
    }

    /// f^{(k)} = k!·c_k.
    pub fn derivatives(self) -> [f64; N] {
        let mut out = self.0;
        let mut fact = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *v *= fact;
        }
        out
    }
}

/// Jet of the ramp g at the jet `t`.
fn ramp<const N: usize>(t: Jet<N>) -> Jet<N> {
    let t0 = t.0[0];
    if t0 <= 0.0 {
        return Jet::constant(0.0);
    }
    if t0 >= 1.0 {
        return Jet::constant(1.0);
    }
    let one_minus = t.scale(-1.0).add_scalar(1.0);
    let u = t.recip().add(one_minus.recip().scale(-1.0));
    if u.0[0] > 700.0 {
        // g and all its derivatives are below e^{-700} here
        return Jet::constant(0.0);
    }
    if u.0[0] > 0.0 {
        // e^{-u}/(1 + e^{-u}) keeps every coefficient finite near t = 0
        let w = u.scale(-1.0).exp();
        return w.mul(w.add_scalar(1.0).recip());
    }
    u.exp().add_scalar(1.0).recip()
}

fn ramp_value(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let u = 1.0 / t - 1.0 / (1.0 - t);
        if u > 700.0 {
            0.0
        } else {
            1.0 / (1.0 + libm::exp(u))
        }
    }
}

/// W(x).
pub fn bump(x: f64) -> f64 {
    if x <= 0.5 || x >= 3.0 {
        return 0.0;
    }
    ramp_value(2.0 * x - 1.0) * ramp_value(3.0 - x)
}

/// Taylor jet of W at `x`.
pub fn bump_jet(x: f64) -> Jet {
    bump_of(Jet::variable(x))
}

/// W composed with the jet `t`.
pub fn bump_of<const N: usize>(t: Jet<N>) -> Jet<N> {
    let x = t.0[0];
    if x <= 0.5 || x >= 3.0 {
        return Jet::constant(0.0);
    }
    ramp(t.scale(2.0).add_scalar(-1.0)).mul(ramp(t.scale(-1.0).add_scalar(3.0)))
}

/// W with derivative certificates |W^{(j)}| <= B_j, j <= 6.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFunction {
    bounds: [f64; JET],
}

pub const SUPPORT: (f64, f64) = (0.5, 3.0);
pub const PLATEAU: (f64, f64) = (1.0, 2.0);

const CERTIFICATE_GRID: usize = 200_000;
const CERTIFICATE_MARGIN: f64 = 1.05;

impl Default for BumpFunction {
    fn default() -> Self {
        Self::new()
    }
}

impl BumpFunction {
    /// Computes the bounds as 1.05 × the maximum of |W^{(j)}| over a grid of
    /// 2·10^5 points on the two ramps.
    pub fn new() -> Self {
        let mut bounds = [0.0f64; JET];
        let ramps: [(f64, f64); 2] = [(0.5, 1.0), (2.0, 3.0)];
        for (a, b) in ramps {
            for i in 0..=CERTIFICATE_GRID / 2 {
                let x = a + (b - a) * i as f64 / (CERTIFICATE_GRID / 2) as f64;
                for (bd, d) in bounds.iter_mut().zip(bump_jet(x).derivatives()) {
                    *bd = bd.max(d.abs());
                }
            }
        }
        bounds[0] = 1.0;
        Self {
            bounds: bounds.map(|b| b * CERTIFICATE_MARGIN),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        bump(x)
    }

    /// W^{(j)}(x) for j = 0..=6.
    pub fn derivatives(&self, x: f64) -> [f64; JET] {
        bump_jet(x).derivatives()
    }

    /// B_j with |W^{(j)}| <= B_j.
    pub fn bound(&self, j: usize) -> f64 {
        self.bounds[j]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// ∫ W, by the adaptive rule.
    pub fn integral(&self) -> f64 {
        super::quad::integrate(bump, 0.5, 3.0, 1e-14, 8)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }

    /// Sample of W on `n` equally spaced points of its support.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let x = 0.5 + 2.5 * i as f64 / (n - 1) as f64;
                (x, bump(x))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_and_plateau() {
        assert_eq!(bump(0.5), 0.0);
        assert_eq!(bump(0.3), 0.0);
        assert_eq!(bump(3.0), 0.0);
        assert_eq!(bump(3.5), 0.0);
        for x in [1.0, 1.3, 1.99, 2.0] {
            assert_eq!(bump(x), 1.0);
        }
        assert!(bump(0.75) > 0.0 && bump(0.75) < 1.0);
        assert!((bump(0.75) - 0.5).abs() < 1e-15);
        assert!((bump(2.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jets_match_finite_differences() {
        let w = BumpFunction::new();
        let h = 1e-4;
        for i in 1..1000 {
            let x = 0.5 + 2.5 * i as f64 / 1000.0;
            let d = w.derivatives(x);
            let fd1 = (bump(x + h) - bump(x - h)) / (2.0 * h);
            let fd2 = (bump(x + h) - 2.0 * bump(x) + bump(x - h)) / (h * h);
            assert!((d[0] - bump(x)).abs() < 1e-15);
            assert!((d[1] - fd1).abs() < 1e-5 * (1.0 + d[1].abs()), "x={x}");
            assert!((d[2] - fd2).abs() < 1e-3 * (1.0 + d[2].abs()), "x={x}");
        }
    }

    #[test]
    fn certificates_hold_on_grid() {
        let w = BumpFunction::new();
        // finite differences of order j on a 10^4-point grid, 5% slack
        let n = 10_000;
        let h = 2.5 / n as f64;
        let vals: Vec<f64> = (0..=n + 8).map(|i| bump(0.5 - 4.0 * h + i as f64 * h)).collect();
        let mut diff = vals.clone();
        for j in 1..=MAX_DERIVATIVE {
            diff = diff.windows(2).map(|p| (p[1] - p[0]) / h).collect();
            let max = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max <= w.bound(j) * 1.05, "j={j} max={max} bound={}", w.bound(j));
        }
    }
}
