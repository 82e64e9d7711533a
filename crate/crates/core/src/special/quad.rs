//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use crate::error::invalid;
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Sum of |Kronrod - Gauss| over the final partition.
    pub error: f64,
    pub evaluations: usize,
}

/// Kronrod value and |K - G| on `[a, b]`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        k += w * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// ∫_a^b f to absolute tolerance `tol`, starting from `panels` equal pieces.
///
/// Oscillatory integrands should pass about one panel per oscillation.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, panels: usize) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || !(tol > 0.0) {
        return Err(invalid!("integrate needs a finite interval and tol > 0"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let panels = panels.max(1);
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    let mut error = 0.0;
    let mut evaluations = 0;
    for i in 0..panels {
        let lo = a + (b - a) * i as f64 / panels as f64;
        let hi = if i + 1 == panels { b } else { a + (b - a) * (i + 1) as f64 / panels as f64 };
        let (v, e) = gk15(&mut f, lo, hi);
        evaluations += 15;
        error += e;
        heap.push(Piece { a: lo, b: hi, value: v, error: e });
    }
    while error > tol {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { achieved: error, requested: tol });
        }
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature { achieved: error, requested: tol });
        }
        let (v1, e1) = gk15(&mut f, p.a, mid);
        let (v2, e2) = gk15(&mut f, mid, p.b);
        evaluations += 30;
        error += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: p.b, value: v2, error: e2 });
    }
    // recompute the sums to shed accumulated rounding
    let (mut v, mut e) = (0.0, 0.0);
    for p in heap.iter() {
        v += p.value;
        e += p.error;
    }
    Ok(QuadResult { value: v, error: e.max(0.0), evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(20), 0.0, 1.0, 1e-14, 1).unwrap();
        assert!((r.value - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let r = integrate(|x| (50.0 * x).cos(), 0.0, PI, 1e-12, 30).unwrap();
        assert!((r.value - (50.0 * PI).sin() / 50.0).abs() < 1e-12);
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 1).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value - exact).abs() < 1e-8);
    }

    #[test]
    fn rejects_impossible_tolerance() {
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-12, 1.0, 1e-300, 1);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
