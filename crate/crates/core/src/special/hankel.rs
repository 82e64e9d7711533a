//! Bessel kernels 𝒥_±, Hankel-type transforms ∫ F(x) J_ν(4π√(xy)) dx, the
//! windowed transforms 𝓥̊_±(y, h) and the Fourier transform of W.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::bessel::bessel_j;
use super::bump::{bump, bump_of, Jet};
use super::quad::integrate;
use crate::error::invalid;
use crate::{Error, Result};

/// Requested absolute accuracy of every transform in this module.
pub const TRANSFORM_TOL: f64 = 1e-10;

/// i^k, stored as k mod 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuarterTurn(u8);

impl QuarterTurn {
    pub fn new(k: i64) -> Self {
        Self(k.rem_euclid(4) as u8)
    }

    pub fn turns(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn apply(self, z: Complex64) -> Complex64 {
        match self.0 {
            0 => z,
            1 => Complex64::new(-z.im, z.re),
            2 => -z,
            _ => Complex64::new(z.im, -z.re),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// The kernel pair 𝒥_± attached to a form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// 𝒥_+ = 2π i^k J_{k-1}, 𝒥_- = 0.
    Holomorphic { weight: u32 },
    /// Imaginary-order J and K kernels; interface only.
    Maass { kappa: f64 },
}

impl Kernel {
    fn unsupported(kappa: f64) -> Error {
        Error::UnsupportedKernel(alloc::format!(
            "Maass kernel with spectral parameter {kappa} needs Bessel functions of imaginary order"
        ))
    }

    /// Bessel order and phase of a holomorphic kernel.
    fn holomorphic(&self) -> Result<(f64, QuarterTurn)> {
        match *self {
            Kernel::Holomorphic { weight } if weight >= 1 => {
                Ok((f64::from(weight - 1), QuarterTurn::new(i64::from(weight))))
            }
            Kernel::Holomorphic { weight } => Err(invalid!("weight {weight} must be positive")),
            Kernel::Maass { kappa } => Err(Self::unsupported(kappa)),
        }
    }

    /// True when 𝒥_sign vanishes identically.
    pub fn vanishes(&self, sign: Sign) -> bool {
        matches!((self, sign), (Kernel::Holomorphic { .. }, Sign::Minus))
    }

    /// 𝒥_±(x).
    pub fn eval(&self, sign: Sign, x: f64) -> Result<Complex64> {
        if let Kernel::Maass { kappa } = *self {
            return Err(Self::unsupported(kappa));
        }
        if self.vanishes(sign) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (nu, phase) = self.holomorphic()?;
        Ok(phase.apply(Complex64::new(2.0 * PI * bessel_j(nu, x)?, 0.0)))
    }
}

/// Support and smoothness data of F: supported in [X, X + X1] with
/// F^{(j)} ≪ X2^{-j}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothCertificate {
    pub x: f64,
    pub x1: f64,
    pub x2: f64,
}

impl SmoothCertificate {
    pub fn new(x: f64, x1: f64, x2: f64) -> Result<Self> {
        if !(x > 0.0 && x1 > 0.0 && x2 > 0.0) || !(x2 <= x1) {
            return Err(invalid!("certificate needs X, X1, X2 > 0 and X2 <= X1"));
        }
        Ok(Self { x, x1, x2 })
    }

    /// The canonical W(x/s): support [s/2, 3s], derivatives of size s^{-j}.
    pub fn scaled_bump(s: f64) -> Result<Self> {
        Self::new(s / 2.0, 2.5 * s, s / 2.0)
    }

    /// X1(1 + (Xy)^ν)((1 + Xy)^{-i/2} + (1 + X2² y/X)^{-i/2}), the decay
    /// envelope of a J_ν transform after `i` integrations by parts.
    pub fn envelope(&self, nu: f64, y: f64, i: u32) -> f64 {
        let xy = self.x * y;
        let e = -0.5 * f64::from(i);
        self.x1
            * (1.0 + libm::pow(xy, nu))
            * (libm::pow(1.0 + xy, e) + libm::pow(1.0 + self.x2 * self.x2 * y / self.x, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelValue {
    pub value: f64,
    /// Quadrature error estimate.
    pub error: f64,
    /// The i = 0 envelope.
    pub envelope: f64,
}

/// Panels so that each holds at most one oscillation of cos(4π√(xy)).
fn oscillation_panels(a: f64, b: f64, y: f64) -> usize {
    let turns = 2.0 * (libm::sqrt(b * y) - libm::sqrt(a * y));
    8 + libm::ceil(turns.max(0.0)) as usize
}

/// 𝓕_ν(y) = ∫ F(x) J_ν(4π√(xy)) dx over the certified support.
pub fn hankel_transform(
    f: impl Fn(f64) -> f64,
    cert: &SmoothCertificate,
    nu: f64,
    y: f64,
) -> Result<HankelValue> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(invalid!("transform argument y={y} must be finite and >= 0"));
    }
    let (a, b) = (cert.x, cert.x + cert.x1);
    let mut failure = None;
    let r = integrate(
        |x| {
            if failure.is_some() {
                return 0.0;
            }
            let fx = f(x);
            if fx == 0.0 {
                return 0.0;
            }
            match bessel_j(nu, 4.0 * PI * libm::sqrt(x * y)) {
                Ok(j) => fx * j,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        a,
        b,
        TRANSFORM_TOL,
        oscillation_panels(a, b, y),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(HankelValue {
        value: r.value,
        error: r.error,
        envelope: cert.envelope(nu, y, 0),
    })
}

/// Parameters of 𝓥̊_±(y, h) = ∫ W((bx - hq)/N) W(bx/M) 𝒥_±(4π√(xy)) dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VringParams {
    pub b: u64,
    pub q: u64,
    pub m: f64,
    pub n: f64,
}

impl VringParams {
    /// Intersection of the supports of the two windows, if non-empty.
    pub fn support(&self, h: i64) -> Option<(f64, f64)> {
        let b = self.b as f64;
        let shift = h as f64 * self.q as f64;
        let lo = (self.m / (2.0 * b)).max((shift + self.n / 2.0) / b);
        let hi = (3.0 * self.m / b).min((shift + 3.0 * self.n) / b);
        (lo < hi).then_some((lo, hi))
    }

    /// Lemma-style decay scale: min(M, N)/b · ((1 + My/b)^{-i/2} + (1 + min(M,N)² y/(bM))^{-i/2}).
    pub fn decay_bound(&self, y: f64, i: u32) -> f64 {
        let b = self.b as f64;
        let mn = self.m.min(self.n);
        let e = -0.5 * f64::from(i);
        mn / b * (libm::pow(1.0 + self.m * y / b, e) + libm::pow(1.0 + mn * mn * y / (b * self.m), e))
    }
}

/// 𝓥̊_±(y, h) for the given kernel.
pub fn vring_pm(kernel: &Kernel, sign: Sign, p: &VringParams, y: f64, h: i64) -> Result<Complex64> {
    if p.b == 0 || p.q == 0 || !(p.m > 0.0) || !(p.n > 0.0) || !(y > 0.0) {
        return Err(invalid!("vring_pm needs positive b, q, M, N, y"));
    }
    if let Kernel::Maass { kappa } = *kernel {
        return Err(Kernel::unsupported(kappa));
    }
    let zero = Complex64::new(0.0, 0.0);
    if kernel.vanishes(sign) {
        return Ok(zero);
    }
    let Some((lo, hi)) = p.support(h) else {
        return Ok(zero);
    };
    let (nu, phase) = kernel.holomorphic()?;
    let b = p.b as f64;
    let shift = h as f64 * p.q as f64;
    let window = |x: f64| bump((b * x - shift) / p.n) * bump(b * x / p.m);
    // tolerance relative to the 2π prefactor
    let value = hankel_transform(window, &SmoothCertificate { x: lo, x1: hi - lo, x2: hi - lo }, nu, y)?;
    Ok(phase.apply(Complex64::new(2.0 * PI * value.value, 0.0)))
}

/// Ŵ(ξ) = ∫ W(x) e(-xξ) dx.
pub fn bump_fourier(xi: f64) -> Result<Complex64> {
    let panels = 8 + libm::ceil(2.5 * xi.abs()) as usize;
    let w = 2.0 * PI * xi;
    let re = integrate(|x| bump(x) * libm::cos(w * x), 0.5, 3.0, TRANSFORM_TOL, panels)?;
    let im = integrate(|x| -bump(x) * libm::sin(w * x), 0.5, 3.0, TRANSFORM_TOL, panels)?;
    Ok(Complex64::new(re.value, im.value))
}

/// Ŵ on the grid ξ_j = j·step, 0 <= j <= count; Ŵ(-ξ) is the conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierGrid {
    pub step: f64,
    pub values: Vec<Complex64>,
}

impl FourierGrid {
    pub fn new(step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(invalid!("grid step must be positive"));
        }
        let values = (0..=count)
            .map(|j| bump_fourier(j as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { step, values })
    }

    /// Ŵ(j·step) for any integer j in range.
    pub fn at(&self, j: i64) -> Option<Complex64> {
        let v = *self.values.get(j.unsigned_abs() as usize)?;
        Some(if j < 0 { v.conj() } else { v })
    }
}

const CHEB_DEGREE: usize = 24;
const PANEL_WIDTH: f64 = 0.5;

/// L^j[g](s) for g(s) = W(s²) and the Bessel operator
/// L = d²/ds² + s^{-1}d/ds - ν²/s², which has L[J_ν(as)] = -a²J_ν(as).
/// Each application uses two orders of the jet, so N = 2j + 1.
fn bessel_operator_power<const N: usize>(nu: f64, s: f64) -> f64 {
    let v = Jet::<N>::variable(s);
    let inv = v.recip();
    let inv2 = inv.mul(inv).scale(-nu * nu);
    let mut f = bump_of(v.mul(v));
    for _ in 0..N / 2 {
        let d = f.derivative();
        f = d.derivative().add(d.mul(inv)).add(f.mul(inv2));
    }
    f.0[0]
}

/// Largest number of integrations by parts in [`decay_constant`].
pub const MAX_DECAY_ORDER: u32 = 12;

/// C_j with |∫W(u)J_ν(4π√(zu))du| <= C_j/(16π²z)^j for all z > 0.
///
/// With u = s² the transform is 2∫g(s)J_ν(as)s ds, a = 4π√z. L is symmetric
/// for s ds and g has compact support, so j integrations by parts give
/// a^{-2j}·2∫|L^j g|s ds, using |J_ν| <= 1 for ν >= 0.
pub fn decay_constant(nu: f64, j: u32) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(invalid!("decay constant needs ν >= 0"));
    }
    let op: fn(f64, f64) -> f64 = match j {
        1 => bessel_operator_power::<3>,
        2 => bessel_operator_power::<5>,
        3 => bessel_operator_power::<7>,
        4 => bessel_operator_power::<9>,
        5 => bessel_operator_power::<11>,
        6 => bessel_operator_power::<13>,
        7 => bessel_operator_power::<15>,
        8 => bessel_operator_power::<17>,
        9 => bessel_operator_power::<19>,
        10 => bessel_operator_power::<21>,
        11 => bessel_operator_power::<23>,
        12 => bessel_operator_power::<25>,
        _ => return Err(invalid!("decay order must lie in 1..={MAX_DECAY_ORDER}")),
    };
    let (a, b) = (libm::sqrt(0.5), libm::sqrt(3.0));
    let f = |s: f64| 2.0 * s * op(nu, s).abs();
    // a midpoint sum sets the scale for the adaptive tolerance
    let n = 4096;
    let h = (b - a) / n as f64;
    let rough: f64 = (0..n).map(|i| f(a + (i as f64 + 0.5) * h) * h).sum();
    let fine = integrate(f, a, b, 1e-8 * rough, 256)?;
    Ok(1.05 * (fine.value + fine.error))
}

/// H(z) = ∫ W(u) J_{k-1}(4π√(zu)) du tabulated by Chebyshev panels in √z,
/// so that ∫ W(x/X) 𝒥_+(4π√(xy)) dx = 2π i^k X H(Xy).
#[derive(Debug, Clone, PartialEq)]
pub struct HankelProfile {
    kernel: Kernel,
    order: f64,
    phase: QuarterTurn,
    sqrt_max: f64,
    /// Chebyshev coefficients per panel.
    panels: Vec<[f64; CHEB_DEGREE + 1]>,
    /// max |H| per panel, from the coefficient sums.
    panel_max: Vec<f64>,
    /// Size of the two highest coefficients, the interpolation error proxy.
    pub interpolation_error: f64,
}

impl HankelProfile {
    pub fn new(kernel: Kernel, z_max: f64) -> Result<Self> {
        let (order, phase) = kernel.holomorphic()?;
        if !(z_max > 0.0) {
            return Err(invalid!("z_max must be positive"));
        }
        let sqrt_max = libm::sqrt(z_max);
        let count = libm::ceil(sqrt_max / PANEL_WIDTH) as usize;
        let cert = SmoothCertificate::scaled_bump(1.0)?;
        let nodes: Vec<f64> = (0..=CHEB_DEGREE)
            .map(|j| libm::cos(PI * (j as f64 + 0.5) / (CHEB_DEGREE + 1) as f64))
            .collect();
        let mut panels = Vec::with_capacity(count);
        let mut panel_max = Vec::with_capacity(count);
        let mut interpolation_error = 0.0f64;
        for p in 0..count {
            let (w0, w1) = (p as f64 * PANEL_WIDTH, (p + 1) as f64 * PANEL_WIDTH);
            let mut vals = [0.0; CHEB_DEGREE + 1];
            for (v, &t) in vals.iter_mut().zip(&nodes) {
                let w = 0.5 * (w0 + w1) + 0.5 * (w1 - w0) * t;
                *v = hankel_transform(bump, &cert, order, w * w)?.value;
            }
            let n = (CHEB_DEGREE + 1) as f64;
            let mut coef = [0.0; CHEB_DEGREE + 1];
            for (k, c) in coef.iter_mut().enumerate() {
                let mut s = 0.0;
                for (j, v) in vals.iter().enumerate() {
                    s += v * libm::cos(PI * k as f64 * (j as f64 + 0.5) / n);
                }
                *c = 2.0 * s / n;
            }
            coef[0] *= 0.5;
            interpolation_error = interpolation_error.max(coef[CHEB_DEGREE].abs() + coef[CHEB_DEGREE - 1].abs());
            panel_max.push(coef.iter().map(|c| c.abs()).sum());
            panels.push(coef);
        }
        Ok(Self { kernel, order, phase, sqrt_max, panels, panel_max, interpolation_error })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn z_max(&self) -> f64 {
        self.sqrt_max * self.sqrt_max
    }

    pub fn phase(&self) -> QuarterTurn {
        self.phase
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// H(z) from the table, 0 beyond it.
    pub fn eval(&self, z: f64) -> f64 {
        let w = libm::sqrt(z.max(0.0));
        let p = (w / PANEL_WIDTH) as usize;
        let Some(coef) = self.panels.get(p) else {
            return 0.0;
        };
        let w0 = p as f64 * PANEL_WIDTH;
        let t = 2.0 * (w - w0) / PANEL_WIDTH - 1.0;
        // Clenshaw
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in coef.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + coef[0]
    }

    /// Bound on |H| over [z, z_max] from the panel coefficient sums.
    pub fn max_beyond(&self, z: f64) -> f64 {
        let p = (libm::sqrt(z.max(0.0)) / PANEL_WIDTH) as usize;
        self.panel_max.iter().skip(p).fold(0.0, |m, &v| m.max(v))
    }

    /// Per-panel bounds on |H|; panel p covers √z ∈ [p/2, (p+1)/2].
    pub fn panel_bounds(&self) -> &[f64] {
        &self.panel_max
    }

    /// Panel holding z (may be past the end of the table).
    pub fn panel_index(z: f64) -> usize {
        (libm::sqrt(z.max(0.0)) / PANEL_WIDTH) as usize
    }

    pub fn panel_start(p: usize) -> f64 {
        let w = p as f64 * PANEL_WIDTH;
        w * w
    }

    /// Smallest tabulated z with |H| <= tol from there to z_max.
    pub fn cutoff(&self, tol: f64) -> Option<f64> {
        let mut p = self.panel_max.len();
        while p > 0 && self.panel_max[p - 1] <= tol {
            p -= 1;
        }
        (p < self.panel_max.len()).then(|| {
            let w = p as f64 * PANEL_WIDTH;
            w * w
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turns_are_exact() {
        let z = Complex64::new(0.3, -1.7);
        for k in -8..8 {
            let direct = Complex64::new(0.0, 1.0).powi(k as i32) * z;
            assert!((QuarterTurn::new(k).apply(z) - direct).norm() < 1e-15);
        }
        assert_eq!(QuarterTurn::new(12).to_complex(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn kernels() {
        let k = Kernel::Holomorphic { weight: 12 };
        assert_eq!(k.eval(Sign::Minus, 3.0).unwrap(), Complex64::new(0.0, 0.0));
        let v = k.eval(Sign::Plus, 20.0).unwrap();
        assert!((v.re - 2.0 * PI * bessel_j(11.0, 20.0).unwrap()).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
        let m = Kernel::Maass { kappa: 9.53 };
        assert!(matches!(m.eval(Sign::Plus, 1.0), Err(Error::UnsupportedKernel(_))));
        let p = VringParams { b: 1, q: 1, m: 10.0, n: 10.0 };
        assert!(matches!(vring_pm(&m, Sign::Minus, &p, 1.0, 0), Err(Error::UnsupportedKernel(_))));
    }

    #[test]
    fn zero_profile_and_empty_support() {
        let cert = SmoothCertificate::scaled_bump(10.0).unwrap();
        assert_eq!(hankel_transform(|_| 0.0, &cert, 11.0, 3.0).unwrap().value, 0.0);
        let k = Kernel::Holomorphic { weight: 12 };
        let p = VringParams { b: 1, q: 10, m: 5.0, n: 5.0 };
        assert_eq!(vring_pm(&k, Sign::Plus, &p, 2.0, 2).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(vring_pm(&k, Sign::Minus, &p, 2.0, 0).unwrap(), Complex64::new(0.0, 0.0));
    }

    /// Midpoint sum with 10^6 nodes.
    fn riemann(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 1_000_000;
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn matches_dense_riemann_sum() {
        let x = 7.0;
        let cert = SmoothCertificate::scaled_bump(x).unwrap();
        let f = |t: f64| bump(t / x);
        for y in [0.05, 0.8, 6.0] {
            let got = hankel_transform(f, &cert, 11.0, y).unwrap();
            let want = riemann(|t| f(t) * bessel_j(11.0, 4.0 * PI * (t * y).sqrt()).unwrap(), 3.5, 21.0);
            assert!((got.value - want).abs() < 1e-8, "y={y} {} {want}", got.value);
            assert!(got.value.abs() <= 10.0 * got.envelope);
        }
    }

    #[test]
    fn decays_beyond_cutoff() {
        let x = 10.0;
        let cert = SmoothCertificate::scaled_bump(x).unwrap();
        let v = hankel_transform(|t| bump(t / x), &cert, 11.0, 500.0).unwrap();
        assert!(v.value.abs() <= 1e-8, "{}", v.value);
    }

    #[test]
    fn halving_panels_is_stable() {
        let cert = SmoothCertificate::scaled_bump(3.0).unwrap();
        let f = |t: f64| bump(t / 3.0);
        let coarse = hankel_transform(f, &cert, 11.0, 4.0).unwrap().value;
        let fine = integrate(
            |t| f(t) * bessel_j(11.0, 4.0 * PI * (t * 4.0).sqrt()).unwrap(),
            1.5,
            9.0,
            1e-13,
            400,
        )
        .unwrap()
        .value;
        assert!((coarse - fine).abs() < 1e-10);
    }

    #[test]
    fn fourier_of_bump() {
        let total = integrate(bump, 0.5, 3.0, 1e-14, 8).unwrap().value;
        let w0 = bump_fourier(0.0).unwrap();
        assert!((w0.re - total).abs() < 1e-12 && w0.im.abs() < 1e-15);
        // W is symmetric about neither point, but |Ŵ| decays fast
        assert!(bump_fourier(40.0).unwrap().norm() < 1e-6);
        let g = FourierGrid::new(0.25, 8).unwrap();
        assert_eq!(g.at(-3).unwrap(), g.at(3).unwrap().conj());
        assert!(g.at(9).is_none());
    }

    #[test]
    fn profile_interpolates() {
        let prof = HankelProfile::new(Kernel::Holomorphic { weight: 12 }, 400.0).unwrap();
        let cert = SmoothCertificate::scaled_bump(1.0).unwrap();
        for z in [0.01, 0.7, 3.3, 17.0, 101.0, 333.3] {
            let direct = hankel_transform(bump, &cert, 11.0, z).unwrap().value;
            assert!((prof.eval(z) - direct).abs() < 1e-11, "z={z}");
        }
        assert!(prof.interpolation_error < 1e-12);
        assert_eq!(prof.eval(1e6), 0.0);
    }
}
