//! Numerical check of Voronoi summation with a coprimality condition,
//!
//! Σ_{(n,q)=1} λ(n)V(n)e(bn/d)
//!   = Σ_δ ϖ_λ(δ,q)/(δd′) Σ_n λ(n) 𝓥̊(n/(δd′²)) e(-conj(δ′b)n/d′),
//!
//! for holomorphic f of weight k, V(x) = W(x/X), δ′ = δ/(δ,d), d′ = d/(δ,d)
//! and 𝓥̊(y) = ∫V(x)2πi^k J_{k-1}(4π√(xy))dx = 2πi^k X·H(Xy).

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::arith::{gcd, mod_inv, SieveCache};
use crate::eigenform::{EigenformData, VarpiTable};
use crate::error::invalid;
use crate::special::bump;
use crate::special::hankel::{decay_constant, HankelProfile, Kernel, MAX_DECAY_ORDER};
use crate::{Error, Result};

/// The RHS tail must be certified below this after the safety factor.
pub const TAIL_TOLERANCE: f64 = 1e-8;
pub const SAFETY_FACTOR: f64 = 10.0;
/// Extent of the tabulated profile H.
pub const PROFILE_Z_MAX: f64 = 6e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiCase {
    pub b: i64,
    pub d: u64,
    pub q: u64,
    /// V(x) = W(x/X), supported on [X/2, 3X].
    pub x: f64,
}

impl VoronoiCase {
    pub fn new(b: i64, d: u64, q: u64, x: f64) -> Result<Self> {
        if d == 0 || q == 0 {
            return Err(invalid!("d and q must be positive"));
        }
        if !(x >= 1.0 && x.is_finite()) {
            return Err(invalid!("X must be finite and >= 1"));
        }
        if gcd(b.rem_euclid(d as i64) as u64, d) != 1 {
            return Err(Error::NotCoprime(alloc::format!("(b,d)=({b},{d})")));
        }
        Ok(Self { b, d, q, x })
    }
}

/// Which way the dual additive phase turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualPhase {
    /// e(-conj(δ′b)n/d′), the holomorphic level-one convention.
    Inverse,
    /// e(+conj(δ′b)n/d′).
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsValue {
    pub value: Complex64,
    /// Certified bound on the dropped terms, before the safety factor.
    pub tail: f64,
    /// Part of `tail` from beyond the tabulated profile.
    pub analytic_tail: f64,
    pub terms: u64,
    /// Largest dual index summed.
    pub n_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiResidual {
    pub case: VoronoiCase,
    pub lhs: Complex64,
    pub rhs: RhsValue,
    pub residual: f64,
}

/// The tabulated transform profile and its decay constants, shared by all
/// cases with the same weight.
#[derive(Debug, Clone)]
pub struct VoronoiLab {
    profile: HankelProfile,
    /// (j, C_j) with |H(z)| <= C_j/(16π²z)^j.
    decay: Vec<(u32, f64)>,
    /// Bound on |H| over panel p and beyond, within the table.
    panel_bound: Vec<f64>,
    /// τ(n) for the dual indices covered by the table.
    tau: Vec<u32>,
}

impl VoronoiLab {
    pub fn new(weight: u32) -> Result<Self> {
        Self::with_extent(weight, PROFILE_Z_MAX)
    }

    pub fn with_extent(weight: u32, z_max: f64) -> Result<Self> {
        let kernel = Kernel::Holomorphic { weight };
        let profile = HankelProfile::new(kernel, z_max)?;
        let nu = profile.order();
        let decay = (1..=MAX_DECAY_ORDER)
            .map(|j| Ok((j, decay_constant(nu, j)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut lab = Self { profile, decay, panel_bound: Vec::new(), tau: Vec::new() };
        let raw = lab.profile.panel_bounds();
        let mut bound = alloc::vec![0.0; raw.len()];
        let mut run = 0.0f64;
        for p in (0..raw.len()).rev() {
            run = run.max(raw[p]);
            bound[p] = run.min(lab.analytic_bound(HankelProfile::panel_start(p)));
        }
        lab.panel_bound = bound;
        Ok(lab)
    }

    /// Ensures τ(n) is tabulated up to n.
    fn divisor_counts(&mut self, n: u64) -> &[u32] {
        let n = n as usize;
        if self.tau.len() <= n {
            let mut tau = alloc::vec![0u32; n + 1];
            for i in 1..=n {
                for j in (i..=n).step_by(i) {
                    tau[j] += 1;
                }
            }
            self.tau = tau;
        }
        &self.tau
    }

    /// Tabulates τ far enough for every case with d′ <= d_max, δ <= delta_max
    /// and X >= x_min, so later calls need no mutable access.
    pub fn reserve(&mut self, delta_max: u64, d_max: u64, x_min: f64) {
        let n = libm::floor(self.profile.z_max() * (delta_max * d_max * d_max) as f64 / x_min) as u64;
        self.divisor_counts(n);
    }

    pub fn profile(&self) -> &HankelProfile {
        &self.profile
    }

    /// min_j C_j/(16π²z)^j.
    pub fn analytic_bound(&self, z: f64) -> f64 {
        let a = 16.0 * PI * PI * z;
        self.decay
            .iter()
            .map(|&(j, c)| c / libm::pow(a, f64::from(j)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bound on Σ_{n > N} d(n)|H(n/r)| for n beyond the table, r = δd′²/X.
    ///
    /// With D(t) = Σ_{n<=t} d(n) <= t(ln t + 1) partial summation gives
    /// Σ_{n>N} d(n)n^{-j} <= j/(j-1)·N^{1-j}(ln N + 1 + 1/(j-1)).
    fn analytic_tail(&self, n0: u64, r: f64) -> f64 {
        let n = n0.max(3) as f64;
        let a = 16.0 * PI * PI / r;
        self.decay
            .iter()
            .filter(|&&(j, _)| j >= 2)
            .map(|&(j, c)| {
                let j = f64::from(j);
                c / libm::pow(a, j) * j / (j - 1.0) * libm::pow(n, 1.0 - j) * (libm::log(n) + 1.0 + 1.0 / (j - 1.0))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn check_form(&self, f: &EigenformData) -> Result<()> {
        match f.kind() {
            crate::eigenform::FormKind::Holomorphic { weight } if Kernel::Holomorphic { weight } == self.profile.kernel() => Ok(()),
            _ => Err(invalid!("form does not match the tabulated kernel")),
        }
    }
}

/// Σ_{(n,q)=1} λ(n)W(n/X)e(bn/d) by direct summation.
pub fn voronoi_lhs(case: &VoronoiCase, f: &EigenformData) -> Result<Complex64> {
    let lo = libm::ceil(case.x / 2.0).max(1.0) as u64;
    let hi = libm::floor(3.0 * case.x) as u64;
    f.require(hi)?;
    let d = case.d as i64;
    let mut s = Complex64::new(0.0, 0.0);
    for n in lo..=hi {
        if gcd(n, case.q) != 1 {
            continue;
        }
        let w = bump(n as f64 / case.x);
        if w == 0.0 {
            continue;
        }
        let t = TAU * (case.b.rem_euclid(d) * (n as i64 % d)).rem_euclid(d) as f64 / d as f64;
        s += Complex64::new(libm::cos(t), libm::sin(t)) * (f.lambda(n)? * w);
    }
    Ok(s)
}

/// One δ-term of the dual side with its truncation.
struct DualTerm {
    weight: f64,
    r: f64,
    d_prime: u64,
    /// conj(δ′b) mod d′.
    numerator: u64,
    n_cut: u64,
}

fn dual_terms(lab: &VoronoiLab, case: &VoronoiCase, f: &EigenformData) -> Result<(Vec<DualTerm>, f64, f64)> {
    let varpi = VarpiTable::new(f, case.q)?;
    let z_max = lab.profile.z_max();
    let mut terms = Vec::new();
    let mut beyond = Vec::new();
    for e in varpi.entries.iter().filter(|e| e.lambda != 0.0) {
        let g = gcd(e.delta, case.d);
        let (delta_p, d_prime) = (e.delta / g, case.d / g);
        let numerator = if d_prime == 1 {
            0
        } else {
            let db = (delta_p % d_prime) as i64 * case.b.rem_euclid(d_prime as i64) % d_prime as i64;
            mod_inv(db, d_prime).ok_or_else(|| Error::NotCoprime(alloc::format!("δ′b mod d′ = {db} mod {d_prime}")))?
        };
        let r = (e.delta * d_prime * d_prime) as f64 / case.x;
        let weight = 2.0 * PI * case.x * e.lambda / (e.delta * d_prime) as f64;
        // n with n/r <= z_max are bounded from the table, the rest analytically
        let n_tab = libm::floor(z_max * r) as u64;
        beyond.push(weight.abs() * lab.analytic_tail(n_tab, r));
        terms.push(DualTerm { weight, r, d_prime, numerator, n_cut: n_tab });
    }
    let analytic: f64 = beyond.iter().sum();
    let total = TAIL_TOLERANCE / SAFETY_FACTOR;
    if analytic >= total {
        return Err(Error::TailCertificate(alloc::format!(
            "bound beyond the tabulated profile {analytic:e} exceeds {total:e}"
        )));
    }
    // what is left is shared equally by the tabulated tails
    let budget = (total - analytic) / terms.len().max(1) as f64;
    let mut tail = analytic;
    for t in &mut terms {
        let n_tab = t.n_cut;
        let local;
        let tau: &[u32] = if lab.tau.len() > n_tab as usize {
            &lab.tau
        } else {
            local = SieveCache::new(n_tab as u32 + 1).divisor_count_table();
            &local
        };
        // suffix sums of d(n)·min(panel max, analytic bound), from the top down
        let mut acc = 0.0;
        while t.n_cut > 0 {
            let p = HankelProfile::panel_index(t.n_cut as f64 / t.r);
            let h = lab.panel_bound.get(p).copied().unwrap_or(0.0);
            let next = acc + t.weight.abs() * f64::from(tau[t.n_cut as usize]) * h;
            if next > budget {
                break;
            }
            acc = next;
            t.n_cut -= 1;
        }
        tail += acc;
    }
    Ok((terms, tail, analytic))
}

/// The dual side, truncated where the certified tail drops below
/// `TAIL_TOLERANCE / SAFETY_FACTOR`.
pub fn voronoi_rhs(lab: &VoronoiLab, case: &VoronoiCase, f: &EigenformData) -> Result<RhsValue> {
    voronoi_rhs_with(lab, case, f, DualPhase::Inverse)
}

pub fn voronoi_rhs_with(lab: &VoronoiLab, case: &VoronoiCase, f: &EigenformData, phase: DualPhase) -> Result<RhsValue> {
    lab.check_form(f)?;
    let (terms, tail, analytic_tail) = dual_terms(lab, case, f)?;
    let n_max = terms.iter().map(|t| t.n_cut).max().unwrap_or(0);
    f.require(n_max)?;
    let sign = match phase {
        DualPhase::Inverse => -1.0,
        DualPhase::Direct => 1.0,
    };
    let (value, count) = dual_sum(lab, f, &terms, sign, |t| (1, t.n_cut))?;
    Ok(RhsValue { value, tail, analytic_tail, terms: count, n_max })
}

/// Σ over each δ-term of the dual indices in `range(term)`.
fn dual_sum(
    lab: &VoronoiLab,
    f: &EigenformData,
    terms: &[DualTerm],
    sign: f64,
    range: impl Fn(&DualTerm) -> (u64, u64),
) -> Result<(Complex64, u64)> {
    let rotation = lab.profile.phase();
    let mut value = Complex64::new(0.0, 0.0);
    let mut count = 0;
    for t in terms {
        let dp = t.d_prime;
        let (lo, hi) = range(t);
        let mut s = Complex64::new(0.0, 0.0);
        for n in lo..=hi {
            let h = lab.profile.eval(n as f64 / t.r);
            if h == 0.0 {
                continue;
            }
            let k = (t.numerator as u128 * (n % dp) as u128 % dp as u128) as f64;
            let a = sign * TAU * k / dp as f64;
            s += Complex64::new(libm::cos(a), libm::sin(a)) * (f.lambda(n)? * h);
            count += 1;
        }
        value += rotation.apply(s * t.weight);
    }
    Ok((value, count))
}

/// |lhs - rhs|.
pub fn voronoi_check(lab: &VoronoiLab, case: &VoronoiCase, f: &EigenformData) -> Result<VoronoiResidual> {
    let lhs = voronoi_lhs(case, f)?;
    let rhs = voronoi_rhs(lab, case, f)?;
    Ok(VoronoiResidual { case: *case, lhs, rhs, residual: (lhs - rhs.value).norm() })
}

/// λ-table length that covers every case of a grid.
pub fn required_table(lab: &VoronoiLab, cases: &[VoronoiCase], f: &EigenformData) -> Result<u64> {
    let mut need = 0;
    for c in cases {
        need = need.max(libm::floor(3.0 * c.x) as u64);
        let (terms, _, _) = dual_terms(lab, c, f)?;
        need = terms.iter().map(|t| t.n_cut).fold(need, u64::max);
    }
    Ok(need)
}

/// The acceptance grid: d <= 5, every b mod d coprime to d, q ∈ {1,2,3,6},
/// X ∈ {10,20,40}.
pub fn acceptance_grid() -> Vec<VoronoiCase> {
    let mut out = Vec::new();
    for d in 1..=5u64 {
        for b in 0..d as i64 {
            if gcd(b as u64, d) != 1 {
                continue;
            }
            for q in [1u64, 2, 3, 6] {
                for x in [10.0, 20.0, 40.0] {
                    out.push(VoronoiCase { b, d, q, x });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn lab() -> &'static VoronoiLab {
        static LAB: OnceLock<VoronoiLab> = OnceLock::new();
        LAB.get_or_init(|| {
            let mut lab = VoronoiLab::new(12).unwrap();
            lab.reserve(36, 5, 10.0);
            lab
        })
    }

    fn delta() -> &'static EigenformData {
        static F: OnceLock<EigenformData> = OnceLock::new();
        F.get_or_init(|| EigenformData::delta(800_000).unwrap())
    }

    #[test]
    fn divisor_prefix_bound() {
        let tau = SieveCache::new(1_000_001).divisor_count_table();
        let mut d = 0u64;
        for t in 1..=1_000_000u64 {
            d += u64::from(tau[t as usize]);
            let tf = t as f64;
            assert!((d as f64) <= tf * (tf.ln() + 1.0), "t={t}");
        }
    }

    #[test]
    fn analytic_bound_dominates_table() {
        let lab = lab();
        for z in [5.0, 50.0, 500.0, 5000.0, 20000.0] {
            assert!(lab.profile().eval(z).abs() <= lab.analytic_bound(z));
        }
    }

    #[test]
    fn lhs_basics() {
        let f = delta();
        let c = VoronoiCase::new(0, 1, 1, 10.0).unwrap();
        let direct: f64 = (5..=30u64).map(|n| f.lambda(n).unwrap() * bump(n as f64 / 10.0)).sum();
        assert!((voronoi_lhs(&c, f).unwrap() - direct).norm() < 1e-13);
        // reversed order of summation
        let c = VoronoiCase::new(2, 5, 6, 40.0).unwrap();
        let mut rev = Complex64::new(0.0, 0.0);
        for n in (20..=120u64).rev() {
            if gcd(n, 6) == 1 {
                let t = TAU * (2 * n % 5) as f64 / 5.0;
                rev += Complex64::new(t.cos(), t.sin()) * f.lambda(n).unwrap() * bump(n as f64 / 40.0);
            }
        }
        assert!((voronoi_lhs(&c, f).unwrap() - rev).norm() < 1e-12);
        assert!(VoronoiCase::new(2, 4, 1, 10.0).is_err());
    }

    #[test]
    fn spec_examples() {
        let (lab, f) = (lab(), delta());
        for (b, d, q, x) in [(0i64, 1u64, 1u64, 10.0), (1, 3, 1, 20.0), (3, 4, 6, 30.0)] {
            let r = voronoi_check(lab, &VoronoiCase::new(b, d, q, x).unwrap(), f).unwrap();
            assert!(r.residual <= 1e-6, "{r:?}");
            assert!(r.rhs.tail * SAFETY_FACTOR <= TAIL_TOLERANCE);
        }
    }

    #[test]
    fn dual_phase_sign() {
        // for d′ >= 3 the two conventions differ; only one matches
        let (lab, f) = (lab(), delta());
        let case = VoronoiCase::new(1, 5, 1, 20.0).unwrap();
        let lhs = voronoi_lhs(&case, f).unwrap();
        let inverse = voronoi_rhs_with(lab, &case, f, DualPhase::Inverse).unwrap().value;
        let direct = voronoi_rhs_with(lab, &case, f, DualPhase::Direct).unwrap().value;
        assert!((lhs - inverse).norm() < 1e-6);
        assert!((lhs - direct).norm() > 1e-3);
    }

    #[test]
    fn doubling_the_truncation_stays_inside_the_certificate() {
        let (lab, f) = (lab(), delta());
        for (b, d, q, x) in [(1i64, 3u64, 1u64, 20.0), (3, 4, 6, 30.0), (2, 5, 2, 10.0)] {
            let case = VoronoiCase::new(b, d, q, x).unwrap();
            let (terms, tail, _) = dual_terms(lab, &case, f).unwrap();
            let (extra, _) =
                dual_sum(lab, f, &terms, -1.0, |t| (t.n_cut + 1, (2 * t.n_cut).min(f.n_max()))).unwrap();
            assert!(extra.norm() <= tail, "{case:?}: {} > {tail}", extra.norm());
        }
    }

    #[test]
    fn dual_sum_is_order_independent() {
        let (lab, f) = (lab(), delta());
        let case = VoronoiCase::new(3, 4, 6, 30.0).unwrap();
        let forward = voronoi_rhs(lab, &case, f).unwrap().value;
        let (terms, _, _) = dual_terms(lab, &case, f).unwrap();
        let rotation = lab.profile().phase();
        let mut backward = Complex64::new(0.0, 0.0);
        for t in terms.iter().rev() {
            let dp = t.d_prime;
            for n in (1..=t.n_cut).rev() {
                let k = (t.numerator * (n % dp) % dp) as f64;
                let a = -TAU * k / dp as f64;
                let h = lab.profile().eval(n as f64 / t.r);
                backward += rotation.apply(Complex64::new(a.cos(), a.sin()) * f.lambda(n).unwrap() * h * t.weight);
            }
        }
        assert!((forward - backward).norm() <= 1e-10);
    }

    #[test]
    fn smallest_support() {
        assert!(VoronoiCase::new(0, 1, 1, 0.4).is_err());
        let f = delta();
        let c = VoronoiCase::new(0, 1, 2, 1.0).unwrap();
        // odd n in [1/2, 3]: W(1) = 1, W(3) = 0
        assert!((voronoi_lhs(&c, f).unwrap() - 1.0).norm() < 1e-15);
    }
}
