//! Dirichlet character groups built from prime-power components.
//!
//! Characters are indexed by exponent vectors on fixed generators: a primitive
//! root for odd prime powers, `-1` for 4, and `-1, 5` for `2^e` with `e >= 3`.
//! Index order is lexicographic in the exponent vector, first component most
//! significant. Values are stored exactly as numerators over the group
//! exponent `L`, so `χ(x) = e(k/L)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::{self, factorize, gcd};
use crate::error::invalid;
use crate::{Error, Result};

/// Marker stored in the exponent table for residues not coprime to `q`.
pub const NON_UNIT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// σ = χ(-1).
    pub fn sign(self) -> i64 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    /// The gamma-factor shift: 0 for even characters, 1 for odd.
    pub fn shift(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn from_sign(sigma: i64) -> Result<Self> {
        match sigma {
            1 => Ok(Parity::Even),
            -1 => Ok(Parity::Odd),
            _ => Err(invalid!("parity must be +1 or -1, got {sigma}")),
        }
    }
}

/// One prime-power factor of `(Z/qZ)^*` with its generators.
#[derive(Debug, Clone)]
pub struct Component {
    pub prime: u64,
    pub exponent: u32,
    pub modulus: u64,
    /// (generator, order) pairs.
    pub generators: Vec<(u64, u64)>,
    /// Discrete logs for each residue mod `modulus`, `None` on non-units.
    logs: Vec<Option<Vec<u64>>>,
}

impl Component {
    fn new(prime: u64, exponent: u32) -> Result<Self> {
        let modulus = prime.pow(exponent);
        let m = modulus as usize;
        let mut logs: Vec<Option<Vec<u64>>> = vec![None; m];
        let generators;
        if prime == 2 {
            match exponent {
                1 => {
                    generators = Vec::new();
                    logs[1] = Some(Vec::new());
                }
                2 => {
                    generators = vec![(3, 2)];
                    logs[1] = Some(vec![0]);
                    logs[3] = Some(vec![1]);
                }
                _ => {
                    let half = modulus / 4;
                    generators = vec![(modulus - 1, 2), (5, half)];
                    let mut five_pow = 1u64;
                    for b in 0..half {
                        logs[five_pow as usize] = Some(vec![0, b]);
                        logs[(modulus - five_pow) as usize] = Some(vec![1, b]);
                        five_pow = five_pow * 5 % modulus;
                    }
                }
            }
        } else {
            let order = (prime - 1) * prime.pow(exponent - 1);
            let g = primitive_root_prime_power(prime, exponent)?;
            generators = vec![(g, order)];
            let mut x = 1u64;
            for j in 0..order {
                logs[x as usize] = Some(vec![j]);
                x = x * g % modulus;
            }
        }
        Ok(Self {
            prime,
            exponent,
            modulus,
            generators,
            logs,
        })
    }

    fn logs_of(&self, x: u64) -> Option<&[u64]> {
        self.logs[(x % self.modulus) as usize].as_deref()
    }

    /// Exponent of the conductor of the component character with the given
    /// generator exponents.
    fn conductor_exponent(&self, js: &[u64]) -> u32 {
        if self.prime == 2 {
            match self.exponent {
                1 => 0,
                2 => {
                    if js[0] == 0 {
                        0
                    } else {
                        2
                    }
                }
                e => {
                    let (a, b) = (js[0], js[1]);
                    if b == 0 {
                        if a == 0 {
                            0
                        } else {
                            2
                        }
                    } else {
                        e - b.trailing_zeros()
                    }
                }
            }
        } else {
            let j = js[0];
            if j == 0 {
                return 0;
            }
            let mut v = 0;
            let mut jj = j;
            while jj % self.prime == 0 {
                jj /= self.prime;
                v += 1;
            }
            self.exponent - v
        }
    }

    /// Whether the component character sends -1 to -1.
    fn is_odd(&self, js: &[u64]) -> bool {
        if self.prime == 2 {
            match self.exponent {
                1 => false,
                _ => js[0] == 1,
            }
        } else {
            js[0] % 2 == 1
        }
    }
}

fn primitive_root_prime_power(p: u64, e: u32) -> Result<u64> {
    let phi_p = p - 1;
    let fac = factorize(phi_p)?;
    let is_root_mod_p = |g: u64| fac.primes().all(|r| arith::pow_mod(g, phi_p / r, p) != 1);
    let g = (2..p)
        .find(|&g| is_root_mod_p(g))
        .ok_or_else(|| invalid!("no primitive root mod {p}"))?;
    if e == 1 {
        return Ok(g);
    }
    // g lifts to every p^e unless g^{p-1} = 1 mod p^2
    if arith::pow_mod(g, p - 1, p * p) == 1 {
        Ok(g + p)
    } else {
        Ok(g)
    }
}

/// Metadata of one character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterInfo {
    pub index: usize,
    /// Exponents on the generators, component by component.
    pub exponents: Vec<u64>,
    pub conductor: u64,
    pub parity: Parity,
    pub primitive: bool,
}

/// The group structure of `(Z/qZ)^*` without the full value table. Cheap
/// enough to enumerate characters for moduli in the tens of thousands.
#[derive(Debug, Clone)]
pub struct GroupStructure {
    modulus: u64,
    components: Vec<Component>,
    /// Orders of all generators in index order.
    orders: Vec<u64>,
    exponent: u64,
}

impl GroupStructure {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(invalid!("modulus must be positive"));
        }
        let fq = factorize(q)?;
        let mut components = Vec::new();
        for &(p, e) in fq.factors() {
            components.push(Component::new(p, e)?);
        }
        let orders: Vec<u64> = components
            .iter()
            .flat_map(|c| c.generators.iter().map(|&(_, o)| o))
            .collect();
        let exponent = orders.iter().fold(1u64, |acc, &o| arith::lcm(acc, o));
        Ok(Self {
            modulus: q,
            components,
            orders,
            exponent,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Least common multiple of the generator orders.
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    /// φ(q), the number of characters.
    pub fn order(&self) -> usize {
        self.orders.iter().product::<u64>() as usize
    }

    pub fn exponents_of(&self, index: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.orders.len()];
        let mut rest = index as u64;
        for (slot, &o) in out.iter_mut().zip(&self.orders).rev() {
            *slot = rest % o;
            rest /= o;
        }
        out
    }

    pub fn index_of(&self, exponents: &[u64]) -> usize {
        exponents
            .iter()
            .zip(&self.orders)
            .fold(0u64, |acc, (&j, &o)| acc * o + j) as usize
    }

    pub fn info(&self, index: usize) -> CharacterInfo {
        let exponents = self.exponents_of(index);
        let mut conductor = 1u64;
        let mut primitive = true;
        let mut odd = false;
        let mut offset = 0;
        for c in &self.components {
            let k = c.generators.len();
            let js = &exponents[offset..offset + k];
            offset += k;
            let ce = c.conductor_exponent(js);
            conductor *= c.prime.pow(ce);
            primitive &= ce == c.exponent;
            odd ^= c.is_odd(js);
        }
        CharacterInfo {
            index,
            exponents,
            conductor,
            parity: if odd { Parity::Odd } else { Parity::Even },
            primitive,
        }
    }

    pub fn characters(&self) -> impl Iterator<Item = CharacterInfo> + '_ {
        (0..self.order()).map(move |i| self.info(i))
    }

    /// Scaled logs of `x`: `Σ`-ready contributions `(L / ord_i) · log_i(x)`,
    /// or `None` if `x` is not a unit.
    fn scaled_logs(&self, x: u64) -> Option<Vec<u64>> {
        let mut out = Vec::with_capacity(self.orders.len());
        let mut k = 0;
        for c in &self.components {
            let logs = c.logs_of(x)?;
            for &l in logs {
                out.push(l * (self.exponent / self.orders[k]));
                k += 1;
            }
        }
        Some(out)
    }
}

/// Full character table mod `q`.
#[derive(Debug, Clone)]
pub struct CharacterGroup {
    structure: GroupStructure,
    infos: Vec<CharacterInfo>,
    /// Row-major `φ(q) × q` exponent table, [`NON_UNIT`] on non-units.
    table: Vec<u32>,
    roots: Vec<Complex64>,
    conj: Vec<usize>,
}

impl CharacterGroup {
    pub fn new(q: u64) -> Result<Self> {
        let structure = GroupStructure::new(q)?;
        let n_chars = structure.order();
        let qs = q as usize;
        let l = structure.exponent();
        if l > u64::from(u32::MAX - 1) {
            return Err(invalid!("group exponent {l} does not fit the table"));
        }
        let mut table = vec![NON_UNIT; n_chars * qs];
        for x in 0..q {
            let Some(logs) = structure.scaled_logs(x) else {
                continue;
            };
            for chi in 0..n_chars {
                let js = structure.exponents_of(chi);
                let e = js
                    .iter()
                    .zip(&logs)
                    .fold(0u64, |acc, (&j, &c)| (acc + j * c) % l);
                table[chi * qs + x as usize] = e as u32;
            }
        }
        let infos: Vec<CharacterInfo> = structure.characters().collect();
        let conj = (0..n_chars)
            .map(|i| {
                let js = structure.exponents_of(i);
                let neg: Vec<u64> = js
                    .iter()
                    .zip(&structure.orders)
                    .map(|(&j, &o)| (o - j) % o)
                    .collect();
                structure.index_of(&neg)
            })
            .collect();
        Ok(Self {
            roots: roots_of_unity(l),
            structure,
            infos,
            table,
            conj,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.structure.modulus
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    pub fn exponent(&self) -> u64 {
        self.structure.exponent
    }

    pub fn len(&self) -> usize {
        self.infos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infos.is_empty()
    }

    pub fn info(&self, chi: usize) -> &CharacterInfo {
        &self.infos[chi]
    }

    pub fn infos(&self) -> &[CharacterInfo] {
        &self.infos
    }

    /// Row-major exponent table, `len() × modulus()` entries.
    pub fn exponent_table(&self) -> &[u32] {
        &self.table
    }

    pub fn row(&self, chi: usize) -> &[u32] {
        let q = self.modulus() as usize;
        &self.table[chi * q..(chi + 1) * q]
    }

    /// χ(x) as an exact exponent over [`Self::exponent`], `None` off units.
    pub fn value_exponent(&self, chi: usize, x: i64) -> Option<u32> {
        let q = self.modulus() as i64;
        let e = self.row(chi)[x.rem_euclid(q) as usize];
        (e != NON_UNIT).then_some(e)
    }

    pub fn value(&self, chi: usize, x: i64) -> Complex64 {
        match self.value_exponent(chi, x) {
            Some(e) => self.roots[e as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `e(k / L)` for `0 <= k < L`.
    pub fn root(&self, k: u32) -> Complex64 {
        self.roots[k as usize]
    }

    pub fn conjugate(&self, chi: usize) -> usize {
        self.conj[chi]
    }

    pub fn primitive(&self) -> impl Iterator<Item = &CharacterInfo> + '_ {
        self.infos.iter().filter(|i| i.primitive)
    }

    pub fn primitive_with_parity(
        &self,
        parity: Parity,
    ) -> impl Iterator<Item = &CharacterInfo> + '_ {
        self.primitive().filter(move |i| i.parity == parity)
    }

    /// Index of the trivial (principal) character.
    pub fn principal(&self) -> usize {
        0
    }

    /// Σ* over primitive χ with the given parity of χ(m)·conj(χ(n)), by
    /// direct enumeration.
    pub fn primitive_parity_sum(&self, m: i64, n: i64, parity: Parity) -> Complex64 {
        let l = self.exponent() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for info in self.primitive_with_parity(parity) {
            if let (Some(a), Some(b)) = (
                self.value_exponent(info.index, m),
                self.value_exponent(info.index, n),
            ) {
                acc += self.roots[(i64::from(a) - i64::from(b)).rem_euclid(l) as usize];
            }
        }
        acc
    }

    /// Rebuilds a group from a raw exponent table (for example one loaded
    /// from disk). The table is checked against a fresh construction.
    pub fn from_table(q: u64, exponent: u64, table: &[u32]) -> Result<Self> {
        let group = Self::new(q)?;
        if group.exponent() != exponent || group.table.as_slice() != table {
            return Err(Error::Validation(alloc::format!(
                "character table for q = {q} does not match the canonical construction"
            )));
        }
        Ok(group)
    }

    /// Conductor read off the value table: the least `c | q` such that χ is
    /// trivial on units congruent to 1 mod `c`.
    pub fn conductor_from_values(&self, chi: usize) -> u64 {
        let q = self.modulus();
        let row = self.row(chi);
        let divisors = arith::divisors(q).unwrap_or_default();
        for c in divisors {
            let trivial = (0..q)
                .filter(|&x| x % c == 1 % c && row[x as usize] != NON_UNIT)
                .all(|x| row[x as usize] == 0);
            if trivial {
                return c;
            }
        }
        q
    }
}

fn roots_of_unity(l: u64) -> Vec<Complex64> {
    (0..l)
        .map(|k| {
            let theta = 2.0 * PI * (k as f64) / (l as f64);
            Complex64::new(libm::cos(theta), libm::sin(theta))
        })
        .collect()
}

/// Gauss-sum data of a primitive character.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussData {
    pub index: usize,
    /// ε_χ = q^{-1/2} Σ_x χ(x) e(x/q).
    pub eps_chi: Complex64,
    /// ε(χ) = i^{-a} ε_χ with a = 0 for even, 1 for odd χ.
    pub root_number: Complex64,
}

/// Normalized Gauss sum of a primitive character, by direct summation.
pub fn gauss_eps(group: &CharacterGroup, chi: usize) -> Result<GaussData> {
    let info = group.info(chi);
    if !info.primitive {
        return Err(Error::NotPrimitive {
            modulus: group.modulus(),
            index: chi,
        });
    }
    let q = group.modulus();
    let mut acc = Complex64::new(0.0, 0.0);
    for x in 0..q {
        if let Some(e) = group.value_exponent(chi, x as i64) {
            acc += group.root(e) * additive_character(x as i64, q);
        }
    }
    let eps_chi = acc / libm::sqrt(q as f64);
    let root_number = match info.parity {
        Parity::Even => eps_chi,
        Parity::Odd => eps_chi * Complex64::new(0.0, -1.0),
    };
    Ok(GaussData {
        index: chi,
        eps_chi,
        root_number,
    })
}

/// e(x/c) = exp(2πi x/c) with the argument reduced mod `c` first.
pub fn additive_character(x: i64, c: u64) -> Complex64 {
    let r = x.rem_euclid(c as i64) as f64;
    let theta = 2.0 * PI * r / c as f64;
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

/// An exact half-integer `twice / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct HalfInteger {
    pub twice: i64,
}

impl HalfInteger {
    pub fn to_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }
}

fn divisor_phi_mu_sum(q: u64, g: u64) -> Result<i64> {
    let mut s = 0i64;
    for d in arith::divisors(g)? {
        let mu = arith::moebius(q / d)?;
        if mu != 0 {
            s += i64::from(mu) * arith::euler_phi(d)? as i64;
        }
    }
    Ok(s)
}

/// ½(Σ_{d|(q,m-n)} φ(d)μ(q/d) + σ Σ_{d|(q,m+n)} φ(d)μ(q/d)), which equals
/// the sum of χ(m)·conj(χ(n)) over primitive χ mod q with χ(-1) = σ.
pub fn orthogonality_sum(q: u64, m: i64, n: i64, parity: Parity) -> Result<HalfInteger> {
    if q == 0 {
        return Err(invalid!("modulus must be positive"));
    }
    let mn = (i128::from(m) * i128::from(n)).unsigned_abs();
    if gcd((mn % u128::from(q)) as u64, q) != 1 {
        return Err(Error::NotCoprime(alloc::format!(
            "(mn, q) = ({m}·{n}, {q}) > 1"
        )));
    }
    let diff = gcd(
        (i128::from(m) - i128::from(n))
            .unsigned_abs()
            .rem_euclid(u128::from(q)) as u64,
        q,
    );
    let sum = gcd(
        (i128::from(m) + i128::from(n))
            .unsigned_abs()
            .rem_euclid(u128::from(q)) as u64,
        q,
    );
    let a = divisor_phi_mu_sum(q, diff)?;
    let b = divisor_phi_mu_sum(q, sum)?;
    Ok(HalfInteger {
        twice: a + parity.sign() * b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(q: u64) -> (usize, usize, usize) {
        let g = CharacterGroup::new(q).unwrap();
        let prim = g.primitive().count();
        let prim_even = g.primitive_with_parity(Parity::Even).count();
        (g.len(), prim, prim_even)
    }

    #[test]
    fn build_examples() {
        assert_eq!(count(1), (1, 1, 1));
        assert_eq!(count(5), (4, 3, 1));
        assert_eq!(count(8).0, 4);
        assert_eq!(count(8).1, 2);
        assert!(CharacterGroup::new(0).is_err());
    }

    #[test]
    fn character_values_are_multiplicative_and_parity_consistent() {
        for q in 1..=120u64 {
            let g = CharacterGroup::new(q).unwrap();
            let l = g.exponent() as u64;
            for info in g.infos() {
                let chi = info.index;
                for x in 0..q as i64 {
                    for y in 0..q as i64 {
                        let (Some(a), Some(b)) =
                            (g.value_exponent(chi, x), g.value_exponent(chi, y))
                        else {
                            continue;
                        };
                        let c = g.value_exponent(chi, x * y).unwrap();
                        assert_eq!((u64::from(a) + u64::from(b)) % l, u64::from(c));
                    }
                }
                let at_minus_one = g.value_exponent(chi, q as i64 - 1).unwrap();
                let expected = match info.parity {
                    Parity::Even => 0,
                    Parity::Odd => (l / 2) as u32,
                };
                assert_eq!(at_minus_one, expected, "q={q} chi={chi}");
            }
        }
    }

    #[test]
    fn conductor_metadata_matches_values() {
        for q in 1..=100u64 {
            let g = CharacterGroup::new(q).unwrap();
            for info in g.infos() {
                assert_eq!(info.conductor, g.conductor_from_values(info.index), "q={q}");
                assert_eq!(info.primitive, info.conductor == q);
            }
        }
    }

    #[test]
    fn characters_lift_from_their_conductor() {
        for q in [12u64, 20, 36, 45, 48, 63, 64, 72, 100] {
            let g = CharacterGroup::new(q).unwrap();
            for info in g.infos() {
                let c = info.conductor;
                let h = CharacterGroup::new(c).unwrap();
                let found = h.primitive().any(|p| {
                    (0..q as i64)
                        .filter(|&x| g.value_exponent(info.index, x).is_some())
                        .all(|x| (g.value(info.index, x) - h.value(p.index, x)).norm() < 1e-12)
                });
                assert!(found, "q={q} chi={}", info.index);
            }
        }
    }

    #[test]
    fn phi_star_matches_enumeration() {
        for q in 1..=1000u64 {
            let s = GroupStructure::new(q).unwrap();
            let prim = s.characters().filter(|c| c.primitive).count() as u64;
            assert_eq!(prim, arith::phi_star(q).unwrap(), "q={q}");
        }
    }

    #[test]
    fn gauss_sum_examples() {
        let g = CharacterGroup::new(5).unwrap();
        let quad = g
            .primitive()
            .find(|i| {
                g.exponent() as u64 / 2 == 1 || (1..5).all(|x| g.value(i.index, x).im.abs() < 1e-14)
            })
            .unwrap();
        let data = gauss_eps(&g, quad.index).unwrap();
        assert!((data.eps_chi - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        let trivial = CharacterGroup::new(1).unwrap();
        let data = gauss_eps(&trivial, 0).unwrap();
        assert!((data.eps_chi - Complex64::new(1.0, 0.0)).norm() < 1e-14);

        let g = CharacterGroup::new(9).unwrap();
        let non_primitive = g.infos().iter().find(|i| !i.primitive).unwrap();
        assert!(matches!(
            gauss_eps(&g, non_primitive.index),
            Err(Error::NotPrimitive { .. })
        ));
    }

    #[test]
    fn gauss_sums_have_unit_modulus() {
        for q in (3..=500u64).filter(|&q| arith::is_admissible(q)).step_by(7) {
            let g = CharacterGroup::new(q).unwrap();
            for info in g.primitive() {
                let d = gauss_eps(&g, info.index).unwrap();
                assert!((d.eps_chi.norm() - 1.0).abs() < 1e-10, "q={q}");
            }
        }
    }

    #[test]
    fn orthogonality_examples() {
        assert_eq!(
            orthogonality_sum(5, 1, 1, Parity::Even).unwrap().to_f64(),
            1.0
        );
        assert_eq!(
            orthogonality_sum(5, 1, 1, Parity::Odd).unwrap().to_f64(),
            2.0
        );
        assert!(orthogonality_sum(5, 5, 1, Parity::Even).is_err());
        for p in [7u64, 11, 13, 101] {
            let g = CharacterGroup::new(p).unwrap();
            for n in 1..6i64 {
                let f = orthogonality_sum(p, n, n, Parity::Even).unwrap().to_f64();
                let e = g.primitive_parity_sum(n, n, Parity::Even);
                assert!((f - e.re).abs() < 1e-9 && e.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthogonality_matches_enumeration_small() {
        for q in (1..=30u64).filter(|&q| arith::is_admissible(q)) {
            let g = CharacterGroup::new(q).unwrap();
            for m in 1..=12i64 {
                for n in 1..=12i64 {
                    if gcd((m * n) as u64, q) != 1 {
                        continue;
                    }
                    for parity in [Parity::Even, Parity::Odd] {
                        let f = orthogonality_sum(q, m, n, parity).unwrap().to_f64();
                        let e = g.primitive_parity_sum(m, n, parity);
                        assert!(
                            (f - e.re).abs() < 1e-9 && e.im.abs() < 1e-9,
                            "q={q} m={m} n={n}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn conjugate_index_inverts_values() {
        let g = CharacterGroup::new(63).unwrap();
        for info in g.infos() {
            let c = g.conjugate(info.index);
            for x in 1..63 {
                let v = g.value(info.index, x) * g.value(c, x);
                if g.value_exponent(c, x).is_some() {
                    assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn table_roundtrip_check() {
        let g = CharacterGroup::new(40).unwrap();
        let again = CharacterGroup::from_table(40, g.exponent(), g.exponent_table()).unwrap();
        assert_eq!(again.len(), g.len());
        let mut bad = g.exponent_table().to_vec();
        bad[41] = (bad[41] + 1) % g.exponent() as u32;
        assert!(CharacterGroup::from_table(40, g.exponent(), &bad).is_err());
    }
}
