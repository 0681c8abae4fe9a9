//! Arithmetic in GF(p^k).
//!
//! Elements are polynomials over GF(p) of degree below `k`, reduced modulo a
//! fixed monic irreducible polynomial. The modulus is the irreducible whose
//! coefficient vector, read as a base-p integer with the constant term least
//! significant, is smallest. That makes construction deterministic without
//! needing Conway polynomial tables.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest field order accepted.
pub const MAX_FIELD_ORDER: u64 = 1 << 16;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Splits `q = p^k`, returning `None` unless `q` is a prime power.
pub fn prime_power(q: u64) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut rest = q;
    let mut k = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p as u32, k))
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    coeffs: Vec<u32>,
}

impl FieldElement {
    /// Coefficients, constant term first.
    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coeffs)
    }
}

/// Canonical order: lexicographic on coefficients, constant term first.
impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coeffs.cmp(&other.coeffs)
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    p: u32,
    k: u32,
    /// Monic modulus of degree `k`, constant term first (length `k + 1`).
    modulus: Vec<u32>,
}

impl FieldSpec {
    pub fn new(p: u32, k: u32) -> Result<Self> {
        if !is_prime(p as u64) {
            return Err(Error::InvalidArgument(format!("{p} is not prime")));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("extension degree must be at least 1".into()));
        }
        let order = (p as u64).checked_pow(k).unwrap_or(u64::MAX);
        if order > MAX_FIELD_ORDER {
            return Err(Error::InvalidArgument(format!(
                "field order {p}^{k} exceeds the supported maximum {MAX_FIELD_ORDER}"
            )));
        }
        if k == 1 {
            return Ok(FieldSpec { p, k, modulus: vec![0, 1] });
        }
        let candidates = (p as u64).pow(k);
        for code in 0..candidates {
            let mut modulus = digits(code, p, k as usize);
            modulus.push(1);
            if is_irreducible(&modulus, p) {
                return Ok(FieldSpec { p, k, modulus });
            }
        }
        Err(Error::Internal(format!("no irreducible polynomial of degree {k} over GF({p})")))
    }

    /// Builds GF(q) for a prime power `q`.
    pub fn with_order(q: u64) -> Result<Self> {
        let (p, k) = prime_power(q)
            .ok_or_else(|| Error::InvalidArgument(format!("{q} is not a prime power")))?;
        Self::new(p, k)
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn order(&self) -> u64 {
        (self.p as u64).pow(self.k)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { coeffs: vec![0; self.k as usize] }
    }

    pub fn one(&self) -> FieldElement {
        let mut e = self.zero();
        e.coeffs[0] = 1;
        e
    }

    /// Element from coefficients (constant term first); reduced mod p and
    /// padded or rejected against the field degree.
    pub fn element(&self, coeffs: &[u32]) -> Result<FieldElement> {
        if coeffs.len() > self.k as usize {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients given for a degree-{} field",
                coeffs.len(),
                self.k
            )));
        }
        let mut e = self.zero();
        for (slot, &c) in e.coeffs.iter_mut().zip(coeffs) {
            *slot = c % self.p;
        }
        Ok(e)
    }

    /// Position of `e` in canonical order.
    pub fn rank(&self, e: &FieldElement) -> u32 {
        e.coeffs.iter().fold(0, |acc, &c| acc * self.p + c)
    }

    /// Inverse of [`FieldSpec::rank`].
    pub fn element_at(&self, rank: u32) -> FieldElement {
        let mut coeffs = digits(rank as u64, self.p, self.k as usize);
        coeffs.reverse();
        FieldElement { coeffs }
    }

    /// All field elements in canonical order.
    pub fn elements(&self) -> Vec<FieldElement> {
        (0..self.order() as u32).map(|r| self.element_at(r)).collect()
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&x, &y)| (x + y) % self.p)
            .collect();
        FieldElement { coeffs }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        let coeffs = a.coeffs.iter().map(|&x| (self.p - x) % self.p).collect();
        FieldElement { coeffs }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let k = self.k as usize;
        let p = self.p as u64;
        let mut prod = vec![0u64; 2 * k - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p;
            }
        }
        // Reduce from the top using t^k = -(modulus without leading term).
        for top in (k..prod.len()).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for (i, &m) in self.modulus[..k].iter().enumerate() {
                let idx = top - k + i;
                prod[idx] = (prod[idx] + (p - c) * m as u64) % p;
            }
        }
        FieldElement { coeffs: prod[..k].iter().map(|&c| c as u32).collect() }
    }

    pub fn pow(&self, a: &FieldElement, mut e: u64) -> FieldElement {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.order() - 2))
    }

    /// The subfield of order `q` inside a field of order `q^2`, as the fixed
    /// points of `x -> x^q`, in canonical order.
    pub fn subfield_elements(&self, q: u64) -> Result<Vec<FieldElement>> {
        if q.checked_mul(q) != Some(self.order()) {
            return Err(Error::InvalidArgument(format!(
                "field order {} is not the square of {q}",
                self.order()
            )));
        }
        let fixed: Vec<_> = self
            .elements()
            .into_iter()
            .filter(|x| &self.pow(x, q) == x)
            .collect();
        if fixed.len() as u64 != q {
            return Err(Error::Internal(format!(
                "found {} Frobenius fixed points, expected {q}",
                fixed.len()
            )));
        }
        Ok(fixed)
    }
}

/// Base-p digits of `code`, least significant first, padded to `len`.
fn digits(mut code: u64, p: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((code % p as u64) as u32);
        code /= p as u64;
    }
    out
}

/// Remainder of `num` modulo the monic polynomial `den` over GF(p).
fn poly_rem(num: &[u32], den: &[u32], p: u32) -> Vec<u32> {
    let p = p as u64;
    let mut r: Vec<u64> = num.iter().map(|&c| c as u64).collect();
    let dd = den.len() - 1;
    while r.len() > dd {
        let lead = r.pop().unwrap();
        if lead == 0 {
            continue;
        }
        let shift = r.len() - dd;
        for (i, &c) in den[..dd].iter().enumerate() {
            r[shift + i] = (r[shift + i] + (p - lead) * c as u64 % p) % p;
        }
    }
    r.into_iter().map(|c| c as u32).collect()
}

/// Trial division by every monic polynomial of degree `1..=deg/2`.
fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let deg = poly.len() - 1;
    for d in 1..=deg / 2 {
        for code in 0..(p as u64).pow(d as u32) {
            let mut divisor = digits(code, p, d);
            divisor.push(1);
            if poly_rem(poly, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: a monic quadratic is irreducible iff it has no root.
    fn quadratic_has_root(c0: u32, c1: u32, p: u32) -> bool {
        (0..p).any(|x| (x * x + c1 * x + c0).is_multiple_of(p))
    }

    #[test]
    fn prime_and_prime_power_detection() {
        assert!(is_prime(2) && is_prime(13) && !is_prime(1) && !is_prime(9));
        assert_eq!(prime_power(9), Some((3, 2)));
        assert_eq!(prime_power(16), Some((2, 4)));
        assert_eq!(prime_power(7), Some((7, 1)));
        assert_eq!(prime_power(6), None);
        assert_eq!(prime_power(1), None);
    }

    #[test]
    fn gf2_is_prime_field() {
        let f = FieldSpec::new(2, 1).unwrap();
        assert_eq!(f.order(), 2);
        assert_eq!(f.modulus().len(), 2);
        let one = f.one();
        assert!(f.add(&one, &one).is_zero());
    }

    #[test]
    fn gf4_modulus_is_t2_t_1() {
        // Exhaustive oracle over the four monic quadratics in base-p order.
        let first = (0..4u32)
            .find(|&code| !quadratic_has_root(code % 2, code / 2, 2))
            .unwrap();
        assert_eq!(first, 3);
        let f = FieldSpec::new(2, 2).unwrap();
        assert_eq!(f.modulus(), &[1, 1, 1]);
    }

    #[test]
    fn gf9_modulus_is_t2_plus_1() {
        let first = (0..9u32)
            .find(|&code| !quadratic_has_root(code % 3, code / 3, 3))
            .unwrap();
        assert_eq!(first, 1);
        let f = FieldSpec::new(3, 2).unwrap();
        assert_eq!(f.modulus(), &[1, 0, 1]);
    }

    #[test]
    fn rejects_composite_characteristic() {
        assert!(matches!(FieldSpec::new(4, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(FieldSpec::new(3, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(FieldSpec::new(2, 17), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gf5_inverse_of_two() {
        let f = FieldSpec::new(5, 1).unwrap();
        let two = f.element(&[2]).unwrap();
        assert_eq!(f.inv(&two).unwrap().coeffs(), &[3]);
        assert!(matches!(f.inv(&f.zero()), Err(Error::DivisionByZero)));
    }

    #[test]
    fn gf4_t_squared_is_t_plus_one() {
        let f = FieldSpec::new(2, 2).unwrap();
        let t = f.element(&[0, 1]).unwrap();
        // t^2 = t^2 - (t^2 + t + 1) = t + 1 over GF(2)
        assert_eq!(f.mul(&t, &t).coeffs(), &[1, 1]);
    }

    #[test]
    fn rank_round_trip_and_order() {
        let f = FieldSpec::new(3, 2).unwrap();
        let elems = f.elements();
        assert_eq!(elems.len(), 9);
        for (r, e) in elems.iter().enumerate() {
            assert_eq!(f.rank(e), r as u32);
        }
        assert!(elems.windows(2).all(|w| w[0] < w[1]));
        // constant term is the most significant ordering key
        assert_eq!(elems[1].coeffs(), &[0, 1]);
        assert_eq!(elems[3].coeffs(), &[1, 0]);
    }

    #[test]
    fn subfields() {
        let f4 = FieldSpec::new(2, 2).unwrap();
        let s = f4.subfield_elements(2).unwrap();
        assert_eq!(s, vec![f4.zero(), f4.one()]);

        let f9 = FieldSpec::new(3, 2).unwrap();
        let s = f9.subfield_elements(3).unwrap();
        let expected: Vec<_> = (0..3).map(|c| f9.element(&[c]).unwrap()).collect();
        assert_eq!(s, expected);

        let f16 = FieldSpec::new(2, 4).unwrap();
        let s = f16.subfield_elements(4).unwrap();
        assert_eq!(s.len(), 4);
        for a in &s {
            for b in &s {
                assert!(s.contains(&f16.add(a, b)));
                assert!(s.contains(&f16.mul(a, b)));
            }
        }

        assert!(matches!(f16.subfield_elements(3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn construction_is_deterministic() {
        for (p, k) in [(2, 3), (3, 2), (5, 2), (2, 6), (7, 2)] {
            assert_eq!(FieldSpec::new(p, k).unwrap(), FieldSpec::new(p, k).unwrap());
        }
    }

    #[test]
    fn every_nonzero_element_has_an_inverse() {
        for (p, k) in [(2, 4), (3, 3), (5, 2)] {
            let f = FieldSpec::new(p, k).unwrap();
            for a in f.elements().iter().skip(1) {
                assert_eq!(f.mul(a, &f.inv(a).unwrap()), f.one());
            }
        }
    }

    fn field_and_elems() -> impl Strategy<Value = (FieldSpec, u32, u32, u32)> {
        prop_oneof![Just((2u32, 4u32)), Just((3, 2)), Just((5, 2)), Just((7, 2)), Just((2, 8))]
            .prop_flat_map(|(p, k)| {
                let f = FieldSpec::new(p, k).unwrap();
                let n = f.order() as u32;
                (Just(f), 0..n, 0..n, 0..n)
            })
    }

    proptest! {
        #[test]
        fn field_axioms((f, a, b, c) in field_and_elems()) {
            let (a, b, c) = (f.element_at(a), f.element_at(b), f.element_at(c));
            prop_assert_eq!(f.add(&a, &b), f.add(&b, &a));
            prop_assert_eq!(f.mul(&a, &b), f.mul(&b, &a));
            prop_assert_eq!(f.add(&f.add(&a, &b), &c), f.add(&a, &f.add(&b, &c)));
            prop_assert_eq!(f.mul(&f.mul(&a, &b), &c), f.mul(&a, &f.mul(&b, &c)));
            prop_assert_eq!(
                f.mul(&a, &f.add(&b, &c)),
                f.add(&f.mul(&a, &b), &f.mul(&a, &c))
            );
            prop_assert!(f.sub(&a, &a).is_zero());
            if !a.is_zero() {
                prop_assert_eq!(f.mul(&a, &f.inv(&a).unwrap()), f.one());
            }
        }
    }
}
