//! Word-sized modular arithmetic.
//!
//! Every modulus handled here is below 2^62, so products are formed in
//! 128-bit intermediates and never overflow. These routines back both the
//! prime fields 𝔽_p of the reduced curves and the coefficient fields 𝔽_ℓ of
//! the mod-ℓ matrices.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest modulus accepted by the word-sized routines.
pub const MAX_MODULUS: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: i64, modulus: u64 },
    #[error("{value} has no square root modulo {modulus}")]
    NoRoot { value: u64, modulus: u64 },
}

/// An element of ℤ/mℤ, stored as its least non-negative representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    pub fn new(value: i64, modulus: u64) -> Self {
        assert!((1..MAX_MODULUS).contains(&modulus), "modulus out of range");
        Residue { value: reduce(value, modulus), modulus }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, exp: u64) -> Self {
        Residue { value: pow_mod(self.value as i64, exp, self.modulus), modulus: self.modulus }
    }

    pub fn inv(self) -> Result<Self, ArithError> {
        Ok(Residue { value: inv_mod(self.value as i64, self.modulus)?, modulus: self.modulus })
    }

    fn check(self, other: Self) {
        assert_eq!(self.modulus, other.modulus, "mixed moduli");
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.modulus)
    }
}

impl Add for Residue {
    type Output = Residue;
    fn add(self, rhs: Residue) -> Residue {
        self.check(rhs);
        Residue { value: add_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Sub for Residue {
    type Output = Residue;
    fn sub(self, rhs: Residue) -> Residue {
        self.check(rhs);
        Residue { value: sub_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Mul for Residue {
    type Output = Residue;
    fn mul(self, rhs: Residue) -> Residue {
        self.check(rhs);
        Residue { value: mul_mod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl Neg for Residue {
    type Output = Residue;
    fn neg(self) -> Residue {
        Residue { value: sub_mod(0, self.value, self.modulus), modulus: self.modulus }
    }
}

/// Least non-negative representative of `a` modulo `m`.
#[inline]
pub fn reduce(a: i64, m: u64) -> u64 {
    (a as i128).rem_euclid(m as i128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        (a - b) % m
    } else {
        ((a as u128 + m as u128 - b as u128) % m as u128) as u64
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// `base^exp mod m` by square-and-multiply. `m = 1` yields 0.
pub fn pow_mod(base: i64, exp: u64, m: u64) -> u64 {
    assert!(m >= 1, "modulus must be positive");
    if m == 1 {
        return 0;
    }
    let mut b = reduce(base, m);
    let mut e = exp;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m` via the extended Euclidean algorithm.
pub fn inv_mod(a: i64, m: u64) -> Result<u64, ArithError> {
    assert!(m >= 2, "modulus must be at least 2");
    let (mut old_r, mut r) = (reduce(a, m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(ArithError::NotInvertible { value: a, modulus: m });
    }
    Ok(old_s.rem_euclid(m as i128) as u64)
}

/// Legendre symbol (a / p) for an odd prime `p`, via Euler's criterion.
pub fn legendre(a: i64, p: u64) -> i8 {
    debug_assert!(p % 2 == 1, "legendre needs an odd prime");
    let a = reduce(a, p);
    if a == 0 {
        return 0;
    }
    if pow_mod(a as i64, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// Square root of `a` modulo an odd prime `p` (Tonelli–Shanks).
///
/// Of the two roots `r` and `p - r` the smaller is returned.
pub fn sqrt_mod(a: u64, p: u64) -> Result<u64, ArithError> {
    let a = a % p;
    if a == 0 {
        return Ok(0);
    }
    if legendre(a as i64, p) != 1 {
        return Err(ArithError::NoRoot { value: a, modulus: p });
    }
    let root = if p % 4 == 3 { pow_mod(a as i64, (p + 1) / 4, p) } else { tonelli_shanks(a, p) };
    Ok(root.min(p - root))
}

fn tonelli_shanks(a: u64, p: u64) -> u64 {
    let mut q = p - 1;
    let mut s = 0u32;
    while q.is_multiple_of(2) {
        q /= 2;
        s += 1;
    }
    let z = (2..p).find(|&z| legendre(z as i64, p) == -1).expect("odd prime has a non-residue");
    let mut m = s;
    let mut c = pow_mod(z as i64, q, p);
    let mut t = pow_mod(a as i64, q, p);
    let mut r = pow_mod(a as i64, q.div_ceil(2), p);
    while t != 1 {
        // least i with t^(2^i) = 1
        let mut i = 0u32;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c as i64, 1u64 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    r
}

/// Deterministic Miller–Rabin, exact for every 64-bit input.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &q in &SMALL {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = ((acc as u128 * b as u128) % n as u128) as u64;
            }
            b = ((b as u128 * b as u128) % n as u128) as u64;
            e >>= 1;
        }
        acc
    };
    'witness: for &a in &SMALL {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// All primes in the closed interval `[lo, hi]`, ascending.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 2 || lo > hi {
        return Vec::new();
    }
    let lo = lo.max(2);
    let hi_usize = usize::try_from(hi).expect("sieve bound fits in memory");
    let mut composite = vec![false; hi_usize + 1];
    let mut i = 2usize;
    while i * i <= hi_usize {
        if !composite[i] {
            let mut j = i * i;
            while j <= hi_usize {
                composite[j] = true;
                j += i;
            }
        }
        i += 1;
    }
    (lo as usize..=hi_usize).filter(|&n| !composite[n]).map(|n| n as u64).collect()
}

/// The ℓ-adic valuation of `n`.
pub fn l_valuation(mut n: u64, ell: u64) -> u32 {
    assert!(n >= 1, "valuation of zero is undefined");
    assert!(ell >= 2);
    let mut e = 0;
    while n.is_multiple_of(ell) {
        n /= ell;
        e += 1;
    }
    e
}

/// Distinct prime factors of `n`, ascending, by trial division.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Positive divisors of `n`, ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Integer square root (floor).
pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_pow(base: u64, exp: u64, m: u64) -> u64 {
        let mut acc = 1 % m;
        for _ in 0..exp {
            acc = acc * (base % m) % m;
        }
        acc
    }

    #[test]
    fn pow_mod_examples() {
        assert_eq!(pow_mod(2, 10, 1000), 24);
        assert_eq!(pow_mod(7, 0, 13), 1);
        assert_eq!(brute_pow(3, 100, 101), 1);
        assert_eq!(pow_mod(3, 100, 101), 1);
        assert_eq!(pow_mod(5, 3, 1), 0);
        assert_eq!(pow_mod(-2, 3, 7), 6);
    }

    #[test]
    fn pow_mod_large_modulus_does_not_overflow() {
        let m = (1u64 << 61) - 1; // Mersenne prime
        assert_eq!(pow_mod(3, m - 1, m), 1);
    }

    #[test]
    fn inv_mod_examples() {
        assert_eq!(inv_mod(1, 7), Ok(1));
        let brute = (1..7).find(|x| 3 * x % 7 == 1).unwrap();
        assert_eq!(brute, 5);
        assert_eq!(inv_mod(3, 7), Ok(5));
        assert_eq!(inv_mod(2, 4), Err(ArithError::NotInvertible { value: 2, modulus: 4 }));
        assert_eq!(inv_mod(-3, 7), Ok(2));
    }

    #[test]
    fn legendre_matches_enumeration() {
        for p in primes_in(3, 200) {
            let squares: Vec<u64> = (1..p).map(|x| x * x % p).collect();
            for a in 0..p {
                let expected = if a == 0 {
                    0
                } else if squares.contains(&a) {
                    1
                } else {
                    -1
                };
                assert_eq!(legendre(a as i64, p), expected, "a={a} p={p}");
            }
        }
        assert_eq!(legendre(0, 7), 0);
        assert_eq!(legendre(2, 7), 1);
        assert_eq!(legendre(3, 7), -1);
    }

    #[test]
    fn sqrt_mod_examples() {
        assert_eq!(sqrt_mod(4, 7), Ok(2));
        assert_eq!(sqrt_mod(2, 7), Ok(3));
        assert_eq!(sqrt_mod(3, 7), Err(ArithError::NoRoot { value: 3, modulus: 7 }));
    }

    #[test]
    fn sqrt_mod_exhaustive_below_1000() {
        for p in primes_in(3, 1000) {
            for a in 0..p {
                match sqrt_mod(a, p) {
                    Ok(r) => {
                        assert_eq!(r * r % p, a);
                        assert!(r <= p - r || r == 0);
                    }
                    Err(_) => assert_eq!(legendre(a as i64, p), -1),
                }
            }
        }
    }

    #[test]
    fn primes_in_examples() {
        assert_eq!(primes_in(1, 10), vec![2, 3, 5, 7]);
        assert_eq!(primes_in(11, 11), vec![11]);
        assert!(primes_in(24, 28).is_empty());
        assert!(primes_in(0, 1).is_empty());
    }

    #[test]
    fn primes_in_agrees_with_trial_division_to_1e6() {
        let sieved = primes_in(1, 1_000_000);
        assert_eq!(sieved.len(), 78_498);
        // trial division reference on a sub-range
        let reference: Vec<u64> =
            (1..20_000u64).filter(|&n| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)).collect();
        assert_eq!(&sieved[..reference.len()], &reference[..]);
        assert!(sieved.iter().all(|&p| is_prime(p)));
    }

    #[test]
    fn l_valuation_examples() {
        assert_eq!(l_valuation(8, 2), 3);
        assert_eq!(l_valuation(8, 3), 0);
        assert_eq!(l_valuation(360, 3), 2);
    }

    #[test]
    fn divisors_and_factors() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(prime_factors(360), vec![2, 3, 5]);
        assert_eq!(prime_factors(97), vec![97]);
        assert_eq!(isqrt(99), 9);
        assert_eq!(isqrt(100), 10);
    }

    #[test]
    fn residue_ops() {
        let a = Residue::new(-2, 5);
        assert_eq!(a.value(), 3);
        let b = Residue::new(4, 5);
        assert_eq!((a + b).value(), 2);
        assert_eq!((a - b).value(), 4);
        assert_eq!((a * b).value(), 2);
        assert_eq!((-a).value(), 2);
        assert_eq!(a.inv().unwrap().value(), 2);
    }

    proptest! {
        #[test]
        fn fermat_little_theorem(idx in 0usize..168, a in 1i64..1_000_000) {
            let p = primes_in(2, 1000)[idx];
            prop_assume!(a % p as i64 != 0);
            prop_assert_eq!(pow_mod(a, p - 1, p), 1);
        }

        #[test]
        fn inverse_multiplies_to_one(a in -10_000i64..10_000, m in 2u64..5000) {
            match inv_mod(a, m) {
                Ok(inv) => prop_assert_eq!(mul_mod(reduce(a, m), inv, m), 1 % m),
                Err(_) => prop_assert!(num_integer::gcd(reduce(a, m), m) > 1),
            }
        }
    }
}
