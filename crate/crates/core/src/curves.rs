//! Elliptic curves over ℚ in long Weierstrass form and their reductions
//! modulo primes of good reduction.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

use crate::arith::{self, add_mod, inv_mod, is_prime, mul_mod, reduce, sub_mod};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("curve {0} is singular (discriminant 0)")]
    Singular(String),
    #[error("curve has bad reduction at p = {p}: p divides the discriminant")]
    BadReduction { p: u64 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("cannot parse curve {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("curve {0} is not in short Weierstrass form")]
    NotShortForm(String),
    #[error("coefficient overflow while transforming {0}")]
    Overflow(String),
}

/// `y² + a1·xy + a3·y = x³ + a2·x² + a4·x + a6` with integer coefficients
/// and nonzero discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurveQ {
    a: [i64; 5],
}

/// Weierstrass discriminant of the model with coefficients `[a1,a2,a3,a4,a6]`.
pub fn discriminant_of(a: [i64; 5]) -> BigInt {
    let (b2, b4, b6, b8) = b_invariants(a);
    let b2_sq = &b2 * &b2;
    -(&b2_sq * &b8) - 8 * &b4 * &b4 * &b4 - 27 * &b6 * &b6 + 9 * &b2 * &b4 * &b6
}

fn b_invariants(a: [i64; 5]) -> (BigInt, BigInt, BigInt, BigInt) {
    let [a1, a2, a3, a4, a6] = a.map(BigInt::from);
    let b2 = &a1 * &a1 + 4 * &a2;
    let b4 = 2 * &a4 + &a1 * &a3;
    let b6 = &a3 * &a3 + 4 * &a6;
    let b8 = &a1 * &a1 * &a6 + 4 * &a2 * &a6 - &a1 * &a3 * &a4 + &a2 * &a3 * &a3 - &a4 * &a4;
    (b2, b4, b6, b8)
}

impl CurveQ {
    pub fn new(a1: i64, a2: i64, a3: i64, a4: i64, a6: i64) -> Result<Self, CurveError> {
        Self::from_coefficients([a1, a2, a3, a4, a6])
    }

    /// `y² = x³ + A·x + B`.
    pub fn short(a: i64, b: i64) -> Result<Self, CurveError> {
        Self::new(0, 0, 0, a, b)
    }

    pub fn from_coefficients(a: [i64; 5]) -> Result<Self, CurveError> {
        if discriminant_of(a).is_zero() {
            return Err(CurveError::Singular(key_of(a)));
        }
        Ok(CurveQ { a })
    }

    /// `[a1, a2, a3, a4, a6]`.
    pub fn coefficients(&self) -> [i64; 5] {
        self.a
    }

    pub fn is_short(&self) -> bool {
        self.a[0] == 0 && self.a[1] == 0 && self.a[2] == 0
    }

    /// Short-form coefficients `(A, B)` when the model is already short.
    pub fn short_coefficients(&self) -> Option<(i64, i64)> {
        self.is_short().then_some((self.a[3], self.a[4]))
    }

    /// Canonical text form `[a1,a2,a3,a4,a6]`, also used as cache key.
    pub fn key(&self) -> String {
        key_of(self.a)
    }

    pub fn discriminant(&self) -> BigInt {
        discriminant_of(self.a)
    }

    /// `(b2, b4, b6, b8)`.
    pub fn b_invariants(&self) -> (BigInt, BigInt, BigInt, BigInt) {
        b_invariants(self.a)
    }

    /// `(c4, c6)`.
    pub fn c_invariants(&self) -> (BigInt, BigInt) {
        let (b2, b4, b6, _) = self.b_invariants();
        let c4 = &b2 * &b2 - 24 * &b4;
        let c6 = -(&b2 * &b2 * &b2) + 36 * &b2 * &b4 - 216 * &b6;
        (c4, c6)
    }

    pub fn j_invariant(&self) -> BigRational {
        let (c4, _) = self.c_invariants();
        BigRational::new(&c4 * &c4 * &c4, self.discriminant())
    }

    /// The integral short model `y² = x³ − 27·c4·x − 54·c6`, isomorphic over ℚ
    /// via `(x, y) ↦ (36x + 3b2, 108(2y + a1x + a3))`.
    ///
    /// Already-short models are returned unchanged.
    pub fn short_model(&self) -> Result<CurveQ, CurveError> {
        if self.is_short() {
            return Ok(*self);
        }
        let (c4, c6) = self.c_invariants();
        let a = (BigInt::from(-27) * c4).to_i64();
        let b = (BigInt::from(-54) * c6).to_i64();
        match (a, b) {
            (Some(a), Some(b)) => CurveQ::short(a, b),
            _ => Err(CurveError::Overflow(self.key())),
        }
    }

    /// Δ mod p computed in word arithmetic.
    pub fn discriminant_mod(&self, p: u64) -> u64 {
        let d = self.discriminant() % BigInt::from(p);
        let d = d.to_i64().expect("remainder fits");
        reduce(d, p)
    }

    pub fn has_good_reduction(&self, p: u64) -> bool {
        self.discriminant_mod(p) != 0
    }
}

fn key_of(a: [i64; 5]) -> String {
    format!("[{},{},{},{},{}]", a[0], a[1], a[2], a[3], a[4])
}

impl fmt::Display for CurveQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for CurveQ {
    type Err = CurveError;

    /// Accepts `[a1,a2,a3,a4,a6]` or the short-form shorthand `A,B`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| CurveError::Parse { input: s.to_string(), reason: reason.to_string() };
        let t = s.trim();
        let (body, long) = match t.strip_prefix('[') {
            Some(rest) => (rest.strip_suffix(']').ok_or_else(|| err("missing closing ']'"))?, true),
            None => (t, false),
        };
        let parts = body
            .split(',')
            .map(|x| x.trim().parse::<i64>().map_err(|e| err(&format!("bad integer {:?}: {e}", x.trim()))))
            .collect::<Result<Vec<_>, _>>()?;
        let coeffs = match (long, parts.len()) {
            (true, 5) => [parts[0], parts[1], parts[2], parts[3], parts[4]],
            (false, 2) => [0, 0, 0, parts[0], parts[1]],
            (true, n) => return Err(err(&format!("expected 5 coefficients, found {n}"))),
            (false, n) => return Err(err(&format!("expected 2 coefficients A,B, found {n}"))),
        };
        CurveQ::from_coefficients(coeffs)
    }
}

/// A point on a curve over 𝔽_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointFp {
    Infinity,
    Affine { x: u64, y: u64 },
}

impl PointFp {
    pub fn affine(x: u64, y: u64) -> Self {
        PointFp::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, PointFp::Infinity)
    }
}

/// A curve over 𝔽_p with nonzero discriminant. For p > 3 the model is short
/// (`a1 = a2 = a3 = 0`); for p ∈ {2, 3} the long model is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReducedCurve {
    p: u64,
    a: [u64; 5],
}

/// Reduction of `c` modulo the prime `p`, converted to short form for p > 3.
pub fn reduce_mod_p(c: &CurveQ, p: u64) -> Result<ReducedCurve, CurveError> {
    if !is_prime(p) {
        return Err(CurveError::NotPrime(p));
    }
    if !c.has_good_reduction(p) {
        return Err(CurveError::BadReduction { p });
    }
    if p <= 3 {
        return Ok(ReducedCurve { p, a: c.coefficients().map(|x| reduce(x, p)) });
    }
    // A = −c4/48, B = −c6/864
    let (c4, c6) = c.c_invariants();
    let pb = BigInt::from(p);
    let c4 = reduce((c4 % &pb).to_i64().expect("fits"), p);
    let c6 = reduce((c6 % &pb).to_i64().expect("fits"), p);
    let a = mul_mod(sub_mod(0, c4, p), inv_mod(48, p).expect("p > 3"), p);
    let b = mul_mod(sub_mod(0, c6, p), inv_mod(864, p).expect("p > 3"), p);
    Ok(ReducedCurve { p, a: [0, 0, 0, a, b] })
}

impl ReducedCurve {
    /// Short-form curve `y² = x³ + A·x + B` over 𝔽_p, p > 3.
    pub fn short(a: u64, b: u64, p: u64) -> Result<Self, CurveError> {
        if !is_prime(p) || p <= 3 {
            return Err(CurveError::NotPrime(p));
        }
        let (a, b) = (a % p, b % p);
        let disc = add_mod(mul_mod(4, mul_mod(a, mul_mod(a, a, p), p), p), mul_mod(27, mul_mod(b, b, p), p), p);
        if disc == 0 {
            return Err(CurveError::BadReduction { p });
        }
        Ok(ReducedCurve { p, a: [0, 0, 0, a, b] })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn coefficients(&self) -> [u64; 5] {
        self.a
    }

    pub fn short_coefficients(&self) -> Option<(u64, u64)> {
        (self.a[0] == 0 && self.a[1] == 0 && self.a[2] == 0).then_some((self.a[3], self.a[4]))
    }

    /// `x³ + A·x + B` for the short model.
    pub fn rhs(&self, x: u64) -> u64 {
        let p = self.p;
        let [_, a2, _, a4, a6] = self.a;
        let x2 = mul_mod(x, x, p);
        let cubic = add_mod(mul_mod(x2, x, p), mul_mod(a2, x2, p), p);
        add_mod(cubic, add_mod(mul_mod(a4, x, p), a6, p), p)
    }

    fn lhs(&self, x: u64, y: u64) -> u64 {
        let p = self.p;
        let [a1, _, a3, _, _] = self.a;
        add_mod(mul_mod(y, y, p), add_mod(mul_mod(a1, mul_mod(x, y, p), p), mul_mod(a3, y, p), p), p)
    }

    pub fn contains(&self, pt: &PointFp) -> bool {
        match *pt {
            PointFp::Infinity => true,
            PointFp::Affine { x, y } => x < self.p && y < self.p && self.lhs(x, y) == self.rhs(x),
        }
    }

    pub fn neg(&self, pt: &PointFp) -> PointFp {
        match *pt {
            PointFp::Infinity => PointFp::Infinity,
            PointFp::Affine { x, y } => {
                let p = self.p;
                let [a1, _, a3, _, _] = self.a;
                let ny = sub_mod(sub_mod(0, y, p), add_mod(mul_mod(a1, x, p), a3, p), p);
                PointFp::Affine { x, y: ny }
            }
        }
    }

    /// Chord-and-tangent addition on the long model.
    pub fn add(&self, lhs: &PointFp, rhs: &PointFp) -> PointFp {
        let (x1, y1, x2, y2) = match (*lhs, *rhs) {
            (PointFp::Infinity, q) => return q,
            (q, PointFp::Infinity) => return q,
            (PointFp::Affine { x: x1, y: y1 }, PointFp::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
        };
        let p = self.p;
        let [a1, a2, a3, a4, _] = self.a;
        let slope = if x1 != x2 {
            mul_mod(sub_mod(y2, y1, p), inv_mod(sub_mod(x2, x1, p) as i64, p).expect("field"), p)
        } else {
            let denom = add_mod(add_mod(mul_mod(2, y1, p), mul_mod(a1, x1, p), p), a3, p);
            if y1 != y2 || denom == 0 {
                return PointFp::Infinity;
            }
            let num = sub_mod(
                add_mod(add_mod(mul_mod(3, mul_mod(x1, x1, p), p), mul_mod(mul_mod(2, a2, p), x1, p), p), a4, p),
                mul_mod(a1, y1, p),
                p,
            );
            mul_mod(num, inv_mod(denom as i64, p).expect("field"), p)
        };
        let x3 =
            sub_mod(sub_mod(sub_mod(add_mod(mul_mod(slope, slope, p), mul_mod(a1, slope, p), p), a2, p), x1, p), x2, p);
        // y3 = −(λ + a1)·x3 − (y1 − λ·x1) − a3
        let intercept = sub_mod(y1, mul_mod(slope, x1, p), p);
        let y3 = sub_mod(sub_mod(sub_mod(0, mul_mod(add_mod(slope, a1, p), x3, p), p), intercept, p), a3, p);
        PointFp::Affine { x: x3, y: y3 }
    }

    pub fn double(&self, pt: &PointFp) -> PointFp {
        self.add(pt, pt)
    }

    /// `n·P` by double-and-add.
    pub fn scalar_mul(&self, n: i64, pt: &PointFp) -> PointFp {
        let base = if n < 0 { self.neg(pt) } else { *pt };
        let mut k = n.unsigned_abs();
        let mut acc = PointFp::Infinity;
        let mut addend = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(&acc, &addend);
            }
            addend = self.double(&addend);
            k >>= 1;
        }
        acc
    }

    /// Every point of the curve, Infinity first. Meant for small p.
    pub fn points(&self) -> Vec<PointFp> {
        let mut out = vec![PointFp::Infinity];
        for x in 0..self.p {
            for y in 0..self.p {
                if self.lhs(x, y) == self.rhs(x) {
                    out.push(PointFp::Affine { x, y });
                }
            }
        }
        out
    }

    /// A uniformly chosen affine point of the short model.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> PointFp {
        assert!(self.short_coefficients().is_some(), "random points need the short model");
        loop {
            let x = rng.gen_range(0..self.p);
            if let Ok(y) = arith::sqrt_mod(self.rhs(x), self.p) {
                let y = if rng.gen::<bool>() { y } else { sub_mod(0, y, self.p) };
                return PointFp::Affine { x, y };
            }
        }
    }

    /// The quadratic twist `y² = x³ + A·g²·x + B·g³` by a non-residue `g`.
    pub fn quadratic_twist(&self) -> ReducedCurve {
        let (a, b) = self.short_coefficients().expect("twist needs the short model");
        let p = self.p;
        let g = (2..p).find(|&g| arith::legendre(g as i64, p) == -1).expect("odd prime");
        let g2 = mul_mod(g, g, p);
        ReducedCurve { p, a: [0, 0, 0, mul_mod(a, g2, p), mul_mod(b, mul_mod(g2, g, p), p)] }
    }
}
