//! Ground-truth curve pairs over ℚ: rational torsion points, Vélu quotients
//! (isogenous pairs) and quadratic twists (same j-invariant, generally not
//! isogenous).
//!
//! Everything here runs in exact rational arithmetic.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::arith::{is_prime, primes_in};
use crate::counting::trace_ap;
use crate::curves::{CurveError, CurveQ};

/// Supported range of n for division polynomials and torsion search.
pub const TORSION_RANGE: std::ops::RangeInclusive<u32> = 2..=7;

/// Primes at which [`velu_quotient`] cross-checks `a_p` of source and target.
const SELF_CHECK_PMAX: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VeluError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("n = {0} is outside the supported range 2..=7")]
    OrderOutOfRange(u32),
    #[error("point {0} is not on the curve")]
    NotOnCurve(String),
    #[error("point {0} is not a torsion point of order at most 7")]
    NotTorsion(String),
    #[error("point has order {actual}, expected {claimed}")]
    WrongOrder { claimed: u32, actual: u32 },
    #[error("kernel order {0} is not a prime in {{2, 3, 5, 7}}")]
    UnsupportedDegree(u32),
    #[error("twist parameter must be nonzero")]
    ZeroTwist,
    #[error("twist parameter {0} is not squarefree")]
    NotSquarefree(i64),
    #[error("Vélu quotient of {source_curve} disagrees in a_p at p = {p}")]
    SelfCheck { source_curve: String, p: u64 },
}

/// Integer polynomial, coefficients from the constant term upward.
pub type IntPoly = Vec<BigInt>;

fn trim(mut f: IntPoly) -> IntPoly {
    while f.len() > 1 && f.last().is_some_and(Zero::is_zero) {
        f.pop();
    }
    f
}

fn poly_mul(f: &[BigInt], g: &[BigInt]) -> IntPoly {
    let mut out = vec![BigInt::zero(); f.len() + g.len() - 1];
    for (i, a) in f.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in g.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    trim(out)
}

fn poly_sub(f: &[BigInt], g: &[BigInt]) -> IntPoly {
    let n = f.len().max(g.len());
    let zero = BigInt::zero();
    trim((0..n).map(|i| f.get(i).unwrap_or(&zero) - g.get(i).unwrap_or(&zero)).collect())
}

/// Quotient of `f` by a monic `g`, asserting the division is exact.
fn poly_div_exact(f: &[BigInt], g: &[BigInt]) -> IntPoly {
    assert!(g.last().is_some_and(One::is_one), "divisor must be monic");
    let mut rem = f.to_vec();
    let dg = g.len() - 1;
    if rem.len() <= dg {
        assert!(rem.iter().all(Zero::is_zero), "inexact polynomial division");
        return vec![BigInt::zero()];
    }
    let mut quot = vec![BigInt::zero(); rem.len() - dg];
    for i in (0..quot.len()).rev() {
        let c = rem[i + dg].clone();
        for (j, gj) in g.iter().enumerate() {
            rem[i + j] -= &c * gj;
        }
        quot[i] = c;
    }
    assert!(rem.iter().all(Zero::is_zero), "inexact polynomial division");
    trim(quot)
}

fn poly_eval(f: &[BigInt], x: &BigInt) -> BigInt {
    f.iter().rev().fold(BigInt::zero(), |acc, c| acc * x + c)
}

fn poly_derivative(f: &[BigInt]) -> IntPoly {
    if f.len() <= 1 {
        return vec![BigInt::zero()];
    }
    f.iter().enumerate().skip(1).map(|(i, c)| c * BigInt::from(i)).collect()
}

fn ints(v: &[i64]) -> IntPoly {
    v.iter().map(|&c| BigInt::from(c)).collect()
}

/// ψ_n written as `poly(x) · y^odd_y`, with y² reduced to x³ + A·x + B.
#[derive(Clone)]
struct YPoly {
    poly: IntPoly,
    odd_y: bool,
}

struct DivisionContext {
    cubic: IntPoly,
}

impl DivisionContext {
    fn mul(&self, f: &YPoly, g: &YPoly) -> YPoly {
        let mut poly = poly_mul(&f.poly, &g.poly);
        if f.odd_y && g.odd_y {
            poly = poly_mul(&poly, &self.cubic);
        }
        YPoly { poly, odd_y: f.odd_y ^ g.odd_y }
    }

    fn sub(&self, f: &YPoly, g: &YPoly) -> YPoly {
        debug_assert_eq!(f.odd_y, g.odd_y);
        YPoly { poly: poly_sub(&f.poly, &g.poly), odd_y: f.odd_y }
    }

    fn cube(&self, f: &YPoly) -> YPoly {
        self.mul(f, &self.mul(f, f))
    }

    fn square(&self, f: &YPoly) -> YPoly {
        self.mul(f, f)
    }
}

/// Division polynomial of `y² = x³ + A·x + B` in x alone.
///
/// For odd n this is ψ_n. For even n, ψ_n = 2y·f_n and the result is
/// `f_n · (x³ + A·x + B)`, so that in every case the roots are exactly the
/// x-coordinates of the nonzero n-torsion points.
pub fn division_polynomial(c: &CurveQ, n: u32) -> Result<IntPoly, VeluError> {
    if !TORSION_RANGE.contains(&n) {
        return Err(VeluError::OrderOutOfRange(n));
    }
    let (a, b) = c.short_coefficients().ok_or_else(|| CurveError::NotShortForm(c.key()))?;
    let ctx = DivisionContext { cubic: ints(&[b, a, 0, 1]) };
    let big = |v: i64| BigInt::from(v);
    let (a_, b_) = (big(a), big(b));
    let mut psi: Vec<YPoly> = Vec::with_capacity(8);
    psi.push(YPoly { poly: vec![BigInt::zero()], odd_y: false });
    psi.push(YPoly { poly: vec![BigInt::one()], odd_y: false });
    psi.push(YPoly { poly: vec![big(2)], odd_y: true });
    // ψ₃ = 3x⁴ + 6Ax² + 12Bx − A²
    psi.push(YPoly { poly: vec![-(&a_ * &a_), 12 * &b_, 6 * &a_, BigInt::zero(), big(3)], odd_y: false });
    // ψ₄ = 4y(x⁶ + 5Ax⁴ + 20Bx³ − 5A²x² − 4ABx − 8B² − A³)
    let inner: IntPoly = vec![
        -(BigInt::from(8) * &b_ * &b_) - &a_ * &a_ * &a_,
        -(BigInt::from(4) * &a_ * &b_),
        -(BigInt::from(5) * &a_ * &a_),
        20 * &b_,
        5 * &a_,
        BigInt::zero(),
        BigInt::one(),
    ];
    psi.push(YPoly { poly: inner.into_iter().map(|c| 4 * c).collect(), odd_y: true });
    for k in 5..=n as usize {
        let m = k / 2;
        let next = if k % 2 == 1 {
            // ψ_{2m+1} = ψ_{m+2}ψ_m³ − ψ_{m−1}ψ_{m+1}³
            ctx.sub(&ctx.mul(&psi[m + 2], &ctx.cube(&psi[m])), &ctx.mul(&psi[m - 1], &ctx.cube(&psi[m + 1])))
        } else {
            // ψ_{2m} = ψ_m(ψ_{m+2}ψ_{m−1}² − ψ_{m−2}ψ_{m+1}²) / 2y
            let bracket = ctx
                .sub(&ctx.mul(&psi[m + 2], &ctx.square(&psi[m - 1])), &ctx.mul(&psi[m - 2], &ctx.square(&psi[m + 1])));
            let num = ctx.mul(&psi[m], &bracket);
            assert!(!num.odd_y, "ψ_2m numerator is a polynomial in x");
            // num / 2y = (num / 2F)·y
            let half = num
                .poly
                .into_iter()
                .map(|c| {
                    let (q, r) = c.div_rem(&big(2));
                    assert!(r.is_zero(), "ψ_2m numerator is divisible by 2");
                    q
                })
                .collect::<IntPoly>();
            YPoly { poly: poly_div_exact(&half, &ctx.cubic), odd_y: true }
        };
        psi.push(next);
    }
    let target = &psi[n as usize];
    if n % 2 == 1 {
        Ok(target.poly.clone())
    } else {
        // ψ_n = y·g_n = 2y·f_n  ⇒  result = (g_n / 2)·F
        let half: IntPoly = target.poly.iter().map(|c| c / 2).collect();
        Ok(poly_mul(&half, &ctx.cubic))
    }
}

/// Integer roots of a squarefree integer polynomial, ascending.
///
/// Each root reduces to a simple root modulo a suitable small prime q and
/// is recovered by Newton lifting to a q-power exceeding twice the root
/// bound |f(0)|.
pub fn integer_roots(f: &[BigInt]) -> Vec<BigInt> {
    let mut f = trim(f.to_vec());
    assert!(!(f.len() == 1 && f[0].is_zero()), "zero polynomial has every integer as a root");
    let mut roots = Vec::new();
    if f[0].is_zero() {
        roots.push(BigInt::zero());
        while f.len() > 1 && f[0].is_zero() {
            f.remove(0);
        }
    }
    if f.len() == 1 {
        return roots;
    }
    let bound = f[0].abs();
    let df = poly_derivative(&f);
    let lead = f.last().expect("nonempty").clone();
    let (q, residues) = primes_in(3, 100_000)
        .into_iter()
        .map(BigInt::from)
        .filter(|q| !(&lead % q).is_zero())
        .find_map(|q| {
            let mut residues = Vec::new();
            let mut r = BigInt::zero();
            while r < q {
                if poly_eval(&f, &r).mod_floor(&q).is_zero() {
                    if poly_eval(&df, &r).mod_floor(&q).is_zero() {
                        return None;
                    }
                    residues.push(r.clone());
                }
                r += 1;
            }
            Some((q, residues))
        })
        .expect("squarefree polynomial has simple roots modulo some small prime");
    let limit = 2 * &bound + 1;
    for r0 in residues {
        let mut r = r0;
        let mut modulus = q.clone();
        while modulus < limit {
            modulus = &modulus * &modulus;
            let deriv = poly_eval(&df, &r).mod_floor(&modulus);
            let inv = deriv.modinv(&modulus).expect("simple root stays simple");
            r = (&r - poly_eval(&f, &r) * inv).mod_floor(&modulus);
        }
        let candidate = if 2 * &r > modulus { r - &modulus } else { r };
        if poly_eval(&f, &candidate).is_zero() {
            roots.push(candidate);
        }
    }
    roots.sort();
    roots
}

/// A point of a curve over ℚ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RationalPoint {
    Infinity,
    Affine { x: BigRational, y: BigRational },
}

impl RationalPoint {
    pub fn from_ints(x: i64, y: i64) -> Self {
        RationalPoint::Affine { x: rat(x), y: rat(y) }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, RationalPoint::Infinity)
    }
}

impl fmt::Display for RationalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalPoint::Infinity => f.write_str("O"),
            RationalPoint::Affine { x, y } => write!(f, "({x}, {y})"),
        }
    }
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Long Weierstrass model with rational coefficient arithmetic.
struct RationalModel {
    a: [BigRational; 5],
}

impl RationalModel {
    fn new(c: &CurveQ) -> Self {
        RationalModel { a: c.coefficients().map(rat) }
    }

    fn contains(&self, pt: &RationalPoint) -> bool {
        let RationalPoint::Affine { x, y } = pt else { return true };
        let [a1, a2, a3, a4, a6] = &self.a;
        y * y + a1 * x * y + a3 * y == x * x * x + a2 * x * x + a4 * x + a6
    }

    #[cfg(test)]
    fn neg(&self, pt: &RationalPoint) -> RationalPoint {
        match pt {
            RationalPoint::Infinity => RationalPoint::Infinity,
            RationalPoint::Affine { x, y } => {
                let [a1, _, a3, _, _] = &self.a;
                RationalPoint::Affine { x: x.clone(), y: -y - a1 * x - a3 }
            }
        }
    }

    fn add(&self, p: &RationalPoint, q: &RationalPoint) -> RationalPoint {
        let ((x1, y1), (x2, y2)) = match (p, q) {
            (RationalPoint::Infinity, _) => return q.clone(),
            (_, RationalPoint::Infinity) => return p.clone(),
            (RationalPoint::Affine { x: x1, y: y1 }, RationalPoint::Affine { x: x2, y: y2 }) => ((x1, y1), (x2, y2)),
        };
        let [a1, a2, a3, a4, _] = &self.a;
        let slope = if x1 != x2 {
            (y2 - y1) / (x2 - x1)
        } else {
            let denom = rat(2) * y1 + a1 * x1 + a3;
            if y1 != y2 || denom.is_zero() {
                return RationalPoint::Infinity;
            }
            (rat(3) * x1 * x1 + rat(2) * a2 * x1 + a4 - a1 * y1) / denom
        };
        let x3 = &slope * &slope + a1 * &slope - a2 - x1 - x2;
        let y3 = -(&slope + a1) * &x3 - (y1 - &slope * x1) - a3;
        RationalPoint::Affine { x: x3, y: y3 }
    }

    fn multiple(&self, n: u32, pt: &RationalPoint) -> RationalPoint {
        (0..n).fold(RationalPoint::Infinity, |acc, _| self.add(&acc, pt))
    }

    /// Order of `pt` if it is at most `limit`.
    fn small_order(&self, pt: &RationalPoint, limit: u32) -> Option<u32> {
        let mut acc = pt.clone();
        for k in 1..=limit {
            if acc.is_infinity() {
                return Some(k);
            }
            acc = self.add(&acc, pt);
        }
        None
    }
}

/// A rational point together with its exact order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorsionPoint {
    pub point: RationalPoint,
    pub order: u32,
}

impl TorsionPoint {
    /// Validates `point` on `c` and computes its order (at most 7).
    pub fn new(c: &CurveQ, point: RationalPoint) -> Result<Self, VeluError> {
        let model = RationalModel::new(c);
        if !model.contains(&point) {
            return Err(VeluError::NotOnCurve(point.to_string()));
        }
        let order = model.small_order(&point, 7).ok_or_else(|| VeluError::NotTorsion(point.to_string()))?;
        Ok(TorsionPoint { point, order })
    }
}

fn exact_sqrt(v: &BigInt) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.sqrt();
    (&r * &r == *v).then_some(r)
}

/// All rational points of exact order `n` on `c`, sorted.
///
/// Works on the integral short model, where torsion points have integer
/// coordinates (Nagell–Lutz), so only integer roots of the division
/// polynomial need to be found; points are mapped back to the given model
/// and their order is verified by exact scalar multiplication.
pub fn rational_torsion(c: &CurveQ, n: u32) -> Result<Vec<TorsionPoint>, VeluError> {
    if !TORSION_RANGE.contains(&n) {
        return Err(VeluError::OrderOutOfRange(n));
    }
    let short = c.short_model()?;
    let (sa, sb) = short.short_coefficients().expect("short model");
    let psi = division_polynomial(&short, n)?;
    let (b2, _, _, _) = c.b_invariants();
    let [a1, _, a3, _, _] = c.coefficients().map(rat);
    let b2 = BigRational::from_integer(b2);
    let model = RationalModel::new(c);
    let mut out = Vec::new();
    for x_short in integer_roots(&psi) {
        let rhs = &x_short * &x_short * &x_short + BigInt::from(sa) * &x_short + BigInt::from(sb);
        let Some(y_short) = exact_sqrt(&rhs) else { continue };
        let ys = if y_short.is_zero() { vec![y_short] } else { vec![-y_short.clone(), y_short] };
        for y_short in ys {
            let point = if c.is_short() {
                RationalPoint::Affine {
                    x: BigRational::from_integer(x_short.clone()),
                    y: BigRational::from_integer(y_short),
                }
            } else {
                // inverse of (x, y) ↦ (36x + 3b2, 108(2y + a1x + a3))
                let x = (BigRational::from_integer(x_short.clone()) - rat(3) * &b2) / rat(36);
                let y = (BigRational::from_integer(y_short) / rat(108) - &a1 * &x - &a3) / rat(2);
                RationalPoint::Affine { x, y }
            };
            debug_assert!(model.contains(&point));
            if model.small_order(&point, n) == Some(n) {
                out.push(TorsionPoint { point, order: n });
            }
        }
    }
    out.sort();
    Ok(out)
}

/// A rational isogeny `source → target` with cyclic kernel of prime order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsogenyPair {
    pub source: CurveQ,
    pub target: CurveQ,
    pub degree: u32,
    pub kernel: TorsionPoint,
}

/// The Vélu quotient of `c` by the subgroup generated by `kernel`.
///
/// The target keeps `a1, a2, a3` and is rescaled by an integer `u` when
/// needed to make `a4, a6` integral. Source and target are checked to agree
/// in `a_p` at good primes up to 200 before returning.
pub fn velu_quotient(c: &CurveQ, kernel: &TorsionPoint) -> Result<IsogenyPair, VeluError> {
    let model = RationalModel::new(c);
    if !model.contains(&kernel.point) {
        return Err(VeluError::NotOnCurve(kernel.point.to_string()));
    }
    let actual = model.small_order(&kernel.point, 7).ok_or_else(|| VeluError::NotTorsion(kernel.point.to_string()))?;
    if actual != kernel.order {
        return Err(VeluError::WrongOrder { claimed: kernel.order, actual });
    }
    let ell = actual;
    if !matches!(ell, 2 | 3 | 5 | 7) {
        return Err(VeluError::UnsupportedDegree(ell));
    }
    let [a1, a2, a3, a4, a6] = &model.a;
    // one representative of each ±pair of nonzero kernel points
    let reps: Vec<RationalPoint> = (1..=ell / 2).map(|k| model.multiple(k, &kernel.point)).collect();
    let (mut v, mut w) = (BigRational::zero(), BigRational::zero());
    for q in &reps {
        let RationalPoint::Affine { x, y } = q else { unreachable!("nonzero kernel point") };
        let gx = rat(3) * x * x + rat(2) * a2 * x + a4 - a1 * y;
        let gy = -(rat(2) * y) - a1 * x - a3;
        let two_torsion = ell == 2;
        let vq = if two_torsion { gx.clone() } else { rat(2) * &gx - a1 * &gy };
        let uq = &gy * &gy;
        w += uq + x * &vq;
        v += vq;
    }
    let b2 = a1 * a1 + rat(4) * a2;
    let new_a4 = a4 - rat(5) * &v;
    let new_a6 = a6 - &b2 * &v - rat(7) * &w;
    let target = integral_model([a1.clone(), a2.clone(), a3.clone(), new_a4, new_a6])
        .ok_or_else(|| CurveError::Overflow(c.key()))?;
    let target = CurveQ::from_coefficients(target)?;
    for p in primes_in(5, SELF_CHECK_PMAX) {
        if !(c.has_good_reduction(p) && target.has_good_reduction(p)) {
            continue;
        }
        let (ra, rb) = (trace_ap(c, p).expect("good prime"), trace_ap(&target, p).expect("good prime"));
        if ra.a_p != rb.a_p {
            return Err(VeluError::SelfCheck { source_curve: c.key(), p });
        }
    }
    Ok(IsogenyPair { source: *c, target, degree: ell, kernel: kernel.clone() })
}

/// Scales `a_i ↦ u^i·a_i` by the lcm u of the denominators.
fn integral_model(a: [BigRational; 5]) -> Option<[i64; 5]> {
    let u = a.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let weights = [1u32, 2, 3, 4, 6];
    let mut out = [0i64; 5];
    for (i, (c, w)) in a.iter().zip(weights).enumerate() {
        let scaled = c * BigRational::from_integer(num_traits::pow(u.clone(), w as usize));
        debug_assert!(scaled.is_integer());
        out[i] = scaled.to_integer().to_i64()?;
    }
    Some(out)
}

fn is_squarefree(d: i64) -> bool {
    let n = d.unsigned_abs();
    let mut k = 2u64;
    while k * k <= n {
        if n.is_multiple_of(k * k) {
            return false;
        }
        k += 1;
    }
    true
}

/// `y² = x³ + A·d²·x + B·d³` for a short-form `c` and squarefree `d`.
pub fn quadratic_twist(c: &CurveQ, d: i64) -> Result<CurveQ, VeluError> {
    let (a, b) = c.short_coefficients().ok_or_else(|| CurveError::NotShortForm(c.key()))?;
    if d == 0 {
        return Err(VeluError::ZeroTwist);
    }
    if !is_squarefree(d) {
        return Err(VeluError::NotSquarefree(d));
    }
    let overflow = || VeluError::Curve(CurveError::Overflow(c.key()));
    let d2 = d.checked_mul(d).ok_or_else(overflow)?;
    let d3 = d2.checked_mul(d).ok_or_else(overflow)?;
    let a = a.checked_mul(d2).ok_or_else(overflow)?;
    let b = b.checked_mul(d3).ok_or_else(overflow)?;
    Ok(CurveQ::short(a, b)?)
}

/// Every prime ℓ ≤ 7 carrying rational ℓ-torsion on `c`, with one Vélu
/// quotient per rational kernel point (a ±-pair gives the same quotient, so
/// only the first point of each x-coordinate is used).
pub fn rational_isogenies(c: &CurveQ) -> Result<Vec<IsogenyPair>, VeluError> {
    let mut out = Vec::new();
    for ell in [2u32, 3, 5, 7] {
        let mut seen_x = Vec::new();
        for t in rational_torsion(c, ell)? {
            let RationalPoint::Affine { x, .. } = &t.point else { continue };
            if seen_x.contains(x) {
                continue;
            }
            seen_x.push(x.clone());
            out.push(velu_quotient(c, &t)?);
        }
    }
    debug_assert!(out.iter().all(|p| is_prime(p.degree as u64)));
    Ok(out)
}
