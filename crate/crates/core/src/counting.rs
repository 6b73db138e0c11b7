//! Point counts `#E(𝔽_p)`, Frobenius traces `a_p`, and the divisibility
//! indicator Φ_ℓ.
//!
//! Small primes are counted by enumerating x-coordinates. Above
//! [`NAIVE_THRESHOLD`] the count comes from baby-step/giant-step order
//! computations on random points of the curve and of its quadratic twist,
//! which pins a unique group order inside the Hasse interval.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, isqrt, legendre, prime_factors};
use crate::curves::{reduce_mod_p, CurveError, CurveQ, PointFp, ReducedCurve};

/// Primes up to and including this bound are always counted by enumeration.
pub const NAIVE_THRESHOLD: u64 = 229;

/// Points sampled (alternating between curve and twist) before BSGS gives up.
pub const BSGS_MAX_ATTEMPTS: usize = 64;

/// Smallest prime included in a-p tables and scans.
pub const MIN_SCAN_PRIME: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CountingError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("p = {0} is excluded from counting (must be a prime greater than 3)")]
    ExcludedPrime(u64),
    #[error("internal error: group order at p = {p} still ambiguous after {attempts} points")]
    InternalAmbiguity { p: u64, attempts: usize },
    #[error("cache belongs to curve {found}, expected {expected}")]
    CacheMismatch { expected: String, found: String },
    #[error("pmax = {0} is below the smallest scanned prime 5")]
    PmaxTooSmall(u64),
    #[error("a_p table line {line}: {reason}")]
    Table { line: usize, reason: String },
}

/// Frobenius trace and point count of one good reduction. Only `a_p` is
/// stored; the count is `p + 1 − a_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApRecord {
    pub p: u64,
    pub a_p: i64,
}

impl ApRecord {
    pub fn count(&self) -> u64 {
        (self.p as i64 + 1 - self.a_p) as u64
    }

    /// Φ_ℓ: 1 when ℓ divides the point count, else 0.
    pub fn phi(&self, ell: u64) -> u8 {
        u8::from(self.count().is_multiple_of(ell))
    }

    pub fn satisfies_hasse(&self) -> bool {
        (self.a_p as i128).pow(2) <= 4 * self.p as i128
    }
}

/// `#E(𝔽_p)` by summing Legendre symbols over x (p > 3), or by enumerating
/// all pairs (x, y) on the long model for p ∈ {2, 3}.
pub fn count_naive(e: &ReducedCurve) -> u64 {
    let p = e.p();
    if e.short_coefficients().is_none() || p <= 3 {
        return e.points().len() as u64;
    }
    let sum: i64 = (0..p).map(|x| 1 + legendre(e.rhs(x) as i64, p) as i64).sum();
    (1 + sum) as u64
}

/// `#E(𝔽_p)` via baby-step/giant-step in the Hasse interval.
///
/// Point orders on `E` and on its quadratic twist `E'` constrain `N = #E`
/// through `ord | N` and `ord' | 2p + 2 − N`; for p > 229 some point on one
/// of the two curves leaves a single candidate. Primes at or below
/// [`NAIVE_THRESHOLD`] are handed to [`count_naive`].
pub fn count_bsgs(e: &ReducedCurve) -> Result<u64, CountingError> {
    let p = e.p();
    if p <= NAIVE_THRESHOLD {
        return Ok(count_naive(e));
    }
    let (a, b) = e.short_coefficients().expect("p > 3 reductions are short");
    let twist = e.quadratic_twist();
    let width = isqrt(4 * p);
    let (lo, hi) = (p + 1 - width, p + 1 + width);
    let mut rng = ChaCha8Rng::seed_from_u64(p ^ (a << 20) ^ (b << 40));
    let (mut lcm_e, mut lcm_t) = (1u64, 1u64);
    for attempt in 0..BSGS_MAX_ATTEMPTS {
        let on_twist = attempt % 2 == 1;
        let curve = if on_twist { &twist } else { e };
        let pt = curve.random_point(&mut rng);
        let ord = point_order(curve, &pt, lo, hi);
        if on_twist {
            lcm_t = num_integer::lcm(lcm_t, ord);
        } else {
            lcm_e = num_integer::lcm(lcm_e, ord);
        }
        let first = lo.div_ceil(lcm_e) * lcm_e;
        let mut candidates = (first..=hi).step_by(lcm_e as usize).filter(|n| (2 * p + 2 - n).is_multiple_of(lcm_t));
        if let (Some(n), None) = (candidates.next(), candidates.next()) {
            return Ok(n);
        }
    }
    Err(CountingError::InternalAmbiguity { p, attempts: BSGS_MAX_ATTEMPTS })
}

/// Exact order of `pt`, given that some multiple of it lies in `[lo, hi]`.
fn point_order(e: &ReducedCurve, pt: &PointFp, lo: u64, hi: u64) -> u64 {
    let m = isqrt(hi - lo) + 1;
    let mut baby: HashMap<PointFp, u64> = HashMap::with_capacity(m as usize);
    let mut acc = PointFp::Infinity;
    for j in 0..m {
        baby.entry(acc).or_insert(j);
        acc = e.add(&acc, pt);
    }
    let giant = e.scalar_mul(m as i64, pt);
    let mut probe = e.scalar_mul(lo as i64, pt);
    let mut i = 0u64;
    let multiple = loop {
        // probe = (lo + i·m)·P; a hit on −probe = j·P gives (lo + i·m + j)·P = O
        if let Some(&j) = baby.get(&e.neg(&probe)) {
            break lo + i * m + j;
        }
        assert!(lo + i * m <= hi + m, "Hasse bound violated: no multiple of the point order in range");
        probe = e.add(&probe, &giant);
        i += 1;
    };
    let mut order = multiple;
    for q in prime_factors(multiple) {
        while order % q == 0 && e.scalar_mul((order / q) as i64, pt).is_infinity() {
            order /= q;
        }
    }
    order
}

/// The a_p record of `c` at the prime `p > 3`.
pub fn trace_ap(c: &CurveQ, p: u64) -> Result<ApRecord, CountingError> {
    if p <= 3 || !arith::is_prime(p) {
        return Err(CountingError::ExcludedPrime(p));
    }
    let e = reduce_mod_p(c, p)?;
    let count = if p <= NAIVE_THRESHOLD { count_naive(&e) } else { count_bsgs(&e)? };
    Ok(ApRecord { p, a_p: p as i64 + 1 - count as i64 })
}

/// Φ_ℓ(p) for the curve `c`: `min(1, v_ℓ(#E(𝔽_p)))`.
pub fn phi_ell(c: &CurveQ, p: u64, ell: u64) -> Result<u8, CountingError> {
    let rec = trace_ap(c, p)?;
    Ok(u8::from(arith::l_valuation(rec.count(), ell) > 0))
}

/// Frobenius traces of one curve at good primes, keyed by p.
///
/// The text form is one header line `curve=[a1,a2,a3,a4,a6]` followed by
/// `p,a_p` lines in ascending p, each LF-terminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApTable {
    curve_key: String,
    records: BTreeMap<u64, i64>,
}

impl ApTable {
    pub fn new(curve: &CurveQ) -> Self {
        ApTable { curve_key: curve.key(), records: BTreeMap::new() }
    }

    pub fn curve_key(&self) -> &str {
        &self.curve_key
    }

    pub fn get(&self, p: u64) -> Option<ApRecord> {
        self.records.get(&p).map(|&a_p| ApRecord { p, a_p })
    }

    pub fn records(&self) -> impl Iterator<Item = ApRecord> + '_ {
        self.records.iter().map(|(&p, &a_p)| ApRecord { p, a_p })
    }

    /// Records with `p ≤ pmax`.
    pub fn records_upto(&self, pmax: u64) -> impl Iterator<Item = ApRecord> + '_ {
        self.records.range(..=pmax).map(|(&p, &a_p)| ApRecord { p, a_p })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_p(&self) -> Option<u64> {
        self.records.keys().next_back().copied()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("curve={}\n", self.curve_key);
        for (p, a) in &self.records {
            writeln!(out, "{p},{a}").expect("write to string");
        }
        out
    }

    pub fn parse(text: &str) -> Result<ApTable, CountingError> {
        let err = |line: usize, reason: String| CountingError::Table { line, reason };
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(err(text.lines().count(), "missing final LF".into()));
        }
        let mut lines = text.split_terminator('\n');
        let header = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let key = header.strip_prefix("curve=").ok_or_else(|| err(1, format!("bad header {header:?}")))?;
        let curve: CurveQ = key.parse().map_err(|e| err(1, format!("{e}")))?;
        if curve.key() != key {
            return Err(err(1, format!("curve key {key:?} is not canonical")));
        }
        let mut records = BTreeMap::new();
        let mut last = 0u64;
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let (p, a) = line.split_once(',').ok_or_else(|| err(lineno, format!("expected p,a_p in {line:?}")))?;
            let p: u64 = p.parse().map_err(|_| err(lineno, format!("bad prime {p:?}")))?;
            let a_p: i64 = a.parse().map_err(|_| err(lineno, format!("bad trace {a:?}")))?;
            if p <= last {
                return Err(err(lineno, format!("rows not strictly ascending at p = {p}")));
            }
            let rec = ApRecord { p, a_p };
            if !rec.satisfies_hasse() {
                return Err(err(lineno, format!("a_p = {a_p} violates the Hasse bound at p = {p}")));
            }
            if rec.to_string() != line {
                return Err(err(lineno, format!("non-canonical row {line:?}")));
            }
            last = p;
            records.insert(p, a_p);
        }
        Ok(ApTable { curve_key: key.to_string(), records })
    }
}

impl std::fmt::Display for ApRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.p, self.a_p)
    }
}

/// Extends `cache` (or a fresh table) with every good prime `5 ≤ p ≤ pmax`.
///
/// Primes are evaluated in parallel; the table is ordered by p, so the
/// result does not depend on scheduling.
pub fn build_ap_table(c: &CurveQ, pmax: u64, cache: Option<ApTable>) -> Result<ApTable, CountingError> {
    if pmax < MIN_SCAN_PRIME {
        return Err(CountingError::PmaxTooSmall(pmax));
    }
    let mut table = match cache {
        Some(t) if t.curve_key != c.key() => {
            return Err(CountingError::CacheMismatch { expected: c.key(), found: t.curve_key })
        }
        Some(t) => t,
        None => ApTable::new(c),
    };
    let missing: Vec<u64> = arith::primes_in(MIN_SCAN_PRIME, pmax)
        .into_iter()
        .filter(|p| !table.records.contains_key(p) && c.has_good_reduction(*p))
        .collect();
    let fresh = missing.par_iter().map(|&p| trace_ap(c, p)).collect::<Result<Vec<_>, _>>()?;
    table.records.extend(fresh.into_iter().map(|r| (r.p, r.a_p)));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(s: &str) -> CurveQ {
        s.parse().unwrap()
    }

    /// Independent oracle: count affine solutions (x, y) by double loop.
    fn count_pairs(e: &ReducedCurve) -> u64 {
        e.points().len() as u64
    }

    #[test]
    fn naive_examples() {
        let e = reduce_mod_p(&curve("-1,0"), 5).unwrap();
        assert_eq!(count_pairs(&e), 8);
        assert_eq!(count_naive(&e), 8);
        let e = reduce_mod_p(&curve("0,1"), 7).unwrap();
        assert_eq!(count_pairs(&e), 12);
        assert_eq!(count_naive(&e), 12);
        let e = reduce_mod_p(&curve("0,1"), 5).unwrap();
        assert_eq!(count_pairs(&e), 6);
        assert_eq!(count_naive(&e), 6);
    }

    #[test]
    fn naive_agrees_with_pair_enumeration() {
        for c in ["-1,0", "0,1", "[0,0,1,-1,0]", "[0,-1,1,-10,-20]"] {
            let c = curve(c);
            for p in arith::primes_in(5, 150) {
                if let Ok(e) = reduce_mod_p(&c, p) {
                    assert_eq!(count_naive(&e), count_pairs(&e), "{c} at {p}");
                }
            }
        }
    }

    #[test]
    fn small_characteristic_uses_long_model() {
        let c = curve("[0,0,1,-1,0]");
        let e2 = reduce_mod_p(&c, 2).unwrap();
        let e3 = reduce_mod_p(&c, 3).unwrap();
        // y² + y = x³ − x over 𝔽₂ has 5 points, over 𝔽₃ has 7
        assert_eq!(count_naive(&e2), 5);
        assert_eq!(count_naive(&e3), 7);
    }

    #[test]
    fn bsgs_matches_naive_sample() {
        for c in ["-1,0", "0,1", "[0,0,1,-1,0]", "[0,-1,1,-10,-20]", "4,0"] {
            let c = curve(c);
            for p in arith::primes_in(230, 1200) {
                if let Ok(e) = reduce_mod_p(&c, p) {
                    assert_eq!(count_bsgs(&e).unwrap(), count_naive(&e), "{c} at {p}");
                }
            }
        }
    }

    #[test]
    fn bsgs_supersingular_x3_minus_x() {
        let c = curve("-1,0");
        for p in [7u64, 11, 19] {
            assert_eq!(count_naive(&reduce_mod_p(&c, p).unwrap()), p + 1);
        }
        for p in arith::primes_in(230, 5000).into_iter().filter(|p| p % 4 == 3) {
            assert_eq!(count_bsgs(&reduce_mod_p(&c, p).unwrap()).unwrap(), p + 1);
        }
    }

    #[test]
    fn bsgs_result_in_hasse_interval() {
        let c = curve("[0,0,1,-1,0]");
        for p in arith::primes_in(230, 20_000).into_iter().step_by(37) {
            let n = count_bsgs(&reduce_mod_p(&c, p).unwrap()).unwrap();
            let w = isqrt(4 * p);
            assert!(p + 1 - w <= n && n <= p + 1 + w);
        }
    }

    #[test]
    fn bsgs_handles_large_primes() {
        let c = curve("[0,-1,1,-10,-20]");
        for p in [999_983u64, 1_000_003] {
            let e = reduce_mod_p(&c, p).unwrap();
            let n = count_bsgs(&e).unwrap();
            assert_eq!(n % 5, 0, "rational 5-torsion divides the count");
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for _ in 0..5 {
                let pt = e.random_point(&mut rng);
                assert!(e.scalar_mul(n as i64, &pt).is_infinity());
            }
        }
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace_ap(&curve("-1,0"), 5).unwrap().a_p, -2);
        assert_eq!(trace_ap(&curve("0,1"), 7).unwrap().a_p, -4);
        assert_eq!(trace_ap(&curve("0,1"), 5).unwrap().a_p, 0);
        assert_eq!(trace_ap(&curve("-1,0"), 3), Err(CountingError::ExcludedPrime(3)));
        assert_eq!(trace_ap(&curve("-1,0"), 15), Err(CountingError::ExcludedPrime(15)));
        assert!(matches!(
            trace_ap(&curve("[0,-1,1,-10,-20]"), 11),
            Err(CountingError::Curve(CurveError::BadReduction { p: 11 }))
        ));
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_ell(&curve("-1,0"), 5, 2).unwrap(), 1);
        assert_eq!(phi_ell(&curve("-1,0"), 5, 3).unwrap(), 0);
        assert_eq!(phi_ell(&curve("0,1"), 7, 3).unwrap(), 1);
    }

    #[test]
    fn table_examples() {
        let c = curve("-1,0");
        let t = build_ap_table(&c, 10, None).unwrap();
        assert_eq!(t.records().map(|r| r.p).collect::<Vec<_>>(), vec![5, 7]);
        assert_eq!(t.to_text(), "curve=[0,0,0,-1,0]\n5,-2\n7,0\n");

        let big = build_ap_table(&c, 500, None).unwrap();
        let again = build_ap_table(&c, 100, Some(big.clone())).unwrap();
        assert_eq!(again, big);

        let wrong = build_ap_table(&curve("0,1"), 10, Some(t.clone()));
        assert!(matches!(wrong, Err(CountingError::CacheMismatch { .. })));
        assert_eq!(build_ap_table(&c, 4, None), Err(CountingError::PmaxTooSmall(4)));
    }

    #[test]
    fn table_extension_matches_fresh_build() {
        let c = curve("[0,0,1,-1,0]");
        let small = build_ap_table(&c, 300, None).unwrap();
        let extended = build_ap_table(&c, 2000, Some(small)).unwrap();
        assert_eq!(extended, build_ap_table(&c, 2000, None).unwrap());
    }

    #[test]
    fn table_independent_of_thread_count() {
        let c = curve("[0,-1,1,-10,-20]");
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| build_ap_table(&c, 3000, None).unwrap().to_text())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn table_parse_errors() {
        assert!(ApTable::parse("curve=[0,0,0,-1,0]\n5,-2\n7,0\n").is_ok());
        let cases = [
            ("", 1),
            ("curve=[0,0,0,-1,0]\n7,0\n5,-2\n", 3),
            ("curve=[0,0,0,-1,0]\n5,-2\nseven,0\n", 3),
            ("nocurve\n5,-2\n", 1),
            ("curve=[0,0,0,-1,0]\n5,9\n", 2),
            ("curve=[0,0,0,-1,0]\n5,+2\n", 2),
            ("curve=[0,0,0,-1,0]\n5,-2", 2),
        ];
        for (text, line) in cases {
            match ApTable::parse(text) {
                Err(CountingError::Table { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} parsed as {other:?}"),
            }
        }
    }

    #[test]
    fn records_obey_hasse_and_phi_definition() {
        let c = curve("[0,0,1,-1,0]");
        let t = build_ap_table(&c, 3000, None).unwrap();
        for r in t.records() {
            assert!(r.satisfies_hasse());
            for ell in [2u64, 3, 5, 7, 11] {
                assert_eq!(r.phi(ell) == 1, (r.p as i64 + 1 - r.a_p) % ell as i64 == 0);
            }
        }
    }
}
