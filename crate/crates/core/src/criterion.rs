//! Divisibility criteria for isogeny.
//!
//! For a prime ℓ and a good prime p ≠ ℓ, Frobenius acts on the ℓ-torsion
//! with characteristic polynomial `t² − a_p·t + p` over 𝔽_ℓ. Evaluating at
//! `t = 1` gives `det(Frob − 1) = 1 − a_p + p = #E(𝔽_p)` mod ℓ, so ℓ divides
//! the point count exactly when Frobenius fixes a nonzero ℓ-torsion point.
//!
//! Sampling Frobenius pairs over many primes p gives a finite view of the
//! joint image Γ_ℓ of two curves. [`implication_scan`] records every prime
//! where `ℓ | #A(𝔽_p)` but `ℓ ∤ #A'(𝔽_p)` (and the mirror). Isogenous curves
//! share all `a_p`, so such a prime, or any a_p mismatch found by
//! [`faltings_check`], certifies non-isogeny. The converse direction is only
//! heuristic: a clean scan up to `pmax` over finitely many ℓ is evidence, not
//! proof.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, Residue};
use crate::counting::{build_ap_table, ApRecord, ApTable, CountingError};
use crate::curves::CurveQ;

/// Default ℓ-set: the first fifteen odd primes.
pub const DEFAULT_ELLS: [u64; 15] = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Supersingular fraction above which a curve is classified as likely CM.
pub const CM_FRACTION_THRESHOLD: f64 = 0.25;

/// Smallest bound accepted by [`cm_heuristic`].
pub const CM_MIN_PMAX: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CriterionError {
    #[error(transparent)]
    Counting(#[from] CountingError),
    #[error("ℓ = {0} equals the residue characteristic")]
    EllEqualsP(u64),
    #[error("ℓ = {0} is not prime")]
    NotPrime(u64),
    #[error("the set of primes ℓ is empty")]
    EmptyEllSet,
    #[error("pmax = {got} is below the required minimum {min}")]
    PmaxTooSmall { got: u64, min: u64 },
}

/// Characteristic-polynomial data of Frobenius at p acting on ℓ-torsion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrobeniusClass {
    pub p: u64,
    pub ell: u64,
    /// `a_p mod ℓ`
    pub trace: Residue,
    /// `p mod ℓ`, the cyclotomic character at Frobenius
    pub det: Residue,
}

pub fn frobenius_class(rec: &ApRecord, ell: u64) -> Result<FrobeniusClass, CriterionError> {
    if !is_prime(ell) {
        return Err(CriterionError::NotPrime(ell));
    }
    if ell == rec.p {
        return Err(CriterionError::EllEqualsP(ell));
    }
    Ok(FrobeniusClass { p: rec.p, ell, trace: Residue::new(rec.a_p, ell), det: Residue::new(rec.p as i64, ell) })
}

/// `det(φ − 1)` for any 2×2 matrix with characteristic polynomial
/// `t² − trace·t + det`, i.e. `1 − trace + det`.
pub fn det_frob_minus_one(fc: &FrobeniusClass) -> Residue {
    let one = Residue::new(1, fc.ell);
    one - fc.trace + fc.det
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Implication {
    Holds,
    Violated { witnesses: Vec<u64> },
}

impl Implication {
    fn from_witnesses(witnesses: Vec<u64>) -> Self {
        if witnesses.is_empty() {
            Implication::Holds
        } else {
            Implication::Violated { witnesses }
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Implication::Holds)
    }

    pub fn witnesses(&self) -> &[u64] {
        match self {
            Implication::Holds => &[],
            Implication::Violated { witnesses } => witnesses,
        }
    }
}

/// Scan outcome for one ℓ.
///
/// `forward` is "ℓ | #A ⇒ ℓ | #A'", `reverse` the mirror.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllEntry {
    pub ell: u64,
    pub primes_scanned: usize,
    pub forward: Implication,
    pub reverse: Implication,
    pub uninformative_a: bool,
    pub uninformative_b: bool,
}

impl EllEntry {
    pub fn informative(&self) -> bool {
        !(self.uninformative_a || self.uninformative_b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub curve_a: String,
    pub curve_b: String,
    pub pmax: u64,
    pub entries: Vec<EllEntry>,
}

impl ScanReport {
    pub fn ells(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.ell).collect()
    }

    /// First `(ℓ, p)` violating the forward implication, in ℓ-set order.
    pub fn first_forward_violation(&self) -> Option<(u64, u64)> {
        self.entries.iter().find_map(|e| e.forward.witnesses().first().map(|&p| (e.ell, p)))
    }

    pub fn first_reverse_violation(&self) -> Option<(u64, u64)> {
        self.entries.iter().find_map(|e| e.reverse.witnesses().first().map(|&p| (e.ell, p)))
    }
}

fn validate_ells(ells: &[u64]) -> Result<(), CriterionError> {
    if ells.is_empty() {
        return Err(CriterionError::EmptyEllSet);
    }
    match ells.iter().find(|&&l| !is_prime(l)) {
        Some(&bad) => Err(CriterionError::NotPrime(bad)),
        None => Ok(()),
    }
}

fn check_pmax(pmax: u64, min: u64) -> Result<(), CriterionError> {
    if pmax < min {
        return Err(CriterionError::PmaxTooSmall { got: pmax, min });
    }
    Ok(())
}

/// Scans "ℓ | #A(𝔽_p) ⇒ ℓ | #A'(𝔽_p)" in both directions over the common
/// good primes `5 ≤ p ≤ pmax`, skipping p = ℓ.
pub fn implication_scan(a: &CurveQ, b: &CurveQ, ells: &[u64], pmax: u64) -> Result<ScanReport, CriterionError> {
    validate_ells(ells)?;
    check_pmax(pmax, 5)?;
    let ta = build_ap_table(a, pmax, None)?;
    let tb = build_ap_table(b, pmax, None)?;
    implication_scan_tables(&ta, &tb, ells, pmax)
}

/// [`implication_scan`] over precomputed tables, each covering `pmax`.
pub fn implication_scan_tables(
    ta: &ApTable,
    tb: &ApTable,
    ells: &[u64],
    pmax: u64,
) -> Result<ScanReport, CriterionError> {
    validate_ells(ells)?;
    check_pmax(pmax, 5)?;
    let common: Vec<(ApRecord, ApRecord)> =
        ta.records_upto(pmax).filter_map(|ra| tb.get(ra.p).map(|rb| (ra, rb))).collect();
    let entries = ells
        .iter()
        .map(|&ell| {
            let sampled = common.iter().filter(|(ra, _)| ra.p != ell);
            let mut forward = Vec::new();
            let mut reverse = Vec::new();
            let mut scanned = 0;
            for (ra, rb) in sampled {
                scanned += 1;
                match (ra.phi(ell), rb.phi(ell)) {
                    (1, 0) => forward.push(ra.p),
                    (0, 1) => reverse.push(ra.p),
                    _ => {}
                }
            }
            EllEntry {
                ell,
                primes_scanned: scanned,
                forward: Implication::from_witnesses(forward),
                reverse: Implication::from_witnesses(reverse),
                uninformative_a: uninformative_in_table(ta, ell, pmax),
                uninformative_b: uninformative_in_table(tb, ell, pmax),
            }
        })
        .collect();
    Ok(ScanReport { curve_a: ta.curve_key().into(), curve_b: tb.curve_key().into(), pmax, entries })
}

/// True when ℓ divides `#E(𝔽_p)` at every good `5 ≤ p ≤ pmax`, p ≠ ℓ.
///
/// Rational ℓ-torsion forces this, and then Φ_ℓ carries no information
/// about the isogeny class.
pub fn uninformative_ell(c: &CurveQ, ell: u64, pmax: u64) -> Result<bool, CriterionError> {
    validate_ells(&[ell])?;
    check_pmax(pmax, 5)?;
    let table = build_ap_table(c, pmax, None)?;
    Ok(uninformative_in_table(&table, ell, pmax))
}

pub fn uninformative_in_table(table: &ApTable, ell: u64, pmax: u64) -> bool {
    table.records_upto(pmax).filter(|r| r.p != ell).all(|r| r.phi(ell) == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FaltingsResult {
    AllEqual { primes_compared: usize },
    FirstMismatch { p: u64, a_p: i64, a_p_other: i64 },
}

/// Compares `a_p` of the two curves at every common good prime `≤ pmax`.
/// A mismatch proves the curves are not isogenous over ℚ.
pub fn faltings_check(a: &CurveQ, b: &CurveQ, pmax: u64) -> Result<FaltingsResult, CriterionError> {
    check_pmax(pmax, 5)?;
    let ta = build_ap_table(a, pmax, None)?;
    let tb = build_ap_table(b, pmax, None)?;
    Ok(faltings_check_tables(&ta, &tb, pmax))
}

pub fn faltings_check_tables(ta: &ApTable, tb: &ApTable, pmax: u64) -> FaltingsResult {
    let mut compared = 0;
    for ra in ta.records_upto(pmax) {
        let Some(rb) = tb.get(ra.p) else { continue };
        if ra.a_p != rb.a_p {
            return FaltingsResult::FirstMismatch { p: ra.p, a_p: ra.a_p, a_p_other: rb.a_p };
        }
        compared += 1;
    }
    FaltingsResult::AllEqual { primes_compared: compared }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApMismatch {
    pub p: u64,
    pub a_p: i64,
    pub a_p_other: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiViolation {
    pub ell: u64,
    pub p: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    /// Sound: at least one of the two witnesses is present.
    NotIsogenous { ap_mismatch: Option<ApMismatch>, phi_violation: Option<PhiViolation> },
    /// Heuristic: nothing up to `pmax` separates the curves.
    ConsistentWithIsogeny { pmax: u64, ells: Vec<u64>, informative_ells: usize, no_information: bool },
}

impl Verdict {
    pub fn is_not_isogenous(&self) -> bool {
        matches!(self, Verdict::NotIsogenous { .. })
    }
}

/// Combines a scan with the a_p comparison over the same `pmax`.
pub fn verdict(report: &ScanReport, faltings: &FaltingsResult) -> Verdict {
    let ap_mismatch = match *faltings {
        FaltingsResult::FirstMismatch { p, a_p, a_p_other } => Some(ApMismatch { p, a_p, a_p_other }),
        FaltingsResult::AllEqual { .. } => None,
    };
    let phi_violation = report.first_forward_violation().map(|(ell, p)| PhiViolation { ell, p });
    if ap_mismatch.is_some() || phi_violation.is_some() {
        return Verdict::NotIsogenous { ap_mismatch, phi_violation };
    }
    let informative = report.entries.iter().filter(|e| e.informative()).count();
    Verdict::ConsistentWithIsogeny {
        pmax: report.pmax,
        ells: report.ells(),
        informative_ells: informative,
        no_information: informative == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmClass {
    LikelyCM,
    LikelyNonCM,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmEstimate {
    pub pmax: u64,
    pub sampled: usize,
    pub supersingular: usize,
    pub fraction: f64,
    pub classification: CmClass,
}

/// Fraction of good primes `≤ pmax` with `a_p = 0`. CM curves have
/// supersingular density 1/2, non-CM curves density 0.
pub fn cm_heuristic(c: &CurveQ, pmax: u64) -> Result<CmEstimate, CriterionError> {
    check_pmax(pmax, CM_MIN_PMAX)?;
    let table = build_ap_table(c, pmax, None)?;
    Ok(cm_from_table(&table, pmax))
}

pub fn cm_from_table(table: &ApTable, pmax: u64) -> CmEstimate {
    let (sampled, supersingular) =
        table.records_upto(pmax).fold((0, 0), |(n, s), r| (n + 1, s + usize::from(r.a_p == 0)));
    let fraction = if sampled == 0 { 0.0 } else { supersingular as f64 / sampled as f64 };
    let classification = if fraction > CM_FRACTION_THRESHOLD { CmClass::LikelyCM } else { CmClass::LikelyNonCM };
    CmEstimate { pmax, sampled, supersingular, fraction, classification }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::trace_ap;

    fn curve(s: &str) -> CurveQ {
        s.parse().unwrap()
    }

    fn rec(p: u64, a_p: i64) -> ApRecord {
        ApRecord { p, a_p }
    }

    #[test]
    fn frobenius_class_examples() {
        let fc = frobenius_class(&rec(5, -2), 3).unwrap();
        assert_eq!((fc.trace.value(), fc.det.value()), (1, 2));
        let fc = frobenius_class(&rec(7, -4), 3).unwrap();
        assert_eq!((fc.trace.value(), fc.det.value()), (2, 1));
        assert_eq!(frobenius_class(&rec(5, -2), 5), Err(CriterionError::EllEqualsP(5)));
        assert_eq!(frobenius_class(&rec(5, -2), 4), Err(CriterionError::NotPrime(4)));
    }

    #[test]
    fn det_examples() {
        assert_eq!(det_frob_minus_one(&frobenius_class(&rec(5, -2), 2).unwrap()).value(), 0);
        assert_eq!(det_frob_minus_one(&frobenius_class(&rec(7, -4), 3).unwrap()).value(), 0);
        assert_eq!(det_frob_minus_one(&frobenius_class(&rec(5, -2), 3).unwrap()).value(), 2);
    }

    /// Independent route: det(M − I) of an explicit companion matrix.
    #[test]
    fn det_matches_companion_matrix() {
        let c = curve("[0,0,1,-1,0]");
        for p in crate::arith::primes_in(5, 400).into_iter().filter(|&p| p != 37) {
            let r = trace_ap(&c, p).unwrap();
            for ell in crate::arith::primes_in(2, 50).into_iter().filter(|&l| l != p) {
                let l = ell as i64;
                // companion of t² − a t + d: [[0, −d], [1, a]]
                let (a, d) = (r.a_p.rem_euclid(l), (p as i64).rem_euclid(l));
                let m = [[-1, -d], [1, a - 1]];
                let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).rem_euclid(l);
                let fc = frobenius_class(&r, ell).unwrap();
                assert_eq!(det as u64, det_frob_minus_one(&fc).value());
                assert_eq!(det == 0, r.phi(ell) == 1);
            }
        }
    }

    #[test]
    fn scan_example_reverse_violation() {
        let rep = implication_scan(&curve("-1,0"), &curve("0,1"), &[3], 5).unwrap();
        let e = &rep.entries[0];
        assert_eq!(e.primes_scanned, 1);
        assert!(e.forward.holds());
        assert_eq!(e.reverse.witnesses(), &[5]);
        assert_eq!(rep.first_reverse_violation(), Some((3, 5)));
    }

    #[test]
    fn scan_is_reflexive() {
        let c = curve("[0,-1,1,-10,-20]");
        let rep = implication_scan(&c, &c, &DEFAULT_ELLS, 2000).unwrap();
        assert!(rep.entries.iter().all(|e| e.forward.holds() && e.reverse.holds()));
    }

    #[test]
    fn scan_symmetry() {
        let (a, b) = (curve("[0,0,1,-1,0]"), curve("0,1"));
        let ab = implication_scan(&a, &b, &DEFAULT_ELLS, 3000).unwrap();
        let ba = implication_scan(&b, &a, &DEFAULT_ELLS, 3000).unwrap();
        for (x, y) in ab.entries.iter().zip(&ba.entries) {
            assert_eq!(x.forward, y.reverse);
            assert_eq!(x.reverse, y.forward);
            assert_eq!((x.uninformative_a, x.uninformative_b), (y.uninformative_b, y.uninformative_a));
        }
    }

    #[test]
    fn scan_skips_ell_equal_p() {
        let rep = implication_scan(&curve("-1,0"), &curve("0,1"), &[5, 7], 7).unwrap();
        assert_eq!(rep.entries[0].primes_scanned, 1);
        assert_eq!(rep.entries[1].primes_scanned, 1);
    }

    #[test]
    fn scan_rejects_bad_input() {
        let c = curve("-1,0");
        assert_eq!(implication_scan(&c, &c, &[], 100), Err(CriterionError::EmptyEllSet));
        assert_eq!(implication_scan(&c, &c, &[9], 100), Err(CriterionError::NotPrime(9)));
        assert!(matches!(implication_scan(&c, &c, &[3], 4), Err(CriterionError::PmaxTooSmall { .. })));
    }

    #[test]
    fn uninformative_examples() {
        assert!(uninformative_ell(&curve("-1,0"), 2, 2000).unwrap());
        assert!(!uninformative_ell(&curve("-1,0"), 7, 100).unwrap());
        assert!(uninformative_ell(&curve("[0,-1,1,-10,-20]"), 5, 2000).unwrap());
        assert!(!uninformative_ell(&curve("[0,0,1,-1,0]"), 3, 2000).unwrap());
    }

    #[test]
    fn faltings_examples() {
        let e = curve("-1,0");
        assert_eq!(
            faltings_check(&e, &curve("-4,0"), 10).unwrap(),
            FaltingsResult::FirstMismatch { p: 5, a_p: -2, a_p_other: 2 }
        );
        assert!(matches!(faltings_check(&e, &e, 500).unwrap(), FaltingsResult::AllEqual { .. }));
        assert!(matches!(faltings_check(&e, &curve("4,0"), 2000).unwrap(), FaltingsResult::AllEqual { .. }));
    }

    #[test]
    fn verdict_prefers_reporting_both_witnesses() {
        let (a, b) = (curve("0,1"), curve("-1,0"));
        let rep = implication_scan(&a, &b, &[3], 100).unwrap();
        let v = verdict(&rep, &faltings_check(&a, &b, 100).unwrap());
        match v {
            Verdict::NotIsogenous { ap_mismatch, phi_violation } => {
                assert_eq!(ap_mismatch, Some(ApMismatch { p: 5, a_p: 0, a_p_other: -2 }));
                assert_eq!(phi_violation, Some(PhiViolation { ell: 3, p: 5 }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn verdict_counts_informative_ells() {
        let (a, b) = (curve("-1,0"), curve("4,0"));
        let rep = implication_scan(&a, &b, &[2], 500).unwrap();
        let v = verdict(&rep, &faltings_check(&a, &b, 500).unwrap());
        assert_eq!(
            v,
            Verdict::ConsistentWithIsogeny { pmax: 500, ells: vec![2], informative_ells: 0, no_information: true }
        );
        let rep = implication_scan(&a, &b, &[2, 3, 5], 500).unwrap();
        let v = verdict(&rep, &faltings_check(&a, &b, 500).unwrap());
        assert!(matches!(v, Verdict::ConsistentWithIsogeny { informative_ells: 2, no_information: false, .. }));
    }

    #[test]
    fn forward_violation_alone_yields_not_isogenous() {
        let rep = ScanReport {
            curve_a: "a".into(),
            curve_b: "b".into(),
            pmax: 10,
            entries: vec![EllEntry {
                ell: 3,
                primes_scanned: 2,
                forward: Implication::Violated { witnesses: vec![7] },
                reverse: Implication::Holds,
                uninformative_a: false,
                uninformative_b: false,
            }],
        };
        let v = verdict(&rep, &FaltingsResult::AllEqual { primes_compared: 2 });
        assert_eq!(v, Verdict::NotIsogenous { ap_mismatch: None, phi_violation: Some(PhiViolation { ell: 3, p: 7 }) });
    }

    #[test]
    fn cm_rejects_small_pmax() {
        assert!(matches!(cm_heuristic(&curve("-1,0"), 999), Err(CriterionError::PmaxTooSmall { .. })));
        let est = cm_heuristic(&curve("-1,0"), 1000).unwrap();
        assert_eq!(est.classification, CmClass::LikelyCM);
    }

    #[test]
    fn json_shape_is_stable() {
        let rep = implication_scan(&curve("-1,0"), &curve("0,1"), &[3], 5).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert_eq!(
            json,
            r#"{"curve_a":"[0,0,0,-1,0]","curve_b":"[0,0,0,0,1]","pmax":5,"entries":[{"ell":3,"primes_scanned":1,"forward":{"status":"holds"},"reverse":{"status":"violated","witnesses":[5]},"uninformative_a":false,"uninformative_b":true}]}"#
        );
    }
}
