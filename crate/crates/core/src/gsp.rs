//! Small matrix groups over 𝔽_ℓ: symplectic similitudes, the diagonal
//! multiplier-one elements `diag(λ·Id_g, λ⁻¹·Id_g)`, and Cartan subgroups of
//! GL₂(𝔽_ℓ).
//!
//! The symplectic form is fixed as `J = [[0, Id_g], [−Id_g, 0]]`; a matrix
//! M is a similitude with multiplier λ when `Mᵀ·J·M = λ·J`.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{divisors, inv_mod, is_prime, mul_mod, pow_mod, sub_mod};

/// Largest ℓ for which Cartan subgroups are enumerated.
pub const CARTAN_MAX_ELL: u64 = 23;

/// Largest supported g (matrices up to 6×6).
pub const MAX_GENUS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GspError {
    #[error("ℓ = {0} is not an odd prime")]
    BadModulus(u64),
    #[error("g = {0} is outside 1..=3")]
    BadGenus(usize),
    #[error("matrix is {got}×{got} mod {got_ell}, expected {want}×{want} mod {want_ell}")]
    DimensionMismatch { got: usize, got_ell: u64, want: usize, want_ell: u64 },
    #[error("matrix is not a symplectic similitude")]
    NotSimilitude,
    #[error("λ must be a unit mod ℓ")]
    ZeroLambda,
    #[error("Cartan enumeration is limited to ℓ ≤ 23, got {0}")]
    EnumerationBound(u64),
}

/// Dense square matrix over 𝔽_ℓ, row-major.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatrixModL {
    dim: usize,
    ell: u64,
    entries: Vec<u64>,
}

impl fmt::Debug for MatrixModL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} mod {}", self.rows(), self.ell)
    }
}

impl MatrixModL {
    pub fn from_rows(rows: &[Vec<i64>], ell: u64) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        let entries = rows.iter().flatten().map(|&v| v.rem_euclid(ell as i64) as u64).collect();
        MatrixModL { dim, ell, entries }
    }

    pub fn zero(dim: usize, ell: u64) -> Self {
        MatrixModL { dim, ell, entries: vec![0; dim * dim] }
    }

    pub fn identity(dim: usize, ell: u64) -> Self {
        Self::diagonal(&vec![1; dim], ell)
    }

    pub fn diagonal(diag: &[u64], ell: u64) -> Self {
        let mut m = Self::zero(diag.len(), ell);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d % ell);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.dim + j] = v % self.ell;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.dim).map(<[u64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero(self.dim, self.ell);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!((self.dim, self.ell), (rhs.dim, rhs.ell), "shape mismatch");
        let (n, l) = (self.dim, self.ell);
        let mut out = Self::zero(n, l);
        for i in 0..n {
            for j in 0..n {
                let s = (0..n).fold(0u64, |acc, k| (acc + mul_mod(self.get(i, k), rhs.get(k, j), l)) % l);
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn scale(&self, s: u64) -> Self {
        let entries = self.entries.iter().map(|&v| mul_mod(v, s % self.ell, self.ell)).collect();
        MatrixModL { dim: self.dim, ell: self.ell, entries }
    }

    pub fn minus_identity(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.set(i, i, sub_mod(self.get(i, i), 1, self.ell));
        }
        m
    }

    pub fn is_scalar(&self) -> bool {
        let d = self.get(0, 0);
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == if i == j { d } else { 0 }))
    }

    /// Row echelon form; returns the rank and the determinant.
    fn eliminate(&self) -> (usize, u64) {
        let (n, l) = (self.dim, self.ell);
        let mut a = self.rows();
        let mut det = 1u64;
        let mut rank = 0;
        for col in 0..n {
            let Some(pivot) = (rank..n).find(|&r| a[r][col] != 0) else {
                det = 0;
                continue;
            };
            if pivot != rank {
                a.swap(pivot, rank);
                det = sub_mod(0, det, l);
            }
            let pv = a[rank][col];
            det = mul_mod(det, pv, l);
            let inv = inv_mod(pv as i64, l).expect("nonzero pivot in a prime field");
            let (upper, lower) = a.split_at_mut(rank + 1);
            let pivot_row = &upper[rank];
            for row in lower {
                let factor = mul_mod(row[col], inv, l);
                if factor == 0 {
                    continue;
                }
                for (x, &y) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x = sub_mod(*x, mul_mod(factor, y, l), l);
                }
            }
            rank += 1;
        }
        (rank, if rank == n { det } else { 0 })
    }

    pub fn det(&self) -> u64 {
        self.eliminate().1
    }

    pub fn rank(&self) -> usize {
        self.eliminate().0
    }

    /// Dimension of `ker(M − Id)`, the space of fixed vectors.
    pub fn fixed_space_dim(&self) -> usize {
        self.dim - self.minus_identity().rank()
    }
}

/// `(g, ℓ, J)` for GSp_{2g}(𝔽_ℓ).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymplecticContext {
    g: usize,
    ell: u64,
    form: MatrixModL,
}

impl SymplecticContext {
    pub fn new(g: usize, ell: u64) -> Result<Self, GspError> {
        if !(1..=MAX_GENUS).contains(&g) {
            return Err(GspError::BadGenus(g));
        }
        if ell == 2 || !is_prime(ell) {
            return Err(GspError::BadModulus(ell));
        }
        let mut form = MatrixModL::zero(2 * g, ell);
        for i in 0..g {
            form.set(i, g + i, 1);
            form.set(g + i, i, ell - 1);
        }
        Ok(SymplecticContext { g, ell, form })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn form(&self) -> &MatrixModL {
        &self.form
    }

    fn check(&self, m: &MatrixModL) -> Result<(), GspError> {
        if m.dim != 2 * self.g || m.ell != self.ell {
            return Err(GspError::DimensionMismatch {
                got: m.dim,
                got_ell: m.ell,
                want: 2 * self.g,
                want_ell: self.ell,
            });
        }
        Ok(())
    }
}

/// The λ with `Mᵀ·J·M = λ·J`, if M is a similitude.
pub fn multiplier(m: &MatrixModL, ctx: &SymplecticContext) -> Result<u64, GspError> {
    ctx.check(m)?;
    let gram = m.transpose().mul(&ctx.form).mul(m);
    // J[0][g] = 1, so λ can be read off there
    let lambda = gram.get(0, ctx.g);
    if lambda == 0 || gram != ctx.form.scale(lambda) {
        return Err(GspError::NotSimilitude);
    }
    Ok(lambda)
}

/// `diag(λ·Id_g, λ⁻¹·Id_g)`.
pub fn magic_element(lambda: u64, ctx: &SymplecticContext) -> Result<MatrixModL, GspError> {
    let l = ctx.ell;
    let lambda = lambda % l;
    if lambda == 0 {
        return Err(GspError::ZeroLambda);
    }
    let inv = inv_mod(lambda as i64, l).expect("unit");
    let diag: Vec<u64> = (0..2 * ctx.g).map(|i| if i < ctx.g { lambda } else { inv }).collect();
    Ok(MatrixModL::diagonal(&diag, l))
}

/// True when M fixes no nonzero vector, i.e. `det(M − Id) ≠ 0`.
pub fn fixed_point_free(m: &MatrixModL) -> bool {
    let by_det = m.minus_identity().det() != 0;
    debug_assert_eq!(by_det, m.fixed_space_dim() == 0, "determinant and kernel routes disagree");
    by_det
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ClauseOutcome {
    Pass,
    Fail { detail: String, counterexample: Option<MatrixModL> },
    Vacuous { reason: String },
}

impl ClauseOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, ClauseOutcome::Pass)
    }

    pub fn failed(&self) -> bool {
        matches!(self, ClauseOutcome::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ell: u64,
    pub g: usize,
    pub c: u64,
    /// (i) every `diag(λ·Id, λ⁻¹·Id)` has multiplier 1
    pub multiplier_one: ClauseOutcome,
    /// (ii) `diag(λ·Id, λ⁻¹·Id)` is fixed-point-free exactly when λ ≠ 1
    pub fixed_point_free_iff_nontrivial: ClauseOutcome,
    /// (iii) when ℓ − 1 > c, each subgroup of 𝔽_ℓ^× of index ≤ c has some λ ≠ 1
    pub small_index_subgroups: ClauseOutcome,
    /// −Id fixes no nonzero vector
    pub minus_identity_fixed_point_free: bool,
}

impl VerificationReport {
    /// No clause failed (vacuous clauses count as not failed).
    pub fn all_pass(&self) -> bool {
        !(self.multiplier_one.failed()
            || self.fixed_point_free_iff_nontrivial.failed()
            || self.small_index_subgroups.failed())
            && self.minus_identity_fixed_point_free
    }
}

/// Exhaustive check of the multiplier-one diagonal elements over 𝔽_ℓ^×.
pub fn verify_magic_lemma(ell: u64, g: usize, c: u64) -> Result<VerificationReport, GspError> {
    let ctx = SymplecticContext::new(g, ell)?;
    let units: Vec<u64> = (1..ell).collect();
    let elements: Vec<(u64, MatrixModL)> =
        units.par_iter().map(|&l| magic_element(l, &ctx).map(|m| (l, m))).collect::<Result<_, _>>()?;

    let multiplier_one = match elements.iter().find(|(_, m)| multiplier(m, &ctx) != Ok(1)) {
        None => ClauseOutcome::Pass,
        Some((l, m)) => ClauseOutcome::Fail {
            detail: format!("λ = {l} has multiplier {:?}", multiplier(m, &ctx)),
            counterexample: Some(m.clone()),
        },
    };

    let fixed_point_free_iff_nontrivial = match elements.iter().find(|(l, m)| fixed_point_free(m) != (*l != 1)) {
        None => ClauseOutcome::Pass,
        Some((l, m)) => ClauseOutcome::Fail {
            detail: format!("λ = {l}: fixed_point_free = {}", fixed_point_free(m)),
            counterexample: Some(m.clone()),
        },
    };

    let order = ell - 1;
    let small_index_subgroups = if order <= c {
        ClauseOutcome::Vacuous { reason: format!("ℓ − 1 = {order} does not exceed c = {c}") }
    } else {
        // 𝔽_ℓ^× is cyclic: one subgroup per divisor d of ℓ − 1, namely {λ : λ^d = 1}
        let failing = divisors(order).into_iter().filter(|d| order / d <= c).find(|&d| {
            !elements.iter().any(|(l, m)| {
                pow_mod(*l as i64, d, ell) == 1 && *l != 1 && fixed_point_free(m) && multiplier(m, &ctx) == Ok(1)
            })
        });
        match failing {
            None => ClauseOutcome::Pass,
            Some(d) => ClauseOutcome::Fail {
                detail: format!("subgroup of order {d} (index {}) has no fixed-point-free element", order / d),
                counterexample: None,
            },
        }
    };

    let minus_id = MatrixModL::identity(2 * g, ell).scale(ell - 1);
    Ok(VerificationReport {
        ell,
        g,
        c,
        multiplier_one,
        fixed_point_free_iff_nontrivial,
        small_index_subgroups,
        minus_identity_fixed_point_free: fixed_point_free(&minus_id),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartanKind {
    Split,
    Nonsplit,
}

/// Smallest quadratic non-residue mod ℓ.
pub fn smallest_nonsquare(ell: u64) -> u64 {
    (2..ell).find(|&e| crate::arith::legendre(e as i64, ell) == -1).expect("odd prime has a non-residue")
}

/// All elements of the split (diagonal) or nonsplit Cartan subgroup of
/// GL₂(𝔽_ℓ), sorted.
///
/// The nonsplit one is 𝔽_{ℓ²}^× acting on 𝔽_{ℓ²} = 𝔽_ℓ(√ε) by
/// multiplication in the basis {1, √ε}: `a + b√ε ↦ [[a, εb], [b, a]]`.
pub fn cartan_subgroup(ell: u64, kind: CartanKind) -> Result<Vec<MatrixModL>, GspError> {
    if ell == 2 || !is_prime(ell) {
        return Err(GspError::BadModulus(ell));
    }
    if ell > CARTAN_MAX_ELL {
        return Err(GspError::EnumerationBound(ell));
    }
    let l = ell as i64;
    let mut out = Vec::new();
    match kind {
        CartanKind::Split => {
            for a in 1..l {
                for d in 1..l {
                    out.push(MatrixModL::from_rows(&[vec![a, 0], vec![0, d]], ell));
                }
            }
        }
        CartanKind::Nonsplit => {
            let eps = smallest_nonsquare(ell) as i64;
            for a in 0..l {
                for b in 0..l {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    out.push(MatrixModL::from_rows(&[vec![a, eps * b], vec![b, a]], ell));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Whether the 2×2 matrix M has squarefree minimal polynomial over 𝔽_ℓ.
///
/// Scalar matrices are semisimple; otherwise the minimal polynomial is the
/// characteristic one, squarefree iff its discriminant `tr² − 4·det` is
/// nonzero (ℓ odd).
///
/// # Panics
///
/// If M is not 2×2.
pub fn is_semisimple(m: &MatrixModL) -> bool {
    assert_eq!(m.dim, 2, "is_semisimple is defined for 2×2 matrices");
    if m.is_scalar() {
        return true;
    }
    let l = m.ell;
    let tr = (m.get(0, 0) + m.get(1, 1)) % l;
    let disc = sub_mod(mul_mod(tr, tr, l), mul_mod(4, m.det(), l), l);
    disc != 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartanCheck {
    pub kind: CartanKind,
    pub expected_order: u64,
    pub order: u64,
    pub closed: bool,
    pub all_semisimple: bool,
    pub all_invertible: bool,
}

impl CartanCheck {
    pub fn passed(&self) -> bool {
        self.order == self.expected_order && self.closed && self.all_semisimple && self.all_invertible
    }
}

/// Order, closure and semisimplicity of both Cartan subgroups mod ℓ.
pub fn verify_cartan(ell: u64) -> Result<Vec<CartanCheck>, GspError> {
    [CartanKind::Split, CartanKind::Nonsplit]
        .into_iter()
        .map(|kind| {
            let elems = cartan_subgroup(ell, kind)?;
            let set: HashSet<&MatrixModL> = elems.iter().collect();
            let closed = elems.par_iter().all(|a| elems.iter().all(|b| set.contains(&a.mul(b))));
            let expected_order = match kind {
                CartanKind::Split => (ell - 1) * (ell - 1),
                CartanKind::Nonsplit => ell * ell - 1,
            };
            Ok(CartanCheck {
                kind,
                expected_order,
                order: set.len() as u64,
                closed,
                all_semisimple: elems.iter().all(is_semisimple),
                all_invertible: elems.iter().all(|m| m.det() != 0),
            })
        })
        .collect()
}
