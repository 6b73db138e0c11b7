//! Local-global tests for isogeny of elliptic curves over ℚ.
//!
//! Two curves that are isogenous over ℚ have the same number of points over
//! every 𝔽_p of good reduction. The converse direction this crate probes is
//! weaker: it only looks at whether a prime ℓ divides `#E(𝔽_p)`, i.e. the
//! indicator Φ_ℓ(p), and asks whether "ℓ | #A(𝔽_p) ⇒ ℓ | #A'(𝔽_p)" holds over
//! many p. A single counterexample is a proof of non-isogeny; the absence of
//! counterexamples up to a bound is only evidence.
//!
//! | module | contents |
//! |---|---|
//! | [`arith`] | 𝔽_p arithmetic, Legendre symbols, square roots, primes |
//! | [`curves`] | Weierstrass curves over ℚ, reduction, group law over 𝔽_p |
//! | [`counting`] | point counts, a_p, Φ_ℓ, a_p tables and their file format |
//! | [`criterion`] | implication scans, a_p comparison, verdicts, CM heuristic |
//! | [`velu`] | division polynomials, rational torsion, Vélu quotients, twists |
//! | [`gsp`] | symplectic similitudes and Cartan subgroups over 𝔽_ℓ |
//! | [`cli`] | the `isocrit` command line, corpus and cache |
//!
//! ```
//! use isocrit::cli::parse_curve;
//! use isocrit::criterion::{faltings_check, FaltingsResult};
//!
//! let a = parse_curve("-1,0")?; // y² = x³ − x
//! let b = parse_curve("0,1")?; // y² = x³ + 1
//! let r = faltings_check(&a, &b, 100)?;
//! assert_eq!(r, FaltingsResult::FirstMismatch { p: 5, a_p: -2, a_p_other: 0 });
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The guide in `book/` walks through each concept with runnable snippets;
//! they are compiled and run as doc-tests of this crate.

pub mod arith;
pub mod cli;
pub mod counting;
pub mod criterion;
pub mod curves;
pub mod gsp;
pub mod velu;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/criterion.md")]
    mod criterion {}
    #[doc = include_str!("../../../book/src/isogenies.md")]
    mod isogenies {}
    #[doc = include_str!("../../../book/src/symplectic.md")]
    mod symplectic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
