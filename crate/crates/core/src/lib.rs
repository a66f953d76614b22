//! Exact symbolic engine for lifting trace cocycles along derivation families.
//!
//! The crate implements one computational story in several registered
//! algebras: an associative algebra carries a trace `Tr` that kills
//! commutators and a family of derivations `D1..Dl` whose pairwise
//! commutators are inner, `[Di, Dj] = ad(Qij)`.  Out of this data one builds
//! alternating multilinear cocycles (`Alt Tr(D1 A1 ... Dl Al ...)` plus
//! correction terms carrying the `Qij`), and the engine evaluates those
//! formulas exactly and checks the identities they are supposed to satisfy.
//!
//! Modules, bottom up:
//!
//! * [`scalars`] - exact coefficient arithmetic (big rationals, prime fields).
//! * [`framework`] - the traced-algebra contract, derivation families, and
//!   the trace/derivation condition checkers shared by every model.
//! * [`psido`] - truncated pseudodifferential symbols with the residue trace
//!   and the logarithmic derivations.
//! * [`poisson`] - Laurent polynomial Poisson algebra, residue trace, and the
//!   twisted odd cocycles.
//! * [`matrix`] - plain matrix algebras and matrix-valued loop algebras.
//! * [`cohomology`] - alternation, the cochain differential, cocycle checks,
//!   chain boundaries, and a two-sided identity replayer.
//! * [`lifting`] - formula schemas, marked-interval combinatorics, the
//!   formula generator, and the schema evaluator.
//! * [`report`] - structured pass/fail records emitted by every checker.

pub mod cohomology;
pub mod framework;
pub mod lifting;
pub mod matrix;
pub mod poisson;
pub mod psido;
pub mod report;
pub mod scalars;

pub use framework::{AlgebraError, DerivationFamily, Result, TracedAlgebra};
pub use report::{CheckReport, CheckStatus};
pub use scalars::{FieldSpec, Scalar};
