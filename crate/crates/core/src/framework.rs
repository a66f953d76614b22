//! The traced-algebra contract and derivation families.
//!
//! A registered algebra exposes exact linear arithmetic, an associative
//! product, a trace that vanishes on commutators, and a seeded sampler of
//! sparse elements.  A [`DerivationFamily`] attaches an ordered list of
//! derivations `D1..Dl` together with the table of elements `Qij` realizing
//! `[Di, Dj] = ad(Qij)`; the table stores both orientations explicitly so no
//! evaluation site ever antisymmetrizes the pair `(i, j)` silently.

use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::report::CheckReport;
use crate::scalars::{FieldSpec, Scalar};

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("precision floor insufficient: {0}")]
    PrecisionInsufficient(String),
    #[error("missing Q-table entry for derivation pair ({0}, {1})")]
    MissingQEntry(usize, usize),
    #[error("derivation chain is not a cycle: {0}")]
    NotACycle(String),
    #[error("no single integer multiplier fits all samples: {0}")]
    InconsistentK(String),
    #[error("expected a monomial: {0}")]
    NonMonomialInput(String),
    #[error("unknown formula `{0}`")]
    UnknownFormula(String),
    #[error("not invertible: {0}")]
    NonInvertible(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("field mismatch: {0}")]
    FieldMismatch(String),
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

/// Associative algebra with a commutator-killing trace.
///
/// `bracket` is always the commutator of `mul`.  `lie_bracket` is the Lie
/// structure the cochain complex is built on; it defaults to the commutator
/// and is overridden by the Poisson model, whose `mul` is commutative while
/// its Lie bracket is the Poisson bracket.
pub trait TracedAlgebra: Sync {
    type Elem: Clone + std::fmt::Debug + PartialEq + Send + Sync;

    fn field(&self) -> FieldSpec;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn scale(&self, s: &Scalar, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn trace(&self, a: &Self::Elem) -> Result<Scalar>;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn generators(&self) -> Vec<Self::Elem>;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Elem;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        let minus_one = self.field().from_i64(-1);
        self.add(a, &self.scale(&minus_one, b))
    }

    fn bracket(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem> {
        Ok(self.sub(&self.mul(a, b)?, &self.mul(b, a)?))
    }

    fn lie_bracket(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem> {
        self.bracket(a, b)
    }

    /// Short human-readable description of the truncation state, for reports.
    fn floor_description(&self) -> String {
        "exact".into()
    }
}

pub type Handle<'a, E> = Box<dyn Fn(&E) -> Result<E> + Send + Sync + 'a>;

/// Ordered derivations `D1..Dl` (1-based labels) plus the `Qij` table.
pub struct DerivationFamily<'a, A: TracedAlgebra> {
    handles: Vec<Handle<'a, A::Elem>>,
    q_table: BTreeMap<(usize, usize), A::Elem>,
}

impl<'a, A: TracedAlgebra> DerivationFamily<'a, A> {
    pub fn new(handles: Vec<Handle<'a, A::Elem>>) -> Self {
        DerivationFamily {
            handles,
            q_table: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    /// Apply `D_label` (1-based).
    pub fn apply(&self, label: usize, e: &A::Elem) -> Result<A::Elem> {
        (self.handles[label - 1])(e)
    }

    /// Record `Qij`; the opposite orientation `Qji = -Qij` is stored at the
    /// same time.
    pub fn set_q(&mut self, algebra: &A, i: usize, j: usize, q: A::Elem) {
        let minus_one = algebra.field().from_i64(-1);
        let neg = algebra.scale(&minus_one, &q);
        self.q_table.insert((i, j), q);
        self.q_table.insert((j, i), neg);
    }

    pub fn q(&self, i: usize, j: usize) -> Result<&A::Elem> {
        self.q_table
            .get(&(i, j))
            .ok_or(AlgebraError::MissingQEntry(i, j))
    }

    pub fn has_q(&self, i: usize, j: usize) -> bool {
        self.q_table.contains_key(&(i, j))
    }
}

/// Check `trace(lie_bracket(a, b)) = 0` on sampled pairs.
pub fn check_trace_property<A: TracedAlgebra>(
    algebra: &A,
    sample_count: usize,
    seed: u64,
) -> CheckReport {
    use rand::SeedableRng;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = (|| {
        for k in 0..sample_count {
            let a = algebra.sample(&mut rng);
            let b = algebra.sample(&mut rng);
            let t = algebra.trace(&algebra.lie_bracket(&a, &b)?)?;
            if !t.is_zero() {
                return Ok(CheckReport::fail(
                    "trace-kills-brackets",
                    format!("sample {k}: trace = {t}, a = {a:?}, b = {b:?}"),
                ));
            }
        }
        Ok(CheckReport::pass("trace-kills-brackets"))
    })()
    .unwrap_or_else(|e: AlgebraError| CheckReport::error("trace-kills-brackets", e.to_string()));
    report
        .with_context(seed, &algebra.field().describe(), &algebra.floor_description())
        .with_millis(start.elapsed().as_millis())
}

/// Check the three lifting conditions for a derivation family:
/// (i) the trace kills every `Dk(a)` on samples, (ii) `[Di, Dj]` acts as
/// `ad(Qij)` on the generators, (iii) the cyclic sum
/// `Dk(Qij) + Di(Qjk) + Dj(Qki)` vanishes for every label triple.
pub fn check_derivation_conditions<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    sample_count: usize,
    seed: u64,
) -> Vec<CheckReport> {
    use rand::SeedableRng;
    let field = algebra.field().describe();
    let floor = algebra.floor_description();
    let l = family.len();
    let mut out = Vec::new();

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cond_i = (|| {
        for k in 1..=l {
            for s in 0..sample_count {
                let a = algebra.sample(&mut rng);
                let t = algebra.trace(&family.apply(k, &a)?)?;
                if !t.is_zero() {
                    return Ok(CheckReport::fail(
                        "condition-i-trace-kills-derivations",
                        format!("D{k}, sample {s}: trace = {t}"),
                    ));
                }
            }
        }
        Ok(CheckReport::pass("condition-i-trace-kills-derivations"))
    })()
    .unwrap_or_else(|e: AlgebraError| {
        CheckReport::error("condition-i-trace-kills-derivations", e.to_string())
    });
    out.push(
        cond_i
            .with_context(seed, &field, &floor)
            .with_millis(start.elapsed().as_millis()),
    );

    let start = Instant::now();
    let cond_ii = (|| {
        for i in 1..=l {
            for j in (i + 1)..=l {
                let q = family.q(i, j)?;
                for (gi, g) in algebra.generators().iter().enumerate() {
                    let lhs = algebra.sub(
                        &family.apply(i, &family.apply(j, g)?)?,
                        &family.apply(j, &family.apply(i, g)?)?,
                    );
                    let rhs = algebra.bracket(q, g)?;
                    if !algebra.is_zero(&algebra.sub(&lhs, &rhs)) {
                        return Ok(CheckReport::fail(
                            "condition-ii-commutators-are-inner",
                            format!("pair ({i},{j}), generator #{gi}"),
                        ));
                    }
                }
            }
        }
        Ok(CheckReport::pass("condition-ii-commutators-are-inner"))
    })()
    .unwrap_or_else(|e: AlgebraError| {
        CheckReport::error("condition-ii-commutators-are-inner", e.to_string())
    });
    out.push(
        cond_ii
            .with_context(seed, &field, &floor)
            .with_millis(start.elapsed().as_millis()),
    );

    let start = Instant::now();
    let cond_iii = (|| {
        for i in 1..=l {
            for j in (i + 1)..=l {
                for k in (j + 1)..=l {
                    let mut acc = family.apply(k, family.q(i, j)?)?;
                    acc = algebra.add(&acc, &family.apply(i, family.q(j, k)?)?);
                    acc = algebra.add(&acc, &family.apply(j, family.q(k, i)?)?);
                    if !algebra.is_zero(&acc) {
                        return Ok(CheckReport::fail(
                            "condition-iii-q-cyclic-sum",
                            format!("triple ({i},{j},{k}): {acc:?}"),
                        ));
                    }
                }
            }
        }
        Ok(CheckReport::pass("condition-iii-q-cyclic-sum"))
    })()
    .unwrap_or_else(|e: AlgebraError| {
        CheckReport::error("condition-iii-q-cyclic-sum", e.to_string())
    });
    out.push(
        cond_iii
            .with_context(seed, &field, &floor)
            .with_millis(start.elapsed().as_millis()),
    );

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_messages_name_the_pair() {
        let e = AlgebraError::MissingQEntry(2, 5);
        assert_eq!(
            e.to_string(),
            "missing Q-table entry for derivation pair (2, 5)"
        );
    }
}
