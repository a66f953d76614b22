//! Finite matrix algebras and gl_m-valued Laurent ("current") algebras.
//!
//! Matrices give the inner-derivation playground: every derivation is
//! ad(M), brackets of derivations are again inner, and all identities can
//! be ground out by brute force.  Current elements carry loop exponents;
//! their trace composes the matrix trace with the residue at all-(-1),
//! and the loop derivatives d/dt_i are honest exterior derivations with
//! vanishing pairwise brackets.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::framework::{AlgebraError, Result, TracedAlgebra};
use crate::scalars::{FieldSpec, Scalar};

#[derive(Clone, PartialEq, Debug)]
pub struct MatrixElement {
    pub size: usize,
    /// Row-major, length size*size.
    pub entries: Vec<Scalar>,
}

impl MatrixElement {
    pub fn at(&self, row: usize, col: usize) -> &Scalar {
        &self.entries[row * self.size + col]
    }

    pub fn to_text(&self) -> String {
        self.entries
            .chunks(self.size)
            .map(|row| {
                row.iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join(" ; ")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MatrixSampleProfile {
    pub entry_range: (i64, i64),
}

impl Default for MatrixSampleProfile {
    fn default() -> Self {
        MatrixSampleProfile {
            entry_range: (-3, 3),
        }
    }
}

pub struct MatrixAlgebra {
    pub size: usize,
    pub field: FieldSpec,
    pub profile: MatrixSampleProfile,
}

impl MatrixAlgebra {
    pub fn new(size: usize, field: FieldSpec) -> Self {
        MatrixAlgebra {
            size,
            field,
            profile: MatrixSampleProfile::default(),
        }
    }

    pub fn zero_elem(&self) -> MatrixElement {
        MatrixElement {
            size: self.size,
            entries: vec![self.field.zero(); self.size * self.size],
        }
    }

    pub fn identity(&self) -> MatrixElement {
        let mut m = self.zero_elem();
        for i in 0..self.size {
            m.entries[i * self.size + i] = self.field.one();
        }
        m
    }

    /// Matrix unit E_ij (1-based).
    pub fn unit(&self, i: usize, j: usize) -> MatrixElement {
        let mut m = self.zero_elem();
        m.entries[(i - 1) * self.size + (j - 1)] = self.field.one();
        m
    }

    pub fn from_rows(&self, rows: &[&[i64]]) -> MatrixElement {
        assert_eq!(rows.len(), self.size);
        let mut entries = Vec::with_capacity(self.size * self.size);
        for row in rows {
            assert_eq!(row.len(), self.size);
            entries.extend(row.iter().map(|v| self.field.from_i64(*v)));
        }
        MatrixElement {
            size: self.size,
            entries,
        }
    }

    pub fn add(&self, a: &MatrixElement, b: &MatrixElement) -> MatrixElement {
        MatrixElement {
            size: a.size,
            entries: a
                .entries
                .iter()
                .zip(&b.entries)
                .map(|(x, y)| x.add(y))
                .collect(),
        }
    }

    pub fn scale(&self, s: &Scalar, a: &MatrixElement) -> MatrixElement {
        MatrixElement {
            size: a.size,
            entries: a.entries.iter().map(|x| s.mul(x)).collect(),
        }
    }

    pub fn mul(&self, a: &MatrixElement, b: &MatrixElement) -> MatrixElement {
        let n = a.size;
        let mut out = self.zero_elem();
        for i in 0..n {
            for k in 0..n {
                let aik = a.at(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let cur = &out.entries[i * n + j];
                    out.entries[i * n + j] = cur.add(&aik.mul(b.at(k, j)));
                }
            }
        }
        out
    }

    pub fn trace_elem(&self, a: &MatrixElement) -> Scalar {
        let mut t = self.field.zero();
        for i in 0..a.size {
            t = t.add(a.at(i, i));
        }
        t
    }

    /// Row-major literal: entries split by whitespace, rows by `;`.
    pub fn parse_element(&self, text: &str) -> Result<MatrixElement> {
        let rows: Vec<&str> = text.split(';').collect();
        if rows.len() != self.size {
            return Err(AlgebraError::Parse(format!(
                "expected {} rows, found {}",
                self.size,
                rows.len()
            )));
        }
        let mut entries = Vec::with_capacity(self.size * self.size);
        for row in rows {
            let vals: Vec<&str> = row.split_whitespace().collect();
            if vals.len() != self.size {
                return Err(AlgebraError::Parse(format!(
                    "expected {} entries per row, found {}",
                    self.size,
                    vals.len()
                )));
            }
            for v in vals {
                entries.push(self.field.parse_scalar(v)?);
            }
        }
        Ok(MatrixElement {
            size: self.size,
            entries,
        })
    }
}

impl TracedAlgebra for MatrixAlgebra {
    type Elem = MatrixElement;

    fn field(&self) -> FieldSpec {
        self.field
    }

    fn zero(&self) -> MatrixElement {
        self.zero_elem()
    }

    fn one(&self) -> MatrixElement {
        self.identity()
    }

    fn add(&self, a: &MatrixElement, b: &MatrixElement) -> MatrixElement {
        self.add(a, b)
    }

    fn scale(&self, s: &Scalar, a: &MatrixElement) -> MatrixElement {
        self.scale(s, a)
    }

    fn mul(&self, a: &MatrixElement, b: &MatrixElement) -> Result<MatrixElement> {
        Ok(self.mul(a, b))
    }

    fn trace(&self, a: &MatrixElement) -> Result<Scalar> {
        Ok(self.trace_elem(a))
    }

    fn is_zero(&self, a: &MatrixElement) -> bool {
        a.entries.iter().all(|s| s.is_zero())
    }

    fn generators(&self) -> Vec<MatrixElement> {
        let mut gens = Vec::new();
        for i in 1..=self.size {
            for j in 1..=self.size {
                gens.push(self.unit(i, j));
            }
        }
        gens
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> MatrixElement {
        let (lo, hi) = self.profile.entry_range;
        let entries = (0..self.size * self.size)
            .map(|_| self.field.from_i64(rng.gen_range(lo..=hi)))
            .collect();
        MatrixElement {
            size: self.size,
            entries,
        }
    }
}

/// gl_m tensored with Laurent polynomials in `loop_vars` circle variables.
#[derive(Clone, PartialEq, Debug)]
pub struct CurrentElement {
    pub terms: BTreeMap<Vec<i64>, MatrixElement>,
}

impl CurrentElement {
    pub fn zero() -> Self {
        CurrentElement {
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

pub struct CurrentAlgebra {
    pub loop_vars: usize,
    pub matrices: MatrixAlgebra,
}

impl CurrentAlgebra {
    pub fn new(loop_vars: usize, size: usize, field: FieldSpec) -> Self {
        CurrentAlgebra {
            loop_vars,
            matrices: MatrixAlgebra::new(size, field),
        }
    }

    fn field(&self) -> FieldSpec {
        self.matrices.field
    }

    pub fn mono(&self, m: MatrixElement, exps: Vec<i64>) -> CurrentElement {
        assert_eq!(exps.len(), self.loop_vars);
        let mut terms = BTreeMap::new();
        if !self.matrices.is_zero(&m) {
            terms.insert(exps, m);
        }
        CurrentElement { terms }
    }

    pub fn add(&self, a: &CurrentElement, b: &CurrentElement) -> CurrentElement {
        let mut terms = a.terms.clone();
        for (ev, m) in &b.terms {
            match terms.get_mut(ev) {
                Some(cur) => *cur = self.matrices.add(cur, m),
                None => {
                    terms.insert(ev.clone(), m.clone());
                }
            }
        }
        terms.retain(|_, m| !self.matrices.is_zero(m));
        CurrentElement { terms }
    }

    pub fn scale(&self, s: &Scalar, a: &CurrentElement) -> CurrentElement {
        if s.is_zero() {
            return CurrentElement::zero();
        }
        CurrentElement {
            terms: a
                .terms
                .iter()
                .map(|(ev, m)| (ev.clone(), self.matrices.scale(s, m)))
                .collect(),
        }
    }

    pub fn mul(&self, a: &CurrentElement, b: &CurrentElement) -> CurrentElement {
        let mut out = CurrentElement::zero();
        for (e1, m1) in &a.terms {
            for (e2, m2) in &b.terms {
                let ev: Vec<i64> = e1.iter().zip(e2).map(|(x, y)| x + y).collect();
                out = self.add(&out, &self.mono(self.matrices.mul(m1, m2), ev));
            }
        }
        out
    }

    /// Matrix trace of the coefficient at loop exponent (-1, ..., -1).
    pub fn current_trace(&self, a: &CurrentElement) -> Scalar {
        a.terms
            .get(&vec![-1i64; self.loop_vars])
            .map(|m| self.matrices.trace_elem(m))
            .unwrap_or_else(|| self.field().zero())
    }

    /// Formal d/dt_axis (1-based).
    pub fn loop_derivative(&self, axis: usize, a: &CurrentElement) -> CurrentElement {
        let mut out = CurrentElement::zero();
        for (ev, m) in &a.terms {
            let e = ev[axis - 1];
            if e == 0 {
                continue;
            }
            let mut out_ev = ev.clone();
            out_ev[axis - 1] -= 1;
            let scaled = self.matrices.scale(&self.field().from_i64(e), m);
            out = self.add(&out, &self.mono(scaled, out_ev));
        }
        out
    }
}

impl TracedAlgebra for CurrentAlgebra {
    type Elem = CurrentElement;

    fn field(&self) -> FieldSpec {
        self.matrices.field
    }

    fn zero(&self) -> CurrentElement {
        CurrentElement::zero()
    }

    fn one(&self) -> CurrentElement {
        self.mono(self.matrices.identity(), vec![0; self.loop_vars])
    }

    fn add(&self, a: &CurrentElement, b: &CurrentElement) -> CurrentElement {
        self.add(a, b)
    }

    fn scale(&self, s: &Scalar, a: &CurrentElement) -> CurrentElement {
        self.scale(s, a)
    }

    fn mul(&self, a: &CurrentElement, b: &CurrentElement) -> Result<CurrentElement> {
        Ok(self.mul(a, b))
    }

    fn trace(&self, a: &CurrentElement) -> Result<Scalar> {
        Ok(self.current_trace(a))
    }

    fn is_zero(&self, a: &CurrentElement) -> bool {
        a.is_zero()
    }

    fn generators(&self) -> Vec<CurrentElement> {
        let mut gens = Vec::new();
        for i in 1..=self.matrices.size {
            for j in 1..=self.matrices.size {
                for axis in 0..self.loop_vars {
                    for e in [-1i64, 1] {
                        let mut ev = vec![0i64; self.loop_vars];
                        ev[axis] = e;
                        gens.push(self.mono(self.matrices.unit(i, j), ev));
                    }
                }
            }
        }
        gens
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> CurrentElement {
        let count = rng.gen_range(1..=2usize);
        let mut out = CurrentElement::zero();
        for _ in 0..count {
            let ev: Vec<i64> = (0..self.loop_vars)
                .map(|_| rng.gen_range(-2i64..=2))
                .collect();
            let m = self.matrices.sample(rng);
            out = self.add(&out, &self.mono(m, ev));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn current_trace_examples() {
        let c = CurrentAlgebra::new(1, 3, FieldSpec::Rational);
        let one = c.matrices.field.one();
        assert_eq!(
            c.current_trace(&c.mono(c.matrices.unit(1, 1), vec![-1])),
            one
        );
        assert!(c
            .current_trace(&c.mono(c.matrices.unit(1, 2), vec![-1]))
            .is_zero());
        // Bracket of E12 t^2 and E21 t^-3 lands at t^-1 with zero trace.
        let a = c.mono(c.matrices.unit(1, 2), vec![2]);
        let b = c.mono(c.matrices.unit(2, 1), vec![-3]);
        let br = c.bracket(&a, &b).unwrap();
        assert!(!br.is_zero());
        assert!(c.current_trace(&br).is_zero());
    }

    #[test]
    fn loop_derivative_examples() {
        let c = CurrentAlgebra::new(1, 3, FieldSpec::Rational);
        let e = c.matrices.unit(1, 2);
        let two = c.matrices.field.from_i64(2);
        assert_eq!(
            c.loop_derivative(1, &c.mono(e.clone(), vec![2])),
            c.mono(c.matrices.scale(&two, &e), vec![1])
        );
        let minus = c.matrices.field.from_i64(-1);
        assert_eq!(
            c.loop_derivative(1, &c.mono(e.clone(), vec![-1])),
            c.mono(c.matrices.scale(&minus, &e), vec![-2])
        );
    }

    #[test]
    fn matrix_parse_round_trip() {
        let a = MatrixAlgebra::new(3, FieldSpec::Rational);
        let m = a.from_rows(&[&[1, 0, -2], &[0, 3, 0], &[5, 0, 1]]);
        assert_eq!(a.parse_element(&m.to_text()).unwrap(), m);
        assert!(a.parse_element("1 2 ; 3 4").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matrix_commutator_is_traceless(seed in 0u64..500) {
            let alg = MatrixAlgebra::new(3, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = alg.sample(&mut rng);
            let b = alg.sample(&mut rng);
            prop_assert!(alg.trace_elem(&alg.bracket(&a, &b).unwrap()).is_zero());
        }

        #[test]
        fn current_commutator_is_traceless(seed in 0u64..500) {
            let alg = CurrentAlgebra::new(2, 2, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = alg.sample(&mut rng);
            let b = alg.sample(&mut rng);
            prop_assert!(alg.current_trace(&alg.bracket(&a, &b).unwrap()).is_zero());
        }

        #[test]
        fn residue_of_derivative_vanishes(seed in 0u64..500) {
            let alg = CurrentAlgebra::new(1, 2, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = alg.sample(&mut rng);
            prop_assert!(alg.current_trace(&alg.loop_derivative(1, &a)).is_zero());
        }

        #[test]
        fn loop_derivative_satisfies_leibniz(seed in 0u64..500) {
            let alg = CurrentAlgebra::new(1, 2, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = alg.sample(&mut rng);
            let b = alg.sample(&mut rng);
            let lhs = alg.loop_derivative(1, &alg.mul(&a, &b));
            let rhs = alg.add(
                &alg.mul(&alg.loop_derivative(1, &a), &b),
                &alg.mul(&a, &alg.loop_derivative(1, &b)),
            );
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn matrix_mul_associative(seed in 0u64..500) {
            let alg = MatrixAlgebra::new(3, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = alg.sample(&mut rng);
            let b = alg.sample(&mut rng);
            let c = alg.sample(&mut rng);
            prop_assert_eq!(
                alg.mul(&alg.mul(&a, &b), &c),
                alg.mul(&a, &alg.mul(&b, &c))
            );
        }
    }
}
