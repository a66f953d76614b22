//! Laurent polynomial Poisson algebra in canonical coordinates.
//!
//! Variables are ordered `p1..pn, q1..qn` with `{pi, qj} = delta_ij`.  The
//! trace is the total residue (coefficient at every exponent equal to -1);
//! it kills Poisson brackets, which makes the algebra a classical model for
//! the operator calculus: the commutative product plus the Poisson bracket
//! play the roles of `mul` and the Lie bracket.
//!
//! For a list of 2n monomials `D1..D2n` the twisted cocycle
//! `Psi^F(f1,..,f_{2n+1}) = Alt Tr(F df1/dp1 ... df2n/dqn f_{2n+1})` uses
//! `F = det(dDi/dxi_j) / (D1...D2n)`; log-derivations `f -> {D,f}/D` are
//! supported for monomial `D`, where the division is exact.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cohomology::{signed_permutations, PermutationIter};
use crate::framework::{AlgebraError, Result, TracedAlgebra};
use crate::scalars::{FieldSpec, Scalar};

/// Exact Laurent polynomial; keys are exponent vectors over `p1..pn,q1..qn`.
#[derive(Clone, PartialEq, Debug)]
pub struct LaurentPoly {
    pub terms: BTreeMap<Vec<i64>, Scalar>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_monomial(&self) -> Option<(&Vec<i64>, &Scalar)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn to_text(&self, pairs: usize) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (ev, c) in &self.terms {
            let (sign, mag) = match c {
                Scalar::Rat(r) if r.numer().sign() == num_bigint::Sign::Minus => {
                    ("-", Scalar::Rat(-r))
                }
                _ => ("+", c.clone()),
            };
            let mut piece = format!("{sign} {mag}");
            for (i, e) in ev.iter().enumerate() {
                if *e != 0 {
                    if i < pairs {
                        piece.push_str(&format!(" p{}^{e}", i + 1));
                    } else {
                        piece.push_str(&format!(" q{}^{e}", i - pairs + 1));
                    }
                }
            }
            parts.push(piece);
        }
        parts.join(" ")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PoissonSampleProfile {
    pub max_terms: usize,
    pub exp_range: (i64, i64),
    pub coeff_range: (i64, i64),
}

impl Default for PoissonSampleProfile {
    fn default() -> Self {
        PoissonSampleProfile {
            max_terms: 2,
            exp_range: (-2, 2),
            coeff_range: (-3, 3),
        }
    }
}

pub struct PoissonAlgebra {
    /// Number of canonical pairs; the variable count is `2 * pairs`.
    pub pairs: usize,
    pub field: FieldSpec,
    pub profile: PoissonSampleProfile,
}

impl PoissonAlgebra {
    pub fn new(pairs: usize, field: FieldSpec) -> Self {
        PoissonAlgebra {
            pairs,
            field,
            profile: PoissonSampleProfile::default(),
        }
    }

    pub fn with_profile(mut self, profile: PoissonSampleProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn vars(&self) -> usize {
        2 * self.pairs
    }

    pub fn monomial(&self, coeff: Scalar, exps: Vec<i64>) -> LaurentPoly {
        assert_eq!(exps.len(), self.vars());
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(exps, coeff);
        }
        LaurentPoly { terms }
    }

    /// Generator `p_i` (1-based).
    pub fn gen_p(&self, i: usize) -> LaurentPoly {
        let mut e = vec![0; self.vars()];
        e[i - 1] = 1;
        self.monomial(self.field.one(), e)
    }

    /// Generator `q_i` (1-based).
    pub fn gen_q(&self, i: usize) -> LaurentPoly {
        let mut e = vec![0; self.vars()];
        e[self.pairs + i - 1] = 1;
        self.monomial(self.field.one(), e)
    }

    pub fn from_terms(&self, list: Vec<(Vec<i64>, Scalar)>) -> LaurentPoly {
        let mut terms: BTreeMap<Vec<i64>, Scalar> = BTreeMap::new();
        for (ev, c) in list {
            assert_eq!(ev.len(), self.vars());
            let entry = terms.entry(ev).or_insert_with(|| self.field.zero());
            *entry = entry.add(&c);
        }
        terms.retain(|_, c| !c.is_zero());
        LaurentPoly { terms }
    }

    pub fn add(&self, a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
        let mut terms = a.terms.clone();
        for (ev, c) in &b.terms {
            let entry = terms.entry(ev.clone()).or_insert_with(|| self.field.zero());
            *entry = entry.add(c);
        }
        terms.retain(|_, c| !c.is_zero());
        LaurentPoly { terms }
    }

    pub fn scale(&self, s: &Scalar, a: &LaurentPoly) -> LaurentPoly {
        if s.is_zero() {
            return LaurentPoly::zero();
        }
        LaurentPoly {
            terms: a.terms.iter().map(|(ev, c)| (ev.clone(), s.mul(c))).collect(),
        }
    }

    pub fn mul(&self, a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
        let mut terms: BTreeMap<Vec<i64>, Scalar> = BTreeMap::new();
        for (e1, c1) in &a.terms {
            for (e2, c2) in &b.terms {
                let ev: Vec<i64> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let entry = terms.entry(ev).or_insert_with(|| self.field.zero());
                *entry = entry.add(&c1.mul(c2));
            }
        }
        terms.retain(|_, c| !c.is_zero());
        LaurentPoly { terms }
    }

    /// Formal partial derivative in variable `v` (0-based over all 2n).
    pub fn partial(&self, f: &LaurentPoly, v: usize) -> LaurentPoly {
        let mut terms: BTreeMap<Vec<i64>, Scalar> = BTreeMap::new();
        for (ev, c) in &f.terms {
            if ev[v] == 0 {
                continue;
            }
            let mut out = ev.clone();
            out[v] -= 1;
            let coeff = c.mul(&self.field.from_i64(ev[v]));
            let entry = terms.entry(out).or_insert_with(|| self.field.zero());
            *entry = entry.add(&coeff);
        }
        terms.retain(|_, c| !c.is_zero());
        LaurentPoly { terms }
    }

    /// `{f, g} = sum_k (df/dpk dg/dqk - df/dqk dg/dpk)`.
    pub fn poisson_bracket(&self, f: &LaurentPoly, g: &LaurentPoly) -> LaurentPoly {
        let mut acc = LaurentPoly::zero();
        for k in 0..self.pairs {
            let (pk, qk) = (k, self.pairs + k);
            let t1 = self.mul(&self.partial(f, pk), &self.partial(g, qk));
            let t2 = self.mul(&self.partial(f, qk), &self.partial(g, pk));
            acc = self.add(&acc, &t1);
            acc = self.add(&acc, &self.scale(&self.field.from_i64(-1), &t2));
        }
        acc
    }

    /// Coefficient at the all-(-1) exponent vector.
    pub fn residue_trace(&self, f: &LaurentPoly) -> Scalar {
        f.terms
            .get(&vec![-1i64; self.vars()])
            .cloned()
            .unwrap_or_else(|| self.field.zero())
    }

    /// Exact division by a monomial.
    pub fn div_monomial(&self, f: &LaurentPoly, m: &LaurentPoly) -> Result<LaurentPoly> {
        let (me, mc) = m
            .as_monomial()
            .ok_or_else(|| AlgebraError::NonMonomialInput(format!("divisor {m:?}")))?;
        let inv = mc.inv()?;
        let terms = f
            .terms
            .iter()
            .map(|(ev, c)| {
                let out: Vec<i64> = ev.iter().zip(me).map(|(a, b)| a - b).collect();
                (out, c.mul(&inv))
            })
            .collect();
        Ok(LaurentPoly { terms })
    }

    /// The log-derivation attached to a monomial `D`: `f -> {D, f}/D`.
    pub fn log_derivation(&self, d: &LaurentPoly, f: &LaurentPoly) -> Result<LaurentPoly> {
        if d.as_monomial().is_none() {
            return Err(AlgebraError::NonMonomialInput(format!(
                "log-derivation base {d:?}"
            )));
        }
        self.div_monomial(&self.poisson_bracket(d, f), d)
    }

    /// `F = det(dDi/dxi_j) / (D1 ... D2n)` for 2n monomials `Di`, with
    /// `xi = (p1..pn, q1..qn)`.  The determinant is expanded exactly.
    pub fn f_from_log_monomials(&self, ds: &[LaurentPoly]) -> Result<LaurentPoly> {
        let m = self.vars();
        if ds.len() != m {
            return Err(AlgebraError::Unsupported(format!(
                "need {m} derivation monomials, got {}",
                ds.len()
            )));
        }
        for d in ds {
            if d.as_monomial().is_none() {
                return Err(AlgebraError::NonMonomialInput(format!("{d:?}")));
            }
        }
        let jac: Vec<Vec<LaurentPoly>> = ds
            .iter()
            .map(|d| (0..m).map(|j| self.partial(d, j)).collect())
            .collect();
        let mut det = LaurentPoly::zero();
        for (sign, perm) in signed_permutations(m) {
            let mut prod = self.monomial(self.field.one(), vec![0; m]);
            let mut dead = false;
            for (i, &j) in perm.iter().enumerate() {
                if jac[i][j].is_zero() {
                    dead = true;
                    break;
                }
                prod = self.mul(&prod, &jac[i][j]);
            }
            if dead {
                continue;
            }
            let signed = if sign < 0 {
                self.scale(&self.field.from_i64(-1), &prod)
            } else {
                prod
            };
            det = self.add(&det, &signed);
        }
        let mut f = det;
        for d in ds {
            f = self.div_monomial(&f, d)?;
        }
        Ok(f)
    }

    /// `Alt_f Tr(F df1/dp1 ... dfn/dpn df_{n+1}/dq1 ... df_{2n}/dqn f_{2n+1})`.
    pub fn psi_f_evaluate(&self, f_twist: &LaurentPoly, args: &[LaurentPoly]) -> Result<Scalar> {
        let m = self.vars() + 1;
        if args.len() != m {
            return Err(AlgebraError::Unsupported(format!(
                "twisted cocycle takes {m} arguments, got {}",
                args.len()
            )));
        }
        let mut acc = self.field.zero();
        for (sign, perm) in PermutationIter::new(m) {
            let mut prod = f_twist.clone();
            let mut dead = false;
            for slot in 0..(m - 1) {
                let part = self.partial(&args[perm[slot]], slot);
                if part.is_zero() {
                    dead = true;
                    break;
                }
                prod = self.mul(&prod, &part);
            }
            if dead {
                continue;
            }
            prod = self.mul(&prod, &args[perm[m - 1]]);
            let t = self.residue_trace(&prod);
            if t.is_zero() {
                continue;
            }
            acc = if sign < 0 { acc.sub(&t) } else { acc.add(&t) };
        }
        Ok(acc)
    }

    /// Same cocycle through the log-derivations directly:
    /// `Alt_f Tr({ln D1, f1} ... {ln D2n, f2n} f_{2n+1})`.
    pub fn psi_log_evaluate(&self, ds: &[LaurentPoly], args: &[LaurentPoly]) -> Result<Scalar> {
        let m = self.vars() + 1;
        if args.len() != m || ds.len() != m - 1 {
            return Err(AlgebraError::Unsupported(
                "argument/derivation count mismatch".into(),
            ));
        }
        let mut acc = self.field.zero();
        for (sign, perm) in PermutationIter::new(m) {
            let mut prod = self.monomial(self.field.one(), vec![0; self.vars()]);
            let mut dead = false;
            for slot in 0..(m - 1) {
                let part = self.log_derivation(&ds[slot], &args[perm[slot]])?;
                if part.is_zero() {
                    dead = true;
                    break;
                }
                prod = self.mul(&prod, &part);
            }
            if dead {
                continue;
            }
            prod = self.mul(&prod, &args[perm[m - 1]]);
            let t = self.residue_trace(&prod);
            if t.is_zero() {
                continue;
            }
            acc = if sign < 0 { acc.sub(&t) } else { acc.add(&t) };
        }
        Ok(acc)
    }

    /// The distinguished cocycle's twist `F = p1^-1 ... qn^-1`.
    pub fn psi0_twist(&self) -> LaurentPoly {
        self.monomial(self.field.one(), vec![-1; self.vars()])
    }

    pub fn parse_element(&self, text: &str) -> Result<LaurentPoly> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens == ["0"] || tokens.is_empty() {
            return Ok(LaurentPoly::zero());
        }
        let mut list: Vec<(Vec<i64>, Scalar)> = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let sign = match tokens[pos] {
                "+" => 1,
                "-" => -1,
                t => {
                    return Err(AlgebraError::Parse(format!(
                        "expected sign token, found `{t}`"
                    )))
                }
            };
            pos += 1;
            if pos >= tokens.len() {
                return Err(AlgebraError::Parse("dangling sign".into()));
            }
            let mut coeff = self.field.parse_scalar(tokens[pos])?;
            if sign < 0 {
                coeff = coeff.neg();
            }
            pos += 1;
            let mut ev = vec![0i64; self.vars()];
            while pos < tokens.len() && tokens[pos] != "+" && tokens[pos] != "-" {
                let tok = tokens[pos];
                let (var, exp) = tok
                    .split_once('^')
                    .ok_or_else(|| AlgebraError::Parse(format!("bad factor `{tok}`")))?;
                let exp: i64 = exp
                    .parse()
                    .map_err(|_| AlgebraError::Parse(format!("bad exponent in `{tok}`")))?;
                let (kind, idx_s) = var.split_at(1);
                let idx: usize = idx_s
                    .parse()
                    .map_err(|_| AlgebraError::Parse(format!("bad index in `{tok}`")))?;
                if idx == 0 || idx > self.pairs {
                    return Err(AlgebraError::Parse(format!("index {idx} out of range")));
                }
                match kind {
                    "p" => ev[idx - 1] += exp,
                    "q" => ev[self.pairs + idx - 1] += exp,
                    _ => return Err(AlgebraError::Parse(format!("unknown variable `{var}`"))),
                }
                pos += 1;
            }
            list.push((ev, coeff));
        }
        Ok(self.from_terms(list))
    }
}

impl TracedAlgebra for PoissonAlgebra {
    type Elem = LaurentPoly;

    fn field(&self) -> FieldSpec {
        self.field
    }

    fn zero(&self) -> LaurentPoly {
        LaurentPoly::zero()
    }

    fn one(&self) -> LaurentPoly {
        self.monomial(self.field.one(), vec![0; self.vars()])
    }

    fn add(&self, a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
        self.add(a, b)
    }

    fn scale(&self, s: &Scalar, a: &LaurentPoly) -> LaurentPoly {
        self.scale(s, a)
    }

    fn mul(&self, a: &LaurentPoly, b: &LaurentPoly) -> Result<LaurentPoly> {
        Ok(self.mul(a, b))
    }

    fn trace(&self, a: &LaurentPoly) -> Result<Scalar> {
        Ok(self.residue_trace(a))
    }

    fn is_zero(&self, a: &LaurentPoly) -> bool {
        a.is_zero()
    }

    fn generators(&self) -> Vec<LaurentPoly> {
        (1..=self.pairs)
            .flat_map(|i| [self.gen_p(i), self.gen_q(i)])
            .collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> LaurentPoly {
        let p = self.profile;
        let count = rng.gen_range(1..=p.max_terms);
        let mut list = Vec::with_capacity(count);
        for _ in 0..count {
            let ev: Vec<i64> = (0..self.vars())
                .map(|_| rng.gen_range(p.exp_range.0..=p.exp_range.1))
                .collect();
            let mut c = 0;
            while c == 0 {
                c = rng.gen_range(p.coeff_range.0..=p.coeff_range.1);
            }
            list.push((ev, self.field.from_i64(c)));
        }
        self.from_terms(list)
    }

    /// The Lie structure is the Poisson bracket, not the (zero) commutator.
    fn lie_bracket(&self, a: &LaurentPoly, b: &LaurentPoly) -> Result<LaurentPoly> {
        Ok(self.poisson_bracket(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn alg1() -> PoissonAlgebra {
        PoissonAlgebra::new(1, FieldSpec::Rational)
    }

    #[test]
    fn canonical_bracket_values() {
        let a = alg1();
        let p = a.gen_p(1);
        let q = a.gen_q(1);
        assert_eq!(a.poisson_bracket(&p, &q), a.one());
        // {p^2, q} = 2p
        let p2 = a.mul(&p, &p);
        assert_eq!(
            a.poisson_bracket(&p2, &q),
            a.scale(&a.field.from_i64(2), &p)
        );
        // Jacobi for (p, q, pq).
        let pq = a.mul(&p, &q);
        let j = a.add(
            &a.add(
                &a.poisson_bracket(&p, &a.poisson_bracket(&q, &pq)),
                &a.poisson_bracket(&q, &a.poisson_bracket(&pq, &p)),
            ),
            &a.poisson_bracket(&pq, &a.poisson_bracket(&p, &q)),
        );
        assert!(j.is_zero());
    }

    #[test]
    fn residue_examples() {
        let a = alg1();
        assert_eq!(
            a.residue_trace(&a.monomial(a.field.one(), vec![-1, -1])),
            a.field.one()
        );
        assert_eq!(
            a.residue_trace(&a.monomial(a.field.one(), vec![1, 1])),
            a.field.zero()
        );
        let f = a.monomial(a.field.one(), vec![2, -1]);
        let g = a.monomial(a.field.one(), vec![-1, 3]);
        assert!(a.residue_trace(&a.poisson_bracket(&f, &g)).is_zero());
    }

    #[test]
    fn jacobian_twist_examples() {
        let a = alg1();
        let p = a.gen_p(1);
        let q = a.gen_q(1);
        // Identity list: F = p^-1 q^-1.
        let f = a.f_from_log_monomials(&[p.clone(), q.clone()]).unwrap();
        assert_eq!(f, a.psi0_twist());
        // (p^2, q): det = 2p, F = 2 p^-1 q^-1.
        let p2 = a.mul(&p, &p);
        let f = a.f_from_log_monomials(&[p2, q.clone()]).unwrap();
        assert_eq!(f, a.scale(&a.field.from_i64(2), &a.psi0_twist()));
        // Repeated row: determinant vanishes.
        let f = a.f_from_log_monomials(&[p.clone(), p.clone()]).unwrap();
        assert!(f.is_zero());
        // Non-monomial input refused.
        let bad = a.add(&p, &q);
        assert!(matches!(
            a.f_from_log_monomials(&[bad, q]),
            Err(AlgebraError::NonMonomialInput(_))
        ));
    }

    #[test]
    fn distinguished_cocycle_value_is_one() {
        for pairs in 1..=3 {
            let a = PoissonAlgebra::new(pairs, FieldSpec::Rational);
            let mut args = vec![a.one()];
            for i in 1..=pairs {
                args.push(a.gen_p(i));
            }
            for i in 1..=pairs {
                args.push(a.gen_q(i));
            }
            let v = a.psi_f_evaluate(&a.psi0_twist(), &args).unwrap();
            assert_eq!(v, a.field.one(), "pairs = {pairs}");
        }
    }

    #[test]
    fn log_derivation_division_is_exact() {
        let a = alg1();
        let d = a.monomial(a.field.from_i64(3), vec![2, -1]);
        let f = a.from_terms(vec![
            (vec![1, 1], a.field.from_i64(2)),
            (vec![-1, 0], a.field.from_i64(5)),
        ]);
        let ld = a.log_derivation(&d, &f).unwrap();
        // {D, f} = D * ld must hold exactly.
        assert_eq!(a.poisson_bracket(&d, &f), a.mul(&d, &ld));
    }

    #[test]
    fn twisted_equals_log_form_on_samples() {
        let a = alg1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let mut ds = Vec::new();
            for _ in 0..2 {
                // Random nonconstant monomials keep the Jacobian interesting.
                let ev: Vec<i64> = (0..2).map(|_| rng.gen_range(-2i64..=2)).collect();
                if ev.iter().all(|e| *e == 0) {
                    ds.push(a.gen_p(1));
                } else {
                    ds.push(a.monomial(a.field.one(), ev));
                }
            }
            let args: Vec<LaurentPoly> = (0..3).map(|_| a.sample(&mut rng)).collect();
            let f = a.f_from_log_monomials(&ds).unwrap();
            let lhs = a.psi_log_evaluate(&ds, &args).unwrap();
            let rhs = a.psi_f_evaluate(&f, &args).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Lemma: the residue kills Poisson brackets.
        #[test]
        fn residue_kills_brackets(seed in 0u64..500) {
            let a = PoissonAlgebra::new(2, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = a.sample(&mut rng);
            let g = a.sample(&mut rng);
            prop_assert!(a.residue_trace(&a.poisson_bracket(&f, &g)).is_zero());
        }

        #[test]
        fn bracket_is_antisymmetric_and_leibniz(seed in 0u64..500) {
            let a = PoissonAlgebra::new(1, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = a.sample(&mut rng);
            let g = a.sample(&mut rng);
            let h = a.sample(&mut rng);
            let anti = a.add(&a.poisson_bracket(&f, &g), &a.poisson_bracket(&g, &f));
            prop_assert!(anti.is_zero());
            // {f, gh} = {f,g} h + g {f,h}
            let lhs = a.poisson_bracket(&f, &a.mul(&g, &h));
            let rhs = a.add(
                &a.mul(&a.poisson_bracket(&f, &g), &h),
                &a.mul(&g, &a.poisson_bracket(&f, &h)),
            );
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn poisson_text_round_trip(seed in 0u64..500) {
            let a = PoissonAlgebra::new(2, FieldSpec::Rational);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = a.sample(&mut rng);
            let text = f.to_text(a.pairs);
            prop_assert_eq!(a.parse_element(&text).unwrap(), f);
        }
    }
}
