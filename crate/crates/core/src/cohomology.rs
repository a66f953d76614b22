//! Alternation, the cochain differential, cocycle probes, and a word
//! language for replaying coboundary identities.
//!
//! Cochains are scalar-valued multilinear functionals given by a boxed
//! evaluator.  The canonical differential is the bracket-insertion form
//! `d.psi(A1,..,A_{k+1}) = sum_{i<j} (-1)^{i+j} psi([Ai,Aj], .., ^Ai, .., ^Aj, ..)`;
//! the halved per-argument form used in the source identities is kept as
//! [`eq4_differential`] and relates to the canonical one by a global
//! constant, measured by [`differential_constant`] (analytically it is -1
//! for every arity).
//!
//! All checking is sampling-based over exact fields: a pass is strong
//! evidence, not a proof, and every report records the inputs that drove it.

use rayon::prelude::*;

use crate::framework::{AlgebraError, DerivationFamily, Result, TracedAlgebra};
use crate::report::CheckReport;
use crate::scalars::Scalar;

/// Iterates `(sign, permutation)` over all permutations of `0..n` by Heap's
/// method; consecutive permutations differ by one transposition, so the sign
/// just flips.  Starts at the identity with sign +1.
pub struct PermutationIter {
    perm: Vec<usize>,
    counters: Vec<usize>,
    level: usize,
    sign: i64,
    started: bool,
}

impl PermutationIter {
    pub fn new(n: usize) -> Self {
        PermutationIter {
            perm: (0..n).collect(),
            counters: vec![0; n],
            level: 0,
            sign: 1,
            started: false,
        }
    }
}

impl Iterator for PermutationIter {
    type Item = (i64, Vec<usize>);

    fn next(&mut self) -> Option<(i64, Vec<usize>)> {
        if !self.started {
            self.started = true;
            return Some((self.sign, self.perm.clone()));
        }
        let n = self.perm.len();
        while self.level < n {
            if self.counters[self.level] < self.level {
                if self.level % 2 == 0 {
                    self.perm.swap(0, self.level);
                } else {
                    self.perm.swap(self.counters[self.level], self.level);
                }
                self.sign = -self.sign;
                self.counters[self.level] += 1;
                self.level = 0;
                return Some((self.sign, self.perm.clone()));
            }
            self.counters[self.level] = 0;
            self.level += 1;
        }
        None
    }
}

pub fn signed_permutations(n: usize) -> PermutationIter {
    PermutationIter::new(n)
}

/// Sign of a permutation given as a sequence (inversion count parity).
pub fn permutation_sign(perm: &[usize]) -> i64 {
    let mut inversions = 0usize;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

type Eval<'a, E> = Box<dyn Fn(&[E]) -> Result<Scalar> + Send + Sync + 'a>;

/// A scalar k-cochain.  The `alternating` flag is a promise by the builder,
/// spot-checked where it matters, not enforced structurally.
pub struct Cochain<'a, E> {
    pub arity: usize,
    pub alternating: bool,
    eval: Eval<'a, E>,
}

impl<'a, E> Cochain<'a, E> {
    pub fn new(
        arity: usize,
        alternating: bool,
        eval: impl Fn(&[E]) -> Result<Scalar> + Send + Sync + 'a,
    ) -> Self {
        Cochain {
            arity,
            alternating,
            eval: Box::new(eval),
        }
    }

    pub fn evaluate(&self, args: &[E]) -> Result<Scalar> {
        debug_assert_eq!(args.len(), self.arity);
        (self.eval)(args)
    }
}

/// Unnormalized alternation: the signed sum over all `arity!` argument
/// permutations of `f`.  No `1/k!` in front, so alternating input comes out
/// multiplied by `arity!`.
pub fn alternate<'a, E: Clone + Send + Sync>(
    arity: usize,
    field: crate::scalars::FieldSpec,
    f: impl Fn(&[E]) -> Result<Scalar> + Send + Sync + 'a,
) -> Cochain<'a, E> {
    Cochain::new(arity, true, move |args: &[E]| {
        let mut acc = field.zero();
        for (sign, perm) in PermutationIter::new(arity) {
            let tuple: Vec<E> = perm.iter().map(|&i| args[i].clone()).collect();
            let v = f(&tuple)?;
            acc = if sign < 0 { acc.sub(&v) } else { acc.add(&v) };
        }
        Ok(acc)
    })
}

/// Canonical differential, bracket-insertion form.  The `(k+1)k/2`
/// insertions evaluate in parallel; the reduction is an exact sum.
pub fn ce_differential<A: TracedAlgebra>(
    algebra: &A,
    psi: &Cochain<'_, A::Elem>,
    args: &[A::Elem],
) -> Result<Scalar> {
    let n = args.len();
    debug_assert_eq!(n, psi.arity + 1);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let partials: Result<Vec<Scalar>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let br = algebra.lie_bracket(&args[i], &args[j])?;
            let mut tuple = Vec::with_capacity(n - 1);
            tuple.push(br);
            for (t, a) in args.iter().enumerate() {
                if t != i && t != j {
                    tuple.push(a.clone());
                }
            }
            let v = psi.evaluate(&tuple)?;
            Ok(if (i + j) % 2 == 0 { v } else { v.neg() })
        })
        .collect();
    let mut acc = algebra.field().zero();
    for v in partials? {
        acc = acc.add(&v);
    }
    Ok(acc)
}

/// The halved per-argument differential exactly as the identities state it:
/// `d.psi(A1,..) = 1/2 sum_i (-1)^(i-1) sum_{r != i} psi(.., [Ai,Ar] at r, .., ^Ai, ..)`.
pub fn eq4_differential<A: TracedAlgebra>(
    algebra: &A,
    psi: &Cochain<'_, A::Elem>,
    args: &[A::Elem],
) -> Result<Scalar> {
    let n = args.len();
    debug_assert_eq!(n, psi.arity + 1);
    let mut acc = algebra.field().zero();
    for i in 0..n {
        for r in 0..n {
            if r == i {
                continue;
            }
            let br = algebra.lie_bracket(&args[i], &args[r])?;
            let mut tuple = Vec::with_capacity(n - 1);
            for t in 0..n {
                if t == i {
                    continue;
                }
                if t == r {
                    tuple.push(br.clone());
                } else {
                    tuple.push(args[t].clone());
                }
            }
            let v = psi.evaluate(&tuple)?;
            acc = if i % 2 == 0 { acc.add(&v) } else { acc.sub(&v) };
        }
    }
    let half = algebra
        .field()
        .from_ratio(1, 2)
        .map_err(|_| AlgebraError::Unsupported("field of characteristic 2".into()))?;
    Ok(half.mul(&acc))
}

/// Measures the single constant `c` with `eq4_d = c * standard_d` across
/// sampled tuples.  Errors if the samples disagree or never hit a nonzero
/// denominator.
pub fn differential_constant<A: TracedAlgebra>(
    algebra: &A,
    psi: &Cochain<'_, A::Elem>,
    mut sampler: impl FnMut() -> Vec<A::Elem>,
    samples: usize,
) -> Result<Scalar> {
    let mut constant: Option<Scalar> = None;
    for _ in 0..samples {
        let tuple = sampler();
        let std = ce_differential(algebra, psi, &tuple)?;
        if std.is_zero() {
            continue;
        }
        let alt = eq4_differential(algebra, psi, &tuple)?;
        let ratio = alt.mul(&std.inv()?);
        match &constant {
            None => constant = Some(ratio),
            Some(c) if *c == ratio => {}
            Some(c) => {
                return Err(AlgebraError::Unsupported(format!(
                    "differential forms are not proportional: saw {c} and {ratio}"
                )))
            }
        }
    }
    constant.ok_or_else(|| {
        AlgebraError::Unsupported("all sampled differentials vanished; constant undetermined".into())
    })
}

/// Samples tuples and checks `d(psi) = 0` on each.
pub fn is_cocycle<A: TracedAlgebra>(
    algebra: &A,
    psi: &Cochain<'_, A::Elem>,
    mut sampler: impl FnMut() -> Vec<A::Elem>,
    sample_count: usize,
    check: &str,
) -> CheckReport {
    for s in 0..sample_count {
        let tuple = sampler();
        match ce_differential(algebra, psi, &tuple) {
            Ok(v) if v.is_zero() => {}
            Ok(v) => {
                return CheckReport::fail(check, format!("sample {s}: d-value {v}"));
            }
            Err(e) => return CheckReport::error(check, e.to_string()),
        }
    }
    CheckReport::pass(check)
}

/// Pass iff `lhs - rhs` vanishes on every sampled tuple.
pub fn verify_identity<E>(
    check: &str,
    lhs: impl Fn(&[E]) -> Result<Scalar>,
    rhs: impl Fn(&[E]) -> Result<Scalar>,
    mut sampler: impl FnMut() -> Vec<E>,
    sample_count: usize,
) -> CheckReport {
    for s in 0..sample_count {
        let tuple = sampler();
        let run = || -> Result<(Scalar, Scalar)> { Ok((lhs(&tuple)?, rhs(&tuple)?)) };
        match run() {
            Ok((l, r)) if l == r => {}
            Ok((l, r)) => {
                return CheckReport::fail(check, format!("sample {s}: lhs {l} vs rhs {r}"));
            }
            Err(e) => return CheckReport::error(check, e.to_string()),
        }
    }
    CheckReport::pass(check)
}

/// Weighted sum of wedges of derivation labels, `sum_k a_k (D.. ^ .. ^ D..)`.
#[derive(Clone, Debug)]
pub struct DerivationChain {
    pub terms: Vec<(Scalar, Vec<usize>)>,
}

impl DerivationChain {
    pub fn single(labels: Vec<usize>, one: Scalar) -> Self {
        DerivationChain {
            terms: vec![(one, labels)],
        }
    }
}

/// The Lie-chain boundary of `chain` evaluated on one probe tuple: each
/// wedge `D_{l1} ^ .. ^ D_{li}` contributes
/// `sum_{a<b} (-1)^(a+b) [D_a, D_b] ^ rest`, and a wedge of `i-1` operators
/// `O_1 ^ .. ^ O_{i-1}` acts on probes `(g_1, .., g_{i-1})` as the signed sum
/// over assignments `sum_s sgn(s) O_{s(1)}(g_1) ... O_{s(i-1)}(g_{i-1})`
/// multiplied out in the algebra.
pub fn chain_boundary_value<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    chain: &DerivationChain,
    probe: &[A::Elem],
) -> Result<A::Elem> {
    let mut total = algebra.zero();
    for (weight, labels) in &chain.terms {
        let arity = labels.len();
        if arity < 2 {
            continue;
        }
        debug_assert_eq!(probe.len(), arity - 1);
        for a in 0..arity {
            for b in (a + 1)..arity {
                let (la, lb) = (labels[a], labels[b]);
                let rest: Vec<usize> = labels
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| *t != a && *t != b)
                    .map(|(_, l)| *l)
                    .collect();
                // Operator slot 0 is [D_la, D_lb]; the rest follow in order.
                let ops = arity - 1;
                let mut wedge_val = algebra.zero();
                for (sign, perm) in PermutationIter::new(ops) {
                    let mut product: Option<A::Elem> = None;
                    for (g_idx, &op_idx) in perm.iter().enumerate() {
                        let applied = if op_idx == 0 {
                            let dab = family.apply(lb, &probe[g_idx])?;
                            let dba = family.apply(la, &probe[g_idx])?;
                            algebra.sub(&family.apply(la, &dab)?, &family.apply(lb, &dba)?)
                        } else {
                            family.apply(rest[op_idx - 1], &probe[g_idx])?
                        };
                        product = Some(match product {
                            None => applied,
                            Some(p) => algebra.mul(&p, &applied)?,
                        });
                    }
                    let term = product.expect("arity >= 2 gives at least one operator");
                    let signed = if sign < 0 {
                        algebra.scale(&algebra.field().from_i64(-1), &term)
                    } else {
                        term
                    };
                    wedge_val = algebra.add(&wedge_val, &signed);
                }
                let pair_sign = if (a + b) % 2 == 0 { 1 } else { -1 };
                let signed_weight = if pair_sign < 0 { weight.neg() } else { weight.clone() };
                total = algebra.add(&total, &algebra.scale(&signed_weight, &wedge_val));
            }
        }
    }
    Ok(total)
}

/// Reports whether the chain boundary vanishes on all probe tuples.
pub fn chain_boundary<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    chain: &DerivationChain,
    probes: &[Vec<A::Elem>],
    check: &str,
) -> CheckReport {
    for (idx, probe) in probes.iter().enumerate() {
        match chain_boundary_value(algebra, family, chain, probe) {
            Ok(v) if algebra.is_zero(&v) => {}
            Ok(_) => {
                return CheckReport::fail(check, format!("boundary nonzero on probe {idx}"));
            }
            Err(e) => return CheckReport::error(check, e.to_string()),
        }
    }
    CheckReport::pass(check)
}

pub fn chain_is_cycle<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    chain: &DerivationChain,
    probes: &[Vec<A::Elem>],
) -> Result<bool> {
    for probe in probes {
        if !algebra.is_zero(&chain_boundary_value(algebra, family, chain, probe)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One factor of a trace word.  Argument slots are 1-based; labels refer to
/// the derivation family.
#[derive(Clone, Debug)]
pub enum WFactor {
    /// `A_slot`
    Arg(usize),
    /// `D_label A_slot`
    DArg(usize, usize),
    /// `D_label( product of inner factors )`
    DProduct(usize, Vec<WFactor>),
    /// `Q_ij` from the family table, written order preserved
    Q(usize, usize),
    /// associative commutator `[f, g]`
    Commutator(Box<WFactor>, Box<WFactor>),
}

/// How derivation labels alternate in an [`AltWord`].
#[derive(Clone, Debug)]
pub enum LabelAlt {
    /// No label alternation; labels are read literally.
    None,
    /// Signed sum over all permutations of `labels`.  With `relabel_q`, the
    /// permutation also rewrites `Q_ij` indices (written order preserved) and
    /// each term is divided by 2 for every Q-factor whose pair of labels
    /// appears nowhere else in the term: permutations that only swap such a
    /// pair reproduce the same term, so the plain sum double-counts it.
    Permute { labels: Vec<usize>, relabel_q: bool },
}

/// `Alt Tr( sum of coefficient-weighted factor words )`: alternation over
/// the argument slots always, over derivation labels per `label_alt`.
pub struct AltWord {
    pub arity: usize,
    pub label_alt: LabelAlt,
    pub terms: Vec<(Scalar, Vec<WFactor>)>,
}

fn collect_labels(factors: &[WFactor], out: &mut Vec<usize>) {
    for f in factors {
        match f {
            WFactor::Arg(_) => {}
            WFactor::DArg(l, _) => out.push(*l),
            WFactor::DProduct(l, inner) => {
                out.push(*l);
                collect_labels(inner, out);
            }
            WFactor::Q(i, j) => {
                out.push(*i);
                out.push(*j);
            }
            WFactor::Commutator(f, g) => {
                collect_labels(std::slice::from_ref(f.as_ref()), out);
                collect_labels(std::slice::from_ref(g.as_ref()), out);
            }
        }
    }
}

fn count_exclusive_q(factors: &[WFactor]) -> u32 {
    let mut all = Vec::new();
    collect_labels(factors, &mut all);
    let occurrences = |l: usize| all.iter().filter(|&&x| x == l).count();
    fn walk(factors: &[WFactor], count: &mut u32, occurrences: &dyn Fn(usize) -> usize) {
        for f in factors {
            match f {
                WFactor::Q(i, j) => {
                    if occurrences(*i) == 1 && occurrences(*j) == 1 {
                        *count += 1;
                    }
                }
                WFactor::DProduct(_, inner) => walk(inner, count, occurrences),
                WFactor::Commutator(a, b) => {
                    walk(std::slice::from_ref(a.as_ref()), count, occurrences);
                    walk(std::slice::from_ref(b.as_ref()), count, occurrences);
                }
                _ => {}
            }
        }
    }
    let mut count = 0;
    walk(factors, &mut count, &occurrences);
    count
}

fn eval_factor<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    factor: &WFactor,
    args: &[A::Elem],
    relabel: &[usize],
    relabel_q: bool,
) -> Result<A::Elem> {
    let map = |l: usize| relabel.get(l).copied().unwrap_or(l);
    match factor {
        WFactor::Arg(s) => Ok(args[s - 1].clone()),
        WFactor::DArg(l, s) => family.apply(map(*l), &args[s - 1]),
        WFactor::DProduct(l, inner) => {
            let mut product = algebra.one();
            for f in inner {
                let v = eval_factor(algebra, family, f, args, relabel, relabel_q)?;
                if algebra.is_zero(&v) {
                    return Ok(algebra.zero());
                }
                product = algebra.mul(&product, &v)?;
            }
            family.apply(map(*l), &product)
        }
        WFactor::Q(i, j) => {
            if relabel_q {
                family.q(map(*i), map(*j)).cloned()
            } else {
                family.q(*i, *j).cloned()
            }
        }
        WFactor::Commutator(f, g) => {
            let a = eval_factor(algebra, family, f, args, relabel, relabel_q)?;
            let b = eval_factor(algebra, family, g, args, relabel, relabel_q)?;
            algebra.bracket(&a, &b)
        }
    }
}

fn eval_term<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    word: &[WFactor],
    args: &[A::Elem],
    relabel: &[usize],
    relabel_q: bool,
) -> Result<Scalar> {
    let mut product: Option<A::Elem> = None;
    for factor in word {
        let v = eval_factor(algebra, family, factor, args, relabel, relabel_q)?;
        if algebra.is_zero(&v) {
            return Ok(algebra.field().zero());
        }
        product = Some(match product {
            None => v,
            Some(p) => algebra.mul(&p, &v)?,
        });
    }
    match product {
        None => Ok(algebra.field().zero()),
        Some(p) => algebra.trace(&p),
    }
}

/// Full evaluation of an [`AltWord`] at an argument tuple.  Argument
/// permutations split across workers; the reduction is exact addition.
pub fn alt_word_evaluate<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    word: &AltWord,
    args: &[A::Elem],
) -> Result<Scalar> {
    debug_assert_eq!(args.len(), word.arity);
    let field = algebra.field();

    // Label maps with signs, the identity when labels are literal.
    let identity: Vec<usize> = (0..=max_label(word)).collect();
    let label_maps: Vec<(i64, Vec<usize>)> = match &word.label_alt {
        LabelAlt::None => vec![(1, identity)],
        LabelAlt::Permute { labels, .. } => PermutationIter::new(labels.len())
            .map(|(sign, perm)| {
                let mut map = identity.clone();
                for (pos, &p) in perm.iter().enumerate() {
                    map[labels[pos]] = labels[p];
                }
                (sign, map)
            })
            .collect(),
    };
    let relabel_q = matches!(
        &word.label_alt,
        LabelAlt::Permute { relabel_q: true, .. }
    );

    // Per-term coefficient, with the coset divisor folded in when Q indices
    // take part in the alternation.
    let mut term_coeffs: Vec<Scalar> = Vec::with_capacity(word.terms.len());
    for (coeff, factors) in &word.terms {
        let mut c = coeff.clone();
        if relabel_q {
            let twos = count_exclusive_q(factors);
            for _ in 0..twos {
                c = c.mul(&field.from_ratio(1, 2).map_err(|_| {
                    AlgebraError::Unsupported("field of characteristic 2".into())
                })?);
            }
        }
        term_coeffs.push(c);
    }

    let arg_perms: Vec<(i64, Vec<usize>)> = PermutationIter::new(word.arity).collect();
    let partials: Result<Vec<Scalar>> = arg_perms
        .par_iter()
        .map(|(arg_sign, perm)| {
            let permuted: Vec<A::Elem> = (0..word.arity)
                .map(|slot| args[perm[slot]].clone())
                .collect();
            let mut acc = field.zero();
            for (label_sign, map) in &label_maps {
                for ((_, factors), coeff) in word.terms.iter().zip(&term_coeffs) {
                    let v = eval_term(algebra, family, factors, &permuted, map, relabel_q)?;
                    if v.is_zero() {
                        continue;
                    }
                    let signed = if arg_sign * label_sign < 0 {
                        v.neg()
                    } else {
                        v
                    };
                    acc = acc.add(&coeff.mul(&signed));
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = field.zero();
    for v in partials? {
        total = total.add(&v);
    }
    Ok(total)
}

fn max_label(word: &AltWord) -> usize {
    let mut labels = Vec::new();
    for (_, factors) in &word.terms {
        collect_labels(factors, &mut labels);
    }
    if let LabelAlt::Permute { labels: l, .. } = &word.label_alt {
        labels.extend_from_slice(l);
    }
    labels.into_iter().max().unwrap_or(0)
}

/// Wraps an [`AltWord`] as a [`Cochain`].
pub fn word_cochain<'a, A: TracedAlgebra>(
    algebra: &'a A,
    family: &'a DerivationFamily<'a, A>,
    word: &'a AltWord,
) -> Cochain<'a, A::Elem> {
    Cochain::new(word.arity, true, move |args: &[A::Elem]| {
        alt_word_evaluate(algebra, family, word, args)
    })
}
