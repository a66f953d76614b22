//! Formula schemas, the marked-interval combinatorics behind them, builders
//! for the known cocycles and the conjectured family, the cycle-to-cocycle
//! lift, the inner-derivation expansion oracle, and the evaluator.
//!
//! A schema is a coefficient and an ordered word of factors over argument
//! slots, derivation labels, and Q-elements.  Evaluation alternates the
//! arguments always; what happens to derivation labels is a mode on the
//! formula, because the source notation is ambiguous exactly there.  The
//! mode that survives the cocycle tests is `FullRelabelCoset`; the other
//! two are kept so the harness can show the adjudication rather than assert
//! it.
//!
//! The evaluator runs one subset-DP per (schema, label assignment): scanning
//! the word left to right with a bitmask of consumed arguments replaces the
//! `m!` argument permutations with `2^m` partial products, and the signed
//! sum falls out of insertion parities.  A naive permutation-loop evaluator
//! with the same semantics stays around as the cross-check oracle.

use rayon::prelude::*;

use crate::cohomology::{
    ce_differential, chain_is_cycle, permutation_sign, Cochain, DerivationChain, PermutationIter,
};
use crate::framework::{AlgebraError, DerivationFamily, Handle, Result, TracedAlgebra};
use crate::matrix::{MatrixAlgebra, MatrixElement};
use crate::report::CheckReport;
use crate::scalars::{FieldSpec, Scalar};

/// One factor of a schema word.  Argument slots and derivation labels are
/// 1-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Factor {
    /// `D_d A_a`: derivation applied to an argument slot.
    DApplied(usize, usize),
    /// `A_a`: bare argument slot.
    Plain(usize),
    /// `Q_ij` from the family table.  The written order of `(i, j)` is part
    /// of the data and is never antisymmetrized internally.
    QFactor(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermSchema {
    pub coefficient: Scalar,
    pub word: Vec<Factor>,
}

/// How derivation labels alternate during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Permute the labels sitting on `DApplied` slots of each schema across
    /// those slots; `QFactor` labels stay fixed.
    DSlotsOnly,
    /// One signed permutation of the full label set `1..=l` rewrites
    /// `DApplied` labels and `QFactor` index pairs alike, written order
    /// preserved.
    FullRelabel,
    /// Like `FullRelabel`, but each schema is divided by 2 for every
    /// Q-factor whose two labels occur nowhere else in its word: the
    /// transposition of such a pair maps the term to itself (the sign flips
    /// and `Q_ji = -Q_ij` flips it back), so the plain relabeling sum counts
    /// it twice.
    FullRelabelCoset,
}

#[derive(Clone, Debug)]
pub struct LiftingFormula {
    /// Argument count: every schema word uses slots `1..=m` exactly once.
    pub m: usize,
    /// Derivation label count of the intended family.
    pub l: usize,
    pub mode: LabelMode,
    pub schemas: Vec<TermSchema>,
}

impl LiftingFormula {
    pub fn validate(&self) -> Result<()> {
        if self.schemas.is_empty() {
            return Err(AlgebraError::Unsupported("formula has no schemas".into()));
        }
        for schema in &self.schemas {
            let mut seen = vec![false; self.m];
            let mut mark = |slot: usize| -> Result<()> {
                if slot == 0 || slot > self.m {
                    return Err(AlgebraError::Unsupported(format!(
                        "argument slot {slot} outside 1..={}",
                        self.m
                    )));
                }
                if seen[slot - 1] {
                    return Err(AlgebraError::Unsupported(format!(
                        "argument slot {slot} used twice in one schema"
                    )));
                }
                seen[slot - 1] = true;
                Ok(())
            };
            for factor in &schema.word {
                match factor {
                    Factor::Plain(a) => mark(*a)?,
                    Factor::DApplied(d, a) => {
                        check_label(*d, self.l)?;
                        mark(*a)?;
                    }
                    Factor::QFactor(i, j) => {
                        check_label(*i, self.l)?;
                        check_label(*j, self.l)?;
                        if i == j {
                            return Err(AlgebraError::Unsupported(
                                "Q-factor with equal labels".into(),
                            ));
                        }
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(AlgebraError::Unsupported(
                    "schema does not use every argument slot".into(),
                ));
            }
        }
        Ok(())
    }
}

fn check_label(label: usize, l: usize) -> Result<()> {
    if label == 0 || label > l {
        return Err(AlgebraError::Unsupported(format!(
            "derivation label {label} outside 1..={l}"
        )));
    }
    Ok(())
}

/// A length-`2n-2` interval with marked points: a subset of `{1..2n-1}`
/// whose elements are pairwise at least 2 apart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedInterval {
    pub n: usize,
    /// Strictly increasing.
    pub marks: Vec<usize>,
}

/// All intervals with exactly `count` marks, lexicographic.  There are
/// `C(2n - count, count)` of them.
pub fn enumerate_marked_intervals(n: usize, count: usize) -> Vec<MarkedInterval> {
    assert!(n >= 1 && count >= 1 && count <= n, "need 1 <= count <= n");
    let limit = 2 * n - 1;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(count);
    fn extend(
        n: usize,
        limit: usize,
        count: usize,
        from: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<MarkedInterval>,
    ) {
        if current.len() == count {
            out.push(MarkedInterval {
                n,
                marks: current.clone(),
            });
            return;
        }
        for next in from..=limit {
            current.push(next);
            extend(n, limit, count, next + 2, current, out);
            current.pop();
        }
    }
    extend(n, limit, count, 1, &mut current, &mut out);
    out
}

/// The schema of one marked interval: a mark at `i` fuses the adjacent
/// derivation pair into `A_i Q_i,i+1 A_i+1`, every unmarked slot `j <= 2n`
/// keeps `D_j A_j`, and the word ends with the bare last argument.
pub fn interval_to_schema(iv: &MarkedInterval, field: FieldSpec) -> TermSchema {
    let two_n = 2 * iv.n;
    let mut word = Vec::with_capacity(two_n + 1);
    let mut j = 1;
    while j <= two_n {
        if iv.marks.contains(&j) {
            word.push(Factor::Plain(j));
            word.push(Factor::QFactor(j, j + 1));
            word.push(Factor::Plain(j + 1));
            j += 2;
        } else {
            word.push(Factor::DApplied(j, j));
            j += 1;
        }
    }
    word.push(Factor::Plain(two_n + 1));
    TermSchema {
        coefficient: field.one(),
        word,
    }
}

/// The conjectured `(2n+1)`-cocycle: the all-derivation leading schema plus
/// every marked-interval schema, all with coefficient +1, under the
/// coset-corrected full relabeling.
pub fn generate_lifting_formula(n: usize, field: FieldSpec) -> LiftingFormula {
    assert!(n >= 1);
    let two_n = 2 * n;
    let mut schemas = Vec::new();
    let mut leading: Vec<Factor> = (1..=two_n).map(|j| Factor::DApplied(j, j)).collect();
    leading.push(Factor::Plain(two_n + 1));
    schemas.push(TermSchema {
        coefficient: field.one(),
        word: leading,
    });
    for count in 1..=n {
        for iv in enumerate_marked_intervals(n, count) {
            schemas.push(interval_to_schema(&iv, field));
        }
    }
    LiftingFormula {
        m: two_n + 1,
        l: two_n,
        mode: LabelMode::FullRelabelCoset,
        schemas,
    }
}

/// Named formulas transcribed term by term from their statements:
/// `psi3`, `psi5`, and `psi-tilde-<i>` for `i >= 2` (the `(2i+1)`-cocycle of
/// a single derivation pair, whose final term carries 1/2 when `i` is even).
pub fn builtin_formula(name: &str, field: FieldSpec) -> Result<LiftingFormula> {
    let tilde = name
        .strip_prefix("psi-tilde-")
        .or_else(|| name.strip_prefix("psi_tilde(").and_then(|r| r.strip_suffix(')')));
    if let Some(i_text) = tilde {
        let i: usize = i_text
            .parse()
            .map_err(|_| AlgebraError::UnknownFormula(format!("bad index in `{name}`")))?;
        if i < 2 {
            return Err(AlgebraError::UnknownFormula(format!(
                "psi-tilde needs index >= 2, got {i}"
            )));
        }
        return Ok(psi_tilde(i, field));
    }
    match name {
        "psi3" => Ok(psi3(field)),
        "psi5" => Ok(psi5(field)),
        other => Err(AlgebraError::UnknownFormula(format!(
            "no builtin formula named `{other}`"
        ))),
    }
}

fn psi3(field: FieldSpec) -> LiftingFormula {
    LiftingFormula {
        m: 3,
        l: 2,
        mode: LabelMode::FullRelabelCoset,
        schemas: vec![
            TermSchema {
                coefficient: field.one(),
                word: vec![
                    Factor::DApplied(1, 1),
                    Factor::DApplied(2, 2),
                    Factor::Plain(3),
                ],
            },
            TermSchema {
                coefficient: field.one(),
                word: vec![
                    Factor::QFactor(1, 2),
                    Factor::Plain(1),
                    Factor::Plain(2),
                    Factor::Plain(3),
                ],
            },
        ],
    }
}

fn psi_tilde(i: usize, field: FieldSpec) -> LiftingFormula {
    let m = 2 * i + 1;
    let mut schemas = Vec::new();
    let mut q_word = vec![Factor::QFactor(1, 2)];
    q_word.extend((1..=m).map(Factor::Plain));
    schemas.push(TermSchema {
        coefficient: field.one(),
        word: q_word,
    });
    // D2 walks the even slots 2, 4, ..., s+1; every term has coefficient 1
    // except the last, which gets 1/2 for even i and 1 for odd i.
    let s = if i % 2 == 0 { i + 1 } else { i };
    let mut p = 2;
    while p <= s + 1 {
        let mut word = vec![Factor::DApplied(1, 1)];
        word.extend((2..p).map(Factor::Plain));
        word.push(Factor::DApplied(2, p));
        word.extend((p + 1..=m).map(Factor::Plain));
        let coefficient = if p == s + 1 && i % 2 == 0 {
            field
                .from_ratio(1, 2)
                .expect("characteristic-2 fields are not constructed")
        } else {
            field.one()
        };
        schemas.push(TermSchema { coefficient, word });
        p += 2;
    }
    LiftingFormula {
        m,
        l: 2,
        mode: LabelMode::FullRelabelCoset,
        schemas,
    }
}

/// The five-argument cocycle exactly as displayed: leading all-D term, the
/// three single-Q fusions, and the double fusion.  Syntactically equal to
/// `generate_lifting_formula(2)`, which the tests pin down.
fn psi5(field: FieldSpec) -> LiftingFormula {
    use Factor::{DApplied as D, Plain as A, QFactor as Q};
    let one = || field.one();
    LiftingFormula {
        m: 5,
        l: 4,
        mode: LabelMode::FullRelabelCoset,
        schemas: vec![
            TermSchema {
                coefficient: one(),
                word: vec![D(1, 1), D(2, 2), D(3, 3), D(4, 4), A(5)],
            },
            TermSchema {
                coefficient: one(),
                word: vec![A(1), Q(1, 2), A(2), D(3, 3), D(4, 4), A(5)],
            },
            TermSchema {
                coefficient: one(),
                word: vec![D(1, 1), A(2), Q(2, 3), A(3), D(4, 4), A(5)],
            },
            TermSchema {
                coefficient: one(),
                word: vec![D(1, 1), D(2, 2), A(3), Q(3, 4), A(4), A(5)],
            },
            TermSchema {
                coefficient: one(),
                word: vec![A(1), Q(1, 2), A(2), A(3), Q(3, 4), A(4), A(5)],
            },
        ],
    }
}

/// One schema per line: `<coeff> * D1[A1] A2 Q12`.  Q-factors with a label
/// above 9 use the unambiguous form `Q[10,11]`.
pub fn serialize_formula(formula: &LiftingFormula) -> String {
    let mut out = String::new();
    for schema in &formula.schemas {
        let factors: Vec<String> = schema.word.iter().map(factor_text).collect();
        out.push_str(&format!("{} * {}\n", schema.coefficient, factors.join(" ")));
    }
    out
}

fn factor_text(factor: &Factor) -> String {
    match factor {
        Factor::DApplied(d, a) => format!("D{d}[A{a}]"),
        Factor::Plain(a) => format!("A{a}"),
        Factor::QFactor(i, j) if *i < 10 && *j < 10 => format!("Q{i}{j}"),
        Factor::QFactor(i, j) => format!("Q[{i},{j}]"),
    }
}

/// Inverse of [`serialize_formula`].  Blank lines and `#` comments are
/// skipped; `m` and `l` are inferred from the content.
pub fn parse_formula(text: &str, field: FieldSpec, mode: LabelMode) -> Result<LiftingFormula> {
    let mut schemas = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (coeff_text, word_text) = line
            .split_once('*')
            .ok_or_else(|| AlgebraError::Parse(format!("schema line without `*`: `{line}`")))?;
        let coefficient = field.parse_scalar(coeff_text.trim())?;
        let word = word_text
            .split_whitespace()
            .map(parse_factor)
            .collect::<Result<Vec<Factor>>>()?;
        if word.is_empty() {
            return Err(AlgebraError::Parse(format!("empty schema word: `{line}`")));
        }
        schemas.push(TermSchema { coefficient, word });
    }
    if schemas.is_empty() {
        return Err(AlgebraError::Parse("no schema lines found".into()));
    }
    let mut m = 0;
    let mut l = 0;
    for schema in &schemas {
        for factor in &schema.word {
            match factor {
                Factor::Plain(a) => m = m.max(*a),
                Factor::DApplied(d, a) => {
                    m = m.max(*a);
                    l = l.max(*d);
                }
                Factor::QFactor(i, j) => l = l.max(*i).max(*j),
            }
        }
    }
    let formula = LiftingFormula { m, l, mode, schemas };
    formula.validate()?;
    Ok(formula)
}

fn parse_factor(token: &str) -> Result<Factor> {
    let bad = || AlgebraError::Parse(format!("bad factor token `{token}`"));
    if let Some(rest) = token.strip_prefix('D') {
        let (d_text, bracket) = rest.split_once('[').ok_or_else(bad)?;
        let inner = bracket.strip_suffix(']').ok_or_else(bad)?;
        let a_text = inner.strip_prefix('A').ok_or_else(bad)?;
        let d = d_text.parse().map_err(|_| bad())?;
        let a = a_text.parse().map_err(|_| bad())?;
        return Ok(Factor::DApplied(d, a));
    }
    if let Some(rest) = token.strip_prefix('Q') {
        if let Some(inner) = rest.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(bad)?;
            let (i_text, j_text) = inner.split_once(',').ok_or_else(bad)?;
            let i = i_text.trim().parse().map_err(|_| bad())?;
            let j = j_text.trim().parse().map_err(|_| bad())?;
            return Ok(Factor::QFactor(i, j));
        }
        let digits: Vec<char> = rest.chars().collect();
        if digits.len() != 2 || !digits.iter().all(|c| c.is_ascii_digit()) {
            return Err(AlgebraError::Parse(format!(
                "ambiguous Q token `{token}`; use Q[i,j] for labels above 9"
            )));
        }
        let i = digits[0].to_digit(10).unwrap() as usize;
        let j = digits[1].to_digit(10).unwrap() as usize;
        return Ok(Factor::QFactor(i, j));
    }
    if let Some(rest) = token.strip_prefix('A') {
        let a = rest.parse().map_err(|_| bad())?;
        return Ok(Factor::Plain(a));
    }
    Err(bad())
}

/// A resolved label assignment for one schema.
#[derive(Clone, Debug)]
enum Assign {
    /// `map[label - 1]` is the label's image; applies to D and Q labels.
    Global(Vec<usize>),
    /// Labels for successive `DApplied` factors in word order; Q labels stay.
    PerSlot(Vec<usize>),
}

struct SchemaJob<'s> {
    schema: &'s TermSchema,
    /// Schema coefficient with the coset divisor already folded in.
    coefficient: Scalar,
    sign: i64,
    assign: Assign,
}

fn exclusive_q_count(word: &[Factor]) -> u32 {
    let mut labels = Vec::new();
    for factor in word {
        match factor {
            Factor::DApplied(d, _) => labels.push(*d),
            Factor::QFactor(i, j) => {
                labels.push(*i);
                labels.push(*j);
            }
            Factor::Plain(_) => {}
        }
    }
    let uses = |l: usize| labels.iter().filter(|&&x| x == l).count();
    word.iter()
        .filter(|f| matches!(f, Factor::QFactor(i, j) if uses(*i) == 1 && uses(*j) == 1))
        .count() as u32
}

fn schema_jobs<'s>(formula: &'s LiftingFormula, field: FieldSpec) -> Result<Vec<SchemaJob<'s>>> {
    let mut jobs = Vec::new();
    match formula.mode {
        LabelMode::DSlotsOnly => {
            for schema in &formula.schemas {
                let d_labels: Vec<usize> = schema
                    .word
                    .iter()
                    .filter_map(|f| match f {
                        Factor::DApplied(d, _) => Some(*d),
                        _ => None,
                    })
                    .collect();
                for (sign, perm) in PermutationIter::new(d_labels.len()) {
                    let labels: Vec<usize> = perm.iter().map(|&k| d_labels[k]).collect();
                    jobs.push(SchemaJob {
                        schema,
                        coefficient: schema.coefficient.clone(),
                        sign,
                        assign: Assign::PerSlot(labels),
                    });
                }
            }
        }
        LabelMode::FullRelabel | LabelMode::FullRelabelCoset => {
            let perms: Vec<(i64, Vec<usize>)> = PermutationIter::new(formula.l).collect();
            for schema in &formula.schemas {
                let mut coefficient = schema.coefficient.clone();
                if formula.mode == LabelMode::FullRelabelCoset {
                    let exclusive = exclusive_q_count(&schema.word);
                    if exclusive > 0 {
                        let divisor = field.from_ratio(1, 1i64 << exclusive).map_err(|_| {
                            AlgebraError::Unsupported("field of characteristic 2".into())
                        })?;
                        coefficient = coefficient.mul(&divisor);
                    }
                }
                for (sign, perm) in &perms {
                    let map: Vec<usize> = perm.iter().map(|&p| p + 1).collect();
                    jobs.push(SchemaJob {
                        schema,
                        coefficient: coefficient.clone(),
                        sign: *sign,
                        assign: Assign::Global(map),
                    });
                }
            }
        }
    }
    Ok(jobs)
}

fn assigned_label(assign: &Assign, written: usize, d_position: usize) -> usize {
    match assign {
        Assign::Global(map) => map[written - 1],
        Assign::PerSlot(labels) => labels[d_position],
    }
}

fn assigned_q(assign: &Assign, i: usize, j: usize) -> (usize, usize) {
    match assign {
        Assign::Global(map) => (map[i - 1], map[j - 1]),
        Assign::PerSlot(_) => (i, j),
    }
}

/// One word factor after label resolution, ready for the subset DP.
enum DpFactor<'e, E> {
    Const(&'e E),
    /// `values[t]` is the factor's value when argument `t` lands in this
    /// slot; `None` means zero, pruning the branch before any product.
    Slot(Vec<Option<&'e E>>),
}

/// Signed sum over injective argument assignments of the traced product, by
/// dynamic programming over (consumed-argument set).  Signs come from
/// insertion parities; the caller supplies the word-order presign.
fn dp_alternating_trace<A: TracedAlgebra>(
    algebra: &A,
    factors: &[DpFactor<'_, A::Elem>],
    m: usize,
) -> Result<Scalar> {
    let size = 1usize << m;
    let minus_one = algebra.field().from_i64(-1);
    let mut dp: Vec<Option<A::Elem>> = vec![None; size];
    dp[0] = Some(algebra.one());
    for factor in factors {
        match factor {
            DpFactor::Const(c) => {
                for cell in dp.iter_mut() {
                    if let Some(v) = cell.take() {
                        let prod = algebra.mul(&v, c)?;
                        if !algebra.is_zero(&prod) {
                            *cell = Some(prod);
                        }
                    }
                }
            }
            DpFactor::Slot(values) => {
                let mut next: Vec<Option<A::Elem>> = vec![None; size];
                for mask in 0..size {
                    let Some(v) = &dp[mask] else { continue };
                    for (t, value) in values.iter().enumerate() {
                        if mask & (1 << t) != 0 {
                            continue;
                        }
                        let Some(w) = value else { continue };
                        let prod = algebra.mul(v, w)?;
                        if algebra.is_zero(&prod) {
                            continue;
                        }
                        let inversions = (mask >> (t + 1)).count_ones();
                        let signed = if inversions % 2 == 1 {
                            algebra.scale(&minus_one, &prod)
                        } else {
                            prod
                        };
                        let target = mask | (1 << t);
                        next[target] = Some(match next[target].take() {
                            None => signed,
                            Some(acc) => algebra.add(&acc, &signed),
                        });
                    }
                }
                dp = next;
            }
        }
    }
    match &dp[size - 1] {
        None => Ok(algebra.field().zero()),
        Some(v) => algebra.trace(v),
    }
}

/// Evaluates a formula at an argument tuple: for every schema, the signed
/// sum over argument permutations and over label assignments per the mode,
/// of the trace of the word product.  Label assignments run in parallel;
/// the reduction is an exact sum in a fixed order.
pub fn evaluate<A: TracedAlgebra>(
    formula: &LiftingFormula,
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    args: &[A::Elem],
) -> Result<Scalar> {
    formula.validate()?;
    if args.len() != formula.m {
        return Err(AlgebraError::Unsupported(format!(
            "formula takes {} arguments, got {}",
            formula.m,
            args.len()
        )));
    }
    if formula.l > family.len() {
        return Err(AlgebraError::Unsupported(format!(
            "formula uses {} derivation labels but the family has {}",
            formula.l,
            family.len()
        )));
    }
    let field = algebra.field();

    // Derivation values per (label, argument), shared by every assignment.
    let mut applied: Vec<Vec<Option<A::Elem>>> = Vec::with_capacity(formula.l);
    for label in 1..=formula.l {
        let mut row = Vec::with_capacity(args.len());
        for arg in args {
            let v = family.apply(label, arg)?;
            row.push(if algebra.is_zero(&v) { None } else { Some(v) });
        }
        applied.push(row);
    }
    let plain_row: Vec<Option<&A::Elem>> = args
        .iter()
        .map(|a| if algebra.is_zero(a) { None } else { Some(a) })
        .collect();

    let jobs = schema_jobs(formula, field)?;
    let partials: Result<Vec<Scalar>> = jobs
        .par_iter()
        .map(|job| {
            let mut factors: Vec<DpFactor<'_, A::Elem>> = Vec::with_capacity(job.schema.word.len());
            let mut slot_order: Vec<usize> = Vec::with_capacity(formula.m);
            let mut d_position = 0;
            for factor in &job.schema.word {
                match factor {
                    Factor::Plain(a) => {
                        slot_order.push(*a - 1);
                        factors.push(DpFactor::Slot(plain_row.clone()));
                    }
                    Factor::DApplied(d, a) => {
                        let label = assigned_label(&job.assign, *d, d_position);
                        d_position += 1;
                        slot_order.push(*a - 1);
                        factors.push(DpFactor::Slot(
                            applied[label - 1].iter().map(|o| o.as_ref()).collect(),
                        ));
                    }
                    Factor::QFactor(i, j) => {
                        let (qi, qj) = assigned_q(&job.assign, *i, *j);
                        let q = family.q(qi, qj)?;
                        if algebra.is_zero(q) {
                            return Ok(field.zero());
                        }
                        factors.push(DpFactor::Const(q));
                    }
                }
            }
            let presign = permutation_sign(&slot_order);
            let raw = dp_alternating_trace(algebra, &factors, formula.m)?;
            if raw.is_zero() {
                return Ok(raw);
            }
            let value = job.coefficient.mul(&raw);
            Ok(if job.sign * presign < 0 {
                value.neg()
            } else {
                value
            })
        })
        .collect();
    let mut total = field.zero();
    for v in partials? {
        total = total.add(&v);
    }
    Ok(total)
}

/// Reference evaluator: the literal triple loop over argument permutations,
/// label assignments, and schemas.  Same semantics as [`evaluate`], kept as
/// the oracle the DP is tested against.
pub fn evaluate_naive<A: TracedAlgebra>(
    formula: &LiftingFormula,
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    args: &[A::Elem],
) -> Result<Scalar> {
    formula.validate()?;
    assert_eq!(args.len(), formula.m);
    let field = algebra.field();
    let jobs = schema_jobs(formula, field)?;
    let mut total = field.zero();
    for (arg_sign, perm) in PermutationIter::new(formula.m) {
        let view: Vec<&A::Elem> = perm.iter().map(|&i| &args[i]).collect();
        for job in &jobs {
            let mut product: Option<A::Elem> = None;
            let mut d_position = 0;
            for factor in &job.schema.word {
                let value = match factor {
                    Factor::Plain(a) => view[*a - 1].clone(),
                    Factor::DApplied(d, a) => {
                        let label = assigned_label(&job.assign, *d, d_position);
                        d_position += 1;
                        family.apply(label, view[*a - 1])?
                    }
                    Factor::QFactor(i, j) => {
                        let (qi, qj) = assigned_q(&job.assign, *i, *j);
                        family.q(qi, qj)?.clone()
                    }
                };
                product = Some(match product {
                    None => value,
                    Some(p) => algebra.mul(&p, &value)?,
                });
            }
            let trace = algebra.trace(&product.expect("nonempty word"))?;
            let signed = if arg_sign * job.sign < 0 {
                trace.neg()
            } else {
                trace
            };
            total = total.add(&job.coefficient.mul(&signed));
        }
    }
    Ok(total)
}

/// Wraps a formula evaluation as a cochain for the differential machinery.
pub fn formula_cochain<'a, A: TracedAlgebra>(
    formula: &'a LiftingFormula,
    algebra: &'a A,
    family: &'a DerivationFamily<'a, A>,
) -> Cochain<'a, A::Elem> {
    Cochain::new(formula.m, true, move |args: &[A::Elem]| {
        evaluate(formula, algebra, family, args)
    })
}

/// Lifts a cycle of derivation wedges to the all-D cocycle formula
/// `Alt Tr(sum_k a_k D A . D A ... A)`.  The cycle precondition is probed on
/// the supplied tuples and a nonzero boundary is an error.
pub fn lemma22_cocycle<A: TracedAlgebra>(
    algebra: &A,
    family: &DerivationFamily<'_, A>,
    chain: &DerivationChain,
    probes: &[Vec<A::Elem>],
) -> Result<LiftingFormula> {
    if !chain_is_cycle(algebra, family, chain, probes)? {
        return Err(AlgebraError::NotACycle(
            "chain boundary is nonzero on a probe tuple".into(),
        ));
    }
    let arity = chain
        .terms
        .first()
        .map(|(_, labels)| labels.len())
        .ok_or_else(|| AlgebraError::Unsupported("empty derivation chain".into()))?;
    if chain.terms.iter().any(|(_, labels)| labels.len() != arity) {
        return Err(AlgebraError::Unsupported(
            "chain mixes wedge arities".into(),
        ));
    }
    let schemas = chain
        .terms
        .iter()
        .map(|(coefficient, labels)| TermSchema {
            coefficient: coefficient.clone(),
            word: labels
                .iter()
                .enumerate()
                .map(|(k, &label)| Factor::DApplied(label, k + 1))
                .chain(std::iter::once(Factor::Plain(arity + 1)))
                .collect(),
        })
        .collect();
    Ok(LiftingFormula {
        m: arity + 1,
        l: family.len(),
        mode: LabelMode::DSlotsOnly,
        schemas,
    })
}

/// The inner-derivation family `a -> [m_i, a]` with the full Q-table
/// `Q_ij = [m_i, m_j]`.
pub fn inner_derivation_family<'a>(
    algebra: &'a MatrixAlgebra,
    elems: &'a [MatrixElement],
) -> Result<DerivationFamily<'a, MatrixAlgebra>> {
    let mut handles: Vec<Handle<'a, MatrixElement>> = Vec::new();
    for m in elems {
        handles.push(Box::new(move |e| algebra.bracket(m, e)));
    }
    let mut family = DerivationFamily::new(handles);
    for i in 0..elems.len() {
        for j in (i + 1)..elems.len() {
            let q = algebra.bracket(&elems[i], &elems[j])?;
            family.set_q(algebra, i + 1, j + 1, q);
        }
    }
    Ok(family)
}

fn binomial(a: usize, b: usize) -> i64 {
    if b > a {
        return 0;
    }
    let mut num = 1i64;
    let mut den = 1i64;
    for t in 0..b {
        num *= (a - t) as i64;
        den *= (t + 1) as i64;
    }
    num / den
}

/// Full distribution of `Alt Tr([D_1,A_1] ... [D_2n,A_2n] A_2n+1)` over
/// inner data, bucketed by the number of adjacent D-D junctions the
/// expansion word contains.  Bucket 0 collects the interleaved-shape terms;
/// adjacency positions are automatically at distance >= 2 (a block cannot
/// both start and end with its derivation), so buckets beyond `n` must come
/// out zero, which the caller asserts.
///
/// Runs one DP per label permutation over (consumed-argument set, whether
/// the previous block ended with its derivation, junction count).
fn expansion_profile(
    algebra: &MatrixAlgebra,
    d_elems: &[MatrixElement],
    args: &[MatrixElement],
) -> Vec<Scalar> {
    let two_n = d_elems.len();
    let m = args.len();
    debug_assert_eq!(m, two_n + 1);
    let field = algebra.field();
    let minus_one = field.from_i64(-1);
    let buckets = two_n; // junction count can reach at most 2n - 1
    let masks = 1usize << m;
    let cells = masks * 2 * buckets;
    let idx = |mask: usize, last_d: usize, adj: usize| (mask * 2 + last_d) * buckets + adj;

    // Block values: derivation-first and derivation-last per (label, arg).
    let d_first: Vec<Vec<MatrixElement>> = d_elems
        .iter()
        .map(|d| args.iter().map(|a| algebra.mul(d, a)).collect())
        .collect();
    let d_last: Vec<Vec<MatrixElement>> = d_elems
        .iter()
        .map(|d| args.iter().map(|a| algebra.mul(a, d)).collect())
        .collect();

    let sigmas: Vec<(i64, Vec<usize>)> = PermutationIter::new(two_n).collect();
    let partials: Vec<Vec<Scalar>> = sigmas
        .par_iter()
        .map(|(label_sign, label_perm)| {
            let mut dp: Vec<Option<MatrixElement>> = vec![None; cells];
            dp[idx(0, 0, 0)] = Some(algebra.identity());
            for block in 0..two_n {
                let lab = label_perm[block];
                let mut next: Vec<Option<MatrixElement>> = vec![None; cells];
                for mask in 0..masks {
                    for last_d in 0..2 {
                        for adj in 0..buckets {
                            let Some(v) = &dp[idx(mask, last_d, adj)] else {
                                continue;
                            };
                            for t in 0..m {
                                if mask & (1 << t) != 0 {
                                    continue;
                                }
                                let odd = (mask >> (t + 1)).count_ones() % 2 == 1;
                                // Derivation-first: a junction iff the
                                // previous block ended with its derivation.
                                let adj2 = adj + last_d;
                                if adj2 < buckets {
                                    let prod = algebra.mul(v, &d_first[lab][t]);
                                    let prod = if odd {
                                        algebra.scale(&minus_one, &prod)
                                    } else {
                                        prod
                                    };
                                    let target = idx(mask | (1 << t), 0, adj2);
                                    next[target] = Some(match next[target].take() {
                                        None => prod,
                                        Some(acc) => algebra.add(&acc, &prod),
                                    });
                                }
                                // Derivation-last, with the expansion minus.
                                let prod = algebra.mul(v, &d_last[lab][t]);
                                let prod = if !odd {
                                    algebra.scale(&minus_one, &prod)
                                } else {
                                    prod
                                };
                                let target = idx(mask | (1 << t), 1, adj);
                                next[target] = Some(match next[target].take() {
                                    None => prod,
                                    Some(acc) => algebra.add(&acc, &prod),
                                });
                            }
                        }
                    }
                }
                dp = next;
            }
            // Trailing bare argument: exactly one slot left per live cell.
            let mut out = vec![field.zero(); buckets];
            for mask in 0..masks {
                for last_d in 0..2 {
                    for adj in 0..buckets {
                        let Some(v) = &dp[idx(mask, last_d, adj)] else {
                            continue;
                        };
                        let t = (!mask & (masks - 1)).trailing_zeros() as usize;
                        let odd = (mask >> (t + 1)).count_ones() % 2 == 1;
                        let trace = algebra.trace_elem(&algebra.mul(v, &args[t]));
                        let signed = if (*label_sign < 0) ^ odd {
                            trace.neg()
                        } else {
                            trace
                        };
                        out[adj] = out[adj].add(&signed);
                    }
                }
            }
            out
        })
        .collect();
    let mut total = vec![field.zero(); buckets];
    for part in partials {
        for (acc, v) in total.iter_mut().zip(part) {
            *acc = acc.add(&v);
        }
    }
    total
}

/// `Alt Tr(D_1 . A_1 . D_2 . A_2 ... D_2n . A_2n [. A_2n+1])` with the
/// derivations interleaved as bare elements: the class the expansion
/// measures against (with the trailing argument) and its potential (without).
fn interleaved_value(
    algebra: &MatrixAlgebra,
    d_elems: &[MatrixElement],
    args: &[MatrixElement],
    trailing_arg: bool,
) -> Result<Scalar> {
    let two_n = d_elems.len();
    let m = args.len();
    debug_assert_eq!(m, two_n + usize::from(trailing_arg));
    let field = algebra.field();
    let plain_row: Vec<Option<&MatrixElement>> = args.iter().map(Some).collect();
    let sigmas: Vec<(i64, Vec<usize>)> = PermutationIter::new(two_n).collect();
    let partials: Result<Vec<Scalar>> = sigmas
        .par_iter()
        .map(|(label_sign, label_perm)| {
            let mut factors: Vec<DpFactor<'_, MatrixElement>> = Vec::with_capacity(2 * two_n + 1);
            for &lab in label_perm {
                factors.push(DpFactor::Const(&d_elems[lab]));
                factors.push(DpFactor::Slot(plain_row.clone()));
            }
            if trailing_arg {
                factors.push(DpFactor::Slot(plain_row.clone()));
            }
            let raw = dp_alternating_trace(algebra, &factors, m)?;
            Ok(if *label_sign < 0 { raw.neg() } else { raw })
        })
        .collect();
    let mut total = field.zero();
    for v in partials? {
        total = total.add(&v);
    }
    Ok(total)
}

pub struct InnerExpansionOutcome {
    /// The integer relating the interleaved-shape part of the expansion to
    /// the interleaved cocycle, solved from the first usable sample.
    pub k: Scalar,
    pub reports: Vec<CheckReport>,
}

/// The expansion oracle over inner derivations: distributes the bracket
/// word, solves the integer `k` against the interleaved cocycle, checks the
/// adjacency part against the negated interval sums, checks the per-count
/// binomial refinement, checks that the generated formula is closed on this
/// data, and solves the integer constant relating the interleaved cocycle
/// to the differential of its 2n-argument potential.
pub fn inner_expansion_check(
    n: usize,
    algebra: &MatrixAlgebra,
    d_elems: &[MatrixElement],
    mut sampler: impl FnMut() -> MatrixElement,
    sample_count: usize,
) -> Result<InnerExpansionOutcome> {
    assert!(n >= 1);
    assert_eq!(d_elems.len(), 2 * n, "need 2n derivation elements");
    assert!(sample_count >= 1);
    let field = algebra.field();
    let family = inner_derivation_family(algebra, d_elems)?;

    let sigma_formulas: Vec<LiftingFormula> = (1..=n)
        .map(|count| LiftingFormula {
            m: 2 * n + 1,
            l: 2 * n,
            mode: LabelMode::FullRelabelCoset,
            schemas: enumerate_marked_intervals(n, count)
                .iter()
                .map(|iv| interval_to_schema(iv, field))
                .collect(),
        })
        .collect();

    let mut reports = Vec::new();
    let mut k: Option<(Scalar, i64)> = None;
    let mut decomposition_witness: Option<String> = None;
    let mut refinement_witness: Option<String> = None;

    for s in 0..sample_count {
        let args: Vec<MatrixElement> = (0..2 * n + 1).map(|_| sampler()).collect();
        let profile = expansion_profile(algebra, d_elems, &args);
        let alpha = interleaved_value(algebra, d_elems, &args, true)?;
        let sigmas: Vec<Scalar> = sigma_formulas
            .iter()
            .map(|f| evaluate(f, algebra, &family, &args))
            .collect::<Result<_>>()?;

        // Junction counts beyond n are combinatorially impossible.
        for (j, value) in profile.iter().enumerate().skip(n + 1) {
            if !value.is_zero() {
                return Err(AlgebraError::Unsupported(format!(
                    "adjacency bucket {j} is nonzero; junction bound violated"
                )));
            }
        }

        // Interleaved-shape part against k times the interleaved cocycle.
        if alpha.is_zero() {
            if !profile[0].is_zero() {
                return Err(AlgebraError::InconsistentK(format!(
                    "sample {s}: interleaved cocycle vanished but bucket 0 is {}",
                    profile[0]
                )));
            }
        } else {
            let ratio = profile[0].mul(&alpha.inv()?);
            match &k {
                None => {
                    let bound = 1i64 << (2 * n);
                    let lift = (-bound..=bound).find(|&t| ratio == field.from_i64(t));
                    match lift {
                        Some(t) => k = Some((ratio, t)),
                        None => {
                            return Err(AlgebraError::InconsistentK(format!(
                                "sample {s}: ratio {ratio} has no integer lift within +/-{bound}"
                            )))
                        }
                    }
                }
                Some((kv, _)) if *kv == ratio => {}
                Some((kv, _)) => {
                    return Err(AlgebraError::InconsistentK(format!(
                        "sample {s}: ratio {ratio} disagrees with earlier {kv}"
                    )))
                }
            }
        }

        // Adjacency part equals the negated sum of interval terms.
        let mut s_part = field.zero();
        for value in profile.iter().skip(1) {
            s_part = s_part.add(value);
        }
        let mut sigma_sum = field.zero();
        for value in &sigmas {
            sigma_sum = sigma_sum.add(value);
        }
        if decomposition_witness.is_none() && s_part != sigma_sum.neg() {
            decomposition_witness = Some(format!(
                "sample {s}: adjacency part {s_part} vs negated interval sum {}",
                sigma_sum.neg()
            ));
        }

        // Per-count refinement: the N-mark interval sum resolves the
        // buckets binomially, which is what telescopes the decomposition.
        for count in 1..=n {
            let mut acc = field.zero();
            for (j, value) in profile.iter().enumerate().take(n + 1).skip(count) {
                acc = acc.add(&field.from_i64(binomial(j, count)).mul(value));
            }
            if count % 2 == 1 {
                acc = acc.neg();
            }
            if refinement_witness.is_none() && sigmas[count - 1] != acc {
                refinement_witness = Some(format!(
                    "sample {s}, {count} marks: interval sum {} vs bucket combination {acc}",
                    sigmas[count - 1]
                ));
            }
        }
    }

    let (k_scalar, k_int) = k.ok_or_else(|| {
        AlgebraError::Unsupported(
            "interleaved cocycle vanished on every sample; k undetermined".into(),
        )
    })?;
    reports.push(
        CheckReport::pass("expansion-integer-k").with_witness(format!("k = {k_int}")),
    );
    reports.push(match decomposition_witness {
        None => CheckReport::pass("expansion-interval-decomposition"),
        Some(w) => CheckReport::fail("expansion-interval-decomposition", w),
    });
    reports.push(match refinement_witness {
        None => CheckReport::pass("expansion-binomial-refinement"),
        Some(w) => CheckReport::fail("expansion-binomial-refinement", w),
    });

    // The generated formula is closed on this inner data.
    let conjecture = generate_lifting_formula(n, field);
    let cochain = formula_cochain(&conjecture, algebra, &family);
    let mut cocycle_witness = None;
    for s in 0..sample_count {
        let tuple: Vec<MatrixElement> = (0..2 * n + 2).map(|_| sampler()).collect();
        let d = ce_differential(algebra, &cochain, &tuple)?;
        if !d.is_zero() {
            cocycle_witness = Some(format!("sample {s}: d-value {d}"));
            break;
        }
    }
    reports.push(match cocycle_witness {
        None => CheckReport::pass("generated-formula-closed"),
        Some(w) => CheckReport::fail("generated-formula-closed", w),
    });

    // The interleaved cocycle is a constant multiple of the differential of
    // its 2n-argument potential.  In the fully summed alternation used here
    // the perfectly interleaved word has a cyclic automorphism of order 2n
    // (rotate labels and arguments together by one block), so the potential
    // is counted 2n times per distinct word and the solved constant carries
    // a 1/(2n): the integer statement is about 2n times this ratio.
    let beta = Cochain::new(2 * n, true, |args: &[MatrixElement]| {
        interleaved_value(algebra, d_elems, args, false)
    });
    let denom = 2 * n as i64;
    let mut a_value: Option<i64> = None;
    let mut a_witness = None;
    for s in 0..sample_count {
        let tuple: Vec<MatrixElement> = (0..2 * n + 1).map(|_| sampler()).collect();
        let alpha = interleaved_value(algebra, d_elems, &tuple, true)?;
        let dbeta = ce_differential(algebra, &beta, &tuple)?;
        if dbeta.is_zero() {
            if !alpha.is_zero() {
                a_witness = Some(format!(
                    "sample {s}: potential differential vanished but the cocycle is {alpha}"
                ));
                break;
            }
            continue;
        }
        let ratio = alpha.mul(&dbeta.inv()?);
        let lift = (-1000i64..=1000).find(|&t| {
            field
                .from_ratio(t, denom)
                .map(|v| v == ratio)
                .unwrap_or(false)
        });
        match (lift, a_value) {
            (Some(t), None) => a_value = Some(t),
            (Some(t), Some(prev)) if t == prev => {}
            (Some(t), Some(prev)) => {
                a_witness = Some(format!(
                    "sample {s}: constant {t}/{denom} disagrees with {prev}/{denom}"
                ));
                break;
            }
            (None, _) => {
                a_witness = Some(format!(
                    "sample {s}: ratio {ratio} is not t/{denom} for small integer t"
                ));
                break;
            }
        }
    }
    reports.push(match (a_witness, a_value) {
        (Some(w), _) => CheckReport::fail("interleaved-potential-constant", w),
        (None, Some(t)) => CheckReport::pass("interleaved-potential-constant")
            .with_witness(format!("a = {t}/{denom} of the full sum, {t} per distinct word")),
        (None, None) => CheckReport::error(
            "interleaved-potential-constant",
            "differential vanished on every sample; constant undetermined",
        ),
    });

    Ok(InnerExpansionOutcome {
        k: k_scalar,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::CurrentAlgebra;
    use crate::psido::{self, floor_uniform, PsiDOAlgebra};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rational() -> FieldSpec {
        FieldSpec::Rational
    }

    #[test]
    fn marked_intervals_match_brute_force() {
        for n in 1..=6usize {
            for count in 1..=n {
                let fast = enumerate_marked_intervals(n, count);
                // Brute force: every subset of {1..2n-1} of the right size
                // with pairwise gaps >= 2.
                let limit = 2 * n - 1;
                let mut brute = Vec::new();
                for bits in 0u32..(1 << limit) {
                    if bits.count_ones() as usize != count {
                        continue;
                    }
                    let marks: Vec<usize> =
                        (1..=limit).filter(|i| bits & (1 << (i - 1)) != 0).collect();
                    if marks.windows(2).all(|w| w[1] - w[0] >= 2) {
                        brute.push(marks);
                    }
                }
                brute.sort();
                let fast_marks: Vec<Vec<usize>> = fast.iter().map(|iv| iv.marks.clone()).collect();
                assert_eq!(fast_marks, brute, "n={n} count={count}");
                let expected = binomial(2 * n - count, count) as usize;
                assert_eq!(fast.len(), expected, "n={n} count={count}");
            }
        }
    }

    #[test]
    fn interval_schemas_have_the_displayed_shapes() {
        use Factor::{DApplied as D, Plain as A, QFactor as Q};
        let s = interval_to_schema(
            &MarkedInterval {
                n: 3,
                marks: vec![1],
            },
            rational(),
        );
        assert_eq!(
            s.word,
            vec![A(1), Q(1, 2), A(2), D(3, 3), D(4, 4), D(5, 5), D(6, 6), A(7)]
        );
        let s = interval_to_schema(
            &MarkedInterval {
                n: 2,
                marks: vec![1, 3],
            },
            rational(),
        );
        assert_eq!(s.word, vec![A(1), Q(1, 2), A(2), A(3), Q(3, 4), A(4), A(5)]);
        let s = interval_to_schema(
            &MarkedInterval {
                n: 1,
                marks: vec![1],
            },
            rational(),
        );
        assert_eq!(s.word, vec![A(1), Q(1, 2), A(2), A(3)]);
    }

    #[test]
    fn generator_counts_and_shapes() {
        assert_eq!(generate_lifting_formula(1, rational()).schemas.len(), 2);
        let g2 = generate_lifting_formula(2, rational());
        assert_eq!(g2.schemas.len(), 5);
        let p5 = builtin_formula("psi5", rational()).unwrap();
        // Syntactic multiset equality against the displayed transcription.
        let mut a: Vec<String> = g2.schemas.iter().map(|s| format!("{s:?}")).collect();
        let mut b: Vec<String> = p5.schemas.iter().map(|s| format!("{s:?}")).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);

        let g3 = generate_lifting_formula(3, rational());
        assert_eq!(g3.schemas.len(), 13);
        let mut by_q_count = [0usize; 4];
        for schema in &g3.schemas {
            let q = schema
                .word
                .iter()
                .filter(|f| matches!(f, Factor::QFactor(_, _)))
                .count();
            by_q_count[q] += 1;
        }
        assert_eq!(by_q_count, [1, 5, 6, 1]);
        g3.validate().unwrap();
    }

    #[test]
    fn tilde_coefficients_follow_the_parity_rule() {
        let field = rational();
        let t2 = builtin_formula("psi-tilde-2", field).unwrap();
        assert_eq!(t2.m, 5);
        assert_eq!(t2.schemas.len(), 3);
        let last = t2.schemas.last().unwrap();
        assert_eq!(last.coefficient, field.from_ratio(1, 2).unwrap());
        assert!(last.word.contains(&Factor::DApplied(2, 4)));

        let t3 = builtin_formula("psi_tilde(3)", field).unwrap();
        assert_eq!(t3.m, 7);
        assert_eq!(t3.schemas.len(), 3);
        let last = t3.schemas.last().unwrap();
        assert_eq!(last.coefficient, field.one());
        assert!(last.word.contains(&Factor::DApplied(2, 4)));

        let t4 = builtin_formula("psi-tilde-4", field).unwrap();
        assert_eq!(t4.schemas.len(), 4);
        let last = t4.schemas.last().unwrap();
        assert_eq!(last.coefficient, field.from_ratio(1, 2).unwrap());
        assert!(last.word.contains(&Factor::DApplied(2, 6)));

        assert!(matches!(
            builtin_formula("psi-tilde-1", field),
            Err(AlgebraError::UnknownFormula(_))
        ));
        assert!(matches!(
            builtin_formula("psi9", field),
            Err(AlgebraError::UnknownFormula(_))
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let field = rational();
        for formula in [
            generate_lifting_formula(2, field),
            builtin_formula("psi-tilde-2", field).unwrap(),
        ] {
            let text = serialize_formula(&formula);
            let back = parse_formula(&text, field, formula.mode).unwrap();
            assert_eq!(back.schemas, formula.schemas);
            assert_eq!(back.m, formula.m);
            assert_eq!(back.l, formula.l);
        }
        // Wide labels force the bracketed Q form.
        let wide = LiftingFormula {
            m: 3,
            l: 11,
            mode: LabelMode::FullRelabel,
            schemas: vec![TermSchema {
                coefficient: field.from_i64(-3),
                word: vec![
                    Factor::Plain(1),
                    Factor::QFactor(10, 11),
                    Factor::Plain(2),
                    Factor::Plain(3),
                ],
            }],
        };
        let text = serialize_formula(&wide);
        assert!(text.contains("Q[10,11]"));
        let back = parse_formula(&text, field, LabelMode::FullRelabel).unwrap();
        assert_eq!(back.schemas, wide.schemas);
        assert!(parse_formula("1 * A1 Q123 A2", field, LabelMode::FullRelabel).is_err());
        assert!(parse_formula("garbage", field, LabelMode::FullRelabel).is_err());
    }

    #[test]
    fn psi3_value_at_the_distinguished_triple() {
        let alg = PsiDOAlgebra::new(1, rational(), floor_uniform(1, -8));
        let family = psido::log_family(&alg);
        let formula = builtin_formula("psi3", rational()).unwrap();
        let args = vec![alg.one(), alg.gen_x(1), alg.gen_d(1)];
        let value = evaluate(&formula, &alg, &family, &args).unwrap();
        assert_eq!(value, rational().from_i64(-3));
        let naive = evaluate_naive(&formula, &alg, &family, &args).unwrap();
        assert_eq!(naive, value);
    }

    #[test]
    fn evaluation_is_alternating() {
        let alg = PsiDOAlgebra::new(1, rational(), floor_uniform(1, -8));
        let family = psido::log_family(&alg);
        let formula = builtin_formula("psi3", rational()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = alg.sample(&mut rng);
        let b = alg.sample(&mut rng);
        let c = alg.sample(&mut rng);
        let v1 = evaluate(&formula, &alg, &family, &[a.clone(), b.clone(), c.clone()]).unwrap();
        let v2 = evaluate(&formula, &alg, &family, &[b.clone(), a.clone(), c.clone()]).unwrap();
        assert_eq!(v2, v1.neg());
        let repeated = evaluate(&formula, &alg, &family, &[a.clone(), a.clone(), c]).unwrap();
        assert!(repeated.is_zero());
    }

    #[test]
    fn dp_agrees_with_the_naive_evaluator() {
        let field = FieldSpec::Prime(100003);
        let alg = MatrixAlgebra::new(3, field);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ds: Vec<MatrixElement> = (0..4).map(|_| alg.sample(&mut rng)).collect();
        let family = inner_derivation_family(&alg, &ds).unwrap();
        let args: Vec<MatrixElement> = (0..5).map(|_| alg.sample(&mut rng)).collect();
        for mode in [
            LabelMode::FullRelabelCoset,
            LabelMode::FullRelabel,
            LabelMode::DSlotsOnly,
        ] {
            let mut formula = generate_lifting_formula(2, field);
            formula.mode = mode;
            let fast = evaluate(&formula, &alg, &family, &args).unwrap();
            let slow = evaluate_naive(&formula, &alg, &family, &args).unwrap();
            assert_eq!(fast, slow, "mode {mode:?}");
        }
    }

    #[test]
    fn label_mode_adjudication() {
        // Closedness separates the coset mode from slot-only alternation at
        // five arguments on inner matrix data.
        let field = FieldSpec::Prime(1000003);
        let alg = MatrixAlgebra::new(3, field);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ds: Vec<MatrixElement> = (0..4).map(|_| alg.sample(&mut rng)).collect();
        let family = inner_derivation_family(&alg, &ds).unwrap();
        let tuples: Vec<Vec<MatrixElement>> = (0..2)
            .map(|_| (0..6).map(|_| alg.sample(&mut rng)).collect())
            .collect();
        let d_values = |mode: LabelMode| -> Vec<Scalar> {
            let mut formula = generate_lifting_formula(2, field);
            formula.mode = mode;
            let cochain = formula_cochain(&formula, &alg, &family);
            tuples
                .iter()
                .map(|t| ce_differential(&alg, &cochain, t).unwrap())
                .collect()
        };
        for v in d_values(LabelMode::FullRelabelCoset) {
            assert!(v.is_zero(), "coset mode differential {v}");
        }
        assert!(
            d_values(LabelMode::DSlotsOnly).iter().any(|v| !v.is_zero()),
            "slot-only mode unexpectedly closed"
        );

        // Closedness does NOT separate the coset mode from the plain
        // relabeling: the fixed-Q word turns out to be closed by itself on
        // the symbol algebra (checked below), so both mixtures are closed.
        // What separates them is the value of the displayed two-term
        // formula, whose Q-term carries no label alternation: the coset
        // mode reproduces it exactly, the plain relabeling counts the
        // Q-term twice.
        let alg = PsiDOAlgebra::new(1, rational(), floor_uniform(1, -12));
        let family = psido::log_family(&alg);
        let mono = |xe: i64, de: i64| alg.monomial(rational().one(), vec![xe], vec![de]);
        let x_part =
            parse_formula("1 * D1[A1] D2[A2] A3", rational(), LabelMode::DSlotsOnly).unwrap();
        let y_part =
            parse_formula("1 * Q12 A1 A2 A3", rational(), LabelMode::DSlotsOnly).unwrap();
        let coset = builtin_formula("psi3", rational()).unwrap();
        let mut plain = builtin_formula("psi3", rational()).unwrap();
        plain.mode = LabelMode::FullRelabel;
        let probes = vec![
            vec![alg.one(), alg.gen_x(1), alg.gen_d(1)],
            vec![alg.gen_x(1), alg.one(), alg.gen_d(1)],
            vec![mono(2, 0), mono(0, 2), mono(1, 1)],
        ];
        let mut separated = 0;
        for args in &probes {
            let x = evaluate(&x_part, &alg, &family, args).unwrap();
            let y = evaluate(&y_part, &alg, &family, args).unwrap();
            let literal = x.add(&y);
            assert_eq!(evaluate(&coset, &alg, &family, args).unwrap(), literal);
            assert_eq!(
                evaluate(&plain, &alg, &family, args).unwrap(),
                literal.add(&y)
            );
            if !y.is_zero() {
                separated += 1;
            }
        }
        assert!(separated >= 1, "no probe separated the relabel modes");

        // The observation that forces the value-based tie-break: the
        // fixed-Q word is closed on its own here.
        let y_cochain = formula_cochain(&y_part, &alg, &family);
        let tuple = vec![mono(2, 0), mono(1, 1), alg.gen_d(1), alg.gen_x(1)];
        assert!(ce_differential(&alg, &y_cochain, &tuple)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn generated_three_cocycle_matches_the_builtin() {
        // The generated n=1 formula writes its Q-term as A1 Q12 A2 A3, the
        // builtin as Q12 A1 A2 A3; under trace cyclicity and argument
        // alternation the two agree, which this pins down numerically.
        let alg = PsiDOAlgebra::new(1, rational(), floor_uniform(1, -8));
        let family = psido::log_family(&alg);
        let g1 = generate_lifting_formula(1, rational());
        let p3 = builtin_formula("psi3", rational()).unwrap();
        let mono = |xe: i64, de: i64| alg.monomial(rational().one(), vec![xe], vec![de]);
        let triples = vec![
            vec![alg.one(), alg.gen_x(1), alg.gen_d(1)],
            vec![alg.gen_x(1), alg.gen_d(1), mono(1, 1)],
            vec![mono(2, 0), mono(0, 2), mono(1, 1)],
        ];
        let mut nonzero = 0;
        for args in &triples {
            let a = evaluate(&g1, &alg, &family, args).unwrap();
            let b = evaluate(&p3, &alg, &family, args).unwrap();
            assert_eq!(a, b);
            if !b.is_zero() {
                nonzero += 1;
            }
        }
        assert!(nonzero >= 1, "every probe triple vanished");
    }

    #[test]
    fn current_algebra_lift_is_the_loop_pairing() {
        let alg = CurrentAlgebra::new(1, 3, rational());
        let a_ref = &alg;
        let handles: Vec<Handle<'_, crate::matrix::CurrentElement>> =
            vec![Box::new(move |e| Ok(a_ref.loop_derivative(1, e)))];
        let family = DerivationFamily::new(handles);
        let chain = DerivationChain::single(vec![1], rational().one());
        let formula = lemma22_cocycle(&alg, &family, &chain, &[vec![]]).unwrap();
        assert_eq!(formula.m, 2);

        let e12 = alg.matrices.unit(1, 2);
        let e21 = alg.matrices.unit(2, 1);
        let pair = |a: i64, b: i64| {
            let x = alg.mono(e12.clone(), vec![a]);
            let y = alg.mono(e21.clone(), vec![b]);
            evaluate(&formula, &alg, &family, &[x, y]).unwrap()
        };
        assert!(pair(2, -1).is_zero());
        assert!(pair(0, 3).is_zero());
        // Proportionality constant against degree times the matrix pairing,
        // solved rather than assumed; the regression value is 2.
        let mut constant: Option<Scalar> = None;
        for a in [-3i64, -1, 1, 2, 4] {
            let v = pair(a, -a);
            let expected = rational().from_i64(a); // Tr(E12 E21) = 1
            let r = v.mul(&expected.inv().unwrap());
            match &constant {
                None => constant = Some(r),
                Some(prev) => assert_eq!(*prev, r),
            }
        }
        assert_eq!(constant.unwrap(), rational().from_i64(2));
    }

    #[test]
    fn non_cycles_are_rejected() {
        let alg = PsiDOAlgebra::new(1, rational(), floor_uniform(1, -8));
        let family = psido::log_family(&alg);
        let chain = DerivationChain::single(vec![1, 2], rational().one());
        let probes = vec![vec![alg.gen_x(1)]];
        let err = lemma22_cocycle(&alg, &family, &chain, &probes).unwrap_err();
        assert!(matches!(err, AlgebraError::NotACycle(_)));
    }

    #[test]
    fn expansion_oracle_solves_k_at_n1() {
        let alg = MatrixAlgebra::new(3, rational());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds: Vec<MatrixElement> = (0..2).map(|_| alg.sample(&mut rng)).collect();
        let outcome = inner_expansion_check(1, &alg, &ds, || alg.sample(&mut rng), 3).unwrap();
        assert_eq!(outcome.k, rational().from_i64(3));
        for report in &outcome.reports {
            assert!(report.passed(), "{}", report.text_line());
        }
    }

    #[test]
    fn expansion_oracle_is_consistent_at_n2() {
        let alg = MatrixAlgebra::new(3, FieldSpec::Prime(1000003));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ds: Vec<MatrixElement> = (0..4).map(|_| alg.sample(&mut rng)).collect();
        let outcome = inner_expansion_check(2, &alg, &ds, || alg.sample(&mut rng), 2).unwrap();
        for report in &outcome.reports {
            assert!(report.passed(), "{}", report.text_line());
        }
    }

    #[test]
    fn evaluation_errors_are_specific() {
        let field = rational();
        let alg = MatrixAlgebra::new(2, field);
        let m1 = alg.unit(1, 2);
        let m2 = m1.clone();
        let a_ref = &alg;
        let handles: Vec<Handle<'_, MatrixElement>> = vec![
            Box::new(move |e| a_ref.bracket(&m1, e)),
            Box::new(move |e| a_ref.bracket(&m2, e)),
        ];
        let family = DerivationFamily::new(handles); // no Q table
        let formula = builtin_formula("psi3", field).unwrap();
        let args: Vec<MatrixElement> = vec![alg.unit(1, 1), alg.unit(2, 1), alg.unit(2, 2)];
        let err = evaluate(&formula, &alg, &family, &args).unwrap_err();
        assert!(matches!(err, AlgebraError::MissingQEntry(_, _)));

        let err = evaluate(&formula, &alg, &family, &args[..2]).unwrap_err();
        assert!(matches!(err, AlgebraError::Unsupported(_)));
    }
}
