//! Truncated formal pseudodifferential symbols.
//!
//! Elements are finite sums of normal-ordered monomials
//! `x1^a1..xn^an d1^b1..dn^bn` (all `x` factors left of all `d` factors,
//! integer exponents of either sign) plus a per-axis precision floor: the
//! `d`-exponent below which coefficients are unknown.  Composition contracts
//! `d^b . x^c` into a series that strictly lowers `d`-exponents, so a floor
//! in the `d`-direction is the only truncation the calculus ever needs;
//! `x`-exponents stay exact.
//!
//! A floor of minus infinity on every axis means the element is exact
//! (differential operators, finite Laurent sums).  Every operation returns
//! the tightest sound floor: contamination from an operand's unknown region
//! is tracked per axis, and an operation that would need coefficients below
//! what is knowable fails with `PrecisionInsufficient` instead of silently
//! returning wrong values.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::framework::{AlgebraError, DerivationFamily, Result, TracedAlgebra};
use crate::scalars::{FieldSpec, Scalar};

pub type Exp = i64;

/// Exponents of one normal-ordered monomial; `x[i]`, `d[i]` for axis `i`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct ExponentVector {
    pub x: Vec<Exp>,
    pub d: Vec<Exp>,
}

impl ExponentVector {
    pub fn zeros(axes: usize) -> Self {
        ExponentVector {
            x: vec![0; axes],
            d: vec![0; axes],
        }
    }

    pub fn new(x: Vec<Exp>, d: Vec<Exp>) -> Self {
        assert_eq!(x.len(), d.len());
        ExponentVector { x, d }
    }

    pub fn axes(&self) -> usize {
        self.x.len()
    }
}

/// Per-axis floor value; `NegInf` marks an axis with no truncation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FloorVal {
    NegInf,
    At(i64),
}

impl FloorVal {
    /// Does exponent `e` lie at or above this floor?
    pub fn admits(&self, e: Exp) -> bool {
        match self {
            FloorVal::NegInf => true,
            FloorVal::At(f) => e >= *f,
        }
    }

    pub fn plus(&self, delta: i64) -> FloorVal {
        match self {
            FloorVal::NegInf => FloorVal::NegInf,
            FloorVal::At(f) => FloorVal::At(f + delta),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, FloorVal::At(_))
    }
}

impl PartialOrd for FloorVal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FloorVal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (FloorVal::NegInf, FloorVal::NegInf) => Equal,
            (FloorVal::NegInf, _) => Less,
            (_, FloorVal::NegInf) => Greater,
            (FloorVal::At(a), FloorVal::At(b)) => a.cmp(b),
        }
    }
}

pub type Floor = Vec<FloorVal>;

pub fn floor_exact(axes: usize) -> Floor {
    vec![FloorVal::NegInf; axes]
}

pub fn floor_at(values: &[i64]) -> Floor {
    values.iter().map(|v| FloorVal::At(*v)).collect()
}

pub fn floor_uniform(axes: usize, value: i64) -> Floor {
    vec![FloorVal::At(value); axes]
}

pub fn format_floor(floor: &Floor) -> String {
    if floor.iter().all(|f| *f == FloorVal::NegInf) {
        return "exact".into();
    }
    floor
        .iter()
        .enumerate()
        .map(|(i, f)| match f {
            FloorVal::NegInf => format!("d{}>=-inf", i + 1),
            FloorVal::At(v) => format!("d{}>={v}", i + 1),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A truncated symbol: term table plus floor.  `terms` never stores a zero
/// coefficient or an exponent below the floor.
#[derive(Clone, PartialEq, Debug)]
pub struct PsiDOElement {
    pub terms: BTreeMap<ExponentVector, Scalar>,
    pub floor: Floor,
}

impl PsiDOElement {
    pub fn zero(axes: usize) -> Self {
        PsiDOElement {
            terms: BTreeMap::new(),
            floor: floor_exact(axes),
        }
    }

    pub fn axes(&self) -> usize {
        self.floor.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.floor.iter().all(|f| *f == FloorVal::NegInf)
    }

    /// Single-term test; used by the monomial-only entry points.
    pub fn as_monomial(&self) -> Option<(&ExponentVector, &Scalar)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    /// Largest `d`-exponent per axis over the support; `None` when zero.
    fn max_d_degrees(&self) -> Option<Vec<Exp>> {
        if self.terms.is_empty() {
            return None;
        }
        let axes = self.axes();
        let mut out = vec![i64::MIN; axes];
        for ev in self.terms.keys() {
            for i in 0..axes {
                out[i] = out[i].max(ev.d[i]);
            }
        }
        Some(out)
    }

    fn prune_to(&mut self, floor: &Floor) {
        self.terms
            .retain(|ev, c| !c.is_zero() && ev.d.iter().zip(floor).all(|(e, f)| f.admits(*e)));
        self.floor = floor.clone();
    }

    /// Restrict to coefficients at or above `floor` (coarsening only).
    pub fn truncated(&self, floor: &Floor) -> PsiDOElement {
        let mut e = self.clone();
        let merged: Floor = e
            .floor
            .iter()
            .zip(floor)
            .map(|(a, b)| (*a).max(*b))
            .collect();
        e.prune_to(&merged);
        e
    }

    pub fn to_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if self.terms.is_empty() {
            parts.push("0".into());
        }
        for (ev, c) in &self.terms {
            let (sign, mag) = match c {
                Scalar::Rat(r) if r.numer().sign() == num_bigint::Sign::Minus => {
                    ("-", Scalar::Rat(-r))
                }
                _ => ("+", c.clone()),
            };
            let mut piece = format!("{sign} {mag}");
            for (i, e) in ev.x.iter().enumerate() {
                if *e != 0 {
                    piece.push_str(&format!(" x{}^{e}", i + 1));
                }
            }
            for (i, e) in ev.d.iter().enumerate() {
                if *e != 0 {
                    piece.push_str(&format!(" d{}^{e}", i + 1));
                }
            }
            parts.push(piece);
        }
        format!("{}  floor: {}", parts.join(" "), format_floor(&self.floor))
    }
}

impl std::fmt::Display for PsiDOElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// Which logarithmic derivation: `ad(ln d_axis)` or `ad(ln x_axis)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LnKind {
    LnDelta,
    LnX,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LogDerivationId {
    /// 1-based axis.
    pub axis: usize,
    pub kind: LnKind,
}

impl LogDerivationId {
    /// Canonical family order: D1=ad(ln d1), D2=ad(ln x1), D3=ad(ln d2), ...
    pub fn from_label(label: usize) -> Self {
        LogDerivationId {
            axis: (label + 1) / 2,
            kind: if label % 2 == 1 {
                LnKind::LnDelta
            } else {
                LnKind::LnX
            },
        }
    }
}

/// Sparse-sampler configuration for random elements.
#[derive(Clone, Copy, Debug)]
pub struct SampleProfile {
    pub max_terms: usize,
    pub x_range: (i64, i64),
    pub d_range: (i64, i64),
    pub coeff_range: (i64, i64),
}

impl Default for SampleProfile {
    fn default() -> Self {
        SampleProfile {
            max_terms: 3,
            x_range: (-2, 2),
            d_range: (-2, 2),
            coeff_range: (-3, 3),
        }
    }
}

/// The algebra instance: axis count, coefficient field, the working floor
/// used by the generic trait operations, and the sampling profile.
pub struct PsiDOAlgebra {
    pub axes: usize,
    pub field: FieldSpec,
    pub work_floor: Floor,
    pub profile: SampleProfile,
    inverses: Vec<Scalar>,
}

/// Denominators up to this bound get a precomputed inverse (series depth,
/// factorial index); anything beyond falls back to a direct inversion.
const INV_CACHE: i64 = 256;

impl PsiDOAlgebra {
    pub fn new(axes: usize, field: FieldSpec, work_floor: Floor) -> Self {
        assert_eq!(work_floor.len(), axes);
        let inverses = (0..=INV_CACHE)
            .map(|k| {
                if k == 0 {
                    field.zero()
                } else {
                    field
                        .from_ratio(1, k)
                        .expect("small denominator invertible")
                }
            })
            .collect();
        PsiDOAlgebra {
            axes,
            field,
            work_floor,
            profile: SampleProfile::default(),
            inverses,
        }
    }

    pub fn with_profile(mut self, profile: SampleProfile) -> Self {
        self.profile = profile;
        self
    }

    fn inv_small(&self, k: i64) -> Scalar {
        if k <= INV_CACHE {
            self.inverses[k as usize].clone()
        } else {
            self.field
                .from_ratio(1, k)
                .expect("denominator invertible")
        }
    }

    pub fn monomial(&self, coeff: Scalar, x: Vec<Exp>, d: Vec<Exp>) -> PsiDOElement {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(ExponentVector::new(x, d), coeff);
        }
        PsiDOElement {
            terms,
            floor: floor_exact(self.axes),
        }
    }

    pub fn from_terms(&self, list: Vec<(ExponentVector, Scalar)>, floor: Floor) -> PsiDOElement {
        let mut terms: BTreeMap<ExponentVector, Scalar> = BTreeMap::new();
        for (ev, c) in list {
            let entry = terms.entry(ev).or_insert_with(|| self.field.zero());
            *entry = entry.add(&c);
        }
        let mut e = PsiDOElement { terms, floor };
        let f = e.floor.clone();
        e.prune_to(&f);
        e
    }

    /// Generator `x_axis` (1-based axis).
    pub fn gen_x(&self, axis: usize) -> PsiDOElement {
        let mut x = vec![0; self.axes];
        x[axis - 1] = 1;
        self.monomial(self.field.one(), x, vec![0; self.axes])
    }

    /// Generator `d_axis`.
    pub fn gen_d(&self, axis: usize) -> PsiDOElement {
        let mut d = vec![0; self.axes];
        d[axis - 1] = 1;
        self.monomial(self.field.one(), vec![0; self.axes], d)
    }

    /// Generalized binomial `C(b, k)` for integer `b` of either sign.
    fn gen_binomial(&self, b: i64, k: i64) -> Scalar {
        let mut acc = self.field.one();
        for t in 0..k {
            acc = acc.mul(&self.field.from_i64(b - t));
            acc = acc.mul(&self.inv_small(t + 1));
        }
        acc
    }

    /// Falling factorial `(c)_k = c (c-1) ... (c-k+1)`.
    fn falling(&self, c: i64, k: i64) -> Scalar {
        let mut acc = self.field.one();
        for t in 0..k {
            acc = acc.mul(&self.field.from_i64(c - t));
        }
        acc
    }

    /// Normal-ordered product of two monomials (unit coefficients):
    /// per axis, `d^b1 x^a2 = sum_k C(b1,k) (a2)_k x^(a2-k) d^(b1-k)`.
    /// The contraction series terminates when `b1 >= 0` or `a2 >= 0`; on an
    /// axis where it does not, `floor` must be finite (this is a precondition
    /// and violations panic).  Terminating axes come back exact (floor
    /// minus infinity) regardless of the requested floor.
    pub fn mono_compose(
        &self,
        m1: &ExponentVector,
        m2: &ExponentVector,
        floor: &Floor,
    ) -> PsiDOElement {
        let axes = self.axes;
        // Per-axis contraction options: (k, coefficient).
        let mut axis_options: Vec<Vec<(i64, Scalar)>> = Vec::with_capacity(axes);
        let mut result_floor = floor_exact(axes);
        for i in 0..axes {
            let b1 = m1.d[i];
            let a2 = m2.x[i];
            let total_d = m1.d[i] + m2.d[i];
            let terminating = b1 >= 0 || a2 >= 0;
            let k_max = match (b1 >= 0, a2 >= 0) {
                (true, true) => b1.min(a2),
                (true, false) => b1,
                (false, true) => a2,
                (false, false) => match floor[i] {
                    FloorVal::At(f) => total_d - f,
                    FloorVal::NegInf => panic!(
                        "mono_compose: infinite contraction series on axis {} needs a finite floor",
                        i + 1
                    ),
                },
            };
            if !terminating {
                result_floor[i] = floor[i];
            }
            if k_max < 0 {
                return PsiDOElement {
                    terms: BTreeMap::new(),
                    floor: result_floor,
                };
            }
            let mut opts = Vec::with_capacity((k_max + 1) as usize);
            for k in 0..=k_max {
                let c = self.gen_binomial(b1, k).mul(&self.falling(a2, k));
                if !c.is_zero() {
                    opts.push((k, c));
                }
            }
            axis_options.push(opts);
        }

        // Cartesian product over the per-axis contraction orders.
        let mut terms: BTreeMap<ExponentVector, Scalar> = BTreeMap::new();
        let mut idx = vec![0usize; axes];
        'outer: loop {
            let mut coeff = self.field.one();
            let mut ev = ExponentVector::zeros(axes);
            for i in 0..axes {
                let (k, c) = &axis_options[i][idx[i]];
                coeff = coeff.mul(c);
                ev.x[i] = m1.x[i] + m2.x[i] - k;
                ev.d[i] = m1.d[i] + m2.d[i] - k;
            }
            let entry = terms.entry(ev).or_insert_with(|| self.field.zero());
            *entry = entry.add(&coeff);
            // Odometer increment.
            for i in 0..axes {
                idx[i] += 1;
                if idx[i] < axis_options[i].len() {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        terms.retain(|_, c| !c.is_zero());
        PsiDOElement {
            terms,
            floor: result_floor,
        }
    }

    /// Soundness data for one product axis: the depth to which the result is
    /// knowable given the operands' floors and maximal `d`-degrees.
    fn mul_knowable(phi1: FloorVal, beta1: i64, phi2: FloorVal, beta2: i64) -> FloorVal {
        phi1.plus(beta2).max(phi2.plus(beta1))
    }

    pub fn mul(
        &self,
        e1: &PsiDOElement,
        e2: &PsiDOElement,
        requested: &Floor,
    ) -> Result<PsiDOElement> {
        assert_eq!(requested.len(), self.axes);
        if e1.is_zero() || e2.is_zero() {
            return Ok(PsiDOElement::zero(self.axes));
        }
        let beta1 = e1.max_d_degrees().unwrap();
        let beta2 = e2.max_d_degrees().unwrap();
        let mut result_floor = floor_exact(self.axes);
        for i in 0..self.axes {
            let knowable = Self::mul_knowable(e1.floor[i], beta1[i], e2.floor[i], beta2[i]);
            if requested[i] < knowable {
                return Err(AlgebraError::PrecisionInsufficient(format!(
                    "product knowable only to {:?} on axis {}, requested {:?}",
                    knowable,
                    i + 1,
                    requested[i]
                )));
            }
            let infinite_series = e1
                .terms
                .keys()
                .any(|m1| m1.d[i] < 0 && e2.terms.keys().any(|m2| m2.x[i] < 0));
            result_floor[i] = if infinite_series {
                if !requested[i].is_finite() {
                    return Err(AlgebraError::PrecisionInsufficient(format!(
                        "exact product requested on axis {} but the contraction series is infinite",
                        i + 1
                    )));
                }
                requested[i].max(knowable)
            } else {
                knowable
            };
        }

        let mut acc: BTreeMap<ExponentVector, Scalar> = BTreeMap::new();
        for (m1, c1) in &e1.terms {
            for (m2, c2) in &e2.terms {
                let c12 = c1.mul(c2);
                let part = self.mono_compose(m1, m2, &result_floor);
                for (ev, c) in part.terms {
                    if !ev.d.iter().zip(&result_floor).all(|(e, f)| f.admits(*e)) {
                        continue;
                    }
                    let entry = acc.entry(ev).or_insert_with(|| self.field.zero());
                    *entry = entry.add(&c12.mul(&c));
                }
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(PsiDOElement {
            terms: acc,
            floor: result_floor,
        })
    }

    /// Product at the work floor, with the request relaxed per axis to the
    /// deepest knowable depth when the operands cannot support it.  The
    /// honest floor lands in the result, so long factor chains drift upward
    /// instead of erroring; `trace` rejects any value whose floor has
    /// drifted above the residue line.
    pub fn mul_drifting(&self, e1: &PsiDOElement, e2: &PsiDOElement) -> Result<PsiDOElement> {
        if e1.is_zero() || e2.is_zero() {
            return Ok(PsiDOElement::zero(self.axes));
        }
        let beta1 = e1.max_d_degrees().unwrap();
        let beta2 = e2.max_d_degrees().unwrap();
        let mut requested = self.work_floor.clone();
        for i in 0..self.axes {
            let knowable = Self::mul_knowable(e1.floor[i], beta1[i], e2.floor[i], beta2[i]);
            requested[i] = requested[i].max(knowable);
        }
        self.mul(e1, e2, &requested)
    }

    pub fn add(&self, e1: &PsiDOElement, e2: &PsiDOElement) -> PsiDOElement {
        let floor: Floor = if e1.is_zero() {
            e2.floor.clone()
        } else if e2.is_zero() {
            e1.floor.clone()
        } else {
            e1.floor
                .iter()
                .zip(&e2.floor)
                .map(|(a, b)| (*a).max(*b))
                .collect()
        };
        let mut terms = e1.terms.clone();
        for (ev, c) in &e2.terms {
            let entry = terms.entry(ev.clone()).or_insert_with(|| self.field.zero());
            *entry = entry.add(c);
        }
        let mut e = PsiDOElement { terms, floor };
        let f = e.floor.clone();
        e.prune_to(&f);
        e
    }

    pub fn scale(&self, s: &Scalar, e: &PsiDOElement) -> PsiDOElement {
        if s.is_zero() {
            return PsiDOElement::zero(self.axes);
        }
        PsiDOElement {
            terms: e.terms.iter().map(|(ev, c)| (ev.clone(), s.mul(c))).collect(),
            floor: e.floor.clone(),
        }
    }

    pub fn bracket(
        &self,
        e1: &PsiDOElement,
        e2: &PsiDOElement,
        requested: &Floor,
    ) -> Result<PsiDOElement> {
        let ab = self.mul(e1, e2, requested)?;
        let ba = self.mul(e2, e1, requested)?;
        Ok(self.add(&ab, &self.scale(&self.field.from_i64(-1), &ba)))
    }

    /// The residue: coefficient of `x1^-1..xn^-1 d1^-1..dn^-1`.  Requires the
    /// floor to reach -1 on every axis.
    pub fn trace(&self, e: &PsiDOElement) -> Result<Scalar> {
        for (i, f) in e.floor.iter().enumerate() {
            if !f.admits(-1) {
                return Err(AlgebraError::PrecisionInsufficient(format!(
                    "residue needs axis {} floor at or below -1, have {:?}",
                    i + 1,
                    f
                )));
            }
        }
        let target = ExponentVector::new(vec![-1; self.axes], vec![-1; self.axes]);
        Ok(e.terms
            .get(&target)
            .cloned()
            .unwrap_or_else(|| self.field.zero()))
    }

    /// Apply `ad(ln d_axis)` or `ad(ln x_axis)`.  On the acted axis the
    /// monomial rule is
    /// `ad(ln d)(x^c d^m) = sum_{k>=1} ((-1)^(k+1)/k) (c)_k x^(c-k) d^(m-k)`
    /// (terminates iff `c >= 0`) and
    /// `ad(ln x)(x^c d^m) = sum_{k>=1} ((-1)^k/k) (m)_k x^(c-k) d^(m-k)`
    /// (terminates iff `m >= 0`); other axes are untouched.  Values on the
    /// generators: ad(ln d)(x) = d^-1, ad(ln x)(d) = -x^-1.
    pub fn apply_log_derivation(
        &self,
        id: LogDerivationId,
        e: &PsiDOElement,
        requested: &Floor,
    ) -> Result<PsiDOElement> {
        assert!(id.axis >= 1 && id.axis <= self.axes, "axis out of range");
        let ax = id.axis - 1;
        let mut result_floor = floor_exact(self.axes);
        let infinite_present = e.terms.keys().any(|ev| match id.kind {
            LnKind::LnDelta => ev.x[ax] < 0,
            LnKind::LnX => ev.d[ax] < 0,
        });
        for i in 0..self.axes {
            // The derivation lowers the acted axis by at least one, so the
            // operand's unknown region contaminates one step lower there.
            let knowable = if i == ax { e.floor[i].plus(-1) } else { e.floor[i] };
            if requested[i] < knowable {
                return Err(AlgebraError::PrecisionInsufficient(format!(
                    "derivation value knowable only to {:?} on axis {}, requested {:?}",
                    knowable,
                    i + 1,
                    requested[i]
                )));
            }
            result_floor[i] = if i == ax && infinite_present {
                if !requested[i].is_finite() {
                    return Err(AlgebraError::PrecisionInsufficient(format!(
                        "exact derivation requested on axis {} but the series is infinite",
                        i + 1
                    )));
                }
                requested[i].max(knowable)
            } else {
                knowable
            };
        }

        let mut acc: BTreeMap<ExponentVector, Scalar> = BTreeMap::new();
        for (ev, c) in &e.terms {
            // (pivot)_k vanishes past k = pivot when pivot >= 0; otherwise
            // the series is infinite and the (finite) result floor bounds k.
            let pivot = match id.kind {
                LnKind::LnDelta => ev.x[ax],
                LnKind::LnX => ev.d[ax],
            };
            let k_max = if pivot >= 0 {
                pivot
            } else {
                match result_floor[ax] {
                    FloorVal::At(f) => ev.d[ax] - f,
                    FloorVal::NegInf => unreachable!("infinite series checked above"),
                }
            };
            // Truncation below a finite floor is sound even for terminating
            // series because lower terms are pruned from the result anyway.
            let k_max = match result_floor[ax] {
                FloorVal::At(f) => k_max.min(ev.d[ax] - f),
                FloorVal::NegInf => k_max,
            };
            for k in 1..=k_max {
                let series_coeff = match id.kind {
                    LnKind::LnDelta => {
                        let sign = if k % 2 == 1 { 1 } else { -1 };
                        self.field
                            .from_i64(sign)
                            .mul(&self.inv_small(k))
                            .mul(&self.falling(ev.x[ax], k))
                    }
                    LnKind::LnX => {
                        let sign = if k % 2 == 1 { -1 } else { 1 };
                        self.field
                            .from_i64(sign)
                            .mul(&self.inv_small(k))
                            .mul(&self.falling(ev.d[ax], k))
                    }
                };
                if series_coeff.is_zero() {
                    continue;
                }
                let mut out = ev.clone();
                out.x[ax] -= k;
                out.d[ax] -= k;
                let entry = acc.entry(out).or_insert_with(|| self.field.zero());
                *entry = entry.add(&c.mul(&series_coeff));
            }
        }
        acc.retain(|_, c| !c.is_zero());
        let mut out = PsiDOElement {
            terms: acc,
            floor: result_floor.clone(),
        };
        out.prune_to(&result_floor);
        Ok(out)
    }

    /// Like [`apply_log_derivation`](Self::apply_log_derivation) at the
    /// working floor, except the request relaxes to whatever the operand's
    /// own floor supports; mirrors [`mul_drifting`](Self::mul_drifting).
    /// A too-shallow result is caught later, when a trace demands `-1`.
    pub fn apply_log_derivation_drifting(
        &self,
        id: LogDerivationId,
        e: &PsiDOElement,
    ) -> Result<PsiDOElement> {
        let ax = id.axis - 1;
        let mut requested = self.work_floor.clone();
        for i in 0..self.axes {
            let knowable = if i == ax { e.floor[i].plus(-1) } else { e.floor[i] };
            requested[i] = requested[i].max(knowable);
        }
        self.apply_log_derivation(id, e, &requested)
    }

    /// The series `Q = sum_{m>=1} ((m-1)!/m) x^-m d^-m` on the given axis,
    /// truncated at the (finite) floor for that axis.  This is the element
    /// with `[ad(ln d), ad(ln x)] = ad(Q)`; cross-axis derivation pairs
    /// commute and have `Q = 0`.
    pub fn q_element(&self, axis: usize, floor: &Floor) -> PsiDOElement {
        let ax = axis - 1;
        let depth = match floor[ax] {
            FloorVal::At(f) => -f,
            FloorVal::NegInf => panic!("q_element needs a finite floor on its axis"),
        };
        let mut terms = BTreeMap::new();
        let mut factorial = self.field.one(); // (m-1)! running value
        for m in 1..=depth {
            if m > 1 {
                factorial = factorial.mul(&self.field.from_i64(m - 1));
            }
            let coeff = factorial.mul(&self.inv_small(m));
            let mut ev = ExponentVector::zeros(self.axes);
            ev.x[ax] = -m;
            ev.d[ax] = -m;
            terms.insert(ev, coeff);
        }
        let mut result_floor = floor_exact(self.axes);
        result_floor[ax] = floor[ax];
        PsiDOElement {
            terms,
            floor: result_floor,
        }
    }

    /// A floor deep enough that the residue of any product of operators
    /// matching `profiles` is exact: contraction only lowers `d`-exponents,
    /// and a factor can raise a partial product by at most its own maximal
    /// nonnegative `d`-degree, so losses below the returned floor can never
    /// climb back to the residue position.
    pub fn sufficient_floor(profiles: &[OperandProfile], axes: usize) -> Vec<i64> {
        (0..axes)
            .map(|i| {
                let raise: i64 = profiles.iter().map(|p| p.max_d[i].max(0)).sum();
                -1 - raise
            })
            .collect()
    }

    pub fn parse_element(&self, text: &str) -> Result<PsiDOElement> {
        let (body, floor_text) = match text.split_once("floor:") {
            Some((b, f)) => (b.trim(), Some(f.trim())),
            None => (text.trim(), None),
        };
        let floor = match floor_text {
            None | Some("exact") => floor_exact(self.axes),
            Some(spec) => {
                let mut floor = floor_exact(self.axes);
                for part in spec.split_whitespace() {
                    let (var, val) = part.split_once(">=").ok_or_else(|| {
                        AlgebraError::Parse(format!("bad floor component `{part}`"))
                    })?;
                    let axis: usize = var
                        .strip_prefix('d')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| AlgebraError::Parse(format!("bad floor axis `{var}`")))?;
                    if axis == 0 || axis > self.axes {
                        return Err(AlgebraError::Parse(format!("floor axis {axis} out of range")));
                    }
                    floor[axis - 1] = if val == "-inf" {
                        FloorVal::NegInf
                    } else {
                        FloorVal::At(val.parse().map_err(|_| {
                            AlgebraError::Parse(format!("bad floor value `{val}`"))
                        })?)
                    };
                }
                floor
            }
        };

        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens == ["0"] || tokens.is_empty() {
            let mut z = PsiDOElement::zero(self.axes);
            z.floor = floor;
            return Ok(z);
        }
        let mut list: Vec<(ExponentVector, Scalar)> = Vec::new();
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
            let mut ev = ExponentVector::zeros(self.axes);
            while pos < tokens.len() && tokens[pos] != "+" && tokens[pos] != "-" {
                let tok = tokens[pos];
                let (var, exp) = tok
                    .split_once('^')
                    .ok_or_else(|| AlgebraError::Parse(format!("bad factor `{tok}`")))?;
                let exp: i64 = exp
                    .parse()
                    .map_err(|_| AlgebraError::Parse(format!("bad exponent in `{tok}`")))?;
                let (kind, axis_s) = var.split_at(1);
                let axis: usize = axis_s
                    .parse()
                    .map_err(|_| AlgebraError::Parse(format!("bad axis in `{tok}`")))?;
                if axis == 0 || axis > self.axes {
                    return Err(AlgebraError::Parse(format!("axis {axis} out of range")));
                }
                match kind {
                    "x" => ev.x[axis - 1] += exp,
                    "d" => ev.d[axis - 1] += exp,
                    _ => return Err(AlgebraError::Parse(format!("unknown variable `{var}`"))),
                }
                pos += 1;
            }
            list.push((ev, coeff));
        }
        Ok(self.from_terms(list, floor))
    }
}

/// The canonical log-derivation family on a symbol algebra:
/// `D1 = ad(ln d1)`, `D2 = ad(ln x1)`, `D3 = ad(ln d2)`, ... with the full
/// Q-table: the pair on axis `a` gets the Lemma-1.1 series (truncated at the
/// work floor), every cross-axis pair commutes and gets zero.
pub fn log_family(algebra: &PsiDOAlgebra) -> DerivationFamily<'_, PsiDOAlgebra> {
    let l = 2 * algebra.axes;
    let mut handles: Vec<Box<dyn Fn(&PsiDOElement) -> Result<PsiDOElement> + Send + Sync + '_>> =
        Vec::new();
    for label in 1..=l {
        let id = LogDerivationId::from_label(label);
        handles.push(Box::new(move |e| {
            algebra.apply_log_derivation_drifting(id, e)
        }));
    }
    let mut family = DerivationFamily::new(handles);
    for i in 1..=l {
        for j in (i + 1)..=l {
            let di = LogDerivationId::from_label(i);
            let dj = LogDerivationId::from_label(j);
            let q = if di.axis == dj.axis {
                algebra.q_element(di.axis, &algebra.work_floor)
            } else {
                PsiDOElement::zero(algebra.axes)
            };
            family.set_q(algebra, i, j, q);
        }
    }
    family
}

/// Degree bounds of one product operand, used to compute sufficient floors.
#[derive(Clone, Debug)]
pub struct OperandProfile {
    pub max_x: Vec<i64>,
    pub max_d: Vec<i64>,
}

impl OperandProfile {
    pub fn of_element(e: &PsiDOElement) -> Self {
        let axes = e.axes();
        let mut max_x = vec![0i64; axes];
        let mut max_d = vec![0i64; axes];
        for ev in e.terms.keys() {
            for i in 0..axes {
                max_x[i] = max_x[i].max(ev.x[i]);
                max_d[i] = max_d[i].max(ev.d[i]);
            }
        }
        OperandProfile { max_x, max_d }
    }
}

impl TracedAlgebra for PsiDOAlgebra {
    type Elem = PsiDOElement;

    fn field(&self) -> FieldSpec {
        self.field
    }

    fn zero(&self) -> PsiDOElement {
        PsiDOElement::zero(self.axes)
    }

    fn one(&self) -> PsiDOElement {
        self.monomial(self.field.one(), vec![0; self.axes], vec![0; self.axes])
    }

    fn add(&self, a: &PsiDOElement, b: &PsiDOElement) -> PsiDOElement {
        self.add(a, b)
    }

    fn scale(&self, s: &Scalar, a: &PsiDOElement) -> PsiDOElement {
        self.scale(s, a)
    }

    fn mul(&self, a: &PsiDOElement, b: &PsiDOElement) -> Result<PsiDOElement> {
        self.mul_drifting(a, b)
    }

    fn trace(&self, a: &PsiDOElement) -> Result<Scalar> {
        self.trace(a)
    }

    fn is_zero(&self, a: &PsiDOElement) -> bool {
        // Empty above a floor too shallow to reach the residue line is not
        // zero: the unseen part could still contribute to a later trace.
        a.is_zero() && a.floor.iter().all(|f| f.admits(-1))
    }

    fn generators(&self) -> Vec<PsiDOElement> {
        (1..=self.axes)
            .flat_map(|a| [self.gen_x(a), self.gen_d(a)])
            .collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> PsiDOElement {
        let p = self.profile;
        let count = rng.gen_range(1..=p.max_terms);
        let mut list = Vec::with_capacity(count);
        for _ in 0..count {
            let x: Vec<i64> = (0..self.axes)
                .map(|_| rng.gen_range(p.x_range.0..=p.x_range.1))
                .collect();
            let d: Vec<i64> = (0..self.axes)
                .map(|_| rng.gen_range(p.d_range.0..=p.d_range.1))
                .collect();
            let mut c = 0;
            while c == 0 {
                c = rng.gen_range(p.coeff_range.0..=p.coeff_range.1);
            }
            list.push((ExponentVector::new(x, d), self.field.from_i64(c)));
        }
        self.from_terms(list, floor_exact(self.axes))
    }

    fn floor_description(&self) -> String {
        format_floor(&self.work_floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn alg1() -> PsiDOAlgebra {
        PsiDOAlgebra::new(1, FieldSpec::Rational, floor_uniform(1, -8))
    }

    fn rat(a: &PsiDOAlgebra, n: i64, d: i64) -> Scalar {
        a.field.from_ratio(n, d).unwrap()
    }

    #[test]
    fn compose_d_x_gives_leibniz() {
        let a = alg1();
        let d = ExponentVector::new(vec![0], vec![1]);
        let x = ExponentVector::new(vec![1], vec![0]);
        let r = a.mono_compose(&d, &x, &floor_exact(1));
        // d . x = x d + 1
        let expected = a.add(
            &a.monomial(a.field.one(), vec![1], vec![1]),
            &a.one(),
        );
        assert_eq!(r, expected);
        assert!(r.is_exact());
    }

    #[test]
    fn compose_dinv_x_terminates_exactly() {
        let a = alg1();
        let dinv = ExponentVector::new(vec![0], vec![-1]);
        let x = ExponentVector::new(vec![1], vec![0]);
        let r = a.mono_compose(&dinv, &x, &floor_exact(1));
        // d^-1 . x = x d^-1 - d^-2, exact.
        let expected = a.add(
            &a.monomial(a.field.one(), vec![1], vec![-1]),
            &a.monomial(a.field.from_i64(-1), vec![0], vec![-2]),
        );
        assert_eq!(r, expected);
        assert!(r.is_exact());
        // Oracle: left-compose with d and recover x.
        let back = a.mul(&a.gen_d(1), &r, &floor_exact(1)).unwrap();
        assert_eq!(back, a.gen_x(1));
    }

    #[test]
    fn compose_dinv_xinv_matches_factorial_series() {
        let a = alg1();
        let dinv = ExponentVector::new(vec![0], vec![-1]);
        let xinv = ExponentVector::new(vec![-1], vec![0]);
        let fl = floor_uniform(1, -3);
        let r = a.mono_compose(&dinv, &xinv, &fl);
        // d^-1 . x^-1 = x^-1 d^-1 + x^-2 d^-2 + 2 x^-3 d^-3 + ...
        let expected = a.from_terms(
            vec![
                (ExponentVector::new(vec![-1], vec![-1]), a.field.one()),
                (ExponentVector::new(vec![-2], vec![-2]), a.field.one()),
                (ExponentVector::new(vec![-3], vec![-3]), a.field.from_i64(2)),
            ],
            fl.clone(),
        );
        assert_eq!(r, expected);
        // Oracle: d . r . x recovers 1 above the floor.  Left-multiplying by
        // d costs one degree of depth, so start one deeper.
        let deep = a.mono_compose(&dinv, &xinv, &floor_uniform(1, -4));
        let dr = a.mul(&a.gen_d(1), &deep, &fl).unwrap();
        let drx = a.mul(&dr, &a.gen_x(1), &fl).unwrap();
        let one_trunc = a.one().truncated(&fl);
        assert_eq!(drx.terms, one_trunc.terms);
    }

    #[test]
    fn mul_requires_sufficient_floor() {
        let a = alg1();
        // Floored operand with positive d-degree partner: product below the
        // contamination bound must be refused.
        let q = a.q_element(1, &floor_uniform(1, -3));
        let d2 = a.monomial(a.field.one(), vec![0], vec![2]);
        // knowable = floor(q) + maxd(d2) = -3 + 2 = -1.
        assert!(a.mul(&q, &d2, &floor_uniform(1, -1)).is_ok());
        match a.mul(&q, &d2, &floor_uniform(1, -2)) {
            Err(AlgebraError::PrecisionInsufficient(_)) => {}
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    #[test]
    fn trace_reads_residue_and_checks_floor() {
        let a = alg1();
        let e = a.monomial(rat(&a, 5, 3), vec![-1], vec![-1]);
        assert_eq!(a.trace(&e).unwrap(), rat(&a, 5, 3));
        assert_eq!(a.trace(&a.gen_x(1)).unwrap(), a.field.zero());
        let mut shallow = a.gen_x(1);
        shallow.floor = floor_uniform(1, 0);
        assert!(matches!(
            a.trace(&shallow),
            Err(AlgebraError::PrecisionInsufficient(_))
        ));
    }

    #[test]
    fn log_derivation_generator_values() {
        let a = alg1();
        let lnd = LogDerivationId { axis: 1, kind: LnKind::LnDelta };
        let lnx = LogDerivationId { axis: 1, kind: LnKind::LnX };
        let fl = floor_exact(1);
        // ad(ln d)(x) = d^-1, ad(ln d)(d) = 0.
        assert_eq!(
            a.apply_log_derivation(lnd, &a.gen_x(1), &fl).unwrap(),
            a.monomial(a.field.one(), vec![0], vec![-1])
        );
        assert!(a.apply_log_derivation(lnd, &a.gen_d(1), &fl).unwrap().is_zero());
        // ad(ln x)(d) = -x^-1, ad(ln x)(x) = 0.
        assert_eq!(
            a.apply_log_derivation(lnx, &a.gen_d(1), &fl).unwrap(),
            a.monomial(a.field.from_i64(-1), vec![-1], vec![0])
        );
        assert!(a.apply_log_derivation(lnx, &a.gen_x(1), &fl).unwrap().is_zero());
    }

    #[test]
    fn log_derivation_on_x_squared() {
        let a = alg1();
        let lnd = LogDerivationId { axis: 1, kind: LnKind::LnDelta };
        let x2 = a.monomial(a.field.one(), vec![2], vec![0]);
        // ad(ln d)(x^2) = 2 x d^-1 - d^-2 (Leibniz oracle).
        let got = a.apply_log_derivation(lnd, &x2, &floor_exact(1)).unwrap();
        let expected = a.from_terms(
            vec![
                (ExponentVector::new(vec![1], vec![-1]), a.field.from_i64(2)),
                (ExponentVector::new(vec![0], vec![-2]), a.field.from_i64(-1)),
            ],
            floor_exact(1),
        );
        assert_eq!(got, expected);
        // Cross-check against Leibniz: D(x.x) = D(x).x + x.D(x).
        let dx = a.apply_log_derivation(lnd, &a.gen_x(1), &floor_exact(1)).unwrap();
        let leibniz = a.add(
            &a.mul(&dx, &a.gen_x(1), &floor_exact(1)).unwrap(),
            &a.mul(&a.gen_x(1), &dx, &floor_exact(1)).unwrap(),
        );
        assert_eq!(got, leibniz);
    }

    #[test]
    fn inverse_rule_is_consistent() {
        // D(x . x^-1) = D(x) . x^-1 + x . D(x^-1) must vanish identically.
        let a = alg1();
        let deep = floor_uniform(1, -8);
        let fl = floor_uniform(1, -6);
        let x = a.gen_x(1);
        let xinv = a.monomial(a.field.one(), vec![-1], vec![0]);
        let d = a.gen_d(1);
        let dinv = a.monomial(a.field.one(), vec![0], vec![-1]);
        for kind in [LnKind::LnDelta, LnKind::LnX] {
            let id = LogDerivationId { axis: 1, kind };
            for (g, ginv) in [(&x, &xinv), (&d, &dinv)] {
                let dg = a.apply_log_derivation(id, g, &deep).unwrap();
                let dginv = a.apply_log_derivation(id, ginv, &deep).unwrap();
                let sum = a.add(
                    &a.mul(&dg, ginv, &fl).unwrap(),
                    &a.mul(g, &dginv, &fl).unwrap(),
                );
                assert!(sum.is_zero(), "D({g:?} . inverse) != 0 for {kind:?}: {sum}");
            }
        }
    }

    #[test]
    fn q_series_coefficients_to_depth_8() {
        let a = alg1();
        let q = a.q_element(1, &floor_uniform(1, -8));
        // (m-1)!/m for m = 1..8.
        let mut factorial = 1i64;
        for m in 1i64..=8 {
            if m > 1 {
                factorial *= m - 1;
            }
            let ev = ExponentVector::new(vec![-m], vec![-m]);
            assert_eq!(q.terms.get(&ev).unwrap(), &rat(&a, factorial, m), "depth {m}");
        }
        assert_eq!(q.terms.len(), 8);
    }

    #[test]
    fn q_bracket_matches_derivation_commutator() {
        let a = alg1();
        let deep = floor_uniform(1, -9);
        let fl = floor_uniform(1, -8);
        let q = a.q_element(1, &deep);
        let d1 = LogDerivationId { axis: 1, kind: LnKind::LnDelta };
        let d2 = LogDerivationId { axis: 1, kind: LnKind::LnX };
        for g in [a.gen_x(1), a.gen_d(1)] {
            let lhs = a.bracket(&q, &g, &fl).unwrap();
            let d2g = a.apply_log_derivation(d2, &g, &deep).unwrap();
            let d1g = a.apply_log_derivation(d1, &g, &deep).unwrap();
            let rhs = a.add(
                &a.apply_log_derivation(d1, &d2g, &fl).unwrap(),
                &a.scale(
                    &a.field.from_i64(-1),
                    &a.apply_log_derivation(d2, &d1g, &fl).unwrap(),
                ),
            );
            let diff = a.add(&lhs, &a.scale(&a.field.from_i64(-1), &rhs));
            assert!(diff.is_zero(), "ad(Q) != [D1,D2] on {g}: {diff}");
        }
    }

    #[test]
    fn sufficient_floor_deepen_and_compare() {
        let a = PsiDOAlgebra::new(1, FieldSpec::Rational, floor_uniform(1, -12));
        let f1 = a.from_terms(
            vec![(ExponentVector::new(vec![1], vec![-1]), a.field.one())],
            floor_exact(1),
        );
        let f2 = a.from_terms(
            vec![(ExponentVector::new(vec![-2], vec![-1]), a.field.one())],
            floor_exact(1),
        );
        let profiles = [OperandProfile::of_element(&f1), OperandProfile::of_element(&f2)];
        let bound = PsiDOAlgebra::sufficient_floor(&profiles, 1);
        let at_bound = a
            .trace(&a.mul(&f1, &f2, &floor_at(&bound)).unwrap())
            .unwrap();
        let deeper: Vec<i64> = bound.iter().map(|b| b - 3).collect();
        let at_deeper = a
            .trace(&a.mul(&f1, &f2, &floor_at(&deeper)).unwrap())
            .unwrap();
        assert_eq!(at_bound, at_deeper);
    }

    #[test]
    fn serialization_round_trips_examples() {
        let a = PsiDOAlgebra::new(2, FieldSpec::Rational, floor_uniform(2, -4));
        let e = a.from_terms(
            vec![
                (ExponentVector::new(vec![-3, 0], vec![-3, 1]), rat(&a, 2, 3)),
                (ExponentVector::new(vec![0, 0], vec![0, 0]), rat(&a, -1, 2)),
            ],
            vec![FloorVal::At(-3), FloorVal::NegInf],
        );
        let text = e.to_text();
        let back = a.parse_element(&text).unwrap();
        assert_eq!(e, back);
        assert!(text.contains("floor: d1>=-3 d2>=-inf"), "got: {text}");

        let z = PsiDOElement::zero(2);
        assert_eq!(a.parse_element(&z.to_text()).unwrap(), z);
    }

    fn arb_monomial(axes: usize) -> impl Strategy<Value = (Vec<i64>, Vec<i64>, i64)> {
        (
            proptest::collection::vec(-2i64..=2, axes),
            proptest::collection::vec(-2i64..=2, axes),
            (1i64..=4),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Associativity above the floor; the inner product is taken deeper
        // because the outer factor can raise degrees by its max d-degree.
        #[test]
        fn mul_is_associative((x1, d1, c1) in arb_monomial(1), (x2, d2, c2) in arb_monomial(1), (x3, d3, c3) in arb_monomial(1)) {
            let a = PsiDOAlgebra::new(1, FieldSpec::Rational, floor_uniform(1, -9));
            let deep = floor_uniform(1, -12);
            let fl = floor_uniform(1, -9);
            let e1 = a.monomial(a.field.from_i64(c1), x1, d1);
            let e2 = a.monomial(a.field.from_i64(c2), x2, d2);
            let e3 = a.monomial(a.field.from_i64(c3), x3, d3);
            let left = a.mul(&a.mul(&e1, &e2, &deep).unwrap(), &e3, &fl).unwrap();
            let right = a.mul(&e1, &a.mul(&e2, &e3, &deep).unwrap(), &fl).unwrap();
            let common: Floor = left.floor.iter().zip(&right.floor).map(|(p, q)| (*p).max(*q)).collect();
            prop_assert_eq!(left.truncated(&common), right.truncated(&common));
        }

        // The trace kills brackets whenever it is defined.
        #[test]
        fn trace_kills_brackets((x1, d1, c1) in arb_monomial(1), (x2, d2, c2) in arb_monomial(1)) {
            let a = PsiDOAlgebra::new(1, FieldSpec::Rational, floor_uniform(1, -9));
            let e1 = a.monomial(a.field.from_i64(c1), x1, d1);
            let e2 = a.monomial(a.field.from_i64(c2), x2, d2);
            let br = a.bracket(&e1, &e2, &floor_uniform(1, -9)).unwrap();
            prop_assert!(a.trace(&br).unwrap().is_zero());
        }

        // Leibniz rule for all four derivation kinds on two axes.
        #[test]
        fn derivations_satisfy_leibniz((x1, d1, c1) in arb_monomial(2), (x2, d2, c2) in arb_monomial(2), label in 1usize..=4) {
            let a = PsiDOAlgebra::new(2, FieldSpec::Rational, floor_uniform(2, -10));
            let deep = floor_uniform(2, -13);
            let fl = floor_uniform(2, -10);
            let id = LogDerivationId::from_label(label);
            let e1 = a.monomial(a.field.from_i64(c1), x1, d1);
            let e2 = a.monomial(a.field.from_i64(c2), x2, d2);
            let lhs = a.apply_log_derivation(id, &a.mul(&e1, &e2, &deep).unwrap(), &fl).unwrap();
            let rhs = a.add(
                &a.mul(&a.apply_log_derivation(id, &e1, &deep).unwrap(), &e2, &fl).unwrap(),
                &a.mul(&e1, &a.apply_log_derivation(id, &e2, &deep).unwrap(), &fl).unwrap(),
            );
            let common: Floor = lhs.floor.iter().zip(&rhs.floor).map(|(p, q)| (*p).max(*q)).collect();
            prop_assert_eq!(lhs.truncated(&common), rhs.truncated(&common));
        }

        // Jacobi identity above the floor.
        #[test]
        fn bracket_satisfies_jacobi((x1, d1, c1) in arb_monomial(1), (x2, d2, c2) in arb_monomial(1), (x3, d3, c3) in arb_monomial(1)) {
            let a = PsiDOAlgebra::new(1, FieldSpec::Rational, floor_uniform(1, -9));
            let deep = floor_uniform(1, -12);
            let fl = floor_uniform(1, -9);
            let e1 = a.monomial(a.field.from_i64(c1), x1, d1);
            let e2 = a.monomial(a.field.from_i64(c2), x2, d2);
            let e3 = a.monomial(a.field.from_i64(c3), x3, d3);
            let t1 = a.bracket(&e1, &a.bracket(&e2, &e3, &deep).unwrap(), &fl).unwrap();
            let t2 = a.bracket(&e2, &a.bracket(&e3, &e1, &deep).unwrap(), &fl).unwrap();
            let t3 = a.bracket(&e3, &a.bracket(&e1, &e2, &deep).unwrap(), &fl).unwrap();
            let sum = a.add(&a.add(&t1, &t2), &t3);
            prop_assert!(sum.is_zero(), "jacobi fails: {}", sum);
        }

        // Round-trip of the text form on sampled elements.
        #[test]
        fn text_round_trip(seed in 0u64..1000) {
            let a = PsiDOAlgebra::new(2, FieldSpec::Rational, floor_uniform(2, -5));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = a.sample(&mut rng);
            prop_assert_eq!(a.parse_element(&e.to_text()).unwrap(), e);
        }

        // Rational result reduces to the mod-p result of reduced inputs.
        #[test]
        fn mul_commutes_with_reduction((x1, d1, c1) in arb_monomial(1), (x2, d2, c2) in arb_monomial(1)) {
            let p = 2_147_483_659u64;
            let fl = floor_uniform(1, -6);
            let ra = PsiDOAlgebra::new(1, FieldSpec::Rational, fl.clone());
            let pa = PsiDOAlgebra::new(1, FieldSpec::Prime(p), fl.clone());
            let e1 = ra.monomial(ra.field.from_i64(c1), x1.clone(), d1.clone());
            let e2 = ra.monomial(ra.field.from_i64(c2), x2.clone(), d2.clone());
            let m1 = pa.monomial(pa.field.from_i64(c1), x1, d1);
            let m2 = pa.monomial(pa.field.from_i64(c2), x2, d2);
            let prod_r = ra.mul(&e1, &e2, &fl).unwrap();
            let prod_p = pa.mul(&m1, &m2, &fl).unwrap();
            let reduced: BTreeMap<_, _> = prod_r
                .terms
                .iter()
                .map(|(ev, c)| (ev.clone(), c.reduce_mod(p).unwrap()))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            prop_assert_eq!(reduced, prod_p.terms);
        }
    }
}
