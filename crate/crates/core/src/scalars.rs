//! Exact coefficient arithmetic.
//!
//! Every quantity the engine computes is a [`Scalar`]: either an
//! arbitrary-precision rational or a residue in a prime field chosen at suite
//! start.  Prime-field mode exists for speed (polynomial identity testing);
//! the reduction map from the rationals is a ring homomorphism wherever the
//! denominator is invertible, so any identity verified over the rationals
//! must also hold mod p on the same inputs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::framework::{AlgebraError, Result};

/// Coefficient field active for a whole computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSpec {
    Rational,
    /// Integers mod `p`; `p` must be prime (checked at construction sites).
    Prime(u64),
}

impl FieldSpec {
    pub fn zero(&self) -> Scalar {
        match self {
            FieldSpec::Rational => Scalar::Rat(BigRational::zero()),
            FieldSpec::Prime(p) => Scalar::Mod { v: 0, p: *p },
        }
    }

    pub fn one(&self) -> Scalar {
        match self {
            FieldSpec::Rational => Scalar::Rat(BigRational::one()),
            FieldSpec::Prime(p) => Scalar::Mod { v: 1, p: *p },
        }
    }

    pub fn from_i64(&self, v: i64) -> Scalar {
        match self {
            FieldSpec::Rational => Scalar::Rat(BigRational::from_integer(BigInt::from(v))),
            FieldSpec::Prime(p) => Scalar::Mod {
                v: (v.rem_euclid(*p as i64)) as u64,
                p: *p,
            },
        }
    }

    /// Exact `num/den` in this field.  Fails in prime-field mode when `den`
    /// reduces to zero.
    pub fn from_ratio(&self, num: i64, den: i64) -> Result<Scalar> {
        if den == 0 {
            return Err(AlgebraError::NonInvertible("zero denominator".into()));
        }
        match self {
            FieldSpec::Rational => Ok(Scalar::Rat(BigRational::new(
                BigInt::from(num),
                BigInt::from(den),
            ))),
            FieldSpec::Prime(_) => {
                let n = self.from_i64(num);
                let d = self.from_i64(den);
                Ok(n.mul(&d.inv()?))
            }
        }
    }

    /// Parse a coefficient in this field: `a` or `a/b` with optional sign.
    pub fn parse_scalar(&self, text: &str) -> Result<Scalar> {
        let text = text.trim();
        let (num_s, den_s) = match text.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (text, None),
        };
        let num: BigInt = num_s
            .parse()
            .map_err(|_| AlgebraError::Parse(format!("bad numerator `{num_s}`")))?;
        let den: BigInt = match den_s {
            Some(d) => d
                .parse()
                .map_err(|_| AlgebraError::Parse(format!("bad denominator `{d}`")))?,
            None => BigInt::one(),
        };
        if den.is_zero() {
            return Err(AlgebraError::Parse("zero denominator".into()));
        }
        let rat = Scalar::Rat(BigRational::new(num, den));
        match self {
            FieldSpec::Rational => Ok(rat),
            FieldSpec::Prime(p) => rat.reduce_mod(*p),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FieldSpec::Rational => "rational".into(),
            FieldSpec::Prime(p) => format!("mod:{p}"),
        }
    }
}

/// An exact field element.  All arithmetic is total within one field; mixing
/// fields is a programming error and panics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scalar {
    Rat(BigRational),
    Mod { v: u64, p: u64 },
}

impl Scalar {
    pub fn field(&self) -> FieldSpec {
        match self {
            Scalar::Rat(_) => FieldSpec::Rational,
            Scalar::Mod { p, .. } => FieldSpec::Prime(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rat(r) => r.is_zero(),
            Scalar::Mod { v, .. } => *v == 0,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Rat(a), Scalar::Rat(b)) => Scalar::Rat(a + b),
            (Scalar::Mod { v: a, p }, Scalar::Mod { v: b, p: q }) if p == q => Scalar::Mod {
                v: (a + b) % p,
                p: *p,
            },
            _ => panic!("scalar field mismatch in add"),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Rat(a), Scalar::Rat(b)) => Scalar::Rat(a * b),
            (Scalar::Mod { v: a, p }, Scalar::Mod { v: b, p: q }) if p == q => Scalar::Mod {
                v: ((*a as u128 * *b as u128) % *p as u128) as u64,
                p: *p,
            },
            _ => panic!("scalar field mismatch in mul"),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Rat(a) => Scalar::Rat(-a),
            Scalar::Mod { v, p } => Scalar::Mod {
                v: if *v == 0 { 0 } else { p - v },
                p: *p,
            },
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        match self {
            Scalar::Rat(a) => {
                if a.is_zero() {
                    Err(AlgebraError::NonInvertible("1/0 over the rationals".into()))
                } else {
                    Ok(Scalar::Rat(a.recip()))
                }
            }
            Scalar::Mod { v, p } => {
                if *v == 0 {
                    Err(AlgebraError::NonInvertible(format!("1/0 mod {p}")))
                } else {
                    Ok(Scalar::Mod {
                        v: pow_mod(*v, p - 2, *p),
                        p: *p,
                    })
                }
            }
        }
    }

    /// Ring-homomorphic reduction of a rational into F_p.  Defined iff the
    /// denominator is invertible mod p.
    pub fn reduce_mod(&self, p: u64) -> Result<Scalar> {
        match self {
            Scalar::Rat(r) => {
                let num = bigint_mod(r.numer(), p);
                let den = bigint_mod(r.denom(), p);
                if den == 0 {
                    return Err(AlgebraError::NonInvertible(format!(
                        "denominator {} not invertible mod {p}",
                        r.denom()
                    )));
                }
                Ok(Scalar::Mod {
                    v: ((num as u128 * pow_mod(den, p - 2, p) as u128) % p as u128) as u64,
                    p,
                })
            }
            Scalar::Mod { p: q, .. } if *q == p => Ok(self.clone()),
            Scalar::Mod { p: q, .. } => Err(AlgebraError::FieldMismatch(format!(
                "cannot reduce mod-{q} value mod {p}"
            ))),
        }
    }

    /// The value as an `i64` if it is an integer that fits (rationals only).
    pub fn to_integer(&self) -> Option<i64> {
        match self {
            Scalar::Rat(r) if r.is_integer() => r.numer().to_i64(),
            _ => None,
        }
    }
}

impl std::fmt::Display for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scalar::Rat(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Mod { v, .. } => write!(f, "{v}"),
        }
    }
}

fn bigint_mod(v: &BigInt, p: u64) -> u64 {
    let m = v % BigInt::from(p);
    let m = if m.is_negative() { m + BigInt::from(p) } else { m };
    m.to_u64().expect("residue fits u64")
}

fn pow_mod(base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc: u128 = 1;
    let mut b: u128 = base as u128 % p as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % p as u128;
        }
        b = b * b % p as u128;
        exp >>= 1;
    }
    acc as u64
}

/// Deterministic Miller-Rabin, valid for all u64 with this witness set.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == small {
            return true;
        }
        if n % small == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Random prime in [2^31, 2^32), drawn deterministically from `rng`.
/// Large enough that every factorial or 1/k coefficient the calculus
/// produces at desk scale stays invertible.
pub fn random_prime(rng: &mut impl Rng) -> u64 {
    loop {
        let candidate = rng.gen_range((1u64 << 31)..(1u64 << 32)) | 1;
        if is_prime_u64(candidate) {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rational_arithmetic_is_exact() {
        let f = FieldSpec::Rational;
        let a = f.from_ratio(2, 3).unwrap();
        let b = f.from_ratio(-1, 6).unwrap();
        assert_eq!(a.add(&b), f.from_ratio(1, 2).unwrap());
        assert_eq!(a.mul(&b), f.from_ratio(-1, 9).unwrap());
        assert_eq!(a.inv().unwrap(), f.from_ratio(3, 2).unwrap());
        assert_eq!(a.to_string(), "2/3");
        assert_eq!(f.from_i64(-4).to_string(), "-4");
    }

    #[test]
    fn prime_field_matches_hand_values() {
        let f = FieldSpec::Prime(101);
        let a = f.from_i64(-1);
        assert_eq!(a, f.from_i64(100));
        let half = f.from_ratio(1, 2).unwrap();
        assert_eq!(half.add(&half), f.one());
        assert!(f.from_ratio(1, 101).is_err());
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        let slow = |n: u64| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..2000 {
            assert_eq!(is_prime_u64(n), slow(n), "disagree at {n}");
        }
        assert!(is_prime_u64(2_147_483_659)); // first prime above 2^31
        assert!(!is_prime_u64(2_147_483_661));
    }

    #[test]
    fn random_prime_is_deterministic_and_in_range() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let p1 = random_prime(&mut rng1);
        let p2 = random_prime(&mut rng2);
        assert_eq!(p1, p2);
        assert!(p1 >= (1 << 31) && p1 < (1 << 32));
        assert!(is_prime_u64(p1));
    }

    #[test]
    fn parse_round_trips() {
        let f = FieldSpec::Rational;
        for s in ["2/3", "-7", "0", "-22/7"] {
            let v = f.parse_scalar(s).unwrap();
            assert_eq!(v.to_string(), s);
        }
        let g = FieldSpec::Prime(101);
        let v = g.parse_scalar("-1/2").unwrap();
        assert_eq!(v, g.from_ratio(-1, 2).unwrap());
    }

    proptest! {
        // Reduction mod p is a ring homomorphism wherever defined.
        #[test]
        fn reduction_is_homomorphic(an in -40i64..40, ad in 1i64..20, bn in -40i64..40, bd in 1i64..20) {
            let p = 2_147_483_659u64;
            let f = FieldSpec::Rational;
            let a = f.from_ratio(an, ad).unwrap();
            let b = f.from_ratio(bn, bd).unwrap();
            let ra = a.reduce_mod(p).unwrap();
            let rb = b.reduce_mod(p).unwrap();
            prop_assert_eq!(a.add(&b).reduce_mod(p).unwrap(), ra.add(&rb));
            prop_assert_eq!(a.mul(&b).reduce_mod(p).unwrap(), ra.mul(&rb));
        }

        #[test]
        fn prime_field_inverse_is_correct(v in 1u64..100_000) {
            let p = 2_147_483_659u64;
            let x = Scalar::Mod { v, p };
            prop_assert_eq!(x.mul(&x.inv().unwrap()), Scalar::Mod { v: 1, p });
        }
    }
}
