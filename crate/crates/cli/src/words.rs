//! Trace-word tables for the lemma-3.2-3.4 and eq-16 suites.
//!
//! Each entry is an alternating trace word over a four-derivation family
//! with the axis-2 pair element written `Q43` (and `Q21` for the axis-1
//! pair).  The rearrangement identities state that the differential of a
//! five-argument word, evaluated with the extra argument rotated to the
//! front, equals a six-argument word; the vanishing words are traces of a
//! derivation applied to a full product, which the trace kills termwise.

use tracelift_core::cohomology::{AltWord, LabelAlt, WFactor};
use tracelift_core::scalars::{FieldSpec, Scalar};

fn a(slot: usize) -> WFactor {
    WFactor::Arg(slot)
}

fn da(label: usize, slot: usize) -> WFactor {
    WFactor::DArg(label, slot)
}

fn q43() -> WFactor {
    WFactor::Q(4, 3)
}

fn q21() -> WFactor {
    WFactor::Q(2, 1)
}

fn comm(f: WFactor, g: WFactor) -> WFactor {
    WFactor::Commutator(Box::new(f), Box::new(g))
}

fn dprod(label: usize, inner: Vec<WFactor>) -> WFactor {
    WFactor::DProduct(label, inner)
}

fn alt_two(labels: Vec<usize>) -> LabelAlt {
    LabelAlt::Permute {
        labels,
        relabel_q: false,
    }
}

fn word(arity: usize, label_alt: LabelAlt, terms: Vec<(Scalar, Vec<WFactor>)>) -> AltWord {
    AltWord {
        arity,
        label_alt,
        terms,
    }
}

/// One rearrangement identity: `d(lhs)(A_m+1, A_1..A_m) = rhs`, up to the
/// measured differential-convention constant.
pub struct IdentityPair {
    pub name: &'static str,
    pub lhs: AltWord,
    pub rhs: AltWord,
}

/// The nine five-to-six-argument rearrangement identities, in suite order.
/// The first (`lemma-3.4-i`, the all-derivation word) doubles as the
/// benchmark on which the convention constant is solved.
pub fn rearrangement_identities(field: FieldSpec) -> Vec<IdentityPair> {
    let one = || field.one();
    let minus = || field.from_i64(-1);
    let mut out = Vec::new();

    out.push(IdentityPair {
        name: "lemma-3.4-i",
        lhs: word(
            5,
            alt_two(vec![1, 2, 3, 4]),
            vec![(one(), vec![da(1, 1), da(2, 2), da(3, 3), da(4, 4), a(5)])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2, 3, 4]),
            vec![(
                one(),
                vec![da(1, 1), da(2, 2), da(3, 3), da(4, 4), a(5), a(6)],
            )],
        ),
    });

    out.push(IdentityPair {
        name: "lemma-3.2-i",
        lhs: word(
            5,
            alt_two(vec![1, 2]),
            vec![(one(), vec![da(1, 1), a(2), a(3), da(2, 4), q43(), a(5)])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2]),
            vec![(
                one(),
                vec![da(1, 1), a(2), a(3), da(2, 6), a(4), q43(), a(5)],
            )],
        ),
    });

    out.push(IdentityPair {
        name: "lemma-3.2-ii",
        lhs: word(
            5,
            alt_two(vec![1, 2]),
            vec![(one(), vec![da(1, 1), da(2, 2), a(3), a(4), q43(), a(5)])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2]),
            vec![(
                one(),
                vec![da(1, 1), da(2, 6), a(2), a(3), a(4), q43(), a(5)],
            )],
        ),
    });

    // Same left side as ii; the insertion lands after the pair element
    // instead of after the first derivation factor.
    out.push(IdentityPair {
        name: "lemma-3.2-iii",
        lhs: word(
            5,
            alt_two(vec![1, 2]),
            vec![(one(), vec![da(1, 1), da(2, 2), a(3), a(4), q43(), a(5)])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2]),
            vec![(
                one(),
                vec![da(1, 1), da(2, 2), a(3), q43(), a(6), a(4), a(5)],
            )],
        ),
    });

    out.push(IdentityPair {
        name: "lemma-3.3-i",
        lhs: word(
            5,
            alt_two(vec![1, 2]),
            vec![(one(), vec![da(1, 1), a(2), a(3), a(4), da(2, 5), q43()])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2]),
            vec![
                (
                    one(),
                    vec![da(1, 6), a(1), a(2), a(3), a(4), da(2, 5), q43()],
                ),
                (
                    minus(),
                    vec![da(1, 1), a(2), a(3), a(4), da(2, 5), comm(a(6), q43())],
                ),
            ],
        ),
    });

    out.push(IdentityPair {
        name: "lemma-3.3-ii",
        lhs: word(
            5,
            alt_two(vec![1, 2]),
            vec![(one(), vec![da(1, 1), a(2), da(2, 3), a(4), a(5), q43()])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2]),
            vec![
                (
                    one(),
                    vec![da(1, 6), a(1), a(2), da(2, 3), a(4), a(5), q43()],
                ),
                (
                    minus(),
                    vec![da(1, 1), a(2), da(2, 3), a(4), a(5), comm(a(6), q43())],
                ),
            ],
        ),
    });

    out.push(IdentityPair {
        name: "lemma-3.3-iii",
        lhs: word(
            5,
            alt_two(vec![1, 2]),
            vec![(one(), vec![da(1, 1), a(2), da(2, 3), q43(), a(4), a(5)])],
        ),
        rhs: word(
            6,
            alt_two(vec![1, 2]),
            vec![
                (
                    one(),
                    vec![da(1, 6), a(1), a(2), da(2, 3), q43(), a(4), a(5)],
                ),
                (
                    minus(),
                    vec![da(1, 1), a(2), da(2, 3), comm(a(6), q43()), a(4), a(5)],
                ),
            ],
        ),
    });

    // The double-pair words carry no free derivation slot, so the label
    // alternation is trivial and both elements stay fixed.
    out.push(IdentityPair {
        name: "lemma-3.4-ii",
        lhs: word(
            5,
            LabelAlt::None,
            vec![(
                one(),
                vec![q21(), q43(), a(1), a(2), a(3), a(4), a(5)],
            )],
        ),
        rhs: word(
            6,
            LabelAlt::None,
            vec![(
                minus(),
                vec![q21(), q43(), a(1), a(2), a(3), a(4), a(5), a(6)],
            )],
        ),
    });

    out.push(IdentityPair {
        name: "lemma-3.4-iii",
        lhs: word(
            5,
            LabelAlt::None,
            vec![(
                one(),
                vec![q21(), a(1), q43(), a(2), a(3), a(4), a(5)],
            )],
        ),
        rhs: word(
            6,
            LabelAlt::None,
            vec![(
                one(),
                vec![q21(), a(6), a(1), q43(), a(2), a(3), a(4), a(5)],
            )],
        ),
    });

    out
}

/// The seven six-argument words that vanish identically because every
/// summand is the trace of a derivation of a full product, in the order
/// matched by [`combination_weights`].
pub fn vanishing_words(field: FieldSpec) -> Vec<(&'static str, AltWord)> {
    let c = |v: i64| field.from_i64(v);
    let labels = || alt_two(vec![1, 2, 3, 4]);
    vec![
        (
            "E1",
            word(
                6,
                labels(),
                vec![
                    (
                        c(2),
                        vec![dprod(
                            2,
                            vec![q43(), da(1, 1), a(2), a(3), a(4), a(5), a(6)],
                        )],
                    ),
                    (
                        c(2),
                        vec![dprod(
                            2,
                            vec![da(1, 1), q43(), a(2), a(3), a(4), a(5), a(6)],
                        )],
                    ),
                ],
            ),
        ),
        (
            "E2",
            word(
                6,
                labels(),
                vec![
                    (
                        c(1),
                        vec![dprod(
                            2,
                            vec![da(1, 1), a(2), a(3), q43(), a(4), a(5), a(6)],
                        )],
                    ),
                    (
                        c(1),
                        vec![dprod(
                            2,
                            vec![da(1, 1), a(2), a(3), a(4), q43(), a(5), a(6)],
                        )],
                    ),
                ],
            ),
        ),
        (
            "E3",
            word(
                6,
                labels(),
                vec![(
                    c(1),
                    vec![dprod(
                        4,
                        vec![da(1, 1), a(2), a(3), a(4), q43(), a(5), a(6)],
                    )],
                )],
            ),
        ),
        (
            "I",
            word(
                6,
                labels(),
                vec![(
                    c(1),
                    vec![dprod(
                        2,
                        vec![
                            da(1, 1),
                            a(2),
                            a(3),
                            a(4),
                            dprod(4, vec![a(6), da(3, 5)]),
                        ],
                    )],
                )],
            ),
        ),
        (
            "II",
            word(
                6,
                labels(),
                vec![(
                    c(1),
                    vec![dprod(
                        2,
                        vec![
                            a(3),
                            a(4),
                            da(1, 1),
                            a(2),
                            dprod(4, vec![a(6), da(3, 5)]),
                        ],
                    )],
                )],
            ),
        ),
        (
            "III",
            word(
                6,
                labels(),
                vec![(
                    c(1),
                    vec![dprod(
                        2,
                        vec![
                            a(2),
                            a(3),
                            a(4),
                            da(1, 1),
                            dprod(4, vec![da(3, 5), a(6)]),
                        ],
                    )],
                )],
            ),
        ),
        (
            "IV",
            word(
                6,
                labels(),
                vec![(
                    c(1),
                    vec![dprod(
                        2,
                        vec![
                            a(4),
                            da(1, 1),
                            a(2),
                            a(3),
                            dprod(4, vec![da(3, 5), a(6)]),
                        ],
                    )],
                )],
            ),
        ),
    ]
}

/// Weights of the displayed combination `E1 - E2 + 4/3 E3 - I + II - III
/// + IV`; the 4/3 is replayed as written, not re-derived.
pub fn combination_weights(field: FieldSpec) -> Vec<Scalar> {
    vec![
        field.one(),
        field.from_i64(-1),
        field.from_ratio(4, 3).expect("field characteristic is not 3"),
        field.from_i64(-1),
        field.one(),
        field.from_i64(-1),
        field.one(),
    ]
}

/// The nine-term five-argument primitive whose differential the displayed
/// combination equals.  `relabel_q` selects whether the label alternation
/// rewrites the pair-element indices (with the matching coset divisor) or
/// leaves them fixed.
pub fn five_argument_primitive(field: FieldSpec, relabel_q: bool) -> AltWord {
    let c = |v: i64| field.from_i64(v);
    word(
        5,
        LabelAlt::Permute {
            labels: vec![1, 2, 3, 4],
            relabel_q,
        },
        vec![
            (
                c(-2),
                vec![da(1, 1), da(2, 2), da(3, 3), da(4, 4), a(5)],
            ),
            (
                c(1),
                vec![da(1, 1), da(2, 2), q43(), a(3), a(4), a(5)],
            ),
            (
                c(1),
                vec![da(1, 1), da(2, 2), a(3), a(4), a(5), q43()],
            ),
            (
                c(2),
                vec![da(1, 1), q43(), da(2, 2), a(3), a(4), a(5)],
            ),
            (
                c(-1),
                vec![da(1, 1), a(2), da(2, 3), q43(), a(4), a(5)],
            ),
            (
                c(-1),
                vec![da(1, 1), a(2), da(2, 3), a(4), a(5), q43()],
            ),
            (
                c(-4),
                vec![q21(), q43(), a(1), a(2), a(3), a(4), a(5)],
            ),
            (
                c(2),
                vec![q21(), a(1), a(2), q43(), a(3), a(4), a(5)],
            ),
            (
                c(-2),
                vec![
                    comm(q21(), a(1)),
                    comm(q43(), a(2)),
                    a(3),
                    a(4),
                    a(5),
                ],
            ),
        ],
    )
}
