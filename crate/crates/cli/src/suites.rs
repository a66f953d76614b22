//! The verification suites behind `tracelift verify <suite>`.
//!
//! Every suite turns into a list of [`CheckReport`]s; rendering and exit
//! codes live in the library root.  All randomness flows through
//! seed-and-salt streams so a rerun reproduces every witness.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use tracelift_core::cohomology::{
    alt_word_evaluate, ce_differential, chain_is_cycle, is_cocycle, verify_identity, word_cochain,
    Cochain, DerivationChain,
};
use tracelift_core::framework::{
    check_derivation_conditions, check_trace_property, AlgebraError, DerivationFamily, Handle,
    Result, TracedAlgebra,
};
use tracelift_core::lifting::{
    builtin_formula, evaluate, formula_cochain, generate_lifting_formula, inner_derivation_family,
    inner_expansion_check, lemma22_cocycle, parse_formula, LabelMode,
};
use tracelift_core::matrix::{CurrentAlgebra, CurrentElement, MatrixAlgebra, MatrixElement};
use tracelift_core::poisson::{LaurentPoly, PoissonAlgebra, PoissonSampleProfile};
use tracelift_core::psido::{
    floor_at, floor_uniform, log_family, ExponentVector, LogDerivationId, OperandProfile,
    PsiDOAlgebra, PsiDOElement, SampleProfile,
};
use tracelift_core::report::CheckReport;
use tracelift_core::scalars::{random_prime, FieldSpec, Scalar};

use crate::{rng_for, salt, ResolvedConfig, CHECKPOINT_ENV};

pub fn run(name: &str, cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    match name {
        "lemma-1.1" => lemma_1_1(cfg),
        "thm-1.1" => thm_1_1(cfg),
        "thm-1.5" => thm_1_5(cfg),
        "cond-i-iii" => cond_i_iii(cfg),
        "lemma-2.5" => lemma_2_5(cfg),
        "lemma-2.7" => lemma_2_7(cfg),
        "lemma-2.8" => lemma_2_8(cfg),
        "kac-moody" => kac_moody(cfg),
        "thm-3.1" => thm_3_1(cfg),
        "lemma-3.2-3.4" => rearrangements(cfg),
        "eq-16" => combination(cfg),
        "lemma-4.2" => expansion(cfg),
        "cor-4.3" => generated_closed(cfg),
        "conjecture-n3" => conjecture(cfg),
        other => Err(AlgebraError::Unsupported(format!("unknown suite `{other}`"))),
    }
}

fn finish(report: CheckReport, seed: u64, field: &str, floor: &str, start: Instant) -> CheckReport {
    report
        .with_context(seed, field, floor)
        .with_millis(start.elapsed().as_millis())
}

/// `(A1, .., A5, A6) -> (A6, A1, .., A5)`: the identities state their
/// differentials with the fresh argument in front.
fn rotate_front<T: Clone>(t: &[T]) -> Vec<T> {
    let mut v = Vec::with_capacity(t.len());
    v.push(t[t.len() - 1].clone());
    v.extend_from_slice(&t[..t.len() - 1]);
    v
}

fn monomial_profile(x_hi: i64, d_hi: i64) -> SampleProfile {
    SampleProfile {
        max_terms: 1,
        x_range: (0, x_hi),
        d_range: (0, d_hi),
        coeff_range: (-3, 3),
    }
}

/// The series behind the derivation-pair commutator, plus the commutator
/// identity itself on the generators and on sampled operators.
fn lemma_1_1(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let depth = cfg.depth();
    let alg = PsiDOAlgebra::new(1, cfg.field, floor_uniform(1, -depth)).with_profile(SampleProfile {
        max_terms: 2,
        x_range: (-2, 2),
        d_range: (-2, 2),
        coeff_range: (-3, 3),
    });
    let fdesc = cfg.field.describe();
    let floor = alg.floor_description();
    let mut out = Vec::new();

    // Coefficient m of the series is (m-1)!/m; rebuild it through the
    // recursion e_1 = 1, e_m = e_{m-1} (m-1)^2 / m and compare term by term.
    let start = Instant::now();
    let q = alg.q_element(1, &alg.work_floor);
    let mut expected_terms = Vec::new();
    let mut coeff = cfg.field.one();
    let mut leading = Vec::new();
    for m in 1..=depth {
        if m > 1 {
            coeff = coeff.mul(&cfg.field.from_ratio((m - 1) * (m - 1), m)?);
        }
        if leading.len() < 4 {
            leading.push(coeff.to_string());
        }
        expected_terms.push((ExponentVector::new(vec![-m], vec![-m]), coeff.clone()));
    }
    let expected = alg.from_terms(expected_terms, alg.work_floor.clone());
    let diff = alg.sub(&q, &expected);
    let report = if diff.is_zero() {
        CheckReport::pass("q-series-coefficients")
            .with_witness(format!("coefficients {}, ...", leading.join(", ")))
    } else {
        CheckReport::fail("q-series-coefficients", format!("difference {}", diff.to_text()))
    };
    out.push(finish(report, cfg.seed, &fdesc, &floor, start));

    // [D1, D2] agrees with bracketing by the series on both generators and
    // on sampled two-term operators.  Multiplying by a sample of d-degree up
    // to 2 contaminates the bottom two orders of the series, so the
    // comparison floor sits two above the working floor.
    let start = Instant::now();
    let d1 = LogDerivationId::from_label(1);
    let d2 = LogDerivationId::from_label(2);
    let wf = floor_uniform(1, (-(depth - 2)).min(-1));
    let mut probes: Vec<(String, PsiDOElement)> =
        vec![("x1".into(), alg.gen_x(1)), ("d1".into(), alg.gen_d(1))];
    let mut rng = rng_for(cfg.seed, salt::PROBES);
    for k in 0..cfg.samples() {
        probes.push((format!("sample {k}"), alg.sample(&mut rng)));
    }
    let mut report = CheckReport::pass("q-realizes-the-commutator").with_witness(format!(
        "agrees on x1, d1, and {} sampled operators",
        cfg.samples()
    ));
    for (tag, g) in &probes {
        let lhs = alg.sub(
            &alg.apply_log_derivation(d1, &alg.apply_log_derivation(d2, g, &wf)?, &wf)?,
            &alg.apply_log_derivation(d2, &alg.apply_log_derivation(d1, g, &wf)?, &wf)?,
        );
        let rhs = alg.bracket(&q, g, &wf)?;
        let diff = alg.sub(&lhs, &rhs);
        if !diff.is_zero() {
            report = CheckReport::fail(
                "q-realizes-the-commutator",
                format!("{tag}: difference {}", diff.to_text()),
            );
            break;
        }
    }
    out.push(finish(report, cfg.seed, &fdesc, &floor, start));
    Ok(out)
}

/// Trace and derivation-family conditions on the symbol algebras.
fn cond_i_iii(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let depth = cfg.depth();
    let mut out = Vec::new();
    for (idx, &n) in cfg.ns.iter().enumerate() {
        let alg = PsiDOAlgebra::new(n, cfg.field, floor_uniform(n, -depth))
            .with_profile(monomial_profile(2, 2));
        let family = log_family(&alg);
        let samples = cfg.samples_at(idx);
        let mut reports = vec![check_trace_property(&alg, samples, cfg.seed)];
        reports.extend(check_derivation_conditions(&alg, &family, samples, cfg.seed));
        for mut r in reports {
            r.check = format!("n{n}-{}", r.check);
            out.push(r);
        }
    }
    Ok(out)
}

/// The three-argument lift: closed on sampled tuples, and the pinned value.
fn thm_1_1(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let depth = cfg.depth();
    let alg = PsiDOAlgebra::new(1, cfg.field, floor_uniform(1, -depth)).with_profile(SampleProfile {
        max_terms: 2,
        x_range: (0, 2),
        d_range: (0, 2),
        coeff_range: (-3, 3),
    });
    let family = log_family(&alg);
    let formula = builtin_formula("psi3", cfg.field)?;
    let fdesc = cfg.field.describe();
    let floor = alg.floor_description();
    let mut out = Vec::new();

    let start = Instant::now();
    let cochain = formula_cochain(&formula, &alg, &family);
    let mut rng = rng_for(cfg.seed, salt::TUPLES);
    let sampler = || (0..4).map(|_| alg.sample(&mut rng)).collect::<Vec<_>>();
    out.push(finish(
        is_cocycle(&alg, &cochain, sampler, cfg.samples(), "psi3-closed"),
        cfg.seed,
        &fdesc,
        &floor,
        start,
    ));

    let start = Instant::now();
    let args = vec![alg.one(), alg.gen_x(1), alg.gen_d(1)];
    let value = evaluate(&formula, &alg, &family, &args)?;
    let expected = cfg.field.from_i64(-3);
    let report = if value == expected {
        CheckReport::pass("psi3-distinguished-value")
            .with_witness(format!("psi3(1, x1, d1) = {value}"))
    } else {
        CheckReport::fail(
            "psi3-distinguished-value",
            format!("psi3(1, x1, d1) = {value}, expected {expected}"),
        )
    };
    out.push(finish(report, cfg.seed, &fdesc, &floor, start));
    Ok(out)
}

/// The five-argument cocycle of a single derivation pair is closed.
fn thm_1_5(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let depth = cfg.depth();
    let alg = PsiDOAlgebra::new(1, cfg.field, floor_uniform(1, -depth))
        .with_profile(monomial_profile(1, 1));
    let family = log_family(&alg);
    let formula = builtin_formula("psi-tilde-2", cfg.field)?;
    let cochain = formula_cochain(&formula, &alg, &family);
    let start = Instant::now();
    let mut rng = rng_for(cfg.seed, salt::TUPLES);
    let sampler = || (0..6).map(|_| alg.sample(&mut rng)).collect::<Vec<_>>();
    Ok(vec![finish(
        is_cocycle(&alg, &cochain, sampler, cfg.samples(), "psi-tilde-2-closed"),
        cfg.seed,
        &cfg.field.describe(),
        &alg.floor_description(),
        start,
    )])
}

/// The residue trace kills Poisson brackets.
fn lemma_2_5(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (idx, &n) in cfg.ns.iter().enumerate() {
        let alg = PoissonAlgebra::new(n, cfg.field);
        let mut report = check_trace_property(&alg, cfg.samples_at(idx), cfg.seed);
        report.check = format!("n{n}-{}", report.check);
        out.push(report);
    }
    Ok(out)
}

/// Twisted residue cocycles: closed, and equal to the log-derivation form.
fn lemma_2_7(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (idx, &n) in cfg.ns.iter().enumerate() {
        // Monomials at n = 3 keep the (2n+2)-argument differential cheap;
        // multilinearity makes monomial tuples a spanning probe set anyway.
        let profile = PoissonSampleProfile {
            max_terms: if n >= 3 { 1 } else { 2 },
            exp_range: (-2, 2),
            coeff_range: (-3, 3),
        };
        let alg = PoissonAlgebra::new(n, cfg.field).with_profile(profile);
        let fdesc = cfg.field.describe();
        let floor = alg.floor_description();
        let samples = cfg.samples_at(idx);

        let start = Instant::now();
        let twist = alg.psi0_twist();
        let cochain = Cochain::new(2 * n + 1, true, |args: &[LaurentPoly]| {
            alg.psi_f_evaluate(&twist, args)
        });
        let mut rng = rng_for(cfg.seed, salt::TUPLES.wrapping_add(n as u64));
        let sampler = || (0..2 * n + 2).map(|_| alg.sample(&mut rng)).collect::<Vec<_>>();
        out.push(finish(
            is_cocycle(
                &alg,
                &cochain,
                sampler,
                samples,
                &format!("n{n}-twisted-cocycle-closed"),
            ),
            cfg.seed,
            &fdesc,
            &floor,
            start,
        ));

        // The twist rebuilt from a triangular family of log monomials gives
        // the same cocycle as applying the log derivations directly.
        let start = Instant::now();
        let ds: Vec<LaurentPoly> = (0..2 * n)
            .map(|k| {
                let exps: Vec<i64> = (0..2 * n).map(|j| i64::from(j >= k)).collect();
                alg.monomial(cfg.field.one(), exps)
            })
            .collect();
        let f = alg.f_from_log_monomials(&ds)?;
        let mut rng = rng_for(cfg.seed, salt::SAMPLES.wrapping_add(n as u64));
        let sampler = || (0..2 * n + 1).map(|_| alg.sample(&mut rng)).collect::<Vec<_>>();
        out.push(finish(
            verify_identity(
                &format!("n{n}-matches-log-derivation-form"),
                |t| alg.psi_f_evaluate(&f, t),
                |t| alg.psi_log_evaluate(&ds, t),
                sampler,
                samples.min(5),
            ),
            cfg.seed,
            &fdesc,
            &floor,
            start,
        ));
    }
    Ok(out)
}

/// The distinguished twisted cocycle takes value 1 at (1, p1..pn, q1..qn).
fn lemma_2_8(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for &n in &cfg.ns {
        let alg = PoissonAlgebra::new(n, cfg.field);
        let start = Instant::now();
        let mut args = vec![alg.one()];
        args.extend((1..=n).map(|i| alg.gen_p(i)));
        args.extend((1..=n).map(|i| alg.gen_q(i)));
        let value = alg.psi_f_evaluate(&alg.psi0_twist(), &args)?;
        let name = format!("n{n}-distinguished-value");
        let report = if value == cfg.field.one() {
            CheckReport::pass(name).with_witness(format!("value = {value}"))
        } else {
            CheckReport::fail(name, format!("value = {value}, expected 1"))
        };
        out.push(finish(
            report,
            cfg.seed,
            &cfg.field.describe(),
            &alg.floor_description(),
            start,
        ));
    }
    Ok(out)
}

/// The loop-algebra lift: the chain is a cycle, the pairing vanishes unless
/// loop degrees cancel, on cancelling degrees it is a fixed multiple of
/// degree times matrix trace, and the lift is closed.
fn kac_moody(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let alg = CurrentAlgebra::new(1, 3, cfg.field);
    let fdesc = cfg.field.describe();
    let floor = alg.floor_description();
    let samples = cfg.samples();
    let aref = &alg;
    let handles: Vec<Handle<'_, CurrentElement>> =
        vec![Box::new(move |e| Ok(aref.loop_derivative(1, e)))];
    let family: DerivationFamily<'_, CurrentAlgebra> = DerivationFamily::new(handles);
    let chain = DerivationChain::single(vec![1], cfg.field.one());
    let mut out = Vec::new();

    let start = Instant::now();
    let cycle = chain_is_cycle(&alg, &family, &chain, &[vec![]])?;
    out.push(finish(
        if cycle {
            CheckReport::pass("derivative-wedge-is-a-cycle")
        } else {
            CheckReport::fail(
                "derivative-wedge-is-a-cycle",
                "chain boundary is nonzero".to_string(),
            )
        },
        cfg.seed,
        &fdesc,
        &floor,
        start,
    ));
    if !cycle {
        return Ok(out);
    }
    let formula = lemma22_cocycle(&alg, &family, &chain, &[vec![]])?;

    let start = Instant::now();
    let mut rng = rng_for(cfg.seed, salt::SAMPLES);
    let mut report = CheckReport::pass("pairing-vanishes-off-degree");
    for _s in 0..samples {
        let a = rng.gen_range(-4i64..=4);
        let b = loop {
            let b = rng.gen_range(-4i64..=4);
            if a + b != 0 {
                break b;
            }
        };
        let e = alg.matrices.sample(&mut rng);
        let f = alg.matrices.sample(&mut rng);
        let v = evaluate(
            &formula,
            &alg,
            &family,
            &[alg.mono(e, vec![a]), alg.mono(f, vec![b])],
        )?;
        if !v.is_zero() {
            report = CheckReport::fail(
                "pairing-vanishes-off-degree",
                format!("degrees ({a}, {b}): value {v}"),
            );
            break;
        }
    }
    out.push(finish(report, cfg.seed, &fdesc, &floor, start));

    let start = Instant::now();
    let degrees = [-3i64, -1, 1, 2, 4];
    let mut constant: Option<Scalar> = None;
    let mut report = None;
    for s in 0..samples {
        let a = degrees[s % degrees.len()];
        let (e, f, tr) = loop {
            let e = alg.matrices.sample(&mut rng);
            let f = alg.matrices.sample(&mut rng);
            let tr = alg.matrices.trace_elem(&alg.matrices.mul(&e, &f));
            if !tr.is_zero() {
                break (e, f, tr);
            }
        };
        let v = evaluate(
            &formula,
            &alg,
            &family,
            &[alg.mono(e, vec![a]), alg.mono(f, vec![-a])],
        )?;
        let base = cfg.field.from_i64(a).mul(&tr);
        let ratio = v.mul(&base.inv()?);
        match &constant {
            None => constant = Some(ratio),
            Some(c) if *c == ratio => {}
            Some(c) => {
                report = Some(CheckReport::fail(
                    "pairing-on-cancelling-degrees",
                    format!("sample {s}: ratio {ratio} disagrees with {c}"),
                ));
                break;
            }
        }
    }
    let report = report.unwrap_or_else(|| match constant {
        Some(c) if c == cfg.field.from_i64(2) => CheckReport::pass("pairing-on-cancelling-degrees")
            .with_witness("pairing = 2 * degree * matrix-trace(E F)".to_string()),
        Some(c) => CheckReport::fail(
            "pairing-on-cancelling-degrees",
            format!("constant {c}, expected 2"),
        ),
        None => CheckReport::error(
            "pairing-on-cancelling-degrees",
            "no usable sample".to_string(),
        ),
    });
    out.push(finish(report, cfg.seed, &fdesc, &floor, start));

    let start = Instant::now();
    let cochain = formula_cochain(&formula, &alg, &family);
    let mut rng = rng_for(cfg.seed, salt::TUPLES);
    let sampler = || (0..3).map(|_| alg.sample(&mut rng)).collect::<Vec<_>>();
    out.push(finish(
        is_cocycle(&alg, &cochain, sampler, samples, "lift-is-closed"),
        cfg.seed,
        &fdesc,
        &floor,
        start,
    ));
    Ok(out)
}

/// The five-argument lift.  The label-alternation reading is adjudicated
/// twice (closedness on matrices, the pinned three-argument value on
/// symbols); then the nonvanishing value and closedness of the lift itself.
fn thm_3_1(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let fdesc = cfg.field.describe();

    // Matrices: the slot-only reading fails closedness, the coset reading
    // passes, on the same inner family and tuples.
    let malg = MatrixAlgebra::new(3, cfg.field);
    let mfloor = malg.floor_description();
    let mut rng = rng_for(cfg.seed, salt::DS);
    let ds: Vec<MatrixElement> = (0..4).map(|_| malg.sample(&mut rng)).collect();
    let mfam = inner_derivation_family(&malg, &ds)?;
    let mut slots = generate_lifting_formula(2, cfg.field);
    slots.mode = LabelMode::DSlotsOnly;
    let coset = generate_lifting_formula(2, cfg.field);
    let mut trng = rng_for(cfg.seed, salt::TUPLES);
    let tuples: Vec<Vec<MatrixElement>> = (0..2)
        .map(|_| (0..6).map(|_| malg.sample(&mut trng)).collect())
        .collect();

    let start = Instant::now();
    let slot_cochain = formula_cochain(&slots, &malg, &mfam);
    let mut nonzero = None;
    for (t, tuple) in tuples.iter().enumerate() {
        let v = ce_differential(&malg, &slot_cochain, tuple)?;
        if !v.is_zero() {
            nonzero = Some(format!("tuple {t}: d-value {v}"));
            break;
        }
    }
    out.push(finish(
        match nonzero {
            Some(w) => CheckReport::pass("slot-alternation-rejected").with_witness(w),
            None => CheckReport::fail(
                "slot-alternation-rejected",
                "slot-only differential vanished on every matrix tuple",
            ),
        },
        cfg.seed,
        &fdesc,
        &mfloor,
        start,
    ));

    let start = Instant::now();
    let coset_cochain = formula_cochain(&coset, &malg, &mfam);
    let mut witness = None;
    for (t, tuple) in tuples.iter().enumerate() {
        let v = ce_differential(&malg, &coset_cochain, tuple)?;
        if !v.is_zero() {
            witness = Some(format!("tuple {t}: d-value {v}"));
            break;
        }
    }
    out.push(finish(
        match witness {
            None => CheckReport::pass("coset-alternation-closed"),
            Some(w) => CheckReport::fail("coset-alternation-closed", w),
        },
        cfg.seed,
        &fdesc,
        &mfloor,
        start,
    ));

    // Symbols: the displayed three-argument form pins the value; the full
    // relabeling without the coset division overshoots it.
    // Probe d-degrees sum to at most 3, so -4 already gives exact residues.
    let sfield = FieldSpec::Rational;
    let salg = PsiDOAlgebra::new(1, sfield, floor_uniform(1, -4));
    let sfam = log_family(&salg);
    let sfloor = salg.floor_description();
    let displayed = parse_formula(
        "1 * D1[A1] D2[A2] A3\n1 * Q12 A1 A2 A3",
        sfield,
        LabelMode::DSlotsOnly,
    )?;
    let mut plain3 = builtin_formula("psi3", sfield)?;
    plain3.mode = LabelMode::FullRelabel;
    let coset3 = builtin_formula("psi3", sfield)?;
    let probes = [
        vec![salg.one(), salg.gen_x(1), salg.gen_d(1)],
        vec![salg.gen_x(1), salg.one(), salg.gen_d(1)],
        vec![
            salg.monomial(sfield.one(), vec![2], vec![0]),
            salg.monomial(sfield.one(), vec![0], vec![2]),
            salg.monomial(sfield.one(), vec![1], vec![1]),
        ],
    ];

    let start = Instant::now();
    let mut split = None;
    for (p, probe) in probes.iter().enumerate() {
        let shown = evaluate(&displayed, &salg, &sfam, probe)?;
        let full = evaluate(&plain3, &salg, &sfam, probe)?;
        if shown != full {
            split = Some(format!("probe {p}: displayed {shown}, plain relabeling {full}"));
            break;
        }
    }
    out.push(finish(
        match split {
            Some(w) => CheckReport::pass("plain-relabeling-rejected").with_witness(w),
            None => CheckReport::fail(
                "plain-relabeling-rejected",
                "plain relabeling matched the displayed form on every probe",
            ),
        },
        cfg.seed,
        "rational",
        &sfloor,
        start,
    ));

    let start = Instant::now();
    let mut mismatch = None;
    let mut first = String::new();
    for (p, probe) in probes.iter().enumerate() {
        let shown = evaluate(&displayed, &salg, &sfam, probe)?;
        let cs = evaluate(&coset3, &salg, &sfam, probe)?;
        if p == 0 {
            first = format!("value at (1, x1, d1) = {cs}");
        }
        if shown != cs {
            mismatch = Some(format!("probe {p}: displayed {shown}, coset {cs}"));
            break;
        }
    }
    out.push(finish(
        match mismatch {
            None => CheckReport::pass("coset-matches-displayed-form").with_witness(first),
            Some(w) => CheckReport::fail("coset-matches-displayed-form", w),
        },
        cfg.seed,
        "rational",
        &sfloor,
        start,
    ));

    // Nonvanishing of the five-argument lift at (1, x1, x2, d1, d2), exact;
    // the generator tuple supports a shallow sufficient floor.
    let start = Instant::now();
    let shallow = PsiDOAlgebra::new(2, FieldSpec::Rational, floor_uniform(2, -1));
    let args = vec![
        shallow.one(),
        shallow.gen_x(1),
        shallow.gen_x(2),
        shallow.gen_d(1),
        shallow.gen_d(2),
    ];
    let profiles: Vec<OperandProfile> = args.iter().map(OperandProfile::of_element).collect();
    let vals = PsiDOAlgebra::sufficient_floor(&profiles, 2);
    let valg = PsiDOAlgebra::new(2, FieldSpec::Rational, floor_at(&vals));
    let vfam = log_family(&valg);
    let vpsi5 = builtin_formula("psi5", FieldSpec::Rational)?;
    let value = evaluate(&vpsi5, &valg, &vfam, &args)?;
    out.push(finish(
        if value.is_zero() {
            CheckReport::fail(
                "psi5-nonvanishing",
                "psi5(1, x1, x2, d1, d2) = 0",
            )
        } else {
            CheckReport::pass("psi5-nonvanishing")
                .with_witness(format!("psi5(1, x1, x2, d1, d2) = {value}"))
        },
        cfg.seed,
        "rational",
        &valg.floor_description(),
        start,
    ));

    // Closedness of the five-argument lift on monomial tuples.
    let start = Instant::now();
    let calg = PsiDOAlgebra::new(2, cfg.field, floor_uniform(2, -cfg.depth()))
        .with_profile(monomial_profile(2, 2));
    let cfam = log_family(&calg);
    let cpsi5 = builtin_formula("psi5", cfg.field)?;
    let ccochain = formula_cochain(&cpsi5, &calg, &cfam);
    let mut srng = rng_for(cfg.seed, salt::SAMPLES);
    let sampler = || (0..6).map(|_| calg.sample(&mut srng)).collect::<Vec<_>>();
    out.push(finish(
        is_cocycle(&calg, &ccochain, sampler, cfg.samples(), "psi5-closed"),
        cfg.seed,
        &fdesc,
        &calg.floor_description(),
        start,
    ));
    Ok(out)
}

/// The nine rearrangement identities.  The engine differential is related to
/// the identities' convention by one constant; it is measured on the
/// all-derivation benchmark and then replayed verbatim across all nine.
fn rearrangements(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let depth = cfg.depth();
    let alg = PsiDOAlgebra::new(2, cfg.field, floor_uniform(2, -depth))
        .with_profile(monomial_profile(1, 1));
    let family = log_family(&alg);
    let fdesc = cfg.field.describe();
    let floor = alg.floor_description();
    let ids = crate::words::rearrangement_identities(cfg.field);
    let samples = cfg.samples();
    let mut out = Vec::new();
    let mut rng = rng_for(cfg.seed, salt::TUPLES);

    let start = Instant::now();
    let bench = &ids[0];
    let bench_lhs = word_cochain(&alg, &family, &bench.lhs);
    let mut constant: Option<Scalar> = None;
    let mut solve_failure = None;
    for s in 0..samples.max(2) {
        let tuple: Vec<PsiDOElement> = (0..6).map(|_| alg.sample(&mut rng)).collect();
        let den = ce_differential(&alg, &bench_lhs, &rotate_front(&tuple))?;
        if den.is_zero() {
            continue;
        }
        let num = alt_word_evaluate(&alg, &family, &bench.rhs, &tuple)?;
        let ratio = num.mul(&den.inv()?);
        match &constant {
            None => constant = Some(ratio),
            Some(c) if *c == ratio => {}
            Some(c) => {
                solve_failure = Some(format!("sample {s}: ratio {ratio} disagrees with {c}"));
                break;
            }
        }
    }
    let constant = match (constant, solve_failure) {
        (Some(c), None) => {
            out.push(finish(
                CheckReport::pass("differential-convention-constant")
                    .with_witness(format!("c = {c}, measured on the all-derivation word")),
                cfg.seed,
                &fdesc,
                &floor,
                start,
            ));
            c
        }
        (_, Some(w)) => {
            out.push(finish(
                CheckReport::fail("differential-convention-constant", w),
                cfg.seed,
                &fdesc,
                &floor,
                start,
            ));
            return Ok(out);
        }
        (None, None) => {
            out.push(finish(
                CheckReport::error(
                    "differential-convention-constant",
                    "benchmark differential vanished on every sample".to_string(),
                ),
                cfg.seed,
                &fdesc,
                &floor,
                start,
            ));
            return Ok(out);
        }
    };

    for id in &ids {
        let start = Instant::now();
        let lhs = word_cochain(&alg, &family, &id.lhs);
        let report = verify_identity(
            id.name,
            |t| Ok(constant.mul(&ce_differential(&alg, &lhs, &rotate_front(t))?)),
            |t| alt_word_evaluate(&alg, &family, &id.rhs, t),
            || (0..6).map(|_| alg.sample(&mut rng)).collect::<Vec<_>>(),
            samples,
        );
        out.push(finish(report, cfg.seed, &fdesc, &floor, start));
    }
    Ok(out)
}

/// The seven trace words vanish identically, the displayed combination of
/// them balances its differential, and the five-argument primitive is
/// closed under whichever Q reading the data selects.
fn combination(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let depth = cfg.depth();
    let alg = PsiDOAlgebra::new(2, cfg.field, floor_uniform(2, -depth))
        .with_profile(monomial_profile(1, 1));
    let family = log_family(&alg);
    let fdesc = cfg.field.describe();
    let floor = alg.floor_description();
    let samples = cfg.samples();
    let vwords = crate::words::vanishing_words(cfg.field);
    let weights = crate::words::combination_weights(cfg.field);
    let mut rng = rng_for(cfg.seed, salt::TUPLES);
    let tuples: Vec<Vec<PsiDOElement>> = (0..samples)
        .map(|_| (0..6).map(|_| alg.sample(&mut rng)).collect())
        .collect();
    let mut out = Vec::new();

    let mut values: Vec<Vec<Scalar>> = Vec::with_capacity(tuples.len());
    let start_e = Instant::now();
    let mut e_failure = None;
    let mut nested_failure = None;
    for (t, tuple) in tuples.iter().enumerate() {
        let row: Vec<Scalar> = vwords
            .iter()
            .map(|(_, w)| alt_word_evaluate(&alg, &family, w, tuple))
            .collect::<Result<_>>()?;
        for (k, v) in row.iter().enumerate() {
            if !v.is_zero() {
                let w = format!("{} on tuple {t}: {v}", vwords[k].0);
                if k < 3 && e_failure.is_none() {
                    e_failure = Some(w);
                } else if k >= 3 && nested_failure.is_none() {
                    nested_failure = Some(w);
                }
            }
        }
        values.push(row);
    }
    out.push(finish(
        match &e_failure {
            None => CheckReport::pass("derivation-trace-terms-vanish")
                .with_witness("E1, E2, E3 vanish on every sampled tuple".to_string()),
            Some(w) => CheckReport::fail("derivation-trace-terms-vanish", w.clone()),
        },
        cfg.seed,
        &fdesc,
        &floor,
        start_e,
    ));
    out.push(finish(
        match &nested_failure {
            None => CheckReport::pass("nested-derivation-terms-vanish")
                .with_witness("I, II, III, IV vanish on every sampled tuple".to_string()),
            Some(w) => CheckReport::fail("nested-derivation-terms-vanish", w.clone()),
        },
        cfg.seed,
        &fdesc,
        &floor,
        start_e,
    ));

    // Closedness of the primitive, adjudicating the Q reading on tuple 0:
    // fixed Q-indices first, label-permuted (coset) Q second.
    let start = Instant::now();
    let fixed = crate::words::five_argument_primitive(cfg.field, false);
    let permuted = crate::words::five_argument_primitive(cfg.field, true);
    let fixed_cochain = word_cochain(&alg, &family, &fixed);
    let permuted_cochain = word_cochain(&alg, &family, &permuted);
    let d_fixed_0 = ce_differential(&alg, &fixed_cochain, &tuples[0])?;
    let d_permuted_0 = ce_differential(&alg, &permuted_cochain, &tuples[0])?;
    let (chosen, first_d, tag, other_note) = if d_fixed_0.is_zero() {
        (
            &fixed_cochain,
            d_fixed_0.clone(),
            "fixed-Q",
            if d_permuted_0.is_zero() {
                "the label-permuted reading also closes on tuple 0".to_string()
            } else {
                format!("the label-permuted reading gives {d_permuted_0} on tuple 0")
            },
        )
    } else if d_permuted_0.is_zero() {
        (
            &permuted_cochain,
            d_permuted_0.clone(),
            "label-permuted-Q",
            format!("the fixed-Q reading gives {d_fixed_0} on tuple 0"),
        )
    } else {
        out.push(finish(
            CheckReport::fail(
                "five-term-primitive-closed",
                format!(
                    "neither Q reading closes on tuple 0: fixed {d_fixed_0}, permuted {d_permuted_0}"
                ),
            ),
            cfg.seed,
            &fdesc,
            &floor,
            start,
        ));
        return Ok(out);
    };
    let mut d_values = vec![first_d];
    let mut closed_failure = None;
    for (t, tuple) in tuples.iter().enumerate().skip(1) {
        let v = ce_differential(&alg, chosen, tuple)?;
        if !v.is_zero() && closed_failure.is_none() {
            closed_failure = Some(format!("tuple {t}: d-value {v}"));
        }
        d_values.push(v);
    }
    out.push(finish(
        match closed_failure {
            None => CheckReport::pass("five-term-primitive-closed")
                .with_witness(format!("the {tag} reading closes; {other_note}")),
            Some(w) => CheckReport::fail("five-term-primitive-closed", w),
        },
        cfg.seed,
        &fdesc,
        &floor,
        start,
    ));

    let start = Instant::now();
    let mut balance_failure = None;
    for (t, row) in values.iter().enumerate() {
        let mut comb = cfg.field.zero();
        for (w, v) in weights.iter().zip(row) {
            comb = comb.add(&w.mul(v));
        }
        if comb != d_values[t] {
            balance_failure = Some(format!(
                "tuple {t}: combination {comb}, differential {}",
                d_values[t]
            ));
            break;
        }
    }
    out.push(finish(
        match balance_failure {
            None => CheckReport::pass("displayed-combination-balances").with_witness(
                "both sides vanish on every tuple; the 4/3 weight replayed as written".to_string(),
            ),
            Some(w) => CheckReport::fail("displayed-combination-balances", w),
        },
        cfg.seed,
        &fdesc,
        &floor,
        start,
    ));
    Ok(out)
}

/// The inner-derivation expansion: integer factor, interval decomposition,
/// binomial refinement, closedness, and the potential constant.
fn expansion(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let fdesc = cfg.field.describe();
    for (idx, &n) in cfg.ns.iter().enumerate() {
        let alg = MatrixAlgebra::new(3, cfg.field);
        let mut rng = rng_for(cfg.seed, salt::DS.wrapping_add(n as u64));
        let ds: Vec<MatrixElement> = (0..2 * n).map(|_| alg.sample(&mut rng)).collect();
        let mut srng = rng_for(cfg.seed, salt::SAMPLES.wrapping_add(n as u64));
        let start = Instant::now();
        match inner_expansion_check(n, &alg, &ds, || alg.sample(&mut srng), cfg.samples_at(idx)) {
            Ok(outcome) => {
                for mut r in outcome.reports {
                    r.check = format!("n{n}-{}", r.check);
                    out.push(finish(r, cfg.seed, &fdesc, &alg.floor_description(), start));
                }
            }
            Err(e) => out.push(finish(
                CheckReport::error(format!("n{n}-expansion"), e.to_string()),
                cfg.seed,
                &fdesc,
                &alg.floor_description(),
                start,
            )),
        }
    }
    Ok(out)
}

/// Generated formulas are closed over fresh inner derivation families.
fn generated_closed(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (idx, &n) in cfg.ns.iter().enumerate() {
        let alg = MatrixAlgebra::new(3, cfg.field);
        let mut rng = rng_for(cfg.seed, salt::DS.wrapping_add(32 + n as u64));
        let ds: Vec<MatrixElement> = (0..2 * n).map(|_| alg.sample(&mut rng)).collect();
        let family = inner_derivation_family(&alg, &ds)?;
        let formula = generate_lifting_formula(n, cfg.field);
        let cochain = formula_cochain(&formula, &alg, &family);
        let mut srng = rng_for(cfg.seed, salt::TUPLES.wrapping_add(n as u64));
        let start = Instant::now();
        out.push(finish(
            is_cocycle(
                &alg,
                &cochain,
                || (0..2 * n + 2).map(|_| alg.sample(&mut srng)).collect(),
                cfg.samples_at(idx),
                &format!("n{n}-fresh-family-closed"),
            ),
            cfg.seed,
            &cfg.field.describe(),
            &alg.floor_description(),
            start,
        ));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    suite: String,
    n: usize,
    samples: usize,
    seed: u64,
    order: i64,
    fields: Vec<String>,
    /// `"<field>.t<tuple>.<i>.<j>"` -> signed pair value, printed scalar.
    partials: BTreeMap<String, String>,
}

fn save_checkpoint(path: &str, ckpt: &Checkpoint) -> Result<()> {
    let io = |e: std::io::Error| AlgebraError::Unsupported(format!("checkpoint io: {e}"));
    let text = serde_json::to_string_pretty(ckpt)
        .map_err(|e| AlgebraError::Unsupported(format!("checkpoint encode: {e}")))?;
    let tmp = format!("{path}.tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

/// One integer-level monomial, reduced into each working field on demand so
/// both prime runs see the same tuple.
struct IntMono {
    coeff: i64,
    x: Vec<i64>,
    d: Vec<i64>,
}

/// Closedness of the generated formula on symbol algebras, replayed in two
/// prime fields over the same integer tuples.  Long-running: every finished
/// argument pair is checkpointed and a rerun resumes.
fn conjecture(cfg: &ResolvedConfig) -> Result<Vec<CheckReport>> {
    let n = cfg.ns[0];
    let depth = cfg.depth();
    let samples = cfg.samples();

    let fields: Vec<FieldSpec> = if cfg.field_overridden {
        vec![cfg.field]
    } else {
        let p1 = match cfg.field {
            FieldSpec::Prime(p) => p,
            other => {
                return Err(AlgebraError::Unsupported(format!(
                    "expected a prime default field, resolved {}",
                    other.describe()
                )))
            }
        };
        let mut prng = rng_for(cfg.seed, salt::PRIMES);
        let p2 = loop {
            let p = random_prime(&mut prng);
            if p != p1 {
                break p;
            }
        };
        vec![FieldSpec::Prime(p1), FieldSpec::Prime(p2)]
    };

    let mut trng = rng_for(cfg.seed, salt::TUPLES);
    let tuples: Vec<Vec<IntMono>> = (0..samples)
        .map(|_| {
            (0..2 * n + 2)
                .map(|_| IntMono {
                    coeff: loop {
                        let c = trng.gen_range(-3i64..=3);
                        if c != 0 {
                            break c;
                        }
                    },
                    x: (0..n).map(|_| trng.gen_range(0i64..=1)).collect(),
                    d: (0..n).map(|_| trng.gen_range(0i64..=1)).collect(),
                })
                .collect()
        })
        .collect();

    let path =
        std::env::var(CHECKPOINT_ENV).unwrap_or_else(|_| "tracelift-conjecture-n3.json".into());
    let fresh = || Checkpoint {
        suite: "conjecture-n3".into(),
        n,
        samples,
        seed: cfg.seed,
        order: depth,
        fields: fields.iter().map(|f| f.describe()).collect(),
        partials: BTreeMap::new(),
    };
    let mut ckpt = match std::fs::read_to_string(&path) {
        Ok(text) => match serde_json::from_str::<Checkpoint>(&text) {
            Ok(c)
                if c.suite == "conjecture-n3"
                    && c.n == n
                    && c.samples == samples
                    && c.seed == cfg.seed
                    && c.order == depth
                    && c.fields == fields.iter().map(|f| f.describe()).collect::<Vec<_>>() =>
            {
                eprintln!(
                    "conjecture-n3: resuming from {path} ({} pair values stored)",
                    c.partials.len()
                );
                c
            }
            _ => {
                eprintln!(
                    "conjecture-n3: checkpoint at {path} does not match this configuration; starting fresh"
                );
                fresh()
            }
        },
        Err(_) => fresh(),
    };

    let mut out = Vec::new();
    for field in &fields {
        let fdesc = field.describe();
        let alg = PsiDOAlgebra::new(n, *field, floor_uniform(n, -depth));
        let family = log_family(&alg);
        let formula = generate_lifting_formula(n, *field);
        let floor = alg.floor_description();
        for (t, tuple) in tuples.iter().enumerate() {
            let start = Instant::now();
            let args: Vec<PsiDOElement> = tuple
                .iter()
                .map(|m| alg.monomial(field.from_i64(m.coeff), m.x.clone(), m.d.clone()))
                .collect();
            let m = args.len();
            let npairs = m * (m - 1) / 2;
            let mut total = field.zero();
            let mut resumed = 0usize;
            let mut done = 0usize;
            for i in 0..m {
                for j in (i + 1)..m {
                    done += 1;
                    let key = format!("{fdesc}.t{t}.{i}.{j}");
                    let value = match ckpt.partials.get(&key) {
                        Some(text) => {
                            resumed += 1;
                            field.parse_scalar(text)?
                        }
                        None => {
                            let br = alg.bracket(&args[i], &args[j], &alg.work_floor)?;
                            let mut sub = Vec::with_capacity(m - 1);
                            sub.push(br);
                            for (k, a) in args.iter().enumerate() {
                                if k != i && k != j {
                                    sub.push(a.clone());
                                }
                            }
                            let v = evaluate(&formula, &alg, &family, &sub)?;
                            let signed = if (i + j) % 2 == 0 { v } else { v.neg() };
                            ckpt.partials.insert(key, signed.to_string());
                            save_checkpoint(&path, &ckpt)?;
                            eprintln!(
                                "conjecture-n3: {fdesc} tuple {t}: pair ({i},{j}) done [{done}/{npairs}]"
                            );
                            signed
                        }
                    };
                    total = total.add(&value);
                }
            }
            if resumed > 0 {
                eprintln!(
                    "conjecture-n3: {fdesc} tuple {t}: {resumed} of {npairs} pairs came from the checkpoint"
                );
            }
            let name = format!("closed-{fdesc}-tuple-{t}");
            out.push(finish(
                if total.is_zero() {
                    CheckReport::pass(name)
                } else {
                    CheckReport::fail(name, format!("d-value {total}"))
                },
                cfg.seed,
                &fdesc,
                &floor,
                start,
            ));
        }
    }
    Ok(out)
}
