//! Verification harness behind the `tracelift` binary.
//!
//! The library side owns everything the binary does apart from flag parsing:
//! suite defaults, field resolution, the suite implementations themselves,
//! formula evaluation for `eval`/`generate`, and report rendering.  Keeping
//! it here lets the integration tests drive suites in-process.

pub mod evalcmd;
pub mod suites;
pub mod words;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use tracelift_core::framework::AlgebraError;
use tracelift_core::psido::{OperandProfile, PsiDOAlgebra};
use tracelift_core::report::{CheckReport, CheckStatus};
use tracelift_core::scalars::{is_prime_u64, random_prime, FieldSpec};

pub const DEFAULT_SEED: u64 = 1815;

/// Env var consulted for the default worker count.
pub const JOBS_ENV: &str = "TRACELIFT_JOBS";
/// Env var overriding the resumable checkpoint path of `conjecture-n3`.
pub const CHECKPOINT_ENV: &str = "TRACELIFT_CHECKPOINT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("unknown format `{0}`; expected `text` or `json-like`")]
    UnknownFormat(String),
    #[error("bad field `{0}`; expected `rational`, `mod:P` with P prime, or `random-prime`")]
    BadField(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Field selection as written on the command line.  `random-prime` only
/// becomes a concrete prime once the seed is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldChoice {
    Rational,
    Mod(u64),
    RandomPrime,
}

impl FieldChoice {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "rational" => Ok(FieldChoice::Rational),
            "random-prime" => Ok(FieldChoice::RandomPrime),
            _ => text
                .strip_prefix("mod:")
                .and_then(|s| s.parse::<u64>().ok())
                .filter(|&p| is_prime_u64(p))
                .map(FieldChoice::Mod)
                .ok_or_else(|| CliError::BadField(text.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FieldChoice::Rational => "rational".into(),
            FieldChoice::Mod(p) => format!("mod:{p}"),
            FieldChoice::RandomPrime => "random-prime".into(),
        }
    }

    /// Concrete field; the random prime is drawn deterministically from the
    /// seed so a rerun reproduces it.
    pub fn resolve(&self, seed: u64) -> FieldSpec {
        match self {
            FieldChoice::Rational => FieldSpec::Rational,
            FieldChoice::Mod(p) => FieldSpec::Prime(*p),
            FieldChoice::RandomPrime => {
                let mut rng = rng_for(seed, salt::FIELD);
                FieldSpec::Prime(random_prime(&mut rng))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    JsonLike,
}

impl ReportFormat {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "text" => Ok(ReportFormat::Text),
            "json-like" => Ok(ReportFormat::JsonLike),
            _ => Err(CliError::UnknownFormat(text.into())),
        }
    }
}

/// Stream salts: every random stream a suite uses is keyed by the user seed
/// xor a fixed salt, so streams never collide and reruns reproduce exactly.
pub mod salt {
    pub const FIELD: u64 = 11;
    pub const TRACE: u64 = 13;
    pub const SAMPLES: u64 = 17;
    pub const DS: u64 = 19;
    pub const PROBES: u64 = 23;
    pub const TUPLES: u64 = 29;
    pub const PRIMES: u64 = 77;
}

pub fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// How the default truncation depth of a suite is chosen.
#[derive(Clone, Copy)]
pub enum DepthRule {
    /// Exact algebras, nothing to truncate.
    None,
    Fixed(i64),
    /// Largest `d`-degree each word factor can carry; the depth is the
    /// sufficient floor for a product of such factors.
    Word(&'static [i64]),
}

impl DepthRule {
    pub fn default_depth(&self) -> Option<i64> {
        match self {
            DepthRule::None => None,
            DepthRule::Fixed(k) => Some(*k),
            DepthRule::Word(degrees) => {
                let profiles: Vec<OperandProfile> = degrees
                    .iter()
                    .map(|&d| OperandProfile {
                        max_x: vec![0],
                        max_d: vec![d],
                    })
                    .collect();
                Some(-PsiDOAlgebra::sufficient_floor(&profiles, 1)[0])
            }
        }
    }
}

pub struct SuiteSpec {
    pub name: &'static str,
    pub about: &'static str,
    /// Default structure sizes for n-indexed suites; empty otherwise.
    pub ns: &'static [usize],
    /// Default sample counts, aligned with `ns` when several are given.
    pub samples: &'static [usize],
    pub depth: DepthRule,
    pub field: FieldChoice,
    /// Excluded from the default verification gate; run it by name.
    pub opt_in: bool,
}

pub const SUITES: &[SuiteSpec] = &[
    SuiteSpec {
        name: "lemma-1.1",
        about: "the inverse-power series and the derivation commutator it realizes",
        ns: &[],
        samples: &[5],
        depth: DepthRule::Fixed(8),
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "thm-1.1",
        about: "three-argument lift: closedness and the pinned value at (1, x1, d1)",
        ns: &[],
        samples: &[20],
        depth: DepthRule::Word(&[4, 2, 2]),
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "thm-1.5",
        about: "the five-argument cocycle of a single derivation pair is closed",
        ns: &[],
        samples: &[10],
        depth: DepthRule::Word(&[2, 1, 1, 1, 1]),
        field: FieldChoice::RandomPrime,
        opt_in: false,
    },
    SuiteSpec {
        name: "cond-i-iii",
        about: "trace and derivation-family conditions on symbol algebras",
        ns: &[1, 2],
        samples: &[50],
        depth: DepthRule::Word(&[2, 2]),
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "lemma-2.5",
        about: "the residue trace kills Poisson brackets",
        ns: &[1, 2],
        samples: &[100],
        depth: DepthRule::None,
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "lemma-2.7",
        about: "twisted residue cocycles: closedness and the log-derivation form",
        ns: &[1, 2, 3],
        samples: &[10],
        depth: DepthRule::None,
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "lemma-2.8",
        about: "value of the distinguished twisted cocycle at (1, p1..pn, q1..qn)",
        ns: &[1, 2, 3],
        samples: &[1],
        depth: DepthRule::None,
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "kac-moody",
        about: "loop-algebra lift: degree pairing, its constant, closedness",
        ns: &[],
        samples: &[20],
        depth: DepthRule::None,
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "thm-3.1",
        about: "five-argument lift: label-alternation adjudication, value, closedness",
        ns: &[],
        samples: &[5],
        depth: DepthRule::Word(&[4, 2, 2, 2, 2]),
        field: FieldChoice::RandomPrime,
        opt_in: false,
    },
    SuiteSpec {
        name: "lemma-3.2-3.4",
        about: "differential rearrangement identities replayed on symbols",
        ns: &[],
        samples: &[3],
        depth: DepthRule::Word(&[2, 1, 1, 1, 1]),
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "eq-16",
        about: "the weighted trace combination collapses onto one exact differential",
        ns: &[],
        samples: &[2],
        depth: DepthRule::Word(&[2, 1, 1, 1, 1]),
        field: FieldChoice::Rational,
        opt_in: false,
    },
    SuiteSpec {
        name: "lemma-4.2",
        about: "inner-derivation expansion: integer k, interval decomposition, refinement",
        ns: &[1, 2, 3],
        samples: &[5, 5, 2],
        depth: DepthRule::None,
        field: FieldChoice::RandomPrime,
        opt_in: false,
    },
    SuiteSpec {
        name: "cor-4.3",
        about: "generated formulas are closed over inner derivation families",
        ns: &[1, 2, 3],
        samples: &[5, 5, 2],
        depth: DepthRule::None,
        field: FieldChoice::RandomPrime,
        opt_in: false,
    },
    SuiteSpec {
        name: "conjecture-n3",
        about: "closedness of the generated seven-argument formula on symbols (opt-in, hours)",
        ns: &[3],
        samples: &[2],
        depth: DepthRule::Word(&[2, 1, 1, 1, 1, 1, 1]),
        field: FieldChoice::RandomPrime,
        opt_in: true,
    },
];

pub fn find_suite(name: &str) -> Result<&'static SuiteSpec, CliError> {
    SUITES
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| CliError::UnknownSuite(name.into()))
}

/// Raw `verify` options, straight off the command line.
#[derive(Debug, Default)]
pub struct VerifyRequest {
    pub suite: String,
    pub n: Option<usize>,
    pub order: Option<i64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub field: Option<FieldChoice>,
}

/// Fully resolved settings a suite runs under.
pub struct ResolvedConfig {
    pub ns: Vec<usize>,
    /// Sample counts aligned with `ns`; a single entry for unindexed suites.
    pub samples: Vec<usize>,
    pub depth: Option<i64>,
    pub seed: u64,
    pub field: FieldSpec,
    /// True when `--field` was given; suites that normally pick their own
    /// fields (the two-prime conjecture run) then honor the override.
    pub field_overridden: bool,
}

impl ResolvedConfig {
    pub fn depth(&self) -> i64 {
        self.depth.expect("suite carries a truncation order")
    }

    pub fn samples(&self) -> usize {
        self.samples[0]
    }

    pub fn samples_at(&self, idx: usize) -> usize {
        self.samples.get(idx).copied().unwrap_or(self.samples[0])
    }
}

/// One printed settings line: `key = value (source)`.
pub struct Setting {
    pub key: &'static str,
    pub value: String,
    pub source: &'static str,
}

pub struct VerifyOutcome {
    pub settings: Vec<Setting>,
    pub reports: Vec<CheckReport>,
}

impl VerifyOutcome {
    /// `(passed, failed, errors)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for r in &self.reports {
            match r.status {
                CheckStatus::Pass => c.0 += 1,
                CheckStatus::Fail => c.1 += 1,
                CheckStatus::Error => c.2 += 1,
            }
        }
        c
    }

    pub fn all_passed(&self) -> bool {
        let (_, failed, errors) = self.counts();
        failed == 0 && errors == 0
    }
}

/// Resolves defaults, runs the suite, and returns reports plus the settings
/// that were in force.  `jobs` is resolved by the caller (it needs the global
/// thread pool) and only echoed here.
pub fn run_verify(req: &VerifyRequest, jobs: (usize, &'static str)) -> Result<VerifyOutcome, CliError> {
    let spec = find_suite(&req.suite)?;

    let ns: Vec<usize> = match req.n {
        Some(n) => {
            if spec.ns.is_empty() {
                return Err(CliError::Usage(format!(
                    "suite `{}` is not indexed by n",
                    spec.name
                )));
            }
            if n == 0 {
                return Err(CliError::Usage("n must be at least 1".into()));
            }
            vec![n]
        }
        None => spec.ns.to_vec(),
    };

    let samples: Vec<usize> = match req.samples {
        Some(s) => {
            if s == 0 {
                return Err(CliError::Usage("samples must be at least 1".into()));
            }
            vec![s; ns.len().max(1)]
        }
        None if spec.samples.len() == 1 => vec![spec.samples[0]; ns.len().max(1)],
        None => ns
            .iter()
            .map(|n| {
                spec.ns
                    .iter()
                    .position(|m| m == n)
                    .and_then(|i| spec.samples.get(i))
                    .copied()
                    .unwrap_or_else(|| *spec.samples.last().unwrap())
            })
            .collect(),
    };

    let default_depth = spec.depth.default_depth();
    let depth = match (req.order, default_depth) {
        (Some(o), Some(_)) => {
            if o < 1 {
                return Err(CliError::Usage("order must be at least 1".into()));
            }
            Some(o)
        }
        (Some(_), None) => {
            return Err(CliError::Usage(format!(
                "suite `{}` runs on exact algebras and takes no --order",
                spec.name
            )))
        }
        (None, d) => d,
    };

    let seed = req.seed.unwrap_or(DEFAULT_SEED);
    let choice = req.field.unwrap_or(spec.field);
    let field = choice.resolve(seed);

    let join = |xs: &[usize]| {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let flag_or = |set: bool, fallback: &'static str| if set { "flag" } else { fallback };

    let mut settings = vec![Setting {
        key: "suite",
        value: spec.name.into(),
        source: "",
    }];
    if !ns.is_empty() {
        settings.push(Setting {
            key: "n",
            value: join(&ns),
            source: flag_or(req.n.is_some(), "default"),
        });
    }
    settings.push(Setting {
        key: "samples",
        value: join(&samples),
        source: flag_or(req.samples.is_some(), "default"),
    });
    settings.push(Setting {
        key: "seed",
        value: seed.to_string(),
        source: flag_or(req.seed.is_some(), "default"),
    });
    let field_value = match choice {
        FieldChoice::RandomPrime => format!("random-prime -> {}", field.describe()),
        _ => field.describe(),
    };
    settings.push(Setting {
        key: "field",
        value: field_value,
        source: flag_or(req.field.is_some(), "default"),
    });
    if let Some(d) = depth {
        settings.push(Setting {
            key: "order",
            value: d.to_string(),
            source: flag_or(req.order.is_some(), "computed"),
        });
    }
    settings.push(Setting {
        key: "jobs",
        value: jobs.0.to_string(),
        source: jobs.1,
    });

    let cfg = ResolvedConfig {
        ns,
        samples,
        depth,
        seed,
        field,
        field_overridden: req.field.is_some(),
    };
    let reports = suites::run(spec.name, &cfg)?;
    Ok(VerifyOutcome { settings, reports })
}

pub fn render(outcome: &VerifyOutcome, format: ReportFormat) -> String {
    let (passed, failed, errors) = outcome.counts();
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            for s in &outcome.settings {
                if s.source.is_empty() {
                    out.push_str(&format!("{} = {}\n", s.key, s.value));
                } else {
                    out.push_str(&format!("{} = {} ({})\n", s.key, s.value, s.source));
                }
            }
            for r in &outcome.reports {
                out.push_str(&r.text_line());
                out.push('\n');
            }
            out.push_str(&format!(
                "result: {passed} passed, {failed} failed, {errors} errors\n"
            ));
            out
        }
        ReportFormat::JsonLike => {
            let mut out = String::new();
            let config: serde_json::Map<String, serde_json::Value> = outcome
                .settings
                .iter()
                .map(|s| {
                    (
                        s.key.to_string(),
                        json!({ "value": s.value, "source": s.source }),
                    )
                })
                .collect();
            out.push_str(&json!({ "config": config }).to_string());
            out.push('\n');
            for r in &outcome.reports {
                out.push_str(&serde_json::to_string(r).expect("reports serialize"));
                out.push('\n');
            }
            out.push_str(
                &json!({ "summary": { "passed": passed, "failed": failed, "errors": errors } })
                    .to_string(),
            );
            out.push('\n');
            out
        }
    }
}
