//! `tracelift eval` and `tracelift generate`: one-off formula evaluation and
//! schema emission, for poking at values without running a whole suite.

use std::path::Path;

use tracelift_core::lifting::{
    builtin_formula, evaluate, generate_lifting_formula, parse_formula, serialize_formula,
    LabelMode, LiftingFormula,
};
use tracelift_core::poisson::PoissonAlgebra;
use tracelift_core::psido::{
    floor_at, floor_uniform, format_floor, log_family, OperandProfile, PsiDOAlgebra,
};
use tracelift_core::scalars::FieldSpec;

use crate::{CliError, FieldChoice, DEFAULT_SEED};

pub struct EvalRequest {
    /// A builtin name (`psi3`, `psi5`, `psi-tilde-2`, `psi0`) or a schema
    /// file path.
    pub formula: String,
    /// Inline `;`-separated elements, or a file (one element per line,
    /// `@path` or a bare existing path).
    pub args: Option<String>,
    pub field: Option<FieldChoice>,
    /// Truncation order `K` for symbol algebras; floors at `-K`.  Computed
    /// from the arguments when absent.
    pub order: Option<i64>,
}

fn argument_texts(raw: &str) -> Result<Vec<String>, CliError> {
    let from_file = |path: &str| -> Result<Vec<String>, CliError> {
        let text = std::fs::read_to_string(path)?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect())
    };
    let texts = if let Some(path) = raw.strip_prefix('@') {
        from_file(path)?
    } else if Path::new(raw).exists() {
        from_file(raw)?
    } else {
        raw.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    };
    if texts.is_empty() {
        return Err(CliError::Usage("no arguments given".into()));
    }
    Ok(texts)
}

enum Resolved {
    Twist,
    Symbols(LiftingFormula, usize),
}

fn resolve_formula(name: &str, field: FieldSpec) -> Result<Resolved, CliError> {
    if name == "psi0" {
        return Ok(Resolved::Twist);
    }
    if let Ok(f) = builtin_formula(name, field) {
        // Builtins pair their labels as (ln d_k, ln x_k); half as many axes.
        let axes = f.l / 2;
        return Ok(Resolved::Symbols(f, axes));
    }
    if Path::new(name).exists() {
        let text = std::fs::read_to_string(name)?;
        let f = parse_formula(&text, field, LabelMode::FullRelabelCoset)?;
        let axes = (f.l + 1) / 2;
        return Ok(Resolved::Symbols(f, axes));
    }
    Err(CliError::Usage(format!(
        "`{name}` is not a builtin formula, `psi0`, or a schema file"
    )))
}

pub fn run_eval(req: &EvalRequest) -> Result<String, CliError> {
    let field = req.field.unwrap_or(FieldChoice::Rational).resolve(DEFAULT_SEED);
    let raw = req
        .args
        .as_deref()
        .ok_or_else(|| CliError::Usage("eval needs --args (inline `;`-separated or a file)".into()))?;
    let texts = argument_texts(raw)?;

    let mut lines = vec![
        format!("formula: {}", req.formula),
        format!("field: {}", field.describe()),
    ];
    match resolve_formula(&req.formula, field)? {
        Resolved::Twist => {
            if texts.len() < 3 || texts.len() % 2 == 0 {
                return Err(CliError::Usage(format!(
                    "psi0 takes an odd number of arguments (2n+1, n >= 1), got {}",
                    texts.len()
                )));
            }
            let pairs = (texts.len() - 1) / 2;
            let alg = PoissonAlgebra::new(pairs, field);
            let args = texts
                .iter()
                .map(|t| alg.parse_element(t))
                .collect::<Result<Vec<_>, _>>()?;
            let value = alg.psi_f_evaluate(&alg.psi0_twist(), &args)?;
            lines.push("floor: exact".into());
            lines.push(format!("value: {value}"));
        }
        Resolved::Symbols(formula, axes) => {
            // Parse against an exact instance first; the working floor is
            // only fixed afterwards, from the arguments themselves.
            let parser = PsiDOAlgebra::new(axes, field, floor_uniform(axes, -1));
            let args = texts
                .iter()
                .map(|t| parser.parse_element(t))
                .collect::<Result<Vec<_>, _>>()?;
            let (floor, source) = match req.order {
                Some(k) => (floor_uniform(axes, -k), "flag"),
                None => {
                    let profiles: Vec<OperandProfile> =
                        args.iter().map(OperandProfile::of_element).collect();
                    let vals = PsiDOAlgebra::sufficient_floor(&profiles, axes);
                    (floor_at(&vals), "computed")
                }
            };
            let alg = PsiDOAlgebra::new(axes, field, floor);
            let family = log_family(&alg);
            let value = evaluate(&formula, &alg, &family, &args)?;
            lines.push(format!(
                "floor: {} ({source})",
                format_floor(&alg.work_floor)
            ));
            lines.push(format!("value: {value}"));
        }
    }
    Ok(lines.join("\n"))
}

/// The schema listing of the generated `2n+1`-argument formula, exactly as
/// the parser accepts it back.
pub fn run_generate(n: usize) -> Result<String, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    Ok(serialize_formula(&generate_lifting_formula(
        n,
        FieldSpec::Rational,
    )))
}
