use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tracelift_cli::evalcmd::{run_eval, run_generate, EvalRequest};
use tracelift_cli::{
    render, run_verify, CliError, FieldChoice, ReportFormat, VerifyRequest, JOBS_ENV, SUITES,
};

#[derive(Parser)]
#[command(
    name = "tracelift",
    about = "Exact verification of trace-and-derivation cocycle formulas",
    version,
    after_help = suite_listing()
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one verification suite and report each check.
    Verify {
        /// Suite name; see the listing under --help.
        suite: String,
        /// Structure size for n-indexed suites (runs all defaults otherwise).
        #[arg(long)]
        n: Option<usize>,
        /// Truncation order for symbol algebras; floors sit at -ORDER.
        #[arg(long)]
        order: Option<i64>,
        /// Random samples per check.
        #[arg(long)]
        samples: Option<usize>,
        /// Seed for every random stream the suite draws.
        #[arg(long)]
        seed: Option<u64>,
        /// `rational`, `mod:P` (P prime), or `random-prime`.
        #[arg(long)]
        field: Option<String>,
        /// Worker threads (default: $TRACELIFT_JOBS, then all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// `text` or `json-like`.
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Evaluate a formula on explicit arguments.
    Eval {
        /// `psi3`, `psi5`, `psi-tilde-I`, `psi0`, or a schema file.
        formula: String,
        /// Inline `a;b;c` or a file (prefix with @ to force), one per line.
        #[arg(long)]
        args: Option<String>,
        /// `rational`, `mod:P` (P prime), or `random-prime`.
        #[arg(long)]
        field: Option<String>,
        /// Truncation order; computed from the arguments when omitted.
        #[arg(long)]
        order: Option<i64>,
    },
    /// Print the schema listing of the generated (2n+1)-argument formula.
    Generate {
        #[arg(long)]
        n: usize,
    },
}

fn suite_listing() -> String {
    let mut out = String::from("Suites:\n");
    for s in SUITES {
        let opt = if s.opt_in { " (opt-in)" } else { "" };
        out.push_str(&format!("  {:<16} {}{}\n", s.name, s.about, opt));
    }
    out
}

fn parse_field(text: Option<&str>) -> Result<Option<FieldChoice>, CliError> {
    text.map(FieldChoice::parse).transpose()
}

fn resolve_jobs(flag: Option<usize>) -> (usize, &'static str) {
    if let Some(j) = flag {
        return (j.max(1), "flag");
    }
    if let Ok(text) = std::env::var(JOBS_ENV) {
        if let Ok(j) = text.trim().parse::<usize>() {
            if j >= 1 {
                return (j, "env");
            }
        }
    }
    let auto = std::thread::available_parallelism()
        .map(usize::from)
        .unwrap_or(1);
    (auto, "auto")
}

fn usage_exit(e: &CliError) -> bool {
    matches!(
        e,
        CliError::UnknownSuite(_)
            | CliError::UnknownFormat(_)
            | CliError::BadField(_)
            | CliError::Usage(_)
    )
}

fn run() -> Result<bool, CliError> {
    match Cli::parse().cmd {
        Cmd::Verify {
            suite,
            n,
            order,
            samples,
            seed,
            field,
            jobs,
            format,
        } => {
            let format = ReportFormat::parse(&format)?;
            let field = parse_field(field.as_deref())?;
            let jobs = resolve_jobs(jobs);
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.0)
                .build_global();
            let req = VerifyRequest {
                suite,
                n,
                order,
                samples,
                seed,
                field,
            };
            let outcome = run_verify(&req, jobs)?;
            print!("{}", render(&outcome, format));
            Ok(outcome.all_passed())
        }
        Cmd::Eval {
            formula,
            args,
            field,
            order,
        } => {
            let req = EvalRequest {
                formula,
                args,
                field: parse_field(field.as_deref())?,
                order,
            };
            println!("{}", run_eval(&req)?);
            Ok(true)
        }
        Cmd::Generate { n } => {
            print!("{}", run_generate(n)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if usage_exit(&e) { 2 } else { 1 })
        }
    }
}
