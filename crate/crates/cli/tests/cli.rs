//! End-to-end runs of the installed binary: flag handling, output shape,
//! exit codes, determinism, and the documented example invocations.

use std::process::{Command, Output};

fn tracelift(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tracelift"));
    cmd.args(args);
    cmd
}

fn output(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should spawn")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = output(&mut tracelift(args));
    assert!(
        out.status.success(),
        "`tracelift {}` failed:\n{}{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn value_line(text: &str) -> &str {
    text.lines()
        .find(|l| l.starts_with("value: "))
        .expect("eval output has a value line")
}

#[test]
fn generate_two_pairs_is_the_five_term_listing() {
    let text = stdout_ok(&["generate", "--n", "2"]);
    let expected = "1 * D1[A1] D2[A2] D3[A3] D4[A4] A5\n\
                    1 * A1 Q12 A2 D3[A3] D4[A4] A5\n\
                    1 * D1[A1] A2 Q23 A3 D4[A4] A5\n\
                    1 * D1[A1] D2[A2] A3 Q34 A4 A5\n\
                    1 * A1 Q12 A2 A3 Q34 A4 A5\n";
    assert_eq!(text, expected);
}

#[test]
fn generated_listing_evaluates_like_the_builtin() {
    let listing = stdout_ok(&["generate", "--n", "2"]);
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("five.schemas");
    std::fs::write(&path, listing).expect("write schema file");

    let args = "+ 1;+ 1 x1^1;+ 1 x2^1;+ 1 d1^1;+ 1 d2^1";
    let from_file = stdout_ok(&["eval", path.to_str().unwrap(), "--args", args]);
    let builtin = stdout_ok(&["eval", "psi5", "--args", args]);
    assert_eq!(value_line(&from_file), value_line(&builtin));
    assert_ne!(value_line(&builtin), "value: 0");
}

#[test]
fn eval_psi3_pinned_value() {
    let text = stdout_ok(&["eval", "psi3", "--args", "+ 1;+ 1 x1^1;+ 1 d1^1"]);
    assert_eq!(value_line(&text), "value: -3");
}

#[test]
fn eval_psi5_repeated_argument_vanishes() {
    let text = stdout_ok(&[
        "eval",
        "psi5",
        "--args",
        "+ 1;+ 1 x1^1;+ 1 x1^1;+ 1 d1^1;+ 1 d2^1",
    ]);
    assert_eq!(value_line(&text), "value: 0");
}

#[test]
fn eval_psi0_distinguished_value() {
    let text = stdout_ok(&["eval", "psi0", "--args", "+ 1;+ 1 p1^1;+ 1 q1^1"]);
    assert_eq!(value_line(&text), "value: 1");
}

#[test]
fn eval_arguments_from_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("args.txt");
    std::fs::write(&path, "# three operators, one per line\n+ 1\n\n+ 1 x1^1\n+ 1 d1^1\n")
        .expect("write args file");
    let text = stdout_ok(&["eval", "psi3", "--args", path.to_str().unwrap()]);
    assert_eq!(value_line(&text), "value: -3");
}

#[test]
fn unknown_suite_exits_with_usage_code() {
    let out = output(&mut tracelift(&["verify", "no-such-suite"]));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown suite"), "stderr was: {err}");
}

#[test]
fn unknown_format_exits_with_usage_code() {
    let out = output(&mut tracelift(&["verify", "lemma-1.1", "--format", "yaml"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_field_exits_with_usage_code() {
    // 91 is composite, so `mod:91` must be rejected up front.
    let out = output(&mut tracelift(&["verify", "lemma-1.1", "--field", "mod:91"]));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad field"), "stderr was: {err}");
}

#[test]
fn order_flag_is_honored_and_printed() {
    let text = stdout_ok(&["verify", "lemma-1.1", "--order", "6"]);
    assert!(text.contains("order = 6 (flag)"), "output was: {text}");
    assert!(text.contains("result: 2 passed, 0 failed, 0 errors"));
}

#[test]
fn order_rejected_on_exact_suites() {
    let out = output(&mut tracelift(&["verify", "lemma-2.5", "--order", "4"]));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("takes no --order"), "stderr was: {err}");
}

#[test]
fn json_like_lines_all_parse() {
    let text = stdout_ok(&["verify", "lemma-2.8", "--format", "json-like"]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 5, "expected config + reports + summary");
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).expect("line parses as json");
        assert!(v.is_object());
    }
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(first.get("config").is_some());
    let last: serde_json::Value = serde_json::from_str(lines[lines.len() - 1]).unwrap();
    assert_eq!(last["summary"]["passed"], 3);
    assert_eq!(last["summary"]["failed"], 0);
}

#[test]
fn reruns_are_identical_apart_from_runtimes() {
    let strip = |text: String| -> Vec<serde_json::Value> {
        text.lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).expect("json line");
                if let Some(obj) = v.as_object_mut() {
                    obj.remove("millis");
                }
                v
            })
            .collect()
    };
    let a = strip(stdout_ok(&["verify", "lemma-1.1", "--format", "json-like", "--seed", "7"]));
    let b = strip(stdout_ok(&["verify", "lemma-1.1", "--format", "json-like", "--seed", "7"]));
    assert_eq!(a, b);
}

#[test]
fn jobs_env_is_honored() {
    let out = output(
        tracelift(&["verify", "lemma-2.8", "--n", "1"]).env("TRACELIFT_JOBS", "3"),
    );
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("jobs = 3 (env)"), "output was: {text}");
}

#[test]
fn jobs_flag_beats_env() {
    let out = output(
        tracelift(&["verify", "lemma-2.8", "--n", "1", "--jobs", "2"])
            .env("TRACELIFT_JOBS", "5"),
    );
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("jobs = 2 (flag)"), "output was: {text}");
}

#[test]
fn field_override_priced_into_report() {
    let text = stdout_ok(&["verify", "thm-1.5", "--samples", "1", "--field", "mod:1009"]);
    assert!(text.contains("field = mod:1009 (flag)"), "output was: {text}");
}

#[test]
fn conjecture_smoke_resumes_from_checkpoint() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("ckpt.json");
    let args = [
        "verify",
        "conjecture-n3",
        "--n",
        "1",
        "--samples",
        "1",
        "--order",
        "6",
        "--seed",
        "11",
    ];

    let first = output(tracelift(&args).env("TRACELIFT_CHECKPOINT", &path));
    assert!(
        first.status.success(),
        "first run failed: {}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(path.exists(), "checkpoint file written");
    let ckpt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    // n = 1 means 4-tuples: 6 argument pairs per tuple and field.
    assert_eq!(ckpt["partials"].as_object().unwrap().len(), 12);

    let second = output(tracelift(&args).env("TRACELIFT_CHECKPOINT", &path));
    assert!(second.status.success());
    assert_eq!(
        String::from_utf8_lossy(&first.stdout).replace(char::is_numeric, ""),
        String::from_utf8_lossy(&second.stdout).replace(char::is_numeric, ""),
    );
    let err = String::from_utf8_lossy(&second.stderr);
    assert!(
        err.contains("came from the checkpoint"),
        "second run did not resume: {err}"
    );
}
