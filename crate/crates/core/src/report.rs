//! Structured pass/fail records.
//!
//! Every checker returns [`CheckReport`]s rather than panicking: a verifier
//! run is a batch of checks whose outcomes, witnesses, and reproduction
//! parameters (seed, field, floor) are reported together.  Reruns with the
//! same configuration produce identical records except for `millis`.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check could not be carried out (e.g. insufficient precision
    /// floor); distinct from a counterexample.
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub status: CheckStatus,
    pub seed: u64,
    pub field: String,
    pub floor: String,
    pub witness: Option<String>,
    pub millis: u128,
}

impl CheckReport {
    pub fn pass(check: impl Into<String>) -> Self {
        CheckReport {
            check: check.into(),
            status: CheckStatus::Pass,
            seed: 0,
            field: String::new(),
            floor: String::new(),
            witness: None,
            millis: 0,
        }
    }

    pub fn fail(check: impl Into<String>, witness: impl Into<String>) -> Self {
        CheckReport {
            witness: Some(witness.into()),
            status: CheckStatus::Fail,
            ..CheckReport::pass(check)
        }
    }

    pub fn error(check: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckReport {
            witness: Some(detail.into()),
            status: CheckStatus::Error,
            ..CheckReport::pass(check)
        }
    }

    pub fn with_context(mut self, seed: u64, field: &str, floor: &str) -> Self {
        self.seed = seed;
        self.field = field.to_string();
        self.floor = floor.to_string();
        self
    }

    pub fn with_millis(mut self, millis: u128) -> Self {
        self.millis = millis;
        self
    }

    /// Attaches a note to a non-failing report, e.g. a solved constant.
    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = Some(witness.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    /// One fixed-shape text record per check.
    pub fn text_line(&self) -> String {
        let status = match self.status {
            CheckStatus::Pass => "PASS ",
            CheckStatus::Fail => "FAIL ",
            CheckStatus::Error => "ERROR",
        };
        let mut line = format!(
            "{status} {check}  seed={seed} field={field} floor={floor}",
            check = self.check,
            seed = self.seed,
            field = if self.field.is_empty() { "-" } else { &self.field },
            floor = if self.floor.is_empty() { "-" } else { &self.floor },
        );
        if let Some(w) = &self.witness {
            line.push_str(&format!(" witness={w}"));
        }
        line.push_str(&format!(" ({} ms)", self.millis));
        line
    }
}
