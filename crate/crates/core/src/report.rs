use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<u32>>,
}

impl CheckResult {
    pub(crate) fn pass(name: &str, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), passed: true, detail: detail.into(), witness: None }
    }

    pub(crate) fn fail(name: &str, detail: impl Into<String>, witness: Option<Vec<u32>>) -> Self {
        CheckResult { name: name.into(), passed: false, detail: detail.into(), witness }
    }

    pub(crate) fn from_bool(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), passed, detail: detail.into(), witness: None }
    }
}

/// Renders `[pass]`/`[FAIL]` lines for a list of checks.
pub fn render_checks(checks: &[CheckResult]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

pub fn all_passed(checks: &[CheckResult]) -> bool {
    checks.iter().all(|c| c.passed)
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "pass" } else { "FAIL" };
        write!(f, "[{mark}] {}: {}", self.name, self.detail)?;
        if let Some(w) = &self.witness {
            write!(f, " (witness {w:?})")?;
        }
        Ok(())
    }
}
