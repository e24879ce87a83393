//! Verification reports and their CSV serialization.

use crate::sbd::fmt_real;

pub const CSV_HEADER: &str = "check,lhs,rhs,budget,margin,passed,seed,detail";

/// Outcome of one inequality check `lhs <= rhs` carried out with an explicit
/// error budget added to the favourable side.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub error_budget: f64,
    /// `rhs + error_budget - lhs`
    pub margin: f64,
    pub passed: bool,
    pub seed: Option<u64>,
    pub detail: String,
}

impl VerificationReport {
    pub fn new(
        check: impl Into<String>,
        lhs: f64,
        rhs: f64,
        error_budget: f64,
        detail: impl Into<String>,
    ) -> Self {
        debug_assert!(error_budget >= 0.0);
        let margin = rhs + error_budget - lhs;
        Self {
            check: check.into(),
            lhs,
            rhs,
            error_budget,
            margin,
            passed: margin >= 0.0,
            seed: None,
            detail: detail.into(),
        }
    }

    /// Agreement check `|lhs - rhs| <= error_budget`; here the margin is
    /// `error_budget - |lhs - rhs|`.
    pub fn two_sided(
        check: impl Into<String>,
        lhs: f64,
        rhs: f64,
        error_budget: f64,
        detail: impl Into<String>,
    ) -> Self {
        let mut r = Self::new(check, lhs, rhs, error_budget, detail);
        r.margin = error_budget - (lhs - rhs).abs();
        r.passed = r.margin >= 0.0;
        r
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// One CSV record (no trailing newline). Commas and newlines in the detail
    /// text are replaced so the record stays single-line with 8 fields.
    pub fn to_csv(&self) -> String {
        let detail: String = self
            .detail
            .chars()
            .map(|c| match c {
                ',' => ';',
                '\n' | '\r' => ' ',
                c => c,
            })
            .collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.check,
            fmt_real(self.lhs),
            fmt_real(self.rhs),
            fmt_real(self.error_budget),
            fmt_real(self.margin),
            self.passed,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            detail
        )
    }
}

/// Header plus one line per report.
pub fn reports_to_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}
