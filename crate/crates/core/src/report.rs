//! Check reports shared by the suites and the command-line front end.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// A negative control that failed, as it should.
    ExpectedFail,
    /// A negative control that did not fail.
    UnexpectedPass,
    /// The check could not be evaluated (error text in `detail`).
    Error,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::ExpectedFail => "XFAIL",
            Status::UnexpectedPass => "XPASS",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub negative_control: bool,
    pub status: Status,
    pub detail: serde_json::Value,
}

impl CheckReport {
    /// A check that passes when `max_deviation ≤ tolerance`.
    pub fn bound(name: impl Into<String>, samples: usize, max_deviation: f64, tolerance: f64) -> CheckReport {
        let status = if max_deviation <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        CheckReport {
            name: name.into(),
            samples,
            max_deviation,
            tolerance,
            negative_control: false,
            status,
            detail: serde_json::Value::Null,
        }
    }

    /// A negative control: expected to exceed `factor × tolerance`.
    pub fn control(
        name: impl Into<String>,
        samples: usize,
        max_deviation: f64,
        tolerance: f64,
        factor: f64,
    ) -> CheckReport {
        let status = if max_deviation > factor * tolerance {
            Status::ExpectedFail
        } else {
            Status::UnexpectedPass
        };
        CheckReport {
            name: name.into(),
            samples,
            max_deviation,
            tolerance,
            negative_control: true,
            status,
            detail: serde_json::Value::Null,
        }
    }

    pub fn error(name: impl Into<String>, err: &crate::Error) -> CheckReport {
        CheckReport {
            name: name.into(),
            samples: 0,
            max_deviation: f64::NAN,
            tolerance: f64::NAN,
            negative_control: false,
            status: Status::Error,
            detail: serde_json::Value::String(err.to_string()),
        }
    }

    pub fn with_detail<T: Serialize>(mut self, detail: &T) -> CheckReport {
        self.detail = serde_json::to_value(detail).unwrap_or(serde_json::Value::Null);
        self
    }

    /// Counts toward the exit code.
    pub fn ok(&self) -> bool {
        if self.negative_control {
            self.status != Status::Error
        } else {
            self.status == Status::Pass
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub command: String,
    pub metric: String,
    pub config: RunConfig,
    pub checks: Vec<CheckReport>,
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(CheckReport::ok)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_ok() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per check, the same fields as the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} on {} ({:.1} s)", self.command, self.metric, self.wall_time_s);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<5} {:<44} samples={:<5} max={:<12.4e} tol={:.1e}",
                c.status.label(),
                c.name,
                c.samples,
                c.max_deviation,
                c.tolerance
            );
            if c.status == Status::Error {
                if let serde_json::Value::String(s) = &c.detail {
                    let _ = writeln!(out, "      {s}");
                }
            }
        }
        let _ = writeln!(out, "exit code {}", self.exit_code());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_controls_do_not_set_the_exit_code() {
        let mut r = SuiteReport {
            command: "t".into(),
            metric: "m".into(),
            config: RunConfig::default(),
            checks: vec![
                CheckReport::bound("a", 1, 0.0, 1e-9),
                CheckReport::control("b", 1, 1.0, 1e-6, 10.0),
            ],
            wall_time_s: 0.0,
        };
        assert_eq!(r.exit_code(), 0);
        r.checks.push(CheckReport::control("c", 1, 0.0, 1e-6, 10.0));
        assert_eq!(r.checks[2].status, Status::UnexpectedPass);
        assert_eq!(r.exit_code(), 0);
        r.checks.push(CheckReport::bound("d", 1, 1.0, 1e-9));
        assert_eq!(r.exit_code(), 1);
        assert!(r.to_text().contains("FAIL  d"));
        assert!(r.to_json().contains("\"expected-fail\""));
    }

    #[test]
    fn nan_deviation_fails() {
        assert_eq!(CheckReport::bound("x", 1, f64::NAN, 1.0).status, Status::Fail);
    }
}
