//! Report documents written by `run` and `probe`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;

pub const REPORT_SCHEMA: &str = "cpkernel.report/v1";
pub const PROBE_SCHEMA: &str = "cpkernel.probe/v1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TASK_ERROR: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        Self { code: e.code().to_owned(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Self { name: name.into(), passed, detail: None }
    }

    pub fn with_detail(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: Some(detail.into()) }
    }

    /// `value ≤ limit`, with both numbers in the detail.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::with_detail(name, value <= limit, format!("{value:e} ≤ {limit:e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    /// Failed with the error code named in the task's `expect` block.
    ExpectedError,
    Error,
    AssertionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub index: usize,
    pub op: String,
    pub status: TaskStatus,
    pub result: Option<Value>,
    pub error: Option<ErrorInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Invalid,
    TaskError,
    AssertionFailed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => EXIT_OK,
            RunStatus::Invalid => EXIT_INVALID,
            RunStatus::TaskError => EXIT_TASK_ERROR,
            RunStatus::AssertionFailed => EXIT_ASSERTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub seed: u64,
    pub status: RunStatus,
    pub exit_code: i32,
    /// Present when the scenario itself was rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Value>,
    /// Contractivity certificate of the scenario's maps on its kernel, or
    /// `null` when the kernel admits no Kolmogorov factor.
    pub certificate: Option<Value>,
    pub tasks: Vec<TaskReport>,
    /// Wall-clock milliseconds per task; only written on request since it
    /// breaks byte-for-byte reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Vec<f64>>,
}

impl Report {
    pub fn invalid(err: &Error) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_owned(),
            scenario: None,
            seed: 0,
            status: RunStatus::Invalid,
            exit_code: EXIT_INVALID,
            error: Some(err.into()),
            tolerances: None,
            certificate: None,
            tasks: Vec::new(),
            timing: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
