//! Exit-code policy and the machine-readable error record.
//!
//! * 0 — requested computation completed and all hard invariants held
//! * 1 — an invariant was violated during the computation
//! * 2 — configuration, usage, or I/O problem (nothing was computed)

use grabi_core::Error as CoreError;

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: "config", message: message.into(), exit_code: 2 }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { kind: "io", message: message.into(), exit_code: 2 }
    }

    /// JSON record written to stderr.
    pub fn record(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind, "message": self.message, "exit_code": self.exit_code }
        })
        .to_string()
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let (kind, exit_code) = match &e {
            // problems with the requested inputs
            CoreError::InvalidTruncation(_)
            | CoreError::InvalidParameter(_)
            | CoreError::DimensionMismatch(_)
            | CoreError::TruncationTooSmall(_)
            | CoreError::DimensionOverflow { .. }
            | CoreError::OffSusyLine { .. }
            | CoreError::UninformativeInitialState(_) => ("config", 2),
            // violated invariants of the computation itself
            CoreError::NonHermitian { .. }
            | CoreError::UnsortedSpectrum
            | CoreError::AmbiguousZeroCluster(_)
            | CoreError::DefectiveZeroCluster { .. }
            | CoreError::DisconnectedLevel { .. }
            | CoreError::MethodDisagreement { .. }
            | CoreError::IllConditionedKernel(_)
            | CoreError::EigenFailure(_)
            | CoreError::InvariantViolation(_) => ("invariant", 1),
        };
        Self { kind, message: e.to_string(), exit_code }
    }
}
