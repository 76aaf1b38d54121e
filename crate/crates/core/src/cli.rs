//! Scenario files, command dispatch and artifact writing for the `degenctl` binary.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or a numerical failure, 2 on a
//! usage or parse error.

mod commands;
mod output;
mod scenario;

pub use commands::{
    cmd_control, cmd_sweep, cmd_validate, cmd_verify, compute_control, ControlMode, ControlOutput, SweepParam, VERIFY_CHECKS,
};
pub use output::{field_csv, write_json, write_text};
pub use scenario::{
    locate_key, CoefficientSpec, GridSpec, InitialSpec, KernelSpec, ParseError, Scenario, SolverSpec, VerifySpec,
};

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Fail = 1,
    Usage = 2,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_passed(passed: bool) -> Self {
        if passed {
            Exit::Pass
        } else {
            Exit::Fail
        }
    }
}
