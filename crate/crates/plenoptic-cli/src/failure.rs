//! Error classes that decide the process exit code.

use std::fmt;

pub type Result<T> = anyhow::Result<T>;

/// Exit status for unreadable inputs, unwritable outputs and bad configuration.
pub const EXIT_IO: i32 = 2;
/// Exit status for failures inside a processing stage.
pub const EXIT_PROCESSING: i32 = 1;

/// A file, format or configuration problem, as opposed to a processing failure.
#[derive(Debug)]
pub struct IoFailure(pub String);

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for IoFailure {}

pub fn io_failure(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(IoFailure(msg.into()))
}

pub trait IoContext<T> {
    /// Tags the error as an IO/config failure described by `what`.
    fn io(self, what: impl fmt::Display) -> Result<T>;
}

impl<T, E: fmt::Display> IoContext<T> for std::result::Result<T, E> {
    fn io(self, what: impl fmt::Display) -> Result<T> {
        self.map_err(|e| io_failure(format!("{what}: {e}")))
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<IoFailure>()) {
        EXIT_IO
    } else {
        EXIT_PROCESSING
    }
}
