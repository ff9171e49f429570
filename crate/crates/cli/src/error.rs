use std::fmt;

use fsle::backbone::BackboneError;
use fsle::distill::DistillError;
use fsle::energy::EnergyError;
use fsle::fewshot::FewShotError;
use fsle::io::FormatError;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const FORMAT: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const NUMERICAL: i32 = 6;
    pub const INSUFFICIENT_DATA: i32 = 7;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(exit::USAGE, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(exit::CONFIG, message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new(exit::IO, format!("{}: {err}", path.display()))
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let code = match e {
            FormatError::Io { .. } => exit::IO,
            _ => exit::FORMAT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        let code = match e {
            EnergyError::UnknownHeader(_)
            | EnergyError::MalformedRow { .. }
            | EnergyError::NonMonotoneTimestamp { .. } => exit::FORMAT,
            EnergyError::EmptyTrace | EnergyError::EmptyWindow { .. } => exit::INSUFFICIENT_DATA,
            EnergyError::WindowOutOfRange { .. } | EnergyError::InvalidArgument(_) => exit::CONFIG,
            EnergyError::Inference(_) => exit::NUMERICAL,
        };
        Self::new(code, e.to_string())
    }
}

impl From<FewShotError> for CliError {
    fn from(e: FewShotError) -> Self {
        let code = match e {
            FewShotError::EmptyClass { .. }
            | FewShotError::NoPrototypes
            | FewShotError::InsufficientClasses { .. }
            | FewShotError::InsufficientData { .. } => exit::INSUFFICIENT_DATA,
            FewShotError::DimensionMismatch { .. }
            | FewShotError::InvalidParameter { .. }
            | FewShotError::Pool(_) => exit::CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DistillError> for CliError {
    fn from(e: DistillError) -> Self {
        let code = match e {
            DistillError::Diverged { .. } => exit::NUMERICAL,
            DistillError::EmptyDataset => exit::INSUFFICIENT_DATA,
            _ => exit::CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

impl From<BackboneError> for CliError {
    fn from(e: BackboneError) -> Self {
        Self::new(exit::CONFIG, e.to_string())
    }
}
