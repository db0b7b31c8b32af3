use std::fmt;

use bfmix_core::io::IoError;
use bfmix_core::postprocess::PostprocessError;
use bfmix_core::sampler::SamplerError;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_SAMPLER: u8 = 4;
pub const EXIT_IDENTIFY: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Config(_) | SamplerError::Model(_) => CliError::config(e.to_string()),
            SamplerError::AtIteration { iter, source } => CliError::new(
                EXIT_SAMPLER,
                format!("sampler failed at iteration {iter}: {source}"),
            ),
            other => CliError::new(EXIT_SAMPLER, format!("sampler failed: {other}")),
        }
    }
}

impl From<PostprocessError> for CliError {
    fn from(e: PostprocessError) -> Self {
        match e {
            PostprocessError::LengthMismatch { left, right } => {
                CliError::input(format!("row count mismatch: {left} vs {right}"))
            }
            other => CliError::new(EXIT_IDENTIFY, other.to_string()),
        }
    }
}
