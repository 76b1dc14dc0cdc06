// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("unstable confinement: {0}")]
    UnstableConfinement(String),

    #[error(
        "equilibrium solver did not converge after {iterations} iterations \
         (gradient norm {gradient_norm:.3e}, energy {energy:.9e})"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        energy: f64,
    },

    #[error("mode {mode} is dynamically unstable (eigenvalue {eigenvalue:.3e})")]
    UnstableMode { mode: usize, eigenvalue: f64 },

    #[error("parametric drive at or above threshold: |delta| = {delta:.6e} <= |g A| = {drive:.6e}")]
    AboveThreshold { delta: f64, drive: f64 },

    #[error("detuning is zero")]
    ZeroDetuning,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("layer assignment failed: {0}")]
    LayerAssignment(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(context: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line driver.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 2 | invalid or unreadable configuration |
    /// | 3 | file system error |
    /// | 4 | unstable confinement or mode |
    /// | 5 | parametric drive at or above threshold, or zero detuning |
    /// | 6 | equilibrium solver did not converge |
    /// | 7 | unsupported analysis |
    /// | 1 | anything else |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig { .. } | Error::Parse { .. } => 2,
            Error::Io(_) => 3,
            Error::UnstableConfinement(_) | Error::UnstableMode { .. } => 4,
            Error::AboveThreshold { .. } | Error::ZeroDetuning => 5,
            Error::NonConvergence { .. } => 6,
            Error::Unsupported(_) => 7,
            Error::DimensionMismatch(_) | Error::IndexOutOfRange(_) | Error::LayerAssignment(_) | Error::Numerical(_) => 1,
        }
    }
}
