// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Configuration files, artefact formats and end-to-end runs.

pub mod config;
pub mod export;
pub mod run;

pub use config::{load_config, parse_grid, ConfigFile, LoadedConfig};
pub use run::{run, Analysis, Manifest, RunOptions, RunReport};
