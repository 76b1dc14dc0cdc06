// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Parametric amplification of spin-motion coupling in three-dimensional
//! trapped-ion crystals.
//!
//! The crate is organised bottom-up:
//!
//! * [`trap_model`] builds the effective potential of a Penning or Paul trap
//!   and finds crystal equilibria.
//! * [`normal_modes`] linearises the crystal and returns normal modes with
//!   zero-point lengths.
//! * [`drive_config`] describes the spin-dependent force and derives per-ion
//!   drive phases.
//! * [`parametric`] computes mode overlaps, the Bogoliubov squeezing solution
//!   and per-ion scale factors.
//! * [`spin_interactions`] forms the effective Ising couplings and analyses
//!   bilayer crystals.
//! * [`floquet`] handles counter-rotating terms of the full drive
//!   Hamiltonian, including an exact one-period propagator used as a check.
//! * [`io`] reads configuration files and writes analysis artefacts.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drive_config;
pub mod error;
pub mod floquet;
pub mod io;
mod minimize;
pub mod normal_modes;
pub mod parametric;
pub mod spin_interactions;
pub mod trap_model;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Physical constants in SI units (CODATA 2018).
pub mod constants {
    /// Vacuum permittivity in F/m.
    pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
    /// Reduced Planck constant in J s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Elementary charge in C.
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// Unified atomic mass unit in kg.
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    /// Mass of a 9Be+ ion in kg.
    pub const BE9_MASS: f64 = 9.012_182 * ATOMIC_MASS_UNIT;
    /// 2 pi, for Hz to rad/s conversions.
    pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
}
