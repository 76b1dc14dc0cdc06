// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Counter-rotating terms and their high-frequency treatment.
//!
//! In the frame rotating at the drive frequency the full Hamiltonian is
//! `H(t) = sum_l H_l exp(i l mu t)` with `|l| <= 4`. To leading order in
//! `1 / mu` the stroboscopic dynamics is generated by
//!
//! ```text
//! H_F = H_0 + sum_{l > 0} [H_l, H_-l] / (l mu)
//! ```
//!
//! [`harmonics`] assembles the `H_l`, [`corrections`] evaluates the
//! commutators, [`gain`] turns the resulting frequency shift into gain
//! curves and [`oracle`] propagates the exact dynamics over one period.

pub mod corrections;
pub mod gain;
pub mod harmonics;
pub mod oracle;

pub use corrections::{floquet_corrections, FloquetCorrections, OperatorSum};
pub use gain::{gain_table, gain_with_cr, gain_with_cr_general, overlay, GainPoint, GainRow, OverlayReport, OverlayRow, ReferencePoint};
pub use harmonics::{decompose_harmonics, HarmonicDecomposition, HarmonicTerm, ModeModel};
pub use oracle::{oracle_gain_reference, quadratic_frequencies, symplectic_oracle, OracleOptions, OracleResult};
