// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Gain in the presence of the counter-rotating frequency shift.
//!
//! The `4 mu` part of the parametric drive shifts the mode by
//! `-G^2 / (4 mu)` in `H_F`, so a bare detuning `delta` acts as
//! `delta + G^2 / (4 mu)`. Without compensation the detuning is chosen from
//! the ideal relation `delta' = sqrt(delta^2 - g^2)`; with compensation it is
//! lowered by `G^2 / (4 mu)` so that the physical effective detuning is `delta'`.

use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::error::{Error, Result};

/// One evaluated gain point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    /// Detuning applied to the drive, rad/s.
    pub delta_set: f64,
    /// Detuning including the counter-rotating shift, rad/s.
    pub delta_shifted: f64,
    /// Amplification `exp(-2r)`.
    pub gain: f64,
}

/// Gain `exp(-2r)` for target effective detuning `delta_eff_target`,
/// coupling `g = g_nn |A_nn|` and drive frequency `mu` (all rad/s), assuming
/// `G^2 = g^2`.
pub fn gain_with_cr(delta_eff_target: f64, g: f64, mu: f64, compensated: bool) -> Result<GainPoint> {
    gain_with_cr_general(delta_eff_target, g, g * g, mu, compensated)
}

/// As [`gain_with_cr`] with an explicit `G^2`.
pub fn gain_with_cr_general(delta_eff_target: f64, g: f64, g_sq: f64, mu: f64, compensated: bool) -> Result<GainPoint> {
    if !(delta_eff_target.is_finite() && delta_eff_target > 0.0) {
        return Err(Error::config("delta_eff", "target effective detuning must be positive"));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::config("mu", "must be positive"));
    }
    let g = g.abs();
    let shift = g_sq / (4.0 * mu);
    let ideal = (delta_eff_target * delta_eff_target + g * g).sqrt();
    let delta_set = if compensated { ideal - shift } else { ideal };
    let delta_shifted = delta_set + shift;
    if delta_shifted <= g {
        return Err(Error::AboveThreshold {
            delta: delta_shifted,
            drive: g,
        });
    }
    Ok(GainPoint {
        delta_set,
        delta_shifted,
        gain: ((delta_shifted + g) / (delta_shifted - g)).sqrt(),
    })
}

/// One row of a gain-versus-coupling table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub g_over_2pi_hz: f64,
    pub tau_s: f64,
    pub gain_uncompensated: f64,
    pub gain_compensated: f64,
}

/// Gain table over decoupling times `tau` (s, with `delta' = 2 pi / tau`)
/// and couplings `g / 2 pi` (Hz) at drive frequency `mu` (rad/s).
pub fn gain_table(mu: f64, taus: &[f64], g_hz: &[f64]) -> Result<Vec<GainRow>> {
    let mut rows = Vec::with_capacity(taus.len() * g_hz.len());
    for &tau in taus {
        if !(tau > 0.0) {
            return Err(Error::config("floquet.tau_s", "decoupling times must be positive"));
        }
        for &gh in g_hz {
            let d = TWO_PI / tau;
            let g = TWO_PI * gh;
            rows.push(GainRow {
                g_over_2pi_hz: gh,
                tau_s: tau,
                gain_uncompensated: gain_with_cr(d, g, mu, false)?.gain,
                gain_compensated: gain_with_cr(d, g, mu, true)?.gain,
            });
        }
    }
    Ok(rows)
}

/// Reference gain marker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub g_over_2pi_hz: f64,
    pub tau_s: f64,
    pub gain: f64,
}

/// Comparison of a model curve with reference markers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayReport {
    pub compensated: bool,
    pub rows: Vec<OverlayRow>,
    pub max_relative_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub g_over_2pi_hz: f64,
    pub tau_s: f64,
    pub gain_reference: f64,
    pub gain_model: f64,
    pub relative_residual: f64,
}

/// Evaluates the model at every reference marker.
pub fn overlay(mu: f64, reference: &[ReferencePoint], compensated: bool) -> Result<OverlayReport> {
    let mut rows = Vec::with_capacity(reference.len());
    let mut worst = 0.0_f64;
    for p in reference {
        if !(p.tau_s > 0.0) {
            return Err(Error::config("reference.tau_s", "must be positive"));
        }
        let model = gain_with_cr(TWO_PI / p.tau_s, TWO_PI * p.g_over_2pi_hz, mu, compensated)?.gain;
        let rel = (model - p.gain).abs() / p.gain.abs();
        worst = worst.max(rel);
        rows.push(OverlayRow {
            g_over_2pi_hz: p.g_over_2pi_hz,
            tau_s: p.tau_s,
            gain_reference: p.gain,
            gain_model: model,
            relative_residual: rel,
        });
    }
    Ok(OverlayReport {
        compensated,
        rows,
        max_relative_residual: worst,
    })
}
