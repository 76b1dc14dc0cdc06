// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Spin-dependent force drives and parametric drive parameters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::normal_modes::{Axis, ModeSpectrum};
use crate::trap_model::CrystalEquilibrium;

/// Kind of spin-dependent force.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdfKind {
    /// Light-shift gate, `F0 cos(dk z - mu t) sigma_z`.
    LightShift,
    /// Phase-insensitive Molmer-Sorensen gate, `Omega dk z sin(mu t + phi) sigma_x`.
    MsPhaseInsensitive,
    /// Phase-sensitive Molmer-Sorensen gate, `Omega dk z cos(mu t) sigma_x`.
    MsPhaseSensitive,
}

/// Pauli axis that carries the spin-motion coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SdfKind {
    /// Axis of the Ising interaction generated by this gate.
    pub fn coupling_axis(self) -> SpinAxis {
        match self {
            SdfKind::LightShift => SpinAxis::Z,
            SdfKind::MsPhaseInsensitive | SdfKind::MsPhaseSensitive => SpinAxis::X,
        }
    }
}

/// Spin-dependent force parameters in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdfSpec {
    pub kind: SdfKind,
    /// `F0` in newtons for the light-shift gate, `Omega_eff` in rad/s for
    /// the Molmer-Sorensen gates.
    pub strength: f64,
    /// Wavevector difference in rad/m, taken along the axial direction.
    pub delta_k: f64,
    /// Drive frequency `mu` in rad/s.
    pub mu: f64,
    /// Index of the target mode in the spectrum.
    pub target_mode: usize,
    /// Global drive phase added to every ion, in radians.
    pub phase_offset: f64,
}

impl SdfSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::config("sdf.strength", "must be non-negative and finite"));
        }
        if !self.delta_k.is_finite() || self.delta_k == 0.0 {
            return Err(Error::config("sdf.delta_k", "must be finite and non-zero"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::config("sdf.mu", "must be positive and finite"));
        }
        if !self.phase_offset.is_finite() {
            return Err(Error::config("sdf.phase_offset", "must be finite"));
        }
        Ok(())
    }
}

/// Parametric drive `Omega_p cos(2 mu t - theta) sum_j (z_j^2 - (x_j^2 + y_j^2) / 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaDriveSpec {
    /// Drive strength in rad s^-1 m^-2.
    pub omega_p: f64,
    /// Drive phase in radians.
    pub theta: f64,
}

impl PaDriveSpec {
    /// Strength that yields the coupling `g = Omega_p l_n^2` on a mode with
    /// zero-point length `l` (metres).
    pub fn for_coupling(g: f64, l: f64, theta: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::config("pa.g_target", "target mode has zero length"));
        }
        Ok(PaDriveSpec {
            omega_p: g / (l * l),
            theta,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_p.is_finite() {
            return Err(Error::config("pa.omega_p", "must be finite"));
        }
        if !self.theta.is_finite() {
            return Err(Error::config("pa.theta", "must be finite"));
        }
        Ok(())
    }
}

/// Per-ion SDF phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonDrivePhases {
    /// Phases `phi_j` that enter the dynamics, in radians.
    pub phases: Vec<f64>,
    /// Phases `phase_offset - dk z_j` before any gate-specific override.
    pub raw_phases: Vec<f64>,
    pub kind: SdfKind,
}

/// Derives the phases `phi_j = phase_offset - dk z_j`. The phase-sensitive
/// gate operates with all `phi_j = 0`; its raw phases are kept for reference.
pub fn derive_phases(eq: &CrystalEquilibrium, sdf: &SdfSpec) -> Result<IonDrivePhases> {
    sdf.validate()?;
    let raw: Vec<f64> = eq.z().iter().map(|z| sdf.phase_offset - sdf.delta_k * z).collect();
    let phases = match sdf.kind {
        SdfKind::MsPhaseSensitive => vec![0.0; raw.len()],
        SdfKind::LightShift | SdfKind::MsPhaseInsensitive => raw.clone(),
    };
    Ok(IonDrivePhases {
        phases,
        raw_phases: raw,
        kind: sdf.kind,
    })
}

/// Spin-motion coupling strengths `f_n` in rad/s for every mode.
///
/// Light shift: `f_n = F0 l_n / (2 hbar)`. Molmer-Sorensen:
/// `f_n = Omega dk l_n / 2`.
pub fn mode_coupling_strengths(sdf: &SdfSpec, spectrum: &ModeSpectrum) -> Vec<f64> {
    let prefactor = match sdf.kind {
        SdfKind::LightShift => sdf.strength / (2.0 * HBAR),
        SdfKind::MsPhaseInsensitive | SdfKind::MsPhaseSensitive => sdf.strength * sdf.delta_k / 2.0,
    };
    spectrum.zero_point_lengths.iter().map(|l| prefactor * l).collect()
}

/// Lamb-Dicke parameter `dk max_n l_n` over the non-zero modes.
pub fn lamb_dicke_ratio(sdf: &SdfSpec, spectrum: &ModeSpectrum) -> f64 {
    let lmax = spectrum.zero_point_lengths.iter().fold(0.0_f64, |m, v| m.max(*v));
    (sdf.delta_k * lmax).abs()
}

/// Resonant spin-motion coefficients `c_jn = f_n u_n^z(j) exp(i phi_j)` in
/// rad/s, the coefficient of `a_n sigma_j` after the rotating-wave
/// approximation. The phase-insensitive gate is written with the same cosine
/// convention so that its global drive phase lives in `phase_offset`.
pub fn rwa_spin_motion_coefficients(
    sdf: &SdfSpec,
    spectrum: &ModeSpectrum,
    phases: &IonDrivePhases,
) -> Result<Vec<Vec<Complex64>>> {
    if phases.phases.len() != spectrum.n_ions {
        return Err(Error::DimensionMismatch("phases vs ions".into()));
    }
    let f = mode_coupling_strengths(sdf, spectrum);
    Ok((0..spectrum.n_ions)
        .map(|j| {
            let e = Complex64::from_polar(1.0, phases.phases[j]);
            (0..spectrum.n_modes())
                .map(|n| spectrum.u(n, j, Axis::Z) * e * f[n])
                .collect()
        })
        .collect())
}
