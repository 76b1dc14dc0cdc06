// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Parametric amplification of a single motional mode.
//!
//! In the frame rotating at `mu` the resonant part of the drive on mode
//! `n` reads
//!
//! ```text
//! H = -delta a^dag a + (g |A| / 2) (e^{-i phi} a a + e^{i phi} a^dag a^dag)
//! ```
//!
//! with `phi = theta - arg A_nn`. The squeeze `a = cosh r b - e^{i phi} sinh r b^dag`
//! diagonalises it for `tanh 2r = -g |A| / delta`, leaving the detuning
//! `sqrt(delta^2 - g^2 |A|^2)`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive_config::{IonDrivePhases, PaDriveSpec};
use crate::error::{Error, Result};
use crate::normal_modes::{Axis, ModeSpectrum};

/// Mode overlaps of the quadrupole drive profile `z^2 - (x^2 + y^2) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrices {
    /// `A_nm = sum_j (u_n^z u_m^z - (u_n^x u_m^x + u_n^y u_m^y) / 2)`.
    pub a: DMatrix<Complex64>,
    /// `B_nm`, the same sum with the first factor conjugated.
    pub b: DMatrix<Complex64>,
    /// `g_nm = Omega_p l_n l_m` in rad/s.
    pub g: DMatrix<f64>,
}

fn axis_block(spectrum: &ModeSpectrum, axis: Axis) -> DMatrix<Complex64> {
    let n = spectrum.n_ions;
    DMatrix::from_fn(spectrum.n_modes(), n, |m, j| spectrum.u(m, j, axis))
}

/// Computes `A`, `B` and `g` for a drive of strength `pa.omega_p`.
pub fn compute_overlaps(spectrum: &ModeSpectrum, pa: &PaDriveSpec) -> OverlapMatrices {
    let ux = axis_block(spectrum, Axis::X);
    let uy = axis_block(spectrum, Axis::Y);
    let uz = axis_block(spectrum, Axis::Z);
    let half = Complex64::new(0.5, 0.0);
    let a = &uz * uz.transpose() - (&ux * ux.transpose() + &uy * uy.transpose()) * half;
    let b = uz.conjugate() * uz.transpose() - (ux.conjugate() * ux.transpose() + uy.conjugate() * uy.transpose()) * half;
    let l = &spectrum.zero_point_lengths;
    let g = DMatrix::from_fn(l.len(), l.len(), |n, m| pa.omega_p * l[n] * l[m]);
    OverlapMatrices { a, b, g }
}

impl OverlapMatrices {
    /// Off-diagonal weight `sum_{m != n} |A_nm|` of row `n`.
    pub fn off_diagonal_mass(&self, n: usize) -> f64 {
        (0..self.a.ncols()).filter(|&m| m != n).map(|m| self.a[(n, m)].norm()).sum()
    }
}

/// Squeezing parameters of the Bogoliubov transformation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovSolution {
    /// Squeezing parameter; negative values amplify the force at `theta = arg A`.
    pub r: f64,
    /// Squeezing phase `theta - arg A_nn`.
    pub phi_sq: f64,
}

fn check_below_threshold(delta: f64, g: f64, a_nn: Complex64) -> Result<f64> {
    if !(delta.is_finite() && g.is_finite() && a_nn.re.is_finite() && a_nn.im.is_finite()) {
        return Err(Error::Numerical("non-finite drive parameters".into()));
    }
    if delta == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let drive = (g * a_nn.norm()).abs();
    if delta.abs() <= drive {
        return Err(Error::AboveThreshold {
            delta: delta.abs(),
            drive,
        });
    }
    Ok(drive)
}

/// Solves for `r` and `phi_sq` such that the squeezed mode is free of
/// `b b` and `b^dag b^dag` terms.
pub fn solve_bogoliubov(delta: f64, g: f64, a_nn: Complex64, theta: f64) -> Result<BogoliubovSolution> {
    check_below_threshold(delta, g, a_nn)?;
    let x = g * a_nn.norm() / delta;
    Ok(BogoliubovSolution {
        r: -0.5 * x.atanh(),
        phi_sq: theta - a_nn.arg(),
    })
}

/// Effective detuning `sign(delta) sqrt(delta^2 - g^2 |A|^2)` in rad/s.
pub fn effective_detuning(delta: f64, g: f64, a_nn: Complex64) -> Result<f64> {
    let drive = check_below_threshold(delta, g, a_nn)?;
    Ok(delta.signum() * ((delta - drive) * (delta + drive)).abs().sqrt())
}

/// Force gain `exp(-2r)` expressed in decibels.
pub fn gain_db(r: f64) -> f64 {
    10.0 * (-2.0 * r).exp().log10()
}

/// Detuning that realises the effective detuning `delta_eff` at coupling
/// `g |A|`, with the sign of `delta_eff`.
pub fn detuning_for_effective(delta_eff: f64, g: f64, a_nn: Complex64) -> f64 {
    delta_eff.signum() * (delta_eff * delta_eff + (g * a_nn.norm()).powi(2)).sqrt()
}

/// Effective detuning from the symplectic eigenvalues of the quadrature
/// Hamiltonian, without using the closed form.
pub fn numeric_effective_detuning(delta: f64, g: f64, a_nn: Complex64, theta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    // a = (x + i p) / sqrt(2); H = X^T R X / 2 up to a constant.
    let c = a_nn * Complex64::from_polar(1.0, -theta);
    let r = Matrix2::new(-delta + g * c.re, -g * c.im, -g * c.im, -delta - g * c.re);
    let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let ev = (j * r).complex_eigenvalues();
    let lam = ev[0];
    if lam.re.abs() > 1e-12 * lam.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::AboveThreshold {
            delta: delta.abs(),
            drive: (g * a_nn.norm()).abs(),
        });
    }
    Ok(delta.signum() * lam.im.abs())
}

/// Per-ion scale factors `S_j` and squeezed couplings `v_j` of mode `n`:
///
/// ```text
/// S_j = cosh r - exp(-i (phi_sq + 2 phi_j + 2 arg u_j)) sinh r
/// v_j = S_j u_j exp(i phi_j)
/// ```
pub fn scale_factors(
    sol: &BogoliubovSolution,
    spectrum: &ModeSpectrum,
    phases: &IonDrivePhases,
    mode: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    spectrum.check_mode(mode)?;
    if phases.phases.len() != spectrum.n_ions {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for {} ions",
            phases.phases.len(),
            spectrum.n_ions
        )));
    }
    let (c, s) = (sol.r.cosh(), sol.r.sinh());
    let mut scale = Vec::with_capacity(spectrum.n_ions);
    let mut v = Vec::with_capacity(spectrum.n_ions);
    for j in 0..spectrum.n_ions {
        let u = spectrum.u(mode, j, Axis::Z);
        let phi = phases.phases[j];
        let arg_u = if u.norm() > 0.0 { u.arg() } else { 0.0 };
        let sj = Complex64::new(c, 0.0) - Complex64::from_polar(s, -(sol.phi_sq + 2.0 * phi + 2.0 * arg_u));
        scale.push(sj);
        v.push(sj * u * Complex64::from_polar(1.0, phi));
    }
    Ok((scale, v))
}

/// Complete single-mode amplification analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplificationSolution {
    pub mode: usize,
    /// Bare detuning `mu - w_n` in rad/s.
    pub delta: f64,
    /// Diagonal coupling `g_nn` in rad/s.
    pub g: f64,
    pub a_nn: Complex64,
    pub theta: f64,
    pub r: f64,
    pub phi_sq: f64,
    /// Effective detuning in rad/s.
    pub delta_eff: f64,
    pub gain_db: f64,
    pub scale_factors: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub off_diagonal_mass: f64,
    /// Set when the off-diagonal mass exceeds the threshold, meaning the
    /// drive also mixes the target with other modes.
    pub mixing_warning: bool,
}

/// Default off-diagonal mass above which mode mixing is flagged.
pub const DEFAULT_MIXING_THRESHOLD: f64 = 1e-3;

/// Amplifies mode `n` at detuning `delta` (rad/s).
pub fn amplify_mode(
    spectrum: &ModeSpectrum,
    overlaps: &OverlapMatrices,
    phases: &IonDrivePhases,
    mode: usize,
    delta: f64,
    theta: f64,
    mixing_threshold: f64,
) -> Result<AmplificationSolution> {
    spectrum.check_mode(mode)?;
    if spectrum.is_zero_mode(mode) {
        return Err(Error::config("sdf.target_mode", "cannot drive a zero-frequency mode"));
    }
    let a_nn = overlaps.a[(mode, mode)];
    let g = overlaps.g[(mode, mode)];
    let sol = solve_bogoliubov(delta, g, a_nn, theta)?;
    let delta_eff = effective_detuning(delta, g, a_nn)?;
    let (s, v) = scale_factors(&sol, spectrum, phases, mode)?;
    let mass = overlaps.off_diagonal_mass(mode);
    Ok(AmplificationSolution {
        mode,
        delta,
        g,
        a_nn,
        theta,
        r: sol.r,
        phi_sq: sol.phi_sq,
        delta_eff,
        gain_db: gain_db(sol.r),
        scale_factors: s,
        v,
        off_diagonal_mass: mass,
        mixing_warning: mass > mixing_threshold,
    })
}
