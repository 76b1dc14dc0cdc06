// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Normal modes of a crystal about its equilibrium.
//!
//! In a Paul pseudopotential the modes follow from the real symmetric
//! Hessian. In the rotating frame of a Penning trap the linearised motion
//! `q'' = -K q + G q'` contains the antisymmetric gyro matrix `G`, and the
//! modes are the positive eigenvalues of the Hermitian matrix
//! `i [[0, K^1/2], [-K^1/2, G]]`. Each eigenvector is scaled so that its
//! phase-space energy equals `hbar w`, which fixes the zero-point length
//! `l_n` as the norm of the position part.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::trap_model::{build_effective_potential, is_planar, CrystalEquilibrium, TrapConfig};

/// Cartesian axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Classification of a mode by where its weight lies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// At least 90 % of the weight is axial.
    Drumhead,
    /// At most 10 % of the weight is axial.
    Planar,
    Mixed,
    /// Frequency below `1e-6 wz`, typically a rotation of the crystal.
    ZeroFrequency,
}

/// Fraction of `wz` below which a mode is flagged as zero frequency.
pub const ZERO_FREQUENCY_FRACTION: f64 = 1e-6;

/// Normal modes sorted by descending frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    /// Mode frequencies in rad/s.
    pub frequencies: Vec<f64>,
    /// Row `n` holds mode `n` with components ordered `(x_0, y_0, z_0, x_1, ...)`.
    pub eigenvectors: DMatrix<Complex64>,
    /// Zero-point lengths in metres (zero for zero-frequency modes).
    pub zero_point_lengths: Vec<f64>,
    pub branch_labels: Vec<Branch>,
    pub n_ions: usize,
}

impl ModeSpectrum {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Component `u_n^axis` on ion `j`.
    pub fn u(&self, n: usize, j: usize, axis: Axis) -> Complex64 {
        self.eigenvectors[(n, 3 * j + axis.index())]
    }

    /// Axial components `u_n^z` of one mode.
    pub fn axial(&self, n: usize) -> Vec<Complex64> {
        (0..self.n_ions).map(|j| self.u(n, j, Axis::Z)).collect()
    }

    pub fn is_zero_mode(&self, n: usize) -> bool {
        self.branch_labels[n] == Branch::ZeroFrequency
    }

    /// Fraction of the weight of mode `n` along the axial direction.
    pub fn axial_weight(&self, n: usize) -> f64 {
        (0..self.n_ions).map(|j| self.u(n, j, Axis::Z).norm_sqr()).sum()
    }

    /// Index of the mode with the largest overlap with uniform axial motion.
    pub fn axial_com_index(&self) -> Option<usize> {
        let norm = (self.n_ions as f64).sqrt();
        (0..self.n_modes())
            .filter(|&n| !self.is_zero_mode(n))
            .map(|n| {
                let s: Complex64 = (0..self.n_ions).map(|j| self.u(n, j, Axis::Z)).sum();
                (n, s.norm() / norm)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n)
    }

    /// Copy with every eigenvector multiplied by `exp(i phase_n)`.
    pub fn rephased(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.n_modes() {
            return Err(Error::DimensionMismatch(format!(
                "{} phases for {} modes",
                phases.len(),
                self.n_modes()
            )));
        }
        let mut out = self.clone();
        for (n, &p) in phases.iter().enumerate() {
            let f = Complex64::from_polar(1.0, p);
            out.eigenvectors.row_mut(n).iter_mut().for_each(|c| *c *= f);
        }
        Ok(out)
    }

    pub(crate) fn check_mode(&self, n: usize) -> Result<()> {
        if n < self.n_modes() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange(format!("mode {n} of {}", self.n_modes())))
        }
    }
}

/// Coefficient of `a_n` in the expansion of a displacement operator. The
/// coefficient of `a_n^dagger` is its complex conjugate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeCoefficient {
    pub mode: usize,
    /// `l_n u_n` in metres.
    pub coefficient: Complex64,
}

/// Expansion `delta r_j^axis = sum_n (c_n a_n + c_n^* a_n^dagger)`.
pub fn mode_displacement_operator(spectrum: &ModeSpectrum, ion: usize, axis: Axis) -> Result<Vec<ModeCoefficient>> {
    if ion >= spectrum.n_ions {
        return Err(Error::IndexOutOfRange(format!("ion {ion} of {}", spectrum.n_ions)));
    }
    Ok((0..spectrum.n_modes())
        .map(|n| ModeCoefficient {
            mode: n,
            coefficient: spectrum.u(n, ion, axis) * spectrum.zero_point_lengths[n],
        })
        .collect())
}

/// Raw mode in natural units before sorting.
struct RawMode {
    omega: f64,
    /// Position amplitude with norm equal to the natural-unit zero-point length.
    w: Vec<Complex64>,
    zero: bool,
}

/// Linearises the crystal and returns its normal modes.
pub fn compute_modes(config: &TrapConfig, eq: &CrystalEquilibrium) -> Result<ModeSpectrum> {
    let pot = build_effective_potential(config)?;
    if eq.n_ions() != config.n_ions {
        return Err(Error::DimensionMismatch(format!(
            "equilibrium has {} ions, configuration {}",
            eq.n_ions(),
            config.n_ions
        )));
    }
    let q = eq.scaled_positions(config);
    let k = pot.hessian(&q);
    let gyro = config.gyro_freq() / config.axial_freq;
    let n = config.n_ions;

    let mut raw = Vec::with_capacity(3 * n);
    if gyro == 0.0 {
        raw.extend(static_modes(&k, &(0..3 * n).collect::<Vec<_>>(), 3 * n)?);
    } else if is_planar(&q, 1e-9) {
        let axial: Vec<usize> = (0..n).map(|j| 3 * j + 2).collect();
        let planar: Vec<usize> = (0..n).flat_map(|j| [3 * j, 3 * j + 1]).collect();
        raw.extend(static_modes(&k, &axial, 3 * n)?);
        raw.extend(gyroscopic_modes(&k, gyro, &planar, 3 * n)?);
    } else {
        raw.extend(gyroscopic_modes(&k, gyro, &(0..3 * n).collect::<Vec<_>>(), 3 * n)?);
    }

    raw.sort_by(|a, b| b.omega.total_cmp(&a.omega));
    let wz = config.axial_freq;
    let lscale = (HBAR / (config.ion_mass * wz)).sqrt();
    let mut eigenvectors = DMatrix::zeros(3 * n, 3 * n);
    let mut frequencies = Vec::with_capacity(3 * n);
    let mut lengths = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(3 * n);
    for (row, mode) in raw.into_iter().enumerate() {
        let len = mode.w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut u: Vec<Complex64> = mode.w.iter().map(|c| c / len).collect();
        fix_phase(&mut u);
        let axial: f64 = u.iter().skip(2).step_by(3).map(|c| c.norm_sqr()).sum();
        labels.push(if mode.zero {
            Branch::ZeroFrequency
        } else if axial >= 0.9 {
            Branch::Drumhead
        } else if axial <= 0.1 {
            Branch::Planar
        } else {
            Branch::Mixed
        });
        for (c, v) in u.into_iter().enumerate() {
            eigenvectors[(row, c)] = v;
        }
        frequencies.push(mode.omega * wz);
        lengths.push(if mode.zero { 0.0 } else { len * lscale });
    }
    Ok(ModeSpectrum {
        frequencies,
        eigenvectors,
        zero_point_lengths: lengths,
        branch_labels: labels,
        n_ions: n,
    })
}

/// Rotates `u` so that its largest component is real and positive.
fn fix_phase(u: &mut [Complex64]) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, c) in u.iter().enumerate() {
        // Ties go to the first index, with slack for round-off.
        if c.norm() > best_norm * (1.0 + 1e-9) {
            best = i;
            best_norm = c.norm();
        }
    }
    if best_norm > 0.0 {
        let f = u[best].conj() / best_norm;
        u.iter_mut().for_each(|c| *c *= f);
        u[best] = Complex64::new(u[best].re, 0.0);
    }
}

fn sub_matrix(k: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| k[(idx[a], idx[b])])
}

fn embed(idx: &[usize], dim: usize, v: impl Iterator<Item = Complex64>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (i, c) in idx.iter().zip(v) {
        out[*i] = c;
    }
    out
}

/// Modes of `q'' = -K q` restricted to the coordinates `idx`.
fn static_modes(k: &DMatrix<f64>, idx: &[usize], dim: usize) -> Result<Vec<RawMode>> {
    let block = sub_matrix(k, idx);
    let eig = SymmetricEigen::new(block);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut out = Vec::with_capacity(idx.len());
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-9 * lmax.max(1.0) {
            return Err(Error::UnstableMode { mode: i, eigenvalue: lam });
        }
        let omega = lam.max(0.0).sqrt();
        let zero = omega < ZERO_FREQUENCY_FRACTION;
        let scale = if zero { 1.0 } else { (0.5 / omega).sqrt() };
        let w = embed(idx, dim, eig.eigenvectors.column(i).iter().map(|v| Complex64::new(v * scale, 0.0)));
        out.push(RawMode { omega, w, zero });
    }
    Ok(out)
}

/// Modes of `q'' = -K q + G q'` restricted to `idx`, where `idx` lists
/// coordinates in `(x, y, [z])` groups per ion and `G` couples `x` and `y`.
fn gyroscopic_modes(k: &DMatrix<f64>, gyro: f64, idx: &[usize], dim: usize) -> Result<Vec<RawMode>> {
    let d = idx.len();
    let block = sub_matrix(k, idx);
    let eig = SymmetricEigen::new(block.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-9 * lmax.max(1.0);
    let mut null_vectors = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -floor {
            return Err(Error::UnstableMode { mode: i, eigenvalue: lam });
        }
        if lam <= floor {
            null_vectors.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let sqrt_k = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();

    // Gyro matrix on the selected coordinates: x'' += w y', y'' -= w x'.
    let mut g = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let (ia, ib) = (idx[a], idx[b]);
            if ia / 3 == ib / 3 {
                match (ia % 3, ib % 3) {
                    (0, 1) => g[(a, b)] = gyro,
                    (1, 0) => g[(a, b)] = -gyro,
                    _ => {}
                }
            }
        }
    }

    let i = Complex64::new(0.0, 1.0);
    let mut herm = DMatrix::<Complex64>::zeros(2 * d, 2 * d);
    for a in 0..d {
        for b in 0..d {
            herm[(a, d + b)] = i * sqrt_k[(a, b)];
            herm[(d + a, b)] = -i * sqrt_k[(a, b)];
            herm[(d + a, d + b)] = i * g[(a, b)];
        }
    }
    let heig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..2 * d).collect();
    order.sort_by(|&a, &b| heig.eigenvalues[b].total_cmp(&heig.eigenvalues[a]));

    let mut out = Vec::with_capacity(d);
    let mut next_null = 0;
    for &col in order.iter().take(d) {
        let omega = heig.eigenvalues[col];
        if omega < ZERO_FREQUENCY_FRACTION {
            // Zero modes are static displacements along the null space of K.
            let v: DVector<f64> = match null_vectors.get(next_null) {
                Some(v) => v.clone(),
                None => {
                    let y = heig.eigenvectors.column(col);
                    let re = DVector::from_iterator(d, (0..d).map(|a| y[a].re));
                    let nrm = re.norm();
                    if nrm > 0.0 { re / nrm } else { re }
                }
            };
            next_null += 1;
            out.push(RawMode {
                omega: omega.max(0.0),
                w: embed(idx, dim, v.iter().map(|x| Complex64::new(*x, 0.0))),
                zero: true,
            });
            continue;
        }
        // Zero-point amplitude from the velocity half: q = i v / w.
        let y = heig.eigenvectors.column(col);
        let factor = i / omega.sqrt();
        let w = embed(idx, dim, (0..d).map(|a| y[d + a] * factor));
        out.push(RawMode { omega, w, zero: false });
    }
    Ok(out)
}

/// Relative residual of `(K + i w G - w^2) u = 0` for every mode.
pub fn eigen_residuals(config: &TrapConfig, eq: &CrystalEquilibrium, spectrum: &ModeSpectrum) -> Result<Vec<f64>> {
    let pot = build_effective_potential(config)?;
    let k = pot.hessian(&eq.scaled_positions(config));
    let gyro = config.gyro_freq() / config.axial_freq;
    let dim = 3 * config.n_ions;
    let kc = k.map(|v| Complex64::new(v, 0.0));
    Ok((0..spectrum.n_modes())
        .map(|n| {
            let w = spectrum.frequencies[n] / config.axial_freq;
            let u = DVector::from_iterator(dim, spectrum.eigenvectors.row(n).iter().copied());
            let ku = &kc * &u;
            let mut gu = DVector::zeros(dim);
            for j in 0..config.n_ions {
                gu[3 * j] = u[3 * j + 1] * gyro;
                gu[3 * j + 1] = -u[3 * j] * gyro;
            }
            let r = &ku + &gu * Complex64::new(0.0, w) - &u * Complex64::new(w * w, 0.0);
            r.norm() / (ku.norm() + w * gu.norm() + w * w).max(1e-300)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TWO_PI;
    use crate::trap_model::solve_equilibrium;

    #[test]
    fn two_ion_paul_axial_modes() {
        let wz = TWO_PI * 1.0e6;
        let cfg = TrapConfig::paul([TWO_PI * 5.0e6, TWO_PI * 5.3e6], wz, 2);
        let eq = solve_equilibrium(&cfg, 5, 2).unwrap();
        let sp = compute_modes(&cfg, &eq).unwrap();
        let axial: Vec<f64> = (0..6)
            .filter(|&n| sp.branch_labels[n] == Branch::Drumhead)
            .map(|n| sp.frequencies[n] / wz)
            .collect();
        assert_eq!(axial.len(), 2);
        assert!((axial[0] - 3f64.sqrt()).abs() < 1e-8);
        assert!((axial[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_ion_penning_frequencies() {
        let wz = TWO_PI * 1.58e6;
        let cfg = TrapConfig::penning(4.4588, wz, TWO_PI * 0.18e6, 0.0, 1);
        let eq = solve_equilibrium(&cfg, 0, 1).unwrap();
        let sp = compute_modes(&cfg, &eq).unwrap();
        let wc = cfg.cyclotron_freq();
        let weff = cfg.gyro_freq();
        let root = (wc * wc - 2.0 * wz * wz).sqrt();
        let expect = [(root + weff) / 2.0, wz, (root - weff) / 2.0];
        let mut sorted = expect;
        sorted.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in sp.frequencies.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
        }
    }
}
