// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Leading-order Floquet corrections by exact commutator algebra.
//!
//! With `K = [[0, I], [-I, 0]]` the commutator `[Psi_a, Psi_b] = K_ab`, and
//! for symmetric `A`, `B`:
//!
//! ```text
//! [Psi^T A Psi / 2, Psi^T B Psi / 2] = Psi^T (A K B - B K A) Psi / 2
//! [Psi^T A Psi / 2, Psi^T V]         = Psi^T A K V
//! [Psi^T U, Psi^T V]                 = U^T K V
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::harmonics::{HarmonicDecomposition, HarmonicTerm};
use crate::error::{Error, Result};

/// Operator produced by commutators of harmonic terms, constants dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum {
    pub quad: DMatrix<Complex64>,
    pub linear: DVector<Complex64>,
    pub spin_linear: DMatrix<Complex64>,
    /// Coefficient of `s_j` alone.
    pub spin_single: DVector<Complex64>,
    /// Ordered-pair coefficients of `s_j s_k`, zero on the diagonal.
    pub spin_spin: DMatrix<Complex64>,
}

impl OperatorSum {
    pub fn zeros(n_modes: usize, n_ions: usize) -> Self {
        OperatorSum {
            quad: DMatrix::zeros(2 * n_modes, 2 * n_modes),
            linear: DVector::zeros(2 * n_modes),
            spin_linear: DMatrix::zeros(n_ions, 2 * n_modes),
            spin_single: DVector::zeros(n_ions),
            spin_spin: DMatrix::zeros(n_ions, n_ions),
        }
    }

    fn add_scaled(&mut self, o: &OperatorSum, f: f64) {
        self.quad += &o.quad * Complex64::new(f, 0.0);
        self.linear += &o.linear * Complex64::new(f, 0.0);
        self.spin_linear += &o.spin_linear * Complex64::new(f, 0.0);
        self.spin_single += &o.spin_single * Complex64::new(f, 0.0);
        self.spin_spin += &o.spin_spin * Complex64::new(f, 0.0);
    }

    /// Coefficient matrix of `a_n^dag a_m`.
    pub fn ada_block(&self) -> DMatrix<Complex64> {
        let m = self.linear.len() / 2;
        self.quad.view((m, 0), (m, m)).into_owned()
    }

    /// Coefficients of `a_n a_m` in the ordered double sum.
    pub fn aa_block(&self) -> DMatrix<Complex64> {
        let m = self.linear.len() / 2;
        self.quad.view((0, 0), (m, m)).into_owned() * Complex64::new(0.5, 0.0)
    }
}

fn symplectic_form(m: usize) -> DMatrix<Complex64> {
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        k[(i, m + i)] = Complex64::new(1.0, 0.0);
        k[(m + i, i)] = Complex64::new(-1.0, 0.0);
    }
    k
}

/// Exact commutator `[x, y]` with constants dropped.
pub fn commutator(x: &HarmonicTerm, y: &HarmonicTerm, axes_commute: bool) -> Result<OperatorSum> {
    let m = x.n_modes();
    let nion = x.spin_linear.nrows();
    let k = symplectic_form(m);
    let xk = &x.quad * &k;
    let yk = &y.quad * &k;

    if !axes_commute {
        let touches = |free: &DVector<Complex64>, lin: &DMatrix<Complex64>| {
            (0..nion).any(|j| free[j].norm() > 0.0 && lin.row(j).iter().any(|c| c.norm() > 0.0))
        };
        if touches(&x.spin_free, &y.spin_linear) || touches(&y.spin_free, &x.spin_linear) {
            return Err(Error::Unsupported(
                "commutator of spin terms on different Pauli axes".into(),
            ));
        }
    }

    let quad = &xk * &y.quad - &yk * &x.quad;
    let linear = &xk * &y.linear - &yk * &x.linear;
    let mut spin_linear = DMatrix::zeros(nion, 2 * m);
    let mut spin_single = DVector::zeros(nion);
    let kyl = &k * &y.linear;
    for j in 0..nion {
        let wx = x.spin_linear.row(j).transpose();
        let wy = y.spin_linear.row(j).transpose();
        let row = &xk * &wy - &yk * &wx;
        spin_linear.set_row(j, &row.transpose());
        // [V_x, s W_y] + [s W_x, V_y]
        spin_single[j] = (x.linear.transpose() * &k * &wy)[(0, 0)] + (wx.transpose() * &kyl)[(0, 0)];
    }
    let kwy = &k * y.spin_linear.transpose();
    let mut spin_spin = &x.spin_linear * kwy;
    for j in 0..nion {
        spin_spin[(j, j)] = Complex64::new(0.0, 0.0);
    }
    Ok(OperatorSum {
        quad,
        linear,
        spin_linear,
        spin_single,
        spin_spin,
    })
}

/// Leading-order corrections and their named blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct FloquetCorrections {
    pub mu: f64,
    /// `sum_{l>0} [H_l, H_-l] / (l mu)`.
    pub total: OperatorSum,
    /// Contribution of each `l = 1..=4`.
    pub per_harmonic: Vec<OperatorSum>,
    /// Ordered-pair coefficients of the extra Ising term on the coupling axis.
    pub spin_spin_xx: DMatrix<Complex64>,
    /// Coefficients of `a_n^dag a_n'`.
    pub mode_shift: DMatrix<Complex64>,
    /// Extra spin-dependent force: coefficients of `s_j a_m` (row `j`); the
    /// `a_m^dag` coefficients follow by conjugation.
    pub extra_sdf: DMatrix<Complex64>,
    /// `G_n^2` in rad^2/s^2.
    pub g_sq: Vec<f64>,
    /// `mu` divided by the largest internal rate; large values justify the expansion.
    pub scale_ratio: f64,
}

/// Evaluates `sum_{l>0} [H_l, H_-l] / (l mu)`.
pub fn floquet_corrections(h: &HarmonicDecomposition) -> Result<FloquetCorrections> {
    let m = h.n_modes();
    let nion = h.n_ions();
    let axes_commute = h.model.coupling_axis == h.model.free_axis;
    let mut total = OperatorSum::zeros(m, nion);
    let mut per = Vec::with_capacity(4);
    for l in 1..=HarmonicDecomposition::MAX_HARMONIC {
        let c = commutator(h.term(l), h.term(-l), axes_commute)?;
        let mut scaled = OperatorSum::zeros(m, nion);
        scaled.add_scaled(&c, 1.0 / (l as f64 * h.mu));
        total.add_scaled(&scaled, 1.0);
        per.push(scaled);
    }
    let internal = h
        .model
        .delta
        .iter()
        .map(|d| d.abs())
        .chain(h.model.g.iter().map(|g| g.abs()))
        .chain(h.model.sdf_static.iter().map(|c| c.norm()))
        .fold(0.0_f64, f64::max);
    Ok(FloquetCorrections {
        mu: h.mu,
        spin_spin_xx: total.spin_spin.clone(),
        mode_shift: total.ada_block(),
        extra_sdf: total.spin_linear.columns(0, m).into_owned(),
        g_sq: h.model.g_sq(),
        scale_ratio: if internal > 0.0 { h.mu / internal } else { f64::INFINITY },
        total,
        per_harmonic: per,
    })
}

impl FloquetCorrections {
    /// Quadratic form of `H_0` plus the corrections.
    pub fn effective_quadratic(&self, h: &HarmonicDecomposition) -> DMatrix<Complex64> {
        &h.term(0).quad + &self.total.quad
    }
}
