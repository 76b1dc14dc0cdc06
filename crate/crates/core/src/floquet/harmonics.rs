// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Harmonic decomposition of the drive Hamiltonian.
//!
//! Operators are written over the Nambu vector `Psi = (a_1..a_M, a_1^dag..a_M^dag)`.
//! A harmonic component is
//!
//! ```text
//! H_l = Psi^T Q Psi / 2 + Psi^T V + sum_j s_j Psi^T W_j + sum_j c_j t_j
//! ```
//!
//! where `s_j` is the Pauli operator on the coupling axis of ion `j`, `t_j`
//! the Pauli operator carrying the motion-free drive and `Q` is symmetric.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::constants::HBAR;
use crate::drive_config::{mode_coupling_strengths, IonDrivePhases, PaDriveSpec, SdfKind, SdfSpec, SpinAxis};
use crate::error::{Error, Result};
use crate::normal_modes::{Axis, ModeSpectrum};
use crate::parametric::compute_overlaps;
use crate::trap_model::CrystalEquilibrium;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One harmonic component.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTerm {
    /// Symmetric `2M x 2M` quadratic form.
    pub quad: DMatrix<Complex64>,
    /// Linear coefficients, length `2M`.
    pub linear: DVector<Complex64>,
    /// Row `j` holds `W_j`, the coefficients of `s_j Psi`.
    pub spin_linear: DMatrix<Complex64>,
    /// Coefficients `c_j` of the motion-free spin term.
    pub spin_free: DVector<Complex64>,
}

impl HarmonicTerm {
    pub fn zeros(n_modes: usize, n_ions: usize) -> Self {
        HarmonicTerm {
            quad: DMatrix::zeros(2 * n_modes, 2 * n_modes),
            linear: DVector::zeros(2 * n_modes),
            spin_linear: DMatrix::zeros(n_ions, 2 * n_modes),
            spin_free: DVector::zeros(n_ions),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.linear.len() / 2
    }

    /// Adds `c a_n a_m`.
    pub fn add_aa(&mut self, n: usize, m: usize, c: Complex64) {
        self.quad[(n, m)] += c;
        self.quad[(m, n)] += c;
    }

    /// Adds `c a_n^dag a_m^dag`.
    pub fn add_adad(&mut self, n: usize, m: usize, c: Complex64) {
        let k = self.n_modes();
        self.quad[(k + n, k + m)] += c;
        self.quad[(k + m, k + n)] += c;
    }

    /// Adds `c a_n^dag a_m`, up to a constant.
    pub fn add_ada(&mut self, n: usize, m: usize, c: Complex64) {
        let k = self.n_modes();
        self.quad[(k + n, m)] += c;
        self.quad[(m, k + n)] += c;
    }

    /// Coefficient of `a_n^dag a_m`.
    pub fn ada(&self, n: usize, m: usize) -> Complex64 {
        self.quad[(self.n_modes() + n, m)]
    }

    /// Coefficient of `a_n a_m` in the ordered double sum.
    pub fn aa(&self, n: usize, m: usize) -> Complex64 {
        self.quad[(n, m)] * 0.5
    }

    /// Hermitian conjugate, dropping constants.
    pub fn dagger(&self) -> Self {
        let k = self.n_modes();
        let swap = |i: usize| if i < k { i + k } else { i - k };
        let d = 2 * k;
        HarmonicTerm {
            quad: DMatrix::from_fn(d, d, |a, b| self.quad[(swap(a), swap(b))].conj()),
            linear: DVector::from_fn(d, |a, _| self.linear[swap(a)].conj()),
            spin_linear: DMatrix::from_fn(self.spin_linear.nrows(), d, |j, a| self.spin_linear[(j, swap(a))].conj()),
            spin_free: self.spin_free.map(|c| c.conj()),
        }
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        let m = |it: &mut dyn Iterator<Item = &Complex64>| it.fold(0.0_f64, |acc, c| acc.max(c.norm()));
        m(&mut self.quad.iter())
            .max(m(&mut self.linear.iter()))
            .max(m(&mut self.spin_linear.iter()))
            .max(m(&mut self.spin_free.iter()))
    }

    fn scaled_add(&mut self, other: &HarmonicTerm, f: Complex64) {
        self.quad += &other.quad * f;
        self.linear += &other.linear * f;
        self.spin_linear += &other.spin_linear * f;
        self.spin_free += &other.spin_free * f;
    }

    /// Largest absolute difference to another term.
    pub fn max_diff(&self, other: &HarmonicTerm) -> f64 {
        let mut d = self.clone();
        d.scaled_add(other, Complex64::new(-1.0, 0.0));
        d.max_abs()
    }
}

/// Mode-space parameters from which the harmonics are assembled. All rates
/// are in rad/s.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeModel {
    /// Detunings `mu - w_n`.
    pub delta: Vec<f64>,
    pub g: DMatrix<f64>,
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    /// `Omega_p l_n sum_j (z_j u^z - (x_j u^x + y_j u^y) / 2)`.
    pub linear_pa: Vec<Complex64>,
    /// `f_n u_nj exp(i phi_j)`: coefficient of `s_j a_n` at `l = 0`.
    pub sdf_static: DMatrix<Complex64>,
    /// `f_n u_nj exp(-i phi_j)`: coefficient of `s_j a_n` at `l = -2`.
    pub sdf_counter: DMatrix<Complex64>,
    /// Coefficient of `t_j` at `l = +1`.
    pub spin_free_plus: Vec<Complex64>,
    pub theta: f64,
    pub coupling_axis: SpinAxis,
    pub free_axis: SpinAxis,
}

impl ModeModel {
    /// A model with no spins: modes driven only by the parametric drive.
    pub fn parametric_only(delta: Vec<f64>, g: DMatrix<f64>, a: DMatrix<Complex64>, b: DMatrix<Complex64>, theta: f64) -> Self {
        let m = delta.len();
        ModeModel {
            delta,
            g,
            a,
            b,
            linear_pa: vec![ZERO; m],
            sdf_static: DMatrix::zeros(0, m),
            sdf_counter: DMatrix::zeros(0, m),
            spin_free_plus: Vec::new(),
            theta,
            coupling_axis: SpinAxis::X,
            free_axis: SpinAxis::Y,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.delta.len()
    }

    pub fn n_ions(&self) -> usize {
        self.sdf_static.nrows()
    }

    /// `G_n^2 = sum_m g_nm^2 |A_nm|^2`.
    pub fn g_sq(&self) -> Vec<f64> {
        let m = self.n_modes();
        (0..m)
            .map(|n| (0..m).map(|k| (self.g[(n, k)] * self.a[(n, k)].norm()).powi(2)).sum())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let m = self.n_modes();
        let n = self.n_ions();
        let ok = self.g.shape() == (m, m)
            && self.a.shape() == (m, m)
            && self.b.shape() == (m, m)
            && self.linear_pa.len() == m
            && self.sdf_static.shape() == (n, m)
            && self.sdf_counter.shape() == (n, m)
            && self.spin_free_plus.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("mode model blocks".into()))
        }
    }
}

/// Harmonics `H_l` for `l = -4..=4`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicDecomposition {
    /// Spectrum indices of the retained modes (empty for synthetic models).
    pub modes: Vec<usize>,
    pub mu: f64,
    pub model: ModeModel,
    terms: Vec<HarmonicTerm>,
}

impl HarmonicDecomposition {
    pub const MAX_HARMONIC: i32 = 4;

    /// Bins every term of the full Hamiltonian by harmonic.
    pub fn from_model(model: ModeModel, mu: f64) -> Result<Self> {
        model.validate()?;
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::config("sdf.mu", "must be positive"));
        }
        let m = model.n_modes();
        let nion = model.n_ions();
        let mut terms = vec![HarmonicTerm::zeros(m, nion); 9];
        let idx = |l: i32| (l + Self::MAX_HARMONIC) as usize;
        let e = |phase: f64| Complex64::from_polar(1.0, phase);
        let th = model.theta;

        for n in 0..m {
            terms[idx(0)].add_ada(n, n, Complex64::new(-model.delta[n], 0.0));
            let k = model.linear_pa[n];
            // Position-linear part of the parametric drive.
            terms[idx(1)].linear[n] += k * e(-th);
            terms[idx(-1)].linear[m + n] += k.conj() * e(th);
            terms[idx(-3)].linear[n] += k * e(th);
            terms[idx(3)].linear[m + n] += k.conj() * e(-th);
            for q in 0..m {
                let g = model.g[(n, q)];
                let a = model.a[(n, q)];
                let b = model.b[(n, q)];
                terms[idx(0)].add_aa(n, q, a * e(-th) * (g / 2.0));
                terms[idx(0)].add_adad(n, q, a.conj() * e(th) * (g / 2.0));
                terms[idx(-4)].add_aa(n, q, a * e(th) * (g / 2.0));
                terms[idx(4)].add_adad(n, q, a.conj() * e(-th) * (g / 2.0));
                terms[idx(2)].add_ada(n, q, b * e(-th) * g);
                terms[idx(-2)].add_ada(n, q, b * e(th) * g);
            }
        }
        for j in 0..nion {
            for n in 0..m {
                let c0 = model.sdf_static[(j, n)];
                terms[idx(0)].spin_linear[(j, n)] += c0;
                terms[idx(0)].spin_linear[(j, m + n)] += c0.conj();
                let c2 = model.sdf_counter[(j, n)];
                terms[idx(-2)].spin_linear[(j, n)] += c2;
                terms[idx(2)].spin_linear[(j, m + n)] += c2.conj();
            }
            terms[idx(1)].spin_free[j] += model.spin_free_plus[j];
            terms[idx(-1)].spin_free[j] += model.spin_free_plus[j].conj();
        }
        Ok(HarmonicDecomposition {
            modes: Vec::new(),
            mu,
            model,
            terms,
        })
    }

    /// Component `H_l`.
    pub fn term(&self, l: i32) -> &HarmonicTerm {
        assert!(l.abs() <= Self::MAX_HARMONIC, "harmonic {l} out of range");
        &self.terms[(l + Self::MAX_HARMONIC) as usize]
    }

    /// Mutable access, used to switch individual harmonics off.
    pub fn term_mut(&mut self, l: i32) -> &mut HarmonicTerm {
        assert!(l.abs() <= Self::MAX_HARMONIC, "harmonic {l} out of range");
        &mut self.terms[(l + Self::MAX_HARMONIC) as usize]
    }

    pub fn n_modes(&self) -> usize {
        self.model.n_modes()
    }

    pub fn n_ions(&self) -> usize {
        self.model.n_ions()
    }

    /// `H(t) = sum_l H_l exp(i l mu t)`.
    pub fn evaluate(&self, t: f64) -> HarmonicTerm {
        let mut out = HarmonicTerm::zeros(self.n_modes(), self.n_ions());
        for l in -Self::MAX_HARMONIC..=Self::MAX_HARMONIC {
            out.scaled_add(self.term(l), Complex64::from_polar(1.0, l as f64 * self.mu * t));
        }
        out
    }

    /// Largest deviation of `H(t)` from its Hermitian conjugate.
    pub fn hermiticity_defect(&self, t: f64) -> f64 {
        let h = self.evaluate(t);
        h.max_diff(&h.dagger())
    }
}

/// Assembles the harmonics for the retained `modes` of a crystal.
pub fn decompose_harmonics(
    sdf: &SdfSpec,
    pa: &PaDriveSpec,
    eq: &CrystalEquilibrium,
    spectrum: &ModeSpectrum,
    phases: &IonDrivePhases,
    modes: &[usize],
) -> Result<HarmonicDecomposition> {
    sdf.validate()?;
    pa.validate()?;
    let (coupling_axis, free_axis, free_amp): (SpinAxis, SpinAxis, Box<dyn Fn(f64) -> Complex64>) = match sdf.kind {
        SdfKind::LightShift => {
            let amp = sdf.strength / (2.0 * HBAR * sdf.delta_k);
            (
                SpinAxis::Z,
                SpinAxis::Z,
                Box::new(move |phi| Complex64::new(0.0, amp) * Complex64::from_polar(1.0, phi)),
            )
        }
        SdfKind::MsPhaseSensitive => {
            let amp = sdf.strength / 2.0;
            (SpinAxis::X, SpinAxis::Y, Box::new(move |_| Complex64::new(amp, 0.0)))
        }
        SdfKind::MsPhaseInsensitive => {
            return Err(Error::Unsupported(
                "counter-rotating decomposition of the phase-insensitive gate".into(),
            ))
        }
    };
    if phases.phases.len() != spectrum.n_ions || eq.n_ions() != spectrum.n_ions {
        return Err(Error::DimensionMismatch("phases, equilibrium and spectrum".into()));
    }
    for &n in modes {
        spectrum.check_mode(n)?;
    }
    let m = modes.len();
    let nion = spectrum.n_ions;
    let ov = compute_overlaps(spectrum, pa);
    let f = mode_coupling_strengths(sdf, spectrum);
    let sub = |mat: &DMatrix<Complex64>| DMatrix::from_fn(m, m, |a, b| mat[(modes[a], modes[b])]);

    let linear_pa = modes
        .iter()
        .map(|&n| {
            let s: Complex64 = (0..nion)
                .map(|j| {
                    let [x, y, z] = eq.position(j);
                    spectrum.u(n, j, Axis::Z) * z
                        - (spectrum.u(n, j, Axis::X) * x + spectrum.u(n, j, Axis::Y) * y) * 0.5
                })
                .sum();
            s * (pa.omega_p * spectrum.zero_point_lengths[n])
        })
        .collect();
    let sdf_static = DMatrix::from_fn(nion, m, |j, a| {
        spectrum.u(modes[a], j, Axis::Z) * Complex64::from_polar(f[modes[a]], phases.phases[j])
    });
    let sdf_counter = DMatrix::from_fn(nion, m, |j, a| {
        spectrum.u(modes[a], j, Axis::Z) * Complex64::from_polar(f[modes[a]], -phases.phases[j])
    });
    let model = ModeModel {
        delta: modes.iter().map(|&n| sdf.mu - spectrum.frequencies[n]).collect(),
        g: DMatrix::from_fn(m, m, |a, b| ov.g[(modes[a], modes[b])]),
        a: sub(&ov.a),
        b: sub(&ov.b),
        linear_pa,
        sdf_static,
        sdf_counter,
        spin_free_plus: phases.phases.iter().map(|&p| free_amp(p)).collect(),
        theta: pa.theta,
        coupling_axis,
        free_axis,
    };
    let mut out = HarmonicDecomposition::from_model(model, sdf.mu)?;
    out.modes = modes.to_vec();
    Ok(out)
}
