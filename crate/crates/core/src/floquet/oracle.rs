// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact one-period propagation of the motional dynamics.
//!
//! With the spins frozen to eigenvalues `s_j` of the coupling axis the
//! Heisenberg equations for the Nambu vector are affine,
//!
//! ```text
//! d Psi / dt = -i K (Q(t) Psi + V(t) + sum_j s_j W_j(t))
//! ```
//!
//! and are integrated with the fourth-order Magnus scheme on the augmented
//! generator. Motion-free spin terms on another Pauli axis do not commute
//! with the frozen spins and are left out.
//!
//! The stroboscopic generator `log(M) / T` depends on the start time at
//! order `1 / mu`. Averaging it over start times spread across the period
//! removes that dependence and leaves the effective Hamiltonian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use rayon::prelude::*;

use super::gain::{gain_with_cr, ReferencePoint};
use super::harmonics::{HarmonicDecomposition, ModeModel};
use crate::constants::TWO_PI;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Magnus steps per drive period, a multiple of `gauge_samples`.
    pub steps_per_period: usize,
    /// Start times averaged over when extracting the effective generator.
    pub gauge_samples: usize,
    /// Also integrate with half the steps and report the difference.
    pub check_halving: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            steps_per_period: 4096,
            gauge_samples: 16,
            check_halving: true,
        }
    }
}

/// Output of [`symplectic_oracle`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Period in seconds.
    pub period: f64,
    /// Linear part of the one-period map, `2M x 2M`.
    pub monodromy: DMatrix<Complex64>,
    /// Displacement after one period starting from the vacuum.
    pub forced_displacement: DVector<Complex64>,
    /// Quasi-frequencies in rad/s, one per mode, descending.
    pub frequencies: Vec<f64>,
    /// Largest growth rate `ln |lambda| / T`; zero for stable motion.
    pub max_growth_rate: f64,
    /// Start-time averaged quadratic form of the effective Hamiltonian.
    pub effective_quadratic: DMatrix<Complex64>,
    /// Start-time averaged linear coefficients of the effective Hamiltonian.
    pub effective_linear: DVector<Complex64>,
    /// Largest entry of `M K M^T - K`.
    pub symplectic_defect: f64,
    /// Largest monodromy difference to a run with half the steps.
    pub halving_residual: Option<f64>,
}

fn symplectic_form(m: usize) -> DMatrix<Complex64> {
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        k[(i, m + i)] = Complex64::new(1.0, 0.0);
        k[(m + i, i)] = Complex64::new(-1.0, 0.0);
    }
    k
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |a, c| a.max(c.norm()))
}

fn generator(h: &HarmonicDecomposition, k: &DMatrix<Complex64>, spins: &[f64], t: f64) -> DMatrix<Complex64> {
    let d = 2 * h.n_modes();
    let term = h.evaluate(t);
    let mut force = term.linear.clone();
    for (j, &s) in spins.iter().enumerate() {
        force += term.spin_linear.row(j).transpose() * Complex64::new(s, 0.0);
    }
    let mut g = DMatrix::zeros(d + 1, d + 1);
    g.view_mut((0, 0), (d, d)).copy_from(&(k * &term.quad * -I));
    g.view_mut((0, d), (d, 1)).copy_from(&(k * force * -I));
    g
}

/// Propagators from `0` to each of `samples` equally spaced start times and
/// to the full period.
fn propagate(h: &HarmonicDecomposition, spins: &[f64], steps: usize, samples: usize) -> Vec<DMatrix<Complex64>> {
    let d = 2 * h.n_modes() + 1;
    let k = symplectic_form(h.n_modes());
    let period = TWO_PI / h.mu;
    let dt = period / steps as f64;
    let c = 3f64.sqrt() / 6.0;
    let per_sample = steps / samples;
    let mut u = DMatrix::<Complex64>::identity(d, d);
    let mut out = Vec::with_capacity(samples + 1);
    out.push(u.clone());
    for s in 0..steps {
        let t = s as f64 * dt;
        let g1 = generator(h, &k, spins, t + dt * (0.5 - c));
        let g2 = generator(h, &k, spins, t + dt * (0.5 + c));
        let comm = &g2 * &g1 - &g1 * &g2;
        let omega = (&g1 + &g2) * Complex64::new(0.5 * dt, 0.0) + comm * Complex64::new(3f64.sqrt() * dt * dt / 12.0, 0.0);
        u = omega.exp() * u;
        if (s + 1) % per_sample == 0 {
            out.push(u.clone());
        }
    }
    out
}

/// Principal matrix logarithm by inverse scaling and squaring.
fn log_matrix(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut a = m.clone();
    let mut k = 0;
    while max_abs(&(&a - &id)) * n as f64 > 0.25 {
        if k > 40 {
            return Err(Error::Numerical("matrix logarithm did not converge".into()));
        }
        // Denman-Beavers square root.
        let mut y = a.clone();
        let mut z = id.clone();
        for _ in 0..100 {
            let yi = y.clone().try_inverse().ok_or_else(|| Error::Numerical("singular monodromy".into()))?;
            let zi = z.clone().try_inverse().ok_or_else(|| Error::Numerical("singular monodromy".into()))?;
            let yn = (&y + zi) * Complex64::new(0.5, 0.0);
            let zn = (&z + yi) * Complex64::new(0.5, 0.0);
            let step = max_abs(&(&yn - &y));
            y = yn;
            z = zn;
            if step < 1e-15 * max_abs(&y) {
                break;
            }
        }
        a = y;
        k += 1;
    }
    let x = &a - &id;
    let mut term = x.clone();
    let mut sum = x.clone();
    for p in 2..200 {
        term = &term * &x;
        let add = &term * Complex64::new(if p % 2 == 0 { -1.0 } else { 1.0 } / p as f64, 0.0);
        sum += &add;
        if max_abs(&add) < 1e-18 * max_abs(&sum).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(sum * Complex64::new(2f64.powi(k), 0.0))
}

fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (_, t) = nalgebra::Schur::new(m.clone()).unpack();
    t.diagonal().iter().copied().collect()
}

/// Normal-mode frequencies (rad/s, descending) of the quadratic Hamiltonian
/// `Psi^T Q Psi / 2`, from the eigenvalues `+-i nu` of `-i K Q`.
pub fn quadratic_frequencies(q: &DMatrix<Complex64>) -> Vec<f64> {
    let m = q.nrows() / 2;
    let k = symplectic_form(m);
    let mut nu: Vec<f64> = eigenvalues(&(k * q * -I)).iter().map(|z| z.im.abs()).collect();
    nu.sort_by(|a, b| b.total_cmp(a));
    nu.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Propagates the motion over one drive period with the spins fixed to `spins`.
pub fn symplectic_oracle(h: &HarmonicDecomposition, spins: &[f64], opts: &OracleOptions) -> Result<OracleResult> {
    let md = h.n_modes();
    if md == 0 {
        return Err(Error::DimensionMismatch("oracle needs at least one mode".into()));
    }
    if spins.len() != h.n_ions() {
        return Err(Error::DimensionMismatch(format!("{} spins for {} ions", spins.len(), h.n_ions())));
    }
    let samples = opts.gauge_samples.max(1);
    if opts.steps_per_period == 0 || !opts.steps_per_period.is_multiple_of(2 * samples) {
        return Err(Error::config(
            "floquet.steps_per_period",
            "must be a positive multiple of twice the gauge sample count",
        ));
    }
    let d = 2 * md;
    let period = TWO_PI / h.mu;
    let props = propagate(h, spins, opts.steps_per_period, samples);
    let full = props[samples].clone();
    let monodromy = full.view((0, 0), (d, d)).into_owned();
    let forced_displacement = full.view((0, d), (d, 1)).column(0).into_owned();

    // Average the generator over start times t_s: M(t_s) = U(t_s) M U(t_s)^-1.
    let k = symplectic_form(md);
    let mut gen = DMatrix::<Complex64>::zeros(d + 1, d + 1);
    for u in props.iter().take(samples) {
        let ui = u.clone().try_inverse().ok_or_else(|| Error::Numerical("singular propagator".into()))?;
        gen += log_matrix(&(u * &full * ui))?;
    }
    gen /= Complex64::new(samples as f64 * period, 0.0);
    let l = gen.view((0, 0), (d, d)).into_owned();
    let f = gen.view((0, d), (d, 1)).column(0).into_owned();
    let q = &k * l * -I;
    let effective_quadratic = (&q + q.transpose()) * Complex64::new(0.5, 0.0);
    let effective_linear = &k * f * -I;

    let ev = eigenvalues(&monodromy);
    let mut args: Vec<f64> = ev.iter().map(|z| z.arg().abs() / period).collect();
    args.sort_by(|a, b| b.total_cmp(a));
    let frequencies = args.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let max_growth_rate = ev.iter().map(|z| z.norm().ln() / period).fold(0.0_f64, f64::max);

    let symplectic_defect = max_abs(&(&monodromy * &k * monodromy.transpose() - &k));
    let halving_residual = if opts.check_halving {
        let half = propagate(h, spins, opts.steps_per_period / 2, 1);
        Some(max_abs(&(&half[1] - &full)))
    } else {
        None
    };
    Ok(OracleResult {
        period,
        monodromy,
        forced_displacement,
        frequencies,
        max_growth_rate,
        effective_quadratic,
        effective_linear,
        symplectic_defect,
        halving_residual,
    })
}

impl OracleResult {
    /// Amplification `exp(-2r)` of a single mode read from the effective
    /// quadratic form.
    pub fn single_mode_gain(&self) -> Result<f64> {
        if self.effective_quadratic.nrows() != 2 {
            return Err(Error::DimensionMismatch("single-mode gain needs exactly one mode".into()));
        }
        let delta = -self.effective_quadratic[(1, 0)].re;
        let g = self.effective_quadratic[(0, 0)].norm();
        if delta.abs() <= g {
            return Err(Error::AboveThreshold { delta: delta.abs(), drive: g });
        }
        Ok(((delta.abs() + g) / (delta.abs() - g)).sqrt())
    }

    /// Effective detuning and coupling `(delta_e, g_e)` of a single mode.
    pub fn single_mode_parameters(&self) -> Option<(f64, f64)> {
        (self.effective_quadratic.nrows() == 2)
            .then(|| (-self.effective_quadratic[(1, 0)].re, self.effective_quadratic[(0, 0)].norm()))
    }
}

/// Exact single-mode gain markers for decoupling times `taus` (s) and
/// couplings `g_hz` (`g / 2 pi`, Hz) at drive frequency `mu` (rad/s).
///
/// Each point drives one mode with `A = B = 1` at the bare detuning chosen
/// by [`gain_with_cr`] and reads the gain off the one-period propagator.
pub fn oracle_gain_reference(
    mu: f64,
    taus: &[f64],
    g_hz: &[f64],
    compensated: bool,
    opts: &OracleOptions,
) -> Result<Vec<ReferencePoint>> {
    let grid: Vec<(f64, f64)> = taus.iter().flat_map(|&t| g_hz.iter().map(move |&g| (t, g))).collect();
    let one = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    grid.par_iter()
        .map(|&(tau, gh)| {
            if !(tau > 0.0) {
                return Err(Error::config("tau_s", "decoupling times must be positive"));
            }
            let g = TWO_PI * gh;
            let set = gain_with_cr(TWO_PI / tau, g, mu, compensated)?;
            let model = ModeModel::parametric_only(vec![set.delta_set], DMatrix::from_element(1, 1, g), one.clone(), one.clone(), 0.0);
            let h = HarmonicDecomposition::from_model(model, mu)?;
            let gain = symplectic_oracle(&h, &[], opts)?.single_mode_gain()?;
            Ok(ReferencePoint {
                g_over_2pi_hz: gh,
                tau_s: tau,
                gain,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::harmonics::ModeModel;

    fn one() -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))
    }

    #[test]
    fn free_mode_rotates_at_detuning() {
        let model = ModeModel::parametric_only(vec![0.7], DMatrix::zeros(1, 1), one(), one(), 0.0);
        let h = HarmonicDecomposition::from_model(model, 40.0).unwrap();
        let r = symplectic_oracle(&h, &[], &OracleOptions::default()).unwrap();
        assert!((r.frequencies[0] - 0.7).abs() < 1e-12);
        assert!((r.effective_quadratic[(1, 0)].re + 0.7).abs() < 1e-12);
        assert!(r.symplectic_defect < 1e-12);
    }

    #[test]
    fn logarithm_inverts_exponential() {
        let x = DMatrix::from_fn(3, 3, |i, j| Complex64::new(0.3 * i as f64 - 0.2 * j as f64, 0.1 * (i * j) as f64));
        let back = log_matrix(&x.clone().exp()).unwrap();
        assert!(max_abs(&(back - x)) < 1e-12);
    }
}
