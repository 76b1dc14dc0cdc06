// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Trap configuration, effective potential and crystal equilibria.
//!
//! Internally every length is measured in units of
//! `l0 = (q^2 / (4 pi eps0 m wz^2))^(1/3)` and every energy in units of
//! `m wz^2 l0^2`. In these units the potential of `N` ions reads
//!
//! ```text
//! U = sum_j [ (kx x_j^2 + ky y_j^2 + z_j^2) / 2 + c4 z_j^4 ] + sum_{j<k} 1 / r_jk
//! ```
//!
//! For a Penning trap the rotating-frame planar stiffnesses are
//! `kx,y = beta +- delta_wall` with `beta = (s wr wc - wr^2) / wz^2 - 1/2`,
//! where `s = +1` for rotation in the magnetron sense. The residual magnetic
//! force in the rotating frame acts with the gyro frequency `wc - 2 s wr`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{EPSILON_0, ELEMENTARY_CHARGE, BE9_MASS};
use crate::error::{Error, Result};
use crate::minimize::{lbfgs, norm, LbfgsOptions, Objective};

/// Kind of trap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapKind {
    Penning,
    PaulPseudopotential,
}

/// Sense of the crystal rotation relative to the cyclotron motion.
///
/// `Magnetron` is the usual choice: the rotation vector is antiparallel to
/// the magnetic field for a positive ion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSense {
    #[default]
    Magnetron,
    Reverse,
}

impl RotationSense {
    fn sign(self) -> f64 {
        match self {
            RotationSense::Magnetron => 1.0,
            RotationSense::Reverse => -1.0,
        }
    }
}

/// Frame in which positions are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Rotating,
}

/// Physical trap parameters in SI units. Frequencies are angular (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub trap_kind: TrapKind,
    /// Magnetic field in tesla (Penning only).
    pub magnetic_field: f64,
    /// Axial trap frequency in rad/s.
    pub axial_freq: f64,
    /// Radial pseudopotential frequencies `(wx, wy)` in rad/s (Paul only).
    pub radial_freqs: Option<[f64; 2]>,
    /// Rotating-wall frequency in rad/s (Penning only).
    pub rotation_freq: f64,
    pub rotation_sense: RotationSense,
    /// Dimensionless rotating-wall strength.
    pub wall_strength: f64,
    /// Dimensionless quartic axial coefficient.
    pub anharmonic_c4: f64,
    /// Ion mass in kg.
    pub ion_mass: f64,
    /// Ion charge in C.
    pub ion_charge: f64,
    pub n_ions: usize,
}

impl TrapConfig {
    /// Penning trap holding 9Be+ ions, rotating in the magnetron sense.
    pub fn penning(
        magnetic_field: f64,
        axial_freq: f64,
        rotation_freq: f64,
        wall_strength: f64,
        n_ions: usize,
    ) -> Self {
        TrapConfig {
            trap_kind: TrapKind::Penning,
            magnetic_field,
            axial_freq,
            radial_freqs: None,
            rotation_freq,
            rotation_sense: RotationSense::Magnetron,
            wall_strength,
            anharmonic_c4: 0.0,
            ion_mass: BE9_MASS,
            ion_charge: ELEMENTARY_CHARGE,
            n_ions,
        }
    }

    /// Paul trap pseudopotential holding 9Be+ ions.
    pub fn paul(radial_freqs: [f64; 2], axial_freq: f64, n_ions: usize) -> Self {
        TrapConfig {
            trap_kind: TrapKind::PaulPseudopotential,
            magnetic_field: 0.0,
            axial_freq,
            radial_freqs: Some(radial_freqs),
            rotation_freq: 0.0,
            rotation_sense: RotationSense::Magnetron,
            wall_strength: 0.0,
            anharmonic_c4: 0.0,
            ion_mass: BE9_MASS,
            ion_charge: ELEMENTARY_CHARGE,
            n_ions,
        }
    }

    /// Checks physical admissibility, including planar confinement.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive and finite, got {v}")))
            }
        };
        if self.n_ions == 0 {
            return Err(Error::config("trap.n_ions", "must be at least 1"));
        }
        positive("trap.ion_mass", self.ion_mass)?;
        positive("trap.ion_charge", self.ion_charge)?;
        positive("trap.axial_freq", self.axial_freq)?;
        if !(self.anharmonic_c4.is_finite() && self.anharmonic_c4 >= 0.0) {
            return Err(Error::config(
                "trap.anharmonic_c4",
                format!("must be non-negative, got {}", self.anharmonic_c4),
            ));
        }
        match self.trap_kind {
            TrapKind::Penning => {
                positive("trap.magnetic_field", self.magnetic_field)?;
                positive("trap.rotation_freq", self.rotation_freq)?;
                if !self.wall_strength.is_finite() {
                    return Err(Error::config("trap.wall_strength", "must be finite"));
                }
            }
            TrapKind::PaulPseudopotential => {
                let [wx, wy] = self
                    .radial_freqs
                    .ok_or_else(|| Error::config("trap.radial_freqs", "required for a Paul trap"))?;
                positive("trap.radial_freqs[0]", wx)?;
                positive("trap.radial_freqs[1]", wy)?;
            }
        }
        let [kx, ky, _] = self.unchecked_stiffness();
        if !(kx > 0.0 && ky > 0.0) {
            return Err(Error::UnstableConfinement(format!(
                "planar stiffness must be positive, got kx = {kx:.6e}, ky = {ky:.6e} (units of m wz^2)"
            )));
        }
        Ok(())
    }

    /// Bare cyclotron frequency `qB/m` in rad/s.
    pub fn cyclotron_freq(&self) -> f64 {
        self.ion_charge * self.magnetic_field / self.ion_mass
    }

    /// Natural length unit `l0` in metres.
    pub fn length_scale(&self) -> f64 {
        let k = self.ion_charge.powi(2) / (4.0 * std::f64::consts::PI * EPSILON_0);
        (k / (self.ion_mass * self.axial_freq.powi(2))).cbrt()
    }

    /// Natural energy unit `m wz^2 l0^2` in joules.
    pub fn energy_scale(&self) -> f64 {
        self.ion_mass * self.axial_freq.powi(2) * self.length_scale().powi(2)
    }

    /// Natural force unit `m wz^2 l0` in newtons.
    pub fn force_scale(&self) -> f64 {
        self.ion_mass * self.axial_freq.powi(2) * self.length_scale()
    }

    /// Frame of the equilibrium and of the mode analysis.
    pub fn frame(&self) -> Frame {
        match self.trap_kind {
            TrapKind::Penning => Frame::Rotating,
            TrapKind::PaulPseudopotential => Frame::Lab,
        }
    }

    /// Penning `beta` parameter: mean planar stiffness in units of `m wz^2`.
    pub fn penning_beta(&self) -> f64 {
        let s = self.rotation_sense.sign();
        let wr = self.rotation_freq;
        (s * wr * self.cyclotron_freq() - wr * wr) / self.axial_freq.powi(2) - 0.5
    }

    fn unchecked_stiffness(&self) -> [f64; 3] {
        match self.trap_kind {
            TrapKind::Penning => {
                let beta = self.penning_beta();
                [beta + self.wall_strength, beta - self.wall_strength, 1.0]
            }
            TrapKind::PaulPseudopotential => {
                let [wx, wy] = self.radial_freqs.unwrap_or([0.0, 0.0]);
                let wz = self.axial_freq;
                [(wx / wz).powi(2), (wy / wz).powi(2), 1.0]
            }
        }
    }

    /// Harmonic stiffnesses `(kx, ky, kz)` in units of `m wz^2`.
    pub fn stiffness(&self) -> Result<[f64; 3]> {
        self.validate()?;
        Ok(self.unchecked_stiffness())
    }

    /// Rotating-frame gyro frequency `wc - 2 s wr` in rad/s (zero for Paul).
    pub fn gyro_freq(&self) -> f64 {
        match self.trap_kind {
            TrapKind::Penning => {
                self.cyclotron_freq() - 2.0 * self.rotation_sense.sign() * self.rotation_freq
            }
            TrapKind::PaulPseudopotential => 0.0,
        }
    }
}

/// Effective potential in natural units over interleaved coordinates
/// `(x_0, y_0, z_0, x_1, ...)`.
#[derive(Clone, Debug)]
pub struct EffectivePotential {
    pub stiffness: [f64; 3],
    pub quartic: f64,
    pub n_ions: usize,
}

/// Builds the effective potential for a validated configuration.
pub fn build_effective_potential(config: &TrapConfig) -> Result<EffectivePotential> {
    Ok(EffectivePotential {
        stiffness: config.stiffness()?,
        quartic: config.anharmonic_c4,
        n_ions: config.n_ions,
    })
}

impl EffectivePotential {
    fn check_len(&self, q: &[f64]) {
        assert_eq!(q.len(), 3 * self.n_ions, "coordinate vector has wrong length");
    }

    /// Potential energy in units of `m wz^2 l0^2`.
    pub fn energy(&self, q: &[f64]) -> f64 {
        self.check_len(q);
        let k = self.stiffness;
        let mut e = 0.0;
        for r in q.chunks_exact(3) {
            e += 0.5 * (k[0] * r[0] * r[0] + k[1] * r[1] * r[1] + k[2] * r[2] * r[2])
                + self.quartic * r[2].powi(4);
        }
        for i in 0..self.n_ions {
            let a = &q[3 * i..3 * i + 3];
            for j in (i + 1)..self.n_ions {
                let b = &q[3 * j..3 * j + 3];
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
                e += 1.0 / d2.sqrt();
            }
        }
        e
    }

    /// Energy and gradient in natural units.
    pub fn energy_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.check_len(q);
        let k = self.stiffness;
        let mut e = 0.0;
        for (r, g) in q.chunks_exact(3).zip(grad.chunks_exact_mut(3)) {
            e += 0.5 * (k[0] * r[0] * r[0] + k[1] * r[1] * r[1] + k[2] * r[2] * r[2])
                + self.quartic * r[2].powi(4);
            g[0] = k[0] * r[0];
            g[1] = k[1] * r[1];
            g[2] = k[2] * r[2] + 4.0 * self.quartic * r[2].powi(3);
        }
        for i in 0..self.n_ions {
            for j in (i + 1)..self.n_ions {
                let d = [
                    q[3 * i] - q[3 * j],
                    q[3 * i + 1] - q[3 * j + 1],
                    q[3 * i + 2] - q[3 * j + 2],
                ];
                let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let inv = 1.0 / d2.sqrt();
                e += inv;
                let inv3 = inv * inv * inv;
                for a in 0..3 {
                    grad[3 * i + a] -= d[a] * inv3;
                    grad[3 * j + a] += d[a] * inv3;
                }
            }
        }
        e
    }

    /// Gradient in natural units.
    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        self.energy_gradient(q, &mut g);
        g
    }

    /// Analytic Hessian in natural units.
    pub fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        self.check_len(q);
        let n = 3 * self.n_ions;
        let mut h = DMatrix::zeros(n, n);
        for j in 0..self.n_ions {
            for a in 0..3 {
                h[(3 * j + a, 3 * j + a)] = self.stiffness[a];
            }
            h[(3 * j + 2, 3 * j + 2)] += 12.0 * self.quartic * q[3 * j + 2].powi(2);
        }
        for i in 0..self.n_ions {
            for j in (i + 1)..self.n_ions {
                let d = [
                    q[3 * i] - q[3 * j],
                    q[3 * i + 1] - q[3 * j + 1],
                    q[3 * i + 2] - q[3 * j + 2],
                ];
                let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let inv = 1.0 / d2.sqrt();
                let inv3 = inv * inv * inv;
                let inv5 = inv3 * inv * inv;
                for a in 0..3 {
                    for b in 0..3 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        let c = 3.0 * d[a] * d[b] * inv5 - delta * inv3;
                        h[(3 * i + a, 3 * i + b)] += c;
                        h[(3 * j + a, 3 * j + b)] += c;
                        h[(3 * i + a, 3 * j + b)] -= c;
                        h[(3 * j + a, 3 * i + b)] -= c;
                    }
                }
            }
        }
        h
    }
}

impl Objective for EffectivePotential {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.energy_gradient(x, grad)
    }
}

/// Converged crystal configuration in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrystalEquilibrium {
    /// Interleaved positions `(x_0, y_0, z_0, x_1, ...)` in metres.
    pub positions: Vec<f64>,
    pub frame: Frame,
    /// Potential energy in joules, measured from the trap centre.
    pub potential_energy: f64,
    /// Euclidean norm of the force residual in newtons.
    pub gradient_norm: f64,
    pub seed: u64,
}

impl CrystalEquilibrium {
    pub fn n_ions(&self) -> usize {
        self.positions.len() / 3
    }

    /// Position of ion `j` in metres.
    pub fn position(&self, j: usize) -> [f64; 3] {
        [self.positions[3 * j], self.positions[3 * j + 1], self.positions[3 * j + 2]]
    }

    /// Axial coordinates in metres.
    pub fn z(&self) -> Vec<f64> {
        self.positions.chunks_exact(3).map(|r| r[2]).collect()
    }

    /// Positions in units of `l0`.
    pub fn scaled_positions(&self, config: &TrapConfig) -> Vec<f64> {
        let l0 = config.length_scale();
        self.positions.iter().map(|v| v / l0).collect()
    }
}

/// Solver controls.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Convergence threshold on the gradient norm in natural units.
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            seed: 0,
            restarts: 4,
            gradient_tol: 1e-10,
            max_iterations: 200_000,
        }
    }
}

/// Result of a solve including diagnostics of the retained restart.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub equilibrium: CrystalEquilibrium,
    /// Energies (natural units) after each accepted step of the best restart.
    pub energy_trace: Vec<f64>,
    /// Final energy of every restart, `None` where it failed to converge.
    pub restart_energies: Vec<Option<f64>>,
    pub best_restart: usize,
    pub iterations: usize,
}

/// Finds the lowest-energy equilibrium over `restarts` seeded starts.
pub fn solve_equilibrium(config: &TrapConfig, seed: u64, restarts: usize) -> Result<CrystalEquilibrium> {
    let opts = SolverOptions {
        seed,
        restarts,
        ..SolverOptions::default()
    };
    Ok(solve_equilibrium_with(config, &opts)?.equilibrium)
}

struct Attempt {
    q: Vec<f64>,
    energy: f64,
    gradient_norm: f64,
    trace: Vec<f64>,
    iterations: usize,
}

/// Full solver entry point returning diagnostics.
pub fn solve_equilibrium_with(config: &TrapConfig, opts: &SolverOptions) -> Result<SolveReport> {
    let pot = build_effective_potential(config)?;
    if opts.restarts == 0 {
        return Err(Error::config("solver.restarts", "must be at least 1"));
    }
    let attempts: Vec<Result<Attempt>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| single_attempt(&pot, opts, r))
        .collect();

    let mut best: Option<(usize, &Attempt)> = None;
    let mut last_err = None;
    let mut restart_energies = Vec::with_capacity(attempts.len());
    for (r, a) in attempts.iter().enumerate() {
        match a {
            Ok(att) => {
                restart_energies.push(Some(att.energy));
                // Strict comparison keeps the lowest index on ties.
                if best.is_none_or(|(_, b)| att.energy < b.energy) {
                    best = Some((r, att));
                }
            }
            Err(e) => {
                restart_energies.push(None);
                last_err = Some(e);
            }
        }
    }
    let Some((best_restart, att)) = best else {
        return Err(match last_err {
            Some(Error::NonConvergence {
                iterations,
                gradient_norm,
                energy,
            }) => Error::NonConvergence {
                iterations: *iterations,
                gradient_norm: *gradient_norm,
                energy: *energy,
            },
            _ => Error::Numerical("no restart produced a result".into()),
        });
    };

    let l0 = config.length_scale();
    let equilibrium = CrystalEquilibrium {
        positions: att.q.iter().map(|v| v * l0).collect(),
        frame: config.frame(),
        potential_energy: att.energy * config.energy_scale(),
        gradient_norm: att.gradient_norm * config.force_scale(),
        seed: opts.seed,
    };
    Ok(SolveReport {
        equilibrium,
        energy_trace: att.trace.clone(),
        restart_energies,
        best_restart,
        iterations: att.iterations,
    })
}

/// Draws a start inside a spheroid sized for a uniform-density crystal.
fn initial_guess(pot: &EffectivePotential, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = pot.stiffness;
    let kbar = (k[0] * k[1] * k[2]).cbrt();
    let radius = (pot.n_ions as f64 / kbar).cbrt();
    let axes: Vec<f64> = k.iter().map(|ki| radius * (kbar / ki).sqrt()).collect();
    let mut q = Vec::with_capacity(3 * pot.n_ions);
    for _ in 0..pot.n_ions {
        loop {
            let p: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                q.extend((0..3).map(|a| p[a] * axes[a]));
                break;
            }
        }
    }
    q
}

fn single_attempt(pot: &EffectivePotential, opts: &SolverOptions, restart: usize) -> Result<Attempt> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(restart as u64);
    let mut q = initial_guess(pot, &mut rng);
    if pot.n_ions == 1 {
        q.iter_mut().for_each(|v| *v *= 1e-3);
    }

    let lopts = LbfgsOptions {
        gradient_tol: (opts.gradient_tol * 1e2).max(1e-6),
        max_iterations: opts.max_iterations,
        memory: 12,
        max_step: 0.3,
    };
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut kicks = 0;
    loop {
        let out = lbfgs(pot, q, &lopts);
        iterations += out.iterations;
        if trace.is_empty() {
            trace.extend_from_slice(&out.trace);
        } else {
            trace.extend_from_slice(&out.trace[1..]);
        }
        q = out.x;
        let gnorm = norm(&out.gradient);
        if iterations >= opts.max_iterations && gnorm > 1e-6 {
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: gnorm,
                energy: out.value,
            });
        }
        let (mut q_polished, mut status) = newton_polish(pot, q.clone(), opts.gradient_tol, false, &mut trace);
        if matches!(status, Polish::Converged(_)) && is_planar(&q_polished, PLANAR_SNAP) {
            // A single-plane crystal is symmetric under z -> -z; remove the
            // residual axial offsets so the axial and planar problems separate.
            let mut flat = q_polished.clone();
            flat.iter_mut().skip(2).step_by(3).for_each(|z| *z = 0.0);
            let (q_flat, st) = newton_polish(pot, flat, opts.gradient_tol, true, &mut trace);
            q_polished = q_flat;
            status = st;
        }
        match status {
            Polish::Converged(gn) => {
                let energy = pot.energy(&q_polished);
                return Ok(Attempt {
                    q: q_polished,
                    energy,
                    gradient_norm: gn,
                    trace,
                    iterations,
                });
            }
            Polish::Saddle(direction) if kicks < 20 => {
                kicks += 1;
                // Step off the saddle along the unstable direction.
                let scale = 0.05;
                let mut trial: Vec<f64> =
                    q.iter().zip(&direction).map(|(a, d)| a + scale * d).collect();
                if pot.energy(&trial) > pot.energy(&q) {
                    trial = q.iter().zip(&direction).map(|(a, d)| a - scale * d).collect();
                }
                trace.push(pot.energy(&trial).min(*trace.last().unwrap()));
                q = trial;
            }
            Polish::Saddle(_) | Polish::Stalled => {
                let mut g = vec![0.0; q.len()];
                let energy = pot.energy_gradient(&q_polished, &mut g);
                return Err(Error::NonConvergence {
                    iterations,
                    gradient_norm: norm(&g),
                    energy,
                });
            }
        }
    }
}

/// Axial extent, in units of `l0`, below which a crystal counts as planar.
pub const PLANAR_SNAP: f64 = 1e-7;

/// True when every axial coordinate is within `tol` of zero.
pub fn is_planar(q: &[f64], tol: f64) -> bool {
    q.iter().skip(2).step_by(3).all(|z| z.abs() <= tol)
}

enum Polish {
    Converged(f64),
    Saddle(Vec<f64>),
    Stalled,
}

/// Newton iterations on the analytic Hessian. Directions with vanishing
/// curvature (continuous symmetries) are projected out.
fn newton_polish(
    pot: &EffectivePotential,
    mut q: Vec<f64>,
    tol: f64,
    planar: bool,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, Polish) {
    let n = q.len();
    let mut g = vec![0.0; n];
    let mut e = pot.energy_gradient(&q, &mut g);
    let mut gnorm = norm(&g);
    for _ in 0..60 {
        let h = pot.hessian(&q);
        let eig = SymmetricEigen::new(h);
        let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let (imin, lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if lmin < -1e-7 * lmax {
            return (q, Polish::Saddle(eig.eigenvectors.column(imin).iter().copied().collect()));
        }
        if gnorm <= tol {
            return (q, Polish::Converged(gnorm));
        }
        let floor = 1e-9 * lmax;
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut step = nalgebra::DVector::zeros(n);
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > floor {
                let v = eig.eigenvectors.column(i);
                step -= v * (v.dot(&gv) / lam);
            }
        }
        if planar {
            step.iter_mut().skip(2).step_by(3).for_each(|s| *s = 0.0);
        }
        let mut alpha = 1.0;
        let mut improved = false;
        let mut g_new = vec![0.0; n];
        for _ in 0..30 {
            let q_new: Vec<f64> = q.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            let e_new = pot.energy_gradient(&q_new, &mut g_new);
            let gn_new = norm(&g_new);
            // Near the minimum the energy change is below round-off, so the
            // gradient norm decides, with energy allowed only round-off noise.
            let noise = 8.0 * f64::EPSILON * e.abs().max(1.0);
            if e_new <= e || (gn_new < gnorm && e_new <= e + noise) {
                q = q_new;
                e = e_new.min(e);
                std::mem::swap(&mut g, &mut g_new);
                gnorm = gn_new;
                trace.push(e);
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if gnorm <= tol {
        (q, Polish::Converged(gnorm))
    } else {
        (q, Polish::Stalled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TWO_PI;

    fn fd_gradient(pot: &EffectivePotential, q: &[f64], h: f64) -> Vec<f64> {
        (0..q.len())
            .map(|i| {
                let mut p = q.to_vec();
                let mut m = q.to_vec();
                p[i] += h;
                m[i] -= h;
                (pot.energy(&p) - pot.energy(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pot = EffectivePotential {
            stiffness: [0.3, 0.25, 1.0],
            quartic: 0.02,
            n_ions: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = initial_guess(&pot, &mut rng);
        let g = pot.gradient(&q);
        let fd = fd_gradient(&pot, &q, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let pot = EffectivePotential {
            stiffness: [0.4, 0.35, 1.0],
            quartic: 0.01,
            n_ions: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = initial_guess(&pot, &mut rng);
        let h = pot.hessian(&q);
        let eps = 1e-6;
        for i in 0..q.len() {
            let mut p = q.clone();
            let mut m = q.clone();
            p[i] += eps;
            m[i] -= eps;
            let gp = pot.gradient(&p);
            let gm = pot.gradient(&m);
            for j in 0..q.len() {
                let fd = (gp[j] - gm[j]) / (2.0 * eps);
                assert!((h[(j, i)] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn single_ion_sits_at_origin() {
        let cfg = TrapConfig::penning(4.4588, TWO_PI * 1.58e6, TWO_PI * 0.18e6, 0.01, 1);
        let eq = solve_equilibrium(&cfg, 1, 2).unwrap();
        assert!(eq.positions.iter().all(|v| v.abs() < 1e-12));
        assert!(eq.potential_energy.abs() < 1e-40);
    }

    #[test]
    fn two_ion_paul_separation() {
        let wz = TWO_PI * 1.0e6;
        let cfg = TrapConfig::paul([TWO_PI * 5.0e6, TWO_PI * 5.2e6], wz, 2);
        let eq = solve_equilibrium(&cfg, 11, 3).unwrap();
        let l0 = cfg.length_scale();
        let d = (eq.position(0)[2] - eq.position(1)[2]).abs();
        assert!((d / l0 - 2f64.cbrt()).abs() < 1e-9);
    }

    #[test]
    fn unstable_planar_confinement_is_rejected() {
        let cfg = TrapConfig::penning(4.4588, TWO_PI * 1.58e6, TWO_PI * 0.01e6, 0.0, 5);
        assert!(matches!(cfg.validate(), Err(Error::UnstableConfinement(_))));
        let cfg = TrapConfig::paul([TWO_PI * 1e6, 0.0], TWO_PI * 1e6, 2);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rotation_sense_changes_beta_and_gyro() {
        let mut cfg = TrapConfig::penning(4.4588, TWO_PI * 1.58e6, TWO_PI * 0.18e6, 0.0, 1);
        let b_mag = cfg.penning_beta();
        let w_mag = cfg.gyro_freq();
        cfg.rotation_sense = RotationSense::Reverse;
        assert!(cfg.penning_beta() < b_mag);
        assert!(cfg.gyro_freq() > w_mag);
    }

    #[test]
    fn restarts_are_deterministic() {
        let cfg = TrapConfig::penning(4.4588, TWO_PI * 1.58e6, TWO_PI * 0.2e6, 0.01, 12);
        let a = solve_equilibrium(&cfg, 42, 3).unwrap();
        let b = solve_equilibrium(&cfg, 42, 3).unwrap();
        assert_eq!(a, b);
    }
}
