// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Commutators of harmonic terms against explicit matrices in a truncated
//! two-mode Fock space.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ionpa::floquet::corrections::{commutator, OperatorSum};
use ionpa::floquet::HarmonicTerm;
use ionpa::Complex64;

/// Levels kept per mode. Matrix elements between states with at most
/// `MAX_QUANTA` quanta only pass through levels below this.
const LEVELS: usize = 8;
const MAX_QUANTA: usize = 2;

type Op = DMatrix<Complex64>;

fn annihilation(levels: usize) -> Op {
    DMatrix::from_fn(levels, levels, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn ladder() -> Vec<Op> {
    let a = annihilation(LEVELS);
    let id = Op::identity(LEVELS, LEVELS);
    let a0 = a.kronecker(&id);
    let a1 = id.kronecker(&a);
    vec![a0.clone(), a1.clone(), a0.adjoint(), a1.adjoint()]
}

fn c(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_term(rng: &mut ChaCha8Rng, ions: usize) -> HarmonicTerm {
    let mut t = HarmonicTerm::zeros(2, ions);
    let q = DMatrix::from_fn(4, 4, |_, _| c(rng));
    t.quad = &q + q.transpose();
    t.linear = DVector::from_fn(4, |_, _| c(rng));
    t.spin_linear = DMatrix::from_fn(ions, 4, |_, _| c(rng));
    t
}

/// Matrix of `Psi^T Q Psi / 2 + Psi^T V + sum_j s_j Psi^T W_j` with the spins
/// replaced by eigenvalues `s`.
fn term_matrix(psi: &[Op], quad: &DMatrix<Complex64>, linear: &DVector<Complex64>, spin_linear: &DMatrix<Complex64>, s: &[f64]) -> Op {
    let dim = psi[0].nrows();
    let mut out = Op::zeros(dim, dim);
    for a in 0..4 {
        for b in 0..4 {
            out += &psi[a] * &psi[b] * (quad[(a, b)] * 0.5);
        }
        let mut v = linear[a];
        for (j, sj) in s.iter().enumerate() {
            v += spin_linear[(j, a)] * *sj;
        }
        out += &psi[a] * v;
    }
    out
}

fn sum_matrix(psi: &[Op], o: &OperatorSum, s: &[f64]) -> Op {
    let dim = psi[0].nrows();
    let mut m = term_matrix(psi, &o.quad, &o.linear, &o.spin_linear, s);
    let mut scalar = Complex64::new(0.0, 0.0);
    for j in 0..s.len() {
        scalar += o.spin_single[j] * s[j];
        for k in 0..s.len() {
            scalar += o.spin_spin[(j, k)] * s[j] * s[k];
        }
    }
    m += Op::identity(dim, dim) * scalar;
    m
}

fn low_states() -> Vec<usize> {
    let mut v = Vec::new();
    for n0 in 0..LEVELS {
        for n1 in 0..LEVELS {
            if n0 + n1 <= MAX_QUANTA {
                v.push(n0 * LEVELS + n1);
            }
        }
    }
    v
}

/// Difference `exact - represented` on the low subspace, which must be a
/// multiple of the identity. Returns that multiple and the largest residual.
fn constant_offset(exact: &Op, repr: &Op) -> (Complex64, f64) {
    let states = low_states();
    let d = exact - repr;
    let lambda = d[(states[0], states[0])];
    let mut worst = 0.0_f64;
    for &r in &states {
        for &col in &states {
            let expect = if r == col { lambda } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((d[(r, col)] - expect).norm());
        }
    }
    (lambda, worst)
}

#[test]
fn commutators_match_fock_space_matrices() {
    let psi = ladder();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let configs = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
    for trial in 0..5 {
        let x = random_term(&mut rng, 2);
        let y = random_term(&mut rng, 2);
        let comm = commutator(&x, &y, true).unwrap();
        let mut offsets = Vec::new();
        for s in &configs {
            let ox = term_matrix(&psi, &x.quad, &x.linear, &x.spin_linear, s);
            let oy = term_matrix(&psi, &y.quad, &y.linear, &y.spin_linear, s);
            let exact = &ox * &oy - &oy * &ox;
            let (lambda, worst) = constant_offset(&exact, &sum_matrix(&psi, &comm, s));
            assert!(worst < 1e-10, "trial {trial}, spins {s:?}: residual {worst:.3e}");
            offsets.push(lambda);
        }
        // Only a spin-independent constant may be dropped.
        for o in &offsets[1..] {
            assert!((o - offsets[0]).norm() < 1e-10, "trial {trial}: spin-dependent constant {o} vs {}", offsets[0]);
        }
    }
}

#[test]
fn commutator_is_antisymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_term(&mut rng, 3);
    let y = random_term(&mut rng, 3);
    let xy = commutator(&x, &y, true).unwrap();
    let yx = commutator(&y, &x, true).unwrap();
    assert!((&xy.quad + &yx.quad).norm() < 1e-12);
    assert!((&xy.linear + &yx.linear).norm() < 1e-12);
    assert!((&xy.spin_linear + &yx.spin_linear).norm() < 1e-12);
    assert!((&xy.spin_single + &yx.spin_single).norm() < 1e-12);
    assert!((&xy.spin_spin + yx.spin_spin.transpose()).norm() < 1e-12);
}

#[test]
fn spin_terms_on_different_axes_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_term(&mut rng, 1);
    let mut y = random_term(&mut rng, 1);
    y.spin_free[0] = Complex64::new(1.0, 0.0);
    assert!(matches!(commutator(&x, &y, false), Err(ionpa::Error::Unsupported(_))));
}
