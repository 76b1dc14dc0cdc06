// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Property-based invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use ionpa::constants::TWO_PI;
use ionpa::drive_config::{derive_phases, mode_coupling_strengths, IonDrivePhases, PaDriveSpec, SdfKind, SdfSpec};
use ionpa::floquet::gain_with_cr;
use ionpa::io::export::fmt_f64;
use ionpa::normal_modes::{compute_modes, ModeSpectrum};
use ionpa::parametric::{amplify_mode, compute_overlaps, effective_detuning, numeric_effective_detuning, solve_bogoliubov};
use ionpa::spin_interactions::{apply_scaling, coupling_matrix};
use ionpa::trap_model::{build_effective_potential, solve_equilibrium, CrystalEquilibrium, TrapConfig};
use ionpa::Complex64;

struct Fixture {
    cfg: TrapConfig,
    eq: CrystalEquilibrium,
    spec: ModeSpectrum,
    com: usize,
}

/// A small three-dimensional Penning crystal shared by the tests.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = TrapConfig::penning(4.4588, TWO_PI * 1.62e6, TWO_PI * 4.0e5, 0.015, 12);
        let eq = solve_equilibrium(&cfg, 11, 2).unwrap();
        let spec = compute_modes(&cfg, &eq).unwrap();
        let com = spec.axial_com_index().unwrap();
        Fixture { cfg, eq, spec, com }
    })
}

fn light_shift(f: &Fixture, mode: usize, delta: f64, dk: f64) -> (SdfSpec, IonDrivePhases) {
    let sdf = SdfSpec {
        kind: SdfKind::LightShift,
        strength: 1e-23,
        delta_k: dk,
        mu: f.spec.frequencies[mode] + delta,
        target_mode: mode,
        phase_offset: 0.2,
    };
    let ph = derive_phases(&f.eq, &sdf).unwrap();
    (sdf, ph)
}

fn pa_ratio(spec: &ModeSpectrum, mode: usize, coupling: f64, theta: f64) -> PaDriveSpec {
    let unit = compute_overlaps(spec, &PaDriveSpec { omega_p: 1.0, theta });
    let l = spec.zero_point_lengths[mode];
    PaDriveSpec {
        omega_p: coupling / (l * l * unit.a[(mode, mode)].norm()),
        theta,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symplectic_detuning_matches_closed_form(
        delta in 0.01f64..100.0,
        sign in prop::bool::ANY,
        frac in 0.0f64..0.995,
        mag in 0.1f64..2.0,
        arg in -PI..PI,
        theta in -PI..PI,
    ) {
        let delta = if sign { delta } else { -delta };
        let a = Complex64::from_polar(mag, arg);
        let g = frac * delta.abs() / mag;
        let closed = effective_detuning(delta, g, a).unwrap();
        let numeric = numeric_effective_detuning(delta, g, a, theta).unwrap();
        prop_assert!((closed - numeric).abs() <= 1e-10 * closed.abs());
    }

    #[test]
    fn squeezing_gain_matches_detuning_ratio(delta in 0.1f64..50.0, frac in 0.0f64..0.99, theta in -PI..PI) {
        let a = Complex64::new(1.0, 0.0);
        let g = frac * delta;
        let sol = solve_bogoliubov(delta, g, a, theta).unwrap();
        let expect = ((delta + g) / (delta - g)).sqrt();
        prop_assert!(sol.r <= 0.0);
        prop_assert!(((-2.0 * sol.r).exp() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn scale_factors_lie_between_squeezing_bounds(frac in 0.0f64..0.95, theta in -PI..PI, dk in 1e5f64..5e6) {
        let f = fixture();
        let delta = TWO_PI * 1e4;
        let pa = pa_ratio(&f.spec, f.com, frac * delta, theta);
        let ov = compute_overlaps(&f.spec, &pa);
        let (_, ph) = light_shift(f, f.com, delta, dk);
        let sol = amplify_mode(&f.spec, &ov, &ph, f.com, delta, theta, 1.0).unwrap();
        let (lo, hi) = (sol.r.exp(), (-sol.r).exp());
        for s in &sol.scale_factors {
            prop_assert!(s.norm() >= lo * (1.0 - 1e-12) && s.norm() <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn observables_are_gauge_invariant(phases in prop::collection::vec(0.0f64..TWO_PI, 36), theta in -PI..PI) {
        let f = fixture();
        let delta = TWO_PI * 1.5e4;
        let pa = pa_ratio(&f.spec, f.com, 0.5 * delta, theta);
        let (sdf, ph) = light_shift(f, f.com, delta, 1.3e6);
        let observe = |s: &ModeSpectrum| {
            let ov = compute_overlaps(s, &pa);
            let sol = amplify_mode(s, &ov, &ph, f.com, delta, theta, 1.0).unwrap();
            let fs = mode_coupling_strengths(&sdf, s);
            let j = coupling_matrix(s, &fs, &ph, f.com, sol.delta_eff).unwrap();
            let j_on = apply_scaling(&j, &sol.scale_factors).unwrap();
            (ov.a.map(|v| v.norm()), j_on.j.map(|v| v.re), sol.scale_factors.iter().map(|v| v.norm()).collect::<Vec<_>>(), sol.gain_db)
        };
        let base = observe(&f.spec);
        let other = observe(&f.spec.rephased(&phases).unwrap());
        let tol = |m: f64| 1e-10 * m.max(f64::MIN_POSITIVE);
        let amax = base.0.amax();
        prop_assert!((&base.0 - &other.0).amax() <= tol(amax));
        let jmax = base.1.amax();
        prop_assert!((&base.1 - &other.1).amax() <= tol(jmax));
        for (x, y) in base.2.iter().zip(&other.2) {
            prop_assert!((x - y).abs() <= 1e-10 * x);
        }
        prop_assert!((base.3 - other.3).abs() <= 1e-10 * base.3.abs());
    }

    #[test]
    fn gradient_matches_finite_differences(shift in prop::collection::vec(-0.1f64..0.1, 36)) {
        let f = fixture();
        let pot = build_effective_potential(&f.cfg).unwrap();
        let l0 = f.cfg.length_scale();
        let q: Vec<f64> = f.eq.positions.iter().zip(&shift).map(|(x, s)| x / l0 + s).collect();
        let grad = pot.gradient(&q);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let h = 1e-5;
        for k in 0..q.len() {
            let (mut p, mut m) = (q.clone(), q.clone());
            p[k] += h;
            m[k] -= h;
            let fd = (pot.energy(&p) - pot.energy(&m)) / (2.0 * h);
            prop_assert!((fd - grad[k]).abs() <= 1e-6 * norm.max(1.0));
        }
    }

    #[test]
    fn couplings_are_symmetric_and_odd_in_detuning(delta in 1e3f64..1e5, dk in 1e5f64..5e6, mode in 0usize..36) {
        let f = fixture();
        prop_assume!(!f.spec.is_zero_mode(mode));
        let (sdf, ph) = light_shift(f, mode, delta, dk);
        let fs = mode_coupling_strengths(&sdf, &f.spec);
        let plus = coupling_matrix(&f.spec, &fs, &ph, mode, delta).unwrap();
        let minus = coupling_matrix(&f.spec, &fs, &ph, mode, -delta).unwrap();
        let scale = plus.j.camax();
        prop_assert!((&plus.j - plus.j.transpose()).camax() <= 1e-14 * scale);
        prop_assert!((&plus.j + &minus.j).camax() <= 1e-14 * scale);
    }

    #[test]
    fn compensation_raises_gain(g_hz in 1.0f64..2.0e4, tau in 1e-4f64..2e-3) {
        let mu = TWO_PI * 3.045e6;
        let u = gain_with_cr(TWO_PI / tau, TWO_PI * g_hz, mu, false).unwrap().gain;
        let c = gain_with_cr(TWO_PI / tau, TWO_PI * g_hz, mu, true).unwrap().gain;
        prop_assert!(c >= u);
        prop_assert!(u >= 1.0);
    }

    #[test]
    fn csv_floats_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}

#[test]
fn com_couplings_without_phase_spread_are_uniform() {
    let cfg = TrapConfig::penning(4.4588, TWO_PI * 1.62e6, TWO_PI * 2.0e5, 0.015, 16);
    let eq = solve_equilibrium(&cfg, 4, 2).unwrap();
    let spec = compute_modes(&cfg, &eq).unwrap();
    let com = spec.axial_com_index().unwrap();
    let sdf = SdfSpec {
        kind: SdfKind::MsPhaseSensitive,
        strength: TWO_PI * 1e4,
        delta_k: 1e6,
        mu: spec.frequencies[com] + 1e4,
        target_mode: com,
        phase_offset: 0.0,
    };
    let ph = derive_phases(&eq, &sdf).unwrap();
    let fs = mode_coupling_strengths(&sdf, &spec);
    let j = coupling_matrix(&spec, &fs, &ph, com, 1e4).unwrap();
    let first = j.re(0, 1);
    for a in 0..16 {
        for b in 0..16 {
            if a != b {
                assert!((j.re(a, b) - first).abs() <= 1e-12 * first.abs());
            }
        }
    }
}
