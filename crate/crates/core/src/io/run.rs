// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end analyses driven by a configuration file.
//!
//! Each [`Analysis`] writes its artefacts plus `manifest.json` into an output
//! directory. An `equilibrium.csv` already present in that directory is
//! reused when its sidecar records the same configuration hash and seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{load_config, parse_grid, ConfigFile, LoadedConfig, ModeSelector};
use super::export::{self, fmt_f64, write_json};
use crate::constants::TWO_PI;
use crate::drive_config::{derive_phases, mode_coupling_strengths, IonDrivePhases, PaDriveSpec, SdfKind, SdfSpec};
use crate::error::{Error, Result};
use crate::floquet::{gain_table, oracle_gain_reference, overlay, OracleOptions};
use crate::normal_modes::{compute_modes, ModeSpectrum};
use crate::parametric::{amplify_mode, compute_overlaps, detuning_for_effective, AmplificationSolution, OverlapMatrices, DEFAULT_MIXING_THRESHOLD};
use crate::spin_interactions::{
    apply_scaling, assign_layers, bilayer_sweep, coupling_matrix, layer_means, pair_histogram, Layer, LayerAssignment, LayerMeans,
    LayerOptions,
};
use crate::trap_model::{solve_equilibrium_with, CrystalEquilibrium, TrapConfig};

/// Analyses available from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Equilibrium,
    Modes,
    Overlap,
    Squeeze,
    Couplings,
    Bilayer,
    FloquetGain,
    FloquetReference,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Equilibrium => "equilibrium",
            Analysis::Modes => "modes",
            Analysis::Overlap => "overlap",
            Analysis::Squeeze => "squeeze",
            Analysis::Couplings => "couplings",
            Analysis::Bilayer => "bilayer",
            Analysis::FloquetGain => "floquet-gain",
            Analysis::FloquetReference => "floquet-reference",
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub mode_index: Option<usize>,
    pub theta_grid: Option<String>,
    pub reference_csv: Option<PathBuf>,
    pub compensated: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

/// Record of one run. Contains no timestamps so that reruns are identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_path: String,
    pub output_dir: String,
    pub seed: u64,
    pub tool_version: String,
    pub config_sha256: String,
    pub outputs: Vec<ManifestEntry>,
}

/// Outcome of [`run`].
#[derive(Clone, Debug)]
pub struct RunReport {
    pub manifest: Manifest,
    /// Non-fatal diagnostics, such as strong mode mixing.
    pub warnings: Vec<String>,
}

/// Summary written by `squeeze`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeSummary {
    pub mode: usize,
    #[serde(rename = "mode_frequency_Hz")]
    pub mode_frequency_hz: f64,
    #[serde(rename = "mu_Hz")]
    pub mu_hz: f64,
    #[serde(rename = "detuning_Hz")]
    pub detuning_hz: f64,
    #[serde(rename = "detuning_eff_Hz")]
    pub detuning_eff_hz: f64,
    #[serde(rename = "g_Hz")]
    pub g_hz: f64,
    pub re_a_nn: f64,
    pub im_a_nn: f64,
    pub theta: f64,
    pub r: f64,
    pub phi_sq: f64,
    pub gain_db: f64,
    pub off_diagonal_mass: f64,
    pub mixing_warning: bool,
}

/// Summary written by `bilayer`. Couplings in Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilayerSummary {
    pub n_top: usize,
    pub n_bottom: usize,
    pub n_scaffold: usize,
    pub top_z_m: f64,
    pub bottom_z_m: f64,
    pub separation_m: f64,
    pub delta_k: f64,
    pub phase_offset: f64,
    pub mode: usize,
    pub theta: f64,
    pub r: f64,
    pub gain_db: f64,
    pub pa_off: LayerMeans,
    pub pa_on: LayerMeans,
    /// `pa_on.top / pa_off.top` against the single-mode prediction `exp(2r)`.
    pub top_ratio: f64,
    pub top_ratio_predicted: f64,
    pub bottom_ratio: f64,
    pub bottom_ratio_predicted: f64,
    /// Range of the interlayer mean over the sweep, relative to the mean
    /// magnitude of the two intralayer couplings without the drive.
    pub interlayer_variation: f64,
    pub mixing_warning: bool,
}

/// Runs `analysis` and returns the manifest that was written.
pub fn run(analysis: Analysis, opts: &RunOptions) -> Result<RunReport> {
    let loaded = load_config(&opts.config_path)?;
    let seed = opts.seed.unwrap_or(loaded.config.solver.seed);
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut ctx = Context {
        loaded,
        opts,
        seed,
        outputs: Vec::new(),
        warnings: Vec::new(),
    };
    match analysis {
        Analysis::Equilibrium => {
            ctx.equilibrium(true)?;
        }
        Analysis::Modes => {
            let (_, _) = ctx.modes()?;
        }
        Analysis::Overlap => {
            let (_, spec) = ctx.modes()?;
            let mode = ctx.mode(&spec)?;
            let pa = ctx.pa(&spec, mode)?;
            let ov = compute_overlaps(&spec, &pa);
            ctx.emit("overlaps.csv", |p| export::write_overlaps(p, &ov))?;
        }
        Analysis::Squeeze => {
            let drive = ctx.drive(false)?;
            let sol = drive.amplify(drive.pa.theta)?;
            ctx.check_mixing(&sol);
            let summary = squeeze_summary(&drive, &sol);
            ctx.emit("squeeze.json", |p| write_json(p, &summary))?;
            ctx.emit("scale_factors.csv", |p| export::write_scale_factors(p, &sol.scale_factors))?;
        }
        Analysis::Couplings => ctx.couplings()?,
        Analysis::Bilayer => ctx.bilayer()?,
        Analysis::FloquetGain => ctx.floquet_gain()?,
        Analysis::FloquetReference => ctx.floquet_reference()?,
    }
    let manifest = Manifest {
        subcommand: analysis.name().to_string(),
        config_path: opts.config_path.display().to_string(),
        output_dir: opts.out_dir.display().to_string(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: ctx.loaded.sha256.clone(),
        outputs: ctx.outputs,
    };
    write_json(&opts.out_dir.join("manifest.json"), &manifest)?;
    Ok(RunReport {
        manifest,
        warnings: ctx.warnings,
    })
}

struct Context<'a> {
    loaded: LoadedConfig,
    opts: &'a RunOptions,
    seed: u64,
    outputs: Vec<ManifestEntry>,
    warnings: Vec<String>,
}

/// Everything needed to evaluate couplings on one mode.
struct Drive {
    spec: ModeSpectrum,
    mode: usize,
    sdf: SdfSpec,
    phases: IonDrivePhases,
    pa: PaDriveSpec,
    overlaps: OverlapMatrices,
    /// `mu - w_n`, rad/s.
    delta: f64,
    layers: Option<LayerAssignment>,
}

impl Drive {
    fn amplify(&self, theta: f64) -> Result<AmplificationSolution> {
        amplify_mode(&self.spec, &self.overlaps, &self.phases, self.mode, self.delta, theta, DEFAULT_MIXING_THRESHOLD)
    }

    fn has_pa(&self) -> bool {
        self.pa.omega_p != 0.0
    }

    /// Detuning that sets the gate time: the effective detuning under the
    /// parametric drive, or the bare detuning without it.
    fn gate_detuning(&self) -> Result<f64> {
        if self.has_pa() {
            Ok(self.amplify(self.pa.theta)?.delta_eff)
        } else {
            Ok(self.delta)
        }
    }
}

fn squeeze_summary(d: &Drive, sol: &AmplificationSolution) -> SqueezeSummary {
    SqueezeSummary {
        mode: d.mode,
        mode_frequency_hz: d.spec.frequencies[d.mode] / TWO_PI,
        mu_hz: d.sdf.mu / TWO_PI,
        detuning_hz: sol.delta / TWO_PI,
        detuning_eff_hz: sol.delta_eff / TWO_PI,
        g_hz: sol.g * sol.a_nn.norm() / TWO_PI,
        re_a_nn: sol.a_nn.re,
        im_a_nn: sol.a_nn.im,
        theta: sol.theta,
        r: sol.r,
        phi_sq: sol.phi_sq,
        gain_db: sol.gain_db,
        off_diagonal_mass: sol.off_diagonal_mass,
        mixing_warning: sol.mixing_warning,
    }
}

fn scale_hz(m: LayerMeans) -> LayerMeans {
    LayerMeans {
        top: m.top / TWO_PI,
        bottom: m.bottom / TWO_PI,
        inter: m.inter / TWO_PI,
    }
}

impl Context<'_> {
    fn cfg(&self) -> &ConfigFile {
        &self.loaded.config
    }

    fn out(&self, name: &str) -> PathBuf {
        self.opts.out_dir.join(name)
    }

    /// Writes one artefact and records its hash.
    fn emit(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let path = self.out(name);
        write(&path)?;
        self.record(name)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.out(name))?;
        self.outputs.push(ManifestEntry {
            file: name.to_string(),
            sha256: super::config::sha256_hex(&bytes),
        });
        Ok(())
    }

    fn trap(&self) -> Result<TrapConfig> {
        self.cfg().trap()?.to_trap_config()
    }

    fn equilibrium(&mut self, force: bool) -> Result<CrystalEquilibrium> {
        let trap = self.trap()?;
        if !force && self.out("equilibrium.csv").exists() {
            if let Ok((eq, side)) = export::read_equilibrium(&self.opts.out_dir) {
                if side.config_sha256 == self.loaded.sha256 && side.seed == self.seed && side.n_ions == trap.n_ions {
                    self.record("equilibrium.csv")?;
                    self.record("equilibrium.json")?;
                    return Ok(eq);
                }
            }
        }
        let report = solve_equilibrium_with(&trap, &self.cfg().solver.options(Some(self.seed)))?;
        let eq = report.equilibrium;
        let sha = self.loaded.sha256.clone();
        export::write_equilibrium(&self.opts.out_dir, &eq, &sha)?;
        self.record("equilibrium.csv")?;
        self.record("equilibrium.json")?;
        if force {
            let rows: Vec<Vec<String>> = report
                .energy_trace
                .iter()
                .enumerate()
                .map(|(i, e)| vec![i.to_string(), fmt_f64(*e)])
                .collect();
            self.emit("energy_trace.csv", |p| export::write_csv(p, &["step", "energy"], &rows))?;
        }
        Ok(eq)
    }

    fn modes(&mut self) -> Result<(CrystalEquilibrium, ModeSpectrum)> {
        let eq = self.equilibrium(false)?;
        let spec = compute_modes(&self.trap()?, &eq)?;
        let file = export::SpectrumFile::from_spectrum(&spec);
        self.emit("modes.json", |p| write_json(p, &file))?;
        Ok((eq, spec))
    }

    fn mode(&self, spec: &ModeSpectrum) -> Result<usize> {
        let selector = match (self.opts.mode_index, &self.cfg().sdf) {
            (Some(i), _) => ModeSelector::Index(i),
            (None, Some(sdf)) => sdf.target_mode.clone(),
            (None, None) => ModeSelector::default(),
        };
        let n = match selector {
            ModeSelector::Index(i) => i,
            ModeSelector::Named(_) => spec
                .axial_com_index()
                .ok_or_else(|| Error::config("sdf.target_mode", "spectrum has no axial centre-of-mass mode"))?,
        };
        if n >= spec.n_modes() {
            return Err(Error::IndexOutOfRange(format!("mode {n} of {}", spec.n_modes())));
        }
        if spec.is_zero_mode(n) {
            return Err(Error::config("sdf.target_mode", format!("mode {n} has zero frequency")));
        }
        Ok(n)
    }

    /// Parametric drive for the configuration, or a zero drive when `[pa]`
    /// is absent.
    fn pa(&self, spec: &ModeSpectrum, mode: usize) -> Result<PaDriveSpec> {
        let Some(pa) = &self.cfg().pa else {
            return Ok(PaDriveSpec { omega_p: 0.0, theta: 0.0 });
        };
        match (pa.omega_p, pa.g_target) {
            (Some(w), _) => Ok(PaDriveSpec {
                omega_p: TWO_PI * w,
                theta: pa.theta,
            }),
            (None, Some(g)) => {
                let unit = compute_overlaps(spec, &PaDriveSpec { omega_p: 1.0, theta: 0.0 });
                let a = unit.a[(mode, mode)].norm();
                if !(a > 0.0) {
                    return Err(Error::config("pa.g_target", format!("mode {mode} has no overlap with the drive")));
                }
                let l = spec.zero_point_lengths[mode];
                PaDriveSpec::for_coupling(TWO_PI * g / a, l, pa.theta)
            }
            (None, None) => Err(Error::config("pa.omega_p", "exactly one of omega_p and g_target must be given")),
        }
    }

    fn drive(&mut self, bilayer: bool) -> Result<Drive> {
        let (eq, spec) = self.modes()?;
        let mode = self.mode(&spec)?;
        let pa = self.pa(&spec, mode)?;
        let overlaps = compute_overlaps(&spec, &pa);
        let sdf_cfg = self.cfg().sdf()?.clone();
        let bl = self.cfg().bilayer.clone();

        let layers = if bilayer {
            let rmax = (0..eq.n_ions())
                .map(|j| {
                    let p = eq.position(j);
                    p[0].hypot(p[1])
                })
                .fold(0.0_f64, f64::max);
            let opts = LayerOptions {
                mad_factor: bl.mad_factor,
                radial_cutoff: bl.radial_cutoff.or(bl.radial_cutoff_fraction.map(|f| f * rmax)),
            };
            Some(assign_layers(&eq, &opts)?)
        } else {
            None
        };

        let (delta_k, phase_offset) = match (bl.interlayer_phase, &layers) {
            (Some(phi), Some(la)) => {
                let dk = phi / la.separation();
                (dk, dk * la.bottom_z + sdf_cfg.phase_offset)
            }
            (Some(_), None) if sdf_cfg.delta_k.is_none() => {
                return Err(Error::config("sdf.delta_k", "required outside the bilayer analysis"));
            }
            _ => (
                sdf_cfg.delta_k.ok_or_else(|| Error::config("sdf.delta_k", "required"))?,
                sdf_cfg.phase_offset,
            ),
        };

        let w = spec.frequencies[mode];
        let g = overlaps.g[(mode, mode)];
        let a_nn = overlaps.a[(mode, mode)];
        let delta = match (sdf_cfg.mu, sdf_cfg.detuning, sdf_cfg.detuning_eff) {
            (Some(mu), _, _) => TWO_PI * mu - w,
            (_, Some(d), _) => TWO_PI * d,
            (_, _, Some(d)) => detuning_for_effective(TWO_PI * d, g, a_nn),
            _ => return Err(Error::config("sdf.mu", "exactly one of mu, detuning and detuning_eff must be given")),
        };
        if delta == 0.0 {
            return Err(Error::ZeroDetuning);
        }
        let strength = match sdf_cfg.kind {
            SdfKind::LightShift => sdf_cfg.strength,
            SdfKind::MsPhaseInsensitive | SdfKind::MsPhaseSensitive => TWO_PI * sdf_cfg.strength,
        };
        let sdf = SdfSpec {
            kind: sdf_cfg.kind,
            strength,
            delta_k,
            mu: w + delta,
            target_mode: mode,
            phase_offset,
        };
        let phases = derive_phases(&eq, &sdf)?;
        Ok(Drive {
            spec,
            mode,
            sdf,
            phases,
            pa,
            overlaps,
            delta,
            layers,
        })
    }

    fn check_mixing(&mut self, sol: &AmplificationSolution) {
        if sol.mixing_warning {
            self.warnings.push(format!(
                "mode {} mixes with others under the parametric drive: off-diagonal overlap mass {:.3e} exceeds {:.0e}",
                sol.mode, sol.off_diagonal_mass, DEFAULT_MIXING_THRESHOLD
            ));
        }
    }

    fn couplings(&mut self) -> Result<()> {
        let drive = self.drive(false)?;
        let f = mode_coupling_strengths(&drive.sdf, &drive.spec);
        let j_off = coupling_matrix(&drive.spec, &f, &drive.phases, drive.mode, drive.gate_detuning()?)?;
        if drive.has_pa() {
            let sol = drive.amplify(drive.pa.theta)?;
            self.check_mixing(&sol);
            let j_on = apply_scaling(&j_off, &sol.scale_factors)?;
            self.emit("couplings_pa_off.csv", |p| export::write_couplings(p, &j_off))?;
            self.emit("couplings_pa_on.csv", |p| export::write_couplings(p, &j_on))?;
            self.emit("scale_factors.csv", |p| export::write_scale_factors(p, &sol.scale_factors))?;
        } else {
            self.emit("couplings.csv", |p| export::write_couplings(p, &j_off))?;
        }
        Ok(())
    }

    fn bilayer(&mut self) -> Result<()> {
        self.cfg().pa()?;
        self.cfg().sdf()?;
        let grid = self.opts.theta_grid.clone().unwrap_or_else(|| self.cfg().bilayer.theta_grid.clone());
        let thetas = parse_grid(&grid)?;
        let drive = self.drive(true)?;
        let layers = drive.layers.clone().expect("layers are assigned for the bilayer analysis");

        let f = mode_coupling_strengths(&drive.sdf, &drive.spec);
        let sol = drive.amplify(drive.pa.theta)?;
        self.check_mixing(&sol);
        let j_off = coupling_matrix(&drive.spec, &f, &drive.phases, drive.mode, sol.delta_eff)?;
        let j_on = apply_scaling(&j_off, &sol.scale_factors)?;
        let off = layer_means(&j_off, &layers)?;
        let on = layer_means(&j_on, &layers)?;
        let sweep = bilayer_sweep(&j_off, &layers, &thetas, |th| Ok(drive.amplify(th)?.scale_factors))?;
        let hist = pair_histogram(&j_off, &j_on, &layers, self.cfg().bilayer.histogram_bins)?;

        let lo = sweep.mean_inter.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sweep.mean_inter.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let intra = 0.5 * (off.top.abs() + off.bottom.abs());
        let summary = BilayerSummary {
            n_top: layers.count(Layer::Top),
            n_bottom: layers.count(Layer::Bottom),
            n_scaffold: layers.count(Layer::Scaffold),
            top_z_m: layers.top_z,
            bottom_z_m: layers.bottom_z,
            separation_m: layers.separation(),
            delta_k: drive.sdf.delta_k,
            phase_offset: drive.sdf.phase_offset,
            mode: drive.mode,
            theta: drive.pa.theta,
            r: sol.r,
            gain_db: sol.gain_db,
            pa_off: scale_hz(off),
            pa_on: scale_hz(on),
            top_ratio: on.top / off.top,
            top_ratio_predicted: (2.0 * sol.r).exp(),
            bottom_ratio: on.bottom / off.bottom,
            bottom_ratio_predicted: (-2.0 * sol.r).exp(),
            interlayer_variation: if intra > 0.0 { (hi - lo) / intra } else { f64::NAN },
            mixing_warning: sol.mixing_warning,
        };
        self.emit("layers.csv", |p| export::write_layers(p, &layers))?;
        self.emit("bilayer_sweep.csv", |p| export::write_sweep(p, &sweep))?;
        self.emit("pair_histogram.csv", |p| export::write_histogram(p, &hist))?;
        self.emit("bilayer.json", |p| write_json(p, &summary))?;
        Ok(())
    }

    fn floquet_mu(&self) -> Result<f64> {
        self.cfg()
            .floquet
            .mu
            .map(|m| TWO_PI * m)
            .ok_or_else(|| Error::config("floquet.mu", "required for the Floquet analyses"))
    }

    fn floquet_taus(&self, reference: Option<&[crate::floquet::ReferencePoint]>) -> Result<Vec<f64>> {
        let mut taus: Vec<f64> = Vec::new();
        let from_ref = reference.map(|r| r.iter().map(|p| p.tau_s).collect::<Vec<_>>());
        for t in from_ref.unwrap_or_else(|| self.cfg().floquet.tau_s.clone()) {
            if !taus.contains(&t) {
                taus.push(t);
            }
        }
        if taus.is_empty() {
            return Err(Error::config("floquet.tau_s", "no decoupling times given"));
        }
        Ok(taus)
    }

    fn floquet_gain(&mut self) -> Result<()> {
        let mu = self.floquet_mu()?;
        let reference = match &self.opts.reference_csv {
            Some(p) => Some(export::read_reference(p)?),
            None => None,
        };
        let taus = self.floquet_taus(reference.as_deref())?;
        let rows = gain_table(mu, &taus, &self.cfg().floquet.g_hz)?;
        self.emit("floquet_gain.csv", |p| export::write_gain_table(p, &rows))?;
        if let Some(reference) = reference {
            let report = overlay(mu, &reference, self.opts.compensated.unwrap_or(false))?;
            self.emit("floquet_overlay.json", |p| write_json(p, &report))?;
        }
        Ok(())
    }

    fn floquet_reference(&mut self) -> Result<()> {
        let mu = self.floquet_mu()?;
        let taus = self.floquet_taus(None)?;
        let points = oracle_gain_reference(
            mu,
            &taus,
            &self.cfg().floquet.g_hz,
            self.opts.compensated.unwrap_or(false),
            &OracleOptions::default(),
        )?;
        self.emit("floquet_reference.csv", |p| export::write_reference(p, &points))?;
        Ok(())
    }
}

