// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration files.
//!
//! Configurations are TOML documents with one table per concern. Keys in
//! `[trap]` are the [`TrapConfig`] field names. Quantities are SI except
//! frequencies, which are given in Hz and converted to rad/s on load.
//!
//! ```toml
//! [trap]
//! trap_kind = "penning"
//! magnetic_field = 4.4588     # T
//! axial_freq = 1.62e6         # Hz
//! rotation_freq = 4.0e5       # Hz
//! wall_strength = 0.015
//! n_ions = 60
//!
//! [sdf]
//! kind = "light_shift"
//! strength = 1.0e-23          # N (Hz of Omega_eff for the MS gates)
//! delta_k = 1.0e7             # rad/m
//! detuning_eff = 1.0e3        # Hz; or `mu`, or `detuning`
//! target_mode = "com"
//!
//! [pa]
//! g_target = 1.0e4            # Hz; or `omega_p` in Hz/m^2
//! theta = 0.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{BE9_MASS, ELEMENTARY_CHARGE, TWO_PI};
use crate::drive_config::SdfKind;
use crate::error::{Error, Result};
use crate::trap_model::{RotationSense, SolverOptions, TrapConfig, TrapKind};

/// `[trap]`: the trap parameters, frequencies in Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub trap_kind: TrapKind,
    #[serde(default)]
    pub magnetic_field: f64,
    pub axial_freq: f64,
    #[serde(default)]
    pub radial_freqs: Option<[f64; 2]>,
    #[serde(default)]
    pub rotation_freq: f64,
    #[serde(default)]
    pub rotation_sense: RotationSense,
    #[serde(default)]
    pub wall_strength: f64,
    #[serde(default)]
    pub anharmonic_c4: f64,
    #[serde(default = "default_mass")]
    pub ion_mass: f64,
    #[serde(default = "default_charge")]
    pub ion_charge: f64,
    pub n_ions: usize,
}

fn default_mass() -> f64 {
    BE9_MASS
}

fn default_charge() -> f64 {
    ELEMENTARY_CHARGE
}

impl TrapSection {
    pub fn to_trap_config(&self) -> Result<TrapConfig> {
        let cfg = TrapConfig {
            trap_kind: self.trap_kind,
            magnetic_field: self.magnetic_field,
            axial_freq: TWO_PI * self.axial_freq,
            radial_freqs: self.radial_freqs.map(|[a, b]| [TWO_PI * a, TWO_PI * b]),
            rotation_freq: TWO_PI * self.rotation_freq,
            rotation_sense: self.rotation_sense,
            wall_strength: self.wall_strength,
            anharmonic_c4: self.anharmonic_c4,
            ion_mass: self.ion_mass,
            ion_charge: self.ion_charge,
            n_ions: self.n_ions,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `[solver]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub seed: u64,
    pub restarts: usize,
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection {
            seed: d.seed,
            restarts: d.restarts,
            gradient_tol: d.gradient_tol,
            max_iterations: d.max_iterations,
        }
    }
}

impl SolverSection {
    pub fn options(&self, seed_override: Option<u64>) -> SolverOptions {
        SolverOptions {
            seed: seed_override.unwrap_or(self.seed),
            restarts: self.restarts,
            gradient_tol: self.gradient_tol,
            max_iterations: self.max_iterations,
        }
    }
}

/// Target mode: an index into the descending spectrum or `"com"` for the
/// axial centre-of-mass mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeSelector {
    Index(usize),
    Named(String),
}

impl Default for ModeSelector {
    fn default() -> Self {
        ModeSelector::Named("com".into())
    }
}

/// `[sdf]`. Exactly one of `mu`, `detuning` and `detuning_eff` sets the
/// drive frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdfSection {
    pub kind: SdfKind,
    /// `F0` in N for the light-shift gate; `Omega_eff / 2 pi` in Hz otherwise.
    pub strength: f64,
    /// rad/m. May be omitted when `[bilayer] interlayer_phase` is set.
    #[serde(default)]
    pub delta_k: Option<f64>,
    /// Drive frequency in Hz.
    #[serde(default)]
    pub mu: Option<f64>,
    /// `mu - w_n` in Hz.
    #[serde(default)]
    pub detuning: Option<f64>,
    /// Effective detuning under the parametric drive, in Hz.
    #[serde(default)]
    pub detuning_eff: Option<f64>,
    #[serde(default)]
    pub target_mode: ModeSelector,
    #[serde(default)]
    pub phase_offset: f64,
}

/// `[pa]`. Exactly one of `omega_p` and `g_target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaSection {
    /// `Omega_p / 2 pi` in Hz/m^2.
    #[serde(default)]
    pub omega_p: Option<f64>,
    /// `g_nn |A_nn| / 2 pi` on the target mode, in Hz.
    #[serde(default)]
    pub g_target: Option<f64>,
    #[serde(default)]
    pub theta: f64,
}

/// `[bilayer]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BilayerSection {
    /// Phase difference between the layers in radians. When set, `delta_k`
    /// is chosen so that `delta_k * s` equals it and the bottom layer is the
    /// phase reference.
    pub interlayer_phase: Option<f64>,
    /// Ions farther than this from the axis (m) are scaffold.
    pub radial_cutoff: Option<f64>,
    /// As `radial_cutoff`, relative to the largest ion radius.
    pub radial_cutoff_fraction: Option<f64>,
    pub mad_factor: f64,
    pub histogram_bins: usize,
    /// `start:stop:count` in radians, endpoints included.
    pub theta_grid: String,
}

impl Default for BilayerSection {
    fn default() -> Self {
        BilayerSection {
            interlayer_phase: None,
            radial_cutoff: None,
            radial_cutoff_fraction: None,
            mad_factor: 3.0,
            histogram_bins: 40,
            theta_grid: format!("0:{}:65", TWO_PI),
        }
    }
}

/// `[floquet]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetSection {
    /// Drive frequency in Hz.
    pub mu: Option<f64>,
    /// Decoupling times in s; the effective detuning is `2 pi / tau`.
    pub tau_s: Vec<f64>,
    /// Couplings `g / 2 pi` in Hz.
    pub g_hz: Vec<f64>,
}

impl Default for FloquetSection {
    fn default() -> Self {
        FloquetSection {
            mu: None,
            tau_s: Vec::new(),
            g_hz: (0..=40).map(|i| 500.0 * i as f64).collect(),
        }
    }
}

/// A complete configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Required by every analysis except the Floquet gain tables.
    #[serde(default)]
    pub trap: Option<TrapSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sdf: Option<SdfSection>,
    #[serde(default)]
    pub pa: Option<PaSection>,
    #[serde(default)]
    pub bilayer: BilayerSection,
    #[serde(default)]
    pub floquet: FloquetSection,
}

/// A parsed configuration together with the hash of its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedConfig {
    pub config: ConfigFile,
    pub sha256: String,
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ConfigFile {
    /// Parses and validates a configuration from text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::parse("config", e.message().to_string() + &span_hint(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(trap) = &self.trap {
            trap.to_trap_config()?;
        }
        if self.solver.restarts == 0 {
            return Err(Error::config("solver.restarts", "must be at least 1"));
        }
        if !(self.solver.gradient_tol > 0.0) {
            return Err(Error::config("solver.gradient_tol", "must be positive"));
        }
        if let Some(sdf) = &self.sdf {
            let set = [sdf.mu, sdf.detuning, sdf.detuning_eff].iter().filter(|v| v.is_some()).count();
            if set != 1 {
                return Err(Error::config("sdf.mu", "exactly one of mu, detuning and detuning_eff must be given"));
            }
            if !(sdf.strength.is_finite() && sdf.strength >= 0.0) {
                return Err(Error::config("sdf.strength", "must be non-negative"));
            }
            if let ModeSelector::Named(name) = &sdf.target_mode {
                if name != "com" {
                    return Err(Error::config("sdf.target_mode", format!("unknown mode name `{name}`; use an index or \"com\"")));
                }
            }
            if sdf.delta_k.is_none() && self.bilayer.interlayer_phase.is_none() {
                return Err(Error::config("sdf.delta_k", "required unless bilayer.interlayer_phase is set"));
            }
        }
        if let Some(pa) = &self.pa {
            if pa.omega_p.is_some() == pa.g_target.is_some() {
                return Err(Error::config("pa.omega_p", "exactly one of omega_p and g_target must be given"));
            }
            if !pa.theta.is_finite() {
                return Err(Error::config("pa.theta", "must be finite"));
            }
        }
        if !(self.bilayer.mad_factor > 0.0) {
            return Err(Error::config("bilayer.mad_factor", "must be positive"));
        }
        if self.bilayer.radial_cutoff.is_some() && self.bilayer.radial_cutoff_fraction.is_some() {
            return Err(Error::config("bilayer.radial_cutoff", "give either radial_cutoff or radial_cutoff_fraction"));
        }
        if self.bilayer.radial_cutoff.into_iter().chain(self.bilayer.radial_cutoff_fraction).any(|c| !(c > 0.0)) {
            return Err(Error::config("bilayer.radial_cutoff", "must be positive"));
        }
        if let Some(phi) = self.bilayer.interlayer_phase {
            if !(phi.is_finite() && phi != 0.0) {
                return Err(Error::config("bilayer.interlayer_phase", "must be finite and non-zero"));
            }
        }
        if self.bilayer.histogram_bins == 0 {
            return Err(Error::config("bilayer.histogram_bins", "must be positive"));
        }
        parse_grid(&self.bilayer.theta_grid).map_err(|e| match e {
            Error::InvalidConfig { reason, .. } => Error::config("bilayer.theta_grid", reason),
            other => other,
        })?;
        if let Some(mu) = self.floquet.mu {
            if !(mu > 0.0) {
                return Err(Error::config("floquet.mu", "must be positive"));
            }
        }
        if self.floquet.tau_s.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("floquet.tau_s", "decoupling times must be positive"));
        }
        if self.floquet.g_hz.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::config("floquet.g_hz", "couplings must be non-negative"));
        }
        Ok(())
    }

    pub fn trap(&self) -> Result<&TrapSection> {
        self.trap.as_ref().ok_or_else(|| Error::config("trap", "section is required for this analysis"))
    }

    pub fn sdf(&self) -> Result<&SdfSection> {
        self.sdf.as_ref().ok_or_else(|| Error::config("sdf", "section is required for this analysis"))
    }

    pub fn pa(&self) -> Result<&PaSection> {
        self.pa.as_ref().ok_or_else(|| Error::config("pa", "section is required for this analysis"))
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::parse(path.display().to_string(), "not valid UTF-8"))?;
    let config = ConfigFile::from_toml(&text).map_err(|e| match e {
        Error::Parse { reason, .. } => Error::parse(path.display().to_string(), reason),
        other => other,
    })?;
    Ok(LoadedConfig {
        config,
        sha256: sha256_hex(&bytes),
    })
}

/// Parses `start:stop:count` into `count` equally spaced values including
/// both endpoints.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let bad = |why: &str| Error::config("theta_grid", format!("`{spec}`: {why}"));
    if parts.len() != 3 {
        return Err(bad("expected start:stop:count"));
    }
    let start: f64 = parts[0].parse().map_err(|_| bad("start is not a number"))?;
    let stop: f64 = parts[1].parse().map_err(|_| bad("stop is not a number"))?;
    let count: usize = parts[2].parse().map_err(|_| bad("count is not a non-negative integer"))?;
    if !(start.is_finite() && stop.is_finite()) {
        return Err(bad("endpoints must be finite"));
    }
    match count {
        0 => Err(bad("count must be positive")),
        1 => Ok(vec![start]),
        _ => Ok((0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[trap]\ntrap_kind = \"paul_pseudopotential\"\naxial_freq = 1.0e6\nradial_freqs = [5.0e6, 5.5e6]\nn_ions = 3\n";

    #[test]
    fn frequencies_are_converted_from_hz() {
        let cfg = ConfigFile::from_toml(MINIMAL).unwrap();
        let trap = cfg.trap().unwrap().to_trap_config().unwrap();
        assert_eq!(trap.axial_freq, TWO_PI * 1.0e6);
        assert_eq!(trap.radial_freqs.unwrap()[1], TWO_PI * 5.5e6);
        assert_eq!(trap.ion_mass, BE9_MASS);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}bogus = 1\n");
        let err = ConfigFile::from_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn ambiguous_detuning_names_the_field() {
        let text = format!("{MINIMAL}[sdf]\nkind = \"light_shift\"\nstrength = 1e-23\ndelta_k = 1e7\nmu = 1e6\ndetuning = 1e3\n");
        match ConfigFile::from_toml(&text).unwrap_err() {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "sdf.mu"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = parse_grid("0:1:5").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
