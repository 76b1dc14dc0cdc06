// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON artefacts.
//!
//! CSV files carry a header row and write floats with 17 significant
//! digits; JSON uses the shortest representation that round-trips. Every
//! file is written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::error::{Error, Result};
use crate::floquet::{GainRow, ReferencePoint};
use crate::normal_modes::{Branch, ModeSpectrum};
use crate::parametric::OverlapMatrices;
use crate::spin_interactions::{BilayerSweep, CouplingMatrix, Layer, LayerAssignment, PairHistogram};
use crate::trap_model::{CrystalEquilibrium, Frame};

/// Formats a float for CSV output with full round-trip precision.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialises `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("JSON encoding: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Writes a CSV table.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numerical(format!("CSV encoding: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("CSV encoding: {e}")))?;
    write_atomic(path, &bytes)
}

/// Reads a CSV table, checking that the header contains `required` columns,
/// and returns the rows as floats in the order of `required`.
pub fn read_csv_columns(path: &Path, required: &[&str]) -> Result<Vec<Vec<f64>>> {
    let ctx = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::parse(ctx.clone(), format!("{other:?}")),
        })?;
    let header = rdr.headers().map_err(|e| Error::parse(ctx.clone(), e))?.clone();
    let idx: Vec<usize> = required
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::parse(ctx.clone(), format!("missing column `{name}`")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(ctx.clone(), e))?;
        let row = idx
            .iter()
            .zip(required)
            .map(|(&i, name)| {
                let cell = rec.get(i).unwrap_or("");
                cell.parse::<f64>()
                    .map_err(|_| Error::parse(ctx.clone(), format!("row {}: column `{name}`: `{cell}` is not a number", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Scalar metadata stored next to `equilibrium.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSidecar {
    pub frame: Frame,
    /// Potential energy in J.
    pub energy: f64,
    /// Gradient norm in N.
    pub gradient_norm: f64,
    pub seed: u64,
    pub n_ions: usize,
    /// Hash of the configuration that produced the crystal.
    pub config_sha256: String,
}

pub fn write_equilibrium(dir: &Path, eq: &CrystalEquilibrium, config_sha256: &str) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..eq.n_ions())
        .map(|j| {
            let [x, y, z] = eq.position(j);
            vec![j.to_string(), fmt_f64(x), fmt_f64(y), fmt_f64(z)]
        })
        .collect();
    write_csv(&dir.join("equilibrium.csv"), &["ion", "x", "y", "z"], &rows)?;
    write_json(
        &dir.join("equilibrium.json"),
        &EquilibriumSidecar {
            frame: eq.frame,
            energy: eq.potential_energy,
            gradient_norm: eq.gradient_norm,
            seed: eq.seed,
            n_ions: eq.n_ions(),
            config_sha256: config_sha256.to_string(),
        },
    )
}

pub fn read_equilibrium(dir: &Path) -> Result<(CrystalEquilibrium, EquilibriumSidecar)> {
    let side: EquilibriumSidecar = read_json(&dir.join("equilibrium.json"))?;
    let rows = read_csv_columns(&dir.join("equilibrium.csv"), &["ion", "x", "y", "z"])?;
    if rows.len() != side.n_ions {
        return Err(Error::parse("equilibrium.csv", format!("{} rows for {} ions", rows.len(), side.n_ions)));
    }
    let mut positions = vec![0.0; 3 * rows.len()];
    for r in &rows {
        let j = r[0] as usize;
        if r[0] != j as f64 || j >= rows.len() {
            return Err(Error::parse("equilibrium.csv", format!("bad ion index {}", r[0])));
        }
        positions[3 * j..3 * j + 3].copy_from_slice(&r[1..4]);
    }
    let eq = CrystalEquilibrium {
        positions,
        frame: side.frame,
        potential_energy: side.energy,
        gradient_norm: side.gradient_norm,
        seed: side.seed,
    };
    Ok((eq, side))
}

/// JSON form of a mode spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub n_ions: usize,
    #[serde(rename = "frequencies_Hz")]
    pub frequencies_hz: Vec<f64>,
    /// Per mode: `re, im` interleaved over components `(x_0, y_0, z_0, x_1, ...)`.
    pub eigenvectors: Vec<Vec<f64>>,
    #[serde(rename = "zero_point_lengths_m")]
    pub zero_point_lengths_m: Vec<f64>,
    pub branch_labels: Vec<Branch>,
}

impl SpectrumFile {
    pub fn from_spectrum(s: &ModeSpectrum) -> Self {
        SpectrumFile {
            n_ions: s.n_ions,
            frequencies_hz: s.frequencies.iter().map(|w| w / TWO_PI).collect(),
            eigenvectors: (0..s.n_modes())
                .map(|n| s.eigenvectors.row(n).iter().flat_map(|c| [c.re, c.im]).collect())
                .collect(),
            zero_point_lengths_m: s.zero_point_lengths.clone(),
            branch_labels: s.branch_labels.clone(),
        }
    }

    pub fn to_spectrum(&self) -> Result<ModeSpectrum> {
        let m = self.frequencies_hz.len();
        let dim = 3 * self.n_ions;
        if self.eigenvectors.len() != m
            || self.eigenvectors.iter().any(|v| v.len() != 2 * dim)
            || self.zero_point_lengths_m.len() != m
            || self.branch_labels.len() != m
        {
            return Err(Error::parse("modes.json", "inconsistent array lengths"));
        }
        Ok(ModeSpectrum {
            frequencies: self.frequencies_hz.iter().map(|f| f * TWO_PI).collect(),
            eigenvectors: DMatrix::from_fn(m, dim, |n, c| {
                Complex64::new(self.eigenvectors[n][2 * c], self.eigenvectors[n][2 * c + 1])
            }),
            zero_point_lengths: self.zero_point_lengths_m.clone(),
            branch_labels: self.branch_labels.clone(),
            n_ions: self.n_ions,
        })
    }
}

pub fn write_overlaps(path: &Path, ov: &OverlapMatrices) -> Result<()> {
    let m = ov.a.nrows();
    let mut rows = Vec::with_capacity(m * m);
    for n in 0..m {
        for k in 0..m {
            let a = ov.a[(n, k)];
            rows.push(vec![n.to_string(), k.to_string(), fmt_f64(a.re), fmt_f64(a.im), fmt_f64(a.norm())]);
        }
    }
    write_csv(path, &["n", "m", "re_A", "im_A", "abs_A"], &rows)
}

/// Couplings as `j,k,re_J_Hz,im_J_Hz` over ordered pairs `j < k`.
pub fn write_couplings(path: &Path, j: &CouplingMatrix) -> Result<()> {
    let n = j.n_ions();
    let mut rows = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = j.j[(a, b)] / TWO_PI;
            rows.push(vec![a.to_string(), b.to_string(), fmt_f64(v.re), fmt_f64(v.im)]);
        }
    }
    write_csv(path, &["j", "k", "re_J_Hz", "im_J_Hz"], &rows)
}

pub fn write_scale_factors(path: &Path, s: &[Complex64]) -> Result<()> {
    let rows: Vec<Vec<String>> = s
        .iter()
        .enumerate()
        .map(|(j, c)| vec![j.to_string(), fmt_f64(c.re), fmt_f64(c.im), fmt_f64(c.norm())])
        .collect();
    write_csv(path, &["ion", "re_S", "im_S", "abs_S"], &rows)
}

pub fn write_layers(path: &Path, layers: &LayerAssignment) -> Result<()> {
    let rows: Vec<Vec<String>> = layers
        .labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let name = match l {
                Layer::Top => "top",
                Layer::Bottom => "bottom",
                Layer::Scaffold => "scaffold",
            };
            vec![j.to_string(), name.to_string()]
        })
        .collect();
    write_csv(path, &["ion", "layer"], &rows)
}

/// Sweep means in Hz.
pub fn write_sweep(path: &Path, sweep: &BilayerSweep) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..sweep.theta.len())
        .map(|i| {
            vec![
                fmt_f64(sweep.theta[i]),
                fmt_f64(sweep.mean_top[i] / TWO_PI),
                fmt_f64(sweep.mean_bottom[i] / TWO_PI),
                fmt_f64(sweep.mean_inter[i] / TWO_PI),
            ]
        })
        .collect();
    write_csv(path, &["theta", "mean_top", "mean_bottom", "mean_inter"], &rows)
}

/// One row per bin: lower and upper edge in Hz followed by the counts of
/// every series.
pub fn write_histogram(path: &Path, h: &PairHistogram) -> Result<()> {
    let mut header = vec!["edge_lo_Hz".to_string(), "edge_hi_Hz".to_string()];
    header.extend(h.series.iter().map(|(name, _)| name.clone()));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..h.edges.len().saturating_sub(1))
        .map(|b| {
            let mut r = vec![fmt_f64(h.edges[b] / TWO_PI), fmt_f64(h.edges[b + 1] / TWO_PI)];
            r.extend(h.series.iter().map(|(_, c)| c[b].to_string()));
            r
        })
        .collect();
    write_csv(path, &header_ref, &rows)
}

pub fn write_gain_table(path: &Path, rows: &[GainRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.g_over_2pi_hz),
                fmt_f64(r.tau_s),
                fmt_f64(r.gain_uncompensated),
                fmt_f64(r.gain_compensated),
            ]
        })
        .collect();
    write_csv(path, &["g_over_2pi_Hz", "tau_s", "gain_uncompensated", "gain_compensated"], &body)
}

pub const REFERENCE_COLUMNS: [&str; 3] = ["g_over_2pi_Hz", "tau_s", "gain"];

pub fn write_reference(path: &Path, points: &[ReferencePoint]) -> Result<()> {
    let body: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![fmt_f64(p.g_over_2pi_hz), fmt_f64(p.tau_s), fmt_f64(p.gain)])
        .collect();
    write_csv(path, &REFERENCE_COLUMNS, &body)
}

/// Reads reference gain markers with columns `g_over_2pi_Hz,tau_s,gain`.
pub fn read_reference(path: &Path) -> Result<Vec<ReferencePoint>> {
    let rows = read_csv_columns(path, &REFERENCE_COLUMNS)?;
    if rows.is_empty() {
        return Err(Error::parse(path.display().to_string(), "no reference markers"));
    }
    Ok(rows
        .into_iter()
        .map(|r| ReferencePoint {
            g_over_2pi_hz: r[0],
            tau_s: r[1],
            gain: r[2],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.1 + 0.2] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "g_over_2pi_Hz,gain\n1,2\n").unwrap();
        let err = read_reference(&p).unwrap_err();
        assert!(err.to_string().contains("tau_s"), "{err}");
    }
}
