// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Effective spin-spin couplings and bilayer analysis.
//!
//! Adiabatic elimination of a single mode `n` driven at detuning `delta`
//! gives the Ising couplings
//!
//! ```text
//! J_jk = f_n^2 Re{ u_j u_k^* } / delta,   u_j = u_n^z(j) exp(i phi_j)
//! ```
//!
//! Parametric amplification rescales them to `S_j S_k^* J_jk`, where the
//! real part is the physical coupling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive_config::IonDrivePhases;
use crate::error::{Error, Result};
use crate::normal_modes::{Axis, ModeSpectrum};
use crate::trap_model::CrystalEquilibrium;

/// Pairwise couplings in rad/s. The diagonal is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub j: DMatrix<Complex64>,
    pub mode: usize,
    /// Detuning used in the denominator, in rad/s.
    pub delta: f64,
    pub scaled: bool,
}

impl CouplingMatrix {
    pub fn n_ions(&self) -> usize {
        self.j.nrows()
    }

    /// Physical coupling `Re J_jk`.
    pub fn re(&self, j: usize, k: usize) -> f64 {
        self.j[(j, k)].re
    }
}

/// Single-mode Ising couplings of mode `n` at detuning `delta` (rad/s).
/// `f` holds the per-mode coupling strengths in rad/s.
pub fn coupling_matrix(
    spectrum: &ModeSpectrum,
    f: &[f64],
    phases: &IonDrivePhases,
    mode: usize,
    delta: f64,
) -> Result<CouplingMatrix> {
    spectrum.check_mode(mode)?;
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::ZeroDetuning);
    }
    if f.len() != spectrum.n_modes() || phases.phases.len() != spectrum.n_ions {
        return Err(Error::DimensionMismatch("coupling strengths or phases".into()));
    }
    let n = spectrum.n_ions;
    let ut: Vec<Complex64> = (0..n)
        .map(|j| spectrum.u(mode, j, Axis::Z) * Complex64::from_polar(1.0, phases.phases[j]))
        .collect();
    let pref = f[mode] * f[mode] / delta;
    let j = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(pref * (ut[a] * ut[b].conj()).re, 0.0)
        }
    });
    Ok(CouplingMatrix {
        j,
        mode,
        delta,
        scaled: false,
    })
}

/// Applies the parametric scale factors, `J_jk -> S_j S_k^* J_jk`.
pub fn apply_scaling(j: &CouplingMatrix, s: &[Complex64]) -> Result<CouplingMatrix> {
    if s.len() != j.n_ions() {
        return Err(Error::DimensionMismatch(format!(
            "{} scale factors for {} ions",
            s.len(),
            j.n_ions()
        )));
    }
    let n = j.n_ions();
    Ok(CouplingMatrix {
        j: DMatrix::from_fn(n, n, |a, b| j.j[(a, b)] * s[a] * s[b].conj()),
        mode: j.mode,
        delta: j.delta,
        scaled: true,
    })
}

/// Layer membership of an ion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Top,
    Bottom,
    /// Excluded from layer statistics.
    Scaffold,
}

/// Layer assignment controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerOptions {
    /// Ions further than this many median absolute deviations from their
    /// layer median are scaffold.
    pub mad_factor: f64,
    /// Optional cylindrical radius in metres beyond which ions are scaffold.
    pub radial_cutoff: Option<f64>,
}

impl Default for LayerOptions {
    fn default() -> Self {
        LayerOptions {
            mad_factor: 3.0,
            radial_cutoff: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerAssignment {
    pub labels: Vec<Layer>,
    /// Mean axial positions of the ions kept in each layer, in metres.
    pub top_z: f64,
    pub bottom_z: f64,
}

impl LayerAssignment {
    pub fn count(&self, layer: Layer) -> usize {
        self.labels.iter().filter(|l| **l == layer).count()
    }

    /// Axial separation between the layer medians.
    pub fn separation(&self) -> f64 {
        self.top_z - self.bottom_z
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn spread(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn text_histogram(z: &[f64], bins: usize) -> String {
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0usize; bins];
    for v in z {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let cells: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
    format!("z in [{lo:.3e}, {hi:.3e}] m, counts [{}]", cells.join(" "))
}

/// Splits the crystal into top and bottom layers by the axial coordinate.
pub fn assign_layers(eq: &CrystalEquilibrium, opts: &LayerOptions) -> Result<LayerAssignment> {
    let z = eq.z();
    let n = z.len();
    if n < 4 {
        return Err(Error::LayerAssignment(format!("need at least 4 ions, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| z[i]).collect();

    // Exact two-cluster split of sorted data: minimise the within-cluster variance.
    let mut best = (f64::INFINITY, 1);
    for cut in 1..n {
        let (lo, hi) = sorted.split_at(cut);
        let cost = spread(lo).powi(2) * lo.len() as f64 + spread(hi).powi(2) * hi.len() as f64;
        if cost < best.0 {
            best = (cost, cut);
        }
    }
    let cut = best.1;
    let (lo, hi) = sorted.split_at(cut);
    let sep = hi.iter().sum::<f64>() / hi.len() as f64 - lo.iter().sum::<f64>() / lo.len() as f64;
    let intra = spread(lo).max(spread(hi));
    if !(sep > 4.0 * intra) || lo.len() < 2 || hi.len() < 2 {
        return Err(Error::LayerAssignment(format!(
            "axial distribution is not bimodal (separation {sep:.3e} m, spread {intra:.3e} m); {}",
            text_histogram(&z, 12)
        )));
    }

    let bottom_z = median(&mut lo.to_vec());
    let top_z = median(&mut hi.to_vec());
    let mad = |v: &[f64], m: f64| median(&mut v.iter().map(|x| (x - m).abs()).collect::<Vec<_>>());
    let tol_bottom = (opts.mad_factor * mad(lo, bottom_z)).max(1e-9 * sep);
    let tol_top = (opts.mad_factor * mad(hi, top_z)).max(1e-9 * sep);

    let mut labels = vec![Layer::Scaffold; n];
    for (rank, &i) in order.iter().enumerate() {
        let [x, y, zi] = eq.position(i);
        let (layer, centre, tol) = if rank < cut {
            (Layer::Bottom, bottom_z, tol_bottom)
        } else {
            (Layer::Top, top_z, tol_top)
        };
        let radial_ok = opts.radial_cutoff.is_none_or(|rc| x.hypot(y) <= rc);
        if (zi - centre).abs() <= tol && radial_ok {
            labels[i] = layer;
        }
    }
    let mut centres = [0.0; 2];
    for (c, layer) in centres.iter_mut().zip([Layer::Top, Layer::Bottom]) {
        let kept: Vec<f64> = (0..n).filter(|&i| labels[i] == layer).map(|i| z[i]).collect();
        if kept.len() < 2 {
            return Err(Error::LayerAssignment(format!(
                "layer {layer:?} keeps fewer than two ions after scaffold removal"
            )));
        }
        *c = kept.iter().sum::<f64>() / kept.len() as f64;
    }
    Ok(LayerAssignment {
        labels,
        top_z: centres[0],
        bottom_z: centres[1],
    })
}

/// Mean physical couplings over unordered pairs within and between layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMeans {
    pub top: f64,
    pub bottom: f64,
    pub inter: f64,
}

/// Averages `Re J` over top-top, bottom-bottom and top-bottom pairs.
pub fn layer_means(j: &CouplingMatrix, layers: &LayerAssignment) -> Result<LayerMeans> {
    let n = j.n_ions();
    if layers.labels.len() != n {
        return Err(Error::DimensionMismatch("layer labels vs couplings".into()));
    }
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for a in 0..n {
        for b in (a + 1)..n {
            let slot = match (layers.labels[a], layers.labels[b]) {
                (Layer::Top, Layer::Top) => 0,
                (Layer::Bottom, Layer::Bottom) => 1,
                (Layer::Top, Layer::Bottom) | (Layer::Bottom, Layer::Top) => 2,
                _ => continue,
            };
            sums[slot] += j.re(a, b);
            counts[slot] += 1;
        }
    }
    let mean = |k: usize| if counts[k] > 0 { sums[k] / counts[k] as f64 } else { 0.0 };
    Ok(LayerMeans {
        top: mean(0),
        bottom: mean(1),
        inter: mean(2),
    })
}

/// Layer means as a function of the parametric drive phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilayerSweep {
    pub theta: Vec<f64>,
    pub mean_top: Vec<f64>,
    pub mean_bottom: Vec<f64>,
    pub mean_inter: Vec<f64>,
}

/// Sweeps the drive phase. `scale_at(theta)` returns the per-ion scale
/// factors at that phase; `j` is the unscaled coupling matrix.
pub fn bilayer_sweep<F>(j: &CouplingMatrix, layers: &LayerAssignment, thetas: &[f64], mut scale_at: F) -> Result<BilayerSweep>
where
    F: FnMut(f64) -> Result<Vec<Complex64>>,
{
    let mut out = BilayerSweep {
        theta: Vec::with_capacity(thetas.len()),
        mean_top: Vec::with_capacity(thetas.len()),
        mean_bottom: Vec::with_capacity(thetas.len()),
        mean_inter: Vec::with_capacity(thetas.len()),
    };
    for &theta in thetas {
        let s = scale_at(theta)?;
        let m = layer_means(&apply_scaling(j, &s)?, layers)?;
        out.theta.push(theta);
        out.mean_top.push(m.top);
        out.mean_bottom.push(m.bottom);
        out.mean_inter.push(m.inter);
    }
    Ok(out)
}

/// Histogram of pair couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairHistogram {
    /// Bin edges in rad/s, one more than the number of bins.
    pub edges: Vec<f64>,
    /// `(series, counts)` for `intra` and `inter` pairs with the drive on and off.
    pub series: Vec<(String, Vec<usize>)>,
}

/// Histograms `Re J` for intra- and inter-layer pairs, with and without
/// the parametric drive, over a shared range.
pub fn pair_histogram(
    j_off: &CouplingMatrix,
    j_on: &CouplingMatrix,
    layers: &LayerAssignment,
    bins: usize,
) -> Result<PairHistogram> {
    if bins == 0 {
        return Err(Error::config("histogram.bins", "must be positive"));
    }
    let n = j_off.n_ions();
    if j_on.n_ions() != n || layers.labels.len() != n {
        return Err(Error::DimensionMismatch("histogram inputs".into()));
    }
    let mut values: [Vec<f64>; 4] = Default::default();
    for a in 0..n {
        for b in (a + 1)..n {
            let inter = match (layers.labels[a], layers.labels[b]) {
                (Layer::Scaffold, _) | (_, Layer::Scaffold) => continue,
                (x, y) => x != y,
            };
            let k = if inter { 2 } else { 0 };
            values[k].push(j_on.re(a, b));
            values[k + 1].push(j_off.re(a, b));
        }
    }
    let all = values.iter().flatten();
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let names = ["intra_pa_on", "intra_pa_off", "inter_pa_on", "inter_pa_off"];
    let series = names
        .iter()
        .zip(values.iter())
        .map(|(name, vals)| {
            let mut counts = vec![0usize; bins];
            for v in vals {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            (name.to_string(), counts)
        })
        .collect();
    Ok(PairHistogram { edges, series })
}
