//! Per-axis angle recovery from the step-2 sequences.
//!
//! Along `n`, the elevation sequence is a sum of exponentials
//! `exp(j2kd·v·n)` whose amplitudes depend on `m` and `u`, so every column
//! with fixed `m` is one snapshot of a line spectrum in `v`. Because the
//! frequency is doubled, `v` is identified only modulo `λ/(2d)`; estimates
//! live on one base period and are expanded to their aliases for pairing.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::ArrayGeometry;
use crate::linalg::{cis, least_squares};
use crate::recovery::music::music_1d;
use crate::recovery::refine::golden_max;
use crate::tpd::{Grid2, TpdSequences};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralMethod {
    Omp,
    Music,
}

impl FromStr for SpectralMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omp" => Ok(Self::Omp),
            "music" => Ok(Self::Music),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

impl fmt::Display for SpectralMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Omp => "omp",
            Self::Music => "music",
        })
    }
}

/// Candidate values on one axis, all inside the base period.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleCandidates {
    pub values: Vec<f64>,
    /// Fitted energy (OMP) or pseudo-spectrum height (MUSIC).
    pub strengths: Vec<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpdAngles {
    pub u: AngleCandidates,
    pub v: AngleCandidates,
    /// Grid points examined on both axes.
    pub grid_points: usize,
}

/// Lattice of `oversampling·n` points covering one period `[-P/2, P/2)`,
/// including zero.
pub fn product_grid(n: usize, oversampling: usize, period: f64) -> Vec<f64> {
    let total = n * oversampling;
    let half = (total / 2) as f64;
    (0..total).map(|i| (i as f64 - half) * period / total as f64).collect()
}

/// All values `value + j·period` with magnitude at most one.
pub fn aliases(value: f64, period: f64) -> Vec<f64> {
    let eps = 1e-12;
    let lo = ((-1.0 - value) / period - eps).ceil() as i64;
    let hi = ((1.0 - value) / period + eps).floor() as i64;
    let mut out: Vec<f64> = (lo..=hi).map(|j| value + j as f64 * period).collect();
    if out.is_empty() {
        out.push(value.clamp(-1.0, 1.0));
    }
    out
}

/// Recovers `L` candidate values for `u` and for `v` from the step-2 sequences.
///
/// A single-row (single-column) array has no elevation (azimuth) aperture and
/// reports zeros for that axis.
pub fn tpd_recover_angles(
    seq: &TpdSequences,
    geom: &ArrayGeometry,
    paths: usize,
    method: SpectralMethod,
    oversampling: (usize, usize),
) -> Result<TpdAngles> {
    if paths == 0 {
        return Err(Error::InvalidParameter("number of paths must be >= 1".into()));
    }
    if oversampling.0 == 0 || oversampling.1 == 0 {
        return Err(Error::InvalidParameter("oversampling factors must be >= 1".into()));
    }
    let period = geom.product_period();
    let scale = 2.0 * geom.wavenumber() * geom.spacing();
    let mut grid_points = 0;
    let u = if geom.n_h() > 1 {
        let data = columns(&seq.step2_azim, Axis::U);
        let grid = product_grid(geom.n_h(), oversampling.0, period);
        grid_points += grid.len();
        line_spectrum(&data, &grid, scale, paths, method)?
    } else {
        zeros(paths)
    };
    let v = if geom.n_v() > 1 {
        let data = columns(&seq.step2_elev, Axis::V);
        let grid = product_grid(geom.n_v(), oversampling.1, period);
        grid_points += grid.len();
        line_spectrum(&data, &grid, scale, paths, method)?
    } else {
        zeros(paths)
    };
    Ok(TpdAngles { u, v, grid_points })
}

enum Axis {
    U,
    V,
}

/// Snapshot matrix for one axis: the sequence along that axis for every
/// distinct value of the other index. Mirrored lines of `s` (`t`) are equal,
/// so only the non-negative half is kept.
fn columns(g: &Grid2, axis: Axis) -> DMatrix<C64> {
    let (len, others) = match axis {
        Axis::U => (g.n_h(), g.n_v()),
        Axis::V => (g.n_v(), g.n_h()),
    };
    let keep: Vec<usize> = (others / 2..others).collect();
    let mut out = DMatrix::zeros(len, keep.len());
    for (c, &o) in keep.iter().enumerate() {
        let line = match axis {
            Axis::U => g.along_m(o),
            Axis::V => g.along_n(o),
        };
        for (i, z) in line.into_iter().enumerate() {
            out[(i, c)] = z;
        }
    }
    out
}

fn zeros(paths: usize) -> AngleCandidates {
    AngleCandidates { values: vec![0.0; paths], strengths: vec![1.0; paths], low_confidence: false }
}

fn line_spectrum(
    data: &DMatrix<C64>,
    grid: &[f64],
    scale: f64,
    paths: usize,
    method: SpectralMethod,
) -> Result<AngleCandidates> {
    match method {
        SpectralMethod::Omp => {
            let k = paths.min(grid.len());
            let (picked, dropped) = gridded_omp(data, grid, scale, k)?;
            let mut pairs: Vec<(f64, f64)> = picked.into_iter().map(|(g, e)| (grid[g], e)).collect();
            pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
            pad(&mut pairs, paths);
            Ok(AngleCandidates {
                values: pairs.iter().map(|p| p.0).collect(),
                strengths: pairs.iter().map(|p| p.1).collect(),
                low_confidence: dropped,
            })
        }
        SpectralMethod::Music => {
            let omegas: Vec<f64> = grid.iter().map(|g| scale * g).collect();
            let out = music_1d(data, &omegas, paths, true)?;
            let mut pairs: Vec<(f64, f64)> = out.peaks.iter().map(|&(i, p)| (grid[i], p)).collect();
            if pairs.is_empty() {
                let best = (0..grid.len()).max_by(|&a, &b| out.spectrum[a].total_cmp(&out.spectrum[b])).unwrap_or(0);
                pairs.push((grid[best], out.spectrum[best]));
            }
            pad(&mut pairs, paths);
            Ok(AngleCandidates {
                values: pairs.iter().map(|p| p.0).collect(),
                strengths: pairs.iter().map(|p| p.1).collect(),
                low_confidence: out.low_confidence,
            })
        }
    }
}

const LOCAL_PASSES: usize = 2;

fn line_atoms(len: usize, omegas: &[f64]) -> DMatrix<C64> {
    let centre = (len as f64 - 1.0) / 2.0;
    let norm = 1.0 / (len as f64).sqrt();
    DMatrix::from_fn(len, omegas.len(), |i, c| cis(omegas[c] * (i as f64 - centre)) * norm)
}

fn projection_power(r: &DMatrix<C64>, omega: f64) -> f64 {
    line_atoms(r.nrows(), &[omega]).ad_mul(r).norm_squared()
}

/// Greedy MMV line-spectrum fit that reports grid cells.
///
/// Each selected tone is tracked at a continuous frequency inside its cell,
/// so an off-grid tone is cancelled from the residual instead of leaking
/// into the neighbouring cells; frequencies are re-fitted cyclically after
/// every selection. Returns `(grid index, energy)` per tone and whether any
/// selection had to be dropped.
fn gridded_omp(data: &DMatrix<C64>, grid: &[f64], scale: f64, k: usize) -> Result<(Vec<(usize, f64)>, bool)> {
    if k == 0 || k > grid.len() {
        return Err(Error::InvalidParameter(format!("sparsity {k} outside 1..={}", grid.len())));
    }
    let len = data.nrows();
    let cell = if grid.len() > 1 { (grid[1] - grid[0]) * scale } else { std::f64::consts::TAU };
    let half = cell / 2.0;
    let grid_atoms = line_atoms(len, &grid.iter().map(|g| g * scale).collect::<Vec<_>>());
    let mut cells: Vec<usize> = Vec::new();
    let mut omegas: Vec<f64> = Vec::new();
    let mut used = vec![false; grid.len()];
    let mut residual = data.clone();
    let mut coef = DMatrix::zeros(0, data.ncols());
    let mut dropped = false;
    for _ in 0..k {
        let corr = grid_atoms.ad_mul(&residual);
        let Some(g) = (0..grid.len())
            .filter(|&g| !used[g])
            .max_by(|&a, &b| corr.row(a).norm_squared().total_cmp(&corr.row(b).norm_squared()))
        else {
            break;
        };
        used[g] = true;
        let centre = grid[g] * scale;
        let (w, _) = golden_max(&|w| projection_power(&residual, w), centre - half, centre + half, cell * 1e-9);
        cells.push(g);
        omegas.push(w);
        let mut fit = None;
        for _ in 0..LOCAL_PASSES {
            let Some(x) = least_squares(&line_atoms(len, &omegas), data) else {
                break;
            };
            for j in 0..omegas.len() {
                let others: Vec<usize> = (0..omegas.len()).filter(|&i| i != j).collect();
                let a = line_atoms(len, &others.iter().map(|&i| omegas[i]).collect::<Vec<_>>());
                let xo = DMatrix::from_fn(others.len(), data.ncols(), |r, c| x[(others[r], c)]);
                let rj = data - a * xo;
                let c0 = grid[cells[j]] * scale;
                omegas[j] = golden_max(&|w| projection_power(&rj, w), c0 - half, c0 + half, cell * 1e-9).0;
            }
            fit = least_squares(&line_atoms(len, &omegas), data);
        }
        match fit {
            Some(x) => {
                residual = data - line_atoms(len, &omegas) * &x;
                coef = x;
            }
            None => {
                cells.pop();
                omegas.pop();
                dropped = true;
            }
        }
    }
    let energies = (0..cells.len()).map(|i| coef.row(i).norm_squared());
    Ok((cells.iter().copied().zip(energies).collect(), dropped))
}

/// Repeats the strongest entries until there are `paths` of them, so that a
/// frequency shared by several scatterers can be paired more than once.
fn pad(pairs: &mut Vec<(f64, f64)>, paths: usize) {
    let distinct = pairs.len();
    let mut i = 0;
    while pairs.len() < paths && distinct > 0 {
        pairs.push(pairs[i % distinct]);
        i += 1;
    }
}
