//! Triple parametric decomposition of multi-snapshot array observations.
//!
//! * Step 1 multiplies every antenna with the conjugate of its origin-symmetric
//!   partner and averages over snapshots. The Fresnel quadratic term is even in
//!   `(m, n)`, so it cancels and only the doubled linear (angle) phase remains:
//!   `E[x(m,n)] = Σ_l P_l exp(j2kd(m u_l + n v_l))`.
//! * Step 2 adds horizontally (vertically) mirrored entries of `x`. The sum
//!   `s(m,n) = x(m,n) + x(-m,n)` carries `v` in its phase and `u` only in a real
//!   amplitude `2cos(2kd m u)`; `t` is the transpose construction for `u`.
//! * Step 3 references every antenna to a fixed element near the array center,
//!   keeping both the linear and quadratic phase so distance can be matched.

use std::fmt::Write as _;

use crate::channel::SnapshotSet;
use crate::geometry::ArrayGeometry;
use crate::linalg::principal_snapshots;
use crate::{Error, Result, C64};

/// Complex values on the antenna index grid, `m` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    n_h: usize,
    n_v: usize,
    data: Vec<C64>,
}

impl Grid2 {
    pub fn new(n_h: usize, n_v: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n_h * n_v {
            return Err(Error::DimensionMismatch { expected: n_h * n_v, actual: data.len() });
        }
        Ok(Self { n_h, n_v, data })
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, p: usize, q: usize) -> C64 {
        self.data[q * self.n_h + p]
    }

    /// Values at fixed column `p`, ordered by `n`.
    pub fn along_n(&self, p: usize) -> Vec<C64> {
        (0..self.n_v).map(|q| self.get(p, q)).collect()
    }

    /// Values at fixed row `q`, ordered by `m`.
    pub fn along_m(&self, q: usize) -> Vec<C64> {
        (0..self.n_h).map(|p| self.get(p, q)).collect()
    }
}

/// Output of the three decomposition steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TpdSequences {
    /// Angular product sequence `x`.
    pub step1: Grid2,
    /// `s = x(m,n) + x(-m,n)`; phase depends on `v` only.
    pub step2_elev: Grid2,
    /// `t = x(m,n) + x(m,-n)`; phase depends on `u` only.
    pub step2_azim: Grid2,
    /// Center-referenced sequence `c`.
    pub step3: Grid2,
    pub snapshots_used: usize,
    /// Flat index of the step-3 reference antenna.
    pub reference: usize,
    /// Noise power subtracted from same-antenna products.
    pub noise_floor: f64,
}

/// How the noise floor removed from same-antenna products is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFloor {
    /// Use the noise variance recorded with the snapshots.
    Configured,
    /// Estimate from the trailing eigenvalues of the sample covariance, given
    /// the number of paths.
    FromData { paths: usize },
    Value(f64),
}

impl NoiseFloor {
    pub fn resolve(self, snap: &SnapshotSet) -> f64 {
        match self {
            NoiseFloor::Configured => snap.noise_variance,
            NoiseFloor::Value(v) => v,
            NoiseFloor::FromData { paths } => {
                estimate_noise_variance(snap, paths).unwrap_or(snap.noise_variance)
            }
        }
    }
}

/// Noise variance from the eigenvalues of `YᴴY` beyond the `paths` largest.
///
/// Removing a rank-`L` signal leaves roughly `(N-L)(T-L)` noise degrees of
/// freedom. Returns `None` when `T <= L` or `N <= L`.
pub fn estimate_noise_variance(snap: &SnapshotSet, paths: usize) -> Option<f64> {
    let (n, t) = (snap.antennas(), snap.len());
    if t <= paths || n <= paths {
        return None;
    }
    let (_, values) = principal_snapshots(&snap.snapshots, 0);
    let tail: f64 = values.iter().skip(paths).map(|v| v.max(0.0)).sum();
    Some(tail / ((n - paths) * (t - paths)) as f64)
}

fn check(snap: &SnapshotSet, geom: &ArrayGeometry) -> Result<()> {
    if snap.is_empty() {
        return Err(Error::Empty("snapshot set"));
    }
    if snap.antennas() != geom.len() {
        return Err(Error::DimensionMismatch { expected: geom.len(), actual: snap.antennas() });
    }
    Ok(())
}

/// Step 1: `x(m,n) = (1/T) Σ_t h_t(m,n) conj(h_t(-m,-n))`.
///
/// For odd×odd arrays the center entry multiplies an antenna with itself and
/// carries the noise power, which is removed using `noise_floor`.
pub fn step1_angular_product(snap: &SnapshotSet, geom: &ArrayGeometry, noise_floor: f64) -> Result<Grid2> {
    check(snap, geom)?;
    let t = snap.len() as f64;
    let h = &snap.snapshots;
    let data = (0..geom.len())
        .map(|i| {
            let j = geom.partner_flat(i);
            let mut acc: C64 = (0..snap.len()).map(|c| h[(i, c)] * h[(j, c)].conj()).sum::<C64>() / t;
            if i == j {
                acc -= noise_floor;
            }
            acc
        })
        .collect();
    Grid2::new(geom.n_h(), geom.n_v(), data)
}

/// Step 2: horizontally and vertically mirrored sums of the step-1 sequence.
pub fn step2_decompose(x: &Grid2) -> (Grid2, Grid2) {
    let (nh, nv) = (x.n_h, x.n_v);
    let mut s = Vec::with_capacity(nh * nv);
    let mut t = Vec::with_capacity(nh * nv);
    for q in 0..nv {
        for p in 0..nh {
            s.push(x.get(p, q) + x.get(nh - 1 - p, q));
            t.push(x.get(p, q) + x.get(p, nv - 1 - q));
        }
    }
    (Grid2 { n_h: nh, n_v: nv, data: s }, Grid2 { n_h: nh, n_v: nv, data: t })
}

/// Reference antenna for step 3: the center for odd×odd arrays, otherwise the
/// element with the smallest `|m| + |n|`, ties broken toward positive indices.
pub fn reference_element(geom: &ArrayGeometry) -> usize {
    (0..geom.len())
        .min_by(|&a, &b| {
            let (ma, na) = geom.index_of(a);
            let (mb, nb) = geom.index_of(b);
            (ma.abs() + na.abs())
                .total_cmp(&(mb.abs() + nb.abs()))
                .then(mb.total_cmp(&ma))
                .then(nb.total_cmp(&na))
        })
        .expect("geometry has at least one antenna")
}

/// Step 3: `c(m,n) = (1/T) Σ_t h_t(m,n) conj(h_t(ref))`.
pub fn step3_center_product(snap: &SnapshotSet, geom: &ArrayGeometry, noise_floor: f64) -> Result<Grid2> {
    check(snap, geom)?;
    let t = snap.len() as f64;
    let h = &snap.snapshots;
    let r = reference_element(geom);
    let data = (0..geom.len())
        .map(|i| {
            let mut acc: C64 = (0..snap.len()).map(|c| h[(i, c)] * h[(r, c)].conj()).sum::<C64>() / t;
            if i == r {
                acc -= noise_floor;
            }
            acc
        })
        .collect();
    Grid2::new(geom.n_h(), geom.n_v(), data)
}

/// Runs all three steps.
pub fn decompose(snap: &SnapshotSet, geom: &ArrayGeometry, noise: NoiseFloor) -> Result<TpdSequences> {
    let noise_floor = noise.resolve(snap);
    let step1 = step1_angular_product(snap, geom, noise_floor)?;
    let (step2_elev, step2_azim) = step2_decompose(&step1);
    let step3 = step3_center_product(snap, geom, noise_floor)?;
    Ok(TpdSequences {
        step1,
        step2_elev,
        step2_azim,
        step3,
        snapshots_used: snap.len(),
        reference: reference_element(geom),
        noise_floor,
    })
}

/// Magnitude/phase dump of all sequences, one row per antenna.
pub fn format_sequences_csv(seq: &TpdSequences, geom: &ArrayGeometry) -> String {
    let mut out = String::from("m,n,x_abs,x_arg,s_abs,s_arg,t_abs,t_arg,c_abs,c_arg\n");
    for i in 0..geom.len() {
        let (m, n) = geom.index_of(i);
        let _ = write!(out, "{m},{n}");
        for g in [&seq.step1, &seq.step2_elev, &seq.step2_azim, &seq.step3] {
            let z = g.data[i];
            let _ = write!(out, ",{},{}", z.norm(), z.arg());
        }
        out.push('\n');
    }
    out
}
