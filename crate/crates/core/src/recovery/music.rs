//! MUSIC pseudo-spectra: one-dimensional line spectra and dictionary grids.

use nalgebra::DMatrix;

use crate::dictionaries::Dictionary;
use crate::linalg::{cis, hermitian_eigen_desc, signal_subspace};
use crate::{Error, Result, C64};

/// A spectral peak is flagged as unreliable when it is below this multiple of
/// the spectrum median.
pub const LOW_CONFIDENCE_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MusicOutput {
    /// `(grid index, pseudo-spectrum value)`, strongest first.
    pub peaks: Vec<(usize, f64)>,
    pub spectrum: Vec<f64>,
    pub low_confidence: bool,
}

/// Subarray length used for spatial smoothing of a `len`-sample sequence.
pub fn smoothing_length(len: usize) -> usize {
    (2 * len).div_ceil(3)
}

/// MUSIC on a uniformly sampled line spectrum.
///
/// Every column of `data` is one snapshot of `Σ_l a_l exp(jω_l i)`. When there
/// are fewer snapshots than samples the covariance is spatially smoothed over
/// subarrays of length `⌈2/3·len⌉`. `omegas` are the candidate angular
/// frequencies in radians per sample; with `circular` the grid is treated as
/// wrapping around when looking for local maxima.
pub fn music_1d(data: &DMatrix<C64>, omegas: &[f64], order: usize, circular: bool) -> Result<MusicOutput> {
    let len = data.nrows();
    if len == 0 || data.ncols() == 0 {
        return Err(Error::Empty("MUSIC input"));
    }
    if omegas.is_empty() {
        return Err(Error::Empty("MUSIC frequency grid"));
    }
    let sub = if data.ncols() < len { smoothing_length(len) } else { len };
    if order == 0 || order >= sub {
        return Err(Error::InvalidParameter(format!(
            "model order {order} must lie in 1..{sub} (subarray length)"
        )));
    }
    let mut cov = DMatrix::<C64>::zeros(sub, sub);
    let mut count = 0usize;
    for c in 0..data.ncols() {
        for s in 0..=(len - sub) {
            let x = data.view((s, c), (sub, 1));
            cov += x * x.adjoint();
            count += 1;
        }
    }
    cov /= C64::new(count as f64, 0.0);
    let (_, vectors) = hermitian_eigen_desc(&cov);
    let noise = vectors.columns(order, sub - order);

    let spectrum: Vec<f64> = omegas
        .iter()
        .map(|&w| {
            let a: Vec<C64> = (0..sub).map(|i| cis(w * i as f64)).collect();
            let proj: f64 = noise
                .column_iter()
                .map(|e| e.iter().zip(&a).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr())
                .sum();
            1.0 / proj.max(f64::MIN_POSITIVE)
        })
        .collect();

    let n = spectrum.len();
    let is_peak = |i: usize| {
        let left = if i > 0 { Some(i - 1) } else if circular && n > 1 { Some(n - 1) } else { None };
        let right = if i + 1 < n { Some(i + 1) } else if circular && n > 1 { Some(0) } else { None };
        left.is_none_or(|j| spectrum[i] > spectrum[j]) && right.is_none_or(|j| spectrum[i] > spectrum[j])
    };
    let mut peaks: Vec<(usize, f64)> = (0..n).filter(|&i| is_peak(i)).map(|i| (i, spectrum[i])).collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(order);
    let low_confidence = peaks.first().is_none_or(|p| p.1 < LOW_CONFIDENCE_RATIO * median(&spectrum));
    Ok(MusicOutput { peaks, spectrum, low_confidence })
}

/// MUSIC over the atoms of a dictionary.
///
/// The signal subspace is spanned by the `order` dominant left singular
/// vectors of the snapshot matrix; the pseudo-spectrum of a unit-norm atom is
/// `1/(1 - ‖U_sᴴ a‖²)`. Peaks are atoms exceeding all of their grid neighbours.
pub fn music_dictionary(dict: &Dictionary, snapshots: &DMatrix<C64>, order: usize) -> Result<MusicOutput> {
    if snapshots.nrows() != dict.atoms.nrows() {
        return Err(Error::DimensionMismatch { expected: dict.atoms.nrows(), actual: snapshots.nrows() });
    }
    if order == 0 || order >= snapshots.nrows() {
        return Err(Error::InvalidParameter(format!("model order {order} must lie in 1..{}", snapshots.nrows())));
    }
    let us = signal_subspace(snapshots, order);
    let proj = us.ad_mul(&dict.atoms);
    let spectrum: Vec<f64> = proj
        .column_iter()
        .map(|c| 1.0 / (1.0 - c.norm_squared()).max(1e-15))
        .collect();
    let mut peaks: Vec<(usize, f64)> = (0..spectrum.len())
        .filter(|&g| dict.neighbors(g).iter().all(|&h| spectrum[g] > spectrum[h]))
        .map(|g| (g, spectrum[g]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(order);
    let low_confidence = peaks.first().is_none_or(|p| p.1 < LOW_CONFIDENCE_RATIO * median(&spectrum));
    Ok(MusicOutput { peaks, spectrum, low_confidence })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
