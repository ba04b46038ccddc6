//! Re-association of per-axis angle candidates and alias resolution.

use nalgebra::DMatrix;

use crate::channel::{exact_response, planar_response};
use crate::geometry::ArrayGeometry;
use crate::linalg::least_squares;
use crate::recovery::angles::{aliases, AngleCandidates};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub u: f64,
    pub v: f64,
    /// Focused beamforming power at `(u, v)` once the pairs chosen before it
    /// are cancelled.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    /// In selection order.
    pub pairs: Vec<AnglePair>,
    /// Fewer than the requested number of pairs had a finite score.
    pub incomplete: bool,
}

fn power(a: &[C64], snapshots: &DMatrix<C64>) -> f64 {
    snapshots
        .column_iter()
        .map(|y| a.iter().zip(y.iter()).map(|(x, z)| x.conj() * z).sum::<C64>().norm_sqr())
        .sum::<f64>()
        / a.len() as f64
}

/// Beamforming power `Σ_t |a(u,v)ᴴ y_t|² / N` with planar steering.
pub fn beam_power(geom: &ArrayGeometry, snapshots: &DMatrix<C64>, u: f64, v: f64) -> f64 {
    power(&planar_response(geom, u, v), snapshots)
}

/// Strongest steering vector at `(u, v)` among planar steering and exact
/// spherical steering at each distance in `focus`, with its power.
fn focused(geom: &ArrayGeometry, snapshots: &DMatrix<C64>, u: f64, v: f64, focus: &[f64]) -> (f64, Vec<C64>) {
    let planar = planar_response(geom, u, v);
    let mut best = (power(&planar, snapshots), planar);
    for &r in focus {
        let a = exact_response(geom, u, v, r);
        let p = power(&a, snapshots);
        if p > best.0 {
            best = (p, a);
        }
    }
    best
}

/// Largest beamforming power at `(u, v)` over planar steering and exact
/// spherical steering at each distance in `focus`.
pub fn focused_power(geom: &ArrayGeometry, snapshots: &DMatrix<C64>, u: f64, v: f64, focus: &[f64]) -> f64 {
    focused(geom, snapshots, u, v, focus).0
}

fn resolve(
    geom: &ArrayGeometry,
    snapshots: &DMatrix<C64>,
    u: f64,
    v: f64,
    focus: &[f64],
) -> Option<(AnglePair, Vec<C64>)> {
    let p = geom.product_period();
    let us = if geom.n_h() > 1 { aliases(u, p) } else { vec![u] };
    let vs = if geom.n_v() > 1 { aliases(v, p) } else { vec![v] };
    let mut best: Option<(AnglePair, Vec<C64>)> = None;
    for &a in &us {
        for &b in &vs {
            if a * a + b * b > 1.0 + 1e-12 {
                continue;
            }
            let (score, atom) = focused(geom, snapshots, a, b, focus);
            if best.as_ref().is_none_or(|x| score > x.0.score) {
                best = Some((AnglePair { u: a, v: b, score }, atom));
            }
        }
    }
    best
}

/// Best alias combination of a `(u, v)` candidate inside the unit disc by
/// [`focused_power`], or `None` when no combination is a valid direction.
pub fn resolve_aliases(
    geom: &ArrayGeometry,
    snapshots: &DMatrix<C64>,
    u: f64,
    v: f64,
    focus: &[f64],
) -> Option<AnglePair> {
    resolve(geom, snapshots, u, v, focus).map(|x| x.0)
}

/// Associates `u` and `v` candidates into `paths` pairs.
///
/// Pairs are chosen greedily with successive cancellation. Each step scores
/// every unused combination on the residual snapshots at its best alias, by
/// beamforming focused at the distances in `focus` (planar steering
/// included), so the score holds up inside the Fresnel distance where planar
/// beams defocus. The winner's steering vector is then projected out of the
/// snapshots. Cancellation removes the sidelobes of accepted paths, and a
/// value shared by two scatterers can appear in two pairs.
pub fn pair_and_disambiguate(
    u: &AngleCandidates,
    v: &AngleCandidates,
    snapshots: &DMatrix<C64>,
    geom: &ArrayGeometry,
    focus: &[f64],
    paths: usize,
) -> Result<Pairing> {
    if u.values.is_empty() || v.values.is_empty() {
        return Err(Error::Empty("angle candidates"));
    }
    if snapshots.nrows() != geom.len() {
        return Err(Error::DimensionMismatch { expected: geom.len(), actual: snapshots.nrows() });
    }
    let mut free: Vec<(f64, f64)> = u.values.iter().flat_map(|&a| v.values.iter().map(move |&b| (a, b))).collect();
    free.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    free.dedup();
    let mut pairs: Vec<AnglePair> = Vec::new();
    let mut atoms: Vec<Vec<C64>> = Vec::new();
    let mut residual = snapshots.clone();
    while pairs.len() < paths {
        let best = free
            .iter()
            .enumerate()
            .filter_map(|(k, &(a, b))| resolve(geom, &residual, a, b, focus).map(|(p, atom)| (k, p, atom)))
            .max_by(|x, y| x.1.score.total_cmp(&y.1.score));
        let Some((k, pair, atom)) = best else { break };
        free.remove(k);
        pairs.push(pair);
        atoms.push(atom);
        let a = DMatrix::from_fn(geom.len(), atoms.len(), |r, c| atoms[c][r]);
        if let Some(x) = least_squares(&a, snapshots) {
            residual = snapshots - &a * x;
        }
    }
    let incomplete = pairs.len() < paths;
    Ok(Pairing { pairs, incomplete })
}
