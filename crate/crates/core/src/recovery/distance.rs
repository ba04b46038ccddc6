//! Distance recovery from the center-referenced step-3 sequence.

use crate::channel::fresnel_entry;
use crate::dictionaries::inverse_uniform_levels;
use crate::geometry::ArrayGeometry;
use crate::linalg::dot;
use crate::tpd::Grid2;
use crate::{Error, Result, C64};

/// Cyclic re-estimation passes after the initial cancellation sweep.
pub const REFINEMENT_PASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    /// Meters; infinite when the planar hypothesis fits best.
    pub r: f64,
    pub far_field: bool,
    /// Least-squares amplitude of the fitted atom (an estimate of the path power).
    pub amplitude: f64,
}

/// Default distance grid: `count` levels uniform in `1/r`, far to near.
pub fn tpd_distance_grid(r_min: f64, r_max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Empty("distance grid"));
    }
    if !(r_min > 0.0 && r_max >= r_min) {
        return Err(Error::InvalidParameter(format!("invalid distance range [{r_min}, {r_max}]")));
    }
    Ok(inverse_uniform_levels(r_min, r_max, count))
}

/// Expected step-3 sequence of a unit-power scatterer at `(u, v, 1/r)`.
pub fn center_atom(geom: &ArrayGeometry, u: f64, v: f64, inv_r: f64, reference: usize) -> Vec<C64> {
    let k = geom.wavenumber();
    let at = |i: usize| {
        let [x, y, _] = geom.position(geom.index_of(i));
        fresnel_entry(k, x, y, u, v, inv_r)
    };
    let r0 = at(reference).conj();
    (0..geom.len()).map(|i| at(i) * r0).collect()
}

struct Candidates {
    /// Last entry is the planar (infinite distance) hypothesis.
    atoms: Vec<Vec<C64>>,
    radii: Vec<f64>,
}

/// Matched-filter distance search with successive interference cancellation.
///
/// Pairs are processed in descending order of their best matched-filter
/// power (ties by input order). Each pair picks the candidate distance whose
/// atom best matches what remains of `c` after projecting out the atoms
/// already chosen; afterwards every pair is re-estimated against the others
/// for [`REFINEMENT_PASSES`] passes. A planar atom competes with the grid and
/// wins only when it matches strictly better, in which case `r = ∞`.
pub fn tpd_recover_distance(
    c: &Grid2,
    pairs: &[(f64, f64)],
    geom: &ArrayGeometry,
    r_grid: &[f64],
    reference: usize,
) -> Result<Vec<DistanceEstimate>> {
    if r_grid.is_empty() {
        return Err(Error::Empty("distance grid"));
    }
    let c = c.as_slice();
    if c.len() != geom.len() {
        return Err(Error::DimensionMismatch { expected: geom.len(), actual: c.len() });
    }
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let cands: Vec<Candidates> = pairs
        .iter()
        .map(|&(u, v)| {
            let mut radii = r_grid.to_vec();
            radii.push(f64::INFINITY);
            let atoms = radii
                .iter()
                .map(|&r| center_atom(geom, u, v, if r.is_infinite() { 0.0 } else { 1.0 / r }, reference))
                .collect();
            Candidates { atoms, radii }
        })
        .collect();

    let mut order: Vec<(usize, f64)> =
        cands.iter().enumerate().map(|(l, cand)| (l, best_match(cand, c).1)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut choice: Vec<Option<usize>> = vec![None; pairs.len()];
    for &(l, _) in &order {
        let res = residual(&cands, &choice, None, c);
        choice[l] = Some(best_match(&cands[l], &res).0);
    }
    for _ in 0..REFINEMENT_PASSES {
        for &(l, _) in &order {
            let res = residual(&cands, &choice, Some(l), c);
            choice[l] = Some(best_match(&cands[l], &res).0);
        }
    }

    let chosen: Vec<&[C64]> =
        choice.iter().enumerate().map(|(l, j)| cands[l].atoms[j.expect("all chosen")].as_slice()).collect();
    let amps = amplitudes(&chosen, c);
    Ok(choice
        .iter()
        .enumerate()
        .map(|(l, j)| {
            let r = cands[l].radii[j.expect("all chosen")];
            DistanceEstimate { r, far_field: r.is_infinite(), amplitude: amps[l] }
        })
        .collect())
}

/// Index of the best-matching candidate and its power `|⟨b, y⟩|²/‖b‖²`.
fn best_match(cand: &Candidates, y: &[C64]) -> (usize, f64) {
    let n = y.len() as f64;
    let planar = cand.atoms.len() - 1;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (j, a) in cand.atoms.iter().enumerate().take(planar) {
        let p = dot(a, y).norm_sqr() / n;
        if p > best.1 {
            best = (j, p);
        }
    }
    let p = dot(&cand.atoms[planar], y).norm_sqr() / n;
    if p > best.1 * (1.0 + 1e-12) {
        best = (planar, p);
    }
    best
}

/// `y` minus its projection onto the chosen atoms of all pairs except `skip`.
fn residual(cands: &[Candidates], choice: &[Option<usize>], skip: Option<usize>, y: &[C64]) -> Vec<C64> {
    let basis: Vec<&[C64]> = choice
        .iter()
        .enumerate()
        .filter(|&(l, _)| Some(l) != skip)
        .filter_map(|(l, j)| j.map(|j| cands[l].atoms[j].as_slice()))
        .collect();
    let q = orthonormalize(&basis);
    let mut r = y.to_vec();
    for e in &q {
        let coef = dot(e, &r);
        r.iter_mut().zip(e).for_each(|(x, b)| *x -= coef * b);
    }
    r
}

/// Modified Gram-Schmidt, skipping vectors already (numerically) in the span.
fn orthonormalize(vs: &[&[C64]]) -> Vec<Vec<C64>> {
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let scale: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let mut w = v.to_vec();
        for e in &q {
            let coef = dot(e, &w);
            w.iter_mut().zip(e).for_each(|(x, b)| *x -= coef * b);
        }
        let nrm: f64 = w.iter().map(|x| x.norm_sqr()).sum::<f64>();
        if nrm > 1e-20 * scale {
            let s = 1.0 / nrm.sqrt();
            w.iter_mut().for_each(|x| *x *= s);
            q.push(w);
        }
    }
    q
}

/// Joint least-squares magnitudes, falling back to per-atom matched filtering
/// when the chosen atoms are linearly dependent.
fn amplitudes(atoms: &[&[C64]], y: &[C64]) -> Vec<f64> {
    use nalgebra::DMatrix;
    let n = y.len();
    let a = DMatrix::from_fn(n, atoms.len(), |i, j| atoms[j][i]);
    let b = DMatrix::from_column_slice(n, 1, y);
    match crate::linalg::least_squares(&a, &b) {
        Some(x) => x.iter().map(|z| z.norm()).collect(),
        None => atoms.iter().map(|a| dot(a, y).norm() / n as f64).collect(),
    }
}
