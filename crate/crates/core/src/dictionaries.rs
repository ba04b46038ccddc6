//! Angular-domain (DFT) and polar-domain (Fresnel) sparsifying dictionaries.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::fresnel_response;
use crate::geometry::ArrayGeometry;
use crate::{Error, Result, C64};

/// Coherence control factor giving a distance-adjacent coherence near 0.5
/// at broadside.
pub const DEFAULT_BETA: f64 = 1.55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// Planar-wave atoms over `(u, v)`.
    Angular,
    /// Fresnel atoms over `(u, v, r)`.
    Polar,
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::Angular => "AD",
            Flavor::Polar => "PD",
        })
    }
}

/// Parameter tuple of one atom. `r` is infinite for planar atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl GridPoint {
    pub fn inv_r(&self) -> f64 {
        if self.r.is_infinite() {
            0.0
        } else {
            1.0 / self.r
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    /// `N x G`, unit-norm columns.
    pub atoms: DMatrix<C64>,
    pub grid: Vec<GridPoint>,
    pub flavor: Flavor,
    /// Coherence control factor (polar only).
    pub beta: Option<f64>,
    /// Finite distance levels `S` (polar only); every angle also has a far-field atom.
    pub distance_levels: Option<usize>,
    /// Grid extent `[n_u, n_v, n_r]`; atom `((iv * n_u + iu) * n_r + ir)`.
    pub shape: [usize; 3],
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Bytes held by the atom matrix.
    pub fn memory_bytes(&self) -> usize {
        self.atoms.len() * std::mem::size_of::<C64>()
    }

    pub fn grid_coords(&self, g: usize) -> [usize; 3] {
        let [nu, _, nr] = self.shape;
        let ir = g % nr;
        let a = g / nr;
        [a % nu, a / nu, ir]
    }

    pub fn grid_index(&self, c: [usize; 3]) -> usize {
        let [nu, _, nr] = self.shape;
        (c[1] * nu + c[0]) * nr + c[2]
    }

    /// Grid neighbours of atom `g` (one step along any subset of axes).
    pub fn neighbors(&self, g: usize) -> Vec<usize> {
        let c = self.grid_coords(g);
        let mut out = Vec::with_capacity(26);
        for du in -1i64..=1 {
            for dv in -1i64..=1 {
                for dr in -1i64..=1 {
                    if du == 0 && dv == 0 && dr == 0 {
                        continue;
                    }
                    let n = [c[0] as i64 + du, c[1] as i64 + dv, c[2] as i64 + dr];
                    if (0..3).all(|i| n[i] >= 0 && (n[i] as usize) < self.shape[i]) {
                        out.push(self.grid_index([n[0] as usize, n[1] as usize, n[2] as usize]));
                    }
                }
            }
        }
        out
    }
}

/// Default angular oversampling: 1 for planar arrays, 2 horizontally for linear arrays.
pub fn default_oversampling(geom: &ArrayGeometry) -> (usize, usize) {
    if geom.is_ula() {
        (2, 1)
    } else {
        (1, 1)
    }
}

/// DFT grid `u_i = 2i/(On) - 1 + 1/(On)`, `i = 0..On`.
pub fn angular_grid(n: usize, oversampling: usize) -> Vec<f64> {
    let total = n * oversampling;
    (0..total)
        .map(|i| 2.0 * i as f64 / total as f64 - 1.0 + 1.0 / total as f64)
        .collect()
}

fn effective_oversampling(geom: &ArrayGeometry, o: (usize, usize)) -> Result<(usize, usize)> {
    if o.0 == 0 || o.1 == 0 {
        return Err(Error::InvalidParameter("oversampling factors must be >= 1".into()));
    }
    // A single row cannot resolve elevation.
    Ok((if geom.n_h() == 1 { 1 } else { o.0 }, if geom.n_v() == 1 { 1 } else { o.1 }))
}

fn build(geom: &ArrayGeometry, points: Vec<GridPoint>) -> DMatrix<C64> {
    let n = geom.len();
    let scale = 1.0 / (n as f64).sqrt();
    let cols: Vec<Vec<C64>> = points
        .par_iter()
        .map(|p| {
            fresnel_response(geom, p.u, p.v, p.inv_r())
                .into_iter()
                .map(|x| x * scale)
                .collect()
        })
        .collect();
    let mut atoms = DMatrix::zeros(n, points.len());
    for (j, c) in cols.into_iter().enumerate() {
        atoms.set_column(j, &DVector::from_vec(c));
    }
    atoms
}

/// Planar-wave dictionary on an `O_h n_h x O_v n_v` grid.
pub fn build_ad_dictionary(geom: &ArrayGeometry, oversampling: (usize, usize)) -> Result<Dictionary> {
    let (oh, ov) = effective_oversampling(geom, oversampling)?;
    let us = angular_grid(geom.n_h(), oh);
    let vs = angular_grid(geom.n_v(), ov);
    let mut grid = Vec::with_capacity(us.len() * vs.len());
    for &v in &vs {
        for &u in &us {
            grid.push(GridPoint { u, v, r: f64::INFINITY });
        }
    }
    let atoms = build(geom, grid.clone());
    Ok(Dictionary {
        atoms,
        grid,
        flavor: Flavor::Angular,
        beta: None,
        distance_levels: None,
        shape: [us.len(), vs.len(), 1],
    })
}

/// Number of finite distance levels for coherence factor `beta` over `[r_min, r_max]`.
pub fn pd_level_count(geom: &ArrayGeometry, beta: f64, r_min: f64, r_max: f64) -> Result<usize> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    if !(r_min > 0.0) {
        return Err(Error::InvalidParameter(format!("r_min must be > 0, got {r_min}")));
    }
    if !(r_max >= r_min) {
        return Err(Error::InvalidParameter(format!("need r_min <= r_max, got [{r_min}, {r_max}]")));
    }
    let a = geom.aperture();
    let span = 1.0 / r_min - 1.0 / r_max;
    let steps = (a * a / (2.0 * geom.wavelength() * beta * beta) * span).ceil();
    Ok(steps as usize + 1)
}

/// Finite distance levels, uniform in `1/r`, ordered from far to near.
pub fn pd_distance_levels(geom: &ArrayGeometry, beta: f64, r_min: f64, r_max: f64) -> Result<Vec<f64>> {
    let s = pd_level_count(geom, beta, r_min, r_max)?;
    Ok(inverse_uniform_levels(r_min, r_max, s))
}

/// `count` distances whose inverses are evenly spaced in `[1/r_max, 1/r_min]`, far to near.
pub fn inverse_uniform_levels(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![r_min];
    }
    let lo = 1.0 / r_max;
    let hi = 1.0 / r_min;
    (0..count)
        .map(|s| {
            let inv = lo + (hi - lo) * s as f64 / (count - 1) as f64;
            if s == count - 1 {
                r_min
            } else if s == 0 {
                r_max
            } else {
                1.0 / inv
            }
        })
        .collect()
}

/// Polar-domain dictionary: the angular grid times `S` inverse-uniform
/// distance levels plus one far-field atom per angle.
pub fn build_pd_dictionary(
    geom: &ArrayGeometry,
    angle_oversampling: (usize, usize),
    beta: f64,
    r_min: f64,
    r_max: f64,
) -> Result<Dictionary> {
    let (oh, ov) = effective_oversampling(geom, angle_oversampling)?;
    let levels = pd_distance_levels(geom, beta, r_min, r_max)?;
    let us = angular_grid(geom.n_h(), oh);
    let vs = angular_grid(geom.n_v(), ov);
    let mut radii = vec![f64::INFINITY];
    radii.extend(&levels);
    let mut grid = Vec::with_capacity(us.len() * vs.len() * radii.len());
    for &v in &vs {
        for &u in &us {
            for &r in &radii {
                grid.push(GridPoint { u, v, r });
            }
        }
    }
    let atoms = build(geom, grid.clone());
    Ok(Dictionary {
        atoms,
        grid,
        flavor: Flavor::Polar,
        beta: Some(beta),
        distance_levels: Some(levels.len()),
        shape: [us.len(), vs.len(), radii.len()],
    })
}

/// Largest `|⟨a_i, a_j⟩|` over distinct atoms, computed exactly in column blocks.
pub fn mutual_coherence(dict: &Dictionary) -> Result<f64> {
    let g = dict.atoms.ncols();
    if g < 2 {
        return Err(Error::InvalidParameter("mutual coherence needs at least two atoms".into()));
    }
    const BLOCK: usize = 256;
    let starts: Vec<usize> = (0..g).step_by(BLOCK).collect();
    let best = starts
        .par_iter()
        .map(|&start| {
            let width = BLOCK.min(g - start);
            let block = dict.atoms.columns(start, width);
            let rest = dict.atoms.columns(start, g - start);
            let gram = block.ad_mul(&rest);
            let mut best: f64 = 0.0;
            for i in 0..width {
                for j in (i + 1)..(g - start) {
                    best = best.max(gram[(i, j)].norm());
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best.min(1.0))
}

/// Coherence between consecutive finite distance levels at the angle closest
/// to `(u, v)`; entry `s` compares level `s` with level `s + 1`.
pub fn adjacent_distance_coherence(dict: &Dictionary, u: f64, v: f64) -> Result<Vec<f64>> {
    if dict.flavor != Flavor::Polar {
        return Err(Error::InvalidParameter("distance coherence needs a polar dictionary".into()));
    }
    let [nu, nv, nr] = dict.shape;
    let mut best = (f64::INFINITY, 0usize);
    for a in 0..nu * nv {
        let p = dict.grid[a * nr];
        let d = (p.u - u).powi(2) + (p.v - v).powi(2);
        if d < best.0 {
            best = (d, a);
        }
    }
    let base = best.1 * nr;
    Ok((1..nr - 1)
        .map(|s| {
            let a = dict.atoms.column(base + s);
            let b = dict.atoms.column(base + s + 1);
            a.dotc(&b).norm()
        })
        .collect())
}

/// Fraction of the energy of `h` captured by each atom, largest first.
///
/// A far-field response on an orthonormal angular grid puts everything in one
/// atom; a near-field response spreads over many (power leakage).
pub fn energy_profile(dict: &Dictionary, h: &[C64]) -> Result<Vec<f64>> {
    if h.len() != dict.atoms.nrows() {
        return Err(Error::DimensionMismatch { expected: dict.atoms.nrows(), actual: h.len() });
    }
    let energy: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::InvalidParameter("zero channel".into()));
    }
    let y = DVector::from_column_slice(h);
    let mut out: Vec<f64> = dict.atoms.ad_mul(&y).iter().map(|c| c.norm_sqr() / energy).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{exact_response, planar_response};
    use crate::linalg::dot;

    #[test]
    fn ad_orthonormal_at_unit_oversampling() {
        let g = ArrayGeometry::new(4, 4, 0.01).unwrap();
        let d = build_ad_dictionary(&g, (1, 1)).unwrap();
        assert_eq!(d.len(), 16);
        let gram = d.atoms.ad_mul(&d.atoms);
        let id = DMatrix::<C64>::identity(16, 16);
        assert!((gram - id).camax() < 1e-12);
        assert!(mutual_coherence(&d).unwrap() < 1e-12);
    }

    #[test]
    fn grid_sizes() {
        let g = ArrayGeometry::new(8, 4, 0.01).unwrap();
        let d = build_ad_dictionary(&g, (2, 3)).unwrap();
        assert_eq!(d.len(), 16 * 12);
        let p = build_pd_dictionary(&g, (1, 1), 1.0, 0.05, 1.0).unwrap();
        let s = p.distance_levels.unwrap();
        assert_eq!(p.len(), 32 * (s + 1));
        for j in 0..p.len() {
            assert!((p.atoms.column(j).norm() - 1.0).abs() < 1e-12);
        }
        let ula = ArrayGeometry::new(16, 1, 0.01).unwrap();
        assert_eq!(default_oversampling(&ula), (2, 1));
        assert_eq!(build_ad_dictionary(&ula, (2, 2)).unwrap().len(), 32);
    }

    #[test]
    fn on_grid_far_field_is_one_atom() {
        let g = ArrayGeometry::new(8, 8, 0.01).unwrap();
        let d = build_ad_dictionary(&g, (1, 1)).unwrap();
        let target = d.grid[19];
        let h = planar_response(&g, target.u, target.v);
        let energy: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        let proj = dot(d.atoms.column(19).as_slice(), &h).norm_sqr();
        assert!((proj / energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_field_leaks_energy() {
        let g = ArrayGeometry::new(32, 32, 0.01).unwrap();
        let b = g.region_boundaries().unwrap();
        let d = build_ad_dictionary(&g, (1, 1)).unwrap();
        let target = d.grid[16 * 32 + 18];
        let h = exact_response(&g, target.u, target.v, 0.05 * b.rayleigh_distance);
        let energy: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        let best = (0..d.len())
            .map(|j| dot(d.atoms.column(j).as_slice(), &h).norm_sqr() / energy)
            .fold(0.0, f64::max);
        assert!(best < 0.9, "captured fraction {best}");
        let profile = energy_profile(&d, &h).unwrap();
        assert!((profile[0] - best).abs() < 1e-12);
        assert!((profile.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn level_count_formula() {
        let g = ArrayGeometry::new(64, 1, 0.01).unwrap();
        assert_eq!(pd_level_count(&g, 1.0, 2.0, 2.0).unwrap(), 1);
        let p = build_pd_dictionary(&g, (1, 1), 1.0, 2.0, 2.0).unwrap();
        assert_eq!(p.len(), 64 * 2);
        let a = g.aperture();
        let expect = |beta: f64| (a * a / (2.0 * 0.01 * beta * beta) * (1.0 / 0.1 - 1.0 / 10.0)).ceil() as usize + 1;
        let s1 = pd_level_count(&g, 1.0, 0.1, 10.0).unwrap();
        let s2 = pd_level_count(&g, 2.0, 0.1, 10.0).unwrap();
        assert_eq!(s1, expect(1.0));
        assert_eq!(s2, expect(2.0));
        let ratio = (s1 - 1) as f64 / (s2 - 1) as f64;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
        assert!(pd_level_count(&g, 1.0, 0.0, 1.0).is_err());
        assert!(build_pd_dictionary(&g, (1, 1), 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn levels_are_uniform_in_inverse_distance() {
        let lv = inverse_uniform_levels(1.0, 10.0, 4);
        assert_eq!(lv[0], 10.0);
        assert_eq!(lv[3], 1.0);
        let inv: Vec<f64> = lv.iter().map(|r| 1.0 / r).collect();
        let steps: Vec<f64> = inv.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(steps.iter().all(|s| (s - 0.3).abs() < 1e-12));
    }

    #[test]
    fn doubling_beta_raises_adjacent_coherence() {
        let g = ArrayGeometry::new(64, 1, 0.01).unwrap();
        let b = g.region_boundaries().unwrap();
        let (lo, hi) = (0.5 * b.fresnel_distance, b.rayleigh_distance);
        let c1 = adjacent_distance_coherence(&build_pd_dictionary(&g, (1, 1), 1.0, lo, hi).unwrap(), 0.0, 0.0).unwrap();
        let c2 = adjacent_distance_coherence(&build_pd_dictionary(&g, (1, 1), 2.0, lo, hi).unwrap(), 0.0, 0.0).unwrap();
        let mean = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
        assert!(mean(&c1) > 0.8);
        assert!(mean(&c2) < mean(&c1));
    }

    #[test]
    fn duplicated_atom_has_unit_coherence() {
        let g = ArrayGeometry::new(4, 4, 0.01).unwrap();
        let mut d = build_ad_dictionary(&g, (1, 1)).unwrap();
        let c = d.atoms.column(3).into_owned();
        d.atoms.set_column(7, &c);
        assert!((mutual_coherence(&d).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blocked_coherence_matches_pairwise() {
        let g = ArrayGeometry::new(12, 3, 0.01).unwrap();
        let d = build_pd_dictionary(&g, (2, 1), 1.2, 0.02, 0.5).unwrap();
        assert!(d.len() > 256);
        let mut best: f64 = 0.0;
        for i in 0..d.len() {
            for j in (i + 1)..d.len() {
                best = best.max(d.atoms.column(i).dotc(&d.atoms.column(j)).norm());
            }
        }
        assert!((mutual_coherence(&d).unwrap() - best).abs() < 1e-12);
        let single = Dictionary { atoms: d.atoms.columns(0, 1).into_owned(), grid: vec![d.grid[0]], shape: [1, 1, 1], ..d };
        assert!(mutual_coherence(&single).is_err());
    }

    #[test]
    fn neighbors_stay_in_grid() {
        let g = ArrayGeometry::new(4, 4, 0.01).unwrap();
        let d = build_pd_dictionary(&g, (1, 1), 1.0, 0.01, 0.1).unwrap();
        assert_eq!(d.neighbors(0).len(), 7);
        for gi in 0..d.len() {
            assert_eq!(d.grid_index(d.grid_coords(gi)), gi);
        }
    }
}
