//! Registered estimators and their shared configuration.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{exact_response, SnapshotSet};
use crate::dictionaries::{
    build_ad_dictionary, build_pd_dictionary, default_oversampling, pd_level_count, Dictionary, DEFAULT_BETA,
};
use crate::geometry::ArrayGeometry;
use crate::linalg::{least_squares, principal_snapshots};
use crate::recovery::angles::{tpd_recover_angles, SpectralMethod};
use crate::recovery::distance::{tpd_distance_grid, tpd_recover_distance};
use crate::recovery::music::music_dictionary;
use crate::recovery::omp::omp;
use crate::recovery::pairing::pair_and_disambiguate;
use crate::recovery::refine::{refine_offgrid, RefineOptions};
use crate::recovery::{Estimate, EstimateSet, MethodTag};
use crate::tpd::{decompose, NoiseFloor};
use crate::{Error, Result, C64};

/// Source of the noise power removed from same-antenna products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Estimated from the trailing eigenvalues of the snapshots.
    #[default]
    Estimate,
    /// Taken from the value recorded with the snapshots.
    Configured,
    /// Not removed.
    Ignore,
}

/// Estimator settings; `None` fields take geometry-dependent defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    /// Angular oversampling `(O_h, O_v)` shared by all methods.
    pub oversampling: Option<(usize, usize)>,
    pub pd_beta: f64,
    /// Distance range covered by the polar and TPD grids, meters.
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// Number of TPD distance levels.
    pub tpd_distance_points: Option<usize>,
    /// Principal components of the snapshot matrix kept by the solvers.
    pub mmv_rank: Option<usize>,
    /// Apply the same off-grid refinement to every method (on by default).
    pub refine: bool,
    pub noise: NoiseMode,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            oversampling: None,
            pd_beta: DEFAULT_BETA,
            r_min: None,
            r_max: None,
            tpd_distance_points: None,
            mmv_rank: None,
            refine: true,
            noise: NoiseMode::Estimate,
        }
    }
}

/// Fully resolved settings for one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub oversampling: (usize, usize),
    pub pd_beta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub tpd_distance_points: usize,
}

impl MethodConfig {
    /// Default distance range `[0.4·fresnel, rayleigh]`.
    pub fn resolve(&self, geom: &ArrayGeometry) -> Result<Resolved> {
        let b = geom.region_boundaries()?;
        let r_min = self.r_min.unwrap_or(0.4 * b.fresnel_distance);
        let r_max = self.r_max.unwrap_or(b.rayleigh_distance);
        if !(r_min > 0.0 && r_max >= r_min) {
            return Err(Error::Config(format!("invalid distance range [{r_min}, {r_max}]")));
        }
        let oversampling = self.oversampling.unwrap_or_else(|| default_oversampling(geom));
        if oversampling.0 == 0 || oversampling.1 == 0 {
            return Err(Error::Config("oversampling factors must be >= 1".into()));
        }
        let oversampling = (
            if geom.n_h() == 1 { 1 } else { oversampling.0 },
            if geom.n_v() == 1 { 1 } else { oversampling.1 },
        );
        let tpd_distance_points = self.tpd_distance_points.unwrap_or(geom.n_h().max(geom.n_v()));
        if tpd_distance_points == 0 {
            return Err(Error::Config("tpd_distance_points must be >= 1".into()));
        }
        if !(self.pd_beta > 0.0) {
            return Err(Error::Config(format!("pd_beta must be > 0, got {}", self.pd_beta)));
        }
        Ok(Resolved { oversampling, pd_beta: self.pd_beta, r_min, r_max, tpd_distance_points })
    }
}

/// All estimators for one geometry. Dictionaries are built on first use and
/// shared read-only afterwards, so one instance can serve concurrent trials.
#[derive(Debug)]
pub struct Estimators {
    geom: ArrayGeometry,
    config: MethodConfig,
    resolved: Resolved,
    ad: OnceLock<Dictionary>,
    pd: OnceLock<Dictionary>,
}

impl Estimators {
    pub fn new(geom: ArrayGeometry, config: MethodConfig) -> Result<Self> {
        let resolved = config.resolve(&geom)?;
        Ok(Self { geom, config, resolved, ad: OnceLock::new(), pd: OnceLock::new() })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn config(&self) -> &MethodConfig {
        &self.config
    }

    pub fn resolved(&self) -> &Resolved {
        &self.resolved
    }

    pub fn ad_dictionary(&self) -> Result<&Dictionary> {
        if let Some(d) = self.ad.get() {
            return Ok(d);
        }
        let d = build_ad_dictionary(&self.geom, self.resolved.oversampling)?;
        Ok(self.ad.get_or_init(|| d))
    }

    pub fn pd_dictionary(&self) -> Result<&Dictionary> {
        if let Some(d) = self.pd.get() {
            return Ok(d);
        }
        let r = &self.resolved;
        let d = build_pd_dictionary(&self.geom, r.oversampling, r.pd_beta, r.r_min, r.r_max)?;
        Ok(self.pd.get_or_init(|| d))
    }

    /// Finite distance levels of the polar dictionary.
    pub fn pd_levels(&self) -> Result<usize> {
        let r = &self.resolved;
        pd_level_count(&self.geom, r.pd_beta, r.r_min, r.r_max)
    }

    pub fn tpd_distance_grid(&self) -> Result<Vec<f64>> {
        let r = &self.resolved;
        tpd_distance_grid(r.r_min, r.r_max, r.tpd_distance_points)
    }

    /// Number of grid points a method searches.
    ///
    /// AD: `O_h n_h · O_v n_v`; PD: AD × (S + 1); TPD: `O_h n_h + O_v n_v + S_tpd`,
    /// where an axis with a single antenna contributes nothing to TPD.
    pub fn search_space_size(&self, tag: MethodTag) -> Result<usize> {
        let (oh, ov) = self.resolved.oversampling;
        let angles = oh * self.geom.n_h() * ov * self.geom.n_v();
        Ok(match tag {
            MethodTag::AdOmp | MethodTag::AdMusic => angles,
            MethodTag::PdOmp | MethodTag::PdMusic => angles * (self.pd_levels()? + 1),
            MethodTag::TpdOmp | MethodTag::TpdMusic => {
                let h = if self.geom.n_h() > 1 { oh * self.geom.n_h() } else { 0 };
                let v = if self.geom.n_v() > 1 { ov * self.geom.n_v() } else { 0 };
                h + v + self.resolved.tpd_distance_points
            }
        })
    }

    /// Runs one estimator on a snapshot set, assuming `paths` scatterers.
    pub fn run(&self, tag: MethodTag, snap: &SnapshotSet, paths: usize) -> Result<EstimateSet> {
        if paths == 0 {
            return Err(Error::InvalidParameter("number of paths must be >= 1".into()));
        }
        if snap.is_empty() {
            return Err(Error::Empty("snapshot set"));
        }
        if snap.antennas() != self.geom.len() {
            return Err(Error::DimensionMismatch { expected: self.geom.len(), actual: snap.antennas() });
        }
        let rank = self.config.mmv_rank.unwrap_or(4 * paths).max(paths);
        let (reduced, _) = principal_snapshots(&snap.snapshots, rank);
        let mut flags = Vec::new();
        let mut points: Vec<[f64; 3]> = match tag {
            MethodTag::AdOmp | MethodTag::PdOmp => {
                let dict = if tag == MethodTag::AdOmp { self.ad_dictionary()? } else { self.pd_dictionary()? };
                let out = omp(&dict.atoms, &reduced, paths)?;
                for g in &out.dropped {
                    flags.push(format!("dropped rank-deficient atom {g}"));
                }
                out.support.iter().map(|&g| grid_point(dict, g)).collect()
            }
            MethodTag::AdMusic | MethodTag::PdMusic => {
                let dict = if tag == MethodTag::AdMusic { self.ad_dictionary()? } else { self.pd_dictionary()? };
                let out = music_dictionary(dict, &reduced, paths.min(reduced.ncols().max(1)))?;
                if out.low_confidence {
                    flags.push("low-confidence spectrum".into());
                }
                out.peaks.iter().map(|&(g, _)| grid_point(dict, g)).collect()
            }
            MethodTag::TpdOmp | MethodTag::TpdMusic => {
                let method = if tag == MethodTag::TpdOmp { SpectralMethod::Omp } else { SpectralMethod::Music };
                self.run_tpd(snap, &reduced, paths, method, &mut flags)?
            }
        };
        for p in &mut points {
            let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if norm > 1.0 {
                p[0] /= norm;
                p[1] /= norm;
                flags.push("grid point outside the visible region projected onto it".into());
            }
        }
        if points.len() < paths {
            flags.push(format!("found {} of {paths} paths", points.len()));
        }
        let mut entries = self.fit_powers(&points, &reduced, snap.len(), &mut flags);
        if self.config.refine && !entries.is_empty() {
            let opts = self.refine_options(tag)?;
            let out = refine_offgrid(&entries, &reduced, &self.geom, &opts);
            let points: Vec<[f64; 3]> = out.estimates.iter().map(|e| [e.u, e.v, e.inv_r()]).collect();
            entries = self.fit_powers(&points, &reduced, snap.len(), &mut flags);
        }
        let mut set = EstimateSet::new(tag, entries, self.search_space_size(tag)?);
        set.flags = flags;
        Ok(set)
    }

    fn run_tpd(
        &self,
        snap: &SnapshotSet,
        reduced: &DMatrix<C64>,
        paths: usize,
        method: SpectralMethod,
        flags: &mut Vec<String>,
    ) -> Result<Vec<[f64; 3]>> {
        let noise = match self.config.noise {
            NoiseMode::Estimate => NoiseFloor::FromData { paths },
            NoiseMode::Configured => NoiseFloor::Configured,
            NoiseMode::Ignore => NoiseFloor::Value(0.0),
        };
        let seq = decompose(snap, &self.geom, noise)?;
        let angles = tpd_recover_angles(&seq, &self.geom, paths, method, self.resolved.oversampling)?;
        if angles.u.low_confidence || angles.v.low_confidence {
            flags.push("low-confidence angle spectrum".into());
        }
        let grid = self.tpd_distance_grid()?;
        let pairing = pair_and_disambiguate(&angles.u, &angles.v, reduced, &self.geom, &grid, paths)?;
        if pairing.incomplete {
            flags.push("incomplete pairing".into());
        }
        let pairs: Vec<(f64, f64)> = pairing.pairs.iter().map(|p| (p.u, p.v)).collect();
        let dist = tpd_recover_distance(&seq.step3, &pairs, &self.geom, &grid, seq.reference)?;
        Ok(pairs
            .iter()
            .zip(&dist)
            .map(|(&(u, v), d)| [u, v, if d.far_field { 0.0 } else { 1.0 / d.r }])
            .collect())
    }

    fn refine_options(&self, tag: MethodTag) -> Result<RefineOptions> {
        let (oh, ov) = self.resolved.oversampling;
        let (nh, nv) = (self.geom.n_h(), self.geom.n_v());
        let axis = |n: usize, o: usize, span: f64| if n > 1 { span / (o * n) as f64 } else { 0.0 };
        let inv_span = 1.0 / self.resolved.r_min - 1.0 / self.resolved.r_max;
        Ok(match tag {
            MethodTag::AdOmp | MethodTag::AdMusic => RefineOptions::new(axis(nh, oh, 2.0), axis(nv, ov, 2.0), 0.0),
            MethodTag::PdOmp | MethodTag::PdMusic => {
                let s = self.pd_levels()?;
                let step = if s > 1 { inv_span / (s - 1) as f64 } else { inv_span };
                RefineOptions::new(axis(nh, oh, 2.0), axis(nv, ov, 2.0), step)
            }
            MethodTag::TpdOmp | MethodTag::TpdMusic => {
                let p = self.geom.product_period();
                let s = self.resolved.tpd_distance_points;
                let step = if s > 1 { inv_span / (s - 1) as f64 } else { inv_span };
                RefineOptions::new(axis(nh, oh, p), axis(nv, ov, p), step)
            }
        })
    }

    /// Path powers by least squares on the exact model: the mean squared
    /// magnitude of each fitted gain over the `snapshots` observations.
    fn fit_powers(&self, points: &[[f64; 3]], y: &DMatrix<C64>, snapshots: usize, flags: &mut Vec<String>) -> Vec<Estimate> {
        let n = self.geom.len();
        let cols: Vec<Vec<C64>> = points.iter().map(|p| exact_response(&self.geom, p[0], p[1], dist(p[2]))).collect();
        let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let t = snapshots as f64;
        let powers: Vec<f64> = match least_squares(&a, y) {
            Some(x) => x.row_iter().map(|r| r.norm_squared() / t).collect(),
            None => {
                flags.push("singular power fit; matched-filter powers used".into());
                a.column_iter().map(|c| c.ad_mul(y).norm_squared() / (n * n) as f64 / t).collect()
            }
        };
        let mut out: Vec<Estimate> = points
            .iter()
            .zip(powers)
            .map(|(p, power)| Estimate { u: p[0], v: p[1], r: dist(p[2]), power })
            .collect();
        crate::recovery::sort_by_power(&mut out);
        out
    }
}

fn dist(inv_r: f64) -> f64 {
    if inv_r > 0.0 {
        1.0 / inv_r
    } else {
        f64::INFINITY
    }
}

fn grid_point(dict: &Dictionary, g: usize) -> [f64; 3] {
    let p = dict.grid[g];
    [p.u, p.v, p.inv_r()]
}
