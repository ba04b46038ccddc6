//! Clustered scatterers and multi-snapshot near-field channel synthesis.
//!
//! Steering vectors use the outgoing-delay convention: the entry at antenna
//! `(m, n)` is `exp(-jk(‖p_s - p_mn‖ - r))`, so in the planar limit it becomes
//! `exp(jkd(mu + nv))`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::ArrayGeometry;
use crate::linalg::cis;
use crate::{Error, Result, C64};

/// Point scatterer described by directional cosines, distance and average power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub u: f64,
    pub v: f64,
    /// Distance from the array center in meters; `f64::INFINITY` is a plane wave.
    pub r: f64,
    pub power: f64,
}

impl Scatterer {
    pub fn new(u: f64, v: f64, r: f64, power: f64) -> Result<Self> {
        if !(u * u + v * v <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("u²+v² > 1 for ({u}, {v})")));
        }
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("distance must be > 0, got {r}")));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter(format!("power must be > 0, got {power}")));
        }
        Ok(Self { u, v, r, power })
    }

    /// Cosine against broadside, `sqrt(1 - u² - v²)`.
    pub fn w(&self) -> f64 {
        (1.0 - self.u * self.u - self.v * self.v).max(0.0).sqrt()
    }

    pub fn inv_r(&self) -> f64 {
        1.0 / self.r
    }
}

/// Wavefront model used to synthesize or match channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveModel {
    /// Exact spherical propagation.
    Exact,
    /// Second-order (Fresnel) expansion of the path length.
    Fresnel,
}

impl FromStr for WaveModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "spherical" => Ok(Self::Exact),
            "fresnel" => Ok(Self::Fresnel),
            other => Err(Error::Parse(format!("unknown wave model `{other}`"))),
        }
    }
}

impl std::fmt::Display for WaveModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Fresnel => "fresnel",
        })
    }
}

/// Path difference `‖r(u,v,w) - (x,y,0)‖ - r`, evaluated without cancellation.
#[inline]
pub fn path_difference(x: f64, y: f64, u: f64, v: f64, r: f64) -> f64 {
    let s = x * u + y * v;
    if r.is_infinite() {
        return -s;
    }
    let q = x * x + y * y;
    let rho = (r * r - 2.0 * r * s + q).sqrt();
    (q - 2.0 * r * s) / (rho + r)
}

/// Quadratic Fresnel term `[x² + y² - (xu + yv)²] / (2r)` for inverse distance `inv_r`.
#[inline]
pub fn fresnel_quadratic(x: f64, y: f64, u: f64, v: f64, inv_r: f64) -> f64 {
    let s = x * u + y * v;
    (x * x + y * y - s * s) * inv_r / 2.0
}

/// Fresnel response at a single antenna: `exp(jk·lin) · exp(-jk·Q)`.
///
/// The two factors are evaluated separately so that `Q(m,n)` and `Q(-m,-n)`
/// produce bitwise identical factors.
#[inline]
pub fn fresnel_entry(k: f64, x: f64, y: f64, u: f64, v: f64, inv_r: f64) -> C64 {
    let lin = x * u + y * v;
    cis(k * lin) * cis(-k * fresnel_quadratic(x, y, u, v, inv_r))
}

/// Exact spherical response for direction `(u, v)` and distance `r`.
pub fn exact_response(geom: &ArrayGeometry, u: f64, v: f64, r: f64) -> Vec<C64> {
    let k = geom.wavenumber();
    geom.centered_indices()
        .into_iter()
        .map(|idx| {
            let [x, y, _] = geom.position(idx);
            cis(-k * path_difference(x, y, u, v, r))
        })
        .collect()
}

/// Fresnel response for direction `(u, v)` and inverse distance `inv_r`.
pub fn fresnel_response(geom: &ArrayGeometry, u: f64, v: f64, inv_r: f64) -> Vec<C64> {
    let k = geom.wavenumber();
    geom.centered_indices()
        .into_iter()
        .map(|idx| {
            let [x, y, _] = geom.position(idx);
            fresnel_entry(k, x, y, u, v, inv_r)
        })
        .collect()
}

/// Far-field (planar) response `exp(jkd(mu + nv))`.
pub fn planar_response(geom: &ArrayGeometry, u: f64, v: f64) -> Vec<C64> {
    fresnel_response(geom, u, v, 0.0)
}

pub fn steering_exact(geom: &ArrayGeometry, s: &Scatterer) -> Result<Vec<C64>> {
    check_distance(s.r)?;
    Ok(exact_response(geom, s.u, s.v, s.r))
}

pub fn steering_fresnel(geom: &ArrayGeometry, s: &Scatterer) -> Result<Vec<C64>> {
    check_distance(s.r)?;
    Ok(fresnel_response(geom, s.u, s.v, 1.0 / s.r))
}

pub fn steering(geom: &ArrayGeometry, s: &Scatterer, model: WaveModel) -> Result<Vec<C64>> {
    match model {
        WaveModel::Exact => steering_exact(geom, s),
        WaveModel::Fresnel => steering_fresnel(geom, s),
    }
}

fn check_distance(r: f64) -> Result<()> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("distance must be > 0, got {r}")))
    }
}

/// von Mises–Fisher distribution on the unit sphere in three dimensions.
#[derive(Debug, Clone, Copy)]
pub struct VonMisesFisher {
    mean: [f64; 3],
    kappa: f64,
    e1: [f64; 3],
    e2: [f64; 3],
}

impl VonMisesFisher {
    pub fn new(mean: [f64; 3], kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("concentration must be > 0, got {kappa}")));
        }
        let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
        if !((norm - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidParameter(format!("mean direction must be unit, |μ| = {norm}")));
        }
        let (e1, e2) = tangent_basis(mean);
        Ok(Self { mean, kappa, e1, e2 })
    }
}

fn tangent_basis(mu: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Pick the coordinate axis least aligned with mu.
    let helper = if mu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = helper[0] * mu[0] + helper[1] * mu[1] + helper[2] * mu[2];
    let mut e1 = [helper[0] - dot * mu[0], helper[1] - dot * mu[1], helper[2] - dot * mu[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|x| *x /= n);
    let e2 = [
        mu[1] * e1[2] - mu[2] * e1[1],
        mu[2] * e1[0] - mu[0] * e1[2],
        mu[0] * e1[1] - mu[1] * e1[0],
    ];
    (e1, e2)
}

impl Distribution<[f64; 3]> for VonMisesFisher {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        // Inverse CDF of the cosine to the mean direction (exact on S²).
        let xi: f64 = rng.random();
        let w = (1.0 + (xi + (1.0 - xi) * (-2.0 * self.kappa).exp()).ln() / self.kappa).clamp(-1.0, 1.0);
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let s = (1.0 - w * w).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        std::array::from_fn(|i| w * self.mean[i] + s * (cp * self.e1[i] + sp * self.e2[i]))
    }
}

/// One scatterer cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// Unit vector in the array frame (`z` is broadside).
    pub center_direction: [f64; 3],
    pub concentration: f64,
    pub scatterers_per_cluster: usize,
    /// The cluster distance is drawn uniformly from `[r_min, r_max]`.
    pub r_min: f64,
    pub r_max: f64,
    /// Per-member relative distance jitter; members share the cluster distance when 0.
    #[serde(default)]
    pub distance_jitter: f64,
}

impl ClusterSpec {
    pub fn at_distance(center_direction: [f64; 3], concentration: f64, count: usize, r: f64) -> Self {
        Self {
            center_direction,
            concentration,
            scatterers_per_cluster: count,
            r_min: r,
            r_max: r,
            distance_jitter: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.concentration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "concentration must be > 0, got {}",
                self.concentration
            )));
        }
        if self.scatterers_per_cluster == 0 {
            return Err(Error::InvalidParameter("clusters need at least one scatterer".into()));
        }
        if !(self.r_min > 0.0 && self.r_max >= self.r_min) {
            return Err(Error::InvalidParameter(format!(
                "invalid distance interval [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Unit direction for directional cosines `(u, v)` in front of the array.
pub fn direction_from_cosines(u: f64, v: f64) -> [f64; 3] {
    [u, v, (1.0 - u * u - v * v).max(0.0).sqrt()]
}

/// Draws scatterers for every cluster; total power is normalized to 1.
///
/// Directions behind the array (`w <= 0`) are redrawn. Raw powers are uniform
/// in `[0.5, 1]` before normalization.
pub fn sample_clusters(specs: &[ClusterSpec], rng_seed: u64) -> Result<Vec<Scatterer>> {
    if specs.is_empty() {
        return Err(Error::Empty("cluster specification list"));
    }
    for spec in specs {
        spec.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::new();
    for spec in specs {
        let vmf = VonMisesFisher::new(spec.center_direction, spec.concentration)?;
        let r_cluster = if spec.r_max > spec.r_min {
            rng.random_range(spec.r_min..=spec.r_max)
        } else {
            spec.r_min
        };
        for _ in 0..spec.scatterers_per_cluster {
            let dir = loop {
                let d = vmf.sample(&mut rng);
                if d[2] > 0.0 {
                    break d;
                }
            };
            let jitter = if spec.distance_jitter > 0.0 {
                1.0 + spec.distance_jitter * (2.0 * rng.random::<f64>() - 1.0)
            } else {
                1.0
            };
            let power = rng.random_range(0.5..=1.0);
            out.push(Scatterer { u: dir[0], v: dir[1], r: r_cluster * jitter, power });
        }
    }
    let total: f64 = out.iter().map(|s| s.power).sum();
    out.iter_mut().for_each(|s| s.power /= total);
    Ok(out)
}

/// Noisy multi-snapshot observation of the array.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    /// `N x T`; column `t` is snapshot `t` in flat antenna order.
    pub snapshots: DMatrix<C64>,
    /// Per-entry complex noise power.
    pub noise_variance: f64,
    pub snr_db: f64,
    pub model: WaveModel,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.ncols() == 0
    }

    pub fn antennas(&self) -> usize {
        self.snapshots.nrows()
    }
}

/// Output of [`synthesize_snapshots`]: the observation plus its ground truth.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub observation: SnapshotSet,
    /// Noise-free channel, same shape as the observation.
    pub clean: DMatrix<C64>,
    /// Path gains, `L x T`.
    pub gains: DMatrix<C64>,
}

/// Noise variance giving `snr_db` for unit-modulus steering and total path power `power`.
pub fn noise_variance_for(total_power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        total_power / 10f64.powf(snr_db / 10.0)
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Draws `t` snapshots with i.i.d. `CN(0, P_l)` gains and white noise.
pub fn synthesize_snapshots(
    geom: &ArrayGeometry,
    scatterers: &[Scatterer],
    t: usize,
    snr_db: f64,
    model: WaveModel,
    rng_seed: u64,
) -> Result<Synthesis> {
    if scatterers.is_empty() {
        return Err(Error::Empty("scatterer list"));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("snapshot count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let gains = DMatrix::from_fn(scatterers.len(), t, |l, _| {
        complex_gaussian(&mut rng, scatterers[l].power)
    });
    synthesize_inner(geom, scatterers, gains, snr_db, model, &mut rng)
}

/// Like [`synthesize_snapshots`] but with caller-supplied gains (`L x T`).
pub fn synthesize_with_gains(
    geom: &ArrayGeometry,
    scatterers: &[Scatterer],
    gains: DMatrix<C64>,
    snr_db: f64,
    model: WaveModel,
    rng_seed: u64,
) -> Result<Synthesis> {
    if scatterers.is_empty() {
        return Err(Error::Empty("scatterer list"));
    }
    if gains.nrows() != scatterers.len() {
        return Err(Error::DimensionMismatch { expected: scatterers.len(), actual: gains.nrows() });
    }
    if gains.ncols() == 0 {
        return Err(Error::InvalidParameter("snapshot count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    synthesize_inner(geom, scatterers, gains, snr_db, model, &mut rng)
}

fn synthesize_inner(
    geom: &ArrayGeometry,
    scatterers: &[Scatterer],
    gains: DMatrix<C64>,
    snr_db: f64,
    model: WaveModel,
    rng: &mut ChaCha8Rng,
) -> Result<Synthesis> {
    let n = geom.len();
    let mut steer = DMatrix::zeros(n, scatterers.len());
    for (l, s) in scatterers.iter().enumerate() {
        let a = steering(geom, s, model)?;
        steer.set_column(l, &nalgebra::DVector::from_vec(a));
    }
    let clean = &steer * &gains;
    let total_power: f64 = scatterers.iter().map(|s| s.power).sum();
    let noise_variance = noise_variance_for(total_power, snr_db);
    let mut snapshots = clean.clone();
    if noise_variance > 0.0 {
        for x in snapshots.iter_mut() {
            *x += complex_gaussian(rng, noise_variance);
        }
    }
    Ok(Synthesis {
        observation: SnapshotSet { snapshots, noise_variance, snr_db, model },
        clean,
        gains,
    })
}

/// Plain-text scatterer table, one `u v r power` row per scatterer.
pub fn format_scatterers(scatterers: &[Scatterer]) -> String {
    let mut out = String::from("# u v r power\n");
    for s in scatterers {
        let _ = writeln!(out, "{} {} {} {}", s.u, s.v, s.r, s.power);
    }
    out
}

pub fn parse_scatterers(text: &str) -> Result<Vec<Scatterer>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 columns", lineno + 1)));
        }
        out.push(Scatterer::new(fields[0], fields[1], fields[2], fields[3])?);
    }
    Ok(out)
}

pub fn write_scatterers(path: &Path, scatterers: &[Scatterer]) -> Result<()> {
    fs::write(path, format_scatterers(scatterers))?;
    Ok(())
}

pub fn read_scatterers(path: &Path) -> Result<Vec<Scatterer>> {
    parse_scatterers(&fs::read_to_string(path)?)
}

/// Snapshot CSV: a `#` metadata line followed by `snapshot,antenna,re,im` rows.
pub fn format_snapshots(set: &SnapshotSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# antennas={} snapshots={} noise_variance={} snr_db={} model={}",
        set.antennas(),
        set.len(),
        set.noise_variance,
        set.snr_db,
        set.model
    );
    out.push_str("snapshot,antenna,re,im\n");
    for t in 0..set.len() {
        for i in 0..set.antennas() {
            let x = set.snapshots[(i, t)];
            let _ = writeln!(out, "{t},{i},{},{}", x.re, x.im);
        }
    }
    out
}

pub fn parse_snapshots(text: &str) -> Result<SnapshotSet> {
    let mut lines = text.lines();
    let meta = lines.next().ok_or(Error::Empty("snapshot file"))?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing snapshot metadata line".into()))?;
    let mut antennas = None;
    let mut count = None;
    let mut noise_variance = 0.0;
    let mut snr_db = f64::INFINITY;
    let mut model = WaveModel::Exact;
    for kv in meta.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad field `{kv}`")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Parse(format!("{k}: {e}")));
        match k {
            "antennas" => antennas = Some(num(v)? as usize),
            "snapshots" => count = Some(num(v)? as usize),
            "noise_variance" => noise_variance = num(v)?,
            "snr_db" => snr_db = num(v)?,
            "model" => model = v.parse()?,
            _ => {}
        }
    }
    let (n, t) = match (antennas, count) {
        (Some(n), Some(t)) if n > 0 && t > 0 => (n, t),
        _ => return Err(Error::Parse("metadata must give antennas and snapshots".into())),
    };
    let mut snapshots = DMatrix::zeros(n, t);
    let mut filled = 0usize;
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with("snapshot") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("bad snapshot row `{line}`")));
        }
        let parse_err = |e: std::num::ParseIntError| Error::Parse(e.to_string());
        let parse_ferr = |e: std::num::ParseFloatError| Error::Parse(e.to_string());
        let ti: usize = f[0].parse().map_err(parse_err)?;
        let ai: usize = f[1].parse().map_err(parse_err)?;
        if ti >= t || ai >= n {
            return Err(Error::Parse(format!("row `{line}` out of range")));
        }
        snapshots[(ai, ti)] =
            C64::new(f[2].parse().map_err(parse_ferr)?, f[3].parse().map_err(parse_ferr)?);
        filled += 1;
    }
    if filled != n * t {
        return Err(Error::DimensionMismatch { expected: n * t, actual: filled });
    }
    Ok(SnapshotSet { snapshots, noise_variance, snr_db, model })
}

pub fn write_snapshots(path: &Path, set: &SnapshotSet) -> Result<()> {
    fs::write(path, format_snapshots(set))?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotSet> {
    parse_snapshots(&fs::read_to_string(path)?)
}
