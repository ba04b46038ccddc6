//! Sweep configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::WaveModel;
use crate::geometry::ArrayGeometry;
use crate::recovery::{MethodConfig, MethodTag};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub n_h: usize,
    pub n_v: usize,
    pub wavelength: f64,
    /// Defaults to half a wavelength.
    #[serde(default)]
    pub spacing: Option<f64>,
}

impl GeometrySection {
    pub fn build(&self) -> Result<ArrayGeometry> {
        let d = self.spacing.unwrap_or(self.wavelength / 2.0);
        ArrayGeometry::with_spacing(self.n_h, self.n_v, d, self.wavelength)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub clusters: usize,
    pub scatterers_per_cluster: usize,
    /// vMF concentration `κ`.
    pub concentration: f64,
    /// Cluster distance in meters.
    pub distance: f64,
    /// Relative per-scatterer distance jitter.
    #[serde(default)]
    pub distance_jitter: f64,
    /// Cluster centers are uniform on the spherical cap of this half-angle
    /// around broadside.
    #[serde(default = "default_cap")]
    pub max_center_angle_deg: f64,
}

fn default_cap() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub snapshots: usize,
    /// Use `inf` for noiseless observations.
    pub snr_db: f64,
    #[serde(default = "default_model")]
    pub model: WaveModel,
}

fn default_model() -> WaveModel {
    WaveModel::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSection {
    pub methods: Vec<MethodTag>,
    #[serde(flatten)]
    pub settings: MethodConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    Concentration,
    Distance,
    Snr,
    Snapshots,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Concentration => "concentration",
            Self::Distance => "distance",
            Self::Snr => "snr_db",
            Self::Snapshots => "snapshots",
        }
    }
}

/// Unit of distance sweep values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    #[default]
    Meters,
    /// Multiples of the Fresnel distance.
    Fresnel,
    /// Multiples of the Rayleigh distance.
    Rayleigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub distance_unit: DistanceUnit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Aggregated results.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Directory receiving one SVG per metric.
    #[serde(default)]
    pub svg_dir: Option<PathBuf>,
    /// Per-trial records, including wall time (not deterministic).
    #[serde(default)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub master_seed: u64,
    pub geometry: GeometrySection,
    pub scene: SceneSection,
    pub channel: ChannelSection,
    pub estimation: EstimationSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative output paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.output.csv, &mut cfg.output.svg_dir, &mut cfg.output.records].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.geometry.build().map_err(|e| Error::Config(e.to_string()))?;
        if self.sweep.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        if self.sweep.trials == 0 {
            return bad("sweep needs at least one trial".into());
        }
        if self.estimation.methods.is_empty() {
            return bad("no estimation methods listed".into());
        }
        if self.scene.clusters == 0 || self.scene.scatterers_per_cluster == 0 {
            return bad("scene needs at least one cluster with one scatterer".into());
        }
        if !(self.scene.concentration > 0.0) || !(self.scene.distance > 0.0) {
            return bad("concentration and distance must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.scene.distance_jitter) {
            return bad("distance_jitter must lie in [0, 1)".into());
        }
        if !(self.scene.max_center_angle_deg > 0.0 && self.scene.max_center_angle_deg <= 90.0) {
            return bad("max_center_angle_deg must lie in (0, 90]".into());
        }
        if self.channel.snapshots == 0 {
            return bad("snapshots must be >= 1".into());
        }
        if self.channel.snr_db.is_nan() {
            return bad("snr_db must be a number".into());
        }
        for &v in &self.sweep.values {
            let ok = match self.sweep.variable {
                SweepVariable::Concentration | SweepVariable::Distance => v > 0.0,
                SweepVariable::Snr => !v.is_nan(),
                SweepVariable::Snapshots => v >= 1.0 && v.fract() == 0.0,
            };
            if !ok {
                return bad(format!("invalid {} value {v}", self.sweep.variable.as_str()));
            }
        }
        let geom = self.geometry.build()?;
        self.estimation.settings.resolve(&geom)?;
        Ok(())
    }

    /// Total number of scatterers per scene.
    pub fn paths(&self) -> usize {
        self.scene.clusters * self.scene.scatterers_per_cluster
    }

    /// Sweep variable label used in output files.
    pub fn sweep_label(&self) -> String {
        match (self.sweep.variable, self.sweep.distance_unit) {
            (SweepVariable::Distance, DistanceUnit::Fresnel) => "distance_fresnel".into(),
            (SweepVariable::Distance, DistanceUnit::Rayleigh) => "distance_rayleigh".into(),
            (v, _) => v.as_str().into(),
        }
    }
}
