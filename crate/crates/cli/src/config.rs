//! Run configuration: a sectioned `key = value` (TOML) file.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use gratres_core::analysis::ClassifyParams;
use gratres_core::geometry::{GratingGeometry, MetalKind, SlitShape};
use gratres_core::materials::{scale_drude, PermittivityModel, Scaling, DEFAULT_POLE_EXCLUSION};
use gratres_core::mesh::MeshParams;
use gratres_core::nep::{Region, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub period: f64,
    pub thickness: f64,
    /// Defaults to `thickness/2 + period/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_height: Option<f64>,
    pub slit: SlitShape,
    pub metal: MetalKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialModel {
    Pec,
    DrudeLossless,
    DrudeSommerfeld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub model: MaterialModel,
    /// Scaled plasma frequency; alternatively give `omega_p` in 1/s together with `[units]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Distance to material poles/zeros and Rayleigh anomalies kept free of quadrature nodes.
    #[serde(default = "default_exclusion")]
    pub exclusion: f64,
}

fn default_exclusion() -> f64 {
    DEFAULT_POLE_EXCLUSION
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self { model: MaterialModel::Pec, omega_p_hat: None, gamma_hat: None, omega_p: None, gamma: None, exclusion: default_exclusion() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    /// Length scaling factor; enables the THz column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    Scaling::SPEED_OF_LIGHT
}

impl Default for UnitsSection {
    fn default() -> Self {
        Self { alpha: None, c: default_c() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Mesh file in the ASCII mesh format; excludes the generator keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metal_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    /// Uniform refinements applied to the initial mesh.
    #[serde(default)]
    pub refinement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtnSection {
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    50
}

impl Default for DtnSection {
    fn default() -> Self {
        Self { order: default_order() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// `κ` in units of `π/d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_fraction: Option<f64>,
    /// Number of equispaced samples of `[0, π/d]` for sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Overrides the environment default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write one field file per accepted eigenvalue.
    #[serde(default)]
    pub fields: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    /// Refinement levels of the ladder.
    #[serde(default)]
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub units: UnitsSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub dtn: DtnSection,
    #[serde(default)]
    pub bloch: BlochSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub classify: ClassifyParams,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<Region>,
}

/// Where the mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Generate(MeshParams),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// All keys with defaults resolved.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn geometry(&self) -> GratingGeometry {
        let g = &self.geometry;
        let h = g.half_height.unwrap_or_else(|| GratingGeometry::default_half_height(g.period, g.thickness));
        GratingGeometry::new(g.period, g.thickness, h, g.slit, g.metal)
    }

    pub fn scaling(&self) -> Result<Option<Scaling>, ConfigError> {
        match self.units.alpha {
            None => Ok(None),
            Some(a) => Scaling::new(a, self.units.c).map(Some).map_err(|e| bad("units.alpha", e)),
        }
    }

    pub fn material(&self) -> Result<PermittivityModel, ConfigError> {
        let m = &self.material;
        let hat = match (m.omega_p_hat, m.omega_p) {
            (Some(_), Some(_)) => return Err(bad("material.omega_p", "give either omega_p_hat or omega_p, not both")),
            (Some(w), None) => Some((w, m.gamma_hat.unwrap_or(0.0))),
            (None, Some(w)) => {
                let s = self.scaling()?.ok_or_else(|| bad("units.alpha", "required to scale material.omega_p"))?;
                Some(scale_drude(w, m.gamma.unwrap_or(0.0), s).map_err(|e| bad("material.omega_p", e))?)
            }
            (None, None) => None,
        };
        let model = match (m.model, hat) {
            (MaterialModel::Pec, None) => PermittivityModel::Pec,
            (MaterialModel::Pec, Some(_)) => return Err(bad("material.model", "pec takes no plasma frequency")),
            (_, None) => return Err(bad("material.omega_p_hat", "required for Drude models")),
            (MaterialModel::DrudeLossless, Some((w, _))) => PermittivityModel::DrudeLossless { omega_p_hat: w },
            (MaterialModel::DrudeSommerfeld, Some((w, g))) => PermittivityModel::DrudeSommerfeld { omega_p_hat: w, gamma_hat: g },
        };
        model.validate().map_err(|e| bad("material", e))?;
        Ok(model)
    }

    pub fn mesh_source(&self) -> Result<MeshSource, ConfigError> {
        let m = &self.mesh;
        let generator_keys = m.target_h.is_some() || m.grading.is_some() || m.metal_h.is_some() || m.growth.is_some();
        match (&m.file, generator_keys) {
            (Some(_), true) => Err(bad("mesh.file", "give either a mesh file or generator parameters, not both")),
            (Some(f), false) => Ok(MeshSource::File(f.clone())),
            (None, false) => Err(bad("mesh.target_h", "required unless mesh.file is given")),
            (None, true) => {
                let h = m.target_h.ok_or_else(|| bad("mesh.target_h", "required with generator parameters"))?;
                let mut p = MeshParams::new(h, m.grading.unwrap_or(1.0));
                p.metal_h = m.metal_h;
                if let Some(g) = m.growth {
                    p.growth = g;
                }
                Ok(MeshSource::Generate(p))
            }
        }
    }

    /// The single Bloch wavenumber of a solve run.
    pub fn kappa(&self) -> Result<f64, ConfigError> {
        let d = self.geometry.period;
        let k = match (self.bloch.kappa, self.bloch.kappa_fraction) {
            (Some(_), Some(_)) => return Err(bad("bloch.kappa", "give either kappa or kappa_fraction, not both")),
            (Some(k), None) => k,
            (None, Some(f)) => f * PI / d,
            (None, None) => return Err(bad("bloch.kappa", "required (or bloch.kappa_fraction)")),
        };
        if !(k.abs() <= PI / d * (1.0 + 1e-12)) {
            return Err(bad("bloch.kappa", format!("{k} lies outside [-π/d, π/d]")));
        }
        Ok(k)
    }

    /// Sweep samples `κ_i = i/(n−1) · π/d`.
    pub fn sweep_kappas(&self) -> Result<Vec<f64>, ConfigError> {
        let n = self.bloch.kappa_count.ok_or_else(|| bad("bloch.kappa_count", "required for sweeps"))?;
        if n < 2 {
            return Err(bad("bloch.kappa_count", format!("must be at least 2, got {n}")));
        }
        let top = PI / self.geometry.period;
        Ok((0..n).map(|i| if i + 1 == n { top } else { top * i as f64 / (n - 1) as f64 }).collect())
    }

    pub fn converge_levels(&self) -> Result<Vec<usize>, ConfigError> {
        let l = &self.converge.levels;
        if l.len() < 4 {
            return Err(bad("converge.levels", format!("a ladder needs at least 4 levels, got {}", l.len())));
        }
        if l.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("converge.levels", "levels must increase"));
        }
        Ok(l.clone())
    }

    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry().validate().map_err(|e| bad("geometry", e))?;
        let material = self.material()?;
        match (self.geometry.metal, material.is_pec()) {
            (MetalKind::Pec, false) => return Err(bad("material.model", "geometry.metal = \"pec\" requires model = \"pec\"")),
            (MetalKind::Dispersive, true) => {
                return Err(bad("material.model", "geometry.metal = \"dispersive\" requires a Drude model"))
            }
            _ => {}
        }
        if !(self.material.exclusion > 0.0) {
            return Err(bad("material.exclusion", "must be positive"));
        }
        self.scaling()?;
        self.mesh_source()?;
        self.solver.validate().map_err(|e| bad("solver", e))?;
        let c = &self.classify;
        if !(c.shell_fraction > 0.0 && c.surface_threshold > 0.0 && c.slit_threshold > 0.0) {
            return Err(bad("classify", "fractions and thresholds must be positive"));
        }
        for (i, r) in self.regions.iter().enumerate() {
            r.validate().map_err(|e| bad(&format!("regions[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn require_regions(&self) -> Result<(), ConfigError> {
        if self.regions.is_empty() {
            return Err(bad("regions", "at least one search region is required"));
        }
        Ok(())
    }
}

/// Bundled configurations reproducing the worked examples.
pub const PRESETS: &[(&str, &str)] = &[
    ("pec-delta005", include_str!("../presets/pec-delta005.toml")),
    ("sheetmetal", include_str!("../presets/sheetmetal.toml")),
    ("gold", include_str!("../presets/gold.toml")),
    ("trapezoid", include_str!("../presets/trapezoid.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            ConfigError(format!("unknown preset {name:?}; available: {}", names.join(", ")))
        })?;
    RunConfig::from_toml(text)
}
