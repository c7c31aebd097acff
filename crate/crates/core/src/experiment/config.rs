//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::predicted::{predicted_rate, RateKind};
use crate::error::{Error, Result};
use crate::jet::{Functional, Integrator, Preset};
use crate::mesh::{fixtures, io, Geometry};
use crate::spectral::SpectralMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    AlphaGrowth,
    AlphaSqGrowth,
    KframeGrowth,
    TraceGrowth,
    CurveLength,
    #[serde(rename = "curve-length-3d")]
    CurveLength3d,
    SurfaceArea,
    MeanCurvatureIntegral,
    EulerInvariance,
    TubeCheck,
    NoiseAudit,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::AlphaGrowth => "alpha-growth",
            Experiment::AlphaSqGrowth => "alpha-sq-growth",
            Experiment::KframeGrowth => "kframe-growth",
            Experiment::TraceGrowth => "trace-growth",
            Experiment::CurveLength => "curve-length",
            Experiment::CurveLength3d => "curve-length-3d",
            Experiment::SurfaceArea => "surface-area",
            Experiment::MeanCurvatureIntegral => "mean-curvature-integral",
            Experiment::EulerInvariance => "euler-invariance",
            Experiment::TubeCheck => "tube-check",
            Experiment::NoiseAudit => "noise-audit",
        }
    }

    pub fn is_track_a(&self) -> bool {
        matches!(
            self,
            Experiment::AlphaGrowth | Experiment::AlphaSqGrowth | Experiment::KframeGrowth | Experiment::TraceGrowth
        )
    }

    pub fn is_surface(&self) -> bool {
        matches!(self, Experiment::SurfaceArea | Experiment::MeanCurvatureIntegral | Experiment::EulerInvariance)
    }

    pub fn is_dynamic(&self) -> bool {
        !matches!(self, Experiment::TubeCheck | Experiment::NoiseAudit)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpectralSpec {
    Point {
        rho: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    Mixture {
        weights: Vec<f64>,
        rho: Vec<f64>,
    },
    Density {
        rho_max: f64,
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for SpectralSpec {
    fn default() -> Self {
        SpectralSpec::Point { rho: 1.0, mass: 1.0 }
    }
}

impl SpectralSpec {
    pub fn measure(&self) -> Result<SpectralMeasure> {
        let m = match self {
            SpectralSpec::Point { rho, mass } => SpectralMeasure::PointMass { rho: *rho, mass: *mass },
            SpectralSpec::Mixture { weights, rho } => {
                if weights.len() != rho.len() {
                    return Err(Error::Validation("spectral weights and rho differ in length".into()));
                }
                SpectralMeasure::FiniteMixture(weights.iter().cloned().zip(rho.iter().cloned()).collect())
            }
            SpectralSpec::Density { rho_max, values } => {
                SpectralMeasure::TruncatedDensity { rho_max: *rho_max, values: values.clone() }
            }
        };
        m.validate().map_err(as_validation)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub features: usize,
    pub seed_offset: u64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec { features: 256, seed_offset: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    Icosphere {
        level: u32,
        #[serde(default = "one")]
        radius: f64,
    },
    Polygon {
        vertices: usize,
        #[serde(default = "one")]
        radius: f64,
        dim: usize,
    },
    Torus {
        major: f64,
        minor: f64,
        nu: usize,
        nv: usize,
    },
    /// OFF mesh or polyline CSV; relative paths resolve against the config file.
    File { path: PathBuf },
}

impl MeshSpec {
    pub fn build(&self, base: Option<&Path>) -> Result<Geometry> {
        Ok(match self {
            MeshSpec::Icosphere { level, radius } => {
                if *level > 8 || !(*radius > 0.0) {
                    return Err(Error::Validation("icosphere needs level <= 8 and radius > 0".into()));
                }
                Geometry::Mesh(fixtures::icosphere(*level, *radius))
            }
            MeshSpec::Polygon { vertices, radius, dim } => {
                Geometry::Curve(fixtures::regular_polygon(*vertices, *radius, *dim).map_err(as_validation)?)
            }
            MeshSpec::Torus { major, minor, nu, nv } => {
                if !(*minor > 0.0 && major > minor) || *nu < 3 || *nv < 3 {
                    return Err(Error::Validation("torus needs major > minor > 0 and at least 3 segments".into()));
                }
                Geometry::Mesh(fixtures::torus(*major, *minor, *nu, *nv))
            }
            MeshSpec::File { path } => {
                let p = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                io::load_geometry(p)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PresetSpec {
    Sphere,
    Ellipsoid { axes: Vec<f64> },
    Curvatures { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorSpec {
    #[default]
    Heun,
    ItoEuler,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeSpec {
    /// Radius of the direct volume estimate.
    pub rho: f64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Radii of the coefficient fit; empty skips the fit.
    #[serde(default)]
    pub rhos: Vec<f64>,
    #[serde(default = "default_cell")]
    pub cell: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Reference volume; defaults to the tube formula with the discrete curvatures.
    pub expected_volume: Option<f64>,
    /// Reference curvatures `L_0..`; default from the discrete curvatures.
    pub expected_l: Option<Vec<f64>>,
}

fn default_samples() -> u64 {
    1_000_000
}
fn default_cell() -> f64 {
    0.02
}
fn default_replicates() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    pub dims: Vec<usize>,
    pub trace_samples: usize,
    pub oracle_samples: usize,
    pub contraction_samples: usize,
    pub independence_samples: usize,
    pub isotropy_rotations: usize,
    pub quadrature_nodes: usize,
}

impl Default for AuditSpec {
    fn default() -> Self {
        let p = crate::audit::AuditParams::new(SpectralMeasure::point(1.0), 0);
        AuditSpec {
            dims: p.dims,
            trace_samples: p.trace_samples,
            oracle_samples: p.oracle_samples,
            contraction_samples: p.contraction_samples,
            independence_samples: p.independence_samples,
            isotropy_rotations: p.isotropy_rotations,
            quadrature_nodes: p.quadrature_nodes,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: Option<usize>,
    pub k: Option<usize>,
    #[serde(default)]
    pub spectral: SpectralSpec,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub replicas: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_observations")]
    pub observations: usize,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub allow_long_horizon: bool,
    #[serde(default)]
    pub field: FieldSpec,
    pub mesh: Option<MeshSpec>,
    pub preset: Option<PresetSpec>,
    pub tube: Option<TubeSpec>,
    pub audit: Option<AuditSpec>,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub source_sha256: String,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_observations() -> usize {
    20
}

fn as_validation(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Validation(m),
        e => e,
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

impl ExperimentConfig {
    /// Parse and validate. The hash covers the exact source bytes.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.source_sha256 = hex::encode(Sha256::digest(text.as_bytes()));
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut c = Self::parse(&text)?;
        c.base_dir = path.parent().map(Path::to_path_buf);
        if let Some(MeshSpec::File { .. }) = c.mesh {
            c.geometry()?;
        }
        Ok(c)
    }

    /// Ambient dimension implied by the experiment, preset or `n`.
    pub fn dimension(&self) -> Result<usize> {
        let e = self.experiment;
        let implied = match e {
            Experiment::CurveLength => Some(2),
            Experiment::CurveLength3d => Some(3),
            _ if e.is_surface() => Some(3),
            _ if e.is_track_a() => match &self.preset {
                Some(PresetSpec::Ellipsoid { axes }) => Some(axes.len()),
                Some(PresetSpec::Curvatures { values }) => Some(values.len() + 1),
                _ => None,
            },
            _ => None,
        };
        match (implied, self.n) {
            (Some(a), Some(b)) if a != b => fail(format!("n = {b} conflicts with the implied dimension {a}")),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) if e == Experiment::TubeCheck => Ok(3),
            (None, None) => fail(format!("`n` is required for {}", e.name())),
        }
    }

    /// Degree `k` where it applies.
    pub fn degree(&self) -> Result<Option<usize>> {
        let implied = match self.experiment {
            Experiment::CurveLength | Experiment::SurfaceArea => Some(0),
            Experiment::MeanCurvatureIntegral => Some(1),
            Experiment::KframeGrowth | Experiment::TraceGrowth => None,
            _ => return Ok(self.k),
        };
        match (implied, self.k) {
            (Some(a), Some(b)) if a != b => fail(format!("k = {b} conflicts with the implied degree {a}")),
            (Some(a), _) => Ok(Some(a)),
            (None, Some(b)) => Ok(Some(b)),
            (None, None) => fail(format!("`k` is required for {}", self.experiment.name())),
        }
    }

    /// Closed-form rate this experiment measures, if any.
    pub fn rate_kind(&self) -> Result<Option<RateKind>> {
        let n = self.dimension()?;
        let k = self.degree()?;
        Ok(match self.experiment {
            Experiment::AlphaGrowth => Some(RateKind::Alpha { n }),
            Experiment::AlphaSqGrowth => Some(RateKind::AlphaSq { n }),
            Experiment::KframeGrowth => Some(RateKind::KFrame { n, k: k.unwrap() }),
            Experiment::TraceGrowth => Some(RateKind::Lk { n, k: k.unwrap() }),
            Experiment::CurveLength | Experiment::SurfaceArea | Experiment::MeanCurvatureIntegral => {
                Some(RateKind::Lk { n, k: k.unwrap() })
            }
            Experiment::CurveLength3d => Some(RateKind::Codim { n, m: 1 }),
            _ => None,
        })
    }

    pub fn functional(&self) -> Result<Functional> {
        let k = self.degree()?;
        Ok(match self.experiment {
            Experiment::AlphaGrowth => Functional::AlphaNorm,
            Experiment::AlphaSqGrowth => Functional::AlphaNormSq,
            Experiment::KframeGrowth => Functional::KFrameInner(k.unwrap()),
            Experiment::TraceGrowth => Functional::TraceProduct(k.unwrap()),
            e => return fail(format!("{} is not a local-jet experiment", e.name())),
        })
    }

    pub fn preset_value(&self) -> Result<Preset> {
        Ok(match &self.preset {
            None | Some(PresetSpec::Sphere) => Preset::UnitSphere(self.dimension()?),
            Some(PresetSpec::Ellipsoid { axes }) => Preset::Ellipsoid(axes.clone()),
            Some(PresetSpec::Curvatures { values }) => Preset::CurvatureDiag(values.clone()),
        })
    }

    pub fn integrator_value(&self) -> Integrator {
        match self.integrator {
            IntegratorSpec::Heun => Integrator::Heun,
            IntegratorSpec::ItoEuler => Integrator::ItoEuler,
        }
    }

    /// The configured mesh or the experiment's default fixture.
    pub fn geometry(&self) -> Result<Geometry> {
        let spec = match (&self.mesh, self.experiment) {
            (Some(m), _) => m.clone(),
            (None, Experiment::CurveLength) => MeshSpec::Polygon { vertices: 1024, radius: 1.0, dim: 2 },
            (None, Experiment::CurveLength3d) => MeshSpec::Polygon { vertices: 256, radius: 1.0, dim: 3 },
            (None, Experiment::TubeCheck) => MeshSpec::Icosphere { level: 6, radius: 1.0 },
            (None, e) => MeshSpec::Icosphere { level: if e.is_surface() { 4 } else { 0 }, radius: 1.0 },
        };
        let g = spec.build(self.base_dir.as_deref()).map_err(as_validation)?;
        let ok = match (&g, self.experiment) {
            (Geometry::Curve(c), Experiment::CurveLength) => c.dim() == 2,
            (Geometry::Curve(c), Experiment::CurveLength3d) => c.dim() == 3,
            (Geometry::Mesh(_), e) => e.is_surface() || e == Experiment::TubeCheck,
            (Geometry::Curve(_), e) => e == Experiment::TubeCheck,
        };
        if !ok {
            return fail(format!("mesh does not suit {}", self.experiment.name()));
        }
        Ok(g)
    }

    fn required<T: Copy>(&self, v: Option<T>, key: &str) -> Result<T> {
        v.ok_or_else(|| Error::Validation(format!("`{key}` is required for {}", self.experiment.name())))
    }

    pub fn dt_value(&self) -> Result<f64> {
        self.required(self.dt, "dt")
    }
    pub fn horizon_value(&self) -> Result<f64> {
        self.required(self.horizon, "horizon")
    }
    pub fn replicas_value(&self) -> Result<usize> {
        self.required(self.replicas, "replicas")
    }

    pub fn validate(&self) -> Result<()> {
        let spectral = self.spectral.measure()?;
        let e = self.experiment;
        if e.is_dynamic() {
            let (dt, t, r) = (self.dt_value()?, self.horizon_value()?, self.replicas_value()?);
            if !(dt > 0.0 && t > 0.0 && dt.is_finite() && t.is_finite()) {
                return fail("dt and horizon must be positive");
            }
            if dt > t / 20.0 * (1.0 + 1e-12) {
                return fail(format!("dt = {dt} exceeds horizon/20 = {}", t / 20.0));
            }
            if r < 100 {
                return fail(format!("replicas = {r} is below 100"));
            }
            if self.observations < 5 {
                return fail("at least 5 observation times are required");
            }
            if let Some(kind) = self.rate_kind()? {
                let rate = predicted_rate(kind, spectral.mu2()).map_err(as_validation)?;
                if !self.allow_long_horizon && rate * t > 3.0 {
                    return fail(format!("predicted rate * horizon = {:.3} exceeds 3", rate * t));
                }
            }
            if e.is_track_a() {
                self.functional()?.validate(self.dimension()?).map_err(as_validation)?;
                crate::jet::JetState::init(&self.preset_value()?).map_err(as_validation)?;
            } else if self.field.features == 0 {
                return fail("field.features must be positive");
            }
        }
        match e {
            Experiment::TubeCheck => {
                let tube = self.tube.as_ref().ok_or_else(|| Error::Validation("tube-check needs a [tube] table".into()))?;
                if !(tube.rho > 0.0) || tube.samples == 0 {
                    return fail("tube.rho and tube.samples must be positive");
                }
                if !tube.rhos.is_empty() && (tube.rhos.len() < 3 || tube.rhos.iter().any(|r| !(*r > 0.0))) {
                    return fail("tube.rhos needs at least three positive radii");
                }
            }
            Experiment::NoiseAudit => {
                let a = self.audit.clone().unwrap_or_default();
                if a.dims.iter().any(|&n| n < 2) {
                    return fail("audit dimensions must be at least 2");
                }
            }
            _ if !e.is_track_a() => {
                if self.mesh.as_ref().is_some_and(|m| !matches!(m, MeshSpec::File { .. })) {
                    self.geometry()?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SURFACE: &str = r#"
experiment = "surface-area"
dt = 1e-3
horizon = 0.75
replicas = 200
seed = 1

[spectral]
kind = "point"
rho = 1.0

[field]
features = 256

[mesh]
kind = "icosphere"
level = 4
"#;

    #[test]
    fn parses_surface_config() {
        let c = ExperimentConfig::parse(SURFACE).unwrap();
        assert_eq!(c.experiment, Experiment::SurfaceArea);
        assert_eq!(c.dimension().unwrap(), 3);
        assert_eq!(c.degree().unwrap(), Some(0));
        assert_eq!(c.rate_kind().unwrap(), Some(RateKind::Lk { n: 3, k: 0 }));
        assert_eq!(c.source_sha256.len(), 64);
        assert!(matches!(c.geometry().unwrap(), Geometry::Mesh(_)));
    }

    #[test]
    fn hash_tracks_source_bytes() {
        let a = ExperimentConfig::parse(SURFACE).unwrap();
        let b = ExperimentConfig::parse(&format!("{SURFACE}\n")).unwrap();
        assert_ne!(a.source_sha256, b.source_sha256);
    }

    fn rejected(text: &str) -> Error {
        ExperimentConfig::parse(text).unwrap_err()
    }

    #[test]
    fn invariants_are_enforced() {
        let base = "experiment = \"alpha-growth\"\nn = 3\n";
        let e = rejected(&format!("{base}dt = 0.1\nhorizon = 1.0\nreplicas = 100\n"));
        assert!(e.to_string().contains("horizon/20"), "{e}");
        let e = rejected(&format!("{base}dt = 0.01\nhorizon = 1.0\nreplicas = 99\n"));
        assert!(e.to_string().contains("below 100"), "{e}");
        let e = rejected(&format!("{base}dt = 0.01\nhorizon = 12.0\nreplicas = 100\n"));
        assert!(e.to_string().contains("exceeds 3"), "{e}");
        ExperimentConfig::parse(&format!("{base}dt = 0.01\nhorizon = 12.0\nreplicas = 100\nallow_long_horizon = true\n"))
            .unwrap();
        for e in [
            rejected("experiment = \"alpha-growth\"\ndt = 0.01\nhorizon = 1.0\nreplicas = 100\n"),
            rejected(&format!("{base}dt = 0.01\nhorizon = 1.0\nreplicas = 100\nbogus = 1\n")),
            rejected("experiment = \"no-such\"\n"),
        ] {
            assert_eq!(e.exit_code(), 2, "{e}");
        }
    }

    #[test]
    fn degree_and_dimension_conflicts() {
        let t = "dt = 0.01\nhorizon = 1.0\nreplicas = 100\n";
        assert!(ExperimentConfig::parse(&format!("experiment = \"trace-growth\"\nn = 3\n{t}")).is_err());
        assert!(ExperimentConfig::parse(&format!("experiment = \"trace-growth\"\nn = 3\nk = 3\n{t}")).is_err());
        let c = ExperimentConfig::parse(&format!("experiment = \"trace-growth\"\nn = 3\nk = 2\n{t}")).unwrap();
        assert_eq!(c.functional().unwrap(), Functional::TraceProduct(2));
        assert!(ExperimentConfig::parse(&format!("experiment = \"curve-length\"\nn = 3\n{t}")).is_err());
        assert!(ExperimentConfig::parse(&format!("experiment = \"surface-area\"\nk = 1\n{t}")).is_err());
        let c = ExperimentConfig::parse(&format!(
            "experiment = \"alpha-growth\"\n{t}[preset]\nkind = \"ellipsoid\"\naxes = [1.0, 2.0, 3.0, 4.0]\n"
        ))
        .unwrap();
        assert_eq!(c.dimension().unwrap(), 4);
    }

    #[test]
    fn mesh_must_suit_experiment() {
        let t = "experiment = \"curve-length\"\ndt = 0.01\nhorizon = 1.0\nreplicas = 100\n";
        assert!(ExperimentConfig::parse(&format!("{t}[mesh]\nkind = \"icosphere\"\nlevel = 1\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{t}[mesh]\nkind = \"polygon\"\nvertices = 64\ndim = 3\n")).is_err());
        let c = ExperimentConfig::parse(t).unwrap();
        match c.geometry().unwrap() {
            Geometry::Curve(p) => assert_eq!(p.len(), 1024),
            _ => panic!("expected a curve"),
        }
    }

    #[test]
    fn spectral_variants() {
        let t = "experiment = \"noise-audit\"\n";
        let c = ExperimentConfig::parse(&format!("{t}[spectral]\nkind = \"mixture\"\nweights = [0.5, 0.5]\nrho = [1.0, 2.0]\n"))
            .unwrap();
        assert!((c.spectral.measure().unwrap().mu2() - 2.5).abs() < 1e-15);
        assert!(ExperimentConfig::parse(&format!("{t}[spectral]\nkind = \"mixture\"\nweights = [0.5]\nrho = [1.0, 2.0]\n"))
            .is_err());
        assert!(ExperimentConfig::parse(&format!("{t}[spectral]\nkind = \"point\"\nrho = -1.0\n")).is_err());
        let c = ExperimentConfig::parse(&format!("{t}[spectral]\nkind = \"density\"\nrho_max = 2.0\nvalues = [1.0, 1.0]\n"))
            .unwrap();
        assert!((c.spectral.measure().unwrap().mu2() - 8.0 / 3.0).abs() < 1e-12);
    }
}
