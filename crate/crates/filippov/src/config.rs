//! Analysis configuration: a TOML file with one canonical serialization.
//!
//! ```toml
//! [system]
//! catalog = "sphere-two-foldfold"     # or: f = "...", x = "(..)", y = "(..)"
//!
//! [domain]                            # optional for catalog systems
//! min = [-1.5, -1.5, -1.5]
//! max = [1.5, 1.5, 1.5]
//!
//! [tolerances]                        # any subset; the rest default
//! theta_min = 1e-4
//! ```
//!
//! [`AnalysisConfig::resolve`] turns a parsed file into the canonical form:
//! catalog names expanded, expressions reprinted by the canonical printer and
//! the domain made explicit. Two files resolve equal iff they describe the
//! same computation, which is what the digest hashes.

use std::path::{Path, PathBuf};

use filippov_core::fields::{lookup, PwsSystem, SystemError};
use filippov_core::{ConfigError, DomainBox, Effort, Point3, Resolution, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("unknown catalog system `{0}`")]
    UnknownCatalog(String),
    #[error("[system] needs either `catalog` or all of `f`, `x`, `y`")]
    IncompleteSystem,
    #[error("[system] mixes `catalog` with explicit expressions")]
    AmbiguousSystem,
    #[error("a non-catalog system needs a [domain]")]
    MissingDomain,
    #[error("system: {0}")]
    System(#[from] SystemError),
    #[error("{section}: {source}")]
    Invalid {
        section: &'static str,
        source: ConfigError,
    },
    #[error("bad override `{0}`: expected KEY=VALUE with a positive number")]
    Override(String),
    #[error("[integrate] horizon must be positive and starts finite")]
    Integrate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Report name; defaults to the catalog name or "system".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl DomainSpec {
    pub fn to_box(&self) -> Result<DomainBox, SystemError> {
        DomainBox::new(Point3::from(self.min), Point3::from(self.max))
    }
}

impl From<&DomainBox> for DomainSpec {
    fn from(b: &DomainBox) -> Self {
        DomainSpec {
            min: [b.min[0], b.min[1], b.min[2]],
            max: [b.max[0], b.max[1], b.max[2]],
        }
    }
}

/// Optional trajectories for the flow stage and the `integrate` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateSpec {
    pub starts: Vec<[f64; 3]>,
    pub horizon: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl OutputSpec {
    fn is_default(&self) -> bool {
        self.dir.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub effort: Effort,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateSpec>,
    #[serde(default, skip_serializing_if = "OutputSpec::is_default")]
    pub output: OutputSpec,
}

impl AnalysisConfig {
    /// Config for a catalog entry with every default.
    pub fn catalog(name: &str) -> Self {
        AnalysisConfig {
            system: SystemSpec {
                catalog: Some(name.to_string()),
                ..SystemSpec::default()
            },
            domain: None,
            tolerances: Tolerances::default(),
            resolution: Resolution::default(),
            effort: Effort::default(),
            integrate: None,
            output: OutputSpec::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies a `--tolerance KEY=VALUE` override.
    pub fn set_tolerance(&mut self, assignment: &str) -> Result<(), ConfigFileError> {
        let bad = || ConfigFileError::Override(assignment.to_string());
        let (key, value) = assignment.split_once('=').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        self.tolerances.set(key.trim(), value).map_err(|_| bad())
    }

    /// Canonical form: catalog expanded, expressions reprinted, domain explicit.
    /// Validates everything the pipeline relies on.
    pub fn resolve(&self) -> Result<AnalysisConfig, ConfigFileError> {
        let s = &self.system;
        let explicit = [&s.f, &s.x, &s.y];
        let (name, f, x, y, default_box) = match &s.catalog {
            Some(c) => {
                if explicit.iter().any(|e| e.is_some()) {
                    return Err(ConfigFileError::AmbiguousSystem);
                }
                let e = lookup(c).ok_or_else(|| ConfigFileError::UnknownCatalog(c.clone()))?;
                (c.clone(), e.f.to_string(), e.x.to_string(), e.y.to_string(), Some(e.domain))
            }
            None => match (&s.f, &s.x, &s.y) {
                (Some(f), Some(x), Some(y)) => ("system".to_string(), f.clone(), x.clone(), y.clone(), None),
                _ => return Err(ConfigFileError::IncompleteSystem),
            },
        };
        let domain = match (&self.domain, default_box) {
            (Some(d), _) => d.to_box()?,
            (None, Some(b)) => b,
            (None, None) => return Err(ConfigFileError::MissingDomain),
        };
        let name = s.name.clone().unwrap_or(name);

        let invalid = |section| move |source| ConfigFileError::Invalid { section, source };
        self.tolerances.validate().map_err(invalid("tolerances"))?;
        self.resolution.validate().map_err(invalid("resolution"))?;
        self.effort.validate().map_err(invalid("effort"))?;
        if let Some(i) = &self.integrate {
            let finite = i.starts.iter().flatten().all(|v| v.is_finite());
            if !(i.horizon.is_finite() && i.horizon > 0.0 && finite) {
                return Err(ConfigFileError::Integrate);
            }
        }

        let sys = PwsSystem::parse(&name, &f, &x, &y, domain)?;
        Ok(AnalysisConfig {
            system: SystemSpec {
                name: Some(name),
                catalog: None,
                f: Some(sys.f_expr().to_string()),
                x: Some(sys.field_expr(filippov_core::Side::X).to_string()),
                y: Some(sys.field_expr(filippov_core::Side::Y).to_string()),
            },
            domain: Some(DomainSpec::from(&domain)),
            ..self.clone()
        })
    }

    /// The system described by a resolved config.
    pub fn system(&self) -> Result<PwsSystem, ConfigFileError> {
        let r = self.resolve()?;
        let s = &r.system;
        let domain = r.domain.expect("resolved configs carry a domain").to_box()?;
        let field = |e: &Option<String>| e.clone().expect("resolved configs carry expressions");
        Ok(PwsSystem::parse(
            s.name.as_deref().unwrap_or("system"),
            &field(&s.f),
            &field(&s.x),
            &field(&s.y),
            domain,
        )?
        .with_tolerances(r.tolerances))
    }

    /// The canonical TOML text of the resolved config.
    pub fn canonical(&self) -> Result<String, ConfigFileError> {
        let r = self.resolve()?;
        Ok(toml::to_string(&r).expect("configs serialize to TOML"))
    }

    /// SHA-256 of the canonical text with the output location removed: it
    /// identifies the computation, not where its files go.
    pub fn digest(&self) -> Result<String, ConfigFileError> {
        let mut r = self.resolve()?;
        r.output = OutputSpec::default();
        let text = toml::to_string(&r).expect("configs serialize to TOML");
        let hash = Sha256::digest(text.as_bytes());
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }
}
