//! Benchmark suite configuration.
//!
//! ```toml
//! format = 1
//! repeats = 10
//! cutoff_s = 2.5
//!
//! [params]                 # overrides for every problem
//! budget_s = 60.0
//!
//! [[problem]]
//! builtin = "panda-circle"
//!
//! [[problem]]
//! name = "wide-circle"
//! chain = "panda"          # builtin chain name, or a chain file
//! obstacles = "walls.toml" # optional
//! path_spec = { kind = "circle", radius = 0.2, center = [0.5, 0.0, 0.4], rpy = [3.14159, 0.0, 0.0], plane = "xy" }
//! params = { k = 100 }     # optional, applied after the suite-wide overrides
//! ```
//!
//! `path = "file.csv"` may replace `path_spec`. Relative file names are
//! resolved against the directory of the suite file.

use std::path::{Path, PathBuf};

use carta_core::paths::{generate_path, OrientationProfile, PathShape, PathSpec};
use carta_core::{PlannerParams, Problem};
use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::builtin::{builtin_chain, builtin_problem, DEFAULT_WAYPOINTS};
use crate::FileError;

pub const SUITE_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Circle,
    Square,
    SCurve,
    Glyph,
    Rotation,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlaneName {
    Xy,
    #[default]
    Yz,
    Xz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    #[default]
    Fixed,
    Tangent,
}

fn default_n() -> usize {
    DEFAULT_WAYPOINTS
}

/// Serializable form of [`PathSpec`]; only the fields of the chosen kind are
/// read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpecEntry {
    pub kind: PathKind,
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub plane: PlaneName,
    #[serde(default)]
    pub profile: ProfileName,
    pub radius: Option<f64>,
    pub side: Option<f64>,
    pub corner_radius: Option<f64>,
    pub height: Option<f64>,
    pub loops: Option<usize>,
    pub axis: Option<[f64; 3]>,
    /// Radians.
    pub angle: Option<f64>,
    pub offset: Option<[f64; 3]>,
}

impl PathSpecEntry {
    pub fn new(kind: PathKind) -> Self {
        Self {
            kind,
            center: [0.0; 3],
            rpy: [0.0; 3],
            n: DEFAULT_WAYPOINTS,
            plane: PlaneName::default(),
            profile: ProfileName::default(),
            radius: None,
            side: None,
            corner_radius: None,
            height: None,
            loops: None,
            axis: None,
            angle: None,
            offset: None,
        }
    }

    pub fn to_spec(&self) -> Result<PathSpec, FileError> {
        fn need<T>(v: Option<T>, kind: &str, field: &str) -> Result<T, FileError> {
            v.ok_or_else(|| FileError::Format(format!("{kind} path needs `{field}`")))
        }
        let shape = match self.kind {
            PathKind::Circle => PathShape::Circle {
                radius: need(self.radius, "circle", "radius")?,
            },
            PathKind::Square => PathShape::Square {
                side: need(self.side, "square", "side")?,
                corner_radius: self.corner_radius.unwrap_or(0.0),
            },
            PathKind::SCurve => PathShape::SCurve {
                radius: need(self.radius, "s-curve", "radius")?,
            },
            PathKind::Glyph => PathShape::Glyph {
                height: need(self.height, "glyph", "height")?,
                loops: self.loops.unwrap_or(2),
            },
            PathKind::Rotation => PathShape::Rotation {
                axis: Vector3::from(need(self.axis, "rotation", "axis")?),
                angle: need(self.angle, "rotation", "angle")?,
            },
            PathKind::Line => PathShape::Line {
                offset: Vector3::from(need(self.offset, "line", "offset")?),
            },
        };
        let (u, v) = match self.plane {
            PlaneName::Xy => (Vector3::x(), Vector3::y()),
            PlaneName::Yz => (Vector3::y(), Vector3::z()),
            PlaneName::Xz => (Vector3::x(), Vector3::z()),
        };
        let profile = match self.profile {
            ProfileName::Fixed => OrientationProfile::Fixed,
            ProfileName::Tangent => OrientationProfile::Tangent,
        };
        let orientation = UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]);
        Ok(PathSpec::new(shape, Vector3::from(self.center), orientation, self.n)
            .with_plane(u, v)
            .with_profile(profile))
    }
}

/// Planner settings a suite may override; unset fields keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub budget_s: Option<f64>,
    pub densification_increment: Option<usize>,
    pub max_densify_rounds: Option<usize>,
    /// Degrees.
    pub retry_mjac_deg: Option<f64>,
    /// Meters.
    pub retry_mjac_m: Option<f64>,
    pub max_cycles: Option<usize>,
}

impl ParamOverrides {
    pub fn apply(&self, p: &mut PlannerParams) {
        if let Some(k) = self.k {
            p.k = k;
            if self.densification_increment.is_none() {
                p.densification_increment = k / 2;
            }
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if let Some(v) = self.budget_s {
            p.budget_s = v;
        }
        if let Some(v) = self.densification_increment {
            p.densification_increment = v;
        }
        if let Some(v) = self.max_densify_rounds {
            p.max_densify_rounds = v;
        }
        if let Some(v) = self.retry_mjac_deg {
            p.retry_mjac_revolute = v.to_radians();
        }
        if let Some(v) = self.retry_mjac_m {
            p.retry_mjac_prismatic = v;
        }
        if let Some(v) = self.max_cycles {
            p.optimizer.max_cycles = v;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemEntry {
    pub builtin: Option<String>,
    pub name: Option<String>,
    pub chain: Option<String>,
    pub path: Option<String>,
    pub path_spec: Option<PathSpecEntry>,
    pub obstacles: Option<String>,
    #[serde(default)]
    pub params: ParamOverrides,
}

fn default_repeats() -> usize {
    10
}

fn default_cutoff() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub format: u32,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff_s: f64,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(rename = "problem", default)]
    pub problems: Vec<ProblemEntry>,
}

/// A loaded suite: problems with their fully resolved planner parameters.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub repeats: usize,
    pub cutoff_s: f64,
    pub problems: Vec<(Problem, PlannerParams)>,
}

impl SuiteConfig {
    /// The builtin problems with default parameters.
    pub fn builtin(repeats: usize) -> Self {
        Self {
            repeats,
            cutoff_s: default_cutoff(),
            problems: crate::builtin::builtin_problems()
                .into_iter()
                .map(|p| (p, PlannerParams::default()))
                .collect(),
        }
    }
}

/// Resolves a chain argument: a builtin name, or else a chain file.
pub fn resolve_chain(spec: &str, base: &Path) -> Result<carta_core::KinematicChain, FileError> {
    match builtin_chain(spec) {
        Some(c) => Ok(c),
        None => crate::chain_file::load_chain(&base.join(spec)),
    }
}

fn resolve_entry(entry: &ProblemEntry, base: &Path, index: usize) -> Result<Problem, FileError> {
    if let Some(name) = &entry.builtin {
        let custom = entry.chain.is_some() || entry.path.is_some() || entry.path_spec.is_some() || entry.obstacles.is_some();
        if custom {
            return Err(FileError::Format(format!("problem {index}: `builtin` excludes chain, path and obstacles")));
        }
        let mut p = builtin_problem(name).ok_or_else(|| FileError::Format(format!("unknown builtin problem `{name}`")))?;
        if let Some(n) = &entry.name {
            p.name = n.clone();
        }
        return Ok(p);
    }
    let chain_spec = entry
        .chain
        .as_deref()
        .ok_or_else(|| FileError::Format(format!("problem {index} needs `builtin` or `chain`")))?;
    let chain = resolve_chain(chain_spec, base)?;
    let path = match (&entry.path, &entry.path_spec) {
        (Some(file), None) => crate::path_file::load_path(&base.join(file))?,
        (None, Some(spec)) => generate_path(&spec.to_spec()?).map_err(|e| FileError::Format(e.to_string()))?,
        _ => return Err(FileError::Format(format!("problem {index} needs exactly one of `path` and `path_spec`"))),
    };
    let obstacles = match &entry.obstacles {
        Some(file) => crate::obstacle_file::load_obstacles(&base.join(file))?,
        None => Vec::new(),
    };
    Ok(Problem {
        name: entry.name.clone().unwrap_or_else(|| format!("problem-{index}")),
        chain,
        path,
        obstacles,
    })
}

pub fn parse_suite(text: &str, base: &Path) -> Result<SuiteConfig, FileError> {
    let file: SuiteFile = toml::from_str(text).map_err(|e| FileError::Format(e.to_string()))?;
    if file.format != SUITE_FORMAT {
        return Err(FileError::Version {
            expected: SUITE_FORMAT,
            got: file.format,
        });
    }
    if file.repeats == 0 {
        return Err(FileError::Format("repeats must be at least 1".into()));
    }
    let mut problems = Vec::with_capacity(file.problems.len());
    for (i, entry) in file.problems.iter().enumerate() {
        let problem = resolve_entry(entry, base, i)?;
        if problems.iter().any(|(p, _): &(Problem, PlannerParams)| p.name == problem.name) {
            return Err(FileError::Format(format!("duplicate problem name `{}`", problem.name)));
        }
        let mut params = PlannerParams::default();
        file.params.apply(&mut params);
        entry.params.apply(&mut params);
        problems.push((problem, params));
    }
    Ok(SuiteConfig {
        repeats: file.repeats,
        cutoff_s: file.cutoff_s,
        problems,
    })
}

pub fn load_suite(path: &Path) -> Result<SuiteConfig, FileError> {
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_suite(&crate::read_text(path)?, &base)
}
