//! TOML configuration files, flat `key=value` overrides and config echo.
//!
//! A file has up to five sections: `[domain]`, `[material]`, `[objective]`,
//! `[optimizer]` and `[campaign]`. Every key is optional; omitted keys take their
//! defaults. Unknown sections or keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::domain::{DomainSpec, EdgeSegment, Rect, INPUT_FACE_COUNT};
use crate::fem::MaterialParams;
use crate::optimizer::{Formulation, InitStyle, MmaSettings, ObjectiveSettings, RunConfig};
use crate::{Error, Result};

/// Environment variable consulted for the worker count when the file has none.
pub const PARALLELISM_ENV: &str = "FINGER_TOPO_PARALLELISM";

/// `(section, key, unit, description)` for every documented key.
pub const SCHEMA: &[(&str, &str, &str, &str)] = &[
    ("domain", "height", "mm", "finger height, grasping edge length (default 100)"),
    ("domain", "width_top", "mm", "width at the mounting end (default 40)"),
    ("domain", "width_bottom", "mm", "width at the tip, must be < width_top (default 15)"),
    ("domain", "element_size", "mm", "square element edge, must divide height (default 1)"),
    ("domain", "slot_regions", "mm", "two [x_min, x_max, y_min, y_max] mounting slots"),
    ("domain", "input_faces", "mm", "six [start, end] heights of F_in1 (tip) .. F_in6"),
    ("domain", "output_region", "mm", "[start, end] heights of the output selector"),
    ("domain", "actuation_face", "mm", "[start, end] x-range on the top edge driven by X_in"),
    ("material", "youngs_modulus", "MPa", "solid modulus E0 (default 23)"),
    ("material", "min_modulus", "MPa", "void modulus floor (default 2.3e-5)"),
    ("material", "poisson_ratio", "-", "Poisson ratio (default 0.3)"),
    ("material", "penalty", "-", "SIMP exponent p (default 3)"),
    ("material", "thickness", "mm", "out-of-plane thickness (default 5)"),
    ("objective", "formulation", "-", "\"passive\" or \"active\" (default passive)"),
    ("objective", "weight", "N/mm^2", "weight w on the output displacement (default 1e5)"),
    ("objective", "force_magnitude", "N", "contact force per input face (default 1)"),
    ("objective", "input_displacement", "mm", "X_in, active only"),
    ("optimizer", "volume_fraction", "-", "material budget V_f in [0.05, 1] (default 0.35)"),
    ("optimizer", "seed", "-", "initial-design seed (default 0)"),
    ("optimizer", "init_style", "-", "\"smoothed_noise\" or \"uniform\" (default smoothed_noise)"),
    ("optimizer", "max_iters", "-", "iteration cap (default 300)"),
    ("optimizer", "move_limit", "-", "max density change per iteration (default 0.2)"),
    ("optimizer", "convergence_tol", "-", "stop when max density change is below (default 0.01)"),
    ("optimizer", "filter_radius", "elements", "density filter radius (default 2)"),
    ("optimizer", "asymptote_init", "-", "initial asymptote distance / range (default 0.5)"),
    ("optimizer", "asymptote_grow", "-", "asymptote expansion factor (default 1.2)"),
    ("optimizer", "asymptote_shrink", "-", "asymptote contraction factor (default 0.7)"),
    ("campaign", "volume_fractions", "-", "passive sweep values"),
    ("campaign", "input_displacements", "mm", "active sweep values"),
    ("campaign", "seeds_per_point", "-", "runs per sweep value (default 10)"),
    ("campaign", "first_seed", "-", "seed of the first run at each point (default 0)"),
    ("campaign", "parallelism", "-", "worker threads (default: env FINGER_TOPO_PARALLELISM, else 1)"),
    ("campaign", "output_dir", "path", "campaign directory (default \"campaign\")"),
];

/// Help text listing every key with its unit.
pub fn schema_help() -> String {
    let mut out = String::from("Configuration keys (TOML sections; override with --override key=value):\n");
    let mut section = "";
    for &(s, key, unit, doc) in SCHEMA {
        if s != section {
            let _ = writeln!(out, "\n  [{s}]");
            section = s;
        }
        let _ = writeln!(out, "    {key:<20} [{unit}] {doc}");
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default, skip_serializing_if = "CampaignSection::is_empty")]
    pub campaign: CampaignSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_top: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_bottom: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot_regions: Option<Vec<[f64; 4]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_faces: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_region: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actuation_face: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_modulus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formulation: Option<Formulation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_magnitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_displacement: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_style: Option<InitStyle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub move_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptote_init: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptote_grow: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptote_shrink: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_fractions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_displacements: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds_per_point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl CampaignSection {
    fn is_empty(&self) -> bool {
        *self == CampaignSection::default()
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ConfigFile {
    /// Parse TOML text.
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        ConfigFile::from_table(table)
    }

    /// Read and parse a file. A missing or unreadable file is an I/O error, not a
    /// schema error.
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigFile::parse(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Read `path` (or start empty) and apply `key=value` overrides.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[String]) -> Result<ConfigFile> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<Table>()
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        ConfigFile::from_table(table)
    }

    /// Copy of `self` with one `key=value` override applied.
    pub fn with_override(&self, item: &str) -> Result<ConfigFile> {
        let mut table: Table = self.to_toml()?.parse().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        apply_override(&mut table, item)?;
        ConfigFile::from_table(table)
    }

    fn from_table(table: Table) -> Result<ConfigFile> {
        for (section, value) in &table {
            let known = SCHEMA.iter().any(|&(s, ..)| s == section);
            if !known {
                return Err(config_err(format!("unknown section [{section}]")));
            }
            if let Value::Table(keys) = value {
                for key in keys.keys() {
                    if !SCHEMA.iter().any(|&(s, k, ..)| s == section && k == key) {
                        return Err(config_err(format!("unknown key `{key}` in [{section}]")));
                    }
                }
            } else {
                return Err(config_err(format!("`{section}` must be a table")));
            }
        }
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.message().to_string()))
    }

    /// Resolve to a run configuration. Validation of the run itself is left to the caller
    /// so that campaign templates can omit per-run values.
    pub fn run_config(&self) -> Result<RunConfig> {
        let d = RunConfig::default();
        let dom = &self.domain;
        let mut domain = DomainSpec::proportional(
            dom.height.unwrap_or(d.domain.height),
            dom.width_top.unwrap_or(d.domain.width_top),
            dom.width_bottom.unwrap_or(d.domain.width_bottom),
            dom.element_size.unwrap_or(d.domain.element_size),
        );
        if let Some(slots) = &dom.slot_regions {
            let slots: [[f64; 4]; 2] = slots
                .as_slice()
                .try_into()
                .map_err(|_| config_err(format!("slot_regions needs 2 entries, got {}", slots.len())))?;
            domain.slot_regions = slots.map(|[x_min, x_max, y_min, y_max]| Rect { x_min, x_max, y_min, y_max });
        }
        if let Some(faces) = &dom.input_faces {
            let faces: [[f64; 2]; INPUT_FACE_COUNT] = faces.as_slice().try_into().map_err(|_| {
                config_err(format!("input_faces needs {INPUT_FACE_COUNT} entries, got {}", faces.len()))
            })?;
            domain.input_faces = faces.map(|[a, b]| EdgeSegment::new(a, b));
        }
        if let Some([a, b]) = dom.output_region {
            domain.output_region = EdgeSegment::new(a, b);
        }
        if let Some([a, b]) = dom.actuation_face {
            domain.actuation_face = EdgeSegment::new(a, b);
        }

        let m = &self.material;
        let material = MaterialParams {
            youngs_modulus: m.youngs_modulus.unwrap_or(d.material.youngs_modulus),
            min_modulus: m.min_modulus.unwrap_or(d.material.min_modulus),
            poisson_ratio: m.poisson_ratio.unwrap_or(d.material.poisson_ratio),
            penalty: m.penalty.unwrap_or(d.material.penalty),
            thickness: m.thickness.unwrap_or(d.material.thickness),
        };
        let o = &self.objective;
        let p = &self.optimizer;
        Ok(RunConfig {
            formulation: o.formulation.unwrap_or(d.formulation),
            volume_fraction: p.volume_fraction.unwrap_or(d.volume_fraction),
            input_displacement: o.input_displacement,
            seed: p.seed.unwrap_or(d.seed),
            init_style: p.init_style.unwrap_or(d.init_style),
            max_iters: p.max_iters.unwrap_or(d.max_iters),
            move_limit: p.move_limit.unwrap_or(d.move_limit),
            convergence_tol: p.convergence_tol.unwrap_or(d.convergence_tol),
            filter_radius: p.filter_radius.unwrap_or(d.filter_radius),
            mma: MmaSettings {
                asymptote_init: p.asymptote_init.unwrap_or(d.mma.asymptote_init),
                asymptote_grow: p.asymptote_grow.unwrap_or(d.mma.asymptote_grow),
                asymptote_shrink: p.asymptote_shrink.unwrap_or(d.mma.asymptote_shrink),
            },
            domain,
            material,
            objective: ObjectiveSettings {
                weight: o.weight.unwrap_or(d.objective.weight),
                force_magnitude: o.force_magnitude.unwrap_or(d.objective.force_magnitude),
            },
        })
    }

    /// Fully explicit file reproducing `config`.
    pub fn echo(config: &RunConfig) -> ConfigFile {
        let s = &config.domain;
        let m = &config.material;
        ConfigFile {
            domain: DomainSection {
                height: Some(s.height),
                width_top: Some(s.width_top),
                width_bottom: Some(s.width_bottom),
                element_size: Some(s.element_size),
                slot_regions: Some(s.slot_regions.iter().map(|r| [r.x_min, r.x_max, r.y_min, r.y_max]).collect()),
                input_faces: Some(s.input_faces.iter().map(|f| [f.start, f.end]).collect()),
                output_region: Some([s.output_region.start, s.output_region.end]),
                actuation_face: Some([s.actuation_face.start, s.actuation_face.end]),
            },
            material: MaterialSection {
                youngs_modulus: Some(m.youngs_modulus),
                min_modulus: Some(m.min_modulus),
                poisson_ratio: Some(m.poisson_ratio),
                penalty: Some(m.penalty),
                thickness: Some(m.thickness),
            },
            objective: ObjectiveSection {
                formulation: Some(config.formulation),
                weight: Some(config.objective.weight),
                force_magnitude: Some(config.objective.force_magnitude),
                input_displacement: config.input_displacement,
            },
            optimizer: OptimizerSection {
                volume_fraction: Some(config.volume_fraction),
                seed: Some(config.seed),
                init_style: Some(config.init_style),
                max_iters: Some(config.max_iters),
                move_limit: Some(config.move_limit),
                convergence_tol: Some(config.convergence_tol),
                filter_radius: Some(config.filter_radius),
                asymptote_init: Some(config.mma.asymptote_init),
                asymptote_grow: Some(config.mma.asymptote_grow),
                asymptote_shrink: Some(config.mma.asymptote_shrink),
            },
            campaign: CampaignSection::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }
}

/// Apply one `key=value` or `section.key=value` override to a raw table. Bare keys are
/// looked up in the schema; values are parsed as TOML and fall back to plain strings.
pub fn apply_override(table: &mut Table, item: &str) -> Result<()> {
    let (lhs, rhs) = item
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{item}` is not key=value")))?;
    let lhs = lhs.trim();
    let (section, key) = match lhs.split_once('.') {
        Some((s, k)) => (s, k),
        None => {
            let section = SCHEMA
                .iter()
                .find(|&&(_, k, ..)| k == lhs)
                .map(|&(s, ..)| s)
                .ok_or_else(|| config_err(format!("unknown override key `{lhs}`")))?;
            (section, lhs)
        }
    };
    if !SCHEMA.iter().any(|&(s, k, ..)| s == section && k == key) {
        return Err(config_err(format!("unknown override key `{lhs}`")));
    }
    let rhs = rhs.trim();
    let value = format!("v = {rhs}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(rhs.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(config_err(format!("`{section}` must be a table"))),
    }
}

/// Worker count: file value, then [`PARALLELISM_ENV`], then 1.
pub fn resolve_parallelism(file: Option<usize>) -> Result<usize> {
    if let Some(n) = file {
        return Ok(n);
    }
    match std::env::var(PARALLELISM_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| config_err(format!("{PARALLELISM_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(1),
    }
}
