//! Translation of configuration documents into solver inputs shared by the
//! `simulate`, `convergence`, `spectral` and `mesh-info` commands.

use std::path::{Path, PathBuf};

use eawave_core::assembly::{BoundaryValues, Sources};
use eawave_core::hho_local::{
    optimal_weights, DiscretizationSetting, OrderMode, SolidStabSpeed,
};
use eawave_core::mesh::{
    build_brick_mesh, build_cartesian_mesh, build_triangulated_mesh, read_polygonal_mesh,
    CoupledRectangles, Mesh, Point2, Rect, Subdomain,
};
use eawave_core::physics::{
    builtin_materials, manufactured_case, ManufacturedCase, Materials, RickerConfig,
};

use crate::config::{ConfigDoc, ConfigError};

/// Mesh family used to discretize the coupled rectangles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshKind {
    Cartesian,
    Simplicial,
    Polygonal,
    File(PathBuf),
}

impl MeshKind {
    pub fn label(&self) -> String {
        match self {
            MeshKind::Cartesian => "quadrangular".to_string(),
            MeshKind::Simplicial => "simplicial".to_string(),
            MeshKind::Polygonal => "polygonal".to_string(),
            MeshKind::File(p) => format!("file:{}", p.display()),
        }
    }
}

/// Geometry of the coupled domain plus the chosen mesh family.
#[derive(Debug, Clone)]
pub struct GeometrySpec {
    pub rectangles: CoupledRectangles,
    pub mesh: MeshKind,
}

fn invalid(section: &str, key: &str, v: &str, why: &str) -> ConfigError {
    ConfigError::InvalidValue(
        section.to_string(),
        key.to_string(),
        v.to_string(),
        why.to_string(),
    )
}

fn parse_rect(section: &str, key: &str, v: &str) -> Result<Rect, ConfigError> {
    let nums: Vec<f64> = v
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(section, key, v, "expected four numbers x0 x1 y0 y1"))?;
    if nums.len() != 4 {
        return Err(invalid(section, key, v, "expected four numbers x0 x1 y0 y1"));
    }
    Ok(Rect::new(nums[0], nums[1], nums[2], nums[3]))
}

pub fn parse_point(section: &str, key: &str, v: &str) -> Result<Point2, ConfigError> {
    let nums: Vec<f64> = v
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(section, key, v, "expected two numbers x y"))?;
    if nums.len() != 2 {
        return Err(invalid(section, key, v, "expected two numbers x y"));
    }
    Ok(Point2::new(nums[0], nums[1]))
}

/// Reads the `[geometry]` section. Defaults to the unit-squares coupled
/// domain on a Cartesian mesh.
pub fn parse_geometry(doc: &ConfigDoc) -> Result<GeometrySpec, ConfigError> {
    let rectangles = match (doc.get("geometry", "fluid"), doc.get("geometry", "solid")) {
        (Some(f), Some(s)) => CoupledRectangles {
            fluid: parse_rect("geometry", "fluid", f)?,
            solid: parse_rect("geometry", "solid", s)?,
        },
        (None, None) => CoupledRectangles::unit_squares(),
        _ => {
            return Err(ConfigError::MissingKey(
                "fluid/solid (both or neither)".to_string(),
                "geometry".to_string(),
            ))
        }
    };
    let mesh = match doc.get("geometry", "mesh").unwrap_or("cartesian") {
        "cartesian" | "quadrangular" => MeshKind::Cartesian,
        "simplicial" | "triangulated" => MeshKind::Simplicial,
        "polygonal" | "brick" => MeshKind::Polygonal,
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                MeshKind::File(PathBuf::from(path))
            } else {
                return Err(invalid(
                    "geometry",
                    "mesh",
                    other,
                    "expected cartesian | simplicial | polygonal | file:<path>",
                ));
            }
        }
    };
    Ok(GeometrySpec { rectangles, mesh })
}

pub fn build_mesh(spec: &GeometrySpec, level: u32) -> anyhow::Result<Mesh> {
    let mesh = match &spec.mesh {
        MeshKind::Cartesian => build_cartesian_mesh(level, &spec.rectangles)?,
        MeshKind::Simplicial => build_triangulated_mesh(level, &spec.rectangles)?,
        MeshKind::Polygonal => build_brick_mesh(level, &spec.rectangles)?,
        MeshKind::File(path) => read_polygonal_mesh(&std::fs::read_to_string(path)?)?,
    };
    Ok(mesh)
}

/// Reads the `[discretization]` section into a solver setting.
pub fn parse_discretization(doc: &ConfigDoc) -> Result<DiscretizationSetting, ConfigError> {
    let k: usize = doc.require_parsed("discretization", "k")?;
    let order = match doc.get("discretization", "order").unwrap_or("mixed") {
        "equal" => OrderMode::Equal,
        "mixed" => OrderMode::Mixed,
        other => {
            return Err(invalid(
                "discretization",
                "order",
                other,
                "expected equal | mixed",
            ))
        }
    };
    let alpha: u32 = doc.get_parsed("discretization", "alpha", 1)?;
    let (eta_f_ref, eta_s_ref) = optimal_weights(order);
    let eta_f: f64 = doc.get_parsed("discretization", "eta_f", eta_f_ref)?;
    let eta_s: f64 = doc.get_parsed("discretization", "eta_s", eta_s_ref)?;
    let mut setting = DiscretizationSetting::with_weights(k, order, alpha, eta_f, eta_s)
        .map_err(|e| {
            invalid(
                "discretization",
                "k/order/alpha",
                &format!("k={k} alpha={alpha}"),
                &e.to_string(),
            )
        })?;
    // Which solid wave speed scales the solid stabilization (ζ^s = ρ^s c^s).
    setting.solid_stab_speed = match doc.get("discretization", "stab_wave_speed").unwrap_or("s") {
        "s" => SolidStabSpeed::SWave,
        "p" => SolidStabSpeed::PWave,
        other => {
            return Err(invalid(
                "discretization",
                "stab_wave_speed",
                other,
                "expected 's' or 'p'",
            ))
        }
    };
    Ok(setting)
}

/// Reads the `[materials]` section: either a builtin name or explicit
/// densities and wave speeds.
pub fn parse_materials(doc: &ConfigDoc) -> Result<Materials, ConfigError> {
    if let Some(name) = doc.get("materials", "name") {
        return builtin_materials(name)
            .map_err(|e| invalid("materials", "name", name, &e.to_string()));
    }
    let rho_f: f64 = doc.require_parsed("materials", "rho_f")?;
    let c_p_f: f64 = doc.require_parsed("materials", "c_p_fluid")?;
    let rho_s: f64 = doc.require_parsed("materials", "rho_s")?;
    let c_p_s: f64 = doc.require_parsed("materials", "c_p_solid")?;
    let c_s_s: f64 = doc.require_parsed("materials", "c_s_solid")?;
    Ok(Materials::from_speeds(rho_f, c_p_f, rho_s, c_p_s, c_s_s))
}

/// Time-stepping parameters; `n` sets the step as Δt = 0.1·2^{−n}.
#[derive(Debug, Clone)]
pub struct TimeSpec {
    pub tableau: String,
    pub n: u32,
    pub t_final: f64,
}

impl TimeSpec {
    pub fn dt(&self) -> f64 {
        0.1 * 0.5f64.powi(self.n as i32)
    }
}

pub fn parse_time(doc: &ConfigDoc) -> Result<TimeSpec, ConfigError> {
    Ok(TimeSpec {
        tableau: doc.require("time", "tableau")?.to_string(),
        n: doc.require_parsed("time", "n")?,
        t_final: doc.require_parsed("time", "t_final")?,
    })
}

/// Initial data and forcing of a run.
pub enum Case {
    /// Localized fluid pulse, unforced.
    Ricker(RickerConfig),
    /// Manufactured solution with its exact sources and boundary traces.
    Manufactured(ManufacturedCase),
    /// Rest state with no forcing.
    Zero,
}

impl Case {
    pub fn sources_and_bc(&self, mats: &Materials) -> (Sources, BoundaryValues) {
        match self {
            Case::Manufactured(case) => (case.sources(mats), case.boundary_values()),
            _ => (Sources::zero(), BoundaryValues::zero()),
        }
    }
}

pub fn parse_case(doc: &ConfigDoc) -> Result<Case, ConfigError> {
    let name = doc.require("case", "name")?;
    match name {
        "ricker" => {
            let center = parse_point(
                "case",
                "center",
                doc.get("case", "center").unwrap_or("0.5 0.5"),
            )?;
            let mut cfg = RickerConfig::new(center);
            cfg.theta = doc.get_parsed("case", "theta", cfg.theta)?;
            cfg.f_c = doc.get_parsed("case", "f_c", cfg.f_c)?;
            if doc.get("case", "lambda").is_some() {
                cfg.lambda_override = Some(doc.require_parsed("case", "lambda")?);
            }
            Ok(Case::Ricker(cfg))
        }
        "zero" => Ok(Case::Zero),
        other => manufactured_case(other)
            .map(Case::Manufactured)
            .map_err(|e| invalid("case", "name", other, &e.to_string())),
    }
}

/// Sensor request: a location plus the subdomain whose field it reads.
#[derive(Debug, Clone)]
pub struct SensorSpec {
    pub location: Point2,
    pub subdomain: Subdomain,
}

/// Reads repeated `fluid = x y` / `solid = x y` keys of `[sensors]`.
pub fn parse_sensors(doc: &ConfigDoc) -> Result<Vec<SensorSpec>, ConfigError> {
    let Some(section) = doc.section("sensors") else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (key, value) in &section.entries {
        let subdomain = match key.as_str() {
            "fluid" => Subdomain::Fluid,
            "solid" => Subdomain::Solid,
            other => {
                return Err(invalid(
                    "sensors",
                    other,
                    value,
                    "sensor keys must be 'fluid' or 'solid'",
                ))
            }
        };
        out.push(SensorSpec {
            location: parse_point("sensors", key, value)?,
            subdomain,
        });
    }
    Ok(out)
}

/// Output file prefix from `[output] prefix`, defaulting to the command name.
pub fn output_prefix(doc: &ConfigDoc, default: &str) -> String {
    doc.get("output", "prefix").unwrap_or(default).to_string()
}

pub fn out_path(out_dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    out_dir.join(format!("{prefix}_{suffix}"))
}
