//! `mesh-info`: builds the configured mesh and prints its statistics.

use eawave_core::mesh::FaceClass;

use crate::config::ConfigDoc;
use crate::error::CliError;
use crate::experiment::{build_mesh, parse_geometry};
use crate::report::sig17;

pub fn run(doc: &ConfigDoc) -> Result<(), CliError> {
    let geometry = parse_geometry(doc)?;
    let level: u32 = doc.require_parsed("geometry", "level")?;
    let mesh = build_mesh(&geometry, level).map_err(CliError::numerical)?;
    let (fluid, solid) = mesh.subdomain_counts();
    let mut interior = 0usize;
    let mut interface = 0usize;
    let mut boundary = 0usize;
    for f in &mesh.faces {
        match f.class {
            FaceClass::Interface => interface += 1,
            c if c.is_boundary() => boundary += 1,
            _ => interior += 1,
        }
    }
    let h_min = mesh
        .h_cells
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    println!("mesh: {} (level {level})", geometry.mesh.label());
    println!("cells: {} (fluid {fluid}, solid {solid})", mesh.n_cells());
    println!("faces: {} (interior {interior}, interface {interface}, boundary {boundary})", mesh.n_faces());
    println!("points: {}", mesh.points.len());
    println!("h_max: {}", sig17(mesh.h_max()));
    println!("h_min: {}", sig17(h_min));
    println!("domain_diameter: {}", sig17(mesh.domain_diameter));
    Ok(())
}
