//! CSV and legacy-ASCII field-dump writers. All files are written to a
//! temporary sibling first and renamed into place, so readers never see a
//! partial file.

use std::fmt::Write as _;
use std::path::Path;

use eawave_core::assembly::BlockSystem;
use eawave_core::mesh::{Mesh, Subdomain};
use nalgebra::DVector;

/// Formats a number with 17 significant digits, enough to round-trip f64.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `content` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Renders a CSV document with a header row.
pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Writes the mesh and cell-averaged fields (pressure p and velocity
/// magnitude |v|) as a legacy-ASCII unstructured grid.
pub fn render_field_dump(mesh: &Mesh, sys: &BlockSystem, u_t: &DVector<f64>, t: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "elasto-acoustic fields at t = {}", sig17(t));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.points.len());
    for v in &mesh.points {
        let _ = writeln!(out, "{} {} 0.0", sig17(v.x), sig17(v.y));
    }
    let n_cells = mesh.n_cells();
    let list_len: usize = (0..n_cells)
        .map(|c| mesh.cells[c].vertex_ids.len() + 1)
        .sum();
    let _ = writeln!(out, "CELLS {n_cells} {list_len}");
    for c in 0..n_cells {
        let ids = &mesh.cells[c].vertex_ids;
        let mut line = format!("{}", ids.len());
        for id in ids {
            let _ = write!(line, " {id}");
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "CELL_TYPES {n_cells}");
    for _ in 0..n_cells {
        let _ = writeln!(out, "7"); // VTK_POLYGON
    }
    let _ = writeln!(out, "CELL_DATA {n_cells}");
    let (p_avg, v_avg) = cell_averages(sys, u_t);
    let _ = writeln!(out, "SCALARS pressure double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for v in &p_avg {
        let _ = writeln!(out, "{}", sig17(*v));
    }
    let _ = writeln!(out, "SCALARS velocity_magnitude double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for v in &v_avg {
        let _ = writeln!(out, "{}", sig17(*v));
    }
    out
}

/// Cell averages of the HHO cell unknowns: pressure on fluid cells and
/// velocity magnitude on solid cells (zero in the opposite subdomain).
fn cell_averages(sys: &BlockSystem, u_t: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let n_cells = sys.cells.len();
    let mut p_avg = vec![0.0; n_cells];
    let mut v_avg = vec![0.0; n_cells];
    for (c, cb) in sys.cells.iter().enumerate() {
        let local = sys.cell_local(u_t, c);
        let nd = cb.dual_table.nrows();
        let nc = cb.primal_table.nrows();
        let area: f64 = cb.quad.weights.iter().sum();
        match cb.subdomain {
            Subdomain::Fluid => {
                let mut int = 0.0;
                for (q, w) in cb.quad.weights.iter().enumerate() {
                    let mut val = 0.0;
                    for i in 0..nc {
                        val += local[2 * nd + i] * cb.primal_table[(i, q)];
                    }
                    int += w * val;
                }
                p_avg[c] = int / area;
            }
            Subdomain::Solid => {
                let mut int = 0.0;
                for (q, w) in cb.quad.weights.iter().enumerate() {
                    let mut vx = 0.0;
                    let mut vy = 0.0;
                    for i in 0..nc {
                        vx += local[3 * nd + i] * cb.primal_table[(i, q)];
                        vy += local[3 * nd + nc + i] * cb.primal_table[(i, q)];
                    }
                    int += w * (vx * vx + vy * vy).sqrt();
                }
                v_avg[c] = int / area;
            }
        }
    }
    (p_avg, v_avg)
}
