//! `spectral`: weight sweeps of the condensed-operator spectral radius,
//! optionally across several mesh geometries.

use std::path::Path;

use eawave_core::assembly::assemble;
use eawave_core::hho_local::{optimal_weights, DiscretizationSetting};
use eawave_core::spectral::{spectral_radius, weight_sweep, SpectralMode, SweepEntry};

use crate::config::ConfigDoc;
use crate::error::CliError;
use crate::experiment::{
    build_mesh, out_path, output_prefix, parse_discretization, parse_geometry, parse_materials,
    GeometrySpec, MeshKind,
};
use crate::report::{render_csv, sig17, write_atomic};

fn parse_modes(doc: &ConfigDoc) -> Result<Vec<SpectralMode>, CliError> {
    let Some(raw) = doc.get("spectral", "modes") else {
        return Ok(vec![SpectralMode::Coupled]);
    };
    raw.split_whitespace()
        .map(|tok| match tok {
            "coupled" => Ok(SpectralMode::Coupled),
            "acoustic" => Ok(SpectralMode::Acoustic),
            "elastic" => Ok(SpectralMode::Elastic),
            other => Err(CliError::Config(format!(
                "[spectral] modes: unknown mode '{other}'"
            ))),
        })
        .collect()
}

fn parse_geometries(doc: &ConfigDoc, base: &GeometrySpec) -> Result<Vec<MeshKind>, CliError> {
    let Some(raw) = doc.get("spectral", "geometries") else {
        return Ok(vec![base.mesh.clone()]);
    };
    raw.split_whitespace()
        .map(|tok| match tok {
            "quadrangular" | "cartesian" => Ok(MeshKind::Cartesian),
            "simplicial" | "triangulated" => Ok(MeshKind::Simplicial),
            "polygonal" | "brick" => Ok(MeshKind::Polygonal),
            other => Err(CliError::Config(format!(
                "[spectral] geometries: unknown geometry '{other}'"
            ))),
        })
        .collect()
}

pub fn run(doc: &ConfigDoc, out_dir: &Path) -> Result<(), CliError> {
    let geometry = parse_geometry(doc)?;
    let setting = parse_discretization(doc)?;
    let materials = parse_materials(doc)?;
    let prefix = output_prefix(doc, "spectral");
    let level: u32 = doc.get_parsed("spectral", "level", 1)?;
    let ks: Vec<usize> = doc
        .get_list("spectral", "ks")?
        .unwrap_or_else(|| vec![setting.k]);
    let ws: Vec<i32> = doc
        .get_list("spectral", "ws")?
        .unwrap_or_else(|| (-3..=3).collect());
    let modes = parse_modes(doc)?;
    let geometries = parse_geometries(doc, &geometry)?;

    let mut entries: Vec<SweepEntry> = Vec::new();
    for kind in &geometries {
        match kind {
            MeshKind::Cartesian => {
                // The Cartesian unit-squares sweep supports pure modes too.
                let sweep = weight_sweep(
                    level,
                    setting.order,
                    setting.alpha,
                    &ks,
                    &ws,
                    &modes,
                    &materials,
                )
                .map_err(CliError::numerical)?;
                entries.extend(sweep);
            }
            other => {
                // Non-Cartesian geometries: coupled problem on the coupled
                // rectangles with the same weight grid.
                let spec = GeometrySpec {
                    rectangles: geometry.rectangles.clone(),
                    mesh: other.clone(),
                };
                let mesh = build_mesh(&spec, level).map_err(CliError::numerical)?;
                let (eta_f_ref, eta_s_ref) = optimal_weights(setting.order);
                for &k in &ks {
                    for &w in &ws {
                        let scale = 2.0f64.powi(w);
                        let s = DiscretizationSetting::with_weights(
                            k,
                            setting.order,
                            setting.alpha,
                            eta_f_ref * scale,
                            eta_s_ref * scale,
                        )
                        .map_err(|e| CliError::Config(e.to_string()))?;
                        let sys = assemble(&mesh, &s, &materials).map_err(CliError::numerical)?;
                        let rad = spectral_radius(&sys).map_err(CliError::numerical)?;
                        entries.push(SweepEntry {
                            mode: SpectralMode::Coupled,
                            k,
                            w,
                            eta_f: eta_f_ref * scale,
                            eta_s: eta_s_ref * scale,
                            geometry: format!("{}-l{level}", other.label()),
                            cells: rad.cells,
                            raw_gamma: rad.raw_gamma,
                            normalized_radius: rad.normalized_radius,
                        });
                    }
                }
            }
        }
    }

    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            vec![
                e.mode.label().to_string(),
                e.k.to_string(),
                e.w.to_string(),
                sig17(e.eta_f),
                sig17(e.eta_s),
                e.geometry.clone(),
                e.cells.to_string(),
                sig17(e.raw_gamma),
                sig17(e.normalized_radius),
            ]
        })
        .collect();
    let header = [
        "mode",
        "k",
        "w",
        "eta_f",
        "eta_s",
        "geometry",
        "cells",
        "raw_gamma",
        "normalized_radius",
    ];
    write_atomic(
        &out_path(out_dir, &prefix, "sweep.csv"),
        &render_csv(&header, &rows),
    )
    .map_err(CliError::numerical)?;
    println!(
        "spectral: {} entries, outputs under {}",
        entries.len(),
        out_dir.display()
    );
    Ok(())
}
