//! `convergence`: error-versus-refinement studies on the manufactured
//! solutions, refining either the mesh (`axis = space`) or the time step
//! (`axis = time`).

use std::path::Path;

use eawave_core::assembly::assemble;
use eawave_core::physics::{exact_state, l2_errors};
use eawave_core::timeint::{make_tableau, run_simulation, SimulationSetup, State};

use crate::config::ConfigDoc;
use crate::error::CliError;
use crate::experiment::{
    build_mesh, out_path, output_prefix, parse_case, parse_discretization, parse_geometry,
    parse_materials, parse_time, Case,
};
use crate::report::{render_csv, sig17, write_atomic};

struct Row {
    refinement: u32,
    resolution: f64,
    hho: f64,
    dg: f64,
    hho_max: f64,
    dg_max: f64,
}

pub fn run(doc: &ConfigDoc, out_dir: &Path) -> Result<(), CliError> {
    let geometry = parse_geometry(doc)?;
    let setting = parse_discretization(doc)?;
    let materials = parse_materials(doc)?;
    let time = parse_time(doc)?;
    let case = match parse_case(doc)? {
        Case::Manufactured(c) => c,
        _ => {
            return Err(CliError::Config(
                "[case] name must be a manufactured case for convergence studies".to_string(),
            ))
        }
    };
    let prefix = output_prefix(doc, "convergence");
    let axis = doc.require("study", "axis")?;
    let tableau = make_tableau(&time.tableau)
        .map_err(|e| CliError::Config(format!("[time] tableau: {e}")))?;
    let sources = case.sources(&materials);
    let bc = case.boundary_values();

    // Each study point is (mesh level, time exponent n).
    let points: Vec<(u32, u32)> = match axis {
        "space" => doc
            .get_list::<u32>("study", "levels")?
            .ok_or_else(|| {
                crate::config::ConfigError::MissingKey("levels".to_string(), "study".to_string())
            })?
            .into_iter()
            .map(|l| (l, time.n))
            .collect(),
        "time" => {
            let level: u32 = doc.require_parsed("geometry", "level")?;
            doc.get_list::<u32>("study", "ns")?
                .ok_or_else(|| {
                    crate::config::ConfigError::MissingKey("ns".to_string(), "study".to_string())
                })?
                .into_iter()
                .map(|n| (level, n))
                .collect()
        }
        other => {
            return Err(CliError::Config(format!(
                "[study] axis must be 'space' or 'time', got '{other}'"
            )))
        }
    };

    let mut rows: Vec<Row> = Vec::new();
    for &(level, n) in &points {
        let mesh = build_mesh(&geometry, level).map_err(CliError::numerical)?;
        let sys = assemble(&mesh, &setting, &materials).map_err(CliError::numerical)?;
        let dt = 0.1 * 0.5f64.powi(n as i32);
        let setup = SimulationSetup {
            system: &sys,
            tableau: &tableau,
            dt,
            t_final: time.t_final,
            sources: &sources,
            bc: &bc,
        };
        let mut hho_max: f64 = 0.0;
        let mut dg_max: f64 = 0.0;
        let initial = State::from_cells(&sys, exact_state(&sys, case, 0.0), 0.0);
        let last = run_simulation(&setup, initial, &mut |_, st| {
            let e = l2_errors(&sys, &st.u_cells, case, st.t);
            hho_max = hho_max.max((e.p * e.p + e.v * e.v).sqrt());
            dg_max = dg_max.max((e.m * e.m + e.s * e.s).sqrt());
        })
        .map_err(CliError::numerical)?;
        let e = l2_errors(&sys, &last.u_cells, case, last.t);
        let (refinement, resolution) = match axis {
            "space" => (level, mesh.h_max()),
            _ => (n, dt),
        };
        rows.push(Row {
            refinement,
            resolution,
            hho: (e.p * e.p + e.v * e.v).sqrt(),
            dg: (e.m * e.m + e.s * e.s).sqrt(),
            hho_max,
            dg_max,
        });
    }

    // Observed orders between consecutive rows (final-time errors).
    let mut csv_rows: Vec<Vec<String>> = Vec::new();
    let mut monotone = true;
    for (i, r) in rows.iter().enumerate() {
        let (eoc_hho, eoc_dg) = if i == 0 {
            (String::new(), String::new())
        } else {
            let prev = &rows[i - 1];
            let span = (prev.resolution / r.resolution).log2();
            monotone &= r.hho <= prev.hho && r.dg <= prev.dg;
            (
                sig17((prev.hho / r.hho).log2() / span),
                sig17((prev.dg / r.dg).log2() / span),
            )
        };
        csv_rows.push(vec![
            r.refinement.to_string(),
            sig17(r.resolution),
            sig17(r.hho),
            sig17(r.dg),
            sig17(r.hho_max),
            sig17(r.dg_max),
            eoc_hho,
            eoc_dg,
        ]);
    }
    let header = [
        "refinement",
        "resolution",
        "err_hho",
        "err_dg",
        "err_hho_max",
        "err_dg_max",
        "eoc_hho",
        "eoc_dg",
    ];
    write_atomic(
        &out_path(out_dir, &prefix, "eoc.csv"),
        &render_csv(&header, &csv_rows),
    )
    .map_err(CliError::numerical)?;
    if !monotone {
        eprintln!("convergence: warning: error sequence is not monotone");
    }
    println!(
        "convergence: {} refinements ({axis} axis), outputs under {}",
        rows.len(),
        out_dir.display()
    );
    Ok(())
}
