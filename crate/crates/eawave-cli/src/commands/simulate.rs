//! `simulate`: runs one configured experiment and writes energy traces,
//! sensor traces, and optional field dumps.

use std::path::Path;

use eawave_core::assembly::assemble;
use eawave_core::physics::{
    discrete_energy, exact_state, ricker_initial, sample_sensor, Sensor, SensorSample,
};
use eawave_core::timeint::{make_tableau, run_simulation, SimulationSetup, State};
use nalgebra::DVector;

use crate::config::ConfigDoc;
use crate::error::CliError;
use crate::experiment::{
    build_mesh, out_path, output_prefix, parse_case, parse_discretization, parse_geometry,
    parse_materials, parse_sensors, parse_time, Case,
};
use crate::report::{render_csv, render_field_dump, sig17, write_atomic};

pub fn run(doc: &ConfigDoc, out_dir: &Path, dump_every: Option<usize>) -> Result<(), CliError> {
    let geometry = parse_geometry(doc)?;
    let level: u32 = doc.require_parsed("geometry", "level")?;
    let setting = parse_discretization(doc)?;
    let materials = parse_materials(doc)?;
    let time = parse_time(doc)?;
    let case = parse_case(doc)?;
    let sensor_specs = parse_sensors(doc)?;
    let prefix = output_prefix(doc, "simulate");

    let mesh = build_mesh(&geometry, level).map_err(CliError::numerical)?;
    let sys = assemble(&mesh, &setting, &materials).map_err(CliError::numerical)?;
    let tableau = make_tableau(&time.tableau)
        .map_err(|e| CliError::Config(format!("[time] tableau: {e}")))?;
    let (sources, bc) = case.sources_and_bc(&materials);

    let u0 = match &case {
        Case::Ricker(cfg) => ricker_initial(&sys, cfg),
        Case::Manufactured(c) => exact_state(&sys, *c, 0.0),
        Case::Zero => DVector::zeros(sys.n_cell_dofs()),
    };

    let sensors = sensor_specs
        .iter()
        .map(|s| Sensor::locate(&mesh, s.location, s.subdomain))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("[sensors]: {e}")))?;
    let mut sensor_header: Vec<String> = vec!["t".to_string()];
    for s in &sensors {
        let tag = format!("{:.4}_{:.4}", s.location.x, s.location.y);
        match s.subdomain {
            eawave_core::mesh::Subdomain::Fluid => sensor_header.push(format!("p_{tag}")),
            eawave_core::mesh::Subdomain::Solid => {
                sensor_header.push(format!("vx_{tag}"));
                sensor_header.push(format!("vy_{tag}"));
            }
        }
    }

    let setup = SimulationSetup {
        system: &sys,
        tableau: &tableau,
        dt: time.dt(),
        t_final: time.t_final,
        sources: &sources,
        bc: &bc,
    };

    let mut energy_rows: Vec<Vec<String>> = Vec::new();
    let mut sensor_rows: Vec<Vec<String>> = Vec::new();
    let mut e_initial = None;
    let mut dump_error: Option<CliError> = None;
    let initial = State::from_cells(&sys, u0, 0.0);
    let result = run_simulation(&setup, initial, &mut |step, st| {
        let (ef, es) = discrete_energy(&sys, &st.u_cells);
        let total = ef + es;
        let e0 = *e_initial.get_or_insert(total);
        let loss = if e0 > 0.0 { (e0 - total) / e0 } else { 0.0 };
        energy_rows.push(vec![
            sig17(st.t),
            sig17(ef),
            sig17(es),
            sig17(total),
            sig17(loss),
        ]);
        let mut row = vec![sig17(st.t)];
        for s in &sensors {
            match sample_sensor(&sys, &st.u_cells, s) {
                SensorSample::Pressure(p) => row.push(sig17(p)),
                SensorSample::Velocity(vx, vy) => {
                    row.push(sig17(vx));
                    row.push(sig17(vy));
                }
            }
        }
        sensor_rows.push(row);
        if let Some(stride) = dump_every {
            if stride > 0 && step % stride == 0 && dump_error.is_none() {
                let dump = render_field_dump(&mesh, &sys, &st.u_cells, st.t);
                let path = out_path(out_dir, &prefix, &format!("fields_{step:06}.vtk"));
                if let Err(e) = write_atomic(&path, &dump) {
                    dump_error = Some(CliError::numerical(e));
                }
            }
        }
    });
    if let Some(e) = dump_error {
        return Err(e);
    }

    // Persist whatever was computed before reporting a divergence, so the
    // last valid time is visible in the outputs.
    let header: Vec<&str> = vec!["t", "E_fluid", "E_solid", "E_total", "relative_loss"];
    write_atomic(
        &out_path(out_dir, &prefix, "energy.csv"),
        &render_csv(&header, &energy_rows),
    )
    .map_err(CliError::numerical)?;
    let sensor_header_refs: Vec<&str> = sensor_header.iter().map(String::as_str).collect();
    write_atomic(
        &out_path(out_dir, &prefix, "sensors.csv"),
        &render_csv(&sensor_header_refs, &sensor_rows),
    )
    .map_err(CliError::numerical)?;

    match result {
        Ok(last) => {
            println!(
                "simulate: {} cells, {} steps to t = {}, outputs under {}",
                mesh.n_cells(),
                energy_rows.len().saturating_sub(1),
                sig17(last.t),
                out_dir.display()
            );
            Ok(())
        }
        Err(e) => Err(CliError::Numerical(format!(
            "run aborted: {e}; partial traces written"
        ))),
    }
}
