//! Legacy VTK field files and CSV tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{DiagnosticsRecord, MAX_MODE};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::radial::RadialSample;
use crate::sim::State;

/// Writes the P1 fields and the vertex values of the velocity as an ASCII
/// unstructured grid.
pub fn write_vtk(mesh: &Mesh, state: &State, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_vtk_to(&mut w, mesh, state)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_vtk_to(w: &mut impl Write, mesh: &Mesh, state: &State) -> std::io::Result<()> {
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "chb fields t={:.16e}", state.t)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    for (name, f) in [("phi", &state.phi), ("mu", &state.mu), ("sigma", &state.sigma), ("p", &state.p)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in f.coeffs() {
            writeln!(w, "{v:.16e}")?;
        }
    }
    writeln!(w, "VECTORS v double")?;
    // P2 nodes start with the vertices
    for k in 0..nv {
        let c = state.v.coeffs();
        writeln!(w, "{:.16e} {:.16e} 0", c[2 * k], c[2 * k + 1])?;
    }
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}"))),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the diagnostics table with the fixed column order of
/// [`DiagnosticsRecord::HEADER`].
pub fn write_diag_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(DiagnosticsRecord::HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        let mut row = vec![
            fmt(r.t),
            fmt(r.mass),
            fmt(r.tumour_area),
            fmt(r.energy),
            fmt(r.phi_min),
            fmt(r.phi_max),
            fmt(r.sigma_min),
            fmt(r.sigma_max),
            fmt(r.v_max),
            fmt(r.mean_radius),
        ];
        row.extend(r.modes.iter().map(|&a| fmt(a)));
        row.extend([r.flow_iters, r.vi_iters, r.nutrient_iters].map(|i| i.to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_diag_csv`].
pub fn read_diag_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let bad = |m: String| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, m));
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(DiagnosticsRecord::HEADER.iter().copied()) {
        return Err(bad("unexpected diagnostics header".into()));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let f = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", DiagnosticsRecord::HEADER[i])))
        };
        let u = |i: usize| -> Result<usize> {
            row[i].parse::<usize>().map_err(|e| bad(format!("column {}: {e}", DiagnosticsRecord::HEADER[i])))
        };
        let mut modes = [0.0; MAX_MODE + 1];
        for (k, m) in modes.iter_mut().enumerate() {
            *m = f(10 + k)?;
        }
        out.push(DiagnosticsRecord {
            t: f(0)?,
            mass: f(1)?,
            tumour_area: f(2)?,
            energy: f(3)?,
            phi_min: f(4)?,
            phi_max: f(5)?,
            sigma_min: f(6)?,
            sigma_max: f(7)?,
            v_max: f(8)?,
            mean_radius: f(9)?,
            modes,
            flow_iters: u(23)?,
            vi_iters: u(24)?,
            nutrient_iters: u(25)?,
        });
    }
    Ok(out)
}

/// Writes the radial oracle series as `t,R,V,sigma0`.
pub fn write_radial_csv(samples: &[RadialSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["t", "R", "V", "sigma0"]).map_err(|e| csv_error(path, e))?;
    for s in samples {
        w.write_record([fmt(s.t), fmt(s.radius), fmt(s.velocity), fmt(s.sigma_center)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
