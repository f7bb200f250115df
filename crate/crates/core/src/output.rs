//! Legacy-VTK snapshots and CSV time series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;
use crate::optimizer::IterRecord;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a legacy-VTK ASCII unstructured grid with one scalar block per
/// named field.
pub fn vtk_string(mesh: &Mesh, title: &str, fields: &[(&str, &[f64])]) -> Result<String> {
    let n = mesh.n_nodes();
    for (_, f) in fields {
        check_len("snapshot field", n, f.len())?;
    }
    let tris = mesh.triangles();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} {}", num(p[0]), num(p[1]), num(0.0));
    }
    let _ = writeln!(s, "CELLS {} {}", tris.len(), 4 * tris.len());
    for t in tris {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", tris.len());
    for _ in tris {
        let _ = writeln!(s, "5");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in *f {
                let _ = writeln!(s, "{}", num(*v));
            }
        }
    }
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn export_snapshot(field: &[f64], name: &str, mesh: &Mesh, path: &Path) -> Result<()> {
    write_text(path, &vtk_string(mesh, name, &[(name, field)])?)
}

pub fn export_fields(fields: &[(&str, &[f64])], title: &str, mesh: &Mesh, path: &Path) -> Result<()> {
    write_text(path, &vtk_string(mesh, title, fields)?)
}

/// Scalar blocks of a legacy-VTK file written by [`vtk_string`].
pub fn parse_vtk_scalars(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let bad = |m: &str| Error::invalid(format!("malformed VTK: {m}"));
    let mut lines = text.lines();
    let mut n = None;
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("POINT_DATA") => {
                n = Some(words.next().and_then(|w| w.parse::<usize>().ok()).ok_or_else(|| bad("POINT_DATA"))?);
            }
            Some("SCALARS") => {
                let name = words.next().ok_or_else(|| bad("SCALARS name"))?.to_string();
                let n = n.ok_or_else(|| bad("SCALARS before POINT_DATA"))?;
                lines.next().filter(|l| l.starts_with("LOOKUP_TABLE")).ok_or_else(|| bad("LOOKUP_TABLE"))?;
                let values = (0..n)
                    .map(|_| lines.next().and_then(|l| l.trim().parse::<f64>().ok()).ok_or_else(|| bad("scalar value")))
                    .collect::<Result<Vec<_>>>()?;
                out.push((name, values));
            }
            _ => {}
        }
    }
    Ok(out)
}

pub fn mass_csv(times: &[f64], controlled: &[f64], uncontrolled: &[f64], swarm: &[f64]) -> Result<String> {
    check_len("controlled mass series", times.len(), controlled.len())?;
    check_len("uncontrolled mass series", times.len(), uncontrolled.len())?;
    check_len("swarm mass series", times.len(), swarm.len())?;
    let mut s = String::from("t,m_S_controlled,m_S_uncontrolled,m_q\n");
    for i in 0..times.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(times[i]),
            num(controlled[i]),
            num(uncontrolled[i]),
            num(swarm[i])
        );
    }
    Ok(s)
}

pub fn convergence_csv(history: &[IterRecord]) -> String {
    let mut s = String::from("iter,J,grad_norm,step\n");
    for r in history {
        let _ = writeln!(s, "{},{},{},{}", r.iter, num(r.cost), num(r.grad_norm), num(r.step));
    }
    s
}
