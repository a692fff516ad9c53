//! JSON mesh files and legacy VTK export.
//!
//! JSON layout (version 1):
//! ```text
//! { "version": 1,
//!   "vertices": [[x, y, z], ...],
//!   "faces": [[v0, v1, ...], ...],
//!   "cells": [[±(face + 1), ...], ...] }
//! ```
//! The sign of a cell entry is the orientation of the face relative to the
//! cell; boundary entities are inferred from incidence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellFace, MeshError, Point3, PolyMesh};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    version: u32,
    vertices: Vec<[f64; 3]>,
    faces: Vec<Vec<usize>>,
    cells: Vec<Vec<i64>>,
}

pub fn mesh_to_json_string(mesh: &PolyMesh) -> String {
    let file = MeshFile {
        version: SCHEMA_VERSION,
        vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        faces: mesh.faces.iter().map(|f| f.vertices.clone()).collect(),
        cells: mesh
            .cells
            .iter()
            .map(|c| c.faces.iter().map(|cf| i64::from(cf.sign) * (cf.face as i64 + 1)).collect())
            .collect(),
    };
    serde_json::to_string(&file).expect("mesh serialization cannot fail")
}

pub fn mesh_from_json_str(text: &str) -> Result<PolyMesh, MeshError> {
    let file: MeshFile = serde_json::from_str(text).map_err(|e| MeshError::ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.version != SCHEMA_VERSION {
        return Err(MeshError::SchemaVersionMismatch { found: file.version, expected: SCHEMA_VERSION });
    }
    let vertices = file.vertices.iter().map(|v| Point3::new(v[0], v[1], v[2])).collect();
    let mut cells = Vec::with_capacity(file.cells.len());
    for (c, entries) in file.cells.iter().enumerate() {
        let mut refs = Vec::with_capacity(entries.len());
        for &entry in entries {
            if entry == 0 {
                return Err(MeshError::ParseError {
                    line: 0,
                    column: 0,
                    message: format!("cells[{c}]: face reference 0 is not allowed (faces are 1-based)"),
                });
            }
            refs.push(CellFace { face: entry.unsigned_abs() as usize - 1, sign: if entry > 0 { 1 } else { -1 } });
        }
        cells.push(refs);
    }
    PolyMesh::from_topology(vertices, file.faces, cells)
}

pub fn save_json(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    fs::write(path, mesh_to_json_string(mesh))?;
    Ok(())
}

pub fn load_json(path: impl AsRef<Path>) -> Result<PolyMesh, MeshError> {
    mesh_from_json_str(&fs::read_to_string(path)?)
}

/// Named scalar arrays attached to a VTK export.
#[derive(Clone, Debug, Default)]
pub struct VtkData {
    pub point_data: Vec<(String, Vec<f64>)>,
    pub cell_data: Vec<(String, Vec<f64>)>,
}

/// Legacy ASCII unstructured grid with one polyhedron cell (type 42) per cell.
pub fn export_vtk(mesh: &PolyMesh, data: &VtkData) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 4.2\npolymfd mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.num_vertices()).unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    let mut records = Vec::with_capacity(mesh.num_cells());
    for cell in &mesh.cells {
        let mut r = vec![cell.faces.len()];
        for cf in &cell.faces {
            let face = &mesh.faces[cf.face];
            r.push(face.vertices.len());
            // VTK expects outward-facing loops
            if cf.sign > 0 {
                r.extend(face.vertices.iter().copied());
            } else {
                r.extend(face.vertices.iter().rev().copied());
            }
        }
        records.push(r);
    }
    let size: usize = records.iter().map(|r| r.len() + 1).sum();
    writeln!(out, "CELLS {} {}", mesh.num_cells(), size).unwrap();
    for r in &records {
        let items: Vec<String> = r.iter().map(usize::to_string).collect();
        writeln!(out, "{} {}", r.len(), items.join(" ")).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_cells()).unwrap();
    for _ in 0..mesh.num_cells() {
        out.push_str("42\n");
    }
    if !data.point_data.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices()).unwrap();
        write_arrays(&mut out, &data.point_data);
    }
    if !data.cell_data.is_empty() {
        writeln!(out, "CELL_DATA {}", mesh.num_cells()).unwrap();
        write_arrays(&mut out, &data.cell_data);
    }
    out
}

fn write_arrays(out: &mut String, arrays: &[(String, Vec<f64>)]) {
    for (name, values) in arrays {
        writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for v in values {
            writeln!(out, "{v}").unwrap();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind};

    #[test]
    fn missing_cells_key_is_a_parse_error() {
        let err = mesh_from_json_str(r#"{"version": 1, "vertices": [], "faces": []}"#).unwrap_err();
        match err {
            MeshError::ParseError { message, .. } => assert!(message.contains("cells")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_is_checked() {
        let err = mesh_from_json_str(r#"{"version": 2, "vertices": [], "faces": [], "cells": []}"#).unwrap_err();
        assert!(matches!(err, MeshError::SchemaVersionMismatch { found: 2, .. }));
    }

    #[test]
    fn vtk_header_counts() {
        let mesh = generate_mesh(MeshKind::Hex, 2, 0.0, 0).unwrap();
        let vtk = export_vtk(&mesh, &VtkData::default());
        assert!(vtk.contains("CELLS 8 "));
        assert!(vtk.contains("CELL_TYPES 8"));
        assert_eq!(vtk.lines().filter(|l| *l == "42").count(), 8);
    }
}
