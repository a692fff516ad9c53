//! Polyhedral mesh representation.
//!
//! A [`PolyMesh`] stores vertices, oriented edges, oriented planar faces and
//! cells. Every face carries a normal fixed once from its vertex loop
//! (right-hand rule); a cell refers to its faces through a sign
//! `σ = n_f · n_f^P` telling whether the stored normal points out of the cell.
//! Edges are oriented from `v1` to `v2` with `v1 < v2`.
//!
//! Construction computes all geometry (areas, centroids, normals, volumes,
//! diameters) and boundary flags from incidence counts. Cell-level defects
//! such as an open surface are *not* rejected at construction; they are
//! reported by [`validate_mesh`] so that broken inputs can still be diagnosed.

mod generate;
mod geometry;
mod io;
mod validate;

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

pub use generate::{generate_mesh, MeshKind};
pub use geometry::{cell_geometry, face_geometry, FaceGeometry, SubTet};
pub use io::{export_vtk, load_json, mesh_from_json_str, mesh_to_json_string, save_json, VtkData};
pub use validate::{quality_report, validate_mesh, MeshQualityReport, ValidationReport, Violation};

/// Coordinates in physical space.
pub type Point3 = Vector3<f64>;

/// Relative out-of-plane tolerance for faces, scaled by the face diameter.
pub const PLANARITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate face: area {area:e} below threshold for diameter {diameter:e}")]
    DegenerateFace { area: f64, diameter: f64 },
    #[error("non-planar face: out-of-plane deviation {deviation:e} exceeds {tolerance:e}")]
    NonPlanarFace { deviation: f64, tolerance: f64 },
    #[error("face needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("cell {cell} does not have a closed surface (residual {residual:e})")]
    OpenSurface { cell: usize, residual: f64 },
    #[error("cell {cell} has non-positive volume {volume:e}")]
    NegativeVolume { cell: usize, volume: f64 },
    #[error("vertex index {index} out of range ({count} vertices)")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("face index {index} out of range ({count} faces)")]
    FaceOutOfRange { index: usize, count: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Oriented edge `v1 -> v2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub v1: usize,
    pub v2: usize,
    pub length: f64,
}

impl Edge {
    /// Unit tangent pointing from `v1` to `v2`.
    pub fn tangent(&self, vertices: &[Point3]) -> Point3 {
        (vertices[self.v2] - vertices[self.v1]) / self.length
    }
}

/// Planar polygonal face.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Vertex loop, counter-clockwise about `normal`.
    pub vertices: Vec<usize>,
    /// Edge ids, `edges[l]` joins `vertices[l]` and `vertices[l + 1]`.
    pub edges: Vec<usize>,
    pub area: f64,
    pub centroid: Point3,
    pub normal: Point3,
    pub diameter: f64,
}

/// A face as seen from one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellFace {
    pub face: usize,
    /// `+1` when the face normal points out of the cell, `-1` otherwise.
    pub sign: i8,
}

impl CellFace {
    pub fn sigma(&self) -> f64 {
        f64::from(self.sign)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub faces: Vec<CellFace>,
    /// Local vertex numbering, in order of first appearance along the face loops.
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub volume: f64,
    pub centroid: Point3,
    pub diameter: f64,
}

impl Cell {
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Local index of a global vertex id.
    pub fn local_vertex(&self, vertex: usize) -> Option<usize> {
        self.vertices.iter().position(|&v| v == vertex)
    }
}

/// Conforming polyhedral mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMesh {
    pub vertices: Vec<Point3>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    pub cells: Vec<Cell>,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
    pub boundary_face: Vec<bool>,
    /// Incident cells of every face, in increasing cell order.
    pub face_cells: Vec<Vec<usize>>,
    /// Largest cell diameter.
    pub h: f64,
}

impl PolyMesh {
    /// Builds a mesh from raw topology: face vertex loops and signed cell face lists.
    ///
    /// Fails on malformed indices and on degenerate or non-planar faces.
    pub fn from_topology(
        vertices: Vec<Point3>,
        face_loops: Vec<Vec<usize>>,
        cell_faces: Vec<Vec<CellFace>>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let nf = face_loops.len();

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces = Vec::with_capacity(nf);
        for face_loop in face_loops {
            for &v in &face_loop {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { index: v, count: nv });
                }
            }
            let points: Vec<Point3> = face_loop.iter().map(|&v| vertices[v]).collect();
            let geom = face_geometry(&points)?;
            let mut face_edges = Vec::with_capacity(face_loop.len());
            for l in 0..face_loop.len() {
                let a = face_loop[l];
                let b = face_loop[(l + 1) % face_loop.len()];
                let key = (a.min(b), a.max(b));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge { v1: key.0, v2: key.1, length: (vertices[key.1] - vertices[key.0]).norm() });
                    edges.len() - 1
                });
                face_edges.push(id);
            }
            faces.push(Face {
                vertices: face_loop,
                edges: face_edges,
                area: geom.area,
                centroid: geom.centroid,
                normal: geom.normal,
                diameter: geom.diameter,
            });
        }

        let mut face_cells = vec![Vec::new(); nf];
        let mut cells = Vec::with_capacity(cell_faces.len());
        for (c, refs) in cell_faces.into_iter().enumerate() {
            let mut cell_vertices = Vec::new();
            let mut cell_edges = Vec::new();
            for r in &refs {
                if r.face >= nf {
                    return Err(MeshError::FaceOutOfRange { index: r.face, count: nf });
                }
                face_cells[r.face].push(c);
                for &v in &faces[r.face].vertices {
                    if !cell_vertices.contains(&v) {
                        cell_vertices.push(v);
                    }
                }
                for &e in &faces[r.face].edges {
                    if !cell_edges.contains(&e) {
                        cell_edges.push(e);
                    }
                }
            }
            let (volume, centroid) = geometry::signed_volume_and_centroid(&refs, &faces, &vertices);
            let diameter = geometry::diameter(cell_vertices.iter().map(|&v| &vertices[v]));
            cells.push(Cell { faces: refs, vertices: cell_vertices, edges: cell_edges, volume, centroid, diameter });
        }

        let boundary_face: Vec<bool> = face_cells.iter().map(|inc| inc.len() == 1).collect();
        let mut boundary_vertex = vec![false; nv];
        let mut boundary_edge = vec![false; edges.len()];
        for (f, face) in faces.iter().enumerate() {
            if boundary_face[f] {
                for &v in &face.vertices {
                    boundary_vertex[v] = true;
                }
                for &e in &face.edges {
                    boundary_edge[e] = true;
                }
            }
        }
        let h = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);

        Ok(PolyMesh { vertices, edges, faces, cells, boundary_vertex, boundary_edge, boundary_face, face_cells, h })
    }

    /// Builds a mesh from cells given as lists of polygon vertex loops.
    ///
    /// Faces are identified by their vertex sets; the first loop seen fixes the
    /// face orientation. The sign of each cell face is decided geometrically
    /// against the average of the cell vertices, so cells must be star-shaped
    /// with respect to that point.
    pub fn from_polyhedra(vertices: Vec<Point3>, cells: &[Vec<Vec<usize>>]) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut face_loops: Vec<Vec<usize>> = Vec::new();
        let mut face_index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut cell_faces = Vec::with_capacity(cells.len());
        for polygons in cells {
            let mut cell_vertices: Vec<usize> = polygons.iter().flatten().copied().collect();
            cell_vertices.sort_unstable();
            cell_vertices.dedup();
            if let Some(&bad) = cell_vertices.iter().find(|&&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange { index: bad, count: nv });
            }
            let center = cell_vertices.iter().map(|&v| vertices[v]).sum::<Point3>() / cell_vertices.len() as f64;
            let mut refs = Vec::with_capacity(polygons.len());
            for polygon in polygons {
                let mut key = polygon.clone();
                key.sort_unstable();
                let id = *face_index.entry(key).or_insert_with(|| {
                    face_loops.push(polygon.clone());
                    face_loops.len() - 1
                });
                let stored: Vec<Point3> = face_loops[id].iter().map(|&v| vertices[v]).collect();
                let geom = face_geometry(&stored)?;
                let sign = if geom.normal.dot(&(geom.centroid - center)) >= 0.0 { 1 } else { -1 };
                refs.push(CellFace { face: id, sign });
            }
            cell_faces.push(refs);
        }
        Self::from_topology(vertices, face_loops, cell_faces)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Outward normal of a cell face.
    pub fn outward_normal(&self, cf: &CellFace) -> Point3 {
        self.faces[cf.face].normal * cf.sigma()
    }

    /// Sub-tetrahedra of a cell: apex at the cell centroid, base from a fan
    /// triangulation of each face about its centroid (triangles are kept whole).
    pub fn cell_subtets(&self, cell: usize) -> Vec<SubTet> {
        geometry::subtets(&self.cells[cell], &self.faces, &self.vertices)
    }

    /// Fan triangles of a face as `(a, b, c, area)`, counter-clockwise about
    /// the face normal.
    pub fn face_triangles(&self, face: usize) -> Vec<(Point3, Point3, Point3, f64)> {
        geometry::face_triangles(&self.faces[face], &self.vertices)
    }

    /// Edges of a cell as pairs of local vertex indices.
    pub fn cell_local_edges(&self, cell: usize) -> Vec<(usize, usize, usize)> {
        let c = &self.cells[cell];
        c.edges
            .iter()
            .map(|&e| {
                let edge = &self.edges[e];
                let a = c.local_vertex(edge.v1).expect("edge vertex belongs to cell");
                let b = c.local_vertex(edge.v2).expect("edge vertex belongs to cell");
                (e, a, b)
            })
            .collect()
    }

    /// Relabels vertices, faces and cells. `vp[old] = new` and likewise for faces and cells.
    pub fn permuted(&self, vp: &[usize], fp: &[usize], cp: &[usize]) -> Result<Self, MeshError> {
        let mut vertices = vec![Point3::zeros(); self.num_vertices()];
        for (old, &new) in vp.iter().enumerate() {
            vertices[new] = self.vertices[old];
        }
        let mut loops = vec![Vec::new(); self.num_faces()];
        for (old, &new) in fp.iter().enumerate() {
            loops[new] = self.faces[old].vertices.iter().map(|&v| vp[v]).collect();
        }
        let mut cells = vec![Vec::new(); self.num_cells()];
        for (old, &new) in cp.iter().enumerate() {
            cells[new] = self.cells[old].faces.iter().map(|cf| CellFace { face: fp[cf.face], sign: cf.sign }).collect();
        }
        Self::from_topology(vertices, loops, cells)
    }
}
