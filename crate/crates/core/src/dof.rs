//! Discrete spaces on cells, faces, edges and nodes, the interpolation
//! operators onto them, the primal operators `grad^h` and `div^h`, and the
//! vertex-based quadrature weights used by the nodal method.

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Point3, PolyMesh};

macro_rules! field {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }
        }

        impl Deref for $name {
            type Target = Vec<f64>;
            fn deref(&self) -> &Vec<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Vec<f64> {
                &mut self.0
            }
        }
    };
}

field!(
    /// One value per cell.
    CellField
);
field!(
    /// One value per face: the average flux density through the face,
    /// measured along the face's fixed normal.
    FaceField
);
field!(
    /// One value per edge, relative to the `v1 -> v2` orientation.
    EdgeField
);
field!(
    /// One value per vertex.
    NodeField
);

impl FaceField {
    /// Values of the faces of a cell, re-oriented to the cell's outward normals.
    pub fn restrict(&self, mesh: &PolyMesh, cell: usize) -> DVector<f64> {
        let faces = &mesh.cells[cell].faces;
        DVector::from_iterator(faces.len(), faces.iter().map(|cf| cf.sigma() * self.0[cf.face]))
    }
}

impl NodeField {
    /// Values at the vertices of a cell, in local vertex order.
    pub fn restrict(&self, mesh: &PolyMesh, cell: usize) -> DVector<f64> {
        let vs = &mesh.cells[cell].vertices;
        DVector::from_iterator(vs.len(), vs.iter().map(|&v| self.0[v]))
    }

    /// True when the field vanishes on every boundary vertex.
    pub fn is_in_n0(&self, mesh: &PolyMesh) -> bool {
        self.0.iter().zip(&mesh.boundary_vertex).all(|(&u, &b)| !b || u == 0.0)
    }
}

/// Cell averages `(1/|P|) ∫_P p`, integrated on the centroid fan
/// sub-tetrahedra with a rule exact on quadratics.
pub fn interp_cell(mesh: &PolyMesh, p: impl Fn(&Point3) -> f64) -> CellField {
    CellField(
        (0..mesh.num_cells())
            .map(|c| {
                let integral: f64 = mesh.cell_subtets(c).iter().map(|t| t.integrate(&p)).sum();
                integral / mesh.cells[c].volume
            })
            .collect(),
    )
}

/// Face averages `(1/|f|) ∫_f F · n_f` by the fan-triangle centroid rule.
pub fn interp_face(mesh: &PolyMesh, field: impl Fn(&Point3) -> Point3) -> FaceField {
    FaceField(
        mesh.faces
            .iter()
            .enumerate()
            .map(|(f, face)| {
                let flux: f64 = mesh
                    .face_triangles(f)
                    .into_iter()
                    .map(|(a, b, c, area)| area * field(&((a + b + c) / 3.0)).dot(&face.normal))
                    .sum();
                flux / face.area
            })
            .collect(),
    )
}

/// Vertex values `u(V)`.
pub fn interp_node(mesh: &PolyMesh, u: impl Fn(&Point3) -> f64) -> NodeField {
    NodeField(mesh.vertices.iter().map(u).collect())
}

/// `(grad^h u)_e = (u(v2) - u(v1)) / |e|`.
pub fn discrete_grad(mesh: &PolyMesh, u: &NodeField) -> EdgeField {
    EdgeField(mesh.edges.iter().map(|e| (u[e.v2] - u[e.v1]) / e.length).collect())
}

/// `(div^h F)_P = (1/|P|) Σ_f |f| σ_{P,f} F_f`.
pub fn discrete_div(mesh: &PolyMesh, flux: &FaceField) -> CellField {
    CellField(
        mesh.cells
            .iter()
            .map(|cell| {
                let total: f64 =
                    cell.faces.iter().map(|cf| cf.sigma() * mesh.faces[cf.face].area * flux[cf.face]).sum();
                total / cell.volume
            })
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellWeightMode {
    /// `|P| / V_P` at every vertex; exact on constants.
    #[default]
    Uniform,
    /// Minimum-norm weights exact on linear functions.
    Moment,
}

impl std::str::FromStr for CellWeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(CellWeightMode::Uniform),
            "moment" => Ok(CellWeightMode::Moment),
            other => Err(format!("unknown cell weight mode '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DofError {
    #[error("no nonnegative linear-exact weights found for face {0}")]
    FaceWeights(usize),
    #[error("no nonnegative linear-exact weights found for cell {0}")]
    CellWeights(usize),
}

/// Vertex quadrature weights for cells and faces.
///
/// `cell[c][i]` belongs to the `i`-th local vertex of cell `c`; `face[f][l]`
/// to the `l`-th vertex of the loop of face `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureWeights {
    pub cell: Vec<Vec<f64>>,
    pub face: Vec<Vec<f64>>,
    pub mode: CellWeightMode,
}

/// Face weights are exact on linear functions; cell weights follow `mode`.
pub fn build_quadrature(mesh: &PolyMesh, mode: CellWeightMode) -> Result<QuadratureWeights, DofError> {
    let mut face = Vec::with_capacity(mesh.num_faces());
    for (f, fc) in mesh.faces.iter().enumerate() {
        let pts: Vec<Point3> = fc.vertices.iter().map(|&v| mesh.vertices[v]).collect();
        let weights = face_weights(&pts, fc.area, &fc.centroid, &fc.normal).ok_or(DofError::FaceWeights(f))?;
        face.push(weights);
    }
    let mut cell = Vec::with_capacity(mesh.num_cells());
    for (c, cl) in mesh.cells.iter().enumerate() {
        let weights = match mode {
            CellWeightMode::Uniform => vec![cl.volume / cl.num_vertices() as f64; cl.num_vertices()],
            CellWeightMode::Moment => {
                let pts: Vec<Point3> = cl.vertices.iter().map(|&v| mesh.vertices[v] - cl.centroid).collect();
                let w = min_norm_moment_weights(&pts, 3, cl.volume).ok_or(DofError::CellWeights(c))?;
                if w.iter().any(|&x| x < 0.0) {
                    return Err(DofError::CellWeights(c));
                }
                w
            }
        };
        cell.push(weights);
    }
    Ok(QuadratureWeights { cell, face, mode })
}

fn face_weights(points: &[Point3], area: f64, centroid: &Point3, normal: &Point3) -> Option<Vec<f64>> {
    let (t1, t2) = plane_basis(normal);
    let local: Vec<Point3> = points
        .iter()
        .map(|p| {
            let d = p - centroid;
            Point3::new(d.dot(&t1), d.dot(&t2), 0.0)
        })
        .collect();
    let weights = min_norm_moment_weights(&local, 2, area)?;
    if weights.iter().all(|&w| w >= 0.0) {
        return Some(weights);
    }
    let lumped = fan_lumped_weights(points, normal);
    lumped.iter().all(|&w| w >= 0.0).then_some(lumped)
}

/// Fan triangulation from the first vertex, each triangle giving a third of
/// its area to each corner. Exact on linears; nonnegative on convex faces.
fn fan_lumped_weights(points: &[Point3], normal: &Point3) -> Vec<f64> {
    let n = points.len();
    let mut lumped = vec![0.0; n];
    for l in 1..n - 1 {
        let a = 0.5 * (points[l] - points[0]).cross(&(points[l + 1] - points[0])).dot(normal);
        for k in [0, l, l + 1] {
            lumped[k] += a / 3.0;
        }
    }
    lumped
}

/// Minimum-norm `ω` with `Σ ω = total` and `Σ ω x = 0` for the first `dim`
/// coordinates of the (centered) points.
fn min_norm_moment_weights(points: &[Point3], dim: usize, total: f64) -> Option<Vec<f64>> {
    let n = points.len();
    let rows = dim + 1;
    let a = DMatrix::from_fn(rows, n, |r, j| if r == 0 { 1.0 } else { points[j][r - 1] });
    let mut rhs = DVector::zeros(rows);
    rhs[0] = total;
    let gram = &a * a.transpose();
    let y = gram.cholesky()?.solve(&rhs);
    let w = a.transpose() * y;
    Some(w.iter().copied().collect())
}

fn plane_basis(normal: &Point3) -> (Point3, Point3) {
    let helper = if normal.x.abs() < 0.9 { Point3::x() } else { Point3::y() };
    let t1 = normal.cross(&helper).normalize();
    let t2 = normal.cross(&t1);
    (t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn unit_cube() -> PolyMesh {
        generate_mesh(MeshKind::Hex, 1, 0.0, 0).unwrap()
    }

    fn reference_tet() -> PolyMesh {
        let v =
            vec![Point3::new(0., 0., 0.), Point3::new(1., 0., 0.), Point3::new(0., 1., 0.), Point3::new(0., 0., 1.)];
        PolyMesh::from_polyhedra(v, &[vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]]).unwrap()
    }

    #[test]
    fn cell_interpolant() {
        let cube = unit_cube();
        assert!(close(interp_cell(&cube, |_| 1.0)[0], 1.0, 1e-15));
        assert!(close(interp_cell(&cube, |x| x.x)[0], 0.5, 1e-15));
        assert!(close(interp_cell(&cube, |x| x.x * x.x)[0], 1.0 / 3.0, 1e-14));
    }

    #[test]
    fn face_interpolant() {
        let cube = unit_cube();
        let f_x1 = cube.faces.iter().position(|f| (f.centroid - Point3::new(1.0, 0.5, 0.5)).norm() < 1e-12).unwrap();
        let f_x0 = cube.faces.iter().position(|f| (f.centroid - Point3::new(0.0, 0.5, 0.5)).norm() < 1e-12).unwrap();
        // generator loops put +x normals on both x faces
        assert!(cube.faces[f_x1].normal.x > 0.0);
        assert!(close(interp_face(&cube, |_| Point3::x())[f_x1], 1.0, 1e-15));
        assert!(close(interp_face(&cube, |x| Point3::new(x.x, 0., 0.))[f_x0], 0.0, 1e-15));
        assert!(close(interp_face(&cube, |x| Point3::new(x.x, 0., 0.))[f_x1], 1.0, 1e-15));
    }

    #[test]
    fn node_interpolant() {
        let cube = unit_cube();
        let u = interp_node(&cube, |x| x.x + x.y);
        let v = cube.vertices.iter().position(|p| *p == Point3::new(1., 1., 0.)).unwrap();
        assert_eq!(u[v], 2.0);
        assert!(interp_node(&cube, |_| 0.0).is_in_n0(&cube));
        let s = interp_node(&generate_mesh(MeshKind::Hex, 2, 0.0, 0).unwrap(), |x| (std::f64::consts::PI * x.x).sin());
        assert!(close(s[1], 1.0, 1e-15));
    }

    #[test]
    fn gradient_on_edges() {
        let mesh = generate_mesh(MeshKind::Hex, 2, 0.0, 0).unwrap();
        let g = discrete_grad(&mesh, &interp_node(&mesh, |x| x.x));
        let e = mesh.edges.iter().position(|e| e.v1 == 0 && e.v2 == 1).unwrap();
        assert!(close(g[e], 1.0, 1e-15));
        let stretched = PolyMesh::from_polyhedra(
            vec![Point3::new(0., 0., 0.), Point3::new(1., 0., 0.), Point3::new(0., 1., 0.), Point3::new(0., 0., 2.)],
            &[vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]],
        )
        .unwrap();
        let g = discrete_grad(&stretched, &interp_node(&stretched, |x| 2.0 * x.z));
        let e = stretched.edges.iter().position(|e| e.v1 == 0 && e.v2 == 3).unwrap();
        assert!(close(g[e], 2.0, 1e-15));
        let flat = discrete_grad(&mesh, &interp_node(&mesh, |_| 3.5));
        assert!(flat.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn divergence_of_interpolants() {
        let cube = unit_cube();
        let c = discrete_div(&cube, &interp_face(&cube, |_| Point3::new(0.3, -1.0, 2.0)));
        assert!(c[0].abs() < 1e-15);
        let d = discrete_div(&cube, &interp_face(&cube, |x| Point3::new(x.x, 0., 0.)));
        assert!(close(d[0], 1.0, 1e-15));
        let tet = reference_tet();
        let d = discrete_div(&tet, &interp_face(&tet, |x| *x));
        assert!(close(d[0], 3.0, 1e-14));
    }

    #[test]
    fn quadrature_weights() {
        let tet = reference_tet();
        let q = build_quadrature(&tet, CellWeightMode::Uniform).unwrap();
        let axis_face = tet.faces.iter().position(|f| f.vertices == vec![0, 1, 2]).unwrap();
        for w in &q.face[axis_face] {
            assert!(close(*w, 1.0 / 6.0, 1e-15));
        }
        let cube = unit_cube();
        let q = build_quadrature(&cube, CellWeightMode::Uniform).unwrap();
        for fw in &q.face {
            for w in fw {
                assert!(close(*w, 0.25, 1e-15));
            }
        }
        assert!(q.cell[0].iter().all(|&w| w == 0.125));
        let q = build_quadrature(&cube, CellWeightMode::Moment).unwrap();
        assert!(q.cell[0].iter().all(|&w| close(w, 0.125, 1e-14)));
    }

    #[test]
    fn fan_lumping_fallback_is_linear_exact() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, -0.05, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(1.0, 0.05, 0.0),
        ];
        let g = crate::mesh::face_geometry(&pts).unwrap();
        assert!(face_weights(&pts, g.area, &g.centroid, &g.normal).unwrap().iter().all(|&x| x >= 0.0));
        let w = fan_lumped_weights(&pts, &g.normal);
        assert!(w.iter().all(|&x| x >= 0.0));
        let sum: f64 = w.iter().sum();
        let first: Point3 = w.iter().zip(&pts).map(|(w, p)| *w * p).sum();
        assert!(close(sum, g.area, 1e-13));
        assert!((first - g.area * g.centroid).norm() < 1e-13);
    }
}
