//! Oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3};
use polymfd::mesh::PolyMesh;

pub fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(a, b, c))
}

pub fn full_spd() -> Matrix3<f64> {
    Matrix3::new(2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0)
}

/// Global P1 finite element stiffness matrix on a tetrahedral mesh, computed
/// from barycentric coordinates.
pub fn p1_stiffness(mesh: &PolyMesh, k: &Matrix3<f64>) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut global = DMatrix::zeros(n, n);
    for cell in &mesh.cells {
        assert_eq!(cell.vertices.len(), 4, "P1 oracle needs tetrahedra");
        let mut m = Matrix4::zeros();
        for (i, &v) in cell.vertices.iter().enumerate() {
            let x = mesh.vertices[v];
            m[(i, 0)] = 1.0;
            m[(i, 1)] = x.x;
            m[(i, 2)] = x.y;
            m[(i, 3)] = x.z;
        }
        let volume = m.determinant().abs() / 6.0;
        // column j of the inverse holds the coefficients of the j-th hat function
        let inv = m.try_inverse().unwrap();
        let grads: Vec<Vector3<f64>> = (0..4).map(|j| Vector3::new(inv[(1, j)], inv[(2, j)], inv[(3, j)])).collect();
        for (i, &vi) in cell.vertices.iter().enumerate() {
            for (j, &vj) in cell.vertices.iter().enumerate() {
                global[(vi, vj)] += volume * grads[i].dot(&(k * grads[j]));
            }
        }
    }
    global
}
