use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    solve_system, Dof, LinearSystem, ProblemSpec, SolveError, SolveReport, SolverOptions, SparseMatrix, SystemKind,
};
use crate::dof::{interp_cell, interp_node, CellField, FaceField, NodeField};
use crate::forms::{Forms, LocalElementMatrices, MaterialSample};
use crate::mesh::PolyMesh;

/// Streamline-diffusion switch and the multiplier of its parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdConfig {
    pub enabled: bool,
    pub tau_scale: f64,
}

impl Default for SdConfig {
    fn default() -> Self {
        SdConfig { enabled: false, tau_scale: 1.0 }
    }
}

/// `τ_P = scale · h_P / (2‖β̃‖) · min(1, Pe_P / 3)` with `Pe_P = ‖β̃‖ h_P / (2 λ_min(K̃_P))`;
/// zero when `‖β̃‖ ≤ 1e-14`.
pub fn sd_tau(h: f64, beta: &Vector3<f64>, k: &Matrix3<f64>, scale: f64) -> f64 {
    let speed = beta.norm();
    if speed <= 1e-14 {
        return 0.0;
    }
    let lambda_min = SymmetricEigen::new(*k).eigenvalues.min();
    let peclet = speed * h / (2.0 * lambda_min);
    scale * h / (2.0 * speed) * (peclet / 3.0).min(1.0)
}

/// Row vector of `v ↦ β̃ · grad^R v` on a cell, i.e. `(1/|P|) β̃ᵀ K̃⁻¹ Aᵀ`.
pub fn advective_row(local: &LocalElementMatrices, beta: &Vector3<f64>) -> DVector<f64> {
    let beta = DVector::from_column_slice(beta.as_slice());
    local.gradient_operator().transpose() * beta
}

/// Nodal operator restricted to interior vertices, with boundary values lifted.
#[derive(Clone, Debug)]
pub struct NodalSystem {
    pub system: LinearSystem,
    /// Unknown index of every vertex, `None` on the boundary.
    pub node_dof: Vec<Option<usize>>,
    /// Dirichlet values (zero at interior vertices).
    pub boundary_values: NodeField,
}

impl NodalSystem {
    /// Full nodal field from interior unknowns.
    pub fn expand(&self, x: &[f64]) -> NodeField {
        let mut u = self.boundary_values.clone();
        for (v, dof) in self.node_dof.iter().enumerate() {
            if let Some(i) = dof {
                u[v] = x[*i];
            }
        }
        u
    }
}

/// `Σ_P scatter(M_N^P)` over all vertices, boundary included.
pub fn nodal_stiffness(mesh: &PolyMesh, forms: &Forms) -> SparseMatrix {
    let mut triplets = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let m = &forms.cells[c].mn;
        for (i, &vi) in cell.vertices.iter().enumerate() {
            for (j, &vj) in cell.vertices.iter().enumerate() {
                triplets.push((vi, vj, m[(i, j)]));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), triplets)
}

fn assemble_node_operator(
    mesh: &PolyMesh,
    forms: &Forms,
    material: &MaterialSample,
    spec: &ProblemSpec,
    kind: SystemKind,
    local: impl Fn(usize) -> DMatrix<f64>,
) -> Result<NodalSystem, SolveError> {
    let mut node_dof = vec![None; mesh.num_vertices()];
    let mut dofs = Vec::new();
    for (v, &on_boundary) in mesh.boundary_vertex.iter().enumerate() {
        if !on_boundary {
            node_dof[v] = Some(dofs.len());
            dofs.push(Dof::Node(v));
        }
    }
    if dofs.is_empty() {
        return Err(SolveError::EmptyInterior);
    }
    let mut boundary_values = interp_node(mesh, &*spec.dirichlet);
    for (v, dof) in node_dof.iter().enumerate() {
        if dof.is_some() {
            boundary_values[v] = 0.0;
        }
    }

    let mut rhs = vec![0.0; dofs.len()];
    let mut triplets = Vec::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        let m = local(c);
        let weights = &forms.quadrature.cell[c];
        for (i, &vi) in cell.vertices.iter().enumerate() {
            let Some(row) = node_dof[vi] else { continue };
            rhs[row] += material.g[c] * weights[i];
            for (j, &vj) in cell.vertices.iter().enumerate() {
                match node_dof[vj] {
                    Some(col) => triplets.push((row, col, m[(i, j)])),
                    None => rhs[row] -= m[(i, j)] * boundary_values[vj],
                }
            }
        }
    }
    let n = dofs.len();
    Ok(NodalSystem {
        system: LinearSystem { matrix: SparseMatrix::from_triplets(n, n, triplets), rhs, dofs, kind },
        node_dof,
        boundary_values,
    })
}

/// Nodal method: `[grad^h u, grad^h v]_E = (g̃, v)_N` for interior test functions.
pub fn assemble_nodal(
    mesh: &PolyMesh,
    forms: &Forms,
    material: &MaterialSample,
    spec: &ProblemSpec,
) -> Result<NodalSystem, SolveError> {
    assemble_node_operator(mesh, forms, material, spec, SystemKind::Spd, |c| forms.cells[c].mn.clone())
}

/// Nodal advection–diffusion method: adds `(β̃ · grad^R u, v)_N` and, when
/// enabled, the streamline-diffusion term `[τ β̃ · grad^R u, β̃ · grad^R v]_P`.
pub fn assemble_advection(
    mesh: &PolyMesh,
    forms: &Forms,
    material: &MaterialSample,
    spec: &ProblemSpec,
    sd: &SdConfig,
) -> Result<NodalSystem, SolveError> {
    assemble_node_operator(mesh, forms, material, spec, SystemKind::General, |c| {
        let local = &forms.cells[c];
        let row = advective_row(local, &material.beta[c]);
        let weights = DVector::from_column_slice(&forms.quadrature.cell[c]);
        let mut m = &local.mn + &weights * row.transpose();
        if sd.enabled {
            let tau = sd_tau(mesh.cells[c].diameter, &material.beta[c], &material.k[c], sd.tau_scale);
            m += &row * row.transpose() * (tau * local.volume);
        }
        m
    })
}

#[derive(Clone, Debug)]
pub struct NodalSolution {
    pub u: NodeField,
    pub report: SolveReport,
}

pub fn solve_nodal(
    mesh: &PolyMesh,
    forms: &Forms,
    material: &MaterialSample,
    spec: &ProblemSpec,
    options: &SolverOptions,
) -> Result<NodalSolution, SolveError> {
    let sys = assemble_nodal(mesh, forms, material, spec)?;
    let report = solve_system(&sys.system, options)?;
    Ok(NodalSolution { u: sys.expand(&report.solution), report })
}

pub fn solve_advection(
    mesh: &PolyMesh,
    forms: &Forms,
    material: &MaterialSample,
    spec: &ProblemSpec,
    sd: &SdConfig,
    options: &SolverOptions,
) -> Result<NodalSolution, SolveError> {
    let sys = assemble_advection(mesh, forms, material, spec, sd)?;
    let report = solve_system(&sys.system, options)?;
    Ok(NodalSolution { u: sys.expand(&report.solution), report })
}

/// Saddle-point system of the mixed method. Unknowns: face fluxes, then cell
/// pressures.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub system: LinearSystem,
    pub n_faces: usize,
    pub n_cells: usize,
}

/// Mixed method:
///
/// ```text
/// [F, G]_F + [p, div^h G]_P = Σ_{f ⊂ ∂Ω} σ|f| u^D(x_f) G_f
/// [div^h F, q]_P            = −[Π_P g, q]_P
/// ```
///
/// With this sign choice `F_h` approximates `K ∇u` and `p_h` approximates `u`.
pub fn assemble_mixed(mesh: &PolyMesh, forms: &Forms, spec: &ProblemSpec) -> MixedSystem {
    let nf = mesh.num_faces();
    let nc = mesh.num_cells();
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; nf + nc];
    let source = interp_cell(mesh, &*spec.g);
    for (c, cell) in mesh.cells.iter().enumerate() {
        let m = &forms.cells[c].mf;
        for (a, fa) in cell.faces.iter().enumerate() {
            for (b, fb) in cell.faces.iter().enumerate() {
                triplets.push((fa.face, fb.face, fa.sigma() * fb.sigma() * m[(a, b)]));
            }
            let coupling = fa.sigma() * mesh.faces[fa.face].area;
            triplets.push((fa.face, nf + c, coupling));
            triplets.push((nf + c, fa.face, coupling));
            if mesh.boundary_face[fa.face] {
                rhs[fa.face] += coupling * (spec.dirichlet)(&mesh.faces[fa.face].centroid);
            }
        }
        rhs[nf + c] = -cell.volume * source[c];
    }
    let dofs = (0..nf).map(Dof::Face).chain((0..nc).map(Dof::Cell)).collect();
    MixedSystem {
        system: LinearSystem {
            matrix: SparseMatrix::from_triplets(nf + nc, nf + nc, triplets),
            rhs,
            dofs,
            kind: SystemKind::Saddle,
        },
        n_faces: nf,
        n_cells: nc,
    }
}

/// Mixed solution with zero-mean pressure.
#[derive(Clone, Debug)]
pub struct MixedSolution {
    pub flux: FaceField,
    pub pressure: CellField,
    /// Constant removed from the computed pressure to make its mean zero.
    pub multiplier: f64,
    pub report: SolveReport,
}

impl MixedSolution {
    /// `Σ_P |P| p_P`.
    pub fn pressure_integral(&self, mesh: &PolyMesh) -> f64 {
        mesh.cells.iter().zip(self.pressure.iter()).map(|(c, p)| c.volume * p).sum()
    }
}

pub fn solve_mixed(
    mesh: &PolyMesh,
    forms: &Forms,
    spec: &ProblemSpec,
    options: &SolverOptions,
) -> Result<MixedSolution, SolveError> {
    let sys = assemble_mixed(mesh, forms, spec);
    let report = solve_system(&sys.system, options)?;
    let flux = FaceField(report.solution[..sys.n_faces].to_vec());
    let mut pressure = CellField(report.solution[sys.n_faces..].to_vec());
    let mean = mesh.cells.iter().zip(pressure.iter()).map(|(c, p)| c.volume * p).sum::<f64>() / mesh.total_volume();
    for p in pressure.iter_mut() {
        *p -= mean;
    }
    Ok(MixedSolution { flux, pressure, multiplier: mean, report })
}
