//! Reconstructions, piecewise linear postprocessing, error norms and
//! convergence tables.

use std::fmt;

use nalgebra::{DVector, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::dof::{interp_cell, interp_face, interp_node, CellField, CellWeightMode, FaceField, NodeField};
use crate::forms::{Forms, LocalElementMatrices, StabilizationConfig};
use crate::mesh::{Point3, PolyMesh};
use crate::solve::{
    discretize, solve_advection, solve_mixed, solve_nodal, Method, ProblemSpec, SdConfig, SolveError, SolverOptions,
};

/// Errors below this value count as exact when computing rates.
pub const EXACT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PostError {
    #[error("the problem has no exact solution attached")]
    MissingExact,
    #[error("bad refinement sequence: {0}")]
    BadSequence(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn to_vector3(v: DVector<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// `G^R = (1/|P|) Rᵀ G|_P` on one cell.
pub fn reconstruct_vector_cell(
    mesh: &PolyMesh,
    local: &LocalElementMatrices,
    cell: usize,
    g: &FaceField,
) -> Vector3<f64> {
    to_vector3(local.r.transpose() * g.restrict(mesh, cell) / local.volume)
}

/// `G^R` on every cell.
pub fn reconstruct_vector(mesh: &PolyMesh, forms: &Forms, g: &FaceField) -> Vec<Vector3<f64>> {
    (0..mesh.num_cells()).map(|c| reconstruct_vector_cell(mesh, &forms.cells[c], c, g)).collect()
}

/// `grad^R v = (1/|P|) K̃⁻¹ Aᵀ v|_P` on one cell.
pub fn reconstruct_gradient_cell(
    mesh: &PolyMesh,
    local: &LocalElementMatrices,
    cell: usize,
    v: &NodeField,
) -> Vector3<f64> {
    to_vector3(local.gradient_operator() * v.restrict(mesh, cell))
}

/// `grad^R v` on every cell.
pub fn reconstruct_gradient(mesh: &PolyMesh, forms: &Forms, v: &NodeField) -> Vec<Vector3<f64>> {
    (0..mesh.num_cells()).map(|c| reconstruct_gradient_cell(mesh, &forms.cells[c], c, v)).collect()
}

/// Cellwise linear field `x ↦ c_P + s_P · (x − x_P)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellLinearField {
    pub constant: Vec<f64>,
    pub slope: Vec<Vector3<f64>>,
    pub centers: Vec<Point3>,
}

impl CellLinearField {
    pub fn eval(&self, cell: usize, x: &Point3) -> f64 {
        self.constant[cell] + self.slope[cell].dot(&(x - self.centers[cell]))
    }
}

/// `p^R|_P = p_P + (1/|P|)(K̃⁻¹ Rᵀ F|_P) · (x − x_P)`.
pub fn postprocess_mixed(mesh: &PolyMesh, forms: &Forms, flux: &FaceField, pressure: &CellField) -> CellLinearField {
    let slope = (0..mesh.num_cells())
        .map(|c| {
            let local = &forms.cells[c];
            local.k_inv * reconstruct_vector_cell(mesh, local, c, flux)
        })
        .collect();
    CellLinearField { constant: pressure.0.clone(), slope, centers: mesh.cells.iter().map(|c| c.centroid).collect() }
}

/// `u^R|_P = (1/|P|) Σ_i ω_P^i u(V_i) + grad^R u · (x − x_P)`.
pub fn postprocess_nodal(mesh: &PolyMesh, forms: &Forms, u: &NodeField) -> CellLinearField {
    let constant = mesh
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let w = &forms.quadrature.cell[c];
            cell.vertices.iter().zip(w).map(|(&v, w)| w * u[v]).sum::<f64>() / cell.volume
        })
        .collect();
    CellLinearField {
        constant,
        slope: reconstruct_gradient(mesh, forms, u),
        centers: mesh.cells.iter().map(|c| c.centroid).collect(),
    }
}

/// Discrete solution fields to compare against the exact solution.
#[derive(Clone, Copy, Debug, Default)]
pub struct Fields<'a> {
    pub nodal: Option<&'a NodeField>,
    pub flux: Option<&'a FaceField>,
    pub pressure: Option<&'a CellField>,
}

/// Errors of one run. Norms of fields that were not computed are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub h: f64,
    pub n_cells: usize,
    pub nodal_dofs: usize,
    pub mixed_dofs: usize,
    /// `sqrt(Σ_P Σ_i ω_P^i (u_h − u)(V_i)²)`.
    pub err_nodal: Option<f64>,
    /// `sqrt(Σ_P |P| (p_h − Π_P p)²)` with `p = u − mean(u)`.
    pub err_cell: Option<f64>,
    /// `sqrt(Σ_P δᵀ M_F^P δ)`, `δ = (F_h − Π_F(K∇u))|_P`.
    pub err_flux: Option<f64>,
    /// `sqrt(Σ_P |P| ‖grad^R u_h − ∇u(x_P)‖²)`.
    pub err_grad: Option<f64>,
    /// L2 error of `p^R` against `u − mean(u)` when mixed fields are given,
    /// otherwise of `u^R` against `u`.
    pub err_post: Option<f64>,
}

impl ErrorReport {
    pub fn errors(&self) -> [Option<f64>; 5] {
        [self.err_nodal, self.err_cell, self.err_flux, self.err_grad, self.err_post]
    }
}

pub const ERROR_COLUMNS: [&str; 5] = ["err_nodal", "err_cell", "err_flux", "err_grad", "err_post"];

fn l2_error(mesh: &PolyMesh, field: &CellLinearField, exact: impl Fn(&Point3) -> f64) -> f64 {
    let mut sum = 0.0;
    for c in 0..mesh.num_cells() {
        for tet in mesh.cell_subtets(c) {
            sum += tet.integrate(|x| (field.eval(c, x) - exact(x)).powi(2));
        }
    }
    sum.sqrt()
}

pub fn compute_errors(
    mesh: &PolyMesh,
    forms: &Forms,
    spec: &ProblemSpec,
    fields: Fields<'_>,
) -> Result<ErrorReport, PostError> {
    let exact = spec.exact.as_ref().ok_or(PostError::MissingExact)?;
    let mut report = ErrorReport {
        h: mesh.h,
        n_cells: mesh.num_cells(),
        nodal_dofs: 0,
        mixed_dofs: 0,
        err_nodal: None,
        err_cell: None,
        err_flux: None,
        err_grad: None,
        err_post: None,
    };

    if let Some(u) = fields.nodal {
        report.nodal_dofs = mesh.boundary_vertex.iter().filter(|b| !**b).count();
        let target = interp_node(mesh, &*exact.u);
        let mut nodal = 0.0;
        let mut grad = 0.0;
        for (c, cell) in mesh.cells.iter().enumerate() {
            for (&v, w) in cell.vertices.iter().zip(&forms.quadrature.cell[c]) {
                nodal += w * (u[v] - target[v]).powi(2);
            }
            let g = reconstruct_gradient_cell(mesh, &forms.cells[c], c, u);
            grad += cell.volume * (g - (exact.grad)(&cell.centroid)).norm_squared();
        }
        report.err_nodal = Some(nodal.sqrt());
        report.err_grad = Some(grad.sqrt());
        report.err_post = Some(l2_error(mesh, &postprocess_nodal(mesh, forms, u), &*exact.u));
    }

    if let (Some(flux), Some(pressure)) = (fields.flux, fields.pressure) {
        report.mixed_dofs = mesh.num_faces() + mesh.num_cells();
        let cell_mean = interp_cell(mesh, &*exact.u);
        let mean =
            mesh.cells.iter().zip(cell_mean.iter()).map(|(c, p)| c.volume * p).sum::<f64>() / mesh.total_volume();
        let cell = mesh
            .cells
            .iter()
            .zip(pressure.iter().zip(cell_mean.iter()))
            .map(|(c, (p, q))| c.volume * (p - (q - mean)).powi(2))
            .sum::<f64>();
        report.err_cell = Some(cell.sqrt());

        let target = interp_face(mesh, |x| spec.exact_flux(x).unwrap_or_default());
        let delta = FaceField(flux.iter().zip(target.iter()).map(|(a, b)| a - b).collect());
        let energy = (0..mesh.num_cells())
            .map(|c| {
                let d = delta.restrict(mesh, c);
                d.dot(&(&forms.cells[c].mf * &d))
            })
            .sum::<f64>();
        report.err_flux = Some(energy.max(0.0).sqrt());
        let post = postprocess_mixed(mesh, forms, flux, pressure);
        report.err_post = Some(l2_error(mesh, &post, |x| (exact.u)(x) - mean));
    }
    Ok(report)
}

/// Observed order between two consecutive levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    Value(f64),
    /// Both errors are below [`EXACT_THRESHOLD`].
    Exact,
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Value(r) => write!(f, "{r:.4}"),
            Rate::Exact => f.write_str("exact"),
        }
    }
}

impl Rate {
    pub fn between(e1: f64, h1: f64, e2: f64, h2: f64) -> Rate {
        if e1 <= EXACT_THRESHOLD && e2 <= EXACT_THRESHOLD {
            Rate::Exact
        } else {
            Rate::Value((e1 / e2).ln() / (h1 / h2).ln())
        }
    }

    /// `true` for exact rates and for values at least `min`.
    pub fn at_least(&self, min: f64) -> bool {
        match self {
            Rate::Exact => true,
            Rate::Value(r) => *r >= min,
        }
    }
}

/// Rates between each report and its predecessor, one array per pair, in
/// [`ERROR_COLUMNS`] order.
pub fn convergence_rates(reports: &[ErrorReport]) -> Result<Vec<[Option<Rate>; 5]>, PostError> {
    if reports.len() < 2 {
        return Err(PostError::BadSequence(format!("need at least 2 levels, got {}", reports.len())));
    }
    let mut rates = Vec::with_capacity(reports.len() - 1);
    for pair in reports.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if !(b.h < a.h) {
            return Err(PostError::BadSequence(format!("h must decrease strictly, got {} then {}", a.h, b.h)));
        }
        let (ea, eb) = (a.errors(), b.errors());
        let mut row = [None; 5];
        for k in 0..5 {
            if let (Some(e1), Some(e2)) = (ea[k], eb[k]) {
                row[k] = Some(Rate::between(e1, a.h, e2, b.h));
            }
        }
        rates.push(row);
    }
    Ok(rates)
}

/// Error table of a refinement study.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ErrorReport>,
    pub rates: Vec<[Option<Rate>; 5]>,
}

impl ConvergenceReport {
    pub fn new(rows: Vec<ErrorReport>) -> Result<Self, PostError> {
        let rates = convergence_rates(&rows)?;
        Ok(ConvergenceReport { rows, rates })
    }

    /// Rate of column `name` between the last two levels.
    pub fn final_rate(&self, name: &str) -> Option<Rate> {
        let k = ERROR_COLUMNS.iter().position(|c| *c == name)?;
        self.rates.last()?[k]
    }

    /// CSV with columns `h, n_cells, err_*, rate_*`; the first row has empty rates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,n_cells");
        for c in ERROR_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        for c in ERROR_COLUMNS {
            out.push_str(",rate_");
            out.push_str(&c[4..]);
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{:.6e},{}", row.h, row.n_cells));
            for e in row.errors() {
                out.push(',');
                if let Some(e) = e {
                    out.push_str(&format!("{e:.6e}"));
                }
            }
            for k in 0..5 {
                out.push(',');
                if let Some(Some(r)) = i.checked_sub(1).map(|j| self.rates[j][k]) {
                    out.push_str(&r.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Discretization settings shared by every level of a study.
#[derive(Clone, Copy, Debug, Default)]
pub struct StudySettings {
    pub stabilization: StabilizationConfig,
    pub cell_weights: CellWeightMode,
    pub sd: SdConfig,
    pub solver: SolverOptions,
}

/// Solves `spec` with `method` on every mesh and tabulates the errors.
pub fn convergence_study(
    meshes: &[PolyMesh],
    spec: &ProblemSpec,
    method: Method,
    settings: &StudySettings,
) -> Result<ConvergenceReport, PostError> {
    if spec.exact.is_none() {
        return Err(PostError::MissingExact);
    }
    let mut rows = Vec::with_capacity(meshes.len());
    for mesh in meshes {
        let (material, forms) = discretize(mesh, spec, settings.stabilization, settings.cell_weights)?;
        let nodal = match method {
            Method::Nodal | Method::Both => Some(solve_nodal(mesh, &forms, &material, spec, &settings.solver)?.u),
            Method::Advect => Some(solve_advection(mesh, &forms, &material, spec, &settings.sd, &settings.solver)?.u),
            Method::Mixed => None,
        };
        let mixed = if method.runs_mixed() { Some(solve_mixed(mesh, &forms, spec, &settings.solver)?) } else { None };
        let fields = Fields {
            nodal: nodal.as_ref(),
            flux: mixed.as_ref().map(|m| &m.flux),
            pressure: mixed.as_ref().map(|m| &m.pressure),
        };
        rows.push(compute_errors(mesh, &forms, spec, fields)?);
    }
    ConvergenceReport::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dof::build_quadrature;
    use crate::forms::build_forms;
    use crate::mesh::{generate_mesh, MeshKind};
    use nalgebra::Matrix3;

    fn setup(kind: MeshKind, n: usize, k: Matrix3<f64>) -> (PolyMesh, Forms) {
        let mesh = generate_mesh(kind, n, 0.0, 0).unwrap();
        let q = build_quadrature(&mesh, CellWeightMode::Uniform).unwrap();
        let forms = build_forms(&mesh, &vec![k; mesh.num_cells()], q, StabilizationConfig::default()).unwrap();
        (mesh, forms)
    }

    fn report(h: f64, e: f64) -> ErrorReport {
        ErrorReport {
            h,
            n_cells: 1,
            nodal_dofs: 0,
            mixed_dofs: 0,
            err_nodal: Some(e),
            err_cell: None,
            err_flux: None,
            err_grad: None,
            err_post: None,
        }
    }

    #[test]
    fn vector_reconstruction_on_cube() {
        let (mesh, forms) = setup(MeshKind::Hex, 1, Matrix3::identity());
        let g = interp_face(&mesh, |_| Vector3::new(2.0, -1.0, 3.0));
        assert!((reconstruct_vector(&mesh, &forms, &g)[0] - Vector3::new(2.0, -1.0, 3.0)).norm() < 1e-14);
        let zero = reconstruct_vector(&mesh, &forms, &FaceField::zeros(mesh.num_faces()));
        assert_eq!(zero[0], Vector3::zeros());
    }

    #[test]
    fn gradient_reconstruction_on_cube() {
        let (mesh, forms) = setup(MeshKind::Hex, 1, Matrix3::identity());
        let v = interp_node(&mesh, |x| 2.0 * x.x);
        assert!((reconstruct_gradient(&mesh, &forms, &v)[0] - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-14);
        let c = interp_node(&mesh, |_| 5.0);
        assert!(reconstruct_gradient(&mesh, &forms, &c)[0].norm() < 1e-14);
    }

    #[test]
    fn mixed_postprocessing_scales_with_k() {
        let flux = |mesh: &PolyMesh| interp_face(mesh, |_| Vector3::new(2.0, 0.0, 0.0));
        let (mesh, forms) = setup(MeshKind::Hex, 1, Matrix3::identity());
        let p = CellField(vec![0.0]);
        let one = postprocess_mixed(&mesh, &forms, &flux(&mesh), &p);
        let (mesh2, forms2) = setup(MeshKind::Hex, 1, 2.0 * Matrix3::identity());
        let two = postprocess_mixed(&mesh2, &forms2, &flux(&mesh2), &p);
        assert!((one.slope[0] - 2.0 * two.slope[0]).norm() < 1e-14);
        let flat = postprocess_mixed(&mesh, &forms, &FaceField::zeros(mesh.num_faces()), &p);
        assert_eq!(flat.slope[0], Vector3::zeros());
    }

    #[test]
    fn nodal_postprocessing_of_constants() {
        let (mesh, forms) = setup(MeshKind::Tet, 1, Matrix3::identity());
        let u = postprocess_nodal(&mesh, &forms, &interp_node(&mesh, |_| 4.0));
        for c in 0..mesh.num_cells() {
            assert!((u.eval(c, &Point3::new(0.3, 0.2, 0.1)) - 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_error_of_shifted_pressure() {
        let (mesh, forms) = setup(MeshKind::Hex, 1, Matrix3::identity());
        let spec = ProblemSpec::affine(Matrix3::identity(), Vector3::zeros(), -0.5, Vector3::new(1.0, 0.0, 0.0));
        let p = CellField(vec![1.0]);
        let flux = interp_face(&mesh, |_| Vector3::new(1.0, 0.0, 0.0));
        let r = compute_errors(&mesh, &forms, &spec, Fields { flux: Some(&flux), pressure: Some(&p), nodal: None })
            .unwrap();
        assert!((r.err_cell.unwrap() - 1.0).abs() < 1e-14);
        assert!(r.err_flux.unwrap() < 1e-14);
        let u = interp_node(&mesh, |x| x.x - 0.5);
        let r = compute_errors(&mesh, &forms, &spec, Fields { nodal: Some(&u), ..Default::default() }).unwrap();
        assert_eq!(r.err_nodal, Some(0.0));
        let missing = ProblemSpec::new(Matrix3::identity());
        assert!(matches!(compute_errors(&mesh, &forms, &missing, Fields::default()), Err(PostError::MissingExact)));
    }

    #[test]
    fn rates() {
        let r = convergence_rates(&[report(0.2, 0.1), report(0.1, 0.025)]).unwrap();
        assert!(matches!(r[0][0], Some(Rate::Value(x)) if (x - 2.0).abs() < 1e-14));
        let r = convergence_rates(&[report(0.2, 0.1), report(0.1, 0.05)]).unwrap();
        assert!(matches!(r[0][0], Some(Rate::Value(x)) if (x - 1.0).abs() < 1e-14));
        let r = convergence_rates(&[report(0.2, 0.0), report(0.1, 0.0)]).unwrap();
        assert_eq!(r[0][0], Some(Rate::Exact));
        assert_eq!(r[0][1], None);
        assert!(matches!(convergence_rates(&[report(0.2, 0.1)]), Err(PostError::BadSequence(_))));
        assert!(matches!(convergence_rates(&[report(0.1, 0.1), report(0.2, 0.1)]), Err(PostError::BadSequence(_))));
    }

    #[test]
    fn csv_layout() {
        let table = ConvergenceReport::new(vec![report(0.5, 0.1), report(0.25, 0.025)]).unwrap();
        let csv = table.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "h,n_cells,err_nodal,err_cell,err_flux,err_grad,err_post,rate_nodal,rate_cell,rate_flux,rate_grad,rate_post"
        );
        assert_eq!(lines[1], "5.000000e-1,1,1.000000e-1,,,,,,,,,");
        assert_eq!(lines[2], "2.500000e-1,1,2.500000e-2,,,,,2.0000,,,,");
    }
}
