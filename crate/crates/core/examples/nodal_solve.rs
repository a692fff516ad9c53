//! Solve `−div(K ∇u) = g` with the nodal method on a tetrahedral mesh, then
//! reconstruct gradients and the piecewise linear postprocessed solution.
//!
//! ```text
//! cargo run --example nodal_solve
//! ```

use nalgebra::{Matrix3, Vector3};
use polymfd::dof::CellWeightMode;
use polymfd::forms::StabilizationConfig;
use polymfd::mesh::{generate_mesh, MeshKind};
use polymfd::post::{compute_errors, postprocess_nodal, reconstruct_gradient, Fields};
use polymfd::solve::{discretize, solve_nodal, ProblemSpec, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = generate_mesh(MeshKind::Tet, 4, 0.0, 0)?;
    let spec = ProblemSpec::trig(Matrix3::identity(), Vector3::zeros());
    let (material, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform)?;
    let solution = solve_nodal(&mesh, &forms, &material, &spec, &SolverOptions::default())?;
    println!(
        "{} cells, {} iterations of {}, relative residual {:.2e}",
        mesh.num_cells(),
        solution.report.iterations,
        solution.report.method,
        solution.report.residual
    );

    let centre = Vector3::new(0.5, 0.5, 0.5);
    let (nearest, _) = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - centre).norm()))
        .fold((0, f64::INFINITY), |best, x| if x.1 < best.1 { x } else { best });
    println!("u_h at {:?} = {:.6} (exact 1)", mesh.vertices[nearest].as_slice(), solution.u[nearest]);

    let gradients = reconstruct_gradient(&mesh, &forms, &solution.u);
    let post = postprocess_nodal(&mesh, &forms, &solution.u);
    let x = mesh.cells[0].centroid;
    println!("cell 0: grad^R = {:.4?}, u^R(x_P) = {:.4}", gradients[0].as_slice(), post.eval(0, &x));

    let errors = compute_errors(&mesh, &forms, &spec, Fields { nodal: Some(&solution.u), ..Default::default() })?;
    println!(
        "errors: nodal {:.3e}, gradient {:.3e}, postprocessed {:.3e}",
        errors.err_nodal.unwrap(),
        errors.err_grad.unwrap(),
        errors.err_post.unwrap()
    );
    Ok(())
}
