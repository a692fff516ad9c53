use nalgebra::{Matrix3, Vector3};
use polymfd::dof::{interp_cell, interp_face, interp_node, CellWeightMode};
use polymfd::forms::StabilizationConfig;
use polymfd::mesh::{generate_mesh, MeshKind};
use polymfd::solve::{discretize, solve_mixed, solve_nodal, ProblemSpec, SolverOptions};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn mixed_patch_on_perturbed_hex() {
    let mesh = generate_mesh(MeshKind::PerturbedHex, 3, 0.2, 1).unwrap();
    let spec = ProblemSpec::linear_patch(Matrix3::identity());
    let (_, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
    let sol = solve_mixed(&mesh, &forms, &spec, &SolverOptions::default()).unwrap();
    let flux = interp_face(&mesh, |_| Vector3::new(2.0, -1.0, 3.0));
    let u = interp_cell(&mesh, |x| 1.0 + 2.0 * x.x - x.y + 3.0 * x.z);
    let mean = mesh.cells.iter().zip(u.iter()).map(|(c, p)| c.volume * p).sum::<f64>() / mesh.total_volume();
    let target: Vec<f64> = u.iter().map(|p| p - mean).collect();
    assert!(max_diff(&sol.flux, &flux) < 1e-9);
    assert!(max_diff(&sol.pressure, &target) < 1e-9);
}

#[test]
fn nodal_patch_on_perturbed_hex() {
    let mesh = generate_mesh(MeshKind::PerturbedHex, 3, 0.2, 1).unwrap();
    let spec = ProblemSpec::linear_patch(Matrix3::identity());
    let (material, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
    let sol = solve_nodal(&mesh, &forms, &material, &spec, &SolverOptions::default()).unwrap();
    let u = interp_node(&mesh, |x| 1.0 + 2.0 * x.x - x.y + 3.0 * x.z);
    assert!(max_diff(&sol.u, &u) < 1e-9);
}
