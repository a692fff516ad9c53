mod common;

use nalgebra::{Matrix3, Vector3};
use polymfd::dof::{interp_cell, interp_face, interp_node, CellWeightMode};
use polymfd::forms::StabilizationConfig;
use polymfd::mesh::{generate_mesh, MeshKind, PolyMesh};
use polymfd::solve::{
    assemble_advection, assemble_mixed, assemble_nodal, discretize, solve_mixed, solve_nodal, ProblemSpec, SdConfig,
    SolverOptions,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[test]
fn nodal_matrix_matches_p1_on_interior_vertices() {
    let mesh = generate_mesh(MeshKind::Tet, 3, 0.0, 0).unwrap();
    let k = common::full_spd();
    let spec = ProblemSpec::new(k);
    let (material, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
    let sys = assemble_nodal(&mesh, &forms, &material, &spec).unwrap();
    let oracle = common::p1_stiffness(&mesh, &k);
    let dense = sys.system.matrix.to_dense();
    for (vi, di) in sys.node_dof.iter().enumerate() {
        for (vj, dj) in sys.node_dof.iter().enumerate() {
            if let (Some(i), Some(j)) = (di, dj) {
                assert!((dense[(*i, *j)] - oracle[(vi, vj)]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn solutions_follow_relabelling() {
    let mesh = generate_mesh(MeshKind::PerturbedHex, 3, 0.2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vp = shuffled(mesh.num_vertices(), &mut rng);
    let fp = shuffled(mesh.num_faces(), &mut rng);
    let cp = shuffled(mesh.num_cells(), &mut rng);
    let other = mesh.permuted(&vp, &fp, &cp).unwrap();
    let spec = ProblemSpec::trig(common::diag(2.0, 1.0, 0.5), Vector3::zeros());
    let options = SolverOptions { direct: true, ..Default::default() };

    let solve = |m: &PolyMesh| {
        let (material, forms) = discretize(m, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
        let nodal = solve_nodal(m, &forms, &material, &spec, &options).unwrap();
        let mixed = solve_mixed(m, &forms, &spec, &options).unwrap();
        (nodal.u, mixed.flux, mixed.pressure)
    };
    let (u, flux, p) = solve(&mesh);
    let (u2, flux2, p2) = solve(&other);
    for v in 0..mesh.num_vertices() {
        assert!((u[v] - u2[vp[v]]).abs() < 1e-10);
    }
    for c in 0..mesh.num_cells() {
        assert!((p[c] - p2[cp[c]]).abs() < 1e-10);
    }
    for f in 0..mesh.num_faces() {
        // a relabelled face may carry the opposite normal
        let same = mesh.faces[f].normal.dot(&other.faces[fp[f]].normal).signum();
        assert!((flux[f] - same * flux2[fp[f]]).abs() < 1e-10);
    }
}

#[test]
fn mixed_system_inertia() {
    let mesh = generate_mesh(MeshKind::Hex, 2, 0.0, 0).unwrap();
    let spec = ProblemSpec::new(Matrix3::identity());
    let (_, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
    let sys = assemble_mixed(&mesh, &forms, &spec);
    assert_eq!(sys.system.inertia().unwrap(), (36, 8, 0));
}

#[test]
fn advection_without_velocity_is_diffusion() {
    let mesh = generate_mesh(MeshKind::PerturbedHex, 2, 0.2, 3).unwrap();
    let spec = ProblemSpec::trig(common::full_spd(), Vector3::zeros());
    let (material, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
    let nodal = assemble_nodal(&mesh, &forms, &material, &spec).unwrap();
    let sd = SdConfig { enabled: true, tau_scale: 1.0 };
    let advect = assemble_advection(&mesh, &forms, &material, &spec, &sd).unwrap();
    assert_eq!(nodal.system.matrix.to_dense(), advect.system.matrix.to_dense());
    assert_eq!(nodal.system.rhs, advect.system.rhs);
}

#[test]
fn advection_reproduces_linear_solutions() {
    let mesh = generate_mesh(MeshKind::PerturbedHex, 3, 0.2, 2).unwrap();
    let a = Vector3::new(2.0, -1.0, 3.0);
    let spec = ProblemSpec::affine(Matrix3::identity(), Vector3::new(5.0, -3.0, 1.0), 1.0, a);
    let (material, forms) = discretize(&mesh, &spec, StabilizationConfig::default(), CellWeightMode::Uniform).unwrap();
    let u = polymfd::solve::solve_advection(
        &mesh,
        &forms,
        &material,
        &spec,
        &SdConfig::default(),
        &SolverOptions::default(),
    )
    .unwrap()
    .u;
    assert!(max_diff(&u, &interp_node(&mesh, |x| 1.0 + a.dot(x))) < 1e-9);
}

fn spd(entries: [f64; 6]) -> Matrix3<f64> {
    let l = Matrix3::new(entries[0], 0.0, 0.0, entries[1], entries[2], 0.0, entries[3], entries[4], entries[5]);
    l * l.transpose() + Matrix3::identity() * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn patch_test_holds_for_random_data(
        seed in 0u64..1000,
        delta in 0.0f64..0.25,
        l in prop::array::uniform6(-1.0f64..1.0),
        a in prop::array::uniform3(-2.0f64..2.0),
        scale in 0.2f64..5.0,
    ) {
        let mesh = generate_mesh(MeshKind::PerturbedHex, 2, delta, seed).unwrap();
        let k = spd(l);
        let a = Vector3::from(a);
        let spec = ProblemSpec::affine(k, Vector3::zeros(), 0.5, a);
        let config = StabilizationConfig::new(scale, scale).unwrap();
        let (material, forms) = discretize(&mesh, &spec, config, CellWeightMode::Uniform).unwrap();
        let options = SolverOptions { direct: true, ..Default::default() };

        let u = solve_nodal(&mesh, &forms, &material, &spec, &options).unwrap().u;
        prop_assert!(max_diff(&u, &interp_node(&mesh, |x| 0.5 + a.dot(x))) < 1e-9);

        let mixed = solve_mixed(&mesh, &forms, &spec, &options).unwrap();
        prop_assert!(max_diff(&mixed.flux, &interp_face(&mesh, |_| k * a)) < 1e-9);
        let p = interp_cell(&mesh, |x| a.dot(x));
        let mean = mesh.cells.iter().zip(p.iter()).map(|(c, v)| c.volume * v).sum::<f64>() / mesh.total_volume();
        let target: Vec<f64> = p.iter().map(|v| v - mean).collect();
        prop_assert!(max_diff(&mixed.pressure, &target) < 1e-9);
        prop_assert!(mixed.pressure_integral(&mesh).abs() < 1e-12);
    }

    #[test]
    fn local_matrices_stay_consistent(
        seed in 0u64..1000,
        delta in 0.0f64..0.3,
        l in prop::array::uniform6(-1.0f64..1.0),
        sf in 0.1f64..10.0,
        sn in 0.1f64..10.0,
    ) {
        let mesh = generate_mesh(MeshKind::PerturbedHex, 1, delta, seed).unwrap();
        let spec = ProblemSpec::new(spd(l));
        let config = StabilizationConfig::new(sf, sn).unwrap();
        let (_, forms) = discretize(&mesh, &spec, config, CellWeightMode::Uniform).unwrap();
        for local in &forms.cells {
            prop_assert!(local.mixed_consistency_residual() < 1e-12);
            prop_assert!(local.nodal_consistency_residual() < 1e-12);
            prop_assert!(local.nodal_kernel_residual() < 1e-12);
            prop_assert!((&local.mf - local.mf.transpose()).norm() < 1e-12 * local.mf.norm());
        }
    }
}
