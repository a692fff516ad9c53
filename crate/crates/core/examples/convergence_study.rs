//! Refinement study for the trigonometric manufactured solution on tetrahedral
//! and perturbed hexahedral meshes, with both methods.
//!
//! ```text
//! cargo run --release --example convergence_study
//! ```

use nalgebra::{Matrix3, Vector3};
use polymfd::mesh::{generate_mesh, MeshKind};
use polymfd::post::{convergence_study, StudySettings};
use polymfd::solve::{Method, ProblemSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ProblemSpec::trig(Matrix3::identity(), Vector3::zeros());
    for (kind, delta) in [(MeshKind::Tet, 0.0), (MeshKind::PerturbedHex, 0.2)] {
        let meshes = [2, 4, 8].into_iter().map(|n| generate_mesh(kind, n, delta, 1)).collect::<Result<Vec<_>, _>>()?;
        let table = convergence_study(&meshes, &spec, Method::Both, &StudySettings::default())?;
        println!("# {kind}");
        print!("{}", table.to_csv());
    }
    Ok(())
}
