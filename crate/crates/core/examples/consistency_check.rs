//! Build the elemental scalar products on a perturbed hexahedral mesh with an
//! anisotropic tensor and report the consistency, exactness and spectral
//! diagnostics for several stabilization scales.
//!
//! ```text
//! cargo run --example consistency_check
//! ```

use nalgebra::Matrix3;
use polymfd::dof::{build_quadrature, CellWeightMode};
use polymfd::forms::{build_forms, spectral_check, ProductKind, StabilizationConfig};
use polymfd::mesh::{generate_mesh, MeshKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = generate_mesh(MeshKind::PerturbedHex, 3, 0.2, 1)?;
    let k = Matrix3::new(2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0);
    println!("scale  |M_F N - R|  |M_N B - A|  exact(F)   exact(N)   M_F bounds           M_N bounds");
    for scale in [0.5, 1.0, 4.0] {
        let quadrature = build_quadrature(&mesh, CellWeightMode::Uniform)?;
        let config = StabilizationConfig::new(scale, scale)?;
        let forms = build_forms(&mesh, &vec![k; mesh.num_cells()], quadrature, config)?;
        let mut worst = [0.0f64; 4];
        let (mut f_lo, mut f_hi, mut n_lo, mut n_hi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
        for (c, local) in forms.cells.iter().enumerate() {
            worst[0] = worst[0].max(local.mixed_consistency_residual());
            worst[1] = worst[1].max(local.nodal_consistency_residual());
            worst[2] = worst[2].max(local.mixed_exactness_error());
            worst[3] = worst[3].max(local.nodal_exactness_error());
            let (lo, hi) = spectral_check(&mesh, c, &local.mf, ProductKind::Face)?;
            f_lo = f_lo.min(lo);
            f_hi = f_hi.max(hi);
            let (lo, hi) = spectral_check(&mesh, c, &local.mn, ProductKind::Node)?;
            n_lo = n_lo.min(lo);
            n_hi = n_hi.max(hi);
        }
        println!(
            "{scale:5}  {:.2e}    {:.2e}    {:.2e}   {:.2e}   [{f_lo:.3}, {f_hi:.3}]   [{n_lo:.3}, {n_hi:.3}]",
            worst[0], worst[1], worst[2], worst[3]
        );
    }
    Ok(())
}
