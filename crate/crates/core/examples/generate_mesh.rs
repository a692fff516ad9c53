//! Generate the three built-in mesh families, validate them, print quality
//! statistics and write JSON and VTK files to a temporary directory.
//!
//! ```text
//! cargo run --example generate_mesh
//! ```

use polymfd::mesh::{export_vtk, generate_mesh, quality_report, save_json, validate_mesh, MeshKind, VtkData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("polymfd-meshes");
    std::fs::create_dir_all(&dir)?;
    for (kind, delta) in [(MeshKind::Tet, 0.0), (MeshKind::Hex, 0.0), (MeshKind::PerturbedHex, 0.2)] {
        let mesh = generate_mesh(kind, 4, delta, 1)?;
        let report = validate_mesh(&mesh);
        let quality = quality_report(&mesh);
        println!(
            "{kind:>13}: {:5} cells {:5} faces {:4} vertices, h = {:.3}, volume = {:.15}, valid = {}, worst shape ratio = {:.3}",
            mesh.num_cells(),
            mesh.num_faces(),
            mesh.num_vertices(),
            mesh.h,
            mesh.total_volume(),
            report.is_valid(),
            quality.worst_shape_ratio(),
        );
        save_json(&mesh, dir.join(format!("{kind}.json")))?;
        let volumes = mesh.cells.iter().map(|c| c.volume).collect();
        let data = VtkData { cell_data: vec![("volume".into(), volumes)], ..Default::default() };
        std::fs::write(dir.join(format!("{kind}.vtk")), export_vtk(&mesh, &data))?;
    }
    println!("files written to {}", dir.display());
    Ok(())
}
