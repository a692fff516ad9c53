use std::collections::HashMap;
use std::fmt;

use nalgebra::Matrix3;

use super::geometry::closure_residual;
use super::{PolyMesh, SubTet};

/// Relative tolerance of the per-cell second-moment identity.
pub const SECOND_MOMENT_TOL: f64 = 1e-10;
/// Relative tolerance of the per-cell closedness check.
pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// `Σ σ|f| n_f ≠ 0`.
    OpenSurface {
        cell: usize,
        residual: f64,
    },
    /// `Σ σ|f| x_f n_fᵀ ≠ |P| I`.
    SecondMoment {
        cell: usize,
        residual: f64,
    },
    NonPositiveVolume {
        cell: usize,
        volume: f64,
    },
    NonPositiveArea {
        face: usize,
        area: f64,
    },
    /// Face with no incident cell or with more than two.
    Incidence {
        face: usize,
        count: usize,
    },
    /// Interior face seen with the same orientation from both sides.
    SameSign {
        face: usize,
    },
    /// Boundary flag disagrees with the incidence count.
    BoundaryFlag {
        face: usize,
        flagged: bool,
        incident: usize,
    },
    /// Edge of a cell not shared by exactly two of its faces.
    CellEdge {
        cell: usize,
        edge: usize,
        count: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OpenSurface { cell, residual } => {
                write!(f, "cell {cell}: open surface (relative residual {residual:.3e})")
            }
            Violation::SecondMoment { cell, residual } => {
                write!(f, "cell {cell}: second-moment identity fails (relative residual {residual:.3e})")
            }
            Violation::NonPositiveVolume { cell, volume } => write!(f, "cell {cell}: volume {volume:.3e}"),
            Violation::NonPositiveArea { face, area } => write!(f, "face {face}: area {area:.3e}"),
            Violation::Incidence { face, count } => write!(f, "face {face}: {count} incident cells"),
            Violation::SameSign { face } => write!(f, "face {face}: same orientation in both cells"),
            Violation::BoundaryFlag { face, flagged, incident } => {
                write!(f, "face {face}: boundary flag {flagged} but {incident} incident cells")
            }
            Violation::CellEdge { cell, edge, count } => {
                write!(f, "cell {cell}: edge {edge} shared by {count} faces")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the given cell has at least one violation attached to it.
    pub fn cell_failed(&self, cell: usize) -> bool {
        self.violations.iter().any(|v| match v {
            Violation::OpenSurface { cell: c, .. }
            | Violation::SecondMoment { cell: c, .. }
            | Violation::NonPositiveVolume { cell: c, .. }
            | Violation::CellEdge { cell: c, .. } => *c == cell,
            _ => false,
        })
    }
}

/// Checks closedness, the second-moment identity, positive measures and
/// conformity. Every violation found is reported.
pub fn validate_mesh(mesh: &PolyMesh) -> ValidationReport {
    let mut violations = Vec::new();

    for (f, face) in mesh.faces.iter().enumerate() {
        if !(face.area > 0.0) {
            violations.push(Violation::NonPositiveArea { face: f, area: face.area });
        }
    }

    for (c, cell) in mesh.cells.iter().enumerate() {
        let (sum, scale) = closure_residual(cell, mesh);
        if !(sum <= CLOSURE_TOL * scale) {
            violations.push(Violation::OpenSurface { cell: c, residual: sum / scale });
        }
        if !(cell.volume > 0.0) {
            violations.push(Violation::NonPositiveVolume { cell: c, volume: cell.volume });
        }
        let moment = second_moment(mesh, c);
        let residual = (moment - Matrix3::identity() * cell.volume).norm() / cell.volume.abs();
        if !(residual <= SECOND_MOMENT_TOL) {
            violations.push(Violation::SecondMoment { cell: c, residual });
        }
        let mut edge_count: HashMap<usize, usize> = HashMap::new();
        for cf in &cell.faces {
            for &e in &mesh.faces[cf.face].edges {
                *edge_count.entry(e).or_default() += 1;
            }
        }
        let mut bad: Vec<(usize, usize)> = edge_count.into_iter().filter(|&(_, n)| n != 2).collect();
        bad.sort_unstable();
        for (edge, count) in bad {
            violations.push(Violation::CellEdge { cell: c, edge, count });
        }
    }

    for (f, incident) in mesh.face_cells.iter().enumerate() {
        let count = incident.len();
        if count == 0 || count > 2 {
            violations.push(Violation::Incidence { face: f, count });
        }
        if count == 2 {
            let sign = |c: usize| mesh.cells[c].faces.iter().find(|cf| cf.face == f).map(|cf| cf.sign).unwrap_or(0);
            if sign(incident[0]) == sign(incident[1]) {
                violations.push(Violation::SameSign { face: f });
            }
        }
        let flagged = mesh.boundary_face[f];
        if flagged != (count == 1) {
            violations.push(Violation::BoundaryFlag { face: f, flagged, incident: count });
        }
    }

    ValidationReport { violations }
}

/// `Σ_f σ|f| x_f n_fᵀ`, equal to `|P| I` on a closed cell.
pub(crate) fn second_moment(mesh: &PolyMesh, cell: usize) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for cf in &mesh.cells[cell].faces {
        let face = &mesh.faces[cf.face];
        m += face.area * cf.sigma() * face.centroid * face.normal.transpose();
    }
    m
}

/// Shape-regularity diagnostics; informative only.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshQualityReport {
    /// Sub-tetrahedra used per cell.
    pub subtet_count: Vec<usize>,
    /// Smallest inradius-to-diameter ratio of the sub-tetrahedra, per cell.
    pub min_shape_ratio: Vec<f64>,
    /// Smallest face diameter over cell diameter, per cell.
    pub min_face_ratio: Vec<f64>,
    /// Shortest edge over cell diameter, per cell.
    pub min_edge_ratio: Vec<f64>,
}

impl MeshQualityReport {
    pub fn max_subtets(&self) -> usize {
        self.subtet_count.iter().copied().max().unwrap_or(0)
    }

    pub fn worst_shape_ratio(&self) -> f64 {
        self.min_shape_ratio.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Computed from the fan sub-tetrahedralization about each cell centroid.
/// Tetrahedral cells are measured directly.
pub fn quality_report(mesh: &PolyMesh) -> MeshQualityReport {
    let mut report = MeshQualityReport {
        subtet_count: Vec::with_capacity(mesh.num_cells()),
        min_shape_ratio: Vec::with_capacity(mesh.num_cells()),
        min_face_ratio: Vec::with_capacity(mesh.num_cells()),
        min_edge_ratio: Vec::with_capacity(mesh.num_cells()),
    };
    for (c, cell) in mesh.cells.iter().enumerate() {
        let tets = if cell.num_vertices() == 4 {
            let v: Vec<_> = cell.vertices.iter().map(|&v| mesh.vertices[v]).collect();
            vec![SubTet::new([v[0], v[1], v[2], v[3]])]
        } else {
            mesh.cell_subtets(c)
        };
        report.subtet_count.push(tets.len());
        report.min_shape_ratio.push(tets.iter().map(SubTet::shape_ratio).fold(f64::INFINITY, f64::min));
        report.min_face_ratio.push(
            cell.faces.iter().map(|cf| mesh.faces[cf.face].diameter / cell.diameter).fold(f64::INFINITY, f64::min),
        );
        report
            .min_edge_ratio
            .push(cell.edges.iter().map(|&e| mesh.edges[e].length / cell.diameter).fold(f64::INFINITY, f64::min));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind};

    #[test]
    fn generated_meshes_are_valid() {
        for (kind, n, delta) in [(MeshKind::Hex, 2, 0.0), (MeshKind::Tet, 2, 0.0), (MeshKind::PerturbedHex, 3, 0.2)] {
            let mesh = generate_mesh(kind, n, delta, 1).unwrap();
            let report = validate_mesh(&mesh);
            assert!(report.is_valid(), "{kind}: {:?}", report.violations);
        }
    }

    #[test]
    fn unit_cube_second_moment_is_identity() {
        let mesh = generate_mesh(MeshKind::Hex, 1, 0.0, 0).unwrap();
        let m = second_moment(&mesh, 0);
        assert!((m - Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn dangling_face_is_reported() {
        let mut mesh = generate_mesh(MeshKind::Hex, 2, 0.0, 0).unwrap();
        let f = mesh.boundary_face.iter().position(|&b| b).unwrap();
        mesh.boundary_face[f] = false;
        let report = validate_mesh(&mesh);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::BoundaryFlag { face, .. } if *face == f)));
    }

    #[test]
    fn flipped_sign_breaks_closedness() {
        let mut mesh = generate_mesh(MeshKind::Hex, 1, 0.0, 0).unwrap();
        mesh.cells[0].faces[0].sign *= -1;
        let report = validate_mesh(&mesh);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::OpenSurface { cell: 0, .. })));
        assert!(report.cell_failed(0));
        assert!(matches!(crate::mesh::cell_geometry(&mesh, 0), Err(crate::mesh::MeshError::OpenSurface { .. })));
    }

    #[test]
    fn quality_ratios_lie_in_unit_interval() {
        let mesh = generate_mesh(MeshKind::PerturbedHex, 3, 0.2, 1).unwrap();
        let q = quality_report(&mesh);
        for ratios in [&q.min_shape_ratio, &q.min_face_ratio, &q.min_edge_ratio] {
            assert!(ratios.iter().all(|&r| r > 0.0 && r <= 1.0));
        }
        let tets = quality_report(&generate_mesh(MeshKind::Tet, 1, 0.0, 0).unwrap());
        assert_eq!(tets.max_subtets(), 1);
    }
}
