use super::{Cell, CellFace, Face, MeshError, Point3, PolyMesh, PLANARITY_TOL};

/// Area, centroid, unit normal and diameter of a planar polygon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceGeometry {
    pub area: f64,
    pub centroid: Point3,
    pub normal: Point3,
    pub diameter: f64,
}

/// Geometry of a polygon given by its ordered vertex loop.
///
/// The polygon is split into fan triangles about the vertex average; the
/// normal follows the right-hand rule of the loop.
pub fn face_geometry(points: &[Point3]) -> Result<FaceGeometry, MeshError> {
    let n = points.len();
    if n < 3 {
        return Err(MeshError::TooFewVertices(n));
    }
    for i in 0..n {
        for j in 0..i {
            if points[i] == points[j] {
                return Err(MeshError::TooFewVertices(distinct_count(points)));
            }
        }
    }
    let diameter = diameter(points.iter());
    let center = points.iter().sum::<Point3>() / n as f64;
    let area_vector: Point3 = (0..n).map(|l| 0.5 * (points[l] - center).cross(&(points[(l + 1) % n] - center))).sum();
    let norm = area_vector.norm();
    if !(norm > 1e-14 * diameter * diameter) {
        return Err(MeshError::DegenerateFace { area: norm, diameter });
    }
    let normal = area_vector / norm;

    let tolerance = PLANARITY_TOL * diameter;
    let deviation = points.iter().map(|p| (p - center).dot(&normal).abs()).fold(0.0, f64::max);
    if deviation > tolerance {
        return Err(MeshError::NonPlanarFace { deviation, tolerance });
    }

    let mut area = 0.0;
    let mut moment = Point3::zeros();
    for l in 0..n {
        let a = points[l];
        let b = points[(l + 1) % n];
        let t = 0.5 * (a - center).cross(&(b - center)).dot(&normal);
        area += t;
        moment += t * (center + a + b) / 3.0;
    }
    Ok(FaceGeometry { area, centroid: moment / area, normal, diameter })
}

fn distinct_count(points: &[Point3]) -> usize {
    let mut distinct: Vec<&Point3> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    distinct.len()
}

pub(crate) fn diameter<'a>(points: impl Iterator<Item = &'a Point3> + Clone) -> f64 {
    let pts: Vec<&Point3> = points.collect();
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in 0..i {
            d = d.max((pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Fan triangles of a face about its centroid, as `(a, b, c, signed area)`
/// with `(a, b, c)` counter-clockwise about the face normal. Triangular faces
/// are returned whole.
pub(crate) fn face_triangles(face: &Face, vertices: &[Point3]) -> Vec<(Point3, Point3, Point3, f64)> {
    let n = face.vertices.len();
    if n == 3 {
        let [a, b, c] = [0, 1, 2].map(|l| vertices[face.vertices[l]]);
        return vec![(a, b, c, face.area)];
    }
    (0..n)
        .map(|l| {
            let a = vertices[face.vertices[l]];
            let b = vertices[face.vertices[(l + 1) % n]];
            let area = 0.5 * (a - face.centroid).cross(&(b - face.centroid)).dot(&face.normal);
            (face.centroid, a, b, area)
        })
        .collect()
}

/// Volume and centroid from surface integrals; the volume is signed by the
/// cell face orientation.
pub(crate) fn signed_volume_and_centroid(refs: &[CellFace], faces: &[Face], vertices: &[Point3]) -> (f64, Point3) {
    let mut volume = 0.0;
    let mut first_moment = Point3::zeros();
    for cf in refs {
        let face = &faces[cf.face];
        let n = face.normal * cf.sigma();
        volume += face.area * face.centroid.dot(&n) / 3.0;
        // ∫_P x_i dV = 1/2 ∫_∂P x_i² n_i dS, with an edge-midpoint rule exact on quadratics
        for (a, b, c, area) in face_triangles(face, vertices) {
            let mids = [0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)];
            for i in 0..3 {
                let sq: f64 = mids.iter().map(|m| m[i] * m[i]).sum::<f64>() / 3.0;
                first_moment[i] += 0.5 * n[i] * area * sq;
            }
        }
    }
    let centroid = if volume.abs() > 0.0 {
        first_moment / volume
    } else {
        let mut all: Vec<usize> = refs.iter().flat_map(|cf| faces[cf.face].vertices.clone()).collect();
        all.sort_unstable();
        all.dedup();
        all.iter().map(|&v| vertices[v]).sum::<Point3>() / all.len().max(1) as f64
    };
    (volume, centroid)
}

/// Volume and centroid of a cell, checking that its faces close up and
/// enclose positive volume.
pub fn cell_geometry(mesh: &PolyMesh, index: usize) -> Result<(f64, Point3), MeshError> {
    let cell = &mesh.cells[index];
    let (sum, scale) = closure_residual(cell, mesh);
    if sum > 1e-12 * scale {
        return Err(MeshError::OpenSurface { cell: index, residual: sum / scale });
    }
    let (volume, centroid) = signed_volume_and_centroid(&cell.faces, &mesh.faces, &mesh.vertices);
    if !(volume > 0.0) {
        return Err(MeshError::NegativeVolume { cell: index, volume });
    }
    Ok((volume, centroid))
}

/// `(‖Σ σ|f| n_f‖, Σ|f|)` for a cell.
pub(crate) fn closure_residual(cell: &Cell, mesh: &PolyMesh) -> (f64, f64) {
    let mut sum = Point3::zeros();
    let mut scale = 0.0;
    for cf in &cell.faces {
        let face = &mesh.faces[cf.face];
        sum += face.area * face.normal * cf.sigma();
        scale += face.area;
    }
    (sum.norm(), scale)
}

/// Tetrahedron with a signed volume; positive when the vertex order is
/// consistent with the outward orientation of the parent cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubTet {
    pub points: [Point3; 4],
    pub volume: f64,
}

impl SubTet {
    pub fn new(points: [Point3; 4]) -> Self {
        let [a, b, c, d] = points;
        let volume = (b - a).dot(&(c - a).cross(&(d - a))) / 6.0;
        SubTet { points, volume }
    }

    /// 4-point rule, exact for quadratic polynomials.
    pub fn integrate(&self, f: impl Fn(&Point3) -> f64) -> f64 {
        const A: f64 = 0.585_410_196_624_968_5;
        const B: f64 = 0.138_196_601_125_010_5;
        let [p0, p1, p2, p3] = self.points;
        let mut sum = 0.0;
        for k in 0..4 {
            let w = [B, B, B, B];
            let mut lam = w;
            lam[k] = A;
            let x = lam[0] * p0 + lam[1] * p1 + lam[2] * p2 + lam[3] * p3;
            sum += f(&x);
        }
        sum * self.volume / 4.0
    }

    pub fn centroid(&self) -> Point3 {
        self.points.iter().sum::<Point3>() / 4.0
    }

    /// Inscribed-sphere radius over the longest edge.
    pub fn shape_ratio(&self) -> f64 {
        let [a, b, c, d] = self.points;
        let tri = |p: Point3, q: Point3, r: Point3| 0.5 * (q - p).cross(&(r - p)).norm();
        let surface = tri(a, b, c) + tri(a, b, d) + tri(a, c, d) + tri(b, c, d);
        let inradius = 3.0 * self.volume.abs() / surface;
        inradius / diameter(self.points.iter())
    }
}

pub(crate) fn subtets(cell: &Cell, faces: &[Face], vertices: &[Point3]) -> Vec<SubTet> {
    let apex = cell.centroid;
    let mut out = Vec::new();
    for cf in &cell.faces {
        for (a, b, c, _) in face_triangles(&faces[cf.face], vertices) {
            let tet = if cf.sign > 0 { [apex, a, b, c] } else { [apex, a, c, b] };
            out.push(SubTet::new(tet));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * (1.0 + b.abs())
    }

    #[test]
    fn unit_square() {
        let g = face_geometry(&[p(0., 0., 0.), p(1., 0., 0.), p(1., 1., 0.), p(0., 1., 0.)]).unwrap();
        assert!(close(g.area, 1.0));
        assert!((g.centroid - p(0.5, 0.5, 0.0)).norm() < 1e-15);
        assert!((g.normal - p(0., 0., 1.)).norm() < 1e-15);
    }

    #[test]
    fn reference_triangle() {
        let g = face_geometry(&[p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.)]).unwrap();
        assert!(close(g.area, 0.5));
        assert!((g.centroid - p(1. / 3., 1. / 3., 0.)).norm() < 1e-15);
        assert!((g.normal - p(0., 0., 1.)).norm() < 1e-15);
    }

    #[test]
    fn collinear_loop_is_degenerate() {
        let err = face_geometry(&[p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.)]).unwrap_err();
        assert!(matches!(err, MeshError::DegenerateFace { .. }));
    }

    #[test]
    fn warped_quad_is_rejected() {
        let err = face_geometry(&[p(0., 0., 0.), p(1., 0., 0.), p(1., 1., 0.1), p(0., 1., 0.)]).unwrap_err();
        assert!(matches!(err, MeshError::NonPlanarFace { .. }));
    }

    #[test]
    fn clockwise_loop_flips_normal() {
        let g = face_geometry(&[p(0., 0., 0.), p(0., 1., 0.), p(1., 1., 0.), p(1., 0., 0.)]).unwrap();
        assert!((g.normal - p(0., 0., -1.)).norm() < 1e-15);
        assert!(close(g.area, 1.0));
    }

    #[test]
    fn subtet_rule_is_exact_on_quadratics() {
        let t = SubTet::new([p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.)]);
        // ∫ x² over the reference simplex = 1/60, ∫ xy = 1/120
        assert!((t.integrate(|x| x[0] * x[0]) - 1.0 / 60.0).abs() < 1e-16);
        assert!((t.integrate(|x| x[0] * x[1]) - 1.0 / 120.0).abs() < 1e-16);
        assert!((t.volume - 1.0 / 6.0).abs() < 1e-16);
    }
}
