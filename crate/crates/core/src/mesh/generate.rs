//! Structured mesh generators on the unit cube.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{face_geometry, MeshError, Point3, PolyMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    /// Six tetrahedra per voxel (Kuhn split along the main diagonal).
    Tet,
    Hex,
    /// Hexahedral topology with jittered vertices; warped quads become two triangles.
    PerturbedHex,
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshKind::Tet => "tet",
            MeshKind::Hex => "hex",
            MeshKind::PerturbedHex => "perturbed-hex",
        })
    }
}

impl FromStr for MeshKind {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tet" => Ok(MeshKind::Tet),
            "hex" => Ok(MeshKind::Hex),
            "perturbed-hex" => Ok(MeshKind::PerturbedHex),
            other => Err(MeshError::InvalidParam(format!("unknown mesh kind '{other}'"))),
        }
    }
}

/// Mesh of the unit cube with `n` subdivisions per axis.
///
/// `delta` is the jitter amplitude as a fraction of the grid spacing and is
/// only used by [`MeshKind::PerturbedHex`]. Boundary vertices only move within
/// their boundary facet, so the domain stays the unit cube.
pub fn generate_mesh(kind: MeshKind, n: usize, delta: f64, seed: u64) -> Result<PolyMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParam("n must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(MeshError::InvalidParam(format!("delta must lie in [0, 0.5), got {delta}")));
    }
    let m = n + 1;
    let idx = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let spacing = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push(Point3::new(i as f64, j as f64, k as f64) * spacing);
            }
        }
    }
    if kind == MeshKind::PerturbedHex && delta > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    let jitter: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
                    let free = [i, j, k].map(|c| c != 0 && c != n);
                    let v = &mut vertices[idx(i, j, k)];
                    for axis in 0..3 {
                        if free[axis] {
                            v[axis] += delta * spacing * jitter[axis];
                        }
                    }
                }
            }
        }
    }

    let mut cells: Vec<Vec<Vec<usize>>> = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let c = |a: usize, b: usize, d: usize| idx(i + a, j + b, k + d);
                match kind {
                    MeshKind::Tet => cells.extend(kuhn_tets(&c)),
                    MeshKind::Hex | MeshKind::PerturbedHex => {
                        let quads = [
                            vec![c(0, 0, 0), c(0, 1, 0), c(0, 1, 1), c(0, 0, 1)],
                            vec![c(1, 0, 0), c(1, 1, 0), c(1, 1, 1), c(1, 0, 1)],
                            vec![c(0, 0, 0), c(0, 0, 1), c(1, 0, 1), c(1, 0, 0)],
                            vec![c(0, 1, 0), c(0, 1, 1), c(1, 1, 1), c(1, 1, 0)],
                            vec![c(0, 0, 0), c(1, 0, 0), c(1, 1, 0), c(0, 1, 0)],
                            vec![c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)],
                        ];
                        let mut polys = Vec::with_capacity(12);
                        for q in quads {
                            polys.extend(planar_pieces(q, &vertices));
                        }
                        cells.push(polys);
                    }
                }
            }
        }
    }
    PolyMesh::from_polyhedra(vertices, &cells)
}

/// The six tetrahedra sharing the voxel diagonal `(0,0,0) -> (1,1,1)`.
fn kuhn_tets(c: &impl Fn(usize, usize, usize) -> usize) -> Vec<Vec<Vec<usize>>> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|perm| {
            let mut corner = [0usize; 3];
            let mut tet = vec![c(0, 0, 0)];
            for &axis in perm {
                corner[axis] = 1;
                tet.push(c(corner[0], corner[1], corner[2]));
            }
            let [a, b, d, e] = [tet[0], tet[1], tet[2], tet[3]];
            vec![vec![a, b, d], vec![a, b, e], vec![a, d, e], vec![b, d, e]]
        })
        .collect()
}

/// Returns the quad unchanged when planar, otherwise two triangles split along
/// the diagonal through its smallest vertex id (the same split from both sides).
fn planar_pieces(quad: Vec<usize>, vertices: &[Point3]) -> Vec<Vec<usize>> {
    let pts: Vec<Point3> = quad.iter().map(|&v| vertices[v]).collect();
    if face_geometry(&pts).is_ok() {
        return vec![quad];
    }
    let start = (0..4).min_by_key(|&l| quad[l]).unwrap();
    let q: Vec<usize> = (0..4).map(|l| quad[(start + l) % 4]).collect();
    vec![vec![q[0], q[1], q[2]], vec![q[0], q[2], q[3]]]
}
