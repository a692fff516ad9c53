//! Elemental scalar products.
//!
//! For every cell `P` this module builds the consistency matrices
//!
//! * `N` (`f_P × 3`): row `f` is `(n_f^P)ᵀ K̃_P`, the face interpolants of `K̃ x̂_j`;
//! * `R` (`f_P × 3`): row `f` is `|f| (x_f − x_P)ᵀ`;
//! * `W` (`f_P × V_P`): facial vertex quadrature weights;
//! * `A = Wᵀ N` and `B` (`V_P × 3`) with `B[i, j] = (V_i − x_P)_j`;
//!
//! the orthonormal complements `C ⟂ span N` and `D ⟂ span [1 | B]`, and the
//! scalar-product matrices
//!
//! ```text
//! M_F = (1/|P|) R K̃⁻¹ Rᵀ + C U_F Cᵀ,    M_N = (1/|P|) A K̃⁻¹ Aᵀ + D U_N Dᵀ.
//! ```
//!
//! Any symmetric positive definite `U_F`, `U_N` gives an admissible member of
//! the family; here they are scaled identities whose scale follows the trace of
//! the consistency term. The identities `M_F N = R` and `M_N B = A` hold by
//! construction for every member.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dof::QuadratureWeights;
use crate::mesh::{Point3, PolyMesh};

/// Relative singular-value cutoff of the rank tests.
pub const RANK_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum FormsError {
    #[error("cell {cell}: N has rank below 3")]
    RankDeficientN { cell: usize },
    #[error("cell {cell}: input of the null-space computation is rank deficient")]
    RankDeficiency { cell: usize },
    #[error("cell {cell}: averaged diffusion tensor is singular or not positive definite")]
    SingularKTilde { cell: usize },
    #[error("cell {cell}: averaged diffusion tensor is not symmetric (asymmetry {asymmetry:e})")]
    AsymmetricKTilde { cell: usize, asymmetry: f64 },
    #[error("cell {cell}: scalar product is not positive (lower bound {low:e})")]
    NonPositive { cell: usize, low: f64 },
    #[error("stabilization scales must be positive, got F = {u_scale_f}, N = {u_scale_n}")]
    InvalidScale { u_scale_f: f64, u_scale_n: f64 },
}

/// Multipliers of the default stabilization matrices `U_F`, `U_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConfig {
    pub u_scale_f: f64,
    pub u_scale_n: f64,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        StabilizationConfig { u_scale_f: 1.0, u_scale_n: 1.0 }
    }
}

impl StabilizationConfig {
    pub fn new(u_scale_f: f64, u_scale_n: f64) -> Result<Self, FormsError> {
        let cfg = StabilizationConfig { u_scale_f, u_scale_n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FormsError> {
        if self.u_scale_f > 0.0 && self.u_scale_n > 0.0 && self.u_scale_f.is_finite() && self.u_scale_n.is_finite() {
            Ok(())
        } else {
            Err(FormsError::InvalidScale { u_scale_f: self.u_scale_f, u_scale_n: self.u_scale_n })
        }
    }
}

/// How the cellwise constant data are obtained from pointwise coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Value at the cell centroid.
    #[default]
    Centroid,
    /// Mean over the centroid fan sub-tetrahedra (second-order rule).
    SubTet,
}

/// Cellwise constant data `K̃_P`, `β̃_P`, `g̃_P`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialSample {
    pub k: Vec<Matrix3<f64>>,
    pub beta: Vec<Vector3<f64>>,
    pub g: Vec<f64>,
}

impl MaterialSample {
    pub fn sample(
        mesh: &PolyMesh,
        averaging: Averaging,
        k: impl Fn(&Point3) -> Matrix3<f64>,
        beta: impl Fn(&Point3) -> Vector3<f64>,
        g: impl Fn(&Point3) -> f64,
    ) -> Self {
        let n = mesh.num_cells();
        let mut out =
            MaterialSample { k: Vec::with_capacity(n), beta: Vec::with_capacity(n), g: Vec::with_capacity(n) };
        for c in 0..n {
            match averaging {
                Averaging::Centroid => {
                    let x = mesh.cells[c].centroid;
                    out.k.push(k(&x));
                    out.beta.push(beta(&x));
                    out.g.push(g(&x));
                }
                Averaging::SubTet => {
                    let tets = mesh.cell_subtets(c);
                    let vol = mesh.cells[c].volume;
                    let mean = |f: &dyn Fn(&Point3) -> f64| tets.iter().map(|t| t.integrate(f)).sum::<f64>() / vol;
                    out.k.push(Matrix3::from_fn(|i, j| mean(&|x| k(x)[(i, j)])));
                    out.beta.push(Vector3::from_fn(|i, _| mean(&|x| beta(x)[i])));
                    out.g.push(mean(&|x| g(x)));
                }
            }
        }
        out
    }

    /// Same tensor on every cell, no advection, no source.
    pub fn uniform(mesh: &PolyMesh, k: Matrix3<f64>) -> Self {
        let n = mesh.num_cells();
        MaterialSample { k: vec![k; n], beta: vec![Vector3::zeros(); n], g: vec![0.0; n] }
    }

    /// Extreme eigenvalues over all cells of `K̃`, after checking symmetry and definiteness.
    pub fn ellipticity(&self) -> Result<(f64, f64), FormsError> {
        let mut low = f64::INFINITY;
        let mut high: f64 = 0.0;
        for (c, k) in self.k.iter().enumerate() {
            check_tensor(k, c)?;
            let eig = SymmetricEigen::new(*k).eigenvalues;
            low = low.min(eig.min());
            high = high.max(eig.max());
        }
        Ok((low, high))
    }
}

fn check_tensor(k: &Matrix3<f64>, cell: usize) -> Result<(), FormsError> {
    let asymmetry = (k - k.transpose()).norm();
    if asymmetry > 1e-14 * k.norm() {
        return Err(FormsError::AsymmetricKTilde { cell, asymmetry });
    }
    let eig = SymmetricEigen::new(*k).eigenvalues;
    if !(eig.min() > 0.0) || !eig.iter().all(|e| e.is_finite()) {
        return Err(FormsError::SingularKTilde { cell });
    }
    Ok(())
}

/// `N` and `R` of a cell.
pub fn build_nr(mesh: &PolyMesh, cell: usize, k: &Matrix3<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), FormsError> {
    let c = &mesh.cells[cell];
    let nf = c.num_faces();
    let mut n = DMatrix::zeros(nf, 3);
    let mut r = DMatrix::zeros(nf, 3);
    for (row, cf) in c.faces.iter().enumerate() {
        let face = &mesh.faces[cf.face];
        let normal = face.normal * cf.sigma();
        let nk = normal.transpose() * k;
        let offset = face.area * (face.centroid - c.centroid);
        for j in 0..3 {
            n[(row, j)] = nk[j];
            r[(row, j)] = offset[j];
        }
    }
    let sv = n.singular_values();
    if !(sv.min() > RANK_CUTOFF * sv.max()) {
        return Err(FormsError::RankDeficientN { cell });
    }
    Ok((n, r))
}

/// `W[f, i]` is the weight of local vertex `i` in the quadrature of face `f`.
pub fn build_w(mesh: &PolyMesh, cell: usize, quadrature: &QuadratureWeights) -> DMatrix<f64> {
    let c = &mesh.cells[cell];
    let mut w = DMatrix::zeros(c.num_faces(), c.num_vertices());
    for (row, cf) in c.faces.iter().enumerate() {
        let face = &mesh.faces[cf.face];
        for (l, &v) in face.vertices.iter().enumerate() {
            let i = c.local_vertex(v).expect("face vertex belongs to its cell");
            w[(row, i)] = quadrature.face[cf.face][l];
        }
    }
    w
}

/// `A = Wᵀ N` and the matrix `B` of centred vertex coordinates.
pub fn build_ab(mesh: &PolyMesh, cell: usize, n: &DMatrix<f64>, w: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = &mesh.cells[cell];
    let a = w.transpose() * n;
    let b = DMatrix::from_fn(c.num_vertices(), 3, |i, j| (mesh.vertices[c.vertices[i]] - c.centroid)[j]);
    (a, b)
}

/// Orthonormal basis of the orthogonal complement of the column span of `m`
/// (equivalently, of the null space of `mᵀ`).
///
/// `m` must have full column rank. Basis vectors are extracted greedily from
/// the unit vectors, always taking the one with the largest residual after
/// projection (lowest index on ties), so the result is reproducible.
pub fn null_basis(m: &DMatrix<f64>, cell: usize) -> Result<DMatrix<f64>, FormsError> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(FormsError::RankDeficiency { cell });
    }
    let svd = m.clone().svd(true, false);
    let sigma_max = svd.singular_values.max();
    if !(svd.singular_values.min() > RANK_CUTOFF * sigma_max) {
        return Err(FormsError::RankDeficiency { cell });
    }
    let u = svd.u.expect("left singular vectors requested");
    let mut basis: Vec<DVector<f64>> = (0..cols).map(|j| u.column(j).into_owned()).collect();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(rows - cols);
    let mut used = vec![false; rows];
    while out.len() < rows - cols {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for i in (0..rows).filter(|&i| !used[i]) {
            let mut v = DVector::zeros(rows);
            v[i] = 1.0;
            for _ in 0..2 {
                for q in &basis {
                    let d = q.dot(&v);
                    v.axpy(-d, q, 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|b| norm > b.2) {
                best = Some((i, v, norm));
            }
        }
        let (i, v, norm) = best.ok_or(FormsError::RankDeficiency { cell })?;
        if norm < 1e-8 {
            return Err(FormsError::RankDeficiency { cell });
        }
        used[i] = true;
        let q = v / norm;
        basis.push(q.clone());
        out.push(q);
    }
    Ok(DMatrix::from_fn(rows, rows - cols, |i, j| out[j][i]))
}

fn invert(k: &Matrix3<f64>, cell: usize) -> Result<Matrix3<f64>, FormsError> {
    check_tensor(k, cell)?;
    k.try_inverse().ok_or(FormsError::SingularKTilde { cell })
}

/// Consistency term `(1/|P|) X K̃⁻¹ Xᵀ` plus `scale · γ · Z Zᵀ`, with `γ` the
/// mean diagonal entry of the consistency term.
fn family_member(x: &DMatrix<f64>, z: &DMatrix<f64>, k_inv: &Matrix3<f64>, volume: f64, scale: f64) -> DMatrix<f64> {
    let k_inv = DMatrix::from_fn(3, 3, |i, j| k_inv[(i, j)]);
    let consistency = x * k_inv * x.transpose() / volume;
    let gamma = consistency.trace() / consistency.nrows() as f64;
    let m = consistency + z * z.transpose() * (scale * gamma);
    // exact symmetry; the products above can differ in the last bit
    (&m + m.transpose()) * 0.5
}

/// `M_F = (1/|P|) R K̃⁻¹ Rᵀ + C U_F Cᵀ` with `U_F = u_scale_f · γ_F · I`.
pub fn build_mf(
    mesh: &PolyMesh,
    cell: usize,
    r: &DMatrix<f64>,
    c: &DMatrix<f64>,
    k: &Matrix3<f64>,
    cfg: &StabilizationConfig,
) -> Result<DMatrix<f64>, FormsError> {
    let k_inv = invert(k, cell)?;
    Ok(family_member(r, c, &k_inv, mesh.cells[cell].volume, cfg.u_scale_f))
}

/// `M_N = (1/|P|) A K̃⁻¹ Aᵀ + D U_N Dᵀ` with `U_N = u_scale_n · γ_N · I`.
pub fn build_mn(
    mesh: &PolyMesh,
    cell: usize,
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
    k: &Matrix3<f64>,
    cfg: &StabilizationConfig,
) -> Result<DMatrix<f64>, FormsError> {
    let k_inv = invert(k, cell)?;
    Ok(family_member(a, d, &k_inv, mesh.cells[cell].volume, cfg.u_scale_n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductKind {
    Face,
    Node,
}

/// Number of random samples used for the nodal bounds.
pub const SPECTRAL_SAMPLES: usize = 200;

/// Observed scaling constants `(c_low, c_high)` of an elemental product.
///
/// Face products: extreme eigenvalues of `M_F / |P|`. Nodal products: extreme
/// values of `vᵀ M_N v / (|P| Σ_e (grad^h v)_e²)` over seeded random `v`
/// orthogonal to constants.
pub fn spectral_check(
    mesh: &PolyMesh,
    cell: usize,
    m: &DMatrix<f64>,
    kind: ProductKind,
) -> Result<(f64, f64), FormsError> {
    let volume = mesh.cells[cell].volume;
    let (low, high) = match kind {
        ProductKind::Face => {
            let eig = m.clone().symmetric_eigenvalues();
            (eig.min() / volume, eig.max() / volume)
        }
        ProductKind::Node => {
            let edges = mesh.cell_local_edges(cell);
            let nv = m.nrows();
            let mut rng = ChaCha8Rng::seed_from_u64(cell as u64);
            let mut low = f64::INFINITY;
            let mut high: f64 = 0.0;
            for _ in 0..SPECTRAL_SAMPLES {
                let mut v = DVector::from_fn(nv, |_, _| rng.random_range(-1.0..1.0));
                let mean = v.mean();
                v.add_scalar_mut(-mean);
                let energy = (v.transpose() * m * &v)[0];
                let grad: f64 = edges.iter().map(|&(e, a, b)| ((v[b] - v[a]) / mesh.edges[e].length).powi(2)).sum();
                let ratio = energy / (volume * grad);
                low = low.min(ratio);
                high = high.max(ratio);
            }
            (low, high)
        }
    };
    if !(low > 1e-12 * high) || !high.is_finite() {
        return Err(FormsError::NonPositive { cell, low });
    }
    Ok((low, high))
}

/// Every elemental matrix of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalElementMatrices {
    pub n: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub mf: DMatrix<f64>,
    pub mn: DMatrix<f64>,
    pub k: Matrix3<f64>,
    pub k_inv: Matrix3<f64>,
    pub volume: f64,
}

impl LocalElementMatrices {
    pub fn build(
        mesh: &PolyMesh,
        cell: usize,
        quadrature: &QuadratureWeights,
        k: &Matrix3<f64>,
        cfg: &StabilizationConfig,
    ) -> Result<Self, FormsError> {
        let k_inv = invert(k, cell)?;
        let (n, r) = build_nr(mesh, cell, k)?;
        let w = build_w(mesh, cell, quadrature);
        let (a, b) = build_ab(mesh, cell, &n, &w);
        let c = null_basis(&n, cell)?;
        let nv = b.nrows();
        let ones_b = DMatrix::from_fn(nv, 4, |i, j| if j == 0 { 1.0 } else { b[(i, j - 1)] });
        let d = null_basis(&ones_b, cell)?;
        let mf = build_mf(mesh, cell, &r, &c, k, cfg)?;
        let mn = build_mn(mesh, cell, &a, &d, k, cfg)?;
        Ok(LocalElementMatrices { n, r, w, a, b, c, d, mf, mn, k: *k, k_inv, volume: mesh.cells[cell].volume })
    }

    /// `‖M_F N − R‖ / ‖R‖`.
    pub fn mixed_consistency_residual(&self) -> f64 {
        (&self.mf * &self.n - &self.r).norm() / self.r.norm()
    }

    /// `‖M_N B − A‖ / ‖A‖`.
    pub fn nodal_consistency_residual(&self) -> f64 {
        (&self.mn * &self.b - &self.a).norm() / self.a.norm()
    }

    /// Largest relative entry error of `Nᵀ M_F N = |P| K̃`.
    pub fn mixed_exactness_error(&self) -> f64 {
        exactness_error(&(self.n.transpose() * &self.mf * &self.n), &self.k, self.volume)
    }

    /// Largest relative entry error of `Bᵀ M_N B = |P| K̃`.
    pub fn nodal_exactness_error(&self) -> f64 {
        exactness_error(&(self.b.transpose() * &self.mn * &self.b), &self.k, self.volume)
    }

    /// `‖M_N 1‖ / ‖M_N‖`.
    pub fn nodal_kernel_residual(&self) -> f64 {
        let ones = DVector::from_element(self.mn.ncols(), 1.0);
        (&self.mn * ones).norm() / self.mn.norm()
    }

    /// `(1/|P|) K̃⁻¹ Aᵀ`: maps local nodal values to the reconstructed gradient.
    pub fn gradient_operator(&self) -> DMatrix<f64> {
        let k_inv = DMatrix::from_fn(3, 3, |i, j| self.k_inv[(i, j)]);
        k_inv * self.a.transpose() / self.volume
    }
}

fn exactness_error(product: &DMatrix<f64>, k: &Matrix3<f64>, volume: f64) -> f64 {
    let scale = volume * k.abs().max();
    (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (product[(i, j)] - volume * k[(i, j)]).abs() / scale)
        .fold(0.0, f64::max)
}

/// Elemental matrices of all cells.
#[derive(Clone, Debug)]
pub struct Forms {
    pub cells: Vec<LocalElementMatrices>,
    pub quadrature: QuadratureWeights,
    pub config: StabilizationConfig,
}

/// Builds the elemental matrices of every cell (in parallel, ordered by cell).
pub fn build_forms(
    mesh: &PolyMesh,
    k: &[Matrix3<f64>],
    quadrature: QuadratureWeights,
    config: StabilizationConfig,
) -> Result<Forms, FormsError> {
    let cells = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| LocalElementMatrices::build(mesh, c, &quadrature, &k[c], &config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forms { cells, quadrature, config })
}
