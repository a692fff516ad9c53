use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::SolveError;
use crate::forms::{Averaging, MaterialSample};
use crate::mesh::{Point3, PolyMesh};

pub type ScalarFn = Arc<dyn Fn(&Point3) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point3) -> Vector3<f64> + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&Point3) -> Matrix3<f64> + Send + Sync>;

/// Manufactured solution `u` with its gradient.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad: VectorFn,
}

/// `−div(K ∇u) + β · ∇u = g` in the domain, `u = u^D` on its boundary.
#[derive(Clone)]
pub struct ProblemSpec {
    pub k: TensorFn,
    pub beta: VectorFn,
    pub g: ScalarFn,
    pub dirichlet: ScalarFn,
    pub exact: Option<ExactSolution>,
    /// How `K̃`, `β̃` and `g̃` are formed on each cell.
    pub averaging: Averaging,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("has_exact", &self.exact.is_some())
            .field("averaging", &self.averaging)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Constant tensor, no advection, zero source and zero boundary data.
    pub fn new(k: Matrix3<f64>) -> Self {
        ProblemSpec {
            k: Arc::new(move |_| k),
            beta: Arc::new(|_| Vector3::zeros()),
            g: Arc::new(|_| 0.0),
            dirichlet: Arc::new(|_| 0.0),
            exact: None,
            averaging: Averaging::Centroid,
        }
    }

    pub fn with_source(mut self, g: impl Fn(&Point3) -> f64 + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self
    }

    pub fn with_dirichlet(mut self, u: impl Fn(&Point3) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(u);
        self
    }

    pub fn with_beta(mut self, beta: impl Fn(&Point3) -> Vector3<f64> + Send + Sync + 'static) -> Self {
        self.beta = Arc::new(beta);
        self
    }

    /// Affine solution `u = c + a · x` with constant `K` and `β`; the source is `β · a`.
    pub fn affine(k: Matrix3<f64>, beta: Vector3<f64>, c: f64, a: Vector3<f64>) -> Self {
        let u = move |x: &Point3| c + a.dot(x);
        let mut spec =
            ProblemSpec::new(k).with_beta(move |_| beta).with_source(move |_| beta.dot(&a)).with_dirichlet(u);
        spec.exact = Some(ExactSolution { u: Arc::new(u), grad: Arc::new(move |_| a) });
        spec
    }

    /// `u = 1 + 2x − y + 3z`.
    pub fn linear_patch(k: Matrix3<f64>) -> Self {
        Self::affine(k, Vector3::zeros(), 1.0, Vector3::new(2.0, -1.0, 3.0))
    }

    /// `u = sin(πx) sin(πy) sin(πz)` with constant `K` and `β`; vanishes on the unit cube boundary.
    pub fn trig(k: Matrix3<f64>, beta: Vector3<f64>) -> Self {
        let u = |x: &Point3| (PI * x.x).sin() * (PI * x.y).sin() * (PI * x.z).sin();
        let grad = |x: &Point3| {
            let (s, c) = (x.map(|t| (PI * t).sin()), x.map(|t| (PI * t).cos()));
            PI * Vector3::new(c.x * s.y * s.z, s.x * c.y * s.z, s.x * s.y * c.z)
        };
        let g = move |x: &Point3| {
            let (s, c) = (x.map(|t| (PI * t).sin()), x.map(|t| (PI * t).cos()));
            let pi2 = PI * PI;
            let hessian = Matrix3::new(
                -pi2 * s.x * s.y * s.z,
                pi2 * c.x * c.y * s.z,
                pi2 * c.x * s.y * c.z,
                pi2 * c.x * c.y * s.z,
                -pi2 * s.x * s.y * s.z,
                pi2 * s.x * c.y * c.z,
                pi2 * c.x * s.y * c.z,
                pi2 * s.x * c.y * c.z,
                -pi2 * s.x * s.y * s.z,
            );
            -k.component_mul(&hessian).sum() + beta.dot(&grad(x))
        };
        let mut spec = ProblemSpec::new(k).with_beta(move |_| beta).with_source(g).with_dirichlet(u);
        spec.exact = Some(ExactSolution { u: Arc::new(u), grad: Arc::new(grad) });
        spec
    }

    /// Cellwise constant data for the elemental matrices.
    pub fn material(&self, mesh: &PolyMesh) -> MaterialSample {
        MaterialSample::sample(mesh, self.averaging, &*self.k, &*self.beta, &*self.g)
    }

    /// Exact flux `K ∇u`, when a manufactured solution is attached.
    pub fn exact_flux(&self, x: &Point3) -> Option<Vector3<f64>> {
        self.exact.as_ref().map(|e| (self.k)(x) * (e.grad)(x))
    }

    /// Ellipticity bounds `(κ_*, κ^*)` of `K` sampled at vertices and cell centroids.
    pub fn ellipticity(&self, mesh: &PolyMesh) -> Result<(f64, f64), SolveError> {
        let mut low = f64::INFINITY;
        let mut high: f64 = 0.0;
        for x in mesh.vertices.iter().chain(mesh.cells.iter().map(|c| &c.centroid)) {
            let k = (self.k)(x);
            let eig = SymmetricEigen::new(k).eigenvalues;
            if (k - k.transpose()).norm() > 1e-14 * k.norm() || !(eig.min() > 0.0) {
                return Err(SolveError::NotElliptic([x.x, x.y, x.z]));
            }
            low = low.min(eig.min());
            high = high.max(eig.max());
        }
        Ok((low, high))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_source_matches_finite_differences() {
        let k = Matrix3::new(2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0);
        let beta = Vector3::new(1.0, 2.0, 0.0);
        let spec = ProblemSpec::trig(k, beta);
        let exact = spec.exact.clone().unwrap();
        let x = Point3::new(0.31, 0.47, 0.73);
        let h = 1e-4;
        // −Σ K_ij ∂_ij u + β·∇u by central differences
        let u = |p: Point3| (exact.u)(&p);
        let mut second = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let (ei, ej) = (Vector3::ith(i, h), Vector3::ith(j, h));
                let d = (u(x + ei + ej) - u(x + ei - ej) - u(x - ei + ej) + u(x - ei - ej)) / (4.0 * h * h);
                second += k[(i, j)] * d;
            }
        }
        let grad_fd = Vector3::from_fn(|i, _| (u(x + Vector3::ith(i, h)) - u(x - Vector3::ith(i, h))) / (2.0 * h));
        assert!(((exact.grad)(&x) - grad_fd).norm() < 1e-6);
        let expected = -second + beta.dot(&grad_fd);
        assert!(((spec.g)(&x) - expected).abs() < 1e-5 * expected.abs().max(1.0));
    }

    #[test]
    fn ellipticity_sampling() {
        let mesh = crate::mesh::generate_mesh(crate::mesh::MeshKind::Hex, 1, 0.0, 0).unwrap();
        let (lo, hi) =
            ProblemSpec::new(Matrix3::from_diagonal(&Vector3::new(10.0, 1.0, 2.0))).ellipticity(&mesh).unwrap();
        assert_eq!((lo, hi), (1.0, 10.0));
        assert!(ProblemSpec::new(-Matrix3::identity()).ellipticity(&mesh).is_err());
    }
}
