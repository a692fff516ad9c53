use faer::prelude::*;
use faer::Col;
use serde::{Deserialize, Serialize};

use super::{SolveError, SparseMatrix};

/// Meaning of one unknown of a global system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dof {
    Node(usize),
    Face(usize),
    Cell(usize),
    Multiplier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// Symmetric positive definite: conjugate gradients.
    Spd,
    /// Symmetric indefinite saddle point: sparse LU.
    Saddle,
    /// Nonsymmetric: sparse LU.
    General,
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub dofs: Vec<Dof>,
    pub kind: SystemKind,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `‖b − A x‖ / ‖b‖` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r = norm(&ax.iter().zip(&self.rhs).map(|(a, b)| b - a).collect::<Vec<_>>());
        let b = norm(&self.rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }

    /// Counts of positive, negative and zero eigenvalues of the (symmetric)
    /// matrix, from a dense eigendecomposition. Only meant for small systems.
    pub fn inertia(&self) -> Result<(usize, usize, usize), SolveError> {
        if self.dim() > 4000 {
            return Err(SolveError::TooLarge(self.dim()));
        }
        let dense = self.matrix.to_dense();
        let sym = (&dense + dense.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let scale = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let tol = 1e-12 * scale;
        let pos = eig.iter().filter(|&&e| e > tol).count();
        let neg = eig.iter().filter(|&&e| e < -tol).count();
        Ok((pos, neg, eig.len() - pos - neg))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Target relative residual.
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the number of unknowns.
    pub max_iter_factor: usize,
    /// Use sparse LU even for SPD systems.
    pub direct: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rel_tol: 1e-12, max_iter_factor: 10, direct: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Vec<f64>,
    pub method: &'static str,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = b`: Jacobi-preconditioned conjugate gradients for SPD
/// systems, sparse LU with iterative refinement otherwise.
pub fn solve_system(system: &LinearSystem, options: &SolverOptions) -> Result<SolveReport, SolveError> {
    if system.dim() == 0 {
        return Ok(SolveReport { solution: Vec::new(), method: "none", iterations: 0, residual: 0.0 });
    }
    if system.kind == SystemKind::Spd && !options.direct {
        conjugate_gradient(system, options)
    } else {
        sparse_lu(system, options)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(system: &LinearSystem, options: &SolverOptions) -> Result<SolveReport, SolveError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(SolveError::SingularFactorization);
    }
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(SolveReport { solution: x, method: "pcg", iterations: 0, residual: 0.0 });
    }
    let max_iter = options.max_iter_factor * n;
    let target = options.rel_tol * b_norm;
    let mut iterations = 0;
    // restart from the true residual whenever the recurrence claims convergence
    loop {
        let ax = a.mul_vec(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if norm(&r) <= target {
            let residual = norm(&r) / b_norm;
            return Ok(SolveReport { solution: x, method: "pcg", iterations, residual });
        }
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= max_iter {
                return Err(SolveError::NoConvergence { iterations, residual: norm(&r) / b_norm });
            }
            iterations += 1;
            let ap = a.mul_vec(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(SolveError::SingularFactorization);
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm(&r) <= 0.5 * target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

fn sparse_lu(system: &LinearSystem, options: &SolverOptions) -> Result<SolveReport, SolveError> {
    let matrix = system.matrix.to_faer().ok_or(SolveError::SingularFactorization)?;
    let lu = matrix.sp_lu().map_err(|_| SolveError::SingularFactorization)?;
    let n = system.dim();
    let b_norm = norm(&system.rhs);
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let col = Col::<f64>::from_fn(n, |i| rhs[i]);
        let sol = lu.solve(&col);
        (0..n).map(|i| sol[i]).collect()
    };
    let mut x = solve(&system.rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::SingularFactorization);
    }
    let mut iterations = 1;
    let mut residual = system.relative_residual(&x);
    while residual > options.rel_tol && iterations < 4 {
        let ax = system.matrix.mul_vec(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + d).collect();
        let next = system.relative_residual(&candidate);
        iterations += 1;
        if !(next < residual) {
            break;
        }
        x = candidate;
        residual = next;
    }
    // a pivot breakdown shows up as a useless solution rather than an error
    if !(residual <= 1e-6) || (b_norm == 0.0 && norm(&x) > 0.0) {
        return Err(SolveError::SingularFactorization);
    }
    Ok(SolveReport { solution: x, method: "sparse-lu", iterations, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(triplets: Vec<(usize, usize, f64)>, rhs: Vec<f64>, kind: SystemKind) -> LinearSystem {
        let n = rhs.len();
        LinearSystem {
            matrix: SparseMatrix::from_triplets(n, n, triplets),
            dofs: (0..n).map(Dof::Node).collect(),
            rhs,
            kind,
        }
    }

    #[test]
    fn scalar_spd() {
        let s = system(vec![(0, 0, 2.0)], vec![4.0], SystemKind::Spd);
        let r = solve_system(&s, &SolverOptions::default()).unwrap();
        assert_eq!(r.solution, vec![2.0]);
        let r = solve_system(&s, &SolverOptions { direct: true, ..Default::default() }).unwrap();
        assert!((r.solution[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let s = system(vec![(0, 0, 0.0), (1, 1, 0.0)], vec![1.0, 1.0], SystemKind::General);
        assert!(matches!(solve_system(&s, &SolverOptions::default()), Err(SolveError::SingularFactorization)));
        let s = system(vec![(0, 0, 0.0)], vec![1.0], SystemKind::Spd);
        assert!(matches!(solve_system(&s, &SolverOptions::default()), Err(SolveError::SingularFactorization)));
    }

    #[test]
    fn cg_iteration_cap() {
        // 1D Laplacian needs about n iterations; a cap of one iteration must fail
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let s = system(t, vec![1.0; n], SystemKind::Spd);
        let capped = SolverOptions { max_iter_factor: 0, ..Default::default() };
        assert!(matches!(solve_system(&s, &capped), Err(SolveError::NoConvergence { .. })));
        let r = solve_system(&s, &SolverOptions::default()).unwrap();
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn saddle_inertia() {
        // [[2, 1], [1, 0]] has one positive and one negative eigenvalue
        let s = system(vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)], vec![1.0, 1.0], SystemKind::Saddle);
        assert_eq!(s.inertia().unwrap(), (1, 1, 0));
        let r = solve_system(&s, &SolverOptions::default()).unwrap();
        assert!((r.solution[0] - 1.0).abs() < 1e-14 && (r.solution[1] + 1.0).abs() < 1e-14);
    }
}
