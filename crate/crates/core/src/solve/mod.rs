//! Global assembly and solution of the nodal, mixed and advection–diffusion
//! methods.

mod assemble;
mod linsys;
mod problem;
mod sparse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assemble::{
    advective_row, assemble_advection, assemble_mixed, assemble_nodal, nodal_stiffness, sd_tau, solve_advection,
    solve_mixed, solve_nodal, MixedSolution, MixedSystem, NodalSolution, NodalSystem, SdConfig,
};
pub use linsys::{solve_system, Dof, LinearSystem, SolveReport, SolverOptions, SystemKind};
pub use problem::{ExactSolution, ProblemSpec, ScalarFn, TensorFn, VectorFn};
pub use sparse::SparseMatrix;

use crate::dof::{build_quadrature, CellWeightMode, DofError};
use crate::forms::{build_forms, Forms, FormsError, MaterialSample, StabilizationConfig};
use crate::mesh::PolyMesh;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("every vertex lies on the boundary; the nodal system is empty")]
    EmptyInterior,
    #[error("factorization failed: the system is singular")]
    SingularFactorization,
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("system of dimension {0} is too large for a dense eigendecomposition")]
    TooLarge(usize),
    #[error("diffusion tensor is not symmetric positive definite at {0:?}")]
    NotElliptic([f64; 3]),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Dof(#[from] DofError),
}

/// Which discretization to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Nodal,
    Mixed,
    Advect,
    /// Nodal and mixed on the same mesh.
    Both,
}

impl Method {
    pub fn runs_nodal(self) -> bool {
        matches!(self, Method::Nodal | Method::Advect | Method::Both)
    }

    pub fn runs_mixed(self) -> bool {
        matches!(self, Method::Mixed | Method::Both)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Nodal => "nodal",
            Method::Mixed => "mixed",
            Method::Advect => "advect",
            Method::Both => "both",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nodal" => Ok(Method::Nodal),
            "mixed" => Ok(Method::Mixed),
            "advect" => Ok(Method::Advect),
            "both" => Ok(Method::Both),
            _ => Err(format!("unknown method `{s}` (expected nodal, mixed, advect or both)")),
        }
    }
}

/// Samples the problem data, checks ellipticity and builds every elemental matrix.
pub fn discretize(
    mesh: &PolyMesh,
    spec: &ProblemSpec,
    config: StabilizationConfig,
    weights: CellWeightMode,
) -> Result<(MaterialSample, Forms), SolveError> {
    config.validate()?;
    spec.ellipticity(mesh)?;
    let material = spec.material(mesh);
    material.ellipticity()?;
    let quadrature = build_quadrature(mesh, weights)?;
    let forms = build_forms(mesh, &material.k, quadrature, config)?;
    Ok((material, forms))
}
