//! Low-order mimetic finite difference methods on polyhedral meshes.
//!
//! The crate covers the whole pipeline of the nodal and mixed methods:
//!
//! * [`mesh`]: polyhedral meshes, generators, validation, JSON and VTK I/O;
//! * [`dof`]: discrete spaces, interpolants, `grad^h`, `div^h`, quadrature weights;
//! * [`forms`]: elemental scalar products `M_F`, `M_N` and their diagnostics;
//! * [`solve`]: assembly and solution of the nodal, mixed and advection–diffusion methods;
//! * [`post`]: gradient reconstructions, piecewise linear postprocessing, errors and rates;
//! * [`cli`]: the `polymfd` command line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dof;
pub mod forms;
pub mod mesh;
pub mod post;
pub mod solve;
