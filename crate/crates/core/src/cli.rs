//! The `polymfd` command line driver.
//!
//! Subcommands: `generate-mesh`, `check`, `solve` and `convergence`. Settings
//! come from built-in defaults, then an optional JSON file (`--config`), then
//! flags. Exit codes: 0 success, 1 diagnostic failure, 2 usage or
//! configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::dof::build_quadrature;
use crate::dof::{CellWeightMode, FaceField, NodeField};
use crate::forms::{spectral_check, Averaging, LocalElementMatrices, ProductKind, StabilizationConfig};
use crate::mesh::{
    export_vtk, generate_mesh, load_json, mesh_to_json_string, validate_mesh, MeshKind, PolyMesh, VtkData,
};
use crate::post::{compute_errors, convergence_study, Fields, PostError, StudySettings};
use crate::solve::{
    discretize, solve_advection, solve_mixed, solve_nodal, Method, ProblemSpec, SdConfig, SolveError, SolverOptions,
};

/// Threshold on the consistency and exactness residuals reported by `check`.
pub const CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Diagnostic(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Diagnostic(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NotElliptic(_) | SolveError::Forms(crate::forms::FormsError::InvalidScale { .. }) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PostError> for CliError {
    fn from(e: PostError) -> Self {
        match e {
            PostError::Solve(e) => e.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "polymfd", version, about = "Mimetic finite differences on polyhedral meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh of the unit cube and write it as JSON.
    GenerateMesh(CommonArgs),
    /// Validate a mesh and write per-cell consistency diagnostics as CSV.
    Check(CommonArgs),
    /// Solve one problem and write fields (JSON, VTK) and a run summary.
    Solve(CommonArgs),
    /// Solve on a sequence of meshes and write the error table as CSV.
    Convergence(CommonArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// Mesh file, or generator spec `kind:n[:delta[:seed]]` where `n` may be a
    /// comma separated list (e.g. `tet:2,4,8`).
    #[arg(long)]
    pub mesh: Option<String>,
    /// JSON run configuration.
    #[arg(long, alias = "problem")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Output path (`generate-mesh`, `check`, `convergence`) or prefix (`solve`).
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub u_scale_f: Option<f64>,
    #[arg(long)]
    pub u_scale_n: Option<f64>,
    /// Enable streamline diffusion for the advection method.
    #[arg(long)]
    pub sd: bool,
    #[arg(long)]
    pub cell_weights: Option<CellWeightMode>,
}

/// Mesh section of a configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub file: Option<PathBuf>,
    pub kind: Option<MeshKind>,
    pub n: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    /// `u = sin(πx) sin(πy) sin(πz)`.
    #[default]
    Trig,
    /// `u = 1 + 2x − y + 3z`.
    LinearPatch,
    /// `u = c + a · x`.
    Affine,
    /// Constant source `g` and constant boundary value `u_d`, no exact solution.
    Constant,
}

/// Problem section of a configuration file. `k` and `beta` are constant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: ProblemName,
    pub k: Option<[[f64; 3]; 3]>,
    pub beta: Option<[f64; 3]>,
    pub c: Option<f64>,
    pub a: Option<[f64; 3]>,
    pub g: Option<f64>,
    pub u_d: Option<f64>,
    pub averaging: Option<Averaging>,
}

impl ProblemConfig {
    pub fn build(&self) -> ProblemSpec {
        let k = self.k.map(|rows| Matrix3::from_fn(|i, j| rows[i][j])).unwrap_or_else(Matrix3::identity);
        let beta = self.beta.map(Vector3::from).unwrap_or_else(Vector3::zeros);
        let mut spec = match self.name {
            ProblemName::Trig => ProblemSpec::trig(k, beta),
            ProblemName::LinearPatch => ProblemSpec::affine(k, beta, 1.0, Vector3::new(2.0, -1.0, 3.0)),
            ProblemName::Affine => ProblemSpec::affine(
                k,
                beta,
                self.c.unwrap_or(0.0),
                self.a.map(Vector3::from).unwrap_or_else(Vector3::zeros),
            ),
            ProblemName::Constant => {
                let (g, u) = (self.g.unwrap_or(0.0), self.u_d.unwrap_or(0.0));
                ProblemSpec::new(k).with_beta(move |_| beta).with_source(move |_| g).with_dirichlet(move |_| u)
            }
        };
        spec.averaging = self.averaging.unwrap_or_default();
        spec
    }
}

/// Contents of a `--config` file; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mesh: Option<MeshConfig>,
    pub method: Option<Method>,
    pub problem: Option<ProblemConfig>,
    pub u_scale_f: Option<f64>,
    pub u_scale_n: Option<f64>,
    pub sd: Option<SdConfig>,
    pub cell_weights: Option<CellWeightMode>,
    pub out: Option<String>,
    pub solver: Option<SolverOptions>,
}

/// Where the mesh comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MeshSource {
    File(PathBuf),
    Generate { kind: MeshKind, n: Vec<usize>, delta: f64, seed: u64 },
}

impl MeshSource {
    pub fn load(&self) -> Result<Vec<PolyMesh>, CliError> {
        match self {
            MeshSource::File(path) => {
                Ok(vec![load_json(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?])
            }
            MeshSource::Generate { kind, n, delta, seed } => n
                .iter()
                .map(|&n| generate_mesh(*kind, n, *delta, *seed).map_err(|e| CliError::Usage(e.to_string())))
                .collect(),
        }
    }

    fn single(&self) -> Result<PolyMesh, CliError> {
        let mut meshes = self.load()?;
        if meshes.len() != 1 {
            return Err(CliError::Usage(format!("expected one mesh, the spec gives {}", meshes.len())));
        }
        Ok(meshes.remove(0))
    }
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub method: Method,
    pub problem: ProblemConfig,
    pub stabilization: StabilizationConfig,
    pub sd: SdConfig,
    pub cell_weights: CellWeightMode,
    pub out: Option<String>,
    pub solver: SolverOptions,
}

/// Parses `kind:n[:delta[:seed]]`; returns `None` when `text` does not start with a mesh kind.
pub fn parse_mesh_spec(text: &str) -> Option<Result<MeshConfig, String>> {
    let mut parts = text.split(':');
    let kind = parts.next()?.parse::<MeshKind>().ok()?;
    let mut parse = || -> Result<MeshConfig, String> {
        let n = parts
            .next()
            .ok_or("missing subdivision count")?
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad subdivision count `{s}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let delta = parts.next().map(|s| s.parse::<f64>().map_err(|e| format!("bad delta `{s}`: {e}"))).transpose()?;
        let seed = parts.next().map(|s| s.parse::<u64>().map_err(|e| format!("bad seed `{s}`: {e}"))).transpose()?;
        if parts.next().is_some() {
            return Err("too many fields".into());
        }
        Ok(MeshConfig { file: None, kind: Some(kind), n: Some(n), delta, seed })
    };
    Some(parse().map_err(|e| format!("mesh spec `{text}`: {e}")))
}

impl RunConfig {
    /// Merges defaults, the optional config file and flags (in increasing priority).
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };

        let mut mesh = file.mesh.clone().unwrap_or_default();
        if let Some(text) = &args.mesh {
            mesh = match parse_mesh_spec(text) {
                Some(spec) => spec.map_err(CliError::Usage)?,
                None => MeshConfig { file: Some(PathBuf::from(text)), ..Default::default() },
            };
        }
        if let Some(seed) = args.seed {
            mesh.seed = Some(seed);
        }
        let source = match (&mesh.file, mesh.kind) {
            (Some(_), Some(_)) => return Err(CliError::Usage("mesh: give either `file` or `kind`, not both".into())),
            (Some(path), None) => MeshSource::File(path.clone()),
            (None, kind) => MeshSource::Generate {
                kind: kind.unwrap_or(MeshKind::Hex),
                n: mesh.n.clone().unwrap_or_else(|| vec![2]),
                delta: mesh.delta.unwrap_or(0.0),
                seed: mesh.seed.unwrap_or(0),
            },
        };

        let stabilization = StabilizationConfig {
            u_scale_f: args.u_scale_f.or(file.u_scale_f).unwrap_or(1.0),
            u_scale_n: args.u_scale_n.or(file.u_scale_n).unwrap_or(1.0),
        };
        stabilization.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let mut sd = file.sd.unwrap_or_default();
        if args.sd {
            sd.enabled = true;
        }
        Ok(RunConfig {
            mesh: source,
            method: args.method.or(file.method).unwrap_or(Method::Nodal),
            problem: file.problem.clone().unwrap_or_default(),
            stabilization,
            sd,
            cell_weights: args.cell_weights.or(file.cell_weights).unwrap_or_default(),
            out: args.out.clone().or(file.out.clone()),
            solver: file.solver.unwrap_or_default(),
        })
    }

    fn out_or(&self, default: &str) -> String {
        self.out.clone().unwrap_or_else(|| default.to_string())
    }
}

fn write(path: impl AsRef<Path>, contents: &str) -> Result<(), CliError> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = cfg.mesh.single()?;
    let out = cfg.out_or("mesh.json");
    write(&out, &mesh_to_json_string(&mesh))?;
    println!("wrote {out}: {} cells, {} faces, {} vertices", mesh.num_cells(), mesh.num_faces(), mesh.num_vertices());
    Ok(())
}

/// One row of the `check` table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellDiagnostics {
    pub mf_consistency: f64,
    pub mn_consistency: f64,
    pub mf_exactness: f64,
    pub mn_exactness: f64,
    pub mn_kernel: f64,
    pub face_bounds: (f64, f64),
    pub node_bounds: (f64, f64),
    pub error: Option<String>,
}

impl CellDiagnostics {
    pub fn passes(&self) -> bool {
        self.error.is_none()
            && [self.mf_consistency, self.mn_consistency, self.mf_exactness, self.mn_exactness, self.mn_kernel]
                .iter()
                .all(|r| *r <= CHECK_TOL)
    }
}

/// Builds the elemental matrices of every cell independently so that one bad
/// cell does not hide the others.
pub fn diagnose(mesh: &PolyMesh, spec: &ProblemSpec, cfg: &RunConfig) -> Result<Vec<CellDiagnostics>, CliError> {
    let material = spec.material(mesh);
    let quadrature = build_quadrature(mesh, cfg.cell_weights).map_err(|e| CliError::Diagnostic(e.to_string()))?;
    let rows = (0..mesh.num_cells())
        .map(|c| {
            let local = match LocalElementMatrices::build(mesh, c, &quadrature, &material.k[c], &cfg.stabilization) {
                Ok(local) => local,
                Err(e) => return CellDiagnostics { error: Some(e.to_string()), ..Default::default() },
            };
            let mut row = CellDiagnostics {
                mf_consistency: local.mixed_consistency_residual(),
                mn_consistency: local.nodal_consistency_residual(),
                mf_exactness: local.mixed_exactness_error(),
                mn_exactness: local.nodal_exactness_error(),
                mn_kernel: local.nodal_kernel_residual(),
                ..Default::default()
            };
            match spectral_check(mesh, c, &local.mf, ProductKind::Face)
                .and_then(|f| spectral_check(mesh, c, &local.mn, ProductKind::Node).map(|n| (f, n)))
            {
                Ok((f, n)) => {
                    row.face_bounds = f;
                    row.node_bounds = n;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

pub fn cmd_check(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = cfg.mesh.single()?;
    let report = validate_mesh(&mesh);
    let rows = diagnose(&mesh, &cfg.problem.build(), cfg)?;
    let mut csv = String::from(
        "cell,valid,mf_consistency,mn_consistency,mf_exactness,mn_exactness,mn_kernel,face_low,face_high,node_low,node_high,error\n",
    );
    for (c, row) in rows.iter().enumerate() {
        writeln!(
            csv,
            "{c},{},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            !report.cell_failed(c),
            row.mf_consistency,
            row.mn_consistency,
            row.mf_exactness,
            row.mn_exactness,
            row.mn_kernel,
            row.face_bounds.0,
            row.face_bounds.1,
            row.node_bounds.0,
            row.node_bounds.1,
            row.error.as_deref().unwrap_or("").replace(',', ";"),
        )
        .unwrap();
    }
    let out = cfg.out_or("check.csv");
    write(&out, &csv)?;
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    let failing = rows.iter().filter(|r| !r.passes()).count();
    if report.is_valid() && failing == 0 {
        println!("wrote {out}: {} cells pass", rows.len());
        Ok(())
    } else {
        Err(CliError::Diagnostic(format!(
            "wrote {out}: {} mesh violations, {failing} cells above tolerance {CHECK_TOL:e}",
            report.violations.len()
        )))
    }
}

#[derive(Serialize)]
struct FieldsFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    node: Option<&'a NodeField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    face: Option<&'a FaceField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cell: Option<&'a crate::dof::CellField>,
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let mesh = cfg.mesh.single()?;
    let spec = cfg.problem.build();
    let (material, forms) = discretize(&mesh, &spec, cfg.stabilization, cfg.cell_weights)?;
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;

    let solve_start = Instant::now();
    let nodal = match cfg.method {
        Method::Nodal | Method::Both => Some(solve_nodal(&mesh, &forms, &material, &spec, &cfg.solver)?),
        Method::Advect => Some(solve_advection(&mesh, &forms, &material, &spec, &cfg.sd, &cfg.solver)?),
        Method::Mixed => None,
    };
    let mixed = if cfg.method.runs_mixed() { Some(solve_mixed(&mesh, &forms, &spec, &cfg.solver)?) } else { None };
    let solve_ms = solve_start.elapsed().as_secs_f64() * 1e3;

    let prefix = cfg.out_or("solution");
    let fields = FieldsFile {
        node: nodal.as_ref().map(|s| &s.u),
        face: mixed.as_ref().map(|s| &s.flux),
        cell: mixed.as_ref().map(|s| &s.pressure),
    };
    write(format!("{prefix}.fields.json"), &serde_json::to_string(&fields).expect("fields serialize"))?;
    let mut vtk = VtkData::default();
    if let Some(s) = &nodal {
        vtk.point_data.push(("u".into(), s.u.0.clone()));
    }
    if let Some(s) = &mixed {
        vtk.cell_data.push(("p".into(), s.pressure.0.clone()));
    }
    write(format!("{prefix}.vtk"), &export_vtk(&mesh, &vtk))?;

    let errors = match spec.exact {
        Some(_) => Some(compute_errors(
            &mesh,
            &forms,
            &spec,
            Fields {
                nodal: nodal.as_ref().map(|s| &s.u),
                flux: mixed.as_ref().map(|s| &s.flux),
                pressure: mixed.as_ref().map(|s| &s.pressure),
            },
        )?),
        None => None,
    };
    let mixed_summary = mixed.as_ref().map(|s| {
        let integral = s.pressure_integral(&mesh);
        json!({
            "dofs": mesh.num_faces() + mesh.num_cells(),
            "solver": s.report,
            "multiplier": s.multiplier,
            "pressure_integral": integral,
            "mean_zero": integral.abs() <= 1e-10 * mesh.total_volume(),
        })
    });
    let nodal_summary = nodal.as_ref().map(|s| {
        json!({
            "dofs": mesh.boundary_vertex.iter().filter(|b| !**b).count(),
            "solver": s.report,
        })
    });
    let summary = json!({
        "method": cfg.method,
        "mesh": {
            "vertices": mesh.num_vertices(),
            "edges": mesh.num_edges(),
            "faces": mesh.num_faces(),
            "cells": mesh.num_cells(),
            "h": mesh.h,
        },
        "stabilization": cfg.stabilization,
        "cell_weights": cfg.cell_weights,
        "nodal": nodal_summary,
        "mixed": mixed_summary,
        "errors": errors,
        "timings_ms": { "setup": setup_ms, "solve": solve_ms },
    });
    write(format!("{prefix}.summary.json"), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    println!("wrote {prefix}.fields.json, {prefix}.vtk, {prefix}.summary.json");
    Ok(())
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<(), CliError> {
    let meshes = cfg.mesh.load()?;
    let spec = cfg.problem.build();
    let settings = StudySettings {
        stabilization: cfg.stabilization,
        cell_weights: cfg.cell_weights,
        sd: cfg.sd,
        solver: cfg.solver,
    };
    if meshes.len() < 2 {
        return Err(CliError::Usage(format!("convergence needs at least 2 levels, got {}", meshes.len())));
    }
    let table = convergence_study(&meshes, &spec, cfg.method, &settings)?;
    let csv = table.to_csv();
    let out = cfg.out_or("convergence.csv");
    write(&out, &csv)?;
    print!("{csv}");
    Ok(())
}

/// Caps the global thread pool from `POLYMFD_THREADS`.
fn configure_threads() -> Result<(), CliError> {
    if let Ok(value) = std::env::var("POLYMFD_THREADS") {
        let n: usize = value
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("POLYMFD_THREADS must be a positive integer, got `{value}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::GenerateMesh(args) => cmd_generate(&RunConfig::resolve(args)?),
        Command::Check(args) => cmd_check(&RunConfig::resolve(args)?),
        Command::Solve(args) => cmd_solve(&RunConfig::resolve(args)?),
        Command::Convergence(args) => cmd_convergence(&RunConfig::resolve(args)?),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
