//! Command-line driver behind the `glvortex` binary.
//!
//! Every subcommand reads its keys from flags and, optionally, from a flat
//! config file given with `--config`: one `key = value` per line, `#`
//! starts a comment, keys are the long flag names (`_` and `-` are
//! interchangeable). Flags override the file; unknown keys are rejected.
//!
//! Exit codes: 0 success, 1 usage, validation or I/O error, 2 internal
//! invariant violation, 3 tolerance check failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::connection::{harmonic_basis, levi_civita_connection, DiscreteBundle};
use crate::error::{Error, Result};
use crate::gl::{self, GLParams, MinimizeReport};
use crate::harmonic::{
    canonical_harmonic_section, lattice_offsets, renormalized_energy_limit, Configuration,
    Extrapolation,
};
use crate::io::{self, fmt_f64, json_f64, json_object, PlyAttributes};
use crate::mesh::{build_icosphere, build_torus, Point, SurfaceMesh};
use crate::renorm::{self, GreenCache, OptimizeOptions};
use crate::section::Section;
use crate::tensor;
use crate::vortex::{self, ReferencePolyhedron, VortexSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Vortices and renormalized energies of tensor bundles on closed surfaces.
#[derive(Parser, Debug)]
#[command(name = "glvortex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or load a mesh, report its invariants and export it.
    Mesh(MeshArgs),
    /// Minimize the Ginzburg-Landau energy from random starts and report vortices.
    Minimize(MinimizeArgs),
    /// Minimize the renormalized energy over point configurations.
    Renorm(RenormArgs),
    /// Build the canonical harmonic section for a configuration.
    Harmonic(HarmonicArgs),
    /// Reconcile the renormalized-energy definitions and the energy expansion.
    Crosscheck(CrosscheckArgs),
    /// Check the tensor algebra against a dense reference.
    TensorSelftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat `key = value` config file; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for artifacts; nothing is written without it.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct MeshSource {
    /// Icosphere subdivision level, 0 to 8.
    #[arg(long, value_name = "S")]
    icosphere: Option<u32>,
    /// Torus `R,r,NU,NV`: major and minor radius, ring counts (NV even).
    #[arg(long, value_name = "R,r,NU,NV")]
    torus: Option<String>,
    /// Closed, consistently oriented triangle mesh in OBJ format.
    #[arg(long, value_name = "FILE")]
    mesh: Option<PathBuf>,
}

const MESH_KEYS: [&str; 3] = ["icosphere", "torus", "mesh"];

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Tensor rank k used for the connection report and dump.
    #[arg(long, default_value_t = 2)]
    rank: u32,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Tensor rank k (1 to 12).
    #[arg(long, default_value_t = 2)]
    rank: u32,
    /// Final epsilon [default: 3 x mean edge length].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of continuation stages ending at epsilon.
    #[arg(long, default_value_t = gl::DEFAULT_STAGES)]
    stages: usize,
    /// First epsilon of the schedule [default: half the circumradius].
    #[arg(long)]
    epsilon_start: Option<f64>,
    /// Iteration cap per stage.
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Gradient max-norm ending a stage.
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    /// Number of random starts (generator streams 0..seeds).
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Base seed of the random generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RenormArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Number of points [default: 2 x rank].
    #[arg(long)]
    d: Option<usize>,
    /// Tensor rank k; on the sphere d = 2k.
    #[arg(long)]
    rank: Option<u32>,
    /// Number of random starts.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Base seed of the random generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest accepted distance (radians) to the reference polyhedron.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Iteration cap per start (moves on a mesh).
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Tangential gradient max-norm ending a start on the round sphere.
    #[arg(long, default_value_t = 1e-7)]
    grad_tol: f64,
}

#[derive(Args, Debug)]
struct HarmonicArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Tensor rank k (1 to 12).
    #[arg(long, default_value_t = 2)]
    rank: u32,
    /// Singular vertices as comma-separated ids [default: the reference polyhedron snapped to the mesh].
    #[arg(long, value_name = "IDS")]
    points: Option<String>,
    /// Flux vector, comma-separated, 2g values [default: the lattice point of least norm].
    #[arg(long, value_name = "VALUES")]
    fluxes: Option<String>,
    /// Lattice search window |n_i| <= window.
    #[arg(long, default_value_t = 2)]
    window: i32,
    /// Ball radius for the renormalized energy limit (skipped when absent).
    #[arg(long)]
    rho0: Option<f64>,
}

#[derive(Args, Debug)]
struct CrosscheckArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Tensor rank k; d = 2k points at a reference polyhedron.
    #[arg(long, default_value_t = 2)]
    rank: u32,
    /// Ball radius for the renormalized energy limit.
    #[arg(long, default_value_t = 0.5)]
    rho0: f64,
    /// Epsilon values for the expansion check, comma-separated and decreasing.
    #[arg(long, default_value = "0.2,0.1,0.05")]
    eps: String,
    /// Relative tolerance between the renormalized-energy definitions.
    #[arg(long, default_value_t = 0.02)]
    w_tol: f64,
    /// Relative tolerance of the expansion at the smallest epsilon.
    #[arg(long, default_value_t = 0.10)]
    bracket_tol: f64,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[command(flatten)]
    common: Common,
    /// Highest tensor rank checked (2 to 12).
    #[arg(long, default_value_t = tensor::MAX_RANK)]
    max_rank: usize,
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.args_override_self(true))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::Stagnation { .. } | Error::AmbiguousDegree { .. } => {
            EXIT_INTERNAL
        }
        _ => EXIT_USAGE,
    }
}

/// Run the CLI on `args` (including the program name) and return the exit
/// code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(Parsed::Display(text)) => {
            let _ = write!(out, "{text}");
            return EXIT_OK;
        }
        Err(Parsed::Fail(msg)) => {
            let _ = writeln!(err, "{}", msg.trim_end());
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Mesh(a) => cmd_mesh(&a, out),
        Command::Minimize(a) => cmd_minimize(&a, out, err),
        Command::Renorm(a) => cmd_renorm(&a, out, err),
        Command::Harmonic(a) => cmd_harmonic(&a, out),
        Command::Crosscheck(a) => cmd_crosscheck(&a, out),
        Command::TensorSelftest(a) => cmd_selftest(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

enum Parsed {
    Display(String),
    Fail(String),
}

fn parse(argv: &[OsString]) -> std::result::Result<Cli, Parsed> {
    let first = parse_once(argv)?;
    let config = match &first.command {
        Command::Mesh(a) => &a.common.config,
        Command::Minimize(a) => &a.common.config,
        Command::Renorm(a) => &a.common.config,
        Command::Harmonic(a) => &a.common.config,
        Command::Crosscheck(a) => &a.common.config,
        Command::TensorSelftest(a) => &a.common.config,
    };
    let Some(path) = config else {
        return Ok(first);
    };
    let sub_pos = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
        .ok_or_else(|| Parsed::Fail("missing subcommand".into()))?;
    let sub_name = argv[sub_pos].to_string_lossy().into_owned();
    let cmd = command();
    let sub = cmd
        .find_subcommand(&sub_name)
        .ok_or_else(|| Parsed::Fail(format!("unknown subcommand {sub_name}")))?;
    let allowed: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .filter(|l| l != "config" && l != "help")
        .collect();
    let entries = read_config(path, &allowed).map_err(|e| Parsed::Fail(format!("error: {e}")))?;

    let user: Vec<String> = argv[sub_pos + 1..]
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let given = |key: &str| {
        user.iter()
            .any(|a| a == &format!("--{key}") || a.starts_with(&format!("--{key}=")))
    };
    let user_mesh = MESH_KEYS.iter().any(|k| given(k));
    let mut merged: Vec<OsString> = argv[..=sub_pos].to_vec();
    for (key, value) in entries {
        if user_mesh && MESH_KEYS.contains(&key.as_str()) {
            continue;
        }
        merged.push(format!("--{key}={value}").into());
    }
    merged.extend(argv[sub_pos + 1..].iter().cloned());
    parse_once(&merged)
}

fn parse_once(argv: &[OsString]) -> std::result::Result<Cli, Parsed> {
    let matches = command().try_get_matches_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Parsed::Display(e.to_string()),
            _ => Parsed::Fail(e.to_string()),
        }
    })?;
    Cli::from_arg_matches(&matches).map_err(|e| Parsed::Fail(e.to_string()))
}

/// Parse a `key = value` file, normalizing `_` to `-` in keys and
/// rejecting keys outside `allowed` and repeated keys.
pub fn read_config(path: &Path, allowed: &[String]) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, allowed).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_config(text: &str, allowed: &[String]) -> std::result::Result<Vec<(String, String)>, String> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().to_owned();
        if !allowed.contains(&key) {
            return Err(format!(
                "line {}: unknown key '{key}' (allowed: {})",
                n + 1,
                allowed.join(", ")
            ));
        }
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(format!("line {}: key '{key}' repeated", n + 1));
        }
        if value.is_empty() {
            return Err(format!("line {}: key '{key}' has no value", n + 1));
        }
        entries.push((key, value));
    }
    Ok(entries)
}

impl MeshSource {
    fn is_set(&self) -> bool {
        self.icosphere.is_some() || self.torus.is_some() || self.mesh.is_some()
    }

    fn load(&self, default_level: u32) -> Result<SurfaceMesh> {
        let given = [self.icosphere.is_some(), self.torus.is_some(), self.mesh.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(Error::Config(
                "choose one mesh source: icosphere, torus or mesh".into(),
            ));
        }
        if let Some(path) = &self.mesh {
            return io::load_mesh(path);
        }
        if let Some(spec) = &self.torus {
            let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
            let bad = || Error::Config(format!("torus expects R,r,NU,NV, got '{spec}'"));
            if parts.len() != 4 {
                return Err(bad());
            }
            let major: f64 = parts[0].parse().map_err(|_| bad())?;
            let minor: f64 = parts[1].parse().map_err(|_| bad())?;
            let nu: usize = parts[2].parse().map_err(|_| bad())?;
            let nv: usize = parts[3].parse().map_err(|_| bad())?;
            return build_torus(major, minor, nu, nv);
        }
        Ok(build_icosphere(self.icosphere.unwrap_or(default_level))?)
    }
}

fn check_rank(rank: u32) -> Result<()> {
    if rank == 0 || rank as usize > tensor::MAX_RANK {
        return Err(Error::Config(format!(
            "rank must be between 1 and {}, got {rank}",
            tensor::MAX_RANK
        )));
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(name: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("{name}: cannot parse '{t}'")))
        })
        .collect()
}

/// Whether every vertex lies on the unit sphere.
fn on_unit_sphere(mesh: &SurfaceMesh) -> bool {
    mesh.genus() == 0 && mesh.positions().iter().all(|p| (p.norm() - 1.0).abs() < 1e-9)
}

/// Distance to the reference polyhedron with as many vertices, after
/// radial projection about the centroid; `None` when no reference applies.
fn reference_distance(mesh: &SurfaceMesh, points: &[Point]) -> Result<Option<(String, f64)>> {
    if mesh.genus() != 0 {
        return Ok(None);
    }
    let Some(reference) = ReferencePolyhedron::for_count(points.len()) else {
        return Ok(None);
    };
    let c = mesh.centroid();
    let projected: Vec<Point> = points.iter().map(|p| (p - c).normalize()).collect();
    let d = vortex::configuration_distance(&projected, &reference)?;
    Ok(Some((reference.name().to_owned(), d)))
}

fn rose_attributes(mesh: &SurfaceMesh, u: &Section, rank: u32) -> Result<PlyAttributes> {
    let field = tensor::section_to_tensor_field(u.values(), rank as usize)?;
    let roses = tensor::tensor_field_roses(mesh, &field);
    let mut attrs = PlyAttributes::default().scalar("modulus", u.moduli());
    for petal in 0..rank as usize {
        attrs = attrs.vector(
            &format!("rose_{petal}"),
            // zero tensors have no petals
            roses
                .iter()
                .map(|r| r.get(petal).copied().unwrap_or_else(Point::zeros))
                .collect(),
        );
    }
    Ok(attrs)
}

fn cmd_mesh(a: &MeshArgs, out: &mut dyn Write) -> Result<i32> {
    check_rank(a.rank)?;
    let mesh = a.source.load(3)?;
    let bundle = levi_civita_connection(Arc::new(mesh.clone()), a.rank)?;
    let defects = mesh.angle_defects();
    let gb = defects.iter().sum::<f64>() - 2.0 * std::f64::consts::PI * mesh.euler_characteristic() as f64;
    let _ = writeln!(out, "vertices         {}", mesh.num_vertices());
    let _ = writeln!(out, "edges            {}", mesh.num_edges());
    let _ = writeln!(out, "faces            {}", mesh.num_faces());
    let _ = writeln!(out, "genus            {}", mesh.genus());
    let _ = writeln!(out, "total area       {}", fmt_f64(mesh.total_area()));
    let _ = writeln!(out, "mean edge length {}", fmt_f64(mesh.mean_edge_length()));
    let _ = writeln!(out, "gauss-bonnet residual {:.3e}", gb);
    let _ = writeln!(out, "euler number (k = {}) {}", a.rank, bundle.euler_number());
    if let Some(dir) = &a.common.out {
        io::write_obj(&mesh, dir.join("mesh.obj"))?;
        let attrs = PlyAttributes::default()
            .scalar("angle_defect", defects)
            .vector("normal", (0..mesh.num_vertices()).map(|v| mesh.frame(v).normal).collect());
        io::write_ply(&mesh, &attrs, dir.join("mesh.ply"))?;
        io::write_text(dir.join("connection.csv"), &io::connection_csv(&bundle))?;
        let _ = writeln!(out, "wrote mesh.obj, mesh.ply, connection.csv to {}", dir.display());
    }
    Ok(EXIT_OK)
}

struct RunOutcome {
    stream: u64,
    section: Section,
    report: MinimizeReport,
    vortices: VortexSet,
    distance: Option<(String, f64)>,
}

fn cmd_minimize(a: &MinimizeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    check_rank(a.rank)?;
    if a.seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    if a.stages == 0 {
        return Err(Error::Config("stages must be at least 1".into()));
    }
    let mesh = Arc::new(a.source.load(4)?);
    let eps = a.epsilon.unwrap_or(3.0 * mesh.mean_edge_length());
    positive("epsilon", eps)?;
    let start = a.epsilon_start.unwrap_or(0.5 * mesh.circumradius());
    positive("epsilon-start", start)?;
    let params = GLParams {
        schedule: gl::geometric_schedule(start.max(eps), eps, a.stages),
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        seed: a.seed,
    };
    params.validate()?;
    if let Some(w) = params.resolution_warning(&mesh) {
        let _ = writeln!(err, "warning: {w}");
    }
    let bundle = levi_civita_connection(mesh.clone(), a.rank)?;
    let euler = bundle.euler_number();

    let mut runs = Vec::with_capacity(a.seeds);
    for (stream, res) in gl::minimize_seeds(&bundle, &params, a.seeds).into_iter().enumerate() {
        let (section, report) = res?;
        let vortices = vortex::detect_vortices(&bundle, &section)?;
        let distance = reference_distance(&mesh, &vortices.positions())?;
        runs.push(RunOutcome {
            stream: stream as u64,
            section,
            report,
            vortices,
            distance,
        });
    }

    let _ = writeln!(out, "epsilon schedule {:?}", params.schedule);
    let _ = writeln!(out, "euler number {euler}");
    let _ = writeln!(out, "stream  energy                   vortices  degree  all+1  converged  distance");
    let mut broken = Vec::new();
    for r in &runs {
        let converged = r.report.stages.iter().all(|s| s.converged);
        let dist = r
            .distance
            .as_ref()
            .map_or("-".to_owned(), |(name, d)| format!("{d:.4e} ({name})"));
        let _ = writeln!(
            out,
            "{:<7} {:<24} {:<9} {:<7} {:<6} {:<10} {}",
            r.stream,
            fmt_f64(r.report.final_energy()),
            r.vortices.len(),
            r.vortices.total_degree,
            r.vortices.all_degree_one(),
            converged,
            dist
        );
        if !r.vortices.flagged.is_empty() {
            let _ = writeln!(
                err,
                "warning: stream {} has {} faces with winding far from an integer",
                r.stream,
                r.vortices.flagged.len()
            );
        }
        if r.vortices.total_degree != euler {
            broken.push(r.stream);
        }
    }
    let best = runs
        .iter()
        .min_by(|x, y| x.report.final_energy().total_cmp(&y.report.final_energy()))
        .expect("at least one seed");
    let _ = writeln!(out, "best stream {} with {} vortices", best.stream, best.vortices.len());

    if let Some(dir) = &a.common.out {
        let mut rows = Vec::new();
        for r in &runs {
            for h in &r.report.history {
                rows.push(vec![
                    r.stream.to_string(),
                    h.stage.to_string(),
                    h.iteration.to_string(),
                    fmt_f64(h.energy),
                    fmt_f64(h.grad_norm),
                ]);
            }
        }
        io::write_csv(
            dir.join("convergence.csv"),
            &["stream", "stage", "iter", "energy", "gradnorm"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = runs
            .iter()
            .map(|r| {
                vec![
                    r.stream.to_string(),
                    fmt_f64(r.report.final_energy()),
                    r.vortices.len().to_string(),
                    r.vortices.total_degree.to_string(),
                    r.distance.as_ref().map_or("nan".into(), |(_, d)| fmt_f64(*d)),
                ]
            })
            .collect();
        io::write_csv(
            dir.join("runs.csv"),
            &["stream", "energy", "vortices", "total_degree", "distance"],
            &rows,
        )?;
        io::write_json(dir.join("section.json"), &io::section_json(&best.section, &[], &[]))?;
        io::write_json(dir.join("vortices.json"), &io::vortices_json(&best.vortices))?;
        io::write_ply(&mesh, &rose_attributes(&mesh, &best.section, a.rank)?, dir.join("minimize.ply"))?;
        let _ = writeln!(out, "wrote artifacts to {}", dir.display());
    }
    if !broken.is_empty() {
        let _ = writeln!(
            err,
            "error: total vortex degree differs from the euler number {euler} for streams {broken:?}"
        );
        return Ok(EXIT_INTERNAL);
    }
    Ok(EXIT_OK)
}

fn cmd_renorm(a: &RenormArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if let Some(k) = a.rank {
        check_rank(k)?;
    }
    let d = match (a.d, a.rank) {
        (Some(d), _) => d,
        (None, Some(k)) => 2 * k as usize,
        (None, None) => return Err(Error::Config("give d or rank".into())),
    };
    if d < 2 {
        return Err(Error::Config(format!("d must be at least 2, got {d}")));
    }
    if a.seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    positive("tol", a.tol)?;
    positive("grad-tol", a.grad_tol)?;
    if a.source.is_set() {
        return renorm_on_mesh(a, d, out, err);
    }

    let opts = OptimizeOptions {
        seeds: a.seeds,
        seed: a.seed,
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
    };
    let res = renorm::optimize_sphere_configuration(d, &opts)?;
    if let Some(w) = &res.warning {
        let _ = writeln!(err, "warning: {w}");
    }
    let reference = ReferencePolyhedron::for_count(d);
    let dist_of = |pts: &[Point]| -> Result<Option<f64>> {
        reference
            .as_ref()
            .map(|r| vortex::configuration_distance(pts, r))
            .transpose()
    };
    let best_dist = dist_of(&res.best)?;
    let _ = writeln!(out, "d {d}, {} seeds", a.seeds);
    let _ = writeln!(out, "best value {}", fmt_f64(res.value));
    let mut rows = Vec::new();
    for r in &res.runs {
        rows.push(vec![
            r.stream.to_string(),
            fmt_f64(r.value),
            dist_of(&r.points)?.map_or("nan".into(), fmt_f64),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
    }
    if let Some(dir) = &a.common.out {
        io::write_csv(
            dir.join("renorm.csv"),
            &["seed", "value", "distance", "iterations", "converged"],
            &rows,
        )?;
        let best = json_object(vec![
            ("d", d.into()),
            ("value", json_f64(res.value)),
            ("reference", reference.as_ref().map_or(serde_json::Value::Null, |r| r.name().into())),
            ("distance", best_dist.map_or(serde_json::Value::Null, json_f64)),
            ("points", io::points_json(&res.best)),
        ]);
        io::write_json(dir.join("best.json"), &best)?;
    }
    match (reference, best_dist) {
        (Some(r), Some(dist)) => {
            let _ = writeln!(out, "distance to {} {:.3e} rad (tol {:.1e})", r.name(), dist, a.tol);
            if dist < a.tol {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(err, "reference distance {dist:.3e} exceeds tol {:.1e}", a.tol);
                Ok(EXIT_TOLERANCE)
            }
        }
        _ => {
            let _ = writeln!(out, "no reference polyhedron for d = {d}");
            Ok(EXIT_OK)
        }
    }
}

/// Discrete descent of the Green-function energy over mesh vertices.
fn renorm_on_mesh(a: &RenormArgs, d: usize, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mesh = Arc::new(a.source.load(3)?);
    if mesh.genus() != 0 {
        return Err(Error::Config("configuration search on a mesh needs genus 0".into()));
    }
    if !d.is_multiple_of(2) {
        return Err(Error::Config(format!("on a sphere-like mesh d = 2k is even, got {d}")));
    }
    let k = a.rank.unwrap_or((d / 2) as u32);
    check_rank(k)?;
    if 2 * k as usize != d {
        return Err(Error::Config(format!("d = {d} does not match rank {k} (d = 2k)")));
    }
    let bundle = levi_civita_connection(mesh.clone(), k)?;
    let cache = GreenCache::new(mesh.clone());
    let psi0 = renorm::psi0_and_energy(&bundle)?;
    let none = DMatrix::zeros(0, 0);
    let energy = |c: &Configuration| Ok(renorm::general_w(&bundle, c, &[], &none, &cache, &psi0)?.total);

    let mut results = Vec::new();
    for stream in 0..a.seeds as u64 {
        let mut rng = crate::rng::stream_rng(a.seed, stream);
        let mut pts = Vec::new();
        let mut attempts = 0;
        while pts.len() < d {
            attempts += 1;
            if attempts > 1000 * d {
                return Err(Error::Geometry("cannot place separated random points".into()));
            }
            let p = crate::rng::unit_sphere(&mut rng);
            let v = mesh.nearest_vertex(&(mesh.centroid() + Point::new(p[0], p[1], p[2]) * mesh.circumradius()));
            if !pts.contains(&v) && pts.iter().all(|&q| !mesh.neighbors(q).any(|n| n == v)) {
                pts.push(v);
            }
        }
        let start = Configuration::new(&mesh, pts)?;
        let (cfg, value, moves) = renorm::hill_descent(&mesh, start, a.max_iters, energy)?;
        let dist = reference_distance(&mesh, &cfg.positions(&mesh))?;
        results.push((stream, cfg, value, moves, dist));
    }
    let best = results
        .iter()
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .expect("at least one seed");
    let _ = writeln!(out, "d {d} on mesh with {} vertices, {} seeds", mesh.num_vertices(), a.seeds);
    let _ = writeln!(out, "best value {}", fmt_f64(best.2));
    let _ = writeln!(out, "best vertices {:?}", best.1.points());
    if let Some(dir) = &a.common.out {
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|(s, _, v, m, dist)| {
                vec![
                    s.to_string(),
                    fmt_f64(*v),
                    dist.as_ref().map_or("nan".into(), |x| fmt_f64(x.1)),
                    m.to_string(),
                ]
            })
            .collect();
        io::write_csv(dir.join("renorm.csv"), &["seed", "value", "distance", "moves"], &rows)?;
        let json = json_object(vec![
            ("d", d.into()),
            ("value", json_f64(best.2)),
            ("vertices", best.1.points().to_vec().into()),
            ("points", io::points_json(&best.1.positions(&mesh))),
        ]);
        io::write_json(dir.join("best.json"), &json)?;
    }
    match &best.4 {
        Some((name, dist)) => {
            let _ = writeln!(out, "distance to {name} {dist:.3e} rad (tol {:.1e})", a.tol);
            if *dist < a.tol {
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(err, "reference distance {dist:.3e} exceeds tol {:.1e}", a.tol);
                Ok(EXIT_TOLERANCE)
            }
        }
        None => {
            let _ = writeln!(out, "no reference polyhedron for d = {d}");
            Ok(EXIT_OK)
        }
    }
}

/// Configuration from explicit ids or from the snapped reference polyhedron.
fn resolve_points(mesh: &SurfaceMesh, bundle: &DiscreteBundle, points: Option<&str>) -> Result<Configuration> {
    if let Some(list) = points {
        return Configuration::new(mesh, parse_list("points", list)?);
    }
    let d = bundle.euler_number();
    if d == 0 {
        return Configuration::new(mesh, Vec::new());
    }
    let reference = usize::try_from(d)
        .ok()
        .and_then(ReferencePolyhedron::for_count)
        .ok_or_else(|| {
            Error::Config(format!("no reference polyhedron with {d} vertices; give points"))
        })?;
    let c = mesh.centroid();
    let r = mesh.circumradius();
    let placed: Vec<Point> = reference.vertices.iter().map(|p| c + p * r).collect();
    Configuration::snap(mesh, &placed)
}

fn cmd_harmonic(a: &HarmonicArgs, out: &mut dyn Write) -> Result<i32> {
    check_rank(a.rank)?;
    if a.window < 0 {
        return Err(Error::Config("window must be non-negative".into()));
    }
    if let Some(r) = a.rho0 {
        positive("rho0", r)?;
    }
    let mesh = Arc::new(a.source.load(4)?);
    let bundle = levi_civita_connection(mesh.clone(), a.rank)?;
    let config = resolve_points(&mesh, &bundle, a.points.as_deref())?;
    let fluxes: Vec<f64> = match &a.fluxes {
        Some(list) => parse_list("fluxes", list)?,
        None if mesh.genus() == 0 => Vec::new(),
        None => {
            let basis = harmonic_basis(&bundle)?;
            let lattice = lattice_offsets(&bundle, &config, &basis, a.window)?;
            lattice.offsets[0].clone()
        }
    };
    let canonical = canonical_harmonic_section(&bundle, &config, &fluxes)?;
    let vortices = vortex::detect_vortices_with_floor(&bundle, &canonical.u, 1e-3)?;
    let _ = writeln!(out, "euler number {}", bundle.euler_number());
    let _ = writeln!(out, "singular vertices {:?}", config.points());
    let _ = writeln!(
        out,
        "fluxes [{}]",
        fluxes.iter().map(|f| fmt_f64(*f)).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(
        out,
        "vortices {} (total degree {})",
        vortices.len(),
        vortices.total_degree
    );
    if let Some(rho0) = a.rho0 {
        let w = renormalized_energy_limit(&bundle, &canonical, &config, rho0, Extrapolation::SecondOrder)?;
        let _ = writeln!(
            out,
            "renormalized energy {} (estimated error {:.2e})",
            fmt_f64(w.value),
            w.error_estimate
        );
    }
    if let Some(dir) = &a.common.out {
        io::write_json(
            dir.join("section.json"),
            &io::section_json(&canonical.u, &fluxes, config.points()),
        )?;
        io::write_json(dir.join("vortices.json"), &io::vortices_json(&vortices))?;
        io::write_ply(&mesh, &rose_attributes(&mesh, &canonical.u, a.rank)?, dir.join("harmonic.ply"))?;
        let _ = writeln!(out, "wrote section.json, vortices.json, harmonic.ply to {}", dir.display());
    }
    Ok(EXIT_OK)
}

/// One line of the crosscheck reconciliation table.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckRow {
    fn relative(quantity: &str, value: f64, reference: f64, tol: f64) -> Self {
        CheckRow {
            quantity: quantity.into(),
            value,
            reference,
            tol,
            pass: ((value - reference) / reference).abs() < tol,
        }
    }

    pub fn rel_diff(&self) -> f64 {
        (self.value - self.reference) / self.reference.abs()
    }
}

fn cmd_crosscheck(a: &CrosscheckArgs, out: &mut dyn Write) -> Result<i32> {
    check_rank(a.rank)?;
    positive("rho0", a.rho0)?;
    positive("w-tol", a.w_tol)?;
    positive("bracket-tol", a.bracket_tol)?;
    let eps: Vec<f64> = parse_list("eps", &a.eps)?;
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!(
            "eps must be positive and strictly decreasing, got {}",
            a.eps
        )));
    }
    let mesh = Arc::new(a.source.load(5)?);
    if !on_unit_sphere(&mesh) {
        return Err(Error::Config("crosscheck needs a mesh inscribed in the unit sphere".into()));
    }
    let bundle = levi_civita_connection(mesh.clone(), a.rank)?;
    let config = resolve_points(&mesh, &bundle, None)?;
    let d = config.len();
    let positions = config.positions(&mesh);

    let canonical = canonical_harmonic_section(&bundle, &config, &[])?;
    let limit = renormalized_energy_limit(&bundle, &canonical, &config, a.rho0, Extrapolation::SecondOrder)?;
    let closed = renorm::sphere_w(&positions)? + renorm::sphere_offset(d);
    let cache = GreenCache::new(mesh.clone());
    let psi0 = renorm::psi0_and_energy(&bundle)?;
    let general = renorm::general_w(&bundle, &config, &[], &DMatrix::zeros(0, 0), &cache, &psi0)?;

    let gamma = gl::bbh_gamma()?;
    let target = d as f64 * gamma + closed;
    let profile = gl::bbh_profile(100.0, 20_000)?;
    let mut expansion = Vec::new();
    for &e in &eps {
        let u = gl::build_test_section(&bundle, &canonical, &config, e, &profile)?;
        let energy = gl::gl_energy(&bundle, &u, e);
        expansion.push(energy - std::f64::consts::PI * d as f64 * (1.0 / e).ln());
    }

    let mut rows = vec![
        CheckRow::relative("W limit vs closed form", limit.value, closed, a.w_tol),
        CheckRow::relative("W green vs closed form", general.total, closed, a.w_tol),
    ];
    for (e, x) in eps.iter().zip(&expansion) {
        rows.push(CheckRow::relative(
            &format!("E - pi d log(1/eps) at eps {e}"),
            *x,
            target,
            a.bracket_tol,
        ));
    }
    let last = rows.len() - 1;
    let decreasing = expansion.windows(2).all(|w| w[1] < w[0]);
    let approaching = expansion
        .windows(2)
        .all(|w| (w[1] - target).abs() < (w[0] - target).abs());
    // only the smallest epsilon has to fall inside the bracket
    let pass = rows[0].pass && rows[1].pass && rows[last].pass && decreasing && approaching;

    let _ = writeln!(out, "d {d}, gamma {}, W closed form {}", fmt_f64(gamma), fmt_f64(closed));
    let _ = writeln!(out, "W breakdown: pair {} self {} psi0 {} flux {}",
        fmt_f64(general.pair_term), fmt_f64(general.self_term), fmt_f64(general.psi0_term), fmt_f64(general.flux_term));
    let _ = writeln!(out, "{:<34} {:>14} {:>14} {:>10} {:>8}", "quantity", "value", "reference", "rel diff", "tol");
    for r in &rows {
        let _ = writeln!(
            out,
            "{:<34} {:>14.6} {:>14.6} {:>10.4} {:>8.3}",
            r.quantity, r.value, r.reference, r.rel_diff(), r.tol
        );
    }
    let _ = writeln!(out, "expansion decreasing {decreasing}, approaching {approaching}");
    let _ = writeln!(out, "{}", if pass { "crosscheck passed" } else { "crosscheck FAILED" });
    if let Some(dir) = &a.common.out {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.quantity.clone(),
                    fmt_f64(r.value),
                    fmt_f64(r.reference),
                    fmt_f64(r.rel_diff()),
                    fmt_f64(r.tol),
                    r.pass.to_string(),
                ]
            })
            .collect();
        io::write_csv(
            dir.join("crosscheck.csv"),
            &["quantity", "value", "reference", "rel_diff", "tol", "pass"],
            &table,
        )?;
    }
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write) -> Result<i32> {
    if a.max_rank < 2 || a.max_rank > tensor::MAX_RANK {
        return Err(Error::Config(format!(
            "max-rank must be between 2 and {}, got {}",
            tensor::MAX_RANK,
            a.max_rank
        )));
    }
    let angles = [0.3, 1.1, -2.5, 4.0];
    let checks = tensor::selftest(a.max_rank, &angles)?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        let _ = writeln!(
            out,
            "{} {:<52} max error {:.2e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_error
        );
    }
    if let Some(dir) = &a.common.out {
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| vec![format!("\"{}\"", c.name), fmt_f64(c.max_error), c.passed.to_string()])
            .collect();
        io::write_csv(dir.join("selftest.csv"), &["check", "max_error", "passed"], &rows)?;
    }
    let _ = writeln!(out, "{} of {} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len());
    Ok(if ok { EXIT_OK } else { EXIT_TOLERANCE })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn allowed(keys: &[&str]) -> Vec<String> {
        keys.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn config_parsing() {
        let keys = allowed(&["rank", "grad-tol", "icosphere"]);
        let e = parse_config("# run\nrank = 3\ngrad_tol=1e-9 # tight\n\n", &keys).unwrap();
        assert_eq!(e, vec![("rank".into(), "3".into()), ("grad-tol".into(), "1e-9".into())]);
        assert!(parse_config("bogus = 1\n", &keys).unwrap_err().contains("unknown key 'bogus'"));
        assert!(parse_config("rank = 1\nrank = 2\n", &keys).unwrap_err().contains("repeated"));
        assert!(parse_config("rank\n", &keys).unwrap_err().contains("line 1"));
        assert!(parse_config("rank =\n", &keys).is_err());
    }

    #[test]
    fn every_subcommand_parses_its_defaults() {
        for sub in ["mesh", "minimize", "renorm", "harmonic", "crosscheck", "tensor-selftest"] {
            let argv: Vec<OsString> = vec!["glvortex".into(), sub.into()];
            assert!(parse(&argv).is_ok(), "{sub}");
        }
        command().debug_assert();
    }
}
