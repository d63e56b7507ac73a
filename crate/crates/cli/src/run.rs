//! End-to-end drivers: mesh → blocks → operator → contour solver → files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use faer::c64;
use gratres_core::analysis::{self, classify, content_hash, convergence_orders, link_branches, BandRow, ModeClass};
use gratres_core::assembly::{assemble_blocks, GratingOperator};
use gratres_core::geometry::GratingGeometry;
use gratres_core::materials::{PermittivityModel, Scaling};
use gratres_core::mesh::{generate_mesh, io as mesh_io, Mesh};
use gratres_core::nep::{residual_norm, solve_region, AuditEvent};
use serde::Serialize;

use crate::config::{ConfigError, MeshSource, RunConfig};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "GRATRES_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "gratres-out";

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(String),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) | RunError::Io(_) => 2,
        }
    }
}

/// Outcome of a run that produced output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Some regions (or κ samples) failed, others succeeded.
    Partial,
    /// Every region failed.
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 2,
            Status::Partial => 3,
        }
    }

    fn from_counts(ok: usize, failed: usize) -> Self {
        match (ok, failed) {
            (_, 0) => Status::Ok,
            (0, _) => Status::Failed,
            _ => Status::Partial,
        }
    }
}

/// Command-line path, then `[output] dir`, then the environment, then the default.
pub fn output_dir(cfg: &RunConfig, cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// A validated configuration with its resolved geometry, material and base mesh.
pub struct Problem {
    pub config: RunConfig,
    pub geometry: GratingGeometry,
    pub material: PermittivityModel,
    pub scaling: Option<Scaling>,
    pub base_mesh: Mesh,
    pub config_hash: String,
}

impl Problem {
    pub fn new(config: RunConfig) -> Result<Self, RunError> {
        config.validate()?;
        let geometry = config.geometry();
        let material = config.material()?;
        let scaling = config.scaling()?;
        let base_mesh = match config.mesh_source()? {
            MeshSource::Generate(p) => generate_mesh(&geometry, p).map_err(|e| RunError::Numerical(format!("mesh generation: {e}")))?,
            MeshSource::File(path) => {
                let m = mesh_io::import_mesh(&path).map_err(|e| ConfigError(format!("mesh.file: {}: {e}", path.display())))?;
                let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
                if !same(m.period, geometry.period) || !same(m.half_height, geometry.half_height) {
                    return Err(ConfigError(format!(
                        "mesh.file: cell {} × {} does not match geometry period {} and half height {}",
                        m.period, m.half_height, geometry.period, geometry.half_height
                    ))
                    .into());
                }
                m
            }
        };
        let config_hash = content_hash(config.to_toml().as_bytes());
        Ok(Self { config, geometry, material, scaling, base_mesh, config_hash })
    }

    pub fn mesh_at(&self, level: usize) -> Mesh {
        let mut m = self.base_mesh.clone();
        for _ in 0..level {
            m = m.refine_uniform();
        }
        m
    }

    pub fn operator(&self, mesh: &Mesh, kappa: f64) -> Result<GratingOperator, RunError> {
        let blocks = assemble_blocks(mesh, kappa, self.config.dtn.order).map_err(|e| RunError::Numerical(e.to_string()))?;
        Ok(GratingOperator::new(blocks, self.material)
            .map_err(|e| RunError::Numerical(e.to_string()))?
            .with_exclusion(self.config.material.exclusion))
    }
}

/// One accepted eigenvalue as written to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRow {
    pub kappa: f64,
    pub region: usize,
    pub disk_id: usize,
    pub re: f64,
    pub im: f64,
    /// Step-3 validation magnitude.
    pub metric: f64,
    /// `‖G(k)v‖₂/‖v‖₂`.
    pub residual: f64,
    pub class: ModeClass,
    pub surface_fraction: f64,
    pub slit_fraction: f64,
    /// `c·α·Re k` in THz when a length scaling is configured.
    pub thz: Option<f64>,
    pub mesh_level: usize,
    pub dof: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub row: SolveRow,
    pub vector: Vec<c64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub kappa: f64,
    pub region: usize,
    #[serde(flatten)]
    pub event: AuditEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionFailure {
    pub kappa: f64,
    pub region: usize,
    pub error: String,
}

/// All regions at one Bloch wavenumber.
#[derive(Debug, Clone)]
pub struct KappaOutcome {
    pub kappa: f64,
    pub eigenpairs: Vec<Eigenpair>,
    pub audit: Vec<AuditRecord>,
    pub failures: Vec<RegionFailure>,
    pub regions_ok: usize,
}

pub fn solve_kappa(problem: &Problem, mesh: &Mesh, level: usize, kappa: f64) -> KappaOutcome {
    let mut out = KappaOutcome { kappa, eigenpairs: Vec::new(), audit: Vec::new(), failures: Vec::new(), regions_ok: 0 };
    let regions = &problem.config.regions;
    let op = match problem.operator(mesh, kappa) {
        Ok(op) => op,
        Err(e) => {
            for region in 0..regions.len() {
                out.failures.push(RegionFailure { kappa, region, error: e.to_string() });
            }
            return out;
        }
    };
    let dof = gratres_core::nep::NonlinearOperator::dim(&op);
    for (ri, region) in regions.iter().enumerate() {
        let res = match solve_region(&op, region, &problem.config.solver) {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(RegionFailure { kappa, region: ri, error: e.to_string() });
                continue;
            }
        };
        out.regions_ok += 1;
        out.audit.extend(res.audit.events.into_iter().map(|event| AuditRecord { kappa, region: ri, event }));
        for e in res.eigenvalues {
            let residual = residual_norm(&op, e.k, &e.eigenvector).unwrap_or(f64::NAN);
            let fractions = classify(mesh, &problem.geometry, &e.eigenvector, &problem.config.classify).ok();
            out.eigenpairs.push(Eigenpair {
                row: SolveRow {
                    kappa,
                    region: ri,
                    disk_id: e.disk_id,
                    re: e.k.re,
                    im: e.k.im,
                    metric: e.residual,
                    residual,
                    class: fractions.map_or(ModeClass::Unclassified, |f| f.class),
                    surface_fraction: fractions.map_or(f64::NAN, |f| f.surface),
                    slit_fraction: fractions.map_or(f64::NAN, |f| f.slit),
                    thz: problem.scaling.map(|s| s.terahertz(e.k.re)),
                    mesh_level: level,
                    dof,
                    config_hash: problem.config_hash.clone(),
                },
                vector: e.eigenvector,
            });
        }
    }
    out.eigenpairs.sort_by(|a, b| {
        a.row.re.total_cmp(&b.row.re).then(a.row.im.total_cmp(&b.row.im)).then(a.row.region.cmp(&b.row.region))
    });
    out
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_audit(path: &Path, outcomes: &[&KappaOutcome]) -> Result<(), RunError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for o in outcomes {
        for r in &o.audit {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        for f in &o.failures {
            let v = serde_json::json!({ "kappa": f.kappa, "region": f.region, "event": "region_failed", "error": f.error });
            serde_json::to_writer(&mut w, &v).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub outcome: KappaOutcome,
    pub status: Status,
    pub files: Vec<PathBuf>,
}

/// Single-κ solve of every configured region.
pub fn run_solve(config: RunConfig, out_dir: &Path) -> Result<SolveReport, RunError> {
    config.require_regions()?;
    let kappa = config.kappa()?;
    let level = config.mesh.refinement;
    let problem = Problem::new(config)?;
    let mesh = problem.mesh_at(level);
    let outcome = solve_kappa(&problem, &mesh, level, kappa);

    fs::create_dir_all(out_dir)?;
    let mut files = vec![out_dir.join("eigenvalues.csv"), out_dir.join("audit.jsonl"), out_dir.join("config.toml")];
    write_csv(&files[0], outcome.eigenpairs.iter().map(|e| &e.row))?;
    write_audit(&files[1], &[&outcome])?;
    fs::write(&files[2], problem.config.to_toml())?;
    if problem.config.output.fields && !outcome.eigenpairs.is_empty() {
        let mesh_path = out_dir.join("mesh.txt");
        mesh_io::export_mesh(&mesh, &mesh_path).map_err(|e| RunError::Numerical(e.to_string()))?;
        files.push(mesh_path);
        for (i, e) in outcome.eigenpairs.iter().enumerate() {
            let p = out_dir.join(format!("field_{i:03}.txt"));
            analysis::export_eigenfunction(&mesh, "mesh.txt", kappa, c64::new(e.row.re, e.row.im), &e.vector, &p)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            files.push(p);
        }
    }
    let status = Status::from_counts(outcome.regions_ok, outcome.failures.len());
    Ok(SolveReport { outcome, status, files })
}

/// One row of `bands.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandCsvRow {
    pub kappa: f64,
    pub branch: usize,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub class: ModeClass,
    pub thz: Option<f64>,
    pub mesh_level: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub outcomes: Vec<KappaOutcome>,
    pub bands: Vec<BandCsvRow>,
    pub status: Status,
}

/// Band structure over `κ ∈ [0, π/d]`, κ samples solved on up to `jobs` threads.
pub fn run_sweep(config: RunConfig, out_dir: &Path, jobs: usize) -> Result<SweepReport, RunError> {
    config.require_regions()?;
    let kappas = config.sweep_kappas()?;
    let level = config.mesh.refinement;
    let problem = Problem::new(config)?;
    let mesh = problem.mesh_at(level);

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<KappaOutcome>>> = Mutex::new(vec![None; kappas.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, kappas.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= kappas.len() {
                    break;
                }
                let o = solve_kappa(&problem, &mesh, level, kappas[i]);
                slots.lock().expect("no worker panicked")[i] = Some(o);
            });
        }
    });
    let outcomes: Vec<KappaOutcome> =
        slots.into_inner().expect("no worker panicked").into_iter().map(|o| o.expect("every sample solved")).collect();

    let mut rows: Vec<BandRow> = outcomes
        .iter()
        .flat_map(|o| {
            o.eigenpairs.iter().map(|e| BandRow {
                kappa: e.row.kappa,
                branch: 0,
                k: c64::new(e.row.re, e.row.im),
                residual: e.row.residual,
                class: e.row.class,
            })
        })
        .collect();
    link_branches(&mut rows);
    let bands: Vec<BandCsvRow> = rows
        .iter()
        .map(|r| BandCsvRow {
            kappa: r.kappa,
            branch: r.branch,
            re: r.k.re,
            im: r.k.im,
            residual: r.residual,
            class: r.class,
            thz: problem.scaling.map(|s| s.terahertz(r.k.re)),
            mesh_level: level,
            config_hash: problem.config_hash.clone(),
        })
        .collect();

    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join("bands.csv"), &bands)?;
    write_audit(&out_dir.join("audit.jsonl"), &outcomes.iter().collect::<Vec<_>>())?;
    fs::write(out_dir.join("config.toml"), problem.config.to_toml())?;
    let ok: usize = outcomes.iter().map(|o| o.regions_ok).sum();
    let failed: usize = outcomes.iter().map(|o| o.failures.len()).sum();
    Ok(SweepReport { outcomes, bands, status: Status::from_counts(ok, failed) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dof: usize,
    pub re: Option<f64>,
    pub im: Option<f64>,
    pub residual: Option<f64>,
    /// `log₂|(k^j − k^{j−1})/(k^{j+1} − k^j)|`, blank where undefined.
    pub order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub status: Status,
}

/// Smallest eigenvalue (by real part) of the first region on each level of the ladder.
pub fn run_convergence(config: RunConfig, out_dir: &Path) -> Result<ConvergenceReport, RunError> {
    config.require_regions()?;
    let kappa = config.kappa()?;
    let levels = config.converge_levels()?;
    let mut problem = Problem::new(config)?;
    problem.config.regions.truncate(1);

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    let mut mesh = problem.mesh_at(levels[0]);
    let mut at = levels[0];
    for &level in &levels {
        while at < level {
            mesh = mesh.refine_uniform();
            at += 1;
        }
        let o = solve_kappa(&problem, &mesh, level, kappa);
        let smallest = o.eigenpairs.iter().map(|e| &e.row).min_by(|a, b| a.re.total_cmp(&b.re));
        rows.push(ConvergenceRow {
            level,
            dof: mesh.num_nodes() + mesh.pairs.len(),
            re: smallest.map(|r| r.re),
            im: smallest.map(|r| r.im),
            residual: smallest.map(|r| r.residual),
            order: None,
        });
        outcomes.push(o);
    }
    let found: Vec<Option<c64>> = rows.iter().map(|r| r.re.zip(r.im).map(|(a, b)| c64::new(a, b))).collect();
    if found.iter().all(Option::is_some) {
        let ks: Vec<c64> = found.into_iter().flatten().collect();
        for (r, o) in rows.iter_mut().zip(convergence_orders(&ks)) {
            r.order = o;
        }
    }

    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join("convergence.csv"), &rows)?;
    write_audit(&out_dir.join("audit.jsonl"), &outcomes.iter().collect::<Vec<_>>())?;
    fs::write(out_dir.join("config.toml"), problem.config.to_toml())?;
    let ok = rows.iter().filter(|r| r.re.is_some()).count();
    Ok(ConvergenceReport { status: Status::from_counts(ok, rows.len() - ok), rows })
}
