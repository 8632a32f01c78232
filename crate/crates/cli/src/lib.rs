//! Command implementations behind the `tetreg` binary.
//!
//! A run directory written by [`cmd_register`] holds:
//!
//! * `config.txt`: the effective configuration, re-runnable as is.
//! * `stats.csv`: one row per generation.
//! * `mesh.json`: topology and initial coordinates.
//! * `front.csv` and `front_genotypes.bin`: objectives and coordinates of
//!   every archive member (little-endian f64, source then target points).
//! * `run.json`: seed, steering state and the selected members.
//! * `selected/<name>/`: genotype, forward/inverse DVFs and metric reports
//!   of the three exported trade-off solutions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tetreg::config::RunConfig;
use tetreg::evolver::{run_with_observer, stats_csv, trade_off_indices, ArchiveMember, GenerationView, Problem};
use tetreg::mesh::{load_dvf, load_genotype, rasterize_dvf, save_dvf, save_genotype, DeformationVectorField, Direction, DualMeshGenotype};
use tetreg::metrics::{compare_masks, landmark_error, warp_mask, MetricReport, DEFAULT_MARGIN_MM};
use tetreg::render::{overlay_contours, render_arrows, render_grid, render_slice, Axis};
use tetreg::synth::{analytic_dvf_error, generate_case, load_bundle, write_bundle, ProblemBundle, SynthSpec};

pub const SELECTED: [&str; 3] = ["best_guidance", "knee", "best_magnitude"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tetreg::Error),

    #[error("usage: {0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration errors, 3 for unreadable or inconsistent data,
    /// 4 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        use tetreg::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Config(_)
                | E::ConfigSyntax { .. }
                | E::DuplicateKey(_)
                | E::TypeMismatch { .. }
                | E::MissingKey(_)
                | E::InvalidParameter(_) => 2,
                E::Io { .. }
                | E::Format { .. }
                | E::LengthMismatch { .. }
                | E::Geometry(_)
                | E::GeometryMismatch(_)
                | E::Empty(_)
                | E::SliceOutOfRange { .. } => 3,
                _ => 4,
            },
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(tetreg::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Generates a synthetic case into `out`.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> CliResult<ProblemBundle> {
    let bundle = generate_case(spec)?;
    write_bundle(out, &bundle)?;
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedMember {
    pub name: String,
    pub index: usize,
    pub objectives: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub generations: usize,
    pub archive_size: usize,
    pub num_points: usize,
    pub num_tets: usize,
    pub hypervolume_reference: [f64; 3],
    pub steering_bound: Option<f64>,
    pub selected: Vec<SelectedMember>,
}

/// Builds the problem from a bundle with the mesh, objective and seed
/// settings of `config`.
pub fn build_problem(config: &RunConfig, bundle: &ProblemBundle) -> CliResult<Problem> {
    let seed = config.seed()?;
    Ok(Problem::build(
        &bundle.source,
        &bundle.target,
        &bundle.guidance,
        &bundle.source_masks,
        &config.placement_config()?,
        &config.objective_config()?,
        seed,
    )?)
}

fn front_csv(members: &[ArchiveMember], seed: u64) -> String {
    let mut s = format!("# seed={seed}\nindex,magnitude,intensity,guidance\n");
    for (i, m) in members.iter().enumerate() {
        let o = m.objectives;
        let _ = writeln!(s, "{i},{:e},{:e},{:e}", o.magnitude, o.intensity, o.guidance);
    }
    s
}

fn front_genotypes(members: &[ArchiveMember]) -> Vec<u8> {
    let mut out = Vec::new();
    for m in members {
        for p in m.genotype.source.iter().chain(&m.genotype.target) {
            for a in 0..3 {
                out.extend_from_slice(&p[a].to_le_bytes());
            }
        }
    }
    out
}

/// Reads member `index` back from a run directory.
pub fn load_front_member(run_dir: &Path, index: usize) -> CliResult<DualMeshGenotype> {
    let base = load_genotype(run_dir.join("mesh.json"))?;
    let path = run_dir.join("front_genotypes.bin");
    let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
    let per = base.num_points() * 2 * 3 * 8;
    let chunk = bytes
        .get(index * per..(index + 1) * per)
        .ok_or_else(|| tetreg::Error::format(&path, format!("no member {index}")))?;
    let vals: Vec<f64> = chunk
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let pts: Vec<_> = vals
        .chunks_exact(3)
        .map(|c| tetreg::Vec3::new(c[0], c[1], c[2]))
        .collect();
    let n = base.num_points();
    Ok(DualMeshGenotype::new(
        base.topology.clone(),
        pts[..n].to_vec(),
        pts[n..].to_vec(),
    )?)
}

/// Runs the evolver on the bundle in `problem_dir` and writes a run
/// directory to `out`.
pub fn cmd_register(config: &RunConfig, problem_dir: &Path, out: &Path) -> CliResult<RunSummary> {
    cmd_register_observed(config, problem_dir, out, |_, _| {})
}

/// `cmd_register` with a callback at the end of every generation.
pub fn cmd_register_observed(
    config: &RunConfig,
    problem_dir: &Path,
    out: &Path,
    mut observer: impl FnMut(&Problem, &GenerationView),
) -> CliResult<RunSummary> {
    let seed = config.seed()?;
    let evolver = config.evolver_config()?;
    let bundle = load_bundle(problem_dir)?;
    let problem = build_problem(config, &bundle)?;
    let result = run_with_observer(&problem, &evolver, |v| {
        log::info!(
            "generation {} hypervolume {:e} best guidance {:e} archive {}",
            v.stats.generation,
            v.stats.hypervolume,
            v.stats.best_guidance,
            v.stats.archive_size
        );
        observer(&problem, v);
    })?;

    create_dir(out)?;
    write(&out.join("config.txt"), config.to_text())?;
    write(
        &out.join("stats.csv"),
        format!("# seed={seed}\n{}", stats_csv(&result.stats)),
    )?;
    save_genotype(out.join("mesh.json"), &problem.mesh.genotype)?;
    let members = result.archive.members();
    write(&out.join("front.csv"), front_csv(members, seed))?;
    write(&out.join("front_genotypes.bin"), front_genotypes(members))?;

    let mut selected = Vec::new();
    if let Some(idx) = trade_off_indices(&result.archive, result.steering.bound) {
        for (name, index) in SELECTED.iter().zip(idx) {
            let member = &members[index];
            let dir = out.join("selected").join(name);
            create_dir(&dir)?;
            save_genotype(dir.join("genotype.json"), &member.genotype)?;
            let (fwd, inv) = rasterize_pair(&member.genotype, &bundle);
            save_dvf(dir.join("dvf_forward"), &fwd)?;
            save_dvf(dir.join("dvf_inverse"), &inv)?;
            let report = evaluate(&bundle, &fwd, &inv, Some(&member.genotype), DEFAULT_MARGIN_MM)?;
            write(&dir.join("metrics.json"), report.to_json())?;
            write(&dir.join("metrics.csv"), report.to_csv())?;
            selected.push(SelectedMember {
                name: name.to_string(),
                index,
                objectives: member.objectives.as_array(),
            });
        }
    }
    let summary = RunSummary {
        seed,
        generations: evolver.num_generations,
        archive_size: members.len(),
        num_points: problem.mesh.genotype.num_points(),
        num_tets: problem.mesh.genotype.topology.num_tets(),
        hypervolume_reference: result.hypervolume_reference,
        steering_bound: result.steering.bound,
        selected,
    };
    write(&out.join("run.json"), json(&summary))?;
    Ok(summary)
}

fn rasterize_pair(g: &DualMeshGenotype, bundle: &ProblemBundle) -> (DeformationVectorField, DeformationVectorField) {
    let geometry = bundle.source.geometry;
    (
        rasterize_dvf(g, Direction::Forward, &geometry),
        rasterize_dvf(g, Direction::Inverse, &geometry),
    )
}

/// Per-label overlap and distance metrics of source masks warped by
/// `inverse` against the target masks, landmark error when a genotype is
/// given, and the analytic-field error of `forward` for synthetic cases.
pub fn evaluate(
    bundle: &ProblemBundle,
    forward: &DeformationVectorField,
    inverse: &DeformationVectorField,
    genotype: Option<&DualMeshGenotype>,
    margin_mm: f64,
) -> CliResult<MetricReport> {
    let warped = bundle
        .source_masks
        .iter()
        .map(|m| warp_mask(m, inverse))
        .collect::<tetreg::Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for w in &warped {
        let t = bundle.target_mask(&w.label).ok_or_else(|| {
            tetreg::Error::Empty(format!("no target mask for label {:?}", w.label))
        })?;
        pairs.push((w, t));
    }
    let landmarks = match genotype {
        Some(g) if !bundle.landmarks.is_empty() => Some(landmark_error(&bundle.landmarks, g)?),
        _ => None,
    };
    let field_error = match bundle.field() {
        Some(f) => Some(analytic_dvf_error(forward, f, margin_mm)?),
        None => None,
    };
    Ok(MetricReport {
        margin_mm,
        labels: compare_masks(&pairs, margin_mm)?,
        landmarks,
        field_error,
    })
}

/// What a deformation is read from.
#[derive(Debug, Clone)]
pub enum Deformation {
    Identity,
    Genotype(PathBuf),
    Fields { forward: PathBuf, inverse: PathBuf },
}

impl Deformation {
    fn resolve(&self, bundle: &ProblemBundle) -> CliResult<(DeformationVectorField, DeformationVectorField, Option<DualMeshGenotype>)> {
        let geometry = bundle.source.geometry;
        match self {
            Deformation::Identity => Ok((
                DeformationVectorField::zeros(geometry, Direction::Forward),
                DeformationVectorField::zeros(geometry, Direction::Inverse),
                None,
            )),
            Deformation::Genotype(path) => {
                let g = load_genotype(path)?;
                let (f, i) = rasterize_pair(&g, bundle);
                Ok((f, i, Some(g)))
            }
            Deformation::Fields { forward, inverse } => {
                let f = load_dvf(forward)?;
                let i = load_dvf(inverse)?;
                f.geometry.ensure_same(&geometry)?;
                i.geometry.ensure_same(&geometry)?;
                Ok((f, i, None))
            }
        }
    }
}

/// Writes `metrics.json` and `metrics.csv` into `out`.
pub fn cmd_evaluate(problem_dir: &Path, deformation: &Deformation, margin_mm: f64, out: &Path) -> CliResult<MetricReport> {
    let bundle = load_bundle(problem_dir)?;
    let (fwd, inv, g) = deformation.resolve(&bundle)?;
    let report = evaluate(&bundle, &fwd, &inv, g.as_ref(), margin_mm)?;
    create_dir(out)?;
    write(&out.join("metrics.json"), report.to_json())?;
    write(&out.join("metrics.csv"), report.to_csv())?;
    Ok(report)
}

/// Writes `dvf_forward` and `dvf_inverse` for a genotype on the problem grid.
pub fn cmd_rasterize(problem_dir: &Path, genotype: &Path, out: &Path) -> CliResult<()> {
    let bundle = load_bundle(problem_dir)?;
    let g = load_genotype(genotype)?;
    let (fwd, inv) = rasterize_pair(&g, &bundle);
    create_dir(out)?;
    save_dvf(out.join("dvf_forward"), &fwd)?;
    save_dvf(out.join("dvf_inverse"), &inv)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// Target slice with the warped source contours (or the source slice
    /// with its own contours under the identity).
    Contours,
    Grid,
    Arrows,
}

impl std::str::FromStr for RenderMode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "contours" => Ok(Self::Contours),
            "grid" => Ok(Self::Grid),
            "arrows" => Ok(Self::Arrows),
            _ => Err(CliError::Usage(format!("unknown render mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderRequest {
    pub mode: RenderMode,
    pub axis: Axis,
    pub index: usize,
    /// Grid line and arrow spacing in voxels.
    pub step: usize,
    pub zoom: usize,
}

pub fn cmd_render(problem_dir: &Path, deformation: &Deformation, req: &RenderRequest, out: &Path) -> CliResult<()> {
    let bundle = load_bundle(problem_dir)?;
    let (fwd, inv, _) = deformation.resolve(&bundle)?;
    let img = match req.mode {
        RenderMode::Contours => {
            let (volume, masks) = match deformation {
                Deformation::Identity => (&bundle.source, bundle.source_masks.clone()),
                _ => (
                    &bundle.target,
                    bundle
                        .source_masks
                        .iter()
                        .map(|m| warp_mask(m, &inv))
                        .collect::<tetreg::Result<Vec<_>>>()?,
                ),
            };
            let base = render_slice(volume, req.axis, req.index)?;
            let refs: Vec<_> = masks.iter().collect();
            overlay_contours(&base, &refs, req.axis, req.index)?.upscale(req.zoom)
        }
        RenderMode::Grid => render_grid(&fwd, req.axis, req.index, req.step, req.zoom)?,
        RenderMode::Arrows => render_arrows(&fwd, req.axis, req.index, req.step, req.zoom)?,
    };
    img.save(out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontFormat {
    Csv,
    Json,
}

impl std::str::FromStr for FrontFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(CliError::Usage(format!("unknown front format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub index: usize,
    pub magnitude: f64,
    pub intensity: f64,
    pub guidance: f64,
    pub feasible: bool,
    pub genotype: String,
    pub selected: Option<String>,
}

/// Reads `front.csv` and `run.json` of a run directory.
pub fn read_front(run_dir: &Path) -> CliResult<Vec<FrontRow>> {
    let path = run_dir.join("front.csv");
    let text = read(&path)?;
    let summary: Option<RunSummary> = match read(&run_dir.join("run.json")) {
        Ok(s) => serde_json::from_str(&s).ok(),
        Err(_) => None,
    };
    let bad = |line: usize| tetreg::Error::format(&path, format!("bad row on line {line}"));
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("index") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(n + 1).into());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 1));
        let index: usize = f[0].parse().map_err(|_| bad(n + 1))?;
        let selected = summary.as_ref().and_then(|s| {
            let names: Vec<_> = s
                .selected
                .iter()
                .filter(|m| m.index == index)
                .map(|m| format!("selected/{}", m.name))
                .collect();
            (!names.is_empty()).then(|| names.join(";"))
        });
        rows.push(FrontRow {
            index,
            magnitude: num(f[1])?,
            intensity: num(f[2])?,
            guidance: num(f[3])?,
            feasible: true,
            genotype: format!("front_genotypes.bin#{index}"),
            selected,
        });
    }
    Ok(rows)
}

/// Writes the front sorted by guidance (ties by index) to `out`.
pub fn cmd_export_front(run_dir: &Path, format: FrontFormat, out: &Path) -> CliResult<Vec<FrontRow>> {
    let mut rows = read_front(run_dir)?;
    rows.sort_by(|a, b| a.guidance.total_cmp(&b.guidance).then(a.index.cmp(&b.index)));
    let text = match format {
        FrontFormat::Json => json(&rows),
        FrontFormat::Csv => {
            let mut s = String::from("index,magnitude,intensity,guidance,feasible,genotype,selected\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{:e},{:e},{:e},{},{},{}",
                    r.index,
                    r.magnitude,
                    r.intensity,
                    r.guidance,
                    r.feasible,
                    r.genotype,
                    r.selected.as_deref().unwrap_or("")
                );
            }
            s
        }
    };
    write(out, text)?;
    Ok(rows)
}
