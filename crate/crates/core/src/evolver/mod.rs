//! Multi-objective gene-pool optimal mixing over dual-mesh genotypes.

mod archive;
mod cluster;
mod distribution;
mod hypervolume;
mod mixing;
mod noise;
mod repair;

use std::fmt::Write as _;

use rayon::prelude::*;

pub use archive::{ArchiveMember, ElitistArchive};
pub use cluster::{crowding_distances, nondominated_ranks, normalize, select, select_and_cluster, Clustering};
pub use distribution::{element_variables, split_variables, ElementMatrix, ElementVector, Gaussian};
pub use hypervolume::{hypervolume3, hypervolume3_clipped};
pub use mixing::{accepts, optimal_mixing, propose, MixingStats, Patch, Proposal};
pub use noise::{init_population, perturb, NoiseConfig, NoiseMethod};
pub use repair::{
    point_severity, repair, repair_points, surrounding_distance, PointView, RepairConfig, RepairMethod, RepairOutcome,
};

use crate::linkage::FosPlan;
use crate::mesh::{detect_folds, DualMeshGenotype, Side};
use crate::meshgen::{build_initial_genotype, InitialMesh, PointPlacementConfig};
use crate::objectives::{Accumulators, ObjectiveConfig, ObjectiveContext, ObjectiveVector};
use crate::volume::{GuidanceSet, LabelMask, Volume};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolverConfig {
    pub population_size: usize,
    pub num_clusters: usize,
    pub archive_capacity: usize,
    pub num_generations: usize,
    pub steering_enabled: bool,
    pub steering_activation_generation: usize,
    pub steering_ratio: f64,
    pub selection_fraction: f64,
    pub repair_method: RepairMethod,
    pub repair: RepairConfig,
    pub noise: NoiseConfig,
    pub archive_cell_size: Option<[f64; 3]>,
    pub seed: u64,
}

impl Default for EvolverConfig {
    fn default() -> Self {
        Self {
            population_size: 700,
            num_clusters: 10,
            archive_capacity: 2000,
            num_generations: 500,
            steering_enabled: true,
            steering_activation_generation: 100,
            steering_ratio: 1.5,
            selection_fraction: 0.35,
            repair_method: RepairMethod::Gaussian,
            repair: RepairConfig::default(),
            noise: NoiseConfig::default(),
            archive_cell_size: None,
            seed: 0,
        }
    }
}

impl EvolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.population_size == 0 || self.num_clusters == 0 || self.archive_capacity < 4 {
            return bad("population, clusters and archive capacity must be positive (capacity at least 4)");
        }
        if self.steering_enabled && (self.steering_activation_generation == 0 || !(self.steering_ratio > 1.0)) {
            return bad("steering needs a positive activation generation and a ratio above 1");
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 1.0) {
            return bad("selection fraction must lie in (0, 1]");
        }
        if self.repair.samples == 0 || !(self.repair.sigma_scale > 0.0) {
            return bad("repair needs samples and a positive sigma scale");
        }
        self.noise.validate()
    }
}

/// A problem instance: normalized images, objectives, initial mesh and the
/// linkage plan derived from it.
#[derive(Debug, Clone)]
pub struct Problem {
    pub context: ObjectiveContext,
    pub mesh: InitialMesh,
    pub plan: FosPlan,
}

impl Problem {
    pub fn new(context: ObjectiveContext, mesh: InitialMesh) -> Result<Self> {
        let plan = FosPlan::build(&mesh.genotype.topology)?;
        Ok(Self { context, mesh, plan })
    }

    pub fn build(
        source: &Volume,
        target: &Volume,
        guidance: &GuidanceSet,
        masks: &[LabelMask],
        placement: &PointPlacementConfig,
        objectives: &ObjectiveConfig,
        seed: u64,
    ) -> Result<Self> {
        source.geometry.ensure_same(&target.geometry)?;
        let mesh = build_initial_genotype(&source.geometry, guidance, masks, placement, seed)?;
        let context = ObjectiveContext::new(source, target, Some(guidance), masks, &mesh.genotype, objectives)?;
        Self::new(context, mesh)
    }

    pub fn evaluate(&self, genotype: DualMeshGenotype) -> Solution {
        let accumulators = self.context.evaluate(&genotype);
        let feasible = Side::BOTH
            .into_iter()
            .all(|s| detect_folds(&genotype, s, &self.mesh.reference_signs).is_empty());
        Solution {
            objectives: accumulators.objectives(),
            genotype,
            accumulators,
            feasible,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub genotype: DualMeshGenotype,
    pub objectives: ObjectiveVector,
    pub accumulators: Accumulators,
    pub feasible: bool,
}

impl Solution {
    /// Largest relative difference between the stored objectives and a
    /// full re-evaluation.
    pub fn drift(&self, ctx: &ObjectiveContext) -> f64 {
        self.objectives.max_relative_diff(&ctx.evaluate(&self.genotype).objectives())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteeringState {
    pub active: bool,
    /// Best guidance in the archive when last applied.
    pub best_guidance: f64,
    /// Guidance bound enforced while active.
    pub bound: Option<f64>,
}

/// Activates and tightens the guidance bound at `generation ≥ activation`.
pub fn apply_steering(archive: &mut ElitistArchive, state: &mut SteeringState, generation: usize, cfg: &EvolverConfig) {
    if !cfg.steering_enabled || generation < cfg.steering_activation_generation {
        return;
    }
    let Some(best) = archive.best_guidance().map(|m| m.objectives.guidance) else {
        return;
    };
    let bound = cfg.steering_ratio * best;
    archive.purge_guidance_above(bound);
    *state = SteeringState {
        active: true,
        best_guidance: best,
        bound: Some(bound),
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub hypervolume: f64,
    pub best_guidance: f64,
    pub archive_size: usize,
}

impl GenerationStats {
    pub const CSV_HEADER: &'static str = "generation,hypervolume,best_guidance,archive_size";

    pub fn csv_row(&self) -> String {
        format!("{},{:e},{:e},{}", self.generation, self.hypervolume, self.best_guidance, self.archive_size)
    }
}

pub fn stats_csv(rows: &[GenerationStats]) -> String {
    let mut s = String::from(GenerationStats::CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// State visible to observers at the end of every generation.
pub struct GenerationView<'a> {
    pub stats: &'a GenerationStats,
    pub archive: &'a ElitistArchive,
    pub population: &'a [Solution],
    pub steering: &'a SteeringState,
    pub mixing: &'a MixingStats,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub archive: ElitistArchive,
    pub population: Vec<Solution>,
    pub stats: Vec<GenerationStats>,
    pub steering: SteeringState,
    pub hypervolume_reference: [f64; 3],
    pub mixing: MixingStats,
}

fn hypervolume_of(archive: &ElitistArchive, reference: [f64; 3]) -> f64 {
    let pts: Vec<[f64; 3]> = archive.members().iter().map(|m| m.objectives.as_array()).collect();
    hypervolume3_clipped(&pts, reference)
}

fn record(gen: usize, archive: &ElitistArchive, reference: [f64; 3]) -> GenerationStats {
    GenerationStats {
        generation: gen,
        hypervolume: hypervolume_of(archive, reference),
        best_guidance: archive.best_guidance().map_or(f64::NAN, |m| m.objectives.guidance),
        archive_size: archive.len(),
    }
}

/// Per-element models of one cluster.
fn estimate_cluster(problem: &Problem, population: &[Solution], members: &[usize]) -> Vec<Gaussian> {
    problem
        .plan
        .elements
        .par_iter()
        .map(|e| {
            let xs: Vec<ElementVector> = members
                .iter()
                .map(|&i| element_variables(&population[i].genotype, e.points()))
                .collect();
            Gaussian::estimate(&xs)
        })
        .collect()
}

pub fn run(problem: &Problem, cfg: &EvolverConfig) -> Result<RunResult> {
    run_with_observer(problem, cfg, |_| {})
}

/// Initializes, then runs `num_generations` generations of selection,
/// clustering, model estimation, optimal mixing and steering.
pub fn run_with_observer(
    problem: &Problem,
    cfg: &EvolverConfig,
    mut observer: impl FnMut(&GenerationView),
) -> Result<RunResult> {
    cfg.validate()?;
    let mesh = &problem.mesh;
    let genotypes = init_population(
        &mesh.genotype,
        &mesh.reference_signs,
        |p| mesh.is_corner(p),
        &mesh.bounds,
        cfg.population_size,
        &cfg.noise,
        cfg.seed,
    );
    let mut population: Vec<Solution> = genotypes.into_iter().map(|g| problem.evaluate(g)).collect();
    if !population[0].feasible {
        return Err(Error::Folded(0));
    }

    let mut archive = ElitistArchive::new(cfg.archive_capacity).with_cell_size(cfg.archive_cell_size);
    for s in population.iter().filter(|s| s.feasible) {
        archive.insert(s.objectives, &s.genotype, None);
    }
    let mut reference = [0.0f64; 3];
    for m in archive.members() {
        let a = m.objectives.as_array();
        for k in 0..3 {
            reference[k] = reference[k].max(a[k]);
        }
    }
    let reference = reference.map(|r| 1.1 * r + 1e-9);

    let mut steering = SteeringState::default();
    let mut total = MixingStats::default();
    let mut stats = vec![record(0, &archive, reference)];
    observer(&GenerationView {
        stats: &stats[0],
        archive: &archive,
        population: &population,
        steering: &steering,
        mixing: &total,
    });

    let mut touch = Vec::new();
    let mut stamp = 0u64;
    for gen in 1..=cfg.num_generations {
        let objs: Vec<ObjectiveVector> = population.iter().map(|s| s.objectives).collect();
        let clustering = select_and_cluster(&objs, cfg.num_clusters, cfg.selection_fraction);
        let models: Vec<Vec<Gaussian>> = clustering
            .clusters
            .iter()
            .map(|c| estimate_cluster(problem, &population, c))
            .collect();
        let mut gen_stats = MixingStats::default();
        for (i, sol) in population.iter_mut().enumerate() {
            if !sol.feasible {
                continue;
            }
            let m = optimal_mixing(
                problem,
                cfg,
                sol,
                i,
                gen,
                &models[clustering.assignment[i]],
                &mut archive,
                steering.bound,
                &mut touch,
                &mut stamp,
            );
            gen_stats.merge(&m);
        }
        apply_steering(&mut archive, &mut steering, gen, cfg);
        total.merge(&gen_stats);
        stats.push(record(gen, &archive, reference));
        log::debug!("generation {gen}: {:?} {:?}", stats[gen], gen_stats);
        observer(&GenerationView {
            stats: &stats[gen],
            archive: &archive,
            population: &population,
            steering: &steering,
            mixing: &gen_stats,
        });
    }

    Ok(RunResult {
        archive,
        population,
        stats,
        steering,
        hypervolume_reference: reference,
        mixing: total,
    })
}

/// Archive indices of the three default exported solutions: best guidance,
/// the knee (farthest from the worst point in normalized space) and the
/// best magnitude within `bound`.
pub fn trade_off_indices(archive: &ElitistArchive, bound: Option<f64>) -> Option<[usize; 3]> {
    let objs = archive.objectives();
    if objs.is_empty() {
        return None;
    }
    let by = |f: &dyn Fn(usize) -> f64, keep: &dyn Fn(usize) -> bool| {
        (0..objs.len())
            .filter(|&i| keep(i))
            .min_by(|&a, &b| f(a).total_cmp(&f(b)).then(a.cmp(&b)))
    };
    let best_guidance = by(&|i| objs[i].guidance, &|_| true)?;
    let norm = normalize(&objs);
    let knee = by(
        &|i| -norm[i].iter().map(|x| (1.0 - x) * (1.0 - x)).sum::<f64>(),
        &|_| true,
    )?;
    let within = |i: usize| bound.is_none_or(|b| objs[i].guidance <= b);
    let best_magnitude = by(&|i| objs[i].magnitude, &within).unwrap_or(best_guidance);
    Some([best_guidance, knee, best_magnitude])
}
