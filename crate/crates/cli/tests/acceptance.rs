//! End-to-end acceptance protocol. Prints one PASS/FAIL line per criterion.
//!
//! The default protocol is a reduced synthetic experiment sized for a test
//! run; `ACCEPTANCE_FULL=1` switches to the full 64³ protocol.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use tetreg::config::parse_config;
use tetreg::evolver::{hypervolume3, ElitistArchive, GenerationView, Problem};
use tetreg::geometry::Aabb;
use tetreg::linkage::build_interaction_graph;
use tetreg::mesh::{
    barycentric_coords, detect_folds, detect_folds_in, load_genotype, locate_point, locate_point_brute_force,
    tet_signed_volume, DualMeshGenotype, Side,
};
use tetreg::meshgen::{delaunay_tetrahedralize, PointPlacementConfig};
use tetreg::metrics::{dice, hausdorff, hausdorff_brute_force, surface_points_from_mask, MetricReport};
use tetreg::objectives::{ObjectiveConfig, ObjectiveVector};
use tetreg::render::Axis;
use tetreg::synth::{generate_case, load_bundle, SynthSpec};
use tetreg::volume::{distance_map_brute_force, distance_map_from_points, Geometry, LabelMask};
use tetreg::Vec3;
use tetreg_cli::{cmd_evaluate, cmd_register_observed, cmd_render, cmd_synth, Deformation, RenderMode, RenderRequest};

const DICE_MIN: f64 = 0.90;
const DVF_ERROR_MAX_VOXELS: f64 = 2.0;
const RUNTIME_MAX: Duration = Duration::from_secs(30 * 60);
const STEERING_RATIO: f64 = 1.5;
const MARGIN_MM: f64 = 15.0;

struct Protocol {
    name: &'static str,
    size: usize,
    spacing_mm: f64,
    points: Option<usize>,
    population: usize,
    clusters: usize,
    generations: usize,
    archive: usize,
    activation: usize,
    noise: (&'static str, f64),
    seeds: [u64; 5],
}

impl Protocol {
    fn reduced() -> Self {
        Self {
            name: "reduced",
            size: 24,
            spacing_mm: 4.0,
            points: Some(200),
            population: 40,
            clusters: 3,
            generations: 60,
            archive: 2000,
            activation: 21,
            noise: ("rbf-kernels", 2.0),
            seeds: [1, 2, 3, 4, 5],
        }
    }

    fn full() -> Self {
        Self {
            name: "full",
            size: 64,
            spacing_mm: 1.5,
            points: None,
            population: 700,
            clusters: 10,
            generations: 500,
            archive: 2000,
            activation: 100,
            noise: ("global-gaussian", 1.0),
            seeds: [1, 2, 3, 4, 5],
        }
    }

    fn config(&self, seed: u64, homogeneous: bool) -> String {
        let mut s = format!(
            "seed = {seed}\n\
             ea_num_generations = {}\n\
             ea_population_size = {}\n\
             ea_num_clusters = {}\n\
             ea_archive_size = {}\n\
             ea_adaptive_steering_activated_at_num_generations = {}\n\
             ea_adaptive_steering_guidance_threshold = {STEERING_RATIO:?}\n\
             morea_init_noise_method = \"{}\"\n\
             morea_init_noise_factor = {:?}\n",
            self.generations, self.population, self.clusters, self.archive, self.activation, self.noise.0, self.noise.1
        );
        if let Some(n) = self.points {
            s += &format!("morea_mesh_num_points = {n}\n");
        }
        if homogeneous {
            s += "morea_magnitude_metric = \"homogeneous\"\n";
        }
        s
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Invariant counters gathered at every generation end of a run.
#[derive(Default)]
struct RunCheck {
    generations: usize,
    members_checked: usize,
    folds: usize,
    dominated_pairs: usize,
    max_archive: usize,
    steering_checked: usize,
    steering_violations: usize,
    hv_checked: usize,
    hv_decreases: usize,
    linkage: Option<LinkageCheck>,
    prev: Option<(f64, usize)>,
}

struct LinkageCheck {
    covers: bool,
    proper: bool,
    max_touches: usize,
}

fn check_linkage(problem: &Problem) -> LinkageCheck {
    let topo = &problem.mesh.genotype.topology;
    let plan = &problem.plan;
    let adj = build_interaction_graph(&plan.elements, topo.num_tets());
    let proper = adj
        .iter()
        .enumerate()
        .all(|(a, nbrs)| nbrs.iter().all(|&b| plan.colors[a] != plan.colors[b]));
    LinkageCheck {
        covers: plan.covers(topo.num_points()),
        proper,
        max_touches: plan.max_touches_per_class(topo.num_tets()),
    }
}

impl RunCheck {
    fn observe(&mut self, problem: &Problem, v: &GenerationView, capacity: usize, activation: usize) {
        if self.linkage.is_none() {
            self.linkage = Some(check_linkage(problem));
        }
        self.generations += 1;
        let objs = v.archive.objectives();
        self.max_archive = self.max_archive.max(objs.len());
        for (i, a) in objs.iter().enumerate() {
            for (j, b) in objs.iter().enumerate() {
                if i != j && a.weakly_dominates(b) {
                    self.dominated_pairs += 1;
                }
            }
        }
        for m in v.archive.members() {
            self.members_checked += 1;
            for side in Side::BOTH {
                self.folds += detect_folds(&m.genotype, side, &problem.mesh.reference_signs).len();
            }
        }
        let generation = v.stats.generation;
        if generation >= activation && !objs.is_empty() {
            let lo = objs.iter().map(|o| o.guidance).fold(f64::INFINITY, f64::min);
            let hi = objs.iter().map(|o| o.guidance).fold(f64::NEG_INFINITY, f64::max);
            self.steering_checked += 1;
            if hi > STEERING_RATIO * lo * (1.0 + 1e-12) {
                self.steering_violations += 1;
            }
        }
        let cur = (v.stats.hypervolume, v.stats.archive_size);
        if let Some((hv, size)) = self.prev {
            if generation < activation && size < capacity && cur.1 < capacity {
                self.hv_checked += 1;
                if cur.0 < hv * (1.0 - 1e-12) {
                    self.hv_decreases += 1;
                }
            }
        }
        self.prev = Some(cur);
    }
}

struct RunOutcome {
    dir: PathBuf,
    check: RunCheck,
    elapsed: Duration,
}

fn register(p: &Protocol, problem: &Path, out: &Path, seed: u64, homogeneous: bool, threads: usize) -> RunOutcome {
    let cfg = parse_config(&p.config(seed, homogeneous)).expect("protocol config parses");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    let start = Instant::now();
    let check = pool.install(|| {
        let mut check = RunCheck::default();
        cmd_register_observed(&cfg, problem, out, |prob, v| check.observe(prob, v, p.archive, p.activation))
            .expect("register succeeds");
        check
    });
    RunOutcome {
        dir: out.to_path_buf(),
        check,
        elapsed: start.elapsed(),
    }
}

fn label_dice(r: &MetricReport, label: &str) -> f64 {
    r.labels.iter().find(|l| l.label == label).map_or(f64::NAN, |l| l.dice)
}

fn best_guidance(run: &Path) -> PathBuf {
    run.join("selected/best_guidance/genotype.json")
}

/// Mean displacement length of mesh points whose source position lies in `mask`.
fn mean_displacement_inside(g: &DualMeshGenotype, mask: &LabelMask) -> (f64, usize) {
    let d: Vec<f64> = g
        .source
        .iter()
        .zip(&g.target)
        .filter(|(s, _)| mask.contains_point(s))
        .map(|(s, t)| (t - s).norm())
        .collect();
    (d.iter().sum::<f64>() / d.len().max(1) as f64, d.len())
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable dir") {
            let path = e.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("inside dir").to_path_buf();
                out.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

fn renders(problem: &Path, run: &Path, out: &Path) {
    fs::create_dir_all(out).expect("render dir");
    let g = Deformation::Genotype(best_guidance(run));
    for (name, mode) in [
        ("contours.ppm", RenderMode::Contours),
        ("grid.pgm", RenderMode::Grid),
        ("arrows.ppm", RenderMode::Arrows),
    ] {
        let req = RenderRequest {
            mode,
            axis: Axis::Z,
            index: load_bundle(problem).expect("bundle").source.geometry.dims[2] / 2,
            step: 2,
            zoom: 4,
        };
        cmd_render(problem, &g, &req, &out.join(name)).expect("render succeeds");
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| Vec3::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)))
        .collect()
}

fn unit_box() -> Aabb {
    Aabb::new(Vec3::repeat(-12.0), Vec3::repeat(12.0))
}

fn random_genotype(n: usize, seed: u64) -> DualMeshGenotype {
    let d = delaunay_tetrahedralize(&random_points(n, seed), Some(&unit_box())).expect("delaunay");
    DualMeshGenotype::identity(Arc::new(d.topology), d.points).expect("identity genotype")
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn criterion_3() -> Verdict {
    let spec = SynthSpec::preset(16, 6.0);
    let bundle = generate_case(&spec).expect("case");
    let placement = PointPlacementConfig {
        total_points: 14,
        ..Default::default()
    };
    let p = Problem::build(
        &bundle.source,
        &bundle.target,
        &bundle.guidance,
        &bundle.source_masks,
        &placement,
        &ObjectiveConfig::default(),
        1,
    )
    .expect("problem");
    let refs = &p.mesh.reference_signs;
    let mut g = p.mesh.genotype.clone();
    let mut acc = p.context.evaluate(&g);
    let mut r = rng(3);
    let (mut compared, mut mismatches, mut worst) = (0, 0, 0.0f64);
    for _ in 0..1000 {
        let e = &p.plan.elements[r.random_range(0..p.plan.elements.len())];
        let old = g.clone();
        for q in e.points() {
            if p.mesh.is_corner(q) {
                continue;
            }
            for side in Side::BOTH {
                let d = Vec3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
                g.coords_mut(side)[q] += d;
            }
        }
        let tets = e.dependent_tets.iter().map(|&t| t as usize);
        if Side::BOTH
            .into_iter()
            .any(|s| !detect_folds_in(&g, s, refs, tets.clone()).is_empty())
        {
            g = old;
            continue;
        }
        let inc = p.context.partial_update(&g, &mut acc, &e.dependent_tets);
        let full = p.context.evaluate(&g).objectives();
        compared += 1;
        worst = worst.max(inc.max_relative_diff(&full));
        if !inc.as_array().iter().zip(full.as_array()).all(|(a, b)| rel_close(*a, b, 1e-9)) {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0 && compared > 0,
        format!(
            "{} tets, 1000 steps, {compared} fold-free compared, {mismatches} mismatches, worst rel diff {worst:.1e} (tol 1e-9)",
            p.mesh.genotype.topology.num_tets()
        ),
    )
}

fn circumsphere(p: &[Vec3; 4]) -> (Vec3, f64) {
    let rows: Vec<Vector3<f64>> = (1..4).map(|i| p[i] - p[0]).collect();
    let a = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
    let b = Vector3::new(rows[0].norm_squared(), rows[1].norm_squared(), rows[2].norm_squared()) * 0.5;
    let c = a.lu().solve(&b).expect("non-degenerate tet");
    (p[0] + c, c.norm())
}

fn criterion_4() -> Verdict {
    let mut violations = 0;
    for seed in 0..20 {
        let d = delaunay_tetrahedralize(&random_points(100, seed), Some(&unit_box())).expect("delaunay");
        for t in d.topology.tets() {
            let (c, rad) = circumsphere(&t.map(|i| d.points[i as usize]));
            for (i, q) in d.points.iter().enumerate() {
                if !t.contains(&(i as u32)) && (q - c).norm() < rad * (1.0 - 1e-9) {
                    violations += 1;
                }
            }
        }
    }
    let g = random_genotype(60, 7);
    let mut r = rng(99);
    let mut disagreements = 0;
    for _ in 0..1000 {
        let q = Vec3::new(r.random_range(-12.0..12.0), r.random_range(-12.0..12.0), r.random_range(-12.0..12.0));
        let a = locate_point(&g, Side::Source, &q);
        let b = locate_point_brute_force(&g, Side::Source, &q);
        let agree = match (a, b) {
            (Some(a), Some(b)) if a != b => [a, b].iter().all(|&t| {
                barycentric_coords(&g.tet_points(Side::Source, t), &q).is_ok_and(|w| w.iter().all(|&x| x >= -1e-9))
            }),
            (a, b) => a == b,
        };
        disagreements += usize::from(!agree);
    }
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p: [Vec3; 4] = std::array::from_fn(|_| {
            Vec3::new(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0), r.random_range(-50.0..50.0))
        });
        if tet_signed_volume(&p).abs() < 1.0 {
            continue;
        }
        let w: [f64; 4] = std::array::from_fn(|_| r.random_range(0.01..1.0));
        let s: f64 = w.iter().sum();
        let q = (0..4).map(|i| p[i] * (w[i] / s)).sum::<Vec3>();
        let b = barycentric_coords(&p, &q).expect("inside");
        let back = (0..4).map(|i| p[i] * b[i]).sum::<Vec3>();
        worst = worst.max((back - q).norm());
    }
    verdict(
        violations == 0 && disagreements == 0 && worst < 1e-9,
        format!(
            "circumsphere violations {violations} on 20x100 points, locate disagreements {disagreements}/1000, max barycentric residual {worst:.1e} mm"
        ),
    )
}

fn criterion_5(runs: &[&RunOutcome]) -> Verdict {
    let mut meshes = 0;
    let mut bad = 0;
    for seed in 0..20 {
        let g = random_genotype(80, 1000 + seed);
        let plan = tetreg::linkage::FosPlan::build(&g.topology).expect("plan");
        let adj = build_interaction_graph(&plan.elements, g.topology.num_tets());
        let proper = adj
            .iter()
            .enumerate()
            .all(|(a, nbrs)| nbrs.iter().all(|&b| plan.colors[a] != plan.colors[b]));
        meshes += 1;
        bad += usize::from(!(plan.covers(g.topology.num_points()) && proper && plan.max_touches_per_class(g.topology.num_tets()) == 1));
    }
    for run in runs {
        let l = run.check.linkage.as_ref().expect("observed at least once");
        meshes += 1;
        bad += usize::from(!(l.covers && l.proper && l.max_touches == 1));
    }
    verdict(bad == 0, format!("{meshes} meshes (20 random + {} run meshes), {bad} invalid", runs.len()))
}

fn criterion_6(runs: &[&RunOutcome], capacity: usize) -> Verdict {
    let dominated: usize = runs.iter().map(|r| r.check.dominated_pairs).sum();
    let max_size = runs.iter().map(|r| r.check.max_archive).max().unwrap_or(0);
    let steer: usize = runs.iter().map(|r| r.check.steering_violations).sum();
    let steer_checked: usize = runs.iter().map(|r| r.check.steering_checked).sum();

    let g = random_genotype(8, 5);
    let mut archive = ElitistArchive::new(1000);
    let mut r = rng(17);
    let mut best = [f64::INFINITY; 3];
    let mut lost = 0;
    for _ in 0..3000 {
        let x: [f64; 3] = std::array::from_fn(|_| r.random_range(0.001..1.0));
        let s: f64 = x.iter().sum();
        let o = ObjectiveVector::new(x[0] / s, x[1] / s, x[2] / s);
        if archive.insert(o, &g, None) {
            for (b, v) in best.iter_mut().zip(o.as_array()) {
                *b = b.min(v);
            }
        }
        let objs = archive.objectives();
        for k in 0..3 {
            if !objs.iter().any(|o| o.as_array()[k] == best[k]) {
                lost += 1;
            }
        }
    }
    verdict(
        dominated == 0 && max_size <= capacity && steer == 0 && lost == 0 && steer_checked > 0,
        format!(
            "weakly dominated pairs {dominated}, max archive {max_size} (cap {capacity}), steering violations {steer}/{steer_checked} generation ends, extremes lost {lost} in 3000-insert stress (cap 1000)"
        ),
    )
}

fn criterion_8(runs: &[&RunOutcome]) -> Verdict {
    let reference = [1.0; 3];
    let mut worst = 0.0f64;
    for f in 0..20u64 {
        let mut r = rng(500 + f);
        let pts: Vec<[f64; 3]> = (0..25)
            .map(|_| {
                let x: [f64; 3] = std::array::from_fn(|_| r.random_range(0.05..1.0));
                let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                x.map(|v| 1.0 - v / n)
            })
            .collect();
        let exact = hypervolume3(&pts, reference).expect("hypervolume");
        let samples = 10_000_000u64;
        let mut hits = 0u64;
        for _ in 0..samples {
            let s: [f64; 3] = std::array::from_fn(|_| r.random::<f64>());
            if pts.iter().any(|p| p[0] <= s[0] && p[1] <= s[1] && p[2] <= s[2]) {
                hits += 1;
            }
        }
        let mc = hits as f64 / samples as f64;
        worst = worst.max((exact - mc).abs() / exact);
    }
    let decreases: usize = runs.iter().map(|r| r.check.hv_decreases).sum();
    let checked: usize = runs.iter().map(|r| r.check.hv_checked).sum();
    verdict(
        worst <= 0.01 && decreases == 0,
        format!(
            "max |exact-MC|/exact {worst:.2e} over 20 fronts at 1e7 samples (tol 1e-2), pre-steering hypervolume decreases {decreases}/{checked} checked steps"
        ),
    )
}

fn blob(seed: u64, g: Geometry) -> LabelMask {
    let mut r = rng(seed);
    let balls: Vec<(Vec3, f64)> = (0..3)
        .map(|_| {
            let c = g.world(r.random_range(4..28), r.random_range(4..28), r.random_range(4..28));
            (c, r.random_range(3.0..9.0))
        })
        .collect();
    LabelMask::from_fn(g, "blob", |p| balls.iter().any(|(c, rad)| (p - c).norm() <= *rad))
}

fn dice_brute(a: &LabelMask, b: &LabelMask) -> f64 {
    let g = a.geometry;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                let (x, y) = (a.get(i, j, k), b.get(i, j, k));
                na += usize::from(x);
                nb += usize::from(y);
                both += usize::from(x && y);
            }
        }
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

fn criterion_9() -> Verdict {
    let g = Geometry::new([32, 32, 32], [1.0, 1.5, 2.0], [-3.0, 0.5, 1.0]).expect("geometry");
    let mut mismatches = 0;
    let mut dist_worst = 0.0f64;
    for s in 0..10u64 {
        let (a, b) = (blob(2 * s, g), blob(2 * s + 1, g));
        mismatches += usize::from(dice(&a, &b).expect("dice") != dice_brute(&a, &b));
        let (sa, sb) = (
            surface_points_from_mask(&a).expect("surface"),
            surface_points_from_mask(&b).expect("surface"),
        );
        for pct in [100.0, 95.0] {
            mismatches += usize::from(hausdorff(&sa, &sb, pct).expect("hausdorff") != hausdorff_brute_force(&sa, &sb, pct));
        }
        let mut r = rng(700 + s);
        let pts: Vec<Vec3> = (0..20)
            .map(|_| Vec3::new(r.random_range(-5.0..30.0), r.random_range(0.0..48.0), r.random_range(0.0..64.0)))
            .collect();
        let fast = distance_map_from_points(&pts, &g).expect("distance map");
        let slow = distance_map_brute_force(&pts, &g).expect("distance map");
        for (x, y) in fast.data.iter().zip(&slow.data) {
            dist_worst = dist_worst.max((x - y).abs() / y.max(1.0));
        }
    }
    verdict(
        mismatches == 0 && dist_worst <= 1e-9,
        format!(
            "10 random 32³ pairs: dice/hd100/hd95 mismatches {mismatches}, distance map max rel diff {dist_worst:.1e} (tol 1e-9)"
        ),
    )
}

fn main() {
    let p = if std::env::var_os("ACCEPTANCE_FULL").is_some_and(|v| v == "1") {
        Protocol::full()
    } else {
        Protocol::reduced()
    };
    println!(
        "acceptance protocol {}: {}³ at {} mm, population {}, {} clusters, {} generations, archive {}, steering from generation {}, init noise {} x{}, seeds {:?}",
        p.name, p.size, p.spacing_mm, p.population, p.clusters, p.generations, p.archive, p.activation, p.noise.0, p.noise.1, p.seeds
    );
    let tmp = TempDir::new().expect("temp dir");
    let problem = tmp.path().join("problem");
    cmd_synth(&SynthSpec::preset(p.size, p.spacing_mm), &problem).expect("synth");
    let bundle = load_bundle(&problem).expect("bundle");
    let bone = bundle.source_mask("bone").expect("bone mask").clone();

    let mut verdicts: Vec<(usize, Verdict)> = Vec::new();
    let mut heterogeneous = Vec::new();
    for &seed in &p.seeds {
        heterogeneous.push(register(&p, &problem, &tmp.path().join(format!("het{seed}")), seed, false, 4));
    }
    let mut homogeneous = Vec::new();
    for &seed in &p.seeds {
        homogeneous.push(register(&p, &problem, &tmp.path().join(format!("hom{seed}")), seed, true, 4));
    }

    let identity = cmd_evaluate(&problem, &Deformation::Identity, MARGIN_MM, &tmp.path().join("eval-identity"))
        .expect("identity evaluation");
    let baseline = label_dice(&identity, "bladder");
    let mut c1_ok = true;
    let mut rows = Vec::new();
    for (run, seed) in heterogeneous.iter().zip(p.seeds) {
        let report = cmd_evaluate(
            &problem,
            &Deformation::Genotype(best_guidance(&run.dir)),
            MARGIN_MM,
            &tmp.path().join(format!("eval{seed}")),
        )
        .expect("evaluation");
        let d = label_dice(&report, "bladder");
        let err = report.field_error.as_ref().map_or(f64::NAN, |e| e.mean_mm) / p.spacing_mm;
        c1_ok &= d >= DICE_MIN && err <= DVF_ERROR_MAX_VOXELS && d > baseline && run.elapsed <= RUNTIME_MAX;
        rows.push(format!("seed {seed}: dice {d:.3} err {err:.2} vox {:.0}s", run.elapsed.as_secs_f64()));
    }
    verdicts.push((
        1,
        verdict(
            c1_ok,
            format!(
                "bladder dice >= {DICE_MIN}, mean DVF error <= {DVF_ERROR_MAX_VOXELS} voxels, dice > identity {baseline:.3}, <= 30 min/seed; {}",
                rows.join("; ")
            ),
        ),
    ));

    let all: Vec<&RunOutcome> = heterogeneous.iter().chain(&homogeneous).collect();
    let folds: usize = all.iter().map(|r| r.check.folds).sum();
    let members: usize = all.iter().map(|r| r.check.members_checked).sum();
    let gens: usize = all.iter().map(|r| r.check.generations).sum();
    verdicts.push((
        2,
        verdict(
            folds == 0 && members > 0,
            format!("{folds} folded tets over {members} archive members at {gens} generation ends, both meshes, {} runs", all.len()),
        ),
    ));
    verdicts.push((3, criterion_3()));
    verdicts.push((4, criterion_4()));
    verdicts.push((5, criterion_5(&all)));
    verdicts.push((6, criterion_6(&all, p.archive)));

    let mut het_sum = 0.0;
    let mut hom_sum = 0.0;
    let mut wins = 0;
    let mut inside = 0;
    for (a, b) in heterogeneous.iter().zip(&homogeneous) {
        let (dh, nh) = mean_displacement_inside(&load_genotype(best_guidance(&a.dir)).expect("genotype"), &bone);
        let (dm, _) = mean_displacement_inside(&load_genotype(best_guidance(&b.dir)).expect("genotype"), &bone);
        het_sum += dh;
        hom_sum += dm;
        wins += usize::from(dh < dm);
        inside += nh;
    }
    let n = p.seeds.len() as f64;
    verdicts.push((
        7,
        verdict(
            inside > 0 && het_sum < hom_sum,
            format!(
                "mean bone-point displacement heterogeneous {:.3} mm vs homogeneous {:.3} mm over {} seeds (smaller in {wins}/{} seeds, {inside} bone points)",
                het_sum / n,
                hom_sum / n,
                p.seeds.len(),
                p.seeds.len()
            ),
        ),
    ));
    verdicts.push((8, criterion_8(&all)));
    verdicts.push((9, criterion_9()));

    let first = &heterogeneous[0];
    let again = register(&p, &problem, &tmp.path().join("rerun"), p.seeds[0], false, 1);
    renders(&problem, &first.dir, &tmp.path().join("render-a"));
    renders(&problem, &again.dir, &tmp.path().join("render-b"));
    let (fa, fb) = (files(&first.dir), files(&again.dir));
    let (ra, rb) = (files(&tmp.path().join("render-a")), files(&tmp.path().join("render-b")));
    let differing: Vec<String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .chain(ra.keys().filter(|k| ra.get(*k) != rb.get(*k)))
        .map(|k| k.display().to_string())
        .collect();
    verdicts.push((
        10,
        verdict(
            differing.is_empty() && ra.len() == 3,
            format!(
                "seed {} with 4 vs 1 worker threads: {} run files and {} renders compared, {} differ {:?}",
                p.seeds[0],
                fa.len(),
                ra.len(),
                differing.len(),
                differing
            ),
        ),
    ));

    let passed = verdicts.iter().filter(|(_, v)| v.pass).count();
    for (n, v) in &verdicts {
        println!("criterion {n}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {passed}/{} criteria passed", verdicts.len());
}
