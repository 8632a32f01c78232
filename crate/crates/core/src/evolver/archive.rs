//! Bounded elitist archive of mutually non-dominated solutions.

use crate::mesh::DualMeshGenotype;
use crate::objectives::ObjectiveVector;

#[derive(Debug, Clone)]
pub struct ArchiveMember {
    pub objectives: ObjectiveVector,
    pub genotype: DualMeshGenotype,
}

/// Nearest-neighbour distances in range-normalized objective space, kept
/// up to date across single insert/prune pairs and rebuilt otherwise.
#[derive(Debug, Clone, Default)]
struct Crowding {
    valid: bool,
    lo: [f64; 3],
    range: [f64; 3],
    nn: Vec<(f64, usize)>,
}

#[derive(Debug, Clone)]
pub struct ElitistArchive {
    members: Vec<ArchiveMember>,
    capacity: usize,
    /// Optional objective-space grid: a candidate sharing a cell with a
    /// member it does not dominate is rejected.
    cell_size: Option<[f64; 3]>,
    crowding: Crowding,
}

fn bounds(members: &[ArchiveMember]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for m in members {
        let a = m.objectives.as_array();
        for k in 0..3 {
            lo[k] = lo[k].min(a[k]);
            hi[k] = hi[k].max(a[k]);
        }
    }
    let range = [0, 1, 2].map(|k| if hi[k] > lo[k] { hi[k] - lo[k] } else { 1.0 });
    (lo, range)
}

#[inline]
fn ndist(a: &ObjectiveVector, b: &ObjectiveVector, range: &[f64; 3]) -> f64 {
    let (a, b) = (a.as_array(), b.as_array());
    (0..3).map(|k| ((a[k] - b[k]) / range[k]).powi(2)).sum::<f64>().sqrt()
}

impl ElitistArchive {
    pub fn new(capacity: usize) -> Self {
        Self {
            members: Vec::new(),
            capacity: capacity.max(1),
            cell_size: None,
            crowding: Crowding::default(),
        }
    }

    pub fn with_cell_size(mut self, cell: Option<[f64; 3]>) -> Self {
        self.cell_size = cell;
        self
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn members(&self) -> &[ArchiveMember] {
        &self.members
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    /// Whether any member strictly dominates `o`.
    pub fn dominated(&self, o: &ObjectiveVector) -> bool {
        self.members.iter().any(|m| m.objectives.dominates(o))
    }

    fn cell(&self, o: &ObjectiveVector) -> Option<[i64; 3]> {
        self.cell_size.map(|c| {
            let a = o.as_array();
            [0, 1, 2].map(|k| (a[k] / c[k]).floor() as i64)
        })
    }

    /// Insertion test: not weakly dominated, within the guidance bound and
    /// not crowding an existing grid cell.
    pub fn would_accept(&self, o: &ObjectiveVector, guidance_bound: Option<f64>) -> bool {
        if guidance_bound.is_some_and(|b| o.guidance > b) {
            return false;
        }
        if self.members.iter().any(|m| m.objectives.weakly_dominates(o)) {
            return false;
        }
        if let Some(c) = self.cell(o) {
            if self
                .members
                .iter()
                .any(|m| self.cell(&m.objectives) == Some(c) && !o.dominates(&m.objectives))
            {
                return false;
            }
        }
        true
    }

    /// Inserts if acceptable, removing members the newcomer dominates and
    /// pruning the most crowded member when over capacity. The genotype is
    /// only materialized on acceptance.
    pub fn insert_with(
        &mut self,
        o: ObjectiveVector,
        guidance_bound: Option<f64>,
        genotype: impl FnOnce() -> DualMeshGenotype,
    ) -> bool {
        if !self.would_accept(&o, guidance_bound) {
            return false;
        }
        let before = self.members.len();
        self.members.retain(|m| !o.dominates(&m.objectives));
        if self.members.len() != before {
            self.crowding.valid = false;
        }
        self.members.push(ArchiveMember {
            objectives: o,
            genotype: genotype(),
        });
        if self.members.len() > self.capacity {
            self.prune();
        } else {
            self.crowding.valid = false;
        }
        true
    }

    pub fn insert(&mut self, o: ObjectiveVector, genotype: &DualMeshGenotype, guidance_bound: Option<f64>) -> bool {
        self.insert_with(o, guidance_bound, || genotype.clone())
    }

    /// Members that are best in some objective (lowest index on ties).
    pub fn extremes(&self) -> [usize; 3] {
        let mut best = [0usize; 3];
        for (i, m) in self.members.iter().enumerate() {
            let a = m.objectives.as_array();
            for k in 0..3 {
                if a[k] < self.members[best[k]].objectives.as_array()[k] {
                    best[k] = i;
                }
            }
        }
        best
    }

    fn rebuild_crowding(&mut self) {
        let (lo, range) = bounds(&self.members);
        let n = self.members.len();
        let mut nn = vec![(f64::INFINITY, usize::MAX); n];
        for i in 0..n {
            for j in i + 1..n {
                let d = ndist(&self.members[i].objectives, &self.members[j].objectives, &range);
                if d < nn[i].0 {
                    nn[i] = (d, j);
                }
                if d < nn[j].0 {
                    nn[j] = (d, i);
                }
            }
        }
        self.crowding = Crowding {
            valid: true,
            lo,
            range,
            nn,
        };
    }

    /// Brings the cache up to date after exactly one push onto a valid cache.
    fn crowding_after_push(&mut self) {
        let (lo, range) = bounds(&self.members);
        let c = &self.crowding;
        if !c.valid || c.lo != lo || c.range != range || c.nn.len() + 1 != self.members.len() {
            self.rebuild_crowding();
            return;
        }
        let x = self.members.len() - 1;
        let mut own = (f64::INFINITY, usize::MAX);
        for i in 0..x {
            let d = ndist(&self.members[i].objectives, &self.members[x].objectives, &range);
            if d < self.crowding.nn[i].0 {
                self.crowding.nn[i] = (d, x);
            }
            if d < own.0 {
                own = (d, i);
            }
        }
        self.crowding.nn.push(own);
    }

    fn prune(&mut self) {
        self.crowding_after_push();
        let ext = self.extremes();
        let victim = (0..self.members.len())
            .filter(|i| !ext.contains(i))
            .min_by(|&a, &b| self.crowding.nn[a].0.total_cmp(&self.crowding.nn[b].0).then(a.cmp(&b)))
            .expect("capacity leaves a non-extreme member");
        self.members.remove(victim);
        self.crowding.nn.remove(victim);
        let (lo, range) = bounds(&self.members);
        if lo != self.crowding.lo || range != self.crowding.range {
            self.crowding.valid = false;
            return;
        }
        for i in 0..self.members.len() {
            let (_, j) = self.crowding.nn[i];
            if j == victim {
                let mut best = (f64::INFINITY, usize::MAX);
                for k in 0..self.members.len() {
                    if k != i {
                        let d = ndist(&self.members[i].objectives, &self.members[k].objectives, &range);
                        if d < best.0 {
                            best = (d, k);
                        }
                    }
                }
                self.crowding.nn[i] = best;
            } else if j > victim && j != usize::MAX {
                self.crowding.nn[i].1 = j - 1;
            }
        }
    }

    /// Removes members whose guidance exceeds `bound`.
    pub fn purge_guidance_above(&mut self, bound: f64) -> usize {
        let before = self.members.len();
        self.members.retain(|m| m.objectives.guidance <= bound);
        if self.members.len() != before {
            self.crowding.valid = false;
        }
        before - self.members.len()
    }

    pub fn best_guidance(&self) -> Option<&ArchiveMember> {
        self.members
            .iter()
            .min_by(|a, b| a.objectives.guidance.total_cmp(&b.objectives.guidance))
    }
}
