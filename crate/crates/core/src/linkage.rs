//! Static linkage model: mesh edges as FOS elements, chosen by greedy set
//! cover, with an interaction graph over shared dependent tets and a DSATUR
//! coloring whose classes may be varied in parallel.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::mesh::TetTopology;
use crate::{Error, Result};

/// Coordinates of both endpoints on both meshes: 2 points × 2 sides × 3.
pub const ELEMENT_VARIABLES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FosElement {
    pub edge: [u32; 2],
    /// Tets incident to either endpoint, ascending.
    pub dependent_tets: Vec<u32>,
}

impl FosElement {
    pub fn new(topology: &TetTopology, edge: [u32; 2]) -> Self {
        let mut dependent_tets: Vec<u32> = topology
            .incident_tets(edge[0] as usize)
            .iter()
            .chain(topology.incident_tets(edge[1] as usize))
            .copied()
            .collect();
        dependent_tets.sort_unstable();
        dependent_tets.dedup();
        Self {
            edge,
            dependent_tets,
        }
    }

    pub fn points(&self) -> [usize; 2] {
        [self.edge[0] as usize, self.edge[1] as usize]
    }
}

/// Edge ids covering every point, picked greedily by the number of newly
/// covered endpoints with ties to the lowest id.
pub fn greedy_set_cover(edges: &[[u32; 2]], num_points: usize) -> Result<Vec<usize>> {
    let mut touched = vec![false; num_points];
    for e in edges {
        touched[e[0] as usize] = true;
        touched[e[1] as usize] = true;
    }
    if let Some(p) = touched.iter().position(|&t| !t) {
        return Err(Error::IsolatedPoint(p));
    }
    // Gains only shrink, so scanning in id order for each gain level picks
    // the same edges as re-evaluating the best gain after every step.
    let mut covered = vec![false; num_points];
    let mut chosen = Vec::new();
    for want in [2usize, 1] {
        for (id, e) in edges.iter().enumerate() {
            let gain = e.iter().filter(|&&p| !covered[p as usize]).count();
            if gain >= want {
                chosen.push(id);
                covered[e[0] as usize] = true;
                covered[e[1] as usize] = true;
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Generic greedy set cover over explicit subsets (ties to the lowest id).
pub fn greedy_cover_sets(sets: &[Vec<usize>], universe: usize) -> Option<Vec<usize>> {
    let mut covered = vec![false; universe];
    let mut left = universe;
    let mut chosen = Vec::new();
    while left > 0 {
        let (best, gain) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.iter().filter(|&&x| !covered[x]).collect::<BTreeSet<_>>().len()))
            .fold((usize::MAX, 0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
        if gain == 0 {
            return None;
        }
        for &x in &sets[best] {
            if !covered[x] {
                covered[x] = true;
                left -= 1;
            }
        }
        chosen.push(best);
    }
    Some(chosen)
}

/// Adjacency lists (ascending) linking elements whose dependent tets overlap.
pub fn build_interaction_graph(elements: &[FosElement], num_tets: usize) -> Vec<Vec<usize>> {
    let mut by_tet: Vec<Vec<usize>> = vec![Vec::new(); num_tets];
    for (i, e) in elements.iter().enumerate() {
        for &t in &e.dependent_tets {
            by_tet[t as usize].push(i);
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); elements.len()];
    for users in &by_tet {
        for &a in users {
            for &b in users {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// DSATUR: colour the node with the most distinct neighbour colours next,
/// ties by degree then lowest id; each node takes the smallest free colour.
pub fn dsatur_coloring(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut color = vec![usize::MAX; n];
    let mut sat: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for _ in 0..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if color[v] != usize::MAX {
                continue;
            }
            if pick == usize::MAX
                || sat[v].len() > sat[pick].len()
                || (sat[v].len() == sat[pick].len() && adj[v].len() > adj[pick].len())
            {
                pick = v;
            }
        }
        let c = (0..).find(|c| !sat[pick].contains(c)).expect("free colour exists");
        color[pick] = c;
        for &u in &adj[pick] {
            sat[u].insert(c);
        }
    }
    color
}

/// Elements, their colours, and the colour classes in ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FosPlan {
    pub elements: Vec<FosElement>,
    pub colors: Vec<usize>,
    pub num_colors: usize,
    #[serde(skip)]
    pub classes: Vec<Vec<usize>>,
}

impl FosPlan {
    pub fn build(topology: &TetTopology) -> Result<Self> {
        let edges = topology.edges();
        let cover = greedy_set_cover(edges, topology.num_points())?;
        let elements: Vec<FosElement> = cover.iter().map(|&i| FosElement::new(topology, edges[i])).collect();
        let adj = build_interaction_graph(&elements, topology.num_tets());
        let colors = dsatur_coloring(&adj);
        let num_colors = colors.iter().map(|c| c + 1).max().unwrap_or(0);
        let mut classes = vec![Vec::new(); num_colors];
        for (i, &c) in colors.iter().enumerate() {
            classes[c].push(i);
        }
        Ok(Self {
            elements,
            colors,
            num_colors,
            classes,
        })
    }

    /// Largest number of times any tet is a dependent of elements in one class.
    pub fn max_touches_per_class(&self, num_tets: usize) -> usize {
        let mut worst = 0;
        let mut count = vec![0usize; num_tets];
        for class in &self.classes {
            count.iter_mut().for_each(|c| *c = 0);
            for &e in class {
                for &t in &self.elements[e].dependent_tets {
                    count[t as usize] += 1;
                    worst = worst.max(count[t as usize]);
                }
            }
        }
        worst
    }

    /// Whether every point is an endpoint of some element.
    pub fn covers(&self, num_points: usize) -> bool {
        let mut c = vec![false; num_points];
        for e in &self.elements {
            c[e.edge[0] as usize] = true;
            c[e.edge[1] as usize] = true;
        }
        c.iter().all(|&x| x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}
