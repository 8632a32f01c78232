//! Truncation selection by non-domination rank and balanced clustering in
//! normalized objective space.

use crate::objectives::ObjectiveVector;

/// Non-domination rank of every point (0 = first front).
pub fn nondominated_ranks(objs: &[ObjectiveVector]) -> Vec<usize> {
    let n = objs.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if objs[i].dominates(&objs[j]) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if objs[j].dominates(&objs[i]) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        r += 1;
    }
    rank
}

/// Crowding distance of each member of one front (infinite at the extremes).
pub fn crowding_distances(objs: &[ObjectiveVector], front: &[usize]) -> Vec<f64> {
    let mut dist = vec![0.0; front.len()];
    for k in 0..3 {
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            objs[front[a]].as_array()[k]
                .total_cmp(&objs[front[b]].as_array()[k])
                .then(a.cmp(&b))
        });
        let lo = objs[front[order[0]]].as_array()[k];
        let hi = objs[front[*order.last().expect("non-empty front")]].as_array()[k];
        dist[order[0]] = f64::INFINITY;
        dist[*order.last().expect("non-empty front")] = f64::INFINITY;
        if hi > lo {
            for w in 1..order.len().saturating_sub(1) {
                let prev = objs[front[order[w - 1]]].as_array()[k];
                let next = objs[front[order[w + 1]]].as_array()[k];
                dist[order[w]] += (next - prev) / (hi - lo);
            }
        }
    }
    dist
}

/// The best `ceil(fraction · n)` indices by rank, then crowding, then id.
pub fn select(objs: &[ObjectiveVector], fraction: f64) -> Vec<usize> {
    let n = objs.len();
    let want = ((fraction * n as f64).ceil() as usize).clamp(1.min(n), n);
    let rank = nondominated_ranks(objs);
    let mut out = Vec::with_capacity(want);
    let mut r = 0;
    while out.len() < want {
        let front: Vec<usize> = (0..n).filter(|&i| rank[i] == r).collect();
        if out.len() + front.len() <= want {
            out.extend(&front);
        } else {
            let cd = crowding_distances(objs, &front);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]).then(front[a].cmp(&front[b])));
            out.extend(order.iter().take(want - out.len()).map(|&i| front[i]));
        }
        r += 1;
    }
    out.sort_unstable();
    out
}

/// Min-max normalized copies (constant objectives map to 0).
pub fn normalize(objs: &[ObjectiveVector]) -> Vec<[f64; 3]> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for o in objs {
        let a = o.as_array();
        for k in 0..3 {
            lo[k] = lo[k].min(a[k]);
            hi[k] = hi[k].max(a[k]);
        }
    }
    objs.iter()
        .map(|o| {
            let a = o.as_array();
            [0, 1, 2].map(|k| if hi[k] > lo[k] { (a[k] - lo[k]) / (hi[k] - lo[k]) } else { 0.0 })
        })
        .collect()
}

#[inline]
fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Population indices per cluster.
    pub clusters: Vec<Vec<usize>>,
    /// Cluster means in normalized objective space.
    pub means: Vec<[f64; 3]>,
    /// Cluster of every population member (nearest mean).
    pub assignment: Vec<usize>,
}

/// Selects, then splits the selection into `min(k, |selection|)` clusters
/// of sizes differing by at most one: leaders by farthest-point seeding
/// from the best first objective, then each leader in turn takes its
/// nearest unassigned members.
pub fn select_and_cluster(objs: &[ObjectiveVector], k: usize, fraction: f64) -> Clustering {
    let sel = select(objs, fraction);
    let norm_all = normalize(objs);
    let pts: Vec<[f64; 3]> = sel.iter().map(|&i| norm_all[i]).collect();
    let s = sel.len();
    let k = k.clamp(1, s.max(1));

    let mut leaders = Vec::with_capacity(k);
    let first = (0..s)
        .min_by(|&a, &b| objs[sel[a]].magnitude.total_cmp(&objs[sel[b]].magnitude).then(a.cmp(&b)))
        .unwrap_or(0);
    leaders.push(first);
    let mut mind: Vec<f64> = pts.iter().map(|p| d2(p, &pts[first])).collect();
    while leaders.len() < k {
        let next = (0..s)
            .filter(|i| !leaders.contains(i))
            .max_by(|&a, &b| mind[a].total_cmp(&mind[b]).then(b.cmp(&a)))
            .expect("enough selected points");
        leaders.push(next);
        for (m, p) in mind.iter_mut().zip(&pts) {
            *m = m.min(d2(p, &pts[next]));
        }
    }

    let base = s / k;
    let extra = s % k;
    let mut taken = vec![false; s];
    let mut clusters = Vec::with_capacity(k);
    for (j, &l) in leaders.iter().enumerate() {
        let size = base + usize::from(j < extra);
        let mut order: Vec<usize> = (0..s).filter(|&i| !taken[i]).collect();
        order.sort_by(|&a, &b| d2(&pts[a], &pts[l]).total_cmp(&d2(&pts[b], &pts[l])).then(a.cmp(&b)));
        let members: Vec<usize> = order.into_iter().take(size).collect();
        for &m in &members {
            taken[m] = true;
        }
        clusters.push(members);
    }

    let means: Vec<[f64; 3]> = clusters
        .iter()
        .map(|c| {
            let mut m = [0.0; 3];
            for &i in c {
                for a in 0..3 {
                    m[a] += pts[i][a];
                }
            }
            m.map(|x| x / c.len().max(1) as f64)
        })
        .collect();
    let assignment = norm_all
        .iter()
        .map(|p| {
            (0..means.len())
                .min_by(|&a, &b| d2(p, &means[a]).total_cmp(&d2(p, &means[b])).then(a.cmp(&b)))
                .unwrap_or(0)
        })
        .collect();
    let clusters = clusters
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|i| sel[i]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    Clustering {
        clusters,
        means,
        assignment,
    }
}
