//! Incremental Bowyer–Watson Delaunay tetrahedralization.
//!
//! With a bounding box, the box corners are triangulated first (any split of
//! a box is Delaunay since its corners are cospherical) and all points are
//! inserted inside it, so the output covers the box exactly. Without one, a
//! large enclosing tetrahedron is used and removed afterwards.

use std::collections::HashMap;

use crate::geometry::{Aabb, Vec3};
use crate::hash::{mix64, Fnv1a};
use crate::mesh::{TetTopology, NO_NEIGHBOR};
use crate::{Error, Result};

/// Largest jitter applied to inputs when a degeneracy is detected.
pub const JITTER_MM: f64 = 1e-7;

const DEGENERACY_REL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Delaunay {
    /// Input points (jittered if a restart was needed), then box corners.
    pub points: Vec<Vec3>,
    pub topology: TetTopology,
    /// Whether the degeneracy restart with jittered inputs was taken.
    pub jittered: bool,
}

/// 6 × signed volume.
#[inline]
fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a)))
}

#[inline]
fn det3(r0: &Vec3, r1: &Vec3, r2: &Vec3) -> (f64, f64) {
    let t = [
        r0.x * r1.y * r2.z,
        r0.y * r1.z * r2.x,
        r0.z * r1.x * r2.y,
        r0.z * r1.y * r2.x,
        r0.x * r1.z * r2.y,
        r0.y * r1.x * r2.z,
    ];
    (
        t[0] + t[1] + t[2] - t[3] - t[4] - t[5],
        t.iter().map(|x| x.abs()).sum(),
    )
}

/// Positive when `e` is strictly inside the circumsphere of the positively
/// oriented tet `p`, with the absolute magnitude used for the degeneracy test.
#[inline]
pub fn insphere(p: &[Vec3; 4], e: &Vec3) -> (f64, f64) {
    let r = [p[0] - e, p[1] - e, p[2] - e, p[3] - e];
    let w = [r[0].norm_squared(), r[1].norm_squared(), r[2].norm_squared(), r[3].norm_squared()];
    let (m0, a0) = det3(&r[1], &r[2], &r[3]);
    let (m1, a1) = det3(&r[0], &r[2], &r[3]);
    let (m2, a2) = det3(&r[0], &r[1], &r[3]);
    let (m3, a3) = det3(&r[0], &r[1], &r[2]);
    let det = -w[0] * m0 + w[1] * m1 - w[2] * m2 + w[3] * m3;
    let perm = w[0] * a0 + w[1] * a1 + w[2] * a2 + w[3] * a3;
    (-det, perm)
}

struct Builder {
    pts: Vec<Vec3>,
    tets: Vec<[u32; 4]>,
    nbr: Vec<[u32; 4]>,
    alive: Vec<bool>,
    last: usize,
    mark: Vec<u32>,
    stamp: u32,
    /// Near-cospherical neighbours stay outside the cavity instead of
    /// aborting the build.
    lenient: bool,
}

enum Insert {
    Ok,
    Degenerate,
}

impl Builder {
    fn tet_pts(&self, t: usize) -> [Vec3; 4] {
        let v = self.tets[t];
        [
            self.pts[v[0] as usize],
            self.pts[v[1] as usize],
            self.pts[v[2] as usize],
            self.pts[v[3] as usize],
        ]
    }

    fn push(&mut self, v: [u32; 4]) -> usize {
        self.tets.push(v);
        self.nbr.push([NO_NEIGHBOR; 4]);
        self.alive.push(true);
        self.mark.push(0);
        self.tets.len() - 1
    }

    fn link_initial(&mut self) {
        let mut faces: HashMap<[u32; 3], (usize, usize)> = HashMap::new();
        for t in 0..self.tets.len() {
            for i in 0..4 {
                let mut f: Vec<u32> = (0..4).filter(|&j| j != i).map(|j| self.tets[t][j]).collect();
                f.sort_unstable();
                let key = [f[0], f[1], f[2]];
                if let Some((u, j)) = faces.remove(&key) {
                    self.nbr[t][i] = u as u32;
                    self.nbr[u][j] = t as u32;
                } else {
                    faces.insert(key, (t, i));
                }
            }
        }
    }

    /// Tet whose circumsphere contains `p`, found by walking toward `p`.
    fn locate(&self, p: &Vec3) -> Option<usize> {
        let mut t = self.last;
        if !self.alive[t] {
            t = self.alive.iter().rposition(|&a| a)?;
        }
        'walk: for _ in 0..self.tets.len() {
            let q = self.tet_pts(t);
            for i in 0..4 {
                let mut r = q;
                r[i] = *p;
                if orient(&r[0], &r[1], &r[2], &r[3]) < 0.0 {
                    match self.nbr[t][i] {
                        NO_NEIGHBOR => break 'walk,
                        u => {
                            t = u as usize;
                            continue 'walk;
                        }
                    }
                }
            }
            return Some(t);
        }
        (0..self.tets.len()).find(|&t| self.alive[t] && insphere(&self.tet_pts(t), p).0 > 0.0)
    }

    fn insert(&mut self, pi: u32) -> Result<Insert> {
        let p = self.pts[pi as usize];
        let start = self.locate(&p).ok_or(Error::OutsideHull {
            x: p.x,
            y: p.y,
            z: p.z,
        })?;
        self.stamp += 1;
        let stamp = self.stamp;
        let mut cavity = vec![start];
        self.mark[start] = stamp;
        let mut k = 0;
        while k < cavity.len() {
            let t = cavity[k];
            k += 1;
            for i in 0..4 {
                let u = self.nbr[t][i];
                if u == NO_NEIGHBOR || self.mark[u as usize] == stamp {
                    continue;
                }
                let (s, perm) = insphere(&self.tet_pts(u as usize), &p);
                if s.abs() <= DEGENERACY_REL * perm {
                    if self.lenient {
                        continue;
                    }
                    return Ok(Insert::Degenerate);
                }
                if s > 0.0 {
                    self.mark[u as usize] = stamp;
                    cavity.push(u as usize);
                }
            }
        }

        let mut created = Vec::new();
        let mut boundary = Vec::new();
        for &t in &cavity {
            for i in 0..4 {
                let u = self.nbr[t][i];
                if u != NO_NEIGHBOR && self.mark[u as usize] == stamp {
                    continue;
                }
                let mut v = self.tets[t];
                v[i] = pi;
                let q = [
                    self.pts[v[0] as usize],
                    self.pts[v[1] as usize],
                    self.pts[v[2] as usize],
                    self.pts[v[3] as usize],
                ];
                let o = orient(&q[0], &q[1], &q[2], &q[3]);
                let scale = (q[1] - q[0]).norm() * (q[2] - q[0]).norm() * (q[3] - q[0]).norm();
                if !(o > DEGENERACY_REL * scale) {
                    return Ok(Insert::Degenerate);
                }
                boundary.push((t, i, v, u));
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
        }
        let mut edges: HashMap<(u32, u32), (usize, usize)> = HashMap::new();
        for (t, i, v, u) in boundary {
            let n = self.push(v);
            created.push(n);
            self.nbr[n][i] = u;
            if u != NO_NEIGHBOR {
                let back = self.nbr[u as usize].iter().position(|&x| x as usize == t).expect("mutual neighbours");
                self.nbr[u as usize][back] = n as u32;
            }
            for j in 0..4 {
                if j == i {
                    continue;
                }
                let mut e = [0u32; 2];
                let mut m = 0;
                for (l, &x) in v.iter().enumerate() {
                    if l != i && l != j {
                        e[m] = x;
                        m += 1;
                    }
                }
                let key = (e[0].min(e[1]), e[0].max(e[1]));
                if let Some((o, oj)) = edges.remove(&key) {
                    self.nbr[n][j] = o as u32;
                    self.nbr[o][oj] = n as u32;
                } else {
                    edges.insert(key, (n, j));
                }
            }
        }
        debug_assert!(edges.is_empty(), "cavity boundary not closed");
        self.last = *created.last().expect("cavity has a boundary");
        Ok(Insert::Ok)
    }
}

fn jitter(points: &[Vec3]) -> Vec<Vec3> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut h = Fnv1a::new();
            h.write_u64(i as u64);
            for a in 0..3 {
                h.write_u64(p[a].to_bits());
            }
            let mut s = h.finish();
            let mut d = Vec3::zeros();
            for a in 0..3 {
                s = mix64(s);
                d[a] = ((s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0) * JITTER_MM;
            }
            p + d
        })
        .collect()
}

fn check_not_coplanar(points: &[Vec3]) -> Result<()> {
    let a = points[0];
    let b = *points
        .iter()
        .max_by(|p, q| (*p - a).norm_squared().total_cmp(&(*q - a).norm_squared()))
        .expect("non-empty");
    let ab = b - a;
    let c = *points
        .iter()
        .max_by(|p, q| ab.cross(&(*p - a)).norm_squared().total_cmp(&ab.cross(&(*q - a)).norm_squared()))
        .expect("non-empty");
    let n = ab.cross(&(c - a));
    let scale = ab.norm();
    let far = points.iter().map(|p| n.dot(&(p - a)).abs()).fold(0.0, f64::max);
    if n.norm() <= 1e-12 * scale * scale || far <= 1e-12 * scale * n.norm() {
        return Err(Error::Coplanar);
    }
    Ok(())
}

fn build(points: &[Vec3], bbox: Option<&Aabb>, lenient: bool) -> Result<Option<Delaunay>> {
    let n = points.len();
    let mut pts = points.to_vec();
    let mut b = Builder {
        pts: Vec::new(),
        tets: Vec::new(),
        nbr: Vec::new(),
        alive: Vec::new(),
        last: 0,
        mark: Vec::new(),
        stamp: 0,
        lenient,
    };
    match bbox {
        Some(bx) => {
            pts.extend_from_slice(&bx.corners());
            b.pts = pts;
            // corners are in x-fastest binary order; six tets around the 0-7 diagonal
            for [a, c] in [[1, 3], [1, 5], [2, 3], [2, 6], [4, 5], [4, 6]] {
                let base = n as u32;
                let mut v = [base, base + a, base + c, base + 7];
                let q = b.tet_pts_of(&v);
                if orient(&q[0], &q[1], &q[2], &q[3]) < 0.0 {
                    v.swap(1, 2);
                }
                b.push(v);
            }
        }
        None => {
            let bb = Aabb::from_points(points).ok_or_else(|| Error::Empty("no points".into()))?;
            let c = (bb.min + bb.max) / 2.0;
            let r = (bb.size().norm() / 2.0).max(1.0);
            let k = 100.0 * r;
            for d in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
                pts.push(c + Vec3::new(d[0], d[1], d[2]) * k);
            }
            b.pts = pts;
            let base = n as u32;
            let mut v = [base, base + 1, base + 2, base + 3];
            let q = b.tet_pts_of(&v);
            if orient(&q[0], &q[1], &q[2], &q[3]) < 0.0 {
                v.swap(1, 2);
            }
            b.push(v);
        }
    }
    b.link_initial();
    for i in 0..n {
        if let Insert::Degenerate = b.insert(i as u32)? {
            return Ok(None);
        }
    }

    let keep_super = bbox.is_some();
    let mut tets: Vec<[u32; 4]> = (0..b.tets.len())
        .filter(|&t| b.alive[t])
        .map(|t| b.tets[t])
        .filter(|v| keep_super || v.iter().all(|&x| (x as usize) < n))
        .collect();
    tets.sort_unstable();
    let mut out_pts = b.pts;
    if !keep_super {
        out_pts.truncate(n);
    }
    let topology = TetTopology::new(out_pts.len(), tets)?;
    Ok(Some(Delaunay {
        points: out_pts,
        topology,
        jittered: false,
    }))
}

impl Builder {
    fn tet_pts_of(&self, v: &[u32; 4]) -> [Vec3; 4] {
        [
            self.pts[v[0] as usize],
            self.pts[v[1] as usize],
            self.pts[v[2] as usize],
            self.pts[v[3] as usize],
        ]
    }
}

/// Delaunay tetrahedralization of `points`, optionally inside a box whose
/// corners are appended to the output points. Points must be distinct and,
/// with a box, strictly inside it. On a detected degeneracy the inputs are
/// jittered by at most [`JITTER_MM`] and the build restarts once, now
/// resolving remaining near-cospherical ties by keeping the existing tets.
pub fn delaunay_tetrahedralize(points: &[Vec3], bbox: Option<&Aabb>) -> Result<Delaunay> {
    match bbox {
        Some(bx) => {
            if let Some(p) = points.iter().find(|p| (0..3).any(|a| p[a] <= bx.min[a] || p[a] >= bx.max[a])) {
                return Err(Error::OutsideHull {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                });
            }
        }
        None => {
            if points.len() < 4 {
                return Err(Error::InsufficientCandidates {
                    requested: 4,
                    available: points.len(),
                });
            }
            check_not_coplanar(points)?;
        }
    }
    if let Some(d) = build(points, bbox, false)? {
        return Ok(d);
    }
    let moved = jitter(points);
    match build(&moved, bbox, true)? {
        Some(mut d) => {
            d.jittered = true;
            Ok(d)
        }
        None => Err(Error::Geometry("degenerate point configuration persists after jitter".into())),
    }
}
