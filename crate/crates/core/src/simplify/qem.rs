//! Quadric-error-metric edge collapse.
//!
//! Every vertex carries the area-weighted sum of the plane quadrics of its
//! incident faces; boundary edges add a perpendicular constraint plane so
//! open borders keep their shape. Collapse candidates are mesh edges only,
//! popped in order of (cost, lower vertex index, higher vertex index).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Point3, Vector3};

use super::{SimplifyError, Simplified};
use crate::mesh::{triangle_area, TriMesh};

/// Constraint planes on boundary edges are weighted by this multiple of the
/// mean face area.
const BOUNDARY_WEIGHT: f64 = 1000.0;

/// Relative determinant below which the 3×3 system is treated as singular.
const SINGULAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Quadric {
    // a² ab ac ad b² bc bd c² cd d²
    m: [f64; 10],
}

impl Quadric {
    fn plane(n: Vector3<f64>, d: f64, weight: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric {
            m: [
                a * a,
                a * b,
                a * c,
                a * d,
                b * b,
                b * c,
                b * d,
                c * c,
                c * d,
                d * d,
            ]
            .map(|x| x * weight),
        }
    }

    fn add(&mut self, o: &Quadric) {
        for (a, b) in self.m.iter_mut().zip(o.m.iter()) {
            *a += b;
        }
    }

    fn sum(&self, o: &Quadric) -> Quadric {
        let mut q = *self;
        q.add(o);
        q
    }

    pub(crate) fn error(&self, p: &Point3<f64>) -> f64 {
        let [a2, ab, ac, ad, b2, bc, bd, c2, cd, d2] = self.m;
        let (x, y, z) = (p.x, p.y, p.z);
        let e = a2 * x * x
            + 2.0 * ab * x * y
            + 2.0 * ac * x * z
            + 2.0 * ad * x
            + b2 * y * y
            + 2.0 * bc * y * z
            + 2.0 * bd * y
            + c2 * z * z
            + 2.0 * cd * z
            + d2;
        // rounding can push a true zero slightly negative
        e.max(0.0)
    }

    /// Minimizer of the quadric, or `None` when the system is near-singular.
    fn minimizer(&self) -> Option<Point3<f64>> {
        let [a2, ab, ac, ad, b2, bc, bd, c2, cd, _] = self.m;
        let a = Matrix3::new(a2, ab, ac, ab, b2, bc, ac, bc, c2);
        let scale = a.abs().max();
        if scale <= 0.0 {
            return None;
        }
        let det = a.determinant();
        if det.abs() <= SINGULAR_TOLERANCE * scale * scale * scale {
            return None;
        }
        let x = a.try_inverse()? * -Vector3::new(ad, bd, cd);
        x.iter().all(|c| c.is_finite()).then(|| Point3::from(x))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    stamp_u: u32,
    stamp_v: u32,
    target: Point3<f64>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // reversed: BinaryHeap is a max-heap and we want the cheapest first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.u.cmp(&self.u))
            .then_with(|| other.v.cmp(&self.v))
            .then_with(|| other.stamp_u.cmp(&self.stamp_u))
            .then_with(|| other.stamp_v.cmp(&self.stamp_v))
    }
}

/// One accepted collapse, recorded when tracing.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct CollapseTrace {
    pub popped_cost: f64,
    /// Smallest recomputed cost among all still-valid queued candidates at
    /// the moment of the pop.
    pub min_remaining: f64,
}

struct Collapser {
    pos: Vec<Point3<f64>>,
    quadric: Vec<Quadric>,
    stamp: Vec<u32>,
    alive_vertex: Vec<bool>,
    faces: Vec<[u32; 3]>,
    alive_face: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    live_faces: usize,
    heap: BinaryHeap<Candidate>,
}

impl Collapser {
    fn new(mesh: &TriMesh) -> Self {
        let pos = mesh.vertices().to_vec();
        let n = pos.len();
        let mut faces = Vec::new();
        for (i, &f) in mesh.faces().iter().enumerate() {
            let [a, b, c] = f;
            if a != b && b != c && a != c && triangle_area(&mesh.triangle(i)) > 0.0 {
                faces.push(f);
            }
        }
        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v as usize].push(fi as u32);
            }
        }

        let mut quadric = vec![Quadric::default(); n];
        let mut total_area = 0.0;
        for f in &faces {
            let t = f.map(|i| pos[i as usize]);
            let nrm = (t[1] - t[0]).cross(&(t[2] - t[0]));
            let area = 0.5 * nrm.norm();
            total_area += area;
            let nrm = nrm.normalize();
            let q = Quadric::plane(nrm, -nrm.dot(&t[0].coords), area);
            for &v in f {
                quadric[v as usize].add(&q);
            }
        }

        // boundary constraints
        let mean_area = if faces.is_empty() { 0.0 } else { total_area / faces.len() as f64 };
        let mut directed: std::collections::HashMap<(u32, u32), usize> = Default::default();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                directed.insert((f[k], f[(k + 1) % 3]), fi);
            }
        }
        let mut boundary: Vec<(u32, u32, usize)> = directed
            .iter()
            .filter(|(&(a, b), _)| !directed.contains_key(&(b, a)))
            .map(|(&(a, b), &fi)| (a, b, fi))
            .collect();
        boundary.sort_unstable();
        for (a, b, fi) in boundary {
            let t = faces[fi].map(|i| pos[i as usize]);
            let fnrm = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
            let edge = pos[b as usize] - pos[a as usize];
            let n = edge.cross(&fnrm);
            if n.norm() == 0.0 {
                continue;
            }
            let n = n.normalize();
            let q = Quadric::plane(n, -n.dot(&pos[a as usize].coords), BOUNDARY_WEIGHT * mean_area);
            quadric[a as usize].add(&q);
            quadric[b as usize].add(&q);
        }

        let live_faces = faces.len();
        let mut c = Collapser {
            pos,
            quadric,
            stamp: vec![0; n],
            alive_vertex: vec![true; n],
            alive_face: vec![true; faces.len()],
            faces,
            vertex_faces,
            live_faces,
            heap: BinaryHeap::new(),
        };
        let mut edges = Vec::new();
        for f in &c.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        for (a, b) in edges {
            let cand = c.candidate(a, b);
            c.heap.push(cand);
        }
        c
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (u, v) = (a.min(b), a.max(b));
        let q = self.quadric[u as usize].sum(&self.quadric[v as usize]);
        let (pu, pv) = (self.pos[u as usize], self.pos[v as usize]);
        let (target, cost) = match q.minimizer() {
            Some(p) => (p, q.error(&p)),
            None => {
                let mid = nalgebra::center(&pu, &pv);
                [mid, pu, pv]
                    .into_iter()
                    .map(|p| (p, q.error(&p)))
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .unwrap()
            }
        };
        Candidate {
            cost,
            u,
            v,
            stamp_u: self.stamp[u as usize],
            stamp_v: self.stamp[v as usize],
            target,
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        self.alive_vertex[c.u as usize]
            && self.alive_vertex[c.v as usize]
            && self.stamp[c.u as usize] == c.stamp_u
            && self.stamp[c.v as usize] == c.stamp_v
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vertex_faces[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn is_boundary_vertex(&self, v: u32) -> bool {
        self.neighbors(v)
            .into_iter()
            .any(|w| self.edge_faces(v, w).len() == 1)
    }

    fn edge_faces(&self, u: u32, v: u32) -> Vec<u32> {
        self.vertex_faces[u as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f as usize].contains(&v))
            .collect()
    }

    /// Topology and geometry checks for collapsing `v` into `u` at `target`.
    fn collapse_allowed(&self, u: u32, v: u32, target: &Point3<f64>) -> bool {
        let shared = self.edge_faces(u, v);
        if shared.is_empty() {
            return false;
        }
        // link condition: common neighbours are exactly the wing vertices
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        let common = nu.iter().filter(|w| nv.binary_search(w).is_ok()).count();
        if common != shared.len() {
            return false;
        }
        if shared.len() == 2 && self.is_boundary_vertex(u) && self.is_boundary_vertex(v) {
            return false;
        }
        // a closed surface never drops below a tetrahedron
        if shared.len() == 2 && self.live_faces <= 4 {
            return false;
        }
        // no face may flip or collapse to zero area
        for &w in [u, v].iter() {
            for &f in &self.vertex_faces[w as usize] {
                let face = self.faces[f as usize];
                if face.contains(&u) && face.contains(&v) {
                    continue;
                }
                let before = face.map(|i| self.pos[i as usize]);
                let after = face.map(|i| if i == w { *target } else { self.pos[i as usize] });
                let n0 = (before[1] - before[0]).cross(&(before[2] - before[0]));
                let n1 = (after[1] - after[0]).cross(&(after[2] - after[0]));
                if n1.norm_squared() == 0.0 || n0.dot(&n1) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, c: &Candidate) {
        let (u, v) = (c.u, c.v);
        self.pos[u as usize] = c.target;
        let qv = self.quadric[v as usize];
        self.quadric[u as usize].add(&qv);
        self.alive_vertex[v as usize] = false;
        self.stamp[u as usize] += 1;

        let v_faces = std::mem::take(&mut self.vertex_faces[v as usize]);
        for f in v_faces {
            let face = self.faces[f as usize];
            if face.contains(&u) {
                self.alive_face[f as usize] = false;
                self.live_faces -= 1;
                for x in face {
                    if x != v {
                        self.vertex_faces[x as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for i in self.faces[f as usize].iter_mut() {
                    if *i == v {
                        *i = u;
                    }
                }
                self.vertex_faces[u as usize].push(f);
            }
        }
        for w in self.neighbors(u) {
            let cand = self.candidate(u, w);
            self.heap.push(cand);
        }
    }

    fn min_current_cost(&self) -> f64 {
        self.heap
            .iter()
            .filter(|c| self.is_current(c))
            .map(|c| {
                let fresh = self.candidate(c.u, c.v);
                debug_assert_eq!(fresh.cost.to_bits(), c.cost.to_bits(), "stale cost in queue");
                fresh.cost
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn run(&mut self, target_faces: usize, mut trace: Option<&mut Vec<CollapseTrace>>) {
        while self.live_faces > target_faces {
            let Some(c) = self.heap.pop() else { break };
            if !self.is_current(&c) {
                continue;
            }
            if !self.collapse_allowed(c.u, c.v, &c.target) {
                continue;
            }
            if let Some(t) = trace.as_deref_mut() {
                let min_remaining = self.min_current_cost();
                t.push(CollapseTrace {
                    popped_cost: c.cost,
                    min_remaining,
                });
            }
            self.collapse(&c);
        }
    }

    fn into_mesh(self, label: &str) -> TriMesh {
        let faces: Vec<[u32; 3]> = self
            .faces
            .iter()
            .zip(&self.alive_face)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| *f)
            .collect();
        TriMesh::new(self.pos, faces, label)
            .expect("collapse keeps indices valid")
            .compacted()
    }
}

pub(crate) fn simplify(
    mesh: &TriMesh,
    target_faces: usize,
    trace: Option<&mut Vec<CollapseTrace>>,
) -> Result<Simplified, SimplifyError> {
    if target_faces == 0 {
        return Err(SimplifyError::ZeroTarget);
    }
    if mesh.is_empty() {
        return Err(SimplifyError::EmptyMesh);
    }
    if target_faces > mesh.face_count() {
        return Err(SimplifyError::TargetAboveInput {
            target: target_faces,
            faces: mesh.face_count(),
        });
    }
    let usable = mesh.face_count() - mesh.degenerate_face_count();
    if usable <= target_faces {
        return Ok(Simplified {
            achieved_faces: mesh.face_count(),
            mesh: mesh.clone(),
            warning: None,
        });
    }
    let mut c = Collapser::new(mesh);
    c.run(target_faces, trace);
    let out = c.into_mesh(mesh.label());
    let achieved = out.face_count();
    let warning = (achieved > target_faces).then(|| {
        format!(
            "{}: no valid collapse left at {achieved} faces (target {target_faces})",
            mesh.label()
        )
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(Simplified {
        mesh: out,
        achieved_faces: achieved,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn quadric_of_plane_vanishes_on_plane() {
        let q = Quadric::plane(Vector3::z(), -2.0, 3.0);
        assert_eq!(q.error(&Point3::new(5.0, -1.0, 2.0)), 0.0);
        assert!((q.error(&Point3::new(0.0, 0.0, 3.0)) - 3.0).abs() < 1e-12);
        assert!(q.minimizer().is_none(), "a single plane has no unique minimizer");
    }

    #[test]
    fn three_planes_meet_in_a_point() {
        let mut q = Quadric::plane(Vector3::x(), -1.0, 1.0);
        q.add(&Quadric::plane(Vector3::y(), -2.0, 1.0));
        q.add(&Quadric::plane(Vector3::z(), -3.0, 1.0));
        let p = q.minimizer().unwrap();
        assert!((p - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert!(q.error(&p) < 1e-20);
    }

    #[test]
    fn popped_cost_is_minimum_of_queue() {
        let mesh = synth::radial(16, 24, "lumpy", |d| 1.0 + 0.2 * (3.0 * d.x).sin() * d.y);
        let mut trace = Vec::new();
        let out = simplify(&mesh, mesh.face_count() / 3, Some(&mut trace)).unwrap();
        assert!(out.mesh.face_count() <= mesh.face_count() / 3);
        assert!(!trace.is_empty());
        for t in &trace {
            assert!(t.popped_cost <= t.min_remaining, "{t:?}");
        }
    }

    #[test]
    fn closed_mesh_stays_closed() {
        let mesh = synth::icosphere(3);
        let out = simplify(&mesh, 200, None).unwrap();
        assert!(out.mesh.face_count() <= 200 && out.mesh.face_count() >= 190);
        assert!(out.mesh.is_closed());
        assert_eq!(out.mesh.degenerate_face_count(), 0);
    }

    #[test]
    fn tetrahedron_is_the_floor() {
        let mesh = synth::icosphere(1);
        let out = simplify(&mesh, 1, None).unwrap();
        assert!(out.warning.is_some());
        assert!(out.mesh.face_count() >= 4);
    }
}
