//! Bounding volume hierarchy over triangles for exact closest-point queries.

use nalgebra::Point3;

use crate::mesh::{Aabb, TriMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Node {
    Leaf { bbox: Aabb, start: u32, count: u32 },
    Inner { bbox: Aabb, left: u32, right: u32 },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Point3<f64>; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    /// Returns `None` for a mesh without faces.
    pub fn new(mesh: &TriMesh) -> Option<Self> {
        if mesh.is_empty() {
            return None;
        }
        let triangles: Vec<_> = mesh.triangles().collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Point3<f64>> = triangles
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut bvh = TriangleBvh {
            triangles,
            order: Vec::new(),
            nodes: Vec::new(),
        };
        let n = order.len();
        bvh.build(&mut order, &centroids, 0, n);
        bvh.order = order;
        Some(bvh)
    }

    fn bounds(&self, idx: &[u32]) -> Aabb {
        let mut b = Aabb::from_points(&self.triangles[idx[0] as usize]).unwrap();
        for &i in &idx[1..] {
            for p in &self.triangles[i as usize] {
                b.grow(p);
            }
        }
        b
    }

    fn build(&mut self, order: &mut [u32], centroids: &[Point3<f64>], start: usize, end: usize) -> u32 {
        let slice = &mut order[start..end];
        let bbox = self.bounds(slice);
        let id = self.nodes.len() as u32;
        if slice.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                bbox,
                start: start as u32,
                count: slice.len() as u32,
            });
            return id;
        }
        let mut cb = Aabb::from_points(&[centroids[slice[0] as usize]]).unwrap();
        for &i in slice.iter() {
            cb.grow(&centroids[i as usize]);
        }
        let ext = cb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        // placeholder, patched once the children exist
        self.nodes.push(Node::Leaf {
            bbox,
            start: 0,
            count: 0,
        });
        let left = self.build(order, centroids, start, start + mid);
        let right = self.build(order, centroids, start + mid, end);
        self.nodes[id as usize] = Node::Inner { bbox, left, right };
        id
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Squared distance to the nearest triangle and that triangle's index
    /// in mesh face order.
    pub fn closest(&self, p: &Point3<f64>) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bbox().distance_squared(p) > best.0 {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for &t in &self.order[start as usize..(start + count) as usize] {
                        let d = point_triangle_distance_squared(p, &self.triangles[t as usize]);
                        if d < best.0 || (d == best.0 && (t as usize) < best.1) {
                            best = (d, t as usize);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left as usize].bbox().distance_squared(p);
                    let dr = self.nodes[right as usize].bbox().distance_squared(p);
                    // push the farther child first so the nearer one is searched first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        self.closest(p).0.sqrt()
    }
}

/// Squared Euclidean distance from `p` to the closed triangle `t`, following
/// the Voronoi-region walk of Ericson's closest-point routine. Zero-area
/// triangles fall back to their edges.
pub fn point_triangle_distance_squared(p: &Point3<f64>, t: &[Point3<f64>; 3]) -> f64 {
    let [a, b, c] = *t;
    let ab = b - a;
    let ac = c - a;
    if ab.cross(&ac).norm_squared() == 0.0 {
        return segment_distance_squared(p, &a, &b)
            .min(segment_distance_squared(p, &b, &c))
            .min(segment_distance_squared(p, &c, &a));
    }
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm_squared();
    }
    // interior: the plane distance, which is exactly zero for points on a
    // coordinate-aligned face
    let n = ab.cross(&ac);
    let h = n.dot(&ap);
    h * h / n.norm_squared()
}

fn segment_distance_squared(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm_squared();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle_regions() {
        let t = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let d = |x, y, z| point_triangle_distance_squared(&Point3::new(x, y, z), &t).sqrt();
        assert_eq!(d(0.2, 0.2, 0.0), 0.0);
        assert!((d(0.2, 0.2, 3.0) - 3.0).abs() < 1e-15);
        assert!((d(-1.0, -1.0, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((d(0.5, -2.0, 0.0) - 2.0).abs() < 1e-15);
        assert!((d(1.0, 1.0, 0.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d(3.0, 0.0, 0.0) - 2.0).abs() < 1e-15);
        let sliver = [t[0], t[1], Point3::new(2.0, 0.0, 0.0)];
        assert!((point_triangle_distance_squared(&Point3::new(0.5, 1.0, 0.0), &sliver) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indexed_matches_brute_force() {
        let mesh = synth::radial(12, 12, "lump", |d| 1.0 + 0.3 * d.x * d.y);
        assert!(mesh.face_count() >= 200);
        let bvh = TriangleBvh::new(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let brute = mesh
                .triangles()
                .map(|t| point_triangle_distance_squared(&p, &t))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(bvh.closest(&p).0, brute);
        }
    }
}
