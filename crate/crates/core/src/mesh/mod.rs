//! Indexed triangle meshes and the global quantities the fidelity measures
//! are built on: bounding box, surface area and signed volume.

mod io;

use std::collections::HashMap;

use nalgebra::{Isometry3, Point3, Vector3};
use thiserror::Error;

pub use io::{load_mesh, parse_mesh, write_off, write_off_string, MeshFormat};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("mesh is empty")]
    Empty,
    #[error("unsupported mesh format `{0}`")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An indexed triangle mesh. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    label: String,
}

impl TriMesh {
    /// Builds a mesh, checking that all coordinates are finite and all face
    /// indices are in range. Degenerate faces are kept.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        label: impl Into<String>,
    ) -> Result<Self, MeshError> {
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(MeshError::IndexOutOfRange {
                    face: fi,
                    index: bad as usize,
                    vertex_count: n,
                });
            }
        }
        Ok(Self {
            vertices,
            faces,
            label: label.into(),
        })
    }

    pub fn empty(label: impl Into<String>) -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            label: label.into(),
        }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Corner positions of face `i`.
    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Point3<f64>; 3]> + '_ {
        (0..self.faces.len()).map(move |i| self.triangle(i))
    }

    /// Faces with a repeated index or zero area.
    pub fn degenerate_face_count(&self) -> usize {
        (0..self.faces.len())
            .filter(|&i| {
                let [a, b, c] = self.faces[i];
                a == b || b == c || a == c || triangle_area(&self.triangle(i)) == 0.0
            })
            .count()
    }

    /// Tight axis-aligned box over all vertices.
    pub fn bounding_box(&self) -> Result<Aabb, MeshError> {
        Aabb::from_points(&self.vertices).ok_or(MeshError::Empty)
    }

    /// Sum of triangle areas.
    pub fn surface_area(&self) -> f64 {
        self.triangles().map(|t| triangle_area(&t)).sum()
    }

    /// Divergence-theorem volume: the sum of signed tetrahedra spanned by
    /// each face and the origin. Exact for closed, consistently oriented
    /// meshes; positive when faces wind counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        self.triangles()
            .map(|[a, b, c]| a.coords.dot(&b.coords.cross(&c.coords)) / 6.0)
            .sum()
    }

    /// Arithmetic mean of the vertex positions.
    pub fn vertex_centroid(&self) -> Option<Point3<f64>> {
        if self.vertices.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.vertices.iter().map(|p| p.coords).sum();
        Some(Point3::from(sum / self.vertices.len() as f64))
    }

    /// True when every undirected edge of a non-degenerate face is shared by
    /// exactly two faces with opposite directions.
    pub fn is_closed(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut directed: HashMap<(u32, u32), i32> = HashMap::new();
        for &[a, b, c] in &self.faces {
            if a == b || b == c || a == c {
                continue;
            }
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *directed.entry((u, v)).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(u, v), &n)| n == 1 && directed.get(&(v, u)) == Some(&1))
    }

    /// Applies a rigid transform to every vertex.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> TriMesh {
        self.map_vertices(|p| iso * p)
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        self.map_vertices(|p| Point3::from(p.coords * s))
    }

    pub fn translated(&self, t: Vector3<f64>) -> TriMesh {
        self.map_vertices(|p| p + t)
    }

    fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            label: self.label.clone(),
        }
    }

    /// Drops vertices that no face references and renumbers the faces,
    /// keeping the relative vertex order.
    pub fn compacted(&self) -> TriMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for f in &self.faces {
            for &i in f {
                if remap[i as usize] == u32::MAX {
                    remap[i as usize] = 0;
                }
            }
        }
        for (i, slot) in remap.iter_mut().enumerate() {
            if *slot != u32::MAX {
                *slot = vertices.len() as u32;
                vertices.push(self.vertices[i]);
            }
        }
        let faces = self
            .faces
            .iter()
            .map(|f| f.map(|i| remap[i as usize]))
            .collect();
        TriMesh {
            vertices,
            faces,
            label: self.label.clone(),
        }
    }
}

pub fn triangle_area(t: &[Point3<f64>; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}

/// Unit normal following counter-clockwise winding, or `None` for a
/// zero-area triangle.
pub fn triangle_normal(t: &[Point3<f64>; 3]) -> Option<Vector3<f64>> {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let len = n.norm();
    (len > 0.0).then(|| n / len)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points(points: &[Point3<f64>]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            b.grow(p);
        }
        Some(b)
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.diagonal() > 0.0)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        (0..3)
            .map(|k| {
                let d = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
                d * d
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use approx::assert_relative_eq;
    use nalgebra::{Translation3, UnitQuaternion};

    #[test]
    fn cube_quantities() {
        let cube = synth::cube(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        assert_eq!(cube.vertex_count(), 8);
        assert_eq!(cube.face_count(), 12);
        let bb = cube.bounding_box().unwrap();
        assert_relative_eq!(bb.diagonal(), 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(cube.surface_area(), 6.0, epsilon = 1e-12);
        assert_relative_eq!(cube.signed_volume(), 1.0, epsilon = 1e-12);
        assert!(cube.is_closed());
        assert_relative_eq!(cube.scaled(2.0).signed_volume().abs(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn single_vertex_box_is_degenerate() {
        let m = TriMesh::new(vec![Point3::new(1.0, 2.0, 3.0)], vec![], "p").unwrap();
        let bb = m.bounding_box().unwrap();
        assert_eq!(bb.diagonal(), 0.0);
        assert!(bb.is_degenerate());
        assert!(TriMesh::empty("e").bounding_box().is_err());
    }

    #[test]
    fn tetra_and_triangle() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let tetra = TriMesh::new(v.clone(), vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], "t")
            .unwrap();
        assert_relative_eq!(tetra.signed_volume().abs(), 1.0 / 6.0, epsilon = 1e-15);
        assert!(tetra.is_closed());

        let tri = TriMesh::new(v[..3].to_vec(), vec![[0, 1, 2]], "r").unwrap();
        assert_relative_eq!(tri.surface_area(), 0.5);
        assert!(!tri.is_closed());
        let with_degenerate =
            TriMesh::new(v[..3].to_vec(), vec![[0, 1, 2], [0, 1, 1]], "r").unwrap();
        assert_eq!(with_degenerate.surface_area(), 0.5);
        assert_eq!(with_degenerate.degenerate_face_count(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let err = TriMesh::new(vec![Point3::origin(); 8], vec![[0, 1, 99]], "x").unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 99, .. }));
        let err = TriMesh::new(vec![Point3::new(f64::NAN, 0.0, 0.0)], vec![], "x").unwrap_err();
        assert!(matches!(err, MeshError::NonFinite(0)));
    }

    #[test]
    fn rigid_invariance() {
        let m = synth::icosphere(2);
        let iso = Isometry3::from_parts(
            Translation3::new(3.0, -7.0, 0.5),
            UnitQuaternion::from_euler_angles(0.3, -1.1, 2.0),
        );
        let t = m.transformed(&iso);
        let rel = |a: f64, b: f64| ((a - b) / a).abs();
        // A box diagonal only survives rotations that map axes onto axes.
        let quarter = Isometry3::from_parts(
            Translation3::new(1.0, 2.0, 3.0),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
        );
        let diag = |m: &TriMesh| m.bounding_box().unwrap().diagonal();
        assert!(rel(diag(&m), diag(&m.transformed(&quarter))) < 1e-9);
        assert!(rel(m.surface_area(), t.surface_area()) < 1e-9);
        assert!(rel(m.signed_volume().abs(), t.signed_volume().abs()) < 1e-9);
        let moved = m.translated(Vector3::new(10.0, 10.0, 10.0));
        assert_relative_eq!(
            moved.bounding_box().unwrap().diagonal(),
            m.bounding_box().unwrap().diagonal(),
            max_relative = 1e-12
        );
        let s = 1.7;
        assert!(rel(m.scaled(s).signed_volume(), m.signed_volume() * s * s * s) < 1e-9);
    }

    #[test]
    fn compaction_drops_unreferenced() {
        let m = TriMesh::new(
            vec![
                Point3::new(9.0, 9.0, 9.0),
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[1, 2, 3]],
            "c",
        )
        .unwrap();
        let c = m.compacted();
        assert_eq!(c.vertex_count(), 3);
        assert_eq!(c.faces(), &[[0, 1, 2]]);
    }
}
