//! Procedural closed meshes: test fixtures and the bundled demo corpus.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{Point3, Vector3};

use crate::corpus::ObjectType;
use crate::mesh::TriMesh;

fn build(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>, label: &str) -> TriMesh {
    let mesh = TriMesh::new(vertices, faces, label).expect("generated mesh is valid");
    orient_outward(mesh)
}

/// Flips every face when the mesh encloses negative volume.
fn orient_outward(mesh: TriMesh) -> TriMesh {
    if mesh.signed_volume() >= 0.0 {
        return mesh;
    }
    let faces = mesh.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
    TriMesh::new(mesh.vertices().to_vec(), faces, mesh.label()).unwrap()
}

/// Axis-aligned box with 8 vertices and 12 outward-facing triangles.
pub fn cube(min: Point3<f64>, max: Point3<f64>) -> TriMesh {
    let v = |x: bool, y: bool, z: bool| {
        Point3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh::new(vertices, faces, "cube").unwrap()
}

/// Cube centered at the origin with the given side length.
pub fn centered_cube(side: f64) -> TriMesh {
    let h = side / 2.0;
    cube(Point3::new(-h, -h, -h), Point3::new(h, h, h))
}

/// Unit-radius icosphere with `20 * 4^subdivisions` faces.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::from(Vector3::new(x, y, z).normalize()))
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Point3<f64>>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a as usize].coords + vertices[b as usize].coords).normalize();
                vertices.push(Point3::from(m));
                vertices.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(vertices, faces, "icosphere")
}

/// Flat square `[0,1]² × {0}` split into `n × n` quads, two triangles each.
pub fn flat_grid(n: u32) -> TriMesh {
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point3::new(i as f64 / n as f64, j as f64 / n as f64, 0.0));
        }
    }
    let idx = |i: u32, j: u32| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces, "grid").unwrap()
}

/// Sphere-topology surface from a map over `(t, phi)`, `t ∈ [0,1]` running
/// pole to pole. Interior rings come from `rings - 1` latitude steps.
fn sphere_topology(
    rings: u32,
    segments: u32,
    label: &str,
    f: impl Fn(f64, f64) -> Point3<f64>,
) -> TriMesh {
    let mut vertices = vec![f(0.0, 0.0)];
    for r in 1..rings {
        let t = r as f64 / rings as f64;
        for s in 0..segments {
            vertices.push(f(t, TAU * s as f64 / segments as f64));
        }
    }
    vertices.push(f(1.0, 0.0));
    let south = vertices.len() as u32 - 1;
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s + 1), ring(1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s + 1), ring(r + 1, s));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring(rings - 1, s), ring(rings - 1, s + 1)]);
    }
    build(vertices, faces, label)
}

/// Star-shaped surface: radius as a function of the unit direction.
pub fn radial(rings: u32, segments: u32, label: &str, radius: impl Fn(Vector3<f64>) -> f64) -> TriMesh {
    sphere_topology(rings, segments, label, |t, phi| {
        let theta = t * PI;
        let dir = Vector3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
        Point3::from(dir * radius(dir))
    })
}

/// Surface of revolution about +Y; `profile(t)` gives `(radius, height)`
/// and must have zero radius at both ends.
pub fn lathe(rings: u32, segments: u32, label: &str, profile: impl Fn(f64) -> (f64, f64)) -> TriMesh {
    sphere_topology(rings, segments, label, |t, phi| {
        let (r, y) = profile(t);
        Point3::new(r * phi.cos(), y, r * phi.sin())
    })
}

pub fn torus(major: f64, minor: f64, segments: u32, sides: u32) -> TriMesh {
    let mut vertices = Vec::new();
    for i in 0..segments {
        let u = TAU * i as f64 / segments as f64;
        for j in 0..sides {
            let v = TAU * j as f64 / sides as f64;
            let r = major + minor * v.cos();
            vertices.push(Point3::new(r * u.cos(), minor * v.sin(), r * u.sin()));
        }
    }
    let idx = |i: u32, j: u32| (i % segments) * sides + (j % sides);
    let mut faces = Vec::new();
    for i in 0..segments {
        for j in 0..sides {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(vertices, faces, "torus")
}

/// Box with each side split into `n × n` quads, vertices welded along edges.
pub fn subdivided_box(half: Vector3<f64>, n: u32) -> TriMesh {
    let mut index: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let n_i = n as i64;
    // lattice coordinates in [-n, n] along each axis, step 2
    let mut vid = |l: [i64; 3], vertices: &mut Vec<Point3<f64>>| {
        *index.entry((l[0], l[1], l[2])).or_insert_with(|| {
            vertices.push(Point3::new(
                half.x * l[0] as f64 / n as f64,
                half.y * l[1] as f64 / n as f64,
                half.z * l[2] as f64 / n as f64,
            ));
            vertices.len() as u32 - 1
        })
    };
    for axis in 0..3 {
        for side in [-1i64, 1] {
            let (u_ax, v_ax) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..n_i {
                for j in 0..n_i {
                    let corner = |di: i64, dj: i64| {
                        let mut l = [0i64; 3];
                        l[axis] = side * n_i;
                        l[u_ax] = -n_i + 2 * (i + di);
                        l[v_ax] = -n_i + 2 * (j + dj);
                        l
                    };
                    let a = vid(corner(0, 0), &mut vertices);
                    let b = vid(corner(1, 0), &mut vertices);
                    let c = vid(corner(1, 1), &mut vertices);
                    let d = vid(corner(0, 1), &mut vertices);
                    if side > 0 {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    build(vertices, faces, "box")
}

/// Superellipsoid with exponent `e` (2 = sphere, larger = boxier).
pub fn superellipsoid(rings: u32, segments: u32, e: f64, scale: Vector3<f64>) -> TriMesh {
    let spow = |x: f64, p: f64| x.signum() * x.abs().powf(p);
    sphere_topology(rings, segments, "superellipsoid", |t, phi| {
        let theta = t * PI;
        let p = 2.0 / e;
        let (st, ct) = (spow(theta.sin(), p), spow(theta.cos(), p));
        Point3::new(
            scale.x * st * spow(phi.cos(), p),
            scale.y * ct,
            scale.z * st * spow(phi.sin(), p),
        )
    })
}

fn bump(dir: Vector3<f64>, center: Vector3<f64>, height: f64, width: f64) -> f64 {
    let d2 = (dir - center.normalize()).norm_squared();
    height * (-d2 / (width * width)).exp()
}

/// One bundled corpus entry.
pub struct CorpusShape {
    pub name: &'static str,
    pub object_type: ObjectType,
    pub mesh: TriMesh,
}

/// Twelve closed meshes, six organic and six manufactured-looking, each
/// with more than 3700 triangles.
pub fn demo_corpus() -> Vec<CorpusShape> {
    use ObjectType::{Animal, Artifact};
    let v = Vector3::new;
    let organic: Vec<(&str, TriMesh)> = vec![
        (
            "peanut",
            radial(48, 64, "peanut", |d| {
                0.6 + bump(d, v(0.0, 1.0, 0.0), 0.45, 0.7) + bump(d, v(0.0, -1.0, 0.0), 0.4, 0.7)
            }),
        ),
        (
            "starfish",
            radial(48, 72, "starfish", |d| {
                let phi = d.z.atan2(d.x);
                let flat = 1.0 - 0.65 * d.y.abs();
                0.35 + flat * 0.65 * (0.5 + 0.5 * (5.0 * phi).cos()).powi(3)
            }),
        ),
        (
            "seashell",
            radial(52, 64, "seashell", |d| {
                let phi = d.z.atan2(d.x);
                1.0 + 0.08 * (9.0 * phi + 6.0 * d.y).sin() + 0.25 * d.y
            }),
        ),
        (
            "potato",
            radial(48, 64, "potato", |d| {
                0.9 + bump(d, v(1.0, 0.3, 0.2), 0.2, 0.5)
                    - bump(d, v(-0.4, 0.8, -0.3), 0.15, 0.4)
                    + bump(d, v(-0.7, -0.5, 0.6), 0.12, 0.3)
                    + 0.03 * (7.0 * d.x).sin() * (5.0 * d.z).cos()
            }),
        ),
        (
            "creature",
            radial(56, 72, "creature", |d| {
                let mut r = 0.55 * (1.0 + 0.5 * d.x * d.x);
                for leg in [v(0.5, -1.0, 0.5), v(-0.5, -1.0, 0.5), v(0.5, -1.0, -0.5), v(-0.5, -1.0, -0.5)] {
                    r += bump(d, leg, 0.55, 0.18);
                }
                r + bump(d, v(1.0, 0.4, 0.0), 0.35, 0.3) + bump(d, v(-1.0, 0.2, 0.0), 0.4, 0.12)
            }),
        ),
        (
            "bird",
            radial(56, 72, "bird", |d| {
                0.5 + bump(d, v(1.0, 0.5, 0.0), 0.3, 0.35)
                    + bump(d, v(1.0, 0.45, 0.0), 0.45, 0.08)
                    + bump(d, v(0.0, 0.1, 1.0), 0.5, 0.25)
                    + bump(d, v(0.0, 0.1, -1.0), 0.5, 0.25)
                    + bump(d, v(-1.0, 0.0, 0.0), 0.45, 0.25)
            }),
        ),
    ];
    let manufactured: Vec<(&str, TriMesh)> = vec![
        ("crate", subdivided_box(v(1.0, 0.6, 0.8), 18)),
        ("ring", torus(1.0, 0.3, 72, 32)),
        ("dice", superellipsoid(48, 64, 8.0, v(1.0, 1.0, 1.0))),
        (
            "bottle",
            lathe(64, 48, "bottle", |t| {
                let y = 2.4 * t - 1.2;
                let r = if t < 0.02 {
                    t / 0.02 * 0.5
                } else if t < 0.55 {
                    0.5
                } else if t < 0.75 {
                    0.5 - (t - 0.55) / 0.2 * 0.32
                } else if t < 0.98 {
                    0.18
                } else {
                    (1.0 - t) / 0.02 * 0.18
                };
                (r, y)
            }),
        ),
        (
            "pawn",
            lathe(64, 48, "pawn", |t| {
                let y = 2.0 * t - 1.0;
                let r = if t < 0.03 {
                    t / 0.03 * 0.6
                } else if t < 0.15 {
                    0.6
                } else if t < 0.6 {
                    0.6 - (t - 0.15) / 0.45 * 0.4
                } else if t < 0.65 {
                    0.35
                } else {
                    let s = (t - 0.65) / 0.35;
                    0.3 * (PI * s).sin().max(0.0) + 0.2 * (1.0 - s) * (1.0 - s)
                };
                (r, y)
            }),
        ),
        (
            "spindle",
            lathe(64, 48, "spindle", |t| {
                let y = 3.0 * t - 1.5;
                let r = (PI * t).sin() * (0.25 + 0.15 * (8.0 * PI * t).cos().abs());
                (r, y)
            }),
        ),
    ];
    organic
        .into_iter()
        .map(|(name, mesh)| (name, Animal, mesh))
        .chain(manufactured.into_iter().map(|(name, mesh)| (name, Artifact, mesh)))
        .map(|(name, object_type, mesh)| CorpusShape {
            name,
            object_type,
            mesh: mesh.with_label(name),
        })
        .collect()
}
