//! Uniform-grid vertex clustering.

use std::collections::{HashMap, HashSet};

use nalgebra::{Point3, Vector3};

use super::{SimplifyError, Simplified};
use crate::mesh::TriMesh;

pub const MAX_CELLS_PER_AXIS: u32 = 1024;

/// Grid result must not exceed the target by more than this factor.
pub const TARGET_SLACK: f64 = 1.02;

/// Outside this relative band around the target a warning is attached.
const WARN_BAND: f64 = 0.20;

/// Snaps every vertex to the centroid of the vertices sharing its cell in a
/// `cells × cells × cells` grid anchored at the bounding-box minimum. Faces
/// that lose a corner are dropped and repeated faces are kept once.
pub fn vertex_cluster(mesh: &TriMesh, cells_per_axis: u32) -> Result<TriMesh, SimplifyError> {
    if cells_per_axis == 0 {
        return Err(SimplifyError::ZeroCells);
    }
    let Ok(bb) = mesh.bounding_box() else {
        return Ok(mesh.clone());
    };
    let cells = cells_per_axis as u64;
    let extent = bb.extent();
    let cell_of = |p: &Point3<f64>| -> u64 {
        let mut key = 0u64;
        for k in 0..3 {
            let i = if extent[k] > 0.0 {
                let f = ((p[k] - bb.min[k]) / extent[k] * cells as f64).floor();
                (f.max(0.0) as u64).min(cells - 1)
            } else {
                0
            };
            key = key * cells + i;
        }
        key
    };

    // representatives numbered by first appearance in vertex order
    let mut slot_of_cell: HashMap<u64, u32> = HashMap::new();
    let mut sums: Vec<(Vector3<f64>, u32)> = Vec::new();
    let rep: Vec<u32> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let slot = *slot_of_cell.entry(cell_of(p)).or_insert_with(|| {
                sums.push((Vector3::zeros(), 0));
                sums.len() as u32 - 1
            });
            let s = &mut sums[slot as usize];
            s.0 += p.coords;
            s.1 += 1;
            slot
        })
        .collect();
    let vertices: Vec<Point3<f64>> = sums
        .iter()
        .map(|(sum, n)| Point3::from(sum / *n as f64))
        .collect();

    let mut seen = HashSet::new();
    let mut faces = Vec::new();
    for f in mesh.faces() {
        let g = f.map(|i| rep[i as usize]);
        if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] {
            continue;
        }
        let mut key = g;
        key.sort_unstable();
        if seen.insert(key) {
            faces.push(g);
        }
    }
    Ok(TriMesh::new(vertices, faces, mesh.label())
        .expect("representatives are finite")
        .compacted())
}

/// Searches the grid resolution whose output face count is closest to
/// `target_faces` without exceeding `TARGET_SLACK × target_faces`.
pub fn vclust_to_target(mesh: &TriMesh, target_faces: usize) -> Result<ClusterOutcome, SimplifyError> {
    if target_faces == 0 {
        return Err(SimplifyError::ZeroTarget);
    }
    if target_faces >= mesh.face_count() {
        return Err(SimplifyError::TargetNotBelowInput {
            target: target_faces,
            faces: mesh.face_count(),
        });
    }
    let cap = (target_faces as f64 * TARGET_SLACK).floor() as usize;
    let mut cache: HashMap<u32, TriMesh> = HashMap::new();
    let mut faces_at = |n: u32| -> Result<usize, SimplifyError> {
        if let Some(m) = cache.get(&n) {
            return Ok(m.face_count());
        }
        let m = vertex_cluster(mesh, n)?;
        let count = m.face_count();
        cache.insert(n, m);
        Ok(count)
    };

    // largest resolution under the cap, assuming the count grows with it
    let (mut lo, mut hi) = (1u32, MAX_CELLS_PER_AXIS);
    if faces_at(hi)? <= cap {
        lo = hi;
    } else {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if faces_at(mid)? <= cap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    // the count is only roughly monotone, so look around the crossing
    let mut best: Option<(usize, u32)> = None;
    for n in lo.saturating_sub(3).max(1)..=(lo + 3).min(MAX_CELLS_PER_AXIS) {
        let f = faces_at(n)?;
        if f > cap {
            continue;
        }
        let diff = f.abs_diff(target_faces);
        if best.is_none_or(|(d, _)| diff < d) {
            best = Some((diff, n));
        }
    }
    let (_, cells) = best.expect("one cell per axis always yields zero faces");
    let mesh_out = cache.remove(&cells).unwrap();
    let achieved = mesh_out.face_count();
    let rel = (achieved as f64 - target_faces as f64).abs() / target_faces as f64;
    let warning = (rel > WARN_BAND).then(|| {
        format!(
            "{}: closest grid ({cells}³) gives {achieved} faces for target {target_faces}",
            mesh.label()
        )
    });
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(ClusterOutcome {
        simplified: Simplified {
            mesh: mesh_out,
            achieved_faces: achieved,
            warning,
        },
        cells_per_axis: cells,
    })
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub simplified: Simplified,
    pub cells_per_axis: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    /// Hand simulation of clustering on eight points: every point that lands
    /// in the same octant is averaged; faces are remapped and filtered.
    fn brute_force_cluster(mesh: &TriMesh, cells: u32) -> (Vec<Point3<f64>>, usize) {
        let bb = mesh.bounding_box().unwrap();
        let mut groups: Vec<((u32, u32, u32), Vec<usize>)> = Vec::new();
        for (i, p) in mesh.vertices().iter().enumerate() {
            let c = |k: usize| {
                (((p[k] - bb.min[k]) / (bb.max[k] - bb.min[k]) * cells as f64) as u32).min(cells - 1)
            };
            let key = (c(0), c(1), c(2));
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(i),
                None => groups.push((key, vec![i])),
            }
        }
        let reps: Vec<Point3<f64>> = groups
            .iter()
            .map(|(_, m)| {
                let s: Vector3<f64> = m.iter().map(|&i| mesh.vertices()[i].coords).sum();
                Point3::from(s / m.len() as f64)
            })
            .collect();
        let group_of = |v: u32| groups.iter().position(|(_, m)| m.contains(&(v as usize))).unwrap();
        let mut kept: Vec<[usize; 3]> = Vec::new();
        for f in mesh.faces() {
            let mut g = f.map(group_of);
            if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] {
                continue;
            }
            g.sort();
            if !kept.contains(&g) {
                kept.push(g);
            }
        }
        (reps, kept.len())
    }

    #[test]
    fn cube_on_two_cells_keeps_octant_centroids() {
        let cube = synth::cube(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let (reps, faces) = brute_force_cluster(&cube, 2);
        assert_eq!(reps.len(), 8);
        assert_eq!(faces, 12);
        let out = vertex_cluster(&cube, 2).unwrap();
        assert_eq!(out.vertex_count(), 8);
        assert_eq!(out.face_count(), faces);
        for r in &reps {
            assert!(out.vertices().contains(r));
        }
    }

    #[test]
    fn matches_brute_force_on_sphere() {
        let sphere = synth::icosphere(2);
        for cells in [2, 3, 5, 8] {
            let (reps, faces) = brute_force_cluster(&sphere, cells);
            let out = vertex_cluster(&sphere, cells).unwrap();
            assert_eq!(out.face_count(), faces, "cells {cells}");
            assert!(out.vertex_count() <= reps.len());
        }
    }

    #[test]
    fn single_cell_collapses_everything() {
        let out = vertex_cluster(&synth::icosphere(3), 1).unwrap();
        assert_eq!(out.face_count(), 0);
        assert!(vertex_cluster(&synth::icosphere(1), 0).is_err());
    }

    #[test]
    fn fine_grid_is_identity() {
        let sphere = synth::icosphere(2);
        let out = vertex_cluster(&sphere, 1024).unwrap();
        assert_eq!(out.face_count(), sphere.face_count());
        assert_eq!(out.vertices(), sphere.vertices());
        assert_eq!(out.faces(), sphere.faces());
    }

    #[test]
    fn representatives_stay_in_box() {
        let m = synth::demo_corpus().remove(1).mesh;
        let bb = m.bounding_box().unwrap();
        let out = vertex_cluster(&m, 13).unwrap();
        assert!(out.vertices().iter().all(|p| bb.contains(p)));
        assert!(out.face_count() <= m.face_count());
    }

    #[test]
    fn face_count_grows_with_resolution() {
        let sphere = synth::icosphere(3);
        let counts: Vec<usize> = (1..=64)
            .map(|n| vertex_cluster(&sphere, n).unwrap().face_count())
            .collect();
        // grid alignment makes single steps noisy; look at the trend
        for w in counts.windows(2) {
            assert!(w[1] as f64 >= w[0] as f64 * 0.85 - 8.0, "{counts:?}");
        }
        for pair in counts.chunks(8).collect::<Vec<_>>().windows(2) {
            let a: usize = pair[0].iter().sum();
            let b: usize = pair[1].iter().sum();
            assert!(b >= a, "{counts:?}");
        }
    }

    #[test]
    fn target_search() {
        let sphere = synth::icosphere(3);
        let out = vclust_to_target(&sphere, 256).unwrap();
        let achieved = out.simplified.achieved_faces;
        assert!(achieved as f64 <= 1.02 * 256.0);
        assert!(achieved as f64 >= 0.8 * 256.0, "achieved {achieved}");

        let near = vclust_to_target(&sphere, sphere.face_count() - 1).unwrap();
        assert!(near.simplified.achieved_faces as f64 <= 1.02 * (sphere.face_count() - 1) as f64);
        assert!(vclust_to_target(&sphere, sphere.face_count()).is_err());
    }
}
