//! View-independent fidelity: sampled surface-to-surface distances and the
//! volume difference between a standard and its simplification.
//!
//! Distances are sampled on the pivot surface (area-weighted, seeded) and
//! measured to the other surface through a triangle BVH. The maximum also
//! considers the pivot's vertices, which often realize it.

mod bvh;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{triangle_area, TriMesh};

pub use bvh::{point_triangle_distance_squared, TriangleBvh};

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("mesh `{0}` has no faces")]
    EmptyMesh(String),
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Floor on the number of surface samples per direction.
pub const MIN_DEFAULT_SAMPLES: usize = 100_000;
/// Samples per pivot face when that exceeds the floor.
pub const SAMPLES_PER_FACE: usize = 50;

/// Area-weighted random barycentric sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceSampler {
    pub samples_target: usize,
    pub seed: u64,
}

impl SurfaceSampler {
    pub fn new(samples_target: usize, seed: u64) -> Self {
        SurfaceSampler {
            samples_target,
            seed,
        }
    }

    /// `max(100 000, 50 × faces(pivot))` samples.
    pub fn for_pivot(pivot: &TriMesh, seed: u64) -> Self {
        Self::new(MIN_DEFAULT_SAMPLES.max(SAMPLES_PER_FACE * pivot.face_count()), seed)
    }

    /// Points on `mesh`, drawn from the seeded stream `stream`. Every point
    /// is a convex combination of one face's corners.
    pub fn sample(&self, mesh: &TriMesh, stream: u64) -> Result<Vec<Point3<f64>>, GeomError> {
        if self.samples_target == 0 {
            return Err(GeomError::NoSamples);
        }
        if mesh.is_empty() {
            return Err(GeomError::EmptyMesh(mesh.label().to_string()));
        }
        let mut cumulative = Vec::with_capacity(mesh.face_count());
        let mut total = 0.0;
        for t in mesh.triangles() {
            total += triangle_area(&t);
            cumulative.push(total);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        if total <= 0.0 {
            // nothing to weight by; fall back to the corners
            return Ok(mesh.vertices().to_vec());
        }
        Ok((0..self.samples_target)
            .map(|_| {
                let x: f64 = rng.random::<f64>() * total;
                let face = cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1);
                let [a, b, c] = mesh.triangle(face);
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let s = r1.sqrt();
                let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
                Point3::from(a.coords * wa + b.coords * wb + c.coords * wc)
            })
            .collect())
    }
}

/// Distances from one surface's samples to another surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub mean: f64,
    pub mean_sq: f64,
    pub max: f64,
    /// Standard error of `mean`, from the sample variance.
    pub std_err: f64,
    pub samples: usize,
    /// Length everything was divided by (squared for `mean_sq`), if any.
    pub normalizer: Option<f64>,
}

impl DistanceSummary {
    pub fn zero(samples: usize) -> Self {
        DistanceSummary {
            mean: 0.0,
            mean_sq: 0.0,
            max: 0.0,
            std_err: 0.0,
            samples,
            normalizer: None,
        }
    }

    pub fn normalized(&self, by: f64) -> Self {
        DistanceSummary {
            mean: self.mean / by,
            mean_sq: self.mean_sq / (by * by),
            max: self.max / by,
            std_err: self.std_err / by,
            samples: self.samples,
            normalizer: Some(by),
        }
    }
}

/// Distance from `p` to the nearest point of `mesh`.
pub fn point_to_mesh_distance(p: &Point3<f64>, mesh: &TriMesh) -> Result<f64, GeomError> {
    let bvh = TriangleBvh::new(mesh).ok_or_else(|| GeomError::EmptyMesh(mesh.label().to_string()))?;
    Ok(bvh.distance(p))
}

fn same_surface(a: &TriMesh, b: &TriMesh) -> bool {
    a.vertices() == b.vertices() && a.faces() == b.faces()
}

fn summarize(pivot: &TriMesh, other: &TriMesh, sampler: &SurfaceSampler, stream: u64) -> Result<DistanceSummary, GeomError> {
    let samples = sampler.sample(pivot, stream)?;
    if same_surface(pivot, other) {
        return Ok(DistanceSummary::zero(samples.len()));
    }
    let bvh = TriangleBvh::new(other).ok_or_else(|| GeomError::EmptyMesh(other.label().to_string()))?;
    // the parallel map keeps input order, so the sums below are reproducible
    let d: Vec<f64> = samples.par_iter().map(|p| bvh.distance(p)).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let mean_sq = d.iter().map(|x| x * x).sum::<f64>() / n;
    let var = if d.len() > 1 {
        d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let vertex_max = pivot
        .vertices()
        .par_iter()
        .map(|p| bvh.distance(p))
        .reduce(|| 0.0, f64::max);
    let max = d.iter().copied().fold(vertex_max, f64::max);
    Ok(DistanceSummary {
        mean,
        mean_sq,
        max,
        std_err: (var / n).sqrt(),
        samples: d.len(),
        normalizer: None,
    })
}

/// Distances from points on `pivot` to the surface of `other`, in model
/// units.
pub fn one_sided_distances(pivot: &TriMesh, other: &TriMesh, sampler: &SurfaceSampler) -> Result<DistanceSummary, GeomError> {
    if other.is_empty() {
        return Err(GeomError::EmptyMesh(other.label().to_string()));
    }
    summarize(pivot, other, sampler, 0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetroOptions {
    /// Average the mean and mean-squared summaries over both directions
    /// instead of using the standard as the only pivot.
    pub symmetrize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetroMeasures {
    /// Mean distance over the diagonal of the standard's bounding box.
    pub metro_mn: f64,
    /// Mean squared distance over the squared diagonal.
    pub metro_mse: f64,
    /// Two-sided (Hausdorff) distance over the diagonal.
    pub metro_max: f64,
    /// Absolute difference of the enclosed volumes, in model units.
    pub metro_vol: f64,
    /// Set when either mesh is open, making the volumes orientation-dependent.
    pub volume_approximate: bool,
    pub forward: DistanceSummary,
    pub backward: DistanceSummary,
}

/// Metro-style measures of `approx` against the standard `s`. The
/// standard is the pivot and its bounding-box diagonal the normalizer.
pub fn metro_measures(s: &TriMesh, approx: &TriMesh, sampler: &SurfaceSampler, options: MetroOptions) -> Result<MetroMeasures, GeomError> {
    for m in [s, approx] {
        if m.is_empty() {
            return Err(GeomError::EmptyMesh(m.label().to_string()));
        }
    }
    let diag = s.bounding_box().map_err(|_| GeomError::EmptyMesh(s.label().to_string()))?.diagonal();
    let forward = summarize(s, approx, sampler, 0)?.normalized(diag);
    let backward = summarize(approx, s, sampler, 1)?.normalized(diag);
    let (metro_mn, metro_mse) = if options.symmetrize {
        (
            0.5 * (forward.mean + backward.mean),
            0.5 * (forward.mean_sq + backward.mean_sq),
        )
    } else {
        (forward.mean, forward.mean_sq)
    };
    Ok(MetroMeasures {
        metro_mn,
        metro_mse,
        metro_max: forward.max.max(backward.max),
        metro_vol: (s.signed_volume().abs() - approx.signed_volume().abs()).abs(),
        volume_approximate: !(s.is_closed() && approx.is_closed()),
        forward,
        backward,
    })
}
