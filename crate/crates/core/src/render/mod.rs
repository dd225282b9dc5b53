//! Deterministic software rasterizer for stimulus images: perspective
//! projection, z-buffer, flat Lambert shading with a white light at the eye,
//! black background.

mod image;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{triangle_normal, TriMesh};

pub use image::{parse_pgm, resize_box, GrayImage};

pub const DEFAULT_FOV_DEG: f64 = 40.0;
pub const DEFAULT_DISTANCE_FACTOR: f64 = 2.0;
pub const DEFAULT_AZIMUTH_DEG: f64 = 45.0;
pub const DEFAULT_ELEVATION_DEG: f64 = 25.0;

/// Single stimuli are this wide.
pub const STIMULUS_WIDTH: usize = 591;
/// 4:3 frame at stimulus width.
pub const STIMULUS_HEIGHT: usize = 443;
/// Stimuli are rendered at this multiple and box-filtered down.
pub const SUPERSAMPLE: usize = 2;

/// Pair stimuli: each member is scaled to this width...
pub const PAIR_MEMBER_WIDTH: usize = 400;
/// ...and centered in a panel of this size; two panels side by side.
pub const PAIR_PANEL_WIDTH: usize = 512;
pub const PAIR_PANEL_HEIGHT: usize = 768;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("mesh bounding box is degenerate")]
    DegenerateBox,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("image size must be non-zero")]
    ZeroSize,
    #[error("expected {expected} pixels, got {got}")]
    PixelCount { expected: usize, got: usize },
    #[error("pixel value is NaN")]
    NanPixel,
    #[error("PGM: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Optional per-object camera settings; unset fields take the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_deg: Option<f64>,
    /// Replaces the vertex centroid as the point looked at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look_at: Option<[f64; 3]>,
}

impl CameraOverrides {
    pub fn is_empty(&self) -> bool {
        *self == CameraOverrides::default()
    }

    /// Fields set in `other` win.
    pub fn merged(&self, other: &CameraOverrides) -> CameraOverrides {
        CameraOverrides {
            fov_deg: other.fov_deg.or(self.fov_deg),
            distance_factor: other.distance_factor.or(self.distance_factor),
            azimuth_deg: other.azimuth_deg.or(self.azimuth_deg),
            elevation_deg: other.elevation_deg.or(self.elevation_deg),
            look_at: other.look_at.or(self.look_at),
        }
    }
}

/// A resolved camera. `fov_deg` is the vertical field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fov_deg: f64,
    pub distance_factor: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub look_at: Point3<f64>,
    pub eye: Point3<f64>,
    pub up: Vector3<f64>,
}

impl CameraSpec {
    /// A camera at `eye` aimed at `target` with +Y as the up hint.
    pub fn look(eye: Point3<f64>, target: Point3<f64>, fov_deg: f64) -> Self {
        let up = if (target - eye).cross(&Vector3::y()).norm_squared() == 0.0 {
            Vector3::z()
        } else {
            Vector3::y()
        };
        CameraSpec {
            fov_deg,
            distance_factor: f64::NAN,
            azimuth_deg: f64::NAN,
            elevation_deg: f64::NAN,
            look_at: target,
            eye,
            up,
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(RenderError::InvalidCamera(format!("field of view {}° not in (0, 180)", self.fov_deg)));
        }
        let dir = self.look_at - self.eye;
        if !(dir.norm() > 0.0) {
            return Err(RenderError::InvalidCamera("eye coincides with look-at point".into()));
        }
        if dir.cross(&self.up).norm_squared() == 0.0 {
            return Err(RenderError::InvalidCamera("up vector parallel to view direction".into()));
        }
        Ok(())
    }
}

/// Default 3/4 view: the eye sits `distance_factor × diagonal` from the
/// vertex centroid along the (azimuth, elevation) direction. Azimuth and
/// elevation zero put the eye on +Z; positive azimuth turns towards +X and
/// positive elevation lifts towards +Y.
pub fn canonical_camera(mesh: &TriMesh, overrides: &CameraOverrides) -> Result<CameraSpec, RenderError> {
    let bb = mesh.bounding_box().map_err(|_| RenderError::DegenerateBox)?;
    if bb.is_degenerate() {
        return Err(RenderError::DegenerateBox);
    }
    let fov_deg = overrides.fov_deg.unwrap_or(DEFAULT_FOV_DEG);
    let distance_factor = overrides.distance_factor.unwrap_or(DEFAULT_DISTANCE_FACTOR);
    if !(distance_factor > 0.0) {
        return Err(RenderError::InvalidCamera(format!("distance factor {distance_factor} must be positive")));
    }
    let azimuth_deg = overrides.azimuth_deg.unwrap_or(DEFAULT_AZIMUTH_DEG);
    let elevation_deg = overrides.elevation_deg.unwrap_or(DEFAULT_ELEVATION_DEG);
    let look_at = match overrides.look_at {
        Some([x, y, z]) => Point3::new(x, y, z),
        None => mesh.vertex_centroid().ok_or(RenderError::DegenerateBox)?,
    };
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    let dir = Vector3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
    let eye = look_at + dir * (distance_factor * bb.diagonal());
    let up = if el.cos().abs() < 1e-9 { -az.sin() * Vector3::x() - az.cos() * Vector3::z() } else { Vector3::y() };
    let cam = CameraSpec {
        fov_deg,
        distance_factor,
        azimuth_deg,
        elevation_deg,
        look_at,
        eye,
        up,
    };
    cam.validate()?;
    Ok(cam)
}

struct View {
    eye: Point3<f64>,
    right: Vector3<f64>,
    up: Vector3<f64>,
    forward: Vector3<f64>,
    focal: f64,
    aspect: f64,
    near: f64,
}

impl View {
    fn new(cam: &CameraSpec, width: usize, height: usize) -> Self {
        let forward = (cam.look_at - cam.eye).normalize();
        let right = forward.cross(&cam.up).normalize();
        let up = right.cross(&forward);
        View {
            eye: cam.eye,
            right,
            up,
            forward,
            focal: 1.0 / (cam.fov_deg.to_radians() / 2.0).tan(),
            aspect: width as f64 / height as f64,
            near: 1e-4 * (cam.look_at - cam.eye).norm(),
        }
    }

    fn to_view(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.eye;
        Vector3::new(self.right.dot(&d), self.up.dot(&d), self.forward.dot(&d))
    }
}

/// Clips a view-space polygon against the near plane.
fn clip_near(poly: &[Vector3<f64>], near: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (ina, inb) = (a.z >= near, b.z >= near);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (near - a.z) / (b.z - a.z);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Renders `mesh` as seen from `cam`. Each face gets the constant shade
/// `max(0, n̂·v̂)`, `v̂` pointing from the face centroid to the eye; uncovered
/// pixels stay exactly 0.
pub fn rasterize(mesh: &TriMesh, cam: &CameraSpec, width: usize, height: usize) -> Result<GrayImage, RenderError> {
    if width == 0 || height == 0 {
        return Err(RenderError::ZeroSize);
    }
    cam.validate()?;
    let view = View::new(cam, width, height);
    let mut color = vec![0.0f64; width * height];
    let mut depth = vec![0.0f64; width * height]; // 1/z, larger is nearer
    let (w, h) = (width as f64, height as f64);

    for tri in mesh.triangles() {
        let Some(n) = triangle_normal(&tri) else { continue };
        let centroid = Point3::from((tri[0].coords + tri[1].coords + tri[2].coords) / 3.0);
        let to_eye = cam.eye - centroid;
        let shade = if to_eye.norm() > 0.0 { n.dot(&to_eye.normalize()).max(0.0) } else { 0.0 };

        let poly = clip_near(&tri.map(|p| view.to_view(&p)), view.near);
        if poly.len() < 3 {
            continue;
        }
        // screen x, y and 1/z
        let screen: Vec<(f64, f64, f64)> = poly
            .iter()
            .map(|v| {
                let sx = (view.focal * v.x / (v.z * view.aspect) + 1.0) * 0.5 * w;
                let sy = (1.0 - view.focal * v.y / v.z) * 0.5 * h;
                (sx, sy, 1.0 / v.z)
            })
            .collect();
        for k in 1..screen.len() - 1 {
            fill_triangle([screen[0], screen[k], screen[k + 1]], shade, width, height, &mut color, &mut depth);
        }
    }
    GrayImage::from_pixels(width, height, color)
}

fn fill_triangle(
    t: [(f64, f64, f64); 3],
    shade: f64,
    width: usize,
    height: usize,
    color: &mut [f64],
    depth: &mut [f64],
) {
    let edge = |a: (f64, f64, f64), b: (f64, f64, f64), x: f64, y: f64| (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0);
    let area = edge(t[0], t[1], t[2].0, t[2].1);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let min_x = t.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = t.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = t.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = t.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if max_x < 0.0 || max_y < 0.0 || min_x > width as f64 || min_y > height as f64 {
        return;
    }
    let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
    let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
    let x1 = ((max_x - 0.5).floor().min(width as f64 - 1.0)).max(-1.0);
    let y1 = ((max_y - 0.5).floor().min(height as f64 - 1.0)).max(-1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (x1, y1) = (x1 as usize, y1 as usize);
    for y in y0..=y1 {
        let py = y as f64 + 0.5;
        for x in x0..=x1 {
            let px = x as f64 + 0.5;
            let w0 = edge(t[1], t[2], px, py) / area;
            let w1 = edge(t[2], t[0], px, py) / area;
            let w2 = edge(t[0], t[1], px, py) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let inv_z = w0 * t[0].2 + w1 * t[1].2 + w2 * t[2].2;
            let i = y * width + x;
            if inv_z > depth[i] {
                depth[i] = inv_z;
                color[i] = shade;
            }
        }
    }
}

/// A single stimulus: rendered at `SUPERSAMPLE ×` the stimulus frame and
/// box-filtered to `STIMULUS_WIDTH × STIMULUS_HEIGHT`.
pub fn render_stimulus(mesh: &TriMesh, cam: &CameraSpec) -> Result<GrayImage, RenderError> {
    let big = rasterize(mesh, cam, STIMULUS_WIDTH * SUPERSAMPLE, STIMULUS_HEIGHT * SUPERSAMPLE)?;
    Ok(resize_box(&big, STIMULUS_WIDTH, STIMULUS_HEIGHT))
}

/// Size `img` scales to for a pair panel: `PAIR_MEMBER_WIDTH` wide unless
/// that would overflow the panel height.
fn panel_fit(img: &GrayImage) -> (usize, usize) {
    if img.width() == 0 || img.height() == 0 {
        return (0, 0);
    }
    let aspect = img.height() as f64 / img.width() as f64;
    let h = (PAIR_MEMBER_WIDTH as f64 * aspect).round() as usize;
    if h <= PAIR_PANEL_HEIGHT {
        (PAIR_MEMBER_WIDTH, h.max(1))
    } else {
        (((PAIR_PANEL_HEIGHT as f64 / aspect).round() as usize).max(1), PAIR_PANEL_HEIGHT)
    }
}

/// Side-by-side pair stimulus: each member is scaled and centered in its own
/// `PAIR_PANEL_WIDTH × PAIR_PANEL_HEIGHT` panel.
pub fn compose_pair(left: &GrayImage, right: &GrayImage) -> GrayImage {
    let mut out = GrayImage::new(2 * PAIR_PANEL_WIDTH, PAIR_PANEL_HEIGHT);
    for (panel, img) in [left, right].into_iter().enumerate() {
        let (w, h) = panel_fit(img);
        if w == 0 {
            continue;
        }
        let scaled = resize_box(img, w, h);
        let x0 = panel * PAIR_PANEL_WIDTH + (PAIR_PANEL_WIDTH - w) / 2;
        let y0 = (PAIR_PANEL_HEIGHT - h) / 2;
        out.blit(&scaled, x0, y0);
    }
    out
}
