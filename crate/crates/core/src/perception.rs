//! Synthetic time-of-flight depth images and local plane fitting.

use std::io::{self, BufRead, Read, Write};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::VehicleParams;
use crate::geometry::{Pose, Rotation};
use crate::scene::Scene;
use crate::{Error, Result};

pub const DEFAULT_AXIS_RADIUS: f64 = 0.15;
pub const DEFAULT_MIN_POINTS: usize = 30;
/// Smallest `|n · ẑ|` for which the camera axis is taken to meet the plane.
const MIN_FACING: f64 = 1e-3;

/// Pinhole depth camera whose axes coincide with the tool frame
/// (x right, y down, z along the tool).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view [rad].
    pub hfov: f64,
    /// [m]
    pub max_range: f64,
    /// [m]
    pub min_range: f64,
    /// Standard deviation of range noise along each ray [m]; 0 disables it.
    pub noise_std: f64,
    /// Camera origin along the tool axis, measured from the body origin [m].
    pub mount_offset: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            hfov: 60f64.to_radians(),
            max_range: 4.0,
            min_range: 0.1,
            noise_std: 0.0,
            mount_offset: 0.05,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.hfov > 0.0 && self.hfov < std::f64::consts::PI) {
            return Err(Error::InvalidParameter("field of view must lie in (0, π)".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidParameter("resolution must be at least 16×16".into()));
        }
        if !(self.max_range > self.min_range && self.min_range >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("invalid range or noise settings".into()));
        }
        Ok(())
    }

    /// Focal length [px].
    pub fn focal_length(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.hfov).tan()
    }

    /// Unit ray through pixel `(u, v)` in camera coordinates.
    pub fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let f = self.focal_length();
        let x = (u as f64 - 0.5 * self.width as f64) / f;
        let y = (v as f64 - 0.5 * self.height as f64) / f;
        Vector3::new(x, y, 1.0).normalize()
    }

    /// Camera pose relative to the body.
    pub fn body_pose(&self, params: &VehicleParams) -> Pose {
        let r = params.tool_rotation();
        Pose::new(r.rotate(&Vector3::z()) * self.mount_offset, r)
    }

    /// Camera pose in the world for a given body pose.
    pub fn world_pose(&self, body: &Pose, params: &VehicleParams) -> Pose {
        body.compose(&self.body_pose(params))
    }
}

/// Points in the camera frame [m].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, timestamp: f64) -> Self {
        Self { points, timestamp }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Little-endian `u32` count followed by `count × 3` `f32` coordinates.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = u32::try_from(self.points.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "too many points"))?;
        w.write_all(&n.to_le_bytes())?;
        for p in &self.points {
            for c in p.iter() {
                w.write_all(&(*c as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let mut c = [0.0; 3];
            for x in c.iter_mut() {
                r.read_exact(&mut word)?;
                *x = f32::from_le_bytes(word) as f64;
            }
            points.push(Vector3::from(c));
        }
        Ok(Self { points, timestamp: 0.0 })
    }

    /// `x_m,y_m,z_m` header then one point per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x_m,y_m,z_m")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> io::Result<Self> {
        let bad = |line: &str| io::Error::new(io::ErrorKind::InvalidData, format!("bad point row: {line}"));
        let mut points = Vec::new();
        for line in r.lines().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(&line))?;
            if vals.len() != 3 {
                return Err(bad(&line));
            }
            points.push(Vector3::new(vals[0], vals[1], vals[2]));
        }
        Ok(Self { points, timestamp: 0.0 })
    }
}

/// Casts one ray per pixel from `camera` (world pose) into `scene`.
///
/// With `noise_std > 0` the range along each ray is perturbed by Gaussian
/// noise drawn from a generator seeded by `seed`.
pub fn render_depth(camera: &Pose, scene: &Scene, model: &CameraModel, seed: u64, timestamp: f64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (model.noise_std > 0.0).then(|| Normal::new(0.0, model.noise_std).expect("finite std"));
    let mut points = Vec::new();
    for v in 0..model.height {
        for u in 0..model.width {
            let ray = model.ray(u, v);
            let dir = camera.orientation.rotate(&ray);
            let Some((mut t, _)) = scene.ray_cast(&camera.position, &dir, 0.0) else { continue };
            if let Some(n) = &noise {
                t += n.sample(&mut rng);
            }
            if t >= model.min_range && t <= model.max_range {
                points.push(ray * t);
            }
        }
    }
    PointCloud { points, timestamp }
}

/// Points within `radius` of the camera z-axis, in input order.
pub fn select_axis_points(cloud: &PointCloud, radius: f64) -> PointCloud {
    let r2 = radius * radius;
    PointCloud {
        points: cloud.points.iter().copied().filter(|p| p.x * p.x + p.y * p.y <= r2).collect(),
        timestamp: cloud.timestamp,
    }
}

/// Local plane seen along the tool axis, in the camera/tool frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceEstimate {
    /// Unit normal, oriented toward the camera (`n · ẑ ≤ 0`).
    pub normal: Vector3<f64>,
    /// Distance along the camera axis to the fitted plane [m].
    pub distance: f64,
    /// Intersection of the camera axis with the fitted plane [m].
    pub contact_point: Vector3<f64>,
    /// Mean of the selected points [m].
    pub centroid: Vector3<f64>,
    pub valid: bool,
    pub count: usize,
    /// Eigenvalues of the point covariance, ascending.
    pub spread: Vector3<f64>,
}

impl SurfaceEstimate {
    fn invalid(count: usize, centroid: Vector3<f64>) -> Self {
        Self {
            normal: -Vector3::z(),
            distance: centroid.z,
            contact_point: Vector3::new(0.0, 0.0, centroid.z),
            centroid,
            valid: false,
            count,
            spread: Vector3::zeros(),
        }
    }

    /// Contact point and normal expressed in the world frame.
    pub fn to_world(&self, camera: &Pose) -> SurfacePatch {
        SurfacePatch {
            point: camera.transform_point(&self.contact_point),
            normal: camera.orientation.rotate(&self.normal),
        }
    }

    /// Sum of squared orthogonal distances of `points` to the fitted plane.
    pub fn residual(&self, points: &[Vector3<f64>]) -> f64 {
        plane_residual(points, &self.centroid, &self.normal)
    }
}

pub fn plane_residual(points: &[Vector3<f64>], point: &Vector3<f64>, normal: &Vector3<f64>) -> f64 {
    points.iter().map(|p| (p - point).dot(normal).powi(2)).sum()
}

/// World-frame contact point and outward surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePatch {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Total-least-squares plane through `cloud`.
pub fn estimate_surface(cloud: &PointCloud, min_points: usize) -> SurfaceEstimate {
    let n = cloud.points.len();
    if n == 0 {
        return SurfaceEstimate::invalid(0, Vector3::zeros());
    }
    let inv_n = 1.0 / n as f64;
    let mean = cloud.points.iter().sum::<Vector3<f64>>() * inv_n;
    if n < 3 {
        return SurfaceEstimate::invalid(n, mean);
    }
    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov *= inv_n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lam = Vector3::new(eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    let mut normal: Vector3<f64> = eig.eigenvectors.column(order[0]).normalize();
    if normal.z > 0.0 {
        normal = -normal;
    }
    let separated = lam[1] - lam[0] >= 1e-12;
    let flat = lam[1] > 0.0 && lam[0] / lam[1] < 0.5;
    let facing = normal.z < -MIN_FACING;
    let distance = if facing { normal.dot(&mean) / normal.z } else { mean.z };
    SurfaceEstimate {
        normal,
        distance,
        contact_point: Vector3::new(0.0, 0.0, distance),
        centroid: mean,
        valid: n >= min_points && separated && flat && facing,
        count: n,
        spread: lam,
    }
}

/// Rendering plus point selection plus plane fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSensor {
    pub camera: CameraModel,
    pub axis_radius: f64,
    pub min_points: usize,
}

impl Default for SurfaceSensor {
    fn default() -> Self {
        Self { camera: CameraModel::default(), axis_radius: DEFAULT_AXIS_RADIUS, min_points: DEFAULT_MIN_POINTS }
    }
}

impl SurfaceSensor {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if !(self.axis_radius > 0.0) {
            return Err(Error::InvalidParameter("axis radius must be positive".into()));
        }
        Ok(())
    }

    /// Estimate from a body pose. The image is taken from `true_body`; the
    /// estimate is placed in the world using `believed_body`.
    pub fn observe(
        &self,
        true_body: &Pose,
        believed_body: &Pose,
        params: &VehicleParams,
        scene: &Scene,
        seed: u64,
        timestamp: f64,
    ) -> (SurfaceEstimate, Option<SurfacePatch>) {
        let cloud = render_depth(&self.camera.world_pose(true_body, params), scene, &self.camera, seed, timestamp);
        let est = estimate_surface(&select_axis_points(&cloud, self.axis_radius), self.min_points);
        let patch = est.valid.then(|| est.to_world(&self.camera.world_pose(believed_body, params)));
        (est, patch)
    }
}

/// Rotates every point of a cloud.
pub fn rotate_cloud(cloud: &PointCloud, q: &Rotation) -> PointCloud {
    PointCloud { points: cloud.points.iter().map(|p| q.rotate(p)).collect(), timestamp: cloud.timestamp }
}
