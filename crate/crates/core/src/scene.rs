//! Static environment: contact primitives plus the penalty-contact
//! coefficients used by the simulator.

use nalgebra::Vector3;

use crate::{Error, Result};

/// Default penalty stiffness [N/m].
pub const DEFAULT_CONTACT_STIFFNESS: f64 = 2000.0;
/// Default penalty damping [N·s/m].
pub const DEFAULT_CONTACT_DAMPING: f64 = 50.0;
/// Default Coulomb coefficient.
pub const DEFAULT_FRICTION: f64 = 0.3;
/// Tangential speed below which Coulomb friction is linearly regularized [m/s].
pub const FRICTION_VELOCITY_EPSILON: f64 = 1e-3;

/// Geometric primitive the tool tip can touch and the depth camera can see.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Half-space bounded by a plane. `normal` points out of the solid.
    Plane { point: Vector3<f64>, normal: Vector3<f64> },
    /// Infinite circular cylinder. When `concave` the free space is the
    /// inside of the cylinder (a vault or tunnel); otherwise the cylinder is
    /// a solid post.
    Cylinder {
        axis_point: Vector3<f64>,
        axis: Vector3<f64>,
        radius: f64,
        concave: bool,
    },
}

/// Signed penetration of a point into a primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penetration {
    /// Positive inside the solid [m].
    pub depth: f64,
    /// Outward surface normal (pointing into free space).
    pub normal: Vector3<f64>,
}

impl Primitive {
    pub fn plane(point: Vector3<f64>, normal: Vector3<f64>) -> Self {
        Primitive::Plane { point, normal: normal.normalize() }
    }

    pub fn vault(axis_point: Vector3<f64>, axis: Vector3<f64>, radius: f64) -> Self {
        Primitive::Cylinder { axis_point, axis: axis.normalize(), radius, concave: true }
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: &Vector3<f64>| (v.norm() - 1.0).abs() < 1e-9;
        match self {
            Primitive::Plane { normal, .. } if !unit(normal) => {
                Err(Error::InvalidParameter("plane normal must be unit length".into()))
            }
            Primitive::Cylinder { axis, radius, .. } => {
                if !unit(axis) {
                    Err(Error::InvalidParameter("cylinder axis must be unit length".into()))
                } else if !(*radius > 0.0) {
                    Err(Error::InvalidParameter("cylinder radius must be positive".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Penetration depth of `p` and the outward normal at its closest surface point.
    pub fn penetration(&self, p: &Vector3<f64>) -> Penetration {
        match self {
            Primitive::Plane { point, normal } => Penetration { depth: -(p - point).dot(normal), normal: *normal },
            Primitive::Cylinder { axis_point, axis, radius, concave } => {
                let rel = p - axis_point;
                let radial = rel - axis * rel.dot(axis);
                let rho = radial.norm();
                let outward = if rho > 1e-12 {
                    radial / rho
                } else {
                    // On the axis every direction is equally close; pick one
                    // orthogonal to the axis deterministically.
                    axis.cross(&Vector3::x()).try_normalize(1e-6).unwrap_or_else(|| axis.cross(&Vector3::y()).normalize())
                };
                if *concave {
                    Penetration { depth: rho - radius, normal: -outward }
                } else {
                    Penetration { depth: radius - rho, normal: outward }
                }
            }
        }
    }

    /// Smallest ray parameter `t > t_min` at which `origin + t·dir` meets the surface.
    pub fn ray_intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, t_min: f64) -> Option<f64> {
        match self {
            Primitive::Plane { point, normal } => {
                let denom = dir.dot(normal);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (point - origin).dot(normal) / denom;
                (t > t_min).then_some(t)
            }
            Primitive::Cylinder { axis_point, axis, radius, .. } => {
                let o = origin - axis_point;
                let o_perp = o - axis * o.dot(axis);
                let d_perp = dir - axis * dir.dot(axis);
                let a = d_perp.norm_squared();
                if a < 1e-15 {
                    return None;
                }
                let b = 2.0 * o_perp.dot(&d_perp);
                let c = o_perp.norm_squared() - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Numerically stable pair of roots.
                let q = -0.5 * (b + b.signum() * sq);
                let (mut t0, mut t1) = if q != 0.0 { (q / a, c / q) } else { (-b / (2.0 * a), -b / (2.0 * a)) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                [t0, t1].into_iter().find(|t| *t > t_min)
            }
        }
    }
}

/// Contact primitives and the penalty/friction law parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub friction: f64,
}

impl Default for Scene {
    fn default() -> Self {
        Self::empty()
    }
}

impl Scene {
    pub fn empty() -> Self {
        Self {
            primitives: Vec::new(),
            contact_stiffness: DEFAULT_CONTACT_STIFFNESS,
            contact_damping: DEFAULT_CONTACT_DAMPING,
            friction: DEFAULT_FRICTION,
        }
    }

    pub fn with_primitive(mut self, p: Primitive) -> Self {
        self.primitives.push(p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.primitives {
            p.validate()?;
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.contact_stiffness) || !ok(self.contact_damping) || !ok(self.friction) {
            return Err(Error::InvalidParameter("contact stiffness, damping and friction must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Nearest hit over all primitives: `(t, primitive index)`.
    pub fn ray_cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, t_min: f64) -> Option<(f64, usize)> {
        self.primitives
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.ray_intersect(origin, dir, t_min).map(|t| (t, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn plane_penetration_sign() {
        let wall = Primitive::plane(Vector3::new(1.0, 0.0, 0.0), -Vector3::x());
        assert_relative_eq!(wall.penetration(&Vector3::new(0.95, 0.0, 0.0)).depth, -0.05, epsilon = 1e-15);
        assert_relative_eq!(wall.penetration(&Vector3::new(1.01, 3.0, 2.0)).depth, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn vault_penetration_points_inward() {
        let vault = Primitive::vault(Vector3::new(0.0, 0.0, 2.0), Vector3::y(), 2.0);
        let pen = vault.penetration(&Vector3::new(0.0, 5.0, 4.02));
        assert_relative_eq!(pen.depth, 0.02, epsilon = 1e-12);
        assert_relative_eq!(pen.normal, -Vector3::z(), epsilon = 1e-12);
        let post = Primitive::Cylinder { axis_point: Vector3::zeros(), axis: Vector3::z(), radius: 0.5, concave: false };
        assert_relative_eq!(post.penetration(&Vector3::new(0.4, 0.0, 1.0)).depth, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn ray_hits_inside_of_vault() {
        let vault = Primitive::vault(Vector3::new(0.0, 0.0, 2.0), Vector3::y(), 2.0);
        let origin = Vector3::new(0.3, 0.0, 2.5);
        let dir = Vector3::new(0.2, 0.1, 1.0).normalize();
        let t = vault.ray_intersect(&origin, &dir, 0.0).unwrap();
        let hit = origin + dir * t;
        let radial = Vector3::new(hit.x, 0.0, hit.z - 2.0).norm();
        assert_relative_eq!(radial, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_parallel_to_plane_misses() {
        let floor = Primitive::plane(Vector3::zeros(), Vector3::z());
        assert!(floor.ray_intersect(&Vector3::new(0.0, 0.0, 1.0), &Vector3::x(), 0.0).is_none());
        assert!(floor.ray_intersect(&Vector3::new(0.0, 0.0, 1.0), &Vector3::z(), 0.0).is_none());
    }

    #[test]
    fn validate_rejects_bad_normals() {
        let scene = Scene::empty().with_primitive(Primitive::Plane { point: Vector3::zeros(), normal: Vector3::new(0.0, 0.0, 2.0) });
        assert!(scene.validate().is_err());
        let mut scene = Scene::empty();
        scene.friction = -0.1;
        assert!(scene.validate().is_err());
    }
}
