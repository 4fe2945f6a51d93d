//! Rigid motions, orthogonal projection onto the frame plane `z = 0`, and
//! 2D line intersection.

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Cross products of unit directions below this magnitude count as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-9;

/// Infinite 2D line through `point` along unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2 {
    pub point: Vec2,
    pub direction: Vec2,
}

impl Line2 {
    /// Builds a line, normalizing `direction`. Fails on a zero direction.
    pub fn new(point: Vec2, direction: Vec2) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate("line direction is zero".into()));
        }
        Ok(Self {
            point,
            direction: direction / n,
        })
    }

    pub fn through(a: Vec2, b: Vec2) -> Result<Self> {
        Self::new(a, b - a)
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.point + self.direction * t
    }

    /// Signed perpendicular offset of `p` from the line (left is positive).
    pub fn offset(&self, p: Vec2) -> f64 {
        cross2(self.direction, p - self.point)
    }
}

/// Rotation plus translation acting as `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Rotation by `angle` about the line through `axis_point` along `axis_dir`.
    pub fn about_axis(axis_point: Vec3, axis_dir: Vec3, angle: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis_dir), angle).into_inner();
        Self {
            rotation: r,
            translation: axis_point - r * axis_point,
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Rotates a direction; translation does not apply.
    pub fn apply_dir(&self, d: Vec3) -> Vec3 {
        self.rotation * d
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &RigidMotion) -> RigidMotion {
        RigidMotion {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidMotion {
        let rt = self.rotation.transpose();
        RigidMotion {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// True when the rotation is orthonormal with determinant +1 within `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r * r.transpose() - Matrix3::identity()).amax() <= tol && (r.determinant() - 1.0).abs() <= tol
    }
}

/// Rotates `p` by `angle` about the line `(axis_point, axis_dir)`.
///
/// `axis_dir` is expected to be unit length; right-hand rule sets the sense.
pub fn rotate_about_axis(p: Vec3, axis_point: Vec3, axis_dir: Vec3, angle: f64) -> Vec3 {
    if angle == 0.0 {
        return p;
    }
    // Rodrigues' formula, expanded.
    let k = axis_dir;
    let v = p - axis_point;
    let (s, c) = angle.sin_cos();
    let rotated = v * c + k.cross(&v) * s + k * (k.dot(&v) * (1.0 - c));
    axis_point + rotated
}

/// Orthogonal projection onto the frame plane: drops `z`.
pub fn project_orthogonal(p: Vec3) -> Vec2 {
    Vec2::new(p.x, p.y)
}

pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Intersection point of two lines.
pub fn intersect_lines_2d(a: &Line2, b: &Line2) -> Result<Vec2> {
    let (t, _) = intersect_params(a, b)?;
    Ok(a.at(t))
}

/// Line parameters `(t, u)` with `a.at(t) == b.at(u)`.
pub fn intersect_params(a: &Line2, b: &Line2) -> Result<(f64, f64)> {
    let cross = cross2(a.direction, b.direction);
    if cross.abs() < PARALLEL_TOLERANCE {
        return Err(Error::Parallel { cross: cross.abs() });
    }
    let w = b.point - a.point;
    Ok((cross2(w, b.direction) / cross, cross2(w, a.direction) / cross))
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_tau(x: f64) -> f64 {
    let r = x.rem_euclid(std::f64::consts::TAU);
    if r >= std::f64::consts::TAU {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn quarter_turns() {
        let z = Vec3::z();
        let r = rotate_about_axis(Vec3::y(), Vec3::zeros(), z, FRAC_PI_2);
        assert_abs_diff_eq!(r, Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
        let r = rotate_about_axis(Vec3::y(), Vec3::zeros(), Vec3::x(), FRAC_PI_2);
        assert_abs_diff_eq!(r, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let p = Vec3::new(0.3, -2.0, 7.5);
        assert_eq!(rotate_about_axis(p, Vec3::new(1.0, 1.0, 0.0), Vec3::x(), 0.0), p);
    }

    #[test]
    fn motion_matches_free_function() {
        let axis = Vec3::new(1.0, 2.0, -0.5).normalize();
        let point = Vec3::new(0.2, -1.0, 3.0);
        let m = RigidMotion::about_axis(point, axis, 0.7);
        let p = Vec3::new(-0.4, 0.9, 1.1);
        assert_abs_diff_eq!(m.apply(p), rotate_about_axis(p, point, axis, 0.7), epsilon = 1e-14);
        assert!(m.is_proper(1e-12));
        assert_abs_diff_eq!(m.inverse().apply(m.apply(p)), p, epsilon = 1e-14);
    }

    #[test]
    fn projection_drops_z() {
        assert_eq!(project_orthogonal(Vec3::new(1.0, 2.0, 3.0)), Vec2::new(1.0, 2.0));
        assert_eq!(project_orthogonal(Vec3::new(0.0, 0.0, 5.0)), Vec2::zeros());
    }

    #[test]
    fn line_intersections() {
        let xa = Line2::new(Vec2::zeros(), Vec2::x()).unwrap();
        let ya = Line2::new(Vec2::zeros(), Vec2::y()).unwrap();
        assert_abs_diff_eq!(intersect_lines_2d(&xa, &ya).unwrap(), Vec2::zeros());

        let diag = Line2::new(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap();
        let anti = Line2::new(Vec2::new(0.0, 2.0), Vec2::new(1.0, -1.0)).unwrap();
        assert_abs_diff_eq!(
            intersect_lines_2d(&diag, &anti).unwrap(),
            Vec2::new(1.0, 1.0),
            epsilon = 1e-15
        );

        let y1 = Line2::new(Vec2::new(0.0, 1.0), Vec2::x()).unwrap();
        assert!(matches!(intersect_lines_2d(&xa, &y1), Err(Error::Parallel { .. })));
    }

    #[test]
    fn wrapping() {
        assert_abs_diff_eq!(wrap_pi(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_pi(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_tau(-0.5), 2.0 * PI - 0.5, epsilon = 1e-12);
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn unit3() -> impl Strategy<Value = Vec3> {
        vec3()
            .prop_filter("nonzero", |v| v.norm() > 1e-3)
            .prop_map(|v| v.normalize())
    }

    proptest! {
        #[test]
        fn rotation_preserves_distances(p in vec3(), q in vec3(), o in vec3(), k in unit3(), a in -7.0..7.0f64) {
            let (rp, rq) = (rotate_about_axis(p, o, k, a), rotate_about_axis(q, o, k, a));
            prop_assert!(((rp - rq).norm() - (p - q).norm()).abs() < 1e-10);
        }

        #[test]
        fn rotation_preserves_axis_distance(p in vec3(), o in vec3(), k in unit3(), a in -7.0..7.0f64) {
            let dist = |x: Vec3| (x - o - k * k.dot(&(x - o))).norm();
            prop_assert!((dist(rotate_about_axis(p, o, k, a)) - dist(p)).abs() < 1e-12 * (1.0 + dist(p)));
        }

        #[test]
        fn rotations_compose_additively(p in vec3(), o in vec3(), k in unit3(), a in -4.0..4.0f64, b in -4.0..4.0f64) {
            let two = rotate_about_axis(rotate_about_axis(p, o, k, a), o, k, b);
            let one = rotate_about_axis(p, o, k, a + b);
            prop_assert!((two - one).norm() < 1e-10);
        }

        #[test]
        fn projection_ignores_depth_shift(p in vec3(), t in -10.0..10.0f64) {
            prop_assert_eq!(project_orthogonal(p + Vec3::new(0.0, 0.0, t)), project_orthogonal(p));
        }

        #[test]
        fn projection_is_linear(p in vec3(), q in vec3()) {
            let lhs = project_orthogonal(p + q);
            let rhs = project_orthogonal(p) + project_orthogonal(q);
            prop_assert!((lhs - rhs).norm() < 1e-15);
        }

        #[test]
        fn intersection_lies_on_both_lines(px in -3.0..3.0f64, py in -3.0..3.0f64, a in 0.0..6.3f64, b in 0.0..6.3f64) {
            let l1 = Line2::new(Vec2::new(px, py), Vec2::new(a.cos(), a.sin())).unwrap();
            let l2 = Line2::new(Vec2::new(py, -px), Vec2::new(b.cos(), b.sin())).unwrap();
            prop_assume!(cross2(l1.direction, l2.direction).abs() > 1e-3);
            let x = intersect_lines_2d(&l1, &l2).unwrap();
            prop_assert!(l1.offset(x).abs() < 1e-9 && l2.offset(x).abs() < 1e-9);
        }
    }
}
