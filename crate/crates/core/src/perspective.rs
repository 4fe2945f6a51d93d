//! Point correspondence between two perspective views of a planar curve
//! with three tracked points `A`, `B`, `C`.
//!
//! The tangents at `A` and `B` meet at `D`, and the line `DC` meets the
//! chord `AB` at `E`. A curve point `X` is tied to the point `Y = AB ∩ DX`,
//! and the cross-ratio of `A, E, Y, B` survives any perspective
//! projection. Knowing it in one view fixes `Y` in the other, and the line
//! `DY` then meets the second view's curve at `X`.

use crate::densify::{crossings, next_crossing};
use crate::error::{Error, Result};
use crate::geometry::{intersect_lines_2d, Line2, Vec2};

/// Tolerance for the collinearity of the four cross-ratio points.
const COLLINEAR_TOLERANCE: f64 = 1e-9;
/// Relative length under which two points on the chord coincide.
const COINCIDENT: f64 = 1e-12;

/// One perspective view: the tracked points, the tangents at `A` and `B`,
/// and the curve image as a polyline from `A` to `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSceneView {
    pub a: Vec2,
    pub b: Vec2,
    pub c: Vec2,
    pub tangent_at_a: Line2,
    pub tangent_at_b: Line2,
    pub curve: Vec<Vec2>,
}

impl PlanarSceneView {
    pub fn new(a: Vec2, b: Vec2, c: Vec2, tangent_at_a: Line2, tangent_at_b: Line2, curve: Vec<Vec2>) -> Result<Self> {
        if (b - a).norm() < 1e-12 {
            return Err(Error::Degenerate("A and B coincide".into()));
        }
        if tangent_at_a.offset(a).abs() > 1e-9 || tangent_at_b.offset(b).abs() > 1e-9 {
            return Err(Error::Precondition("tangent lines must pass through A and B".into()));
        }
        if curve.len() < 2 {
            return Err(Error::Range("curve image needs at least two points".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            tangent_at_a,
            tangent_at_b,
            curve,
        })
    }
}

/// `D` = tangent ∩ tangent and `E` = `AB ∩ DC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedPoints {
    pub d: Vec2,
    pub e: Vec2,
}

pub fn construct_de(view: &PlanarSceneView) -> Result<DerivedPoints> {
    let d = intersect_lines_2d(&view.tangent_at_a, &view.tangent_at_b)?;
    let dc = Line2::through(d, view.c)?;
    let e = intersect_lines_2d(&Line2::through(view.a, view.b)?, &dc)?;
    Ok(DerivedPoints { d, e })
}

/// Signed position of `x` along the chord, measured from `a` towards `b`,
/// after checking that `x` lies on it.
fn chord_coordinate(chord: &Line2, x: Vec2) -> Result<f64> {
    let offset = chord.offset(x);
    if offset.abs() > COLLINEAR_TOLERANCE {
        return Err(Error::Collinearity { offset: offset.abs() });
    }
    Ok((x - chord.point).dot(&chord.direction))
}

/// The cross-ratio `(AE/AY) : (BE/BY)` of four collinear points, with
/// lengths signed along `A -> B`.
pub fn double_quotient(a: Vec2, e: Vec2, y: Vec2, b: Vec2) -> Result<f64> {
    let chord = Line2::through(a, b).map_err(|_| Error::Degenerate("A and B coincide".into()))?;
    let len = (b - a).norm();
    let ue = chord_coordinate(&chord, e)?;
    let uy = chord_coordinate(&chord, y)?;
    let (ae, ay, be, by) = (ue, uy, ue - len, uy - len);
    let eps = COINCIDENT * len;
    if ae.abs() <= eps || ay.abs() <= eps || be.abs() <= eps || by.abs() <= eps {
        return Err(Error::Degenerate("a point on the chord coincides with A or B".into()));
    }
    Ok(ae * by / (ay * be))
}

/// `A`, `E`, `B` of one view: the three chord points a cross-ratio needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordPoints {
    pub a: Vec2,
    pub e: Vec2,
    pub b: Vec2,
}

impl ChordPoints {
    pub fn of(view: &PlanarSceneView) -> Result<Self> {
        Ok(Self {
            a: view.a,
            e: construct_de(view)?.e,
            b: view.b,
        })
    }
}

/// Finds `Y''` on the second chord with the same cross-ratio as `Y'` on the
/// first. `Y'` at either endpoint maps to the matching endpoint.
pub fn solve_y_second(view1: &ChordPoints, view2: &ChordPoints, y1: Vec2) -> Result<Vec2> {
    let chord1 = Line2::through(view1.a, view1.b)?;
    let len1 = (view1.b - view1.a).norm();
    let u = chord_coordinate(&chord1, y1)?;
    if u.abs() <= COINCIDENT * len1 {
        return Ok(view2.a);
    }
    if (u - len1).abs() <= COINCIDENT * len1 {
        return Ok(view2.b);
    }
    let k = double_quotient(view1.a, view1.e, y1, view1.b)?;

    let chord2 = Line2::through(view2.a, view2.b)?;
    let len2 = (view2.b - view2.a).norm();
    let e = chord_coordinate(&chord2, view2.e)?;
    // k = e (t - L) / (t (e - L))  solved for t.
    let den = e - k * (e - len2);
    if den.abs() <= COINCIDENT * len2.max(e.abs()) {
        return Err(Error::Degenerate("corresponding point lies at infinity".into()));
    }
    Ok(chord2.at(e * len2 / den))
}

/// Precomputed constructions of a view pair.
struct Correspondence<'a> {
    chord1: Line2,
    d1: Vec2,
    points1: ChordPoints,
    points2: ChordPoints,
    d2: Vec2,
    view2: &'a PlanarSceneView,
}

impl<'a> Correspondence<'a> {
    fn new(view1: &PlanarSceneView, view2: &'a PlanarSceneView) -> Result<Self> {
        let de1 = construct_de(view1)?;
        let de2 = construct_de(view2)?;
        Ok(Self {
            chord1: Line2::through(view1.a, view1.b)?,
            d1: de1.d,
            points1: ChordPoints {
                a: view1.a,
                e: de1.e,
                b: view1.b,
            },
            points2: ChordPoints {
                a: view2.a,
                e: de2.e,
                b: view2.b,
            },
            d2: de2.d,
            view2,
        })
    }

    /// Maps one point, continuing the walk along view 2's curve from arc
    /// position `previous`. Returns the point and its arc position.
    fn map(&self, x1: Vec2, previous: f64) -> Result<(Vec2, f64)> {
        let y1 = intersect_lines_2d(&self.chord1, &Line2::through(self.d1, x1)?)?;
        let y2 = solve_y_second(&self.points1, &self.points2, y1)?;
        let w = y2 - self.d2;
        if w.norm() < 1e-12 {
            return Err(Error::Degenerate("Y'' coincides with D''".into()));
        }
        let hit = next_crossing(&crossings(self.d2, w, &self.view2.curve), previous)?;
        Ok((hit.point, hit.position))
    }
}

/// The view-2 curve point corresponding to `x1` on view 1's curve. With
/// several candidates the one nearest `A''` along the curve wins.
pub fn correspond_point(x1: Vec2, view1: &PlanarSceneView, view2: &PlanarSceneView) -> Result<Vec2> {
    Correspondence::new(view1, view2)?.map(x1, 0.0).map(|(x, _)| x)
}

/// Maps a sequence of view-1 curve points in order, each crossing chosen at
/// or after the previous one along view 2's curve.
pub fn correspond_points(points: &[Vec2], view1: &PlanarSceneView, view2: &PlanarSceneView) -> Result<Vec<Vec2>> {
    let c = Correspondence::new(view1, view2)?;
    let mut previous = 0.0;
    points
        .iter()
        .enumerate()
        .map(|(i, x1)| {
            let (x2, position) = c.map(*x1, previous).map_err(|e| e.at_sample(i))?;
            previous = position;
            Ok(x2)
        })
        .collect()
}

/// `(X', X'')` for every sample of view 1's curve.
pub fn correspond_curve(view1: &PlanarSceneView, view2: &PlanarSceneView) -> Result<Vec<(Vec2, Vec2)>> {
    let mapped = correspond_points(&view1.curve, view1, view2)?;
    Ok(view1.curve.iter().copied().zip(mapped).collect())
}

/// Synthetic planar scenes seen by unit-focal pinhole cameras.
pub mod fixture {
    use nalgebra::{Matrix2x3, Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::PlanarSceneView;
    use crate::error::Result;
    use crate::geometry::{Line2, Vec2, Vec3};

    pub const SAMPLES: usize = 64;
    /// Sample used as the third tracked point.
    pub const C_INDEX: usize = 32;

    /// World-to-camera transform `x_cam = R x + t`, image `(x/z, y/z)`.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct PinholeCamera {
        pub rotation: Rotation3<f64>,
        pub translation: Vec3,
    }

    impl PinholeCamera {
        pub fn to_camera(&self, x: Vec3) -> Vec3 {
            self.rotation * x + self.translation
        }

        pub fn project(&self, x: Vec3) -> Vec2 {
            let p = self.to_camera(x);
            Vec2::new(p.x / p.z, p.y / p.z)
        }

        /// Image direction of a 3D direction leaving `x`.
        pub fn project_dir(&self, x: Vec3, dir: Vec3) -> Vec2 {
            let p = self.to_camera(x);
            let jac = Matrix2x3::new(1.0 / p.z, 0.0, -p.x / (p.z * p.z), 0.0, 1.0 / p.z, -p.y / (p.z * p.z));
            jac * (self.rotation * dir)
        }
    }

    /// A planar cubic Bezier arc placed in 3D.
    #[derive(Debug, Clone, PartialEq)]
    pub struct PlanarCurve {
        pub origin: Vec3,
        pub e1: Vec3,
        pub e2: Vec3,
        /// Control points in plane coordinates.
        pub control: [Vec2; 4],
    }

    impl PlanarCurve {
        pub fn lift(&self, q: Vec2) -> Vec3 {
            self.origin + self.e1 * q.x + self.e2 * q.y
        }

        pub fn lift_dir(&self, q: Vec2) -> Vec3 {
            self.e1 * q.x + self.e2 * q.y
        }

        pub fn point(&self, s: f64) -> Vec2 {
            let [p0, p1, p2, p3] = self.control;
            let r = 1.0 - s;
            p0 * (r * r * r) + p1 * (3.0 * r * r * s) + p2 * (3.0 * r * s * s) + p3 * (s * s * s)
        }

        pub fn derivative(&self, s: f64) -> Vec2 {
            let [p0, p1, p2, p3] = self.control;
            let r = 1.0 - s;
            (p1 - p0) * (3.0 * r * r) + (p2 - p1) * (6.0 * r * s) + (p3 - p2) * (3.0 * s * s)
        }

        pub fn samples(&self) -> Vec<Vec3> {
            (0..SAMPLES)
                .map(|i| self.lift(self.point(i as f64 / (SAMPLES - 1) as f64)))
                .collect()
        }
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct PlanarFixture {
        pub curve: PlanarCurve,
        pub cameras: [PinholeCamera; 2],
    }

    fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    impl PlanarFixture {
        /// A bulging arc on a tilted plane about five units in front of
        /// two cameras that differ by a moderate rotation and shift.
        pub fn random(seed: u64) -> Self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let control = [
                Vec2::new(-1.0, 0.0),
                Vec2::new(rng.random_range(-0.9..-0.3), rng.random_range(0.6..1.2)),
                Vec2::new(rng.random_range(0.3..0.9), rng.random_range(0.6..1.2)),
                Vec2::new(1.0, 0.0),
            ];
            let tilt =
                Rotation3::from_axis_angle(&Unit::new_normalize(random_unit(&mut rng)), rng.random_range(0.2..0.8));
            let curve = PlanarCurve {
                origin: Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 5.0),
                e1: tilt * Vec3::x(),
                e2: tilt * Vec3::y(),
                control,
            };
            let camera = |rng: &mut ChaCha8Rng, spread: f64| {
                let rotation =
                    Rotation3::from_axis_angle(&Unit::new_normalize(random_unit(rng)), rng.random_range(0.0..spread));
                let center = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0) * spread;
                // Orbit about the scene center so it stays in view.
                let target = curve.origin;
                PinholeCamera {
                    rotation,
                    translation: target - center - rotation * target,
                }
            };
            let first = camera(&mut rng, 0.05);
            let second = camera(&mut rng, 0.4);
            Self {
                curve,
                cameras: [first, second],
            }
        }

        pub fn view(&self, k: usize) -> Result<PlanarSceneView> {
            let cam = &self.cameras[k];
            let c = &self.curve;
            let image: Vec<Vec2> = c.samples().iter().map(|x| cam.project(*x)).collect();
            let (a3, b3) = (c.lift(c.point(0.0)), c.lift(c.point(1.0)));
            let tangent = |x: Vec3, s: f64| Line2::new(cam.project(x), cam.project_dir(x, c.lift_dir(c.derivative(s))));
            PlanarSceneView::new(
                image[0],
                image[SAMPLES - 1],
                image[C_INDEX],
                tangent(a3, 0.0)?,
                tangent(b3, 1.0)?,
                image,
            )
        }
    }
}
