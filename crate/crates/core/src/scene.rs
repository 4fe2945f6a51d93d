//! Synthetic rigid curves, the two-rotation frame motion, and orthographic
//! rendering. Everything downstream is checked against this module.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Rotation2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{
    intersect_lines_2d, project_orthogonal, rotate_about_axis, wrap_tau, Line2, RigidMotion, Vec2, Vec3,
};

/// Minimum number of samples in a generated curve.
pub const MIN_SAMPLES: usize = 8;

/// Margin keeping generated angles away from degenerate values.
pub const ANGLE_MARGIN: f64 = 0.05;

const CANONICAL_TOL: f64 = 1e-9;

/// A rigid 3D curve: ordered samples from `A` to `B` plus exact endpoint
/// tangents. Both tangents point in the direction of travel from `A` to `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve3 {
    pub samples: Vec<Vec3>,
    pub tangent_at_a: Vec3,
    pub tangent_at_b: Vec3,
}

impl Curve3 {
    pub fn new(samples: Vec<Vec3>, tangent_at_a: Vec3, tangent_at_b: Vec3) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Degenerate("curve needs at least two samples".into()));
        }
        if samples.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Degenerate("consecutive samples coincide".into()));
        }
        let (na, nb) = (tangent_at_a.norm(), tangent_at_b.norm());
        if !(na > 0.0 && nb > 0.0) {
            return Err(Error::Degenerate("zero endpoint tangent".into()));
        }
        let curve = Self {
            samples,
            tangent_at_a: tangent_at_a / na,
            tangent_at_b: tangent_at_b / nb,
        };
        if curve.a() == curve.b() {
            return Err(Error::Degenerate("endpoints coincide".into()));
        }
        Ok(curve)
    }

    pub fn a(&self) -> Vec3 {
        self.samples[0]
    }

    pub fn b(&self) -> Vec3 {
        *self.samples.last().expect("curve has samples")
    }

    pub fn transformed(&self, m: &RigidMotion) -> Curve3 {
        Curve3 {
            samples: self.samples.iter().map(|p| m.apply(*p)).collect(),
            tangent_at_a: m.apply_dir(self.tangent_at_a),
            tangent_at_b: m.apply_dir(self.tangent_at_b),
        }
    }

    /// `A` at the origin, `B` on the positive x-axis and the tangent at `B`
    /// inside the frame plane.
    pub fn is_canonical(&self) -> bool {
        let (a, b) = (self.a(), self.b());
        a.norm() <= CANONICAL_TOL
            && b.x > 0.0
            && b.y.abs() <= CANONICAL_TOL
            && b.z.abs() <= CANONICAL_TOL
            && self.tangent_at_b.z.abs() <= CANONICAL_TOL
    }
}

/// The four frame-independent quantities of a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    /// Chord length `|AB|`.
    pub c: f64,
    /// Angle between the chord and the tangent at `B`.
    pub alpha: f64,
    /// Angle between the chord and the tangent at `A`.
    pub beta: f64,
    /// Dihedral angle from the chord/tangent-at-B plane to the
    /// chord/tangent-at-A plane, measured about `AB`.
    pub phi: f64,
}

impl CurveParams {
    pub fn new(c: f64, alpha: f64, beta: f64, phi: f64) -> Self {
        Self { c, alpha, beta, phi }
    }

    pub fn validate(&self) -> Result<()> {
        let open_quarter = |x: f64| x > 0.0 && x < FRAC_PI_2;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Range(format!("c = {} must be positive", self.c)));
        }
        if !open_quarter(self.alpha) {
            return Err(Error::Range(format!("alpha = {} outside (0, pi/2)", self.alpha)));
        }
        if !open_quarter(self.beta) {
            return Err(Error::Range(format!("beta = {} outside (0, pi/2)", self.beta)));
        }
        if !(0.0..TAU).contains(&self.phi) {
            return Err(Error::Range(format!("phi = {} outside [0, 2pi)", self.phi)));
        }
        Ok(())
    }

    /// Invariants of the curve reflected through the frame plane. The
    /// reflected curve moved by `(-delta, -tau)` renders exactly like the
    /// original moved by `(delta, tau)`.
    pub fn mirrored(&self) -> Self {
        Self {
            phi: wrap_tau(-self.phi),
            ..*self
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c, self.alpha, self.beta, self.phi]
    }

    /// Forward tangents `(at A, at B)` of the canonical pose.
    pub fn canonical_tangents(&self) -> (Vec3, Vec3) {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let t_b = Vec3::new(ca, -sa, 0.0);
        let t_a = Vec3::new(cb, -sb * cp, -sb * sp);
        (t_a, t_b)
    }
}

/// In-plane rotation and shift applied to a rendered frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InPlaneMotion {
    pub rotation: f64,
    pub shift: Vec2,
}

impl InPlaneMotion {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        Rotation2::new(self.rotation) * p + self.shift
    }

    pub fn apply_dir(&self, d: Vec2) -> Vec2 {
        Rotation2::new(self.rotation) * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMotion {
    pub delta: f64,
    pub tau: f64,
    pub inplane: InPlaneMotion,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionScript {
    pub frames: Vec<FrameMotion>,
}

impl MotionScript {
    /// Random script with angles inside the non-degenerate ranges.
    pub fn random<R: Rng>(rng: &mut R, frames: usize, nuisance: bool) -> Self {
        let frames = (0..frames)
            .map(|_| {
                let delta = rng.random_range(ANGLE_MARGIN..PI - ANGLE_MARGIN);
                let tau = rng.random_range(ANGLE_MARGIN..FRAC_PI_2 - ANGLE_MARGIN);
                let inplane = if nuisance {
                    InPlaneMotion {
                        rotation: rng.random_range(-PI..PI),
                        shift: Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                    }
                } else {
                    InPlaneMotion::default()
                };
                FrameMotion { delta, tau, inplane }
            })
            .collect();
        Self { frames }
    }
}

/// One orthographic frame of the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    pub projected_samples: Vec<Vec2>,
    pub a_proj: Vec2,
    pub b_proj: Vec2,
    pub tangent_dir_at_a_proj: Vec2,
    pub tangent_dir_at_b_proj: Vec2,
}

impl FrameImage {
    pub fn transformed(&self, m: &InPlaneMotion) -> FrameImage {
        FrameImage {
            projected_samples: self.projected_samples.iter().map(|p| m.apply(*p)).collect(),
            a_proj: m.apply(self.a_proj),
            b_proj: m.apply(self.b_proj),
            tangent_dir_at_a_proj: m.apply_dir(self.tangent_dir_at_a_proj),
            tangent_dir_at_b_proj: m.apply_dir(self.tangent_dir_at_b_proj),
        }
    }

    /// Adds independent Gaussian noise of standard deviation `sigma` to every
    /// sample coordinate and to both tangent angles.
    pub fn with_noise<R: Rng>(&self, rng: &mut R, sigma: f64) -> FrameImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
        let samples: Vec<Vec2> = self
            .projected_samples
            .iter()
            .map(|p| p + Vec2::new(normal.sample(rng), normal.sample(rng)))
            .collect();
        let mut turn = |d: Vec2| Rotation2::new(normal.sample(rng)) * d;
        let ta = turn(self.tangent_dir_at_a_proj);
        let tb = turn(self.tangent_dir_at_b_proj);
        FrameImage {
            a_proj: samples[0],
            b_proj: *samples.last().expect("frame has samples"),
            projected_samples: samples,
            tangent_dir_at_a_proj: ta,
            tangent_dir_at_b_proj: tb,
        }
    }
}

/// Cubic Hermite segment from `p0` to `p1` with end derivatives `m0`, `m1`.
fn hermite(p0: Vec3, m0: Vec3, p1: Vec3, m1: Vec3, t: f64) -> Vec3 {
    let t2 = t * t;
    let t3 = t2 * t;
    p0 * (2.0 * t3 - 3.0 * t2 + 1.0) + m0 * (t3 - 2.0 * t2 + t) + p1 * (-2.0 * t3 + 3.0 * t2) + m1 * (t3 - t2)
}

/// Synthesizes a two-piece cubic curve in canonical pose realizing `params`.
pub fn make_test_curve(seed: u64, params: CurveParams) -> Result<Curve3> {
    make_test_curve_with_samples(seed, params, 64)
}

pub fn make_test_curve_with_samples(seed: u64, params: CurveParams, samples: usize) -> Result<Curve3> {
    params.validate()?;
    if samples < MIN_SAMPLES {
        return Err(Error::Range(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = params.c;
    let a = Vec3::zeros();
    let b = Vec3::new(c, 0.0, 0.0);
    let (t_a, t_b) = params.canonical_tangents();

    // The midpoint sits near the average of the two tangent rays so that the
    // arc bulges the way both tangents suggest, with a little random jitter.
    let pull = rng.random_range(0.25..0.4) * c;
    let guide = (a + t_a * pull + b - t_b * pull) * 0.5;
    let jitter = Vec3::new(
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
    ) * c;
    let mid = guide * 0.8 + jitter;
    let mid_dir = (b - t_b * pull - (a + t_a * pull)).normalize();

    let k0 = rng.random_range(0.6..0.9) * c;
    let k1 = rng.random_range(0.6..0.9) * c;
    let km = rng.random_range(0.5..0.8) * c;

    let half = samples / 2;
    let mut pts = Vec::with_capacity(samples);
    for i in 0..samples {
        let s = i as f64 / (samples - 1) as f64;
        let p = if i == 0 {
            a
        } else if i == samples - 1 {
            b
        } else if (i as f64) < half as f64 {
            hermite(a, t_a * k0, mid, mid_dir * km, s * 2.0)
        } else {
            hermite(mid, mid_dir * km, b, t_b * k1, (s - 0.5) * 2.0)
        };
        pts.push(p);
    }
    Curve3::new(pts, t_a, t_b)
}

/// Recovers `(c, alpha, beta, phi)` from a curve in any pose.
pub fn curve_invariants(curve: &Curve3) -> Result<CurveParams> {
    let ab = curve.b() - curve.a();
    let c = ab.norm();
    if c == 0.0 {
        return Err(Error::Degenerate("endpoints coincide".into()));
    }
    let u = ab / c;
    let ta = curve.tangent_at_a.normalize();
    let tb = curve.tangent_at_b.normalize();

    // Tangent lines have no orientation: both are flipped to point back
    // towards A before measuring angles against the chord.
    let backward = |t: Vec3| if t.dot(&u) > 0.0 { -t } else { t };
    let (ta, tb) = (backward(ta), backward(tb));
    let perp = |t: Vec3| t - u * t.dot(&u);
    let (na, nb) = (perp(ta), perp(tb));
    const PARALLEL: f64 = 1e-12;
    if nb.norm() < PARALLEL {
        return Err(Error::Degenerate("tangent at B is parallel to AB".into()));
    }
    if na.norm() < PARALLEL {
        return Err(Error::Degenerate("tangent at A is parallel to AB".into()));
    }
    let alpha = nb.norm().atan2(tb.dot(&u).abs());
    let beta = na.norm().atan2(ta.dot(&u).abs());
    let phi = wrap_tau(nb.cross(&na).dot(&u).atan2(nb.dot(&na)));
    Ok(CurveParams { c, alpha, beta, phi })
}

fn require_canonical(curve: &Curve3) -> Result<()> {
    if curve.is_canonical() {
        Ok(())
    } else {
        Err(Error::Precondition(
            "expected A at origin, B on +x and the tangent at B in the frame plane".into(),
        ))
    }
}

/// The two-rotation frame motion: `delta` about `AB`, then `tau` about the
/// in-plane line through `A` perpendicular to `AB`. Positive `tau` lifts `B`
/// out of the frame plane towards `+z`.
pub fn canonical_motion(delta: f64, tau: f64) -> RigidMotion {
    let first = RigidMotion::about_axis(Vec3::zeros(), Vec3::x(), delta);
    let second = RigidMotion::about_axis(Vec3::zeros(), -Vec3::y(), tau);
    second.compose(&first)
}

pub fn apply_canonical_motion(curve: &Curve3, delta: f64, tau: f64) -> Result<Curve3> {
    require_canonical(curve)?;
    Ok(curve.transformed(&canonical_motion(delta, tau)))
}

/// Projects a posed curve into the frame plane.
pub fn render_frame(curve: &Curve3) -> Result<FrameImage> {
    let dir = |t: Vec3, which: &str| {
        let p = project_orthogonal(t);
        let n = p.norm();
        if n < 1e-12 {
            Err(Error::Degenerate(format!(
                "tangent at {which} is perpendicular to the frame plane"
            )))
        } else {
            Ok(p / n)
        }
    };
    let projected_samples: Vec<Vec2> = curve.samples.iter().map(|p| project_orthogonal(*p)).collect();
    Ok(FrameImage {
        a_proj: projected_samples[0],
        b_proj: *projected_samples.last().expect("curve has samples"),
        tangent_dir_at_a_proj: dir(curve.tangent_at_a, "A")?,
        tangent_dir_at_b_proj: dir(curve.tangent_at_b, "B")?,
        projected_samples,
    })
}

/// Lengths of the auxiliary construction for one frame. Fields named after
/// segments are signed coordinates so the relations hold for every delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivationTrace {
    /// Distance from `A` to `S`, where the tangent at `B` (after the delta
    /// rotation) meets the plane through `A` perpendicular to `AB`.
    pub as_len: f64,
    /// Signed in-plane coordinate of `S'`, the frame-plane foot of `S`.
    pub as_prime: f64,
    /// Signed height of `S` above the frame plane.
    pub ss_prime: f64,
    /// Signed offset of `S''` (projection of `S` after the tau rotation)
    /// from the perpendicular line through `A`.
    pub s_prime_s_second: f64,
    /// Signed coordinate of `D'` on the perpendicular line through `A`.
    pub ad_prime: f64,
    /// Signed distance from `D'` to `S'` along the same line.
    pub d_prime_s_prime: f64,
    /// Projected chord length.
    pub ab_prime: f64,
}

impl DerivationTrace {
    /// Residuals of the seven construction relations in the order
    /// tan, cos delta, sin delta, cos tau, sin tau, split, similar triangles.
    pub fn relation_residuals(&self, c: f64, alpha: f64, delta: f64, tau: f64) -> [f64; 7] {
        [
            self.as_len - c * alpha.tan(),
            self.as_prime - self.as_len * delta.cos(),
            self.ss_prime - self.as_len * delta.sin(),
            self.ab_prime - c * tau.cos(),
            self.s_prime_s_second - self.ss_prime * tau.sin(),
            self.as_prime - (self.ad_prime + self.d_prime_s_prime),
            self.ad_prime * self.s_prime_s_second - self.ab_prime * self.d_prime_s_prime,
        ]
    }

    /// Largest residual relative to the magnitude of the terms involved.
    pub fn max_relative_residual(&self, c: f64, alpha: f64, delta: f64, tau: f64) -> f64 {
        let r = self.relation_residuals(c, alpha, delta, tau);
        let scale = [
            self.as_len.abs() + c * alpha.tan(),
            self.as_prime.abs() + self.as_len,
            self.ss_prime.abs() + self.as_len,
            self.ab_prime.abs() + c,
            self.s_prime_s_second.abs() + self.ss_prime.abs(),
            self.as_prime.abs() + self.ad_prime.abs() + self.d_prime_s_prime.abs(),
            (self.ad_prime * self.s_prime_s_second).abs() + (self.ab_prime * self.d_prime_s_prime).abs(),
        ];
        r.iter()
            .zip(scale)
            .map(|(r, s)| r.abs() / s.max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Builds the construction explicitly in 3D for a canonical curve.
pub fn derivation_trace(curve: &Curve3, delta: f64, tau: f64) -> Result<DerivationTrace> {
    require_canonical(curve)?;
    let b = curve.b();
    let x = Vec3::x();
    let b_dir = rotate_about_axis(curve.tangent_at_b, Vec3::zeros(), x, delta);

    // S: tangent line at B meets the plane x = 0 through A.
    if b_dir.x.abs() < 1e-12 {
        return Err(Error::Degenerate(
            "tangent at B is parallel to the plane through A".into(),
        ));
    }
    let s = b + b_dir * (-b.x / b_dir.x);
    let s_foot = Vec3::new(0.0, s.y, 0.0);

    let l1 = -Vec3::y();
    let b_moved = rotate_about_axis(b, Vec3::zeros(), l1, tau);
    let s_moved = rotate_about_axis(s, Vec3::zeros(), l1, tau);
    let b_img = project_orthogonal(b_moved);
    let s_img = project_orthogonal(s_moved);

    let tangent_img = Line2::through(b_img, s_img)?;
    let perp_a = Line2::new(Vec2::zeros(), Vec2::y())?;
    let d_img = intersect_lines_2d(&tangent_img, &perp_a)?;

    Ok(DerivationTrace {
        as_len: s.norm(),
        as_prime: s_foot.y,
        ss_prime: s.z,
        s_prime_s_second: -s_img.x,
        ad_prime: d_img.y,
        d_prime_s_prime: s_foot.y - d_img.y,
        ab_prime: b_img.norm(),
    })
}

/// A complete synthetic experiment: curve, per-frame motion and settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub seed: u64,
    pub params: CurveParams,
    pub motion: MotionScript,
    pub samples_per_curve: usize,
}

/// Draws parameters in a generic, well-conditioned region: the tangent
/// planes are kept at least ~0.25 rad away from coplanar.
pub fn random_params<R: Rng>(rng: &mut R) -> CurveParams {
    let c = rng.random_range(0.5..2.0);
    let alpha = rng.random_range(0.2..1.3);
    let beta = rng.random_range(0.2..1.3);
    let phi = loop {
        let phi: f64 = rng.random_range(0.0..TAU);
        if phi.sin().abs() >= 0.25 {
            break phi;
        }
    };
    CurveParams { c, alpha, beta, phi }
}

impl Scene {
    pub fn random(seed: u64, frames: usize, samples_per_curve: usize, nuisance: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng);
        let motion = MotionScript::random(&mut rng, frames, nuisance);
        Self {
            seed,
            params,
            motion,
            samples_per_curve,
        }
    }

    pub fn curve(&self) -> Result<Curve3> {
        make_test_curve_with_samples(self.seed, self.params, self.samples_per_curve)
    }

    /// Frame images including in-plane nuisance motion.
    pub fn render(&self) -> Result<Vec<FrameImage>> {
        let curve = self.curve()?;
        self.motion
            .frames
            .iter()
            .map(|f| Ok(render_frame(&apply_canonical_motion(&curve, f.delta, f.tau)?)?.transformed(&f.inplane)))
            .collect()
    }

    /// Rendered frames with observation noise; deterministic in `noise_seed`.
    pub fn render_noisy(&self, sigma: f64, noise_seed: u64) -> Result<Vec<FrameImage>> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        Ok(self
            .render()?
            .iter()
            .map(|img| img.with_noise(&mut rng, sigma))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn sample_params() -> CurveParams {
        CurveParams::new(1.5, 0.6, 0.8, 1.0)
    }

    #[test]
    fn chord_length_by_construction() {
        let curve = make_test_curve(1, CurveParams::new(1.0, FRAC_PI_4, FRAC_PI_4, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!((curve.b() - curve.a()).norm(), 1.0, epsilon = 1e-15);
        assert!(curve.samples.len() >= MIN_SAMPLES);
    }

    #[test]
    fn alpha_zero_rejected() {
        let err = make_test_curve(1, CurveParams::new(1.0, 0.0, 0.5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }

    #[test]
    fn axis_aligned_invariants() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let curve = Curve3::new(
            vec![Vec3::zeros(), Vec3::new(0.5, 0.2, 0.2), Vec3::x()],
            Vec3::new(s, 0.0, s),
            Vec3::new(s, s, 0.0),
        )
        .unwrap();
        let p = curve_invariants(&curve).unwrap();
        assert_abs_diff_eq!(p.c, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.alpha, FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(p.beta, FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(p.phi, FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn tangent_along_chord_is_degenerate() {
        let curve = Curve3::new(
            vec![Vec3::zeros(), Vec3::new(0.5, 0.1, 0.0), Vec3::x()],
            Vec3::y(),
            Vec3::x(),
        )
        .unwrap();
        assert!(matches!(curve_invariants(&curve), Err(Error::Degenerate(_))));
    }

    #[test]
    fn identity_motion() {
        let curve = make_test_curve(3, sample_params()).unwrap();
        let moved = apply_canonical_motion(&curve, 0.0, 0.0).unwrap();
        for (p, q) in curve.samples.iter().zip(&moved.samples) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-15);
        }
    }

    #[test]
    fn non_canonical_curve_rejected() {
        let curve = make_test_curve(3, sample_params()).unwrap();
        let shifted = curve.transformed(&RigidMotion {
            rotation: nalgebra::Matrix3::identity(),
            translation: Vec3::new(0.0, 0.1, 0.0),
        });
        assert!(matches!(
            apply_canonical_motion(&shifted, 0.1, 0.1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn motion_matches_composed_rotations() {
        let curve = make_test_curve(4, sample_params()).unwrap();
        let moved = apply_canonical_motion(&curve, 0.3, 0.5).unwrap();
        for (p, q) in curve.samples.iter().zip(&moved.samples) {
            let first = rotate_about_axis(*p, Vec3::zeros(), Vec3::x(), 0.3);
            let second = rotate_about_axis(first, Vec3::zeros(), Vec3::new(0.0, -1.0, 0.0), 0.5);
            assert_abs_diff_eq!(second, q, epsilon = 1e-14);
        }
        assert!(moved.b().z > 0.0);
    }

    #[test]
    fn planar_curve_renders_its_own_coordinates() {
        let curve = Curve3::new(
            vec![Vec3::zeros(), Vec3::new(0.4, -0.3, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            Vec3::new(1.0, -1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        )
        .unwrap();
        let img = render_frame(&curve).unwrap();
        for (p, q) in curve.samples.iter().zip(&img.projected_samples) {
            assert_eq!(Vec2::new(p.x, p.y), *q);
        }
    }

    #[test]
    fn vertical_tangent_is_degenerate() {
        let curve = Curve3::new(
            vec![Vec3::zeros(), Vec3::new(0.5, 0.0, 0.1), Vec3::x()],
            Vec3::z(),
            Vec3::x(),
        )
        .unwrap();
        assert!(matches!(render_frame(&curve), Err(Error::Degenerate(_))));
    }

    #[test]
    fn trace_special_values() {
        let curve = make_test_curve(5, CurveParams::new(1.0, FRAC_PI_4, 0.5, 1.0)).unwrap();
        let t = derivation_trace(&curve, 0.3, 0.4).unwrap();
        assert_abs_diff_eq!(t.as_len, 1.0, epsilon = 1e-14);
        let t = derivation_trace(&curve, 0.0, 0.4).unwrap();
        assert_abs_diff_eq!(t.as_prime, t.as_len, epsilon = 1e-14);
        assert_abs_diff_eq!(t.ss_prime, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_matches_closed_form() {
        // Independent closed form: S = (0, c tan a cos d, c tan a sin d); the
        // tau rotation sends it to (-z sin t, y, z cos t); D' follows from the
        // line through B' = (c cos t, 0) and S''.
        let (c, a, d, t) = (1.5f64, 0.6f64, 0.4f64, 0.7f64);
        let curve = make_test_curve(6, CurveParams::new(c, a, 0.8, 1.0)).unwrap();
        let tr = derivation_trace(&curve, d, t).unwrap();
        let (sy, sz) = (c * a.tan() * d.cos(), c * a.tan() * d.sin());
        let s2 = Vec2::new(-sz * t.sin(), sy);
        let b1 = Vec2::new(c * t.cos(), 0.0);
        let dy = b1.y + (s2.y - b1.y) * (0.0 - b1.x) / (s2.x - b1.x);
        assert_abs_diff_eq!(tr.as_len, c * a.tan(), epsilon = 1e-13);
        assert_abs_diff_eq!(tr.as_prime, sy, epsilon = 1e-13);
        assert_abs_diff_eq!(tr.ss_prime, sz, epsilon = 1e-13);
        assert_abs_diff_eq!(tr.s_prime_s_second, sz * t.sin(), epsilon = 1e-13);
        assert_abs_diff_eq!(tr.ad_prime, dy, epsilon = 1e-13);
        assert_abs_diff_eq!(tr.ab_prime, c * t.cos(), epsilon = 1e-13);
    }

    #[test]
    fn scene_is_deterministic() {
        let a = Scene::random(9, 5, 32, true).render().unwrap();
        let b = Scene::random(9, 5, 32, true).render().unwrap();
        assert_eq!(a, b);
    }

    fn params() -> impl Strategy<Value = CurveParams> {
        (0.5..2.0f64, 0.1..1.45f64, 0.1..1.45f64, 0.0..TAU).prop_map(|(c, a, b, p)| CurveParams::new(c, a, b, p))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn trace_relations_hold(p in params(), seed in 0u64..1000, d in -PI..PI, t in 0.01..FRAC_PI_2 - 0.01) {
            let curve = make_test_curve(seed, p).unwrap();
            let tr = derivation_trace(&curve, d, t).unwrap();
            prop_assert!(tr.max_relative_residual(p.c, p.alpha, d, t) < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn invariants_round_trip(p in params(), seed in 0u64..1000) {
            let curve = make_test_curve(seed, p).unwrap();
            let q = curve_invariants(&curve).unwrap();
            prop_assert!((q.c - p.c).abs() < 1e-9);
            prop_assert!((q.alpha - p.alpha).abs() < 1e-9);
            prop_assert!((q.beta - p.beta).abs() < 1e-9);
            prop_assert!(crate::geometry::wrap_pi(q.phi - p.phi).abs() < 1e-9);
        }

        #[test]
        fn invariants_survive_motion(p in params(), seed in 0u64..100, d in -PI..PI, t in 0.0..FRAC_PI_2) {
            let curve = make_test_curve(seed, p).unwrap();
            let before = curve_invariants(&curve).unwrap();
            let after = curve_invariants(&apply_canonical_motion(&curve, d, t).unwrap()).unwrap();
            prop_assert!((before.c - after.c).abs() < 1e-10);
            prop_assert!((before.alpha - after.alpha).abs() < 1e-10);
            prop_assert!((before.beta - after.beta).abs() < 1e-10);
            prop_assert!(crate::geometry::wrap_pi(before.phi - after.phi).abs() < 1e-10);
        }

        #[test]
        fn projected_chord_shrinks_by_cos_tau(p in params(), d in -PI..PI, t in 0.0..FRAC_PI_2) {
            let curve = make_test_curve(1, p).unwrap();
            let img = render_frame(&apply_canonical_motion(&curve, d, t).unwrap()).unwrap();
            prop_assert!(((img.b_proj - img.a_proj).norm() - p.c * t.cos()).abs() < 1e-10);
        }

        #[test]
        fn generated_curves_are_not_planar(p in params(), seed in 0u64..100) {
            prop_assume!(p.phi.sin().abs() > 1e-3);
            let curve = make_test_curve(seed, p).unwrap();
            let normal = curve.b().cross(&curve.tangent_at_b).normalize();
            let off = curve.samples.iter().map(|q| q.dot(&normal).abs()).fold(0.0, f64::max);
            prop_assert!(off > 1e-9);
        }
    }
}
