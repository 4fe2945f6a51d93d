//! On-disk JSON artifacts. Every document carries `"v": 1` and every float
//! is written with 17 significant digits so values survive a round trip
//! bit for bit.

use std::fs;
use std::io;
use std::path::Path;

use curvesfm_core::densify::{MirrorFlag, ReconstructedCurve};
use curvesfm_core::perspective::PlanarSceneView;
use curvesfm_core::{
    CurveParams, DeltaBranch, DepthSign, FrameImage, FrameMotion, FrameObservation, FramePose, InPlaneMotion, Line2,
    Method, MotionScript, Scene, SolveReport, Vec2, Vec3,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

pub const VERSION: u32 = 1;

#[derive(Debug)]
pub enum FormatError {
    Io(String, io::Error),
    Parse(String, serde_json::Error),
    Version(String, u32),
    Invalid(String),
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormatError::Io(path, e) => write!(f, "{path}: {e}"),
            FormatError::Parse(path, e) => write!(f, "{path}: {e}"),
            FormatError::Version(path, v) => write!(f, "{path}: unsupported schema version {v}"),
            FormatError::Invalid(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for FormatError {}

impl FormatError {
    pub fn kind(&self) -> &'static str {
        match self {
            FormatError::Io(..) => "io",
            FormatError::Parse(..) => "parse",
            FormatError::Version(..) => "schema-version",
            FormatError::Invalid(_) => "invalid-input",
        }
    }
}

/// Pretty printing with fixed-width scientific floats.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("artifact types always serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    fs::write(path, to_json_string(value)).map_err(|e| FormatError::Io(path.display().to_string(), e))
}

#[derive(Deserialize)]
struct VersionOnly {
    v: u32,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| FormatError::Io(name.clone(), e))?;
    let head: VersionOnly = serde_json::from_str(&text).map_err(|e| FormatError::Parse(name.clone(), e))?;
    if head.v != VERSION {
        return Err(FormatError::Version(name, head.v));
    }
    serde_json::from_str(&text).map_err(|e| FormatError::Parse(name, e))
}

type P2 = [f64; 2];

fn p2(v: Vec2) -> P2 {
    [v.x, v.y]
}

fn v2(p: P2) -> Vec2 {
    Vec2::new(p[0], p[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
}

impl From<CurveParams> for ParamsDoc {
    fn from(p: CurveParams) -> Self {
        Self {
            c: p.c,
            alpha: p.alpha,
            beta: p.beta,
            phi: p.phi,
        }
    }
}

impl From<ParamsDoc> for CurveParams {
    fn from(p: ParamsDoc) -> Self {
        CurveParams::new(p.c, p.alpha, p.beta, p.phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionDoc {
    pub delta: f64,
    pub tau: f64,
    pub inplane_rot: f64,
    pub inplane_shift: P2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDoc {
    pub v: u32,
    pub seed: u64,
    pub params: ParamsDoc,
    pub motion: Vec<MotionDoc>,
    pub samples_per_curve: usize,
}

impl From<&Scene> for SceneDoc {
    fn from(s: &Scene) -> Self {
        Self {
            v: VERSION,
            seed: s.seed,
            params: s.params.into(),
            motion: s
                .motion
                .frames
                .iter()
                .map(|f| MotionDoc {
                    delta: f.delta,
                    tau: f.tau,
                    inplane_rot: f.inplane.rotation,
                    inplane_shift: p2(f.inplane.shift),
                })
                .collect(),
            samples_per_curve: s.samples_per_curve,
        }
    }
}

impl From<&SceneDoc> for Scene {
    fn from(d: &SceneDoc) -> Self {
        Scene {
            seed: d.seed,
            params: d.params.into(),
            motion: MotionScript {
                frames: d
                    .motion
                    .iter()
                    .map(|m| FrameMotion {
                        delta: m.delta,
                        tau: m.tau,
                        inplane: InPlaneMotion {
                            rotation: m.inplane_rot,
                            shift: v2(m.inplane_shift),
                        },
                    })
                    .collect(),
            },
            samples_per_curve: d.samples_per_curve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDoc {
    pub index: usize,
    #[serde(rename = "A")]
    pub a: P2,
    #[serde(rename = "B")]
    pub b: P2,
    #[serde(rename = "tanA_dir")]
    pub tan_a_dir: P2,
    #[serde(rename = "tanB_dir")]
    pub tan_b_dir: P2,
    pub curve: Vec<P2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesDoc {
    pub v: u32,
    pub frames: Vec<FrameDoc>,
}

impl FramesDoc {
    pub fn new(images: &[FrameImage]) -> Self {
        Self {
            v: VERSION,
            frames: images
                .iter()
                .enumerate()
                .map(|(index, img)| FrameDoc {
                    index,
                    a: p2(img.a_proj),
                    b: p2(img.b_proj),
                    tan_a_dir: p2(img.tangent_dir_at_a_proj),
                    tan_b_dir: p2(img.tangent_dir_at_b_proj),
                    curve: img.projected_samples.iter().map(|p| p2(*p)).collect(),
                })
                .collect(),
        }
    }

    pub fn images(&self) -> Vec<FrameImage> {
        self.frames
            .iter()
            .map(|f| FrameImage {
                projected_samples: f.curve.iter().map(|p| v2(*p)).collect(),
                a_proj: v2(f.a),
                b_proj: v2(f.b),
                tangent_dir_at_a_proj: v2(f.tan_a_dir),
                tangent_dir_at_b_proj: v2(f.tan_b_dir),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationDoc {
    pub index: usize,
    pub c_prime: f64,
    pub d_prime: f64,
    pub e_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationsDoc {
    pub v: u32,
    pub observations: Vec<ObservationDoc>,
}

impl ObservationsDoc {
    pub fn new(obs: &[FrameObservation]) -> Self {
        Self {
            v: VERSION,
            observations: obs
                .iter()
                .map(|o| ObservationDoc {
                    index: o.frame_index,
                    c_prime: o.c_prime,
                    d_prime: o.d_prime,
                    e_prime: o.e_prime,
                })
                .collect(),
        }
    }

    pub fn observations(&self) -> Vec<FrameObservation> {
        self.observations
            .iter()
            .map(|o| FrameObservation::from_scalars(o.index, o.c_prime, o.d_prime, o.e_prime))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    pub index: usize,
    pub delta: f64,
    pub tau: f64,
    /// `plus` or `minus` arccos branch.
    pub branch: String,
    /// `front` or `back`, the depth-mirror convention of the pose.
    pub depth: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub v: u32,
    pub method: String,
    pub params: ParamsDoc,
    pub residual_rms: f64,
    pub converged: bool,
    pub per_frame: Vec<PoseDoc>,
}

impl SolutionDoc {
    pub fn new(report: &SolveReport, converged: bool) -> Self {
        Self {
            v: VERSION,
            method: report.method.as_str().to_string(),
            params: report.params.into(),
            residual_rms: report.residual_rms,
            converged,
            per_frame: report
                .per_frame
                .iter()
                .map(|p| PoseDoc {
                    index: p.frame_index,
                    delta: p.delta,
                    tau: p.tau,
                    branch: match p.delta_branch {
                        DeltaBranch::Plus => "plus",
                        DeltaBranch::Minus => "minus",
                    }
                    .into(),
                    depth: match p.depth_sign {
                        DepthSign::Front => "front",
                        DepthSign::Back => "back",
                    }
                    .into(),
                })
                .collect(),
        }
    }

    pub fn method(&self) -> Result<Method, FormatError> {
        self.method
            .parse()
            .map_err(|_| FormatError::Invalid(format!("unknown method {:?}", self.method)))
    }

    pub fn poses(&self) -> Result<Vec<FramePose>, FormatError> {
        self.per_frame
            .iter()
            .map(|p| {
                let delta_branch = match p.branch.as_str() {
                    "plus" => DeltaBranch::Plus,
                    "minus" => DeltaBranch::Minus,
                    other => return Err(FormatError::Invalid(format!("unknown branch {other:?}"))),
                };
                let depth_sign = match p.depth.as_str() {
                    "front" => DepthSign::Front,
                    "back" => DepthSign::Back,
                    other => return Err(FormatError::Invalid(format!("unknown depth sign {other:?}"))),
                };
                Ok(FramePose {
                    frame_index: p.index,
                    delta: p.delta,
                    tau: p.tau,
                    delta_branch,
                    depth_sign,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve3dDoc {
    pub v: u32,
    pub mirror_flag: String,
    pub points: Vec<[f64; 3]>,
}

impl Curve3dDoc {
    pub fn new(curve: &ReconstructedCurve) -> Self {
        Self {
            v: VERSION,
            mirror_flag: curve.mirror_flag.as_str().into(),
            points: curve.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }

    pub fn points(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()
    }

    pub fn mirror_flag(&self) -> Result<MirrorFlag, FormatError> {
        match self.mirror_flag.as_str() {
            "unresolved" => Ok(MirrorFlag::Unresolved),
            "front" => Ok(MirrorFlag::Front),
            "back" => Ok(MirrorFlag::Back),
            other => Err(FormatError::Invalid(format!("unknown mirror flag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDoc {
    pub v: u32,
    #[serde(rename = "A")]
    pub a: P2,
    #[serde(rename = "B")]
    pub b: P2,
    #[serde(rename = "C")]
    pub c: P2,
    /// `[point, direction]`.
    pub tangent_at_a: [P2; 2],
    pub tangent_at_b: [P2; 2],
    pub curve: Vec<P2>,
}

impl ViewDoc {
    pub fn new(view: &PlanarSceneView) -> Self {
        Self {
            v: VERSION,
            a: p2(view.a),
            b: p2(view.b),
            c: p2(view.c),
            tangent_at_a: [p2(view.tangent_at_a.point), p2(view.tangent_at_a.direction)],
            tangent_at_b: [p2(view.tangent_at_b.point), p2(view.tangent_at_b.direction)],
            curve: view.curve.iter().map(|p| p2(*p)).collect(),
        }
    }

    pub fn view(&self) -> curvesfm_core::Result<PlanarSceneView> {
        PlanarSceneView::new(
            v2(self.a),
            v2(self.b),
            v2(self.c),
            Line2::new(v2(self.tangent_at_a[0]), v2(self.tangent_at_a[1]))?,
            Line2::new(v2(self.tangent_at_b[0]), v2(self.tangent_at_b[1]))?,
            self.curve.iter().map(|p| v2(*p)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDoc {
    pub i: usize,
    pub x1: P2,
    pub x2: P2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsDoc {
    pub v: u32,
    pub pairs: Vec<PairDoc>,
}

impl PairsDoc {
    pub fn new(pairs: &[(Vec2, Vec2)]) -> Self {
        Self {
            v: VERSION,
            pairs: pairs
                .iter()
                .enumerate()
                .map(|(i, (x1, x2))| PairDoc {
                    i,
                    x1: p2(*x1),
                    x2: p2(*x2),
                })
                .collect(),
        }
    }
}
