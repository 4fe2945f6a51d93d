//! Fixed benchmark inputs, built once outside the timed loops.

use curvesfm_core::perspective::fixture::PlanarFixture;
use curvesfm_core::perspective::PlanarSceneView;
use curvesfm_core::solver::LinearizedSystem;
use curvesfm_core::{
    observe_frames, Curve3, CurveParams, DeltaBranch, DepthSign, FrameImage, FrameObservation, FramePose, Scene,
};

pub fn observations(seed: u64, frames: usize) -> Vec<FrameObservation> {
    let scene = Scene::random(seed, frames, 16, true);
    observe_frames(&scene.render().expect("synthetic scenes render")).expect("synthetic frames observe")
}

/// Observations with the frame count the linearized solve is run at.
pub fn linearized_observations(seed: u64) -> Vec<FrameObservation> {
    observations(seed, LinearizedSystem::get().unknowns() + 4)
}

pub struct DensifyCase {
    pub images: Vec<FrameImage>,
    pub poses: Vec<FramePose>,
    pub params: CurveParams,
}

/// Two frames with ground-truth poses.
pub fn densify_case(seed: u64, samples: usize) -> DensifyCase {
    let scene = Scene::random(seed, 2, samples, true);
    let poses = scene
        .motion
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| FramePose {
            frame_index: i,
            delta: f.delta,
            tau: f.tau,
            delta_branch: DeltaBranch::Plus,
            depth_sign: DepthSign::Front,
        })
        .collect();
    DensifyCase {
        images: scene.render().expect("synthetic scenes render"),
        poses,
        params: scene.params,
    }
}

pub fn planar_views(seed: u64) -> (PlanarSceneView, PlanarSceneView) {
    let fx = PlanarFixture::random(seed);
    (fx.view(0).expect("fixture view"), fx.view(1).expect("fixture view"))
}

/// A curve and a motion for the derivation trace.
pub fn trace_case(seed: u64) -> (Curve3, f64, f64) {
    let scene = Scene::random(seed, 1, 64, false);
    let f = scene.motion.frames[0];
    (scene.curve().expect("synthetic curve"), f.delta, f.tau)
}
