//! Reconstruction of rigid 3D curves from orthographic frame sequences in
//! which only the two endpoints and their tangent directions are tracked,
//! plus cross-ratio correspondence between perspective views of planar
//! curves.
//!
//! The pipeline runs [`scene`] (synthetic ground truth) to [`observe`]
//! (per-frame scalars) to [`solver`] (curve invariants and frame poses) to
//! [`densify`] (every other curve point). [`perspective`] is independent.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densify;
pub mod error;
pub mod geometry;
pub mod observe;
pub mod perspective;
pub mod poly;
pub mod scene;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{intersect_lines_2d, project_orthogonal, rotate_about_axis, Line2, RigidMotion, Vec2, Vec3};
pub use observe::{extract_observables, normalize_frame, observe_frames, FrameObservation};
pub use scene::{
    apply_canonical_motion, curve_invariants, derivation_trace, make_test_curve, render_frame, Curve3, CurveParams,
    DerivationTrace, FrameImage, FrameMotion, InPlaneMotion, MotionScript, Scene,
};
pub use solver::{
    aux_terms, linearized_solve, recover_frame_pose, residual_closure, residual_quasi_poly, solve_global,
    tangent_residuals, AuxTerms, DeltaBranch, DepthSign, FramePose, Method, SolveReport, SolverConfig,
};
