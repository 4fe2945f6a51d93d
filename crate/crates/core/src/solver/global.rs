//! Multi-start damped least squares on the closure residual.

use std::f64::consts::{FRAC_PI_2, LN_2, TAU};

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rayon::prelude::*;

use super::{closure_rms, closure_with_excess, report_poses, validate_observations, Method, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::wrap_tau;
use crate::observe::FrameObservation;
use crate::scene::CurveParams;

const LAMBDA0: f64 = 1e-3;
const LAMBDA_DOWN: f64 = 0.5;
const LAMBDA_UP: f64 = 4.0;
const LAMBDA_MAX: f64 = 1e20;
const FD_STEP: f64 = 1e-7;
/// Residual charged for parameters where a frame cannot be evaluated.
const INVALID_RESIDUAL: f64 = 10.0;
/// Grid points used to bracket the minima of a frame's profiled cost.
const PROFILE_SCAN: usize = 16;
/// Logistic offsets of the extra alpha and beta starts in the last stage.
const WIDE_ANGLE_STARTS: [f64; 3] = [-1.5, 0.0, 1.5];
/// Extra depth of the chord-length starts in the last stage.
const WIDE_C_EXTRA: usize = 4;

/// Unconstrained coordinates: `c = c_min (1 + e^z)`, `alpha` and `beta` are
/// logistic images in `(0, pi/2)`, `phi` is free.
#[derive(Clone, Copy)]
struct Chart {
    c_min: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Chart {
    fn params(&self, x: &Vector4<f64>) -> CurveParams {
        CurveParams {
            c: self.c_min * (1.0 + x[0].exp()),
            alpha: FRAC_PI_2 * logistic(x[1]),
            beta: FRAC_PI_2 * logistic(x[2]),
            phi: x[3],
        }
    }
}

/// What the damped least squares drives to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Objective {
    /// The per-frame closure mismatch. Cheap, but kinked wherever an arccos
    /// argument reaches +-1.
    Closure,
    /// Both tangent constraints at the delta that best satisfies them.
    /// Smooth through the arccos folds and free of branch choices.
    Profiled,
}

fn closure_residuals(obs: &[FrameObservation], p: &CurveParams) -> DVector<f64> {
    let mut r = DVector::zeros(2 * obs.len());
    for (i, o) in obs.iter().enumerate() {
        let (angle, excess) = closure_with_excess(o, p).unwrap_or((INVALID_RESIDUAL, 0.0));
        r[2 * i] = angle;
        r[2 * i + 1] = excess;
    }
    r
}

/// Residuals of `(a1 sin u + b1 cos u + m1, a2 sin u + b2 cos u + m2)` at the
/// global minimizer of their squared norm over the circle.
fn profiled_pair(a1: f64, b1: f64, m1: f64, a2: f64, b2: f64, m2: f64) -> (f64, f64) {
    let eval = |u: f64| {
        let (s, c) = u.sin_cos();
        (a1 * s + b1 * c + m1, a2 * s + b2 * c + m2)
    };
    let cost = |u: f64| {
        let (x, y) = eval(u);
        x * x + y * y
    };
    let step = TAU / PROFILE_SCAN as f64;
    let scan: Vec<f64> = (0..PROFILE_SCAN).map(|k| cost(k as f64 * step)).collect();
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..PROFILE_SCAN {
        let prev = scan[(k + PROFILE_SCAN - 1) % PROFILE_SCAN];
        let next = scan[(k + 1) % PROFILE_SCAN];
        if scan[k] > prev || scan[k] > next {
            continue;
        }
        // Safeguarded Newton from the bracketing grid point.
        let mut u = k as f64 * step;
        for _ in 0..30 {
            let (s, c) = u.sin_cos();
            let (x, y) = (a1 * s + b1 * c + m1, a2 * s + b2 * c + m2);
            let (dx, dy) = (a1 * c - b1 * s, a2 * c - b2 * s);
            let g = x * dx + y * dy;
            let h = dx * dx + dy * dy - x * (x - m1) - y * (y - m2);
            let du = if h > 0.0 { -g / h } else { -g.signum() * 0.05 };
            let du = du.clamp(-0.2, 0.2);
            u += du;
            if du.abs() < 1e-15 {
                break;
            }
        }
        let v = cost(u);
        if v < best.0 {
            best = (v, u);
        }
    }
    eval(best.1)
}

fn profiled_residuals(obs: &[FrameObservation], p: &CurveParams) -> DVector<f64> {
    // Tangent constraints divided by c c' tan(angle), so every term is
    // bounded: d' sigma sin u - c' cos u + d' c' cot(alpha) / c, and the
    // same for the tangent at A with u + phi.
    let (k1, k2) = (1.0 / (p.c * p.alpha.tan()), 1.0 / (p.c * p.beta.tan()));
    let (sp, cp) = p.phi.sin_cos();
    let mut r = DVector::zeros(2 * obs.len());
    for (i, o) in obs.iter().enumerate() {
        let sigma = (1.0 - (o.c_prime / p.c).powi(2)).max(0.0).sqrt();
        let ds = o.d_prime * sigma;
        let es = o.e_prime * sigma;
        let (x, y) = profiled_pair(
            ds,
            -o.c_prime,
            o.d_prime * o.c_prime * k1,
            es * cp + o.c_prime * sp,
            es * sp - o.c_prime * cp,
            o.e_prime * o.c_prime * k2,
        );
        r[2 * i] = x / o.c_prime;
        r[2 * i + 1] = y / o.c_prime;
    }
    r
}

struct StartResult {
    params: CurveParams,
    rms: f64,
    iterations: usize,
}

fn run_start(
    obs: &[FrameObservation],
    chart: Chart,
    objective: Objective,
    x0: Vector4<f64>,
    max_iter: usize,
) -> StartResult {
    let eval = |x: &Vector4<f64>| {
        let p = chart.params(x);
        match objective {
            Objective::Closure => closure_residuals(obs, &p),
            Objective::Profiled => profiled_residuals(obs, &p),
        }
    };
    let mut x = x0;
    let mut r = eval(&x);
    let mut cost = r.norm_squared();
    let mut lambda = LAMBDA0;
    let mut iterations = 0;

    'outer: while iterations < max_iter {
        if cost < 1e-30 {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), 4);
        for k in 0..4 {
            let h = FD_STEP * x[k].abs().max(1.0);
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            jac.set_column(k, &((eval(&xp) - eval(&xm)) / (2.0 * h)));
        }
        let jtj: Matrix4<f64> = (jac.transpose() * &jac).fixed_view::<4, 4>(0, 0).into_owned();
        let jtr: Vector4<f64> = (jac.transpose() * &r).fixed_rows::<4>(0).into_owned();

        loop {
            iterations += 1;
            let damped = jtj + Matrix4::identity() * lambda;
            if let Some(step) = damped.cholesky().map(|ch| -ch.solve(&jtr)) {
                let xn = x + step;
                let rn = eval(&xn);
                let cn = rn.norm_squared();
                if cn < cost {
                    let small = step.norm() <= 1e-15 * (1.0 + x.norm());
                    x = xn;
                    r = rn;
                    cost = cn;
                    lambda *= LAMBDA_DOWN;
                    if small {
                        break 'outer;
                    }
                    break;
                }
            }
            lambda *= LAMBDA_UP;
            if lambda > LAMBDA_MAX || iterations >= max_iter {
                break 'outer;
            }
        }
    }

    let mut params = chart.params(&x);
    params.phi = wrap_tau(params.phi);
    StartResult {
        rms: closure_rms(obs, &params),
        params,
        iterations,
    }
}

fn grid(phi_starts: usize, c_depths: usize, angle_offsets: &[f64]) -> Vec<Vector4<f64>> {
    let mut out = Vec::new();
    for k in 0..phi_starts {
        let phi = k as f64 * TAU / phi_starts as f64;
        for j in 1..=c_depths {
            for &a in angle_offsets {
                for &b in angle_offsets {
                    out.push(Vector4::new(-(j as f64) * LN_2, a, b, phi));
                }
            }
        }
    }
    out
}

/// Estimates `(c, alpha, beta, phi)` from four or more frames.
///
/// Damped least squares runs from a grid of starts in up to three stages,
/// stopping after the first stage whose best closure residual meets the
/// tolerance:
///
/// 1. the closure residual from `phi_starts x c_starts` starts with
///    `alpha = beta = pi/4`;
/// 2. the same starts on the profiled tangent residual;
/// 3. the profiled residual from a wider grid that also varies `alpha`,
///    `beta` and reaches chord lengths closer to the largest `c'`.
///
/// The start with the smallest closure residual wins, ties going to the
/// earlier start, so running starts in parallel gives the same answer as
/// running them in order.
pub fn solve_global(observations: &[FrameObservation], config: &SolverConfig) -> Result<SolveReport> {
    validate_observations(observations)?;
    let c_max = observations.iter().map(|o| o.c_prime).fold(0.0, f64::max);
    let chart = Chart { c_min: c_max };
    let tol = config.effective_tol();

    let phi_starts = config.phi_starts.max(1);
    let c_starts = config.c_starts.max(1);
    let narrow = grid(phi_starts, c_starts, &[0.0]);
    let stages = [
        (Objective::Closure, narrow.clone()),
        (Objective::Profiled, narrow),
        (
            Objective::Profiled,
            grid(phi_starts, c_starts + WIDE_C_EXTRA, &WIDE_ANGLE_STARTS),
        ),
    ];

    let mut best: Option<(usize, StartResult)> = None;
    let mut offset = 0;
    for (objective, starts) in stages {
        let run = |x0: &Vector4<f64>| run_start(observations, chart, objective, *x0, config.max_iter);
        let results: Vec<StartResult> = if config.parallel {
            starts.par_iter().map(run).collect()
        } else {
            starts.iter().map(run).collect()
        };
        for (i, r) in results.into_iter().enumerate() {
            if best.as_ref().is_none_or(|(_, b)| r.rms < b.rms) {
                best = Some((offset + i, r));
            }
        }
        offset += starts.len();
        if best.as_ref().is_some_and(|(_, b)| b.rms <= tol) {
            break;
        }
    }
    let (best_index, best) = best.expect("at least one start");

    let report = SolveReport {
        params: best.params,
        per_frame: report_poses(observations, &best.params),
        residual_rms: best.rms,
        iterations: best.iterations,
        method: Method::Nonlinear,
        start_index: Some(best_index),
        diagnostics: None,
    };
    if !(best.rms <= tol) {
        return Err(Error::NoConvergence { best: Box::new(report) });
    }
    Ok(report)
}
