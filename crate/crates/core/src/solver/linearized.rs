//! Linear solve by monomial substitution.
//!
//! Each frame's two tangent constraints are linear in `(cos delta, sin delta)`.
//! Solving them by Cramer's rule and imposing `cos^2 + sin^2 = 1` removes
//! delta. After clearing `sin tau` (by separating its odd part and squaring)
//! and using `sin^2 phi = 1 - cos^2 phi`, what remains is one polynomial per
//! frame in the observables `(c', d', e')` and the unknowns
//!
//! `v = 1/c^2`, `k1 = 1/(c tan alpha)`, `k2 = 1/(c tan beta)`, `C = cos phi`.
//!
//! Every monomial in the unknowns becomes a fresh linear unknown. Several of
//! their observable coefficients are linearly dependent, so dependent
//! monomials are merged into combined unknowns by exact elimination. The
//! combined unknowns of the true parameters span the one-dimensional null
//! space of the stacked frame rows; the parameters are read back from fixed
//! ratios of that null vector.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{closure_rms, report_poses, validate_observations, Method, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::wrap_tau;
use crate::observe::FrameObservation;
use crate::poly::{rational, Eliminator, Poly, Reduction};
use crate::scene::CurveParams;

const CP: usize = 0;
const D: usize = 1;
const E: usize = 2;
const V: usize = 3;
const K1: usize = 4;
const K2: usize = 5;
const C: usize = 6;
const S: usize = 7;
const SIGMA: usize = 8;

/// Null-space gap below which the system counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

const EQUILIBRATION_ROUNDS: usize = 10;

/// Exponents of `(v, k1, k2, C)` in one raw monomial.
pub type UnknownMonomial = [u8; 4];

/// Conditioning of one linearized solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDiagnostics {
    pub frames: usize,
    /// Combined linear unknowns after merging dependent monomials.
    pub unknowns: usize,
    /// Distinct monomials in the unknowns before merging.
    pub raw_monomials: usize,
    /// Second smallest over largest singular value of the equilibrated
    /// system; small values mean a second null direction.
    pub gap_ratio: f64,
    /// Smallest over largest singular value; zero for exact data.
    pub null_ratio: f64,
}

/// The expanded per-frame polynomial and its merged unknowns.
#[derive(Debug)]
pub struct LinearizedSystem {
    raw: Vec<UnknownMonomial>,
    /// Observable coefficient polynomial of each combined unknown.
    coefficients: Vec<Vec<([i32; 3], f64)>>,
    /// `mix[i][j]`: weight of raw monomial `i` inside combined unknown `j`.
    mix: Vec<Vec<BigRational>>,
    /// Raw monomial that became each combined unknown.
    representative: Vec<usize>,
    functionals: Functionals,
}

#[derive(Debug)]
struct Functionals {
    one: Vec<f64>,
    cos2: Vec<f64>,
    w_squared: Vec<f64>,
    g_cos2: Vec<f64>,
    g_v: Vec<f64>,
    g_k_diff: Vec<f64>,
}

/// The closure constraint of one frame as a polynomial in all variables.
fn frame_constraint() -> Poly {
    let v = |i| Poly::var(i);
    let (cp, d, e) = (v(CP), v(D), v(E));
    let (k1, k2, c, s, sg) = (v(K1), v(K2), v(C), v(S), v(SIGMA));
    let m = |a: &Poly, b: &Poly| a * b;
    let p = |a: &Poly, b: &Poly| a + b;

    // Tangent constraints as a 2x2 system in (cos delta, sin delta), scaled
    // by 1/(c tan): rows [-c', d' sigma] and [e' sigma S - c' C, e' sigma C + c' S],
    // right-hand side [-d' c' k1, -e' c' k2].
    let es = m(&e, &sg);
    let ds = m(&d, &sg);
    let a21 = &m(&es, &s) - &m(&cp, &c);
    let a22 = p(&m(&es, &c), &m(&cp, &s));
    let det = &m(&m(&cp, &a22), &Poly::int(-1)) - &m(&ds, &a21);
    let b1 = -&m(&m(&d, &cp), &k1);
    let b2 = -&m(&m(&e, &cp), &k2);
    let num_cos = &m(&b1, &a22) - &m(&ds, &b2);
    let num_sin = &m(&m(&cp, &b2), &Poly::int(-1)) - &m(&a21, &b1);
    let f = &(&m(&num_cos, &num_cos) + &m(&num_sin, &num_sin)) - &m(&det, &det);

    let one = Poly::int(1);
    let sigma2 = &one - &m(&m(&cp, &cp), &v(V));
    let sin2 = &one - &m(&c, &c);
    let f = f.reduce_square(SIGMA, &sigma2).reduce_square(S, &sin2);
    let (even, odd) = f.split_linear(SIGMA);
    let squared = &m(&even, &even) - &m(&sigma2, &m(&odd, &odd));
    squared.reduce_square(S, &sin2)
}

impl LinearizedSystem {
    /// The system, derived once per process.
    pub fn get() -> &'static LinearizedSystem {
        static SYSTEM: OnceLock<LinearizedSystem> = OnceLock::new();
        SYSTEM.get_or_init(Self::derive)
    }

    fn derive() -> LinearizedSystem {
        let poly = frame_constraint();
        assert!(
            poly.terms().all(|(e, _)| e[S] == 0 && e[SIGMA] == 0),
            "sin phi and sin tau must be eliminated"
        );
        let groups = poly.group_by(&[V, K1, K2, C]);
        // Highest powers of v first, then k1, k2, C.
        let ordered: Vec<(UnknownMonomial, Poly)> = groups
            .into_iter()
            .rev()
            .map(|(k, p)| ([k[0], k[1], k[2], k[3]], p))
            .collect();

        let obs_monos: BTreeSet<[u8; 3]> = ordered
            .iter()
            .flat_map(|(_, p)| p.terms().map(|(e, _)| [e[CP], e[D], e[E]]))
            .collect();
        let column: BTreeMap<[u8; 3], usize> = obs_monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();

        let mut elim = Eliminator::new(obs_monos.len());
        let mut coefficients = Vec::new();
        let mut representative = Vec::new();
        let mut rows: Vec<Vec<BigRational>> = Vec::new();
        for (i, (_, p)) in ordered.iter().enumerate() {
            let mut row = vec![BigRational::zero(); obs_monos.len()];
            for (e, c) in p.terms() {
                row[column[&[e[CP], e[D], e[E]]]] = c.clone();
            }
            match elim.push(&row) {
                Reduction::NewBasis(j) => {
                    let mut r = vec![BigRational::zero(); j + 1];
                    r[j] = rational(1);
                    rows.push(r);
                    representative.push(i);
                    coefficients.push(
                        p.terms()
                            .map(|(e, c)| {
                                (
                                    [i32::from(e[CP]), i32::from(e[D]), i32::from(e[E])],
                                    c.to_f64().unwrap_or(f64::NAN),
                                )
                            })
                            .collect(),
                    );
                }
                Reduction::Combination(combo) => rows.push(combo),
            }
        }
        let unknowns = elim.basis_count();
        for r in &mut rows {
            r.resize(unknowns, BigRational::zero());
        }

        let raw: Vec<UnknownMonomial> = ordered.iter().map(|(k, _)| *k).collect();
        let mut sys = LinearizedSystem {
            raw,
            coefficients,
            mix: rows,
            representative,
            functionals: Functionals {
                one: vec![],
                cos2: vec![],
                w_squared: vec![],
                g_cos2: vec![],
                g_v: vec![],
                g_k_diff: vec![],
            },
        };
        let need = |sys: &LinearizedSystem, combo: &[(UnknownMonomial, i64)]| {
            sys.functional(combo)
                .expect("recovery functional must be expressible in the combined unknowns")
        };
        sys.functionals = Functionals {
            one: need(&sys, &[([0, 0, 0, 0], 1)]),
            cos2: need(&sys, &[([0, 0, 0, 2], 1)]),
            w_squared: need(&sys, &[([2, 0, 0, 4], 1), ([1, 0, 2, 2], 2), ([0, 0, 4, 0], 1)]),
            g_cos2: need(&sys, &[([1, 0, 0, 2], 1), ([0, 0, 2, 2], 2), ([0, 0, 2, 0], -1)]),
            g_v: need(&sys, &[([1, 0, 0, 0], 1), ([0, 1, 1, 1], 1)]),
            g_k_diff: need(&sys, &[([0, 2, 0, 0], 1), ([0, 0, 2, 0], -1)]),
        };
        sys
    }

    pub fn unknowns(&self) -> usize {
        self.coefficients.len()
    }

    pub fn raw_monomials(&self) -> usize {
        self.raw.len()
    }

    /// Frames needed by [`linearized_solve`].
    pub fn min_frames(&self) -> usize {
        self.unknowns()
    }

    /// Weights `a` with `sum_j a_j G_j` equal to the given combination of raw
    /// monomials for every parameter value, or `None` when the combination
    /// is not determined by the combined unknowns.
    pub fn functional(&self, combo: &[(UnknownMonomial, i64)]) -> Option<Vec<f64>> {
        let mut target = vec![BigRational::zero(); self.raw.len()];
        for (m, k) in combo {
            let i = self.raw.iter().position(|r| r == m)?;
            target[i] += rational(*k);
        }
        let a: Vec<BigRational> = self.representative.iter().map(|&i| target[i].clone()).collect();
        for (i, row) in self.mix.iter().enumerate() {
            let mut s = BigRational::zero();
            for (w, x) in row.iter().zip(&a) {
                if !w.is_zero() && !x.is_zero() {
                    s += w * x;
                }
            }
            if s != target[i] {
                return None;
            }
        }
        Some(a.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Observable coefficients of the combined unknowns for one frame.
    pub fn frame_row(&self, c_prime: f64, d_prime: f64, e_prime: f64) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(e, k)| k * c_prime.powi(e[0]) * d_prime.powi(e[1]) * e_prime.powi(e[2]))
                    .sum()
            })
            .collect()
    }

    /// Values of the combined unknowns at given parameters.
    pub fn combined_unknowns(&self, params: &CurveParams) -> Vec<f64> {
        let x = [
            params.c.powi(-2),
            1.0 / (params.c * params.alpha.tan()),
            1.0 / (params.c * params.beta.tan()),
            params.phi.cos(),
        ];
        let raw_vals: Vec<f64> = self
            .raw
            .iter()
            .map(|m| m.iter().zip(x).map(|(&k, v)| v.powi(i32::from(k))).product())
            .collect();
        (0..self.unknowns())
            .map(|j| {
                self.mix
                    .iter()
                    .zip(&raw_vals)
                    .map(|(row, v)| row[j].to_f64().unwrap_or(f64::NAN) * v)
                    .sum()
            })
            .collect()
    }

    /// Whether every unknown appears in some monomial.
    pub fn uses_all_variables(&self) -> bool {
        (0..4).all(|k| self.raw.iter().any(|m| m[k] > 0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameters from the null vector, one candidate per sign of `sin phi`.
fn read_back(sys: &LinearizedSystem, g: &[f64], scale: f64) -> Result<[CurveParams; 2]> {
    let f = &sys.functionals;
    let one = dot(&f.one, g);
    if one.abs() < f64::MIN_POSITIVE {
        return Err(Error::Degenerate("null vector has no constant component".into()));
    }
    let val = |w: &[f64]| dot(w, g) / one;
    let cos2 = val(&f.cos2).clamp(0.0, 1.0);
    let sin2 = 1.0 - cos2;
    if sin2 < 1e-12 {
        return Err(Error::Coplanar);
    }
    // w = v cos^2 + k2^2; the cos^2-weighted unknown is w - 2 sin^2 k2^2.
    let w = val(&f.w_squared).max(0.0).sqrt();
    let k2_sq = (w - val(&f.g_cos2)) / (2.0 * sin2);
    let k1_sq = k2_sq + val(&f.g_k_diff);
    if !(k1_sq > 0.0 && k2_sq > 0.0) {
        return Err(Error::Degenerate("recovered tangent terms are not positive".into()));
    }
    let (k1, k2) = (k1_sq.sqrt(), k2_sq.sqrt());
    // v + k1 k2 cos(phi) fixes the sign of cos(phi) against w.
    let g_v = val(&f.g_v);
    let (v, cos) = [1.0, -1.0]
        .iter()
        .map(|s| {
            let cos = s * cos2.sqrt();
            (g_v - k1 * k2 * cos, cos)
        })
        .min_by(|a, b| {
            let err = |(v, c): &(f64, f64)| (v * c * c + k2_sq - w).abs();
            err(a).total_cmp(&err(b))
        })
        .expect("two candidates");
    if !(v > 0.0) {
        return Err(Error::Degenerate("recovered 1/c^2 is not positive".into()));
    }
    let c = 1.0 / v.sqrt();
    let alpha = 1f64.atan2(c * k1);
    let beta = 1f64.atan2(c * k2);
    let sin = sin2.sqrt();
    let make = |s: f64| CurveParams {
        c: c * scale,
        alpha,
        beta,
        phi: wrap_tau((s * sin).atan2(cos)),
    };
    Ok([make(1.0), make(-1.0)])
}

/// Estimates the invariants by a single linear null-space computation.
///
/// Needs at least as many frames as combined unknowns
/// ([`LinearizedSystem::min_frames`]). Motion without enough variety (for
/// example a constant tau) leaves a second null direction and is reported as
/// [`Error::RankDeficient`].
pub fn linearized_solve(observations: &[FrameObservation], _config: &SolverConfig) -> Result<SolveReport> {
    validate_observations(observations)?;
    let sys = LinearizedSystem::get();
    let n = sys.unknowns();
    if observations.len() < sys.min_frames() {
        return Err(Error::Underdetermined {
            frames: observations.len(),
            unknowns: n,
        });
    }

    let scale = observations.iter().map(|o| o.c_prime).fold(0.0, f64::max);
    let mut a = DMatrix::from_fn(observations.len(), n, |_, _| 0.0);
    for (i, o) in observations.iter().enumerate() {
        let row = sys.frame_row(o.c_prime / scale, o.d_prime / scale, o.e_prime / scale);
        for (j, x) in row.into_iter().enumerate() {
            a[(i, j)] = x;
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite coefficient in the linear system".into()));
    }

    // Alternate column and row normalization so no single frame or monomial
    // dominates the singular values.
    let mut col_scale = vec![1.0; n];
    for _ in 0..EQUILIBRATION_ROUNDS {
        for (j, s) in col_scale.iter_mut().enumerate() {
            let norm = a.column(j).norm();
            if norm > 0.0 {
                a.column_mut(j).unscale_mut(norm);
                *s *= norm;
            }
        }
        for i in 0..a.nrows() {
            let norm = a.row(i).norm();
            if norm > 0.0 {
                a.row_mut(i).unscale_mut(norm);
            }
        }
    }

    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sv = |k: usize| svd.singular_values[order[k]];
    let top = sv(0);
    let gap_ratio = if top > 0.0 { sv(n - 2) / top } else { 0.0 };
    let null_ratio = if top > 0.0 { sv(n - 1) / top } else { 0.0 };
    if !(gap_ratio >= RANK_TOL) {
        return Err(Error::RankDeficient { ratio: gap_ratio });
    }
    let null = vt.row(order[n - 1]);
    let g: Vec<f64> = (0..n).map(|j| null[j] / col_scale[j]).collect();

    let candidates = read_back(sys, &g, scale)?;
    let rms: Vec<f64> = candidates.iter().map(|p| closure_rms(observations, p)).collect();
    let params = if rms[1] < rms[0] { candidates[1] } else { candidates[0] };
    let residual_rms = rms[0].min(rms[1]);

    Ok(SolveReport {
        params,
        per_frame: report_poses(observations, &params),
        residual_rms,
        iterations: 0,
        method: Method::Linearized,
        start_index: None,
        diagnostics: Some(LinearDiagnostics {
            frames: observations.len(),
            unknowns: n,
            raw_monomials: sys.raw_monomials(),
            gap_ratio,
            null_ratio,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_pi;
    use crate::observe::observe_frames;
    use crate::scene::{MotionScript, Scene};
    use rand::SeedableRng;

    fn obs_for(scene: &Scene) -> Vec<FrameObservation> {
        observe_frames(&scene.render().unwrap()).unwrap()
    }

    #[test]
    fn structure_counts() {
        let sys = LinearizedSystem::get();
        assert_eq!(sys.raw_monomials(), 57);
        assert_eq!(sys.unknowns(), 19);
        assert!(sys.uses_all_variables());
    }

    #[test]
    fn constraint_vanishes_at_truth() {
        let sys = LinearizedSystem::get();
        let scene = Scene::random(4, 10, 16, false);
        let g = sys.combined_unknowns(&scene.params);
        for o in obs_for(&scene) {
            let row = sys.frame_row(o.c_prime, o.d_prime, o.e_prime);
            let value = dot(&row, &g);
            let size: f64 = row.iter().zip(&g).map(|(a, b)| (a * b).abs()).sum();
            assert!(value.abs() <= 1e-12 * size, "{value} vs {size}");
        }
    }

    #[test]
    fn functionals_reproduce_raw_monomials() {
        let sys = LinearizedSystem::get();
        let p = CurveParams::new(1.3, 0.7, 0.4, 2.2);
        let g = sys.combined_unknowns(&p);
        let one = dot(&sys.functionals.one, &g);
        assert!((one - 1.0).abs() < 1e-12);
        let cos2 = dot(&sys.functionals.cos2, &g);
        assert!((cos2 - p.phi.cos().powi(2)).abs() < 1e-12);
        assert!(sys.functional(&[([1, 0, 0, 0], 1)]).is_none());
    }

    #[test]
    fn recovers_truth_with_margin_frames() {
        let sys = LinearizedSystem::get();
        let scene = Scene::random(12, sys.unknowns() + 4, 16, true);
        let report = linearized_solve(&obs_for(&scene), &SolverConfig::default()).unwrap();
        let (p, t) = (report.params, scene.params);
        assert!((p.c - t.c).abs() < 1e-4 && (p.alpha - t.alpha).abs() < 1e-4);
        assert!((p.beta - t.beta).abs() < 1e-4 && wrap_pi(p.phi - t.phi).abs() < 1e-4);
    }

    #[test]
    fn too_few_frames() {
        let scene = Scene::random(2, 10, 16, false);
        assert!(matches!(
            linearized_solve(&obs_for(&scene), &SolverConfig::default()),
            Err(Error::Underdetermined {
                frames: 10,
                unknowns: 19
            })
        ));
    }

    #[test]
    fn identical_frames_are_rank_deficient() {
        let mut scene = Scene::random(2, 1, 16, false);
        let f = scene.motion.frames[0];
        scene.motion.frames = vec![f; 23];
        assert!(matches!(
            linearized_solve(&obs_for(&scene), &SolverConfig::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn constant_tau_is_rank_deficient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut scene = Scene::random(2, 1, 16, false);
        scene.motion = MotionScript::random(&mut rng, 23, false);
        for f in &mut scene.motion.frames {
            f.tau = 0.6;
        }
        assert!(matches!(
            linearized_solve(&obs_for(&scene), &SolverConfig::default()),
            Err(Error::RankDeficient { .. })
        ));
    }
}
