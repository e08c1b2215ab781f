//! Singularity geometry: contact orders, partial-derivative growth along
//! level curves, intersection classification and boundary transversality.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{ols, LinearFit};
use crate::levelset::{branch_tangent, LevelSet, LevelSetError, Orientation};
use crate::poly::{resultant_scale_z2, resultant_z2, C64};
use crate::rif::{Coordinate, RationalInnerFunction, Singularity, SmoothSymbol};

/// Slope difference separating transversal from tangential crossings.
pub const ANGLE_TOL: f64 = 0.05;
pub const COMMON_CURVE_TOL: f64 = 1e-7;
pub const COMMON_CURVE_WINDOW: f64 = 0.1;
pub const INTERSECTION_TOL: f64 = 1e-6;
pub const AT_SINGULARITY_TOL: f64 = 1e-4;
pub const RESULTANT_TOL: f64 = 1e-8;
pub const LADDER_RUNGS: usize = 12;

#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error("only {usable} usable ladder rungs, at least {needed} required")]
    InsufficientLadder { usable: usize, needed: usize },
    #[error("no pinching of slice zeros: fitted exponent {} is not positive", .0.slope)]
    NoPinch(LinearFit),
    #[error("no level-set branch through the point")]
    NoBranch,
    #[error("symbol value {value:?} is not on the torus")]
    NotBoundaryContact { value: [C64; 2] },
    #[error("tangency window needs resolution {required}")]
    RefineResolution { required: usize },
    #[error("level sets were traced at different resolutions ({0} and {1})")]
    ResolutionMismatch(usize, usize),
    #[error(transparent)]
    LevelSet(#[from] LevelSetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Z1,
    Z2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactOrderEstimate {
    pub k: f64,
    pub stderr: f64,
    pub r2: f64,
    pub k_rounded_even: i64,
    pub low_confidence: bool,
    pub variable: Variable,
    pub singularity: Singularity,
    /// `(|omega - zeta|, epsilon)` for each usable rung.
    pub ladder: Vec<(f64, f64)>,
}

impl ContactOrderEstimate {
    /// The even rounding when it is within 0.15 of the raw fit, else the raw value.
    pub fn effective(&self) -> f64 {
        if (self.k - self.k_rounded_even as f64).abs() < 0.15 {
            self.k_rounded_even as f64
        } else {
            self.k
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartialGrowthEstimate {
    pub exponent: f64,
    pub stderr: f64,
    pub r2: f64,
    pub alpha: C64,
    /// `(|zeta1 - omega1|, 1/|d phi/d z2|)` for each rung.
    pub ladder: Vec<(f64, f64)>,
}

/// Symmetric geometric ladder `+/- geomspace(1e-1, 1e-4, rungs)`.
pub fn two_sided_ladder(rungs: usize) -> Vec<f64> {
    let one: Vec<f64> = (0..rungs)
        .map(|i| 10f64.powf(-1.0 - 3.0 * i as f64 / (rungs - 1) as f64))
        .collect();
    one.iter().flat_map(|&s| [s, -s]).collect()
}

/// Exponent `K` in `min_j (1 - |a_j(zeta)|) ~ |omega - zeta|^K`, where the
/// `a_j` are the interior zeros of the slice of `p~` through `zeta`.
///
/// For `Variable::Z1` the slice is `p~(., zeta2)` with `zeta2 = omega2 e^{is}`;
/// for `Variable::Z2` the roles are exchanged.
pub fn contact_order(
    phi: &RationalInnerFunction,
    omega: &Singularity,
    variable: Variable,
) -> Result<ContactOrderEstimate, GeometryError> {
    contact_order_with(phi, omega, variable, LADDER_RUNGS)
}

pub fn contact_order_with(
    phi: &RationalInnerFunction,
    omega: &Singularity,
    variable: Variable,
    rungs: usize,
) -> Result<ContactOrderEstimate, GeometryError> {
    let pt = phi.numerator();
    let ladder: Vec<(f64, f64)> = two_sided_ladder(rungs)
        .into_par_iter()
        .filter_map(|s| {
            let rot = C64::from_polar(1.0, s);
            let slice = match variable {
                Variable::Z1 => pt.slice_z2(omega.location[1] * rot),
                Variable::Z2 => pt.slice_z1(omega.location[0] * rot),
            };
            // A zero rounded onto or past the circle makes the rung unusable;
            // skipping it would silently pick the next zero instead.
            let eps = slice
                .roots()
                .ok()?
                .into_iter()
                .map(|a| 1.0 - a.norm())
                .fold(f64::INFINITY, f64::min);
            (eps.is_finite() && eps >= 1e-13).then(|| ((C64::new(1.0, 0.0) - rot).norm(), eps))
        })
        .collect();
    let fit = fit_ladder(&ladder)?;
    if fit.slope < 0.5 {
        return Err(GeometryError::NoPinch(fit));
    }
    Ok(ContactOrderEstimate {
        k: fit.slope,
        stderr: fit.slope_stderr,
        r2: fit.r2,
        k_rounded_even: 2 * (fit.slope / 2.0).round() as i64,
        low_confidence: fit.r2 < 0.99,
        variable,
        singularity: *omega,
        ladder,
    })
}

fn fit_ladder(ladder: &[(f64, f64)]) -> Result<LinearFit, GeometryError> {
    if ladder.len() < 6 {
        return Err(GeometryError::InsufficientLadder {
            usable: ladder.len(),
            needed: 6,
        });
    }
    let xs: Vec<f64> = ladder.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = ladder.iter().map(|r| r.1.ln()).collect();
    ols(&xs, &ys).ok_or(GeometryError::InsufficientLadder {
        usable: 0,
        needed: 6,
    })
}

/// Default level value for growth fits: a quarter-turn-ish rotation away
/// from the nontangential value, so the level curve is generic.
pub fn generic_alpha(omega: &Singularity) -> C64 {
    -omega.nontangential_value * C64::from_polar(1.0, 0.5)
}

/// Exponent of `|d phi/d z2|^{-1} ~ |zeta1 - omega1|^K` along the level
/// curve of `alpha` into `omega`.
///
/// On `{p~ = alpha p}` the partial is `(d q_alpha / d z2) / p`; the curve
/// point over `zeta1` is the slice root nearest `omega2`.
pub fn partial_growth(
    phi: &RationalInnerFunction,
    alpha: C64,
    omega: &Singularity,
) -> Result<PartialGrowthEstimate, GeometryError> {
    let q = phi.level_polynomial(alpha);
    if q.bidegree().1 == 0 {
        return Err(GeometryError::NoBranch);
    }
    let [w1, w2] = omega.location;
    let ladder: Vec<(f64, f64)> = two_sided_ladder(LADDER_RUNGS)
        .into_par_iter()
        .filter_map(|s| {
            let rot = C64::from_polar(1.0, s);
            let z1 = w1 * rot;
            let z2 = q
                .slice_z1(z1)
                .roots()
                .ok()?
                .into_iter()
                .filter(|r| (r.norm() - 1.0).abs() < 1e-6)
                .min_by(|a, b| (a - w2).norm().total_cmp(&(b - w2).norm()))?;
            let (_, _, dq2) = q.eval_grad(z1, z2);
            let d = phi.denominator().evaluate(z1, z2);
            let partial = (dq2 / d).norm();
            (partial.is_finite() && partial > 0.0)
                .then(|| ((C64::new(1.0, 0.0) - rot).norm(), 1.0 / partial))
        })
        .collect();
    let fit = fit_ladder(&ladder)?;
    Ok(PartialGrowthEstimate {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        r2: fit.r2,
        alpha,
        ladder,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionKind {
    Transversal,
    Tangential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonLine {
    pub tau: C64,
    pub orientation: Orientation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommonCurve {
    /// Start and end angle (in `z1`) of the shared window.
    pub window: [f64; 2],
    pub max_distance: f64,
    /// `(theta, |g1 - g2|)` along the window.
    pub witness: Vec<(f64, f64)>,
    /// `(theta, |Res| / Hadamard bound)` at the confirmation points.
    pub resultants: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntersectionPoint {
    pub location: [C64; 2],
    pub theta: f64,
    pub kind: IntersectionKind,
    pub distance: f64,
    pub slopes: [f64; 2],
    pub angle: Option<f64>,
    pub m: Option<f64>,
    pub m_stderr: Option<f64>,
    pub m_r2: Option<f64>,
    /// `(|theta - theta*|, |g1 - g2|)` used for the order fit.
    pub m_ladder: Vec<(f64, f64)>,
    pub at_singularity: bool,
    /// Contact orders of the two symbols, filled in by the caller.
    pub k_pair: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InteractionReport {
    pub alphas: [C64; 2],
    pub common_lines: Vec<CommonLine>,
    pub common_curve: Option<CommonCurve>,
    pub intersections: Vec<IntersectionPoint>,
}

impl InteractionReport {
    pub fn has_common_component(&self) -> bool {
        !self.common_lines.is_empty() || self.common_curve.is_some()
    }
}

/// Finds the shared lines, shared curve arcs and isolated crossings of two
/// level sets.
pub fn classify_intersections(
    ls1: &LevelSet,
    ls2: &LevelSet,
    singularities: &[[C64; 2]],
) -> Result<InteractionReport, GeometryError> {
    if ls1.resolution != ls2.resolution {
        return Err(GeometryError::ResolutionMismatch(
            ls1.resolution,
            ls2.resolution,
        ));
    }
    let mut common_lines = Vec::new();
    for (a, b, orientation) in [
        (
            &ls1.vertical_lines,
            &ls2.vertical_lines,
            Orientation::Vertical,
        ),
        (
            &ls1.horizontal_lines,
            &ls2.horizontal_lines,
            Orientation::Horizontal,
        ),
    ] {
        for &t in a {
            if b.iter().any(|&u| (t - u).norm() <= 1e-8) {
                common_lines.push(CommonLine {
                    tau: t,
                    orientation,
                });
            }
        }
    }
    let h = TAU / ls1.resolution as f64;
    let mut common_curve: Option<CommonCurve> = None;
    let mut intersections: Vec<IntersectionPoint> = Vec::new();
    for (bi, b1) in ls1.branches.iter().enumerate() {
        // Distance to the nearest ls2 point over each ls1 sample.
        let track: Vec<(f64, C64, Option<C64>)> = b1
            .samples
            .par_iter()
            .map(|s| (s.theta, s.g, ls2.point_near(s.theta, s.g)))
            .collect();
        let dist: Vec<f64> = track
            .iter()
            .map(|t| t.2.map_or(f64::INFINITY, |g2| (g2 - t.1).norm()))
            .collect();

        let mut start = None;
        for i in 0..=dist.len() {
            let close = i < dist.len() && dist[i] <= COMMON_CURVE_TOL;
            match (close, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    start = None;
                    let width = (i - s) as f64 * h;
                    if width >= COMMON_CURVE_WINDOW && common_curve.is_none() {
                        let window = [track[s].0, track[i - 1].0];
                        let resultants = confirm_common_curve(ls1, ls2, &track[s..i]);
                        if resultants.iter().all(|r| r.1 <= RESULTANT_TOL) {
                            common_curve = Some(CommonCurve {
                                window,
                                max_distance: dist[s..i].iter().cloned().fold(0.0, f64::max),
                                witness: track[s..i]
                                    .iter()
                                    .zip(&dist[s..i])
                                    .step_by(((i - s) / 64).max(1))
                                    .map(|(t, d)| (t.0, *d))
                                    .collect(),
                                resultants,
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        let shared = |theta: f64| {
            common_curve.as_ref().is_some_and(|c| {
                let span = (c.window[1] - c.window[0]).rem_euclid(TAU);
                (theta - c.window[0]).rem_euclid(TAU) <= span + 2.0 * h
            })
        };

        // Signed angular gap arg(g2/g1); crossings are sign changes, touchings
        // are local minima of its modulus.
        let gap: Vec<Option<f64>> = track
            .iter()
            .map(|t| t.2.map(|g2| (g2 / t.1).arg()))
            .collect();
        for i in 1..track.len().saturating_sub(1) {
            let (Some(a), Some(b)) = (gap[i], gap[i + 1]) else {
                continue;
            };
            if (track[i + 1].0 - track[i].0).rem_euclid(TAU) > 1.5 * h || shared(track[i].0) {
                continue;
            }
            let crossing = a.signum() != b.signum() && a.abs() < 0.5 && b.abs() < 0.5;
            let touching = gap[i - 1]
                .is_some_and(|l| a.abs() < l.abs() && a.abs() <= b.abs() && a != 0.0)
                && a.abs() < 0.5;
            if !(crossing || touching) {
                continue;
            }
            let refined = if crossing {
                refine_crossing(
                    ls1,
                    ls2,
                    track[i].0,
                    track[i + 1].0,
                    track[i].1,
                    track[i].2.unwrap(),
                )
            } else {
                refine_touching(
                    ls1,
                    ls2,
                    track[i - 1].0,
                    track[i + 1].0,
                    track[i].1,
                    track[i].2.unwrap(),
                )
            };
            let Some((theta, g1, g2)) = refined else {
                continue;
            };
            let d = (g1 - g2).norm();
            if d > INTERSECTION_TOL {
                continue;
            }
            let z1 = C64::from_polar(1.0, theta);
            if intersections
                .iter()
                .any(|p| (p.location[0] - z1).norm() < 1e-6 && (p.location[1] - g1).norm() < 1e-6)
            {
                continue;
            }
            let at_singularity = singularities
                .iter()
                .any(|s| (s[0] - z1).norm().max((s[1] - g1).norm()) <= AT_SINGULARITY_TOL);
            let point = classify_point(ls1, ls2, bi, theta, g1, g2, at_singularity)?;
            intersections.push(point);
        }
    }
    intersections.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(InteractionReport {
        alphas: [ls1.alpha, ls2.alpha],
        common_lines,
        common_curve,
        intersections,
    })
}

fn confirm_common_curve(
    ls1: &LevelSet,
    ls2: &LevelSet,
    track: &[(f64, C64, Option<C64>)],
) -> Vec<(f64, f64)> {
    (0..8)
        .map(|k| {
            let t = track[(k * (track.len() - 1)) / 7].0;
            let z1 = C64::from_polar(1.0, t);
            let r = resultant_z2(&ls1.reduced, &ls2.reduced, z1)
                .map(|r| r.norm())
                .unwrap_or(f64::INFINITY);
            let scale = resultant_scale_z2(&ls1.reduced, &ls2.reduced, z1).max(f64::MIN_POSITIVE);
            (t, r / scale)
        })
        .collect()
}

/// Follows both curves from `(theta0, g1, g2)` to `theta`.
fn follow(
    ls1: &LevelSet,
    ls2: &LevelSet,
    theta0: f64,
    g1: C64,
    g2: C64,
    theta: f64,
) -> Option<(C64, C64)> {
    let steps = (((theta - theta0).abs() / 2e-3).ceil() as usize).max(1);
    let (mut a, mut b) = (g1, g2);
    for k in 1..=steps {
        let t = theta0 + (theta - theta0) * k as f64 / steps as f64;
        a = ls1.point_near(t, a)?;
        b = ls2.point_near(t, b)?;
    }
    Some((a, b))
}

fn refine_crossing(
    ls1: &LevelSet,
    ls2: &LevelSet,
    lo: f64,
    hi: f64,
    g1: C64,
    g2: C64,
) -> Option<(f64, C64, C64)> {
    let hi = lo + (hi - lo).rem_euclid(TAU);
    let (mut a, mut b) = (lo, hi);
    let (mut ga, mut gb) = (g1, g2);
    let sign_lo = (g2 / g1).arg().signum();
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let (x, y) = follow(ls1, ls2, a, ga, gb, mid)?;
        if (y / x).arg().signum() == sign_lo {
            a = mid;
            ga = x;
            gb = y;
        } else {
            b = mid;
        }
    }
    Some((a.rem_euclid(TAU), ga, gb))
}

fn refine_touching(
    ls1: &LevelSet,
    ls2: &LevelSet,
    lo: f64,
    hi: f64,
    g1: C64,
    g2: C64,
) -> Option<(f64, C64, C64)> {
    let hi = lo + (hi - lo).rem_euclid(TAU);
    let mid0 = 0.5 * (lo + hi);
    let at = |t: f64| follow(ls1, ls2, mid0, g1, g2, t).map(|(x, y)| ((x - y).norm(), x, y));
    let (mut a, mut b) = (lo, hi);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - gr * (b - a), a + gr * (b - a));
        if at(c)?.0 < at(d)?.0 {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    let (_, x, y) = at(t)?;
    Some((t.rem_euclid(TAU), x, y))
}

fn branch_of(ls: &LevelSet, theta: f64, g: C64) -> Option<usize> {
    ls.branches
        .iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let s = b.samples.iter().min_by(|x, y| {
                let dx = (x.theta - theta)
                    .rem_euclid(TAU)
                    .min((theta - x.theta).rem_euclid(TAU));
                let dy = (y.theta - theta)
                    .rem_euclid(TAU)
                    .min((theta - y.theta).rem_euclid(TAU));
                dx.total_cmp(&dy)
            })?;
            Some((i, (s.g - g).norm()))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|x| x.0)
}

fn classify_point(
    ls1: &LevelSet,
    ls2: &LevelSet,
    b1: usize,
    theta: f64,
    g1: C64,
    g2: C64,
    at_singularity: bool,
) -> Result<IntersectionPoint, GeometryError> {
    let b2 = branch_of(ls2, theta, g2).ok_or(GeometryError::NoBranch)?;
    let s1 = branch_tangent(&ls1.branches[b1], ls1.resolution, theta);
    let s2 = branch_tangent(&ls2.branches[b2], ls2.resolution, theta);
    let location = [C64::from_polar(1.0, theta), g1];
    let base = IntersectionPoint {
        location,
        theta,
        kind: IntersectionKind::Tangential,
        distance: (g1 - g2).norm(),
        slopes: [f64::NAN, f64::NAN],
        angle: None,
        m: None,
        m_stderr: None,
        m_r2: None,
        m_ladder: vec![],
        at_singularity,
        k_pair: None,
    };
    if let (Ok(s1), Ok(s2)) = (&s1, &s2) {
        if (s1.slope - s2.slope).abs() >= ANGLE_TOL {
            return Ok(IntersectionPoint {
                kind: IntersectionKind::Transversal,
                slopes: [s1.slope, s2.slope],
                angle: Some((s1.slope.atan() - s2.slope.atan()).abs()),
                ..base
            });
        }
    }
    // Tangential, or slopes unavailable at a singular point: fit the order.
    let h = TAU / ls1.resolution as f64;
    if 0.1 / h < 4.0 {
        return Err(GeometryError::RefineResolution {
            required: (4.0 * TAU / 0.1).ceil() as usize,
        });
    }
    let mut ladder = Vec::new();
    for side in [1.0, -1.0] {
        let (mut a, mut b) = (g1, g2);
        let mut prev = theta;
        for i in 0..LADDER_RUNGS {
            let off = 10f64.powf(-3.0 + 2.0 * i as f64 / (LADDER_RUNGS - 1) as f64);
            let t = theta + side * off;
            let Some((x, y)) = follow(ls1, ls2, prev, a, b, t) else {
                break;
            };
            (a, b, prev) = (x, y, t);
            let d = (x - y).norm();
            if d > 0.0 {
                ladder.push((off, d));
            }
        }
    }
    let slopes = [
        s1.map_or(f64::NAN, |s| s.slope),
        s2.map_or(f64::NAN, |s| s.slope),
    ];
    let fit = fit_ladder(&ladder).ok();
    Ok(IntersectionPoint {
        slopes,
        m: fit.filter(|f| f.r2 >= 0.99).map(|f| f.slope),
        m_stderr: fit.map(|f| f.slope_stderr),
        m_r2: fit.map(|f| f.r2),
        m_ladder: ladder,
        ..base
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub point: [C64; 2],
    pub value: [C64; 2],
    /// Complex Jacobian `[[d1 f1, d2 f1], [d1 f2, d2 f2]]`.
    pub jacobian: [[C64; 2]; 2],
    pub jacobian_det: C64,
    /// `diag(1/alpha) J diag(zeta)`, the derivative in angular coordinates.
    pub polar_det: C64,
    pub transversal: bool,
}

/// Checks invertibility of the boundary derivative of `(f1, f2)` at a torus
/// point mapped to the torus.
pub fn transversality_check(
    f1: &Coordinate,
    f2: &Coordinate,
    zeta: [C64; 2],
) -> Result<TransversalityReport, GeometryError> {
    let (v1, a, b) = f1.eval_grad(zeta[0], zeta[1]);
    let (v2, c, d) = f2.eval_grad(zeta[0], zeta[1]);
    if (v1.norm() - 1.0).abs() > 1e-8 || (v2.norm() - 1.0).abs() > 1e-8 {
        return Err(GeometryError::NotBoundaryContact { value: [v1, v2] });
    }
    let jacobian_det = a * d - b * c;
    let polar_det = jacobian_det * zeta[0] * zeta[1] / (v1 * v2);
    Ok(TransversalityReport {
        point: zeta,
        value: [v1, v2],
        jacobian: [[a, b], [c, d]],
        jacobian_det,
        polar_det,
        transversal: polar_det.norm() > 1e-8,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceVerdict {
    /// Positive angular derivative.
    Nondegenerate,
    /// Zero angular derivative and the slice is constant.
    Constant,
    /// Zero angular derivative but the slice varies, impossible for a self-map.
    Inconsistent,
    /// The slice does not take a unimodular value at the point.
    NoContact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceTestReport {
    /// `xi f'(xi) / f(xi)` for the slice `f`; real and nonnegative for a self-map.
    pub angular_derivative: C64,
    pub verdict: SliceVerdict,
}

/// Julia-Caratheodory test on the one-variable slice of `psi` through `xi`
/// in the given variable (the other coordinate is frozen).
pub fn julia_caratheodory_slice_test(
    psi: &SmoothSymbol,
    xi: [C64; 2],
    direction: Variable,
) -> SliceTestReport {
    let (v, d1, d2) = psi.polynomial().eval_grad(xi[0], xi[1]);
    if (v.norm() - 1.0).abs() > 1e-9 {
        return SliceTestReport {
            angular_derivative: C64::new(f64::NAN, 0.0),
            verdict: SliceVerdict::NoContact,
        };
    }
    let (x, d) = match direction {
        Variable::Z1 => (xi[0], d1),
        Variable::Z2 => (xi[1], d2),
    };
    let angular_derivative = x * d / v;
    if angular_derivative.norm() > 1e-10 {
        return SliceTestReport {
            angular_derivative,
            verdict: SliceVerdict::Nondegenerate,
        };
    }
    let constant = (0..64).all(|k| {
        let z = C64::from_polar(0.9 * ((k % 8) as f64 + 1.0) / 8.0, TAU * k as f64 / 64.0);
        let w = match direction {
            Variable::Z1 => psi.value(z, xi[1]),
            Variable::Z2 => psi.value(xi[0], z),
        };
        (w - v).norm() < 1e-10
    });
    SliceTestReport {
        angular_derivative,
        verdict: if constant {
            SliceVerdict::Constant
        } else {
            SliceVerdict::Inconsistent
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::trace_level_set;
    use crate::poly::BivariatePolynomial;
    use crate::rif::{amy, kappa, make_rif};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kappa_contact_order_is_two() {
        let k = kappa();
        let s = k.singularities()[0];
        for v in [Variable::Z1, Variable::Z2] {
            let e = contact_order(&k, &s, v).unwrap();
            assert!((e.k - 2.0).abs() < 0.05, "{}", e.k);
            assert!(e.r2 >= 0.99);
            assert_eq!(e.k_rounded_even, 2);
        }
    }

    #[test]
    fn kappa_slice_zero_matches_symbolic_form() {
        // The zero of p~(., zeta2) is zeta2 / (2 zeta2 - 1); 1 - |a| = s^2/2 + O(s^4).
        let k = kappa();
        let e = contact_order(&k, &k.singularities()[0], Variable::Z1).unwrap();
        for &(d, eps) in &e.ladder {
            let s = 2.0 * (d / 2.0).asin();
            let z = C64::from_polar(1.0, s);
            let a = z / (z * 2.0 - 1.0);
            assert!(((1.0 - a.norm()) - eps).abs() <= 1e-12 + 1e-9 * eps);
        }
    }

    #[test]
    fn amy_contact_order_is_even() {
        let a = amy();
        let s = a.singularities()[0];
        let e = contact_order(&a, &s, Variable::Z1).unwrap();
        assert_eq!(e.k_rounded_even % 2, 0);
        assert!(e.k_rounded_even >= 2);
        assert!((e.k - e.k_rounded_even as f64).abs() < 0.15, "{}", e.k);
    }

    #[test]
    fn contact_order_without_singularity_fails() {
        let k = kappa();
        let fake = Singularity {
            location: [c(-1.0, 0.0), c(-1.0, 0.0)],
            nontangential_value: c(1.0, 0.0),
            residual: 0.0,
        };
        assert!(matches!(
            contact_order(&k, &fake, Variable::Z1),
            Err(GeometryError::NoPinch(_))
        ));
    }

    #[test]
    fn ladder_density_doubling_is_stable() {
        for f in [kappa(), amy()] {
            let s = f.singularities()[0];
            let a = contact_order_with(&f, &s, Variable::Z1, 12).unwrap();
            // Midpoint insertion: 2N - 1 rungs nest the original ladder.
            let b = contact_order_with(&f, &s, Variable::Z1, 23).unwrap();
            assert!(
                (a.k - b.k).abs() < a.stderr.max(b.stderr).max(1e-3),
                "{} {} {} {} {} {}",
                a.k,
                b.k,
                a.stderr,
                b.stderr,
                a.ladder.len(),
                b.ladder.len()
            );
        }
    }

    #[test]
    fn partial_growth_agrees_with_contact_order() {
        for f in [kappa(), amy()] {
            let s = f.singularities()[0];
            let k = contact_order(&f, &s, Variable::Z1).unwrap();
            let g = partial_growth(&f, generic_alpha(&s), &s).unwrap();
            let tol = 2.0 * (k.stderr.powi(2) + g.stderr.powi(2)).sqrt();
            assert!(
                (k.k - g.exponent).abs() <= tol.max(0.05),
                "K {} vs growth {}",
                k.k,
                g.exponent
            );
        }
    }

    #[test]
    fn partial_growth_away_from_singularity_is_flat() {
        let k = kappa();
        let alpha = c(0.0, 1.0);
        let z2 = trace_level_set(&k, alpha, 256)
            .unwrap()
            .slice_points(std::f64::consts::PI)[0];
        let fake = Singularity {
            location: [c(-1.0, 0.0), z2],
            nontangential_value: alpha,
            residual: 0.0,
        };
        let g = partial_growth(&k, alpha, &fake).unwrap();
        assert!(g.exponent.abs() < 0.05);
    }

    #[test]
    fn constant_rif_has_no_branch() {
        let one = make_rif(BivariatePolynomial::constant(c(1.0, 0.0))).unwrap();
        let s = Singularity {
            location: [c(1.0, 0.0); 2],
            nontangential_value: c(1.0, 0.0),
            residual: 0.0,
        };
        assert!(matches!(
            partial_growth(&one, c(1.0, 0.0), &s),
            Err(GeometryError::NoBranch)
        ));
    }

    #[test]
    fn common_line_of_kappa_and_amy() {
        let m1 = c(-1.0, 0.0);
        let a = trace_level_set(&kappa(), m1, 512).unwrap();
        let b = trace_level_set(&amy(), m1, 512).unwrap();
        let r = classify_intersections(&a, &b, &[[c(1.0, 0.0); 2]]).unwrap();
        assert_eq!(r.common_lines.len(), 1);
        assert!((r.common_lines[0].tau - 1.0).norm() <= 1e-8);
        assert_eq!(r.common_lines[0].orientation, Orientation::Vertical);
        assert!(r.common_curve.is_none());
    }

    #[test]
    fn common_curve_of_amy_and_swapped_amy() {
        let m1 = c(-1.0, 0.0);
        let f = amy();
        let a = trace_level_set(&f, m1, 1024).unwrap();
        let b = trace_level_set(&f.swapped(), m1, 1024).unwrap();
        let r = classify_intersections(&a, &b, &[[c(1.0, 0.0); 2]]).unwrap();
        let cc = r.common_curve.expect("anti-diagonal is shared");
        assert!((cc.window[1] - cc.window[0]).rem_euclid(TAU) >= COMMON_CURVE_WINDOW);
        assert!(cc.max_distance <= COMMON_CURVE_TOL);
        assert_eq!(cc.resultants.len(), 8);
        assert!(cc.resultants.iter().all(|r| r.1 <= RESULTANT_TOL));
        assert!(r.common_lines.is_empty());
    }

    #[test]
    fn affine_like_curves_cross_transversally() {
        // 4 - z1 - 2 z2 and its mirror image: nonsingular, and their level
        // curves at i cross.
        let g = make_rif(BivariatePolynomial::from_real_rows(&[
            &[4.0, -2.0],
            &[-1.0, 0.0],
        ]))
        .unwrap();
        let a = trace_level_set(&g, c(0.0, 1.0), 1024).unwrap();
        let b = trace_level_set(&g.swapped(), c(0.0, 1.0), 1024).unwrap();
        let r = classify_intersections(&a, &b, &[]).unwrap();
        assert!(!r.intersections.is_empty());
        for p in &r.intersections {
            assert_eq!(p.kind, IntersectionKind::Transversal, "{p:?}");
            assert!(p.m.is_none() && p.angle.unwrap() > 0.0);
        }
        let back = classify_intersections(&b, &a, &[]).unwrap();
        assert_eq!(back.intersections.len(), r.intersections.len());
    }

    #[test]
    fn example_three_jacobian() {
        let psi = SmoothSymbol::weighted_mean(1.0, 2.0).unwrap();
        let phi1 = (
            Coordinate::rif(kappa()).rotated(c(-1.0, 0.0)),
            Coordinate::smooth(psi.clone()),
        );
        let plain = (Coordinate::rif(kappa()), Coordinate::smooth(psi));
        for k in 1..=8 {
            let eta = C64::from_polar(1.0, TAU * k as f64 / 9.0);
            let r = transversality_check(&phi1.0, &phi1.1, [eta, eta]).unwrap();
            assert!(
                (r.polar_det - 1.0 / 6.0).norm() < 1e-10,
                "{:?}",
                r.polar_det
            );
            assert!(r.transversal);
            let r = transversality_check(&plain.0, &plain.1, [eta, eta]).unwrap();
            assert!(
                (r.jacobian[0][0] + 0.5).norm() < 1e-10 && (r.jacobian[0][1] + 0.5).norm() < 1e-10
            );
            assert!((r.jacobian_det + 1.0 / 6.0).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_one_and_identity_maps() {
        let z1 = Coordinate::smooth(SmoothSymbol::new(BivariatePolynomial::z1()).unwrap());
        let z2 = Coordinate::smooth(SmoothSymbol::new(BivariatePolynomial::z2()).unwrap());
        let w = [C64::from_polar(1.0, 0.4), C64::from_polar(1.0, 2.0)];
        assert!(!transversality_check(&z1, &z1, w).unwrap().transversal);
        let id = transversality_check(&z1, &z2, w).unwrap();
        assert!(id.transversal && (id.polar_det - 1.0).norm() < 1e-15);
        let half = Coordinate::smooth(SmoothSymbol::weighted_mean(1.0, 1.0).unwrap());
        assert!(matches!(
            transversality_check(&half, &z2, w),
            Err(GeometryError::NotBoundaryContact { .. })
        ));
    }

    #[test]
    fn polar_determinant_is_rotation_invariant_in_modulus() {
        let psi = Coordinate::smooth(SmoothSymbol::weighted_mean(1.0, 2.0).unwrap());
        let k = Coordinate::rif(kappa());
        let eta = C64::from_polar(1.0, 1.3);
        let base = transversality_check(&k, &psi, [eta, eta])
            .unwrap()
            .polar_det
            .norm();
        for a in [0.3, 2.0, 4.0] {
            let r = transversality_check(&k.rotated(C64::from_polar(1.0, a)), &psi, [eta, eta])
                .unwrap();
            assert!((r.polar_det.norm() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_tests() {
        let one = c(1.0, 0.0);
        let psi = SmoothSymbol::weighted_mean(1.0, 2.0).unwrap();
        let r = julia_caratheodory_slice_test(&psi, [one, one], Variable::Z2);
        assert_eq!(r.verdict, SliceVerdict::Nondegenerate);
        assert!((r.angular_derivative - 2.0 / 3.0).norm() < 1e-15);
        let z1 = SmoothSymbol::new(BivariatePolynomial::z1()).unwrap();
        assert_eq!(
            julia_caratheodory_slice_test(&z1, [one, one], Variable::Z2).verdict,
            SliceVerdict::Constant
        );
        let z2 = SmoothSymbol::new(BivariatePolynomial::z2()).unwrap();
        let r = julia_caratheodory_slice_test(&z2, [one, one], Variable::Z2);
        assert_eq!(r.verdict, SliceVerdict::Nondegenerate);
        assert!((r.angular_derivative - 1.0).norm() < 1e-15);
    }
}
