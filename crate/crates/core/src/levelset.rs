//! Unimodular level sets `{phi = alpha}` on the torus, traced as graphs
//! `z2 = g(z1)` over the first circle plus exceptional vertical and
//! horizontal lines.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{BivariatePolynomial, UnivariatePolynomial, C64};
use crate::rif::{Coordinate, RationalInnerFunction};

/// Roots within this distance of the unit circle are level-set points.
pub const ROOT_BAND: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const TIE_TOL: f64 = 1e-10;
/// Largest step `|g_{k+1} - g_k|` accepted as a continuation of a branch.
pub const MAX_JUMP: f64 = 0.5;
pub const LINE_SCAN: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevelSetError {
    #[error("level value {0} is not unimodular")]
    NotUnimodular(C64),
    #[error("resolution {0} is below the minimum of 64")]
    ResolutionTooLow(usize),
    #[error("tangent error estimate {error:.3e} too large; resolution {required} needed")]
    RefineResolution { required: usize, error: f64 },
    #[error("theta = {0} is not interior to the sampled branch")]
    NotInterior(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

/// A line `{z1 = tau}` (vertical) or `{z2 = tau}` (horizontal) contained in
/// the level set of `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalLine {
    pub tau: C64,
    pub orientation: Orientation,
    pub alpha: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub theta: f64,
    pub g: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub alpha: C64,
    pub samples: Vec<BranchSample>,
    pub continuity_gap: f64,
    /// Angles where two continuations were within `TIE_TOL` of each other.
    pub ambiguous_at: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSet {
    pub alpha: C64,
    pub branches: Vec<Branch>,
    pub vertical_lines: Vec<C64>,
    pub horizontal_lines: Vec<C64>,
    pub resolution: usize,
    /// Excluded angle; samples sit at `theta0 + 2 pi (k + 1/2) / resolution`.
    pub theta0: f64,
    /// Grid angles where the slice lost degree and no roots were taken.
    pub skipped: Vec<f64>,
    /// Level polynomial with the line factors divided out.
    pub reduced: BivariatePolynomial,
    /// Level polynomial before reduction; residuals are measured against it.
    pub level_polynomial: BivariatePolynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentEstimate {
    pub slope: f64,
    pub error: f64,
}

impl LevelSet {
    /// Angle of the `k`-th grid sample.
    pub fn grid_theta(&self, k: usize) -> f64 {
        grid_theta(self.theta0, self.resolution, k)
    }

    /// Level-set points over `z1 = e^{i theta}`, solved afresh from the
    /// reduced polynomial.
    pub fn slice_points(&self, theta: f64) -> Vec<C64> {
        slice_points(&self.reduced, theta)
    }

    /// The level-set point over `theta` nearest to `guess`.
    pub fn point_near(&self, theta: f64, guess: C64) -> Option<C64> {
        self.slice_points(theta)
            .into_iter()
            .min_by(|a, b| (a - guess).norm().total_cmp(&(b - guess).norm()))
    }

    /// Largest `|q(e^{i theta}, g)| / l1(q)` over all branch samples.
    pub fn max_relative_residual(&self) -> f64 {
        let scale = self.level_polynomial.l1_norm().max(f64::MIN_POSITIVE);
        self.branches
            .iter()
            .flat_map(|b| &b.samples)
            .map(|s| {
                self.level_polynomial
                    .evaluate(C64::from_polar(1.0, s.theta), s.g)
                    .norm()
                    / scale
            })
            .fold(0.0, f64::max)
    }
}

fn grid_theta(theta0: f64, n: usize, k: usize) -> f64 {
    (theta0 + TAU * (k as f64 + 0.5) / n as f64).rem_euclid(TAU)
}

fn slice_points(q: &BivariatePolynomial, theta: f64) -> Vec<C64> {
    let slice = q.slice_z1(C64::from_polar(1.0, theta));
    match slice.roots() {
        Ok(r) => r
            .into_iter()
            .filter(|z| (z.norm() - 1.0).abs() <= ROOT_BAND)
            .map(|z| z / z.norm())
            .collect(),
        Err(_) => vec![],
    }
}

fn check_alpha(alpha: C64) -> Result<(), LevelSetError> {
    if (alpha.norm() - 1.0).abs() > 1e-12 {
        return Err(LevelSetError::NotUnimodular(alpha));
    }
    Ok(())
}

/// Default excluded angle: `pi`, nudged away from the first coordinates of
/// the given singularities.
pub fn default_theta0(singular_z1: &[C64]) -> f64 {
    let mut theta0 = PI;
    for _ in 0..64 {
        let near = singular_z1
            .iter()
            .any(|z| (C64::from_polar(1.0, theta0) - z).norm() < 0.05);
        if !near {
            break;
        }
        theta0 += 0.1;
    }
    theta0
}

/// Traces `{phi = alpha}` with the default excluded angle.
pub fn trace_level_set(
    phi: &RationalInnerFunction,
    alpha: C64,
    resolution: usize,
) -> Result<LevelSet, LevelSetError> {
    let z1s: Vec<C64> = phi.singularities().iter().map(|s| s.location[0]).collect();
    check_alpha(alpha)?;
    trace_polynomial(
        &phi.level_polynomial(alpha),
        alpha,
        resolution,
        default_theta0(&z1s),
    )
}

/// Traces the level set of one coordinate of a symbol.
pub fn trace_coordinate(
    f: &Coordinate,
    alpha: C64,
    resolution: usize,
) -> Result<LevelSet, LevelSetError> {
    check_alpha(alpha)?;
    let z1s: Vec<C64> = f.singularities().iter().map(|s| s.location[0]).collect();
    trace_polynomial(
        &f.level_polynomial(alpha),
        alpha,
        resolution,
        default_theta0(&z1s),
    )
}

/// Traces the torus zero set of `q` (the level polynomial of `alpha`).
pub fn trace_polynomial(
    q: &BivariatePolynomial,
    alpha: C64,
    resolution: usize,
    theta0: f64,
) -> Result<LevelSet, LevelSetError> {
    check_alpha(alpha)?;
    if resolution < 64 {
        return Err(LevelSetError::ResolutionTooLow(resolution));
    }
    let (reduced, vertical, horizontal) = split_line_factors(q);
    let scale = q.l1_norm().max(f64::MIN_POSITIVE);
    let columns: Vec<(f64, Option<Vec<C64>>)> = (0..resolution)
        .into_par_iter()
        .map(|k| {
            let theta = grid_theta(theta0, resolution, k);
            let z1 = C64::from_polar(1.0, theta);
            if reduced.bidegree().1 == 0 || reduced.slice_z1(z1).degree() == 0 {
                return (
                    theta,
                    if reduced.bidegree().1 == 0 {
                        Some(vec![])
                    } else {
                        None
                    },
                );
            }
            let pts = slice_points(&reduced, theta)
                .into_iter()
                .filter(|&g| q.evaluate(z1, g).norm() <= RESIDUAL_TOL * scale)
                .collect();
            (theta, Some(pts))
        })
        .collect();
    let mut skipped = Vec::new();
    let mut branches: Vec<Branch> = Vec::new();
    // Index of the branch each open continuation belongs to, and its last value.
    let mut open: Vec<(usize, C64)> = Vec::new();
    for (theta, pts) in columns {
        let Some(pts) = pts else {
            skipped.push(theta);
            continue;
        };
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        // With equal counts every open branch continues, however steep;
        // otherwise long jumps start a new branch.
        let jump = if open.len() == pts.len() {
            f64::INFINITY
        } else {
            MAX_JUMP
        };
        for (oi, &(_, last)) in open.iter().enumerate() {
            for (ri, &g) in pts.iter().enumerate() {
                let d = (g - last).norm();
                if d <= jump {
                    pairs.push((d, oi, ri));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut open_used = vec![false; open.len()];
        let mut root_used = vec![false; pts.len()];
        let mut next_open = Vec::new();
        for (i, &(d, oi, ri)) in pairs.iter().enumerate() {
            if open_used[oi] || root_used[ri] {
                continue;
            }
            let tie = pairs[i + 1..]
                .iter()
                .take_while(|p| p.0 - d <= TIE_TOL)
                .any(|p| (p.1 == oi && !root_used[p.2]) || (p.2 == ri && !open_used[p.1]));
            open_used[oi] = true;
            root_used[ri] = true;
            let b = &mut branches[open[oi].0];
            if tie {
                b.ambiguous_at.push(theta);
            }
            b.continuity_gap = b.continuity_gap.max(d);
            b.samples.push(BranchSample { theta, g: pts[ri] });
            next_open.push((open[oi].0, pts[ri]));
        }
        for (ri, &g) in pts.iter().enumerate() {
            if !root_used[ri] {
                branches.push(Branch {
                    alpha,
                    samples: vec![BranchSample { theta, g }],
                    continuity_gap: 0.0,
                    ambiguous_at: vec![],
                });
                next_open.push((branches.len() - 1, g));
            }
        }
        open = next_open;
    }
    Ok(LevelSet {
        alpha,
        branches,
        vertical_lines: vertical,
        horizontal_lines: horizontal,
        resolution,
        theta0,
        skipped,
        reduced,
        level_polynomial: q.clone(),
    })
}

/// Divides out every factor `z1 - tau` and `z2 - tau` with `|tau| = 1`.
///
/// `z1 - tau` divides `q` iff every column polynomial vanishes at `tau`,
/// so candidates are the unimodular roots of the lowest-degree nonzero
/// column.
pub fn split_line_factors(q: &BivariatePolynomial) -> (BivariatePolynomial, Vec<C64>, Vec<C64>) {
    let mut q = q.clone();
    let mut vertical = Vec::new();
    while let Some(tau) = line_candidate(&q, Orientation::Vertical) {
        q = q.div_linear_z1(tau).trimmed(1e-14);
        vertical.push(tau);
    }
    let mut horizontal = Vec::new();
    while let Some(tau) = line_candidate(&q, Orientation::Horizontal) {
        q = q.div_linear_z2(tau).trimmed(1e-14);
        horizontal.push(tau);
    }
    (q, vertical, horizontal)
}

fn line_candidate(q: &BivariatePolynomial, orientation: Orientation) -> Option<C64> {
    let q = match orientation {
        Orientation::Vertical => q.clone(),
        Orientation::Horizontal => q.swap_vars(),
    };
    let (n, m) = q.bidegree();
    if n == 0 || q.is_zero() {
        return None;
    }
    let column = (0..=m)
        .map(|k| UnivariatePolynomial::new((0..=n).map(|j| q.coeff(j, k)).collect()))
        .filter(|c| !c.is_zero() && c.max_norm() > 1e-12 * q.max_norm())
        .min_by_key(|c| c.degree())?;
    if column.degree() == 0 {
        return None;
    }
    column
        .roots()
        .ok()?
        .into_iter()
        .filter(|t| (t.norm() - 1.0).abs() < 1e-6)
        .map(|t| t / t.norm())
        .find(|&t| q.divides_linear(t))
}

/// Exceptional lines of `phi`: vertical lines `z1 = tau` on which
/// `z2 -> phi(tau, z2)` is a unimodular constant, and likewise horizontal.
///
/// By the maximum principle that happens iff `|phi(tau, 0)| = 1`, so the
/// zeros of `h(theta) = 1 - |phi(e^{i theta}, 0)|^2` are located on a scan
/// grid, refined by bisection on `h'`, and confirmed algebraically.
pub fn detect_lines(phi: &RationalInnerFunction, scan: usize) -> Vec<ExceptionalLine> {
    let mut out = scan_lines(phi, scan, Orientation::Vertical);
    out.extend(scan_lines(phi, scan, Orientation::Horizontal));
    out
}

fn scan_lines(
    phi: &RationalInnerFunction,
    scan: usize,
    orientation: Orientation,
) -> Vec<ExceptionalLine> {
    let zero = C64::new(0.0, 0.0);
    let point = |theta: f64| {
        let t = C64::from_polar(1.0, theta);
        match orientation {
            Orientation::Vertical => (t, zero),
            Orientation::Horizontal => (zero, t),
        }
    };
    let floor = 1e-12 * phi.denominator().l1_norm();
    let h = |theta: f64| {
        let (a, b) = point(theta);
        if phi.denominator().evaluate(a, b).norm() < floor {
            return f64::NAN;
        }
        1.0 - phi.value(a, b).norm_sqr()
    };
    let dh = |theta: f64| {
        let (a, b) = point(theta);
        let (f, d1, d2) = phi.eval_grad(a, b);
        let i = C64::new(0.0, 1.0);
        let df = match orientation {
            Orientation::Vertical => i * a * d1,
            Orientation::Horizontal => i * b * d2,
        };
        -2.0 * (f.conj() * df).re
    };
    let step = TAU / scan as f64;
    let values: Vec<f64> = (0..scan).map(|k| h(k as f64 * step)).collect();
    let mut out: Vec<ExceptionalLine> = Vec::new();
    for k in 0..scan {
        let v = values[k];
        let (l, r) = (values[(k + scan - 1) % scan], values[(k + 1) % scan]);
        if !(v.is_finite() && v < 1e-2 && v <= l && v <= r) {
            continue;
        }
        let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
        if !(dh(a) < 0.0 && dh(b) > 0.0) {
            continue;
        }
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if dh(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let tau = refine_line(phi, C64::from_polar(1.0, 0.5 * (a + b)), orientation);
        let (x, y) = point(tau.arg());
        let alpha = phi.value(x, y);
        if (alpha.norm() - 1.0).abs() > 1e-8 {
            continue;
        }
        let alpha = alpha / alpha.norm();
        let q = phi.level_polynomial(alpha);
        let divides = match orientation {
            Orientation::Vertical => q.divides_linear(tau),
            Orientation::Horizontal => q.divides_linear_z2(tau),
        };
        if divides && !out.iter().any(|l| (l.tau - tau).norm() < 1e-8) {
            out.push(ExceptionalLine {
                tau,
                orientation,
                alpha,
            });
        }
    }
    out
}

/// Sharpens an approximate line position.
///
/// On a vertical line `p~(tau, .)` and `p(tau, .)` are proportional, so
/// `tau` is a common root of the column minors `p~_k p_l - p~_l p_k`. That
/// root is typically multiple, of multiplicity `mu` equal to the size of
/// the computed root cluster, and is a simple root of the `(mu - 1)`-th
/// derivative, where Newton converges to full precision.
fn refine_line(phi: &RationalInnerFunction, tau0: C64, orientation: Orientation) -> C64 {
    let (p, pt) = match orientation {
        Orientation::Vertical => (phi.denominator().clone(), phi.numerator().clone()),
        Orientation::Horizontal => (phi.denominator().swap_vars(), phi.numerator().swap_vars()),
    };
    let (n, m) = p.bidegree();
    let column = |q: &BivariatePolynomial, k: usize| {
        UnivariatePolynomial::new((0..=n).map(|j| q.coeff(j, k)).collect())
    };
    let minor = (0..=m)
        .flat_map(|k| (k + 1..=m).map(move |l| (k, l)))
        .map(|(k, l)| {
            let (a, b, c, d) = (column(&pt, k), column(&p, l), column(&pt, l), column(&p, k));
            univariate_sub(&univariate_mul(&a, &b), &univariate_mul(&c, &d))
        })
        .max_by(|a, b| a.max_norm().total_cmp(&b.max_norm()));
    let Some(w) = minor else { return tau0 };
    let Ok(roots) = w.roots() else { return tau0 };
    let cluster: Vec<C64> = roots
        .into_iter()
        .filter(|r| (r - tau0).norm() < 1e-3)
        .collect();
    if cluster.is_empty() {
        return tau0;
    }
    let mut d = w;
    for _ in 1..cluster.len() {
        d = d.derivative();
    }
    let mut tau = cluster.iter().sum::<C64>() / cluster.len() as f64;
    for _ in 0..8 {
        let (v, dv) = d.eval_with_derivative(tau);
        if dv.norm() == 0.0 {
            break;
        }
        tau -= v / dv;
    }
    tau / tau.norm()
}

fn univariate_mul(a: &UnivariatePolynomial, b: &UnivariatePolynomial) -> UnivariatePolynomial {
    let mut out = vec![C64::new(0.0, 0.0); a.degree() + b.degree() + 1];
    for (i, x) in a.coeffs().iter().enumerate() {
        for (j, y) in b.coeffs().iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    UnivariatePolynomial::new(out)
}

fn univariate_sub(a: &UnivariatePolynomial, b: &UnivariatePolynomial) -> UnivariatePolynomial {
    let len = a.coeffs().len().max(b.coeffs().len());
    let get = |p: &UnivariatePolynomial, i: usize| p.coeffs().get(i).copied().unwrap_or_default();
    UnivariatePolynomial::new((0..len).map(|i| get(a, i) - get(b, i)).collect())
}

/// Slope `d(arg g)/d theta` of a branch at `theta`.
///
/// Centred differences at spacings `h` and `2h` are combined by Richardson
/// extrapolation; `|D1 - D2|` is the error estimate. Off-grid angles
/// interpolate linearly between the neighbouring samples.
pub fn branch_tangent(
    branch: &Branch,
    resolution: usize,
    theta: f64,
) -> Result<TangentEstimate, LevelSetError> {
    let s = &branch.samples;
    let h = TAU / resolution as f64;
    let n = s.len();
    if n < 5 {
        return Err(LevelSetError::NotInterior(theta));
    }
    let closed = n == resolution && (s[0].g - s[n - 1].g).norm() <= MAX_JUMP;
    let offset = |i: usize| (s[i].theta - s[0].theta).rem_euclid(TAU);
    let t = (theta - s[0].theta).rem_euclid(TAU);
    let i0 = (0..n).rev().find(|&i| offset(i) <= t + 1e-12).unwrap_or(0);
    let frac = (t - offset(i0)) / h;
    let at = |i: isize| -> Option<&BranchSample> {
        if closed {
            Some(&s[i.rem_euclid(n as isize) as usize])
        } else if i >= 0 && (i as usize) < n {
            Some(&s[i as usize])
        } else {
            None
        }
    };
    let estimate = |i: isize| -> Option<(f64, f64)> {
        let c = at(i)?;
        for k in [-2isize, -1, 1, 2] {
            let o = at(i + k)?;
            let gap = (o.theta - c.theta).rem_euclid(TAU);
            let want = (k as f64 * h).rem_euclid(TAU);
            if (gap - want).abs() > 1e-9 && (gap - want).abs() < TAU - 1e-9 {
                return None;
            }
        }
        let darg = |k: isize| (at(i + k).unwrap().g / c.g).arg();
        let d1 = (darg(1) - darg(-1)) / (2.0 * h);
        let d2 = (darg(2) - darg(-2)) / (4.0 * h);
        Some(((4.0 * d1 - d2) / 3.0, (d1 - d2).abs()))
    };
    let (slope, error) = if frac.abs() < 1e-9 {
        estimate(i0 as isize).ok_or(LevelSetError::NotInterior(theta))?
    } else {
        let a = estimate(i0 as isize).ok_or(LevelSetError::NotInterior(theta))?;
        let b = estimate(i0 as isize + 1).ok_or(LevelSetError::NotInterior(theta))?;
        // Linear interpolation error is frac (1 - frac) / 2 times the second
        // difference of the slope.
        let curvature = match (estimate(i0 as isize - 1), estimate(i0 as isize + 2)) {
            (Some(l), _) => (l.0 - 2.0 * a.0 + b.0).abs(),
            (None, Some(r)) => (a.0 - 2.0 * b.0 + r.0).abs(),
            (None, None) => (a.0 - b.0).abs(),
        };
        (
            a.0 + frac * (b.0 - a.0),
            a.1.max(b.1) + 0.5 * frac * (1.0 - frac) * curvature,
        )
    };
    if error > 1e-3 {
        // The Richardson error falls like h^2.
        let required = (resolution as f64 * (error / 1e-3).sqrt() * 2.0).ceil() as usize;
        return Err(LevelSetError::RefineResolution { required, error });
    }
    Ok(TangentEstimate { slope, error })
}
