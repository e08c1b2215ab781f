//! Rational inner functions `phi = p~/p` on the bidisc and polynomial
//! smooth symbols.

use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::poly::{BivariatePolynomial, DdComplex, StabilityReport, C64};

fn torus_dd(theta: TwoFloat) -> DdComplex {
    let (s, c) = theta.sin_cos();
    DdComplex::new(c, s)
}

fn dd_to_c64(z: DdComplex) -> C64 {
    C64::new(z.re.hi() + z.re.lo(), z.im.hi() + z.im.lo())
}

pub const STABILITY_ANGULAR: usize = 512;
pub const STABILITY_RADIAL: usize = 16;
pub const STABILITY_TOL: f64 = 1e-6;
pub const SINGULARITY_GRID: usize = 1024;
pub const INNERNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Error)]
pub enum RifError {
    #[error("denominator is not stable: root of modulus {} found", .0.min_modulus)]
    StabilityViolation(StabilityReport),
    #[error("|phi| = {modulus} at torus point {point:?}")]
    InnernessViolation { point: [C64; 2], modulus: f64 },
    #[error("denominator vanishes at {z:?}")]
    NearPole { z: [C64; 2] },
    #[error("kappa iterate index {n} exceeds the degree guard of 6")]
    DegreeGuard { n: usize },
    #[error("smooth symbol leaves the closed disc: |psi| = {modulus} at {point:?}")]
    NotSelfMap { point: [C64; 2], modulus: f64 },
    #[error("unknown builtin symbol '{0}'")]
    UnknownBuiltin(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub location: [C64; 2],
    pub nontangential_value: C64,
    /// `max(|p|, |p~|)` at the location.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NontangentialValue {
    pub value: C64,
    pub error_estimate: f64,
    /// False when the extrapolation error exceeds `1e-4`.
    pub converged: bool,
}

/// A Newton candidate that did not converge to a common zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub seed: [f64; 2],
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingularitySearch {
    pub singularities: Vec<Singularity>,
    pub dropped: Vec<DroppedCandidate>,
    pub resolution: usize,
}

#[derive(Debug)]
pub struct RationalInnerFunction {
    p: BivariatePolynomial,
    pt: BivariatePolynomial,
    singularities: OnceLock<Vec<Singularity>>,
}

impl Clone for RationalInnerFunction {
    fn clone(&self) -> Self {
        let out = RationalInnerFunction {
            p: self.p.clone(),
            pt: self.pt.clone(),
            singularities: OnceLock::new(),
        };
        if let Some(s) = self.singularities.get() {
            let _ = out.singularities.set(s.clone());
        }
        out
    }
}

/// Builds `p~/p` after a sampled stability check and an innerness spot check.
pub fn make_rif(p: BivariatePolynomial) -> Result<RationalInnerFunction, RifError> {
    let report = p.is_stable(STABILITY_ANGULAR, STABILITY_RADIAL, STABILITY_TOL);
    if !report.consistent {
        return Err(RifError::StabilityViolation(report));
    }
    let f = RationalInnerFunction {
        pt: p.reflect(),
        p,
        singularities: OnceLock::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1ee7);
    let floor = 1e-6 * f.p.l1_norm();
    for _ in 0..256 {
        let z = [
            C64::from_polar(1.0, rng.gen_range(0.0..TAU)),
            C64::from_polar(1.0, rng.gen_range(0.0..TAU)),
        ];
        let d = f.p.evaluate(z[0], z[1]);
        if d.norm() < floor {
            continue;
        }
        let modulus = (f.pt.evaluate(z[0], z[1]) / d).norm();
        if (modulus - 1.0).abs() > INNERNESS_TOL {
            return Err(RifError::InnernessViolation { point: z, modulus });
        }
    }
    Ok(f)
}

impl RationalInnerFunction {
    pub fn denominator(&self) -> &BivariatePolynomial {
        &self.p
    }

    pub fn numerator(&self) -> &BivariatePolynomial {
        &self.pt
    }

    pub fn bidegree(&self) -> (usize, usize) {
        self.p.bidegree()
    }

    /// The same function with `z1` and `z2` exchanged.
    pub fn swapped(&self) -> RationalInnerFunction {
        RationalInnerFunction {
            p: self.p.swap_vars(),
            pt: self.pt.swap_vars(),
            singularities: OnceLock::new(),
        }
    }

    /// `p~(z)/p(z)`; meant for points of the open bidisc.
    pub fn eval(&self, z1: C64, z2: C64) -> Result<C64, RifError> {
        let d = self.p.evaluate(z1, z2);
        if d.norm() < 1e-300 {
            return Err(RifError::NearPole { z: [z1, z2] });
        }
        Ok(self.pt.evaluate(z1, z2) / d)
    }

    /// Unchecked quotient, for hot loops over interior points.
    #[inline]
    pub fn value(&self, z1: C64, z2: C64) -> C64 {
        self.pt.evaluate(z1, z2) / self.p.evaluate(z1, z2)
    }

    /// `(phi, dphi/dz1, dphi/dz2)`.
    pub fn eval_grad(&self, z1: C64, z2: C64) -> (C64, C64, C64) {
        let (d, d1, d2) = self.p.eval_grad(z1, z2);
        let (n, n1, n2) = self.pt.eval_grad(z1, z2);
        let dd = d * d;
        (n / d, (n1 * d - n * d1) / dd, (n2 * d - n * d2) / dd)
    }

    /// `p~ - alpha p`; its zero set on the torus is the level set of `alpha`.
    pub fn level_polynomial(&self, alpha: C64) -> BivariatePolynomial {
        self.pt.sub(&self.p.scale(alpha))
    }

    /// Cached singularity list at the default grid resolution.
    pub fn singularities(&self) -> &[Singularity] {
        self.singularities
            .get_or_init(|| self.find_singularities(SINGULARITY_GRID).singularities)
    }

    /// Common zeros of `p` and `p~` on the torus.
    ///
    /// Local minima of `|p|` on a `resolution x resolution` torus grid seed
    /// a damped Newton iteration on `(Re p, Im p)` in the angles `(s, t)`.
    pub fn find_singularities(&self, resolution: usize) -> SingularitySearch {
        let p = &self.p;
        let scale = p.l1_norm().max(f64::MIN_POSITIVE);
        let (n, m) = p.bidegree();
        if n + m == 0 {
            return SingularitySearch {
                singularities: vec![],
                dropped: vec![],
                resolution,
            };
        }
        let h = TAU / resolution as f64;
        let grid: Vec<f64> = (0..resolution)
            .into_par_iter()
            .flat_map_iter(|a| {
                let z1 = C64::from_polar(1.0, a as f64 * h);
                (0..resolution)
                    .map(move |b| p.evaluate(z1, C64::from_polar(1.0, b as f64 * h)).norm())
            })
            .collect();
        let at = |a: usize, b: usize| grid[(a % resolution) * resolution + (b % resolution)];
        let grad_bound: f64 = (0..=n)
            .flat_map(|j| (0..=m).map(move |k| (j, k)))
            .map(|(j, k)| p.coeff(j, k).norm() * (j + k) as f64)
            .sum();
        let seed_tol = (1e-3 * scale).max(2.0 * h * grad_bound);
        let mut seeds = Vec::new();
        for a in 0..resolution {
            for b in 0..resolution {
                let v = at(a, b);
                if v > seed_tol {
                    continue;
                }
                let is_min = (0..3).all(|da| {
                    (0..3).all(|db| {
                        (da == 1 && db == 1)
                            || v <= at(a + resolution + da - 1, b + resolution + db - 1)
                    })
                });
                if is_min {
                    seeds.push([a as f64 * h, b as f64 * h]);
                }
            }
        }
        let refined: Vec<Result<([f64; 2], f64), DroppedCandidate>> = seeds
            .par_iter()
            .map(|&s0| self.newton_torus(s0, scale))
            .collect();
        let mut found: Vec<Singularity> = Vec::new();
        let mut dropped = Vec::new();
        for r in refined {
            match r {
                Ok(([s, t], residual)) => {
                    let loc = [C64::from_polar(1.0, s), C64::from_polar(1.0, t)];
                    let dup = found.iter().any(|f| {
                        (f.location[0] - loc[0])
                            .norm()
                            .max((f.location[1] - loc[1]).norm())
                            < 1e-6
                    });
                    if !dup {
                        let value = self.nontangential_value(loc).value;
                        found.push(Singularity {
                            location: loc,
                            nontangential_value: value,
                            residual,
                        });
                    }
                }
                Err(d) => dropped.push(d),
            }
        }
        found.sort_by(|x, y| {
            let key = |s: &Singularity| (s.location[0].arg(), s.location[1].arg());
            let (a, b) = (key(x), key(y));
            a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
        });
        SingularitySearch {
            singularities: found,
            dropped,
            resolution,
        }
    }

    fn newton_torus(
        &self,
        seed: [f64; 2],
        scale: f64,
    ) -> Result<([f64; 2], f64), DroppedCandidate> {
        // Angles are carried in double-double: near a high-order singularity
        // |p| falls below the rounding error of a double torus point.
        let f = |x: [TwoFloat; 2]| {
            let (z1, z2) = (torus_dd(x[0]), torus_dd(x[1]));
            let v = self.p.evaluate_dd(z1, z2);
            let (z1, z2) = (dd_to_c64(z1), dd_to_c64(z2));
            let (_, d1, d2) = self.p.eval_grad(z1, z2);
            let i = C64::new(0.0, 1.0);
            (dd_to_c64(v), i * z1 * d1, i * z2 * d2)
        };
        let mut x = [TwoFloat::from(seed[0]), TwoFloat::from(seed[1])];
        let (mut v, mut ds, mut dt) = f(x);
        for _ in 0..200 {
            if v.norm() <= 1e-30 * scale {
                break;
            }
            let det = ds.re * dt.im - dt.re * ds.im;
            let jn = ds.norm_sqr() + dt.norm_sqr();
            let step = if det.abs() > 1e-14 * jn {
                [
                    (dt.im * v.re - dt.re * v.im) / det,
                    (ds.re * v.im - ds.im * v.re) / det,
                ]
            } else {
                // Levenberg-Marquardt step when the Jacobian is numerically rank one.
                let mu = 1e-10 * jn;
                let (a, b, c) = (
                    ds.norm_sqr() + mu,
                    ds.re * dt.re + ds.im * dt.im,
                    dt.norm_sqr() + mu,
                );
                let (g0, g1) = (ds.re * v.re + ds.im * v.im, dt.re * v.re + dt.im * v.im);
                let dd = a * c - b * b;
                [(c * g0 - b * g1) / dd, (a * g1 - b * g0) / dd]
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = [x[0] - lambda * step[0], x[1] - lambda * step[1]];
                let nv = f(cand);
                if nv.0.norm() < v.norm() {
                    x = cand;
                    (v, ds, dt) = nv;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if v.norm() > 1e-28 * scale {
            let j = Matrix2::new(ds.re, dt.re, ds.im, dt.im);
            let svd = j.svd(true, true);
            let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
            let (big, small) = if svd.singular_values[0] >= svd.singular_values[1] {
                (0, 1)
            } else {
                (1, 0)
            };
            if svd.singular_values[small] < 1e-3 * svd.singular_values[big] {
                x = self.minimize_along_kernel(
                    x,
                    [vt[(small, 0)], vt[(small, 1)]],
                    [vt[(big, 0)], vt[(big, 1)]],
                    [u[(0, big)], u[(1, big)]],
                    svd.singular_values[big],
                );
                v = f(x).0;
            }
        }
        let residual = v.norm();
        let x = [x[0].hi() + x[0].lo(), x[1].hi() + x[1].lo()];
        if residual <= 1e-8 * scale.max(1.0) {
            // |p~| = |p| on the torus, so this is also the numerator residual.
            Ok(([x[0].rem_euclid(TAU), x[1].rem_euclid(TAU)], residual))
        } else {
            Err(DroppedCandidate { seed, residual })
        }
    }

    /// Minimises `|p|` along the curve through `x0` on which the component
    /// of `p` in the direction `out` vanishes. Used when the torus Jacobian
    /// of `p` has rank one at the singularity, where Newton stalls.
    fn minimize_along_kernel(
        &self,
        x0: [TwoFloat; 2],
        ker: [f64; 2],
        nor: [f64; 2],
        out: [f64; 2],
        sigma: f64,
    ) -> [TwoFloat; 2] {
        let point = |u: f64, w: f64| {
            let (u, w) = (TwoFloat::from(u), TwoFloat::from(w));
            [
                x0[0] + u * ker[0] + w * nor[0],
                x0[1] + u * ker[1] + w * nor[1],
            ]
        };
        let eval = |x: [TwoFloat; 2]| dd_to_c64(self.p.evaluate_dd(torus_dd(x[0]), torus_dd(x[1])));
        let on_curve = |u: f64| {
            let mut w = 0.0;
            for _ in 0..8 {
                let v = eval(point(u, w));
                w -= (out[0] * v.re + out[1] * v.im) / sigma;
            }
            let x = point(u, w);
            (x, eval(x).norm())
        };
        let h0 = on_curve(0.0).1;
        let mut step = 1e-9;
        let dir = if on_curve(step).1 < on_curve(-step).1 {
            1.0
        } else {
            -1.0
        };
        if on_curve(dir * step).1 >= h0 {
            return on_curve(0.0).0;
        }
        while step < 1.0 && on_curve(dir * 2.0 * step).1 < on_curve(dir * step).1 {
            step *= 2.0;
        }
        let (mut a, mut b) = if dir > 0.0 {
            (0.0, 2.0 * step)
        } else {
            (-2.0 * step, 0.0)
        };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        while b - a > 1e-12 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if on_curve(c).1 < on_curve(d).1 {
                b = d;
            } else {
                a = c;
            }
        }
        on_curve(0.5 * (a + b)).0
    }

    /// Radial limit `lim phi(r w1, r w2)` as `r -> 1`.
    ///
    /// Away from the zero set of `p` the boundary value is returned
    /// directly; otherwise Richardson extrapolation over `r = 1 - 2^-k`,
    /// `k = 6..=16`.
    pub fn nontangential_value(&self, w: [C64; 2]) -> NontangentialValue {
        let d = self.p.evaluate(w[0], w[1]);
        if d.norm() > 1e-6 * self.p.l1_norm() {
            return NontangentialValue {
                value: self.pt.evaluate(w[0], w[1]) / d,
                error_estimate: 0.0,
                converged: true,
            };
        }
        let ks: Vec<i32> = (6..=16).collect();
        let mut table: Vec<Vec<C64>> = Vec::new();
        let mut best = (C64::new(f64::NAN, 0.0), f64::INFINITY);
        for (i, &k) in ks.iter().enumerate() {
            let r = 1.0 - 2f64.powi(-k);
            let mut row = vec![self.value(w[0] * r, w[1] * r)];
            for j in 1..=i {
                let f = 2f64.powi(j as i32);
                let v = (row[j - 1] * f - table[i - 1][j - 1]) / (f - 1.0);
                row.push(v);
            }
            if i >= 1 {
                for j in 0..i {
                    let err = (row[j] - table[i - 1][j]).norm();
                    if err < best.1 {
                        best = (row[j], err);
                    }
                }
            }
            table.push(row);
        }
        NontangentialValue {
            value: best.0,
            error_estimate: best.1,
            converged: best.1 <= 1e-4,
        }
    }
}

/// `kappa(z1, z2) = (2 z1 z2 - z1 - z2) / (2 - z1 - z2)`.
pub fn kappa() -> RationalInnerFunction {
    make_rif(kappa_denominator()).expect("2 - z1 - z2 is stable")
}

pub fn kappa_denominator() -> BivariatePolynomial {
    BivariatePolynomial::from_real_rows(&[&[2.0, -1.0], &[-1.0, 0.0]])
}

/// The Agler-McCarthy-Young function with denominator `4 - 3z1 - z2 - z1 z2 + z1^2`.
pub fn amy() -> RationalInnerFunction {
    make_rif(amy_denominator()).expect("AMY denominator is stable")
}

pub fn amy_denominator() -> BivariatePolynomial {
    BivariatePolynomial::from_real_rows(&[&[4.0, -1.0], &[-3.0, -1.0], &[1.0, 0.0]])
}

/// `phi_0 = kappa`, `phi_n(z) = kappa(z1, -phi_{n-1}(z))`, reduced to
/// lowest terms and renormalised to the form `p~/p`.
pub fn kappa_iterate(n: usize) -> Result<RationalInnerFunction, RifError> {
    if n > 6 {
        return Err(RifError::DegreeGuard { n });
    }
    let one = C64::new(1.0, 0.0);
    let z1 = BivariatePolynomial::z1();
    let c = BivariatePolynomial::constant;
    let mut den = kappa_denominator();
    let mut num = den.reflect();
    for _ in 0..n {
        // kappa(z1, -N/D) = ((1 - 2 z1) N - z1 D) / ((2 - z1) D + N)
        let new_num = c(one)
            .sub(&z1.scale(C64::new(2.0, 0.0)))
            .mul(&num)
            .sub(&z1.mul(&den));
        let new_den = c(C64::new(2.0, 0.0)).sub(&z1).mul(&den).add(&num);
        (num, den) = cancel_unimodular_linear_factors(new_num, new_den);
    }
    let reflected = den.reflect();
    let (j, k) = (0..=reflected.bidegree().0)
        .flat_map(|j| (0..=reflected.bidegree().1).map(move |k| (j, k)))
        .max_by(|a, b| {
            reflected
                .coeff(a.0, a.1)
                .norm()
                .total_cmp(&reflected.coeff(b.0, b.1).norm())
        })
        .expect("nonempty grid");
    let lambda = num.coeff(j, k) / reflected.coeff(j, k);
    let mut rot = C64::from_polar(1.0, -lambda.arg() / 2.0);
    if (den.coeff(0, 0) * rot).re < 0.0 {
        rot = -rot;
    }
    let den = den.scale(rot / den.max_norm()).trimmed(1e-13);
    make_rif(den)
}

fn cancel_unimodular_linear_factors(
    mut num: BivariatePolynomial,
    mut den: BivariatePolynomial,
) -> (BivariatePolynomial, BivariatePolynomial) {
    while let Ok(candidates) = den.slice_z2(C64::new(0.0, 0.0)).roots() {
        let tau = candidates
            .into_iter()
            .filter(|t| (t.norm() - 1.0).abs() < 1e-6)
            .map(|t| t / t.norm())
            .find(|&t| den.divides_linear(t) && num.divides_linear(t));
        match tau {
            Some(t) => {
                den = den.div_linear_z1(t).trimmed(1e-14);
                num = num.div_linear_z1(t).trimmed(1e-14);
            }
            None => break,
        }
    }
    (num, den)
}

/// Builtin names: `kappa`, `amy`, `kappa_iterate:<n>`.
pub fn builtin(name: &str) -> Result<RationalInnerFunction, RifError> {
    match name {
        "kappa" => Ok(kappa()),
        "amy" => Ok(amy()),
        _ => {
            let n = name
                .strip_prefix("kappa_iterate:")
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| RifError::UnknownBuiltin(name.to_string()))?;
            kappa_iterate(n)
        }
    }
}

/// A polynomial self-map of the disc used as the smooth coordinate of a
/// mixed symbol.
#[derive(Clone, Debug)]
pub struct SmoothSymbol {
    psi: BivariatePolynomial,
    boundary_contact: Vec<[C64; 2]>,
}

pub const CONTACT_GRID: usize = 128;

impl SmoothSymbol {
    /// Verifies `|psi| <= 1` on a torus grid (the maximum over the closed
    /// bidisc is attained there) and records grid points where `|psi| = 1`.
    pub fn new(psi: BivariatePolynomial) -> Result<SmoothSymbol, RifError> {
        let h = TAU / CONTACT_GRID as f64;
        let mut contact = Vec::new();
        for a in 0..CONTACT_GRID {
            for b in 0..CONTACT_GRID {
                let z = [
                    C64::from_polar(1.0, a as f64 * h),
                    C64::from_polar(1.0, b as f64 * h),
                ];
                let modulus = psi.evaluate(z[0], z[1]).norm();
                if modulus > 1.0 + 1e-10 {
                    return Err(RifError::NotSelfMap { point: z, modulus });
                }
                if modulus >= 1.0 - 1e-9 {
                    contact.push(z);
                }
            }
        }
        Ok(SmoothSymbol {
            psi,
            boundary_contact: contact,
        })
    }

    /// `(w1 z1 + w2 z2) / (w1 + w2)` for positive weights.
    pub fn weighted_mean(w1: f64, w2: f64) -> Result<SmoothSymbol, RifError> {
        let s = w1 + w2;
        Self::new(BivariatePolynomial::from_real_rows(&[
            &[0.0, w2 / s],
            &[w1 / s, 0.0],
        ]))
    }

    pub fn polynomial(&self) -> &BivariatePolynomial {
        &self.psi
    }

    /// Torus grid points (on a `CONTACT_GRID` square grid) where `|psi| = 1`.
    pub fn boundary_contact(&self) -> &[[C64; 2]] {
        &self.boundary_contact
    }

    pub fn value(&self, z1: C64, z2: C64) -> C64 {
        self.psi.evaluate(z1, z2)
    }
}

/// One coordinate of a symbol `Phi = (f1, f2)`: a rotated RIF or a rotated
/// smooth polynomial map.
#[derive(Clone, Debug)]
pub enum Coordinate {
    Rif {
        f: Arc<RationalInnerFunction>,
        lambda: C64,
    },
    Smooth {
        f: Arc<SmoothSymbol>,
        lambda: C64,
    },
}

impl Coordinate {
    pub fn rif(f: RationalInnerFunction) -> Self {
        Coordinate::Rif {
            f: Arc::new(f),
            lambda: C64::new(1.0, 0.0),
        }
    }

    pub fn smooth(f: SmoothSymbol) -> Self {
        Coordinate::Smooth {
            f: Arc::new(f),
            lambda: C64::new(1.0, 0.0),
        }
    }

    pub fn rotated(&self, mu: C64) -> Self {
        match self {
            Coordinate::Rif { f, lambda } => Coordinate::Rif {
                f: f.clone(),
                lambda: lambda * mu,
            },
            Coordinate::Smooth { f, lambda } => Coordinate::Smooth {
                f: f.clone(),
                lambda: lambda * mu,
            },
        }
    }

    pub fn lambda(&self) -> C64 {
        match self {
            Coordinate::Rif { lambda, .. } | Coordinate::Smooth { lambda, .. } => *lambda,
        }
    }

    pub fn is_rif(&self) -> bool {
        matches!(self, Coordinate::Rif { .. })
    }

    pub fn as_rif(&self) -> Option<&RationalInnerFunction> {
        match self {
            Coordinate::Rif { f, .. } => Some(f),
            Coordinate::Smooth { .. } => None,
        }
    }

    #[inline]
    pub fn value(&self, z1: C64, z2: C64) -> C64 {
        match self {
            Coordinate::Rif { f, lambda } => lambda * f.value(z1, z2),
            Coordinate::Smooth { f, lambda } => lambda * f.value(z1, z2),
        }
    }

    pub fn eval_grad(&self, z1: C64, z2: C64) -> (C64, C64, C64) {
        let (l, (v, a, b)) = match self {
            Coordinate::Rif { f, lambda } => (*lambda, f.eval_grad(z1, z2)),
            Coordinate::Smooth { f, lambda } => (*lambda, f.polynomial().eval_grad(z1, z2)),
        };
        (l * v, l * a, l * b)
    }

    /// Boundary value at a torus point (nontangential limit for a RIF).
    pub fn boundary_value(&self, w: [C64; 2]) -> C64 {
        match self {
            Coordinate::Rif { f, lambda } => lambda * f.nontangential_value(w).value,
            Coordinate::Smooth { f, lambda } => lambda * f.value(w[0], w[1]),
        }
    }

    /// Polynomial whose torus zero set is the level set `{f = alpha}`.
    pub fn level_polynomial(&self, alpha: C64) -> BivariatePolynomial {
        match self {
            Coordinate::Rif { f, lambda } => f.level_polynomial(alpha / lambda),
            Coordinate::Smooth { f, lambda } => f
                .polynomial()
                .sub(&BivariatePolynomial::constant(alpha / lambda)),
        }
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        match self {
            Coordinate::Rif { f, lambda } => f
                .singularities()
                .iter()
                .map(|s| Singularity {
                    nontangential_value: s.nontangential_value * lambda,
                    ..*s
                })
                .collect(),
            Coordinate::Smooth { .. } => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn kappa_closed(z1: C64, z2: C64) -> C64 {
        (z1 * z2 * 2.0 - z1 - z2) / (c(2.0, 0.0) - z1 - z2)
    }

    fn random_interior(rng: &mut ChaCha8Rng) -> (C64, C64) {
        let mut d =
            || C64::from_polar(rng.gen_range(0.0..0.999f64).sqrt(), rng.gen_range(0.0..TAU));
        (d(), d())
    }

    #[test]
    fn make_rif_examples() {
        let k = kappa();
        assert_eq!(
            k.numerator(),
            &BivariatePolynomial::from_real_rows(&[&[0.0, -1.0], &[-1.0, 2.0]])
        );
        let a = amy();
        assert_eq!(a.bidegree(), (2, 1));
        let one = make_rif(BivariatePolynomial::constant(c(1.0, 0.0))).unwrap();
        assert_eq!(one.eval(c(0.3, 0.1), c(-0.2, 0.4)).unwrap(), c(1.0, 0.0));
        assert!(one.find_singularities(64).singularities.is_empty());
        let unstable = BivariatePolynomial::from_real_rows(&[&[-0.5], &[1.0]]);
        assert!(matches!(
            make_rif(unstable),
            Err(RifError::StabilityViolation(_))
        ));
    }

    #[test]
    fn eval_examples() {
        let k = kappa();
        assert_eq!(k.eval(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        for t in [-0.9, -0.3, 0.2, 0.75] {
            assert!((k.eval(c(t, 0.0), c(t, 0.0)).unwrap() - c(-t, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn eval_reproduces_kappa_closed_form() {
        let k = kappa();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (z1, z2) = random_interior(&mut rng);
            assert!((k.eval(z1, z2).unwrap() - kappa_closed(z1, z2)).norm() <= 1e-14);
        }
    }

    #[test]
    fn amy_is_kappa_composed_with_kappa() {
        // phi_AMY(z) = kappa(z1, +kappa(z1, z2)); the minus-sign composition
        // differs from it by O(1).
        let a = amy();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst_minus: f64 = 0.0;
        for _ in 0..1000 {
            let (z1, z2) = random_interior(&mut rng);
            let v = a.eval(z1, z2).unwrap();
            assert!((v - kappa_closed(z1, kappa_closed(z1, z2))).norm() <= 1e-12);
            worst_minus = worst_minus.max((v - kappa_closed(z1, -kappa_closed(z1, z2))).norm());
        }
        assert!(worst_minus > 0.5);
    }

    #[test]
    fn eval_grad_matches_difference_quotient() {
        let a = amy();
        let (z1, z2) = (c(0.2, -0.3), c(-0.4, 0.1));
        let (v, d1, d2) = a.eval_grad(z1, z2);
        let h = 1e-6;
        let fd1 = (a.value(z1 + h, z2) - a.value(z1 - h, z2)) / (2.0 * h);
        let fd2 = (a.value(z1, z2 + h) - a.value(z1, z2 - h)) / (2.0 * h);
        assert!((v - a.value(z1, z2)).norm() < 1e-15);
        assert!((d1 - fd1).norm() < 1e-8 && (d2 - fd2).norm() < 1e-8);
    }

    #[test]
    fn singularities_of_examples() {
        for f in [kappa(), amy()] {
            let s = f.singularities();
            assert_eq!(s.len(), 1, "{s:?}");
            assert!((s[0].location[0] - c(1.0, 0.0)).norm() < 1e-7);
            assert!((s[0].location[1] - c(1.0, 0.0)).norm() < 1e-7);
            assert!(s[0].residual <= 1e-8);
            assert!((s[0].nontangential_value - c(-1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn singularity_detection_is_stable_under_grid_doubling() {
        for f in [kappa(), amy(), kappa_iterate(2).unwrap()] {
            let a = f.find_singularities(512).singularities;
            let b = f.find_singularities(1024).singularities;
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                let d = (x.location[0] - y.location[0])
                    .norm()
                    .max((x.location[1] - y.location[1]).norm());
                assert!(d < 1e-6, "{d}");
            }
        }
    }

    #[test]
    fn nontangential_values() {
        let one = c(1.0, 0.0);
        let k = kappa();
        let v = k.nontangential_value([one, one]);
        assert!(v.converged && (v.value + 1.0).norm() < 1e-10);
        let v = amy().nontangential_value([one, one]);
        assert!(v.converged && (v.value + 1.0).norm() < 1e-8, "{v:?}");
        let v = k.nontangential_value([-one, -one]);
        assert!((v.value - one).norm() < 1e-15);
        let w = [C64::from_polar(1.0, 2.0), C64::from_polar(1.0, -0.7)];
        let v = amy().nontangential_value(w);
        let direct =
            amy().numerator().evaluate(w[0], w[1]) / amy().denominator().evaluate(w[0], w[1]);
        assert!((v.value - direct).norm() < 1e-10);
    }

    #[test]
    fn innerness_and_schwarz_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in [kappa(), amy(), kappa_iterate(3).unwrap()] {
            let mut checked = 0;
            while checked < 1000 {
                let w = [
                    C64::from_polar(1.0, rng.gen_range(0.0..TAU)),
                    C64::from_polar(1.0, rng.gen_range(0.0..TAU)),
                ];
                let near = f.singularities().iter().any(|s| {
                    (s.location[0] - w[0])
                        .norm()
                        .max((s.location[1] - w[1]).norm())
                        < 0.1
                });
                if near {
                    continue;
                }
                let v = f.numerator().evaluate(w[0], w[1]) / f.denominator().evaluate(w[0], w[1]);
                assert!((v.norm() - 1.0).abs() <= 1e-10);
                checked += 1;
            }
            for _ in 0..1000 {
                let (z1, z2) = random_interior(&mut rng);
                assert!(f.eval(z1, z2).unwrap().norm() < 1.0);
            }
        }
    }

    #[test]
    fn kappa_iterate_examples() {
        let k0 = kappa_iterate(0).unwrap();
        let k = kappa();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (z1, z2) = random_interior(&mut rng);
            assert!((k0.value(z1, z2) - k.value(z1, z2)).norm() < 1e-15);
        }
        let k1 = kappa_iterate(1).unwrap();
        for _ in 0..1000 {
            let (z1, z2) = random_interior(&mut rng);
            let want = kappa_closed(z1, -kappa_closed(z1, z2));
            assert!((k1.value(z1, z2) - want).norm() < 1e-12);
        }
        assert!(matches!(
            kappa_iterate(7),
            Err(RifError::DegreeGuard { n: 7 })
        ));
    }

    #[test]
    fn kappa_iterates_match_hand_derived_closed_form() {
        // p_n = 2^(n+1) - z1 - (2^(n+1) - 1) z2 up to a positive factor.
        for n in 0..=6usize {
            let f = kappa_iterate(n).unwrap();
            assert_eq!(f.bidegree(), (1, 1));
            let a = 2f64.powi(n as i32 + 1);
            let want = BivariatePolynomial::from_real_rows(&[&[a, 1.0 - a], &[-1.0, 0.0]]);
            let got = f.denominator();
            let s = got.coeff(0, 0).re / a;
            for j in 0..=1 {
                for k in 0..=1 {
                    assert!(
                        (got.coeff(j, k) - want.coeff(j, k) * s).norm() < 1e-12,
                        "n={n}"
                    );
                }
            }
            // phi_n + 1 = 2^(n+1) (1 - z1)(1 - z2) / p_n
            let (z1, z2) = (c(0.3, 0.4), c(-0.5, 0.2));
            let lhs = f.value(z1, z2) + 1.0;
            let rhs = (c(1.0, 0.0) - z1) * (c(1.0, 0.0) - z2) * a / want.evaluate(z1, z2);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn recursion_composes_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            let prev = kappa_iterate(n - 1).unwrap();
            let cur = kappa_iterate(n).unwrap();
            for _ in 0..200 {
                let (z1, z2) = random_interior(&mut rng);
                let want = kappa_closed(z1, -prev.value(z1, z2));
                assert!((cur.value(z1, z2) - want).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn builtin_names() {
        assert_eq!(builtin("kappa").unwrap().bidegree(), (1, 1));
        assert_eq!(builtin("amy").unwrap().bidegree(), (2, 1));
        assert!(builtin("kappa_iterate:2").is_ok());
        assert!(matches!(builtin("nope"), Err(RifError::UnknownBuiltin(_))));
    }

    #[test]
    fn smooth_symbol_contact_set() {
        let psi = SmoothSymbol::weighted_mean(1.0, 2.0).unwrap();
        assert_eq!(psi.boundary_contact().len(), CONTACT_GRID);
        assert!(psi
            .boundary_contact()
            .iter()
            .all(|z| (z[0] - z[1]).norm() < 1e-12));
        let big = BivariatePolynomial::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(
            SmoothSymbol::new(big),
            Err(RifError::NotSelfMap { .. })
        ));
    }

    #[test]
    fn coordinate_rotation_shifts_level_values() {
        let k = Coordinate::rif(kappa()).rotated(c(-1.0, 0.0));
        let (z1, z2) = (c(0.1, 0.2), c(0.3, -0.1));
        assert!((k.value(z1, z2) + kappa_closed(z1, z2)).norm() < 1e-15);
        // {-kappa = 1} is {kappa = -1}.
        let q = k.level_polynomial(c(1.0, 0.0));
        assert!(q.divides_linear(c(1.0, 0.0)));
        assert!((k.singularities()[0].nontangential_value - c(1.0, 0.0)).norm() < 1e-8);
    }
}
