//! Weighted Bergman volumes of Carleson-box preimages.
//!
//! The measure on each disc factor is `dV_beta = (1 - |z|^2)^beta dA / pi`,
//! so `V_beta(D) = 1 / (beta + 1)`. Preimage volumes are estimated by
//! importance sampling from a mixture of the global measure and a few
//! windows concentrated near the expected hotspots; the mixture density is
//! exact everywhere, so windows only change the variance, never the mean.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{ols, wls, LinearFit};
use crate::levelset::{Branch, Orientation};
use crate::poly::C64;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const MIN_SAMPLES: usize = 10_000;
pub const CHUNK: usize = 65_536;
/// Mixture weight of the global component.
pub const GLOBAL_WEIGHT: f64 = 0.2;
/// Window radius as a multiple of the box radius.
pub const WINDOW_SCALE: f64 = 4.0;
pub const MIN_RUNGS: usize = 5;
/// Probe points sampled per rung for the inclusion check.
pub const INCLUSION_SAMPLES: usize = 4096;
/// Largest tolerated spread of the per-rung inclusion constants.
pub const INCLUSION_SPREAD: f64 = 4.0;

/// A map of the bidisc into the closed bidisc.
pub type BidiscMap<'a> = &'a (dyn Fn(C64, C64) -> [C64; 2] + Sync);

#[derive(Debug, Error)]
pub enum CarlesonError {
    #[error("beta = {0} outside (-1, 1)")]
    BetaOutOfRange(f64),
    #[error("{0} samples requested, at least {MIN_SAMPLES} required")]
    TooFewSamples(usize),
    #[error("box radii {0:?} outside (0, 2]")]
    InvalidBox([f64; 2]),
    #[error("{usable} usable rungs, {needed} required")]
    InsufficientLadder {
        usable: usize,
        needed: usize,
        rungs: Vec<Rung>,
    },
    #[error("probe point {point:?} maps {ratio} box radii from the center at delta = {delta}")]
    InclusionViolated {
        point: [C64; 2],
        delta: f64,
        ratio: f64,
        constants: Vec<f64>,
    },
}

/// `S(center, radii) = {z in D^2 : |z_j - center_j| < radii_j}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonBox {
    pub center: [C64; 2],
    pub radii: [f64; 2],
}

impl CarlesonBox {
    pub fn new(center: [C64; 2], radii: [f64; 2]) -> Result<Self, CarlesonError> {
        if radii.iter().any(|r| !(*r > 0.0 && *r <= 2.0)) {
            return Err(CarlesonError::InvalidBox(radii));
        }
        Ok(CarlesonBox { center, radii })
    }

    pub fn isotropic(center: [C64; 2], delta: f64) -> Result<Self, CarlesonError> {
        Self::new(center, [delta, delta])
    }

    #[inline]
    pub fn contains(&self, w: [C64; 2]) -> bool {
        (w[0] - self.center[0]).norm() < self.radii[0]
            && (w[1] - self.center[1]).norm() < self.radii[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedVolumeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub beta: f64,
    pub seed: u64,
    pub zero_hits: bool,
}

fn check_beta(beta: f64) -> Result<(), CarlesonError> {
    if !(beta > -1.0 && beta < 1.0) {
        return Err(CarlesonError::BetaOutOfRange(beta));
    }
    Ok(())
}

/// `V_beta` of `{|z - zeta| < rho} ∩ D` for any unimodular `zeta`.
///
/// With `t = (1 - r^2)^(beta + 1)` the volume becomes
/// `(1 / (pi (beta + 1))) * integral of A(r(t)) dt`, where `A` is the half
/// angle of the circle `|z| = r` inside the cap; the substitution removes the
/// weight singularity at `r = 1` for negative `beta`.
pub fn disc_cap_volume(rho: f64, beta: f64) -> f64 {
    let b1 = beta + 1.0;
    if rho <= 0.0 {
        return 0.0;
    }
    if rho >= 2.0 {
        return 1.0 / b1;
    }
    // cos A = 1 - (rho^2 - (1 - r)^2) / (2 r), in a cancellation-free form.
    let half_angle = |t: f64| {
        let u = t.powf(1.0 / b1);
        if u >= 1.0 {
            return PI;
        }
        let r = (1.0 - u).sqrt();
        let gap = u / (1.0 + r);
        let h = ((rho * rho - gap * gap) / (4.0 * r)).max(0.0);
        if h >= 1.0 {
            PI
        } else {
            2.0 * h.sqrt().asin()
        }
    };
    // Above `t_kink` the whole circle lies inside the cap (only when rho > 1).
    let t_kink = (1.0 - (1.0 - rho).powi(2)).powf(b1);
    let scaled = |a: f64, b: f64| {
        let w = b - a;
        w * quadrature::double_exponential::integrate(
            |s| half_angle(a + w * s),
            0.0,
            1.0,
            1e-15 * rho.min(1.0),
        )
        .integral
    };
    let integral = if rho <= 1.0 {
        scaled(0.0, t_kink)
    } else {
        scaled(0.0, t_kink) + PI * (1.0 - t_kink)
    };
    integral / (PI * b1)
}

/// Weighted volume of `{1 - h < |z| < 1}`.
pub fn collar_volume(h: f64, beta: f64) -> f64 {
    let b1 = beta + 1.0;
    (1.0 - (1.0 - h.min(1.0)).powi(2)).powf(b1) / b1
}

/// Exact box volume: a product of two disc-cap volumes.
pub fn box_volume(bx: &CarlesonBox, beta: f64) -> Result<WeightedVolumeEstimate, CarlesonError> {
    check_beta(beta)?;
    let value = disc_cap_volume(bx.radii[0], beta) * disc_cap_volume(bx.radii[1], beta);
    Ok(WeightedVolumeEstimate {
        value,
        stderr: 0.0,
        samples: 0,
        beta,
        seed: 0,
        zero_hits: value == 0.0,
    })
}

/// A subset of one disc factor with exactly known weighted volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Polar rectangle `|arg z - center| < half_angle`, `r_lo <= |z| < r_hi`.
    Sector {
        center: f64,
        half_angle: f64,
        r_lo: f64,
        r_hi: f64,
    },
    /// `{|z - center| < rho} ∩ D` with `center` unimodular.
    Cap { center: C64, rho: f64 },
}

impl Region {
    pub fn disc() -> Self {
        Region::Sector {
            center: 0.0,
            half_angle: PI,
            r_lo: 0.0,
            r_hi: 1.0,
        }
    }

    pub fn inner_disc(radius: f64) -> Self {
        Region::Sector {
            center: 0.0,
            half_angle: PI,
            r_lo: 0.0,
            r_hi: radius,
        }
    }

    /// Polar rectangle enclosing the cap of radius `rho` around `zeta`,
    /// loosened by a factor two in angle.
    pub fn around(zeta: C64, rho: f64) -> Self {
        Region::Sector {
            center: zeta.arg(),
            half_angle: (2.0 * rho).min(PI),
            r_lo: (1.0 - rho).max(0.0),
            r_hi: 1.0,
        }
    }

    pub fn volume(&self, beta: f64) -> f64 {
        match *self {
            Region::Sector {
                half_angle,
                r_lo,
                r_hi,
                ..
            } => {
                let b1 = beta + 1.0;
                let a = half_angle.min(PI);
                a / PI * ((1.0 - r_lo * r_lo).powf(b1) - (1.0 - r_hi * r_hi).powf(b1)) / b1
            }
            Region::Cap { rho, .. } => disc_cap_volume(rho, beta),
        }
    }

    #[inline]
    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Region::Sector {
                center,
                half_angle,
                r_lo,
                r_hi,
            } => {
                let r = z.norm();
                r >= r_lo
                    && r < r_hi
                    && (half_angle >= PI
                        || (z * C64::from_polar(1.0, -center)).arg().abs() < half_angle)
            }
            Region::Cap { center, rho } => z.norm() < 1.0 && (z - center).norm() < rho,
        }
    }

    /// Draws from `dV_beta` restricted to the region, normalized.
    pub fn sample<R: Rng>(&self, rng: &mut R, beta: f64) -> C64 {
        match *self {
            Region::Sector {
                center,
                half_angle,
                r_lo,
                r_hi,
            } => {
                let b1 = beta + 1.0;
                let t_lo = (1.0 - r_lo * r_lo).powf(b1);
                let t_hi = (1.0 - r_hi * r_hi).powf(b1);
                let t = t_hi + rng.gen::<f64>() * (t_lo - t_hi);
                let r = (1.0 - t.powf(1.0 / b1)).max(0.0).sqrt();
                let a = half_angle.min(PI);
                C64::from_polar(r, center + (2.0 * rng.gen::<f64>() - 1.0) * a)
            }
            Region::Cap { center, rho } => {
                let hull = Region::Sector {
                    center: center.arg(),
                    half_angle: if rho < 1.0 { rho.asin() } else { PI },
                    r_lo: (1.0 - rho).max(0.0),
                    r_hi: 1.0,
                };
                loop {
                    let z = hull.sample(rng, beta);
                    if (z - center).norm() < rho {
                        return z;
                    }
                }
            }
        }
    }
}

/// A unimodular function of `arg z1`, the graph of a level-set branch.
#[derive(Clone)]
pub struct BoundaryCurve {
    pub label: String,
    g: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
}

impl fmt::Debug for BoundaryCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryCurve")
            .field("label", &self.label)
            .finish()
    }
}

impl BoundaryCurve {
    pub fn new(label: impl Into<String>, g: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        BoundaryCurve {
            label: label.into(),
            g: Arc::new(g),
        }
    }

    /// `g(zeta) = conj(zeta)`.
    pub fn anti_diagonal() -> Self {
        Self::new("conj(z1)", |t| C64::from_polar(1.0, -t))
    }

    /// Piecewise-linear interpolation of a traced branch in angle.
    pub fn from_branch(branch: &Branch) -> Self {
        let mut pts: Vec<(f64, f64)> = branch
            .samples
            .iter()
            .map(|s| (s.theta.rem_euclid(TAU), s.g.arg()))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let g = move |t: f64| {
            if pts.is_empty() {
                return C64::new(1.0, 0.0);
            }
            let t = t.rem_euclid(TAU);
            let i = pts.partition_point(|p| p.0 <= t);
            let (a, b) = match i {
                0 => (pts[pts.len() - 1], (pts[0].0 + TAU, pts[0].1)),
                i if i == pts.len() => (pts[i - 1], (pts[0].0 + TAU, pts[0].1)),
                i => (pts[i - 1], pts[i]),
            };
            let t = if t < a.0 { t + TAU } else { t };
            let mut d = b.1 - a.1;
            d -= TAU * (d / TAU).round();
            let f = if b.0 > a.0 {
                (t - a.0) / (b.0 - a.0)
            } else {
                0.0
            };
            C64::from_polar(1.0, a.1 + f * d)
        };
        Self::new("traced branch", g)
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> C64 {
        (self.g)(theta)
    }
}

/// Importance-sampling window on the bidisc.
#[derive(Clone, Debug)]
pub enum Window {
    Product([Region; 2]),
    /// `z1` in `z1`, `z2` in the cap of radius `rho` around `curve(arg z1)`.
    Collar {
        z1: Region,
        rho: f64,
        curve: BoundaryCurve,
    },
}

impl Window {
    pub fn point(w: [C64; 2], rho: f64) -> Self {
        Window::Product([Region::around(w[0], rho), Region::around(w[1], rho)])
    }

    pub fn line(tau: C64, orientation: Orientation, rho: f64) -> Self {
        match orientation {
            Orientation::Vertical => Window::Product([Region::around(tau, rho), Region::disc()]),
            Orientation::Horizontal => Window::Product([Region::disc(), Region::around(tau, rho)]),
        }
    }

    pub fn curve(curve: BoundaryCurve, rho: f64) -> Self {
        let z1 = Region::Sector {
            center: 0.0,
            half_angle: PI,
            r_lo: (1.0 - rho).max(0.0),
            r_hi: 1.0,
        };
        Window::Collar { z1, rho, curve }
    }

    pub fn volume(&self, beta: f64) -> f64 {
        match self {
            Window::Product([a, b]) => a.volume(beta) * b.volume(beta),
            Window::Collar { z1, rho, .. } => z1.volume(beta) * disc_cap_volume(*rho, beta),
        }
    }

    #[inline]
    pub fn contains(&self, z: [C64; 2]) -> bool {
        match self {
            Window::Product([a, b]) => a.contains(z[0]) && b.contains(z[1]),
            Window::Collar { z1, rho, curve } => {
                z1.contains(z[0])
                    && z[1].norm() < 1.0
                    && (z[1] - curve.eval(z[0].arg())).norm() < *rho
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, beta: f64) -> [C64; 2] {
        match self {
            Window::Product([a, b]) => [a.sample(rng, beta), b.sample(rng, beta)],
            Window::Collar { z1, rho, curve } => {
                let w1 = z1.sample(rng, beta);
                let cap = Region::Cap {
                    center: curve.eval(w1.arg()),
                    rho: *rho,
                };
                [w1, cap.sample(rng, beta)]
            }
        }
    }
}

struct Mixture<'a> {
    windows: &'a [Window],
    volumes: Vec<f64>,
    global_weight: f64,
    global_density: f64,
}

impl<'a> Mixture<'a> {
    fn new(windows: &'a [Window], beta: f64) -> Self {
        let volumes: Vec<f64> = windows.iter().map(|w| w.volume(beta)).collect();
        let global_weight = if windows.is_empty() {
            1.0
        } else {
            GLOBAL_WEIGHT
        };
        let b1 = beta + 1.0;
        Mixture {
            windows,
            volumes,
            global_weight,
            global_density: global_weight * b1 * b1,
        }
    }

    fn window_weight(&self) -> f64 {
        (1.0 - self.global_weight) / self.windows.len().max(1) as f64
    }

    fn sample<R: Rng>(&self, rng: &mut R, beta: f64) -> [C64; 2] {
        let u: f64 = rng.gen();
        if u < self.global_weight {
            let d = Region::disc();
            return [d.sample(rng, beta), d.sample(rng, beta)];
        }
        let k = self.windows.len();
        let i = (((u - self.global_weight) / (1.0 - self.global_weight)) * k as f64) as usize;
        self.windows[i.min(k - 1)].sample(rng, beta)
    }

    /// Mixture density with respect to `dV_beta x dV_beta`.
    fn density(&self, z: [C64; 2]) -> f64 {
        let ww = self.window_weight();
        self.global_density
            + self
                .windows
                .iter()
                .zip(&self.volumes)
                .filter(|(w, _)| w.contains(z))
                .map(|(_, v)| ww / v)
                .sum::<f64>()
    }

    fn max_weight(&self) -> f64 {
        1.0 / self.global_density
    }
}

#[derive(Clone, Copy, Default)]
struct Accumulator {
    sum: f64,
    sum_sq: f64,
    hits: u64,
}

fn estimate(
    phi: BidiscMap,
    bx: &CarlesonBox,
    beta: f64,
    samples: usize,
    seed: u64,
    stream: u64,
    windows: &[Window],
) -> Result<WeightedVolumeEstimate, CarlesonError> {
    check_beta(beta)?;
    if samples < MIN_SAMPLES {
        return Err(CarlesonError::TooFewSamples(samples));
    }
    let mix = Mixture::new(windows, beta);
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((stream << 32) | c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut acc = Accumulator::default();
            for _ in 0..n {
                let z = mix.sample(&mut rng, beta);
                if bx.contains(phi(z[0], z[1])) {
                    let w = 1.0 / mix.density(z);
                    acc.sum += w;
                    acc.sum_sq += w * w;
                    acc.hits += 1;
                }
            }
            acc
        })
        .collect();
    let total = partial
        .iter()
        .fold(Accumulator::default(), |a, b| Accumulator {
            sum: a.sum + b.sum,
            sum_sq: a.sum_sq + b.sum_sq,
            hits: a.hits + b.hits,
        });
    let n = samples as f64;
    if total.hits == 0 {
        // Rule of three: fewer than 3/n expected hits at 95% confidence.
        let stderr = 3.0 * mix.max_weight() / n;
        return Ok(WeightedVolumeEstimate {
            value: 0.0,
            stderr,
            samples: samples as u64,
            beta,
            seed,
            zero_hits: true,
        });
    }
    let mean = total.sum / n;
    let var = ((total.sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(WeightedVolumeEstimate {
        value: mean,
        stderr: (var / n).sqrt(),
        samples: samples as u64,
        beta,
        seed,
        zero_hits: false,
    })
}

/// Monte Carlo estimate of `V_beta(phi^{-1}(bx))`, optionally concentrating
/// samples in `windows`.
pub fn volume_preimage(
    phi: BidiscMap,
    bx: &CarlesonBox,
    beta: f64,
    samples: usize,
    seed: u64,
    windows: &[Window],
) -> Result<WeightedVolumeEstimate, CarlesonError> {
    estimate(phi, bx, beta, samples, seed, 0, windows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictHint {
    Diverges,
    BoundedConsistent,
    Inconclusive,
}

impl VerdictHint {
    pub fn from_fit(slope: f64, stderr: f64, threshold: f64) -> Self {
        if slope + 2.0 * stderr < threshold {
            VerdictHint::Diverges
        } else if slope - 2.0 * stderr >= threshold {
            VerdictHint::BoundedConsistent
        } else {
            VerdictHint::Inconclusive
        }
    }
}

/// Box radii as functions of the ladder parameter `delta`; a coordinate
/// that does not shrink gets radius 2 (the whole disc).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub deltas: Vec<f64>,
    pub shrink: [bool; 2],
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            deltas: (3..=10).map(|k| 2f64.powi(-k)).collect(),
            shrink: [true, true],
        }
    }
}

impl LadderSpec {
    pub fn radii(&self, delta: f64) -> [f64; 2] {
        [
            if self.shrink[0] { delta } else { 2.0 },
            if self.shrink[1] { delta } else { 2.0 },
        ]
    }

    /// `(beta + 2)` per shrinking coordinate; `2 beta + 4` for square boxes.
    pub fn threshold(&self, beta: f64) -> f64 {
        (beta + 2.0) * self.shrink.iter().filter(|s| **s).count() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub delta: f64,
    pub radii: [f64; 2],
    #[serde(flatten)]
    pub estimate: WeightedVolumeEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub center: [C64; 2],
    pub beta: f64,
    pub threshold: f64,
    pub rungs: Vec<Rung>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
    pub verdict_hint: VerdictHint,
    /// False when a smaller box got a larger volume by more than 3 stderr.
    pub monotone: bool,
    /// Per-rung inclusion constants `max |Phi - center| / delta` of a probe.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inclusion_constants: Option<Vec<f64>>,
}

impl ScalingFit {
    fn from_rungs(
        center: [C64; 2],
        beta: f64,
        threshold: f64,
        rungs: Vec<Rung>,
        weighted: bool,
    ) -> Result<Self, CarlesonError> {
        let usable: Vec<&Rung> = rungs
            .iter()
            .filter(|r| !r.estimate.zero_hits && r.estimate.value > 0.0)
            .collect();
        if usable.len() < MIN_RUNGS {
            return Err(CarlesonError::InsufficientLadder {
                usable: usable.len(),
                needed: MIN_RUNGS,
                rungs,
            });
        }
        let xs: Vec<f64> = usable.iter().map(|r| r.delta.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|r| r.estimate.value.ln()).collect();
        let fit: LinearFit = if weighted && usable.iter().all(|r| r.estimate.stderr > 0.0) {
            let sig: Vec<f64> = usable
                .iter()
                .map(|r| r.estimate.stderr / r.estimate.value)
                .collect();
            wls(&xs, &ys, &sig)
        } else {
            ols(&xs, &ys)
        }
        .ok_or(CarlesonError::InsufficientLadder {
            usable: usable.len(),
            needed: MIN_RUNGS,
            rungs: rungs.clone(),
        })?;
        let mut sorted = rungs.clone();
        sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        let monotone = sorted.windows(2).all(|w| {
            let (a, b) = (&w[0].estimate, &w[1].estimate);
            a.value <= b.value + 3.0 * a.stderr.hypot(b.stderr)
        });
        Ok(ScalingFit {
            center,
            beta,
            threshold,
            rungs,
            slope: fit.slope,
            intercept: fit.intercept,
            slope_stderr: fit.slope_stderr,
            r2: fit.r2,
            verdict_hint: VerdictHint::from_fit(fit.slope, fit.slope_stderr, threshold),
            monotone,
            inclusion_constants: None,
        })
    }
}

/// Fits `log V_beta(phi^{-1}(S(center, radii(delta))))` against `log delta`.
///
/// `windows` maps a rung's `delta` to its importance windows; each rung
/// uses its own RNG stream so rungs are independent of evaluation order.
pub fn scaling_exponent(
    phi: BidiscMap,
    center: [C64; 2],
    beta: f64,
    ladder: &LadderSpec,
    samples: usize,
    seed: u64,
    windows: &(dyn Fn(f64) -> Vec<Window> + Sync),
) -> Result<ScalingFit, CarlesonError> {
    check_beta(beta)?;
    let rungs = ladder
        .deltas
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let bx = CarlesonBox::new(center, ladder.radii(delta))?;
            let estimate = estimate(phi, &bx, beta, samples, seed, i as u64 + 1, &windows(delta))?;
            Ok(Rung {
                delta,
                radii: bx.radii,
                estimate,
            })
        })
        .collect::<Result<Vec<_>, CarlesonError>>()?;
    ScalingFit::from_rungs(center, beta, ladder.threshold(beta), rungs, true)
}

/// Explicit subsets `A_delta` whose volumes lower-bound preimage volumes.
#[derive(Clone, Debug)]
pub enum AdeltaSpec {
    /// `{|z1 - tau| < delta, |z2| < 1/2}`, or the transpose.
    Line { tau: C64, orientation: Orientation },
    /// `{z1 = r zeta, zeta in J, 1 - r < delta, |z2 - g(zeta)| < delta}` with
    /// `J` the arc of half-width `half_width` around `arc_center`.
    Curve {
        arc_center: f64,
        half_width: f64,
        curve: BoundaryCurve,
    },
    /// The curve probe restricted to `|zeta - zeta0|^m < c1 delta`.
    SmoothTangency {
        zeta0: f64,
        m: f64,
        c1: f64,
        curve: BoundaryCurve,
    },
    /// `{s^(m - k) < c delta, 1 - r < c delta s^k, |z2 - g(zeta)| < c delta s^k}`
    /// with `s = |zeta - zeta0|`.
    SingularTangency {
        zeta0: f64,
        k: f64,
        m: f64,
        c: f64,
        curve: BoundaryCurve,
    },
}

impl AdeltaSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdeltaSpec::Line { .. } => "line",
            AdeltaSpec::Curve { .. } => "curve",
            AdeltaSpec::SmoothTangency { .. } => "smooth_tangency",
            AdeltaSpec::SingularTangency { .. } => "singular_tangency",
        }
    }

    /// Closed-form exponent of `V_beta(A_delta)` as `delta -> 0`.
    pub fn expected_exponent(&self, beta: f64) -> f64 {
        match self {
            AdeltaSpec::Line { .. } => beta + 2.0,
            AdeltaSpec::Curve { .. } => 2.0 * beta + 3.0,
            AdeltaSpec::SmoothTangency { m, .. } => 2.0 * beta + 3.0 + 1.0 / m,
            AdeltaSpec::SingularTangency { k, m, .. } => {
                2.0 * beta + 3.0 + (k * (2.0 * beta + 3.0) + 1.0) / (m - k)
            }
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            AdeltaSpec::Line { tau, orientation } => {
                serde_json::json!({"kind": "line", "tau": tau, "orientation": orientation})
            }
            AdeltaSpec::Curve {
                arc_center,
                half_width,
                curve,
            } => serde_json::json!({
                "kind": "curve", "arc_center": arc_center, "half_width": half_width, "curve": curve.label
            }),
            AdeltaSpec::SmoothTangency {
                zeta0,
                m,
                c1,
                curve,
            } => serde_json::json!({
                "kind": "smooth_tangency", "zeta0": zeta0, "m": m, "c1": c1, "curve": curve.label
            }),
            AdeltaSpec::SingularTangency {
                zeta0,
                k,
                m,
                c,
                curve,
            } => serde_json::json!({
                "kind": "singular_tangency", "zeta0": zeta0, "k": k, "m": m, "c": c, "curve": curve.label
            }),
        }
    }

    fn arc_half_width(&self, delta: f64) -> f64 {
        match self {
            AdeltaSpec::Line { .. } => PI,
            AdeltaSpec::Curve { half_width, .. } => half_width.min(PI),
            AdeltaSpec::SmoothTangency { m, c1, .. } => arc_from_chord((c1 * delta).powf(1.0 / m)),
            AdeltaSpec::SingularTangency { k, m, c, .. } => {
                arc_from_chord((c * delta).powf(1.0 / (m - k)))
            }
        }
    }

    /// The probe as a window when it is a product or a constant-width collar.
    fn window(&self, delta: f64) -> Option<Window> {
        match self {
            AdeltaSpec::Line { tau, orientation } => {
                let cap = Region::Cap {
                    center: *tau,
                    rho: delta,
                };
                Some(Window::Product(match orientation {
                    Orientation::Vertical => [cap, Region::inner_disc(0.5)],
                    Orientation::Horizontal => [Region::inner_disc(0.5), cap],
                }))
            }
            AdeltaSpec::Curve {
                arc_center: center,
                curve,
                ..
            }
            | AdeltaSpec::SmoothTangency {
                zeta0: center,
                curve,
                ..
            } => Some(Window::Collar {
                z1: Region::Sector {
                    center: *center,
                    half_angle: self.arc_half_width(delta),
                    r_lo: 1.0 - delta,
                    r_hi: 1.0,
                },
                rho: delta,
                curve: curve.clone(),
            }),
            AdeltaSpec::SingularTangency { .. } => None,
        }
    }

    /// `V_beta(A_delta)`, exact up to quadrature error.
    pub fn volume(&self, delta: f64, beta: f64) -> f64 {
        if let Some(w) = self.window(delta) {
            return w.volume(beta);
        }
        let AdeltaSpec::SingularTangency { k, c, .. } = self else {
            unreachable!()
        };
        let theta_max = self.arc_half_width(delta);
        let width = |theta: f64| c * delta * (2.0 * (theta / 2.0).sin()).powf(*k);
        let integrand = |theta: f64| {
            let w = width(theta);
            collar_volume(w, beta) * disc_cap_volume(w, beta)
        };
        // Symmetric arc: (2 / 2 pi) times the one-sided integral.
        quadrature::double_exponential::integrate(integrand, 0.0, theta_max, 1e-300).integral / PI
    }

    fn sample<R: Rng>(&self, rng: &mut R, delta: f64, beta: f64) -> [C64; 2] {
        if let Some(w) = self.window(delta) {
            return w.sample(rng, beta);
        }
        let AdeltaSpec::SingularTangency {
            zeta0, k, c, curve, ..
        } = self
        else {
            unreachable!()
        };
        let theta = (2.0 * rng.gen::<f64>() - 1.0) * self.arc_half_width(delta);
        let w = c * delta * (2.0 * (theta.abs() / 2.0).sin()).powf(*k);
        let z1 = Region::Sector {
            center: zeta0 + theta,
            half_angle: 0.0,
            r_lo: 1.0 - w,
            r_hi: 1.0,
        }
        .sample(rng, beta);
        let z2 = Region::Cap {
            center: curve.eval(zeta0 + theta),
            rho: w,
        }
        .sample(rng, beta);
        [z1, z2]
    }
}

/// Angle whose chord `|e^{i theta} - 1|` equals `s`.
fn arc_from_chord(s: f64) -> f64 {
    if s >= 2.0 {
        PI
    } else {
        2.0 * (s / 2.0).asin()
    }
}

/// Scaling fit of `V_beta(A_delta)` over the ladder.
///
/// When `phi` is given, probe points are pushed forward and the per-rung
/// constant `C(delta) = max |Phi - center| / delta` is recorded; inclusion in
/// `phi^{-1}(S(center, C delta))` with a uniform `C` fails when these
/// constants spread by more than `INCLUSION_SPREAD` or are not finite.
pub fn probe_lower_bound(
    phi: Option<BidiscMap>,
    probe: &AdeltaSpec,
    center: [C64; 2],
    beta: f64,
    deltas: &[f64],
    seed: u64,
) -> Result<ScalingFit, CarlesonError> {
    check_beta(beta)?;
    let rungs: Vec<Rung> = deltas
        .iter()
        .map(|&delta| Rung {
            delta,
            radii: [delta, delta],
            estimate: WeightedVolumeEstimate {
                value: probe.volume(delta, beta),
                stderr: 0.0,
                samples: 0,
                beta,
                seed,
                zero_hits: false,
            },
        })
        .collect();
    let mut fit = ScalingFit::from_rungs(center, beta, 2.0 * beta + 4.0, rungs, false)?;
    if let Some(phi) = phi {
        let mut constants = Vec::with_capacity(deltas.len());
        let mut worst = ([C64::new(0.0, 0.0); 2], 0.0, 0.0);
        for (i, &delta) in deltas.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut c_max: f64 = 0.0;
            for _ in 0..INCLUSION_SAMPLES {
                let z = probe.sample(&mut rng, delta, beta);
                let w = phi(z[0], z[1]);
                let ratio = (w[0] - center[0]).norm().max((w[1] - center[1]).norm()) / delta;
                if ratio.is_nan() || ratio > c_max {
                    c_max = ratio;
                    if ratio.is_nan() || ratio > worst.1 {
                        worst = (z, ratio, delta);
                    }
                }
            }
            constants.push(c_max);
        }
        let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = constants.iter().cloned().fold(0.0, f64::max);
        if !hi.is_finite() || hi > INCLUSION_SPREAD * lo {
            return Err(CarlesonError::InclusionViolated {
                point: worst.0,
                delta: worst.2,
                ratio: worst.1,
                constants,
            });
        }
        fit.inclusion_constants = Some(constants);
    }
    Ok(fit)
}
