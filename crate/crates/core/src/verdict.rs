//! Decision procedure mapping level-set features of a symbol
//! `Phi = (f1, f2)` to a boundedness conclusion for its composition operator
//! on the weighted Bergman spaces of the bidisc.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::carleson::{
    probe_lower_bound, scaling_exponent, AdeltaSpec, BoundaryCurve, CarlesonError, LadderSpec,
    ScalingFit, VerdictHint, Window, DEFAULT_SAMPLES, WINDOW_SCALE,
};
use crate::geometry::{
    classify_intersections, contact_order, julia_caratheodory_slice_test, transversality_check,
    InteractionReport, IntersectionKind, IntersectionPoint, SliceVerdict, TransversalityReport,
    Variable, AT_SINGULARITY_TOL,
};
use crate::levelset::{
    detect_lines, split_line_factors, trace_coordinate, LevelSet, Orientation, LINE_SCAN,
};
use crate::poly::{resultant_scale_z2, resultant_z2, C64};
use crate::rif::Coordinate;

/// Side length of the alpha grid screened for common curves.
pub const ALPHA_GRID: usize = 16;
/// Arc half-width of curve probes.
pub const PROBE_ARC: f64 = 0.25;
const SAME_POINT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum VerdictError {
    #[error("feature extraction incomplete: {missing:?}")]
    IncompleteAnalysis { missing: Vec<String> },
    #[error("beta = {0} outside (-1, 1)")]
    BetaOutOfRange(f64),
    #[error(transparent)]
    Carleson(#[from] CarlesonError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    RifRif,
    RifSmooth,
    SmoothSmooth,
}

#[derive(Clone, Debug)]
pub struct SymbolPair {
    pub first: Coordinate,
    pub second: Coordinate,
    pub beta_list: Vec<f64>,
}

impl SymbolPair {
    pub fn new(first: Coordinate, second: Coordinate, beta_list: Vec<f64>) -> Self {
        SymbolPair {
            first,
            second,
            beta_list,
        }
    }

    pub fn kind(&self) -> PairKind {
        match (self.first.is_rif(), self.second.is_rif()) {
            (true, true) => PairKind::RifRif,
            (false, false) => PairKind::SmoothSmooth,
            _ => PairKind::RifSmooth,
        }
    }

    pub fn value(&self, z1: C64, z2: C64) -> [C64; 2] {
        [self.first.value(z1, z2), self.second.value(z1, z2)]
    }

    fn coordinates(&self) -> [&Coordinate; 2] {
        [&self.first, &self.second]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Conclusion {
    NotBounded,
    BoundedConsistent,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTag {
    CommonLine,
    CommonCurve,
    SmoothTangency,
    SingularTangency,
    MixedTransversal,
    TransversalRifPair,
    IdenticalCoordinates,
    SmoothFirstOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaConclusion {
    pub beta: f64,
    pub conclusion: Conclusion,
    /// Conclusions still possible when a fitted order straddles a boundary.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub candidates: Vec<Conclusion>,
    /// Outside `(-1, 0]`, where sufficiency is not established.
    pub experimental: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeCertificate {
    pub spec: serde_json::Value,
    pub expected_exponents: Vec<f64>,
    pub fits: Vec<ScalingFit>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub feature: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probe: Option<ProbeCertificate>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: PairKind,
    pub conclusion_per_beta: Vec<BetaConclusion>,
    pub triggered_rule: RuleTag,
    pub certificate: Certificate,
    pub crosscheck: Vec<ScalingFit>,
    pub unchecked_hypotheses: Vec<String>,
    pub caveats: Vec<String>,
}

impl Verdict {
    pub fn conclusion_at(&self, beta: f64) -> Option<Conclusion> {
        self.conclusion_per_beta
            .iter()
            .find(|c| c.beta == beta)
            .map(|c| c.conclusion)
    }
}

#[derive(Clone, Debug)]
pub struct DecideOptions {
    pub resolution: usize,
    pub samples: usize,
    pub seed: u64,
    pub windowing: bool,
    pub ladder: LadderSpec,
    /// Additional `(alpha1, alpha2)` pairs to examine.
    pub extra_alphas: Vec<[C64; 2]>,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            resolution: 4096,
            samples: DEFAULT_SAMPLES,
            seed: 42,
            windowing: true,
            ladder: LadderSpec::default(),
            extra_alphas: vec![],
        }
    }
}

/// `(M - 1) / (2K) - 2`: tangencies of order `M` at a singularity of
/// contact order `K` obstruct boundedness for every `beta` below this.
pub fn singular_tangency_cutoff(m: f64, k: f64) -> f64 {
    (m - 1.0) / (2.0 * k) - 2.0
}

/// Per-beta conclusions for a singular tangency with fitted orders.
///
/// The cutoff is evaluated at the two-stderr extremes of `m` and `k`;
/// a `beta` between them is undecided with both candidates listed.
pub fn singular_tangency_conclusions(
    m: f64,
    m_stderr: f64,
    k: f64,
    k_stderr: f64,
    betas: &[f64],
) -> Vec<BetaConclusion> {
    let lo = singular_tangency_cutoff(m - 2.0 * m_stderr, k + 2.0 * k_stderr);
    let hi = singular_tangency_cutoff(
        m + 2.0 * m_stderr,
        (k - 2.0 * k_stderr).max(f64::MIN_POSITIVE),
    );
    betas
        .iter()
        .map(|&beta| {
            let (conclusion, candidates) = if beta < lo {
                (Conclusion::NotBounded, vec![])
            } else if beta >= hi {
                (Conclusion::Undecided, vec![])
            } else {
                (
                    Conclusion::Undecided,
                    vec![Conclusion::NotBounded, Conclusion::Undecided],
                )
            };
            BetaConclusion {
                beta,
                conclusion,
                candidates,
                experimental: beta > 0.0,
                note: Some(format!("cutoff {}", singular_tangency_cutoff(m, k))),
            }
        })
        .collect()
}

fn same_coordinate(a: &Coordinate, b: &Coordinate) -> bool {
    if (a.lambda() - b.lambda()).norm() > 1e-12 {
        return false;
    }
    match (a.as_rif(), b.as_rif()) {
        (Some(f), Some(g)) => f.denominator() == g.denominator(),
        _ => false,
    }
}

fn unimodular(z: C64) -> bool {
    (z.norm() - 1.0).abs() <= SAME_POINT
}

fn push_pair(pairs: &mut Vec<[C64; 2]>, a: [C64; 2]) {
    let a = [a[0] / a[0].norm(), a[1] / a[1].norm()];
    if !pairs
        .iter()
        .any(|p| (p[0] - a[0]).norm() < SAME_POINT && (p[1] - a[1]).norm() < SAME_POINT)
    {
        pairs.push(a);
    }
}

#[derive(Clone, Debug, Serialize)]
struct LineFeature {
    tau: C64,
    orientation: Orientation,
    alphas: [C64; 2],
    source: &'static str,
}

struct Features {
    singular_points: Vec<[C64; 2]>,
    lines: Vec<LineFeature>,
    reports: Vec<(InteractionReport, LevelSet, LevelSet)>,
    contacts: Vec<TransversalityReport>,
    singular_contacts: Vec<[C64; 2]>,
    missing: Vec<String>,
}

/// A line of `f` (a RIF coordinate) that the other coordinate is constant on.
fn line_features(pair: &SymbolPair) -> Vec<LineFeature> {
    let detected: Vec<Vec<(C64, Orientation, C64)>> = pair
        .coordinates()
        .iter()
        .map(|c| match c.as_rif() {
            Some(f) => detect_lines(f, LINE_SCAN)
                .into_iter()
                .map(|l| (l.tau, l.orientation, l.alpha * c.lambda()))
                .collect(),
            None => vec![],
        })
        .collect();
    let mut out = Vec::new();
    for (i, lines) in detected.iter().enumerate() {
        let other = pair.coordinates()[1 - i];
        for &(tau, orientation, alpha) in lines {
            let matched = if other.is_rif() {
                detected[1 - i]
                    .iter()
                    .find(|l| l.1 == orientation && (l.0 - tau).norm() <= 1e-8)
                    .map(|l| (l.2, "exceptional lines of both coordinates"))
            } else {
                let Coordinate::Smooth { f, lambda } = other else {
                    unreachable!()
                };
                let (xi, dir) = match orientation {
                    Orientation::Vertical => ([tau, C64::new(1.0, 0.0)], Variable::Z2),
                    Orientation::Horizontal => ([C64::new(1.0, 0.0), tau], Variable::Z1),
                };
                let r = julia_caratheodory_slice_test(f, xi, dir);
                (r.verdict == SliceVerdict::Constant).then(|| {
                    (
                        lambda * f.value(xi[0], xi[1]),
                        "smooth coordinate constant on the line",
                    )
                })
            };
            if let Some((beta_alpha, source)) = matched {
                let alphas = if i == 0 {
                    [alpha, beta_alpha]
                } else {
                    [beta_alpha, alpha]
                };
                if !out.iter().any(|l: &LineFeature| {
                    l.orientation == orientation && (l.tau - tau).norm() <= 1e-8
                }) {
                    out.push(LineFeature {
                        tau,
                        orientation,
                        alphas,
                        source,
                    });
                }
            }
        }
    }
    out
}

/// Alpha pairs whose reduced level polynomials share a factor.
fn grid_screen(pair: &SymbolPair) -> Vec<[C64; 2]> {
    let alphas: Vec<C64> = (0..ALPHA_GRID)
        .map(|k| C64::from_polar(1.0, TAU * k as f64 / ALPHA_GRID as f64))
        .collect();
    let reduced = |c: &Coordinate| -> Vec<_> {
        alphas
            .iter()
            .map(|a| split_line_factors(&c.level_polynomial(*a)).0)
            .collect()
    };
    let (r1, r2) = (reduced(&pair.first), reduced(&pair.second));
    let probes: Vec<C64> = (0..8)
        .map(|k| C64::from_polar(1.0, TAU * (k as f64 + 0.37) / 8.0))
        .collect();
    let mut out = Vec::new();
    for (i, q1) in r1.iter().enumerate() {
        for (j, q2) in r2.iter().enumerate() {
            let shared = probes.iter().all(|&z| match resultant_z2(q1, q2, z) {
                Ok(r) => r.norm() <= 1e-8 * resultant_scale_z2(q1, q2, z),
                Err(_) => false,
            });
            if shared {
                out.push([alphas[i], alphas[j]]);
            }
        }
    }
    out
}

fn extract(pair: &SymbolPair, opts: &DecideOptions, caveats: &mut Vec<String>) -> Features {
    let mut singular_points: Vec<[C64; 2]> = Vec::new();
    for c in pair.coordinates() {
        for s in c.singularities() {
            if !singular_points
                .iter()
                .any(|p| (p[0] - s.location[0]).norm() + (p[1] - s.location[1]).norm() < SAME_POINT)
            {
                singular_points.push(s.location);
            }
        }
    }
    let mut pairs: Vec<[C64; 2]> = Vec::new();
    for w in &singular_points {
        let v = [
            pair.first.boundary_value(*w),
            pair.second.boundary_value(*w),
        ];
        if v.iter().all(|z| unimodular(*z)) {
            push_pair(&mut pairs, v);
        }
    }
    let lines = line_features(pair);
    for l in &lines {
        push_pair(&mut pairs, l.alphas);
    }
    for a in &opts.extra_alphas {
        push_pair(&mut pairs, *a);
    }
    if pair.kind() == PairKind::RifRif {
        for a in grid_screen(pair) {
            push_pair(&mut pairs, a);
        }
        caveats.push(format!(
            "alpha pairs examined: values at common singularities, exceptional lines, user list and a {ALPHA_GRID}x{ALPHA_GRID} resultant screen; common curves at other values are not searched"
        ));
    }

    let mut reports = Vec::new();
    let mut missing = Vec::new();
    for a in &pairs {
        let traced = trace_coordinate(&pair.first, a[0], opts.resolution)
            .and_then(|l1| Ok((l1, trace_coordinate(&pair.second, a[1], opts.resolution)?)));
        match traced {
            Ok((l1, l2)) => match classify_intersections(&l1, &l2, &singular_points) {
                Ok(mut r) => {
                    fill_contact_orders(pair, &mut r.intersections);
                    reports.push((r, l1, l2));
                }
                Err(e) => missing.push(format!("intersections at alphas {a:?}: {e}")),
            },
            Err(e) => missing.push(format!("level sets at alphas {a:?}: {e}")),
        }
    }

    let mut contacts = Vec::new();
    let mut singular_contacts = Vec::new();
    let smooth: Vec<&Coordinate> = pair
        .coordinates()
        .into_iter()
        .filter(|c| !c.is_rif())
        .collect();
    if !smooth.is_empty() {
        let mut points: Vec<[C64; 2]> = Vec::new();
        for c in &smooth {
            let Coordinate::Smooth { f, .. } = c else {
                unreachable!()
            };
            for p in f.boundary_contact() {
                if smooth.iter().all(|o| unimodular(o.value(p[0], p[1]))) {
                    points.push(*p);
                }
            }
        }
        for p in points {
            if singular_points
                .iter()
                .any(|s| (s[0] - p[0]).norm().max((s[1] - p[1]).norm()) < AT_SINGULARITY_TOL)
            {
                singular_contacts.push(p);
                continue;
            }
            match transversality_check(&pair.first, &pair.second, p) {
                Ok(r) => contacts.push(r),
                Err(e) => missing.push(format!("transversality at {p:?}: {e}")),
            }
        }
    }
    Features {
        singular_points,
        lines,
        reports,
        contacts,
        singular_contacts,
        missing,
    }
}

fn fill_contact_orders(pair: &SymbolPair, points: &mut [IntersectionPoint]) {
    for p in points.iter_mut().filter(|p| p.at_singularity) {
        let k: Vec<f64> = pair
            .coordinates()
            .iter()
            .map(|c| {
                let Some(f) = c.as_rif() else { return 0.0 };
                f.singularities()
                    .iter()
                    .filter(|s| {
                        (s.location[0] - p.location[0])
                            .norm()
                            .max((s.location[1] - p.location[1]).norm())
                            < AT_SINGULARITY_TOL
                    })
                    .filter_map(|s| contact_order(f, s, Variable::Z2).ok())
                    .map(|e| e.effective())
                    .fold(0.0, f64::max)
            })
            .collect();
        p.k_pair = Some([k[0], k[1]]);
    }
}

struct Plan {
    rule: RuleTag,
    feature: serde_json::Value,
    probe: Option<AdeltaSpec>,
    center: [C64; 2],
    windows: WindowPlan,
    base: Vec<BetaConclusion>,
}

#[derive(Clone)]
enum WindowPlan {
    Line(C64, Orientation),
    Curve(BoundaryCurve),
    Point([C64; 2]),
}

impl WindowPlan {
    fn at(&self, delta: f64) -> Vec<Window> {
        let rho = WINDOW_SCALE * delta;
        match self {
            WindowPlan::Line(tau, o) => vec![Window::line(*tau, *o, rho)],
            WindowPlan::Curve(c) => vec![Window::curve(c.clone(), rho)],
            WindowPlan::Point(w) => vec![Window::point(*w, rho)],
        }
    }
}

fn uniform(betas: &[f64], c: Conclusion, note: Option<&str>) -> Vec<BetaConclusion> {
    betas
        .iter()
        .map(|&beta| BetaConclusion {
            beta,
            conclusion: c,
            candidates: vec![],
            experimental: beta > 0.0,
            note: note.map(str::to_string),
        })
        .collect()
}

fn sufficiency_range(betas: &[f64], note: &str) -> Vec<BetaConclusion> {
    betas
        .iter()
        .map(|&beta| {
            let covered = beta <= 0.0;
            BetaConclusion {
                beta,
                conclusion: if covered {
                    Conclusion::BoundedConsistent
                } else {
                    Conclusion::Undecided
                },
                candidates: vec![],
                experimental: !covered,
                note: Some(if covered {
                    note.to_string()
                } else {
                    "sufficiency only established for beta in (-1, 0]".into()
                }),
            }
        })
        .collect()
}

/// Branch of `ls` passing closest to `theta`-sample `g`, as a curve.
fn branch_curve(ls: &LevelSet, theta: f64, g: C64) -> Option<BoundaryCurve> {
    ls.branches
        .iter()
        .min_by(|a, b| {
            let d = |br: &crate::levelset::Branch| {
                br.samples
                    .iter()
                    .map(|s| angle_gap(s.theta, theta) + (s.g - g).norm())
                    .fold(f64::INFINITY, f64::min)
            };
            d(a).total_cmp(&d(b))
        })
        .map(BoundaryCurve::from_branch)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn plan_identical(pair: &SymbolPair, opts: &DecideOptions) -> Result<Plan, VerdictError> {
    let c = &pair.first;
    let s = c.singularities();
    let v = s[0].nontangential_value;
    let ls =
        trace_coordinate(c, v, opts.resolution).map_err(|e| VerdictError::IncompleteAnalysis {
            missing: vec![format!("level set at {v}: {e}")],
        })?;
    let feature = json!({
        "kind": "identical_level_sets",
        "alpha": v,
        "singularity": s[0].location,
        "vertical_lines": ls.vertical_lines,
        "horizontal_lines": ls.horizontal_lines,
        "branches": ls.branches.len(),
    });
    let (probe, windows) = if let Some(&tau) = ls.vertical_lines.first() {
        (
            AdeltaSpec::Line {
                tau,
                orientation: Orientation::Vertical,
            },
            WindowPlan::Line(tau, Orientation::Vertical),
        )
    } else if let Some(&tau) = ls.horizontal_lines.first() {
        (
            AdeltaSpec::Line {
                tau,
                orientation: Orientation::Horizontal,
            },
            WindowPlan::Line(tau, Orientation::Horizontal),
        )
    } else {
        let b = ls
            .branches
            .first()
            .ok_or_else(|| VerdictError::IncompleteAnalysis {
                missing: vec![format!("no branch of the level set at {v}")],
            })?;
        let curve = BoundaryCurve::from_branch(b);
        let theta = quiet_angle(b.samples.iter().map(|s| s.theta), &[s[0].location]);
        (
            AdeltaSpec::Curve {
                arc_center: theta,
                half_width: PROBE_ARC,
                curve: curve.clone(),
            },
            WindowPlan::Curve(curve),
        )
    };
    Ok(Plan {
        rule: RuleTag::IdenticalCoordinates,
        feature,
        probe: Some(probe),
        center: [v, v],
        windows,
        base: uniform(&pair.beta_list, Conclusion::NotBounded, None),
    })
}

/// Sample angle farthest from the first coordinates of `singular`.
fn quiet_angle(thetas: impl Iterator<Item = f64>, singular: &[[C64; 2]]) -> f64 {
    thetas
        .map(|t| {
            let d = singular
                .iter()
                .map(|s| angle_gap(t, s[0].arg()))
                .fold(f64::INFINITY, f64::min);
            (t, d)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0.0, |x| x.0)
}

fn plan(
    pair: &SymbolPair,
    f: &Features,
    caveats: &mut Vec<String>,
    hyp: &mut Vec<String>,
) -> Option<Plan> {
    let betas = &pair.beta_list;
    let mut lines: Vec<LineFeature> = f.lines.clone();
    for (r, _, _) in &f.reports {
        for l in &r.common_lines {
            if !lines
                .iter()
                .any(|x| x.orientation == l.orientation && (x.tau - l.tau).norm() <= 1e-8)
            {
                lines.push(LineFeature {
                    tau: l.tau,
                    orientation: l.orientation,
                    alphas: r.alphas,
                    source: "traced level sets",
                });
            }
        }
    }
    if let Some(l) = lines.first() {
        return Some(Plan {
            rule: RuleTag::CommonLine,
            feature: json!({"kind": "common_line", "line": l, "all_lines": lines}),
            probe: Some(AdeltaSpec::Line {
                tau: l.tau,
                orientation: l.orientation,
            }),
            center: l.alphas,
            windows: WindowPlan::Line(l.tau, l.orientation),
            base: uniform(betas, Conclusion::NotBounded, None),
        });
    }

    for (r, l1, _) in &f.reports {
        let Some(cc) = &r.common_curve else { continue };
        let thetas = cc.witness.iter().map(|w| w.0);
        let theta = quiet_angle(thetas, &f.singular_points);
        let g = l1
            .point_near(theta, C64::new(1.0, 0.0))
            .unwrap_or(C64::new(1.0, 0.0));
        let g = cc
            .witness
            .iter()
            .min_by(|a, b| angle_gap(a.0, theta).total_cmp(&angle_gap(b.0, theta)))
            .and_then(|w| {
                l1.branches
                    .iter()
                    .flat_map(|b| &b.samples)
                    .find(|s| s.theta == w.0)
                    .map(|s| s.g)
            })
            .unwrap_or(g);
        let Some(curve) = branch_curve(l1, theta, g) else {
            continue;
        };
        let span = (cc.window[1] - cc.window[0]).rem_euclid(TAU);
        let nearest_singular = f
            .singular_points
            .iter()
            .map(|s| angle_gap(theta, s[0].arg()))
            .fold(f64::INFINITY, f64::min);
        let half_width = PROBE_ARC.min(span / 2.0).min(nearest_singular / 2.0);
        return Some(Plan {
            rule: RuleTag::CommonCurve,
            feature: json!({"kind": "common_curve", "alphas": r.alphas, "curve": cc}),
            probe: Some(AdeltaSpec::Curve {
                arc_center: theta,
                half_width,
                curve: curve.clone(),
            }),
            center: r.alphas,
            windows: WindowPlan::Curve(curve),
            base: uniform(betas, Conclusion::NotBounded, None),
        });
    }

    let tangential = |singular: bool| {
        f.reports
            .iter()
            .flat_map(|(r, l1, _)| r.intersections.iter().map(move |p| (r, l1, p)))
            .find(|(_, _, p)| {
                p.kind == IntersectionKind::Tangential
                    && p.at_singularity == singular
                    && p.m.is_some()
            })
    };
    if let Some((r, l1, p)) = tangential(false) {
        let m = p.m.unwrap();
        let curve = branch_curve(l1, p.theta, p.location[1])?;
        return Some(Plan {
            rule: RuleTag::SmoothTangency,
            feature: json!({"kind": "smooth_tangency", "alphas": r.alphas, "point": p}),
            probe: Some(AdeltaSpec::SmoothTangency {
                zeta0: p.theta,
                m,
                c1: 1.0,
                curve,
            }),
            center: r.alphas,
            windows: WindowPlan::Point(p.location),
            base: uniform(betas, Conclusion::NotBounded, None),
        });
    }
    if let Some((r, l1, p)) = tangential(true) {
        let m = p.m.unwrap();
        let k = p.k_pair.map_or(0.0, |k| k[0].max(k[1]));
        if k > 0.0 {
            let curve = branch_curve(l1, p.theta, p.location[1])?;
            hyp.push("tangency bound used: M > K(2 beta + 4) + 1 per beta".into());
            return Some(Plan {
                rule: RuleTag::SingularTangency,
                feature: json!({"kind": "singular_tangency", "alphas": r.alphas, "point": p, "k": k, "m": m,
                    "cutoff": singular_tangency_cutoff(m, k)}),
                probe: Some(AdeltaSpec::SingularTangency {
                    zeta0: p.theta,
                    k,
                    m,
                    c: 1.0,
                    curve,
                }),
                center: r.alphas,
                windows: WindowPlan::Point(p.location),
                base: singular_tangency_conclusions(m, p.m_stderr.unwrap_or(0.0), k, 0.0, betas),
            });
        }
        caveats.push("tangency at a singularity without a contact-order estimate".into());
    }

    let failures: Vec<&TransversalityReport> =
        f.contacts.iter().filter(|c| !c.transversal).collect();
    let center_point = f
        .singular_contacts
        .first()
        .copied()
        .or_else(|| f.singular_points.first().copied())
        .or_else(|| f.contacts.first().map(|c| c.point));
    let center =
        center_point.map(|w| [pair.first.boundary_value(w), pair.second.boundary_value(w)]);
    let any_tangency = f.reports.iter().any(|(r, _, _)| {
        r.intersections
            .iter()
            .any(|p| p.kind == IntersectionKind::Tangential)
    });
    match pair.kind() {
        PairKind::RifSmooth | PairKind::SmoothSmooth if !failures.is_empty() || any_tangency => {
            let w = center_point?;
            Some(Plan {
                rule: RuleTag::SmoothTangency,
                feature: json!({"kind": "first_order_failure", "failures": failures, "tangency_without_order": any_tangency}),
                probe: None,
                center: center?,
                windows: WindowPlan::Point(failures.first().map_or(w, |c| c.point)),
                base: uniform(
                    betas,
                    Conclusion::Undecided,
                    Some("first-order condition fails but no tangency order could be fitted"),
                ),
            })
        }
        PairKind::RifSmooth => {
            let w = center_point?;
            if !f.singular_contacts.is_empty() {
                hyp.push("contact points at singularities of the inner coordinate are covered only by the Carleson crosscheck".into());
            }
            hyp.push("generic-value hypothesis at the singularity".into());
            Some(Plan {
                rule: RuleTag::MixedTransversal,
                feature: json!({"kind": "mixed_transversal", "contacts_checked": f.contacts.len(),
                    "singular_contacts": f.singular_contacts, "min_abs_polar_det":
                    f.contacts.iter().map(|c| c.polar_det.norm()).fold(f64::INFINITY, f64::min)}),
                probe: None,
                center: center?,
                windows: WindowPlan::Point(w),
                base: sufficiency_range(betas, "all level-set intersections transversal"),
            })
        }
        PairKind::SmoothSmooth => {
            let w = center_point?;
            Some(Plan {
                rule: RuleTag::SmoothFirstOrder,
                feature: json!({"kind": "smooth_first_order", "contacts_checked": f.contacts.len()}),
                probe: None,
                center: center?,
                windows: WindowPlan::Point(w),
                base: sufficiency_range(
                    betas,
                    "invertible boundary derivative at every contact point",
                ),
            })
        }
        PairKind::RifRif => {
            let w = center_point.unwrap_or([C64::new(1.0, 0.0); 2]);
            Some(Plan {
                rule: RuleTag::TransversalRifPair,
                feature: json!({"kind": "transversal_rif_pair", "pairs_examined": f.reports.len(),
                    "intersections": f.reports.iter().map(|r| r.0.intersections.len()).sum::<usize>()}),
                probe: None,
                center: [pair.first.boundary_value(w), pair.second.boundary_value(w)],
                windows: WindowPlan::Point(w),
                base: uniform(betas, Conclusion::Undecided, Some("transversal intersections do not settle boundedness for two inner coordinates")),
            })
        }
    }
}

/// Runs the decision procedure for every `beta` in the pair's list.
pub fn decide(pair: &SymbolPair, opts: &DecideOptions) -> Result<Verdict, VerdictError> {
    if let Some(&b) = pair.beta_list.iter().find(|b| !(**b > -1.0 && **b < 1.0)) {
        return Err(VerdictError::BetaOutOfRange(b));
    }
    let mut caveats = Vec::new();
    let mut hyp = Vec::new();
    let plan = if pair.first.is_rif()
        && same_coordinate(&pair.first, &pair.second)
        && !pair.first.singularities().is_empty()
    {
        plan_identical(pair, opts)?
    } else {
        let f = extract(pair, opts, &mut caveats);
        if !f.missing.is_empty()
            && f.reports.is_empty()
            && f.lines.is_empty()
            && f.contacts.is_empty()
            && !f.singular_points.is_empty()
        {
            return Err(VerdictError::IncompleteAnalysis { missing: f.missing });
        }
        caveats.extend(f.missing.iter().cloned());
        plan(pair, &f, &mut caveats, &mut hyp).ok_or_else(|| VerdictError::IncompleteAnalysis {
            missing: vec!["no boundary point where both coordinates are unimodular".into()],
        })?
    };
    if pair.beta_list.iter().any(|b| *b > 0.0) {
        caveats.push("beta > 0 results are experimental".into());
    }
    hyp.push("Carleson constant not quantified; crosscheck is a statistical statement".into());

    let phi = |a: C64, b: C64| pair.value(a, b);
    let mut conclusions = plan.base.clone();
    let probe = match &plan.probe {
        Some(spec) => {
            let fits = pair
                .beta_list
                .iter()
                .map(|&beta| {
                    probe_lower_bound(
                        Some(&phi),
                        spec,
                        plan.center,
                        beta,
                        &opts.ladder.deltas,
                        opts.seed,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (c, fit) in conclusions.iter_mut().zip(&fits) {
                if c.conclusion == Conclusion::NotBounded
                    && fit.verdict_hint != VerdictHint::Diverges
                {
                    c.conclusion = Conclusion::Undecided;
                    c.note = Some("probe exponent not below threshold by 2 stderr".into());
                }
            }
            Some(ProbeCertificate {
                spec: spec.describe(),
                expected_exponents: pair
                    .beta_list
                    .iter()
                    .map(|b| spec.expected_exponent(*b))
                    .collect(),
                fits,
            })
        }
        None => None,
    };

    let windows = plan.windows.clone();
    let window_fn = |d: f64| {
        if opts.windowing {
            windows.at(d)
        } else {
            vec![]
        }
    };
    let crosscheck = pair
        .beta_list
        .iter()
        .map(|&beta| {
            scaling_exponent(
                &phi,
                plan.center,
                beta,
                &opts.ladder,
                opts.samples,
                opts.seed,
                &window_fn,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (c, fit) in conclusions.iter_mut().zip(&crosscheck) {
        let contradicts = match c.conclusion {
            Conclusion::NotBounded => fit.verdict_hint == VerdictHint::BoundedConsistent,
            Conclusion::BoundedConsistent => fit.verdict_hint == VerdictHint::Diverges,
            Conclusion::Undecided => false,
        };
        if contradicts {
            c.candidates = vec![c.conclusion, Conclusion::Undecided];
            c.conclusion = Conclusion::Undecided;
            c.note = Some(format!(
                "crosscheck slope {:.3} +- {:.3} contradicts the rule",
                fit.slope, fit.slope_stderr
            ));
        }
        if !fit.monotone {
            caveats.push(format!("non-monotone volume ladder at beta = {}", fit.beta));
        }
    }

    Ok(Verdict {
        kind: pair.kind(),
        conclusion_per_beta: conclusions,
        triggered_rule: plan.rule,
        certificate: Certificate {
            feature: plan.feature,
            probe,
        },
        crosscheck,
        unchecked_hypotheses: hyp,
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::BivariatePolynomial;
    use crate::rif::{amy, kappa, SmoothSymbol};

    fn quick() -> DecideOptions {
        DecideOptions {
            resolution: 1024,
            samples: 100_000,
            ..DecideOptions::default()
        }
    }

    #[test]
    fn cutoff_formula() {
        assert_eq!(singular_tangency_cutoff(11.0, 2.0), 0.5);
        let c = singular_tangency_conclusions(11.0, 0.0, 2.0, 0.0, &[-0.5, 0.0, 0.49, 0.5, 0.7]);
        let got: Vec<Conclusion> = c.iter().map(|c| c.conclusion).collect();
        use Conclusion::*;
        assert_eq!(
            got,
            vec![NotBounded, NotBounded, NotBounded, Undecided, Undecided]
        );
        let fuzzy = singular_tangency_conclusions(11.0, 0.5, 2.0, 0.0, &[0.45]);
        assert_eq!(fuzzy[0].candidates, vec![NotBounded, Undecided]);
    }

    #[test]
    fn larger_tangency_order_never_shrinks_the_unbounded_range() {
        let betas: Vec<f64> = (-9..10).map(|k| k as f64 / 10.0).collect();
        let count = |m: f64| {
            singular_tangency_conclusions(m, 0.0, 2.0, 0.0, &betas)
                .iter()
                .filter(|c| c.conclusion == Conclusion::NotBounded)
                .count()
        };
        for m in 5..20 {
            assert!(count(m as f64 + 1.0) >= count(m as f64));
        }
    }

    #[test]
    fn kappa_amy_common_line() {
        let pair = SymbolPair::new(Coordinate::rif(kappa()), Coordinate::rif(amy()), vec![0.0]);
        let v = decide(&pair, &quick()).unwrap();
        assert_eq!(v.triggered_rule, RuleTag::CommonLine);
        assert_eq!(v.conclusion_at(0.0), Some(Conclusion::NotBounded));
        let tau = &v.certificate.feature["line"]["tau"];
        assert!((tau[0].as_f64().unwrap() - 1.0).abs() < 1e-8, "{tau}");
        let fit = &v.crosscheck[0];
        assert!((fit.slope - 2.0).abs() < 0.2, "{}", fit.slope);
    }

    #[test]
    fn swapped_order_gives_same_conclusion() {
        let pair = SymbolPair::new(Coordinate::rif(amy()), Coordinate::rif(kappa()), vec![0.0]);
        let v = decide(&pair, &quick()).unwrap();
        assert_eq!(v.triggered_rule, RuleTag::CommonLine);
        assert_eq!(v.conclusion_at(0.0), Some(Conclusion::NotBounded));
    }

    #[test]
    fn rotation_preserves_rule_and_conclusion() {
        let mu = C64::from_polar(1.0, 0.9);
        let pair = SymbolPair::new(
            Coordinate::rif(kappa()).rotated(mu),
            Coordinate::rif(amy()),
            vec![0.0],
        );
        let v = decide(&pair, &quick()).unwrap();
        assert_eq!(v.triggered_rule, RuleTag::CommonLine);
        assert_eq!(v.conclusion_at(0.0), Some(Conclusion::NotBounded));
    }

    #[test]
    fn example_three_pair_is_bounded_consistent() {
        let psi = SmoothSymbol::weighted_mean(1.0, 2.0).unwrap();
        let pair = SymbolPair::new(
            Coordinate::rif(kappa()).rotated(C64::new(-1.0, 0.0)),
            Coordinate::smooth(psi),
            vec![-0.5, 0.0, 0.5],
        );
        let v = decide(&pair, &quick()).unwrap();
        assert_eq!(
            v.triggered_rule,
            RuleTag::MixedTransversal,
            "{:#?}",
            v.certificate.feature
        );
        assert_eq!(v.conclusion_at(0.0), Some(Conclusion::BoundedConsistent));
        assert_eq!(v.conclusion_at(-0.5), Some(Conclusion::BoundedConsistent));
        assert_eq!(v.conclusion_at(0.5), Some(Conclusion::Undecided));
    }

    #[test]
    fn example_three_second_pair_has_common_line() {
        let z1 = SmoothSymbol::new(BivariatePolynomial::z1()).unwrap();
        let pair = SymbolPair::new(
            Coordinate::rif(amy()).rotated(C64::new(-1.0, 0.0)),
            Coordinate::smooth(z1),
            vec![0.0],
        );
        let v = decide(&pair, &quick()).unwrap();
        assert_eq!(v.triggered_rule, RuleTag::CommonLine);
        assert_eq!(v.conclusion_at(0.0), Some(Conclusion::NotBounded));
        let probe = v.certificate.probe.unwrap();
        assert!((probe.fits[0].slope - 2.0).abs() < 0.1);
    }

    #[test]
    fn identity_is_bounded_consistent() {
        let pair = SymbolPair::new(
            Coordinate::smooth(SmoothSymbol::new(BivariatePolynomial::z1()).unwrap()),
            Coordinate::smooth(SmoothSymbol::new(BivariatePolynomial::z2()).unwrap()),
            vec![0.0],
        );
        let v = decide(&pair, &quick()).unwrap();
        assert_eq!(v.triggered_rule, RuleTag::SmoothFirstOrder);
        assert_eq!(v.conclusion_at(0.0), Some(Conclusion::BoundedConsistent));
    }

    #[test]
    fn diagonal_symbols_are_not_bounded() {
        for f in [kappa(), amy()] {
            let c = Coordinate::rif(f);
            let pair = SymbolPair::new(c.clone(), c, vec![0.0]);
            let v = decide(&pair, &quick()).unwrap();
            assert_eq!(v.triggered_rule, RuleTag::IdenticalCoordinates);
            assert_eq!(v.conclusion_at(0.0), Some(Conclusion::NotBounded));
        }
    }

    #[test]
    fn beta_outside_range_is_rejected() {
        let pair = SymbolPair::new(Coordinate::rif(kappa()), Coordinate::rif(amy()), vec![1.0]);
        assert!(matches!(
            decide(&pair, &quick()),
            Err(VerdictError::BetaOutOfRange(_))
        ));
    }
}
