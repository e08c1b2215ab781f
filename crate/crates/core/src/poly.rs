//! Dense complex polynomials in one and two variables.
//!
//! A [`BivariatePolynomial`] of bidegree `(n, m)` stores the `(n+1) x (m+1)`
//! coefficient grid row-major; entry `(j, k)` multiplies `z1^j z2^k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

pub type C64 = Complex64;
/// Double-double complex number.
pub type DdComplex = num_complex::Complex<TwoFloat>;

/// Relative size below which a trailing univariate coefficient is dropped.
pub const DROP_TOL: f64 = 1e-13;
/// Relative tolerance of [`BivariatePolynomial::divides_linear`].
pub const DIVIDES_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("polynomial has degree 0, there are no roots")]
    NoRoots,
    #[error("non-finite coefficient")]
    InvalidInput,
    #[error("slice at z1 = {z1} has degree 0 in z2")]
    DegenerateSlice { z1: C64 },
    #[error("ragged coefficient grid: row {row} has {got} entries, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("declared bidegree ({n}, {m}) does not match the coefficient grid")]
    BidegreeMismatch { n: usize, m: usize },
    #[error("declared bidegree ({n}, {m}) is not exact: last row or column is zero")]
    InexactBidegree { n: usize, m: usize },
}

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnivariatePolynomial {
    coeffs: Vec<C64>,
}

impl UnivariatePolynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing
    /// entries below `DROP_TOL` relative to the largest coefficient.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        while coeffs.len() > 1 && scale.is_finite() {
            let last = coeffs[coeffs.len() - 1].norm();
            if last <= DROP_TOL * scale || last == 0.0 {
                coeffs.pop();
            } else {
                break;
            }
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        UnivariatePolynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn evaluate(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
    }

    pub fn derivative(&self) -> UnivariatePolynomial {
        if self.coeffs.len() == 1 {
            return UnivariatePolynomial::new(vec![C64::new(0.0, 0.0)]);
        }
        UnivariatePolynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| a * k as f64)
                .collect(),
        )
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            d = d * z + v;
            v = v * z + a;
        }
        (v, d)
    }

    /// Natural scale for the residual at `z`: the sum of `|c_k| |z|^k`.
    pub fn residual_scale(&self, z: C64) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc * r + a.norm())
    }

    /// All complex roots with multiplicity, sorted by (real, imaginary).
    ///
    /// Aberth-Ehrlich simultaneous iteration followed by a Newton polish.
    pub fn roots(&self) -> Result<Vec<C64>, PolyError> {
        if self
            .coeffs
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(PolyError::InvalidInput);
        }
        let n = self.degree();
        if n == 0 {
            return Err(PolyError::NoRoots);
        }
        let mut out = Vec::with_capacity(n);
        let lead = self.coeffs[n];
        let mut a: Vec<C64> = self.coeffs.iter().map(|&z| z / lead).collect();
        // Exact zero roots are split off so the iteration sees c0 != 0.
        let zeros = a.iter().take_while(|z| z.norm() == 0.0).count();
        out.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(zeros));
        a.drain(..zeros);
        let q = UnivariatePolynomial { coeffs: a };
        match q.degree() {
            0 => {}
            1 => out.push(-q.coeffs[0] / q.coeffs[1]),
            _ => out.extend(q.aberth()),
        }
        out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        Ok(out)
    }

    fn aberth(&self) -> Vec<C64> {
        let n = self.degree();
        let r0 = (self.coeffs[0].norm() / self.coeffs[n].norm()).powf(1.0 / n as f64);
        let mut z: Vec<C64> = (0..n)
            .map(|k| C64::from_polar(r0, std::f64::consts::TAU * k as f64 / n as f64 + 0.4))
            .collect();
        let mut done = vec![false; n];
        for _ in 0..800 {
            let mut moved = false;
            for i in 0..n {
                if done[i] {
                    continue;
                }
                let (v, d) = self.eval_with_derivative(z[i]);
                if v.norm() <= 4.0 * f64::EPSILON * self.residual_scale(z[i]) {
                    done[i] = true;
                    continue;
                }
                let s: C64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (z[i] - z[j]).inv())
                    .sum();
                let denom = d / v - s;
                if denom.norm() == 0.0 || !denom.re.is_finite() {
                    continue;
                }
                let w = denom.inv();
                z[i] -= w;
                if w.norm() <= 2.0 * f64::EPSILON * z[i].norm() {
                    done[i] = true;
                } else {
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        for zi in z.iter_mut() {
            for _ in 0..3 {
                let (v, d) = self.eval_with_derivative(*zi);
                if d.norm() == 0.0 {
                    break;
                }
                let cand = *zi - v / d;
                if self.evaluate(cand).norm() < v.norm() {
                    *zi = cand;
                } else {
                    break;
                }
            }
        }
        z
    }
}

/// Dense polynomial in `(z1, z2)`; bidegree is always exact after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariatePolynomial {
    n: usize,
    m: usize,
    c: Vec<C64>,
}

impl BivariatePolynomial {
    /// Builds from rows (`rows[j][k]` multiplies `z1^j z2^k`), trimming
    /// exactly-zero trailing rows and columns.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, PolyError> {
        let width = rows.first().map_or(1, |r| r.len());
        for (j, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(PolyError::Ragged {
                    row: j,
                    got: r.len(),
                    expected: width,
                });
            }
            if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(PolyError::InvalidInput);
            }
        }
        if rows.is_empty() || width == 0 {
            return Ok(Self::zero());
        }
        let n = rows.len() - 1;
        let m = width - 1;
        Ok(Self::from_fn(n, m, |j, k| rows[j][k]))
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(rows).expect("real rows must be rectangular and finite")
    }

    pub fn from_fn(n: usize, m: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut c = Vec::with_capacity((n + 1) * (m + 1));
        for j in 0..=n {
            for k in 0..=m {
                c.push(f(j, k));
            }
        }
        BivariatePolynomial { n, m, c }.trim_exact()
    }

    pub fn zero() -> Self {
        BivariatePolynomial {
            n: 0,
            m: 0,
            c: vec![C64::new(0.0, 0.0)],
        }
    }

    pub fn constant(a: C64) -> Self {
        BivariatePolynomial {
            n: 0,
            m: 0,
            c: vec![a],
        }
    }

    pub fn z1() -> Self {
        Self::from_real_rows(&[&[0.0], &[1.0]])
    }

    pub fn z2() -> Self {
        Self::from_real_rows(&[&[0.0, 1.0]])
    }

    fn trim_exact(mut self) -> Self {
        let zero = C64::new(0.0, 0.0);
        let mut n = self.n;
        while n > 0 && (0..=self.m).all(|k| self.c[n * (self.m + 1) + k] == zero) {
            n -= 1;
        }
        let mut m = self.m;
        while m > 0 && (0..=n).all(|j| self.c[j * (self.m + 1) + m] == zero) {
            m -= 1;
        }
        if n != self.n || m != self.m {
            let w = self.m + 1;
            let c = (0..=n)
                .flat_map(|j| (0..=m).map(move |k| (j, k)))
                .map(|(j, k)| self.c[j * w + k])
                .collect();
            self = BivariatePolynomial { n, m, c };
        }
        self
    }

    /// Zeroes coefficients below `rel_tol` times the max-norm, then trims.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.max_norm();
        Self::from_fn(self.n, self.m, |j, k| {
            let a = self.coeff(j, k);
            if a.norm() <= cut {
                C64::new(0.0, 0.0)
            } else {
                a
            }
        })
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn coeff(&self, j: usize, k: usize) -> C64 {
        if j <= self.n && k <= self.m {
            self.c[j * (self.m + 1) + k]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.c.chunks(self.m + 1).map(|r| r.to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn max_norm(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sum of coefficient moduli; bounds `|p|` on the closed bidisc.
    pub fn l1_norm(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).sum()
    }

    pub fn evaluate(&self, z1: C64, z2: C64) -> C64 {
        let w = self.m + 1;
        let mut acc = C64::new(0.0, 0.0);
        for j in (0..=self.n).rev() {
            let row = &self.c[j * w..(j + 1) * w];
            let r = row
                .iter()
                .rev()
                .fold(C64::new(0.0, 0.0), |a, &b| a * z2 + b);
            acc = acc * z1 + r;
        }
        acc
    }

    /// Horner evaluation carried out in double-double arithmetic, for
    /// points where `p` vanishes to high order and cancellation swamps the
    /// plain result.
    pub fn evaluate_compensated(&self, z1: C64, z2: C64) -> C64 {
        let lift = |z: C64| DdComplex::new(TwoFloat::from(z.re), TwoFloat::from(z.im));
        let v = self.evaluate_dd(lift(z1), lift(z2));
        C64::new(v.re.hi() + v.re.lo(), v.im.hi() + v.im.lo())
    }

    /// Horner evaluation at a double-double point.
    pub fn evaluate_dd(&self, z1: DdComplex, z2: DdComplex) -> DdComplex {
        let w = self.m + 1;
        let zero = DdComplex::new(TwoFloat::from(0.0), TwoFloat::from(0.0));
        let mut acc = zero;
        for j in (0..=self.n).rev() {
            let row = &self.c[j * w..(j + 1) * w];
            let r = row.iter().rev().fold(zero, |a, &b| {
                a * z2 + DdComplex::new(TwoFloat::from(b.re), TwoFloat::from(b.im))
            });
            acc = acc * z1 + r;
        }
        acc
    }

    /// Value and both partial derivatives `(p, dp/dz1, dp/dz2)`.
    pub fn eval_grad(&self, z1: C64, z2: C64) -> (C64, C64, C64) {
        let w = self.m + 1;
        let zero = C64::new(0.0, 0.0);
        let (mut v, mut d1, mut d2) = (zero, zero, zero);
        for j in (0..=self.n).rev() {
            let row = &self.c[j * w..(j + 1) * w];
            let (mut r, mut rd) = (zero, zero);
            for &a in row.iter().rev() {
                rd = rd * z2 + r;
                r = r * z2 + a;
            }
            d1 = d1 * z1 + v;
            v = v * z1 + r;
            d2 = d2 * z1 + rd;
        }
        (v, d1, d2)
    }

    /// The reflection `z1^n z2^m conj(p(1/conj z1, 1/conj z2))`.
    pub fn reflect(&self) -> Self {
        let (n, m) = (self.n, self.m);
        Self::from_fn(n, m, |j, k| self.coeff(n - j, m - k).conj())
    }

    /// `p(z2, z1)`.
    pub fn swap_vars(&self) -> Self {
        Self::from_fn(self.m, self.n, |j, k| self.coeff(k, j))
    }

    /// `z2 -> p(z1, z2)` for fixed `z1`.
    pub fn slice_z1(&self, z1: C64) -> UnivariatePolynomial {
        let w = self.m + 1;
        let mut out = vec![C64::new(0.0, 0.0); w];
        for j in (0..=self.n).rev() {
            for (o, c) in out.iter_mut().zip(&self.c[j * w..(j + 1) * w]) {
                *o = *o * z1 + c;
            }
        }
        UnivariatePolynomial::new(out)
    }

    /// `z1 -> p(z1, z2)` for fixed `z2`.
    pub fn slice_z2(&self, z2: C64) -> UnivariatePolynomial {
        let w = self.m + 1;
        let out = (0..=self.n)
            .map(|j| {
                self.c[j * w..(j + 1) * w]
                    .iter()
                    .rev()
                    .fold(C64::new(0.0, 0.0), |a, &b| a * z2 + b)
            })
            .collect();
        UnivariatePolynomial::new(out)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(self.n, self.m, |j, k| self.coeff(j, k) * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.n.max(other.n), self.m.max(other.m), |j, k| {
            self.coeff(j, k) + other.coeff(j, k)
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n.max(other.n), self.m.max(other.m), |j, k| {
            self.coeff(j, k) - other.coeff(j, k)
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (n, m) = (self.n + other.n, self.m + other.m);
        let mut c = vec![C64::new(0.0, 0.0); (n + 1) * (m + 1)];
        for j in 0..=self.n {
            for k in 0..=self.m {
                let a = self.coeff(j, k);
                for jj in 0..=other.n {
                    for kk in 0..=other.m {
                        c[(j + jj) * (m + 1) + k + kk] += a * other.coeff(jj, kk);
                    }
                }
            }
        }
        BivariatePolynomial { n, m, c }.trim_exact()
    }

    /// True iff `(z1 - tau)` divides `self`: every z2-coefficient column,
    /// read as a polynomial in `z1`, vanishes at `tau` to `DIVIDES_TOL`
    /// relative to the coefficient scale. `tau` must be unimodular; other
    /// inputs return false.
    pub fn divides_linear(&self, tau: C64) -> bool {
        if (tau.norm() - 1.0).abs() > 1e-12 || self.is_zero() {
            return false;
        }
        let scale = self.max_norm() * (self.n + 1) as f64;
        (0..=self.m).all(|k| {
            let v = (0..=self.n)
                .rev()
                .fold(C64::new(0.0, 0.0), |a, j| a * tau + self.coeff(j, k));
            v.norm() <= DIVIDES_TOL * scale
        })
    }

    /// True iff `(z2 - tau)` divides `self`.
    pub fn divides_linear_z2(&self, tau: C64) -> bool {
        self.swap_vars().divides_linear(tau)
    }

    /// Quotient of synthetic division by `(z1 - tau)`; the remainder is discarded.
    pub fn div_linear_z1(&self, tau: C64) -> Self {
        if self.n == 0 {
            return Self::zero();
        }
        let (n, m) = (self.n - 1, self.m);
        let mut q = vec![C64::new(0.0, 0.0); (n + 1) * (m + 1)];
        for k in 0..=m {
            let mut carry = C64::new(0.0, 0.0);
            for j in (0..self.n).rev() {
                carry = carry * tau + self.coeff(j + 1, k);
                q[j * (m + 1) + k] = carry;
            }
        }
        BivariatePolynomial { n, m, c: q }.trim_exact()
    }

    /// Quotient of synthetic division by `(z2 - tau)`.
    pub fn div_linear_z2(&self, tau: C64) -> Self {
        self.swap_vars().div_linear_z1(tau).swap_vars()
    }

    /// Sampled stability certificate.
    ///
    /// For each `zeta` on an `angular`-point circle grid and each radius
    /// `r = (i+1)/radial`, the roots of `z1 -> p(z1, r zeta)` (and of
    /// `z2 -> p(r zeta, z2)`) must have modulus at least `1 - tol`.
    pub fn is_stable(&self, angular: usize, radial: usize, tol: f64) -> StabilityReport {
        let scan = |p: &BivariatePolynomial, swapped: bool| -> Option<(f64, C64, C64)> {
            if p.n == 0 {
                return None;
            }
            (0..angular)
                .into_par_iter()
                .map(|a| {
                    let zeta =
                        C64::from_polar(1.0, std::f64::consts::TAU * a as f64 / angular as f64);
                    let mut best: Option<(f64, C64, C64)> = None;
                    for i in 0..radial {
                        let w = zeta * ((i + 1) as f64 / radial as f64);
                        let s = p.slice_z2(w);
                        let cand = if s.is_zero() {
                            Some((0.0, C64::new(0.0, 0.0)))
                        } else {
                            s.roots().ok().and_then(|rs| {
                                rs.into_iter()
                                    .map(|r| (r.norm(), r))
                                    .min_by(|x, y| x.0.total_cmp(&y.0))
                            })
                        };
                        if let Some((modulus, root)) = cand {
                            let loc = if swapped { (w, root) } else { (root, w) };
                            if best.map_or(true, |b| modulus < b.0) {
                                best = Some((modulus, loc.0, loc.1));
                            }
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .min_by(|x, y| x.0.total_cmp(&y.0))
        };
        let first = scan(self, false);
        let second = scan(&self.swap_vars(), true);
        let best = [first, second]
            .into_iter()
            .flatten()
            .min_by(|x, y| x.0.total_cmp(&y.0));
        let nonzero = !self.is_zero();
        let (min_modulus, witness) = match best {
            Some((m, a, b)) => (m, Some([a, b])),
            None => (f64::INFINITY, None),
        };
        StabilityReport {
            consistent: nonzero && min_modulus >= 1.0 - tol,
            min_modulus: if nonzero { min_modulus } else { 0.0 },
            witness,
            angular,
            radial,
            tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// "Consistent with stable" on the sampled grid; not a proof.
    pub consistent: bool,
    pub min_modulus: f64,
    /// Location `(z1, z2)` of the smallest-modulus root found.
    pub witness: Option<[C64; 2]>,
    pub angular: usize,
    pub radial: usize,
    pub tol: f64,
}

/// Resultant of the z2-slices of `p` and `q` at `z1`.
///
/// Convention: determinant of the Sylvester matrix with the rows of `p`'s
/// slice first, so `Res(z - a, z - b) = a - b`.
pub fn resultant_z2(
    p: &BivariatePolynomial,
    q: &BivariatePolynomial,
    z1: C64,
) -> Result<C64, PolyError> {
    let f = p.slice_z1(z1);
    let g = q.slice_z1(z1);
    if f.degree() == 0 || g.degree() == 0 {
        return Err(PolyError::DegenerateSlice { z1 });
    }
    Ok(sylvester_determinant(&f, &g))
}

/// Hadamard bound `|f|_2^deg(g) |g|_2^deg(f)` on the slice resultant; the
/// natural scale for deciding that a resultant vanishes.
pub fn resultant_scale_z2(p: &BivariatePolynomial, q: &BivariatePolynomial, z1: C64) -> f64 {
    let f = p.slice_z1(z1);
    let g = q.slice_z1(z1);
    f.l2_norm().powi(g.degree() as i32) * g.l2_norm().powi(f.degree() as i32)
}

pub fn sylvester_determinant(f: &UnivariatePolynomial, g: &UnivariatePolynomial) -> C64 {
    let (a, b) = (f.degree(), g.degree());
    let size = a + b;
    let mut s = DMatrix::<C64>::zeros(size, size);
    for i in 0..b {
        for (t, &x) in f.coeffs().iter().rev().enumerate() {
            s[(i, i + t)] = x;
        }
    }
    for i in 0..a {
        for (t, &x) in g.coeffs().iter().rev().enumerate() {
            s[(b + i, i + t)] = x;
        }
    }
    s.lu().determinant()
}

/// Wire format: `{"bidegree": [n, m], "coeffs": [[[re, im], ...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub bidegree: [usize; 2],
    pub coeffs: Vec<Vec<[f64; 2]>>,
}

impl From<&BivariatePolynomial> for PolynomialJson {
    fn from(p: &BivariatePolynomial) -> Self {
        PolynomialJson {
            bidegree: [p.n, p.m],
            coeffs: p
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<PolynomialJson> for BivariatePolynomial {
    type Error = PolyError;

    fn try_from(js: PolynomialJson) -> Result<Self, PolyError> {
        let [n, m] = js.bidegree;
        if js.coeffs.len() != n + 1 {
            return Err(PolyError::BidegreeMismatch { n, m });
        }
        for (j, r) in js.coeffs.iter().enumerate() {
            if r.len() != m + 1 {
                return Err(PolyError::Ragged {
                    row: j,
                    got: r.len(),
                    expected: m + 1,
                });
            }
        }
        let rows: Vec<Vec<C64>> = js
            .coeffs
            .iter()
            .map(|r| r.iter().map(|x| c(x[0], x[1])).collect())
            .collect();
        let p = Self::from_rows(rows)?;
        if p.bidegree() != (n, m) && !(n == 0 && m == 0) {
            return Err(PolyError::InexactBidegree { n, m });
        }
        Ok(p)
    }
}

impl Serialize for BivariatePolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolynomialJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for BivariatePolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let js = PolynomialJson::deserialize(d)?;
        BivariatePolynomial::try_from(js).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kappa_p() -> BivariatePolynomial {
        BivariatePolynomial::from_real_rows(&[&[2.0, -1.0], &[-1.0, 0.0]])
    }

    fn amy_p() -> BivariatePolynomial {
        BivariatePolynomial::from_real_rows(&[&[4.0, -1.0], &[-3.0, -1.0], &[1.0, 0.0]])
    }

    fn one() -> C64 {
        c(1.0, 0.0)
    }

    #[test]
    fn evaluate_examples() {
        let p = kappa_p();
        assert_eq!(p.evaluate(c(0.0, 0.0), c(0.0, 0.0)), c(2.0, 0.0));
        assert_eq!(p.evaluate(one(), one()), c(0.0, 0.0));
        assert_eq!(amy_p().evaluate(one(), one()), c(0.0, 0.0));
    }

    #[test]
    fn reflect_examples() {
        let kt = BivariatePolynomial::from_real_rows(&[&[0.0, -1.0], &[-1.0, 2.0]]);
        assert_eq!(kappa_p().reflect(), kt);
        // 4 z1^2 z2 - z1^2 - 3 z1 z2 - z1 + z2
        let at = BivariatePolynomial::from_real_rows(&[&[0.0, 1.0], &[-1.0, -3.0], &[-1.0, 4.0]]);
        assert_eq!(amy_p().reflect(), at);
        assert_eq!(amy_p().reflect().reflect(), amy_p());
    }

    #[test]
    fn slice_examples() {
        assert_eq!(
            kappa_p().slice_z1(one()).coeffs(),
            &[c(1.0, 0.0), c(-1.0, 0.0)]
        );
        let kt = kappa_p().reflect();
        assert_eq!(
            kt.slice_z1(c(-1.0, 0.0)).coeffs(),
            &[c(1.0, 0.0), c(-3.0, 0.0)]
        );
        let a = amy_p();
        let col0: Vec<C64> = (0..=2).map(|j| a.coeff(j, 0)).collect();
        assert_eq!(a.slice_z2(c(0.0, 0.0)).coeffs(), &col0[..]);
    }

    #[test]
    fn roots_examples() {
        let r = UnivariatePolynomial::from_real(&[1.0, -3.0])
            .roots()
            .unwrap();
        assert!((r[0] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let r = UnivariatePolynomial::from_real(&[1.0, -2.0, 1.0])
            .roots()
            .unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|z| (z - one()).norm() < 1e-7));
        let r = UnivariatePolynomial::from_real(&[1.0, 0.0, 1.0])
            .roots()
            .unwrap();
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14 && (r[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn roots_errors() {
        assert_eq!(
            UnivariatePolynomial::from_real(&[3.0]).roots(),
            Err(PolyError::NoRoots)
        );
        assert_eq!(
            UnivariatePolynomial::from_real(&[1.0, f64::NAN]).roots(),
            Err(PolyError::InvalidInput)
        );
        assert_eq!(
            UnivariatePolynomial::from_real(&[1.0, 1.0, f64::INFINITY]).roots(),
            Err(PolyError::InvalidInput)
        );
    }

    #[test]
    fn roots_with_zero_root_and_trimming() {
        let r = UnivariatePolynomial::from_real(&[0.0, 0.0, -1.0, 1.0, 1e-17])
            .roots()
            .unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0], c(0.0, 0.0));
        assert!((r[2] - one()).norm() < 1e-14);
    }

    #[test]
    fn resultant_examples() {
        let p = amy_p();
        assert!(resultant_z2(&p, &p, c(0.3, 0.2)).unwrap().norm() < 1e-12);
        let (a, b) = (c(0.5, -0.25), c(-1.0, 2.0));
        let f = BivariatePolynomial::from_rows(vec![vec![-a, one()]]).unwrap();
        let g = BivariatePolynomial::from_rows(vec![vec![-b, one()]]).unwrap();
        assert!((resultant_z2(&f, &g, c(0.0, 0.0)).unwrap() - (a - b)).norm() < 1e-15);
        let err = resultant_z2(&f, &BivariatePolynomial::constant(one()), c(0.1, 0.0));
        assert!(matches!(err, Err(PolyError::DegenerateSlice { .. })));
    }

    #[test]
    fn resultant_on_anti_diagonal_component() {
        // p + p~ for AMY and for AMY with swapped variables.
        let a = amy_p();
        let q1 = a.add(&a.reflect());
        let s = a.swap_vars();
        let q2 = s.add(&s.reflect());
        for t in 0..8 {
            let z1 = C64::from_polar(1.0, 0.3 + 0.7 * t as f64);
            let r = resultant_z2(&q1, &q2, z1).unwrap();
            assert!(r.norm() <= 1e-12 * resultant_scale_z2(&q1, &q2, z1), "{r}");
        }
        assert!(resultant_z2(&q1, &q2, c(0.3, 0.1)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn divides_linear_examples() {
        // (z1 - 1)(z2 + 2)
        let q = BivariatePolynomial::from_real_rows(&[&[-2.0, -1.0], &[2.0, 1.0]]);
        assert!(q.divides_linear(one()));
        let k = kappa_p();
        let sum = k.add(&k.reflect());
        assert_eq!(
            sum,
            BivariatePolynomial::from_real_rows(&[&[2.0, -2.0], &[-2.0, 2.0]])
        );
        assert!(sum.divides_linear(one()));
        assert!(sum.divides_linear_z2(one()));
        let q = k.sub(&k.reflect().scale(c(0.0, 1.0)));
        assert_eq!(q.evaluate(one(), c(0.0, 0.0)), c(1.0, 1.0));
        assert!(!q.divides_linear(one()));
    }

    #[test]
    fn synthetic_division_recovers_factor() {
        let tau = C64::from_polar(1.0, 0.7);
        let f = BivariatePolynomial::from_rows(vec![vec![-tau], vec![one()]]).unwrap();
        let g = amy_p();
        let prod = f.mul(&g);
        let back = prod.div_linear_z1(tau);
        for (x, y) in back.c.iter().zip(g.c.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
        let h = BivariatePolynomial::from_rows(vec![vec![-tau, one()]]).unwrap();
        let back = h.mul(&g).div_linear_z2(tau);
        assert_eq!(back.bidegree(), g.bidegree());
    }

    #[test]
    fn stability_examples() {
        let r = kappa_p().is_stable(512, 16, 1e-6);
        assert!(r.consistent);
        assert!((r.min_modulus - 1.0).abs() < 1e-9);
        let w = r.witness.unwrap();
        assert!((w[0] - one()).norm() < 1e-6 && (w[1] - one()).norm() < 1e-6);
        let bad = BivariatePolynomial::from_real_rows(&[&[-0.5], &[1.0]]);
        let r = bad.is_stable(64, 16, 1e-6);
        assert!(!r.consistent);
        assert!((r.witness.unwrap()[0] - c(0.5, 0.0)).norm() < 1e-12);
        assert!(amy_p().is_stable(512, 16, 1e-6).consistent);
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let p = amy_p();
        let s = serde_json::to_string(&p).unwrap();
        let back: BivariatePolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let ragged = r#"{"bidegree":[1,1],"coeffs":[[[1,0],[2,0]],[[1,0]]]}"#;
        assert!(serde_json::from_str::<BivariatePolynomial>(ragged).is_err());
        let inexact = r#"{"bidegree":[1,1],"coeffs":[[[1,0],[2,0]],[[0,0],[0,0]]]}"#;
        assert!(serde_json::from_str::<BivariatePolynomial>(inexact).is_err());
        let nan = r#"{"bidegree":[0,0],"coeffs":[[[1e999,0]]]}"#;
        assert!(serde_json::from_str::<BivariatePolynomial>(nan).is_err());
    }

    #[test]
    fn eval_grad_matches_coefficients() {
        let p = amy_p();
        let (z1, z2) = (c(0.3, -0.4), c(-0.2, 0.5));
        let (v, d1, d2) = p.eval_grad(z1, z2);
        assert!((v - p.evaluate(z1, z2)).norm() < 1e-14);
        // d/dz1 = -3 - z2 + 2 z1 ; d/dz2 = -1 - z1
        assert!((d1 - (c(-3.0, 0.0) - z2 + z1 * 2.0)).norm() < 1e-14);
        assert!((d2 - (c(-1.0, 0.0) - z1)).norm() < 1e-14);
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
    }

    fn arb_poly() -> impl Strategy<Value = BivariatePolynomial> {
        (0usize..4, 0usize..4)
            .prop_flat_map(|(n, m)| {
                prop::collection::vec(arb_c64(), (n + 1) * (m + 1)).prop_map(move |v| (n, m, v))
            })
            .prop_map(|(n, m, v)| BivariatePolynomial::from_fn(n, m, |j, k| v[j * (m + 1) + k]))
    }

    proptest! {
        #[test]
        fn reflect_is_involution(p in arb_poly()) {
            let back = p.reflect().reflect();
            prop_assert_eq!(back.bidegree(), p.bidegree());
            for (x, y) in back.c.iter().zip(p.c.iter()) {
                prop_assert!((x - y).norm() <= 1e-15);
            }
        }

        #[test]
        fn reflection_has_equal_modulus_on_torus(p in arb_poly(), s in 0.0..6.3f64, t in 0.0..6.3f64) {
            let (z1, z2) = (C64::from_polar(1.0, s), C64::from_polar(1.0, t));
            let a = p.evaluate(z1, z2).norm();
            let b = p.reflect().evaluate(z1, z2).norm();
            prop_assert!((a - b).abs() <= 1e-10);
        }

        #[test]
        fn evaluate_at_origin_is_constant_term(p in arb_poly()) {
            prop_assert_eq!(p.evaluate(c(0.0, 0.0), c(0.0, 0.0)), p.coeff(0, 0));
        }

        #[test]
        fn roots_have_small_residual(v in prop::collection::vec(arb_c64(), 2..10)) {
            let q = UnivariatePolynomial::new(v);
            prop_assume!(q.degree() >= 1);
            for r in q.roots().unwrap() {
                prop_assert!(q.evaluate(r).norm() <= 1e-9 * q.residual_scale(r));
            }
        }

        #[test]
        fn resultant_vanishes_on_common_root(
            a in prop::collection::vec(arb_c64(), 2..4),
            b in prop::collection::vec(arb_c64(), 2..4),
            z1 in arb_c64(),
            root in arb_c64(),
        ) {
            // p = (z2 - root - (z1 - z1*)) * A(z1, z2), sharing z2 = root at z1*.
            let lin = BivariatePolynomial::from_rows(vec![vec![-root + z1, one()], vec![-one(), c(0.0, 0.0)]]).unwrap();
            let pa = BivariatePolynomial::from_rows(vec![a.clone()]).unwrap();
            let pb = BivariatePolynomial::from_fn(1, 2, |j, k| if j == 0 { b[k % b.len()] } else { a[k % a.len()] });
            let p = lin.mul(&pa);
            let q = lin.mul(&pb);
            prop_assume!(p.slice_z1(z1).degree() >= 1 && q.slice_z1(z1).degree() >= 1);
            let r = resultant_z2(&p, &q, z1).unwrap();
            prop_assert!(r.norm() <= 1e-8 * resultant_scale_z2(&p, &q, z1).max(1.0));
        }

        #[test]
        fn divides_linear_implies_vanishing_slice(p in arb_poly(), s in 0.0..6.3f64) {
            let tau = C64::from_polar(1.0, s);
            let f = BivariatePolynomial::from_rows(vec![vec![-tau], vec![one()]]).unwrap();
            let q = f.mul(&p);
            prop_assume!(!p.is_zero());
            prop_assert!(q.divides_linear(tau));
            let scale = q.l1_norm();
            for k in 0..32 {
                let z2 = C64::from_polar(1.0, k as f64 * 0.2);
                prop_assert!(q.evaluate(tau, z2).norm() <= DIVIDES_TOL * scale);
            }
        }
    }
}
