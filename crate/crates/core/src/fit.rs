//! Straight-line fits used for every exponent estimate.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares; stderr from the residual variance.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let w = vec![1.0; xs.len()];
    let fit = weighted(xs, ys, &w)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2))
        .sum();
    Some(LinearFit {
        slope_stderr: (rss / (n - 2.0) / sxx).sqrt(),
        ..fit
    })
}

/// Weighted least squares with per-point standard deviations `sigmas`.
///
/// The stderr is the known-variance value inflated by the reduced
/// chi-square when the data scatter more than their error bars.
pub fn wls(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Option<LinearFit> {
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let fit = weighted(xs, ys, &w)?;
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let chi2: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (y - fit.intercept - fit.slope * x).powi(2))
        .sum();
    let inflate = (chi2 / (xs.len() as f64 - 2.0)).max(1.0);
    Some(LinearFit {
        slope_stderr: (inflate / sxx).sqrt(),
        ..fit
    })
}

fn weighted(xs: &[f64], ys: &[f64], w: &[f64]) -> Option<LinearFit> {
    if xs.len() < 3 || xs.len() != ys.len() || xs.len() != w.len() {
        return None;
    }
    if w.iter().chain(xs).chain(ys).any(|v| !v.is_finite()) {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let syy: f64 = ys.iter().zip(w).map(|(y, w)| w * (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = syy - slope * sxy;
    let r2 = if syy > 0.0 {
        1.0 - rss.max(0.0) / syy
    } else {
        1.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr: 0.0,
        r2,
        points: xs.len(),
    })
}
