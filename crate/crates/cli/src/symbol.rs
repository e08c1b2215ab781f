//! Symbol specifications: builtin names, inline JSON or JSON files.
//!
//! Grammar: `[-|neg:][swap:]<base>` where `<base>` is one of `kappa`, `amy`,
//! `kappa_iterate:<n>`, `z1`, `z2`, `mean:<w1>,<w2>`, an inline JSON object
//! `{"p": <polynomial>}` (inner) or `{"psi": <polynomial>}` (smooth), or a
//! path to a file holding such an object. Either object may carry
//! `"lambda": [re, im]`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use bidisc::poly::{BivariatePolynomial, C64};
use bidisc::rif::{builtin, make_rif, Coordinate, SmoothSymbol};
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolJson {
    p: Option<BivariatePolynomial>,
    psi: Option<BivariatePolynomial>,
    lambda: Option<[f64; 2]>,
}

/// A parsed symbol with the canonical JSON it was resolved to.
pub struct Symbol {
    pub coordinate: Coordinate,
    pub resolved: serde_json::Value,
}

pub fn parse(spec: &str) -> Result<Symbol> {
    let (negate, rest) = if let Some(r) = spec.strip_prefix("neg:") {
        (true, r)
    } else if let Some(r) = spec.strip_prefix('-') {
        (true, r)
    } else {
        (false, spec)
    };
    let (swap, base) = match rest.strip_prefix("swap:") {
        Some(r) => (true, r),
        None => (false, rest),
    };
    let mut coordinate = parse_base(base).with_context(|| format!("symbol spec `{spec}`"))?;
    if swap {
        coordinate = swapped(&coordinate)?;
    }
    if negate {
        coordinate = coordinate.rotated(C64::new(-1.0, 0.0));
    }
    let resolved = canonical(&coordinate);
    Ok(Symbol {
        coordinate,
        resolved,
    })
}

fn parse_base(base: &str) -> Result<Coordinate> {
    let trimmed = base.trim_start();
    if trimmed.starts_with('{') {
        return from_json(trimmed);
    }
    if base.ends_with(".json") || Path::new(base).is_file() {
        let text = std::fs::read_to_string(base).with_context(|| format!("reading {base}"))?;
        return from_json(&text);
    }
    match base {
        "z1" => smooth(BivariatePolynomial::z1()),
        "z2" => smooth(BivariatePolynomial::z2()),
        _ => {
            if let Some(w) = base.strip_prefix("mean:") {
                let (a, b) = w
                    .split_once(',')
                    .ok_or_else(|| anyhow!("expected mean:<w1>,<w2>"))?;
                let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
                if !(a > 0.0 && b > 0.0) {
                    bail!("mean weights must be positive");
                }
                return Ok(Coordinate::smooth(SmoothSymbol::weighted_mean(a, b)?));
            }
            Ok(Coordinate::rif(builtin(base)?))
        }
    }
}

fn smooth(p: BivariatePolynomial) -> Result<Coordinate> {
    Ok(Coordinate::smooth(SmoothSymbol::new(p)?))
}

fn from_json(text: &str) -> Result<Coordinate> {
    let js: SymbolJson = serde_json::from_str(text).context("parsing symbol JSON")?;
    let coordinate = match (js.p, js.psi) {
        (Some(p), None) => Coordinate::rif(make_rif(p)?),
        (None, Some(psi)) => smooth(psi)?,
        _ => bail!("symbol JSON needs exactly one of \"p\" (inner) or \"psi\" (smooth)"),
    };
    Ok(match js.lambda {
        Some([re, im]) => {
            let l = C64::new(re, im);
            if (l.norm() - 1.0).abs() > 1e-12 {
                bail!("lambda must be unimodular, got {l}");
            }
            coordinate.rotated(l)
        }
        None => coordinate,
    })
}

fn swapped(c: &Coordinate) -> Result<Coordinate> {
    Ok(match c {
        Coordinate::Rif { f, lambda } => Coordinate::rif(f.swapped()).rotated(*lambda),
        Coordinate::Smooth { f, lambda } => {
            Coordinate::smooth(SmoothSymbol::new(f.polynomial().swap_vars())?).rotated(*lambda)
        }
    })
}

fn canonical(c: &Coordinate) -> serde_json::Value {
    let l = c.lambda();
    match c {
        Coordinate::Rif { f, .. } => {
            serde_json::json!({"p": f.denominator(), "lambda": [l.re, l.im]})
        }
        Coordinate::Smooth { f, .. } => {
            serde_json::json!({"psi": f.polynomial(), "lambda": [l.re, l.im]})
        }
    }
}

/// Parses `re,im`, a real number, `i`, `-i` or `exp:<angle>`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let s = s.trim();
    if let Some(t) = s.strip_prefix("exp:") {
        return Ok(C64::from_polar(1.0, t.trim().parse()?));
    }
    match s {
        "i" => return Ok(C64::new(0.0, 1.0)),
        "-i" => return Ok(C64::new(0.0, -1.0)),
        _ => {}
    }
    let z = match s.split_once(',') {
        Some((a, b)) => C64::new(a.trim().parse()?, b.trim().parse()?),
        None => C64::new(s.parse()?, 0.0),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        bail!("non-finite value `{s}`");
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_compose() {
        let s = parse("-swap:amy").unwrap();
        assert!((s.coordinate.lambda() + 1.0).norm() < 1e-15);
        let a = bidisc::rif::amy();
        let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let want = -a.value(z[1], z[0]);
        assert!((s.coordinate.value(z[0], z[1]) - want).norm() < 1e-14);
    }

    #[test]
    fn inline_json_round_trips() {
        let text =
            r#"{"p": {"bidegree": [1, 1], "coeffs": [[[2, 0], [-1, 0]], [[-1, 0], [0, 0]]]}}"#;
        let s = parse(text).unwrap();
        let again = parse(&s.resolved.to_string()).unwrap();
        assert_eq!(s.resolved, again.resolved);
        assert!(
            parse(r#"{"p": {"bidegree": [1, 1], "coeffs": [[[2, 0]], [[-1, 0], [0, 0]]]}}"#)
                .is_err()
        );
    }

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("-1").unwrap(), C64::new(-1.0, 0.0));
        assert_eq!(parse_complex("0.6,-0.8").unwrap(), C64::new(0.6, -0.8));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert!((parse_complex("exp:3.141592653589793").unwrap() + 1.0).norm() < 1e-15);
        assert!(parse_complex("one").is_err());
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(parse("kappa_iterate:9").is_err());
        assert!(parse("sigma").is_err());
        assert!(parse("mean:1,-2").is_err());
    }
}
